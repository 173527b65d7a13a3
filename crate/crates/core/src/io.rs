//! JSONL readers and writers for the corpus files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BibRecord, GoldEntry, GoldStandard, SegmentedReference};

/// Reads one value per non-blank line. Errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: impl AsRef<Path>,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn read_references(path: impl AsRef<Path>) -> Result<Vec<SegmentedReference>> {
    read_jsonl(path)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<BibRecord>> {
    read_jsonl(path)
}

pub fn read_gold(path: impl AsRef<Path>) -> Result<GoldStandard> {
    Ok(GoldStandard::from_entries(read_jsonl::<GoldEntry>(path)?))
}

pub fn write_gold(path: impl AsRef<Path>, gold: &GoldStandard) -> Result<()> {
    write_jsonl(path, &gold.to_entries())
}

/// Writes `records.jsonl`, `references.jsonl` and `gold.jsonl` into `dir`.
pub fn write_corpus(
    dir: impl AsRef<Path>,
    records: &[BibRecord],
    references: &[SegmentedReference],
    gold: &GoldStandard,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(dir.join("records.jsonl"), records)?;
    write_jsonl(dir.join("references.jsonl"), references)?;
    write_gold(dir.join("gold.jsonl"), gold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"title\":\"x\"}\n\n{oops}\n").unwrap();
        match read_records(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn gold_roundtrip_keeps_empty_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.jsonl");
        let gold = GoldStandard::from_entries([
            GoldEntry {
                reference_id: "r1".into(),
                record_ids: vec![],
            },
            GoldEntry {
                reference_id: "r2".into(),
                record_ids: vec!["b".into(), "a".into()],
            },
        ]);
        write_gold(&path, &gold).unwrap();
        let back = read_gold(&path).unwrap();
        assert_eq!(back, gold);
        assert!(!back.has_match("r1"));
        assert!(back.is_match("r2", "a"));
    }
}

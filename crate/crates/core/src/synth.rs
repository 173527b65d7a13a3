//! Seeded generator for a synthetic matching corpus: a bibliographic
//! database with duplicate records, reference strings citing works in (and
//! outside) it, simulated segmenter output and a gold standard.
//!
//! The corpus mimics a social-science literature database: German and
//! English titles, prolific authors with several related works, journals
//! with abbreviations, and citation styles that differ in author, year and
//! number layout. Reference strings carry OCR noise; segment labels carry
//! boundary errors whose token probabilities are lower than those of
//! correctly labeled tokens.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::write_corpus;
use crate::model::{Author, BibRecord, GoldEntry, GoldStandard, Pages, SegmentKind, SegmentToken, SegmentedReference};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub records: usize,
    pub references: usize,
    /// References whose cited work is in the database.
    pub matched_references: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            records: 18_590,
            references: 816,
            matched_references: 517,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<BibRecord>,
    pub references: Vec<SegmentedReference>,
    pub gold: GoldStandard,
}

impl SyntheticCorpus {
    /// Writes `records.jsonl`, `references.jsonl` and `gold.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_corpus(dir, &self.records, &self.references, &self.gold)
    }
}

const GERMAN_WORDS: &[&str] = &[
    "Arbeit", "Alltag", "Wandel", "Gesellschaft", "Familie", "Jugend", "Bildung", "Schule", "Beruf",
    "Migration", "Integration", "Armut", "Ungleichheit", "Wohlfahrtsstaat", "Sozialpolitik", "Politik",
    "Demokratie", "Partei", "Wahl", "Wähler", "Öffentlichkeit", "Medien", "Kommunikation", "Kultur",
    "Religion", "Kirche", "Geschlecht", "Frauen", "Männer", "Generation", "Alter", "Gesundheit",
    "Krankheit", "Pflege", "Stadt", "Region", "Raum", "Umwelt", "Technik", "Wissenschaft",
    "Forschung", "Methode", "Theorie", "Analyse", "Befragung", "Erhebung", "Daten", "Messung",
    "Einstellung", "Werte", "Vertrauen", "Identität", "Biographie", "Lebenslauf", "Mobilität",
    "Karriere", "Einkommen", "Vermögen", "Markt", "Unternehmen", "Organisation", "Verwaltung",
    "Staat", "Recht", "Kriminalität", "Gewalt", "Konflikt", "Protest", "Bewegung", "Netzwerk",
    "Gemeinschaft", "Nachbarschaft", "Engagement", "Ehrenamt", "Freizeit", "Konsum", "Lebensstil",
    "Milieu", "Klasse", "Schicht", "Elite", "Macht", "Herrschaft", "Institution", "Reform",
    "Modernisierung", "Globalisierung", "Europa", "Deutschland", "Osten", "Westen", "Vereinigung",
    "Transformation", "Krise", "Zukunft", "Geschichte", "Erinnerung", "Sprache", "Kindheit",
    "Erziehung", "Hochschule", "Studium", "Weiterbildung", "Qualifikation", "Arbeitsmarkt",
    "Arbeitslosigkeit", "Erwerbstätigkeit", "Rente", "Sicherung", "Zuwanderung", "Flucht",
    "Diskriminierung", "Vorurteile", "Toleranz", "Solidarität", "Gerechtigkeit", "Partizipation",
    "Beteiligung", "Bürger", "Zivilgesellschaft", "Soziologie", "Sozialstruktur", "Lebenslage",
    "Haushalt", "Ehe", "Scheidung", "Fertilität", "Bevölkerung", "Demographie", "Wohnen",
    "Segregation", "Einwanderer", "Aussiedler", "Türken", "Zufriedenheit", "Glück", "Stress",
];

const GERMAN_ADJ: &[&str] = &[
    "soziale", "neue", "politische", "empirische", "berufliche", "regionale", "europäische",
    "deutsche", "öffentliche", "kulturelle", "ökonomische", "demographische", "historische",
    "vergleichende", "qualitative", "quantitative", "lokale", "städtische", "ländliche", "moderne",
];

const GERMAN_LINKS: &[&str] = &["und", "im", "in", "der", "des", "zur", "zum", "von", "als", "zwischen", "nach"];

const ENGLISH_WORDS: &[&str] = &[
    "work", "labour", "market", "family", "youth", "education", "school", "career", "migration",
    "integration", "poverty", "inequality", "welfare", "state", "policy", "politics", "democracy",
    "party", "voting", "elections", "public", "opinion", "media", "communication", "culture",
    "religion", "gender", "women", "men", "generations", "ageing", "health", "illness", "care",
    "city", "urban", "regions", "environment", "technology", "science", "research", "methods",
    "theory", "analysis", "survey", "measurement", "attitudes", "values", "trust", "identity",
    "life", "course", "mobility", "income", "wealth", "firms", "organizations", "bureaucracy",
    "law", "crime", "violence", "conflict", "protest", "movements", "networks", "community",
    "neighbourhoods", "volunteering", "leisure", "consumption", "lifestyles", "class", "stratification",
    "elites", "power", "institutions", "reform", "modernization", "globalization", "europe",
    "germany", "transition", "crisis", "memory", "language", "childhood", "parenting", "university",
    "training", "skills", "unemployment", "employment", "pensions", "refugees", "discrimination",
    "prejudice", "tolerance", "solidarity", "justice", "participation", "citizenship", "civil",
    "society", "sociology", "structure", "households", "marriage", "divorce", "fertility",
    "population", "housing", "segregation", "immigrants", "satisfaction", "happiness", "stress",
    "evidence", "panel", "cohort", "trends", "determinants", "effects", "consequences", "patterns",
];

const ENGLISH_ADJ: &[&str] = &[
    "social", "new", "political", "empirical", "occupational", "regional", "european", "german",
    "comparative", "cultural", "economic", "demographic", "historical", "qualitative", "quantitative",
    "local", "rural", "modern", "longitudinal", "ethnic",
];

const ENGLISH_LINKS: &[&str] = &["and", "of", "in", "the", "for", "on", "among", "between", "across"];

const SURNAMES: &[&str] = &[
    "Müller", "Schmidt", "Schneider", "Fischer", "Weber", "Meyer", "Wagner", "Becker", "Schulz",
    "Hoffmann", "Schäfer", "Koch", "Bauer", "Richter", "Klein", "Wolf", "Schröder", "Neumann",
    "Schwarz", "Zimmermann", "Braun", "Krüger", "Hofmann", "Hartmann", "Lange", "Schmitt",
    "Werner", "Schmitz", "Krause", "Meier", "Lehmann", "Schmid", "Schulze", "Maier", "Köhler",
    "Herrmann", "König", "Walter", "Mayer", "Huber", "Kaiser", "Fuchs", "Peters", "Lang", "Scholz",
    "Möller", "Weiß", "Jung", "Hahn", "Schubert", "Vogel", "Friedrich", "Keller", "Günther",
    "Frank", "Berger", "Winkler", "Roth", "Beck", "Lorenz", "Baumann", "Franke", "Albrecht",
    "Schuster", "Simon", "Ludwig", "Böhm", "Winter", "Kraus", "Martin", "Schumacher", "Krämer",
    "Vogt", "Stein", "Jäger", "Otto", "Sommer", "Groß", "Seidel", "Heinrich", "Brandt", "Haas",
    "Schreiber", "Graf", "Schulte", "Dietrich", "Ziegler", "Kuhn", "Kühn", "Pohl", "Engel",
    "Horn", "Busch", "Bergmann", "Thomas", "Voigt", "Sauer", "Arnold", "Wolff", "Pfeiffer",
    "Smith", "Jones", "Brown", "Taylor", "Wilson", "Davies", "Evans", "Thompson", "Johnson",
    "Walker", "Wright", "Robinson", "White", "Hughes", "Edwards", "Green", "Hall", "Wood",
    "Harris", "Clarke", "Jackson", "Turner", "Hill", "Moore", "Cooper", "Ward", "Morris", "King",
    "Baker", "Allen", "Young", "Bell", "Scott", "Parker", "Collins", "Stewart", "Murphy", "Kelly",
    "Dubois", "Lefebvre", "Moreau", "Rossi", "Bianchi", "Jansen", "Visser", "Nowak", "Kowalski",
    "Yilmaz", "Kaya", "Demir", "Öztürk", "Andersson", "Nilsson", "Hansen", "Larsen", "García",
];

const SYLLABLES_A: &[&str] = &[
    "Ber", "Hal", "Kor", "Lin", "Mar", "Ost", "Rei", "Sal", "Tann", "Wal", "Eck", "Fal", "Gott",
    "Har", "Kes", "Lud", "Mess", "Nor", "Pet", "Rosen", "Schil", "Sten", "Thal", "Wend", "Zell",
    "Alt", "Bren", "Dorn", "Ehr", "Frei", "Gle", "Heil", "Isen", "Kalt", "Lau", "Mol",
];

const SYLLABLES_B: &[&str] = &[
    "mann", "berg", "hardt", "ling", "ner", "stein", "feld", "bach", "wald", "hof", "mayer", "rich",
    "land", "brink", "dorf", "ke", "ler", "mer", "sen", "stedt", "haus", "kamp", "born", "ger",
];

const GIVEN: &[&str] = &[
    "Hans", "Anna", "Peter", "Maria", "Klaus", "Ursula", "Jürgen", "Monika", "Thomas", "Sabine",
    "Michael", "Andrea", "Stefan", "Claudia", "Wolfgang", "Petra", "Karl", "Heike", "Frank",
    "Susanne", "Rainer", "Birgit", "Dieter", "Martina", "Johannes", "Katharina", "Uwe", "Gabriele",
    "Bernd", "Christiane", "John", "Mary", "David", "Sarah", "Robert", "Linda", "James", "Susan",
    "Richard", "Karen", "Paul", "Helen", "Mark", "Laura", "Ulrich", "Eva", "Martin", "Julia",
];

const PUBLISHERS: &[(&str, &str)] = &[
    ("Opladen", "Westdeutscher Verlag"),
    ("Opladen", "Leske + Budrich"),
    ("Wiesbaden", "VS Verlag für Sozialwissenschaften"),
    ("Frankfurt am Main", "Campus"),
    ("Frankfurt am Main", "Suhrkamp"),
    ("München", "Oldenbourg"),
    ("Stuttgart", "Enke"),
    ("Berlin", "Duncker & Humblot"),
    ("Weinheim", "Juventa"),
    ("Bielefeld", "transcript"),
    ("Konstanz", "UVK"),
    ("Baden-Baden", "Nomos"),
    ("London", "Routledge"),
    ("Oxford", "Oxford University Press"),
    ("Cambridge", "Cambridge University Press"),
    ("New York", "Wiley"),
    ("Thousand Oaks", "Sage"),
    ("Chicago", "University of Chicago Press"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Lang {
    German,
    English,
}

#[derive(Debug, Clone)]
struct Journal {
    name: String,
    abbrev: String,
    lang: Lang,
    founded: u16,
    issues: u32,
}

#[derive(Debug, Clone)]
enum Venue {
    Journal(usize),
    /// Edited volume: title, editors, publisher.
    Collection {
        title: String,
        editors: Vec<Author>,
        publisher: usize,
    },
    Monograph {
        publisher: usize,
    },
}

#[derive(Debug, Clone)]
struct Work {
    authors: Vec<Author>,
    title: String,
    subtitle: Option<String>,
    lang: Lang,
    venue: Venue,
    year: u16,
    volume: Option<u32>,
    issue: Option<u32>,
    pages: Option<(u32, u32)>,
}

struct World {
    surnames: Vec<String>,
    surname_weights: WeightedIndex<f64>,
    journals: Vec<Journal>,
    journal_weights: WeightedIndex<f64>,
    /// Topic → vocabulary indices into (German, English) lists.
    topics: Vec<(Vec<usize>, Vec<usize>)>,
    author_topic: Vec<usize>,
}

fn zipf_weights(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|k| 1.0 / (k as f64).powf(s))).expect("non-empty weights")
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn capitalize(word: &str) -> String {
    let mut c = word.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn abbreviate_word(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= 4 {
        return word.to_string();
    }
    // cut after the first consonant following a vowel past position 2
    let vowels = "aeiouäöüAEIOUÄÖÜ";
    let mut cut = chars.len().min(5);
    for i in 2..chars.len().min(7) {
        if !vowels.contains(chars[i]) && vowels.contains(chars[i - 1]) {
            cut = i + 1;
            break;
        }
    }
    let s: String = chars[..cut].iter().collect();
    format!("{s}.")
}

impl World {
    fn new(rng: &mut ChaCha8Rng) -> World {
        let mut names: BTreeSet<String> = SURNAMES.iter().map(|s| s.to_string()).collect();
        let mut surnames: Vec<String> = SURNAMES.iter().map(|s| s.to_string()).collect();
        while surnames.len() < 4000 {
            let mut n = format!("{}{}", pick(rng, SYLLABLES_A), pick(rng, SYLLABLES_B));
            if rng.gen_bool(0.25) {
                n = format!("{}{}", n, pick(rng, SYLLABLES_B));
            }
            if names.insert(n.clone()) {
                surnames.push(n);
            }
        }
        surnames.shuffle(rng);

        let topics: Vec<(Vec<usize>, Vec<usize>)> = (0..40)
            .map(|_| {
                let g = rand::seq::index::sample(rng, GERMAN_WORDS.len(), 24).into_vec();
                let e = rand::seq::index::sample(rng, ENGLISH_WORDS.len(), 24).into_vec();
                (g, e)
            })
            .collect();

        let mut journals = Vec::new();
        let mut seen = HashSet::new();
        while journals.len() < 160 {
            let lang = if rng.gen_bool(0.6) { Lang::German } else { Lang::English };
            let (name, words): (String, Vec<String>) = match lang {
                Lang::German => {
                    let topic = pick(rng, GERMAN_WORDS).to_string();
                    match rng.gen_range(0..6) {
                        0 => (format!("Zeitschrift für {topic}"), vec!["Zeitschrift".into(), topic]),
                        1 => (format!("Archiv für {topic}"), vec!["Archiv".into(), topic]),
                        2 => {
                            let adj = capitalize(pick(rng, GERMAN_ADJ));
                            (format!("{adj} Welt"), vec![adj, "Welt".into()])
                        }
                        3 => (format!("{topic} und Gesellschaft"), vec![topic, "Gesellschaft".into()]),
                        4 => {
                            let city = pick(rng, &["Kölner", "Berliner", "Leipziger", "Mannheimer", "Hamburger"]);
                            (
                                format!("{city} Zeitschrift für {topic}"),
                                vec![city.to_string(), "Zeitschrift".into(), topic],
                            )
                        }
                        _ => (format!("{topic}sforschung"), vec![format!("{topic}sforschung")]),
                    }
                }
                Lang::English => {
                    let topic = capitalize(pick(rng, ENGLISH_WORDS));
                    match rng.gen_range(0..5) {
                        0 => (format!("Journal of {topic} Studies"), vec!["Journal".into(), topic, "Studies".into()]),
                        1 => {
                            let adj = capitalize(pick(rng, ENGLISH_ADJ));
                            (format!("{adj} {topic} Review"), vec![adj, topic, "Review".into()])
                        }
                        2 => (format!("International Journal of {topic}"), vec!["International".into(), "Journal".into(), topic]),
                        3 => (format!("{topic} Quarterly"), vec![topic, "Quarterly".into()]),
                        _ => (format!("European Journal of {topic}"), vec!["European".into(), "Journal".into(), topic]),
                    }
                }
            };
            if !seen.insert(name.clone()) {
                continue;
            }
            let abbrev = words.iter().map(|w| abbreviate_word(w)).collect::<Vec<_>>().join(" ");
            journals.push(Journal {
                name,
                abbrev,
                lang,
                founded: rng.gen_range(1930..1995),
                issues: [2, 4, 4, 4, 6, 12][rng.gen_range(0..6)],
            });
        }

        let author_topic = (0..surnames.len()).map(|_| rng.gen_range(0..topics.len())).collect();
        World {
            surname_weights: zipf_weights(surnames.len(), 0.9),
            surnames,
            journal_weights: zipf_weights(journals.len(), 0.8),
            journals,
            topics,
            author_topic,
        }
    }

    fn author(&self, rng: &mut ChaCha8Rng) -> (usize, Author) {
        let i = self.surname_weights.sample(rng);
        // the same surname covers a few distinct people
        let given = GIVEN[(i * 7 + rng.gen_range(0..3)) % GIVEN.len()];
        (i, Author::new(self.surnames[i].clone(), Some(given)))
    }

    fn title_words(&self, rng: &mut ChaCha8Rng, topic: usize, lang: Lang, n: usize) -> String {
        let (g, e) = &self.topics[topic];
        let mut out: Vec<String> = Vec::new();
        for k in 0..n {
            if k > 0 && rng.gen_bool(0.45) {
                let link = match lang {
                    Lang::German => pick(rng, GERMAN_LINKS),
                    Lang::English => pick(rng, ENGLISH_LINKS),
                };
                out.push(link.to_string());
            }
            let word = match lang {
                Lang::German => {
                    if rng.gen_bool(0.2) {
                        pick(rng, GERMAN_ADJ).to_string()
                    } else if rng.gen_bool(0.75) {
                        GERMAN_WORDS[g[rng.gen_range(0..g.len())]].to_string()
                    } else {
                        pick(rng, GERMAN_WORDS).to_string()
                    }
                }
                Lang::English => {
                    let w = if rng.gen_bool(0.2) {
                        pick(rng, ENGLISH_ADJ).to_string()
                    } else if rng.gen_bool(0.75) {
                        ENGLISH_WORDS[e[rng.gen_range(0..e.len())]].to_string()
                    } else {
                        pick(rng, ENGLISH_WORDS).to_string()
                    };
                    if k == 0 {
                        capitalize(&w)
                    } else {
                        w
                    }
                }
            };
            out.push(word);
        }
        let mut s = out.join(" ");
        if lang == Lang::German {
            s = capitalize(&s);
        }
        s
    }

    fn work(&self, rng: &mut ChaCha8Rng) -> Work {
        let n_authors = [1, 1, 1, 1, 2, 2, 2, 3, 3, 4][rng.gen_range(0..10)];
        let mut authors = Vec::new();
        let mut used = HashSet::new();
        let mut topic = None;
        while authors.len() < n_authors {
            let (i, a) = self.author(rng);
            if used.insert(a.surname.clone()) {
                topic.get_or_insert(self.author_topic[i]);
                authors.push(a);
            }
        }
        let topic = topic.unwrap_or(0);
        let kind = rng.gen_range(0..100);
        let year = {
            let u: f64 = rng.gen();
            (2016.0 - 56.0 * u * u) as u16
        };
        let (venue, lang) = if kind < 65 {
            let j = self.journal_weights.sample(rng);
            (Venue::Journal(j), self.journals[j].lang)
        } else {
            let lang = if rng.gen_bool(0.65) { Lang::German } else { Lang::English };
            let publisher = rng.gen_range(0..PUBLISHERS.len());
            if kind < 88 {
                let editors = (0..rng.gen_range(1..=2)).map(|_| self.author(rng).1).collect();
                let n = rng.gen_range(2..5);
                let title = self.title_words(rng, topic, lang, n);
                (Venue::Collection { title, editors, publisher }, lang)
            } else {
                (Venue::Monograph { publisher }, lang)
            }
        };
        let n = rng.gen_range(2..7);
        let title = self.title_words(rng, topic, lang, n);
        let subtitle = if rng.gen_bool(0.35) {
            let (t, n) = (rng.gen_range(0..self.topics.len()), rng.gen_range(2..5));
            Some(self.title_words(rng, t, lang, n))
        } else {
            None
        };
        let (volume, issue, pages) = match &venue {
            Venue::Journal(j) => {
                let jr = &self.journals[*j];
                let volume = u32::from(year.saturating_sub(jr.founded)) + 1;
                let start = rng.gen_range(1..600);
                (
                    Some(volume),
                    rng.gen_bool(0.9).then(|| rng.gen_range(1..=jr.issues)),
                    Some((start, start + rng.gen_range(6..35))),
                )
            }
            Venue::Collection { .. } => {
                let start = rng.gen_range(7..400);
                (None, None, Some((start, start + rng.gen_range(8..40))))
            }
            Venue::Monograph { .. } => (None, None, None),
        };
        Work {
            authors,
            title,
            subtitle,
            lang,
            venue,
            year,
            volume,
            issue,
            pages,
        }
    }
}

impl World {
    /// A different work easily mistaken for `work`: a review of it, another
    /// edition, or a follow-up by the same authors.
    fn related(&self, rng: &mut ChaCha8Rng, work: &Work) -> Work {
        let mut other = self.work(rng);
        let r: f64 = rng.gen();
        if r < 0.35 {
            // review: same title, a reviewer as author, later year
            other.title = work.title.clone();
            other.subtitle = work.subtitle.clone();
            other.lang = work.lang;
            other.year = work.year + rng.gen_range(1..=3);
        } else if r < 0.65 {
            // another edition
            other.authors = work.authors.clone();
            other.title = work.title.clone();
            other.subtitle = work.subtitle.clone().filter(|_| rng.gen_bool(0.5));
            other.lang = work.lang;
            other.year = work.year + rng.gen_range(2..=10);
            other.venue = Venue::Monograph {
                publisher: rng.gen_range(0..PUBLISHERS.len()),
            };
            other.volume = None;
            other.issue = None;
            other.pages = None;
        } else {
            // follow-up in the same venue
            other.authors = work.authors.clone();
            if other.authors.len() > 1 && rng.gen_bool(0.5) {
                other.authors.pop();
            }
            other.title = work.title.clone();
            other.lang = work.lang;
            other.year = work.year + rng.gen_range(0..=3);
            if let (Venue::Journal(j), Some(v)) = (&work.venue, work.volume) {
                other.venue = Venue::Journal(*j);
                other.volume = Some(v + u32::from(other.year - work.year));
            }
        }
        other.year = other.year.min(2016);
        other
    }
}

fn transliterate(s: &str) -> String {
    s.replace('ä', "ae")
        .replace('ö', "oe")
        .replace('ü', "ue")
        .replace('Ä', "Ae")
        .replace('Ö', "Oe")
        .replace('Ü', "Ue")
        .replace('ß', "ss")
}

impl World {
    fn source_of(&self, work: &Work) -> (String, Option<String>) {
        match &work.venue {
            Venue::Journal(j) => (self.journals[*j].name.clone(), Some(self.journals[*j].abbrev.clone())),
            Venue::Collection { title, .. } => (title.clone(), None),
            Venue::Monograph { publisher } => (PUBLISHERS[*publisher].1.to_string(), None),
        }
    }

    /// Database record of a work; `variant > 0` produces a duplicate entry
    /// with the usual cataloguing differences.
    fn record(&self, rng: &mut ChaCha8Rng, work: &Work, id: String, variant: usize) -> BibRecord {
        let (source, abbrev) = self.source_of(work);
        let mut title = match &work.subtitle {
            Some(sub) => format!("{}: {}", work.title, sub),
            None => work.title.clone(),
        };
        let mut authors = work.authors.clone();
        let mut year = Some(work.year.to_string());
        let mut source = source;
        let mut abbrev = abbrev.filter(|_| rng.gen_bool(0.6));
        let mut volume = work.volume.map(|v| v.to_string());
        let mut issue = work.issue.map(|v| v.to_string());
        let mut pages = work.pages.map(|(s, e)| Pages {
            start: s.to_string(),
            end: Some(e.to_string()),
        });
        if variant > 0 {
            if work.subtitle.is_some() && rng.gen_bool(0.4) {
                title = work.title.clone();
            }
            if rng.gen_bool(0.25) {
                title = transliterate(&title);
                authors.iter_mut().for_each(|a| a.surname = transliterate(&a.surname));
            }
            if rng.gen_bool(0.15) {
                title = title.to_uppercase();
            }
            if rng.gen_bool(0.15) {
                authors.truncate(1);
            }
            if rng.gen_bool(0.3) {
                authors.iter_mut().for_each(|a| a.given = None);
            }
            if rng.gen_bool(0.1) {
                year = None;
            } else if rng.gen_bool(0.05) {
                year = Some((work.year + 1).to_string());
            }
            if rng.gen_bool(0.3) {
                pages = None;
            }
            if rng.gen_bool(0.2) {
                volume = None;
                issue = None;
            }
            if let Some(a) = abbrev.clone() {
                if rng.gen_bool(0.2) {
                    source = a;
                    abbrev = None;
                }
            }
        }
        BibRecord {
            id,
            authors,
            title,
            source,
            source_abbrev: abbrev,
            year,
            volume,
            issue,
            pages,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Author,
    Title,
    Year,
    Source,
    Volume,
    Issue,
    Page,
    Other,
}

struct Rendered {
    tokens: Vec<(String, Label)>,
}

impl Rendered {
    fn push(&mut self, text: impl Into<String>, label: Label) {
        let text = text.into();
        for t in text.split_whitespace() {
            self.tokens.push((t.to_string(), label));
        }
    }

    /// Appends punctuation to the last token.
    fn attach(&mut self, punct: &str) {
        if let Some(last) = self.tokens.last_mut() {
            last.0.push_str(punct);
        }
    }
}

fn initials(given: &str) -> String {
    given.chars().next().map(|c| format!("{c}.")).unwrap_or_default()
}

fn render_authors(out: &mut Rendered, authors: &[Author], style: usize, rng: &mut ChaCha8Rng) {
    let et_al = authors.len() > 2 && rng.gen_bool(0.4);
    let shown = if et_al { &authors[..1] } else { authors };
    for (k, a) in shown.iter().enumerate() {
        let given = a.given.as_deref().unwrap_or("");
        let surname = if style == 2 { a.surname.to_uppercase() } else { a.surname.clone() };
        match style {
            0 => {
                if k > 0 {
                    out.attach("/");
                }
                out.push(format!("{surname},"), Label::Author);
                out.push(given, Label::Author);
            }
            1 => {
                if k > 0 {
                    out.push(if k + 1 == shown.len() { "&" } else { "" }, Label::Author);
                }
                out.push(format!("{surname},"), Label::Author);
                let sep = if k + 1 < shown.len() { "," } else { "" };
                out.push(format!("{}{sep}", initials(given)), Label::Author);
            }
            2 => {
                if k > 0 {
                    out.push("und", Label::Author);
                }
                out.push(format!("{surname},"), Label::Author);
                out.push(initials(given), Label::Author);
            }
            _ => {
                let sep = if k + 1 < shown.len() { "," } else { "." };
                out.push(&surname, Label::Author);
                out.push(format!("{}{sep}", initials(given).trim_end_matches('.')), Label::Author);
            }
        }
    }
    if et_al {
        out.push("et al.", Label::Author);
    }
}

impl World {
    fn render(&self, rng: &mut ChaCha8Rng, work: &Work) -> Rendered {
        let mut out = Rendered { tokens: Vec::new() };
        let style = rng.gen_range(0..4);
        render_authors(&mut out, &work.authors, style, rng);
        let year = work.year.to_string();
        let title = match &work.subtitle {
            Some(s) if rng.gen_bool(0.8) => format!("{}: {}", work.title, s),
            _ => work.title.clone(),
        };
        let (source, abbrev) = self.source_of(work);
        let source = match abbrev {
            Some(a) if rng.gen_bool(0.45) => a,
            _ => source,
        };
        match style {
            0 => out.push(format!("({year}):"), Label::Year),
            1 => out.push(format!("({year})."), Label::Year),
            2 => {
                out.attach(",");
                out.push(format!("{year}:"), Label::Year);
            }
            _ => {}
        }
        out.push(&title, Label::Title);
        out.attach(".");
        match &work.venue {
            Venue::Journal(_) => {
                if style == 0 {
                    out.push("In:", Label::Other);
                }
                out.push(&source, Label::Source);
                if style == 3 {
                    out.attach(".");
                    out.push(format!("{year};"), Label::Year);
                } else if style == 1 {
                    out.attach(",");
                }
                if let Some(v) = work.volume {
                    match (style, work.issue) {
                        (1, Some(i)) => out.push(format!("{v}({i}),"), Label::Volume),
                        (1, None) => out.push(format!("{v},"), Label::Volume),
                        (3, Some(i)) => out.push(format!("{v}({i}):"), Label::Volume),
                        (3, None) => out.push(format!("{v}:"), Label::Volume),
                        (2, Some(i)) => {
                            out.push(v.to_string(), Label::Volume);
                            out.push(format!("({i}):"), Label::Issue);
                        }
                        (_, Some(i)) => {
                            out.push(v.to_string(), Label::Volume);
                            out.push(format!("({i}),"), Label::Issue);
                        }
                        (_, None) => out.push(format!("{v},"), Label::Volume),
                    }
                }
                if let Some((s, e)) = work.pages {
                    if style == 0 {
                        out.push("S.", Label::Other);
                    }
                    out.push(format!("{s}-{e}."), Label::Page);
                }
            }
            Venue::Collection {
                title: book,
                editors,
                publisher,
            } => {
                out.push("In:", Label::Other);
                for (k, e) in editors.iter().enumerate() {
                    if k > 0 {
                        out.attach("/");
                    }
                    out.push(format!("{},", e.surname), Label::Other);
                    out.push(initials(e.given.as_deref().unwrap_or("")), Label::Other);
                }
                out.push(if work.lang == Lang::German { "(Hrsg.):" } else { "(Eds.)," }, Label::Other);
                out.push(book, Label::Source);
                out.attach(".");
                let (place, name) = PUBLISHERS[*publisher];
                out.push(format!("{place}:"), Label::Other);
                out.push(name, Label::Other);
                if style == 3 {
                    out.attach(";");
                    out.push(format!("{year}."), Label::Year);
                } else {
                    out.attach(",");
                }
                if let Some((s, e)) = work.pages {
                    out.push(if work.lang == Lang::German { "S." } else { "pp." }, Label::Other);
                    out.push(format!("{s}-{e}."), Label::Page);
                }
            }
            Venue::Monograph { publisher } => {
                let (place, name) = PUBLISHERS[*publisher];
                out.push(format!("{place}:"), Label::Other);
                out.push(name, Label::Source);
                if style == 3 {
                    out.attach(";");
                    out.push(format!("{year}."), Label::Year);
                } else {
                    out.attach(".");
                }
            }
        }
        out
    }
}

/// Character-level OCR confusions.
fn ocr_noise(rng: &mut ChaCha8Rng, token: &str) -> String {
    let chars: Vec<char> = token.chars().collect();
    if chars.len() < 3 {
        return token.to_string();
    }
    let i = rng.gen_range(0..chars.len());
    let mut out: Vec<char> = chars.clone();
    match rng.gen_range(0..6) {
        0 => {
            out[i] = match chars[i] {
                'l' => '1',
                'i' => 'l',
                'o' => '0',
                'e' => 'c',
                'n' => 'u',
                'u' => 'n',
                'ü' => 'u',
                'ö' => 'o',
                'ä' => 'a',
                c => c,
            }
        }
        1 => {
            out.remove(i);
        }
        2 => {
            if chars[i] == 'm' {
                out.splice(i..=i, ['r', 'n']);
            } else {
                out.insert(i, chars[i]);
            }
        }
        3 => {
            if i + 1 < out.len() {
                out.swap(i, i + 1);
            }
        }
        4 => {
            out = out.into_iter().map(|c| match c {
                'ü' => 'u',
                'ö' => 'o',
                'ä' => 'a',
                'ß' => 'b',
                c => c,
            }).collect();
        }
        _ => {
            out[i] = match chars[i] {
                'c' => 'e',
                'h' => 'b',
                'r' => 'n',
                't' => 'f',
                c => c,
            }
        }
    }
    let s: String = out.into_iter().collect();
    if s.trim().is_empty() {
        token.to_string()
    } else {
        s
    }
}

fn kind_of(label: Label) -> Option<SegmentKind> {
    match label {
        Label::Author => Some(SegmentKind::Author),
        Label::Title => Some(SegmentKind::Title),
        Label::Year => Some(SegmentKind::Year),
        Label::Source => Some(SegmentKind::Source),
        Label::Page => Some(SegmentKind::Page),
        Label::Volume | Label::Issue | Label::Other => None,
    }
}

/// Segmenter simulation: relabels some tokens and assigns probabilities.
/// Mislabeled tokens get systematically lower probabilities.
fn segment(rng: &mut ChaCha8Rng, id: String, rendered: Rendered, noise: f64) -> SegmentedReference {
    let mut tokens = rendered.tokens;
    // OCR noise and hyphenation on the text
    let mut noisy = Vec::with_capacity(tokens.len());
    for (t, l) in tokens.drain(..) {
        if l == Label::Title && t.chars().count() > 9 && rng.gen_bool(noise * 0.5) {
            let chars: Vec<char> = t.chars().collect();
            let cut = chars.len() / 2;
            noisy.push((chars[..cut].iter().collect::<String>() + "-", l));
            noisy.push((chars[cut..].iter().collect::<String>(), l));
            continue;
        }
        let t = if rng.gen_bool(noise) { ocr_noise(rng, &t) } else { t };
        noisy.push((t, l));
    }
    let raw = noisy.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>().join(" ");

    let quality = if noise > 0.05 {
        2
    } else {
        match rng.gen_range(0..20) {
            0..=10 => 0,
            11..=16 => 1,
            _ => 2,
        }
    };
    let p = |a: f64, b: f64, c: f64| [a, b, c][quality];
    let mut labels: Vec<Label> = noisy.iter().map(|(_, l)| *l).collect();
    let truth = labels.clone();
    let span = |labels: &[Label], l: Label| -> Option<(usize, usize)> {
        let first = labels.iter().position(|&x| x == l)?;
        let last = labels.iter().rposition(|&x| x == l)?;
        Some((first, last))
    };

    if let Some((ts, te)) = span(&labels, Label::Title) {
        let n = te - ts + 1;
        if rng.gen_bool(p(0.02, 0.06, 0.15)) {
            // whole title read as source
            labels[ts..=te].iter_mut().for_each(|l| *l = Label::Source);
        } else {
            if rng.gen_bool(p(0.08, 0.25, 0.45)) && n > 2 {
                let k = rng.gen_range(1..=(n / 2).min(4));
                labels[te + 1 - k..=te].iter_mut().for_each(|l| *l = Label::Source);
            }
            if rng.gen_bool(p(0.03, 0.10, 0.2)) && n > 2 {
                labels[ts] = Label::Author;
            }
        }
    }
    if let Some((ss, se)) = span(&truth, Label::Source) {
        if rng.gen_bool(p(0.05, 0.15, 0.3)) {
            let k = rng.gen_range(1..=(se - ss + 1).min(3));
            labels[ss..ss + k].iter_mut().for_each(|l| *l = Label::Title);
        }
    }
    for (i, l) in truth.iter().enumerate() {
        let r: f64 = rng.gen();
        match l {
            Label::Year if r < p(0.02, 0.05, 0.12) => labels[i] = Label::Other,
            Label::Volume | Label::Issue if r < p(0.03, 0.08, 0.15) => {
                labels[i] = if rng.gen_bool(0.5) { Label::Page } else { Label::Other }
            }
            Label::Volume if r < p(0.06, 0.12, 0.2) => labels[i] = Label::Issue,
            Label::Page if r < p(0.03, 0.08, 0.15) => labels[i] = Label::Other,
            Label::Other if r < p(0.1, 0.2, 0.35) => labels[i] = Label::Source,
            Label::Author if r < p(0.01, 0.03, 0.08) => labels[i] = Label::Title,
            _ => {}
        }
    }

    let mut reference = SegmentedReference::new(id, raw);
    let mut segments: std::collections::BTreeMap<SegmentKind, Vec<SegmentToken>> = Default::default();
    let uncertainty = p(0.12, 0.25, 0.4);
    for (((text, _), label), truth) in noisy.into_iter().zip(labels).zip(truth) {
        let prob = if label == truth {
            1.0 - rng.gen_range(0.0..uncertainty) * rng.gen::<f64>()
        } else {
            rng.gen_range(0.3..0.8)
        };
        let prob = (prob * 1000.0).round() / 1000.0;
        let token = SegmentToken::new(text, prob).expect("generated token is valid");
        match label {
            Label::Volume => reference.volume.push(token),
            Label::Issue => reference.issue.push(token),
            other => {
                if let Some(kind) = kind_of(other) {
                    segments.entry(kind).or_default().push(token);
                }
            }
        }
    }
    reference.segments = segments;
    reference
}

/// Number of database entries per work.
fn duplicate_count(rng: &mut ChaCha8Rng, cited: bool) -> usize {
    let r: f64 = rng.gen();
    let table: &[(f64, usize)] = if cited {
        &[(0.50, 1), (0.75, 2), (0.87, 3), (0.94, 4), (0.98, 5), (1.0, 6)]
    } else {
        &[(0.90, 1), (0.98, 2), (1.0, 3)]
    };
    table.iter().find(|(c, _)| r < *c).map_or(1, |(_, n)| *n)
}

/// Builds a corpus. Identical configurations give identical corpora.
pub fn generate(config: &SynthConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let world = World::new(&mut rng);
    let matched = config.matched_references.min(config.references);

    // (work, duplicate count, cited by reference index)
    let mut entries: Vec<(Work, usize)> = Vec::new();
    let mut cited_works: Vec<usize> = Vec::new();
    let mut total = 0;
    for _ in 0..matched {
        if total >= config.records {
            break;
        }
        let n = duplicate_count(&mut rng, true).min(config.records - total);
        let work = world.work(&mut rng);
        total += n;
        if rng.gen_bool(0.5) && total < config.records {
            entries.push((world.related(&mut rng, &work), 1));
            total += 1;
        }
        cited_works.push(entries.len());
        entries.push((work, n));
    }
    // cited works missing from the database may still have relatives in it
    let uncited: Vec<Work> = (0..config.references - cited_works.len())
        .map(|_| world.work(&mut rng))
        .collect();
    for work in &uncited {
        if rng.gen_bool(0.5) && total < config.records {
            entries.push((world.related(&mut rng, work), 1));
            total += 1;
        }
    }
    while total < config.records {
        let n = duplicate_count(&mut rng, false).min(config.records - total);
        let work = world.work(&mut rng);
        if rng.gen_bool(0.12) && total + n < config.records {
            entries.push((world.related(&mut rng, &work), 1));
            total += 1;
        }
        entries.push((work, n));
        total += n;
    }

    // records in shuffled order so that duplicates are not adjacent
    let mut slots: Vec<(usize, usize)> = entries
        .iter()
        .enumerate()
        .flat_map(|(w, (_, n))| (0..*n).map(move |v| (w, v)))
        .collect();
    slots.shuffle(&mut rng);
    let mut work_records: Vec<Vec<String>> = vec![Vec::new(); entries.len()];
    let records: Vec<BibRecord> = slots
        .iter()
        .enumerate()
        .map(|(i, &(w, v))| {
            let id = format!("db{:06}", i + 1);
            work_records[w].push(id.clone());
            world.record(&mut rng, &entries[w].0, id, v)
        })
        .collect();

    let mut cited: Vec<Option<usize>> = cited_works.iter().map(|&w| Some(w)).collect();
    cited.extend(std::iter::repeat_n(None, uncited.len()));
    cited.shuffle(&mut rng);
    let mut uncited = uncited.into_iter();
    let mut references = Vec::with_capacity(cited.len());
    let mut gold_entries = Vec::with_capacity(cited.len());
    for (i, target) in cited.into_iter().enumerate() {
        let id = format!("ref{:04}", i + 1);
        let work = match target {
            Some(w) => entries[w].0.clone(),
            None => uncited.next().expect("one uncited work per unmatched reference"),
        };
        let noise = [0.0, 0.0, 0.0, 0.03, 0.03, 0.08][rng.gen_range(0..6)];
        let rendered = world.render(&mut rng, &work);
        references.push(segment(&mut rng, id.clone(), rendered, noise));
        gold_entries.push(GoldEntry {
            reference_id: id,
            record_ids: target.map(|w| work_records[w].to_vec()).unwrap_or_default(),
        });
    }
    SyntheticCorpus {
        records,
        references,
        gold: GoldStandard::from_entries(gold_entries),
    }
}

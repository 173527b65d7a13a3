//! The inverted index must agree with a linear scan over the records, in
//! both membership and ranking.

mod common;

#[test]
fn search_matches_linear_scan_on_random_queries() {
    common::check_index_against_scan(1000).unwrap();
}

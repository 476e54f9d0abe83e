//! Library results against independent reference computations.

mod common;

use common::suites;

#[test]
fn components_match_flood_fill_on_random_masks() {
    suites::check_components().unwrap();
}

#[test]
fn t_values_match_direct_formula() {
    suites::check_t_values().unwrap();
}

#[test]
fn t_to_p_matches_numeric_integration() {
    suites::check_t_to_p().unwrap();
}

#[test]
fn fdr_matches_step_up_definition() {
    suites::check_fdr().unwrap();
}

#[test]
fn percentile_matches_sorted_scan() {
    suites::check_percentile().unwrap();
}

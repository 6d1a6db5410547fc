//! `solve_mcm` against breadth-first enumeration of fundamental sets.

mod common;

use common::bfs::compare_with_solver;

#[test]
fn singles_up_to_4096_and_pairs_up_to_255() {
    let c = compare_with_solver();
    assert!(c.cases > 10_000);
    assert_eq!(c.unresolved, 0, "oracle depth too small");
    assert!(c.mismatches.is_empty(), "{} mismatches, first {:?}", c.mismatches.len(), &c.mismatches[..c.mismatches.len().min(10)]);
}

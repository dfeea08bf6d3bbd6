use aou_core::verify::{run_suite, Suite};

#[test]
fn full_suite_passes() {
    let report = run_suite(Suite::All, 7);
    println!("{}", report.table());
    assert!(report.all_passed(), "{}", report.table());
}

mod support;

use ofmfa::SigmaMode;
use support::geweke;

#[test]
fn geweke_per_component() {
    for check in geweke::run(SigmaMode::PerComponent, 100_000, 21) {
        println!("{check:?} z = {:.2}", check.z_score());
        assert!(check.z_score().abs() < 3.0, "{}: z = {}", check.name, check.z_score());
    }
}

#[test]
fn geweke_shared() {
    for check in geweke::run(SigmaMode::Shared, 100_000, 22) {
        println!("{check:?} z = {:.2}", check.z_score());
        assert!(check.z_score().abs() < 3.0, "{}: z = {}", check.name, check.z_score());
    }
}

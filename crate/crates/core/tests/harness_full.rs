use colcert::oracle::{run_harness, Family, HarnessConfig};

#[test]
fn default_harness_has_no_violations() {
    let s = run_harness(&HarnessConfig::default()).unwrap();
    assert!(s.passed(), "{:#?}", s.violations);
    assert!(s.outcomes.len() >= 100);
    let bern = s.outcomes.iter().filter(|o| o.family == Family::Bernoulli).count();
    assert!(bern > 0 && bern < s.outcomes.len(), "both families must be exercised");
    for o in &s.outcomes {
        assert!(o.naive <= o.relaxed && o.relaxed <= o.exact && o.exact <= o.truth, "{o:?}");
    }
    // The collective bound must actually buy something on some instances.
    assert!(s.outcomes.iter().any(|o| o.exact > o.naive));
}

#[test]
fn inflated_radii_are_caught() {
    let cfg = HarnessConfig { eta_inflation: 1.1, ..HarnessConfig::default() };
    let s = run_harness(&cfg).unwrap();
    assert!(!s.passed());
}

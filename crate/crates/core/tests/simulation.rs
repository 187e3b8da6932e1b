//! Unconditional moments of the simulated process against the exact ones.

use spcrit::moments::variance;
use spcrit::montecarlo::{simulate_paths, SampleSummary, SimConfig};
use spcrit::reference::symmetric_pair;
use spcrit::{Field, Measure};

#[test]
fn mean_and_variance_match_moment_formulas() {
    let m2 = symmetric_pair();
    let mu = Measure::from_slice(&[1.0, 0.5]).unwrap();
    let f = Field::from_slice(&[1.0, -0.5]);
    let t = 2.0;
    let e = simulate_paths(&m2, &mu, &SimConfig::new(t, 0.005, 20_000, 5)).unwrap();
    let s = SampleSummary::from_values(&e.pairings(&f));
    let exact = variance(&m2, &f, t, &mu).unwrap();
    assert!((s.mean - exact.mean).abs() <= 4.0 * s.mean_se, "{s:?} vs {exact:?}");
    assert!(
        (s.variance - exact.variance).abs() <= 5.0 * s.variance_se,
        "{s:?} vs {exact:?}"
    );
}

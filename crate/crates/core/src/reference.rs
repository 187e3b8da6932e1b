//! Small reference models and a generator of random critical models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::model::{BranchingData, JumpAtom, SpatialGenerator, StateSpace, SuperprocessModel};
use crate::spectral::criticalize;

/// One state, `β = 1`, `a = 0`, `b = 0.5`, no jumps.
pub fn single_point() -> SuperprocessModel<f64> {
    build(&["o"], &[1.0], &[0.0], &[1.0], &[0.0], &[0.5], vec![vec![]])
}

/// Two states with unit symmetric switching, `β = 1`, `a = 0`, `b = 1`.
pub fn symmetric_pair() -> SuperprocessModel<f64> {
    symmetric_pair_with_linear(0.0, 0.0)
}

pub fn symmetric_pair_with_linear(a0: f64, a1: f64) -> SuperprocessModel<f64> {
    build(
        &["A", "B"],
        &[1.0, 1.0],
        &[-1.0, 1.0, 1.0, -1.0],
        &[1.0, 1.0],
        &[a0, a1],
        &[1.0, 1.0],
        vec![vec![], vec![]],
    )
}

/// One state, `b = 0`, a single jump atom `y = 1`, `w = 1`.
pub fn single_point_jumps() -> SuperprocessModel<f64> {
    build(
        &["o"],
        &[1.0],
        &[0.0],
        &[1.0],
        &[0.0],
        &[0.0],
        vec![vec![JumpAtom { y: 1.0, w: 1.0 }]],
    )
}

fn build(
    labels: &[&str],
    m: &[f64],
    q: &[f64],
    beta: &[f64],
    a: &[f64],
    b: &[f64],
    jumps: Vec<Vec<JumpAtom<f64>>>,
) -> SuperprocessModel<f64> {
    let n = labels.len();
    let space = StateSpace::new(
        labels.iter().map(|s| s.to_string()).collect(),
        DVector::from_column_slice(m),
    )
    .expect("reference state space");
    let motion = SpatialGenerator::new(DMatrix::from_row_slice(n, n, q)).expect("reference generator");
    let branching = BranchingData {
        rate: DVector::from_column_slice(beta),
        linear: DVector::from_column_slice(a),
        quadratic: DVector::from_column_slice(b),
        jumps,
    };
    SuperprocessModel::new(space, motion, branching).expect("reference model")
}

/// Random irreducible model on `n` states: positive off-diagonal rates,
/// optional killing, random weights and mechanism, `b > 0` everywhere and
/// occasional jump atoms. Not critical in general.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SuperprocessModel<f64> {
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut out = 0.0;
        for j in 0..n {
            if i != j {
                let r = rng.random_range(0.1..2.0);
                q[(i, j)] = r;
                out += r;
            }
        }
        let killing = if rng.random_bool(0.3) { rng.random_range(0.0..0.5) } else { 0.0 };
        q[(i, i)] = -out - killing;
    }
    let labels = (0..n).map(|i| format!("s{i}")).collect();
    let m = DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
    let beta = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    let a = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let b = DVector::from_fn(n, |_, _| rng.random_range(0.2..1.0));
    let jumps = (0..n)
        .map(|_| {
            let k = if rng.random_bool(0.5) { rng.random_range(1..3) } else { 0 };
            (0..k)
                .map(|_| JumpAtom {
                    y: rng.random_range(0.1..1.5),
                    w: rng.random_range(0.1..1.0),
                })
                .collect()
        })
        .collect();
    let space = StateSpace::new(labels, m).expect("random weights are positive");
    let motion = SpatialGenerator::new(q).expect("random generator is valid");
    SuperprocessModel::new(
        space,
        motion,
        BranchingData {
            rate: beta,
            linear: a,
            quadratic: b,
            jumps,
        },
    )
    .expect("random model is valid")
}

/// [`random_model`] shifted to criticality.
pub fn random_critical_model<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SuperprocessModel<f64> {
    criticalize(&random_model(rng, n)).expect("random models have beta > 0")
}

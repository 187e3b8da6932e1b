//! First and second moments of `⟨f, X_t⟩`.
//!
//! `E_μ⟨f, X_t⟩ = ⟨T_t f, μ⟩` and
//! `Var_μ⟨f, X_t⟩ = ∫_E ∫₀ᵗ T_s[A (T_{t-s} f)²](x) ds μ(dx)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::SuperprocessModel;
use crate::scalar::Scalar;
use crate::spectral::{decay_integral, sigma_f_squared_with, Propagator, SpectralData, PROJECTION_TOL};
use crate::vector::{FieldVector, MeasureVector};

/// Relative change between Simpson refinements accepted as converged.
pub const QUAD_RTOL: f64 = 1e-8;

const MIN_INTERVALS: usize = 64;
const MAX_INTERVALS: usize = 1 << 20;

fn check_inputs<T: Scalar>(
    model: &SuperprocessModel<T>,
    f: &FieldVector<T>,
    t: T,
) -> Result<()> {
    if f.len() != model.len() {
        return Err(Error::arg(format!(
            "f has {} entries, model has {} states",
            f.len(),
            model.len()
        )));
    }
    if !(t >= T::zero()) {
        return Err(Error::arg(format!("time must be >= 0, got {}", t.to_f64())));
    }
    Ok(())
}

/// `⟨T_t f, μ⟩`.
pub fn first_moment<T: Scalar>(
    model: &SuperprocessModel<T>,
    f: &FieldVector<T>,
    t: T,
    mu: &MeasureVector<T>,
) -> Result<T> {
    check_inputs(model, f, t)?;
    let tf = Propagator::new(model).exp(t) * &f.0;
    Ok(tf.dot(mu.values()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceResult<T> {
    pub mean: T,
    pub variance: T,
    /// `mean² + variance`.
    pub second_moment: T,
    /// `e^{Kt} ⟨T_t(f²), μ⟩`, an upper bound for `variance`.
    pub bound: T,
    /// Simpson intervals at convergence.
    pub intervals: usize,
}

impl<T: Scalar> VarianceResult<T> {
    pub fn within_bound(&self) -> bool {
        self.variance <= self.bound * (T::one() + T::tol(1e-10))
    }
}

/// `Var_{δx}⟨f, X_t⟩` for every `x`, with the Simpson interval count used.
pub fn variance_per_state<T: Scalar>(
    model: &SuperprocessModel<T>,
    f: &FieldVector<T>,
    t: T,
) -> Result<(DVector<T>, usize)> {
    check_inputs(model, f, t)?;
    let n = model.len();
    if t == T::zero() {
        return Ok((DVector::zeros(n), 0));
    }
    let propagator = Propagator::new(model);
    let a = model.derived_coefficients().variance_rate;

    let evaluate = |intervals: usize| {
        let h = t / T::lit(intervals as f64);
        let step = propagator.exp(h);
        // forward[k] = T_{kh} f
        let mut forward = Vec::with_capacity(intervals + 1);
        forward.push(f.0.clone());
        for k in 0..intervals {
            let next = &step * &forward[k];
            forward.push(next);
        }
        // Σ_k w_k T_{kh}[A (T_{(N-k)h} f)²], summed by Horner in T_h.
        let weight = |k: usize| {
            let w = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            T::lit(w) * h / T::lit(3.0)
        };
        let source = |k: usize| {
            let v = &forward[intervals - k];
            DVector::from_fn(n, |x, _| a[x] * v[x] * v[x]) * weight(k)
        };
        let mut acc = source(intervals);
        for k in (0..intervals).rev() {
            acc = source(k) + &step * acc;
        }
        acc
    };

    let mut intervals = MIN_INTERVALS;
    let mut previous = evaluate(intervals);
    loop {
        intervals *= 2;
        let current = evaluate(intervals);
        let scale = current.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        let change = (&current - &previous).abs().max();
        if change <= T::tol(QUAD_RTOL) * scale + T::epsilon() * T::lit(16.0) * scale
            || scale == T::zero()
        {
            return Ok((current, intervals));
        }
        if intervals >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "variance quadrature unresolved at {intervals} intervals (change {:e})",
                change.to_f64()
            )));
        }
        previous = current;
    }
}

/// Mean, variance and second moment of `⟨f, X_t⟩` under `P_μ`.
pub fn variance<T: Scalar>(
    model: &SuperprocessModel<T>,
    f: &FieldVector<T>,
    t: T,
    mu: &MeasureVector<T>,
) -> Result<VarianceResult<T>> {
    check_inputs(model, f, t)?;
    if mu.len() != model.len() {
        return Err(Error::arg("measure length does not match the model"));
    }
    let (per_state, intervals) = variance_per_state(model, f, t)?;
    let e = Propagator::new(model).exp(t);
    let mean = (&e * &f.0).dot(mu.values());
    let variance = per_state.dot(mu.values());
    let f_sq = f.0.component_mul(&f.0);
    let k = model.derived_coefficients().k_bound;
    let bound = (&e * f_sq).dot(mu.values()) * (k * t).exp();
    Ok(VarianceResult {
        mean,
        variance,
        second_moment: mean * mean + variance,
        bound,
        intervals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceLimitRow<T> {
    pub t: T,
    pub state: usize,
    /// `Var_{δx}⟨f, X_t⟩`.
    pub variance: T,
    /// `σ_f² φ₀(x)`.
    pub limit: T,
    /// `variance / limit`.
    pub ratio: T,
    /// `(Var_{δx} - σ_f² φ₀(x)) / φ₀(x)`.
    pub deviation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceLimitReport<T> {
    pub sigma_sq: T,
    pub rows: Vec<VarianceLimitRow<T>>,
    /// `(t, max_x |Var_{δx} - σ_f²φ₀(x)| / φ₀(x))`.
    pub max_deviation: Vec<(T, T)>,
    /// Least-squares decay rate of `max_deviation`; `None` with fewer than
    /// two nonzero deviations.
    pub fitted_rate: Option<T>,
    pub gamma: T,
}

impl<T: Scalar> VarianceLimitReport<T> {
    /// Decay is consistent with the spectral gap: fitted rate `>= 0.8 γ`.
    /// Vacuously true when every deviation vanishes.
    pub fn rate_consistent(&self) -> bool {
        match self.fitted_rate {
            Some(rate) => rate >= T::lit(0.8) * self.gamma,
            None => self.max_deviation.iter().all(|&(_, d)| d == T::zero()),
        }
    }
}

/// Compares `Var_{δx}⟨f, X_t⟩` with its limit `σ_f² φ₀(x)` for
/// `⟨f, ψ₀⟩_m = 0`.
///
/// The deviation is evaluated as
/// `∫₀ᵗ R_{t-u}[A (R_u f)²] du - φ₀ ∫ₜ^∞ ⟨A (R_u f)², ψ₀⟩_m du`, where
/// `R_u` is the semigroup with the principal mode removed, so it keeps full
/// relative precision even when it is many orders below the variance.
pub fn variance_limit_check<T: Scalar>(
    model: &SuperprocessModel<T>,
    spectral: &SpectralData<T>,
    f: &FieldVector<T>,
    t_grid: &[T],
) -> Result<VarianceLimitReport<T>> {
    let overlap = spectral.psi_pairing(f);
    if overlap.abs() > T::tol(PROJECTION_TOL) {
        return Err(Error::arg(format!(
            "<f, psi0>_m = {:e} must vanish",
            overlap.to_f64()
        )));
    }
    if let Some(t) = t_grid.iter().find(|&&t| !(t > T::lit(2.0))) {
        return Err(Error::arg(format!("grid times must exceed 2, got {}", t.to_f64())));
    }
    let propagator = Propagator::new(model);
    let sigma_sq = sigma_f_squared_with(model, &propagator, spectral, f)?;
    let a = model.derived_coefficients().variance_rate;
    let phi = &spectral.phi0.0;
    let n = model.len();

    let mut rows = Vec::new();
    let mut max_deviation = Vec::new();
    for &t in t_grid {
        let (var, _) = variance_per_state(model, f, t)?;
        let dev = limit_deviation(&propagator, spectral, &a, &f.0, t)?;
        let mut worst = T::zero();
        for x in 0..n {
            let limit = sigma_sq * phi[x];
            let deviation = dev[x] / phi[x];
            worst = worst.max(deviation.abs());
            rows.push(VarianceLimitRow {
                t,
                state: x,
                variance: var[x],
                limit,
                ratio: if limit == T::zero() { T::zero() } else { var[x] / limit },
                deviation,
            });
        }
        max_deviation.push((t, worst));
    }

    let points: Vec<(f64, f64)> = max_deviation
        .iter()
        .filter(|&&(_, d)| d > T::zero())
        .map(|&(t, d)| (t.to_f64(), d.to_f64().ln()))
        .collect();
    let fitted_rate = (points.len() >= 2).then(|| T::lit(-least_squares_slope(&points)));

    Ok(VarianceLimitReport {
        sigma_sq,
        rows,
        max_deviation,
        fitted_rate,
        gamma: spectral.gamma,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// Var_{δ·}⟨f, X_t⟩ - σ_f² φ₀ without cancellation.
fn limit_deviation<T: Scalar>(
    propagator: &Propagator<T>,
    spectral: &SpectralData<T>,
    a: &DVector<T>,
    f: &DVector<T>,
    t: T,
) -> Result<DVector<T>> {
    let n = f.len();
    if n == 1 || f.iter().all(|&v| v == T::zero()) {
        return Ok(DVector::zeros(n));
    }
    let tail_start = propagator.remainder(t, spectral) * f;
    let tail = decay_integral(propagator, spectral, a, &tail_start, T::tol(1e-10))?;
    let tail_vec = &spectral.phi0.0 * tail;
    let complement = DMatrix::identity(n, n) - spectral.projector();

    let evaluate = |intervals: usize| {
        let h = t / T::lit(intervals as f64);
        let step = propagator.remainder(h, spectral);
        let mut forward = Vec::with_capacity(intervals + 1);
        forward.push(f.clone());
        for k in 0..intervals {
            let next = &step * &forward[k];
            forward.push(next);
        }
        let weight = |j: usize| {
            let w = if j == 0 || j == intervals {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            T::lit(w) * h / T::lit(3.0)
        };
        // Σ_j w_j R_{jh}[A (R_{(N-j)h} f)²]; the same sum through |R_h|
        // bounds the rounding in the cancellations inside R.
        let source = |j: usize| {
            let v = &forward[intervals - j];
            DVector::from_fn(n, |x, _| a[x] * v[x] * v[x]) * weight(j)
        };
        let step_abs = step.abs();
        let mut acc = source(intervals);
        let mut acc_abs = acc.clone();
        for j in (0..intervals).rev() {
            // R_0 = I - Π
            let s = if j == 0 { &complement * source(0) } else { source(j) };
            acc = &s + &step * acc;
            acc_abs = s.abs() + &step_abs * acc_abs;
        }
        (acc, acc_abs.max() * T::epsilon() * T::lit(64.0))
    };

    let mut intervals = MIN_INTERVALS;
    let (mut previous, _) = evaluate(intervals);
    loop {
        intervals *= 2;
        let (current, noise) = evaluate(intervals);
        let scale = current
            .iter()
            .chain(tail_vec.iter())
            .fold(T::zero(), |m, &v| m.max(v.abs()));
        let change = (&current - &previous).abs().max();
        if change <= T::tol(QUAD_RTOL) * scale + noise || scale == T::zero() {
            return Ok(current - tail_vec);
        }
        if intervals >= MAX_INTERVALS {
            return Err(Error::Quadrature("deviation quadrature unresolved".into()));
        }
        previous = current;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{single_point, symmetric_pair};
    use crate::spectral::spectral_data;

    #[test]
    fn first_moment_examples() {
        let m1 = single_point();
        let one = FieldVector::from_slice(&[1.0]);
        assert!((first_moment(&m1, &one, 7.0, &MeasureVector::dirac(1, 0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        let m2 = symmetric_pair();
        let alt = FieldVector::from_slice(&[1.0, -1.0]);
        let v = first_moment(&m2, &alt, 0.5, &MeasureVector::dirac(2, 0, 1.0)).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        let c = first_moment(&m2, &FieldVector::from_slice(&[1.0, 1.0]), 2.0, &MeasureVector::dirac(2, 0, 3.0)).unwrap();
        assert!((c - 3.0).abs() < 1e-14);
    }

    #[test]
    fn variance_examples() {
        let m1 = single_point();
        let one = FieldVector::from_slice(&[1.0]);
        let d = MeasureVector::dirac(1, 0, 1.0);
        let v = variance(&m1, &one, 5.0, &d).unwrap();
        assert!((v.variance - 5.0).abs() < 1e-10);
        assert!((v.second_moment - 6.0).abs() < 1e-10);
        assert!(v.within_bound());
        assert_eq!(variance(&m1, &one, 0.0, &d).unwrap().variance, 0.0);

        let m2 = symmetric_pair();
        let alt = FieldVector::from_slice(&[1.0, -1.0]);
        let v2 = variance(&m2, &alt, 1.0, &MeasureVector::dirac(2, 0, 1.0)).unwrap();
        let exact = (1.0 - (-4f64).exp()) / 2.0;
        assert!((v2.variance - exact).abs() < 1e-9 * exact, "{} vs {exact}", v2.variance);
    }

    #[test]
    fn variance_limit_examples() {
        let m2 = symmetric_pair();
        let s = spectral_data(&m2).unwrap();
        let alt = FieldVector::from_slice(&[1.0, -1.0]);
        let r = variance_limit_check(&m2, &s, &alt, &[10.0]).unwrap();
        let row = &r.rows[0];
        assert!((row.limit - 0.5).abs() < 1e-9);
        // Var_{δA} = (1 - e^{-4t})/2 so the deviation is -e^{-4t}/2 / φ₀.
        let exact = -(-40f64).exp() / 2.0 / std::f64::consts::FRAC_1_SQRT_2;
        assert!((row.deviation - exact).abs() < 1e-6 * exact.abs(), "{} vs {exact}", row.deviation);

        let zero = variance_limit_check(&m2, &s, &FieldVector::from_slice(&[0.0, 0.0]), &[5.0, 10.0]).unwrap();
        assert!(zero.max_deviation.iter().all(|&(_, d)| d == 0.0));
        assert!(zero.rate_consistent());

        let decay = variance_limit_check(&m2, &s, &alt, &[5.0, 10.0, 15.0]).unwrap();
        // exact deviation is e^{-4t}/√2, so the fitted rate is 4
        assert!((decay.fitted_rate.unwrap() - 4.0).abs() < 1e-3, "{:?}", decay.fitted_rate);
        assert!(decay.max_deviation[2].1 < 1e-8);
        assert!(decay.rate_consistent());

        assert!(variance_limit_check(&m2, &s, &alt, &[1.0]).is_err());
        assert!(variance_limit_check(&m2, &s, &FieldVector::from_slice(&[1.0, 1.0]), &[5.0]).is_err());
    }
}

//! The log-Laplace equation and what follows from it: extinction and
//! survival probabilities, the Kolmogorov table and conditional Laplace
//! transforms.
//!
//! `u_f(t, x) = -log E_{δx} exp(-⟨f, X_t⟩)` solves `∂_t u = Q u - Ψ(·, u)`
//! with `u(0) = f`. It is integrated with classical RK4. The nominal step
//! `dt` is shortened while the mechanism is stiff (`u` large) so that
//! `h · ∂_zΨ(x, u) <= stiffness`; the step sequence is a deterministic
//! function of the inputs, and every solve is repeated with both
//! parameters halved to certify the result.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::model::SuperprocessModel;
use crate::scalar::Scalar;
use crate::spectral::{nu, Propagator, SpectralData};
use crate::vector::{FieldVector, MeasureVector};

/// Relative step-halving discrepancy a solve must meet.
pub const TOL_ODE: f64 = 1e-8;

/// Relative change between ladder rungs accepted as convergence.
pub const LADDER_TOL: f64 = 1e-6;

/// Default bound on `h · ∂_zΨ` during the stiff phase.
pub const DEFAULT_STIFFNESS: f64 = 0.025;

const LADDER_MAX_EXPONENT: i32 = 12;

/// `e^{-x} - 1 + x` (`order = 2`) or `e^{-x} - 1 + x - x²/2` (`order = 3`),
/// by series for small `x` to avoid cancellation.
fn exp_remainder<T: Scalar>(x: T, order: u32) -> T {
    if x.abs() < T::one() {
        let mut term = T::one();
        for k in 1..=order {
            term = term * (-x) / T::lit(k as f64);
        }
        let mut sum = T::zero();
        let mut k = order;
        loop {
            sum += term;
            k += 1;
            term = term * (-x) / T::lit(k as f64);
            if term.abs() <= T::epsilon() * sum.abs() * T::lit(1e-2) || k > 60 {
                break;
            }
        }
        sum
    } else {
        let base = (-x).exp() - T::one() + x;
        if order == 3 {
            base - x * x * T::lit(0.5)
        } else {
            base
        }
    }
}

fn mechanism<T: Scalar>(model: &SuperprocessModel<T>, x: usize, z: T) -> T {
    let br = model.branching();
    let jumps = br.jumps[x]
        .iter()
        .fold(T::zero(), |s, a| s + a.w * exp_remainder(z * a.y, 2));
    br.rate[x] * (-br.linear[x] * z + br.quadratic[x] * z * z + jumps)
}

fn check_state<T: Scalar>(model: &SuperprocessModel<T>, x: usize, z: T) -> Result<()> {
    if x >= model.len() {
        return Err(Error::arg(format!("state index {x} out of range")));
    }
    if !(z >= T::zero()) {
        return Err(Error::arg(format!("z must be >= 0, got {}", z.to_f64())));
    }
    Ok(())
}

/// `Ψ(x, z) = β(x)(-a(x)z + b(x)z² + Σ_k w_k(e^{-z y_k} - 1 + z y_k))`.
pub fn psi<T: Scalar>(model: &SuperprocessModel<T>, x: usize, z: T) -> Result<T> {
    check_state(model, x, z)?;
    Ok(mechanism(model, x, z))
}

/// `r = Ψ + αz`, its second-order remainder `r⁽²⁾ = r - ½Az²`, and the
/// control `e = β Σ w y² min(1, yz/6)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RParts<T> {
    pub r: T,
    pub r2: T,
    pub e_ctrl: T,
}

pub fn r_parts<T: Scalar>(model: &SuperprocessModel<T>, x: usize, z: T) -> Result<RParts<T>> {
    check_state(model, x, z)?;
    let br = model.branching();
    let beta = br.rate[x];
    let mut jump_r = T::zero();
    let mut jump_r2 = T::zero();
    let mut ctrl = T::zero();
    for a in &br.jumps[x] {
        let zy = z * a.y;
        jump_r += a.w * exp_remainder(zy, 2);
        jump_r2 += a.w * exp_remainder(zy, 3);
        ctrl += a.w * a.y * a.y * (zy / T::lit(6.0)).min(T::one());
    }
    Ok(RParts {
        r: beta * (br.quadratic[x] * z * z + jump_r),
        r2: beta * jump_r2,
        e_ctrl: beta * ctrl,
    })
}

/// `min(0.01, 0.1/K, 0.1/‖Q‖_∞)`.
pub fn default_step<T: Scalar>(model: &SuperprocessModel<T>) -> T {
    let k = model.derived_coefficients().k_bound;
    let q = norm_inf(model.motion().rates());
    let mut dt = T::lit(0.01);
    if k > T::zero() {
        dt = dt.min(T::lit(0.1) / k);
    }
    if q > T::zero() {
        dt = dt.min(T::lit(0.1) / q);
    }
    dt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMeta<T> {
    /// Nominal step of the returned (fine) solve.
    pub dt: T,
    pub stiffness: T,
    /// Max relative difference between the coarse and fine solves.
    pub discrepancy: T,
    /// RK4 steps taken by the fine solve.
    pub steps: usize,
}

/// `u_f(t, ·)` on a time grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLaplaceTrajectory<T: Scalar> {
    pub t_grid: Vec<T>,
    pub u_values: Vec<FieldVector<T>>,
    pub f0: FieldVector<T>,
    pub step_meta: StepMeta<T>,
}

impl<T: Scalar> LogLaplaceTrajectory<T> {
    pub fn last(&self) -> &FieldVector<T> {
        self.u_values.last().expect("trajectory contains t = 0")
    }

    /// `R_f(t) = T_t f - u_f(t)` at each grid time.
    pub fn remainder(&self, propagator: &Propagator<T>) -> Vec<FieldVector<T>> {
        self.t_grid
            .iter()
            .zip(&self.u_values)
            .map(|(&t, u)| FieldVector(propagator.exp(t) * &self.f0.0 - &u.0))
            .collect()
    }
}

/// Fixed-parameter RK4 integrator for `∂_t u = Q u - Ψ(·, u)`.
pub struct LogLaplaceSolver<'a, T: Scalar> {
    model: &'a SuperprocessModel<T>,
    pub dt: T,
    pub stiffness: T,
}

impl<'a, T: Scalar> LogLaplaceSolver<'a, T> {
    pub fn new(model: &'a SuperprocessModel<T>) -> Self {
        LogLaplaceSolver {
            model,
            dt: default_step(model),
            stiffness: T::lit(DEFAULT_STIFFNESS),
        }
    }

    pub fn with_step(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    fn rhs(&self, u: &DVector<T>) -> DVector<T> {
        let mut out = self.model.motion().rates() * u;
        for x in 0..u.len() {
            out[x] -= mechanism(self.model, x, u[x]);
        }
        out
    }

    // ‖Q‖_∞ + max_x |∂_zΨ(x, u_x)|
    fn stiffness_rate(&self, u: &DVector<T>) -> T {
        let br = self.model.branching();
        let motion = norm_inf(self.model.motion().rates());
        motion + (0..u.len())
            .map(|x| {
                let z = u[x].max(T::zero());
                let jumps = br.jumps[x].iter().fold(T::zero(), |s, a| {
                    s + a.w * a.y * (T::one() - (-z * a.y).exp())
                });
                br.rate[x] * (br.linear[x].abs() + T::lit(2.0) * br.quadratic[x] * z + jumps)
            })
            .fold(T::zero(), |m, v| if v > m { v } else { m })
    }

    fn rk4(&self, u: &DVector<T>, h: T) -> DVector<T> {
        let half = h * T::lit(0.5);
        let k1 = self.rhs(u);
        let k2 = self.rhs(&(u + &k1 * half));
        let k3 = self.rhs(&(u + &k2 * half));
        let k4 = self.rhs(&(u + &k3 * h));
        u + (k1 + (k2 + k3) * T::lit(2.0) + k4) * (h / T::lit(6.0))
    }

    /// Integrates from `f0` and returns `u` at each of `times` (increasing,
    /// positive), plus the number of RK4 steps taken.
    pub fn integrate(&self, f0: &DVector<T>, times: &[T]) -> Result<(Vec<DVector<T>>, usize)> {
        let mut u = f0.clone();
        let mut t = T::zero();
        let mut out = Vec::with_capacity(times.len());
        let mut steps = 0usize;
        for &target in times {
            if target < t {
                return Err(Error::arg("output times must be increasing"));
            }
            while t < target {
                let remaining = target - t;
                let rate = self.stiffness_rate(&u);
                let mut h = self.dt;
                if rate * h > self.stiffness {
                    h = self.stiffness / rate;
                }
                let last = h >= remaining * (T::one() - T::lit(1e-9));
                if last {
                    h = remaining;
                }
                u = self.rk4(&u, h);
                steps += 1;
                t = if last { target } else { t + h };

                let scale = u.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
                if !scale.is_finite_value() {
                    return Err(Error::Solver(format!("non-finite value at t = {}", t.to_f64())));
                }
                if let Some(x) = u.iter().position(|&v| v < -T::tol(1e-13) * scale) {
                    return Err(Error::Solver(format!(
                        "negative value u({}, {x}) = {:e}",
                        t.to_f64(),
                        u[x].to_f64()
                    )));
                }
            }
            out.push(u.clone());
        }
        Ok((out, steps))
    }
}

/// Solves on the grid `0, dt, 2dt, …, T` (the last interval may be short).
pub fn solve_log_laplace<T: Scalar>(
    model: &SuperprocessModel<T>,
    f0: &FieldVector<T>,
    horizon: T,
    dt: T,
) -> Result<LogLaplaceTrajectory<T>> {
    if !(horizon > T::zero()) || !(dt > T::zero()) {
        return Err(Error::arg("horizon and dt must be > 0"));
    }
    let n = (horizon / dt - T::lit(1e-9)).ceil().to_f64().max(1.0) as usize;
    let times: Vec<T> = (1..=n)
        .map(|k| if k == n { horizon } else { dt * T::lit(k as f64) })
        .collect();
    solve_log_laplace_at(model, f0, &times, dt)
}

/// Solves at the given increasing positive times with nominal step `dt`,
/// certifying the result against a run at `dt/2`.
pub fn solve_log_laplace_at<T: Scalar>(
    model: &SuperprocessModel<T>,
    f0: &FieldVector<T>,
    times: &[T],
    dt: T,
) -> Result<LogLaplaceTrajectory<T>> {
    if f0.len() != model.len() {
        return Err(Error::arg(format!(
            "f0 has {} entries, model has {} states",
            f0.len(),
            model.len()
        )));
    }
    if !f0.is_nonnegative() {
        return Err(Error::arg("initial function must be >= 0"));
    }
    if !(dt > T::zero()) {
        return Err(Error::arg("dt must be > 0"));
    }
    if times.is_empty() || !(times[0] > T::zero()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::arg("output times must be positive and increasing"));
    }

    let coarse = LogLaplaceSolver::new(model).with_step(dt);
    let fine = LogLaplaceSolver {
        model,
        dt: dt * T::lit(0.5),
        stiffness: coarse.stiffness * T::lit(0.5),
    };
    let (uc, _) = coarse.integrate(&f0.0, times)?;
    let (uf, steps) = fine.integrate(&f0.0, times)?;

    let mut discrepancy = T::zero();
    for (a, b) in uc.iter().zip(&uf) {
        let scale = b.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if scale == T::zero() {
            continue;
        }
        let d = (a - b).abs().max() / scale;
        discrepancy = discrepancy.max(d);
    }
    if discrepancy > T::tol(TOL_ODE) {
        return Err(Error::Solver(format!(
            "step-halving discrepancy {:e} exceeds {:e}",
            discrepancy.to_f64(),
            TOL_ODE
        )));
    }

    let mut t_grid = Vec::with_capacity(times.len() + 1);
    t_grid.push(T::zero());
    t_grid.extend_from_slice(times);
    let mut u_values = Vec::with_capacity(times.len() + 1);
    u_values.push(f0.clone());
    u_values.extend(uf.into_iter().map(FieldVector));

    let traj = LogLaplaceTrajectory {
        t_grid,
        u_values,
        f0: f0.clone(),
        step_meta: StepMeta {
            dt: fine.dt,
            stiffness: fine.stiffness,
            discrepancy,
            steps,
        },
    };
    check_mean_domination(model, &traj)?;
    Ok(traj)
}

// 0 <= u <= T_t f and T_t f - u <= e^{Kt} T_t(f²), at up to 17 grid times.
fn check_mean_domination<T: Scalar>(
    model: &SuperprocessModel<T>,
    traj: &LogLaplaceTrajectory<T>,
) -> Result<()> {
    let propagator = Propagator::new(model);
    let k = model.derived_coefficients().k_bound;
    let f = &traj.f0.0;
    let f_sq = f.component_mul(f);
    let total = traj.t_grid.len();
    let stride = (total / 16).max(1);
    let tol = T::tol(1e-7);
    for i in (0..total).step_by(stride).chain(std::iter::once(total - 1)) {
        let t = traj.t_grid[i];
        let e = propagator.exp(t);
        let mean = &e * f;
        let bound = (&e * &f_sq) * (k * t).exp();
        let u = &traj.u_values[i].0;
        let scale = mean.iter().fold(T::zero(), |m, &v| m.max(v.abs())) + T::epsilon();
        for x in 0..u.len() {
            if u[x] > mean[x] + tol * scale {
                return Err(Error::Solver(format!(
                    "u({}, {x}) exceeds the mean semigroup bound",
                    t.to_f64()
                )));
            }
            if mean[x] - u[x] > bound[x] * (T::one() + tol) + tol * scale {
                return Err(Error::Solver(format!(
                    "remainder at ({}, {x}) exceeds e^(Kt) T_t(f^2)",
                    t.to_f64()
                )));
            }
        }
    }
    Ok(())
}

/// `w_t = -log P_{δx}(‖X_t‖ = 0)` at several times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionProfile<T: Scalar> {
    pub times: Vec<T>,
    pub w: Vec<FieldVector<T>>,
    /// Initial value of the accepted ladder rung.
    pub theta: T,
    /// Relative change from the previous rung.
    pub change: T,
    /// Whether the mechanism is certified to allow finite-time extinction.
    pub grey_certified: bool,
}

/// Computes `w_t = lim_{θ→∞} u_θ(t)` by solving from constant `θ = 10², 10⁴, …`
/// until successive rungs agree to `LADDER_TOL` (giving up after `10¹²`).
pub fn extinction_neg_log_at<T: Scalar>(
    model: &SuperprocessModel<T>,
    times: &[T],
) -> Result<ExtinctionProfile<T>> {
    if times.is_empty() || !(times[0] > T::zero()) {
        return Err(Error::arg("extinction times must be > 0"));
    }
    let grey_certified = model.check_grey_domination().satisfied;
    let dt = default_step(model);
    let mut previous: Option<Vec<FieldVector<T>>> = None;
    let mut last_change = T::infinity();
    for exponent in (2..=LADDER_MAX_EXPONENT).step_by(2) {
        let theta = T::lit(10f64.powi(exponent));
        let f0 = FieldVector::constant(model.len(), theta);
        let traj = solve_log_laplace_at(model, &f0, times, dt)?;
        let current: Vec<FieldVector<T>> = traj.u_values[1..].to_vec();
        if let Some(prev) = &previous {
            let mut change = T::zero();
            for (a, b) in prev.iter().zip(&current) {
                for (&x, &y) in a.0.iter().zip(b.0.iter()) {
                    change = change.max((x - y).abs() / y.abs().max(T::epsilon()));
                }
            }
            last_change = change;
            if change < T::tol(LADDER_TOL) {
                return Ok(ExtinctionProfile {
                    times: times.to_vec(),
                    w: current,
                    theta,
                    change,
                    grey_certified,
                });
            }
        }
        previous = Some(current);
    }
    let hint = if grey_certified {
        ""
    } else {
        " (mechanism not certified for finite-time extinction)"
    };
    Err(Error::LadderNotConverged(format!(
        "relative change {:e} at theta = 1e{LADDER_MAX_EXPONENT}{hint}",
        last_change.to_f64()
    )))
}

/// `w_t(x) = -log q_t(x)` at a single time.
pub fn extinction_neg_log<T: Scalar>(model: &SuperprocessModel<T>, t: T) -> Result<FieldVector<T>> {
    Ok(extinction_neg_log_at(model, &[t])?.w.remove(0))
}

fn check_measure<T: Scalar>(model: &SuperprocessModel<T>, mu: &MeasureVector<T>) -> Result<()> {
    if mu.len() != model.len() {
        return Err(Error::arg(format!(
            "measure has {} entries, model has {} states",
            mu.len(),
            model.len()
        )));
    }
    if mu.is_zero() {
        return Err(Error::arg("initial measure must be nonzero"));
    }
    Ok(())
}

// 1 - e^{-x} without cancellation.
fn one_minus_exp_neg<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-2) {
        -exp_remainder(x, 1)
    } else {
        T::one() - (-x).exp()
    }
}

/// `P_μ(‖X_t‖ ≠ 0) = 1 - exp(-⟨w_t, μ⟩)`.
pub fn survival_probability<T: Scalar>(
    model: &SuperprocessModel<T>,
    mu: &MeasureVector<T>,
    t: T,
) -> Result<T> {
    check_measure(model, mu)?;
    let w = extinction_neg_log(model, t)?;
    Ok(one_minus_exp_neg(w.pair(mu)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KolmogorovRow<T> {
    pub t: T,
    pub survival: T,
    /// `t · P_μ(‖X_t‖ ≠ 0)`.
    pub scaled: T,
    /// `⟨φ₀, μ⟩ / ν`.
    pub limit: T,
    /// Survival did not increase since the previous row.
    pub decreasing: bool,
}

pub fn kolmogorov_table<T: Scalar>(
    model: &SuperprocessModel<T>,
    spectral: &SpectralData<T>,
    mu: &MeasureVector<T>,
    t_grid: &[T],
) -> Result<Vec<KolmogorovRow<T>>> {
    check_measure(model, mu)?;
    let nu = nu(model, spectral)?;
    let limit = spectral.phi0.pair(mu) / nu;
    let mut times = t_grid.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    times.dedup();
    let profile = extinction_neg_log_at(model, &times)?;
    let mut rows: Vec<KolmogorovRow<T>> = Vec::with_capacity(times.len());
    for (&t, w) in times.iter().zip(&profile.w) {
        let survival = one_minus_exp_neg(w.pair(mu));
        let decreasing = rows.last().is_none_or(|r| survival <= r.survival);
        rows.push(KolmogorovRow {
            t,
            survival,
            scaled: t * survival,
            limit,
            decreasing,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YaglomTransform<T> {
    /// `E_μ[exp(-λ t⁻¹⟨f, X_t⟩) | ‖X_t‖ ≠ 0]`.
    pub value: T,
    /// `1 / (1 + νλ⟨f, ψ₀⟩_m)`.
    pub target: T,
}

pub fn yaglom_transform<T: Scalar>(
    model: &SuperprocessModel<T>,
    spectral: &SpectralData<T>,
    mu: &MeasureVector<T>,
    f: &FieldVector<T>,
    lambda: T,
    t: T,
) -> Result<YaglomTransform<T>> {
    check_measure(model, mu)?;
    if !f.is_nonnegative() {
        return Err(Error::arg("f must be >= 0"));
    }
    if !(lambda >= T::zero()) || !(t > T::zero()) {
        return Err(Error::arg("need lambda >= 0 and t > 0"));
    }
    let nu = nu(model, spectral)?;
    let target = T::one() / (T::one() + nu * lambda * spectral.psi_pairing(f));
    if lambda == T::zero() {
        return Ok(YaglomTransform {
            value: T::one(),
            target,
        });
    }
    let survival = survival_probability(model, mu, t)?;
    let scaled = f.scaled(lambda / t);
    let traj = solve_log_laplace_at(model, &scaled, &[t], default_step(model))?;
    let escaped = one_minus_exp_neg(traj.last().pair(mu));
    Ok(YaglomTransform {
        value: T::one() - escaped / survival,
        target,
    })
}

/// `(1/⟨u_f(nδ), ψ₀⟩_m - 1/⟨f, ψ₀⟩_m) / (nδ)`; tends to `ν` as `n → ∞`.
pub fn nu_slope_estimate<T: Scalar>(
    model: &SuperprocessModel<T>,
    spectral: &SpectralData<T>,
    f: &FieldVector<T>,
    delta: T,
    n: usize,
) -> Result<T> {
    if !(delta > T::zero()) || n == 0 {
        return Err(Error::arg("need delta > 0 and n >= 1"));
    }
    let initial = spectral.psi_pairing(f);
    if !(initial > T::zero()) {
        return Err(Error::arg("<f, psi0>_m must be > 0"));
    }
    let horizon = delta * T::lit(n as f64);
    let traj = solve_log_laplace_at(model, f, &[horizon], default_step(model))?;
    let later = spectral.psi_pairing(traj.last());
    Ok((T::one() / later - T::one() / initial) / horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{single_point, single_point_jumps, symmetric_pair};
    use crate::spectral::spectral_data;

    fn riccati(theta: f64, b: f64, t: f64) -> f64 {
        theta / (1.0 + b * theta * t)
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(&single_point(), 0, 2.0).unwrap(), 2.0);
        let e = psi(&single_point_jumps(), 0, 1.0).unwrap();
        assert!((e - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(psi(&symmetric_pair(), 1, 0.0).unwrap(), 0.0);
        assert!(psi(&single_point(), 0, -1.0).is_err());
    }

    #[test]
    fn r_parts_examples() {
        let p = r_parts(&single_point_jumps(), 0, 1.0).unwrap();
        assert!((p.r - (-1f64).exp()).abs() < 1e-15);
        assert!((p.r2 - ((-1f64).exp() - 0.5)).abs() < 1e-15);
        assert!((p.e_ctrl - 1.0 / 6.0).abs() < 1e-15);
        assert!(p.r2.abs() <= p.e_ctrl);
        let q = r_parts(&single_point(), 0, 3.0).unwrap();
        assert_eq!(q.r, 4.5);
        assert_eq!(q.r2, 0.0);
        assert_eq!(q.e_ctrl, 0.0);
        let z = r_parts(&symmetric_pair(), 0, 0.0).unwrap();
        assert_eq!((z.r, z.r2, z.e_ctrl), (0.0, 0.0, 0.0));
    }

    #[test]
    fn exp_remainder_branches_agree() {
        for &x in &[0.999_999f64, 1.0, 1.000_001] {
            let direct = (-x).exp() - 1.0 + x;
            assert!((exp_remainder(x, 2) - direct).abs() < 1e-15);
        }
        let tiny: f64 = 1e-6;
        let series = tiny * tiny / 2.0 - tiny.powi(3) / 6.0 + tiny.powi(4) / 24.0;
        assert!((exp_remainder(tiny, 2) - series).abs() < 1e-15 * series, "{} {}", exp_remainder(tiny, 2), series);
    }

    #[test]
    fn riccati_single_point() {
        let m1 = single_point();
        let traj = solve_log_laplace(&m1, &FieldVector::from_slice(&[1.0]), 2.0, 0.01).unwrap();
        assert!((traj.last().0[0] - 0.5).abs() < 1e-10);
        assert_eq!(traj.t_grid.len(), 201);
        let zero = solve_log_laplace(&m1, &FieldVector::from_slice(&[0.0]), 5.0, 0.01).unwrap();
        assert!(zero.u_values.iter().all(|u| u.0[0] == 0.0));
    }

    #[test]
    fn riccati_symmetric_pair() {
        let traj = solve_log_laplace(&symmetric_pair(), &FieldVector::from_slice(&[1.0, 1.0]), 1.0, 0.01).unwrap();
        for x in 0..2 {
            assert!((traj.last().0[x] - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn stiff_start_matches_closed_form() {
        let m1 = single_point();
        let times = [0.001, 0.1, 4.0, 100.0];
        let traj = solve_log_laplace_at(&m1, &FieldVector::from_slice(&[1e8]), &times, 0.01).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let exact = riccati(1e8, 0.5, t);
            let got = traj.u_values[i + 1].0[0];
            assert!(((got - exact) / exact).abs() < 1e-9, "t={t} got={got} exact={exact}");
        }
    }

    #[test]
    fn bad_inputs() {
        let m1 = single_point();
        assert!(solve_log_laplace(&m1, &FieldVector::from_slice(&[-1.0]), 1.0, 0.01).is_err());
        assert!(solve_log_laplace(&m1, &FieldVector::from_slice(&[1.0]), 0.0, 0.01).is_err());
        assert!(solve_log_laplace(&m1, &FieldVector::from_slice(&[1.0]), 1.0, 0.0).is_err());
    }

    #[test]
    fn extinction_examples() {
        let m1 = single_point();
        let w4 = extinction_neg_log(&m1, 4.0).unwrap();
        assert!((w4.0[0] - 0.5).abs() < 1e-6);
        let w100 = extinction_neg_log(&m1, 100.0).unwrap();
        assert!((w100.0[0] - 0.02).abs() < 1e-8);
        let w = extinction_neg_log(&symmetric_pair(), 10.0).unwrap();
        assert!((w.0[0] - 0.1).abs() < 1e-7 && (w.0[1] - 0.1).abs() < 1e-7);
    }

    #[test]
    fn extinction_without_grey_fails_to_converge() {
        let err = extinction_neg_log(&single_point_jumps(), 1.0).unwrap_err();
        assert!(matches!(err, Error::LadderNotConverged(_)), "{err}");
    }

    #[test]
    fn survival_examples() {
        let m1 = single_point();
        let p = survival_probability(&m1, &MeasureVector::dirac(1, 0, 1.0), 200.0).unwrap();
        assert!((p - 0.009_950_166_250_831_947).abs() < 1e-9);
        let p2 = survival_probability(&m1, &MeasureVector::dirac(1, 0, 2.0), 200.0).unwrap();
        assert!((p2 - 0.019_801_326_693_244_7).abs() < 1e-9);
        let m2 = symmetric_pair();
        let p3 = survival_probability(&m2, &MeasureVector::dirac(2, 0, 1.0), 10.0).unwrap();
        assert!((p3 - 0.095_162_581_964_040_4).abs() < 1e-8);
        assert!(survival_probability(&m1, &MeasureVector::dirac(1, 0, 0.0), 1.0).is_err());
    }

    #[test]
    fn kolmogorov_examples() {
        let m1 = single_point();
        let s1 = spectral_data(&m1).unwrap();
        let rows = kolmogorov_table(&m1, &s1, &MeasureVector::dirac(1, 0, 1.0), &[1000.0, 100.0]).unwrap();
        assert_eq!(rows[0].t, 100.0);
        assert!((rows[0].scaled - 100.0 * (1.0 - (-0.02f64).exp())).abs() < 1e-6);
        assert!((rows[1].scaled - 1.998_001_332_667).abs() < 1e-5);
        assert!((rows[1].limit - 2.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.decreasing));

        let m2 = symmetric_pair();
        let s2 = spectral_data(&m2).unwrap();
        let rows = kolmogorov_table(&m2, &s2, &MeasureVector::dirac(2, 0, 1.0), &[1000.0]).unwrap();
        assert!((rows[0].limit - 1.0).abs() < 1e-12);
        assert!((rows[0].scaled - 0.999_500_166_625).abs() < 1e-5);
    }

    #[test]
    fn yaglom_examples() {
        let m1 = single_point();
        let s1 = spectral_data(&m1).unwrap();
        let mu = MeasureVector::dirac(1, 0, 1.0);
        let one = FieldVector::from_slice(&[1.0]);
        let y = yaglom_transform(&m1, &s1, &mu, &one, 1.0, 100.0).unwrap();
        let exact = 1.0 - (1.0 - (-1.0f64 / 150.0).exp()) / (1.0 - (-0.02f64).exp());
        assert!((y.value - exact).abs() < 1e-7, "{} vs {exact}", y.value);
        assert!((y.target - 2.0 / 3.0).abs() < 1e-15);
        let y0 = yaglom_transform(&m1, &s1, &mu, &one, 0.0, 100.0).unwrap();
        assert_eq!((y0.value, y0.target), (1.0, 1.0));
        let y2 = yaglom_transform(&m1, &s1, &mu, &one, 2.0, 1000.0).unwrap();
        assert_eq!(y2.target, 0.5);
        assert!((y2.value - 0.5).abs() < 1e-3);
    }

    #[test]
    fn nu_slope_examples() {
        let m1 = single_point();
        let s1 = spectral_data(&m1).unwrap();
        let a = nu_slope_estimate(&m1, &s1, &FieldVector::from_slice(&[1.0]), 1.0, 1000).unwrap();
        assert!((a - 0.5).abs() < 1e-9);
        let b = nu_slope_estimate(&m1, &s1, &FieldVector::from_slice(&[2.0]), 1.0, 10).unwrap();
        assert!((b - 0.5).abs() < 1e-9);
        let m2 = symmetric_pair();
        let s2 = spectral_data(&m2).unwrap();
        let c = nu_slope_estimate(&m2, &s2, &FieldVector::from_slice(&[1.0, 0.0]), 1.0, 500).unwrap();
        assert!((c / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn single_precision_riccati() {
        let m1 = single_point().cast::<f32>();
        let traj = solve_log_laplace(&m1, &FieldVector::from_slice(&[1.0f32]), 2.0, 0.01).unwrap();
        assert!((traj.last().0[0] - 0.5).abs() < 1e-4);
    }
}

//! Mean semigroup, Perron eigenpair, spectral gap and the constants built
//! from them.
//!
//! The mean semigroup acts on functions by `(T_t f)(x) = Σ_y E_t(x, y) f(y)`
//! with `E_t = exp(t (Q + diag α))`. Its density against `m` is
//! `q(t, x, y) = E_t(x, y) / m(y)`, and the dual semigroup in `L²(m)` is
//! `T̂_t = D⁻¹ E_tᵀ D` with `D = diag(m)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{expm, norm_inf};
use crate::model::SuperprocessModel;
use crate::quad::simpson;
use crate::scalar::Scalar;
use crate::vector::FieldVector;

/// `|λ₀|` below which a model counts as critical.
pub const CRITICAL_TOL: f64 = 1e-9;

/// Largest allowed `|⟨f, ψ₀⟩_m|` for the variance constant to exist.
pub const PROJECTION_TOL: f64 = 1e-9;

// Conditioning limit for the eigendecomposition route.
const MAX_EIGEN_COND: f64 = 1e8;

/// Evaluates `exp(tL)` for a fixed generator `L = Q + diag α`.
///
/// When `L` is self-adjoint in `L²(m)` (`m_x L_xy = m_y L_yx`) the
/// symmetrised matrix `D^{1/2} L D^{-1/2}` is diagonalised once and every
/// exponential is assembled from the eigenpairs. Otherwise each call runs
/// scaling and squaring.
#[derive(Debug, Clone)]
pub struct Propagator<T: Scalar> {
    generator: DMatrix<T>,
    weights: DVector<T>,
    symmetric: Option<SymmetricParts<T>>,
}

#[derive(Debug, Clone)]
struct SymmetricParts<T: Scalar> {
    values: DVector<T>,
    vectors: DMatrix<T>,
    sqrt_m: DVector<T>,
}

impl<T: Scalar> Propagator<T> {
    pub fn new(model: &SuperprocessModel<T>) -> Self {
        Self::from_generator(model.mean_generator(), model.weights().clone())
    }

    pub fn from_generator(generator: DMatrix<T>, weights: DVector<T>) -> Self {
        let symmetric = symmetric_parts(&generator, &weights);
        Propagator {
            generator,
            weights,
            symmetric,
        }
    }

    pub fn generator(&self) -> &DMatrix<T> {
        &self.generator
    }

    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric.is_some()
    }

    pub fn len(&self) -> usize {
        self.generator.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.generator.nrows() == 0
    }

    /// `exp(tL)`; the matrix of `T_t`.
    pub fn exp(&self, t: T) -> DMatrix<T> {
        match &self.symmetric {
            Some(p) => p.assemble(t, T::zero(), None),
            None => expm(&(&self.generator * t)),
        }
    }

    /// Matrix of the dual semigroup `T̂_t = D⁻¹ E_tᵀ D`.
    pub fn dual(&self, t: T) -> DMatrix<T> {
        let e = self.exp(t);
        let m = &self.weights;
        DMatrix::from_fn(self.len(), self.len(), |x, y| e[(y, x)] * m[y] / m[x])
    }

    /// `R_t = exp(t(L - λ₀)) - Π`, the part of the semigroup that decays like
    /// `e^{-γt}`, computed without cancelling against `Π`.
    ///
    /// `R_s R_t = R_{s+t}` and `R_t Π = 0`.
    pub fn remainder(&self, t: T, spectral: &SpectralData<T>) -> DMatrix<T> {
        let n = self.len();
        if n == 1 {
            return DMatrix::zeros(1, 1);
        }
        match &self.symmetric {
            Some(p) => p.assemble(t, spectral.lambda0, Some(p.principal_index())),
            None => {
                let pi = spectral.projector();
                let mut shifted = self.generator.clone();
                for i in 0..n {
                    shifted[(i, i)] -= spectral.lambda0;
                }
                let kappa = T::lit(2.0) * norm_inf(&shifted) + T::one();
                // L - λ₀ and Π commute, so exp(t(L - λ₀ - κΠ)) = R_t + e^{-κt}Π.
                let deflated = (shifted - &pi * kappa) * t;
                expm(&deflated) - pi * (-kappa * t).exp()
            }
        }
    }
}

impl<T: Scalar> SymmetricParts<T> {
    fn principal_index(&self) -> usize {
        self.values.imax()
    }

    // D^{-1/2} V diag(e^{t(λ_k - shift)}) Vᵀ D^{1/2}, optionally dropping one mode.
    fn assemble(&self, t: T, shift: T, skip: Option<usize>) -> DMatrix<T> {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            if Some(k) == skip {
                continue;
            }
            let g = ((self.values[k] - shift) * t).exp();
            if g == T::zero() {
                continue;
            }
            for x in 0..n {
                let vx = self.vectors[(x, k)] * g / self.sqrt_m[x];
                for y in 0..n {
                    out[(x, y)] += vx * self.vectors[(y, k)] * self.sqrt_m[y];
                }
            }
        }
        out
    }
}

fn symmetric_parts<T: Scalar>(l: &DMatrix<T>, m: &DVector<T>) -> Option<SymmetricParts<T>> {
    let n = l.nrows();
    let tol = T::tol(1e-13);
    for x in 0..n {
        for y in (x + 1)..n {
            let a = m[x] * l[(x, y)];
            let b = m[y] * l[(y, x)];
            if (a - b).abs() > tol * (a.abs() + b.abs()) {
                return None;
            }
        }
    }
    let (mut lo, mut hi) = (m[0], m[0]);
    for &w in m.iter() {
        lo = lo.min(w);
        hi = hi.max(w);
    }
    if (hi / lo).sqrt().to_f64() >= MAX_EIGEN_COND {
        return None;
    }
    let sqrt_m = m.map(|w| w.sqrt());
    let s = DMatrix::from_fn(n, n, |x, y| {
        let v = l[(x, y)] * sqrt_m[x] / sqrt_m[y];
        let w = l[(y, x)] * sqrt_m[y] / sqrt_m[x];
        (v + w) * T::lit(0.5)
    });
    let eig = SymmetricEigen::new(s);
    Some(SymmetricParts {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
        sqrt_m,
    })
}

/// Perron eigenpair and related constants of the mean semigroup.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData<T: Scalar> {
    /// Principal eigenvalue of `L = Q + diag α`.
    pub lambda0: T,
    /// Right eigenfunction, `> 0`, `⟨φ₀, φ₀⟩_m = 1`.
    pub phi0: FieldVector<T>,
    /// Dual eigenfunction, `> 0`, `⟨φ₀, ψ₀⟩_m = 1`.
    pub psi0: FieldVector<T>,
    /// `λ₀ - max{Re λ : λ ∈ σ(L), λ ≠ λ₀}`; `+∞` on a single state.
    pub gamma: T,
    /// Smallest `c` with `|e^{-λ₀t} q(t,x,y) - φ₀(x)ψ₀(y)| <= c e^{-γt} φ₀(x)ψ₀(y)`
    /// on the fitting grid.
    pub c_expansion: T,
    /// Reference weights `m` the eigenfunctions are normalised against.
    pub weights: DVector<T>,
    /// Full spectrum of `L` as `(re, im)` pairs.
    pub eigenvalues: Vec<(T, T)>,
}

impl<T: Scalar> SpectralData<T> {
    /// `Π = φ₀ (Dψ₀)ᵀ`, the spectral projector onto the principal mode.
    pub fn projector(&self) -> DMatrix<T> {
        let n = self.phi0.len();
        DMatrix::from_fn(n, n, |x, y| {
            self.phi0.0[x] * self.psi0.0[y] * self.weights[y]
        })
    }

    /// `⟨f, ψ₀⟩_m`.
    pub fn psi_pairing(&self, f: &FieldVector<T>) -> T {
        f.inner_m(&self.psi0, &self.weights)
    }

    pub fn is_critical(&self) -> bool {
        self.lambda0.abs() <= T::tol(CRITICAL_TOL)
    }

    pub fn require_critical(&self) -> Result<()> {
        if self.is_critical() {
            Ok(())
        } else {
            Err(Error::NonCritical {
                lambda0: self.lambda0.to_f64(),
            })
        }
    }

    /// Log grid `n` points from `a` to `b`.
    pub fn expansion_grid(a: f64, b: f64, n: usize) -> Vec<T> {
        log_grid(a, b, n).into_iter().map(T::lit).collect()
    }

    /// Largest ratio `|R_t(x,y)/m(y)| / (e^{-γt} φ₀(x)ψ₀(y))` over the grid.
    /// Points where `e^{-γt}` leaves the floating range are skipped.
    pub fn expansion_ratio(&self, propagator: &Propagator<T>, grid: &[T]) -> T {
        if self.phi0.len() == 1 || !self.gamma.is_finite_value() {
            return T::zero();
        }
        let n = self.phi0.len();
        let mut worst = T::zero();
        for &t in grid {
            let gt = self.gamma * t;
            if gt.to_f64() > 600.0 {
                continue;
            }
            let r = propagator.remainder(t, self);
            let growth = gt.exp();
            for x in 0..n {
                for y in 0..n {
                    let dev = (r[(x, y)] / self.weights[y]).abs();
                    let ratio = dev * growth / (self.phi0.0[x] * self.psi0.0[y]);
                    if ratio > worst {
                        worst = ratio;
                    }
                }
            }
        }
        worst
    }

    /// Grid points at which the expansion bound fails with constant
    /// `c_expansion * (1 + margin)`.
    pub fn expansion_violations(
        &self,
        propagator: &Propagator<T>,
        grid: &[T],
        margin: T,
    ) -> Vec<T> {
        let c = self.c_expansion * (T::one() + margin);
        grid.iter()
            .copied()
            .filter(|&t| self.expansion_ratio(propagator, &[t]) > c)
            .collect()
    }
}

/// `n` logarithmically spaced points in `[a, b]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        b
                    } else {
                        (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Matrix of `T_t`.
pub fn mean_semigroup<T: Scalar>(model: &SuperprocessModel<T>, t: T) -> Result<DMatrix<T>> {
    if !(t >= T::zero()) {
        return Err(Error::arg(format!("time must be >= 0, got {}", t.to_f64())));
    }
    Ok(Propagator::new(model).exp(t))
}

/// `q(t, x, y) = exp(tL)(x, y) / m(y)`.
pub fn density_matrix<T: Scalar>(model: &SuperprocessModel<T>, t: T) -> Result<DMatrix<T>> {
    if !(t > T::zero()) {
        return Err(Error::arg(format!("time must be > 0, got {}", t.to_f64())));
    }
    let e = Propagator::new(model).exp(t);
    let m = model.weights();
    Ok(DMatrix::from_fn(e.nrows(), e.ncols(), |x, y| e[(x, y)] / m[y]))
}

/// Spatial-motion density `p(t, x, y) = exp(tQ)(x, y) / m(y)`.
pub fn motion_density<T: Scalar>(model: &SuperprocessModel<T>, t: T) -> Result<DMatrix<T>> {
    if !(t > T::zero()) {
        return Err(Error::arg(format!("time must be > 0, got {}", t.to_f64())));
    }
    let e = expm(&(model.motion().rates() * t));
    let m = model.weights();
    Ok(DMatrix::from_fn(e.nrows(), e.ncols(), |x, y| e[(x, y)] / m[y]))
}

/// Computes `λ₀`, `φ₀`, `ψ₀`, `γ` and the fitted expansion constant.
pub fn spectral_data<T: Scalar>(model: &SuperprocessModel<T>) -> Result<SpectralData<T>> {
    let propagator = Propagator::new(model);
    spectral_data_with(&propagator)
}

pub fn spectral_data_with<T: Scalar>(propagator: &Propagator<T>) -> Result<SpectralData<T>> {
    let l = propagator.generator();
    let m = propagator.weights();
    let n = l.nrows();

    let (lambda0, phi, psi, eigenvalues) = match &propagator.symmetric {
        Some(p) => {
            let k = p.principal_index();
            let mut v = p.vectors.column(k).into_owned();
            if v.sum() < T::zero() {
                v = -v;
            }
            let phi = DVector::from_fn(n, |x, _| v[x] / p.sqrt_m[x]);
            let eig = p.values.iter().map(|&r| (r, T::zero())).collect();
            (p.values[k], phi.clone(), phi, eig)
        }
        None => general_eigenpair(l, m)?,
    };

    if phi.iter().chain(psi.iter()).any(|&v| !(v > T::zero())) {
        return Err(Error::Eigen(
            "principal eigenvectors are not strictly positive".into(),
        ));
    }

    let phi_norm = phi
        .iter()
        .zip(m.iter())
        .fold(T::zero(), |s, (&p, &w)| s + p * p * w)
        .sqrt();
    let phi = phi / phi_norm;
    let cross = phi
        .iter()
        .zip(psi.iter())
        .zip(m.iter())
        .fold(T::zero(), |s, ((&p, &q), &w)| s + p * q * w);
    let psi = psi / cross;

    let gamma = spectral_gap(&eigenvalues, lambda0, l)?;

    let mut data = SpectralData {
        lambda0,
        phi0: FieldVector(phi),
        psi0: FieldVector(psi),
        gamma,
        c_expansion: T::zero(),
        weights: m.clone(),
        eigenvalues,
    };
    let grid = SpectralData::expansion_grid(1.0, 40.0, 256);
    data.c_expansion = data.expansion_ratio(propagator, &grid);
    Ok(data)
}

type Eigenpair<T> = (T, DVector<T>, DVector<T>, Vec<(T, T)>);

fn general_eigenpair<T: Scalar>(l: &DMatrix<T>, m: &DVector<T>) -> Result<Eigenpair<T>> {
    let n = l.nrows();
    let spectrum = l
        .clone()
        .try_schur(T::tol(1e-15), 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?
        .complex_eigenvalues();
    let eigenvalues: Vec<(T, T)> = spectrum.iter().map(|c| (c.re, c.im)).collect();
    let lambda = eigenvalues
        .iter()
        .map(|&(re, _)| re)
        .fold(-T::infinity(), |a, b| if b > a { b } else { a });

    let mut shifted = l.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let right = null_vector(&shifted)?;
    let left = null_vector(&shifted.transpose())?;

    // Rayleigh quotient with the left vector sharpens λ₀.
    let denom = left.dot(&right);
    let lambda0 = left.dot(&(l * &right)) / denom;

    let flip = |v: DVector<T>| if v.sum() < T::zero() { -v } else { v };
    let phi = flip(right);
    // Dψ₀ is the left eigenvector of L.
    let psi = DVector::from_fn(n, |x, _| left[x] / m[x]);
    let psi = flip(psi);
    Ok((lambda0, phi, psi, eigenvalues))
}

fn null_vector<T: Scalar>(b: &DMatrix<T>) -> Result<DVector<T>> {
    let svd = b.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Eigen("SVD did not return right singular vectors".into()))?;
    let k = svd.singular_values.imin();
    Ok(v_t.row(k).transpose())
}

fn spectral_gap<T: Scalar>(eigenvalues: &[(T, T)], lambda0: T, l: &DMatrix<T>) -> Result<T> {
    if eigenvalues.len() <= 1 {
        return Ok(T::infinity());
    }
    // Drop the eigenvalue nearest λ₀, then take the largest remaining real part.
    let principal = eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1 .0 - lambda0).abs() + a.1 .1.abs();
            let db = (b.1 .0 - lambda0).abs() + b.1 .1.abs();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let next = eigenvalues
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != principal)
        .map(|(_, &(re, _))| re)
        .fold(-T::infinity(), |a, b| if b > a { b } else { a });
    let gamma = lambda0 - next;
    let scale = norm_inf(l) + T::one();
    if gamma <= T::tol(1e-10) * scale {
        return Err(Error::Eigen(format!(
            "principal eigenvalue is not simple (gap {:e})",
            gamma.to_f64()
        )));
    }
    Ok(gamma)
}

/// Shifts `a` to `a - λ₀/β` so the principal eigenvalue becomes zero.
pub fn criticalize<T: Scalar>(model: &SuperprocessModel<T>) -> Result<SuperprocessModel<T>> {
    let beta = &model.branching().rate;
    if let Some(i) = beta.iter().position(|&b| !(b > T::zero())) {
        return Err(Error::validation(
            format!("beta[{i}]"),
            "criticalizing needs beta > 0 on every state",
        ));
    }
    let lambda0 = spectral_data(model)?.lambda0;
    let linear = DVector::from_fn(model.len(), |x, _| {
        model.branching().linear[x] - lambda0 / beta[x]
    });
    let shifted = model.with_linear(linear)?;
    let residual = spectral_data(&shifted)?.lambda0;
    if residual.abs() > T::tol(1e-12) {
        return Err(Error::NonCritical {
            lambda0: residual.to_f64(),
        });
    }
    Ok(shifted)
}

/// `ν = ½ ⟨A φ₀², ψ₀⟩_m`.
pub fn nu<T: Scalar>(model: &SuperprocessModel<T>, spectral: &SpectralData<T>) -> Result<T> {
    spectral.require_critical()?;
    let a = model.derived_coefficients().variance_rate;
    let m = model.weights();
    let sum = (0..model.len()).fold(T::zero(), |s, x| {
        let p = spectral.phi0.0[x];
        s + a[x] * p * p * spectral.psi0.0[x] * m[x]
    });
    Ok(sum * T::lit(0.5))
}

/// `f̃ = f - ⟨f, ψ₀⟩_m φ₀`.
pub fn tilde_projection<T: Scalar>(f: &FieldVector<T>, spectral: &SpectralData<T>) -> FieldVector<T> {
    let c = spectral.psi_pairing(f);
    FieldVector(&f.0 - &spectral.phi0.0 * c)
}

/// `σ_f² = ∫₀^∞ ⟨A (T_s f)², ψ₀⟩_m ds` for `f` with `⟨f, ψ₀⟩_m = 0`.
pub fn sigma_f_squared<T: Scalar>(
    model: &SuperprocessModel<T>,
    spectral: &SpectralData<T>,
    f: &FieldVector<T>,
) -> Result<T> {
    let propagator = Propagator::new(model);
    sigma_f_squared_with(model, &propagator, spectral, f)
}

pub fn sigma_f_squared_with<T: Scalar>(
    model: &SuperprocessModel<T>,
    propagator: &Propagator<T>,
    spectral: &SpectralData<T>,
    f: &FieldVector<T>,
) -> Result<T> {
    let overlap = spectral.psi_pairing(f);
    if overlap.abs() > T::tol(PROJECTION_TOL) {
        return Err(Error::arg(format!(
            "<f, psi0>_m = {:e} is not zero; the variance constant diverges",
            overlap.to_f64()
        )));
    }
    let a = model.derived_coefficients().variance_rate;
    decay_integral(propagator, spectral, &a, &f.0, T::tol(1e-10))
}

/// `∫₀^∞ ⟨A (R_s v)², ψ₀⟩_m ds` by composite Simpson on `[0, T*]` plus an
/// exponential tail estimate, with `T*` grown until the tail is below
/// `rtol` of the integral.
pub(crate) fn decay_integral<T: Scalar>(
    propagator: &Propagator<T>,
    spectral: &SpectralData<T>,
    a: &DVector<T>,
    v0: &DVector<T>,
    rtol: T,
) -> Result<T> {
    let n = v0.len();
    if v0.iter().all(|&v| v == T::zero()) || n == 1 {
        return Ok(T::zero());
    }
    let gamma = spectral.gamma;
    if !(gamma > T::zero()) {
        return Err(Error::arg("spectral gap is zero; cannot bound the tail"));
    }
    let weight = DVector::from_fn(n, |x, _| a[x] * spectral.psi0.0[x] * spectral.weights[x]);
    let integrand = |v: &DVector<T>| {
        v.iter()
            .zip(weight.iter())
            .fold(T::zero(), |s, (&u, &w)| s + w * u * u)
    };

    let mut horizon = T::lit(10.0) / gamma;
    for _ in 0..40 {
        let mut intervals = 64usize;
        let mut previous: Option<T> = None;
        let (value, envelope) = loop {
            let h = horizon / T::lit(intervals as f64);
            let step = propagator.remainder(h, spectral);
            let mut v = v0.clone();
            let mut samples = Vec::with_capacity(intervals + 1);
            samples.push(integrand(&v));
            for _ in 0..intervals {
                v = &step * v;
                samples.push(integrand(&v));
            }
            let value = simpson(&samples, h);
            let tail_start = 3 * intervals / 4;
            let envelope = samples[tail_start..]
                .iter()
                .fold(T::zero(), |m, &g| if g > m { g } else { m });
            if let Some(prev) = previous {
                let floor = T::epsilon() * T::lit(16.0) * value.abs();
                if (value - prev).abs() <= rtol * value.abs() * T::lit(1e-2) + floor {
                    break (value, envelope);
                }
            }
            if intervals >= 1 << 20 {
                return Err(Error::Quadrature(format!(
                    "Simpson refinement stalled on [0, {}]",
                    horizon.to_f64()
                )));
            }
            previous = Some(value);
            intervals *= 2;
        };
        // g decays at least like e^{-2γs} past the horizon.
        let tail = envelope / (T::lit(2.0) * gamma);
        if tail <= rtol * value.abs() || value == T::zero() {
            return Ok(value + tail.min(rtol * value.abs()));
        }
        horizon *= T::lit(2.0);
    }
    Err(Error::Quadrature("tail did not become negligible".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{single_point, symmetric_pair, symmetric_pair_with_linear};

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn mean_semigroup_examples() {
        let t3 = mean_semigroup(&single_point(), 3.0).unwrap();
        assert_eq!(t3[(0, 0)], 1.0);
        let m2 = symmetric_pair();
        let e = mean_semigroup(&m2, 0.5).unwrap();
        let g = &e * DVector::from_column_slice(&[1.0, -1.0]);
        assert!((g[0] - (-1f64).exp()).abs() < 1e-15);
        assert!((g[1] + (-1f64).exp()).abs() < 1e-15);
        let c = &e * DVector::from_column_slice(&[1.0, 1.0]);
        assert!((c[0] - 1.0).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);
        assert!(mean_semigroup(&m2, -1.0).is_err());
        let id = mean_semigroup(&m2, 0.0).unwrap();
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn density_examples() {
        let q1 = density_matrix(&single_point(), 1.0).unwrap();
        assert!((q1[(0, 0)] - 1.0).abs() < 1e-15);
        let q = density_matrix(&symmetric_pair(), 1.0).unwrap();
        let e2 = (-2f64).exp();
        assert!((q[(0, 0)] - 0.5 * (1.0 + e2)).abs() < 1e-14);
        assert!((q[(0, 1)] - 0.5 * (1.0 - e2)).abs() < 1e-14);
        assert!(density_matrix(&symmetric_pair(), 0.0).is_err());
    }

    #[test]
    fn spectral_examples() {
        let s1 = spectral_data(&single_point()).unwrap();
        assert_eq!(s1.lambda0, 0.0);
        assert!((s1.phi0.0[0] - 1.0).abs() < 1e-15);
        assert!(s1.gamma.is_infinite());

        let s2 = spectral_data(&symmetric_pair()).unwrap();
        assert!(s2.lambda0.abs() < 1e-14);
        for x in 0..2 {
            assert!((s2.phi0.0[x] - S).abs() < 1e-14);
            assert!((s2.psi0.0[x] - S).abs() < 1e-14);
        }
        assert!((s2.gamma - 2.0).abs() < 1e-13);

        let s3 = spectral_data(&symmetric_pair_with_linear(0.3, 0.3)).unwrap();
        assert!((s3.lambda0 - 0.3).abs() < 1e-14);
        assert!((s3.gamma - 2.0).abs() < 1e-13);
        assert!((s3.phi0.0[1] - S).abs() < 1e-14);
    }

    #[test]
    fn general_route_matches_symmetric_route() {
        // Non-uniform weights with an asymmetric generator force the Schur/SVD path.
        let model = crate::model::load_model(
            r#"{"states":["A","B","C"],"m":[1,2,0.5],"Q":[[-2,1,1],[0.5,-1,0.5],[3,1,-4]],
               "beta":[1,1,1],"a":[0.1,-0.2,0.3],"b":[1,0.5,1],"jumps":[[],[],[]]}"#,
        )
        .unwrap();
        let p = Propagator::new(&model);
        assert!(!p.is_symmetric());
        let s = spectral_data_with(&p).unwrap();
        let l = model.mean_generator();
        let lphi = &l * &s.phi0.0;
        for x in 0..3 {
            assert!((lphi[x] - s.lambda0 * s.phi0.0[x]).abs() < 1e-12);
        }
        // Dψ₀ is a left eigenvector.
        let dpsi = s.psi0.0.component_mul(&s.weights);
        let left = l.transpose() * &dpsi;
        for x in 0..3 {
            assert!((left[x] - s.lambda0 * dpsi[x]).abs() < 1e-12);
        }
        assert!((s.phi0.inner_m(&s.phi0, &s.weights) - 1.0).abs() < 1e-12);
        assert!((s.phi0.inner_m(&s.psi0, &s.weights) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn remainder_is_deflated_semigroup() {
        let model = crate::model::load_model(
            r#"{"states":["A","B","C"],"m":[1,2,0.5],"Q":[[-2,1,1],[0.5,-1,0.5],[3,1,-4]],
               "beta":[1,1,1],"a":[0,0,0],"b":[1,0.5,1],"jumps":[[],[],[]]}"#,
        )
        .unwrap();
        let model = criticalize(&model).unwrap();
        let p = Propagator::new(&model);
        let s = spectral_data_with(&p).unwrap();
        let t = 0.7;
        let direct = p.exp(t) - s.projector();
        let r = p.remainder(t, &s);
        assert!((direct - &r).abs().max() < 1e-12);
        let r2 = p.remainder(2.0 * t, &s);
        assert!((&r * &r - r2).abs().max() < 1e-13);
    }

    #[test]
    fn criticalize_examples() {
        let shifted = criticalize(&symmetric_pair_with_linear(0.3, 0.3)).unwrap();
        assert!(shifted.branching().linear.iter().all(|&a| a.abs() < 1e-14));
        let same = criticalize(&single_point()).unwrap();
        assert_eq!(same, single_point());
        let asym = criticalize(&symmetric_pair_with_linear(0.2, -0.2)).unwrap();
        assert!(spectral_data(&asym).unwrap().lambda0.abs() <= 1e-12);
    }

    #[test]
    fn nu_examples() {
        let m1 = single_point();
        assert!((nu(&m1, &spectral_data(&m1).unwrap()).unwrap() - 0.5).abs() < 1e-15);
        let m2 = symmetric_pair();
        assert!((nu(&m2, &spectral_data(&m2).unwrap()).unwrap() - S).abs() < 1e-14);
        let m3 = crate::reference::single_point_jumps();
        assert!((nu(&m3, &spectral_data(&m3).unwrap()).unwrap() - 0.5).abs() < 1e-15);
        let hot = symmetric_pair_with_linear(0.3, 0.3);
        assert!(matches!(
            nu(&hot, &spectral_data(&hot).unwrap()),
            Err(Error::NonCritical { .. })
        ));
    }

    #[test]
    fn tilde_examples() {
        let s = spectral_data(&symmetric_pair()).unwrap();
        let f1 = tilde_projection(&FieldVector::from_slice(&[1.0, -1.0]), &s);
        assert!((f1.0[0] - 1.0).abs() < 1e-14 && (f1.0[1] + 1.0).abs() < 1e-14);
        let f2 = tilde_projection(&FieldVector::from_slice(&[1.0, 1.0]), &s);
        assert!(f2.0.abs().max() < 1e-14);
        let f3 = tilde_projection(&FieldVector::from_slice(&[2.0, 0.0]), &s);
        assert!((f3.0[0] - 1.0).abs() < 1e-14 && (f3.0[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_examples() {
        let m2 = symmetric_pair();
        let s = spectral_data(&m2).unwrap();
        let v = sigma_f_squared(&m2, &s, &FieldVector::from_slice(&[1.0, -1.0])).unwrap();
        assert!((v - S).abs() < 1e-9, "{v}");
        assert_eq!(sigma_f_squared(&m2, &s, &FieldVector::from_slice(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(sigma_f_squared(&m2, &s, &FieldVector::from_slice(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn m2_expansion_constant() {
        // e^{-λ₀t}q - φψ = ½ e^{-2t}[[1,-1],[-1,1]] and φψ = ½, so c = 1.
        let s = spectral_data(&symmetric_pair()).unwrap();
        assert!((s.c_expansion - 1.0).abs() < 1e-12, "{}", s.c_expansion);
    }

    #[test]
    fn single_precision_instantiation() {
        let m2: SuperprocessModel<f32> = symmetric_pair().cast();
        let s = spectral_data(&m2).unwrap();
        assert!((s.gamma - 2.0).abs() < 1e-5);
        assert!((nu(&m2, &s).unwrap() - S as f32).abs() < 1e-5);
    }
}

//! Full-truncation Euler scheme for the multitype CB process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::model::SuperprocessModel;
use crate::spectral::spectral_data;
use crate::vector::{FieldVector, MeasureVector};

/// Upper bound on `dt (‖Q‖∞ + K)`.
pub const STABILITY_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Paths whose total mass drops to or below this are absorbed.
    pub absorb_floor: f64,
}

impl SimConfig {
    pub fn new(t_end: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            t_end,
            dt,
            n_paths,
            seed,
            absorb_floor: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::arg(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::arg(format!(
                "t_end = {} must be finite and at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::arg("n_paths must be at least 1"));
        }
        if !(self.absorb_floor >= 0.0) {
            return Err(Error::arg("absorb_floor must be >= 0"));
        }
        Ok(())
    }

    /// Number of Euler steps; the step actually used is `t_end / steps <= dt`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Masses of every path at `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub n_states: usize,
    /// Row-major `n_paths × n_states`.
    pub masses: Vec<f64>,
    pub survived: Vec<bool>,
    /// ChaCha stream used for each path under `seed`.
    pub stream_ids: Vec<u64>,
    pub seed: u64,
    pub t_end: f64,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.survived.len()
    }

    pub fn row(&self, path: usize) -> &[f64] {
        &self.masses[path * self.n_states..(path + 1) * self.n_states]
    }

    pub fn survivors(&self) -> usize {
        self.survived.iter().filter(|&&s| s).count()
    }

    /// Survival fraction and its binomial standard error.
    pub fn survival_fraction(&self) -> (f64, f64) {
        let n = self.n_paths() as f64;
        let p = self.survivors() as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }

    /// `⟨f, X_t⟩` for every path.
    pub fn pairings(&self, f: &FieldVector<f64>) -> Vec<f64> {
        (0..self.n_paths())
            .map(|p| self.row(p).iter().zip(f.values().iter()).map(|(x, g)| x * g).sum())
            .collect()
    }
}

struct Coefficients {
    // incoming[i] = [(j, Q_ji)] for j ≠ i
    incoming: Vec<Vec<(usize, f64)>>,
    // Q_ii + α_i - β_i Σ w y
    self_rate: Vec<f64>,
    diffusion: Vec<f64>,
    jumps: Vec<Vec<(f64, f64)>>,
}

impl Coefficients {
    fn new(model: &SuperprocessModel<f64>, h: f64) -> Self {
        let n = model.len();
        let q = model.motion().rates();
        let br = model.branching();
        let alpha = model.derived_coefficients().alpha;
        let incoming = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && q[(j, i)] != 0.0)
                    .map(|j| (j, q[(j, i)]))
                    .collect()
            })
            .collect();
        // The jump term of Ψ is compensated, so the mean drift of the jumps
        // is removed here to keep the mean growth rate at α.
        let self_rate = (0..n)
            .map(|i| {
                let compensator: f64 = br.jumps[i].iter().map(|j| j.w * j.y).sum();
                q[(i, i)] + alpha[i] - br.rate[i] * compensator
            })
            .collect();
        let diffusion = (0..n)
            .map(|i| (2.0 * br.rate[i] * br.quadratic[i] * h).sqrt())
            .collect();
        let jumps = (0..n)
            .map(|i| {
                br.jumps[i]
                    .iter()
                    .filter(|j| j.w > 0.0 && j.y > 0.0)
                    .map(|j| (j.y, br.rate[i] * j.w * h))
                    .collect()
            })
            .collect();
        Self {
            incoming,
            self_rate,
            diffusion,
            jumps,
        }
    }
}

/// Simulates `cfg.n_paths` independent copies of `X_t` started from `mu`.
///
/// Path `p` draws from the ChaCha8 stream `p` under `cfg.seed`, so the
/// ensemble is identical for any thread count or schedule.
pub fn simulate_paths(
    model: &SuperprocessModel<f64>,
    mu: &MeasureVector<f64>,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    cfg.validate()?;
    let n = model.len();
    if mu.len() != n {
        return Err(Error::arg(format!(
            "mu has {} entries, model has {n} states",
            mu.len()
        )));
    }
    if mu.is_zero() {
        return Err(Error::arg("initial measure must have positive mass"));
    }
    spectral_data(model)?.require_critical()?;
    let k = model.derived_coefficients().k_bound;
    let stiffness = cfg.dt * (norm_inf(model.motion().rates()) + k);
    if stiffness > STABILITY_LIMIT {
        return Err(Error::arg(format!(
            "dt = {} too large: dt (|Q|_inf + K) = {stiffness:.3} exceeds {STABILITY_LIMIT}",
            cfg.dt
        )));
    }

    let steps = cfg.steps();
    let h = cfg.t_end / steps as f64;
    let coef = Coefficients::new(model, h);
    let start: Vec<f64> = mu.values().iter().copied().collect();

    let rows: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(path);
            simulate_one(&coef, &start, steps, h, cfg.absorb_floor, &mut rng)
        })
        .collect();

    let mut masses = Vec::with_capacity(cfg.n_paths * n);
    let mut survived = Vec::with_capacity(cfg.n_paths);
    for row in rows {
        survived.push(row.iter().sum::<f64>() > 0.0);
        masses.extend(row);
    }
    Ok(PathEnsemble {
        n_states: n,
        masses,
        survived,
        stream_ids: (0..cfg.n_paths as u64).collect(),
        seed: cfg.seed,
        t_end: cfg.t_end,
    })
}

fn simulate_one<R: Rng>(
    coef: &Coefficients,
    start: &[f64],
    steps: usize,
    h: f64,
    floor: f64,
    rng: &mut R,
) -> Vec<f64> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut next = vec![0.0; n];
    for _ in 0..steps {
        for i in 0..n {
            let xi = x[i];
            let inflow: f64 = coef.incoming[i].iter().map(|&(j, r)| x[j] * r).sum();
            let mut v = xi + h * (inflow + coef.self_rate[i] * xi);
            if xi > 0.0 {
                if coef.diffusion[i] > 0.0 {
                    let xi_n: f64 = rng.sample(StandardNormal);
                    v += coef.diffusion[i] * xi.sqrt() * xi_n;
                }
                for &(y, rate) in &coef.jumps[i] {
                    // Poisson::new only fails for non-positive or huge rates;
                    // the stability check keeps rate * x bounded.
                    if let Ok(dist) = Poisson::new(rate * xi) {
                        v += y * dist.sample(rng);
                    }
                }
            }
            next[i] = v.max(0.0);
        }
        std::mem::swap(&mut x, &mut next);
        let total: f64 = x.iter().sum();
        if total <= floor {
            x.iter_mut().for_each(|v| *v = 0.0);
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{single_point, symmetric_pair};

    #[test]
    fn rejects_bad_inputs() {
        let m1 = single_point();
        let zero = MeasureVector::from_slice(&[0.0]).unwrap();
        let cfg = SimConfig::new(1.0, 0.01, 10, 1);
        assert!(matches!(simulate_paths(&m1, &zero, &cfg), Err(Error::InvalidArgument(_))));
        let d = MeasureVector::dirac(1, 0, 1.0);
        assert!(simulate_paths(&m1, &d, &SimConfig::new(1.0, 0.5, 10, 1)).is_err());
        assert!(simulate_paths(&m1, &d, &SimConfig::new(1.0, 0.01, 0, 1)).is_err());
        assert!(simulate_paths(&m1, &d, &SimConfig::new(0.001, 0.01, 1, 1)).is_err());
        let sup = m1.with_linear(nalgebra::DVector::from_element(1, 0.5)).unwrap();
        assert!(matches!(
            simulate_paths(&sup, &d, &cfg),
            Err(Error::NonCritical { .. })
        ));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let m2 = symmetric_pair();
        let mu = MeasureVector::from_slice(&[1.0, 0.5]).unwrap();
        let cfg = SimConfig::new(2.0, 0.01, 64, 7);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_paths(&m2, &mu, &cfg).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(4));
        assert_eq!(a, simulate_paths(&m2, &mu, &cfg).unwrap());
        let other = simulate_paths(&m2, &mu, &SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.masses, other.masses);
    }

    #[test]
    fn ensemble_invariants() {
        let m1 = single_point();
        let e = simulate_paths(&m1, &MeasureVector::dirac(1, 0, 1.0), &SimConfig::new(5.0, 0.01, 500, 3)).unwrap();
        assert_eq!(e.n_paths(), 500);
        for p in 0..e.n_paths() {
            let row = e.row(p);
            assert!(row.iter().all(|&v| v >= 0.0));
            assert_eq!(e.survived[p], row.iter().sum::<f64>() > 0.0);
        }
        let (frac, se) = e.survival_fraction();
        // P(survive to 5) = 1 - e^{-2/5}
        let exact = 1.0 - (-0.4f64).exp();
        assert!((frac - exact).abs() < 4.0 * se, "{frac} vs {exact}");
    }

    #[test]
    fn mean_is_conserved_with_jumps() {
        let m3 = crate::reference::single_point_jumps();
        let mu = MeasureVector::dirac(1, 0, 1.0);
        let e = simulate_paths(&m3, &mu, &SimConfig::new(1.0, 0.005, 4000, 11)).unwrap();
        let vals = e.pairings(&FieldVector::from_slice(&[1.0]));
        let s = super::super::SampleSummary::from_values(&vals);
        assert!((s.mean - 1.0).abs() < 4.0 * s.mean_se, "{} ± {}", s.mean, s.mean_se);
    }
}

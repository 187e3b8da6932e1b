//! Conditional statistics and goodness-of-fit checks against the limit laws.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use statrs::function::erf::erfc;

use super::sim::PathEnsemble;
use crate::error::{Error, Result};
use crate::quad::pairwise_sum;
use crate::spectral::{tilde_projection, SpectralData};
use crate::vector::FieldVector;

const KS_MIN_SAMPLES: usize = 100;
const CLT_MIN_SAMPLES: usize = 10_000;
const KS_SERIES_TERMS: usize = 100;

/// Mean and variance with standard errors, summed pairwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

impl SampleSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                mean_se: f64::NAN,
                variance: f64::NAN,
                variance_se: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = pairwise_sum(values) / nf;
        let dev2: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let dev4: Vec<f64> = dev2.iter().map(|d| d * d).collect();
        let m2 = pairwise_sum(&dev2) / nf;
        let m4 = pairwise_sum(&dev4) / nf;
        let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
        Self {
            n,
            mean,
            mean_se: (variance / nf).sqrt(),
            variance,
            variance_se: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        }
    }
}

/// `V = t^{-1}⟨φ₀, X_t⟩` and `Z = t^{-1/2}⟨f̃, X_t⟩` over surviving paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSamples {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub n_paths: usize,
    pub v_summary: SampleSummary,
    pub z_summary: SampleSummary,
    /// Summary of `Z²`.
    pub z2_summary: SampleSummary,
}

impl ConditionalSamples {
    pub fn survivors(&self) -> usize {
        self.v.len()
    }
}

pub fn conditional_statistics(
    ensemble: &PathEnsemble,
    spectral: &SpectralData<f64>,
    f: &FieldVector<f64>,
) -> Result<ConditionalSamples> {
    if f.len() != ensemble.n_states || spectral.phi0.len() != ensemble.n_states {
        return Err(Error::arg("f, spectral data and ensemble disagree on the state count"));
    }
    let f_tilde = tilde_projection(f, spectral);
    let t = ensemble.t_end;
    let mut v = Vec::new();
    let mut z = Vec::new();
    for p in (0..ensemble.n_paths()).filter(|&p| ensemble.survived[p]) {
        let row = ensemble.row(p);
        let pair = |g: &FieldVector<f64>| -> f64 {
            row.iter().zip(g.values().iter()).map(|(x, y)| x * y).sum()
        };
        v.push(pair(&spectral.phi0) / t);
        z.push(pair(&f_tilde) / t.sqrt());
    }
    if v.is_empty() {
        return Err(Error::NoSurvivors);
    }
    let z2: Vec<f64> = z.iter().map(|x| x * x).collect();
    Ok(ConditionalSamples {
        v_summary: SampleSummary::from_values(&v),
        z_summary: SampleSummary::from_values(&z),
        z2_summary: SampleSummary::from_values(&z2),
        v,
        z,
        n_paths: ensemble.n_paths(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Asymptotic Kolmogorov survival function at `(√n + 0.12 + 0.11/√n) D`.
pub fn ks_p_value(statistic: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * statistic;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=KS_SERIES_TERMS {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sided one-sample Kolmogorov–Smirnov test against a continuous `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let c = cdf(x);
        d.max((i + 1) as f64 / n - c).max(c - i as f64 / n)
    });
    Ok(KsResult {
        statistic,
        p_value: ks_p_value(statistic, sorted.len()),
        n: sorted.len(),
    })
}

/// KS test against the exponential law with mean `scale`.
pub fn ks_exponential_test(samples: &[f64], scale: f64) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if !(scale > 0.0) {
        return Err(Error::arg(format!("exponential mean must be positive, got {scale}")));
    }
    ks_test(samples, |x| if x <= 0.0 { 0.0 } else { -(-x / scale).exp_m1() })
}

/// Joint limit of `(V, Z)`: `W ~ Exp(mean ν)` and `G√W` with `G ~ N(0, σ²)`
/// independent of `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLaw {
    pub nu: f64,
    pub sigma_sq: f64,
}

impl LimitLaw {
    pub fn new(nu: f64, sigma_sq: f64) -> Result<Self> {
        if !(nu > 0.0) || !(sigma_sq > 0.0) {
            return Err(Error::arg(format!(
                "limit law needs nu > 0 and sigma^2 > 0, got {nu} and {sigma_sq}"
            )));
        }
        Ok(Self { nu, sigma_sq })
    }

    // d is the Laplace density with this scale.
    fn laplace_scale(&self) -> f64 {
        (2.0 * self.nu * self.sigma_sq).sqrt() / 2.0
    }

    /// Density of `G√W`: `(2νσ²)^{-1/2} exp(-2|x| / √(2νσ²))`.
    pub fn laplace_density(&self, x: f64) -> f64 {
        let s = (2.0 * self.nu * self.sigma_sq).sqrt();
        (-2.0 * x.abs() / s).exp() / s
    }

    pub fn laplace_cdf(&self, x: f64) -> f64 {
        let b = self.laplace_scale();
        if x < 0.0 {
            0.5 * (x / b).exp()
        } else {
            1.0 - 0.5 * (-x / b).exp()
        }
    }

    /// CDF of `N(0, σ²)`.
    pub fn normal_cdf(&self, x: f64) -> f64 {
        0.5 * erfc(-x / (2.0 * self.sigma_sq).sqrt())
    }

    /// One draw of `(W, G√W)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let w = Exp::new(1.0 / self.nu).expect("rate is positive").sample(rng);
        let g = Normal::new(0.0, self.sigma_sq.sqrt())
            .expect("sd is positive")
            .sample(rng);
        (w, g * w.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltReport {
    /// `Z` against the density of `G√W`.
    pub laplace: KsResult,
    /// `Z/√V` against `N(0, σ²)`.
    pub normalized: KsResult,
    /// Sample correlation of `(Z/√V)²` with `V`.
    pub correlation: f64,
    pub correlation_se: f64,
}

impl CltReport {
    pub fn independence_ok(&self) -> bool {
        self.correlation.abs() <= 4.0 * self.correlation_se
    }

    pub fn passed(&self, alpha: f64) -> bool {
        self.laplace.p_value > alpha && self.normalized.p_value > alpha && self.independence_ok()
    }
}

pub fn clt_checks(v: &[f64], z: &[f64], nu: f64, sigma_sq: f64) -> Result<CltReport> {
    if v.len() != z.len() {
        return Err(Error::arg("V and Z sample counts differ"));
    }
    if v.len() < CLT_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: CLT_MIN_SAMPLES,
            got: v.len(),
        });
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::arg("V samples must be positive"));
    }
    let law = LimitLaw::new(nu, sigma_sq)?;
    let laplace = ks_test(z, |x| law.laplace_cdf(x))?;
    let ratio: Vec<f64> = v.iter().zip(z).map(|(v, z)| z / v.sqrt()).collect();
    let normalized = ks_test(&ratio, |x| law.normal_cdf(x))?;
    let sq: Vec<f64> = ratio.iter().map(|r| r * r).collect();
    Ok(CltReport {
        laplace,
        normalized,
        correlation: correlation(&sq, v),
        correlation_se: 1.0 / (v.len() as f64).sqrt(),
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = pairwise_sum(a) / n;
    let mb = pairwise_sum(b) / n;
    let cov: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let va: Vec<f64> = a.iter().map(|x| (x - ma).powi(2)).collect();
    let vb: Vec<f64> = b.iter().map(|y| (y - mb).powi(2)).collect();
    let denom = (pairwise_sum(&va) * pairwise_sum(&vb)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    pairwise_sum(&cov) / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_samples_against_unit_exponential() {
        let r = ks_exponential_test(&[1.0; 200], 1.0).unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        assert!((r.statistic - exact).abs() < 1e-15);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn exponential_self_consistency() {
        let exp = Exp::new(2.0).unwrap();
        let mut pass = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..100_000).map(|_| exp.sample(&mut rng)).collect();
            if ks_exponential_test(&xs, 0.5).unwrap().p_value > 0.01 {
                pass += 1;
            }
        }
        // 99% nominal; allow the binomial fluctuation of 100 seeds
        assert!(pass >= 96, "{pass}");
        assert!(matches!(
            ks_exponential_test(&[1.0; 99], 1.0),
            Err(Error::TooFewSamples { needed: 100, got: 99 })
        ));
    }

    #[test]
    fn ks_p_value_limits() {
        assert_eq!(ks_p_value(0.0, 1000), 1.0);
        assert!((ks_p_value(1.36 / 1000f64.sqrt(), 1000) - 0.05).abs() < 0.01);
        assert!(ks_p_value(0.5, 1000) < 1e-100);
    }

    #[test]
    fn laplace_density_normalised() {
        let law = LimitLaw::new(0.5, 1.0).unwrap();
        let h = 1e-3;
        let vals: Vec<f64> = (0..=40_000).map(|k| law.laplace_density(-20.0 + k as f64 * h)).collect();
        assert!((crate::quad::simpson(&vals, h) - 1.0).abs() < 1e-9);
        assert_eq!(law.laplace_cdf(0.0), 0.5);
        assert!((law.normal_cdf(1.0) - 0.841344746068543).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: Vec<f64> = (0..50_000).map(|_| law.sample(&mut rng).0).collect();
        let s = SampleSummary::from_values(&w);
        assert!((s.mean - 0.5).abs() < 4.0 * s.mean_se);
    }

    #[test]
    fn clt_self_consistency() {
        let law = LimitLaw::new(0.5, 1.0).unwrap();
        let mut failures = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let (v, z): (Vec<f64>, Vec<f64>) = (0..20_000).map(|_| law.sample(&mut rng)).unzip();
            if !clt_checks(&v, &z, 0.5, 1.0).unwrap().passed(0.01) {
                failures += 1;
            }
        }
        assert!(failures <= 2, "{failures}");
    }

    #[test]
    fn clt_detects_dependence() {
        let law = LimitLaw::new(0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..20_000).map(|_| law.sample(&mut rng).0).collect();
        let r = clt_checks(&v, &v, 0.5, 1.0).unwrap();
        assert!(r.correlation.abs() > 0.5);
        assert!(!r.independence_ok());
        assert!(matches!(
            clt_checks(&v[..100], &v[..100], 0.5, 1.0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn summary_moments() {
        let s = SampleSummary::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
    }
}

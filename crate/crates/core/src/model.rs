//! Superprocess models on a finite state space and the standing checks run
//! against them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::scalar::Scalar;

/// Slack allowed in the dynamic dual sub-Markov check.
pub const TOL_DUAL: f64 = 1e-10;

/// State labels together with the reference measure `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace<T: Scalar> {
    labels: Vec<String>,
    weights: DVector<T>,
}

impl<T: Scalar> StateSpace<T> {
    pub fn new(labels: Vec<String>, weights: DVector<T>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("states", "at least one state is required"));
        }
        if labels.len() != weights.len() {
            return Err(Error::validation(
                "m",
                format!("expected {} entries, got {}", labels.len(), weights.len()),
            ));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::validation(
                    format!("states[{i}]"),
                    format!("duplicate label {label:?}"),
                ));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > T::zero()) || !w.is_finite_value() {
                return Err(Error::validation(
                    format!("m[{i}]"),
                    "reference weights must be finite and > 0",
                ));
            }
        }
        Ok(StateSpace { labels, weights })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Rate matrix of the spatial motion. A negative row sum is the killing
/// rate into the cemetery state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGenerator<T: Scalar> {
    rates: DMatrix<T>,
}

impl<T: Scalar> SpatialGenerator<T> {
    pub fn new(rates: DMatrix<T>) -> Result<Self> {
        let n = rates.nrows();
        if rates.ncols() != n {
            return Err(Error::validation("Q", "matrix must be square"));
        }
        let slack = T::tol(1e-12);
        for i in 0..n {
            let mut row_sum = T::zero();
            let mut scale = T::zero();
            for j in 0..n {
                let q = rates[(i, j)];
                if !q.is_finite_value() {
                    return Err(Error::validation(format!("Q[{i}][{j}]"), "must be finite"));
                }
                if i != j && q < T::zero() {
                    return Err(Error::validation(
                        format!("Q[{i}][{j}]"),
                        "off-diagonal rates must be >= 0",
                    ));
                }
                row_sum += q;
                scale += q.abs();
            }
            if row_sum > slack * (scale + T::one()) {
                return Err(Error::validation(
                    format!("Q[{i}]"),
                    "row sums must be <= 0",
                ));
            }
        }
        Ok(SpatialGenerator { rates })
    }

    pub fn rates(&self) -> &DMatrix<T> {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.nrows() == 0
    }

    /// Killing rate `-Σ_j Q(i, j)` per state.
    pub fn killing_rates(&self) -> DVector<T> {
        DVector::from_iterator(
            self.len(),
            self.rates.row_iter().map(|r| -r.sum()),
        )
    }

    /// Strong connectivity of the graph with an edge `i → j` whenever
    /// `Q(i, j) > 0`. Equivalent to `exp(tQ)` being entrywise positive.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for (j, visited) in seen.iter_mut().enumerate() {
                    let q = if forward { self.rates[(i, j)] } else { self.rates[(j, i)] };
                    if i != j && q > T::zero() && !*visited {
                        *visited = true;
                        stack.push(j);
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        n <= 1 || (reach(true) && reach(false))
    }
}

/// One atom `w · δ_y` of the jump measure `n(x, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpAtom<T> {
    /// Jump size `y > 0`.
    pub y: T,
    /// Intensity `w > 0`.
    pub w: T,
}

/// Branching rate `β`, mechanism coefficients `a`, `b`, and the jump atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingData<T: Scalar> {
    pub rate: DVector<T>,
    pub linear: DVector<T>,
    pub quadratic: DVector<T>,
    pub jumps: Vec<Vec<JumpAtom<T>>>,
}

impl<T: Scalar> BranchingData<T> {
    fn validate(&self, n: usize) -> Result<()> {
        for (name, v) in [("beta", &self.rate), ("a", &self.linear), ("b", &self.quadratic)] {
            if v.len() != n {
                return Err(Error::validation(
                    name,
                    format!("expected {n} entries, got {}", v.len()),
                ));
            }
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite_value() {
                    return Err(Error::validation(format!("{name}[{i}]"), "must be finite"));
                }
            }
        }
        for (i, &x) in self.rate.iter().enumerate() {
            if x < T::zero() {
                return Err(Error::validation(format!("beta[{i}]"), "must be >= 0"));
            }
        }
        for (i, &x) in self.quadratic.iter().enumerate() {
            if x < T::zero() {
                return Err(Error::validation(format!("b[{i}]"), "must be >= 0"));
            }
        }
        if self.jumps.len() != n {
            return Err(Error::validation(
                "jumps",
                format!("expected {n} lists, got {}", self.jumps.len()),
            ));
        }
        for (i, atoms) in self.jumps.iter().enumerate() {
            for (k, atom) in atoms.iter().enumerate() {
                if !(atom.y > T::zero()) || !atom.y.is_finite_value() {
                    return Err(Error::validation(format!("jumps[{i}][{k}].y"), "must be finite and > 0"));
                }
                if !(atom.w > T::zero()) || !atom.w.is_finite_value() {
                    return Err(Error::validation(format!("jumps[{i}][{k}].w"), "must be finite and > 0"));
                }
            }
        }
        let degenerate = (0..n).all(|i| {
            let mass: T = self.jumps[i].iter().fold(T::zero(), |s, a| s + a.w);
            self.rate[i] * (self.quadratic[i] + mass) == T::zero()
        });
        if degenerate {
            return Err(Error::validation(
                "b",
                "beta*(b + jump mass) vanishes on every state; the mechanism has no branching noise",
            ));
        }
        Ok(())
    }

    /// `Σ_k y_k² w_k` at state `x`.
    pub fn jump_second_moment(&self, x: usize) -> T {
        self.jumps[x].iter().fold(T::zero(), |s, a| s + a.y * a.y * a.w)
    }
}

/// `α(x) = β(x) a(x)`, `A(x) = β(x)(2b(x) + Σ y² w)` and `K = max(|α| + A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCoefficients<T: Scalar> {
    pub alpha: DVector<T>,
    pub variance_rate: DVector<T>,
    pub k_bound: T,
}

/// A validated superprocess on a finite, irreducible state space.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperprocessModel<T: Scalar> {
    space: StateSpace<T>,
    motion: SpatialGenerator<T>,
    branching: BranchingData<T>,
}

impl<T: Scalar> SuperprocessModel<T> {
    pub fn new(
        space: StateSpace<T>,
        motion: SpatialGenerator<T>,
        branching: BranchingData<T>,
    ) -> Result<Self> {
        let n = space.len();
        if motion.len() != n {
            return Err(Error::validation(
                "Q",
                format!("expected {n}x{n}, got {}x{}", motion.len(), motion.len()),
            ));
        }
        branching.validate(n)?;
        if !motion.is_irreducible() {
            return Err(Error::validation(
                "Q",
                "rate graph is not strongly connected; exp(tQ) has zero entries",
            ));
        }
        Ok(SuperprocessModel {
            space,
            motion,
            branching,
        })
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn space(&self) -> &StateSpace<T> {
        &self.space
    }

    pub fn motion(&self) -> &SpatialGenerator<T> {
        &self.motion
    }

    pub fn branching(&self) -> &BranchingData<T> {
        &self.branching
    }

    pub fn weights(&self) -> &DVector<T> {
        self.space.weights()
    }

    /// Copy with the linear coefficient `a` replaced.
    pub fn with_linear(&self, linear: DVector<T>) -> Result<Self> {
        let mut branching = self.branching.clone();
        branching.linear = linear;
        Self::new(self.space.clone(), self.motion.clone(), branching)
    }

    pub fn derived_coefficients(&self) -> DerivedCoefficients<T> {
        let b = &self.branching;
        let n = self.len();
        let alpha = b.rate.component_mul(&b.linear);
        let variance_rate = DVector::from_fn(n, |x, _| {
            b.rate[x] * (T::lit(2.0) * b.quadratic[x] + b.jump_second_moment(x))
        });
        let k_bound = (0..n)
            .map(|x| alpha[x].abs() + variance_rate[x])
            .fold(T::zero(), |m, v| if v > m { v } else { m });
        DerivedCoefficients {
            alpha,
            variance_rate,
            k_bound,
        }
    }

    /// Generator `Q + diag(α)` of the mean semigroup.
    pub fn mean_generator(&self) -> DMatrix<T> {
        let alpha = self.branching.rate.component_mul(&self.branching.linear);
        let mut l = self.motion.rates.clone();
        for i in 0..self.len() {
            l[(i, i)] += alpha[i];
        }
        l
    }

    pub fn check_dual_submarkov(&self, t_grid: &[T]) -> Result<DualSubmarkovReport<T>> {
        check_dual_submarkov(&self.space, &self.motion, t_grid)
    }

    /// Sufficient condition for the extinction assumption: the mechanism
    /// dominates `Ψ̃(z) = -Kz + b̃z²` with `b̃ = min β b`, which satisfies
    /// Grey's condition whenever `b̃ > 0`.
    pub fn check_grey_domination(&self) -> GreyReport<T> {
        let b = &self.branching;
        let b_tilde = (0..self.len())
            .map(|x| b.rate[x] * b.quadratic[x])
            .fold(T::infinity(), |m, v| if v < m { v } else { m });
        GreyReport {
            satisfied: b_tilde > T::zero(),
            b_tilde,
            k_bound: self.derived_coefficients().k_bound,
        }
    }

    /// Converts between scalar types.
    pub fn cast<U: Scalar>(&self) -> SuperprocessModel<U> {
        let c = |v: &DVector<T>| v.map(|x| U::lit(x.to_f64()));
        SuperprocessModel {
            space: StateSpace {
                labels: self.space.labels.clone(),
                weights: c(&self.space.weights),
            },
            motion: SpatialGenerator {
                rates: self.motion.rates.map(|x| U::lit(x.to_f64())),
            },
            branching: BranchingData {
                rate: c(&self.branching.rate),
                linear: c(&self.branching.linear),
                quadratic: c(&self.branching.quadratic),
                jumps: self
                    .branching
                    .jumps
                    .iter()
                    .map(|atoms| {
                        atoms
                            .iter()
                            .map(|a| JumpAtom {
                                y: U::lit(a.y.to_f64()),
                                w: U::lit(a.w.to_f64()),
                            })
                            .collect()
                    })
                    .collect(),
            },
        }
    }

    pub fn to_config(&self) -> ModelConfig {
        let v = |x: &DVector<T>| x.iter().map(|a| a.to_f64()).collect::<Vec<_>>();
        let n = self.len();
        ModelConfig {
            states: self.space.labels.clone(),
            m: v(&self.space.weights),
            q: (0..n)
                .map(|i| (0..n).map(|j| self.motion.rates[(i, j)].to_f64()).collect())
                .collect(),
            beta: v(&self.branching.rate),
            a: v(&self.branching.linear),
            b: v(&self.branching.quadratic),
            jumps: self
                .branching
                .jumps
                .iter()
                .map(|atoms| {
                    atoms
                        .iter()
                        .map(|a| JumpAtom {
                            y: a.y.to_f64(),
                            w: a.w.to_f64(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_config()).expect("model config serializes")
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        let n = cfg.states.len();
        let v = |x: &[f64]| DVector::from_iterator(x.len(), x.iter().map(|&a| T::lit(a)));
        let space = StateSpace::new(cfg.states.clone(), v(&cfg.m))?;
        if cfg.q.len() != n {
            return Err(Error::validation(
                "Q",
                format!("expected {n} rows, got {}", cfg.q.len()),
            ));
        }
        for (i, row) in cfg.q.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(
                    format!("Q[{i}]"),
                    format!("expected {n} entries, got {}", row.len()),
                ));
            }
        }
        let rates = DMatrix::from_fn(n, n, |i, j| T::lit(cfg.q[i][j]));
        let motion = SpatialGenerator::new(rates)?;
        let branching = BranchingData {
            rate: v(&cfg.beta),
            linear: v(&cfg.a),
            quadratic: v(&cfg.b),
            jumps: cfg
                .jumps
                .iter()
                .map(|atoms| {
                    atoms
                        .iter()
                        .map(|a| JumpAtom {
                            y: T::lit(a.y),
                            w: T::lit(a.w),
                        })
                        .collect()
                })
                .collect(),
        };
        Self::new(space, motion, branching)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_config(&cfg)
    }
}

/// On-disk model description.
///
/// ```json
/// {
///   "states": ["A", "B"],
///   "m": [1.0, 1.0],
///   "Q": [[-1.0, 1.0], [1.0, -1.0]],
///   "beta": [1.0, 1.0],
///   "a": [0.0, 0.0],
///   "b": [1.0, 1.0],
///   "jumps": [[], [{"y": 0.5, "w": 2.0}]]
/// }
/// ```
///
/// Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub states: Vec<String>,
    pub m: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub jumps: Vec<Vec<JumpAtom<f64>>>,
}

/// Parses and validates a JSON model description.
pub fn load_model(config_text: &str) -> Result<SuperprocessModel<f64>> {
    SuperprocessModel::from_json(config_text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSubmarkovReport<T: Scalar> {
    pub satisfied: bool,
    /// Column sums of `diag(m) Q` are all `<= 0`; implies `satisfied`.
    pub static_satisfied: bool,
    /// Largest `Σ_x m(x) p(t, x, y) - 1` seen on the grid.
    pub worst_excess: T,
    pub worst_time: T,
    pub worst_state: usize,
}

/// Checks `Σ_x m(x) p(t, x, y) <= 1 + TOL_DUAL` for every grid time and state,
/// where `p(t, x, y) = exp(tQ)[x, y] / m(y)`.
///
/// Takes the raw parts so reducible generators can be checked too.
pub fn check_dual_submarkov<T: Scalar>(
    space: &StateSpace<T>,
    motion: &SpatialGenerator<T>,
    t_grid: &[T],
) -> Result<DualSubmarkovReport<T>> {
    if t_grid.is_empty() {
        return Err(Error::arg("t_grid must be nonempty"));
    }
    if let Some(t) = t_grid.iter().find(|&&t| !(t > T::zero())) {
        return Err(Error::arg(format!("grid times must be > 0, got {}", t.to_f64())));
    }
    let n = space.len();
    let m = space.weights();
    let q = motion.rates();
    let slack = T::tol(1e-14);
    let static_satisfied = (0..n).all(|y| {
        let col: T = (0..n).fold(T::zero(), |s, x| s + m[x] * q[(x, y)]);
        let scale: T = (0..n).fold(T::zero(), |s, x| s + (m[x] * q[(x, y)]).abs());
        col <= slack * scale
    });

    let mut worst_excess = -T::infinity();
    let mut worst_time = t_grid[0];
    let mut worst_state = 0;
    for &t in t_grid {
        let p = expm(&(q * t));
        for y in 0..n {
            // Σ_x m(x) exp(tQ)[x, y] / m(y)
            let mass = (0..n).fold(T::zero(), |s, x| s + m[x] * p[(x, y)]) / m[y];
            let excess = mass - T::one();
            if excess > worst_excess {
                worst_excess = excess;
                worst_time = t;
                worst_state = y;
            }
        }
    }
    Ok(DualSubmarkovReport {
        satisfied: worst_excess <= T::tol(TOL_DUAL),
        static_satisfied,
        worst_excess,
        worst_time,
        worst_state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreyReport<T: Scalar> {
    pub satisfied: bool,
    /// `min_x β(x) b(x)`.
    pub b_tilde: T,
    pub k_bound: T,
}

impl<T: Scalar> GreyReport<T> {
    /// `Ψ̃(z) = -Kz + b̃z²`.
    pub fn dominating_mechanism(&self, z: T) -> T {
        -self.k_bound * z + self.b_tilde * z * z
    }
}

//! Functions on E versus finite measures on E.
//!
//! Both are `|E|`-vectors, but they pair differently: a function is
//! integrated against a measure with `⟨f, μ⟩ = Σ f(x) μ(x)`, while two
//! functions are paired through the reference weights, `⟨f, g⟩_m =
//! Σ f(x) g(x) m(x)`. Keeping them as distinct types stops one from being
//! passed where the other is meant.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A real function on the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector<T: Scalar>(pub DVector<T>);

/// A finite (nonnegative) measure on the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureVector<T: Scalar>(DVector<T>);

impl<T: Scalar> FieldVector<T> {
    pub fn new(values: DVector<T>) -> Self {
        FieldVector(values)
    }

    pub fn from_slice(values: &[T]) -> Self {
        FieldVector(DVector::from_column_slice(values))
    }

    pub fn constant(n: usize, value: T) -> Self {
        FieldVector(DVector::from_element(n, value))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<T> {
        &self.0
    }

    /// `⟨f, μ⟩`.
    pub fn pair(&self, mu: &MeasureVector<T>) -> T {
        self.0.dot(&mu.0)
    }

    /// `⟨f, g⟩_m` for reference weights `m`.
    pub fn inner_m(&self, other: &FieldVector<T>, m: &DVector<T>) -> T {
        self.0
            .iter()
            .zip(other.0.iter())
            .zip(m.iter())
            .fold(T::zero(), |acc, ((&f, &g), &w)| acc + f * g * w)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= T::zero())
    }

    pub fn abs(&self) -> Self {
        FieldVector(self.0.map(|v| v.abs()))
    }

    pub fn scaled(&self, s: T) -> Self {
        FieldVector(&self.0 * s)
    }
}

impl<T: Scalar> MeasureVector<T> {
    /// Rejects negative or non-finite entries.
    pub fn new(values: DVector<T>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(v >= T::zero()) || !v.is_finite_value() {
                return Err(Error::validation(
                    format!("mu[{i}]"),
                    "measure entries must be finite and >= 0",
                ));
            }
        }
        Ok(MeasureVector(values))
    }

    pub fn from_slice(values: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    /// Point mass `weight · δ_state`.
    pub fn dirac(n: usize, state: usize, weight: T) -> Self {
        let mut v = DVector::zeros(n);
        v[state] = weight;
        MeasureVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<T> {
        &self.0
    }

    pub fn total_mass(&self) -> T {
        self.0.sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == T::zero())
    }
}

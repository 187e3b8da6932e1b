//! Composite Simpson quadrature.

use crate::scalar::Scalar;

/// Composite Simpson rule over equally spaced samples `values[0..=N]`
/// (`N` even) with spacing `h`.
pub fn simpson<T: Scalar>(values: &[T], h: T) -> T {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even number of intervals");
    let mut odd = T::zero();
    let mut even = T::zero();
    for (k, &v) in values.iter().enumerate().take(n).skip(1) {
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / T::lit(3.0) * (values[0] + values[n] + T::lit(4.0) * odd + T::lit(2.0) * even)
}

/// Pairwise summation; order-independent up to the fixed split.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.25;
        let vals: Vec<f64> = (0..=8).map(|k| {
            let x = k as f64 * h;
            x * x * x - 2.0 * x + 1.0
        }).collect();
        // ∫_0^2 (x³ - 2x + 1) dx = 4 - 4 + 2
        assert!((simpson(&vals, h) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), 0.5 * 999.0 * 1000.0 / 2.0);
    }
}

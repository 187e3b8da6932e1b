//! Dense helpers: matrix exponential and norms.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

// Padé(13) numerator coefficients b_0..b_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the unscaled Padé(13) approximant is accurate
// to double precision.
const THETA13: f64 = 5.371920351148152;

/// Maximum absolute row sum.
pub fn norm_inf<T: Scalar>(a: &DMatrix<T>) -> T {
    a.row_iter()
        .map(|r| r.iter().fold(T::zero(), |s, &v| s + v.abs()))
        .fold(T::zero(), |m, v| if v > m { v } else { m })
}

/// Maximum absolute column sum.
pub fn norm_one<T: Scalar>(a: &DMatrix<T>) -> T {
    a.column_iter()
        .map(|c| c.iter().fold(T::zero(), |s, &v| s + v.abs()))
        .fold(T::zero(), |m, v| if v > m { v } else { m })
}

/// `exp(A)` by scaling and squaring with a degree-13 Padé approximant.
pub fn expm<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].exp());
    }

    let norm = norm_one(a).to_f64();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a * T::lit(0.5f64.powi(squarings as i32));

    let b = |k: usize| T::lit(PADE13[k]);
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &ident * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &ident * b(0);

    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");

    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[1.0, -2.0, 0.5]));
        let e = expm(&a);
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert!((e[(2, 2)] - 0.5f64.exp()).abs() < 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn two_state_heat_kernel() {
        // Q = [[-1, 1], [1, -1]]: exp(tQ) = ½[[1+e^{-2t}, 1-e^{-2t}], ...]
        for &t in &[0.1, 1.0, 30.0] {
            let q = DMatrix::<f64>::from_row_slice(2, 2, &[-t, t, t, -t]);
            let e = expm(&q);
            let d = (-2.0 * t).exp();
            assert!((e[(0, 0)] - 0.5 * (1.0 + d)).abs() < 1e-14);
            assert!((e[(0, 1)] - 0.5 * (1.0 - d)).abs() < 1e-14);
        }
    }

    #[test]
    fn nilpotent_jordan_block() {
        // exp([[0, 1], [0, 0]]) = [[1, 1], [0, 1]]
        let a = DMatrix::<f64>::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((e[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn large_norm_scales_and_squares() {
        let a = DMatrix::<f64>::from_row_slice(2, 2, &[-50.0, 20.0, 10.0, -30.0]);
        let e = expm(&a);
        let half = expm(&(&a * 0.5));
        let sq = &half * &half;
        for (x, y) in e.iter().zip(sq.iter()) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }
}

use nalgebra::RealField;

/// Real scalar type the numerical core is written against.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in `f64` terms are
/// passed through [`Scalar::tol`], which floors them at a small multiple of
/// the type's machine epsilon so `f32` instantiations stay meaningful.
pub trait Scalar: RealField + Copy + Send + Sync + 'static {
    /// Machine epsilon.
    fn epsilon() -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn to_f64(self) -> f64 {
        nalgebra::try_convert(self).unwrap_or(f64::NAN)
    }

    /// An `f64` tolerance, floored at `64 * epsilon`.
    #[inline]
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        let t = Self::lit(x);
        if t > floor {
            t
        } else {
            floor
        }
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Scalar for f64 {
    #[inline]
    fn epsilon() -> Self {
        f64::EPSILON
    }

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn epsilon() -> Self {
        f32::EPSILON
    }

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

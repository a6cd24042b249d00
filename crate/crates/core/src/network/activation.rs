use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hidden-layer nonlinearity.
///
/// `Polynomial { b, a }` evaluates `b*x + a*x^2`; pure `x^2` is
/// `Polynomial { b: 0, a: 1 }`. The odd kinds (`Cubic`, `SignedSquare`)
/// and the even `AbsCubic` cover the rest of the activation family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationSpec {
    Polynomial { b: f64, a: f64 },
    /// `x^3`
    Cubic,
    /// `|x^3|`
    AbsCubic,
    /// `x^2 * sign(x)`
    SignedSquare,
}

impl ActivationSpec {
    /// Pure `x^2`, the baseline grokking activation.
    pub fn square() -> Self {
        ActivationSpec::Polynomial { b: 0.0, a: 1.0 }
    }

    /// `x + a*x^2`.
    pub fn linear_plus_square(a: f64) -> Self {
        ActivationSpec::Polynomial { b: 1.0, a }
    }

    pub fn validate(&self) -> Result<()> {
        if let ActivationSpec::Polynomial { b, a } = self {
            if !b.is_finite() || !a.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "polynomial coefficients must be finite, got b={b}, a={a}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationSpec::Polynomial { b, a } => b * x + a * x * x,
            ActivationSpec::Cubic => x * x * x,
            ActivationSpec::AbsCubic => (x * x * x).abs(),
            // x^2 * sign(x) == x * |x|
            ActivationSpec::SignedSquare => x * x.abs(),
        }
    }

    /// Pointwise derivative used by backprop.
    ///
    /// `AbsCubic` has derivative `3x^2 * sign(x)` (subgradient 0 at the
    /// origin); `SignedSquare` has derivative `2|x|` everywhere.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ActivationSpec::Polynomial { b, a } => b + 2.0 * a * x,
            ActivationSpec::Cubic => 3.0 * x * x,
            // 3x^2 * sign(x) == 3x * |x|
            ActivationSpec::AbsCubic => 3.0 * x * x.abs(),
            ActivationSpec::SignedSquare => 2.0 * x.abs(),
        }
    }

    /// True when the function is even (`f(-x) == f(x)`), the regime where
    /// grokking occurs.
    pub fn is_even(&self) -> bool {
        match *self {
            ActivationSpec::Polynomial { b, .. } => b == 0.0,
            ActivationSpec::AbsCubic => true,
            ActivationSpec::Cubic | ActivationSpec::SignedSquare => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pointwise_values() {
        assert_eq!(ActivationSpec::Polynomial { b: 1.0, a: 2.0 }.apply(1.0), 3.0);
        assert_eq!(ActivationSpec::SignedSquare.apply(-2.0), -4.0);
        assert_eq!(ActivationSpec::AbsCubic.apply(-2.0), 8.0);
        assert_eq!(ActivationSpec::Cubic.apply(-2.0), -8.0);
        assert_eq!(ActivationSpec::square().apply(-3.0), 9.0);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        let specs = [
            ActivationSpec::Polynomial { b: 0.7, a: -1.3 },
            ActivationSpec::Cubic,
            ActivationSpec::AbsCubic,
            ActivationSpec::SignedSquare,
        ];
        for spec in specs {
            for &x in &[-2.5, -1.0, -0.3, 0.4, 1.7, 3.0] {
                let fd = (spec.apply(x + h) - spec.apply(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(spec.derivative(x), fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn abs_cubic_subgradient_at_origin_is_zero() {
        assert_eq!(ActivationSpec::AbsCubic.derivative(0.0), 0.0);
    }

    #[test]
    fn evenness_classification() {
        assert!(ActivationSpec::square().is_even());
        assert!(ActivationSpec::AbsCubic.is_even());
        assert!(!ActivationSpec::linear_plus_square(0.5).is_even());
        assert!(!ActivationSpec::Cubic.is_even());
        assert!(!ActivationSpec::SignedSquare.is_even());
    }
}

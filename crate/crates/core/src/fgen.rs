//! Monotone functions `f` that turn a sum of divergences into an
//! f-separable distortion measure.
//!
//! Two parametric families are provided besides the identity:
//!
//! | family      | `f(z)`                              | `f'(z)`           |
//! |-------------|-------------------------------------|-------------------|
//! | power mean  | `((z + a)^β − 1) / β`, `ln(z + a)` at β = 0 | `(z + a)^(β−1)` |
//! | log-sum-exp | `(exp((β−1) z) − 1) / (β − 1)`, `z` at β = 1 | `exp((β−1) z)` |
//!
//! Both are concave for `β < 1`, linear at `β = 1` and convex above.
//! The f-mean `f⁻¹((1/n) Σ f(z_i))` interpolates between robust location
//! (small β), the arithmetic mean (β = 1) and the maximum (β → ∞).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FError {
    #[error("f is not defined at z = {z} for this parameterization")]
    Domain { z: f64 },

    #[error("f' is infinite at z = 0 (power mean with a = 0 and beta < 1)")]
    InfiniteWeight,

    #[error("{y} is outside the range of f")]
    Range { y: f64 },

    #[error("empty input")]
    Empty,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Linear,
    Concave,
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FSpec {
    Linear,
    PowerMean { beta: f64, a: f64 },
    LogSumExp { beta: f64 },
}

/// `ln((1/n) Σ exp(v_i))` with max shifting.
pub(crate) fn log_mean_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + (v - m).exp(), n + 1));
    m + (sum / n as f64).ln()
}

/// Maps a β* chosen for the summed divergence to the β that gives the same
/// relative weighting on a dimension-averaged divergence: `(β* − 1) / L + 1`.
pub fn effective_beta(beta_star: f64, dims: usize) -> f64 {
    (beta_star - 1.0) / dims as f64 + 1.0
}

impl FSpec {
    pub fn power_mean(beta: f64, a: f64) -> Self {
        FSpec::PowerMean { beta, a }
    }

    pub fn log_sum_exp(beta: f64) -> Self {
        FSpec::LogSumExp { beta }
    }

    pub fn validate(&self) -> Result<(), FError> {
        match *self {
            FSpec::Linear => Ok(()),
            FSpec::PowerMean { beta, a } => {
                if !beta.is_finite() {
                    return Err(FError::InvalidParameter(format!("beta = {beta}")));
                }
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(FError::InvalidParameter(format!("a must be >= 0, got {a}")));
                }
                Ok(())
            }
            FSpec::LogSumExp { beta } if !beta.is_finite() => {
                Err(FError::InvalidParameter(format!("beta = {beta}")))
            }
            FSpec::LogSumExp { .. } => Ok(()),
        }
    }

    pub fn shape(&self) -> Shape {
        let beta = match *self {
            FSpec::Linear => return Shape::Linear,
            FSpec::PowerMean { beta, .. } | FSpec::LogSumExp { beta } => beta,
        };
        if beta < 1.0 {
            Shape::Concave
        } else if beta == 1.0 {
            Shape::Linear
        } else {
            Shape::Convex
        }
    }

    /// True when `f'(z) → ∞` as `z → 0`, so a center sitting on a data
    /// point can never move under the weighted update.
    pub fn infinite_slope_at_zero(&self) -> bool {
        matches!(*self, FSpec::PowerMean { beta, a } if a == 0.0 && beta < 1.0)
    }

    /// True when `f'(z) → 0` as `z → ∞`.
    pub fn slope_vanishes(&self) -> bool {
        match *self {
            FSpec::Linear => false,
            FSpec::PowerMean { beta, .. } | FSpec::LogSumExp { beta } => beta < 1.0,
        }
    }

    fn check_z(z: f64) -> Result<(), FError> {
        if z >= 0.0 {
            Ok(())
        } else {
            Err(FError::Domain { z })
        }
    }

    pub fn eval(&self, z: f64) -> Result<f64, FError> {
        Self::check_z(z)?;
        Ok(match *self {
            FSpec::Linear => z,
            FSpec::PowerMean { beta, a } => {
                let u = z + a;
                if u == 0.0 {
                    if beta <= 0.0 {
                        return Err(FError::Domain { z });
                    }
                    -1.0 / beta
                } else if beta == 0.0 {
                    u.ln()
                } else {
                    (beta * u.ln()).exp_m1() / beta
                }
            }
            FSpec::LogSumExp { beta } => {
                if beta == 1.0 {
                    z
                } else {
                    let t = beta - 1.0;
                    (t * z).exp_m1() / t
                }
            }
        })
    }

    /// `f(z)` extended to `−∞` at the pole `z + a = 0` of the power mean with β ≤ 0.
    pub(crate) fn eval_extended(&self, z: f64) -> Result<f64, FError> {
        match self.eval(z) {
            Err(FError::Domain { .. }) if z == 0.0 => Ok(f64::NEG_INFINITY),
            other => other,
        }
    }

    pub fn prime(&self, z: f64) -> Result<f64, FError> {
        Self::check_z(z)?;
        Ok(match *self {
            FSpec::Linear => 1.0,
            FSpec::PowerMean { beta, a } => {
                let u = z + a;
                if u == 0.0 {
                    if beta < 1.0 {
                        return Err(FError::InfiniteWeight);
                    }
                    if beta == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    ((beta - 1.0) * u.ln()).exp()
                }
            }
            FSpec::LogSumExp { beta } => ((beta - 1.0) * z).exp(),
        })
    }

    pub fn second(&self, z: f64) -> Result<f64, FError> {
        Self::check_z(z)?;
        Ok(match *self {
            FSpec::Linear => 0.0,
            FSpec::PowerMean { beta, a } => {
                let u = z + a;
                if beta == 1.0 {
                    0.0
                } else if u == 0.0 {
                    if beta < 2.0 {
                        return Err(FError::InfiniteWeight);
                    }
                    if beta == 2.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (beta - 1.0) * ((beta - 2.0) * u.ln()).exp()
                }
            }
            FSpec::LogSumExp { beta } => (beta - 1.0) * ((beta - 1.0) * z).exp(),
        })
    }

    /// `ln f'(z)`; weights are formed from differences of this quantity so
    /// that very large or very small `f'` never overflow.
    pub fn ln_prime(&self, z: f64) -> Result<f64, FError> {
        Self::check_z(z)?;
        Ok(match *self {
            FSpec::Linear => 0.0,
            FSpec::PowerMean { beta, a } => {
                let u = z + a;
                if u == 0.0 && beta < 1.0 {
                    return Err(FError::InfiniteWeight);
                }
                if beta == 1.0 {
                    0.0
                } else {
                    (beta - 1.0) * u.ln()
                }
            }
            FSpec::LogSumExp { beta } => (beta - 1.0) * z,
        })
    }

    /// `f''(z) / f'(z)`.
    pub fn curvature_ratio(&self, z: f64) -> f64 {
        match *self {
            FSpec::Linear => 0.0,
            FSpec::PowerMean { beta, .. } if beta == 1.0 => 0.0,
            FSpec::PowerMean { beta, a } => (beta - 1.0) / (z + a),
            FSpec::LogSumExp { beta } => beta - 1.0,
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64, FError> {
        if y.is_nan() {
            return Err(FError::Range { y });
        }
        let z = match *self {
            FSpec::Linear => y,
            FSpec::PowerMean { beta, a } => {
                let u = if beta == 0.0 {
                    y.exp()
                } else {
                    ((beta * y).ln_1p() / beta).exp()
                };
                u - a
            }
            FSpec::LogSumExp { beta } => {
                if beta == 1.0 {
                    y
                } else {
                    let t = beta - 1.0;
                    (t * y).ln_1p() / t
                }
            }
        };
        let tol = 1e-12 * (1.0 + y.abs());
        if !z.is_finite() || z < -tol {
            return Err(FError::Range { y });
        }
        Ok(z.max(0.0))
    }

    /// The f-mean `f⁻¹((1/n) Σ f(z_i))`, computed in the log domain for the
    /// parametric families so that large `|β|` does not overflow.
    pub fn mean(&self, values: &[f64]) -> Result<f64, FError> {
        if values.is_empty() {
            return Err(FError::Empty);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &z in values {
            Self::check_z(z)?;
            lo = lo.min(z);
            hi = hi.max(z);
        }
        let n = values.len() as f64;
        let m = match *self {
            FSpec::Linear => values.iter().sum::<f64>() / n,
            FSpec::LogSumExp { beta } if beta == 1.0 => values.iter().sum::<f64>() / n,
            FSpec::LogSumExp { beta } => {
                let t = beta - 1.0;
                log_mean_exp(values.iter().map(|&z| t * z)) / t
            }
            FSpec::PowerMean { beta, a } => {
                if beta <= 0.0 && values.iter().any(|&z| z + a == 0.0) {
                    return Err(FError::Domain { z: 0.0 });
                }
                if beta == 0.0 {
                    (values.iter().map(|&z| (z + a).ln()).sum::<f64>() / n).exp() - a
                } else {
                    (log_mean_exp(values.iter().map(|&z| beta * (z + a).ln())) / beta).exp() - a
                }
            }
        };
        Ok(m.clamp(lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn family() -> Vec<FSpec> {
        let mut v = vec![FSpec::Linear];
        for &beta in &[-2.0, -1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
            v.push(FSpec::power_mean(beta, 0.0));
            v.push(FSpec::power_mean(beta, 1.0));
            v.push(FSpec::log_sum_exp(beta));
        }
        v
    }

    #[test]
    fn table_values() {
        assert_eq!(FSpec::power_mean(1.0, 0.0).eval(1.0).unwrap(), 0.0);
        assert_eq!(FSpec::power_mean(0.0, 1.0).eval(0.0).unwrap(), 0.0);
        assert_eq!(FSpec::log_sum_exp(1.0).eval(7.0).unwrap(), 7.0);
        assert_relative_eq!(FSpec::power_mean(1.0, 0.5).eval(2.0).unwrap(), 1.5);
    }

    #[test]
    fn derivative_values() {
        assert_relative_eq!(FSpec::power_mean(0.5, 0.0).prime(4.0).unwrap(), 0.5);
        assert_eq!(FSpec::log_sum_exp(2.0).prime(0.0).unwrap(), 1.0);
        assert_eq!(FSpec::Linear.prime(123.0).unwrap(), 1.0);
        assert_eq!(FSpec::power_mean(0.5, 0.0).prime(0.0), Err(FError::InfiniteWeight));
        assert!(FSpec::power_mean(0.5, 0.1).prime(0.0).unwrap().is_finite());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(FSpec::power_mean(0.0, 0.0).eval(0.0), Err(FError::Domain { .. })));
        assert!(matches!(FSpec::power_mean(-1.0, 0.0).eval(0.0), Err(FError::Domain { .. })));
        assert_relative_eq!(FSpec::power_mean(0.5, 0.0).eval(0.0).unwrap(), -2.0);
        assert!(matches!(FSpec::Linear.eval(-1.0), Err(FError::Domain { .. })));
        assert_eq!(
            FSpec::power_mean(0.0, 0.0).eval_extended(0.0).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn inverse_examples_and_range() {
        assert_relative_eq!(FSpec::power_mean(1.0, 0.0).inverse(0.0).unwrap(), 1.0);
        assert_eq!(FSpec::log_sum_exp(1.0).inverse(3.0).unwrap(), 3.0);
        // power mean β = −1 is bounded above by 1 (a = 0 gives f(z) = 1 − 1/z)
        assert!(matches!(FSpec::power_mean(-1.0, 0.0).inverse(1.0), Err(FError::Range { .. })));
        // log-sum-exp with β < 1 is bounded above by 1/(1−β)
        assert!(FSpec::log_sum_exp(0.0).inverse(1.5).is_err());
        // below f(0)
        assert!(FSpec::power_mean(2.0, 0.0).inverse(-1.0).is_err());
        assert!(FSpec::Linear.inverse(-0.1).is_err());
    }

    #[test]
    fn mean_examples() {
        assert_eq!(FSpec::Linear.mean(&[1.0, 4.0]).unwrap(), 2.5);
        let m = FSpec::power_mean(200.0, 0.0).mean(&[1.0, 4.0]).unwrap();
        assert!((m - 4.0).abs() / 4.0 < 0.01, "{m}");
        assert_relative_eq!(FSpec::power_mean(0.0, 0.0).mean(&[1.0, 4.0]).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(FSpec::log_sum_exp(1.0).mean(&[1.0, 4.0]).unwrap(), 2.5);
        assert_eq!(FSpec::Linear.mean(&[]), Err(FError::Empty));
        // no overflow far from β = 1
        let big = FSpec::log_sum_exp(50.0).mean(&[100.0, 10.0]).unwrap();
        assert!(big.is_finite() && big <= 100.0 && big > 99.0);
    }

    #[test]
    fn effective_beta_values() {
        assert_eq!(effective_beta(5.0, 8), 1.5);
        assert_eq!(effective_beta(1.0, 13), 1.0);
        assert_eq!(effective_beta(-3.0, 4), 0.0);
    }

    #[test]
    fn shapes() {
        assert_eq!(FSpec::Linear.shape(), Shape::Linear);
        assert_eq!(FSpec::power_mean(1.0, 2.0).shape(), Shape::Linear);
        assert_eq!(FSpec::power_mean(0.999, 0.0).shape(), Shape::Concave);
        assert_eq!(FSpec::power_mean(1.5, 0.0).shape(), Shape::Convex);
        assert_eq!(FSpec::log_sum_exp(-2.0).shape(), Shape::Concave);
        assert_eq!(FSpec::log_sum_exp(2.0).shape(), Shape::Convex);
    }

    #[test]
    fn second_differences_follow_shape() {
        let h = 1e-2;
        for f in family() {
            for i in 1..200 {
                let z = 0.05 * i as f64;
                let dd = f.eval(z + h).unwrap() - 2.0 * f.eval(z).unwrap() + f.eval(z - h).unwrap();
                let scale = f.prime(z).unwrap() * h * h * 1e-6;
                match f.shape() {
                    Shape::Linear => assert!(dd.abs() <= 1e-9 * (1.0 + f.eval(z).unwrap().abs())),
                    Shape::Concave => assert!(dd < scale, "{f:?} z={z} dd={dd}"),
                    Shape::Convex => assert!(dd > -scale, "{f:?} z={z} dd={dd}"),
                }
            }
        }
    }

    #[test]
    fn monotone_on_sorted_grids() {
        for f in family() {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..400 {
                let z = 0.0125 * i as f64;
                let v = f.eval(z).unwrap();
                assert!(v > prev, "{f:?} at {z}");
                prev = v;
            }
        }
    }

    #[test]
    fn limits_are_continuous() {
        for &z in &[0.1, 1.0, 3.0, 10.0] {
            let ln = FSpec::power_mean(0.0, 0.5).eval(z).unwrap();
            for b in [1e-6, -1e-6] {
                let v = FSpec::power_mean(b, 0.5).eval(z).unwrap();
                assert!((v - ln).abs() <= 1e-4 * ln.abs().max(1e-12), "{b} {z}");
            }
            for b in [1.0 + 1e-6, 1.0 - 1e-6] {
                let v = FSpec::log_sum_exp(b).eval(z).unwrap();
                assert!((v - z).abs() <= 1e-4 * z);
            }
        }
    }

    #[test]
    fn ln_prime_and_ratio_agree_with_derivatives() {
        for f in family() {
            for &z in &[0.3, 1.0, 2.5] {
                assert_relative_eq!(f.ln_prime(z).unwrap().exp(), f.prime(z).unwrap(), max_relative = 1e-12);
                assert_relative_eq!(
                    f.curvature_ratio(z) * f.prime(z).unwrap(),
                    f.second(z).unwrap(),
                    max_relative = 1e-12,
                    epsilon = 1e-300
                );
            }
        }
    }

    proptest! {
        #[test]
        fn inverse_round_trip(z in 0.0f64..20.0, idx in 0usize..34) {
            let f = family()[idx];
            let y = f.eval(z).unwrap_or(f64::NEG_INFINITY);
            prop_assume!(y.is_finite());
            // a bounded f flattens out; once f' is below rounding of y the
            // value saturates at its supremum and has no inverse
            prop_assume!(f.prime(z).map_or(true, |p| p > 1e-12));
            let back = f.inverse(y).unwrap();
            let y2 = f.eval(back).unwrap();
            prop_assert!((y2 - y).abs() <= 1e-10 * y.abs().max(1.0), "{:?} z={} y={} y2={}", f, z, y, y2);
        }

        #[test]
        fn mean_is_bounded_by_extremes(values in prop::collection::vec(0.01f64..50.0, 1..20), idx in 0usize..34) {
            let f = family()[idx];
            let m = f.mean(&values).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo && m <= hi);
        }
    }
}

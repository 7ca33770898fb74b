//! Bregman divergences built from dimension-additive convex generators.
//!
//! A [`Divergence`] evaluates `d(x, θ) = Σ_l [φ(x_l) − φ(θ_l) − (x_l − θ_l) φ'(θ_l)]`
//! for one of the scalar generators in [`Generator`], optionally wrapped as a
//! total Bregman divergence
//!
//! ```text
//! tBD(x, θ) = d(θ, x) / sqrt(1 + c² ‖∇φ(x)‖²)
//! ```
//!
//! and optionally averaged over the `L` coordinates. Gradients and Hessians
//! are taken with respect to the second argument `θ` (the cluster center);
//! the Hessian is always diagonal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parameters closer than this to the boundary of the generator domain are rejected.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty vector")]
    Empty,

    #[error("coordinate {index} = {value} is outside the domain of the {generator} generator")]
    Domain {
        generator: &'static str,
        index: usize,
        value: f64,
    },

    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

/// Scalar convex generator `φ`, applied coordinate-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    /// `φ(x) = x²`, giving `(x − θ)²`.
    SquaredDistance,
    /// The α-divergence family (Itakura-Saito at 0, generalized KL at 1,
    /// half squared distance at 2).
    Alpha(f64),
    /// `φ(x) = exp(x)`.
    ExpLoss,
    /// Binomial loss with `N` trials; data in `[0, N]`, parameters in `(0, N)`.
    Binomial(u32),
}

fn powr(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// `x ln(x / y)` with the convention `0 ln 0 = 0`.
fn xlogxy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::SquaredDistance => "squared-distance",
            Generator::Alpha(a) if *a == 0.0 => "itakura-saito",
            Generator::Alpha(a) if *a == 1.0 => "generalized-kl",
            Generator::Alpha(_) => "alpha",
            Generator::ExpLoss => "exp-loss",
            Generator::Binomial(_) => "binomial",
        }
    }

    pub fn validate(&self) -> Result<(), DivergenceError> {
        match *self {
            Generator::Alpha(a) if !a.is_finite() => Err(DivergenceError::InvalidParameter(
                format!("alpha must be finite, got {a}"),
            )),
            Generator::Binomial(0) => Err(DivergenceError::InvalidParameter(
                "binomial N must be positive".into(),
            )),
            _ => Ok(()),
        }
    }

    /// True when the generator is defined on the whole real line.
    pub fn real_domain(&self) -> bool {
        match *self {
            Generator::SquaredDistance | Generator::ExpLoss => true,
            Generator::Alpha(a) => a > 0.0 && a.fract() == 0.0 && (a as i64) % 2 == 0,
            Generator::Binomial(_) => false,
        }
    }

    /// Domain check for a data value (first argument of a Bregman divergence).
    pub fn contains_data(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match *self {
            Generator::Binomial(n) => (0.0..=n as f64).contains(&x),
            _ if self.real_domain() => true,
            _ => x > 0.0,
        }
    }

    /// Domain check for a parameter value: interior, at least
    /// [`BOUNDARY_MARGIN`] away from any boundary.
    pub fn contains_param(&self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match *self {
            Generator::Binomial(n) => theta > BOUNDARY_MARGIN && theta < n as f64 - BOUNDARY_MARGIN,
            _ if self.real_domain() => true,
            _ => theta > BOUNDARY_MARGIN,
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        match *self {
            Generator::SquaredDistance => x * x,
            Generator::Alpha(a) if a == 0.0 => -x.ln() + x - 1.0,
            Generator::Alpha(a) if a == 1.0 => xlogxy(x, 1.0) - x + 1.0,
            Generator::Alpha(a) => powr(x, a) / (a * (a - 1.0)) - x / (a - 1.0) + 1.0 / a,
            Generator::ExpLoss => x.exp(),
            Generator::Binomial(n) => {
                let n = n as f64;
                xlogxy(x, 1.0) + xlogxy(n - x, 1.0)
            }
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        match *self {
            Generator::SquaredDistance => 2.0 * x,
            Generator::Alpha(a) if a == 0.0 => 1.0 - 1.0 / x,
            Generator::Alpha(a) if a == 1.0 => x.ln(),
            Generator::Alpha(a) => (powr(x, a - 1.0) - 1.0) / (a - 1.0),
            Generator::ExpLoss => x.exp(),
            Generator::Binomial(n) => x.ln() - (n as f64 - x).ln(),
        }
    }

    pub fn d2phi(&self, x: f64) -> f64 {
        match *self {
            Generator::SquaredDistance => 2.0,
            Generator::Alpha(a) if a == 0.0 => 1.0 / (x * x),
            Generator::Alpha(a) if a == 1.0 => 1.0 / x,
            Generator::Alpha(a) => powr(x, a - 2.0),
            Generator::ExpLoss => x.exp(),
            Generator::Binomial(n) => 1.0 / x + 1.0 / (n as f64 - x),
        }
    }

    pub fn d3phi(&self, x: f64) -> f64 {
        match *self {
            Generator::SquaredDistance => 0.0,
            Generator::Alpha(a) if a == 0.0 => -2.0 / (x * x * x),
            Generator::Alpha(a) if a == 1.0 => -1.0 / (x * x),
            Generator::Alpha(a) if a == 2.0 => 0.0,
            Generator::Alpha(a) => (a - 2.0) * powr(x, a - 3.0),
            Generator::ExpLoss => x.exp(),
            Generator::Binomial(n) => {
                let m = n as f64 - x;
                -1.0 / (x * x) + 1.0 / (m * m)
            }
        }
    }

    /// Inverse of `φ'`, or `None` when `y` is outside the range of `φ'`.
    pub fn dphi_inverse(&self, y: f64) -> Option<f64> {
        if !y.is_finite() {
            return None;
        }
        let x = match *self {
            Generator::SquaredDistance => y / 2.0,
            Generator::Alpha(a) if a == 0.0 => {
                if y >= 1.0 {
                    return None;
                }
                1.0 / (1.0 - y)
            }
            Generator::Alpha(a) if a == 1.0 => y.exp(),
            Generator::Alpha(a) => {
                let base = 1.0 + (a - 1.0) * y;
                if self.real_domain() {
                    // a − 1 is odd here, so the real root keeps the sign
                    base.signum() * base.abs().powf(1.0 / (a - 1.0))
                } else {
                    if base <= 0.0 {
                        return None;
                    }
                    base.powf(1.0 / (a - 1.0))
                }
            }
            Generator::ExpLoss => {
                if y <= 0.0 {
                    return None;
                }
                y.ln()
            }
            Generator::Binomial(n) => n as f64 / (1.0 + (-y).exp()),
        };
        x.is_finite().then_some(x)
    }

    /// Scalar Bregman divergence `d(x, θ)` in closed form.
    pub fn scalar_divergence(&self, x: f64, theta: f64) -> f64 {
        let d = match *self {
            Generator::SquaredDistance => (x - theta) * (x - theta),
            Generator::Alpha(a) if a == 0.0 => {
                let r = x / theta;
                r - r.ln() - 1.0
            }
            Generator::Alpha(a) if a == 1.0 => xlogxy(x, theta) - (x - theta),
            Generator::Alpha(a) => {
                (powr(x, a) + (a - 1.0) * powr(theta, a) - a * x * powr(theta, a - 1.0))
                    / (a * (a - 1.0))
            }
            Generator::ExpLoss => {
                let t = x - theta;
                theta.exp() * (t.exp_m1() - t)
            }
            Generator::Binomial(n) => {
                let n = n as f64;
                xlogxy(x, theta) + xlogxy(n - x, n - theta)
            }
        };
        d.max(0.0)
    }
}

/// A pseudo-distance: Bregman divergence of a generator, optionally in its
/// total-Bregman form and optionally averaged over dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub generator: Generator,
    /// `Some(c)` selects the total Bregman divergence with parameter `c ≥ 0`.
    pub total_bregman: Option<f64>,
    pub dim_average: bool,
}

/// Value, gradient and Hessian diagonal of a divergence with respect to `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

impl Divergence {
    pub fn bregman(generator: Generator) -> Self {
        Self {
            generator,
            total_bregman: None,
            dim_average: false,
        }
    }

    pub fn squared_distance() -> Self {
        Self::bregman(Generator::SquaredDistance)
    }

    /// Wrap as total Bregman divergence with parameter `c`.
    pub fn total(mut self, c: f64) -> Self {
        self.total_bregman = Some(c);
        self
    }

    pub fn averaged(mut self) -> Self {
        self.dim_average = true;
        self
    }

    pub fn validate(&self) -> Result<(), DivergenceError> {
        self.generator.validate()?;
        if let Some(c) = self.total_bregman {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(DivergenceError::InvalidParameter(format!(
                    "total Bregman c must be a nonnegative finite number, got {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_total(&self) -> bool {
        self.total_bregman.is_some()
    }

    fn scale(&self, len: usize) -> f64 {
        if self.dim_average {
            1.0 / len as f64
        } else {
            1.0
        }
    }

    fn check_lengths(x: &[f64], theta: &[f64]) -> Result<(), DivergenceError> {
        if theta.is_empty() {
            return Err(DivergenceError::Empty);
        }
        if x.len() != theta.len() {
            return Err(DivergenceError::DimensionMismatch {
                expected: theta.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn domain_error(&self, index: usize, value: f64) -> DivergenceError {
        DivergenceError::Domain {
            generator: self.generator.name(),
            index,
            value,
        }
    }

    /// Checks that `v` can serve as a cluster center (or, for the total
    /// Bregman form, as either argument).
    pub fn check_param(&self, v: &[f64]) -> Result<(), DivergenceError> {
        match v.iter().position(|&t| !self.generator.contains_param(t)) {
            Some(i) => Err(self.domain_error(i, v[i])),
            None => Ok(()),
        }
    }

    /// Checks that `v` can appear as the data argument.
    pub fn check_data(&self, v: &[f64]) -> Result<(), DivergenceError> {
        if self.is_total() {
            return self.check_param(v);
        }
        match v.iter().position(|&t| !self.generator.contains_data(t)) {
            Some(i) => Err(self.domain_error(i, v[i])),
            None => Ok(()),
        }
    }

    fn check(&self, x: &[f64], theta: &[f64]) -> Result<(), DivergenceError> {
        Self::check_lengths(x, theta)?;
        self.check_data(x)?;
        self.check_param(theta)
    }

    /// `1 / sqrt(1 + c² ‖∇φ(x)‖²)`, or 1 for a plain Bregman divergence.
    pub fn total_factor(&self, x: &[f64]) -> f64 {
        match self.total_bregman {
            None => 1.0,
            Some(c) => {
                let g2: f64 = x.iter().map(|&v| self.generator.dphi(v).powi(2)).sum();
                1.0 / (1.0 + c * c * g2).sqrt()
            }
        }
    }

    pub fn grad_phi(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.generator.dphi(v)).collect()
    }

    /// Evaluates `d(x, θ)`.
    pub fn eval(&self, x: &[f64], theta: &[f64]) -> Result<f64, DivergenceError> {
        self.check(x, theta)?;
        Ok(self.eval_unchecked(x, theta))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let g = &self.generator;
        let raw = match self.total_bregman {
            None => x
                .iter()
                .zip(theta)
                .map(|(&xl, &tl)| g.scalar_divergence(xl, tl))
                .sum::<f64>(),
            Some(_) => {
                let num: f64 = x
                    .iter()
                    .zip(theta)
                    .map(|(&xl, &tl)| g.scalar_divergence(tl, xl))
                    .sum();
                num * self.total_factor(x)
            }
        };
        raw * self.scale(x.len())
    }

    /// Gradient of `d(x, θ)` with respect to `θ`.
    pub fn grad_theta(&self, x: &[f64], theta: &[f64]) -> Result<Vec<f64>, DivergenceError> {
        Ok(self.derivatives(x, theta)?.grad)
    }

    /// Diagonal of the Hessian of `d(x, θ)` with respect to `θ`.
    pub fn hess_theta(&self, x: &[f64], theta: &[f64]) -> Result<Vec<f64>, DivergenceError> {
        Ok(self.derivatives(x, theta)?.hess_diag)
    }

    pub fn derivatives(&self, x: &[f64], theta: &[f64]) -> Result<Derivatives, DivergenceError> {
        self.check(x, theta)?;
        Ok(self.derivatives_unchecked(x, theta))
    }

    pub(crate) fn derivatives_unchecked(&self, x: &[f64], theta: &[f64]) -> Derivatives {
        let g = &self.generator;
        let s = self.scale(x.len());
        let value = self.eval_unchecked(x, theta);
        let (grad, hess_diag) = match self.total_bregman {
            None => x
                .iter()
                .zip(theta)
                .map(|(&xl, &tl)| {
                    let diff = xl - tl;
                    let h2 = g.d2phi(tl);
                    (-h2 * diff * s, (h2 - g.d3phi(tl) * diff) * s)
                })
                .unzip(),
            Some(_) => {
                let w = self.total_factor(x) * s;
                x.iter()
                    .zip(theta)
                    .map(|(&xl, &tl)| ((g.dphi(tl) - g.dphi(xl)) * w, g.d2phi(tl) * w))
                    .unzip()
            }
        };
        Derivatives {
            value,
            grad,
            hess_diag,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_generators() -> Vec<Generator> {
        vec![
            Generator::SquaredDistance,
            Generator::Alpha(0.0),
            Generator::Alpha(0.5),
            Generator::Alpha(1.0),
            Generator::Alpha(1.5),
            Generator::Alpha(2.0),
            Generator::Alpha(3.0),
            Generator::Alpha(4.0),
            Generator::ExpLoss,
            Generator::Binomial(100),
        ]
    }

    fn sample(g: Generator, rng: &mut ChaCha8Rng) -> f64 {
        match g {
            Generator::Binomial(n) => rng.random_range(0.05..0.95) * n as f64,
            Generator::ExpLoss => rng.random_range(-3.0..3.0),
            _ if g.real_domain() => rng.random_range(-5.0..5.0),
            _ => rng.random_range(0.2..5.0),
        }
    }

    #[test]
    fn closed_form_examples() {
        let sq = Divergence::squared_distance();
        assert_eq!(sq.eval(&[3.0], &[1.0]).unwrap(), 4.0);
        let a2 = Divergence::bregman(Generator::Alpha(2.0));
        assert_relative_eq!(a2.eval(&[3.0], &[1.0]).unwrap(), 2.0, epsilon = 1e-14);
        let is = Divergence::bregman(Generator::Alpha(0.0));
        assert_eq!(is.eval(&[1.0], &[1.0]).unwrap(), 0.0);
        let bin = Divergence::bregman(Generator::Binomial(100));
        assert_eq!(bin.eval(&[50.0], &[50.0]).unwrap(), 0.0);
    }

    #[test]
    fn gradient_and_hessian_examples() {
        let sq = Divergence::squared_distance();
        assert_eq!(sq.grad_theta(&[3.0], &[1.0]).unwrap(), vec![-4.0]);
        assert_eq!(sq.hess_theta(&[3.0, -2.0], &[1.0, 7.0]).unwrap(), vec![2.0, 2.0]);

        let kl = Divergence::bregman(Generator::Alpha(1.0));
        assert_relative_eq!(kl.grad_theta(&[2.0], &[1.0]).unwrap()[0], -1.0);
        assert_relative_eq!(kl.hess_theta(&[2.0], &[1.0]).unwrap()[0], 2.0);

        for g in all_generators() {
            let d = Divergence::bregman(g);
            let p = match g {
                Generator::Binomial(_) => vec![30.0, 60.0],
                _ => vec![1.5, 2.5],
            };
            assert!(d.grad_theta(&p, &p).unwrap().iter().all(|&v| v == 0.0), "{g:?}");
        }
    }

    #[test]
    fn domain_and_shape_errors() {
        let is = Divergence::bregman(Generator::Alpha(0.0));
        assert!(matches!(
            is.eval(&[-1.0], &[1.0]),
            Err(DivergenceError::Domain { index: 0, .. })
        ));
        assert!(matches!(is.eval(&[1.0], &[0.0]), Err(DivergenceError::Domain { .. })));
        assert!(matches!(is.eval(&[1.0], &[1e-13]), Err(DivergenceError::Domain { .. })));
        assert!(matches!(
            is.eval(&[1.0, 2.0], &[1.0]),
            Err(DivergenceError::DimensionMismatch { expected: 1, got: 2 })
        ));
        let bin = Divergence::bregman(Generator::Binomial(10));
        assert!(bin.eval(&[0.0], &[5.0]).is_ok());
        assert!(bin.eval(&[10.0], &[5.0]).is_ok());
        assert!(bin.eval(&[11.0], &[5.0]).is_err());
        assert!(bin.eval(&[5.0], &[10.0]).is_err());
        // even alpha is defined on the whole line
        let a4 = Divergence::bregman(Generator::Alpha(4.0));
        assert!(a4.eval(&[-2.0], &[-1.0]).is_ok());
        let a3 = Divergence::bregman(Generator::Alpha(3.0));
        assert!(a3.eval(&[-2.0], &[1.0]).is_err());
    }

    #[test]
    fn binomial_boundary_uses_zero_log_zero() {
        let bin = Divergence::bregman(Generator::Binomial(100));
        let d0 = bin.eval(&[0.0], &[50.0]).unwrap();
        assert_relative_eq!(d0, 100.0 * 2f64.ln(), max_relative = 1e-14);
        let dn = bin.eval(&[100.0], &[50.0]).unwrap();
        assert_relative_eq!(dn, 100.0 * 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn generic_formula_matches_bregman_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in all_generators() {
            for _ in 0..200 {
                let x = sample(g, &mut rng);
                let t = sample(g, &mut rng);
                let def = g.phi(x) - g.phi(t) - (x - t) * g.dphi(t);
                let closed = g.scalar_divergence(x, t);
                assert!(
                    (def - closed).abs() <= 1e-9 * (1.0 + closed.abs()),
                    "{g:?} x={x} t={t}: {def} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn nonnegativity_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in all_generators() {
            let d = Divergence::bregman(g);
            for _ in 0..10_000 {
                let x = sample(g, &mut rng);
                let t = sample(g, &mut rng);
                let v = d.eval(&[x], &[t]).unwrap();
                assert!(v >= 0.0);
                if x != t {
                    assert!(v > 0.0 || (x - t).abs() < 1e-6, "{g:?} {x} {t}");
                }
                assert!(d.eval(&[t], &[t]).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn dphi_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in all_generators() {
            for _ in 0..500 {
                let x = sample(g, &mut rng);
                let back = g.dphi_inverse(g.dphi(x)).unwrap();
                assert!((back - x).abs() <= 1e-9 * (1.0 + x.abs()), "{g:?} {x} {back}");
            }
        }
        assert_eq!(Generator::Alpha(0.0).dphi_inverse(1.0), None);
        assert_eq!(Generator::ExpLoss.dphi_inverse(-1.0), None);
    }

    #[test]
    fn total_bregman_with_zero_c_is_reversed_bregman() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in all_generators() {
            let plain = Divergence::bregman(g);
            let tbd = plain.total(0.0);
            for _ in 0..200 {
                let x: Vec<f64> = (0..3).map(|_| sample(g, &mut rng)).collect();
                let t: Vec<f64> = (0..3).map(|_| sample(g, &mut rng)).collect();
                assert_eq!(tbd.eval(&x, &t).unwrap(), plain.eval(&t, &x).unwrap());
            }
        }
    }

    #[test]
    fn averaging_scales_everything_by_one_over_l() {
        let d = Divergence::bregman(Generator::Alpha(1.0));
        let avg = d.averaged();
        let x = [1.0, 2.0, 3.0, 4.0];
        let t = [2.0, 2.0, 1.0, 5.0];
        let a = d.derivatives(&x, &t).unwrap();
        let b = avg.derivatives(&x, &t).unwrap();
        assert_relative_eq!(b.value, a.value / 4.0, max_relative = 1e-15);
        for l in 0..4 {
            assert_relative_eq!(b.grad[l], a.grad[l] / 4.0, max_relative = 1e-15);
            assert_relative_eq!(b.hess_diag[l], a.hess_diag[l] / 4.0, max_relative = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn additive_over_dimensions(
            xs in prop::collection::vec(0.1f64..10.0, 1..8),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ts: Vec<f64> = xs.iter().map(|_| rng.random_range(0.1..10.0)).collect();
            for g in [Generator::SquaredDistance, Generator::Alpha(0.0), Generator::Alpha(1.0),
                      Generator::Alpha(2.5), Generator::ExpLoss] {
                let d = Divergence::bregman(g);
                let whole = d.eval(&xs, &ts).unwrap();
                let parts: f64 = xs.iter().zip(&ts)
                    .map(|(&x, &t)| d.eval(&[x], &[t]).unwrap()).sum();
                prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole.abs()));
            }
        }
    }
}

//! Scalar abstraction shared by the likelihood kernels and samplers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the kernels are generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Values below this are rescaled during pruning to avoid underflow.
    const RESCALE_BELOW: Self;

    /// Lossy conversion from an `f64` literal or computed constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn ln_gamma(self) -> Self {
        Self::of(statrs::function::gamma::ln_gamma(self.to_f64_lossy()))
    }

    /// ln B(a, b)
    fn ln_beta(a: Self, b: Self) -> Self {
        a.ln_gamma() + b.ln_gamma() - (a + b).ln_gamma()
    }
}

impl Real for f32 {
    const RESCALE_BELOW: f32 = 1e-20;
}

impl Real for f64 {
    const RESCALE_BELOW: f64 = 1e-150;
}

/// log(exp(a) + exp(b)), with -inf handled.
pub fn log_add_exp<F: Real>(a: F, b: F) -> F {
    if a == F::neg_infinity() {
        return b;
    }
    if b == F::neg_infinity() {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Numerically stable log-sum-exp over a slice. Empty or all -inf gives -inf.
pub fn log_sum_exp<F: Real>(values: &[F]) -> F {
    let m = values.iter().copied().fold(F::neg_infinity(), F::max);
    if m == F::neg_infinity() {
        return m;
    }
    if m == F::infinity() {
        return m;
    }
    m + values.iter().map(|&v| (v - m).exp()).sum::<F>().ln()
}

/// Normalizes log-weights into probabilities. All -inf yields a uniform vector.
pub fn normalize_log_weights<F: Real>(log_w: &[F]) -> Vec<F> {
    let z = log_sum_exp(log_w);
    if z == F::neg_infinity() || z.is_nan() {
        let u = F::one() / F::of(log_w.len() as f64);
        return vec![u; log_w.len()];
    }
    log_w.iter().map(|&w| (w - z).exp()).collect()
}

/// Log density of Beta(a, b) at x.
pub fn beta_ln_pdf<F: Real>(x: F, a: F, b: F) -> F {
    if x <= F::zero() || x >= F::one() {
        return F::neg_infinity();
    }
    (a - F::one()) * x.ln() + (b - F::one()) * (F::one() - x).ln() - F::ln_beta(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        let v = log_add_exp(0.3f64.ln(), 0.5f64.ln());
        assert!((v - 0.8f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -2.0), -2.0);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_handles_large_offsets() {
        let v = log_sum_exp(&[-1000.0f64, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn beta_pdf_uniform_and_f32() {
        assert!(beta_ln_pdf(0.4f64, 1.0, 1.0).abs() < 1e-12);
        // Beta(2,3) at 0.5: 12 * 0.5 * 0.25 = 1.5
        assert!((beta_ln_pdf(0.5f64, 2.0, 3.0) - 1.5f64.ln()).abs() < 1e-12);
        assert!((beta_ln_pdf(0.5f32, 2.0, 3.0) - 1.5f32.ln()).abs() < 1e-5);
        assert_eq!(beta_ln_pdf(0.0f64, 0.5, 0.5), f64::NEG_INFINITY);
    }

    #[test]
    fn normalize_all_impossible_is_uniform() {
        let p = normalize_log_weights(&[f64::NEG_INFINITY; 4]);
        assert_eq!(p, vec![0.25; 4]);
    }
}

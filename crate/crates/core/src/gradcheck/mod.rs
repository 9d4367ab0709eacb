//! Central finite-difference verification of tape gradients.

mod models;

pub use models::{
    first_resolved, fixed_param_gradient, is_pre_norm_bias, probe_point, probe_vocab, standard_probes, Objective,
    ProbeConfig, ProbeOutcome, PROBE_LABELS,
};

use crate::tape::{Tape, Var};
use crate::tensor::ParamStore;
use crate::Result;

pub const DEFAULT_PROBE: f64 = 1e-6;

/// Entry-wise relative error `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central differences `(f(p + eps) - f(p - eps)) / (2 eps)` for every
/// parameter entry.
pub fn numeric_gradient<F>(params: &ParamStore, eps: f64, mut loss: F) -> Result<ParamStore>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let mut probe = params.clone();
    let mut out = params.zeros_like();
    let names: alloc::vec::Vec<alloc::string::String> = params.names().map(Into::into).collect();
    for name in &names {
        let len = params.get(name).map_or(0, |t| t.len());
        for i in 0..len {
            let original = params.get(name).unwrap().data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = original + eps;
            let plus = loss(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[i] = original - eps;
            let minus = loss(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[i] = original;
            out.get_mut(name).unwrap().data_mut()[i] = (plus - minus) / (2.0 * eps);
        }
    }
    Ok(out)
}

/// Largest [`relative_error`] over all entries of two equally laid out stores.
pub fn max_relative_error(analytic: &ParamStore, numeric: &ParamStore) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .flat_map(|((_, a), (_, n))| a.data().iter().zip(n.data()).map(|(&a, &n)| relative_error(a, n)))
        .fold(0.0, f64::max)
}

/// Builds the loss with `forward` on a fresh tape, differentiates it, and
/// compares against central differences. Returns the maximum relative error.
pub fn grad_check<F>(params: &ParamStore, eps: f64, mut forward: F) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = forward(&mut tape, params)?;
    let analytic = tape.param_grads(loss, params)?;
    let numeric = numeric_gradient(params, eps, |p| {
        let mut tape = Tape::new();
        let loss = forward(&mut tape, p)?;
        Ok(tape.scalar(loss))
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Smallest gradient magnitude a `1e-4` relative check can resolve with
/// central differences at [`DEFAULT_PROBE`]: loss rounding of a few ulp
/// divided by `2 eps` is about `3e-10`.
pub const RESOLUTION_FLOOR: f64 = 3e-6;

/// Smallest distance of any ReLU input from its kink for a probe point to
/// count as smooth under perturbations of size [`DEFAULT_PROBE`].
pub const KINK_MARGIN: f64 = 1e-4;

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    /// [`max_relative_error`] over every entry.
    pub max_error: f64,
    pub entries: usize,
    /// Entries where `0 < max(|analytic|, |numeric|) < RESOLUTION_FLOOR`;
    /// their relative error measures rounding, not the gradient.
    pub unresolved: usize,
    /// [`Tape::relu_margin`] at the probe point.
    pub kink_margin: Option<f64>,
}

impl GradReport {
    /// Whether the probe point is fit for a relative-error verdict: smooth,
    /// and with every entry above the resolution floor.
    pub fn is_resolved(&self) -> bool {
        self.unresolved == 0 && self.kink_margin.is_none_or(|m| m >= KINK_MARGIN)
    }
}

/// Like [`grad_check`], also counting entries too small to resolve.
pub fn grad_report<F>(params: &ParamStore, eps: f64, mut forward: F) -> Result<GradReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = forward(&mut tape, params)?;
    let analytic = tape.param_grads(loss, params)?;
    let kink_margin = tape.relu_margin();
    let numeric = numeric_gradient(params, eps, |p| {
        let mut tape = Tape::new();
        let loss = forward(&mut tape, p)?;
        Ok(tape.scalar(loss))
    })?;
    let mut entries = 0;
    let mut unresolved = 0;
    for ((_, a), (_, n)) in analytic.iter().zip(numeric.iter()) {
        for (&a, &n) in a.data().iter().zip(n.data()) {
            entries += 1;
            let size = a.abs().max(n.abs());
            if size > 0.0 && size < RESOLUTION_FLOOR {
                unresolved += 1;
            }
        }
    }
    Ok(GradReport {
        max_error: max_relative_error(&analytic, &numeric),
        entries,
        unresolved,
        kink_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::tensor::Tensor;

    fn tanh_net(tape: &mut Tape, p: &ParamStore) -> Result<Var> {
        let x = tape.param(p, "x")?;
        let w = tape.param(p, "w")?;
        let h = tape.matmul(x, w)?;
        let t = tape.tanh(h)?;
        let m = tape.mean_rows(t)?;
        let ones = tape.constant(Tensor::filled(&[1, 4], 0.25))?;
        tape.dot(m, ones)
    }

    fn random_params(seed: u64) -> ParamStore {
        let mut rng = SplitMix64::new(seed);
        let mut p = ParamStore::new();
        p.insert("x", Tensor::glorot(3, 5, &mut rng));
        p.insert("w", Tensor::glorot(5, 4, &mut rng));
        p
    }

    #[test]
    fn smooth_network_matches_finite_differences() {
        for seed in 0..5 {
            let err = grad_check(&random_params(seed), DEFAULT_PROBE, tanh_net).unwrap();
            assert!(err < 1e-6, "seed {seed}: {err}");
        }
    }

    #[test]
    fn sum_has_exact_unit_gradient() {
        let mut p = ParamStore::new();
        p.insert("x", Tensor::row_vector(&[0.5, -1.5, 2.0]));
        let mut tape = Tape::new();
        let x = tape.param(&p, "x").unwrap();
        let ones = tape.constant(Tensor::filled(&[1, 3], 1.0)).unwrap();
        let loss = tape.dot(x, ones).unwrap();
        let grads = tape.param_grads(loss, &p).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), [1.0, 1.0, 1.0]);
        let err = grad_check(&p, DEFAULT_PROBE, |tape, p| {
            let x = tape.param(p, "x")?;
            let ones = tape.constant(Tensor::filled(&[1, 3], 1.0))?;
            tape.dot(x, ones)
        })
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn report_flags_tiny_entries() {
        let mut p = ParamStore::new();
        p.insert("x", Tensor::row_vector(&[1e-7, 2.0]));
        let report = grad_report(&p, DEFAULT_PROBE, |tape, p| {
            let x = tape.param(p, "x")?;
            let y = tape.mul(x, x)?;
            let half = tape.constant(Tensor::row_vector(&[0.5, 0.5]))?;
            tape.dot(y, half)
        })
        .unwrap();
        assert_eq!((report.entries, report.unresolved), (2, 1));
        assert_eq!(report.kink_margin, None);
        assert!(!report.is_resolved());
    }

    #[test]
    fn report_flags_points_near_a_kink() {
        let mut p = ParamStore::new();
        p.insert("x", Tensor::row_vector(&[1e-6, 2.0]));
        let report = grad_report(&p, DEFAULT_PROBE, |tape, p| {
            let x = tape.param(p, "x")?;
            let y = tape.relu(x)?;
            let ones = tape.constant(Tensor::row_vector(&[1.0, 1.0]))?;
            tape.dot(y, ones)
        })
        .unwrap();
        assert_eq!(report.unresolved, 0);
        assert_eq!(report.kink_margin, Some(1e-6));
        assert!(!report.is_resolved());
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let params = random_params(9);
        let mut tape = Tape::new();
        let loss = tanh_net(&mut tape, &params).unwrap();
        let mut analytic = tape.param_grads(loss, &params).unwrap();
        analytic.get_mut("w").unwrap().data_mut()[0] += 0.1;
        let numeric = numeric_gradient(&params, DEFAULT_PROBE, |p| {
            let mut tape = Tape::new();
            let loss = tanh_net(&mut tape, p)?;
            Ok(tape.scalar(loss))
        })
        .unwrap();
        assert!(max_relative_error(&analytic, &numeric) > 1e-2);
    }
}

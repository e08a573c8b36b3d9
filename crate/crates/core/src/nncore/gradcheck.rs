/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Max over parameters of `|analytic − numeric| / max(|analytic|, |numeric|, 1e-12)`.
    pub max_rel_error: f64,
    /// Parameter index where the maximum occurred.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares the analytic gradient returned by `loss` at `params` against
/// central finite differences with the given step.
///
/// `loss` must be deterministic and return `(value, gradient)`; the gradient
/// is only read at the unperturbed point.
pub fn grad_check<L>(mut loss: L, params: &[f64], step: f64) -> GradCheck
where
    L: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss(params);
    assert_eq!(analytic.len(), params.len(), "gradient length differs from parameter count");

    let mut worst = GradCheck { max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0 };
    let mut probe = params.to_vec();
    for i in 0..params.len() {
        probe[i] = params[i] + step;
        let (plus, _) = loss(&probe);
        probe[i] = params[i] - step;
        let (minus, _) = loss(&probe);
        probe[i] = params[i];

        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        if rel > worst.max_rel_error || rel.is_nan() {
            worst = GradCheck { max_rel_error: rel, worst_index: i, analytic: a, numeric };
        }
    }
    worst
}

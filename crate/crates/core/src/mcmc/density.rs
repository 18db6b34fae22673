use crate::prior;
use crate::relmodel::RelationalState;

/// `ln L + K ln λ − τλ + Σ_k ln P(□_k)`, the constant permutation factor
/// omitted.
pub fn joint_log_density(state: &RelationalState, theta: f64, lambda: f64) -> f64 {
    let part = state.partition();
    let boxes: f64 = part
        .patches
        .iter()
        .map(|p| prior::rect_log_prob(&part.shape, &p.rect, theta))
        .sum();
    state.log_likelihood() + part.len() as f64 * lambda.ln() - part.tau * lambda + boxes
}

use super::accept;
use crate::error::{Result, SppError};
use crate::relmodel::{Change, RelationalState};
use crate::rng::{open_closed_unit, SppRng};

/// Metropolis-Hastings update of patch `k`'s cost. The proposal is
/// `Exp(λ)` truncated to `(0, B]`, `B = τ − Σ_{k'≠k} m_k'`, and the
/// acceptance ratio is `L(m*)/L(m_k) · e^{−λ m_k}/e^{−λ m*}`.
pub fn move_cost(
    state: &mut RelationalState,
    k: usize,
    lambda: f64,
    force_reject: bool,
    rng: &mut SppRng,
) -> Result<bool> {
    let part = state.partition();
    let count = part.len();
    let current = part
        .patches
        .get(k)
        .ok_or(SppError::PatchIndex { index: k, count })?
        .cost;
    let others: f64 = part
        .patches
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, p)| p.cost)
        .sum();
    let bound = (part.tau - others).max(current);
    let u = open_closed_unit(rng);
    let proposed = truncated_exp_quantile(u, lambda, bound).min(bound);
    if proposed.is_nan() || proposed <= 0.0 {
        return Ok(false);
    }
    let change = Change::SetCost { index: k, cost: proposed };
    let dll = state.delta_log_likelihood(&change)?;
    let log_alpha = dll + lambda * (proposed - current);
    let accepted = !force_reject && accept(log_alpha, rng);
    if accepted {
        state.apply(change)?;
    }
    Ok(accepted)
}

/// `−ln(1 − u(1 − e^{−λB}))/λ`.
pub(crate) fn truncated_exp_quantile(u: f64, lambda: f64, bound: f64) -> f64 {
    let mass = -(-lambda * bound).exp_m1();
    -(-u * mass).ln_1p() / lambda
}

#[cfg(test)]
mod tests {
    use super::truncated_exp_quantile;

    #[test]
    fn inverse_cdf_limits() {
        // large λB recovers the untruncated exponential quantile
        let m = truncated_exp_quantile(0.3, 3.0, 1e3);
        assert!((m - (-(0.7f64).ln() / 3.0)).abs() < 1e-14);
        assert!((truncated_exp_quantile(1.0, 3.0, 0.2) - 0.2).abs() < 1e-14);
        assert!(truncated_exp_quantile(0.5, 3.0, 0.2) < 0.1);
    }
}

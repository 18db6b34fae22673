use rand::Rng;

use super::{accept, log_sum_exp, sample_log_weights, MtmAcceptance, MtmConfig};
use crate::error::Result;
use crate::relmodel::{Change, RelationalState};
use crate::rng::SppRng;

/// Which permutation an MTM sweep updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

fn swap(axis: Axis, a: usize, b: usize) -> Change {
    match axis {
        Axis::Rows => Change::SwapRows(a, b),
        Axis::Cols => Change::SwapCols(a, b),
    }
}

fn partner(n: usize, i: usize, rng: &mut SppRng) -> usize {
    let p = rng.random_range(0..n - 1);
    if p >= i {
        p + 1
    } else {
        p
    }
}

/// One multiple-try sweep over every position of `axis`. Position `i` tries
/// `Z` uniformly chosen partners, weighted by the likelihood ratio of the
/// swap, picks one by weight, and balances against `Z−1` fresh partners
/// drawn from the proposed state plus the move back. Returns
/// `(accepted, proposed)`.
pub fn move_perm_mtm(
    state: &mut RelationalState,
    axis: Axis,
    cfg: &MtmConfig,
    force_reject: bool,
    rng: &mut SppRng,
) -> Result<(usize, usize)> {
    let n = match axis {
        Axis::Rows => state.rows(),
        Axis::Cols => state.cols(),
    };
    if n < 2 {
        return Ok((0, 0));
    }
    let z = cfg.proposals;
    let mut accepted = 0;
    let mut lw = vec![0.0; z];
    let mut lw_back = vec![0.0; z];
    for i in 0..n {
        let tries: Vec<usize> = (0..z).map(|_| partner(n, i, rng)).collect();
        for (w, &t) in lw.iter_mut().zip(&tries) {
            *w = state.delta_log_likelihood(&swap(axis, i, t))?;
        }
        let pick = sample_log_weights(&lw, rng);
        let chosen = tries[pick];
        let forward = state.apply(swap(axis, i, chosen))?;
        for w in lw_back.iter_mut().take(z - 1) {
            let t = partner(n, i, rng);
            *w = state.delta_log_likelihood(&swap(axis, i, t))?;
        }
        // swapping back returns to the current state
        lw_back[z - 1] = -forward;
        let log_alpha = match cfg.acceptance {
            MtmAcceptance::Balanced => log_sum_exp(&lw) - lw[pick] - log_sum_exp(&lw_back),
            MtmAcceptance::Literal => log_sum_exp(&lw) - log_sum_exp(&lw_back),
        };
        if !force_reject && accept(log_alpha, rng) {
            accepted += 1;
        } else {
            state.apply(swap(axis, i, chosen))?;
        }
    }
    Ok((accepted, n))
}

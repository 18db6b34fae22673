use rand::Rng;

use super::accept;
use crate::error::Result;
use crate::prior::{self, HyperParams};
use crate::relmodel::{Change, RelationalState};
use crate::rng::{open_closed_unit, SppRng};

/// What a birth/death step proposed and whether it was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BirthDeathOutcome {
    Birth { accepted: bool },
    Death { accepted: bool },
    /// Death proposed with no patches present.
    DeathOnEmpty,
}

/// One birth-or-death proposal. A birth draws a box from the nonempty prior
/// and a generating time uniform on `(0, τ]`; a death removes a uniformly
/// chosen patch and merges its cost into the successor.
pub fn move_birth_death(
    state: &mut RelationalState,
    hp: &HyperParams,
    lambda: f64,
    force_reject: bool,
    rng: &mut SppRng,
) -> Result<BirthDeathOutcome> {
    let k = state.partition().len();
    let mass = lambda * hp.tau;
    let odds = ((1.0 - hp.p_birth) / hp.p_birth).ln();
    if rng.random::<f64>() < hp.p_birth {
        let rect = prior::sample_direct_patch(state.shape(), hp.theta, rng);
        let time = hp.tau * open_closed_unit(rng);
        if state.partition().time_points().contains(&time) {
            return Ok(BirthDeathOutcome::Birth { accepted: false });
        }
        let change = Change::Insert { rect, time };
        let dll = state.delta_log_likelihood(&change)?;
        let log_alpha = dll + mass.ln() - ((k + 1) as f64).ln() + odds;
        let accepted = !force_reject && accept(log_alpha, rng);
        if accepted {
            state.apply(change)?;
        }
        Ok(BirthDeathOutcome::Birth { accepted })
    } else {
        if k == 0 {
            return Ok(BirthDeathOutcome::DeathOnEmpty);
        }
        let index = rng.random_range(0..k);
        let change = Change::Remove { index };
        let dll = state.delta_log_likelihood(&change)?;
        let log_alpha = dll + (k as f64).ln() - mass.ln() - odds;
        let accepted = !force_reject && accept(log_alpha, rng);
        if accepted {
            state.apply(change)?;
        }
        Ok(BirthDeathOutcome::Death { accepted })
    }
}

//! Posterior sampling for the relational model.
//!
//! One iteration runs, in order: a birth/death proposal, a cost update for
//! every patch, a conditional-SMC position update for every patch, and
//! multiple-try permutation updates over rows then columns.

mod birth_death;
mod chain;
mod cost;
mod csmc;
mod density;
mod mtm;

pub use birth_death::{move_birth_death, BirthDeathOutcome};
pub use chain::{run_chain, ChainOutput, Counters, Sampler, TraceRow};
pub use cost::move_cost;
pub use csmc::{move_patch_csmc, reference_trajectory, GainField, Track};
pub use density::joint_log_density;
pub use mtm::{move_perm_mtm, Axis};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SppError};
use crate::grid::ArrayShape;
use crate::prior::{self, HyperParams};

/// Ancestor sampling scheme for the conditional SMC sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    /// Systematic resampling conditioned on the reference keeping its own ancestor.
    #[default]
    Systematic,
    /// Independent categorical draws for every free particle.
    Multinomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    /// Number of particles `C`, the first being the reference.
    pub particles: usize,
    /// Number of growth stages `I`; `None` uses half the longer side, rounded up.
    pub stages: Option<usize>,
    pub resampling: Resampling,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            particles: 5,
            stages: None,
            resampling: Resampling::Systematic,
        }
    }
}

impl SmcConfig {
    pub fn stages_for(&self, shape: &ArrayShape) -> usize {
        self.stages
            .unwrap_or_else(|| shape.dims().iter().copied().max().unwrap_or(1).div_ceil(2))
            .max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(SppError::InvalidParameter("at least two particles are required".into()));
        }
        if self.stages == Some(0) {
            return Err(SppError::InvalidParameter("at least one stage is required".into()));
        }
        Ok(())
    }
}

/// Acceptance rule for the multiple-try permutation move.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MtmAcceptance {
    /// `Σω / (ω_sel · Σω'')`, with the reverse weights taken relative to the
    /// proposed state.
    #[default]
    Balanced,
    /// `Σω / Σω''`, without the selected weight in the denominator.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtmConfig {
    /// Number of tries `Z`.
    pub proposals: usize,
    pub acceptance: MtmAcceptance,
}

impl Default for MtmConfig {
    fn default() -> Self {
        Self {
            proposals: 5,
            acceptance: MtmAcceptance::Balanced,
        }
    }
}

/// Which kernels run. Disabled kernels are skipped entirely.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveSet {
    pub birth_death: bool,
    pub cost: bool,
    pub csmc: bool,
    pub mtm_rows: bool,
    pub mtm_cols: bool,
    /// Every proposal is rejected; the state never changes.
    pub force_reject: bool,
}

impl Default for MoveSet {
    fn default() -> Self {
        Self {
            birth_death: true,
            cost: true,
            csmc: true,
            mtm_rows: true,
            mtm_cols: true,
            force_reject: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub hp: HyperParams,
    pub smc: SmcConfig,
    pub mtm: MtmConfig,
    /// Poisson rate per unit budget; `None` uses `γ·S_X·P(S_□>0)`.
    pub intensity_scale: Option<f64>,
    pub seed: u64,
    /// `None` discards the first fifth.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub moves: MoveSet,
    /// Write elapsed seconds into the trace; off gives reproducible traces.
    pub record_wallclock: bool,
    /// Threads evaluating particle weights; results do not depend on it.
    pub workers: usize,
    /// Verify cache coherence every this many iterations.
    pub check_every: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            hp: HyperParams::default(),
            smc: SmcConfig::default(),
            mtm: MtmConfig::default(),
            intensity_scale: None,
            seed: 0,
            burn_in: None,
            thin: 10,
            moves: MoveSet::default(),
            record_wallclock: true,
            workers: 1,
            check_every: Some(100),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        self.smc.validate()?;
        if self.iterations == 0 {
            return Err(SppError::InvalidParameter("at least one iteration is required".into()));
        }
        if self.mtm.proposals == 0 {
            return Err(SppError::InvalidParameter("at least one MTM proposal is required".into()));
        }
        if self.thin == 0 {
            return Err(SppError::InvalidParameter("thinning interval must be positive".into()));
        }
        if let Some(l) = self.intensity_scale {
            if !(l > 0.0 && l.is_finite()) {
                return Err(SppError::InvalidParameter("intensity scale must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 5)
    }

    /// Poisson rate `λ` on `shape`.
    pub fn intensity(&self, shape: &ArrayShape) -> f64 {
        self.intensity_scale
            .unwrap_or_else(|| default_intensity(shape, &self.hp))
    }
}

/// `γ·S_X·P(S_□>0)`; for an `N×N` array this is `γN²θ_*`.
pub fn default_intensity(shape: &ArrayShape, hp: &HyperParams) -> f64 {
    hp.gamma * shape.volume() as f64 * prior::nonempty_prob(shape, hp.theta)
}

/// `ln Σ exp(x)`.
pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Index drawn with probability proportional to `exp(logw)`.
pub(crate) fn sample_log_weights(logw: &[f64], rng: &mut crate::rng::SppRng) -> usize {
    use rand::Rng;
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &wi) in w.iter().enumerate() {
        if u < wi {
            return i;
        }
        u -= wi;
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Metropolis accept step for `ln α`.
pub(crate) fn accept(log_alpha: f64, rng: &mut crate::rng::SppRng) -> bool {
    use rand::Rng;
    log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_intensity_square_form() {
        let shape = ArrayShape::square(1000).unwrap();
        let hp = HyperParams::new(0.5, 0.99, 1e-2, 0.5).unwrap();
        let theta_star = ((0.99 + 1000.0 * 0.01) / 1000.0f64).powi(2);
        let expect = 1e-2 * 1e6 * theta_star;
        assert!((default_intensity(&shape, &hp) - expect).abs() < 1e-12 * expect);
        // τλ for the large-scale settings
        assert!((0.5 * default_intensity(&shape, &hp) - 0.6039).abs() < 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        let mut c = ChainConfig::default();
        c.smc.particles = 1;
        assert!(c.validate().is_err());
        let c = ChainConfig {
            iterations: 0,
            ..ChainConfig::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(SmcConfig::default().stages_for(&ArrayShape::square(7).unwrap()), 4);
        assert_eq!(ChainConfig { iterations: 500, ..ChainConfig::default() }.burn_in(), 100);
    }

    #[test]
    fn log_sum_exp_and_selection() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let mut rng = crate::rng::seeded(1);
        let mut hits = [0usize; 2];
        for _ in 0..10_000 {
            hits[sample_log_weights(&[0.0, 3f64.ln()], &mut rng)] += 1;
        }
        assert!((hits[1] as f64 / 10_000.0 - 0.75).abs() < 0.02);
    }
}

use std::time::Instant;

use rayon::{ThreadPool, ThreadPoolBuilder};

use super::csmc::move_patch_csmc_in;
use super::{move_birth_death, move_cost, move_perm_mtm, Axis, BirthDeathOutcome, ChainConfig};
use crate::error::{Result, SppError};
use crate::relmodel::{ModelSnapshot, RelationalState};
use crate::rng::{seeded, SppRng};

/// Accepted and proposed counts per kernel, cumulative over the chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub birth: (u64, u64),
    pub death: (u64, u64),
    pub cost: (u64, u64),
    pub mtm_row: (u64, u64),
    pub mtm_col: (u64, u64),
}

fn rate((a, p): (u64, u64)) -> f64 {
    if p == 0 {
        0.0
    } else {
        a as f64 / p as f64
    }
}

/// One line of the chain trace. Acceptance rates are cumulative.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub loglik_train: f64,
    pub k: usize,
    pub accept_birth: f64,
    pub accept_death: f64,
    pub accept_cost: f64,
    pub accept_mtm_row: f64,
    pub accept_mtm_col: f64,
    pub wallclock_s: f64,
}

impl TraceRow {
    pub const HEADER: &'static str =
        "iter,loglik_train,K,accept_birth,accept_death,accept_cost,accept_mtm_row,accept_mtm_col,wallclock_s";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.loglik_train,
            self.k,
            self.accept_birth,
            self.accept_death,
            self.accept_cost,
            self.accept_mtm_row,
            self.accept_mtm_col,
            self.wallclock_s
        )
    }
}

/// A chain positioned between iterations.
pub struct Sampler {
    state: RelationalState,
    cfg: ChainConfig,
    lambda: f64,
    rng: SppRng,
    iter: usize,
    counters: Counters,
    started: Instant,
    pool: Option<ThreadPool>,
}

impl Sampler {
    pub fn new(state: RelationalState, cfg: ChainConfig) -> Result<Self> {
        cfg.validate()?;
        if (state.partition().tau - cfg.hp.tau).abs() > 0.0 {
            return Err(SppError::InvalidParameter(format!(
                "state budget {} differs from configured tau {}",
                state.partition().tau,
                cfg.hp.tau
            )));
        }
        let pool = if cfg.workers > 1 {
            let p = ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| SppError::InvalidParameter(format!("thread pool: {e}")))?;
            Some(p)
        } else {
            None
        };
        Ok(Self {
            pool,
            lambda: cfg.intensity(state.shape()),
            rng: seeded(cfg.seed),
            state,
            cfg,
            iter: 0,
            counters: Counters::default(),
            started: Instant::now(),
        })
    }

    pub fn state(&self) -> &RelationalState {
        &self.state
    }

    pub fn into_state(self) -> RelationalState {
        self.state
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    /// Poisson rate per unit budget.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Runs one full iteration and returns its trace row.
    pub fn step(&mut self) -> Result<TraceRow> {
        let moves = self.cfg.moves;
        let reject = moves.force_reject;
        let hp = self.cfg.hp;
        let st = &mut self.state;
        let rng = &mut self.rng;
        let c = &mut self.counters;

        if moves.birth_death {
            match move_birth_death(st, &hp, self.lambda, reject, rng)? {
                BirthDeathOutcome::Birth { accepted } => {
                    c.birth.0 += accepted as u64;
                    c.birth.1 += 1;
                }
                BirthDeathOutcome::Death { accepted } => {
                    c.death.0 += accepted as u64;
                    c.death.1 += 1;
                }
                BirthDeathOutcome::DeathOnEmpty => c.death.1 += 1,
            }
        }
        if moves.cost {
            for k in 0..st.partition().len() {
                c.cost.0 += move_cost(st, k, self.lambda, reject, rng)? as u64;
                c.cost.1 += 1;
            }
        }
        if moves.csmc {
            for k in 0..st.partition().len() {
                move_patch_csmc_in(st, k, hp.theta, &self.cfg.smc, reject, rng, self.pool.as_ref())?;
            }
        }
        if moves.mtm_rows {
            let (a, p) = move_perm_mtm(st, Axis::Rows, &self.cfg.mtm, reject, rng)?;
            c.mtm_row.0 += a as u64;
            c.mtm_row.1 += p as u64;
        }
        if moves.mtm_cols {
            let (a, p) = move_perm_mtm(st, Axis::Cols, &self.cfg.mtm, reject, rng)?;
            c.mtm_col.0 += a as u64;
            c.mtm_col.1 += p as u64;
        }

        let c = self.counters;
        self.iter += 1;
        if let Some(every) = self.cfg.check_every {
            if every > 0 && self.iter.is_multiple_of(every) {
                self.check_invariants()?;
            }
        }
        Ok(TraceRow {
            iter: self.iter,
            loglik_train: self.state.log_likelihood(),
            k: self.state.partition().len(),
            accept_birth: rate(c.birth),
            accept_death: rate(c.death),
            accept_cost: rate(c.cost),
            accept_mtm_row: rate(c.mtm_row),
            accept_mtm_col: rate(c.mtm_col),
            wallclock_s: if self.cfg.record_wallclock {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    }

    /// Budget, permutation and cache checks.
    pub fn check_invariants(&self) -> Result<()> {
        self.state.snapshot().validate()?;
        let err = self.state.cache_error();
        if err > 1e-9 {
            return Err(SppError::Corrupt(format!("aggregate cache drifted by {err:e}")));
        }
        Ok(())
    }

    /// Whether the iteration just completed is kept as a posterior sample.
    pub fn is_sample_iteration(&self) -> bool {
        let burn = self.cfg.burn_in();
        self.iter > burn && (self.iter - burn - 1).is_multiple_of(self.cfg.thin)
    }
}

/// Trace, thinned samples and final state of a chain.
#[derive(Debug)]
pub struct ChainOutput {
    pub trace: Vec<TraceRow>,
    /// `(iteration, snapshot)` pairs.
    pub samples: Vec<(usize, ModelSnapshot)>,
    pub final_state: RelationalState,
}

/// Runs `cfg.iterations` iterations from `state`. `observer` sees the
/// sampler after every iteration, for checkpoints and progress output.
pub fn run_chain(
    state: RelationalState,
    cfg: &ChainConfig,
    mut observer: impl FnMut(&Sampler, &TraceRow) -> Result<()>,
) -> Result<ChainOutput> {
    let mut sampler = Sampler::new(state, cfg.clone())?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut samples = Vec::new();
    for _ in 0..cfg.iterations {
        let row = sampler.step()?;
        if sampler.is_sample_iteration() {
            samples.push((row.iter, sampler.state().snapshot()));
        }
        observer(&sampler, &row)?;
        trace.push(row);
    }
    Ok(ChainOutput {
        trace,
        samples,
        final_state: sampler.into_state(),
    })
}

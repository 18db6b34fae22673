//! Self-checks of the prior, the projection identities and the sampler.
//!
//! Each check returns an [`Outcome`] with a verdict and the numbers behind
//! it. The `check` command and the acceptance harness both run these.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Result, SppError};
use crate::grid::{ArrayShape, Partition, Patch, Rect};
use crate::io::{auc, make_split};
use crate::mcmc::{ChainConfig, MoveSet, Sampler, SmcConfig};
use crate::prior::{self, HyperParams};
use crate::projection::{self, McConfig, SubArraySpec, EXACT_TOLERANCE};
use crate::relmodel::{generate_from_partition, predict, sigma, BinaryMatrix, Change, ModelSnapshot, RelationalState};
use crate::rng::{seeded, stream};
use crate::stats::{chi_square_gof, mean_and_se, poisson_pmf, TestResult};

/// Verdict of one check.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

impl Outcome {
    fn new(name: &str, passed: bool, detail: String, metrics: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

fn tested(tests: &[(&str, TestResult)], alpha: f64) -> (bool, Vec<(String, f64)>) {
    let passed = tests.iter().all(|(_, t)| t.passes(alpha));
    (passed, tests.iter().map(|(n, t)| (format!("p_{n}"), t.p_value)).collect())
}

fn with_extra(mut o: Outcome, extra: Vec<(String, f64)>) -> Outcome {
    o.metrics.extend(extra);
    o
}

/// Candidate and direct constructions agree on every shape up to 6×6.
pub fn construction_equivalence() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for &theta in &[0.0, 0.3, 0.5, 0.9, 1.0] {
        for a in 1..=6 {
            worst = worst.max(prior::construction_tv(&ArrayShape::new(vec![a])?, theta)?);
            for b in 1..=6 {
                worst = worst.max(prior::construction_tv(&ArrayShape::new(vec![a, b])?, theta)?);
            }
        }
    }
    Ok(Outcome::new(
        "construction_equivalence",
        worst < EXACT_TOLERANCE,
        format!("max total variation {worst:.3e}"),
        &[("max_tv", worst)],
    ))
}

/// Expected covered volume equals `τ·S_X`, by simulation on 20×30 and in
/// closed form on a grid of shapes and persistences.
pub fn volume_identity(draws: usize, seed: u64) -> Result<Outcome> {
    let shape = ArrayShape::new(vec![20, 30])?;
    let tau = 0.3;
    let target = tau * shape.volume() as f64;
    let mut worst_z: f64 = 0.0;
    let mut metrics = Vec::new();
    for (i, &theta) in [0.5, 0.9].iter().enumerate() {
        let hp = HyperParams::new(tau, theta, 1.0, 0.5)?;
        let mut rng = stream(seed, i as u64);
        let vols: Vec<f64> = (0..draws)
            .map(|_| {
                let p = prior::sample_partition_direct(&shape, &hp, &mut rng);
                p.patches.iter().map(|q| q.volume() as f64).sum()
            })
            .collect();
        let (mean, se) = mean_and_se(&vols);
        let z = (mean - target).abs() / se;
        worst_z = worst_z.max(z);
        metrics.push((format!("mean_volume_theta_{theta}"), mean));
        metrics.push((format!("z_theta_{theta}"), z));
    }
    let mut worst_gap: f64 = 0.0;
    for dims in [vec![20, 30], vec![1, 1], vec![7], vec![4, 5, 6], vec![100, 3]] {
        let shape = ArrayShape::new(dims)?;
        for &theta in &[0.0, 0.5, 0.9, 1.0] {
            let hp = HyperParams::new(tau, theta, 1.0, 0.5)?;
            worst_gap = worst_gap.max(prior::expected_total_volume(&shape, &hp).relative_gap());
        }
    }
    let o = Outcome::new(
        "volume_identity",
        worst_z < 4.0 && worst_gap < EXACT_TOLERANCE,
        format!("target {target}, worst |z| {worst_z:.2}, closed-form gap {worst_gap:.1e}"),
        &[("worst_z", worst_z), ("closed_form_gap", worst_gap)],
    );
    Ok(with_extra(o, metrics))
}

/// Intensity equality and position law of projected patches, exactly.
pub fn projection_identities() -> Result<Outcome> {
    let r = projection::exact_suite()?;
    let passed = r.intensity.passed && r.position_max_tv < EXACT_TOLERANCE;
    Ok(Outcome::new(
        "projection_identities",
        passed,
        format!(
            "{} intensity cases, max relative gap {:.1e}; {} position cases, max total variation {:.1e}",
            r.intensity.cases.len(),
            r.intensity.max_relative_diff,
            r.positions.len(),
            r.position_max_tv
        ),
        &[
            ("intensity_max_gap", r.intensity.max_relative_diff),
            ("position_max_tv", r.position_max_tv),
        ],
    ))
}

/// Draws on 6×6 projected to the leading 5×5 match direct draws on 5×5,
/// and the negative control that keeps empty projections is caught.
pub fn self_consistency(draws: usize, seed: u64, workers: usize) -> Result<Outcome> {
    let spec = SubArraySpec::leading(ArrayShape::new(vec![6, 6])?, vec![5, 5])?;
    let hp = HyperParams::new(2.0, 0.5, 1.0, 0.5)?;
    let mut cfg = McConfig::new(draws, seed);
    cfg.workers = workers;
    let good = projection::check_self_consistency_mc(&spec, &hp, &cfg)?;
    cfg.keep_empty_projections = true;
    let control = projection::check_self_consistency_mc(&spec, &hp, &cfg)?;
    let min_p = std::iter::once(&good.count_test)
        .chain(&good.position_tests)
        .chain(&good.position_exact_tests)
        .chain(std::iter::once(&good.cost_sum_test))
        .map(|t| t.p_value)
        .fold(1.0, f64::min);
    Ok(Outcome::new(
        "self_consistency",
        good.passed && !control.passed,
        format!(
            "smallest p {min_p:.3}; control count p {:.1e} ({})",
            control.count_test.p_value,
            if control.passed { "not caught" } else { "caught" }
        ),
        &[
            ("min_p", min_p),
            ("mean_count_projected", good.mean_count_projected),
            ("mean_count_direct", good.mean_count_direct),
            ("control_count_p", control.count_test.p_value),
        ],
    ))
}

/// Spot values and monotonicity of the link function.
pub fn sigma_values() -> Outcome {
    let (s0, s1) = (sigma(0.0), sigma(1.0));
    let grid: Vec<f64> = (0..10_000).map(|i| sigma(i as f64 * 10.0 / 9_999.0)).collect();
    let monotone = grid.windows(2).all(|w| w[1] > w[0]);
    Outcome::new(
        "sigma_values",
        (s0 - 0.001_239_37).abs() < 1e-8 && (s1 - 0.463_091).abs() < 1e-6 && monotone,
        format!("sigma(0) = {s0:.9}, sigma(1) = {s1:.7}, monotone on [0, 10]: {monotone}"),
        &[("sigma_0", s0), ("sigma_1", s1)],
    )
}

/// Settings for [`prior_recovery`].
#[derive(Clone, Debug)]
pub struct PriorRecoveryConfig {
    pub size: usize,
    pub hp: HyperParams,
    pub iterations: usize,
    pub burn_in: usize,
    /// Iterations between recorded states.
    pub thin: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for PriorRecoveryConfig {
    fn default() -> Self {
        Self {
            size: 8,
            hp: HyperParams {
                tau: 0.2,
                theta: 0.5,
                gamma: 1.0,
                p_birth: 0.5,
            },
            iterations: 50_000,
            burn_in: 1_000,
            thin: 40,
            seed: 6,
            alpha: 0.01,
        }
    }
}

/// Equal-probability bin edges of the total cost `Σm` under the prior,
/// whose law is an atom `e^{−λτ}` at zero plus the density of
/// `F(x) = e^{−λ(τ−x)}` on `(0, τ]`.
fn cost_sum_bins(lambda: f64, tau: f64, bins: usize) -> (Vec<f64>, Vec<f64>) {
    let atom = (-lambda * tau).exp();
    let mut edges = Vec::with_capacity(bins);
    for j in 1..bins {
        let u = atom + j as f64 * (1.0 - atom) / bins as f64;
        edges.push(tau + u.ln() / lambda);
    }
    let mut probs = vec![atom];
    probs.extend(std::iter::repeat_n((1.0 - atom) / bins as f64, bins));
    (edges, probs)
}

/// All kernels under a flat likelihood recover the prior: patch count,
/// per-dimension `(s, l)` pmf and total cost.
pub fn prior_recovery(cfg: &PriorRecoveryConfig) -> Result<Outcome> {
    let n = cfg.size;
    let data = BinaryMatrix::zeros(n, n);
    let mask = BinaryMatrix::zeros(n, n);
    let state = RelationalState::new(data, mask, cfg.hp.tau, cfg.hp.gamma)?;
    let chain = ChainConfig {
        iterations: cfg.iterations,
        hp: cfg.hp,
        seed: cfg.seed,
        burn_in: Some(cfg.burn_in),
        thin: cfg.thin,
        record_wallclock: false,
        check_every: Some(1_000),
        ..ChainConfig::default()
    };
    let mut sampler = Sampler::new(state, chain)?;
    let lambda = sampler.lambda();
    let (edges, cost_probs) = cost_sum_bins(lambda, cfg.hp.tau, 10);
    let cells = prior::position_count(n);
    let mut k_counts: Vec<u64> = Vec::new();
    let mut pos = vec![vec![0u64; cells]; 2];
    let mut cost_counts = vec![0u64; cost_probs.len()];
    let mut recorded = 0usize;
    for it in 1..=cfg.iterations {
        sampler.step()?;
        if it <= cfg.burn_in || !(it - cfg.burn_in).is_multiple_of(cfg.thin) {
            continue;
        }
        recorded += 1;
        let part = sampler.state().partition();
        let k = part.len();
        if k_counts.len() <= k {
            k_counts.resize(k + 1, 0);
        }
        k_counts[k] += 1;
        for p in &part.patches {
            for (d, counts) in pos.iter_mut().enumerate() {
                counts[prior::position_index(n, p.rect.start_at(d), p.rect.len_at(d))] += 1;
            }
        }
        let total = part.total_cost();
        let bin = if k == 0 { 0 } else { 1 + edges.partition_point(|&e| e < total) };
        cost_counts[bin] += 1;
    }
    if recorded == 0 {
        return Err(SppError::InsufficientDraws { min: 1, got: 0 });
    }

    let mean_k = lambda * cfg.hp.tau;
    let mut k_probs = poisson_pmf(mean_k, k_counts.len());
    k_probs.push((1.0 - k_probs.iter().sum::<f64>()).max(0.0));
    k_counts.push(0);
    let k_test = chi_square_gof(&k_counts, &k_probs);

    let pmf = prior::direct_position_pmf(n, cfg.hp.theta)?;
    let mut probs = vec![0.0; cells];
    for (&(s, l), &p) in &pmf.0 {
        probs[prior::position_index(n, s, l)] = p;
    }
    let rows_test = chi_square_gof(&pos[0], &probs);
    let cols_test = chi_square_gof(&pos[1], &probs);
    let cost_test = chi_square_gof(&cost_counts, &cost_probs);

    let observed_k = k_counts.iter().enumerate().map(|(k, &c)| (k as u64 * c) as f64).sum::<f64>() / recorded as f64;
    let tests = [("k", k_test), ("rows", rows_test), ("cols", cols_test), ("cost_sum", cost_test)];
    let (passed, ps) = tested(&tests, cfg.alpha);
    let o = Outcome::new(
        "prior_recovery",
        passed,
        format!(
            "{recorded} states; mean K {observed_k:.3} vs {mean_k:.3}; p-values K {:.3}, rows {:.3}, cols {:.3}, total cost {:.3}",
            k_test.p_value, rows_test.p_value, cols_test.p_value, cost_test.p_value
        ),
        &[("mean_k", observed_k), ("expected_k", mean_k), ("states", recorded as f64)],
    );
    Ok(with_extra(o, ps))
}

/// Settings for [`csmc_posterior`].
#[derive(Clone, Debug)]
pub struct CsmcPosteriorConfig {
    pub size: usize,
    /// Planted box, 1-based start and lengths.
    pub planted: ([usize; 2], [usize; 2]),
    pub cost: f64,
    /// Link probability inside the planted box.
    pub inside: f64,
    pub theta: f64,
    pub smc: SmcConfig,
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub max_tv: f64,
}

impl Default for CsmcPosteriorConfig {
    fn default() -> Self {
        Self {
            size: 8,
            planted: ([3, 2], [3, 4]),
            cost: 0.5,
            inside: 0.8,
            theta: 0.5,
            smc: SmcConfig::default(),
            sweeps: 100_000,
            burn_in: 1_000,
            seed: 7,
            max_tv: 0.05,
        }
    }
}

/// Aggregate rate at which [`sigma`] reaches `p`.
fn sigma_inverse(p: f64) -> f64 {
    ((1.0 + p) / (1.0 - p)).ln() - crate::relmodel::SIGMA_SHIFT
}

/// Exact posterior over every box for the single patch of `state`.
fn box_posterior(state: &RelationalState, theta: f64) -> Result<Vec<(Rect, f64)>> {
    let shape = state.shape().clone();
    let (rows, cols) = (shape.len(0), shape.len(1));
    let mut out = Vec::new();
    for s0 in 1..=rows {
        for l0 in 1..=rows - s0 + 1 {
            for s1 in 1..=cols {
                for l1 in 1..=cols - s1 + 1 {
                    let rect = Rect::new(&shape, vec![s0, s1], vec![l0, l1])?;
                    let dll = state.delta_log_likelihood(&Change::Move {
                        index: 0,
                        rect: rect.clone(),
                    })?;
                    out.push((rect.clone(), prior::rect_log_prob(&shape, &rect, theta) + dll));
                }
            }
        }
    }
    let max = out.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = out.iter().map(|(_, l)| (l - max).exp()).sum();
    Ok(out.into_iter().map(|(r, l)| (r, (l - max).exp() / z)).collect())
}

/// The conditional SMC kernel alone, with one patch of fixed cost, leaves
/// the enumerated box posterior invariant.
pub fn csmc_posterior(cfg: &CsmcPosteriorConfig) -> Result<Outcome> {
    let n = cfg.size;
    let shape = ArrayShape::new(vec![n, n])?;
    let planted = Rect::new(&shape, cfg.planted.0.to_vec(), cfg.planted.1.to_vec())?;
    let gamma = cfg.cost / (planted.volume() as f64 * sigma_inverse(cfg.inside));
    let tau = cfg.cost;
    let part = Partition::new(shape.clone(), tau, vec![Patch::new(planted, cfg.cost)?])?;
    let mut rng = seeded(cfg.seed);
    let synth = generate_from_partition(part, gamma, true, &mut rng)?;
    let state = RelationalState::from_snapshot(synth.data, BinaryMatrix::filled(n, n, true), synth.truth)?;

    let exact = box_posterior(&state, cfg.theta)?;
    let index: std::collections::HashMap<Rect, usize> =
        exact.iter().enumerate().map(|(i, (r, _))| (r.clone(), i)).collect();

    let chain = ChainConfig {
        iterations: cfg.burn_in + cfg.sweeps,
        hp: HyperParams::new(tau, cfg.theta, gamma, 0.5)?,
        smc: cfg.smc,
        seed: cfg.seed.wrapping_add(1),
        record_wallclock: false,
        check_every: Some(10_000),
        moves: MoveSet {
            birth_death: false,
            cost: false,
            csmc: true,
            mtm_rows: false,
            mtm_cols: false,
            force_reject: false,
        },
        ..ChainConfig::default()
    };
    let mut sampler = Sampler::new(state, chain)?;
    let mut counts = vec![0u64; exact.len()];
    for it in 0..cfg.burn_in + cfg.sweeps {
        sampler.step()?;
        if it >= cfg.burn_in {
            counts[index[&sampler.state().partition().patches[0].rect]] += 1;
        }
    }
    let total = cfg.sweeps as f64;
    let tv = 0.5
        * exact
            .iter()
            .zip(&counts)
            .map(|((_, p), &c)| (c as f64 / total - p).abs())
            .sum::<f64>();
    let top = exact.iter().map(|(_, p)| *p).fold(0.0, f64::max);
    Ok(Outcome::new(
        "csmc_posterior",
        tv < cfg.max_tv,
        format!("{} boxes, {} sweeps, total variation {tv:.4} (largest posterior mass {top:.3})", exact.len(), cfg.sweeps),
        &[("total_variation", tv), ("max_mass", top)],
    ))
}

fn random_change(state: &RelationalState, rng: &mut crate::rng::SppRng) -> Change {
    let shape = state.shape().clone();
    let k = state.partition().len();
    let theta = 0.6;
    let choice = if k == 0 { 0 } else { rng.random_range(0..6) };
    match choice {
        0 => Change::Insert {
            rect: prior::sample_direct_patch(&shape, theta, rng),
            time: state.partition().tau * crate::rng::open_closed_unit(rng),
        },
        1 => Change::Remove {
            index: rng.random_range(0..k),
        },
        2 => Change::Move {
            index: rng.random_range(0..k),
            rect: prior::sample_direct_patch(&shape, theta, rng),
        },
        3 => Change::SetCost {
            index: rng.random_range(0..k),
            cost: 0.01 + rng.random::<f64>(),
        },
        4 => Change::SwapRows(rng.random_range(0..state.rows()), rng.random_range(0..state.rows())),
        _ => Change::SwapCols(rng.random_range(0..state.cols()), rng.random_range(0..state.cols())),
    }
}

/// Cached deltas agree with full recomputation over random mutations.
pub fn incremental_likelihood(mutations: usize, seed: u64) -> Result<Outcome> {
    let n = 10;
    let shape = ArrayShape::new(vec![n, n])?;
    let hp = HyperParams::new(1.0, 0.6, 0.05, 0.5)?;
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < mutations {
        let truth = prior::sample_partition_direct(&shape, &hp, &mut rng);
        let synth = generate_from_partition(truth, hp.gamma, false, &mut rng)?;
        let mut mask = BinaryMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                mask.set(i, j, rng.random::<f64>() < 0.8);
            }
        }
        let start = prior::sample_partition_direct(&shape, &hp, &mut rng);
        let mut snap = ModelSnapshot::with_identity(start, hp.gamma);
        use rand::seq::SliceRandom;
        snap.row_perm.shuffle(&mut rng);
        snap.col_perm.shuffle(&mut rng);
        let mut state = RelationalState::from_snapshot(synth.data, mask, snap)?;
        for _ in 0..50.min(mutations - done) {
            let change = random_change(&state, &mut rng);
            let before = state.log_likelihood_full();
            let predicted = state.delta_log_likelihood(&change)?;
            let applied = state.apply(change)?;
            let full = state.log_likelihood_full() - before;
            worst = worst.max((predicted - full).abs()).max((applied - full).abs());
            worst = worst.max((state.log_likelihood() - state.log_likelihood_full()).abs());
            done += 1;
        }
    }
    Ok(Outcome::new(
        "incremental_likelihood",
        worst < 1e-9,
        format!("{mutations} mutations, max discrepancy {worst:.2e}"),
        &[("max_abs_diff", worst)],
    ))
}

/// Settings for [`synthetic_recovery`].
#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub size: usize,
    /// Planted boxes, 1-based starts and lengths.
    pub planted: Vec<([usize; 2], [usize; 2])>,
    /// Link probability inside a single planted box.
    pub inside: f64,
    pub holdout: f64,
    pub seeds: Vec<u64>,
    pub chain: ChainConfig,
    pub min_auc: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let chain = ChainConfig {
            iterations: 500,
            hp: HyperParams {
                tau: 1.0,
                theta: 0.95,
                gamma: 2e-4,
                p_birth: 0.5,
            },
            smc: SmcConfig {
                particles: 5,
                stages: Some(100),
                ..SmcConfig::default()
            },
            record_wallclock: false,
            ..ChainConfig::default()
        };
        Self {
            size: 100,
            planted: vec![([1, 1], [30, 30]), ([36, 31], [30, 30]), ([71, 66], [30, 35])],
            inside: 0.6,
            holdout: 0.1,
            seeds: vec![1, 2, 3],
            chain,
            min_auc: 0.85,
        }
    }
}

/// Planted partition and data for one seed of [`synthetic_recovery`].
pub fn planted_data(cfg: &SyntheticConfig, seed: u64) -> Result<crate::relmodel::Synthetic> {
    let shape = ArrayShape::new(vec![cfg.size, cfg.size])?;
    let hp = &cfg.chain.hp;
    let x = sigma_inverse(cfg.inside);
    // each box alone reaches the target link probability
    let patches = cfg
        .planted
        .iter()
        .map(|(s, l)| {
            let rect = Rect::new(&shape, s.to_vec(), l.to_vec())?;
            let cost = x * rect.volume() as f64 * hp.gamma;
            Patch::new(rect, cost)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = patches.iter().map(|p| p.cost).sum();
    if total > hp.tau {
        return Err(SppError::InvalidParameter(format!(
            "planted costs sum to {total}, above tau {}",
            hp.tau
        )));
    }
    let part = Partition::new(shape, hp.tau, patches)?;
    generate_from_partition(part, hp.gamma, false, &mut stream(seed, 0))
}

/// Held-out AUC of a chain fitted to one data set.
pub fn holdout_auc(data: &BinaryMatrix, holdout: f64, split_seed: u64, chain: &ChainConfig) -> Result<f64> {
    let split = make_split(data, holdout, split_seed)?;
    let state = RelationalState::new(data.clone(), split.train_mask.clone(), chain.hp.tau, chain.hp.gamma)?;
    let out = crate::mcmc::run_chain(state, chain, |_, _| Ok(()))?;
    let samples: Vec<ModelSnapshot> = out.samples.into_iter().map(|(_, s)| s).collect();
    let scores = predict(&samples, &split.test)?;
    auc(&scores, &split.labels)
}

/// Fits shuffled planted data and scores held-out cells, averaged over
/// seeds. The planted model's own AUC on the same cells is reported as a
/// ceiling.
pub fn synthetic_recovery(cfg: &SyntheticConfig) -> Result<Outcome> {
    let mut aucs = Vec::new();
    let mut named = Vec::new();
    for &seed in &cfg.seeds {
        let synth = planted_data(cfg, seed)?;
        let mut chain = cfg.chain.clone();
        chain.seed = seed;
        let a = holdout_auc(&synth.data, cfg.holdout, seed, &chain)?;
        let split = make_split(&synth.data, cfg.holdout, seed)?;
        let ceiling = auc(&predict(std::slice::from_ref(&synth.truth), &split.test)?, &split.labels)?;
        named.push((format!("auc_seed_{seed}"), a));
        named.push((format!("planted_auc_seed_{seed}"), ceiling));
        aucs.push(a);
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    let listed: Vec<String> = aucs.iter().map(|a| format!("{a:.4}")).collect();
    let o = Outcome::new(
        "synthetic_recovery",
        mean >= cfg.min_auc,
        format!("held-out AUC {} (mean {mean:.4}, threshold {})", listed.join(", "), cfg.min_auc),
        &[("mean_auc", mean)],
    );
    Ok(with_extra(o, named))
}

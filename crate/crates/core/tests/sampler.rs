//! Kernel-level exactness on targets small enough to enumerate.

use spp::mcmc::{run_chain, ChainConfig, MoveSet, MtmAcceptance, MtmConfig, Sampler, SmcConfig};
use spp::prior::{self, HyperParams};
use spp::relmodel::{BinaryMatrix, ModelSnapshot, RelationalState};
use spp::rng::seeded;
use spp::stats::chi_square_gof;
use spp::{ArrayShape, Partition, Patch, Rect};

/// Every permutation of `0..n`, sorted.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

fn only(moves: &str) -> MoveSet {
    MoveSet {
        birth_death: moves.contains('b'),
        cost: moves.contains('m'),
        csmc: moves.contains('s'),
        mtm_rows: moves.contains('r'),
        mtm_cols: moves.contains('c'),
        force_reject: false,
    }
}

fn one_patch_state(n: usize, rect: (Vec<usize>, Vec<usize>), observed: bool) -> RelationalState {
    let shape = ArrayShape::new(vec![n, n]).unwrap();
    let patch = Patch::new(Rect::new(&shape, rect.0, rect.1).unwrap(), 0.4).unwrap();
    let part = Partition::new(shape, 0.5, vec![patch]).unwrap();
    let snap = ModelSnapshot::with_identity(part, 0.05);
    let mut data = BinaryMatrix::zeros(n, n);
    for i in 0..n {
        data.set(i, (i * 3) % n, true);
    }
    RelationalState::from_snapshot(data, BinaryMatrix::filled(n, n, observed), snap).unwrap()
}

#[test]
fn flat_csmc_recovers_box_prior() {
    let n = 6;
    let theta = 0.6;
    let state = one_patch_state(n, (vec![2, 3], vec![2, 1]), false);
    let cfg = ChainConfig {
        iterations: 1,
        hp: HyperParams::new(0.5, theta, 0.05, 0.5).unwrap(),
        seed: 5,
        moves: only("s"),
        record_wallclock: false,
        ..ChainConfig::default()
    };
    let mut sampler = Sampler::new(state, cfg).unwrap();
    let cells = prior::position_count(n);
    let mut counts = [vec![0u64; cells], vec![0u64; cells]];
    for _ in 0..20_000 {
        sampler.step().unwrap();
        let r = &sampler.state().partition().patches[0].rect;
        for (d, c) in counts.iter_mut().enumerate() {
            c[prior::position_index(n, r.start_at(d), r.len_at(d))] += 1;
        }
    }
    let pmf = prior::direct_position_pmf(n, theta).unwrap();
    let mut probs = vec![0.0; cells];
    for (&(s, l), &p) in &pmf.0 {
        probs[prior::position_index(n, s, l)] = p;
    }
    for c in &counts {
        let t = chi_square_gof(c, &probs);
        assert!(t.passes(0.01), "p = {}", t.p_value);
    }
}

#[test]
fn flat_mtm_is_uniform_over_positions() {
    let n = 6;
    let state = one_patch_state(n, (vec![1, 1], vec![3, 3]), false);
    let cfg = ChainConfig {
        iterations: 1,
        seed: 9,
        hp: HyperParams::new(0.5, 0.5, 0.05, 0.5).unwrap(),
        moves: only("r"),
        record_wallclock: false,
        ..ChainConfig::default()
    };
    let mut sampler = Sampler::new(state, cfg).unwrap();
    let mut counts = vec![0u64; n];
    for _ in 0..12_000 {
        sampler.step().unwrap();
        counts[sampler.state().row_position(0)] += 1;
    }
    assert_eq!(sampler.counters().mtm_row.0, sampler.counters().mtm_row.1);
    let t = chi_square_gof(&counts, &vec![1.0 / n as f64; n]);
    assert!(t.passes(0.01), "p = {}", t.p_value);
}

/// Stationary frequencies of row permutations on a 4-row state with every
/// cell observed, against the enumerated posterior.
fn mtm_permutation_test(acceptance: MtmAcceptance) -> f64 {
    let n = 4;
    let shape = ArrayShape::new(vec![n, 5]).unwrap();
    let patch = Patch::new(Rect::new(&shape, vec![1, 1], vec![2, 3]).unwrap(), 0.2).unwrap();
    let part = Partition::new(shape, 0.5, vec![patch]).unwrap();
    let mut data = BinaryMatrix::zeros(n, 5);
    for (i, j) in [(0, 0), (0, 1), (2, 2), (3, 0), (2, 1), (1, 4)] {
        data.set(i, j, true);
    }
    let mask = BinaryMatrix::filled(n, 5, true);
    let perms = permutations(n);
    let logs: Vec<f64> = perms
        .iter()
        .map(|p| {
            let mut snap = ModelSnapshot::with_identity(part.clone(), 0.05);
            snap.row_perm = p.clone();
            RelationalState::from_snapshot(data.clone(), mask.clone(), snap)
                .unwrap()
                .log_likelihood()
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let probs: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();

    let state = RelationalState::from_snapshot(data, mask, ModelSnapshot::with_identity(part, 0.05)).unwrap();
    let cfg = ChainConfig {
        iterations: 1,
        seed: 17,
        hp: HyperParams::new(0.5, 0.5, 0.05, 0.5).unwrap(),
        mtm: MtmConfig {
            proposals: 3,
            acceptance,
        },
        moves: only("r"),
        record_wallclock: false,
        ..ChainConfig::default()
    };
    let mut sampler = Sampler::new(state, cfg).unwrap();
    let mut counts = vec![0u64; perms.len()];
    for _ in 0..30_000 {
        sampler.step().unwrap();
        let p = sampler.state().row_perm().to_vec();
        counts[perms.binary_search(&p).unwrap()] += 1;
    }
    chi_square_gof(&counts, &probs).p_value
}

#[test]
fn balanced_mtm_targets_permutation_posterior() {
    let p = mtm_permutation_test(MtmAcceptance::Balanced);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn literal_mtm_misses_permutation_posterior() {
    let p = mtm_permutation_test(MtmAcceptance::Literal);
    assert!(p < 1e-6, "p = {p}");
}

#[test]
fn csmc_matches_enumerated_posterior_on_small_grid() {
    // 4x4 holds 100 boxes; a weak signal keeps the posterior spread out
    let n = 4;
    let theta = 0.5;
    let shape = ArrayShape::new(vec![n, n]).unwrap();
    let mut data = BinaryMatrix::zeros(n, n);
    for (i, j) in [(0, 0), (0, 1), (1, 1), (2, 3)] {
        data.set(i, j, true);
    }
    let patch = Patch::new(Rect::new(&shape, vec![1, 1], vec![2, 2]).unwrap(), 0.3).unwrap();
    let part = Partition::new(shape.clone(), 0.5, vec![patch]).unwrap();
    let state =
        RelationalState::from_snapshot(data, BinaryMatrix::filled(n, n, true), ModelSnapshot::with_identity(part, 0.5))
            .unwrap();
    let mut boxes = Vec::new();
    let mut logs = Vec::new();
    for s0 in 1..=n {
        for l0 in 1..=n - s0 + 1 {
            for s1 in 1..=n {
                for l1 in 1..=n - s1 + 1 {
                    let rect = Rect::new(&shape, vec![s0, s1], vec![l0, l1]).unwrap();
                    let d = state
                        .delta_log_likelihood(&spp::relmodel::Change::Move {
                            index: 0,
                            rect: rect.clone(),
                        })
                        .unwrap();
                    logs.push(prior::rect_log_prob(&shape, &rect, theta) + d);
                    boxes.push(rect);
                }
            }
        }
    }
    let probs: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let cfg = ChainConfig {
        iterations: 1,
        seed: 23,
        hp: HyperParams::new(0.5, theta, 0.5, 0.5).unwrap(),
        smc: SmcConfig {
            particles: 4,
            ..SmcConfig::default()
        },
        moves: only("s"),
        record_wallclock: false,
        ..ChainConfig::default()
    };
    let mut sampler = Sampler::new(state, cfg).unwrap();
    let mut counts = vec![0u64; boxes.len()];
    for _ in 0..40_000 {
        sampler.step().unwrap();
        let r = &sampler.state().partition().patches[0].rect;
        counts[boxes.iter().position(|b| b == r).unwrap()] += 1;
    }
    // rare boxes are entered in bursts, so a chi-square on correlated draws
    // overstates the evidence; total variation is the stable summary
    let z: f64 = probs.iter().sum();
    let total = counts.iter().sum::<u64>() as f64;
    let tv = counts.iter().zip(&probs).map(|(&c, &p)| (c as f64 / total - p / z).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "tv = {tv}");
}

#[test]
fn forced_reject_keeps_initial_state() {
    let state = one_patch_state(6, (vec![2, 2], vec![3, 2]), true);
    let before = state.snapshot();
    let moves = MoveSet {
        force_reject: true,
        ..MoveSet::default()
    };
    let cfg = ChainConfig {
        iterations: 1,
        burn_in: Some(0),
        thin: 1,
        hp: HyperParams::new(0.5, 0.5, 0.05, 0.5).unwrap(),
        moves,
        record_wallclock: false,
        ..ChainConfig::default()
    };
    let out = run_chain(state, &cfg, |_, _| Ok(())).unwrap();
    assert_eq!(out.samples.len(), 1);
    assert_eq!(out.samples[0].1, before);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let shape = ArrayShape::new(vec![20, 20]).unwrap();
    let hp = HyperParams::new(1.0, 0.8, 0.01, 0.5).unwrap();
    let synth = spp::relmodel::generate_synthetic(&shape, &hp, false, &mut seeded(2)).unwrap();
    let run = |workers| {
        let cfg = ChainConfig {
            iterations: 60,
            hp,
            seed: 4,
            workers,
            record_wallclock: false,
            ..ChainConfig::default()
        };
        let state = RelationalState::new(synth.data.clone(), BinaryMatrix::filled(20, 20, true), 1.0, 0.01).unwrap();
        let out = run_chain(state, &cfg, |_, _| Ok(())).unwrap();
        (out.trace, out.samples)
    };
    let (t1, s1) = run(1);
    let (t4, s4) = run(4);
    assert_eq!(t1, t4);
    assert_eq!(s1, s4);
}

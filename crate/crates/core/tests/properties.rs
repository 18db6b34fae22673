//! Structural invariants over randomly drawn inputs.

use proptest::prelude::*;

use spp::io::persist::{model_from_json, model_to_json, samples_from_json, samples_to_json};
use spp::io::{auc, make_split, PosteriorSamples, SavedModel};
use spp::prior::{sample_partition_direct, HyperParams};
use spp::projection::{project_partition, project_rect, SubArraySpec};
use spp::relmodel::{BinaryMatrix, ModelSnapshot, RelationalState};
use spp::rng::seeded;
use spp::ArrayShape;

fn shape_and_window() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>)> {
    // outer dims, first offset/inner, second offset/inner nested inside the first
    prop::collection::vec(2usize..9, 2).prop_flat_map(|outer| {
        let first = outer
            .iter()
            .map(|&n| (0..n).prop_flat_map(move |o| (Just(o), 1..=n - o)))
            .collect::<Vec<_>>();
        (Just(outer), first).prop_flat_map(|(outer, first)| {
            let second = first
                .iter()
                .map(|&(_, m)| (0..m).prop_flat_map(move |o| (Just(o), 1..=m - o)))
                .collect::<Vec<_>>();
            (Just(outer), Just(first), second).prop_map(|(outer, first, second)| {
                let (o1, i1): (Vec<usize>, Vec<usize>) = first.into_iter().unzip();
                let (o2, i2): (Vec<usize>, Vec<usize>) = second.into_iter().unzip();
                (outer, [o1, i1].concat(), o2, i2)
            })
        })
    })
}

fn hp() -> HyperParams {
    HyperParams::new(1.5, 0.7, 0.05, 0.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_composes((outer, first, o2, i2) in shape_and_window(), seed in any::<u64>()) {
        let nd = outer.len();
        let y = ArrayShape::new(outer).unwrap();
        let a = SubArraySpec::new(y.clone(), first[..nd].to_vec(), first[nd..].to_vec()).unwrap();
        let b = SubArraySpec::new(a.inner().clone(), o2, i2).unwrap();
        let ab = a.then(&b).unwrap();
        let part = sample_partition_direct(&y, &hp(), &mut seeded(seed));
        let two_step = project_partition(&project_partition(&part, &a).unwrap(), &b).unwrap();
        let direct = project_partition(&part, &ab).unwrap();
        prop_assert_eq!(two_step.patches.len(), direct.patches.len());
        for (p, q) in two_step.patches.iter().zip(&direct.patches) {
            prop_assert_eq!(&p.rect, &q.rect);
            prop_assert!((p.cost - q.cost).abs() < 1e-12);
        }
        for p in &part.patches {
            prop_assert_eq!(
                project_rect(&p.rect, &a).and_then(|r| project_rect(&r, &b)),
                project_rect(&p.rect, &ab)
            );
        }
    }

    #[test]
    fn projection_stays_within_budget((outer, first, _, _) in shape_and_window(), seed in any::<u64>()) {
        let nd = outer.len();
        let y = ArrayShape::new(outer).unwrap();
        let a = SubArraySpec::new(y.clone(), first[..nd].to_vec(), first[nd..].to_vec()).unwrap();
        let part = sample_partition_direct(&y, &hp(), &mut seeded(seed));
        let proj = project_partition(&part, &a).unwrap();
        prop_assert!(proj.validate().is_ok());
        prop_assert!(proj.patches.len() <= part.patches.len());
        prop_assert!(proj.total_cost() <= part.total_cost() + 1e-12);
        // identity keeps every patch; costs pass through cumulative times
        let full = project_partition(&part, &SubArraySpec::identity(y)).unwrap();
        prop_assert_eq!(full.patches.len(), part.patches.len());
        for (p, q) in full.patches.iter().zip(&part.patches) {
            prop_assert_eq!(&p.rect, &q.rect);
            prop_assert!((p.cost - q.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn rect_intersection_is_cellwise(seed in any::<u64>()) {
        let y = ArrayShape::new(vec![5, 6]).unwrap();
        let part = sample_partition_direct(&y, &HyperParams::new(3.0, 0.7, 0.05, 0.5).unwrap(), &mut seeded(seed));
        for a in &part.patches {
            for b in &part.patches {
                let cut = a.rect.intersect(&b.rect);
                prop_assert_eq!(cut.clone(), b.rect.intersect(&a.rect));
                for cell in y.cells() {
                    let both = a.rect.contains(&cell) && b.rect.contains(&cell);
                    prop_assert_eq!(both, cut.as_ref().is_some_and(|c| c.contains(&cell)));
                }
            }
        }
    }

    #[test]
    fn model_json_round_trips(seed in any::<u64>(), permuted in any::<bool>()) {
        let y = ArrayShape::new(vec![7, 9]).unwrap();
        let part = sample_partition_direct(&y, &hp(), &mut seeded(seed));
        let perms = permuted.then(|| ((0..7).rev().collect(), (0..9).map(|j| (j + 4) % 9).collect()));
        let model = SavedModel { partition: part, theta: 0.7, gamma: 0.05, perms };
        let back = model_from_json(&model_to_json(&model).unwrap()).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn samples_json_round_trips(seed in any::<u64>(), count in 1usize..5) {
        let y = ArrayShape::new(vec![6, 4]).unwrap();
        let mut rng = seeded(seed);
        let samples = (0..count)
            .map(|i| (i * 10 + 1, ModelSnapshot::with_identity(sample_partition_direct(&y, &hp(), &mut rng), 0.05)))
            .collect();
        let s = PosteriorSamples { hp: hp(), shape: y, nodes: None, samples };
        let back = samples_from_json(&samples_to_json(&s).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn auc_matches_pair_count(scores in prop::collection::vec(0u8..6, 2..40), labels in prop::collection::vec(any::<bool>(), 40)) {
        let labels = &labels[..scores.len()];
        let scores: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        match auc(&scores, labels) {
            Ok(a) => prop_assert!((a - wins / pairs).abs() < 1e-12),
            Err(_) => prop_assert_eq!(pairs, 0.0),
        }
    }

    #[test]
    fn split_partitions_cells(seed in any::<u64>(), ratio in 0.0f64..0.9) {
        let mut r = BinaryMatrix::zeros(6, 7);
        for i in 0..6 {
            r.set(i, (i * 5) % 7, true);
        }
        let split = make_split(&r, ratio, seed).unwrap();
        prop_assert_eq!(split.test.len(), (ratio * 42.0).floor() as usize);
        let held = split.train_mask.rows() * split.train_mask.cols() - split.train_mask.count_ones();
        prop_assert_eq!(held, split.test.len());
        for (&(i, j), &l) in split.test.iter().zip(&split.labels) {
            prop_assert!(!split.train_mask.get(i, j));
            prop_assert_eq!(l, r.get(i, j));
        }
    }

    #[test]
    fn cached_likelihood_matches_full(seed in any::<u64>()) {
        let y = ArrayShape::new(vec![8, 8]).unwrap();
        let par = HyperParams::new(1.0, 0.7, 0.2, 0.5).unwrap();
        let synth = spp::relmodel::generate_synthetic(&y, &par, false, &mut seeded(seed)).unwrap();
        let state = RelationalState::from_snapshot(synth.data, BinaryMatrix::filled(8, 8, true), synth.truth).unwrap();
        prop_assert!((state.log_likelihood() - state.log_likelihood_full()).abs() < 1e-9);
    }
}

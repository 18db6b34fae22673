//! Prior samplers and probability mass functions.
//!
//! Two constructions are provided. The candidate construction draws
//! `Poisson(τ·S_X)` candidate boxes with uniform starts and discards the
//! empty ones. The direct construction thins the Poisson process up front and
//! draws each nonempty box from `start_pmf × length_pmf`. They agree in
//! distribution; [`candidate_position_pmf`] and [`direct_position_pmf`] give
//! the exact per-dimension tables used to check it.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SppError};
use crate::grid::{ArrayShape, Partition, Patch, Rect};
use crate::rng::{open_closed_unit, SppRng};

/// Model hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Budget `τ`.
    pub tau: f64,
    /// Side-length persistence `θ`.
    pub theta: f64,
    /// Rate scale `γ` of the relational model.
    pub gamma: f64,
    /// Birth proposal probability `P_0`.
    pub p_birth: f64,
}

impl HyperParams {
    pub fn new(tau: f64, theta: f64, gamma: f64, p_birth: f64) -> Result<Self> {
        let hp = Self {
            tau,
            theta,
            gamma,
            p_birth,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(SppError::InvalidParameter(format!("{what} = {v}")));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", self.tau);
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta", self.theta);
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", self.gamma);
        }
        if !(self.p_birth > 0.0 && self.p_birth < 1.0) {
            return bad("p_birth", self.p_birth);
        }
        Ok(())
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            theta: 0.99,
            gamma: 1e-2,
            p_birth: 0.5,
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(SppError::InvalidParameter(format!("theta = {theta}")))
    }
}

/// Normalizer `θ + (1−θ)N` of the start law.
fn start_normalizer(n: usize, theta: f64) -> f64 {
    theta + (1.0 - theta) * n as f64
}

/// Law of the initial position of a nonempty patch: proportional to
/// `{1, 1−θ, …, 1−θ}` over `{1..N}`.
pub fn start_pmf(n: usize, theta: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(SppError::InvalidShape("dimension length 0".into()));
    }
    check_theta(theta)?;
    let z = start_normalizer(n, theta);
    let mut pmf = vec![(1.0 - theta) / z; n];
    pmf[0] = 1.0 / z;
    Ok(pmf)
}

/// Side-length law for a patch starting at `s`: `θ^{l−1}(1−θ)` below the
/// boundary length `L* = N−s+1`, and `θ^{L*−1}` at it. Index `l−1` holds `P(l)`.
pub fn length_pmf(n: usize, s: usize, theta: f64) -> Result<Vec<f64>> {
    if s == 0 || s > n {
        return Err(SppError::OutOfRange(format!("start {s} not in 1..={n}")));
    }
    check_theta(theta)?;
    let l_max = n - s + 1;
    Ok((1..=l_max).map(|l| length_prob(l, l_max, theta)).collect())
}

#[inline]
fn length_prob(l: usize, l_max: usize, theta: f64) -> f64 {
    // powi(0) is exactly 1, including for θ = 0
    let grow = theta.powi(l as i32 - 1);
    if l < l_max {
        grow * (1.0 - theta)
    } else {
        grow
    }
}

/// `P(l^(d) > 0)` for a candidate patch in one dimension of length `n`.
pub fn survival_prob(n: usize, theta: f64) -> f64 {
    start_normalizer(n, theta) / n as f64
}

/// Probability that a candidate patch is nonempty, `∏_d (1/N)[θ+(1−θ)N]`.
pub fn nonempty_prob(shape: &ArrayShape, theta: f64) -> f64 {
    shape.dims().iter().map(|&n| survival_prob(n, theta)).product()
}

/// `E(l^(d)) = N / (θ + (1−θ)N)`.
pub fn expected_length(n: usize, theta: f64) -> f64 {
    n as f64 / start_normalizer(n, theta)
}

/// `E(K_τ) = τ ∏_d [θ+(1−θ)N^(d)]`.
pub fn expected_count(shape: &ArrayShape, tau: f64, theta: f64) -> f64 {
    tau * shape
        .dims()
        .iter()
        .map(|&n| start_normalizer(n, theta))
        .product::<f64>()
}

/// Log prior probability of a nonempty box under the direct construction.
pub fn rect_log_prob(shape: &ArrayShape, rect: &Rect, theta: f64) -> f64 {
    (0..shape.ndim())
        .map(|d| {
            let n = shape.len(d);
            let (s, l) = (rect.start_at(d), rect.len_at(d));
            let z = start_normalizer(n, theta);
            let ps = if s == 1 { 1.0 } else { 1.0 - theta } / z;
            (ps * length_prob(l, n - s + 1, theta)).ln()
        })
        .sum()
}

pub(crate) fn sample_start(n: usize, theta: f64, rng: &mut SppRng) -> usize {
    let z = start_normalizer(n, theta);
    if n == 1 || rng.random::<f64>() * z < 1.0 {
        1
    } else {
        rng.random_range(2..=n)
    }
}

/// Draws from [`length_pmf`] by inverting the geometric tail `P(l ≥ j) = θ^{j−1}`.
pub(crate) fn sample_length(n: usize, s: usize, theta: f64, rng: &mut SppRng) -> usize {
    let l_max = n - s + 1;
    if l_max == 1 || theta == 0.0 {
        return 1;
    }
    if theta == 1.0 {
        return l_max;
    }
    let u = open_closed_unit(rng);
    let extra = (u.ln() / theta.ln()).floor();
    if extra >= (l_max - 1) as f64 {
        l_max
    } else {
        1 + extra as usize
    }
}

/// One candidate patch: uniform start, survival `1−θ` away from the first
/// position, then [`length_pmf`]. `None` when the candidate is empty.
pub fn sample_candidate_patch(shape: &ArrayShape, theta: f64, rng: &mut SppRng) -> Option<Rect> {
    let mut start = Vec::with_capacity(shape.ndim());
    let mut len = Vec::with_capacity(shape.ndim());
    for &n in shape.dims() {
        let s = rng.random_range(1..=n);
        if s > 1 && rng.random::<f64>() >= 1.0 - theta {
            return None;
        }
        start.push(s);
        len.push(sample_length(n, s, theta, rng));
    }
    Some(Rect::from_parts(start, len))
}

/// One nonempty patch from `start_pmf × length_pmf`.
pub fn sample_direct_patch(shape: &ArrayShape, theta: f64, rng: &mut SppRng) -> Rect {
    let mut start = Vec::with_capacity(shape.ndim());
    let mut len = Vec::with_capacity(shape.ndim());
    for &n in shape.dims() {
        let s = sample_start(n, theta, rng);
        start.push(s);
        len.push(sample_length(n, s, theta, rng));
    }
    Rect::from_parts(start, len)
}

/// Exact Poisson draw. A zero mean yields zero.
pub fn sample_poisson(mean: f64, rng: &mut SppRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // rand_distr uses inversion for small means and exact rejection above
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Gaps between `k` sorted uniform time points on `(0, τ]`.
pub fn sample_costs(k: usize, tau: f64, rng: &mut SppRng) -> Vec<f64> {
    loop {
        let mut times: Vec<f64> = (0..k).map(|_| tau * open_closed_unit(rng)).collect();
        times.sort_by(f64::total_cmp);
        let costs = Partition::costs_from_times(&times);
        // ties have probability zero but would give a zero cost
        if costs.iter().all(|&m| m > 0.0) {
            return costs;
        }
    }
}

fn attach_costs(shape: &ArrayShape, tau: f64, rects: Vec<Rect>, rng: &mut SppRng) -> Partition {
    let costs = sample_costs(rects.len(), tau, rng);
    let patches = rects
        .into_iter()
        .zip(costs)
        .map(|(rect, cost)| Patch { rect, cost })
        .collect();
    Partition {
        shape: shape.clone(),
        tau,
        patches,
    }
}

/// Candidate construction: `Poisson(τ·S_X)` candidates, empties discarded.
pub fn sample_partition_candidate(shape: &ArrayShape, hp: &HyperParams, rng: &mut SppRng) -> Partition {
    let candidates = sample_poisson(hp.tau * shape.volume() as f64, rng);
    let rects: Vec<Rect> = (0..candidates)
        .filter_map(|_| sample_candidate_patch(shape, hp.theta, rng))
        .collect();
    attach_costs(shape, hp.tau, rects, rng)
}

/// Direct construction: `Poisson(τ·S_X·P(S_□>0))` nonempty patches.
pub fn sample_partition_direct(shape: &ArrayShape, hp: &HyperParams, rng: &mut SppRng) -> Partition {
    let mean = hp.tau * shape.volume() as f64 * nonempty_prob(shape, hp.theta);
    let k = sample_poisson(mean, rng);
    let rects = (0..k).map(|_| sample_direct_patch(shape, hp.theta, rng)).collect();
    attach_costs(shape, hp.tau, rects, rng)
}

/// Both sides of the expected covered-volume identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumeIdentity {
    /// `τ·S_X`.
    pub budget_volume: f64,
    /// `E(K_τ)`.
    pub expected_count: f64,
    /// `E(l^(d))` per dimension.
    pub expected_lengths: Vec<f64>,
    /// `E(K_τ)·∏ E(l^(d))`.
    pub from_components: f64,
}

impl VolumeIdentity {
    pub fn relative_gap(&self) -> f64 {
        ((self.from_components - self.budget_volume) / self.budget_volume).abs()
    }
}

pub fn expected_total_volume(shape: &ArrayShape, hp: &HyperParams) -> VolumeIdentity {
    let expected_count = expected_count(shape, hp.tau, hp.theta);
    let expected_lengths: Vec<f64> = shape
        .dims()
        .iter()
        .map(|&n| expected_length(n, hp.theta))
        .collect();
    VolumeIdentity {
        budget_volume: hp.tau * shape.volume() as f64,
        expected_count,
        from_components: expected_count * expected_lengths.iter().product::<f64>(),
        expected_lengths,
    }
}

/// Exact pmf over `(s, l)` pairs in one dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PositionPmf(pub BTreeMap<(usize, usize), f64>);

impl PositionPmf {
    pub fn get(&self, s: usize, l: usize) -> f64 {
        self.0.get(&(s, l)).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, s: usize, l: usize, p: f64) {
        *self.0.entry((s, l)).or_insert(0.0) += p;
    }

    pub fn mass(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn normalized(mut self) -> Self {
        let z = self.mass();
        self.0.values_mut().for_each(|p| *p /= z);
        self
    }

    pub fn total_variation(&self, other: &PositionPmf) -> f64 {
        let keys: std::collections::BTreeSet<_> = self.0.keys().chain(other.0.keys()).collect();
        0.5 * keys
            .into_iter()
            .map(|&(s, l)| (self.get(s, l) - other.get(s, l)).abs())
            .sum::<f64>()
    }

    /// `E(l)` under this pmf.
    pub fn mean_length(&self) -> f64 {
        self.0.iter().map(|(&(_, l), &p)| l as f64 * p).sum()
    }
}

/// Index of `(s, l)` in the triangular table of one dimension of length `n`,
/// ordered by start then length.
pub fn position_index(n: usize, s: usize, l: usize) -> usize {
    // starts s = 1..n hold n, n-1, ..., 1 lengths
    let before: usize = (1..s).map(|r| n - r + 1).sum();
    before + l - 1
}

/// Number of `(s, l)` pairs in one dimension of length `n`.
pub fn position_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `start_pmf × length_pmf` in one dimension.
pub fn direct_position_pmf(n: usize, theta: f64) -> Result<PositionPmf> {
    let starts = start_pmf(n, theta)?;
    let mut pmf = PositionPmf::default();
    for (i, &ps) in starts.iter().enumerate() {
        let s = i + 1;
        for (j, &pl) in length_pmf(n, s, theta)?.iter().enumerate() {
            pmf.add(s, j + 1, ps * pl);
        }
    }
    Ok(pmf)
}

/// The candidate construction in one dimension, enumerated step by step:
/// uniform start, survival, then the growth chain that extends with
/// probability `θ` and is absorbed at the boundary. Returns the unnormalized
/// pmf over nonempty outcomes; its mass is `P(l > 0)`.
pub fn candidate_position_pmf(n: usize, theta: f64) -> Result<PositionPmf> {
    if n == 0 {
        return Err(SppError::InvalidShape("dimension length 0".into()));
    }
    check_theta(theta)?;
    let mut pmf = PositionPmf::default();
    for s in 1..=n {
        let survive = if s == 1 { 1.0 } else { 1.0 - theta };
        let mut alive = survive / n as f64;
        let l_max = n - s + 1;
        for l in 1..=l_max {
            if l == l_max {
                pmf.add(s, l, alive);
            } else {
                pmf.add(s, l, alive * (1.0 - theta));
                alive *= theta;
            }
        }
    }
    Ok(pmf)
}

/// Product of per-dimension pmfs as a joint table keyed by the per-dimension
/// `(s, l)` tuples.
pub fn joint_pmf(per_dim: &[PositionPmf]) -> BTreeMap<Vec<(usize, usize)>, f64> {
    let mut joint: BTreeMap<Vec<(usize, usize)>, f64> = BTreeMap::new();
    joint.insert(Vec::new(), 1.0);
    for pmf in per_dim {
        let mut next = BTreeMap::new();
        for (key, p) in &joint {
            for (&sl, &q) in &pmf.0 {
                let mut k = key.clone();
                k.push(sl);
                next.insert(k, p * q);
            }
        }
        joint = next;
    }
    joint
}

/// Total variation between two joint tables.
pub fn joint_total_variation(
    a: &BTreeMap<Vec<(usize, usize)>, f64>,
    b: &BTreeMap<Vec<(usize, usize)>, f64>,
) -> f64 {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// TV between the candidate construction conditioned on nonemptiness and the
/// direct construction, over the full joint position table of `shape`.
pub fn construction_tv(shape: &ArrayShape, theta: f64) -> Result<f64> {
    let mut candidate = Vec::new();
    let mut direct = Vec::new();
    for &n in shape.dims() {
        candidate.push(candidate_position_pmf(n, theta)?);
        direct.push(direct_position_pmf(n, theta)?);
    }
    let mut cand_joint = joint_pmf(&candidate);
    let z: f64 = cand_joint.values().sum();
    cand_joint.values_mut().for_each(|p| *p /= z);
    Ok(joint_total_variation(&cand_joint, &joint_pmf(&direct)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn start_pmf_examples() {
        assert_eq!(start_pmf(1, 0.3).unwrap(), vec![1.0]);
        let p = start_pmf(3, 0.5).unwrap();
        assert_eq!(p, vec![0.5, 0.25, 0.25]);
        assert_eq!(start_pmf(4, 1.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(start_pmf(0, 0.5).is_err());
    }

    #[test]
    fn length_pmf_examples() {
        assert_eq!(length_pmf(3, 1, 0.5).unwrap(), vec![0.5, 0.25, 0.25]);
        assert_eq!(length_pmf(5, 5, 0.7).unwrap(), vec![1.0]);
        let p = length_pmf(6, 2, 0.0).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&x| x == 0.0));
        assert!(length_pmf(3, 4, 0.5).is_err());
        assert!(length_pmf(3, 0, 0.5).is_err());
    }

    #[test]
    fn pmfs_sum_to_one() {
        for n in 1..=40 {
            for &theta in &[0.0, 0.1, 0.5, 0.9, 0.99, 1.0] {
                let s: f64 = start_pmf(n, theta).unwrap().iter().sum();
                assert!(close(s, 1.0, n as f64 * f64::EPSILON), "{n} {theta} {s}");
                for start in 1..=n {
                    let l: f64 = length_pmf(n, start, theta).unwrap().iter().sum();
                    assert!(close(l, 1.0, n as f64 * f64::EPSILON));
                }
            }
        }
    }

    #[test]
    fn nonempty_prob_examples() {
        let s = ArrayShape::new(vec![4, 7]).unwrap();
        assert_eq!(nonempty_prob(&s, 0.0), 1.0);
        assert!(close(nonempty_prob(&ArrayShape::new(vec![2]).unwrap(), 0.5), 0.75, 1e-15));
        let big = ArrayShape::square(1000).unwrap();
        let theta_star = (0.99 + 1000.0 * 0.01f64).powi(2) / 1e6;
        assert!(close(nonempty_prob(&big, 0.99), theta_star, 1e-18));
        assert!(close(nonempty_prob(&big, 0.99), 1.20780e-4, 1e-9));
    }

    #[test]
    fn empty_probability_by_enumeration() {
        // survive w.p. 1 from s=1 and 1-θ from s=2; average over the two starts
        let per_dim = (1.0 + 0.5) / 2.0;
        let p_empty = 1.0 - per_dim * per_dim;
        assert!(close(p_empty, 0.4375, 1e-15));
        let shape = ArrayShape::new(vec![2, 2]).unwrap();
        assert!(close(1.0 - nonempty_prob(&shape, 0.5), p_empty, 1e-15));
        let mass = candidate_position_pmf(2, 0.5).unwrap().mass();
        assert!(close(mass, 0.75, 1e-15));
    }

    #[test]
    fn candidate_sampler_edges() {
        let mut rng = seeded(7);
        let shape = ArrayShape::new(vec![5, 3]).unwrap();
        assert!((0..2000).all(|_| sample_candidate_patch(&shape, 0.0, &mut rng).is_some()));
        let unit = ArrayShape::new(vec![1, 1, 1]).unwrap();
        for _ in 0..100 {
            let r = sample_candidate_patch(&unit, 0.8, &mut rng).unwrap();
            assert_eq!(r, Rect::full(&unit));
        }
    }

    #[test]
    fn candidate_empty_rate_matches() {
        let mut rng = seeded(11);
        let shape = ArrayShape::new(vec![2, 2]).unwrap();
        let n = 200_000;
        let empties = (0..n)
            .filter(|_| sample_candidate_patch(&shape, 0.5, &mut rng).is_none())
            .count();
        let rate = empties as f64 / n as f64;
        let se = (0.4375f64 * 0.5625 / n as f64).sqrt();
        assert!((rate - 0.4375).abs() < 4.0 * se, "{rate}");
    }

    #[test]
    fn direct_joint_pmf_example() {
        let pmf = direct_position_pmf(3, 0.5).unwrap();
        let want = [
            ((1, 1), 0.25),
            ((1, 2), 0.125),
            ((1, 3), 0.125),
            ((2, 1), 0.125),
            ((2, 2), 0.125),
            ((3, 1), 0.25),
        ];
        assert_eq!(pmf.0.len(), want.len());
        for ((s, l), p) in want {
            assert!(close(pmf.get(s, l), p, 1e-15));
        }
        assert!(close(pmf.mean_length(), 1.5, 1e-15));
        assert!(close(expected_length(3, 0.5), 1.5, 1e-15));
    }

    #[test]
    fn constructions_agree_exactly() {
        for &theta in &[0.0, 0.3, 0.5, 0.9, 1.0] {
            for a in 1..=6 {
                let s1 = ArrayShape::new(vec![a]).unwrap();
                assert!(construction_tv(&s1, theta).unwrap() < 1e-12);
                for b in 1..=6 {
                    let s2 = ArrayShape::new(vec![a, b]).unwrap();
                    assert!(construction_tv(&s2, theta).unwrap() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn volume_identity_closed_form() {
        let shape = ArrayShape::new(vec![20, 30]).unwrap();
        for &theta in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            let hp = HyperParams::new(0.3, theta, 1.0, 0.5).unwrap();
            let v = expected_total_volume(&shape, &hp);
            assert!(close(v.budget_volume, 180.0, 1e-12));
            assert!(v.relative_gap() < 1e-12);
        }
        let hp = HyperParams::new(0.3, 1.0, 1.0, 0.5).unwrap();
        let v = expected_total_volume(&shape, &hp);
        assert!(close(v.expected_count, 0.3, 1e-15));
        assert_eq!(v.expected_lengths, vec![20.0, 30.0]);
        let hp = HyperParams::new(0.3, 0.0, 1.0, 0.5).unwrap();
        let v = expected_total_volume(&shape, &hp);
        assert!(close(v.expected_count, 180.0, 1e-12));
        assert_eq!(v.expected_lengths, vec![1.0, 1.0]);
    }

    #[test]
    fn sampled_lengths_follow_pmf() {
        let mut rng = seeded(3);
        let (n, s, theta) = (6, 2, 0.6);
        let pmf = length_pmf(n, s, theta).unwrap();
        let draws = 100_000;
        let mut counts = vec![0usize; pmf.len()];
        for _ in 0..draws {
            counts[sample_length(n, s, theta, &mut rng) - 1] += 1;
        }
        for (c, p) in counts.iter().zip(&pmf) {
            let f = *c as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((f - p).abs() < 5.0 * se + 1e-12, "{f} vs {p}");
        }
    }

    #[test]
    fn tiny_budget_gives_empty_partitions() {
        let mut rng = seeded(1);
        let shape = ArrayShape::new(vec![4, 4]).unwrap();
        let hp = HyperParams::new(1e-9, 0.5, 1.0, 0.5).unwrap();
        assert!((0..1000).all(|_| sample_partition_candidate(&shape, &hp, &mut rng).is_empty()));
    }

    #[test]
    fn costs_never_exceed_budget() {
        let mut rng = seeded(5);
        let shape = ArrayShape::new(vec![6, 5]).unwrap();
        let hp = HyperParams::new(0.7, 0.4, 1.0, 0.5).unwrap();
        for _ in 0..500 {
            for part in [
                sample_partition_candidate(&shape, &hp, &mut rng),
                sample_partition_direct(&shape, &hp, &mut rng),
            ] {
                part.validate().unwrap();
                if let Some(&t) = part.time_points().last() {
                    assert!(t <= hp.tau);
                }
            }
        }
    }

    #[test]
    fn hyper_params_validation() {
        assert!(HyperParams::new(0.0, 0.5, 1.0, 0.5).is_err());
        assert!(HyperParams::new(1.0, 1.5, 1.0, 0.5).is_err());
        assert!(HyperParams::new(1.0, 0.5, 0.0, 0.5).is_err());
        assert!(HyperParams::new(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(HyperParams::new(1.0, 0.0, 1.0, 0.5).is_ok());
        assert!(HyperParams::new(1.0, 1.0, 1.0, 0.5).is_ok());
    }

    #[test]
    fn rect_log_prob_matches_table() {
        let shape = ArrayShape::new(vec![4, 5]).unwrap();
        let theta = 0.35;
        let t0 = direct_position_pmf(4, theta).unwrap();
        let t1 = direct_position_pmf(5, theta).unwrap();
        for (&(s0, l0), &p0) in &t0.0 {
            for (&(s1, l1), &p1) in &t1.0 {
                let r = Rect::new(&shape, vec![s0, s1], vec![l0, l1]).unwrap();
                assert!(close(rect_log_prob(&shape, &r, theta), (p0 * p1).ln(), 1e-12));
            }
        }
    }
}

//! Restriction of partitions to sub-arrays and the consistency checks built
//! on it.
//!
//! A [`SubArraySpec`] places an inner array `X` inside an outer array `Y` at a
//! per-dimension offset. Projecting a patch intersects it with `X`; projecting
//! a partition drops patches that miss `X` and rebuilds the surviving costs
//! from their original generating times.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SppError};
use crate::grid::{ArrayShape, Partition, Patch, Rect};
use crate::prior::{self, position_index, HyperParams, PositionPmf};
use crate::rng::stream;
use crate::stats::{self, TestResult};

/// An axis-aligned sub-array `X` of an outer array `Y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubArraySpec {
    outer: ArrayShape,
    /// 0-based offset of `X` inside `Y`, per dimension.
    offset: Vec<usize>,
    inner: ArrayShape,
}

/// How `X` sits inside `Y` along one dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Alignment {
    /// Same extent.
    Equal,
    /// `X` and `Y` share the first position.
    SharedInitial,
    /// `X` and `Y` share the last position.
    SharedTerminal,
    /// Neither boundary is shared.
    Interior,
}

impl SubArraySpec {
    pub fn new(outer: ArrayShape, offset: Vec<usize>, inner_dims: Vec<usize>) -> Result<Self> {
        let inner = ArrayShape::new(inner_dims)?;
        if offset.len() != outer.ndim() || inner.ndim() != outer.ndim() {
            return Err(SppError::InvalidShape(
                "outer, offset and inner must have the same number of dimensions".into(),
            ));
        }
        for d in 0..outer.ndim() {
            if offset[d] + inner.len(d) > outer.len(d) {
                return Err(SppError::InvalidShape(format!(
                    "dimension {d}: offset {} + length {} exceeds {}",
                    offset[d],
                    inner.len(d),
                    outer.len(d)
                )));
            }
        }
        Ok(Self {
            outer,
            offset,
            inner,
        })
    }

    /// `X = Y`.
    pub fn identity(shape: ArrayShape) -> Self {
        Self {
            offset: vec![0; shape.ndim()],
            inner: shape.clone(),
            outer: shape,
        }
    }

    /// `X` anchored at the first corner of `Y`.
    pub fn leading(outer: ArrayShape, inner_dims: Vec<usize>) -> Result<Self> {
        let offset = vec![0; outer.ndim()];
        Self::new(outer, offset, inner_dims)
    }

    /// `X` anchored at the last corner of `Y`.
    pub fn trailing(outer: ArrayShape, inner_dims: Vec<usize>) -> Result<Self> {
        let offset = outer
            .dims()
            .iter()
            .zip(&inner_dims)
            .map(|(&n, &m)| n.saturating_sub(m))
            .collect();
        Self::new(outer, offset, inner_dims)
    }

    pub fn outer(&self) -> &ArrayShape {
        &self.outer
    }

    pub fn inner(&self) -> &ArrayShape {
        &self.inner
    }

    pub fn offset(&self) -> &[usize] {
        &self.offset
    }

    /// `X` expressed as a box on `Y`.
    pub fn window(&self) -> Rect {
        Rect::from_parts(
            self.offset.iter().map(|o| o + 1).collect(),
            self.inner.dims().to_vec(),
        )
    }

    pub fn alignment(&self, d: usize) -> Alignment {
        let initial = self.offset[d] == 0;
        let terminal = self.offset[d] + self.inner.len(d) == self.outer.len(d);
        match (initial, terminal) {
            (true, true) => Alignment::Equal,
            (true, false) => Alignment::SharedInitial,
            (false, true) => Alignment::SharedTerminal,
            (false, false) => Alignment::Interior,
        }
    }

    /// `Z → Y` followed by `Y → X` gives `Z → X`.
    pub fn then(&self, next: &SubArraySpec) -> Result<SubArraySpec> {
        if next.outer != self.inner {
            return Err(SppError::InvalidShape(
                "composed projections do not chain: inner and outer shapes differ".into(),
            ));
        }
        let offset = self.offset.iter().zip(&next.offset).map(|(a, b)| a + b).collect();
        SubArraySpec::new(self.outer.clone(), offset, next.inner.dims().to_vec())
    }
}

/// Restricts a box on `Y` to `X`, in `X`'s coordinates.
pub fn project_rect(rect: &Rect, spec: &SubArraySpec) -> Option<Rect> {
    let cut = rect.intersect(&spec.window())?;
    let start = cut
        .start()
        .iter()
        .zip(&spec.offset)
        .map(|(s, o)| s - o)
        .collect();
    Some(Rect::from_parts(start, cut.lens().to_vec()))
}

/// Restricts a patch to `X`; the cost is carried unchanged.
pub fn project_patch(patch: &Patch, spec: &SubArraySpec) -> Option<Patch> {
    project_rect(&patch.rect, spec).map(|rect| Patch {
        rect,
        cost: patch.cost,
    })
}

/// Restricts a partition on `Y` to `X`. Surviving patches keep their time
/// order and their costs become gaps between the survivors' original times.
pub fn project_partition(part: &Partition, spec: &SubArraySpec) -> Result<Partition> {
    if part.shape != spec.outer {
        return Err(SppError::InvalidShape(format!(
            "partition lives on {:?}, projection expects {:?}",
            part.shape.dims(),
            spec.outer.dims()
        )));
    }
    let times = part.time_points();
    let (rects, kept_times): (Vec<Rect>, Vec<f64>) = part
        .patches
        .iter()
        .zip(times)
        .filter_map(|(p, t)| project_rect(&p.rect, spec).map(|r| (r, t)))
        .unzip();
    let patches = rects
        .into_iter()
        .zip(Partition::costs_from_times(&kept_times))
        .map(|(rect, cost)| Patch { rect, cost })
        .collect();
    Ok(Partition {
        shape: spec.inner.clone(),
        tau: part.tau,
        patches,
    })
}

/// Probability that a nonempty-or-empty candidate on `Y` has a nonempty
/// projection along dimension `d`. Summed over the pre-image starts: a start
/// inside `X` survives with its start law alone; a start `j` positions before
/// `X` must also grow `j` more times, with probability `θ^j`.
pub fn projected_survival_prob(spec: &SubArraySpec, d: usize, theta: f64) -> f64 {
    let n_y = spec.outer.len(d);
    let first = spec.offset[d] + 1;
    let last = spec.offset[d] + spec.inner.len(d);
    let mut p = 0.0;
    for s in 1..=last {
        let start = if s == 1 { 1.0 } else { 1.0 - theta };
        let reach = if s >= first {
            1.0
        } else {
            theta.powi((first - s) as i32)
        };
        p += start * reach;
    }
    p / n_y as f64
}

/// The one-extra-column crossing probabilities as stated for the two
/// boundary cases: `θ/N_Y + (N_X/N_Y)(1−θ)` when the terminal boundary is
/// shared, `1/N_Y + ((N_X−1)/N_Y)(1−θ)` when the initial one is. Only
/// meaningful when `N_Y = N_X + 1`.
pub fn one_column_crossing_prob(n_x: usize, theta: f64, alignment: Alignment) -> Option<f64> {
    let n_y = (n_x + 1) as f64;
    let n_x = n_x as f64;
    match alignment {
        Alignment::SharedTerminal => Some(theta / n_y + n_x / n_y * (1.0 - theta)),
        Alignment::SharedInitial => Some(1.0 / n_y + (n_x - 1.0) / n_y * (1.0 - theta)),
        _ => None,
    }
}

/// One row of the intensity-equality check.
#[derive(Clone, Debug, Serialize)]
pub struct IntensityCase {
    pub outer: Vec<usize>,
    pub offset: Vec<usize>,
    pub inner: Vec<usize>,
    pub theta: f64,
    /// `S_Y · P(S_{π(□^Y)} > 0)`.
    pub projected: f64,
    /// `S_X · P(S_{□^X} > 0)`.
    pub direct: f64,
    pub relative_diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntensityReport {
    pub cases: Vec<IntensityCase>,
    pub max_relative_diff: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Compares the thinned Poisson intensity of projected patches with the
/// intensity of a direct draw on `X`, for every spec and `θ`.
pub fn check_intensity_equality(specs: &[SubArraySpec], thetas: &[f64]) -> IntensityReport {
    let mut cases = Vec::new();
    for spec in specs {
        for &theta in thetas {
            let projected = spec.outer.volume() as f64
                * (0..spec.outer.ndim())
                    .map(|d| projected_survival_prob(spec, d, theta))
                    .product::<f64>();
            let direct = spec.inner.volume() as f64 * prior::nonempty_prob(&spec.inner, theta);
            cases.push(IntensityCase {
                outer: spec.outer.dims().to_vec(),
                offset: spec.offset.clone(),
                inner: spec.inner.dims().to_vec(),
                theta,
                projected,
                direct,
                relative_diff: ((projected - direct) / direct).abs(),
            });
        }
    }
    let max_relative_diff = cases.iter().map(|c| c.relative_diff).fold(0.0, f64::max);
    IntensityReport {
        cases,
        max_relative_diff,
        tolerance: EXACT_TOLERANCE,
        passed: max_relative_diff < EXACT_TOLERANCE,
    }
}

/// Exact law of the projected `(s, l)` along dimension `d`, conditioned on a
/// nonempty projection, obtained by summing the direct prior on `Y` over all
/// pre-images.
pub fn projected_position_pmf(spec: &SubArraySpec, theta: f64, d: usize) -> Result<PositionPmf> {
    spec.outer.check_dim(d)?;
    if spec.alignment(d) == Alignment::Interior {
        return Err(SppError::UnalignedSubArray(d));
    }
    let (first, last) = (spec.offset[d] + 1, spec.offset[d] + spec.inner.len(d));
    let outer = prior::direct_position_pmf(spec.outer.len(d), theta)?;
    let mut pmf = PositionPmf::default();
    for (&(s, l), &p) in &outer.0 {
        let lo = s.max(first);
        let hi = (s + l - 1).min(last);
        if lo <= hi {
            pmf.add(lo - spec.offset[d], hi - lo + 1, p);
        }
    }
    Ok(pmf.normalized())
}

/// One row of the exact position check.
#[derive(Clone, Debug, Serialize)]
pub struct PositionCase {
    pub n_inner: usize,
    pub extra: usize,
    pub alignment: Alignment,
    pub theta: f64,
    pub total_variation: f64,
}

/// Result of the exact (enumeration-only) consistency suite.
#[derive(Clone, Debug, Serialize)]
pub struct ExactReport {
    pub construction_max_tv: f64,
    pub intensity: IntensityReport,
    pub positions: Vec<PositionCase>,
    pub position_max_tv: f64,
    pub volume_max_relative_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Enumerates the exact identities: candidate vs direct construction on
/// every shape up to 6×6, intensity equality and position law for inner
/// lengths 1–5 with 1–3 extra positions on either side, and the closed-form
/// covered-volume identity.
pub fn exact_suite() -> Result<ExactReport> {
    let thetas = [0.1, 0.5, 0.9];

    let mut construction_max_tv: f64 = 0.0;
    for &theta in &[0.0, 0.3, 0.5, 0.9, 1.0] {
        for a in 1..=6 {
            construction_max_tv =
                construction_max_tv.max(prior::construction_tv(&ArrayShape::new(vec![a])?, theta)?);
            for b in 1..=6 {
                let shape = ArrayShape::new(vec![a, b])?;
                construction_max_tv = construction_max_tv.max(prior::construction_tv(&shape, theta)?);
            }
        }
    }

    let mut specs = Vec::new();
    let mut positions = Vec::new();
    for n_x in 1..=5 {
        for extra in 1..=3 {
            let outer = ArrayShape::new(vec![n_x + extra])?;
            let sides = [
                (Alignment::SharedInitial, SubArraySpec::leading(outer.clone(), vec![n_x])?),
                (Alignment::SharedTerminal, SubArraySpec::trailing(outer, vec![n_x])?),
            ];
            for (alignment, spec) in sides {
                for &theta in &thetas {
                    let projected = projected_position_pmf(&spec, theta, 0)?;
                    let direct = prior::direct_position_pmf(n_x, theta)?;
                    positions.push(PositionCase {
                        n_inner: n_x,
                        extra,
                        alignment,
                        theta,
                        total_variation: projected.total_variation(&direct),
                    });
                }
                specs.push(spec);
            }
            // a 2-D spec growing only along the second dimension, plus an interior window
            let outer2 = ArrayShape::new(vec![3, n_x + extra])?;
            specs.push(SubArraySpec::leading(outer2.clone(), vec![3, n_x])?);
            specs.push(SubArraySpec::trailing(outer2, vec![3, n_x])?);
            if extra >= 2 {
                specs.push(SubArraySpec::new(ArrayShape::new(vec![n_x + extra])?, vec![1], vec![n_x])?);
            }
        }
    }
    let intensity = check_intensity_equality(&specs, &thetas);
    let position_max_tv = positions.iter().map(|c| c.total_variation).fold(0.0, f64::max);

    let mut volume_max_relative_gap: f64 = 0.0;
    for dims in [vec![20, 30], vec![1, 1], vec![7], vec![4, 5, 6], vec![100, 3]] {
        let shape = ArrayShape::new(dims)?;
        for &theta in &[0.0, 0.5, 0.9, 1.0] {
            let hp = HyperParams::new(0.3, theta, 1.0, 0.5)?;
            volume_max_relative_gap =
                volume_max_relative_gap.max(prior::expected_total_volume(&shape, &hp).relative_gap());
        }
    }

    let passed = construction_max_tv < EXACT_TOLERANCE
        && intensity.passed
        && position_max_tv < EXACT_TOLERANCE
        && volume_max_relative_gap < EXACT_TOLERANCE;
    Ok(ExactReport {
        construction_max_tv,
        intensity,
        positions,
        position_max_tv,
        volume_max_relative_gap,
        tolerance: EXACT_TOLERANCE,
        passed,
    })
}

/// Settings for [`check_self_consistency_mc`].
#[derive(Clone, Debug)]
pub struct McConfig {
    pub draws: usize,
    pub seed: u64,
    pub workers: usize,
    /// Significance level each test must clear.
    pub alpha: f64,
    /// Negative control: count patches that miss `X` instead of dropping them.
    pub keep_empty_projections: bool,
}

impl McConfig {
    pub fn new(draws: usize, seed: u64) -> Self {
        Self {
            draws,
            seed,
            workers: 1,
            alpha: 0.01,
            keep_empty_projections: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub draws: usize,
    pub mean_count_projected: f64,
    pub mean_count_direct: f64,
    /// Patch-count law, projected vs direct.
    pub count_test: TestResult,
    /// Per-dimension `(s, l)` law, projected vs direct.
    pub position_tests: Vec<TestResult>,
    /// Per-dimension projected `(s, l)` against the exact pmf.
    pub position_exact_tests: Vec<TestResult>,
    /// Two-sample KS on the total cost `Σ m_k`.
    pub cost_sum_test: TestResult,
    pub alpha: f64,
    pub passed: bool,
}

const MIN_MC_DRAWS: usize = 1000;
const BLOCK: usize = 1000;

#[derive(Default)]
struct Tally {
    counts_proj: Vec<u64>,
    counts_direct: Vec<u64>,
    pos_proj: Vec<Vec<u64>>,
    pos_direct: Vec<Vec<u64>>,
    cost_proj: Vec<f64>,
    cost_direct: Vec<f64>,
}

fn bump(v: &mut Vec<u64>, i: usize) {
    if v.len() <= i {
        v.resize(i + 1, 0);
    }
    v[i] += 1;
}


impl Tally {
    fn merge(&mut self, other: Tally) {
        fn add(a: &mut Vec<u64>, b: &[u64]) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        add(&mut self.counts_proj, &other.counts_proj);
        add(&mut self.counts_direct, &other.counts_direct);
        if self.pos_proj.len() < other.pos_proj.len() {
            self.pos_proj.resize(other.pos_proj.len(), Vec::new());
            self.pos_direct.resize(other.pos_direct.len(), Vec::new());
        }
        for d in 0..other.pos_proj.len() {
            add(&mut self.pos_proj[d], &other.pos_proj[d]);
            add(&mut self.pos_direct[d], &other.pos_direct[d]);
        }
        self.cost_proj.extend(other.cost_proj);
        self.cost_direct.extend(other.cost_direct);
    }
}

/// Monte-Carlo check that projecting draws on `Y` reproduces the law of
/// direct draws on `X`: patch counts, per-dimension positions and total cost.
pub fn check_self_consistency_mc(spec: &SubArraySpec, hp: &HyperParams, cfg: &McConfig) -> Result<McReport> {
    if cfg.draws < MIN_MC_DRAWS {
        return Err(SppError::InsufficientDraws {
            min: MIN_MC_DRAWS,
            got: cfg.draws,
        });
    }
    let ndim = spec.inner.ndim();
    let blocks = cfg.draws.div_ceil(BLOCK);
    let run_block = |b: usize| -> Tally {
        let mut rng_y = stream(cfg.seed, 2 * b as u64);
        let mut rng_x = stream(cfg.seed, 2 * b as u64 + 1);
        let mut t = Tally {
            pos_proj: vec![Vec::new(); ndim],
            pos_direct: vec![Vec::new(); ndim],
            ..Tally::default()
        };
        let n_here = BLOCK.min(cfg.draws - b * BLOCK);
        for _ in 0..n_here {
            let on_y = prior::sample_partition_candidate(&spec.outer, hp, &mut rng_y);
            let projected = project_partition(&on_y, spec).expect("shapes match");
            let count = if cfg.keep_empty_projections {
                on_y.len()
            } else {
                projected.len()
            };
            bump(&mut t.counts_proj, count);
            for p in &projected.patches {
                for d in 0..ndim {
                    let n = spec.inner.len(d);
                    bump(&mut t.pos_proj[d], position_index(n, p.rect.start_at(d), p.rect.len_at(d)));
                }
            }
            t.cost_proj.push(projected.total_cost());

            let on_x = prior::sample_partition_direct(&spec.inner, hp, &mut rng_x);
            bump(&mut t.counts_direct, on_x.len());
            for p in &on_x.patches {
                for d in 0..ndim {
                    let n = spec.inner.len(d);
                    bump(&mut t.pos_direct[d], position_index(n, p.rect.start_at(d), p.rect.len_at(d)));
                }
            }
            t.cost_direct.push(on_x.total_cost());
        }
        t
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| SppError::InvalidParameter(format!("thread pool: {e}")))?;
    let tallies: Vec<Tally> = pool.install(|| (0..blocks).into_par_iter().map(run_block).collect());
    let mut total = Tally {
        pos_proj: vec![Vec::new(); ndim],
        pos_direct: vec![Vec::new(); ndim],
        ..Tally::default()
    };
    for t in tallies {
        total.merge(t);
    }

    let count_test = stats::chi_square_homogeneity(&total.counts_proj, &total.counts_direct);
    let mut position_tests = Vec::new();
    let mut position_exact_tests = Vec::new();
    for d in 0..ndim {
        let n = spec.inner.len(d);
        let cells = prior::position_count(n);
        let mut proj = total.pos_proj[d].clone();
        proj.resize(cells, 0);
        let mut direct = total.pos_direct[d].clone();
        direct.resize(cells, 0);
        position_tests.push(stats::chi_square_homogeneity(&proj, &direct));
        let exact = if spec.alignment(d) == Alignment::Interior {
            prior::direct_position_pmf(n, hp.theta)?
        } else {
            projected_position_pmf(spec, hp.theta, d)?
        };
        let mut probs = vec![0.0; cells];
        for (&(s, l), &p) in &exact.0 {
            probs[position_index(n, s, l)] = p;
        }
        position_exact_tests.push(stats::chi_square_gof(&proj, &probs));
    }
    let cost_sum_test = stats::ks_two_sample(&total.cost_proj, &total.cost_direct);
    let mean = |h: &[u64]| {
        let n: u64 = h.iter().sum();
        h.iter().enumerate().map(|(k, &c)| (k as u64 * c) as f64).sum::<f64>() / n as f64
    };
    let passed = count_test.passes(cfg.alpha)
        && position_tests.iter().all(|t| t.passes(cfg.alpha))
        && position_exact_tests.iter().all(|t| t.passes(cfg.alpha))
        && cost_sum_test.passes(cfg.alpha);
    Ok(McReport {
        draws: cfg.draws,
        mean_count_projected: mean(&total.counts_proj),
        mean_count_direct: mean(&total.counts_direct),
        count_test,
        position_tests,
        position_exact_tests,
        cost_sum_test,
        alpha: cfg.alpha,
        passed,
    })
}

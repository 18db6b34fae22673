//! The two-dimensional relational model.
//!
//! A binary matrix `R` is explained by a partition on a latent grid together
//! with a row permutation and a column permutation. Latent cell `(i, j)` has
//! intensity `ρ_ij = σ(Σ ω_k/γ)` over the patches covering it, and the data
//! entry placed there is `R[row_perm[i]][col_perm[j]]`.
//!
//! Matrix indices in this module are 0-based; patch coordinates stay 1-based.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Result, SppError};
use crate::grid::{ArrayShape, Partition, Patch, Rect};
use crate::prior::{self, HyperParams};
use crate::rng::SppRng;

/// Shift inside the exponential of [`sigma`].
pub const SIGMA_SHIFT: f64 = 0.002_478_752_176_666_358_5; // e^-6
/// Clamp applied to every `ρ`.
pub const RHO_EPS: f64 = 1e-12;

/// `σ(x) = (e^{x+e^{-6}} − 1)/(e^{x+e^{-6}} + 1)`, clamped to `[ε, 1−ε]`.
pub fn sigma(x: f64) -> f64 {
    let y = x + SIGMA_SHIFT;
    let v = if y > 40.0 {
        1.0
    } else {
        let e = y.exp_m1();
        e / (e + 2.0)
    };
    v.clamp(RHO_EPS, 1.0 - RHO_EPS)
}

/// `(ln ρ, ln(1−ρ))` for aggregate rate `x`.
fn log_probs(x: f64) -> (f64, f64) {
    let rho = sigma(x);
    (rho.ln(), (-rho).ln_1p())
}

/// Sum of `ω_k/γ` over the patches covering latent cell `(i, j)` (1-based).
pub fn aggregate_rate(part: &Partition, i: usize, j: usize, gamma: f64) -> f64 {
    let cell = [i, j];
    part.patches
        .iter()
        .filter(|p| p.contains(&cell))
        .map(|p| p.rate() / gamma)
        .sum()
}

/// Dense row-major 0/1 matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: bool) -> Self {
        Self {
            rows,
            cols,
            data: vec![value as u8; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(SppError::InvalidShape("ragged matrix rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(SppError::InvalidParameter(format!("entry ({i},{j}) is not binary")));
                }
                m.set(i, j, v == 1);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j] == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.cols + j] = v as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn density(&self) -> f64 {
        self.count_ones() as f64 / self.data.len() as f64
    }
}

/// A partition with its permutations, as carried by posterior samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSnapshot {
    pub partition: Partition,
    pub gamma: f64,
    /// 0-based: data row placed at latent row `i`.
    pub row_perm: Vec<usize>,
    /// 0-based: data column placed at latent column `j`.
    pub col_perm: Vec<usize>,
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

fn check_perm(perm: &[usize], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(SppError::InvalidParameter(format!("{what} has length {}, expected {n}", perm.len())));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(SppError::InvalidParameter(format!("{what} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

impl ModelSnapshot {
    pub fn validate(&self) -> Result<()> {
        if self.partition.shape.ndim() != 2 {
            return Err(SppError::NotTwoDimensional(self.partition.shape.ndim()));
        }
        self.partition.validate()?;
        check_perm(&self.row_perm, self.partition.shape.len(0), "row permutation")?;
        check_perm(&self.col_perm, self.partition.shape.len(1), "column permutation")
    }

    /// Identity permutations on `part`'s shape.
    pub fn with_identity(partition: Partition, gamma: f64) -> Self {
        let (r, c) = (partition.shape.len(0), partition.shape.len(1));
        Self {
            partition,
            gamma,
            row_perm: (0..r).collect(),
            col_perm: (0..c).collect(),
        }
    }

    /// Dense `ρ` over data coordinates.
    pub fn data_intensity(&self) -> Vec<f64> {
        let (rows, cols) = (self.partition.shape.len(0), self.partition.shape.len(1));
        let mut agg = vec![0.0; rows * cols];
        for p in &self.partition.patches {
            add_rect(&mut agg, cols, &p.rect, p.rate() / self.gamma);
        }
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                out[self.row_perm[i] * cols + self.col_perm[j]] = sigma(agg[i * cols + j]);
            }
        }
        out
    }
}

fn add_rect(agg: &mut [f64], cols: usize, rect: &Rect, w: f64) {
    for i in rect.start_at(0) - 1..rect.end_at(0) {
        for j in rect.start_at(1) - 1..rect.end_at(1) {
            agg[i * cols + j] += w;
        }
    }
}

/// Predicted link probability for data pairs `(row, col)` (0-based), averaged
/// over `samples`.
pub fn predict(samples: &[ModelSnapshot], pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(SppError::EmptyInput);
    }
    let mut out = vec![0.0; pairs.len()];
    for snap in samples {
        let (rows, cols) = (snap.partition.shape.len(0), snap.partition.shape.len(1));
        let rpos = inverse(&snap.row_perm);
        let cpos = inverse(&snap.col_perm);
        for (o, &(r, c)) in out.iter_mut().zip(pairs) {
            if r >= rows || c >= cols {
                return Err(SppError::OutOfRange(format!("pair ({r}, {c}) outside {rows}×{cols}")));
            }
            *o += sigma(aggregate_rate(&snap.partition, rpos[r] + 1, cpos[c] + 1, snap.gamma));
        }
    }
    let n = samples.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// A state mutation.
#[derive(Clone, Debug, PartialEq)]
pub enum Change {
    /// Insert a patch generated at time `time ∈ (0, τ]`; costs of the new
    /// patch and of its successor become the gaps around `time`.
    Insert { rect: Rect, time: f64 },
    /// Remove a patch; its cost merges into its successor.
    Remove { index: usize },
    /// Replace a patch's box, keeping its cost.
    Move { index: usize, rect: Rect },
    /// Replace a patch's cost.
    SetCost { index: usize, cost: f64 },
    /// Exchange the data rows at two latent rows.
    SwapRows(usize, usize),
    /// Exchange the data columns at two latent columns.
    SwapCols(usize, usize),
}

/// Observed matrix, mask, latent partition, permutations and cached
/// intensities.
#[derive(Clone, Debug)]
pub struct RelationalState {
    shape: ArrayShape,
    gamma: f64,
    data: BinaryMatrix,
    mask: BinaryMatrix,
    part: Partition,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    row_pos: Vec<usize>,
    col_pos: Vec<usize>,
    // latent-aligned label and mask
    label: Vec<u8>,
    observed: Vec<u8>,
    agg: Vec<f64>,
    lp1: Vec<f64>,
    lp0: Vec<f64>,
    loglik: f64,
}

impl RelationalState {
    /// Empty partition with identity permutations.
    pub fn new(data: BinaryMatrix, mask: BinaryMatrix, tau: f64, gamma: f64) -> Result<Self> {
        let shape = ArrayShape::new(vec![data.rows(), data.cols()])?;
        let snap = ModelSnapshot::with_identity(Partition::empty(shape, tau), gamma);
        Self::from_snapshot(data, mask, snap)
    }

    pub fn from_snapshot(data: BinaryMatrix, mask: BinaryMatrix, snap: ModelSnapshot) -> Result<Self> {
        snap.validate()?;
        let shape = snap.partition.shape.clone();
        if data.rows() != shape.len(0) || data.cols() != shape.len(1) {
            return Err(SppError::InvalidShape(format!(
                "data is {}×{}, model is {}×{}",
                data.rows(),
                data.cols(),
                shape.len(0),
                shape.len(1)
            )));
        }
        if mask.rows() != data.rows() || mask.cols() != data.cols() {
            return Err(SppError::InvalidShape("mask and data sizes differ".into()));
        }
        if !(snap.gamma > 0.0 && snap.gamma.is_finite()) {
            return Err(SppError::InvalidParameter("gamma must be positive".into()));
        }
        let n = data.rows() * data.cols();
        let mut s = Self {
            row_pos: inverse(&snap.row_perm),
            col_pos: inverse(&snap.col_perm),
            shape,
            gamma: snap.gamma,
            part: snap.partition,
            row_perm: snap.row_perm,
            col_perm: snap.col_perm,
            label: vec![0; n],
            observed: vec![0; n],
            agg: vec![0.0; n],
            lp1: vec![0.0; n],
            lp0: vec![0.0; n],
            loglik: 0.0,
            data,
            mask,
        };
        s.rebuild();
        Ok(s)
    }

    /// Recomputes every cache from the partition and permutations.
    pub fn rebuild(&mut self) {
        let (rows, cols) = (self.rows(), self.cols());
        for i in 0..rows {
            for j in 0..cols {
                let (r, c) = (self.row_perm[i], self.col_perm[j]);
                self.label[i * cols + j] = self.data.get(r, c) as u8;
                self.observed[i * cols + j] = self.mask.get(r, c) as u8;
            }
        }
        self.agg.iter_mut().for_each(|a| *a = 0.0);
        for p in &self.part.patches {
            add_rect(&mut self.agg, cols, &p.rect, p.rate() / self.gamma);
        }
        for idx in 0..rows * cols {
            (self.lp1[idx], self.lp0[idx]) = log_probs(self.agg[idx]);
        }
        self.loglik = self.log_likelihood_full();
    }

    pub fn rows(&self) -> usize {
        self.shape.len(0)
    }

    pub fn cols(&self) -> usize {
        self.shape.len(1)
    }

    pub fn shape(&self) -> &ArrayShape {
        &self.shape
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn data(&self) -> &BinaryMatrix {
        &self.data
    }

    pub fn mask(&self) -> &BinaryMatrix {
        &self.mask
    }

    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    /// Cached aggregate rate at latent cell `(i, j)` (0-based).
    pub fn agg(&self, i: usize, j: usize) -> f64 {
        self.agg[i * self.cols() + j]
    }

    /// `ρ` at latent cell `(i, j)` (0-based).
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        sigma(self.agg(i, j))
    }

    /// Data entry placed at latent cell `(i, j)`.
    pub fn latent_label(&self, i: usize, j: usize) -> bool {
        self.label[i * self.cols() + j] == 1
    }

    /// Whether the data entry placed at latent cell `(i, j)` is observed.
    pub fn latent_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.cols() + j] == 1
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            partition: self.part.clone(),
            gamma: self.gamma,
            row_perm: self.row_perm.clone(),
            col_perm: self.col_perm.clone(),
        }
    }

    /// Cached training log-likelihood.
    pub fn log_likelihood(&self) -> f64 {
        self.loglik
    }

    /// Training log-likelihood recomputed from scratch, without the caches.
    pub fn log_likelihood_full(&self) -> f64 {
        let cols = self.cols();
        let mut agg = vec![0.0; self.agg.len()];
        for p in &self.part.patches {
            add_rect(&mut agg, cols, &p.rect, p.rate() / self.gamma);
        }
        let mut ll = 0.0;
        for i in 0..self.rows() {
            for j in 0..cols {
                let (r, c) = (self.row_perm[i], self.col_perm[j]);
                if self.mask.get(r, c) {
                    let (l1, l0) = log_probs(agg[i * cols + j]);
                    ll += if self.data.get(r, c) { l1 } else { l0 };
                }
            }
        }
        ll
    }

    /// Maximum deviation of the cached aggregate from a brute-force sum.
    pub fn cache_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let exact = aggregate_rate(&self.part, i + 1, j + 1, self.gamma);
                worst = worst.max((exact - self.agg(i, j)).abs());
            }
        }
        worst
    }

    #[inline]
    fn cell_ll(&self, idx: usize, agg: f64) -> f64 {
        let (l1, l0) = log_probs(agg);
        if self.label[idx] == 1 {
            l1
        } else {
            l0
        }
    }

    #[inline]
    fn cached_ll(&self, idx: usize) -> f64 {
        if self.label[idx] == 1 {
            self.lp1[idx]
        } else {
            self.lp0[idx]
        }
    }

    /// Rate edits `(box, Δ(ω/γ))` implied by a patch-level change.
    fn rate_edits(&self, change: &Change) -> Result<Vec<(Rect, f64)>> {
        let g = self.gamma;
        let patches = &self.part.patches;
        let get = |index: usize| -> Result<&Patch> {
            patches.get(index).ok_or(SppError::PatchIndex {
                index,
                count: patches.len(),
            })
        };
        Ok(match change {
            Change::Insert { rect, time } => {
                let (pos, prev, next_time) = self.insertion_point(*time)?;
                let mut edits = vec![(rect.clone(), (time - prev) / rect.volume() as f64 / g)];
                if let Some(t_next) = next_time {
                    let succ = &patches[pos];
                    let new_cost = t_next - time;
                    edits.push((succ.rect.clone(), (new_cost - succ.cost) / succ.volume() as f64 / g));
                }
                edits
            }
            Change::Remove { index } => {
                let p = get(*index)?;
                let mut edits = vec![(p.rect.clone(), -p.rate() / g)];
                if let Some(succ) = patches.get(index + 1) {
                    edits.push((succ.rect.clone(), p.cost / succ.volume() as f64 / g));
                }
                edits
            }
            Change::Move { index, rect } => {
                let p = get(*index)?;
                vec![
                    (p.rect.clone(), -p.rate() / g),
                    (rect.clone(), p.cost / rect.volume() as f64 / g),
                ]
            }
            Change::SetCost { index, cost } => {
                let p = get(*index)?;
                if !(*cost > 0.0 && cost.is_finite()) {
                    return Err(SppError::InvalidParameter(format!("cost {cost} must be positive")));
                }
                vec![(p.rect.clone(), (cost - p.cost) / p.volume() as f64 / g)]
            }
            Change::SwapRows(..) | Change::SwapCols(..) => Vec::new(),
        })
    }

    /// Rank of a new time point, the preceding time point and the following one.
    fn insertion_point(&self, time: f64) -> Result<(usize, f64, Option<f64>)> {
        if !(time > 0.0 && time <= self.part.tau) {
            return Err(SppError::OutOfRange(format!("time {time} outside (0, {}]", self.part.tau)));
        }
        let times = self.part.time_points();
        let pos = times.partition_point(|&t| t < time);
        let prev = if pos == 0 { 0.0 } else { times[pos - 1] };
        Ok((pos, prev, times.get(pos).copied()))
    }

    /// Cells touched by the edits, each with its net rate change.
    fn touched(&self, edits: &[(Rect, f64)]) -> Vec<(usize, f64)> {
        let cols = self.cols();
        let mut out = Vec::new();
        for (e, (rect, _)) in edits.iter().enumerate() {
            for i in rect.start_at(0) - 1..rect.end_at(0) {
                for j in rect.start_at(1) - 1..rect.end_at(1) {
                    let cell = [i + 1, j + 1];
                    // count each cell once, under the first edit covering it
                    if edits[..e].iter().any(|(r, _)| r.contains(&cell)) {
                        continue;
                    }
                    let dw: f64 = edits[e..]
                        .iter()
                        .filter(|(r, _)| r.contains(&cell))
                        .map(|(_, w)| w)
                        .sum();
                    out.push((i * cols + j, dw));
                }
            }
        }
        out
    }

    fn check_swap(&self, a: usize, b: usize, n: usize) -> Result<()> {
        if a >= n || b >= n {
            return Err(SppError::OutOfRange(format!("swap ({a}, {b}) outside 0..{n}")));
        }
        Ok(())
    }

    /// Change in training log-likelihood if `change` were applied.
    pub fn delta_log_likelihood(&self, change: &Change) -> Result<f64> {
        let cols = self.cols();
        match *change {
            Change::SwapRows(a, b) => {
                self.check_swap(a, b, self.rows())?;
                if a == b {
                    return Ok(0.0);
                }
                let mut d = 0.0;
                for j in 0..cols {
                    let (ia, ib) = (a * cols + j, b * cols + j);
                    d += self.swap_term(ia, ib);
                }
                Ok(d)
            }
            Change::SwapCols(a, b) => {
                self.check_swap(a, b, cols)?;
                if a == b {
                    return Ok(0.0);
                }
                let mut d = 0.0;
                for i in 0..self.rows() {
                    d += self.swap_term(i * cols + a, i * cols + b);
                }
                Ok(d)
            }
            _ => {
                let edits = self.rate_edits(change)?;
                let mut d = 0.0;
                for (idx, dw) in self.touched(&edits) {
                    if self.observed[idx] == 1 && dw != 0.0 {
                        d += self.cell_ll(idx, self.agg[idx] + dw) - self.cached_ll(idx);
                    }
                }
                Ok(d)
            }
        }
    }

    /// Log-likelihood change at two latent cells when their data entries trade places.
    #[inline]
    fn swap_term(&self, ia: usize, ib: usize) -> f64 {
        let term = |lab: u8, obs: u8, at: usize| -> f64 {
            if obs == 0 {
                0.0
            } else if lab == 1 {
                self.lp1[at]
            } else {
                self.lp0[at]
            }
        };
        let (la, oa, lb, ob) = (self.label[ia], self.observed[ia], self.label[ib], self.observed[ib]);
        term(lb, ob, ia) + term(la, oa, ib) - term(la, oa, ia) - term(lb, ob, ib)
    }

    /// Applies `change`, returning the log-likelihood delta. Affected cells
    /// are recomputed from the partition.
    pub fn apply(&mut self, change: Change) -> Result<f64> {
        let delta = self.delta_log_likelihood(&change)?;
        let cols = self.cols();
        match change {
            Change::SwapRows(a, b) => {
                for j in 0..cols {
                    self.label.swap(a * cols + j, b * cols + j);
                    self.observed.swap(a * cols + j, b * cols + j);
                }
                self.row_perm.swap(a, b);
                self.row_pos[self.row_perm[a]] = a;
                self.row_pos[self.row_perm[b]] = b;
            }
            Change::SwapCols(a, b) => {
                for i in 0..self.rows() {
                    self.label.swap(i * cols + a, i * cols + b);
                    self.observed.swap(i * cols + a, i * cols + b);
                }
                self.col_perm.swap(a, b);
                self.col_pos[self.col_perm[a]] = a;
                self.col_pos[self.col_perm[b]] = b;
            }
            other => {
                let edits = self.rate_edits(&other)?;
                self.mutate_partition(other)?;
                let cells: Vec<usize> = self.touched(&edits).into_iter().map(|(idx, _)| idx).collect();
                for idx in cells {
                    let (i, j) = (idx / cols + 1, idx % cols + 1);
                    let a = aggregate_rate(&self.part, i, j, self.gamma);
                    self.agg[idx] = a;
                    (self.lp1[idx], self.lp0[idx]) = log_probs(a);
                }
            }
        }
        self.loglik += delta;
        Ok(delta)
    }

    fn mutate_partition(&mut self, change: Change) -> Result<()> {
        let times = self.part.time_points();
        let patches = &mut self.part.patches;
        match change {
            Change::Insert { rect, time } => {
                let pos = times.partition_point(|&t| t < time);
                let prev = if pos == 0 { 0.0 } else { times[pos - 1] };
                if let Some(&t_next) = times.get(pos) {
                    patches[pos].cost = t_next - time;
                }
                patches.insert(pos, Patch { rect, cost: time - prev });
            }
            Change::Remove { index } => {
                let p = patches.remove(index);
                if let Some(succ) = patches.get_mut(index) {
                    succ.cost += p.cost;
                }
            }
            Change::Move { index, rect } => patches[index].rect = rect,
            Change::SetCost { index, cost } => patches[index].cost = cost,
            Change::SwapRows(..) | Change::SwapCols(..) => {}
        }
        Ok(())
    }

    /// Position of `Insert { time }` in the patch list.
    pub fn insertion_rank(&self, time: f64) -> Result<usize> {
        Ok(self.insertion_point(time)?.0)
    }

    /// Latent row holding data row `r`.
    pub fn row_position(&self, r: usize) -> usize {
        self.row_pos[r]
    }

    /// Latent column holding data column `c`.
    pub fn col_position(&self, c: usize) -> usize {
        self.col_pos[c]
    }
}

/// A synthetic data set with its latent truth.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub data: BinaryMatrix,
    pub truth: ModelSnapshot,
}

/// Draws `R` for a given partition. Permutations are uniform unless
/// `identity` is set.
pub fn generate_from_partition(partition: Partition, gamma: f64, identity: bool, rng: &mut SppRng) -> Result<Synthetic> {
    let mut truth = ModelSnapshot::with_identity(partition, gamma);
    if !identity {
        truth.row_perm.shuffle(rng);
        truth.col_perm.shuffle(rng);
    }
    truth.validate()?;
    let (rows, cols) = (truth.partition.shape.len(0), truth.partition.shape.len(1));
    let rho = truth.data_intensity();
    let mut data = BinaryMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            data.set(r, c, rng.random::<f64>() < rho[r * cols + c]);
        }
    }
    Ok(Synthetic { data, truth })
}

/// Partition from the prior, then [`generate_from_partition`].
pub fn generate_synthetic(shape: &ArrayShape, hp: &HyperParams, identity: bool, rng: &mut SppRng) -> Result<Synthetic> {
    if shape.ndim() != 2 {
        return Err(SppError::NotTwoDimensional(shape.ndim()));
    }
    let part = prior::sample_partition_direct(shape, hp, rng);
    generate_from_partition(part, hp.gamma, identity, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn shape(r: usize, c: usize) -> ArrayShape {
        ArrayShape::new(vec![r, c]).unwrap()
    }

    #[test]
    fn sigma_values() {
        let exact0 = (SIGMA_SHIFT.exp() - 1.0) / (SIGMA_SHIFT.exp() + 1.0);
        assert!((sigma(0.0) - exact0).abs() < 1e-15);
        assert!((sigma(0.0) - 0.00123937).abs() < 1e-8);
        assert!((sigma(1.0) - 0.463091).abs() < 1e-6);
        assert_eq!(sigma(1e6), 1.0 - RHO_EPS);
        let mut prev = sigma(0.0);
        for k in 1..=10_000 {
            let v = sigma(50.0 * k as f64 / 10_000.0);
            assert!(v > prev || v == 1.0 - RHO_EPS, "at step {k}");
            prev = v;
        }
        assert!((SIGMA_SHIFT - (-6.0f64).exp()).abs() < 1e-18);
    }

    #[test]
    fn aggregate_examples() {
        let s = shape(5, 5);
        let p = Patch::new(Rect::new(&s, vec![1, 1], vec![2, 5]).unwrap(), 0.2).unwrap();
        let part = Partition::new(s.clone(), 1.0, vec![p.clone()]).unwrap();
        assert!((aggregate_rate(&part, 1, 3, 0.01) - 2.0).abs() < 1e-12);
        assert_eq!(aggregate_rate(&part, 4, 4, 0.01), 0.0);
        let q = Patch::new(Rect::new(&s, vec![2, 2], vec![2, 2]).unwrap(), 0.4).unwrap();
        let both = Partition::new(s, 1.0, vec![p, q]).unwrap();
        assert!((aggregate_rate(&both, 2, 2, 0.01) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn empty_partition_loglik_closed_form() {
        let data = BinaryMatrix::zeros(4, 3);
        let st = RelationalState::new(data, BinaryMatrix::filled(4, 3, true), 1.0, 0.1).unwrap();
        let expect = 12.0 * (1.0 - sigma(0.0)).ln();
        assert!((st.log_likelihood() - expect).abs() < 1e-12);
    }

    #[test]
    fn single_cell_half() {
        // ρ = 0.5 needs σ(x) = 0.5, i.e. x + e^-6 = ln 3
        let s = shape(1, 1);
        let x = 3f64.ln() - SIGMA_SHIFT;
        let gamma = 1.0;
        let part = Partition::new(s, 10.0, vec![Patch::new(Rect::full(&shape(1, 1)), x).unwrap()]).unwrap();
        let data = BinaryMatrix::filled(1, 1, true);
        let st = RelationalState::from_snapshot(data, BinaryMatrix::filled(1, 1, true), ModelSnapshot::with_identity(part, gamma)).unwrap();
        assert!((st.log_likelihood() - 0.5f64.ln()).abs() < 1e-12);
    }

    fn random_state(n: usize, rng: &mut SppRng) -> RelationalState {
        let hp = HyperParams::new(2.0, 0.6, 0.05, 0.5).unwrap();
        let syn = generate_synthetic(&shape(n, n), &hp, false, rng).unwrap();
        let mut mask = BinaryMatrix::filled(n, n, true);
        for _ in 0..n {
            mask.set(rng.random_range(0..n), rng.random_range(0..n), false);
        }
        RelationalState::from_snapshot(syn.data, mask, syn.truth).unwrap()
    }

    fn random_change(st: &RelationalState, rng: &mut SppRng) -> Change {
        let n = st.rows();
        let k = st.partition().len();
        let s = st.shape().clone();
        match rng.random_range(0..6) {
            0 => Change::Insert {
                rect: prior::sample_direct_patch(&s, 0.6, rng),
                time: st.partition().tau * crate::rng::open_closed_unit(rng),
            },
            1 if k > 0 => Change::Remove { index: rng.random_range(0..k) },
            2 if k > 0 => Change::Move {
                index: rng.random_range(0..k),
                rect: prior::sample_direct_patch(&s, 0.6, rng),
            },
            3 if k > 0 => {
                let index = rng.random_range(0..k);
                let others = st.partition().total_cost() - st.partition().patches[index].cost;
                let room = st.partition().tau - others;
                Change::SetCost {
                    index,
                    cost: room * crate::rng::open_closed_unit(rng),
                }
            }
            4 => Change::SwapRows(rng.random_range(0..n), rng.random_range(0..n)),
            _ => Change::SwapCols(rng.random_range(0..n), rng.random_range(0..n)),
        }
    }

    #[test]
    fn deltas_match_full_recompute() {
        let mut rng = seeded(17);
        for _ in 0..5 {
            let mut st = random_state(6, &mut rng);
            for _ in 0..200 {
                let ch = random_change(&st, &mut rng);
                let before = st.log_likelihood_full();
                let mut after_state = st.clone();
                let predicted = st.delta_log_likelihood(&ch).unwrap();
                after_state.apply(ch).unwrap();
                let after = after_state.log_likelihood_full();
                assert!((predicted - (after - before)).abs() < 1e-9);
                st = after_state;
                st.partition().validate().unwrap();
            }
            assert!(st.cache_error() < 1e-9);
            assert!((st.log_likelihood() - st.log_likelihood_full()).abs() < 1e-8);
        }
    }

    #[test]
    fn null_and_symmetric_changes() {
        let mut rng = seeded(3);
        let st = random_state(5, &mut rng);
        assert_eq!(st.delta_log_likelihood(&Change::SwapRows(2, 2)).unwrap(), 0.0);
        if !st.partition().is_empty() {
            let p = &st.partition().patches[0];
            let same = Change::SetCost { index: 0, cost: p.cost };
            assert_eq!(st.delta_log_likelihood(&same).unwrap(), 0.0);
        }
        // identical rows and no patches: swap is a no-op
        let flat = RelationalState::new(BinaryMatrix::zeros(3, 3), BinaryMatrix::filled(3, 3, true), 1.0, 1.0).unwrap();
        assert_eq!(flat.delta_log_likelihood(&Change::SwapRows(0, 2)).unwrap(), 0.0);
        assert!(matches!(
            st.delta_log_likelihood(&Change::Remove { index: 99 }),
            Err(SppError::PatchIndex { .. })
        ));
    }

    #[test]
    fn relabeling_invariance() {
        let mut rng = seeded(5);
        let st = random_state(6, &mut rng);
        let ll = st.log_likelihood_full();
        // rename data row r to p[r] in R, the mask and the permutation
        let mut p: Vec<usize> = (0..6).collect();
        p.shuffle(&mut rng);
        let mut data = BinaryMatrix::zeros(6, 6);
        let mut mask = BinaryMatrix::zeros(6, 6);
        for r in 0..6 {
            for c in 0..6 {
                data.set(p[r], c, st.data().get(r, c));
                mask.set(p[r], c, st.mask().get(r, c));
            }
        }
        let mut snap = st.snapshot();
        snap.row_perm = snap.row_perm.iter().map(|&r| p[r]).collect();
        let relabeled = RelationalState::from_snapshot(data, mask, snap).unwrap();
        assert_eq!(relabeled.log_likelihood_full(), ll);
    }

    #[test]
    fn predict_examples() {
        let s = shape(3, 3);
        let empty = ModelSnapshot::with_identity(Partition::empty(s.clone(), 1.0), 1.0);
        assert_eq!(predict(std::slice::from_ref(&empty), &[(0, 0)]).unwrap(), vec![sigma(0.0)]);
        let p = Patch::new(Rect::full(&s), 9.0).unwrap();
        let one = ModelSnapshot::with_identity(Partition::new(s, 10.0, vec![p]).unwrap(), 1.0);
        let v = predict(&[one.clone(), empty.clone()], &[(2, 1)]).unwrap()[0];
        assert!((v - 0.5 * (sigma(1.0) + sigma(0.0))).abs() < 1e-15);
        assert!(predict(&[one], &[(3, 0)]).is_err());
        assert!(predict(&[], &[(0, 0)]).is_err());
    }

    #[test]
    fn synthetic_density_in_known_patch() {
        let s = shape(60, 60);
        let p = Patch::new(Rect::new(&s, vec![11, 21], vec![30, 30]).unwrap(), 0.9).unwrap();
        let gamma = 1e-3;
        let part = Partition::new(s, 1.0, vec![p.clone()]).unwrap();
        let mut rng = seeded(8);
        let syn = generate_from_partition(part, gamma, true, &mut rng).unwrap();
        let rho = sigma(p.rate() / gamma);
        let mut ones = 0usize;
        for i in 10..40 {
            for j in 20..50 {
                ones += syn.data.get(i, j) as usize;
            }
        }
        let n = 900.0;
        let se = (rho * (1.0 - rho) / n).sqrt();
        assert!((ones as f64 / n - rho).abs() < 4.0 * se);
        let again = generate_from_partition(syn.truth.partition.clone(), gamma, true, &mut seeded(8)).unwrap();
        assert_eq!(again.data, syn.data);
    }

    #[test]
    fn huge_gamma_gives_background_density() {
        let hp = HyperParams::new(1.0, 0.5, 1e9, 0.5).unwrap();
        let syn = generate_synthetic(&shape(300, 300), &hp, false, &mut seeded(2)).unwrap();
        let d = syn.data.density();
        let se = (sigma(0.0) / 90_000.0).sqrt();
        assert!((d - sigma(0.0)).abs() < 4.0 * se);
    }
}

//! Arrays, rectangular patches and partitions.
//!
//! All positions are 1-based, matching the `{1..N}` convention used in the
//! file formats. A patch is stored as a start position and a side length per
//! dimension; indicator vectors are derived on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SppError};

const MAX_VOLUME: u64 = 1 << 53;

/// A finite D-dimensional index domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ArrayShape {
    dims: Vec<usize>,
}

impl ArrayShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(SppError::InvalidShape("no dimensions".into()));
        }
        if let Some(d) = dims.iter().position(|&n| n == 0) {
            return Err(SppError::InvalidShape(format!("dimension {d} has length 0")));
        }
        let mut volume: u64 = 1;
        for &n in &dims {
            volume = volume
                .checked_mul(n as u64)
                .filter(|&v| v <= MAX_VOLUME)
                .ok_or_else(|| SppError::InvalidShape(format!("volume of {dims:?} exceeds 2^53")))?;
        }
        Ok(Self { dims })
    }

    /// Shorthand for a square 2-D array.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(vec![n, n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self, d: usize) -> usize {
        self.dims[d]
    }

    /// Number of cells, `S_X`.
    pub fn volume(&self) -> u64 {
        self.dims.iter().map(|&n| n as u64).product()
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if d < self.ndim() {
            Ok(())
        } else {
            Err(SppError::DimensionOutOfRange {
                index: d,
                ndim: self.ndim(),
            })
        }
    }

    /// Iterates over every cell (1-based), last dimension fastest.
    pub fn cells(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let total = self.volume();
        (0..total).map(move |mut flat| {
            let mut cell = vec![0; self.ndim()];
            for d in (0..self.ndim()).rev() {
                cell[d] = (flat % self.dims[d] as u64) as usize + 1;
                flat /= self.dims[d] as u64;
            }
            cell
        })
    }
}

impl TryFrom<Vec<usize>> for ArrayShape {
    type Error = SppError;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        ArrayShape::new(dims)
    }
}

impl From<ArrayShape> for Vec<usize> {
    fn from(shape: ArrayShape) -> Self {
        shape.dims
    }
}

/// The geometric part of a patch: an axis-aligned box.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    start: Vec<usize>,
    len: Vec<usize>,
}

impl Rect {
    /// Builds a box and checks that it fits inside `shape`.
    pub fn new(shape: &ArrayShape, start: Vec<usize>, len: Vec<usize>) -> Result<Self> {
        if start.len() != shape.ndim() || len.len() != shape.ndim() {
            return Err(SppError::InvalidShape(format!(
                "patch has {} starts and {} lengths for a {}-dimensional array",
                start.len(),
                len.len(),
                shape.ndim()
            )));
        }
        for d in 0..shape.ndim() {
            let (s, l, n) = (start[d], len[d], shape.len(d));
            if s == 0 || l == 0 || s + l - 1 > n {
                return Err(SppError::OutOfRange(format!(
                    "dimension {d}: start {s}, length {l} does not fit in 1..={n}"
                )));
            }
        }
        Ok(Self { start, len })
    }

    /// Builds a box without bounds checks; callers guarantee validity.
    pub(crate) fn from_parts(start: Vec<usize>, len: Vec<usize>) -> Self {
        debug_assert!(len.iter().all(|&l| l >= 1) && start.iter().all(|&s| s >= 1));
        Self { start, len }
    }

    /// The box covering all of `shape`.
    pub fn full(shape: &ArrayShape) -> Self {
        Self {
            start: vec![1; shape.ndim()],
            len: shape.dims().to_vec(),
        }
    }

    pub fn ndim(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[usize] {
        &self.start
    }

    pub fn lens(&self) -> &[usize] {
        &self.len
    }

    pub fn start_at(&self, d: usize) -> usize {
        self.start[d]
    }

    pub fn len_at(&self, d: usize) -> usize {
        self.len[d]
    }

    /// Last covered position in dimension `d` (inclusive).
    pub fn end_at(&self, d: usize) -> usize {
        self.start[d] + self.len[d] - 1
    }

    /// `S_□`, the number of covered cells.
    pub fn volume(&self) -> u64 {
        self.len.iter().map(|&l| l as u64).product()
    }

    pub fn contains(&self, cell: &[usize]) -> bool {
        cell.len() == self.ndim()
            && (0..self.ndim()).all(|d| self.start[d] <= cell[d] && cell[d] <= self.end_at(d))
    }

    /// Intersection with another box, if nonempty.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let mut start = Vec::with_capacity(self.ndim());
        let mut len = Vec::with_capacity(self.ndim());
        for d in 0..self.ndim() {
            let lo = self.start[d].max(other.start[d]);
            let hi = self.end_at(d).min(other.end_at(d));
            if lo > hi {
                return None;
            }
            start.push(lo);
            len.push(hi - lo + 1);
        }
        Some(Rect { start, len })
    }

    /// Indicator vector `u^(d)` of length `N^(d)`.
    pub fn indicator_vector(&self, shape: &ArrayShape, d: usize) -> Result<Vec<u8>> {
        shape.check_dim(d)?;
        let mut u = vec![0u8; shape.len(d)];
        u[self.start[d] - 1..self.end_at(d)].fill(1);
        Ok(u)
    }
}

/// Recovers `(s, l)` from an indicator vector made of a single run of ones.
pub fn segment_from_indicator(u: &[u8]) -> Option<(usize, usize)> {
    let first = u.iter().position(|&x| x != 0)?;
    let last = u.iter().rposition(|&x| x != 0)?;
    if u[first..=last].iter().all(|&x| x == 1) && u.iter().all(|&x| x <= 1) {
        Some((first + 1, last - first + 1))
    } else {
        None
    }
}

/// A nonempty patch with its cost `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub rect: Rect,
    pub cost: f64,
}

impl Patch {
    pub fn new(rect: Rect, cost: f64) -> Result<Self> {
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(SppError::InvalidParameter(format!(
                "patch cost must be positive and finite, got {cost}"
            )));
        }
        Ok(Self { rect, cost })
    }

    pub fn volume(&self) -> u64 {
        self.rect.volume()
    }

    /// `ω = m / S_□`.
    pub fn rate(&self) -> f64 {
        self.cost / self.volume() as f64
    }

    pub fn contains(&self, cell: &[usize]) -> bool {
        self.rect.contains(cell)
    }

    pub fn indicator_vector(&self, shape: &ArrayShape, d: usize) -> Result<Vec<u8>> {
        self.rect.indicator_vector(shape, d)
    }
}

/// A draw `{(m_k, □_k)}` in generating-time order.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub shape: ArrayShape,
    pub tau: f64,
    pub patches: Vec<Patch>,
}

/// Relative slack allowed when checking `Σ m_k ≤ τ` against rounding.
pub(crate) const BUDGET_SLACK: f64 = 1e-12;

impl Partition {
    pub fn empty(shape: ArrayShape, tau: f64) -> Self {
        Self {
            shape,
            tau,
            patches: Vec::new(),
        }
    }

    pub fn new(shape: ArrayShape, tau: f64, patches: Vec<Patch>) -> Result<Self> {
        let part = Self { shape, tau, patches };
        part.validate()?;
        Ok(part)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(SppError::InvalidParameter(format!(
                "budget must be positive, got {}",
                self.tau
            )));
        }
        for (k, p) in self.patches.iter().enumerate() {
            // re-run the bounds checks against this partition's shape
            Rect::new(&self.shape, p.rect.start.clone(), p.rect.len.clone())
                .map_err(|e| SppError::OutOfRange(format!("patch {k}: {e}")))?;
            if !(p.cost > 0.0 && p.cost.is_finite()) {
                return Err(SppError::InvalidParameter(format!(
                    "patch {k} has non-positive cost {}",
                    p.cost
                )));
            }
        }
        if self.total_cost() > self.tau * (1.0 + BUDGET_SLACK) {
            return Err(SppError::InvalidParameter(format!(
                "total cost {} exceeds budget {}",
                self.total_cost(),
                self.tau
            )));
        }
        Ok(())
    }

    /// `K_τ`.
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.patches.iter().map(|p| p.cost).sum()
    }

    /// Generating times `t_k`, the prefix sums of the costs.
    pub fn time_points(&self) -> Vec<f64> {
        self.patches
            .iter()
            .scan(0.0, |t, p| {
                *t += p.cost;
                Some(*t)
            })
            .collect()
    }

    /// Sum of patch volumes, overlaps counted separately.
    pub fn covered_volume(&self) -> u64 {
        self.patches.iter().map(Patch::volume).sum()
    }

    /// Rebuilds costs from strictly increasing generating times.
    pub fn costs_from_times(times: &[f64]) -> Vec<f64> {
        let mut prev = 0.0;
        times
            .iter()
            .map(|&t| {
                let m = t - prev;
                prev = t;
                m
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: &[usize]) -> ArrayShape {
        ArrayShape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn indicator_vectors() {
        let s5 = shape(&[5]);
        let r = Rect::new(&s5, vec![2], vec![3]).unwrap();
        assert_eq!(r.indicator_vector(&s5, 0).unwrap(), vec![0, 1, 1, 1, 0]);

        let s4 = shape(&[4]);
        let r = Rect::new(&s4, vec![1], vec![4]).unwrap();
        assert_eq!(r.indicator_vector(&s4, 0).unwrap(), vec![1, 1, 1, 1]);

        let s3 = shape(&[3]);
        let r = Rect::new(&s3, vec![3], vec![1]).unwrap();
        assert_eq!(r.indicator_vector(&s3, 0).unwrap(), vec![0, 0, 1]);
        assert!(matches!(
            r.indicator_vector(&s3, 1),
            Err(SppError::DimensionOutOfRange { index: 1, ndim: 1 })
        ));
    }

    #[test]
    fn volumes_and_rates() {
        let s = shape(&[10, 10]);
        let r = Rect::new(&s, vec![1, 1], vec![3, 4]).unwrap();
        assert_eq!(r.volume(), 12);
        let s3 = shape(&[2, 2, 2]);
        assert_eq!(Rect::new(&s3, vec![1, 2, 1], vec![1, 1, 1]).unwrap().volume(), 1);
        let p = Patch::new(Rect::new(&s, vec![1, 1], vec![2, 5]).unwrap(), 0.1).unwrap();
        assert_eq!(p.volume(), 10);
        assert!((p.rate() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn containment() {
        let s = shape(&[4, 4]);
        let r = Rect::new(&s, vec![2, 2], vec![2, 2]).unwrap();
        assert!(r.contains(&[3, 3]));
        assert!(!r.contains(&[1, 2]));
        let full = Rect::full(&s);
        assert!(s.cells().all(|c| full.contains(&c)));
    }

    #[test]
    fn time_points_are_prefix_sums() {
        let s = shape(&[3]);
        let r = Rect::full(&s);
        let part = Partition::new(
            s.clone(),
            1.0,
            [0.1, 0.2, 0.05]
                .iter()
                .map(|&m| Patch::new(r.clone(), m).unwrap())
                .collect(),
        )
        .unwrap();
        let t = part.time_points();
        let want = [0.1, 0.3, 0.35];
        for (a, b) in t.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(Partition::empty(s.clone(), 1.0).time_points().is_empty());

        let edge = Partition::new(s, 0.5, vec![Patch::new(r, 0.5).unwrap()]).unwrap();
        assert_eq!(edge.time_points(), vec![0.5]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ArrayShape::new(vec![]).is_err());
        assert!(ArrayShape::new(vec![3, 0]).is_err());
        assert!(ArrayShape::new(vec![1 << 27, 1 << 27]).is_err());
        let s = shape(&[3]);
        assert!(Rect::new(&s, vec![3], vec![2]).is_err());
        assert!(Rect::new(&s, vec![0], vec![1]).is_err());
        assert!(Patch::new(Rect::full(&s), 0.0).is_err());
        let r = Rect::full(&s);
        let over = Partition::new(
            s,
            0.2,
            vec![Patch::new(r.clone(), 0.15).unwrap(), Patch::new(r, 0.1).unwrap()],
        );
        assert!(over.is_err());
    }

    #[test]
    fn indicator_round_trip_exhaustive() {
        for n in 1..=64 {
            let s = shape(&[n]);
            for start in 1..=n {
                for len in 1..=(n - start + 1) {
                    let r = Rect::new(&s, vec![start], vec![len]).unwrap();
                    let u = r.indicator_vector(&s, 0).unwrap();
                    assert_eq!(segment_from_indicator(&u), Some((start, len)));
                }
            }
        }
        assert_eq!(segment_from_indicator(&[0, 1, 0, 1]), None);
        assert_eq!(segment_from_indicator(&[0, 0]), None);
    }

    #[test]
    fn volume_matches_cell_count_exhaustive() {
        for dims in [vec![7], vec![5, 6], vec![3, 4, 4], vec![100, 100]] {
            let s = shape(&dims);
            // a few boxes per shape; the 100x100 case exercises 10^4 cells
            let boxes = [
                Rect::full(&s),
                Rect::from_parts(vec![1; s.ndim()], vec![1; s.ndim()]),
                Rect::from_parts(
                    dims.iter().map(|&n| n.div_ceil(2)).collect(),
                    dims.iter().map(|&n| n / 2).map(|l| l.max(1)).collect(),
                ),
            ];
            for r in boxes {
                let count = s.cells().filter(|c| r.contains(c)).count() as u64;
                assert_eq!(count, r.volume(), "{dims:?} {r:?}");
            }
        }
    }
}

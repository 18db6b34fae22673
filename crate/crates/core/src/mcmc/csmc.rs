use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

use super::{sample_log_weights, Resampling, SmcConfig};
use crate::error::{Result, SppError};
use crate::grid::Rect;
use crate::prior;
use crate::relmodel::{sigma, Change, RelationalState};
use crate::rng::SppRng;

/// Growth state of one dimension of a particle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Track {
    pub start: usize,
    pub len: usize,
    pub stopped: bool,
}

/// Deterministic stage-by-stage embedding of a segment `(s, l)` on a
/// dimension of length `n`, for stages `0..=stages`. The length grows by one
/// per stage up to `l`; the track stops when a growth trial fails or the
/// boundary is reached, and always at the last stage.
pub fn reference_trajectory(n: usize, s: usize, l: usize, stages: usize) -> Vec<Track> {
    let l_max = n - s + 1;
    let stop_stage = if l == l_max { l - 1 } else { l };
    (0..=stages)
        .map(|i| Track {
            start: s,
            len: if i < stages { l.min(1 + i) } else { l },
            stopped: i >= stop_stage || i == stages,
        })
        .collect()
}

fn advance(t: Track, n: usize, theta: f64, last: bool, rng: &mut SppRng) -> Track {
    if t.stopped {
        return t;
    }
    let end = t.start + t.len - 1;
    if last {
        // finish the remaining growth from its conditional law
        let extra = prior::sample_length(n, end, theta, rng);
        return Track {
            len: t.len - 1 + extra,
            stopped: true,
            ..t
        };
    }
    if rng.random::<f64>() < theta {
        Track {
            len: t.len + 1,
            stopped: end + 1 == n,
            ..t
        }
    } else {
        Track { stopped: true, ..t }
    }
}

fn tracks_rect(t: &[Track; 2]) -> Rect {
    Rect::from_parts(vec![t[0].start, t[1].start], vec![t[0].len, t[1].len])
}

#[derive(Clone, Debug)]
struct Class {
    value: f64,
    ln1: f64,
    ln0: f64,
    // bounding box, 0-based, half-open
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
    ones: Vec<u32>,
    zeros: Vec<u32>,
}

impl Class {
    fn counts(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> (u32, u32) {
        let (a0, a1) = (r0.max(self.r0), r1.min(self.r1));
        let (b0, b1) = (c0.max(self.c0), c1.min(self.c1));
        if a0 >= a1 || b0 >= b1 {
            return (0, 0);
        }
        let w = self.c1 - self.c0 + 1;
        let at = |p: &[u32], r: usize, c: usize| p[(r - self.r0) * w + (c - self.c0)];
        let q = |p: &[u32]| at(p, a1, b1) + at(p, a0, b0) - at(p, a0, b1) - at(p, a1, b0);
        (q(&self.ones), q(&self.zeros))
    }
}

#[derive(Clone, Debug)]
enum Mode {
    /// No observed cells; every gain is zero.
    Flat,
    Classes(Vec<Class>),
    Direct { base: Vec<f64> },
}

/// Log-likelihood gain of placing one patch with rate `w` on a box, relative
/// to the state without that patch. Cells are grouped by the set of other
/// patches covering them, and each group keeps 2-D prefix counts of its
/// observed ones and zeros.
#[derive(Clone, Debug)]
pub struct GainField {
    rows: usize,
    cols: usize,
    label: Vec<u8>,
    observed: Vec<u8>,
    mode: Mode,
}

const MAX_CLASSES: usize = 4096;
const MAX_AREA_FACTOR: usize = 16;

impl GainField {
    /// Field for patch `k` of `state` (pass `k ≥ K` to exclude nothing).
    pub fn new(state: &RelationalState, k: usize) -> Self {
        Self::build(state, k, false)
    }

    /// Same field evaluated cell by cell.
    pub fn new_direct(state: &RelationalState, k: usize) -> Self {
        Self::build(state, k, true)
    }

    fn build(state: &RelationalState, k: usize, force_direct: bool) -> Self {
        let (rows, cols) = (state.rows(), state.cols());
        let mut label = vec![0u8; rows * cols];
        let mut observed = vec![0u8; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                label[i * cols + j] = state.latent_label(i, j) as u8;
                observed[i * cols + j] = state.latent_observed(i, j) as u8;
            }
        }
        let mut field = Self {
            rows,
            cols,
            label,
            observed,
            mode: Mode::Flat,
        };
        if !field.observed.contains(&1) {
            return field;
        }

        let gamma = state.gamma();
        let mut ids = vec![0u32; rows * cols];
        let mut values = vec![0.0f64];
        for (pi, p) in state.partition().patches.iter().enumerate() {
            if pi == k {
                continue;
            }
            let rate = p.rate() / gamma;
            let mut split: HashMap<u32, u32> = HashMap::new();
            for i in p.rect.start_at(0) - 1..p.rect.end_at(0) {
                for j in p.rect.start_at(1) - 1..p.rect.end_at(1) {
                    let old = ids[i * cols + j];
                    let new = *split.entry(old).or_insert_with(|| {
                        values.push(values[old as usize] + rate);
                        (values.len() - 1) as u32
                    });
                    ids[i * cols + j] = new;
                }
            }
        }

        let n = values.len();
        let mut bbox = vec![(usize::MAX, 0usize, usize::MAX, 0usize); n];
        for i in 0..rows {
            for j in 0..cols {
                let b = &mut bbox[ids[i * cols + j] as usize];
                b.0 = b.0.min(i);
                b.1 = b.1.max(i + 1);
                b.2 = b.2.min(j);
                b.3 = b.3.max(j + 1);
            }
        }
        let area: usize = bbox
            .iter()
            .filter(|b| b.0 != usize::MAX)
            .map(|b| (b.1 - b.0 + 1) * (b.3 - b.2 + 1))
            .sum();
        if force_direct || n > MAX_CLASSES || area > MAX_AREA_FACTOR * (rows + 1) * (cols + 1) {
            let base = ids.iter().map(|&id| values[id as usize]).collect();
            field.mode = Mode::Direct { base };
            return field;
        }

        let mut classes: Vec<Option<Class>> = bbox
            .iter()
            .zip(&values)
            .map(|(&(r0, r1, c0, c1), &value)| {
                if r0 == usize::MAX {
                    return None;
                }
                let rho = sigma(value);
                let size = (r1 - r0 + 1) * (c1 - c0 + 1);
                Some(Class {
                    value,
                    ln1: rho.ln(),
                    ln0: (-rho).ln_1p(),
                    r0,
                    r1,
                    c0,
                    c1,
                    ones: vec![0; size],
                    zeros: vec![0; size],
                })
            })
            .collect();
        for i in 0..rows {
            for j in 0..cols {
                let idx = i * cols + j;
                if field.observed[idx] == 0 {
                    continue;
                }
                let c = classes[ids[idx] as usize].as_mut().expect("class has a cell");
                let w = c.c1 - c.c0 + 1;
                let slot = (i - c.r0 + 1) * w + (j - c.c0 + 1);
                if field.label[idx] == 1 {
                    c.ones[slot] += 1;
                } else {
                    c.zeros[slot] += 1;
                }
            }
        }
        let mut kept = Vec::new();
        for c in classes.into_iter().flatten() {
            let mut c = c;
            let (h, w) = (c.r1 - c.r0 + 1, c.c1 - c.c0 + 1);
            for p in [&mut c.ones, &mut c.zeros] {
                for r in 1..h {
                    for col in 1..w {
                        p[r * w + col] += p[(r - 1) * w + col] + p[r * w + col - 1] - p[(r - 1) * w + col - 1];
                    }
                }
            }
            if c.ones[h * w - 1] + c.zeros[h * w - 1] > 0 {
                kept.push(c);
            }
        }
        field.mode = Mode::Classes(kept);
        field
    }

    /// Gain of a patch contributing `w = ω/γ` on `rect`.
    pub fn gain(&self, rect: &Rect, w: f64) -> f64 {
        let (r0, r1) = (rect.start_at(0) - 1, rect.end_at(0));
        let (c0, c1) = (rect.start_at(1) - 1, rect.end_at(1));
        match &self.mode {
            Mode::Flat => 0.0,
            Mode::Classes(classes) => {
                let mut g = 0.0;
                for c in classes {
                    let (n1, n0) = c.counts(r0, r1, c0, c1);
                    if n1 + n0 == 0 {
                        continue;
                    }
                    let rho = sigma(c.value + w);
                    g += n1 as f64 * (rho.ln() - c.ln1) + n0 as f64 * ((-rho).ln_1p() - c.ln0);
                }
                g
            }
            Mode::Direct { base } => {
                let mut g = 0.0;
                for i in r0..r1 {
                    for j in c0..c1 {
                        let idx = i * self.cols + j;
                        if self.observed[idx] == 0 {
                            continue;
                        }
                        let (a, b) = (sigma(base[idx]), sigma(base[idx] + w));
                        g += if self.label[idx] == 1 {
                            b.ln() - a.ln()
                        } else {
                            (-b).ln_1p() - (-a).ln_1p()
                        };
                    }
                }
                g
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Ancestors for the next stage. Slot 0 is the reference and keeps ancestor 0.
fn resample(logw: &[f64], scheme: Resampling, rng: &mut SppRng) -> Vec<usize> {
    let c = logw.len();
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let x = c as f64 * w[0];
    if scheme == Resampling::Multinomial || x <= 0.0 {
        let mut anc = vec![0; c];
        for a in anc.iter_mut().skip(1) {
            *a = sample_log_weights(logw, rng);
        }
        return anc;
    }
    // systematic offset drawn conditionally on the reference keeping at least
    // one offspring: its density is proportional to that offspring count
    let n = x.floor();
    let f = x - n;
    let p_low = f * (n + 1.0) / (n + f);
    let u = if rng.random::<f64>() < p_low {
        f * rng.random::<f64>()
    } else {
        f + (1.0 - f) * rng.random::<f64>()
    };
    let mut offspring = Vec::with_capacity(c);
    let (mut j, mut cum) = (0usize, w[0]);
    for point in 0..c {
        let pos = (u + point as f64) / c as f64;
        while pos >= cum && j + 1 < c {
            j += 1;
            cum += w[j];
        }
        offspring.push(j);
    }
    // one ancestor-0 offspring becomes the reference, in slot 0
    let first = offspring.iter().position(|&a| a == 0).unwrap_or(0);
    offspring.remove(first);
    let mut anc = Vec::with_capacity(c);
    anc.push(0);
    anc.extend(offspring);
    anc
}

/// Conditional SMC update of patch `k`'s box with its cost held fixed.
/// Returns whether the box changed.
pub fn move_patch_csmc(
    state: &mut RelationalState,
    k: usize,
    theta: f64,
    smc: &SmcConfig,
    force_reject: bool,
    rng: &mut SppRng,
) -> Result<bool> {
    move_patch_csmc_in(state, k, theta, smc, force_reject, rng, None)
}

/// [`move_patch_csmc`] with particle weights evaluated on `pool`. The draws
/// and the result do not depend on the pool.
pub(crate) fn move_patch_csmc_in(
    state: &mut RelationalState,
    k: usize,
    theta: f64,
    smc: &SmcConfig,
    force_reject: bool,
    rng: &mut SppRng,
    pool: Option<&ThreadPool>,
) -> Result<bool> {
    let count = state.partition().len();
    let patch = state
        .partition()
        .patches
        .get(k)
        .ok_or(SppError::PatchIndex { index: k, count })?
        .clone();
    if force_reject {
        return Ok(false);
    }
    let dims = [state.rows(), state.cols()];
    let stages = smc.stages_for(state.shape());
    let field = GainField::new(state, k);
    let scale = patch.cost / state.gamma();
    let gain = |t: &[Track; 2]| {
        let rect = tracks_rect(t);
        let w = scale / rect.volume() as f64;
        field.gain(&rect, w)
    };
    let refs: Vec<Vec<Track>> = (0..2)
        .map(|d| reference_trajectory(dims[d], patch.rect.start_at(d), patch.rect.len_at(d), stages))
        .collect();

    let c = smc.particles;
    let mut parts: Vec<[Track; 2]> = Vec::with_capacity(c);
    parts.push([refs[0][0], refs[1][0]]);
    for _ in 1..c {
        let mut t = [Track {
            start: 1,
            len: 1,
            stopped: true,
        }; 2];
        for d in 0..2 {
            let s = prior::sample_start(dims[d], theta, rng);
            t[d] = Track {
                start: s,
                len: 1,
                stopped: s == dims[d],
            };
        }
        parts.push(t);
    }
    let evaluate = |tracks: &[[Track; 2]]| -> Vec<f64> {
        match pool {
            Some(p) => p.install(|| tracks.par_iter().map(gain).collect()),
            None => tracks.iter().map(gain).collect(),
        }
    };
    let mut gains = evaluate(&parts);
    let mut logw = gains.clone();

    for i in 1..=stages {
        let last = i == stages;
        let anc = resample(&logw, smc.resampling, rng);
        let mut next = Vec::with_capacity(c);
        for (slot, &a) in anc.iter().enumerate() {
            next.push(if slot == 0 {
                [refs[0][i], refs[1][i]]
            } else {
                let p = parts[a];
                [
                    advance(p[0], dims[0], theta, last, rng),
                    advance(p[1], dims[1], theta, last, rng),
                ]
            });
        }
        // unchanged particles keep their ancestor's gain
        let moved: Vec<usize> = (0..c).filter(|&s| next[s] != parts[anc[s]]).collect();
        let fresh = evaluate(&moved.iter().map(|&s| next[s]).collect::<Vec<_>>());
        let mut next_gains: Vec<f64> = anc.iter().map(|&a| gains[a]).collect();
        for (&s, g) in moved.iter().zip(fresh) {
            next_gains[s] = g;
        }
        for slot in 0..c {
            logw[slot] = next_gains[slot] - gains[anc[slot]];
        }
        parts = next;
        gains = next_gains;
    }

    let chosen = sample_log_weights(&logw, rng);
    let rect = tracks_rect(&parts[chosen]);
    if rect == patch.rect {
        return Ok(false);
    }
    state.apply(Change::Move { index: k, rect })?;
    Ok(true)
}

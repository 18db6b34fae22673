//! Binary PGM pictures of 2-D partitions, one pixel per cell.

use std::path::Path;

use crate::error::{Result, SppError};
use crate::grid::Partition;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    /// Summed rate of the covering patches, scaled so the maximum is white.
    Rate,
    /// Patch borders in white on black.
    Outline,
}

impl std::str::FromStr for RenderMode {
    type Err = SppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(RenderMode::Rate),
            "outline" => Ok(RenderMode::Outline),
            other => Err(SppError::InvalidParameter(format!("unknown render mode {other:?}"))),
        }
    }
}

/// Grey levels, row-major, rows along the first dimension.
pub fn render_pixels(part: &Partition, mode: RenderMode) -> Result<Vec<u8>> {
    if part.shape.ndim() != 2 {
        return Err(SppError::NotTwoDimensional(part.shape.ndim()));
    }
    let (rows, cols) = (part.shape.len(0), part.shape.len(1));
    match mode {
        RenderMode::Rate => {
            let mut field = vec![0.0f64; rows * cols];
            for p in &part.patches {
                let w = p.rate();
                for i in p.rect.start_at(0) - 1..p.rect.end_at(0) {
                    for j in p.rect.start_at(1) - 1..p.rect.end_at(1) {
                        field[i * cols + j] += w;
                    }
                }
            }
            let max = field.iter().copied().fold(0.0, f64::max);
            Ok(field
                .iter()
                .map(|&v| {
                    if max > 0.0 {
                        (255.0 * (v / max).min(1.0)).round() as u8
                    } else {
                        0
                    }
                })
                .collect())
        }
        RenderMode::Outline => {
            let mut px = vec![0u8; rows * cols];
            for p in &part.patches {
                let (r0, r1) = (p.rect.start_at(0) - 1, p.rect.end_at(0) - 1);
                let (c0, c1) = (p.rect.start_at(1) - 1, p.rect.end_at(1) - 1);
                for i in r0..=r1 {
                    for j in c0..=c1 {
                        if i == r0 || i == r1 || j == c0 || j == c1 {
                            px[i * cols + j] = 255;
                        }
                    }
                }
            }
            Ok(px)
        }
    }
}

/// Complete P5 file contents.
pub fn render_pgm(part: &Partition, mode: RenderMode) -> Result<Vec<u8>> {
    let px = render_pixels(part, mode)?;
    let mut out = format!("P5\n{} {}\n255\n", part.shape.len(1), part.shape.len(0)).into_bytes();
    out.extend_from_slice(&px);
    Ok(out)
}

pub fn render_partition(part: &Partition, path: impl AsRef<Path>, mode: RenderMode) -> Result<()> {
    let bytes = render_pgm(part, mode)?;
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| SppError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ArrayShape, Patch, Rect};

    fn shape() -> ArrayShape {
        ArrayShape::new(vec![4, 5]).unwrap()
    }

    #[test]
    fn empty_is_black() {
        let px = render_pixels(&Partition::empty(shape(), 1.0), RenderMode::Rate).unwrap();
        assert!(px.iter().all(|&p| p == 0));
        let pgm = render_pgm(&Partition::empty(shape(), 1.0), RenderMode::Rate).unwrap();
        assert!(pgm.starts_with(b"P5\n5 4\n255\n"));
        assert_eq!(pgm.len(), 11 + 20);
    }

    #[test]
    fn full_cover_outline_is_frame() {
        let s = shape();
        let part = Partition::new(s.clone(), 1.0, vec![Patch::new(Rect::full(&s), 0.5).unwrap()]).unwrap();
        let px = render_pixels(&part, RenderMode::Outline).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let border = i == 0 || i == 3 || j == 0 || j == 4;
                assert_eq!(px[i * 5 + j], if border { 255 } else { 0 });
            }
        }
    }

    #[test]
    fn overlap_is_brighter() {
        let s = shape();
        let a = Patch::new(Rect::new(&s, vec![1, 1], vec![3, 3]).unwrap(), 0.3).unwrap();
        let b = Patch::new(Rect::new(&s, vec![2, 2], vec![3, 4]).unwrap(), 0.4).unwrap();
        let part = Partition::new(s, 1.0, vec![a, b]).unwrap();
        let px = render_pixels(&part, RenderMode::Rate).unwrap();
        let (only_a, only_b, both) = (px[0], px[3 * 5 + 4], px[5 + 1]);
        assert!(both > only_a && both > only_b);
        assert!(render_pixels(&Partition::empty(ArrayShape::new(vec![3]).unwrap(), 1.0), RenderMode::Rate).is_err());
    }
}

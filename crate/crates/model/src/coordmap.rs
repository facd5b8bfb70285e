//! Coordinate maps: constant channels holding a linear ramp in [-1, 1].

use aqa_autodiff::{Real, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::{CoordKind, CoordSpan};
use crate::error::{ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Time,
    Freq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordMap {
    pub kind: Axis,
    pub h: usize,
    pub w: usize,
    /// Row-major `h x w`.
    pub grid: Vec<f64>,
}

impl CoordMap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.grid[row * self.w + col]
    }
}

fn ramp(i: usize, n: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / (n - 1) as f64
}

pub fn axes(kind: CoordKind) -> Vec<Axis> {
    let mut out = Vec::new();
    if kind.has_time() {
        out.push(Axis::Time);
    }
    if kind.has_freq() {
        out.push(Axis::Freq);
    }
    out
}

/// Time maps vary along columns, frequency maps along rows.
pub fn make_coord_maps(h: usize, w: usize, kind: CoordKind) -> Result<Vec<CoordMap>> {
    if h < 2 || w < 2 {
        return Err(ModelError::DegenerateGrid { h, w });
    }
    Ok(axes(kind)
        .into_iter()
        .map(|axis| {
            let grid = (0..h)
                .flat_map(|r| {
                    (0..w).map(move |c| match axis {
                        Axis::Time => ramp(c, w),
                        Axis::Freq => ramp(r, h),
                    })
                })
                .collect();
            CoordMap { kind: axis, h, w, grid }
        })
        .collect())
}

/// Map channels for a batch, shaped `(batch, channels, h, w)`.
///
/// With [`CoordSpan::Valid`] each time map ramps over that sample's valid
/// columns and holds +1 across the padding.
pub fn coord_tensor<T: Real>(
    kind: CoordKind,
    span: CoordSpan,
    h: usize,
    w: usize,
    valid_cols: &[usize],
) -> Result<Tensor<T>> {
    let b = valid_cols.len();
    let maps = make_coord_maps(h, w, kind)?;
    let mut data = Vec::with_capacity(b * maps.len() * h * w);
    for &valid in valid_cols {
        for map in &maps {
            let ramp_w = valid.min(w);
            if map.kind == Axis::Time && span == CoordSpan::Valid && (2..w).contains(&ramp_w) {
                for _ in 0..h {
                    data.extend((0..w).map(|c| T::from_f64_lossy(if c < ramp_w { ramp(c, ramp_w) } else { 1.0 })));
                }
            } else {
                data.extend(map.grid.iter().map(|&v| T::from_f64_lossy(v)));
            }
        }
    }
    Ok(Tensor::from_vec(&[b, maps.len(), h, w], data)?)
}

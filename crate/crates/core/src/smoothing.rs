//! Convolution of a lattice field with the indicator of the unit square
//! `(-0.5, 0.5)^2`.
//!
//! A horizontal edge from `(i, j)` to `(i + 1, j)` carrying `v` contributes
//! `v * tri(x - i - 0.5) * box(y - j)` to the first component; vertical
//! edges contribute symmetrically to the second. Both components are
//! piecewise linear with kinks on the lines `x, y in Z + 0.5`, and the
//! smoothed divergence is piecewise constant, equal on each open unit square
//! to the lattice divergence at its center.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Axis, EdgeField, EdgeId, OrientedEdge, Rect, SparseField, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousPoint {
    pub x: f64,
    pub y: f64,
}

impl ContinuousPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        ContinuousPoint { x, y }
    }

    fn nearest_vertex(&self) -> Vertex {
        Vertex::new(self.x.round() as i64, self.y.round() as i64)
    }
}

impl std::str::FromStr for ContinuousPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad point `{s}` (expected X,Y)"));
        let (x, y) = s.split_once(',').ok_or_else(bad)?;
        let x: f64 = x.trim().parse().map_err(|_| bad())?;
        let y: f64 = y.trim().parse().map_err(|_| bad())?;
        if !x.is_finite() || !y.is_finite() {
            return Err(bad());
        }
        Ok(ContinuousPoint { x, y })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothedSample {
    pub h_component: f64,
    pub v_component: f64,
}

pub fn tri(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// Indicator of the open interval `(-0.5, 0.5)`.
pub fn box_kernel(t: f64) -> f64 {
    if t.abs() < 0.5 {
        1.0
    } else {
        0.0
    }
}

fn tri_slope(t: f64) -> f64 {
    if t.abs() >= 1.0 || t == 0.0 {
        0.0
    } else {
        -t.signum()
    }
}

/// One unit of flow from `(0,0)` to `(1,0)`, zero elsewhere.
pub fn unit_edge_field() -> SparseField {
    [(OrientedEdge::east(0, 0), 1)].into_iter().collect()
}

fn on_half_gridline(t: f64) -> bool {
    (t - 0.5).fract() == 0.0
}

/// Sums `weight(edge) * value` over the horizontal and vertical edges that
/// can reach `p` (all within distance 2).
fn accumulate<F, W>(field: &F, p: ContinuousPoint, axis: Axis, weight: W) -> f64
where
    F: EdgeField + ?Sized,
    W: Fn(f64, f64) -> f64,
{
    let (cx, cy) = (p.x.floor() as i64, p.y.floor() as i64);
    let mut sum = 0.0;
    for j in cy - 1..=cy + 2 {
        for i in cx - 1..=cx + 2 {
            let (along, across) = match axis {
                Axis::H => (p.x - i as f64 - 0.5, p.y - j as f64),
                Axis::V => (p.y - j as f64 - 0.5, p.x - i as f64),
            };
            let w = weight(along, across);
            if w != 0.0 {
                sum += w * field.canonical_value(EdgeId::new(Vertex::new(i, j), axis)) as f64;
            }
        }
    }
    sum
}

/// Value of the smoothed field at `p`.
pub fn smooth_eval<F: EdgeField + ?Sized>(field: &F, p: ContinuousPoint) -> SmoothedSample {
    let kernel = |along: f64, across: f64| tri(along) * box_kernel(across);
    SmoothedSample {
        h_component: accumulate(field, p, Axis::H, kernel),
        v_component: accumulate(field, p, Axis::V, kernel),
    }
}

/// Divergence of the smoothed field at `p`, from the exact slopes of the
/// piecewise-linear components. Undefined on the half-integer gridlines.
pub fn smooth_div<F: EdgeField + ?Sized>(field: &F, p: ContinuousPoint) -> Result<f64> {
    if on_half_gridline(p.x) || on_half_gridline(p.y) {
        return Err(Error::SingularLocus { x: p.x, y: p.y });
    }
    let slope = |along: f64, across: f64| tri_slope(along) * box_kernel(across);
    Ok(accumulate(field, p, Axis::H, slope) + accumulate(field, p, Axis::V, slope))
}

/// The lattice divergence that [`smooth_div`] should reproduce at `p`.
pub fn nearest_vertex_divergence<F: EdgeField + ?Sized>(field: &F, p: ContinuousPoint) -> i64 {
    crate::lattice::divergence(field, p.nearest_vertex())
}

fn crosses_kink(t: f64, h: f64) -> bool {
    // kinks on the half-integer lattice; integers included
    (2.0 * (t - h)).floor() != (2.0 * (t + h)).floor() || (2.0 * (t - h)).fract() == 0.0
}

/// Central-difference divergence with step `h`.
pub fn fd_divergence<F: EdgeField + ?Sized>(field: &F, p: ContinuousPoint, h: f64) -> Result<f64> {
    if h.is_nan() || h <= 0.0 || crosses_kink(p.x, h) || crosses_kink(p.y, h) {
        return Err(Error::StencilCrossesKink { x: p.x, y: p.y, h });
    }
    let at = |x: f64, y: f64| smooth_eval(field, ContinuousPoint::new(x, y));
    let dh = (at(p.x + h, p.y).h_component - at(p.x - h, p.y).h_component) / (2.0 * h);
    let dv = (at(p.x, p.y + h).v_component - at(p.x, p.y - h).v_component) / (2.0 * h);
    Ok(dh + dv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RasterSample {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub v: f64,
    pub div: f64,
}

/// Samples the smoothed field on the squares around the vertices of `rect`
/// at `resolution` points per unit. Sample points sit at offsets
/// `(k + 0.25) / resolution`, which never land on a half-integer line.
pub fn raster<F: EdgeField + ?Sized>(field: &F, rect: Rect, resolution: u32) -> Result<Vec<RasterSample>> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let cells = rect.cell_count() * (resolution as u128).pow(2);
    if cells > 1_000_000 {
        return Err(Error::Capacity(format!("raster of {cells} samples exceeds 1e6")));
    }
    let step = 1.0 / resolution as f64;
    let coord = |base: i64, k: i64| base as f64 - 0.5 + (k as f64 + 0.25) * step;
    let (nx, ny) = (rect.width() * resolution as i64, rect.height() * resolution as i64);
    let mut out = Vec::with_capacity((nx * ny) as usize);
    for ky in 0..ny {
        for kx in 0..nx {
            let p = ContinuousPoint::new(coord(rect.x0, kx), coord(rect.y0, ky));
            let s = smooth_eval(field, p);
            out.push(RasterSample {
                x: p.x,
                y: p.y,
                h: s.h_component,
                v: s.v_component,
                div: smooth_div(field, p)?,
            });
        }
    }
    Ok(out)
}

pub fn raster_csv(samples: &[RasterSample]) -> String {
    let mut out = String::from("x,y,h,v,div\n");
    for s in samples {
        out.push_str(&format!("{},{},{},{},{}\n", s.x, s.y, s.h, s.v, s.div));
    }
    out
}

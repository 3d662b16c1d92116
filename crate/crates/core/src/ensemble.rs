//! Periodic tilings of a fragment and the uniform shift ensemble `v_n`.
//!
//! The tiling with shift `(a, b)` places a copy of the fragment on every
//! block `[a + i s, a + i s + s) x [b + j s, b + j s + s)`. Edges inside a
//! block carry the fragment flow; edges between blocks carry 0. Drawing the
//! shift uniformly from the `s^2` possibilities gives a stationary field.
//!
//! Laws are computed exactly by counting. Two routes exist for every law:
//! enumerating shifts with the observation point fixed, and enumerating the
//! observation point over one fundamental domain with the shift fixed.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fragment::{FlowTree, Fragment, ImplicitFragment, Level};
use crate::lattice::{divergence, Axis, EdgeField, EdgeId, OrientedEdge, Rect, Vertex};
use crate::law::{ExactDist, Rational, WindowLaw};

pub const MAX_WINDOW: usize = 16;

/// Largest number of vertices [`sample_patch`] will materialize.
pub const MAX_PATCH_VERTICES: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Shift {
    pub a: i64,
    pub b: i64,
}

impl Shift {
    pub const fn new(a: i64, b: i64) -> Self {
        Shift { a, b }
    }
}

impl std::str::FromStr for Shift {
    type Err = Error;

    /// Parses `A,B`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad shift `{s}` (expected A,B)"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        Ok(Shift {
            a: a.trim().parse().map_err(|_| bad())?,
            b: b.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// A fragment repeated with period `s` in both axes, offset by `shift`.
#[derive(Debug, Clone, Copy)]
pub struct PeriodicField<'a, T: FlowTree + ?Sized> {
    tree: &'a T,
    shift: Shift,
}

impl<'a, T: FlowTree + ?Sized> PeriodicField<'a, T> {
    pub fn new(tree: &'a T, shift: Shift) -> Result<Self> {
        let s = tree.side();
        if !(0..s).contains(&shift.a) || !(0..s).contains(&shift.b) {
            return Err(Error::InvalidArgument(format!(
                "shift ({}, {}) out of range 0..{s}",
                shift.a, shift.b
            )));
        }
        Ok(PeriodicField { tree, shift })
    }

    pub fn shift(&self) -> Shift {
        self.shift
    }

    pub fn tree(&self) -> &'a T {
        self.tree
    }
}

impl<T: FlowTree + ?Sized> EdgeField for PeriodicField<'_, T> {
    fn canonical_value(&self, id: EdgeId) -> i64 {
        let s = self.tree.side();
        let local = Vertex::new(
            (id.vertex.x - self.shift.a).rem_euclid(s),
            (id.vertex.y - self.shift.b).rem_euclid(s),
        );
        let e = OrientedEdge::new(local, id.axis.positive_dir());
        let head = e.head();
        if head.x < s && head.y < s {
            self.tree.flow_inside(e)
        } else {
            0
        }
    }
}

/// Value of the tiling with the given shift on `e`.
pub fn field_value<T: FlowTree + ?Sized>(tree: &T, shift: Shift, e: OrientedEdge) -> Result<i64> {
    Ok(PeriodicField::new(tree, shift)?.value(e))
}

/// The uniform law on the `s^2` shifts of a fragment tiling.
#[derive(Debug, Clone, Copy)]
pub struct ShiftEnsemble<'a, T: FlowTree + ?Sized> {
    tree: &'a T,
}

impl<'a, T: FlowTree + ?Sized> ShiftEnsemble<'a, T> {
    pub fn new(tree: &'a T) -> Self {
        ShiftEnsemble { tree }
    }

    pub fn len(&self) -> u64 {
        self.tree.level().vertex_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn prob_each(&self) -> Rational {
        Rational::new(1, self.len() as i128)
    }

    pub fn field(&self, shift: Shift) -> PeriodicField<'a, T> {
        PeriodicField { tree: self.tree, shift }
    }

    /// Counts `observe(field)` over every shift, in parallel over rows.
    fn count<K, F>(&self, observe: F) -> HashMap<K, u64>
    where
        K: Eq + Hash + Send,
        F: Fn(&PeriodicField<'a, T>) -> K + Sync,
    {
        let s = self.tree.side();
        (0..s)
            .into_par_iter()
            .fold(HashMap::new, |mut acc, b| {
                for a in 0..s {
                    *acc.entry(observe(&self.field(Shift::new(a, b)))).or_insert(0) += 1;
                }
                acc
            })
            .reduce(HashMap::new, merge_counts)
    }

    /// Law of the divergence at `v`, by enumerating shifts.
    pub fn div_law_at(&self, v: Vertex) -> ExactDist {
        ExactDist::from_counts(self.count(|f| divergence(f, v)), self.len())
    }

    /// Law of the value on `e`, by enumerating shifts.
    pub fn edge_law_at(&self, e: OrientedEdge) -> ExactDist {
        ExactDist::from_counts(self.count(|f| f.value(e)), self.len())
    }

    /// Joint law on a window, by enumerating shifts.
    pub fn window_law(&self, edges: &[OrientedEdge]) -> Result<WindowLaw> {
        check_window(edges)?;
        let counts = self.count(|f| edges.iter().map(|&e| f.value(e)).collect::<Vec<i64>>());
        Ok(WindowLaw::from_counts(edges.to_vec(), counts, self.len()))
    }

    /// Joint law on a window, by sliding the window over one fundamental
    /// domain of the unshifted tiling.
    pub fn window_law_by_positions(&self, edges: &[OrientedEdge]) -> Result<WindowLaw> {
        check_window(edges)?;
        let s = self.tree.side();
        let base = self.field(Shift::new(0, 0));
        let counts = (0..s)
            .into_par_iter()
            .fold(HashMap::new, |mut acc, ty| {
                for tx in 0..s {
                    let vals: Vec<i64> = edges.iter().map(|e| base.value(e.translate(-tx, -ty))).collect();
                    *acc.entry(vals).or_insert(0) += 1;
                }
                acc
            })
            .reduce(HashMap::new, merge_counts);
        Ok(WindowLaw::from_counts(edges.to_vec(), counts, self.len()))
    }
}

fn merge_counts<K: Eq + Hash>(mut a: HashMap<K, u64>, b: HashMap<K, u64>) -> HashMap<K, u64> {
    for (k, c) in b {
        *a.entry(k).or_insert(0) += c;
    }
    a
}

fn check_window(edges: &[OrientedEdge]) -> Result<()> {
    if edges.len() > MAX_WINDOW {
        return Err(Error::WindowTooLarge {
            size: edges.len(),
            max: MAX_WINDOW,
        });
    }
    Ok(())
}

/// Law of `(div v_n)_x`: `+1` with probability `1 - 1/s^2` and the root value
/// `-(s^2 - 1)` with probability `1/s^2`. The same at every vertex.
pub fn div_law(level: Level) -> ExactDist {
    let total = level.vertex_count();
    if total == 1 {
        return ExactDist::point(0);
    }
    ExactDist::from_counts([(1, total - 1), (level.root_divergence(), 1)], total)
}

/// Law of the value on an East (`H`) or North (`V`) edge, by scanning the
/// `s^2` edge positions of one fundamental domain. Positions whose head
/// leaves the block carry 0.
pub fn edge_law(frag: &Fragment, axis: Axis) -> ExactDist {
    let s = frag.side();
    let dir = axis.positive_dir();
    let counts = (0..s)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<i64, u64>, y| {
            for x in 0..s {
                let e = OrientedEdge::new(Vertex::new(x, y), dir);
                let v = if frag.contains(e.head()) {
                    frag.flow_inside(e)
                } else {
                    0
                };
                *acc.entry(v).or_insert(0) += 1;
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        });
    ExactDist::from_counts(counts, frag.level().vertex_count())
}

/// Exact joint law of `v_n` on a window of at most [`MAX_WINDOW`] edges.
pub fn window_law<T: FlowTree + ?Sized>(tree: &T, edges: &[OrientedEdge]) -> Result<WindowLaw> {
    ShiftEnsemble::new(tree).window_law(edges)
}

/// One draw of `v_n` restricted to a rectangle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Patch {
    pub level: u32,
    pub seed: u64,
    pub shift: Shift,
    pub rect: Rect,
    /// Every canonical edge with at least one endpoint in `rect`, zeros
    /// included, sorted by id.
    pub edges: Vec<(EdgeId, i64)>,
}

impl Patch {
    /// CSV with header `x,y,axis,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,axis,value\n");
        for (id, v) in &self.edges {
            out.push_str(&format!("{},{},{},{}\n", id.vertex.x, id.vertex.y, id.axis, v));
        }
        out
    }
}

impl EdgeField for Patch {
    /// Edges outside the patch read as 0.
    fn canonical_value(&self, id: EdgeId) -> i64 {
        self.edges
            .binary_search_by(|(k, _)| k.cmp(&id))
            .map(|i| self.edges[i].1)
            .unwrap_or(0)
    }
}

/// Draws a shift uniformly with a ChaCha8 generator seeded from `seed` and
/// materializes every edge touching `rect`. Works for every level up to 31.
pub fn sample_patch(n: u32, seed: u64, rect: Rect) -> Result<Patch> {
    let level = Level::new(n)?;
    if rect.cell_count() > MAX_PATCH_VERTICES {
        return Err(Error::Capacity(format!(
            "rectangle has {} vertices, limit {MAX_PATCH_VERTICES}",
            rect.cell_count()
        )));
    }
    let tree = ImplicitFragment::new(level);
    let s = level.side() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // gen_range rejects out-of-zone draws, so every index is exactly 1/s^2
    let k = rng.gen_range(0..s * s);
    let shift = Shift::new((k % s) as i64, (k / s) as i64);
    let field = PeriodicField::new(&tree, shift)?;

    let mut edges = Vec::new();
    for y in rect.y0 - 1..=rect.y1 {
        for x in rect.x0 - 1..=rect.x1 {
            let v = Vertex::new(x, y);
            if y >= rect.y0 {
                let id = EdgeId::new(v, Axis::H);
                edges.push((id, field.canonical_value(id)));
            }
            if x >= rect.x0 {
                let id = EdgeId::new(v, Axis::V);
                edges.push((id, field.canonical_value(id)));
            }
        }
    }
    edges.sort_by_key(|(id, _)| *id);
    Ok(Patch {
        level: n,
        seed,
        shift,
        rect,
        edges,
    })
}

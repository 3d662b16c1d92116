//! The recursive spanning-tree fragments and their unit-source flows.
//!
//! The level-`n` fragment lives on the `(2^n - 1) x (2^n - 1)` grid with the
//! lower-left vertex at the origin. Level 1 is a single vertex. Level `n + 1`
//! places four copies of level `n` in the quadrants around a central cross
//! (row `y = s`, column `x = s`, where `s = 2^n - 1`). The two bottom copies
//! are turned upside down so that every copy root sits next to the cross row,
//! and each copy is attached by one vertical connector edge at its root. The
//! cross drains along the row toward `(s, s)` and then down the column to the
//! new root `(s, 0)`.
//!
//! Every non-root vertex is a unit source and the root absorbs everything,
//! so the flow through a tree edge is the size of the subtree hanging below
//! it, signed toward the root.
//!
//! Two evaluators implement [`FlowTree`]: [`Fragment`] materializes parent
//! pointers and subtree sizes (levels up to [`MAX_MATERIALIZED_LEVEL`]), and
//! [`ImplicitFragment`] answers node queries in `O(n)` by descending the
//! recursion with closed-form cross sizes (levels up to [`MAX_LEVEL`]).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{divergence, Axis, Dir, EdgeField, EdgeId, OrientedEdge, Vertex};

/// Largest level whose flow values `2^(2n) - 2^(n+1)` fit in an `i64`.
pub const MAX_LEVEL: u32 = 31;

/// Largest level that [`build_fragment`] will materialize (about 1.7e7
/// vertices).
pub const MAX_MATERIALIZED_LEVEL: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Level(u32);

impl Level {
    pub fn new(n: u32) -> Result<Level> {
        if (1..=MAX_LEVEL).contains(&n) {
            Ok(Level(n))
        } else {
            Err(Error::LevelOutOfRange {
                level: n,
                max: MAX_LEVEL,
            })
        }
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    /// Grid side `2^n - 1`.
    pub const fn side(self) -> i64 {
        (1i64 << self.0) - 1
    }

    /// Number of vertices `(2^n - 1)^2`, which is also the number of shifts.
    pub const fn vertex_count(self) -> u64 {
        let s = self.side() as u64;
        s * s
    }

    /// Root at the bottom middle, `(2^(n-1) - 1, 0)`.
    pub const fn root(self) -> Vertex {
        Vertex::new((1i64 << (self.0 - 1)) - 1, 0)
    }

    /// `2^(2n) - 2^(n+1)`: the total inflow at the root and the largest flow
    /// value anywhere in the fragment.
    pub const fn max_flow(self) -> i64 {
        (self.vertex_count() - 1) as i64
    }

    pub const fn root_divergence(self) -> i64 {
        -self.max_flow()
    }

    pub fn prev(self) -> Option<Level> {
        (self.0 > 1).then(|| Level(self.0 - 1))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One vertex of the tree: the direction of its edge toward the root and the
/// number of vertices in its subtree (itself included).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub parent: Option<Dir>,
    pub subtree: u64,
}

/// Read access to a fragment's tree and flow.
pub trait FlowTree: Sync {
    fn level(&self) -> Level;

    /// Tree data at `v`. Callers guarantee `v` is inside the grid.
    fn node(&self, v: Vertex) -> Node;

    fn side(&self) -> i64 {
        self.level().side()
    }

    fn root(&self) -> Vertex {
        self.level().root()
    }

    fn contains(&self, v: Vertex) -> bool {
        let s = self.side();
        (0..s).contains(&v.x) && (0..s).contains(&v.y)
    }

    /// Flow on an edge whose endpoints are both inside the grid.
    fn flow_inside(&self, e: OrientedEdge) -> i64 {
        let tail = self.node(e.tail);
        if tail.parent == Some(e.dir) {
            return tail.subtree as i64;
        }
        let head = self.node(e.head());
        if head.parent == Some(e.dir.reverse()) {
            return -(head.subtree as i64);
        }
        0
    }

    /// Signed flow through `e`; zero on non-tree edges.
    fn flow(&self, e: OrientedEdge) -> Result<i64> {
        if self.contains(e.tail) && self.contains(e.head()) {
            Ok(self.flow_inside(e))
        } else {
            Err(Error::OutOfBounds {
                edge: e,
                side: self.side(),
            })
        }
    }
}

const NO_PARENT: u8 = 4;

fn encode(dir: Option<Dir>) -> u8 {
    match dir {
        Some(Dir::East) => 0,
        Some(Dir::North) => 1,
        Some(Dir::West) => 2,
        Some(Dir::South) => 3,
        None => NO_PARENT,
    }
}

fn decode(code: u8) -> Option<Dir> {
    match code {
        0 => Some(Dir::East),
        1 => Some(Dir::North),
        2 => Some(Dir::West),
        3 => Some(Dir::South),
        _ => None,
    }
}

/// A materialized fragment: parent directions and subtree sizes on a dense
/// row-major grid.
#[derive(Clone, PartialEq, Eq)]
pub struct Fragment {
    level: Level,
    parent: Vec<u8>,
    subtree: Vec<u32>,
}

impl fmt::Debug for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fragment")
            .field("level", &self.level)
            .field("side", &self.side())
            .finish()
    }
}

impl Fragment {
    fn index(&self, v: Vertex) -> usize {
        (v.y * self.side() + v.x) as usize
    }

    fn vertex_at(&self, idx: usize) -> Vertex {
        let s = self.side() as usize;
        Vertex::new((idx % s) as i64, (idx / s) as i64)
    }

    /// Computes subtree sizes by peeling leaves toward the root. Returns
    /// `None` unless the parent pointers form a single tree on the grid.
    fn from_parents(level: Level, parent: Vec<u8>) -> Option<Fragment> {
        let s = level.side();
        let total = parent.len();
        let idx = |v: Vertex| (v.y * s + v.x) as usize;
        let mut parent_idx = vec![u32::MAX; total];
        let mut children = vec![0u8; total];
        let mut roots = 0;
        for (i, &code) in parent.iter().enumerate() {
            let v = Vertex::new(i as i64 % s, i as i64 / s);
            match decode(code) {
                None => roots += 1,
                Some(d) => {
                    let p = v.step(d);
                    if !(0..s).contains(&p.x) || !(0..s).contains(&p.y) {
                        return None;
                    }
                    parent_idx[i] = idx(p) as u32;
                    children[idx(p)] += 1;
                }
            }
        }
        if roots != 1 {
            return None;
        }
        let mut subtree = vec![1u32; total];
        let mut stack: Vec<usize> = (0..total).filter(|&i| children[i] == 0).collect();
        let mut done = 0;
        while let Some(i) = stack.pop() {
            done += 1;
            if parent_idx[i] == u32::MAX {
                continue;
            }
            let p = parent_idx[i] as usize;
            subtree[p] += subtree[i];
            children[p] -= 1;
            if children[p] == 0 {
                stack.push(p);
            }
        }
        (done == total).then_some(Fragment { level, parent, subtree })
    }

    /// Tree edges with their flow, on East/North representatives. Exactly
    /// `s^2 - 1` entries, all nonzero.
    pub fn tree_edges(&self) -> impl Iterator<Item = (EdgeId, i64)> + '_ {
        self.parent.iter().enumerate().filter_map(move |(i, &code)| {
            let dir = decode(code)?;
            let (id, sign) = OrientedEdge::new(self.vertex_at(i), dir).canonical();
            Some((id, sign * self.subtree[i] as i64))
        })
    }

    pub fn tree_flow(&self) -> BTreeMap<EdgeId, i64> {
        self.tree_edges().collect()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.parent.len()).map(move |i| self.vertex_at(i))
    }

    pub fn to_export(&self) -> FragmentExport {
        FragmentExport {
            level: self.level.get(),
            side: self.side(),
            root: self.root(),
            edges: self
                .tree_edges()
                .map(|(id, value)| ExportEdge {
                    x: id.vertex.x,
                    y: id.vertex.y,
                    axis: id.axis,
                    value,
                })
                .collect(),
        }
    }
}

impl FlowTree for Fragment {
    fn level(&self) -> Level {
        self.level
    }

    fn node(&self, v: Vertex) -> Node {
        let i = self.index(v);
        Node {
            parent: decode(self.parent[i]),
            subtree: self.subtree[i] as u64,
        }
    }
}

/// The fragment viewed as a field on the whole lattice, zero outside the grid.
impl EdgeField for Fragment {
    fn canonical_value(&self, id: EdgeId) -> i64 {
        self.flow(id.positive()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub x: i64,
    pub y: i64,
    pub axis: Axis,
    pub value: i64,
}

/// JSON shape of an exported fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentExport {
    pub level: u32,
    pub side: i64,
    pub root: Vertex,
    pub edges: Vec<ExportEdge>,
}

/// Fragment of any level up to [`MAX_LEVEL`], evaluated on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImplicitFragment {
    level: Level,
}

impl ImplicitFragment {
    pub fn new(level: Level) -> Self {
        ImplicitFragment { level }
    }
}

impl FlowTree for ImplicitFragment {
    fn level(&self) -> Level {
        self.level
    }

    fn node(&self, v: Vertex) -> Node {
        implicit_node(self.level.get(), v.x, v.y)
    }
}

impl EdgeField for ImplicitFragment {
    fn canonical_value(&self, id: EdgeId) -> i64 {
        self.flow(id.positive()).unwrap_or(0)
    }
}

fn implicit_node(n: u32, x: i64, y: i64) -> Node {
    if n == 1 {
        return Node {
            parent: None,
            subtree: 1,
        };
    }
    // child side, child vertex count, child root column
    let m = (1i64 << (n - 1)) - 1;
    let c = (m * m) as u64;
    let r = (m - 1) / 2;
    let m_u = m as u64;
    let center = 1 + m_u + 2 * (m_u + 2 * c);

    if x != m && y != m {
        let top = y > m;
        let lx = if x > m { x - m - 1 } else { x };
        let ly = if top { y - m - 1 } else { m - 1 - y };
        let child = implicit_node(n - 1, lx, ly);
        let parent = match child.parent {
            Some(d) if top => d,
            Some(d) => d.flip_vertical(),
            None if top => Dir::South,
            None => Dir::North,
        };
        return Node {
            parent: Some(parent),
            subtree: child.subtree,
        };
    }
    if y == m && x < m {
        let attached = if x >= r { 2 * c } else { 0 };
        return Node {
            parent: Some(Dir::East),
            subtree: (x as u64 + 1) + attached,
        };
    }
    if y == m && x > m {
        let attached = if x <= m + 1 + r { 2 * c } else { 0 };
        return Node {
            parent: Some(Dir::West),
            subtree: (2 * m - x + 1) as u64 + attached,
        };
    }
    // column x = m
    if y > m {
        Node {
            parent: Some(Dir::South),
            subtree: (2 * m - y + 1) as u64,
        }
    } else if y > 0 {
        Node {
            parent: Some(Dir::South),
            subtree: center + (m - y) as u64,
        }
    } else if m == 0 {
        unreachable!("level >= 2 has m >= 1")
    } else {
        Node {
            parent: None,
            subtree: center + m_u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    BL,
    BR,
    TL,
    TR,
}

/// Placement of one level-`(n-1)` copy inside the level-`n` fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyDescriptor {
    pub quadrant: Quadrant,
    pub offset: Vertex,
    pub flipped: bool,
    /// Tree edge from the copy root to the cross row.
    pub connector: OrientedEdge,
}

impl CopyDescriptor {
    /// Position in the parent grid of a vertex given in copy-local
    /// coordinates.
    pub fn place(&self, local: Vertex, child_side: i64) -> Vertex {
        let y = if self.flipped {
            child_side - 1 - local.y
        } else {
            local.y
        };
        Vertex::new(self.offset.x + local.x, self.offset.y + y)
    }
}

/// The four copies of level `n - 1` inside level `n`, in BL, BR, TL, TR order.
pub fn copy_descriptors(level: Level) -> Result<[CopyDescriptor; 4]> {
    let child = level
        .prev()
        .ok_or_else(|| Error::InvalidArgument(format!("level {level} has no copies (need n >= 2)")))?;
    let m = child.side();
    let r = child.root().x;
    let make = |quadrant, ox: i64, oy: i64, flipped: bool| {
        let connector = if flipped {
            OrientedEdge::new(Vertex::new(ox + r, oy + m - 1), Dir::North)
        } else {
            OrientedEdge::new(Vertex::new(ox + r, oy), Dir::South)
        };
        CopyDescriptor {
            quadrant,
            offset: Vertex::new(ox, oy),
            flipped,
            connector,
        }
    };
    Ok([
        make(Quadrant::BL, 0, 0, true),
        make(Quadrant::BR, m + 1, 0, true),
        make(Quadrant::TL, 0, m + 1, false),
        make(Quadrant::TR, m + 1, m + 1, false),
    ])
}

fn grow(prev: &[u8], level: Level) -> Vec<u8> {
    let m = level.prev().expect("grow needs level >= 2").side();
    let s = level.side();
    let mut parent = vec![NO_PARENT; (s * s) as usize];
    let idx = |v: Vertex| (v.y * s + v.x) as usize;

    for desc in copy_descriptors(level).expect("level >= 2") {
        for ly in 0..m {
            for lx in 0..m {
                let src = decode(prev[(ly * m + lx) as usize]);
                let dir = match src {
                    Some(d) if desc.flipped => d.flip_vertical(),
                    Some(d) => d,
                    None => desc.connector.dir,
                };
                parent[idx(desc.place(Vertex::new(lx, ly), m))] = encode(Some(dir));
            }
        }
    }
    for x in 0..s {
        let dir = match x.cmp(&m) {
            std::cmp::Ordering::Less => Dir::East,
            std::cmp::Ordering::Greater => Dir::West,
            std::cmp::Ordering::Equal => Dir::South,
        };
        parent[idx(Vertex::new(x, m))] = encode(Some(dir));
    }
    for y in 1..s {
        parent[idx(Vertex::new(m, y))] = encode(Some(Dir::South));
    }
    parent[idx(level.root())] = NO_PARENT;
    parent
}

fn check_materializable(n: u32) -> Result<Level> {
    let level = Level::new(n)?;
    if n > MAX_MATERIALIZED_LEVEL {
        return Err(Error::NotMaterializable {
            level: n,
            max: MAX_MATERIALIZED_LEVEL,
        });
    }
    Ok(level)
}

/// Builds fragments for levels `1..=n`; entry `i` is level `i + 1`.
pub fn build_levels(n: u32) -> Result<Vec<Fragment>> {
    check_materializable(n)?;
    let mut parents = vec![NO_PARENT];
    let mut out = Vec::with_capacity(n as usize);
    for k in 1..=n {
        let level = Level(k);
        if k > 1 {
            parents = grow(&parents, level);
        }
        out.push(Fragment::from_parents(level, parents.clone()).expect("construction yields a spanning tree"));
    }
    Ok(out)
}

/// Builds the level-`n` fragment.
pub fn build_fragment(n: u32) -> Result<Fragment> {
    let level = check_materializable(n)?;
    let mut parents = vec![NO_PARENT];
    for k in 2..=n {
        parents = grow(&parents, Level(k));
    }
    Ok(Fragment::from_parents(level, parents).expect("construction yields a spanning tree"))
}

/// Reflects a patch on a grid of the given height through its horizontal
/// midline. Horizontal values are kept; vertical edges reverse, so their
/// stored values change sign.
pub fn vertical_flip(patch: &BTreeMap<EdgeId, i64>, height: i64) -> BTreeMap<EdgeId, i64> {
    patch
        .iter()
        .map(|(&id, &value)| match id.axis {
            Axis::H => (
                EdgeId::new(Vertex::new(id.vertex.x, height - 1 - id.vertex.y), Axis::H),
                value,
            ),
            Axis::V => (
                EdgeId::new(Vertex::new(id.vertex.x, height - 2 - id.vertex.y), Axis::V),
                -value,
            ),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeMismatch {
    pub edge: EdgeId,
    pub expected: i64,
    pub found: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CopyCheck {
    pub descriptor: CopyDescriptor,
    pub edges_checked: usize,
    pub mismatches: Vec<EdgeMismatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub level: u32,
    pub copies: Vec<CopyCheck>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.copies.iter().all(|c| c.mismatches.is_empty())
    }
}

/// Checks that each quadrant copy of level `n` carries, after undoing its
/// flip, exactly the flow of the level-`(n-1)` fragment.
pub fn verify_consistency(n: u32) -> Result<ConsistencyReport> {
    let level = check_materializable(n)?;
    if n < 2 {
        return Err(Error::InvalidArgument("consistency needs n >= 2".into()));
    }
    let levels = build_levels(n)?;
    let (child, parent) = (&levels[n as usize - 2], &levels[n as usize - 1]);
    Ok(consistency_between(child, parent, level))
}

pub(crate) fn consistency_between(child: &Fragment, parent: &Fragment, level: Level) -> ConsistencyReport {
    let m = child.side();
    let expected = child.tree_flow();
    let copies = copy_descriptors(level)
        .expect("level >= 2")
        .into_iter()
        .map(|desc| {
            // copy-local restriction of the parent flow, before undoing the flip
            let mut restricted = BTreeMap::new();
            for ly in 0..m {
                for lx in 0..m {
                    let gy = desc.offset.y + ly;
                    let gx = desc.offset.x + lx;
                    if lx + 1 < m {
                        let v = parent.flow_inside(OrientedEdge::east(gx, gy));
                        if v != 0 {
                            restricted.insert(EdgeId::new(Vertex::new(lx, ly), Axis::H), v);
                        }
                    }
                    if ly + 1 < m {
                        let v = parent.flow_inside(OrientedEdge::north(gx, gy));
                        if v != 0 {
                            restricted.insert(EdgeId::new(Vertex::new(lx, ly), Axis::V), v);
                        }
                    }
                }
            }
            let found = if desc.flipped {
                vertical_flip(&restricted, m)
            } else {
                restricted
            };
            let mut keys: Vec<EdgeId> = expected.keys().chain(found.keys()).copied().collect();
            keys.sort();
            keys.dedup();
            let mismatches = keys
                .iter()
                .filter_map(|id| {
                    let e = expected.get(id).copied().unwrap_or(0);
                    let f = found.get(id).copied().unwrap_or(0);
                    (e != f).then_some(EdgeMismatch {
                        edge: *id,
                        expected: e,
                        found: f,
                    })
                })
                .collect();
            CopyCheck {
                descriptor: desc,
                edges_checked: keys.len(),
                mismatches,
            }
        })
        .collect();
    ConsistencyReport {
        level: level.get(),
        copies,
    }
}

/// Result of scanning a fragment for its defining invariants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub level: u32,
    pub side: i64,
    pub edge_count: usize,
    pub connected: bool,
    /// Non-root vertices whose divergence differs from +1 (at most 16 listed).
    pub bad_vertices: Vec<(Vertex, i64)>,
    pub root_divergence: i64,
    pub expected_root_divergence: i64,
    pub max_abs_flow: i64,
    /// Tree edges attaining the maximum.
    pub max_edges: Vec<EdgeId>,
    pub max_only_at_root: bool,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        let s2 = (self.side * self.side) as usize;
        self.edge_count + 1 == s2
            && self.connected
            && self.bad_vertices.is_empty()
            && self.root_divergence == self.expected_root_divergence
            && self.max_abs_flow == -self.expected_root_divergence
            && self.max_only_at_root
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Exhaustive check of the tree and divergence invariants. The divergence
/// scan goes through the generic [`EdgeField`] route rather than subtree
/// sizes.
pub fn check_invariants(frag: &Fragment) -> InvariantReport {
    let s = frag.side();
    let root = frag.root();
    let edges: Vec<(EdgeId, i64)> = frag.tree_edges().collect();

    let mut sets = DisjointSets::new((s * s) as usize);
    let mut components = (s * s) as usize;
    for (id, _) in &edges {
        let e = id.positive();
        let (a, b) = (e.tail, e.head());
        if sets.union((a.y * s + a.x) as usize, (b.y * s + b.x) as usize) {
            components -= 1;
        }
    }

    let mut bad_vertices = Vec::new();
    let mut root_divergence = 0;
    for v in frag.vertices() {
        let d = divergence(frag, v);
        if v == root {
            root_divergence = d;
        } else if d != 1 && bad_vertices.len() < 16 {
            bad_vertices.push((v, d));
        }
    }

    let max_abs_flow = edges.iter().map(|(_, v)| v.abs()).max().unwrap_or(0);
    let max_edges: Vec<EdgeId> = edges
        .iter()
        .filter(|(_, v)| v.abs() == max_abs_flow && max_abs_flow > 0)
        .map(|(id, _)| *id)
        .collect();
    let max_only_at_root = if edges.is_empty() {
        true
    } else {
        max_edges.len() == 1 && {
            let e = max_edges[0].positive();
            e.tail == root || e.head() == root
        }
    };

    InvariantReport {
        level: frag.level().get(),
        side: s,
        edge_count: edges.len(),
        connected: components == 1,
        bad_vertices,
        root_divergence,
        expected_root_divergence: frag.level().root_divergence(),
        max_abs_flow,
        max_edges,
        max_only_at_root,
    }
}

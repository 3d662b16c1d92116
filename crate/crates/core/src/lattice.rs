//! Vertices, oriented edges and antisymmetric integer fields on the square
//! lattice, together with the discrete divergence operator.
//!
//! Fields are stored on East/North representatives. A query in any
//! orientation goes through [`OrientedEdge::canonical`], which makes the
//! antisymmetry `v(reverse e) = -v(e)` structural.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub x: i64,
    pub y: i64,
}

impl Vertex {
    pub const fn new(x: i64, y: i64) -> Self {
        Vertex { x, y }
    }

    pub fn step(self, dir: Dir) -> Vertex {
        let (dx, dy) = dir.offset();
        Vertex::new(self.x + dx, self.y + dy)
    }

    pub fn translate(self, dx: i64, dy: i64) -> Vertex {
        Vertex::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dir {
    East,
    North,
    West,
    South,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::North, Dir::West, Dir::South];

    pub const fn offset(self) -> (i64, i64) {
        match self {
            Dir::East => (1, 0),
            Dir::North => (0, 1),
            Dir::West => (-1, 0),
            Dir::South => (0, -1),
        }
    }

    pub const fn reverse(self) -> Dir {
        match self {
            Dir::East => Dir::West,
            Dir::North => Dir::South,
            Dir::West => Dir::East,
            Dir::South => Dir::North,
        }
    }

    /// Image under the reflection `y -> -y`.
    pub const fn flip_vertical(self) -> Dir {
        match self {
            Dir::North => Dir::South,
            Dir::South => Dir::North,
            d => d,
        }
    }

    pub const fn axis(self) -> Axis {
        match self {
            Dir::East | Dir::West => Axis::H,
            Dir::North | Dir::South => Axis::V,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Dir::East => 'E',
            Dir::North => 'N',
            Dir::West => 'W',
            Dir::South => 'S',
        }
    }

    pub fn from_symbol(c: char) -> Option<Dir> {
        match c.to_ascii_uppercase() {
            'E' => Some(Dir::East),
            'N' => Some(Dir::North),
            'W' => Some(Dir::West),
            'S' => Some(Dir::South),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// Horizontal edges, stored on their East representative.
    H,
    /// Vertical edges, stored on their North representative.
    V,
}

impl Axis {
    pub const fn positive_dir(self) -> Dir {
        match self {
            Axis::H => Dir::East,
            Axis::V => Dir::North,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::H => "h",
            Axis::V => "v",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim() {
            "h" | "H" => Ok(Axis::H),
            "v" | "V" => Ok(Axis::V),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown axis `{other}` (expected h or v)"
            ))),
        }
    }
}

/// Undirected edge identified by its lower-left endpoint and axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    pub vertex: Vertex,
    pub axis: Axis,
}

impl EdgeId {
    pub const fn new(vertex: Vertex, axis: Axis) -> Self {
        EdgeId { vertex, axis }
    }

    /// The East (resp. North) orientation of this edge.
    pub fn positive(self) -> OrientedEdge {
        OrientedEdge::new(self.vertex, self.axis.positive_dir())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrientedEdge {
    pub tail: Vertex,
    pub dir: Dir,
}

impl OrientedEdge {
    pub const fn new(tail: Vertex, dir: Dir) -> Self {
        OrientedEdge { tail, dir }
    }

    pub fn east(x: i64, y: i64) -> Self {
        OrientedEdge::new(Vertex::new(x, y), Dir::East)
    }

    pub fn north(x: i64, y: i64) -> Self {
        OrientedEdge::new(Vertex::new(x, y), Dir::North)
    }

    pub fn head(self) -> Vertex {
        self.tail.step(self.dir)
    }

    pub fn reverse(self) -> OrientedEdge {
        OrientedEdge::new(self.head(), self.dir.reverse())
    }

    /// Undirected id plus the sign relating this orientation to the stored
    /// East/North representative.
    pub fn canonical(self) -> (EdgeId, i64) {
        match self.dir {
            Dir::East | Dir::North => (EdgeId::new(self.tail, self.dir.axis()), 1),
            Dir::West | Dir::South => (EdgeId::new(self.head(), self.dir.axis()), -1),
        }
    }

    pub fn translate(self, dx: i64, dy: i64) -> OrientedEdge {
        OrientedEdge::new(self.tail.translate(dx, dy), self.dir)
    }
}

impl fmt::Display for OrientedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.tail, self.head())
    }
}

/// Parses `x,y,D` where `D` is one of `E N W S`.
impl std::str::FromStr for OrientedEdge {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let bad = || crate::Error::InvalidArgument(format!("bad edge `{s}` (expected x,y,D with D in E/N/W/S)"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let x = parts[0].parse().map_err(|_| bad())?;
        let y = parts[1].parse().map_err(|_| bad())?;
        let mut chars = parts[2].chars();
        let dir = match (chars.next(), chars.next()) {
            (Some(c), None) => Dir::from_symbol(c).ok_or_else(bad)?,
            _ => return Err(bad()),
        };
        Ok(OrientedEdge::new(Vertex::new(x, y), dir))
    }
}

/// Parses a `;`-separated list of edges. The empty string is the empty window.
pub fn parse_edge_list(s: &str) -> crate::Result<Vec<OrientedEdge>> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

/// An integer vector field: a total function on oriented edges.
///
/// Implementors provide the value on East/North representatives; the
/// provided `value` extends it antisymmetrically.
pub trait EdgeField {
    fn canonical_value(&self, id: EdgeId) -> i64;

    fn value(&self, e: OrientedEdge) -> i64 {
        let (id, sign) = e.canonical();
        sign * self.canonical_value(id)
    }
}

impl<F: EdgeField + ?Sized> EdgeField for &F {
    fn canonical_value(&self, id: EdgeId) -> i64 {
        (**self).canonical_value(id)
    }
}

/// Sum of the field over the four outgoing edges at `v`.
pub fn divergence<F: EdgeField + ?Sized>(field: &F, v: Vertex) -> i64 {
    Dir::ALL.iter().map(|&d| field.value(OrientedEdge::new(v, d))).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroField;

impl EdgeField for ZeroField {
    fn canonical_value(&self, _: EdgeId) -> i64 {
        0
    }
}

/// A finitely supported field; absent edges carry 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseField {
    values: BTreeMap<EdgeId, i64>,
}

impl SparseField {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the value on `e`; the reverse orientation gets the negation.
    pub fn set(&mut self, e: OrientedEdge, value: i64) {
        let (id, sign) = e.canonical();
        if value == 0 {
            self.values.remove(&id);
        } else {
            self.values.insert(id, sign * value);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, i64)> + '_ {
        self.values.iter().map(|(&id, &v)| (id, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// All vertices incident to a supported edge.
    pub fn support_vertices(&self) -> Vec<Vertex> {
        let mut vs: Vec<Vertex> = self
            .values
            .keys()
            .flat_map(|id| {
                let e = id.positive();
                [e.tail, e.head()]
            })
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }
}

impl FromIterator<(OrientedEdge, i64)> for SparseField {
    fn from_iter<I: IntoIterator<Item = (OrientedEdge, i64)>>(iter: I) -> Self {
        let mut f = SparseField::new();
        for (e, v) in iter {
            f.set(e, v);
        }
        f
    }
}

impl EdgeField for SparseField {
    fn canonical_value(&self, id: EdgeId) -> i64 {
        self.values.get(&id).copied().unwrap_or(0)
    }
}

/// Closed vertex rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> crate::Result<Rect> {
        if x0 > x1 || y0 > y1 {
            return Err(crate::Error::InvalidArgument(format!(
                "empty rectangle {x0},{y0},{x1},{y1}"
            )));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> i64 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0 + 1
    }

    pub fn cell_count(&self) -> u128 {
        self.width() as u128 * self.height() as u128
    }

    pub fn contains(&self, v: Vertex) -> bool {
        (self.x0..=self.x1).contains(&v.x) && (self.y0..=self.y1).contains(&v.y)
    }

    /// Row-major vertices, bottom row first.
    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| Vertex::new(x, y)))
    }
}

/// Parses `X0,Y0,X1,Y1`.
impl std::str::FromStr for Rect {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let parts: Vec<i64> = s
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| crate::Error::InvalidArgument(format!("bad rectangle `{s}` (expected X0,Y0,X1,Y1)")))?;
        match parts[..] {
            [x0, y0, x1, y1] => Rect::new(x0, y0, x1, y1),
            _ => Err(crate::Error::InvalidArgument(format!(
                "bad rectangle `{s}` (expected X0,Y0,X1,Y1)"
            ))),
        }
    }
}

/// Divergence `v[x] - v[x-1]` of a periodic field on Z, where `v[x]` is the
/// value on the edge `(x, x+1)`.
pub fn divergence_1d(values: &[i64], x: usize) -> i64 {
    let p = values.len();
    values[x] - values[(x + p - 1) % p]
}

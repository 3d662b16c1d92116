//! Deterministic SVG output for fragments, tilings, divergence maps and the
//! smoothed field.

use std::fmt::Write as _;
use std::path::Path;

use divfield::ensemble::{PeriodicField, Shift};
use divfield::fragment::{build_fragment, ImplicitFragment, MAX_MATERIALIZED_LEVEL};
use divfield::lattice::{divergence, Dir, EdgeField, OrientedEdge, Rect, Vertex};
use divfield::smoothing::raster;
use divfield::{Error, FlowTree, Level, Result};

/// Upper bound on lattice cells in a rendered rectangle.
pub const MAX_RENDER_CELLS: u128 = 1_000_000;

const UNIT: f64 = 40.0;
const MARGIN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Fragment,
    Periodic,
    Divergence,
    Smoothed,
}

/// Fill colors for the divergence map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorMap {
    pub positive: String,
    pub root: String,
    pub zero: String,
    pub other: String,
}

impl Default for ColorMap {
    fn default() -> Self {
        ColorMap {
            positive: "#cfe3f7".into(),
            root: "#c0392b".into(),
            zero: "#ffffff".into(),
            other: "#999999".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub target: Target,
    pub level: u32,
    /// Tiling offset; ignored for `Target::Fragment`.
    pub shift: Shift,
    /// Defaults to the fragment's own box.
    pub rect: Option<Rect>,
    /// Multiplies arrow length in the quiver plot.
    pub arrow_scale: f64,
    /// Quiver samples per unit length.
    pub resolution: u32,
    pub colors: ColorMap,
}

impl RenderSpec {
    pub fn new(target: Target, level: u32) -> Self {
        RenderSpec {
            target,
            level,
            shift: Shift::new(0, 0),
            rect: None,
            arrow_scale: 1.0,
            resolution: 2,
            colors: ColorMap::default(),
        }
    }
}

/// Writes the SVG for `spec` to `out`.
pub fn render_svg(spec: &RenderSpec, out: &Path) -> anyhow::Result<()> {
    let svg = render_string(spec)?;
    std::fs::write(out, svg).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", out.display()))
}

pub fn render_string(spec: &RenderSpec) -> Result<String> {
    let level = Level::new(spec.level)?;
    let s = level.side();
    let rect = match spec.rect {
        Some(r) => r,
        None => Rect::new(0, 0, s - 1, s - 1)?,
    };
    if rect.cell_count() > MAX_RENDER_CELLS {
        return Err(Error::Capacity(format!(
            "rectangle has {} cells, limit {MAX_RENDER_CELLS}",
            rect.cell_count()
        )));
    }
    if !(spec.arrow_scale.is_finite() && spec.arrow_scale > 0.0) {
        return Err(Error::InvalidArgument("arrow scale must be positive".into()));
    }
    let materialized;
    let implicit = ImplicitFragment::new(level);
    let tree: &dyn FlowTree = if spec.level <= MAX_MATERIALIZED_LEVEL {
        materialized = build_fragment(spec.level)?;
        &materialized
    } else {
        &implicit
    };
    let mut canvas = Canvas::new(rect, spec);
    match spec.target {
        Target::Fragment => draw_fragment(&mut canvas, tree),
        Target::Periodic => draw_periodic(&mut canvas, &PeriodicField::new(tree, spec.shift)?),
        Target::Divergence => draw_divergence(&mut canvas, &PeriodicField::new(tree, spec.shift)?, spec),
        Target::Smoothed => draw_quiver(&mut canvas, &PeriodicField::new(tree, spec.shift)?, spec)?,
    }
    Ok(canvas.finish())
}

struct Canvas {
    rect: Rect,
    body: String,
    title: String,
}

impl Canvas {
    fn new(rect: Rect, spec: &RenderSpec) -> Self {
        let title = format!(
            "{:?} n={} rect={},{},{},{}",
            spec.target, spec.level, rect.x0, rect.y0, rect.x1, rect.y1
        )
        .to_lowercase();
        Canvas {
            rect,
            body: String::new(),
            title,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.rect.x0 as f64) * UNIT
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN + (self.rect.y1 as f64 - y) * UNIT
    }

    fn arrow(&mut self, from: Vertex, to: Vertex, label: u64) {
        let (fx, fy, tx, ty) = (from.x as f64, from.y as f64, to.x as f64, to.y as f64);
        let at = |t: f64| (fx + (tx - fx) * t, fy + (ty - fy) * t);
        let (ax, ay) = at(0.15);
        let (bx, by) = at(0.8);
        let (lx, ly) = at(0.5);
        // labels sit beside the arrow, never on it
        let (ox, oy) = if from.y == to.y { (0.0, 0.18) } else { (0.12, 0.0) };
        let _ = writeln!(
            self.body,
            r#"<line class="arrow" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" marker-end="url(#head)"/>"#,
            self.px(ax),
            self.py(ay),
            self.px(bx),
            self.py(by)
        );
        let _ = writeln!(
            self.body,
            r#"<text class="label" x="{:.1}" y="{:.1}">{label}</text>"#,
            self.px(lx + ox),
            self.py(ly + oy)
        );
    }

    fn vertex(&mut self, v: Vertex) {
        let _ = writeln!(
            self.body,
            r#"<circle class="vertex" cx="{:.1}" cy="{:.1}" r="2.5"/>"#,
            self.px(v.x as f64),
            self.py(v.y as f64)
        );
    }

    fn root(&mut self, v: Vertex, div: i64) {
        let (cx, cy) = (self.px(v.x as f64), self.py(v.y as f64));
        let _ = writeln!(self.body, r#"<circle class="root" cx="{cx:.1}" cy="{cy:.1}" r="7"/>"#);
        let _ = writeln!(
            self.body,
            r#"<text class="root-label" x="{:.1}" y="{:.1}">{div}</text>"#,
            cx + 9.0,
            cy + 14.0
        );
    }

    fn finish(self) -> String {
        let w = 2.0 * MARGIN + (self.rect.width() - 1) as f64 * UNIT;
        let h = 2.0 * MARGIN + (self.rect.height() - 1) as f64 * UNIT;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", self.title);
        out.push_str(concat!(
            "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"8\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" orient=\"auto\">",
            "<path d=\"M0,0 L10,5 L0,10 z\" fill=\"#222\"/></marker></defs>\n",
            "<style>.arrow{stroke:#222;stroke-width:1.5}.label{font:10px sans-serif;fill:#1f4e79}",
            ".vertex{fill:#555}.root{fill:none;stroke:#c0392b;stroke-width:2.5}",
            ".root-label{font:bold 11px sans-serif;fill:#c0392b}.cell{stroke:#eee;stroke-width:0.5}",
            ".quiver{stroke:#1f4e79;stroke-width:1.2}</style>\n",
        ));
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn draw_fragment(canvas: &mut Canvas, tree: &dyn FlowTree) {
    let rect = canvas.rect;
    for v in rect.vertices() {
        if !tree.contains(v) {
            continue;
        }
        canvas.vertex(v);
        let node = tree.node(v);
        match node.parent {
            Some(dir) if rect.contains(v.step(dir)) => canvas.arrow(v, v.step(dir), node.subtree),
            None if tree.level().root_divergence() < 0 => canvas.root(v, tree.level().root_divergence()),
            _ => {}
        }
    }
}

fn flow_arrows<F: EdgeField + ?Sized>(canvas: &mut Canvas, field: &F) {
    let rect = canvas.rect;
    for v in rect.vertices() {
        for dir in [Dir::East, Dir::North] {
            let e = OrientedEdge::new(v, dir);
            let val = field.value(e);
            if val == 0 || !rect.contains(e.head()) {
                continue;
            }
            if val > 0 {
                canvas.arrow(v, e.head(), val.unsigned_abs());
            } else {
                canvas.arrow(e.head(), v, val.unsigned_abs());
            }
        }
    }
}

fn draw_periodic<F: EdgeField + ?Sized>(canvas: &mut Canvas, field: &F) {
    let rect = canvas.rect;
    for v in rect.vertices() {
        canvas.vertex(v);
    }
    flow_arrows(canvas, field);
    for v in rect.vertices() {
        let d = divergence(field, v);
        if d < 0 {
            canvas.root(v, d);
        }
    }
}

fn draw_divergence<F: EdgeField + ?Sized>(canvas: &mut Canvas, field: &F, spec: &RenderSpec) {
    let rect = canvas.rect;
    let deepest = Level::new(spec.level)
        .map(|l| l.max_flow() as f64)
        .unwrap_or(1.0)
        .max(1.0);
    for v in rect.vertices() {
        let d = divergence(field, v);
        let (class, fill, opacity) = match d {
            1 => ("cell pos", &spec.colors.positive, 1.0),
            0 => ("cell zero", &spec.colors.zero, 1.0),
            d if d < 0 => (
                "cell root",
                &spec.colors.root,
                0.35 + 0.65 * (-d as f64 / deepest).min(1.0),
            ),
            _ => ("cell other", &spec.colors.other, 1.0),
        };
        let (x, y) = (canvas.px(v.x as f64 - 0.5), canvas.py(v.y as f64 + 0.5));
        let _ = writeln!(
            canvas.body,
            r#"<rect class="{class}" x="{x:.1}" y="{y:.1}" width="{UNIT:.1}" height="{UNIT:.1}" fill="{fill}" fill-opacity="{opacity:.3}"><title>{d}</title></rect>"#
        );
    }
}

fn draw_quiver<F: EdgeField + ?Sized>(canvas: &mut Canvas, field: &F, spec: &RenderSpec) -> Result<()> {
    let samples = raster(field, canvas.rect, spec.resolution)?;
    let biggest = samples.iter().map(|s| s.h.hypot(s.v)).fold(0.0, f64::max);
    if biggest == 0.0 {
        return Ok(());
    }
    // longest arrow spans 90% of a sample cell
    let k = 0.9 / spec.resolution as f64 / biggest * spec.arrow_scale;
    for s in &samples {
        if s.h == 0.0 && s.v == 0.0 {
            continue;
        }
        let (x1, y1) = (canvas.px(s.x - 0.5 * k * s.h), canvas.py(s.y - 0.5 * k * s.v));
        let (x2, y2) = (canvas.px(s.x + 0.5 * k * s.h), canvas.py(s.y + 0.5 * k * s.v));
        let _ = writeln!(
            canvas.body,
            r#"<line class="quiver" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" marker-end="url(#head)"/>"#
        );
    }
    Ok(())
}

//! Command-line adapter over the `divfield` library.
//!
//! Exit codes: 0 success, 1 a verification reported failure, 2 the command
//! could not run (bad flags, out-of-range arguments, unwritable paths).

pub mod config;
pub mod render;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use divfield::analysis::{convergence_table, half_moment, lemma2_report, one_d_check, tail_prob};
use divfield::ensemble::{div_law, edge_law, sample_patch, window_law, PeriodicField, Shift};
use divfield::fragment::{build_fragment, check_invariants, verify_consistency, ImplicitFragment};
use divfield::lattice::{parse_edge_list, Axis, Rect};
use divfield::law::RationalExport;
use divfield::smoothing::{nearest_vertex_divergence, smooth_div, smooth_eval, ContinuousPoint};
use divfield::{Error, FlowTree, Level};

use config::Config;
use render::{render_svg, RenderSpec, Target};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "divfield",
    version,
    about = "Stationary integer fields of divergence one on Z^2"
)]
pub struct Cli {
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// key=value file with defaults for n, out_dir and workers.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for enumerations.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a fragment; optionally export all tree edges as JSON.
    Build {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check tree invariants and nesting consistency.
    Verify {
        #[arg(long)]
        n: Option<u32>,
    },
    /// Compare each quadrant copy with the lower-level fragment.
    Consistency {
        #[arg(long)]
        n: Option<u32>,
    },
    /// Exact law of the divergence at a vertex.
    Divlaw {
        #[arg(long)]
        n: Option<u32>,
    },
    /// Exact law of one edge value.
    Edgelaw {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        axis: Axis,
    },
    /// Exact joint law on a window of oriented edges `x,y,D;...`.
    Windowlaw {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        edges: String,
    },
    /// Pr[|value| > c] on one axis.
    Tail {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        axis: Axis,
        #[arg(long, allow_negative_numbers = true)]
        c: i64,
    },
    /// Tail bounds for every k <= kmax and level <= nmax.
    Lemma2 {
        #[arg(long)]
        kmax: u32,
        #[arg(long)]
        nmax: u32,
    },
    /// E sqrt|value| on one axis.
    Moment {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        axis: Axis,
    },
    /// Total-variation distances between window laws at consecutive levels.
    Converge {
        #[arg(long)]
        window: String,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
    },
    /// Exhaustive search for a periodic 1-D field with nonnegative, nonzero divergence.
    Oned {
        #[arg(long)]
        period: usize,
        #[arg(long)]
        bound: i64,
    },
    /// Draw one seeded sample restricted to a rectangle.
    Sample {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        seed: u64,
        #[arg(long, allow_hyphen_values = true)]
        rect: Rect,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Smoothed field and divergence at a point of a shifted tiling.
    Smooth {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        shift: Shift,
        #[arg(long, allow_hyphen_values = true)]
        point: ContinuousPoint,
    },
    /// Write an SVG picture.
    Render {
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<Shift>,
        #[arg(long, allow_hyphen_values = true)]
        rect: Option<Rect>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        arrow_scale: f64,
        #[arg(long, default_value_t = 2)]
        resolution: u32,
    },
}

/// What a command printed and whether its check held.
pub struct Report {
    pub passed: bool,
    pub json: Value,
    pub text: String,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Report {
            passed: true,
            json,
            text,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let printed = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report.json)
                    .map(|s| s + "\n")
                    .unwrap_or_default(),
                Format::Text => report.text,
            };
            let _ = out.write_all(printed.as_bytes());
            if report.passed {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<Report> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let workers = cli.workers.or(cfg.workers);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(anyhow!("--workers must be positive"));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn level_of(n: Option<u32>, cfg: &Config) -> anyhow::Result<u32> {
    n.or(cfg.n)
        .ok_or_else(|| anyhow!("missing --n (no default n in config)"))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn rat(r: &divfield::Rational) -> Value {
    serde_json::to_value(RationalExport::from(r)).expect("rational serializes")
}

fn dispatch(cmd: &Command, cfg: &Config) -> anyhow::Result<Report> {
    match cmd {
        Command::Build { n, json } => {
            let frag = build_fragment(level_of(*n, cfg)?)?;
            let level = frag.level();
            let written = match json {
                Some(p) => {
                    let path = cfg.output_path(p);
                    write_file(&path, &(serde_json::to_string_pretty(&frag.to_export())? + "\n"))?;
                    Some(path)
                }
                None => None,
            };
            let root = level.root();
            let text = format!(
                "level {level}: side {}, root ({}, {}), {} tree edges, max flow {}\n",
                level.side(),
                root.x,
                root.y,
                frag.tree_edges().count(),
                level.max_flow()
            );
            Ok(Report::ok(
                json!({
                    "level": level.get(),
                    "side": level.side(),
                    "root": root,
                    "tree_edges": frag.tree_edges().count(),
                    "max_flow": level.max_flow(),
                    "json": written,
                }),
                text,
            ))
        }
        Command::Verify { n } => {
            let n = level_of(*n, cfg)?;
            let frag = build_fragment(n)?;
            let inv = check_invariants(&frag);
            let cons = if n >= 2 { Some(verify_consistency(n)?) } else { None };
            let passed = inv.passed() && cons.as_ref().is_none_or(|c| c.passed());
            let mut text = format!(
                "invariants: {} ({} edges, connected {}, {} bad vertices, root divergence {})\n",
                verdict(inv.passed()),
                inv.edge_count,
                inv.connected,
                inv.bad_vertices.len(),
                inv.root_divergence
            );
            if let Some(c) = &cons {
                text += &format!("consistency: {}\n", verdict(c.passed()));
            }
            text += &format!("{}\n", verdict(passed));
            Ok(Report {
                passed,
                json: json!({"level": n, "invariants": inv, "consistency": cons, "passed": passed}),
                text,
            })
        }
        Command::Consistency { n } => {
            let rep = verify_consistency(level_of(*n, cfg)?)?;
            let mut text = String::new();
            for c in &rep.copies {
                text += &format!(
                    "{:?}: offset ({}, {}), flipped {}, {} edges, {} mismatches\n",
                    c.descriptor.quadrant,
                    c.descriptor.offset.x,
                    c.descriptor.offset.y,
                    c.descriptor.flipped,
                    c.edges_checked,
                    c.mismatches.len()
                );
            }
            text += &format!("{}\n", verdict(rep.passed()));
            Ok(Report {
                passed: rep.passed(),
                json: serde_json::to_value(&rep)?,
                text,
            })
        }
        Command::Divlaw { n } => {
            let law = div_law(Level::new(level_of(*n, cfg)?)?);
            Ok(Report::ok(serde_json::to_value(law.to_export())?, format!("{law}\n")))
        }
        Command::Edgelaw { n, axis } => {
            let law = edge_law(&build_fragment(level_of(*n, cfg)?)?, *axis);
            Ok(Report::ok(serde_json::to_value(law.to_export())?, format!("{law}\n")))
        }
        Command::Windowlaw { n, edges } => {
            let frag = build_fragment(level_of(*n, cfg)?)?;
            let law = window_law(&frag, &parse_edge_list(edges)?)?;
            let mut text = String::new();
            for (values, p) in law.atoms() {
                text += &format!("{values:?}: {p}\n");
            }
            Ok(Report::ok(serde_json::to_value(law.to_export())?, text))
        }
        Command::Tail { n, axis, c } => {
            let frag = build_fragment(level_of(*n, cfg)?)?;
            let p = tail_prob(&frag, *axis, *c);
            Ok(Report::ok(
                json!({"level": frag.level().get(), "axis": axis, "c": c, "prob": rat(&p)}),
                format!("Pr[|v_{axis}| > {c}] = {p}\n"),
            ))
        }
        Command::Lemma2 { kmax, nmax } => {
            let rep = lemma2_report(*kmax, *nmax)?;
            Ok(Report {
                passed: rep.passed(),
                json: serde_json::to_value(&rep)?,
                text: rep.to_text(),
            })
        }
        Command::Moment { n, axis } => {
            let m = half_moment(&build_fragment(level_of(*n, cfg)?)?, *axis);
            let text = format!("E sqrt|v_{axis}| at level {} = {:.12}\n", m.level, m.value);
            Ok(Report::ok(serde_json::to_value(&m)?, text))
        }
        Command::Converge { window, from, to } => {
            let table = convergence_table(&parse_edge_list(window)?, *from, *to)?;
            Ok(Report::ok(serde_json::to_value(&table)?, table.to_text()))
        }
        Command::Oned { period, bound } => {
            let v = one_d_check(*period, *bound)?;
            let text = format!(
                "period {period}, bound {bound}: {} fields, {} with nonnegative divergence, {}\n",
                v.fields_checked,
                v.nonnegative,
                match &v.counterexample {
                    Some(f) => format!("counterexample {f:?}"),
                    None => "no counterexample".into(),
                }
            );
            Ok(Report {
                passed: v.passed(),
                json: serde_json::to_value(&v)?,
                text,
            })
        }
        Command::Sample { n, seed, rect, csv } => {
            let patch = sample_patch(level_of(*n, cfg)?, *seed, *rect)?;
            let text = format!(
                "level {}, seed {}, shift ({}, {}), {} edges\n",
                patch.level,
                patch.seed,
                patch.shift.a,
                patch.shift.b,
                patch.edges.len()
            );
            let json = match csv {
                Some(p) => {
                    let path = cfg.output_path(p);
                    write_file(&path, &patch.to_csv())?;
                    json!({"level": patch.level, "seed": patch.seed, "shift": patch.shift, "rect": patch.rect,
                           "edges": patch.edges.len(), "csv": path})
                }
                None => serde_json::to_value(&patch)?,
            };
            Ok(Report::ok(json, text))
        }
        Command::Smooth { n, shift, point } => {
            let n = level_of(*n, cfg)?;
            let tree = ImplicitFragment::new(Level::new(n)?);
            let field = PeriodicField::new(&tree, *shift)?;
            let s = smooth_eval(&field, *point);
            let lattice = nearest_vertex_divergence(&field, *point);
            let div = match smooth_div(&field, *point) {
                Ok(d) => Some(d),
                Err(Error::SingularLocus { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            let text = format!(
                "h = {}, v = {}, div = {}, nearest-vertex divergence {lattice}\n",
                s.h_component,
                s.v_component,
                div.map_or("undefined (on a kink line)".to_string(), |d| d.to_string())
            );
            Ok(Report::ok(
                json!({"level": n, "shift": shift, "point": point,
                       "h": s.h_component, "v": s.v_component, "div": div, "nearest_vertex_div": lattice}),
                text,
            ))
        }
        Command::Render {
            target,
            n,
            shift,
            rect,
            out,
            arrow_scale,
            resolution,
        } => {
            let mut spec = RenderSpec::new(*target, level_of(*n, cfg)?);
            spec.shift = shift.unwrap_or(spec.shift);
            spec.rect = *rect;
            spec.arrow_scale = *arrow_scale;
            spec.resolution = *resolution;
            let path = cfg.output_path(out);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            render_svg(&spec, &path)?;
            Ok(Report::ok(
                json!({"target": format!("{target:?}").to_lowercase(), "out": path}),
                format!("wrote {}\n", path.display()),
            ))
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

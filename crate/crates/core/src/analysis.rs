//! Tail bounds, the half-moment experiment, convergence diagnostics and the
//! one-dimensional impossibility check.
//!
//! Everything here is computed in exact rationals from the laws in
//! [`crate::ensemble`]. Claims about a supremum over all levels are only
//! checked up to the `n_max` requested, and the report says so.

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::ensemble::{edge_law, window_law};
use crate::error::{Error, Result};
use crate::fragment::{build_levels, FlowTree, Fragment, Level, MAX_MATERIALIZED_LEVEL};
use crate::lattice::{divergence_1d, Axis, OrientedEdge};
use crate::law::{ExactDist, Rational, RationalExport, WindowLaw, WindowLawExport};

pub const MAX_TAIL_K: u32 = 6;
pub const MAX_CONVERGENCE_WINDOW: usize = 8;
pub const MAX_ONE_D_PERIOD: usize = 8;
pub const MAX_ONE_D_BOUND: i64 = 3;

/// `Pr[|(v_n)_y| > c]` for an East (`H`) or North (`V`) edge.
pub fn tail_prob(frag: &Fragment, axis: Axis, c: i64) -> Rational {
    edge_law(frag, axis).tail(c)
}

fn rational_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Serialize)]
pub struct TailEntry {
    pub level: u32,
    pub axis: Axis,
    pub k: u32,
    /// `2^(2k)`
    pub threshold: i64,
    pub prob: RationalExport,
    /// `2 * 2^(-k)`
    pub bound: RationalExport,
    pub pass: bool,
}

/// `Pr[|(v_{n+i})_y| <= 2^(2n) - 2^(n+1)]` against `4^i (2^n - 1)^2 / (2^(n+i) - 1)^2`.
#[derive(Debug, Clone, Serialize)]
pub struct CopyBoundEntry {
    pub base_level: u32,
    pub step: u32,
    pub axis: Axis,
    pub threshold: i64,
    pub prob: RationalExport,
    pub bound: RationalExport,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub k_max: u32,
    pub n_max: u32,
    /// The supremum over levels is only checked for levels `1..=n_max`.
    pub scope: String,
    pub entries: Vec<TailEntry>,
    pub copy_bounds: Vec<CopyBoundEntry>,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass) && self.copy_bounds.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| !e.pass).count() + self.copy_bounds.iter().filter(|e| !e.pass).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("tail bound Pr[|v_n| > 4^k] <= 2^(1-k), {}\n", self.scope);
        out.push_str(" n axis k  threshold        prob       bound  ok\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{:>2} {:>4} {:>1} {:>10} {:>11} {:>11}  {}\n",
                e.level,
                e.axis,
                e.k,
                e.threshold,
                format!("{}/{}", e.prob.num, e.prob.den),
                format!("{}/{}", e.bound.num, e.bound.den),
                if e.pass { "yes" } else { "NO" }
            ));
        }
        out.push_str("copy bound Pr[|v_(n+i)| <= 4^n - 2^(n+1)] >= 4^i (2^n-1)^2 / (2^(n+i)-1)^2\n");
        out.push_str(" n  i axis  threshold  ok\n");
        for e in &self.copy_bounds {
            out.push_str(&format!(
                "{:>2} {:>2} {:>4} {:>10}  {}\n",
                e.base_level,
                e.step,
                e.axis,
                e.threshold,
                if e.pass { "yes" } else { "NO" }
            ));
        }
        out
    }
}

/// Checks the tail bound for `k = 1..=k_max` and every level `1..=n_max`
/// on both axes, plus the copy-counting bound for every pair `n >= 2`,
/// `i >= 1` with `n + i <= n_max`.
pub fn lemma2_report(k_max: u32, n_max: u32) -> Result<TailReport> {
    if !(1..=MAX_TAIL_K).contains(&k_max) {
        return Err(Error::InvalidArgument(format!("k_max must be in 1..={MAX_TAIL_K}")));
    }
    if n_max > MAX_MATERIALIZED_LEVEL {
        return Err(Error::NotMaterializable {
            level: n_max,
            max: MAX_MATERIALIZED_LEVEL,
        });
    }
    let levels = build_levels(n_max)?;
    let laws: Vec<[ExactDist; 2]> = levels
        .iter()
        .map(|f| [edge_law(f, Axis::H), edge_law(f, Axis::V)])
        .collect();

    let mut entries = Vec::new();
    for (i, pair) in laws.iter().enumerate() {
        for (law, axis) in pair.iter().zip([Axis::H, Axis::V]) {
            for k in 1..=k_max {
                let threshold = 1i64 << (2 * k);
                let prob = law.tail(threshold);
                let bound = Rational::new(2, 1i128 << k);
                entries.push(TailEntry {
                    level: i as u32 + 1,
                    axis,
                    k,
                    threshold,
                    prob: (&prob).into(),
                    bound: (&bound).into(),
                    pass: prob <= bound,
                });
            }
        }
    }

    let mut copy_bounds = Vec::new();
    for n in 2..n_max {
        let base = Level::new(n)?;
        let threshold = base.max_flow();
        let s = base.side() as i128;
        for step in 1..=(n_max - n) {
            let big = Level::new(n + step)?.side() as i128;
            let bound = Rational::new((1i128 << (2 * step)) * s * s, big * big);
            for (law, axis) in laws[(n + step - 1) as usize].iter().zip([Axis::H, Axis::V]) {
                let prob = law.within(threshold);
                copy_bounds.push(CopyBoundEntry {
                    base_level: n,
                    step,
                    axis,
                    threshold,
                    prob: (&prob).into(),
                    bound: (&bound).into(),
                    pass: prob >= bound,
                });
            }
        }
    }

    Ok(TailReport {
        k_max,
        n_max,
        scope: format!("checked for levels 1..={n_max} only"),
        entries,
        copy_bounds,
    })
}

/// `E sqrt|(v_n)_y|` as exact weights on square roots plus a float value.
#[derive(Debug, Clone, Serialize)]
pub struct HalfMoment {
    pub level: u32,
    pub axis: Axis,
    /// `(Pr[|v| = r], r)` for each `r > 0` in the support.
    pub terms: Vec<(RationalExport, u64)>,
    pub value: f64,
}

pub fn half_moment(frag: &Fragment, axis: Axis) -> HalfMoment {
    let law = edge_law(frag, axis);
    let mut by_abs: std::collections::BTreeMap<u64, Rational> = Default::default();
    for (v, p) in law.atoms() {
        if v != 0 {
            *by_abs.entry(v.unsigned_abs()).or_insert_with(Rational::zero) += p;
        }
    }
    let value = by_abs
        .iter()
        .fold(0.0, |acc, (&r, p)| acc + rational_f64(p) * (r as f64).sqrt());
    HalfMoment {
        level: frag.level().get(),
        axis,
        terms: by_abs.iter().map(|(&r, p)| (p.into(), r)).collect(),
        value,
    }
}

/// Total-variation distance between two joint laws on the same window.
pub fn tv_distance(a: &WindowLaw, b: &WindowLaw) -> Result<Rational> {
    if a.edges() != b.edges() {
        return Err(Error::MismatchedWindows);
    }
    Ok(a.tv_unchecked(b))
}

#[derive(Debug, Clone, Serialize)]
pub struct TvStep {
    pub from: u32,
    pub to: u32,
    pub distance: RationalExport,
    pub approx: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub window: Vec<String>,
    pub levels: Vec<u32>,
    pub laws: Vec<WindowLawExport>,
    pub steps: Vec<TvStep>,
    /// Whether the last three distances are strictly decreasing (all of
    /// them, when there are fewer than three).
    pub tail_decreasing: bool,
    #[serde(skip)]
    pub distances: Vec<Rational>,
}

impl ConvergenceTable {
    pub fn to_text(&self) -> String {
        let mut out = format!("window: [{}]\n", self.window.join("; "));
        for s in &self.steps {
            out.push_str(&format!(
                "TV(v_{}, v_{}) = {}/{} ~ {:.6e}\n",
                s.from, s.to, s.distance.num, s.distance.den, s.approx
            ));
        }
        out.push_str(&format!("tail decreasing: {}\n", self.tail_decreasing));
        out
    }
}

/// Exact TV distances between the window laws of consecutive levels.
pub fn convergence_table(window: &[OrientedEdge], n_from: u32, n_to: u32) -> Result<ConvergenceTable> {
    if window.len() > MAX_CONVERGENCE_WINDOW {
        return Err(Error::WindowTooLarge {
            size: window.len(),
            max: MAX_CONVERGENCE_WINDOW,
        });
    }
    if n_from < 1 || n_from > n_to {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= from <= to, got {n_from}..{n_to}"
        )));
    }
    let levels = build_levels(n_to)?;
    let laws: Vec<WindowLaw> = levels[(n_from - 1) as usize..]
        .iter()
        .map(|f| window_law(f, window))
        .collect::<Result<_>>()?;
    let distances: Vec<Rational> = laws
        .windows(2)
        .map(|w| tv_distance(&w[0], &w[1]))
        .collect::<Result<_>>()?;
    let tail = &distances[distances.len().saturating_sub(3)..];
    let tail_decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceTable {
        window: window
            .iter()
            .map(|e| format!("{},{},{}", e.tail.x, e.tail.y, e.dir.symbol()))
            .collect(),
        levels: (n_from..=n_to).collect(),
        laws: laws.iter().map(WindowLaw::to_export).collect(),
        steps: distances
            .iter()
            .enumerate()
            .map(|(i, d)| TvStep {
                from: n_from + i as u32,
                to: n_from + i as u32 + 1,
                distance: d.into(),
                approx: rational_f64(d),
            })
            .collect(),
        tail_decreasing,
        distances,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OneDVerdict {
    pub period: usize,
    pub bound: i64,
    pub fields_checked: u64,
    /// Fields whose divergence is nonnegative everywhere.
    pub nonnegative: u64,
    /// A field with nonnegative divergence that is positive somewhere.
    pub counterexample: Option<Vec<i64>>,
}

impl OneDVerdict {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Enumerates every field on Z with the given period and values in
/// `[-bound, bound]`, looking for one whose divergence is everywhere `>= 0`
/// and somewhere `> 0`.
pub fn one_d_check(period: usize, bound: i64) -> Result<OneDVerdict> {
    if !(1..=MAX_ONE_D_PERIOD).contains(&period) || !(0..=MAX_ONE_D_BOUND).contains(&bound) {
        return Err(Error::InvalidArgument(format!(
            "period must be in 1..={MAX_ONE_D_PERIOD} and bound in 0..={MAX_ONE_D_BOUND}"
        )));
    }
    let mut values = vec![-bound; period];
    let mut verdict = OneDVerdict {
        period,
        bound,
        fields_checked: 0,
        nonnegative: 0,
        counterexample: None,
    };
    loop {
        verdict.fields_checked += 1;
        let divs = (0..period).map(|x| divergence_1d(&values, x));
        let (mut nonneg, mut positive) = (true, false);
        for d in divs {
            nonneg &= d >= 0;
            positive |= d > 0;
        }
        if nonneg {
            verdict.nonnegative += 1;
            if positive && verdict.counterexample.is_none() {
                verdict.counterexample = Some(values.clone());
            }
        }
        // odometer
        let mut i = 0;
        loop {
            if i == period {
                return Ok(verdict);
            }
            if values[i] < bound {
                values[i] += 1;
                break;
            }
            values[i] = -bound;
            i += 1;
        }
    }
}

//! Independent oracles and property tests against the library routes.

use std::collections::{BTreeMap, HashMap};

use divfield::analysis::tv_distance;
use divfield::ensemble::{
    div_law, edge_law, field_value, sample_patch, window_law, PeriodicField, Shift, ShiftEnsemble,
};
use divfield::fragment::{build_fragment, build_levels, ImplicitFragment};
use divfield::lattice::{divergence, Axis, Dir, EdgeField, EdgeId, OrientedEdge, Rect, Vertex};
use divfield::smoothing::{fd_divergence, nearest_vertex_divergence, smooth_div, smooth_eval, ContinuousPoint};
use divfield::{FlowTree, Fragment, Level, Rational};
use num_rational::Ratio;
use proptest::prelude::*;

/// Subtree sizes by explicit DFS over the undirected tree edges.
fn dfs_flows(frag: &Fragment) -> HashMap<(Vertex, Vertex), i64> {
    let mut adj: HashMap<Vertex, Vec<Vertex>> = HashMap::new();
    for (id, _) in frag.tree_edges() {
        let e = id.positive();
        adj.entry(e.tail).or_default().push(e.head());
        adj.entry(e.head()).or_default().push(e.tail);
    }
    let root = frag.root();
    let mut order = vec![];
    let mut parent: HashMap<Vertex, Vertex> = HashMap::new();
    let mut stack = vec![root];
    let mut seen = std::collections::HashSet::from([root]);
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in adj.get(&v).into_iter().flatten() {
            if seen.insert(w) {
                parent.insert(w, v);
                stack.push(w);
            }
        }
    }
    let mut size: HashMap<Vertex, i64> = order.iter().map(|&v| (v, 1)).collect();
    for &v in order.iter().rev() {
        if let Some(&p) = parent.get(&v) {
            let sv = size[&v];
            *size.get_mut(&p).unwrap() += sv;
        }
    }
    let mut flows = HashMap::new();
    for (&child, &p) in &parent {
        flows.insert((child, p), size[&child]);
        flows.insert((p, child), -size[&child]);
    }
    flows
}

fn grid_edges(side: i64) -> impl Iterator<Item = OrientedEdge> {
    (0..side)
        .flat_map(move |y| (0..side).flat_map(move |x| Dir::ALL.map(|d| OrientedEdge::new(Vertex::new(x, y), d))))
        .filter(move |e| {
            let h = e.head();
            (0..side).contains(&h.x) && (0..side).contains(&h.y)
        })
}

#[test]
fn flows_match_dfs_subtree_sizes() {
    for frag in build_levels(6).unwrap() {
        let oracle = dfs_flows(&frag);
        for e in grid_edges(frag.side()) {
            let expect = oracle.get(&(e.tail, e.head())).copied().unwrap_or(0);
            assert_eq!(frag.flow(e).unwrap(), expect, "level {} edge {e}", frag.level());
        }
    }
}

/// Solves the divergence system on the level-2 tree by Gauss-Jordan
/// elimination in exact rationals.
#[test]
fn level_two_flow_solves_linear_system() {
    type Q = Ratio<i128>;
    let frag = build_fragment(2).unwrap();
    let tree: Vec<EdgeId> = frag.tree_edges().map(|(id, _)| id).collect();
    assert_eq!(tree.len(), 8);
    let vertices: Vec<Vertex> = frag.vertices().filter(|&v| v != frag.root()).collect();
    // row per non-root vertex: sum of outgoing unknowns = 1
    let mut rows: Vec<Vec<Q>> = vertices
        .iter()
        .map(|&v| {
            let mut row = vec![Q::from_integer(0); tree.len() + 1];
            for (j, id) in tree.iter().enumerate() {
                let e = id.positive();
                if e.tail == v {
                    row[j] += Q::from_integer(1);
                } else if e.head() == v {
                    row[j] -= Q::from_integer(1);
                }
            }
            row[tree.len()] = Q::from_integer(1);
            row
        })
        .collect();
    let n = tree.len();
    for col in 0..n {
        let pivot = (col..rows.len())
            .find(|&r| rows[r][col] != Q::from_integer(0))
            .expect("nonsingular");
        rows.swap(col, pivot);
        let p = rows[col][col];
        for x in rows[col].iter_mut() {
            *x /= p;
        }
        for r in 0..rows.len() {
            if r != col && rows[r][col] != Q::from_integer(0) {
                let factor = rows[r][col];
                let pivot_row = rows[col].clone();
                for (x, y) in rows[r].iter_mut().zip(pivot_row) {
                    *x -= factor * y;
                }
            }
        }
    }
    for (j, id) in tree.iter().enumerate() {
        assert_eq!(
            rows[j][n],
            Q::from_integer(frag.flow(id.positive()).unwrap() as i128),
            "{id:?}"
        );
    }
}

#[test]
fn implicit_evaluator_matches_materialized_flows() {
    for frag in build_levels(8).unwrap() {
        let imp = ImplicitFragment::new(frag.level());
        for (id, v) in frag.tree_edges() {
            assert_eq!(imp.flow(id.positive()).unwrap(), v);
        }
    }
}

#[test]
fn tiling_block_divergence_sums_to_zero() {
    for frag in build_levels(7).unwrap() {
        let total: i64 = frag.vertices().map(|v| divergence(&frag, v)).sum();
        assert_eq!(total, 0);
    }
}

/// Single-edge law counted from the sparse list of tree edges.
fn sparse_edge_law(frag: &Fragment, axis: Axis) -> BTreeMap<i64, u64> {
    let mut counts = BTreeMap::new();
    let mut nonzero = 0;
    for (id, v) in frag.tree_edges() {
        if id.axis == axis {
            *counts.entry(v).or_insert(0) += 1;
            nonzero += 1;
        }
    }
    counts.insert(0, frag.level().vertex_count() - nonzero);
    counts
}

#[test]
fn edge_law_matches_sparse_count() {
    for frag in build_levels(9).unwrap() {
        for axis in [Axis::H, Axis::V] {
            let oracle = sparse_edge_law(&frag, axis);
            let law = edge_law(&frag, axis);
            let s2 = frag.level().vertex_count() as i128;
            assert_eq!(law.len(), oracle.len());
            for (v, c) in oracle {
                assert_eq!(law.prob(v), Rational::new(c as i128, s2));
            }
        }
        let top = edge_law(&frag, Axis::H)
            .max_abs()
            .max(edge_law(&frag, Axis::V).max_abs());
        assert_eq!(top, frag.level().max_flow());
    }
}

#[test]
fn window_marginals_are_edge_laws() {
    let window = [
        OrientedEdge::east(2, 1),
        OrientedEdge::north(-1, 4),
        OrientedEdge::new(Vertex::new(0, 0), Dir::South),
    ];
    for frag in build_levels(5).unwrap() {
        let w = window_law(&frag, &window).unwrap();
        assert_eq!(w.total(), Rational::from_integer(1));
        assert!(w.support_len() as u64 <= frag.level().vertex_count());
        assert_eq!(w.marginal(0), edge_law(&frag, Axis::H));
        assert_eq!(w.marginal(1), edge_law(&frag, Axis::V));
        let south: BTreeMap<i64, Rational> = edge_law(&frag, Axis::V).atoms().map(|(v, p)| (-v, p)).collect();
        assert_eq!(w.marginal(2), divfield::ExactDist::from_atoms(south));
    }
}

fn arb_edge() -> impl Strategy<Value = OrientedEdge> {
    (-40i64..40, -40i64..40, 0usize..4).prop_map(|(x, y, d)| OrientedEdge::new(Vertex::new(x, y), Dir::ALL[d]))
}

fn arb_point() -> impl Strategy<Value = ContinuousPoint> {
    (-6.0f64..12.0, -6.0f64..12.0).prop_map(|(x, y)| ContinuousPoint::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn periodic_fields_are_antisymmetric(n in 1u32..=6, a in 0i64..63, b in 0i64..63, e in arb_edge()) {
        let frag = build_fragment(n).unwrap();
        let s = frag.side();
        let field = PeriodicField::new(&frag, Shift::new(a % s, b % s)).unwrap();
        prop_assert_eq!(field.value(e.reverse()), -field.value(e));
        prop_assert_eq!(frag.value(e.reverse()), -frag.value(e));
    }

    #[test]
    fn periodic_fields_have_two_divergence_values(n in 1u32..=6, a in 0i64..63, b in 0i64..63, x in -40i64..40, y in -40i64..40) {
        let frag = build_fragment(n).unwrap();
        let s = frag.side();
        let field = PeriodicField::new(&frag, Shift::new(a % s, b % s)).unwrap();
        let d = divergence(&field, Vertex::new(x, y));
        let is_root = (x - a % s).rem_euclid(s) == frag.root().x && (y - b % s).rem_euclid(s) == frag.root().y;
        prop_assert_eq!(d, if is_root { frag.level().root_divergence() } else if n == 1 { 0 } else { 1 });
    }

    #[test]
    fn field_is_doubly_periodic(n in 1u32..=6, e in arb_edge(), i in -3i64..3, j in -3i64..3) {
        let frag = build_fragment(n).unwrap();
        let s = frag.side();
        let sh = Shift::new(s / 2, s / 3);
        prop_assert_eq!(
            field_value(&frag, sh, e).unwrap(),
            field_value(&frag, sh, e.translate(i * s, j * s)).unwrap()
        );
    }

    #[test]
    fn implicit_and_materialized_tilings_agree(n in 1u32..=7, k in 0i64..10_000, e in arb_edge()) {
        let frag = build_fragment(n).unwrap();
        let imp = ImplicitFragment::new(frag.level());
        let s = frag.side();
        let sh = Shift::new(k % s, (k / s) % s);
        prop_assert_eq!(field_value(&frag, sh, e).unwrap(), field_value(&imp, sh, e).unwrap());
    }

    #[test]
    fn stationarity_of_point_laws(n in 2u32..=5, x in -20i64..20, y in -20i64..20) {
        let frag = build_fragment(n).unwrap();
        let ens = ShiftEnsemble::new(&frag);
        prop_assert_eq!(ens.div_law_at(Vertex::new(x, y)), div_law(frag.level()));
        prop_assert_eq!(ens.edge_law_at(OrientedEdge::north(x, y)), edge_law(&frag, Axis::V));
    }

    #[test]
    fn tv_is_a_metric(na in 1u32..=5, nb in 1u32..=5, nc in 1u32..=5, dx in -5i64..5) {
        let levels = build_levels(5).unwrap();
        let window = [OrientedEdge::east(dx, 0), OrientedEdge::north(0, dx)];
        let law = |n: u32| window_law(&levels[n as usize - 1], &window).unwrap();
        let (a, b, c) = (law(na), law(nb), law(nc));
        let ab = tv_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, tv_distance(&b, &a).unwrap());
        prop_assert!(ab <= tv_distance(&a, &c).unwrap() + tv_distance(&c, &b).unwrap());
        prop_assert!(ab >= Rational::from_integer(0) && ab <= Rational::from_integer(1));
        prop_assert_eq!(ab == Rational::from_integer(0), a == b);
    }

    #[test]
    fn patch_divergence_in_two_values(n in 1u32..=31, seed in any::<u64>()) {
        let rect = Rect::new(-3, -3, 3, 3).unwrap();
        let p = sample_patch(n, seed, rect).unwrap();
        let level = Level::new(n).unwrap();
        for v in rect.vertices() {
            let d = divergence(&p, v);
            prop_assert!(d == 1 || d == level.root_divergence(), "{} at {}", d, v);
        }
        prop_assert_eq!(p.value(OrientedEdge::east(0, 0).reverse()), -p.value(OrientedEdge::east(0, 0)));
    }

    #[test]
    fn smoothed_divergence_is_lattice_divergence(p in arb_point(), a in 0i64..7, b in 0i64..7) {
        let frag = build_fragment(3).unwrap();
        let field = PeriodicField::new(&frag, Shift::new(a, b)).unwrap();
        prop_assume!(smooth_div(&field, p).is_ok());
        prop_assert_eq!(smooth_div(&field, p).unwrap(), nearest_vertex_divergence(&field, p) as f64);
    }

    #[test]
    fn smoothed_components_continuous_along_flow(p in arb_point(), a in 0i64..3) {
        // the horizontal component is continuous in x, the vertical one in y
        let frag = build_fragment(2).unwrap();
        let field = PeriodicField::new(&frag, Shift::new(a, 0)).unwrap();
        let h = 1e-7;
        let kx = (p.x * 2.0).round() / 2.0;
        let ky = (p.y * 2.0).round() / 2.0;
        let left = smooth_eval(&field, ContinuousPoint::new(kx - h, p.y)).h_component;
        let right = smooth_eval(&field, ContinuousPoint::new(kx + h, p.y)).h_component;
        prop_assert!((left - right).abs() <= 64.0 * h);
        let below = smooth_eval(&field, ContinuousPoint::new(p.x, ky - h)).v_component;
        let above = smooth_eval(&field, ContinuousPoint::new(p.x, ky + h)).v_component;
        prop_assert!((below - above).abs() <= 64.0 * h);
    }

    #[test]
    fn fd_matches_analytic(p in arb_point()) {
        let frag = build_fragment(3).unwrap();
        let field = PeriodicField::new(&frag, Shift::new(2, 5)).unwrap();
        let h = 1e-3;
        prop_assume!(fd_divergence(&field, p, h).is_ok());
        let fd = fd_divergence(&field, p, h).unwrap();
        prop_assert!((fd - smooth_div(&field, p).unwrap()).abs() < 1e-8);
    }
}

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::query::Query;
use crate::rdf::{Term, TermId};
use crate::stats::JoinRole;

const PROPS: u32 = 4;

fn graph(text: &str) -> QueryGraph {
    let q = Query::parse(text).unwrap();
    QueryGraph::build_with(&q, resolve).unwrap()
}

/// `<pN>` resolves to id N, everything else is absent.
fn resolve(t: &Term) -> Option<TermId> {
    t.to_string().trim_matches(['<', '>']).strip_prefix('p').and_then(|x| x.parse().ok()).map(TermId)
}

fn random_catalog(rng: &mut ChaCha8Rng) -> StatsCatalog {
    let mut c = StatsCatalog::default();
    for p in 0..PROPS {
        let card = rng.gen_range(1..5000u64);
        c.card_p.insert(TermId(p), card);
        c.meta.property_edges.insert(TermId(p), card as usize);
        c.meta.property_vertices.insert(TermId(p), rng.gen_range(2..3000));
        c.reach_sel.insert(TermId(p), rng.gen_range(0.0001..0.5));
        for q in 0..PROPS {
            for role in [JoinRole::SS, JoinRole::SO, JoinRole::OS, JoinRole::OO] {
                if rng.gen_bool(0.8) {
                    c.join_sel.insert((TermId(p), TermId(q), role), rng.gen_range(0.00001..0.1));
                }
            }
        }
    }
    c.meta.vertex_count = 10_000;
    c
}

/// A connected query of `n` patterns over variables `?v0..`.
fn random_query(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut vars = 1;
    let mut body = Vec::new();
    for _ in 0..n {
        let a = rng.gen_range(0..vars);
        let b = if rng.gen_bool(0.6) || vars < 2 {
            vars += 1;
            vars - 1
        } else {
            (a + rng.gen_range(1..vars)) % vars
        };
        let (s, o) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        let m = ["", "", "", "*", "+", "?"][rng.gen_range(0..6)];
        body.push(format!("?v{s} <p{}>{m} ?v{o}", rng.gen_range(0..PROPS)));
    }
    format!("SELECT * WHERE {{ {} }}", body.join(" . "))
}

/// Every achievable (cost, layout) of every bushy plan over `set`.
fn all_plans(model: &CostModel, set: u64, memo: &mut HashMap<u64, Vec<(f64, f64, Props)>>) -> Vec<(f64, f64, Props)> {
    if let Some(v) = memo.get(&set) {
        return v.clone();
    }
    let mut out = Vec::new();
    if set.count_ones() == 1 {
        for lv in model.leaf_variants(set.trailing_zeros() as usize) {
            out.push((lv.cost, lv.card, lv.props));
        }
    } else {
        for l in 1..set {
            if l & set != l {
                continue;
            }
            let r = set ^ l;
            if !model.connected(l, r) {
                continue;
            }
            let (lp, rp) = (all_plans(model, l, memo), all_plans(model, r, memo));
            for a in &lp {
                for b in &rp {
                    let ls = Side { set: l, card: a.1, props: a.2 };
                    let rs = Side { set: r, card: b.1, props: b.2 };
                    for alt in model.join_alternatives(&ls, &rs) {
                        out.push((model.combine(a.0, b.0, &alt), alt.card, alt.props));
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    out.dedup_by(|a, b| a.0 == b.0 && a.2 == b.2);
    memo.insert(set, out.clone());
    out
}

#[test]
fn single_pattern_is_a_scan() {
    let g = graph("SELECT * WHERE { ?x <p0> ?y }");
    let c = random_catalog(&mut ChaCha8Rng::seed_from_u64(1));
    let plan = optimize(&g, &c, 4, DEFAULT_GAMMA).unwrap();
    assert!(matches!(plan.node, PlanNode::Leaf(_)));
    assert_eq!(plan.id, 0);
}

#[test]
fn dp_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 60 {
        let n = rng.gen_range(2..=5);
        let text = random_query(&mut rng, n);
        let Ok(q) = Query::parse(&text) else { continue };
        let Ok(g) = QueryGraph::build_with(&q, resolve) else {
            continue;
        };
        if g.vertices.len() > 5 || !g.is_connected() {
            continue;
        }
        let cat = random_catalog(&mut rng);
        let k = [1, 2, 4][checked % 3];
        let plan = optimize(&g, &cat, k, DEFAULT_GAMMA).unwrap();
        let model = CostModel::new(&g, &cat, k, DEFAULT_GAMMA);
        let full = (1u64 << g.vertices.len()) - 1;
        let best = all_plans(&model, full, &mut HashMap::new())[0].0;
        assert_eq!(plan.cost, best, "{text}");
        checked += 1;
    }
}

#[test]
fn cardinality_does_not_depend_on_join_order() {
    // the reach predicate's endpoints live in two vertices each, so both
    // inputs of the {0,3} x {1,2} split cover it
    let g = graph(
        "SELECT * WHERE { ?a <p1> ?b . ?a <p1> ?c . ?b <p0> ?x . ?c <p2> ?y . ?d <p3> ?z . ?b <p2>+ ?c . ?a <p1>+ ?d }",
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let cat = random_catalog(&mut rng);
        let model = CostModel::new(&g, &cat, 2, DEFAULT_GAMMA);
        let mut memo = HashMap::new();
        let best = all_plans(&model, 31, &mut memo)[0].0;
        for plans in memo.values() {
            let lo = plans.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = plans.iter().map(|p| p.1).fold(0.0, f64::max);
            assert!(hi - lo <= 1e-9 * hi.max(1.0), "{lo} vs {hi}");
        }
        let plan = optimize(&g, &cat, 2, DEFAULT_GAMMA).unwrap();
        assert!((plan.cost - best).abs() <= 1e-9 * best, "{} vs {best}", plan.cost);
    }
}

#[test]
fn every_reach_predicate_is_applied() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.gen_range(1..=7);
        let text = random_query(&mut rng, n);
        let q = Query::parse(&text).unwrap();
        let Ok(g) = QueryGraph::build_with(&q, resolve) else {
            continue;
        };
        let cat = random_catalog(&mut rng);
        let plan = optimize(&g, &cat, 2, DEFAULT_GAMMA).unwrap();
        let mut at_joins: BTreeMap<usize, usize> = BTreeMap::new();
        let mut anywhere = vec![false; g.preds.len()];
        for n in plan.nodes() {
            match &n.node {
                PlanNode::Leaf(l) => l.filters.iter().for_each(|f| anywhere[f.pred] = true),
                PlanNode::Join { alt, .. } => {
                    assert!(!alt.equi.is_empty() || !alt.reach.is_empty());
                    for c in &alt.reach {
                        anywhere[c.pred] = true;
                        *at_joins.entry(c.pred).or_default() += 1;
                    }
                }
            }
        }
        assert!(anywhere.iter().all(|&x| x), "{text}");
        assert!(at_joins.values().all(|&c| c == 1));
        assert_eq!(plan.vertices, (1u64 << g.vertices.len()) - 1);
        let ids: Vec<usize> = plan.nodes().iter().map(|n| n.id).collect();
        assert_eq!(ids, (0..ids.len()).collect::<Vec<_>>());
    }
}

#[test]
fn single_worker_never_reshards() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let text = random_query(&mut rng, 4);
        let q = Query::parse(&text).unwrap();
        let Ok(g) = QueryGraph::build_with(&q, resolve) else {
            continue;
        };
        let plan = optimize(&g, &random_catalog(&mut rng), 1, DEFAULT_GAMMA).unwrap();
        for n in plan.nodes() {
            if let PlanNode::Join { alt, .. } = &n.node {
                assert_eq!(alt.marks, [false, false]);
            }
        }
    }
}

#[test]
fn greedy_covers_large_queries() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let text = random_query(&mut rng, 16);
    let g = graph(&text);
    let cat = random_catalog(&mut rng);
    let plan = optimize(&g, &cat, 4, DEFAULT_GAMMA).unwrap();
    assert_eq!(plan.vertices, (1u64 << g.vertices.len()) - 1);
    assert_eq!(plan.join_count(), g.vertices.len() - 1);
    let exact = optimize_exact(&graph("SELECT * WHERE { ?a <p0> ?b . ?b <p1> ?c . ?c <p2> ?d }"), &cat, 4, 1.0).unwrap();
    let greedy = optimize_greedy(&graph("SELECT * WHERE { ?a <p0> ?b . ?b <p1> ?c . ?c <p2> ?d }"), &cat, 4, 1.0).unwrap();
    assert!(exact.cost <= greedy.cost);
}

#[test]
fn merge_join_when_both_sorted() {
    let mut c = StatsCatalog::default();
    for p in 0..2 {
        c.card_p.insert(TermId(p), 100);
    }
    c.join_sel.insert((TermId(0), TermId(1), JoinRole::SS), 0.01);
    let g = graph("SELECT * WHERE { ?x <p0> ?y . ?x <p1> ?z }");
    let plan = optimize(&g, &c, 2, 1.0).unwrap();
    let PlanNode::Join { alt, .. } = &plan.node else { panic!() };
    assert_eq!(alt.method, JoinMethod::Merge);
    assert_eq!(alt.marks, [false, false]);
    assert!((plan.card - 100.0).abs() < 1e-9);
    let text = plan.explain(&g);
    assert!(text.starts_with("#2 DMJ key=?x"), "{text}");
    assert!(plan.to_dot(&g).contains("n0 -> n2"));
}

#[test]
fn reach_join_between_scans() {
    let mut c = StatsCatalog::default();
    for p in 0..3 {
        c.card_p.insert(TermId(p), 100);
        c.meta.property_vertices.insert(TermId(p), 50);
    }
    c.reach_sel.insert(TermId(2), 0.05);
    let g = graph("SELECT * WHERE { ?x <p0> ?y . ?z <p1> ?w . ?y <p2>* ?z }");
    let plan = optimize(&g, &c, 2, 1.0).unwrap();
    let PlanNode::Join { alt, .. } = &plan.node else { panic!() };
    assert_eq!(alt.method, JoinMethod::Reach);
    assert_eq!(alt.reach.len(), 1);
    assert_eq!(plan.props.shard, Some(2));
}

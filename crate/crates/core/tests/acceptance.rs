//! Acceptance suite: prints one PASS/FAIL/WARN line per criterion and
//! exits non-zero if any hard criterion fails.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pathjoin::bench::median;
use pathjoin::gen::{self, GraphParams, HierarchyParams, Instance, QueryParams};
use pathjoin::index::PartitionIndexes;
use pathjoin::optimizer::{optimize_exact, CostModel, Props, Side, DEFAULT_GAMMA};
use pathjoin::oracle::{brute_force_reach_closure, Oracle};
use pathjoin::partition::{assign_custom, PartitionAssignment};
use pathjoin::query::{Query, QueryGraph, StarScope};
use pathjoin::rdf::{EncodedTriple, Term, TermId};
use pathjoin::reach::{build_bipartite_summary, compress_boundaries, compute_boundaries, PropertySubgraph, ReachIndex};
use pathjoin::stats::{sample_reach_selectivity, JoinRole, StatsCatalog};
use pathjoin::store::{BuildOptions, Store};
use pathjoin::{Engine, EngineConfig, Error, TransportKind};

/// Oracle row cap; cases whose reference answer exceeds it are replaced.
const ROW_LIMIT: usize = 200_000;
/// Criterion 5: sampled estimates within this distance of the exact value.
const SAMPLE_TOLERANCE: f64 = 0.05;
/// Criterion 5: required share of graphs inside the tolerance.
const SAMPLE_SHARE: f64 = 0.95;
/// Criterion 7: required k=4 / k=1 median time ratio.
const SPEEDUP_RATIO: f64 = 0.7;
/// Criterion 4: relative cost difference allowed between the optimizer
/// and exhaustive enumeration. The same cost summed in another order can
/// differ in the last bits.
const COST_TOLERANCE: f64 = 1e-9;
const SCALING_TRIPLES: usize = 2_000_000;
const SCALING_RUNS: usize = 5;

enum Verdict {
    Pass(String),
    Fail(String),
    Warn(String),
}

fn engine(inst: &Instance, assign: PartitionAssignment, transport: TransportKind) -> Engine {
    let opts = BuildOptions { sample_size: 500, ..BuildOptions::default() };
    let store = Store::build(inst.dict.clone(), &inst.triples, assign, &opts).expect("store builds");
    Engine::new(store, EngineConfig { transport, ..EngineConfig::default() }).expect("engine starts")
}

/// Outcome of running one generated case at several k.
#[derive(Default)]
struct CaseTally {
    cases: usize,
    runs: usize,
    reach_conditions: usize,
    failures: Vec<String>,
}

impl CaseTally {
    fn run(&mut self, seed: u64, graph: GraphParams, ks: &[usize], transport: TransportKind) -> bool {
        let (inst, text) = gen::random_case(seed, graph, QueryParams::default());
        let query = Query::parse(&text).expect("generated queries parse");
        let expect = match Oracle::new(&inst.triples, StarScope::DataVertices, ROW_LIMIT)
            .evaluate(&query, |t| inst.dict.lookup(t))
        {
            Ok(rows) => rows,
            Err(Error::Unsupported(_)) => return false,
            Err(e) => panic!("oracle failed on seed {seed}: {e}"),
        };
        self.cases += 1;
        for &k in ks {
            self.runs += 1;
            let e = engine(&inst, PartitionAssignment::hash(k), transport);
            match e.run(&text) {
                Ok(r) => {
                    if r.rows != expect {
                        self.failures.push(format!("seed {seed} k={k}: {} rows, expected {}", r.rows.len(), expect.len()));
                    }
                    for c in &r.audit.reach {
                        self.reach_conditions += 1;
                        let want = if k == 1 { 0.0 } else { 1.0 };
                        if r.audit.rounds(c) != want {
                            self.failures.push(format!("seed {seed} k={k}: {} frontier rounds", r.audit.rounds(c)));
                        }
                    }
                }
                Err(err) => self.failures.push(format!("seed {seed} k={k}: {err}")),
            }
        }
        true
    }
}

fn graph_params(rng: &mut ChaCha8Rng) -> GraphParams {
    let vertices = *[20, 50, 100, 300, 800, 2000].get(rng.gen_range(0..6)).unwrap();
    let triples = (vertices * rng.gen_range(1..=10)).min(20_000);
    GraphParams { vertices, properties: rng.gen_range(1..=10), triples }
}

fn oracle_equivalence(transport: TransportKind, want: usize, seed_base: u64) -> (CaseTally, Verdict) {
    let mut t = CaseTally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed_base);
    let mut seed = seed_base;
    while t.cases < want && seed < seed_base + 4 * want as u64 {
        let params = graph_params(&mut rng);
        t.run(seed, params, &[1, 2, 4], transport);
        seed += 1;
    }
    let detail = format!("{} instances, {} runs, k in {{1,2,4}}; tolerance: exact set equality", t.cases, t.runs);
    let verdict = if t.cases < want {
        Verdict::Fail(format!("only {} of {want} instances evaluable; {detail}", t.cases))
    } else if let Some(f) = t.failures.first() {
        Verdict::Fail(format!("{} mismatches, first: {f}; {detail}", t.failures.len()))
    } else {
        Verdict::Pass(detail)
    };
    (t, verdict)
}

fn criterion_1() -> (CaseTally, Verdict) {
    oracle_equivalence(TransportKind::InProc, 200, 1)
}

fn shard(triples: &[EncodedTriple], assign: &PartitionAssignment) -> Vec<PartitionIndexes> {
    let mut shards = vec![Vec::new(); assign.k()];
    for &t in triples {
        let st = assign_custom(t, assign).expect("assignment covers all vertices");
        for d in st.destinations() {
            shards[d].push(st);
        }
    }
    shards.into_iter().enumerate().map(|(i, s)| PartitionIndexes::build(s, i)).collect()
}

fn random_assignment(rng: &mut ChaCha8Rng, n: u32, k: usize) -> PartitionAssignment {
    if rng.gen_bool(0.5) {
        PartitionAssignment::hash(k)
    } else {
        PartitionAssignment::from_map(k, (0..n).map(|v| (TermId(v), rng.gen_range(0..k))), false).unwrap()
    }
}

/// In-boundary to out-boundary reachability over edges internal to
/// `part`, from scratch.
fn internal_boundary_reach(
    edges: &[(TermId, TermId)],
    assign: &PartitionAssignment,
    part: usize,
) -> (BTreeSet<TermId>, BTreeSet<TermId>, BTreeSet<(TermId, TermId)>) {
    let own = |v: TermId| assign.owner(v) == part;
    let mut ins = BTreeSet::new();
    let mut outs = BTreeSet::new();
    let mut adj: HashMap<TermId, Vec<TermId>> = HashMap::new();
    for &(u, v) in edges {
        match (own(u), own(v)) {
            (true, true) => adj.entry(u).or_default().push(v),
            (true, false) => {
                outs.insert(u);
            }
            (false, true) => {
                ins.insert(v);
            }
            _ => {}
        }
    }
    let mut pairs = BTreeSet::new();
    for &x in &ins {
        let mut seen = HashSet::from([x]);
        let mut queue = VecDeque::from([x]);
        while let Some(v) = queue.pop_front() {
            if outs.contains(&v) {
                pairs.insert((x, v));
            }
            for &w in adj.get(&v).into_iter().flatten() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
    }
    (ins, outs, pairs)
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut graphs, mut pairs, mut partitions) = (0, 0usize, 0);
    let mut failures: Vec<String> = Vec::new();
    for g in 0..200 {
        let n = rng.gen_range(5..=500u32);
        let m = rng.gen_range(n as usize / 2..=n as usize * 3);
        let k = rng.gen_range(2..=4);
        let p = TermId(n);
        let mut triples: Vec<EncodedTriple> = (0..m)
            .map(|_| {
                let s = rng.gen_range(0..n);
                // mostly short forward hops, so long paths and cycles both occur
                let o = if rng.gen_bool(0.8) { (s + rng.gen_range(1..4)) % n } else { rng.gen_range(0..n) };
                EncodedTriple::new(TermId(s), p, TermId(o))
            })
            .collect();
        triples.sort_unstable();
        triples.dedup();
        let mut map_rng = ChaCha8Rng::seed_from_u64(g);
        let assign = random_assignment(&mut map_rng, n + 1, k);
        let parts = shard(&triples, &assign);
        let index = ReachIndex::build(&parts, &assign, p).expect("reach index builds");
        graphs += 1;
        let closure = brute_force_reach_closure(&triples, p);
        let vertices: BTreeSet<TermId> = triples.iter().flat_map(|t| [t.s, t.o]).collect();
        let vs: Vec<TermId> = vertices.into_iter().collect();
        let sources: Vec<TermId> =
            if vs.len() <= 150 { vs.clone() } else { (0..100).map(|_| vs[rng.gen_range(0..vs.len())]).collect() };
        let queried: Vec<(TermId, TermId)> = sources.iter().flat_map(|&s| vs.iter().map(move |&t| (s, t))).collect();
        let got = index.reaches_many(&assign, &queried);
        for (&(s, t), &r) in queried.iter().zip(&got) {
            let want = s == t || closure.contains(&(s, t));
            if r != want {
                failures.push(format!("graph {g}: {s} -> {t} gave {r}"));
            }
        }
        pairs += queried.len();
        let edges: Vec<(TermId, TermId)> = triples.iter().map(|t| (t.s, t.o)).collect();
        for (i, dag) in index.partitions().iter().enumerate() {
            partitions += 1;
            if !dag.is_acyclic() {
                failures.push(format!("graph {g}: condensed graph of partition {i} has a cycle"));
            }
            let sub = PropertySubgraph::extract(&parts, p, i).unwrap();
            let b = compute_boundaries(&sub, &assign);
            let v = compress_boundaries(&sub, &b, &assign);
            let summary = build_bipartite_summary(&sub, &b, &v, &assign);
            let (ins, outs, want) = internal_boundary_reach(&edges, &assign, i);
            if b.in_boundary != ins || b.out_boundary != outs {
                failures.push(format!("graph {g}: boundary sets of partition {i} differ"));
                continue;
            }
            let virtual_of = |member: TermId, want_in: bool| {
                summary
                    .virtuals
                    .iter()
                    .position(|x| if want_in { x.is_in } else { x.is_out } && x.members.contains(&member))
                    .map(|x| x as u32)
            };
            let summary_edges: HashSet<(u32, u32)> = summary.edges.iter().copied().collect();
            for &x in &ins {
                for &y in &outs {
                    let (Some(iv), Some(ov)) = (virtual_of(x, true), virtual_of(y, false)) else {
                        failures.push(format!("graph {g}: boundary vertex missing from the summary"));
                        continue;
                    };
                    let claimed = (iv == ov) || summary_edges.contains(&(iv, ov));
                    if claimed != want.contains(&(x, y)) {
                        failures.push(format!("graph {g} partition {i}: boundary pair {x} -> {y} changed by compression"));
                    }
                }
            }
        }
    }
    let detail = format!("{graphs} graphs, {pairs} pairs, {partitions} condensed graphs; tolerance: zero mismatches");
    match failures.first() {
        None => Verdict::Pass(detail),
        Some(f) => Verdict::Fail(format!("{} mismatches, first: {f}; {detail}", failures.len())),
    }
}

fn criterion_3(tally: &CaseTally) -> Verdict {
    let mut failures = tally.failures.iter().filter(|f| f.contains("frontier rounds")).cloned().collect::<Vec<_>>();
    let mut chains = 0;
    let mut conditions = tally.reach_conditions;
    for (len, k) in [(150, 2), (400, 4), (1000, 3)] {
        let inst = gen::chain(len);
        let e = engine(&inst, PartitionAssignment::hash(k), TransportKind::InProc);
        let q = format!("SELECT * WHERE {{ <{0}c0> <{0}next>+ ?y . ?y <{0}next> ?z . ?z <{0}next>* <{0}c{len}> }}", gen::EX);
        let r = e.run(&q).expect("chain query runs");
        chains += 1;
        if r.rows.len() != len - 1 {
            failures.push(format!("chain {len}: {} rows, expected {}", r.rows.len(), len - 1));
        }
        for c in &r.audit.reach {
            conditions += 1;
            if r.audit.rounds(c) != 1.0 {
                failures.push(format!("chain {len} k={k}: {} frontier rounds", r.audit.rounds(c)));
            }
        }
    }
    let detail = format!(
        "{conditions} executed reach conditions incl. {chains} chains of diameter 150..1000; tolerance: exactly 1 round (0 at k=1)"
    );
    match failures.first() {
        None => Verdict::Pass(detail),
        Some(f) => Verdict::Fail(format!("{} violations, first: {f}; {detail}", failures.len())),
    }
}

const PROPS: u32 = 4;

fn random_catalog(rng: &mut ChaCha8Rng) -> StatsCatalog {
    let mut c = StatsCatalog::default();
    for p in 0..PROPS {
        let card = rng.gen_range(1..5000u64);
        c.card_p.insert(TermId(p), card);
        c.meta.property_edges.insert(TermId(p), card as usize);
        c.meta.property_vertices.insert(TermId(p), rng.gen_range(2..3000));
        c.reach_sel.insert(TermId(p), rng.gen_range(0.0001..0.5));
        for q in 0..PROPS {
            for role in JoinRole::ALL {
                if rng.gen_bool(0.8) {
                    c.join_sel.insert((TermId(p), TermId(q), role), rng.gen_range(0.00001..0.1));
                }
            }
        }
    }
    c.meta.vertex_count = 10_000;
    c
}

/// Cheapest cost of any bushy plan over `set`, by enumerating every split
/// and keeping every (cost, card, layout) triple.
fn every_plan(model: &CostModel, set: u64, memo: &mut HashMap<u64, Vec<(f64, f64, Props)>>) -> Vec<(f64, f64, Props)> {
    if let Some(v) = memo.get(&set) {
        return v.clone();
    }
    let mut out = Vec::new();
    if set.count_ones() == 1 {
        for lv in model.leaf_variants(set.trailing_zeros() as usize) {
            out.push((lv.cost, lv.card, lv.props));
        }
    } else {
        let mut l = (set - 1) & set;
        while l > 0 {
            let r = set ^ l;
            if model.connected(l, r) {
                let (lp, rp) = (every_plan(model, l, memo), every_plan(model, r, memo));
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
            l = (l - 1) & set;
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    out.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1 && a.2 == b.2);
    memo.insert(set, out.clone());
    out
}

/// Connected labeled graphs on `n` vertices, as edge lists.
fn connected_shapes(n: usize) -> Vec<Vec<(usize, usize)>> {
    let all: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << all.len()) {
        let edges: Vec<(usize, usize)> = (0..all.len()).filter(|i| mask >> i & 1 == 1).map(|i| all[i]).collect();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for &(a, b) in &edges {
                if seen[a] != seen[b] {
                    seen[a] = true;
                    seen[b] = true;
                    changed = true;
                }
            }
        }
        if seen.iter().all(|&s| s) {
            out.push(edges);
        }
    }
    out
}

/// Realises a shape as a query: vertex i is `?s{i} <p> ?o{i}`; an edge is
/// a shared variable when `prefer_equi` and both endpoints still have a
/// free slot, otherwise a reach pattern between the two vertices.
fn shape_query(n: usize, edges: &[(usize, usize)], prefer_equi: bool, rng: &mut ChaCha8Rng) -> String {
    let mut slots: Vec<[String; 2]> = (0..n).map(|i| [format!("?s{i}"), format!("?o{i}")]).collect();
    let mut used = vec![[false; 2]; n];
    let mut reach = Vec::new();
    for (e, &(a, b)) in edges.iter().enumerate() {
        let free = |u: &[bool; 2]| u.iter().position(|&x| !x);
        match (prefer_equi, free(&used[a]), free(&used[b])) {
            (true, Some(i), Some(j)) => {
                let v = format!("?e{e}");
                slots[a][i] = v.clone();
                slots[b][j] = v;
                used[a][i] = true;
                used[b][j] = true;
            }
            _ => reach.push((a, b)),
        }
    }
    let mut body: Vec<String> =
        (0..n).map(|i| format!("{} <p{}> {}", slots[i][0], rng.gen_range(0..PROPS), slots[i][1])).collect();
    for (a, b) in reach {
        let m = ["*", "+", "?"][rng.gen_range(0..3)];
        body.push(format!(
            "{} <p{}>{m} {}",
            slots[a][rng.gen_range(0..2)],
            rng.gen_range(0..PROPS),
            slots[b][rng.gen_range(0..2)]
        ));
    }
    format!("SELECT * WHERE {{ {} }}", body.join(" . "))
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let resolve = |t: &Term| t.lexical().strip_prefix('p').and_then(|x| x.parse().ok()).map(TermId);
    let (mut shapes, mut checked) = (0, 0);
    let mut failures = Vec::new();
    for n in 1..=5 {
        for edges in connected_shapes(n) {
            shapes += 1;
            for prefer_equi in [true, false] {
                let text = shape_query(n, &edges, prefer_equi, &mut rng);
                let q = Query::parse(&text).expect("shape queries parse");
                let g = match QueryGraph::build_with(&q, resolve) {
                    Ok(g) => g,
                    Err(e) => {
                        failures.push(format!("{text}: {e}"));
                        continue;
                    }
                };
                let cat = random_catalog(&mut rng);
                let k = [1, 2, 4][checked % 3];
                let plan = optimize_exact(&g, &cat, k, DEFAULT_GAMMA).expect("connected shapes plan");
                let model = CostModel::new(&g, &cat, k, DEFAULT_GAMMA);
                let full = (1u64 << g.vertices.len()) - 1;
                let best = every_plan(&model, full, &mut HashMap::new())[0].0;
                if (plan.cost - best).abs() > COST_TOLERANCE * best.abs().max(1.0) {
                    failures.push(format!("{text} k={k}: {} vs {best}", plan.cost));
                }
                checked += 1;
            }
        }
    }
    let detail = format!("{shapes} connected shapes on 1..5 vertices, {checked} queries; tolerance: relative {COST_TOLERANCE:e}");
    match failures.first() {
        None => Verdict::Pass(detail),
        Some(f) => Verdict::Fail(format!("{} mismatches, first: {f}; {detail}", failures.len())),
    }
}

/// Exact reflexive reachability fraction over V^p x V^p.
fn exact_selectivity(triples: &[EncodedTriple], p: TermId) -> f64 {
    let closure = brute_force_reach_closure(triples, p);
    let vp: BTreeSet<TermId> = triples.iter().filter(|t| t.p == p).flat_map(|t| [t.s, t.o]).collect();
    let n = vp.len() as f64;
    let hits = closure.iter().filter(|(s, t)| s != t).count() as f64 + n;
    hits / (n * n)
}

fn random_reach_graph(rng: &mut ChaCha8Rng, n: u32, m: usize) -> Vec<EncodedTriple> {
    let p = TermId(n);
    let fanout = rng.gen_range(1..6);
    (0..m)
        .map(|_| {
            let s = rng.gen_range(0..n);
            let o = if rng.gen_bool(0.7) { (s + rng.gen_range(1..=fanout)) % n } else { rng.gen_range(0..n) };
            EncodedTriple::new(TermId(s), p, TermId(o))
        })
        .collect()
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    // exhaustive mode: |V^p|^2 fits the sample budget
    let mut exhaustive = 0;
    for g in 0..100u64 {
        let n = rng.gen_range(3..=90u32);
        let m = rng.gen_range(1..=2 * n as usize);
        let triples = random_reach_graph(&mut rng, n, m);
        let k = rng.gen_range(1..=4);
        let assign = PartitionAssignment::hash(k);
        let parts = shard(&triples, &assign);
        let p = TermId(n);
        let idx = pathjoin::reach::ReachIndexes::build(&parts, &assign, [p]).unwrap();
        let got = sample_reach_selectivity(&idx, &assign, p, 10_000, g).unwrap();
        let want = exact_selectivity(&triples, p);
        exhaustive += 1;
        if got != want {
            failures.push(format!("exhaustive graph {g}: {got} vs {want}"));
        }
    }
    let mut within = 0;
    let sampled = 100;
    for g in 0..sampled {
        let n = rng.gen_range(150..=600u32);
        let m = rng.gen_range(n as usize / 2..=2 * n as usize);
        let triples = random_reach_graph(&mut rng, n, m);
        let assign = PartitionAssignment::hash(rng.gen_range(1..=4));
        let parts = shard(&triples, &assign);
        let p = TermId(n);
        let idx = pathjoin::reach::ReachIndexes::build(&parts, &assign, [p]).unwrap();
        let vp = idx.get(p).unwrap().vertices().len();
        assert!(vp * vp > 10_000, "sampled mode needs |V^p|^2 above the sample size");
        let got = sample_reach_selectivity(&idx, &assign, p, 10_000, 1000 + g).unwrap();
        if (got - exact_selectivity(&triples, p)).abs() <= SAMPLE_TOLERANCE {
            within += 1;
        }
    }
    let share = within as f64 / sampled as f64;
    let detail = format!(
        "{exhaustive} exhaustive graphs exact; sampled n=10000 within ±{SAMPLE_TOLERANCE} on {within}/{sampled} graphs (need ≥{:.0}%)",
        SAMPLE_SHARE * 100.0
    );
    if let Some(f) = failures.first() {
        Verdict::Fail(format!("{f}; {detail}"))
    } else if share < SAMPLE_SHARE {
        Verdict::Fail(detail)
    } else {
        Verdict::Pass(detail)
    }
}

fn criterion_6() -> Verdict {
    let mut failures = Vec::new();
    let mut pairs = 0;
    let mut seed = 6000u64;
    while pairs < 50 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GraphParams { vertices: rng.gen_range(20..200), properties: rng.gen_range(1..6), triples: rng.gen_range(40..800) };
        let (inst, text) = gen::random_case(seed, params, QueryParams::default());
        let q = Query::parse(&text).unwrap();
        if Oracle::new(&inst.triples, StarScope::DataVertices, ROW_LIMIT).evaluate(&q, |t| inst.dict.lookup(t)).is_err() {
            continue;
        }
        pairs += 1;
        let mut reference: Option<Vec<Vec<TermId>>> = None;
        for k in [1, 2, 4, 8] {
            let map: Vec<(TermId, usize)> = inst.dict.iter().map(|(id, _)| (id, rng.gen_range(0..k))).collect();
            let file_based = PartitionAssignment::from_map(k, map, false).unwrap();
            for (mode, assign) in [("hash", PartitionAssignment::hash(k)), ("file", file_based)] {
                let rows = match engine(&inst, assign, TransportKind::InProc).run(&text) {
                    Ok(r) => r.rows,
                    Err(e) => {
                        failures.push(format!("seed {seed} k={k} {mode}: {e}"));
                        continue;
                    }
                };
                match &reference {
                    None => reference = Some(rows),
                    Some(r) if *r != rows => failures.push(format!("seed {seed} k={k} {mode}: result differs")),
                    Some(_) => {}
                }
            }
        }
    }
    let detail = format!("{pairs} dataset/query pairs, k in {{1,2,4,8}}, hash and file-based; tolerance: identical sets");
    match failures.first() {
        None => Verdict::Pass(detail),
        Some(f) => Verdict::Fail(format!("{} differences, first: {f}; {detail}", failures.len())),
    }
}

fn criterion_7() -> Verdict {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let shape = HierarchyParams { students: 200, ..HierarchyParams::default() }.with_size(SCALING_TRIPLES);
    let inst = gen::hierarchy(shape, 7);
    let query = gen::hierarchy_pair_query();
    let mut medians = Vec::new();
    let mut rows = Vec::new();
    for k in [1, 4] {
        let e = engine(&inst, PartitionAssignment::hash(k), TransportKind::InProc);
        let prepared = e.prepare(&query).expect("pair query plans");
        let mut times = Vec::new();
        for _ in 0..SCALING_RUNS {
            let start = Instant::now();
            let r = e.execute(&prepared).expect("pair query runs");
            times.push(start.elapsed().as_secs_f64());
            rows.push(r.rows.len());
        }
        medians.push(median(times));
    }
    let ratio = medians[1] / medians[0];
    let detail = format!(
        "{} triples, {} rows, median k=1 {:.3}s, k=4 {:.3}s, ratio {ratio:.2} (need ≤{SPEEDUP_RATIO}), {cores} cores",
        inst.triples.len(),
        rows[0],
        medians[0],
        medians[1]
    );
    if rows.iter().any(|&r| r != rows[0]) {
        return Verdict::Fail(format!("result size changed with k; {detail}"));
    }
    if cores < 4 {
        return Verdict::Warn(format!("fewer than 4 cores, trend not assessable; {detail}"));
    }
    if ratio <= SPEEDUP_RATIO {
        Verdict::Pass(detail)
    } else {
        Verdict::Warn(detail)
    }
}

fn criterion_8() -> Verdict {
    let (tally, base) = oracle_equivalence(TransportKind::Chaos { seed: 8 }, 50, 8000);
    let rounds = tally.failures.iter().filter(|f| f.contains("frontier rounds")).count();
    match base {
        Verdict::Pass(d) => Verdict::Pass(format!("seeded delay/reorder transport: {d}; {} reach conditions at 1 round", tally.reach_conditions)),
        Verdict::Fail(d) => Verdict::Fail(format!("seeded delay/reorder transport: {d}; {rounds} round violations")),
        Verdict::Warn(d) => Verdict::Warn(d),
    }
}

fn main() {
    let mut hard_failures = 0;
    let mut report = |n: usize, name: &str, v: Verdict, started: Instant| {
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                hard_failures += 1;
                ("FAIL", d)
            }
            Verdict::Warn(d) => ("WARN", d),
        };
        println!("criterion {n} {name}: {tag} ({detail}) [{secs:.1}s]");
    };
    let t = Instant::now();
    let (tally, v1) = criterion_1();
    report(1, "oracle equivalence", v1, t);
    let t = Instant::now();
    report(2, "reach index soundness", criterion_2(), t);
    let t = Instant::now();
    report(3, "one frontier round", criterion_3(&tally), t);
    let t = Instant::now();
    report(4, "optimizer optimality", criterion_4(), t);
    let t = Instant::now();
    report(5, "statistics fidelity", criterion_5(), t);
    let t = Instant::now();
    report(6, "partition transparency", criterion_6(), t);
    let t = Instant::now();
    report(7, "scaling trend", criterion_7(), t);
    let t = Instant::now();
    report(8, "asynchrony robustness", criterion_8(), t);
    if hard_failures > 0 {
        std::process::exit(1);
    }
}

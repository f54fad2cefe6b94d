//! Single-threaded reference evaluator: no partitioning, no indexes, no
//! planning. Every reach pattern is answered from a breadth-first closure
//! over the whole graph.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::query::{Modifier, Node, Query, StarScope, Var};
use crate::rdf::{EncodedTriple, Term, TermId};

/// All `(s, t)` with a path of one or more `p`-edges from `s` to `t`.
pub fn brute_force_reach_closure(triples: &[EncodedTriple], p: TermId) -> BTreeSet<(TermId, TermId)> {
    let adj = adjacency(triples, p);
    let mut out = BTreeSet::new();
    for &s in adj.keys() {
        for t in bfs(&adj, s) {
            out.insert((s, t));
        }
    }
    out
}

fn adjacency(triples: &[EncodedTriple], p: TermId) -> HashMap<TermId, Vec<TermId>> {
    let mut adj: HashMap<TermId, Vec<TermId>> = HashMap::new();
    for t in triples.iter().filter(|t| t.p == p) {
        adj.entry(t.s).or_default().push(t.o);
    }
    adj
}

/// Vertices reachable from `s` in one or more steps.
fn bfs(adj: &HashMap<TermId, Vec<TermId>>, s: TermId) -> HashSet<TermId> {
    let mut seen = HashSet::new();
    let mut queue: VecDeque<TermId> = adj.get(&s).into_iter().flatten().copied().collect();
    while let Some(v) = queue.pop_front() {
        if seen.insert(v) {
            queue.extend(adj.get(&v).into_iter().flatten().copied());
        }
    }
    seen
}

pub struct Oracle<'a> {
    triples: &'a [EncodedTriple],
    scope: StarScope,
    row_limit: usize,
    vertices: HashSet<TermId>,
}

type Binding = HashMap<Var, TermId>;

/// One property's edges and its zero-length scope.
struct Edges {
    adj: HashMap<TermId, Vec<TermId>>,
    scope: HashSet<TermId>,
}

impl<'a> Oracle<'a> {
    pub fn new(triples: &'a [EncodedTriple], scope: StarScope, row_limit: usize) -> Self {
        let vertices = triples.iter().flat_map(|t| [t.s, t.o]).collect();
        Oracle { triples, scope, row_limit, vertices }
    }

    fn property_vertices(&self, p: TermId) -> HashSet<TermId> {
        self.triples.iter().filter(|t| t.p == p).flat_map(|t| [t.s, t.o]).collect()
    }

    /// Candidate `(subject, object)` pairs of one pattern, given an optional
    /// fixed subject.
    fn pairs(&self, edges: &Edges, m: Modifier, subject: Option<TermId>) -> Vec<(TermId, TermId)> {
        let adj = &edges.adj;
        if m == Modifier::None {
            return match subject {
                Some(s) => adj.get(&s).into_iter().flatten().map(|&o| (s, o)).collect(),
                None => adj.iter().flat_map(|(&s, os)| os.iter().map(move |&o| (s, o))).collect(),
            };
        }
        let sources: Vec<TermId> = match subject {
            Some(s) => vec![s],
            None => {
                let mut v: Vec<TermId> = edges.scope.iter().copied().chain(adj.keys().copied()).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        let mut out = Vec::new();
        for s in sources {
            let mut ts: BTreeSet<TermId> = match m {
                Modifier::Star | Modifier::Plus => bfs(adj, s).into_iter().collect(),
                Modifier::Opt => adj.get(&s).into_iter().flatten().copied().collect(),
                Modifier::None => unreachable!(),
            };
            ts.remove(&s);
            if m != Modifier::Plus && edges.scope.contains(&s) {
                ts.insert(s);
            }
            out.extend(ts.into_iter().map(|t| (s, t)));
        }
        out
    }

    /// Evaluates `query`, resolving constants with `resolve`. Returns the
    /// distinct projected rows, sorted.
    pub fn evaluate(&self, query: &Query, resolve: impl Fn(&Term) -> Option<TermId>) -> Result<Vec<Vec<TermId>>> {
        let konst = |n: &Node| match n {
            Node::Const(t) => Some(resolve(t).unwrap_or(TermId::ABSENT)),
            Node::Var(_) => None,
        };
        let mut remaining: Vec<usize> = (0..query.patterns.len()).collect();
        let mut bindings: Vec<Binding> = vec![Binding::new()];
        while !remaining.is_empty() {
            // prefer a pattern touching an already bound variable
            let bound: HashSet<&Var> = bindings.first().map(|b| b.keys().collect()).unwrap_or_default();
            let pick = remaining
                .iter()
                .position(|&i| {
                    let p = &query.patterns[i];
                    [&p.subject, &p.object].iter().any(|n| n.var().is_some_and(|v| bound.contains(v)))
                })
                .unwrap_or(0);
            let idx = remaining.remove(pick);
            let pat = &query.patterns[idx];
            let p = resolve(&pat.atom.property).unwrap_or(TermId::ABSENT);
            let (sc, oc) = (konst(&pat.subject), konst(&pat.object));
            let edges = Edges {
                adj: adjacency(self.triples, p),
                scope: match self.scope {
                    StarScope::DataVertices => self.vertices.clone(),
                    StarScope::PropertyVertices => self.property_vertices(p),
                },
            };
            let mut next = Vec::new();
            let mut cache: BTreeMap<Option<TermId>, Vec<(TermId, TermId)>> = BTreeMap::new();
            // all pairs grouped by object, for bindings that fix only the object
            let mut by_object: Option<HashMap<TermId, Vec<(TermId, TermId)>>> = None;
            for b in &bindings {
                let s_fixed = sc.or_else(|| pat.subject.var().and_then(|v| b.get(v).copied()));
                let o_fixed = oc.or_else(|| pat.object.var().and_then(|v| b.get(v).copied()));
                let pairs: &[(TermId, TermId)] = match (s_fixed, o_fixed) {
                    (None, Some(o)) => {
                        let index = by_object.get_or_insert_with(|| {
                            let mut m: HashMap<TermId, Vec<(TermId, TermId)>> = HashMap::new();
                            for pair in self.pairs(&edges, pat.atom.modifier, None) {
                                m.entry(pair.1).or_default().push(pair);
                            }
                            m
                        });
                        index.get(&o).map_or(&[], |v| v.as_slice())
                    }
                    _ => cache.entry(s_fixed).or_insert_with(|| self.pairs(&edges, pat.atom.modifier, s_fixed)),
                };
                for &(s, o) in pairs {
                    let mut nb = b.clone();
                    if !bind(&mut nb, &pat.subject, s, sc) || !bind(&mut nb, &pat.object, o, oc) {
                        continue;
                    }
                    next.push(nb);
                    if next.len() > self.row_limit {
                        return Err(Error::Unsupported(format!("reference evaluation exceeds {} rows", self.row_limit)));
                    }
                }
            }
            bindings = next;
        }
        let mut rows: Vec<Vec<TermId>> =
            bindings.iter().map(|b| query.projection.iter().map(|v| b[v]).collect()).collect();
        rows.sort_unstable();
        rows.dedup();
        Ok(rows)
    }
}

fn bind(b: &mut Binding, node: &Node, value: TermId, konst: Option<TermId>) -> bool {
    match node {
        Node::Const(_) => konst == Some(value),
        Node::Var(v) => match b.get(v) {
            Some(&x) => x == value,
            None => {
                b.insert(v.clone(), value);
                true
            }
        },
    }
}

//! Distributed execution of a physical plan.
//!
//! Every plan node runs as one thread per worker; sibling subtrees run
//! concurrently. Rows that stay on their worker never touch the transport,
//! and every sender closes each stream with an end-of-stream marker even
//! when it had nothing to send.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use super::relation::{hash_join, merge_join, JoinLayout, Rel};
use super::transport::{Kind, Message, StreamKey, StreamTraffic, Transport};
use crate::error::{Error, Result};
use crate::index::{Group, PartitionIndexes, Permutation, ScanPattern};
use crate::optimizer::{JoinMethod, LeafVariant, Plan, PlanNode, ReachCond};
use crate::partition::PartitionAssignment;
use crate::query::{Modifier, QueryGraph, Slot, StarScope, VarId, VertexKind};
use crate::rdf::TermId;
use crate::reach::{group_by_owner, CompoundDag, ReachIndexes, ReachScratch};

#[derive(Copy, Clone, Debug)]
pub struct ExecOptions {
    pub star_scope: StarScope,
    /// Payload size, in ids, at which a batch is flushed.
    pub batch_words: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { star_scope: StarScope::default(), batch_words: 1 << 15 }
    }
}

/// The sharded data every worker reads from.
#[derive(Copy, Clone)]
pub struct Cluster<'a> {
    pub partitions: &'a [PartitionIndexes],
    pub assign: &'a PartitionAssignment,
    pub reach: &'a ReachIndexes,
}

impl Cluster<'_> {
    pub fn k(&self) -> usize {
        self.partitions.len()
    }
}

/// Message counts of one executed reach condition.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ReachRound {
    pub node: usize,
    pub cond: usize,
    pub pred: usize,
    pub end_of_streams: u64,
    pub frontier_batches: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Audit {
    pub k: usize,
    pub reach: Vec<ReachRound>,
    pub traffic: BTreeMap<u32, StreamTraffic>,
    /// Rows delivered to the master before duplicate elimination.
    pub delivered_rows: usize,
}

impl Audit {
    /// Frontier exchange rounds of one condition: every worker closes the
    /// stream towards every other worker once per round.
    pub fn rounds(&self, r: &ReachRound) -> f64 {
        if self.k < 2 {
            return 0.0;
        }
        r.end_of_streams as f64 / (self.k * (self.k - 1)) as f64
    }

    /// Reshard rounds of every resharding stream of plan node `node`,
    /// keyed by channel.
    pub fn reshard_rounds(&self, node: usize) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        if self.k < 2 {
            return out;
        }
        for (&op, t) in self.traffic.range(operator_id(node, 0)..operator_id(node + 1, 0)) {
            let channel = op & 0xff;
            if channel != RESULT_CHANNEL && channel % 2 == 0 {
                out.insert(channel, t.end_of_streams as f64 / (self.k * (self.k - 1)) as f64);
            }
        }
        out
    }

    pub fn total_messages(&self) -> u64 {
        self.traffic.values().map(|t| t.tuple_batches + t.frontier_batches + t.end_of_streams).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueryOutput {
    /// Distinct projected rows, sorted.
    pub rows: Vec<Vec<TermId>>,
    pub audit: Audit,
}

pub const LEFT_CHANNEL: u32 = 0;
pub const RIGHT_CHANNEL: u32 = 1;
pub const RESULT_CHANNEL: u32 = 255;

pub fn cond_reshard_channel(c: usize) -> u32 {
    2 + 2 * c as u32
}

pub fn cond_frontier_channel(c: usize) -> u32 {
    3 + 2 * c as u32
}

pub fn operator_id(node: usize, channel: u32) -> u32 {
    (node as u32) << 8 | channel
}

struct Ctx<'a> {
    cluster: Cluster<'a>,
    graph: &'a QueryGraph,
    transport: &'a dyn Transport,
    query: u64,
    opts: ExecOptions,
}

impl Ctx<'_> {
    fn k(&self) -> usize {
        self.cluster.k()
    }

    fn key(&self, node: usize, channel: u32) -> StreamKey {
        StreamKey { query: self.query, operator: operator_id(node, channel) }
    }

    fn owner(&self, v: TermId) -> usize {
        self.cluster.assign.owner(v)
    }

    /// Runs `f` once per worker on its own thread. A failing worker
    /// cancels the query so that its peers stop waiting.
    fn on_workers<T: Send>(&self, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
        let results: Vec<Result<T>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..self.k())
                .map(|w| {
                    let f = &f;
                    s.spawn(move || {
                        let r = f(w);
                        if r.is_err() {
                            self.transport.cancel(self.query);
                        }
                        r
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(Error::Transport("worker panicked".into())))).collect()
        });
        let mut out = Vec::with_capacity(results.len());
        let mut err: Option<Error> = None;
        for r in results {
            match r {
                Ok(v) => out.push(v),
                Err(Error::Cancelled) => {
                    err.get_or_insert(Error::Cancelled);
                }
                Err(e) => {
                    if matches!(err, None | Some(Error::Cancelled)) {
                        err = Some(e);
                    }
                }
            }
        }
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn send(&self, to: usize, kind: Kind, key: StreamKey, from: usize, payload: Vec<u32>) -> Result<()> {
        self.transport.send(to, Message { kind, key, sender: from as u16, payload })
    }

    /// Sends `end-of-stream` to every other worker, then hands every
    /// payload received from them to `on_payload` until all have closed.
    fn close_and_drain(&self, w: usize, key: StreamKey, mut on_payload: impl FnMut(Vec<u32>) -> Result<()>) -> Result<()> {
        let k = self.k();
        for to in (0..k).filter(|&to| to != w) {
            self.send(to, Kind::EndOfStream, key, w, Vec::new())?;
        }
        let mut open = vec![true; k];
        open[w] = false;
        let mut remaining = k - 1;
        while remaining > 0 {
            let m = self.transport.recv(w, key)?;
            let sender = m.sender as usize;
            if sender >= k || !open[sender] {
                return Err(Error::Transport(format!("unexpected message from endpoint {sender}")));
            }
            match m.kind {
                Kind::EndOfStream => {
                    open[sender] = false;
                    remaining -= 1;
                }
                _ => on_payload(m.payload)?,
            }
        }
        Ok(())
    }

    /// Moves every row to the owner of its `col` value.
    fn reshard(&self, w: usize, rel: Rel, col: usize, key: StreamKey) -> Result<Rel> {
        let k = self.k();
        if k == 1 {
            return Ok(rel);
        }
        let width = rel.width();
        let mut local = Rel::new(width);
        let mut out: Vec<Rel> = (0..k).map(|_| Rel::new(width)).collect();
        for row in rel.rows() {
            let dest = self.owner(row[col]);
            if dest == w {
                local.push(row);
            } else {
                out[dest].push(row);
                if (out[dest].len() + 1) * width.max(1) >= self.opts.batch_words {
                    self.flush_rel(w, dest, key, &mut out[dest])?;
                }
            }
        }
        for (dest, r) in out.iter_mut().enumerate() {
            if !r.is_empty() {
                self.flush_rel(w, dest, key, r)?;
            }
        }
        self.close_and_drain(w, key, |payload| {
            let mut used = 0;
            while used < payload.len() {
                used += local.decode_append(&payload[used..])?;
            }
            Ok(())
        })?;
        Ok(local)
    }

    fn flush_rel(&self, w: usize, dest: usize, key: StreamKey, r: &mut Rel) -> Result<()> {
        let mut payload = Vec::with_capacity(1 + r.len() * r.width());
        r.encode_into(&mut payload);
        *r = Rel::new(r.width());
        self.send(dest, Kind::TupleBatch, key, w, payload)
    }
}

fn col(schema: &[VarId], v: VarId) -> usize {
    schema.iter().position(|&x| x == v).expect("variable in schema")
}

pub(crate) fn has_edges(partitions: &[PartitionIndexes], p: TermId) -> bool {
    partitions.iter().any(|part| !part.get(Permutation::Pso).scan(&[p]).is_empty())
}

/// Worker-local view of one reach predicate.
struct CondEval<'a> {
    modifier: Modifier,
    property: TermId,
    dag: Option<&'a CompoundDag>,
    part: &'a PartitionIndexes,
    scope: StarScope,
}

impl<'a> CondEval<'a> {
    fn new(ctx: &Ctx<'a>, w: usize, pred: usize) -> Result<Self> {
        let p = &ctx.graph.preds[pred];
        let dag = match p.modifier {
            Modifier::Star | Modifier::Plus if p.property != TermId::ABSENT => match ctx.cluster.reach.get(p.property) {
                Some(ix) => Some(ix.partition(w)),
                // a term that labels no edge only has zero-length matches
                None if !has_edges(ctx.cluster.partitions, p.property) => None,
                None => return Err(Error::MissingReachIndex(p.property_term.to_string())),
            },
            _ => None,
        };
        Ok(CondEval { modifier: p.modifier, property: p.property, dag, part: &ctx.cluster.partitions[w], scope: ctx.opts.star_scope })
    }

    /// Zero-length membership for a vertex owned here.
    fn in_scope(&self, v: TermId) -> bool {
        match self.scope {
            StarScope::DataVertices => self.part.has_vertex(v),
            StarScope::PropertyVertices => {
                self.property != TermId::ABSENT
                    && (!self.part.out_edges(self.property, v).is_empty() || !self.part.in_edges(self.property, v).is_empty())
            }
        }
    }

    fn successors(&self, s: TermId) -> Vec<TermId> {
        if self.property == TermId::ABSENT {
            return Vec::new();
        }
        let mut v: Vec<TermId> = self.part.out_edges(self.property, s).iter().map(|t| t.o).collect();
        v.dedup();
        v
    }
}

/// The outcome of searching from one source at its owner.
struct SourceSearch {
    /// For `*`/`+`: whether the source has edges here and was explored.
    explored: bool,
    /// For `?`: the direct successors.
    successors: Vec<TermId>,
    zero_length: bool,
    /// Entry vertices per remote worker.
    remote: FxHashMap<usize, Vec<TermId>>,
}

fn search_source(ctx: &Ctx, ev: &CondEval, scratch: &mut Option<ReachScratch>, w: usize, s: TermId) -> SourceSearch {
    let zero_length = ev.modifier != Modifier::Plus && ev.in_scope(s);
    match ev.modifier {
        Modifier::Opt => {
            let successors = ev.successors(s);
            let mut remote: FxHashMap<usize, Vec<TermId>> = FxHashMap::default();
            for &t in &successors {
                let o = ctx.owner(t);
                if o != w {
                    remote.entry(o).or_default().push(t);
                }
            }
            SourceSearch { explored: false, successors, zero_length, remote }
        }
        _ => match ev.dag {
            Some(dag) if dag.contains(s) => {
                let sc = scratch.get_or_insert_with(|| dag.scratch());
                dag.explore([s], sc);
                let mut remote = group_by_owner(&dag.frontier(sc));
                remote.remove(&w);
                SourceSearch { explored: true, successors: Vec::new(), zero_length, remote }
            }
            _ => SourceSearch { explored: false, successors: Vec::new(), zero_length, remote: FxHashMap::default() },
        },
    }
}

/// Whether `t`, owned by the source's worker, satisfies the condition.
fn accept_local(ev: &CondEval, scratch: &Option<ReachScratch>, search: &SourceSearch, s: TermId, t: TermId) -> bool {
    if s == t {
        return search.zero_length;
    }
    match ev.modifier {
        Modifier::Opt => search.successors.contains(&t),
        _ => search.explored && ev.dag.is_some_and(|d| d.reached(t, scratch.as_ref().unwrap())),
    }
}

/// Target-side rows indexed by the target variable's value.
struct Targets<'r> {
    rel: &'r Rel,
    by_value: FxHashMap<TermId, Vec<u32>>,
    by_comp: FxHashMap<u32, Vec<TermId>>,
}

impl<'r> Targets<'r> {
    fn new(rel: &'r Rel, tcol: usize, dag: Option<&CompoundDag>) -> Self {
        let mut by_value: FxHashMap<TermId, Vec<u32>> = FxHashMap::default();
        for (i, r) in rel.rows().enumerate() {
            by_value.entry(r[tcol]).or_default().push(i as u32);
        }
        let mut by_comp: FxHashMap<u32, Vec<TermId>> = FxHashMap::default();
        if let Some(d) = dag {
            for &t in by_value.keys() {
                if let Some(c) = d.component(t) {
                    by_comp.entry(c).or_default().push(t);
                }
            }
        }
        Targets { rel, by_value, by_comp }
    }

    /// Target values reached by the last exploration of `dag`.
    fn reached(&self, dag: &CompoundDag, scratch: &ReachScratch, out: &mut Vec<TermId>) {
        let visited = dag.reached_components(scratch);
        if visited.len() <= self.by_comp.len() {
            for c in visited {
                if let Some(ts) = self.by_comp.get(c) {
                    out.extend_from_slice(ts);
                }
            }
        } else {
            for (&c, ts) in &self.by_comp {
                if dag.component_reached(c, scratch) {
                    out.extend_from_slice(ts);
                }
            }
        }
    }
}

/// Buffers frontier records `[s, n, entries.., rows, row ids..]` per
/// destination.
struct FrontierOut {
    buffers: Vec<Vec<u32>>,
}

impl FrontierOut {
    fn new(k: usize) -> Self {
        FrontierOut { buffers: vec![Vec::new(); k] }
    }

    fn record<'x>(
        &mut self,
        ctx: &Ctx,
        w: usize,
        key: StreamKey,
        dest: usize,
        s: TermId,
        entries: &[TermId],
        rows: impl Iterator<Item = &'x [TermId]>,
    ) -> Result<()> {
        let b = &mut self.buffers[dest];
        b.push(s.0);
        b.push(entries.len() as u32);
        b.extend(entries.iter().map(|t| t.0));
        let count_at = b.len();
        b.push(0);
        let mut n = 0u32;
        for r in rows {
            b.extend(r.iter().map(|t| t.0));
            n += 1;
        }
        b[count_at] = n;
        if b.len() >= ctx.opts.batch_words {
            let payload = std::mem::take(b);
            ctx.send(dest, Kind::FrontierBatch, key, w, payload)?;
        }
        Ok(())
    }

    fn flush(&mut self, ctx: &Ctx, w: usize, key: StreamKey) -> Result<()> {
        for (dest, b) in self.buffers.iter_mut().enumerate() {
            if !b.is_empty() {
                let payload = std::mem::take(b);
                ctx.send(dest, Kind::FrontierBatch, key, w, payload)?;
            }
        }
        Ok(())
    }
}

struct Record {
    entries: Vec<TermId>,
    rows: Rel,
}

fn parse_records(payload: &[u32], width: usize) -> Result<Vec<Record>> {
    let bad = || Error::Transport("malformed frontier batch".into());
    let mut out = Vec::new();
    let mut i = 0;
    while i < payload.len() {
        let n = *payload.get(i + 1).ok_or_else(bad)? as usize;
        let entries = payload.get(i + 2..i + 2 + n).ok_or_else(bad)?.iter().map(|&x| TermId(x)).collect();
        i += 2 + n;
        let mut rows = Rel::new(width);
        i += rows.decode_append(payload.get(i..).ok_or_else(bad)?).map_err(|_| bad())?;
        out.push(Record { entries, rows });
    }
    Ok(out)
}

/// Sorted row indices grouped by the value in `col`.
fn groups_by(rel: &Rel, col: usize) -> Vec<(TermId, Vec<usize>)> {
    let mut idx: Vec<usize> = (0..rel.len()).collect();
    idx.sort_by_key(|&i| rel.row(i)[col]);
    let mut out: Vec<(TermId, Vec<usize>)> = Vec::new();
    for i in idx {
        let v = rel.row(i)[col];
        match out.last_mut() {
            Some((x, list)) if *x == v => list.push(i),
            _ => out.push((v, vec![i])),
        }
    }
    out
}

/// Reach join of a source-side relation sharded by the source variable
/// with a target-side relation sharded by the target variable. Output
/// rows sit at the target's owner, ordered (left, right).
#[allow(clippy::too_many_arguments)]
fn reach_join(
    ctx: &Ctx,
    w: usize,
    pred: usize,
    key: StreamKey,
    src: &Rel,
    scol: usize,
    tgt: &Rel,
    tcol: usize,
    layout: &JoinLayout,
    source_left: bool,
) -> Result<Rel> {
    let ev = CondEval::new(ctx, w, pred)?;
    let targets = Targets::new(tgt, tcol, ev.dag);
    let width = if source_left { layout.out_width(src.width()) } else { layout.out_width(tgt.width()) };
    let mut out = Rel::new(width);
    let emit = |out: &mut Rel, s_row: &[TermId], t_row: &[TermId]| {
        if source_left {
            layout.emit(out, s_row, t_row)
        } else {
            layout.emit(out, t_row, s_row)
        }
    };
    let mut scratch: Option<ReachScratch> = None;
    let mut frontier = FrontierOut::new(ctx.k());
    let mut hits: Vec<TermId> = Vec::new();
    for (s, idxs) in groups_by(src, scol) {
        let search = search_source(ctx, &ev, &mut scratch, w, s);
        hits.clear();
        match ev.modifier {
            Modifier::Opt => hits.extend(search.successors.iter().copied().filter(|&t| ctx.owner(t) == w)),
            _ => {
                if search.explored {
                    targets.reached(ev.dag.unwrap(), scratch.as_ref().unwrap(), &mut hits);
                }
            }
        }
        hits.retain(|&t| t != s);
        if search.zero_length {
            hits.push(s);
        }
        for &t in &hits {
            if let Some(js) = targets.by_value.get(&t) {
                for &j in js {
                    for &i in &idxs {
                        emit(&mut out, src.row(i), tgt.row(j as usize));
                    }
                }
            }
        }
        let mut dests: Vec<(&usize, &Vec<TermId>)> = search.remote.iter().collect();
        dests.sort();
        for (&dest, entries) in dests {
            frontier.record(ctx, w, key, dest, s, entries, idxs.iter().map(|&i| src.row(i)))?;
        }
    }
    frontier.flush(ctx, w, key)?;
    let mut remote_scratch: Option<ReachScratch> = None;
    ctx.close_and_drain(w, key, |payload| {
        for rec in parse_records(&payload, src.width())? {
            hits.clear();
            match (ev.modifier, ev.dag) {
                (Modifier::Opt, _) => hits.extend(rec.entries.iter().copied().filter(|t| targets.by_value.contains_key(t))),
                (_, Some(dag)) => {
                    let sc = remote_scratch.get_or_insert_with(|| dag.scratch());
                    dag.explore(rec.entries.iter().copied(), sc);
                    targets.reached(dag, sc, &mut hits);
                }
                (_, None) => {}
            }
            for &t in &hits {
                for &j in &targets.by_value[&t] {
                    for s_row in rec.rows.rows() {
                        emit(&mut out, s_row, targets.rel.row(j as usize));
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Keeps the rows whose source reaches their target; input sharded by the
/// source column, output sharded by the target column.
fn reach_filter(ctx: &Ctx, w: usize, pred: usize, key: StreamKey, rel: &Rel, scol: usize, tcol: usize) -> Result<Rel> {
    let ev = CondEval::new(ctx, w, pred)?;
    let mut out = Rel::new(rel.width());
    let mut scratch: Option<ReachScratch> = None;
    let mut frontier = FrontierOut::new(ctx.k());
    for (s, idxs) in groups_by(rel, scol) {
        let search = search_source(ctx, &ev, &mut scratch, w, s);
        let mut remote_rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in &idxs {
            let t = rel.row(i)[tcol];
            let o = ctx.owner(t);
            if o == w {
                if accept_local(&ev, &scratch, &search, s, t) {
                    out.push(rel.row(i));
                }
            } else {
                remote_rows.entry(o).or_default().push(i);
            }
        }
        for (dest, rows) in remote_rows {
            if let Some(entries) = search.remote.get(&dest) {
                frontier.record(ctx, w, key, dest, s, entries, rows.iter().map(|&i| rel.row(i)))?;
            }
        }
    }
    frontier.flush(ctx, w, key)?;
    let mut remote_scratch: Option<ReachScratch> = None;
    ctx.close_and_drain(w, key, |payload| {
        for rec in parse_records(&payload, rel.width())? {
            match (ev.modifier, ev.dag) {
                (Modifier::Opt, _) => {
                    for r in rec.rows.rows() {
                        if rec.entries.contains(&r[tcol]) {
                            out.push(r);
                        }
                    }
                }
                (_, Some(dag)) => {
                    let sc = remote_scratch.get_or_insert_with(|| dag.scratch());
                    dag.explore(rec.entries.iter().copied(), sc);
                    for r in rec.rows.rows() {
                        if dag.reached(r[tcol], sc) {
                            out.push(r);
                        }
                    }
                }
                (_, None) => {}
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Applies reach condition `c` of `node` as a filter step, resharding by
/// its source first when needed.
fn filter_step(
    ctx: &Ctx,
    w: usize,
    node: usize,
    c: usize,
    cond: &ReachCond,
    rel: Rel,
    schema: &[VarId],
    shard: &mut Option<VarId>,
) -> Result<Rel> {
    let p = &ctx.graph.preds[cond.pred];
    let (scol, tcol) = (col(schema, p.source), col(schema, p.target));
    let rel = if ctx.k() > 1 && *shard != Some(p.source) {
        ctx.reshard(w, rel, scol, ctx.key(node, cond_reshard_channel(c)))?
    } else {
        rel
    };
    *shard = Some(p.target);
    reach_filter(ctx, w, cond.pred, ctx.key(node, cond_frontier_channel(c)), &rel, scol, tcol)
}

fn scan(ctx: &Ctx, w: usize, lv: &LeafVariant) -> Rel {
    let part = &ctx.cluster.partitions[w];
    let vertex = &ctx.graph.vertices[lv.vertex];
    let mut out = Rel::new(vertex.vars.len());
    match &vertex.kind {
        VertexKind::Pattern { s, p, o, .. } => {
            let konst = |x: &Slot| match x {
                Slot::Const(t) => Some(*t),
                Slot::Var(_) => None,
            };
            let (sc, oc) = (konst(s), konst(o));
            if *p == TermId::ABSENT || sc == Some(TermId::ABSENT) || oc == Some(TermId::ABSENT) {
                return out;
            }
            let perm = lv.permutation.expect("pattern scans use a permutation");
            let Some(pattern) = ScanPattern::new(perm, sc, Some(*p), oc) else { return out };
            let same = s.var().is_some() && s.var() == o.var();
            let mut row = Vec::with_capacity(2);
            for t in part.scan(&pattern) {
                if same && t.s != t.o {
                    continue;
                }
                row.clear();
                if s.var().is_some() {
                    row.push(t.s);
                }
                if o.var().is_some() && !same {
                    row.push(t.o);
                }
                out.push(&row);
            }
        }
        VertexKind::Singleton { value, .. } => {
            if *value != TermId::ABSENT && ctx.cluster.assign.try_owner(*value) == Some(w) {
                out.push(&[*value]);
            }
        }
        VertexKind::Unbound { var, properties } => {
            let mut vs: Vec<TermId> = Vec::new();
            if unbound_spans_all_vertices(ctx, *var) {
                vs.extend(part.subject_group().iter().map(|t| t.s));
                vs.extend(part.object_group().iter().map(|t| t.o));
            }
            for &p in properties.iter().filter(|&&p| p != TermId::ABSENT) {
                let subjects = part.get(crate::index::Permutation::Pso).scan(&[p]);
                vs.extend(subjects.iter().map(|t| t.s));
                let objects = part.get(crate::index::Permutation::Pos).scan(&[p]);
                vs.extend(objects.iter().map(|t| t.o));
            }
            vs.sort_unstable();
            vs.dedup();
            for v in vs {
                out.push(&[v]);
            }
        }
    }
    out
}

/// A variable bound only by reach patterns ranges over every data vertex
/// when one of them can match with zero steps there; otherwise over the
/// vertices of the patterns' properties.
fn unbound_spans_all_vertices(ctx: &Ctx, var: VarId) -> bool {
    ctx.opts.star_scope == StarScope::DataVertices
        && ctx.graph.preds.iter().any(|p| {
            (p.source == var || p.target == var) && matches!(p.modifier, Modifier::Star | Modifier::Opt)
        })
}

/// Where a scan's rows live before any filter moves them.
fn scan_shard(ctx: &Ctx, lv: &LeafVariant) -> Option<VarId> {
    match &ctx.graph.vertices[lv.vertex].kind {
        VertexKind::Pattern { s, o, .. } => match lv.permutation.map(|p| p.group()) {
            Some(Group::Subject) => s.var(),
            _ => o.var(),
        },
        VertexKind::Singleton { var, .. } | VertexKind::Unbound { var, .. } => Some(*var),
    }
}

fn exec_node(ctx: &Ctx, plan: &Plan) -> Result<Vec<Rel>> {
    if plan.id > (u32::MAX >> 8) as usize {
        return Err(Error::Unsupported("plan too large".into()));
    }
    match &plan.node {
        PlanNode::Leaf(lv) => {
            if 3 + 2 * lv.filters.len() >= RESULT_CHANNEL as usize {
                return Err(Error::Unsupported("too many reach conditions on one node".into()));
            }
            ctx.on_workers(|w| {
                let mut rel = scan(ctx, w, lv);
                let mut shard = scan_shard(ctx, lv);
                for (c, f) in lv.filters.iter().enumerate() {
                    rel = filter_step(ctx, w, plan.id, c, f, rel, &plan.schema, &mut shard)?;
                }
                Ok(rel)
            })
        }
        PlanNode::Join { alt, left, right } => {
            if 3 + 2 * alt.reach.len() >= RESULT_CHANNEL as usize {
                return Err(Error::Unsupported("too many reach conditions on one node".into()));
            }
            let (lres, rres) = std::thread::scope(|s| {
                let h = s.spawn(|| exec_node(ctx, left));
                let r = exec_node(ctx, right);
                (h.join().unwrap_or_else(|_| Err(Error::Transport("subplan panicked".into()))), r)
            });
            let (mut lrels, mut rrels) = match (lres, rres) {
                (Ok(l), Ok(r)) => (l, r),
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let inputs: Vec<std::sync::Mutex<Option<(Rel, Rel)>>> =
                lrels.drain(..).zip(rrels.drain(..)).map(|p| std::sync::Mutex::new(Some(p))).collect();
            let layout = JoinLayout::new(&left.schema, &right.schema);
            ctx.on_workers(|w| {
                let (l, r) = inputs[w].lock().unwrap().take().unwrap();
                join_at(ctx, w, plan, alt, left, right, &layout, l, r)
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn join_at(
    ctx: &Ctx,
    w: usize,
    plan: &Plan,
    alt: &crate::optimizer::JoinAlt,
    left: &Plan,
    right: &Plan,
    layout: &JoinLayout,
    l: Rel,
    r: Rel,
) -> Result<Rel> {
    let id = plan.id;
    let mut shard;
    let mut rel = match alt.key {
        Some(key) => {
            let (lk, rk) = (col(&left.schema, key), col(&right.schema, key));
            let l = if alt.marks[0] { ctx.reshard(w, l, lk, ctx.key(id, LEFT_CHANNEL))? } else { l };
            let r = if alt.marks[1] { ctx.reshard(w, r, rk, ctx.key(id, RIGHT_CHANNEL))? } else { r };
            shard = Some(key);
            if alt.method == JoinMethod::Merge {
                let (mut l, mut r) = (l, r);
                if alt.marks[0] {
                    l.sort_on(lk);
                }
                if alt.marks[1] {
                    r.sort_on(rk);
                }
                merge_join(&l, lk, &r, rk, layout)?
            } else {
                hash_join(&l, &r, layout)
            }
        }
        None => {
            let first = alt.reach.first().ok_or(Error::NoPlan)?;
            let p = &ctx.graph.preds[first.pred];
            let (src, src_plan, src_mark, tgt, tgt_plan, tgt_mark) = if alt.source_left {
                (l, left, alt.marks[0], r, right, alt.marks[1])
            } else {
                (r, right, alt.marks[1], l, left, alt.marks[0])
            };
            let (src_ch, tgt_ch) = if alt.source_left { (LEFT_CHANNEL, RIGHT_CHANNEL) } else { (RIGHT_CHANNEL, LEFT_CHANNEL) };
            let scol = col(&src_plan.schema, p.source);
            let tcol = col(&tgt_plan.schema, p.target);
            let src = if src_mark { ctx.reshard(w, src, scol, ctx.key(id, src_ch))? } else { src };
            let tgt = if tgt_mark { ctx.reshard(w, tgt, tcol, ctx.key(id, tgt_ch))? } else { tgt };
            shard = Some(p.target);
            reach_join(ctx, w, first.pred, ctx.key(id, cond_frontier_channel(0)), &src, scol, &tgt, tcol, layout, alt.source_left)?
        }
    };
    let skip = usize::from(alt.key.is_none());
    for (c, cond) in alt.reach.iter().enumerate().skip(skip) {
        rel = filter_step(ctx, w, id, c, cond, rel, &plan.schema, &mut shard)?;
    }
    Ok(rel)
}

/// Runs `plan` on `cluster` and collects the distinct projected rows at
/// the master endpoint.
pub fn execute(
    cluster: Cluster,
    graph: &QueryGraph,
    plan: &Plan,
    transport: &dyn Transport,
    query: u64,
    opts: ExecOptions,
) -> Result<QueryOutput> {
    let k = cluster.k();
    if transport.endpoints() != k + 1 {
        return Err(Error::Config(format!("transport has {} endpoints, need {}", transport.endpoints(), k + 1)));
    }
    let ctx = Ctx { cluster, graph, transport, query, opts };
    let result = run(&ctx, plan);
    if result.is_err() {
        transport.cancel(query);
    }
    let traffic = transport.traffic().take_query(query);
    transport.finish(query);
    let (rows, delivered) = result?;
    let mut audit = Audit { k, reach: Vec::new(), traffic, delivered_rows: delivered };
    for n in plan.nodes() {
        let conds: &[ReachCond] = match &n.node {
            PlanNode::Leaf(l) => &l.filters,
            PlanNode::Join { alt, .. } => &alt.reach,
        };
        for (c, cond) in conds.iter().enumerate() {
            let t = audit.traffic.get(&operator_id(n.id, cond_frontier_channel(c))).copied().unwrap_or_default();
            audit.reach.push(ReachRound {
                node: n.id,
                cond: c,
                pred: cond.pred,
                end_of_streams: t.end_of_streams,
                frontier_batches: t.frontier_batches,
            });
        }
    }
    Ok(QueryOutput { rows, audit })
}

fn run(ctx: &Ctx, plan: &Plan) -> Result<(Vec<Vec<TermId>>, usize)> {
    let rels = exec_node(ctx, plan)?;
    let cols: Vec<usize> = ctx.graph.projection.iter().map(|&v| col(&plan.schema, v)).collect();
    let master = ctx.k();
    let key = ctx.key(plan.id, RESULT_CHANNEL);
    let rels: Vec<std::sync::Mutex<Option<Rel>>> = rels.into_iter().map(|r| std::sync::Mutex::new(Some(r))).collect();
    ctx.on_workers(|w| {
        let rel = rels[w].lock().unwrap().take().unwrap().project(&cols);
        let rows_per_batch = (ctx.opts.batch_words / cols.len().max(1)).max(1);
        let mut batch = Rel::new(cols.len());
        for row in rel.rows() {
            batch.push(row);
            if batch.len() >= rows_per_batch {
                ctx.flush_rel(w, master, key, &mut batch)?;
            }
        }
        if !batch.is_empty() {
            ctx.flush_rel(w, master, key, &mut batch)?;
        }
        ctx.send(master, Kind::EndOfStream, key, w, Vec::new())
    })?;
    let mut all = Rel::new(cols.len());
    let mut open = ctx.k();
    while open > 0 {
        let m = ctx.transport.recv(master, key)?;
        match m.kind {
            Kind::EndOfStream => open -= 1,
            _ => {
                let mut used = 0;
                while used < m.payload.len() {
                    used += all.decode_append(&m.payload[used..])?;
                }
            }
        }
    }
    let delivered = all.len();
    let mut rows: Vec<Vec<TermId>> = all.rows().map(|r| r.to_vec()).collect();
    rows.sort_unstable();
    rows.dedup();
    Ok((rows, delivered))
}

//! Row-major relations of term ids and the local join kernels.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::query::VarId;
use crate::rdf::TermId;

/// Fixed-width rows stored back to back. Width zero is allowed, so the
/// row count is kept separately.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Rel {
    width: usize,
    rows: usize,
    data: Vec<TermId>,
}

impl Rel {
    pub fn new(width: usize) -> Self {
        Rel { width, rows: 0, data: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[TermId] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[TermId]> + '_ {
        (0..self.rows).map(|i| self.row(i))
    }

    pub fn push(&mut self, row: &[TermId]) {
        debug_assert_eq!(row.len(), self.width);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn push_concat(&mut self, a: &[TermId], b: impl IntoIterator<Item = TermId>) {
        self.data.extend_from_slice(a);
        self.data.extend(b);
        self.rows += 1;
        debug_assert_eq!(self.data.len(), self.rows * self.width);
    }

    pub fn append(&mut self, other: Rel) {
        debug_assert_eq!(other.width, self.width);
        if self.rows == 0 {
            *self = other;
            return;
        }
        self.data.extend(other.data);
        self.rows += other.rows;
    }

    /// Encodes as `[rows, ids...]`.
    pub fn encode_into(&self, out: &mut Vec<u32>) {
        out.push(self.rows as u32);
        out.extend(self.data.iter().map(|t| t.0));
    }

    /// Decodes `[rows, ids...]` from the front of `words`, returning the
    /// number of words used.
    pub fn decode_append(&mut self, words: &[u32]) -> Result<usize> {
        let rows = *words.first().ok_or_else(|| Error::Transport("empty tuple batch".into()))? as usize;
        let n = rows * self.width;
        let body = words.get(1..1 + n).ok_or_else(|| Error::Transport("truncated tuple batch".into()))?;
        self.data.extend(body.iter().map(|&w| TermId(w)));
        self.rows += rows;
        Ok(1 + n)
    }

    pub fn is_sorted_on(&self, col: usize) -> bool {
        (1..self.rows).all(|i| self.row(i - 1)[col] <= self.row(i)[col])
    }

    pub fn sort_on(&mut self, col: usize) {
        if self.is_sorted_on(col) {
            return;
        }
        let w = self.width;
        let mut idx: Vec<usize> = (0..self.rows).collect();
        idx.sort_by_key(|&i| self.data[i * w + col]);
        let mut data = Vec::with_capacity(self.data.len());
        for i in idx {
            data.extend_from_slice(&self.data[i * w..(i + 1) * w]);
        }
        self.data = data;
    }

    /// Keeps the given columns, in that order.
    pub fn project(&self, cols: &[usize]) -> Rel {
        let mut out = Rel::new(cols.len());
        for r in self.rows() {
            out.data.extend(cols.iter().map(|&c| r[c]));
            out.rows += 1;
        }
        out
    }
}

/// Column positions of the variables shared by two schemas, and the
/// right-side columns not in the left schema.
#[derive(Clone, Debug)]
pub struct JoinLayout {
    pub left_common: Vec<usize>,
    pub right_common: Vec<usize>,
    pub right_rest: Vec<usize>,
}

impl JoinLayout {
    pub fn new(left: &[VarId], right: &[VarId]) -> Self {
        let mut l = Vec::new();
        let mut r = Vec::new();
        let mut rest = Vec::new();
        for (j, v) in right.iter().enumerate() {
            match left.iter().position(|x| x == v) {
                Some(i) => {
                    l.push(i);
                    r.push(j);
                }
                None => rest.push(j),
            }
        }
        JoinLayout { left_common: l, right_common: r, right_rest: rest }
    }

    pub fn out_width(&self, left_width: usize) -> usize {
        left_width + self.right_rest.len()
    }

    fn matches(&self, a: &[TermId], b: &[TermId]) -> bool {
        self.left_common.iter().zip(&self.right_common).all(|(&i, &j)| a[i] == b[j])
    }

    pub fn emit(&self, out: &mut Rel, a: &[TermId], b: &[TermId]) {
        out.push_concat(a, self.right_rest.iter().map(|&j| b[j]));
    }
}

/// Equality join on every shared variable, building on the right input.
pub fn hash_join(left: &Rel, right: &Rel, layout: &JoinLayout) -> Rel {
    let mut out = Rel::new(layout.out_width(left.width()));
    let mut table: FxHashMap<Vec<TermId>, Vec<usize>> = FxHashMap::default();
    for (j, r) in right.rows().enumerate() {
        table.entry(layout.right_common.iter().map(|&c| r[c]).collect()).or_default().push(j);
    }
    let mut key = Vec::with_capacity(layout.left_common.len());
    for l in left.rows() {
        key.clear();
        key.extend(layout.left_common.iter().map(|&c| l[c]));
        if let Some(js) = table.get(&key) {
            for &j in js {
                layout.emit(&mut out, l, right.row(j));
            }
        }
    }
    out
}

/// Merge join on one key column pair; other shared variables are checked
/// per pair. Both inputs must be sorted on their key column.
pub fn merge_join(left: &Rel, lkey: usize, right: &Rel, rkey: usize, layout: &JoinLayout) -> Result<Rel> {
    if !left.is_sorted_on(lkey) || !right.is_sorted_on(rkey) {
        return Err(Error::SortContract);
    }
    let mut out = Rel::new(layout.out_width(left.width()));
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        let (a, b) = (left.row(i)[lkey], right.row(j)[rkey]);
        if a < b {
            i += 1;
        } else if a > b {
            j += 1;
        } else {
            let i_end = (i..left.len()).find(|&x| left.row(x)[lkey] != a).unwrap_or(left.len());
            let j_end = (j..right.len()).find(|&x| right.row(x)[rkey] != a).unwrap_or(right.len());
            for x in i..i_end {
                for y in j..j_end {
                    let (l, r) = (left.row(x), right.row(y));
                    if layout.matches(l, r) {
                        layout.emit(&mut out, l, r);
                    }
                }
            }
            i = i_end;
            j = j_end;
        }
    }
    Ok(out)
}

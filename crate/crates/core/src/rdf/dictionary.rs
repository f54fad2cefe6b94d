use std::io::{BufRead, Write};

use rustc_hash::FxHashMap;

use super::term::{Term, TermId};
use crate::error::{Error, Result};

/// Bijective mapping between terms and dense ids.
///
/// Ids are handed out from 0 in first-seen order. The dictionary is built
/// once during load and shared read-only afterwards.
#[derive(Clone, Debug, Default)]
pub struct Dictionary {
    terms: Vec<Term>,
    ids: FxHashMap<Term, TermId>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn encode(&mut self, term: Term) -> TermId {
        if let Some(&id) = self.ids.get(&term) {
            return id;
        }
        let id = TermId(u32::try_from(self.terms.len()).expect("dictionary overflow"));
        self.terms.push(term.clone());
        self.ids.insert(term, id);
        id
    }

    pub fn lookup(&self, term: &Term) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn decode(&self, id: TermId) -> Result<&Term> {
        self.terms.get(id.index()).ok_or(Error::UnknownTermId(id.0))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, &Term)> {
        self.terms.iter().enumerate().map(|(i, t)| (TermId(i as u32), t))
    }

    /// Writes `id<TAB>term` lines, the term rendered as in N-Triples so the
    /// brackets or quotes mark its kind.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, term) in self.iter() {
            writeln!(out, "{}\t{}", id.0, term)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut dict = Dictionary::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::Snapshot(format!("dictionary line {}: {reason}", n + 1));
            let (id, rendered) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let id: u32 = id.parse().map_err(|_| bad("bad id"))?;
            let term = Term::parse_rendered(rendered).ok_or_else(|| bad("bad term"))?;
            if id as usize != dict.len() {
                return Err(bad("ids are not contiguous"));
            }
            if dict.encode(term).0 != id {
                return Err(bad("duplicate term"));
            }
        }
        Ok(dict)
    }
}

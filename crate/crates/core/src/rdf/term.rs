use std::fmt;

/// Whether a term is an IRI or a literal. Both share one id space; the kind
/// only matters when a term is written back out.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermKind {
    Iri,
    Literal,
}

/// An RDF constant.
///
/// IRIs are stored without angle brackets. Literals keep their full
/// N-Triples form, quotes and any `@lang` or `^^<datatype>` suffix included,
/// so `"5"^^<xsd:int>` and `"5"` are different terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    kind: TermKind,
    lexical: String,
}

impl Term {
    /// Panics on an empty lexical form.
    pub fn new(kind: TermKind, lexical: impl Into<String>) -> Self {
        let lexical = lexical.into();
        assert!(!lexical.is_empty(), "term lexical form must be non-empty");
        Term { kind, lexical }
    }

    pub fn iri(lexical: impl Into<String>) -> Self {
        Term::new(TermKind::Iri, lexical)
    }

    /// Builds a literal from its quoted form, e.g. `"USA"` or `"chat"@en`.
    pub fn literal(quoted: impl Into<String>) -> Self {
        Term::new(TermKind::Literal, quoted)
    }

    /// Builds a plain literal from unquoted text.
    pub fn plain_literal(text: &str) -> Self {
        Term::new(TermKind::Literal, format!("\"{text}\""))
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn is_iri(&self) -> bool {
        self.kind == TermKind::Iri
    }

    /// Parses the N-Triples rendering produced by `Display`.
    pub fn parse_rendered(text: &str) -> Option<Term> {
        if let Some(inner) = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
            if inner.is_empty() {
                return None;
            }
            Some(Term::iri(inner))
        } else if text.starts_with('"') && text.len() >= 2 {
            Some(Term::literal(text))
        } else {
            None
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TermKind::Iri => write!(f, "<{}>", self.lexical),
            TermKind::Literal => f.write_str(&self.lexical),
        }
    }
}

/// Dense dictionary id of a term.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TermId(pub u32);

impl TermId {
    /// Never issued by a dictionary; used for query constants that do not
    /// occur in the data so that they match nothing.
    pub const ABSENT: TermId = TermId(u32::MAX);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A dictionary-encoded triple. Field order gives the SPO sort order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodedTriple {
    pub s: TermId,
    pub p: TermId,
    pub o: TermId,
}

impl EncodedTriple {
    pub fn new(s: TermId, p: TermId, o: TermId) -> Self {
        EncodedTriple { s, p, o }
    }

    pub fn from_raw(s: u32, p: u32, o: u32) -> Self {
        EncodedTriple { s: TermId(s), p: TermId(p), o: TermId(o) }
    }
}

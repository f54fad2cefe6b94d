//! Query frontend: parsing, path rewriting and query-graph construction.

mod graph;
mod parser;
mod rewrite;

use std::fmt;

pub use graph::{EquiEdge, QVertex, QueryGraph, ReachEdge, ReachPred, Slot, VarId, VarInfo, VertexKind};
pub use parser::parse_query;
pub use rewrite::rewrite_paths;

use crate::rdf::Term;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Modifier {
    None,
    /// `*`: zero or more steps.
    Star,
    /// `+`: one or more steps, source and target distinct.
    Plus,
    /// `?`: zero or one step.
    Opt,
}

impl Modifier {
    pub fn is_reach(self) -> bool {
        self != Modifier::None
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Modifier::None => "",
            Modifier::Star => "*",
            Modifier::Plus => "+",
            Modifier::Opt => "?",
        }
    }
}

/// Which vertices a zero-length `*` or `?` path may bind.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum StarScope {
    /// Any vertex of the data graph.
    #[default]
    DataVertices,
    /// Only vertices with an edge of the path's property.
    PropertyVertices,
}

/// One property of a path with its modifier and direction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathAtom {
    pub property: Term,
    pub modifier: Modifier,
    pub inverted: bool,
}

impl PathAtom {
    pub fn new(property: Term, modifier: Modifier, inverted: bool) -> Self {
        PathAtom { property, modifier, inverted }
    }
}

impl fmt::Display for PathAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            f.write_str("^")?;
        }
        write!(f, "{}{}", self.property, self.modifier.symbol())
    }
}

/// Variables introduced by the engine never collide with user variables
/// because identity includes the kind.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    User,
    /// Chains the atoms of a rewritten path.
    Fresh,
    /// Carries a constant endpoint of a reach pattern.
    Hidden,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub kind: VarKind,
    pub name: String,
}

impl Var {
    pub fn user(name: impl Into<String>) -> Self {
        Var { kind: VarKind::User, name: name.into() }
    }

    pub fn fresh(n: usize) -> Self {
        Var { kind: VarKind::Fresh, name: format!("_pp{n}") }
    }

    pub fn hidden(n: usize) -> Self {
        Var { kind: VarKind::Hidden, name: format!("_c{n}") }
    }

    pub fn is_user(&self) -> bool {
        self.kind == VarKind::User
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Var(Var),
    Const(Term),
}

impl Node {
    pub fn var(&self) -> Option<&Var> {
        match self {
            Node::Var(v) => Some(v),
            Node::Const(_) => None,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Var(v) => v.fmt(f),
            Node::Const(t) => t.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Predicate {
    /// Rejected later: predicates must be constants.
    Var(String),
    Path(Vec<PathAtom>),
}

/// A parsed pattern whose predicate may still be a multi-atom path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPattern {
    pub subject: Node,
    pub predicate: Predicate,
    pub object: Node,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedQuery {
    /// `None` for `SELECT *`.
    pub select: Option<Vec<String>>,
    pub patterns: Vec<RawPattern>,
}

/// A pattern with a single atom; inversions are already resolved.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: Node,
    pub atom: PathAtom,
    pub object: Node,
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.atom, self.object)
    }
}

/// A query after path rewriting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub patterns: Vec<TriplePattern>,
    /// User variables in output order.
    pub projection: Vec<Var>,
}

impl Query {
    /// Parses and rewrites in one step.
    pub fn parse(text: &str) -> crate::Result<Self> {
        rewrite_paths(parse_query(text)?)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT")?;
        for v in &self.projection {
            write!(f, " {v}")?;
        }
        f.write_str(" WHERE {\n")?;
        for p in &self.patterns {
            writeln!(f, "  {p} .")?;
        }
        f.write_str("}")
    }
}

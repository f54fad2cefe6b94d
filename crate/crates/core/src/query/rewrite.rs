//! Expansion of `/`-paths into single-atom patterns.

use super::{Node, ParsedQuery, Predicate, Query, TriplePattern, Var};
use crate::error::{Error, Result};

/// Splits every `/`-concatenation of n atoms into n patterns chained by
/// n-1 fresh variables, and resolves `^` by swapping endpoints.
pub fn rewrite_paths(parsed: ParsedQuery) -> Result<Query> {
    let mut patterns = Vec::new();
    let mut fresh = 0usize;
    for raw in parsed.patterns {
        let atoms = match raw.predicate {
            Predicate::Var(_) => return Err(Error::VariablePredicate),
            Predicate::Path(a) => a,
        };
        let n = atoms.len();
        let mut left = raw.subject;
        for (i, mut atom) in atoms.into_iter().enumerate() {
            let right = if i + 1 == n {
                raw.object.clone()
            } else {
                let v = Node::Var(Var::fresh(fresh));
                fresh += 1;
                v
            };
            let (subject, object) = if atom.inverted { (right.clone(), left) } else { (left, right.clone()) };
            atom.inverted = false;
            patterns.push(TriplePattern { subject, atom, object });
            left = right;
        }
    }

    let mut seen: Vec<Var> = Vec::new();
    for p in &patterns {
        for v in [p.subject.var(), p.object.var()].into_iter().flatten() {
            if v.is_user() && !seen.contains(v) {
                seen.push(v.clone());
            }
        }
    }
    let projection = match parsed.select {
        None => seen,
        Some(names) => {
            let mut out = Vec::new();
            for name in names {
                let v = Var::user(name);
                if !seen.contains(&v) {
                    return Err(Error::Unsupported(format!("projected variable {v} does not occur in the pattern")));
                }
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            out
        }
    };
    Ok(Query { patterns, projection })
}

#[cfg(test)]
mod tests {
    use super::super::{parse_query, Modifier, PathAtom};
    use super::*;
    use crate::rdf::Term;

    fn v(name: &str) -> Node {
        Node::Var(Var::user(name))
    }

    fn f(n: usize) -> Node {
        Node::Var(Var::fresh(n))
    }

    fn tp(s: Node, p: &str, m: Modifier, o: Node) -> TriplePattern {
        TriplePattern { subject: s, atom: PathAtom::new(Term::iri(p), m, false), object: o }
    }

    #[test]
    fn chained_path() {
        let q = Query::parse(r#"SELECT * WHERE { ?p workedAt/locIn*/hasLabel "USA" }"#).unwrap();
        assert_eq!(
            q.patterns,
            vec![
                tp(v("p"), "workedAt", Modifier::None, f(0)),
                tp(f(0), "locIn", Modifier::Star, f(1)),
                tp(f(1), "hasLabel", Modifier::None, Node::Const(Term::literal("\"USA\""))),
            ]
        );
        assert_eq!(q.projection, vec![Var::user("p")]);
    }

    #[test]
    fn single_atom_is_unchanged() {
        let q = Query::parse("SELECT * WHERE { ?x p ?y }").unwrap();
        assert_eq!(q.patterns, vec![tp(v("x"), "p", Modifier::None, v("y"))]);
    }

    #[test]
    fn inverse_then_chain() {
        let q = Query::parse("SELECT * WHERE { ?x ^p/q ?y }").unwrap();
        assert_eq!(q.patterns, vec![tp(f(0), "p", Modifier::None, v("x")), tp(f(0), "q", Modifier::None, v("y"))]);
        assert_eq!(q.projection, vec![Var::user("x"), Var::user("y")]);
    }

    #[test]
    fn fresh_names_do_not_collide_with_user_names() {
        let q = Query::parse("SELECT * WHERE { ?_pp0 p/q ?y }").unwrap();
        assert_ne!(q.patterns[0].subject, q.patterns[0].object);
        assert_eq!(q.projection.len(), 2);
    }

    #[test]
    fn variable_predicate_and_bad_projection() {
        assert!(matches!(rewrite_paths(parse_query("SELECT * WHERE { ?x ?p ?y }").unwrap()), Err(Error::VariablePredicate)));
        assert!(matches!(Query::parse("SELECT ?z WHERE { ?x p ?y }"), Err(Error::Unsupported(_))));
    }
}

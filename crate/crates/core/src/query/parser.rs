//! Recursive-descent parser for `SELECT ... WHERE { ... }` queries whose
//! patterns may carry property paths built from `/`, `^`, `*`, `+`, `?`.

use std::collections::HashMap;

use super::{Modifier, Node, ParsedQuery, PathAtom, Predicate, RawPattern, Var};
use crate::error::{Error, Result};
use crate::rdf::{Term, RDF_TYPE};

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "FILTER", "UNION", "OPTIONAL", "MINUS", "BIND", "VALUES", "GRAPH", "SERVICE", "GROUP", "ORDER", "LIMIT",
    "OFFSET", "HAVING", "COUNT", "SUM", "MIN", "MAX", "AVG", "SAMPLE", "ASK", "CONSTRUCT", "DESCRIBE",
    "REDUCED", "FROM", "NOT", "EXISTS",
];

pub fn parse_query(text: &str) -> Result<ParsedQuery> {
    let mut p = Parser { src: text, pos: 0, prefixes: HashMap::new() };
    p.query()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    prefixes: HashMap<String, String>,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.pos, message: message.into() })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek2(&self) -> Option<char> {
        self.rest().chars().nth(1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    /// The upcoming bare word, without consuming it.
    fn word(&self) -> &'a str {
        let r = self.rest();
        let end = r.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(r.len());
        &r[..end]
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let w = self.word();
        if w.eq_ignore_ascii_case(kw) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn reject_unsupported(&mut self) -> Result<()> {
        self.skip_ws();
        let w = self.word();
        if UNSUPPORTED_KEYWORDS.iter().any(|k| w.eq_ignore_ascii_case(k)) {
            return Err(Error::Unsupported(w.to_ascii_uppercase()));
        }
        Ok(())
    }

    fn query(&mut self) -> Result<ParsedQuery> {
        loop {
            self.skip_ws();
            if self.rest().starts_with("@prefix") {
                self.pos += "@prefix".len();
                self.prefix_decl()?;
                self.eat('.');
            } else if self.keyword("PREFIX") {
                self.prefix_decl()?;
            } else if self.keyword("BASE") {
                return Err(Error::Unsupported("BASE".into()));
            } else {
                break;
            }
        }
        self.reject_unsupported()?;
        if !self.keyword("SELECT") {
            return self.err("expected SELECT");
        }
        self.keyword("DISTINCT");
        self.reject_unsupported()?;
        let select = if self.eat('*') {
            None
        } else {
            let mut vars = Vec::new();
            loop {
                self.skip_ws();
                match self.peek() {
                    Some('?') | Some('$') => vars.push(self.var_name()?),
                    Some('(') => return Err(Error::Unsupported("projection expressions".into())),
                    _ => break,
                }
            }
            if vars.is_empty() {
                return self.err("expected '*' or variables after SELECT");
            }
            Some(vars)
        };
        self.reject_unsupported()?;
        self.keyword("WHERE");
        self.expect('{')?;
        let patterns = self.group()?;
        self.expect('}')?;
        self.reject_unsupported()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return self.err("unexpected input after query");
        }
        Ok(ParsedQuery { select, patterns })
    }

    fn prefix_decl(&mut self) -> Result<()> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !(is_name_char(c) || c == '.') {
                return self.err("bad prefix name");
            }
            self.bump();
        }
        let name = self.src[start..self.pos].to_string();
        if !self.eat(':') {
            return self.err("expected ':' in prefix declaration");
        }
        self.skip_ws();
        let iri = self.iri_ref()?;
        self.prefixes.insert(name, iri);
        Ok(())
    }

    fn group(&mut self) -> Result<Vec<RawPattern>> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('}') | None => return Ok(out),
                Some('{') => return Err(Error::Unsupported("nested group patterns".into())),
                _ => {}
            }
            self.reject_unsupported()?;
            out.push(self.pattern()?);
            self.skip_ws();
            match self.peek() {
                Some('.') => {
                    self.bump();
                }
                Some('}') => {}
                Some(';') | Some(',') => return Err(Error::Unsupported("predicate/object lists".into())),
                _ => {
                    self.reject_unsupported()?;
                    return self.err("expected '.' or '}' after triple pattern");
                }
            }
        }
    }

    fn pattern(&mut self) -> Result<RawPattern> {
        let subject = self.node()?;
        self.skip_ws();
        let predicate = match self.peek() {
            Some('?') | Some('$') => Predicate::Var(self.var_name()?),
            _ => Predicate::Path(self.path()?),
        };
        let object = self.node()?;
        Ok(RawPattern { subject, predicate, object })
    }

    fn path(&mut self) -> Result<Vec<PathAtom>> {
        let mut atoms = vec![self.atom()?];
        while self.eat('/') {
            atoms.push(self.atom()?);
        }
        self.skip_ws();
        match self.peek() {
            Some('|') => Err(Error::Unsupported("path alternation".into())),
            _ => Ok(atoms),
        }
    }

    fn atom(&mut self) -> Result<PathAtom> {
        self.skip_ws();
        let inverted = if self.peek() == Some('^') {
            self.bump();
            self.skip_ws();
            true
        } else {
            false
        };
        match self.peek() {
            Some('(') => return Err(Error::Unsupported("grouped paths".into())),
            Some('!') => return Err(Error::Unsupported("negated property sets".into())),
            _ => {}
        }
        let property = if self.peek() == Some('a') && !self.peek2().is_some_and(|c| is_name_char(c) || c == ':') {
            self.bump();
            Term::iri(RDF_TYPE)
        } else {
            self.iri()?
        };
        let modifier = match self.peek() {
            Some('*') => Modifier::Star,
            Some('+') => Modifier::Plus,
            Some('?') if !self.peek2().is_some_and(is_name_char) => Modifier::Opt,
            _ => Modifier::None,
        };
        if modifier != Modifier::None {
            self.bump();
        }
        Ok(PathAtom::new(property, modifier, inverted))
    }

    fn node(&mut self) -> Result<Node> {
        self.skip_ws();
        match self.peek() {
            Some('?') | Some('$') => Ok(Node::Var(Var::user(self.var_name()?))),
            Some('"') | Some('\'') => Ok(Node::Const(self.literal()?)),
            Some('_') if self.peek2() == Some(':') => Err(Error::Unsupported("blank nodes".into())),
            Some('[') => Err(Error::Unsupported("blank nodes".into())),
            Some(_) => Ok(Node::Const(self.iri()?)),
            None => self.err("unexpected end of query"),
        }
    }

    fn var_name(&mut self) -> Result<String> {
        self.bump();
        let start = self.pos;
        while self.peek().is_some_and(is_name_char) {
            self.bump();
        }
        if start == self.pos {
            return self.err("empty variable name");
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn iri_ref(&mut self) -> Result<String> {
        if self.peek() != Some('<') {
            return self.err("expected '<'");
        }
        self.bump();
        let start = self.pos;
        loop {
            match self.bump() {
                Some('>') => break,
                Some(c) if c.is_whitespace() || c == '<' => return self.err("bad character in IRI"),
                Some(_) => {}
                None => return self.err("unterminated IRI"),
            }
        }
        let iri = &self.src[start..self.pos - 1];
        if iri.is_empty() {
            return self.err("empty IRI");
        }
        Ok(iri.to_string())
    }

    /// `<iri>`, `prefix:local` or a bare identifier taken as an IRI.
    fn iri(&mut self) -> Result<Term> {
        self.skip_ws();
        if self.peek() == Some('<') {
            return Ok(Term::iri(self.iri_ref()?));
        }
        let start = self.pos;
        let mut text = String::new();
        let mut prefix: Option<String> = None;
        while let Some(c) = self.peek() {
            if c == '\\' {
                self.bump();
                match self.bump() {
                    Some(e) if !e.is_whitespace() => text.push(e),
                    _ => return self.err("bad escape in name"),
                }
            } else if c == ':' && prefix.is_none() {
                self.bump();
                prefix = Some(std::mem::take(&mut text));
            } else if is_name_char(c) || c == ':' || c == '%' {
                self.bump();
                text.push(c);
            } else if c == '.' && self.peek2().is_some_and(|d| is_name_char(d) || d == ':' || d == '\\') {
                // dots inside names; a trailing dot ends the pattern
                self.bump();
                text.push(c);
            } else {
                break;
            }
        }
        if self.pos == start {
            return self.err("expected IRI, prefixed name or variable");
        }
        match prefix {
            Some(pre) => match self.prefixes.get(&pre) {
                Some(ns) => Ok(Term::iri(format!("{ns}{text}"))),
                None => {
                    self.pos = start;
                    self.err(format!("undeclared prefix '{pre}:'"))
                }
            },
            None => Ok(Term::iri(text)),
        }
    }

    /// A literal in its N-Triples form, quotes and tags included.
    fn literal(&mut self) -> Result<Term> {
        let quote = self.bump().expect("quote");
        let mut body = String::new();
        loop {
            match self.bump() {
                Some('\\') => {
                    let e = self.bump().ok_or(()).or_else(|_| self.err("unterminated literal"))?;
                    if e == '\'' {
                        body.push('\'');
                    } else {
                        body.push('\\');
                        body.push(e);
                    }
                }
                Some(c) if c == quote => break,
                Some('"') => body.push_str("\\\""),
                Some('\n') | None => return self.err("unterminated literal"),
                Some(c) => body.push(c),
            }
        }
        let mut lex = format!("\"{body}\"");
        if self.peek() == Some('@') {
            self.bump();
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '-') {
                self.bump();
            }
            if start == self.pos {
                return self.err("empty language tag");
            }
            lex.push('@');
            lex.push_str(&self.src[start..self.pos]);
        } else if self.rest().starts_with("^^") {
            self.pos += 2;
            let dt = self.iri()?;
            lex.push_str(&format!("^^<{}>", dt.lexical()));
        }
        Ok(Term::literal(lex))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(q: &ParsedQuery, i: usize) -> &[PathAtom] {
        match &q.patterns[i].predicate {
            Predicate::Path(a) => a,
            Predicate::Var(_) => panic!("variable predicate"),
        }
    }

    #[test]
    fn three_atom_path() {
        let q = parse_query(r#"SELECT ?person WHERE { ?person workedAt/locIn*/hasLabel "USA" }"#).unwrap();
        assert_eq!(q.select, Some(vec!["person".to_string()]));
        let a = atoms(&q, 0);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0], PathAtom::new(Term::iri("workedAt"), Modifier::None, false));
        assert_eq!(a[1], PathAtom::new(Term::iri("locIn"), Modifier::Star, false));
        assert_eq!(q.patterns[0].object, Node::Const(Term::literal("\"USA\"")));
    }

    #[test]
    fn inverse_atom() {
        let q = parse_query("SELECT * WHERE { ?x ^p ?y }").unwrap();
        assert_eq!(atoms(&q, 0)[0], PathAtom::new(Term::iri("p"), Modifier::None, true));
    }

    #[test]
    fn optional_modifier_versus_variable() {
        let q = parse_query("SELECT * WHERE { ?x p? ?y . ?y q ?z }").unwrap();
        assert_eq!(atoms(&q, 0)[0].modifier, Modifier::Opt);
        assert_eq!(atoms(&q, 1)[0].modifier, Modifier::None);
        let q = parse_query("SELECT * WHERE { ?x <p>+ ?y }").unwrap();
        assert_eq!(atoms(&q, 0)[0].modifier, Modifier::Plus);
    }

    #[test]
    fn unsupported_features() {
        for text in [
            "SELECT * WHERE { ?x p ?y FILTER(?x = ?y) }",
            "SELECT * WHERE { { ?x p ?y } UNION { ?x q ?y } }",
            "SELECT * WHERE { ?x p ?y OPTIONAL { ?y q ?z } }",
            "SELECT (COUNT(?x) AS ?n) WHERE { ?x p ?y }",
            "SELECT * WHERE { ?x p|q ?y }",
            "SELECT * WHERE { ?x p ?y } LIMIT 10",
        ] {
            assert!(matches!(parse_query(text), Err(Error::Unsupported(_))), "{text}");
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_query("SELECT * WHERE { ?x p }") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 22),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_query("SELECT * WHERE { ?x foo:p ?y }"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn prefixes_and_rdf_type() {
        let q = parse_query(
            "@prefix ub: <http://u#>\nPREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>\n\
             SELECT * WHERE { ?x rdf:type ub:ResearchGroup . ?x a ub:U . ?x ub:subOrganizationOf* ?y. }",
        )
        .unwrap();
        assert_eq!(q.patterns.len(), 3);
        assert_eq!(atoms(&q, 0)[0].property, Term::iri(RDF_TYPE));
        assert_eq!(atoms(&q, 1)[0].property, Term::iri(RDF_TYPE));
        assert_eq!(q.patterns[0].object, Node::Const(Term::iri("http://u#ResearchGroup")));
        assert_eq!(atoms(&q, 2)[0], PathAtom::new(Term::iri("http://u#subOrganizationOf"), Modifier::Star, false));
    }

    #[test]
    fn dotted_and_escaped_local_names() {
        let q = parse_query(
            "PREFIX fb: <http://fb/> PREFIX wiki: <http://w/> SELECT * WHERE { \
             ?p fb:people.person.place_of_birth ?c. ?s fb:topic wiki:North_Auburn\\,_California . }",
        )
        .unwrap();
        assert_eq!(atoms(&q, 0)[0].property, Term::iri("http://fb/people.person.place_of_birth"));
        assert_eq!(q.patterns[1].object, Node::Const(Term::iri("http://w/North_Auburn,_California")));
    }

    #[test]
    fn literal_forms() {
        let q = parse_query(r#"SELECT * WHERE { ?x p "chat"@en . ?x q "5"^^<http://int> . ?x r 'it\'s' }"#).unwrap();
        assert_eq!(q.patterns[0].object, Node::Const(Term::literal("\"chat\"@en")));
        assert_eq!(q.patterns[1].object, Node::Const(Term::literal("\"5\"^^<http://int>")));
        assert_eq!(q.patterns[2].object, Node::Const(Term::literal("\"it's\"")));
    }

    #[test]
    fn variable_predicate_is_parsed() {
        let q = parse_query("SELECT * WHERE { ?x ?p ?y }").unwrap();
        assert_eq!(q.patterns[0].predicate, Predicate::Var("p".into()));
    }
}

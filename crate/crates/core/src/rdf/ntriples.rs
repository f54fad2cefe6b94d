//! Line-oriented N-Triples reader.
//!
//! Supports the subset found in plain triple dumps: IRI subjects and
//! predicates, IRI or literal objects, `#` comments and blank lines. Blank
//! nodes are rejected.

use std::io::BufRead;

use super::dictionary::Dictionary;
use super::term::{EncodedTriple, Term};
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and report them at the end.
    Lenient,
}

/// Outcome of a lenient or strict load.
#[derive(Debug, Default)]
pub struct Loaded {
    pub triples: Vec<EncodedTriple>,
    pub skipped: Vec<Error>,
}

/// Parses one line. Returns `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str) -> std::result::Result<Option<(Term, Term, Term)>, String> {
    let mut cur = Cursor { text: line, pos: 0 };
    cur.skip_ws();
    if cur.at_end() || cur.peek() == Some('#') {
        return Ok(None);
    }
    let s = cur.iri().map_err(|e| format!("subject: {e}"))?;
    cur.skip_ws();
    let p = cur.iri().map_err(|e| format!("predicate: {e}"))?;
    cur.skip_ws();
    let o = match cur.peek() {
        Some('<') => cur.iri(),
        Some('"') => cur.literal(),
        Some('_') => Err("blank nodes are not supported".to_string()),
        Some(_) => Err("expected IRI or literal".to_string()),
        None => Err("missing object".to_string()),
    }
    .map_err(|e| format!("object: {e}"))?;
    cur.skip_ws();
    if cur.peek() != Some('.') {
        return Err("missing terminating '.'".into());
    }
    cur.pos += 1;
    cur.skip_ws();
    if !cur.at_end() && cur.peek() != Some('#') {
        return Err("trailing characters after '.'".into());
    }
    Ok(Some((s, p, o)))
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == ' ' || c == '\t' || c == '\r' {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn iri(&mut self) -> std::result::Result<Term, String> {
        if self.peek() != Some('<') {
            return Err("expected '<'".into());
        }
        let rest = &self.text[self.pos + 1..];
        let end = rest.find('>').ok_or("unterminated IRI")?;
        let body = &rest[..end];
        if body.is_empty() {
            return Err("empty IRI".into());
        }
        if body.contains(|c: char| c.is_whitespace()) {
            return Err("whitespace inside IRI".into());
        }
        self.pos += end + 2;
        Ok(Term::iri(body))
    }

    fn literal(&mut self) -> std::result::Result<Term, String> {
        let start = self.pos;
        let bytes = self.text.as_bytes();
        let mut i = self.pos + 1;
        loop {
            match bytes.get(i) {
                None => return Err("unterminated literal".into()),
                Some(b'\\') => i += 2,
                Some(b'"') => break,
                Some(_) => i += 1,
            }
        }
        i += 1;
        match bytes.get(i) {
            Some(b'@') => {
                i += 1;
                let tag_start = i;
                while bytes.get(i).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'-') {
                    i += 1;
                }
                if i == tag_start {
                    return Err("empty language tag".into());
                }
            }
            Some(b'^') => {
                if bytes.get(i + 1) != Some(&b'^') {
                    return Err("expected '^^'".into());
                }
                self.pos = i + 2;
                self.iri()?;
                i = self.pos;
            }
            _ => {}
        }
        self.pos = i;
        Ok(Term::literal(&self.text[start..i]))
    }
}

/// Iterator over the triples of a line-oriented source, encoding terms as it
/// goes. Each item carries its 1-based line number on error.
pub struct NTriplesReader<'d, R> {
    lines: std::io::Lines<R>,
    dict: &'d mut Dictionary,
    line_no: usize,
}

impl<'d, R: BufRead> NTriplesReader<'d, R> {
    pub fn new(input: R, dict: &'d mut Dictionary) -> Self {
        NTriplesReader { lines: input.lines(), dict, line_no: 0 }
    }
}

impl<R: BufRead> Iterator for NTriplesReader<'_, R> {
    type Item = Result<EncodedTriple>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            match parse_line(&line) {
                Ok(None) => continue,
                Ok(Some((s, p, o))) => {
                    let t = EncodedTriple::new(
                        self.dict.encode(s),
                        self.dict.encode(p),
                        self.dict.encode(o),
                    );
                    return Some(Ok(t));
                }
                Err(reason) => {
                    return Some(Err(Error::MalformedTriple { line: self.line_no, reason }))
                }
            }
        }
    }
}

/// Reads a whole source. Duplicate lines produce duplicate triples.
pub fn load<R: BufRead>(input: R, dict: &mut Dictionary, mode: ParseMode) -> Result<Loaded> {
    let mut loaded = Loaded::default();
    for item in NTriplesReader::new(input, dict) {
        match item {
            Ok(t) => loaded.triples.push(t),
            Err(e @ Error::MalformedTriple { .. }) if mode == ParseMode::Lenient => {
                log::warn!("{e}");
                loaded.skipped.push(e);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(loaded)
}

/// Renders triples back to N-Triples text.
pub fn write<W: std::io::Write>(
    mut out: W,
    dict: &Dictionary,
    triples: &[EncodedTriple],
) -> Result<()> {
    for t in triples {
        writeln!(
            out,
            "{} {} {} .",
            dict.decode(t.s)?,
            dict.decode(t.p)?,
            dict.decode(t.o)?
        )?;
    }
    Ok(())
}

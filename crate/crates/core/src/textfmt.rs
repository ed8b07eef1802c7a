//! Line-oriented text formats: closure traces, strong-edge files and
//! presentation files. Blank lines and lines starting with `#` are skipped.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::connectivity::{StrongEdge, Witness};
use crate::deltagraph::{Edge, TraceStep};
use crate::error::{Error, Result};
use crate::gf::{make_field, Field};
use crate::matspace::Mat;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} {tok:?}")))
}

fn keyword(line: usize, tok: Option<&str>, want: &str) -> Result<()> {
    match tok {
        Some(t) if t == want => Ok(()),
        other => Err(Error::parse(line, format!("expected `{want}`, found {other:?}"))),
    }
}

fn end(line: usize, mut rest: std::str::SplitWhitespace<'_>) -> Result<()> {
    match rest.next() {
        None => Ok(()),
        Some(t) => Err(Error::parse(line, format!("trailing token {t:?}"))),
    }
}

/// One `new <x> <y> via <x'> <y'>` line per step.
pub fn write_trace(trace: &[TraceStep]) -> String {
    let mut s = String::with_capacity(trace.len() * 32);
    for st in trace {
        let _ = writeln!(s, "new {} {} via {} {}", st.new.x, st.new.y, st.via.x, st.via.y);
    }
    s
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceStep>> {
    let mut out = Vec::new();
    for (ln, line) in content_lines(text) {
        let mut t = line.split_whitespace();
        keyword(ln, t.next(), "new")?;
        let new = Edge {
            x: num(ln, t.next(), "x id")?,
            y: num(ln, t.next(), "y id")?,
        };
        keyword(ln, t.next(), "via")?;
        let via = Edge {
            x: num(ln, t.next(), "x id")?,
            y: num(ln, t.next(), "y id")?,
        };
        end(ln, t)?;
        out.push(TraceStep { new, via });
    }
    Ok(out)
}

/// Strong edges grouped by value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeBlock {
    pub value: Mat,
    pub edges: Vec<StrongEdge>,
}

/// `value <matrix>` followed by `edge <ya> <xa> <yb> <xb> row|col <w>` lines.
pub fn write_edges(blocks: &[EdgeBlock]) -> String {
    let mut s = String::new();
    for b in blocks {
        let _ = writeln!(s, "value {}", b.value.to_text());
        for e in &b.edges {
            let (kind, w) = match e.witness {
                Witness::Row(y1) => ("row", y1),
                Witness::Col(x1) => ("col", x1),
            };
            let _ = writeln!(s, "edge {} {} {} {} {kind} {w}", e.a.0, e.a.1, e.b.0, e.b.1);
        }
    }
    s
}

pub fn parse_edges(field: &Field, text: &str) -> Result<Vec<EdgeBlock>> {
    let mut out: Vec<EdgeBlock> = Vec::new();
    for (ln, line) in content_lines(text) {
        if let Some(rest) = line.strip_prefix("value ") {
            let value = Mat::parse_text(field, rest).map_err(|e| Error::parse(ln, e.to_string()))?;
            out.push(EdgeBlock {
                value,
                edges: Vec::new(),
            });
            continue;
        }
        let mut t = line.split_whitespace();
        keyword(ln, t.next(), "edge")?;
        let block = out
            .last_mut()
            .ok_or_else(|| Error::parse(ln, "edge before any `value` line"))?;
        let a = (num(ln, t.next(), "row")?, num(ln, t.next(), "column")?);
        let b = (num(ln, t.next(), "row")?, num(ln, t.next(), "column")?);
        let witness = match t.next() {
            Some("row") => Witness::Row(num(ln, t.next(), "witness row")?),
            Some("col") => Witness::Col(num(ln, t.next(), "witness column")?),
            other => return Err(Error::parse(ln, format!("expected `row` or `col`, found {other:?}"))),
        };
        end(ln, t)?;
        block.edges.push(StrongEdge { a, b, witness });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenLine {
    pub id: u64,
    pub x: u32,
    pub y: u32,
    pub value: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `f = 1`.
    Unit(u64),
    /// `f_1^{-1} f_2 = f_3^{-1} f_4`; `f_1, f_2` share a column label, as
    /// do `f_3, f_4`.
    Square([u64; 4]),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresentationFile {
    pub n: usize,
    pub r: usize,
    pub q: u32,
    pub gens: Vec<GenLine>,
    pub rels: Vec<Relation>,
}

impl PresentationFile {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p {} {} {}", self.n, self.r, self.q);
        for g in &self.gens {
            let _ = writeln!(s, "gen {} {} {} {}", g.id, g.x, g.y, g.value.to_text());
        }
        for rel in &self.rels {
            match rel {
                Relation::Unit(id) => {
                    let _ = writeln!(s, "rel unit {id}");
                }
                Relation::Square([a, b, c, d]) => {
                    let _ = writeln!(s, "rel square {a} {b} {c} {d}");
                }
            }
        }
        s
    }

    /// Parses and checks that generator ids are distinct and every relation
    /// cites declared generators. The field comes from `q` with its
    /// built-in modulus.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, head) = lines.next().ok_or_else(|| Error::parse(1, "empty presentation"))?;
        let mut t = head.split_whitespace();
        keyword(ln, t.next(), "p")?;
        let n: usize = num(ln, t.next(), "n")?;
        let r: usize = num(ln, t.next(), "r")?;
        let q: u32 = num(ln, t.next(), "q")?;
        end(ln, t)?;
        let field = make_field(q, None).map_err(|e| Error::parse(ln, e.to_string()))?;
        let mut gens = Vec::new();
        let mut rels = Vec::new();
        let mut ids = HashSet::new();
        for (ln, line) in lines {
            let mut t = line.split_whitespace();
            match t.next() {
                Some("gen") => {
                    if !rels.is_empty() {
                        return Err(Error::parse(ln, "generator after relations"));
                    }
                    let id: u64 = num(ln, t.next(), "generator id")?;
                    let x = num(ln, t.next(), "x id")?;
                    let y = num(ln, t.next(), "y id")?;
                    let rest = t.collect::<Vec<_>>().join(" ");
                    let value = Mat::parse_text(&field, &rest).map_err(|e| Error::parse(ln, e.to_string()))?;
                    if value.rows() != r || value.cols() != r {
                        return Err(Error::parse(ln, format!("value is not {r} x {r}")));
                    }
                    if !ids.insert(id) {
                        return Err(Error::parse(ln, format!("duplicate generator {id}")));
                    }
                    gens.push(GenLine { id, x, y, value });
                }
                Some("rel") => {
                    let known = |v: u64| {
                        if ids.contains(&v) {
                            Ok(v)
                        } else {
                            Err(Error::parse(ln, format!("unknown generator {v}")))
                        }
                    };
                    let rel = match t.next() {
                        Some("unit") => Relation::Unit(known(num(ln, t.next(), "generator id")?)?),
                        Some("square") => {
                            let mut four = [0u64; 4];
                            for slot in &mut four {
                                *slot = known(num(ln, t.next(), "generator id")?)?;
                            }
                            Relation::Square(four)
                        }
                        other => {
                            return Err(Error::parse(
                                ln,
                                format!("expected `unit` or `square`, found {other:?}"),
                            ))
                        }
                    };
                    end(ln, t)?;
                    rels.push(rel);
                }
                other => return Err(Error::parse(ln, format!("unexpected line start {other:?}"))),
            }
        }
        Ok(PresentationFile { n, r, q, gens, rels })
    }
}

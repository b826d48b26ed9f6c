//! Line-oriented text formats: `key = value` entries, bracketed blocks that
//! may span lines, `[section]` headers and `#` comments.
//!
//! Polynomial matrices are written as `(row, col, exp_x, exp_θ, coefficient)`
//! tuples; `(row, col, exp_x, coefficient)` is accepted for functions of `x`.

use std::fmt::Write as _;

use crate::convert::PieSystem;
use crate::error::{PieError, Result};
use crate::piop::{Dims, PiOp};
use crate::polymat::{Coeff, Interval, Poly, PolyMat};

/// Position of a token, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl Pos {
    pub fn error(self, msg: impl Into<String>) -> PieError {
        PieError::Parse {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(String),
    /// Block contents, one entry per non-empty line.
    Block(Vec<(Pos, String)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub section: Option<String>,
    pub key: String,
    pub pos: Pos,
    pub value: Value,
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

/// Splits a document into entries.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    let mut section = None;
    let mut lines = text.lines().enumerate();
    while let Some((no, raw)) = lines.next() {
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        let pos = Pos { line: no + 1, col: indent + 1 };
        if trimmed.starts_with('[') && trimmed.ends_with(']') && !trimmed.contains('=') {
            section = Some(trimmed[1..trimmed.len() - 1].trim().to_string());
            continue;
        }
        let (key, rest) = trimmed
            .split_once('=')
            .ok_or_else(|| pos.error("expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(pos.error(format!("invalid key `{key}`")));
        }
        let rest_col = line.find('=').map(|p| p + 2).unwrap_or(1);
        let rest = rest.trim();
        let value = if let Some(body) = rest.strip_prefix('[') {
            let mut block = Vec::new();
            let mut body = body.to_string();
            let mut body_pos = Pos { line: no + 1, col: rest_col + 1 };
            loop {
                if let Some(end) = body.find(']') {
                    if !body[end + 1..].trim().is_empty() {
                        return Err(Pos { line: body_pos.line, col: body_pos.col + end + 1 }.error("text after `]`"));
                    }
                    let part = body[..end].trim();
                    if !part.is_empty() {
                        block.push((body_pos, part.to_string()));
                    }
                    break;
                }
                let part = body.trim();
                if !part.is_empty() {
                    block.push((body_pos, part.to_string()));
                }
                let (next_no, next) = lines
                    .next()
                    .ok_or_else(|| pos.error(format!("unterminated block `{key}`")))?;
                let next = strip_comment(next);
                body_pos = Pos {
                    line: next_no + 1,
                    col: next.len() - next.trim_start().len() + 1,
                };
                body = next.to_string();
            }
            Value::Block(block)
        } else {
            if rest.is_empty() {
                return Err(pos.error(format!("missing value for `{key}`")));
            }
            Value::Scalar(rest.to_string())
        };
        out.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            pos,
            value,
        });
    }
    Ok(out)
}

/// Tuples `(a, b, …)` in a block, with positions.
pub fn tuples(block: &[(Pos, String)]) -> Result<Vec<(Pos, Vec<String>)>> {
    let mut out = Vec::new();
    for (pos, line) in block {
        let mut rest = line.as_str();
        let mut offset = 0;
        while !rest.trim().is_empty() {
            let start = rest.find('(').ok_or_else(|| pos.error("expected `(`"))?;
            if !rest[..start].trim().is_empty() && rest[..start].trim() != "," {
                return Err(Pos { line: pos.line, col: pos.col + offset }.error("unexpected text before tuple"));
            }
            let end = rest.find(')').ok_or_else(|| pos.error("expected `)`"))?;
            let here = Pos { line: pos.line, col: pos.col + offset + start };
            let items = rest[start + 1..end].split(',').map(|s| s.trim().to_string()).collect();
            out.push((here, items));
            offset += end + 1;
            rest = &rest[end + 1..];
        }
    }
    Ok(out)
}

/// Reads a `rows × cols` polynomial matrix from tuples.
pub fn polymat_from_block<C: Coeff>(block: &[(Pos, String)], rows: usize, cols: usize) -> Result<PolyMat<C>> {
    let mut m = PolyMat::zeros(rows, cols);
    for (pos, items) in tuples(block)? {
        let (idx, coeff) = match items.len() {
            4 => (&items[..3], &items[3]),
            5 => (&items[..4], &items[4]),
            k => return Err(pos.error(format!("expected 4 or 5 tuple fields, found {k}"))),
        };
        let nums: Vec<usize> = idx
            .iter()
            .map(|s| s.parse().map_err(|_| pos.error(format!("expected a nonnegative integer, found `{s}`"))))
            .collect::<Result<_>>()?;
        let c = C::parse_text(coeff).ok_or_else(|| pos.error(format!("invalid coefficient `{coeff}`")))?;
        let (r, col) = (nums[0], nums[1]);
        if r >= rows || col >= cols {
            return Err(pos.error(format!("entry ({r}, {col}) outside {rows}x{cols}")));
        }
        let (i, j) = (nums[2] as u32, nums.get(3).copied().unwrap_or(0) as u32);
        m.get_mut(r, col).add_term(i, j, c);
    }
    Ok(m)
}

/// Numeric rows of a block (whitespace or comma separated).
pub fn numeric_rows<C: Coeff>(block: &[(Pos, String)]) -> Result<Vec<(Pos, Vec<C>)>> {
    block
        .iter()
        .map(|(pos, line)| {
            let vals = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| C::parse_text(s).ok_or_else(|| pos.error(format!("invalid number `{s}`"))))
                .collect::<Result<Vec<C>>>()?;
            Ok((*pos, vals))
        })
        .collect()
}

/// Tuple lines of a polynomial matrix, one entry per line.
pub fn polymat_body<C: Coeff>(m: &PolyMat<C>) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            for (i, j, v) in m.get(r, c).terms() {
                let _ = writeln!(out, "  ({r}, {c}, {i}, {j}, {})", v.to_text());
            }
        }
    }
    out
}

fn write_block<C: Coeff>(out: &mut String, key: &str, m: &PolyMat<C>) {
    if m.is_zero() {
        let _ = writeln!(out, "{key} = []");
    } else {
        let _ = write!(out, "{key} = [\n{}]\n", polymat_body(m));
    }
}

const PARTS: [&str; 6] = ["P", "Q1", "Q2", "R0", "R1", "R2"];

/// Operator text: a dims header and the six parameter blocks, with keys
/// prefixed by `prefix`.
pub fn write_operator<C: Coeff>(out: &mut String, prefix: &str, op: &PiOp<C>) {
    let _ = writeln!(
        out,
        "{prefix}dims = {} {} {} {}",
        op.out.m, op.out.n, op.inp.m, op.inp.n
    );
    for (name, m) in PARTS.iter().zip([&op.p, &op.q1, &op.q2, &op.r0, &op.r1, &op.r2]) {
        write_block(out, &format!("{prefix}{name}"), m);
    }
}

fn find<'a>(entries: &'a [Entry], key: &str) -> Result<&'a Entry> {
    entries
        .iter()
        .find(|e| e.key == key)
        .ok_or_else(|| PieError::Parse { line: 0, col: 0, msg: format!("missing `{key}`") })
}

fn block_of<'a>(entry: &'a Entry) -> Result<&'a [(Pos, String)]> {
    match &entry.value {
        Value::Block(b) => Ok(b),
        Value::Scalar(_) => Err(entry.pos.error(format!("`{}` must be a bracketed block", entry.key))),
    }
}

pub fn scalar_of(entry: &Entry) -> Result<&str> {
    match &entry.value {
        Value::Scalar(s) => Ok(s),
        Value::Block(_) => Err(entry.pos.error(format!("`{}` must be a single value", entry.key))),
    }
}

/// Reads an operator written by [`write_operator`].
pub fn read_operator<C: Coeff>(entries: &[Entry], prefix: &str, interval: &Interval<C>) -> Result<PiOp<C>> {
    let dims_entry = find(entries, &format!("{prefix}dims"))?;
    let d: Vec<usize> = scalar_of(dims_entry)?
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| dims_entry.pos.error("expected four integers")))
        .collect::<Result<_>>()?;
    if d.len() != 4 {
        return Err(dims_entry.pos.error("expected four integers"));
    }
    let (out, inp) = (Dims::new(d[0], d[1]), Dims::new(d[2], d[3]));
    let shapes = [
        (out.m, inp.m),
        (out.m, inp.n),
        (out.n, inp.m),
        (out.n, inp.n),
        (out.n, inp.n),
        (out.n, inp.n),
    ];
    let mut parts = Vec::new();
    for (name, (r, c)) in PARTS.iter().zip(shapes) {
        parts.push(polymat_from_block(block_of(find(entries, &format!("{prefix}{name}"))?)?, r, c)?);
    }
    let mut it = parts.into_iter();
    let mut next = || it.next().expect("six parts");
    PiOp::new(interval.clone(), out, inp, next(), next(), next(), next(), next(), next())
}

/// Serialization of a converted system: sizes, interval, and the operators
/// `T̂`, `Â`, `K` and `T`.
pub fn write_pie<C: Coeff>(pie: &PieSystem<C>) -> String {
    let mut out = String::new();
    let iv = &pie.maps.interval;
    let _ = writeln!(out, "[pie]");
    let _ = writeln!(out, "m = {}", pie.m);
    let _ = writeln!(out, "n = {}", pie.n);
    let _ = writeln!(out, "domain = {} {}", iv.a.to_text(), iv.b.to_text());
    for (name, op) in [("That", &pie.that), ("Ahat", &pie.ahat), ("K", &pie.k), ("T", &pie.maps.t)] {
        let _ = writeln!(out, "\n[{name}]");
        write_operator(&mut out, &format!("{name}."), op);
    }
    out
}

/// The operators of a [`write_pie`] document, in the order `T̂, Â, K, T`.
pub fn read_pie_operators<C: Coeff>(text: &str) -> Result<Vec<PiOp<C>>> {
    let entries = parse_entries(text)?;
    let dom = find(&entries, "domain")?;
    let ends: Vec<C> = scalar_of(dom)?
        .split_whitespace()
        .map(|s| C::parse_text(s).ok_or_else(|| dom.pos.error("invalid domain")))
        .collect::<Result<_>>()?;
    if ends.len() != 2 {
        return Err(dom.pos.error("expected two endpoints"));
    }
    let iv = Interval::new(ends[0].clone(), ends[1].clone())?;
    ["That", "Ahat", "K", "T"]
        .iter()
        .map(|name| read_operator(&entries, &format!("{name}."), &iv))
        .collect()
}

/// Human-readable `K v = 0`, one line per row, normalized so that the first
/// constant weight is 1.
pub fn describe_constraint<C: Coeff>(k: &PiOp<C>) -> Vec<String> {
    let sub = |name: &str, c: usize, count: usize| {
        if count == 1 {
            name.to_string()
        } else {
            format!("{name}[{c}]")
        }
    };
    let mut lines = Vec::new();
    for r in 0..k.out.m {
        let lead = (0..k.inp.m)
            .map(|c| k.p.get(r, c).coeff(0, 0))
            .chain((0..k.inp.n).filter(|&c| k.q1.get(r, c).degree() == Some(0)).map(|c| k.q1.get(r, c).coeff(0, 0)))
            .find(|v| !v.is_zero())
            .unwrap_or_else(C::one);
        let scale = C::one() / lead;
        let mut terms = Vec::new();
        for c in 0..k.inp.m {
            let v = k.p.get(r, c).coeff(0, 0) * scale.clone();
            if !v.is_zero() {
                terms.push(format!("{}{}", weight(&v), sub("v₀", c, k.inp.m)));
            }
        }
        for c in 0..k.inp.n {
            let q: Poly<C> = k.q1.get(r, c).scale(&scale);
            if q.is_zero() {
                continue;
            }
            let var = sub("v₁", c, k.inp.n);
            if q.degree() == Some(0) {
                terms.push(format!("{}∫{var}", weight(&q.coeff(0, 0))));
            } else {
                terms.push(format!("∫({q}){var}"));
            }
        }
        let lhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
        lines.push(format!("{lhs}=0"));
    }
    lines
}

fn weight<C: Coeff>(v: &C) -> String {
    if *v == C::one() {
        String::new()
    } else {
        format!("{}·", v.to_text())
    }
}

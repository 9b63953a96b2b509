//! Plain-text form of a system, one transition per line:
//!
//! ```text
//! initial s0
//! stop ⊗
//! s0 -[M]-> s1 1 "M : 0" {l1, l3}
//! s4 -[age]-> s5 1/3 "[50-60]" @P_db {l4} +(John, [50-60], *, *, *) ; s6 2/3 {l5}
//! ```
//!
//! A branch is a target and a probability, optionally followed by a quoted
//! label text, a provenance `@P_db` / `@P_name`, a row set and signed facts.
//! `state x` declares a state with no transitions. `#` starts a comment.

use std::fmt::Write as _;

use super::IoError;
use crate::dltts::{Branch, Dltts, DlttsBuilder, Knowledge, Label, Provenance, Transition, STOP};
use crate::scalar::{parse_fraction, Scalar};
use crate::schema::{parse_pattern_cells, Cell, Polarity, Signature, TuplePattern};

#[derive(Debug, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    Lines(Vec<String>),
    Fact(Polarity, Vec<String>),
    Provenance(String),
    Separator,
}

fn closing(open: char) -> char {
    match open {
        '(' => ')',
        '[' => ']',
        _ => '}',
    }
}

/// Splits on commas outside brackets.
fn split_cells(inner: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    // reads from chars[start] (an opening bracket) to its match; returns the inside
    let group = |start: usize| -> Result<(String, usize), String> {
        let mut stack = vec![closing(chars[start])];
        let mut j = start + 1;
        while j < chars.len() {
            let c = chars[j];
            if Some(&c) == stack.last() {
                stack.pop();
                if stack.is_empty() {
                    return Ok((chars[start + 1..j].iter().collect(), j + 1));
                }
            } else if matches!(c, '(' | '[' | '{') {
                stack.push(closing(c));
            }
            j += 1;
        }
        Err(format!("unclosed '{}'", chars[start]))
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == ';' {
            out.push(Token::Separator);
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') if i + 1 < chars.len() => {
                        s.push(chars[i + 1]);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(Token::Quoted(s));
        } else if c == '{' {
            let (inner, next) = group(i)?;
            let lines = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            out.push(Token::Lines(lines));
            i = next;
        } else if (c == '+' || c == '-') && chars.get(i + 1) == Some(&'(') {
            let (inner, next) = group(i + 1)?;
            let sign = if c == '+' { Polarity::Positive } else { Polarity::Negative };
            out.push(Token::Fact(sign, split_cells(&inner)));
            i = next;
        } else if c == '@' {
            let start = i + 1;
            i = start;
            while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], ';' | '{' | '"') {
                i += 1;
            }
            out.push(Token::Provenance(chars[start..i].iter().collect()));
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], ';' | '{' | '"') {
                i += 1;
            }
            out.push(Token::Word(chars[start..i].iter().collect()));
        }
    }
    Ok(out)
}

fn parse_provenance(text: &str) -> Result<Provenance, String> {
    match text.strip_prefix("P_") {
        Some("db") => Ok(Provenance::Database),
        Some(who) if !who.is_empty() => Ok(Provenance::Belief(who.to_string())),
        _ => Err(format!("bad provenance '@{text}'")),
    }
}

fn parse_branch<S: Scalar>(tokens: &[Token], sig: Option<&Signature>) -> Result<Branch<S>, String> {
    let (to, prob) = match tokens {
        [Token::Word(to), Token::Word(p), ..] => (to, p),
        _ => return Err("a branch starts with a target state and a probability".into()),
    };
    let prob = parse_fraction(prob).ok_or_else(|| format!("bad probability '{prob}'"))?;
    let mut label = Label::default();
    let mut seen_text = false;
    for t in &tokens[2..] {
        match t {
            Token::Quoted(s) if !seen_text => {
                label.text = s.clone();
                seen_text = true;
            }
            Token::Provenance(p) if label.provenance.is_none() => {
                label.provenance = Some(parse_provenance(p)?);
            }
            Token::Lines(ls) => label.lines.extend(ls.iter().cloned()),
            Token::Fact(sign, cells) => {
                let sig = sig.ok_or("facts need a schema")?;
                let cells = parse_pattern_cells(sig, cells).map_err(|e| e.to_string())?;
                label.facts.push(TuplePattern::new(cells, *sign));
            }
            other => return Err(format!("unexpected {other:?}")),
        }
    }
    Ok(Branch::new(to.clone(), S::from_rational(&prob), label))
}

/// Reads a system file into an unchecked builder. Facts in labels need `sig`.
pub fn parse_dltts<S: Scalar>(text: &str, sig: Option<&Signature>) -> Result<DlttsBuilder<S>, IoError> {
    let mut initial = None;
    let mut stop = None;
    let mut states = Vec::new();
    let mut transitions: Vec<(String, String, Vec<Branch<S>>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let err = |message: String| IoError::Parse {
            what: "dltts".into(),
            line: n + 1,
            message,
        };
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("initial ") {
            initial = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("stop ") {
            stop = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("state ") {
            states.push(rest.trim().to_string());
        } else {
            let (from, rest) = line
                .split_once("-[")
                .ok_or_else(|| err("expected 'from -[action]-> branches'".into()))?;
            let (action, rest) = rest
                .split_once("]->")
                .ok_or_else(|| err("missing ']->'".into()))?;
            let tokens = tokenize(rest).map_err(&err)?;
            let branches = tokens
                .split(|t| *t == Token::Separator)
                .map(|part| parse_branch(part, sig))
                .collect::<Result<Vec<_>, _>>()
                .map_err(&err)?;
            transitions.push((from.trim().to_string(), action.trim().to_string(), branches));
        }
    }
    let initial = initial
        .or_else(|| transitions.first().map(|t| t.0.clone()))
        .ok_or_else(|| IoError::Parse {
            what: "dltts".into(),
            line: 0,
            message: "no initial state".into(),
        })?;
    let mut builder = DlttsBuilder::new(initial);
    if let Some(s) = stop {
        builder = builder.stop(s);
    }
    for s in states {
        builder = builder.state(s);
    }
    for (from, action, branches) in transitions {
        builder = builder.transition(from, action, branches);
    }
    Ok(builder)
}

/// [`parse_dltts`], then build (saturating against `knowledge` if given).
pub fn read_dltts<S: Scalar>(
    text: &str,
    sig: Option<&Signature>,
    knowledge: Option<&Knowledge<'_>>,
) -> Result<Dltts<S>, IoError> {
    let builder = parse_dltts(text, sig)?;
    Ok(match knowledge {
        Some(k) => builder.build_with(k)?,
        None => builder.build()?,
    })
}

/// `#` outside a quoted string starts a comment.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn write_fact(out: &mut String, f: &TuplePattern) {
    out.push(if f.is_positive() { '+' } else { '-' });
    out.push('(');
    for (i, c) in f.cells.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match c {
            Cell::Any => out.push('*'),
            Cell::Is(v) => {
                let _ = write!(out, "{v}");
            }
        }
    }
    out.push(')');
}

fn write_branch<S: Scalar>(out: &mut String, b: &Branch<S>) {
    let _ = write!(out, "{} {}", b.to, b.prob.render());
    if !b.label.text.is_empty() {
        let escaped = b.label.text.replace('\\', "\\\\").replace('"', "\\\"");
        let _ = write!(out, " \"{escaped}\"");
    }
    if let Some(p) = &b.label.provenance {
        let _ = write!(out, " @{p}");
    }
    if !b.label.lines.is_empty() {
        let lines: Vec<&str> = b.label.lines.iter().map(String::as_str).collect();
        let _ = write!(out, " {{{}}}", lines.join(", "));
    }
    for f in &b.label.facts {
        out.push(' ');
        write_fact(out, f);
    }
}

fn write_transition<S: Scalar>(out: &mut String, t: &Transition<S>) {
    let _ = write!(out, "{} -[{}]-> ", t.from, t.action);
    for (i, b) in t.branches.iter().enumerate() {
        if i > 0 {
            out.push_str(" ; ");
        }
        write_branch(out, b);
    }
    out.push('\n');
}

/// The text form read by [`parse_dltts`]. Tags are not written; they are
/// recomputed when the file is read back.
pub fn write_dltts<S: Scalar>(d: &Dltts<S>) -> String {
    let mut out = format!("initial {}\n", d.initial());
    if d.stop() != STOP {
        let _ = writeln!(out, "stop {}", d.stop());
    }
    for s in d.states() {
        let mentioned = s == d.initial()
            || s == d.stop()
            || d.transitions()
                .iter()
                .any(|t| t.from == *s || t.branches.iter().any(|b| b.to == *s));
        if !mentioned {
            let _ = writeln!(out, "state {s}");
        }
    }
    for t in d.transitions() {
        write_transition(&mut out, t);
    }
    out
}

//! S-expression surface syntax for kernel-level terms.
//!
//! Atoms are maximal runs of characters that are neither whitespace
//! (space, tab, newline, carriage return) nor parentheses.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn atom(text: impl Into<String>) -> Self {
        SExpr::Atom(text.into())
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(text) => f.write_str(text),
            SExpr::List(children) => {
                f.write_str("(")?;
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{child}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

/// Parses exactly one s-expression from `text`.
pub fn parse_sexpr(text: &str) -> Result<SExpr> {
    let bytes = text.as_bytes();
    let mut pos = skip_space(bytes, 0);
    if pos == bytes.len() {
        return Err(Error::EmptyInput);
    }

    // Explicit stack so deeply nested terms cannot overflow the call stack.
    let mut stack: Vec<(usize, Vec<SExpr>)> = Vec::new();
    let result = loop {
        pos = skip_space(bytes, pos);
        if pos == bytes.len() {
            let open = stack.last().map(|(at, _)| *at).unwrap_or(pos);
            return Err(Error::UnbalancedParens(open));
        }
        let finished = match bytes[pos] {
            b'(' => {
                stack.push((pos, Vec::new()));
                pos += 1;
                None
            }
            b')' => {
                let (_, children) = stack.pop().ok_or(Error::UnbalancedParens(pos))?;
                pos += 1;
                Some(SExpr::List(children))
            }
            _ => {
                let start = pos;
                while pos < bytes.len() && !is_space(bytes[pos]) && bytes[pos] != b'(' && bytes[pos] != b')' {
                    pos += 1;
                }
                Some(SExpr::Atom(String::from(&text[start..pos])))
            }
        };
        if let Some(expr) = finished {
            match stack.last_mut() {
                Some((_, children)) => children.push(expr),
                None => break expr,
            }
        }
    };

    let rest = skip_space(bytes, pos);
    if rest < bytes.len() {
        if bytes[rest] == b')' {
            return Err(Error::UnbalancedParens(rest));
        }
        return Err(Error::TrailingContent(rest));
    }
    Ok(result)
}

fn skip_space(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && is_space(bytes[pos]) {
        pos += 1;
    }
    pos
}

//! Plain-text inputs: explicit atom lists and dense data matrices.
//!
//! Atom files start with `atoms <m> <d>` followed by `m` lines of `d`
//! whitespace-separated coordinates. Data files start with `<n> <d>` followed
//! by `n` lines of `d` features and the target, separated by commas or
//! whitespace. Blank lines and lines starting with `#` are ignored. Errors
//! give the byte offset of the offending line.

use std::fs;
use std::path::Path;

use gcgm_core::{AtomicSet, DataMatrix};

use crate::Error;

struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    /// Next meaningful line with its starting offset.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let rest = &self.text[start..];
            let end = rest.find('\n').map_or(self.text.len(), |i| start + i + 1);
            self.pos = end;
            let line = self.text[start..end].trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Some((start, line));
            }
        }
        None
    }
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty())
}

fn numbers(path: &Path, offset: usize, line: &str, expected: usize) -> Result<Vec<f64>, Error> {
    let mut out = Vec::with_capacity(expected);
    for f in fields(line) {
        let v: f64 = f
            .parse()
            .map_err(|_| Error::format(path, offset as u64, format!("not a number: {f:?}")))?;
        if !v.is_finite() {
            return Err(Error::format(path, offset as u64, format!("non-finite value {f:?}")));
        }
        out.push(v);
    }
    if out.len() != expected {
        return Err(Error::format(path, offset as u64, format!("expected {expected} values, found {}", out.len())));
    }
    Ok(out)
}

fn count(path: &Path, offset: usize, field: Option<&str>, what: &str) -> Result<usize, Error> {
    field
        .and_then(|f| f.parse::<usize>().ok())
        .filter(|v| *v > 0)
        .ok_or_else(|| Error::format(path, offset as u64, format!("header needs a positive {what}")))
}

fn read_text(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::format(path, e.utf8_error().valid_up_to() as u64, "invalid UTF-8"))
}

/// Atom coordinates from an `atoms <m> <d>` file, unscaled.
pub fn parse_atoms(path: &Path, text: &str) -> Result<(usize, Vec<Vec<f64>>), Error> {
    let mut lines = Lines { text, pos: 0 };
    let (off, header) = lines.next_line().ok_or_else(|| Error::format(path, 0, "empty atom file"))?;
    let mut head = fields(header);
    if head.next() != Some("atoms") {
        return Err(Error::format(path, off as u64, "header must read `atoms <m> <d>`"));
    }
    let m = count(path, off, head.next(), "atom count")?;
    let d = count(path, off, head.next(), "dimension")?;
    if head.next().is_some() {
        return Err(Error::format(path, off as u64, "header must read `atoms <m> <d>`"));
    }
    let mut atoms = Vec::with_capacity(m);
    while let Some((off, line)) = lines.next_line() {
        if atoms.len() == m {
            return Err(Error::format(path, off as u64, format!("more than the declared {m} atoms")));
        }
        atoms.push(numbers(path, off, line, d)?);
    }
    if atoms.len() < m {
        return Err(Error::format(path, text.len() as u64, format!("declared {m} atoms, found {}", atoms.len())));
    }
    Ok((d, atoms))
}

pub fn read_atoms(path: &Path, scale: f64) -> Result<AtomicSet, Error> {
    let (d, atoms) = parse_atoms(path, &read_text(path)?)?;
    Ok(AtomicSet::explicit(d, &atoms, scale)?)
}

pub fn parse_data(path: &Path, text: &str) -> Result<DataMatrix, Error> {
    let mut lines = Lines { text, pos: 0 };
    let (off, header) = lines.next_line().ok_or_else(|| Error::format(path, 0, "empty data file"))?;
    let mut head = fields(header);
    let n = count(path, off, head.next(), "row count")?;
    let d = count(path, off, head.next(), "column count")?;
    if head.next().is_some() {
        return Err(Error::format(path, off as u64, "header must read `<n> <d>`"));
    }
    let mut a = Vec::with_capacity(n * d);
    let mut b = Vec::with_capacity(n);
    while let Some((off, line)) = lines.next_line() {
        if b.len() == n {
            return Err(Error::format(path, off as u64, format!("more than the declared {n} rows")));
        }
        let row = numbers(path, off, line, d + 1)?;
        a.extend_from_slice(&row[..d]);
        b.push(row[d]);
    }
    if b.len() < n {
        return Err(Error::format(path, text.len() as u64, format!("declared {n} rows, found {}", b.len())));
    }
    Ok(DataMatrix::new(n, d, a, b)?)
}

pub fn read_data(path: &Path) -> Result<DataMatrix, Error> {
    parse_data(path, &read_text(path)?)
}

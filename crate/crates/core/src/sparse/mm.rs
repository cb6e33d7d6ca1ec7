//! Matrix Market coordinate reader for real symmetric matrices.

use std::path::Path;

use super::SparseSym;
use crate::error::{Error, Result};

fn mm_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

/// Reads a Matrix Market coordinate file (`real` or `integer`, `symmetric`
/// or `general` with symmetric content) into full-pattern storage.
pub fn mm_read(path: impl AsRef<Path>) -> Result<SparseSym> {
    let text = std::fs::read_to_string(path)?;
    mm_read_str(&text)
}

/// Same as [`mm_read`] on in-memory text.
pub fn mm_read_str(text: &str) -> Result<SparseSym> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = lines.next().ok_or_else(|| mm_err(1, "empty file"))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(mm_err(hline, "malformed header"));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(mm_err(hline, "only 'matrix coordinate' is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(mm_err(hline, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(mm_err(hline, format!("unsupported symmetry '{other}'"))),
    };

    let (sline, size) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'))
        .ok_or_else(|| mm_err(hline + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| mm_err(sline, "malformed size line"))?;
    if dims.len() != 3 {
        return Err(mm_err(sline, "size line needs rows, columns and entries"));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    if rows != cols {
        return Err(mm_err(sline, format!("matrix is not square ({rows}x{cols})")));
    }
    let n = rows;

    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * nnz);
    let mut lines_of: Vec<usize> = Vec::with_capacity(nnz);
    let mut seen = 0;
    for (lno, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if seen == nnz {
            return Err(mm_err(lno, "more entries than declared"));
        }
        let mut it = t.split_whitespace();
        let (i, j, v) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(i), Some(j), Some(v), None) => (i, j, v),
            _ => return Err(mm_err(lno, "expected 'row col value'")),
        };
        let i: usize = i.parse().map_err(|_| mm_err(lno, "bad row index"))?;
        let j: usize = j.parse().map_err(|_| mm_err(lno, "bad column index"))?;
        let v: f64 = v.parse().map_err(|_| mm_err(lno, "bad value"))?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(mm_err(lno, format!("index ({i}, {j}) out of range")));
        }
        let (i, j) = (i - 1, j - 1);
        if symmetric {
            if j > i {
                return Err(mm_err(lno, "upper-triangle entry in symmetric file"));
            }
            entries.push((i, j, v));
            if i != j {
                entries.push((j, i, v));
            }
        } else {
            entries.push((i, j, v));
        }
        lines_of.push(lno);
        seen += 1;
    }
    if seen != nnz {
        return Err(mm_err(
            text.lines().count(),
            format!("expected {nnz} entries, found {seen}"),
        ));
    }

    if !symmetric {
        let mut sorted: Vec<(usize, usize, f64, usize)> = entries
            .iter()
            .zip(&lines_of)
            .map(|(&(i, j, v), &l)| (i, j, v, l))
            .collect();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for &(i, j, v, l) in &sorted {
            if i == j {
                continue;
            }
            let mirror = sorted.binary_search_by(|e| (e.0, e.1).cmp(&(j, i)));
            match mirror {
                Ok(p) if sorted[p].2 == v => {}
                _ => return Err(mm_err(l, format!("nonsymmetric content at ({}, {})", i + 1, j + 1))),
            }
        }
    }

    SparseSym::from_triplets(n, &entries)
}

//! Plain-text algebra files:
//!
//! ```text
//! # comment
//! 3
//! 0 1 2 1.0
//! 1 2 0 1.0
//! 2 0 1 1.0
//! 1 0 0
//! 0 2 0
//! 0 0 3
//! ```
//!
//! The first data line is the dimension `n`; the last `n` data lines are
//! the inertia matrix (row-major); everything between is `i j k value`
//! structure constants with 0-based indices.

use nalgebra::DMatrix;

use super::{AlgebraError, LieAlgebra};

pub fn parse_algebra_text(name: &str, text: &str) -> Result<LieAlgebra, AlgebraError> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect()))
        .filter(|(_, toks): &(usize, Vec<&str>)| !toks.is_empty())
        .collect();
    let (first_line, header) = lines.first().ok_or(AlgebraError::Parse {
        line: 1,
        message: "empty algebra file".into(),
    })?;
    if header.len() != 1 {
        return Err(AlgebraError::Parse {
            line: *first_line,
            message: "expected the dimension alone on the first line".into(),
        });
    }
    let n: usize = header[0].parse().map_err(|_| AlgebraError::Parse {
        line: *first_line,
        message: format!("bad dimension `{}`", header[0]),
    })?;
    if n == 0 || lines.len() < 1 + n {
        return Err(AlgebraError::Parse {
            line: lines.last().map_or(1, |l| l.0),
            message: format!("expected {n} inertia rows after the structure constants"),
        });
    }
    let split = lines.len() - n;

    let mut entries = Vec::new();
    for (line, toks) in &lines[1..split] {
        if toks.len() != 4 {
            return Err(AlgebraError::Parse {
                line: *line,
                message: "expected `i j k value`".into(),
            });
        }
        let idx = |s: &str| -> Result<usize, AlgebraError> {
            let i: usize = s.parse().map_err(|_| AlgebraError::Parse {
                line: *line,
                message: format!("bad index `{s}`"),
            })?;
            if i >= n {
                return Err(AlgebraError::Parse {
                    line: *line,
                    message: format!("index {i} out of range for dimension {n}"),
                });
            }
            Ok(i)
        };
        let value = parse_num(toks[3], *line)?;
        entries.push((idx(toks[0])?, idx(toks[1])?, idx(toks[2])?, value));
    }

    let mut inertia = DMatrix::zeros(n, n);
    for (r, (line, toks)) in lines[split..].iter().enumerate() {
        if toks.len() != n {
            return Err(AlgebraError::Parse {
                line: *line,
                message: format!("inertia row needs {n} entries"),
            });
        }
        for (c, tok) in toks.iter().enumerate() {
            inertia[(r, c)] = parse_num(tok, *line)?;
        }
    }
    LieAlgebra::from_sparse(name, n, &entries, inertia)
}

/// Writes an algebra in the format read by [`parse_algebra_text`], listing
/// only the `i < j` half of the structure constants.
pub fn write_algebra_text(algebra: &LieAlgebra) -> String {
    let n = algebra.dim();
    let mut out = format!("# {}\n{n}\n", algebra.name());
    for (i, j, k, v) in algebra.nonzero_constants() {
        if i < j {
            out.push_str(&format!("{i} {j} {k} {v}\n"));
        }
    }
    for r in 0..n {
        let row: Vec<String> = (0..n).map(|c| algebra.inertia()[(r, c)].to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn parse_num(tok: &str, line: usize) -> Result<f64, AlgebraError> {
    tok.parse().map_err(|_| AlgebraError::Parse {
        line,
        message: format!("bad number `{tok}`"),
    })
}

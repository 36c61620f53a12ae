//! Schedules, legality under the three causality regimes, dimension
//! classification and a bounded schedule search.

mod legality;
mod search;
pub mod transform;

pub use legality::{
    checked, classify_dims, find_violation, validate, Condition, DepClass, DimClass, DimClassification, DimInfo, LegalityMode, ScheduleError,
    StatementDims, Validated, Violation,
};
pub use search::{search, statement_candidates, Score, SearchConfig, SearchOutcome};

use serde::{Deserialize, Serialize};

use crate::affine::{AffineError, AffineExpr, Bindings};

/// Per-statement affine timestamp functions. Shorter rows are zero-padded
/// when compared.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    rows: Vec<Vec<AffineExpr>>,
}

impl Schedule {
    pub fn new(rows: Vec<Vec<AffineExpr>>) -> Self {
        Self { rows }
    }

    pub fn statement_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self, stmt: usize) -> &[AffineExpr] {
        &self.rows[stmt]
    }

    pub fn all_rows(&self) -> &[Vec<AffineExpr>] {
        &self.rows
    }

    pub fn with_rows(&self, stmt: usize, rows: Vec<AffineExpr>) -> Schedule {
        let mut out = self.clone();
        out.rows[stmt] = rows;
        out
    }

    /// Length of the longest timestamp.
    pub fn dims(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Timestamp of one instance, zero-padded to [`Schedule::dims`].
    pub fn timestamp(&self, stmt: usize, iterators: &[String], point: &[i64], bindings: &Bindings) -> Result<Vec<i64>, AffineError> {
        let lookup = |n: &str| iterators.iter().position(|i| i == n).map(|k| point[k]).or_else(|| bindings.get(n).copied());
        let mut out = Vec::with_capacity(self.dims());
        for e in &self.rows[stmt] {
            out.push(e.eval(lookup)?);
        }
        out.resize(self.dims(), 0);
        Ok(out)
    }
}

/// One dynamic statement instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Instance {
    pub timestamp: Vec<i64>,
    pub statement: usize,
    pub point: Vec<i64>,
}

/// Every instance of the SCoP at fixed parameters, in timestamp order.
/// Ties (only possible for non-injective schedules) fall back to statement
/// index, then iteration vector.
pub fn instances(scop: &crate::ir::Scop, schedule: &Schedule, bindings: &Bindings) -> Result<Vec<Instance>, AffineError> {
    let mut out = Vec::new();
    for (idx, s) in scop.statements.iter().enumerate() {
        for point in s.domain.enumerate(bindings)? {
            let timestamp = schedule.timestamp(idx, &s.iterators, &point, bindings)?;
            out.push(Instance { timestamp, statement: idx, point });
        }
    }
    out.sort();
    Ok(out)
}

/// Parses a comma-separated list of affine expressions such as
/// `i, 1, -j + 2, 0` (parentheses around the list are optional).
pub fn parse_rows(text: &str) -> Result<Vec<AffineExpr>, String> {
    let t = text.trim();
    let t = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(t);
    t.split(',').map(parse_affine).collect()
}

fn parse_affine(text: &str) -> Result<AffineExpr, String> {
    let mut out = AffineExpr::default();
    let spaced = text.replace('-', " - ").replace('+', " + ");
    let mut sign = 1;
    let mut seen = false;
    for tok in spaced.split_whitespace() {
        match tok {
            "+" => {}
            "-" => sign = -sign,
            _ => {
                let (coeff, name) = match tok.split_once('*') {
                    Some((c, n)) => (c.trim().parse::<i64>().map_err(|_| format!("bad coefficient in `{tok}`"))?, Some(n.trim())),
                    None => match tok.parse::<i64>() {
                        Ok(v) => (v, None),
                        Err(_) => (1, Some(tok)),
                    },
                };
                match name {
                    Some(n) if n.chars().all(|c| c.is_alphanumeric() || c == '_') && !n.is_empty() => out.add_term(n, sign * coeff),
                    Some(n) => return Err(format!("bad term `{n}`")),
                    None => out.add_constant(sign * coeff),
                }
                sign = 1;
                seen = true;
            }
        }
    }
    if !seen {
        return Err(format!("empty expression in `{text}`"));
    }
    Ok(out)
}

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::AffineError;

/// Integer affine expression over named dimensions: `Σ cᵢ·xᵢ + c₀`.
///
/// Zero coefficients are never stored, so structural equality is semantic
/// equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AffineExpr {
    terms: BTreeMap<String, i64>,
    constant: i64,
}

impl AffineExpr {
    pub fn constant(value: i64) -> Self {
        Self { terms: BTreeMap::new(), constant: value }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::term(name, 1)
    }

    pub fn term(name: impl Into<String>, coeff: i64) -> Self {
        let mut terms = BTreeMap::new();
        if coeff != 0 {
            terms.insert(name.into(), coeff);
        }
        Self { terms, constant: 0 }
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.terms.get(name).copied().unwrap_or(0)
    }

    pub fn constant_term(&self) -> i64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, i64)> {
        self.terms.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the expression mentions `name`.
    pub fn uses(&self, name: &str) -> bool {
        self.terms.contains_key(name)
    }

    pub fn add_term(&mut self, name: &str, coeff: i64) {
        let entry = self.terms.entry(name.to_string()).or_insert(0);
        *entry += coeff;
        if *entry == 0 {
            self.terms.remove(name);
        }
    }

    pub fn add_constant(&mut self, value: i64) {
        self.constant += value;
    }

    /// Replaces every occurrence of `name` by `replacement`.
    pub fn substitute(&self, name: &str, replacement: &AffineExpr) -> AffineExpr {
        let c = self.coeff(name);
        if c == 0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.terms.remove(name);
        out + replacement.clone() * c
    }

    /// Renames dimensions through `f`; names mapped to the same target are merged.
    pub fn rename(&self, f: impl Fn(&str) -> String) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant);
        for (name, c) in self.terms() {
            out.add_term(&f(name), c);
        }
        out
    }

    pub fn eval(&self, lookup: impl Fn(&str) -> Option<i64>) -> Result<i64, AffineError> {
        let mut acc = self.constant;
        for (name, c) in self.terms() {
            let v = lookup(name).ok_or_else(|| AffineError::UnboundName(name.to_string()))?;
            acc += c * v;
        }
        Ok(acc)
    }

    /// Dense coefficient row over `columns` followed by the constant.
    pub fn to_row(&self, columns: &[String]) -> Result<Vec<i64>, AffineError> {
        let mut row = vec![0; columns.len() + 1];
        for (name, c) in self.terms() {
            let idx = columns
                .iter()
                .position(|col| col == name)
                .ok_or_else(|| AffineError::UnknownDim(name.to_string()))?;
            row[idx] = c;
        }
        row[columns.len()] = self.constant;
        Ok(row)
    }

    pub fn from_row(row: &[i64], columns: &[String]) -> AffineExpr {
        let mut out = AffineExpr::constant(row[columns.len()]);
        for (c, name) in row.iter().zip(columns) {
            if *c != 0 {
                out.add_term(name, *c);
            }
        }
        out
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        for (name, c) in rhs.terms {
            self.add_term(&name, c);
        }
        self.constant += rhs.constant;
        self
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self * -1
    }
}

impl Mul<i64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(mut self, rhs: i64) -> AffineExpr {
        if rhs == 0 {
            return AffineExpr::constant(0);
        }
        for c in self.terms.values_mut() {
            *c *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl From<i64> for AffineExpr {
    fn from(value: i64) -> Self {
        AffineExpr::constant(value)
    }
}

impl fmt::Display for AffineExpr {
    /// Prints terms in the given order, e.g. `i + 2*j - N + 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_terms(f, self.terms(), self.constant)
    }
}

pub(crate) fn write_terms<'a>(
    f: &mut impl fmt::Write,
    terms: impl Iterator<Item = (&'a str, i64)>,
    constant: i64,
) -> fmt::Result {
    let mut first = true;
    for (name, c) in terms {
        if c == 0 {
            continue;
        }
        let mag = c.abs();
        if first {
            if c < 0 {
                f.write_str("-")?;
            }
        } else {
            f.write_str(if c < 0 { " - " } else { " + " })?;
        }
        if mag == 1 {
            f.write_str(name)?;
        } else {
            write!(f, "{mag}*{name}")?;
        }
        first = false;
    }
    if first {
        write!(f, "{constant}")?;
    } else if constant != 0 {
        write!(f, " {} {}", if constant < 0 { "-" } else { "+" }, constant.abs())?;
    }
    Ok(())
}

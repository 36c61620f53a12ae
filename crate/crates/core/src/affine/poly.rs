//! Conjunctions of integer affine constraints over anonymous columns.
//!
//! A row `[a₀, …, aₙ₋₁, c]` stands for `Σ aᵢ·xᵢ + c ≥ 0` (inequality) or
//! `= 0` (equality). Every operation keeps rows tightened: coefficients are
//! divided by their gcd and inequality constants floored, which never drops
//! an integer point.

use num_integer::Integer;

pub(crate) type Row = Vec<i64>;

/// Outcome of a bounded search for an integer point.
pub(crate) enum Search {
    Found(Vec<i64>),
    NotFound,
    /// Search window or node budget exhausted before a verdict.
    GaveUp,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Conj {
    pub ncols: usize,
    pub eqs: Vec<Row>,
    pub ineqs: Vec<Row>,
}

fn row_gcd(row: &[i64]) -> i64 {
    row.iter().fold(0i64, |g, &c| g.gcd(&c))
}

fn is_zero(coeffs: &[i64]) -> bool {
    coeffs.iter().all(|&c| c == 0)
}

impl Conj {
    pub fn universe(ncols: usize) -> Self {
        Self { ncols, eqs: Vec::new(), ineqs: Vec::new() }
    }

    pub fn add_eq(&mut self, row: Row) {
        debug_assert_eq!(row.len(), self.ncols + 1);
        self.eqs.push(row);
    }

    pub fn add_ineq(&mut self, row: Row) {
        debug_assert_eq!(row.len(), self.ncols + 1);
        self.ineqs.push(row);
    }

    pub fn intersect(&self, other: &Conj) -> Conj {
        debug_assert_eq!(self.ncols, other.ncols);
        let mut out = self.clone();
        out.eqs.extend(other.eqs.iter().cloned());
        out.ineqs.extend(other.ineqs.iter().cloned());
        out
    }

    /// Tightens and deduplicates rows. Returns `None` when a constant
    /// contradiction shows the conjunction has no integer point.
    pub fn normalized(mut self) -> Option<Conj> {
        let n = self.ncols;
        let mut eqs: Vec<Row> = Vec::with_capacity(self.eqs.len());
        for mut row in self.eqs.drain(..) {
            let g = row_gcd(&row[..n]);
            if g == 0 {
                if row[n] != 0 {
                    return None;
                }
                continue;
            }
            if row[n] % g != 0 {
                return None;
            }
            for c in row.iter_mut() {
                *c /= g;
            }
            if let Some(first) = row[..n].iter().find(|&&c| c != 0) {
                if *first < 0 {
                    for c in row.iter_mut() {
                        *c = -*c;
                    }
                }
            }
            if !eqs.contains(&row) {
                eqs.push(row);
            }
        }
        let mut ineqs: Vec<Row> = Vec::with_capacity(self.ineqs.len());
        for mut row in self.ineqs.drain(..) {
            let g = row_gcd(&row[..n]);
            if g == 0 {
                if row[n] < 0 {
                    return None;
                }
                continue;
            }
            for c in row[..n].iter_mut() {
                *c /= g;
            }
            row[n] = Integer::div_floor(&row[n], &g);
            match ineqs.iter_mut().find(|r| r[..n] == row[..n]) {
                Some(existing) => existing[n] = existing[n].min(row[n]),
                None => ineqs.push(row),
            }
        }
        // Opposite inequality pairs: a·x + c₁ ≥ 0 and −a·x + c₂ ≥ 0.
        let mut promoted: Vec<usize> = Vec::new();
        for a in 0..ineqs.len() {
            for b in (a + 1)..ineqs.len() {
                if ineqs[a][..n].iter().zip(&ineqs[b][..n]).all(|(x, y)| *x == -*y) {
                    let sum = ineqs[a][n] + ineqs[b][n];
                    if sum < 0 {
                        return None;
                    }
                    if sum == 0 {
                        promoted.push(a);
                        promoted.push(b);
                        let mut eq = ineqs[a].clone();
                        if let Some(first) = eq[..n].iter().find(|&&c| c != 0) {
                            if *first < 0 {
                                for c in eq.iter_mut() {
                                    *c = -*c;
                                }
                            }
                        }
                        if !eqs.contains(&eq) {
                            eqs.push(eq);
                        }
                    }
                }
            }
        }
        if !promoted.is_empty() {
            let mut idx = 0;
            ineqs.retain(|_| {
                let keep = !promoted.contains(&idx);
                idx += 1;
                keep
            });
        }
        self.eqs = eqs;
        self.ineqs = ineqs;
        Some(self)
    }

    pub fn uses_col(&self, col: usize) -> bool {
        self.eqs.iter().chain(&self.ineqs).any(|r| r[col] != 0)
    }

    /// Fourier–Motzkin elimination of one column (rational projection).
    /// The second component is `false` when the integer projection may be
    /// strictly smaller than the returned rational shadow.
    pub fn eliminate(&self, col: usize) -> (Option<Conj>, bool) {
        let n = self.ncols;
        let mut exact = true;
        // Equality substitution first: pick the smallest pivot.
        let pivot = self
            .eqs
            .iter()
            .enumerate()
            .filter(|(_, r)| r[col] != 0)
            .min_by_key(|(_, r)| r[col].abs())
            .map(|(i, _)| i);
        if let Some(p) = pivot {
            let e = self.eqs[p].clone();
            let a = e[col];
            if a.abs() != 1 {
                exact = false;
            }
            let sub = |row: &Row| -> Row {
                let b = row[col];
                if b == 0 {
                    return row.clone();
                }
                row.iter()
                    .zip(&e)
                    .map(|(&r, &ev)| a.abs() * r - a.signum() * b * ev)
                    .collect()
            };
            let mut out = Conj::universe(n);
            for (i, row) in self.eqs.iter().enumerate() {
                if i != p {
                    out.eqs.push(sub(row));
                }
            }
            for row in &self.ineqs {
                out.ineqs.push(sub(row));
            }
            return (out.normalized(), exact);
        }
        let mut out = Conj::universe(n);
        out.eqs = self.eqs.clone();
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for row in &self.ineqs {
            match row[col].signum() {
                1 => pos.push(row),
                -1 => neg.push(row),
                _ => out.ineqs.push(row.clone()),
            }
        }
        for p in &pos {
            for q in &neg {
                let a = p[col];
                let b = -q[col];
                if a != 1 && b != 1 {
                    exact = false;
                }
                let combined: Row = p.iter().zip(q.iter()).map(|(&x, &y)| b * x + a * y).collect();
                out.ineqs.push(combined);
            }
        }
        (out.normalized(), exact)
    }

    /// Eliminates `cols` from last to first. `None` means empty.
    pub fn eliminate_all(&self, cols: &[usize]) -> (Option<Conj>, bool) {
        let mut cur = match self.clone().normalized() {
            Some(c) => c,
            None => return (None, true),
        };
        let mut exact = true;
        for &col in cols.iter().rev() {
            if !cur.uses_col(col) {
                continue;
            }
            let (next, ex) = cur.eliminate(col);
            exact &= ex;
            match next {
                Some(c) => cur = c,
                None => return (None, exact),
            }
        }
        (Some(cur), exact)
    }

    /// Rational emptiness by full Fourier–Motzkin elimination.
    pub fn is_rationally_empty(&self) -> bool {
        let cols: Vec<usize> = (0..self.ncols).collect();
        self.eliminate_all(&cols).0.is_none()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_cols(&self, keep: &[usize]) -> Conj {
        let remap = |row: &Row| -> Row {
            let mut out: Row = keep.iter().map(|&k| row[k]).collect();
            out.push(row[self.ncols]);
            out
        };
        Conj {
            ncols: keep.len(),
            eqs: self.eqs.iter().map(remap).collect(),
            ineqs: self.ineqs.iter().map(remap).collect(),
        }
    }

    /// Embeds into a wider column space: old column `i` goes to `target[i]`.
    pub fn embed(&self, ncols: usize, target: &[usize]) -> Conj {
        let remap = |row: &Row| -> Row {
            let mut out = vec![0; ncols + 1];
            for (i, &t) in target.iter().enumerate() {
                out[t] += row[i];
            }
            out[ncols] = row[self.ncols];
            out
        };
        Conj {
            ncols,
            eqs: self.eqs.iter().map(remap).collect(),
            ineqs: self.ineqs.iter().map(remap).collect(),
        }
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        let eval = |row: &Row| -> i64 {
            row[..self.ncols].iter().zip(point).map(|(a, x)| a * x).sum::<i64>() + row[self.ncols]
        };
        self.eqs.iter().all(|r| eval(r) == 0) && self.ineqs.iter().all(|r| eval(r) >= 0)
    }

    /// Substitutes fixed values for some columns (kept as zero columns).
    pub fn fix(&self, values: &[(usize, i64)]) -> Conj {
        let apply = |row: &Row| -> Row {
            let mut out = row.clone();
            for &(col, v) in values {
                out[self.ncols] += out[col] * v;
                out[col] = 0;
            }
            out
        };
        Conj {
            ncols: self.ncols,
            eqs: self.eqs.iter().map(apply).collect(),
            ineqs: self.ineqs.iter().map(apply).collect(),
        }
    }

    /// When every column is pinned by a unit equality, the unique point.
    pub fn as_point(&self) -> Option<Vec<i64>> {
        let n = self.ncols;
        let mut point: Vec<Option<i64>> = vec![None; n];
        for row in &self.eqs {
            let nz: Vec<usize> = (0..n).filter(|&i| row[i] != 0).collect();
            if nz.len() == 1 && row[nz[0]].abs() == 1 {
                point[nz[0]] = Some(-row[n] * row[nz[0]]);
            }
        }
        let point: Option<Vec<i64>> = point.into_iter().collect();
        point.filter(|p| self.contains(p))
    }

    /// Returns projections `proj[k]` constraining only columns `< k`
    /// (`proj[ncols]` is the conjunction itself). `None` entries mean empty.
    fn projection_ladder(&self) -> Option<Vec<Conj>> {
        let n = self.ncols;
        let mut ladder = vec![self.clone().normalized()?];
        for col in (0..n).rev() {
            let last = ladder.last().unwrap();
            let next = if last.uses_col(col) { last.eliminate(col).0? } else { last.clone() };
            ladder.push(next);
        }
        ladder.reverse();
        // ladder[k] now has columns >= k eliminated.
        Some(ladder)
    }

    /// Bounds on column `col` given fixed values of columns `< col`.
    /// Returns `Err(())` when no integer value can satisfy an equality.
    fn bounds_at(&self, col: usize, prefix: &[i64]) -> Result<(Option<i64>, Option<i64>), ()> {
        let n = self.ncols;
        let rest = |row: &Row| -> i64 {
            row[..col].iter().zip(prefix).map(|(a, x)| a * x).sum::<i64>() + row[n]
        };
        let (mut lo, mut hi): (Option<i64>, Option<i64>) = (None, None);
        for row in &self.eqs {
            let a = row[col];
            if a == 0 {
                if rest(row) != 0 && row[col + 1..n].iter().all(|&c| c == 0) {
                    return Err(());
                }
                continue;
            }
            if row[col + 1..n].iter().any(|&c| c != 0) {
                continue;
            }
            let r = rest(row);
            if r % a != 0 {
                return Err(());
            }
            let v = -r / a;
            lo = Some(lo.map_or(v, |l| l.max(v)));
            hi = Some(hi.map_or(v, |h| h.min(v)));
        }
        for row in &self.ineqs {
            let a = row[col];
            if a == 0 || row[col + 1..n].iter().any(|&c| c != 0) {
                continue;
            }
            let r = rest(row);
            if a > 0 {
                // a·x + r ≥ 0  ⇒  x ≥ ceil(−r / a)
                let v = Integer::div_ceil(&(-r), &a);
                lo = Some(lo.map_or(v, |l| l.max(v)));
            } else {
                let v = Integer::div_floor(&r, &(-a));
                hi = Some(hi.map_or(v, |h| h.min(v)));
            }
        }
        Ok((lo, hi))
    }

    /// Enumerates every integer point, in lexicographic order.
    /// `Err(col)` reports the first column found unbounded.
    pub fn enumerate(&self) -> Result<Vec<Vec<i64>>, usize> {
        let mut out = Vec::new();
        let Some(ladder) = self.projection_ladder() else {
            return Ok(out);
        };
        let mut prefix = Vec::with_capacity(self.ncols);
        enumerate_rec(&ladder, 0, &mut prefix, &mut out)?;
        Ok(out)
    }

    /// Depth-first search for one integer point, clamping unbounded
    /// columns to `[-window, window]` and visiting at most `budget` nodes.
    pub fn find_point(&self, window: i64, budget: usize) -> Search {
        let Some(ladder) = self.projection_ladder() else {
            return Search::NotFound;
        };
        let mut prefix = Vec::with_capacity(self.ncols);
        let mut nodes = 0usize;
        let mut clamped = false;
        match search_rec(&ladder, 0, &mut prefix, window, budget, &mut nodes, &mut clamped) {
            Some(true) => Search::Found(prefix),
            Some(false) if !clamped => Search::NotFound,
            _ => Search::GaveUp,
        }
    }
}

fn enumerate_rec(ladder: &[Conj], col: usize, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) -> Result<(), usize> {
    let n = ladder.len() - 1;
    if col == n {
        if ladder[n].contains(prefix) {
            out.push(prefix.clone());
        }
        return Ok(());
    }
    let (lo, hi) = match ladder[col + 1].bounds_at(col, prefix) {
        Ok(b) => b,
        Err(()) => return Ok(()),
    };
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(col);
    };
    for v in lo..=hi {
        prefix.push(v);
        enumerate_rec(ladder, col + 1, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

fn search_rec(
    ladder: &[Conj],
    col: usize,
    prefix: &mut Vec<i64>,
    window: i64,
    budget: usize,
    nodes: &mut usize,
    clamped: &mut bool,
) -> Option<bool> {
    *nodes += 1;
    if *nodes > budget {
        return None;
    }
    let n = ladder.len() - 1;
    if col == n {
        return Some(ladder[n].contains(prefix));
    }
    let (lo, hi) = match ladder[col + 1].bounds_at(col, prefix) {
        Ok(b) => b,
        Err(()) => return Some(false),
    };
    let lo = lo.unwrap_or_else(|| {
        *clamped = true;
        hi.map_or(-window, |h| h.min(window) - 2 * window)
    });
    let hi = hi.unwrap_or_else(|| {
        *clamped = true;
        lo.max(-window) + 2 * window
    });
    // Try values nearest to zero first so witnesses stay small.
    let mut values: Vec<i64> = (lo..=hi).collect();
    values.sort_by_key(|v| (v.abs(), *v < 0));
    for v in values {
        prefix.push(v);
        match search_rec(ladder, col + 1, prefix, window, budget, nodes, clamped) {
            Some(true) => return Some(true),
            Some(false) => {}
            None => {
                prefix.pop();
                return None;
            }
        }
        prefix.pop();
    }
    Some(false)
}

/// Splits `¬(conj)` into pairwise-disjoint conjunctions:
/// `¬c₁ ∨ (c₁ ∧ ¬c₂) ∨ …`.
pub(crate) fn complement(conj: &Conj) -> Vec<Conj> {
    let n = conj.ncols;
    let mut out = Vec::new();
    let mut prefix = Conj::universe(n);
    let negate_ineq = |row: &Row| -> Row {
        // ¬(e ≥ 0)  ⇔  −e − 1 ≥ 0
        let mut r: Row = row.iter().map(|c| -c).collect();
        r[n] -= 1;
        r
    };
    for row in &conj.eqs {
        if is_zero(&row[..n]) {
            continue;
        }
        let mut above = row.clone();
        above[n] -= 1;
        let mut p = prefix.clone();
        p.add_ineq(above);
        out.push(p);
        // e ≤ −1
        let mut p = prefix.clone();
        p.add_ineq(negate_ineq(row));
        out.push(p);
        prefix.add_eq(row.clone());
    }
    for row in &conj.ineqs {
        let mut p = prefix.clone();
        p.add_ineq(negate_ineq(row));
        out.push(p);
        prefix.add_ineq(row.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ineq(coeffs: &[i64], c: i64) -> Row {
        let mut r = coeffs.to_vec();
        r.push(c);
        r
    }

    #[test]
    fn tightening_detects_integer_gap() {
        // 2i - 1 >= 0 and -2i + 1 >= 0: rationally i = 1/2, no integer.
        let mut c = Conj::universe(1);
        c.add_ineq(ineq(&[2], -1));
        c.add_ineq(ineq(&[-2], 1));
        assert!(c.normalized().is_none());
    }

    #[test]
    fn enumerate_box_in_lex_order() {
        let mut c = Conj::universe(2);
        c.add_ineq(ineq(&[1, 0], 0));
        c.add_ineq(ineq(&[-1, 0], 1));
        c.add_ineq(ineq(&[0, 1], 0));
        c.add_ineq(ineq(&[0, -1], 1));
        let pts = c.enumerate().unwrap();
        assert_eq!(pts, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn enumerate_reports_unbounded_column() {
        let mut c = Conj::universe(1);
        c.add_ineq(ineq(&[1], 0));
        assert_eq!(c.enumerate(), Err(0));
    }

    #[test]
    fn complement_partitions_line() {
        // 0 <= x <= 3 over x in [-5, 8].
        let mut c = Conj::universe(1);
        c.add_ineq(ineq(&[1], 0));
        c.add_ineq(ineq(&[-1], 3));
        let parts = complement(&c);
        for x in -5..=8 {
            let inside = c.contains(&[x]);
            let hits = parts.iter().filter(|p| p.contains(&[x])).count();
            assert_eq!(hits, usize::from(!inside), "x = {x}");
        }
    }

    #[test]
    fn complement_of_equality_is_two_sided() {
        let mut c = Conj::universe(2);
        c.add_eq(ineq(&[1, -1], 0));
        let parts = complement(&c);
        for x in -3..=3 {
            for y in -3..=3 {
                let hits = parts.iter().filter(|p| p.contains(&[x, y])).count();
                assert_eq!(hits, usize::from(x != y));
            }
        }
    }
}

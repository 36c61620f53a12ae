//! Elementary loop transformations on one statement's schedule rows.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::affine::AffineExpr;

/// One move, indexed by position among the statement's loop rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Swap(usize, usize),
    Reverse(usize),
    /// `target += factor * source`.
    Skew { target: usize, source: usize, factor: i64 },
    Shift(usize),
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Swap(a, b) => write!(f, "interchange({a},{b})"),
            Move::Reverse(a) => write!(f, "reverse({a})"),
            Move::Skew { target, source, factor } => write!(f, "skew({target}{}{source})", if *factor > 0 { "+=" } else { "-=" }),
            Move::Shift(a) => write!(f, "shift({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub rows: Vec<AffineExpr>,
    pub moves: Vec<Move>,
}

/// Positions of rows that mention an iterator.
pub fn loop_positions(rows: &[AffineExpr], iterators: &[String]) -> Vec<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| iterators.iter().any(|i| r.uses(i)))
        .map(|(k, _)| k)
        .collect()
}

pub fn apply(rows: &[AffineExpr], loops: &[usize], m: Move) -> Vec<AffineExpr> {
    let mut out = rows.to_vec();
    match m {
        Move::Swap(a, b) => out.swap(loops[a], loops[b]),
        Move::Reverse(a) => out[loops[a]] = -out[loops[a]].clone(),
        Move::Skew { target, source, factor } => out[loops[target]] = out[loops[target]].clone() + out[loops[source]].clone() * factor,
        Move::Shift(a) => out[loops[a]].add_constant(1),
    }
    out
}

fn all_moves(n: usize) -> Vec<Move> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            out.push(Move::Swap(a, b));
        }
    }
    out.extend((0..n).map(Move::Reverse));
    for target in 0..n {
        for source in 0..n {
            if target != source {
                out.push(Move::Skew { target, source, factor: 1 });
                out.push(Move::Skew { target, source, factor: -1 });
            }
        }
    }
    out.extend((0..n).map(Move::Shift));
    out
}

/// Ordering key preferring small, positive coefficients.
pub fn encoding(rows: &[AffineExpr], iterators: &[String]) -> Vec<(u64, bool)> {
    let mut key = Vec::new();
    for r in rows {
        for i in iterators {
            let c = r.coeff(i);
            key.push((c.unsigned_abs(), c < 0));
        }
        let c = r.constant_term();
        key.push((c.unsigned_abs(), c < 0));
    }
    key
}

/// Every distinct row list reachable with at most `depth` moves, fewest
/// moves first, then by [`encoding`]. The input rows come first.
pub fn candidates(rows: &[AffineExpr], iterators: &[String], depth: usize) -> Vec<Candidate> {
    let loops = loop_positions(rows, iterators);
    let moves = all_moves(loops.len());
    let mut seen: BTreeMap<Vec<AffineExpr>, Vec<Move>> = BTreeMap::new();
    seen.insert(rows.to_vec(), Vec::new());
    let mut queue = VecDeque::from([(rows.to_vec(), Vec::new())]);
    while let Some((cur, path)) = queue.pop_front() {
        if path.len() == depth {
            continue;
        }
        for &m in &moves {
            let next = apply(&cur, &loops, m);
            if seen.contains_key(&next) {
                continue;
            }
            let mut p = path.clone();
            p.push(m);
            seen.insert(next.clone(), p.clone());
            queue.push_back((next, p));
        }
    }
    let mut out: Vec<Candidate> = seen.into_iter().map(|(rows, moves)| Candidate { rows, moves }).collect();
    out.sort_by_cached_key(|c| (c.moves.len(), encoding(&c.rows, iterators)));
    out
}

/// Square integer matrix of the loop rows over `iterators` plus their
/// constant offsets; `None` when a row mentions another name.
pub fn loop_matrix(rows: &[AffineExpr], iterators: &[String]) -> Option<(Vec<Vec<i64>>, Vec<i64>)> {
    let mut m = Vec::new();
    let mut off = Vec::new();
    for k in loop_positions(rows, iterators) {
        let r = &rows[k];
        if r.names().any(|n| !iterators.iter().any(|i| i == n)) {
            return None;
        }
        m.push(iterators.iter().map(|i| r.coeff(i)).collect());
        off.push(r.constant_term());
    }
    Some((m, off))
}

fn det(m: &[Vec<i64>]) -> i64 {
    match m.len() {
        0 => 1,
        1 => m[0][0],
        n => (0..n)
            .map(|c| {
                let minor: Vec<Vec<i64>> = m[1..].iter().map(|r| r.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, v)| *v).collect()).collect();
                let s = if c % 2 == 0 { 1 } else { -1 };
                s * m[0][c] * det(&minor)
            })
            .sum(),
    }
}

/// Integer inverse of a square matrix with determinant ±1.
pub fn unimodular_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return None;
    }
    let d = det(m);
    if d.abs() != 1 {
        return None;
    }
    let mut inv = vec![vec![0; n]; n];
    for (r, row) in m.iter().enumerate() {
        for c in 0..row.len() {
            let minor: Vec<Vec<i64>> = m
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != r)
                .map(|(_, row)| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, v)| *v).collect())
                .collect();
            let s = if (r + c) % 2 == 0 { 1 } else { -1 };
            inv[c][r] = s * det(&minor) * d;
        }
    }
    Some(inv)
}

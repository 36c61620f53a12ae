//! Bounded search over per-statement loop transformations.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::legality::{carried_at, checked, classification_sets, classify_statement, dep_rows, find_in, violation_pieces};
use super::transform::{candidates, Move};
use super::{classify_dims, validate, Condition, DimClass, DimClassification, LegalityMode, Schedule, ScheduleError};
use crate::affine::{AffineError, AffineExpr, Bindings};
use crate::deps::{Dependence, DependenceSet};
use crate::ir::Scop;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchConfig {
    /// Maximum number of moves applied to one statement.
    pub depth: usize,
    /// Maximum number of emptiness checks.
    pub budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { depth: 2, budget: 50_000 }
    }
}

/// Quality of a schedule, summed over statements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Score {
    /// Leading loops that are parallel.
    pub parallel: usize,
    /// Leading loops that are parallel or reduction-parallel.
    pub parallel_or_reduction: usize,
    /// Statements whose outermost non-sequential loop needs privatization.
    pub privatized: usize,
}

impl Score {
    fn key(&self) -> (usize, usize, std::cmp::Reverse<usize>) {
        (self.parallel, self.parallel_or_reduction, std::cmp::Reverse(self.privatized))
    }

    fn bound_key(&self) -> (usize, usize) {
        (self.parallel, self.parallel_or_reduction)
    }

    fn of(loops: &[DimClass]) -> Score {
        let parallel = loops.iter().take_while(|c| **c == DimClass::Parallel).count();
        let parallel_or_reduction = loops.iter().take_while(|c| **c != DimClass::Sequential).count();
        let privatized = usize::from(loops.iter().find(|c| **c != DimClass::Sequential) == Some(&DimClass::ReductionParallel));
        Score { parallel, parallel_or_reduction, privatized }
    }
}

impl std::ops::Add for Score {
    type Output = Score;
    fn add(self, o: Score) -> Score {
        Score {
            parallel: self.parallel + o.parallel,
            parallel_or_reduction: self.parallel_or_reduction + o.parallel_or_reduction,
            privatized: self.privatized + o.privatized,
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} parallel, {} parallel or reduction-parallel, {} privatized", self.parallel, self.parallel_or_reduction, self.privatized)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome {
    pub mode: LegalityMode,
    pub schedule: Schedule,
    pub classification: DimClassification,
    pub score: Score,
    /// Moves applied to each statement's original rows.
    pub moves: Vec<Vec<Move>>,
    /// Emptiness checks performed.
    pub checks: usize,
    /// The budget ran out and the original schedule was returned.
    pub exhausted: bool,
    pub diagnostic: Option<String>,
}

enum Fail {
    Budget,
    Affine(AffineError),
}

impl From<AffineError> for Fail {
    fn from(e: AffineError) -> Self {
        Fail::Affine(e)
    }
}

type RowKey = (usize, Vec<AffineExpr>, Vec<AffineExpr>);

/// Memoized emptiness queries with a budget.
struct Oracle<'a> {
    scop: &'a Scop,
    bindings: Option<&'a Bindings>,
    budget: usize,
    checks: usize,
    legal: HashMap<RowKey, bool>,
    carried: HashMap<(RowKey, usize), bool>,
}

fn dep_id(d: &Dependence) -> usize {
    d as *const Dependence as usize
}

impl<'a> Oracle<'a> {
    fn spend(&mut self) -> Result<(), Fail> {
        if self.checks >= self.budget {
            return Err(Fail::Budget);
        }
        self.checks += 1;
        Ok(())
    }

    fn legal(&mut self, sched: &Schedule, d: &Dependence, cond: Condition) -> Result<bool, Fail> {
        let key = (dep_id(d), sched.rows(d.source).to_vec(), sched.rows(d.target).to_vec());
        if let Some(v) = self.legal.get(&key) {
            return Ok(*v);
        }
        self.spend()?;
        let (src, tgt) = dep_rows(self.scop, sched, d);
        let ok = find_in(&d.relation, &violation_pieces(&src, &tgt, cond), self.bindings)?.is_none();
        self.legal.insert(key, ok);
        Ok(ok)
    }

    fn carried(&mut self, sched: &Schedule, d: &Dependence, k: usize) -> Result<bool, Fail> {
        let key = ((dep_id(d), sched.rows(d.source).to_vec(), sched.rows(d.target).to_vec()), k);
        if let Some(v) = self.carried.get(&key) {
            return Ok(*v);
        }
        self.spend()?;
        let v = carried_at(self.scop, sched, d, k, self.bindings)?;
        self.carried.insert(key, v);
        Ok(v)
    }

    fn score(&mut self, sched: &Schedule, stmt: usize, blocking: &[&Dependence], reduction: &[&Dependence]) -> Result<Score, Fail> {
        let mut fail = None;
        let dims = classify_statement(self.scop, sched, stmt, blocking, reduction, |d, k| match self.carried(sched, d, k) {
            Ok(v) => Ok(v),
            Err(e) => {
                fail = Some(e);
                // Stop the scan; the outcome is discarded.
                Ok(true)
            }
        })?;
        if let Some(e) = fail {
            return Err(e);
        }
        let loops: Vec<DimClass> = dims.iter().filter(|d| d.is_loop).map(|d| d.class).collect();
        Ok(Score::of(&loops))
    }
}

struct Choice {
    rows: Vec<AffineExpr>,
    moves: Vec<Move>,
    alone: Score,
}

struct Component<'s, 'd> {
    stmts: Vec<usize>,
    options: &'s [Vec<Choice>],
    checks: &'s [(usize, usize, &'d Dependence, Condition)],
    blocking: &'s [&'d Dependence],
    reduction: &'s [&'d Dependence],
}

struct Best {
    choice: Vec<usize>,
    score: Score,
}

fn dfs(oracle: &mut Oracle<'_>, comp: &Component<'_, '_>, sched: &mut Schedule, choice: &mut Vec<usize>, best: &mut Option<Best>) -> Result<(), Fail> {
    let depth = choice.len();
    if depth == comp.stmts.len() {
        let mut score = Score::default();
        for &s in &comp.stmts {
            score = score + oracle.score(sched, s, comp.blocking, comp.reduction)?;
        }
        if best.as_ref().map_or(true, |b| score.key() > b.score.key()) {
            *best = Some(Best { choice: choice.clone(), score });
        }
        return Ok(());
    }
    let stmt = comp.stmts[depth];
    let assigned = &comp.stmts[..depth];
    for (idx, opt) in comp.options[stmt].iter().enumerate() {
        let mut bound = opt.alone;
        for (k, &s) in comp.stmts.iter().enumerate() {
            if k < depth {
                bound = bound + comp.options[s][choice[k]].alone;
            } else if k > depth {
                bound = bound + comp.options[s][0].alone;
            }
        }
        if let Some(b) = best {
            if bound.bound_key() < b.score.bound_key() || (bound.bound_key() == b.score.bound_key() && b.score.privatized == 0) {
                // Options are sorted by their standalone score, so no later
                // one can do better either.
                break;
            }
        }
        *sched = sched.with_rows(stmt, opt.rows.clone());
        let mut ok = true;
        for &(src, tgt, d, cond) in comp.checks {
            let relevant = (src == stmt && (tgt == stmt || assigned.contains(&tgt))) || (tgt == stmt && assigned.contains(&src));
            if relevant && src != tgt && !oracle.legal(sched, d, cond)? {
                ok = false;
                break;
            }
        }
        if ok {
            choice.push(idx);
            dfs(oracle, comp, sched, choice, best)?;
            choice.pop();
        }
    }
    Ok(())
}

/// Searches the transformation family for the best legal schedule under
/// `mode`. Statements linked by checked dependences are searched jointly.
pub fn search(scop: &Scop, deps: &DependenceSet, mode: LegalityMode, config: SearchConfig) -> Result<SearchOutcome, ScheduleError> {
    let base = scop.original_schedule();
    let checked_deps = checked(deps, mode)?;
    let (blocking, reduction) = classification_sets(deps, mode)?;
    let mut oracle = Oracle { scop, bindings: deps.bindings.as_ref(), budget: config.budget, checks: 0, legal: HashMap::new(), carried: HashMap::new() };
    let checks: Vec<(usize, usize, &Dependence, Condition)> = checked_deps.iter().map(|(_, d, c)| (d.source, d.target, *d, *c)).collect();
    let n = scop.statements.len();

    let fallback = |checks: usize, reason: String| -> Result<SearchOutcome, ScheduleError> {
        let classification = classify_dims(scop, &base, deps, mode)?;
        let score = (0..n).map(|s| Score::of(&classification.loops(s))).fold(Score::default(), |a, b| a + b);
        Ok(SearchOutcome { mode, schedule: base.clone(), classification, score, moves: vec![Vec::new(); n], checks, exhausted: true, diagnostic: Some(reason) })
    };

    let run = |oracle: &mut Oracle<'_>| -> Result<(Schedule, Vec<Vec<Move>>), Fail> {
        // Standalone options per statement: legal on self dependences,
        // scored on them alone.
        let mut options: Vec<Vec<Choice>> = Vec::new();
        for (s, st) in scop.statements.iter().enumerate() {
            let own_blocking: Vec<&Dependence> = blocking.iter().copied().filter(|d| d.source == s && d.target == s).collect();
            let own_reduction: Vec<&Dependence> = reduction.iter().copied().filter(|d| d.source == s && d.target == s).collect();
            let mut opts = Vec::new();
            for c in candidates(base.rows(s), &st.iterators, config.depth) {
                let sched = base.with_rows(s, c.rows.clone());
                let mut ok = true;
                for &(src, tgt, d, cond) in &checks {
                    if src == s && tgt == s && !oracle.legal(&sched, d, cond)? {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    let alone = oracle.score(&sched, s, &own_blocking, &own_reduction)?;
                    opts.push(Choice { rows: c.rows, moves: c.moves, alone });
                }
            }
            // Stable: keeps fewest moves, then encoding, within a score.
            opts.sort_by(|a, b| b.alone.key().cmp(&a.alone.key()));
            options.push(opts);
        }

        // Components of the statement graph.
        let mut comp: Vec<usize> = (0..n).collect();
        fn root(c: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while c[r] != r {
                r = c[r];
            }
            c[x] = r;
            r
        }
        for &(s, t, _, _) in &checks {
            let (a, b) = (root(&mut comp, s), root(&mut comp, t));
            comp[a.max(b)] = a.min(b);
        }
        let mut sched = base.clone();
        let mut moves = vec![Vec::new(); n];
        for r in 0..n {
            let stmts: Vec<usize> = (0..n).filter(|&s| root(&mut comp, s) == r).collect();
            if stmts.is_empty() {
                continue;
            }
            let members = |d: &&Dependence| stmts.contains(&d.source) || stmts.contains(&d.target);
            let comp_checks: Vec<_> = checks.iter().copied().filter(|(s, t, _, _)| stmts.contains(s) || stmts.contains(t)).collect();
            let comp_blocking: Vec<&Dependence> = blocking.iter().copied().filter(members).collect();
            let comp_reduction: Vec<&Dependence> = reduction.iter().copied().filter(members).collect();
            let component = Component { stmts: stmts.clone(), options: &options, checks: &comp_checks, blocking: &comp_blocking, reduction: &comp_reduction };
            let mut best = None;
            let mut work = sched.clone();
            dfs(oracle, &component, &mut work, &mut Vec::new(), &mut best)?;
            // The original rows are always legal, so a choice exists.
            let best = best.expect("original schedule is legal");
            for (k, &s) in stmts.iter().enumerate() {
                let opt = &options[s][best.choice[k]];
                sched = sched.with_rows(s, opt.rows.clone());
                moves[s] = opt.moves.clone();
            }
        }
        Ok((sched, moves))
    };

    match run(&mut oracle) {
        Ok((schedule, moves)) => {
            validate(scop, &schedule, deps, mode)?;
            let classification = classify_dims(scop, &schedule, deps, mode)?;
            let score = (0..n).map(|s| Score::of(&classification.loops(s))).fold(Score::default(), |a, b| a + b);
            Ok(SearchOutcome { mode, schedule, classification, score, moves, checks: oracle.checks, exhausted: false, diagnostic: None })
        }
        Err(Fail::Affine(e)) => Err(e.into()),
        Err(Fail::Budget) => fallback(oracle.checks, format!("search budget of {} emptiness checks exhausted; keeping the original schedule", config.budget)),
    }
}

/// Schedules varying one statement over the family, the others kept at
/// their original rows.
pub fn statement_candidates(scop: &Scop, stmt: usize, depth: usize) -> Vec<Schedule> {
    let base = scop.original_schedule();
    candidates(base.rows(stmt), &scop.statements[stmt].iterators, depth).into_iter().map(|c| base.with_rows(stmt, c.rows)).collect()
}

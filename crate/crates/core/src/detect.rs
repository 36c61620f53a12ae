//! Detection of reduction-like computations inside polyhedral statements.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::affine::AffineError;
use crate::ir::{IrError, ranges_overlap, triple_overlap, AccessRange, InstId, InstKind, Operand, Operator, Scop, Statement};

/// How the value of one load reaches an instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowSymbol {
    /// Not used.
    Bottom,
    /// Loaded, not yet combined.
    Loaded,
    /// Possibly used in a non-reduction way.
    Top,
    /// Flowed through exactly one chain of this operator.
    Op(Operator),
}

impl fmt::Display for FlowSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowSymbol::Bottom => f.write_str("⊥"),
            FlowSymbol::Loaded => f.write_str("↑"),
            FlowSymbol::Top => f.write_str("⊤"),
            FlowSymbol::Op(op) => write!(f, "{op}"),
        }
    }
}

/// Symbol per load of the statement, keyed by load id.
pub type FlowState = BTreeMap<InstId, FlowSymbol>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionInfo {
    pub statement: usize,
    pub load: InstId,
    pub operator: Operator,
    pub store: InstId,
}

/// Computes `t_S` for every instruction of one statement.
pub struct FlowAnalysis<'a> {
    stmt: &'a Statement,
    ranges: BTreeMap<InstId, AccessRange>,
    states: Vec<FlowState>,
}

impl<'a> FlowAnalysis<'a> {
    pub fn new(scop: &'a Scop, stmt: usize) -> Result<Self, IrError> {
        let s = &scop.statements[stmt];
        let mut ranges = BTreeMap::new();
        for inst in s.accesses() {
            ranges.insert(inst.id, scop.access_range(stmt, inst.id)?);
        }
        Ok(Self::with_ranges(s, ranges)?)
    }

    /// Uses precomputed ranges for every access of `stmt`.
    pub fn with_ranges(stmt: &'a Statement, ranges: BTreeMap<InstId, AccessRange>) -> Result<Self, AffineError> {
        let mut a = FlowAnalysis { stmt, ranges, states: Vec::new() };
        for inst in &stmt.instructions {
            let st = a.transfer(inst.id)?;
            a.states.push(st);
        }
        Ok(a)
    }

    pub fn flow(&self, inst: InstId) -> &FlowState {
        &self.states[inst]
    }

    fn loads(&self) -> impl Iterator<Item = InstId> + '_ {
        self.stmt.loads().map(|l| l.id)
    }

    fn operand_state(&self, o: &Operand, l: InstId) -> FlowSymbol {
        match o {
            Operand::Inst(id) => self.states[*id][&l],
            Operand::Const(_) | Operand::Affine(_) => FlowSymbol::Bottom,
        }
    }

    fn transfer(&self, id: InstId) -> Result<FlowState, AffineError> {
        use FlowSymbol::*;
        let inst = &self.stmt.instructions[id];
        let mut out = FlowState::new();
        match &inst.kind {
            InstKind::Load { .. } => {
                for l in self.loads() {
                    let sym = if l != id {
                        Bottom
                    } else if self.stmt.has_outside_uses(id) {
                        Top
                    } else {
                        Loaded
                    };
                    out.insert(l, sym);
                }
            }
            InstKind::BinOp { operator, lhs, rhs } => {
                for l in self.loads() {
                    let (a, b) = (self.operand_state(lhs, l), self.operand_state(rhs, l));
                    let pair = |x: FlowSymbol, y: FlowSymbol| (a == x && b == y) || (a == y && b == x);
                    let sym = if pair(Bottom, Bottom) {
                        Bottom
                    } else if !(operator.is_commutative() && operator.is_associative()) || self.stmt.has_outside_uses(id) {
                        Top
                    } else if pair(Loaded, Bottom) || pair(Op(*operator), Bottom) {
                        Op(*operator)
                    } else {
                        Top
                    };
                    out.insert(l, sym);
                }
            }
            InstKind::Store { value, .. } => {
                let store_range = &self.ranges[&id];
                for l in self.loads() {
                    let sym = if !matches!(value, Operand::Inst(_)) {
                        Bottom
                    } else if !ranges_overlap(&self.ranges[&l], store_range)?.0 {
                        Top
                    } else if self.shadowed(l, store_range)? {
                        Top
                    } else {
                        self.operand_state(value, l)
                    };
                    out.insert(l, sym);
                }
            }
        }
        Ok(out)
    }

    /// Another load touches memory shared by `l` and the store.
    fn shadowed(&self, l: InstId, store_range: &AccessRange) -> Result<bool, AffineError> {
        for other in self.loads() {
            if other != l && triple_overlap(&self.ranges[&other], &self.ranges[&l], store_range)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Symbol of `l` in the value written by `store`, before the store's own
    /// range checks.
    fn stored_value_state(&self, store: InstId, l: InstId) -> FlowSymbol {
        match &self.stmt.instructions[store].kind {
            InstKind::Store { value, .. } => self.operand_state(value, l),
            _ => FlowSymbol::Bottom,
        }
    }

    /// Reduction-like computations of this statement, in load order.
    pub fn reductions(&self, stmt_index: usize) -> Result<Vec<ReductionInfo>, AffineError> {
        let stores: Vec<InstId> = self.stmt.stores().map(|s| s.id).collect();
        let mut found: Vec<ReductionInfo> = Vec::new();
        for l in self.loads() {
            for &s in &stores {
                let FlowSymbol::Op(op) = self.states[s][&l] else { continue };
                if !(op.is_associative() && op.is_commutative()) {
                    continue;
                }
                let mut valid = true;
                for &other in stores.iter().filter(|&&o| o != s) {
                    // The value of `l` must not escape into another store, and
                    // that store must not touch the reduction location.
                    if self.stored_value_state(other, l) != FlowSymbol::Bottom
                        || triple_overlap(&self.ranges[&other], &self.ranges[&s], &self.ranges[&l])?
                    {
                        valid = false;
                        break;
                    }
                }
                if !valid {
                    continue;
                }
                // Reductions on overlapping locations: keep the first.
                let mut clash = false;
                for r in &found {
                    if ranges_overlap(&self.ranges[&r.store], &self.ranges[&s])?.0 {
                        clash = true;
                        break;
                    }
                }
                if !clash {
                    found.push(ReductionInfo { statement: stmt_index, load: l, operator: op, store: s });
                }
            }
        }
        Ok(found)
    }
}

/// All reduction-like computations of the SCoP, by statement then load.
pub fn detect(scop: &Scop) -> Result<Vec<ReductionInfo>, IrError> {
    let mut out = Vec::new();
    for idx in 0..scop.statements.len() {
        out.extend(FlowAnalysis::new(scop, idx)?.reductions(idx)?);
    }
    Ok(out)
}

/// Human-readable quadruple.
pub fn describe(scop: &Scop, r: &ReductionInfo) -> String {
    let s = &scop.statements[r.statement];
    format!("({}, load {}, {}, store {})", s.name, s.access_text(r.load), r.operator, s.access_text(r.store))
}

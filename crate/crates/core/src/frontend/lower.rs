//! Lowering of the syntax tree to SCoP IR.

use std::collections::{BTreeMap, BTreeSet};

use super::syntax::{Decl, Expr, ExprKind, Item, Pos, Program};
use super::FrontendError;
use crate::affine::{AffineExpr, Constraint, IntSet, Space};
use crate::ir::{ArrayDecl, InstKind, Instruction, Node, Operand, Operator, Scop, Statement};

struct Env<'a> {
    params: &'a [String],
    arrays: &'a BTreeMap<String, ArrayDecl>,
    /// Source iterator name → value in normalized iterators.
    iters: Vec<(String, AffineExpr)>,
}

fn err_at(pos: Pos, msg: impl Into<String>) -> FrontendError {
    FrontendError::Semantic { line: pos.line, col: pos.col, msg: msg.into() }
}

impl Env<'_> {
    fn iterator(&self, name: &str) -> Option<&AffineExpr> {
        self.iters.iter().rev().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    fn affine(&self, e: &Expr) -> Result<AffineExpr, FrontendError> {
        let non_affine = |msg: &str| FrontendError::NonAffine { line: e.pos.line, col: e.pos.col, msg: msg.to_string() };
        match &e.kind {
            ExprKind::Num(v) => Ok(AffineExpr::constant(*v)),
            ExprKind::Ident(name) => {
                if let Some(v) = self.iterator(name) {
                    Ok(v.clone())
                } else if self.params.contains(name) {
                    Ok(AffineExpr::var(name))
                } else if self.arrays.contains_key(name) {
                    Err(non_affine(&format!("`{name}` is an array, not an affine term")))
                } else {
                    Err(FrontendError::UnknownIdent { line: e.pos.line, col: e.pos.col, name: name.clone() })
                }
            }
            ExprKind::Index(name, _) => Err(non_affine(&format!("array read `{name}[..]` in an affine position"))),
            ExprKind::Neg(inner) => Ok(-self.affine(inner)?),
            ExprKind::Bin(op, a, b) => {
                let (a, b) = (self.affine(a)?, self.affine(b)?);
                match op {
                    Operator::Add => Ok(a + b),
                    Operator::Sub => Ok(a - b),
                    Operator::Mul if a.is_constant() => Ok(b * a.constant_term()),
                    Operator::Mul if b.is_constant() => Ok(a * b.constant_term()),
                    Operator::Mul => Err(non_affine("product of two non-constant terms")),
                    _ => Err(non_affine(&format!("operator `{op}` is not affine"))),
                }
            }
        }
    }
}

struct StmtBuilder {
    insts: Vec<Instruction>,
}

impl StmtBuilder {
    fn push(&mut self, kind: InstKind) -> usize {
        let id = self.insts.len();
        self.insts.push(Instruction { id, kind });
        id
    }

    fn subscripts(&self, env: &Env, array: &str, subs: &[Expr], pos: Pos) -> Result<Vec<AffineExpr>, FrontendError> {
        let decl = env.arrays.get(array).ok_or(FrontendError::UnknownIdent { line: pos.line, col: pos.col, name: array.to_string() })?;
        if decl.rank() != subs.len() {
            return Err(err_at(pos, format!("`{array}` has {} dimension(s), indexed with {}", decl.rank(), subs.len())));
        }
        subs.iter().map(|s| env.affine(s)).collect()
    }

    fn value(&mut self, env: &Env, e: &Expr) -> Result<Operand, FrontendError> {
        // Pure affine subtrees fold into one operand.
        if !reads_memory(e, env) {
            if let Ok(a) = env.affine(e) {
                return Ok(if a.is_constant() { Operand::Const(a.constant_term()) } else { Operand::Affine(a) });
            }
        }
        match &e.kind {
            ExprKind::Num(v) => Ok(Operand::Const(*v)),
            ExprKind::Ident(name) => {
                if env.iterator(name).is_some() || env.params.contains(name) {
                    return Ok(Operand::Affine(env.affine(e)?));
                }
                let subscripts = self.subscripts(env, name, &[], e.pos)?;
                Ok(Operand::Inst(self.push(InstKind::Load { array: name.clone(), subscripts })))
            }
            ExprKind::Index(name, subs) => {
                let subscripts = self.subscripts(env, name, subs, e.pos)?;
                Ok(Operand::Inst(self.push(InstKind::Load { array: name.clone(), subscripts })))
            }
            ExprKind::Neg(inner) => {
                let v = self.value(env, inner)?;
                Ok(Operand::Inst(self.push(InstKind::BinOp { operator: Operator::Sub, lhs: Operand::Const(0), rhs: v })))
            }
            ExprKind::Bin(op, a, b) => {
                let lhs = self.value(env, a)?;
                let rhs = self.value(env, b)?;
                Ok(Operand::Inst(self.push(InstKind::BinOp { operator: *op, lhs, rhs })))
            }
        }
    }
}

fn reads_memory(e: &Expr, env: &Env) -> bool {
    match &e.kind {
        ExprKind::Num(_) => false,
        ExprKind::Ident(n) => env.arrays.contains_key(n) && env.iterator(n).is_none(),
        ExprKind::Index(..) => true,
        ExprKind::Neg(a) => reads_memory(a, env),
        ExprKind::Bin(_, a, b) => reads_memory(a, env) || reads_memory(b, env),
    }
}

struct Lowerer<'a> {
    env: Env<'a>,
    fuse: bool,
    domain: Vec<Constraint>,
    statements: Vec<Statement>,
    labels: BTreeSet<String>,
    source_count: usize,
}

struct Pending {
    labels: Vec<String>,
    insts: Vec<Instruction>,
}

impl Lowerer<'_> {
    fn block(&mut self, items: &[Item], beta: &mut Vec<i64>) -> Result<Vec<Node>, FrontendError> {
        let mut nodes = Vec::new();
        let mut pending: Option<Pending> = None;
        let mut slot = 0i64;
        for item in items {
            match item {
                Item::Decl(d) => return Err(err_at(d.pos, "declarations are only allowed at the top of the scop")),
                Item::Loop { iter, lower, upper, inclusive, body, pos } => {
                    if let Some(p) = pending.take() {
                        nodes.push(self.finish(p, beta, slot));
                        slot += 1;
                    }
                    if self.env.iterator(iter).is_some() || self.env.params.contains(iter) || self.env.arrays.contains_key(iter) {
                        return Err(err_at(*pos, format!("loop iterator `{iter}` shadows another name")));
                    }
                    let lb = self.env.affine(lower)?;
                    let mut ub = self.env.affine(upper)?;
                    if *inclusive {
                        ub = ub + AffineExpr::constant(1);
                    }
                    let extent = ub - lb.clone();
                    self.env.iters.push((iter.clone(), AffineExpr::var(iter) + lb));
                    self.domain.push(Constraint::ge(AffineExpr::var(iter), AffineExpr::constant(0)));
                    self.domain.push(Constraint::lt(AffineExpr::var(iter), extent.clone()));
                    beta.push(slot);
                    let inner = self.block(body, beta)?;
                    beta.pop();
                    self.domain.truncate(self.domain.len() - 2);
                    self.env.iters.pop();
                    nodes.push(Node::Loop { iterator: iter.clone(), upper: extent, body: inner });
                    slot += 1;
                }
                Item::Assign { label, array, subs, op, value, pos } => {
                    let name = match label {
                        Some(l) => l.clone(),
                        None => format!("S{}", self.source_count),
                    };
                    self.source_count += 1;
                    if !self.labels.insert(name.clone()) {
                        return Err(err_at(*pos, format!("duplicate statement label `{name}`")));
                    }
                    let mut b = StmtBuilder { insts: Vec::new() };
                    let subscripts = b.subscripts(&self.env, array, subs, *pos)?;
                    let stored = match op {
                        Some(op) => {
                            let cur = b.push(InstKind::Load { array: array.clone(), subscripts: subscripts.clone() });
                            let rhs = b.value(&self.env, value)?;
                            Operand::Inst(b.push(InstKind::BinOp { operator: *op, lhs: Operand::Inst(cur), rhs }))
                        }
                        None => b.value(&self.env, value)?,
                    };
                    b.push(InstKind::Store { value: stored, array: array.clone(), subscripts });
                    match pending.as_mut() {
                        Some(p) if self.fuse => {
                            let offset = p.insts.len();
                            p.insts.extend(b.insts.into_iter().map(|i| shift(i, offset)));
                            p.labels.push(name);
                        }
                        _ => {
                            if let Some(p) = pending.take() {
                                nodes.push(self.finish(p, beta, slot));
                                slot += 1;
                            }
                            pending = Some(Pending { labels: vec![name], insts: b.insts });
                        }
                    }
                }
            }
        }
        if let Some(p) = pending.take() {
            nodes.push(self.finish(p, beta, slot));
        }
        Ok(nodes)
    }

    fn finish(&mut self, p: Pending, beta: &[i64], slot: i64) -> Node {
        let iterators: Vec<String> = self.env.iters.iter().map(|(n, _)| n.clone()).collect();
        let space = Space::new(iterators.clone(), self.env.params.to_vec());
        let domain = IntSet::from_constraints(space, &self.domain).expect("loop bounds use declared names");
        let mut full_beta = beta.to_vec();
        full_beta.push(slot);
        let idx = self.statements.len();
        self.statements.push(Statement {
            name: p.labels.join("_"),
            labels: p.labels,
            iterators,
            domain,
            instructions: p.insts,
            position: idx,
            beta: full_beta,
            outside_uses: BTreeSet::new(),
        });
        Node::Stmt(idx)
    }
}

fn shift(mut inst: Instruction, offset: usize) -> Instruction {
    inst.id += offset;
    let fix = |o: &mut Operand| {
        if let Operand::Inst(r) = o {
            *r += offset;
        }
    };
    match &mut inst.kind {
        InstKind::Load { .. } => {}
        InstKind::BinOp { lhs, rhs, .. } => {
            fix(lhs);
            fix(rhs);
        }
        InstKind::Store { value, .. } => fix(value),
    }
    inst
}

fn declare(params: &[String], decls: &[&Decl]) -> Result<BTreeMap<String, ArrayDecl>, FrontendError> {
    let env_arrays = BTreeMap::new();
    let env = Env { params, arrays: &env_arrays, iters: Vec::new() };
    let mut arrays = BTreeMap::new();
    for d in decls {
        if params.contains(&d.name) || arrays.contains_key(&d.name) {
            return Err(err_at(d.pos, format!("`{}` is declared twice", d.name)));
        }
        let extents = d.extents.iter().map(|e| e.as_ref().map(|e| env.affine(e)).transpose()).collect::<Result<_, _>>()?;
        arrays.insert(d.name.clone(), ArrayDecl { name: d.name.clone(), extents });
    }
    Ok(arrays)
}

pub fn lower(program: &Program, fuse: bool) -> Result<Scop, FrontendError> {
    let decls: Vec<&Decl> = program
        .body
        .iter()
        .filter_map(|i| match i {
            Item::Decl(d) => Some(d),
            _ => None,
        })
        .collect();
    let mut seen = BTreeSet::new();
    for p in &program.params {
        if !seen.insert(p) {
            return Err(FrontendError::Semantic { line: 1, col: 1, msg: format!("parameter `{p}` listed twice") });
        }
    }
    let arrays = declare(&program.params, &decls)?;
    let body: Vec<Item> = program.body.iter().filter(|i| !matches!(i, Item::Decl(_))).cloned().collect();
    let mut l = Lowerer {
        env: Env { params: &program.params, arrays: &arrays, iters: Vec::new() },
        fuse,
        domain: Vec::new(),
        statements: Vec::new(),
        labels: BTreeSet::new(),
        source_count: 0,
    };
    let tree = l.block(&body, &mut Vec::new())?;
    let statements = l.statements;
    let arrays = decls.iter().map(|d| arrays[&d.name].clone()).collect();
    Ok(Scop { name: program.name.clone(), params: program.params.clone(), arrays, statements, tree, fused: fuse })
}

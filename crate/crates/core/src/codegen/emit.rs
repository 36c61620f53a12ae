//! C text for a regenerated, possibly privatized loop nest.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::plan::{PrivatizationPlan, PrivatizedReduction};
use super::tree::{substitute, Bound, StmtSpace, Tree};
use super::CodegenError;
use crate::affine::{AffineExpr, Constraint, ConstraintKind};
use crate::ir::{InstKind, Operand, Operator, Scop, Statement};
use crate::schedule::{DimClassification, LegalityMode, Schedule};

#[derive(Default)]
struct Uses {
    min: bool,
    max: bool,
    floord: bool,
    ceild: bool,
    limits: bool,
    omp: bool,
}

/// Structural item of the emitted body.
enum Item {
    Line(String),
    Block { head: String, pragma: Option<String>, body: Vec<Item> },
}

struct Emitter<'a> {
    scop: &'a Scop,
    plan: &'a PrivatizationPlan,
    spaces: &'a BTreeMap<usize, StmtSpace>,
    uses: Uses,
    /// (privatized index, init count, aggregate count) for the structural check.
    inits: Vec<usize>,
    aggregates: Vec<usize>,
}

fn needs_parens(e: &AffineExpr) -> bool {
    e.terms().count() + usize::from(e.constant_term() != 0) > 1 || e.constant_term() < 0 || e.terms().any(|(_, c)| c != 1)
}

fn bound_text(b: &Bound, uses: &mut Uses) -> String {
    match b {
        Bound::Affine(e) => e.to_string(),
        Bound::Ceil(e, d) => {
            uses.ceild = true;
            format!("ceild({e}, {d})")
        }
        Bound::Floor(e, d) => {
            uses.floord = true;
            format!("floord({e}, {d})")
        }
        Bound::Max(parts) => {
            uses.max = true;
            nest("max", parts, uses)
        }
        Bound::Min(parts) => {
            uses.min = true;
            nest("min", parts, uses)
        }
    }
}

fn nest(f: &str, parts: &[Bound], uses: &mut Uses) -> String {
    let mut text = bound_text(&parts[parts.len() - 1], uses);
    for p in parts[..parts.len() - 1].iter().rev() {
        text = format!("{f}({}, {text})", bound_text(p, uses));
    }
    text
}

/// `e ≥ 0` with positive terms on the left.
fn constraint_text(c: &Constraint) -> String {
    let mut lhs = AffineExpr::default();
    let mut rhs = AffineExpr::default();
    for (n, k) in c.expr.terms() {
        if k > 0 {
            lhs.add_term(n, k);
        } else {
            rhs.add_term(n, -k);
        }
    }
    let k = c.expr.constant_term();
    if k > 0 {
        lhs.add_constant(k);
    } else {
        rhs.add_constant(-k);
    }
    let op = if c.kind == ConstraintKind::Zero { "==" } else { ">=" };
    format!("{lhs} {op} {rhs}")
}

/// C binding strength; calls bind tightest.
fn precedence(op: Operator) -> u8 {
    match op {
        Operator::Min | Operator::Max => 9,
        Operator::Mul | Operator::Div => 5,
        Operator::Add | Operator::Sub => 4,
        Operator::And => 3,
        Operator::Xor => 2,
        Operator::Or => 1,
    }
}

fn operator_c(op: Operator, l: &str, r: &str, uses: &mut Uses) -> String {
    match op {
        Operator::Min => {
            uses.min = true;
            format!("min({l}, {r})")
        }
        Operator::Max => {
            uses.max = true;
            format!("max({l}, {r})")
        }
        _ => format!("{l} {op} {r}"),
    }
}

fn identity_c(op: Operator, v: i64, uses: &mut Uses) -> String {
    match op {
        Operator::Min => {
            uses.limits = true;
            "INT_MAX".into()
        }
        Operator::Max => {
            uses.limits = true;
            "INT_MIN".into()
        }
        _ => v.to_string(),
    }
}

pub(crate) fn access_c(scop: &Scop, array: &str, subs: &[String]) -> String {
    let scalar = scop.array(array).is_some_and(|a| a.rank() == 0);
    if scalar && subs.is_empty() {
        return format!("*{array}");
    }
    let mut s = array.to_string();
    for e in subs {
        write!(s, "[{e}]").unwrap();
    }
    s
}

impl Emitter<'_> {
    fn privatized_for(&self, stmt: usize, inst: usize) -> Option<(usize, &PrivatizedReduction)> {
        self.plan.privatized.iter().enumerate().find(|(_, p)| p.statement == stmt && (p.load == inst || p.store == inst))
    }

    fn access(&self, s: usize, inst: usize, array: &str, subs: &[AffineExpr]) -> String {
        let st = &self.scop.statements[s];
        let sp = &self.spaces[&s];
        let subs: Vec<AffineExpr> = subs.iter().map(|e| substitute(e, &st.iterators, &sp.iterators)).collect();
        match self.privatized_for(s, inst) {
            Some((_, p)) => {
                let mut idx = vec!["ctx".to_string()];
                idx.extend(p.kept_dims.iter().map(|&d| subs[d].to_string()));
                let mut text = format!("{array}_priv");
                for i in idx {
                    write!(text, "[{i}]").unwrap();
                }
                text
            }
            None => access_c(self.scop, array, &subs.iter().map(ToString::to_string).collect::<Vec<_>>()),
        }
    }

    /// Text of `o`; `parent` is the binding strength of the enclosing operator.
    fn operand(&mut self, s: usize, o: &Operand, parent: u8) -> String {
        let st: &Statement = &self.scop.statements[s];
        match o {
            Operand::Const(v) => v.to_string(),
            Operand::Affine(e) => {
                let e = substitute(e, &st.iterators, &self.spaces[&s].iterators);
                if parent > 0 && needs_parens(&e) {
                    format!("({e})")
                } else {
                    e.to_string()
                }
            }
            Operand::Inst(id) => match &st.instructions[*id].kind {
                InstKind::Load { array, subscripts } => self.access(s, *id, array, subscripts),
                InstKind::BinOp { operator, lhs, rhs } => {
                    let p = precedence(*operator);
                    let (l, r) = (self.operand(s, lhs, p), self.operand(s, rhs, p));
                    let text = operator_c(*operator, &l, &r, &mut self.uses);
                    if p > parent {
                        text
                    } else {
                        format!("({text})")
                    }
                }
                InstKind::Store { .. } => unreachable!("stores produce no value"),
            },
        }
    }

    fn statement(&mut self, s: usize, guards: &[Constraint]) -> Vec<Item> {
        let st = &self.scop.statements[s];
        let mut lines = Vec::new();
        for inst in &st.instructions {
            if let InstKind::Store { value, array, subscripts } = &inst.kind {
                let lhs = self.access(s, inst.id, array, subscripts);
                let rhs = self.operand(s, value, 0);
                lines.push(Item::Line(format!("{lhs} = {rhs};")));
            }
        }
        if guards.is_empty() {
            return lines;
        }
        let cond: Vec<String> = guards.iter().map(constraint_text).collect();
        vec![Item::Block { head: format!("if ({})", cond.join(" && ")), pragma: None, body: lines }]
    }

    fn region_members(&self, stmts: &[usize]) -> Vec<usize> {
        self.plan.privatized.iter().enumerate().filter(|(_, p)| stmts.contains(&p.statement)).map(|(i, _)| i).collect()
    }

    fn buffer_loops(&self, p: &PrivatizedReduction) -> (Vec<String>, Vec<String>) {
        let decl = self.scop.array(&p.array).expect("declared");
        let mut heads = vec![format!("for (int ctx = 0; ctx < {}; ctx++)", self.plan.contexts)];
        let mut idx = Vec::new();
        for &d in &p.kept_dims {
            let ext = decl.extents[d].as_ref().expect("checked by the plan");
            heads.push(format!("for (int a{d} = 0; a{d} < {ext}; a{d}++)"));
            idx.push(format!("a{d}"));
        }
        (heads, idx)
    }

    fn nested(heads: Vec<String>, line: String) -> Item {
        let mut item = Item::Line(line);
        for h in heads.into_iter().rev() {
            item = Item::Block { head: h, pragma: None, body: vec![item] };
        }
        item
    }

    fn init(&mut self, i: usize) -> Item {
        self.inits.push(i);
        let p = &self.plan.privatized[i];
        let (heads, idx) = self.buffer_loops(p);
        let mut target = format!("{}_priv[ctx]", p.array);
        for a in &idx {
            write!(target, "[{a}]").unwrap();
        }
        let v = identity_c(p.operator, p.identity, &mut self.uses);
        Self::nested(heads, format!("{target} = {v};"))
    }

    fn aggregate(&mut self, i: usize) -> Item {
        self.aggregates.push(i);
        let p = &self.plan.privatized[i];
        let st = &self.scop.statements[p.statement];
        let sp = &self.spaces[&p.statement];
        let (heads, idx) = self.buffer_loops(p);
        let (array, subs) = st.instructions[p.store].access().expect("store");
        let mut loc = Vec::new();
        for (d, e) in subs.iter().enumerate() {
            loc.push(if p.kept_dims.contains(&d) { format!("a{d}") } else { substitute(e, &st.iterators, &sp.iterators).to_string() });
        }
        let orig = access_c(self.scop, array, &loc);
        let mut private = format!("{array}_priv[ctx]");
        for a in &idx {
            write!(private, "[{a}]").unwrap();
        }
        let rhs = operator_c(p.operator, &orig, &private, &mut self.uses);
        Self::nested(heads, format!("{orig} = {rhs};"))
    }

    fn nodes(&mut self, nodes: &[Tree]) -> Vec<Item> {
        let mut out = Vec::new();
        for n in nodes {
            match n {
                Tree::Stmt { stmt, guards } => out.extend(self.statement(*stmt, guards)),
                Tree::Loop { dim, var, stmts, lower, upper, body } => {
                    let region = if self.plan.region_dim == Some(*dim) { self.region_members(stmts) } else { Vec::new() };
                    for &i in &region {
                        let item = self.init(i);
                        out.push(item);
                    }
                    let lo = bound_text(lower, &mut self.uses);
                    let cond = match upper {
                        Bound::Affine(u) => format!("{var} < {}", u.clone() + AffineExpr::constant(1)),
                        other => format!("{var} <= {}", bound_text(other, &mut self.uses)),
                    };
                    let head = format!("for (int {var} = {lo}; {cond}; {var}++)");
                    let parallel = self.plan.parallel_dim == Some(*dim);
                    let mut inner = Vec::new();
                    if parallel && stmts.iter().any(|s| self.plan.privatizes(*s)) {
                        inner.push(Item::Line("int ctx = omp_get_thread_num();".into()));
                    }
                    inner.extend(self.nodes(body));
                    let pragma = parallel.then(|| {
                        self.uses.omp = true;
                        format!("#pragma omp parallel for schedule(static) num_threads({})", self.plan.contexts)
                    });
                    out.push(Item::Block { head, pragma, body: inner });
                    for &i in &region {
                        let item = self.aggregate(i);
                        out.push(item);
                    }
                }
            }
        }
        out
    }
}

fn render(items: &[Item], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    for it in items {
        match it {
            Item::Line(l) => writeln!(out, "{pad}{l}").unwrap(),
            Item::Block { head, pragma, body } => {
                if let Some(p) = pragma {
                    writeln!(out, "{pad}{p}").unwrap();
                }
                let child_pragma = matches!(body.first(), Some(Item::Block { pragma: Some(_), .. }));
                let simple = body.len() == 1 && pragma.is_none() && !child_pragma;
                if simple {
                    writeln!(out, "{pad}{head}").unwrap();
                    render(body, indent + 1, out);
                } else {
                    writeln!(out, "{pad}{head} {{").unwrap();
                    render(body, indent + 1, out);
                    writeln!(out, "{pad}}}").unwrap();
                }
            }
        }
    }
}

fn signature(scop: &Scop) -> String {
    let mut args: Vec<String> = scop.params.iter().map(|p| format!("int {p}")).collect();
    for a in &scop.arrays {
        if a.rank() == 0 {
            args.push(format!("int *{}", a.name));
        } else {
            let dims: String = a
                .extents
                .iter()
                .map(|e| match e {
                    Some(e) => format!("[{e}]"),
                    None => "[]".to_string(),
                })
                .collect();
            args.push(format!("int {}{dims}", a.name));
        }
    }
    format!("void {}({})", scop.name, args.join(", "))
}

fn header(scop: &Scop, schedule: &Schedule, classification: &DimClassification, plan: &PrivatizationPlan) -> String {
    let mut h = String::new();
    writeln!(h, "/* {}: generated by polyred", scop.name).unwrap();
    writeln!(h, " * mode: {}", classification.mode).unwrap();
    writeln!(h, " * schedule:").unwrap();
    for (s, st) in scop.statements.iter().enumerate() {
        let rows: Vec<String> = schedule.rows(s).iter().map(ToString::to_string).collect();
        writeln!(h, " *   {}({}) -> ({})", st.name, st.iterators.join(", "), rows.join(", ")).unwrap();
    }
    writeln!(h, " * loop classification:").unwrap();
    for (s, st) in scop.statements.iter().enumerate() {
        let dims: Vec<String> = classification.statements[s].dims.iter().filter(|d| d.is_loop).map(|d| format!("{} {}", d.row, d.class)).collect();
        let text = if dims.is_empty() { "no loops".to_string() } else { dims.join(", ") };
        writeln!(h, " *   {}: {text}", st.name).unwrap();
    }
    match plan.parallel_dim {
        Some(k) => writeln!(h, " * parallel dimension: {k}").unwrap(),
        None => writeln!(h, " * parallel dimension: none").unwrap(),
    }
    for p in &plan.privatized {
        writeln!(
            h,
            " * privatized: {} ({} {}, identity {}), placement {}, {} location(s) per context, aggregated {} time(s)",
            p.array, scop.statements[p.statement].name, p.operator, p.identity, plan.placement, p.locations, p.aggregations
        )
        .unwrap();
    }
    h.push_str(" */\n");
    h
}

/// Emits C for `schedule` with the privatization described by `plan`.
pub fn emit_c(scop: &Scop, schedule: &Schedule, classification: &DimClassification, plan: &PrivatizationPlan) -> Result<String, CodegenError> {
    if classification.mode == LegalityMode::Strict && !plan.privatized.is_empty() {
        return Err(CodegenError::Unsupported("strict mode does not privatize".into()));
    }
    let (tree, spaces) = super::tree::build(scop, schedule)?;
    let mut em = Emitter { scop, plan, spaces: &spaces, uses: Uses::default(), inits: Vec::new(), aggregates: Vec::new() };
    let mut body = Vec::new();
    for p in &plan.privatized {
        let decl = scop.array(&p.array).expect("declared");
        let mut dims = format!("[{}]", plan.contexts);
        for &d in &p.kept_dims {
            write!(dims, "[{}]", decl.extents[d].as_ref().expect("checked")).unwrap();
        }
        body.push(Item::Line(format!("int {}_priv{dims};", p.array)));
    }
    body.extend(em.nodes(&tree));
    // Every buffer needs exactly one init and one aggregation per region loop.
    for i in 0..plan.privatized.len() {
        let (a, b) = (em.inits.iter().filter(|&&x| x == i).count(), em.aggregates.iter().filter(|&&x| x == i).count());
        if a == 0 || a != b {
            return Err(CodegenError::Unsupported(format!("privatization of {} has no matching region loop", plan.privatized[i].array)));
        }
    }
    let mut text = String::new();
    let mut out = String::new();
    render(&body, 1, &mut out);
    text.push_str(&header(scop, schedule, classification, plan));
    let u = &em.uses;
    if u.limits {
        text.push_str("#include <limits.h>\n");
    }
    if u.omp {
        text.push_str("#include <omp.h>\n");
    }
    if u.limits || u.omp {
        text.push('\n');
    }
    if u.omp {
        text.push_str("#ifndef NUM_CONTEXTS\n#define NUM_CONTEXTS 4\n#endif\n\n");
    }
    let mut macros = String::new();
    if u.min {
        macros.push_str("#define min(a, b) ((a) < (b) ? (a) : (b))\n");
    }
    if u.max {
        macros.push_str("#define max(a, b) ((a) > (b) ? (a) : (b))\n");
    }
    if u.floord {
        macros.push_str("#define floord(n, d) (((n) < 0) ? -((-(n) + (d) - 1) / (d)) : (n) / (d))\n");
    }
    if u.ceild {
        macros.push_str("#define ceild(n, d) (((n) < 0) ? -((-(n)) / (d)) : ((n) + (d) - 1) / (d))\n");
    }
    if !macros.is_empty() {
        text.push_str(&macros);
        text.push('\n');
    }
    writeln!(text, "{}\n{{", signature(scop)).unwrap();
    text.push_str(&out);
    text.push_str("}\n");
    Ok(text)
}

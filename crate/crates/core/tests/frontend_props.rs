//! Frontend and reduction detection on generated programs.

use polyred::affine::AffineExpr;
use polyred::detect::{detect, FlowAnalysis, FlowSymbol};
use polyred::frontend::{parse, print_scop};
use polyred::ir::{InstKind, Scop};
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Sub {
    I,
    J,
    IPlus1,
    JMinus1,
    Flip,
    Zero,
}

impl Sub {
    fn text(&self) -> &'static str {
        match self {
            Sub::I => "i",
            Sub::J => "j",
            Sub::IPlus1 => "i + 1",
            Sub::JMinus1 => "j - 1",
            Sub::Flip => "N - 1 - i",
            Sub::Zero => "0",
        }
    }

    fn expr(&self) -> AffineExpr {
        let v = |n: &str| AffineExpr::var(n);
        let c = AffineExpr::constant;
        match self {
            Sub::I => v("i"),
            Sub::J => v("j"),
            Sub::IPlus1 => v("i") + c(1),
            Sub::JMinus1 => v("j") - c(1),
            Sub::Flip => v("N") - c(1) - v("i"),
            Sub::Zero => c(0),
        }
    }
}

#[derive(Clone, Debug)]
enum Ref {
    A(Sub),
    B(Sub, Sub),
    S,
}

impl Ref {
    fn text(&self) -> String {
        match self {
            Ref::A(x) => format!("A[{}]", x.text()),
            Ref::B(x, y) => format!("B[{}][{}]", x.text(), y.text()),
            Ref::S => "s".into(),
        }
    }

    fn array(&self) -> &'static str {
        match self {
            Ref::A(_) => "A",
            Ref::B(..) => "B",
            Ref::S => "s",
        }
    }

    fn subscripts(&self) -> Vec<AffineExpr> {
        match self {
            Ref::A(x) => vec![x.expr()],
            Ref::B(x, y) => vec![x.expr(), y.expr()],
            Ref::S => vec![],
        }
    }
}

#[derive(Clone, Debug)]
enum Expr {
    Read(Ref),
    Const(i64),
    Iter,
    Bin(&'static str, Box<Expr>, Box<Expr>),
}

const OPS: [&str; 8] = ["+", "-", "*", "&", "|", "^", "min", "max"];

impl Expr {
    /// Source text; the `skip`-th read (counting from `*seen`) is replaced by a constant.
    fn text(&self, seen: &mut usize, skip: Option<usize>) -> String {
        match self {
            Expr::Read(r) => {
                let k = *seen;
                *seen += 1;
                if skip == Some(k) {
                    "7".into()
                } else {
                    r.text()
                }
            }
            Expr::Const(c) => c.to_string(),
            Expr::Iter => "i".into(),
            Expr::Bin(op, l, r) => {
                let (l, r) = (l.text(seen, skip), r.text(seen, skip));
                match *op {
                    "min" | "max" => format!("{op}({l}, {r})"),
                    _ => format!("({l} {op} {r})"),
                }
            }
        }
    }

    fn reads<'a>(&'a self, out: &mut Vec<&'a Ref>) {
        match self {
            Expr::Read(r) => out.push(r),
            Expr::Bin(_, l, r) => {
                l.reads(out);
                r.reads(out);
            }
            _ => {}
        }
    }
}

#[derive(Clone, Debug)]
struct Stmt {
    lhs: Ref,
    /// `Some(op)` for a compound assignment `lhs op= rhs`.
    compound: Option<&'static str>,
    rhs: Expr,
}

impl Stmt {
    fn expected_loads(&self) -> Vec<&Ref> {
        let mut out = Vec::new();
        if self.compound.is_some() {
            out.push(&self.lhs);
        }
        self.rhs.reads(&mut out);
        out
    }
}

fn sub() -> impl Strategy<Value = Sub> {
    prop_oneof![Just(Sub::I), Just(Sub::J), Just(Sub::IPlus1), Just(Sub::JMinus1), Just(Sub::Flip), Just(Sub::Zero)]
}

fn reference() -> impl Strategy<Value = Ref> {
    prop_oneof![sub().prop_map(Ref::A), (sub(), sub()).prop_map(|(a, b)| Ref::B(a, b)), Just(Ref::S)]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![3 => reference().prop_map(Expr::Read), 1 => (0i64..10).prop_map(Expr::Const), 1 => Just(Expr::Iter)];
    leaf.prop_recursive(3, 12, 2, |inner| (prop::sample::select(OPS.to_vec()), inner.clone(), inner).prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))))
}

fn stmt() -> impl Strategy<Value = Stmt> {
    (reference(), prop::option::weighted(0.4, prop::sample::select(vec!["+", "*", "-"])), expr()).prop_map(|(lhs, compound, rhs)| Stmt { lhs, compound, rhs })
}

/// Program text; `skip` = (statement, read index) drops one read.
fn program(stmts: &[Stmt], skip: Option<(usize, usize)>) -> String {
    let mut body = String::new();
    for (k, s) in stmts.iter().enumerate() {
        let mut seen = 0;
        let mine = skip.filter(|(t, _)| *t == k).map(|(_, r)| r);
        let (op, rhs_skip) = match (s.compound, mine) {
            (Some(_), Some(0)) => ("=".to_string(), None),
            (Some(c), m) => (format!("{c}="), m.map(|r| r - 1)),
            (None, m) => ("=".to_string(), m),
        };
        body.push_str(&format!("        S{k}: {} {op} {};\n", s.lhs.text(), s.rhs.text(&mut seen, rhs_skip)));
    }
    format!("scop g(N) {{\n  int A[N + 2];\n  int B[N + 2][N + 2];\n  int s;\n  for (i = 0; i < N; i++)\n    for (j = 0; j < N; j++) {{\n{body}    }}\n}}\n")
}

fn loads(scop: &Scop, s: usize) -> Vec<(String, Vec<AffineExpr>)> {
    scop.statements[s]
        .instructions
        .iter()
        .filter_map(|i| match &i.kind {
            InstKind::Load { array, subscripts } => Some((array.clone(), subscripts.clone())),
            _ => None,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_a_fixpoint(stmts in prop::collection::vec(stmt(), 1..4)) {
        let src = program(&stmts, None);
        let a = parse(&src, false).unwrap();
        let text = print_scop(&a);
        let b = parse(&text, false).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(print_scop(&b), text);
    }

    #[test]
    fn one_load_per_read_in_source_order(stmts in prop::collection::vec(stmt(), 1..4)) {
        let scop = parse(&program(&stmts, None), false).unwrap();
        for (k, s) in stmts.iter().enumerate() {
            let want: Vec<(String, Vec<AffineExpr>)> = s.expected_loads().iter().map(|r| (r.array().to_string(), r.subscripts())).collect();
            prop_assert_eq!(loads(&scop, k), want);
        }
    }

    #[test]
    fn detection_invariants(stmts in prop::collection::vec(stmt(), 1..4)) {
        let scop = parse(&program(&stmts, None), false).unwrap();
        let reds = detect(&scop).unwrap();
        for r in &reds {
            prop_assert!(r.operator.is_associative() || r.operator.is_commutative());
        }
        for (k, s) in stmts.iter().enumerate() {
            let st = &scop.statements[k];
            // Flow never recovers from ⊤ along a use edge.
            let fa = FlowAnalysis::new(&scop, k).unwrap();
            for x in &st.instructions {
                for u in st.users(x.id) {
                    for (l, sym) in fa.flow(x.id) {
                        if *sym == FlowSymbol::Top {
                            let later = fa.flow(u).get(l).copied();
                            prop_assert!(!matches!(later, Some(FlowSymbol::Loaded | FlowSymbol::Op(_))), "load {l} at {u}: {later:?}");
                        }
                    }
                }
            }
            // A store to an array no load of the statement reads is never a reduction.
            if !s.expected_loads().iter().any(|r| r.array() == s.lhs.array()) {
                prop_assert!(reds.iter().all(|r| r.statement != k));
            }
        }
        // Dropping the detected load leaves no reduction on that store.
        for r in &reds {
            let index = st_load_index(&scop, r.statement, r.load);
            let again = detect(&parse(&program(&stmts, Some((r.statement, index))), false).unwrap()).unwrap();
            prop_assert!(again.iter().all(|x| x.statement != r.statement), "{}", program(&stmts, Some((r.statement, index))));
        }
    }
}

fn st_load_index(scop: &Scop, stmt: usize, load: usize) -> usize {
    scop.statements[stmt].instructions.iter().filter(|i| i.is_load() && i.id < load).count()
}

#[test]
fn generator_produces_reductions() {
    // The detection properties above are only meaningful if reductions occur.
    let src = "scop g(N) { int A[N + 2]; int s; for (i = 0; i < N; i++) for (j = 0; j < N; j++) { S0: s += A[i]; S1: A[i] = max(A[i], 3); } }";
    let scop = parse(src, false).unwrap();
    assert_eq!(detect(&scop).unwrap().len(), 2);
}

#[test]
fn generated_programs_often_contain_reductions() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let strategy = prop::collection::vec(stmt(), 1..4);
    let mut found = 0;
    for _ in 0..300 {
        let stmts = strategy.new_tree(&mut runner).unwrap().current();
        found += detect(&parse(&program(&stmts, None), false).unwrap()).unwrap().len();
    }
    assert!(found >= 20, "only {found} reductions in 300 programs");
}

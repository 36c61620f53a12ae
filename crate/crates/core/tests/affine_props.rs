//! Affine sets and relations against pointwise definitions.

mod common;

use std::collections::BTreeSet;

use common::*;
use polyred::affine::{lex_lt, transitive_closure, AffineExpr, Bindings, Constraint, ConstraintKind, EmptinessMode, IntRel, IntSet, Space};
use polyred::deps::{memory_deps, Granularity};
use proptest::prelude::*;

type Raw = (i64, i64, i64, i64, bool);

fn expr(&(a, b, c, d, _): &Raw) -> AffineExpr {
    AffineExpr::term("x", a) + AffineExpr::term("y", b) + AffineExpr::term("N", c) + AffineExpr::constant(d)
}

fn constraint(r: &Raw) -> Constraint {
    let e = expr(r);
    if r.4 {
        Constraint::eq(e, AffineExpr::constant(0))
    } else {
        Constraint::ge(e, AffineExpr::constant(0))
    }
}

fn space() -> Space {
    Space::new(["x".to_string(), "y".to_string()], ["N".to_string()])
}

/// `0 ≤ x, y ≤ N` plus the given constraints.
fn boxed(cs: &[Raw]) -> IntSet {
    let (x, y, n) = (AffineExpr::var("x"), AffineExpr::var("y"), AffineExpr::var("N"));
    let zero = AffineExpr::constant(0);
    let mut all = vec![Constraint::ge(x.clone(), zero.clone()), Constraint::ge(y.clone(), zero), Constraint::le(x, n.clone()), Constraint::le(y, n)];
    all.extend(cs.iter().map(constraint));
    IntSet::from_constraints(space(), &all).unwrap()
}

fn holds(cs: &[Raw], x: i64, y: i64, n: i64) -> bool {
    cs.iter().all(|r| {
        let v = expr(r).eval(|name| match name {
            "x" => Some(x),
            "y" => Some(y),
            "N" => Some(n),
            _ => None,
        });
        let v = v.unwrap();
        match constraint(r).kind {
            ConstraintKind::Zero => v == 0,
            ConstraintKind::NonNegative => v >= 0,
        }
    })
}

fn brute(cs: &[Raw], n: i64) -> Vec<Vec<i64>> {
    (0..=n).flat_map(|x| (0..=n).map(move |y| (x, y))).filter(|&(x, y)| holds(cs, x, y, n)).map(|(x, y)| vec![x, y]).collect()
}

fn raw() -> impl Strategy<Value = Raw> {
    (-3i64..=3, -3i64..=3, -2i64..=2, -6i64..=6, prop::bool::weighted(0.2))
}

fn pts(v: Vec<Vec<i64>>) -> BTreeSet<Vec<i64>> {
    v.into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn emptiness_agrees_with_enumeration(cs in prop::collection::vec(raw(), 0..4), n in 0i64..6) {
        let set = boxed(&cs);
        let b: Bindings = [("N".to_string(), n)].into();
        let want = brute(&cs, n);
        // Normalization and tightening keep exactly the integer points.
        prop_assert_eq!(pts(set.enumerate(&b).unwrap()), pts(want.clone()));
        prop_assert_eq!(set.is_empty(EmptinessMode::IntegerAt(&b)).unwrap().empty, want.is_empty());
        let rational = set.is_empty(EmptinessMode::Rational).unwrap();
        if rational.empty {
            prop_assert!(want.is_empty());
        }
        if let Some(w) = rational.witness {
            prop_assert!(holds(&cs, w[0], w[1], w[2]) && (0..=w[2]).contains(&w[0]) && (0..=w[2]).contains(&w[1]));
        }
    }

    #[test]
    fn boolean_operations_are_pointwise(a in prop::collection::vec(raw(), 0..3), c in prop::collection::vec(raw(), 0..3), n in 0i64..5) {
        let (sa, sc) = (boxed(&a), boxed(&c));
        let b: Bindings = [("N".to_string(), n)].into();
        let (pa, pc) = (pts(brute(&a, n)), pts(brute(&c, n)));
        prop_assert_eq!(pts(sa.intersect(&sc).unwrap().enumerate(&b).unwrap()), pa.intersection(&pc).cloned().collect());
        prop_assert_eq!(pts(sa.union(&sc).unwrap().enumerate(&b).unwrap()), pa.union(&pc).cloned().collect());
        prop_assert_eq!(pts(sa.subtract(&sc).unwrap().enumerate(&b).unwrap()), pa.difference(&pc).cloned().collect());
    }

    #[test]
    fn lex_lt_matches_a_comparator(d in 1usize..4, lo in -2i64..1) {
        let ins: Vec<String> = (0..d).map(|k| format!("a{k}")).collect();
        let outs: Vec<String> = (0..d).map(|k| format!("b{k}")).collect();
        let rel = lex_lt(ins.clone(), outs.clone(), vec![]).unwrap();
        let grid: Vec<Constraint> = ins
            .iter()
            .chain(&outs)
            .flat_map(|v| [Constraint::ge(AffineExpr::var(v.as_str()), AffineExpr::constant(lo)), Constraint::le(AffineExpr::var(v.as_str()), AffineExpr::constant(lo + 2))])
            .collect();
        let boxed = IntRel::from_constraints(ins, outs, vec![], &grid).unwrap().intersect(&rel).unwrap();
        let got: BTreeSet<_> = boxed.enumerate(&Bindings::new()).unwrap().into_iter().collect();
        let axis: Vec<i64> = (lo..=lo + 2).collect();
        let mut points = vec![vec![]];
        for _ in 0..d {
            points = points.into_iter().flat_map(|p: Vec<i64>| axis.iter().map(move |&v| { let mut q = p.clone(); q.push(v); q })).collect();
        }
        let want: BTreeSet<_> = points.iter().flat_map(|a| points.iter().filter(move |b| a < *b).map(move |b| (a.clone(), b.clone()))).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn closure_contains_the_enumerated_closure(dx in -2i64..=2, dy in -2i64..=2, n in 1i64..5) {
        prop_assume!(dx != 0 || dy != 0);
        let (x, y, xp, yp) = (AffineExpr::var("x"), AffineExpr::var("y"), AffineExpr::var("x'"), AffineExpr::var("y'"));
        let zero = AffineExpr::constant(0);
        let nn = AffineExpr::var("N");
        let dom = [
            Constraint::ge(x.clone(), zero.clone()), Constraint::le(x.clone(), nn.clone()),
            Constraint::ge(y.clone(), zero.clone()), Constraint::le(y.clone(), nn.clone()),
        ];
        let mut cs = dom.to_vec();
        cs.extend([
            Constraint::ge(xp.clone(), zero.clone()), Constraint::le(xp.clone(), nn.clone()),
            Constraint::ge(yp.clone(), zero), Constraint::le(yp.clone(), nn.clone()),
            Constraint::eq(xp, x + AffineExpr::constant(dx)), Constraint::eq(yp, y + AffineExpr::constant(dy)),
        ]);
        let io = |a: &str, b: &str| vec![a.to_string(), b.to_string()];
        let rel = IntRel::from_constraints(io("x", "y"), io("x'", "y'"), vec!["N".into()], &cs).unwrap();
        let domain = IntSet::from_constraints(Space::new(io("x", "y"), ["N".to_string()]), &dom).unwrap();
        let c = transitive_closure(&rel, &domain).unwrap();
        let b: Bindings = [("N".to_string(), n)].into();
        let step: BTreeSet<(Vec<i64>, Vec<i64>)> = rel.enumerate(&b).unwrap().into_iter().collect();
        let mut want = step.clone();
        loop {
            let more: BTreeSet<_> = want.iter().flat_map(|(a, m)| step.iter().filter(move |(m2, _)| m2 == m).map(move |(_, z)| (a.clone(), z.clone()))).collect();
            let before = want.len();
            want.extend(more);
            if want.len() == before { break; }
        }
        let got: BTreeSet<_> = c.relation.enumerate(&b).unwrap().into_iter().collect();
        prop_assert!(want.is_subset(&got));
        if c.exact {
            prop_assert_eq!(got, want);
        }
    }
}

fn compose(a: &BTreeSet<(Vec<i64>, Vec<i64>)>, c: &BTreeSet<(Vec<i64>, Vec<i64>)>) -> BTreeSet<(Vec<i64>, Vec<i64>)> {
    a.iter().flat_map(|(x, m)| c.iter().filter(move |(m2, _)| m2 == m).map(move |(_, z)| (x.clone(), z.clone()))).collect()
}

#[test]
fn relation_operations_on_kernel_dependences_are_pointwise() {
    let mut composed = 0;
    for name in KERNELS {
        let scop = kernel(name);
        let deps = memory_deps(&scop, Granularity::Access).unwrap();
        for v in [1, 3, 5] {
            let b = uniform(&scop, v);
            for d in &deps.fine {
                let pairs: BTreeSet<_> = d.relation.enumerate(&b).unwrap().into_iter().collect();
                let inv: BTreeSet<_> = d.relation.inverse().enumerate(&b).unwrap().into_iter().collect();
                assert_eq!(inv, pairs.iter().map(|(a, c)| (c.clone(), a.clone())).collect(), "{name} inverse");
                let src = &scop.statements[d.source];
                let dom = src.domain.with_dims(d.relation.inputs().to_vec()).unwrap();
                let img: BTreeSet<_> = d.relation.apply(&dom).unwrap().enumerate(&b).unwrap().into_iter().collect();
                assert_eq!(img, pairs.iter().map(|(_, c)| c.clone()).collect(), "{name} apply");
                for e in deps.fine.iter().filter(|e| e.source == d.target).take(3) {
                    let next = e.relation.with_names(d.relation.outputs().iter().map(|o| format!("{o}_m")).collect(), e.relation.outputs().to_vec());
                    let next = next.unwrap();
                    let other: BTreeSet<_> = e.relation.enumerate(&b).unwrap().into_iter().collect();
                    let got: BTreeSet<_> = d.relation.then(&next).unwrap().enumerate(&b).unwrap().into_iter().collect();
                    assert_eq!(got, compose(&pairs, &other), "{name} then");
                    composed += 1;
                }
            }
        }
    }
    assert!(composed > 50, "only {composed} compositions");
}

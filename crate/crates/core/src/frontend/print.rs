use std::fmt::Write;

use crate::ir::{access_string, InstKind, Node, Operand, Operator, Scop, Statement};

/// Renders a SCoP back to DSL text with normalized loops.
pub fn print_scop(scop: &Scop) -> String {
    let mut out = String::new();
    writeln!(out, "scop {}({}) {{", scop.name, scop.params.join(", ")).unwrap();
    for a in &scop.arrays {
        let dims: String = a
            .extents
            .iter()
            .map(|e| match e {
                Some(e) => format!("[{e}]"),
                None => "[?]".to_string(),
            })
            .collect();
        writeln!(out, "  int {}{};", a.name, dims).unwrap();
    }
    for node in &scop.tree {
        print_node(scop, node, 1, &mut out);
    }
    out.push_str("}\n");
    out
}

fn print_node(scop: &Scop, node: &Node, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match node {
        Node::Loop { iterator, upper, body } => {
            writeln!(out, "{pad}for ({iterator} = 0; {iterator} < {upper}; {iterator}++) {{").unwrap();
            for n in body {
                print_node(scop, n, indent + 1, out);
            }
            writeln!(out, "{pad}}}").unwrap();
        }
        Node::Stmt(idx) => {
            let s = &scop.statements[*idx];
            let mut part = 0;
            for inst in &s.instructions {
                if let InstKind::Store { value, array, subscripts } = &inst.kind {
                    let label = s.labels.get(part).cloned().unwrap_or_else(|| s.name.clone());
                    writeln!(out, "{pad}{label}: {} = {};", access_string(array, subscripts), operand(s, value, true)).unwrap();
                    part += 1;
                }
            }
        }
    }
}

fn operand(s: &Statement, o: &Operand, top: bool) -> String {
    match o {
        Operand::Const(v) => v.to_string(),
        Operand::Affine(e) => {
            if top || e.terms().count() == 1 && e.constant_term() == 0 && e.terms().all(|(_, c)| c == 1) {
                e.to_string()
            } else {
                format!("({e})")
            }
        }
        Operand::Inst(id) => match &s.instructions[*id].kind {
            InstKind::Load { array, subscripts } => access_string(array, subscripts),
            InstKind::BinOp { operator, lhs, rhs } => {
                let (l, r) = (operand(s, lhs, false), operand(s, rhs, false));
                match operator {
                    Operator::Min | Operator::Max => format!("{operator}({l}, {r})"),
                    _ if top => format!("{l} {operator} {r}"),
                    _ => format!("({l} {operator} {r})"),
                }
            }
            InstKind::Store { .. } => unreachable!("stores produce no value"),
        },
    }
}

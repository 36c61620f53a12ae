//! Affine-loop DSL.
//!
//! ```text
//! scop bicg(NX, NY) {
//!   int A[NX][NY];
//!   int q[NX];
//!   int p[NY];
//!   for (i = 0; i < NX; i++) {
//!     R: q[i] = 0;
//!     for (j = 0; j < NY; j++)
//!       S: q[i] += A[i][j] * p[j];
//!   }
//! }
//! ```
//!
//! Every array and scalar is declared with `int`; `?` marks an unknown
//! extent. Loops take `<` or `<=` bounds and are normalized to start at 0.
//! Statements may be labeled; unlabeled ones are named `S<n>` by source
//! position. `#` starts a line comment.

mod lower;
mod print;
mod syntax;

pub use print::print_scop;

use crate::ir::Scop;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: non-affine expression: {msg}")]
    NonAffine { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown identifier `{name}`")]
    UnknownIdent { line: usize, col: usize, name: String },
    #[error("{line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
}

/// Parses DSL text. With `fuse`, consecutive statements of one block form a
/// single compound statement.
pub fn parse(text: &str, fuse: bool) -> Result<Scop, FrontendError> {
    let program = syntax::parse_program(text)?;
    lower::lower(&program, fuse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{InstKind, Operand, Operator};

    const SUM: &str = "scop array_sum(N) {\n  int A[4*N];\n  int sum;\n  for (i = 0; i < 4*N; i++)\n    sum += A[i];\n}\n";

    fn kinds(scop: &Scop, s: usize) -> Vec<String> {
        scop.statements[s]
            .instructions
            .iter()
            .map(|i| match &i.kind {
                InstKind::Load { array, .. } => format!("load {array}"),
                InstKind::BinOp { operator, .. } => operator.symbol().to_string(),
                InstKind::Store { array, .. } => format!("store {array}"),
            })
            .collect()
    }

    #[test]
    fn compound_assignment_loads_target_first() {
        let scop = parse(SUM, false).unwrap();
        assert_eq!(scop.statements.len(), 1);
        assert_eq!(kinds(&scop, 0), ["load sum", "load A", "+", "store sum"]);
        assert_eq!(scop.statements[0].name, "S0");
    }

    #[test]
    fn differing_access_functions() {
        let src = "scop f(N, M) { int A[?]; int Mat[N][M];\n for (i = 0; i < N; i++) for (j = 0; j < M; j++) S: A[j] = A[j-i] + Mat[i][j]; }";
        let scop = parse(src, false).unwrap();
        assert_eq!(kinds(&scop, 0), ["load A", "load Mat", "+", "store A"]);
        let InstKind::Load { subscripts, .. } = &scop.statements[0].instructions[0].kind else { panic!() };
        assert_eq!(subscripts[0].to_string(), "-i + j");
    }

    #[test]
    fn lower_bounds_are_normalized() {
        let src = "scop f(N) { int A[N]; for (i = 1; i <= N; i++) A[i - 1] = i; }";
        let scop = parse(src, false).unwrap();
        let s = &scop.statements[0];
        let InstKind::Store { value, subscripts, .. } = &s.instructions[0].kind else { panic!() };
        assert_eq!(subscripts[0].to_string(), "i");
        assert_eq!(value, &Operand::Affine(crate::affine::AffineExpr::var("i") + crate::affine::AffineExpr::constant(1)));
        assert_eq!(s.domain.to_string(), "[N] -> { [i] : i >= 0 and i < N }");
    }

    #[test]
    fn min_max_and_bitwise_operators() {
        let src = "scop f(N) { int x; int A[N]; for (i = 0; i < N; i++) x = min(x, A[i]) ^ 3; }";
        let scop = parse(src, false).unwrap();
        let ops: Vec<Operator> = scop.statements[0]
            .instructions
            .iter()
            .filter_map(|i| match i.kind {
                InstKind::BinOp { operator, .. } => Some(operator),
                _ => None,
            })
            .collect();
        assert_eq!(ops, [Operator::Min, Operator::Xor]);
    }

    #[test]
    fn errors_report_position() {
        let e = parse("scop f(N) {\n  int A[N];\n  for (i = 0; i < N; i++)\n    A[i*i] = 0;\n}", false).unwrap_err();
        assert!(matches!(e, FrontendError::NonAffine { line: 4, .. }), "{e}");
        let e = parse("scop f(N) { int A[N]; for (i = 0; i < N; i++) A[i] = B[i]; }", false).unwrap_err();
        assert!(matches!(e, FrontendError::UnknownIdent { ref name, .. } if name == "B"), "{e}");
        let e = parse("scop f(N) { for (i = 0; i < N; i++) }", false).unwrap_err();
        assert!(matches!(e, FrontendError::Syntax { line: 1, .. }), "{e}");
    }

    #[test]
    fn fuse_merges_consecutive_statements() {
        let src = "scop f(N) { int a; int b; int A[N];\n for (i = 0; i < N; i++) { S: a += A[i]; T: b += A[i]; } }";
        let split = parse(src, false).unwrap();
        assert_eq!(split.statements.len(), 2);
        assert_eq!(split.statements[1].beta, vec![0, 1]);
        let fused = parse(src, true).unwrap();
        assert_eq!(fused.statements.len(), 1);
        assert_eq!(fused.statements[0].name, "S_T");
        assert!(fused.statements[0].is_compound());
        assert!(fused.check().is_ok());
    }

    #[test]
    fn print_round_trip() {
        let src = "scop f(N, M) { int A[?]; int Mat[N][M]; int x;\n for (i = 2; i < N; i++) { x = 0 - x; for (j = i; j <= M; j++) S: A[j] = A[j-i] + Mat[i][j] * (i + 1); } }";
        for fuse in [false, true] {
            let a = parse(src, fuse).unwrap();
            let text = print_scop(&a);
            let b = parse(&text, fuse).unwrap();
            assert_eq!(a, b, "{text}");
            assert_eq!(print_scop(&b), text);
        }
    }
}

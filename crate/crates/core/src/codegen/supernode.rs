//! Tree patterns covered by single stencils.

use crate::lang::{BinOp, CmpOp, LocalId, TExpr, TExprKind, TStmt, TTarget, ValueType};

/// Supernode shapes, listed in matching priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Supernode {
    /// `if (var op const)` or the same shape as a loop condition.
    IfCmpVarConst { op: CmpOp, var: LocalId, ty: ValueType, value: u64 },
    /// `dest = var op const`.
    BinaryVarConst { op: BinOp, dest: LocalId, var: LocalId, ty: ValueType, value: u64 },
}

fn var_const(lhs: &TExpr, rhs: &TExpr) -> Option<(LocalId, u64)> {
    match (&lhs.kind, &rhs.kind) {
        (TExprKind::Var(v), TExprKind::Literal(c)) => Some((*v, *c)),
        _ => None,
    }
}

/// Matches a branch condition.
pub fn match_condition(cond: &TExpr) -> Option<Supernode> {
    match &cond.kind {
        TExprKind::Compare { op, lhs, rhs } => {
            var_const(lhs, rhs).map(|(var, value)| Supernode::IfCmpVarConst { op: *op, var, ty: lhs.ty, value })
        }
        _ => None,
    }
}

/// Matches the right-hand side of an assignment to local `dest`.
pub fn match_assignment(dest: LocalId, value: &TExpr) -> Option<Supernode> {
    match &value.kind {
        TExprKind::Binary { op, lhs, rhs } => {
            var_const(lhs, rhs).map(|(var, c)| Supernode::BinaryVarConst { op: *op, dest, var, ty: value.ty, value: c })
        }
        _ => None,
    }
}

/// Matches the statement-level shapes: the condition of an `if`/`while`, or
/// an assignment or initialized declaration.
pub fn match_supernode(stmt: &TStmt) -> Option<Supernode> {
    match stmt {
        TStmt::If { cond, .. } | TStmt::While { cond, .. } => match_condition(cond),
        TStmt::Assign { target: TTarget::Var(dest), value } => match_assignment(*dest, value),
        TStmt::Declare { local, init: Some(value) } => match_assignment(*local, value),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::lang::typecheck;

    fn body(src: &str) -> Vec<TStmt> {
        let m = typecheck(&parse(src).unwrap()).unwrap();
        m.functions.last().unwrap().body.clone()
    }

    #[test]
    fn if_le_var_const() {
        let b = body("fn f(n: i32) -> i32 { if (n <= 2) { return 1; } return 0; }");
        assert_eq!(
            match_supernode(&b[0]),
            Some(Supernode::IfCmpVarConst { op: CmpOp::Le, var: 0, ty: ValueType::I32, value: 2 })
        );
    }

    #[test]
    fn call_operand_does_not_match() {
        let b =
            body("fn g(x: i32) -> i32 { return x; } fn f(x: i32) -> i32 { if (g(x) <= 2) { return 1; } return 0; }");
        assert_eq!(match_supernode(&b[0]), None);
    }

    #[test]
    fn decrement_matches_binary_var_const() {
        let b = body("fn f(x: i64) -> i64 { x = x - 1; return x; }");
        assert_eq!(
            match_supernode(&b[0]),
            Some(Supernode::BinaryVarConst { op: BinOp::Sub, dest: 0, var: 0, ty: ValueType::I64, value: 1 })
        );
        let swapped = body("fn f(x: i64) -> i64 { x = 1 - x; return x; }");
        assert_eq!(match_supernode(&swapped[0]), None);
    }
}

//! Checked, desugared form of a module. Produced only by [`super::typecheck`].

use super::{
    BinOp, CmpOp, Expr, ExternDecl, ExternId, FuncId, Function, Literal, Local, LocalId, Module, Stmt, Target,
    ValueType,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedModule {
    pub externals: Vec<ExternDecl>,
    pub functions: Vec<TFunction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TFunction {
    pub name: String,
    pub params: u32,
    pub ret: Option<ValueType>,
    /// Parameters first, then every declared local in textual order.
    pub locals: Vec<Local>,
    pub body: Vec<TStmt>,
    /// Number of call sites (internal and external); site ids are dense.
    pub call_sites: u32,
}

impl TFunction {
    pub fn param_types(&self) -> impl Iterator<Item = ValueType> + '_ {
        self.locals[..self.params as usize].iter().map(|l| l.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TExpr {
    /// Result type. A call to a void function only appears as an expression
    /// statement and is tagged `I64`; its value is never observed.
    pub ty: ValueType,
    pub kind: TExprKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TExprKind {
    /// Canonical 64-bit payload: sign-extended for `I32`, 0/1 for `Bool`,
    /// IEEE bits for `F64`.
    Literal(u64),
    Var(LocalId),
    Binary {
        op: BinOp,
        lhs: Box<TExpr>,
        rhs: Box<TExpr>,
    },
    Compare {
        op: CmpOp,
        lhs: Box<TExpr>,
        rhs: Box<TExpr>,
    },
    Call {
        func: FuncId,
        args: Vec<TExpr>,
        site: u32,
    },
    ExternalCall {
        ext: ExternId,
        args: Vec<TExpr>,
        site: u32,
    },
    /// Element type is the node's `ty`.
    Index {
        base: Box<TExpr>,
        index: Box<TExpr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TTarget {
    Var(LocalId),
    Index { elem: ValueType, base: TExpr, index: TExpr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TStmt {
    /// A missing initializer zero-fills the slot.
    Declare {
        local: LocalId,
        init: Option<TExpr>,
    },
    Assign {
        target: TTarget,
        value: TExpr,
    },
    If {
        cond: TExpr,
        then_body: Vec<TStmt>,
        else_body: Vec<TStmt>,
    },
    While {
        cond: TExpr,
        body: Vec<TStmt>,
    },
    Return(Option<TExpr>),
    Expr(TExpr),
    Block(Vec<TStmt>),
}

impl TExpr {
    pub fn literal(ty: ValueType, bits: u64) -> TExpr {
        TExpr { ty, kind: TExprKind::Literal(bits) }
    }

    pub fn var(ty: ValueType, id: LocalId) -> TExpr {
        TExpr { ty, kind: TExprKind::Var(id) }
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        1 + match &self.kind {
            TExprKind::Literal(_) | TExprKind::Var(_) => 0,
            TExprKind::Binary { lhs, rhs, .. } | TExprKind::Compare { lhs, rhs, .. } => lhs.size() + rhs.size(),
            TExprKind::Call { args, .. } | TExprKind::ExternalCall { args, .. } => args.iter().map(TExpr::size).sum(),
            TExprKind::Index { base, index } => base.size() + index.size(),
        }
    }

    fn to_expr(&self) -> Expr {
        match &self.kind {
            TExprKind::Literal(bits) => Expr::Literal(literal_of(self.ty, *bits)),
            TExprKind::Var(id) => Expr::Var(*id),
            TExprKind::Binary { op, lhs, rhs } => Expr::binary(*op, lhs.to_expr(), rhs.to_expr()),
            TExprKind::Compare { op, lhs, rhs } => Expr::compare(*op, lhs.to_expr(), rhs.to_expr()),
            TExprKind::Call { func, args, .. } => {
                Expr::Call { func: *func, args: args.iter().map(TExpr::to_expr).collect() }
            }
            TExprKind::ExternalCall { ext, args, .. } => {
                Expr::ExternalCall { ext: *ext, args: args.iter().map(TExpr::to_expr).collect() }
            }
            TExprKind::Index { base, index } => {
                Expr::Index { elem: self.ty, base: Box::new(base.to_expr()), index: Box::new(index.to_expr()) }
            }
        }
    }
}

fn literal_of(ty: ValueType, bits: u64) -> Literal {
    match ty {
        ValueType::F64 => Literal::Float { value: f64::from_bits(bits), ty: Some(ValueType::F64) },
        ValueType::Bool => Literal::Bool(bits != 0),
        _ => Literal::Int { value: bits as i64, ty: Some(ty) },
    }
}

fn stmts_to_raw(stmts: &[TStmt]) -> Vec<Stmt> {
    stmts.iter().map(TStmt::to_stmt).collect()
}

impl TStmt {
    fn to_stmt(&self) -> Stmt {
        match self {
            TStmt::Declare { local, init } => Stmt::Declare { local: *local, init: init.as_ref().map(TExpr::to_expr) },
            TStmt::Assign { target, value } => Stmt::Assign {
                target: match target {
                    TTarget::Var(id) => Target::Var(*id),
                    TTarget::Index { elem, base, index } => {
                        Target::Index { elem: *elem, base: base.to_expr(), index: index.to_expr() }
                    }
                },
                value: value.to_expr(),
            },
            TStmt::If { cond, then_body, else_body } => Stmt::If {
                cond: cond.to_expr(),
                then_body: stmts_to_raw(then_body),
                else_body: stmts_to_raw(else_body),
            },
            TStmt::While { cond, body } => Stmt::While { cond: cond.to_expr(), body: stmts_to_raw(body) },
            TStmt::Return(e) => Stmt::Return(e.as_ref().map(TExpr::to_expr)),
            TStmt::Expr(e) => Stmt::Expr(e.to_expr()),
            TStmt::Block(b) => Stmt::Block(stmts_to_raw(b)),
        }
    }
}

impl TypedModule {
    /// Erases types. Re-checking the result reproduces `self`.
    pub fn to_module(&self) -> Module {
        Module {
            externals: self.externals.clone(),
            functions: self
                .functions
                .iter()
                .map(|f| Function {
                    name: f.name.clone(),
                    params: f.params,
                    ret: f.ret,
                    locals: f.locals.clone(),
                    body: stmts_to_raw(&f.body),
                })
                .collect(),
        }
    }

    pub fn function_index(&self, name: &str) -> Option<FuncId> {
        self.functions.iter().position(|f| f.name == name).map(|i| i as FuncId)
    }

    pub fn function(&self, name: &str) -> Option<&TFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}

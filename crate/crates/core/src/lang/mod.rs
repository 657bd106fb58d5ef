//! The small C-like source language: raw AST, typed AST and the type checker.
//!
//! Locals are pre-declared slots addressed by index. Parameters occupy the
//! first slots of a function's local table; every other local is introduced by
//! exactly one `Declare` statement.

mod check;
mod typed;

use std::fmt;

pub use check::{typecheck, TypeError};
pub use typed::{TExpr, TExprKind, TFunction, TStmt, TTarget, TypedModule};

/// Scalar value types. Every typed expression carries exactly one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueType {
    I32,
    I64,
    F64,
    Bool,
    /// Untyped address.
    Ptr,
}

impl ValueType {
    pub const ALL: [ValueType; 5] = [ValueType::I32, ValueType::I64, ValueType::F64, ValueType::Bool, ValueType::Ptr];

    pub fn name(self) -> &'static str {
        match self {
            ValueType::I32 => "i32",
            ValueType::I64 => "i64",
            ValueType::F64 => "f64",
            ValueType::Bool => "bool",
            ValueType::Ptr => "ptr",
        }
    }

    pub fn from_name(name: &str) -> Option<ValueType> {
        ValueType::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn is_integer(self) -> bool {
        matches!(self, ValueType::I32 | ValueType::I64)
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::I32 | ValueType::I64 | ValueType::F64)
    }

    /// Bytes occupied by one array element of this type. Frame slots are
    /// always 8 bytes regardless of type.
    pub fn storage_size(self) -> u64 {
        match self {
            ValueType::I32 => 4,
            ValueType::Bool => 1,
            ValueType::I64 | ValueType::F64 | ValueType::Ptr => 8,
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub const ALL: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
        }
    }

    pub fn accepts(self, ty: ValueType) -> bool {
        match self {
            BinOp::Add | BinOp::Sub | BinOp::Mul => ty.is_numeric(),
            BinOp::Div | BinOp::Mod => ty.is_integer(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    /// Equality works on every type; ordering only on numbers.
    pub fn accepts(self, ty: ValueType) -> bool {
        match self {
            CmpOp::Eq | CmpOp::Ne => true,
            _ => ty.is_numeric(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicOp {
    And,
    Or,
}

impl LogicOp {
    pub fn symbol(self) -> &'static str {
        match self {
            LogicOp::And => "&&",
            LogicOp::Or => "||",
        }
    }
}

pub type LocalId = u32;
pub type FuncId = u32;
pub type ExternId = u32;

/// A literal as written in source. `ty` is `None` for an unsuffixed integer
/// or float literal whose type comes from context during type checking.
#[derive(Debug, Clone, Copy)]
pub enum Literal {
    Int { value: i64, ty: Option<ValueType> },
    Float { value: f64, ty: Option<ValueType> },
    Bool(bool),
}

impl PartialEq for Literal {
    fn eq(&self, other: &Literal) -> bool {
        self.same(other)
    }
}

impl Eq for Literal {}

impl Literal {
    /// Bitwise equality for floats so that `-0.0` and `0.0` stay distinct.
    fn same(&self, other: &Literal) -> bool {
        match (self, other) {
            (Literal::Int { value: a, ty: t }, Literal::Int { value: b, ty: u }) => a == b && t == u,
            (Literal::Float { value: a, ty: t }, Literal::Float { value: b, ty: u }) => {
                a.to_bits() == b.to_bits() && t == u
            }
            (Literal::Bool(a), Literal::Bool(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Literal(Literal),
    Var(LocalId),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Compare {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// Short-circuit `&&` / `||`; desugared away by the type checker.
    Logic {
        op: LogicOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: FuncId,
        args: Vec<Expr>,
    },
    ExternalCall {
        ext: ExternId,
        args: Vec<Expr>,
    },
    /// `elem[base, index]`: element `index` of the array at `base`.
    Index {
        elem: ValueType,
        base: Box<Expr>,
        index: Box<Expr>,
    },
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        use Expr::*;
        match (self, other) {
            (Literal(a), Literal(b)) => a.same(b),
            (Var(a), Var(b)) => a == b,
            (Binary { op: o1, lhs: l1, rhs: r1 }, Binary { op: o2, lhs: l2, rhs: r2 }) => {
                o1 == o2 && l1 == l2 && r1 == r2
            }
            (Compare { op: o1, lhs: l1, rhs: r1 }, Compare { op: o2, lhs: l2, rhs: r2 }) => {
                o1 == o2 && l1 == l2 && r1 == r2
            }
            (Logic { op: o1, lhs: l1, rhs: r1 }, Logic { op: o2, lhs: l2, rhs: r2 }) => {
                o1 == o2 && l1 == l2 && r1 == r2
            }
            (Call { func: f1, args: a1 }, Call { func: f2, args: a2 }) => f1 == f2 && a1 == a2,
            (ExternalCall { ext: e1, args: a1 }, ExternalCall { ext: e2, args: a2 }) => e1 == e2 && a1 == a2,
            (Index { elem: t1, base: b1, index: i1 }, Index { elem: t2, base: b2, index: i2 }) => {
                t1 == t2 && b1 == b2 && i1 == i2
            }
            _ => false,
        }
    }
}

impl Eq for Expr {}

impl Expr {
    pub fn int(value: i64) -> Expr {
        Expr::Literal(Literal::Int { value, ty: None })
    }

    pub fn typed_int(value: i64, ty: ValueType) -> Expr {
        Expr::Literal(Literal::Int { value, ty: Some(ty) })
    }

    pub fn var(id: LocalId) -> Expr {
        Expr::Var(id)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn compare(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Compare { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn logic(op: LogicOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Logic { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn call(func: FuncId, args: Vec<Expr>) -> Expr {
        Expr::Call { func, args }
    }
}

/// Assignment target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Var(LocalId),
    Index { elem: ValueType, base: Expr, index: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Declare { local: LocalId, init: Option<Expr> },
    Assign { target: Target, value: Expr },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Option<Expr>),
    Expr(Expr),
    Block(Vec<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Local {
    pub name: String,
    pub ty: ValueType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    /// Number of leading entries of `locals` that are parameters.
    pub params: u32,
    pub ret: Option<ValueType>,
    pub locals: Vec<Local>,
    pub body: Vec<Stmt>,
}

impl Function {
    pub fn param_types(&self) -> impl Iterator<Item = ValueType> + '_ {
        self.locals[..self.params as usize].iter().map(|l| l.ty)
    }
}

/// Declaration of a host function callable from generated code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternDecl {
    pub name: String,
    pub params: Vec<ValueType>,
    pub ret: Option<ValueType>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Module {
    pub externals: Vec<ExternDecl>,
    pub functions: Vec<Function>,
}

impl Module {
    pub fn function_index(&self, name: &str) -> Option<FuncId> {
        self.functions.iter().position(|f| f.name == name).map(|i| i as FuncId)
    }
}

/// Canonical 64-bit representation of an `i32` value: sign-extended.
pub fn i32_bits(v: i32) -> u64 {
    v as i64 as u64
}

/// Reduces raw 64-bit bits to the canonical form of `ty`, as both execution
/// tiers expose results to the host.
pub fn canonical_bits(ty: Option<ValueType>, bits: u64) -> u64 {
    match ty {
        None => 0,
        Some(ValueType::I32) => i32_bits(bits as i32),
        Some(ValueType::Bool) => (bits != 0) as u64,
        Some(_) => bits,
    }
}

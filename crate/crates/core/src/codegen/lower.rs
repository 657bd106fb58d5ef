//! Lowering of a typed function to a flat instruction list.
//!
//! Every [`Inst`] becomes exactly one CPS node. Control flow is expressed with
//! labels and gotos, which only steer continuation edges and emit nothing.
//! Expression temporaries are numbered in push order, the same order the
//! register planner uses.

use super::regplan::PlanOp;
use super::supernode::{match_assignment, match_condition, Supernode};
use crate::lang::{ExternId, FuncId, Local, LocalId, TExpr, TExprKind, TFunction, TStmt, TTarget, ValueType};
use crate::stencil::{Loc, NodeKind, StencilKey};

pub type TempId = u32;
pub type LabelId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Temp(TempId),
    Var(LocalId),
    Lit(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    Local(LocalId),
    /// Argument slot `index` of call site `site`.
    Arg {
        site: u32,
        index: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aux {
    None,
    Dest(Dest),
    /// Label continuation 1 of a conditional jumps to.
    Else(LabelId),
    Call {
        func: FuncId,
        site: u32,
    },
    External {
        ext: ExternId,
        site: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inst {
    pub kind: NodeKind,
    pub ty: Option<ValueType>,
    ops: [Operand; 3],
    nops: u8,
    pub result: Option<TempId>,
    pub aux: Aux,
}

impl Inst {
    pub fn operands(&self) -> &[Operand] {
        &self.ops[..self.nops as usize]
    }

    pub fn plan_op(&self) -> PlanOp {
        let pops = self.operands().iter().filter(|o| matches!(o, Operand::Temp(_))).count();
        let call = matches!(self.kind, NodeKind::Call | NodeKind::ExternalCall);
        PlanOp::new(pops as u8, self.result.is_some(), call)
    }

    /// Stencil key given operand locations already resolved.
    pub fn key(&self, locs: &[Loc], pass_through: u8, spill: bool) -> StencilKey {
        StencilKey::new(self.kind, self.ty, locs, pass_through, spill)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    Inst(Inst),
    Label(LabelId),
    Goto(LabelId),
    /// Discards the value of an expression statement.
    Drop(TempId),
}

/// Outgoing argument area of one call site, relative to the caller's frame
/// extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Site {
    /// Bytes of argument areas of enclosing calls still being evaluated.
    pub pending: u32,
    /// Bytes this call's arguments occupy.
    pub area: u32,
    /// Callee, for internal calls.
    pub func: Option<FuncId>,
}

#[derive(Debug, Clone, Default)]
pub struct Lowered {
    pub items: Vec<Item>,
    pub temps: u32,
    pub labels: u32,
    pub sites: Vec<Site>,
}

impl Lowered {
    /// Plan ops in item order; labels and gotos contribute none.
    pub fn plan_ops(&self) -> Vec<PlanOp> {
        self.items
            .iter()
            .filter_map(|it| match it {
                Item::Inst(i) => Some(i.plan_op()),
                Item::Drop(_) => Some(PlanOp::new(1, false, false)),
                _ => None,
            })
            .collect()
    }

    pub fn insts(&self) -> impl Iterator<Item = &Inst> {
        self.items.iter().filter_map(|it| match it {
            Item::Inst(i) => Some(i),
            _ => None,
        })
    }
}

/// Bytes of argument block for a call with `arity` arguments.
pub fn arg_area(arity: usize) -> u32 {
    8 * arity.max(1) as u32
}

struct Lowerer<'a> {
    locals: &'a [Local],
    supernodes: bool,
    out: Lowered,
    pending: u32,
}

/// Lowers `f`. Call sites are recorded under the ids the type checker
/// assigned.
pub fn lower_function(f: &TFunction, supernodes: bool) -> Lowered {
    let mut l = Lowerer {
        locals: &f.locals,
        supernodes,
        out: Lowered { sites: vec![Site::default(); f.call_sites as usize], ..Lowered::default() },
        pending: 0,
    };
    l.stmts(&f.body);
    l.inst(NodeKind::Return, Some(ValueType::I64), &[Operand::Lit(0)], false, Aux::None);
    l.out
}

impl Lowerer<'_> {
    fn inst(
        &mut self,
        kind: NodeKind,
        ty: Option<ValueType>,
        operands: &[Operand],
        result: bool,
        aux: Aux,
    ) -> Option<TempId> {
        let mut ops = [Operand::Lit(0); 3];
        ops[..operands.len()].copy_from_slice(operands);
        let result = result.then(|| {
            self.out.temps += 1;
            self.out.temps - 1
        });
        self.out.items.push(Item::Inst(Inst { kind, ty, ops, nops: operands.len() as u8, result, aux }));
        result
    }

    fn label(&mut self) -> LabelId {
        self.out.labels += 1;
        self.out.labels - 1
    }

    fn stmts(&mut self, stmts: &[TStmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &TStmt) {
        match s {
            TStmt::Declare { local, init: Some(value) } => self.assign_local(*local, value),
            TStmt::Declare { local, init: None } => {
                let ty = zero_fill_type(self.locals[*local as usize].ty);
                let dest = Aux::Dest(Dest::Local(*local));
                self.inst(NodeKind::VarStore, Some(ty), &[Operand::Lit(0)], false, dest);
            }
            TStmt::Assign { target: TTarget::Var(id), value } => self.assign_local(*id, value),
            TStmt::Assign { target: TTarget::Index { elem, base, index }, value } => {
                let b = self.operand(base);
                let i = self.operand(index);
                let v = self.operand(value);
                self.inst(NodeKind::IndexStore, Some(*elem), &[b, i, v], false, Aux::None);
            }
            TStmt::If { cond, then_body, else_body } => {
                let else_l = self.label();
                let end = self.label();
                self.branch(cond, else_l);
                self.stmts(then_body);
                self.out.items.push(Item::Goto(end));
                self.out.items.push(Item::Label(else_l));
                self.stmts(else_body);
                self.out.items.push(Item::Label(end));
            }
            TStmt::While { cond, body } => {
                let head = self.label();
                let exit = self.label();
                self.out.items.push(Item::Label(head));
                self.branch(cond, exit);
                self.stmts(body);
                self.out.items.push(Item::Goto(head));
                self.out.items.push(Item::Label(exit));
            }
            TStmt::Return(value) => {
                let (ty, op) = match value {
                    Some(e) => (e.ty, self.operand(e)),
                    None => (ValueType::I64, Operand::Lit(0)),
                };
                self.inst(NodeKind::Return, Some(ty), &[op], false, Aux::None);
            }
            TStmt::Expr(e) => {
                if let Operand::Temp(t) = self.operand(e) {
                    self.out.items.push(Item::Drop(t));
                }
            }
            TStmt::Block(b) => self.stmts(b),
        }
    }

    fn assign_local(&mut self, dest: LocalId, value: &TExpr) {
        if self.supernodes {
            if let Some(Supernode::BinaryVarConst { op, var, ty, value, .. }) = match_assignment(dest, value) {
                let ops = [Operand::Var(var), Operand::Lit(value)];
                self.inst(NodeKind::BinaryVarConst(op), Some(ty), &ops, false, Aux::Dest(Dest::Local(dest)));
                return;
            }
        }
        let v = self.operand(value);
        self.inst(NodeKind::VarStore, Some(value.ty), &[v], false, Aux::Dest(Dest::Local(dest)));
    }

    /// Emits the conditional that falls to the next item when `cond` holds
    /// and jumps to `else_l` otherwise.
    fn branch(&mut self, cond: &TExpr, else_l: LabelId) {
        if self.supernodes {
            if let Some(Supernode::IfCmpVarConst { op, var, ty, value }) = match_condition(cond) {
                let ops = [Operand::Var(var), Operand::Lit(value)];
                self.inst(NodeKind::IfCmpVarConst(op), Some(ty), &ops, false, Aux::Else(else_l));
                return;
            }
        }
        let c = match self.operand(cond) {
            Operand::Lit(bits) => Operand::Temp(self.literal(ValueType::Bool, bits)),
            c => c,
        };
        self.inst(NodeKind::Branch, None, &[c], false, Aux::Else(else_l));
    }

    fn literal(&mut self, ty: ValueType, bits: u64) -> TempId {
        self.inst(NodeKind::Literal, Some(ty), &[Operand::Lit(bits)], true, Aux::None).unwrap()
    }

    /// Leaves are used in place; anything else is computed into a temporary.
    fn operand(&mut self, e: &TExpr) -> Operand {
        match e.kind {
            TExprKind::Literal(bits) => Operand::Lit(bits),
            TExprKind::Var(id) => Operand::Var(id),
            _ => Operand::Temp(self.value(e)),
        }
    }

    fn value(&mut self, e: &TExpr) -> TempId {
        match &e.kind {
            TExprKind::Literal(bits) => self.literal(e.ty, *bits),
            TExprKind::Var(id) => {
                self.inst(NodeKind::VarLoad, Some(e.ty), &[Operand::Var(*id)], true, Aux::None).unwrap()
            }
            TExprKind::Binary { op, lhs, rhs } => {
                let (a, b) = self.pair(lhs, rhs);
                self.inst(NodeKind::Binary(*op), Some(e.ty), &[a, b], true, Aux::None).unwrap()
            }
            TExprKind::Compare { op, lhs, rhs } => {
                let (a, b) = self.pair(lhs, rhs);
                self.inst(NodeKind::Compare(*op), Some(lhs.ty), &[a, b], true, Aux::None).unwrap()
            }
            TExprKind::Index { base, index } => {
                let b = self.operand(base);
                let i = self.operand(index);
                self.inst(NodeKind::IndexLoad, Some(e.ty), &[b, i], true, Aux::None).unwrap()
            }
            TExprKind::Call { func, args, site } => {
                self.call_args(args, *site, Some(*func));
                let aux = Aux::Call { func: *func, site: *site };
                self.inst(NodeKind::Call, None, &[], true, aux).unwrap()
            }
            TExprKind::ExternalCall { ext, args, site } => {
                self.call_args(args, *site, None);
                let aux = Aux::External { ext: *ext, site: *site };
                self.inst(NodeKind::ExternalCall, None, &[], true, aux).unwrap()
            }
        }
    }

    /// Operands of a binary node. Two literals cannot share a stencil, so
    /// the left one is materialized.
    fn pair(&mut self, lhs: &TExpr, rhs: &TExpr) -> (Operand, Operand) {
        let a = self.operand(lhs);
        let b = self.operand(rhs);
        match (a, b) {
            (Operand::Lit(bits), Operand::Lit(_)) => (Operand::Temp(self.literal(lhs.ty, bits)), b),
            _ => (a, b),
        }
    }

    /// Stores each argument into the callee frame as soon as it is computed.
    fn call_args(&mut self, args: &[TExpr], site: u32, func: Option<FuncId>) {
        let pending = self.pending;
        let area = arg_area(args.len());
        self.out.sites[site as usize] = Site { pending, area, func };
        self.pending = pending + area;
        for (i, a) in args.iter().enumerate() {
            let v = self.operand(a);
            let dest = Dest::Arg { site, index: i as u32 };
            self.inst(NodeKind::VarStore, Some(a.ty), &[v], false, Aux::Dest(dest));
        }
        self.pending = pending;
    }
}

/// Declarations without initializer store zero. `Ptr` has no literals, so
/// the zero is stored through an `I64` stencil.
pub fn zero_fill_type(ty: ValueType) -> ValueType {
    if ty == ValueType::Ptr {
        ValueType::I64
    } else {
        ty
    }
}

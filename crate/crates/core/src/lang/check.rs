//! Type checking, scope checking and short-circuit desugaring.

use rustc_hash::FxHashSet;

use super::typed::{TExpr, TExprKind, TFunction, TStmt, TTarget, TypedModule};
use super::{Expr, Function, Literal, Local, LocalId, LogicOp, Module, Stmt, Target, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("type mismatch at {path}: {detail}")]
    TypeMismatch { path: String, detail: String },
    #[error("undefined local #{local} at {path}")]
    UndefinedLocal { path: String, local: LocalId },
    #[error("undefined function {name} at {path}")]
    UndefinedFunction { path: String, name: String },
    #[error("function `{function}` can finish without returning a value")]
    MissingReturn { function: String },
    #[error("`{name}` is defined more than once")]
    DuplicateName { name: String },
    #[error("local #{local} is declared more than once at {path}")]
    Redeclared { path: String, local: LocalId },
    #[error("`&&`/`||` at {path} must be a whole condition, initializer, assigned value, returned value or statement")]
    MisplacedLogic { path: String },
}

type Result<T> = std::result::Result<T, TypeError>;

pub fn typecheck(module: &Module) -> Result<TypedModule> {
    let mut names = FxHashSet::default();
    for name in module.externals.iter().map(|e| &e.name).chain(module.functions.iter().map(|f| &f.name)) {
        if !names.insert(name.as_str()) {
            return Err(TypeError::DuplicateName { name: name.clone() });
        }
    }
    let functions = module.functions.iter().map(|f| FnChecker::new(module, f).run()).collect::<Result<Vec<_>>>()?;
    Ok(TypedModule { externals: module.externals.clone(), functions })
}

struct FnChecker<'a> {
    module: &'a Module,
    func: &'a Function,
    locals: Vec<Local>,
    declared: Vec<bool>,
    visible: Vec<bool>,
    scopes: Vec<Vec<LocalId>>,
    path: Vec<String>,
    names: FxHashSet<String>,
    temps: u32,
}

/// An unsuffixed integer literal, or arithmetic built only from them, takes
/// its type from the surrounding context.
fn flexible(e: &Expr) -> bool {
    match e {
        Expr::Literal(Literal::Int { ty: None, .. }) => true,
        Expr::Binary { lhs, rhs, .. } => flexible(lhs) && flexible(rhs),
        _ => false,
    }
}

impl<'a> FnChecker<'a> {
    fn new(module: &'a Module, func: &'a Function) -> Self {
        let n = func.locals.len();
        let mut declared = vec![false; n];
        let mut visible = vec![false; n];
        for i in 0..(func.params as usize).min(n) {
            declared[i] = true;
            visible[i] = true;
        }
        FnChecker {
            module,
            func,
            locals: func.locals.clone(),
            declared,
            visible,
            scopes: vec![Vec::new()],
            path: vec![func.name.clone()],
            names: func.locals.iter().map(|l| l.name.clone()).collect(),
            temps: 0,
        }
    }

    fn run(mut self) -> Result<TFunction> {
        if self.func.params as usize > self.func.locals.len() {
            return Err(self.mismatch("more parameters than locals".into()));
        }
        let mut body = Vec::new();
        self.path.push("body".into());
        self.block(&self.func.body, &mut body)?;
        self.path.pop();
        if self.func.ret.is_some() && !always_returns(&body) {
            return Err(TypeError::MissingReturn { function: self.func.name.clone() });
        }
        let mut r = Renumber {
            map: (0..self.locals.len()).map(|_| None).collect(),
            order: (0..self.func.params).collect(),
            sites: 0,
        };
        for p in 0..self.func.params {
            r.map[p as usize] = Some(p);
        }
        r.stmts(&mut body);
        let locals = r.order.iter().map(|&i| self.locals[i as usize].clone()).collect();
        Ok(TFunction {
            name: self.func.name.clone(),
            params: self.func.params,
            ret: self.func.ret,
            locals,
            body,
            call_sites: r.sites,
        })
    }

    fn path(&self) -> String {
        self.path.join("/")
    }

    fn mismatch(&self, detail: String) -> TypeError {
        TypeError::TypeMismatch { path: self.path(), detail }
    }

    fn expect(&self, e: &TExpr, ty: ValueType, what: &str) -> Result<()> {
        if e.ty == ty {
            Ok(())
        } else {
            Err(self.mismatch(format!("{what} must be {ty}, found {}", e.ty)))
        }
    }

    fn local_ty(&self, id: LocalId) -> Result<ValueType> {
        match self.locals.get(id as usize) {
            Some(l) if self.visible[id as usize] => Ok(l.ty),
            _ => Err(TypeError::UndefinedLocal { path: self.path(), local: id }),
        }
    }

    fn new_temp(&mut self) -> LocalId {
        let name = loop {
            let candidate = format!("t{}", self.temps);
            self.temps += 1;
            if !self.names.contains(&candidate) {
                break candidate;
            }
        };
        self.names.insert(name.clone());
        self.locals.push(Local { name, ty: ValueType::Bool });
        self.declared.push(true);
        self.visible.push(false);
        (self.locals.len() - 1) as LocalId
    }

    fn block(&mut self, stmts: &[Stmt], out: &mut Vec<TStmt>) -> Result<()> {
        self.scopes.push(Vec::new());
        for (i, s) in stmts.iter().enumerate() {
            self.path.push(i.to_string());
            self.stmt(s, out)?;
            self.path.pop();
        }
        for id in self.scopes.pop().unwrap() {
            self.visible[id as usize] = false;
        }
        Ok(())
    }

    fn scoped(&mut self, name: &str, stmts: &[Stmt]) -> Result<Vec<TStmt>> {
        let mut out = Vec::new();
        self.path.push(name.into());
        self.block(stmts, &mut out)?;
        self.path.pop();
        Ok(out)
    }

    /// Lowers `cond` into statements that leave its value in `t`.
    fn assign_logic(&mut self, t: LocalId, e: &Expr, out: &mut Vec<TStmt>) -> Result<()> {
        let set = |v: TExpr| TStmt::Assign { target: TTarget::Var(t), value: v };
        match e {
            Expr::Logic { op, lhs, rhs } => {
                self.assign_logic(t, lhs, out)?;
                let mut rest = Vec::new();
                self.assign_logic(t, rhs, &mut rest)?;
                let cond = TExpr::var(ValueType::Bool, t);
                out.push(match op {
                    LogicOp::And => TStmt::If { cond, then_body: rest, else_body: Vec::new() },
                    LogicOp::Or => TStmt::If { cond, then_body: Vec::new(), else_body: rest },
                });
            }
            _ => {
                let v = self.expr(e, Some(ValueType::Bool))?;
                self.expect(&v, ValueType::Bool, "operand of `&&`/`||`")?;
                out.push(set(v));
            }
        }
        Ok(())
    }

    /// Evaluates a short-circuit expression into a fresh temporary.
    fn logic_temp(&mut self, e: &Expr, out: &mut Vec<TStmt>) -> Result<LocalId> {
        let t = self.new_temp();
        out.push(TStmt::Declare { local: t, init: None });
        self.assign_logic(t, e, out)?;
        Ok(t)
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<TStmt>) -> Result<()> {
        match s {
            Stmt::Declare { local, init } => {
                let id = *local;
                let ty = match self.locals.get(id as usize) {
                    Some(l) if id >= self.func.params => l.ty,
                    _ => return Err(TypeError::UndefinedLocal { path: self.path(), local: id }),
                };
                if self.declared[id as usize] {
                    return Err(TypeError::Redeclared { path: self.path(), local: id });
                }
                self.declared[id as usize] = true;
                match init {
                    Some(e @ Expr::Logic { .. }) => {
                        if ty != ValueType::Bool {
                            return Err(self.mismatch(format!("`&&`/`||` yields bool, local is {ty}")));
                        }
                        out.push(TStmt::Declare { local: id, init: None });
                        self.assign_logic(id, e, out)?;
                    }
                    Some(e) => {
                        let v = self.expr(e, Some(ty))?;
                        self.expect(&v, ty, "initializer")?;
                        out.push(TStmt::Declare { local: id, init: Some(v) });
                    }
                    None => out.push(TStmt::Declare { local: id, init: None }),
                }
                self.visible[id as usize] = true;
                self.scopes.last_mut().unwrap().push(id);
            }
            Stmt::Assign { target, value } => {
                let (target, ty) = match target {
                    Target::Var(id) => (TTarget::Var(*id), self.local_ty(*id)?),
                    Target::Index { elem, base, index } => {
                        let (base, index) = self.index_parts(base, index)?;
                        (TTarget::Index { elem: *elem, base, index }, *elem)
                    }
                };
                if let Expr::Logic { .. } = value {
                    if ty != ValueType::Bool {
                        return Err(self.mismatch(format!("`&&`/`||` yields bool, target is {ty}")));
                    }
                    let mut inner = Vec::new();
                    let t = self.logic_temp(value, &mut inner)?;
                    inner.push(TStmt::Assign { target, value: TExpr::var(ValueType::Bool, t) });
                    out.push(TStmt::Block(inner));
                } else {
                    let v = self.expr(value, Some(ty))?;
                    self.expect(&v, ty, "assigned value")?;
                    out.push(TStmt::Assign { target, value: v });
                }
            }
            Stmt::If { cond, then_body, else_body } => {
                let mut pre = Vec::new();
                let c = self.cond(cond, &mut pre)?;
                let then_body = self.scoped("then", then_body)?;
                let else_body = self.scoped("else", else_body)?;
                let s = TStmt::If { cond: c, then_body, else_body };
                if pre.is_empty() {
                    out.push(s);
                } else {
                    pre.push(s);
                    out.push(TStmt::Block(pre));
                }
            }
            Stmt::While { cond, body } => {
                let mut pre = Vec::new();
                let c = self.cond(cond, &mut pre)?;
                let mut body = self.scoped("body", body)?;
                if pre.is_empty() {
                    out.push(TStmt::While { cond: c, body });
                } else {
                    let TExprKind::Var(t) = c.kind else { unreachable!() };
                    self.path.push("cond".into());
                    self.assign_logic(t, cond, &mut body)?;
                    self.path.pop();
                    pre.push(TStmt::While { cond: c, body });
                    out.push(TStmt::Block(pre));
                }
            }
            Stmt::Return(value) => {
                self.path.push("return".into());
                match (value, self.func.ret) {
                    (None, None) => out.push(TStmt::Return(None)),
                    (Some(e @ Expr::Logic { .. }), Some(ValueType::Bool)) => {
                        let mut inner = Vec::new();
                        let t = self.logic_temp(e, &mut inner)?;
                        inner.push(TStmt::Return(Some(TExpr::var(ValueType::Bool, t))));
                        out.push(TStmt::Block(inner));
                    }
                    (Some(e), Some(ty)) => {
                        let v = self.expr(e, Some(ty))?;
                        self.expect(&v, ty, "returned value")?;
                        out.push(TStmt::Return(Some(v)));
                    }
                    (Some(_), None) => return Err(self.mismatch("void function returns a value".into())),
                    (None, Some(ty)) => return Err(self.mismatch(format!("missing {ty} return value"))),
                }
                self.path.pop();
            }
            Stmt::Expr(e) => {
                if let Expr::Logic { .. } = e {
                    let mut inner = Vec::new();
                    self.logic_temp(e, &mut inner)?;
                    out.push(TStmt::Block(inner));
                } else {
                    let v = self.expr_or_void(e, None, true)?;
                    out.push(TStmt::Expr(v));
                }
            }
            Stmt::Block(b) => {
                let inner = self.scoped("block", b)?;
                out.push(TStmt::Block(inner));
            }
        }
        Ok(())
    }

    /// Checks a branch condition. Short-circuit conditions are evaluated into
    /// a temporary by statements appended to `pre`; the returned condition
    /// then reads that temporary.
    fn cond(&mut self, cond: &Expr, pre: &mut Vec<TStmt>) -> Result<TExpr> {
        self.path.push("cond".into());
        let c = if let Expr::Logic { .. } = cond {
            let t = self.logic_temp(cond, pre)?;
            TExpr::var(ValueType::Bool, t)
        } else {
            let c = self.expr(cond, Some(ValueType::Bool))?;
            self.expect(&c, ValueType::Bool, "condition")?;
            c
        };
        self.path.pop();
        Ok(c)
    }

    fn index_parts(&mut self, base: &Expr, index: &Expr) -> Result<(TExpr, TExpr)> {
        self.path.push("base".into());
        let b = self.expr(base, Some(ValueType::Ptr))?;
        self.expect(&b, ValueType::Ptr, "array base")?;
        self.path.pop();
        self.path.push("index".into());
        let i = self.expr(index, Some(ValueType::I64))?;
        self.expect(&i, ValueType::I64, "array index")?;
        self.path.pop();
        Ok((b, i))
    }

    fn expr(&mut self, e: &Expr, hint: Option<ValueType>) -> Result<TExpr> {
        self.expr_or_void(e, hint, false)
    }

    fn literal(&self, lit: &Literal, hint: Option<ValueType>) -> Result<TExpr> {
        match *lit {
            Literal::Bool(b) => Ok(TExpr::literal(ValueType::Bool, b as u64)),
            Literal::Float { value, ty } => match ty {
                None | Some(ValueType::F64) => Ok(TExpr::literal(ValueType::F64, value.to_bits())),
                Some(t) => Err(self.mismatch(format!("float literal cannot have type {t}"))),
            },
            Literal::Int { value, ty } => match ty.or(hint).unwrap_or(ValueType::I32) {
                ValueType::I32 => match i32::try_from(value) {
                    Ok(v) => Ok(TExpr::literal(ValueType::I32, v as i64 as u64)),
                    Err(_) => Err(self.mismatch(format!("literal {value} does not fit i32"))),
                },
                ValueType::I64 => Ok(TExpr::literal(ValueType::I64, value as u64)),
                ValueType::F64 => Ok(TExpr::literal(ValueType::F64, (value as f64).to_bits())),
                t => Err(self.mismatch(format!("integer literal cannot have type {t}"))),
            },
        }
    }

    fn operands(&mut self, lhs: &Expr, rhs: &Expr, hint: Option<ValueType>) -> Result<(TExpr, TExpr)> {
        let (l, r) = if !flexible(lhs) {
            let l = self.sub("lhs", lhs, hint)?;
            let r = self.sub("rhs", rhs, Some(l.ty))?;
            (l, r)
        } else if !flexible(rhs) {
            let r = self.sub("rhs", rhs, hint)?;
            let l = self.sub("lhs", lhs, Some(r.ty))?;
            (l, r)
        } else {
            let t = hint.unwrap_or(ValueType::I32);
            (self.sub("lhs", lhs, Some(t))?, self.sub("rhs", rhs, Some(t))?)
        };
        if l.ty != r.ty {
            return Err(self.mismatch(format!("operands differ: {} and {}", l.ty, r.ty)));
        }
        Ok((l, r))
    }

    fn sub(&mut self, name: &str, e: &Expr, hint: Option<ValueType>) -> Result<TExpr> {
        self.path.push(name.into());
        let v = self.expr(e, hint)?;
        self.path.pop();
        Ok(v)
    }

    fn args(&mut self, args: &[Expr], params: &[ValueType], callee: &str) -> Result<Vec<TExpr>> {
        if args.len() != params.len() {
            return Err(self.mismatch(format!("`{callee}` takes {} arguments, given {}", params.len(), args.len())));
        }
        let mut out = Vec::with_capacity(args.len());
        for (i, (a, &ty)) in args.iter().zip(params).enumerate() {
            let v = self.sub(&format!("arg{i}"), a, Some(ty))?;
            self.expect(&v, ty, "argument")?;
            out.push(v);
        }
        Ok(out)
    }

    fn expr_or_void(&mut self, e: &Expr, hint: Option<ValueType>, allow_void: bool) -> Result<TExpr> {
        let void_ok = |me: &Self, ret: Option<ValueType>, name: &str| match ret {
            Some(t) => Ok(t),
            None if allow_void => Ok(ValueType::I64),
            None => Err(me.mismatch(format!("`{name}` returns no value"))),
        };
        Ok(match e {
            Expr::Literal(lit) => self.literal(lit, hint)?,
            Expr::Var(id) => TExpr::var(self.local_ty(*id)?, *id),
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = self.operands(lhs, rhs, hint)?;
                if !op.accepts(l.ty) {
                    return Err(self.mismatch(format!("`{}` is not defined on {}", op.symbol(), l.ty)));
                }
                TExpr { ty: l.ty, kind: TExprKind::Binary { op: *op, lhs: Box::new(l), rhs: Box::new(r) } }
            }
            Expr::Compare { op, lhs, rhs } => {
                let (l, r) = self.operands(lhs, rhs, None)?;
                if !op.accepts(l.ty) {
                    return Err(self.mismatch(format!("`{}` is not defined on {}", op.symbol(), l.ty)));
                }
                TExpr { ty: ValueType::Bool, kind: TExprKind::Compare { op: *op, lhs: Box::new(l), rhs: Box::new(r) } }
            }
            Expr::Logic { .. } => return Err(TypeError::MisplacedLogic { path: self.path() }),
            Expr::Call { func, args } => {
                let Some(callee) = self.module.functions.get(*func as usize) else {
                    return Err(TypeError::UndefinedFunction { path: self.path(), name: format!("#{func}") });
                };
                let params: Vec<ValueType> = callee.param_types().collect();
                let ty = void_ok(self, callee.ret, &callee.name)?;
                let args = self.args(args, &params, &callee.name)?;
                TExpr { ty, kind: TExprKind::Call { func: *func, args, site: 0 } }
            }
            Expr::ExternalCall { ext, args } => {
                let Some(decl) = self.module.externals.get(*ext as usize) else {
                    return Err(TypeError::UndefinedFunction { path: self.path(), name: format!("extern #{ext}") });
                };
                let ty = void_ok(self, decl.ret, &decl.name)?;
                let args = self.args(args, &decl.params, &decl.name)?;
                TExpr { ty, kind: TExprKind::ExternalCall { ext: *ext, args, site: 0 } }
            }
            Expr::Index { elem, base, index } => {
                let (b, i) = self.index_parts(base, index)?;
                TExpr { ty: *elem, kind: TExprKind::Index { base: Box::new(b), index: Box::new(i) } }
            }
        })
    }
}

fn always_returns(stmts: &[TStmt]) -> bool {
    stmts.iter().any(|s| match s {
        TStmt::Return(_) => true,
        TStmt::If { then_body, else_body, .. } => always_returns(then_body) && always_returns(else_body),
        TStmt::Block(b) => always_returns(b),
        _ => false,
    })
}

/// Renumbers locals into textual declaration order and assigns call-site ids
/// in evaluation order.
struct Renumber {
    map: Vec<Option<LocalId>>,
    order: Vec<LocalId>,
    sites: u32,
}

impl Renumber {
    fn id(&self, old: LocalId) -> LocalId {
        self.map[old as usize].expect("reference precedes declaration")
    }

    fn stmts(&mut self, stmts: &mut [TStmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &mut TStmt) {
        match s {
            TStmt::Declare { local, init } => {
                if let Some(e) = init {
                    self.expr(e);
                }
                let new = self.order.len() as LocalId;
                self.map[*local as usize] = Some(new);
                self.order.push(*local);
                *local = new;
            }
            TStmt::Assign { target, value } => {
                match target {
                    TTarget::Var(id) => *id = self.id(*id),
                    TTarget::Index { base, index, .. } => {
                        self.expr(base);
                        self.expr(index);
                    }
                }
                self.expr(value);
            }
            TStmt::If { cond, then_body, else_body } => {
                self.expr(cond);
                self.stmts(then_body);
                self.stmts(else_body);
            }
            TStmt::While { cond, body } => {
                self.expr(cond);
                self.stmts(body);
            }
            TStmt::Return(Some(e)) | TStmt::Expr(e) => self.expr(e),
            TStmt::Return(None) => {}
            TStmt::Block(b) => self.stmts(b),
        }
    }

    fn expr(&mut self, e: &mut TExpr) {
        match &mut e.kind {
            TExprKind::Literal(_) => {}
            TExprKind::Var(id) => *id = self.id(*id),
            TExprKind::Binary { lhs, rhs, .. } | TExprKind::Compare { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            TExprKind::Call { args, site, .. } | TExprKind::ExternalCall { args, site, .. } => {
                *site = self.sites;
                self.sites += 1;
                for a in args {
                    self.expr(a);
                }
            }
            TExprKind::Index { base, index } => {
                self.expr(base);
                self.expr(index);
            }
        }
    }
}

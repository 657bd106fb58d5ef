//! Random well-typed, terminating programs for differential and round-trip
//! testing, plus a reducer for failing cases.
//!
//! Generated modules never recurse: function `i` only calls functions with a
//! larger index. Loops count a dedicated counter up to a literal bound and
//! the body never writes the counter. Array accesses use literal indices or
//! loop counters below the array length. The entry function is `f0`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::{
    typecheck, BinOp, CmpOp, Expr, ExternDecl, ExternId, Function, Literal, Local, LocalId, LogicOp, Module, Stmt,
    Target, ValueType,
};
use crate::runtime::stdlib;

/// Upper bound on a loop's literal trip count.
pub const MAX_TRIPS: i64 = 12;
/// Elements of every generated array; elements are 8 bytes.
const ARRAY_LEN: i64 = 8;
/// Work budget of one call, in executed statements, estimated statically.
const CALL_COST_CAP: u64 = 4_000;
const FUNCTION_COST_CAP: u64 = 20_000;

const SCALARS: [ValueType; 4] = [ValueType::I32, ValueType::I64, ValueType::F64, ValueType::Bool];
const ENTRY_PARAMS: [ValueType; 3] = [ValueType::I32, ValueType::I64, ValueType::F64];

/// The externals every generated module declares, in this order.
fn externals() -> Vec<ExternDecl> {
    let m = crate::frontend::parse(stdlib::DECLS).expect("stdlib declarations parse");
    m.externals
}

const EXT_FAIL_IF_NEG: ExternId = 1;
const EXT_MIX: ExternId = 2;
const EXT_ALLOC: ExternId = 3;
const EXT_PUT: ExternId = 4;

#[derive(Clone, Copy)]
struct Sig {
    ret: Option<ValueType>,
    cost: u64,
}

struct Var {
    id: LocalId,
    ty: ValueType,
    /// Loop counters are read-only; `bound` is their exclusive maximum.
    counter: Option<i64>,
}

struct FnGen<'a> {
    rng: &'a mut ChaCha8Rng,
    index: usize,
    callees: &'a [(usize, Vec<ValueType>, Sig)],
    locals: Vec<Local>,
    scopes: Vec<Vec<Var>>,
    arrays: Vec<LocalId>,
    ret: Option<ValueType>,
    budget: usize,
    mult: u64,
    loop_depth: u32,
    cost: u64,
}

/// Deterministic for a given seed. `budget` bounds the number of statements
/// across the whole module (at least one).
pub fn gen_program(seed: u64, budget: usize) -> Module {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = budget.max(1);
    let nfuncs = if budget < 8 { 1 } else { rng.gen_range(1..=(1 + budget / 40).min(4)) };
    let share = (budget / nfuncs).max(1);

    // Callees are generated first so their cost is known to callers.
    let mut sigs: Vec<Option<(Vec<ValueType>, Sig)>> = vec![None; nfuncs];
    let mut functions: Vec<Option<Function>> = vec![None; nfuncs];
    for index in (0..nfuncs).rev() {
        let (params, ret): (Vec<ValueType>, Option<ValueType>) = if index == 0 {
            let n = rng.gen_range(0..=ENTRY_PARAMS.len());
            let params = (0..n).map(|_| *ENTRY_PARAMS.choose(&mut rng).unwrap()).collect();
            (params, Some(*[ValueType::I64, ValueType::I32, ValueType::F64, ValueType::Bool].choose(&mut rng).unwrap()))
        } else {
            let n = rng.gen_range(0..=3);
            let params = (0..n).map(|_| *SCALARS.choose(&mut rng).unwrap()).collect();
            let ret = if rng.gen_bool(0.2) { None } else { Some(*SCALARS.choose(&mut rng).unwrap()) };
            (params, ret)
        };
        let callees: Vec<(usize, Vec<ValueType>, Sig)> =
            sigs.iter().enumerate().filter_map(|(j, s)| s.as_ref().map(|(p, sig)| (j, p.clone(), *sig))).collect();
        let mut g = FnGen {
            rng: &mut rng,
            index,
            callees: &callees,
            locals: Vec::new(),
            scopes: vec![Vec::new()],
            arrays: Vec::new(),
            ret,
            budget: if index == 0 { share + budget % nfuncs } else { share },
            mult: 1,
            loop_depth: 0,
            cost: 0,
        };
        let f = g.function(&params, budget == 1);
        sigs[index] = Some((params, Sig { ret, cost: g.cost.max(1) }));
        functions[index] = Some(f);
    }
    let externals = if budget == 1 { Vec::new() } else { externals() };
    Module { externals, functions: functions.into_iter().map(Option::unwrap).collect() }
}

impl FnGen<'_> {
    fn function(&mut self, params: &[ValueType], trivial: bool) -> Function {
        for &ty in params {
            self.new_local(ty, None);
        }
        let mut body = Vec::new();
        if !trivial {
            if self.index == 0 && self.rng.gen_bool(0.4) {
                for _ in 0..self.rng.gen_range(1..=2) {
                    let id = self.new_local(ValueType::Ptr, None);
                    let bytes = Expr::typed_int(ARRAY_LEN * 8, ValueType::I64);
                    body.push(Stmt::Declare {
                        local: id,
                        init: Some(Expr::ExternalCall { ext: EXT_ALLOC, args: vec![bytes] }),
                    });
                    self.arrays.push(id);
                    self.cost += 1;
                }
            }
            self.stmts(&mut body, 0);
        }
        if let Some(ty) = self.ret {
            // The trivial module declares no externals.
            let e = if trivial { self.leaf(ty) } else { self.expr(ty, 2) };
            body.push(Stmt::Return(Some(e)));
        }
        self.cost += 1;
        Function {
            name: format!("f{}", self.index),
            params: params.len() as u32,
            ret: self.ret,
            locals: std::mem::take(&mut self.locals),
            body,
        }
    }

    fn new_local(&mut self, ty: ValueType, counter: Option<i64>) -> LocalId {
        let id = self.locals.len() as LocalId;
        self.locals.push(Local { name: format!("v{id}"), ty });
        if ty != ValueType::Ptr {
            self.scopes.last_mut().unwrap().push(Var { id, ty, counter });
        }
        id
    }

    fn vars(&self, ty: ValueType) -> Vec<LocalId> {
        self.scopes.iter().flatten().filter(|v| v.ty == ty).map(|v| v.id).collect()
    }

    fn writable(&self) -> Vec<(LocalId, ValueType)> {
        self.scopes.iter().flatten().filter(|v| v.counter.is_none()).map(|v| (v.id, v.ty)).collect()
    }

    fn counters_below(&self, len: i64) -> Vec<LocalId> {
        self.scopes.iter().flatten().filter(|v| v.counter.is_some_and(|b| b <= len)).map(|v| v.id).collect()
    }

    fn stmts(&mut self, out: &mut Vec<Stmt>, depth: u32) {
        let n = if depth == 0 { self.budget } else { self.rng.gen_range(1..=3).min(self.budget) };
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.budget -= 1;
            self.cost += self.mult;
            let s = self.stmt(depth);
            out.push(s);
        }
    }

    fn block(&mut self, depth: u32) -> Vec<Stmt> {
        self.scopes.push(Vec::new());
        let mut body = Vec::new();
        self.stmts(&mut body, depth + 1);
        self.scopes.pop();
        body
    }

    fn stmt(&mut self, depth: u32) -> Stmt {
        let nested = depth < 3;
        match self.rng.gen_range(0..100) {
            0..=24 => {
                let ty = *SCALARS.choose(self.rng).unwrap();
                let init = if self.rng.gen_bool(0.85) { Some(self.expr(ty, 3)) } else { None };
                let id = self.new_local(ty, None);
                Stmt::Declare { local: id, init }
            }
            25..=49 => match self.writable().choose(self.rng).copied() {
                Some((id, ty)) => {
                    let value =
                        if ty == ValueType::Bool && self.rng.gen_bool(0.2) { self.logic(2) } else { self.expr(ty, 3) };
                    Stmt::Assign { target: Target::Var(id), value }
                }
                None => self.store_or_call(),
            },
            50..=64 if nested => {
                let cond = self.condition();
                let then_body = self.block(depth);
                let else_body = if self.rng.gen_bool(0.5) { self.block(depth) } else { Vec::new() };
                Stmt::If { cond, then_body, else_body }
            }
            65..=74 if nested && self.loop_depth < 2 => self.counted_loop(depth),
            75..=79 => {
                let e = self.ret.map(|ty| self.expr(ty, 2));
                if depth == 0 {
                    // A top-level return would make the rest dead; keep it
                    // conditional.
                    let cond = self.condition();
                    Stmt::If { cond, then_body: vec![Stmt::Return(e)], else_body: Vec::new() }
                } else {
                    Stmt::Return(e)
                }
            }
            80..=84 if nested => Stmt::Block(self.block(depth)),
            _ => self.store_or_call(),
        }
    }

    fn store_or_call(&mut self) -> Stmt {
        if !self.arrays.is_empty() && self.rng.gen_bool(0.5) {
            let base = Expr::var(*self.arrays.choose(self.rng).unwrap());
            let index = self.index_expr();
            let value = self.expr(ValueType::I64, 2);
            return Stmt::Assign { target: Target::Index { elem: ValueType::I64, base, index }, value };
        }
        if let Some(call) = self.call(None, 2) {
            return Stmt::Expr(call);
        }
        let arg = self.expr(ValueType::I64, 2);
        Stmt::Expr(Expr::ExternalCall { ext: EXT_PUT, args: vec![arg] })
    }

    fn counted_loop(&mut self, depth: u32) -> Stmt {
        let max = (CALL_COST_CAP / (self.mult * 4)).clamp(1, MAX_TRIPS as u64) as i64;
        let trips = self.rng.gen_range(0..=max);
        self.scopes.push(Vec::new());
        let id = self.new_local(ValueType::I64, Some(trips));
        let counter = Expr::var(id);
        let init = Stmt::Declare { local: id, init: Some(Expr::typed_int(0, ValueType::I64)) };
        let old = self.mult;
        self.mult *= trips.max(1) as u64;
        self.loop_depth += 1;
        let mut body = self.block(depth);
        self.loop_depth -= 1;
        self.mult = old;
        body.push(Stmt::Assign {
            target: Target::Var(id),
            value: Expr::binary(BinOp::Add, counter.clone(), Expr::typed_int(1, ValueType::I64)),
        });
        self.scopes.pop();
        let cond = Expr::compare(CmpOp::Lt, counter, Expr::typed_int(trips, ValueType::I64));
        Stmt::Block(vec![init, Stmt::While { cond, body }])
    }

    fn condition(&mut self) -> Expr {
        if self.rng.gen_bool(0.2) {
            self.logic(2)
        } else {
            self.expr(ValueType::Bool, 3)
        }
    }

    fn logic(&mut self, depth: u32) -> Expr {
        let op = if self.rng.gen_bool(0.5) { LogicOp::And } else { LogicOp::Or };
        let lhs =
            if depth > 0 && self.rng.gen_bool(0.3) { self.logic(depth - 1) } else { self.expr(ValueType::Bool, 2) };
        let rhs = self.expr(ValueType::Bool, 2);
        Expr::logic(op, lhs, rhs)
    }

    fn index_expr(&mut self) -> Expr {
        let counters = self.counters_below(ARRAY_LEN);
        if !counters.is_empty() && self.rng.gen_bool(0.5) {
            return Expr::var(*counters.choose(self.rng).unwrap());
        }
        let i = self.rng.gen_range(0..ARRAY_LEN);
        if self.rng.gen_bool(0.5) {
            Expr::int(i)
        } else {
            Expr::typed_int(i, ValueType::I64)
        }
    }

    fn literal(&mut self, ty: ValueType) -> Expr {
        let r = &mut self.rng;
        match ty {
            ValueType::Bool => Expr::Literal(Literal::Bool(r.gen())),
            ValueType::F64 => {
                let v = match r.gen_range(0..4) {
                    0 => r.gen_range(-4..=4) as f64,
                    1 => r.gen_range(-1.0e3..1.0e3),
                    2 => 0.5 * r.gen_range(-8..8) as f64,
                    _ => r.gen_range(-1.0..1.0) * 1.0e-3,
                };
                Expr::Literal(Literal::Float { value: v, ty: r.gen_bool(0.3).then_some(ValueType::F64) })
            }
            ValueType::I32 => {
                let v = small_or_extreme(r, i32::MIN as i64, i32::MAX as i64);
                if r.gen_bool(0.6) {
                    Expr::int(v)
                } else {
                    Expr::typed_int(v, ValueType::I32)
                }
            }
            _ => Expr::typed_int(small_or_extreme(r, i64::MIN, i64::MAX), ValueType::I64),
        }
    }

    fn leaf(&mut self, ty: ValueType) -> Expr {
        let vars = self.vars(ty);
        if !vars.is_empty() && self.rng.gen_bool(0.6) {
            Expr::var(*vars.choose(self.rng).unwrap())
        } else {
            self.literal(ty)
        }
    }

    fn expr(&mut self, ty: ValueType, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf(ty);
        }
        match (ty, self.rng.gen_range(0..10)) {
            (ValueType::Bool, 0..=6) => {
                let t = *[ValueType::I32, ValueType::I64, ValueType::F64, ValueType::Bool].choose(self.rng).unwrap();
                let op = *CmpOp::ALL.iter().filter(|o| o.accepts(t)).collect::<Vec<_>>().choose(self.rng).unwrap();
                let lhs = self.expr(t, depth - 1);
                let rhs = self.expr(t, depth - 1);
                Expr::compare(*op, lhs, rhs)
            }
            (ValueType::I32 | ValueType::I64 | ValueType::F64, 0..=5) => {
                let op = *BinOp::ALL.iter().filter(|o| o.accepts(ty)).collect::<Vec<_>>().choose(self.rng).unwrap();
                let lhs = self.expr(ty, depth - 1);
                let rhs = if matches!(op, BinOp::Div | BinOp::Mod) && self.rng.gen_bool(0.85) {
                    self.nonzero(ty)
                } else {
                    self.expr(ty, depth - 1)
                };
                Expr::binary(*op, lhs, rhs)
            }
            (ValueType::I64, 6) if !self.arrays.is_empty() => {
                let base = Expr::var(*self.arrays.choose(self.rng).unwrap());
                let index = self.index_expr();
                Expr::Index { elem: ValueType::I64, base: Box::new(base), index: Box::new(index) }
            }
            (ValueType::I64, 7) => {
                let (a, b) = (self.expr(ValueType::I64, depth - 1), self.expr(ValueType::I64, depth - 1));
                Expr::ExternalCall { ext: EXT_MIX, args: vec![a, b] }
            }
            (ValueType::I64, 8) if self.rng.gen_bool(0.3) => {
                let a = self.expr(ValueType::I64, depth - 1);
                Expr::ExternalCall { ext: EXT_FAIL_IF_NEG, args: vec![a] }
            }
            _ => self.call(Some(ty), depth).unwrap_or_else(|| self.leaf(ty)),
        }
    }

    fn nonzero(&mut self, ty: ValueType) -> Expr {
        let mut v = self.rng.gen_range(-9..=9);
        if v == 0 {
            v = 3;
        }
        Expr::typed_int(v, ty)
    }

    /// A call returning `ty` (any callee when `None`), if one fits the
    /// remaining cost budget.
    fn call(&mut self, ty: Option<ValueType>, depth: u32) -> Option<Expr> {
        let mult = self.mult;
        let spent = self.cost;
        let fits: Vec<&(usize, Vec<ValueType>, Sig)> = self
            .callees
            .iter()
            .filter(|(_, _, s)| ty.is_none_or(|t| s.ret == Some(t)))
            .filter(|(_, _, s)| mult * s.cost <= CALL_COST_CAP && spent + mult * s.cost <= FUNCTION_COST_CAP)
            .collect();
        let &(j, ref params, sig) = *fits.choose(self.rng)?;
        let params = params.clone();
        self.cost += mult * sig.cost;
        let args = params.iter().map(|&p| self.expr(p, depth.saturating_sub(1))).collect();
        Some(Expr::Call { func: j as u32, args })
    }
}

fn small_or_extreme<R: Rng>(r: &mut R, min: i64, max: i64) -> i64 {
    match r.gen_range(0..10) {
        0 => min,
        1 => max,
        2 => r.gen_range(min..=max),
        _ => r.gen_range(-20..=20),
    }
}

/// Random inputs for the entry function's parameters.
pub fn gen_inputs(module: &Module, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e55);
    let f = &module.functions[0];
    f.param_types()
        .map(|t| match t {
            ValueType::I32 => small_or_extreme(&mut rng, i32::MIN as i64, i32::MAX as i64) as u64,
            ValueType::I64 => small_or_extreme(&mut rng, i64::MIN, i64::MAX) as u64,
            ValueType::F64 => (rng.gen_range(-100.0f64..100.0)).to_bits(),
            _ => rng.gen_range(0..2),
        })
        .collect()
}

/// Input vectors each fuzzed program is run on.
pub const INPUT_VECTORS: u64 = 3;

/// [`INPUT_VECTORS`] independent argument vectors for `module`'s entry.
pub fn gen_input_sets(module: &Module, seed: u64) -> Vec<Vec<u64>> {
    (0..INPUT_VECTORS).map(|j| gen_inputs(module, seed.wrapping_mul(INPUT_VECTORS).wrapping_add(j))).collect()
}

/// Shrinks `module` while `fails` keeps holding: drops statements, unwraps
/// `if`, `while` and blocks into their bodies, and repeats until nothing
/// more can go. Every candidate must still type-check.
pub fn minimize(module: &Module, mut fails: impl FnMut(&Module) -> bool) -> Module {
    let mut best = module.clone();
    loop {
        let mut improved = false;
        for f in 0..best.functions.len() {
            let mut i = 0;
            loop {
                let count = count_stmts(&best.functions[f].body);
                if i >= count {
                    break;
                }
                let mut accepted = false;
                for edit in [Edit::Remove, Edit::Unwrap] {
                    let mut cand = best.clone();
                    if !apply(&mut cand.functions[f].body, &mut i.clone(), edit) {
                        continue;
                    }
                    if typecheck(&cand).is_ok() && fails(&cand) {
                        best = cand;
                        accepted = true;
                        improved = true;
                        break;
                    }
                }
                if !accepted {
                    i += 1;
                }
            }
        }
        if !improved {
            return best;
        }
    }
}

#[derive(Clone, Copy)]
enum Edit {
    Remove,
    Unwrap,
}

fn count_stmts(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| {
            1 + match s {
                Stmt::If { then_body, else_body, .. } => count_stmts(then_body) + count_stmts(else_body),
                Stmt::While { body, .. } | Stmt::Block(body) => count_stmts(body),
                _ => 0,
            }
        })
        .sum()
}

/// Applies `edit` to the `n`-th statement in pre-order.
fn apply(stmts: &mut Vec<Stmt>, n: &mut usize, edit: Edit) -> bool {
    let mut k = 0;
    while k < stmts.len() {
        if *n == 0 {
            match edit {
                Edit::Remove => {
                    stmts.remove(k);
                }
                Edit::Unwrap => {
                    let inner = match &mut stmts[k] {
                        Stmt::If { then_body, else_body, .. } => {
                            let mut v = std::mem::take(then_body);
                            v.append(else_body);
                            v
                        }
                        Stmt::While { body, .. } | Stmt::Block(body) => std::mem::take(body),
                        _ => return false,
                    };
                    stmts.splice(k..=k, inner);
                }
            }
            return true;
        }
        *n -= 1;
        let hit = match &mut stmts[k] {
            Stmt::If { then_body, else_body, .. } => apply(then_body, n, edit) || apply(else_body, n, edit),
            Stmt::While { body, .. } | Stmt::Block(body) => apply(body, n, edit),
            _ => false,
        };
        if hit {
            return true;
        }
        k += 1;
    }
    false
}

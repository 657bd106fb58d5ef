//! Reference tier: a tree-walking interpreter over the typed module.
//!
//! It defines the observable semantics the compiled tier must reproduce,
//! including frame-pool exhaustion, which it mirrors with the same per-site
//! frame arithmetic the code generator uses.

use crate::codegen::{frame_table, CodegenOptions, FrameTable};
use crate::lang::{
    canonical_bits, i32_bits, BinOp, CmpOp, FuncId, TExpr, TExprKind, TStmt, TTarget, TypedModule, ValueType,
};
use crate::outcome::{InvokeError, Outcome, Trap, DEFAULT_POOL_BYTES};
use crate::runtime::{ExternalRegistry, HostFn};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("unresolved external symbol `{0}`")]
    UnresolvedExternal(String),
}

pub struct Interpreter<'m> {
    module: &'m TypedModule,
    frames: FrameTable,
    externals: Vec<HostFn>,
    pool_bytes: u64,
}

enum Flow {
    Next,
    Return(u64),
}

/// Abnormal termination unwinds straight to the host.
type Exec<T> = Result<T, Outcome>;

impl<'m> Interpreter<'m> {
    /// Frame sizes follow `opts`, so a trap on pool exhaustion happens at the
    /// same call as in code compiled with the same options.
    pub fn new(
        module: &'m TypedModule,
        opts: &CodegenOptions,
        registry: &ExternalRegistry,
    ) -> Result<Self, InterpError> {
        let externals = module
            .externals
            .iter()
            .map(|e| registry.get(&e.name).ok_or_else(|| InterpError::UnresolvedExternal(e.name.clone())))
            .collect::<Result<_, _>>()?;
        Ok(Interpreter { module, frames: frame_table(module, opts), externals, pool_bytes: DEFAULT_POOL_BYTES })
    }

    pub fn with_pool_bytes(mut self, bytes: u64) -> Self {
        self.pool_bytes = bytes;
        self
    }

    pub fn pool_bytes(&self) -> u64 {
        self.pool_bytes
    }

    /// Calls `name` with raw argument bits, canonicalized per parameter
    /// type. Runs on a dedicated thread whose stack scales with the pool.
    pub fn invoke(&self, name: &str, args: &[u64]) -> Result<Outcome, InvokeError> {
        let id = self.module.function_index(name).ok_or_else(|| InvokeError::UnknownFunction(name.into()))?;
        let f = &self.module.functions[id as usize];
        if f.params as usize != args.len() {
            return Err(InvokeError::ArityMismatch { name: name.into(), expected: f.params as usize, got: args.len() });
        }
        let args: Vec<u64> = f.param_types().zip(args).map(|(t, &a)| canonical_bits(Some(t), a)).collect();
        let stack = 16 * 1024 * 1024 + (self.pool_bytes as usize / 8) * 4096;
        let outcome = std::thread::scope(|s| {
            std::thread::Builder::new()
                .stack_size(stack)
                .spawn_scoped(s, || self.run(id, &args))
                .expect("spawn interpreter thread")
                .join()
                .expect("interpreter thread panicked")
        });
        Ok(outcome)
    }

    fn run(&self, id: FuncId, args: &[u64]) -> Outcome {
        if self.frames.extents[id as usize] as u64 > self.pool_bytes {
            return Outcome::Trap(Trap::FrameOverflow);
        }
        let ret = self.module.functions[id as usize].ret;
        match self.call(id, 0, args) {
            Ok(v) => Outcome::Value(canonical_bits(ret, v)),
            Err(o) => o,
        }
    }

    fn call(&self, id: FuncId, fp: u64, args: &[u64]) -> Exec<u64> {
        let f = &self.module.functions[id as usize];
        let mut cx = Activation { interp: self, func: id, fp, locals: vec![0; f.locals.len()] };
        cx.locals[..args.len()].copy_from_slice(args);
        match cx.stmts(&f.body)? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(0),
        }
    }

    /// Frame of the callee at `site`, or a trap when it leaves the pool.
    fn enter(&self, func: FuncId, fp: u64, site: u32) -> Exec<u64> {
        let (delta, need) = self.frames.sites[func as usize][site as usize];
        let callee = fp + delta as u64;
        if callee + need as u64 > self.pool_bytes {
            return Err(Outcome::Trap(Trap::FrameOverflow));
        }
        Ok(callee)
    }
}

struct Activation<'a, 'm> {
    interp: &'a Interpreter<'m>,
    func: FuncId,
    fp: u64,
    locals: Vec<u64>,
}

impl Activation<'_, '_> {
    fn stmts(&mut self, stmts: &[TStmt]) -> Exec<Flow> {
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &TStmt) -> Exec<Flow> {
        match s {
            TStmt::Declare { local, init } => {
                self.locals[*local as usize] = match init {
                    Some(e) => self.eval(e)?,
                    None => 0,
                };
            }
            TStmt::Assign { target: TTarget::Var(id), value } => {
                self.locals[*id as usize] = self.eval(value)?;
            }
            TStmt::Assign { target: TTarget::Index { elem, base, index }, value } => {
                let addr = self.address(*elem, base, index)?;
                let v = self.eval(value)?;
                // SAFETY: programs only index memory they obtained from the
                // host, the same contract compiled code relies on.
                unsafe { store(*elem, addr, v) };
            }
            TStmt::If { cond, then_body, else_body } => {
                let body = if self.eval(cond)? != 0 { then_body } else { else_body };
                return self.stmts(body);
            }
            TStmt::While { cond, body } => {
                while self.eval(cond)? != 0 {
                    if let Flow::Return(v) = self.stmts(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            TStmt::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e)?,
                    None => 0,
                };
                return Ok(Flow::Return(v));
            }
            TStmt::Expr(e) => {
                self.eval(e)?;
            }
            TStmt::Block(b) => return self.stmts(b),
        }
        Ok(Flow::Next)
    }

    fn address(&mut self, elem: ValueType, base: &TExpr, index: &TExpr) -> Exec<u64> {
        let b = self.eval(base)?;
        let i = self.eval(index)?;
        Ok(b.wrapping_add(i.wrapping_mul(elem.storage_size())))
    }

    fn eval(&mut self, e: &TExpr) -> Exec<u64> {
        Ok(match &e.kind {
            TExprKind::Literal(bits) => *bits,
            TExprKind::Var(id) => self.locals[*id as usize],
            TExprKind::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                binary(*op, e.ty, a, b).map_err(Outcome::Trap)?
            }
            TExprKind::Compare { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                compare(*op, lhs.ty, a, b) as u64
            }
            TExprKind::Index { base, index } => {
                let addr = self.address(e.ty, base, index)?;
                // SAFETY: see the store above.
                unsafe { load(e.ty, addr) }
            }
            TExprKind::Call { func, args, site } => {
                let vals = self.args(args)?;
                let fp = self.interp.enter(self.func, self.fp, *site)?;
                self.interp.call(*func, fp, &vals)?
            }
            TExprKind::ExternalCall { ext, args, site } => {
                let mut block = self.args(args)?;
                block.resize(block.len().max(1), 0);
                self.interp.enter(self.func, self.fp, *site)?;
                let f = self.interp.externals[*ext as usize];
                // SAFETY: the block holds one slot per declared parameter and
                // at least one for the result.
                if unsafe { f(block.as_mut_ptr()) } {
                    return Err(Outcome::ExternalError);
                }
                canonical_bits(self.interp.module.externals[*ext as usize].ret, block[0])
            }
        })
    }

    fn args(&mut self, args: &[TExpr]) -> Exec<Vec<u64>> {
        args.iter().map(|a| self.eval(a)).collect()
    }
}

/// Arithmetic on canonical operands. Integers wrap, including `MIN / -1`;
/// only a zero divisor traps.
pub fn binary(op: BinOp, ty: ValueType, a: u64, b: u64) -> Result<u64, Trap> {
    match ty {
        ValueType::F64 => {
            let (x, y) = (f64::from_bits(a), f64::from_bits(b));
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div | BinOp::Mod => unreachable!("integer-only operator on f64"),
            };
            Ok(r.to_bits())
        }
        ValueType::I32 => {
            let (x, y) = (a as i32, b as i32);
            let r = match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::Div if y == 0 => return Err(Trap::DivByZero),
                BinOp::Div => x.wrapping_div(y),
                BinOp::Mod if y == 0 => return Err(Trap::DivByZero),
                BinOp::Mod => x.wrapping_rem(y),
            };
            Ok(i32_bits(r))
        }
        _ => {
            let (x, y) = (a as i64, b as i64);
            let r = match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::Div if y == 0 => return Err(Trap::DivByZero),
                BinOp::Div => x.wrapping_div(y),
                BinOp::Mod if y == 0 => return Err(Trap::DivByZero),
                BinOp::Mod => x.wrapping_rem(y),
            };
            Ok(r as u64)
        }
    }
}

/// Comparison of canonical operands of type `ty`.
pub fn compare(op: CmpOp, ty: ValueType, a: u64, b: u64) -> bool {
    use std::cmp::Ordering;
    let ord = match ty {
        ValueType::F64 => f64::from_bits(a).partial_cmp(&f64::from_bits(b)),
        ValueType::I32 | ValueType::I64 => Some((a as i64).cmp(&(b as i64))),
        ValueType::Bool => Some((a != 0).cmp(&(b != 0))),
        ValueType::Ptr => Some(a.cmp(&b)),
    };
    match (op, ord) {
        (CmpOp::Eq, o) => o == Some(Ordering::Equal),
        (CmpOp::Ne, o) => o != Some(Ordering::Equal),
        (_, None) => false,
        (CmpOp::Lt, Some(o)) => o.is_lt(),
        (CmpOp::Le, Some(o)) => o.is_le(),
        (CmpOp::Gt, Some(o)) => o.is_gt(),
        (CmpOp::Ge, Some(o)) => o.is_ge(),
    }
}

/// # Safety
/// `addr` must be valid for a read of `ty.storage_size()` bytes.
unsafe fn load(ty: ValueType, addr: u64) -> u64 {
    let p = addr as usize as *const u8;
    match ty {
        ValueType::I32 => i32_bits(p.cast::<i32>().read_unaligned()),
        ValueType::Bool => (p.read() != 0) as u64,
        _ => p.cast::<u64>().read_unaligned(),
    }
}

/// # Safety
/// `addr` must be valid for a write of `ty.storage_size()` bytes.
unsafe fn store(ty: ValueType, addr: u64, v: u64) {
    let p = addr as usize as *mut u8;
    match ty {
        ValueType::I32 => p.cast::<i32>().write_unaligned(v as i32),
        ValueType::Bool => p.write((v != 0) as u8),
        _ => p.cast::<u64>().write_unaligned(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::lang::typecheck;
    use crate::runtime::stdlib;

    fn run(src: &str, name: &str, args: &[u64]) -> Outcome {
        let m = typecheck(&parse(src).unwrap()).unwrap();
        let reg = stdlib::registry();
        let it = Interpreter::new(&m, &CodegenOptions::default(), &reg).unwrap();
        it.invoke(name, args).unwrap()
    }

    fn fib_closed_form(n: u32) -> u64 {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        (phi.powi(n as i32) / 5f64.sqrt()).round() as u64
    }

    #[test]
    fn fib_matches_closed_form() {
        let src = "fn fib(n: i32) -> i32 { if (n <= 2) { return 1; } return fib(n - 1) + fib(n - 2); }";
        for n in 1..=20 {
            assert_eq!(run(src, "fib", &[n as u64]), Outcome::Value(fib_closed_form(n)), "fib({n})");
        }
    }

    #[test]
    fn sieve_counts_primes_below_100() {
        let src = format!(
            "{}fn primes(n: i64) -> i64 {{
                let flags: ptr = alloc(n);
                let count: i64 = 0;
                let i: i64 = 2;
                while (i < n) {{
                    if (bool[flags, i] == false) {{
                        count = count + 1;
                        let j: i64 = i * i;
                        while (j < n) {{ bool[flags, j] = true; j = j + i; }}
                    }}
                    i = i + 1;
                }}
                return count;
            }}",
            stdlib::DECLS
        );
        assert_eq!(run(&src, "primes", &[100]), Outcome::Value(25));
    }

    #[test]
    fn traps_and_external_errors_unwind() {
        let src = format!(
            "{}fn div(a: i64, b: i64) -> i64 {{ return a / b; }}
             fn bad() -> i64 {{ let x: i64 = fail_if_neg(-3); return x + 1; }}
             fn deep(n: i64) -> i64 {{ return deep(n + 1) + 1; }}
             fn wrap() -> i32 {{ let m: i32 = -2147483647 - 1; return m / -1; }}",
            stdlib::DECLS
        );
        assert_eq!(run(&src, "div", &[7, 0]), Outcome::Trap(Trap::DivByZero));
        assert_eq!(run(&src, "div", &[7, 2]), Outcome::Value(3));
        assert_eq!(run(&src, "bad", &[]), Outcome::ExternalError);
        assert_eq!(run(&src, "deep", &[0]), Outcome::Trap(Trap::FrameOverflow));
        assert_eq!(run(&src, "wrap", &[]), Outcome::Value(i32_bits(i32::MIN)));
    }

    #[test]
    fn overflow_depth_follows_frame_extents() {
        let src = "fn down(n: i64) -> i64 { if (n == 0) { return 0; } return down(n - 1) + 1; }";
        let m = typecheck(&parse(src).unwrap()).unwrap();
        let reg = ExternalRegistry::new();
        let opts = CodegenOptions::default();
        let extent = frame_table(&m, &opts).extents[0] as u64;
        // depth d needs frames 0..=d, each one extent apart.
        let it = Interpreter::new(&m, &opts, &reg).unwrap().with_pool_bytes(extent * 10);
        assert_eq!(it.invoke("down", &[9]).unwrap(), Outcome::Value(9));
        assert_eq!(it.invoke("down", &[10]).unwrap(), Outcome::Trap(Trap::FrameOverflow));
    }

    #[test]
    fn host_arguments_are_canonicalized() {
        let src = "fn id(x: i32) -> i32 { return x; } fn not(b: bool) -> bool { return b == false; }";
        assert_eq!(run(src, "id", &[0xFFFF_FFFF]), Outcome::Value(u64::MAX));
        assert_eq!(run(src, "not", &[6]), Outcome::Value(0));
    }

    #[test]
    fn invoke_errors() {
        let src = "fn f(a: i64) -> i64 { return a; }";
        let m = typecheck(&parse(src).unwrap()).unwrap();
        let it = Interpreter::new(&m, &CodegenOptions::default(), &ExternalRegistry::new()).unwrap();
        assert!(matches!(it.invoke("g", &[]), Err(InvokeError::UnknownFunction(_))));
        assert!(matches!(it.invoke("f", &[]), Err(InvokeError::ArityMismatch { expected: 1, got: 0, .. })));
        let m = typecheck(&parse("extern fn nope() -> i64; fn f() -> i64 { return nope(); }").unwrap()).unwrap();
        let err = Interpreter::new(&m, &CodegenOptions::default(), &ExternalRegistry::new()).err();
        assert_eq!(err, Some(InterpError::UnresolvedExternal("nope".into())));
    }

    #[test]
    fn float_comparisons_follow_ieee() {
        let nan = f64::NAN.to_bits();
        assert!(!compare(CmpOp::Eq, ValueType::F64, nan, nan));
        assert!(compare(CmpOp::Ne, ValueType::F64, nan, nan));
        assert!(!compare(CmpOp::Lt, ValueType::F64, nan, 0));
        assert!(compare(CmpOp::Lt, ValueType::I32, i32_bits(-1), 0));
    }
}

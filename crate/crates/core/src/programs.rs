//! Benchmark programs in source form and the synthetic scaling workload.

use crate::codegen::{prepare_module, CodegenOptions, CompileError, LinkInputs};
use crate::lang::{BinOp, Expr, Function, Local, Module, Stmt, Target, TypedModule, ValueType};
use crate::runtime::stdlib;
use crate::stencil::StencilLibrary;

pub const FIB: &str = "fn fib(n: i32) -> i32 {
    if (n <= 2) {
        return 1;
    }
    return fib(n - 1) + fib(n - 2);
}
";

const SIEVE_BODY: &str = "fn sieve(n: i64) -> i64 {
    let flags: ptr = alloc(n);
    let count: i64 = 0;
    let i: i64 = 2;
    while (i < n) {
        if (bool[flags, i] == false) {
            count = count + 1;
            let j: i64 = i * i;
            while (j < n) {
                bool[flags, j] = true;
                j = j + i;
            }
        }
        i = i + 1;
    }
    return count;
}
";

const QUICKSORT_BODY: &str = "fn partition(a: ptr, lo: i64, hi: i64) -> i64 {
    let pivot: i64 = i64[a, hi];
    let i: i64 = lo;
    let j: i64 = lo;
    while (j < hi) {
        if (i64[a, j] < pivot) {
            let t: i64 = i64[a, i];
            i64[a, i] = i64[a, j];
            i64[a, j] = t;
            i = i + 1;
        }
        j = j + 1;
    }
    let last: i64 = i64[a, i];
    i64[a, i] = i64[a, hi];
    i64[a, hi] = last;
    return i;
}

fn quicksort(a: ptr, lo: i64, hi: i64) {
    if (lo < hi) {
        let p: i64 = partition(a, lo, hi);
        quicksort(a, lo, p - 1);
        quicksort(a, p + 1, hi);
    }
}

fn sort_check(n: i64, seed: i64) -> i64 {
    let a: ptr = alloc(n * 8i64);
    let x: i64 = seed;
    let i: i64 = 0;
    while (i < n) {
        x = x * 6364136223846793005i64 + 1442695040888963407i64;
        i64[a, i] = x / 65536i64 % 1000000i64;
        i = i + 1;
    }
    quicksort(a, 0, n - 1);
    let sum: i64 = 0;
    i = 1;
    while (i < n) {
        if (i64[a, i - 1] > i64[a, i]) {
            return -1;
        }
        sum = sum * 31i64 + i64[a, i];
        i = i + 1;
    }
    return sum;
}
";

pub fn sieve_source() -> String {
    format!("{}{SIEVE_BODY}", stdlib::DECLS)
}

pub fn quicksort_source() -> String {
    format!("{}{QUICKSORT_BODY}", stdlib::DECLS)
}

/// One microbenchmark: a program, its entry point and the input it is
/// timed with.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub source: String,
    pub entry: &'static str,
    pub args: Vec<u64>,
}

/// Inputs are sized so the interpreter spends a few hundred milliseconds.
pub fn micro_suite() -> Vec<Benchmark> {
    vec![
        Benchmark { name: "fib", source: FIB.to_string(), entry: "fib", args: vec![27] },
        Benchmark { name: "sieve", source: sieve_source(), entry: "sieve", args: vec![2_000_000] },
        Benchmark { name: "quicksort", source: quicksort_source(), entry: "sort_check", args: vec![100_000, 7] },
    ]
}

/// `fn inc(x: i64, y: i64) -> i64` made of `n` statements `x = x + y;`
/// followed by `return x;`.
pub fn scaling_module(n: usize) -> Module {
    let add = Stmt::Assign { target: Target::Var(0), value: Expr::binary(BinOp::Add, Expr::var(0), Expr::var(1)) };
    let mut body = vec![add; n];
    body.push(Stmt::Return(Some(Expr::var(0))));
    let local = |name: &str| Local { name: name.into(), ty: ValueType::I64 };
    Module {
        externals: Vec::new(),
        functions: vec![Function {
            name: "inc".into(),
            params: 2,
            ret: Some(ValueType::I64),
            locals: vec![local("x"), local("y")],
            body,
        }],
    }
}

/// Runs the whole code generator on `module`, linking against nominal
/// addresses so nothing is executable. `buf` is reused across calls; returns
/// the emitted length.
pub fn compile_detached(
    module: &TypedModule,
    lib: &StencilLibrary,
    opts: &CodegenOptions,
    buf: &mut Vec<u8>,
) -> Result<usize, CompileError> {
    const BASE: u64 = 0x1000_0000;
    const POOL: u64 = 0x2000_0000;
    let symbols = |_: &str| Some(0x3000_0000);
    let link = LinkInputs { pool_base: POOL, pool_limit: POOL + 0x1_0000, symbols: &symbols };
    let prepared = prepare_module(module, lib, opts)?;
    let len = prepared.code_len();
    if buf.len() < len {
        buf.resize(len, 0);
    }
    prepared.emit_into(lib, &mut buf[..len], BASE, &link)?;
    Ok(len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, print};
    use crate::interp::Interpreter;
    use crate::lang::typecheck;
    use crate::outcome::Outcome;

    fn run(src: &str, entry: &str, args: &[u64]) -> Outcome {
        let m = typecheck(&parse(src).unwrap()).unwrap();
        let reg = stdlib::registry();
        Interpreter::new(&m, &CodegenOptions::default(), &reg).unwrap().invoke(entry, args).unwrap()
    }

    fn reference_sort_check(n: i64, seed: i64) -> i64 {
        let mut x = seed;
        let mut v: Vec<i64> = (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                x / 65536 % 1000000
            })
            .collect();
        v.sort();
        v[1..].iter().fold(0i64, |s, &e| s.wrapping_mul(31).wrapping_add(e))
    }

    #[test]
    fn small_inputs_match_references() {
        assert_eq!(run(FIB, "fib", &[10]), Outcome::Value(55));
        assert_eq!(run(&sieve_source(), "sieve", &[100]), Outcome::Value(25));
        let primes = (2..1000u64).filter(|&p| (2..p).all(|d| p % d != 0)).count();
        assert_eq!(run(&sieve_source(), "sieve", &[1000]), Outcome::Value(primes as u64));
        for (n, seed) in [(1, 3), (2, 5), (50, 7), (300, -11)] {
            let want = reference_sort_check(n, seed) as u64;
            assert_eq!(run(&quicksort_source(), "sort_check", &[n as u64, seed as u64]), Outcome::Value(want));
        }
    }

    #[test]
    fn scaling_module_prints_as_increments() {
        let m = scaling_module(3);
        let text = print(&m);
        assert_eq!(text.matches("x = x + y;").count(), 3);
        assert_eq!(parse(&text).unwrap(), m);
        let tm = typecheck(&m).unwrap();
        let reg = stdlib::registry();
        let out = Interpreter::new(&tm, &CodegenOptions::default(), &reg).unwrap().invoke("inc", &[1, 2]).unwrap();
        assert_eq!(out, Outcome::Value(7));
    }

    #[test]
    fn detached_compile_grows_with_statements() {
        let lib = crate::stencil::synthetic::mock_library(crate::stencil::REG_SLOTS);
        let opts = CodegenOptions::default();
        let mut buf = Vec::new();
        let small = compile_detached(&typecheck(&scaling_module(10)).unwrap(), &lib, &opts, &mut buf).unwrap();
        let big = compile_detached(&typecheck(&scaling_module(20)).unwrap(), &lib, &opts, &mut buf).unwrap();
        assert!(big > small);
        assert_eq!((big - small) % 10, 0);
    }
}

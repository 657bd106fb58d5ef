//! Timing harness. Every figure is the mean of at least 30 repetitions on a
//! monotonic clock, with a Student-t 95% confidence interval.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use clap::{Args, ValueEnum};
use copypatch::codegen::{prepare_module, CodegenOptions};
use copypatch::frontend::parse;
use copypatch::interp::Interpreter;
use copypatch::lang::typecheck;
use copypatch::programs::{compile_detached, micro_suite, scaling_module};
use copypatch::runtime::{stdlib, JitModule};
use copypatch::stencil::synthetic::mock_library;
use copypatch::stencil::REG_SLOTS;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

use crate::common::{load_library, CodegenFlags};

pub const MIN_REPS: usize = 30;

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::Micro)]
    suite: Suite,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    out: Format,
    /// Repetitions per measurement; raised to 30 when lower.
    #[arg(long, default_value_t = MIN_REPS)]
    reps: usize,
    #[arg(long)]
    lib: Option<PathBuf>,
    /// Also time the compiled code without jump elision and with K=0.
    #[arg(long)]
    ablation: bool,
    #[command(flatten)]
    codegen: CodegenFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    Micro,
    Scaling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Mean and 95% confidence interval, in seconds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub ci95: [f64; 2],
    pub reps: usize,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Summary {
        let n = samples.len();
        let mean = samples.iter().mean();
        let half = if n < 2 {
            0.0
        } else {
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof").inverse_cdf(0.975);
            t * samples.iter().std_dev() / (n as f64).sqrt()
        };
        Summary { mean, ci95: [mean - half, mean + half], reps: n }
    }

    /// Width of the interval relative to the mean.
    pub fn relative_width(&self) -> f64 {
        (self.ci95[1] - self.ci95[0]) / self.mean
    }
}

/// Times `reps` runs after one untimed warmup that pays first-touch costs.
fn time_reps(reps: usize, mut f: impl FnMut() -> Result<Duration>) -> Result<Summary> {
    f()?;
    let samples = (0..reps).map(|_| f().map(|d| d.as_secs_f64())).collect::<Result<Vec<_>>>()?;
    Ok(Summary::of(&samples))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

#[derive(Debug, Serialize)]
struct VariantTime {
    variant: &'static str,
    execute: Summary,
}

#[derive(Debug, Serialize)]
struct MicroReport {
    schema: u32,
    benchmark: &'static str,
    args: Vec<u64>,
    result: u64,
    ast_build: Summary,
    compile: Summary,
    interpret: Summary,
    execute: Summary,
    speedup: f64,
    retained_jumps: u32,
    spills: usize,
    code_bytes: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ablation: Vec<VariantTime>,
}

#[derive(Debug, Serialize)]
struct ScalingReport {
    schema: u32,
    statements: usize,
    compile: Summary,
    per_statement_ns: f64,
    ratio_to_smallest: f64,
}

pub fn run(args: BenchArgs) -> Result<ExitCode> {
    let reps = args.reps.max(MIN_REPS);
    match args.suite {
        Suite::Micro => micro(&args, reps),
        Suite::Scaling => scaling(&args, reps),
    }
}

fn micro(args: &BenchArgs, reps: usize) -> Result<ExitCode> {
    let lib = load_library(args.lib.as_deref())?;
    let registry = stdlib::registry();
    let opts = args.codegen.options();
    for b in micro_suite() {
        let ast_build = time_reps(reps, || {
            let (m, d) = timed(|| parse(&b.source).map(|m| typecheck(&m)));
            m?.context("benchmark source")?;
            Ok(d)
        })?;
        let module = typecheck(&parse(&b.source)?)?;
        let prepared = prepare_module(&module, &lib, &opts)?;
        // SAFETY (all JIT compiles below): the library was loaded for the host
        // and holds stencils built by the stencil toolchain.
        let compile =
            time_reps(reps, || Ok(unsafe { JitModule::compile(&module, &lib, &opts, &registry)? }.compile_time()))?;
        let jit = unsafe { JitModule::compile(&module, &lib, &opts, &registry)? };
        let interp = Interpreter::new(&module, &opts, &registry)?;

        let expected = interp.invoke(b.entry, &b.args)?;
        let got = jit.invoke(b.entry, &b.args)?;
        ensure!(got == expected, "{}: jit gave {got}, interpreter gave {expected}", b.name);
        let result = expected.value().context("benchmark trapped")?;

        let interpret = time_reps(reps, || Ok(timed(|| interp.invoke(b.entry, &b.args)).1))?;
        let execute = time_reps(reps, || Ok(timed(|| jit.invoke(b.entry, &b.args)).1))?;
        let mut ablation = Vec::new();
        if args.ablation {
            let variants = [
                ("no-elide", CodegenOptions { elide_jumps: false, ..opts }),
                ("k0", CodegenOptions { registers: 0, ..opts }),
            ];
            for (variant, o) in variants {
                let j = unsafe { JitModule::compile(&module, &lib, &o, &registry)? };
                ensure!(j.invoke(b.entry, &b.args)? == expected, "{}/{variant}: wrong result", b.name);
                let execute = time_reps(reps, || Ok(timed(|| j.invoke(b.entry, &b.args)).1))?;
                ablation.push(VariantTime { variant, execute });
            }
        }
        let report = MicroReport {
            schema: 1,
            benchmark: b.name,
            args: b.args.clone(),
            result,
            ast_build,
            compile,
            interpret,
            execute,
            speedup: interpret.mean / execute.mean,
            retained_jumps: prepared.functions.iter().map(|f| f.placement.retained_jumps).sum(),
            spills: prepared.functions.iter().map(|f| f.plan.regs.spill_count()).sum(),
            code_bytes: jit.compiled().len,
            ablation,
        };
        emit_micro(&report, args.out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_micro(r: &MicroReport, out: Format) -> Result<()> {
    if out == Format::Json {
        println!("{}", serde_json::to_string(r)?);
        return Ok(());
    }
    let us = |s: &Summary| format!("{:.1} us ±{:.1}%", s.mean * 1e6, 50.0 * s.relative_width());
    let ms = |s: &Summary| format!("{:.2} ms ±{:.1}%", s.mean * 1e3, 50.0 * s.relative_width());
    println!("{} {:?} = {}", r.benchmark, r.args, r.result);
    println!("  ast build  {}", us(&r.ast_build));
    println!("  compile    {}", us(&r.compile));
    println!("  interpret  {}", ms(&r.interpret));
    println!("  execute    {}  ({:.1}x)", ms(&r.execute), r.speedup);
    for v in &r.ablation {
        println!("  {:<10} {}  ({:+.1}%)", v.variant, ms(&v.execute), 100.0 * (v.execute.mean / r.execute.mean - 1.0));
    }
    println!("  {} retained jumps, {} spills, {} code bytes", r.retained_jumps, r.spills, r.code_bytes);
    Ok(())
}

pub const SCALING_SIZES: [usize; 4] = [100, 1_000, 5_000, 10_000];

/// Code generation only, against mock stencils: nothing here executes.
fn scaling(args: &BenchArgs, reps: usize) -> Result<ExitCode> {
    let lib = mock_library(REG_SLOTS);
    let opts = args.codegen.options();
    let mut buf = Vec::new();
    let mut base = None;
    for n in SCALING_SIZES {
        let module = typecheck(&scaling_module(n))?;
        compile_detached(&module, &lib, &opts, &mut buf)?;
        let compile = time_reps(reps, || Ok(timed(|| compile_detached(&module, &lib, &opts, &mut buf)).1))?;
        let per = compile.mean / n as f64;
        let first = *base.get_or_insert(per);
        let r = ScalingReport {
            schema: 1,
            statements: n,
            compile,
            per_statement_ns: per * 1e9,
            ratio_to_smallest: per / first,
        };
        if args.out == Format::Json {
            println!("{}", serde_json::to_string(&r)?);
        } else {
            println!("{:>6} statements  {:>8.1} ns/stmt  ({:.2}x)", n, r.per_statement_ns, r.ratio_to_smallest);
        }
    }
    Ok(ExitCode::SUCCESS)
}

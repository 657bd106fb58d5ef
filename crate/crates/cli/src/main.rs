use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use copypatch::codegen::{prepare_module, LinkInputs, PreparedModule};
use copypatch::frontend::print;
use copypatch::fuzz::{gen_input_sets, gen_program, minimize};
use copypatch::interp::Interpreter;
use copypatch::lang::{typecheck, Module, TypedModule};
use copypatch::outcome::Outcome;
use copypatch::runtime::{stdlib, JitModule};
use copypatch::stencil::synthetic::mock_library;
use copypatch::stencil::{StencilLibrary, REG_SLOTS};
use serde::Serialize;

mod bench;
mod common;

use common::{format_outcome, load_library, load_module, parse_arg, same_outcome, CodegenFlags};

#[derive(Parser)]
#[command(name = "cpc", version, about = "Copy-and-patch compiler driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a program and show the CPS graph, the patched bytes or a
    /// per-function report.
    Compile {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Emit::Report)]
        emit: Emit,
        /// Stencil library; defaults to $CP_STENCIL_LIB.
        #[arg(long)]
        lib: Option<PathBuf>,
        /// Use generated mock stencils instead of a library. Mock code is
        /// for inspection only.
        #[arg(long, conflicts_with = "lib")]
        mock: bool,
        #[command(flatten)]
        codegen: CodegenFlags,
    },
    /// Run one function of a program and print its result.
    Run {
        file: PathBuf,
        function: String,
        #[arg(allow_negative_numbers = true)]
        args: Vec<String>,
        #[arg(long, value_enum, default_value_t = Tier::Jit)]
        tier: Tier,
        #[arg(long)]
        lib: Option<PathBuf>,
        #[command(flatten)]
        codegen: CodegenFlags,
    },
    /// Compare both tiers on random programs.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        count: u64,
        #[arg(long, default_value_t = 60)]
        max_stmts: usize,
        #[arg(long)]
        lib: Option<PathBuf>,
        #[command(flatten)]
        codegen: CodegenFlags,
    },
    /// Time the microbenchmarks or the compile-time scaling workload.
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Graph,
    Hex,
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tier {
    Jit,
    Interp,
}

fn main() -> ExitCode {
    match run_cli(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_cli(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Compile { file, emit, lib, mock, codegen } => {
            let module = load_module(&file)?;
            let lib = if mock { mock_library(REG_SLOTS) } else { load_library(lib.as_deref())? };
            print!("{}", compile(&module, &lib, &codegen, emit)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { file, function, args, tier, lib, codegen } => {
            let module = load_module(&file)?;
            let f = module.function(&function).with_context(|| format!("no function named `{function}`"))?;
            let params: Vec<_> = f.param_types().collect();
            if params.len() != args.len() {
                bail!("`{function}` takes {} arguments, {} given", params.len(), args.len());
            }
            let bits = params.iter().zip(&args).map(|(&t, a)| parse_arg(t, a)).collect::<Result<Vec<_>>>()?;
            let registry = stdlib::registry();
            let outcome = match tier {
                Tier::Interp => Interpreter::new(&module, &codegen.options(), &registry)?.invoke(&function, &bits)?,
                Tier::Jit => {
                    let lib = load_library(lib.as_deref())?;
                    // SAFETY: the library was loaded for the host architecture
                    // and holds stencils built by the stencil toolchain.
                    let jit = unsafe { JitModule::compile(&module, &lib, &codegen.options(), &registry)? };
                    jit.invoke(&function, &bits)?
                }
            };
            println!("{}", format_outcome(f.ret, &outcome));
            Ok(if outcome.error_flag() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Fuzz { seed, count, max_stmts, lib, codegen } => {
            let lib = load_library(lib.as_deref())?;
            fuzz(&lib, &codegen, seed, count, max_stmts.max(1))
        }
        Command::Bench(args) => bench::run(args),
    }
}

#[derive(Serialize)]
struct FunctionReport<'a> {
    name: &'a str,
    nodes: usize,
    retained_jumps: u32,
    spills: usize,
    frame_bytes: u32,
    code_bytes: u32,
}

#[derive(Serialize)]
struct CompileReport<'a> {
    schema: u32,
    compile_micros: f64,
    code_bytes: usize,
    functions: Vec<FunctionReport<'a>>,
}

/// Nominal addresses for code that is shown but never run.
const SHOW_BASE: u64 = 0x1000_0000;
const SHOW_POOL: u64 = 0x2000_0000;

fn link_and_emit(
    prepared: &PreparedModule,
    lib: &StencilLibrary,
) -> Result<(Vec<u8>, copypatch::codegen::CompiledModule)> {
    let registry = stdlib::registry();
    let symbols = |name: &str| registry.address(name);
    let link = LinkInputs { pool_base: SHOW_POOL, pool_limit: SHOW_POOL + 0x1_0000, symbols: &symbols };
    let mut buf = vec![0u8; prepared.code_len()];
    let m = prepared.emit_into(lib, &mut buf, SHOW_BASE, &link)?;
    Ok((buf, m))
}

fn compile(module: &TypedModule, lib: &StencilLibrary, flags: &CodegenFlags, emit: Emit) -> Result<String> {
    let opts = flags.options();
    let start = Instant::now();
    let prepared = prepare_module(module, lib, &opts)?;
    let (code, compiled) = link_and_emit(&prepared, lib)?;
    let elapsed = start.elapsed();
    let mut out = String::new();
    match emit {
        Emit::Graph => {
            for f in &prepared.functions {
                let _ = writeln!(out, "fn {}:", f.name);
                out.push_str(&f.graph.dump());
            }
        }
        Emit::Hex => {
            for (p, c) in prepared.functions.iter().zip(&compiled.functions) {
                let _ = writeln!(out, "fn {} @ {:#x}:", p.name, c.entry());
                for s in &c.spans {
                    let at = (c.base - compiled.base) as usize + s.offset as usize;
                    let bytes: Vec<String> = code[at..at + s.len as usize].iter().map(|b| format!("{b:02x}")).collect();
                    let mark = if s.elided { " (tail elided)" } else { "" };
                    let _ =
                        writeln!(out, "  {:06x}  n{:<4} {}{mark}\n          {}", at, s.node, s.key, bytes.join(" "));
                }
            }
        }
        Emit::Report => {
            let functions = prepared
                .functions
                .iter()
                .map(|f| FunctionReport {
                    name: &f.name,
                    nodes: f.graph.nodes.len(),
                    retained_jumps: f.placement.retained_jumps,
                    spills: f.plan.regs.spill_count(),
                    frame_bytes: f.plan.extent(),
                    code_bytes: f.placement.len,
                })
                .collect();
            let report = CompileReport {
                schema: 1,
                compile_micros: elapsed.as_secs_f64() * 1e6,
                code_bytes: compiled.len,
                functions,
            };
            out = serde_json::to_string_pretty(&report)? + "\n";
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Failure {
    Mismatch { args: Vec<u64>, interp: Outcome, jit: Outcome },
    Compile(String),
}

/// Runs `module`'s entry on both tiers for every input vector; `None` when
/// they always agree.
fn differ(module: &Module, inputs: &[Vec<u64>], lib: &StencilLibrary, flags: &CodegenFlags) -> Result<Option<Failure>> {
    let typed = typecheck(module)?;
    let registry = stdlib::registry();
    let opts = flags.options();
    let interp = Interpreter::new(&typed, &opts, &registry)?;
    // SAFETY: as in `run`; the library is a genuine host library.
    let jit = match unsafe { JitModule::compile(&typed, lib, &opts, &registry) } {
        Ok(j) => j,
        Err(e) => return Ok(Some(Failure::Compile(e.to_string()))),
    };
    let ret = typed.functions[0].ret;
    for args in inputs {
        let (i, j) = (interp.invoke("f0", args)?, jit.invoke("f0", args)?);
        if !same_outcome(ret, &i, &j) {
            return Ok(Some(Failure::Mismatch { args: args.clone(), interp: i, jit: j }));
        }
    }
    Ok(None)
}

fn fuzz(lib: &StencilLibrary, flags: &CodegenFlags, seed: u64, count: u64, max_stmts: usize) -> Result<ExitCode> {
    let start = Instant::now();
    for case in seed..seed.saturating_add(count) {
        let budget = 1 + (splitmix(case) % max_stmts as u64) as usize;
        let module = gen_program(case, budget);
        let inputs = gen_input_sets(&module, case);
        let Some(failure) = differ(&module, &inputs, lib, flags)? else { continue };
        let same_kind = |m: &Module| match differ(m, &inputs, lib, flags) {
            Ok(Some(f)) => std::mem::discriminant(&f) == std::mem::discriminant(&failure),
            _ => false,
        };
        let small = minimize(&module, same_kind);
        let ret = module.functions[0].ret;
        println!("seed {case}: tiers disagree");
        match differ(&small, &inputs, lib, flags)?.unwrap_or(failure) {
            Failure::Mismatch { args, interp, jit } => {
                println!("  inputs: {args:?}");
                println!("  interp: {}", format_outcome(ret, &interp));
                println!("  jit:    {}", format_outcome(ret, &jit));
            }
            Failure::Compile(e) => println!("  jit compile failed: {e}"),
        }
        println!("--- minimized reproducer ---\n{}", print(&small));
        return Ok(ExitCode::FAILURE);
    }
    println!("{count} programs, tiers agree ({:.1?})", start.elapsed());
    Ok(ExitCode::SUCCESS)
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

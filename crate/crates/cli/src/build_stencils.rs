//! Compiles the stencil sources named by a manifest and writes the library.
//! Prints a JSON summary on success; any failed stencil fails the whole build
//! and nothing is written.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use copypatch::extract::{build_library, BuildOptions, Manifest, Toolchain};

#[derive(Parser)]
#[command(name = "build-stencils", version, about = "Build a stencil library from C sources")]
struct Args {
    /// Manifest listing stencil families.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding the stencil sources and headers.
    #[arg(long)]
    src: PathBuf,
    /// Library file to write.
    #[arg(long)]
    out: PathBuf,
    /// C compiler; defaults to clang on PATH.
    #[arg(long)]
    toolchain: Option<String>,
    /// Parallel compiler invocations; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Keep the intermediate object files in this directory.
    #[arg(long)]
    keep_objects: Option<PathBuf>,
}

fn main() -> ExitCode {
    match build(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn build(args: Args) -> Result<()> {
    let text =
        std::fs::read_to_string(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let manifest = Manifest::parse(&text).with_context(|| format!("in {}", args.manifest.display()))?;
    let toolchain = Toolchain::detect(args.toolchain.as_deref())?;
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let opts = BuildOptions { source_root: args.src, out: args.out, toolchain, jobs, keep_objects: args.keep_objects };
    let summary = build_library(&manifest, &opts)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

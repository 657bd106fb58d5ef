use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use copypatch::codegen::CodegenOptions;
use copypatch::frontend::parse;
use copypatch::lang::{typecheck, TypedModule, ValueType};
use copypatch::outcome::Outcome;
use copypatch::stencil::StencilLibrary;

pub const LIB_ENV: &str = "CP_STENCIL_LIB";

#[derive(Debug, Clone, clap::Args)]
pub struct CodegenFlags {
    /// Register budget for expression temporaries (0 spills everything).
    #[arg(short = 'K', long, default_value_t = 3)]
    pub registers: u8,
    /// Keep every trailing jump.
    #[arg(long)]
    pub no_elide: bool,
    /// Lower every statement node by node.
    #[arg(long)]
    pub no_supernodes: bool,
}

impl CodegenFlags {
    pub fn options(&self) -> CodegenOptions {
        CodegenOptions {
            registers: self.registers,
            supernodes: !self.no_supernodes,
            elide_jumps: !self.no_elide,
            ..CodegenOptions::default()
        }
    }
}

pub fn library_path(flag: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    match std::env::var_os(LIB_ENV) {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => bail!("no stencil library: pass --lib or set {LIB_ENV}"),
    }
}

pub fn load_library(flag: Option<&Path>) -> Result<StencilLibrary> {
    let path = library_path(flag)?;
    StencilLibrary::load(&path).with_context(|| format!("loading stencil library {}", path.display()))
}

pub fn load_module(path: &Path) -> Result<TypedModule> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m = parse(&src).with_context(|| format!("parsing {}", path.display()))?;
    typecheck(&m).with_context(|| format!("checking {}", path.display()))
}

/// Parses a command-line argument as raw bits of `ty`.
pub fn parse_arg(ty: ValueType, s: &str) -> Result<u64> {
    Ok(match ty {
        ValueType::I32 => s.parse::<i32>().with_context(|| format!("`{s}` is not an i32"))? as i64 as u64,
        ValueType::I64 | ValueType::Ptr => s.parse::<i64>().with_context(|| format!("`{s}` is not an i64"))? as u64,
        ValueType::F64 => s.parse::<f64>().with_context(|| format!("`{s}` is not an f64"))?.to_bits(),
        ValueType::Bool => match s {
            "true" | "1" => 1,
            "false" | "0" => 0,
            _ => bail!("`{s}` is not a bool"),
        },
    })
}

pub fn format_value(ty: Option<ValueType>, bits: u64) -> String {
    match ty {
        None => "()".into(),
        Some(ValueType::I32 | ValueType::I64) => (bits as i64).to_string(),
        Some(ValueType::F64) => format!("{:?}", f64::from_bits(bits)),
        Some(ValueType::Bool) => (bits != 0).to_string(),
        Some(ValueType::Ptr) => format!("{bits:#x}"),
    }
}

pub fn format_outcome(ty: Option<ValueType>, o: &Outcome) -> String {
    match o {
        Outcome::Value(v) => format_value(ty, *v),
        other => other.to_string(),
    }
}

/// Outcome equality where every NaN equals every other NaN of an `f64`
/// result.
pub fn same_outcome(ty: Option<ValueType>, a: &Outcome, b: &Outcome) -> bool {
    match (ty, a, b) {
        (Some(ValueType::F64), Outcome::Value(x), Outcome::Value(y)) => {
            let (x, y) = (f64::from_bits(*x), f64::from_bits(*y));
            x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan())
        }
        _ => a == b,
    }
}

//! Driving the C compiler that builds stencil translation units.

use std::path::{Path, PathBuf};
use std::process::Command;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolchainError {
    #[error("C toolchain `{0}` not found or not runnable")]
    ToolchainMissing(String),
    #[error("compiling {source_file} failed:\n{stderr}")]
    CompileFailed { source_file: String, stderr: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Flags every stencil is compiled with. Position-dependent code makes hole
/// addresses appear as 32-bit absolute relocations; unwind tables, stack
/// protectors, CET landing pads and jump tables would add code or sections
/// that cannot be copied.
pub const STENCIL_FLAGS: &[&str] = &[
    "-c",
    "-O2",
    "-std=gnu11",
    "-fno-pic",
    "-fno-pie",
    "-mcmodel=small",
    "-fomit-frame-pointer",
    "-fno-asynchronous-unwind-tables",
    "-fno-unwind-tables",
    "-fno-stack-protector",
    "-fcf-protection=none",
    "-fno-jump-tables",
    "-fno-builtin",
    "-ffreestanding",
    "-fno-ident",
    "-Wall",
    "-Werror=return-type",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Toolchain {
    pub cc: String,
    pub flags: Vec<String>,
}

impl Toolchain {
    /// Uses `cc` (default `clang`) after checking that it runs.
    pub fn detect(cc: Option<&str>) -> Result<Toolchain, ToolchainError> {
        let cc = cc.unwrap_or("clang").to_string();
        let ok = Command::new(&cc).arg("--version").output().map(|o| o.status.success()).unwrap_or(false);
        if !ok {
            return Err(ToolchainError::ToolchainMissing(cc));
        }
        Ok(Toolchain { cc, flags: STENCIL_FLAGS.iter().map(|s| s.to_string()).collect() })
    }

    /// Compiles `source` with `defines` into `out` and returns its bytes.
    pub fn compile(
        &self,
        source: &Path,
        include: &Path,
        defines: &[(String, String)],
        out: &Path,
    ) -> Result<Vec<u8>, ToolchainError> {
        let mut cmd = Command::new(&self.cc);
        cmd.args(&self.flags).arg("-I").arg(include);
        for (k, v) in defines {
            cmd.arg(format!("-D{k}={v}"));
        }
        cmd.arg(source).arg("-o").arg(out);
        let output = cmd.output().map_err(|_| ToolchainError::ToolchainMissing(self.cc.clone()))?;
        if !output.status.success() {
            return Err(ToolchainError::CompileFailed {
                source_file: source.display().to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
            });
        }
        std::fs::read(out).map_err(|e| ToolchainError::Io(format!("{}: {e}", out.display())))
    }
}

/// File name of the object built for a key symbol.
pub fn object_name(symbol: &str) -> PathBuf {
    PathBuf::from(format!("{symbol}.o"))
}

//! Executable memory and the compiled-module runtime.

mod externals;
mod jit;
mod region;

pub use externals::{stdlib, DuplicateSymbol, ExternalRegistry, HostFn};
pub use jit::{CpRet, JitError, JitModule};
pub use region::{ExecRegion, RegionError};

//! Compiled modules ready to call from the host.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{ExecRegion, ExternalRegistry, RegionError};
use crate::codegen::{prepare_module, CodegenOptions, CompileError, CompiledModule, LinkInputs};
use crate::lang::{canonical_bits, TypedModule, ValueType};
use crate::outcome::{InvokeError, Outcome, Trap, DEFAULT_POOL_BYTES};
use crate::stencil::{Arch, StencilLibrary};

/// What every stencil chain returns: the value in `rax`, the status word in
/// `rdx`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpRet {
    pub value: u64,
    pub status: u64,
}

type Thunk = unsafe extern "C" fn() -> CpRet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JitError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("stencil library targets {lib:?}, host is {host:?}")]
    ArchMismatch { lib: Arch, host: Arch },
}

struct Signature {
    name: String,
    params: Vec<ValueType>,
    ret: Option<ValueType>,
}

pub struct JitModule {
    region: ExecRegion,
    code: CompiledModule,
    signatures: Vec<Signature>,
    /// Frame pool; the first `pool_bytes` are usable, the rest is slack for
    /// argument stores that precede the overflow check of a call.
    pool: Mutex<Box<[u64]>>,
    pool_bytes: u64,
    compile_time: Duration,
}

impl JitModule {
    /// Compiles and links `module` into fresh executable memory.
    ///
    /// # Safety
    /// `lib` must hold genuine stencils for the host built with this crate's
    /// conventions; their bytes are executed as-is by [`JitModule::invoke`].
    pub unsafe fn compile(
        module: &TypedModule,
        lib: &StencilLibrary,
        opts: &CodegenOptions,
        registry: &ExternalRegistry,
    ) -> Result<JitModule, JitError> {
        Self::compile_with_pool(module, lib, opts, registry, DEFAULT_POOL_BYTES)
    }

    /// # Safety
    /// As for [`JitModule::compile`].
    pub unsafe fn compile_with_pool(
        module: &TypedModule,
        lib: &StencilLibrary,
        opts: &CodegenOptions,
        registry: &ExternalRegistry,
        pool_bytes: u64,
    ) -> Result<JitModule, JitError> {
        if lib.arch != Arch::host() {
            return Err(JitError::ArchMismatch { lib: lib.arch, host: Arch::host() });
        }
        let start = Instant::now();
        let prepared = prepare_module(module, lib, opts)?;
        let slack = prepared.frames.sites.iter().flatten().map(|&(d, n)| d as u64 + n as u64).max().unwrap_or(0);
        let mut pool = vec![0u64; ((pool_bytes + slack) / 8 + 1) as usize].into_boxed_slice();
        let pool_base = pool.as_mut_ptr() as u64;
        let symbols = |name: &str| registry.address(name);
        let link = LinkInputs { pool_base, pool_limit: pool_base + pool_bytes, symbols: &symbols };

        let mut cap = opts.initial_region.max(1);
        let (mut region, code) = loop {
            let mut region = ExecRegion::new(cap)?;
            let base = region.base();
            match prepared.emit_into(lib, region.as_mut_slice()?, base, &link) {
                Ok(code) => break (region, code),
                Err(CompileError::EmitOverflow { .. }) => cap = region.capacity() * 2,
                Err(e) => return Err(e.into()),
            }
        };
        region.seal()?;
        let signatures = module
            .functions
            .iter()
            .map(|f| Signature { name: f.name.clone(), params: f.param_types().collect(), ret: f.ret })
            .collect();
        Ok(JitModule { region, code, signatures, pool: Mutex::new(pool), pool_bytes, compile_time: start.elapsed() })
    }

    pub fn compiled(&self) -> &CompiledModule {
        &self.code
    }

    pub fn code_bytes(&self) -> &[u8] {
        &self.region.as_slice()[..self.code.len]
    }

    /// Wall time spent from selection to sealing.
    pub fn compile_time(&self) -> Duration {
        self.compile_time
    }

    pub fn pool_bytes(&self) -> u64 {
        self.pool_bytes
    }

    /// Runs `name` with raw argument bits, canonicalized per parameter type.
    /// Invocations are serialized on the module's frame pool.
    pub fn invoke(&self, name: &str, args: &[u64]) -> Result<Outcome, InvokeError> {
        let id = self
            .signatures
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| InvokeError::UnknownFunction(name.into()))?;
        let sig = &self.signatures[id];
        if sig.params.len() != args.len() {
            return Err(InvokeError::ArityMismatch { name: name.into(), expected: sig.params.len(), got: args.len() });
        }
        if self.code.extents[id] as u64 > self.pool_bytes {
            return Ok(Outcome::Trap(Trap::FrameOverflow));
        }
        let mut pool = self.pool.lock().unwrap_or_else(|e| e.into_inner());
        for (slot, (&t, &a)) in pool.iter_mut().zip(sig.params.iter().zip(args)) {
            *slot = canonical_bits(Some(t), a);
        }
        // SAFETY: the thunk was emitted and sealed by `compile`, whose caller
        // vouched for the stencils; the pool stays locked for the call.
        let r = unsafe {
            let thunk: Thunk = std::mem::transmute(self.code.thunks[id] as usize);
            thunk()
        };
        drop(pool);
        Ok(match Outcome::from_status(r.value, r.status) {
            Outcome::Value(v) => Outcome::Value(canonical_bits(sig.ret, v)),
            o => o,
        })
    }
}

impl std::fmt::Debug for JitModule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JitModule")
            .field("region", &self.region)
            .field("functions", &self.signatures.iter().map(|s| &s.name).collect::<Vec<_>>())
            .field("code_len", &self.code.len)
            .finish()
    }
}

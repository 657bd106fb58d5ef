//! Host functions callable from generated code.
//!
//! Every external has the same host signature: it receives the address of
//! an argument block of 64-bit slots (at least one), writes its result into
//! slot 0 and returns `true` to report failure.

use rustc_hash::FxHashMap;

/// Host-side signature of an external. Returning `true` signals an error.
pub type HostFn = unsafe extern "C" fn(args: *mut u64) -> bool;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("external symbol `{0}` is already registered")]
pub struct DuplicateSymbol(pub String);

#[derive(Clone, Default)]
pub struct ExternalRegistry {
    map: FxHashMap<String, HostFn>,
}

impl ExternalRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, f: HostFn) -> Result<(), DuplicateSymbol> {
        if self.map.contains_key(name) {
            return Err(DuplicateSymbol(name.to_string()));
        }
        self.map.insert(name.to_string(), f);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<HostFn> {
        self.map.get(name).copied()
    }

    /// Address to patch into adapter holes.
    pub fn address(&self, name: &str) -> Option<u64> {
        self.get(name).map(|f| f as usize as u64)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// Calls `name` on an argument block. Returns `None` when unregistered.
    ///
    /// # Safety
    /// `args` must point to at least as many writable slots as the external
    /// reads, and never fewer than one.
    pub unsafe fn call(&self, name: &str, args: *mut u64) -> Option<bool> {
        self.get(name).map(|f| f(args))
    }
}

impl std::fmt::Debug for ExternalRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names: Vec<&str> = self.names().collect();
        names.sort_unstable();
        f.debug_struct("ExternalRegistry").field("symbols", &names).finish()
    }
}

/// Externals used by the bundled programs and the fuzzer.
///
/// # Safety
/// Each function expects `args` to point at an argument area holding its
/// declared parameters, which is where generated code places them.
pub mod stdlib {
    #![allow(clippy::missing_safety_doc)]

    use super::{DuplicateSymbol, ExternalRegistry};

    /// `fail_always() -> i64`: always reports failure.
    pub unsafe extern "C" fn fail_always(_args: *mut u64) -> bool {
        true
    }

    /// `fail_if_neg(x: i64) -> i64`: identity, failing on negative input.
    pub unsafe extern "C" fn fail_if_neg(args: *mut u64) -> bool {
        (*args as i64) < 0
    }

    /// `mix(a: i64, b: i64) -> i64`: a deterministic hash of two values.
    pub unsafe extern "C" fn mix(args: *mut u64) -> bool {
        let a = *args;
        let b = *args.add(1);
        *args = a.rotate_left(17) ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        false
    }

    /// `alloc(bytes: i64) -> ptr`: zeroed, 16-byte aligned memory that lives
    /// until the process exits. Fails on negative sizes.
    pub unsafe extern "C" fn alloc(args: *mut u64) -> bool {
        let n = *args as i64;
        if n < 0 {
            return true;
        }
        let words = (n as usize).div_ceil(16).max(1);
        let mem: &'static mut [u128] = Box::leak(vec![0u128; words].into_boxed_slice());
        *args = mem.as_mut_ptr() as u64;
        false
    }

    /// `put_i64(x: i64) -> i64`: returns its argument; a hook point with no
    /// side effects so both tiers stay comparable.
    pub unsafe extern "C" fn put_i64(args: *mut u64) -> bool {
        let _ = *args;
        false
    }

    /// Declarations matching [`register_all`], in source form.
    pub const DECLS: &str = "extern fn fail_always() -> i64;
extern fn fail_if_neg(i64) -> i64;
extern fn mix(i64, i64) -> i64;
extern fn alloc(i64) -> ptr;
extern fn put_i64(i64) -> i64;
";

    pub fn register_all(reg: &mut ExternalRegistry) -> Result<(), DuplicateSymbol> {
        reg.register("fail_always", fail_always)?;
        reg.register("fail_if_neg", fail_if_neg)?;
        reg.register("mix", mix)?;
        reg.register("alloc", alloc)?;
        reg.register("put_i64", put_i64)
    }

    pub fn registry() -> ExternalRegistry {
        let mut r = ExternalRegistry::new();
        register_all(&mut r).expect("fresh registry");
        r
    }
}

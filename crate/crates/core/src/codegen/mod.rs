//! Copy-and-patch code generation.
//!
//! Per function: lower to a flat instruction list, plan register use, lay
//! out the frame, build the CPS graph and place it. A module is then emitted
//! into one contiguous region and linked: call targets, callee frame sizes,
//! the frame-pool limit and external adapters are patched in the same pass.

mod emit;
mod frame;
mod graph;
mod lower;
pub mod regplan;
mod supernode;

use std::fmt::Write as _;

pub use emit::{emit, place, CompiledFunction, LinkTargets, NodeSpan, Placement};
pub use frame::{layout_frame, FrameLayout, SLOT};
pub use graph::{build_graph, CallLink, CpsGraph, CpsNode, NodeId};
pub use lower::{arg_area, lower_function, Aux, Dest, Inst, Item, Lowered, Operand, Site};
pub use regplan::{plan_registers, PlanOp, RegPlan, TempLoc};
pub use supernode::{match_assignment, match_condition, match_supernode, Supernode};

use crate::lang::{TFunction, TypedModule};
use crate::stencil::layout::{ordinal_of, HoleRole};
use crate::stencil::{MissingVariant, NodeKind, PatchError, SlotValues, StencilKey, StencilLibrary, REG_SLOTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodegenOptions {
    /// Register budget K for expression temporaries. 0 spills everything.
    pub registers: u8,
    pub supernodes: bool,
    pub elide_jumps: bool,
    /// First region size tried by [`compile_module`]; doubled on overflow.
    pub initial_region: usize,
}

impl Default for CodegenOptions {
    fn default() -> Self {
        CodegenOptions { registers: 3, supernodes: true, elide_jumps: true, initial_region: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    MissingVariant(#[from] MissingVariant),
    #[error("code region too small: {needed} bytes needed")]
    EmitOverflow { needed: usize },
    #[error(transparent)]
    Patch(PatchError),
    #[error("unresolved external symbol `{0}`")]
    UnresolvedExternal(String),
    #[error("register budget {0} exceeds the {REG_SLOTS} stencil register slots")]
    RegisterBudget(u8),
}

/// Everything decided about one function before stencils are selected.
#[derive(Debug, Clone)]
pub struct FunctionPlan {
    pub lowered: Lowered,
    pub ops: Vec<PlanOp>,
    pub regs: RegPlan,
    pub frame: FrameLayout,
}

impl FunctionPlan {
    pub fn extent(&self) -> u32 {
        self.frame.extent()
    }

    /// Offset from this function's frame to the argument area of `site`.
    pub fn site_delta(&self, site: u32) -> u32 {
        self.extent() + self.lowered.sites[site as usize].pending
    }
}

pub fn plan_function(f: &TFunction, opts: &CodegenOptions) -> FunctionPlan {
    let lowered = lower_function(f, opts.supernodes);
    let ops = lowered.plan_ops();
    let regs = plan_registers(&ops, opts.registers);
    let frame = layout_frame(f.locals.len() as u32, &ops, &regs);
    FunctionPlan { lowered, ops, regs, frame }
}

/// Frame arithmetic both execution tiers share: per-function extents and,
/// per call site, the offset of the callee frame and the bytes it needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTable {
    pub extents: Vec<u32>,
    /// `(delta, need)` per call site, per function.
    pub sites: Vec<Vec<(u32, u32)>>,
}

pub fn frame_table(module: &TypedModule, opts: &CodegenOptions) -> FrameTable {
    let plans: Vec<FunctionPlan> = module.functions.iter().map(|f| plan_function(f, opts)).collect();
    frame_table_of(&plans.iter().collect::<Vec<_>>())
}

fn frame_table_of(plans: &[&FunctionPlan]) -> FrameTable {
    let extents: Vec<u32> = plans.iter().map(|p| p.extent()).collect();
    let sites = plans
        .iter()
        .map(|p| {
            p.lowered
                .sites
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let need = s.func.map_or(s.area, |f| extents[f as usize]);
                    (p.site_delta(i as u32), need)
                })
                .collect()
        })
        .collect();
    FrameTable { extents, sites }
}

#[derive(Debug, Clone)]
pub struct PreparedFunction {
    pub name: String,
    pub plan: FunctionPlan,
    pub graph: CpsGraph,
    pub placement: Placement,
}

/// A module with every function placed; only addresses are missing.
#[derive(Debug, Clone)]
pub struct PreparedModule {
    pub functions: Vec<PreparedFunction>,
    pub externals: Vec<String>,
    pub frames: FrameTable,
    thunk_len: u32,
}

fn thunk_key() -> StencilKey {
    StencilKey::new(NodeKind::EntryThunk, None, &[], 0, false)
}

pub fn prepare_function(
    f: &TFunction,
    lib: &StencilLibrary,
    opts: &CodegenOptions,
) -> Result<PreparedFunction, CompileError> {
    if opts.registers > REG_SLOTS {
        return Err(CompileError::RegisterBudget(opts.registers));
    }
    let plan = plan_function(f, opts);
    let graph = build_graph(&plan.lowered, &plan.regs, &plan.frame);
    let placement = place(&graph, lib, opts.elide_jumps)?;
    Ok(PreparedFunction { name: f.name.clone(), plan, graph, placement })
}

pub fn prepare_module(
    module: &TypedModule,
    lib: &StencilLibrary,
    opts: &CodegenOptions,
) -> Result<PreparedModule, CompileError> {
    let functions = module.functions.iter().map(|f| prepare_function(f, lib, opts)).collect::<Result<Vec<_>, _>>()?;
    let frames = frame_table_of(&functions.iter().map(|p| &p.plan).collect::<Vec<_>>());
    let thunk_len = lib.select(&thunk_key())?.code.len() as u32;
    Ok(PreparedModule {
        functions,
        externals: module.externals.iter().map(|e| e.name.clone()).collect(),
        frames,
        thunk_len,
    })
}

/// Inputs for linking a module at its final address.
pub struct LinkInputs<'a> {
    pub pool_base: u64,
    pub pool_limit: u64,
    /// Resolves external adapters and runtime-support symbols.
    pub symbols: &'a dyn Fn(&str) -> Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledModule {
    pub base: u64,
    pub len: usize,
    pub functions: Vec<CompiledFunction>,
    /// Host-callable entry thunk of each function.
    pub thunks: Vec<u64>,
    pub extents: Vec<u32>,
}

impl PreparedModule {
    /// Bytes of code: every function followed by one entry thunk each.
    pub fn code_len(&self) -> usize {
        let body: usize = self.functions.iter().map(|f| f.placement.len as usize).sum();
        body + self.functions.len() * self.thunk_len as usize
    }

    /// Emits and links the module into `out`, which will execute at `base`.
    pub fn emit_into(
        &self,
        lib: &StencilLibrary,
        out: &mut [u8],
        base: u64,
        link: &LinkInputs<'_>,
    ) -> Result<CompiledModule, CompileError> {
        let needed = self.code_len();
        if out.len() < needed {
            return Err(CompileError::EmitOverflow { needed });
        }
        let mut starts = Vec::with_capacity(self.functions.len());
        let mut at = 0u64;
        for f in &self.functions {
            starts.push(at);
            at += f.placement.len as u64;
        }
        let entries: Vec<u64> = self
            .functions
            .iter()
            .zip(&starts)
            .map(|(f, s)| base + s + f.placement.offsets[f.graph.entry as usize] as u64)
            .collect();
        let adapters = self
            .externals
            .iter()
            .map(|n| (link.symbols)(n).ok_or_else(|| CompileError::UnresolvedExternal(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let targets = LinkTargets {
            entries: &entries,
            extents: &self.frames.extents,
            adapters: &adapters,
            pool_limit: link.pool_limit,
            symbols: link.symbols,
        };
        let mut functions = Vec::with_capacity(self.functions.len());
        for (f, &s) in self.functions.iter().zip(&starts) {
            let end = s as usize + f.placement.len as usize;
            let region = &mut out[s as usize..end];
            functions.push(emit(&f.graph, &f.placement, lib, base + s, region, &targets)?);
        }

        let thunk = lib.select(&thunk_key())?;
        let pool_base = ordinal_of(&thunk.key, HoleRole::PoolBase).expect("thunk layout") as usize;
        let mut values = vec![0u64; pool_base + 1];
        values[pool_base] = link.pool_base;
        let mut thunks = Vec::with_capacity(entries.len());
        let mut at = at as usize;
        for &entry in &entries {
            let slot = SlotValues { conts: &[entry], values: &values, external: link.symbols };
            at += thunk.materialize_into(base + at as u64, &slot, false, &mut out[at..]).map_err(emit::patch_error)?;
            thunks.push(base + (at - thunk.code.len()) as u64);
        }
        Ok(CompiledModule { base, len: needed, functions, thunks, extents: self.frames.extents.clone() })
    }
}

/// Compiles `module` for execution at `base`, emitting into a buffer that
/// starts at `opts.initial_region` bytes and doubles, with a full re-emit,
/// until the code fits.
pub fn compile_module(
    module: &TypedModule,
    lib: &StencilLibrary,
    opts: &CodegenOptions,
    base: u64,
    link: &LinkInputs<'_>,
) -> Result<(Vec<u8>, CompiledModule), CompileError> {
    let prepared = prepare_module(module, lib, opts)?;
    let mut buf = vec![0u8; opts.initial_region.max(1)];
    loop {
        match prepared.emit_into(lib, &mut buf, base, link) {
            Ok(m) => {
                buf.truncate(m.len);
                return Ok((buf, m));
            }
            Err(CompileError::EmitOverflow { .. }) => buf.resize(buf.len() * 2, 0),
            Err(e) => return Err(e),
        }
    }
}

impl CpsGraph {
    /// One line per node in emission order: id, key, hole values and
    /// continuation targets.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for id in self.emission_order() {
            let n = &self.nodes[id as usize];
            let _ = write!(s, "n{id}: {}", n.key);
            if !n.values.is_empty() {
                let vals: Vec<String> = n.values.iter().map(|v| format!("{:#x}", v)).collect();
                let _ = write!(s, " [{}]", vals.join(", "));
            }
            for (i, c) in n.edges() {
                let _ = write!(s, " cont{i}=n{c}");
            }
            match n.link {
                CallLink::Function(f) => {
                    let _ = write!(s, " call=f{f}");
                }
                CallLink::External(e) => {
                    let _ = write!(s, " extern=e{e}");
                }
                CallLink::None => {}
            }
            s.push('\n');
        }
        s
    }
}

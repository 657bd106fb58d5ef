//! Contiguous emission: place nodes in depth-first order, drop trailing jumps
//! whose target follows immediately, then copy and patch every stencil.

use super::graph::{CallLink, CpsGraph, NodeId};
use super::CompileError;
use crate::stencil::layout::{ordinal_of, HoleRole};
use crate::stencil::{HoleTarget, PatchError, SlotValues, StencilKey, StencilLibrary};

/// Where each node lands, before any byte is written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub order: Vec<NodeId>,
    /// Offset of each placed node, by node id; `u32::MAX` when unreachable.
    pub offsets: Vec<u32>,
    /// Whether the node at each position of `order` has its tail dropped.
    pub elided: Vec<bool>,
    pub len: u32,
    pub retained_jumps: u32,
}

/// Computes the layout of `graph`. A continuation edge costs a retained
/// jump unless it is continuation 0 of a stencil with an elidable tail and
/// its target is placed right after; each conditional adds one for its
/// conditional jump. Call edges are not jumps.
pub fn place(graph: &CpsGraph, lib: &StencilLibrary, elide_jumps: bool) -> Result<Placement, CompileError> {
    let order = graph.emission_order();
    let mut offsets = vec![u32::MAX; graph.nodes.len()];
    let mut elided = Vec::with_capacity(order.len());
    let mut at = 0u32;
    let mut retained = 0u32;
    for (pos, &id) in order.iter().enumerate() {
        let node = &graph.nodes[id as usize];
        let stencil = lib.select(&node.key)?;
        let adjacent = order.get(pos + 1).copied() == node.conts[0] && node.conts[0].is_some();
        let elide = elide_jumps && adjacent && stencil.tail.is_some();
        offsets[id as usize] = at;
        at += stencil.emitted_len(elide) as u32;
        elided.push(elide);
        retained += node.key.kind.is_conditional() as u32;
        retained += node.edges().count() as u32 - elide as u32;
    }
    Ok(Placement { order, offsets, elided, len: at, retained_jumps: retained })
}

/// Addresses and constants resolved at link time.
pub struct LinkTargets<'a> {
    /// Entry address of every function in the module.
    pub entries: &'a [u64],
    /// Frame extent of every function in the module.
    pub extents: &'a [u32],
    /// Adapter address of every declared external.
    pub adapters: &'a [u64],
    pub pool_limit: u64,
    /// Runtime-support symbols referenced directly by stencil code.
    pub symbols: &'a dyn Fn(&str) -> Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeSpan {
    pub node: NodeId,
    pub key: StencilKey,
    pub offset: u32,
    pub len: u32,
    pub elided: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledFunction {
    pub base: u64,
    pub len: u32,
    /// Offset of the entry node from `base`.
    pub entry_offset: u32,
    pub retained_jumps: u32,
    pub spans: Vec<NodeSpan>,
}

impl CompiledFunction {
    pub fn entry(&self) -> u64 {
        self.base + self.entry_offset as u64
    }
}

pub(super) fn patch_error(e: PatchError) -> CompileError {
    match e {
        PatchError::MissingHoleValue(HoleTarget::External(name)) => CompileError::UnresolvedExternal(name),
        e => CompileError::Patch(e),
    }
}

/// Writes the function placed by `placement` into `out`, which will execute
/// at address `base`.
pub fn emit(
    graph: &CpsGraph,
    placement: &Placement,
    lib: &StencilLibrary,
    base: u64,
    out: &mut [u8],
    link: &LinkTargets<'_>,
) -> Result<CompiledFunction, CompileError> {
    if out.len() < placement.len as usize {
        return Err(CompileError::EmitOverflow { needed: placement.len as usize });
    }
    let addr = |id: NodeId| base + placement.offsets[id as usize] as u64;
    let mut spans = Vec::with_capacity(placement.order.len());
    let mut values = Vec::new();
    for (pos, &id) in placement.order.iter().enumerate() {
        let node = &graph.nodes[id as usize];
        let stencil = lib.select(&node.key)?;
        let elide = placement.elided[pos];
        let mut conts = [0u64; 2];
        for (i, c) in node.edges() {
            conts[i] = addr(c);
        }
        values.clear();
        values.extend_from_slice(&node.values);
        bind_link_holes(node.key, node.link, &mut values, &mut conts, link);
        let at = placement.offsets[id as usize] as usize;
        let dest = base + at as u64;
        let slot = SlotValues { conts: &conts, values: &values, external: link.symbols };
        let n = stencil.materialize_into(dest, &slot, elide, &mut out[at..]).map_err(patch_error)?;
        spans.push(NodeSpan { node: id, key: node.key, offset: at as u32, len: n as u32, elided: elide });
    }
    let entry_offset = if graph.nodes.is_empty() { 0 } else { placement.offsets[graph.entry as usize] };
    Ok(CompiledFunction { base, len: placement.len, entry_offset, retained_jumps: placement.retained_jumps, spans })
}

fn bind_link_holes(key: StencilKey, call: CallLink, values: &mut [u64], conts: &mut [u64; 2], link: &LinkTargets<'_>) {
    let mut set = |role, v| {
        if let Some(o) = ordinal_of(&key, role) {
            values[o as usize] = v;
        }
    };
    match call {
        CallLink::None => {}
        CallLink::Function(f) => {
            conts[1] = link.entries[f as usize];
            set(HoleRole::Need, link.extents[f as usize] as u64);
            set(HoleRole::PoolLimit, link.pool_limit);
        }
        CallLink::External(e) => {
            set(HoleRole::Adapter, link.adapters[e as usize]);
            set(HoleRole::PoolLimit, link.pool_limit);
        }
    }
}

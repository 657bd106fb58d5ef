//! The CPS call graph: selected stencil instances linked by continuation
//! edges, and its depth-first emission order.

use super::frame::FrameLayout;
use super::lower::{Aux, Dest, Item, Lowered, Operand};
use super::regplan::{RegPlan, TempLoc};
use crate::lang::{ExternId, FuncId};
use crate::stencil::layout::{value_holes, HoleRole};
use crate::stencil::{Loc, NodeKind, StencilKey};

pub type NodeId = u32;

/// Targets bound only when the module is linked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallLink {
    None,
    /// Continuation 1 is the callee entry; `Need` is its frame extent.
    Function(FuncId),
    /// The adapter hole receives the host function for the external.
    External(ExternId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpsNode {
    pub key: StencilKey,
    /// Hole values by ordinal. Link-time holes (pool limit, adapter, callee
    /// need) hold 0 until link.
    pub values: Vec<u64>,
    /// Continuation targets inside the function. For calls, continuation 1
    /// is the callee and stays `None` here.
    pub conts: [Option<NodeId>; 2],
    pub link: CallLink,
}

impl CpsNode {
    pub fn is_call(&self) -> bool {
        matches!(self.link, CallLink::Function(_))
    }

    /// Continuation edges within the graph, as (ordinal, target).
    pub fn edges(&self) -> impl Iterator<Item = (usize, NodeId)> + '_ {
        self.conts.iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CpsGraph {
    pub entry: NodeId,
    pub nodes: Vec<CpsNode>,
}

impl CpsGraph {
    /// Depth-first order from the entry, continuation 0 first. Unreachable
    /// nodes are left out.
    pub fn emission_order(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        if self.nodes.is_empty() {
            return order;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.entry];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id as usize], true) {
                continue;
            }
            order.push(id);
            let node = &self.nodes[id as usize];
            if let Some(c) = node.conts[1] {
                stack.push(c);
            }
            if let Some(c) = node.conts[0] {
                stack.push(c);
            }
        }
        order
    }

    pub fn call_edges(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_call()).count()
    }

    pub fn branch_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.key.kind.is_conditional()).count()
    }
}

/// Builds the graph of a lowered function from its register plan and frame.
pub fn build_graph(lowered: &Lowered, plan: &RegPlan, frame: &FrameLayout) -> CpsGraph {
    let extent = frame.extent();
    let items = &lowered.items;

    let mut node_of = vec![u32::MAX; items.len()];
    let mut label_pos = vec![usize::MAX; lowered.labels as usize];
    let mut n = 0u32;
    for (i, it) in items.iter().enumerate() {
        match it {
            Item::Inst(_) => {
                node_of[i] = n;
                n += 1;
            }
            Item::Label(l) => label_pos[*l as usize] = i,
            _ => {}
        }
    }
    let resolve = resolver(items, &node_of, &label_pos);

    let operand_slot = |op: &Operand| -> (Loc, u64) {
        match *op {
            Operand::Lit(bits) => (Loc::Lit, bits),
            Operand::Var(id) => (Loc::Stack, frame.local_offset(id) as u64),
            Operand::Temp(t) => match frame.spill_offsets[t as usize] {
                Some(off) => (Loc::Stack, off as u64),
                None => (Loc::Reg, 0),
            },
        }
    };

    let mut nodes = Vec::with_capacity(n as usize);
    let mut op_index = 0usize;
    for (i, it) in items.iter().enumerate() {
        let inst = match it {
            Item::Inst(inst) => inst,
            Item::Drop(_) => {
                op_index += 1;
                continue;
            }
            _ => continue,
        };
        let pt = plan.pass_through[op_index];
        op_index += 1;
        let mut locs = [Loc::Reg; 3];
        let mut slots = [0u64; 3];
        for (j, op) in inst.operands().iter().enumerate() {
            (locs[j], slots[j]) = operand_slot(op);
        }
        let spill_off = inst.result.and_then(|t| {
            debug_assert_eq!(plan.temps[t as usize] == TempLoc::Spill, frame.spill_offsets[t as usize].is_some());
            frame.spill_offsets[t as usize]
        });
        let key = inst.key(&locs[..inst.operands().len()], pt, spill_off.is_some());

        let site_delta = |site: u32| extent as u64 + lowered.sites[site as usize].pending as u64;
        let values = value_holes(&key)
            .iter()
            .map(|h| match h.role {
                HoleRole::OperandOffset(j) | HoleRole::OperandLiteral(j) => slots[j as usize],
                HoleRole::Dest => match inst.aux {
                    Aux::Dest(Dest::Local(id)) => frame.local_offset(id) as u64,
                    Aux::Dest(Dest::Arg { site, index }) => site_delta(site) + 8 * index as u64,
                    _ => unreachable!("store without destination"),
                },
                HoleRole::FrameDelta => match inst.aux {
                    Aux::Call { site, .. } | Aux::External { site, .. } => site_delta(site),
                    _ => unreachable!("call without site"),
                },
                HoleRole::Need => match inst.aux {
                    Aux::External { site, .. } => lowered.sites[site as usize].area as u64,
                    _ => 0,
                },
                HoleRole::Spill => spill_off.expect("spill flag implies slot") as u64,
                HoleRole::PoolLimit | HoleRole::Adapter | HoleRole::PoolBase => 0,
            })
            .collect();

        let next = || Some(resolve(i + 1));
        let conts = match (inst.kind, inst.aux) {
            (NodeKind::Return, _) => [None, None],
            (k, Aux::Else(l)) if k.is_conditional() => [next(), Some(resolve(label_pos[l as usize]))],
            _ => [next(), None],
        };
        let link = match inst.aux {
            Aux::Call { func, .. } => CallLink::Function(func),
            Aux::External { ext, .. } => CallLink::External(ext),
            _ => CallLink::None,
        };
        nodes.push(CpsNode { key, values, conts, link });
    }
    let entry = if nodes.is_empty() { 0 } else { resolve(0) };
    CpsGraph { entry, nodes }
}

/// Maps an item position to the node that executes next from there,
/// following labels, drops and gotos. Every position is resolved once, so the
/// whole table costs linear time.
fn resolver<'a>(items: &'a [Item], node_of: &'a [u32], label_pos: &'a [usize]) -> impl Fn(usize) -> NodeId + 'a {
    const UNKNOWN: u32 = u32::MAX;
    let mut memo = vec![UNKNOWN; items.len()];
    let mut path = Vec::new();
    for start in 0..items.len() {
        let mut j = start;
        let target = loop {
            if memo[j] != UNKNOWN {
                break memo[j];
            }
            match items[j] {
                Item::Inst(_) => break node_of[j],
                Item::Label(_) | Item::Drop(_) => j += 1,
                Item::Goto(l) => j = label_pos[l as usize],
            }
            path.push(j);
            assert!(path.len() <= items.len(), "control cycle without instructions");
        };
        memo[start] = target;
        for p in path.drain(..) {
            memo[p] = target;
        }
    }
    move |i| memo[i]
}

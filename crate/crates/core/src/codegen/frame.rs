//! Frame layout: one 8-byte slot per local, then spill slots reused in LIFO
//! order as spilled temporaries die.

use super::regplan::{PlanOp, RegPlan};
use crate::lang::LocalId;

pub const SLOT: u32 = 8;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameLayout {
    pub locals: u32,
    /// Byte offset of each temporary's spill slot; `None` for register temps.
    pub spill_offsets: Vec<Option<u32>>,
    pub spill_slots: u32,
    /// Bytes used by locals and spill slots.
    pub size: u32,
}

impl FrameLayout {
    pub fn local_offset(&self, id: LocalId) -> u32 {
        debug_assert!(id < self.locals);
        id * SLOT
    }

    /// Bytes a call reserves for this frame in the pool. Never zero, so
    /// every call advances through the pool.
    pub fn extent(&self) -> u32 {
        self.size.max(SLOT)
    }
}

/// Assigns frame offsets. Spill slots are allocated when a spilled temporary
/// is pushed and freed when it is popped; freed slots are reused most recent
/// first.
pub fn layout_frame(locals: u32, ops: &[PlanOp], plan: &RegPlan) -> FrameLayout {
    let base = locals * SLOT;
    let mut offsets = vec![None; plan.temps.len()];
    let mut free: Vec<u32> = Vec::new();
    let mut next = 0u32;
    let mut stack: Vec<usize> = Vec::new();
    let mut temp = 0usize;
    for op in ops {
        for _ in 0..op.pops {
            let t = stack.pop().expect("balanced ops");
            if let Some(off) = offsets[t] {
                free.push((off - base) / SLOT);
            }
        }
        if op.push {
            if plan.is_spilled(temp) {
                let slot = free.pop().unwrap_or_else(|| {
                    next += 1;
                    next - 1
                });
                offsets[temp] = Some(base + slot * SLOT);
            }
            stack.push(temp);
            temp += 1;
        }
    }
    FrameLayout { locals, spill_offsets: offsets, spill_slots: next, size: base + next * SLOT }
}

//! Register planning over a linearized evaluation order.
//!
//! Expression evaluation is flattened into [`PlanOp`]s, each of which pops
//! some temporaries off an abstract stack and optionally pushes one. A
//! temporary stays in a register slot unless, at some point in its lifetime,
//! `K` or more temporaries sit above it (the watermark rule) or a call
//! happens while it is outstanding (calls clobber every slot).

/// One step of abstract evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOp {
    /// Temporaries consumed from the top of the stack.
    pub pops: u8,
    /// Whether the op leaves a new temporary.
    pub push: bool,
    /// Calls clobber every register slot.
    pub call: bool,
}

impl PlanOp {
    pub const fn new(pops: u8, push: bool, call: bool) -> PlanOp {
        PlanOp { pops, push, call }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TempLoc {
    /// Register slot index, equal to the number of register temporaries
    /// below this one.
    Reg(u8),
    Spill,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegPlan {
    /// Location of each temporary, indexed by push order.
    pub temps: Vec<TempLoc>,
    /// Register temporaries live underneath each op once its operands are
    /// popped: the op's pass-through count.
    pub pass_through: Vec<u8>,
}

impl RegPlan {
    pub fn spill_count(&self) -> usize {
        self.temps.iter().filter(|t| **t == TempLoc::Spill).count()
    }

    pub fn is_spilled(&self, temp: usize) -> bool {
        self.temps[temp] == TempLoc::Spill
    }
}

/// Plans register use for `ops` under a budget of `k` register temporaries.
/// With `k == 0` every temporary is spilled.
///
/// # Panics
/// If an op pops more temporaries than are outstanding.
pub fn plan_registers(ops: &[PlanOp], k: u8) -> RegPlan {
    let k = k as usize;
    let mut spilled: Vec<bool> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    // Entries below the watermark are already marked.
    let mut marked = 0usize;
    for op in ops {
        let n = op.pops as usize;
        assert!(n <= stack.len(), "op pops {n} of {} outstanding temporaries", stack.len());
        stack.truncate(stack.len() - n);
        marked = marked.min(stack.len());
        if op.call {
            for &t in &stack[marked..] {
                spilled[t] = true;
            }
            marked = stack.len();
        }
        if op.push {
            stack.push(spilled.len());
            spilled.push(false);
            while stack.len() - marked > k {
                spilled[stack[marked]] = true;
                marked += 1;
            }
        }
    }

    let mut temps = Vec::with_capacity(spilled.len());
    let mut pass_through = Vec::with_capacity(ops.len());
    let mut live: Vec<bool> = Vec::new();
    let mut regs = 0u8;
    for op in ops {
        for _ in 0..op.pops {
            if !live.pop().expect("checked above") {
                regs -= 1;
            }
        }
        pass_through.push(regs);
        if op.push {
            let t = temps.len();
            if spilled[t] {
                temps.push(TempLoc::Spill);
            } else {
                temps.push(TempLoc::Reg(regs));
                regs += 1;
            }
            live.push(spilled[t]);
        }
    }
    RegPlan { temps, pass_through }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEAF: PlanOp = PlanOp::new(0, true, false);
    const BIN: PlanOp = PlanOp::new(2, true, false);
    const CALL: PlanOp = PlanOp::new(0, true, true);
    const STORE: PlanOp = PlanOp::new(1, false, false);

    #[test]
    fn single_value_is_not_spilled() {
        let plan = plan_registers(&[LEAF, STORE], 3);
        assert_eq!(plan.temps, vec![TempLoc::Reg(0)]);
        assert_eq!(plan.pass_through, vec![0, 0]);
    }

    #[test]
    fn fib_shape_spills_only_first_call() {
        // fib(n - 1) + fib(n - 2): arg, store, call, arg, store, call, add.
        let ops = [LEAF, STORE, CALL, LEAF, STORE, CALL, BIN, STORE];
        let plan = plan_registers(&ops, 3);
        assert_eq!(plan.spill_count(), 1);
        assert!(plan.is_spilled(1));
        assert_eq!(plan.temps[3], TempLoc::Reg(0));
    }

    #[test]
    fn deep_right_spine_spills_below_watermark() {
        // a + (b + (c + d)) with every leaf materialized.
        let ops = [LEAF, LEAF, LEAF, LEAF, BIN, BIN, BIN];
        let plan = plan_registers(&ops, 2);
        let locs: Vec<_> = plan.temps[..4].to_vec();
        assert_eq!(locs, vec![TempLoc::Spill, TempLoc::Spill, TempLoc::Reg(0), TempLoc::Reg(1)]);
        assert_eq!(plan.pass_through[4], 0);
    }

    #[test]
    fn zero_budget_spills_everything() {
        let plan = plan_registers(&[LEAF, LEAF, BIN, STORE], 0);
        assert!(plan.temps.iter().all(|t| *t == TempLoc::Spill));
    }

    #[test]
    fn pass_through_counts_register_temps_below() {
        let ops = [LEAF, LEAF, LEAF, BIN, BIN];
        let plan = plan_registers(&ops, 3);
        assert_eq!(plan.pass_through, vec![0, 1, 2, 1, 0]);
    }
}

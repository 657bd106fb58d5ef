//! Invariants of the compiler checked over generated inputs.

use copypatch::codegen::{
    compile_module, layout_frame, plan_registers, prepare_function, CodegenOptions, LinkInputs, PlanOp, TempLoc,
};
use copypatch::frontend::{parse, print};
use copypatch::fuzz::gen_program;
use copypatch::lang::typecheck;
use copypatch::stencil::synthetic::{all_valid_keys, mock_library, random_stencil};
use copypatch::stencil::{patch_value, Arch, HoleTarget, PatchRecord, StencilKey, StencilLibrary, Width};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Builds a balanced op sequence from raw choices: leaves, calls with up to
/// two stored arguments, binary ops and stores.
fn ops_from(choices: &[u8]) -> Vec<PlanOp> {
    let mut ops = Vec::new();
    let mut depth = 0u8;
    for &c in choices {
        match c % 5 {
            0 => {
                ops.push(PlanOp::new(0, true, false));
                depth += 1;
            }
            1 => {
                for _ in 0..(c / 5 % 3).min(depth) {
                    ops.push(PlanOp::new(1, false, false));
                    depth -= 1;
                }
                ops.push(PlanOp::new(0, true, true));
                depth += 1;
            }
            2 if depth >= 2 => {
                ops.push(PlanOp::new(2, true, false));
                depth -= 1;
            }
            3 if depth >= 1 => {
                ops.push(PlanOp::new(1, false, false));
                depth -= 1;
            }
            _ => {
                ops.push(PlanOp::new(0, true, false));
                depth += 1;
            }
        }
    }
    for _ in 0..depth {
        ops.push(PlanOp::new(1, false, false));
    }
    ops
}

/// Lifetime `[push, pop)` of every temporary.
fn lifetimes(ops: &[PlanOp]) -> Vec<(usize, usize)> {
    let mut life: Vec<(usize, usize)> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for (at, op) in ops.iter().enumerate() {
        for _ in 0..op.pops {
            let t = stack.pop().unwrap();
            life[t] = (life[t].0, at);
        }
        if op.push {
            stack.push(life.len());
            life.push((at, ops.len()));
        }
    }
    life
}

fn link_any(_: &str) -> Option<u64> {
    Some(0x5000_0000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn register_budget_is_never_exceeded(choices in proptest::collection::vec(any::<u8>(), 0..40), k in 0u8..=3) {
        let ops = ops_from(&choices);
        let plan = plan_registers(&ops, k);
        let life = lifetimes(&ops);
        prop_assert_eq!(plan.temps.len(), life.len());
        for (at, op) in ops.iter().enumerate() {
            let live_regs = life
                .iter()
                .enumerate()
                .filter(|(t, (s, e))| *s <= at && at < *e && plan.temps[*t] != TempLoc::Spill)
                .count();
            prop_assert!(live_regs <= k as usize);
            if op.call {
                for (t, (s, e)) in life.iter().enumerate() {
                    if *s < at && at < *e {
                        prop_assert_eq!(plan.temps[t], TempLoc::Spill, "temp {} crosses call at {}", t, at);
                    }
                }
            }
        }
        // Register indices count the register temporaries underneath.
        for (t, loc) in plan.temps.iter().enumerate() {
            if let TempLoc::Reg(r) = loc {
                let (s, _) = life[t];
                let below = life[..t]
                    .iter()
                    .enumerate()
                    .filter(|(u, (us, ue))| *us < s && s < *ue && plan.temps[*u] != TempLoc::Spill)
                    .count();
                prop_assert_eq!(*r as usize, below);
            }
        }
    }

    #[test]
    fn live_spill_slots_never_share_bytes(choices in proptest::collection::vec(any::<u8>(), 0..40), k in 0u8..=3, locals in 0u32..5) {
        let ops = ops_from(&choices);
        let plan = plan_registers(&ops, k);
        let frame = layout_frame(locals, &ops, &plan);
        let life = lifetimes(&ops);
        for a in 0..life.len() {
            for b in 0..a {
                let (x, y) = (life[a], life[b]);
                if let (Some(oa), Some(ob)) = (frame.spill_offsets[a], frame.spill_offsets[b]) {
                    if x.0 < y.1 && y.0 < x.1 {
                        prop_assert_ne!(oa, ob);
                    }
                }
            }
        }
        for off in frame.spill_offsets.iter().flatten() {
            prop_assert_eq!(off % 8, 0);
            prop_assert!(*off >= locals * 8 && off + 8 <= frame.size);
        }
        prop_assert!(frame.size <= (locals + plan.spill_count() as u32) * 8);
    }

    #[test]
    fn patch_value_is_modular_address_arithmetic(
        addend in any::<i64>(),
        target in any::<u64>(),
        dest in any::<u64>(),
        offset in 0u32..4096,
        sub in any::<bool>(),
        add in any::<bool>(),
        wide in any::<bool>(),
    ) {
        let width = if wide { Width::W64 } else { Width::W32 };
        let rec = PatchRecord { offset, width, addend, subtract_site: sub, add_target: add, target: HoleTarget::Value(0) };
        let mut v = addend as i128;
        if add { v += target as i128; }
        if sub { v -= dest.wrapping_add(offset as u64) as i128; }
        let m = v.rem_euclid(1 << 64) as u64;
        match patch_value(&rec, dest, target) {
            Ok(got) => {
                prop_assert_eq!(got, m);
                prop_assert!(wide || i32::try_from(m as i64).is_ok());
            }
            Err(_) => prop_assert!(!wide && i32::try_from(m as i64).is_err()),
        }
    }

    #[test]
    fn library_round_trips(seed in any::<u64>(), n in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys = all_valid_keys(2);
        let mut lib = StencilLibrary::new(Arch::X86_64);
        for i in 0..n {
            let key = keys[(seed as usize).wrapping_add(i * 7919) % keys.len()];
            lib.insert(random_stencil(&mut rng, key));
        }
        let bytes = lib.serialize();
        let back = StencilLibrary::deserialize(&bytes).unwrap();
        prop_assert_eq!(back.serialize(), bytes);
        prop_assert_eq!(back, lib);
    }

    #[test]
    fn generated_programs_check_and_round_trip(seed in any::<u64>(), budget in 1usize..120) {
        let m = gen_program(seed, budget);
        prop_assert!(typecheck(&m).is_ok());
        prop_assert_eq!(parse(&print(&m)).unwrap(), m);
    }

    #[test]
    fn key_encodings_round_trip(i in any::<prop::sample::Index>()) {
        let keys = all_valid_keys(3);
        let key = keys[i.index(keys.len())];
        prop_assert_eq!(StencilKey::from_symbol(&key.symbol()), Some(key));
        prop_assert_eq!(StencilKey::from_bytes(&key.to_bytes()), Some(key));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphs_are_well_formed_and_emission_contiguous(seed in any::<u64>(), budget in 1usize..80) {
        let m = typecheck(&gen_program(seed, budget)).unwrap();
        let lib = mock_library(3);
        for f in &m.functions {
            let p = prepare_function(f, &lib, &CodegenOptions::default()).unwrap();
            let g = &p.graph;
            for n in &g.nodes {
                let conts = n.key.kind.continuations() as usize;
                // Calls bind their callee at link time.
                let internal = if n.is_call() { 1 } else { conts };
                prop_assert_eq!(n.edges().count(), internal, "{}", n.key);
            }
            let order = &p.placement.order;
            prop_assert_eq!(order.first().copied(), Some(g.entry));
            let mut seen = vec![false; g.nodes.len()];
            let mut at = 0;
            for (pos, &id) in order.iter().enumerate() {
                prop_assert!(!std::mem::replace(&mut seen[id as usize], true));
                prop_assert_eq!(p.placement.offsets[id as usize], at);
                let st = lib.select(&g.nodes[id as usize].key).unwrap();
                at += st.emitted_len(p.placement.elided[pos]) as u32;
            }
            prop_assert_eq!(at, p.placement.len);
        }
    }

    #[test]
    fn emission_is_deterministic(seed in any::<u64>(), budget in 1usize..80) {
        let m = typecheck(&gen_program(seed, budget)).unwrap();
        let lib = mock_library(3);
        let opts = CodegenOptions::default();
        let link = LinkInputs { pool_base: 0x6000_0000, pool_limit: 0x6001_0000, symbols: &link_any };
        let (a, ma) = compile_module(&m, &lib, &opts, 0x4000_0000, &link).unwrap();
        let (b, _) = compile_module(&m, &lib, &opts, 0x4000_0000, &link).unwrap();
        prop_assert_eq!(&a, &b);
        // Mock code reaches other code only through relative fields, so a
        // moved module is byte-identical.
        let (c, mc) = compile_module(&m, &lib, &opts, 0x4800_0000, &link).unwrap();
        prop_assert_eq!(&a, &c);
        prop_assert_eq!(ma.functions.len(), mc.functions.len());
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, each checked against
//! an oracle written independently of the implementation. The criteria run
//! sequentially inside a single test so the timing checks are not disturbed
//! by other tests.
//!
//! Run with `cargo test -p copypatch --test acceptance -- --nocapture` to see
//! the report.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use copypatch::codegen::{
    emit, place, plan_function, plan_registers, CallLink, CodegenOptions, CpsGraph, CpsNode, LinkTargets, PlanOp,
    TempLoc,
};
use copypatch::frontend::{parse, print};
use copypatch::fuzz::gen_program;
use copypatch::lang::{typecheck, TFunction};
use copypatch::programs::{compile_detached, scaling_module, FIB};
use copypatch::stencil::layout::value_holes;
use copypatch::stencil::synthetic::{all_valid_keys, mock_library, random_stencil};
use copypatch::stencil::{
    Arch, HoleTarget, NodeKind, PatchError, PatchRecord, Stencil, StencilKey, StencilLibrary, Width,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- 1

/// The value a hole must hold, computed in 128-bit arithmetic and reduced
/// modulo 2^64 like an address; `None` when a 32-bit hole cannot hold it.
fn oracle_patch(addend: i64, add: bool, target: u64, sub: bool, site: u64, width: Width) -> Option<Vec<u8>> {
    let mut v = addend as i128;
    if add {
        v += target as i128;
    }
    if sub {
        v -= site as i128;
    }
    let modular = v.rem_euclid(1i128 << 64) as u64;
    match width {
        Width::W64 => Some(modular.to_le_bytes().to_vec()),
        Width::W32 => {
            let s = modular as i64;
            (s >= i32::MIN as i64 && s <= i32::MAX as i64).then(|| (s as i32).to_le_bytes().to_vec())
        }
    }
}

fn c1_patch_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let key = StencilKey::new(NodeKind::Jump, None, &[], 0, false);
    let start = Instant::now();
    let mut overflows = 0;
    for case in 0..10_000usize {
        let combo = case % 8;
        let width = if combo & 1 == 0 { Width::W32 } else { Width::W64 };
        let subtract_site = combo & 2 != 0;
        let add_target = combo & 4 != 0;
        let len = rng.gen_range(8..48usize);
        let code: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let offset = rng.gen_range(0..=len - width.bytes());
        let dest: u64 = rng.gen_range(0x1000..1u64 << 47);
        let target = match rng.gen_range(0..4) {
            0 => rng.gen(),
            1 => rng.gen_range(0..1u64 << 31),
            _ => dest.wrapping_add_signed(rng.gen_range(-(1i64 << 31)..1i64 << 31)),
        };
        let addend: i64 = if rng.gen_bool(0.1) { rng.gen() } else { rng.gen_range(-64..64) };
        let rec = PatchRecord {
            offset: offset as u32,
            width,
            addend,
            subtract_site,
            add_target,
            target: HoleTarget::Value(0),
        };
        let stencil = Stencil { key, code: code.clone(), patches: vec![rec], tail: None };
        let holes: HashMap<HoleTarget, u64> = [(HoleTarget::Value(0), target)].into();
        let got = stencil.materialize(dest, &holes, false);
        match oracle_patch(addend, add_target, target, subtract_site, dest + offset as u64, width) {
            Some(field) => {
                let mut want = code;
                want[offset..offset + width.bytes()].copy_from_slice(&field);
                check!(got.as_ref() == Ok(&want), "case {case}: got {got:?}, oracle {want:?}");
            }
            None => {
                overflows += 1;
                check!(
                    matches!(got, Err(PatchError::PatchOverflow { .. })),
                    "case {case}: expected overflow, got {got:?}"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(1), "10^4 cases took {elapsed:?}");
    check!(overflows > 0, "no overflow case was generated");
    Ok(format!("10^4 cases over 8 flag/width combinations ({overflows} overflows) in {elapsed:.0?}"))
}

// ---------------------------------------------------------------- 2

fn c2_library_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut keys = all_valid_keys(3);
    keys.shuffle(&mut rng);
    for n in [0usize, 1, 500] {
        let mut lib = StencilLibrary::new(Arch::X86_64);
        for &key in &keys[..n] {
            lib.insert(random_stencil(&mut rng, key));
        }
        let bytes = lib.serialize();
        let back = StencilLibrary::deserialize(&bytes).map_err(|e| format!("n={n}: {e}"))?;
        check!(back == lib, "n={n}: decoded library differs");
        check!(back.serialize() == bytes, "n={n}: re-encoding is not byte-identical");
    }
    Ok("0, 1 and 500 stencils re-encode byte-identically".into())
}

// ---------------------------------------------------------------- 3

#[derive(Debug, Clone)]
enum Tree {
    Leaf,
    /// A call without arguments.
    Call0,
    /// A call with one argument, stored before the call.
    Call1(Box<Tree>),
    Bin(Box<Tree>, Box<Tree>),
}

/// Every tree of exactly `n` nodes.
fn trees(n: usize, memo: &mut HashMap<usize, Vec<Tree>>) -> Vec<Tree> {
    if let Some(t) = memo.get(&n) {
        return t.clone();
    }
    let mut out = Vec::new();
    if n == 1 {
        out.extend([Tree::Leaf, Tree::Call0]);
    } else if n > 1 {
        for c in trees(n - 1, memo) {
            out.push(Tree::Call1(Box::new(c)));
        }
        for a in 1..n - 1 {
            for l in trees(a, memo) {
                for r in trees(n - 1 - a, memo) {
                    out.push(Tree::Bin(Box::new(l.clone()), Box::new(r)));
                }
            }
        }
    }
    memo.insert(n, out.clone());
    out
}

fn tree_ops(t: &Tree, out: &mut Vec<PlanOp>) {
    match t {
        Tree::Leaf => out.push(PlanOp::new(0, true, false)),
        Tree::Call0 => out.push(PlanOp::new(0, true, true)),
        Tree::Call1(c) => {
            tree_ops(c, out);
            out.push(PlanOp::new(1, false, false));
            out.push(PlanOp::new(0, true, true));
        }
        Tree::Bin(l, r) => {
            tree_ops(l, out);
            tree_ops(r, out);
            out.push(PlanOp::new(2, true, false));
        }
    }
}

/// Brute-force stack simulation: after every step, any outstanding
/// temporary with K or more temporaries above it, or outstanding across a
/// call, goes to memory. Register slots are then numbered bottom-up.
fn simulate(ops: &[PlanOp], k: usize) -> (Vec<TempLoc>, Vec<u8>) {
    let mut spilled = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for op in ops {
        for _ in 0..op.pops {
            stack.pop();
        }
        if op.call {
            for &t in &stack {
                spilled[t] = true;
            }
        }
        if op.push {
            stack.push(spilled.len());
            spilled.push(false);
        }
        let h = stack.len();
        for (pos, &t) in stack.iter().enumerate() {
            if h - pos > k {
                spilled[t] = true;
            }
        }
    }
    let mut locs = Vec::new();
    let mut pass = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for op in ops {
        for _ in 0..op.pops {
            stack.pop();
        }
        let regs = stack.iter().filter(|&&t| !spilled[t]).count();
        pass.push(regs as u8);
        if op.push {
            let t = locs.len();
            locs.push(if spilled[t] { TempLoc::Spill } else { TempLoc::Reg(regs as u8) });
            stack.push(t);
        }
    }
    (locs, pass)
}

fn fib_function() -> TFunction {
    typecheck(&parse(FIB).unwrap()).unwrap().functions[0].clone()
}

fn c3_register_planning() -> Verdict {
    let mut memo = HashMap::new();
    let mut count = 0;
    for n in 1..=7 {
        for t in trees(n, &mut memo) {
            let mut ops = Vec::new();
            tree_ops(&t, &mut ops);
            ops.push(PlanOp::new(1, false, false));
            for k in 1..=3u8 {
                let plan = plan_registers(&ops, k);
                let (locs, pass) = simulate(&ops, k as usize);
                check!(plan.temps == locs, "K={k} {t:?}: plan {:?}, simulator {locs:?}", plan.temps);
                check!(plan.pass_through == pass, "K={k} {t:?}: pass-through differs");
                check!(pass.iter().all(|&p| p < k), "K={k} {t:?}: budget exceeded");
                count += 1;
            }
        }
    }
    let plan = plan_function(&fib_function(), &CodegenOptions::default());
    let call_results: Vec<u32> = plan
        .lowered
        .insts()
        .filter(|i| i.kind == NodeKind::Call)
        .map(|i| i.result.expect("calls produce values"))
        .collect();
    let spilled: Vec<u32> = (0..plan.regs.temps.len() as u32).filter(|&t| plan.regs.is_spilled(t as usize)).collect();
    check!(call_results.len() == 2, "fib has {} calls", call_results.len());
    check!(spilled == [call_results[0]], "fib spills {spilled:?}, first call result is {}", call_results[0]);
    Ok(format!("{count} (tree, K) pairs match the simulator; fib spills only the first call result"))
}

// ---------------------------------------------------------------- 4

fn random_functions(count: usize, seed: u64) -> Vec<TFunction> {
    let mut out = Vec::new();
    let mut s = seed;
    while out.len() < count {
        let m = gen_program(s, 10 + (s as usize % 60));
        out.extend(typecheck(&m).unwrap().functions);
        s += 1;
    }
    out.truncate(count);
    out
}

fn c4_frame_reuse() -> Verdict {
    let mut total_slots = 0;
    let mut total_naive = 0;
    for (i, f) in random_functions(1000, 4_000).iter().enumerate() {
        let k = (i % 4) as u8;
        let plan = plan_function(f, &CodegenOptions { registers: k, ..Default::default() });
        let frame = &plan.frame;
        // Lifetimes [push, pop) of every temporary, by op index.
        let mut life: Vec<(usize, usize)> = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for (at, op) in plan.ops.iter().enumerate() {
            for _ in 0..op.pops {
                let t = stack.pop().ok_or("unbalanced ops")?;
                life[t].1 = at;
            }
            if op.push {
                stack.push(life.len());
                life.push((at, usize::MAX));
            }
        }
        let locals = f.locals.len() as u32;
        let spilled: Vec<usize> = (0..life.len()).filter(|&t| plan.regs.is_spilled(t)).collect();
        let mut peak = 0;
        for (a, &s) in spilled.iter().enumerate() {
            let off = frame.spill_offsets[s].ok_or(format!("f{i}: spilled temp {s} has no slot"))?;
            check!(off % 8 == 0, "f{i}: slot {off} misaligned");
            check!(off >= locals * 8 && off + 8 <= frame.size, "f{i}: slot {off} outside spill area");
            let mut live_here = 1;
            for &o in &spilled[..a] {
                let (x, y) = (life[s], life[o]);
                if x.0 < y.1 && y.0 < x.1 {
                    check!(frame.spill_offsets[o] != Some(off), "f{i}: temps {o} and {s} overlap in slot {off}");
                }
            }
            for &o in &spilled {
                if o != s && life[o].0 <= life[s].0 && life[s].0 < life[o].1 {
                    live_here += 1;
                }
            }
            peak = peak.max(live_here);
        }
        let naive = locals * 8 + spilled.len() as u32 * 8;
        check!(frame.size <= naive, "f{i}: frame {} exceeds naive {naive}", frame.size);
        check!(frame.spill_slots == peak, "f{i}: {} slots for peak overlap {peak}", frame.spill_slots);
        total_slots += frame.size;
        total_naive += naive;
    }
    Ok(format!("1000 functions: no live overlap, frames total {total_slots} B vs naive {total_naive} B"))
}

// ---------------------------------------------------------------- 5

/// Counts jumps in mock code and checks each lands on an emitted node.
fn decode_jumps(code: &[u8], base: u64, starts: &[u64]) -> Result<u32, String> {
    let mut i = 0;
    let mut jumps = 0;
    while i < code.len() {
        let step = match code[i] {
            0x90 | 0xc3 => 1,
            0xb8 => 5,
            0x48 if code.get(i + 1) == Some(&0xb8) => 10,
            0x75 => {
                jumps += 1;
                2
            }
            op @ (0xe8 | 0xe9) => {
                let rel = i32::from_le_bytes(code[i + 1..i + 5].try_into().unwrap());
                let to = (base + i as u64 + 5).wrapping_add_signed(rel as i64);
                check!(starts.contains(&to), "jump at +{i} lands at {to:#x}, not a node");
                jumps += (op == 0xe9) as u32;
                5
            }
            b => return Err(format!("byte {b:#04x} at +{i} is not mock code")),
        };
        i += step;
    }
    Ok(jumps)
}

struct KeyPools {
    straight: Vec<StencilKey>,
    branches: Vec<StencilKey>,
    returns: Vec<StencilKey>,
}

fn random_graph(rng: &mut ChaCha8Rng, pools: &KeyPools, chain: bool) -> CpsGraph {
    let KeyPools { straight, branches, returns } = pools;
    let n = rng.gen_range(1..40u32);
    let key_for = |rng: &mut ChaCha8Rng, i: u32| {
        if i == n - 1 {
            return *returns.choose(rng).unwrap();
        }
        match rng.gen_range(0..10) {
            _ if chain => *straight.choose(rng).unwrap(),
            0..=5 => *straight.choose(rng).unwrap(),
            6..=7 => *branches.choose(rng).unwrap(),
            8 => StencilKey::new(NodeKind::Jump, None, &[], 0, false),
            _ => *returns.choose(rng).unwrap(),
        }
    };
    let nodes = (0..n)
        .map(|i| {
            let key = key_for(rng, i);
            let mut conts = [None, None];
            for (c, slot) in conts.iter_mut().enumerate().take(key.kind.continuations() as usize) {
                *slot = Some(if c == 0 && (chain || rng.gen_bool(0.6)) { i + 1 } else { rng.gen_range(0..n) });
            }
            CpsNode { key, values: vec![0; value_holes(&key).len()], conts, link: CallLink::None }
        })
        .collect();
    CpsGraph { entry: 0, nodes }
}

fn c5_jump_retention() -> Verdict {
    let lib = mock_library(0);
    let keys = all_valid_keys(0);
    let simple = |k: &&StencilKey| !matches!(k.kind, NodeKind::Call | NodeKind::ExternalCall | NodeKind::EntryThunk);
    let straight: Vec<StencilKey> = keys
        .iter()
        .filter(simple)
        .filter(|k| k.kind.continuations() == 1 && k.kind != NodeKind::Jump)
        .copied()
        .collect();
    let branches: Vec<StencilKey> = keys.iter().filter(|k| k.kind.is_conditional()).copied().collect();
    let returns: Vec<StencilKey> = keys.iter().filter(|k| k.kind == NodeKind::Return).copied().collect();
    let pools = KeyPools { straight, branches, returns };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let none = |_: &str| None;
    let link = LinkTargets { entries: &[], extents: &[], adapters: &[], pool_limit: 0, symbols: &none };
    let base = 0x7000_0000u64;
    let mut retained_total = 0;
    for g_i in 0..1100 {
        let chain = g_i >= 1000;
        let g = random_graph(&mut rng, &pools, chain);
        for elide in [true, false] {
            let p = place(&g, &lib, elide).map_err(|e| e.to_string())?;
            let mut buf = vec![0u8; p.len as usize];
            let f = emit(&g, &p, &lib, base, &mut buf, &link).map_err(|e| e.to_string())?;
            let starts: Vec<u64> = f.spans.iter().map(|s| base + s.offset as u64).collect();
            let decoded = decode_jumps(&buf, base, &starts)?;
            check!(f.retained_jumps == decoded, "graph {g_i}: reported {}, decoded {decoded}", f.retained_jumps);
            // Redirections: every conditional, plus every edge whose target
            // is not the next emitted node (or all edges without elision).
            let mut want = 0;
            for (pos, &id) in p.order.iter().enumerate() {
                let node = &g.nodes[id as usize];
                want += node.key.kind.is_conditional() as u32;
                for (c, t) in node.edges() {
                    let adjacent = c == 0 && p.order.get(pos + 1) == Some(&t);
                    want += !(elide && adjacent) as u32;
                }
            }
            check!(decoded == want, "graph {g_i}: {decoded} jumps, {want} redirections");
            if chain && elide {
                check!(decoded == 0, "straight-line graph {g_i} retains {decoded} jumps");
            }
            retained_total += decoded;
        }
    }
    Ok(format!("1000 random + 100 straight-line graphs: retained = redirections ({retained_total} jumps)"))
}

// ---------------------------------------------------------------- 6

fn c6_linear_scaling() -> Verdict {
    let start = Instant::now();
    let lib = mock_library(3);
    let opts = CodegenOptions::default();
    let mut buf = Vec::new();
    let mut per_stmt = Vec::new();
    for n in [100usize, 1_000, 5_000, 10_000] {
        let m = typecheck(&scaling_module(n)).unwrap();
        compile_detached(&m, &lib, &opts, &mut buf).map_err(|e| e.to_string())?;
        let mut samples: Vec<f64> = (0..30)
            .map(|_| {
                let t = Instant::now();
                compile_detached(&m, &lib, &opts, &mut buf).unwrap();
                t.elapsed().as_secs_f64() / n as f64
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        per_stmt.push((n, samples[samples.len() / 2]));
    }
    let elapsed = start.elapsed();
    let first = per_stmt[0].1;
    let ratios: Vec<String> =
        per_stmt.iter().map(|(n, t)| format!("{n}: {:.0} ns ({:.2}x)", t * 1e9, t / first)).collect();
    for &(n, t) in &per_stmt {
        let r = t / first;
        check!((1.0 / 1.5..=1.5).contains(&r), "N={n}: {r:.2}x the N=100 cost; {}", ratios.join(", "));
    }
    check!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("median per statement {} in {elapsed:.1?}", ratios.join(", ")))
}

// ---------------------------------------------------------------- 7

fn c7_parse_print() -> Verdict {
    for seed in 0..10_000u64 {
        let m = gen_program(seed, 1 + (seed as usize % 50));
        typecheck(&m).map_err(|e| format!("seed {seed}: generated program rejected: {e}"))?;
        let text = print(&m);
        let back = parse(&text).map_err(|e| format!("seed {seed}: {e}\n{text}"))?;
        check!(back == m, "seed {seed}: parse(print(m)) differs\n{text}");
    }
    Ok("10^4 generated programs typecheck and survive parse(print(m)) unchanged".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("patch algebra", c1_patch_algebra),
        ("library round-trip", c2_library_round_trip),
        ("register planning", c3_register_planning),
        ("frame reuse", c4_frame_reuse),
        ("jump retention", c5_jump_retention),
        ("linear scaling", c6_linear_scaling),
        ("parse/print identity", c7_parse_print),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match verdict {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

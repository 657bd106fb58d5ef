//! Mock stencils: well-formed stand-ins built from the hole layout alone.
//!
//! Mock code is a fixed little x86-64 vocabulary so emitted buffers can be
//! decoded independently:
//!
//! | bytes            | meaning                                  |
//! |------------------|------------------------------------------|
//! | `90`             | filler                                   |
//! | `b8 imm32`       | 32-bit value hole                        |
//! | `48 b8 imm64`    | 64-bit value hole                        |
//! | `75 05`          | conditional skip over the next jump      |
//! | `e8 rel32`       | call to a continuation                   |
//! | `e9 rel32`       | jump to a continuation                   |
//! | `c3`             | return                                   |
//!
//! Mock stencils are never executed.

use rand::Rng;

use super::key::{Loc, NodeKind, StencilKey, REG_SLOTS};
use super::layout::value_holes;
use super::{Arch, HoleTarget, PatchRecord, Stencil, StencilLibrary, Tail, Width};
use crate::lang::{BinOp, CmpOp, ValueType};

pub const OP_NOP: u8 = 0x90;
pub const OP_MOV32: u8 = 0xb8;
pub const OP_REX_W: u8 = 0x48;
pub const OP_JNE8: u8 = 0x75;
pub const OP_CALL: u8 = 0xe8;
pub const OP_JMP: u8 = 0xe9;
pub const OP_RET: u8 = 0xc3;

fn abs_patch(offset: usize, width: Width, n: u16) -> PatchRecord {
    PatchRecord {
        offset: offset as u32,
        width,
        addend: 0,
        subtract_site: false,
        add_target: true,
        target: HoleTarget::Value(n),
    }
}

fn rel_patch(offset: usize, n: u16) -> PatchRecord {
    PatchRecord {
        offset: offset as u32,
        width: Width::W32,
        addend: -4,
        subtract_site: true,
        add_target: true,
        target: HoleTarget::Cont(n),
    }
}

/// Builds the mock stencil for `key`.
pub fn mock_stencil(key: StencilKey) -> Stencil {
    let mut code = vec![OP_NOP];
    let mut patches = Vec::new();
    for (i, h) in value_holes(&key).iter().enumerate() {
        match h.width {
            Width::W32 => {
                code.push(OP_MOV32);
                patches.push(abs_patch(code.len(), Width::W32, i as u16));
                code.extend_from_slice(&[0; 4]);
            }
            Width::W64 => {
                code.extend_from_slice(&[OP_REX_W, OP_MOV32]);
                patches.push(abs_patch(code.len(), Width::W64, i as u16));
                code.extend_from_slice(&[0; 8]);
            }
        }
    }
    let mut jump = |code: &mut Vec<u8>, op: u8, n: u16| {
        code.push(op);
        patches.push(rel_patch(code.len(), n));
        code.extend_from_slice(&[0; 4]);
    };
    let tail = match key.kind {
        NodeKind::Return => {
            code.push(OP_RET);
            None
        }
        NodeKind::EntryThunk => {
            jump(&mut code, OP_CALL, 0);
            code.push(OP_RET);
            None
        }
        k => {
            if k.is_conditional() {
                code.extend_from_slice(&[OP_JNE8, 5]);
                jump(&mut code, OP_JMP, 1);
            } else if k == NodeKind::Call {
                jump(&mut code, OP_CALL, 1);
            }
            let at = code.len();
            jump(&mut code, OP_JMP, 0);
            Some(Tail { offset: at as u32, len: 5 })
        }
    };
    Stencil { key, code, patches, tail }
}

/// Every valid key with pass-through counts up to `max_pt`.
pub fn all_valid_keys(max_pt: u8) -> Vec<StencilKey> {
    let mut kinds = vec![
        NodeKind::Literal,
        NodeKind::VarLoad,
        NodeKind::VarStore,
        NodeKind::Branch,
        NodeKind::Jump,
        NodeKind::Call,
        NodeKind::ExternalCall,
        NodeKind::Return,
        NodeKind::IndexLoad,
        NodeKind::IndexStore,
        NodeKind::EntryThunk,
    ];
    for op in BinOp::ALL {
        kinds.push(NodeKind::Binary(op));
        kinds.push(NodeKind::BinaryVarConst(op));
    }
    for op in CmpOp::ALL {
        kinds.push(NodeKind::Compare(op));
        kinds.push(NodeKind::IfCmpVarConst(op));
    }
    let mut out = Vec::new();
    for kind in kinds {
        let types: Vec<Option<ValueType>> =
            if kind.is_typed() { ValueType::ALL.iter().map(|t| Some(*t)).collect() } else { vec![None] };
        let arity = kind.arity();
        let combos = 3usize.pow(arity as u32);
        for ty in types {
            for c in 0..combos {
                let mut locs = Vec::with_capacity(arity);
                let mut x = c;
                for _ in 0..arity {
                    locs.push(Loc::ALL[x % 3]);
                    x /= 3;
                }
                for pt in 0..=max_pt.min(REG_SLOTS) {
                    for spill in [false, true] {
                        let key = StencilKey::new(kind, ty, &locs, pt, spill);
                        if key.validate().is_ok() {
                            out.push(key);
                        }
                    }
                }
            }
        }
    }
    out.sort_by_cached_key(|k| k.to_bytes());
    out
}

/// Mock library covering every valid key with pass-through up to `max_pt`.
pub fn mock_library(max_pt: u8) -> StencilLibrary {
    let mut lib = StencilLibrary::new(Arch::host());
    for key in all_valid_keys(max_pt) {
        lib.insert(mock_stencil(key));
    }
    lib
}

/// A stencil with random code and random, not necessarily layout-conformant,
/// patch records. Useful for exercising the file format.
pub fn random_stencil(rng: &mut impl Rng, key: StencilKey) -> Stencil {
    let len = rng.gen_range(1..200usize);
    let code: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
    let mut patches = Vec::new();
    for _ in 0..rng.gen_range(0..6) {
        let width = if rng.gen() { Width::W32 } else { Width::W64 };
        if len < width.bytes() {
            continue;
        }
        let target = match rng.gen_range(0..3) {
            0 => HoleTarget::Cont(rng.gen_range(0..3)),
            1 => HoleTarget::Value(rng.gen_range(0..8)),
            _ => HoleTarget::External(format!("sym{}", rng.gen_range(0..100))),
        };
        patches.push(PatchRecord {
            offset: rng.gen_range(0..=(len - width.bytes())) as u32,
            width,
            addend: rng.gen(),
            subtract_site: rng.gen(),
            add_target: rng.gen(),
            target,
        });
    }
    let tail = if rng.gen() && len >= 5 { Some(Tail { offset: (len - 5) as u32, len: 5 }) } else { None };
    Stencil { key, code, patches, tail }
}

/// Decodes mock code and counts the continuation jumps left in it: `e9`
/// jumps and `75` conditional skips. Returns `None` on bytes outside the
/// mock vocabulary.
pub fn count_mock_jumps(code: &[u8]) -> Option<usize> {
    let mut i = 0;
    let mut jumps = 0;
    while i < code.len() {
        i += match code[i] {
            OP_NOP | OP_RET => 1,
            OP_MOV32 | OP_CALL => 5,
            OP_REX_W if code.get(i + 1) == Some(&OP_MOV32) => 10,
            OP_JNE8 => {
                jumps += 1;
                2
            }
            OP_JMP => {
                jumps += 1;
                5
            }
            _ => return None,
        };
    }
    (i == code.len()).then_some(jumps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_mock_stencil_validates() {
        for key in all_valid_keys(4) {
            let s = mock_stencil(key);
            s.validate().unwrap_or_else(|e| panic!("{e}"));
        }
    }

    #[test]
    fn key_space_is_duplicate_free() {
        let keys = all_valid_keys(3);
        let mut b: Vec<_> = keys.iter().map(|k| k.to_bytes()).collect();
        b.dedup();
        assert_eq!(b.len(), keys.len());
        assert!(keys.len() > 1000, "{}", keys.len());
    }

    #[test]
    fn branch_mock_shape() {
        let key = StencilKey::new(NodeKind::Branch, None, &[Loc::Reg], 0, false);
        let s = mock_stencil(key);
        assert_eq!(s.code[0..3], [OP_NOP, OP_JNE8, 5]);
        assert_eq!(count_mock_jumps(&s.code), Some(3));
        assert_eq!(count_mock_jumps(&s.code[..s.emitted_len(true)]), Some(2));
    }
}

//! The hole-ordinal contract shared by stencil sources, the extractor and the
//! code generator.
//!
//! Value ordinals are assigned in this order:
//! 1. one hole per `Stack` or `Lit` operand, left to right (a frame offset
//!    for `Stack`, the constant for `Lit`);
//! 2. kind-specific holes (see [`HoleRole`]);
//! 3. the spill offset, when the key's spill flag is set.

use super::key::{Loc, NodeKind, StencilKey};
use super::Width;
use crate::lang::ValueType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HoleRole {
    /// Frame offset of operand `i`.
    OperandOffset(u8),
    /// Constant value of operand `i`.
    OperandLiteral(u8),
    /// Frame offset written by a store.
    Dest,
    /// Offset from the current frame to the callee frame or argument block.
    FrameDelta,
    /// Bytes the callee frame or argument block occupies.
    Need,
    /// Absolute end of the frame pool.
    PoolLimit,
    /// Address of the host function behind an external call.
    Adapter,
    /// Absolute start of the frame pool (entry thunk only).
    PoolBase,
    /// Frame offset receiving the result when it is spilled.
    Spill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoleSpec {
    pub role: HoleRole,
    pub width: Width,
}

/// Width of a literal hole for an operand of type `ty`.
pub fn literal_width(ty: ValueType) -> Width {
    match ty {
        ValueType::I32 | ValueType::Bool => Width::W32,
        _ => Width::W64,
    }
}

/// Value holes of `key`, indexed by ordinal.
pub fn value_holes(key: &StencilKey) -> Vec<HoleSpec> {
    let spec = |role, width| HoleSpec { role, width };
    let mut v = Vec::new();
    let types = key.kind.operand_types(key.ty);
    for (i, (loc, ty)) in key.operands().iter().zip(types).enumerate() {
        match loc {
            Loc::Reg => {}
            Loc::Stack => v.push(spec(HoleRole::OperandOffset(i as u8), Width::W32)),
            Loc::Lit => v.push(spec(HoleRole::OperandLiteral(i as u8), literal_width(ty))),
        }
    }
    match key.kind {
        NodeKind::VarStore | NodeKind::BinaryVarConst(_) => v.push(spec(HoleRole::Dest, Width::W32)),
        NodeKind::Call => {
            v.push(spec(HoleRole::FrameDelta, Width::W32));
            v.push(spec(HoleRole::Need, Width::W32));
            v.push(spec(HoleRole::PoolLimit, Width::W64));
        }
        NodeKind::ExternalCall => {
            v.push(spec(HoleRole::FrameDelta, Width::W32));
            v.push(spec(HoleRole::Need, Width::W32));
            v.push(spec(HoleRole::PoolLimit, Width::W64));
            v.push(spec(HoleRole::Adapter, Width::W64));
        }
        NodeKind::EntryThunk => v.push(spec(HoleRole::PoolBase, Width::W64)),
        _ => {}
    }
    if key.spill {
        v.push(spec(HoleRole::Spill, Width::W32));
    }
    v
}

/// Ordinal of the first hole with `role`.
pub fn ordinal_of(key: &StencilKey, role: HoleRole) -> Option<u16> {
    value_holes(key).iter().position(|h| h.role == role).map(|i| i as u16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{BinOp, CmpOp};

    #[test]
    fn compare_stack_lit_has_offset_then_literal() {
        let key =
            StencilKey::new(NodeKind::Compare(CmpOp::Le), Some(ValueType::I32), &[Loc::Stack, Loc::Lit], 0, false);
        let roles: Vec<_> = value_holes(&key).iter().map(|h| (h.role, h.width)).collect();
        assert_eq!(roles, vec![(HoleRole::OperandOffset(0), Width::W32), (HoleRole::OperandLiteral(1), Width::W32)]);
    }

    #[test]
    fn spill_comes_last() {
        let key = StencilKey::new(NodeKind::Binary(BinOp::Add), Some(ValueType::F64), &[Loc::Lit, Loc::Reg], 0, true);
        let h = value_holes(&key);
        assert_eq!(h[0], HoleSpec { role: HoleRole::OperandLiteral(0), width: Width::W64 });
        assert_eq!(h[1].role, HoleRole::Spill);
        let call = StencilKey::new(NodeKind::ExternalCall, None, &[], 0, true);
        let roles: Vec<_> = value_holes(&call).iter().map(|h| h.role).collect();
        assert_eq!(
            roles,
            vec![HoleRole::FrameDelta, HoleRole::Need, HoleRole::PoolLimit, HoleRole::Adapter, HoleRole::Spill]
        );
        assert_eq!(ordinal_of(&call, HoleRole::Adapter), Some(3));
    }
}

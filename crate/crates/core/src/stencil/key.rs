//! Stencil configuration keys and their canonical byte encoding.

use std::fmt;

use crate::lang::{BinOp, CmpOp, ValueType};

/// Where an operand lives when a stencil starts executing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    /// A register temp slot; which one follows from the pass-through count.
    Reg,
    /// An 8-byte frame slot at a patched offset.
    Stack,
    /// A constant patched into the code.
    Lit,
}

impl Loc {
    pub const ALL: [Loc; 3] = [Loc::Reg, Loc::Stack, Loc::Lit];

    pub fn name(self) -> &'static str {
        match self {
            Loc::Reg => "reg",
            Loc::Stack => "stack",
            Loc::Lit => "lit",
        }
    }

    pub fn from_name(s: &str) -> Option<Loc> {
        Loc::ALL.into_iter().find(|l| l.name() == s)
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(t: u8) -> Option<Loc> {
        Loc::ALL.get(t as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Literal,
    VarLoad,
    VarStore,
    Binary(BinOp),
    Compare(CmpOp),
    /// Conditional on a bool operand: continuation 0 when true, 1 when false.
    Branch,
    Jump,
    /// Calls continuation 1 (the callee entry), then continues at 0.
    Call,
    ExternalCall,
    Return,
    IndexLoad,
    IndexStore,
    /// `if (var op const)`.
    IfCmpVarConst(CmpOp),
    /// `dest = var op const`.
    BinaryVarConst(BinOp),
    /// Host entry: sets up the frame pool and calls the function entry.
    EntryThunk,
}

/// Kind names as used in manifests and symbol dumps.
const KIND_NAMES: [&str; 15] = [
    "literal",
    "var_load",
    "var_store",
    "binary",
    "compare",
    "branch",
    "jump",
    "call",
    "external_call",
    "return",
    "index_load",
    "index_store",
    "if_cmp_var_const",
    "binary_var_const",
    "entry_thunk",
];

impl NodeKind {
    pub fn tag(self) -> u8 {
        match self {
            NodeKind::Literal => 0,
            NodeKind::VarLoad => 1,
            NodeKind::VarStore => 2,
            NodeKind::Binary(_) => 3,
            NodeKind::Compare(_) => 4,
            NodeKind::Branch => 5,
            NodeKind::Jump => 6,
            NodeKind::Call => 7,
            NodeKind::ExternalCall => 8,
            NodeKind::Return => 9,
            NodeKind::IndexLoad => 10,
            NodeKind::IndexStore => 11,
            NodeKind::IfCmpVarConst(_) => 12,
            NodeKind::BinaryVarConst(_) => 13,
            NodeKind::EntryThunk => 14,
        }
    }

    pub fn op_tag(self) -> u8 {
        match self {
            NodeKind::Binary(op) | NodeKind::BinaryVarConst(op) => op as u8,
            NodeKind::Compare(op) | NodeKind::IfCmpVarConst(op) => op as u8,
            _ => 0,
        }
    }

    fn from_tags(kind: u8, op: u8) -> Option<NodeKind> {
        let bin = || BinOp::ALL.get(op as usize).copied();
        let cmp = || CmpOp::ALL.get(op as usize).copied();
        let plain = |k: NodeKind| (op == 0).then_some(k);
        match kind {
            0 => plain(NodeKind::Literal),
            1 => plain(NodeKind::VarLoad),
            2 => plain(NodeKind::VarStore),
            3 => bin().map(NodeKind::Binary),
            4 => cmp().map(NodeKind::Compare),
            5 => plain(NodeKind::Branch),
            6 => plain(NodeKind::Jump),
            7 => plain(NodeKind::Call),
            8 => plain(NodeKind::ExternalCall),
            9 => plain(NodeKind::Return),
            10 => plain(NodeKind::IndexLoad),
            11 => plain(NodeKind::IndexStore),
            12 => cmp().map(NodeKind::IfCmpVarConst),
            13 => bin().map(NodeKind::BinaryVarConst),
            14 => plain(NodeKind::EntryThunk),
            _ => None,
        }
    }

    /// Base name without operator, e.g. `binary`.
    pub fn base_name(self) -> &'static str {
        KIND_NAMES[self.tag() as usize]
    }

    pub fn op_name(self) -> Option<&'static str> {
        match self {
            NodeKind::Binary(op) | NodeKind::BinaryVarConst(op) => Some(op.name()),
            NodeKind::Compare(op) | NodeKind::IfCmpVarConst(op) => Some(op.name()),
            _ => None,
        }
    }

    /// Builds a kind from its base name and an optional operator name.
    pub fn from_names(base: &str, op: Option<&str>) -> Option<NodeKind> {
        let tag = KIND_NAMES.iter().position(|n| *n == base)? as u8;
        let op_tag = match (tag, op) {
            (3 | 13, Some(o)) => BinOp::ALL.iter().position(|b| b.name() == o)? as u8,
            (4 | 12, Some(o)) => CmpOp::ALL.iter().position(|c| c.name() == o)? as u8,
            (3 | 4 | 12 | 13, None) => return None,
            (_, Some(_)) => return None,
            (_, None) => 0,
        };
        NodeKind::from_tags(tag, op_tag)
    }

    pub fn has_op(self) -> bool {
        self.op_name().is_some()
    }

    /// Number of continuation holes.
    pub fn continuations(self) -> u8 {
        match self {
            NodeKind::Return => 0,
            NodeKind::Branch | NodeKind::IfCmpVarConst(_) | NodeKind::Call => 2,
            _ => 1,
        }
    }

    /// True for two-way conditional nodes.
    pub fn is_conditional(self) -> bool {
        matches!(self, NodeKind::Branch | NodeKind::IfCmpVarConst(_))
    }

    /// True when the node leaves a value for a consumer.
    pub fn produces_value(self) -> bool {
        matches!(
            self,
            NodeKind::Literal
                | NodeKind::VarLoad
                | NodeKind::Binary(_)
                | NodeKind::Compare(_)
                | NodeKind::Call
                | NodeKind::ExternalCall
                | NodeKind::IndexLoad
        )
    }

    /// Number of operands the key's location vector must describe.
    pub fn arity(self) -> usize {
        match self {
            NodeKind::Jump | NodeKind::Call | NodeKind::ExternalCall | NodeKind::EntryThunk => 0,
            NodeKind::Literal | NodeKind::VarLoad | NodeKind::VarStore | NodeKind::Branch => 1,
            NodeKind::Return => 1,
            NodeKind::Binary(_)
            | NodeKind::Compare(_)
            | NodeKind::IndexLoad
            | NodeKind::IfCmpVarConst(_)
            | NodeKind::BinaryVarConst(_) => 2,
            NodeKind::IndexStore => 3,
        }
    }

    /// Type of each operand given the key's type.
    pub fn operand_types(self, ty: Option<ValueType>) -> Vec<ValueType> {
        let t = ty.unwrap_or(ValueType::I64);
        match self {
            NodeKind::Branch => vec![ValueType::Bool],
            NodeKind::IndexLoad => vec![ValueType::Ptr, ValueType::I64],
            NodeKind::IndexStore => vec![ValueType::Ptr, ValueType::I64, t],
            k => vec![t; k.arity()],
        }
    }

    /// Whether the key carries a value type.
    pub fn is_typed(self) -> bool {
        !matches!(
            self,
            NodeKind::Branch | NodeKind::Jump | NodeKind::Call | NodeKind::ExternalCall | NodeKind::EntryThunk
        )
    }

    /// Locations operand `i` may take.
    pub fn allowed_locs(self, i: usize) -> &'static [Loc] {
        const ANY: &[Loc] = &[Loc::Reg, Loc::Stack, Loc::Lit];
        const NO_LIT: &[Loc] = &[Loc::Reg, Loc::Stack];
        match (self, i) {
            (NodeKind::Literal, _) => &[Loc::Lit],
            (NodeKind::VarLoad, _) => &[Loc::Stack],
            (NodeKind::Branch, _) => NO_LIT,
            (NodeKind::IndexLoad | NodeKind::IndexStore, 0) => NO_LIT,
            (NodeKind::IfCmpVarConst(_) | NodeKind::BinaryVarConst(_), 0) => &[Loc::Stack],
            (NodeKind::IfCmpVarConst(_) | NodeKind::BinaryVarConst(_), _) => &[Loc::Lit],
            _ => ANY,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op_name() {
            Some(op) => write!(f, "{}.{op}", self.base_name()),
            None => f.write_str(self.base_name()),
        }
    }
}

pub const MAX_OPERANDS: usize = 3;
/// Number of register temp slots in the stencil calling convention.
pub const REG_SLOTS: u8 = 5;

/// Identifies one stencil variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StencilKey {
    pub kind: NodeKind,
    pub ty: Option<ValueType>,
    locs: [Loc; MAX_OPERANDS],
    nlocs: u8,
    pub pass_through: u8,
    pub spill: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid stencil key: {0}")]
pub struct KeyError(pub String);

fn ty_tag(ty: Option<ValueType>) -> u8 {
    ty.map(|t| t as u8).unwrap_or(0xFF)
}

fn ty_from_tag(t: u8) -> Option<Option<ValueType>> {
    if t == 0xFF {
        Some(None)
    } else {
        ValueType::ALL.get(t as usize).map(|&v| Some(v))
    }
}

impl StencilKey {
    /// Builds a key without validating it; see [`StencilKey::validate`].
    pub fn new(kind: NodeKind, ty: Option<ValueType>, operands: &[Loc], pass_through: u8, spill: bool) -> StencilKey {
        assert!(operands.len() <= MAX_OPERANDS);
        let mut locs = [Loc::Reg; MAX_OPERANDS];
        locs[..operands.len()].copy_from_slice(operands);
        StencilKey { kind, ty, locs, nlocs: operands.len() as u8, pass_through, spill }
    }

    pub fn operands(&self) -> &[Loc] {
        &self.locs[..self.nlocs as usize]
    }

    /// Number of operands taken from register slots.
    pub fn reg_operands(&self) -> u8 {
        self.operands().iter().filter(|l| **l == Loc::Reg).count() as u8
    }

    pub fn validate(&self) -> Result<(), KeyError> {
        let k = self.kind;
        let err = |m: String| Err(KeyError(format!("{self}: {m}")));
        if self.operands().len() != k.arity() {
            return err(format!("expects {} operands", k.arity()));
        }
        for (i, l) in self.operands().iter().enumerate() {
            if !k.allowed_locs(i).contains(l) {
                return err(format!("operand {i} cannot be {}", l.name()));
            }
        }
        if k.is_typed() != self.ty.is_some() {
            return err("type presence does not match kind".into());
        }
        if let Some(t) = self.ty {
            let ok = match k {
                NodeKind::Binary(op) | NodeKind::BinaryVarConst(op) => op.accepts(t),
                NodeKind::Compare(op) | NodeKind::IfCmpVarConst(op) => op.accepts(t),
                _ => true,
            };
            if !ok {
                return err(format!("operator not defined on {t}"));
            }
            let lit_ptr = self
                .operands()
                .iter()
                .zip(k.operand_types(self.ty))
                .any(|(l, t)| *l == Loc::Lit && t == ValueType::Ptr);
            if lit_ptr {
                return err("ptr operands cannot be literals".into());
            }
        }
        if matches!(k, NodeKind::Binary(_) | NodeKind::Compare(_)) && self.operands().iter().all(|l| *l == Loc::Lit) {
            return err("both operands literal".into());
        }
        if self.spill && !k.produces_value() {
            return err("spill flag on a node without a result".into());
        }
        let slots = self.pass_through as u32 + self.reg_operands().max(k.produces_value() as u8) as u32;
        if slots > REG_SLOTS as u32 {
            return err(format!("needs {slots} register slots"));
        }
        Ok(())
    }

    /// Canonical encoding: kind, operator, type (0xFF for none), operand
    /// count, each location, pass-through count, spill flag.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(6 + MAX_OPERANDS);
        b.push(self.kind.tag());
        b.push(self.kind.op_tag());
        b.push(ty_tag(self.ty));
        b.push(self.nlocs);
        b.extend(self.operands().iter().map(|l| l.tag()));
        b.push(self.pass_through);
        b.push(self.spill as u8);
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<StencilKey> {
        let (&[kind, op, ty, n], rest) = b.split_first_chunk::<4>()?;
        let n = n as usize;
        if n > MAX_OPERANDS || rest.len() != n + 2 {
            return None;
        }
        let kind = NodeKind::from_tags(kind, op)?;
        let ty = ty_from_tag(ty)?;
        let mut locs = [Loc::Reg; MAX_OPERANDS];
        for i in 0..n {
            locs[i] = Loc::from_tag(rest[i])?;
        }
        let spill = match rest[n + 1] {
            0 => false,
            1 => true,
            _ => return None,
        };
        Some(StencilKey { kind, ty, locs, nlocs: n as u8, pass_through: rest[n], spill })
    }

    /// Symbol under which the stencil function is compiled.
    pub fn symbol(&self) -> String {
        let mut s = String::from("__cp_stencil_");
        for byte in self.to_bytes() {
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_symbol(sym: &str) -> Option<StencilKey> {
        let hex = sym.strip_prefix("__cp_stencil_")?;
        if hex.len() % 2 != 0 {
            return None;
        }
        let bytes: Option<Vec<u8>> =
            (0..hex.len()).step_by(2).map(|i| u8::from_str_radix(hex.get(i..i + 2)?, 16).ok()).collect();
        StencilKey::from_bytes(&bytes?)
    }
}

impl fmt::Display for StencilKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(t) = self.ty {
            write!(f, ":{t}")?;
        }
        f.write_str("(")?;
        for (i, l) in self.operands().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(l.name())?;
        }
        write!(f, ") pt={}", self.pass_through)?;
        if self.spill {
            f.write_str(" spill")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<NodeKind> {
        let mut v = vec![
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
            v.push(NodeKind::Binary(op));
            v.push(NodeKind::BinaryVarConst(op));
        }
        for op in CmpOp::ALL {
            v.push(NodeKind::Compare(op));
            v.push(NodeKind::IfCmpVarConst(op));
        }
        v
    }

    #[test]
    fn kind_names_round_trip() {
        for k in all_kinds() {
            assert_eq!(NodeKind::from_names(k.base_name(), k.op_name()), Some(k));
        }
        assert_eq!(NodeKind::from_names("binary", None), None);
        assert_eq!(NodeKind::from_names("branch", Some("add")), None);
    }

    #[test]
    fn bytes_and_symbols_round_trip() {
        let key = StencilKey::new(NodeKind::Compare(CmpOp::Le), Some(ValueType::I32), &[Loc::Stack, Loc::Lit], 1, true);
        assert_eq!(key.to_bytes(), vec![4, 3, 0, 2, 1, 2, 1, 1]);
        assert_eq!(StencilKey::from_bytes(&key.to_bytes()), Some(key));
        assert_eq!(key.symbol(), "__cp_stencil_0403000201020101");
        assert_eq!(StencilKey::from_symbol(&key.symbol()), Some(key));
        assert_eq!(StencilKey::from_bytes(&[4, 9, 0, 0, 0, 0]), None);
        assert_eq!(StencilKey::from_symbol("__cp_stencil_zz"), None);
    }

    #[test]
    fn validation_rules() {
        let ok = StencilKey::new(NodeKind::Binary(BinOp::Add), Some(ValueType::I64), &[Loc::Reg, Loc::Lit], 0, false);
        assert!(ok.validate().is_ok());
        let both_lit =
            StencilKey::new(NodeKind::Binary(BinOp::Add), Some(ValueType::I64), &[Loc::Lit, Loc::Lit], 0, false);
        assert!(both_lit.validate().is_err());
        let fdiv = StencilKey::new(NodeKind::Binary(BinOp::Div), Some(ValueType::F64), &[Loc::Reg, Loc::Reg], 0, false);
        assert!(fdiv.validate().is_err());
        let spill_store = StencilKey::new(NodeKind::VarStore, Some(ValueType::I32), &[Loc::Reg], 0, true);
        assert!(spill_store.validate().is_err());
        let too_many = StencilKey::new(NodeKind::IndexStore, Some(ValueType::I32), &[Loc::Reg; 3], 3, false);
        assert!(too_many.validate().is_err());
        let lit_base = StencilKey::new(NodeKind::IndexLoad, Some(ValueType::I32), &[Loc::Lit, Loc::Reg], 0, false);
        assert!(lit_base.validate().is_err());
    }
}

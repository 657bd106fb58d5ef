//! Binary stencils: machine code with holes described by patch records, the
//! patch algorithm and the on-disk library.

pub mod key;
pub mod layout;
mod library;
mod patch;
pub mod synthetic;

use std::fmt;

pub use key::{KeyError, Loc, NodeKind, StencilKey, REG_SLOTS};
pub use library::{Arch, LibraryError, MissingVariant, StencilLibrary, FORMAT_VERSION};
pub use patch::{patch_value, HoleValues, PatchError, SlotValues};

/// What a hole refers to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HoleTarget {
    /// Address of continuation `n`.
    Cont(u16),
    /// Runtime value `n` (literal, frame offset, link-time constant).
    Value(u16),
    /// Address of a runtime-support symbol.
    External(String),
}

impl fmt::Display for HoleTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HoleTarget::Cont(n) => write!(f, "cont{n}"),
            HoleTarget::Value(n) => write!(f, "val{n}"),
            HoleTarget::External(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    W32,
    W64,
}

impl Width {
    pub fn bytes(self) -> usize {
        match self {
            Width::W32 => 4,
            Width::W64 => 8,
        }
    }

    pub fn bits(self) -> u8 {
        self.bytes() as u8 * 8
    }
}

/// One hole: `value = addend (+ target) (- (dest + offset))`, stored
/// little-endian at `offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchRecord {
    pub offset: u32,
    pub width: Width,
    pub addend: i64,
    pub subtract_site: bool,
    pub add_target: bool,
    pub target: HoleTarget,
}

impl PatchRecord {
    pub fn end(&self) -> usize {
        self.offset as usize + self.width.bytes()
    }
}

/// Trailing unconditional jump to continuation 0 that may be dropped when
/// that continuation is emitted right after the stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tail {
    pub offset: u32,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stencil {
    pub key: StencilKey,
    pub code: Vec<u8>,
    pub patches: Vec<PatchRecord>,
    pub tail: Option<Tail>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StencilError {
    #[error("{key}: patch at {offset} runs past code length {len}")]
    HoleOutOfCode { key: StencilKey, offset: u32, len: usize },
    #[error("{key}: patches at {a} and {b} overlap")]
    Overlap { key: StencilKey, a: u32, b: u32 },
    #[error("{key}: {detail}")]
    BadTail { key: StencilKey, detail: String },
    #[error("{key}: {detail}")]
    Ordinals { key: StencilKey, detail: String },
}

impl Stencil {
    /// Bytes copied when the tail is (or is not) elided.
    pub fn emitted_len(&self, elide: bool) -> usize {
        match (elide, self.tail) {
            (true, Some(t)) => t.offset as usize,
            _ => self.code.len(),
        }
    }

    /// Checks bounds, overlap, tail shape and that the hole ordinals match
    /// the layout contract for the key.
    pub fn validate(&self) -> Result<(), StencilError> {
        let key = self.key;
        let len = self.code.len();
        let mut sites: Vec<&PatchRecord> = self.patches.iter().collect();
        sites.sort_by_key(|p| p.offset);
        for p in &sites {
            if p.end() > len {
                return Err(StencilError::HoleOutOfCode { key, offset: p.offset, len });
            }
        }
        for w in sites.windows(2) {
            if w[0].end() > w[1].offset as usize {
                return Err(StencilError::Overlap { key, a: w[0].offset, b: w[1].offset });
            }
        }
        if let Some(t) = self.tail {
            let bad = |detail: &str| Err(StencilError::BadTail { key, detail: detail.into() });
            if t.offset as usize + t.len as usize != len {
                return bad("tail does not end at code length");
            }
            let inside: Vec<_> = self.patches.iter().filter(|p| p.offset >= t.offset).collect();
            if inside.len() != 1 || inside[0].target != HoleTarget::Cont(0) {
                return bad("tail must hold exactly one patch, targeting cont0");
            }
        }
        let holes = layout::value_holes(&key);
        let mut seen_vals = vec![false; holes.len()];
        let mut seen_conts = vec![false; key.kind.continuations() as usize];
        for p in &self.patches {
            let ord = |detail: String| Err(StencilError::Ordinals { key, detail });
            match &p.target {
                HoleTarget::Value(n) => match holes.get(*n as usize) {
                    Some(h) if h.width == p.width => seen_vals[*n as usize] = true,
                    Some(h) => return ord(format!("val{n} is {}-bit, layout says {}", p.width.bits(), h.width.bits())),
                    None => return ord(format!("val{n} beyond {} declared holes", holes.len())),
                },
                HoleTarget::Cont(n) => match seen_conts.get_mut(*n as usize) {
                    Some(s) => *s = true,
                    None => return ord(format!("cont{n} beyond {} continuations", key.kind.continuations())),
                },
                HoleTarget::External(_) => {}
            }
        }
        if let Some(n) = seen_vals.iter().position(|s| !s) {
            return Err(StencilError::Ordinals { key, detail: format!("val{n} never referenced") });
        }
        if let Some(n) = seen_conts.iter().position(|s| !s) {
            return Err(StencilError::Ordinals { key, detail: format!("cont{n} never referenced") });
        }
        Ok(())
    }
}

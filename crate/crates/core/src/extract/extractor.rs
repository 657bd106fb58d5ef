//! Turning one compiled stencil function into a [`Stencil`].

use super::image::{ObjectImage, RelocKind};
use crate::stencil::{HoleTarget, PatchRecord, Stencil, StencilError, StencilKey, Tail, Width};

pub const CONT_PREFIX: &str = "__cp_cont_";
pub const VALUE_PREFIX: &str = "__cp_val_";

/// `jmp rel32`, the only instruction treated as an elidable tail.
const JMP_REL32: u8 = 0xe9;
const JMP_REL32_LEN: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("object has no stencil symbol {0}")]
    MissingSymbol(String),
    #[error("{key}: relocation kind {kind:?} at {offset:#x} is not supported")]
    UnknownRelocationKind { key: StencilKey, kind: RelocKind, offset: u64 },
    #[error("{key}: relocation at {offset:#x} extends past the function")]
    HoleOutOfCode { key: StencilKey, offset: u64 },
    #[error("{key}: reference to `{symbol}` defined inside the object")]
    LocalReference { key: StencilKey, symbol: String },
    #[error("{key}: must-elide stencil does not end in a jump to continuation 0")]
    NoTrailingJump { key: StencilKey },
    #[error(transparent)]
    Invalid(#[from] StencilError),
}

/// Decodes a hole symbol; other names are runtime-support symbols.
pub fn hole_target(symbol: &str) -> HoleTarget {
    let ordinal = |rest: &str| rest.parse::<u16>().ok().filter(|_| !rest.starts_with('+'));
    if let Some(n) = symbol.strip_prefix(CONT_PREFIX).and_then(ordinal) {
        HoleTarget::Cont(n)
    } else if let Some(n) = symbol.strip_prefix(VALUE_PREFIX).and_then(ordinal) {
        HoleTarget::Value(n)
    } else {
        HoleTarget::External(symbol.to_string())
    }
}

/// Builds the stencil for `key` from its function in `obj`.
///
/// Each relocation inside the function becomes a patch record with the
/// relocation's addend: absolute kinds add the target, pc-relative kinds add
/// the target and subtract the patch site. The tail is the final `jmp rel32`
/// when its relocation is the last one, targets continuation 0 and ends the
/// function.
pub fn extract(obj: &ObjectImage, key: StencilKey, must_elide: bool) -> Result<Stencil, ExtractError> {
    let name = key.symbol();
    let sym = obj.symbol(&name).ok_or_else(|| ExtractError::MissingSymbol(name.clone()))?;
    let section = sym.section.expect("defined symbol");
    let start = sym.offset;
    let end = start + sym.size;
    let data = &obj.sections[section].data;
    if end as usize > data.len() {
        return Err(ExtractError::HoleOutOfCode { key, offset: end });
    }
    let code = data[start as usize..end as usize].to_vec();

    let mut patches = Vec::new();
    for r in obj.relocations.iter().filter(|r| r.section == section && (start..end).contains(&r.offset)) {
        let (width, subtract_site) = match r.kind {
            RelocKind::Abs32 | RelocKind::Abs32Signed => (Width::W32, false),
            RelocKind::Abs64 => (Width::W64, false),
            RelocKind::PcRel32 => (Width::W32, true),
            RelocKind::Other(_) => {
                return Err(ExtractError::UnknownRelocationKind { key, kind: r.kind, offset: r.offset - start })
            }
        };
        if r.offset + width.bytes() as u64 > end {
            return Err(ExtractError::HoleOutOfCode { key, offset: r.offset - start });
        }
        let target = hole_target(&r.symbol);
        if matches!(target, HoleTarget::External(_)) && r.local_target {
            return Err(ExtractError::LocalReference { key, symbol: r.symbol.clone() });
        }
        patches.push(PatchRecord {
            offset: (r.offset - start) as u32,
            width,
            addend: r.addend,
            subtract_site,
            add_target: true,
            target,
        });
    }
    patches.sort_by_key(|p| p.offset);

    let tail = trailing_jump(&code, &patches);
    if must_elide && tail.is_none() {
        return Err(ExtractError::NoTrailingJump { key });
    }
    let stencil = Stencil { key, code, patches, tail };
    stencil.validate()?;
    Ok(stencil)
}

fn trailing_jump(code: &[u8], patches: &[PatchRecord]) -> Option<Tail> {
    let last = patches.last()?;
    let len = code.len();
    let is_jump = last.target == HoleTarget::Cont(0)
        && last.subtract_site
        && last.width == Width::W32
        && last.end() == len
        && len >= JMP_REL32_LEN as usize
        && code[len - JMP_REL32_LEN as usize] == JMP_REL32;
    is_jump.then(|| Tail { offset: len as u32 - JMP_REL32_LEN, len: JMP_REL32_LEN })
}

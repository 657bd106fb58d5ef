//! Materialization: copy a stencil to its destination and fill its holes.

use std::collections::HashMap;
use std::hash::BuildHasher;

use super::{HoleTarget, PatchRecord, Stencil, Width};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatchError {
    #[error("patch at offset {offset} ({target}) evaluates to {value:#x}, outside signed 32-bit range")]
    PatchOverflow { offset: u32, target: HoleTarget, value: i64 },
    #[error("no value supplied for hole {0}")]
    MissingHoleValue(HoleTarget),
    #[error("tail elision requested but the stencil has no elidable tail")]
    NoTail,
    #[error("output buffer holds {have} bytes, {need} needed")]
    ShortBuffer { need: usize, have: usize },
}

/// Supplies the 64-bit value bound to each hole target.
pub trait HoleValues {
    fn get(&self, target: &HoleTarget) -> Option<u64>;
}

impl<S: BuildHasher> HoleValues for HashMap<HoleTarget, u64, S> {
    fn get(&self, target: &HoleTarget) -> Option<u64> {
        HashMap::get(self, target).copied()
    }
}

/// Dense ordinal-indexed values, the form the code generator produces.
pub struct SlotValues<'a> {
    pub conts: &'a [u64],
    pub values: &'a [u64],
    pub external: &'a dyn Fn(&str) -> Option<u64>,
}

impl HoleValues for SlotValues<'_> {
    fn get(&self, target: &HoleTarget) -> Option<u64> {
        match target {
            HoleTarget::Cont(n) => self.conts.get(*n as usize).copied(),
            HoleTarget::Value(n) => self.values.get(*n as usize).copied(),
            HoleTarget::External(name) => (self.external)(name),
        }
    }
}

/// Evaluates one patch record for a stencil copied to `dest`.
pub fn patch_value(rec: &PatchRecord, dest: u64, target: u64) -> Result<u64, PatchError> {
    let mut v = rec.addend as u64;
    if rec.add_target {
        v = v.wrapping_add(target);
    }
    if rec.subtract_site {
        v = v.wrapping_sub(dest.wrapping_add(rec.offset as u64));
    }
    if rec.width == Width::W32 && i32::try_from(v as i64).is_err() {
        return Err(PatchError::PatchOverflow { offset: rec.offset, target: rec.target.clone(), value: v as i64 });
    }
    Ok(v)
}

impl Stencil {
    /// Copies the stencil into `out` (which will live at address `dest`),
    /// patches every hole and returns the number of bytes written. With
    /// `elide_tail` the trailing jump is dropped along with its patch.
    pub fn materialize_into(
        &self,
        dest: u64,
        holes: &dyn HoleValues,
        elide_tail: bool,
        out: &mut [u8],
    ) -> Result<usize, PatchError> {
        if elide_tail && self.tail.is_none() {
            return Err(PatchError::NoTail);
        }
        let n = self.emitted_len(elide_tail);
        if out.len() < n {
            return Err(PatchError::ShortBuffer { need: n, have: out.len() });
        }
        out[..n].copy_from_slice(&self.code[..n]);
        for rec in &self.patches {
            if rec.end() > n {
                continue;
            }
            let target = holes.get(&rec.target).ok_or_else(|| PatchError::MissingHoleValue(rec.target.clone()))?;
            let v = patch_value(rec, dest, target)?;
            let site = rec.offset as usize;
            match rec.width {
                Width::W32 => out[site..site + 4].copy_from_slice(&(v as u32).to_le_bytes()),
                Width::W64 => out[site..site + 8].copy_from_slice(&v.to_le_bytes()),
            }
        }
        Ok(n)
    }

    pub fn materialize(&self, dest: u64, holes: &dyn HoleValues, elide_tail: bool) -> Result<Vec<u8>, PatchError> {
        let mut out = vec![0; self.code.len()];
        let n = self.materialize_into(dest, holes, elide_tail, &mut out)?;
        out.truncate(n);
        Ok(out)
    }
}

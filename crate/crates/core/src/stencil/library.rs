//! Stencil library: lookup table plus the `CPSL` file format.
//!
//! ```text
//! header   "CPSL" u16 version u16 arch u32 count
//! stencil  u32 key_len key[key_len] u32 code_len code[code_len] u16 npatches
//!          patch* u8 has_tail [u32 tail_offset u32 tail_len]
//! patch    u32 offset u8 width_bits u8 flags i64 addend u8 target_kind payload
//! flags    bit0 subtract-site, bit1 add-target
//! target   0 = cont (u16 ordinal), 1 = value (u16 ordinal),
//!          2 = external (u16 name_len, name bytes)
//! ```
//!
//! All integers are little-endian. Stencils are written in ascending order
//! of their canonical key bytes so equal libraries serialize identically.

use std::path::Path;

use rustc_hash::FxHashMap;

use super::{HoleTarget, PatchRecord, Stencil, StencilKey, Tail, Width};

pub const MAGIC: &[u8; 4] = b"CPSL";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    X86_64,
    Aarch64,
}

impl Arch {
    pub fn tag(self) -> u16 {
        match self {
            Arch::X86_64 => 1,
            Arch::Aarch64 => 2,
        }
    }

    pub fn from_tag(t: u16) -> Option<Arch> {
        match t {
            1 => Some(Arch::X86_64),
            2 => Some(Arch::Aarch64),
            _ => None,
        }
    }

    pub fn host() -> Arch {
        if cfg!(target_arch = "aarch64") {
            Arch::Aarch64
        } else {
            Arch::X86_64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LibraryError {
    #[error("not a stencil library (bad magic)")]
    BadMagic,
    #[error("library format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("library built for architecture tag {found}, host is {expected}")]
    ArchMismatch { found: u16, expected: u16 },
    #[error("library file is truncated")]
    TruncatedFile,
    #[error("malformed library: {0}")]
    Malformed(String),
    #[error("cannot read library: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("stencil library has no variant for {0}")]
pub struct MissingVariant(pub StencilKey);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilLibrary {
    pub arch: Arch,
    map: FxHashMap<StencilKey, Stencil>,
}

impl StencilLibrary {
    pub fn new(arch: Arch) -> StencilLibrary {
        StencilLibrary { arch, map: FxHashMap::default() }
    }

    pub fn insert(&mut self, stencil: Stencil) -> Option<Stencil> {
        self.map.insert(stencil.key, stencil)
    }

    pub fn select(&self, key: &StencilKey) -> Result<&Stencil, MissingVariant> {
        self.map.get(key).ok_or(MissingVariant(*key))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, key: &StencilKey) -> bool {
        self.map.contains_key(key)
    }

    /// Stencils in canonical key order.
    pub fn stencils(&self) -> Vec<&Stencil> {
        let mut v: Vec<&Stencil> = self.map.values().collect();
        v.sort_by_cached_key(|s| s.key.to_bytes());
        v
    }

    pub fn total_code_bytes(&self) -> usize {
        self.map.values().map(|s| s.code.len()).sum()
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.total_code_bytes() * 2);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.arch.tag().to_le_bytes());
        out.extend_from_slice(&(self.map.len() as u32).to_le_bytes());
        for s in self.stencils() {
            let key = s.key.to_bytes();
            out.extend_from_slice(&(key.len() as u32).to_le_bytes());
            out.extend_from_slice(&key);
            out.extend_from_slice(&(s.code.len() as u32).to_le_bytes());
            out.extend_from_slice(&s.code);
            out.extend_from_slice(&(s.patches.len() as u16).to_le_bytes());
            for p in &s.patches {
                out.extend_from_slice(&p.offset.to_le_bytes());
                out.push(p.width.bits());
                out.push(p.subtract_site as u8 | (p.add_target as u8) << 1);
                out.extend_from_slice(&p.addend.to_le_bytes());
                match &p.target {
                    HoleTarget::Cont(n) => {
                        out.push(0);
                        out.extend_from_slice(&n.to_le_bytes());
                    }
                    HoleTarget::Value(n) => {
                        out.push(1);
                        out.extend_from_slice(&n.to_le_bytes());
                    }
                    HoleTarget::External(name) => {
                        out.push(2);
                        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
                        out.extend_from_slice(name.as_bytes());
                    }
                }
            }
            match s.tail {
                Some(t) => {
                    out.push(1);
                    out.extend_from_slice(&t.offset.to_le_bytes());
                    out.extend_from_slice(&t.len.to_le_bytes());
                }
                None => out.push(0),
            }
        }
        out
    }

    /// Parses a library for any architecture.
    pub fn deserialize(bytes: &[u8]) -> Result<StencilLibrary, LibraryError> {
        let mut r = Reader { b: bytes, pos: 0 };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(LibraryError::BadMagic);
        }
        r.pos = 4;
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(LibraryError::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let arch_tag = r.u16()?;
        let arch = Arch::from_tag(arch_tag)
            .ok_or_else(|| LibraryError::Malformed(format!("unknown architecture tag {arch_tag}")))?;
        let count = r.u32()?;
        let mut lib = StencilLibrary::new(arch);
        for _ in 0..count {
            let klen = r.u32()? as usize;
            let kbytes = r.take(klen)?;
            let key = StencilKey::from_bytes(kbytes)
                .ok_or_else(|| LibraryError::Malformed(format!("bad key bytes {kbytes:02x?}")))?;
            let clen = r.u32()? as usize;
            let code = r.take(clen)?.to_vec();
            let npatch = r.u16()?;
            let mut patches = Vec::with_capacity(npatch as usize);
            for _ in 0..npatch {
                let offset = r.u32()?;
                let width = match r.u8()? {
                    32 => Width::W32,
                    64 => Width::W64,
                    w => return Err(LibraryError::Malformed(format!("patch width {w}"))),
                };
                let flags = r.u8()?;
                if flags > 3 {
                    return Err(LibraryError::Malformed(format!("patch flags {flags:#x}")));
                }
                let addend = r.u64()? as i64;
                let target = match r.u8()? {
                    0 => HoleTarget::Cont(r.u16()?),
                    1 => HoleTarget::Value(r.u16()?),
                    2 => {
                        let n = r.u16()? as usize;
                        let name = std::str::from_utf8(r.take(n)?)
                            .map_err(|_| LibraryError::Malformed("external name not UTF-8".into()))?;
                        HoleTarget::External(name.to_string())
                    }
                    k => return Err(LibraryError::Malformed(format!("target kind {k}"))),
                };
                patches.push(PatchRecord {
                    offset,
                    width,
                    addend,
                    subtract_site: flags & 1 != 0,
                    add_target: flags & 2 != 0,
                    target,
                });
            }
            let tail = match r.u8()? {
                0 => None,
                1 => Some(Tail { offset: r.u32()?, len: r.u32()? }),
                f => return Err(LibraryError::Malformed(format!("tail flag {f}"))),
            };
            if lib.insert(Stencil { key, code, patches, tail }).is_some() {
                return Err(LibraryError::Malformed(format!("duplicate key {key}")));
            }
        }
        if r.pos != bytes.len() {
            return Err(LibraryError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(lib)
    }

    /// Parses a library and requires it to target `arch`.
    pub fn deserialize_for(bytes: &[u8], arch: Arch) -> Result<StencilLibrary, LibraryError> {
        let lib = StencilLibrary::deserialize(bytes)?;
        if lib.arch != arch {
            return Err(LibraryError::ArchMismatch { found: lib.arch.tag(), expected: arch.tag() });
        }
        Ok(lib)
    }

    /// Loads a library file built for the host architecture.
    pub fn load(path: &Path) -> Result<StencilLibrary, LibraryError> {
        let bytes = std::fs::read(path).map_err(|e| LibraryError::Io(format!("{}: {e}", path.display())))?;
        StencilLibrary::deserialize_for(&bytes, Arch::host())
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LibraryError> {
        let end = self.pos.checked_add(n).ok_or(LibraryError::TruncatedFile)?;
        let s = self.b.get(self.pos..end).ok_or(LibraryError::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, LibraryError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, LibraryError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, LibraryError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LibraryError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

//! The parts of a relocatable object file the extractor reads.

use object::{Object, ObjectSection, ObjectSymbol, RelocationFlags, RelocationTarget, SectionKind, SymbolKind};

/// Relocation kinds the patch model can express.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelocKind {
    /// 32-bit absolute, zero-extended by the instruction.
    Abs32,
    /// 32-bit absolute, sign-extended by the instruction.
    Abs32Signed,
    Abs64,
    /// 32-bit pc-relative, including PLT-relative branches.
    PcRel32,
    /// Anything else, by raw ELF type.
    Other(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionImage {
    pub name: String,
    pub data: Vec<u8>,
    pub executable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolEntry {
    pub name: String,
    /// Index into [`ObjectImage::sections`]; `None` when undefined.
    pub section: Option<usize>,
    pub offset: u64,
    pub size: u64,
    /// True for section symbols and other non-nameable targets.
    pub anonymous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelocEntry {
    pub section: usize,
    pub offset: u64,
    pub kind: RelocKind,
    pub symbol: String,
    /// Whether the symbol is defined in this object.
    pub local_target: bool,
    pub addend: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectImage {
    pub sections: Vec<SectionImage>,
    pub symbols: Vec<SymbolEntry>,
    pub relocations: Vec<RelocEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot read object file: {0}")]
pub struct ObjectError(pub String);

fn x86_64_kind(r_type: object::elf::RelocationType) -> RelocKind {
    use object::elf;
    match r_type {
        elf::R_X86_64_64 => RelocKind::Abs64,
        elf::R_X86_64_32 => RelocKind::Abs32,
        elf::R_X86_64_32S => RelocKind::Abs32Signed,
        elf::R_X86_64_PC32 | elf::R_X86_64_PLT32 => RelocKind::PcRel32,
        t => RelocKind::Other(t.0),
    }
}

impl ObjectImage {
    pub fn parse(bytes: &[u8]) -> Result<ObjectImage, ObjectError> {
        let err = |e: object::Error| ObjectError(e.to_string());
        let file = object::File::parse(bytes).map_err(err)?;
        if file.architecture() != object::Architecture::X86_64 {
            return Err(ObjectError(format!("unsupported architecture {:?}", file.architecture())));
        }
        let mut img = ObjectImage::default();
        let mut index_of = std::collections::HashMap::new();
        for s in file.sections() {
            index_of.insert(s.index(), img.sections.len());
            img.sections.push(SectionImage {
                name: s.name().unwrap_or("").to_string(),
                data: s.data().map(<[u8]>::to_vec).unwrap_or_default(),
                executable: s.kind() == SectionKind::Text,
            });
        }
        for sym in file.symbols() {
            img.symbols.push(SymbolEntry {
                name: sym.name().unwrap_or("").to_string(),
                section: sym.section_index().and_then(|i| index_of.get(&i).copied()),
                offset: sym.address(),
                size: sym.size(),
                anonymous: matches!(sym.kind(), SymbolKind::Section | SymbolKind::File),
            });
        }
        for s in file.sections() {
            let section = index_of[&s.index()];
            for (offset, r) in s.relocations() {
                let kind = match r.flags() {
                    RelocationFlags::Elf { r_type } => x86_64_kind(r_type),
                    _ => RelocKind::Other(u32::MAX),
                };
                let (symbol, local_target) = match r.target() {
                    RelocationTarget::Symbol(i) => {
                        let sym = file.symbol_by_index(i).map_err(err)?;
                        let anonymous = matches!(sym.kind(), SymbolKind::Section);
                        let name = if anonymous {
                            sym.section_index()
                                .and_then(|i| file.section_by_index(i).ok())
                                .and_then(|s| s.name().ok().map(str::to_string))
                                .unwrap_or_default()
                        } else {
                            sym.name().unwrap_or("").to_string()
                        };
                        (name, !sym.is_undefined())
                    }
                    _ => (String::new(), true),
                };
                img.relocations.push(RelocEntry { section, offset, kind, symbol, local_target, addend: r.addend() });
            }
        }
        Ok(img)
    }

    pub fn symbol(&self, name: &str) -> Option<&SymbolEntry> {
        self.symbols.iter().find(|s| s.name == name && s.section.is_some())
    }
}

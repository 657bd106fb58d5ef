//! Build-time stencil extraction: manifest expansion, compilation of the C
//! stencil sources, object-file parsing and library assembly.
//!
//! Hole convention: a stencil references `__cp_cont_<n>` for continuation
//! `n` and `__cp_val_<n>` for value hole `n`; any other undefined symbol is a
//! runtime-support symbol. The stencil function itself is named by
//! [`StencilKey::symbol`](crate::stencil::StencilKey::symbol).

mod build;
mod extractor;
mod image;
mod manifest;
mod toolchain;

pub use build::{build_library, write_atomic, BuildError, BuildOptions, BuildSummary};
pub use extractor::{extract, hole_target, ExtractError, CONT_PREFIX, VALUE_PREFIX};
pub use image::{ObjectError, ObjectImage, RelocEntry, RelocKind, SectionImage, SymbolEntry};
pub use manifest::{defines, expand, Entry, Exclude, Job, Manifest, ManifestError};
pub use toolchain::{object_name, Toolchain, ToolchainError, STENCIL_FLAGS};

//! Copy-and-patch baseline compiler.
//!
//! Source programs are parsed ([`frontend`]), checked ([`lang`]) and lowered
//! by [`codegen`] into machine code assembled from pre-compiled stencils
//! ([`stencil`]) that [`extract`] pulls out of object files. [`runtime`] owns
//! the executable memory; [`interp`] is the reference tree-walking tier.

pub mod codegen;
pub mod extract;
pub mod frontend;
pub mod fuzz;
pub mod interp;
pub mod lang;
pub mod outcome;
pub mod programs;
pub mod runtime;
pub mod stencil;

//! Building a whole stencil library: expand, compile and extract every job
//! in parallel, then assemble and write the file atomically.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use super::extractor::{extract, ExtractError};
use super::image::{ObjectError, ObjectImage};
use super::manifest::{defines, expand, Job, Manifest, ManifestError};
use super::toolchain::{object_name, Toolchain, ToolchainError};
use crate::stencil::{Arch, Stencil, StencilKey, StencilLibrary};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
    #[error("{key}: {source}")]
    Object { key: StencilKey, source: ObjectError },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BuildError + '_ {
    move |source| BuildError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub source_root: PathBuf,
    pub out: PathBuf,
    pub toolchain: Toolchain,
    pub jobs: usize,
    /// Directory that keeps the intermediate objects; a temporary directory
    /// is used and removed otherwise.
    pub keep_objects: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuildSummary {
    pub stencils: usize,
    pub code_bytes: usize,
    pub library_bytes: usize,
    pub elidable_tails: usize,
    pub out: String,
}

fn build_one(job: &Job, opts: &BuildOptions, objdir: &Path) -> Result<Stencil, BuildError> {
    let source = opts.source_root.join(&job.source);
    let out = objdir.join(object_name(&job.key.symbol()));
    let bytes = opts.toolchain.compile(&source, &opts.source_root, &defines(&job.key), &out)?;
    let img = ObjectImage::parse(&bytes).map_err(|source| BuildError::Object { key: job.key, source })?;
    Ok(extract(&img, job.key, job.must_elide)?)
}

/// Builds every stencil of `manifest` and writes the library. On any error
/// nothing is written; the first failing job in key order is reported.
pub fn build_library(manifest: &Manifest, opts: &BuildOptions) -> Result<BuildSummary, BuildError> {
    let jobs = expand(manifest)?;
    let tmp;
    let objdir = match &opts.keep_objects {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(io_err(d))?;
            d.clone()
        }
        None => {
            tmp = tempfile::tempdir().map_err(io_err(Path::new("<tempdir>")))?;
            tmp.path().to_path_buf()
        }
    };

    let results: Vec<Mutex<Option<Result<Stencil, BuildError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = opts.jobs.clamp(1, jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                *results[i].lock().unwrap() = Some(build_one(job, opts, &objdir));
            });
        }
    });

    let mut lib = StencilLibrary::new(Arch::host());
    for r in results {
        lib.insert(r.into_inner().unwrap().expect("every job ran")?);
    }
    let bytes = lib.serialize();
    write_atomic(&opts.out, &bytes)?;
    Ok(BuildSummary {
        stencils: lib.len(),
        code_bytes: lib.total_code_bytes(),
        library_bytes: bytes.len(),
        elidable_tails: lib.stencils().iter().filter(|s| s.tail.is_some()).count(),
        out: opts.out.display().to_string(),
    })
}

/// Writes through a temporary file in the destination directory and renames
/// it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BuildError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut f = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.persist(path).map_err(|e| BuildError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

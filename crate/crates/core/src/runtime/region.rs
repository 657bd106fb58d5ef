//! W^X code memory: writable while code is emitted, then sealed read+execute.

use std::ptr::NonNull;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegionError {
    #[error("executable region of zero bytes requested")]
    ZeroCapacity,
    #[error("out of memory mapping {0} bytes")]
    OutOfMemory(usize),
    #[error("platform refused executable memory (errno {0})")]
    PlatformDenied(i32),
    #[error("region is sealed; writes are no longer allowed")]
    Sealed,
}

/// A page-aligned anonymous mapping. Never writable and executable at once.
pub struct ExecRegion {
    ptr: NonNull<u8>,
    cap: usize,
    sealed: bool,
}

// SAFETY: the mapping is owned exclusively; after sealing it is immutable.
unsafe impl Send for ExecRegion {}
unsafe impl Sync for ExecRegion {}

fn page_size() -> usize {
    // SAFETY: sysconf has no preconditions.
    let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if p > 0 {
        p as usize
    } else {
        4096
    }
}

fn errno() -> i32 {
    std::io::Error::last_os_error().raw_os_error().unwrap_or(0)
}

impl ExecRegion {
    /// Maps at least `capacity` bytes, rounded up to whole pages.
    pub fn new(capacity: usize) -> Result<ExecRegion, RegionError> {
        if capacity == 0 {
            return Err(RegionError::ZeroCapacity);
        }
        let page = page_size();
        let cap = capacity.checked_next_multiple_of(page).ok_or(RegionError::OutOfMemory(capacity))?;
        // SAFETY: anonymous private mapping with no address hint.
        let p = unsafe {
            libc::mmap(
                std::ptr::null_mut(),
                cap,
                libc::PROT_READ | libc::PROT_WRITE,
                libc::MAP_PRIVATE | libc::MAP_ANONYMOUS,
                -1,
                0,
            )
        };
        if p == libc::MAP_FAILED {
            return Err(match errno() {
                libc::ENOMEM => RegionError::OutOfMemory(cap),
                e => RegionError::PlatformDenied(e),
            });
        }
        Ok(ExecRegion { ptr: NonNull::new(p.cast()).expect("mmap returned null"), cap, sealed: false })
    }

    pub fn base(&self) -> u64 {
        self.ptr.as_ptr() as u64
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn as_mut_slice(&mut self) -> Result<&mut [u8], RegionError> {
        if self.sealed {
            return Err(RegionError::Sealed);
        }
        // SAFETY: the mapping is writable and owned by `self`.
        Ok(unsafe { std::slice::from_raw_parts_mut(self.ptr.as_ptr(), self.cap) })
    }

    pub fn as_slice(&self) -> &[u8] {
        // SAFETY: the mapping is readable in both states.
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr(), self.cap) }
    }

    /// Switches the region to read+execute. Idempotent.
    pub fn seal(&mut self) -> Result<(), RegionError> {
        if self.sealed {
            return Ok(());
        }
        // SAFETY: remaps exactly the pages this region owns.
        let rc = unsafe { libc::mprotect(self.ptr.as_ptr().cast(), self.cap, libc::PROT_READ | libc::PROT_EXEC) };
        if rc != 0 {
            return Err(RegionError::PlatformDenied(errno()));
        }
        self.sealed = true;
        Ok(())
    }
}

impl Drop for ExecRegion {
    fn drop(&mut self) {
        // SAFETY: unmaps the mapping created in `new`.
        unsafe { libc::munmap(self.ptr.as_ptr().cast(), self.cap) };
    }
}

impl std::fmt::Debug for ExecRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExecRegion")
            .field("base", &format_args!("{:#x}", self.base()))
            .field("cap", &self.cap)
            .field("sealed", &self.sealed)
            .finish()
    }
}

//! The result contract shared by both execution tiers.

use std::fmt;

/// Status word returned alongside every value by generated code.
pub mod status {
    pub const OK: u64 = 0;
    pub const EXTERNAL_ERROR: u64 = 1;
    pub const DIV_BY_ZERO: u64 = 2;
    pub const FRAME_OVERFLOW: u64 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trap {
    DivByZero,
    FrameOverflow,
}

/// How an invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Normal return; the value is canonical for the return type and 0 for
    /// void functions.
    Value(u64),
    /// An external call reported failure and execution unwound to the host.
    ExternalError,
    Trap(Trap),
}

impl Outcome {
    /// Decodes a `(value, status)` pair. Unknown status words are treated as
    /// external errors.
    pub fn from_status(value: u64, status: u64) -> Outcome {
        match status {
            status::OK => Outcome::Value(value),
            status::DIV_BY_ZERO => Outcome::Trap(Trap::DivByZero),
            status::FRAME_OVERFLOW => Outcome::Trap(Trap::FrameOverflow),
            _ => Outcome::ExternalError,
        }
    }

    pub fn status(&self) -> u64 {
        match self {
            Outcome::Value(_) => status::OK,
            Outcome::ExternalError => status::EXTERNAL_ERROR,
            Outcome::Trap(Trap::DivByZero) => status::DIV_BY_ZERO,
            Outcome::Trap(Trap::FrameOverflow) => status::FRAME_OVERFLOW,
        }
    }

    pub fn error_flag(&self) -> bool {
        !matches!(self, Outcome::Value(_))
    }

    pub fn value(&self) -> Option<u64> {
        match self {
            Outcome::Value(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "{v}"),
            Outcome::ExternalError => f.write_str("external error"),
            Outcome::Trap(Trap::DivByZero) => f.write_str("trap: division by zero"),
            Outcome::Trap(Trap::FrameOverflow) => f.write_str("trap: frame overflow"),
        }
    }
}

/// Why a host-side invocation could not start.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvokeError {
    #[error("no function named `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` takes {expected} arguments, {got} given")]
    ArityMismatch { name: String, expected: usize, got: usize },
}

/// Bytes of frame pool given to each invocation unless configured otherwise.
/// Generated code recurses on the machine stack as well, so the pool also
/// bounds native stack depth.
pub const DEFAULT_POOL_BYTES: u64 = 64 * 1024;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_round_trip() {
        for o in [
            Outcome::Value(7),
            Outcome::ExternalError,
            Outcome::Trap(Trap::DivByZero),
            Outcome::Trap(Trap::FrameOverflow),
        ] {
            assert_eq!(Outcome::from_status(o.value().unwrap_or(0), o.status()), o);
        }
        assert!(!Outcome::Value(0).error_flag());
        assert!(Outcome::ExternalError.error_flag());
    }
}

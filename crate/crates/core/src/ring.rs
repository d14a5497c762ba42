//! Circular key-space arithmetic.
//!
//! Keys live on a ring of `K = 2^M` points. Every interval test used by the
//! protocol goes through [`KeySpace::in_interval`], which treats an interval
//! whose endpoints coincide as the full circle minus the endpoint.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Error;

/// A point on the identifier ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key(pub u64);

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Clockwise distance between two keys, counted in keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span(pub u64);

/// Which endpoints of a circular interval are included.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bounds {
    /// `(a, b)`
    Open,
    /// `(a, b]`
    OpenClosed,
    /// `[a, b)`
    ClosedOpen,
    /// `[a, b]`
    Closed,
}

/// A key space of size `2^bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeySpace {
    bits: u32,
}

impl KeySpace {
    pub const MAX_BITS: u32 = 62;

    pub fn new(bits: u32) -> Result<Self, Error> {
        if bits == 0 || bits > Self::MAX_BITS {
            return Err(Error::InvalidKeySpace(bits));
        }
        Ok(Self { bits })
    }

    /// Number of fingers, `M = log2 K`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Ring size `K`.
    pub fn size(&self) -> u64 {
        1u64 << self.bits
    }

    fn mask(&self) -> u64 {
        self.size() - 1
    }

    pub fn key(&self, value: u64) -> Result<Key, Error> {
        if value >= self.size() {
            return Err(Error::KeyOutOfRange { value, size: self.size() });
        }
        Ok(Key(value))
    }

    /// Reduces any integer onto the ring.
    pub fn wrap(&self, value: u64) -> Key {
        Key(value & self.mask())
    }

    pub fn add(&self, key: Key, offset: u64) -> Key {
        Key(key.0.wrapping_add(offset) & self.mask())
    }

    /// `(u - v) mod K`.
    pub fn distance(&self, u: Key, v: Key) -> Span {
        Span(u.0.wrapping_sub(v.0) & self.mask())
    }

    /// Whether `x` lies on the clockwise arc from `a` to `b`.
    ///
    /// For `a == b` the open arc is the whole ring minus `a`; closing either
    /// end adds `a` back.
    pub fn in_interval(&self, x: Key, a: Key, b: Key, bounds: Bounds) -> bool {
        let dx = self.distance(x, a).0;
        let db = self.distance(b, a).0;
        let (left, right) = match bounds {
            Bounds::Open => (false, false),
            Bounds::OpenClosed => (false, true),
            Bounds::ClosedOpen => (true, false),
            Bounds::Closed => (true, true),
        };
        if dx == 0 {
            // x sits on `a` (and on `b` too when a == b).
            return left || (db == 0 && right);
        }
        if db == 0 {
            return true;
        }
        dx < db || (dx == db && right)
    }

    /// `fin_i.start = n + 2^(i-1)` for `i` in `1..=M`.
    pub fn finger_start(&self, n: Key, index: usize) -> Result<Key, Error> {
        if index == 0 || index > self.bits as usize {
            return Err(Error::FingerIndex { index, fingers: self.bits as usize });
        }
        Ok(self.add(n, 1u64 << (index - 1)))
    }
}

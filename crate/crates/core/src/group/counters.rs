use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

/// Tallies of the three cost units: random-point scalar multiplications,
/// fixed-base scalar multiplications and hash invocations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct OpCounters {
    pub rp: u64,
    pub fp: u64,
    pub h: u64,
}

impl OpCounters {
    pub const ZERO: OpCounters = OpCounters { rp: 0, fp: 0, h: 0 };

    pub const fn new(rp: u64, fp: u64, h: u64) -> Self {
        OpCounters { rp, fp, h }
    }

    pub fn scalar_mults(&self) -> u64 {
        self.rp + self.fp
    }

    /// Component-wise difference, for deltas between two snapshots of the
    /// same scope. Saturates instead of wrapping.
    pub fn since(&self, earlier: &OpCounters) -> OpCounters {
        OpCounters {
            rp: self.rp.saturating_sub(earlier.rp),
            fp: self.fp.saturating_sub(earlier.fp),
            h: self.h.saturating_sub(earlier.h),
        }
    }
}

impl Add for OpCounters {
    type Output = OpCounters;

    fn add(self, rhs: OpCounters) -> OpCounters {
        OpCounters {
            rp: self.rp + rhs.rp,
            fp: self.fp + rhs.fp,
            h: self.h + rhs.h,
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: OpCounters) {
        *self = *self + rhs;
    }
}

impl Sub for OpCounters {
    type Output = OpCounters;

    fn sub(self, rhs: OpCounters) -> OpCounters {
        self.since(&rhs)
    }
}

impl Mul<u64> for OpCounters {
    type Output = OpCounters;

    fn mul(self, k: u64) -> OpCounters {
        OpCounters {
            rp: self.rp * k,
            fp: self.fp * k,
            h: self.h * k,
        }
    }
}

impl fmt::Display for OpCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{rp:{}, fp:{}, h:{}}}", self.rp, self.fp, self.h)
    }
}

/// Live counters owned by one counting scope.
#[derive(Debug, Default)]
pub(crate) struct AtomicCounters {
    rp: AtomicU64,
    fp: AtomicU64,
    h: AtomicU64,
}

impl AtomicCounters {
    pub(crate) fn bump_rp(&self) {
        self.rp.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn bump_fp(&self) {
        self.fp.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn bump_h(&self) {
        self.h.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn snapshot(&self) -> OpCounters {
        OpCounters {
            rp: self.rp.load(Ordering::Relaxed),
            fp: self.fp.load(Ordering::Relaxed),
            h: self.h.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn take(&self) -> OpCounters {
        OpCounters {
            rp: self.rp.swap(0, Ordering::Relaxed),
            fp: self.fp.swap(0, Ordering::Relaxed),
            h: self.h.swap(0, Ordering::Relaxed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = OpCounters::new(1, 2, 3);
        let b = OpCounters::new(4, 5, 6);
        assert_eq!(a + b, OpCounters::new(5, 7, 9));
        assert_eq!(b - a, OpCounters::new(3, 3, 3));
        assert_eq!(a - b, OpCounters::ZERO);
        assert_eq!(a * 3, OpCounters::new(3, 6, 9));
        assert_eq!(b.scalar_mults(), 9);
        assert_eq!(a.to_string(), "{rp:1, fp:2, h:3}");
    }

    #[test]
    fn take_resets() {
        let c = AtomicCounters::default();
        c.bump_rp();
        c.bump_fp();
        c.bump_fp();
        c.bump_h();
        assert_eq!(c.take(), OpCounters::new(1, 2, 1));
        assert_eq!(c.snapshot(), OpCounters::ZERO);
    }
}

//! Thread-local operation counters.
//!
//! Every dense `n x n` product, LU-backed solve and trace-of-product
//! evaluation bumps a per-thread tally. Callers wrap a region in
//! [`count_ops`] to read off what that region spent; nested regions are
//! fine since the tally is only ever snapshotted, never reset.

use std::cell::Cell;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Operation tallies for one measured region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCounter {
    pub matmuls: u64,
    pub solves: u64,
    /// Trace-of-product evaluations and the scalar-weighted accumulations of
    /// the Newton-Schulz pre/post gradient; each is charged as one
    /// multiplication.
    pub trace_products: u64,
}

impl OpCounter {
    /// Matrix multiplications plus trace-of-product evaluations, the unit the
    /// complexity tables are expressed in.
    pub fn matmul_equivalents(&self) -> u64 {
        self.matmuls + self.trace_products
    }
}

impl Add for OpCounter {
    type Output = OpCounter;

    fn add(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            matmuls: self.matmuls + rhs.matmuls,
            solves: self.solves + rhs.solves,
            trace_products: self.trace_products + rhs.trace_products,
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        *self = *self + rhs;
    }
}

impl Sub for OpCounter {
    type Output = OpCounter;

    fn sub(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            matmuls: self.matmuls - rhs.matmuls,
            solves: self.solves - rhs.solves,
            trace_products: self.trace_products - rhs.trace_products,
        }
    }
}

impl std::iter::Sum for OpCounter {
    fn sum<I: Iterator<Item = OpCounter>>(iter: I) -> OpCounter {
        iter.fold(OpCounter::default(), Add::add)
    }
}

thread_local! {
    static TALLY: Cell<OpCounter> = const { Cell::new(OpCounter { matmuls: 0, solves: 0, trace_products: 0 }) };
}

fn bump(f: impl FnOnce(&mut OpCounter)) {
    TALLY.with(|t| {
        let mut c = t.get();
        f(&mut c);
        t.set(c);
    });
}

pub(crate) fn record_matmul() {
    bump(|c| c.matmuls += 1);
}

pub(crate) fn record_solve() {
    bump(|c| c.solves += 1);
}

pub(crate) fn record_trace_products(count: u64) {
    bump(|c| c.trace_products += count);
}

/// Current cumulative tally of this thread.
pub fn snapshot() -> OpCounter {
    TALLY.with(Cell::get)
}

/// Runs `f` and returns its result with the operations it performed on the
/// calling thread.
pub fn count_ops<T>(f: impl FnOnce() -> T) -> (T, OpCounter) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_regions_compose() {
        let ((_, inner), outer) = count_ops(|| {
            record_matmul();
            count_ops(|| {
                record_matmul();
                record_solve();
            })
        });
        assert_eq!(inner, OpCounter { matmuls: 1, solves: 1, trace_products: 0 });
        assert_eq!(outer.matmuls, 2);
        assert_eq!(outer.solves, 1);
    }

    #[test]
    fn equivalents_include_traces() {
        let c = OpCounter { matmuls: 50, solves: 0, trace_products: 4 };
        assert_eq!(c.matmul_equivalents(), 54);
    }
}

/// Runs `f` without charging its operations to the calling thread's tally.
pub fn uncounted<T>(f: impl FnOnce() -> T) -> T {
    let before = snapshot();
    let out = f();
    TALLY.with(|t| t.set(before));
    out
}

//! Thread-local multiply-accumulate counter.
//!
//! Forward kernels that perform multiply-accumulates report them here. The
//! profiler's closed-form counts are checked against this tally.

use std::cell::Cell;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn record(n: u64) {
    MACS.with(|c| c.set(c.get() + n));
}

/// Current tally on this thread.
pub fn current() -> u64 {
    MACS.with(Cell::get)
}

pub fn reset() {
    MACS.with(|c| c.set(0));
}

/// Runs `f` and returns its result together with the MACs it performed.
pub fn count_macs<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = current();
    let out = f();
    (out, current() - before)
}

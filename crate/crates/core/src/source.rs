//! Sequential frame suppliers used by the estimators.

use crate::error::Result;
use crate::synth::{RecordSet, RevolutionFrame};

/// Supplies rotation-synchronized revolutions one at a time.
pub trait FrameSource {
    fn points_per_rev(&self) -> usize;

    /// Next revolution, or `None` once the source is exhausted.
    fn next_frame(&mut self) -> Result<Option<RevolutionFrame>>;
}

/// Walks the frames of an in-memory record set.
pub struct RecordSetSource<'a> {
    rs: &'a RecordSet,
    next: usize,
}

impl<'a> RecordSetSource<'a> {
    pub fn new(rs: &'a RecordSet) -> Self {
        Self { rs, next: 0 }
    }
}

impl FrameSource for RecordSetSource<'_> {
    fn points_per_rev(&self) -> usize {
        self.rs.points_per_rev()
    }

    fn next_frame(&mut self) -> Result<Option<RevolutionFrame>> {
        let f = self.rs.frames().get(self.next).cloned();
        if f.is_some() {
            self.next += 1;
        }
        Ok(f)
    }
}

/// Wraps a source and counts how many frames were pulled from it.
pub struct CountingSource<S> {
    inner: S,
    consumed: usize,
}

impl<S: FrameSource> CountingSource<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, consumed: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: FrameSource> FrameSource for CountingSource<S> {
    fn points_per_rev(&self) -> usize {
        self.inner.points_per_rev()
    }

    fn next_frame(&mut self) -> Result<Option<RevolutionFrame>> {
        let f = self.inner.next_frame()?;
        if f.is_some() {
            self.consumed += 1;
        }
        Ok(f)
    }
}

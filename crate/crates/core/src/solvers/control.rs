//! Quasi-cyclic control sequences `n ↦ i(n)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An index map over a finite operator family `{0, …, m−1}`.
///
/// Index `j` must reappear in every window of `M_j` consecutive steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSequence {
    /// `i(n) = n mod m`, so every `M_j = m`.
    Periodic { m: usize },
    /// `i(n) = pattern[n mod len]` with declared windows `M_j`.
    Explicit { pattern: Vec<usize>, windows: Vec<usize> },
}

impl ControlSequence {
    pub fn periodic(m: usize) -> Self {
        ControlSequence::Periodic { m }
    }

    pub fn count(&self) -> usize {
        match self {
            ControlSequence::Periodic { m } => *m,
            ControlSequence::Explicit { windows, .. } => windows.len(),
        }
    }

    pub fn index(&self, n: usize) -> usize {
        match self {
            ControlSequence::Periodic { m } => n % m,
            ControlSequence::Explicit { pattern, .. } => pattern[n % pattern.len()],
        }
    }

    pub fn window(&self, j: usize) -> usize {
        match self {
            ControlSequence::Periodic { m } => *m,
            ControlSequence::Explicit { windows, .. } => windows[j],
        }
    }

    pub fn max_window(&self) -> usize {
        (0..self.count()).map(|j| self.window(j)).max().unwrap_or(1)
    }

    /// Length of one full period of the index map.
    pub fn period(&self) -> usize {
        match self {
            ControlSequence::Periodic { m } => *m,
            ControlSequence::Explicit { pattern, .. } => pattern.len(),
        }
    }

    /// Structural checks; window coverage is left to [`control_validate`].
    pub fn check_shape(&self) -> Result<()> {
        match self {
            ControlSequence::Periodic { m } => {
                if *m == 0 {
                    return Err(Error::invalid("periodic control needs m >= 1"));
                }
            }
            ControlSequence::Explicit { pattern, windows } => {
                if pattern.is_empty() || windows.is_empty() {
                    return Err(Error::invalid("explicit control needs a pattern and windows"));
                }
                if let Some(j) = pattern.iter().find(|j| **j >= windows.len()) {
                    return Err(Error::invalid(format!("control pattern uses index {j} without a declared window")));
                }
                if windows.contains(&0) {
                    return Err(Error::invalid("control windows must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of [`control_validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlReport {
    pub checked: usize,
    /// `(j, n)` pairs where `j ∉ {i(n), …, i(n + M_j − 1)}`.
    pub failures: Vec<(usize, usize)>,
    pub valid: bool,
}

/// Checks every window condition for `n ≤ N − max_j M_j`.
pub fn control_validate(c: &ControlSequence, n_checked: usize) -> Result<ControlReport> {
    c.check_shape()?;
    let max_w = c.max_window();
    if n_checked < max_w {
        return Err(Error::precondition(format!("control validation needs N >= {max_w}, got {n_checked}")));
    }
    let mut failures = Vec::new();
    for j in 0..c.count() {
        let mj = c.window(j);
        for n in 0..=(n_checked - max_w) {
            if !(n..n + mj).any(|k| c.index(k) == j) {
                failures.push((j, n));
            }
        }
    }
    Ok(ControlReport { checked: n_checked, valid: failures.is_empty(), failures })
}

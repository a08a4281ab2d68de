use std::ops::Range;

/// Contiguous block of interior nodes whose values lie strictly inside
/// `(0, 1)`. Nodes left of it sit at 0, nodes right of it at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveWindow {
    pub start: usize,
    pub end: usize,
}

impl ActiveWindow {
    /// Window of a monotone map with `values[0] = 0`, `values[N] = 1`.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() - 1;
        let start = (1..n).find(|&i| values[i] > 0.0).unwrap_or(n);
        let end = (start..n).rev().find(|&i| values[i] < 1.0).map_or(start, |i| i + 1);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.range().contains(&i)
    }

    /// Number of interior nodes clamped at 0 and at 1 for a grid with `n` intervals.
    pub fn clamped_counts(&self, n: usize) -> (usize, usize) {
        if self.is_empty() {
            // all interior nodes are clamped; `start` separates the two groups
            return (self.start - 1, n - self.start);
        }
        (self.start - 1, n - self.end)
    }
}

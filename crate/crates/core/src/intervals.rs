//! Geometric covering intervals over the horizon `[1, T]`.
//!
//! Level `i` partitions the horizon into consecutive blocks of length `2^i`
//! (`[1, 2^i], [2^i + 1, 2^{i+1}], ...`), the last block truncated at `T` when
//! `T` is not a multiple of `2^i`. Levels run over every `i` with `2^i <= T`.
//!
//! Truncation can make a block at level `i` identical to a block at a lower
//! level (for `T = 6`, `[5, 6]` appears at levels 1 and 2). The member set
//! keeps one copy, keyed by the lowest level it occurs at.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverError {
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("time {tau} outside [1, {horizon}]")]
    BadTime { tau: usize, horizon: usize },
    #[error("interval [{start}, {end}] is not a sub-interval of [1, {horizon}]")]
    BadInterval {
        start: usize,
        end: usize,
        horizon: usize,
    },
}

/// Closed integer interval `[start, end]` of rounds, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(1 <= start && start <= end, "bad interval [{start}, {end}]");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, tau: usize) -> bool {
        self.start <= tau && tau <= self.end
    }

    pub fn covers(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn rounds(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

/// Stable key of a cover member: the level it first occurs at and its
/// position within that level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IntervalId {
    pub level: usize,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct GeometricCover {
    horizon: usize,
    levels: Vec<Vec<Interval>>,
    /// `canonical[i][j]` is true when `levels[i][j]` does not repeat a block of
    /// a lower level.
    canonical: Vec<Vec<bool>>,
    /// Members starting at each round, shortest first. Index 0 unused.
    by_start: Vec<Vec<IntervalId>>,
}

impl GeometricCover {
    pub fn build(horizon: usize) -> Result<Self, CoverError> {
        if horizon == 0 {
            return Err(CoverError::BadHorizon);
        }
        let mut levels = Vec::new();
        let mut canonical = Vec::new();
        let mut by_start: Vec<Vec<IntervalId>> = vec![Vec::new(); horizon + 1];
        let mut level = 0;
        while (1usize << level) <= horizon {
            let len = 1usize << level;
            let count = horizon.div_ceil(len);
            let mut blocks = Vec::with_capacity(count);
            let mut fresh = Vec::with_capacity(count);
            for index in 0..count {
                let start = index * len + 1;
                let end = ((index + 1) * len).min(horizon);
                let block = Interval::new(start, end);
                // A truncated block repeats a lower-level block exactly when
                // the lower level has a block with the same start and end.
                let repeat = by_start[start].iter().any(|id: &IntervalId| {
                    let other: Interval = levels_get(&levels, *id);
                    other == block
                });
                if !repeat {
                    by_start[start].push(IntervalId { level, index });
                }
                blocks.push(block);
                fresh.push(!repeat);
            }
            levels.push(blocks);
            canonical.push(fresh);
            level += 1;
        }
        Ok(Self {
            horizon,
            levels,
            canonical,
            by_start,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// All blocks of level `i`, including repeats of lower levels.
    pub fn level(&self, i: usize) -> &[Interval] {
        &self.levels[i]
    }

    pub fn interval(&self, id: IntervalId) -> Interval {
        levels_get(&self.levels, id)
    }

    /// Distinct members, ordered by id.
    pub fn members(&self) -> Vec<(IntervalId, Interval)> {
        let mut out = Vec::new();
        for (level, blocks) in self.levels.iter().enumerate() {
            for (index, &block) in blocks.iter().enumerate() {
                if self.canonical[level][index] {
                    out.push((IntervalId { level, index }, block));
                }
            }
        }
        out
    }

    pub fn member_count(&self) -> usize {
        self.canonical.iter().flatten().filter(|&&c| c).count()
    }

    /// Members containing `tau`, at most one per level, ordered by level.
    pub fn active(&self, tau: usize) -> Result<Vec<(IntervalId, Interval)>, CoverError> {
        if tau < 1 || tau > self.horizon {
            return Err(CoverError::BadTime {
                tau,
                horizon: self.horizon,
            });
        }
        let mut out = Vec::with_capacity(self.levels.len());
        for level in 0..self.levels.len() {
            let index = (tau - 1) >> level;
            if self.canonical[level][index] {
                out.push((IntervalId { level, index }, self.levels[level][index]));
            }
        }
        Ok(out)
    }

    /// Members whose start is `tau`, shortest first; empty outside `[1, T]`.
    pub fn starting_at(&self, tau: usize) -> Vec<(IntervalId, Interval)> {
        if tau < 1 || tau > self.horizon {
            return Vec::new();
        }
        self.by_start[tau]
            .iter()
            .map(|&id| (id, self.interval(id)))
            .collect()
    }

    /// Splits `j` into disjoint members whose union is exactly `j`, taking at
    /// each step the longest member that starts at the current left end and
    /// stays inside `j`.
    pub fn decompose(&self, j: Interval) -> Result<Vec<(IntervalId, Interval)>, CoverError> {
        if j.start < 1 || j.end > self.horizon || j.start > j.end {
            return Err(CoverError::BadInterval {
                start: j.start,
                end: j.end,
                horizon: self.horizon,
            });
        }
        let mut out = Vec::new();
        let mut cursor = j.start;
        while cursor <= j.end {
            let pick = self.by_start[cursor]
                .iter()
                .rev()
                .map(|&id| (id, self.interval(id)))
                .find(|(_, iv)| iv.end <= j.end)
                .expect("level-0 block always fits");
            cursor = pick.1.end + 1;
            out.push(pick);
        }
        Ok(out)
    }

    /// `floor(log2 T) + 1`
    pub fn max_active(&self) -> usize {
        self.levels.len()
    }
}

fn levels_get(levels: &[Vec<Interval>], id: IntervalId) -> Interval {
    levels[id.level][id.index]
}

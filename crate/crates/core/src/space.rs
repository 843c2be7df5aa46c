//! Finite filtered probability spaces.
//!
//! Outcomes are indexed `0..n`, grid times are indexed `0..=K` and the last
//! index `K` plays the role of `+inf`. The filtration at each grid time is a
//! partition of the outcomes into blocks; blocks refine as time increases and
//! the terminal partition separates every outcome.

use std::fmt;
use std::ops::Index;

use num::{BigInt, BigRational, One, Signed, Zero};

use crate::error::{Result, StopGameError};

/// Exact scalar used everywhere in the solver.
pub type Real = BigRational;

pub fn rat(numer: i64, denom: i64) -> Real {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Real {
    BigRational::from_integer(BigInt::from(value))
}

/// Strictly increasing, non-negative time points; the last one stands for infinity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeGrid {
    points: Vec<Real>,
}

impl TimeGrid {
    pub fn new(points: Vec<Real>) -> Result<Self> {
        if points.len() < 2 {
            return Err(StopGameError::InvalidSpace(vec![SpaceViolation::GridTooShort]));
        }
        if points[0].is_negative() {
            return Err(StopGameError::InvalidSpace(vec![SpaceViolation::NegativeTime]));
        }
        if let Some(k) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(StopGameError::InvalidSpace(vec![SpaceViolation::GridNotIncreasing {
                index: k + 1,
            }]));
        }
        Ok(TimeGrid { points })
    }

    /// Evenly spaced grid `0, step, 2 step, ...` with `len` points.
    pub fn uniform(len: usize, step: Real) -> Result<Self> {
        Self::new((0..len).map(|k| step.clone() * int(k as i64)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn terminal(&self) -> usize {
        self.points.len() - 1
    }

    pub fn value(&self, k: usize) -> &Real {
        &self.points[k]
    }

    pub fn points(&self) -> &[Real] {
        &self.points
    }

    pub fn index_of(&self, t: &Real) -> Option<usize> {
        self.points.binary_search(t).ok()
    }

    pub fn min_step(&self) -> Real {
        self.steps().min().expect("grid has at least two points")
    }

    pub fn max_step(&self) -> Real {
        self.steps().max().expect("grid has at least two points")
    }

    /// Distance between the first point and the terminal point.
    pub fn span(&self) -> Real {
        &self.points[self.terminal()] - &self.points[0]
    }

    pub fn is_uniform(&self) -> bool {
        self.min_step() == self.max_step()
    }

    fn steps(&self) -> impl Iterator<Item = Real> + '_ {
        self.points.windows(2).map(|w| &w[1] - &w[0])
    }
}

/// One violated invariant of a [`FilteredSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpaceViolation {
    GridTooShort,
    NegativeTime,
    GridNotIncreasing { index: usize },
    NoOutcomes,
    PartitionCount { expected: usize, found: usize },
    NonPositiveWeight { outcome: usize },
    Normalization { sum: Real },
    NotAPartition { time: usize },
    Refinement { time: usize },
    TerminalNotDiscrete,
}

impl fmt::Display for SpaceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceViolation::GridTooShort => write!(f, "grid needs at least two points"),
            SpaceViolation::NegativeTime => write!(f, "grid times must be non-negative"),
            SpaceViolation::GridNotIncreasing { index } => {
                write!(f, "grid not strictly increasing at index {index}")
            }
            SpaceViolation::NoOutcomes => write!(f, "no outcomes"),
            SpaceViolation::PartitionCount { expected, found } => {
                write!(f, "expected {expected} partitions, found {found}")
            }
            SpaceViolation::NonPositiveWeight { outcome } => {
                write!(f, "normalization: weight of outcome {outcome} is not positive")
            }
            SpaceViolation::Normalization { sum } => {
                write!(f, "normalization: weights sum to {sum}, not 1")
            }
            SpaceViolation::NotAPartition { time } => {
                write!(f, "blocks at time index {time} do not partition the outcomes")
            }
            SpaceViolation::Refinement { time } => {
                write!(f, "refinement: partition at time index {time} is not finer than its predecessor")
            }
            SpaceViolation::TerminalNotDiscrete => {
                write!(f, "terminal partition does not separate all outcomes")
            }
        }
    }
}

/// Finite outcome set with weights and a refining sequence of partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredSpace {
    grid: TimeGrid,
    weights: Vec<Real>,
    partitions: Vec<Vec<Vec<usize>>>,
    block_of: Vec<Vec<usize>>,
}

impl FilteredSpace {
    /// Builds and validates a space.
    pub fn new(grid: TimeGrid, weights: Vec<Real>, partitions: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let space = Self::from_parts(grid, weights, partitions);
        let diagnostics = space.validate();
        if diagnostics.is_empty() {
            Ok(space)
        } else {
            Err(StopGameError::InvalidSpace(diagnostics))
        }
    }

    /// Builds a space without checking invariants; call [`FilteredSpace::validate`].
    pub fn from_parts(grid: TimeGrid, weights: Vec<Real>, partitions: Vec<Vec<Vec<usize>>>) -> Self {
        let n = weights.len();
        let partitions: Vec<Vec<Vec<usize>>> = partitions
            .into_iter()
            .map(|blocks| {
                let mut blocks: Vec<Vec<usize>> = blocks
                    .into_iter()
                    .filter(|b| !b.is_empty())
                    .map(|mut b| {
                        b.sort_unstable();
                        b
                    })
                    .collect();
                blocks.sort();
                blocks
            })
            .collect();
        let block_of = partitions
            .iter()
            .map(|blocks| {
                let mut owner = vec![usize::MAX; n];
                for (b, block) in blocks.iter().enumerate() {
                    for &w in block {
                        if w < n {
                            owner[w] = b;
                        }
                    }
                }
                owner
            })
            .collect();
        FilteredSpace { grid, weights, partitions, block_of }
    }

    /// Lists every violated invariant; empty iff the space is valid.
    pub fn validate(&self) -> Vec<SpaceViolation> {
        let mut out = Vec::new();
        let n = self.weights.len();
        if n == 0 {
            out.push(SpaceViolation::NoOutcomes);
        }
        for (w, p) in self.weights.iter().enumerate() {
            if !p.is_positive() {
                out.push(SpaceViolation::NonPositiveWeight { outcome: w });
            }
        }
        let sum: Real = self.weights.iter().sum();
        if !sum.is_one() {
            out.push(SpaceViolation::Normalization { sum });
        }
        if self.partitions.len() != self.grid.len() {
            out.push(SpaceViolation::PartitionCount {
                expected: self.grid.len(),
                found: self.partitions.len(),
            });
            return out;
        }
        let mut partition_ok = vec![true; self.grid.len()];
        for (k, blocks) in self.partitions.iter().enumerate() {
            let mut seen = vec![0usize; n];
            let mut stray = false;
            for &w in blocks.iter().flatten() {
                if w < n {
                    seen[w] += 1;
                } else {
                    stray = true;
                }
            }
            if stray || seen.iter().any(|&c| c != 1) {
                partition_ok[k] = false;
                out.push(SpaceViolation::NotAPartition { time: k });
            }
        }
        for k in 1..self.grid.len() {
            if !(partition_ok[k] && partition_ok[k - 1]) {
                continue;
            }
            let refines = self.partitions[k].iter().all(|block| {
                let parent = self.block_of[k - 1][block[0]];
                block.iter().all(|&w| self.block_of[k - 1][w] == parent)
            });
            if !refines {
                out.push(SpaceViolation::Refinement { time: k });
            }
        }
        let last = self.grid.terminal();
        if partition_ok[last] && self.partitions[last].iter().any(|b| b.len() != 1) {
            out.push(SpaceViolation::TerminalNotDiscrete);
        }
        out
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn terminal(&self) -> usize {
        self.grid.terminal()
    }

    pub fn num_times(&self) -> usize {
        self.grid.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Real] {
        &self.weights
    }

    pub fn weight(&self, w: usize) -> &Real {
        &self.weights[w]
    }

    pub fn blocks(&self, k: usize) -> &[Vec<usize>] {
        &self.partitions[k]
    }

    pub fn partitions(&self) -> &[Vec<Vec<usize>>] {
        &self.partitions
    }

    pub fn block_of(&self, k: usize, w: usize) -> usize {
        self.block_of[k][w]
    }

    pub fn block_weight(&self, k: usize, b: usize) -> Real {
        self.partitions[k][b].iter().map(|&w| self.weights[w].clone()).sum()
    }

    /// Blocks at `k + 1` contained in block `b` at `k`.
    pub fn children(&self, k: usize, b: usize) -> Vec<usize> {
        let mut kids: Vec<usize> = self.partitions[k][b].iter().map(|&w| self.block_of[k + 1][w]).collect();
        kids.sort_unstable();
        kids.dedup();
        kids
    }

    /// Weighted average of `x` over a set of outcomes.
    pub fn average_over(&self, outcomes: &[usize], x: impl Fn(usize) -> Real) -> Real {
        let mut mass = Real::zero();
        let mut acc = Real::zero();
        for &w in outcomes {
            acc += &self.weights[w] * x(w);
            mass += &self.weights[w];
        }
        acc / mass
    }

    /// `E[x | F_k]`.
    pub fn cond_exp(&self, x: &RandomVariable, k: usize) -> RandomVariable {
        let mut out = vec![Real::zero(); self.num_outcomes()];
        for block in &self.partitions[k] {
            let avg = self.average_over(block, |w| x[w].clone());
            for &w in block {
                out[w] = avg.clone();
            }
        }
        RandomVariable(out)
    }

    /// Atoms of the stopped sigma-algebra `F_theta`.
    pub fn stopped_atoms(&self, theta: &StoppingTime) -> Vec<Vec<usize>> {
        let mut atoms = Vec::new();
        for k in 0..self.num_times() {
            for block in &self.partitions[k] {
                let atom: Vec<usize> = block.iter().copied().filter(|&w| theta.get(w) == k).collect();
                if !atom.is_empty() {
                    atoms.push(atom);
                }
            }
        }
        atoms
    }

    /// `E[x | F_theta]` for a stopping time `theta`.
    pub fn cond_exp_at(&self, x: &RandomVariable, theta: &StoppingTime) -> Result<RandomVariable> {
        theta.validate(self)?;
        let mut out = vec![Real::zero(); self.num_outcomes()];
        for atom in self.stopped_atoms(theta) {
            let avg = self.average_over(&atom, |w| x[w].clone());
            for w in atom {
                out[w] = avg.clone();
            }
        }
        Ok(RandomVariable(out))
    }

    /// True iff `{w : map(w) <= t}` is a union of time-`t` blocks for every grid time.
    pub fn is_stopping_time(&self, map: &[usize]) -> bool {
        map.len() == self.num_outcomes()
            && map.iter().all(|&k| k < self.num_times())
            && (0..self.num_times()).all(|k| {
                self.partitions[k].iter().all(|block| {
                    let first = map[block[0]] <= k;
                    block.iter().all(|&w| (map[w] <= k) == first)
                })
            })
    }

    /// True iff `values` is constant on every block at time `k`.
    pub fn is_measurable_at(&self, k: usize, values: &[Real]) -> bool {
        self.partitions[k]
            .iter()
            .all(|block| block.iter().all(|&w| values[w] == values[block[0]]))
    }

    /// First grid time at or after `from` where `hit(k, w)` holds; terminal when never.
    pub fn first_hit(&self, from: &StoppingTime, hit: impl Fn(usize, usize) -> bool) -> StoppingTime {
        let last = self.terminal();
        StoppingTime(
            (0..self.num_outcomes())
                .map(|w| (from.get(w)..=last).find(|&k| hit(k, w)).unwrap_or(last))
                .collect(),
        )
    }
}

/// A real-valued function of the outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomVariable(pub Vec<Real>);

impl RandomVariable {
    pub fn constant(value: Real, n: usize) -> Self {
        RandomVariable(vec![value; n])
    }

    pub fn values(&self) -> &[Real] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Real {
        self.0.iter().max().cloned().unwrap_or_else(Real::zero)
    }

    pub fn min(&self) -> Real {
        self.0.iter().min().cloned().unwrap_or_else(Real::zero)
    }

    pub fn zip_with(&self, other: &RandomVariable, f: impl Fn(&Real, &Real) -> Real) -> RandomVariable {
        RandomVariable(self.0.iter().zip(&other.0).map(|(a, b)| f(a, b)).collect())
    }

    /// Expectation under the space's weights.
    pub fn expectation(&self, space: &FilteredSpace) -> Real {
        self.0.iter().zip(space.weights()).map(|(x, p)| x * p).sum()
    }
}

impl Index<usize> for RandomVariable {
    type Output = Real;

    fn index(&self, w: usize) -> &Real {
        &self.0[w]
    }
}

/// Values indexed by `(grid time, outcome)`, constant on the blocks of each time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptedProcess {
    values: Vec<Vec<Real>>,
}

impl AdaptedProcess {
    pub fn from_fn(space: &FilteredSpace, f: impl Fn(usize, usize) -> Real) -> Self {
        AdaptedProcess {
            values: (0..space.num_times())
                .map(|k| (0..space.num_outcomes()).map(|w| f(k, w)).collect())
                .collect(),
        }
    }

    pub fn from_rows(values: Vec<Vec<Real>>) -> Self {
        AdaptedProcess { values }
    }

    pub fn get(&self, k: usize, w: usize) -> &Real {
        &self.values[k][w]
    }

    pub fn row(&self, k: usize) -> &[Real] {
        &self.values[k]
    }

    pub fn slice(&self, k: usize) -> RandomVariable {
        RandomVariable(self.values[k].clone())
    }

    pub fn rows(&self) -> &[Vec<Real>] {
        &self.values
    }

    /// Value at a stopping time, outcome by outcome.
    pub fn stopped(&self, theta: &StoppingTime) -> RandomVariable {
        RandomVariable(theta.0.iter().enumerate().map(|(w, &k)| self.values[k][w].clone()).collect())
    }

    /// Time indices whose slice is not block-constant.
    pub fn adaptedness_violations(&self, space: &FilteredSpace) -> Vec<usize> {
        (0..self.values.len()).filter(|&k| !space.is_measurable_at(k, &self.values[k])).collect()
    }

    pub fn map(&self, f: impl Fn(&Real) -> Real) -> AdaptedProcess {
        AdaptedProcess {
            values: self.values.iter().map(|row| row.iter().map(&f).collect()).collect(),
        }
    }

    pub fn zip_with(&self, other: &AdaptedProcess, f: impl Fn(&Real, &Real) -> Real) -> AdaptedProcess {
        AdaptedProcess {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
                .collect(),
        }
    }

    /// `self <= other` at every time index at or after `from`.
    pub fn dominated_by(&self, other: &AdaptedProcess, from: &StoppingTime) -> Option<(usize, usize)> {
        for (k, row) in self.values.iter().enumerate() {
            for (w, x) in row.iter().enumerate() {
                if k >= from.get(w) && x > &other.values[k][w] {
                    return Some((k, w));
                }
            }
        }
        None
    }
}

/// Grid-valued random time with `{tau <= t}` in `F_t` for every grid time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StoppingTime(pub Vec<usize>);

impl StoppingTime {
    pub fn constant(k: usize, n: usize) -> Self {
        StoppingTime(vec![k; n])
    }

    pub fn get(&self, w: usize) -> usize {
        self.0[w]
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, space: &FilteredSpace) -> Result<()> {
        if space.is_stopping_time(&self.0) {
            Ok(())
        } else {
            Err(StopGameError::InvalidStoppingTime(format!("{:?}", self.0)))
        }
    }

    /// Pointwise minimum.
    pub fn min(&self, other: &StoppingTime) -> StoppingTime {
        StoppingTime(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }

    /// Shift by `steps` grid points, saturating at the terminal index.
    pub fn shifted(&self, steps: &[usize], terminal: usize) -> StoppingTime {
        StoppingTime(self.0.iter().zip(steps).map(|(k, d)| (k + d).min(terminal)).collect())
    }
}

/// Membership of `tau` in `T_rho` (or `T_{rho+}` when `strict`).
pub fn in_t_after(tau: &StoppingTime, rho: &StoppingTime, strict: bool, terminal: usize) -> bool {
    tau.0.iter().zip(&rho.0).all(|(&t, &r)| {
        if r >= terminal {
            true
        } else if strict {
            t > r
        } else {
            t >= r
        }
    })
}

/// Absolute value helper for exact scalars.
pub fn abs(x: &Real) -> Real {
    x.abs()
}

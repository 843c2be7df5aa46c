//! Stopping strategies that react to observed stops, and the resolution engine
//! turning a profile of strategies into actual stopping times.
//!
//! A strategy of order 2 holds an initial stopping time plus one reaction per
//! observed opponent stop time. A strategy of order 3 reacts to either of the
//! two other players stopping alone, and to both of them having stopped.
//! Other players are always listed in increasing player index.

use num::Zero;

use crate::error::{Result, StopGameError};
use crate::space::{FilteredSpace, Real, StoppingTime, TimeGrid};

/// Anything that can announce a planned stop time given what it has observed.
pub trait StopRule {
    /// Planned stop for outcome `w`; `seen[j]` is the stop time of the `j`-th other
    /// player (increasing index order), `None` while that player is still running.
    fn plan(&self, seen: &[Option<usize>], w: usize) -> usize;

    fn initial(&self) -> &StoppingTime;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyOrder2 {
    pub initial: StoppingTime,
    /// `react[s]` is used after the opponent stops alone at grid index `s`.
    pub react: Vec<StoppingTime>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyOrder3 {
    pub initial: StoppingTime,
    /// Reaction after the lower-index other player stops alone at `s`.
    pub react_a: Vec<StoppingTime>,
    /// Reaction after the higher-index other player stops alone at `s`.
    pub react_b: Vec<StoppingTime>,
    /// Reaction once both others stopped, indexed `[lower's time][higher's time]`.
    pub react_ab: Vec<Vec<StoppingTime>>,
}

/// What a player of order 3 has observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    A(usize),
    B(usize),
    Both(usize, usize),
}

impl StopRule for StrategyOrder2 {
    fn plan(&self, seen: &[Option<usize>], w: usize) -> usize {
        match seen {
            [None] => self.initial.get(w),
            [Some(s)] => self.react[*s].get(w),
            _ => panic!("order-2 strategy used in a game with {} other players", seen.len()),
        }
    }

    fn initial(&self) -> &StoppingTime {
        &self.initial
    }
}

impl StopRule for StrategyOrder3 {
    fn plan(&self, seen: &[Option<usize>], w: usize) -> usize {
        match seen {
            [None, None] => self.initial.get(w),
            [Some(s), None] => self.react_a[*s].get(w),
            [None, Some(t)] => self.react_b[*t].get(w),
            [Some(s), Some(t)] => self.react_ab[*s][*t].get(w),
            _ => panic!("order-3 strategy used in a game with {} other players", seen.len()),
        }
    }

    fn initial(&self) -> &StoppingTime {
        &self.initial
    }
}

impl StrategyOrder2 {
    /// Builds the reaction tables from a closure `(observed time, outcome) -> stop`.
    pub fn from_fn(space: &FilteredSpace, initial: StoppingTime, react: impl Fn(usize, usize) -> usize) -> Self {
        let n = space.num_outcomes();
        StrategyOrder2 {
            initial,
            react: (0..space.num_times()).map(|s| StoppingTime((0..n).map(|w| react(s, w)).collect())).collect(),
        }
    }

    /// Lists violations of the strict-reaction and measurability constraints.
    pub fn validate(&self, space: &FilteredSpace) -> Vec<StrategyViolation> {
        let mut out = Vec::new();
        if !space.is_stopping_time(self.initial.values()) {
            out.push(StrategyViolation::NotStoppingTime { observed: vec![] });
        }
        if self.react.len() != space.num_times() {
            out.push(StrategyViolation::Shape);
            return out;
        }
        for (s, r) in self.react.iter().enumerate() {
            check_reaction(space, r, vec![s], s, &mut out);
        }
        out
    }
}

impl StrategyOrder3 {
    pub fn from_fn(space: &FilteredSpace, initial: StoppingTime, react: impl Fn(Observation, usize) -> usize) -> Self {
        let n = space.num_outcomes();
        let times = space.num_times();
        let table = |obs: &dyn Fn(usize) -> Observation| -> Vec<StoppingTime> {
            (0..times).map(|s| StoppingTime((0..n).map(|w| react(obs(s), w)).collect())).collect()
        };
        let react_a = table(&Observation::A);
        let react_b = table(&Observation::B);
        let react_ab = (0..times)
            .map(|s| {
                (0..times)
                    .map(|t| StoppingTime((0..n).map(|w| react(Observation::Both(s, t), w)).collect()))
                    .collect()
            })
            .collect();
        StrategyOrder3 { initial, react_a, react_b, react_ab }
    }

    pub fn validate(&self, space: &FilteredSpace) -> Vec<StrategyViolation> {
        let mut out = Vec::new();
        let times = space.num_times();
        if !space.is_stopping_time(self.initial.values()) {
            out.push(StrategyViolation::NotStoppingTime { observed: vec![] });
        }
        if self.react_a.len() != times
            || self.react_b.len() != times
            || self.react_ab.len() != times
            || self.react_ab.iter().any(|row| row.len() != times)
        {
            out.push(StrategyViolation::Shape);
            return out;
        }
        for s in 0..times {
            check_reaction(space, &self.react_a[s], vec![s], s, &mut out);
            check_reaction(space, &self.react_b[s], vec![s], s, &mut out);
            for t in 0..times {
                check_reaction(space, &self.react_ab[s][t], vec![s, t], s.max(t), &mut out);
            }
        }
        out
    }
}

fn check_reaction(
    space: &FilteredSpace,
    reaction: &StoppingTime,
    observed: Vec<usize>,
    after: usize,
    out: &mut Vec<StrategyViolation>,
) {
    if !space.is_stopping_time(reaction.values()) {
        out.push(StrategyViolation::NotStoppingTime { observed: observed.clone() });
    }
    if after < space.terminal() {
        if let Some(w) = reaction.values().iter().position(|&k| k <= after) {
            out.push(StrategyViolation::NotStrictlyLater { observed, outcome: w });
        }
    }
}

/// One violated constraint of a stopping strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategyViolation {
    Shape,
    /// The initial time (`observed` empty) or a reaction is not a stopping time.
    NotStoppingTime { observed: Vec<usize> },
    /// A reaction does not stop strictly after the latest observed stop.
    NotStrictlyLater { observed: Vec<usize>, outcome: usize },
    /// The initial time starts before the game does.
    StartsTooEarly { outcome: usize },
}

/// Checks a strategy and that its initial time is at or after `from`.
pub fn validate_from<S: StopRule>(
    strategy: &S,
    violations: Vec<StrategyViolation>,
    from: &StoppingTime,
) -> Vec<StrategyViolation> {
    let mut out = violations;
    if let Some(w) = (0..from.values().len()).find(|&w| strategy.initial().get(w) < from.get(w)) {
        out.push(StrategyViolation::StartsTooEarly { outcome: w });
    }
    out
}

/// Actual stopping times of a resolved profile, one per player.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedProfile {
    pub actual: Vec<StoppingTime>,
}

/// Chronological resolution on one outcome: returns the stop times and the number
/// of stop events (simultaneous stops count once).
pub fn resolve_outcome(profile: &[&dyn StopRule], w: usize) -> (Vec<usize>, usize) {
    let n = profile.len();
    let mut stopped: Vec<Option<usize>> = vec![None; n];
    let mut events = 0;
    while stopped.iter().any(Option::is_none) {
        let plans: Vec<Option<usize>> = (0..n)
            .map(|i| stopped[i].is_none().then(|| profile[i].plan(&others(&stopped, i), w)))
            .collect();
        let first = plans.iter().flatten().copied().min().expect("someone is still running");
        for (i, plan) in plans.iter().enumerate() {
            if *plan == Some(first) {
                stopped[i] = Some(first);
            }
        }
        events += 1;
    }
    (stopped.into_iter().map(|s| s.expect("all stopped")).collect(), events)
}

/// The record of other players' stops as seen by player `i`.
pub fn others(record: &[Option<usize>], i: usize) -> Vec<Option<usize>> {
    record.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &s)| s).collect()
}

pub fn resolve(profile: &[&dyn StopRule], space: &FilteredSpace) -> ResolvedProfile {
    let n = space.num_outcomes();
    let per_outcome: Vec<Vec<usize>> = (0..n).map(|w| resolve_outcome(profile, w).0).collect();
    ResolvedProfile {
        actual: (0..profile.len()).map(|i| StoppingTime(per_outcome.iter().map(|t| t[i]).collect())).collect(),
    }
}

pub fn resolve2(r: &StrategyOrder2, s: &StrategyOrder2, space: &FilteredSpace) -> ResolvedProfile {
    resolve(&[r, s], space)
}

pub fn resolve3(r: &StrategyOrder3, t: &StrategyOrder3, s: &StrategyOrder3, space: &FilteredSpace) -> ResolvedProfile {
    resolve(&[r, t, s], space)
}

/// Reference case formulas for resolution, used to cross-check the simulation.
pub mod closed_form {
    use super::{StrategyOrder2, StrategyOrder3};

    /// `rho[tau] = rho 1{rho <= tau} + rho_1(tau) 1{rho > tau}`, and symmetrically.
    pub fn two(r: &StrategyOrder2, s: &StrategyOrder2, w: usize) -> [usize; 2] {
        let (rho, tau) = (r.initial.get(w), s.initial.get(w));
        let first = if rho <= tau { rho } else { r.react[tau].get(w) };
        let second = if tau <= rho { tau } else { s.react[rho].get(w) };
        [first, second]
    }

    /// Reaction of `who` (player index) to `seen` (player index) stopping alone at `at`.
    fn alone(profile: [&StrategyOrder3; 3], who: usize, seen: usize, at: usize, w: usize) -> usize {
        let lower = (0..3).find(|&j| j != who).expect("three players");
        if seen == lower {
            profile[who].react_a[at].get(w)
        } else {
            profile[who].react_b[at].get(w)
        }
    }

    /// Six-case formula for three players, applied to each player with its
    /// two opponents `j < k`.
    pub fn three(profile: [&StrategyOrder3; 3], w: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut rest = (0..3).filter(|&j| j != i);
            let (j, k) = (rest.next().unwrap(), rest.next().unwrap());
            let me = profile[i].initial.get(w);
            let a = profile[j].initial.get(w);
            let b = profile[k].initial.get(w);
            let both = |s: usize, t: usize| profile[i].react_ab[s][t].get(w);
            *slot = if me <= a.min(b) {
                me
            } else if a == b {
                both(a, b)
            } else if b < a {
                let mine = alone(profile, i, k, b, w);
                let theirs = alone(profile, j, k, b, w);
                if mine <= theirs {
                    mine
                } else {
                    both(theirs, b)
                }
            } else {
                let mine = alone(profile, i, j, a, w);
                let theirs = alone(profile, k, j, a, w);
                if mine <= theirs {
                    mine
                } else {
                    both(a, theirs)
                }
            };
        }
        out
    }
}

/// Commit to `tau` and ignore the opponent: react with `tau` while it is still ahead,
/// otherwise never stop before the horizon.
pub fn lift_obstinate2(tau: &StoppingTime, space: &FilteredSpace) -> StrategyOrder2 {
    let last = space.terminal();
    StrategyOrder2::from_fn(space, tau.clone(), |s, w| if s < tau.get(w) { tau.get(w) } else { last })
}

/// Stop at grid index `k` unless someone stops first, in which case wait for the horizon.
pub fn lift_constant3(k: usize, space: &FilteredSpace) -> StrategyOrder3 {
    let last = space.terminal();
    StrategyOrder3::from_fn(space, StoppingTime::constant(k, space.num_outcomes()), |_, _| last)
}

/// `([t / h] + 1) h`.
pub fn phi_h(t: &Real, h: &Real) -> Real {
    assert!(h > &Real::zero(), "window width must be positive");
    ((t / h).floor() + Real::from_integer(1.into())) * h
}

/// `phi_h` on grid indices, saturating at the terminal index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiMap {
    h: Real,
    targets: Vec<usize>,
}

impl PhiMap {
    pub fn new(grid: &TimeGrid, h: &Real) -> Result<Self> {
        let last = grid.terminal();
        let mut targets = Vec::with_capacity(grid.len());
        for k in 0..last {
            let v = phi_h(grid.value(k), h);
            let target = if &v >= grid.value(last) {
                last
            } else {
                grid.index_of(&v).ok_or_else(|| StopGameError::NonGridResult { time: grid.value(k).clone(), value: v })?
            };
            targets.push(target);
        }
        targets.push(last);
        Ok(PhiMap { h: h.clone(), targets })
    }

    pub fn h(&self) -> &Real {
        &self.h
    }

    pub fn map(&self, k: usize) -> usize {
        self.targets[k]
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Distinct targets in increasing order (always includes the terminal index).
    pub fn entries(&self) -> Vec<usize> {
        let mut e = self.targets.clone();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Grid times whose window is the entry `g`: `{k : phi(k) = g}` plus `g` itself.
    pub fn window(&self, g: usize) -> Vec<usize> {
        let mut w: Vec<usize> = (0..self.targets.len()).filter(|&k| self.targets[k] == g).collect();
        if !w.contains(&g) {
            w.push(g);
        }
        w.sort_unstable();
        w
    }
}

/// Redirects observations before `t` to the time-`t` behaviour of an equilibrium
/// computed from `t`, so that it stays an equilibrium when the game starts earlier.
pub fn patch_pair(pair: (&StrategyOrder2, &StrategyOrder2), t: usize, space: &FilteredSpace) -> (StrategyOrder2, StrategyOrder2) {
    let patch = |s: &StrategyOrder2| {
        StrategyOrder2::from_fn(space, s.initial.clone(), |obs, w| {
            if obs >= t {
                s.react[obs].get(w)
            } else if s.initial.get(w) == t {
                t
            } else {
                s.react[t].get(w)
            }
        })
    };
    (patch(pair.0), patch(pair.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{int, rat, TimeGrid};

    fn fixture() -> FilteredSpace {
        let grid = TimeGrid::new(vec![int(0), int(1), int(2)]).unwrap();
        FilteredSpace::new(
            grid,
            vec![rat(1, 2), rat(1, 2)],
            vec![vec![vec![0, 1]], vec![vec![0], vec![1]], vec![vec![0], vec![1]]],
        )
        .unwrap()
    }

    fn const2(space: &FilteredSpace, k: usize) -> StrategyOrder2 {
        let last = space.terminal();
        StrategyOrder2::from_fn(space, StoppingTime::constant(k, 2), move |s, _| (s + 1).min(last))
    }

    #[test]
    fn obstinate_lift_is_valid_and_ignores_opponent() {
        let s = fixture();
        let tau = StoppingTime::constant(1, 2);
        let lifted = lift_obstinate2(&tau, &s);
        assert!(lifted.validate(&s).is_empty());
        let opp = lift_obstinate2(&StoppingTime::constant(0, 2), &s);
        let res = resolve2(&lifted, &opp, &s);
        assert_eq!(res.actual[0], tau);
        assert_eq!(res.actual[1], StoppingTime::constant(0, 2));
    }

    #[test]
    fn non_strict_reaction_is_flagged() {
        let s = fixture();
        let bad = StrategyOrder2::from_fn(&s, StoppingTime::constant(0, 2), |t, _| t);
        assert!(bad
            .validate(&s)
            .iter()
            .any(|v| matches!(v, StrategyViolation::NotStrictlyLater { observed, .. } if observed == &vec![0])));
    }

    #[test]
    fn early_joint_reaction_is_flagged() {
        let s = fixture();
        let mut strat = lift_constant3(0, &s);
        strat.react_ab[1][0] = StoppingTime::constant(0, 2);
        assert!(strat
            .validate(&s)
            .iter()
            .any(|v| matches!(v, StrategyViolation::NotStrictlyLater { observed, .. } if observed == &vec![1, 0])));
    }

    #[test]
    fn resolve2_first_mover_and_reaction() {
        let s = fixture();
        let r = const2(&s, 0);
        let t = StrategyOrder2::from_fn(&s, StoppingTime::constant(1, 2), |obs, w| if obs == 0 && w == 0 { 1 } else { 2 });
        let res = resolve2(&r, &t, &s);
        assert_eq!(res.actual[0], StoppingTime::constant(0, 2));
        assert_eq!(res.actual[1], t.react[0]);
    }

    #[test]
    fn equal_initials_stop_together() {
        let s = fixture();
        let res = resolve2(&const2(&s, 1), &const2(&s, 1), &s);
        assert_eq!(res.actual[0], StoppingTime::constant(1, 2));
        assert_eq!(res.actual[1], StoppingTime::constant(1, 2));
        let c = lift_constant3(1, &s);
        let res3 = resolve3(&c, &c, &c, &s);
        assert!(res3.actual.iter().all(|t| t == &StoppingTime::constant(1, 2)));
    }

    #[test]
    fn resolve3_simultaneous_pair_then_reaction() {
        let s = fixture();
        let last = s.terminal();
        let leader = StrategyOrder3::from_fn(&s, StoppingTime::constant(2, 2), move |obs, _| match obs {
            Observation::Both(1, 1) => 2,
            _ => last,
        });
        let others = lift_constant3(1, &s);
        let res = resolve3(&leader, &others, &others, &s);
        assert_eq!(res.actual[0], leader.react_ab[1][1]);
        assert_eq!(res.actual[1], StoppingTime::constant(1, 2));
        assert_eq!(res.actual[2], StoppingTime::constant(1, 2));
    }

    #[test]
    fn resolve3_first_stop_then_two_player_subgame() {
        let s = fixture();
        let first = lift_constant3(0, &s);
        let second = StrategyOrder3::from_fn(&s, StoppingTime::constant(1, 2), |obs, _| match obs {
            Observation::A(0) => 1,
            _ => 2,
        });
        let third = StrategyOrder3::from_fn(&s, StoppingTime::constant(2, 2), |obs, _| match obs {
            Observation::A(0) => 2,
            _ => 2,
        });
        let res = resolve3(&first, &second, &third, &s);
        assert_eq!(res.actual[0], StoppingTime::constant(0, 2));
        assert_eq!(res.actual[1], StoppingTime::constant(1, 2));
        assert_eq!(res.actual[2], StoppingTime::constant(2, 2));
        for w in 0..2 {
            assert_eq!(closed_form::three([&first, &second, &third], w), [0, 1, 2]);
        }
    }

    #[test]
    fn constant_lift_waits_when_preempted() {
        let s = fixture();
        let me = lift_constant3(1, &s);
        let early = lift_constant3(0, &s);
        let res = resolve3(&me, &early, &lift_constant3(2, &s), &s);
        assert_eq!(res.actual[0], StoppingTime::constant(s.terminal(), 2));
        let res = resolve3(&lift_constant3(0, &s), &lift_constant3(2, &s), &lift_constant3(2, &s), &s);
        assert_eq!(res.actual[0], StoppingTime::constant(0, 2));
        let never = lift_constant3(s.terminal(), &s);
        assert!(never.validate(&s).is_empty());
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi_h(&rat(9, 10), &rat(1, 2)), int(1));
        assert_eq!(phi_h(&int(1), &rat(1, 2)), rat(3, 2));
        assert_eq!(phi_h(&int(0), &rat(1, 3)), rat(1, 3));
    }

    #[test]
    fn phi_map_on_grid() {
        let grid = TimeGrid::uniform(5, rat(1, 4)).unwrap();
        let phi = PhiMap::new(&grid, &rat(1, 2)).unwrap();
        assert_eq!((0..5).map(|k| phi.map(k)).collect::<Vec<_>>(), vec![2, 2, 4, 4, 4]);
        assert_eq!(phi.entries(), vec![2, 4]);
        assert_eq!(phi.window(2), vec![0, 1, 2]);
        assert!(matches!(PhiMap::new(&grid, &rat(1, 3)), Err(StopGameError::NonGridResult { .. })));
    }

    #[test]
    fn patch_leaves_late_observations_alone() {
        let s = fixture();
        let star_r = StrategyOrder2::from_fn(&s, StoppingTime::constant(1, 2), |_, _| 2);
        let star_t = StrategyOrder2::from_fn(&s, StoppingTime::constant(2, 2), |o, _| (o + 1).min(2));
        let (pr, pt) = patch_pair((&star_r, &star_t), 1, &s);
        assert_eq!(pr.react[1], star_r.react[1]);
        assert_eq!(pr.react[2], star_r.react[2]);
        // rho* = t = 1, so an observation before t stops at t.
        assert_eq!(pr.react[0], StoppingTime::constant(1, 2));
        // tau* = 2 != t, so an observation before t uses tau*_1(t).
        assert_eq!(pt.react[0], star_t.react[1]);
        assert!(pr.validate(&s).is_empty() && pt.validate(&s).is_empty());
    }
}

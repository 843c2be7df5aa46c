//! Ground truth on small instances: enumeration of stopping times and strategies,
//! and exact best responses against fixed opponents.

use std::collections::HashMap;

use num::Zero;

use crate::classic::Direction;
use crate::error::{Result, StopGameError};
use crate::guard::Guards;
use crate::space::{FilteredSpace, RandomVariable, Real, StoppingTime};
use crate::strategy::{others, resolve, StopRule, StrategyOrder2, StrategyOrder3};

/// Payoff of one player as a function of everyone's stop times (profile order) and the outcome.
pub type Payoff<'a> = &'a dyn Fn(&[usize], usize) -> Real;

/// `E_theta[U(resolved profile)]`, outcome by outcome.
pub fn on_path_value(
    space: &FilteredSpace,
    profile: &[&dyn StopRule],
    payoff: Payoff,
    start: &StoppingTime,
) -> Result<RandomVariable> {
    let resolved = resolve(profile, space);
    let raw = RandomVariable(
        (0..space.num_outcomes())
            .map(|w| {
                let times: Vec<usize> = resolved.actual.iter().map(|t| t.get(w)).collect();
                payoff(&times, w)
            })
            .collect(),
    );
    space.cond_exp_at(&raw, start)
}

struct BestResponse<'a> {
    space: &'a FilteredSpace,
    profile: &'a [&'a dyn StopRule],
    deviators: &'a [usize],
    dir: Direction,
    payoff: Payoff<'a>,
    memo: HashMap<(usize, Vec<Option<usize>>, usize), Real>,
    cap: u128,
}

impl BestResponse<'_> {
    fn solve(&mut self, k: usize, record: &[Option<usize>], b: usize) -> Result<Real> {
        let key = (k, record.to_vec(), b);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if self.memo.len() as u128 >= self.cap {
            return Err(StopGameError::GuardExceeded {
                what: "best-response states",
                count: self.memo.len() as u128 + 1,
                cap: self.cap,
            });
        }
        let space = self.space;
        let block = &space.blocks(k)[b];
        let last = space.terminal();

        // Fixed players stop now when their current plan has come due.
        let mut after_fixed = record.to_vec();
        for (i, rule) in self.profile.iter().enumerate() {
            if record[i].is_some() || self.deviators.contains(&i) {
                continue;
            }
            let due: Vec<bool> = block.iter().map(|&w| rule.plan(&others(record, i), w) <= k).collect();
            if due.iter().any(|&d| d != due[0]) {
                return Err(StopGameError::InvalidStoppingTime(format!(
                    "player {i}'s plan is not decided by time index {k}"
                )));
            }
            if due[0] || k == last {
                after_fixed[i] = Some(k);
            }
        }

        let open: Vec<usize> = self.deviators.iter().copied().filter(|&d| record[d].is_none()).collect();
        let masks: Vec<usize> = if k == last { vec![(1 << open.len()) - 1] } else { (0..1usize << open.len()).rev().collect() };
        let mut best: Option<Real> = None;
        for mask in masks {
            let mut next = after_fixed.clone();
            for (bit, &d) in open.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    next[d] = Some(k);
                }
            }
            let value = if next.iter().all(Option::is_some) {
                let times: Vec<usize> = next.iter().map(|s| s.expect("all stopped")).collect();
                space.average_over(block, |w| (self.payoff)(&times, w))
            } else {
                let mut acc = Real::zero();
                for c in space.children(k, b) {
                    let v = self.solve(k + 1, &next, c)?;
                    acc += space.block_weight(k + 1, c) * v;
                }
                acc / space.block_weight(k, b)
            };
            best = Some(match best {
                None => value,
                Some(cur) => self.dir.pick(cur, value),
            });
        }
        let v = best.expect("at least one option");
        self.memo.insert(key, v.clone());
        Ok(v)
    }
}

/// Exact optimum over all deviations of the `deviators` (jointly, in direction `dir`)
/// against the remaining fixed strategies, conditioned at `start`.
///
/// The deviators observe every stop, so this is a single-controller stopping problem
/// on the state (time, block, record of stops).
pub fn best_response_value(
    space: &FilteredSpace,
    profile: &[&dyn StopRule],
    deviators: &[usize],
    dir: Direction,
    payoff: Payoff,
    start: &StoppingTime,
    guards: &Guards,
) -> Result<RandomVariable> {
    start.validate(space)?;
    let mut br = BestResponse {
        space,
        profile,
        deviators,
        dir,
        payoff,
        memo: HashMap::new(),
        cap: guards.dp_states,
    };
    let none = vec![None; profile.len()];
    let mut out = Vec::with_capacity(space.num_outcomes());
    for w in 0..space.num_outcomes() {
        let k = start.get(w);
        out.push(br.solve(k, &none, space.block_of(k, w))?);
    }
    Ok(RandomVariable(out))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestResponseResult {
    pub value: RandomVariable,
    pub on_path: RandomVariable,
    /// Improvement available to the deviator(s), per outcome; never negative.
    pub gap: RandomVariable,
}

impl BestResponseResult {
    pub fn max_gap(&self) -> Real {
        self.gap.max()
    }
}

/// Best response of player `i` (maximizing its own payoff) against the rest of `profile`.
pub fn exact_best_response(
    space: &FilteredSpace,
    profile: &[&dyn StopRule],
    i: usize,
    payoff: Payoff,
    start: &StoppingTime,
    guards: &Guards,
) -> Result<BestResponseResult> {
    deviation_gap(space, profile, &[i], Direction::Sup, payoff, start, guards)
}

/// Best deviation by a set of players optimizing `payoff` in `dir`, with its gap to the on-path value.
pub fn deviation_gap(
    space: &FilteredSpace,
    profile: &[&dyn StopRule],
    deviators: &[usize],
    dir: Direction,
    payoff: Payoff,
    start: &StoppingTime,
    guards: &Guards,
) -> Result<BestResponseResult> {
    let value = best_response_value(space, profile, deviators, dir, payoff, start, guards)?;
    let on_path = on_path_value(space, profile, payoff, start)?;
    let gap = match dir {
        Direction::Sup => value.zip_with(&on_path, |a, b| a - b),
        Direction::Inf => on_path.zip_with(&value, |a, b| a - b),
    };
    Ok(BestResponseResult { value, on_path, gap })
}

/// Per-player best-response results for a profile; `payoffs[i]` is player `i`'s payoff.
pub fn nash_gap(
    space: &FilteredSpace,
    profile: &[&dyn StopRule],
    payoffs: &[Payoff],
    start: &StoppingTime,
    guards: &Guards,
) -> Result<Vec<BestResponseResult>> {
    (0..profile.len())
        .map(|i| exact_best_response(space, profile, i, payoffs[i], start, guards))
        .collect()
}

/// Number of stopping times `>= from`.
pub fn count_stopping_times(space: &FilteredSpace, from: &StoppingTime) -> u128 {
    (0..space.blocks(0).len()).map(|b| count_block(space, from, 0, b)).product()
}

fn active(from: &StoppingTime, block: &[usize], k: usize) -> bool {
    from.get(block[0]) <= k
}

fn count_block(space: &FilteredSpace, from: &StoppingTime, k: usize, b: usize) -> u128 {
    let block = &space.blocks(k)[b];
    if k == space.terminal() {
        return 1;
    }
    let wait: u128 = space.children(k, b).into_iter().map(|c| count_block(space, from, k + 1, c)).product();
    if active(from, block, k) {
        1 + wait
    } else {
        wait
    }
}

/// Every stopping time `>= from`, each exactly once.
pub fn enumerate_stopping_times(space: &FilteredSpace, from: &StoppingTime, guards: &Guards) -> Result<Vec<StoppingTime>> {
    guards.check_enumeration("stopping times", count_stopping_times(space, from))?;
    let mut roots: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for b in 0..space.blocks(0).len() {
        let sub = gen_block(space, from, 0, b);
        roots = concat_product(&roots, &sub);
    }
    Ok(roots
        .into_iter()
        .map(|assignment| {
            let mut t = vec![0; space.num_outcomes()];
            for (w, k) in assignment {
                t[w] = k;
            }
            StoppingTime(t)
        })
        .collect())
}

/// Every concatenation of one prefix with one suffix.
fn concat_product(prefixes: &[Vec<(usize, usize)>], suffixes: &[Vec<(usize, usize)>]) -> Vec<Vec<(usize, usize)>> {
    prefixes
        .iter()
        .flat_map(|p| suffixes.iter().map(move |s| [p.as_slice(), s.as_slice()].concat()))
        .collect()
}

fn gen_block(space: &FilteredSpace, from: &StoppingTime, k: usize, b: usize) -> Vec<Vec<(usize, usize)>> {
    let block = &space.blocks(k)[b];
    let stop_here = || block.iter().map(|&w| (w, k)).collect::<Vec<_>>();
    if k == space.terminal() {
        return vec![stop_here()];
    }
    let mut out = Vec::new();
    if active(from, block, k) {
        out.push(stop_here());
    }
    let mut waits: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for c in space.children(k, b) {
        let sub = gen_block(space, from, k + 1, c);
        waits = concat_product(&waits, &sub);
    }
    out.extend(waits);
    out
}

/// Stopping times strictly after the observation `s` (only the horizon when `s` is terminal).
fn reactions_after(space: &FilteredSpace, s: usize, guards: &Guards) -> Result<Vec<StoppingTime>> {
    let from = StoppingTime::constant((s + 1).min(space.terminal()), space.num_outcomes());
    enumerate_stopping_times(space, &from, guards)
}

fn reaction_count(space: &FilteredSpace, s: usize) -> u128 {
    count_stopping_times(space, &StoppingTime::constant((s + 1).min(space.terminal()), space.num_outcomes()))
}

pub fn count_strategies2(space: &FilteredSpace, from: &StoppingTime) -> u128 {
    (0..space.num_times()).fold(count_stopping_times(space, from), |acc, s| acc.saturating_mul(reaction_count(space, s)))
}

/// All order-2 strategies whose initial time is `>= from`.
pub fn enumerate_strategies2(space: &FilteredSpace, from: &StoppingTime, guards: &Guards) -> Result<Vec<StrategyOrder2>> {
    guards.check_enumeration("order-2 strategies", count_strategies2(space, from))?;
    let initials = enumerate_stopping_times(space, from, guards)?;
    let tables: Vec<Vec<StoppingTime>> = (0..space.num_times()).map(|s| reactions_after(space, s, guards)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for initial in initials {
        for react in product(&tables) {
            out.push(StrategyOrder2 { initial: initial.clone(), react });
        }
    }
    Ok(out)
}

pub fn count_strategies3(space: &FilteredSpace, from: &StoppingTime) -> u128 {
    let times = space.num_times();
    let mut total = count_stopping_times(space, from);
    for s in 0..times {
        total = total.saturating_mul(reaction_count(space, s)).saturating_mul(reaction_count(space, s));
        for t in 0..times {
            total = total.saturating_mul(reaction_count(space, s.max(t)));
        }
    }
    total
}

/// All order-3 strategies whose initial time is `>= from`.
pub fn enumerate_strategies3(space: &FilteredSpace, from: &StoppingTime, guards: &Guards) -> Result<Vec<StrategyOrder3>> {
    guards.check_enumeration("order-3 strategies", count_strategies3(space, from))?;
    let times = space.num_times();
    let initials = enumerate_stopping_times(space, from, guards)?;
    let single: Vec<Vec<StoppingTime>> = (0..times).map(|s| reactions_after(space, s, guards)).collect::<Result<_>>()?;
    let pairs: Vec<Vec<StoppingTime>> = (0..times * times).map(|c| single[(c / times).max(c % times)].clone()).collect();
    let mut out = Vec::new();
    for initial in &initials {
        for react_a in product(&single) {
            for react_b in product(&single) {
                for flat in product(&pairs) {
                    let react_ab = flat.chunks(times).map(<[StoppingTime]>::to_vec).collect();
                    out.push(StrategyOrder3 {
                        initial: initial.clone(),
                        react_a: react_a.clone(),
                        react_b: react_b.clone(),
                        react_ab,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn product<T: Clone>(choices: &[Vec<T>]) -> Vec<Vec<T>> {
    choices.iter().fold(vec![Vec::new()], |acc, options| {
        acc.iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.push(o.clone());
                    v
                })
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{int, rat, TimeGrid};
    use crate::strategy::{lift_constant3, lift_obstinate2};

    fn fixture() -> FilteredSpace {
        let grid = TimeGrid::new(vec![int(0), int(1), int(2)]).unwrap();
        FilteredSpace::new(
            grid,
            vec![rat(1, 2), rat(1, 2)],
            vec![vec![vec![0, 1]], vec![vec![0], vec![1]], vec![vec![0], vec![1]]],
        )
        .unwrap()
    }

    #[test]
    fn counts_on_fixtures() {
        let s = fixture();
        let g = Guards::default();
        assert_eq!(enumerate_stopping_times(&s, &StoppingTime::constant(0, 2), &g).unwrap().len(), 5);
        assert_eq!(enumerate_stopping_times(&s, &StoppingTime::constant(2, 2), &g).unwrap().len(), 1);
        assert_eq!(count_strategies2(&s, &StoppingTime::constant(0, 2)), 20);
        let all = enumerate_strategies2(&s, &StoppingTime::constant(0, 2), &g).unwrap();
        assert_eq!(all.len(), 20);
        assert!(all.iter().all(|st| st.validate(&s).is_empty()));

        let grid = TimeGrid::new(vec![int(0), int(1)]).unwrap();
        let short = FilteredSpace::new(grid, vec![rat(1, 2), rat(1, 2)], vec![vec![vec![0, 1]], vec![vec![0], vec![1]]]).unwrap();
        assert_eq!(enumerate_stopping_times(&short, &StoppingTime::constant(0, 2), &g).unwrap().len(), 2);
        assert_eq!(count_strategies2(&short, &StoppingTime::constant(0, 2)), 2);
    }

    #[test]
    fn enumeration_respects_guard() {
        let s = fixture();
        let tight = Guards { enumeration: 3, dp_states: 10 };
        assert!(matches!(
            enumerate_stopping_times(&s, &StoppingTime::constant(0, 2), &tight),
            Err(StopGameError::GuardExceeded { .. })
        ));
    }

    #[test]
    fn constant_payoff_has_zero_gap() {
        let s = fixture();
        let a = lift_constant3(1, &s);
        let b = lift_constant3(2, &s);
        let profile: [&dyn StopRule; 3] = [&a, &b, &b];
        let u = |_: &[usize], _: usize| int(7);
        let gaps = nash_gap(&s, &profile, &[&u, &u, &u], &StoppingTime::constant(0, 2), &Guards::default()).unwrap();
        assert!(gaps.iter().all(|g| g.max_gap() == int(0)));
    }

    #[test]
    fn best_response_matches_enumeration() {
        let s = fixture();
        let g = Guards::default();
        let start = StoppingTime::constant(0, 2);
        let opp = lift_obstinate2(&StoppingTime(vec![1, 2]), &s);
        let u = |t: &[usize], w: usize| int((t[0] * 3 + w * 2) as i64 % 5) - int((t[1] * t[0]) as i64);
        let br = exact_best_response(&s, &[&opp, &opp], 0, &u, &start, &g).unwrap();
        let mut best = None::<Real>;
        for dev in enumerate_strategies2(&s, &start, &g).unwrap() {
            let v = on_path_value(&s, &[&dev, &opp], &u, &start).unwrap();
            best = Some(best.map_or(v[0].clone(), |b| b.max(v[0].clone())));
        }
        assert_eq!(br.value[0], best.unwrap());
    }
}

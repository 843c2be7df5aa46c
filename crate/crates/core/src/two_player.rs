//! Two-player nonzero-sum equilibria and families of equilibria indexed by the
//! `phi_h` grid, each certified on its whole window of conditioning times.

use num::Zero;

use crate::classic::{joint_inf_pair, snell_fn, snell_process, Direction};
use crate::error::{Result, StopGameError};
use crate::guard::Guards;
use crate::space::{FilteredSpace, RandomVariable, Real, StoppingTime};
use crate::strategy::{lift_obstinate2, patch_pair, PhiMap, StopRule, StrategyOrder2};
use crate::verify::{count_strategies2, enumerate_strategies2, exact_best_response, on_path_value};

/// `G(r, s, w)` for a two-player game with any frozen coordinate already applied.
pub type Pair<'a> = &'a dyn Fn(usize, usize, usize) -> Real;

#[derive(Debug, Clone)]
pub struct NashPair {
    pub first: StrategyOrder2,
    pub second: StrategyOrder2,
    /// Exact best-response gaps of the two players at the start, maximised over outcomes.
    pub gaps: [Real; 2],
    /// Some node had no pure equilibrium and a least-regret profile was used.
    pub node_without_pure_equilibrium: bool,
    pub used_enumeration: bool,
}

impl NashPair {
    pub fn max_gap(&self) -> Real {
        self.gaps[0].clone().max(self.gaps[1].clone())
    }
}

/// Exact Nash gaps of a pair at `start`.
pub fn pair_gaps(
    space: &FilteredSpace,
    u1: Pair,
    u2: Pair,
    first: &StrategyOrder2,
    second: &StrategyOrder2,
    start: &StoppingTime,
    guards: &Guards,
) -> Result<[Real; 2]> {
    let profile: [&dyn StopRule; 2] = [first, second];
    let p1 = |t: &[usize], w: usize| u1(t[0], t[1], w);
    let p2 = |t: &[usize], w: usize| u2(t[0], t[1], w);
    let g1 = exact_best_response(space, &profile, 0, &p1, start, guards)?.max_gap();
    let g2 = exact_best_response(space, &profile, 1, &p2, start, guards)?.max_gap();
    Ok([g1, g2])
}

/// Own-payoff Snell reaction of a player after the opponent stops alone at `s`.
fn own_reaction(space: &FilteredSpace, s: usize, start: usize, p: &dyn Fn(usize, usize) -> Real) -> StoppingTime {
    let n = space.num_outcomes();
    let last = space.terminal();
    if s >= last {
        return StoppingTime::constant(last, n);
    }
    snell_fn(space, Direction::Sup, p, &StoppingTime::constant((s + 1).max(start), n)).rule
}

/// Candidate by backward induction over 2x2 bimatrix nodes; the stopper's opponent
/// reacts with its own Snell-optimal rule.
fn backward_candidate(space: &FilteredSpace, u1: Pair, u2: Pair, start: usize) -> (StrategyOrder2, StrategyOrder2, bool) {
    let n = space.num_outcomes();
    let last = space.terminal();
    let times = space.num_times();
    let mut v1 = vec![vec![Real::zero(); n]; times];
    let mut v2 = vec![vec![Real::zero(); n]; times];
    let mut stops1 = vec![vec![false; n]; times];
    let mut stops2 = vec![vec![false; n]; times];
    let mut flagged = false;
    v1[last] = (0..n).map(|w| u1(last, last, w)).collect();
    v2[last] = (0..n).map(|w| u2(last, last, w)).collect();
    stops1[last] = vec![true; n];
    stops2[last] = vec![true; n];

    for k in (start..last).rev() {
        // Player 1 stops alone: player 2 reacts on its own payoff.
        let react2 = own_reaction(space, k, start, &|s, w| u2(k, s, w));
        let sc1 = space.cond_exp(&RandomVariable((0..n).map(|w| u1(k, react2.get(w), w)).collect()), k);
        let sc2 = space.cond_exp(&snell_process(space, Direction::Sup, |s, w| u2(k, s, w)).slice(k + 1), k);
        let react1 = own_reaction(space, k, start, &|r, w| u1(r, k, w));
        let cs1 = space.cond_exp(&snell_process(space, Direction::Sup, |r, w| u1(r, k, w)).slice(k + 1), k);
        let cs2 = space.cond_exp(&RandomVariable((0..n).map(|w| u2(react1.get(w), k, w)).collect()), k);
        let cc1 = space.cond_exp(&RandomVariable(v1[k + 1].clone()), k);
        let cc2 = space.cond_exp(&RandomVariable(v2[k + 1].clone()), k);

        for block in space.blocks(k) {
            let w0 = block[0];
            let ss = (space.average_over(block, |w| u1(k, k, w)), space.average_over(block, |w| u2(k, k, w)));
            // Cells in order SS, SC, CS, CC as (payoff 1, payoff 2).
            let cells = [
                ss,
                (sc1[w0].clone(), sc2[w0].clone()),
                (cs1[w0].clone(), cs2[w0].clone()),
                (cc1[w0].clone(), cc2[w0].clone()),
            ];
            // Unilateral gains: player 1 flips its row (bit 1), player 2 its column (bit 0).
            let regret = |c: usize| -> Real {
                let g1 = &cells[c ^ 2].0 - &cells[c].0;
                let g2 = &cells[c ^ 1].1 - &cells[c].1;
                g1.max(g2).max(Real::zero())
            };
            let pick = match (0..4).find(|&c| regret(c).is_zero()) {
                Some(c) => c,
                None => {
                    flagged = true;
                    (0..4).min_by(|&a, &b| regret(a).cmp(&regret(b))).expect("four cells")
                }
            };
            for &w in block {
                v1[k][w] = cells[pick].0.clone();
                v2[k][w] = cells[pick].1.clone();
                stops1[k][w] = pick & 2 == 0;
                stops2[k][w] = pick & 1 == 0;
            }
        }
    }

    let from = StoppingTime::constant(start, n);
    let first = StrategyOrder2 {
        initial: space.first_hit(&from, |k, w| stops1[k][w]),
        react: (0..times).map(|s| own_reaction(space, s, start, &|r, w| u1(r, s, w))).collect(),
    };
    let second = StrategyOrder2 {
        initial: space.first_hit(&from, |k, w| stops2[k][w]),
        react: (0..times).map(|s| own_reaction(space, s, start, &|q, w| u2(s, q, w))).collect(),
    };
    (first, second, flagged)
}

/// Certified eps-Nash pair for the two-player game started at grid index `start`.
///
/// Falls back to exhaustive search over all order-2 strategy pairs when the
/// backward-induction candidate does not certify.
pub fn solve_2p_nash(space: &FilteredSpace, u1: Pair, u2: Pair, start: usize, eps: &Real, guards: &Guards) -> Result<NashPair> {
    let from = StoppingTime::constant(start, space.num_outcomes());
    let (first, second, flagged) = backward_candidate(space, u1, u2, start);
    let gaps = pair_gaps(space, u1, u2, &first, &second, &from, guards)?;
    let candidate = NashPair { first, second, gaps, node_without_pure_equilibrium: flagged, used_enumeration: false };
    if &candidate.max_gap() <= eps {
        return Ok(candidate);
    }

    let count = count_strategies2(space, &from);
    guards.check_enumeration("order-2 strategy pairs", count.saturating_mul(count))?;
    let all = enumerate_strategies2(space, &from, guards)?;
    let mut best = candidate;
    for a in &all {
        for b in &all {
            let gaps = pair_gaps(space, u1, u2, a, b, &from, guards)?;
            let worst = gaps[0].clone().max(gaps[1].clone());
            if worst < best.max_gap() {
                best = NashPair {
                    first: a.clone(),
                    second: b.clone(),
                    gaps,
                    node_without_pure_equilibrium: flagged,
                    used_enumeration: true,
                };
                if worst.is_zero() {
                    return Ok(best);
                }
            }
        }
    }
    best.used_enumeration = true;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    NonzeroSumPair,
    CoopPair,
    Single,
}

impl FamilyKind {
    /// Certified window tolerance as a multiple of epsilon.
    pub fn tolerance_factor(self) -> i64 {
        match self {
            FamilyKind::NonzeroSumPair => 11,
            FamilyKind::CoopPair => 5,
            FamilyKind::Single => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairEntry {
    pub first: StrategyOrder2,
    pub second: StrategyOrder2,
    /// Largest certified gap over the entry's window.
    pub window_gap: Real,
}

#[derive(Debug, Clone)]
pub struct SingleEntry {
    pub rule: StoppingTime,
    pub window_gap: Real,
}

/// Objects computed at each `phi_h` entry time, valid on that entry's window.
#[derive(Debug, Clone)]
pub struct Family<E> {
    pub kind: FamilyKind,
    pub phi: PhiMap,
    pub bound: Real,
    pub entries: Vec<(usize, E)>,
}

impl<E> Family<E> {
    pub fn entry(&self, g: usize) -> Result<&E> {
        self.entries
            .iter()
            .find(|(at, _)| *at == g)
            .map(|(_, e)| e)
            .ok_or(StopGameError::OutOfRange(g))
    }

    /// The entry at `phi_h(t)`.
    pub fn lookup(&self, t: usize) -> Result<&E> {
        if t >= self.phi.len() {
            return Err(StopGameError::OutOfRange(t));
        }
        self.entry(self.phi.map(t))
    }
}

fn window_bound(kind: FamilyKind, eps: &Real) -> Real {
    eps * Real::from_integer(kind.tolerance_factor().into())
}

fn check_window(kind: FamilyKind, eps: &Real, g: usize, worst: Option<(usize, Real)>) -> Result<Real> {
    let bound = window_bound(kind, eps);
    let (time, gap) = worst.unwrap_or((g, Real::zero()));
    if gap > bound {
        return Err(StopGameError::WindowCertificationFailed { entry: g, time, gap, bound });
    }
    Ok(gap)
}

/// Nonzero-sum pairs: payoffs `u_i(r, s, t, w)` with `t` the frozen conditioning time.
pub fn build_pair_family(
    space: &FilteredSpace,
    phi: &PhiMap,
    u1: &dyn Fn(usize, usize, usize, usize) -> Real,
    u2: &dyn Fn(usize, usize, usize, usize) -> Real,
    eps: &Real,
    guards: &Guards,
) -> Result<Family<PairEntry>> {
    let n = space.num_outcomes();
    let mut entries = Vec::new();
    for g in phi.entries() {
        let window = phi.window(g);
        let mut best: Option<(PairEntry, (usize, Real))> = None;
        for &tc in &window {
            let a = |r: usize, s: usize, w: usize| u1(r, s, tc, w);
            let b = |r: usize, s: usize, w: usize| u2(r, s, tc, w);
            let eq = solve_2p_nash(space, &a, &b, g, eps, guards)?;
            let (first, second) = patch_pair((&eq.first, &eq.second), g, space);
            let mut worst = (g, Real::zero());
            for &tw in &window {
                let a = |r: usize, s: usize, w: usize| u1(r, s, tw, w);
                let b = |r: usize, s: usize, w: usize| u2(r, s, tw, w);
                let gaps = pair_gaps(space, &a, &b, &first, &second, &StoppingTime::constant(tw, n), guards)?;
                let gap = gaps[0].clone().max(gaps[1].clone());
                if gap > worst.1 {
                    worst = (tw, gap);
                }
            }
            if best.as_ref().is_none_or(|(_, w)| worst.1 < w.1) {
                best = Some((PairEntry { first, second, window_gap: worst.1.clone() }, worst));
            }
            if best.as_ref().is_some_and(|(_, w)| w.1.is_zero()) {
                break;
            }
        }
        let (entry, worst) = best.expect("window is never empty");
        check_window(FamilyKind::NonzeroSumPair, eps, g, Some(worst))?;
        entries.push((g, entry));
    }
    Ok(Family { kind: FamilyKind::NonzeroSumPair, phi: phi.clone(), bound: window_bound(FamilyKind::NonzeroSumPair, eps), entries })
}

/// Cooperative minimizing pairs for `g(r, s, t, w)`, lifted to strategies that ignore each other.
pub fn build_coop_family(
    space: &FilteredSpace,
    phi: &PhiMap,
    payoff: &dyn Fn(usize, usize, usize, usize) -> Real,
    eps: &Real,
    guards: &Guards,
) -> Result<Family<PairEntry>> {
    let n = space.num_outcomes();
    let mut benchmarks = Vec::with_capacity(space.num_times());
    for t in 0..space.num_times() {
        let jp = joint_inf_pair(space, &|r, s, w| payoff(r, s, t, w), guards)?;
        benchmarks.push(jp);
    }
    let mut entries = Vec::new();
    for g in phi.entries() {
        let window = phi.window(g);
        let mut best: Option<(PairEntry, (usize, Real))> = None;
        for &tc in &window {
            let (r, s) = benchmarks[tc].optimal_pair(&StoppingTime::constant(g, n));
            let mut worst = (g, Real::zero());
            for &tw in &window {
                let raw = RandomVariable((0..n).map(|w| payoff(r.get(w), s.get(w), tw, w)).collect());
                let achieved = space.cond_exp(&raw, tw);
                let target = benchmarks[tw].open_value().slice(tw);
                let gap = achieved.zip_with(&target, |a, b| a - b).max();
                if gap > worst.1 {
                    worst = (tw, gap);
                }
            }
            if best.as_ref().is_none_or(|(_, w)| worst.1 < w.1) {
                let entry = PairEntry {
                    first: lift_obstinate2(&r, space),
                    second: lift_obstinate2(&s, space),
                    window_gap: worst.1.clone(),
                };
                best = Some((entry, worst));
            }
        }
        let (entry, worst) = best.expect("window is never empty");
        check_window(FamilyKind::CoopPair, eps, g, Some(worst))?;
        entries.push((g, entry));
    }
    Ok(Family { kind: FamilyKind::CoopPair, phi: phi.clone(), bound: window_bound(FamilyKind::CoopPair, eps), entries })
}

/// Single stopping rules optimizing `h(r, t, w)` in `dir`, `t` frozen at the conditioning time.
pub fn build_single_family(
    space: &FilteredSpace,
    phi: &PhiMap,
    dir: Direction,
    payoff: &dyn Fn(usize, usize, usize) -> Real,
    eps: &Real,
) -> Result<Family<SingleEntry>> {
    let n = space.num_outcomes();
    let envelopes: Vec<_> = (0..space.num_times())
        .map(|t| snell_process(space, dir, |r, w| payoff(r, t, w)))
        .collect();
    let mut entries = Vec::new();
    for g in phi.entries() {
        let window = phi.window(g);
        let mut best: Option<(SingleEntry, (usize, Real))> = None;
        for &tc in &window {
            let rule = snell_fn(space, dir, |r, w| payoff(r, tc, w), &StoppingTime::constant(g, n)).rule;
            let mut worst = (g, Real::zero());
            for &tw in &window {
                let raw = RandomVariable((0..n).map(|w| payoff(rule.get(w), tw, w)).collect());
                let achieved = space.cond_exp(&raw, tw);
                let target = envelopes[tw].slice(tw);
                let gap = match dir {
                    Direction::Sup => target.zip_with(&achieved, |a, b| a - b).max(),
                    Direction::Inf => achieved.zip_with(&target, |a, b| a - b).max(),
                };
                if gap > worst.1 {
                    worst = (tw, gap);
                }
            }
            if best.as_ref().is_none_or(|(_, w)| worst.1 < w.1) {
                best = Some((SingleEntry { rule, window_gap: worst.1.clone() }, worst));
            }
        }
        let (entry, worst) = best.expect("window is never empty");
        check_window(FamilyKind::Single, eps, g, Some(worst))?;
        entries.push((g, entry));
    }
    Ok(Family { kind: FamilyKind::Single, phi: phi.clone(), bound: window_bound(FamilyKind::Single, eps), entries })
}

/// On-path value of a pair entry in the game frozen at `t`, conditioned at `t`.
pub fn pair_on_path(space: &FilteredSpace, entry: &PairEntry, payoff: Pair, t: usize) -> Result<RandomVariable> {
    let profile: [&dyn StopRule; 2] = [&entry.first, &entry.second];
    let p = |times: &[usize], w: usize| payoff(times[0], times[1], w);
    on_path_value(space, &profile, &p, &StoppingTime::constant(t, space.num_outcomes()))
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

    #[test]
    fn constant_payoffs_certify_exactly() {
        let s = fixture();
        let c = |_: usize, _: usize, _: usize| int(2);
        let eq = solve_2p_nash(&s, &c, &c, 0, &rat(1, 20), &Guards::default()).unwrap();
        assert_eq!(eq.max_gap(), int(0));
        assert!(!eq.used_enumeration);
    }

    #[test]
    fn coordination_game_certifies() {
        let s = fixture();
        let u = |r: usize, q: usize, w: usize| int(((r + 2 * q + w) % 3) as i64);
        let eq = solve_2p_nash(&s, &u, &u, 0, &rat(1, 20), &Guards::default()).unwrap();
        assert!(eq.max_gap() <= rat(1, 20));
    }

    #[test]
    fn families_on_flat_payoffs() {
        let grid = TimeGrid::uniform(4, rat(1, 3)).unwrap();
        let s = FilteredSpace::new(
            grid,
            vec![rat(1, 2), rat(1, 2)],
            vec![vec![vec![0, 1]], vec![vec![0], vec![1]], vec![vec![0], vec![1]], vec![vec![0], vec![1]]],
        )
        .unwrap();
        let phi = PhiMap::new(s.grid(), &rat(1, 3)).unwrap();
        let eps = rat(1, 20);
        let g = Guards::default();
        let flat = |_: usize, _: usize, _: usize, _: usize| int(1);
        let pairs = build_pair_family(&s, &phi, &flat, &flat, &eps, &g).unwrap();
        assert!(pairs.entries.iter().all(|(_, e)| e.window_gap == int(0)));
        let coop = build_coop_family(&s, &phi, &flat, &eps, &g).unwrap();
        assert!(coop.entries.iter().all(|(_, e)| e.window_gap == int(0)));
        let single = build_single_family(&s, &phi, Direction::Inf, &|_, _, _| int(1), &eps).unwrap();
        assert_eq!(single.lookup(0).unwrap().rule, StoppingTime::constant(1, 2));
    }

    #[test]
    fn lookup_uses_phi() {
        let grid = TimeGrid::uniform(5, rat(1, 4)).unwrap();
        let s = FilteredSpace::new(grid, vec![int(1)], vec![vec![vec![0]]; 5]).unwrap();
        let phi = PhiMap::new(s.grid(), &rat(1, 2)).unwrap();
        let fam = build_single_family(&s, &phi, Direction::Sup, &|r, _, _| int(r as i64), &rat(1, 20)).unwrap();
        // t = 2 sits on the multiple 1/2, so it maps to the next entry.
        assert_eq!(phi.map(2), 4);
        assert_eq!(fam.lookup(1).unwrap().rule, StoppingTime::constant(4, 1));
        assert!(matches!(fam.lookup(9), Err(StopGameError::OutOfRange(9))));
    }
}

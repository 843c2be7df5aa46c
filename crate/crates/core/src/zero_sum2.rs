//! Two-player zero-sum stopping games with reactions and one frozen time coordinate.
//!
//! Each node offers both players {stop, continue}. When one stops alone the other
//! reacts optimally afterwards, which is a single-agent Snell problem started at
//! the next grid point.

use num::Zero;

use crate::classic::{snell_fn, snell_process, Direction};
use crate::error::{Result, StopGameError};
use crate::guard::Guards;
use crate::payoff::PayoffField;
use crate::space::{AdaptedProcess, FilteredSpace, RandomVariable, Real, StoppingTime};
use crate::strategy::{StopRule, StrategyOrder2};
use crate::verify::deviation_gap;

/// Which coordinates of a three-slot payoff the maximizer and minimizer control;
/// the remaining slot is frozen at the conditioning time.
#[derive(Debug, Clone, Copy)]
pub struct ReactionGameSpec<'a> {
    pub payoff: &'a PayoffField,
    pub frozen_slot: usize,
    pub max_slot: usize,
    pub min_slot: usize,
}

impl<'a> ReactionGameSpec<'a> {
    pub fn new(payoff: &'a PayoffField, frozen_slot: usize, max_slot: usize, min_slot: usize) -> Result<Self> {
        let mut slots = [frozen_slot, max_slot, min_slot];
        slots.sort_unstable();
        if slots != [0, 1, 2] || payoff.players() != 3 {
            return Err(StopGameError::Unsupported("reaction game needs three distinct slots of a three-slot payoff".into()));
        }
        Ok(ReactionGameSpec { payoff, frozen_slot, max_slot, min_slot })
    }

    /// `G(r, s, w)` with the frozen slot pinned at `t`.
    pub fn at(&self, t: usize) -> impl Fn(usize, usize, usize) -> Real + 'a {
        let spec = *self;
        move |r, s, w| {
            let mut tuple = [0; 3];
            tuple[spec.frozen_slot] = t;
            tuple[spec.max_slot] = r;
            tuple[spec.min_slot] = s;
            spec.payoff.get(&tuple, w).clone()
        }
    }
}

/// A node whose 2x2 matrix has no pure saddle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeGap {
    pub time: usize,
    pub block: usize,
    pub maximin: Real,
    pub minimax: Real,
}

#[derive(Debug, Clone)]
pub struct ReactionSolution {
    pub start: usize,
    /// Pure maximin value; rows before `start` are zero.
    pub value: AdaptedProcess,
    pub node_gaps: Vec<NodeGap>,
    max_stops: Vec<Vec<bool>>,
    min_stops: Vec<Vec<bool>>,
}

impl ReactionSolution {
    pub fn value_at_start(&self) -> RandomVariable {
        self.value.slice(self.start)
    }

    pub fn node_gap_total(&self) -> Real {
        self.node_gaps.iter().map(|g| &g.minimax - &g.maximin).sum()
    }
}

/// Value at `t'` of the reaction after the other side stops alone at `t'`:
/// the Snell envelope of `p` started at `t' + 1`, conditioned back to `t'`.
fn reaction_value(space: &FilteredSpace, dir: Direction, k: usize, p: impl Fn(usize, usize) -> Real) -> RandomVariable {
    let env = snell_process(space, dir, p);
    space.cond_exp(&env.slice(k + 1), k)
}

/// Backward induction from the horizon to `start` for `g(r, s, w)` (maximizer's time first).
pub fn reaction_game_value(space: &FilteredSpace, g: &dyn Fn(usize, usize, usize) -> Real, start: usize) -> ReactionSolution {
    let n = space.num_outcomes();
    let last = space.terminal();
    let mut rows = vec![vec![Real::zero(); n]; space.num_times()];
    let mut max_stops = vec![vec![false; n]; space.num_times()];
    let mut min_stops = vec![vec![false; n]; space.num_times()];
    let mut node_gaps = Vec::new();
    rows[last] = (0..n).map(|w| g(last, last, w)).collect();
    max_stops[last] = vec![true; n];
    min_stops[last] = vec![true; n];
    for k in (start..last).rev() {
        let min_reacts = reaction_value(space, Direction::Inf, k, |s, w| g(k, s, w));
        let max_reacts = reaction_value(space, Direction::Sup, k, |r, w| g(r, k, w));
        let cont = space.cond_exp(&RandomVariable(rows[k + 1].clone()), k);
        for (b, block) in space.blocks(k).iter().enumerate() {
            let w0 = block[0];
            let ss = space.average_over(block, |w| g(k, k, w));
            let sc = min_reacts[w0].clone();
            let cs = max_reacts[w0].clone();
            let cc = cont[w0].clone();
            let row_stop = ss.clone().min(sc.clone());
            let row_cont = cs.clone().min(cc.clone());
            let col_stop = ss.max(cs);
            let col_cont = sc.max(cc);
            let maximin = row_stop.clone().max(row_cont.clone());
            let minimax = col_stop.clone().min(col_cont.clone());
            if maximin != minimax {
                node_gaps.push(NodeGap { time: k, block: b, maximin: maximin.clone(), minimax: minimax.clone() });
            }
            for &w in block {
                rows[k][w] = maximin.clone();
                max_stops[k][w] = row_stop >= row_cont;
                min_stops[k][w] = col_stop <= col_cont;
            }
        }
    }
    node_gaps.sort_by_key(|g| (g.time, g.block));
    ReactionSolution { start, value: AdaptedProcess::from_rows(rows), node_gaps, max_stops, min_stops }
}

#[derive(Debug, Clone)]
pub struct SaddleCertificate {
    pub maximizer: StrategyOrder2,
    pub minimizer: StrategyOrder2,
    pub value: RandomVariable,
    /// Largest improvement either side can get by deviating, over outcomes.
    pub certified_gap: Real,
    pub node_gap_total: Real,
}

/// Strategies read off the node decisions, with Snell reactions from the next grid point.
pub fn saddle_strategies(
    space: &FilteredSpace,
    g: &dyn Fn(usize, usize, usize) -> Real,
    sol: &ReactionSolution,
) -> (StrategyOrder2, StrategyOrder2) {
    let n = space.num_outcomes();
    let last = space.terminal();
    let from = StoppingTime::constant(sol.start, n);
    let max_initial = space.first_hit(&from, |k, w| sol.max_stops[k][w]);
    let min_initial = space.first_hit(&from, |k, w| sol.min_stops[k][w]);
    let reaction = |dir: Direction, s: usize, p: &dyn Fn(usize, usize) -> Real| -> StoppingTime {
        if s >= last {
            return StoppingTime::constant(last, n);
        }
        let begin = StoppingTime::constant((s + 1).max(sol.start), n);
        snell_fn(space, dir, p, &begin).rule
    };
    let max_react: Vec<StoppingTime> = (0..=last).map(|s| reaction(Direction::Sup, s, &|r, w| g(r, s, w))).collect();
    let min_react: Vec<StoppingTime> = (0..=last).map(|s| reaction(Direction::Inf, s, &|q, w| g(s, q, w))).collect();
    (
        StrategyOrder2 { initial: max_initial, react: max_react },
        StrategyOrder2 { initial: min_initial, react: min_react },
    )
}

/// Exact deviation gaps of a zero-sum pair at `start`: (maximizer gap, minimizer gap).
pub fn saddle_gaps(
    space: &FilteredSpace,
    g: &dyn Fn(usize, usize, usize) -> Real,
    maximizer: &StrategyOrder2,
    minimizer: &StrategyOrder2,
    start: &StoppingTime,
    guards: &Guards,
) -> Result<(RandomVariable, RandomVariable, RandomVariable)> {
    let payoff = |t: &[usize], w: usize| g(t[0], t[1], w);
    let profile: [&dyn StopRule; 2] = [maximizer, minimizer];
    let up = deviation_gap(space, &profile, &[0], Direction::Sup, &payoff, start, guards)?;
    let down = deviation_gap(space, &profile, &[1], Direction::Inf, &payoff, start, guards)?;
    Ok((up.gap, down.gap, up.on_path))
}

pub fn reaction_game_saddle(
    space: &FilteredSpace,
    g: &dyn Fn(usize, usize, usize) -> Real,
    start: usize,
    eps: &Real,
    guards: &Guards,
) -> Result<SaddleCertificate> {
    let sol = reaction_game_value(space, g, start);
    let (maximizer, minimizer) = saddle_strategies(space, g, &sol);
    let from = StoppingTime::constant(start, space.num_outcomes());
    let (up, down, _) = saddle_gaps(space, g, &maximizer, &minimizer, &from, guards)?;
    let certified_gap = up.max().max(down.max());
    let node_gap_total = sol.node_gap_total();
    let bound = eps + &node_gap_total;
    if certified_gap > bound {
        return Err(StopGameError::CertificationFailed {
            context: format!("zero-sum reaction game from time index {start}"),
            gap: certified_gap,
            bound,
        });
    }
    Ok(SaddleCertificate { maximizer, minimizer, value: sol.value_at_start(), certified_gap, node_gap_total })
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
    fn constant_game() {
        let s = fixture();
        let g = |_: usize, _: usize, _: usize| int(3);
        let sol = reaction_game_value(&s, &g, 0);
        assert!(sol.node_gaps.is_empty());
        assert_eq!(sol.value_at_start()[0], int(3));
        let cert = reaction_game_saddle(&s, &g, 0, &rat(1, 20), &Guards::default()).unwrap();
        assert_eq!(cert.certified_gap, int(0));
    }

    #[test]
    fn delay_versus_stop() {
        // Whoever stops alone hands the other a head start, so both wait for the horizon.
        let s = fixture();
        let g = |r: usize, q: usize, _: usize| int(r as i64) - int(q as i64);
        let sol = reaction_game_value(&s, &g, 0);
        assert_eq!(sol.value_at_start()[0], int(0));
        let cert = reaction_game_saddle(&s, &g, 0, &rat(1, 20), &Guards::default()).unwrap();
        assert_eq!(cert.minimizer.initial, StoppingTime::constant(2, 2));
        assert_eq!(cert.maximizer.initial, StoppingTime::constant(2, 2));
        assert_eq!(cert.certified_gap, int(0));
    }

    #[test]
    fn slots_permute_consistently() {
        let s = fixture();
        let u = PayoffField::from_fn(3, &s, |t, w| int((t[0] * 2 + t[1] * 5 + t[2] + w) as i64 % 7));
        let a = ReactionGameSpec::new(&u, 1, 0, 2).unwrap();
        let relabeled = PayoffField::from_fn(3, &s, |t, w| u.get(&[t[2], t[0], t[1]], w).clone());
        let b = ReactionGameSpec::new(&relabeled, 0, 2, 1).unwrap();
        for t in 0..3 {
            let va = reaction_game_value(&s, &a.at(t), t).value_at_start();
            let vb = reaction_game_value(&s, &b.at(t), t).value_at_start();
            assert_eq!(va, vb);
        }
    }
}

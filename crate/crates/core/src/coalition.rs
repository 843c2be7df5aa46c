//! One player maximizing against the other two acting as a minimizing coalition.
//!
//! Everything is computed in a canonical slot order (leader, first member, second
//! member), where the members keep their relative player order. Assembled strategies
//! are mapped back to actual player indices.

use std::cell::RefCell;

use num::{Signed, Zero};

use crate::classic::{dynkin, joint_inf_pair, snell_process, Direction};
use crate::error::{Result, StopGameError};
use crate::guard::Guards;
use crate::payoff::PayoffField;
use crate::space::{AdaptedProcess, FilteredSpace, RandomVariable, Real, StoppingTime};
use crate::strategy::{Observation, PhiMap, StopRule, StrategyOrder3};
use crate::two_player::{build_coop_family, build_pair_family, build_single_family, Family, PairEntry, SingleEntry};
use crate::verify::deviation_gap;
use crate::zero_sum2::{reaction_game_value, ReactionGameSpec};

/// Actual player index of each role: `[leader, first member, second member]`.
pub fn roles_for(leader: usize) -> [usize; 3] {
    let mut members = (0..3).filter(|&p| p != leader);
    [leader, members.next().expect("three players"), members.next().expect("three players")]
}

/// Stop times seen by one player, keyed by role.
pub(crate) fn seen_by_role(roles: &[usize; 3], me: usize, obs: Option<Observation>) -> [Option<usize>; 3] {
    let others: Vec<usize> = (0..3).filter(|&p| p != roles[me]).collect();
    let role_of = |p: usize| roles.iter().position(|&q| q == p).expect("player has a role");
    let mut seen = [None; 3];
    match obs {
        None => {}
        Some(Observation::A(s)) => seen[role_of(others[0])] = Some(s),
        Some(Observation::B(s)) => seen[role_of(others[1])] = Some(s),
        Some(Observation::Both(s, t)) => {
            seen[role_of(others[0])] = Some(s);
            seen[role_of(others[1])] = Some(t);
        }
    }
    seen
}

/// Builds the strategy of the player in role `me` from a rule on role-keyed observations.
pub(crate) fn strategy_for_role(
    space: &FilteredSpace,
    roles: &[usize; 3],
    me: usize,
    initial: StoppingTime,
    rule: impl Fn([Option<usize>; 3], usize) -> usize,
) -> StrategyOrder3 {
    StrategyOrder3::from_fn(space, initial, |obs, w| rule(seen_by_role(roles, me, Some(obs)), w))
}

#[derive(Debug, Clone)]
pub struct CoalitionFamilies {
    /// Cooperative minimizing pair of the members after the leader stops.
    pub coop: Family<PairEntry>,
    /// Leader against the second member after the first member stops.
    pub after_first: Family<PairEntry>,
    /// Leader against the first member after the second member stops.
    pub after_second: Family<PairEntry>,
    /// Leader alone after both members stop together.
    pub leader_single: Family<SingleEntry>,
    /// First member alone after the leader and second member stop together.
    pub first_single: Family<SingleEntry>,
    /// Second member alone after the leader and first member stop together.
    pub second_single: Family<SingleEntry>,
}

impl CoalitionFamilies {
    /// Largest window certificate divided by its bound, per family, as (name, gap, bound).
    pub fn window_report(&self) -> Vec<(&'static str, Real, Real)> {
        fn worst<E>(f: &Family<E>, gap: impl Fn(&E) -> Real) -> Real {
            f.entries.iter().map(|(_, e)| gap(e)).fold(Real::zero(), Real::max)
        }
        vec![
            ("coop", worst(&self.coop, |e| e.window_gap.clone()), self.coop.bound.clone()),
            ("after_first", worst(&self.after_first, |e| e.window_gap.clone()), self.after_first.bound.clone()),
            ("after_second", worst(&self.after_second, |e| e.window_gap.clone()), self.after_second.bound.clone()),
            ("leader_single", worst(&self.leader_single, |e| e.window_gap.clone()), self.leader_single.bound.clone()),
            ("first_single", worst(&self.first_single, |e| e.window_gap.clone()), self.first_single.bound.clone()),
            ("second_single", worst(&self.second_single, |e| e.window_gap.clone()), self.second_single.bound.clone()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct CoalitionComponents {
    pub roles: [usize; 3],
    /// Payoff in canonical slot order.
    pub payoff: PayoffField,
    pub mu: StoppingTime,
    pub eps: Real,
    pub h: Real,
    pub x: AdaptedProcess,
    pub y2: AdaptedProcess,
    pub y3: AdaptedProcess,
    pub y: AdaptedProcess,
    pub z12: AdaptedProcess,
    pub z13: AdaptedProcess,
    pub z23: AdaptedProcess,
    pub v: AdaptedProcess,
    pub rho_hat: StoppingTime,
    pub theta_hat: StoppingTime,
    /// Outcomes where the first member carries the minimizing stop.
    pub a: Vec<bool>,
    pub convention_gap: Real,
    /// Nodes of the two reaction games without a pure saddle, over all start times.
    pub reaction_node_gaps: usize,
    pub families: CoalitionFamilies,
}

fn require_le(lo: &AdaptedProcess, hi: &AdaptedProcess, what: &str) -> Result<()> {
    for (k, (a, b)) in lo.rows().iter().zip(hi.rows()).enumerate() {
        if let Some(w) = (0..a.len()).find(|&w| a[w] > b[w]) {
            return Err(StopGameError::TheoremViolation(format!(
                "{what} fails at time index {k}, outcome {w}: {} > {}",
                a[w], b[w]
            )));
        }
    }
    Ok(())
}

/// Builds all processes, stopping times and families for the game where `leader`
/// maximizes `u` against the other two, started at `mu`.
pub fn build_components(
    space: &FilteredSpace,
    u: &PayoffField,
    leader: usize,
    mu: &StoppingTime,
    eps: &Real,
    h: &Real,
    guards: &Guards,
) -> Result<CoalitionComponents> {
    if u.players() != 3 || leader > 2 {
        return Err(StopGameError::Unsupported("coalition game needs a three-slot payoff and a leader in 0..3".into()));
    }
    mu.validate(space)?;
    let bad = u.check_adapted(space).len();
    if bad > 0 {
        return Err(StopGameError::NotAdapted(bad));
    }
    let roles = roles_for(leader);
    let canon = PayoffField::from_fn(3, space, |t, w| {
        let mut actual = [0; 3];
        for (role, &p) in roles.iter().enumerate() {
            actual[p] = t[role];
        }
        u.get(&actual, w).clone()
    });
    let n = space.num_outcomes();
    let times = space.num_times();
    let at = |r: usize, s: usize, t: usize, w: usize| canon.get(&[r, s, t], w).clone();

    let mut x_rows = Vec::with_capacity(times);
    for t in 0..times {
        let jp = joint_inf_pair(space, &|s, q, w| at(t, s, q, w), guards)?;
        x_rows.push(jp.open_value().row(t).to_vec());
    }
    let x = AdaptedProcess::from_rows(x_rows);

    let spec2 = ReactionGameSpec::new(&canon, 1, 0, 2)?;
    let spec3 = ReactionGameSpec::new(&canon, 2, 0, 1)?;
    let mut node_gaps = 0;
    let mut reaction_rows = |spec: &ReactionGameSpec| -> AdaptedProcess {
        let rows = (0..times)
            .map(|t| {
                let sol = reaction_game_value(space, &spec.at(t), t);
                node_gaps += sol.node_gaps.len();
                sol.value.row(t).to_vec()
            })
            .collect();
        AdaptedProcess::from_rows(rows)
    };
    let y2 = reaction_rows(&spec2);
    let y3 = reaction_rows(&spec3);
    let y = y2.zip_with(&y3, |a, b| a.clone().min(b.clone()));

    let frozen_snell = |dir: Direction, f: &dyn Fn(usize, usize, usize) -> Real| -> AdaptedProcess {
        let rows = (0..times).map(|t| snell_process(space, dir, |r, w| f(r, t, w)).row(t).to_vec()).collect();
        AdaptedProcess::from_rows(rows)
    };
    let z23 = frozen_snell(Direction::Sup, &|r, t, w| at(r, t, t, w));
    let z13 = frozen_snell(Direction::Inf, &|r, t, w| at(t, r, t, w));
    let z12 = frozen_snell(Direction::Inf, &|r, t, w| at(t, t, r, w));

    require_le(&x, &z12, "X <= Z12")?;
    require_le(&z12, &y2, "Z12 <= Y2")?;
    require_le(&x, &z13, "X <= Z13")?;
    require_le(&z13, &y3, "Z13 <= Y3")?;
    require_le(&y2, &z23, "Y2 <= Z23")?;
    require_le(&y3, &z23, "Y3 <= Z23")?;
    require_le(&x, &y, "X <= Y")?;

    let d = dynkin(space, &x, &y, eps, mu)?;
    let a = (0..n)
        .map(|w| {
            let k = d.stop_min.get(w);
            d.value.get(k, w) >= &(y2.get(k, w) - eps)
        })
        .collect();

    let phi = PhiMap::new(space.grid(), h)?;
    let neg = |f: &dyn Fn(usize, usize, usize, usize) -> Real, r, s, t, w| -f(r, s, t, w);
    let after_first_u = |r: usize, q: usize, t: usize, w: usize| at(r, t, q, w);
    let after_second_u = |r: usize, q: usize, t: usize, w: usize| at(r, q, t, w);
    let families = CoalitionFamilies {
        coop: build_coop_family(space, &phi, &|s, q, t, w| at(t, s, q, w), eps, guards)?,
        after_first: build_pair_family(
            space,
            &phi,
            &after_first_u,
            &|r, q, t, w| neg(&after_first_u, r, q, t, w),
            eps,
            guards,
        )?,
        after_second: build_pair_family(
            space,
            &phi,
            &after_second_u,
            &|r, q, t, w| neg(&after_second_u, r, q, t, w),
            eps,
            guards,
        )?,
        leader_single: build_single_family(space, &phi, Direction::Sup, &|r, t, w| at(r, t, t, w), eps)?,
        first_single: build_single_family(space, &phi, Direction::Inf, &|r, t, w| at(t, r, t, w), eps)?,
        second_single: build_single_family(space, &phi, Direction::Inf, &|r, t, w| at(t, t, r, w), eps)?,
    };

    Ok(CoalitionComponents {
        roles,
        payoff: canon,
        mu: mu.clone(),
        eps: eps.clone(),
        h: h.clone(),
        x,
        y2,
        y3,
        y,
        z12,
        z13,
        z23,
        v: d.value,
        rho_hat: d.stop_max,
        theta_hat: d.stop_min,
        a,
        convention_gap: d.convention_gap,
        reaction_node_gaps: node_gaps,
        families,
    })
}

/// Strategies indexed by actual player.
pub type Triple = [StrategyOrder3; 3];

/// Leader reaction: the pair families after one member stops, the single family after both stop together.
fn leader_rule(f: &CoalitionFamilies, seen: [Option<usize>; 3], w: usize) -> Result<usize> {
    Ok(match (seen[1], seen[2]) {
        (Some(s), None) => f.after_first.lookup(s)?.first.initial.get(w),
        (None, Some(t)) => f.after_second.lookup(t)?.first.initial.get(w),
        (Some(s), Some(t)) if s < t => f.after_first.lookup(s)?.first.react[t].get(w),
        (Some(s), Some(t)) if s > t => f.after_second.lookup(t)?.first.react[s].get(w),
        (Some(s), Some(_)) => f.leader_single.lookup(s)?.rule.get(w),
        (None, None) => unreachable!("reactions always follow an observation"),
    })
}

fn first_rule(f: &CoalitionFamilies, seen: [Option<usize>; 3], w: usize) -> Result<usize> {
    Ok(match (seen[0], seen[2]) {
        (Some(r), None) => f.coop.lookup(r)?.first.initial.get(w),
        (None, Some(t)) => f.after_second.lookup(t)?.second.initial.get(w),
        (Some(s), Some(t)) if s < t => f.coop.lookup(s)?.first.react[t].get(w),
        (Some(s), Some(t)) if s > t => f.after_second.lookup(t)?.second.react[s].get(w),
        (Some(s), Some(_)) => f.first_single.lookup(s)?.rule.get(w),
        (None, None) => unreachable!("reactions always follow an observation"),
    })
}

fn second_rule(f: &CoalitionFamilies, seen: [Option<usize>; 3], w: usize) -> Result<usize> {
    Ok(match (seen[0], seen[1]) {
        (Some(r), None) => f.coop.lookup(r)?.second.initial.get(w),
        (None, Some(t)) => f.after_first.lookup(t)?.second.initial.get(w),
        (Some(s), Some(t)) if s < t => f.coop.lookup(s)?.second.react[t].get(w),
        (Some(s), Some(t)) if s > t => f.after_first.lookup(t)?.second.react[s].get(w),
        (Some(s), Some(_)) => f.second_single.lookup(s)?.rule.get(w),
        (None, None) => unreachable!("reactions always follow an observation"),
    })
}

type RoleRule = fn(&CoalitionFamilies, [Option<usize>; 3], usize) -> Result<usize>;

/// Strategy of one role built from its reaction rule, surfacing lookup errors.
pub(crate) fn checked_strategy(
    space: &FilteredSpace,
    roles: &[usize; 3],
    me: usize,
    initial: StoppingTime,
    rule: impl Fn([Option<usize>; 3], usize) -> Result<usize>,
) -> Result<StrategyOrder3> {
    let failure = RefCell::new(None);
    let strategy = strategy_for_role(space, roles, me, initial, |seen, w| match rule(seen, w) {
        Ok(k) => k,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            space.terminal()
        }
    });
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(strategy),
    }
}

/// The leader stops at the maximizer's hitting time; the member picked by `A` stops
/// at the minimizer's hitting time and the other waits for the horizon.
pub fn assemble_saddle(space: &FilteredSpace, c: &CoalitionComponents) -> Result<Triple> {
    let n = space.num_outcomes();
    let last = space.terminal();
    let first_initial = StoppingTime((0..n).map(|w| if c.a[w] { c.theta_hat.get(w) } else { last }).collect());
    let second_initial = StoppingTime((0..n).map(|w| if c.a[w] { last } else { c.theta_hat.get(w) }).collect());
    let rules: [(StoppingTime, RoleRule); 3] =
        [(c.rho_hat.clone(), leader_rule), (first_initial, first_rule), (second_initial, second_rule)];
    let mut by_role = Vec::with_capacity(3);
    for (me, (initial, rule)) in rules.into_iter().enumerate() {
        by_role.push(checked_strategy(space, &c.roles, me, initial, |seen, w| rule(&c.families, seen, w))?);
    }
    let mut out: Vec<Option<StrategyOrder3>> = vec![None, None, None];
    for (role, s) in by_role.into_iter().enumerate() {
        out[c.roles[role]] = Some(s);
    }
    let [a, b, d] = [out[0].take(), out[1].take(), out[2].take()];
    Ok([a.expect("role filled"), b.expect("role filled"), d.expect("role filled")])
}

#[derive(Debug, Clone)]
pub struct SaddleCertificate {
    pub on_path: RandomVariable,
    /// The Dynkin value stopped at the start.
    pub v_mu: RandomVariable,
    /// Best the leader can reach by deviating alone.
    pub leader_best: RandomVariable,
    /// Lowest the coalition can force by deviating jointly.
    pub coalition_best: RandomVariable,
    pub leader_excess: Real,
    pub coalition_shortfall: Real,
    pub on_path_distance: Real,
    /// Largest improvement for either side over the on-path value.
    pub saddle_gap: Real,
    pub leader_bound: Real,
    pub coalition_bound: Real,
    pub on_path_bound: Real,
    pub saddle_bound: Real,
}

impl SaddleCertificate {
    pub fn passes(&self) -> bool {
        self.leader_excess <= self.leader_bound
            && self.coalition_shortfall <= self.coalition_bound
            && self.on_path_distance <= self.on_path_bound
            && self.saddle_gap <= self.saddle_bound
    }
}

fn eps_times(eps: &Real, k: i64) -> Real {
    eps * Real::from_integer(k.into())
}

/// Exact leader and joint-coalition deviation values for an assembled triple.
pub fn certify_saddle(space: &FilteredSpace, c: &CoalitionComponents, triple: &Triple, guards: &Guards) -> Result<SaddleCertificate> {
    let roles = c.roles;
    let payoff = |t: &[usize], w: usize| c.payoff.get(&[t[roles[0]], t[roles[1]], t[roles[2]]], w).clone();
    let profile: [&dyn StopRule; 3] = [&triple[0], &triple[1], &triple[2]];
    let leader = deviation_gap(space, &profile, &[roles[0]], Direction::Sup, &payoff, &c.mu, guards)?;
    let coalition = deviation_gap(space, &profile, &[roles[1], roles[2]], Direction::Inf, &payoff, &c.mu, guards)?;
    let v_mu = c.v.stopped(&c.mu);
    let on_path = leader.on_path.clone();
    let leader_excess = leader.value.zip_with(&v_mu, |a, b| a - b).max();
    let coalition_shortfall = v_mu.zip_with(&coalition.value, |a, b| a - b).max();
    let on_path_distance = on_path.zip_with(&v_mu, |a, b| (a - b).abs()).max();
    let saddle_gap = leader.max_gap().max(coalition.max_gap());
    Ok(SaddleCertificate {
        on_path,
        v_mu,
        leader_best: leader.value,
        coalition_best: coalition.value,
        leader_excess,
        coalition_shortfall,
        on_path_distance,
        saddle_gap,
        leader_bound: eps_times(&c.eps, 9),
        coalition_bound: eps_times(&c.eps, 5),
        on_path_bound: eps_times(&c.eps, 8),
        saddle_bound: eps_times(&c.eps, 17),
    })
}

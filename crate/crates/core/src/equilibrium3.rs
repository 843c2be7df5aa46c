//! Three-player Nash assembly from two-player equilibria and coalition saddles.
//!
//! Each player `i` gets a hitting time `mu[i]`; the player whose hitting time comes
//! first (ties to the lower index) stops there, and the other two follow either the
//! coalition saddle of that player started `delta` later, a two-player equilibrium
//! looked up on the `phi_h` grid, or a punishing single optimizer.

use num::{Signed, Zero};

use crate::classic::{dynkin_value, joint_inf_pair, Direction};
use crate::coalition::{assemble_saddle, build_components, certify_saddle, CoalitionComponents, SaddleCertificate, Triple};
use crate::error::{Result, StopGameError};
use crate::guard::Guards;
use crate::payoff::PayoffField;
use crate::space::{AdaptedProcess, FilteredSpace, RandomVariable, Real, StoppingTime};
use crate::strategy::{validate_from, Observation, PhiMap, StopRule, StrategyOrder3};
use crate::two_player::{build_pair_family, build_single_family, pair_on_path, Family, PairEntry, SingleEntry};
use crate::verify::{exact_best_response, BestResponseResult};

/// The other two players in increasing order.
pub fn others(i: usize) -> [usize; 2] {
    match i {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Time tuple with player `a` at `ta` and the remaining two (in increasing order) at `r`, `q`.
fn tuple(a: usize, ta: usize, r: usize, q: usize) -> [usize; 3] {
    let [j, k] = others(a);
    let mut t = [0; 3];
    t[a] = ta;
    t[j] = r;
    t[k] = q;
    t
}

#[derive(Debug, Clone)]
pub struct PlayerProcesses {
    pub x: AdaptedProcess,
    pub z: AdaptedProcess,
    /// `(j, Y^{i,j})` for each other player `j` in increasing order.
    pub y_after: [(usize, AdaptedProcess); 2],
    /// Minimum of the two `Y^{i,j}` plus epsilon.
    pub y: AdaptedProcess,
    pub v: AdaptedProcess,
    pub mu: StoppingTime,
}

/// Families shared by all three players.
#[derive(Debug, Clone)]
pub struct SharedFamilies {
    /// `pairs[i]`: nonzero-sum equilibrium of the other two after `i` stops; `first` is the lower index.
    pub pairs: Vec<Family<PairEntry>>,
    /// `punish[m][p]`: player `p` alone minimizing `U^m` after the other two stop together.
    pub punish: Vec<Vec<Option<Family<SingleEntry>>>>,
}

impl SharedFamilies {
    /// Worst window certificate per family, as (name, gap, bound).
    pub fn window_report(&self) -> Vec<(String, Real, Real)> {
        fn worst<E>(f: &Family<E>, gap: impl Fn(&E) -> Real) -> Real {
            f.entries.iter().map(|(_, e)| gap(e)).fold(Real::zero(), Real::max)
        }
        let mut out = Vec::new();
        for (i, f) in self.pairs.iter().enumerate() {
            out.push((format!("pairs[{i}]"), worst(f, |e| e.window_gap.clone()), f.bound.clone()));
        }
        for (m, row) in self.punish.iter().enumerate() {
            for (p, f) in row.iter().enumerate() {
                if let Some(f) = f {
                    out.push((format!("punish[{m}][{p}]"), worst(f, |e| e.window_gap.clone()), f.bound.clone()));
                }
            }
        }
        out
    }

    /// Component of `pairs[i]` belonging to player `p`.
    fn pair_part(entry: &PairEntry, i: usize, p: usize) -> &crate::strategy::StrategyOrder2 {
        if others(i)[0] == p {
            &entry.first
        } else {
            &entry.second
        }
    }
}

pub fn build_shared_families(
    space: &FilteredSpace,
    payoffs: &[PayoffField; 3],
    phi: &PhiMap,
    eps: &Real,
    guards: &Guards,
) -> Result<SharedFamilies> {
    let mut pairs = Vec::with_capacity(3);
    for i in 0..3 {
        let [j, k] = others(i);
        let u1 = |r: usize, q: usize, t: usize, w: usize| payoffs[j].get(&tuple(i, t, r, q), w).clone();
        let u2 = |r: usize, q: usize, t: usize, w: usize| payoffs[k].get(&tuple(i, t, r, q), w).clone();
        pairs.push(build_pair_family(space, phi, &u1, &u2, eps, guards)?);
    }
    let mut punish = vec![vec![None, None, None], vec![None, None, None], vec![None, None, None]];
    for (m, row) in punish.iter_mut().enumerate() {
        for (p, slot) in row.iter_mut().enumerate() {
            if m == p {
                continue;
            }
            let h = |r: usize, t: usize, w: usize| {
                let mut tt = [t; 3];
                tt[p] = r;
                payoffs[m].get(&tt, w).clone()
            };
            *slot = Some(build_single_family(space, phi, Direction::Inf, &h, eps)?);
        }
    }
    Ok(SharedFamilies { pairs, punish })
}

fn check_le(lo: &AdaptedProcess, hi: &AdaptedProcess, what: &str) -> Result<()> {
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

/// Value at `t` of the pair equilibrium after `stopper` stops at `t`, evaluated in `U^owner`.
fn pair_evaluation(
    space: &FilteredSpace,
    families: &SharedFamilies,
    payoff: &PayoffField,
    stopper: usize,
) -> Result<AdaptedProcess> {
    let mut rows = Vec::with_capacity(space.num_times());
    for t in 0..space.num_times() {
        let entry = families.pairs[stopper].lookup(t)?;
        let g = |r: usize, q: usize, w: usize| payoff.get(&tuple(stopper, t, r, q), w).clone();
        rows.push(pair_on_path(space, entry, &g, t)?.0);
    }
    Ok(AdaptedProcess::from_rows(rows))
}

pub fn build_player_processes(
    space: &FilteredSpace,
    payoffs: &[PayoffField; 3],
    families: &SharedFamilies,
    i: usize,
    theta: &StoppingTime,
    eps: &Real,
    guards: &Guards,
) -> Result<PlayerProcesses> {
    let u = &payoffs[i];
    let mut x_rows = Vec::with_capacity(space.num_times());
    for t in 0..space.num_times() {
        let jp = joint_inf_pair(space, &|r, q, w| u.get(&tuple(i, t, r, q), w).clone(), guards)?;
        x_rows.push(jp.open_value().row(t).to_vec());
    }
    let x = AdaptedProcess::from_rows(x_rows);
    let z = pair_evaluation(space, families, u, i)?;
    let [j, k] = others(i);
    let yj = pair_evaluation(space, families, u, j)?;
    let yk = pair_evaluation(space, families, u, k)?;
    let y = yj.zip_with(&yk, |a, b| a.clone().min(b.clone()) + eps);
    check_le(&x, &z, &format!("X <= Z for player {i}"))?;
    check_le(&x, &y, &format!("X <= Y for player {i}"))?;
    let v = dynkin_value(space, &x, &y, theta)?;
    let mu = space.first_hit(theta, |t, w| v.get(t, w) <= &(z.get(t, w) + eps));
    Ok(PlayerProcesses { x, z, y_after: [(j, yj), (k, yk)], y, v, mu })
}

/// Grid steps per outcome, constant on atoms of `F_theta`: the largest shift keeping
/// both the conditional oscillation of `Z` and the conditional move of `V` below epsilon.
pub fn select_delta(space: &FilteredSpace, players: &[PlayerProcesses; 3], theta: &StoppingTime, eps: &Real) -> Result<Vec<usize>> {
    let n = space.num_outcomes();
    let last = space.terminal();
    let max_steps = last.max(1);
    let mut ok_by_steps = Vec::with_capacity(max_steps);
    for d in 1..=max_steps {
        let mut ok = vec![true; n];
        for p in players {
            let osc = RandomVariable(
                (0..n)
                    .map(|w| {
                        let m = p.mu.get(w);
                        let base = p.z.get(m, w);
                        (0..=d).map(|r| (p.z.get((m + r).min(last), w) - base).abs()).fold(Real::zero(), Real::max)
                    })
                    .collect(),
            );
            let jump = RandomVariable(
                (0..n)
                    .map(|w| {
                        let m = p.mu.get(w);
                        (p.v.get((m + d).min(last), w) - p.v.get(m, w)).abs()
                    })
                    .collect(),
            );
            let osc = space.cond_exp_at(&osc, theta)?;
            let jump = space.cond_exp_at(&jump, theta)?;
            for w in 0..n {
                ok[w] &= &osc[w] < eps && &jump[w] < eps;
            }
        }
        ok_by_steps.push(ok);
    }
    let mut delta = vec![0; n];
    for atom in space.stopped_atoms(theta) {
        let w0 = atom[0];
        let d = (1..=max_steps)
            .rev()
            .find(|&d| ok_by_steps[d - 1][w0])
            .ok_or(StopGameError::NoValidDelta { outcome: w0 })?;
        for w in atom {
            delta[w] = d;
        }
    }
    Ok(delta)
}

/// Player whose hitting time comes first, ties going to the lower index.
pub fn partition_abc(mu: &[StoppingTime; 3]) -> Vec<usize> {
    (0..mu[0].values().len())
        .map(|w| (0..3).min_by_key(|&i| (mu[i].get(w), i)).expect("three players"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct AssemblyContext {
    pub theta: StoppingTime,
    pub eps: Real,
    pub h: Real,
    pub players: [PlayerProcesses; 3],
    pub delta: Vec<usize>,
    /// `mu[i] + delta`, the start of player `i`'s coalition saddle.
    pub saddle_start: [StoppingTime; 3],
    /// Per outcome, the player whose event (A, B or C) holds.
    pub event: Vec<usize>,
    pub saddles: Vec<Triple>,
    pub saddle_certificates: Vec<SaddleCertificate>,
    pub saddle_components: Vec<CoalitionComponents>,
    pub families: SharedFamilies,
}

impl AssemblyContext {
    fn reaction(&self, p: usize, obs: Observation, w: usize) -> Result<usize> {
        let e = self.event[w];
        let start = self.saddle_start[e].get(w);
        let [j, k] = others(p);
        let f = &self.families;
        match obs {
            Observation::A(t) | Observation::B(t) => {
                let stopper = if matches!(obs, Observation::A(_)) { j } else { k };
                if e != p && t >= start {
                    let seen = if stopper == j { [Some(t), None] } else { [None, Some(t)] };
                    return Ok(self.saddles[e][p].plan(&seen, w));
                }
                Ok(SharedFamilies::pair_part(f.pairs[stopper].lookup(t)?, stopper, p).initial.get(w))
            }
            Observation::Both(s, t) => {
                if e != p && start <= s.min(t) {
                    return Ok(self.saddles[e][p].plan(&[Some(s), Some(t)], w));
                }
                let mu_e = self.players[e].mu.get(w);
                if e != p && s == t && s == mu_e {
                    let m = 3 - p - e;
                    let fam = f.punish[m][p].as_ref().expect("punishing family for distinct players");
                    return Ok(fam.lookup(t)?.rule.get(w));
                }
                if s <= t {
                    Ok(SharedFamilies::pair_part(f.pairs[j].lookup(s)?, j, p).react[t].get(w))
                } else {
                    Ok(SharedFamilies::pair_part(f.pairs[k].lookup(t)?, k, p).react[s].get(w))
                }
            }
        }
    }
}

pub fn assemble_profile(space: &FilteredSpace, ctx: &AssemblyContext) -> Result<Triple> {
    let n = space.num_outcomes();
    let mut out = Vec::with_capacity(3);
    for p in 0..3 {
        let initial = StoppingTime(
            (0..n)
                .map(|w| {
                    let e = ctx.event[w];
                    if e == p {
                        ctx.players[p].mu.get(w)
                    } else {
                        ctx.saddles[e][p].initial.get(w)
                    }
                })
                .collect(),
        );
        let failure = std::cell::RefCell::new(None);
        let strategy = StrategyOrder3::from_fn(space, initial, |obs, w| match ctx.reaction(p, obs, w) {
            Ok(k) => k,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                space.terminal()
            }
        });
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let violations = validate_from(&strategy, strategy.validate(space), &ctx.theta);
        if !violations.is_empty() {
            return Err(StopGameError::InvalidStrategy(violations));
        }
        out.push(strategy);
    }
    let [a, b, c]: [StrategyOrder3; 3] = out.try_into().expect("three strategies");
    Ok([a, b, c])
}

pub fn build_context(
    space: &FilteredSpace,
    payoffs: &[PayoffField; 3],
    theta: &StoppingTime,
    eps: &Real,
    h: &Real,
    guards: &Guards,
) -> Result<AssemblyContext> {
    if payoffs.iter().any(|u| u.players() != 3) {
        return Err(StopGameError::Unsupported("three-player assembly needs three-slot payoffs".into()));
    }
    theta.validate(space)?;
    let bad: usize = payoffs.iter().map(|u| u.check_adapted(space).len()).sum();
    if bad > 0 {
        return Err(StopGameError::NotAdapted(bad));
    }
    let phi = PhiMap::new(space.grid(), h)?;
    let families = build_shared_families(space, payoffs, &phi, eps, guards)?;
    let mut players = Vec::with_capacity(3);
    for i in 0..3 {
        players.push(build_player_processes(space, payoffs, &families, i, theta, eps, guards)?);
    }
    let players: [PlayerProcesses; 3] = players.try_into().expect("three players");
    let delta = select_delta(space, &players, theta, eps)?;
    let last = space.terminal();
    let saddle_start = [0, 1, 2].map(|i| players[i].mu.shifted(&delta, last));
    let event = partition_abc(&[players[0].mu.clone(), players[1].mu.clone(), players[2].mu.clone()]);
    let mut saddles = Vec::with_capacity(3);
    let mut saddle_certificates = Vec::with_capacity(3);
    let mut saddle_components = Vec::with_capacity(3);
    for i in 0..3 {
        let c = build_components(space, &payoffs[i], i, &saddle_start[i], eps, h, guards)?;
        let triple = assemble_saddle(space, &c)?;
        saddle_certificates.push(certify_saddle(space, &c, &triple, guards)?);
        saddles.push(triple);
        saddle_components.push(c);
    }
    Ok(AssemblyContext {
        theta: theta.clone(),
        eps: eps.clone(),
        h: h.clone(),
        players,
        delta,
        saddle_start,
        event,
        saddles,
        saddle_certificates,
        saddle_components,
        families,
    })
}

#[derive(Debug, Clone)]
pub struct EquilibriumCertificate {
    pub players: Vec<BestResponseResult>,
    pub bound: Real,
}

impl EquilibriumCertificate {
    pub fn gaps(&self) -> Vec<Real> {
        self.players.iter().map(BestResponseResult::max_gap).collect()
    }

    pub fn max_gap(&self) -> Real {
        self.gaps().into_iter().fold(Real::zero(), Real::max)
    }

    pub fn passes(&self) -> bool {
        self.max_gap() <= self.bound
    }
}

/// Exact best-response gaps of every player at `theta`, against a bound of 13 epsilon.
pub fn certify_nash(
    space: &FilteredSpace,
    profile: &Triple,
    payoffs: &[PayoffField; 3],
    theta: &StoppingTime,
    eps: &Real,
    guards: &Guards,
) -> Result<EquilibriumCertificate> {
    let rules: [&dyn StopRule; 3] = [&profile[0], &profile[1], &profile[2]];
    let mut players = Vec::with_capacity(3);
    for (i, u) in payoffs.iter().enumerate() {
        let p = |t: &[usize], w: usize| u.get(t, w).clone();
        players.push(exact_best_response(space, &rules, i, &p, theta, guards)?);
    }
    Ok(EquilibriumCertificate { players, bound: eps * Real::from_integer(13.into()) })
}

#[derive(Debug, Clone)]
pub struct ThreePlayerSolution {
    pub context: AssemblyContext,
    pub profile: Triple,
    pub certificate: EquilibriumCertificate,
}

/// Full pipeline: processes, delta, saddles, assembly and certification.
pub fn solve_three(
    space: &FilteredSpace,
    payoffs: &[PayoffField; 3],
    theta: &StoppingTime,
    eps: &Real,
    h: &Real,
    guards: &Guards,
) -> Result<ThreePlayerSolution> {
    let context = build_context(space, payoffs, theta, eps, h, guards)?;
    let profile = assemble_profile(space, &context)?;
    let certificate = certify_nash(space, &profile, payoffs, theta, eps, guards)?;
    Ok(ThreePlayerSolution { context, profile, certificate })
}

/// `E_theta[Z^i_{mu^i} 1_A + Y^{i,j}_{mu^j} 1_B + ...]`: the on-path value predicted by the events.
pub fn predicted_on_path(space: &FilteredSpace, ctx: &AssemblyContext, i: usize) -> Result<RandomVariable> {
    let n = space.num_outcomes();
    let raw = RandomVariable(
        (0..n)
            .map(|w| {
                let e = ctx.event[w];
                let at = ctx.players[e].mu.get(w);
                if e == i {
                    ctx.players[i].z.get(at, w).clone()
                } else {
                    let (_, y) = ctx.players[i].y_after.iter().find(|(j, _)| *j == e).expect("other player");
                    y.get(at, w).clone()
                }
            })
            .collect(),
    );
    space.cond_exp_at(&raw, &ctx.theta)
}

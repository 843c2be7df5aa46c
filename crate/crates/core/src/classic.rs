//! Snell envelopes, the cooperative two-stop dynamic program, and Dynkin games.

use num::{Signed, Zero};

use crate::error::{Result, StopGameError};
use crate::guard::Guards;
use crate::space::{AdaptedProcess, FilteredSpace, RandomVariable, Real, StoppingTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sup,
    Inf,
}

impl Direction {
    pub fn pick(self, a: Real, b: Real) -> Real {
        match self {
            Direction::Sup => a.max(b),
            Direction::Inf => a.min(b),
        }
    }

    /// True iff `a` is strictly better than `b`.
    pub fn improves(self, a: &Real, b: &Real) -> bool {
        match self {
            Direction::Sup => a > b,
            Direction::Inf => a < b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnellResult {
    pub value: AdaptedProcess,
    /// Earliest time at or after the start where the value equals the payoff.
    pub rule: StoppingTime,
}

/// Value process of optimal stopping of `p(k, w)`, by backward induction from the terminal point.
pub fn snell_process(space: &FilteredSpace, dir: Direction, p: impl Fn(usize, usize) -> Real) -> AdaptedProcess {
    let n = space.num_outcomes();
    let last = space.terminal();
    let mut rows: Vec<Vec<Real>> = vec![Vec::new(); space.num_times()];
    rows[last] = (0..n).map(|w| p(last, w)).collect();
    for k in (0..last).rev() {
        let cont = space.cond_exp(&RandomVariable(rows[k + 1].clone()), k);
        rows[k] = (0..n).map(|w| dir.pick(p(k, w), cont[w].clone())).collect();
    }
    AdaptedProcess::from_rows(rows)
}

/// Optimal stopping of a closure-defined process, started at `from`.
pub fn snell_fn(
    space: &FilteredSpace,
    dir: Direction,
    p: impl Fn(usize, usize) -> Real,
    from: &StoppingTime,
) -> SnellResult {
    let value = snell_process(space, dir, &p);
    let rule = space.first_hit(from, |k, w| *value.get(k, w) == p(k, w));
    SnellResult { value, rule }
}

pub fn snell(space: &FilteredSpace, p: &AdaptedProcess, dir: Direction, from: &StoppingTime) -> SnellResult {
    snell_fn(space, dir, |k, w| p.get(k, w).clone(), from)
}

/// Status code of a stop in the joint program: 0 while open, `s + 1` once stopped at `s`.
type Status = usize;

const CHOICES: [(bool, bool); 4] = [(true, true), (true, false), (false, true), (false, false)];

/// Joint optimisation of two stopping times against a payoff `g(r, s, w)`.
///
/// Holds the value of every state `(time, status of each stop)` and the earliest
/// optimal decision, so an optimal pair can be read off from any start.
#[derive(Debug, Clone)]
pub struct JointPair {
    dir: Direction,
    times: usize,
    values: Vec<Vec<Real>>,
    decisions: Vec<Vec<u8>>,
}

impl JointPair {
    fn slot(&self, k: usize, a: Status, b: Status) -> usize {
        let s = self.times + 1;
        (k * s + a) * s + b
    }

    pub fn direction(&self) -> Direction {
        self.dir
    }

    /// Optimal joint value from time `k` with both stops still open.
    pub fn open_value(&self) -> AdaptedProcess {
        AdaptedProcess::from_rows((0..self.times).map(|k| self.values[self.slot(k, 0, 0)].clone()).collect())
    }

    /// The earliest optimal pair of stopping times starting at `from`.
    pub fn optimal_pair(&self, from: &StoppingTime) -> (StoppingTime, StoppingTime) {
        let n = from.values().len();
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for w in 0..n {
            let (mut a, mut b) = (0, 0);
            let mut k = from.get(w);
            while a == 0 || b == 0 {
                let (stop_a, stop_b) = CHOICES[self.decisions[self.slot(k, a, b)][w] as usize];
                if a == 0 && stop_a {
                    a = k + 1;
                }
                if b == 0 && stop_b {
                    b = k + 1;
                }
                k += 1;
            }
            first.push(a - 1);
            second.push(b - 1);
        }
        (StoppingTime(first), StoppingTime(second))
    }
}

/// Exact optimum of `E_k[g(r, s)]` over pairs of stopping times `r, s >= k`, for every `k`.
///
/// Dynamic program over (time, status of each stop); ties prefer stopping earlier,
/// in the order both / first only / second only / neither.
pub fn joint_pair(
    space: &FilteredSpace,
    dir: Direction,
    g: &dyn Fn(usize, usize, usize) -> Real,
    guards: &Guards,
) -> Result<JointPair> {
    let times = space.num_times();
    let n = space.num_outcomes();
    let s = times + 1;
    guards.check_states("joint stopping states", (times * s * s * n) as u128)?;
    let last = space.terminal();
    let mut jp = JointPair {
        dir,
        times,
        values: vec![Vec::new(); times * s * s],
        decisions: vec![Vec::new(); times * s * s],
    };
    for k in (0..times).rev() {
        for a in 0..=k {
            for b in 0..=k {
                let slot = jp.slot(k, a, b);
                let mut best: Vec<Option<Real>> = vec![None; n];
                let mut choice = vec![0u8; n];
                for (c, &(stop_a, stop_b)) in CHOICES.iter().enumerate() {
                    // A stopped player's flag is irrelevant; keep one representative per outcome.
                    if (a != 0 && !stop_a) || (b != 0 && !stop_b) {
                        continue;
                    }
                    let na = if a == 0 && stop_a { k + 1 } else { a };
                    let nb = if b == 0 && stop_b { k + 1 } else { b };
                    if k == last && (na == 0 || nb == 0) {
                        continue;
                    }
                    let vals: Vec<Real> = if na != 0 && nb != 0 {
                        (0..n).map(|w| g(na - 1, nb - 1, w)).collect()
                    } else {
                        let next = &jp.values[jp.slot(k + 1, na, nb)];
                        space.cond_exp(&RandomVariable(next.clone()), k).0
                    };
                    for (w, v) in vals.into_iter().enumerate() {
                        let take = match &best[w] {
                            None => true,
                            Some(cur) => dir.improves(&v, cur),
                        };
                        if take {
                            best[w] = Some(v);
                            choice[w] = c as u8;
                        }
                    }
                }
                jp.values[slot] = best.into_iter().map(|v| v.expect("at least one feasible choice")).collect();
                jp.decisions[slot] = choice;
            }
        }
    }
    Ok(jp)
}

/// `inf_{r,s >= k} E_k[g(r, s)]` with the coalition cooperating.
pub fn joint_inf_pair(
    space: &FilteredSpace,
    g: &dyn Fn(usize, usize, usize) -> Real,
    guards: &Guards,
) -> Result<JointPair> {
    joint_pair(space, Direction::Inf, g, guards)
}

/// Pathwise Dynkin payoff: `X_rho` if the maximizer stops first or together, else `Y_theta`.
pub fn dynkin_payoff(
    x: &AdaptedProcess,
    y: &AdaptedProcess,
    rho: &StoppingTime,
    theta: &StoppingTime,
) -> RandomVariable {
    RandomVariable(
        (0..rho.values().len())
            .map(|w| {
                let (r, t) = (rho.get(w), theta.get(w));
                if r <= t {
                    x.get(r, w).clone()
                } else {
                    y.get(t, w).clone()
                }
            })
            .collect(),
    )
}

fn check_order(x: &AdaptedProcess, y: &AdaptedProcess, from: &StoppingTime) -> Result<()> {
    match x.dominated_by(y, from) {
        Some((time, outcome)) => Err(StopGameError::OrderViolation { time, outcome }),
        None => Ok(()),
    }
}

/// `V_K = X_K`, `V_k = max(X_k, min(Y_k, E_k[V_{k+1}]))`.
pub fn dynkin_value(
    space: &FilteredSpace,
    x: &AdaptedProcess,
    y: &AdaptedProcess,
    from: &StoppingTime,
) -> Result<AdaptedProcess> {
    check_order(x, y, from)?;
    Ok(dynkin_backward(space, x, y, false))
}

/// Value under the other simultaneity convention (ties pay `Y`):
/// `V_K = Y_K`, `V_k = min(Y_k, max(X_k, E_k[V_{k+1}]))`.
pub fn dynkin_value_ties_to_min(space: &FilteredSpace, x: &AdaptedProcess, y: &AdaptedProcess) -> AdaptedProcess {
    dynkin_backward(space, x, y, true)
}

fn dynkin_backward(space: &FilteredSpace, x: &AdaptedProcess, y: &AdaptedProcess, ties_to_min: bool) -> AdaptedProcess {
    let n = space.num_outcomes();
    let last = space.terminal();
    let mut rows: Vec<Vec<Real>> = vec![Vec::new(); space.num_times()];
    rows[last] = if ties_to_min { y.row(last).to_vec() } else { x.row(last).to_vec() };
    for k in (0..last).rev() {
        let cont = space.cond_exp(&RandomVariable(rows[k + 1].clone()), k);
        rows[k] = (0..n)
            .map(|w| {
                let (xv, yv, c) = (x.get(k, w).clone(), y.get(k, w).clone(), cont[w].clone());
                if ties_to_min {
                    yv.min(xv.max(c))
                } else {
                    xv.max(yv.min(c))
                }
            })
            .collect();
    }
    AdaptedProcess::from_rows(rows)
}

/// `rho = inf{t >= mu : V_t <= X_t + eps}`, `theta = inf{t >= mu : V_t >= Y_t - eps}`.
pub fn dynkin_hitting_pair(
    space: &FilteredSpace,
    v: &AdaptedProcess,
    x: &AdaptedProcess,
    y: &AdaptedProcess,
    eps: &Real,
    mu: &StoppingTime,
) -> (StoppingTime, StoppingTime) {
    let rho = space.first_hit(mu, |k, w| v.get(k, w) <= &(x.get(k, w) + eps));
    let theta = space.first_hit(mu, |k, w| v.get(k, w) >= &(y.get(k, w) - eps));
    (rho, theta)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynkinResult {
    pub value: AdaptedProcess,
    pub stop_max: StoppingTime,
    pub stop_min: StoppingTime,
    pub epsilon: Real,
    /// Largest difference at the start between the two simultaneity conventions.
    pub convention_gap: Real,
}

pub fn dynkin(
    space: &FilteredSpace,
    x: &AdaptedProcess,
    y: &AdaptedProcess,
    eps: &Real,
    mu: &StoppingTime,
) -> Result<DynkinResult> {
    let value = dynkin_value(space, x, y, mu)?;
    let other = dynkin_value_ties_to_min(space, x, y);
    let convention_gap = (0..space.num_outcomes())
        .map(|w| {
            let k = mu.get(w);
            (value.get(k, w) - other.get(k, w)).abs()
        })
        .fold(Real::zero(), Real::max);
    let (stop_max, stop_min) = dynkin_hitting_pair(space, &value, x, y, eps, mu);
    Ok(DynkinResult { value, stop_max, stop_min, epsilon: eps.clone(), convention_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{int, rat, TimeGrid};

    fn two_step() -> FilteredSpace {
        let grid = TimeGrid::new(vec![int(0), int(1)]).unwrap();
        FilteredSpace::new(grid, vec![rat(1, 2), rat(1, 2)], vec![vec![vec![0, 1]], vec![vec![0], vec![1]]]).unwrap()
    }

    fn three_step() -> FilteredSpace {
        let grid = TimeGrid::new(vec![int(0), int(1), int(2)]).unwrap();
        FilteredSpace::new(
            grid,
            vec![rat(1, 2), rat(1, 2)],
            vec![vec![vec![0, 1]], vec![vec![0], vec![1]], vec![vec![0], vec![1]]],
        )
        .unwrap()
    }

    fn proc(rows: Vec<Vec<Real>>) -> AdaptedProcess {
        AdaptedProcess::from_rows(rows)
    }

    #[test]
    fn snell_decreasing_stops_immediately() {
        let s = three_step();
        let p = AdaptedProcess::from_fn(&s, |k, _| int(10 - k as i64));
        let r = snell(&s, &p, Direction::Sup, &StoppingTime::constant(0, 2));
        assert_eq!(r.rule, StoppingTime::constant(0, 2));
        assert_eq!(r.value.get(0, 0), &int(10));
    }

    #[test]
    fn snell_tie_prefers_earliest() {
        let s = two_step();
        let p = proc(vec![vec![int(1), int(1)], vec![int(2), int(0)]]);
        let r = snell(&s, &p, Direction::Sup, &StoppingTime::constant(0, 2));
        assert_eq!(r.value.get(0, 0), &int(1));
        assert_eq!(r.rule, StoppingTime::constant(0, 2));
    }

    #[test]
    fn snell_inf_is_negated_sup() {
        let s = three_step();
        let p = AdaptedProcess::from_fn(&s, |k, w| int((k * 3 + w) as i64 % 4));
        let neg = p.map(|v| -v);
        let from = StoppingTime::constant(0, 2);
        let sup = snell(&s, &p, Direction::Sup, &from);
        let inf = snell(&s, &neg, Direction::Inf, &from);
        assert_eq!(inf.value, sup.value.map(|v| -v));
        assert_eq!(inf.rule, sup.rule);
    }

    #[test]
    fn joint_constant_and_monotone() {
        let s = three_step();
        let g = Guards::default();
        let flat = joint_inf_pair(&s, &|_, _, _| int(4), &g).unwrap();
        assert!(flat.open_value().rows().iter().flatten().all(|v| v == &int(4)));
        assert_eq!(flat.optimal_pair(&StoppingTime::constant(0, 2)).0, StoppingTime::constant(0, 2));
        let sum = joint_inf_pair(&s, &|r, t, _| int((r + t) as i64), &g).unwrap();
        let from = StoppingTime::constant(1, 2);
        assert_eq!(sum.optimal_pair(&from), (from.clone(), from.clone()));
        assert_eq!(sum.open_value().get(1, 0), &int(2));
    }

    #[test]
    fn joint_needs_both_to_wait() {
        // Payoff is low only when both wait for the horizon on outcome 0.
        let s = three_step();
        let g = |r: usize, t: usize, w: usize| if r == 2 && t == 2 && w == 0 { int(-4) } else { int(0) };
        let jp = joint_inf_pair(&s, &g, &Guards::default()).unwrap();
        assert_eq!(jp.open_value().get(0, 0), &int(-2));
        let (a, b) = jp.optimal_pair(&StoppingTime::constant(0, 2));
        assert_eq!(a.get(0), 2);
        assert_eq!(b.get(0), 2);
        assert_eq!(a.get(1), 1);
    }

    #[test]
    fn dynkin_fixture_d1() {
        let s = two_step();
        let x = proc(vec![vec![int(0), int(0)], vec![int(2), int(0)]]);
        let y = proc(vec![vec![int(1), int(1)], vec![int(3), int(1)]]);
        let mu = StoppingTime::constant(0, 2);
        let r = dynkin(&s, &x, &y, &rat(1, 10), &mu).unwrap();
        assert_eq!(r.value.get(0, 0), &int(1));
        assert_eq!(r.stop_max, StoppingTime::constant(1, 2));
        assert_eq!(r.stop_min, StoppingTime::constant(0, 2));
    }

    #[test]
    fn dynkin_squeeze_and_horizon() {
        let s = three_step();
        let x = AdaptedProcess::from_fn(&s, |k, w| int((k + w) as i64));
        let r = dynkin(&s, &x, &x, &rat(1, 10), &StoppingTime::constant(0, 2)).unwrap();
        assert_eq!(r.value, x);
        assert_eq!(r.stop_max, StoppingTime::constant(0, 2));
        assert_eq!(r.stop_min, StoppingTime::constant(0, 2));

        let zero = AdaptedProcess::from_fn(&s, |_, _| int(0));
        let one = AdaptedProcess::from_fn(&s, |_, _| int(1));
        let v = dynkin_value(&s, &zero, &one, &StoppingTime::constant(0, 2)).unwrap();
        assert_eq!(v, zero);
    }

    #[test]
    fn dynkin_order_violation() {
        let s = two_step();
        let x = AdaptedProcess::from_fn(&s, |k, _| int(k as i64 * 2));
        let y = AdaptedProcess::from_fn(&s, |_, _| int(1));
        assert!(matches!(
            dynkin_value(&s, &x, &y, &StoppingTime::constant(0, 2)),
            Err(StopGameError::OrderViolation { time: 1, outcome: 0 })
        ));
    }
}

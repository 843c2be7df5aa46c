//! Payoff fields `U(t_1, ..., t_N, w)` and their continuity modulus.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};

use crate::error::{Result, StopGameError};
use crate::space::{FilteredSpace, Real, TimeGrid};

/// Dense table of one player's payoff over `(t_1, ..., t_N, outcome)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayoffField {
    players: usize,
    times: usize,
    outcomes: usize,
    data: Vec<Real>,
}

impl PayoffField {
    pub fn new(players: usize, times: usize, outcomes: usize, data: Vec<Real>) -> Result<Self> {
        let expected = times.pow(players as u32) * outcomes;
        if data.len() != expected {
            return Err(StopGameError::Unsupported(format!(
                "payoff table has {} entries, expected {expected}",
                data.len()
            )));
        }
        Ok(PayoffField { players, times, outcomes, data })
    }

    pub fn from_fn(players: usize, space: &FilteredSpace, f: impl Fn(&[usize], usize) -> Real) -> Self {
        let times = space.num_times();
        let outcomes = space.num_outcomes();
        let mut data = Vec::with_capacity(times.pow(players as u32) * outcomes);
        for tuple in time_tuples(players, times) {
            for w in 0..outcomes {
                data.push(f(&tuple, w));
            }
        }
        PayoffField { players, times, outcomes, data }
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn num_times(&self) -> usize {
        self.times
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    fn offset(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.players);
        tuple.iter().fold(0, |acc, &k| acc * self.times + k) * self.outcomes
    }

    pub fn get(&self, tuple: &[usize], w: usize) -> &Real {
        &self.data[self.offset(tuple) + w]
    }

    /// `a U + b`.
    pub fn affine(&self, a: &Real, b: &Real) -> PayoffField {
        PayoffField { data: self.data.iter().map(|x| a * x + b).collect(), ..self.clone() }
    }

    pub fn pointwise_max(&self, other: &PayoffField) -> PayoffField {
        PayoffField {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.max(b).clone()).collect(),
            ..self.clone()
        }
    }

    /// Every tuple whose outcome slice is not constant on the blocks at `max(t_i)`.
    pub fn check_adapted(&self, space: &FilteredSpace) -> Vec<Vec<usize>> {
        time_tuples(self.players, self.times)
            .filter(|tuple| {
                let k = *tuple.iter().max().expect("at least one player");
                let base = self.offset(tuple);
                !space.is_measurable_at(k, &self.data[base..base + self.outcomes])
            })
            .collect()
    }
}

/// All `players`-tuples of time indices in lexicographic order.
pub fn time_tuples(players: usize, times: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = times.pow(players as u32);
    (0..total).map(move |mut code| {
        let mut tuple = vec![0; players];
        for slot in (0..players).rev() {
            tuple[slot] = code % times;
            code /= times;
        }
        tuple
    })
}

/// Slack added to empirical maxima so the continuity bound holds strictly.
pub fn modulus_slack() -> Real {
    Real::new(1.into(), num::BigInt::one() << 40)
}

/// Step-function continuity modulus: `eta(d)` for each achievable total displacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Modulus {
    table: Vec<(Real, Real)>,
}

impl Modulus {
    /// Builds a modulus from `(displacement, eta)` pairs, enforcing monotonicity.
    pub fn from_table(mut points: Vec<(Real, Real)>) -> Self {
        points.sort();
        let mut table = vec![(Real::zero(), Real::zero())];
        let mut running = Real::zero();
        for (d, eta) in points {
            if !d.is_positive() {
                continue;
            }
            if eta > running {
                running = eta;
            }
            match table.last_mut() {
                Some(last) if last.0 == d => last.1 = running.clone(),
                _ => table.push((d, running.clone())),
            }
        }
        Modulus { table }
    }

    /// `eta(delta)`: the entry at the largest tabulated displacement not above `delta`.
    pub fn eval(&self, delta: &Real) -> Real {
        self.table
            .iter()
            .take_while(|(d, _)| d <= delta)
            .last()
            .map(|(_, eta)| eta.clone())
            .unwrap_or_else(Real::zero)
    }

    pub fn table(&self) -> &[(Real, Real)] {
        &self.table
    }

    /// Upper bound of the modulus.
    pub fn cap(&self) -> Real {
        self.table.last().map(|(_, eta)| eta.clone()).unwrap_or_else(Real::zero)
    }
}

/// Empirical modulus shared by all fields: max payoff change per total displacement plus slack.
pub fn estimate_modulus(fields: &[&PayoffField], grid: &TimeGrid) -> Modulus {
    let mut worst: BTreeMap<Real, Real> = BTreeMap::new();
    let Some(first) = fields.first() else {
        return Modulus::from_table(Vec::new());
    };
    let tuples: Vec<Vec<usize>> = time_tuples(first.players(), first.num_times()).collect();
    for (a, ta) in tuples.iter().enumerate() {
        for tb in &tuples[a + 1..] {
            let d: Real = ta.iter().zip(tb).map(|(&x, &y)| (grid.value(x) - grid.value(y)).abs()).sum();
            let mut diff = Real::zero();
            for field in fields {
                for w in 0..field.num_outcomes() {
                    let delta = (field.get(ta, w) - field.get(tb, w)).abs();
                    if delta > diff {
                        diff = delta;
                    }
                }
            }
            let entry = worst.entry(d).or_insert_with(Real::zero);
            if diff > *entry {
                *entry = diff;
            }
        }
    }
    let slack = modulus_slack();
    Modulus::from_table(worst.into_iter().map(|(d, m)| (d, m + &slack)).collect())
}

/// Largest multiple `h` of the minimal grid step (capped by the horizon span) with `eta(h) < eps`.
pub fn select_h(eta: &Modulus, eps: &Real, grid: &TimeGrid) -> Result<Real> {
    if !eps.is_positive() {
        return Err(StopGameError::Unsupported("epsilon must be positive".into()));
    }
    let step = grid.min_step();
    let span = grid.span();
    if eta.eval(&step) >= *eps {
        return Err(StopGameError::NoValidH { eta_min_step: eta.eval(&step) });
    }
    let mut h = step.clone();
    loop {
        let next = &h + &step;
        if next > span || eta.eval(&next) >= *eps {
            return Ok(h);
        }
        h = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{int, rat};

    fn space3() -> FilteredSpace {
        let grid = TimeGrid::new(vec![int(0), rat(1, 4), rat(1, 2)]).unwrap();
        FilteredSpace::new(
            grid,
            vec![rat(1, 2), rat(1, 2)],
            vec![vec![vec![0, 1]], vec![vec![0], vec![1]], vec![vec![0], vec![1]]],
        )
        .unwrap()
    }

    #[test]
    fn time_only_payoff_is_adapted() {
        let s = space3();
        let u = PayoffField::from_fn(2, &s, |t, _| int((t[0] + 2 * t[1]) as i64));
        assert!(u.check_adapted(&s).is_empty());
    }

    #[test]
    fn outcome_dependence_at_zero_is_flagged() {
        let s = space3();
        let u = PayoffField::from_fn(2, &s, |_, w| int(w as i64));
        assert_eq!(u.check_adapted(&s), vec![vec![0, 0]]);
    }

    #[test]
    fn indicator_resolved_at_max_is_adapted() {
        let s = space3();
        let u = PayoffField::from_fn(2, &s, |t, w| if t[0].max(t[1]) >= 1 && w == 0 { int(1) } else { int(0) });
        assert!(u.check_adapted(&s).is_empty());
    }

    #[test]
    fn constant_modulus_is_slack_only() {
        let s = space3();
        let u = PayoffField::from_fn(2, &s, |_, _| int(3));
        let eta = estimate_modulus(&[&u], s.grid());
        assert_eq!(eta.eval(&int(0)), int(0));
        assert_eq!(eta.eval(&rat(1, 4)), modulus_slack());
        assert_eq!(eta.cap(), modulus_slack());
    }

    #[test]
    fn linear_payoff_modulus_tracks_displacement() {
        let s = space3();
        let g = s.grid().clone();
        let u = PayoffField::from_fn(2, &s, |t, _| g.value(t[0]) + g.value(t[1]));
        let eta = estimate_modulus(&[&u], s.grid());
        for d in [rat(1, 4), rat(1, 2), rat(3, 4), int(1)] {
            assert_eq!(eta.eval(&d), &d + modulus_slack());
        }
    }

    #[test]
    fn jump_forces_large_modulus() {
        let s = space3();
        let u = PayoffField::from_fn(2, &s, |t, _| if t[0] >= 1 { int(1) } else { int(0) });
        let eta = estimate_modulus(&[&u], s.grid());
        assert!(eta.eval(&rat(1, 4)) >= int(1));
    }

    #[test]
    fn select_h_cases() {
        let s = space3();
        let flat = Modulus::from_table(vec![]);
        assert_eq!(select_h(&flat, &rat(1, 10), s.grid()).unwrap(), rat(1, 2));

        // eta(d) = d on a step-1/4 grid with horizon 1.
        let grid = TimeGrid::uniform(5, rat(1, 4)).unwrap();
        let linear = Modulus::from_table((1..=8).map(|m| (rat(m, 4), rat(m, 4))).collect());
        assert_eq!(select_h(&linear, &rat(3, 10), &grid).unwrap(), rat(1, 4));

        let jump = Modulus::from_table(vec![(rat(1, 4), int(1))]);
        assert!(matches!(select_h(&jump, &rat(1, 2), &grid), Err(StopGameError::NoValidH { .. })));
    }

    #[test]
    fn affine_and_max() {
        let s = space3();
        let u = PayoffField::from_fn(2, &s, |t, _| int(t[0] as i64));
        let v = u.affine(&int(2), &int(1));
        assert_eq!(v.get(&[2, 0], 0), &int(5));
        let m = u.pointwise_max(&PayoffField::from_fn(2, &s, |_, _| int(1)));
        assert_eq!(m.get(&[0, 0], 1), &int(1));
        assert_eq!(m.get(&[2, 0], 1), &int(2));
    }
}

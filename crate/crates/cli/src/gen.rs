//! Random games whose payoffs are Lipschitz in time with a given slope.
//!
//! `U^i = clamp01(base_i + sum_j a_ij t_j + walk_i(max t))` with `|a_ij| <= L/6` and a
//! walk on the filtration whose increments are at most `(L/2) dt`. A change of the
//! time tuple by total displacement `d` moves `U^i` by at most `(2L/3) d`.

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stopgame_core::space::{int, rat};
use stopgame_core::{FilteredSpace, PayoffField, Real, StoppingTime, TimeGrid};

use crate::error::{CliError, CliResult};
use crate::format::Game;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub seed: u64,
    pub outcomes: usize,
    pub times: usize,
    pub modulus: Real,
    pub players: usize,
    pub step: Real,
    pub epsilon: Real,
}

fn clamp01(x: Real) -> Real {
    x.max(Real::zero()).min(int(1))
}

fn random_partitions(rng: &mut ChaCha8Rng, outcomes: usize, times: usize) -> Vec<Vec<Vec<usize>>> {
    let mut levels = vec![vec![(0..outcomes).collect::<Vec<_>>()]];
    for k in 1..times {
        let prev = levels.last().expect("level 0");
        let next = if k + 1 == times {
            (0..outcomes).map(|w| vec![w]).collect()
        } else {
            let mut blocks = Vec::new();
            for b in prev {
                if b.len() > 1 && rng.gen_bool(0.5) {
                    let cut = rng.gen_range(1..b.len());
                    blocks.push(b[..cut].to_vec());
                    blocks.push(b[cut..].to_vec());
                } else {
                    blocks.push(b.clone());
                }
            }
            blocks
        };
        levels.push(next);
    }
    levels
}

pub fn generate(p: &GenParams) -> CliResult<Game> {
    if p.outcomes == 0 || p.times < 2 || !(2..=3).contains(&p.players) {
        return Err(CliError::Validation(vec!["gen: need outcomes >= 1, times >= 2 and 2 or 3 players".into()]));
    }
    if p.modulus.is_negative() || !p.step.is_positive() || !p.epsilon.is_positive() {
        return Err(CliError::Validation(vec!["gen: modulus must be >= 0, step and epsilon > 0".into()]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let grid = TimeGrid::uniform(p.times, p.step.clone())?;
    let raw: Vec<i64> = (0..p.outcomes).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    let weights = raw.iter().map(|&x| rat(x, total)).collect();
    let partitions = random_partitions(&mut rng, p.outcomes, p.times);
    let space = FilteredSpace::new(grid, weights, partitions)?;

    let l = &p.modulus;
    let mut payoffs = Vec::with_capacity(p.players);
    for _ in 0..p.players {
        let base = rat(rng.gen_range(25..=75), 100);
        let slopes: Vec<Real> = (0..p.players).map(|_| l * rat(rng.gen_range(-10..=10), 60)).collect();
        // walk[k][w], built block by block so it is F_k-measurable.
        let mut walk = vec![vec![Real::zero(); p.outcomes]];
        for k in 1..p.times {
            let dt = space.grid().value(k) - space.grid().value(k - 1);
            let mut row = vec![Real::zero(); p.outcomes];
            for block in space.blocks(k) {
                let c = rat(rng.gen_range(-2..=2), 4);
                for &w in block {
                    row[w] = &walk[k - 1][w] + &c * l * &dt;
                }
            }
            walk.push(row);
        }
        let g = space.grid();
        payoffs.push(PayoffField::from_fn(p.players, &space, |t, w| {
            let trend: Real = t.iter().zip(&slopes).map(|(&k, a)| a * g.value(k)).sum();
            let last = *t.iter().max().expect("players");
            clamp01(&base + trend + &walk[last][w])
        }));
    }
    Ok(Game { start: StoppingTime::constant(0, p.outcomes), space, payoffs, epsilon: p.epsilon.clone(), h: None })
}

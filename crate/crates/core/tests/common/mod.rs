#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stopgame_core::space::{int, rat};
use stopgame_core::{FilteredSpace, PayoffField, Real, TimeGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random refining partitions over `outcomes` points, discrete at the last time.
pub fn random_space(rng: &mut ChaCha8Rng, outcomes: usize, times: usize) -> FilteredSpace {
    let grid = TimeGrid::uniform(times, rat(1, 40)).unwrap();
    let weights = random_weights(rng, outcomes);
    let mut partitions = vec![vec![(0..outcomes).collect::<Vec<_>>()]; times];
    partitions[times - 1] = (0..outcomes).map(|w| vec![w]).collect();
    for k in (0..times - 1).rev() {
        // Coarsen the next level by merging random neighbouring blocks.
        let finer = partitions[k + 1].clone();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for b in finer {
            match blocks.last_mut() {
                Some(last) if rng.gen_bool(0.5) => last.extend(b),
                _ => blocks.push(b),
            }
        }
        partitions[k] = blocks;
    }
    FilteredSpace::new(grid, weights, partitions).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, outcomes: usize) -> Vec<Real> {
    let raw: Vec<i64> = (0..outcomes).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|r| rat(r, total)).collect()
}

/// Random adapted value: constant on the blocks at `level`.
pub fn block_value(space: &FilteredSpace, table: &[Vec<Real>], level: usize, w: usize) -> Real {
    table[level][space.block_of(level, w)].clone()
}

/// One random value per block per time, in hundredths.
pub fn random_block_table(rng: &mut ChaCha8Rng, space: &FilteredSpace, spread: i64) -> Vec<Vec<Real>> {
    (0..space.num_times())
        .map(|k| space.blocks(k).iter().map(|_| rat(rng.gen_range(0..=spread), 100)).collect())
        .collect()
}

/// Adapted payoff field: a block value at the latest time plus a small time trend.
pub fn random_payoff(rng: &mut ChaCha8Rng, space: &FilteredSpace, players: usize, spread: i64) -> PayoffField {
    let table = random_block_table(rng, space, spread);
    let trend: Vec<i64> = (0..players).map(|_| rng.gen_range(-2..=2)).collect();
    PayoffField::from_fn(players, space, |t, w| {
        let level = *t.iter().max().unwrap();
        let drift: i64 = t.iter().zip(&trend).map(|(&k, &c)| c * k as i64).sum();
        block_value(space, &table, level, w) + rat(drift, 100)
    })
}

pub fn zero() -> Real {
    int(0)
}

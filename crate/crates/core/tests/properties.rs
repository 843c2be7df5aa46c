mod common;

use common::{random_block_table, random_payoff, random_space, rng};
use proptest::prelude::*;
use stopgame_core::classic::{dynkin_value, snell_process, Direction};
use stopgame_core::equilibrium3::partition_abc;
use stopgame_core::space::rat;
use stopgame_core::two_player::solve_2p_nash;
use stopgame_core::verify::{enumerate_strategies2, exact_best_response};
use stopgame_core::{AdaptedProcess, Guards, RandomVariable, StopRule, StoppingTime};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn abc_events_match_their_definitions(a in 0usize..4, b in 0usize..4, c in 0usize..4) {
        let mu = [StoppingTime(vec![a]), StoppingTime(vec![b]), StoppingTime(vec![c])];
        let e = partition_abc(&mu)[0];
        let in_a = a <= b && a <= c;
        let in_b = b < a && b <= c;
        let in_c = c < a && c < b;
        prop_assert_eq!([in_a, in_b, in_c].iter().filter(|&&x| x).count(), 1);
        prop_assert_eq!(e, [in_a, in_b, in_c].iter().position(|&x| x).unwrap());
    }

    #[test]
    fn conditional_expectation_tower(seed in 0u64..500, outcomes in 2usize..5) {
        let mut r = rng(seed);
        let space = random_space(&mut r, outcomes, 4);
        let t = random_block_table(&mut r, &space, 100);
        let x = RandomVariable((0..outcomes).map(|w| t[3][space.block_of(3, w)].clone()).collect());
        for k in 0..3 {
            let direct = space.cond_exp(&x, k);
            let nested = space.cond_exp(&space.cond_exp(&x, k + 1), k);
            prop_assert_eq!(direct, nested);
        }
        prop_assert_eq!(x.expectation(&space), space.cond_exp(&x, 0).expectation(&space));
    }

    #[test]
    fn snell_envelope_dominates_and_is_supermartingale(seed in 0u64..500) {
        let mut r = rng(seed);
        let space = random_space(&mut r, 3, 4);
        let t = random_block_table(&mut r, &space, 100);
        let p = |k: usize, w: usize| t[k][space.block_of(k, w)].clone();
        let env = snell_process(&space, Direction::Sup, p);
        for k in 0..4 {
            for w in 0..3 {
                prop_assert!(env.get(k, w) >= &p(k, w));
            }
            if k < 3 {
                let next = space.cond_exp(&env.slice(k + 1), k);
                for w in 0..3 {
                    prop_assert!(env.get(k, w) >= &next[w]);
                }
            }
        }
    }

    #[test]
    fn dynkin_value_is_squeezed(seed in 0u64..500) {
        let mut r = rng(seed);
        let space = random_space(&mut r, 3, 4);
        let xt = random_block_table(&mut r, &space, 60);
        let gt = random_block_table(&mut r, &space, 40);
        let x = AdaptedProcess::from_fn(&space, |k, w| xt[k][space.block_of(k, w)].clone());
        let y = AdaptedProcess::from_fn(&space, |k, w| x.get(k, w) + &gt[k][space.block_of(k, w)]);
        let v = dynkin_value(&space, &x, &y, &StoppingTime::constant(0, 3)).unwrap();
        for k in 0..4 {
            for w in 0..3 {
                prop_assert!(x.get(k, w) <= v.get(k, w) && v.get(k, w) <= y.get(k, w));
            }
        }
    }

    #[test]
    fn best_response_never_below_conformity(seed in 0u64..200, pick in 0usize..10_000) {
        let mut r = rng(seed);
        let space = random_space(&mut r, 2, 3);
        let from = StoppingTime::constant(0, 2);
        let u = random_payoff(&mut r, &space, 2, 100);
        let all = enumerate_strategies2(&space, &from, &Guards::default()).unwrap();
        let a = &all[pick % all.len()];
        let b = &all[(pick / 7) % all.len()];
        let profile: [&dyn StopRule; 2] = [a, b];
        let p = |t: &[usize], w: usize| u.get(t, w).clone();
        let res = exact_best_response(&space, &profile, 0, &p, &from, &Guards::default()).unwrap();
        prop_assert!(res.gap.0.iter().all(|g| *g >= rat(0, 1)));
    }

    #[test]
    fn two_player_solver_certificate_is_exact(seed in 0u64..200) {
        let mut r = rng(seed);
        let space = random_space(&mut r, 2, 3);
        let u1 = random_payoff(&mut r, &space, 2, 100);
        let u2 = random_payoff(&mut r, &space, 2, 100);
        let g1 = |a: usize, b: usize, w: usize| u1.get(&[a, b], w).clone();
        let g2 = |a: usize, b: usize, w: usize| u2.get(&[a, b], w).clone();
        let eps = rat(1, 20);
        let eq = solve_2p_nash(&space, &g1, &g2, 0, &eps, &Guards::default()).unwrap();
        let from = StoppingTime::constant(0, 2);
        let profile: [&dyn StopRule; 2] = [&eq.first, &eq.second];
        let p1 = |t: &[usize], w: usize| g1(t[0], t[1], w);
        let p2 = |t: &[usize], w: usize| g2(t[0], t[1], w);
        let a = exact_best_response(&space, &profile, 0, &p1, &from, &Guards::default()).unwrap().max_gap();
        let b = exact_best_response(&space, &profile, 1, &p2, &from, &Guards::default()).unwrap().max_gap();
        prop_assert_eq!(eq.gaps.clone(), [a, b]);
        prop_assert!(eq.max_gap() <= eps || eq.used_enumeration);
    }
}

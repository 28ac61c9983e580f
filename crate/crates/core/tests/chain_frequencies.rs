use pgrad_core::envs::{ChainMdpEnv, Environment};
use pgrad_core::{Action, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEPS: usize = 100_000;

fn mdp() -> TabularMdp {
    #[rustfmt::skip]
    let transitions = vec![
        0.6, 0.3, 0.1,   0.1, 0.1, 0.8,
        0.25, 0.5, 0.25, 0.0, 0.5, 0.5,
        0.3, 0.0, 0.7,   0.9, 0.05, 0.05,
    ];
    let rewards = vec![0.0; 18];
    TabularMdp::new(3, 2, transitions, rewards, 0.9, vec![1.0, 0.0, 0.0], None).unwrap()
}

#[test]
fn sampled_transitions_match_the_table() {
    let mdp = mdp();
    let mut env = ChainMdpEnv::new(mdp.clone(), 1_000_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    env.reset(&mut rng);
    let mut counts = vec![0usize; 3 * 2 * 3];
    for _ in 0..STEPS {
        let (s, a) = (env.state(), rng.random_range(0..2));
        env.physics_step(&Action::Discrete(a), &mut rng).unwrap();
        counts[(s * 2 + a) * 3 + env.state()] += 1;
    }
    for s in 0..3 {
        for a in 0..2 {
            let row = &counts[(s * 2 + a) * 3..(s * 2 + a + 1) * 3];
            let n: usize = row.iter().sum();
            assert!(n > 1000, "({s}, {a}) visited {n} times");
            for (next, &c) in row.iter().enumerate() {
                let p = mdp.next_distribution(s, a)[next];
                let freq = c as f64 / n as f64;
                if p == 0.0 {
                    assert_eq!(c, 0);
                    continue;
                }
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (freq - p).abs() < 3.0 * se,
                    "P({next}|{s},{a}) = {p}, sampled {freq}, se {se}"
                );
            }
        }
    }
}

#[test]
fn initial_distribution_is_respected() {
    let mdp = TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 4], 0.5, vec![0.3, 0.7], None).unwrap();
    let mut env = ChainMdpEnv::new(mdp, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    let ones = (0..n).filter(|_| env.reset(&mut rng)[1] == 1.0).count();
    let se = (0.21f64 / n as f64).sqrt();
    assert!((ones as f64 / n as f64 - 0.7).abs() < 3.0 * se);
}

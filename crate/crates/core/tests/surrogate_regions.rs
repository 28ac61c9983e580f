//! The clipped surrogate never exceeds either branch, checked over every
//! sign of the advantage and every ratio region.

use pgrad_core::algos::{clipped_surrogate, compute_ratio};
use pgrad_core::Tape;

const CLIP: f64 = 0.2;

#[test]
fn per_sample_surrogate_is_pessimistic_everywhere() {
    let ratios: Vec<f64> = (1..=400).map(|i| 0.01 * i as f64).collect();
    for adv in [-3.0, -1.0, -1e-9, 0.0, 1e-9, 1.0, 3.0] {
        for &r in &ratios {
            let tape = Tape::new();
            let ratio = compute_ratio(tape.var(r.ln()), 0.0).unwrap();
            let s = clipped_surrogate(&[ratio], &[adv], CLIP).unwrap().value();
            let unclipped = r * adv;
            let clipped = r.clamp(1.0 - CLIP, 1.0 + CLIP) * adv;
            assert!(s <= unclipped + 1e-12 && s <= clipped + 1e-12, "r {r} A {adv}: {s}");
            assert!((s - unclipped.min(clipped)).abs() < 1e-12);
        }
    }
}

#[test]
fn gradient_vanishes_only_where_the_clip_binds() {
    // (ratio, advantage, gradient expected to flow)
    let cases = [
        (1.5, 1.0, false),
        (1.5, -1.0, true),
        (0.5, 1.0, true),
        (0.5, -1.0, false),
        (1.1, 1.0, true),
        (1.1, -1.0, true),
        (0.9, 1.0, true),
        (0.9, -1.0, true),
    ];
    for (r, adv, flows) in cases {
        let tape = Tape::new();
        let logp = tape.var(f64::ln(r));
        let s = clipped_surrogate(&[compute_ratio(logp, 0.0).unwrap()], &[adv], CLIP).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(logp) != 0.0, flows, "r {r} A {adv}");
    }
}

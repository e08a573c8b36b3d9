mod support;

use support::*;

const TOL: f64 = 1e-4;

#[test]
fn classification_gradient() {
    for seed in 0..5 {
        let c = check_cls(seed);
        assert!(c.passes(TOL), "seed {seed}: {c:?}");
    }
}

#[test]
fn triplet_gradient() {
    for seed in 0..5 {
        let (c, bias) = check_triplet(seed);
        assert!(c.passes(TOL), "seed {seed}: {c:?}");
        assert!(bias < 1e-12, "seed {seed}: output-bias gradient {bias}");
    }
}

#[test]
fn diversity_gradient() {
    for seed in 0..5 {
        let c = check_div(seed);
        assert!(c.passes(TOL), "seed {seed}: {c:?}");
    }
}

#[test]
fn reconstruction_gradient() {
    for seed in 0..5 {
        let c = check_recon(seed);
        assert!(c.passes(TOL), "seed {seed}: {c:?}");
    }
}

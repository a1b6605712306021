use mixbo_core::oracles::{eval_1d, eval_rastrigin, OracleSpec, ToxicityParams};
use mixbo_core::space::{enumerate_pool, ComponentSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn one_d_maximum_by_dense_scan() {
    let n = 1_000_000;
    let (mut best_x, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..=n {
        let x = -2.0 + 4.0 * i as f64 / n as f64;
        let v = eval_1d(x).unwrap();
        if v > best {
            best = v;
            best_x = x;
        }
    }
    // 0.909 to three places; the scan gives 0.90943.
    assert!((0.9085..0.9095).contains(&best), "{best}");
    assert!((0.288..=0.290).contains(&best_x), "{best_x}");
    assert!((eval_1d(-best_x).unwrap() + best).abs() < 1e-12);
}

#[test]
fn rastrigin_minimum_on_the_benchmark_grid() {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=100 {
        for j in 0..=100 {
            let (a, b) = (-2.5 + 0.05 * i as f64, -2.5 + 0.05 * j as f64);
            let v = eval_rastrigin(&[a, b]).unwrap();
            assert!(v >= -1e-12);
            if v < best.0 {
                best = (v, a, b);
            }
        }
    }
    assert!(best.0.abs() < 1e-12);
    assert!(best.1.abs() < 1e-12 && best.2.abs() < 1e-12);
    assert!((eval_rastrigin(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn toxicity_never_increases_when_a_component_is_added() {
    let params = ToxicityParams::cpa_v1();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..10_000 {
        let conc: Vec<f64> = (0..7)
            .map(|_| rng.random_range(0..=12) as f64 * 0.5)
            .collect();
        let k = rng.random_range(0..7);
        let mut more = conc.clone();
        more[k] += 0.5;
        assert!(params.eval(&more).unwrap() <= params.eval(&conc).unwrap());
    }
}

#[test]
fn toxicity_over_the_cocktail_pool_is_a_probability() {
    let params = ToxicityParams::cpa_v1();
    let pool = enumerate_pool(&ComponentSet::default(), 100_000).unwrap();
    for f in pool.iter().step_by(97) {
        let v = params.eval(&f.concentrations()).unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    let zero = params.eval(&[0.0; 7]).unwrap();
    assert!((zero - 0.98).abs() < 1e-12);
}

#[test]
fn replicate_noise_matches_its_configured_sd() {
    let spec = OracleSpec {
        replicates: 10_000,
        clamp: None,
        ..OracleSpec::toxicity(ToxicityParams::cpa_v1())
    };
    let x = [1.0, 0.5, 0.0, 1.0, 0.5, 0.0, 0.5];
    let r = spec.observe(&x, 3).unwrap();
    let sd = r.variance.sqrt();
    assert!((sd - 0.05).abs() <= 0.05 * 0.05, "{sd}");
    assert!((r.mean - spec.truth(&x).unwrap()).abs() < 4.0 * 0.05 / 100.0);
    assert_eq!(r, spec.observe(&x, 3).unwrap());
}

use mixbo_core::pareto::{
    hypervolume, hypervolume_improvement, igd, pareto_front, reference_front, ObjectiveVector,
    ScoredPoint,
};
use mixbo_core::space::FormulationId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, levels: Option<u32>) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| match levels {
                    Some(l) => rng.random_range(0..=l) as f64 / l as f64,
                    None => rng.random::<f64>(),
                })
                .collect()
        })
        .collect()
}

fn brute_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// O(n^2) nondominated filter, duplicates collapsed.
fn brute_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| !points.iter().any(|q| brute_dominates(q, p)))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

/// Dominated area in [0, 1]^2 by counting covered cell midpoints.
fn grid_area(points: &[Vec<f64>], cells: usize) -> f64 {
    let h = 1.0 / cells as f64;
    let mut covered = 0usize;
    for i in 0..cells {
        let gx = (i as f64 + 0.5) * h;
        let top = points
            .iter()
            .filter(|p| p[0] >= gx)
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max);
        covered += (0..cells).filter(|&j| (j as f64 + 0.5) * h <= top).count();
    }
    covered as f64 * h * h
}

fn vectors(points: &[Vec<f64>]) -> Vec<ObjectiveVector> {
    points.iter().cloned().map(ObjectiveVector::new).collect()
}

#[test]
fn hypervolume_matches_grid_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let pts = random_points(&mut rng, n, 2, None);
        let hv = hypervolume(&vectors(&pts), &[0.0, 0.0]).unwrap();
        let oracle = grid_area(&pts, 2000);
        assert!((hv - oracle).abs() <= 2e-3, "{hv} vs {oracle}");
    }
}

#[test]
fn front_matches_quadratic_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let n = rng.random_range(1..=200);
        let dim = if case % 4 == 3 { 3 } else { 2 };
        let levels = if case % 2 == 0 { Some(8) } else { None };
        let pts = random_points(&mut rng, n, dim, levels);
        let scored: Vec<ScoredPoint> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| ScoredPoint::new(Some(FormulationId(i as u64)), p.clone()))
            .collect();
        let front = pareto_front(&scored).unwrap();
        let mut got: Vec<Vec<f64>> = front
            .objectives()
            .into_iter()
            .map(|v| v.into_inner())
            .collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, brute_front(&pts), "case {case}");
        for m in &front.members {
            let lowest = pts.iter().position(|p| p[..] == m.objectives[..]).unwrap();
            assert_eq!(m.id, Some(FormulationId(lowest as u64)));
        }
    }
}

#[test]
fn igd_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (ne, nr) = (rng.random_range(1..20), rng.random_range(1..20));
        let est = random_points(&mut rng, ne, 2, None);
        let refr = random_points(&mut rng, nr, 2, None);
        let mut total = 0.0;
        for r in &refr {
            let mut best = f64::INFINITY;
            for p in &est {
                let d = ((r[0] - p[0]).powi(2) + (r[1] - p[1]).powi(2)).sqrt();
                best = best.min(d);
            }
            total += best;
        }
        let oracle = total / refr.len() as f64;
        let got = igd(&vectors(&est), &vectors(&refr)).unwrap();
        assert!((got - oracle).abs() <= 1e-12);
        assert_eq!(igd(&vectors(&est), &vectors(&est)).unwrap(), 0.0);
    }
}

#[test]
fn igd_hand_value() {
    let p = vectors(&[vec![0.0, 0.0]]);
    let star = vectors(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
    assert!((igd(&p, &star).unwrap() - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12);
}

#[test]
fn reference_front_of_three_campaigns() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sets: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|_| random_points(&mut rng, 40, 2, Some(10)))
        .collect();
    let scored: Vec<Vec<ScoredPoint>> = sets
        .iter()
        .map(|s| {
            s.iter()
                .map(|p| ScoredPoint::anonymous(p.clone()))
                .collect()
        })
        .collect();
    let refs: Vec<&[ScoredPoint]> = scored.iter().map(|s| s.as_slice()).collect();
    let front = reference_front(&refs).unwrap();
    let mut got: Vec<Vec<f64>> = front
        .objectives()
        .into_iter()
        .map(|v| v.into_inner())
        .collect();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let union: Vec<Vec<f64>> = sets.concat();
    assert_eq!(got, brute_front(&union));
}

proptest! {
    #[test]
    fn hypervolume_is_monotone(
        pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..30),
        extra in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let base: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
        let hv = hypervolume(&vectors(&base), &[0.0, 0.0]).unwrap();
        let mut more = base.clone();
        more.push(vec![extra.0, extra.1]);
        let hv2 = hypervolume(&vectors(&more), &[0.0, 0.0]).unwrap();
        prop_assert!(hv2 >= hv - 1e-15);
        let hvi = hypervolume_improvement(&vectors(&base), &[extra.0, extra.1], &[0.0, 0.0]).unwrap();
        prop_assert!((hvi - (hv2 - hv)).abs() < 1e-12);
        // A point dominating everything strictly increases the volume.
        let mut top = base.clone();
        top.push(vec![1.0, 1.0]);
        if base.iter().all(|p| p[0] < 1.0 || p[1] < 1.0) {
            prop_assert!(hypervolume(&vectors(&top), &[0.0, 0.0]).unwrap() > hv);
        }
    }

    #[test]
    fn front_members_are_mutually_nondominated(
        pts in proptest::collection::vec((0u8..6, 0u8..6, 0u8..6), 1..40),
    ) {
        let scored: Vec<ScoredPoint> = pts
            .iter()
            .map(|&(a, b, c)| ScoredPoint::anonymous(vec![a as f64, b as f64, c as f64]))
            .collect();
        let front = pareto_front(&scored).unwrap();
        for a in &front.members {
            for b in &front.members {
                prop_assert!(!brute_dominates(&a.objectives, &b.objectives));
            }
        }
    }
}

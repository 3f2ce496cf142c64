use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_pressure::decomposition::{bad_pressure_estimate, DecompositionParams};
use torus_pressure::inverse_limit::{
    extend_history, history_metric, lift_near, random_history, random_point, shift, BranchPolicy, CONSISTENCY_TOL,
};
use torus_pressure::pressure::{
    log_partition_function, max_separated_set, pressure_estimate, GridOptions, Potential,
};
use torus_pressure::systems::bundled::{self, DEFAULT_STRENGTH};
use torus_pressure::systems::{toral_eigendata, torus_diameter};
use torus_pressure::SystemSpec;

fn all_systems() -> Vec<SystemSpec> {
    vec![
        bundled::doubling(),
        bundled::cat_map(),
        bundled::anosov_endomorphism(),
        bundled::center_linear(),
        bundled::product_with_rotation(),
        bundled::mane(DEFAULT_STRENGTH).unwrap(),
    ]
}

#[test]
fn eigenpairs_have_small_residuals() {
    for m in [bundled::doubling_matrix(), bundled::cat_matrix(), bundled::endomorphism_matrix(), bundled::center_matrix()] {
        let a = m.to_mat();
        for pair in toral_eigendata(&m).unwrap() {
            let av = a.mul_vec(&pair.vector);
            let res = (0..a.d).map(|i| (av[i] - pair.value * pair.vector[i]).powi(2)).sum::<f64>().sqrt();
            let len = pair.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(res <= 1e-8, "residual {res} for {}", pair.value);
            assert!((len - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn nearby_points_have_distinct_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for f in all_systems() {
        let eps0 = f.separation_exponent();
        let d = f.dim();
        for _ in 0..100_000 / 6 {
            let x = random_point(d, &mut rng);
            let mut v = [0.0; 3];
            for vi in v.iter_mut().take(d) {
                *vi = 2.0 * rng.gen::<f64>() - 1.0;
            }
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            let r = eps0 * rng.gen::<f64>() / norm;
            let y = x.translate(&v.map(|c| c * r));
            if x.distance(&y) == 0.0 || x.distance(&y) > eps0 {
                continue;
            }
            assert!(f.apply(&x) != f.apply(&y), "{:?} and {:?} share an image", x, y);
        }
    }
}

#[test]
fn histories_from_every_operation_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for f in all_systems() {
        let h = random_history(&f, 12, &mut rng).unwrap();
        assert_eq!(h.first_inconsistency(&f, CONSISTENCY_TOL), None);
        for k in [-3isize, 1, 4] {
            assert!(shift(&f, &h, k).unwrap().is_consistent(&f));
        }
        let y = f.apply(&h.head());
        assert!(lift_near(&f, y, &h).unwrap().is_consistent(&f));
        let all = extend_history(&f, h.head(), 3, &BranchPolicy::EnumerateAll { cap: 1000 }).unwrap();
        assert_eq!(all.len(), f.degree().pow(3));
        assert!(all.iter().all(|g| g.is_consistent(&f)));
    }
}

#[test]
fn partition_function_grows_with_the_set() {
    let f = bundled::anosov_endomorphism();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cands: Vec<_> = (0..400).map(|_| random_point(2, &mut rng)).collect();
    let phi = Potential::cosine(1).shifted(-3.0);
    let set = max_separated_set(&f, &cands, 3, 0.1);
    assert!(set.len() > 2);
    let full = log_partition_function(&f, &phi, &set, 3, 0.1, 0.0).unwrap();
    let fewer = log_partition_function(&f, &phi, &set[..set.len() - 1], 3, 0.1, 0.0).unwrap();
    assert!(full > fewer);
}

#[test]
fn estimates_on_shared_sets_are_lipschitz_in_the_potential() {
    let opts = GridOptions::default();
    for (f, delta, range) in [(bundled::cat_map(), 0.1, (2, 5)), (bundled::center_linear(), 0.5, (1, 2))] {
        let phi = Potential::cosine(0);
        let gap = 0.37;
        let psi = phi.plus_cosine(1, gap);
        let a = pressure_estimate(&f, &phi, delta, range, &opts).unwrap();
        let b = pressure_estimate(&f, &psi, delta, range, &opts).unwrap();
        for (ra, rb) in a.per_n.iter().zip(&b.per_n) {
            assert_eq!(ra.count, rb.count);
            assert!((ra.log_lambda - rb.log_lambda).abs() / ra.n as f64 <= gap + 1e-12);
        }
    }
}

#[test]
fn bad_collection_never_exceeds_full() {
    let f = bundled::mane(DEFAULT_STRENGTH).unwrap();
    let rep = bad_pressure_estimate(
        &f,
        &Potential::zero(),
        &DecompositionParams::new(0.01).unwrap(),
        0.5,
        (1, 2),
        &GridOptions::default(),
    )
    .unwrap();
    for row in &rep.rows {
        assert!(row.bad_log_lambda <= row.full_log_lambda);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn preimages_invert_the_map(which in 0usize..6, seed in 0u64..10_000) {
        let f = &all_systems()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_point(f.dim(), &mut rng);
        let pre = f.preimages(&y).unwrap();
        prop_assert_eq!(pre.len(), f.degree());
        for (i, x) in pre.iter().enumerate() {
            prop_assert!(f.apply(x).distance(&y) <= 1e-9);
            for z in &pre[i + 1..] {
                prop_assert!(x.distance(z) > f.separation_exponent());
            }
        }
    }

    #[test]
    fn history_metric_is_bounded(which in 0usize..6, seed in 0u64..10_000, depth in 0usize..30, fw in 0usize..30) {
        let f = &all_systems()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_history(f, depth, &mut rng).unwrap();
        let b = random_history(f, depth, &mut rng).unwrap();
        let d = history_metric(&a, &b, fw, f).unwrap();
        let weights: f64 = (0..=depth).map(|k| 0.5f64.powi(k as i32)).sum::<f64>()
            + (1..=fw).map(|k| 0.5f64.powi(k as i32)).sum::<f64>();
        prop_assert!(d <= weights * torus_diameter(f.dim()) + 1e-12);
        prop_assert!(d <= 3.0 * torus_diameter(f.dim()));
    }
}

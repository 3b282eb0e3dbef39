use bklab::dyadic::{
    average, excess_set, kolmogorov_check, linearize, maximal_function, weak_type_check, Node,
    StepFunction, TreeSpec,
};
use bklab::kernel::{bellman_value, chi_lambda, elementary_slack, h_q, k0, omega_q, sigma_q, u_q};
use bklab::transforms::{
    family_inside_gap, family_outside_gap, g_phi, maximal_family_outside_gap, objective,
    random_disjoint_family, random_maximal_family,
};
use bklab::BellmanParams;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn omega_half(z: f64) -> f64 {
    z + (z * z - 1.0).sqrt()
}

/// Plain bisection for an increasing `g` with `g(lo) < 0 < g(hi)`.
fn bisect_increasing(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn leaves(m: u32, depth: u32) -> impl Strategy<Value = Vec<f64>> {
    let n = (m as usize).pow(depth);
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..10.0f64, 10.0..1000.0f64], n)
        .prop_filter("not identically zero", |v| v.iter().any(|&x| x > 0.0))
}

fn rational_leaves(m: u32, depth: u32) -> impl Strategy<Value = Vec<BigRational>> {
    let n = (m as usize).pow(depth);
    prop::collection::vec((0i64..6, 1i64..4), n).prop_map(|v| {
        v.into_iter()
            .map(|(a, b)| BigRational::new(a.into(), b.into()))
            .collect()
    })
}

fn admissible() -> impl Strategy<Value = BellmanParams> {
    (0.05..0.95f64, 0.1..10.0f64, 0.05..0.999f64, 1.0..5.0f64)
        .prop_map(|(q, f, hr, mu)| BellmanParams::new(q, f, hr * f.powf(q), mu * f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn omega_inverts_transfer(z in 1.0..100.0f64, q in 0.05..0.95f64) {
        let w = omega_q(z, q).unwrap();
        let back = h_q(w.powf(1.0 / q), q).unwrap();
        prop_assert!((back - z).abs() <= 1e-12 * z.max(1.0));
    }

    #[test]
    // For small q, U_q flattens below double resolution, hence the ranges.
    fn omega_and_u_increase(z in 1.0..50.0f64, dz in 0.1..1.0f64, q in 0.2..0.8f64) {
        prop_assert!(omega_q(z + dz, q).unwrap() > omega_q(z, q).unwrap());
        prop_assert!(u_q(z + dz, q).unwrap() > u_q(z, q).unwrap());
        let mid = omega_q(z + 0.5 * dz, q).unwrap();
        prop_assert!(mid > 0.5 * (omega_q(z, q).unwrap() + omega_q(z + dz, q).unwrap()));
    }

    #[test]
    fn sigma_ratio_form(k in 0.01..0.99f64, t in 0.01..0.99f64, q in 0.05..0.95f64) {
        let x = 1.0 + t * (1.0 / k - 1.0);
        let y = x * (1.0 - k) / (1.0 - k * x);
        let ratio = h_q(y, q).unwrap() / h_q(x, q).unwrap();
        let s = sigma_q(k, x, q).unwrap();
        prop_assert!((s - ratio).abs() <= 1e-12 * s.max(1.0), "{s} vs {ratio}");
    }

    #[test]
    fn chi_lambda_root_inside(lambda in 1.001..20.0f64, k in 0.01..0.99f64, q in 0.05..0.95f64) {
        let x = chi_lambda(lambda, k, q).unwrap();
        prop_assert!(x > 1.0 && k * x <= 1.0);
        // Near 1/k the residual is limited by the spacing of doubles.
        if 1.0 - k * x > 1e-4 {
            let s = sigma_q(k, x, q).unwrap();
            prop_assert!((s - lambda).abs() <= 1e-10 * lambda);
        }
    }

    #[test]
    fn k0_against_independent_root(lambda in 1.01..10.0f64, mu in 1.01..10.0f64, q in 0.05..0.95f64) {
        let k = k0(lambda, mu, q).unwrap();
        let oracle = bisect_increasing(
            |k| sigma_q(k, mu, q).unwrap_or(f64::INFINITY) - lambda,
            1e-15,
            (1.0 / mu) * (1.0 - 1e-15),
        );
        prop_assert!((k - oracle).abs() <= 1e-9, "{k} vs {oracle}");
    }

    #[test]
    fn bellman_half_closed_form(f in 0.1..10.0f64, hr in 0.05..1.0f64, mu in 1.0..10.0f64) {
        let h = hr * f.sqrt();
        let l = mu * f;
        let p = BellmanParams::new(0.5, f, h, l).unwrap();
        let arg = (0.5 * l.sqrt() + 0.5 * f / l.sqrt()) / h;
        let oracle = h * omega_half(arg);
        prop_assert!((bellman_value(&p) - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn elementary_inequality(t in 0.0..50.0f64, q in 0.05..0.95f64) {
        let s = elementary_slack(t, q);
        prop_assert!(s >= -1e-15);
        if (t - 1.0).abs() > 1e-3 {
            prop_assert!(s > 0.0);
        }
    }

    #[test]
    fn limiting_profile_is_consistent(p in admissible()) {
        let k = p.excess_measure().unwrap();
        prop_assert!(k > 0.0 && k < 1.0);
        let off = (p.f - k * p.threshold) / (1.0 - k);
        prop_assert!((off - p.tau()).abs() <= 1e-10 * p.tau().max(1.0), "{off} vs {}", p.tau());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn maximal_function_dominates(values in leaves(2, 5)) {
        let spec = TreeSpec::new(2, 5).unwrap();
        let phi = StepFunction::from_leaves(2, 5, values.clone()).unwrap();
        let mt = maximal_function(&phi, &spec).unwrap().leaf_values(5).unwrap();
        let f = phi.integral();
        for (m, v) in mt.iter().zip(&values) {
            prop_assert!(*m >= *v && *m >= f * (1.0 - 1e-15));
        }
    }

    #[test]
    fn maximal_function_is_sup_of_ancestor_averages(values in leaves(3, 3)) {
        let spec = TreeSpec::new(3, 3).unwrap();
        let phi = StepFunction::from_leaves(3, 3, values).unwrap();
        let mt = maximal_function(&phi, &spec).unwrap().leaf_values(3).unwrap();
        for (x, m) in mt.iter().enumerate() {
            let leaf = Node::new(3, x as u64);
            let best = (0..=3)
                .map(|d| average(&phi, &leaf.ancestor_at(d, 3)))
                .fold(f64::MIN, f64::max);
            prop_assert!((m - best).abs() <= 1e-12 * best.max(1.0));
        }
    }

    #[test]
    fn weak_type_and_kolmogorov(values in leaves(2, 5), lambda in 0.01..100.0f64, q in 0.05..0.95f64, mask in any::<u32>()) {
        let spec = TreeSpec::new(2, 5).unwrap();
        let phi = StepFunction::from_leaves(2, 5, values).unwrap();
        prop_assert!(weak_type_check(&phi, &spec, lambda).unwrap().slack >= -1e-12);
        let set: Vec<(u64, u64)> = (0..32u64).filter(|i| mask >> i & 1 == 1).map(|i| (i, i + 1)).collect();
        prop_assert!(kolmogorov_check(&phi, &spec, &set, q).unwrap().slack >= -1e-12);
    }

    #[test]
    fn excess_mass_at_least_threshold(values in leaves(2, 5), ratio in 1.0..5.0f64) {
        let spec = TreeSpec::new(2, 5).unwrap();
        let phi = StepFunction::from_leaves(2, 5, values).unwrap();
        let l = ratio * phi.integral();
        let e = excess_set(&phi, l, 0.5, &spec).unwrap();
        prop_assert!(e.b >= e.k * l * (1.0 - 1e-12));
    }

    #[test]
    fn linearization_is_exact(values in rational_leaves(2, 4)) {
        let spec = TreeSpec::new(2, 4).unwrap();
        let phi = StepFunction::from_leaves(2, 4, values).unwrap();
        let lin = linearize(&phi, &spec).unwrap();
        prop_assert!(lin.weight_identity_violations().is_empty());
        prop_assert_eq!(lin.reconstruct().unwrap(), maximal_function(&phi, &spec).unwrap());
        let covered: u64 = lin.elements.iter().map(|e| e.alpha_units).sum();
        prop_assert_eq!(covered, lin.total_units());
        // Membership: every proper ancestor has a strictly smaller average.
        for e in &lin.elements {
            let mut a = e.node;
            while let Some(p) = a.parent(2) {
                prop_assert!(average(&phi, &p) < e.average);
                a = p;
            }
        }
    }

    #[test]
    fn rational_json_round_trip(values in rational_leaves(3, 2)) {
        let phi = StepFunction::from_leaves(3, 2, values).unwrap();
        let back = StepFunction::<BigRational>::from_json_str(3, &phi.to_json_string()).unwrap();
        prop_assert_eq!(back, phi);
    }

    #[test]
    fn objective_below_bellman_value(values in leaves(2, 6), mu in 1.0..4.0f64, q in 0.05..0.95f64) {
        let spec = TreeSpec::new(2, 6).unwrap();
        let phi = StepFunction::from_leaves(2, 6, values).unwrap();
        let (f, h) = phi.moments(q);
        let p = BellmanParams::new(q, f, h.min(f.powf(q)), mu * f).unwrap();
        let value = objective(&phi, p.threshold, q, &spec).unwrap();
        prop_assert!(value <= p.bellman_value() * (1.0 + 1e-12), "{value} > {}", p.bellman_value());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn family_bounds_hold(values in leaves(2, 5), q in 0.05..0.95f64, beta in 1e-3..1e3f64, seed in any::<u64>()) {
        let spec = TreeSpec::new(2, 5).unwrap();
        let phi = StepFunction::from_leaves(2, 5, values).unwrap();
        let lin = linearize(&phi, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maximal = random_maximal_family(&mut rng, &lin, 0.5);
        let disjoint = random_disjoint_family(&mut rng, &lin, 0.5);
        prop_assert!(maximal_family_outside_gap(&phi, &maximal, beta, q, &spec).unwrap().slack >= -1e-12);
        prop_assert!(family_inside_gap(&phi, &disjoint, beta, q, &spec).unwrap().slack >= -1e-12);
        prop_assert!(family_outside_gap(&phi, &disjoint, beta, q, &spec).unwrap().slack >= -1e-12);
    }

    #[test]
    fn gphi_contract(values in leaves(2, 4), q in 0.05..0.95f64, ratio in 1.0..3.0f64) {
        let spec = TreeSpec::new(2, 4).unwrap();
        let phi = StepFunction::from_leaves(2, 4, values).unwrap();
        let l = ratio * phi.integral();
        let (g, rec) = g_phi(&phi, l, q, &spec, None).unwrap();
        let (f0, h0) = phi.moments(q);
        let (f1, h1) = g.moments(q);
        prop_assert!((f1 - f0).abs() <= 1e-9 * f0);
        prop_assert!((h1 - h0).abs() <= 1e-9 * h0);
        for e in &rec.entries {
            prop_assert!(e.gamma_realized <= e.a_measure * (1.0 + 1e-12));
        }
        let mg = maximal_function(&g, &TreeSpec::new(2, rec.refine).unwrap()).unwrap();
        let mphi = maximal_function(&phi, &spec).unwrap();
        for (_, _, a, b) in mg.zip(&mphi).unwrap() {
            prop_assert!(*a >= *b * (1.0 - 1e-12));
        }
    }
}

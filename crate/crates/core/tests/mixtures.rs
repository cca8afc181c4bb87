use geodrop::mixtures::{alpha_divergence, alpha_integrate, f_mean, Categorical, WeightVector};
use proptest::prelude::*;

fn simplex(k: usize) -> impl Strategy<Value = Categorical> {
    proptest::collection::vec(0.05..1.0f64, k).prop_map(|v| Categorical::from_unnormalized(v).unwrap())
}

fn members(k: usize, max: usize) -> impl Strategy<Value = (Vec<Categorical>, WeightVector)> {
    (1..=max).prop_flat_map(move |m| {
        (
            proptest::collection::vec(simplex(k), m),
            proptest::collection::vec(0.1..1.0f64, m).prop_map(|w| {
                let s: f64 = w.iter().sum();
                WeightVector::new(w.into_iter().map(|v| v / s).collect()).unwrap()
            }),
        )
    })
}

fn kl(p: &Categorical, q: &Categorical) -> f64 {
    p.probs().iter().zip(q.probs()).map(|(a, b)| a * (a / b).ln()).sum()
}

fn objective(ps: &[Categorical], w: &WeightVector, q: &Categorical, alpha: f64) -> f64 {
    ps.iter().zip(w.as_slice()).map(|(p, wk)| wk * alpha_divergence(p, q, alpha).unwrap()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generic_formula_tends_to_kl((p, q) in (2usize..6).prop_flat_map(|k| (simplex(k), simplex(k)))) {
        let (lo, hi) = (alpha_divergence(&p, &q, 1.0 - 1e-4).unwrap(), alpha_divergence(&p, &q, 1.0 + 1e-4).unwrap());
        let (kl_qp, kl_pq) = (kl(&q, &p), kl(&p, &q));
        // One-sided values carry a first-order term in (1 − α); the two
        // sides cancel it.
        prop_assert!((lo - kl_qp).abs() < 1e-4 && (hi - kl_qp).abs() < 1e-4);
        prop_assert!((0.5 * (lo + hi) - kl_qp).abs() < 1e-6);
        let (lo, hi) = (alpha_divergence(&p, &q, -1.0 - 1e-4).unwrap(), alpha_divergence(&p, &q, -1.0 + 1e-4).unwrap());
        prop_assert!((0.5 * (lo + hi) - kl_pq).abs() < 1e-6);
        prop_assert!((alpha_divergence(&p, &q, 1.0).unwrap() - kl(&q, &p)).abs() < 1e-12);
    }

    #[test]
    fn integration_beats_nearby_points(
        (ps, w) in (2usize..5).prop_flat_map(|k| members(k, 4)),
        alpha in prop_oneof![Just(-1.0), Just(0.0), Just(0.5), Just(1.0), -3.0..3.0f64],
        dirs in proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, 5), 8),
    ) {
        let q = alpha_integrate(&ps, &w, alpha).unwrap();
        let best = objective(&ps, &w, &q, alpha);
        for d in &dirs {
            for step in [1e-3, 1e-2, 5e-2] {
                let moved: Vec<f64> = q.probs().iter().zip(d).map(|(p, v)| (p.ln() + step * v).exp()).collect();
                let other = Categorical::from_unnormalized(moved).unwrap();
                prop_assert!(objective(&ps, &w, &other, alpha) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn geometric_integration_stays_in_the_family(
        etas in proptest::collection::vec(proptest::collection::vec(-3.0..3.0f64, 3), 1..5),
        raw in proptest::collection::vec(0.1..1.0f64, 5),
    ) {
        let m = etas.len();
        let s: f64 = raw[..m].iter().sum();
        let w = WeightVector::new(raw[..m].iter().map(|v| v / s).collect()).unwrap();
        let ps: Vec<Categorical> = etas.iter().map(|e| Categorical::from_natural_params(e)).collect();
        let mixed: Vec<f64> = (0..3).map(|i| etas.iter().zip(w.as_slice()).map(|(e, wk)| wk * e[i]).sum()).collect();
        let q = alpha_integrate(&ps, &w, 1.0).unwrap();
        prop_assert!(q.max_abs_diff(&Categorical::from_natural_params(&mixed)) < 1e-12);
    }

    #[test]
    fn f_mean_is_a_mean(a in 0.01..10.0f64, b in 0.01..10.0f64, l1 in 0.0..1.0f64, l2 in 0.0..1.0f64, alpha in -3.0..3.0f64) {
        let (lo, hi) = (l1.min(l2), l1.max(l2));
        let m_lo = f_mean(a, b, lo, alpha, true).unwrap();
        let m_hi = f_mean(a, b, hi, alpha, true).unwrap();
        let (min, max) = (a.min(b), a.max(b));
        let tol = 1e-9 * max;
        prop_assert!(m_lo >= min - tol && m_lo <= max + tol);
        // Moving weight towards b moves the mean towards b.
        if b >= a { prop_assert!(m_hi >= m_lo - tol) } else { prop_assert!(m_hi <= m_lo + tol) }
    }
}

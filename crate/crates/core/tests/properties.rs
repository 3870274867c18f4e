//! Property suites for the per-module invariants.

mod common;

use common::*;
use proptest::prelude::*;
use riskorder::{
    check_convex, check_mc, compare_risk_aversion, default_tol, euler_product_dist,
    optimal_fraction, solve_dp, strassen_coupling, AraOrder, DiscreteDist, UtilitySpec,
};

fn dist_strategy(max_atoms: usize, lo: f64, hi: f64) -> impl Strategy<Value = DiscreteDist> {
    prop::collection::vec((lo..hi, 0.05..1.0f64), 1..=max_atoms).prop_map(|pairs| {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        DiscreteDist::new(pairs.into_iter().map(|(x, w)| (x, w / total))).unwrap()
    })
}

fn utility_strategy() -> impl Strategy<Value = UtilitySpec> {
    prop_oneof![
        (0.05..5.0f64)
            .prop_filter("power exponent away from one", |p| (p - 1.0).abs() > 1e-3)
            .prop_map(|p| UtilitySpec::power(p).unwrap()),
        Just(UtilitySpec::Log),
        (0.05..5.0f64).prop_map(|g| UtilitySpec::exponential(g).unwrap()),
    ]
}

proptest! {
    // ---- distribution calculus -------------------------------------------

    #[test]
    fn call_function_is_convex_and_bounded(
        d in dist_strategy(8, -10.0, 10.0),
        k1 in -12.0..12.0f64,
        k2 in -12.0..12.0f64,
    ) {
        let mid = 0.5 * (k1 + k2);
        let convexity = 0.5 * (d.call_value(k1) + d.call_value(k2)) - d.call_value(mid);
        prop_assert!(convexity >= -1e-12);
        if k1 <= d.max_value() {
            prop_assert!(d.call_value(k1) + k1 <= d.max_value() + 1e-12);
        }
        // nonincreasing in the strike
        let (a, b) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        prop_assert!(d.call_value(a) >= d.call_value(b) - 1e-12);
    }

    #[test]
    fn rescaling_preserves_the_mean(
        d in dist_strategy(8, -10.0, 10.0),
        a in 1.0..10.0f64,
    ) {
        let s = d.scale_center(a).unwrap();
        prop_assert!((s.mean() - d.mean()).abs() <= 1e-12);
    }

    #[test]
    fn product_mean_is_product_of_means(
        d1 in dist_strategy(6, -5.0, 5.0),
        d2 in dist_strategy(6, -5.0, 5.0),
    ) {
        let p = d1.product_independent(&d2);
        prop_assert!((p.mean() - d1.mean() * d2.mean()).abs() <= 1e-10);
    }

    #[test]
    fn put_call_parity(
        d in dist_strategy(8, -10.0, 10.0),
        k in -12.0..12.0f64,
    ) {
        let call = d.call_value(k);
        let put: f64 = d.atoms().iter().map(|a| a.p * (k - a.x).max(0.0)).sum();
        prop_assert!((call - put - (d.mean() - k)).abs() <= 1e-10);
    }

    // ---- utility calculus -------------------------------------------------

    #[test]
    fn marginal_utility_is_strictly_decreasing(
        u in utility_strategy(),
        x1 in 0.1..30.0f64,
        x2 in 0.1..30.0f64,
    ) {
        prop_assume!((x1 - x2).abs() > 1e-9);
        let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        prop_assert!(u.marginal(lo).unwrap() > u.marginal(hi).unwrap());
    }

    #[test]
    fn inverse_marginal_round_trips(
        u in utility_strategy(),
        x in 0.1..30.0f64,
    ) {
        let y = u.marginal(x).unwrap();
        let back = u.inverse_marginal(y).unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn ara_matches_finite_differences(
        u in utility_strategy(),
        x in 0.2..20.0f64,
    ) {
        let h = 1e-5;
        let second = (u.marginal(x + h).unwrap() - u.marginal(x - h).unwrap()) / (2.0 * h);
        let numeric = -second / u.marginal(x).unwrap();
        prop_assert!((u.ara(x).unwrap() - numeric).abs() <= 1e-5);
    }

    #[test]
    fn risk_aversion_order_makes_marginal_ratio_increase(
        a in utility_strategy(),
        b in utility_strategy(),
    ) {
        prop_assume!(compare_risk_aversion(&a, &b) == AraOrder::MoreAverse);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..24 {
            let x = 0.1 * 1.3f64.powi(k);
            let ratio = b.marginal(x).unwrap() / a.marginal(x).unwrap();
            prop_assert!(ratio >= prev * (1.0 - 1e-12));
            prev = ratio;
        }
    }

    // ---- order checks ------------------------------------------------------

    #[test]
    fn kink_scan_agrees_with_grid_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_integer_dist(&mut r, 6, -5, 8);
        let y = random_integer_dist(&mut r, 6, -5, 8);
        let tol = default_tol(&x, &y);
        prop_assert_eq!(check_mc(&x, &y, tol).holds, mc_order_oracle(&x, &y, 4000, tol));
    }

    #[test]
    fn monotone_convex_order_is_transitive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_dist(&mut r, 5, -5.0, 5.0);
        let spread = mean_preserving_spread(&mut r, &x);
        let y = DiscreteDist::new(spread.atoms().iter().map(|a| (a.x + 0.3, a.p))).unwrap();
        let spread2 = mean_preserving_spread(&mut r, &y);
        let z = DiscreteDist::new(spread2.atoms().iter().map(|a| (a.x + 0.2, a.p))).unwrap();
        let tol = 1e-9;
        prop_assert!(check_mc(&x, &y, tol).holds);
        prop_assert!(check_mc(&y, &z, tol).holds);
        prop_assert!(check_mc(&x, &z, 2.0 * tol).holds);
    }

    // ---- coupling ----------------------------------------------------------

    #[test]
    fn coupling_marginals_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_dist(&mut r, 5, -4.0, 4.0);
        let y = mean_preserving_spread(&mut r, &x.scale_center(2.0).unwrap());
        let c = strassen_coupling(&x, &y, 1e-9).unwrap();
        let tv_x: f64 = c
            .x_marginal()
            .atoms()
            .iter()
            .zip(x.atoms())
            .map(|(a, b)| 0.5 * (a.p - b.p).abs())
            .sum();
        let tv_y: f64 = c
            .y_marginal()
            .atoms()
            .iter()
            .zip(y.atoms())
            .map(|(a, b)| 0.5 * (a.p - b.p).abs())
            .sum();
        prop_assert!(tv_x <= 1e-8 && tv_y <= 1e-8);
        prop_assert!(c.max_conditional_mean_residual() <= 1e-8);
    }

    // ---- tree market -------------------------------------------------------

    #[test]
    fn martingale_measure_makes_prices_martingales(seed in any::<u64>()) {
        let mut r = rng(seed);
        let tree = random_binomial_tree(&mut r, 5);
        let emm = tree.unique_emm().unwrap();
        for i in 0..tree.len() {
            if tree.is_leaf(i) {
                continue;
            }
            let expected: f64 = tree
                .children(i)
                .iter()
                .map(|&c| emm.branch_q(c) * tree.node(c).price)
                .sum();
            prop_assert!((expected - tree.node(i).price).abs() <= 1e-10 * tree.node(i).price.max(1.0));
        }
        // densities integrate to one
        let total: f64 = tree.leaves().iter().map(|&l| tree.path_prob(l) * emm.density(l)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn perturbation_only_rescales_selected_paths(
        seed in any::<u64>(),
        eps in 0.001..0.2f64,
    ) {
        let mut r = rng(seed);
        let tree = random_binomial_tree(&mut r, 4);
        prop_assume!(tree.horizon() >= 2);
        let target = tree.horizon() - 1;
        let pick = tree.level(target)[0];
        let pick_id = tree.node(pick).id;
        let out = riskorder::perturb(&tree, target, |n| n.id == pick_id, eps, 0.1, 3.0).unwrap();
        for &leaf in tree.leaves() {
            let id = tree.node(leaf).id;
            let new_leaf = (0..out.len()).find(|&i| out.node(i).id == id).unwrap();
            let ratio = out.path_prob(new_leaf) / tree.path_prob(leaf);
            let expected = [1.0, 1.0 - eps];
            prop_assert!(
                expected.iter().any(|e| (ratio - e).abs() <= 1e-12),
                "path probability ratio {} not in {{1, 1-eps}}", ratio
            );
        }
    }

    // ---- solver -------------------------------------------------------------

    #[test]
    fn one_step_fractions_shrink_with_risk_aversion(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inc = random_increment(&mut r, 4);
        prop_assume!(inc.drift() > 0.01);
        let p_more: f64 = r.random_range(0.05..5.0);
        let p_less: f64 = r.random_range(0.05..p_more);
        let pi_more = optimal_fraction(&inc, p_more).unwrap();
        let pi_less = optimal_fraction(&inc, p_less).unwrap();
        prop_assert!(pi_more >= -1e-9, "positive drift gives nonnegative fraction");
        prop_assert!(pi_more.abs() <= pi_less.abs() + 1e-9);
    }

    // ---- iid products --------------------------------------------------------

    #[test]
    fn euler_product_has_unit_mean(seed in any::<u64>(), n in 0u32..=4) {
        let mut r = rng(seed);
        let inc = random_increment(&mut r, 4);
        let pi: f64 = r.random_range(-1.5..1.5);
        let d = euler_product_dist(&inc, pi, n).unwrap();
        prop_assert!((d.mean() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn single_factor_rescaling_is_convex_ordered(
        seed in any::<u64>(),
        a in 1.0..6.0f64,
    ) {
        let mut r = rng(seed);
        let inc = random_increment(&mut r, 4);
        let pi: f64 = r.random_range(0.05..1.0);
        let x = euler_product_dist(&inc, pi, 1).unwrap();
        let y = euler_product_dist(&inc, a * pi, 1).unwrap();
        prop_assert!(check_convex(&x, &y, 1e-9).holds);
    }

    #[test]
    fn uncentered_product_mean_identity(seed in any::<u64>(), n in 1u32..=4) {
        let mut r = rng(seed);
        let inc = random_increment(&mut r, 4);
        let pi: f64 = r.random_range(-1.2..1.2);
        let factor = DiscreteDist::new(
            inc.law().atoms().iter().map(|at| (1.0 + pi * at.x, at.p)),
        ).unwrap();
        let mut product = DiscreteDist::point_mass(1.0);
        for _ in 0..n {
            product = product.product_independent(&factor);
        }
        let expected = (1.0 + pi * inc.drift()).powi(n as i32);
        prop_assert!((product.mean() - expected).abs() <= 1e-10);
    }
}

/// Solver outputs on the perturbed market converge to the base-market
/// outputs as the inserted branch's probability vanishes.
#[test]
fn perturbed_solutions_converge_to_base_model() {
    use riskorder::{build_base_example, build_paper_example, ProbConvention};
    let base = build_base_example();
    for p in [0.9, 0.3] {
        let u = UtilitySpec::power(p).unwrap();
        let pi_base = solve_dp(&base, &u, 1.0).unwrap().policy.controls[0].unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let tree = build_paper_example(eps, 0.05, 20.0, ProbConvention::Normalized).unwrap();
            let pi = solve_dp(&tree, &u, 1.0).unwrap().policy.controls[0].unwrap();
            let diff = (pi - pi_base).abs();
            assert!(diff < last, "difference must shrink with eps");
            last = diff;
        }
        assert!(last < 1e-4, "residual {last} at eps = 1e-6");
    }
}

//! Property tests for the invariants that span modules.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use recurlab::circle::{circle_dist, CirclePoint, IntervalSet, RadiusSequence};
use recurlab::cli::{execute, parse_config};
use recurlab::dynamics::PiecewiseLinearMap;
use recurlab::dynamics::{
    iterate, min_return_distance, return_distances, return_time, sample_rng, OrbitPoint, Real, ReturnTime, SystemSpec,
};
use recurlab::exact::{
    build_recurrence_set, build_recurrence_set_piecewise, ear_truncated_a, integer_map_step, pair_correlation,
    DEFAULT_ARC_BUDGET,
};
use recurlab::experiments::{easy_bound, rio_truncated_measure, wilson, SampleOptions, CI_SLACK_WIDTHS, Z95};
use recurlab::nt::{bezout_expand, bezout_polynomials, gcd_mersenne, matrix_lattice, scalar_lattice, Poly};
use recurlab::transfer::build_ulam;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn recurrence_set_measure_is_twice_the_radius(a in 2i64..=4, n in 1u64..=12, num in 1i64..=25, den in 100i64..=400) {
        // Keep a^n arcs within the default budget.
        let n = n.min(match a { 2 => 12, 3 => 8, _ => 6 });
        let r = q(num, den);
        let e = build_recurrence_set(a, n, &r, DEFAULT_ARC_BUDGET).unwrap();
        prop_assert_eq!(e.measure, &r + &r);
    }

    #[test]
    fn membership_matches_direct_iteration(n in 1u64..=8, num in 1i64..=40, den in 41i64..=200, xn in 0i64..10_000, xd in 1i64..10_000) {
        let r = q(num, den * 2);
        let e = build_recurrence_set(2, n, &r, DEFAULT_ARC_BUDGET).unwrap();
        let x = CirclePoint::new(q(xn % xd, xd));
        let mut y = x.value().clone();
        for _ in 0..n {
            y = integer_map_step(2, &y);
        }
        let inside = circle_dist(&CirclePoint::new(y), &x) < r;
        prop_assert_eq!(e.set.contains(&x), inside);
    }

    #[test]
    fn recurrence_sets_grow_with_the_radius(a in 2i64..=3, n in 1u64..=8, r1 in 1i64..=50, r2 in 1i64..=50) {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let small = build_recurrence_set(a, n, &q(lo, 101), DEFAULT_ARC_BUDGET).unwrap();
        let large = build_recurrence_set(a, n, &q(hi, 101), DEFAULT_ARC_BUDGET).unwrap();
        prop_assert!(small.set.is_subset(&large.set));
    }

    #[test]
    fn piecewise_oracle_agrees_on_the_doubling_map(n in 1u64..=10, num in 1i64..=60, den in 61i64..=400) {
        let r = q(num, 2 * den);
        let circle = build_recurrence_set(2, n, &r, DEFAULT_ARC_BUDGET).unwrap();
        let map = PiecewiseLinearMap::from_integer_map(2).unwrap();
        let pl = build_recurrence_set_piecewise(&map, n, &r, DEFAULT_ARC_BUDGET).unwrap();
        prop_assert_eq!(circle.set, pl.set);
    }

    #[test]
    fn pair_correlations_respect_the_bound(i in 1u64..=10, gap in 1u64..=8) {
        let j = i + gap;
        let seq = RadiusSequence::default();
        let p = pair_correlation(2, i, j, &seq.eval_rational(i).unwrap(), &seq.eval_rational(j).unwrap(), DEFAULT_ARC_BUDGET).unwrap();
        prop_assert!(p.bound_ok, "{:?}", p);
    }

    #[test]
    fn eventually_always_sets_shrink_with_the_horizon(n0 in 2u64..=6, extra in 0u64..=6, kappa in 1i64..=8) {
        let seq = RadiusSequence::power_law(q(kappa, 8), BigRational::one()).unwrap();
        let m = n0 + extra;
        let a = ear_truncated_a(2, n0, m, &seq, DEFAULT_ARC_BUDGET).unwrap();
        let b = ear_truncated_a(2, n0, m + 1, &seq, DEFAULT_ARC_BUDGET).unwrap();
        prop_assert!(b.set.is_subset(&a.set));
    }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn gcd_identity(a in 2i64..=7, m in 1u64..=20, n in 1u64..=20) {
        prop_assert!(gcd_mersenne(a, m, n).unwrap().holds);
    }

    #[test]
    fn scalar_generator_solves_the_equation(a in 2i64..=5, m in 1u64..=10, n in 1u64..=10) {
        let lat = scalar_lattice(a, m, n).unwrap();
        prop_assert!(lat.verify());
        let am: BigInt = BigInt::from(a).pow(m as u32) - BigInt::one();
        let an: BigInt = BigInt::from(a).pow(n as u32) - BigInt::one();
        let total: BigInt = &lat.k0 * &am + &lat.l0 * &an;
        prop_assert!(total.is_zero());
    }

    #[test]
    fn one_by_one_matrix_lattice_is_the_scalar_lattice(a in 2i64..=5, m in 1u64..=8, n in 1u64..=8) {
        let s = scalar_lattice(a, m, n).unwrap();
        let mat = matrix_lattice(&[vec![a]], m, n).unwrap();
        prop_assert!(mat.identity_holds);
        let k = mat.k_gen[(0, 0)].clone();
        let l = mat.l_gen[(0, 0)].clone();
        // The matrix equation carries the opposite sign on l.
        let sign = if k == s.k0 { BigInt::one() } else { -BigInt::one() };
        prop_assert_eq!(&k * &sign, s.k0.clone());
        prop_assert_eq!(-(&l * &sign), s.l0.clone());
    }

    #[test]
    fn bezout_expands_to_one(m in 1u64..=16, n in 1u64..=16) {
        prop_assume!(num_integer::gcd(m, n) == 1);
        let (u, v) = bezout_polynomials(m, n).unwrap();
        prop_assert_eq!(bezout_expand(m, n, &u, &v), Poly::one());
    }
}

proptest! {
    #![proptest_config(cases(32))]

    #[test]
    fn fixed_point_integer_maps_are_exact(a in 2i64..=5, seed in 0u64..1000, n in 1usize..=100) {
        let sys = SystemSpec::integer_map(a).unwrap();
        let x = OrbitPoint::sample(&mut sample_rng(seed, 0), 1, 512);
        let fixed = iterate(&sys, &x, n).unwrap();
        let mut y = x.to_rational(0);
        for _ in 0..n {
            y = integer_map_step(a, &y);
        }
        prop_assert_eq!(fixed.to_rational(0), y);
    }

    #[test]
    fn doubling_the_precision_changes_no_distance(seed in 0u64..1000) {
        let sys = SystemSpec::beta(Real::golden()).unwrap();
        let n = 60;
        let x = OrbitPoint::sample(&mut sample_rng(seed, 0), 1, 256);
        let wide = OrbitPoint::exact(x.to_rational(0)).to_fixed(512);
        let d1 = return_distances(&sys, &x, n).unwrap();
        let d2 = return_distances(&sys, &wide, n).unwrap();
        for (a, b) in d1.iter().zip(&d2) {
            // Both are within 2^{-63} of the true distance.
            prop_assert!(a.abs_diff(*b) <= 4, "{} vs {}", a, b);
        }
    }

    #[test]
    fn return_statistics_are_monotone(seed in 0u64..1000) {
        let sys = SystemSpec::doubling();
        let x = OrbitPoint::sample(&mut sample_rng(seed, 1), 1, 1024);
        let rho: Vec<f64> = [10usize, 40, 160, 640].iter().map(|&m| min_return_distance(&sys, &x, m).unwrap().rho).collect();
        prop_assert!(rho.windows(2).all(|w| w[1] <= w[0]), "{:?}", rho);
        let tau: Vec<usize> = [0.2, 0.05, 0.01, 0.002]
            .iter()
            .map(|&r| match return_time(&sys, &x, r, 900).unwrap() {
                ReturnTime::Returned(k) => k,
                ReturnTime::BeyondHorizon(h) => h + 1,
            })
            .collect();
        prop_assert!(tau.windows(2).all(|w| w[0] <= w[1]), "{:?}", tau);
    }

    #[test]
    fn rotation_distances_do_not_depend_on_the_point(x in 0i64..1000, y in 0i64..1000, n in 1usize..=50) {
        let sys = SystemSpec::Rotation { alpha: Real::rational(q(7, 31)) };
        let dx = return_distances(&sys, &OrbitPoint::from_ratio(x, 1000), n).unwrap();
        let dy = return_distances(&sys, &OrbitPoint::from_ratio(y, 1000), n).unwrap();
        prop_assert_eq!(dx, dy);
    }

    #[test]
    fn ulam_rows_are_stochastic(num in 11i64..=40, bins in prop::sample::select(vec![16usize, 50, 64, 100])) {
        let sys = SystemSpec::beta(Real::rational(q(num, 10))).unwrap();
        let op = build_ulam(&sys, bins).unwrap();
        prop_assert!(op.max_row_defect() <= 1e-12);
        prop_assert!(op.density.iter().all(|&d| d >= 0.0));
        let mass: f64 = op.density.iter().sum::<f64>() / bins as f64;
        prop_assert!((mass - 1.0).abs() <= 1e-12, "{}", mass);
    }

    #[test]
    fn wilson_interval_is_inside_the_unit_interval(hits in 0u32..=500, extra in 0u32..=500) {
        let n = (hits + extra).max(1) as f64;
        let p = hits as f64 / n;
        let (lo, hi) = wilson(p, n, Z95);
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0, "{} {} {}", lo, p, hi);
    }

    #[test]
    fn radii_are_non_negative(kappa in 1i64..=100, gamma in 0i64..=30, n in 1u64..=1_000_000) {
        let s = RadiusSequence::power_log(q(kappa, 10), q(gamma, 10)).unwrap();
        prop_assert!(s.eval_f64(n).unwrap() >= 0.0);
        let s = RadiusSequence::power_law(q(kappa, 10), q(gamma, 10)).unwrap();
        prop_assert!(s.eval_f64(n).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn truncated_estimates_obey_the_easy_bound(k in 20u64..=60, span in 10u64..=200, kappa in 1i64..=4, seed in 0u64..100) {
        let seq = RadiusSequence::power_law(q(kappa, 8), q(2, 1)).unwrap();
        let n = k + span;
        let rep = rio_truncated_measure(&SystemSpec::doubling(), &seq, k, n, &SampleOptions::new(400, seed)).unwrap();
        let last = rep.rows.last().unwrap();
        let width = (last.ci_high - last.ci_low) / 2.0;
        let bound = easy_bound(&seq, k, n, 1).unwrap();
        prop_assert!(last.estimate <= bound + CI_SLACK_WIDTHS * width, "{} vs {}", last.estimate, bound);
    }

    #[test]
    fn identical_seeds_give_identical_reports(seed in 0u64..1_000_000, n in 50u64..300) {
        let text = format!("verb = \"rio\"\n[run]\nseed = {seed}\nsamples = 200\n[window]\nn = {n}\n");
        let cfg = parse_config(&text).unwrap();
        let a = execute(&cfg).unwrap().report.to_json();
        let b = execute(&cfg).unwrap().report.to_json();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sequences_survive_text_round_trips(kappa in 1i64..=99, t in 0i64..=40, which in 0usize..3) {
        let s = match which {
            0 => RadiusSequence::power_law(q(kappa, 7), q(t, 9)).unwrap(),
            1 => RadiusSequence::power_log(q(kappa, 7), q(t, 9)).unwrap(),
            _ => RadiusSequence::table(vec![q(kappa, 200), q(t + 1, 300)]).unwrap(),
        };
        prop_assert_eq!(s.to_string().parse::<RadiusSequence>().unwrap(), s);
    }
}

#[test]
fn interval_set_full_and_empty_are_complements() {
    assert_eq!(IntervalSet::full().complement(), IntervalSet::empty());
}

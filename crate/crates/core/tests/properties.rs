//! Randomized invariants.

use num_rational::BigRational;
use proptest::prelude::*;

use iirforge::filterspec::{benchmark_by_id, discretize};
use iirforge::fixedpoint::{dyadic, CoefficientFormat, QuantizedFilter};
use iirforge::hardware::{compare_with_reference, size_datapath, IoFormat};
use iirforge::mcm::{adder_lower_bound, odd_fundamental, solve_mcm};
use iirforge::report::{dyadic_decimal, FilterReport};
use iirforge::response::{is_stable_codes, is_stable_exact, satisfies_grid, verify_spec, Verification};
use iirforge::search::{symmetric_orbit, widen};

fn stable_a(w: u32, g: i32) -> impl Strategy<Value = (i64, i64)> {
    let u = 1i64 << (w as i32 - 1 - g);
    let h = 1i64 << (w - 1);
    let m = (2 * u - 1).min(h - 1);
    (-m..=m, -(u - 1).min(h - 1)..=(u - 1).min(h - 1))
        .prop_filter("stable", move |&(a1, a2)| a1.abs() - a2 <= u - 1)
}

fn code(w: u32) -> impl Strategy<Value = i64> {
    let h = 1i64 << (w - 1);
    -h..h
}

fn filter(a: (i64, i64), b: [i64; 3], w: u32, ga: i32, gb: i32) -> QuantizedFilter {
    QuantizedFilter::new([a.0, a.1], b, CoefficientFormat::new(w, ga).unwrap(), CoefficientFormat::new(w, gb).unwrap())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn mcm_graphs_multiply_correctly(ts in prop::collection::vec(-600i64..600, 1..4), x in -1000i128..1000) {
        let g = solve_mcm(&ts, 6).unwrap().unwrap();
        g.validate().unwrap();
        for &t in &ts {
            prop_assert_eq!(g.multiply(t, x), Some(t as i128 * x));
        }
        let funds: Vec<u64> = ts.iter().filter_map(|&t| odd_fundamental(t)).map(|f| f.odd).collect();
        prop_assert!(g.adder_count() >= adder_lower_bound(&funds));
    }

    #[test]
    fn orbit_preserves_grid_feasibility_and_cost(a in stable_a(5, 1), b0 in code(5), b1 in code(5), b2 in code(5)) {
        let spec = benchmark_by_id("lp1_0").unwrap();
        let grid = discretize(&spec, 40).unwrap();
        let base = satisfies_grid(&filter(a, [b0, b1, b2], 5, 1, 0), &grid).unwrap().is_ok();
        let cost = solve_mcm(&[b0, b1, b2], 8).unwrap().unwrap().adder_count();
        for t in symmetric_orbit(b0, b1, b2) {
            if t.iter().all(|v| (-16..16).contains(v)) {
                let q = filter(a, t, 5, 1, 0);
                prop_assert_eq!(satisfies_grid(&q, &grid).unwrap().is_ok(), base);
                prop_assert_eq!(solve_mcm(&t, 8).unwrap().unwrap().adder_count(), cost);
            }
        }
    }

    #[test]
    fn stability_codes_match_reals(w in 3u32..9, g in 0i32..2, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
        let h = 1i64 << (w - 1);
        let (a1, a2) = ((x1 * 2.0 * h as f64) as i64 - h, (x2 * 2.0 * h as f64) as i64 - h);
        let fmt = CoefficientFormat::new(w, g).unwrap();
        let exact = is_stable_exact(&fmt.to_real(a1), &fmt.to_real(a2));
        prop_assert_eq!(is_stable_codes(a1, a2, fmt), exact);
    }

    #[test]
    fn widening_keeps_the_real_filter(a in stable_a(5, 1), b in prop::array::uniform3(code(5)), k in 0u32..4) {
        let spec = benchmark_by_id("lp3_1").unwrap();
        let grid = discretize(&spec, 30).unwrap();
        let q = filter(a, b, 5, 1, 0);
        let wq = widen(&q, 5 + k).unwrap();
        prop_assert_eq!(wq.to_real(), q.to_real());
        prop_assert_eq!(
            satisfies_grid(&wq, &grid).unwrap().is_ok(),
            satisfies_grid(&q, &grid).unwrap().is_ok()
        );
        prop_assert_eq!(widen(&wq, 4), None);
    }

    #[test]
    fn decimal_coefficients_are_exact(n in -100_000i64..100_000, e in -30i32..10) {
        let s = dyadic_decimal(n, e);
        let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let mut v = BigRational::from_integer(digits.parse().unwrap())
            / BigRational::from_integer(num_bigint::BigInt::from(10).pow(frac.len() as u32));
        if s.starts_with('-') {
            v = -v;
        }
        prop_assert_eq!(v, dyadic(n, e));
    }

    #[test]
    fn filter_report_round_trips(a in stable_a(6, 0), b in prop::array::uniform3(code(6)), gb in -3i32..3) {
        let q = filter(a, b, 6, 0, gb);
        let r = FilterReport::new(&q);
        let back: FilterReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back.to_filter().unwrap(), q);
    }

    #[test]
    fn verified_filters_pass_every_grid(a in stable_a(5, 1), b in prop::array::uniform3(code(5))) {
        let spec = benchmark_by_id("lp1_0").unwrap();
        let q = filter(a, b, 5, 1, -1);
        if verify_spec(&q, &spec, 1e-3).unwrap().is_verified() {
            for n in [3, 17, 101] {
                prop_assert!(satisfies_grid(&q, &discretize(&spec, n).unwrap()).unwrap().is_ok());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn sized_datapaths_round_faithfully(
        a in stable_a(6, 1),
        b in prop::array::uniform3(code(6)),
        gb in -2i32..2,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        prop_assume!(b != [0, 0, 0]);
        let q = filter(a, b, 6, 1, gb);
        let dp = size_datapath(&q, None, IoFormat::symmetric(12, 0, &q).unwrap()).unwrap();
        let lim = 1i64 << (dp.io.m_in - dp.io.l_in);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<i64> = (0..400).map(|_| rng.gen_range(-lim..lim)).collect();
        let (_, _, s) = compare_with_reference(&dp, &xs).unwrap();
        prop_assert!(s.max_raw_ulps < 1.0, "{}", s.max_raw_ulps);
        let (ys, _, _) = compare_with_reference(&dp, &vec![0; 50]).unwrap();
        prop_assert!(ys.iter().all(|&y| y == 0));
    }
}

#[test]
fn verification_outcome_is_typed() {
    let spec = benchmark_by_id("lp1_0").unwrap();
    let q = filter((0, 0), [0, 0, 0], 5, 1, 0);
    assert!(matches!(verify_spec(&q, &spec, 1e-3).unwrap(), Verification::Counterexample(_)));
}

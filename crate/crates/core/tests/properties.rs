use openrates::evl::{exceeds, hits, level_hole, Observable, Transform};
use openrates::hitting::{survival_exact, survival_operator, MeasureKind};
use openrates::maps::{pi_set, theta_analytic, Hole, IntervalMap};
use openrates::rare_events::{q_series_exact, q_series_matrix};
use openrates::real::{int, pow2, rat, to_f64, Rational};
use openrates::sft::{block_measure_maxentropy, delete_block, topological_entropy, Presentation, Sft};
use openrates::system::{GridChoice, OpenSystem, SolverOptions};
use openrates::transfer::{assemble_ulam, leading_triple, UlamGrid, DEFAULT_TOL};
use proptest::prelude::*;

fn preset(i: usize) -> IntervalMap {
    match i % 5 {
        0 => IntervalMap::doubling(),
        1 => IntervalMap::tent(),
        2 => IntervalMap::times(3),
        3 => IntervalMap::times(5),
        _ => IntervalMap::skew_markov(),
    }
}

fn markov() -> GridChoice {
    GridChoice::Markov { cap: 1 << 14 }
}

fn open(map: &IntervalMap, hole: &Hole, grid: GridChoice) -> Result<OpenSystem, TestCaseError> {
    match OpenSystem::build(map, hole, grid, SolverOptions::default()) {
        Err(openrates::Error::Reducible { .. }) => Err(TestCaseError::reject("reducible open system")),
        Err(openrates::Error::NotMarkov(_)) => Err(TestCaseError::reject("no finite Markov closure")),
        other => Ok(other.unwrap()),
    }
}

fn dyadic_hole(num: i64, den_exp: i32, r_exp: i32) -> Hole {
    let center = Rational::new(num.into(), (1i64 << den_exp).into());
    Hole::around(&[center], &pow2(-r_exp)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eval_stays_in_unit_interval(i in 0usize..5, x in 0.0f64..1.0) {
        let y = preset(i).eval(x);
        prop_assert!((0.0..=1.0).contains(&y), "T({x}) = {y}");
    }

    #[test]
    fn orbit_semigroup(i in 0usize..4, num in 0i64..1024, n in 0usize..12, m in 0usize..12) {
        let map = preset(i);
        let x = rat(num, 1024);
        let whole = map.orbit_exact(&x, n + m);
        let first = map.orbit_exact(&x, n);
        let second = map.orbit_exact(first.last().unwrap(), m);
        prop_assert_eq!(whole.last(), second.last());
    }

    #[test]
    fn analytic_theta_bounds(nums in proptest::collection::vec(1i64..63, 1..3)) {
        let map = IntervalMap::doubling();
        let centers: Vec<Rational> = nums.iter().map(|&k| rat(k, 63)).collect();
        let pi = pi_set(&map, &centers, 32).unwrap();
        let total: f64 = pi.pairs.iter().map(|p| to_f64(&p.weight)).sum();
        let theta = theta_analytic(&pi);
        prop_assert!((0.0..=1.0).contains(&theta));
        prop_assert!(total < 1.0);
        let periodic = centers.iter().any(|c| map.detect_period_exact(c, 32).is_some());
        if !periodic {
            prop_assert_eq!(theta, 1.0);
        }
    }

    #[test]
    fn aperiodic_centers_give_theta_one(k in 1i64..50) {
        // 1/(2·(2k+1)) is preperiodic but never returns to itself.
        let map = IntervalMap::doubling();
        let c = rat(1, 2 * (2 * k + 1));
        prop_assert_eq!(map.detect_period_exact(&c, 64), None);
        prop_assert_eq!(theta_analytic(&pi_set(&map, &[c], 64).unwrap()), 1.0);
    }

    #[test]
    fn closed_matrix_preserves_lebesgue(i in 0usize..5, bins in 1usize..300) {
        let m = assemble_ulam(&preset(i), &UlamGrid::uniform(bins).unwrap());
        for s in m.column_pairing_sums() {
            prop_assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_monotone_in_hole(num in 1i64..64, r in 6i32..10, grow in 1i32..3) {
        let map = IntervalMap::doubling();
        let grid = GridChoice::Uniform { bins: 1024 };
        let small = open(&map, &dyadic_hole(num, 6, r), grid)?;
        let large = open(&map, &dyadic_hole(num, 6, r - grow), grid)?;
        prop_assert!(large.lambda() <= small.lambda() + 1e-12);
    }

    #[test]
    fn markov_grid_is_exact(num in 1i64..16, r in 5i32..8) {
        // A uniform dyadic grid fine enough to resolve the hole is itself Markov.
        let map = IntervalMap::doubling();
        let hole = dyadic_hole(num, 4, r);
        let a = open(&map, &hole, markov())?;
        let b = open(&map, &hole, GridChoice::Uniform { bins: 1 << r })?;
        prop_assert!((a.lambda() - b.lambda()).abs() < 1e-13);
    }

    #[test]
    fn gap_bounded_below_for_small_holes(num in 1i64..32, r in 6i32..11) {
        let sys = open(&IntervalMap::doubling(), &dyadic_hole(num, 5, r), markov())?;
        prop_assert!(sys.triple.gap >= 0.2, "gap = {}", sys.triple.gap);
    }

    #[test]
    fn eigen_residuals_below_tol(i in 0usize..5, bins in 8usize..256) {
        let m = assemble_ulam(&preset(i), &UlamGrid::uniform(bins).unwrap());
        let t = leading_triple(&m, DEFAULT_TOL, 1_000_000).unwrap();
        prop_assert!(t.residual < 1e-12 && t.residual_left < 1e-12);
    }

    #[test]
    fn q_methods_agree(i in 0usize..3, num in 1i64..32, r in 5i32..9) {
        let map = preset(i);
        let hole = dyadic_hole(num, 5, r);
        let sys = open(&map, &hole, markov())?;
        let phi0 = sys.phi0_exact.clone().unwrap();
        let a = q_series_exact(&map, &hole, &phi0, 30).unwrap();
        let b = q_series_matrix(&sys, 30).unwrap();
        for (x, y) in a.q.iter().zip(&b.q) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn kac_tail_sum_is_one(num in 1i64..32, r in 4i32..8) {
        let sys = open(&IntervalMap::doubling(), &dyadic_hole(num, 5, r), markov())?;
        let qs = q_series_matrix(&sys, 400).unwrap();
        let tail = qs.tail_extrapolated_sum(sys.lambda());
        prop_assert!((tail - 1.0).abs() < 1e-6, "tail sum {tail}");
        let partial: Vec<f64> = (1..=400).step_by(50).map(|n| qs.partial_sum(n)).collect();
        prop_assert!(partial.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn exact_survival_matches_operator(i in 0usize..3, num in 1i64..8, den in 3i64..5) {
        let map = preset(i);
        let hole = Hole::around(&[rat(num, 8)], &rat(1, 1 << den)).unwrap();
        let sys = open(&map, &hole, markov())?;
        let exact = survival_exact(&map, &hole, 10, MeasureKind::Nu0, None, 1 << 16).unwrap();
        prop_assert_eq!(exact.truncated_at, None);
        let op = survival_operator(&sys.open, &vec![1.0; sys.grid().bins()], 10, MeasureKind::Nu0).unwrap();
        for (a, b) in exact.values.iter().zip(&op.values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn evl_events_coincide_pathwise(x0 in 0.0f64..1.0, n in 1usize..64, k in 1i64..200, log in any::<bool>()) {
        let transform = if log { Transform::NegLogDistance } else { Transform::NegDistance };
        let obs = Observable::new(rat(1, 3), transform).unwrap();
        let r = k as f64 / 1024.0;
        let z = obs.level_for_radius(r);
        let hole = level_hole(&obs, z).unwrap();
        let map = IntervalMap::doubling();
        prop_assert_eq!(exceeds(&map, &obs, x0, n, z), hits(&map, &hole, x0, n));
    }

    #[test]
    fn deleting_blocks_lowers_entropy(word in proptest::collection::vec(0u8..2, 2..7)) {
        let golden = Sft::new(2, vec![vec![1, 1]]).unwrap();
        let h = topological_entropy(&golden).unwrap();
        if golden.is_allowed(&word).unwrap() {
            if let Ok(open) = delete_block(&golden, &word) {
                if let Ok(h_open) = topological_entropy(&open) {
                    prop_assert!(h_open <= h + 1e-12);
                }
            }
        }
    }
}

#[test]
fn parry_cylinders_sum_to_one() {
    let shifts = [
        Sft::full(2).unwrap(),
        Sft::new(2, vec![vec![1, 1]]).unwrap(),
        Sft::new(3, vec![vec![0, 0], vec![1, 2, 1]]).unwrap(),
    ];
    for sft in &shifts {
        let a = sft.alphabet();
        for len in 1..=6u32 {
            let mut total = 0.0;
            let mut stationary = vec![0.0; a];
            for code in 0..(a as u64).pow(len) {
                let word: Vec<u8> = (0..len).rev().map(|i| ((code / (a as u64).pow(i)) % a as u64) as u8).collect();
                if sft.is_allowed(&word).unwrap() {
                    let m = block_measure_maxentropy(sft, &word).unwrap();
                    total += m;
                    stationary[*word.last().unwrap() as usize] += m;
                }
            }
            assert!((total - 1.0).abs() < 1e-12, "length {len}: {total}");
            // Shift invariance: the last-symbol marginal equals the one-symbol measure.
            for s in 0..a {
                let single = if sft.is_allowed(&[s as u8]).unwrap() {
                    block_measure_maxentropy(sft, &[s as u8]).unwrap()
                } else {
                    0.0
                };
                assert!((stationary[s] - single).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn entropy_invariant_under_recoding() {
    let sft = Sft::new(3, vec![vec![0, 0], vec![1, 2, 1]]).unwrap();
    let base = Presentation::new(&sft, sft.natural_order()).unwrap().perron().unwrap().lambda;
    for order in sft.natural_order() + 1..=6 {
        let l = Presentation::new(&sft, order).unwrap().perron().unwrap().lambda;
        assert!((l.ln() - base.ln()).abs() < 1e-12, "order {order}");
    }
}

#[test]
fn hazard_ratio_tends_to_lambda() {
    for (map, center) in [(IntervalMap::doubling(), rat(1, 3)), (IntervalMap::tent(), rat(2, 3)), (IntervalMap::skew_markov(), rat(1, 3))] {
        let hole = Hole::around(&[center], &rat(1, 64)).unwrap();
        let sys = OpenSystem::build(&map, &hole, GridChoice::Auto { cap: 1 << 14, bins: 2048 }, SolverOptions::default()).unwrap();
        let c = survival_operator(&sys.open, &sys.phi0, 400, MeasureKind::Mu0).unwrap();
        let ratio = c.values[400] / c.values[399];
        assert!((ratio - sys.lambda()).abs() < 1e-10, "{ratio} vs {}", sys.lambda());
    }
}

#[test]
fn zero_mass_hole_is_closed_system() {
    let hole = Hole::from_intervals(openrates::interval::IntervalSet::from_intervals([(int(1), int(1))]));
    let sys = OpenSystem::build(&IntervalMap::doubling(), &hole, markov(), SolverOptions::default()).unwrap();
    assert!(sys.delta_is_zero());
    assert!((sys.lambda() - 1.0).abs() < 1e-13);
}

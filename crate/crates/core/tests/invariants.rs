use nalgebra::DMatrix;
use proptest::prelude::*;

use biofilm::model::{
    dead_fractions, dissipation_rate, interaction_drive, jacobian, living_fractions, residual,
    ModelParams, Rates, SimState,
};
use biofilm::scenarios::{parse_config, serialize};
use biofilm::solver::{solve_step, SolverSettings};
use biofilm::verification::{check_jacobian_seeded, random_config, FD_TOLERANCE};

/// Error-free sum: `a + b == s + err` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let aa = s - bb;
    (s, (a - aa) + (b - bb))
}

fn fraction() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

/// Symmetric growth matrix, sensitivities and viscosities for `n` species.
fn params(n: usize) -> impl Strategy<Value = ModelParams> {
    (
        prop::collection::vec(-2.0f64..3.0, n * n),
        prop::collection::vec(0.0f64..5.0, n),
        prop::collection::vec(0.2f64..3.0, n),
    )
        .prop_map(move |(a, b, eta)| {
            let growth = DMatrix::from_fn(n, n, |i, j| a[i.min(j) * n + i.max(j)]);
            ModelParams::new(growth, b, eta).unwrap()
        })
}

/// Interior state with the volume constraint closed by `phi0`.
fn state(n: usize) -> impl Strategy<Value = SimState> {
    (
        prop::collection::vec(0.01f64..1.0, n + 1),
        prop::collection::vec(fraction(), n),
        -50.0f64..50.0,
    )
        .prop_map(|(w, psi, gamma)| {
            let total: f64 = w.iter().sum();
            SimState {
                t: 0.0,
                phi0: w[0] / total,
                phi: w[1..].iter().map(|x| x / total).collect(),
                psi,
                gamma,
            }
        })
}

fn sized() -> impl Strategy<Value = (ModelParams, SimState, SimState)> {
    (1usize..=5).prop_flat_map(|n| (params(n), state(n), state(n)))
}

proptest! {
    #[test]
    fn living_and_dead_add_up(
        (phi, psi) in (1usize..8).prop_flat_map(|n| {
            (prop::collection::vec(0.0f64..=1.0, n), prop::collection::vec(0.0f64..=1.0, n))
        })
    ) {
        let living = living_fractions(&phi, &psi).unwrap();
        let dead = dead_fractions(&phi, &psi).unwrap();
        for i in 0..phi.len() {
            let sum = living[i] + dead[i];
            if sum != phi[i] {
                // Only an exact half-ulp tie may round away from phi.
                let (s, err) = two_sum(living[i], dead[i]);
                let offset = (s - phi[i]) + err;
                let half_up = (phi[i].next_up() - phi[i]) / 2.0;
                let half_down = (phi[i] - phi[i].next_down()) / 2.0;
                prop_assert!(offset.abs() == half_up || offset.abs() == half_down,
                    "{} + {} = {} != {}", living[i], dead[i], sum, phi[i]);
            }
        }
    }

    #[test]
    fn dissipation_is_non_negative(
        (p, s, rates) in (1usize..=5).prop_flat_map(|n| {
            (
                params(n),
                state(n),
                (
                    -1e3f64..1e3,
                    prop::collection::vec(-1e3f64..1e3, n),
                    prop::collection::vec(-1e3f64..1e3, n),
                ),
            )
        })
    ) {
        let (phi0, phi, psi) = rates;
        let d = dissipation_rate(&s, &Rates { phi0, phi, psi }, &p).unwrap();
        prop_assert!(d >= 0.0, "dissipation {d}");
    }

    #[test]
    fn quadratic_form_ignores_labels(
        (p, s, perm) in (1usize..=5).prop_flat_map(|n| {
            (params(n), state(n), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
        })
    ) {
        let phibar = living_fractions(&s.phi, &s.psi).unwrap();
        let form = |phibar: &[f64], a: &DMatrix<f64>| -> f64 {
            let d = interaction_drive(phibar, a).unwrap();
            phibar.iter().zip(&d).map(|(x, y)| x * y).sum()
        };
        let q = p.permuted(&perm).unwrap();
        let permuted: Vec<f64> = perm.iter().map(|&k| phibar[k]).collect();
        let (a, b) = (form(&phibar, p.growth()), form(&permuted, q.growth()));
        // By brute force over all index pairs.
        let n = phibar.len();
        let mut direct = 0.0;
        for i in 0..n {
            for j in 0..n {
                direct += p.growth()[(i, j)] * phibar[i] * phibar[j];
            }
        }
        let scale = 1.0 + direct.abs();
        prop_assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
        prop_assert!((a - direct).abs() <= 1e-13 * scale, "{a} vs {direct}");
    }

    #[test]
    fn multiplier_enters_linearly((p, new, old) in sized(), dt in 1e-5f64..1e-1) {
        let n = p.n();
        let j = jacobian(&new, &old, dt, &p, 100.0, 10.0).unwrap();
        let last = 2 * n + 1;
        prop_assert_eq!(j[(last, 0)], 1.0);
        prop_assert_eq!(j[(last, last)], 0.0);
        for i in 0..=n {
            prop_assert_eq!(j[(i, last)], 1.0);
        }
        let mut shifted = new.clone();
        shifted.gamma += 1.0;
        let r0 = residual(&new, &old, dt, &p, 100.0, 10.0).unwrap();
        let r1 = residual(&shifted, &old, dt, &p, 100.0, 10.0).unwrap();
        for i in 0..=n {
            prop_assert!((r1.0[i] - r0.0[i] - 1.0).abs() < 1e-9 * (1.0 + r0.0[i].abs()));
        }
    }

    #[test]
    fn constraint_row_is_the_volume_balance((p, new, old) in sized()) {
        let r = residual(&new, &old, 1e-3, &p, 50.0, 5.0).unwrap();
        prop_assert_eq!(r.constraint(), new.constraint_violation());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobian_matches_finite_differences(p in (1usize..=4).prop_flat_map(params), seed in any::<u64>()) {
        for flagged in [false, true] {
            let report = check_jacobian_seeded(&p.clone().with_gamma_in_psi(flagged), 5, seed);
            prop_assert!(report.passed, "{}", report);
            prop_assert!(report.worst_error <= FD_TOLERANCE);
        }
    }

    #[test]
    fn accepted_step_keeps_constraint_and_bounds((p, s, _) in sized(), c in 0.0f64..150.0, alpha in 0.0f64..20.0) {
        use biofilm::model::ForcingSignal;
        let settings = SolverSettings::default();
        let (nutrient, antibiotic) = (ForcingSignal::constant(c), ForcingSignal::constant(alpha));
        let mut old = s;
        old.gamma = 0.0;
        let (new, diag) = solve_step(&old, settings.dt, &p, &nutrient, &antibiotic, 1, &settings).unwrap();
        prop_assert!(new.constraint_violation().abs() <= 10.0 * settings.residual_tolerance);
        prop_assert!(new.is_interior());
        prop_assert!(diag.dissipation >= -1e-12);
    }

    #[test]
    fn config_text_round_trips(seed in any::<u64>()) {
        let config = random_config(seed);
        let text = serialize(&config);
        let parsed = parse_config(&text).unwrap();
        prop_assert_eq!(&parsed, &config);
        prop_assert_eq!(serialize(&parsed), text);
    }
}

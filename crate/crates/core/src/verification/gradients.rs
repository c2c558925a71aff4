use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    barrier_potential, dissipation_potential, free_energy_density, jacobian, residual,
    ModelParams, Rates, SimState,
};

use super::{CheckReport, DEFAULT_SEED};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Relative tolerance of the finite-difference comparisons; the matching
/// absolute floor is `1e-10`.
pub const FD_TOLERANCE: f64 = 1e-6;
const ABS_FLOOR: f64 = 1e-10;

fn random_state<R: Rng>(rng: &mut R, n: usize) -> SimState {
    let mut frac = || rng.random_range(0.05..0.95);
    let phi0 = frac();
    let phi = (0..n).map(|_| frac()).collect();
    let psi = (0..n).map(|_| frac()).collect();
    SimState {
        t: 0.0,
        phi0,
        phi,
        psi,
        gamma: rng.random_range(-50.0..50.0),
    }
}

fn label(n: usize, k: usize) -> String {
    match k {
        0 => "phi0".into(),
        k if k <= n => format!("phi_{k}"),
        k if k <= 2 * n => format!("psi_{}", k - n),
        _ => "gamma".into(),
    }
}

/// Relative error against the larger magnitude, with the absolute floor
/// folded into the denominator.
fn rel_err(analytic: f64, fd: f64, scale: f64) -> f64 {
    (analytic - fd).abs() / scale.max(ABS_FLOOR / FD_TOLERANCE)
}

struct Worst {
    err: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            err: 0.0,
            at: "none".into(),
        }
    }

    fn update(&mut self, err: f64, at: impl FnOnce() -> String) {
        if err > self.err || err.is_nan() {
            self.err = err;
            self.at = at();
        }
    }

    fn report(self, name: String, seed: u64) -> CheckReport {
        CheckReport::new(name, self.err <= FD_TOLERANCE, self.err, self.at).with_seed(seed)
    }
}

fn barriers(s: &SimState, params: &ModelParams) -> f64 {
    let mut e = barrier_potential(s.phi0, params.empty_penalty()).expect("interior");
    for i in 0..params.n() {
        e += barrier_potential(s.phi[i], params.penalty(i)).expect("interior");
        e += barrier_potential(s.psi[i], params.penalty(i)).expect("interior");
    }
    e
}

pub fn check_energy_gradient(params: &ModelParams, sample_count: usize) -> CheckReport {
    check_energy_gradient_seeded(params, sample_count, DEFAULT_SEED)
}

/// Compares the non-rate, non-multiplier part of every residual row with a
/// central difference of free energy plus barrier potentials.
pub fn check_energy_gradient_seeded(
    params: &ModelParams,
    sample_count: usize,
    seed: u64,
) -> CheckReport {
    let n = params.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::new();
    for sample in 0..sample_count.max(1) {
        let mut s = random_state(&mut rng, n);
        s.gamma = 0.0;
        let c = rng.random_range(0.0..200.0);
        let alpha = rng.random_range(0.0..20.0);
        let r = residual(&s, &s, 1.0, params, c, alpha).expect("interior sample");
        let u = s.unknowns();
        for k in 0..=2 * n {
            let shifted = |delta: f64| {
                let mut v = u.clone();
                v[k] += delta;
                SimState::from_unknowns(0.0, &v).expect("same layout")
            };
            let (up, down) = (shifted(FD_STEP), shifted(-FD_STEP));
            // The barrier terms are tiny next to the free energy, so each
            // part is differenced on its own to keep its rounding separate.
            let energy = |st: &SimState| free_energy_density(st, params, c, alpha).expect("dimensions match");
            let fd = (energy(&up) - energy(&down)) / (2.0 * FD_STEP)
                + (barriers(&up, params) - barriers(&down, params)) / (2.0 * FD_STEP);
            let a = r.0[k];
            worst.update(rel_err(a, fd, a.abs().max(fd.abs())), || {
                format!("sample {sample} {} analytic {a:.6e} fd {fd:.6e}", label(n, k))
            });
        }
    }
    worst.report(format!("energy gradient n={n}"), seed)
}

pub fn check_dissipation_gradient(params: &ModelParams, sample_count: usize) -> CheckReport {
    check_dissipation_gradient_seeded(params, sample_count, DEFAULT_SEED)
}

/// Compares the viscous part of every residual row with a central
/// difference of the dissipation function in the rates.
pub fn check_dissipation_gradient_seeded(
    params: &ModelParams,
    sample_count: usize,
    seed: u64,
) -> CheckReport {
    let n = params.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd155);
    let mut worst = Worst::new();
    for sample in 0..sample_count.max(1) {
        let mut s = random_state(&mut rng, n);
        s.gamma = 0.0;
        let mut rate = || rng.random_range(-1.0..1.0);
        let rates = Rates {
            phi0: rate(),
            phi: (0..n).map(|_| rate()).collect(),
            psi: (0..n).map(|_| rate()).collect(),
        };
        let old = SimState {
            phi0: s.phi0 - rates.phi0,
            phi: s.phi.iter().zip(&rates.phi).map(|(x, r)| x - r).collect(),
            psi: s.psi.iter().zip(&rates.psi).map(|(x, r)| x - r).collect(),
            ..s.clone()
        };
        // The exact quotients the residual will see.
        let rates = Rates::between(&old, &s, 1.0).expect("positive step");
        let moving = residual(&s, &old, 1.0, params, 0.0, 0.0).expect("interior sample");
        let resting = residual(&s, &s, 1.0, params, 0.0, 0.0).expect("interior sample");
        for k in 0..=2 * n {
            let shifted = |delta: f64| {
                let mut r = rates.clone();
                match k {
                    0 => r.phi0 += delta,
                    k if k <= n => r.phi[k - 1] += delta,
                    k => r.psi[k - n - 1] += delta,
                }
                dissipation_potential(&s, &r, params).expect("dimensions match")
            };
            let fd = (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP);
            let a = moving.0[k] - resting.0[k];
            worst.update(rel_err(a, fd, a.abs().max(fd.abs())), || {
                format!("sample {sample} {} analytic {a:.6e} fd {fd:.6e}", label(n, k))
            });
        }
    }
    worst.report(format!("dissipation gradient n={n}"), seed)
}

pub fn check_jacobian(params: &ModelParams, sample_count: usize) -> CheckReport {
    check_jacobian_seeded(params, sample_count, DEFAULT_SEED)
}

/// Full analytic Jacobian against central differences of the residual at
/// random `(new, old, dt)` triples. Errors are relative to the largest
/// entry of the row.
pub fn check_jacobian_seeded(params: &ModelParams, sample_count: usize, seed: u64) -> CheckReport {
    let n = params.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1ac0);
    let mut worst = Worst::new();
    for sample in 0..sample_count.max(1) {
        let new = random_state(&mut rng, n);
        let mut jitter = || rng.random_range(-0.02..0.02);
        let old = SimState {
            phi0: new.phi0 + jitter(),
            phi: new.phi.iter().map(|x| x + jitter()).collect(),
            psi: new.psi.iter().map(|x| x + jitter()).collect(),
            gamma: 0.0,
            t: 0.0,
        };
        let dt = 1e-4 * 10f64.powf(rng.random_range(0.0..2.0));
        let c = rng.random_range(0.0..200.0);
        let alpha = rng.random_range(0.0..20.0);
        let jac = jacobian(&new, &old, dt, params, c, alpha).expect("interior sample");
        let u = new.unknowns();
        let size = u.len();
        let mut fd = nalgebra::DMatrix::zeros(size, size);
        for col in 0..size {
            let eval = |delta: f64| {
                let mut v = u.clone();
                v[col] += delta;
                let st = SimState::from_unknowns(0.0, &v).expect("same layout");
                residual(&st, &old, dt, params, c, alpha).expect("interior sample").0
            };
            let diff = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            fd.set_column(col, &diff);
        }
        for row in 0..size {
            let scale = jac.row(row).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for col in 0..size {
                let (a, f) = (jac[(row, col)], fd[(row, col)]);
                worst.update(rel_err(a, f, scale), || {
                    format!(
                        "sample {sample} d{}/d{} analytic {a:.6e} fd {f:.6e}",
                        label(n, row),
                        label(n, col)
                    )
                });
            }
        }
    }
    let tag = if params.gamma_in_psi() { ", multiplier in psi rows" } else { "" };
    worst.report(format!("jacobian n={n}{tag}"), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_one() -> ModelParams {
        ModelParams::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
    }

    #[test]
    fn energy_gradient_by_hand() {
        let s = SimState {
            t: 0.0,
            phi0: 0.6,
            phi: vec![0.2, 0.2],
            psi: vec![1.0, 1.0],
            gamma: 0.0,
        };
        let p = case_one();
        let e = |x: f64| {
            let mut st = s.clone();
            st.phi[0] = x;
            free_energy_density(&st, &p, 100.0, 10.0).unwrap()
        };
        let fd = (e(0.2 + FD_STEP) - e(0.2 - FD_STEP)) / (2.0 * FD_STEP);
        assert!((fd + 40.0).abs() < 1e-7);
    }

    #[test]
    fn passes_with_negligible_barrier() {
        let p = case_one().with_barrier_scale(1e-12).unwrap();
        let report = check_energy_gradient(&p, 5);
        assert!(report.passed, "{report}");
    }

    #[test]
    fn same_seed_same_report() {
        let p = case_one();
        assert_eq!(check_jacobian_seeded(&p, 3, 9), check_jacobian_seeded(&p, 3, 9));
        assert_eq!(check_jacobian_seeded(&p, 3, 9).seed, Some(9));
    }
}

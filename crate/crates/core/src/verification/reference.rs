//! Reference integrator built from the rate form of the evolution
//! equations.
//!
//! Differentiating the volume constraint gives `phi0' + sum phi_i' = 0`.
//! Per species the viscous operator is the 2x2 block
//! `eta [[psi^2 + 1, phi psi], [phi psi, phi^2]]` with determinant
//! `eta^2 phi^2`, so the rates are affine in the multiplier and the
//! constraint fixes it in closed form. The resulting ODE is stiff near the
//! bounds, so it is advanced with the two-stage Radau IIA collocation method
//! on sub-steps of `dt / substep_factor`, with its own finite-difference
//! Jacobian and Newton loop. Nothing here calls the main residual or solver.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{ModelParams, SimState};
use crate::scenarios::ScenarioConfig;
use crate::solver::{StepDiagnostics, Termination, Trajectory, TrajectoryPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("reference integrator: substep_factor must be at least 10, got {0}")]
    SubstepFactor(usize),
    #[error("reference integrator: invalid initial state: {0}")]
    Initial(String),
    #[error("reference integrator: rate system singular or out of domain at step {step} (t = {t:.6e})")]
    Singular { step: usize, t: f64 },
    #[error("reference integrator: no convergence at step {step} (t = {t:.6e}) even at sub-step {h:.3e}")]
    Stalled { step: usize, t: f64, h: f64 },
}

const A: [[f64; 2]; 2] = [[5.0 / 12.0, -1.0 / 12.0], [3.0 / 4.0, 1.0 / 4.0]];
const C: [f64; 2] = [1.0 / 3.0, 1.0];
const MAX_HALVINGS: u32 = 30;
const NEWTON_ITERATIONS: usize = 40;
const NEWTON_TOLERANCE: f64 = 1e-14;

/// Rate field `y' = f(t, y)` for `y = (phi0, phi_1..phi_n, psi_1..psi_n)`.
struct RateField<'a> {
    params: &'a ModelParams,
    config: &'a ScenarioConfig,
    step: usize,
}

fn push(x: f64, k: f64) -> f64 {
    k * (1.0 / (1.0 - x) - 1.0 / x)
}

impl RateField<'_> {
    fn n(&self) -> usize {
        self.params.n()
    }

    /// Rates and multiplier at `(t, y)`, or `None` outside the domain.
    fn eval(&self, t: f64, y: &[f64]) -> Option<(Vec<f64>, f64)> {
        if y.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return None;
        }
        let n = self.n();
        let p = self.params;
        let c = self.config.nutrient.value_at(t, self.step);
        let alpha = self.config.antibiotic.value_at(t, self.step);
        let (phi, psi) = (&y[1..=n], &y[n + 1..]);
        let eta0 = p.empty_viscosity();
        let gp = if p.gamma_in_psi() { 1.0 } else { 0.0 };

        // Each rate is `free + slope * gamma`.
        let mut free = vec![0.0; 2 * n + 1];
        let mut slope = vec![0.0; 2 * n + 1];
        free[0] = -push(y[0], p.empty_penalty()) / eta0;
        slope[0] = -1.0 / eta0;
        for i in 0..n {
            let drive: f64 = (0..n).map(|j| p.growth()[(i, j)] * phi[j] * psi[j]).sum();
            let k = p.penalty(i);
            let eta = p.viscosity()[i];
            let f1 = c * psi[i] * drive - push(phi[i], k);
            let f2 = c * phi[i] * drive - alpha * p.sensitivity()[i] * psi[i] - push(psi[i], k);
            let scale = eta * phi[i] * phi[i];
            let (m11, m12, m22) = (phi[i] * phi[i], -phi[i] * psi[i], psi[i] * psi[i] + 1.0);
            free[1 + i] = (m11 * f1 + m12 * f2) / scale;
            slope[1 + i] = -(m11 + m12 * gp) / scale;
            free[1 + n + i] = (m12 * f1 + m22 * f2) / scale;
            slope[1 + n + i] = -(m12 + m22 * gp) / scale;
        }
        let free_sum: f64 = free[..=n].iter().sum();
        let slope_sum: f64 = slope[..=n].iter().sum();
        if slope_sum == 0.0 || !slope_sum.is_finite() {
            return None;
        }
        let gamma = -free_sum / slope_sum;
        let rates: Vec<f64> = free.iter().zip(&slope).map(|(f, s)| f + s * gamma).collect();
        rates.iter().all(|r| r.is_finite()).then_some((rates, gamma))
    }

    /// One-sided differences stepping away from the nearer bound.
    fn jacobian(&self, t: f64, y: &[f64], fy: &[f64]) -> Option<DMatrix<f64>> {
        let m = y.len();
        let mut jac = DMatrix::zeros(m, m);
        let mut probe = y.to_vec();
        for j in 0..m {
            let x = y[j];
            let room = x.min(1.0 - x);
            let size = (1e-7 * room).max(4.0 * f64::EPSILON);
            let target = if x > 0.5 { x - size } else { x + size };
            probe[j] = target;
            let h = target - x;
            let (f, _) = self.eval(t, &probe)?;
            for i in 0..m {
                jac[(i, j)] = (f[i] - fy[i]) / h;
            }
            probe[j] = x;
        }
        Some(jac)
    }
}

/// One Radau IIA step of size `h` from `(t, y)`. Returns the new point and
/// the Newton iteration count.
fn radau_step(field: &RateField, t: f64, y: &[f64], h: f64) -> Option<(Vec<f64>, usize)> {
    let m = y.len();
    let mut z = DVector::<f64>::zeros(2 * m);
    let stage = |z: &DVector<f64>, s: usize| -> Vec<f64> { (0..m).map(|i| y[i] + z[s * m + i]).collect() };
    for iteration in 1..=NEWTON_ITERATIONS {
        let y1 = stage(&z, 0);
        let y2 = stage(&z, 1);
        let (f1, _) = field.eval(t + C[0] * h, &y1)?;
        let (f2, _) = field.eval(t + C[1] * h, &y2)?;
        let jf = field.jacobian(t + C[1] * h, &y2, &f2)?;
        let mut g = DVector::zeros(2 * m);
        for i in 0..m {
            g[i] = z[i] - h * (A[0][0] * f1[i] + A[0][1] * f2[i]);
            g[m + i] = z[m + i] - h * (A[1][0] * f1[i] + A[1][1] * f2[i]);
        }
        let mut big = DMatrix::identity(2 * m, 2 * m);
        for (bi, row) in A.iter().enumerate() {
            for (bj, &a) in row.iter().enumerate() {
                for i in 0..m {
                    for j in 0..m {
                        big[(bi * m + i, bj * m + j)] -= h * a * jf[(i, j)];
                    }
                }
            }
        }
        let delta = big.lu().solve(&g)?;
        // Damp so the stages stay inside the box.
        let mut lambda = 1.0;
        loop {
            let trial = &z - &delta * lambda;
            let inside = (0..2 * m).all(|k| {
                let x = y[k % m] + trial[k];
                x > 0.0 && x < 1.0
            });
            if inside {
                z = trial;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return None;
            }
        }
        let size = delta.amax() * lambda;
        if lambda == 1.0 && size <= NEWTON_TOLERANCE {
            let y_new = stage(&z, 1);
            field.eval(t + h, &y_new)?;
            return Some((y_new, iteration));
        }
    }
    None
}

/// Advances from `t0` to `t1` in sub-steps of nominal size `h`, halving
/// locally on failure. Returns the state, sub-step count and iterations.
fn advance(
    field: &RateField,
    t0: f64,
    t1: f64,
    y: &[f64],
    pieces: usize,
    depth: u32,
) -> Result<(Vec<f64>, usize, usize), f64> {
    let h = (t1 - t0) / pieces as f64;
    let mut y = y.to_vec();
    let mut substeps = 0;
    let mut iterations = 0;
    for k in 0..pieces {
        let a = t0 + k as f64 * h;
        let b = if k + 1 == pieces { t1 } else { t0 + (k + 1) as f64 * h };
        match radau_step(field, a, &y, b - a) {
            Some((next, its)) => {
                y = next;
                substeps += 1;
                iterations += its;
            }
            None if depth < MAX_HALVINGS => {
                let (next, s, its) = advance(field, a, b, &y, 2, depth + 1)?;
                y = next;
                substeps += s;
                iterations += its;
            }
            None => return Err(b - a),
        }
    }
    Ok((y, substeps, iterations))
}

/// Reference solution at the output times of `config`, using sub-steps of
/// `dt / substep_factor`.
pub fn reference_trajectory(
    config: &ScenarioConfig,
    substep_factor: usize,
) -> Result<Trajectory, ReferenceError> {
    if substep_factor < 10 {
        return Err(ReferenceError::SubstepFactor(substep_factor));
    }
    let initial = config
        .initial_state()
        .map_err(|e| ReferenceError::Initial(e.to_string()))?;
    let n = config.n();
    let dt = config.solver.dt;
    let mut y: Vec<f64> = std::iter::once(initial.phi0)
        .chain(initial.phi.iter().copied())
        .chain(initial.psi.iter().copied())
        .collect();

    let mut field = RateField {
        params: &config.params,
        config,
        step: 0,
    };
    let snapshot = |field: &RateField, t: f64, y: &[f64], step: usize| {
        let (rates, gamma) = field
            .eval(t, y)
            .ok_or(ReferenceError::Singular { step, t })?;
        let state = SimState {
            t,
            phi0: y[0],
            phi: y[1..=n].to_vec(),
            psi: y[n + 1..].to_vec(),
            gamma,
        };
        let p = field.params;
        let mut power = p.empty_viscosity() * rates[0] * rates[0];
        for i in 0..n {
            let (dphi, dpsi) = (rates[1 + i], rates[1 + n + i]);
            let living = dphi * state.psi[i] + state.phi[i] * dpsi;
            power += p.viscosity()[i] * (living * living + dphi * dphi);
        }
        Ok::<_, ReferenceError>((state, power))
    };

    let (state0, _) = snapshot(&field, 0.0, &y, 0)?;
    let mut points = vec![TrajectoryPoint {
        step: 0,
        diagnostics: StepDiagnostics::initial(
            &state0,
            config.nutrient.value_at(0.0, 0),
            config.antibiotic.value_at(0.0, 0),
        ),
        state: state0,
    }];
    for step in 1..=config.solver.steps {
        field.step = step;
        let t0 = (step - 1) as f64 * dt;
        let t1 = step as f64 * dt;
        let (next, substeps, iterations) = advance(&field, t0, t1, &y, substep_factor, 0)
            .map_err(|h| ReferenceError::Stalled { step, t: t1, h })?;
        y = next;
        let (state, dissipation) = snapshot(&field, t1, &y, step)?;
        points.push(TrajectoryPoint {
            step,
            diagnostics: StepDiagnostics {
                newton_iterations: iterations,
                final_residual_norm: 0.0,
                dissipation,
                constraint_violation: state.constraint_violation(),
                substeps,
                nutrient: config.nutrient.value_at(t1, step),
                antibiotic: config.antibiotic.value_at(t1, step),
            },
            state,
        });
    }
    Ok(Trajectory {
        name: format!("{} (reference)", config.name),
        dt,
        points,
        termination: Termination::Completed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ForcingSignal;
    use crate::scenarios::preset;

    #[test]
    fn rejects_coarse_substeps() {
        let c = preset("two-1").unwrap();
        assert_eq!(
            reference_trajectory(&c, 5).unwrap_err(),
            ReferenceError::SubstepFactor(5)
        );
    }

    #[test]
    fn stationary_state_stays_put() {
        let mut c = preset("two-1").unwrap();
        c.params = ModelParams::from_rows(&[vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        c.initial_phi = vec![0.5];
        c.initial_psi = vec![0.5];
        c.nutrient = ForcingSignal::constant(0.0);
        c.antibiotic = ForcingSignal::constant(0.0);
        c.solver.steps = 20;
        let traj = reference_trajectory(&c, 10).unwrap();
        for s in traj.states() {
            assert!((s.phi[0] - 0.5).abs() < 1e-15);
            assert!((s.psi[0] - 0.5).abs() < 1e-15);
            assert!(s.gamma.abs() < 1e-15);
        }
    }

    #[test]
    fn rates_satisfy_constraint_derivative() {
        let c = preset("four-1").unwrap();
        let field = RateField {
            params: &c.params,
            config: &c,
            step: 1,
        };
        let y = [0.3, 0.1, 0.2, 0.15, 0.25, 0.9, 0.8, 0.7, 0.6];
        let (rates, _) = field.eval(0.0, &y).unwrap();
        let total: f64 = rates[..5].iter().sum();
        assert!(total.abs() < 1e-9 * rates.iter().fold(0.0f64, |m, r| m.max(r.abs())));
    }

    #[test]
    fn linear_invariant_is_preserved() {
        let mut c = preset("two-3").unwrap();
        c.solver.steps = 50;
        let traj = reference_trajectory(&c, 10).unwrap();
        for s in traj.states() {
            assert!(s.constraint_violation().abs() < 1e-12);
        }
    }
}

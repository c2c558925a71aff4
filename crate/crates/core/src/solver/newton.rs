use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;
use crate::model::{
    dissipation_rate, jacobian, residual, ForcingSignal, ModelParams, Rates, SimState,
};

use super::{SolverSettings, StepDiagnostics};

/// Rows whose residual is dominated by cancellation cannot be driven below a
/// few ulps of their largest term; this factor sets how many.
const ROUNDING_ULPS: f64 = 16.0;

/// Advances `old` by one backward-Euler step of size `dt`, landing at
/// `t = step_index * dt`.
///
/// Each implicit solve is a damped Newton iteration from the old state. If it
/// fails, the step is retried as 2, 4, ... equal sub-steps, up to
/// `settings.max_step_splits` doublings.
pub fn solve_step(
    old: &SimState,
    dt: f64,
    params: &ModelParams,
    nutrient: &ForcingSignal,
    antibiotic: &ForcingSignal,
    step_index: usize,
    settings: &SolverSettings,
) -> Result<(SimState, StepDiagnostics), SolverError> {
    let t_new = step_index as f64 * dt;
    let t_old = t_new - dt;
    let mut last_err = None;
    for split in 0..=settings.max_step_splits {
        let pieces = 1usize << split;
        let h = dt / pieces as f64;
        let mut current = old.clone();
        let mut iterations = 0;
        let mut norm = 0.0;
        let mut failed = None;
        for j in 1..=pieces {
            let t = if j == pieces { t_new } else { t_old + j as f64 * h };
            let c = nutrient.value_at(t, step_index);
            let alpha = antibiotic.value_at(t, step_index);
            match newton(&current, t, h, params, c, alpha, step_index, settings) {
                Ok((next, its, r)) => {
                    current = next;
                    iterations += its;
                    norm = r;
                }
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        match failed {
            Some(e) => last_err = Some(e),
            None => {
                let rates = Rates::between(old, &current, dt)?;
                let diagnostics = StepDiagnostics {
                    newton_iterations: iterations,
                    final_residual_norm: norm,
                    dissipation: dissipation_rate(&current, &rates, params)?,
                    constraint_violation: current.constraint_violation(),
                    substeps: pieces,
                    nutrient: nutrient.value_at(t_new, step_index),
                    antibiotic: antibiotic.value_at(t_new, step_index),
                };
                return Ok((current, diagnostics));
            }
        }
    }
    Err(last_err.expect("at least one attempt is made"))
}

/// One implicit solve. Returns the new state, the number of Newton updates
/// and the final residual infinity norm.
#[allow(clippy::too_many_arguments)]
fn newton(
    old: &SimState,
    t: f64,
    dt: f64,
    params: &ModelParams,
    c: f64,
    alpha: f64,
    step: usize,
    settings: &SolverSettings,
) -> Result<(SimState, usize, f64), SolverError> {
    let eval = |u: &DVector<f64>| -> Option<(SimState, DVector<f64>)> {
        let s = SimState::from_unknowns(t, u).ok()?;
        if !s.is_interior() {
            return None;
        }
        let r = residual(&s, old, dt, params, c, alpha).ok()?;
        Some((s, r.0))
    };
    let norm = |r: &DVector<f64>| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut u = old.unknowns();
    let mut state = SimState::from_unknowns(t, &u)?;
    let mut r = residual(&state, old, dt, params, c, alpha)?.0;
    let mut best = norm(&r);

    for iteration in 0..=settings.max_newton_iterations {
        let jac = jacobian(&state, old, dt, params, c, alpha)?;
        if converged(&r, &jac, &u, settings.residual_tolerance) {
            return Ok((state, iteration, norm(&r)));
        }
        if iteration == settings.max_newton_iterations {
            break;
        }
        let delta = jac
            .lu()
            .solve(&r)
            .filter(|d| d.iter().all(|x| x.is_finite()))
            .ok_or(SolverError::SingularJacobian { step })?;

        let current = norm(&r);
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut full_step = None;
        for _ in 0..=settings.max_halvings {
            let trial = &u - &delta * lambda;
            if let Some((s, rt)) = eval(&trial) {
                if norm(&rt) < current {
                    accepted = Some((trial, s, rt));
                    break;
                }
                if full_step.is_none() && lambda == 1.0 {
                    full_step = Some((trial, s, rt));
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, s, rt)) => {
                u = trial;
                state = s;
                r = rt;
                best = best.min(norm(&r));
            }
            None => {
                // A full step that no longer lowers the norm may still have
                // reached the rounding floor.
                if let Some((trial, s, rt)) = full_step {
                    let jt = jacobian(&s, old, dt, params, c, alpha)?;
                    if converged(&rt, &jt, &trial, settings.residual_tolerance) {
                        return Ok((s, iteration + 1, norm(&rt)));
                    }
                }
                break;
            }
        }
    }
    Err(SolverError::NonConvergence {
        step,
        best_norm: best,
    })
}

/// Row-wise test `|R_r| <= tol + k eps sum_s |J_rs u_s|`.
fn converged(r: &DVector<f64>, jac: &DMatrix<f64>, u: &DVector<f64>, tol: f64) -> bool {
    (0..r.len()).all(|row| {
        let scale: f64 = jac
            .row(row)
            .iter()
            .zip(u.iter())
            .map(|(a, b)| (a * b).abs())
            .sum();
        r[row].abs() <= tol + ROUNDING_ULPS * f64::EPSILON * scale
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(b: f64) -> ModelParams {
        ModelParams::from_rows(&[vec![1.0]], vec![b], vec![1.0]).unwrap()
    }

    #[test]
    fn stationary_midpoint_needs_no_update() {
        let params = single(0.0);
        let old = SimState {
            t: 0.0,
            phi0: 0.5,
            phi: vec![0.5],
            psi: vec![0.5],
            gamma: 0.0,
        };
        let zero = ForcingSignal::constant(0.0);
        let (new, diag) =
            solve_step(&old, 1e-4, &params, &zero, &zero, 1, &SolverSettings::default()).unwrap();
        assert!(diag.newton_iterations <= 2);
        assert!((new.phi[0] - 0.5).abs() < 1e-14);
        assert!((new.psi[0] - 0.5).abs() < 1e-14);
        assert!(diag.dissipation.abs() < 1e-20);
    }

    #[test]
    fn growth_step_satisfies_constraint() {
        let params = ModelParams::from_rows(
            &[vec![2.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let old = SimState::initial(&[0.2, 0.2], &[1.0, 1.0]).unwrap();
        let (new, diag) = solve_step(
            &old,
            1e-4,
            &params,
            &ForcingSignal::constant(100.0),
            &ForcingSignal::constant(10.0),
            1,
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(new.constraint_violation().abs() <= 1e-10);
        assert!(diag.dissipation >= 0.0);
        assert!(new.phi[0] > 0.2 && new.phi[1] > 0.2);
        assert_eq!(new.t, 1e-4);
    }

    #[test]
    fn exhausted_iterations_report_step() {
        let params = single(1.0);
        let old = SimState::initial(&[0.3], &[0.9]).unwrap();
        let settings = SolverSettings {
            max_newton_iterations: 1,
            max_step_splits: 0,
            ..SolverSettings::default()
        };
        let err = solve_step(
            &old,
            1e-2,
            &params,
            &ForcingSignal::constant(100.0),
            &ForcingSignal::constant(100.0),
            7,
            &settings,
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::NonConvergence { step: 7, .. }));
    }
}

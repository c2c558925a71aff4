use crate::scenarios::ScenarioConfig;
use crate::solver::{run, Trajectory};

use super::reference::{reference_trajectory, ReferenceError};

/// Largest pointwise difference between two trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub max_error: f64,
    pub step: usize,
    pub component: String,
}

/// Infinity-norm distance over the fractions `(phi0, phi, psi)` at every
/// step present in both trajectories. The multiplier is left out: it is an
/// algebraic variable whose discrete and continuous values differ at
/// first order independent of the state error.
pub fn state_discrepancy(a: &Trajectory, b: &Trajectory) -> Discrepancy {
    let mut worst = Discrepancy {
        max_error: 0.0,
        step: 0,
        component: "none".into(),
    };
    let mut j = 0;
    for p in &a.points {
        while j < b.points.len() && b.points[j].step < p.step {
            j += 1;
        }
        let Some(q) = b.points.get(j).filter(|q| q.step == p.step) else {
            continue;
        };
        let (s, r) = (&p.state, &q.state);
        let mut consider = |err: f64, name: &dyn Fn() -> String| {
            if err > worst.max_error || err.is_nan() {
                worst = Discrepancy {
                    max_error: err,
                    step: p.step,
                    component: name(),
                };
            }
        };
        consider((s.phi0 - r.phi0).abs(), &|| "phi0".into());
        for i in 0..s.n() {
            consider((s.phi[i] - r.phi[i]).abs(), &|| format!("phi_{}", i + 1));
            consider((s.psi[i] - r.psi[i]).abs(), &|| format!("psi_{}", i + 1));
        }
    }
    worst
}

/// Errors of backward Euler against the reference at several step sizes
/// over a common horizon, and the fitted order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
}

/// Runs the scenario at each `dt` over the horizon `steps * dt` of the
/// given config and fits `log(error)` against `log(dt)` by least squares.
pub fn convergence_order(
    config: &ScenarioConfig,
    dts: &[f64],
    substep_factor: usize,
) -> Result<ConvergenceStudy, ReferenceError> {
    let horizon = config.solver.steps as f64 * config.solver.dt;
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut c = config.clone();
        c.solver.dt = dt;
        c.solver.steps = (horizon / dt).round() as usize;
        let main = run(&c);
        let reference = reference_trajectory(&c, substep_factor)?;
        let mut err = state_discrepancy(&main, &reference).max_error;
        if !main.is_complete() {
            err = f64::INFINITY;
        }
        errors.push(err);
    }
    Ok(ConvergenceStudy {
        dts: dts.to_vec(),
        order: fitted_slope(dts, &errors),
        errors,
    })
}

fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1e-3, 5e-4, 2.5e-4];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!((fitted_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_trajectories_agree() {
        let mut c = crate::scenarios::preset("two-3").unwrap();
        c.solver.steps = 10;
        let t = run(&c);
        assert_eq!(state_discrepancy(&t, &t).max_error, 0.0);
    }
}

//! Backward-Euler time stepping with a damped Newton solve per step.

mod newton;

pub use newton::solve_step;

use crate::error::{ModelError, SolverError};
use crate::model::{ForcingSignal, ModelParams, SimState};
use crate::scenarios::ScenarioConfig;

/// Numerical controls of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Infinity-norm target for the step residual. Rows whose terms are
    /// large enough that rounding alone exceeds this are accepted at their
    /// rounding floor instead.
    pub residual_tolerance: f64,
    pub max_newton_iterations: usize,
    /// Line-search halvings per Newton update.
    pub max_halvings: usize,
    pub dt: f64,
    pub steps: usize,
    /// Early stop once no fraction moves by more than this in one step.
    /// Zero disables the check.
    pub steady_state_tolerance: f64,
    /// A step whose Newton solve fails is retried as `2^k` equal sub-steps
    /// for `k = 1..=max_step_splits`.
    pub max_step_splits: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-10,
            max_newton_iterations: 50,
            max_halvings: 10,
            dt: 1e-4,
            steps: 1500,
            steady_state_tolerance: 0.0,
            max_step_splits: 10,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidArgument(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.residual_tolerance > 0.0 && self.residual_tolerance.is_finite()) {
            return bad(format!(
                "residual tolerance must be positive, got {}",
                self.residual_tolerance
            ));
        }
        if !(self.steady_state_tolerance >= 0.0 && self.steady_state_tolerance.is_finite()) {
            return bad(format!(
                "steady-state tolerance must be non-negative, got {}",
                self.steady_state_tolerance
            ));
        }
        if self.max_newton_iterations == 0 {
            return bad("at least one Newton iteration is required".into());
        }
        if self.max_step_splits > 20 {
            return bad(format!("at most 20 step splits, got {}", self.max_step_splits));
        }
        Ok(())
    }
}

/// Per-step record of how the solve went.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Newton updates summed over all sub-steps.
    pub newton_iterations: usize,
    /// Residual infinity norm of the last implicit solve.
    pub final_residual_norm: f64,
    /// `2 Delta` at the new state with the step's difference quotients.
    pub dissipation: f64,
    pub constraint_violation: f64,
    /// 1 for a regular step, `2^k` when the step had to be split.
    pub substeps: usize,
    pub nutrient: f64,
    pub antibiotic: f64,
}

impl StepDiagnostics {
    /// Diagnostics attached to the initial state.
    pub fn initial(state: &SimState, nutrient: f64, antibiotic: f64) -> Self {
        Self {
            newton_iterations: 0,
            final_residual_norm: 0.0,
            dissipation: 0.0,
            constraint_violation: state.constraint_violation(),
            substeps: 0,
            nutrient,
            antibiotic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub state: SimState,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    SteadyState { step: usize },
    Failed { step: usize, error: SolverError },
}

/// Accepted states in step order. On failure the prefix up to the last
/// accepted step is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub name: String,
    pub dt: f64,
    pub points: Vec<TrajectoryPoint>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        !matches!(self.termination, Termination::Failed { .. })
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("a trajectory always holds its initial state")
    }

    pub fn states(&self) -> impl Iterator<Item = &SimState> {
        self.points.iter().map(|p| &p.state)
    }
}

/// Runs a scenario from its initial state.
pub fn run(config: &ScenarioConfig) -> Trajectory {
    match config.initial_state() {
        Ok(initial) => integrate(
            &config.name,
            &config.params,
            initial,
            &config.nutrient,
            &config.antibiotic,
            &config.solver,
        ),
        Err(e) => Trajectory {
            name: config.name.clone(),
            dt: config.solver.dt,
            points: Vec::new(),
            termination: Termination::Failed {
                step: 0,
                error: e.into(),
            },
        },
    }
}

/// Integrates from an explicit initial state for `settings.steps` steps.
///
/// Species are processed internally in a canonical order so that
/// relabelling them changes nothing but the labels: every sum, pivot choice
/// and convergence test then sees the same operands in the same order.
pub fn integrate(
    name: &str,
    params: &ModelParams,
    initial: SimState,
    nutrient: &ForcingSignal,
    antibiotic: &ForcingSignal,
    settings: &SolverSettings,
) -> Trajectory {
    let order = canonical_order(params, &initial);
    if order.iter().enumerate().all(|(k, &i)| k == i) {
        return integrate_in_order(name, params, initial, nutrient, antibiotic, settings);
    }
    let relabelled = (params.permuted(&order), initial.permuted(&order));
    let (Ok(p), Ok(s)) = relabelled else {
        unreachable!("a sorted index list is a permutation");
    };
    let mut traj = integrate_in_order(name, &p, s, nutrient, antibiotic, settings);
    let mut back = vec![0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        back[i] = k;
    }
    for point in &mut traj.points {
        point.state = point.state.permuted(&back).expect("inverse of a permutation");
    }
    traj
}

/// Species sorted by their own data: sensitivity, viscosity, initial
/// fractions, self-growth and the sorted off-diagonal growth entries. Ties
/// keep their input order.
fn canonical_order(params: &ModelParams, initial: &SimState) -> Vec<usize> {
    let n = params.n();
    let key = |i: usize| -> Vec<f64> {
        let a = params.growth();
        let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).collect();
        others.sort_by(f64::total_cmp);
        let mut k = vec![
            params.sensitivity()[i],
            params.viscosity()[i],
            initial.phi[i],
            initial.psi[i],
            a[(i, i)],
        ];
        k.extend(others);
        k
    };
    let keys: Vec<Vec<f64>> = (0..n).map(key).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        keys[x]
            .iter()
            .zip(&keys[y])
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

fn integrate_in_order(
    name: &str,
    params: &ModelParams,
    initial: SimState,
    nutrient: &ForcingSignal,
    antibiotic: &ForcingSignal,
    settings: &SolverSettings,
) -> Trajectory {
    let dt = settings.dt;
    let mut points = Vec::with_capacity(settings.steps + 1);
    points.push(TrajectoryPoint {
        step: 0,
        diagnostics: StepDiagnostics::initial(
            &initial,
            nutrient.value_at(initial.t, 0),
            antibiotic.value_at(initial.t, 0),
        ),
        state: initial,
    });
    let mut termination = Termination::Completed;
    for step in 1..=settings.steps {
        let old = &points[points.len() - 1].state;
        match solve_step(old, dt, params, nutrient, antibiotic, step, settings) {
            Ok((state, diagnostics)) => {
                let settled = settings.steady_state_tolerance > 0.0
                    && max_change(old, &state) <= settings.steady_state_tolerance;
                points.push(TrajectoryPoint {
                    step,
                    state,
                    diagnostics,
                });
                if settled {
                    termination = Termination::SteadyState { step };
                    break;
                }
            }
            Err(error) => {
                termination = Termination::Failed { step, error };
                break;
            }
        }
    }
    Trajectory {
        name: name.to_string(),
        dt,
        points,
        termination,
    }
}

fn max_change(a: &SimState, b: &SimState) -> f64 {
    let pairs = a.phi.iter().zip(&b.phi).chain(a.psi.iter().zip(&b.psi));
    pairs.fold((a.phi0 - b.phi0).abs(), |m, (x, y)| m.max((x - y).abs()))
}

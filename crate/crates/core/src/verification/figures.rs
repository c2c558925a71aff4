//! Scenario-level outcomes: who dominates, when the empty space closes and
//! how far the living fractions fall.

use crate::model::ModelParams;
use crate::scenarios::{preset, ScenarioConfig};
use crate::solver::{run, Trajectory};

use super::properties::permutation_check;
use super::CheckReport;

/// Collects the conditions of one check and how far each is missed.
struct Conditions {
    name: String,
    violation: f64,
    notes: Vec<String>,
}

impl Conditions {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            violation: 0.0,
            notes: Vec::new(),
        }
    }

    /// Records `value` against `ok`; `miss` is the distance to the bound.
    fn require(&mut self, label: &str, value: f64, ok: bool, miss: f64) {
        let mark = if ok { "ok" } else { "MISSED" };
        self.notes.push(format!("{label} = {value:.6} {mark}"));
        if !ok {
            self.violation = self.violation.max(miss.abs().max(f64::MIN_POSITIVE));
        }
    }

    fn above(&mut self, label: &str, value: f64, bound: f64) {
        self.require(label, value, value > bound, bound - value);
    }

    fn below(&mut self, label: &str, value: f64, bound: f64) {
        self.require(label, value, value < bound, value - bound);
    }

    fn within(&mut self, label: &str, value: f64, lo: f64, hi: f64) {
        let miss = if value < lo { lo - value } else { value - hi };
        self.require(label, value, (lo..=hi).contains(&value), miss);
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    fn report(self) -> CheckReport {
        CheckReport::new(self.name, self.violation == 0.0, self.violation, self.notes.join("; "))
    }
}

fn simulate(name: &str) -> (ScenarioConfig, Trajectory) {
    let config = preset(name).expect("preset exists");
    let traj = run(&config);
    (config, traj)
}

fn completed(c: &mut Conditions, traj: &Trajectory) -> bool {
    if !traj.is_complete() {
        c.note(format!("{} stopped: {:?}", traj.name, traj.termination));
        c.violation = f64::INFINITY;
        return false;
    }
    true
}

/// First step with `phi0 < 0.01`, with `phi_k` there and its backward
/// difference quotient.
fn closure_event(traj: &Trajectory, k: usize) -> Option<(usize, f64, f64)> {
    let idx = traj.points.iter().position(|p| p.state.phi0 < 0.01)?;
    if idx == 0 {
        return None;
    }
    let (now, before) = (&traj.points[idx].state, &traj.points[idx - 1].state);
    Some((traj.points[idx].step, now.phi[k], (now.phi[k] - before.phi[k]) / traj.dt))
}

fn event_conditions(c: &mut Conditions, traj: &Trajectory, lo: f64, hi: f64, rising: bool) {
    match closure_event(traj, 1) {
        Some((step, phi2, rate)) => {
            c.note(format!("empty space closes at step {step}"));
            c.within("phi_2 at closure", phi2, lo, hi);
            if rising {
                c.above("dphi_2/dt at closure", rate, 0.0);
            } else {
                c.below("dphi_2/dt at closure", rate, 0.0);
            }
        }
        None => c.require("closure step", f64::NAN, false, f64::INFINITY),
    }
}

fn min_psi(traj: &Trajectory, i: usize) -> f64 {
    traj.states().map(|s| s.psi[i]).fold(f64::INFINITY, f64::min)
}

fn dominant(traj: &Trajectory) -> usize {
    let phi = &traj.last().state.phi;
    (0..phi.len())
        .max_by(|&a, &b| phi[a].total_cmp(&phi[b]))
        .expect("at least one species")
}

fn two_one() -> (CheckReport, Option<f64>) {
    let (_, traj) = simulate("two-1");
    let mut c = Conditions::new("two-1 closure and takeover");
    if !completed(&mut c, &traj) {
        return (c.report(), None);
    }
    event_conditions(&mut c, &traj, 0.05, 0.15, false);
    let last = &traj.last().state;
    c.above("final phi_1 - phi_2", last.phi[0] - last.phi[1], 0.0);
    match traj.points.iter().position(|p| p.state.phi[1] < 0.05) {
        Some(k) => {
            let lowest = traj.points[k..]
                .iter()
                .map(|p| p.state.psi[1])
                .fold(f64::INFINITY, f64::min);
            c.below("min psi_2 once phi_2 < 0.05", lowest, 0.5);
        }
        None => c.require("phi_2 falls below 0.05", last.phi[1], false, last.phi[1] - 0.05),
    }
    (c.report(), Some(last.phi[1]))
}

fn two_two(reference_phi2: Option<f64>) -> CheckReport {
    let (_, traj) = simulate("two-2");
    let mut c = Conditions::new("two-2 closure and steady state");
    if !completed(&mut c, &traj) {
        return c.report();
    }
    event_conditions(&mut c, &traj, 0.25, 0.35, true);
    let phi2 = traj.last().state.phi[1];
    match reference_phi2 {
        Some(r) => c.below("|final phi_2 - two-1 final phi_2|", (phi2 - r).abs(), 0.05 + f64::EPSILON),
        None => c.require("two-1 final phi_2 available", f64::NAN, false, f64::INFINITY),
    }
    c.report()
}

fn two_three() -> CheckReport {
    let (_, traj) = simulate("two-3");
    let mut c = Conditions::new("two-3 coexistence");
    if completed(&mut c, &traj) {
        let last = &traj.last().state;
        c.above("final phi_1", last.phi[0], 0.05);
        c.above("final phi_2", last.phi[1], 0.05);
    }
    c.report()
}

fn two_four_five() -> CheckReport {
    let mut c = Conditions::new("two-4 / two-5 initial advantage");
    let (_, four) = simulate("two-4");
    let (_, five) = simulate("two-5");
    if completed(&mut c, &four) && completed(&mut c, &five) {
        let a = &four.last().state;
        let b = &five.last().state;
        c.above("two-4 final phi_2 - phi_1", a.phi[1] - a.phi[0], 0.0);
        c.above("two-5 final phi_1 - phi_2", b.phi[0] - b.phi[1], 0.0);
    }
    c.report()
}

fn two_six() -> CheckReport {
    let (_, traj) = simulate("two-6");
    let mut c = Conditions::new("two-6 competition");
    if completed(&mut c, &traj) {
        let last = &traj.last().state;
        c.above("final phi_2 - phi_1", last.phi[1] - last.phi[0], 0.0);
        c.require("min psi_1", min_psi(&traj, 0), min_psi(&traj, 0) >= 0.5, 0.5 - min_psi(&traj, 0));
        c.require("min psi_2", min_psi(&traj, 1), min_psi(&traj, 1) >= 0.5, 0.5 - min_psi(&traj, 1));
    }
    c.report()
}

fn four_one() -> CheckReport {
    let (_, traj) = simulate("four-1");
    let mut c = Conditions::new("four-1 survival and dominance");
    if completed(&mut c, &traj) {
        c.within("min psi_4", min_psi(&traj, 3), 0.15, 0.30);
        let d = dominant(&traj);
        c.require("dominant species", (d + 1) as f64, d == 0, 1.0);
    }
    c.report()
}

fn four_two() -> CheckReport {
    let (_, traj) = simulate("four-2");
    let mut c = Conditions::new("four-2 head start");
    if completed(&mut c, &traj) {
        let last = &traj.last().state;
        c.above("final phi_4 - phi_3", last.phi[3] - last.phi[2], 0.0);
    }
    c.report()
}

fn four_four() -> CheckReport {
    let (config, traj) = simulate("four-4");
    let mut c = Conditions::new("four-4 antibiotic switch");
    if completed(&mut c, &traj) {
        let switch = match config.antibiotic {
            crate::model::ForcingSignal::Step { switch_step, .. } => switch_step,
            _ => 0,
        };
        for i in 0..3 {
            let hit = traj
                .points
                .iter()
                .find(|p| p.step > switch && p.step <= switch + 100 && p.state.psi[i] < 0.1);
            let label = format!("psi_{} below 0.1 by step", i + 1);
            match hit {
                Some(p) => c.require(&label, p.step as f64, true, 0.0),
                None => {
                    let window_min = traj
                        .points
                        .iter()
                        .filter(|p| p.step > switch && p.step <= switch + 100)
                        .map(|p| p.state.psi[i])
                        .fold(f64::INFINITY, f64::min);
                    c.require(&label, window_min, false, window_min - 0.1);
                }
            }
        }
        let d = dominant(&traj);
        c.require("dominant species", (d + 1) as f64, d == 3, 1.0);
    }
    c.report()
}

/// The qualitative outcome of each built-in scenario.
pub fn figure_checks() -> Vec<CheckReport> {
    let (first, phi2) = two_one();
    vec![
        first,
        two_two(phi2),
        two_three(),
        two_four_five(),
        two_six(),
        four_one(),
        four_two(),
        four_four(),
    ]
}

/// For a two-species preset with equal viscosities and a diagonal growth
/// matrix, exchanging the sensitivities and initial fractions must
/// reproduce the trajectory with the species labels exchanged.
pub fn label_swap_check(name: &str, tolerance: f64) -> CheckReport {
    let config = preset(name).expect("preset exists");
    let p = &config.params;
    let swapped_params = ModelParams::new(
        p.growth().clone(),
        vec![p.sensitivity()[1], p.sensitivity()[0]],
        p.viscosity().to_vec(),
    )
    .expect("valid");
    let by_hand = ScenarioConfig {
        params: swapped_params,
        initial_phi: vec![config.initial_phi[1], config.initial_phi[0]],
        initial_psi: vec![config.initial_psi[1], config.initial_psi[0]],
        ..config.clone()
    };
    let relabelled = config.permuted(&[1, 0]).expect("valid permutation");
    if by_hand != relabelled {
        return CheckReport::new(
            format!("{name} label swap"),
            false,
            f64::INFINITY,
            "swapping b and initial fractions is not a pure relabelling here",
        );
    }
    let mut report = permutation_check(&config, &[1, 0], tolerance);
    report.name = format!("{name} label swap");
    report
}

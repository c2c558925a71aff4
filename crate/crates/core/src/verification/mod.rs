//! Independent checks of the model and the solver: finite-difference
//! oracles, a separate reference integrator, trajectory properties and the
//! qualitative scenario outcomes.

mod compare;
mod figures;
mod gradients;
mod properties;
mod reference;

use std::fmt;
use std::io::Write;

pub use compare::{convergence_order, state_discrepancy, ConvergenceStudy, Discrepancy};
pub use figures::{figure_checks, label_swap_check};
pub use gradients::{
    check_dissipation_gradient, check_dissipation_gradient_seeded, check_energy_gradient,
    check_energy_gradient_seeded, check_jacobian, check_jacobian_seeded, FD_STEP, FD_TOLERANCE,
};
pub use properties::{
    determinism_check, permutation_check, random_config, trajectory_properties,
    PropertyTolerances,
};
pub use reference::{reference_trajectory, ReferenceError};

use crate::scenarios::{preset, PRESET_NAMES};

/// Seed used by the sampling checks unless another is given.
pub const DEFAULT_SEED: u64 = 0x5eed_b10f;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Largest error seen, in the check's own measure.
    pub worst_error: f64,
    /// Where the worst error occurred, or the measured quantities.
    pub location: String,
    pub seed: Option<u64>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, passed: bool, worst_error: f64, location: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            worst_error,
            location: location.into(),
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: worst {:.3e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst_error,
            self.location
        )?;
        if let Some(seed) = self.seed {
            write!(f, " seed={seed:#x}")?;
        }
        Ok(())
    }
}

/// Writes one CSV row per report under a fixed header.
pub fn write_summary<W: Write>(reports: &[CheckReport], destination: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(destination);
    w.write_record(["check", "passed", "worst_error", "location", "seed"])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.passed.to_string(),
            format!("{:.16e}", r.worst_error),
            r.location.clone(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every check. `quick` trims sample counts and skips the
/// reference-integrator studies.
pub fn verification_suite(quick: bool) -> Vec<CheckReport> {
    let samples = if quick { 10 } else { 100 };
    let mut reports = Vec::new();
    for name in ["two-1", "two-3", "four-1"] {
        let params = preset(name).expect("preset exists").params;
        reports.push(check_energy_gradient(&params, samples));
        reports.push(check_dissipation_gradient(&params, samples));
        reports.push(check_jacobian(&params, samples / 2));
        reports.push(check_jacobian(&params.clone().with_gamma_in_psi(true), samples / 2));
    }
    for name in PRESET_NAMES {
        let config = preset(name).expect("preset exists");
        let traj = crate::solver::run(&config);
        reports.extend(trajectory_properties(&traj, &PropertyTolerances::default()));
        let reversed: Vec<usize> = (0..config.n()).rev().collect();
        reports.push(permutation_check(&config, &reversed, 1e-12));
        if !quick {
            reports.push(determinism_check(&config));
        }
    }
    if !quick {
        let config = preset("two-1").expect("preset exists");
        reports.push(reference_agreement(&config, 100, 1e-3));
        reports.push(order_check(&config, &[1e-3, 5e-4, 2.5e-4], 100));
    }
    reports.extend(figure_checks());
    reports
}

/// Backward Euler against the reference integrator on one scenario.
pub fn reference_agreement(
    config: &crate::scenarios::ScenarioConfig,
    substep_factor: usize,
    tolerance: f64,
) -> CheckReport {
    let name = format!("{} reference agreement", config.name);
    let main = crate::solver::run(config);
    match reference_trajectory(config, substep_factor) {
        Ok(reference) => {
            let d = state_discrepancy(&main, &reference);
            CheckReport::new(
                name,
                d.max_error <= tolerance && main.is_complete(),
                d.max_error,
                format!("step {} {}", d.step, d.component),
            )
        }
        Err(e) => CheckReport::new(name, false, f64::INFINITY, e.to_string()),
    }
}

/// Observed order of backward Euler under time-step refinement.
pub fn order_check(
    config: &crate::scenarios::ScenarioConfig,
    dts: &[f64],
    substep_factor: usize,
) -> CheckReport {
    let name = format!("{} convergence order", config.name);
    match convergence_order(config, dts, substep_factor) {
        Ok(study) => CheckReport::new(
            name,
            (study.order - 1.0).abs() <= 0.3,
            (study.order - 1.0).abs(),
            format!(
                "order {:.3}, errors {} at dt {:?}",
                study.order,
                study.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "),
                study.dts
            ),
        ),
        Err(e) => CheckReport::new(name, false, f64::INFINITY, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_has_one_row_per_report() {
        let reports = vec![
            CheckReport::new("a", true, 0.0, "x, y"),
            CheckReport::new("b", false, 1.5, "z").with_seed(7),
        ];
        let mut buf = Vec::new();
        write_summary(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "check,passed,worst_error,location,seed");
        assert_eq!(lines[1], "a,true,0.0000000000000000e0,\"x, y\",");
        assert_eq!(lines[2], "b,false,1.5000000000000000e0,z,7");
    }

    #[test]
    fn display_marks_failures() {
        let r = CheckReport::new("c", false, 2.0, "here").with_seed(16);
        assert_eq!(r.to_string(), "[FAIL] c: worst 2.000e0 (here) seed=0x10");
    }
}

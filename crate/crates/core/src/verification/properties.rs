use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::write_trajectory;
use crate::model::{ForcingSignal, ModelParams};
use crate::scenarios::{OutputOptions, ScenarioConfig};
use crate::solver::{run, SolverSettings, Trajectory};

use super::CheckReport;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTolerances {
    pub constraint: f64,
    pub dissipation_floor: f64,
}

impl Default for PropertyTolerances {
    fn default() -> Self {
        Self {
            constraint: 1e-8,
            dissipation_floor: -1e-12,
        }
    }
}

/// Completion, volume constraint, open bounds and non-negative dissipation
/// on every stored step.
pub fn trajectory_properties(traj: &Trajectory, tol: &PropertyTolerances) -> Vec<CheckReport> {
    let name = &traj.name;
    let mut reports = vec![CheckReport::new(
        format!("{name} completes"),
        traj.is_complete(),
        0.0,
        format!("{:?}", traj.termination),
    )];

    let (mut worst, mut at) = (0.0f64, 0usize);
    for p in &traj.points {
        let v = p.state.constraint_violation().abs();
        if v > worst || v.is_nan() {
            (worst, at) = (v, p.step);
        }
    }
    reports.push(CheckReport::new(
        format!("{name} volume constraint"),
        worst <= tol.constraint,
        worst,
        format!("step {at}"),
    ));

    let mut outside = None;
    let mut closest = f64::INFINITY;
    for p in &traj.points {
        let s = &p.state;
        for (k, &x) in std::iter::once(&s.phi0).chain(&s.phi).chain(&s.psi).enumerate() {
            closest = closest.min(x.min(1.0 - x));
            if outside.is_none() && !(x > 0.0 && x < 1.0) {
                outside = Some((p.step, k, x));
            }
        }
    }
    reports.push(CheckReport::new(
        format!("{name} open bounds"),
        outside.is_none(),
        closest,
        match outside {
            None => "all fractions interior".to_string(),
            Some((step, k, x)) => format!("step {step} unknown {k} = {x}"),
        },
    ));

    let (mut lowest, mut at) = (f64::INFINITY, 0usize);
    for p in traj.points.iter().skip(1) {
        let d = p.diagnostics.dissipation;
        if d < lowest || d.is_nan() {
            (lowest, at) = (d, p.step);
        }
    }
    if traj.points.len() < 2 {
        lowest = 0.0;
    }
    reports.push(CheckReport::new(
        format!("{name} dissipation"),
        lowest >= tol.dissipation_floor,
        lowest,
        format!("minimum at step {at}"),
    ));
    reports
}

/// Runs `config` and its relabelling by `perm` and compares every stored
/// value, species-matched, against `tolerance`.
pub fn permutation_check(config: &ScenarioConfig, perm: &[usize], tolerance: f64) -> CheckReport {
    let name = format!("{} permutation {:?}", config.name, perm);
    let permuted = match config.permuted(perm) {
        Ok(c) => c,
        Err(e) => return CheckReport::new(name, false, f64::INFINITY, e.to_string()),
    };
    let a = run(config);
    let b = run(&permuted);
    if a.points.len() != b.points.len() || a.termination != b.termination && a.is_complete() {
        return CheckReport::new(
            name,
            false,
            f64::INFINITY,
            format!("lengths {} and {}", a.points.len(), b.points.len()),
        );
    }
    let (mut worst, mut at) = (0.0f64, String::from("identical"));
    for (p, q) in a.points.iter().zip(&b.points) {
        let (s, r) = (&p.state, &q.state);
        let mut diffs = vec![
            ("phi0".to_string(), (s.phi0 - r.phi0).abs()),
            ("gamma".to_string(), (s.gamma - r.gamma).abs()),
        ];
        for (k, &old) in perm.iter().enumerate() {
            diffs.push((format!("phi_{}", old + 1), (s.phi[old] - r.phi[k]).abs()));
            diffs.push((format!("psi_{}", old + 1), (s.psi[old] - r.psi[k]).abs()));
        }
        for (what, d) in diffs {
            if d > worst || d.is_nan() {
                worst = d;
                at = format!("step {} {what}", p.step);
            }
        }
    }
    CheckReport::new(name, worst <= tolerance && a.is_complete(), worst, at)
}

fn csv_bytes(traj: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trajectory(traj, 1, &mut buf).expect("writing to memory cannot fail");
    buf
}

/// Two runs of the same config must serialise to identical bytes.
pub fn determinism_check(config: &ScenarioConfig) -> CheckReport {
    let a = csv_bytes(&run(config));
    let b = csv_bytes(&run(config));
    let first_diff = a.iter().zip(&b).position(|(x, y)| x != y);
    let same = a == b;
    CheckReport::new(
        format!("{} determinism", config.name),
        same,
        if same { 0.0 } else { 1.0 },
        match (same, first_diff) {
            (true, _) => format!("{} identical bytes", a.len()),
            (false, Some(k)) => format!("first difference at byte {k}"),
            (false, None) => format!("lengths {} and {}", a.len(), b.len()),
        },
    )
}

/// A random but admissible scenario with 1 to 4 species, derived from
/// `seed` alone.
pub fn random_config(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4usize);
    let mut growth = DMatrix::zeros(n, n);
    for i in 0..n {
        growth[(i, i)] = rng.random_range(0.2..2.0);
        for j in 0..i {
            let a = rng.random_range(-1.0..2.0);
            growth[(i, j)] = a;
            growth[(j, i)] = a;
        }
    }
    let b = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let eta = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let params = ModelParams::new(growth, b, eta).expect("symmetric by construction");
    let initial_phi = (0..n).map(|_| rng.random_range(0.02..0.8 / n as f64)).collect();
    let initial_psi = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
    let nutrient = if rng.random_bool(0.3) {
        ForcingSignal::Sinusoid {
            offset: 50.0,
            amplitude: rng.random_range(0.0..50.0),
            angular_frequency: rng.random_range(10.0..1000.0),
        }
    } else {
        ForcingSignal::constant(rng.random_range(10.0..150.0))
    };
    let antibiotic = if rng.random_bool(0.3) {
        ForcingSignal::Step {
            switch_step: rng.random_range(0..300),
            before: 0.0,
            after: rng.random_range(0.0..100.0),
        }
    } else {
        ForcingSignal::constant(rng.random_range(0.0..20.0))
    };
    ScenarioConfig {
        name: format!("random-{seed}"),
        description: "randomised admissible scenario".into(),
        params,
        initial_phi,
        initial_psi,
        nutrient,
        antibiotic,
        solver: SolverSettings::default(),
        output: OutputOptions::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::preset;

    #[test]
    fn random_configs_validate() {
        for seed in 0..20 {
            random_config(seed).validate().unwrap();
        }
        assert_eq!(random_config(3), random_config(3));
    }

    #[test]
    fn properties_hold_on_short_run() {
        let mut c = preset("two-4").unwrap();
        c.solver.steps = 50;
        let reports = trajectory_properties(&run(&c), &PropertyTolerances::default());
        assert_eq!(reports.len(), 4);
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
    }

    #[test]
    fn identity_permutation_is_exact() {
        let mut c = preset("four-1").unwrap();
        c.solver.steps = 30;
        let r = permutation_check(&c, &[0, 1, 2, 3], 0.0);
        assert!(r.passed);
        assert_eq!(r.worst_error, 0.0);
    }
}

use crate::model::{ForcingSignal, ModelParams};
use crate::solver::SolverSettings;

use super::{ConfigError, OutputOptions, ScenarioConfig};

pub const PRESET_NAMES: [&str; 14] = [
    "two-1", "two-2", "two-3", "two-4", "two-5", "two-6", "two-4s", "two-5s", "two-4ss",
    "two-5ss", "four-1", "four-2", "four-3", "four-4",
];

struct Two {
    a: [[f64; 2]; 2],
    b: [f64; 2],
    eta: [f64; 2],
    phi: [f64; 2],
    steps: usize,
    description: &'static str,
}

fn two(name: &str) -> Option<Two> {
    let eye = [[1.0, 0.0], [0.0, 1.0]];
    let t = |a, b, eta, phi, steps, description| Two {
        a,
        b,
        eta,
        phi,
        steps,
        description,
    };
    Some(match name {
        "two-1" => t([[2.0, 0.0], [0.0, 1.0]], [0.0, 0.0], [1.0, 1.0], [0.2, 0.2], 1000,
            "two species, species 1 grows twice as fast and takes over"),
        "two-2" => t(eye, [0.0, 0.0], [1.0, 2.0], [0.2, 0.2], 1500,
            "two species, equal growth, species 2 twice as viscous"),
        "two-3" => t([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0], [1.0, 2.0], [0.2, 0.2], 1500,
            "two species in protocooperation, both persist"),
        "two-4" => t(eye, [1.0, 2.0], [1.0, 2.0], [0.2, 0.3], 1500,
            "two species under antibiotics, species 2 starts ahead"),
        "two-5" => t(eye, [1.0, 2.0], [1.0, 2.0], [0.25, 0.3], 1500,
            "as two-4 with a larger initial species 1"),
        "two-6" => t([[1.0, -1.0], [-1.0, 1.0]], [0.0, 0.0], [1.0, 2.0], [0.2, 0.2], 1500,
            "two competing species with mutual growth inhibition"),
        "two-4s" => t(eye, [1.0, 2.0], [2.0, 1.0], [0.2, 0.3], 1500,
            "as two-4 with the viscosities swapped"),
        "two-5s" => t(eye, [1.0, 2.0], [2.0, 1.0], [0.25, 0.3], 1500,
            "as two-5 with the viscosities swapped"),
        "two-4ss" => t(eye, [1.0, 2.0], [1.0, 1.0], [0.2, 0.3], 1500,
            "as two-4 with equal viscosities"),
        "two-5ss" => t(eye, [1.0, 2.0], [1.0, 1.0], [0.25, 0.3], 1500,
            "as two-5 with equal viscosities"),
        _ => return None,
    })
}

fn build_two(name: &str, p: Two) -> ScenarioConfig {
    let rows: Vec<Vec<f64>> = p.a.iter().map(|r| r.to_vec()).collect();
    let params = ModelParams::from_rows(&rows, p.b.to_vec(), p.eta.to_vec())
        .expect("built-in parameters are valid");
    ScenarioConfig {
        name: name.to_string(),
        description: p.description.to_string(),
        params,
        initial_phi: p.phi.to_vec(),
        initial_psi: vec![1.0; 2],
        nutrient: ForcingSignal::constant(100.0),
        antibiotic: ForcingSignal::constant(10.0),
        solver: SolverSettings {
            steps: p.steps,
            ..SolverSettings::default()
        },
        output: OutputOptions::default(),
    }
}

fn four(name: &str) -> Option<ScenarioConfig> {
    let mild = vec![0.4, 0.3, 0.2, 0.1];
    let (b, phi4, nutrient, antibiotic, description) = match name {
        "four-1" => (mild, 0.02, ForcingSignal::constant(100.0), ForcingSignal::constant(10.0),
            "four species, constant nutrients and antibiotics"),
        "four-2" => (mild, 0.2, ForcingSignal::constant(100.0), ForcingSignal::constant(10.0),
            "as four-1 with a larger initial species 4"),
        "four-3" => (
            mild,
            0.02,
            ForcingSignal::Sinusoid {
                offset: 50.0,
                amplitude: 50.0,
                angular_frequency: 500.0,
            },
            ForcingSignal::constant(10.0),
            "as four-1 with oscillating nutrient supply",
        ),
        "four-4" => (
            vec![10.0, 2.0, 1.0, 0.01],
            0.02,
            ForcingSignal::constant(100.0),
            ForcingSignal::Step {
                switch_step: 500,
                before: 0.0,
                after: 100.0,
            },
            "antibiotic dose switched on at step 500, species 4 resistant",
        ),
        _ => return None,
    };
    let rows = [
        [1.0, 5.0, 5.0, 5.0],
        [5.0, 1.0, 3.0, 3.0],
        [5.0, 3.0, 1.0, 2.0],
        [5.0, 3.0, 2.0, 1.0],
    ]
    .iter()
    .map(|r| r.iter().map(|x| 0.5 * x).collect())
    .collect::<Vec<Vec<f64>>>();
    let params = ModelParams::from_rows(&rows, b, vec![0.8, 1.0, 1.5, 2.0])
        .expect("built-in parameters are valid");
    Some(ScenarioConfig {
        name: name.to_string(),
        description: description.to_string(),
        params,
        initial_phi: vec![0.02, 0.02, 0.02, phi4],
        initial_psi: vec![1.0; 4],
        nutrient,
        antibiotic,
        solver: SolverSettings::default(),
        output: OutputOptions::default(),
    })
}

/// Built-in scenario by name.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    if let Some(p) = two(name) {
        return Ok(build_two(name, p));
    }
    four(name).ok_or_else(|| ConfigError::UnknownPreset {
        name: name.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Columns: a11 a12 a22 b1 b2 eta1 eta2 phi1 phi2.
    const TABLE: [(&str, [f64; 9]); 10] = [
        ("two-1", [2., 0., 1., 0., 0., 1., 1., 0.2, 0.2]),
        ("two-2", [1., 0., 1., 0., 0., 1., 2., 0.2, 0.2]),
        ("two-3", [1., 1., 1., 0., 0., 1., 2., 0.2, 0.2]),
        ("two-4", [1., 0., 1., 1., 2., 1., 2., 0.2, 0.3]),
        ("two-5", [1., 0., 1., 1., 2., 1., 2., 0.25, 0.3]),
        ("two-6", [1., -1., 1., 0., 0., 1., 2., 0.2, 0.2]),
        ("two-4s", [1., 0., 1., 1., 2., 2., 1., 0.2, 0.3]),
        ("two-5s", [1., 0., 1., 1., 2., 2., 1., 0.25, 0.3]),
        ("two-4ss", [1., 0., 1., 1., 2., 1., 1., 0.2, 0.3]),
        ("two-5ss", [1., 0., 1., 1., 2., 1., 1., 0.25, 0.3]),
    ];

    #[test]
    fn two_species_tables() {
        for (name, row) in TABLE {
            let c = preset(name).unwrap();
            let p = &c.params;
            let a = p.growth();
            let got = [
                a[(0, 0)],
                a[(0, 1)],
                a[(1, 1)],
                p.sensitivity()[0],
                p.sensitivity()[1],
                p.viscosity()[0],
                p.viscosity()[1],
                c.initial_phi[0],
                c.initial_phi[1],
            ];
            assert_eq!(got, row, "{name}");
            assert_eq!(a[(1, 0)], a[(0, 1)]);
            assert_eq!(c.nutrient, ForcingSignal::constant(100.0));
            assert_eq!(c.antibiotic, ForcingSignal::constant(10.0));
            assert_eq!(c.initial_psi, vec![1.0, 1.0]);
            assert_eq!(c.solver.steps, if name == "two-1" { 1000 } else { 1500 });
        }
    }

    #[test]
    fn four_species_tables() {
        let half = [
            [0.5, 2.5, 2.5, 2.5],
            [2.5, 0.5, 1.5, 1.5],
            [2.5, 1.5, 0.5, 1.0],
            [2.5, 1.5, 1.0, 0.5],
        ];
        for name in ["four-1", "four-2", "four-3", "four-4"] {
            let c = preset(name).unwrap();
            for (i, row) in half.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    assert_eq!(c.params.growth()[(i, j)], v);
                }
            }
            assert_eq!(c.params.viscosity(), &[0.8, 1.0, 1.5, 2.0]);
            assert_eq!(c.solver.steps, 1500);
        }
        let c4 = preset("four-4").unwrap();
        assert_eq!(c4.params.sensitivity(), &[10.0, 2.0, 1.0, 0.01]);
        assert_eq!(
            c4.antibiotic,
            ForcingSignal::Step {
                switch_step: 500,
                before: 0.0,
                after: 100.0
            }
        );
        assert_eq!(preset("four-2").unwrap().initial_phi, vec![0.02, 0.02, 0.02, 0.2]);
        assert_eq!(preset("four-1").unwrap().params.sensitivity(), &[0.4, 0.3, 0.2, 0.1]);
        let c3 = preset("four-3").unwrap();
        assert_eq!(c3.nutrient.value_at(0.0, 0), 50.0);
        assert_eq!(c3.antibiotic, ForcingSignal::constant(10.0));
    }

    #[test]
    fn every_name_resolves_and_validates() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            assert_eq!(c.name, name);
            c.validate().unwrap();
        }
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = preset("two-7").unwrap_err();
        assert_eq!(err.code(), "E-UNKNOWN-PRESET");
        let msg = err.to_string();
        assert!(msg.contains("two-1") && msg.contains("four-4"));
    }
}

//! CSV export of trajectories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::solver::{Trajectory, TrajectoryPoint};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {destination}: {source}")]
    Io {
        destination: String,
        #[source]
        source: std::io::Error,
    },
    #[error("output stride must be at least 1")]
    ZeroStride,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub step: usize,
    pub t: f64,
    pub phi0: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub phibar: Vec<f64>,
    pub gamma: f64,
    pub nutrient: f64,
    pub antibiotic: f64,
    pub dissipation: f64,
    pub newton_iterations: usize,
    pub residual_norm: f64,
}

impl CsvRecord {
    pub fn from_point(p: &TrajectoryPoint) -> Self {
        let s = &p.state;
        let d = &p.diagnostics;
        Self {
            step: p.step,
            t: s.t,
            phi0: s.phi0,
            phi: s.phi.clone(),
            psi: s.psi.clone(),
            phibar: s.phi.iter().zip(&s.psi).map(|(f, q)| f * q).collect(),
            gamma: s.gamma,
            nutrient: d.nutrient,
            antibiotic: d.antibiotic,
            dissipation: d.dissipation,
            newton_iterations: d.newton_iterations,
            residual_norm: d.final_residual_norm,
        }
    }

    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["step".to_string(), "t".into(), "phi0".into()];
        for prefix in ["phi", "psi", "phibar"] {
            h.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        h.extend(
            [
                "gamma",
                "nutrient",
                "antibiotic",
                "dissipation",
                "newton_iterations",
                "residual_norm",
            ]
            .map(String::from),
        );
        h
    }

    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![self.step.to_string(), num(self.t), num(self.phi0)];
        for v in [&self.phi, &self.psi, &self.phibar] {
            f.extend(v.iter().map(|&x| num(x)));
        }
        f.extend([
            num(self.gamma),
            num(self.nutrient),
            num(self.antibiotic),
            num(self.dissipation),
            self.newton_iterations.to_string(),
            num(self.residual_norm),
        ]);
        f
    }
}

/// 17 significant digits, enough to recover every `f64` exactly.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the header and every point whose step is a multiple of `stride`.
pub fn write_trajectory<W: Write>(
    traj: &Trajectory,
    stride: usize,
    destination: W,
) -> Result<(), csv::Error> {
    if stride == 0 {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, OutputError::ZeroStride).into());
    }
    let n = traj.points.first().map_or(0, |p| p.state.n());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(destination);
    w.write_record(CsvRecord::header(n))?;
    for p in traj.points.iter().filter(|p| p.step % stride == 0) {
        w.write_record(CsvRecord::from_point(p).fields())?;
    }
    w.flush()?;
    Ok(())
}

/// [`write_trajectory`] into a file, naming the file in any error.
pub fn write_trajectory_file(
    traj: &Trajectory,
    stride: usize,
    path: &Path,
) -> Result<(), OutputError> {
    if stride == 0 {
        return Err(OutputError::ZeroStride);
    }
    let wrap = |source: std::io::Error| OutputError::Io {
        destination: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    let mut buf = BufWriter::new(file);
    write_trajectory(traj, stride, &mut buf).map_err(|e| wrap(e.into()))?;
    buf.flush().map_err(wrap)
}

/// Default output location for a scenario run.
pub fn default_output_path(name: &str) -> PathBuf {
    PathBuf::from(format!("{name}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SimState;
    use crate::solver::{StepDiagnostics, Termination};

    fn trajectory(steps: usize) -> Trajectory {
        let points = (0..=steps)
            .map(|k| {
                let x = 0.1 + 1e-4 * k as f64;
                let state = SimState {
                    t: k as f64 * 1e-4,
                    phi0: 1.0 - 2.0 * x,
                    phi: vec![x, x],
                    psi: vec![0.5, 1.0 / 3.0],
                    gamma: -1.0,
                };
                let diagnostics = StepDiagnostics::initial(&state, 100.0, 10.0);
                TrajectoryPoint {
                    step: k,
                    state,
                    diagnostics,
                }
            })
            .collect();
        Trajectory {
            name: "t".into(),
            dt: 1e-4,
            points,
            termination: Termination::Completed,
        }
    }

    fn render(traj: &Trajectory, stride: usize) -> String {
        let mut buf = Vec::new();
        write_trajectory(traj, stride, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn header_and_single_row() {
        let text = render(&trajectory(0), 1);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "step,t,phi0,phi_1,phi_2,psi_1,psi_2,phibar_1,phibar_2,gamma,nutrient,antibiotic,dissipation,newton_iterations,residual_norm"
        );
        assert!(text.ends_with('\n'));
        let psi2: f64 = lines[1].split(',').nth(6).unwrap().parse().unwrap();
        assert_eq!(psi2, 1.0 / 3.0);
        assert_eq!(lines[1].split(',').nth(6).unwrap(), "3.3333333333333331e-1");
    }

    #[test]
    fn stride_thins_rows() {
        let text = render(&trajectory(1500), 10);
        assert_eq!(text.lines().count(), 152);
        assert!(text.lines().last().unwrap().starts_with("1500,"));
    }

    #[test]
    fn output_is_deterministic() {
        let t = trajectory(20);
        assert_eq!(render(&t, 3), render(&t, 3));
    }

    #[test]
    fn file_errors_name_destination() {
        let err = write_trajectory_file(&trajectory(1), 1, Path::new("/nonexistent/dir/x.csv"))
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
    }
}

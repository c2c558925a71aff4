//! Energy, dissipation, barrier and the discrete evolution equations.
//!
//! Residual rows and Jacobian rows/columns share the unknown ordering
//! `(phi0, phi_1..phi_n, psi_1..psi_n, gamma)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, ModelError};

use super::{ModelParams, SimState};

/// `phi_i * psi_i`, the living biomass of each species.
pub fn living_fractions(phi: &[f64], psi: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_len("living fractions", phi.len(), psi.len())?;
    Ok(phi.iter().zip(psi).map(|(f, p)| f * p).collect())
}

/// `phi_i * (1 - psi_i)`, the dead biomass of each species.
pub fn dead_fractions(phi: &[f64], psi: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_len("living fractions", phi.len(), psi.len())?;
    Ok(phi.iter().zip(psi).map(|(f, p)| f - f * p).collect())
}

/// `(A phibar)_i`, the growth drive felt by each species.
pub fn interaction_drive(phibar: &[f64], growth: &DMatrix<f64>) -> Result<Vec<f64>, ModelError> {
    check_len("growth matrix rows", phibar.len(), growth.nrows())?;
    check_len("growth matrix columns", phibar.len(), growth.ncols())?;
    Ok(drive(phibar, growth))
}

fn drive(phibar: &[f64], growth: &DMatrix<f64>) -> Vec<f64> {
    let n = phibar.len();
    (0..n)
        .map(|i| (0..n).map(|j| growth[(i, j)] * phibar[j]).sum())
        .collect()
}

/// `-c/2 phibar^T A phibar + alpha/2 sum_i b_i psi_i^2`.
pub fn free_energy_density(
    state: &SimState,
    params: &ModelParams,
    c: f64,
    alpha: f64,
) -> Result<f64, ModelError> {
    check_state(state, params)?;
    let phibar = living_fractions(&state.phi, &state.psi)?;
    let d = drive(&phibar, params.growth());
    let growth: f64 = phibar.iter().zip(&d).map(|(x, y)| x * y).sum();
    let toxicity: f64 = params
        .sensitivity()
        .iter()
        .zip(&state.psi)
        .map(|(b, p)| b * p * p)
        .sum();
    Ok(-0.5 * c * growth + 0.5 * alpha * toxicity)
}

/// Logarithmic barrier `-K (ln x + ln(1 - x))`.
pub fn barrier_potential(x: f64, penalty: f64) -> Result<f64, ModelError> {
    check_unit("barrier argument", x)?;
    Ok(-penalty * (x.ln() + (-x).ln_1p()))
}

/// Derivative of [`barrier_potential`]: `K (1/(1-x) - 1/x)`.
pub fn barrier_force(x: f64, penalty: f64) -> Result<f64, ModelError> {
    check_unit("barrier argument", x)?;
    Ok(bforce(x, penalty))
}

/// Second derivative of [`barrier_potential`].
pub fn barrier_curvature(x: f64, penalty: f64) -> Result<f64, ModelError> {
    check_unit("barrier argument", x)?;
    Ok(bcurv(x, penalty))
}

#[inline]
fn bforce(x: f64, k: f64) -> f64 {
    k * (1.0 / (1.0 - x) - 1.0 / x)
}

#[inline]
fn bcurv(x: f64, k: f64) -> f64 {
    let (a, b) = (1.0 - x, x);
    k * (1.0 / (a * a) + 1.0 / (b * b))
}

fn check_unit(what: &str, x: f64) -> Result<(), ModelError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(ModelError::OutOfDomain {
            what: what.to_string(),
            value: x,
        })
    }
}

fn check_state(state: &SimState, params: &ModelParams) -> Result<(), ModelError> {
    check_len("volume fractions", params.n(), state.phi.len())?;
    check_len("living fractions", params.n(), state.psi.len())
}

/// Rates of change of the bounded variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub phi0: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl Rates {
    pub fn zero(n: usize) -> Self {
        Self {
            phi0: 0.0,
            phi: vec![0.0; n],
            psi: vec![0.0; n],
        }
    }

    /// Backward difference `(new - old) / dt`.
    pub fn between(old: &SimState, new: &SimState, dt: f64) -> Result<Self, ModelError> {
        check_len("state dimension", old.n(), new.n())?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ModelError::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (y - x) / dt).collect();
        Ok(Self {
            phi0: (new.phi0 - old.phi0) / dt,
            phi: diff(&old.phi, &new.phi),
            psi: diff(&old.psi, &new.psi),
        })
    }
}

/// Dissipation function
/// `1/2 sum eta_i (d phibar_i/dt)^2 + 1/2 sum eta_i (d phi_i/dt)^2 + 1/2 eta0 (d phi0/dt)^2`.
pub fn dissipation_potential(
    state: &SimState,
    rates: &Rates,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    Ok(0.5 * dissipation_rate(state, rates, params)?)
}

/// Power dissipated by the rates, `rates . d(Delta)/d(rates) = 2 Delta`.
/// Non-negative by construction.
pub fn dissipation_rate(
    state: &SimState,
    rates: &Rates,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    check_state(state, params)?;
    check_len("volume-fraction rates", params.n(), rates.phi.len())?;
    check_len("living-fraction rates", params.n(), rates.psi.len())?;
    let mut total = params.empty_viscosity() * rates.phi0 * rates.phi0;
    for i in 0..params.n() {
        let eta = params.viscosity()[i];
        let living = rates.phi[i] * state.psi[i] + state.phi[i] * rates.psi[i];
        total += eta * (living * living + rates.phi[i] * rates.phi[i]);
    }
    Ok(total)
}

/// Rate gradient of the dissipation function, `d(Delta)/d(rates)`, in the
/// layout of [`Rates`].
pub fn dissipation_forces(
    state: &SimState,
    rates: &Rates,
    params: &ModelParams,
) -> Result<Rates, ModelError> {
    check_state(state, params)?;
    check_len("volume-fraction rates", params.n(), rates.phi.len())?;
    check_len("living-fraction rates", params.n(), rates.psi.len())?;
    let n = params.n();
    let mut out = Rates::zero(n);
    out.phi0 = params.empty_viscosity() * rates.phi0;
    for i in 0..n {
        let eta = params.viscosity()[i];
        let (phi, psi) = (state.phi[i], state.psi[i]);
        let living = rates.phi[i] * psi + phi * rates.psi[i];
        out.phi[i] = eta * (living * psi + rates.phi[i]);
        out.psi[i] = eta * living * phi;
    }
    Ok(out)
}

/// Discrete residual vector of length `2n + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual(pub DVector<f64>);

impl Residual {
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn phi0(&self) -> f64 {
        self.0[0]
    }

    pub fn phi(&self, i: usize) -> f64 {
        self.0[1 + i]
    }

    pub fn psi(&self, i: usize) -> f64 {
        let n = (self.0.len() - 2) / 2;
        self.0[1 + n + i]
    }

    pub fn constraint(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// Quantities shared by the residual and the Jacobian.
struct Stage {
    rates: Rates,
    drive: Vec<f64>,
    h: f64,
}

impl Stage {
    fn new(
        new: &SimState,
        old: &SimState,
        dt: f64,
        params: &ModelParams,
    ) -> Result<Self, ModelError> {
        check_state(new, params)?;
        check_state(old, params)?;
        new.check_interior()?;
        let rates = Rates::between(old, new, dt)?;
        let phibar = living_fractions(&new.phi, &new.psi)?;
        Ok(Self {
            rates,
            drive: drive(&phibar, params.growth()),
            h: 1.0 / dt,
        })
    }
}

/// Backward-Euler residual of the evolution equations at `new`, given the
/// previous accepted state `old`, with forcing values `c` and `alpha`.
pub fn residual(
    new: &SimState,
    old: &SimState,
    dt: f64,
    params: &ModelParams,
    c: f64,
    alpha: f64,
) -> Result<Residual, ModelError> {
    let s = Stage::new(new, old, dt, params)?;
    let n = params.n();
    let (phi, psi, r) = (&new.phi, &new.psi, &s.rates);
    let gamma = new.gamma;
    let gamma_psi = if params.gamma_in_psi() { gamma } else { 0.0 };
    let visc = dissipation_forces(new, r, params)?;
    let mut out = DVector::zeros(2 * n + 2);
    out[0] = visc.phi0 + gamma + bforce(new.phi0, params.empty_penalty());
    for i in 0..n {
        let k = params.penalty(i);
        out[1 + i] = -c * psi[i] * s.drive[i] + visc.phi[i] + gamma + bforce(phi[i], k);
        out[1 + n + i] = -c * phi[i] * s.drive[i]
            + alpha * params.sensitivity()[i] * psi[i]
            + visc.psi[i]
            + gamma_psi
            + bforce(psi[i], k);
    }
    out[2 * n + 1] = new.constraint_violation();
    Ok(Residual(out))
}

/// Analytic derivative of [`residual`] with respect to the unknowns of `new`.
pub fn jacobian(
    new: &SimState,
    old: &SimState,
    dt: f64,
    params: &ModelParams,
    c: f64,
    alpha: f64,
) -> Result<DMatrix<f64>, ModelError> {
    let s = Stage::new(new, old, dt, params)?;
    let n = params.n();
    let (phi, psi, r, h) = (&new.phi, &new.psi, &s.rates, s.h);
    let a = params.growth();
    let g = 2 * n + 1;
    let mut jac = DMatrix::zeros(2 * n + 2, 2 * n + 2);

    jac[(0, 0)] = params.empty_viscosity() * h + bcurv(new.phi0, params.empty_penalty());
    jac[(0, g)] = 1.0;

    for i in 0..n {
        let (fi, si) = (1 + i, 1 + n + i);
        for j in 0..n {
            let (fj, sj) = (1 + j, 1 + n + j);
            let aij = c * a[(i, j)];
            jac[(fi, fj)] = -aij * psi[i] * psi[j];
            jac[(fi, sj)] = -aij * psi[i] * phi[j];
            jac[(si, fj)] = -aij * phi[i] * psi[j];
            jac[(si, sj)] = -aij * phi[i] * phi[j];
        }
        let eta = params.viscosity()[i];
        let k = params.penalty(i);
        let cross = phi[i] * psi[i] * h;
        jac[(fi, fi)] +=
            eta * (h * psi[i] * psi[i] + psi[i] * r.psi[i] + h) + bcurv(phi[i], k);
        jac[(fi, si)] +=
            -c * s.drive[i] + eta * (2.0 * r.phi[i] * psi[i] + phi[i] * r.psi[i] + cross);
        jac[(si, fi)] +=
            -c * s.drive[i] + eta * (2.0 * r.psi[i] * phi[i] + psi[i] * r.phi[i] + cross);
        jac[(si, si)] += alpha * params.sensitivity()[i]
            + eta * (h * phi[i] * phi[i] + phi[i] * r.phi[i])
            + bcurv(psi[i], k);
        jac[(fi, g)] = 1.0;
        jac[(si, g)] = if params.gamma_in_psi() { 1.0 } else { 0.0 };
    }

    for col in 0..=n {
        jac[(g, col)] = 1.0;
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn case_one() -> ModelParams {
        ModelParams::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
    }

    fn state(phi0: f64, phi: &[f64], psi: &[f64], gamma: f64) -> SimState {
        SimState {
            t: 0.0,
            phi0,
            phi: phi.to_vec(),
            psi: psi.to_vec(),
            gamma,
        }
    }

    #[test]
    fn living_and_dead_split_volume() {
        assert_eq!(living_fractions(&[0.2, 0.3], &[1.0, 1.0]).unwrap(), vec![0.2, 0.3]);
        assert_eq!(living_fractions(&[0.5], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(living_fractions(&[0.2], &[0.5]).unwrap(), vec![0.1]);
        assert_eq!(dead_fractions(&[0.4], &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(dead_fractions(&[0.4], &[0.0]).unwrap(), vec![0.4]);
        assert_eq!(dead_fractions(&[0.2], &[0.5]).unwrap(), vec![0.1]);
        assert!(living_fractions(&[0.2], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn free_energy_examples() {
        let s = state(0.6, &[0.2, 0.2], &[1.0, 1.0], 0.0);
        assert_relative_eq!(
            free_energy_density(&s, &case_one(), 100.0, 10.0).unwrap(),
            -6.0,
            max_relative = 1e-14
        );
        let p = ModelParams::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 2.0], vec![1.0, 1.0])
            .unwrap();
        let s = state(0.3, &[0.3, 0.4], &[1.0, 1.0], 0.0);
        assert_relative_eq!(free_energy_density(&s, &p, 0.0, 10.0).unwrap(), 15.0);
        let s = state(0.3, &[0.3, 0.4], &[0.0, 0.0], 0.0);
        assert_eq!(free_energy_density(&s, &p, 100.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn interaction_drive_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(interaction_drive(&[0.2, 0.2], &a).unwrap(), vec![0.4, 0.2]);
        let ones = DMatrix::from_element(2, 2, 1.0);
        let d = interaction_drive(&[0.1, 0.3], &ones).unwrap();
        assert_relative_eq!(d[0], 0.4);
        assert_relative_eq!(d[1], 0.4);
        let eye = DMatrix::identity(3, 3);
        assert_eq!(interaction_drive(&[0.1, 0.7, 0.3], &eye).unwrap(), vec![0.1, 0.7, 0.3]);
    }

    #[test]
    fn barrier_examples() {
        assert_eq!(barrier_force(0.5, 3.0).unwrap(), 0.0);
        assert_relative_eq!(barrier_force(0.1, 1.0).unwrap(), 1.0 / 0.9 - 10.0, max_relative = 1e-14);
        assert_relative_eq!(barrier_force(0.9, 1.0).unwrap(), 10.0 - 1.0 / 0.9, max_relative = 1e-14);
        assert!(barrier_force(0.0, 1.0).is_err());
        assert!(barrier_force(1.0, 1.0).is_err());
        assert!(barrier_potential(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn barrier_derivatives_match_differences() {
        let h = 1e-6;
        for &x in &[0.05, 0.3, 0.77] {
            let fd = (barrier_potential(x + h, 2.0).unwrap() - barrier_potential(x - h, 2.0).unwrap())
                / (2.0 * h);
            assert_relative_eq!(barrier_force(x, 2.0).unwrap(), fd, max_relative = 1e-7);
            let fd = (barrier_force(x + h, 2.0).unwrap() - barrier_force(x - h, 2.0).unwrap()) / (2.0 * h);
            assert_relative_eq!(barrier_curvature(x, 2.0).unwrap(), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn dissipation_examples() {
        let p = ModelParams::from_rows(&[vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        let s = state(0.5, &[0.5], &[1.0], 0.0);
        let rates = Rates {
            phi0: -0.1,
            phi: vec![0.1],
            psi: vec![0.0],
        };
        assert_relative_eq!(dissipation_rate(&s, &rates, &p).unwrap(), 0.03, max_relative = 1e-14);
        assert_relative_eq!(dissipation_potential(&s, &rates, &p).unwrap(), 0.015, max_relative = 1e-14);
        assert_eq!(dissipation_rate(&s, &Rates::zero(1), &p).unwrap(), 0.0);
    }

    #[test]
    fn dissipation_force_example() {
        let p = ModelParams::from_rows(&[vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        let s = state(0.5, &[0.5], &[1.0], 0.0);
        let rates = Rates {
            phi0: -0.1,
            phi: vec![0.1],
            psi: vec![0.0],
        };
        let f = dissipation_forces(&s, &rates, &p).unwrap();
        assert_relative_eq!(f.phi[0], 0.2, max_relative = 1e-14);
        assert_relative_eq!(f.psi[0], 0.05, max_relative = 1e-14);
        assert_relative_eq!(f.phi0, -0.1);
    }

    #[test]
    fn stationary_midpoint_residual_vanishes() {
        let p = ModelParams::from_rows(&[vec![1.0]], vec![1.0], vec![1.0]).unwrap();
        let s = state(0.5, &[0.5], &[0.5], 0.0);
        let r = residual(&s, &s, 1e-4, &p, 0.0, 0.0).unwrap();
        assert_eq!(r.norm_inf(), 0.0);
    }

    #[test]
    fn case_one_initial_residual() {
        let s = state(0.6, &[0.2, 0.2], &[1.0 - 1e-9, 1.0 - 1e-9], 0.0);
        let r = residual(&s, &s, 1e-4, &case_one(), 100.0, 10.0).unwrap();
        let k = 1e-4;
        let psi: f64 = 1.0 - 1e-9;
        let expect = -100.0 * psi * (2.0 * 0.2 * psi) + k * (1.0 / 0.8 - 1.0 / 0.2);
        assert_relative_eq!(r.phi(0), expect, max_relative = 1e-14);
        assert_relative_eq!(r.phi(0), -40.000375, max_relative = 1e-7);
        assert_eq!(r.constraint(), 0.0);
    }

    #[test]
    fn gamma_entries_follow_flag() {
        let s = state(0.3, &[0.3, 0.4], &[0.6, 0.7], 2.5);
        let old = state(0.35, &[0.25, 0.4], &[0.65, 0.7], 0.0);
        for flag in [false, true] {
            let p = case_one().with_gamma_in_psi(flag);
            let jac = jacobian(&s, &old, 1e-3, &p, 100.0, 10.0).unwrap();
            let expect_psi = if flag { 1.0 } else { 0.0 };
            assert_eq!(jac[(0, 5)], 1.0);
            assert_eq!(jac[(1, 5)], 1.0);
            assert_eq!(jac[(2, 5)], 1.0);
            assert_eq!(jac[(3, 5)], expect_psi);
            assert_eq!(jac[(4, 5)], expect_psi);
            assert_eq!(jac.row(5).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn residual_rejects_bad_input() {
        let p = case_one();
        let good = state(0.6, &[0.2, 0.2], &[0.5, 0.5], 0.0);
        let bad = state(0.6, &[0.2, 0.2], &[1.0, 0.5], 0.0);
        assert!(matches!(
            residual(&bad, &good, 1e-4, &p, 1.0, 1.0),
            Err(ModelError::OutOfDomain { .. })
        ));
        assert!(matches!(
            residual(&good, &good, 0.0, &p, 1.0, 1.0),
            Err(ModelError::InvalidArgument(_))
        ));
        let short = state(0.8, &[0.2], &[0.5], 0.0);
        assert!(matches!(
            jacobian(&short, &good, 1e-4, &p, 1.0, 1.0),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }
}

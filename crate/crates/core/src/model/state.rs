use nalgebra::DVector;

use crate::error::{check_len, ModelError};

use super::params::validate_permutation;

/// Distance by which initial fractions sitting exactly on a bound are moved
/// into the open interval.
pub const BOUND_CLAMP: f64 = 1e-9;

/// One point of the constrained system: time, empty space, volume fractions,
/// living fractions and the constraint multiplier.
///
/// The unknown vector used by the solver is ordered
/// `(phi0, phi_1..phi_n, psi_1..psi_n, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub phi0: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub gamma: f64,
}

impl SimState {
    /// Initial state at `t = 0`: fractions on a bound are clamped inward,
    /// `phi0` closes the volume constraint and `gamma` starts at zero.
    pub fn initial(phi: &[f64], psi: &[f64]) -> Result<Self, ModelError> {
        check_len("initial living fractions", phi.len(), psi.len())?;
        let clamp = |what: &str, i: usize, x: f64| -> Result<f64, ModelError> {
            if !(0.0..=1.0).contains(&x) {
                return Err(ModelError::OutOfDomain {
                    what: format!("initial {what}_{}", i + 1),
                    value: x,
                });
            }
            Ok(x.clamp(BOUND_CLAMP, 1.0 - BOUND_CLAMP))
        };
        let phi = phi
            .iter()
            .enumerate()
            .map(|(i, &x)| clamp("phi", i, x))
            .collect::<Result<Vec<_>, _>>()?;
        let psi = psi
            .iter()
            .enumerate()
            .map(|(i, &x)| clamp("psi", i, x))
            .collect::<Result<Vec<_>, _>>()?;
        // Summed in sorted order so the result does not depend on labels.
        let mut sorted = phi.clone();
        sorted.sort_by(f64::total_cmp);
        let phi0 = 1.0 - sorted.iter().sum::<f64>();
        if !(phi0 > 0.0) {
            return Err(ModelError::OutOfDomain {
                what: "initial empty-space fraction".into(),
                value: phi0,
            });
        }
        Ok(Self {
            t: 0.0,
            phi0,
            phi,
            psi,
            gamma: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn unknowns(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(2 * n + 2, |k, _| match k {
            0 => self.phi0,
            k if k <= n => self.phi[k - 1],
            k if k <= 2 * n => self.psi[k - n - 1],
            _ => self.gamma,
        })
    }

    pub fn from_unknowns(t: f64, u: &DVector<f64>) -> Result<Self, ModelError> {
        if u.len() < 4 || !u.len().is_multiple_of(2) {
            return Err(ModelError::InvalidArgument(format!(
                "unknown vector of length {} does not describe any species count",
                u.len()
            )));
        }
        let n = (u.len() - 2) / 2;
        Ok(Self {
            t,
            phi0: u[0],
            phi: u.rows(1, n).iter().copied().collect(),
            psi: u.rows(n + 1, n).iter().copied().collect(),
            gamma: u[2 * n + 1],
        })
    }

    /// `phi0 + sum(phi) - 1`.
    pub fn constraint_violation(&self) -> f64 {
        self.phi0 + self.phi.iter().sum::<f64>() - 1.0
    }

    /// All bounded variables lie strictly inside (0, 1).
    pub fn is_interior(&self) -> bool {
        self.bounded().all(|(_, x)| x > 0.0 && x < 1.0)
    }

    /// Returns the first bounded variable outside (0, 1) as an error.
    pub fn check_interior(&self) -> Result<(), ModelError> {
        match self.bounded().find(|&(_, x)| !(x > 0.0 && x < 1.0)) {
            None => Ok(()),
            Some((what, value)) => Err(ModelError::OutOfDomain { what, value }),
        }
    }

    fn bounded(&self) -> impl Iterator<Item = (String, f64)> + '_ {
        std::iter::once(("phi0".to_string(), self.phi0))
            .chain(self.phi.iter().enumerate().map(|(i, &x)| (format!("phi_{}", i + 1), x)))
            .chain(self.psi.iter().enumerate().map(|(i, &x)| (format!("psi_{}", i + 1), x)))
    }

    /// Relabels species so that new species `k` is old species `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        validate_permutation(perm, self.n())?;
        Ok(Self {
            phi: perm.iter().map(|&p| self.phi[p]).collect(),
            psi: perm.iter().map(|&p| self.psi[p]).collect(),
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_closes_constraint_and_clamps() {
        let s = SimState::initial(&[0.2, 0.3], &[1.0, 0.0]).unwrap();
        assert_eq!(s.phi0, 0.5);
        assert_eq!(s.psi, vec![1.0 - BOUND_CLAMP, BOUND_CLAMP]);
        assert_eq!(s.gamma, 0.0);
        assert_eq!(s.constraint_violation(), 0.0);
        assert!(s.is_interior());
    }

    #[test]
    fn initial_rejects_full_volume() {
        assert!(SimState::initial(&[0.5, 0.5], &[1.0, 1.0]).is_err());
        assert!(SimState::initial(&[1.2], &[1.0]).is_err());
    }

    #[test]
    fn unknowns_round_trip() {
        let s = SimState {
            t: 0.5,
            phi0: 0.1,
            phi: vec![0.2, 0.3, 0.4],
            psi: vec![0.5, 0.6, 0.7],
            gamma: -3.0,
        };
        let u = s.unknowns();
        assert_eq!(u.as_slice(), &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, -3.0]);
        assert_eq!(SimState::from_unknowns(0.5, &u).unwrap(), s);
    }

    #[test]
    fn check_interior_names_offender() {
        let s = SimState {
            t: 0.0,
            phi0: 0.5,
            phi: vec![0.5],
            psi: vec![1.0],
            gamma: 0.0,
        };
        match s.check_interior() {
            Err(ModelError::OutOfDomain { what, .. }) => assert_eq!(what, "psi_1"),
            other => panic!("unexpected {other:?}"),
        }
    }
}

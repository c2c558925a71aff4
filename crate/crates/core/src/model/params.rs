use nalgebra::DMatrix;

use crate::error::{check_len, ModelError};

/// Default dimensionless barrier factor; each bounded variable gets
/// penalty `viscosity * barrier_scale`.
pub const DEFAULT_BARRIER_SCALE: f64 = 1e-4;

/// Default viscosity of the empty-space fraction.
pub const DEFAULT_EMPTY_VISCOSITY: f64 = 1.0;

/// Material parameters of an `n`-species biofilm.
///
/// The growth matrix `A` is symmetric (checked exactly at construction),
/// the antibiotic sensitivity matrix is diagonal and stored as the vector
/// `b`, and the viscosity matrix is diagonal and stored as `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    growth: DMatrix<f64>,
    sensitivity: Vec<f64>,
    viscosity: Vec<f64>,
    empty_viscosity: f64,
    barrier_scale: f64,
    gamma_in_psi: bool,
}

impl ModelParams {
    /// Builds parameters with the default empty-space viscosity and barrier
    /// scale. The multiplier is kept out of the living-fraction equations
    /// unless [`with_gamma_in_psi`](Self::with_gamma_in_psi) says otherwise.
    pub fn new(
        growth: DMatrix<f64>,
        sensitivity: Vec<f64>,
        viscosity: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = growth.nrows();
        if n == 0 {
            return Err(ModelError::InvalidArgument(
                "species count must be at least 1".into(),
            ));
        }
        check_len("growth matrix columns", n, growth.ncols())?;
        check_len("antibiotic sensitivities", n, sensitivity.len())?;
        check_len("viscosities", n, viscosity.len())?;
        for i in 0..n {
            for j in (i + 1)..n {
                let (upper, lower) = (growth[(i, j)], growth[(j, i)]);
                if upper != lower {
                    return Err(ModelError::AsymmetricGrowth {
                        row: i + 1,
                        col: j + 1,
                        upper,
                        lower,
                    });
                }
            }
        }
        if let Some(bad) = growth.iter().chain(&sensitivity).find(|v| !v.is_finite()) {
            return Err(ModelError::InvalidArgument(format!(
                "non-finite model coefficient {bad}"
            )));
        }
        for (i, &eta) in viscosity.iter().enumerate() {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(ModelError::InvalidArgument(format!(
                    "viscosity of species {} must be positive, got {eta}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            growth,
            sensitivity,
            viscosity,
            empty_viscosity: DEFAULT_EMPTY_VISCOSITY,
            barrier_scale: DEFAULT_BARRIER_SCALE,
            gamma_in_psi: false,
        })
    }

    /// Convenience constructor from row-major nested slices.
    pub fn from_rows(
        rows: &[Vec<f64>],
        sensitivity: Vec<f64>,
        viscosity: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = rows.len();
        for row in rows {
            check_len("growth matrix row", n, row.len())?;
        }
        let growth = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(growth, sensitivity, viscosity)
    }

    pub fn with_empty_viscosity(mut self, eta0: f64) -> Result<Self, ModelError> {
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(ModelError::InvalidArgument(format!(
                "empty-space viscosity must be positive, got {eta0}"
            )));
        }
        self.empty_viscosity = eta0;
        Ok(self)
    }

    pub fn with_barrier_scale(mut self, scale: f64) -> Result<Self, ModelError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ModelError::InvalidArgument(format!(
                "barrier scale must be positive, got {scale}"
            )));
        }
        self.barrier_scale = scale;
        Ok(self)
    }

    /// Adds the constraint multiplier to the living-fraction equations as
    /// well as to the volume-fraction equations.
    ///
    /// Off by default: with the multiplier present the living-fraction
    /// equations push cells to die under crowding pressure while the
    /// coupled dissipation converts that push into volume growth, and the
    /// implicit step has no solution once the empty space closes.
    pub fn with_gamma_in_psi(mut self, enabled: bool) -> Self {
        self.gamma_in_psi = enabled;
        self
    }

    pub fn n(&self) -> usize {
        self.sensitivity.len()
    }

    pub fn growth(&self) -> &DMatrix<f64> {
        &self.growth
    }

    pub fn sensitivity(&self) -> &[f64] {
        &self.sensitivity
    }

    pub fn viscosity(&self) -> &[f64] {
        &self.viscosity
    }

    pub fn empty_viscosity(&self) -> f64 {
        self.empty_viscosity
    }

    pub fn barrier_scale(&self) -> f64 {
        self.barrier_scale
    }

    pub fn gamma_in_psi(&self) -> bool {
        self.gamma_in_psi
    }

    /// Barrier penalty for species `i` (both its volume and living fraction).
    pub fn penalty(&self, i: usize) -> f64 {
        self.viscosity[i] * self.barrier_scale
    }

    /// Barrier penalty for the empty-space fraction.
    pub fn empty_penalty(&self) -> f64 {
        self.empty_viscosity * self.barrier_scale
    }

    /// Relabels species so that new species `k` is old species `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        validate_permutation(perm, self.n())?;
        let n = self.n();
        Ok(Self {
            growth: DMatrix::from_fn(n, n, |i, j| self.growth[(perm[i], perm[j])]),
            sensitivity: perm.iter().map(|&p| self.sensitivity[p]).collect(),
            viscosity: perm.iter().map(|&p| self.viscosity[p]).collect(),
            ..self.clone()
        })
    }
}

pub(crate) fn validate_permutation(perm: &[usize], n: usize) -> Result<(), ModelError> {
    check_len("permutation", n, perm.len())?;
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(ModelError::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

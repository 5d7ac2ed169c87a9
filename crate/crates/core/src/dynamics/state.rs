use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::{FockBasis, Generators};
use crate::{Error, Result};

/// Pure state confined to one particle-number sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub sector: usize,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(sector: usize, amps: Vec<Complex64>) -> Self {
        Self { sector, amps }
    }

    /// Single Fock state |n_1, …, n_M⟩.
    pub fn fock(basis: &FockBasis, occupation: &[u16]) -> Result<Self> {
        let idx = basis
            .index_of(occupation)
            .ok_or_else(|| Error::DimensionMismatch(format!("occupation {occupation:?} not in sector {}", basis.sector())))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(Self::new(basis.sector(), amps))
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// Fidelity |⟨a|b⟩|² of two normalized states; zero across sectors.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        if self.sector != other.sector || self.dim() != other.dim() {
            return 0.0;
        }
        linalg::dot(&self.amps, &other.amps).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }
}

/// Density matrix stored as one block per particle-number sector.
/// Coherences between sectors are never generated by the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityBlocks {
    pub blocks: BTreeMap<usize, DMatrix<Complex64>>,
}

impl DensityBlocks {
    /// Zero blocks for every sector of the generator set.
    pub fn zeros(gens: &Generators) -> Self {
        let blocks = gens.sectors().map(|s| (s.n(), DMatrix::zeros(s.dim(), s.dim()))).collect();
        Self { blocks }
    }

    pub fn from_pure(gens: &Generators, psi: &StateVector) -> Result<Self> {
        let mut rho = Self::zeros(gens);
        let block = rho
            .blocks
            .get_mut(&psi.sector)
            .ok_or_else(|| Error::DimensionMismatch(format!("sector {} not in generator set", psi.sector)))?;
        if block.nrows() != psi.dim() {
            return Err(Error::DimensionMismatch(format!("state has {} amplitudes, sector has {}", psi.dim(), block.nrows())));
        }
        let v = nalgebra::DVector::from_column_slice(&psi.amps);
        *block = &v * v.adjoint() / Complex64::new(psi.norm_sqr(), 0.0);
        Ok(rho)
    }

    pub fn trace(&self) -> f64 {
        self.blocks.values().map(|b| b.trace().re).sum()
    }

    /// Sector populations in descending particle number.
    pub fn block_traces(&self) -> Vec<(usize, f64)> {
        self.blocks.iter().rev().map(|(&n, b)| (n, b.trace().re)).collect()
    }

    /// Smallest eigenvalue of each block's hermitian part.
    pub fn min_eigenvalues(&self) -> Vec<(usize, f64)> {
        self.blocks
            .iter()
            .rev()
            .map(|(&n, b)| {
                let h = (b + b.adjoint()) * Complex64::new(0.5, 0.0);
                let (vals, _) = linalg::hermitian_eigen(&h);
                (n, vals.first().copied().unwrap_or(0.0))
            })
            .collect()
    }

    /// Largest deviation from hermiticity over all blocks.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.blocks.values().map(|b| (b - b.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)).fold(0.0, f64::max)
    }

    /// Column-major concatenation in descending sector order.
    pub fn flatten(&self) -> Vec<Complex64> {
        self.blocks.values().rev().flat_map(|b| b.as_slice().iter().copied()).collect()
    }

    /// Inverse of [`flatten`](Self::flatten) using `self` as the shape template.
    pub fn unflatten_like(&self, flat: &[Complex64]) -> Self {
        let mut offset = 0;
        let mut blocks = BTreeMap::new();
        for (&n, b) in self.blocks.iter().rev() {
            let len = b.nrows() * b.ncols();
            blocks.insert(n, DMatrix::from_column_slice(b.nrows(), b.ncols(), &flat[offset..offset + len]));
            offset += len;
        }
        Self { blocks }
    }
}

/// Checks that a time grid is non-empty, finite and non-decreasing.
pub fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::TimeGrid("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::TimeGrid("non-finite time".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::TimeGrid("times must be non-decreasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, LatticeParams};

    #[test]
    fn flatten_roundtrip_and_trace() {
        let mut lp = LatticeParams::dimensionless(3, Boundary::Open, 2, 1.0);
        lp.u = Complex64::new(1.0, -0.5);
        let gens = Generators::build(&lp).unwrap();
        let basis = &gens.sector(2).unwrap().basis;
        let psi = StateVector::fock(basis, &[1, 1, 0]).unwrap();
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        assert_eq!(rho.trace(), 1.0);
        let flat = rho.flatten();
        assert_eq!(flat.len(), 6 * 6 + 1);
        assert_eq!(rho.unflatten_like(&flat), rho);
    }

    #[test]
    fn grid_rules() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.0, 1.0, 0.5]).is_err());
        assert!(validate_grid(&[0.0, f64::NAN]).is_err());
        assert!(validate_grid(&[0.0, 0.0, 2.0]).is_ok());
    }
}

//! Free-fermion reference for the Tonks-Girardeau limit.
//!
//! Hard-core bosons share density, pair correlations and energies with free
//! fermions. On a ring the fermionic image needs periodic orbitals for odd N
//! and antiperiodic orbitals for even N.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::Boundary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Hard walls at 0 and L.
    Box,
    Ring,
}

impl From<Boundary> for Geometry {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Open => Geometry::Box,
            Boundary::Periodic => Geometry::Ring,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FermiReference {
    pub n: usize,
    pub geometry: Geometry,
    pub length: f64,
    /// Kinetic prefactor ħ²/(2 m_eff) in the caller's energy units.
    pub kinetic: f64,
}

impl FermiReference {
    pub fn new(n: usize, geometry: Geometry, length: f64) -> Self {
        Self { n, geometry, length, kinetic: 1.0 }
    }

    pub fn with_kinetic(mut self, kinetic: f64) -> Self {
        self.kinetic = kinetic;
        self
    }

    /// Occupied single-particle wave numbers.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let l = self.length;
        match self.geometry {
            Geometry::Box => (1..=self.n).map(|q| q as f64 * PI / l).collect(),
            Geometry::Ring => {
                let shift = if self.n.is_multiple_of(2) { 0.5 } else { 0.0 };
                let lo = -((self.n / 2) as f64);
                (0..self.n).map(|j| 2.0 * PI * (lo + j as f64 + shift) / l).collect()
            }
        }
    }

    pub fn mode_energies(&self) -> Vec<f64> {
        self.wavenumbers().iter().map(|k| self.kinetic * k * k).collect()
    }

    /// Ground-state energy, the sum of the lowest N mode energies.
    pub fn energy(&self) -> f64 {
        self.mode_energies().iter().sum()
    }

    /// Number density n(z).
    pub fn density(&self, z: f64) -> f64 {
        let l = self.length;
        match self.geometry {
            Geometry::Box => (1..=self.n).map(|q| (q as f64 * PI * z / l).sin().powi(2)).sum::<f64>() * 2.0 / l,
            Geometry::Ring => self.n as f64 / l,
        }
    }

    /// Box one-body density matrix ⟨ψ†(z1)ψ(z2)⟩ of the Slater determinant.
    fn box_kernel(&self, z1: f64, z2: f64) -> f64 {
        let l = self.length;
        (1..=self.n)
            .map(|q| {
                let k = q as f64 * PI / l;
                (k * z1).sin() * (k * z2).sin()
            })
            .sum::<f64>()
            * 2.0
            / l
    }

    /// g²(z1, z2) = 1 − |ρ₁(z1, z2)|² / (n(z1) n(z2)).
    pub fn pair_correlation(&self, z1: f64, z2: f64) -> f64 {
        if self.geometry == Geometry::Ring {
            return self.pair_correlation_ring(z2 - z1);
        }
        let n1 = self.density(z1);
        let n2 = self.density(z2);
        let k = self.box_kernel(z1, z2);
        1.0 - k * k / (n1 * n2)
    }

    /// Ring closed form 1 − [sin(Nπr/L) / (N sin(πr/L))]², zero at r = 0.
    pub fn pair_correlation_ring(&self, r: f64) -> f64 {
        let x = PI * r / self.length;
        let s = x.sin();
        if s.abs() < 1e-12 {
            return 0.0;
        }
        let ratio = (self.n as f64 * x).sin() / (self.n as f64 * s);
        1.0 - ratio * ratio
    }

    /// Particles per site at the midpoints z_j = (j + ½)a, a = L/M.
    pub fn sample_density(&self, m_sites: usize) -> Vec<f64> {
        let a = self.length / m_sites as f64;
        (0..m_sites).map(|j| self.density((j as f64 + 0.5) * a) * a).collect()
    }
}

/// Single-particle energies of the lattice stencil (J = `hop`), ascending.
pub fn lattice_mode_energies(m_sites: usize, hop: f64, boundary: Boundary) -> Vec<f64> {
    let m = m_sites as f64;
    let mut e: Vec<f64> = match boundary {
        Boundary::Open => (1..=m_sites).map(|q| 2.0 * hop * (1.0 - (q as f64 * PI / m).cos())).collect(),
        Boundary::Periodic => (0..m_sites).map(|q| 2.0 * hop * (1.0 - (2.0 * PI * q as f64 / m).cos())).collect(),
    };
    e.sort_by(f64::total_cmp);
    e
}

/// Hard-core-boson ground energy on the lattice: N lowest fermionic levels,
/// antiperiodic on a ring for even N.
pub fn lattice_fermion_energy(m_sites: usize, n: usize, hop: f64, boundary: Boundary) -> f64 {
    match boundary {
        Boundary::Open => lattice_mode_energies(m_sites, hop, boundary).iter().take(n).sum(),
        Boundary::Periodic => {
            let reference = FermiReference::new(n, Geometry::Ring, m_sites as f64);
            reference.wavenumbers().iter().map(|k| 2.0 * hop * (1.0 - k.cos())).sum()
        }
    }
}

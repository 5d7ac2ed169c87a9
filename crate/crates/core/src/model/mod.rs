//! Lattice discretization of the effective model: Fock bases, the
//! number-conserving Hamiltonian and the loss operators.

mod basis;
mod operators;
mod sparse;

pub use basis::{sector_dimension, FockBasis, DEFAULT_DIMENSION_CAP};
pub use operators::{
    anti_hermitian_from_jumps, build_hermitian_hamiltonian, build_jump_operators, effective_hamiltonian,
    kinetic_matrix, number_operator, pair_diagonal, Channel, Generators, Jump, Sector,
};
pub use sparse::{CsrMatrix, SparseOperator};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Hard walls at z = 0 and z = L, sites at z_j = (j + ½)a.
    #[default]
    Open,
    Periodic,
}

/// Which loss channels are instantiated. A channel with zero rate is never
/// instantiated regardless of its toggle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossChannels {
    pub two_body: bool,
    pub one_body: bool,
    pub derivative: bool,
}

impl Default for LossChannels {
    fn default() -> Self {
        Self { two_body: true, one_body: true, derivative: true }
    }
}

/// Bose-Hubbard-type lattice image of the effective model (ħ = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub m_sites: usize,
    pub boundary: Boundary,
    /// Initial (largest) total particle number.
    pub n_max: usize,
    /// Hopping J.
    pub hop: f64,
    /// Complex on-site coupling U; −Im U is the two-body jump rate.
    pub u: Complex64,
    /// One-body jump rate per site.
    pub kappa1: f64,
    /// Derivative-loss coefficient; per-bond jump (b_{j+1} − b_j)/a.
    pub kappa_d: f64,
    /// Lattice spacing a.
    pub spacing: f64,
    pub channels: LossChannels,
}

impl LatticeParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m_sites: usize,
        boundary: Boundary,
        n_max: usize,
        hop: f64,
        u: Complex64,
        kappa1: f64,
        kappa_d: f64,
        spacing: f64,
        channels: LossChannels,
    ) -> Result<Self> {
        let lp = Self { m_sites, boundary, n_max, hop, u, kappa1, kappa_d, spacing, channels };
        lp.validate()?;
        Ok(lp)
    }

    /// Conservative chain with J = 1, a = 1 and the given real U.
    pub fn dimensionless(m_sites: usize, boundary: Boundary, n_max: usize, u: f64) -> Self {
        Self {
            m_sites,
            boundary,
            n_max,
            hop: 1.0,
            u: Complex64::new(u, 0.0),
            kappa1: 0.0,
            kappa_d: 0.0,
            spacing: 1.0,
            channels: LossChannels::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_sites < 1 {
            return Err(Error::InvalidParameter { field: "m_sites", reason: "need at least one site".into() });
        }
        if !self.hop.is_finite() {
            return Err(Error::InvalidParameter { field: "hop", reason: format!("{} not finite", self.hop) });
        }
        if !(self.u.re.is_finite() && self.u.im.is_finite()) {
            return Err(Error::InvalidParameter { field: "u", reason: "not finite".into() });
        }
        if self.u.im > 0.0 {
            return Err(Error::InvalidParameter { field: "u", reason: format!("Im U = {} > 0 is gain", self.u.im) });
        }
        for (field, v) in [("kappa1", self.kappa1), ("kappa_d", self.kappa_d)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { field, reason: format!("rate {v} must be ≥ 0") });
            }
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidParameter { field: "spacing", reason: format!("{} must be > 0", self.spacing) });
        }
        Ok(())
    }

    /// Two-body jump rate per site, −Im U.
    pub fn kappa2(&self) -> f64 {
        -self.u.im
    }

    pub fn with_u(&self, u: Complex64) -> Self {
        Self { u, ..self.clone() }
    }

    /// Active sector decrements (1 for one-body channels, 2 for pair loss).
    pub fn decrements(&self) -> Vec<usize> {
        let mut d = Vec::new();
        if self.one_body_active() || self.derivative_active() {
            d.push(1);
        }
        if self.two_body_active() {
            d.push(2);
        }
        d
    }

    pub fn two_body_active(&self) -> bool {
        self.channels.two_body && self.kappa2() > 0.0
    }

    pub fn one_body_active(&self) -> bool {
        self.channels.one_body && self.kappa1 > 0.0
    }

    pub fn derivative_active(&self) -> bool {
        self.channels.derivative && self.kappa_d > 0.0 && self.m_sites > 1
    }

    /// Nearest-neighbour bonds (j, j+1) used by hopping and derivative jumps.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let m = self.m_sites;
        match self.boundary {
            Boundary::Open => (0..m.saturating_sub(1)).map(|j| (j, j + 1)).collect(),
            Boundary::Periodic if m == 1 => Vec::new(),
            Boundary::Periodic => (0..m).map(|j| (j, (j + 1) % m)).collect(),
        }
    }

    /// Sector particle numbers reachable from `n_max` under the active losses,
    /// in descending order.
    pub fn reachable_sectors(&self) -> Vec<usize> {
        let dec = self.decrements();
        let mut seen = vec![false; self.n_max + 1];
        seen[self.n_max] = true;
        for n in (0..=self.n_max).rev() {
            if seen[n] {
                for &d in &dec {
                    if n >= d {
                        seen[n - d] = true;
                    }
                }
            }
        }
        (0..=self.n_max).rev().filter(|&n| seen[n]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reachable_sectors_follow_channels() {
        let mut lp = LatticeParams::dimensionless(4, Boundary::Open, 4, 1.0);
        assert_eq!(lp.reachable_sectors(), vec![4]);
        lp.u = Complex64::new(1.0, -0.5);
        assert_eq!(lp.reachable_sectors(), vec![4, 2, 0]);
        lp.kappa1 = 0.1;
        assert_eq!(lp.reachable_sectors(), vec![4, 3, 2, 1, 0]);
        lp.channels.one_body = false;
        assert_eq!(lp.reachable_sectors(), vec![4, 2, 0]);
    }

    #[test]
    fn gain_is_rejected() {
        let lp = LatticeParams::dimensionless(4, Boundary::Open, 2, 1.0).with_u(Complex64::new(0.0, 0.1));
        assert!(lp.validate().is_err());
    }
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::StateVector;
use crate::linalg;
use crate::model::{kinetic_matrix, FockBasis, LatticeParams, SparseOperator};
use crate::{Error, Result};

/// Sectors up to this dimension are diagonalized densely by default.
pub const DENSE_GROUND_CAP: usize = 1024;
/// Largest sector accepted by the non-hermitian dense solver.
pub const DENSE_LOSS_CAP: usize = 4000;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const DEGENERACY_TOL: f64 = 1e-8;
const LANCZOS_MAX_ITER: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// Distance to the next level, when known.
    pub gap: Option<f64>,
    pub degenerate: bool,
    pub residual: f64,
}

pub fn ground_state(h: &SparseOperator) -> Result<GroundState> {
    ground_state_with(h, EigenMethod::Auto)
}

pub fn ground_state_with(h: &SparseOperator, method: EigenMethod) -> Result<GroundState> {
    if !h.is_hermitian() {
        return Err(Error::NotApplicable("ground_state needs a hermitian operator; use lowest_loss_state".into()));
    }
    let dim = h.dim();
    let dense = match method {
        EigenMethod::Auto => dim <= DENSE_GROUND_CAP,
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
    };
    let (energy, mut vector, gap) = if dense {
        let (vals, vecs) = linalg::hermitian_eigen(&h.matrix.to_dense());
        let v: Vec<Complex64> = vecs.column(0).iter().copied().collect();
        (vals[0], v, vals.get(1).map(|e| e - vals[0]))
    } else {
        let r = linalg::lanczos_lowest(&h.matrix, RESIDUAL_TOL, LANCZOS_MAX_ITER)?;
        (r.energy, r.vector, r.next.map(|e| e - r.energy))
    };
    linalg::canonical_phase(&mut vector);
    let hv = h.matrix.matvec(&vector);
    let res: Vec<Complex64> = hv.iter().zip(&vector).map(|(a, b)| a - energy * b).collect();
    let residual = linalg::norm(&res);
    if residual > RESIDUAL_TOL * energy.abs().max(1.0) * 10.0 {
        return Err(Error::NoConvergence { iterations: 0, residual });
    }
    Ok(GroundState {
        energy,
        state: StateVector::new(h.domain, vector),
        gap,
        degenerate: gap.is_some_and(|g| g.abs() < DEGENERACY_TOL),
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowestLoss {
    pub eigenvalue: Complex64,
    pub state: StateVector,
    /// Number of eigenvalues sharing the smallest loss rate.
    pub loss_multiplicity: usize,
}

impl LowestLoss {
    pub fn fully_degenerate(&self) -> bool {
        self.loss_multiplicity == self.state.dim()
    }
}

/// Right eigenvector of H_eff with the smallest decay rate −Im λ; ties are
/// broken by the smallest Re λ.
pub fn lowest_loss_state(h_eff: &SparseOperator) -> Result<LowestLoss> {
    let dim = h_eff.dim();
    if dim > DENSE_LOSS_CAP {
        return Err(Error::DenseCap {
            dim,
            cap: DENSE_LOSS_CAP,
            hint: "relax with quantum trajectories (dissipative_relax) instead",
        });
    }
    let (vals, vecs) = linalg::general_eigen(&h_eff.matrix.to_dense())?;
    let scale = vals.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tie = 1e-9 * scale;
    let best_im = vals.iter().map(|v| v.im).fold(f64::NEG_INFINITY, f64::max);
    let loss_multiplicity = vals.iter().filter(|v| best_im - v.im <= tie).count();
    let idx = (0..vals.len())
        .filter(|&i| best_im - vals[i].im <= tie)
        .min_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re))
        .ok_or(Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    let mut v: Vec<Complex64> = vecs.column(idx).iter().copied().collect();
    let n = linalg::norm(&v);
    v.iter_mut().for_each(|z| *z /= n);
    linalg::canonical_phase(&mut v);
    Ok(LowestLoss { eigenvalue: vals[idx], state: StateVector::new(h_eff.domain, v), loss_multiplicity })
}

/// Lowest eigenvector of the single-particle kinetic matrix.
pub fn lowest_orbital(lp: &LatticeParams) -> Result<Vec<Complex64>> {
    let basis = FockBasis::new(lp.m_sites, 1)?;
    let (_, vecs) = linalg::hermitian_eigen(&kinetic_matrix(lp, &basis).to_dense());
    let mut v: Vec<Complex64> = vecs.column(0).iter().copied().collect();
    linalg::canonical_phase(&mut v);
    Ok(v)
}

/// (a_φ†)^N/√N! |0⟩ for a normalized orbital φ: amplitude
/// √(N!/Π n_j!) Π φ_j^{n_j} on each Fock state.
pub fn condensate(basis: &FockBasis, phi: &[Complex64]) -> StateVector {
    let n = basis.sector();
    let ln_fact = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    let amps = basis
        .iter()
        .map(|(_, occ)| {
            let mut a = Complex64::new(1.0, 0.0);
            let mut logw = ln_fact(n);
            for (j, &nj) in occ.iter().enumerate() {
                a *= phi[j].powu(nj as u32);
                logw -= ln_fact(nj as usize);
            }
            a * (0.5 * logw).exp()
        })
        .collect();
    StateVector::new(n, amps)
}

/// N bosons in the lowest kinetic orbital.
pub fn uncorrelated_state(lp: &LatticeParams, n: usize) -> Result<StateVector> {
    let phi = lowest_orbital(lp)?;
    Ok(condensate(&FockBasis::new(lp.m_sites, n)?, &phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermioracle::lattice_fermion_energy;
    use crate::model::{Boundary, CsrMatrix, Generators};
    use approx::assert_relative_eq;

    fn sector_ops(lp: &LatticeParams, n: usize) -> (SparseOperator, SparseOperator) {
        let gens = Generators::build(lp).unwrap();
        let s = gens.sector(n).unwrap();
        (s.h_herm.clone(), s.h_eff.clone())
    }

    #[test]
    fn free_bosons_condense() {
        for b in [Boundary::Open, Boundary::Periodic] {
            let lp = LatticeParams::dimensionless(6, b, 2, 0.0);
            let (h, _) = sector_ops(&lp, 2);
            let (h1, _) = sector_ops(&LatticeParams { n_max: 1, ..lp.clone() }, 1);
            let e1 = ground_state(&h1).unwrap().energy;
            assert_relative_eq!(ground_state(&h).unwrap().energy, 2.0 * e1, epsilon = 1e-12);
        }
    }

    #[test]
    fn hard_core_limit_on_ring() {
        let m = 8;
        let free = lattice_fermion_energy(m, 2, 1.0, Boundary::Periodic);
        let mut last = f64::INFINITY;
        for u in [10.0, 100.0, 1e4] {
            let (h, _) = sector_ops(&LatticeParams::dimensionless(m, Boundary::Periodic, 2, u), 2);
            let e = ground_state(&h).unwrap().energy;
            let dev = (free - e).abs();
            assert!(dev < last);
            last = dev;
        }
        assert!(last / free < 1e-3);
    }

    #[test]
    fn dense_matches_lanczos() {
        let (h, _) = sector_ops(&LatticeParams::dimensionless(3, Boundary::Open, 2, 1.7), 2);
        let d = ground_state_with(&h, EigenMethod::Dense).unwrap();
        let l = ground_state_with(&h, EigenMethod::Lanczos).unwrap();
        assert_relative_eq!(d.energy, l.energy, epsilon = 1e-10);
        assert!(d.state.fidelity(&l.state) > 1.0 - 1e-10);
    }

    #[test]
    fn degeneracy_is_flagged() {
        let (h, _) = sector_ops(&LatticeParams::dimensionless(4, Boundary::Periodic, 1, 0.0), 1);
        assert!(!ground_state(&h).unwrap().degenerate);
        let flat = SparseOperator::hermitian(CsrMatrix::from_diagonal(&[Complex64::new(1.0, 0.0); 3]), 1).unwrap();
        assert!(ground_state(&flat).unwrap().degenerate);
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let mut lp = LatticeParams::dimensionless(3, Boundary::Open, 2, 1.0);
        lp.u = Complex64::new(1.0, -1.0);
        let (_, heff) = sector_ops(&lp, 2);
        assert!(matches!(ground_state(&heff), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn hermitian_lowest_loss_is_ground_state() {
        let (h, _) = sector_ops(&LatticeParams::dimensionless(4, Boundary::Open, 2, 2.0), 2);
        let ll = lowest_loss_state(&h).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!(ll.eigenvalue.im.abs() < 1e-10);
        assert_relative_eq!(ll.eigenvalue.re, gs.energy, epsilon = 1e-10);
        assert!(ll.state.fidelity(&gs.state) > 1.0 - 1e-10);
    }

    #[test]
    fn uniform_one_body_loss_is_fully_degenerate() {
        let mut lp = LatticeParams::dimensionless(5, Boundary::Open, 1, 0.0);
        lp.kappa1 = 0.6;
        let (_, heff) = sector_ops(&lp, 1);
        let ll = lowest_loss_state(&heff).unwrap();
        assert_relative_eq!(ll.eigenvalue.im, -0.3, epsilon = 1e-12);
        assert!(ll.fully_degenerate());
    }

    #[test]
    fn lowest_loss_state_is_anticorrelated() {
        let mut lp = LatticeParams::dimensionless(4, Boundary::Open, 2, 0.0);
        lp.u = Complex64::new(0.0, -2.0);
        let gens = Generators::build(&lp).unwrap();
        let s = gens.sector(2).unwrap();
        let ll = lowest_loss_state(&s.h_eff).unwrap();
        let sel = crate::observables::Correlations::from_state(&s.basis, &ll.state).unwrap();
        let uniform = condensate(&s.basis, &[Complex64::new(0.5, 0.0); 4]);
        let un = crate::observables::Correlations::from_state(&s.basis, &uniform).unwrap();
        assert!(sel.local_g2().unwrap() < un.local_g2().unwrap());
    }

    #[test]
    fn condensate_is_normalized() {
        let basis = FockBasis::new(5, 3).unwrap();
        let lp = LatticeParams::dimensionless(5, Boundary::Open, 3, 0.0);
        let phi = lowest_orbital(&lp).unwrap();
        assert_relative_eq!(condensate(&basis, &phi).norm_sqr(), 1.0, epsilon = 1e-12);
    }
}

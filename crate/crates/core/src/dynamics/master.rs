use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{validate_grid, DensityBlocks};
use crate::linalg;
use crate::model::{Channel, CsrMatrix, Generators};
use crate::{Error, Result};

/// Largest total Liouville-space dimension Σ d_n² accepted by master_evolve.
pub const MASTER_CAP: usize = 4_000_000;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// dρ_n/dt = −i(H_n ρ_n − ρ_n H_n†) + Σ_k rate_k c_k ρ_m c_k† over jumps
/// m → n, with H_n = H_eff on sector n.
#[derive(Debug, Clone)]
pub struct Liouvillian<'a> {
    gens: &'a Generators,
    heff: BTreeMap<usize, CsrMatrix>,
    /// Replacement two-body rate, for time-dependent couplings.
    pair_rate: Option<f64>,
}

impl<'a> Liouvillian<'a> {
    pub fn new(gens: &'a Generators) -> Self {
        let heff = gens.sectors().map(|s| (s.n(), s.h_eff.matrix.clone())).collect();
        Self { gens, heff, pair_rate: None }
    }

    /// Generator at another complex coupling U; two-body jumps are rescaled
    /// to −Im U. Fails if pair loss is requested but was not built.
    pub fn with_coupling(gens: &'a Generators, u: Complex64) -> Result<Self> {
        let lp = &gens.lattice;
        let rate = if lp.channels.two_body { -u.im } else { 0.0 };
        if rate < 0.0 {
            return Err(Error::InvalidParameter { field: "u", reason: "Im U > 0 is gain, not loss".into() });
        }
        let built = gens.sectors().any(|s| s.jumps.iter().any(|j| j.channel == Channel::TwoBody));
        let needs = gens.sectors().any(|s| s.n() >= 2);
        if rate > 0.0 && !built && needs {
            return Err(Error::NotApplicable(
                "two-body jumps were not built; construct the generators with Im U < 0".into(),
            ));
        }
        let heff = gens.sectors().map(|s| (s.n(), gens.h_eff_at(s.n(), u))).collect();
        Ok(Self { gens, heff, pair_rate: Some(rate) })
    }

    fn rate(&self, channel: Channel, built: f64) -> f64 {
        match (channel, self.pair_rate) {
            (Channel::TwoBody, Some(r)) => r,
            _ => built,
        }
    }

    pub fn apply(&self, rho: &DensityBlocks) -> DensityBlocks {
        let mut out = BTreeMap::new();
        for (&n, block) in &rho.blocks {
            let h = &self.heff[&n];
            let comm = h.mul_dense(block) - h.dense_mul_adjoint(block);
            out.insert(n, comm * MINUS_I);
        }
        for s in self.gens.sectors() {
            let Some(src) = rho.blocks.get(&s.n()) else { continue };
            for j in &s.jumps {
                let rate = self.rate(j.channel, j.rate);
                if rate == 0.0 {
                    continue;
                }
                let Some(dst) = out.get_mut(&j.op.codomain) else { continue };
                let c = &j.op.matrix;
                let left = c.mul_dense(src);
                let term: DMatrix<Complex64> = c.dense_mul_adjoint(&left);
                *dst += term * Complex64::new(rate, 0.0);
            }
        }
        DensityBlocks { blocks: out }
    }

    /// Bound on the Liouvillian norm used for expmv substeps.
    pub fn bound(&self) -> f64 {
        let h = self.heff.values().map(|m| m.norm_bound()).fold(0.0, f64::max);
        let jumps: f64 = self
            .gens
            .sectors()
            .flat_map(|s| s.jumps.iter())
            .map(|j| {
                let b = j.op.matrix.norm_bound();
                self.rate(j.channel, j.rate) * b * b
            })
            .sum();
        2.0 * h + jumps
    }

    /// exp(tℒ)ρ; negative t runs backwards.
    pub fn propagate(&self, rho: &DensityBlocks, t: f64) -> DensityBlocks {
        let flat = linalg::expmv(
            |x, out| {
                let r = rho.unflatten_like(x);
                out.copy_from_slice(&self.apply(&r).flatten());
            },
            self.bound(),
            t,
            &rho.flatten(),
        );
        rho.unflatten_like(&flat)
    }
}

/// Trace and positivity diagnostics of one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagnostics {
    pub trace: f64,
    pub min_eigenvalue: f64,
}

pub fn diagnose(rho: &DensityBlocks) -> BlockDiagnostics {
    let min_eigenvalue = rho.min_eigenvalues().iter().map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
    BlockDiagnostics { trace: rho.trace(), min_eigenvalue }
}

fn check_blocks(rho: &DensityBlocks, t: f64) -> Result<()> {
    let d = diagnose(rho);
    if (d.trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::Consistency(format!("trace {} at t = {t}", d.trace)));
    }
    if d.min_eigenvalue < -POSITIVITY_TOL {
        return Err(Error::Consistency(format!("block eigenvalue {} at t = {t}", d.min_eigenvalue)));
    }
    Ok(())
}

pub(crate) fn check_master_cap(gens: &Generators) -> Result<()> {
    let dim: usize = gens.sectors().map(|s| s.dim() * s.dim()).sum();
    if dim > MASTER_CAP {
        return Err(Error::DenseCap { dim, cap: MASTER_CAP, hint: "use ensemble_average instead" });
    }
    Ok(())
}

/// Density blocks at each time of `t_grid`, starting from `rho` at
/// `t_grid[0]`. Trace and block positivity are checked at every output.
pub fn master_evolve(rho: &DensityBlocks, gens: &Generators, t_grid: &[f64]) -> Result<Vec<DensityBlocks>> {
    validate_grid(t_grid)?;
    check_master_cap(gens)?;
    let liou = Liouvillian::new(gens);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut cur = rho.clone();
    check_blocks(&cur, t_grid[0])?;
    out.push(cur.clone());
    for w in t_grid.windows(2) {
        cur = liou.propagate(&cur, w[1] - w[0]);
        check_blocks(&cur, w[1])?;
        out.push(cur.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StateVector;
    use crate::model::{Boundary, LatticeParams};
    use approx::assert_relative_eq;

    #[test]
    fn single_site_cascade() {
        let mut lp = LatticeParams::dimensionless(1, Boundary::Open, 2, 0.0);
        lp.u = Complex64::new(0.4, -0.35);
        let gens = Generators::build(&lp).unwrap();
        let psi = StateVector::fock(&gens.sector(2).unwrap().basis, &[2]).unwrap();
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| 0.3 * k as f64).collect();
        let series = master_evolve(&rho, &gens, &times).unwrap();
        for (t, r) in times.iter().zip(&series) {
            let p2 = (-2.0 * 0.35 * t).exp();
            assert_relative_eq!(r.blocks[&2][(0, 0)].re, p2, epsilon = 1e-8);
            assert_relative_eq!(r.blocks[&0][(0, 0)].re, 1.0 - p2, epsilon = 1e-8);
        }
    }

    #[test]
    fn lossless_blocks_keep_traces() {
        let lp = LatticeParams::dimensionless(4, Boundary::Open, 2, 1.0);
        let gens = Generators::build(&lp).unwrap();
        let psi = StateVector::fock(&gens.sector(2).unwrap().basis, &[1, 1, 0, 0]).unwrap();
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        let series = master_evolve(&rho, &gens, &[0.0, 1.0, 2.0, 3.5]).unwrap();
        for r in &series {
            assert_relative_eq!(r.trace(), 1.0, epsilon = 1e-12);
        }
        // Unitary: purity stays 1.
        let b = &series[3].blocks[&2];
        assert_relative_eq!((b * b).trace().re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn recycling_moves_probability_down() {
        let mut lp = LatticeParams::dimensionless(3, Boundary::Periodic, 3, 1.0);
        lp.u = Complex64::new(1.0, -0.5);
        lp.kappa1 = 0.2;
        let gens = Generators::build(&lp).unwrap();
        let psi = StateVector::fock(&gens.sector(3).unwrap().basis, &[1, 1, 1]).unwrap();
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        let series = master_evolve(&rho, &gens, &[0.0, 0.5, 1.0, 4.0]).unwrap();
        let mut prev = 1.0;
        for r in &series {
            let top = r.blocks[&3].trace().re;
            assert!(top <= prev + 1e-14);
            prev = top;
            assert_relative_eq!(r.trace(), 1.0, epsilon = 1e-10);
        }
        assert!(series[3].blocks[&0].trace().re > 0.0);
    }
}

//! Correlation functions of lattice states and density blocks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DensityBlocks, Liouvillian, StateVector};
use crate::model::{Boundary, FockBasis, Generators};
use crate::{Error, Result};

/// Densities below this are treated as empty sites when normalizing g².
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Lattice moments ⟨b†_i b_j⟩ and ⟨b†_i b†_j b_j b_i⟩ of a normalized state.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlations {
    pub m_sites: usize,
    /// Norm² of the input (trace for density blocks) before normalization.
    pub weight: f64,
    pub obdm: DMatrix<Complex64>,
    pub pair: DMatrix<f64>,
}

fn accumulate(
    basis: &FockBasis,
    rho: impl Fn(usize, usize) -> Complex64,
    obdm: &mut DMatrix<Complex64>,
    pair: &mut DMatrix<f64>,
) {
    let m = basis.m_sites();
    let mut moved = vec![0u16; m];
    for (k, occ) in basis.iter() {
        let w = rho(k, k).re;
        if w != 0.0 {
            for i in 0..m {
                let ni = occ[i] as f64;
                if ni == 0.0 {
                    continue;
                }
                obdm[(i, i)] += w * ni;
                for j in 0..m {
                    let nj = occ[j] as f64;
                    pair[(i, j)] += w * if i == j { ni * (ni - 1.0) } else { ni * nj };
                }
            }
        }
        for j in 0..m {
            if occ[j] == 0 {
                continue;
            }
            for i in 0..m {
                if i == j {
                    continue;
                }
                moved.copy_from_slice(occ);
                moved[j] -= 1;
                moved[i] += 1;
                let target = basis.index_of(&moved).expect("hop stays in sector");
                let amp = (occ[j] as f64 * (occ[i] as f64 + 1.0)).sqrt();
                obdm[(i, j)] += amp * rho(k, target);
            }
        }
    }
}

impl Correlations {
    pub fn from_state(basis: &FockBasis, psi: &StateVector) -> Result<Self> {
        if psi.dim() != basis.dim() || psi.sector != basis.sector() {
            return Err(Error::DimensionMismatch(format!(
                "state (sector {}, dim {}) does not match basis (sector {}, dim {})",
                psi.sector,
                psi.dim(),
                basis.sector(),
                basis.dim()
            )));
        }
        let m = basis.m_sites();
        let mut obdm = DMatrix::zeros(m, m);
        let mut pair = DMatrix::zeros(m, m);
        let a = &psi.amps;
        accumulate(basis, |k, kp| a[k] * a[kp].conj(), &mut obdm, &mut pair);
        Ok(Self::normalized(m, psi.norm_sqr(), obdm, pair))
    }

    pub fn from_blocks(gens: &Generators, rho: &DensityBlocks) -> Result<Self> {
        let m = gens.lattice.m_sites;
        let mut obdm = DMatrix::zeros(m, m);
        let mut pair = DMatrix::zeros(m, m);
        for (n, block) in &rho.blocks {
            let sector = gens
                .sector(*n)
                .ok_or_else(|| Error::DimensionMismatch(format!("sector {n} not in generator set")))?;
            if block.nrows() != sector.dim() {
                return Err(Error::DimensionMismatch(format!("block {n} has wrong dimension")));
            }
            accumulate(&sector.basis, |k, kp| block[(k, kp)], &mut obdm, &mut pair);
        }
        Ok(Self::normalized(m, rho.trace(), obdm, pair))
    }

    fn normalized(m_sites: usize, weight: f64, mut obdm: DMatrix<Complex64>, mut pair: DMatrix<f64>) -> Self {
        if weight > 0.0 {
            obdm /= Complex64::new(weight, 0.0);
            pair /= weight;
        }
        Self { m_sites, weight, obdm, pair }
    }

    pub fn density(&self) -> Vec<f64> {
        (0..self.m_sites).map(|j| self.obdm[(j, j)].re).collect()
    }

    pub fn total_number(&self) -> f64 {
        self.obdm.trace().re
    }

    /// Normal-ordered ⟨b†_j b†_j b_j b_j⟩ per site.
    pub fn local_pair(&self) -> Vec<f64> {
        (0..self.m_sites).map(|j| self.pair[(j, j)]).collect()
    }

    pub fn g2(&self, i: usize, j: usize) -> Option<f64> {
        let d = self.obdm[(i, i)].re * self.obdm[(j, j)].re;
        if self.weight <= 0.0 || d <= DENSITY_FLOOR {
            return None;
        }
        Some(self.pair[(i, j)] / d)
    }

    pub fn g2_matrix(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.m_sites).map(|i| (0..self.m_sites).map(|j| self.g2(i, j)).collect()).collect()
    }

    pub fn coincidence(&self) -> Vec<Option<f64>> {
        (0..self.m_sites).map(|j| self.g2(j, j)).collect()
    }

    /// Density-weighted coincidence Σ_j⟨b†²b²⟩_j / Σ_j⟨n_j⟩².
    pub fn local_g2(&self) -> Option<f64> {
        let den: f64 = self.density().iter().map(|n| n * n).sum();
        if self.weight <= 0.0 || den <= DENSITY_FLOOR {
            return None;
        }
        Some(self.local_pair().iter().sum::<f64>() / den)
    }

    /// Ring average of g²(j, j + d) for d = 0..M.
    pub fn ring_profile(&self) -> Vec<Option<f64>> {
        let m = self.m_sites;
        (0..m)
            .map(|d| {
                let vals: Vec<f64> = (0..m).filter_map(|j| self.g2(j, (j + d) % m)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    pub fn report(&self, boundary: Boundary) -> ObservableReport {
        ObservableReport {
            density: self.density(),
            obdm: (0..self.m_sites)
                .map(|i| (0..self.m_sites).map(|j| [self.obdm[(i, j)].re, self.obdm[(i, j)].im]).collect())
                .collect(),
            g2: self.g2_matrix(),
            coincidence: self.coincidence(),
            local_g2: self.local_g2(),
            momentum: momentum_distribution(&self.obdm, boundary),
            total_number: self.total_number(),
            friedel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableReport {
    pub density: Vec<f64>,
    /// Rows of [re, im] pairs.
    pub obdm: Vec<Vec<[f64; 2]>>,
    pub g2: Vec<Vec<Option<f64>>>,
    pub coincidence: Vec<Option<f64>>,
    pub local_g2: Option<f64>,
    pub momentum: MomentumDistribution,
    pub total_number: f64,
    pub friedel: Option<FriedelSpectrum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumDistribution {
    /// Wave numbers in units of 1/a; sine-mode numbers qπ/M on the open chain.
    pub wavenumbers: Vec<f64>,
    pub occupations: Vec<f64>,
}

impl MomentumDistribution {
    pub fn total(&self) -> f64 {
        self.occupations.iter().sum()
    }

    /// Occupation of the lowest single-particle mode.
    pub fn lowest(&self) -> f64 {
        let (i, _) = self
            .wavenumbers
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("at least one mode");
        self.occupations[i]
    }
}

/// Single-particle modes: open-chain sine modes sin(qπ(j + ½)/M), q = 1..M,
/// or ring plane waves, each normalized.
pub fn momentum_modes(m_sites: usize, boundary: Boundary) -> Vec<(f64, Vec<Complex64>)> {
    let m = m_sites as f64;
    match boundary {
        Boundary::Open => (1..=m_sites)
            .map(|q| {
                let k = q as f64 * PI / m;
                let mut v: Vec<Complex64> = (0..m_sites).map(|j| Complex64::new((k * (j as f64 + 0.5)).sin(), 0.0)).collect();
                let n = crate::linalg::norm(&v);
                v.iter_mut().for_each(|x| *x /= n);
                (k, v)
            })
            .collect(),
        Boundary::Periodic => {
            let lo = -(((m_sites - 1) / 2) as i64);
            (0..m_sites as i64)
                .map(|s| {
                    let k = 2.0 * PI * (lo + s) as f64 / m;
                    let v = (0..m_sites).map(|j| Complex64::from_polar(1.0 / m.sqrt(), k * j as f64)).collect();
                    (k, v)
                })
                .collect()
        }
    }
}

/// n_q = Σ_ij φ_q(i) φ_q(j)* ⟨b†_i b_j⟩.
pub fn momentum_distribution(obdm: &DMatrix<Complex64>, boundary: Boundary) -> MomentumDistribution {
    let m = obdm.nrows();
    let modes = momentum_modes(m, boundary);
    let mut wavenumbers = Vec::with_capacity(m);
    let mut occupations = Vec::with_capacity(m);
    for (k, phi) in modes {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                acc += phi[i] * phi[j].conj() * obdm[(i, j)];
            }
        }
        wavenumbers.push(k);
        occupations.push(acc.re);
    }
    MomentumDistribution { wavenumbers, occupations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedelSpectrum {
    /// Dominant frequency in cycles per system length; `None` for a flat profile.
    pub peak: Option<usize>,
    pub amplitude: f64,
    /// |c_f| for f = 0..=len/2, normalized so a pure cosine of unit
    /// amplitude gives 1.
    pub amplitudes: Vec<f64>,
}

/// Spectrum of a profile after subtracting its least-squares quadratic.
pub fn friedel_spectrum(profile: &[f64]) -> Result<FriedelSpectrum> {
    let len = profile.len();
    if len < 8 {
        return Err(Error::InvalidParameter { field: "profile", reason: format!("need at least 8 points, got {len}") });
    }
    let xs: Vec<f64> = (0..len).map(|j| (j as f64 + 0.5) / len as f64 - 0.5).collect();
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (x, y) in xs.iter().zip(profile) {
        let row = nalgebra::Vector3::new(1.0, *x, x * x);
        ata += row * row.transpose();
        aty += row * *y;
    }
    let coef = ata.lu().solve(&aty).unwrap_or_else(nalgebra::Vector3::zeros);
    let mut buf: Vec<Complex64> = xs
        .iter()
        .zip(profile)
        .map(|(x, y)| Complex64::new(y - (coef[0] + coef[1] * x + coef[2] * x * x), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let amplitudes: Vec<f64> = (0..=len / 2).map(|f| buf[f].norm() * if f == 0 { 1.0 } else { 2.0 } / len as f64).collect();
    let scale = profile.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let (peak, amplitude) = amplitudes
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(f, &a)| (f, a))
        .unwrap_or((0, 0.0));
    if amplitude <= 1e-12 * scale {
        return Ok(FriedelSpectrum { peak: None, amplitude: 0.0, amplitudes });
    }
    Ok(FriedelSpectrum { peak: Some(peak), amplitude, amplitudes })
}

/// One resolution of the decay-rate identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResolution {
    pub dt: f64,
    /// Centered difference of ⟨n_j⟩.
    pub lhs: Vec<f64>,
    /// 2 Im(U)⟨b†²b²⟩_j, the lattice image of (2/ħ)Im(g̃) g² n².
    pub rhs: Vec<f64>,
    pub residual: Vec<f64>,
}

impl DecayResolution {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }

    /// Largest residual relative to the smaller of the two sides, per site.
    pub fn max_relative(&self) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .zip(&self.residual)
            .map(|((l, r), res)| {
                let s = l.abs().min(r.abs());
                if res.abs() == 0.0 {
                    0.0
                } else if s == 0.0 {
                    f64::INFINITY
                } else {
                    res.abs() / s
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRateCheck {
    pub coarse: DecayResolution,
    pub fine: DecayResolution,
    /// max|residual(dt)| / max|residual(dt/2)|, ≈ 4 for O(dt²).
    pub scaling: Option<f64>,
}

impl DecayRateCheck {
    pub fn second_order(&self) -> bool {
        self.scaling.is_some_and(|s| (3.0..5.0).contains(&s))
    }
}

/// Default step of the centered derivative: 0.05 over the generator bound.
pub fn decay_check_step(gens: &Generators) -> f64 {
    let bound = Liouvillian::new(gens).bound();
    if bound > 0.0 { 0.05 / bound } else { 1.0 }
}

/// Per-site residual of ∂t⟨n_j⟩ − 2 Im(U)⟨b†²b²⟩_j with a centered
/// difference at `dt` and `dt/2`. Refused when one-body channels are active.
pub fn decay_rate_check(gens: &Generators, rho: &DensityBlocks, dt: f64) -> Result<DecayRateCheck> {
    let lp = &gens.lattice;
    if lp.one_body_active() || lp.derivative_active() {
        return Err(Error::NotApplicable(
            "decay-rate identity holds for pure two-body loss; disable kappa1 and kappa_d".into(),
        ));
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter { field: "dt", reason: "must be positive".into() });
    }
    let liou = Liouvillian::new(gens);
    let at = |h: f64| -> Result<DecayResolution> {
        let plus = Correlations::from_blocks(gens, &liou.propagate(rho, h))?;
        let minus = Correlations::from_blocks(gens, &liou.propagate(rho, -h))?;
        let now = Correlations::from_blocks(gens, rho)?;
        let np = plus.density();
        let nm = minus.density();
        let lhs: Vec<f64> = np.iter().zip(&nm).map(|(p, m)| (p * plus.weight - m * minus.weight) / (2.0 * h)).collect();
        let coef = if lp.two_body_active() { 2.0 * lp.u.im } else { 0.0 };
        let rhs: Vec<f64> = now.local_pair().iter().map(|p| coef * p * now.weight).collect();
        let residual = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
        Ok(DecayResolution { dt: h, lhs, rhs, residual })
    };
    let coarse = at(dt)?;
    let fine = at(dt / 2.0)?;
    let fr = fine.max_residual();
    let scaling = (fr > 0.0).then(|| coarse.max_residual() / fr);
    Ok(DecayRateCheck { coarse, fine, scaling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, LatticeParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn condensate_ring(m: usize, n: usize) -> (FockBasis, StateVector) {
        let basis = FockBasis::new(m, n).unwrap();
        let phi = vec![Complex64::new(1.0 / (m as f64).sqrt(), 0.0); m];
        let psi = crate::dynamics::condensate(&basis, &phi);
        (basis, psi)
    }

    #[test]
    fn single_particle_has_no_pairs() {
        let basis = FockBasis::new(4, 1).unwrap();
        let psi = StateVector::fock(&basis, &[0, 1, 0, 0]).unwrap();
        let c = Correlations::from_state(&basis, &psi).unwrap();
        assert_eq!(c.pair[(1, 1)], 0.0);
        assert_eq!(c.g2(1, 1), Some(0.0));
        assert_eq!(c.g2(0, 0), None);
    }

    #[test]
    fn two_boson_condensate_coincidence() {
        let (basis, psi) = condensate_ring(5, 2);
        let c = Correlations::from_state(&basis, &psi).unwrap();
        for g in c.coincidence() {
            assert_relative_eq!(g.unwrap(), 0.5, epsilon = 1e-12);
        }
        let md = momentum_distribution(&c.obdm, Boundary::Periodic);
        assert_relative_eq!(md.lowest(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(md.total(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_state_is_all_undefined() {
        let basis = FockBasis::new(3, 2).unwrap();
        let psi = StateVector::new(2, vec![Complex64::new(0.0, 0.0); basis.dim()]);
        let c = Correlations::from_state(&basis, &psi).unwrap();
        assert!(c.g2_matrix().iter().flatten().all(Option::is_none));
        assert!(c.local_g2().is_none());
    }

    #[test]
    fn blocks_match_state() {
        let lp = LatticeParams::dimensionless(4, Boundary::Open, 2, 1.0);
        let gens = Generators::build(&lp).unwrap();
        let basis = &gens.sector(2).unwrap().basis;
        let amps: Vec<Complex64> = (0..basis.dim()).map(|k| Complex64::new(k as f64 + 1.0, 0.3 * k as f64)).collect();
        let psi = StateVector::new(2, amps);
        let a = Correlations::from_state(basis, &psi).unwrap();
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        let b = Correlations::from_blocks(&gens, &rho).unwrap();
        assert!((a.obdm - b.obdm).camax() < 1e-13);
        assert!((a.pair - b.pair).abs().max() < 1e-13);
    }

    #[test]
    fn flat_profile_has_no_peak() {
        let s = friedel_spectrum(&[0.25; 16]).unwrap();
        assert_eq!(s.peak, None);
        assert_eq!(s.amplitude, 0.0);
        assert!(friedel_spectrum(&[1.0; 7]).is_err());
    }

    #[test]
    fn quadratic_background_is_removed() {
        let m = 32;
        let prof: Vec<f64> = (0..m)
            .map(|j| {
                let x = (j as f64 + 0.5) / m as f64;
                1.0 + 0.3 * x - 0.7 * x * x + 0.05 * (2.0 * PI * 5.0 * x).cos()
            })
            .collect();
        let s = friedel_spectrum(&prof).unwrap();
        assert_eq!(s.peak, Some(5));
        assert_relative_eq!(s.amplitude, 0.05, epsilon = 2e-3);
    }

    #[test]
    fn box_fermion_density_peaks_at_n() {
        for n in 2..=3 {
            let f = crate::fermioracle::FermiReference::new(n, crate::fermioracle::Geometry::Box, 1.0);
            let s = friedel_spectrum(&f.sample_density(32)).unwrap();
            assert_eq!(s.peak, Some(n));
        }
    }

    #[test]
    fn decay_check_refuses_one_body() {
        let mut lp = LatticeParams::dimensionless(3, Boundary::Periodic, 2, 1.0);
        lp.kappa1 = 0.1;
        let gens = Generators::build(&lp).unwrap();
        let (_, psi) = condensate_ring(3, 2);
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        assert!(matches!(decay_rate_check(&gens, &rho, 0.01), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn decay_check_without_loss_is_zero() {
        let lp = LatticeParams::dimensionless(4, Boundary::Periodic, 2, 1.0);
        let gens = Generators::build(&lp).unwrap();
        let (_, psi) = condensate_ring(4, 2);
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        let chk = decay_rate_check(&gens, &rho, 0.01).unwrap();
        assert!(chk.coarse.rhs.iter().all(|r| *r == 0.0));
        assert!(chk.coarse.lhs.iter().all(|l| l.abs() < 1e-10));
    }

    #[test]
    fn anticorrelated_state_is_dark() {
        let mut lp = LatticeParams::dimensionless(4, Boundary::Periodic, 2, 0.0);
        lp.u = Complex64::new(0.0, -1.0);
        lp.hop = 0.0;
        let gens = Generators::build(&lp).unwrap();
        let basis = &gens.sector(2).unwrap().basis;
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[basis.index_of(&[1, 0, 1, 0]).unwrap()] = Complex64::new(1.0, 0.0);
        let rho = DensityBlocks::from_pure(&gens, &StateVector::new(2, amps)).unwrap();
        let chk = decay_rate_check(&gens, &rho, 0.01).unwrap();
        assert!(chk.coarse.lhs.iter().all(|l| l.abs() < 1e-12));
        assert!(chk.coarse.rhs.iter().all(|r| *r == 0.0));
    }

    fn random_state(m: usize, n: usize) -> impl Strategy<Value = (FockBasis, StateVector)> {
        let basis = FockBasis::new(m, n).unwrap();
        let dim = basis.dim();
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_map(move |v| {
            let amps = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            (basis.clone(), StateVector::new(n, amps))
        })
    }

    proptest! {
        #[test]
        fn two_particle_invariants((basis, psi) in random_state(5, 2)) {
            prop_assume!(psi.norm_sqr() > 1e-3);
            let c = Correlations::from_state(&basis, &psi).unwrap();
            prop_assert!((c.pair.sum() - 2.0).abs() < 1e-12);
            prop_assert!((c.total_number() - 2.0).abs() < 1e-12);
            prop_assert!(c.density().iter().all(|n| *n >= -1e-12));
            let g = c.g2_matrix();
            for i in 0..5 {
                for j in 0..5 {
                    prop_assert_eq!(g[i][j], g[j][i]);
                }
            }
            for b in [Boundary::Open, Boundary::Periodic] {
                let md = momentum_distribution(&c.obdm, b);
                prop_assert!((md.total() - 2.0).abs() < 1e-10);
                prop_assert!(md.occupations.iter().all(|n| *n >= -1e-10));
            }
        }

        #[test]
        fn three_particle_number_sum((basis, psi) in random_state(4, 3)) {
            prop_assume!(psi.norm_sqr() > 1e-3);
            let c = Correlations::from_state(&basis, &psi).unwrap();
            prop_assert!((c.pair.sum() - 6.0).abs() < 1e-11);
            prop_assert!((c.obdm.clone() - c.obdm.adjoint()).camax() < 1e-13);
        }
    }
}

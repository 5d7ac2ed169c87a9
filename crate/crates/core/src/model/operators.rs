//! Hamiltonian and jump-operator construction on fixed-number sectors.
//!
//! Kinetic term: the hard-wall stencil places the walls half a spacing
//! outside the first and last sites (mirror ghost ψ₋₁ = −ψ₀), so the open
//! chain has diagonal 2J in the bulk and 3J on the two end sites. Its
//! single-particle eigenvectors are the sine modes sin(qπ(j + ½)/M) with
//! energies 2J(1 − cos(qπ/M)).

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Boundary, CsrMatrix, FockBasis, LatticeParams, SparseOperator};
use crate::Result;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Loss channel of a jump operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// c_j = b_j², n → n − 2.
    TwoBody,
    /// c_j = b_j, n → n − 1.
    OneBody,
    /// c_j = (b_{j+1} − b_j)/a, n → n − 1.
    Derivative,
}

impl Channel {
    pub fn decrement(self) -> usize {
        match self {
            Channel::TwoBody => 2,
            Channel::OneBody | Channel::Derivative => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::TwoBody => "two_body",
            Channel::OneBody => "one_body",
            Channel::Derivative => "derivative",
        }
    }
}

/// A jump operator c with its rate; the Lindblad term is rate·(cρc† − ½{c†c, ρ}).
#[derive(Debug, Clone)]
pub struct Jump {
    pub channel: Channel,
    /// Site (or left site of the bond for derivative jumps).
    pub site: usize,
    pub rate: f64,
    pub op: SparseOperator,
}

/// Diagonal of the on-site pair operator Σ_j n_j(n_j − 1) = Σ_j b_j†² b_j².
pub fn pair_diagonal(basis: &FockBasis) -> Vec<f64> {
    basis
        .iter()
        .map(|(_, occ)| occ.iter().map(|&n| (n as f64) * (n as f64 - 1.0)).sum())
        .collect()
}

pub fn number_operator(basis: &FockBasis) -> CsrMatrix {
    CsrMatrix::from_diagonal(&vec![re(basis.sector() as f64); basis.dim()])
}

/// Triplets of the single-particle operator Σ_ij h_ij b_i† b_j on a sector.
fn one_body_triplets(basis: &FockBasis, terms: &[(usize, usize, Complex64)]) -> Vec<(usize, usize, Complex64)> {
    let mut t = Vec::new();
    let mut scratch = vec![0u16; basis.m_sites()];
    for (k, occ) in basis.iter() {
        for &(i, j, h) in terms {
            if i == j {
                if occ[i] > 0 {
                    t.push((k, k, h * occ[i] as f64));
                }
                continue;
            }
            if occ[j] == 0 {
                continue;
            }
            scratch.copy_from_slice(occ);
            let amp = (occ[j] as f64).sqrt() * (occ[i] as f64 + 1.0).sqrt();
            scratch[j] -= 1;
            scratch[i] += 1;
            let target = basis.index_of(&scratch).expect("number-conserving move left the sector");
            t.push((target, k, h * amp));
        }
    }
    t
}

/// Single-particle kinetic coefficients of Σ_j[−J(b_j†b_{j+1} + h.c.) + ε_j n_j].
fn kinetic_terms(lp: &LatticeParams) -> Vec<(usize, usize, Complex64)> {
    let m = lp.m_sites;
    let j = lp.hop;
    let mut terms: Vec<(usize, usize, Complex64)> = (0..m).map(|s| (s, s, re(2.0 * j))).collect();
    if lp.boundary == Boundary::Open {
        terms[0].2 += re(j);
        terms[m - 1].2 += re(j);
    }
    for (a, b) in lp.bonds() {
        terms.push((a, b, re(-j)));
        terms.push((b, a, re(-j)));
    }
    terms
}

pub fn kinetic_matrix(lp: &LatticeParams, basis: &FockBasis) -> CsrMatrix {
    let d = basis.dim();
    CsrMatrix::from_triplets(d, d, one_body_triplets(basis, &kinetic_terms(lp)))
}

/// Graph Laplacian of the derivative stencil, Σ_bonds (b_{j+1} − b_j)†(b_{j+1} − b_j), without 1/a².
fn derivative_laplacian(lp: &LatticeParams, basis: &FockBasis) -> CsrMatrix {
    let mut terms = Vec::new();
    for (a, b) in lp.bonds() {
        terms.push((a, a, re(1.0)));
        terms.push((b, b, re(1.0)));
        terms.push((a, b, re(-1.0)));
        terms.push((b, a, re(-1.0)));
    }
    let d = basis.dim();
    CsrMatrix::from_triplets(d, d, one_body_triplets(basis, &terms))
}

/// Hermitian part: kinetic stencil plus (Re U / 2) Σ_j n_j(n_j − 1).
pub fn build_hermitian_hamiltonian(lp: &LatticeParams, basis: &FockBasis) -> Result<SparseOperator> {
    let kin = kinetic_matrix(lp, basis);
    let pair = pair_diagonal(basis);
    let diag: Vec<Complex64> = pair.iter().map(|&p| re(0.5 * lp.u.re * p)).collect();
    let h = kin.add(&CsrMatrix::from_diagonal(&diag));
    SparseOperator::hermitian(h, basis.sector())
}

/// Hermitian generator of the no-jump decay, Σ_k rate_k c_k†c_k, from the
/// closed forms of each channel.
fn loss_generator(lp: &LatticeParams, basis: &FockBasis, u: Complex64) -> CsrMatrix {
    let d = basis.dim();
    let mut diag = vec![re(0.0); d];
    if lp.channels.two_body && -u.im > 0.0 {
        for (v, p) in diag.iter_mut().zip(pair_diagonal(basis)) {
            *v += re(-u.im * p);
        }
    }
    if lp.one_body_active() {
        for v in diag.iter_mut() {
            *v += re(lp.kappa1 * basis.sector() as f64);
        }
    }
    let mut loss = CsrMatrix::from_diagonal(&diag);
    if lp.derivative_active() {
        let scale = lp.kappa_d / (lp.spacing * lp.spacing);
        loss = loss.add(&derivative_laplacian(lp, basis).scale(re(scale)));
    }
    loss
}

/// H_eff = H_herm − (i/2) Σ_k rate_k c_k†c_k.
pub fn effective_hamiltonian(lp: &LatticeParams, basis: &FockBasis) -> Result<SparseOperator> {
    let h = build_hermitian_hamiltonian(lp, basis)?;
    let loss = loss_generator(lp, basis, lp.u);
    let heff = h.matrix.add(&loss.scale(-0.5 * I));
    if loss.nnz() == 0 {
        return SparseOperator::hermitian(heff, basis.sector());
    }
    Ok(SparseOperator::new(heff, basis.sector(), basis.sector()))
}

/// Matrix of b_s^power from `from` into `to` (sector n → n − power).
fn annihilator(from: &FockBasis, to: &FockBasis, site: usize, power: u16) -> CsrMatrix {
    let mut t = Vec::new();
    let mut scratch = vec![0u16; from.m_sites()];
    for (k, occ) in from.iter() {
        let n = occ[site];
        if n < power {
            continue;
        }
        let amp: f64 = (0..power).map(|p| (n - p) as f64).product::<f64>().sqrt();
        scratch.copy_from_slice(occ);
        scratch[site] -= power;
        let target = to.index_of(&scratch).expect("target sector mismatch");
        t.push((target, k, re(amp)));
    }
    CsrMatrix::from_triplets(to.dim(), from.dim(), t)
}

/// Jump operators leaving the sector of `from`, one per site or bond and
/// channel, skipping channels that are toggled off or have zero rate.
/// `lower(n)` supplies the basis of sector n.
pub fn build_jump_operators<'a>(
    lp: &LatticeParams,
    from: &FockBasis,
    lower: impl Fn(usize) -> Option<&'a FockBasis>,
) -> Vec<Jump> {
    let n = from.sector();
    let mut jumps = Vec::new();
    if lp.two_body_active() && n >= 2 {
        let to = lower(n - 2).expect("sector n − 2 not built");
        for s in 0..lp.m_sites {
            jumps.push(Jump {
                channel: Channel::TwoBody,
                site: s,
                rate: lp.kappa2(),
                op: SparseOperator::new(annihilator(from, to, s, 2), n, n - 2),
            });
        }
    }
    if n >= 1 && (lp.one_body_active() || lp.derivative_active()) {
        let to = lower(n - 1).expect("sector n − 1 not built");
        let singles: Vec<CsrMatrix> = (0..lp.m_sites).map(|s| annihilator(from, to, s, 1)).collect();
        if lp.one_body_active() {
            for (s, op) in singles.iter().enumerate() {
                jumps.push(Jump {
                    channel: Channel::OneBody,
                    site: s,
                    rate: lp.kappa1,
                    op: SparseOperator::new(op.clone(), n, n - 1),
                });
            }
        }
        if lp.derivative_active() {
            let inv_a = re(1.0 / lp.spacing);
            for (a, b) in lp.bonds() {
                let op = singles[b].add(&singles[a].scale(re(-1.0))).scale(inv_a);
                jumps.push(Jump {
                    channel: Channel::Derivative,
                    site: a,
                    rate: lp.kappa_d,
                    op: SparseOperator::new(op, n, n - 1),
                });
            }
        }
    }
    jumps
}

/// −(i/2) Σ_k rate_k c_k†c_k assembled from explicit operator products.
pub fn anti_hermitian_from_jumps(jumps: &[Jump], dim: usize) -> CsrMatrix {
    let mut acc = CsrMatrix::zeros(dim, dim);
    for j in jumps {
        let cdc = j.op.matrix.adjoint().matmul(&j.op.matrix);
        acc = acc.add(&cdc.scale(re(j.rate)));
    }
    acc.scale(-0.5 * I)
}

/// All operators acting on one particle-number sector.
#[derive(Debug, Clone)]
pub struct Sector {
    pub basis: FockBasis,
    pub h_herm: SparseOperator,
    pub h_eff: SparseOperator,
    /// Kinetic part alone, for time-dependent couplings.
    pub h_kin: CsrMatrix,
    /// Σ_j n_j(n_j − 1) per basis state.
    pub pair: Vec<f64>,
    /// Jumps leaving this sector.
    pub jumps: Vec<Jump>,
}

impl Sector {
    pub fn n(&self) -> usize {
        self.basis.sector()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// Generator set of the master equation: every reachable sector with its
/// effective Hamiltonian and outgoing jumps.
#[derive(Debug, Clone)]
pub struct Generators {
    pub lattice: LatticeParams,
    sectors: BTreeMap<usize, Sector>,
    /// Non-two-body part of Σ rate c†c per sector (fixed under U ramps).
    fixed_loss: BTreeMap<usize, CsrMatrix>,
}

impl Generators {
    pub fn build(lp: &LatticeParams) -> Result<Self> {
        lp.validate()?;
        let sectors_n = lp.reachable_sectors();
        let mut bases: BTreeMap<usize, FockBasis> = BTreeMap::new();
        for &n in &sectors_n {
            bases.insert(n, FockBasis::new(lp.m_sites, n)?);
        }
        let mut sectors = BTreeMap::new();
        let mut fixed_loss = BTreeMap::new();
        for &n in &sectors_n {
            let basis = &bases[&n];
            let h_herm = build_hermitian_hamiltonian(lp, basis)?;
            let h_eff = effective_hamiltonian(lp, basis)?;
            let jumps = build_jump_operators(lp, basis, |k| bases.get(&k));
            let no_pair = LatticeParams { channels: super::LossChannels { two_body: false, ..lp.channels }, ..lp.clone() };
            fixed_loss.insert(n, loss_generator(&no_pair, basis, lp.u));
            sectors.insert(
                n,
                Sector {
                    basis: basis.clone(),
                    h_herm,
                    h_eff,
                    h_kin: kinetic_matrix(lp, basis),
                    pair: pair_diagonal(basis),
                    jumps,
                },
            );
        }
        Ok(Self { lattice: lp.clone(), sectors, fixed_loss })
    }

    pub fn sector(&self, n: usize) -> Option<&Sector> {
        self.sectors.get(&n)
    }

    /// Sectors in descending particle number.
    pub fn sectors(&self) -> impl Iterator<Item = &Sector> {
        self.sectors.values().rev()
    }

    pub fn sector_numbers(&self) -> Vec<usize> {
        self.sectors.keys().rev().copied().collect()
    }

    pub fn total_dim(&self) -> usize {
        self.sectors.values().map(|s| s.dim()).sum()
    }

    pub fn has_losses(&self) -> bool {
        self.sectors.values().any(|s| !s.jumps.is_empty())
    }

    /// H_eff of sector `n` for a different complex coupling U; the pair loss
    /// rate follows −Im U, one-body channels are unchanged.
    pub fn h_eff_at(&self, n: usize, u: Complex64) -> CsrMatrix {
        let s = &self.sectors[&n];
        let u = if self.lattice.channels.two_body { u } else { Complex64::new(u.re, 0.0) };
        let diag: Vec<Complex64> = s.pair.iter().map(|&p| 0.5 * u * p).collect();
        let loss = &self.fixed_loss[&n];
        s.h_kin.add(&CsrMatrix::from_diagonal(&diag)).add(&loss.scale(-0.5 * I))
    }

    /// out = H_eff(u) x without assembling the matrix.
    pub fn apply_h_eff_at(&self, n: usize, u: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        let s = &self.sectors[&n];
        let u = if self.lattice.channels.two_body { u } else { Complex64::new(u.re, 0.0) };
        s.h_kin.matvec_into(x, out);
        let mut loss = vec![Complex64::new(0.0, 0.0); x.len()];
        self.fixed_loss[&n].matvec_into(x, &mut loss);
        for k in 0..x.len() {
            out[k] += 0.5 * u * s.pair[k] * x[k] - 0.5 * I * loss[k];
        }
    }

    /// Upper bound on ‖H_eff(u)‖ for sector `n`.
    pub fn h_eff_bound_at(&self, n: usize, u: Complex64) -> f64 {
        let s = &self.sectors[&n];
        let pmax = s.pair.iter().copied().fold(0.0, f64::max);
        s.h_kin.norm_bound() + 0.5 * u.norm() * pmax + 0.5 * self.fixed_loss[&n].norm_bound()
    }
}

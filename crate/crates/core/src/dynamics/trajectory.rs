use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate_grid, StateVector};
use crate::linalg;
use crate::model::{Channel, Generators, SparseOperator};
use crate::observables::{Correlations, DENSITY_FLOOR};
use crate::{Error, Result};

/// Relative tolerance of the jump-time bisection.
pub const JUMP_TIME_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NoJumpPoint {
    pub time: f64,
    /// Unnormalized conditional state.
    pub state: StateVector,
    pub survival: f64,
}

/// Conditional no-jump evolution ψ(t) = exp(−iH_eff(t − t₀))ψ(t₀); the
/// survival probability is the norm² of the unnormalized state.
pub fn evolve_nojump(state: &StateVector, h_eff: &SparseOperator, t_grid: &[f64]) -> Result<Vec<NoJumpPoint>> {
    validate_grid(t_grid)?;
    if state.dim() != h_eff.dim() || state.sector != h_eff.domain {
        return Err(Error::DimensionMismatch("state and operator live in different sectors".into()));
    }
    let mut cur = state.amps.clone();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = t_grid[0];
    for &tn in t_grid {
        cur = linalg::propagate(&h_eff.matrix, tn - t, &cur);
        t = tn;
        let s = StateVector::new(state.sector, cur.clone());
        out.push(NoJumpPoint { time: tn, survival: s.norm_sqr(), state: s });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub channel: Channel,
    pub site: usize,
    pub from_sector: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    /// Normalized conditional states at the output times.
    pub states: Vec<StateVector>,
    pub jumps: Vec<JumpRecord>,
}

/// Generator for trajectory `index` of an ensemble seeded with `master`.
pub fn trajectory_rng(master: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// One quantum trajectory seeded by stream 0 of `seed`.
pub fn mcwf_trajectory(initial: &StateVector, gens: &Generators, t_grid: &[f64], seed: u64) -> Result<TrajectoryResult> {
    run_trajectory(initial, gens, t_grid, &mut trajectory_rng(seed, 0))
}

pub fn run_trajectory(
    initial: &StateVector,
    gens: &Generators,
    t_grid: &[f64],
    rng: &mut impl Rng,
) -> Result<TrajectoryResult> {
    validate_grid(t_grid)?;
    let sector = gens
        .sector(initial.sector)
        .ok_or_else(|| Error::DimensionMismatch(format!("sector {} not in generator set", initial.sector)))?;
    if sector.dim() != initial.dim() {
        return Err(Error::DimensionMismatch("initial state dimension".into()));
    }
    if (initial.norm_sqr() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter { field: "initial", reason: "state must be normalized".into() });
    }
    let mut n = initial.sector;
    let mut psi = initial.amps.clone();
    let mut t = t_grid[0];
    let mut last_jump = t;
    let mut threshold: f64 = rng.random();
    let mut states = Vec::with_capacity(t_grid.len());
    let mut jumps = Vec::new();
    for &t_out in t_grid {
        loop {
            let s = gens.sector(n).expect("reachable sector");
            let h = &s.h_eff.matrix;
            if s.jumps.is_empty() {
                psi = linalg::propagate(h, t_out - t, &psi);
                t = t_out;
                break;
            }
            let end = linalg::propagate(h, t_out - t, &psi);
            if linalg::norm(&end).powi(2) > threshold {
                psi = end;
                t = t_out;
                break;
            }
            let (mut lo, mut hi) = (t, t_out);
            while hi - lo > JUMP_TIME_RTOL * (hi - last_jump).max(f64::MIN_POSITIVE) {
                let mid = 0.5 * (lo + hi);
                if linalg::norm(&linalg::propagate(h, mid - t, &psi)).powi(2) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let phi = linalg::propagate(h, tau - t, &psi);
            let candidates: Vec<(usize, Vec<num_complex::Complex64>, f64)> = s
                .jumps
                .iter()
                .enumerate()
                .map(|(k, j)| {
                    let v = j.op.apply(&phi);
                    let w = j.rate * linalg::norm(&v).powi(2);
                    (k, v, w)
                })
                .collect();
            let total: f64 = candidates.iter().map(|c| c.2).sum();
            if total.is_nan() || total <= 0.0 || !total.is_finite() {
                return Err(Error::Consistency(format!(
                    "norm threshold crossed at t = {tau} in sector {n} with zero total jump rate"
                )));
            }
            let pick = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = candidates.len() - 1;
            for (i, c) in candidates.iter().enumerate() {
                acc += c.2;
                if pick < acc && c.2 > 0.0 {
                    chosen = i;
                    break;
                }
            }
            let (k, v, _) = &candidates[chosen];
            let jump = &s.jumps[*k];
            jumps.push(JumpRecord { time: tau, channel: jump.channel, site: jump.site, from_sector: n });
            let nv = linalg::norm(v);
            psi = v.iter().map(|z| z / nv).collect();
            n = jump.op.codomain;
            t = tau;
            last_jump = tau;
            threshold = rng.random();
        }
        let mut out = StateVector::new(n, psi.clone());
        out.normalize();
        states.push(out);
    }
    Ok(TrajectoryResult { times: t_grid.to_vec(), states, jumps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// |mean − reference| in units of the standard error; differences at
    /// rounding level (1e-12 relative) count as zero.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (self.mean - reference).abs();
        if d <= 1e-12 * reference.abs().max(1.0) {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY
        } else {
            d / self.stderr
        }
    }
}

fn estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|v| v.to_bits() == values[0].to_bits()) {
        return Estimate { mean: values[0], stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { mean, stderr: (var / n).sqrt() }
}

/// Jackknife estimate of f(means) from per-trajectory sample rows.
fn jackknife(rows: &[Vec<f64>], f: impl Fn(&[f64]) -> Option<f64>) -> Option<Estimate> {
    let n = rows.len();
    let width = rows[0].len();
    let mut sums = vec![0.0; width];
    for r in rows {
        for (s, v) in sums.iter_mut().zip(r) {
            *s += v;
        }
    }
    let full: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let theta = f(&full)?;
    if rows.iter().all(|r| r == &rows[0]) {
        return Some(Estimate { mean: theta, stderr: 0.0 });
    }
    let mut loo = Vec::with_capacity(n);
    let mut buf = vec![0.0; width];
    for r in rows {
        for k in 0..width {
            buf[k] = (sums[k] - r[k]) / (n as f64 - 1.0);
        }
        loo.push(f(&buf)?);
    }
    let mbar = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|x| (x - mbar).powi(2)).sum::<f64>() * (n as f64 - 1.0) / n as f64;
    Some(Estimate { mean: theta, stderr: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub master_seed: u64,
    /// ⟨n_j⟩ per time and site.
    pub density: Vec<Vec<Estimate>>,
    /// ⟨b†²b²⟩_j per time and site.
    pub pair: Vec<Vec<Estimate>>,
    pub number: Vec<Estimate>,
    /// ⟨b†²b²⟩_j / ⟨n_j⟩² per time and site (ratio of ensemble means).
    pub g2: Vec<Vec<Option<Estimate>>>,
    /// Σ_j⟨b†²b²⟩_j / Σ_j⟨n_j⟩² per time.
    pub local_g2: Vec<Option<Estimate>>,
    /// Fraction of trajectories without any jump up to each time.
    pub survival: Vec<Estimate>,
    pub jumps: Vec<Vec<JumpRecord>>,
}

/// Unconditional ensemble means over `n_traj` trajectories; trajectory i
/// draws from stream i of `master_seed`.
pub fn ensemble_average(
    initial: &StateVector,
    gens: &Generators,
    t_grid: &[f64],
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleResult> {
    if n_traj < 2 {
        return Err(Error::InvalidParameter { field: "n_traj", reason: "need at least 2 trajectories".into() });
    }
    validate_grid(t_grid)?;
    let m = gens.lattice.m_sites;
    // rows[traj][time] = [n_0..n_{M−1}, p_0..p_{M−1}, N, survived]
    let runs: Vec<(Vec<Vec<f64>>, Vec<JumpRecord>)> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let tr = run_trajectory(initial, gens, t_grid, &mut trajectory_rng(master_seed, i as u64))?;
            let mut rows = Vec::with_capacity(t_grid.len());
            for (t, s) in tr.times.iter().zip(&tr.states) {
                let c = Correlations::from_state(&gens.sector(s.sector).expect("sector").basis, s)?;
                let mut row = c.density();
                row.extend(c.local_pair());
                row.push(c.total_number());
                let survived = tr.jumps.first().is_none_or(|j| j.time > *t);
                row.push(if survived { 1.0 } else { 0.0 });
                rows.push(row);
            }
            Ok((rows, tr.jumps))
        })
        .collect::<Result<_>>()?;
    let nt = t_grid.len();
    let mut density = Vec::with_capacity(nt);
    let mut pair = Vec::with_capacity(nt);
    let mut number = Vec::with_capacity(nt);
    let mut g2 = Vec::with_capacity(nt);
    let mut local_g2 = Vec::with_capacity(nt);
    let mut survival = Vec::with_capacity(nt);
    for ti in 0..nt {
        let rows: Vec<Vec<f64>> = runs.iter().map(|(r, _)| r[ti].clone()).collect();
        let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
        density.push((0..m).map(|j| estimate(&col(j))).collect());
        pair.push((0..m).map(|j| estimate(&col(m + j))).collect());
        number.push(estimate(&col(2 * m)));
        survival.push(estimate(&col(2 * m + 1)));
        g2.push(
            (0..m)
                .map(|j| {
                    let sub: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[j], r[m + j]]).collect();
                    jackknife(&sub, |v| (v[0] * v[0] > DENSITY_FLOOR).then(|| v[1] / (v[0] * v[0])))
                })
                .collect(),
        );
        local_g2.push(jackknife(&rows, |v| {
            let den: f64 = v[..m].iter().map(|x| x * x).sum();
            (den > DENSITY_FLOOR).then(|| v[m..2 * m].iter().sum::<f64>() / den)
        }));
    }
    Ok(EnsembleResult {
        times: t_grid.to_vec(),
        n_traj,
        master_seed,
        density,
        pair,
        number,
        g2,
        local_g2,
        survival,
        jumps: runs.into_iter().map(|(_, j)| j).collect(),
    })
}

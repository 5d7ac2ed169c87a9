use serde::{Deserialize, Serialize};

use super::{ensemble_average, evolve_nojump, EnsembleResult, StateVector};
use crate::model::Generators;
use crate::observables::Correlations;
use crate::{Error, Result};

pub const CROSSING_LEVELS: [f64; 3] = [1.0, 0.5, 0.25];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub level: f64,
    /// First time the conditional local g² is below `level`, linearly
    /// interpolated between grid points.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxResult {
    pub times: Vec<f64>,
    /// Probability of no jump so far.
    pub survival: Vec<f64>,
    /// Conditional Σ_j⟨b†²b²⟩_j / Σ_j⟨n_j⟩² of the no-loss state.
    pub local_g2: Vec<Option<f64>>,
    pub crossings: Vec<Crossing>,
    /// ħL/(2|Im g̃|N), which on the lattice is M/(2κ₂N).
    pub timescale: Option<f64>,
    pub ensemble: Option<EnsembleResult>,
}

impl RelaxResult {
    pub fn crossing(&self, level: f64) -> Option<f64> {
        self.crossings.iter().find(|c| c.level == level).and_then(|c| c.time)
    }
}

/// M/(2κ₂N) for the lattice of `gens`.
pub fn loss_timescale(gens: &Generators, n: usize) -> Option<f64> {
    let lp = &gens.lattice;
    let k2 = if lp.two_body_active() { lp.kappa2() } else { 0.0 };
    (k2 > 0.0 && n > 0).then(|| lp.m_sites as f64 / (2.0 * k2 * n as f64))
}

fn first_below(times: &[f64], values: &[Option<f64>], level: f64) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for (t, v) in times.iter().zip(values) {
        let Some(v) = *v else {
            prev = None;
            continue;
        };
        if v < level {
            return Some(match prev {
                Some((t0, v0)) if v0 > v => t0 + (v0 - level) / (v0 - v) * (t - t0),
                _ => *t,
            });
        }
        prev = Some((*t, v));
    }
    None
}

/// Relaxation of an uncorrelated state under the loss channels of `gens`:
/// the conditional no-loss g² track plus, if `ensemble = Some((n_traj,
/// seed))`, unconditional trajectory averages.
pub fn dissipative_relax(
    initial: &StateVector,
    gens: &Generators,
    t_grid: &[f64],
    ensemble: Option<(usize, u64)>,
) -> Result<RelaxResult> {
    let sector = gens
        .sector(initial.sector)
        .ok_or_else(|| Error::DimensionMismatch(format!("sector {} not built", initial.sector)))?;
    let track = evolve_nojump(initial, &sector.h_eff, t_grid)?;
    let mut survival = Vec::with_capacity(track.len());
    let mut local_g2 = Vec::with_capacity(track.len());
    for p in &track {
        survival.push(p.survival);
        local_g2.push(Correlations::from_state(&sector.basis, &p.state)?.local_g2());
    }
    let crossings = CROSSING_LEVELS
        .iter()
        .map(|&level| Crossing { level, time: first_below(t_grid, &local_g2, level) })
        .collect();
    let ensemble = match ensemble {
        Some((n_traj, seed)) => Some(ensemble_average(initial, gens, t_grid, n_traj, seed)?),
        None => None,
    };
    Ok(RelaxResult {
        times: t_grid.to_vec(),
        survival,
        local_g2,
        crossings,
        timescale: loss_timescale(gens, initial.sector),
        ensemble,
    })
}

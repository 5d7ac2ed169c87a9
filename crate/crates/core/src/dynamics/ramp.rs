use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::master::{check_master_cap, Liouvillian};
use super::{validate_grid, DensityBlocks, StateVector};
use crate::linalg;
use crate::model::Generators;
use crate::params::PhysicalParams;
use crate::{Error, Result, HBAR};

/// Local error tolerance of the adaptive CF4 integrator.
pub const RAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "knob", rename_all = "snake_case")]
pub enum RampControl {
    /// Lattice coupling values [re, im] at the control times.
    Coupling { u: Vec<[f64; 2]> },
    /// Single-photon detuning Δ at the control times, mapped through g̃(Δ)
    /// and U = g̃/(ħa).
    Detuning { delta4: Vec<f64>, params: Box<PhysicalParams>, m_sites: usize },
}

/// Piecewise-linear control of U(t) or Δ(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub times: Vec<f64>,
    #[serde(flatten)]
    pub control: RampControl,
}

impl RampSchedule {
    pub fn coupling(times: Vec<f64>, u: Vec<Complex64>) -> Result<Self> {
        let s = Self { times, control: RampControl::Coupling { u: u.iter().map(|z| [z.re, z.im]).collect() } };
        s.validate()?;
        Ok(s)
    }

    pub fn detuning(times: Vec<f64>, delta4: Vec<f64>, params: PhysicalParams, m_sites: usize) -> Result<Self> {
        let s = Self { times, control: RampControl::Detuning { delta4, params: Box::new(params), m_sites } };
        s.validate()?;
        Ok(s)
    }

    /// U held at `u` on [t0, t1].
    pub fn constant(u: Complex64, t0: f64, t1: f64) -> Result<Self> {
        Self::coupling(vec![t0, t1], vec![u, u])
    }

    pub fn validate(&self) -> Result<()> {
        let n = match &self.control {
            RampControl::Coupling { u } => u.len(),
            RampControl::Detuning { delta4, m_sites, .. } => {
                if *m_sites < 1 {
                    return Err(Error::Schedule("m_sites must be positive".into()));
                }
                delta4.len()
            }
        };
        if self.times.len() < 2 || n != self.times.len() {
            return Err(Error::Schedule(format!("{} times for {n} control values; need at least 2", self.times.len())));
        }
        if self.times.iter().any(|t| !t.is_finite()) || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Schedule("control times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("validated")
    }

    pub fn covers(&self, t_grid: &[f64]) -> Result<()> {
        let (lo, hi) = (self.start(), self.end());
        match t_grid.iter().find(|t| **t < lo || **t > hi) {
            Some(t) => Err(Error::Schedule(format!("t = {t} outside schedule [{lo}, {hi}]"))),
            None => Ok(()),
        }
    }

    fn interpolate(&self, t: f64, values: &[f64]) -> f64 {
        let k = self.times.partition_point(|x| *x <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        values[k - 1] + w * (values[k] - values[k - 1])
    }

    /// Lattice coupling U(t); linear in the control knob.
    pub fn u_at(&self, t: f64) -> Complex64 {
        match &self.control {
            RampControl::Coupling { u } => {
                let re: Vec<f64> = u.iter().map(|z| z[0]).collect();
                let im: Vec<f64> = u.iter().map(|z| z[1]).collect();
                Complex64::new(self.interpolate(t, &re), self.interpolate(t, &im))
            }
            RampControl::Detuning { delta4, params, m_sites } => {
                let d = self.interpolate(t, delta4);
                let a = params.length / *m_sites as f64;
                params.coupling_at(d) / (HBAR * a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampPoint {
    pub time: f64,
    pub u: Complex64,
    /// Unnormalized conditional state.
    pub state: StateVector,
    pub survival: f64,
}

/// Conditional (no-jump) evolution under H_eff(U(t)) with adaptive CF4.
pub fn adiabatic_ramp(
    initial: &StateVector,
    gens: &Generators,
    schedule: &RampSchedule,
    t_grid: &[f64],
) -> Result<Vec<RampPoint>> {
    validate_grid(t_grid)?;
    schedule.covers(t_grid)?;
    let n = initial.sector;
    let sector = gens.sector(n).ok_or_else(|| Error::DimensionMismatch(format!("sector {n} not built")))?;
    if sector.dim() != initial.dim() {
        return Err(Error::DimensionMismatch("initial state dimension".into()));
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let apply = |t: f64, x: &[Complex64], out: &mut [Complex64]| {
        gens.apply_h_eff_at(n, schedule.u_at(t), x, out);
        out.iter_mut().for_each(|z| *z *= minus_i);
    };
    let bound = |t: f64| gens.h_eff_bound_at(n, schedule.u_at(t));
    let mut y = initial.amps.clone();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = t_grid[0];
    for &tn in t_grid {
        y = linalg::cf4_integrate(&apply, &bound, t, tn, &y, RAMP_TOL)?.0;
        t = tn;
        let s = StateVector::new(n, y.clone());
        out.push(RampPoint { time: tn, u: schedule.u_at(tn), survival: s.norm_sqr(), state: s });
    }
    Ok(out)
}

/// Full master evolution under ℒ(U(t)). The generators must contain the
/// two-body jumps whenever the schedule reaches Im U < 0.
pub fn adiabatic_ramp_master(
    rho: &DensityBlocks,
    gens: &Generators,
    schedule: &RampSchedule,
    t_grid: &[f64],
) -> Result<Vec<DensityBlocks>> {
    validate_grid(t_grid)?;
    schedule.covers(t_grid)?;
    check_master_cap(gens)?;
    for &t in &schedule.times {
        Liouvillian::with_coupling(gens, schedule.u_at(t))?;
    }
    let apply = |t: f64, x: &[Complex64], out: &mut [Complex64]| {
        let l = Liouvillian::with_coupling(gens, schedule.u_at(t)).expect("checked at control points");
        out.copy_from_slice(&l.apply(&rho.unflatten_like(x)).flatten());
    };
    let bound = |t: f64| Liouvillian::with_coupling(gens, schedule.u_at(t)).map(|l| l.bound()).unwrap_or(0.0);
    let mut y = rho.flatten();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = t_grid[0];
    for &tn in t_grid {
        y = linalg::cf4_integrate(&apply, &bound, t, tn, &y, RAMP_TOL)?.0;
        t = tn;
        out.push(rho.unflatten_like(&y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_nojump, ground_state, master_evolve};
    use crate::model::{Boundary, LatticeParams};
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn schedule_validation() {
        assert!(RampSchedule::coupling(vec![0.0, 0.0], vec![c(1.0), c(2.0)]).is_err());
        assert!(RampSchedule::coupling(vec![0.0], vec![c(1.0)]).is_err());
        assert!(RampSchedule::coupling(vec![0.0, 1.0], vec![c(1.0)]).is_err());
        let s = RampSchedule::coupling(vec![0.0, 1.0, 3.0], vec![c(0.0), c(2.0), c(0.0)]).unwrap();
        assert_relative_eq!(s.u_at(0.5).re, 1.0);
        assert_relative_eq!(s.u_at(2.0).re, 1.0);
        assert!(s.covers(&[0.0, 3.5]).is_err());
    }

    #[test]
    fn constant_schedule_matches_fixed_evolution() {
        let mut lp = LatticeParams::dimensionless(4, Boundary::Open, 2, 0.0);
        lp.u = Complex64::new(1.5, -0.4);
        let gens = Generators::build(&lp).unwrap();
        let s = gens.sector(2).unwrap();
        let psi = StateVector::fock(&s.basis, &[1, 1, 0, 0]).unwrap();
        let times = [0.0, 0.7, 2.0];
        let sched = RampSchedule::constant(lp.u, 0.0, 2.0).unwrap();
        let ramp = adiabatic_ramp(&psi, &gens, &sched, &times).unwrap();
        let fixed = evolve_nojump(&psi, &s.h_eff, &times).unwrap();
        for (a, b) in ramp.iter().zip(&fixed) {
            let d: f64 = a.state.amps.iter().zip(&b.state.amps).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(d < 1e-8);
        }
        let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
        let rm = adiabatic_ramp_master(&rho, &gens, &sched, &times).unwrap();
        let fm = master_evolve(&rho, &gens, &times).unwrap();
        for (a, b) in rm.iter().zip(&fm) {
            let d: f64 = a.flatten().iter().zip(b.flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(d < 1e-8);
        }
    }

    #[test]
    fn zero_duration_quench_keeps_state() {
        let lp = LatticeParams::dimensionless(4, Boundary::Open, 2, 0.0);
        let gens = Generators::build(&lp).unwrap();
        let psi = ground_state(&gens.sector(2).unwrap().h_herm).unwrap().state;
        let sched = RampSchedule::coupling(vec![0.0, 1e-3], vec![c(0.0), c(5.0)]).unwrap();
        let out = adiabatic_ramp(&psi, &gens, &sched, &[0.0, 0.0]).unwrap();
        assert_eq!(out[1].state, psi);
    }

    #[test]
    fn slower_ramp_is_more_adiabatic() {
        let m = 8;
        let lp = LatticeParams::dimensionless(m, Boundary::Open, 2, 0.0);
        let gens = Generators::build(&lp).unwrap();
        let start = ground_state(&gens.sector(2).unwrap().h_herm).unwrap().state;
        let target_gens = Generators::build(&lp.with_u(c(5.0))).unwrap();
        let target = ground_state(&target_gens.sector(2).unwrap().h_herm).unwrap().state;
        let fidelity = |duration: f64| {
            let sched = RampSchedule::coupling(vec![0.0, duration], vec![c(0.0), c(5.0)]).unwrap();
            let out = adiabatic_ramp(&start, &gens, &sched, &[0.0, duration]).unwrap();
            assert_relative_eq!(out[1].survival, 1.0, epsilon = 1e-8);
            out[1].state.fidelity(&target)
        };
        let fast = fidelity(2.0);
        let slow = fidelity(20.0);
        assert!(slow > fast, "slow {slow} fast {fast}");
        assert!(slow > 0.99);
    }
}

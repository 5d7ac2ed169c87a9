//! Mode runners. Each writes its tables into the artifact directory as soon
//! as they are complete and fills the summary headline.

use std::fmt;

use tgsim_core::dynamics::{
    adiabatic_ramp, adiabatic_ramp_master, diagnose, dissipative_relax, ensemble_average, evolve_nojump,
    ground_state, ground_state_with, loss_timescale, master_evolve, uncorrelated_state, DensityBlocks,
    RampSchedule, StateVector,
};
use tgsim_core::fermioracle::{lattice_fermion_energy, FermiReference};
use tgsim_core::model::{Boundary, Generators, LatticeParams};
use tgsim_core::observables::{friedel_spectrum, Correlations};
use tgsim_core::params::{
    check_validity, closed_form_correction, derive, interaction_strength, max_evolution_time, to_lattice, PhysicalParams,
};
use tgsim_core::Complex64;

use crate::config::{ConfigError, Dynamics, Initial, Mode, RampDynamics, RunConfig, Source, TimeUnit};
use crate::output::{Artifacts, Cell, Summary, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<tgsim_core::Error> for RunError {
    fn from(e: tgsim_core::Error) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Solver(format!("writing artifacts: {e}"))
    }
}

type RunResult<T = ()> = Result<T, RunError>;

pub fn run(config: &RunConfig, art: &mut Artifacts, summary: &mut Summary) -> RunResult {
    match config.mode() {
        Mode::Params => run_params(config, art, summary),
        Mode::Oracle => run_oracle(config, art, summary),
        Mode::Ground => run_ground(config, art, summary),
        Mode::Evolve => run_evolve(config, art, summary),
        Mode::Relax => run_relax(config, art, summary),
        Mode::Ramp => run_ramp(config, art, summary),
    }
}

fn audit(p: &PhysicalParams, margin: f64, summary: &mut Summary) -> RunResult {
    let d = derive(p).map_err(|e| ConfigError::new("physical", e.to_string()))?;
    summary.warnings.extend(d.warnings.iter().cloned());
    summary.interaction = Some(interaction_strength(p).map_err(|e| ConfigError::new("physical", e.to_string()))?);
    summary.closed_form_correction = Some(closed_form_correction(p));
    summary.validity = Some(check_validity(p, margin));
    summary.t_max = Some(max_evolution_time(p).bound);
    summary.derived = Some(d);
    Ok(())
}

fn run_params(config: &RunConfig, art: &mut Artifacts, summary: &mut Summary) -> RunResult {
    let Source::Physical(p) = config.source()? else { unreachable!("validated") };
    audit(p, config.solver.margin, summary)?;
    let validity = summary.validity.clone().expect("audited");
    let mut t = Table::new("validity", &["check", "lhs", "rhs", "ratio", "pass"]);
    for c in &validity.checks {
        t.push(vec![c.name.as_str().into(), c.lhs.into(), c.rhs.into(), c.ratio.into(), c.pass.into()]);
    }
    art.write_table(&t)?;
    let s = summary.interaction.expect("audited");
    let d = summary.derived.clone().expect("audited");
    summary.put("g_magnitude", s.magnitude);
    summary.put("g_complex", [s.complex.re, s.complex.im]);
    summary.put("g_definitional_abs", s.complex.norm());
    summary.put("optical_depth", d.od);
    summary.put("od_sq_over_n", d.od * d.od / p.n_atoms);
    summary.put("all_valid", validity.all_pass());
    Ok(())
}

fn run_oracle(config: &RunConfig, art: &mut Artifacts, summary: &mut Summary) -> RunResult {
    let Source::Oracle(o) = config.source()? else { unreachable!("validated") };
    let f = FermiReference::new(o.n, o.geometry, o.length).with_kinetic(o.kinetic);
    let mid = 0.5 * o.length;
    let mut t = Table::new("oracle", &["index", "z", "density", "g2_mid"]);
    for i in 0..o.samples {
        let z = (i as f64 + 0.5) * o.length / o.samples as f64;
        let g2 = if (z - mid).abs() < 1e-12 * o.length { None } else { Some(f.pair_correlation(z, mid)) };
        t.push(vec![i.into(), z.into(), f.density(z).into(), g2.into()]);
    }
    art.write_table(&t)?;
    summary.put("energy", f.energy());
    summary.put("wavenumbers", f.wavenumbers());
    summary.put("mode_energies", f.mode_energies());
    Ok(())
}

/// Lattice parameters for a physical or lattice source, recorded in the summary.
fn lattice(config: &RunConfig, summary: &mut Summary) -> RunResult<LatticeParams> {
    let disc = config.discretization.as_ref().expect("validated");
    let mut lp = match config.source()? {
        Source::Physical(p) => {
            audit(p, config.solver.margin, summary)?;
            let d = summary.derived.as_ref().expect("audited");
            let mapping = to_lattice(d, disc.m_sites, disc.boundary).map_err(|e| ConfigError::new("physical", e.to_string()))?;
            if mapping.cutoff_mismatch {
                summary.warnings.push(format!(
                    "k_max = {:e} exceeds the lattice cutoff π/a = {:e}",
                    mapping.k_max_user, mapping.k_lattice
                ));
            }
            let lp = mapping.lattice.clone();
            summary.mapping = Some(mapping);
            lp
        }
        Source::Lattice(l) => l.to_params(disc)?,
        Source::Oracle(_) => unreachable!("validated"),
    };
    if let Some(n) = disc.n_max {
        lp.n_max = n;
    }
    if lp.n_max == 0 {
        return Err(ConfigError::new("discretization.n_max", "must be ≥ 1").into());
    }
    summary.lattice = Some(lp.clone());
    Ok(lp)
}

fn time_scale(config: &RunConfig, gens: &Generators) -> RunResult<f64> {
    match config.solver.t_unit {
        TimeUnit::Absolute => Ok(1.0),
        TimeUnit::Tau => loss_timescale(gens, gens.lattice.n_max)
            .ok_or_else(|| ConfigError::new("solver.t_unit", "tau needs an active two-body loss").into()),
    }
}

fn grid(config: &RunConfig, gens: &Generators, summary: &mut Summary) -> RunResult<Vec<f64>> {
    let scale = time_scale(config, gens)?;
    let times: Vec<f64> = config.raw_grid().iter().map(|t| t * scale).collect();
    if let (Source::Physical(p), Some(first), Some(last)) = (config.source()?, times.first(), times.last()) {
        if !max_evolution_time(p).allows(last - first, config.solver.margin) {
            summary.warnings.push(format!(
                "horizon {:e} s exceeds margin × t_max = {:e} s",
                last - first,
                config.solver.margin * max_evolution_time(p).bound
            ));
        }
    }
    Ok(times)
}

fn initial_state(config: &RunConfig, gens: &Generators) -> RunResult<StateVector> {
    let lp = &gens.lattice;
    let n = lp.n_max;
    let sector = gens.sector(n).ok_or_else(|| RunError::Solver(format!("sector {n} not built")))?;
    Ok(match config.solver.initial {
        Initial::Condensate => uncorrelated_state(lp, n)?,
        Initial::Ground => ground_state_with(&sector.h_herm, config.solver.method)?.state,
        Initial::Fock => {
            let occ = config.solver.occupation.as_ref().expect("validated");
            StateVector::fock(&sector.basis, occ).map_err(|e| ConfigError::new("solver.occupation", e.to_string()))?
        }
    })
}

fn position(lp: &LatticeParams, j: usize) -> f64 {
    match lp.boundary {
        Boundary::Open => (j as f64 + 0.5) * lp.spacing,
        Boundary::Periodic => j as f64 * lp.spacing,
    }
}

fn conditional(gens: &Generators, psi: &StateVector) -> RunResult<Correlations> {
    let basis = &gens.sector(psi.sector).expect("sector of a propagated state").basis;
    Ok(Correlations::from_state(basis, &psi.clone().normalized())?)
}

fn run_ground(config: &RunConfig, art: &mut Artifacts, summary: &mut Summary) -> RunResult {
    let lp = lattice(config, summary)?;
    let gens = Generators::build(&lp)?;
    let sector = gens.sector(lp.n_max).expect("top sector");
    let gs = ground_state_with(&sector.h_herm, config.solver.method)?;
    let c = Correlations::from_state(&sector.basis, &gs.state)?;
    let density = c.density();
    let pair = c.local_pair();
    let coincidence = c.coincidence();

    let mut t = Table::new("profile", &["site", "z", "density", "local_pair", "coincidence"]);
    for j in 0..lp.m_sites {
        t.push(vec![j.into(), position(&lp, j).into(), density[j].into(), pair[j].into(), coincidence[j].into()]);
    }
    art.write_table(&t)?;

    let mut report = c.report(lp.boundary);
    let mut t = Table::new("momentum", &["mode", "k", "occupation"]);
    for (q, (k, occ)) in report.momentum.wavenumbers.iter().zip(&report.momentum.occupations).enumerate() {
        t.push(vec![q.into(), (*k).into(), (*occ).into()]);
    }
    art.write_table(&t)?;

    let mut t = Table::new("g2", &["i", "j", "g2"]);
    for (i, row) in report.g2.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            t.push(vec![i.into(), j.into(), (*g).into()]);
        }
    }
    art.write_table(&t)?;

    let g2_spectrum = if lp.m_sites >= 8 {
        report.friedel = friedel_spectrum(&density).ok();
        match lp.boundary {
            Boundary::Periodic => c
                .ring_profile()
                .into_iter()
                .collect::<Option<Vec<f64>>>()
                .and_then(|p| friedel_spectrum(&p).ok()),
            Boundary::Open => None,
        }
    } else {
        None
    };
    summary.put("energy", gs.energy);
    summary.put("gap", gs.gap);
    summary.put("degenerate", gs.degenerate);
    summary.put("residual", gs.residual);
    summary.put("free_fermion_energy", lattice_fermion_energy(lp.m_sites, lp.n_max, lp.hop, lp.boundary));
    summary.put("total_number", report.total_number);
    summary.put("local_g2", report.local_g2);
    summary.put("lowest_mode_occupation", report.momentum.lowest());
    summary.put("friedel_peak", report.friedel.as_ref().and_then(|f| f.peak));
    summary.put("friedel_g2_peak", g2_spectrum.as_ref().and_then(|f| f.peak));
    summary.put("friedel_g2", &g2_spectrum);
    summary.put("observables", &report);
    Ok(())
}

const SERIES_HEADER: [&str; 7] = ["time", "number", "number_se", "local_g2", "local_g2_se", "survival", "survival_se"];
const DENSITY_HEADER: [&str; 4] = ["time", "site", "density", "density_se"];

fn run_evolve(config: &RunConfig, art: &mut Artifacts, summary: &mut Summary) -> RunResult {
    let lp = lattice(config, summary)?;
    let gens = Generators::build(&lp)?;
    let times = grid(config, &gens, summary)?;
    let psi = initial_state(config, &gens)?;
    let n = psi.sector;
    let mut series = Table::new("timeseries", &SERIES_HEADER);
    let mut dens = Table::new("density", &DENSITY_HEADER);

    match config.solver.dynamics {
        Dynamics::Master => {
            let out = master_evolve(&DensityBlocks::from_pure(&gens, &psi)?, &gens, &times)?;
            let mut worst_trace: f64 = 0.0;
            let mut min_eig = f64::INFINITY;
            for (&t, rho) in times.iter().zip(&out) {
                let c = Correlations::from_blocks(&gens, rho)?;
                let survival = rho.blocks.get(&n).map_or(0.0, |b| b.trace().re);
                let d = diagnose(rho);
                worst_trace = worst_trace.max((d.trace - 1.0).abs());
                min_eig = min_eig.min(d.min_eigenvalue);
                series.push(vec![
                    t.into(),
                    c.total_number().into(),
                    Cell::Empty,
                    c.local_g2().into(),
                    Cell::Empty,
                    survival.into(),
                    Cell::Empty,
                ]);
                for (j, x) in c.density().into_iter().enumerate() {
                    dens.push(vec![t.into(), j.into(), x.into(), Cell::Empty]);
                }
            }
            summary.put("trace_deviation", worst_trace);
            summary.put("min_block_eigenvalue", min_eig);
        }
        Dynamics::Trajectories => {
            let ens = ensemble_average(&psi, &gens, &times, config.solver.n_traj, config.solver.seed)?;
            for (ti, &t) in times.iter().enumerate() {
                let g2 = ens.local_g2[ti];
                series.push(vec![
                    t.into(),
                    ens.number[ti].mean.into(),
                    ens.number[ti].stderr.into(),
                    g2.map(|e| e.mean).into(),
                    g2.map(|e| e.stderr).into(),
                    ens.survival[ti].mean.into(),
                    ens.survival[ti].stderr.into(),
                ]);
                for (j, e) in ens.density[ti].iter().enumerate() {
                    dens.push(vec![t.into(), j.into(), e.mean.into(), e.stderr.into()]);
                }
            }
            let mut jumps = Table::new("jumps", &["trajectory", "time", "channel", "site", "from_sector"]);
            for (k, rec) in ens.jumps.iter().enumerate() {
                for j in rec {
                    jumps.push(vec![k.into(), j.time.into(), j.channel.name().into(), j.site.into(), j.from_sector.into()]);
                }
            }
            art.write_table(&jumps)?;
            summary.put("n_traj", ens.n_traj);
            summary.put("seed", ens.master_seed);
            summary.put("total_jumps", ens.jumps.iter().map(Vec::len).sum::<usize>());
        }
        Dynamics::Nojump => {
            let sector = gens.sector(n).expect("top sector");
            for p in evolve_nojump(&psi, &sector.h_eff, &times)? {
                let c = conditional(&gens, &p.state)?;
                series.push(vec![
                    p.time.into(),
                    c.total_number().into(),
                    Cell::Empty,
                    c.local_g2().into(),
                    Cell::Empty,
                    p.survival.into(),
                    Cell::Empty,
                ]);
                for (j, x) in c.density().into_iter().enumerate() {
                    dens.push(vec![p.time.into(), j.into(), x.into(), Cell::Empty]);
                }
            }
        }
    }
    art.write_table(&series)?;
    art.write_table(&dens)?;
    headline_from_series(&series, summary);
    Ok(())
}

fn headline_from_series(series: &Table, summary: &mut Summary) {
    let Some(last) = series.rows.last() else { return };
    let get = |name: &str| {
        let i = series.header.iter().position(|h| *h == name)?;
        match last[i] {
            Cell::F(x) => Some(x),
            _ => None,
        }
    };
    summary.put("final_time", get("time"));
    summary.put("final_number", get("number"));
    summary.put("final_local_g2", get("local_g2"));
    summary.put("final_survival", get("survival"));
}

fn run_relax(config: &RunConfig, art: &mut Artifacts, summary: &mut Summary) -> RunResult {
    let lp = lattice(config, summary)?;
    let gens = Generators::build(&lp)?;
    let times = grid(config, &gens, summary)?;
    let psi = initial_state(config, &gens)?;
    let ensemble = (config.solver.n_traj >= 2).then_some((config.solver.n_traj, config.solver.seed));
    let r = dissipative_relax(&psi, &gens, &times, ensemble)?;

    let mut t = Table::new(
        "relax",
        &[
            "time", "time_tau", "survival", "local_g2", "ens_number", "ens_number_se", "ens_local_g2", "ens_local_g2_se",
            "ens_survival", "ens_survival_se",
        ],
    );
    for (i, &time) in r.times.iter().enumerate() {
        let mut row: Vec<Cell> = vec![
            time.into(),
            r.timescale.map(|tau| time / tau).into(),
            r.survival[i].into(),
            r.local_g2[i].into(),
        ];
        match &r.ensemble {
            Some(e) => {
                let g2 = e.local_g2[i];
                row.extend([
                    e.number[i].mean.into(),
                    e.number[i].stderr.into(),
                    g2.map(|x| x.mean).into(),
                    g2.map(|x| x.stderr).into(),
                    e.survival[i].mean.into(),
                    e.survival[i].stderr.into(),
                ]);
            }
            None => row.extend(std::iter::repeat_n(Cell::Empty, 6)),
        }
        t.push(row);
    }
    art.write_table(&t)?;
    summary.put("timescale", r.timescale);
    summary.put("crossings", &r.crossings);
    summary.put("final_survival", r.survival.last());
    summary.put("final_local_g2", r.local_g2.last().copied().flatten());
    if let Some(e) = &r.ensemble {
        summary.put("n_traj", e.n_traj);
        summary.put("seed", e.master_seed);
    }
    Ok(())
}

fn run_ramp(config: &RunConfig, art: &mut Artifacts, summary: &mut Summary) -> RunResult {
    let ramp = config.ramp.as_ref().expect("validated");
    let mut lp = lattice(config, summary)?;
    let disc = config.discretization.as_ref().expect("validated");
    let probe = Generators::build(&lp)?;
    let scale = time_scale(config, &probe)?;
    let control_times: Vec<f64> = ramp.times.iter().map(|t| t * scale).collect();
    let schedule = match (&ramp.u, &ramp.delta4, config.source()?) {
        (Some(u), _, _) => {
            RampSchedule::coupling(control_times, u.iter().map(|z| Complex64::new(z[0], z[1])).collect())
        }
        (None, Some(d), Source::Physical(p)) => RampSchedule::detuning(control_times, d.clone(), p.clone(), disc.m_sites),
        _ => unreachable!("validated"),
    }
    .map_err(|e| ConfigError::new("ramp", e.to_string()))?;

    // Generators carry the strongest pair loss reached by the schedule.
    let lossiest = schedule
        .times
        .iter()
        .map(|&t| schedule.u_at(t))
        .min_by(|a, b| a.im.total_cmp(&b.im))
        .expect("validated schedule has control points");
    lp.u = lossiest;
    let gens = Generators::build(&lp)?;
    let psi = match config.solver.initial {
        Initial::Ground => {
            let start = Generators::build(&lp.with_u(schedule.u_at(schedule.start())))?;
            ground_state(&start.sector(lp.n_max).expect("top sector").h_herm)?.state
        }
        _ => initial_state(config, &gens)?,
    };
    let times = grid(config, &gens, summary)?;
    schedule.covers(&times).map_err(|e| ConfigError::new("solver.t_values", e.to_string()))?;

    let mut t = Table::new("ramp", &["time", "u_re", "u_im", "number", "local_g2", "survival"]);
    let mut dens = Table::new("density", &DENSITY_HEADER);
    match ramp.dynamics {
        RampDynamics::Nojump => {
            for p in adiabatic_ramp(&psi, &gens, &schedule, &times)? {
                let c = conditional(&gens, &p.state)?;
                t.push(vec![
                    p.time.into(),
                    p.u.re.into(),
                    p.u.im.into(),
                    c.total_number().into(),
                    c.local_g2().into(),
                    p.survival.into(),
                ]);
                for (j, x) in c.density().into_iter().enumerate() {
                    dens.push(vec![p.time.into(), j.into(), x.into(), Cell::Empty]);
                }
            }
        }
        RampDynamics::Master => {
            let out = adiabatic_ramp_master(&DensityBlocks::from_pure(&gens, &psi)?, &gens, &schedule, &times)?;
            for (&time, rho) in times.iter().zip(&out) {
                let c = Correlations::from_blocks(&gens, rho)?;
                let u = schedule.u_at(time);
                let survival = rho.blocks.get(&psi.sector).map_or(0.0, |b| b.trace().re);
                t.push(vec![
                    time.into(),
                    u.re.into(),
                    u.im.into(),
                    c.total_number().into(),
                    c.local_g2().into(),
                    survival.into(),
                ]);
                for (j, x) in c.density().into_iter().enumerate() {
                    dens.push(vec![time.into(), j.into(), x.into(), Cell::Empty]);
                }
            }
        }
    }
    art.write_table(&t)?;
    art.write_table(&dens)?;
    headline_from_series(&t, summary);
    Ok(())
}

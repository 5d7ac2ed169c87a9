//! Acceptance suite: one pass/fail line per criterion.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tgsim_core::dynamics::{
    dissipative_relax, ensemble_average, ground_state, master_evolve, uncorrelated_state, DensityBlocks, StateVector,
};
use tgsim_core::fermioracle::{FermiReference, Geometry};
use tgsim_core::linalg;
use tgsim_core::model::{Boundary, CsrMatrix, FockBasis, Generators, LatticeParams};
use tgsim_core::observables::{decay_check_step, decay_rate_check, momentum_modes, Correlations};
use tgsim_core::params::{interaction_strength, PhysicalParams};
use tgsim_core::SPEED_OF_LIGHT;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Trace/positivity/drift/reproducibility records gathered for criterion 9.
#[derive(Default)]
struct Ledger {
    trace_dev: f64,
    min_eig: f64,
    reproducible: bool,
    runs: usize,
}

impl Ledger {
    fn record(&mut self, series: &[DensityBlocks]) {
        for r in series {
            self.trace_dev = self.trace_dev.max((r.trace() - 1.0).abs());
            for (_, e) in r.min_eigenvalues() {
                self.min_eig = self.min_eig.min(e);
            }
        }
        self.runs += 1;
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn physical(rng: &mut ChaCha8Rng) -> PhysicalParams {
    let gamma = 2.0 * PI * rng.random_range(1.0e6..2.0e7);
    let split = rng.random_range(0.1..0.9);
    let g1 = 2.0 * PI * rng.random_range(1.0e3..1.0e6);
    PhysicalParams {
        g1,
        g2: g1 * rng.random_range(0.5..2.0),
        omega_c: 2.0 * PI * rng.random_range(1.0e5..1.0e7),
        delta3: -10.0 * gamma,
        delta4: 0.0,
        delta_omega: 0.0,
        gamma31: split * gamma,
        gamma32: (1.0 - split) * gamma,
        gamma42: gamma * rng.random_range(0.2..5.0),
        n_atoms: 10f64.powf(rng.random_range(3.0..8.0)),
        n_ph: 2,
        length: 10f64.powf(rng.random_range(-4.0..-1.0)),
        c_light: SPEED_OF_LIGHT,
        k_max: 1.0e3,
    }
}

fn criterion1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = physical(&mut rng);
        let od = 4.0 * p.n_atoms * p.g1 * p.g1 * p.length / (SPEED_OF_LIGHT * (p.gamma31 + p.gamma32));
        let expected = od * od / (160.0 * p.n_atoms);
        let g = interaction_strength(&p).unwrap().magnitude;
        worst = worst.max((g - expected).abs() / expected);
    }
    // Anchors: choose N so that OD²/N hits the target.
    let anchor = |target: f64| {
        let base = physical(&mut ChaCha8Rng::seed_from_u64(2));
        let per_n = 4.0 * base.g1 * base.g1 * base.length / (SPEED_OF_LIGHT * (base.gamma31 + base.gamma32));
        let p = PhysicalParams { n_atoms: target / (per_n * per_n), ..base };
        interaction_strength(&p).unwrap().magnitude
    };
    let g160 = anchor(160.0);
    let g03 = anchor(0.3);
    let pass = worst <= 1e-12 && (g160 - 1.0).abs() <= 1e-12 && (g03 - 0.3 / 160.0).abs() <= 1e-12 * 0.3 / 160.0;
    Outcome {
        pass,
        detail: format!("max rel dev {worst:.2e} over 100 draws; |G|(160) = {g160:.15}, |G|(0.3) = {g03:.6e}"),
    }
}

fn ring_ground(m: usize, u_over_j: f64) -> (Generators, Correlations, f64) {
    let lp = LatticeParams::dimensionless(m, Boundary::Periodic, 2, u_over_j);
    let gens = Generators::build(&lp).unwrap();
    let s = gens.sector(2).unwrap();
    let gs = ground_state(&s.h_herm).unwrap();
    let corr = Correlations::from_state(&s.basis, &gs.state).unwrap();
    (gens, corr, gs.energy)
}

fn criterion2() -> Outcome {
    let (m, n, g) = (32usize, 2.0, 20.0);
    let u = 2.0 * g * n / m as f64;
    let (_, corr, _) = ring_ground(m, u);
    let g2 = corr.local_g2().unwrap();
    let target = (1.0 - 1.0 / (n * n)) * 4.0 * PI * PI / (3.0 * g * g);
    let spread = corr.coincidence().iter().map(|x| (x.unwrap() - g2).abs()).fold(0.0, f64::max);
    let rel = (g2 - target).abs() / target;
    Outcome {
        pass: rel <= 0.3,
        detail: format!(
            "U/J = {u}, g2(j,j) = {g2:.5} vs {target:.5} (rel dev {:.1}%, site spread {spread:.1e})",
            100.0 * rel
        ),
    }
}

fn criterion3() -> Outcome {
    let (m, g) = (32usize, 100.0);
    let u = 2.0 * g * 2.0 / m as f64;
    let (_, corr, _) = ring_ground(m, u);
    let oracle = FermiReference::new(2, Geometry::Ring, m as f64);
    let dens = corr.density();
    let ff = oracle.sample_density(m);
    let rms = |d: &[f64]| (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt();
    let dens_err = rms(&dens.iter().zip(&ff).map(|(a, b)| a - b).collect::<Vec<_>>()) / rms(&ff);
    let prof = corr.ring_profile();
    let diffs: Vec<f64> = (1..m).map(|d| prof[d].unwrap() - oracle.pair_correlation_ring(d as f64)).collect();
    let refs: Vec<f64> = (1..m).map(|d| oracle.pair_correlation_ring(d as f64)).collect();
    let g2_err = rms(&diffs) / rms(&refs);
    let n0 = tgsim_core::observables::momentum_distribution(&corr.obdm, Boundary::Periodic).lowest();
    Outcome {
        pass: dens_err <= 0.02 && g2_err <= 0.05 && n0 > 1.0,
        detail: format!(
            "U/J = {u}: density RMS {:.2e}, g2(r) RMS {:.2}%, n(k0) = {n0:.4} (fermions: 1)",
            dens_err,
            100.0 * g2_err
        ),
    }
}

fn criterion4(ledger: &mut Ledger) -> Outcome {
    let mut lp = LatticeParams::dimensionless(4, Boundary::Open, 2, 0.0);
    lp.u = c(0.5, -1.0);
    let gens = Generators::build(&lp).unwrap();
    let psi = uncorrelated_state(&lp, 2).unwrap();
    let times: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
    let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
    let exact = master_evolve(&rho, &gens, &times).unwrap();
    ledger.record(&exact);
    let ens = ensemble_average(&psi, &gens, &times, 2000, 20240601).unwrap();
    let again = ensemble_average(&psi, &gens, &times, 2000, 20240601).unwrap();
    ledger.reproducible = ens == again;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (ti, r) in exact.iter().enumerate() {
        let cm = Correlations::from_blocks(&gens, r).unwrap();
        let mut z = vec![ens.number[ti].z_score(cm.total_number() * cm.weight)];
        for j in 0..4 {
            z.push(ens.density[ti][j].z_score(cm.density()[j] * cm.weight));
            if let (Some(e), Some(g)) = (ens.g2[ti][j], cm.g2(j, j)) {
                z.push(e.z_score(g));
            }
        }
        if let (Some(e), Some(g)) = (ens.local_g2[ti], cm.local_g2()) {
            z.push(e.z_score(g));
        }
        count += z.len();
        worst = z.into_iter().fold(worst, f64::max);
    }
    Outcome { pass: worst <= 3.0, detail: format!("{count} comparisons over {} times, max |z| = {worst:.2}", times.len()) }
}

fn criterion5(ledger: &mut Ledger) -> Outcome {
    let mut lp = LatticeParams::dimensionless(4, Boundary::Periodic, 2, 0.0);
    lp.u = c(1.0, -1.0);
    let gens = Generators::build(&lp).unwrap();
    let psi = uncorrelated_state(&lp, 2).unwrap();
    let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
    let dt = decay_check_step(&gens);
    let chk = decay_rate_check(&gens, &rho, dt).unwrap();
    ledger.record(&[rho]);
    let rel = chk.coarse.max_relative().max(chk.fine.max_relative());
    let scaling = chk.scaling.unwrap_or(f64::NAN);
    Outcome {
        pass: rel <= 0.01 && chk.second_order(),
        detail: format!(
            "dt = {dt:.3e}: lhs {:.6}, rhs {:.6}, rel residual {rel:.2e}, halving ratio {scaling:.3}",
            chk.coarse.lhs[0], chk.coarse.rhs[0]
        ),
    }
}

fn criterion6(ledger: &mut Ledger) -> Outcome {
    // |G| = κ₂M/(2JN) = 4 on the M = 8 open chain.
    let m = 8usize;
    let kappa2 = 2.0;
    let run = |k2: f64, times: &[f64]| {
        let mut lp = LatticeParams::dimensionless(m, Boundary::Open, 2, 0.0);
        lp.u = c(0.0, -k2);
        let gens = Generators::build(&lp).unwrap();
        let psi = uncorrelated_state(&lp, 2).unwrap();
        (dissipative_relax(&psi, &gens, times, None).unwrap(), gens, psi)
    };
    let tau = m as f64 / (2.0 * kappa2 * 2.0);
    let times: Vec<f64> = (0..=250).map(|k| 0.02 * tau * k as f64).collect();
    let (r, gens, psi) = run(kappa2, &times);
    let g: Vec<f64> = r.local_g2.iter().map(|x| x.unwrap()).collect();
    // Transient: the initial drop down to the first local minimum.
    let start = g.windows(2).position(|w| w[1] > w[0]).unwrap_or(g.len() - 1);
    let rise = g[start..].windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let monotone = rise <= 1e-12;
    let cross = r.crossing(0.25);
    let ratio = cross.map(|t| t / tau).unwrap_or(f64::INFINITY);
    let horizon = [0.0, 5.0 * tau];
    let s_lo = run(kappa2, &horizon).0.survival[1];
    let s_hi = run(10.0 * kappa2, &horizon).0.survival[1];
    let rho = DensityBlocks::from_pure(&gens, &psi).unwrap();
    ledger.record(&master_evolve(&rho, &gens, &[0.0, tau, 2.0 * tau, 5.0 * tau]).unwrap());
    Outcome {
        pass: monotone && (1.0 / 3.0..=3.0).contains(&ratio) && s_hi > s_lo,
        detail: format!(
            "monotone after t = {:.2} tau: {monotone} (largest rise {rise:.1e}); crosses 0.25 at {ratio:.2} tau; survival at 5 tau {s_lo:.4} (k2) < {s_hi:.4} (10 k2): {}",
            times[start] / tau,
            s_hi > s_lo
        ),
    }
}

fn criterion7() -> Outcome {
    let m = 8usize;
    let a = 0.5;
    let mut worst: f64 = 0.0;
    let mut zero_mode: f64 = f64::NAN;
    let mut proportional: f64 = 0.0;
    let build = |boundary, hop, kappa1, kappa_d| {
        let mut lp = LatticeParams::dimensionless(m, boundary, 1, 0.0);
        lp.hop = hop;
        lp.kappa1 = kappa1;
        lp.kappa_d = kappa_d;
        lp.spacing = a;
        Generators::build(&lp).unwrap()
    };
    // Ring: plane waves diagonalize both H and the loss.
    for (kappa1, kappa_d) in [(0.3, 0.0), (0.0, 0.2), (0.3, 0.2)] {
        let gens = build(Boundary::Periodic, 1.0, kappa1, kappa_d);
        let h = &gens.sector(1).unwrap().h_eff.matrix;
        for (k, phi) in momentum_modes(m, Boundary::Periodic) {
            let eps = 2.0 * (1.0 - k.cos());
            let rate = kappa1 + kappa_d / (a * a) * 2.0 * (1.0 - k.cos());
            let expect = c(eps, -0.5 * rate);
            let hphi = h.matvec(&phi);
            let res: Vec<Complex64> = hphi.iter().zip(&phi).map(|(x, y)| x - expect * y).collect();
            worst = worst.max(linalg::norm(&res));
            if kappa1 == 0.0 {
                let measured = -2.0 * linalg::dot(&phi, &hphi).im;
                if k == 0.0 {
                    zero_mode = measured;
                } else {
                    proportional = proportional.max((measured / eps - kappa_d / (a * a)).abs());
                }
            }
        }
    }
    // Open chain: the loss part alone has the Neumann-stencil spectrum.
    let gens = build(Boundary::Open, 0.0, 0.0, 0.2);
    let dense = gens.sector(1).unwrap().h_eff.matrix.to_dense();
    let (vals, _) = linalg::hermitian_eigen(&(dense * c(0.0, -2.0)).map(|z| c(-z.re, 0.0)));
    let mut expect: Vec<f64> = (0..m).map(|q| 0.2 / (a * a) * 2.0 * (1.0 - (q as f64 * PI / m as f64).cos())).collect();
    expect.sort_by(f64::total_cmp);
    let mut rates = vals.clone();
    rates.sort_by(f64::total_cmp);
    for (x, y) in rates.iter().zip(&expect) {
        worst = worst.max((x - y).abs());
    }
    // Uniform κ₁ on the open chain: every mode decays at κ₁.
    let gens = build(Boundary::Open, 1.0, 0.3, 0.0);
    let (ev, _) = linalg::general_eigen(&gens.sector(1).unwrap().h_eff.matrix.to_dense()).unwrap();
    for e in ev {
        worst = worst.max((-2.0 * e.im - 0.3).abs());
    }
    Outcome {
        pass: worst <= 1e-10 && proportional <= 1e-10 && zero_mode.abs() <= 1e-12,
        detail: format!("max deviation {worst:.1e}; rate/eps - kD/a^2 {proportional:.1e}; k = 0 rate {zero_mode:.1e}"),
    }
}

fn criterion8() -> Outcome {
    // ħ = m_eff = L = 1: J = M²/2, continuum E = π²/2.
    let target = PI * PI / 2.0;
    let mut errs = Vec::new();
    let ms = [8usize, 16, 32, 64];
    for &m in &ms {
        let mut lp = LatticeParams::dimensionless(m, Boundary::Open, 1, 0.0);
        lp.spacing = 1.0 / m as f64;
        lp.hop = 0.5 * (m * m) as f64;
        let gens = Generators::build(&lp).unwrap();
        let e = ground_state(&gens.sector(1).unwrap().h_herm).unwrap().energy;
        errs.push((e - target).abs());
    }
    let xs: Vec<f64> = ms.iter().map(|m| (*m as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    Outcome {
        pass: (slope + 2.0).abs() <= 0.05 && errs.windows(2).all(|w| w[1] < w[0]),
        detail: format!("errors {:?}, log-log slope {slope:.4}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()),
    }
}

fn criterion9(ledger: &Ledger) -> Outcome {
    // Hermitian drift: the criterion-2 Hamiltonian over 10⁴ steps.
    let lp = LatticeParams::dimensionless(32, Boundary::Periodic, 2, 2.5);
    let gens = Generators::build(&lp).unwrap();
    let s = gens.sector(2).unwrap();
    let basis: &FockBasis = &s.basis;
    let mut amps = vec![c(0.0, 0.0); basis.dim()];
    amps[basis.index_of(&[[1u16, 1].as_slice(), &[0; 30]].concat()).unwrap()] = c(0.6, 0.0);
    amps[basis.index_of(&[[2u16].as_slice(), &[0; 31]].concat()).unwrap()] = c(0.0, 0.8);
    let psi = StateVector::new(2, amps);
    let h: &CsrMatrix = &s.h_herm.matrix;
    let energy = |v: &[Complex64]| linalg::dot(v, &h.matvec(v)).re;
    let e0 = energy(&psi.amps);
    let mut v = psi.amps.clone();
    let mut drift: f64 = 0.0;
    for step in 1..=10_000 {
        v = linalg::propagate(h, 0.01, &v);
        if step % 100 == 0 {
            drift = drift.max((energy(&v) - e0).abs()).max((linalg::norm(&v).powi(2) - 1.0).abs());
        }
    }
    Outcome {
        pass: ledger.trace_dev <= 1e-8 && ledger.min_eig >= -1e-8 && drift <= 1e-10 && ledger.reproducible,
        detail: format!(
            "{} master runs: trace dev {:.1e}, min block eigenvalue {:.1e}; hermitian drift {drift:.1e} over 1e4 steps; reproducible {}",
            ledger.runs, ledger.trace_dev, ledger.min_eig, ledger.reproducible
        ),
    }
}

fn main() {
    let mut ledger = Ledger { reproducible: false, ..Default::default() };
    let mut failed = 0;
    let mut report = |id: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id}: {verdict} ({:.1} s) {}", t.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, &mut criterion1);
    report(2, &mut criterion2);
    report(3, &mut criterion3);
    report(4, &mut || criterion4(&mut ledger));
    report(5, &mut || criterion5(&mut ledger));
    report(6, &mut || criterion6(&mut ledger));
    report(7, &mut criterion7);
    report(8, &mut criterion8);
    report(9, &mut || criterion9(&ledger));
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

//! Physical parameters of the four-level scheme and their effective-model
//! images.
//!
//! Inputs are SI (angular frequencies in rad/s, lengths in m). The derived
//! mass and coupling are kept in SI as well; [`to_lattice`] is the single
//! place where the unit system switches to ħ = 1 lattice units.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{Boundary, LatticeParams, LossChannels};
use crate::{Error, Result, HBAR, SPEED_OF_LIGHT};

/// Default numeric meaning of "≪": `lhs / rhs ≤ 0.1`.
pub const DEFAULT_MARGIN: f64 = 0.1;

fn default_c_light() -> f64 {
    SPEED_OF_LIGHT
}

/// Raw experimental parameters of the four-level EIT medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Single-photon Rabi frequency on |3⟩↔|1⟩ [rad/s].
    pub g1: f64,
    /// Single-photon Rabi frequency on |4⟩↔|2⟩ [rad/s].
    pub g2: f64,
    /// Control Rabi frequency Ω_c [rad/s].
    pub omega_c: f64,
    /// Probe detuning δ from |3⟩ [rad/s].
    pub delta3: f64,
    /// Probe detuning Δ from |4⟩ [rad/s].
    pub delta4: f64,
    /// Probe/control frequency difference Δω [rad/s].
    pub delta_omega: f64,
    /// Full decay rate |3⟩↔|1⟩ [1/s].
    pub gamma31: f64,
    /// Full decay rate |3⟩↔|2⟩ [1/s].
    pub gamma32: f64,
    /// Full decay rate |4⟩↔|2⟩ [1/s].
    pub gamma42: f64,
    /// Number of atoms N.
    pub n_atoms: f64,
    /// Number of photons in the pulse N_ph.
    pub n_ph: u32,
    /// Medium length L [m].
    pub length: f64,
    /// Speed of light [m/s].
    #[serde(default = "default_c_light")]
    pub c_light: f64,
    /// Maximal wave number of the pulse [1/m].
    pub k_max: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("g1", self.g1),
            ("g2", self.g2),
            ("omega_c", self.omega_c),
            ("delta3", self.delta3),
            ("delta4", self.delta4),
            ("delta_omega", self.delta_omega),
            ("gamma31", self.gamma31),
            ("gamma32", self.gamma32),
            ("gamma42", self.gamma42),
            ("n_atoms", self.n_atoms),
            ("length", self.length),
            ("c_light", self.c_light),
            ("k_max", self.k_max),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { field, reason: format!("{v} is not finite") });
            }
        }
        for (field, v) in [("gamma31", self.gamma31), ("gamma32", self.gamma32), ("gamma42", self.gamma42)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter { field, reason: format!("decay rate {v} < 0") });
            }
        }
        let positive = [
            ("n_atoms", self.n_atoms, 1.0),
            ("length", self.length, f64::MIN_POSITIVE),
            ("k_max", self.k_max, f64::MIN_POSITIVE),
            ("c_light", self.c_light, f64::MIN_POSITIVE),
        ];
        for (field, v, min) in positive {
            if v < min {
                return Err(Error::InvalidParameter { field, reason: format!("{v} below minimum {min}") });
            }
        }
        if self.n_ph < 1 {
            return Err(Error::InvalidParameter { field: "n_ph", reason: "need at least one photon".into() });
        }
        Ok(())
    }

    /// Full decay rate of |3⟩, Γ = γ31 + γ32.
    pub fn gamma3(&self) -> f64 {
        self.gamma31 + self.gamma32
    }

    /// Ω₀ = √(N g1² + 2 Ω_c²).
    pub fn omega0(&self) -> f64 {
        (self.n_atoms * self.g1 * self.g1 + 2.0 * self.omega_c * self.omega_c).sqrt()
    }

    /// (sin θ, cos θ) of the dark-state mixing angle.
    pub fn mixing_angle(&self) -> (f64, f64) {
        let omega0 = self.omega0();
        if omega0 == 0.0 {
            return (0.0, 0.0);
        }
        (self.n_atoms.sqrt() * self.g1 / omega0, std::f64::consts::SQRT_2 * self.omega_c / omega0)
    }

    /// Optical depth from the |3⟩↔|1⟩ form, 4 N g1² L / (c Γ).
    pub fn optical_depth(&self) -> f64 {
        4.0 * self.n_atoms * self.g1 * self.g1 * self.length / (self.c_light * self.gamma3())
    }

    /// Optical depth from the |4⟩↔|2⟩ form, 4 N g2² L / (c γ42).
    pub fn optical_depth_upper(&self) -> f64 {
        4.0 * self.n_atoms * self.g2 * self.g2 * self.length / (self.c_light * self.gamma42)
    }

    /// Complex coupling g̃ = 2ħ L g2² cos²θ / (Δ − cos²θ Δω + i γ42/2) [J·m].
    pub fn coupling_at(&self, delta4: f64) -> Complex64 {
        let (_, cos) = self.mixing_angle();
        let cos2 = cos * cos;
        let denom = Complex64::new(delta4 - cos2 * self.delta_omega, 0.5 * self.gamma42);
        Complex64::new(2.0 * HBAR * self.length * self.g2 * self.g2 * cos2, 0.0) / denom
    }
}

/// Effective-model quantities derived from [`PhysicalParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub sin_theta: f64,
    pub cos_theta: f64,
    /// Ω₀ [rad/s].
    pub omega0: f64,
    /// Γ = γ31 + γ32 [1/s].
    pub gamma3: f64,
    /// Effective polariton mass [kg].
    pub m_eff: f64,
    /// Complex contact coupling g̃ [J·m].
    pub g_tilde: Complex64,
    /// Optical depth (|3⟩↔|1⟩ form).
    pub od: f64,
    /// Complex Lieb-Liniger parameter m_eff g̃ / (ħ² N_ph / L).
    pub g_param: Complex64,
    /// Two-photon detuning ε = −cos²θ Δω [rad/s].
    pub epsilon: f64,
    /// Detuning entering g̃, Δ − cos²θ Δω [rad/s].
    pub shifted_detuning: f64,
    /// Upper bound on the evolution time set by derivative losses [s].
    pub t_max: f64,
    /// Homogeneous one-body loss rate Γ Δω² cos²θ / Ω₀² [1/s].
    pub kappa1: f64,
    /// Derivative-loss coefficient Γ c² cos²θ / Ω₀² [m²/s].
    pub kappa_d: f64,
    /// Continuum two-body loss coefficient −Im(g̃)/ħ [m/s].
    pub kappa2_cont: f64,
    pub length: f64,
    pub n_ph: u32,
    pub k_max: f64,
    /// Non-fatal diagnostics raised while deriving.
    pub warnings: Vec<String>,
}

/// Map physical parameters onto the effective dissipative Lieb-Liniger model.
pub fn derive(p: &PhysicalParams) -> Result<DerivedParams> {
    p.validate()?;
    if p.omega_c <= 0.0 {
        return Err(Error::ZeroControlField);
    }
    if p.delta3 == 0.0 {
        return Err(Error::ZeroProbeDetuning);
    }
    let (sin_theta, cos_theta) = p.mixing_angle();
    let cos2 = cos_theta * cos_theta;
    let omega0 = p.omega0();
    let gamma3 = p.gamma3();
    let c2 = p.c_light * p.c_light;

    let m_eff = -HBAR * omega0 * omega0 / (2.0 * p.delta3 * c2 * cos2);
    let g_tilde = p.coupling_at(p.delta4);
    let density = p.n_ph as f64 / p.length;
    let g_param = g_tilde * (m_eff / (HBAR * HBAR * density));

    let mut warnings = Vec::new();
    let lower = p.g1 * p.g1 * p.gamma42;
    let upper = p.g2 * p.g2 * gamma3;
    if (lower - upper).abs() > 1e-9 * lower.abs().max(upper.abs()) {
        let msg = format!(
            "g1²/Γ ≠ g2²/γ42: optical depths disagree ({:e} vs {:e}); using the |3⟩↔|1⟩ form",
            p.optical_depth(),
            p.optical_depth_upper()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    Ok(DerivedParams {
        sin_theta,
        cos_theta,
        omega0,
        gamma3,
        m_eff,
        g_tilde,
        od: p.optical_depth(),
        g_param,
        epsilon: -cos2 * p.delta_omega,
        shifted_detuning: p.delta4 - cos2 * p.delta_omega,
        t_max: max_evolution_time(p).bound,
        kappa1: gamma3 * p.delta_omega * p.delta_omega * cos2 / (omega0 * omega0),
        kappa_d: gamma3 * c2 * cos2 / (omega0 * omega0),
        kappa2_cont: -g_tilde.im / HBAR,
        length: p.length,
        n_ph: p.n_ph,
        k_max: p.k_max,
        warnings,
    })
}

/// Interaction strength: the definitional complex G and the closed-form |G|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionStrength {
    /// m_eff g̃ / (ħ² N_ph / L).
    pub complex: Complex64,
    /// Closed form (1/16) Γ γ42 OD² / (|δ| √(Δ² + γ42²/4) N N_ph).
    ///
    /// The closed form assumes sin²θ = 1 and drops the cos²θ Δω shift of
    /// the detuning, so it differs from `complex.norm()` by
    /// [`closed_form_correction`].
    pub magnitude: f64,
}

pub fn interaction_strength(p: &PhysicalParams) -> Result<InteractionStrength> {
    let d = derive(p)?;
    Ok(InteractionStrength { complex: d.g_param, magnitude: interaction_magnitude(p) })
}

/// Closed-form |G| from the optical depth. Falls back to the Rabi-frequency
/// form when γ42 = 0, where the optical-depth form degenerates.
fn interaction_magnitude(p: &PhysicalParams) -> f64 {
    let width = (p.delta4 * p.delta4 + 0.25 * p.gamma42 * p.gamma42).sqrt();
    let n_ph = p.n_ph as f64;
    if p.gamma42 == 0.0 {
        let c2 = p.c_light * p.c_light;
        return p.g1 * p.g1 * p.g2 * p.g2 * p.length * p.length * p.n_atoms
            / (c2 * p.delta3.abs() * width * n_ph);
    }
    let od = p.optical_depth();
    p.gamma3() * p.gamma42 * od * od / (16.0 * p.delta3.abs() * width * p.n_atoms * n_ph)
}

/// Ratio |G|_definitional / |G|_closed-form (exact when g1²/Γ = g2²/γ42).
///
/// Equals (Ω₀² / N g1²) · √(Δ² + γ42²/4) / |Δ − cos²θΔω + iγ42/2|; tends to 1
/// in the slow-light limit with Δω = 0.
pub fn closed_form_correction(p: &PhysicalParams) -> f64 {
    let (sin, cos) = p.mixing_angle();
    let cos2 = cos * cos;
    let bare = (p.delta4 * p.delta4 + 0.25 * p.gamma42 * p.gamma42).sqrt();
    let shifted = Complex64::new(p.delta4 - cos2 * p.delta_omega, 0.5 * p.gamma42).norm();
    bare / (sin * sin * shifted)
}

/// One audited inequality `lhs ≪ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub margin: f64,
    pub checks: Vec<ValidityCheck>,
}

impl ValidityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ValidityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

fn check(name: &str, lhs: f64, rhs: f64, margin: f64) -> ValidityCheck {
    let ratio = ratio(lhs, rhs);
    ValidityCheck { name: name.to_string(), lhs, rhs, ratio, pass: ratio <= margin }
}

/// Audit the Born-Markov and slow-light conditions. Never rejects.
pub fn check_validity(p: &PhysicalParams, margin: f64) -> ValidityReport {
    let (_, cos) = p.mixing_angle();
    let cos2 = cos * cos;
    let omega0 = p.omega0();
    let omega0_sq = omega0 * omega0;
    let ck = p.c_light * p.k_max;
    let fastest = p.gamma31.max(p.gamma32).max(p.gamma42).max(p.delta3.abs());
    let checks = vec![
        check(
            "nonlinear_saturation",
            4.0 * p.g2 * p.g2 * cos2 * p.n_ph as f64,
            p.gamma42 * p.gamma42,
            margin,
        ),
        check("dispersion_cutoff", cos2 * ck * ck, omega0_sq, margin),
        check("frequency_mismatch", cos2 * p.delta_omega * p.delta_omega, omega0_sq, margin),
        check("omega0_dominance", fastest, omega0, margin),
        check("slow_light", cos2, 1.0, margin),
    ];
    ValidityReport { margin, checks }
}

/// Upper bound on the simulated horizon imposed by derivative losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionBound {
    /// 2 Ω₀² / (Γ c² k_max² cos²θ) [s]; infinite when cos θ = 0 or Γ = 0.
    pub bound: f64,
}

impl EvolutionBound {
    /// Whether `horizon ≤ margin · bound`.
    pub fn allows(&self, horizon: f64, margin: f64) -> bool {
        horizon <= margin * self.bound
    }
}

pub fn max_evolution_time(p: &PhysicalParams) -> EvolutionBound {
    let (_, cos) = p.mixing_angle();
    let omega0 = p.omega0();
    let ck = p.c_light * p.k_max;
    let denom = p.gamma3() * ck * ck * cos * cos;
    let bound = if denom == 0.0 { f64::INFINITY } else { 2.0 * omega0 * omega0 / denom };
    EvolutionBound { bound }
}

/// Lattice image of the continuum model plus the cutoff bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeMapping {
    pub lattice: LatticeParams,
    /// User-supplied k_max [1/m].
    pub k_max_user: f64,
    /// Lattice cutoff π/a [1/m].
    pub k_lattice: f64,
    /// Set when the pulse cutoff exceeds what the lattice resolves.
    pub cutoff_mismatch: bool,
}

/// Discretize the effective model on `m_sites` sites of spacing a = L/M.
///
/// Lattice energies are angular frequencies: J = ħ/(2 m_eff a²),
/// U = g̃/(ħ a), κ₂ = −Im U. The derivative-loss coefficient stays in m²/s and
/// pairs with jump operators (b_{j+1} − b_j)/a.
pub fn to_lattice(d: &DerivedParams, m_sites: usize, boundary: Boundary) -> Result<LatticeMapping> {
    if m_sites < 2 {
        return Err(Error::InvalidParameter { field: "m_sites", reason: format!("{m_sites} < 2") });
    }
    if d.m_eff <= 0.0 || !d.m_eff.is_finite() {
        return Err(Error::NegativeMass { m_eff: d.m_eff });
    }
    let spacing = d.length / m_sites as f64;
    let hop = HBAR / (2.0 * d.m_eff * spacing * spacing);
    let u = d.g_tilde / (HBAR * spacing);
    let lattice = LatticeParams::new(
        m_sites,
        boundary,
        d.n_ph as usize,
        hop,
        u,
        d.kappa1,
        d.kappa_d,
        spacing,
        LossChannels::default(),
    )?;
    let k_lattice = std::f64::consts::PI / spacing;
    if d.k_max > k_lattice {
        log::warn!("k_max = {:e} exceeds the lattice cutoff π/a = {:e}", d.k_max, k_lattice);
    }
    Ok(LatticeMapping { lattice, k_max_user: d.k_max, k_lattice, cutoff_mismatch: d.k_max > k_lattice })
}

/// Interaction parameter reconstructed from lattice quantities, U M / (2 J N_ph).
pub fn lattice_interaction_parameter(lp: &LatticeParams, n_ph: usize) -> Complex64 {
    lp.u * (lp.m_sites as f64 / (2.0 * lp.hop * n_ph as f64))
}

//! Physical parameters, closed-form derived quantities and the Hamiltonian
//! builders.
//!
//! Public frequencies are ordinary frequencies `ν = ω/2π` in Hz. Every
//! Hamiltonian matrix is returned in angular units (rad/s); [`angular`] is the
//! single conversion point.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{
    annihilation, embed, embed_modes, number, qubit_transition, HilbertSpec, Level, Operator, Slot,
};

/// Hz → rad/s.
pub fn angular(nu_hz: f64) -> f64 {
    2.0 * PI * nu_hz
}

fn angular_c(z: C64) -> C64 {
    z * (2.0 * PI)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    /// Second-harmonic mode frequency (Hz).
    pub nu_a: f64,
    /// Fundamental mode frequency (Hz).
    pub nu_b: f64,
    /// Detuning of |e⟩ from two fundamental photons, `ν_e − 2ν_b` (Hz).
    pub delta: f64,
    /// Detuning of |r⟩ from one fundamental photon, `ν_r − ν_b` (Hz).
    pub delta_r: f64,
    /// g ↔ e coupling through mode a (Hz, complex).
    pub g_d: C64,
    /// g ↔ r coupling through mode b (Hz, complex).
    pub g_gr: C64,
    /// r ↔ e coupling through mode b (Hz, complex).
    pub g_er: C64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Resonant drive amplitude on mode a (Hz, real).
    pub epsilon: f64,
    /// Phase of the down-conversion term in the driven rotating frame.
    pub phi: f64,
}

pub const DEFAULT_PHI: f64 = -PI / 2.0;

impl SystemParams {
    /// Flux-qubit reference point: `ν_a = 2ν_b = 5.5 GHz`, `Δ = 2Δ_r = ν_a/10`,
    /// `|g_d| = 20 MHz`, `|g_gr| = |g_er| = 10 MHz`, `γ_a = 2γ_b = 11 MHz`,
    /// undriven.
    pub fn reference() -> Self {
        let nu_a = 5.5e9;
        Self {
            nu_a,
            nu_b: nu_a / 2.0,
            delta: nu_a / 10.0,
            delta_r: nu_a / 20.0,
            g_d: C64::new(20e6, 0.0),
            g_gr: C64::new(10e6, 0.0),
            g_er: C64::new(10e6, 0.0),
            gamma_a: 11e6,
            gamma_b: 5.5e6,
            epsilon: 0.0,
            phi: DEFAULT_PHI,
        }
    }

    /// Level energy of |e⟩ (Hz), `Δ + 2ν_b`.
    pub fn nu_e(&self) -> f64 {
        self.delta + 2.0 * self.nu_b
    }

    /// Level energy of |r⟩ (Hz), `Δ_r + ν_b`.
    pub fn nu_r(&self) -> f64 {
        self.delta_r + self.nu_b
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Keeps the coherent part of the model and resets the decay rates to
    /// `γ_b = χ·gamma_b_over_chi`, `γ_a = γ_b·gamma_a_over_gamma_b`.
    pub fn with_decays_relative_to_chi(
        mut self,
        gamma_b_over_chi: f64,
        gamma_a_over_gamma_b: f64,
    ) -> Result<Self> {
        let chi = effective_params(&self)?.chi;
        self.gamma_b = chi * gamma_b_over_chi;
        self.gamma_a = self.gamma_b * gamma_a_over_gamma_b;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        let finite = [
            self.nu_a,
            self.nu_b,
            self.delta,
            self.delta_r,
            self.gamma_a,
            self.gamma_b,
            self.epsilon,
            self.phi,
        ]
        .iter()
        .all(|x| x.is_finite())
            && [self.g_d, self.g_gr, self.g_er]
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::invalid("parameters must be finite"));
        }
        if self.gamma_a < 0.0 || self.gamma_b < 0.0 {
            return Err(Error::invalid("decay rates must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveParams {
    /// Down-conversion strength χ (Hz).
    pub chi: f64,
    /// `|g_d|²/Δ` (Hz).
    pub shift_a: f64,
    /// `|g_gr|²/Δ_r` (Hz).
    pub shift_b: f64,
    /// `ν_a − shift_a` (Hz).
    pub nu_eff: f64,
    /// Threshold drive `γ_aγ_b/χ` (Hz); `+∞` when χ vanishes.
    pub epsilon_c: f64,
    pub phi_eff: f64,
    /// `(ν_a − shift_a) − 2(ν_b − shift_b)` (Hz).
    pub matching_residual: f64,
}

impl EffectiveParams {
    /// Complex down-conversion coefficient `(χ/2)·e^{iφ_eff}` (Hz).
    pub fn pdc_coefficient(&self) -> C64 {
        C64::from_polar(self.chi / 2.0, self.phi_eff)
    }
}

fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

pub fn effective_params(p: &SystemParams) -> Result<EffectiveParams> {
    if p.delta == 0.0 {
        return Err(Error::invalid("detuning Δ must be nonzero"));
    }
    if p.delta_r == 0.0 {
        return Err(Error::invalid("detuning Δ_r must be nonzero"));
    }
    let product = p.g_d.conj() * p.g_er * p.g_gr;
    let chi = 2.0 * product.norm() / (p.delta_r * p.delta).abs();
    let mut phi_eff = product.arg();
    if p.delta * p.delta_r < 0.0 {
        phi_eff += PI;
    }
    let shift_a = p.g_d.norm_sqr() / p.delta;
    let shift_b = p.g_gr.norm_sqr() / p.delta_r;
    let epsilon_c = if chi > 0.0 {
        p.gamma_a * p.gamma_b / chi
    } else {
        f64::INFINITY
    };
    Ok(EffectiveParams {
        chi,
        shift_a,
        shift_b,
        nu_eff: p.nu_a - shift_a,
        epsilon_c,
        phi_eff: wrap_phase(phi_eff),
        matching_residual: (p.nu_a - shift_a) - 2.0 * (p.nu_b - shift_b),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    /// A large-detuning inequality fails at the requested factor.
    Regime {
        condition: String,
        lhs: f64,
        rhs: f64,
    },
    /// The two-photon resonance is off by more than χ/10.
    Matching { residual: f64, chi: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Regime {
                condition,
                lhs,
                rhs,
            } => {
                write!(
                    f,
                    "warning: regime violated: {condition} ({lhs:e} < {rhs:e})"
                )
            }
            Diagnostic::Matching { residual, chi } => write!(
                f,
                "warning: frequency matching residual {residual:e} Hz exceeds chi/10 = {:e} Hz",
                chi / 10.0
            ),
        }
    }
}

pub const DEFAULT_REGIME_FACTOR: f64 = 10.0;

/// Checks the large-detuning assumptions behind the elimination.
pub fn validate_regime(p: &SystemParams, factor: f64) -> Vec<Diagnostic> {
    let gmax = p.g_d.norm().max(p.g_gr.norm()).max(p.g_er.norm());
    let mut out = Vec::new();
    let mut check = |condition: &str, lhs: f64, rhs: f64| {
        if lhs < rhs {
            out.push(Diagnostic::Regime {
                condition: condition.to_string(),
                lhs,
                rhs,
            });
        }
    };
    check("|delta| >= factor * max|g|", p.delta.abs(), factor * gmax);
    check(
        "|delta_r| >= factor * max|g|",
        p.delta_r.abs(),
        factor * gmax,
    );
    check(
        "|delta - delta_r| >= factor * |g_er|",
        (p.delta - p.delta_r).abs(),
        factor * p.g_er.norm(),
    );
    if let Ok(eff) = effective_params(p) {
        if eff.matching_residual.abs() > eff.chi / 10.0 {
            out.push(Diagnostic::Matching {
                residual: eff.matching_residual,
                chi: eff.chi,
            });
        }
    }
    out
}

/// Full-space building blocks shared by the builders and the elimination.
pub(crate) struct FullOps {
    pub a: Operator,
    pub b: Operator,
    pub n_a: Operator,
    pub n_b: Operator,
    pub sigma: [[Operator; 3]; 3],
}

impl FullOps {
    pub fn new(s: &HilbertSpec) -> Result<Self> {
        let sigma =
            Level::ALL.map(|i| Level::ALL.map(|j| embed(&qubit_transition(i, j), Slot::Qubit, s)));
        let sigma = sigma.map(|row| row.map(|x| x.expect("qubit slot")));
        Ok(Self {
            a: embed(&annihilation(s.cutoff_a())?, Slot::ModeA, s)?,
            b: embed(&annihilation(s.cutoff_b())?, Slot::ModeB, s)?,
            n_a: embed(&number(s.cutoff_a())?, Slot::ModeA, s)?,
            n_b: embed(&number(s.cutoff_b())?, Slot::ModeB, s)?,
            sigma,
        })
    }

    pub fn proj(&self, i: Level, j: Level) -> &Operator {
        &self.sigma[i.index()][j.index()]
    }
}

pub(crate) struct ModeOps {
    pub a: Operator,
    pub b: Operator,
    pub n_a: Operator,
    pub n_b: Operator,
}

impl ModeOps {
    pub fn new(s: &HilbertSpec) -> Result<Self> {
        Ok(Self {
            a: embed_modes(&annihilation(s.cutoff_a())?, Slot::ModeA, s)?,
            b: embed_modes(&annihilation(s.cutoff_b())?, Slot::ModeB, s)?,
            n_a: embed_modes(&number(s.cutoff_a())?, Slot::ModeA, s)?,
            n_b: embed_modes(&number(s.cutoff_b())?, Slot::ModeB, s)?,
        })
    }
}

/// `X + X†`.
fn plus_hc(x: &Operator) -> Operator {
    x + &x.adjoint()
}

/// Free Hamiltonian `ω_e|e⟩⟨e| + ω_r|r⟩⟨r| + ω_a a†a + ω_b b†b` (rad/s).
pub fn build_h0(p: &SystemParams, s: &HilbertSpec) -> Result<Operator> {
    let ops = FullOps::new(s)?;
    let h = &(&(ops.proj(Level::E, Level::E) * angular(p.nu_e()))
        + &(ops.proj(Level::R, Level::R) * angular(p.nu_r())))
        + &(&(&ops.n_a * angular(p.nu_a)) + &(&ops.n_b * angular(p.nu_b)));
    Ok(h)
}

/// Rotating-wave interaction `g_d a|e⟩⟨g| + g_gr b|r⟩⟨g| + g_er b|e⟩⟨r| + h.c.` (rad/s).
pub fn build_hi(p: &SystemParams, s: &HilbertSpec) -> Result<Operator> {
    let ops = FullOps::new(s)?;
    let x = &(&(&ops.a * ops.proj(Level::E, Level::G)) * angular_c(p.g_d))
        + &(&(&(&ops.b * ops.proj(Level::R, Level::G)) * angular_c(p.g_gr))
            + &(&(&ops.b * ops.proj(Level::E, Level::R)) * angular_c(p.g_er)));
    Ok(plus_hc(&x))
}

/// Weighted excitation number `K = 2a†a + b†b + 2|e⟩⟨e| + |r⟩⟨r|`, conserved by `H₀ + H_I`.
pub fn excitation_operator(s: &HilbertSpec) -> Result<Operator> {
    let ops = FullOps::new(s)?;
    Ok(&(&(&ops.n_a * 2.0) + &ops.n_b)
        + &(&(ops.proj(Level::E, Level::E) * 2.0) + ops.proj(Level::R, Level::R)))
}

/// `K = 2a†a + b†b` on the two-mode space, conserved by the effective Hamiltonian.
pub fn mode_excitation_operator(s: &HilbertSpec) -> Result<Operator> {
    let ops = ModeOps::new(s)?;
    Ok(&(&ops.n_a * 2.0) + &ops.n_b)
}

/// Effective two-mode Hamiltonian
/// `(ω_a − |g_d|²/Δ)a†a + (ω_b − |g_gr|²/Δ_r)b†b + (χ/2)(e^{iφ}a†b² + h.c.)` (rad/s),
/// with `φ = phi_eff`.
pub fn build_h_eff(p: &SystemParams, s: &HilbertSpec) -> Result<Operator> {
    let eff = effective_params(p)?;
    let ops = ModeOps::new(s)?;
    let pdc = &(&ops.a.adjoint() * &(&ops.b * &ops.b)) * angular_c(eff.pdc_coefficient());
    Ok(
        &(&(&ops.n_a * angular(p.nu_a - eff.shift_a))
            + &(&ops.n_b * angular(p.nu_b - eff.shift_b)))
            + &plus_hc(&pdc),
    )
}

/// `iε(a† − a) + (χ/2)(e^{iφ}a†b² + e^{−iφ}ab†²)` built from arbitrary `a`,
/// `b` operators and angular-unit coefficients.
pub(crate) fn pdc_drive_hamiltonian(
    a: &Operator,
    b: &Operator,
    epsilon: f64,
    chi: f64,
    phi: f64,
) -> Operator {
    let drive = &a.adjoint() * C64::new(0.0, epsilon);
    let pdc = &(&a.adjoint() * &(b * b)) * C64::from_polar(chi / 2.0, phi);
    plus_hc(&(&drive + &pdc))
}

/// Drive-frame Hamiltonian `iε(a†−a) + (χ/2)(e^{iφ}a†b² + e^{−iφ}ab†²)` (rad/s),
/// using `p.epsilon` and `p.phi`. Only exact when the matching residual
/// vanishes; see [`validate_regime`].
pub fn build_h_rotating(p: &SystemParams, s: &HilbertSpec) -> Result<Operator> {
    let eff = effective_params(p)?;
    let ops = ModeOps::new(s)?;
    Ok(pdc_drive_hamiltonian(
        &ops.a,
        &ops.b,
        angular(p.epsilon),
        angular(eff.chi),
        p.phi,
    ))
}

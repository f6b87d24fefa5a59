//! Driven-dissipative steady state of the down-conversion model.
//!
//! All routines work in the drive frame of [`crate::model::build_h_rotating`]
//! with field damping rates `γ_a`, `γ_b`. Quadratures of the second-harmonic
//! fluctuation are `δx = δb + δb†` and `δy = −i(δb − δb†)`, normalized so the
//! vacuum has unit variance.

use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{effective_params, SystemParams};

pub mod lindblad;
pub mod linearized;
pub mod mean_field;
pub mod scan;
pub mod sde;

pub use lindblad::{auto_cutoffs, lindblad_steady_state, LindbladSolution};
pub use linearized::{linearized_g2, linearized_variances, lyapunov_covariance, Variances};
pub use mean_field::{mean_field, Branch, MeanField};
pub use scan::{threshold_scan, ScanOptions, ScanRow};
pub use sde::{sde_trajectories, SdeOptions, SdeReport};

/// Half-width of the threshold exclusion window, relative to `ε_c`.
pub const THRESHOLD_WINDOW: f64 = 0.02;

pub fn in_threshold_window(eps: f64, eps_c: f64) -> bool {
    eps_c.is_finite() && (eps - eps_c).abs() <= THRESHOLD_WINDOW * eps_c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Linearized,
    Lindblad,
    Sde,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Linearized => "linearized",
            Method::Lindblad => "lindblad",
            Method::Sde => "sde",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linearized" => Ok(Method::Linearized),
            "lindblad" => Ok(Method::Lindblad),
            "sde" => Ok(Method::Sde),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    /// Drive inside the threshold exclusion window; linearization unreliable.
    NearThreshold,
    /// χ vanishes, so there is no threshold.
    ChiZero,
    /// `g²(0)` is 0/0 (empty mode).
    G2Undefined,
    /// The closed-form variances disagree with the stationary covariance
    /// of the linearized equations.
    FormulaMismatch,
    /// Step halving stopped before the SDE moments settled.
    StepNotConverged,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::NearThreshold => "near-threshold-invalid",
            Flag::ChiZero => "chi-zero",
            Flag::G2Undefined => "g2-undefined",
            Flag::FormulaMismatch => "formula-mismatch",
            Flag::StepNotConverged => "step-not-converged",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationReport {
    pub method: Method,
    pub var_x: f64,
    pub var_y: f64,
    /// `⟨b†b⟩` including the coherent part.
    pub n_b: f64,
    pub g2: f64,
    /// `⟨δb²⟩`.
    pub anomalous: C64,
    /// Standard error of `var_y` (SDE only).
    pub statistical_error: Option<f64>,
    pub flags: Vec<Flag>,
}

/// Second-harmonic moments `⟨b⟩`, `⟨b†b⟩`, `⟨b²⟩`, `⟨b†²b²⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Moments {
    pub mean: C64,
    pub number: f64,
    pub square: C64,
    pub fourth: f64,
}

impl Moments {
    pub fn var_x(&self) -> f64 {
        let x = 2.0 * self.mean.re;
        2.0 * self.square.re + 2.0 * self.number + 1.0 - x * x
    }

    pub fn var_y(&self) -> f64 {
        let y = 2.0 * self.mean.im;
        -2.0 * self.square.re + 2.0 * self.number + 1.0 - y * y
    }

    pub fn anomalous(&self) -> C64 {
        self.square - self.mean * self.mean
    }

    pub fn g2(&self) -> f64 {
        if self.number > 0.0 {
            self.fourth / (self.number * self.number)
        } else {
            f64::NAN
        }
    }

    pub fn report(&self, method: Method) -> FluctuationReport {
        let g2 = self.g2();
        FluctuationReport {
            method,
            var_x: self.var_x(),
            var_y: self.var_y(),
            n_b: self.number,
            g2,
            anomalous: self.anomalous(),
            statistical_error: None,
            flags: if g2.is_nan() {
                vec![Flag::G2Undefined]
            } else {
                Vec::new()
            },
        }
    }
}

/// Dimensionless rates `γ_a/γ_b`, `ε/γ_b`, `χ/γ_b` plus the phase factor
/// `κ = −i e^{−iφ}` that turns the drift into the standard Langevin form at
/// `φ = −π/2` (where `κ = 1`).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Scaled {
    pub gamma_a: f64,
    pub eps: f64,
    pub chi: f64,
    pub kappa: C64,
    pub eps_c: f64,
}

impl Scaled {
    pub fn new(p: &SystemParams, eps: f64) -> Result<Self> {
        if !(p.gamma_a > 0.0 && p.gamma_b > 0.0) {
            return Err(Error::invalid("decay rates γ_a and γ_b must be positive"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!(
                "drive ε must be finite and nonnegative, got {eps}"
            )));
        }
        let e = effective_params(p)?;
        let unit = p.gamma_b;
        Ok(Self {
            gamma_a: p.gamma_a / unit,
            eps: eps / unit,
            chi: e.chi / unit,
            kappa: C64::new(0.0, -1.0) * C64::from_polar(1.0, -p.phi),
            eps_c: e.epsilon_c,
        })
    }
}

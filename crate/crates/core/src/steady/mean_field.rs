use num_complex::Complex64 as C64;

use super::{Flag, Scaled};
use crate::error::Result;
use crate::model::SystemParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Below,
    AbovePositive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanField {
    pub alpha: C64,
    pub beta: C64,
    pub branch: Branch,
    /// `ε/ε_c`; zero when χ vanishes.
    pub epsilon_over_threshold: f64,
    pub flags: Vec<Flag>,
}

/// Below-threshold amplitude `ε/γ_a`.
pub fn alpha_below(p: &SystemParams, eps: f64) -> f64 {
    eps / p.gamma_a
}

/// Above-threshold (clamped) amplitude `γ_b/χ`.
pub fn alpha_above(p: &SystemParams) -> Result<f64> {
    let s = Scaled::new(p, 0.0)?;
    Ok(1.0 / s.chi)
}

/// Stationary solution of the classical field equations. Above threshold
/// only the branch with `Re β > 0` (for `φ = −π/2`, β real positive) is kept.
pub fn mean_field(p: &SystemParams, eps: f64) -> Result<MeanField> {
    let s = Scaled::new(p, eps)?;
    if s.chi == 0.0 {
        return Ok(MeanField {
            alpha: C64::new(s.eps / s.gamma_a, 0.0),
            beta: C64::new(0.0, 0.0),
            branch: Branch::Below,
            epsilon_over_threshold: 0.0,
            flags: vec![Flag::ChiZero],
        });
    }
    let ratio = eps / s.eps_c;
    if ratio <= 1.0 {
        return Ok(MeanField {
            alpha: C64::new(s.eps / s.gamma_a, 0.0),
            beta: C64::new(0.0, 0.0),
            branch: Branch::Below,
            epsilon_over_threshold: ratio,
            flags: Vec::new(),
        });
    }
    // β = r e^{iψ} with e^{2iψ} = κ keeps α = γ_b/χ real
    let eps_c = s.gamma_a / s.chi;
    let r = (2.0 * (s.eps - eps_c) / s.chi).sqrt();
    Ok(MeanField {
        alpha: C64::new(1.0 / s.chi, 0.0),
        beta: s.kappa.sqrt() * r,
        branch: Branch::AbovePositive,
        epsilon_over_threshold: ratio,
        flags: Vec::new(),
    })
}

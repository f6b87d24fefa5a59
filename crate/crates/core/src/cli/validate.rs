use std::fmt;

use super::config::RunConfig;
use crate::dynamics::{conserved_excitation, norm_drift, run_full_vs_effective, TimeGrid};
use crate::elimination::{build_generator, project_effective};
use crate::error::Result;
use crate::fock::{commutator, HilbertSpec};
use crate::model::{build_h0, build_h_eff, build_hi, effective_params, excitation_operator};
use crate::steady::{in_threshold_window, linearized_variances, mean_field};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            bound,
            passed: value <= bound,
        }
    }

    fn at_least(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            bound,
            passed: value >= bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {}: {:.3e} (bound {:.3e})",
            self.name, self.value, self.bound
        )
    }
}

/// Internal consistency checks for one parameter set. The steady-state
/// checks run only when decay rates are configured.
pub fn validation_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    let p = &cfg.params;
    p.check()?;
    let mut out = Vec::new();

    let mut exact: f64 = 0.0;
    for (a, b) in [(2, 4), (3, 6)] {
        let s = HilbertSpec::new(a, b)?;
        let gen = build_generator(p, &s)?;
        exact = exact.max(gen.exactness_residual(&build_h0(p, &s)?, &build_hi(p, &s)?));
    }
    out.push(Check::at_most("generator-exactness", exact, 1e-12));

    let s = HilbertSpec::new(2, 4)?;
    let (_, report) = project_effective(p, &s)?;
    out.push(Check::at_most(
        "elimination-consistency",
        report.relative_deviation,
        1e-10,
    ));

    let h = &build_h0(p, &s)? + &build_hi(p, &s)?;
    let herm = [h.clone(), build_h_eff(p, &s)?]
        .iter()
        .map(|o| o.hermiticity_error() / o.max_abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    out.push(Check::at_most("hermiticity", herm, 1e-12));
    let k = excitation_operator(&s)?;
    let comm = commutator(&h, &k).max_abs() / h.max_abs().max(f64::MIN_POSITIVE);
    out.push(Check::at_most("excitation-commutator", comm, 1e-12));

    let chi = effective_params(p)?.chi;
    if chi > 0.0 {
        let run = run_full_vs_effective(p, &HilbertSpec::new(1, 2)?, &TimeGrid::two_periods(chi)?)?;
        out.push(Check::at_most(
            "norm-drift",
            norm_drift(&run.full).unwrap_or(f64::INFINITY),
            1e-9,
        ));
        out.push(Check::at_most(
            "excitation-drift",
            conserved_excitation(&run.full).unwrap_or(f64::INFINITY),
            1e-8,
        ));
        out.push(Check::at_least(
            "min-ground-population",
            run.summary.min_p_g,
            0.99,
        ));
        out.push(Check::at_most(
            "full-vs-effective-n_b",
            run.summary.max_dn_b,
            0.1,
        ));
    }

    if cfg.has_decays && chi > 0.0 {
        let eps_c = effective_params(p)?.epsilon_c;
        let mut jump: f64 = 0.0;
        for side in [1.0 - 1e-12, 1.0 + 1e-12] {
            let m = mean_field(p, side * eps_c)?;
            jump = jump.max((m.alpha.re - p.gamma_b / chi).abs() / (p.gamma_b / chi));
        }
        out.push(Check::at_most("mean-field-continuity", jump, 1e-9));
        let mut product: f64 = 0.0;
        let mut bounds = true;
        for i in 0..50 {
            let eps = eps_c * 0.9 * i as f64 / 49.0;
            let v = linearized_variances(p, eps)?;
            let ec = eps * chi / (p.gamma_a * p.gamma_b);
            let exact = 1.0 / (1.0 - ec * ec);
            product = product.max((v.var_x * v.var_y - exact).abs() / exact);
            if eps > 0.0 && !in_threshold_window(eps, eps_c) {
                bounds &= v.var_x > 1.0 && v.var_y < 1.0;
            }
        }
        out.push(Check::at_most("uncertainty-product", product, 1e-12));
        out.push(Check::at_least(
            "squeezing-below-threshold",
            if bounds { 1.0 } else { 0.0 },
            1.0,
        ));
    }
    Ok(out)
}

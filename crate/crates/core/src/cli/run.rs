use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::{DriveList, RunConfig, Scenario};
use super::validate::validation_suite;
use crate::dynamics::{run_full_vs_effective_with, transfer_period, transfer_time, TimeGrid};
use crate::error::Error;
use crate::fock::HilbertSpec;
use crate::model::{effective_params, validate_regime};
use crate::steady::{threshold_scan, ScanOptions, ScanRow, SdeOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const DYNAMICS_HEADER: &str = "t_s,P_g,n_a_full,n_b_full,n_a_eff,n_b_eff,K";
pub const SCAN_HEADER: &str =
    "eps_Hz,eps_over_ec,method,var_x,var_y,n_b,g2,anomalous_re,anomalous_im,stderr,flags";

/// Round-trip exact formatting (17 significant digits).
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::InvalidArgument(_)) {
            EXIT_CONFIG
        } else {
            EXIT_NUMERICAL
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

#[derive(Default)]
struct Output {
    text: String,
    warnings: Vec<String>,
    csv: Option<String>,
    failed: bool,
}

fn params_report(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = &cfg.params;
    let e = effective_params(p)?;
    let mut text = String::new();
    let mut line =
        |k: &str, v: f64| writeln!(text, "{k} = {}", format_number(v)).expect("string write");
    line("chi_Hz", e.chi);
    line("shift_a_Hz", e.shift_a);
    line("shift_b_Hz", e.shift_b);
    line("nu_eff_Hz", e.nu_eff);
    line("phi_eff_rad", e.phi_eff);
    line("matching_residual_Hz", e.matching_residual);
    if cfg.has_decays {
        line("epsilon_c_Hz", e.epsilon_c);
    }
    if e.chi > 0.0 {
        line("transfer_time_s", transfer_time(e.chi));
    }
    let warnings = validate_regime(p, cfg.factor)
        .iter()
        .map(ToString::to_string)
        .collect();
    Ok(Output {
        text,
        warnings,
        ..Output::default()
    })
}

fn spec_from(cfg: &RunConfig, default: (usize, usize)) -> Result<HilbertSpec, Failure> {
    let (a, b) = cfg.cutoffs.unwrap_or(default);
    Ok(HilbertSpec::new(a, b)?)
}

fn dynamics(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = &cfg.params;
    let chi = effective_params(p)?.chi;
    let t_end = match cfg.t_end {
        Some(t) => t,
        None if chi > 0.0 => 2.0 * transfer_period(chi),
        None => return Err(config_failure("chi vanishes; set t_end explicitly")),
    };
    let grid = TimeGrid::new(0.0, t_end, cfg.grid.unwrap_or(2001))?;
    let spec = spec_from(cfg, (1, 2))?;
    let run = run_full_vs_effective_with(p, &spec, &grid, cfg.propagation)?;
    let ch = |s: &crate::dynamics::TimeSeries, name: &str| {
        s.channel(name).expect("recorded channel").to_vec()
    };
    let cols = [
        grid.times(),
        ch(&run.full, "P_g"),
        ch(&run.full, "n_a"),
        ch(&run.full, "n_b"),
        ch(&run.effective, "n_a"),
        ch(&run.effective, "n_b"),
        ch(&run.full, "K"),
    ];
    let mut csv = String::with_capacity(grid.n_samples() * 180);
    csv.push_str(DYNAMICS_HEADER);
    csv.push('\n');
    for i in 0..grid.n_samples() {
        let row: Vec<String> = cols.iter().map(|c| format_number(c[i])).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let s = &run.summary;
    let mut text = String::new();
    writeln!(text, "min_P_g = {}", format_number(s.min_p_g)).expect("string write");
    writeln!(text, "max_dn_a = {}", format_number(s.max_dn_a)).expect("string write");
    writeln!(text, "max_dn_b = {}", format_number(s.max_dn_b)).expect("string write");
    if let Some(t) = s.first_transfer_full {
        writeln!(text, "first_transfer_full_s = {}", format_number(t)).expect("string write");
    }
    let warnings = run.diagnostics.iter().map(ToString::to_string).collect();
    Ok(Output {
        text,
        warnings,
        csv: Some(csv),
        failed: false,
    })
}

fn scan_row(row: &ScanRow) -> String {
    let mut fields = vec![
        format_number(row.eps),
        format_number(row.eps_over_ec),
        row.method.to_string(),
    ];
    match &row.result {
        Ok(r) => {
            fields.extend(
                [
                    r.var_x,
                    r.var_y,
                    r.n_b,
                    r.g2,
                    r.anomalous.re,
                    r.anomalous.im,
                ]
                .map(format_number),
            );
            fields.push(r.statistical_error.map(format_number).unwrap_or_default());
            fields.push(
                r.flags
                    .iter()
                    .map(|f| f.name())
                    .collect::<Vec<_>>()
                    .join(";"),
            );
        }
        Err(e) => {
            fields.extend(std::iter::repeat_n("nan".to_string(), 6));
            fields.push(String::new());
            fields.push(format!("error:{}", e.kind()));
        }
    }
    fields.join(",")
}

fn scan(cfg: &RunConfig) -> Result<Output, Failure> {
    if !cfg.has_decays {
        return Err(config_failure("scan needs gamma_a and gamma_b"));
    }
    let p = &cfg.params;
    let e = effective_params(p)?;
    let eps: Vec<f64> = match &cfg.drives {
        Some(DriveList::RelativeToThreshold(r)) => r.iter().map(|x| x * e.epsilon_c).collect(),
        Some(DriveList::Absolute(v)) => v.clone(),
        None => return Err(config_failure("scan needs eps_over_ec or eps_list")),
    };
    let defaults = ScanOptions::default();
    let opts = ScanOptions {
        lindblad_start: spec_from(
            cfg,
            (
                defaults.lindblad_start.cutoff_a(),
                defaults.lindblad_start.cutoff_b(),
            ),
        )?,
        sde: SdeOptions {
            n_traj: cfg.n_traj.unwrap_or(defaults.sde.n_traj),
            t_max: cfg.t_max,
            dt: cfg.dt,
            seed: cfg.seed,
            ..defaults.sde
        },
        ..defaults
    };
    let rows = threshold_scan(p, &eps, &cfg.methods, &opts)?;
    let mut csv = String::from(SCAN_HEADER);
    csv.push('\n');
    let mut warnings = Vec::new();
    for row in &rows {
        csv.push_str(&scan_row(row));
        csv.push('\n');
        if let Err(err) = &row.result {
            warnings.push(format!(
                "warning: {} at eps = {:e} Hz failed: {err}",
                row.method, row.eps
            ));
        }
    }
    warnings.extend(
        validate_regime(p, cfg.factor)
            .iter()
            .map(ToString::to_string),
    );
    Ok(Output {
        csv: Some(csv),
        warnings,
        ..Output::default()
    })
}

fn validate(cfg: &RunConfig) -> Result<Output, Failure> {
    let checks = validation_suite(cfg)?;
    let mut text = String::new();
    let mut failed = false;
    for c in &checks {
        failed |= !c.passed;
        writeln!(text, "{c}").expect("string write");
    }
    Ok(Output {
        text,
        failed,
        ..Output::default()
    })
}

/// Runs one scenario and returns the process exit code. CSV goes to `out`
/// (or the config's `out`, or stdout); the file is written only after the
/// whole table has been produced.
pub fn run(
    scenario: Scenario,
    cfg: &RunConfig,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    if let Some(s) = cfg.scenario {
        if s != scenario {
            let _ = writeln!(
                stderr,
                "error: config is for scenario '{}', not '{}'",
                s.name(),
                scenario.name()
            );
            return EXIT_CONFIG;
        }
    }
    let result = match scenario {
        Scenario::Params => params_report(cfg),
        Scenario::Dynamics => dynamics(cfg),
        Scenario::Scan => scan(cfg),
        Scenario::Validate => validate(cfg),
    };
    let output = match result {
        Ok(o) => o,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    };
    for w in &output.warnings {
        let _ = writeln!(stderr, "{w}");
    }
    let _ = stdout.write_all(output.text.as_bytes());
    if let Some(csv) = &output.csv {
        match out.or(cfg.out.as_deref()) {
            Some(path) => {
                if let Err(e) = fs::write(path, csv) {
                    let _ = fs::remove_file(path);
                    let _ = writeln!(stderr, "error: writing {}: {e}", path.display());
                    return EXIT_CONFIG;
                }
            }
            None => {
                let _ = stdout.write_all(csv.as_bytes());
            }
        }
    }
    if output.failed {
        EXIT_VALIDATION
    } else {
        EXIT_OK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 2.6446280991735536e4, -1e-300, 1.0 / 3.0] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(f64::NAN), "nan");
        assert_eq!(format_number(1.0), "1.0000000000000000e0");
    }
}

use rayon::prelude::*;

use super::{
    auto_cutoffs, in_threshold_window, linearized_g2, sde_trajectories, Flag, FluctuationReport,
    Method, SdeOptions,
};
use crate::error::{Error, Result};
use crate::fock::HilbertSpec;
use crate::model::{effective_params, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    /// First truncation tried by the Lindblad solver.
    pub lindblad_start: HilbertSpec,
    /// Largest two-mode dimension the Lindblad solver may grow to. The LU
    /// factors grow steeply with it; a dimension of 184 already exhausts 5 GB.
    pub lindblad_max_dim: usize,
    pub sde: SdeOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            lindblad_start: HilbertSpec::new(4, 12).expect("valid cutoffs"),
            lindblad_max_dim: 160,
            sde: SdeOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub eps: f64,
    pub eps_over_ec: f64,
    pub method: Method,
    /// A failed row keeps its error; the scan goes on.
    pub result: std::result::Result<FluctuationReport, Error>,
}

impl ScanRow {
    pub fn flags(&self) -> Vec<Flag> {
        match &self.result {
            Ok(r) => r.flags.clone(),
            Err(_) => Vec::new(),
        }
    }
}

fn evaluate(
    p: &SystemParams,
    eps: f64,
    method: Method,
    opts: &ScanOptions,
) -> Result<FluctuationReport> {
    let mut report = match method {
        Method::Linearized => linearized_g2(p, eps)?,
        Method::Lindblad => {
            auto_cutoffs(
                &p.with_epsilon(eps),
                opts.lindblad_start,
                opts.lindblad_max_dim,
            )?
            .report
        }
        Method::Sde => sde_trajectories(p, eps, &opts.sde)?.report,
    };
    let eps_c = effective_params(p)?.epsilon_c;
    if in_threshold_window(eps, eps_c) && !report.flags.contains(&Flag::NearThreshold) {
        report.flags.push(Flag::NearThreshold);
    }
    Ok(report)
}

/// One row per `(eps, method)`, ordered by drive and then by the order of
/// `methods`.
pub fn threshold_scan(
    p: &SystemParams,
    eps_values: &[f64],
    methods: &[Method],
    opts: &ScanOptions,
) -> Result<Vec<ScanRow>> {
    if eps_values.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::invalid(
            "drive values must be finite and nonnegative",
        ));
    }
    if eps_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("drive values must be sorted"));
    }
    let eps_c = effective_params(p)?.epsilon_c;
    let jobs: Vec<(f64, Method)> = eps_values
        .iter()
        .flat_map(|&e| methods.iter().map(move |&m| (e, m)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(eps, method)| ScanRow {
            eps,
            eps_over_ec: eps / eps_c,
            method,
            result: evaluate(p, eps, method, opts),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_method_set_gives_no_rows() {
        let p = SystemParams::reference();
        assert!(
            threshold_scan(&p, &[0.0, 1.0], &[], &ScanOptions::default())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn rejects_unsorted_drives() {
        let p = SystemParams::reference();
        assert!(threshold_scan(
            &p,
            &[2.0, 1.0],
            &[Method::Linearized],
            &ScanOptions::default()
        )
        .is_err());
        assert!(
            threshold_scan(&p, &[-1.0], &[Method::Linearized], &ScanOptions::default()).is_err()
        );
    }

    #[test]
    fn linearized_scan_shape_and_flags() {
        let p = SystemParams::reference();
        let ec = effective_params(&p).unwrap().epsilon_c;
        let eps: Vec<f64> = (0..=40).map(|i| ec * i as f64 / 20.0).collect();
        let rows =
            threshold_scan(&p, &eps, &[Method::Linearized], &ScanOptions::default()).unwrap();
        assert_eq!(rows.len(), eps.len());
        let mut last_g2 = f64::INFINITY;
        for row in &rows {
            let r = row.result.as_ref().unwrap();
            let near = row.flags().contains(&Flag::NearThreshold);
            assert_eq!(near, (row.eps_over_ec - 1.0).abs() <= 0.02);
            if row.eps > 0.0 && !near {
                assert!(r.var_x > 1.0 && r.var_y < 1.0);
            }
            if row.eps > 0.0 && row.eps_over_ec < 0.98 {
                assert!(r.g2 < last_g2);
                last_g2 = r.g2;
            }
        }
    }

    #[test]
    fn row_errors_do_not_stop_the_scan() {
        let p = SystemParams::reference();
        let opts = ScanOptions {
            sde: SdeOptions {
                n_traj: 5,
                ..SdeOptions::default()
            },
            ..ScanOptions::default()
        };
        let rows =
            threshold_scan(&p, &[0.0, 1e6], &[Method::Sde, Method::Linearized], &opts).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].result.is_err() && rows[1].result.is_ok());
        assert_eq!(rows[0].method, Method::Sde);
    }
}

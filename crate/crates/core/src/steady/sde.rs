//! Truncated-Wigner trajectories of the c-number Langevin equations
//!
//! `dα = (ε − (χ/2)κ*β² − γ_a α) dt + √γ_a dW_a`,
//! `dβ = (χκ αβ* − γ_b β) dt + √γ_b dW_b`,
//!
//! with complex Wiener increments `E|dW|² = dt` and angular-unit rates.
//! Each trajectory draws from its own ChaCha stream `(seed, index)`, and
//! results are reduced in index order, so the output does not depend on the
//! number of worker threads.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::linearized::slowest_relaxation_rate;
use super::{
    in_threshold_window, mean_field, Flag, FluctuationReport, Method, Scaled, THRESHOLD_WINDOW,
};
use crate::error::{Error, Result};
use crate::model::{effective_params, SystemParams};

pub const MIN_TRAJECTORIES: usize = 100;
/// Largest allowed step, as a fraction of `1/(2πγ_a)`.
pub const MAX_DT_FRACTION: f64 = 0.05;
const JACKKNIFE_BLOCKS: usize = 200;
/// Coarse and fine runs must agree within this fraction of a standard error.
const STEP_AGREEMENT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdeOptions {
    pub n_traj: usize,
    /// Integration time (s); `None` picks 20 slowest relaxation times.
    pub t_max: Option<f64>,
    /// Initial step (s); `None` picks the largest allowed step.
    pub dt: Option<f64>,
    pub seed: u64,
    pub max_halvings: u32,
}

impl Default for SdeOptions {
    fn default() -> Self {
        Self {
            n_traj: 10_000,
            t_max: None,
            dt: None,
            seed: 42,
            max_halvings: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdeReport {
    pub report: FluctuationReport,
    pub stderr_var_x: f64,
    pub stderr_var_y: f64,
    pub stderr_n_b: f64,
    pub stderr_g2: f64,
    pub mean_beta: C64,
    /// Standard errors of `Re β̃` and `Im β̃`.
    pub stderr_beta: (f64, f64),
    /// Step actually used (s).
    pub dt: f64,
    pub t_max: f64,
}

/// `20 / (2π λ_min)` with the slowest linear relaxation rate `λ_min`.
/// Inside the threshold window, where `λ_min` vanishes, the rate at the
/// nearer window edge is used instead.
pub fn suggested_t_max(p: &SystemParams, eps: f64) -> Result<f64> {
    let mut rate = slowest_relaxation_rate(p, eps)?;
    let eps_c = effective_params(p)?.epsilon_c;
    if in_threshold_window(eps, eps_c) {
        let edge = if eps < eps_c {
            1.0 - THRESHOLD_WINDOW
        } else {
            1.0 + THRESHOLD_WINDOW
        };
        rate = rate.max(slowest_relaxation_rate(p, edge * eps_c)?);
    }
    if rate <= 0.0 {
        return Err(Error::invalid(
            "no stable linear relaxation at this drive; give t_max explicitly",
        ));
    }
    Ok(20.0 / (2.0 * PI * rate))
}

#[derive(Clone, Copy)]
struct Drift {
    eps: f64,
    half_chi_kc: C64,
    chi_k: C64,
    ga: f64,
    noise_a: f64,
    bound: f64,
}

impl Drift {
    #[inline]
    fn step(&self, a: &mut C64, b: &mut C64, dt: f64, dwa: C64, dwb: C64) {
        let da = C64::new(self.eps, 0.0) - self.half_chi_kc * *b * *b - self.ga * *a;
        let db = self.chi_k * *a * b.conj() - *b;
        *a += da * dt + dwa * self.noise_a;
        *b += db * dt + dwb;
    }
}

/// Unit-variance complex Gaussian, `E|z|² = 1`.
fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Final `β̃` of one trajectory on the fine and the coarse grid, driven by
/// the same Wiener path.
fn trajectory(
    d: &Drift,
    start: (C64, C64),
    n_coarse: usize,
    dt_fine: f64,
    seed: u64,
    index: u64,
) -> Result<(C64, C64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    // vacuum Wigner noise: each quadrature component N(0, 1/4)
    let a0 = start.0 + complex_normal(&mut rng) * std::f64::consts::FRAC_1_SQRT_2;
    let b0 = start.1 + complex_normal(&mut rng) * std::f64::consts::FRAC_1_SQRT_2;
    let (mut af, mut bf, mut ac, mut bc) = (a0, b0, a0, b0);
    let sq = dt_fine.sqrt();
    for _ in 0..n_coarse {
        let mut sum_a = C64::new(0.0, 0.0);
        let mut sum_b = C64::new(0.0, 0.0);
        for _ in 0..2 {
            let dwa = complex_normal(&mut rng) * sq;
            let dwb = complex_normal(&mut rng) * sq;
            d.step(&mut af, &mut bf, dt_fine, dwa, dwb);
            sum_a += dwa;
            sum_b += dwb;
        }
        d.step(&mut ac, &mut bc, 2.0 * dt_fine, sum_a, sum_b);
        let worst = af
            .norm_sqr()
            .max(bf.norm_sqr())
            .max(ac.norm_sqr())
            .max(bc.norm_sqr());
        if worst.is_nan() || worst > d.bound {
            return Err(Error::StepSize(format!(
                "trajectory {index} diverged; reduce dt"
            )));
        }
    }
    Ok((bf, bc))
}

/// Sample moments `[Re β, Im β, Re β², Im β², |β|², |β|⁴]`.
type Raw = [f64; 6];

fn raw(b: C64) -> Raw {
    let n = b.norm_sqr();
    let sq = b * b;
    [b.re, b.im, sq.re, sq.im, n, n * n]
}

#[derive(Clone, Copy, Debug)]
struct Estimate {
    var_x: f64,
    var_y: f64,
    n_b: f64,
    g2: f64,
    anomalous: C64,
    mean: C64,
}

fn estimate(m: &Raw) -> Estimate {
    let [re, im, sq_re, sq_im, n, n2] = *m;
    let n_b = n - 0.5;
    let fourth = n2 - 2.0 * n + 0.5;
    let mean = C64::new(re, im);
    Estimate {
        var_x: 2.0 * (n + sq_re) - 4.0 * re * re,
        var_y: 2.0 * (n - sq_re) - 4.0 * im * im,
        n_b,
        g2: fourth / (n_b * n_b),
        anomalous: C64::new(sq_re, sq_im) - mean * mean,
        mean,
    }
}

struct Stats {
    full: Estimate,
    err: Estimate,
}

/// Delete-one-block jackknife over contiguous blocks in trajectory order.
fn jackknife(samples: &[C64]) -> Stats {
    let n = samples.len();
    let blocks = JACKKNIFE_BLOCKS.min(n);
    let mut sums = vec![[0.0; 6]; blocks];
    let mut counts = vec![0usize; blocks];
    for (i, b) in samples.iter().enumerate() {
        let k = i * blocks / n;
        for (s, r) in sums[k].iter_mut().zip(raw(*b)) {
            *s += r;
        }
        counts[k] += 1;
    }
    let mut total = [0.0; 6];
    for s in &sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let full = estimate(&total.map(|t| t / n as f64));
    let leave_out: Vec<Estimate> = (0..blocks)
        .map(|k| {
            let mut m = [0.0; 6];
            for j in 0..6 {
                m[j] = (total[j] - sums[k][j]) / (n - counts[k]) as f64;
            }
            estimate(&m)
        })
        .collect();
    let spread = |f: &dyn Fn(&Estimate) -> f64| {
        let mean = leave_out.iter().map(f).sum::<f64>() / blocks as f64;
        let ss: f64 = leave_out.iter().map(|e| (f(e) - mean).powi(2)).sum();
        (ss * (blocks - 1) as f64 / blocks as f64).sqrt()
    };
    let err = Estimate {
        var_x: spread(&|e| e.var_x),
        var_y: spread(&|e| e.var_y),
        n_b: spread(&|e| e.n_b),
        g2: spread(&|e| e.g2),
        anomalous: C64::new(spread(&|e| e.anomalous.re), spread(&|e| e.anomalous.im)),
        mean: C64::new(spread(&|e| e.mean.re), spread(&|e| e.mean.im)),
    };
    Stats { full, err }
}

/// Ensemble of trajectories at drive `eps` (Hz). The step is halved until
/// coarse and fine estimates of both variances agree within a quarter of a
/// standard error.
pub fn sde_trajectories(p: &SystemParams, eps: f64, opts: &SdeOptions) -> Result<SdeReport> {
    let s = Scaled::new(p, eps)?;
    if opts.n_traj < MIN_TRAJECTORIES {
        return Err(Error::invalid(format!(
            "need at least {MIN_TRAJECTORIES} trajectories, got {}",
            opts.n_traj
        )));
    }
    let dt_max = MAX_DT_FRACTION / (2.0 * PI * p.gamma_a);
    let dt = opts.dt.unwrap_or(dt_max);
    if !(dt > 0.0 && dt <= dt_max * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "dt = {dt:.3e} s must be positive and at most 0.05/(2πγ_a) = {dt_max:.3e} s"
        )));
    }
    let t_max = match opts.t_max {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::invalid(format!("t_max must be positive, got {t}"))),
        None => suggested_t_max(p, eps)?,
    };
    let mf = mean_field(p, eps)?;
    let scale = mf.alpha.norm() + mf.beta.norm();
    let drift = Drift {
        eps: s.eps,
        half_chi_kc: 0.5 * s.chi * s.kappa.conj(),
        chi_k: s.chi * s.kappa,
        ga: s.gamma_a,
        noise_a: s.gamma_a.sqrt(),
        bound: (10.0 * scale + 100.0).powi(2),
    };
    // dimensionless time τ = 2πγ_b t
    let tau_max = 2.0 * PI * p.gamma_b * t_max;
    let mut dt_coarse = 2.0 * PI * p.gamma_b * dt;
    let mut flags = mf.flags.clone();
    let mut halvings = 0;
    let (stats, dt_used) = loop {
        let n_coarse = (tau_max / dt_coarse).ceil().max(1.0) as usize;
        let dt_fine = tau_max / (2 * n_coarse) as f64;
        let finals: Vec<(C64, C64)> = (0..opts.n_traj as u64)
            .into_par_iter()
            .map(|i| trajectory(&drift, (mf.alpha, mf.beta), n_coarse, dt_fine, opts.seed, i))
            .collect::<Result<_>>()?;
        let fine = jackknife(&finals.iter().map(|f| f.0).collect::<Vec<_>>());
        let coarse = jackknife(&finals.iter().map(|f| f.1).collect::<Vec<_>>());
        let settled = (fine.full.var_x - coarse.full.var_x).abs()
            <= STEP_AGREEMENT * fine.err.var_x
            && (fine.full.var_y - coarse.full.var_y).abs() <= STEP_AGREEMENT * fine.err.var_y;
        if settled || halvings >= opts.max_halvings {
            if !settled {
                flags.push(Flag::StepNotConverged);
            }
            break (fine, dt_fine / (2.0 * PI * p.gamma_b));
        }
        dt_coarse = dt_fine;
        halvings += 1;
    };
    let Stats { full, err } = stats;
    if full.g2.is_nan() || full.n_b <= 0.0 {
        flags.push(Flag::G2Undefined);
    }
    Ok(SdeReport {
        report: FluctuationReport {
            method: Method::Sde,
            var_x: full.var_x,
            var_y: full.var_y,
            n_b: full.n_b,
            g2: full.g2,
            anomalous: full.anomalous,
            statistical_error: Some(err.var_y),
            flags,
        },
        stderr_var_x: err.var_x,
        stderr_var_y: err.var_y,
        stderr_n_b: err.n_b,
        stderr_g2: err.g2,
        mean_beta: full.mean,
        stderr_beta: (err.mean.re, err.mean.im),
        dt: dt_used,
        t_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::effective_params;

    fn opts(n: usize) -> SdeOptions {
        SdeOptions {
            n_traj: n,
            ..SdeOptions::default()
        }
    }

    #[test]
    fn free_vacuum() {
        let mut p = SystemParams::reference();
        p.g_er = C64::new(0.0, 0.0);
        let mut o = opts(4000);
        o.t_max = Some(5.0 / (2.0 * PI * p.gamma_b));
        let r = sde_trajectories(&p, 0.0, &o).unwrap();
        assert!(
            (r.report.var_x - 1.0).abs() <= 3.0 * r.stderr_var_x,
            "{r:?}"
        );
        assert!(
            (r.report.var_y - 1.0).abs() <= 3.0 * r.stderr_var_y,
            "{r:?}"
        );
        assert!(r.report.flags.contains(&Flag::ChiZero));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = SystemParams::reference();
        assert!(matches!(
            sde_trajectories(&p, 0.0, &opts(10)),
            Err(Error::InvalidArgument(_))
        ));
        let o = SdeOptions {
            dt: Some(1.0),
            ..opts(200)
        };
        assert!(matches!(
            sde_trajectories(&p, 0.0, &o),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn stderr_scales_with_ensemble_size() {
        let p = SystemParams::reference();
        let eps = 0.5 * effective_params(&p).unwrap().epsilon_c;
        let fixed = |n| SdeOptions {
            max_halvings: 0,
            ..opts(n)
        };
        let small = sde_trajectories(&p, eps, &fixed(2000)).unwrap();
        let large = sde_trajectories(&p, eps, &fixed(4000)).unwrap();
        let ratio = small.stderr_var_y / large.stderr_var_y;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = SystemParams::reference();
        let eps = 0.5 * effective_params(&p).unwrap().epsilon_c;
        let o = SdeOptions {
            max_halvings: 0,
            ..opts(300)
        };
        let a = sde_trajectories(&p, eps, &o).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| sde_trajectories(&p, eps, &o).unwrap());
        assert_eq!(a, b);
        let c = sde_trajectories(&p, eps, &SdeOptions { seed: 7, ..o }).unwrap();
        assert_ne!(a.report.var_y, c.report.var_y);
    }
}

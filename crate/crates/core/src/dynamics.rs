//! Closed-system Schrödinger evolution.
//!
//! Two propagators are provided. [`evolve`] is a Lanczos–Krylov integrator
//! with a-posteriori step control that works for any Hermitian operator and
//! initial state. [`evolve_in_sector`] diagonalizes the Hamiltonian inside a
//! single eigenspace of a conserved diagonal charge, which is exact and
//! removes the GHz carrier rotation that makes direct integration stiff.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::elimination::sector_indices;
use crate::error::{Error, Result};
use crate::fock::{basis_state, mode_basis_state, HilbertSpec, Level, Operator, StateVector};
use crate::model::{
    build_h0, build_h_eff, build_hi, effective_params, excitation_operator,
    mode_excitation_operator, validate_regime, Diagnostic, FullOps, ModeOps, SystemParams,
    DEFAULT_REGIME_FACTOR,
};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_KRYLOV_DIM: usize = 30;
const MAX_HALVINGS: u32 = 60;
const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::invalid(format!(
                "time grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        if n_samples < 2 {
            return Err(Error::invalid(format!(
                "time grid needs at least 2 samples, got {n_samples}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            n_samples,
        })
    }

    /// 2001 samples over two population-transfer periods `[0, √2/χ]`.
    pub fn two_periods(chi_hz: f64) -> Result<Self> {
        if !(chi_hz > 0.0 && chi_hz.is_finite()) {
            return Err(Error::invalid(format!("χ must be positive, got {chi_hz}")));
        }
        Self::new(0.0, 2.0 * transfer_period(chi_hz), 2001)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.n_samples {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.time(k)).collect()
    }
}

/// Time of the first complete `|1,0⟩ → |0,2⟩` transfer, `π/(√2·2πχ)`.
pub fn transfer_time(chi_hz: f64) -> f64 {
    PI / (2f64.sqrt() * 2.0 * PI * chi_hz)
}

/// Period of the photon-number oscillation, `1/(√2χ)`.
pub fn transfer_period(chi_hz: f64) -> f64 {
    2.0 * transfer_time(chi_hz)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    channels: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            grid,
            channels: Vec::new(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.grid.n_samples {
            return Err(Error::invalid(format!(
                "channel {name} has {} entries for {} samples",
                values.len(),
                self.grid.n_samples
            )));
        }
        match self.channels.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = values,
            None => self.channels.push((name.to_string(), values)),
        }
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }
}

fn check_hermitian(h: &Operator) -> Result<()> {
    let err = h.hermiticity_error();
    if err > 1e-12 * h.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "Hamiltonian is not Hermitian (max |H − H†| = {err:.3e})"
        )));
    }
    Ok(())
}

fn check_initial(h: &Operator, psi0: &StateVector) -> Result<()> {
    if h.space() != psi0.space() {
        return Err(Error::invalid(
            "Hamiltonian and initial state live on different spaces",
        ));
    }
    if (psi0.norm() - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid(format!(
            "initial state is not normalized (norm {})",
            psi0.norm()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Allowed local error per step, relative to the state norm.
    pub tol: f64,
    pub krylov_dim: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            krylov_dim: DEFAULT_KRYLOV_DIM,
        }
    }
}

struct Lanczos {
    basis: Vec<DVector<C64>>,
    /// Eigen-decomposition of the projected tridiagonal matrix.
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    /// `h_{m+1,m}`; zero on an invariant subspace.
    residual: f64,
    norm: f64,
}

impl Lanczos {
    fn new(h: &Operator, v: &DVector<C64>, m: usize) -> Self {
        let norm = v.norm();
        let m = m.min(v.len()).max(1);
        let mut basis = vec![v / C64::new(norm, 0.0)];
        let (mut alpha, mut beta) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let mut residual = 0.0;
        for j in 0..m {
            let mut w = h.apply(&basis[j]);
            let a = basis[j].dotc(&w).re;
            alpha.push(a);
            // two passes of full Gram–Schmidt
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dotc(&w);
                    w.axpy(-c, q, C64::new(1.0, 0.0));
                }
            }
            let b = w.norm();
            let scale = a.abs() + beta.last().copied().unwrap_or(0.0);
            if b <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
                break;
            }
            if j + 1 == m {
                residual = b;
                break;
            }
            beta.push(b);
            basis.push(w / C64::new(b, 0.0));
        }
        let k = alpha.len();
        basis.truncate(k);
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        Self {
            basis,
            eig: SymmetricEigen::new(t),
            residual,
            norm,
        }
    }

    /// `e^{−iτT}e₁` in the Krylov basis.
    fn small_propagator(&self, tau: f64) -> DVector<C64> {
        let u = &self.eig.eigenvectors;
        let k = u.nrows();
        DVector::from_fn(k, |i, _| {
            (0..k)
                .map(|l| C64::from_polar(u[(i, l)] * u[(0, l)], -tau * self.eig.eigenvalues[l]))
                .sum()
        })
    }

    fn error_estimate(&self, c: &DVector<C64>) -> f64 {
        self.norm * self.residual * c[c.len() - 1].norm()
    }

    fn lift(&self, c: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.basis[0].len());
        for (q, ci) in self.basis.iter().zip(c.iter()) {
            out.axpy(*ci * self.norm, q, C64::new(1.0, 0.0));
        }
        out
    }
}

/// One Krylov step of fixed dimension `m` without error control.
pub fn krylov_step(h: &Operator, v: &DVector<C64>, tau: f64, m: usize) -> DVector<C64> {
    let l = Lanczos::new(h, v, m);
    l.lift(&l.small_propagator(tau))
}

fn propagate(
    h: &Operator,
    v: &DVector<C64>,
    span: f64,
    opts: &EvolveOptions,
    tau_hint: &mut f64,
) -> Result<DVector<C64>> {
    let mut v = v.clone();
    let mut done = 0.0;
    while done < span {
        let remaining = span - done;
        let lanczos = Lanczos::new(h, &v, opts.krylov_dim);
        let mut tau = tau_hint.min(remaining);
        let mut halvings = 0;
        let c = loop {
            let c = lanczos.small_propagator(tau);
            if lanczos.error_estimate(&c) <= opts.tol * lanczos.norm {
                break c;
            }
            tau *= 0.5;
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::IntegrationFailure(format!(
                    "local error tolerance {:.1e} not reached with step {tau:.3e} s",
                    opts.tol
                )));
            }
        };
        v = lanczos.lift(&c);
        done = if tau >= remaining { span } else { done + tau };
        // let the next step grow again after an easy acceptance
        *tau_hint = if halvings == 0 {
            (2.0 * tau).max(*tau_hint)
        } else {
            tau
        };
    }
    Ok(v)
}

/// Integrates `i d|ψ⟩/dt = H|ψ⟩` (H in rad/s), returning the state at every
/// grid point. The first entry is `psi0` itself.
pub fn evolve(
    h: &Operator,
    psi0: &StateVector,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Vec<StateVector>> {
    evolve_with(
        h,
        psi0,
        grid,
        &EvolveOptions {
            tol,
            ..EvolveOptions::default()
        },
    )
}

pub fn evolve_with(
    h: &Operator,
    psi0: &StateVector,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Vec<StateVector>> {
    check_hermitian(h)?;
    check_initial(h, psi0)?;
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.krylov_dim == 0 {
        return Err(Error::invalid(
            "tolerance and Krylov dimension must be positive",
        ));
    }
    let space = psi0.space();
    let mut out = Vec::with_capacity(grid.n_samples());
    out.push(psi0.clone());
    let mut v = psi0.amplitudes().clone();
    let mut tau_hint = f64::INFINITY;
    for k in 1..grid.n_samples() {
        v = propagate(h, &v, grid.time(k) - grid.time(k - 1), opts, &mut tau_hint)?;
        out.push(StateVector::new(space, v.clone())?);
    }
    Ok(out)
}

/// Evolves under `H` by integrating `H − D` and restoring `e^{−iDt}`
/// analytically. `D` must be diagonal and commute with `H`.
pub fn evolve_rotated(
    h: &Operator,
    d: &[f64],
    psi0: &StateVector,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Vec<StateVector>> {
    check_hermitian(h)?;
    check_initial(h, psi0)?;
    let space = h.space();
    let d_op = Operator::diagonal_from(space, d)?;
    let scale = h.max_abs().max(d.iter().fold(0.0, |m, x| m.max(x.abs())));
    for (i, j, v) in h.triplets() {
        if i != j && v.norm() > 0.0 && (d[i] - d[j]).abs() > 1e-12 * scale {
            return Err(Error::invalid(
                "frame operator does not commute with the Hamiltonian",
            ));
        }
    }
    let slow = h - &d_op;
    let states = evolve(&slow, psi0, grid, tol)?;
    states
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let t = grid.time(k) - grid.t_start();
            let amps = DVector::from_fn(d.len(), |i, _| {
                s.amplitudes()[i] * C64::from_polar(1.0, -d[i] * t)
            });
            StateVector::new(space, amps)
        })
        .collect()
}

/// Exact evolution inside the eigenspace of a diagonal conserved `charge`
/// that contains `psi0`.
pub fn evolve_in_sector(
    h: &Operator,
    charge: &Operator,
    psi0: &StateVector,
    grid: &TimeGrid,
) -> Result<Vec<StateVector>> {
    check_hermitian(h)?;
    check_initial(h, psi0)?;
    if !charge.is_diagonal() || charge.space() != h.space() {
        return Err(Error::invalid(
            "sector charge must be diagonal on the state space",
        ));
    }
    let k = charge.diagonal();
    let amps = psi0.amplitudes();
    let lead = (0..amps.len())
        .max_by(|&i, &j| amps[i].norm().total_cmp(&amps[j].norm()))
        .unwrap_or(0);
    let value = k[lead].re;
    let idx = sector_indices(charge, value);
    let outside: f64 = (0..amps.len())
        .filter(|i| !idx.contains(i))
        .map(|i| amps[i].norm_sqr())
        .sum();
    if outside > NORM_TOL {
        return Err(Error::invalid(
            "initial state is not inside a single charge sector",
        ));
    }
    let in_sector = |i: usize| (k[i].re - value).abs() < 1e-9;
    let leak = h
        .triplets()
        .into_iter()
        .filter(|&(i, j, _)| in_sector(i) != in_sector(j))
        .fold(0.0f64, |m, (_, _, v)| m.max(v.norm()));
    if leak > 1e-12 * h.max_abs() {
        return Err(Error::invalid(
            "Hamiltonian couples the sector to the rest of the space",
        ));
    }

    let mut block = h.restrict(&idx);
    let n = idx.len();
    let offset = (0..n).map(|i| block[(i, i)].re).sum::<f64>() / n as f64;
    for i in 0..n {
        block[(i, i)] -= offset;
    }
    let eig = SymmetricEigen::new(block);
    let u = &eig.eigenvectors;
    let local = DVector::from_fn(n, |i, _| amps[idx[i]]);
    let coeff = u.adjoint() * local;
    let space = psi0.space();
    (0..grid.n_samples())
        .map(|s| {
            let t = grid.time(s) - grid.t_start();
            let phased = DVector::from_fn(n, |l, _| {
                coeff[l] * C64::from_polar(1.0, -eig.eigenvalues[l] * t)
            });
            let global = C64::from_polar(1.0, -offset * t);
            let local = u * phased;
            let mut full = DVector::zeros(amps.len());
            for (i, &g) in idx.iter().enumerate() {
                full[g] = local[i] * global;
            }
            StateVector::new(space, full)
        })
        .collect()
}

/// Expectation value of a diagonal observable.
fn diagonal_mean(diag: &[f64], psi: &StateVector) -> f64 {
    psi.amplitudes()
        .iter()
        .zip(diag)
        .map(|(a, d)| a.norm_sqr() * d)
        .sum()
}

fn real_diagonal(op: &Operator) -> Vec<f64> {
    op.diagonal().iter().map(|z| z.re).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Propagation {
    /// Exact diagonalization in the conserved-excitation sector.
    #[default]
    Sector,
    /// Krylov integration in the frame rotating with `ω_b·K`.
    Krylov { tol: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationSummary {
    pub max_dn_a: f64,
    pub max_dn_b: f64,
    pub min_p_g: f64,
    /// First maximum of `n_b` in the full model (s).
    pub first_transfer_full: Option<f64>,
    pub first_transfer_effective: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ComparisonRun {
    pub full: TimeSeries,
    pub effective: TimeSeries,
    pub summary: DeviationSummary,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn run_full_vs_effective(
    p: &SystemParams,
    s: &HilbertSpec,
    grid: &TimeGrid,
) -> Result<ComparisonRun> {
    run_full_vs_effective_with(p, s, grid, Propagation::Sector)
}

pub fn run_full_vs_effective_with(
    p: &SystemParams,
    s: &HilbertSpec,
    grid: &TimeGrid,
    method: Propagation,
) -> Result<ComparisonRun> {
    p.check()?;
    let diagnostics = validate_regime(p, DEFAULT_REGIME_FACTOR);
    effective_params(p)?;

    let h_full = &build_h0(p, s)? + &build_hi(p, s)?;
    let k_full = excitation_operator(s)?;
    let psi_full = basis_state(Level::G, 1, 0, s)?;
    let h_eff = build_h_eff(p, s)?;
    let k_eff = mode_excitation_operator(s)?;
    let psi_eff = mode_basis_state(1, 0, s)?;

    let run = |h: &Operator, k: &Operator, psi: &StateVector| match method {
        Propagation::Sector => evolve_in_sector(h, k, psi, grid),
        Propagation::Krylov { tol } => {
            let w = 2.0 * PI * p.nu_b;
            let d: Vec<f64> = real_diagonal(k).iter().map(|x| x * w).collect();
            evolve_rotated(h, &d, psi, grid, tol)
        }
    };
    let full_states = run(&h_full, &k_full, &psi_full)?;
    let eff_states = run(&h_eff, &k_eff, &psi_eff)?;

    let n = grid.n_samples();
    let mut full = TimeSeries::new(*grid);
    let fops = FullOps::new(s)?;
    let na_full = real_diagonal(&fops.n_a);
    let nb_full = real_diagonal(&fops.n_b);
    let kf = real_diagonal(&k_full);
    let ground: Vec<f64> = (0..s.dim())
        .map(|i| {
            if s.decompose(i).0 == Level::G {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let series = |states: &[StateVector], diag: &[f64]| {
        states
            .iter()
            .map(|st| diagonal_mean(diag, st))
            .collect::<Vec<_>>()
    };
    full.insert("P_g", series(&full_states, &ground))?;
    full.insert("n_a", series(&full_states, &na_full))?;
    full.insert("n_b", series(&full_states, &nb_full))?;
    full.insert("norm", full_states.iter().map(StateVector::norm).collect())?;
    full.insert("K", series(&full_states, &kf))?;

    let ops = ModeOps::new(s)?;
    let mut effective = TimeSeries::new(*grid);
    effective.insert("n_a", series(&eff_states, &real_diagonal(&ops.n_a)))?;
    effective.insert("n_b", series(&eff_states, &real_diagonal(&ops.n_b)))?;
    effective.insert("norm", eff_states.iter().map(StateVector::norm).collect())?;
    effective.insert("K", series(&eff_states, &real_diagonal(&k_eff)))?;

    let max_diff = |name: &str| {
        let (x, y) = (
            full.channel(name).unwrap(),
            effective.channel(name).unwrap(),
        );
        (0..n).map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max)
    };
    let summary = DeviationSummary {
        max_dn_a: max_diff("n_a"),
        max_dn_b: max_diff("n_b"),
        min_p_g: full
            .channel("P_g")
            .unwrap()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        first_transfer_full: refined_maxima(full.channel("n_b").unwrap(), grid, 1.0)
            .first()
            .copied(),
        first_transfer_effective: refined_maxima(effective.channel("n_b").unwrap(), grid, 1.0)
            .first()
            .copied(),
    };
    Ok(ComparisonRun {
        full,
        effective,
        summary,
        diagnostics,
    })
}

/// Times of local maxima above `floor`, refined by a parabola through the
/// neighbouring samples.
pub fn refined_maxima(values: &[f64], grid: &TimeGrid, floor: f64) -> Vec<f64> {
    let dt = grid.dt();
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > floor && values[i] >= values[i - 1] && values[i] > values[i + 1])
        .map(|i| {
            let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
            let curv = y0 - 2.0 * y1 + y2;
            let shift = if curv != 0.0 {
                0.5 * (y0 - y2) / curv
            } else {
                0.0
            };
            grid.time(i) + shift * dt
        })
        .collect()
}

/// Mean spacing of successive refined maxima of a channel.
pub fn fit_period(series: &TimeSeries, channel: &str, floor: f64) -> Option<f64> {
    let maxima = refined_maxima(series.channel(channel)?, series.grid(), floor);
    if maxima.len() < 2 {
        return None;
    }
    Some((maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64)
}

/// `max_t |⟨K⟩(t) − ⟨K⟩(0)|`, or `None` without a `K` channel.
pub fn conserved_excitation(series: &TimeSeries) -> Option<f64> {
    let k = series.channel("K")?;
    Some(k.iter().map(|x| (x - k[0]).abs()).fold(0.0, f64::max))
}

/// `max_t |‖ψ(t)‖ − 1|`, or `None` without a `norm` channel.
pub fn norm_drift(series: &TimeSeries) -> Option<f64> {
    Some(
        series
            .channel("norm")?
            .iter()
            .map(|x| (x - 1.0).abs())
            .fold(0.0, f64::max),
    )
}

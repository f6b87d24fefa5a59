//! Full-quantum steady state of the damped, driven two-mode model.
//!
//! The master equation uses jump operators `√(2γ_a) a` and `√(2γ_b) b`. Mode
//! `a` is written as `α₀ + a′` with the mean-field amplitude `α₀`, so the Fock
//! truncation only has to hold the fluctuations `a′`. The Liouvillian is
//! vectorized row-major, `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`, and the null vector is
//! found from a bordered sparse LU solve in which the first equation is
//! replaced by `tr ρ = 1`.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{mean_field, Flag, FluctuationReport, Method, Moments, Scaled};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, HilbertSpec, Operator, Space};
use crate::model::{pdc_drive_hamiltonian, ModeOps, SystemParams};

/// Allowed population in the top two Fock levels of each mode.
pub const EDGE_TOL: f64 = 1e-6;
/// Allowed `‖L[ρ]‖_F / ‖ρ‖_F`.
pub const RESIDUAL_TOL: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 3;

#[derive(Clone, Debug)]
pub struct LindbladSolution {
    /// Steady state in the displaced basis of mode `a`.
    pub rho: DensityMatrix,
    pub report: FluctuationReport,
    pub spec: HilbertSpec,
    /// Displacement `α₀` of mode `a`.
    pub displacement: f64,
    pub residual: f64,
    pub edge_population_a: f64,
    pub edge_population_b: f64,
    /// `⟨b†²b²⟩` from ρ.
    pub fourth_moment: f64,
    /// Gaussian estimate `2⟨b†b⟩² + |⟨b²⟩|²` (zero-mean field).
    pub wick_estimate: f64,
}

type Triplets = Vec<(usize, usize, C64)>;

fn superoperator(h: &Operator, jumps: &[Operator]) -> Triplets {
    let n = h.dim();
    let i = C64::new(0.0, 1.0);
    let mut h_nh = h.clone();
    for l in jumps {
        h_nh = &h_nh - &(&(&l.adjoint() * l) * C64::new(0.0, 0.5));
    }
    let h_trip = h_nh.triplets();
    let mut out = Vec::with_capacity(2 * n * h_trip.len());
    for &(r, k, v) in &h_trip {
        for j in 0..n {
            // −i H_nh ρ
            out.push((r * n + j, k * n + j, -i * v));
            // +i ρ H_nh†: (ρH_nh†)_{j r} gains ρ_{j k} conj(v)
            out.push((j * n + r, j * n + k, i * v.conj()));
        }
    }
    for l in jumps {
        let t = l.triplets();
        for &(r, k, v1) in &t {
            for &(j, m, v2) in &t {
                out.push((r * n + j, k * n + m, v1 * v2.conj()));
            }
        }
    }
    out
}

fn apply(trip: &Triplets, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    for &(r, c, v) in trip {
        y[r] += v * x[c];
    }
    y
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `L[ρ] = 0`, `tr ρ = 1` for a Liouvillian of dimension `n²`.
fn null_state(liouvillian: &Triplets, n: usize) -> Result<(Vec<C64>, f64)> {
    let dim = n * n;
    let mut bordered: Triplets = liouvillian.iter().copied().filter(|t| t.0 != 0).collect();
    bordered.extend((0..n).map(|i| (0, i * n + i, C64::new(1.0, 0.0))));
    bordered.sort_unstable_by_key(|t| (t.1, t.0));
    let mut merged: Vec<Triplet<usize, usize, C64>> = Vec::with_capacity(bordered.len());
    for (r, c, v) in bordered.iter().copied() {
        match merged.last_mut() {
            Some(t) if t.row == r && t.col == c => t.val += v,
            _ => merged.push(Triplet::new(r, c, v)),
        }
    }
    let matrix = SparseColMat::<usize, C64>::try_new_from_triplets(dim, dim, &merged)
        .map_err(|e| Error::NumericalFailure(format!("building the Liouvillian: {e:?}")))?;
    let lu = matrix.sp_lu().map_err(|e| {
        Error::NumericalFailure(format!("sparse LU of the Liouvillian failed: {e:?}"))
    })?;

    let mut rhs = vec![C64::new(0.0, 0.0); dim];
    rhs[0] = C64::new(1.0, 0.0);
    let solve = |b: &[C64]| -> Vec<C64> {
        let b = Mat::from_fn(dim, 1, |i, _| b[i]);
        let x = lu.solve(&b);
        (0..dim).map(|i| x[(i, 0)]).collect()
    };
    let mut x = solve(&rhs);
    let relative = |x: &[C64]| norm(&apply(liouvillian, x)) / norm(x);
    let mut residual = relative(&x);
    for _ in 0..REFINEMENT_STEPS {
        if residual <= RESIDUAL_TOL {
            break;
        }
        let mx = apply(&bordered, &x);
        let r: Vec<C64> = rhs.iter().zip(&mx).map(|(b, m)| b - m).collect();
        let dx = solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        residual = relative(&x);
    }
    if !residual.is_finite() || residual > RESIDUAL_TOL {
        return Err(Error::NumericalFailure(format!(
            "steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}"
        )));
    }
    Ok((x, residual))
}

fn expect(rho: &DMatrix<C64>, op: &Operator) -> C64 {
    op.triplets()
        .into_iter()
        .map(|(j, i, v)| v * rho[(i, j)])
        .sum()
}

/// Steady state at the drive `p.epsilon`, with the truncation adequacy check.
pub fn lindblad_steady_state(p: &SystemParams, s: &HilbertSpec) -> Result<LindbladSolution> {
    let sc = Scaled::new(p, p.epsilon)?;
    let mf = mean_field(p, p.epsilon)?;
    let alpha0 = mf.alpha.re;
    let ops = ModeOps::new(s)?;
    let space = Space::Modes(*s);
    let a_full = &ops.a + &(&Operator::identity(space) * alpha0);
    let h = pdc_drive_hamiltonian(&a_full, &ops.b, sc.eps, sc.chi, p.phi);
    let jumps = [&a_full * (2.0 * sc.gamma_a).sqrt(), &ops.b * 2f64.sqrt()];
    let n = s.mode_dim();
    let (x, residual) = null_state(&superoperator(&h, &jumps), n)?;

    let raw = DMatrix::from_fn(n, n, |i, j| x[i * n + j]);
    let herm = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
    let trace: C64 = herm.diagonal().iter().sum();
    let rho = DensityMatrix::new(space, herm / trace).map_err(|e| {
        Error::NumericalFailure(format!("steady state is not a valid density matrix: {e}"))
    })?;

    let (mut edge_a, mut edge_b) = (0.0, 0.0);
    for i in 0..n {
        let (na, nb) = s.decompose_mode(i);
        let pop = rho.population(i);
        if na + 2 > s.cutoff_a() {
            edge_a += pop;
        }
        if nb + 2 > s.cutoff_b() {
            edge_b += pop;
        }
    }
    if edge_a > EDGE_TOL || edge_b > EDGE_TOL {
        let grow = |c: usize, edge: f64| {
            if edge > EDGE_TOL {
                c + (c / 2).max(2)
            } else {
                c
            }
        };
        return Err(Error::TruncationTooSmall {
            cutoff_a: grow(s.cutoff_a(), edge_a),
            cutoff_b: grow(s.cutoff_b(), edge_b),
            detail: format!(
                "edge populations {edge_a:.2e} (a) and {edge_b:.2e} (b) at cutoffs ({}, {}) exceed {EDGE_TOL:.0e}",
                s.cutoff_a(),
                s.cutoff_b()
            ),
        });
    }

    let m = rho.matrix();
    let b_dag = ops.b.adjoint();
    let moments = Moments {
        mean: expect(m, &ops.b),
        number: expect(m, &ops.n_b).re,
        square: expect(m, &(&ops.b * &ops.b)),
        fourth: expect(m, &(&(&b_dag * &b_dag) * &(&ops.b * &ops.b))).re,
    };
    let mut report = moments.report(Method::Lindblad);
    if mf.flags.contains(&Flag::ChiZero) {
        report.flags.push(Flag::ChiZero);
    }
    Ok(LindbladSolution {
        report,
        spec: *s,
        displacement: alpha0,
        residual,
        edge_population_a: edge_a,
        edge_population_b: edge_b,
        fourth_moment: moments.fourth,
        wick_estimate: 2.0 * moments.number * moments.number + moments.square.norm_sqr(),
        rho,
    })
}

/// Retries [`lindblad_steady_state`] with the suggested cutoffs until the
/// adequacy check passes or the two-mode dimension would exceed `max_dim`.
pub fn auto_cutoffs(
    p: &SystemParams,
    start: HilbertSpec,
    max_dim: usize,
) -> Result<LindbladSolution> {
    let mut spec = start;
    loop {
        match lindblad_steady_state(p, &spec) {
            Err(Error::TruncationTooSmall {
                cutoff_a,
                cutoff_b,
                detail,
            }) => {
                let next = HilbertSpec::new(cutoff_a, cutoff_b)?;
                if next.mode_dim() > max_dim {
                    return Err(Error::TruncationTooSmall {
                        cutoff_a,
                        cutoff_b,
                        detail,
                    });
                }
                spec = next;
            }
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::effective_params;
    use crate::steady::linearized_g2;

    fn scaled(r: f64) -> SystemParams {
        let p = SystemParams::reference()
            .with_decays_relative_to_chi(5.0, 2.0)
            .unwrap();
        let ec = effective_params(&p).unwrap().epsilon_c;
        p.with_epsilon(r * ec)
    }

    #[test]
    fn vacuum_without_drive() {
        let p = scaled(0.0);
        let sol = lindblad_steady_state(&p, &HilbertSpec::new(2, 4).unwrap()).unwrap();
        assert!((sol.report.var_x - 1.0).abs() < 1e-10);
        assert!((sol.report.var_y - 1.0).abs() < 1e-10);
        assert!(sol.report.n_b.abs() < 1e-12);
        assert!(sol.rho.population(0) > 1.0 - 1e-12);
    }

    #[test]
    fn rate_convention_matches_linearized_point() {
        let p = scaled(0.3);
        let sol = auto_cutoffs(&p, HilbertSpec::new(3, 8).unwrap(), 400).unwrap();
        let lin = linearized_g2(&p, p.epsilon).unwrap();
        assert!(
            (sol.report.var_y / lin.var_y - 1.0).abs() < 0.05,
            "{} vs {}",
            sol.report.var_y,
            lin.var_y
        );
        assert!(
            (sol.report.g2 / lin.g2 - 1.0).abs() < 0.10,
            "{} vs {}",
            sol.report.g2,
            lin.g2
        );
        assert!(sol.residual <= RESIDUAL_TOL);
        assert!((sol.rho.trace().re - 1.0).abs() < 1e-9);
        assert!(sol.rho.min_eigenvalue() >= -1e-8);
        assert!((sol.fourth_moment / sol.wick_estimate - 1.0).abs() < 0.1);
    }

    #[test]
    fn small_truncation_is_reported() {
        let p = scaled(0.5);
        match lindblad_steady_state(&p, &HilbertSpec::new(1, 2).unwrap()) {
            Err(Error::TruncationTooSmall {
                cutoff_a, cutoff_b, ..
            }) => {
                assert!(cutoff_a >= 1 && cutoff_b > 2);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }
}

//! Linearized fluctuations around the mean field.
//!
//! [`linearized_variances`] evaluates the closed-form quadrature variances.
//! [`lyapunov_covariance`] solves `AV + VAᵀ + D = 0` for the stationary
//! symmetric-ordered covariance of `(δx_a, δy_a, δx_b, δy_b)`, which feeds the
//! Gaussian closure for `g²(0)` and the cross-check of the closed forms.

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector};
use num_complex::Complex64 as C64;

use super::{in_threshold_window, mean_field, Flag, FluctuationReport, Method, Scaled};
use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Agreement required between closed forms and the Lyapunov solution.
const MISMATCH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variances {
    pub var_x: f64,
    pub var_y: f64,
    pub near_threshold: bool,
}

/// Closed-form `(⟨δx²⟩, ⟨δy²⟩)` below and above threshold.
pub fn linearized_variances(p: &SystemParams, eps: f64) -> Result<Variances> {
    let s = Scaled::new(p, eps)?;
    let (ga, gb) = (s.gamma_a, 1.0);
    let ec = s.eps * s.chi;
    let g = ga * gb;
    let (var_x, var_y) = if ec <= g {
        (g / (g - ec), g / (g + ec))
    } else {
        (
            1.0 + gb / ga - g / (2.0 * (g - ec)),
            1.0 - ga * ga * gb / ((ga + 2.0 * gb) * ec),
        )
    };
    Ok(Variances {
        var_x,
        var_y,
        near_threshold: in_threshold_window(eps, s.eps_c),
    })
}

/// Block acting on `(x, y)` of a field for the term `c·w + d·w*`.
fn block(c: C64, d: C64) -> Matrix2<f64> {
    Matrix2::new(c.re + d.re, -c.im + d.im, c.im + d.im, c.re - d.re)
}

fn put(m: &mut Matrix4<f64>, row: usize, col: usize, b: Matrix2<f64>) {
    m.fixed_view_mut::<2, 2>(2 * row, 2 * col).copy_from(&b);
}

/// Drift matrix of the linearized equations, in units of `γ_b`.
pub fn drift_matrix(p: &SystemParams, eps: f64) -> Result<Matrix4<f64>> {
    let s = Scaled::new(p, eps)?;
    let mf = mean_field(p, eps)?;
    let zero = C64::new(0.0, 0.0);
    let mut a = Matrix4::zeros();
    put(&mut a, 0, 0, block(C64::new(-s.gamma_a, 0.0), zero));
    put(&mut a, 0, 1, block(-s.chi * s.kappa.conj() * mf.beta, zero));
    put(&mut a, 1, 0, block(s.chi * s.kappa * mf.beta.conj(), zero));
    put(
        &mut a,
        1,
        1,
        block(C64::new(-1.0, 0.0), s.chi * s.kappa * mf.alpha),
    );
    Ok(a)
}

/// Slowest decay rate of the linearized dynamics (Hz); zero or negative
/// when the point is not stable.
pub fn slowest_relaxation_rate(p: &SystemParams, eps: f64) -> Result<f64> {
    let a = drift_matrix(p, eps)?;
    let worst = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(-worst * p.gamma_b)
}

/// Stationary covariance of `(δx_a, δy_a, δx_b, δy_b)`.
pub fn lyapunov_covariance(p: &SystemParams, eps: f64) -> Result<Matrix4<f64>> {
    let s = Scaled::new(p, eps)?;
    let a = drift_matrix(p, eps)?;
    if slowest_relaxation_rate(p, eps)? <= 0.0 {
        return Err(Error::NumericalFailure(
            "linearized dynamics is not stable at this drive".into(),
        ));
    }
    let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        2.0 * s.gamma_a,
        2.0 * s.gamma_a,
        2.0,
        2.0,
    ));
    // (I ⊗ A + A ⊗ I) vec(V) = −vec(D), column-major vec
    let mut k = SMatrix::<f64, 16, 16>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            for l in 0..4 {
                k[(4 * j + i, 4 * j + l)] += a[(i, l)];
                k[(4 * j + i, 4 * l + i)] += a[(j, l)];
            }
        }
    }
    let rhs = -SVector::<f64, 16>::from_column_slice(d.as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Lyapunov system".into()))?;
    let v = Matrix4::from_column_slice(sol.as_slice());
    Ok((v + v.transpose()) * 0.5)
}

/// Linearized report: closed-form variances, while `n_b`, `⟨δb²⟩` and
/// `g²(0)` come from the stationary covariance with Gaussian (Wick)
/// factorization of `⟨b†²b²⟩` around the mean field.
pub fn linearized_g2(p: &SystemParams, eps: f64) -> Result<FluctuationReport> {
    let vars = linearized_variances(p, eps)?;
    let mf = mean_field(p, eps)?;
    let mut flags = mf.flags.clone();
    if vars.near_threshold {
        flags.push(Flag::NearThreshold);
    }
    let cov = match lyapunov_covariance(p, eps) {
        Ok(v) => v,
        Err(_) if vars.near_threshold => {
            return Ok(FluctuationReport {
                method: Method::Linearized,
                var_x: vars.var_x,
                var_y: vars.var_y,
                n_b: f64::NAN,
                g2: f64::NAN,
                anomalous: C64::new(f64::NAN, f64::NAN),
                statistical_error: None,
                flags,
            });
        }
        Err(e) => return Err(e),
    };
    let (vxx, vyy, vxy) = (cov[(2, 2)], cov[(3, 3)], cov[(2, 3)]);
    let scale = vars.var_x.abs().max(vars.var_y.abs()).max(1.0);
    if (vxx - vars.var_x).abs() > MISMATCH_TOL * scale
        || (vyy - vars.var_y).abs() > MISMATCH_TOL * scale
    {
        flags.push(Flag::FormulaMismatch);
    }
    let n = (vxx + vyy - 2.0) / 4.0;
    let m = C64::new(vxx - vyy, 2.0 * vxy) / 4.0;
    let b = mf.beta;
    let b2 = b.norm_sqr();
    let total = b2 + n;
    let fourth =
        b2 * b2 + 4.0 * b2 * n + 2.0 * (b.conj() * b.conj() * m).re + 2.0 * n * n + m.norm_sqr();
    let g2 = if total > 0.0 {
        fourth / (total * total)
    } else {
        f64::NAN
    };
    if g2.is_nan() {
        flags.push(Flag::G2Undefined);
    }
    Ok(FluctuationReport {
        method: Method::Linearized,
        var_x: vars.var_x,
        var_y: vars.var_y,
        n_b: total,
        g2,
        anomalous: m,
        statistical_error: None,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::effective_params;
    use proptest::prelude::*;

    fn params() -> SystemParams {
        SystemParams::reference()
    }

    fn eps_c(p: &SystemParams) -> f64 {
        effective_params(p).unwrap().epsilon_c
    }

    #[test]
    fn vacuum_and_half_threshold() {
        let p = params();
        let v = linearized_variances(&p, 0.0).unwrap();
        assert_eq!((v.var_x, v.var_y), (1.0, 1.0));
        let v = linearized_variances(&p, 0.5 * eps_c(&p)).unwrap();
        assert!((v.var_x - 2.0).abs() < 1e-12 && (v.var_y - 2.0 / 3.0).abs() < 1e-12);
        assert!(!v.near_threshold);
    }

    #[test]
    fn squeezing_limit_at_threshold() {
        let p = params();
        assert_eq!(p.gamma_a, 2.0 * p.gamma_b);
        let ec = eps_c(&p);
        let below = linearized_variances(&p, ec * (1.0 - 1e-12)).unwrap();
        let above = linearized_variances(&p, ec * (1.0 + 1e-12)).unwrap();
        assert!((below.var_y - 0.5).abs() < 1e-9);
        assert!((above.var_y - 0.5).abs() < 1e-9);
        assert!(below.near_threshold && above.near_threshold);
    }

    #[test]
    fn lyapunov_matches_closed_forms_below_threshold() {
        let p = params();
        for r in [0.0, 0.1, 0.5, 0.9] {
            let v = linearized_variances(&p, r * eps_c(&p)).unwrap();
            let cov = lyapunov_covariance(&p, r * eps_c(&p)).unwrap();
            assert!((cov[(2, 2)] - v.var_x).abs() < 1e-10 * v.var_x);
            assert!((cov[(3, 3)] - v.var_y).abs() < 1e-10);
            assert!((cov[(0, 0)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov_above_threshold() {
        // x matches the closed form; y follows
        // (γ_a+γ_b)/(γ_a+2γ_b) − γ_a²γ_b/(2εχ(γ_a+2γ_b)), not the closed form
        let mut p = params();
        p.gamma_a = 3.0 * p.gamma_b;
        let ec = eps_c(&p);
        let chi = effective_params(&p).unwrap().chi;
        for r in [1.2, 2.0, 4.0] {
            let eps = r * ec;
            let v = linearized_variances(&p, eps).unwrap();
            let cov = lyapunov_covariance(&p, eps).unwrap();
            assert!((cov[(2, 2)] - v.var_x).abs() < 1e-9 * v.var_x);
            let (ga, gb) = (p.gamma_a, p.gamma_b);
            let y =
                (ga + gb) / (ga + 2.0 * gb) - ga * ga * gb / (2.0 * eps * chi * (ga + 2.0 * gb));
            assert!(
                (cov[(3, 3)] - y).abs() < 1e-9,
                "r={r}: {} vs {y}",
                cov[(3, 3)]
            );
            let report = linearized_g2(&p, eps).unwrap();
            assert!(report.flags.contains(&Flag::FormulaMismatch));
        }
    }

    #[test]
    fn g2_closure_below_threshold() {
        let p = params();
        let ec = eps_c(&p);
        let r = linearized_g2(&p, 0.1 * ec).unwrap();
        assert!((r.g2 - 102.0).abs() < 1e-6, "{}", r.g2);
        assert!(r.flags.is_empty());
        let near = linearized_g2(&p, ec * (1.0 - 1e-7)).unwrap();
        assert!((near.g2 - 3.0).abs() < 1e-3);
        assert!(near.flags.contains(&Flag::NearThreshold));
        let zero = linearized_g2(&p, 0.0).unwrap();
        assert!(zero.g2.is_nan() && zero.flags.contains(&Flag::G2Undefined));
        let at = linearized_g2(&p, ec).unwrap();
        assert!(at.flags.contains(&Flag::NearThreshold));
    }

    #[test]
    fn g2_closure_far_above_threshold() {
        let p = params();
        let r = linearized_g2(&p, 5.0 * eps_c(&p)).unwrap();
        assert!((r.g2 - 1.0).abs() < 0.1);
    }

    #[test]
    fn threshold_scan_shape() {
        let p = params();
        let ec = eps_c(&p);
        let mut last_x = 1.0;
        let mut last_g2 = f64::INFINITY;
        for i in 1..=49 {
            let eps = ec * i as f64 / 50.0;
            let v = linearized_variances(&p, eps).unwrap();
            let g2 = linearized_g2(&p, eps).unwrap().g2;
            assert!(v.var_x > 1.0 && v.var_y < 1.0);
            assert!(v.var_x > last_x && g2 < last_g2);
            last_x = v.var_x;
            last_g2 = g2;
        }
        for i in 52..=100 {
            let v = linearized_variances(&p, ec * i as f64 / 50.0).unwrap();
            assert!(v.var_x > 1.0 && v.var_y < 1.0);
        }
    }

    proptest! {
        #[test]
        fn uncertainty_product_below_threshold(r in 0.0f64..0.98, ratio in 0.2f64..5.0) {
            let mut p = params();
            p.gamma_a = ratio * p.gamma_b;
            let v = linearized_variances(&p, r * eps_c(&p)).unwrap();
            prop_assert!((v.var_x * v.var_y * (1.0 - r * r) - 1.0).abs() <= 1e-12);
        }
    }
}

//! Numeric Fröhlich–Nakajima (Schrieffer–Wolff) elimination of the qubit.
//!
//! The generator `S` is chosen so that `[H₀, S] = −H_I` holds exactly, which
//! turns `e^{−S} H e^{S}` into `H₀ + ½[H_I,S] + ⅓[[H_I,S],S] + O(g⁴)`. The
//! series is evaluated with explicit matrix commutators on the truncated
//! space and then projected on the qubit ground state. Everything the
//! projection discards is measured and reported.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{commutator, HilbertSpec, Level, Operator, Space};
use crate::model::{
    angular, build_h0, build_hi, effective_params, excitation_operator, mode_excitation_operator,
    FullOps, ModeOps, SystemParams,
};

/// Anti-Hermitian generator of the elimination transform.
#[derive(Clone, Debug)]
pub struct GeneratorS {
    pub operator: Operator,
    /// Dimensionless coefficients of `a†|g⟩⟨e|`, `b†|r⟩⟨e|` and `b†|g⟩⟨r|`:
    /// `g_d*/Δ`, `g_er*/(Δ−Δ_r)`, `g_gr*/Δ_r`.
    pub coefficients: [C64; 3],
}

impl GeneratorS {
    /// Largest entry of `S + S†`.
    pub fn anti_hermiticity_error(&self) -> f64 {
        (&self.operator + &self.operator.adjoint()).max_abs()
    }

    /// `‖[H₀,S] + H_I‖_F / ‖H_I‖_F`, or the bare norm when `H_I` vanishes.
    pub fn exactness_residual(&self, h0: &Operator, hi: &Operator) -> f64 {
        let r = (&commutator(h0, &self.operator) + hi).frobenius_norm();
        let n = hi.frobenius_norm();
        if n > 0.0 {
            r / n
        } else {
            r
        }
    }
}

pub fn build_generator(p: &SystemParams, s: &HilbertSpec) -> Result<GeneratorS> {
    let denominators = [
        ("Δ", p.delta),
        ("Δ_r", p.delta_r),
        ("Δ−Δ_r", p.delta - p.delta_r),
    ];
    for (name, d) in denominators {
        if d == 0.0 || !d.is_finite() {
            return Err(Error::invalid(format!(
                "degenerate denominator {name} = {d} in the generator"
            )));
        }
    }
    let coefficients = [
        p.g_d.conj() / p.delta,
        p.g_er.conj() / (p.delta - p.delta_r),
        p.g_gr.conj() / p.delta_r,
    ];
    let ops = FullOps::new(s)?;
    let a_dag = ops.a.adjoint();
    let b_dag = ops.b.adjoint();
    let terms = [
        &a_dag * ops.proj(Level::G, Level::E),
        &b_dag * ops.proj(Level::R, Level::E),
        &b_dag * ops.proj(Level::G, Level::R),
    ];
    let mut x = Operator::zeros(Space::Full(*s));
    for (t, c) in terms.iter().zip(coefficients) {
        x = &x + &(t * c);
    }
    let operator = &x - &x.adjoint();
    Ok(GeneratorS {
        operator,
        coefficients,
    })
}

/// A piece of the transformed Hamiltonian that the ground-state projection
/// drops, with its Frobenius norm in Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct DroppedTerm {
    pub pattern: String,
    pub magnitude_hz: f64,
}

#[derive(Clone, Debug)]
pub struct EliminationReport {
    /// Coefficient of `a†b²` in the projected series (Hz).
    pub extracted_chi_half: C64,
    pub extracted_shift_a: f64,
    pub extracted_shift_b: f64,
    /// `g_d* g_er g_gr / (ΔΔ_r)` (Hz).
    pub closed_form_chi_half: C64,
    pub relative_deviation: f64,
    pub dropped_terms: Vec<DroppedTerm>,
}

/// Block `⟨i|M|j⟩` of a full-space operator, as a two-mode operator.
fn qubit_block(m: &Operator, i: Level, j: Level, s: &HilbertSpec) -> Operator {
    let md = s.mode_dim();
    let (ri, cj) = (i.index() * md, j.index() * md);
    let trip = m
        .triplets()
        .into_iter()
        .filter(|&(r, c, _)| r / md == i.index() && c / md == j.index())
        .map(|(r, c, v)| (r - ri, c - cj, v));
    Operator::from_triplets(Space::Modes(*s), trip).expect("block indices in range")
}

struct Series {
    h0: Operator,
    second: Operator,
    third: Operator,
}

fn series(p: &SystemParams, s: &HilbertSpec) -> Result<Series> {
    let h0 = build_h0(p, s)?;
    let hi = build_hi(p, s)?;
    let gen = build_generator(p, s)?;
    let c = commutator(&hi, &gen.operator);
    let third = &commutator(&c, &gen.operator) * (1.0 / 3.0);
    let second = &c * 0.5;
    Ok(Series { h0, second, third })
}

/// Evaluates the third-order series, projects it on `|g⟩` and compares the
/// extracted coefficients with the closed forms.
pub fn project_effective(
    p: &SystemParams,
    s: &HilbertSpec,
) -> Result<(Operator, EliminationReport)> {
    if s.cutoff_a() < 1 || s.cutoff_b() < 2 {
        return Err(Error::invalid("cutoffs must contain |1,0⟩ and |0,2⟩"));
    }
    let eff = effective_params(p)?;
    let Series { h0, second, third } = series(p, s)?;
    let g2 = qubit_block(&second, Level::G, Level::G, s);
    let g3 = qubit_block(&third, Level::G, Level::G, s);
    let projected = &(&qubit_block(&h0, Level::G, Level::G, s) + &g2) + &g3;

    let to_hz = 1.0 / (2.0 * PI);
    let (i00, i10, i01, i02) = (
        s.mode_index(0, 0),
        s.mode_index(1, 0),
        s.mode_index(0, 1),
        s.mode_index(0, 2),
    );
    let extracted_chi_half = g3.get(i10, i02) / 2f64.sqrt() * to_hz;
    let extracted_shift_a = -(g2.get(i10, i10) - g2.get(i00, i00)).re * to_hz;
    let extracted_shift_b = -(g2.get(i01, i01) - g2.get(i00, i00)).re * to_hz;
    let closed_form_chi_half = eff.pdc_coefficient();
    let relative_deviation = if closed_form_chi_half.norm() > 0.0 {
        (extracted_chi_half - closed_form_chi_half).norm() / closed_form_chi_half.norm()
    } else {
        extracted_chi_half.norm()
    };

    // second- and third-order ground block minus the fitted a†a, b†b, a†b², ab†², 1 model
    let ops = ModeOps::new(s)?;
    let pdc = &(&ops.a.adjoint() * &(&ops.b * &ops.b)) * (extracted_chi_half * 2.0 * PI);
    let fitted = &(&(&(&ops.n_a * angular(-extracted_shift_a))
        + &(&ops.n_b * angular(-extracted_shift_b)))
        + &(&pdc + &pdc.adjoint()))
        + &(&Operator::identity(Space::Modes(*s)) * g2.get(i00, i00));
    let ground_residual = &(&g2 + &g3) - &fitted;

    let correction = &second + &third;
    let mut dropped_terms = vec![DroppedTerm {
        pattern: "|g><g| other than a†a, b†b, a†b², ab†², 1".into(),
        magnitude_hz: ground_residual.frobenius_norm() * to_hz,
    }];
    for (i, j, label) in [
        (Level::E, Level::G, "|e><g| + h.c. (off-resonant)"),
        (Level::R, Level::G, "|r><g| + h.c. (off-resonant)"),
        (Level::E, Level::R, "|e><r| + h.c. (off-resonant)"),
        (Level::E, Level::E, "|e><e| virtual-photon shift"),
        (Level::R, Level::R, "|r><r| virtual-photon shift"),
    ] {
        dropped_terms.push(DroppedTerm {
            pattern: label.into(),
            magnitude_hz: qubit_block(&correction, i, j, s).frobenius_norm() * to_hz,
        });
    }

    Ok((
        projected,
        EliminationReport {
            extracted_chi_half,
            extracted_shift_a,
            extracted_shift_b,
            closed_form_chi_half,
            relative_deviation,
            dropped_terms,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralGap {
    pub exact_hz: f64,
    pub effective_hz: f64,
    pub gap_hz: f64,
}

/// Indices of the basis states whose (diagonal) charge equals `value`.
pub(crate) fn sector_indices(charge: &Operator, value: f64) -> Vec<usize> {
    charge
        .diagonal()
        .iter()
        .enumerate()
        .filter(|(_, k)| (k.re - value).abs() < 1e-9)
        .map(|(i, _)| i)
        .collect()
}

fn shifted_eigen(block: DMatrix<C64>, shift: f64) -> nalgebra::SymmetricEigen<C64, nalgebra::Dyn> {
    let n = block.nrows();
    let m = block - DMatrix::from_diagonal_element(n, n, C64::new(shift, 0.0));
    nalgebra::SymmetricEigen::new(m)
}

/// Compares the ground-dominated eigenvalues of `H₀ + H_I` in the
/// two-excitation sector with those of the projected effective operator.
pub fn spectral_check(p: &SystemParams, s: &HilbertSpec, k: usize) -> Result<Vec<SpectralGap>> {
    const SECTOR: f64 = 2.0;
    let h = &build_h0(p, s)? + &build_hi(p, s)?;
    let full_idx = sector_indices(&excitation_operator(s)?, SECTOR);
    let (effective, _) = project_effective(p, s)?;
    let mode_idx = sector_indices(&mode_excitation_operator(s)?, SECTOR);
    if k > mode_idx.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} ground-state levels of the two-excitation sector",
            mode_idx.len()
        )));
    }
    // remove ω_b·K, constant on the sector
    let shift = angular(p.nu_b) * SECTOR;

    let full = shifted_eigen(h.restrict(&full_idx), shift);
    let ground: Vec<bool> = full_idx
        .iter()
        .map(|&i| s.decompose(i).0 == Level::G)
        .collect();
    let mut weighted: Vec<(f64, f64)> = (0..full_idx.len())
        .map(|c| {
            let w = full
                .eigenvectors
                .column(c)
                .iter()
                .zip(&ground)
                .filter(|(_, g)| **g)
                .map(|(z, _)| z.norm_sqr())
                .sum();
            (w, full.eigenvalues[c])
        })
        .collect();
    weighted.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut exact: Vec<f64> = weighted.iter().take(mode_idx.len()).map(|x| x.1).collect();
    exact.sort_by(f64::total_cmp);

    let eff = shifted_eigen(effective.restrict(&mode_idx), shift);
    let mut approx: Vec<f64> = eff.eigenvalues.iter().copied().collect();
    approx.sort_by(f64::total_cmp);

    let to_hz = 1.0 / (2.0 * PI);
    Ok(exact
        .iter()
        .zip(&approx)
        .take(k)
        .map(|(&x, &y)| SpectralGap {
            exact_hz: (x + shift) * to_hz,
            effective_hz: (y + shift) * to_hz,
            gap_hz: (x - y) * to_hz,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn generator_is_exact_and_anti_hermitian() {
        let p = SystemParams::reference();
        for (ca, cb) in [(2, 4), (3, 6)] {
            let s = HilbertSpec::new(ca, cb).unwrap();
            let gen = build_generator(&p, &s).unwrap();
            let h0 = build_h0(&p, &s).unwrap();
            let hi = build_hi(&p, &s).unwrap();
            assert!(gen.exactness_residual(&h0, &hi) <= 1e-12);
            assert!(gen.anti_hermiticity_error() <= 1e-12);
        }
    }

    #[test]
    fn generator_exact_for_complex_couplings() {
        let mut p = SystemParams::reference();
        p.g_d = C64::from_polar(20e6, 1.1);
        p.g_gr = C64::from_polar(10e6, -0.4);
        p.g_er = C64::from_polar(10e6, 2.5);
        let s = HilbertSpec::new(2, 4).unwrap();
        let gen = build_generator(&p, &s).unwrap();
        let h0 = build_h0(&p, &s).unwrap();
        let hi = build_hi(&p, &s).unwrap();
        assert!(gen.exactness_residual(&h0, &hi) <= 1e-12);
    }

    #[test]
    fn zero_couplings_give_zero_generator() {
        let mut p = SystemParams::reference();
        p.g_d = C64::new(0.0, 0.0);
        p.g_gr = C64::new(0.0, 0.0);
        p.g_er = C64::new(0.0, 0.0);
        let gen = build_generator(&p, &HilbertSpec::new(1, 2).unwrap()).unwrap();
        assert_eq!(gen.operator.max_abs(), 0.0);
    }

    #[test]
    fn degenerate_denominator_is_named() {
        let mut p = SystemParams::reference();
        p.delta_r = p.delta;
        let err = build_generator(&p, &HilbertSpec::new(1, 2).unwrap()).unwrap_err();
        assert!(
            matches!(&err, Error::InvalidArgument(m) if m.contains("Δ−Δ_r")),
            "{err}"
        );
    }

    #[test]
    fn projection_reproduces_closed_forms() {
        let p = SystemParams::reference();
        let eff = effective_params(&p).unwrap();
        let s = HilbertSpec::new(2, 4).unwrap();
        let (op, rep) = project_effective(&p, &s).unwrap();
        assert!(rel(rep.extracted_shift_a, eff.shift_a) < 1e-10);
        assert!(rel(rep.extracted_shift_b, eff.shift_b) < 1e-10);
        assert!(rel(rep.extracted_chi_half.norm(), eff.chi / 2.0) < 1e-10);
        assert!(rep.relative_deviation < 1e-10);
        assert!((rep.extracted_chi_half.norm() - 13.2e3).abs() < 50.0);
        assert!(op.hermiticity_error() <= 1e-12 * op.max_abs());
        // ground block holds nothing beyond the effective model
        assert!(rep.dropped_terms[0].magnitude_hz < 1e-6);
        assert!(rep.dropped_terms[1..].iter().all(|t| t.magnitude_hz > 0.0));
    }

    #[test]
    fn projection_without_g_er_has_no_pdc_term() {
        let mut p = SystemParams::reference();
        p.g_er = C64::new(0.0, 0.0);
        let eff = effective_params(&p).unwrap();
        let (_, rep) = project_effective(&p, &HilbertSpec::new(1, 2).unwrap()).unwrap();
        assert_eq!(rep.extracted_chi_half.norm(), 0.0);
        assert!(rel(rep.extracted_shift_a, eff.shift_a) < 1e-10);
        assert!(rel(rep.extracted_shift_b, eff.shift_b) < 1e-10);
    }

    #[test]
    fn extracted_coefficients_are_cutoff_independent() {
        let p = SystemParams::reference();
        let (_, small) = project_effective(&p, &HilbertSpec::new(1, 2).unwrap()).unwrap();
        let (_, large) = project_effective(&p, &HilbertSpec::new(3, 6).unwrap()).unwrap();
        assert!(
            (small.extracted_chi_half - large.extracted_chi_half).norm()
                <= 1e-12 * small.extracted_chi_half.norm()
        );
        assert!(rel(small.extracted_shift_a, large.extracted_shift_a) <= 1e-12);
        assert!(rel(small.extracted_shift_b, large.extracted_shift_b) <= 1e-12);
    }

    #[test]
    fn extracted_coefficient_scaling() {
        let base = SystemParams::reference();
        let s = HilbertSpec::new(1, 2).unwrap();
        let chi_half = |p: &SystemParams| {
            project_effective(p, &s)
                .unwrap()
                .1
                .extracted_chi_half
                .norm()
        };
        let c0 = chi_half(&base);
        for factor in [2.0, 0.5] {
            let cases: [(SystemParams, f64); 5] = [
                (
                    SystemParams {
                        g_d: base.g_d * factor,
                        ..base
                    },
                    factor,
                ),
                (
                    SystemParams {
                        g_gr: base.g_gr * factor,
                        ..base
                    },
                    factor,
                ),
                (
                    SystemParams {
                        g_er: base.g_er * factor,
                        ..base
                    },
                    factor,
                ),
                (
                    SystemParams {
                        delta: base.delta * factor,
                        ..base
                    },
                    1.0 / factor,
                ),
                (
                    SystemParams {
                        delta_r: base.delta_r * factor,
                        ..base
                    },
                    1.0 / factor,
                ),
            ];
            for (p, expect) in cases {
                if p.delta == p.delta_r {
                    // Δ = Δ_r makes the generator singular even though χ stays finite
                    assert!(project_effective(&p, &s).is_err());
                    continue;
                }
                assert!(rel(chi_half(&p), c0 * expect) < 1e-10);
            }
        }
    }

    #[test]
    fn spectral_gaps_are_fourth_order() {
        let p = SystemParams::reference();
        let s = HilbertSpec::new(2, 4).unwrap();
        let eff = effective_params(&p).unwrap();
        let gaps = spectral_check(&p, &s, 2).unwrap();
        assert_eq!(gaps.len(), 2);
        let scale = eff.chi * p.g_d.norm() / p.delta_r.abs();
        for g in &gaps {
            assert!(g.gap_hz.abs() <= 5.0 * scale, "{g:?} vs {scale}");
        }
        // doubled detunings: χ drops by 4, fourth-order gaps by ~8
        let wide = SystemParams {
            delta: 2.0 * p.delta,
            delta_r: 2.0 * p.delta_r,
            ..p
        };
        let wide_gaps = spectral_check(&wide, &s, 2).unwrap();
        assert!(rel(effective_params(&wide).unwrap().chi, eff.chi / 4.0) < 1e-12);
        for (g, w) in gaps.iter().zip(&wide_gaps) {
            assert!(w.gap_hz.abs() < g.gap_hz.abs() / 4.0, "{g:?} {w:?}");
        }
        assert!(spectral_check(&p, &s, 3).is_err());
    }

    #[test]
    fn spectral_gaps_without_pdc_are_pure_shifts() {
        // with g_er = 0 each ground level mixes with a single excited level,
        // so the exact energies are closed-form two-level roots
        let mut p = SystemParams::reference();
        p.g_er = C64::new(0.0, 0.0);
        let s = HilbertSpec::new(1, 2).unwrap();
        let eff = effective_params(&p).unwrap();
        let gaps = spectral_check(&p, &s, 2).unwrap();
        let lower = |d: f64, g2: f64| d / 2.0 - (d * d / 4.0 + g2).sqrt();
        let mut exact = [
            lower(p.delta, p.g_d.norm_sqr()),
            lower(p.delta_r, 2.0 * p.g_gr.norm_sqr()),
        ];
        exact.sort_by(f64::total_cmp);
        let mut approx = [-eff.shift_a, -2.0 * eff.shift_b];
        approx.sort_by(f64::total_cmp);
        for ((g, x), y) in gaps.iter().zip(exact).zip(approx) {
            assert!((g.gap_hz - (x - y)).abs() < 1e-3, "{g:?} {x} {y}");
            assert!((g.effective_hz - (2.0 * p.nu_b + y)).abs() < 1e-3);
        }
    }
}

//! Phase-sensitivity figures of merit: Fisher information and the
//! Cramér–Rao bound, the Kitagawa–Ueda and Wineland squeezing parameters,
//! and the mean-readout phase error.
//!
//! Fisher information of the counting distribution,
//! F(φ) = Σ_m p_m (∂_φ ln p_m)², is estimated by central differences.
//! Outcomes whose probability vanishes at the evaluation point need care:
//! a smooth p_m ≥ 0 touching zero has p′ = 0 there, and the ratio p′²/p_m
//! tends to 2p″. That limit is restored from the second difference, so
//! the estimate stays continuous through fringe minima instead of dropping
//! their information content. A vanishing p_m with a non-vanishing slope
//! signals a genuinely divergent term and is reported as an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{expectation, mean_spin, variance, StokesOperators, TwoModeState};
use crate::interferometer::PhaseGrid;

/// Default central-difference step (radians).
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Probability floor below which an outcome is treated as vanishing.
pub const EPS_PROBABILITY: f64 = 1e-12;
/// Derivative floor separating removable zeros from divergent terms.
pub const EPS_DERIVATIVE: f64 = 1e-8;

fn check_normalized(p: &[f64], phi: f64) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { phi, sum });
    }
    Ok(())
}

/// Central-difference Fisher information of `distribution` at `phi`.
pub fn fisher_information<F>(distribution: F, phi: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(Error::OutOfRange {
            name: "step",
            value: step,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    let p_minus = distribution(phi - step)?;
    let p_center = distribution(phi)?;
    let p_plus = distribution(phi + step)?;
    if p_minus.len() != p_center.len() || p_plus.len() != p_center.len() {
        return Err(Error::DimensionMismatch {
            left: p_plus.len(),
            right: p_center.len(),
        });
    }
    check_normalized(&p_minus, phi - step)?;
    check_normalized(&p_center, phi)?;
    check_normalized(&p_plus, phi + step)?;

    let mut fisher = 0.0;
    for m in 0..p_center.len() {
        let deriv = (p_plus[m] - p_minus[m]) / (2.0 * step);
        if p_center[m] >= EPS_PROBABILITY {
            fisher += deriv * deriv / p_center[m];
        } else if deriv.abs() < EPS_DERIVATIVE {
            // Removable zero: p ≈ ½p″(φ − φ₀)² so p′²/p → 2p″.
            let second = (p_plus[m] - 2.0 * p_center[m] + p_minus[m]) / (step * step);
            fisher += 2.0 * second.max(0.0);
        } else {
            return Err(Error::IllConditionedFisher {
                phi,
                outcome: m,
                deriv,
            });
        }
    }
    Ok(fisher.max(0.0))
}

/// Fisher information over a phase grid with the interpolated peak.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FisherCurve {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    /// Central-difference step used.
    pub step: f64,
    pub f_max: f64,
    pub phi_at_f_max: f64,
}

/// Evaluates [`fisher_information`] on every grid point.
///
/// The peak is located by a quadratic fit through the three points around
/// the discrete maximum; ties within numerical noise resolve toward the
/// smallest |φ|, and a flat neighborhood keeps the grid point itself.
pub fn fisher_curve<F>(distribution: F, grid: &PhaseGrid, step: f64) -> Result<FisherCurve>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let values = grid
        .values()
        .iter()
        .map(|&phi| fisher_information(&distribution, phi, step))
        .collect::<Result<Vec<f64>>>()?;
    let (f_max, phi_at_f_max) = interpolate_peak(grid.values(), &values);
    Ok(FisherCurve {
        grid: grid.clone(),
        values,
        step,
        f_max,
        phi_at_f_max,
    })
}

fn interpolate_peak(phis: &[f64], values: &[f64]) -> (f64, f64) {
    let raw_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-9 * raw_max.abs().max(1.0);
    // Among near-ties prefer the point closest to zero bias.
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] + tie
            || ((v - values[best]).abs() <= tie && phis[i].abs() < phis[best].abs())
        {
            best = i;
        }
    }
    if best == 0 || best + 1 == values.len() {
        return (values[best], phis[best]);
    }
    let (x0, x1, x2) = (phis[best - 1], phis[best], phis[best + 1]);
    let (y0, y1, y2) = (values[best - 1], values[best], values[best + 1]);
    // Quadratic through the three points; fall back to the grid point when
    // the curvature is too small to define a vertex.
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curvature = (d1 - d0) / (x2 - x0);
    if curvature >= -tie {
        return (y1, x1);
    }
    // Vertex of the Newton-form quadratic
    // q(x) = y0 + d0 (x − x0) + curvature (x − x0)(x − x1).
    let vertex = (0.5 * (x0 + x1 - d0 / curvature)).clamp(x0, x2);
    let value = y0 + d0 * (vertex - x0) + curvature * (vertex - x0) * (vertex - x1);
    (value.max(y1), vertex)
}

/// Kitagawa–Ueda squeezing parameter: the minimum uncertainty among spin
/// directions orthogonal to the mean spin, relative to √n.
///
/// The minimization is exact via the eigenvalues of the 2×2 covariance of
/// the two orthogonal Stokes components. Errors when the mean spin
/// vanishes and no orthogonal plane is defined.
pub fn squeezing_parameter_xi_s(state: &TwoModeState) -> Result<f64> {
    let n = state.photon_number();
    let ops = StokesOperators::new(n)?;
    let mean = mean_spin(state, &ops)?;
    let norm = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
    if norm < 1e-9 {
        return Err(Error::ZeroMeanSpin);
    }
    let unit = [mean[0] / norm, mean[1] / norm, mean[2] / norm];
    let (e1, e2) = orthonormal_complement(unit);
    let matrices = ops.as_array();
    let combine = |dir: [f64; 3]| {
        let mut m = matrices[0].mapv(|x| x * dir[0]);
        m = m + matrices[1].mapv(|x| x * dir[1]);
        m + matrices[2].mapv(|x| x * dir[2])
    };
    let a = combine(e1);
    let b = combine(e2);
    let var_a = variance(state, &a)?;
    let var_b = variance(state, &b)?;
    // Symmetrized cross covariance ⟨(AB + BA)/2⟩ − ⟨A⟩⟨B⟩.
    let ab = a.dot(&b);
    let ba = b.dot(&a);
    let sym = (ab + ba).mapv(|x| x * 0.5);
    let cross = expectation(state, &sym)? - expectation(state, &a)? * expectation(state, &b)?;
    let tr = var_a + var_b;
    let det_part = ((var_a - var_b) * 0.5).hypot(cross);
    let lambda_min = (tr * 0.5 - det_part).max(0.0);
    Ok((lambda_min / n as f64).sqrt())
}

fn orthonormal_complement(unit: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    // Pick the axis least aligned with the mean spin and Gram-Schmidt it.
    let seed = if unit[0].abs() <= unit[1].abs() && unit[0].abs() <= unit[2].abs() {
        [1.0, 0.0, 0.0]
    } else if unit[1].abs() <= unit[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let dot = seed[0] * unit[0] + seed[1] * unit[1] + seed[2] * unit[2];
    let mut e1 = [
        seed[0] - dot * unit[0],
        seed[1] - dot * unit[1],
        seed[2] - dot * unit[2],
    ];
    let norm = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for x in &mut e1 {
        *x /= norm;
    }
    let e2 = [
        unit[1] * e1[2] - unit[2] * e1[1],
        unit[2] * e1[0] - unit[0] * e1[2],
        unit[0] * e1[1] - unit[1] * e1[0],
    ];
    (e1, e2)
}

/// Mean-readout phase error at zero bias: ΔS₁(0)/|⟨S₂⟩(0)|.
pub fn squeezing_phase_error(state: &TwoModeState) -> Result<f64> {
    let ops = StokesOperators::new(state.photon_number())?;
    let slope = expectation(state, &ops.s2)?;
    if slope.abs() < 1e-9 {
        return Err(Error::VanishingSlope);
    }
    Ok(variance(state, &ops.s1)?.sqrt() / slope.abs())
}

/// Wineland squeezing parameter ξ_R = δφ_sq √n, the mean-readout phase
/// error relative to the shot-noise limit 1/√n.
pub fn squeezing_parameter_xi_r(state: &TwoModeState) -> Result<f64> {
    Ok(squeezing_phase_error(state)? * (state.photon_number() as f64).sqrt())
}

/// Summary of every sensitivity figure for one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub photon_number: usize,
    pub xi_s: f64,
    pub xi_r: f64,
    pub delta_phi_sq: f64,
    pub delta_phi_snl: f64,
    pub delta_phi_opt: f64,
    pub f_max: f64,
    pub phi_at_f_max: f64,
}

/// Assembles the report for a pure probe state and an outcome-distribution
/// model (which may include mismatch and noise).
pub fn sensitivity_report<F>(
    state: &TwoModeState,
    distribution: F,
    grid: &PhaseGrid,
    step: f64,
) -> Result<(SensitivityReport, FisherCurve)>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let n = state.photon_number();
    let curve = fisher_curve(distribution, grid, step)?;
    let delta_phi_sq = squeezing_phase_error(state)?;
    let report = SensitivityReport {
        photon_number: n,
        xi_s: squeezing_parameter_xi_s(state)?,
        xi_r: delta_phi_sq * (n as f64).sqrt(),
        delta_phi_sq,
        delta_phi_snl: 1.0 / (n as f64).sqrt(),
        delta_phi_opt: 1.0 / curve.f_max.sqrt(),
        f_max: curve.f_max,
        phi_at_f_max: curve.phi_at_f_max,
    };
    Ok((report, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distinguishability::{add_phase_insensitive_noise, NoiseParameter};
    use crate::interferometer::outcome_distribution;
    use crate::states::{holland_burnett_state, uncorrelated_state, yurke_state};
    use approx::assert_relative_eq;

    fn ideal(state: &TwoModeState) -> impl Fn(f64) -> Result<Vec<f64>> + '_ {
        move |phi| outcome_distribution(state, phi)
    }

    #[test]
    fn single_photon_fisher_is_one_everywhere() {
        let state = uncorrelated_state(1).unwrap();
        for &phi in &[
            0.0,
            0.3,
            -1.0,
            std::f64::consts::FRAC_PI_2,
            -std::f64::consts::FRAC_PI_2,
            2.8,
        ] {
            let f = fisher_information(ideal(&state), phi, DEFAULT_FD_STEP).unwrap();
            assert_relative_eq!(f, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn yurke_fisher_at_zero_is_s3_variance() {
        let state = yurke_state(5).unwrap();
        let f = fisher_information(ideal(&state), 0.0, DEFAULT_FD_STEP).unwrap();
        assert_relative_eq!(f, 17.0, epsilon = 1e-4);
    }

    #[test]
    fn uncorrelated_fisher_is_shot_noise_everywhere() {
        let state = uncorrelated_state(5).unwrap();
        for &phi in &[0.0, 0.5, 1.1, std::f64::consts::FRAC_PI_2, -2.4] {
            let f = fisher_information(ideal(&state), phi, DEFAULT_FD_STEP).unwrap();
            assert_relative_eq!(f, 5.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn richardson_step_consistency() {
        let state = yurke_state(5).unwrap();
        for &phi in &[0.3, 0.9, -1.7] {
            let f1 = fisher_information(ideal(&state), phi, 1e-4).unwrap();
            let f2 = fisher_information(ideal(&state), phi, 5e-5).unwrap();
            assert!(((f1 - f2) / f1).abs() < 1e-4, "phi = {phi}: {f1} vs {f2}");
        }
    }

    #[test]
    fn fisher_is_even_for_yurke() {
        let state = yurke_state(5).unwrap();
        for &phi in &[0.2, 0.9, 1.4] {
            let fp = fisher_information(ideal(&state), phi, DEFAULT_FD_STEP).unwrap();
            let fm = fisher_information(ideal(&state), -phi, DEFAULT_FD_STEP).unwrap();
            assert_relative_eq!(fp, fm, epsilon = 1e-8);
        }
    }

    #[test]
    fn divergent_terms_are_reported() {
        // A linear crossing p₀ = φ has nonzero slope where p₀ vanishes.
        let dist = |phi: f64| Ok(vec![phi, 1.0 - phi]);
        let err = fisher_information(dist, 0.0, 1e-4);
        assert!(matches!(err, Err(Error::IllConditionedFisher { .. })));
    }

    #[test]
    fn uniform_distribution_has_zero_information() {
        let state = yurke_state(5).unwrap();
        let noisy = |phi: f64| {
            let p = outcome_distribution(&state, phi)?;
            add_phase_insensitive_noise(&p, NoiseParameter::new(1.0).unwrap())
        };
        for &phi in &[0.0, 0.7, -1.3] {
            let f = fisher_information(noisy, phi, DEFAULT_FD_STEP).unwrap();
            assert_relative_eq!(f, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn fisher_decreases_with_noise() {
        let state = yurke_state(5).unwrap();
        for &phi in &[0.0, 0.5, 1.2] {
            let mut last = f64::INFINITY;
            for k in 0..=10 {
                let s = NoiseParameter::new(k as f64 / 10.0).unwrap();
                let noisy = |phi: f64| {
                    let p = outcome_distribution(&state, phi)?;
                    add_phase_insensitive_noise(&p, s)
                };
                let f = fisher_information(noisy, phi, DEFAULT_FD_STEP).unwrap();
                assert!(f <= last + 1e-9, "phi = {phi}, s = {}", s.value());
                last = f;
            }
        }
    }

    #[test]
    fn curve_peak_for_ideal_yurke() {
        let state = yurke_state(5).unwrap();
        let grid = PhaseGrid::default_period();
        let curve = fisher_curve(ideal(&state), &grid, DEFAULT_FD_STEP).unwrap();
        assert_relative_eq!(curve.f_max, 17.0, epsilon = 1e-4);
        // The ideal curve is flat, so the tie-break lands on zero bias.
        assert_relative_eq!(curve.phi_at_f_max, 0.0, epsilon = 1e-12);
        assert!(curve.values.iter().all(|&f| f >= 0.0 && f.is_finite()));
    }

    #[test]
    fn xi_s_values() {
        assert_relative_eq!(
            squeezing_parameter_xi_s(&yurke_state(5).unwrap()).unwrap(),
            1.0 / 5.0f64.sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            squeezing_parameter_xi_s(&uncorrelated_state(5).unwrap()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            squeezing_parameter_xi_s(&uncorrelated_state(4).unwrap()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn twin_fock_mean_spin_vanishes() {
        // |n/2, n/2⟩ has ⟨S⟩ = 0, so the orthogonal-plane minimization is
        // undefined; the brute-force covariance solve is exercised in the
        // integration suite instead.
        let state = holland_burnett_state(6).unwrap();
        assert!(matches!(
            squeezing_parameter_xi_s(&state),
            Err(Error::ZeroMeanSpin)
        ));
    }

    #[test]
    fn phase_error_values() {
        assert_relative_eq!(
            squeezing_phase_error(&yurke_state(5).unwrap()).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            squeezing_phase_error(&yurke_state(3).unwrap()).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            squeezing_phase_error(&uncorrelated_state(5).unwrap()).unwrap(),
            1.0 / 5.0f64.sqrt(),
            epsilon = 1e-10
        );
        assert!(squeezing_phase_error(&holland_burnett_state(6).unwrap()).is_err());
    }

    #[test]
    fn xi_r_values() {
        assert_relative_eq!(
            squeezing_parameter_xi_r(&yurke_state(5).unwrap()).unwrap(),
            2.0 * 5.0f64.sqrt() / 6.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            squeezing_parameter_xi_r(&uncorrelated_state(5).unwrap()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        // 2√n/(n+1) approaches 2/√n for large n.
        let n = 41;
        let xi = squeezing_parameter_xi_r(&yurke_state(n).unwrap()).unwrap();
        let asymptote = 2.0 / (n as f64).sqrt();
        assert!((xi / asymptote - 1.0).abs() < 0.03);
    }

    #[test]
    fn definitions_are_internally_consistent() {
        for state in [yurke_state(5).unwrap(), uncorrelated_state(5).unwrap()] {
            let n = state.photon_number() as f64;
            let xi_r = squeezing_parameter_xi_r(&state).unwrap();
            let dphi = squeezing_phase_error(&state).unwrap();
            assert_relative_eq!(xi_r, dphi * n.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn report_for_ideal_yurke() {
        let state = yurke_state(5).unwrap();
        let grid = PhaseGrid::default_period();
        let (report, curve) =
            sensitivity_report(&state, ideal(&state), &grid, DEFAULT_FD_STEP).unwrap();
        assert_relative_eq!(report.xi_s, 1.0 / 5.0f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(report.delta_phi_sq, 1.0 / 3.0, epsilon = 1e-10);
        assert_relative_eq!(report.delta_phi_snl, 1.0 / 5.0f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(report.f_max, 17.0, epsilon = 1e-4);
        assert_relative_eq!(
            report.delta_phi_opt,
            1.0 / 17.0f64.sqrt(),
            epsilon = 1e-6
        );
        assert_eq!(curve.values.len(), grid.len());
    }
}

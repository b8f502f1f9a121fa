//! Phase evolution and measurement distributions.
//!
//! The phase shift acts as U(φ) = exp(−i S₃ φ/2). It is implemented
//! through the equivalent creation-operator rotation
//!
//! ```text
//! â†_H → cos(φ/2) â†_H + sin(φ/2) â†_V
//! â†_V → −sin(φ/2) â†_H + cos(φ/2) â†_V
//! ```
//!
//! expanded binomially on the fixed-photon-number basis. In the Heisenberg
//! picture this gives S₁(φ) = cos(φ) S₁ − sin(φ) S₂, so states with
//! ⟨S₁⟩(0) = 0 trace the fringe ⟨S₁⟩(φ) = −⟨S₂⟩ sin(φ).

use ndarray::Array2;
use num_complex::Complex64;
use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FourModeState, TwoModeState};

const FACTORIALS: [f64; 17] = {
    let mut f = [1.0f64; 17];
    let mut i = 1;
    while i < 17 {
        f[i] = f[i - 1] * i as f64;
        i += 1;
    }
    f
};

/// ⟨k_out, n−k_out| U(φ) |k, n−k⟩ for the two-mode rotation, with
/// c = cos(φ/2) and s = sin(φ/2). Real for all angles.
pub(crate) fn rotation_amplitude(k: usize, n_minus_k: usize, k_out: usize, c: f64, s: f64) -> f64 {
    let n = k + n_minus_k;
    if k_out > n {
        return 0.0;
    }
    let lo = k_out.saturating_sub(n_minus_k);
    let hi = k_out.min(k);
    if lo > hi {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in lo..=hi {
        let j = k_out - i;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = (binomial(k as u64, i as u64) * binomial(n_minus_k as u64, j as u64)) as f64;
        sum += sign * coeff * c.powi((i + n_minus_k - j) as i32) * s.powi((k - i + j) as i32);
    }
    let scale =
        (FACTORIALS[k_out] * FACTORIALS[n - k_out] / (FACTORIALS[k] * FACTORIALS[n_minus_k]))
            .sqrt();
    scale * sum
}

/// The (n+1)×(n+1) unitary U(φ) = exp(−i S₃ φ/2) on the fixed-n basis.
pub fn phase_unitary(n: usize, phi: f64) -> Result<Array2<Complex64>> {
    if n < 1 {
        return Err(Error::InvalidPhotonNumber { got: n, min: 1 });
    }
    if !phi.is_finite() {
        return Err(Error::OutOfRange {
            name: "phi",
            value: phi,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        });
    }
    let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let dim = n + 1;
    let mut u = Array2::zeros((dim, dim));
    for k in 0..dim {
        for k_out in 0..dim {
            u[[k_out, k]] = Complex64::new(rotation_amplitude(k, n - k, k_out, c, s), 0.0);
        }
    }
    Ok(u)
}

/// U(φ)|ψ⟩ on the two-mode basis.
pub fn evolve(state: &TwoModeState, phi: f64) -> Result<TwoModeState> {
    let u = phase_unitary(state.photon_number(), phi)?;
    TwoModeState::new(state.basis(), u.dot(state.amplitudes()))
}

/// Probability of detecting m photons in H (and n−m in V) after a phase
/// shift: p_m = |⟨m, n−m|U(φ)|ψ⟩|².
pub fn outcome_distribution(state: &TwoModeState, phi: f64) -> Result<Vec<f64>> {
    let evolved = evolve(state, phi)?;
    Ok(evolved.amplitudes().iter().map(|a| a.norm_sqr()).collect())
}

/// Applies the phase rotation to a four-mode state, acting identically on
/// the (H, V) and (H⊥, V⊥) pairs.
pub fn evolve_four_mode(state: &FourModeState, phi: f64) -> FourModeState {
    let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let mut out = FourModeState::zero(state.photon_number());
    for (occ, amp) in state.iter() {
        let (a, b, ap, bp) = (
            occ[0] as usize,
            occ[1] as usize,
            occ[2] as usize,
            occ[3] as usize,
        );
        for a_out in 0..=(a + b) {
            let k_hv = rotation_amplitude(a, b, a_out, c, s);
            if k_hv == 0.0 {
                continue;
            }
            for ap_out in 0..=(ap + bp) {
                let k_perp = rotation_amplitude(ap, bp, ap_out, c, s);
                if k_perp == 0.0 {
                    continue;
                }
                out.add_amplitude(
                    [
                        a_out as u8,
                        (a + b - a_out) as u8,
                        ap_out as u8,
                        (ap + bp - ap_out) as u8,
                    ],
                    amp * (k_hv * k_perp),
                );
            }
        }
    }
    out.prune();
    out
}

/// Ordered list of phase values in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct PhaseGrid {
    values: Vec<f64>,
}

impl PhaseGrid {
    /// Validates a strictly increasing, finite, non-empty list.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty()
            || values.iter().any(|v| !v.is_finite())
            || values.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidGrid);
        }
        Ok(Self { values })
    }

    /// Uniform grid from `start` to `stop` (inclusive up to rounding slop)
    /// in steps of `step`.
    pub fn from_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::InvalidGrid);
        }
        let count = ((stop - start) / step + 1.0 + 1e-9).floor() as usize;
        Self::new((0..count).map(|i| start + i as f64 * step).collect())
    }

    /// Default experimental grid: one full period in steps of π/15.
    pub fn default_period() -> Self {
        Self::from_range(
            -std::f64::consts::PI,
            std::f64::consts::PI,
            std::f64::consts::PI / 15.0,
        )
        .expect("static grid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl From<PhaseGrid> for Vec<f64> {
    fn from(grid: PhaseGrid) -> Self {
        grid.values
    }
}

impl TryFrom<Vec<f64>> for PhaseGrid {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Per-phase outcome distributions p_m(φ) on a grid.
///
/// Row i holds the n+1 outcome probabilities at grid point i; each row
/// sums to one within 1e-10 and tiny negative entries are clamped to zero
/// on construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FringeTable {
    n: usize,
    grid: PhaseGrid,
    rows: Vec<Vec<f64>>,
}

impl FringeTable {
    pub fn new(n: usize, grid: PhaseGrid, mut rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                left: rows.len(),
                right: grid.len(),
            });
        }
        for (i, row) in rows.iter_mut().enumerate() {
            if row.len() != n + 1 {
                return Err(Error::DimensionMismatch {
                    left: row.len(),
                    right: n + 1,
                });
            }
            for p in row.iter_mut() {
                if *p < 0.0 {
                    if *p < -1e-10 {
                        return Err(Error::NotNormalized {
                            phi: grid.values()[i],
                            sum: *p,
                        });
                    }
                    *p = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-10 {
                return Err(Error::NotNormalized {
                    phi: grid.values()[i],
                    sum,
                });
            }
        }
        Ok(Self { n, grid, rows })
    }

    /// Ideal table: rows are [`outcome_distribution`] over the grid.
    pub fn from_state(state: &TwoModeState, grid: PhaseGrid) -> Result<Self> {
        let rows = grid
            .values()
            .iter()
            .map(|&phi| outcome_distribution(state, phi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(state.photon_number(), grid, rows)
    }

    pub fn photon_number(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// ⟨S₁⟩ of one row: Σ_m (2m − n) p_m.
    pub fn mean_s1(&self, row: usize) -> f64 {
        self.rows[row]
            .iter()
            .enumerate()
            .map(|(m, p)| (2.0 * m as f64 - self.n as f64) * p)
            .sum()
    }

    /// Δ²S₁ of one row.
    pub fn variance_s1(&self, row: usize) -> f64 {
        let mean = self.mean_s1(row);
        let second: f64 = self.rows[row]
            .iter()
            .enumerate()
            .map(|(m, p)| {
                let v = 2.0 * m as f64 - self.n as f64;
                v * v * p
            })
            .sum();
        (second - mean * mean).max(0.0)
    }
}

/// ⟨S₁⟩(φᵢ) over a grid, computed from the evolved outcome distributions.
pub fn fringe_mean(state: &TwoModeState, grid: &PhaseGrid) -> Result<Vec<f64>> {
    grid.values()
        .iter()
        .map(|&phi| {
            let p = outcome_distribution(state, phi)?;
            let n = state.photon_number() as f64;
            Ok(p.iter()
                .enumerate()
                .map(|(m, p)| (2.0 * m as f64 - n) * p)
                .sum())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, StokesOperators};
    use crate::states::{uncorrelated_state, yurke_state};
    use approx::assert_relative_eq;
    use ndarray::Array2;

    fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_at_zero_phase() {
        for n in 1..=7 {
            let u = phase_unitary(n, 0.0).unwrap();
            let eye = Array2::from_diag_elem(n + 1, Complex64::new(1.0, 0.0));
            assert!(max_abs_diff(&u, &eye) < 1e-15);
        }
    }

    #[test]
    fn unitary_within_tolerance() {
        for n in 1..=7 {
            for &phi in &[0.3, -1.2, 2.9] {
                let u = phase_unitary(n, phi).unwrap();
                let udag = u.t().mapv(|x| x.conj());
                let prod = udag.dot(&u);
                let eye = Array2::from_diag_elem(n + 1, Complex64::new(1.0, 0.0));
                assert!(max_abs_diff(&prod, &eye) < 1e-12);
            }
        }
    }

    #[test]
    fn one_parameter_group() {
        for &(a, b) in &[(0.4, 1.1), (-0.9, 0.35), (2.0, -2.7)] {
            let u1 = phase_unitary(5, a).unwrap();
            let u2 = phase_unitary(5, b).unwrap();
            let u12 = phase_unitary(5, a + b).unwrap();
            assert!(max_abs_diff(&u1.dot(&u2), &u12) < 1e-12);
        }
    }

    #[test]
    fn heisenberg_rotation_of_s1() {
        for n in 1..=7 {
            let ops = StokesOperators::new(n).unwrap();
            for &phi in &[0.2, -0.8, 1.9, 3.0] {
                let u = phase_unitary(n, phi).unwrap();
                let udag = u.t().mapv(|x| x.conj());
                let rotated = udag.dot(&ops.s1).dot(&u);
                let expected = ops.s1.mapv(|x| x * phi.cos()) - ops.s2.mapv(|x| x * phi.sin());
                assert!(
                    max_abs_diff(&rotated, &expected) < 1e-10,
                    "n = {n}, phi = {phi}"
                );
            }
        }
    }

    #[test]
    fn fringe_amplitude_matches_s2() {
        let grid = PhaseGrid::from_range(-3.0, 3.0, 0.1).unwrap();
        for (state, amp) in [
            (yurke_state(5).unwrap(), 3.0),
            (uncorrelated_state(5).unwrap(), 5.0),
        ] {
            let ops = StokesOperators::new(5).unwrap();
            let s2 = expectation(&state, &ops.s2).unwrap();
            assert_relative_eq!(s2, amp, epsilon = 1e-10);
            let means = fringe_mean(&state, &grid).unwrap();
            for (phi, mean) in grid.values().iter().zip(means) {
                assert_relative_eq!(mean, -amp * phi.sin(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn zero_phase_leaves_mean_unchanged() {
        let state = yurke_state(5).unwrap();
        let grid = PhaseGrid::new(vec![0.0]).unwrap();
        let means = fringe_mean(&state, &grid).unwrap();
        assert_relative_eq!(means[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn yurke_distribution_at_zero() {
        let p = outcome_distribution(&yurke_state(5).unwrap(), 0.0).unwrap();
        assert_relative_eq!(p[2], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[3], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[0] + p[1] + p[4] + p[5], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn uncorrelated_stays_binomial_with_rotated_bias() {
        // Each photon rotates independently, so the counts stay binomial
        // with per-photon H probability (1 − sin φ)/2.
        let state = uncorrelated_state(5).unwrap();
        for &phi in &[0.0, 0.4, -1.1, 2.2, std::f64::consts::FRAC_PI_2] {
            let p = outcome_distribution(&state, phi).unwrap();
            let theta = (1.0 - phi.sin()) / 2.0;
            for (m, &pm) in p.iter().enumerate() {
                let expected = binomial(5u64, m as u64) as f64
                    * theta.powi(m as i32)
                    * (1.0 - theta).powi(5 - m as i32);
                assert_relative_eq!(pm, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn distribution_is_periodic() {
        let state = yurke_state(5).unwrap();
        for &phi in &[0.17, -0.9, 1.3] {
            let a = outcome_distribution(&state, phi).unwrap();
            let b = outcome_distribution(&state, phi + 2.0 * std::f64::consts::PI).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn four_mode_evolution_matches_two_mode() {
        let state = yurke_state(5).unwrap();
        let four = FourModeState::from_two_mode(&state);
        for &phi in &[0.3, -1.4] {
            let evolved2 = evolve(&state, phi).unwrap();
            let evolved4 = evolve_four_mode(&four, phi);
            for (k, amp) in evolved2.amplitudes().iter().enumerate() {
                let occ = [k as u8, (5 - k) as u8, 0, 0];
                assert_relative_eq!(evolved4.amplitude(&occ).re, amp.re, epsilon = 1e-12);
                assert_relative_eq!(evolved4.amplitude(&occ).im, amp.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(PhaseGrid::new(vec![]).is_err());
        assert!(PhaseGrid::new(vec![0.0, 0.0]).is_err());
        assert!(PhaseGrid::new(vec![0.0, f64::NAN]).is_err());
        let grid = PhaseGrid::default_period();
        assert_eq!(grid.len(), 31);
        assert_relative_eq!(grid.values()[0], -std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(
            grid.values()[30],
            std::f64::consts::PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fringe_table_row_sums_validated() {
        let grid = PhaseGrid::new(vec![0.0, 1.0]).unwrap();
        let bad = vec![vec![0.5, 0.4], vec![0.5, 0.5]];
        assert!(FringeTable::new(1, grid.clone(), bad).is_err());
        let clamped = vec![vec![1.0 + 5e-11, -5e-11], vec![0.5, 0.5]];
        let table = FringeTable::new(1, grid, clamped).unwrap();
        assert_eq!(table.rows()[0][1], 0.0);
    }

    #[test]
    fn table_from_state_matches_point_evaluations() {
        let state = yurke_state(5).unwrap();
        let grid = PhaseGrid::default_period();
        let table = FringeTable::from_state(&state, grid.clone()).unwrap();
        let n = table.photon_number() as f64;
        for (i, &phi) in grid.values().iter().enumerate() {
            assert_relative_eq!(table.mean_s1(i), -3.0 * phi.sin(), epsilon = 1e-10);
            let _ = n;
        }
    }
}

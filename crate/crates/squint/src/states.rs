//! Constructors for the probe states: uncorrelated photons, twin-Fock
//! (Holland–Burnett), truncated parametric down-conversion, and the Yurke
//! state obtained from twin-Fock input by one-photon subtraction in the
//! diagonal basis.

use ndarray::Array1;
use num_complex::Complex64;
use num_integer::binomial;

use crate::error::{Error, Result};
use crate::fock::{apply_annihilation, FourModeState, Mode, TwoModeBasis, TwoModeState};

/// N uncorrelated photons, each in (|1,0⟩ + |0,1⟩)/√2.
///
/// Amplitudes are √C(n,k)/2^(n/2); an HV measurement yields
/// Binomial(n, 1/2) counts.
pub fn uncorrelated_state(n: usize) -> Result<TwoModeState> {
    if n < 1 {
        return Err(Error::InvalidPhotonNumber { got: n, min: 1 });
    }
    let basis = TwoModeBasis::new(n);
    let scale = 0.5f64.powi(n as i32 / 2) * if n % 2 == 1 { 0.5f64.sqrt() } else { 1.0 };
    let amps: Array1<Complex64> = (0..=n)
        .map(|k| Complex64::new((binomial(n as u64, k as u64) as f64).sqrt() * scale, 0.0))
        .collect();
    TwoModeState::new(basis, amps)
}

/// The n-photon Yurke state (|(n−1)/2, (n+1)/2⟩ + |(n+1)/2, (n−1)/2⟩)/√2.
///
/// Only defined for odd n ≥ 3.
pub fn yurke_state(n: usize) -> Result<TwoModeState> {
    if n % 2 == 0 {
        return Err(Error::WrongParity {
            got: n,
            expected: "odd",
        });
    }
    if n < 3 {
        return Err(Error::InvalidPhotonNumber { got: n, min: 3 });
    }
    let basis = TwoModeBasis::new(n);
    let mut amps: Array1<Complex64> = Array1::zeros(n + 1);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    amps[(n - 1) / 2] = Complex64::new(r, 0.0);
    amps[(n + 1) / 2] = Complex64::new(r, 0.0);
    TwoModeState::new(basis, amps)
}

/// The twin-Fock (Holland–Burnett) state |n/2, n/2⟩ for even n ≥ 2.
pub fn holland_burnett_state(n: usize) -> Result<TwoModeState> {
    if n % 2 == 1 {
        return Err(Error::WrongParity {
            got: n,
            expected: "even",
        });
    }
    if n < 2 {
        return Err(Error::InvalidPhotonNumber { got: n, min: 2 });
    }
    TwoModeState::basis_state(TwoModeBasis::new(n), n / 2)
}

/// Two-mode squeezed state from type-I down-conversion, truncated at a
/// maximum (even) total photon number and renormalized.
///
/// The component with N photons is |N/2, N/2⟩ with weight ∝ (tanh r)^N;
/// consecutive even components keep the ratio tanh²r before truncation.
#[derive(Debug, Clone)]
pub struct PdcState {
    squeezing: f64,
    n_max: usize,
    amplitudes: Vec<f64>,
}

impl PdcState {
    pub fn new(squeezing: f64, n_max: usize) -> Result<Self> {
        if !(squeezing >= 0.0) {
            return Err(Error::OutOfRange {
                name: "squeezing",
                value: squeezing,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if n_max % 2 == 1 {
            return Err(Error::WrongParity {
                got: n_max,
                expected: "even",
            });
        }
        let t = squeezing.tanh();
        let mut amplitudes: Vec<f64> = (0..=n_max / 2).map(|j| t.powi(j as i32)).collect();
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self {
            squeezing,
            n_max,
            amplitudes,
        })
    }

    pub fn squeezing(&self) -> f64 {
        self.squeezing
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Amplitude of the N-photon component; zero for odd or out-of-range N.
    pub fn amplitude(&self, n: usize) -> f64 {
        if n % 2 == 1 || n > self.n_max {
            0.0
        } else {
            self.amplitudes[n / 2]
        }
    }

    /// Probability of postselecting exactly N photons.
    pub fn weight(&self, n: usize) -> f64 {
        let a = self.amplitude(n);
        a * a
    }

    /// The N-photon postselected component, a twin-Fock state.
    pub fn postselect(&self, n: usize) -> Result<TwoModeState> {
        if self.weight(n) == 0.0 {
            return Err(Error::DegenerateData(
                "postselected component has zero weight",
            ));
        }
        holland_burnett_state(n)
    }
}

/// Conditional one-photon subtraction in the D/D⊥ basis.
///
/// Returns the two branches â_D|ψ⟩ and â_D⊥|ψ⟩, each normalized, with
/// weights proportional to their squared norms and summing to one. A
/// branch that vanishes keeps the zero state and weight zero.
pub fn subtract_one_photon_diagonal(
    state: &FourModeState,
) -> Result<Vec<(f64, FourModeState)>> {
    if state.photon_number() == 0 {
        return Err(Error::VacuumSubtraction);
    }
    let branches = [
        apply_annihilation(state, Mode::D),
        apply_annihilation(state, Mode::DPerp),
    ];
    let norms: Vec<f64> = branches.iter().map(|b| b.norm_sqr()).collect();
    let total: f64 = norms.iter().sum();
    if total < 1e-24 {
        return Err(Error::VacuumSubtraction);
    }
    Ok(branches
        .into_iter()
        .zip(norms)
        .map(|(mut b, n)| {
            let w = n / total;
            if w > 0.0 {
                b.normalize().expect("branch with positive weight");
            }
            (w, b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uncorrelated_single_photon() {
        let state = uncorrelated_state(1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(state.amplitudes()[0].re, r, epsilon = 1e-15);
        assert_relative_eq!(state.amplitudes()[1].re, r, epsilon = 1e-15);
    }

    #[test]
    fn uncorrelated_is_binomial() {
        let state = uncorrelated_state(5).unwrap();
        for k in 0..=5usize {
            let p = state.amplitudes()[k].norm_sqr();
            let expected = binomial(5u64, k as u64) as f64 / 32.0;
            assert_relative_eq!(p, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn uncorrelated_s2_mean_is_n() {
        let state = uncorrelated_state(2).unwrap();
        let ops = crate::fock::StokesOperators::new(2).unwrap();
        let s2 = crate::fock::expectation(&state, &ops.s2).unwrap();
        assert_relative_eq!(s2, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn uncorrelated_rejects_zero() {
        assert!(uncorrelated_state(0).is_err());
    }

    #[test]
    fn yurke_amplitudes() {
        let state = yurke_state(5).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (k, amp) in state.amplitudes().iter().enumerate() {
            if k == 2 || k == 3 {
                assert_relative_eq!(amp.re, r, epsilon = 1e-15);
            } else {
                assert_eq!(amp.norm_sqr(), 0.0);
            }
        }
    }

    #[test]
    fn yurke_s2_mean() {
        let state = yurke_state(3).unwrap();
        let ops = crate::fock::StokesOperators::new(3).unwrap();
        let s2 = crate::fock::expectation(&state, &ops.s2).unwrap();
        assert_relative_eq!(s2, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn yurke_rejects_bad_photon_numbers() {
        assert!(yurke_state(4).is_err());
        assert!(yurke_state(1).is_err());
    }

    #[test]
    fn holland_burnett_basics() {
        let state = holland_burnett_state(6).unwrap();
        assert_relative_eq!(state.amplitudes()[3].re, 1.0, epsilon = 1e-15);
        let ops = crate::fock::StokesOperators::new(6).unwrap();
        assert_relative_eq!(
            crate::fock::expectation(&state, &ops.s1).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let two = holland_burnett_state(2).unwrap();
        assert_relative_eq!(two.amplitudes()[1].re, 1.0, epsilon = 1e-15);
        assert!(holland_burnett_state(5).is_err());
    }

    #[test]
    fn pdc_vacuum_at_zero_squeezing() {
        let pdc = PdcState::new(0.0, 6).unwrap();
        assert_relative_eq!(pdc.weight(0), 1.0, epsilon = 1e-15);
        for n in [2, 4, 6] {
            assert_eq!(pdc.weight(n), 0.0);
        }
    }

    #[test]
    fn pdc_pair_ratio_is_tanh_squared() {
        let r = 0.73;
        let pdc = PdcState::new(r, 8).unwrap();
        let t2 = r.tanh() * r.tanh();
        for n in [0usize, 2, 4, 6] {
            let ratio = pdc.weight(n + 2) / pdc.weight(n);
            assert_relative_eq!(ratio, t2, epsilon = 1e-12);
        }
    }

    #[test]
    fn pdc_truncated_weights() {
        let r = 0.5f64;
        let pdc = PdcState::new(r, 6).unwrap();
        let t = r.tanh();
        let raw: Vec<f64> = (0..=3).map(|j| t.powi(2 * j)).collect();
        let total: f64 = raw.iter().sum();
        for (j, w) in raw.iter().enumerate() {
            assert_relative_eq!(pdc.weight(2 * j), w / total, epsilon = 1e-12);
        }
        assert!(PdcState::new(-0.1, 6).is_err());
        assert!(PdcState::new(0.5, 5).is_err());
    }

    #[test]
    fn subtraction_of_twin_fock_gives_yurke() {
        for n in [3usize, 5, 7] {
            let hb = holland_burnett_state(n + 1).unwrap();
            let four = FourModeState::from_two_mode(&hb);
            let branches = subtract_one_photon_diagonal(&four).unwrap();
            assert_relative_eq!(branches[0].0, 1.0, epsilon = 1e-12);
            assert_relative_eq!(branches[1].0, 0.0, epsilon = 1e-12);
            let yurke = FourModeState::from_two_mode(&yurke_state(n).unwrap());
            let fidelity = branches[0].1.inner(&yurke).norm_sqr();
            assert_relative_eq!(fidelity, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn subtraction_of_single_pair() {
        let four = FourModeState::basis_state([1, 1, 0, 0]);
        let branches = subtract_one_photon_diagonal(&four).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(branches[0].0, 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            branches[0].1.amplitude(&[0, 1, 0, 0]).re,
            r,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            branches[0].1.amplitude(&[1, 0, 0, 0]).re,
            r,
            epsilon = 1e-12
        );
    }

    #[test]
    fn subtraction_weights_follow_occupation() {
        let four = FourModeState::basis_state([0, 0, 0, 3]);
        let branches = subtract_one_photon_diagonal(&four).unwrap();
        assert_eq!(branches[0].0, 0.0);
        assert_relative_eq!(branches[1].0, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn subtraction_rejects_vacuum() {
        let vacuum = FourModeState::basis_state([0, 0, 0, 0]);
        assert!(subtract_one_photon_diagonal(&vacuum).is_err());
    }
}

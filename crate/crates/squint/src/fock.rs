//! Fixed-total-photon-number Fock representation for two and four
//! polarization modes.
//!
//! The two-mode space with `n` photons is spanned by |k, n-k⟩ for
//! k = 0..=n, where k counts horizontally polarized photons. With this
//! ordering the Stokes operator S₁ = n̂_H − n̂_V is diagonal with entries
//! 2k − n, and the measurement outcome index m (detected H photons)
//! coincides with the basis index.
//!
//! Four-mode states add the temporally mismatched partners H⊥ and V⊥;
//! they are kept sparse because the distinguishability mixture only
//! touches a handful of occupation tuples per branch.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Norm and normalization tolerance for state vectors.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on Hermiticity residues (imaginary parts of expectations).
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Basis of the two-mode space with a fixed total photon number.
///
/// Index k ↔ occupation (n_H = k, n_V = n − k); dimension n + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoModeBasis {
    n: usize,
}

impl TwoModeBasis {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    /// Total photon number.
    pub fn photon_number(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// Occupation (n_H, n_V) of basis index k.
    pub fn occupation(&self, k: usize) -> (usize, usize) {
        debug_assert!(k <= self.n);
        (k, self.n - k)
    }
}

/// Pure state on a [`TwoModeBasis`], stored as a complex amplitude vector.
#[derive(Debug, Clone)]
pub struct TwoModeState {
    basis: TwoModeBasis,
    amplitudes: Array1<Complex64>,
}

impl TwoModeState {
    /// Builds a state from amplitudes, normalizing them.
    ///
    /// Fails if the vector length does not match the basis dimension or if
    /// the norm vanishes.
    pub fn new(basis: TwoModeBasis, amplitudes: Array1<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: basis.dim(),
            });
        }
        let mut state = Self { basis, amplitudes };
        state.normalize()?;
        Ok(state)
    }

    /// Basis state |k, n−k⟩.
    pub fn basis_state(basis: TwoModeBasis, k: usize) -> Result<Self> {
        if k >= basis.dim() {
            return Err(Error::OutcomeOutOfRange {
                got: k,
                max: basis.n,
            });
        }
        let mut amplitudes = Array1::zeros(basis.dim());
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> TwoModeBasis {
        self.basis
    }

    pub fn photon_number(&self) -> usize {
        self.basis.n
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales to unit norm; errors on a vanishing vector.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm < NORM_TOL {
            return Err(Error::ZeroNorm);
        }
        self.amplitudes.mapv_inplace(|a| a / norm);
        Ok(())
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨self|other⟩|², the overlap probability.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// The three Stokes operators on a fixed-n two-mode basis.
///
/// S₁ = n̂_H − n̂_V, S₂ = â†_H â_V + â†_V â_H, S₃ = −i(â†_H â_V − â†_V â_H).
/// They satisfy [Sᵢ, Sⱼ] = 2i ε_ijk S_k.
#[derive(Debug, Clone)]
pub struct StokesOperators {
    n: usize,
    pub s1: Array2<Complex64>,
    pub s2: Array2<Complex64>,
    pub s3: Array2<Complex64>,
}

impl StokesOperators {
    /// Builds the three (n+1)×(n+1) matrices; rejects n < 1.
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidPhotonNumber { got: n, min: 1 });
        }
        let dim = n + 1;
        let mut s1 = Array2::zeros((dim, dim));
        let mut s2 = Array2::zeros((dim, dim));
        let mut s3 = Array2::zeros((dim, dim));
        for k in 0..dim {
            s1[[k, k]] = Complex64::new(2.0 * k as f64 - n as f64, 0.0);
        }
        // a†_H a_V |k, n−k⟩ = √((k+1)(n−k)) |k+1, n−k−1⟩ and h.c.
        for k in 0..n {
            let t = (((k + 1) * (n - k)) as f64).sqrt();
            s2[[k + 1, k]] = Complex64::new(t, 0.0);
            s2[[k, k + 1]] = Complex64::new(t, 0.0);
            s3[[k + 1, k]] = Complex64::new(0.0, -t);
            s3[[k, k + 1]] = Complex64::new(0.0, t);
        }
        Ok(Self { n, s1, s2, s3 })
    }

    pub fn photon_number(&self) -> usize {
        self.n
    }

    pub fn as_array(&self) -> [&Array2<Complex64>; 3] {
        [&self.s1, &self.s2, &self.s3]
    }
}

/// ⟨ψ|A|ψ⟩ for a Hermitian operator A.
///
/// The imaginary residue is checked against [`HERMITICITY_TOL`] and then
/// discarded; a larger residue reports the operator as non-Hermitian.
pub fn expectation(state: &TwoModeState, operator: &Array2<Complex64>) -> Result<f64> {
    if operator.nrows() != state.dim() || operator.ncols() != state.dim() {
        return Err(Error::DimensionMismatch {
            left: operator.nrows(),
            right: state.dim(),
        });
    }
    let applied = operator.dot(state.amplitudes());
    let value: Complex64 = state
        .amplitudes()
        .iter()
        .zip(applied.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    if value.im.abs() > HERMITICITY_TOL {
        return Err(Error::NotHermitian {
            residue: value.im.abs(),
        });
    }
    Ok(value.re)
}

/// ⟨A²⟩ − ⟨A⟩² for a Hermitian operator, clamped at zero.
///
/// ⟨A²⟩ is evaluated as ‖A|ψ⟩‖², which is valid only for Hermitian A; the
/// Hermiticity check rides on the embedded [`expectation`] call.
pub fn variance(state: &TwoModeState, operator: &Array2<Complex64>) -> Result<f64> {
    let mean = expectation(state, operator)?;
    let applied = operator.dot(state.amplitudes());
    let second: f64 = applied.iter().map(|a| a.norm_sqr()).sum();
    let var = second - mean * mean;
    if var < -HERMITICITY_TOL {
        return Err(Error::NotHermitian {
            residue: var.abs(),
        });
    }
    Ok(var.max(0.0))
}

/// Mean Stokes vector (⟨S₁⟩, ⟨S₂⟩, ⟨S₃⟩).
pub fn mean_spin(state: &TwoModeState, ops: &StokesOperators) -> Result<[f64; 3]> {
    Ok([
        expectation(state, &ops.s1)?,
        expectation(state, &ops.s2)?,
        expectation(state, &ops.s3)?,
    ])
}

/// One of the four physical modes, or the diagonal combinations used for
/// photon subtraction: â_D = (â_H + â_V)/√2 and â_D⊥ = (â_H⊥ + â_V⊥)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    H,
    V,
    HPerp,
    VPerp,
    D,
    DPerp,
}

/// Occupation tuple (n_H, n_V, n_H⊥, n_V⊥).
pub type Occupation = [u8; 4];

/// Sparse four-mode state with fixed total photon number.
///
/// Stored as a map from occupation tuple to complex amplitude; map order is
/// deterministic so downstream sums are reproducible. Intermediate states
/// (e.g. right after an annihilation) may be unnormalized or even zero.
#[derive(Debug, Clone)]
pub struct FourModeState {
    n_total: usize,
    amplitudes: BTreeMap<Occupation, Complex64>,
}

impl FourModeState {
    /// Empty (zero) state in the n-photon sector.
    pub fn zero(n_total: usize) -> Self {
        Self {
            n_total,
            amplitudes: BTreeMap::new(),
        }
    }

    /// Basis state |n_H, n_V, n_H⊥, n_V⊥⟩.
    pub fn basis_state(occ: Occupation) -> Self {
        let n_total = occ.iter().map(|&x| x as usize).sum();
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(occ, Complex64::new(1.0, 0.0));
        Self { n_total, amplitudes }
    }

    /// Embeds a two-mode state as (n_H, n_V, 0, 0).
    pub fn from_two_mode(state: &TwoModeState) -> Self {
        let n = state.photon_number();
        let mut amplitudes = BTreeMap::new();
        for (k, amp) in state.amplitudes().iter().enumerate() {
            if amp.norm_sqr() > 0.0 {
                amplitudes.insert([k as u8, (n - k) as u8, 0, 0], *amp);
            }
        }
        Self {
            n_total: n,
            amplitudes,
        }
    }

    pub fn photon_number(&self) -> usize {
        self.n_total
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occ: &Occupation) -> Complex64 {
        self.amplitudes
            .get(occ)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Adds `amp` to the coefficient of `occ`. The tuple must stay in the
    /// state's photon-number sector.
    pub fn add_amplitude(&mut self, occ: Occupation, amp: Complex64) {
        debug_assert_eq!(
            occ.iter().map(|&x| x as usize).sum::<usize>(),
            self.n_total,
            "occupation outside the fixed photon-number sector"
        );
        *self
            .amplitudes
            .entry(occ)
            .or_insert(Complex64::new(0.0, 0.0)) += amp;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// True when every amplitude vanishes (e.g. after annihilating an
    /// unoccupied mode).
    pub fn is_zero(&self) -> bool {
        self.norm_sqr() < NORM_TOL * NORM_TOL
    }

    /// Drops negligible entries.
    pub fn prune(&mut self) {
        self.amplitudes.retain(|_, a| a.norm_sqr() > 1e-30);
    }

    /// Rescales to unit norm; errors on the zero state.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm < NORM_TOL {
            return Err(Error::ZeroNorm);
        }
        for amp in self.amplitudes.values_mut() {
            *amp /= norm;
        }
        Ok(())
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .map(|(occ, a)| a.conj() * other.amplitude(occ))
            .sum()
    }

    /// Mean occupation of one physical mode.
    pub fn mean_occupation(&self, mode: Mode) -> f64 {
        let idx = match mode {
            Mode::H => 0,
            Mode::V => 1,
            Mode::HPerp => 2,
            Mode::VPerp => 3,
            Mode::D | Mode::DPerp => {
                // ⟨n_D⟩ = ‖a_D ψ‖² covers the coherent cross terms.
                return apply_annihilation(self, mode).norm_sqr();
            }
        };
        self.amplitudes
            .iter()
            .map(|(occ, a)| occ[idx] as f64 * a.norm_sqr())
            .sum()
    }
}

fn lower(state: &FourModeState, idx: usize, out: &mut FourModeState, scale: Complex64) {
    for (occ, amp) in state.iter() {
        let n = occ[idx];
        if n == 0 {
            continue;
        }
        let mut lowered = *occ;
        lowered[idx] = n - 1;
        out.add_amplitude(lowered, scale * amp * (n as f64).sqrt());
    }
}

/// â_mode |ψ⟩ with the usual √n factors, unnormalized.
///
/// The diagonal modes expand as â_D = (â_H + â_V)/√2 and
/// â_D⊥ = (â_H⊥ + â_V⊥)/√2. Annihilating an unoccupied mode yields the
/// zero vector ([`FourModeState::is_zero`]), not an error.
pub fn apply_annihilation(state: &FourModeState, mode: Mode) -> FourModeState {
    let n_out = state.photon_number().saturating_sub(1);
    let mut out = FourModeState::zero(n_out);
    if state.photon_number() == 0 {
        return out;
    }
    let one = Complex64::new(1.0, 0.0);
    let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match mode {
        Mode::H => lower(state, 0, &mut out, one),
        Mode::V => lower(state, 1, &mut out, one),
        Mode::HPerp => lower(state, 2, &mut out, one),
        Mode::VPerp => lower(state, 3, &mut out, one),
        Mode::D => {
            lower(state, 0, &mut out, half);
            lower(state, 1, &mut out, half);
        }
        Mode::DPerp => {
            lower(state, 2, &mut out, half);
            lower(state, 3, &mut out, half);
        }
    }
    out.prune();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;
    use approx::assert_relative_eq;

    fn commutator(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
        a.dot(b) - b.dot(a)
    }

    #[test]
    fn s1_is_diagonal_single_photon() {
        let ops = StokesOperators::new(1).unwrap();
        assert_eq!(ops.s1[[0, 0]], Complex64::new(-1.0, 0.0));
        assert_eq!(ops.s1[[1, 1]], Complex64::new(1.0, 0.0));
        assert_eq!(ops.s1[[0, 1]], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn s1_eigenvalues_are_exact() {
        for n in 1..=7 {
            let ops = StokesOperators::new(n).unwrap();
            for k in 0..=n {
                let expected = 2.0 * k as f64 - n as f64;
                assert_eq!(ops.s1[[k, k]].re, expected);
            }
        }
    }

    #[test]
    fn stokes_algebra_commutators() {
        for n in 1..=7 {
            let ops = StokesOperators::new(n).unwrap();
            let pairs = [
                (&ops.s1, &ops.s2, &ops.s3),
                (&ops.s2, &ops.s3, &ops.s1),
                (&ops.s3, &ops.s1, &ops.s2),
            ];
            for (a, b, c) in pairs {
                let lhs = commutator(a, b);
                let rhs = c.mapv(|x| x * Complex64::new(0.0, 2.0));
                let max_dev = (&lhs - &rhs)
                    .iter()
                    .map(|x| x.norm())
                    .fold(0.0f64, f64::max);
                assert!(max_dev < 1e-10, "n = {n}: commutator deviates by {max_dev}");
            }
        }
    }

    #[test]
    fn rejects_zero_photons() {
        assert!(StokesOperators::new(0).is_err());
    }

    #[test]
    fn yurke_mean_spin_and_noise() {
        let state = states::yurke_state(5).unwrap();
        let ops = StokesOperators::new(5).unwrap();
        let s = mean_spin(&state, &ops).unwrap();
        assert_relative_eq!(s[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(s[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s[2], 0.0, epsilon = 1e-12);
        // ⟨S₁²⟩ = 1 so ΔS₁ = 1; Δ²S₃ = (n² + 2n − 1)/2 = 17.
        let s1_sq = expectation(&state, &ops.s1.dot(&ops.s1)).unwrap();
        assert_relative_eq!(s1_sq, 1.0, epsilon = 1e-12);
        assert_relative_eq!(variance(&state, &ops.s3).unwrap(), 17.0, epsilon = 1e-10);

        let state3 = states::yurke_state(3).unwrap();
        let ops3 = StokesOperators::new(3).unwrap();
        assert_relative_eq!(variance(&state3, &ops3.s3).unwrap(), 7.0, epsilon = 1e-10);
    }

    #[test]
    fn uncorrelated_mean_spin_and_noise() {
        let state = states::uncorrelated_state(5).unwrap();
        let ops = StokesOperators::new(5).unwrap();
        let s = mean_spin(&state, &ops).unwrap();
        assert_relative_eq!(s[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(s[1], 5.0, epsilon = 1e-10);
        assert_relative_eq!(s[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(variance(&state, &ops.s1).unwrap(), 5.0, epsilon = 1e-10);
        assert_relative_eq!(variance(&state, &ops.s3).unwrap(), 5.0, epsilon = 1e-10);
    }

    #[test]
    fn expectation_rejects_dimension_mismatch() {
        let state = states::yurke_state(5).unwrap();
        let ops = StokesOperators::new(3).unwrap();
        assert!(matches!(
            expectation(&state, &ops.s1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expectation_reports_non_hermitian() {
        let state = states::uncorrelated_state(2).unwrap();
        let mut op = Array2::<Complex64>::zeros((3, 3));
        op[[0, 1]] = Complex64::new(0.0, 1.0);
        op[[1, 0]] = Complex64::new(0.0, 1.0); // breaks Hermiticity
        assert!(matches!(
            expectation(&state, &op),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn annihilate_single_photon() {
        let state = FourModeState::basis_state([1, 0, 0, 0]);
        let out = apply_annihilation(&state, Mode::H);
        assert_relative_eq!(out.amplitude(&[0, 0, 0, 0]).re, 1.0, epsilon = 1e-15);
        assert_eq!(out.photon_number(), 0);
    }

    #[test]
    fn annihilate_diagonal_on_twin_fock() {
        let state = FourModeState::basis_state([3, 3, 0, 0]);
        let out = apply_annihilation(&state, Mode::D);
        // (√3 |2,3⟩ + √3 |3,2⟩)/√2, squared norm 3 = ⟨n_D⟩.
        let expected = (3.0f64 / 2.0).sqrt();
        assert_relative_eq!(out.amplitude(&[2, 3, 0, 0]).re, expected, epsilon = 1e-12);
        assert_relative_eq!(out.amplitude(&[3, 2, 0, 0]).re, expected, epsilon = 1e-12);
        assert_relative_eq!(out.norm_sqr(), 3.0, epsilon = 1e-12);
        assert_relative_eq!(state.mean_occupation(Mode::D), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn annihilate_empty_mode_is_flagged_zero() {
        let state = FourModeState::basis_state([3, 3, 0, 0]);
        let out = apply_annihilation(&state, Mode::DPerp);
        assert!(out.is_zero());
        let vacuum = FourModeState::basis_state([0, 0, 0, 0]);
        assert!(apply_annihilation(&vacuum, Mode::H).is_zero());
    }

    #[test]
    fn annihilation_decrements_occupation() {
        let state = FourModeState::basis_state([2, 1, 0, 3]);
        for (mode, idx) in [(Mode::H, 0), (Mode::V, 1), (Mode::VPerp, 3)] {
            let before = state.mean_occupation(mode);
            let mut out = apply_annihilation(&state, mode);
            out.normalize().unwrap();
            let after = out
                .iter()
                .map(|(occ, a)| occ[idx] as f64 * a.norm_sqr())
                .sum::<f64>();
            assert_relative_eq!(after, before - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_zero_state() {
        let mut z = FourModeState::zero(2);
        assert!(z.normalize().is_err());
    }
}

//! Inference on coincidence data: least-squares fringe fitting over
//! (φ₀, I, M, s), Poisson-bootstrap Fisher-information bands, and a
//! maximum-likelihood phase estimator.
//!
//! The fit minimizes Σᵢ Σₘ (M·P_m(I, s, φᵢ) − D′ₘ(φᵢ))² on the
//! efficiency-rescaled counts. In global mode the record phases are the
//! known labels plus one fitted offset φ₀; in per-point mode each record
//! gets its own phase while (I, M, s) stay shared and are profiled over
//! a per-record one-dimensional phase search.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{rescale_counts, sample_poisson_counts, CoincidenceRecord, EfficiencyTable, OUTCOMES};
use crate::distinguishability::{MismatchModel, NoiseParameter};
use crate::error::{Error, Result};
use crate::interferometer::PhaseGrid;
use crate::metrology::fisher_information;
use crate::simplex::{golden_section, nelder_mead, SimplexOptions};

/// How the record phases enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// Phases are the record labels plus one fitted offset.
    Global,
    /// One free phase per record; (I, M, s) shared.
    PerPoint,
}

/// Starting point for a single refinement run.
#[derive(Debug, Clone, Copy)]
pub struct FitStart {
    pub phi0: f64,
    pub indistinguishability: f64,
    pub scale: f64,
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub mode: FitMode,
    /// Fix the noise weight instead of fitting it.
    pub pinned_noise: Option<f64>,
    /// Evaluation budget per refinement run.
    pub max_evals: usize,
    pub objective_tol: f64,
    /// Number of phase-offset starts spanning [−π, π) in global mode.
    pub phase_starts: usize,
    /// Bypass the multi-start grid with a known good starting point.
    pub warm_start: Option<FitStart>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: FitMode::Global,
            pinned_noise: None,
            max_evals: 10_000,
            objective_tol: 1e-10,
            phase_starts: 8,
            warm_start: None,
        }
    }
}

/// Fitted fringe parameters with a Gauss–Newton covariance proxy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: FitMode,
    /// Global-mode phase offset.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi0: Option<f64>,
    /// Per-point fitted phases.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phases: Option<Vec<f64>>,
    pub indistinguishability: f64,
    pub scale: f64,
    pub noise: f64,
    pub residual_sum_of_squares: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Standard errors for the free parameters, ordered
    /// [φ₀?, I, M, s?]; `None` when the normal matrix is singular.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_errors: Option<Vec<f64>>,
}

struct Problem<'a> {
    model: &'a MismatchModel,
    labels: Vec<f64>,
    rescaled: Vec<[f64; OUTCOMES]>,
    pinned_noise: Option<f64>,
    mode: FitMode,
    scale_hint: f64,
}

impl Problem<'_> {
    /// Free parameter layout: global [φ₀, I, M, (s)], per-point [I, M, (s)].
    fn param_count(&self) -> usize {
        let base = match self.mode {
            FitMode::Global => 3,
            FitMode::PerPoint => 2,
        };
        base + usize::from(self.pinned_noise.is_none())
    }

    fn unpack(&self, theta: &[f64]) -> (Option<f64>, f64, f64, f64) {
        let (phi0, rest) = match self.mode {
            FitMode::Global => (Some(theta[0]), &theta[1..]),
            FitMode::PerPoint => (None, theta),
        };
        let i = rest[0];
        let m = rest[1];
        let s = self.pinned_noise.unwrap_or_else(|| rest[2]);
        (phi0, i, m, s)
    }

    /// Quadratic pull-back for out-of-box parameters, in objective units.
    fn penalty(&self, i: f64, m: f64, s: f64) -> f64 {
        let mut p = 0.0;
        if i < 0.0 {
            p += i * i;
        } else if i > 1.0 {
            p += (i - 1.0) * (i - 1.0);
        }
        if s < 0.0 {
            p += s * s;
        } else if s > 1.0 {
            p += (s - 1.0) * (s - 1.0);
        }
        if m < 0.0 {
            p += (m / self.scale_hint) * (m / self.scale_hint);
        }
        p * 1e6 * self.scale_hint * self.scale_hint
    }

    fn row_sse(&self, probs: &[f64], scale: f64, rescaled: &[f64; OUTCOMES]) -> f64 {
        probs
            .iter()
            .zip(rescaled)
            .map(|(p, d)| {
                let r = scale * p - d;
                r * r
            })
            .sum()
    }

    fn model_probs(&self, i: f64, s: f64, phi: f64) -> Vec<f64> {
        let noise = NoiseParameter::new(s.clamp(0.0, 1.0)).expect("clamped");
        self.model
            .probabilities_with_noise(i.clamp(0.0, 1.0), noise, phi)
            .expect("clamped parameters")
    }

    /// Objective. In per-point mode the phases are profiled out record by
    /// record; the minimizing phases can be captured through `phases_out`.
    fn objective(&self, theta: &[f64], mut phases_out: Option<&mut Vec<f64>>) -> f64 {
        let (phi0, i, m, s) = self.unpack(theta);
        let penalty = self.penalty(i, m, s);
        let mut sse = 0.0;
        match self.mode {
            FitMode::Global => {
                let phi0 = phi0.expect("global mode");
                for (label, rescaled) in self.labels.iter().zip(&self.rescaled) {
                    let probs = self.model_probs(i, s, label + phi0);
                    sse += self.row_sse(&probs, m, rescaled);
                }
            }
            FitMode::PerPoint => {
                if let Some(out) = phases_out.as_deref_mut() {
                    out.clear();
                }
                for rescaled in &self.rescaled {
                    let row = |phi: f64| {
                        let probs = self.model_probs(i, s, phi);
                        self.row_sse(&probs, m, rescaled)
                    };
                    // Coarse scan over one period, then a local polish.
                    let coarse = 48;
                    let mut best_phi = 0.0;
                    let mut best = f64::INFINITY;
                    for k in 0..coarse {
                        let phi = -std::f64::consts::PI
                            + 2.0 * std::f64::consts::PI * k as f64 / coarse as f64;
                        let v = row(phi);
                        if v < best {
                            best = v;
                            best_phi = phi;
                        }
                    }
                    let half = std::f64::consts::PI / coarse as f64;
                    let (phi, v) = golden_section(row, best_phi - half, best_phi + half, 1e-9);
                    sse += v;
                    if let Some(out) = phases_out.as_deref_mut() {
                        out.push(phi);
                    }
                }
            }
        }
        sse + penalty
    }
}

/// Least-squares fringe fit on rescaled counts.
///
/// Non-convergence is reported through the `converged` flag with the best
/// point found, not as an error.
pub fn fit_fringe(
    records: &[CoincidenceRecord],
    table: &EfficiencyTable,
    config: &FitConfig,
) -> Result<FitResult> {
    if records.is_empty() {
        return Err(Error::EmptyInput("coincidence records"));
    }
    if let Some(s) = config.pinned_noise {
        NoiseParameter::new(s)?;
    }
    let rescaled: Vec<[f64; OUTCOMES]> = records
        .iter()
        .map(|r| rescale_counts(r, table))
        .collect::<Result<_>>()?;
    let total: f64 = rescaled.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateData("all rescaled counts are zero"));
    }
    let scale_hint = total / records.len() as f64;
    let model = MismatchModel::new(5)?;
    let problem = Problem {
        model: &model,
        labels: records.iter().map(|r| r.phase).collect(),
        rescaled,
        pinned_noise: config.pinned_noise,
        mode: config.mode,
        scale_hint,
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let push_start = |starts: &mut Vec<Vec<f64>>, phi0: f64, i: f64, m: f64, s: f64| {
        let mut theta = Vec::new();
        if problem.mode == FitMode::Global {
            theta.push(phi0);
        }
        theta.push(i);
        theta.push(m);
        if problem.pinned_noise.is_none() {
            theta.push(s);
        }
        starts.push(theta);
    };
    if let Some(warm) = config.warm_start {
        push_start(
            &mut starts,
            warm.phi0,
            warm.indistinguishability,
            warm.scale,
            warm.noise,
        );
    } else {
        match config.mode {
            FitMode::Global => {
                let k = config.phase_starts.max(1);
                for j in 0..k {
                    let phi0 = -std::f64::consts::PI
                        + 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                    push_start(&mut starts, phi0, 0.9, scale_hint, 0.02);
                }
            }
            FitMode::PerPoint => {
                push_start(&mut starts, 0.0, 0.9, scale_hint, 0.02);
                push_start(&mut starts, 0.0, 0.5, scale_hint, 0.02);
            }
        }
    }

    let mut steps = Vec::new();
    if problem.mode == FitMode::Global {
        steps.push(0.25);
    }
    steps.push(0.08);
    steps.push(0.2 * scale_hint);
    if problem.pinned_noise.is_none() {
        steps.push(0.04);
    }

    let options = SimplexOptions {
        max_evals: config.max_evals,
        objective_tol: config.objective_tol,
    };
    let mut best: Option<crate::simplex::SimplexOutcome> = None;
    let mut evaluations = 0usize;
    let mut start_values = Vec::with_capacity(starts.len());
    for start in &starts {
        start_values.push(problem.objective(start, None));
        let outcome = nelder_mead(|x| problem.objective(x, None), start, &steps, options);
        evaluations += outcome.evaluations;
        if best
            .as_ref()
            .map(|b| outcome.value < b.value)
            .unwrap_or(true)
        {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one start");
    debug_assert!(start_values.iter().all(|&v| best.value <= v + 1e-9));

    let (phi0, i, m, s) = problem.unpack(&best.point);
    let (i, s) = (i.clamp(0.0, 1.0), s.clamp(0.0, 1.0));
    let m = m.max(0.0);
    let mut phases = None;
    let mut rss = best.value;
    if config.mode == FitMode::PerPoint {
        let mut fitted = Vec::new();
        rss = problem.objective(&best.point, Some(&mut fitted));
        phases = Some(fitted);
    }

    let std_errors = covariance_proxy(&problem, &best.point, rss);
    Ok(FitResult {
        mode: config.mode,
        phi0,
        phases,
        indistinguishability: i,
        scale: m,
        noise: s,
        residual_sum_of_squares: rss,
        converged: best.converged,
        evaluations,
        std_errors,
    })
}

/// Gauss–Newton standard errors from a finite-difference Jacobian of the
/// residual vector at the optimum.
fn covariance_proxy(problem: &Problem<'_>, theta: &[f64], rss: f64) -> Option<Vec<f64>> {
    let p = problem.param_count();
    let n_res = problem.rescaled.len() * OUTCOMES;
    if n_res <= p {
        return None;
    }
    let residuals = |theta: &[f64]| -> Vec<f64> {
        let (phi0, i, m, s) = problem.unpack(theta);
        let mut out = Vec::with_capacity(n_res);
        for (idx, rescaled) in problem.rescaled.iter().enumerate() {
            let phi = match problem.mode {
                FitMode::Global => problem.labels[idx] + phi0.expect("global"),
                FitMode::PerPoint => problem.labels[idx],
            };
            let probs = problem.model_probs(i, s, phi);
            for (pm, d) in probs.iter().zip(rescaled) {
                out.push(m * pm - d);
            }
        }
        out
    };
    let mut jac = vec![vec![0.0; p]; n_res];
    for j in 0..p {
        let h = if j == 2 || (problem.mode == FitMode::PerPoint && j == 1) {
            1e-6 * problem.scale_hint.max(1.0)
        } else {
            1e-5
        };
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let rp = residuals(&plus);
        let rm = residuals(&minus);
        for (row, (a, b)) in jac.iter_mut().zip(rp.iter().zip(rm)) {
            row[j] = (a - b) / (2.0 * h);
        }
    }
    // Normal matrix JᵀJ and its inverse.
    let mut normal = vec![vec![0.0; p]; p];
    for row in &jac {
        for a in 0..p {
            for b in 0..p {
                normal[a][b] += row[a] * row[b];
            }
        }
    }
    let inv = invert(&mut normal)?;
    let sigma2 = rss / (n_res - p) as f64;
    Some((0..p).map(|j| (sigma2 * inv[j][j]).max(0.0).sqrt()).collect())
}

/// Gauss-Jordan inverse of a small symmetric positive matrix.
fn invert(matrix: &mut [Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = matrix.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if matrix[row][col].abs() > matrix[pivot][col].abs() {
                pivot = row;
            }
        }
        if matrix[pivot][col].abs() < 1e-300 {
            return None;
        }
        matrix.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = matrix[col][col];
        for x in matrix[col].iter_mut() {
            *x /= scale;
        }
        for x in inv[col].iter_mut() {
            *x /= scale;
        }
        for row in 0..n {
            if row != col {
                let factor = matrix[row][col];
                if factor != 0.0 {
                    for j in 0..n {
                        matrix[row][j] -= factor * matrix[col][j];
                        inv[row][j] -= factor * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Poisson-bootstrap Fisher-information band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloBand {
    pub grid: PhaseGrid,
    pub iterations: usize,
    pub seed: u64,
    /// Iterations whose refit failed; excluded from the quantiles.
    pub failures: usize,
    /// Fisher samples indexed [grid point][successful iteration].
    pub samples: Vec<Vec<f64>>,
    pub q025: Vec<f64>,
    pub q50: Vec<f64>,
    pub q975: Vec<f64>,
}

impl MonteCarloBand {
    /// 95% band width per grid point.
    pub fn widths(&self) -> Vec<f64> {
        self.q975
            .iter()
            .zip(&self.q025)
            .map(|(hi, lo)| hi - lo)
            .collect()
    }
}

/// Repeats {resample raw counts with Poisson noise → rescale → refit →
/// Fisher curve of the fitted model} and aggregates per-phase quantiles.
///
/// Iterations use independent ChaCha streams of the master seed and merge
/// by index, so the band is reproducible regardless of thread scheduling.
pub fn monte_carlo_fisher(
    records: &[CoincidenceRecord],
    table: &EfficiencyTable,
    iterations: usize,
    seed: u64,
    config: &FitConfig,
    fd_step: f64,
) -> Result<MonteCarloBand> {
    let base = fit_fringe(records, table, config)?;
    if !base.converged {
        return Err(Error::NonConvergence {
            evaluations: base.evaluations,
            best: base.residual_sum_of_squares,
        });
    }
    let warm = FitStart {
        phi0: base.phi0.unwrap_or(0.0),
        indistinguishability: base.indistinguishability,
        scale: base.scale,
        noise: base.noise,
    };
    let refit_config = FitConfig {
        warm_start: Some(warm),
        ..config.clone()
    };
    let model = MismatchModel::new(5)?;
    let labels: Vec<f64> = records.iter().map(|r| r.phase).collect();

    let runs: Vec<Option<Vec<f64>>> = (0..iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(it as u64 + 1);
            let mut resampled = Vec::with_capacity(records.len());
            for record in records {
                match sample_poisson_counts(&record.counts.clone(), record.phase, &mut rng) {
                    Ok(r) => resampled.push(r),
                    Err(_) => return None,
                }
            }
            let fit = match fit_fringe(&resampled, table, &refit_config) {
                Ok(f) if f.converged => f,
                _ => return None,
            };
            let noise = NoiseParameter::new(fit.noise).ok()?;
            let phi0 = fit.phi0.unwrap_or(0.0);
            let dist = |phi: f64| {
                model.probabilities_with_noise(fit.indistinguishability, noise, phi)
            };
            labels
                .iter()
                .map(|&label| fisher_information(dist, label + phi0, fd_step).ok())
                .collect::<Option<Vec<f64>>>()
        })
        .collect();

    let mut samples = vec![Vec::new(); labels.len()];
    let mut failures = 0usize;
    for run in runs {
        match run {
            Some(values) => {
                for (slot, v) in samples.iter_mut().zip(values) {
                    slot.push(v);
                }
            }
            None => failures += 1,
        }
    }
    if samples.first().map(|s| s.is_empty()).unwrap_or(true) {
        return Err(Error::DegenerateData("every bootstrap iteration failed"));
    }
    let grid = PhaseGrid::new(labels).map_err(|_| {
        Error::DegenerateData("record phases must be strictly increasing for a band")
    })?;
    let quantile_of = |sorted: &[f64], q: f64| -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    let mut q025 = Vec::new();
    let mut q50 = Vec::new();
    let mut q975 = Vec::new();
    for slot in &samples {
        let mut sorted = slot.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        q025.push(quantile_of(&sorted, 0.025));
        q50.push(quantile_of(&sorted, 0.5));
        q975.push(quantile_of(&sorted, 0.975));
    }
    Ok(MonteCarloBand {
        grid,
        iterations,
        seed,
        failures,
        samples,
        q025,
        q50,
        q975,
    })
}

/// Maximum-likelihood phase estimate from outcome counts at one setting.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MleEstimate {
    pub phi: f64,
    /// Observed information −ℓ″(φ̂) of the whole sample.
    pub observed_information: f64,
    /// Set when the maximum sits on the search-interval edge.
    pub at_boundary: bool,
}

/// Maximizes the multinomial log-likelihood over the search interval by a
/// coarse scan followed by golden-section polish.
pub fn mle_phase<F>(counts: &[f64], model: F, interval: (f64, f64)) -> Result<MleEstimate>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let (lo, hi) = interval;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidGrid);
    }
    if counts.iter().any(|&c| c < 0.0) || counts.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateData("counts must be nonnegative, not all zero"));
    }
    let neg_log_likelihood = |phi: f64| -> f64 {
        match model(phi) {
            Ok(p) => {
                if p.len() != counts.len() {
                    return f64::INFINITY;
                }
                let mut ll = 0.0;
                for (c, pm) in counts.iter().zip(p) {
                    if *c > 0.0 {
                        if pm <= 0.0 {
                            return f64::INFINITY;
                        }
                        ll += c * pm.ln();
                    }
                }
                -ll
            }
            Err(_) => f64::INFINITY,
        }
    };

    let coarse = 64usize;
    let mut best_idx = 0usize;
    let mut best = f64::INFINITY;
    for k in 0..=coarse {
        let phi = lo + (hi - lo) * k as f64 / coarse as f64;
        let v = neg_log_likelihood(phi);
        if v < best {
            best = v;
            best_idx = k;
        }
    }
    let span = (hi - lo) / coarse as f64;
    let bracket_lo = (lo + span * best_idx.saturating_sub(1) as f64).max(lo);
    let bracket_hi = (lo + span * (best_idx + 1) as f64).min(hi);
    let (phi_hat, _) = golden_section(neg_log_likelihood, bracket_lo, bracket_hi, 1e-10);

    let h = 1e-5;
    let observed_information = if phi_hat - h > lo && phi_hat + h < hi {
        let f0 = neg_log_likelihood(phi_hat);
        let fp = neg_log_likelihood(phi_hat + h);
        let fm = neg_log_likelihood(phi_hat - h);
        ((fp - 2.0 * f0 + fm) / (h * h)).max(0.0)
    } else {
        0.0
    };
    let edge_tol = 1e-6 * (hi - lo);
    Ok(MleEstimate {
        phi: phi_hat,
        observed_information,
        at_boundary: phi_hat - lo < edge_tol || hi - phi_hat < edge_tol,
    })
}

/// Synthetic coincidence records from the mismatch model.
///
/// With `noisy` unset the exact expected rates are written, which lets
/// round-trip tests recover the generating parameters to solver precision.
#[allow(clippy::too_many_arguments)]
pub fn simulate_records(
    grid: &PhaseGrid,
    phi0: f64,
    indistinguishability: f64,
    scale: f64,
    noise: f64,
    table: &EfficiencyTable,
    noisy: Option<&mut ChaCha8Rng>,
) -> Result<Vec<CoincidenceRecord>> {
    let model = MismatchModel::new(5)?;
    let s = NoiseParameter::new(noise)?;
    let mut records = Vec::with_capacity(grid.len());
    let mut rng = noisy;
    for &label in grid.values() {
        let probs = model.probabilities_with_noise(indistinguishability, s, label + phi0)?;
        let probs: [f64; OUTCOMES] = probs
            .try_into()
            .map_err(|_| Error::DimensionMismatch { left: 0, right: OUTCOMES })?;
        let rates = crate::detector::expected_counts(&probs, scale, table)?;
        let record = match rng.as_deref_mut() {
            Some(r) => sample_poisson_counts(&rates, label, r)?,
            None => CoincidenceRecord::new(label, rates)?,
        };
        records.push(record);
    }
    Ok(records)
}

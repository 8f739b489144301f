//! Statistics on local-energy time series.
//!
//! The VMC mean and its blocked error bar, the autocorrelation integral that
//! gives the second-order energy, and the action moments whose reduced
//! cumulants grow linearly in the projection time with slope `±ε_n`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest post-burn-in series accepted by the series estimators.
pub const MIN_SERIES_LEN: usize = 1000;
/// Sokal window constant: the cutoff lag `k` satisfies `k ≥ c τ_int(k)`.
pub const SOKAL_WINDOW: f64 = 6.0;
/// Blocking levels are kept while they hold at least this many blocks.
pub const MIN_BLOCKS: usize = 32;
pub const DEFAULT_BATCHES: usize = 20;

/// Local energies `W(R_i)` sampled every `step` units of imaginary time.
/// The leading `burn_in` samples are stored but ignored by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnergySeries {
    values: Vec<f64>,
    step: f64,
    burn_in: usize,
}

impl LocalEnergySeries {
    pub fn new(values: Vec<f64>, step: f64, burn_in: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::ArgumentRange(format!(
                "sample step must be > 0, got {step}"
            )));
        }
        if values.len() <= burn_in {
            return Err(Error::SeriesTooShort(format!(
                "{} samples with burn-in {burn_in}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ArgumentRange(format!(
                "non-finite local energy at sample {i}"
            )));
        }
        Ok(LocalEnergySeries {
            values,
            step,
            burn_in,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Samples after burn-in.
    pub fn samples(&self) -> &[f64] {
        &self.values[self.burn_in..]
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// Imaginary time covered by the post-burn-in samples.
    pub fn duration(&self) -> f64 {
        self.samples().len() as f64 * self.step
    }

    /// Two-column CSV, `step,W`, one row per stored sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,W\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v:e}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, step: f64, burn_in: usize) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("step")) {
                continue;
            }
            let field = line.rsplit(',').next().unwrap_or(line).trim();
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("line {}: bad local energy {field:?}", lineno + 1))
            })?;
            values.push(v);
        }
        Self::new(values, step, burn_in)
    }
}

/// A Monte Carlo estimate. `autocorr_time` is in imaginary-time units;
/// it is zero when not applicable, e.g. for fitted quantities, where
/// `effective_samples` counts the independent batches instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub autocorr_time: f64,
    pub effective_samples: f64,
}

impl EstimateWithError {
    /// Equal-weight average of independent estimates of the same quantity.
    pub fn combine(parts: &[EstimateWithError]) -> Option<EstimateWithError> {
        if parts.is_empty() {
            return None;
        }
        let k = parts.len() as f64;
        Some(EstimateWithError {
            mean: parts.iter().map(|p| p.mean).sum::<f64>() / k,
            std_error: parts
                .iter()
                .map(|p| p.std_error.powi(2))
                .sum::<f64>()
                .sqrt()
                / k,
            autocorr_time: parts.iter().map(|p| p.autocorr_time).sum::<f64>() / k,
            effective_samples: parts.iter().map(|p| p.effective_samples).sum(),
        })
    }

    /// `|mean - target|` in units of the standard error.
    pub fn deviation_sigma(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error
    }
}

/// Linear extrapolation to zero step from estimates at two step sizes.
pub fn extrapolate_to_zero(
    a: (f64, EstimateWithError),
    b: (f64, EstimateWithError),
) -> EstimateWithError {
    let (ea, xa) = a;
    let (eb, xb) = b;
    let wa = -eb / (ea - eb);
    let wb = ea / (ea - eb);
    EstimateWithError {
        mean: wa * xa.mean + wb * xb.mean,
        std_error: ((wa * xa.std_error).powi(2) + (wb * xb.std_error).powi(2)).sqrt(),
        autocorr_time: 0.0,
        effective_samples: xa.effective_samples + xb.effective_samples,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockingLevel {
    pub block_size: usize,
    pub blocks: usize,
    pub std_error: f64,
    pub error_of_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingAnalysis {
    pub mean: f64,
    pub levels: Vec<BlockingLevel>,
    /// First level whose error no longer grows significantly.
    pub plateau: Option<usize>,
}

impl BlockingAnalysis {
    /// Largest standard error among the plateau level and the two above it.
    pub fn plateau_error(&self) -> Option<f64> {
        let p = self.plateau?;
        let hi = (p + 3).min(self.levels.len());
        Some(
            self.levels[p..hi]
                .iter()
                .map(|l| l.std_error)
                .fold(0.0, f64::max),
        )
    }
}

/// Flyvbjerg-Petersen blocking: repeatedly average neighbouring pairs and
/// track the naive standard error of the block means.
pub fn blocking_analysis(values: &[f64]) -> BlockingAnalysis {
    let n = values.len();
    let mean = if n == 0 {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / n as f64
    };
    let mut levels = Vec::new();
    let mut blocks: Vec<f64> = values.to_vec();
    let mut size = 1;
    while blocks.len() >= MIN_BLOCKS {
        let m = blocks.len() as f64;
        let bm = blocks.iter().sum::<f64>() / m;
        let var = blocks.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (m - 1.0);
        let se = (var / m).sqrt();
        levels.push(BlockingLevel {
            block_size: size,
            blocks: blocks.len(),
            std_error: se,
            error_of_error: se / (2.0 * (m - 1.0)).sqrt(),
        });
        blocks = blocks
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect();
        size *= 2;
    }
    let plateau = (0..levels.len().saturating_sub(1)).find(|&k| {
        let (a, b) = (&levels[k], &levels[k + 1]);
        b.std_error - a.std_error <= 2.0 * b.error_of_error.max(a.error_of_error)
    });
    BlockingAnalysis {
        mean,
        levels,
        plateau,
    }
}

/// Autocovariance `c(k) = (1/N) Σ_i (x_i - x̄)(x_{i+k} - x̄)` for
/// `k = 0..=max_lag`, by zero-padded FFT.
pub fn autocovariance(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    autocovariance_about(values, mean, max_lag)
}

fn autocovariance_about(values: &[f64], mean: f64, max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    buf.iter()
        .take(max_lag.min(n - 1) + 1)
        .map(|z| z.re * scale)
        .collect()
}

/// Integrated autocorrelation time in steps, `τ_int = ½ + Σ_{k=1}^{K} ρ(k)`,
/// with the smallest window `K ≥ c τ_int(K)`. Returns `(τ_int, K)`.
pub fn integrated_autocorrelation(values: &[f64], window_constant: f64) -> Result<(f64, usize)> {
    let n = values.len();
    let max_lag = n / 4;
    let c = autocovariance(values, max_lag);
    if c.is_empty() || c[0] == 0.0 {
        return Ok((0.5, 0));
    }
    sokal_window(&c, window_constant).ok_or_else(|| {
        Error::WindowSelection(format!(
            "no Sokal window up to lag {max_lag} for {n} samples"
        ))
    })
}

fn sokal_window(c: &[f64], window_constant: f64) -> Option<(f64, usize)> {
    let mut tau = 0.5;
    for (k, ck) in c.iter().enumerate().skip(1) {
        tau += ck / c[0];
        if k as f64 >= window_constant * tau {
            return Some((tau, k));
        }
    }
    None
}

/// Blocked mean of correlated samples taken every `interval` time units.
pub fn blocked_estimate(values: &[f64], interval: f64) -> Result<EstimateWithError> {
    let analysis = blocking_analysis(values);
    let err = analysis.plateau_error().ok_or_else(|| {
        Error::SeriesTooShort(format!("no blocking plateau for {} samples", values.len()))
    })?;
    let naive = analysis.levels[0].std_error;
    let ratio = if naive > 0.0 {
        (err / naive).powi(2)
    } else {
        1.0
    };
    Ok(EstimateWithError {
        mean: analysis.mean,
        std_error: err,
        autocorr_time: 0.5 * ratio * interval,
        effective_samples: values.len() as f64 / ratio,
    })
}

/// `⟨W⟩` over the post-burn-in samples with a blocked error bar; the
/// autocorrelation time is the Sokal estimate.
pub fn vmc_estimate(series: &LocalEnergySeries) -> Result<EstimateWithError> {
    let xs = series.samples();
    if xs.len() < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort(format!(
            "{} samples after burn-in, need {MIN_SERIES_LEN}",
            xs.len()
        )));
    }
    let mut est = blocked_estimate(xs, series.step())?;
    let (tau, _) = integrated_autocorrelation(xs, SOKAL_WINDOW)?;
    est.autocorr_time = tau * series.step();
    est.effective_samples = xs.len() as f64 / (2.0 * tau);
    Ok(est)
}

/// `ε̂_2 = -ε [c(0)/2 + Σ_{k=1}^{K} c(k)]` with the Sokal window `K`.
/// The error bar comes from the spread over contiguous batches, each
/// evaluated about the global mean.
pub fn autocorrelation_integral(series: &LocalEnergySeries) -> Result<EstimateWithError> {
    let xs = series.samples();
    let n = xs.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort(format!(
            "{n} samples after burn-in, need {MIN_SERIES_LEN}"
        )));
    }
    let eps = series.step();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c = autocovariance_about(xs, mean, n / 4);
    if c[0] == 0.0 {
        return Ok(EstimateWithError {
            mean: 0.0,
            std_error: 0.0,
            autocorr_time: 0.0,
            effective_samples: n as f64,
        });
    }
    let (tau, window) = sokal_window(&c, SOKAL_WINDOW).ok_or_else(|| {
        Error::WindowSelection(format!(
            "no Sokal window up to lag {} for {n} samples",
            n / 4
        ))
    })?;
    let integral = |c: &[f64]| -eps * (0.5 * c[0] + c[1..=window].iter().sum::<f64>());

    let mut batches = DEFAULT_BATCHES;
    while batches > 4 && n / batches < 10 * window {
        batches -= 1;
    }
    if n / batches < 10 * window {
        return Err(Error::SeriesTooShort(format!(
            "{n} samples too few for batches of at least {} against window {window}",
            10 * window
        )));
    }
    let len = n / batches;
    let parts: Vec<f64> = (0..batches)
        .map(|b| {
            integral(&autocovariance_about(
                &xs[b * len..(b + 1) * len],
                mean,
                window,
            ))
        })
        .collect();
    let pm = parts.iter().sum::<f64>() / batches as f64;
    let spread = parts.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(EstimateWithError {
        mean: integral(&c),
        std_error: (spread / batches as f64).sqrt(),
        autocorr_time: tau * eps,
        effective_samples: n as f64 / (2.0 * tau),
    })
}

/// Reduced cumulants `γ_n` from `λ_n = ⟨S^n⟩/n!`: `λ[0]` is ignored,
/// `γ_n = λ_n - Σ_{k=1}^{n-1} (n-k)/n γ_{n-k} λ_k`. Element 0 of the result
/// is zero.
pub fn reduced_cumulants(lambda: &[f64]) -> Vec<f64> {
    let mut gamma = vec![0.0; lambda.len()];
    for n in 1..lambda.len() {
        let mut g = lambda[n];
        for k in 1..n {
            g -= (n - k) as f64 / n as f64 * gamma[n - k] * lambda[k];
        }
        gamma[n] = g;
    }
    gamma
}

/// Ordinary cumulants from raw moments `μ_n = ⟨S^n⟩` (`μ[0]` ignored):
/// `κ_n = μ_n - Σ_{k=1}^{n-1} C(n-1, k) κ_{n-k} μ_k`.
pub fn cumulants_from_moments(mu: &[f64]) -> Vec<f64> {
    let mut kappa = vec![0.0; mu.len()];
    for n in 1..mu.len() {
        let mut k_n = mu[n];
        let mut binom = 1.0;
        for k in 1..n {
            binom *= (n - k) as f64 / k as f64;
            k_n -= binom * kappa[n - k] * mu[k];
        }
        kappa[n] = k_n;
    }
    kappa
}

/// Moments of the windowed action `S_τ = ∫_t^{t+τ} W dt'` (trapezoid rule)
/// over every window of the series, with per-batch power sums for
/// resampling. `lambda[t][n] = ⟨S^n⟩/n!` at `tau_grid[t]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionMoments {
    pub tau_grid: Vec<f64>,
    pub max_order: usize,
    pub lambda: Vec<Vec<f64>>,
    pub lambda_error: Vec<Vec<f64>>,
    /// `batch_sums[b][t][n] = Σ S^n` over the windows starting in batch `b`;
    /// index `n = 0` holds the window count.
    pub batch_sums: Vec<Vec<Vec<f64>>>,
}

impl ActionMoments {
    fn lambda_from_sums(sums: &[f64]) -> Vec<f64> {
        let mut fact = 1.0;
        let mut out = vec![1.0; sums.len()];
        for n in 1..sums.len() {
            fact *= n as f64;
            out[n] = sums[n] / sums[0] / fact;
        }
        out
    }

    /// `λ` at each grid point with batch `skip` left out.
    fn leave_one_out(&self, skip: usize) -> Vec<Vec<f64>> {
        (0..self.tau_grid.len())
            .map(|t| {
                let mut sums = vec![0.0; self.max_order + 1];
                for (b, batch) in self.batch_sums.iter().enumerate() {
                    if b != skip {
                        for (s, x) in sums.iter_mut().zip(&batch[t]) {
                            *s += x;
                        }
                    }
                }
                Self::lambda_from_sums(&sums)
            })
            .collect()
    }
}

/// Windows of `round(τ/ε)` steps; the realized grid is reported.
pub fn action_moments(
    series: &LocalEnergySeries,
    tau_grid: &[f64],
    max_order: usize,
) -> Result<ActionMoments> {
    action_moments_batched(series, tau_grid, max_order, DEFAULT_BATCHES)
}

pub fn action_moments_batched(
    series: &LocalEnergySeries,
    tau_grid: &[f64],
    max_order: usize,
    batches: usize,
) -> Result<ActionMoments> {
    if max_order == 0 {
        return Err(Error::ArgumentRange(
            "action moments need max_order >= 1".into(),
        ));
    }
    if batches < 2 {
        return Err(Error::ArgumentRange(
            "action moments need at least 2 batches".into(),
        ));
    }
    let xs = series.samples();
    let eps = series.step();
    let n = xs.len();
    let mut steps = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let m = (tau / eps).round();
        if tau.is_nan() || tau <= 0.0 || m < 1.0 {
            return Err(Error::TauGrid(format!(
                "τ = {tau} is shorter than one step {eps}"
            )));
        }
        let m = m as usize;
        if m + batches >= n {
            return Err(Error::TauGrid(format!(
                "τ = {tau} spans {m} steps but the series has {n}"
            )));
        }
        if steps.last().is_some_and(|&p| p >= m) {
            return Err(Error::TauGrid(
                "τ grid must be strictly increasing in steps".into(),
            ));
        }
        steps.push(m);
    }
    // Prefix sums of the centred series keep the window sums well conditioned.
    let mean = xs.iter().sum::<f64>() / n as f64;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for x in xs {
        acc += x - mean;
        prefix.push(acc);
    }
    let mut batch_sums = vec![vec![vec![0.0; max_order + 1]; steps.len()]; batches];
    for (t, &m) in steps.iter().enumerate() {
        let windows = n - m;
        for s in 0..windows {
            let centred =
                prefix[s + m + 1] - prefix[s] - 0.5 * ((xs[s] - mean) + (xs[s + m] - mean));
            let action = eps * centred + m as f64 * eps * mean;
            let b = s * batches / windows;
            let sums = &mut batch_sums[b][t];
            let mut p = 1.0;
            for x in sums.iter_mut() {
                *x += p;
                p *= action;
            }
        }
    }
    let mut moments = ActionMoments {
        tau_grid: steps.iter().map(|&m| m as f64 * eps).collect(),
        max_order,
        lambda: Vec::new(),
        lambda_error: Vec::new(),
        batch_sums,
    };
    for t in 0..steps.len() {
        let mut total = vec![0.0; max_order + 1];
        for batch in &moments.batch_sums {
            for (s, x) in total.iter_mut().zip(&batch[t]) {
                *s += x;
            }
        }
        moments.lambda.push(ActionMoments::lambda_from_sums(&total));
        let per_batch: Vec<Vec<f64>> = moments
            .batch_sums
            .iter()
            .map(|b| ActionMoments::lambda_from_sums(&b[t]))
            .collect();
        let bf = batches as f64;
        moments.lambda_error.push(
            (0..=max_order)
                .map(|k| {
                    let m = per_batch.iter().map(|l| l[k]).sum::<f64>() / bf;
                    let v = per_batch.iter().map(|l| (l[k] - m).powi(2)).sum::<f64>() / (bf - 1.0);
                    (v / bf).sqrt()
                })
                .collect(),
        );
    }
    Ok(moments)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub min_tau: Option<f64>,
    pub max_tau: Option<f64>,
    /// Residuals beyond this many jackknife errors fail the linearity check.
    pub linearity_z: f64,
    /// Orders above 4 are noise-dominated and must be asked for explicitly.
    pub allow_high_orders: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            min_tau: None,
            max_tau: None,
            linearity_z: 5.0,
            allow_high_orders: false,
        }
    }
}

pub const DEFAULT_STOCHASTIC_ORDER: usize = 3;

/// Linear fit `γ_n(τ) ≈ a + b τ` for one order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub order: usize,
    /// `ε_n = (-1)^{n+1} b`, with a jackknife error over batches.
    pub estimate: EstimateWithError,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub max_residual_z: f64,
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), c)| c * (a - xm) * (b - ym))
        .sum();
    let sxx: f64 = x.iter().zip(w).map(|(a, c)| c * (a - xm).powi(2)).sum();
    let slope = sxy / sxx;
    (ym - slope * xm, slope)
}

/// Stochastic estimates of `ε_1 … ε_max_order` from the late-time slopes of
/// the reduced cumulants.
pub fn stochastic_epsilons(
    moments: &ActionMoments,
    max_order: usize,
    options: &FitOptions,
) -> Result<Vec<OrderFit>> {
    if max_order == 0 || max_order > moments.max_order {
        return Err(Error::ArgumentRange(format!(
            "order {max_order} outside 1..={} available moments",
            moments.max_order
        )));
    }
    if max_order > 4 && !options.allow_high_orders {
        return Err(Error::ArgumentRange(format!(
            "stochastic order {max_order} > 4 needs allow_high_orders"
        )));
    }
    let picked: Vec<usize> = (0..moments.tau_grid.len())
        .filter(|&t| {
            let tau = moments.tau_grid[t];
            options.min_tau.is_none_or(|m| tau >= m) && options.max_tau.is_none_or(|m| tau <= m)
        })
        .collect();
    if picked.len() < 4 {
        return Err(Error::TauGrid(format!(
            "{} τ points in the fit range, need 4",
            picked.len()
        )));
    }
    let x: Vec<f64> = picked.iter().map(|&t| moments.tau_grid[t]).collect();
    let full: Vec<Vec<f64>> = picked
        .iter()
        .map(|&t| reduced_cumulants(&moments.lambda[t]))
        .collect();
    let batches = moments.batch_sums.len();
    let jack: Vec<Vec<Vec<f64>>> = (0..batches)
        .map(|b| {
            let loo = moments.leave_one_out(b);
            picked.iter().map(|&t| reduced_cumulants(&loo[t])).collect()
        })
        .collect();
    let bf = batches as f64;
    let jk_var = |vals: &[f64]| {
        let m = vals.iter().sum::<f64>() / bf;
        (bf - 1.0) / bf * vals.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };

    let mut fits = Vec::with_capacity(max_order);
    for order in 1..=max_order {
        let y: Vec<f64> = full.iter().map(|g| g[order]).collect();
        let var: Vec<f64> = (0..picked.len())
            .map(|i| jk_var(&jack.iter().map(|j| j[i][order]).collect::<Vec<_>>()))
            .collect();
        let w: Vec<f64> = if var.iter().all(|&v| v > 0.0) {
            var.iter().map(|v| 1.0 / v).collect()
        } else {
            vec![1.0; var.len()]
        };
        let (a, b) = weighted_line(&x, &y, &w);
        let mut slopes = Vec::with_capacity(batches);
        let mut residuals = vec![Vec::with_capacity(batches); x.len()];
        for j in &jack {
            let yj: Vec<f64> = j.iter().map(|g| g[order]).collect();
            let (aj, bj) = weighted_line(&x, &yj, &w);
            slopes.push(bj);
            for (i, r) in residuals.iter_mut().enumerate() {
                r.push(yj[i] - aj - bj * x[i]);
            }
        }
        let sw: f64 = w.iter().sum();
        let ym = y.iter().zip(&w).map(|(p, q)| p * q).sum::<f64>() / sw;
        let ss_tot: f64 = y.iter().zip(&w).map(|(p, q)| q * (p - ym).powi(2)).sum();
        let ss_res: f64 = (0..x.len())
            .map(|i| w[i] * (y[i] - a - b * x[i]).powi(2))
            .sum();
        let r_squared = if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else {
            1.0
        };
        let mut max_z: f64 = 0.0;
        for i in 0..x.len() {
            let r = y[i] - a - b * x[i];
            let sr = jk_var(&residuals[i]).sqrt();
            let tol = sr + 1e-12 * (1.0 + y[i].abs());
            max_z = max_z.max(r.abs() / tol);
        }
        if max_z > options.linearity_z {
            return Err(Error::NonLinearity(format!(
                "γ_{order}(τ) residual at {max_z:.1} jackknife errors; start the fit later"
            )));
        }
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        fits.push(OrderFit {
            order,
            estimate: EstimateWithError {
                mean: sign * b,
                std_error: jk_var(&slopes).sqrt(),
                autocorr_time: 0.0,
                effective_samples: bf,
            },
            slope: b,
            intercept: a,
            r_squared,
            max_residual_z: max_z,
        });
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn series_validation() {
        assert!(LocalEnergySeries::new(vec![1.0; 5], 0.1, 5).is_err());
        assert!(LocalEnergySeries::new(vec![1.0, f64::NAN], 0.1, 0).is_err());
        assert!(LocalEnergySeries::new(vec![1.0], 0.0, 0).is_err());
        let s = LocalEnergySeries::new(vec![1.0, 2.0, 3.0], 0.5, 1).unwrap();
        assert_eq!(s.samples(), &[2.0, 3.0]);
        assert_eq!(s.duration(), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let s = LocalEnergySeries::new(vec![0.5, -1.25e-3, 7.0], 0.01, 1).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("step,W\n0,"));
        assert_eq!(LocalEnergySeries::from_csv(&text, 0.01, 1).unwrap(), s);
        assert!(LocalEnergySeries::from_csv("step,W\n0,abc\n", 0.01, 0).is_err());
    }

    #[test]
    fn constant_series_has_zero_error() {
        let s = LocalEnergySeries::new(vec![0.5; 5000], 0.01, 0).unwrap();
        let e = vmc_estimate(&s).unwrap();
        assert_eq!(e.mean, 0.5);
        assert_eq!(e.std_error, 0.0);
        let a = autocorrelation_integral(&s).unwrap();
        assert_eq!(a.mean, 0.0);
    }

    #[test]
    fn short_series_rejected() {
        let s = LocalEnergySeries::new(vec![0.5; 999], 0.01, 0).unwrap();
        assert!(matches!(vmc_estimate(&s), Err(Error::SeriesTooShort(_))));
        assert!(matches!(
            autocorrelation_integral(&s),
            Err(Error::SeriesTooShort(_))
        ));
    }

    #[test]
    fn fft_autocovariance_matches_direct_sum() {
        let mut r = rng::stream(3, "acov", 0);
        let xs: Vec<f64> = (0..777).map(|_| r.random::<f64>()).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let c = autocovariance(&xs, 50);
        for (k, ck) in c.iter().enumerate() {
            let direct: f64 = (0..xs.len() - k)
                .map(|i| (xs[i] - m) * (xs[i + k] - m))
                .sum::<f64>()
                / n;
            assert!((ck - direct).abs() < 1e-12);
        }
    }

    fn ar1(phi: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, "ar1", 0);
        let mut x = 0.0;
        let stationary = sigma / (1.0 - phi * phi).sqrt();
        x += stationary * r.sample::<f64, _>(StandardNormal);
        (0..n)
            .map(|_| {
                x = phi * x + sigma * r.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn iid_blocking_error_is_naive() {
        let n = 100_000;
        let xs = ar1(0.0, 1.0, n, 1);
        let a = blocking_analysis(&xs);
        let err = a.plateau_error().unwrap();
        assert!((err * (n as f64).sqrt() - 1.0).abs() < 0.1, "{err}");
    }

    #[test]
    fn ar1_error_and_autocorrelation_time() {
        // τ_int = ½ (1+φ)/(1-φ) steps, asymptotic variance of the mean
        // σ²/(1-φ)² / N.
        let phi: f64 = 0.9;
        let n = 400_000;
        let xs = ar1(phi, 1.0, n, 2);
        let s = LocalEnergySeries::new(xs, 0.1, 0).unwrap();
        let e = vmc_estimate(&s).unwrap();
        let exact_err = 1.0 / (1.0 - phi) / (n as f64).sqrt();
        assert!(
            (e.std_error / exact_err - 1.0).abs() < 0.15,
            "{} vs {exact_err}",
            e.std_error
        );
        let tau = 0.5 * (1.0 + phi) / (1.0 - phi);
        assert!((e.autocorr_time / 0.1 / tau - 1.0).abs() < 0.15);
        assert!(e.deviation_sigma(0.0) < 4.0);
    }

    #[test]
    fn ar1_autocorrelation_integral() {
        // Σ_{k∈ℤ} c(k)/2 = σ²/(2(1-φ)²) for an AR(1) process.
        let phi: f64 = 0.8;
        let eps = 0.05;
        let xs = ar1(phi, 1.0, 1_000_000, 5);
        let s = LocalEnergySeries::new(xs, eps, 0).unwrap();
        let est = autocorrelation_integral(&s).unwrap();
        let exact = -eps * 0.5 / (1.0 - phi).powi(2);
        assert!(
            (est.mean - exact).abs() < 4.0 * est.std_error + 0.02 * exact.abs(),
            "{est:?} vs {exact}"
        );
        assert!(est.std_error < 0.05 * exact.abs());
    }

    #[test]
    fn window_failure_is_reported() {
        let xs: Vec<f64> = (0..2000).map(|i| (i as f64 / 2000.0 * 3.0).sin()).collect();
        assert!(matches!(
            integrated_autocorrelation(&xs, SOKAL_WINDOW),
            Err(Error::WindowSelection(_))
        ));
    }

    #[test]
    fn cumulant_recursions_agree() {
        let mut r = rng::stream(8, "cumulants", 0);
        for _ in 0..50 {
            let mu: Vec<f64> = std::iter::once(1.0)
                .chain((0..6).map(|_| r.random_range(-2.0..2.0)))
                .collect();
            let kappa = cumulants_from_moments(&mu);
            let mut fact = 1.0;
            let lambda: Vec<f64> = mu
                .iter()
                .enumerate()
                .map(|(n, m)| {
                    if n > 0 {
                        fact *= n as f64;
                    }
                    m / fact
                })
                .collect();
            let gamma = reduced_cumulants(&lambda);
            let mut fact = 1.0;
            for n in 1..mu.len() {
                fact *= n as f64;
                assert!((gamma[n] - kappa[n] / fact).abs() < 1e-10 * (1.0 + kappa[n].abs()));
            }
        }
    }

    #[test]
    fn cumulants_of_a_gaussian() {
        // Raw moments of N(m, s²): only κ_1 and κ_2 are non-zero.
        let (m, s2): (f64, f64) = (0.7, 0.3);
        let mu = [
            1.0,
            m,
            m * m + s2,
            m.powi(3) + 3.0 * m * s2,
            m.powi(4) + 6.0 * m * m * s2 + 3.0 * s2 * s2,
        ];
        let k = cumulants_from_moments(&mu);
        assert!((k[1] - m).abs() < 1e-14);
        assert!((k[2] - s2).abs() < 1e-14);
        assert!(k[3].abs() < 1e-13 && k[4].abs() < 1e-13);
    }

    #[test]
    fn tau_grid_validation() {
        let s = LocalEnergySeries::new(vec![0.5; 2000], 0.01, 0).unwrap();
        assert!(matches!(
            action_moments(&s, &[0.001], 3),
            Err(Error::TauGrid(_))
        ));
        assert!(matches!(
            action_moments(&s, &[0.5, 0.2], 3),
            Err(Error::TauGrid(_))
        ));
        assert!(matches!(
            action_moments(&s, &[100.0], 3),
            Err(Error::TauGrid(_))
        ));
        let m = action_moments(&s, &[0.1, 0.2], 3).unwrap();
        assert!((m.lambda[1][1] - 0.1).abs() < 1e-12);
        assert!((m.lambda[1][2] - 0.1f64.powi(2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn windowed_action_matches_direct_trapezoid() {
        let mut r = rng::stream(4, "trapezoid", 0);
        let xs: Vec<f64> = (0..3000).map(|_| 10.0 + r.random::<f64>()).collect();
        let eps = 0.02;
        let s = LocalEnergySeries::new(xs.clone(), eps, 0).unwrap();
        let m = action_moments_batched(&s, &[0.2], 2, 4).unwrap();
        let steps = 10;
        let actions: Vec<f64> = (0..xs.len() - steps)
            .map(|i| eps * (xs[i..=i + steps].iter().sum::<f64>() - 0.5 * (xs[i] + xs[i + steps])))
            .collect();
        let k = actions.len() as f64;
        let m1 = actions.iter().sum::<f64>() / k;
        let m2 = actions.iter().map(|a| a * a).sum::<f64>() / k / 2.0;
        assert!((m.lambda[0][1] - m1).abs() < 1e-10);
        assert!((m.lambda[0][2] - m2).abs() < 1e-9);
    }

    #[test]
    fn linear_cumulants_from_ar1() {
        // For an AR(1) local energy with mean μ, γ_1 = μτ exactly and γ_2
        // grows with slope Σ_k c(k)/2 once τ exceeds the correlation time.
        let phi: f64 = 0.5;
        let eps = 0.1;
        let mu = 0.3;
        let xs: Vec<f64> = ar1(phi, 0.2, 2_000_000, 11)
            .into_iter()
            .map(|x| x + mu)
            .collect();
        let s = LocalEnergySeries::new(xs, eps, 0).unwrap();
        let grid: Vec<f64> = (1..=12).map(|i| 2.0 + i as f64).collect();
        let m = action_moments(&s, &grid, 3).unwrap();
        let fits = stochastic_epsilons(&m, 2, &FitOptions::default()).unwrap();
        assert!((fits[0].estimate.mean - mu).abs() < 4.0 * fits[0].estimate.std_error + 1e-3);
        let exact2 = -eps * 0.5 * 0.04 / (1.0 - phi).powi(2);
        assert!(
            (fits[1].estimate.mean - exact2).abs() < 4.0 * fits[1].estimate.std_error,
            "{:?} vs {exact2}",
            fits[1]
        );
        assert!(fits[1].r_squared > 0.99);
    }

    #[test]
    fn stochastic_order_gate() {
        let s =
            LocalEnergySeries::new((0..5000).map(|i| (i % 7) as f64).collect(), 0.01, 0).unwrap();
        let m = action_moments(&s, &[0.1, 0.2, 0.3, 0.4], 5).unwrap();
        assert!(matches!(
            stochastic_epsilons(&m, 5, &FitOptions::default()),
            Err(Error::ArgumentRange(_))
        ));
        let few = FitOptions {
            min_tau: Some(0.25),
            ..FitOptions::default()
        };
        assert!(matches!(
            stochastic_epsilons(&m, 2, &few),
            Err(Error::TauGrid(_))
        ));
    }

    #[test]
    fn extrapolation_is_exact_for_linear_bias() {
        let at = |e: f64| EstimateWithError {
            mean: 1.0 + 3.0 * e,
            std_error: 0.1,
            autocorr_time: 0.0,
            effective_samples: 1.0,
        };
        let x = extrapolate_to_zero((0.02, at(0.02)), (0.01, at(0.01)));
        assert!((x.mean - 1.0).abs() < 1e-12);
        assert!((x.std_error - (0.01f64 + 0.04).sqrt()).abs() < 1e-12);
    }
}

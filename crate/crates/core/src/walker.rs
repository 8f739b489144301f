//! The classical side of the quantum-classical mapping.
//!
//! A nodeless trial wavefunction `Φ0` defines the potential
//! `U = -2 log Φ0`, a drift `F = -∂U/∂R = 2 ∇ log Φ0`, and an overdamped
//! Langevin walk whose equilibrium density is `Φ0²`. Kinetic energy is
//! `-½∇²` throughout, so the walk has diffusion constant ½: each step adds
//! `(ε/2) F` plus Gaussian noise of variance `ε` per coordinate.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::LocalEnergySeries;

/// `log Φ0` and its first two derivatives.
pub trait TrialWavefunction: Send + Sync {
    fn log_value(&self, r: &[f64]) -> f64;
    fn gradient_log(&self, r: &[f64]) -> Vec<f64>;
    fn laplacian_log(&self, r: &[f64]) -> f64;
}

pub trait Potential: Send + Sync {
    fn value(&self, r: &[f64]) -> f64;
}

impl<T: TrialWavefunction + ?Sized> TrialWavefunction for Box<T> {
    fn log_value(&self, r: &[f64]) -> f64 {
        (**self).log_value(r)
    }
    fn gradient_log(&self, r: &[f64]) -> Vec<f64> {
        (**self).gradient_log(r)
    }
    fn laplacian_log(&self, r: &[f64]) -> f64 {
        (**self).laplacian_log(r)
    }
}

impl<T: TrialWavefunction + ?Sized> TrialWavefunction for &T {
    fn log_value(&self, r: &[f64]) -> f64 {
        (**self).log_value(r)
    }
    fn gradient_log(&self, r: &[f64]) -> Vec<f64> {
        (**self).gradient_log(r)
    }
    fn laplacian_log(&self, r: &[f64]) -> f64 {
        (**self).laplacian_log(r)
    }
}

impl<V: Potential + ?Sized> Potential for Box<V> {
    fn value(&self, r: &[f64]) -> f64 {
        (**self).value(r)
    }
}

impl<V: Potential + ?Sized> Potential for &V {
    fn value(&self, r: &[f64]) -> f64 {
        (**self).value(r)
    }
}

/// `log Φ0 = -α Σ x²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTrial {
    pub alpha: f64,
}

impl GaussianTrial {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::ArgumentRange(format!(
                "Gaussian width alpha must be > 0, got {alpha}"
            )));
        }
        Ok(GaussianTrial { alpha })
    }
}

impl TrialWavefunction for GaussianTrial {
    fn log_value(&self, r: &[f64]) -> f64 {
        -0.5 * self.alpha * r.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient_log(&self, r: &[f64]) -> Vec<f64> {
        r.iter().map(|x| -self.alpha * x).collect()
    }

    fn laplacian_log(&self, r: &[f64]) -> f64 {
        -self.alpha * r.len() as f64
    }
}

/// Gaussian trial times a pairwise factor `exp(-b Σ_{i<j} (x_i - x_j)²/2)`,
/// a Jastrow-style product form for `d > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPairTrial {
    pub alpha: f64,
    pub pair: f64,
}

impl TrialWavefunction for GaussianPairTrial {
    fn log_value(&self, r: &[f64]) -> f64 {
        let mut pair = 0.0;
        for i in 0..r.len() {
            for j in 0..i {
                pair += (r[i] - r[j]).powi(2);
            }
        }
        -0.5 * self.alpha * r.iter().map(|x| x * x).sum::<f64>() - 0.5 * self.pair * pair
    }

    fn gradient_log(&self, r: &[f64]) -> Vec<f64> {
        let d = r.len() as f64;
        let total: f64 = r.iter().sum();
        // ∂/∂x_i Σ_{j<k} (x_j - x_k)² = 2 (d x_i - Σ x)
        r.iter()
            .map(|x| -self.alpha * x - self.pair * (d * x - total))
            .collect()
    }

    fn laplacian_log(&self, r: &[f64]) -> f64 {
        let d = r.len() as f64;
        -self.alpha * d - self.pair * d * (d - 1.0)
    }
}

/// `V = Σ x²/2` (`ω = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Harmonic;

impl Potential for Harmonic {
    fn value(&self, r: &[f64]) -> f64 {
        0.5 * r.iter().map(|x| x * x).sum::<f64>()
    }
}

/// `V = Σ (x²/2 + λq x⁴)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartic {
    pub coupling: f64,
}

impl Potential for Quartic {
    fn value(&self, r: &[f64]) -> f64 {
        r.iter()
            .map(|x| 0.5 * x * x + self.coupling * x.powi(4))
            .sum()
    }
}

/// `V = Σ h (x²/a² - 1)²`, minima at `±a`, barrier height `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWell {
    pub barrier: f64,
    pub minimum: f64,
}

impl Potential for DoubleWell {
    fn value(&self, r: &[f64]) -> f64 {
        let a2 = self.minimum * self.minimum;
        r.iter()
            .map(|x| self.barrier * (x * x / a2 - 1.0).powi(2))
            .sum()
    }
}

/// `F(R) = -∂U/∂R = 2 ∇ log Φ0`.
pub fn drift<T: TrialWavefunction + ?Sized>(trial: &T, r: &[f64]) -> Vec<f64> {
    trial.gradient_log(r).into_iter().map(|g| 2.0 * g).collect()
}

/// `W(R) = (H Φ0)/Φ0 = -½ [∇² log Φ0 + |∇ log Φ0|²] + V(R)`.
pub fn local_energy<T, V>(trial: &T, potential: &V, r: &[f64]) -> f64
where
    T: TrialWavefunction + ?Sized,
    V: Potential + ?Sized,
{
    potential.value(r) - auxiliary_potential(trial, r)
}

/// `𝒱(R) = ½ Φ0''/Φ0`, the potential for which `Φ0` has zero energy.
pub fn auxiliary_potential<T: TrialWavefunction + ?Sized>(trial: &T, r: &[f64]) -> f64 {
    let grad = trial.gradient_log(r);
    0.5 * (trial.laplacian_log(r) + grad.iter().map(|g| g * g).sum::<f64>())
}

/// Walker position with drift and local energy cached for that position.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerState {
    position: Vec<f64>,
    drift: Vec<f64>,
    local_energy: f64,
}

impl WalkerState {
    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn local_energy(&self) -> f64 {
        self.local_energy
    }
}

/// Euler-Maruyama discretization of the overdamped Langevin walk.
#[derive(Debug, Clone)]
pub struct Langevin<T, V> {
    pub trial: T,
    pub potential: V,
    epsilon: f64,
}

impl<T: TrialWavefunction, V: Potential> Langevin<T, V> {
    pub fn new(trial: T, potential: V, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::ArgumentRange(format!(
                "time step must be > 0, got {epsilon}"
            )));
        }
        Ok(Langevin {
            trial,
            potential,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn state_at(&self, position: Vec<f64>) -> WalkerState {
        let drift = drift(&self.trial, &position);
        let local_energy = local_energy(&self.trial, &self.potential, &position);
        WalkerState {
            position,
            drift,
            local_energy,
        }
    }

    /// One step with explicit noise `η` (variance `ε` per coordinate).
    pub fn step_with_noise(&self, state: &WalkerState, noise: &[f64]) -> WalkerState {
        let half = 0.5 * self.epsilon;
        let position = state
            .position
            .iter()
            .zip(&state.drift)
            .zip(noise)
            .map(|((x, f), eta)| x + half * f + eta)
            .collect();
        self.state_at(position)
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &WalkerState, rng: &mut R) -> WalkerState {
        let sigma = self.epsilon.sqrt();
        let noise: Vec<f64> = (0..state.position.len())
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.step_with_noise(state, &noise)
    }

    /// `log Π(to | from)` for one step of the walk.
    pub fn log_transition_density(&self, from: &WalkerState, to: &[f64]) -> f64 {
        let half = 0.5 * self.epsilon;
        let d = to.len() as f64;
        let dist2: f64 = to
            .iter()
            .zip(&from.position)
            .zip(&from.drift)
            .map(|((y, x), f)| (y - x - half * f).powi(2))
            .sum();
        -dist2 / (2.0 * self.epsilon) - 0.5 * d * (2.0 * std::f64::consts::PI * self.epsilon).ln()
    }

    /// Gaussian density of moving from `from` to `to` in one step.
    pub fn transition_density(&self, from: &[f64], to: &[f64]) -> f64 {
        let state = self.state_at(from.to_vec());
        self.log_transition_density(&state, to).exp()
    }

    /// Run `steps` steps and return the final state.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        mut state: WalkerState,
        steps: usize,
        rng: &mut R,
    ) -> WalkerState {
        for _ in 0..steps {
            state = self.step(&state, rng);
        }
        state
    }

    /// Local energies along `burn_in + steps` steps; the leading `burn_in`
    /// samples are kept in the series and flagged as burn-in.
    pub fn sample_series<R: Rng + ?Sized>(
        &self,
        mut state: WalkerState,
        steps: usize,
        burn_in: usize,
        rng: &mut R,
    ) -> Result<(LocalEnergySeries, WalkerState)> {
        let mut values = Vec::with_capacity(steps + burn_in);
        for _ in 0..steps + burn_in {
            state = self.step(&state, rng);
            values.push(state.local_energy);
        }
        Ok((
            LocalEnergySeries::new(values, self.epsilon, burn_in)?,
            state,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn gaussian(alpha: f64) -> GaussianTrial {
        GaussianTrial::new(alpha).unwrap()
    }

    #[test]
    fn drift_examples() {
        assert_eq!(drift(&gaussian(1.0), &[0.5]), vec![-1.0]);
        assert_eq!(drift(&gaussian(1.7), &[0.0]), vec![-0.0]);
        assert_eq!(drift(&gaussian(2.0), &[1.0]), vec![-4.0]);
    }

    #[test]
    fn local_energy_examples() {
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            assert_eq!(local_energy(&gaussian(1.0), &Harmonic, &[x]), 0.5);
        }
        for alpha in [0.6, 1.2, 2.5] {
            for x in [-1.5, 0.2, 1.0] {
                let expected = alpha / 2.0 + (1.0 - alpha * alpha) * x * x / 2.0;
                assert!((local_energy(&gaussian(alpha), &Harmonic, &[x]) - expected).abs() < 1e-14);
            }
        }
        assert!((local_energy(&gaussian(1.2), &Harmonic, &[1.0]) - 0.38).abs() < 1e-14);
    }

    #[test]
    fn auxiliary_potential_examples() {
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let v = auxiliary_potential(&gaussian(1.0), &[x]);
            assert!((v - (x * x - 1.0) / 2.0).abs() < 1e-15);
        }
        assert!((auxiliary_potential(&gaussian(1.7), &[0.0]) + 0.85).abs() < 1e-15);
    }

    #[test]
    fn local_energy_is_v_minus_auxiliary() {
        let mut r = rng::stream(1, "identity", 0);
        let trials: Vec<Box<dyn TrialWavefunction>> = vec![
            Box::new(gaussian(0.8)),
            Box::new(gaussian(1.3)),
            Box::new(GaussianPairTrial {
                alpha: 1.1,
                pair: 0.2,
            }),
        ];
        let potentials: Vec<Box<dyn Potential>> = vec![
            Box::new(Harmonic),
            Box::new(Quartic { coupling: 0.1 }),
            Box::new(DoubleWell {
                barrier: 2.0,
                minimum: 1.2,
            }),
        ];
        for t in &trials {
            for v in &potentials {
                for _ in 0..1000 {
                    let x: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
                    let w = local_energy(t, v, &x);
                    let identity = v.value(&x) - auxiliary_potential(t, &x);
                    assert!((w - identity).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trial_derivatives_match_finite_differences() {
        let mut r = rng::stream(2, "fd", 0);
        let trials: Vec<Box<dyn TrialWavefunction>> = vec![
            Box::new(gaussian(0.9)),
            Box::new(GaussianPairTrial {
                alpha: 1.4,
                pair: 0.3,
            }),
        ];
        let h = 1e-4;
        for t in &trials {
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
                let grad = t.gradient_log(&x);
                let mut lap = 0.0;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let (fp, f0, fm) = (t.log_value(&xp), t.log_value(&x), t.log_value(&xm));
                    assert!(((fp - fm) / (2.0 * h) - grad[i]).abs() < 1e-6);
                    lap += (fp - 2.0 * f0 + fm) / (h * h);
                }
                assert!((lap - t.laplacian_log(&x)).abs() < 1e-6 * 100.0);
            }
        }
    }

    #[test]
    fn zero_noise_step_follows_drift() {
        let w = Langevin::new(gaussian(1.0), Harmonic, 0.1).unwrap();
        let next = w.step_with_noise(&w.state_at(vec![1.0]), &[0.0]);
        assert!((next.position()[0] - 0.9).abs() < 1e-15);
        assert_eq!(next.drift(), &[-1.8]);
    }

    struct Flat;
    impl TrialWavefunction for Flat {
        fn log_value(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn gradient_log(&self, r: &[f64]) -> Vec<f64> {
            vec![0.0; r.len()]
        }
        fn laplacian_log(&self, _: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn pure_diffusion_increments() {
        let w = Langevin::new(Flat, Harmonic, 0.01).unwrap();
        let mut r = rng::stream(9, "diffusion", 0);
        let start = w.state_at(vec![0.3]);
        let n = 100_000;
        let incs: Vec<f64> = (0..n)
            .map(|_| w.step(&start, &mut r).position()[0] - 0.3)
            .collect();
        let mean = incs.iter().sum::<f64>() / n as f64;
        let var = incs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * (0.01f64 / n as f64).sqrt());
        // var of the sample variance of a normal: 2σ⁴/(n-1)
        assert!((var - 0.01).abs() < 3.0 * 0.01 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn transition_density_properties() {
        let w = Langevin::new(gaussian(1.3), Harmonic, 0.04).unwrap();
        let from = w.state_at(vec![0.7]);
        let peak = 0.7 + 0.02 * from.drift()[0];
        let p = w.transition_density(&[0.7], &[peak]);
        assert!((p - (2.0 * std::f64::consts::PI * 0.04).powf(-0.5)).abs() < 1e-12);
        // Simpson quadrature over ±10σ.
        let (a, b, n) = (peak - 2.0, peak + 2.0, 4000);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = a + i as f64 * h;
            let wgt = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += wgt * w.transition_density(&[0.7], &[x]);
        }
        assert!((acc * h / 3.0 - 1.0).abs() < 1e-6);

        let flat = Langevin::new(Flat, Harmonic, 0.04).unwrap();
        let ab = flat.transition_density(&[0.1, -0.2], &[0.3, 0.05]);
        let ba = flat.transition_density(&[0.3, 0.05], &[0.1, -0.2]);
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn exact_trial_has_constant_local_energy_along_the_walk() {
        let w = Langevin::new(gaussian(1.0), Harmonic, 0.01).unwrap();
        let mut r = rng::stream(4, "zero-variance", 0);
        let (series, _) = w
            .sample_series(w.state_at(vec![0.0]), 10_000, 100, &mut r)
            .unwrap();
        assert!(series.values().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn equilibrium_is_normal_with_variance_one_over_two_alpha() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let alpha = 1.0;
        let eps = 0.01;
        let w = Langevin::new(gaussian(alpha), Harmonic, eps).unwrap();
        let mut r = rng::stream(6, "ks", 0);
        let mut state = w.advance(w.state_at(vec![0.0]), 2000, &mut r);
        // Position decorrelates over 1/(αε) = 100 steps; keep every 500th.
        let thin = 500;
        let mut xs = Vec::new();
        for _ in 0..1_000_000 / thin {
            state = w.advance(state, thin, &mut r);
            xs.push(state.position()[0]);
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        let normal = Normal::new(0.0, (1.0 / (2.0 * alpha)).sqrt()).unwrap();
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = normal.cdf(x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0f64, f64::max);
        // Kolmogorov critical value at significance 0.01.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }
}

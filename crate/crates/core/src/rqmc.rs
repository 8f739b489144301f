//! Reptation quantum Monte Carlo.
//!
//! A reptile is a discretized Langevin path `R_0 … R_n` sampled with weight
//! `e^{-S}`, `S = Σ_i (ε/2)(W(R_i) + W(R_{i+1}))`. Each move grows one end by
//! a Langevin step and drops the other end. The ends sample the mixed
//! distribution and the middle bead samples `Ψ0²` as `nε → ∞`.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    blocked_estimate, integrated_autocorrelation, EstimateWithError, SOKAL_WINDOW,
};
use crate::walker::{Langevin, Potential, TrialWavefunction, WalkerState};

/// A state space with a local energy and a one-step proposal whose
/// equilibrium density is `Φ0²`.
pub trait ReptationSpace {
    type Point: Clone;

    fn time_step(&self) -> f64;

    fn propose<R: Rng + ?Sized>(&self, from: &Self::Point, rng: &mut R) -> Self::Point;

    fn local_energy(&self, point: &Self::Point) -> f64;

    /// `log c(a, b) = ½ log[Φ0²(b) T(a|b) / (Φ0²(a) T(b|a))]`; zero when the
    /// proposal is in detailed balance with `Φ0²`.
    fn log_link_correction(&self, a: &Self::Point, b: &Self::Point) -> f64;
}

impl<T: TrialWavefunction, V: Potential> ReptationSpace for Langevin<T, V> {
    type Point = WalkerState;

    fn time_step(&self) -> f64 {
        self.epsilon()
    }

    fn propose<R: Rng + ?Sized>(&self, from: &WalkerState, rng: &mut R) -> WalkerState {
        self.step(from, rng)
    }

    fn local_energy(&self, point: &WalkerState) -> f64 {
        point.local_energy()
    }

    fn log_link_correction(&self, a: &WalkerState, b: &WalkerState) -> f64 {
        let forward =
            2.0 * self.trial.log_value(a.position()) + self.log_transition_density(a, b.position());
        let backward =
            2.0 * self.trial.log_value(b.position()) + self.log_transition_density(b, a.position());
        0.5 * (backward - forward)
    }
}

/// Which end of the reptile grows. `Head` is the last bead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Direction {
    Head,
    Tail,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Head => Direction::Tail,
            Direction::Tail => Direction::Head,
        }
    }
}

/// `Bounce` keeps the direction until a rejection reverses it; `Random`
/// draws it afresh for every move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionPolicy {
    #[default]
    Bounce,
    Random,
}

fn link_action(epsilon: f64, wa: f64, wb: f64) -> f64 {
    0.5 * epsilon * (wa + wb)
}

/// Log acceptance for growing at `end` by `new` while dropping `removed`,
/// whose neighbour becomes the opposite end.
#[allow(clippy::too_many_arguments)]
fn log_acceptance<S: ReptationSpace>(
    space: &S,
    end: (&S::Point, f64),
    new: (&S::Point, f64),
    removed: (&S::Point, f64),
    neighbour: (&S::Point, f64),
    correction: bool,
) -> f64 {
    let eps = space.time_step();
    let delta = link_action(eps, end.1, new.1) - link_action(eps, removed.1, neighbour.1);
    let mut log_a = -delta;
    if correction {
        log_a += space.log_link_correction(end.0, new.0)
            + space.log_link_correction(removed.0, neighbour.0);
    }
    log_a
}

#[derive(Debug, Clone)]
pub struct Reptile<P> {
    beads: VecDeque<P>,
    energies: VecDeque<f64>,
    action: f64,
    epsilon: f64,
    direction: Direction,
}

impl<P: Clone> Reptile<P> {
    pub fn new<S: ReptationSpace<Point = P>>(space: &S, beads: Vec<P>) -> Result<Self> {
        if beads.len() < 2 {
            return Err(Error::ArgumentRange(format!(
                "a reptile needs at least 2 beads, got {}",
                beads.len()
            )));
        }
        let energies: VecDeque<f64> = beads.iter().map(|b| space.local_energy(b)).collect();
        let mut reptile = Reptile {
            beads: beads.into(),
            energies,
            action: 0.0,
            epsilon: space.time_step(),
            direction: Direction::Head,
        };
        reptile.action = reptile.recompute_action();
        Ok(reptile)
    }

    /// Beads along one trajectory of `n_beads - 1` proposal steps from `start`.
    pub fn from_trajectory<S, R>(space: &S, start: P, n_beads: usize, rng: &mut R) -> Result<Self>
    where
        S: ReptationSpace<Point = P>,
        R: Rng + ?Sized,
    {
        let mut beads = Vec::with_capacity(n_beads);
        beads.push(start);
        while beads.len() < n_beads {
            let next = space.propose(beads.last().expect("non-empty"), rng);
            beads.push(next);
        }
        Self::new(space, beads)
    }

    pub fn n_beads(&self) -> usize {
        self.beads.len()
    }

    pub fn beads(&self) -> impl Iterator<Item = &P> {
        self.beads.iter()
    }

    pub fn head(&self) -> &P {
        self.beads.back().expect("non-empty")
    }

    pub fn tail(&self) -> &P {
        self.beads.front().expect("non-empty")
    }

    pub fn middle(&self) -> &P {
        &self.beads[self.beads.len() / 2]
    }

    pub fn head_energy(&self) -> f64 {
        *self.energies.back().expect("non-empty")
    }

    pub fn tail_energy(&self) -> f64 {
        *self.energies.front().expect("non-empty")
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.energies.iter().copied()
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Running action, updated incrementally by accepted moves.
    pub fn action(&self) -> f64 {
        self.action
    }

    pub fn recompute_action(&self) -> f64 {
        let e = &self.energies;
        (0..e.len() - 1)
            .map(|i| link_action(self.epsilon, e[i], e[i + 1]))
            .sum()
    }

    /// Reset the running action to the exact sum over links.
    pub fn refresh_action(&mut self) {
        self.action = self.recompute_action();
    }

    /// One grow-and-drop attempt; returns whether it was accepted.
    pub fn step<S, R>(
        &mut self,
        space: &S,
        policy: DirectionPolicy,
        correction: bool,
        rng: &mut R,
    ) -> bool
    where
        S: ReptationSpace<Point = P>,
        R: Rng + ?Sized,
    {
        if policy == DirectionPolicy::Random {
            self.direction = if rng.random::<bool>() {
                Direction::Head
            } else {
                Direction::Tail
            };
        }
        let n = self.beads.len();
        let (end, removed, neighbour) = match self.direction {
            Direction::Head => (n - 1, 0, 1),
            Direction::Tail => (0, n - 1, n - 2),
        };
        let new = space.propose(&self.beads[end], rng);
        let new_w = space.local_energy(&new);
        let log_a = log_acceptance(
            space,
            (&self.beads[end], self.energies[end]),
            (&new, new_w),
            (&self.beads[removed], self.energies[removed]),
            (&self.beads[neighbour], self.energies[neighbour]),
            correction,
        );
        let accept = log_a >= 0.0 || rng.random::<f64>() < log_a.exp();
        if accept {
            let grow = link_action(self.epsilon, self.energies[end], new_w);
            let drop = link_action(
                self.epsilon,
                self.energies[removed],
                self.energies[neighbour],
            );
            self.action += grow - drop;
            match self.direction {
                Direction::Head => {
                    self.beads.pop_front();
                    self.energies.pop_front();
                    self.beads.push_back(new);
                    self.energies.push_back(new_w);
                }
                Direction::Tail => {
                    self.beads.pop_back();
                    self.energies.pop_back();
                    self.beads.push_front(new);
                    self.energies.push_front(new_w);
                }
            }
        } else if policy == DirectionPolicy::Bounce {
            self.direction = self.direction.flipped();
        }
        accept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BurnIn {
    Sweeps(usize),
    /// Windows of `window` sweeps until two consecutive window means agree
    /// within one combined standard error, up to `max_sweeps`.
    Auto {
        window: usize,
        max_sweeps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RqmcConfig {
    pub n_beads: usize,
    /// Production sweeps; one sweep is `n_beads` move attempts.
    pub sweeps: usize,
    pub burn_in: BurnIn,
    pub policy: DirectionPolicy,
    pub proposal_correction: bool,
    /// Proposal steps run from the start point before the reptile is grown;
    /// their local energies also give the correlation time of the walk.
    pub probe_steps: usize,
}

impl RqmcConfig {
    pub fn new(n_beads: usize, sweeps: usize) -> Self {
        RqmcConfig {
            n_beads,
            sweeps,
            burn_in: BurnIn::Auto {
                window: (sweeps / 50).max(20),
                max_sweeps: sweeps,
            },
            policy: DirectionPolicy::Bounce,
            proposal_correction: false,
            probe_steps: 100_000,
        }
    }
}

/// End energies and action after one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub head: f64,
    pub tail: f64,
    pub action: f64,
}

/// Energy and pure estimates from one chain. Autocorrelation times here are
/// in sweeps; `correlation_time` is the local-energy correlation time of the
/// underlying walk in imaginary-time units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RqmcRunResult {
    pub energy: EstimateWithError,
    pub pure: BTreeMap<String, EstimateWithError>,
    pub acceptance_rate: f64,
    pub burn_in_sweeps: usize,
    pub projection_time: f64,
    pub correlation_time: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub records: Vec<SweepRecord>,
}

pub type Observable<'a, P> = (&'a str, &'a dyn Fn(&P) -> f64);

/// Equilibrate a walker, grow a reptile, burn in, and accumulate estimates.
pub fn run_rqmc<S, R>(
    space: &S,
    start: S::Point,
    config: &RqmcConfig,
    observables: &[Observable<'_, S::Point>],
    rng: &mut R,
) -> Result<RqmcRunResult>
where
    S: ReptationSpace,
    R: Rng + ?Sized,
{
    if config.n_beads < 2 {
        return Err(Error::ArgumentRange(format!(
            "n_beads must be >= 2, got {}",
            config.n_beads
        )));
    }
    let eps = space.time_step();
    let projection_time = (config.n_beads - 1) as f64 * eps;
    let mut warnings = Vec::new();

    let mut point = start;
    let mut probe = Vec::with_capacity(config.probe_steps);
    for _ in 0..config.probe_steps {
        point = space.propose(&point, rng);
        probe.push(space.local_energy(&point));
    }
    let correlation_time = if probe.len() >= 1000 {
        match integrated_autocorrelation(&probe, SOKAL_WINDOW) {
            Ok((tau, _)) => Some(tau * eps),
            Err(e) => {
                warnings.push(format!("correlation time unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    if let Some(tc) = correlation_time {
        if projection_time < 3.0 * tc {
            warnings.push(format!(
                "projection time {projection_time:.4} is below 3 correlation times ({:.4})",
                3.0 * tc
            ));
        }
    }

    let mut reptile = Reptile::from_trajectory(space, point, config.n_beads, rng)?;
    let mut attempts = 0u64;
    let mut accepted = 0u64;
    let mut sweep = |reptile: &mut Reptile<S::Point>, rng: &mut R, count: bool| {
        for _ in 0..config.n_beads {
            let ok = reptile.step(space, config.policy, config.proposal_correction, rng);
            if count {
                attempts += 1;
                accepted += ok as u64;
            }
        }
        reptile.refresh_action();
        0.5 * (reptile.head_energy() + reptile.tail_energy())
    };

    let burn_in_sweeps = match config.burn_in {
        BurnIn::Sweeps(k) => {
            for _ in 0..k {
                sweep(&mut reptile, rng, false);
            }
            k
        }
        BurnIn::Auto { window, max_sweeps } => {
            let window = window.max(2);
            let stats = |xs: &[f64]| {
                let n = xs.len() as f64;
                let m = xs.iter().sum::<f64>() / n;
                let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
                (m, v / n)
            };
            let mut done = 0;
            let mut previous: Option<(f64, f64)> = None;
            let mut settled = false;
            while done + window <= max_sweeps.max(window) {
                let xs: Vec<f64> = (0..window)
                    .map(|_| sweep(&mut reptile, rng, false))
                    .collect();
                done += window;
                let current = stats(&xs);
                if let Some((m0, v0)) = previous {
                    if (current.0 - m0).abs() <= (v0 + current.1).sqrt() {
                        settled = true;
                        break;
                    }
                }
                previous = Some(current);
            }
            if !settled {
                warnings.push(format!("burn-in did not settle within {done} sweeps"));
            }
            done
        }
    };

    let mut records = Vec::with_capacity(config.sweeps);
    let mut pure_samples: Vec<Vec<f64>> =
        vec![Vec::with_capacity(config.sweeps); observables.len()];
    for _ in 0..config.sweeps {
        sweep(&mut reptile, rng, true);
        records.push(SweepRecord {
            head: reptile.head_energy(),
            tail: reptile.tail_energy(),
            action: reptile.action(),
        });
        for (samples, (_, f)) in pure_samples.iter_mut().zip(observables) {
            samples.push(f(reptile.middle()));
        }
    }

    let energy_series: Vec<f64> = records.iter().map(|r| 0.5 * (r.head + r.tail)).collect();
    let energy = blocked_estimate(&energy_series, 1.0)?;
    let mut pure = BTreeMap::new();
    for (samples, (name, _)) in pure_samples.iter().zip(observables) {
        pure.insert(name.to_string(), blocked_estimate(samples, 1.0)?);
    }
    Ok(RqmcRunResult {
        energy,
        pure,
        acceptance_rate: if attempts == 0 {
            0.0
        } else {
            accepted as f64 / attempts as f64
        },
        burn_in_sweeps,
        projection_time,
        correlation_time,
        warnings,
        records,
    })
}

/// Moments `⟨S^k⟩` under the unweighted path measure, recovered from
/// reptile samples by reweighting with `e^{+S}`; jackknife errors over
/// contiguous batches. Element `k - 1` holds order `k`.
pub fn reweighted_action_moments(
    records: &[SweepRecord],
    max_order: usize,
    batches: usize,
) -> Result<Vec<EstimateWithError>> {
    if batches < 2 || records.len() < batches {
        return Err(Error::SeriesTooShort(format!(
            "{} records for {batches} batches",
            records.len()
        )));
    }
    let shift = records
        .iter()
        .map(|r| r.action)
        .fold(f64::NEG_INFINITY, f64::max);
    let len = records.len() / batches;
    // sums[b][k] = Σ S^k e^{S - shift} over batch b.
    let sums: Vec<Vec<f64>> = (0..batches)
        .map(|b| {
            let mut s = vec![0.0; max_order + 1];
            for r in &records[b * len..(b + 1) * len] {
                let w = (r.action - shift).exp();
                let mut p = w;
                for x in s.iter_mut() {
                    *x += p;
                    p *= r.action;
                }
            }
            s
        })
        .collect();
    let ratio = |skip: Option<usize>| -> Vec<f64> {
        let mut t = vec![0.0; max_order + 1];
        for (b, s) in sums.iter().enumerate() {
            if Some(b) != skip {
                for (x, y) in t.iter_mut().zip(s) {
                    *x += y;
                }
            }
        }
        (1..=max_order).map(|k| t[k] / t[0]).collect()
    };
    let full = ratio(None);
    let jack: Vec<Vec<f64>> = (0..batches).map(|b| ratio(Some(b))).collect();
    let bf = batches as f64;
    Ok((0..max_order)
        .map(|k| {
            let m = jack.iter().map(|j| j[k]).sum::<f64>() / bf;
            let v = (bf - 1.0) / bf * jack.iter().map(|j| (j[k] - m).powi(2)).sum::<f64>();
            EstimateWithError {
                mean: full[k],
                std_error: v.sqrt(),
                autocorr_time: 0.0,
                effective_samples: bf,
            }
        })
        .collect())
}

/// A reptation space with finitely many points and an explicit proposal.
pub trait FiniteReptationSpace: ReptationSpace
where
    Self::Point: Ord,
{
    fn states(&self) -> Vec<Self::Point>;

    /// Each reachable point with its proposal probability.
    fn proposal_distribution(&self, from: &Self::Point) -> Vec<(Self::Point, f64)>;
}

/// Transition matrix of the reptation chain on (path, direction) states;
/// `matrix[(i, j)]` is the probability of moving from state `i` to `j`.
#[derive(Debug, Clone)]
pub struct ReptationKernel<P> {
    pub states: Vec<(Vec<P>, Direction)>,
    pub matrix: DMatrix<f64>,
}

pub fn reptation_kernel<S>(
    space: &S,
    n_beads: usize,
    policy: DirectionPolicy,
    correction: bool,
) -> Result<ReptationKernel<S::Point>>
where
    S: FiniteReptationSpace,
    S::Point: Ord,
{
    if n_beads < 2 {
        return Err(Error::ArgumentRange(format!(
            "n_beads must be >= 2, got {n_beads}"
        )));
    }
    let points = space.states();
    let mut paths: Vec<Vec<S::Point>> = vec![Vec::new()];
    for _ in 0..n_beads {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                points.iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(x.clone());
                    q
                })
            })
            .collect();
    }
    let states: Vec<(Vec<S::Point>, Direction)> = paths
        .into_iter()
        .flat_map(|p| [(p.clone(), Direction::Head), (p, Direction::Tail)])
        .collect();
    let index: BTreeMap<&(Vec<S::Point>, Direction), usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut matrix = DMatrix::zeros(states.len(), states.len());
    for (i, (path, dir)) in states.iter().enumerate() {
        let tries: Vec<(Direction, f64)> = match policy {
            DirectionPolicy::Bounce => vec![(*dir, 1.0)],
            DirectionPolicy::Random => vec![(Direction::Head, 0.5), (Direction::Tail, 0.5)],
        };
        for (d, pd) in tries {
            let n = path.len();
            let (end, removed, neighbour) = match d {
                Direction::Head => (n - 1, 0, 1),
                Direction::Tail => (0, n - 1, n - 2),
            };
            let w = |p: &S::Point| space.local_energy(p);
            for (new, q) in space.proposal_distribution(&path[end]) {
                let log_a = log_acceptance(
                    space,
                    (&path[end], w(&path[end])),
                    (&new, w(&new)),
                    (&path[removed], w(&path[removed])),
                    (&path[neighbour], w(&path[neighbour])),
                    correction,
                );
                let a = log_a.min(0.0).exp();
                let mut moved = path.clone();
                match d {
                    Direction::Head => {
                        moved.remove(0);
                        moved.push(new);
                    }
                    Direction::Tail => {
                        moved.pop();
                        moved.insert(0, new);
                    }
                }
                let stay_dir = match policy {
                    DirectionPolicy::Bounce => d.flipped(),
                    DirectionPolicy::Random => d,
                };
                matrix[(i, index[&(moved, d)])] += pd * q * a;
                matrix[(i, index[&(path.clone(), stay_dir)])] += pd * q * (1.0 - a);
            }
        }
    }
    Ok(ReptationKernel { states, matrix })
}

/// A finite Markov chain used as a reptation space: weights `p` play the
/// role of `Φ0²` and `transition[a][b]` is the proposal probability `T(b|a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainSpace {
    pub weights: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub local_energies: Vec<f64>,
    pub epsilon: f64,
}

impl MarkovChainSpace {
    pub fn new(
        weights: Vec<f64>,
        transition: Vec<Vec<f64>>,
        local_energies: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 || transition.len() != n || local_energies.len() != n {
            return Err(Error::InvalidModel(
                "weights, transition rows and energies must have equal length".into(),
            ));
        }
        if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
            return Err(Error::InvalidModel("weights must be positive".into()));
        }
        for (a, row) in transition.iter().enumerate() {
            if row.len() != n
                || row.iter().any(|&t| t < 0.0)
                || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12
            {
                return Err(Error::InvalidModel(format!(
                    "transition row {a} is not a probability vector"
                )));
            }
            for (b, &t) in row.iter().enumerate() {
                if (t > 0.0) != (transition[b][a] > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "proposal {a}->{b} has no reverse"
                    )));
                }
            }
        }
        Ok(MarkovChainSpace {
            weights,
            transition,
            local_energies,
            epsilon,
        })
    }

    /// Nearest-neighbour Metropolis walk on a ring, in detailed balance with
    /// `weights`.
    pub fn metropolis_ring(
        weights: Vec<f64>,
        local_energies: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let n = weights.len();
        if n < 3 {
            return Err(Error::InvalidModel("a ring needs at least 3 sites".into()));
        }
        let mut transition = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in [(a + 1) % n, (a + n - 1) % n] {
                let acc = (weights[b] / weights[a]).min(1.0);
                transition[a][b] += 0.5 * acc;
                transition[a][a] += 0.5 * (1.0 - acc);
            }
        }
        Self::new(weights, transition, local_energies, epsilon)
    }
}

impl ReptationSpace for MarkovChainSpace {
    type Point = usize;

    fn time_step(&self) -> f64 {
        self.epsilon
    }

    fn propose<R: Rng + ?Sized>(&self, from: &usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.transition[*from];
        let mut acc = 0.0;
        for (b, &t) in row.iter().enumerate() {
            acc += t;
            if u < acc {
                return b;
            }
        }
        row.iter().rposition(|&t| t > 0.0).unwrap_or(*from)
    }

    fn local_energy(&self, point: &usize) -> f64 {
        self.local_energies[*point]
    }

    fn log_link_correction(&self, a: &usize, b: &usize) -> f64 {
        let (a, b) = (*a, *b);
        0.5 * ((self.weights[b] * self.transition[b][a]).ln()
            - (self.weights[a] * self.transition[a][b]).ln())
    }
}

impl FiniteReptationSpace for MarkovChainSpace {
    fn states(&self) -> Vec<usize> {
        (0..self.weights.len()).collect()
    }

    fn proposal_distribution(&self, from: &usize) -> Vec<(usize, f64)> {
        self.transition[*from]
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, t)| t > 0.0)
            .collect()
    }
}

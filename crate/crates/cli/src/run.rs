//! Dispatch a validated [`RunConfig`] to the numerical modules.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value as Json};
use spt_core::estimators::{
    action_moments_batched, autocorrelation_integral, extrapolate_to_zero, stochastic_epsilons,
    vmc_estimate, FitOptions,
};
use spt_core::rqmc::{run_rqmc, BurnIn, Observable, RqmcConfig, RqmcRunResult};
use spt_core::rspt::{epsilon_series, render_sum_over_states};
use spt_core::spectral::{build_anharmonic_model, evaluate_epsilons, taylor_oracle};
use spt_core::walker::{DoubleWell, GaussianPairTrial, Harmonic, Quartic};
use spt_core::{
    rng, EstimateWithError, GaussianTrial, Langevin, LocalEnergySeries, Potential, SpectralModel,
    TrialWavefunction, WalkerState,
};

use crate::error::{CliError, CliResult};
use crate::settings::{
    ModelSpec, Params, PotentialSpec, RqmcParams, RunConfig, SeriesSource, SpectralParams,
    SptOrdersParams, SymbolicParams, TrialSpec, VmcParams, WalkerParams,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: Params,
    pub results: Json,
    /// Only present with `--timing`, so reports stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    /// What the subcommand prints: expressions, a CSV table, or the report.
    pub stdout: String,
    pub csv: Option<(PathBuf, String)>,
}

pub type Walker = Langevin<Box<dyn TrialWavefunction>, Box<dyn Potential>>;

pub fn build_walker(p: &WalkerParams) -> CliResult<Walker> {
    let trial: Box<dyn TrialWavefunction> = match p.trial {
        TrialSpec::Gaussian { alpha } => Box::new(GaussianTrial::new(alpha)?),
        TrialSpec::GaussianPair { alpha, pair } => Box::new(GaussianPairTrial { alpha, pair }),
    };
    let potential: Box<dyn Potential> = match p.potential {
        PotentialSpec::Harmonic => Box::new(Harmonic),
        PotentialSpec::Quartic { quartic_coupling } => Box::new(Quartic {
            coupling: quartic_coupling,
        }),
        PotentialSpec::Doublewell { barrier, minimum } => Box::new(DoubleWell { barrier, minimum }),
    };
    Ok(Langevin::new(trial, potential, p.epsilon)?)
}

fn estimate_json(e: &EstimateWithError) -> Json {
    json!({ "mean": e.mean, "err": e.std_error })
}

pub fn run(config: &RunConfig, timing: bool) -> CliResult<RunOutput> {
    let start = Instant::now();
    let (results, stdout, csv) = match &config.params {
        Params::Symbolic(p) => symbolic(p)?,
        Params::Spectral(p) => spectral(p)?,
        Params::Vmc(p) => vmc(p, config.seed)?,
        Params::SptOrders(p) => spt_orders(p, config.seed)?,
        Params::Rqmc(p) => rqmc(p, config.seed)?,
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool: "spt",
        version: env!("CARGO_PKG_VERSION"),
        command: config.subcommand.name(),
        seed: config.seed,
        config: config.params.clone(),
        results,
        wall_time_seconds: timing.then(|| start.elapsed().as_secs_f64()),
    };
    let stdout = stdout.unwrap_or_else(|| report.to_json());
    Ok(RunOutput {
        report,
        stdout,
        csv,
    })
}

type Outcome = (Json, Option<String>, Option<(PathBuf, String)>);

fn symbolic(p: &SymbolicParams) -> CliResult<Outcome> {
    let series = epsilon_series(p.order)?;
    let mut text = String::new();
    let mut orders = Vec::new();
    for r in &series {
        text.push_str(&format!("ε_{} = {}\n", r.order, r.epsilon));
        let mut entry = json!({
            "order": r.order,
            "text": r.epsilon.to_string(),
            "expression": r.epsilon,
        });
        if p.sum_over_states {
            let sos = render_sum_over_states(&r.epsilon);
            text.push_str(&format!("    = {sos}\n"));
            entry["sum_over_states"] = sos.into();
        }
        orders.push(entry);
    }
    Ok((json!({ "orders": orders }), Some(text), None))
}

fn build_model(spec: &ModelSpec) -> CliResult<SpectralModel> {
    Ok(match spec {
        ModelSpec::Explicit { energies, wmat } => SpectralModel::from_rows(energies.clone(), wmat)?,
        ModelSpec::Anharmonic {
            basis_size,
            quartic_coupling,
        } => build_anharmonic_model(*basis_size, *quartic_coupling)?,
    })
}

/// `|a - b| / |b|`, or the absolute difference when `|b| ≤ 1e-10`.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    if b.abs() > 1e-10 {
        (a - b).abs() / b.abs()
    } else {
        (a - b).abs()
    }
}

fn spectral(p: &SpectralParams) -> CliResult<Outcome> {
    let model = build_model(&p.model)?;
    let eps = evaluate_epsilons(&model, p.order)?;
    let mut rows = Vec::new();
    let mut csv = String::new();
    let mut diagnostics = json!({ "dim": model.dim(), "ground_gap": model.ground_gap() });
    if p.oracle {
        let taylor = taylor_oracle(&model, p.order)?;
        csv.push_str("n,epsilon,oracle,rel_diff\n");
        for (i, (e, c)) in eps.iter().zip(&taylor.coeffs).enumerate() {
            let d = relative_difference(*e, *c);
            csv.push_str(&format!("{},{e:e},{c:e},{d:e}\n", i + 1));
            rows.push(json!({ "n": i + 1, "epsilon": e, "oracle": c, "rel_diff": d }));
        }
        diagnostics["oracle_fit_residual"] = taylor.fit_residual.into();
        diagnostics["oracle_radius"] = taylor.radius.into();
    } else {
        csv.push_str("n,epsilon\n");
        for (i, e) in eps.iter().enumerate() {
            csv.push_str(&format!("{},{e:e}\n", i + 1));
            rows.push(json!({ "n": i + 1, "epsilon": e }));
        }
    }
    Ok((
        json!({ "orders": rows, "diagnostics": diagnostics }),
        Some(csv),
        None,
    ))
}

fn walker_series(w: &WalkerParams, seed: u64, label: &str) -> CliResult<LocalEnergySeries> {
    let walker = build_walker(w)?;
    let mut r = rng::stream(seed, label, 0);
    let start = walker.state_at(vec![0.0; w.dimensions]);
    let (series, _) = walker.sample_series(start, w.steps, w.burn_in, &mut r)?;
    Ok(series)
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn vmc(p: &VmcParams, seed: u64) -> CliResult<Outcome> {
    let series = walker_series(&p.walker, seed, "vmc")?;
    let e1 = vmc_estimate(&series)?;
    let e2 = autocorrelation_integral(&series)?;
    let results = json!({
        "epsilon_n": { "1": estimate_json(&e1), "2": estimate_json(&e2) },
        "tau_w": e1.autocorr_time,
        "diagnostics": {
            "samples": series.samples().len(),
            "burn_in": series.burn_in(),
            "variance": variance(series.samples()),
            "effective_samples": e1.effective_samples,
        },
    });
    let csv = p.csv_output.clone().map(|path| (path, series.to_csv()));
    Ok((results, None, csv))
}

fn spt_orders(p: &SptOrdersParams, seed: u64) -> CliResult<Outcome> {
    let series = match &p.source {
        SeriesSource::Walker(w) => walker_series(w, seed, "spt-orders")?,
        SeriesSource::Csv {
            path,
            epsilon,
            burn_in,
        } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("cannot read series {}: {e}", path.display())))?;
            LocalEnergySeries::from_csv(&text, *epsilon, *burn_in)?
        }
    };
    let eps = series.step();
    let e1 = vmc_estimate(&series)?;
    let e2 = autocorrelation_integral(&series)?;
    let tau_w = e1.autocorr_time.max(0.5 * eps);
    let lo = p.tau_min.unwrap_or(10.0 * tau_w);
    let hi = p.tau_max.unwrap_or(40.0 * tau_w);
    if hi.is_nan() || hi <= lo {
        return Err(CliError::config(format!("empty τ range [{lo}, {hi}]")));
    }
    let mut steps: Vec<usize> = (0..p.tau_points)
        .map(|i| {
            let tau = lo + (hi - lo) * i as f64 / (p.tau_points - 1) as f64;
            ((tau / eps).round() as usize).max(1)
        })
        .collect();
    steps.dedup();
    let grid: Vec<f64> = steps.iter().map(|&m| m as f64 * eps).collect();
    let moments = action_moments_batched(&series, &grid, p.max_order, p.batches)?;
    let options = FitOptions {
        allow_high_orders: p.allow_high_orders,
        ..FitOptions::default()
    };
    let fits = stochastic_epsilons(&moments, p.max_order, &options)?;
    let mut warnings = Vec::new();
    if p.max_order > 4 {
        warnings.push(
            "orders above 4 are noise dominated: the moment-to-cumulant conversion is ill-conditioned".to_string(),
        );
    }
    let epsilon_n: BTreeMap<String, Json> = fits
        .iter()
        .map(|f| (f.order.to_string(), estimate_json(&f.estimate)))
        .collect();
    let fit_json: Vec<Json> = fits
        .iter()
        .map(|f| {
            json!({
                "order": f.order,
                "slope": f.slope,
                "intercept": f.intercept,
                "r_squared": f.r_squared,
                "max_residual_z": f.max_residual_z,
            })
        })
        .collect();
    let results = json!({
        "epsilon_n": epsilon_n,
        "epsilon_2_autocorrelation": estimate_json(&e2),
        "tau_w": e1.autocorr_time,
        "diagnostics": {
            "samples": series.samples().len(),
            "tau_grid": moments.tau_grid,
            "fits": fit_json,
            "vmc_energy": estimate_json(&e1),
            "warnings": warnings,
        },
    });
    let csv = p.csv_output.clone().map(|path| (path, series.to_csv()));
    Ok((results, None, csv))
}

type ObservableFn<'a> = Box<dyn Fn(&WalkerState) -> f64 + Sync + 'a>;

fn observable(name: &str) -> ObservableFn<'static> {
    match name {
        "x" => Box::new(|s: &WalkerState| s.position()[0]),
        "x2" => Box::new(|s: &WalkerState| s.position().iter().map(|x| x * x).sum()),
        _ => Box::new(|s: &WalkerState| s.local_energy()),
    }
}

fn chains(
    p: &RqmcParams,
    walker: &Walker,
    n_beads: usize,
    seed: u64,
    label: &str,
) -> CliResult<Vec<RqmcRunResult>> {
    let cfg = RqmcConfig {
        n_beads,
        sweeps: p.sweeps,
        burn_in: match p.burn_in_sweeps {
            Some(k) => BurnIn::Sweeps(k),
            None => BurnIn::Auto {
                window: (p.sweeps / 50).max(20),
                max_sweeps: p.sweeps,
            },
        },
        policy: p.direction_policy,
        proposal_correction: p.proposal_correction,
        probe_steps: p.walker.burn_in + p.walker.steps,
    };
    let potential_obs = |s: &WalkerState| walker.potential.value(s.position());
    let funcs: Vec<(String, ObservableFn<'_>)> = p
        .observables
        .iter()
        .map(|name| {
            let f: ObservableFn<'_> = if name == "potential" {
                Box::new(potential_obs)
            } else {
                observable(name)
            };
            (name.clone(), f)
        })
        .collect();
    let one_chain = |index: usize| -> CliResult<RqmcRunResult> {
        let obs: Vec<Observable<'_, WalkerState>> = funcs
            .iter()
            .map(|(n, f)| (n.as_str(), f.as_ref() as &dyn Fn(&WalkerState) -> f64))
            .collect();
        let mut r = rng::stream(seed, label, index as u64);
        let start = walker.state_at(vec![0.0; p.walker.dimensions]);
        Ok(run_rqmc(walker, start, &cfg, &obs, &mut r)?)
    };
    if p.workers == 1 {
        return Ok(vec![one_chain(0)?]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..p.workers)
            .map(|i| scope.spawn(move || one_chain(i)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    Err(CliError::new(
                        crate::error::ErrorKind::Internal,
                        "worker panicked",
                    ))
                })
            })
            .collect()
    })
}

fn merge(results: &[RqmcRunResult]) -> (EstimateWithError, Json) {
    let energies: Vec<EstimateWithError> = results.iter().map(|r| r.energy).collect();
    let energy = EstimateWithError::combine(&energies).expect("at least one chain");
    let acceptance = results.iter().map(|r| r.acceptance_rate).sum::<f64>() / results.len() as f64;
    let mut pure = BTreeMap::new();
    for name in results[0].pure.keys() {
        let parts: Vec<EstimateWithError> = results.iter().map(|r| r.pure[name]).collect();
        let e = EstimateWithError::combine(&parts).expect("at least one chain");
        pure.insert(name.clone(), estimate_json(&e));
    }
    let mut warnings: Vec<String> = results
        .iter()
        .flat_map(|r| r.warnings.iter().cloned())
        .collect();
    warnings.dedup();
    let per_chain: Vec<Json> = results
        .iter()
        .map(|r| {
            json!({
                "energy": estimate_json(&r.energy),
                "acceptance_rate": r.acceptance_rate,
                "burn_in_sweeps": r.burn_in_sweeps,
            })
        })
        .collect();
    let json = json!({
        "energy": estimate_json(&energy),
        "acceptance_rate": acceptance,
        "pure_observables": pure,
        "projection_time": results[0].projection_time,
        "correlation_time": results[0].correlation_time,
        "warnings": warnings,
        "chains": per_chain,
    });
    (energy, json)
}

fn rqmc(p: &RqmcParams, seed: u64) -> CliResult<Outcome> {
    let walker = build_walker(&p.walker)?;
    let runs = chains(p, &walker, p.n_beads, seed, "rqmc")?;
    let (energy, mut results) = merge(&runs);
    if p.extrapolate {
        let mut half = p.clone();
        half.walker.epsilon = 0.5 * p.walker.epsilon;
        let half_beads = 2 * (p.n_beads - 1) + 1;
        let half_walker = build_walker(&half.walker)?;
        let half_runs = chains(&half, &half_walker, half_beads, seed, "rqmc-half-step")?;
        let (half_energy, half_json) = merge(&half_runs);
        let zero = extrapolate_to_zero(
            (p.walker.epsilon, energy),
            (half.walker.epsilon, half_energy),
        );
        results["extrapolation"] = json!({
            "half_step": half.walker.epsilon,
            "half_step_beads": half_beads,
            "half_step_result": half_json,
            "energy": estimate_json(&zero),
        });
    }
    let csv = p.csv_output.clone().map(|path| {
        let mut text = String::from("sweep,head,tail,action\n");
        for (i, r) in runs[0].records.iter().enumerate() {
            text.push_str(&format!("{i},{},{},{}\n", r.head, r.tail, r.action));
        }
        (path, text)
    });
    Ok((results, None, csv))
}

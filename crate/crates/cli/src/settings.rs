//! Typed, validated run configurations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spt_core::rqmc::DirectionPolicy;

use crate::config::{self, Document, Value};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Symbolic,
    Spectral,
    Vmc,
    SptOrders,
    Rqmc,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::Symbolic,
        Subcommand::Spectral,
        Subcommand::Vmc,
        Subcommand::SptOrders,
        Subcommand::Rqmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Symbolic => "symbolic",
            Subcommand::Spectral => "spectral",
            Subcommand::Vmc => "vmc",
            Subcommand::SptOrders => "spt-orders",
            Subcommand::Rqmc => "rqmc",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name || s.name().replace('-', "_") == name)
    }

    fn keys(self) -> Vec<&'static str> {
        let mut keys: Vec<&'static str> = GENERAL_KEYS.to_vec();
        match self {
            Subcommand::Symbolic => keys.extend(["order", "sum_over_states"]),
            Subcommand::Spectral => {
                keys.extend(MODEL_KEYS);
                keys.extend(["order", "oracle"]);
            }
            Subcommand::Vmc => {
                keys.extend(WALKER_KEYS);
                keys.push("csv_output");
            }
            Subcommand::SptOrders => {
                keys.extend(WALKER_KEYS);
                keys.extend([
                    "series",
                    "tau_min",
                    "tau_max",
                    "tau_points",
                    "max_order",
                    "allow_high_orders",
                    "batches",
                    "csv_output",
                ]);
            }
            Subcommand::Rqmc => {
                keys.extend(WALKER_KEYS);
                keys.extend([
                    "n_beads",
                    "sweeps",
                    "burn_in_sweeps",
                    "direction_policy",
                    "proposal_correction",
                    "extrapolate",
                    "workers",
                    "observables",
                    "csv_output",
                ]);
            }
        }
        keys
    }
}

const GENERAL_KEYS: [&str; 3] = ["command", "seed", "output"];
const MODEL_KEYS: [&str; 6] = [
    "model",
    "energies",
    "wmat",
    "builder",
    "basis_size",
    "quartic_coupling",
];
const WALKER_KEYS: [&str; 11] = [
    "trial",
    "alpha",
    "pair",
    "potential",
    "quartic_coupling",
    "barrier",
    "minimum",
    "dimensions",
    "epsilon",
    "steps",
    "burn_in",
];
const SECTIONS: [&str; 8] = [
    "symbolic",
    "spectral",
    "vmc",
    "spt-orders",
    "rqmc",
    "walker",
    "model",
    "analysis",
];

fn all_keys() -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = Subcommand::ALL.iter().flat_map(|s| s.keys()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

fn suggestion(word: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(d, c)| *d <= 2 || strsim::jaro_winkler(word, c) > 0.9)
        .min()
        .map(|(_, c)| format!("; did you mean `{c}`?"))
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Line(usize),
    Flag,
}

#[derive(Debug, Clone)]
struct Setting {
    value: Value,
    origin: Origin,
}

/// Raw inputs collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub subcommand: Option<Subcommand>,
    pub config_text: Option<String>,
    /// Values from flags; they replace values from the file.
    pub overrides: Vec<(String, Value)>,
    /// `--seed` or `SPT_SEED`.
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub params: Params,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Symbolic(SymbolicParams),
    Spectral(SpectralParams),
    Vmc(VmcParams),
    SptOrders(SptOrdersParams),
    Rqmc(RqmcParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolicParams {
    pub order: usize,
    pub sum_over_states: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum ModelSpec {
    Explicit {
        energies: Vec<f64>,
        wmat: Vec<Vec<f64>>,
    },
    Anharmonic {
        basis_size: usize,
        quartic_coupling: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralParams {
    pub model: ModelSpec,
    pub order: usize,
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "trial", rename_all = "snake_case")]
pub enum TrialSpec {
    Gaussian { alpha: f64 },
    GaussianPair { alpha: f64, pair: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "potential", rename_all = "snake_case")]
pub enum PotentialSpec {
    Harmonic,
    Quartic { quartic_coupling: f64 },
    Doublewell { barrier: f64, minimum: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkerParams {
    pub trial: TrialSpec,
    pub potential: PotentialSpec,
    pub dimensions: usize,
    pub epsilon: f64,
    pub steps: usize,
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmcParams {
    pub walker: WalkerParams,
    pub csv_output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SeriesSource {
    Walker(WalkerParams),
    Csv {
        path: PathBuf,
        epsilon: f64,
        burn_in: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SptOrdersParams {
    pub source: SeriesSource,
    /// Fit range in imaginary time; defaults to `[10, 40]` autocorrelation
    /// times of the series.
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub tau_points: usize,
    pub max_order: usize,
    pub allow_high_orders: bool,
    pub batches: usize,
    pub csv_output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RqmcParams {
    pub walker: WalkerParams,
    pub n_beads: usize,
    pub sweeps: usize,
    pub burn_in_sweeps: Option<usize>,
    pub direction_policy: DirectionPolicy,
    pub proposal_correction: bool,
    pub extrapolate: bool,
    pub workers: usize,
    pub observables: Vec<String>,
    pub csv_output: Option<PathBuf>,
}

pub const OBSERVABLES: [&str; 3] = ["x", "x2", "potential"];

struct Resolver {
    subcommand: Subcommand,
    values: BTreeMap<String, Setting>,
}

impl Resolver {
    fn locate(&self, key: &str) -> String {
        match self.values.get(key).map(|s| &s.origin) {
            Some(Origin::Line(n)) => format!("`{key}` (line {n})"),
            _ => format!("`{key}`"),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.values.get(key).map(|s| &s.value)
    }

    fn require<T>(&self, key: &str, got: Option<T>) -> CliResult<T> {
        got.ok_or_else(|| {
            CliError::config(format!(
                "missing required key `{key}` for {}",
                self.subcommand.name()
            ))
        })
    }

    fn type_error(&self, key: &str, expected: &str) -> CliError {
        let found = self.raw(key).map_or("nothing", Value::type_name);
        CliError::config(format!(
            "{}: expected {expected}, found {found}",
            self.locate(key)
        ))
    }

    fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| self.type_error(key, "a number")),
        }
    }

    fn positive(&self, key: &str) -> CliResult<Option<f64>> {
        match self.f64(key)? {
            Some(x) if x.is_nan() || x <= 0.0 => Err(CliError::config(format!(
                "{} must be > 0, got {x}",
                self.locate(key)
            ))),
            other => Ok(other),
        }
    }

    fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Int(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(Value::Int(i)) => Err(CliError::config(format!(
                "{} must be >= 0, got {i}",
                self.locate(key)
            ))),
            Some(_) => Err(self.type_error(key, "a non-negative integer")),
        }
    }

    fn bool(&self, key: &str) -> CliResult<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(_) => Err(self.type_error(key, "true or false")),
        }
    }

    fn string(&self, key: &str) -> CliResult<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Str(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.type_error(key, "a string")),
        }
    }

    fn choice(&self, key: &str, options: &[&str]) -> CliResult<Option<String>> {
        match self.string(key)? {
            None => Ok(None),
            Some(s) if options.contains(&s.as_str()) => Ok(Some(s)),
            Some(s) => Err(CliError::config(format!(
                "{}: unknown value {s:?}, expected one of {}{}",
                self.locate(key),
                options.join(", "),
                suggestion(&s, options)
            ))),
        }
    }

    fn f64_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::List(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| self.type_error(key, "a list of numbers"))
                })
                .collect::<CliResult<Vec<f64>>>()
                .map(Some),
            Some(_) => Err(self.type_error(key, "a list of numbers")),
        }
    }

    fn matrix(&self, key: &str) -> CliResult<Option<Vec<Vec<f64>>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::List(rows)) => rows
                .iter()
                .map(|row| match row {
                    Value::List(items) => items
                        .iter()
                        .map(|v| {
                            v.as_f64()
                                .ok_or_else(|| self.type_error(key, "a list of number lists"))
                        })
                        .collect(),
                    _ => Err(self.type_error(key, "a list of number lists")),
                })
                .collect::<CliResult<Vec<Vec<f64>>>>()
                .map(Some),
            Some(_) => Err(self.type_error(key, "a list of number lists")),
        }
    }

    fn walker(&self, require_steps: bool) -> CliResult<WalkerParams> {
        let alpha = self.require("alpha", self.positive("alpha")?)?;
        let trial = match self
            .choice("trial", &["gaussian", "gaussian_pair"])?
            .as_deref()
        {
            None | Some("gaussian") => TrialSpec::Gaussian { alpha },
            _ => TrialSpec::GaussianPair {
                alpha,
                pair: self.require("pair", self.f64("pair")?)?,
            },
        };
        let potential = match self
            .choice("potential", &["harmonic", "quartic", "doublewell"])?
            .as_deref()
        {
            None | Some("harmonic") => PotentialSpec::Harmonic,
            Some("quartic") => PotentialSpec::Quartic {
                quartic_coupling: self
                    .require("quartic_coupling", self.f64("quartic_coupling")?)?,
            },
            _ => PotentialSpec::Doublewell {
                barrier: self.require("barrier", self.positive("barrier")?)?,
                minimum: self.require("minimum", self.positive("minimum")?)?,
            },
        };
        let epsilon = self.require("epsilon", self.positive("epsilon")?)?;
        let steps = if require_steps {
            self.require("steps", self.usize("steps")?)?
        } else {
            self.usize("steps")?.unwrap_or(100_000)
        };
        let dimensions = self.usize("dimensions")?.unwrap_or(1);
        if dimensions == 0 {
            return Err(CliError::config(format!(
                "{} must be >= 1",
                self.locate("dimensions")
            )));
        }
        let burn_in = self
            .usize("burn_in")?
            .unwrap_or(if require_steps { steps / 100 } else { 0 });
        Ok(WalkerParams {
            trial,
            potential,
            dimensions,
            epsilon,
            steps,
            burn_in,
        })
    }

    fn model(&self) -> CliResult<ModelSpec> {
        let explicit = self.has("energies") || self.has("wmat");
        match self.choice("builder", &["anharmonic"])? {
            Some(_) if explicit => Err(CliError::config(
                "give either `builder` or `energies`/`wmat`, not both",
            )),
            Some(_) => {
                let basis_size = self.require("basis_size", self.usize("basis_size")?)?;
                let quartic_coupling =
                    self.require("quartic_coupling", self.f64("quartic_coupling")?)?;
                Ok(ModelSpec::Anharmonic {
                    basis_size,
                    quartic_coupling,
                })
            }
            None => {
                let energies = self.require("energies", self.f64_list("energies")?)?;
                let wmat = self.require("wmat", self.matrix("wmat")?)?;
                Ok(ModelSpec::Explicit { energies, wmat })
            }
        }
    }

    fn path(&self, key: &str) -> CliResult<Option<PathBuf>> {
        Ok(self.string(key)?.map(PathBuf::from))
    }
}

fn collect(doc: &Document, into: &mut BTreeMap<String, (Setting, Option<String>)>) {
    for e in &doc.entries {
        into.insert(
            e.key.clone(),
            (
                Setting {
                    value: e.value.clone(),
                    origin: Origin::Line(e.line),
                },
                e.section.clone(),
            ),
        );
    }
}

fn infer(keys: &BTreeMap<String, (Setting, Option<String>)>) -> Option<Subcommand> {
    let has = |k: &str| keys.contains_key(k);
    if has("n_beads") || has("sweeps") {
        Some(Subcommand::Rqmc)
    } else if has("max_order") || has("series") || has("tau_min") || has("tau_max") {
        Some(Subcommand::SptOrders)
    } else if has("energies") || has("builder") || has("model") || has("wmat") {
        Some(Subcommand::Spectral)
    } else if has("alpha") || has("epsilon") {
        Some(Subcommand::Vmc)
    } else if has("order") {
        Some(Subcommand::Symbolic)
    } else {
        None
    }
}

/// Validate raw inputs into a [`RunConfig`]; model files named by `model`
/// are read relative to the working directory.
pub fn resolve(inputs: &Inputs) -> CliResult<RunConfig> {
    let doc = match &inputs.config_text {
        Some(text) => config::parse(text)?,
        None => Document::default(),
    };
    for (name, line) in &doc.sections {
        if !SECTIONS.contains(&name.as_str()) {
            return Err(CliError::config(format!(
                "line {line}: unknown section [{name}]{}",
                suggestion(name, &SECTIONS)
            )));
        }
    }
    let mut merged = BTreeMap::new();
    collect(&doc, &mut merged);
    for (k, v) in &inputs.overrides {
        merged.insert(
            k.clone(),
            (
                Setting {
                    value: v.clone(),
                    origin: Origin::Flag,
                },
                None,
            ),
        );
    }

    let subcommand = match inputs.subcommand {
        Some(s) => s,
        None => {
            let by_key = match merged.get("command") {
                Some((
                    Setting {
                        value: Value::Str(s),
                        ..
                    },
                    _,
                )) => Some(Subcommand::from_name(s).ok_or_else(|| {
                    let names: Vec<&str> = Subcommand::ALL.iter().map(|s| s.name()).collect();
                    CliError::config(format!("unknown command {s:?}{}", suggestion(s, &names)))
                })?),
                Some(_) => return Err(CliError::config("`command` must be a string")),
                None => None,
            };
            let by_section = || {
                let named: Vec<Subcommand> = doc
                    .sections
                    .iter()
                    .filter_map(|(n, _)| Subcommand::from_name(n))
                    .collect();
                (named.len() == 1).then(|| named[0])
            };
            by_key
                .or_else(by_section)
                .or_else(|| infer(&merged))
                .ok_or_else(|| CliError::config("cannot tell which subcommand to run; name one"))?
        }
    };

    // Model files contribute model keys; explicit settings win.
    if subcommand == Subcommand::Spectral {
        if let Some((
            Setting {
                value: Value::Str(path),
                ..
            },
            _,
        )) = merged.get("model").cloned()
        {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::io(format!("cannot read model file {path}: {e}")))?;
            let model_doc =
                config::parse(&text).map_err(|e| CliError::config(format!("{path}: {e}")))?;
            for e in &model_doc.entries {
                if !MODEL_KEYS[1..].contains(&e.key.as_str()) {
                    return Err(CliError::config(format!(
                        "{path}: line {}: unknown model key `{}`{}",
                        e.line,
                        e.key,
                        suggestion(&e.key, &MODEL_KEYS[1..])
                    )));
                }
                merged.entry(e.key.clone()).or_insert((
                    Setting {
                        value: e.value.clone(),
                        origin: Origin::Line(e.line),
                    },
                    None,
                ));
            }
        }
    }

    let allowed = subcommand.keys();
    let known = all_keys();
    let mut values = BTreeMap::new();
    for (key, (setting, section)) in merged {
        let other_command = section
            .as_deref()
            .and_then(Subcommand::from_name)
            .is_some_and(|s| s != subcommand);
        if other_command {
            continue;
        }
        if !allowed.contains(&key.as_str()) {
            let at = match setting.origin {
                Origin::Line(n) => format!("line {n}: "),
                Origin::Flag => String::new(),
            };
            return Err(CliError::config(if known.contains(&key.as_str()) {
                format!("{at}key `{key}` does not apply to {}", subcommand.name())
            } else {
                format!("{at}unknown key `{key}`{}", suggestion(&key, &known))
            }));
        }
        values.insert(key, setting);
    }
    let r = Resolver { subcommand, values };

    let config_seed = match r.raw("seed") {
        None => None,
        Some(Value::Int(i)) if *i >= 0 => Some(*i as u64),
        Some(_) => return Err(r.type_error("seed", "a non-negative integer")),
    };
    let seed = inputs.seed.or(config_seed).unwrap_or(0);
    let output_path = inputs.output.clone().or(r.path("output")?);

    let params = match subcommand {
        Subcommand::Symbolic => {
            let order = r.usize("order")?.unwrap_or(6);
            if order == 0 {
                return Err(CliError::config("`order` must be >= 1"));
            }
            Params::Symbolic(SymbolicParams {
                order,
                sum_over_states: r.bool("sum_over_states")?.unwrap_or(false),
            })
        }
        Subcommand::Spectral => {
            let order = r.usize("order")?.unwrap_or(6);
            if order == 0 {
                return Err(CliError::config("`order` must be >= 1"));
            }
            Params::Spectral(SpectralParams {
                model: r.model()?,
                order,
                oracle: r.bool("oracle")?.unwrap_or(false),
            })
        }
        Subcommand::Vmc => Params::Vmc(VmcParams {
            walker: r.walker(true)?,
            csv_output: r.path("csv_output")?,
        }),
        Subcommand::SptOrders => {
            let source = match r.path("series")? {
                Some(path) => SeriesSource::Csv {
                    path,
                    epsilon: r.require("epsilon", r.positive("epsilon")?)?,
                    burn_in: r.usize("burn_in")?.unwrap_or(0),
                },
                None => SeriesSource::Walker(r.walker(true)?),
            };
            let max_order = r
                .usize("max_order")?
                .unwrap_or(spt_core::estimators::DEFAULT_STOCHASTIC_ORDER);
            if max_order == 0 {
                return Err(CliError::config("`max_order` must be >= 1"));
            }
            let tau_points = r.usize("tau_points")?.unwrap_or(16);
            if tau_points < 4 {
                return Err(CliError::config("`tau_points` must be >= 4"));
            }
            Params::SptOrders(SptOrdersParams {
                source,
                tau_min: r.positive("tau_min")?,
                tau_max: r.positive("tau_max")?,
                tau_points,
                max_order,
                allow_high_orders: r.bool("allow_high_orders")?.unwrap_or(false),
                batches: r
                    .usize("batches")?
                    .unwrap_or(spt_core::estimators::DEFAULT_BATCHES),
                csv_output: r.path("csv_output")?,
            })
        }
        Subcommand::Rqmc => {
            let n_beads = r.require("n_beads", r.usize("n_beads")?)?;
            if n_beads < 2 {
                return Err(CliError::config(format!(
                    "{} must be >= 2",
                    r.locate("n_beads")
                )));
            }
            let workers = r.usize("workers")?.unwrap_or(1).max(1);
            let observables = match r.raw("observables") {
                None => Vec::new(),
                Some(Value::List(items)) => items
                    .iter()
                    .map(|v| match v {
                        Value::Str(s) if OBSERVABLES.contains(&s.as_str()) => Ok(s.clone()),
                        Value::Str(s) => Err(CliError::config(format!(
                            "unknown observable {s:?}; available: {}{}",
                            OBSERVABLES.join(", "),
                            suggestion(s, &OBSERVABLES)
                        ))),
                        _ => Err(r.type_error("observables", "a list of names")),
                    })
                    .collect::<CliResult<Vec<String>>>()?,
                Some(_) => return Err(r.type_error("observables", "a list of names")),
            };
            Params::Rqmc(RqmcParams {
                walker: r.walker(false)?,
                n_beads,
                sweeps: r.require("sweeps", r.usize("sweeps")?)?,
                burn_in_sweeps: r.usize("burn_in_sweeps")?,
                direction_policy: match r
                    .choice("direction_policy", &["bounce", "random"])?
                    .as_deref()
                {
                    Some("random") => DirectionPolicy::Random,
                    _ => DirectionPolicy::Bounce,
                },
                proposal_correction: r.bool("proposal_correction")?.unwrap_or(false),
                extrapolate: r.bool("extrapolate")?.unwrap_or(false),
                workers,
                observables,
                csv_output: r.path("csv_output")?,
            })
        }
    };
    Ok(RunConfig {
        subcommand,
        params,
        seed,
        output_path,
    })
}

/// Read a config file, mapping failures to I/O errors.
pub fn read_config(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorKind;

    fn from_text(text: &str) -> CliResult<RunConfig> {
        resolve(&Inputs {
            config_text: Some(text.into()),
            ..Inputs::default()
        })
    }

    #[test]
    fn minimal_symbolic() {
        let c = from_text("order = 6\n").unwrap();
        assert_eq!(c.subcommand, Subcommand::Symbolic);
        assert_eq!(
            c.params,
            Params::Symbolic(SymbolicParams {
                order: 6,
                sum_over_states: false
            })
        );
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn missing_alpha_is_named() {
        let e = from_text("command = vmc\nepsilon = 0.01\nsteps = 1000\n").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Config);
        assert!(e.message.contains("`alpha`"), "{e}");
    }

    #[test]
    fn misspelt_key_gets_a_hint() {
        let e = from_text("command = vmc\nalpa = 1.2\n").unwrap_err();
        assert!(e.message.contains("unknown key `alpa`"), "{e}");
        assert!(e.message.contains("did you mean `alpha`?"), "{e}");
        assert!(e.message.starts_with("line 2"), "{e}");
    }

    #[test]
    fn subcommand_resolution_order() {
        let text = "command = rqmc\n[vmc]\nalpha = 1.2\n";
        let inputs = Inputs {
            config_text: Some(text.into()),
            subcommand: Some(Subcommand::Symbolic),
            ..Inputs::default()
        };
        assert_eq!(resolve(&inputs).unwrap().subcommand, Subcommand::Symbolic);
        let e = from_text(text).unwrap_err();
        assert!(e.message.contains("n_beads"), "{e}");
        let c = from_text("[vmc]\nalpha = 1.2\nepsilon = 0.01\nsteps = 5000\n").unwrap();
        assert_eq!(c.subcommand, Subcommand::Vmc);
        let c = from_text("energies = [0, 1]\nwmat = [[0, 0.1], [0.1, 0]]\n").unwrap();
        assert_eq!(c.subcommand, Subcommand::Spectral);
    }

    #[test]
    fn other_subcommand_sections_are_skipped() {
        let text = "[walker]\nalpha = 1.2\nepsilon = 0.01\nsteps = 5000\n[rqmc]\nn_beads = 100\nsweeps = 10\n";
        let inputs = Inputs {
            config_text: Some(text.into()),
            subcommand: Some(Subcommand::Vmc),
            ..Inputs::default()
        };
        assert_eq!(resolve(&inputs).unwrap().subcommand, Subcommand::Vmc);
        let e = from_text("command = vmc\nalpha = 1.2\nepsilon = 0.01\nsteps = 10\nn_beads = 3\n")
            .unwrap_err();
        assert!(e.message.contains("does not apply"), "{e}");
    }

    #[test]
    fn seed_precedence() {
        let text = "order = 2\nseed = 7\n";
        let c = resolve(&Inputs {
            config_text: Some(text.into()),
            seed: Some(3),
            ..Inputs::default()
        })
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(from_text(text).unwrap().seed, 7);
    }

    #[test]
    fn type_errors_name_line_and_key() {
        let e = from_text("command = vmc\nalpha = gaussian\n").unwrap_err();
        assert!(
            e.message.contains("`alpha` (line 2): expected a number"),
            "{e}"
        );
        let e = from_text("command = rqmc\nalpha = 1\nepsilon = 0.1\nn_beads = 10\nsweeps = 10\ndirection_policy = bounc\n")
            .unwrap_err();
        assert!(e.message.contains("did you mean `bounce`?"), "{e}");
        assert!(from_text("[walkr]\n")
            .unwrap_err()
            .message
            .contains("did you mean `walker`?"));
    }

    #[test]
    fn walker_defaults() {
        let c =
            from_text("command = vmc\nalpha = 1.2\nepsilon = 0.005\nsteps = 2000000\n").unwrap();
        let Params::Vmc(v) = c.params else { panic!() };
        assert_eq!(v.walker.trial, TrialSpec::Gaussian { alpha: 1.2 });
        assert_eq!(v.walker.potential, PotentialSpec::Harmonic);
        assert_eq!(v.walker.burn_in, 20_000);
        assert_eq!(v.walker.dimensions, 1);
    }
}

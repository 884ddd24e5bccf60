//! Config-driven experiment sweeps producing CSV rows.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    berman_bound, chain_estimates, concentration_diagnostic, subgaussian_max_bound, BayesPosteriorMean,
    DisclosurePicker,
};
use crate::error::{Error, Result};
use crate::game::{verify_disclosure_bound, GAME_N_CAP};
use crate::model::{floor_fraction, CovariateVector, DisclosureSet, ModelShape};
use crate::montecarlo::{derive_seed, Estimate};
use crate::priors::{NoiseSpec, PriorSpec};
use crate::scan::DEFAULT_BUDGET;
use crate::utility::UtilitySpec;
use crate::voc::{compare_evaluators, expected_value_of_context, threshold_n, EvalMode, Verdict, VocOptions};

/// CSV header shared by every experiment.
pub const CSV_HEADER: [&str; 13] = [
    "experiment", "n", "s", "alpha_h", "alpha_b", "prior", "utility", "quantity", "mean", "se", "reps", "exact", "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Decay,
    Compare,
    ThresholdFigure,
    Counterexample,
    Chain,
    DisclosureCheck,
    Concentration,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Decay,
        Experiment::Compare,
        Experiment::ThresholdFigure,
        Experiment::Counterexample,
        Experiment::Chain,
        Experiment::DisclosureCheck,
        Experiment::Concentration,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Decay => "decay",
            Experiment::Compare => "compare",
            Experiment::ThresholdFigure => "threshold_figure",
            Experiment::Counterexample => "counterexample",
            Experiment::Chain => "chain",
            Experiment::DisclosureCheck => "disclosure_check",
            Experiment::Concentration => "concentration",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Experiment::Decay => "expected value of context V(n,x) over an n sweep",
            Experiment::Compare => "black box vs best/worst human disclosure payoffs and verdict",
            Experiment::ThresholdFigure => "threshold N over an alpha_b sweep, with optional reference values",
            Experiment::Counterexample => "V(n,x) with its quarter-share reference floor",
            Experiment::Chain => "paired proof-chain maxima and the sub-Gaussian and Berman bounds",
            Experiment::DisclosureCheck => "equilibrium disclosure value vs maximum value of context",
            Experiment::Concentration => "variance of the posterior mean of a picked disclosure times K_n",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentPattern {
    AllOnes,
    AllZeros,
    /// `(1, 0, 1, 0, ...)`.
    Alternating,
}

/// The agent's covariate vector, by pattern or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentSpec {
    Pattern(AgentPattern),
    Explicit(Vec<u8>),
}

impl AgentSpec {
    pub fn vector(&self, n: u32) -> Result<CovariateVector> {
        match self {
            AgentSpec::Pattern(AgentPattern::AllOnes) => Ok(CovariateVector::ones(n)),
            AgentSpec::Pattern(AgentPattern::AllZeros) => Ok(CovariateVector::zeros(n)),
            AgentSpec::Pattern(AgentPattern::Alternating) => {
                let v: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
                CovariateVector::from_values(&v)
            }
            AgentSpec::Explicit(v) => {
                if v.len() != n as usize {
                    return Err(Error::Config(format!("x has {} entries but n = {n}", v.len())));
                }
                CovariateVector::from_values(v)
            }
        }
    }
}

fn default_s() -> u32 {
    0
}
fn default_alpha_b() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}
fn default_ybar() -> f64 {
    1.0
}
fn default_agent() -> AgentSpec {
    AgentSpec::Pattern(AgentPattern::AllOnes)
}
fn default_reps() -> u64 {
    1000
}
fn default_z() -> f64 {
    3.0
}
fn default_budget() -> u64 {
    DEFAULT_BUDGET as u64
}
fn default_prior() -> PriorSpec {
    PriorSpec::UniformBinary
}
fn default_utility() -> UtilitySpec {
    UtilitySpec::Linear
}

/// One experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub n: Vec<u32>,
    #[serde(default = "default_s")]
    pub s: u32,
    pub alpha_h: OneOrMany<f64>,
    #[serde(default = "default_alpha_b")]
    pub alpha_b: OneOrMany<f64>,
    #[serde(default = "default_ybar")]
    pub ybar: f64,
    #[serde(default = "default_agent")]
    pub x: AgentSpec,
    #[serde(default)]
    pub known: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default)]
    pub mode: EvalMode,
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Output file name; defaults to `<experiment>.csv`.
    #[serde(default)]
    pub output: Option<String>,
    /// The constant `C` of the threshold inequality.
    #[serde(default)]
    pub c_constant: Option<f64>,
    /// `(alpha_b, N)` pairs to compare the computed threshold against.
    #[serde(default)]
    pub reference_threshold: Vec<(f64, u64)>,
    #[serde(default)]
    pub picker: DisclosurePicker,
    #[serde(default = "default_prior")]
    pub prior: PriorSpec,
    #[serde(default = "default_utility")]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

/// A validation error located at the line that sets `key`.
fn at_key(source: &str, key: &str, message: impl fmt::Display) -> Error {
    match line_of(source, key) {
        Some(line) => Error::Config(format!("line {line}: {message}")),
        None => Error::Config(message.to_string()),
    }
}

/// First line assigning `key` or opening a `[key]` table (1-based).
fn line_of(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
            || t == format!("[{key}]")
            || t.starts_with(&format!("[{key}."))
    })
    .map(|i| i + 1)
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n: Option<u32>,
    pub alpha_h: f64,
    pub alpha_b: f64,
}

impl ExperimentConfig {
    /// Parses and validates a config file's contents.
    pub fn from_toml(source: &str) -> Result<Self> {
        let config: Self = toml::from_str(source).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let line = source[..span.start.min(source.len())].matches('\n').count() + 1;
                    Error::Parse(format!("line {line}: {msg}"))
                }
                None => Error::Parse(msg),
            }
        })?;
        config.validate(source)?;
        Ok(config)
    }

    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("{}.csv", self.experiment))
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let ns: Vec<Option<u32>> = if self.experiment == Experiment::ThresholdFigure {
            vec![None]
        } else {
            self.n.iter().map(|&n| Some(n)).collect()
        };
        let mut out = Vec::new();
        for &n in &ns {
            for alpha_h in self.alpha_h.to_vec() {
                for alpha_b in self.alpha_b.to_vec() {
                    out.push(SweepPoint { n, alpha_h, alpha_b });
                }
            }
        }
        out
    }

    fn shape(&self, n: u32, p: &SweepPoint) -> Result<ModelShape> {
        ModelShape::new(n, self.s, p.alpha_h, p.alpha_b, self.ybar)
    }

    /// Checks every sweep point. `source` is the file text, for line numbers.
    pub fn validate(&self, source: &str) -> Result<()> {
        let e = |key: &str, msg: String| at_key(source, key, msg);
        if self.alpha_h.to_vec().is_empty() {
            return Err(e("alpha_h", "alpha_h must list at least one value".into()));
        }
        if self.alpha_b.to_vec().is_empty() {
            return Err(e("alpha_b", "alpha_b must list at least one value".into()));
        }
        if !(self.z >= 0.0) {
            return Err(e("z", format!("z = {} must be >= 0", self.z)));
        }
        if self.experiment == Experiment::ThresholdFigure {
            let c = self.c_constant.ok_or_else(|| e("experiment", "threshold_figure needs c_constant".into()))?;
            for p in self.points() {
                threshold_n(p.alpha_b, p.alpha_h, c).map_err(|err| e("c_constant", err.to_string()))?;
            }
            return Ok(());
        }
        if self.n.is_empty() {
            return Err(e("n", "n must list at least one value".into()));
        }
        if self.reps < 2 && self.experiment != Experiment::DisclosureCheck {
            return Err(e("reps", format!("reps = {} must be at least 2", self.reps)));
        }
        if let Some(noise) = &self.noise {
            noise.validate().map_err(|err| e("noise", err.to_string()))?;
        }
        self.utility.validate(self.ybar).map_err(|err| e("utility", err.to_string()))?;
        for p in self.points() {
            let n = p.n.expect("n sweep");
            let shape = self.shape(n, &p).map_err(|err| {
                let msg = err.to_string();
                let key = ["alpha_h", "alpha_b", "ybar", "s ="]
                    .into_iter()
                    .find(|k| msg.contains(&format!(": {k}")))
                    .map_or("n", |k| k.trim_end_matches(" ="));
                e(key, format!("n = {n}: {msg}"))
            })?;
            self.x.vector(n).map_err(|err| e("x", err.to_string()))?;
            self.prior.validate(&shape).map_err(|err| e("prior", format!("n = {n}: {err}")))?;
            DisclosureSet::from_indices(&shape, &self.known).map_err(|err| e("known", err.to_string()))?;
            if let Some(noise) = &self.noise {
                noise.variance(n).map_err(|err| e("noise", err.to_string()))?;
            }
            match self.experiment {
                Experiment::Compare => {
                    shape.require_comparable().map_err(|err| e("alpha_b", format!("n = {n}: {err}")))?
                }
                Experiment::Chain if self.prior.iid_base().is_none() => {
                    return Err(e("prior", format!("chain needs an i.i.d. prior, got {}", self.prior)))
                }
                Experiment::DisclosureCheck => {
                    if n > GAME_N_CAP {
                        return Err(e("n", format!("n = {n} exceeds the game cap {GAME_N_CAP}")));
                    }
                    if self.utility.depends_on_type() {
                        return Err(e("utility", format!("{} must depend on yhat alone", self.utility)));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn options(&self, shape: &ModelShape) -> Result<VocOptions> {
        Ok(VocOptions {
            known: DisclosureSet::from_indices(shape, &self.known)?,
            budget: u128::from(self.budget),
            mode: self.mode,
            noise: self.noise.clone(),
            z: self.z,
        })
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub n: Option<u32>,
    pub s: u32,
    pub alpha_h: f64,
    pub alpha_b: f64,
    pub prior: String,
    pub utility: String,
    pub quantity: String,
    pub mean: f64,
    pub se: f64,
    pub reps: u64,
    pub exact: bool,
    pub seed: u64,
}

impl ResultRow {
    pub fn record(&self) -> [String; 13] {
        [
            self.experiment.to_string(),
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            self.s.to_string(),
            self.alpha_h.to_string(),
            self.alpha_b.to_string(),
            self.prior.clone(),
            self.utility.clone(),
            self.quantity.clone(),
            self.mean.to_string(),
            self.se.to_string(),
            self.reps.to_string(),
            self.exact.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Writes rows with the standard header.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
    Ok(())
}

struct RowBuilder<'a> {
    config: &'a ExperimentConfig,
    point: SweepPoint,
    seed: u64,
    rows: Vec<ResultRow>,
}

impl RowBuilder<'_> {
    fn push(&mut self, quantity: &str, e: Estimate) {
        self.rows.push(ResultRow {
            experiment: self.config.experiment,
            n: self.point.n,
            s: self.config.s,
            alpha_h: self.point.alpha_h,
            alpha_b: self.point.alpha_b,
            prior: self.config.prior.to_string(),
            utility: self.config.utility.label(),
            quantity: quantity.into(),
            mean: e.mean,
            se: e.se,
            reps: e.reps,
            exact: e.exact,
            seed: self.seed,
        });
    }

    fn push_value(&mut self, quantity: &str, value: f64) {
        self.push(quantity, Estimate::exact(value, 1));
    }
}

/// Runs every sweep point in order. `seed_override` replaces the config's master seed.
pub fn run_experiment(config: &ExperimentConfig, seed_override: Option<u64>) -> Result<Vec<ResultRow>> {
    let master = seed_override.unwrap_or(config.seed);
    let mut rows = Vec::new();
    for (index, point) in config.points().into_iter().enumerate() {
        let seed = derive_seed(master, index as u64);
        let mut b = RowBuilder { config, point, seed, rows: Vec::new() };
        run_point(&mut b)?;
        rows.extend(b.rows);
    }
    Ok(rows)
}

fn run_point(b: &mut RowBuilder<'_>) -> Result<()> {
    let c = b.config;
    let p = b.point;
    if c.experiment == Experiment::ThresholdFigure {
        let cc = c.c_constant.ok_or_else(|| Error::Config("threshold_figure needs c_constant".into()))?;
        let t = threshold_n(p.alpha_b, p.alpha_h, cc)?;
        b.push_value("threshold_N", t.min_integer as f64);
        b.push_value("threshold_real_root", t.real_root);
        if let Some(&(_, reference)) = c.reference_threshold.iter().find(|(ab, _)| (ab - p.alpha_b).abs() < 1e-12) {
            b.push_value("threshold_reference", reference as f64);
            b.push_value("threshold_agrees", f64::from(u8::from(t.agrees_with(reference))));
        }
        return Ok(());
    }
    let n = p.n.expect("n sweep");
    let shape = c.shape(n, &p)?;
    let x = c.x.vector(n)?;
    let opts = c.options(&shape)?;
    let seed = b.seed;
    match c.experiment {
        Experiment::Decay => {
            let v = expected_value_of_context(&c.prior, x, &c.utility, &shape, c.reps, seed, &opts)?;
            b.push("voc", v);
        }
        Experiment::Counterexample => {
            let v = expected_value_of_context(&c.prior, x, &c.utility, &shape, c.reps, seed, &opts)?;
            b.push("voc", v);
            let share = f64::from(floor_fraction(p.alpha_h, n)) / (4.0 * f64::from(n));
            b.push_value("voc_reference_floor", share);
        }
        Experiment::Compare => {
            let r = compare_evaluators(&c.prior, x, &c.utility, &shape, c.reps, seed, &opts)?;
            b.push("blackbox", r.blackbox);
            b.push("human_best", r.human_best);
            b.push("human_worst", r.human_worst);
            let code = match r.verdict {
                Verdict::PrefersBlackBox => 1.0,
                Verdict::PrefersHuman => -1.0,
                Verdict::Inconclusive => 0.0,
            };
            b.push_value("verdict", code);
        }
        Experiment::Chain => {
            let ch = chain_estimates(&c.prior, x, &shape, c.reps, seed)?;
            b.push("v_n", ch.v_n);
            b.push("v_ind", ch.v_ind);
            b.push("v_iid", ch.v_iid);
            b.push("v_normal", ch.v_normal);
            b.push("ind_minus_n", ch.ind_minus_n);
            b.push("iid_minus_ind", ch.iid_minus_ind);
            b.push("iid_minus_normal", ch.iid_minus_normal);
            b.push_value("subgaussian_bound", subgaussian_max_bound(&shape, c.ybar));
            b.push_value("berman_bound", berman_bound(&shape, ch.var_y));
        }
        Experiment::DisclosureCheck => {
            let r = verify_disclosure_bound(&c.prior, &c.utility, &shape, c.reps, seed)?;
            let stat = |v: f64| Estimate { mean: v, se: 0.0, reps: r.draws, exact: false };
            b.push("violations", stat(r.violations as f64));
            b.push("max_gap", stat(r.max_gap));
            b.push("empty_draws", stat(r.empty_draws as f64));
        }
        Experiment::Concentration => {
            let rows = concentration_diagnostic(&BayesPosteriorMean, &c.prior, &[shape], c.picker, c.reps, seed)?;
            let r = rows[0];
            b.push("eval_mean", r.mean);
            let stat = |v: f64| Estimate { mean: v, se: 0.0, reps: c.reps, exact: false };
            b.push("eval_variance", stat(r.variance));
            b.push_value("disclosure_sets", r.disclosure_sets);
            b.push("variance_times_k", stat(r.product));
            b.push("unbiased", stat(f64::from(u8::from(r.unbiased))));
        }
        Experiment::ThresholdFigure => unreachable!("handled above"),
    }
    Ok(())
}

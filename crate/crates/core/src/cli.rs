//! Command-line front end: argument parsing, the TOML run configuration and
//! the five subcommands.
//!
//! Settings come from built-in defaults, then an optional `--config` file,
//! then command-line flags. `--seed` falls back to `AREALRISK_SEED`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, Estimator, RiskSummary};
use crate::graph::{load_adjacency, AdjacencyGraph};
use crate::metrics::{self, ForecastConfig};
use crate::model::{load_dataset, load_populations, Dataset, Family, GammaPrior, Link, ModelSpec, Temporal};
use crate::sampler::{run_chain, SamplerConfig};
use crate::seed::derive_seed;
use crate::simstudy::{self, Hub, HubRecipe, PanelRecipe, StudyConfig};

pub const DEFAULT_SEED: u64 = 20_130_101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub data: DataSection,
    pub model: ModelSection,
    pub sampler: SamplerSection,
    pub study: StudySection,
    pub forecast: ForecastSection,
    pub simulate: SimulateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            output: PathBuf::from("out"),
            data: DataSection::default(),
            model: ModelSection::default(),
            sampler: SamplerSection::default(),
            study: StudySection::default(),
            forecast: ForecastSection::default(),
            simulate: SimulateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Edge list (`from,to`) or 0/1 matrix.
    pub adjacency: Option<PathBuf>,
    /// `region,[year,]y,n[,covariates...]`.
    pub data: Option<PathBuf>,
    /// `region,n`; used by `study` and `simulate` instead of a synthetic lattice.
    pub populations: Option<PathBuf>,
    /// Time slice to fit with a static model when the data is a panel.
    pub time: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    pub link: String,
    pub c0: Option<f64>,
    pub temporal: String,
    pub tau_shape: f64,
    pub tau_rate: f64,
    pub level: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            family: "cg".into(),
            link: "logit".into(),
            c0: None,
            temporal: "static".into(),
            tau_shape: 1.0,
            tau_rate: 1.0,
            level: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt_window: usize,
    pub initial_scale: f64,
    pub acceptance_low: f64,
    pub acceptance_high: f64,
    pub dump_draws: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            iterations: d.n_iterations,
            burn_in: d.burn_in,
            thin: d.thin,
            adapt_window: d.adapt_window,
            initial_scale: d.initial_scale,
            acceptance_low: d.target_acceptance.0,
            acceptance_high: d.target_acceptance.1,
            dump_draws: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubEntry {
    pub region: String,
    pub bump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub replicates: usize,
    pub population_scale: f64,
    pub estimators: Vec<String>,
    pub links: Vec<String>,
    pub jobs: usize,
    pub rows: usize,
    pub cols: usize,
    pub baseline: f64,
    pub neighbor_bump: f64,
    /// Empty: the three most populous regions with bumps 0.0015, 0.001, 0.001.
    pub hubs: Vec<HubEntry>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            replicates: 100,
            population_scale: 1.0,
            estimators: Estimator::ALL.iter().map(|e| e.tag().to_owned()).collect(),
            links: vec!["logit".into()],
            jobs: 1,
            rows: 10,
            cols: 10,
            baseline: 0.001,
            neighbor_bump: 0.0005,
            hubs: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    /// Time label to hold out; the last one when absent.
    pub holdout: Option<String>,
    pub families: Vec<String>,
    pub compare_static: bool,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            holdout: None,
            families: vec!["is".into(), "cg".into()],
            compare_static: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub rows: usize,
    pub cols: usize,
    /// 1 writes a static dataset; more writes a panel from the dynamic model.
    pub years: usize,
    pub first_year: i64,
    pub rho: f64,
    pub omega: f64,
    pub population_scale: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let p = PanelRecipe::default();
        Self {
            rows: 10,
            cols: 10,
            years: 1,
            first_year: p.first_time,
            rho: p.rho,
            omega: p.omega,
            population_scale: 1.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn family(&self) -> Result<Family> {
        parse_family(&self.model.family)
    }

    pub fn link(&self) -> Result<Link> {
        Link::parse(&self.model.link, self.model.c0)
    }

    pub fn temporal(&self) -> Result<Temporal> {
        match self.model.temporal.as_str() {
            "static" => Ok(Temporal::Static),
            "dynamic" | "ar1" => Ok(Temporal::DynamicAr1),
            other => Err(Error::Config(format!("unknown temporal structure `{other}`"))),
        }
    }

    pub fn spec(&self, family: Family, temporal: Temporal) -> Result<ModelSpec> {
        let mut spec = ModelSpec::new(family, self.link()?, temporal);
        spec.tau_prior = GammaPrior {
            shape: self.model.tau_shape,
            rate: self.model.tau_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Sampler settings with the chain seed derived from the run seed.
    pub fn sampler_config(&self, label: &str) -> Result<SamplerConfig> {
        let s = &self.sampler;
        let c = SamplerConfig {
            n_iterations: s.iterations,
            burn_in: s.burn_in,
            thin: s.thin,
            seed: derive_seed(self.seed, label),
            adapt_window: s.adapt_window,
            target_acceptance: (s.acceptance_low, s.acceptance_high),
            adapt_only_during_burn_in: true,
            initial_scale: s.initial_scale,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        let c0 = self.model.c0;
        let config = StudyConfig {
            replicates: self.study.replicates,
            seed: self.seed,
            population_scale: self.study.population_scale,
            estimators: self
                .study
                .estimators
                .iter()
                .map(|e| Estimator::parse(e).map_err(|_| Error::Config(format!("unknown estimator `{e}`"))))
                .collect::<Result<_>>()?,
            links: self
                .study
                .links
                .iter()
                .map(|l| Link::parse(l, c0))
                .collect::<Result<_>>()?,
            sampler: self.sampler_config("study")?,
            level: self.model.level,
            jobs: self.study.jobs,
        };
        config.validate()?;
        Ok(config)
    }

    fn adjacency_path(&self) -> Result<&Path> {
        self.data
            .adjacency
            .as_deref()
            .ok_or_else(|| Error::Config("missing key `data.adjacency` (or --adjacency)".into()))
    }

    fn data_path(&self) -> Result<&Path> {
        self.data
            .data
            .as_deref()
            .ok_or_else(|| Error::Config("missing key `data.data` (or --data)".into()))
    }
}

pub fn parse_family(name: &str) -> Result<Family> {
    match name.to_ascii_lowercase().as_str() {
        "is" => Ok(Family::Is),
        "cg" => Ok(Family::Cg),
        other => Err(Error::Config(format!("unknown family `{other}` (expected is or cg)"))),
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|v| v.trim().to_owned()).filter(|v| !v.is_empty()).collect()
}

#[derive(Debug, Parser)]
#[command(name = "arealrisk", version, about = "Bayesian disease mapping with CAR spatial effects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write risk summaries.
    Fit(FitArgs),
    /// Write a synthetic lattice, truth map and simulated counts.
    Simulate(SimulateArgs),
    /// Run a replicated simulation study.
    Study(StudyArgs),
    /// Fit dynamic models and score a one-step-ahead forecast.
    Forecast(ForecastArgs),
    /// Fit both families to the same data and compare their estimators.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, env = "AREALRISK_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Nominal level of the equal-tailed intervals.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// `is` or `cg`.
    #[arg(long)]
    pub family: Option<String>,
    /// `logit`, `cloglog` or `skewed_logit`.
    #[arg(long)]
    pub link: Option<String>,
    /// Skewness constant of the skewed logit link.
    #[arg(long)]
    pub c0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// `static` or `dynamic`.
    #[arg(long)]
    pub temporal: Option<String>,
    /// Time slice to fit with a static model when the data is a panel.
    #[arg(long)]
    pub time: Option<String>,
    /// Also write every retained draw to `draws.csv`.
    #[arg(long)]
    pub dump_draws: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    #[arg(long)]
    pub populations: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub years: Option<usize>,
    #[arg(long)]
    pub population_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    #[arg(long)]
    pub populations: Option<PathBuf>,
    /// Number of replicates.
    #[arg(long, short = 'B')]
    pub replicates: Option<usize>,
    /// Worker threads for replicates.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Multiplies every population before simulation (0.1 for the n/10 arm).
    #[arg(long)]
    pub population_scale: Option<f64>,
    /// Comma-separated links for the CG fits.
    #[arg(long)]
    pub links: Option<String>,
    #[arg(long)]
    pub c0: Option<f64>,
    /// Comma-separated estimators (`r_IS,r_CG_tilde,r_CG`).
    #[arg(long)]
    pub estimators: Option<String>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long)]
    pub c0: Option<f64>,
    /// Time label to hold out (default: the last one).
    #[arg(long)]
    pub holdout: Option<String>,
    /// Comma-separated families to fit.
    #[arg(long)]
    pub families: Option<String>,
    /// Skip the static comparison fit of the last fitted slice.
    #[arg(long)]
    pub no_static: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub time: Option<String>,
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_toml(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(o) = &common.output {
        config.output.clone_from(o);
    }
    let s = &mut config.sampler;
    s.iterations = common.iterations.unwrap_or(s.iterations);
    s.burn_in = common.burn_in.unwrap_or(s.burn_in);
    s.thin = common.thin.unwrap_or(s.thin);
    config.model.level = common.level.unwrap_or(config.model.level);
    Ok(config)
}

fn apply_data(config: &mut RunConfig, input: &DataArgs) {
    if let Some(a) = &input.adjacency {
        config.data.adjacency = Some(a.clone());
    }
    if let Some(d) = &input.data {
        config.data.data = Some(d.clone());
    }
}

fn apply_link(config: &mut RunConfig, link: &Option<String>, c0: Option<f64>) {
    if let Some(l) = link {
        config.model.link.clone_from(l);
    }
    if c0.is_some() {
        config.model.c0 = c0;
    }
}

/// Effective configuration for a parsed command line.
pub fn resolve(command: &Command) -> Result<(RunConfig, bool)> {
    match command {
        Command::Fit(a) => {
            let mut c = base_config(&a.common)?;
            apply_data(&mut c, &a.input);
            apply_link(&mut c, &a.model.link, a.model.c0);
            if let Some(f) = &a.model.family {
                c.model.family.clone_from(f);
            }
            if let Some(t) = &a.temporal {
                c.model.temporal.clone_from(t);
            }
            if a.time.is_some() {
                c.data.time.clone_from(&a.time);
            }
            c.sampler.dump_draws |= a.dump_draws;
            Ok((c, a.common.print_config))
        }
        Command::Simulate(a) => {
            let mut c = base_config(&a.common)?;
            if a.adjacency.is_some() {
                c.data.adjacency.clone_from(&a.adjacency);
            }
            if a.populations.is_some() {
                c.data.populations.clone_from(&a.populations);
            }
            let s = &mut c.simulate;
            s.rows = a.rows.unwrap_or(s.rows);
            s.cols = a.cols.unwrap_or(s.cols);
            s.years = a.years.unwrap_or(s.years);
            s.population_scale = a.population_scale.unwrap_or(s.population_scale);
            Ok((c, a.common.print_config))
        }
        Command::Study(a) => {
            let mut c = base_config(&a.common)?;
            if a.adjacency.is_some() {
                c.data.adjacency.clone_from(&a.adjacency);
            }
            if a.populations.is_some() {
                c.data.populations.clone_from(&a.populations);
            }
            if a.c0.is_some() {
                c.model.c0 = a.c0;
            }
            let s = &mut c.study;
            s.replicates = a.replicates.unwrap_or(s.replicates);
            s.jobs = a.jobs.unwrap_or(s.jobs);
            s.population_scale = a.population_scale.unwrap_or(s.population_scale);
            if let Some(l) = &a.links {
                s.links = split_list(l);
            }
            if let Some(e) = &a.estimators {
                s.estimators = split_list(e);
            }
            Ok((c, a.common.print_config))
        }
        Command::Forecast(a) => {
            let mut c = base_config(&a.common)?;
            apply_data(&mut c, &a.input);
            apply_link(&mut c, &a.link, a.c0);
            if a.holdout.is_some() {
                c.forecast.holdout.clone_from(&a.holdout);
            }
            if let Some(f) = &a.families {
                c.forecast.families = split_list(f);
            }
            if a.no_static {
                c.forecast.compare_static = false;
            }
            Ok((c, a.common.print_config))
        }
        Command::Compare(a) => {
            let mut c = base_config(&a.common)?;
            apply_data(&mut c, &a.input);
            apply_link(&mut c, &a.link, a.c0);
            if a.time.is_some() {
                c.data.time.clone_from(&a.time);
            }
            Ok((c, a.common.print_config))
        }
    }
}

/// Serializes `value`, writes it with a trailing newline and checks that the
/// file parses back to the same document.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let doc = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, &text)?;
    let back: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if back != doc {
        return Err(Error::Parse(format!("{} did not read back identically", path.display())));
    }
    Ok(())
}

/// Writes the summary CSV and verifies the read-back rows.
fn write_summaries(path: &Path, summaries: &[RiskSummary]) -> Result<()> {
    let mut buf = Vec::new();
    estimators::write_summary_csv(summaries, &mut buf)?;
    fs::write(path, &buf)?;
    let back = estimators::read_summary_csv(fs::File::open(path)?)?;
    let expected: Vec<_> = summaries.iter().flat_map(|s| s.rows.iter().cloned()).collect();
    if back != expected {
        return Err(Error::Parse(format!("{} did not read back identically", path.display())));
    }
    Ok(())
}

/// Static data, or the requested slice of a panel.
fn static_view(data: Dataset, time: Option<&str>) -> Result<Dataset> {
    match (data.times().map(<[String]>::to_vec), time) {
        (None, None) => Ok(data),
        (None, Some(t)) => Err(Error::Config(format!("time `{t}` requested but the data has no time column"))),
        (Some(_), None) => Err(Error::Config(
            "static model on panel data needs a time slice (key `data.time` or --time)".into(),
        )),
        (Some(times), Some(t)) => {
            let k = times
                .iter()
                .position(|x| x == t)
                .ok_or_else(|| Error::Config(format!("time `{t}` is not in the data")))?;
            data.slice(k)
        }
    }
}

fn load_inputs(config: &RunConfig) -> Result<(AdjacencyGraph, Dataset)> {
    let graph = load_adjacency(config.adjacency_path()?)?;
    let data = load_dataset(config.data_path()?, &graph)?;
    Ok((graph, data))
}

pub fn cmd_fit(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (graph, data) = load_inputs(config)?;
    let family = config.family()?;
    let temporal = config.temporal()?;
    let data = match temporal {
        Temporal::Static => static_view(data, config.data.time.as_deref())?,
        Temporal::DynamicAr1 => {
            if config.data.time.is_some() {
                return Err(Error::Config("`time` selects a slice for static fits only".into()));
            }
            data
        }
    };
    let spec = config.spec(family, temporal)?;
    let samples = run_chain(&data, &graph, &spec, &config.sampler_config("fit")?)?;
    let summaries = metrics::fit_summaries(&samples, &data, config.model.level)?;

    let out = &config.output;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let path = out.join("risk_summary.csv");
    write_summaries(&path, &summaries)?;
    written.push(path);
    let path = out.join("risk_properties.json");
    write_json(&path, &estimators::geojoin_properties(&summaries))?;
    written.push(path);
    let path = out.join("sampler_metadata.json");
    write_json(&path, &samples.metadata())?;
    written.push(path);
    if config.sampler.dump_draws {
        let path = out.join("draws.csv");
        let file = std::io::BufWriter::new(fs::File::create(&path)?);
        samples.write_draws_csv(file)?;
        written.push(path);
    }
    Ok(written)
}

fn study_inputs(config: &RunConfig) -> Result<(AdjacencyGraph, Vec<f64>)> {
    match (&config.data.adjacency, &config.data.populations) {
        (Some(a), Some(p)) => {
            let graph = load_adjacency(a)?;
            let pops = load_populations(p, &graph)?;
            Ok((graph, pops))
        }
        (None, None) => simstudy::synthetic_lattice(config.study.rows, config.study.cols, config.seed),
        _ => Err(Error::Config(
            "give both `data.adjacency` and `data.populations`, or neither for a synthetic lattice".into(),
        )),
    }
}

fn recipe(config: &RunConfig, graph: &AdjacencyGraph, pops: &[f64]) -> Result<HubRecipe> {
    let mut recipe = HubRecipe::most_populous(graph, pops)?;
    recipe.baseline = config.study.baseline;
    recipe.neighbor_bump = config.study.neighbor_bump;
    if !config.study.hubs.is_empty() {
        recipe.hubs = config
            .study
            .hubs
            .iter()
            .map(|h| Hub {
                region: h.region.clone(),
                bump: h.bump,
            })
            .collect();
    }
    Ok(recipe)
}

pub fn cmd_study(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let study = config.study_config()?;
    let (graph, pops) = study_inputs(config)?;
    let truth = simstudy::build_truth(&graph, &pops, &recipe(config, &graph, &pops)?)?;
    let outcome = simstudy::run_study(&graph, &truth, &pops, &study)?;
    outcome.write_outputs(&config.output)?;
    let out = &config.output;
    Ok(vec![
        out.join("study_report.json"),
        out.join("coverage.csv"),
        out.join("lengths.csv"),
    ])
}

pub fn cmd_simulate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = &config.simulate;
    let (graph, pops) = match (&config.data.adjacency, &config.data.populations) {
        (Some(a), Some(p)) => {
            let graph = load_adjacency(a)?;
            let pops = load_populations(p, &graph)?;
            (graph, pops)
        }
        (None, None) => simstudy::synthetic_lattice(s.rows, s.cols, config.seed)?,
        _ => {
            return Err(Error::Config(
                "give both `data.adjacency` and `data.populations`, or neither for a synthetic lattice".into(),
            ))
        }
    };
    let pops = simstudy::scale_populations(&pops, s.population_scale)?;
    let truth = simstudy::build_truth(&graph, &pops, &recipe(config, &graph, &pops)?)?;
    let seed = derive_seed(config.seed, "simulate");
    let data = if s.years <= 1 {
        simstudy::simulate_counts(&truth, &pops, seed)?
    } else {
        let panel = PanelRecipe {
            n_times: s.years,
            first_time: s.first_year,
            link: config.link()?,
            rho: s.rho,
            omega: s.omega,
        };
        simstudy::simulate_panel(&truth, &pops, &panel, seed)?.0
    };

    let out = &config.output;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let path = out.join("adjacency.csv");
    graph.write_edge_list(fs::File::create(&path)?)?;
    written.push(path);
    let path = out.join("populations.csv");
    {
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["region", "n"])?;
        for (id, n) in graph.region_ids().iter().zip(&pops) {
            w.write_record([id.as_str(), &n.to_string()])?;
        }
        w.flush()?;
    }
    written.push(path);
    let path = out.join("truth.csv");
    simstudy::write_truth_csv(&truth, &pops, fs::File::create(&path)?)?;
    written.push(path);
    let path = out.join("data.csv");
    data.write_csv(fs::File::create(&path)?)?;
    // the written dataset must load back unchanged against the written graph
    let back = load_dataset(&path, &load_adjacency(out.join("adjacency.csv"))?)?;
    if back != data {
        return Err(Error::Parse(format!("{} did not read back identically", path.display())));
    }
    written.push(path);
    Ok(written)
}

pub fn cmd_forecast(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (graph, data) = load_inputs(config)?;
    let times = data
        .times()
        .ok_or_else(|| Error::Config("forecast needs a panel dataset with a time column".into()))?;
    if times.len() < 3 {
        return Err(Error::Config(format!(
            "forecast needs at least 3 time points, the data has {}",
            times.len()
        )));
    }
    let holdout = config
        .forecast
        .holdout
        .clone()
        .unwrap_or_else(|| times[times.len() - 1].clone());
    let families = config
        .forecast
        .families
        .iter()
        .map(|f| parse_family(f))
        .collect::<Result<Vec<_>>>()?;
    let fc = ForecastConfig {
        families,
        link: config.link()?,
        sampler: config.sampler_config("forecast")?,
        level: config.model.level,
        compare_static: config.forecast.compare_static,
    };
    let report = metrics::run_forecast(&data, &graph, &holdout, &fc)?;
    fs::create_dir_all(&config.output)?;
    let path = config.output.join("forecast_report.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
struct ComparisonRow {
    region: String,
    raw: f64,
    r_is: f64,
    r_cg_tilde: f64,
    r_cg: f64,
    length_is: f64,
    length_cg_tilde: f64,
    length_cg: f64,
}

#[derive(Debug, Serialize)]
struct ComparisonReport {
    link: Link,
    level: f64,
    mean_abs_diff_is_cg_tilde: f64,
    mean_abs_diff_is_cg: f64,
    share_cg_shorter_than_is: f64,
    share_cg_tilde_shorter_than_is: f64,
    mean_length: [(Estimator, f64); 3],
    regions: Vec<ComparisonRow>,
}

pub fn cmd_compare(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (graph, data) = load_inputs(config)?;
    let data = static_view(data, config.data.time.as_deref())?;
    let is = run_chain(
        &data,
        &graph,
        &config.spec(Family::Is, Temporal::Static)?,
        &config.sampler_config("compare/IS")?,
    )?;
    let cg = run_chain(
        &data,
        &graph,
        &config.spec(Family::Cg, Temporal::Static)?,
        &config.sampler_config("compare/CG")?,
    )?;
    let level = config.model.level;
    let mut summaries = metrics::fit_summaries(&is, &data, level)?;
    summaries.extend(metrics::fit_summaries(&cg, &data, level)?);
    let raw = data.raw_risks()?;
    let [s_is, s_tilde, s_cg] = [&summaries[0], &summaries[1], &summaries[2]];
    let ni = raw.len() as f64;
    let mad = |a: &RiskSummary, b: &RiskSummary| {
        a.rows.iter().zip(&b.rows).map(|(x, y)| (x.mean - y.mean).abs()).sum::<f64>() / ni
    };
    let shorter = |a: &RiskSummary| {
        a.rows.iter().zip(&s_is.rows).filter(|(x, y)| x.length < y.length).count() as f64 / ni
    };
    let mean_len = |a: &RiskSummary| a.lengths().iter().sum::<f64>() / ni;
    let report = ComparisonReport {
        link: config.link()?,
        level,
        mean_abs_diff_is_cg_tilde: mad(s_is, s_tilde),
        mean_abs_diff_is_cg: mad(s_is, s_cg),
        share_cg_shorter_than_is: shorter(s_cg),
        share_cg_tilde_shorter_than_is: shorter(s_tilde),
        mean_length: [
            (Estimator::RIs, mean_len(s_is)),
            (Estimator::RCgTilde, mean_len(s_tilde)),
            (Estimator::RCg, mean_len(s_cg)),
        ],
        regions: (0..raw.len())
            .map(|i| ComparisonRow {
                region: s_is.rows[i].region.clone(),
                raw: raw[i],
                r_is: s_is.rows[i].mean,
                r_cg_tilde: s_tilde.rows[i].mean,
                r_cg: s_cg.rows[i].mean,
                length_is: s_is.rows[i].length,
                length_cg_tilde: s_tilde.rows[i].length,
                length_cg: s_cg.rows[i].length,
            })
            .collect(),
    };
    fs::create_dir_all(&config.output)?;
    let summary_path = config.output.join("risk_summary.csv");
    write_summaries(&summary_path, &summaries)?;
    let path = config.output.join("comparison.json");
    write_json(&path, &report)?;
    Ok(vec![summary_path, path])
}

/// Runs a parsed command line and returns the written artifact paths.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (config, print) = resolve(&cli.command)?;
    if print {
        print!("{}", config.to_toml()?);
        return Ok(vec![]);
    }
    match &cli.command {
        Command::Fit(_) => cmd_fit(&config),
        Command::Simulate(_) => cmd_simulate(&config),
        Command::Study(_) => cmd_study(&config),
        Command::Forecast(_) => cmd_forecast(&config),
        Command::Compare(_) => cmd_compare(&config),
    }
}

/// Error document written to stderr on failure.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": {
            "kind": e.kind(),
            "message": e.to_string(),
        }
    })
    .to_string()
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}

//! Run and sweep configuration files, and the sweep runner.
//!
//! Both formats are TOML with unknown keys rejected. A run config:
//!
//! ```toml
//! [graph]
//! model = "pl"            # or { kind = "ws", k_ring = 4, p_rewire = 0.3 }
//! n = 6
//! seed = 0
//! # file = "graph.txt"    # instead of model/n/seed
//!
//! [train]
//! strategy = "orbit"
//! layers = 5
//! epsilon = 0.001
//! eval = "shots"          # or "analytic"
//! shots = 1024
//! ```
//!
//! A sweep config holds one or more `[[grid]]` tables; each expands to the
//! Cartesian product of its list-valued keys. In a grid, the graph seed,
//! parameter seed and order seed of a cell are all its `seed`; the shot
//! seed is `seed + SHOT_SEED_OFFSET`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::ansatz::{EvalMode, Layout, Mixer};
use crate::error::{invalid, parse_err, Error, Result};
use crate::graph::{brute_force_maxcut, Graph, GraphModel};
use crate::metrics::{aggregate, gmean, reduction, RunMetrics};
use crate::trainer::{
    train_with_maxcut, History, Order, Strategy, TrainerConfig, DEFAULT_EPSILON, DEFAULT_LMA_STEPS,
    DEFAULT_MAX_STEPS, DEFAULT_SHOTS,
};

pub const SHOT_SEED_OFFSET: u64 = 1_000;

/// Graph model given either by short name or as a full table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ModelSpec(pub GraphModel);

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ModelSpec;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a model name or a table with a `kind` key")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ModelSpec, E> {
                GraphModel::from_name(v).map(ModelSpec).map_err(E::custom)
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<ModelSpec, A::Error> {
                GraphModel::deserialize(de::value::MapAccessDeserializer::new(map)).map(ModelSpec)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalKind {
    Analytic,
    #[default]
    Shots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    #[default]
    Sequential,
    Random,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub model: Option<ModelSpec>,
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub strategy: String,
    pub layers: usize,
    pub epsilon: f64,
    pub order: OrderKind,
    pub order_seed: u64,
    pub lma_steps: usize,
    pub max_steps: usize,
    pub eval: EvalKind,
    pub shots: u64,
    pub mixer: Mixer,
    pub layout: Option<Layout>,
    pub lr: f64,
    pub param_seed: u64,
    pub shot_seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            strategy: "orbit".into(),
            layers: 5,
            epsilon: DEFAULT_EPSILON,
            order: OrderKind::Sequential,
            order_seed: 0,
            lma_steps: DEFAULT_LMA_STEPS,
            max_steps: DEFAULT_MAX_STEPS,
            eval: EvalKind::Shots,
            shots: DEFAULT_SHOTS,
            mixer: Mixer::X,
            layout: None,
            lr: crate::optim::DEFAULT_LR,
            param_seed: 0,
            shot_seed: 0,
        }
    }
}

impl TrainSection {
    pub fn trainer_config(&self) -> Result<TrainerConfig> {
        let strategy: Strategy = self.strategy.parse()?;
        let cfg = TrainerConfig {
            strategy,
            layers: self.layers,
            epsilon: self.epsilon,
            order: match self.order {
                OrderKind::Sequential => Order::Sequential,
                OrderKind::Random => Order::Random(self.order_seed),
            },
            lma_fixed_steps: self.lma_steps,
            max_steps: self.max_steps,
            eval: match self.eval {
                EvalKind::Analytic => EvalMode::Analytic,
                EvalKind::Shots => EvalMode::Shots(self.shots),
            },
            mixer: self.mixer,
            layout: self.layout,
            lr: self.lr,
            param_seed: self.param_seed,
            shot_seed: self.shot_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Configuration of a single training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSection,
    #[serde(default)]
    pub train: TrainSection,
}

/// Converts a TOML error into a parse error carrying the 1-based line.
fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    parse_err(line, e.message().to_string())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(text, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Builds the graph. A relative `file` is resolved against `base`.
    pub fn build_graph(&self, base: Option<&Path>) -> Result<Graph> {
        let g = &self.graph;
        match (&g.file, &g.model) {
            (Some(_), Some(_)) => Err(Error::Config("graph: give either `file` or `model`, not both".into())),
            (Some(file), None) => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                Graph::from_text(&fs::read_to_string(path)?)
            }
            (None, Some(model)) => {
                let n = g.n.ok_or_else(|| Error::Config("graph: `n` is required with `model`".into()))?;
                model.0.generate(n, g.seed)
            }
            (None, None) => Err(Error::Config("graph: one of `file` or `model` is required".into())),
        }
    }
}

fn one_seed() -> Vec<u64> {
    vec![0]
}
fn default_eps() -> Vec<f64> {
    vec![DEFAULT_EPSILON]
}
fn default_mixers() -> Vec<Mixer> {
    vec![Mixer::X]
}
fn default_shots() -> u64 {
    DEFAULT_SHOTS
}
fn default_lma() -> usize {
    DEFAULT_LMA_STEPS
}
fn default_max() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_lr() -> f64 {
    crate::optim::DEFAULT_LR
}

/// One block of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub label: String,
    pub models: Vec<ModelSpec>,
    pub n: Vec<usize>,
    pub strategies: Vec<String>,
    pub layers: Vec<usize>,
    #[serde(default = "one_seed")]
    pub seeds: Vec<u64>,
    /// Absolute thresholds. Ignored when `epsilon_shot_multiples` is set.
    #[serde(default = "default_eps")]
    pub epsilon: Vec<f64>,
    /// Thresholds as multiples of `1 / shots`.
    #[serde(default)]
    pub epsilon_shot_multiples: Vec<f64>,
    #[serde(default = "default_mixers")]
    pub mixers: Vec<Mixer>,
    #[serde(default)]
    pub layout: Option<Layout>,
    #[serde(default)]
    pub eval: EvalKind,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub order: OrderKind,
    #[serde(default = "default_lma")]
    pub lma_steps: usize,
    #[serde(default = "default_max")]
    pub max_steps: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Strategy whose steps the step-reduction column compares against.
    #[serde(default)]
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub name: String,
    /// Worker threads; 0 uses one per core.
    #[serde(default)]
    pub workers: usize,
    /// Also write every history as JSON lines.
    #[serde(default)]
    pub save_histories: bool,
    #[serde(default)]
    pub grid: Vec<Grid>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        for g in &cfg.grid {
            for s in &g.strategies {
                s.parse::<Strategy>()?;
            }
            if let Some(b) = &g.baseline {
                b.parse::<Strategy>()?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Every cell in grid order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        for (gi, g) in self.grid.iter().enumerate() {
            let label = if g.label.is_empty() {
                format!("grid{gi}")
            } else {
                g.label.clone()
            };
            let eps: Vec<f64> = if g.epsilon_shot_multiples.is_empty() {
                g.epsilon.clone()
            } else {
                g.epsilon_shot_multiples.iter().map(|k| k / g.shots as f64).collect()
            };
            for model in &g.models {
                for &n in &g.n {
                    for s in &g.strategies {
                        let strategy: Strategy = s.parse()?;
                        for &layers in &g.layers {
                            for &epsilon in &eps {
                                for &mixer in &g.mixers {
                                    for &seed in &g.seeds {
                                        let cfg = TrainerConfig {
                                            strategy,
                                            layers,
                                            epsilon,
                                            order: match g.order {
                                                OrderKind::Sequential => Order::Sequential,
                                                OrderKind::Random => Order::Random(seed),
                                            },
                                            lma_fixed_steps: g.lma_steps,
                                            max_steps: g.max_steps,
                                            eval: match g.eval {
                                                EvalKind::Analytic => EvalMode::Analytic,
                                                EvalKind::Shots => EvalMode::Shots(g.shots),
                                            },
                                            mixer,
                                            layout: g.layout,
                                            lr: g.lr,
                                            param_seed: seed,
                                            shot_seed: seed + SHOT_SEED_OFFSET,
                                        };
                                        out.push(Cell {
                                            grid: label.clone(),
                                            model: model.0,
                                            n,
                                            seed,
                                            config: cfg,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub grid: String,
    pub model: GraphModel,
    pub n: usize,
    pub seed: u64,
    pub config: TrainerConfig,
}

impl Cell {
    /// Row key without the seed.
    fn group_key(&self) -> GroupKey {
        GroupKey {
            grid: self.grid.clone(),
            model: self.model.label(),
            n: self.n,
            layers: self.config.layers,
            epsilon: self.config.epsilon.to_bits(),
            mixer: self.config.mixer.to_string(),
            strategy: self.config.strategy.to_string(),
        }
    }

    pub fn run(&self) -> Result<History> {
        let g = self.model.generate(self.n, self.seed)?;
        let maxcut = brute_force_maxcut(&g)?.max_value;
        train_with_maxcut(&g, &self.config, maxcut)
    }

    fn file_stem(&self) -> String {
        format!(
            "{}_{}_n{}_s{}_{}_p{}_e{}_{}",
            self.grid,
            self.model.name(),
            self.n,
            self.seed,
            self.config.strategy.to_string().replace('+', "plus"),
            self.config.layers,
            self.config.epsilon,
            self.config.mixer
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct GroupKey {
    grid: String,
    model: String,
    n: usize,
    layers: usize,
    epsilon: u64,
    mixer: String,
    strategy: String,
}

/// Outcome of one cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: std::result::Result<History, String>,
}

impl CellResult {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(h) => h.status.to_string(),
            Err(e) => format!("error: {e}"),
        }
    }
}

/// All cell results of a sweep.
#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub results: Vec<CellResult>,
}

/// One aggregated row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub grid: String,
    pub model: String,
    pub n: usize,
    pub layers: usize,
    pub epsilon: f64,
    pub mixer: String,
    pub strategy: String,
    pub runs: usize,
    pub acr: f64,
    pub steps: f64,
    pub rps: f64,
    pub gips: f64,
    /// `1 − steps / baseline steps` on the same group; empty without a baseline.
    pub step_reduction: Option<f64>,
}

/// Runs every cell on a pool of `workers` threads (0: one per core).
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let cells = cfg.cells()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        builder = builder.num_threads(cfg.workers);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let results = pool.install(|| {
        cells
            .into_par_iter()
            .map(|cell| {
                let outcome = cell.run().map_err(|e| e.to_string());
                CellResult { cell, outcome }
            })
            .collect()
    });
    Ok(SweepReport { results })
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Aggregated rows per (grid, model, n, layers, ε, mixer, strategy),
    /// followed by one `gmean` row per (grid, layers, ε, mixer, strategy)
    /// across models.
    pub fn summary(&self, baselines: &BTreeMap<String, String>) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<GroupKey, Vec<&History>> = BTreeMap::new();
        let mut order: Vec<GroupKey> = Vec::new();
        for r in &self.results {
            let key = r.cell.group_key();
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            let entry = groups.entry(key).or_default();
            if let Ok(h) = &r.outcome {
                entry.push(h);
            }
        }
        let mut rows: Vec<SummaryRow> = order
            .iter()
            .filter_map(|k| {
                let hs = &groups[k];
                let s = aggregate(hs.iter().map(|h| h.records.as_slice())).ok()?;
                Some(SummaryRow {
                    grid: k.grid.clone(),
                    model: k.model.clone(),
                    n: k.n,
                    layers: k.layers,
                    epsilon: f64::from_bits(k.epsilon),
                    mixer: k.mixer.clone(),
                    strategy: k.strategy.clone(),
                    runs: s.runs,
                    acr: s.acr,
                    steps: s.steps,
                    rps: s.rps,
                    gips: s.gips,
                    step_reduction: None,
                })
            })
            .collect();

        // gmean rows across models
        let mut across: BTreeMap<(String, usize, u64, String, String), Vec<SummaryRow>> = BTreeMap::new();
        let mut across_order = Vec::new();
        for r in &rows {
            let key = (r.grid.clone(), r.layers, r.epsilon.to_bits(), r.mixer.clone(), r.strategy.clone());
            if !across.contains_key(&key) {
                across_order.push(key.clone());
            }
            across.entry(key).or_default().push(r.clone());
        }
        for key in across_order {
            let rs = &across[&key];
            let col = |f: fn(&SummaryRow) -> f64| gmean(&rs.iter().map(f).collect::<Vec<_>>());
            rows.push(SummaryRow {
                grid: key.0.clone(),
                model: "gmean".into(),
                n: 0,
                layers: key.1,
                epsilon: f64::from_bits(key.2),
                mixer: key.3.clone(),
                strategy: key.4.clone(),
                runs: rs.iter().map(|r| r.runs).sum(),
                acr: col(|r| r.acr),
                steps: col(|r| r.steps),
                rps: col(|r| r.rps),
                gips: col(|r| r.gips),
                step_reduction: None,
            });
        }

        let snapshot = rows.clone();
        for r in &mut rows {
            let Some(base) = baselines.get(&r.grid) else { continue };
            if let Some(b) = snapshot.iter().find(|b| {
                b.grid == r.grid
                    && b.model == r.model
                    && b.n == r.n
                    && b.layers == r.layers
                    && b.epsilon == r.epsilon
                    && b.mixer == r.mixer
                    && &b.strategy == base
            }) {
                r.step_reduction = Some(reduction(r.steps, b.steps));
            }
        }
        rows
    }

    /// Writes `cells.csv`, `summary.csv`, `curves.csv` (and `histories/` when
    /// asked) into `dir`.
    pub fn write(&self, cfg: &SweepConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let io = |e: csv::Error| Error::Io(e.into());

        let mut cells = csv::Writer::from_path(dir.join("cells.csv")).map_err(io)?;
        cells
            .write_record([
                "grid", "model", "n", "seed", "strategy", "layers", "epsilon", "mixer", "eval", "status",
                "final_acr", "steps", "total_steps", "rps", "gips",
            ])
            .map_err(io)?;
        let mut curves = csv::Writer::from_path(dir.join("curves.csv")).map_err(io)?;
        curves
            .write_record([
                "grid", "model", "n", "seed", "strategy", "layers", "epsilon", "mixer", "step", "acr", "active",
            ])
            .map_err(io)?;
        if cfg.save_histories {
            fs::create_dir_all(dir.join("histories"))?;
        }
        for r in &self.results {
            let c = &r.cell;
            let head = [
                c.grid.clone(),
                c.model.label(),
                c.n.to_string(),
                c.seed.to_string(),
                c.config.strategy.to_string(),
                c.config.layers.to_string(),
                c.config.epsilon.to_string(),
                c.config.mixer.to_string(),
            ];
            let metrics = match &r.outcome {
                Ok(h) => {
                    let m = RunMetrics::of(&h.records);
                    [
                        m.final_acr.to_string(),
                        m.steps.to_string(),
                        m.total_steps.to_string(),
                        m.rps.to_string(),
                        m.gips.to_string(),
                    ]
                }
                Err(_) => Default::default(),
            };
            let mut row: Vec<String> = head.to_vec();
            row.push(c.config.eval.to_string());
            row.push(r.status());
            row.extend(metrics);
            cells.write_record(&row).map_err(io)?;

            if let Ok(h) = &r.outcome {
                for rec in &h.records {
                    let mut row = head.to_vec();
                    row.extend([rec.step.to_string(), rec.acr.to_string(), rec.active.len().to_string()]);
                    curves.write_record(&row).map_err(io)?;
                }
                if cfg.save_histories {
                    let f = fs::File::create(dir.join("histories").join(format!("{}.jsonl", c.file_stem())))?;
                    h.write_jsonl(std::io::BufWriter::new(f))?;
                }
            }
        }
        cells.flush()?;
        curves.flush()?;

        let baselines: BTreeMap<String, String> = cfg
            .grid
            .iter()
            .enumerate()
            .filter_map(|(i, g)| {
                let label = if g.label.is_empty() { format!("grid{i}") } else { g.label.clone() };
                let b: Strategy = g.baseline.as_ref()?.parse().ok()?;
                Some((label, b.to_string()))
            })
            .collect();
        let mut summary = csv::Writer::from_path(dir.join("summary.csv")).map_err(io)?;
        let rows = self.summary(&baselines);
        if rows.is_empty() {
            summary
                .write_record([
                    "grid", "model", "n", "layers", "epsilon", "mixer", "strategy", "runs", "acr", "steps", "rps",
                    "gips", "step_reduction",
                ])
                .map_err(io)?;
        }
        for row in rows {
            summary.serialize(row).map_err(io)?;
        }
        summary.flush()?;

        let mut echo = fs::File::create(dir.join("sweep.toml"))?;
        echo.write_all(toml::to_string(cfg).map_err(|e| invalid(e.to_string()))?.as_bytes())?;
        Ok(())
    }
}

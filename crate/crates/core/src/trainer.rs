//! Training strategies.
//!
//! Every strategy is a schedule of *units* (sets of parameter indices). One
//! step masks a unit, evaluates the objective, takes one AdaGrad step on
//! the parameter-shift gradient, evaluates again and logs a [`StepRecord`].
//!
//! | strategy | unit | stop |
//! |---|---|---|
//! | `ma`, `sa` | whole circuit | first `|ΔC| < ε` |
//! | `lma`, `lsa` | newest layer of a growing circuit | fixed steps per stage |
//! | `lma+`, `lsa+` | newest layer of a growing circuit | stage ends at `|ΔC| < ε` |
//! | `rr` | each layer in turn | a full cycle with every `|ΔC| < ε` |
//! | `orbit` | each active layer in turn | a layer leaves at `|ΔC| < ε`; stop when none remain |
//! | `sublayer-k` | layer pairs (`k = 0.5`) or `k` blocks per layer | as `orbit`, per unit |
//!
//! `sublayer-2-parallel` updates both halves of a layer from the same base
//! parameters on separate copies of the optimizer and then keeps each
//! half's own entries.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{init_params, Ansatz, EvalMode, Layout, Mixer, ParamSet};
use crate::error::{invalid, parse_err, Error, Result};
use crate::graph::{brute_force_maxcut, Graph};
use crate::optim::{grad_param_shift, AdaGrad, ResetScope, DEFAULT_LR};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_LMA_STEPS: usize = 50;
pub const DEFAULT_MAX_STEPS: usize = 2000;
pub const DEFAULT_SHOTS: u64 = 1024;
/// Analytic ACR is logged next to the shot-based one up to this many qubits.
pub const ANALYTIC_ACR_MAX_QUBITS: usize = 16;

/// Sublayer granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SublayerK {
    /// Two consecutive layers per unit.
    Half,
    One,
    Two,
    Three,
}

impl SublayerK {
    pub fn as_f64(self) -> f64 {
        match self {
            SublayerK::Half => 0.5,
            SublayerK::One => 1.0,
            SublayerK::Two => 2.0,
            SublayerK::Three => 3.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SublayerK::Half => "0.5",
            SublayerK::One => "1",
            SublayerK::Two => "2",
            SublayerK::Three => "3",
        }
    }
}

impl FromStr for SublayerK {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0.5" => Ok(SublayerK::Half),
            "1" => Ok(SublayerK::One),
            "2" => Ok(SublayerK::Two),
            "3" => Ok(SublayerK::Three),
            _ => Err(invalid(format!("sublayer k must be 0.5, 1, 2 or 3, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Ma,
    Lma,
    LmaPlus,
    Rr,
    Orbit,
    Sublayer { k: SublayerK, parallel: bool },
    Sa,
    Lsa,
    LsaPlus,
}

impl Strategy {
    /// Layout the strategy is defined on, if it fixes one.
    pub fn forced_layout(self) -> Option<Layout> {
        match self {
            Strategy::Ma | Strategy::Lma | Strategy::LmaPlus => Some(Layout::MultiAngle),
            Strategy::Sa | Strategy::Lsa | Strategy::LsaPlus => Some(Layout::SingleAngle),
            _ => None,
        }
    }

    pub const ALL_NAMES: [&'static str; 13] = [
        "ma",
        "lma",
        "lma+",
        "rr",
        "orbit",
        "sublayer-0.5",
        "sublayer-1",
        "sublayer-2",
        "sublayer-3",
        "sublayer-2-parallel",
        "sa",
        "lsa",
        "lsa+",
    ];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Ma => f.write_str("ma"),
            Strategy::Lma => f.write_str("lma"),
            Strategy::LmaPlus => f.write_str("lma+"),
            Strategy::Rr => f.write_str("rr"),
            Strategy::Orbit => f.write_str("orbit"),
            Strategy::Sublayer { k, parallel } => {
                write!(f, "sublayer-{}", k.name())?;
                if *parallel {
                    f.write_str("-parallel")?;
                }
                Ok(())
            }
            Strategy::Sa => f.write_str("sa"),
            Strategy::Lsa => f.write_str("lsa"),
            Strategy::LsaPlus => f.write_str("lsa+"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "ma" => Strategy::Ma,
            "lma" => Strategy::Lma,
            "lma+" | "lma-plus" => Strategy::LmaPlus,
            "rr" => Strategy::Rr,
            "orbit" => Strategy::Orbit,
            "sa" => Strategy::Sa,
            "lsa" => Strategy::Lsa,
            "lsa+" | "lsa-plus" => Strategy::LsaPlus,
            other => {
                let Some(rest) = other.strip_prefix("sublayer-") else {
                    return Err(invalid(format!(
                        "unknown strategy {s:?}; expected one of {}",
                        Strategy::ALL_NAMES.join(", ")
                    )));
                };
                let (k, parallel) = match rest.strip_suffix("-parallel") {
                    Some(k) => (k, true),
                    None => (rest, false),
                };
                let k: SublayerK = k.parse()?;
                if parallel && k != SublayerK::Two {
                    return Err(invalid("the parallel sublayer variant requires k = 2"));
                }
                Strategy::Sublayer { k, parallel }
            }
        })
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Visiting order of the units within a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    #[default]
    Sequential,
    /// Reshuffled once per cycle from this seed.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub strategy: Strategy,
    pub layers: usize,
    pub epsilon: f64,
    pub order: Order,
    pub lma_fixed_steps: usize,
    pub max_steps: usize,
    pub eval: EvalMode,
    pub mixer: Mixer,
    /// Required by strategies that accept either layout; defaults to multi-angle.
    pub layout: Option<Layout>,
    pub lr: f64,
    pub param_seed: u64,
    pub shot_seed: u64,
}

impl TrainerConfig {
    pub fn new(strategy: Strategy, layers: usize) -> Self {
        Self {
            strategy,
            layers,
            epsilon: DEFAULT_EPSILON,
            order: Order::Sequential,
            lma_fixed_steps: DEFAULT_LMA_STEPS,
            max_steps: DEFAULT_MAX_STEPS,
            eval: EvalMode::Shots(DEFAULT_SHOTS),
            mixer: Mixer::X,
            layout: None,
            lr: DEFAULT_LR,
            param_seed: 0,
            shot_seed: 0,
        }
    }

    pub fn effective_layout(&self) -> Layout {
        self.strategy
            .forced_layout()
            .or(self.layout)
            .unwrap_or(Layout::MultiAngle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(invalid("layer count must be at least 1"));
        }
        if !(self.epsilon > 0.0) || self.epsilon.is_nan() {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be at least 1"));
        }
        if matches!(self.strategy, Strategy::Lma | Strategy::Lsa) && self.lma_fixed_steps == 0 {
            return Err(invalid("lma_fixed_steps must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        self.eval.validate()?;
        if let (Some(forced), Some(asked)) = (self.strategy.forced_layout(), self.layout) {
            if forced != asked {
                return Err(invalid(format!(
                    "strategy {} runs on the {forced} layout, not {asked}",
                    self.strategy
                )));
            }
        }
        Ok(())
    }
}

/// One optimisation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based.
    pub step: usize,
    /// Completed cycles over the schedule before this step (stage index for
    /// the grafting strategies).
    pub epoch: usize,
    /// Updated unit: `all`, `l3`, `l0+l1`, `l2.b1`, ...
    pub unit: String,
    pub cost_before: f64,
    pub cost_after: f64,
    pub delta: f64,
    /// `-cost_after / maxcut`.
    pub acr: f64,
    /// Exact ACR of the same parameters when training on shots.
    pub acr_analytic: Option<f64>,
    /// Units still active after this step.
    pub active: Vec<usize>,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "converged",
            RunStatus::BudgetExhausted => "budget-exhausted",
        })
    }
}

/// Result of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub config: TrainerConfig,
    pub maxcut: f64,
    pub records: Vec<StepRecord>,
    pub status: RunStatus,
    pub final_params: ParamSet,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_acr(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.acr)
    }

    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<()> {
        write_jsonl(&self.records, w)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(&self.records, w)
    }
}

/// One JSON object per record and line.
pub fn write_jsonl<W: Write>(records: &[StepRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses JSON lines written by [`write_jsonl`]. Blank lines are skipped.
pub fn read_jsonl(text: &str) -> Result<Vec<StepRecord>> {
    let mut out: Vec<StepRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: StepRecord = serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        if let Some(prev) = out.last() {
            if r.step <= prev.step {
                return Err(parse_err(i + 1, format!("step {} does not follow {}", r.step, prev.step)));
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Delimited form; `active` is a space-separated list, `acr_analytic` may be empty.
pub fn write_csv<W: Write>(records: &[StepRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Io(e.into());
    wr.write_record([
        "step",
        "epoch",
        "unit",
        "cost_before",
        "cost_after",
        "delta",
        "acr",
        "acr_analytic",
        "active",
        "wall_ns",
    ])
    .map_err(csv_err)?;
    for r in records {
        let active = r
            .active
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        wr.write_record([
            r.step.to_string(),
            r.epoch.to_string(),
            r.unit.clone(),
            r.cost_before.to_string(),
            r.cost_after.to_string(),
            r.delta.to_string(),
            r.acr.to_string(),
            r.acr_analytic.map(|a| a.to_string()).unwrap_or_default(),
            active,
            r.wall_ns.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// A schedulable set of parameters.
#[derive(Debug, Clone)]
struct Unit {
    label: String,
    indices: Vec<usize>,
    /// Present for the parallel variant: the two halves of `indices`.
    halves: Option<(Vec<usize>, Vec<usize>)>,
}

fn split_blocks(len: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    let (q, r) = (len / k, len % k);
    let mut start = 0;
    (0..k)
        .map(|b| {
            let size = q + usize::from(b < r);
            let range = start..start + size;
            start += size;
            range
        })
        .collect()
}

fn units_for(strategy: Strategy, params: &ParamSet) -> Result<Vec<Unit>> {
    let shape = params.shape();
    let layer_unit = |l: usize| Unit {
        label: format!("l{l}"),
        indices: shape.layer_range(l).collect(),
        halves: None,
    };
    Ok(match strategy {
        Strategy::Rr | Strategy::Orbit | Strategy::Sublayer { k: SublayerK::One, .. } => {
            (0..shape.layers).map(layer_unit).collect()
        }
        Strategy::Sublayer { k: SublayerK::Half, .. } => (0..shape.layers)
            .step_by(2)
            .map(|l| {
                if l + 1 < shape.layers {
                    Unit {
                        label: format!("l{l}+l{}", l + 1),
                        indices: (shape.layer_range(l).start..shape.layer_range(l + 1).end).collect(),
                        halves: None,
                    }
                } else {
                    layer_unit(l)
                }
            })
            .collect(),
        Strategy::Sublayer { k, parallel } => {
            let kk = k.as_f64() as usize;
            if shape.per_layer() < kk {
                return Err(invalid(format!(
                    "a layer has {} parameters, too few for {kk} sublayers",
                    shape.per_layer()
                )));
            }
            let blocks = split_blocks(shape.per_layer(), kk);
            let mut units = Vec::new();
            for l in 0..shape.layers {
                let base = shape.layer_range(l).start;
                let shifted: Vec<Vec<usize>> = blocks
                    .iter()
                    .map(|b| (base + b.start..base + b.end).collect())
                    .collect();
                if parallel {
                    units.push(Unit {
                        label: format!("l{l}"),
                        indices: shape.layer_range(l).collect(),
                        halves: Some((shifted[0].clone(), shifted[1].clone())),
                    });
                } else {
                    for (b, idx) in shifted.into_iter().enumerate() {
                        units.push(Unit {
                            label: format!("l{l}.b{b}"),
                            indices: idx,
                            halves: None,
                        });
                    }
                }
            }
            units
        }
        _ => unreachable!("not a cyclic strategy"),
    })
}

struct Run<'g> {
    graph: &'g Graph,
    cfg: TrainerConfig,
    maxcut: f64,
    params: ParamSet,
    opt: AdaGrad,
    shot_rng: ChaCha8Rng,
    records: Vec<StepRecord>,
}

impl<'g> Run<'g> {
    fn budget_left(&self) -> bool {
        self.records.len() < self.cfg.max_steps
    }

    /// One masked step on `ansatz`; returns `ΔC`. The record's active set is
    /// filled in by the caller.
    fn step(&mut self, ansatz: &Ansatz<'_>, unit: &Unit, epoch: usize) -> Result<f64> {
        let eval = self.cfg.eval;
        let start = Instant::now();
        self.params.set_mask_indices(unit.indices.iter().copied())?;
        let before = ansatz.objective(&self.params, eval, &mut self.shot_rng)?;
        match &unit.halves {
            None => {
                let grad = grad_param_shift(ansatz, &self.params, eval, &mut self.shot_rng)?;
                self.opt.step(&mut self.params, &grad)?;
            }
            Some((a, b)) => {
                let base = self.params.clone();
                let base_opt = self.opt.clone();
                let mut branches = Vec::with_capacity(2);
                for half in [a, b] {
                    let mut p = base.clone();
                    let mut o = base_opt.clone();
                    p.set_mask_indices(half.iter().copied())?;
                    let grad = grad_param_shift(ansatz, &p, eval, &mut self.shot_rng)?;
                    o.step(&mut p, &grad)?;
                    branches.push((half, p, o));
                }
                for (half, p, o) in branches {
                    let values = self.params.values_mut();
                    for &i in half {
                        values[i] = p.values()[i];
                    }
                    self.opt.copy_entries_from(&o, half.iter().copied());
                }
            }
        }
        let after = ansatz.objective(&self.params, eval, &mut self.shot_rng)?;
        let wall_ns = start.elapsed().as_nanos() as u64;
        let acr_analytic = match eval {
            EvalMode::Shots(_) if self.graph.n() <= ANALYTIC_ACR_MAX_QUBITS => {
                let exact = ansatz.objective(&self.params, EvalMode::Analytic, &mut self.shot_rng)?;
                Some(-exact / self.maxcut)
            }
            _ => None,
        };
        let delta = after - before;
        self.records.push(StepRecord {
            step: self.records.len() + 1,
            epoch,
            unit: unit.label.clone(),
            cost_before: before,
            cost_after: after,
            delta,
            acr: -after / self.maxcut,
            acr_analytic,
            active: Vec::new(),
            wall_ns,
        });
        Ok(delta)
    }

    fn set_active(&mut self, active: Vec<usize>) {
        if let Some(r) = self.records.last_mut() {
            r.active = active;
        }
    }

    /// Whole circuit as one unit, stop at the first small change.
    fn joint(&mut self, ansatz: &Ansatz<'_>) -> Result<RunStatus> {
        let unit = Unit {
            label: "all".into(),
            indices: (0..self.params.len()).collect(),
            halves: None,
        };
        loop {
            if !self.budget_left() {
                return Ok(RunStatus::BudgetExhausted);
            }
            let epoch = self.records.len();
            let delta = self.step(ansatz, &unit, epoch)?;
            let done = delta.abs() < self.cfg.epsilon;
            self.set_active(if done { vec![] } else { vec![0] });
            if done {
                return Ok(RunStatus::Converged);
            }
        }
    }

    /// Growing circuit. `fixed` gives a per-stage step budget; otherwise a
    /// stage ends at the first small change.
    fn grafting(&mut self, full: &Ansatz<'_>, fixed: Option<usize>) -> Result<RunStatus> {
        let layers = self.cfg.layers;
        let shape = self.params.shape();
        for stage in 0..layers {
            let ansatz = full.truncated(stage + 1)?;
            self.opt.reset_accum(ResetScope::All)?;
            let unit = Unit {
                label: format!("l{stage}"),
                indices: shape.layer_range(stage).collect(),
                halves: None,
            };
            let mut taken = 0;
            loop {
                if fixed.is_some_and(|f| taken >= f) {
                    break;
                }
                if !self.budget_left() {
                    return Ok(RunStatus::BudgetExhausted);
                }
                let delta = self.step(&ansatz, &unit, stage)?;
                taken += 1;
                let stage_done = match fixed {
                    Some(f) => taken >= f,
                    None => delta.abs() < self.cfg.epsilon,
                };
                let active = if stage_done { vec![] } else { vec![stage] };
                self.set_active(active);
                if fixed.is_none() && stage_done {
                    break;
                }
            }
        }
        Ok(RunStatus::Converged)
    }

    /// Round-robin over `units`. With `freeze`, a unit leaves the active set
    /// at its first small change and the run ends when none remain; without
    /// it, the run ends after a cycle in which every change was small.
    fn cyclic(&mut self, ansatz: &Ansatz<'_>, units: &[Unit], freeze: bool) -> Result<RunStatus> {
        let mut active: Vec<usize> = (0..units.len()).collect();
        let mut order_rng = match self.cfg.order {
            Order::Sequential => None,
            Order::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let mut epoch = 0;
        while !active.is_empty() {
            let mut visit = active.clone();
            if let Some(rng) = order_rng.as_mut() {
                visit.shuffle(rng);
            }
            let mut all_small = true;
            for u in visit {
                if !self.budget_left() {
                    return Ok(RunStatus::BudgetExhausted);
                }
                let delta = self.step(ansatz, &units[u], epoch)?;
                let small = delta.abs() < self.cfg.epsilon;
                all_small &= small;
                if freeze && small {
                    active.retain(|&a| a != u);
                }
                self.set_active(active.clone());
            }
            if !freeze && all_small {
                return Ok(RunStatus::Converged);
            }
            epoch += 1;
        }
        Ok(RunStatus::Converged)
    }
}

/// Trains `cfg.strategy` on `g` from `init_params(g, cfg.layers, .., cfg.param_seed)`.
pub fn train(g: &Graph, cfg: &TrainerConfig) -> Result<History> {
    let maxcut = brute_force_maxcut(g)?.max_value;
    train_with_maxcut(g, cfg, maxcut)
}

/// As [`train`] with a precomputed Max-Cut value.
pub fn train_with_maxcut(g: &Graph, cfg: &TrainerConfig, maxcut: f64) -> Result<History> {
    cfg.validate()?;
    let params = init_params(g, cfg.layers, cfg.effective_layout(), cfg.mixer, cfg.param_seed)?;
    train_from(g, cfg, params, maxcut)
}

/// As [`train_with_maxcut`] starting from `params` instead of a seeded draw.
/// `cfg.param_seed` is ignored.
pub fn train_from(g: &Graph, cfg: &TrainerConfig, mut params: ParamSet, maxcut: f64) -> Result<History> {
    cfg.validate()?;
    if !(maxcut > 0.0) {
        return Err(invalid(format!("Max-Cut value must be positive, got {maxcut}")));
    }
    let layout = cfg.effective_layout();
    let full = Ansatz::new(g, cfg.layers, layout, cfg.mixer)?;
    full.check(&params)?;
    params.set_mask_all(true);
    let mut run = Run {
        graph: g,
        cfg: cfg.clone(),
        maxcut,
        opt: AdaGrad::new(params.shape(), cfg.lr)?,
        params,
        shot_rng: ChaCha8Rng::seed_from_u64(cfg.shot_seed),
        records: Vec::new(),
    };
    let status = match cfg.strategy {
        Strategy::Ma | Strategy::Sa => run.joint(&full)?,
        Strategy::Lma | Strategy::Lsa => run.grafting(&full, Some(cfg.lma_fixed_steps))?,
        Strategy::LmaPlus | Strategy::LsaPlus => run.grafting(&full, None)?,
        Strategy::Rr => {
            let units = units_for(cfg.strategy, &run.params)?;
            run.cyclic(&full, &units, false)?
        }
        Strategy::Orbit | Strategy::Sublayer { .. } => {
            let units = units_for(cfg.strategy, &run.params)?;
            run.cyclic(&full, &units, true)?
        }
    };
    run.params.set_mask_all(true);
    Ok(History {
        config: cfg.clone(),
        maxcut,
        records: run.records,
        status,
        final_params: run.params,
    })
}

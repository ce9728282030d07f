//! `orbit`: generate graphs, train circuits and run sweeps.
//!
//! Exit codes: 0 success, 1 error, 2 training stopped at `max_steps`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use orbit_core::experiment::{EvalKind, ModelSpec, OrderKind, RunConfig, SweepConfig};
use orbit_core::graph::{brute_force_maxcut, GraphModel, SkWeights};
use orbit_core::metrics::RunMetrics;
use orbit_core::trainer::{train_with_maxcut, RunStatus};
use orbit_core::{Layout, Mixer};

#[derive(Parser)]
#[command(name = "orbit", version, about = "Max-Cut QAOA training workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random graph in the text format and print n, m and its Max-Cut.
    Generate(GenerateArgs),
    /// Train one circuit.
    Train(Box<TrainArgs>),
    /// Run a sweep config and write its report.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// path, er, ra, ba, bb, ws, pl or sk.
    #[arg(long)]
    model: Option<String>,
    /// Edge probability (er) or density (ra).
    #[arg(long)]
    prob: Option<f64>,
    /// Edges per new node (ba, bb).
    #[arg(long)]
    m_attach: Option<usize>,
    /// Ring degree (ws).
    #[arg(long)]
    k_ring: Option<usize>,
    /// Rewiring probability (ws).
    #[arg(long)]
    p_rewire: Option<f64>,
    /// Use ±1 couplings (sk).
    #[arg(long)]
    signed: bool,
}

impl ModelArgs {
    fn build(&self) -> Result<Option<GraphModel>> {
        let Some(name) = &self.model else {
            if self.prob.is_some() || self.m_attach.is_some() || self.k_ring.is_some() || self.p_rewire.is_some() || self.signed {
                bail!("model parameters given without --model");
            }
            return Ok(None);
        };
        let mut m = GraphModel::from_name(name)?;
        let mut used = 0;
        match &mut m {
            GraphModel::Er { prob } => used += set(prob, self.prob),
            GraphModel::Ra { r } => used += set(r, self.prob),
            GraphModel::Ba { m_attach } | GraphModel::Bb { m_attach } => used += set(m_attach, self.m_attach),
            GraphModel::Ws { k_ring, p_rewire } => used += set(k_ring, self.k_ring) + set(p_rewire, self.p_rewire),
            GraphModel::Sk { weights } => {
                if self.signed {
                    *weights = SkWeights::PlusMinusOne;
                    used += 1;
                }
            }
            GraphModel::Path | GraphModel::Pl => {}
        }
        let given = [self.prob.is_some(), self.m_attach.is_some(), self.k_ring.is_some(), self.p_rewire.is_some(), self.signed]
            .iter()
            .filter(|b| **b)
            .count();
        if given != used {
            bail!("a model parameter does not apply to model `{name}`");
        }
        Ok(Some(m))
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) -> usize {
    match v {
        Some(v) => {
            *slot = v;
            1
        }
        None => 0,
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Run config (TOML). Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Graph in the text format, instead of --model.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    graph_seed: Option<u64>,
    #[arg(long)]
    strategy: Option<String>,
    /// Number of layers.
    #[arg(long, short = 'p', alias = "layers")]
    p: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// sequential or random.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    order_seed: Option<u64>,
    #[arg(long)]
    lma_steps: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// analytic or shots.
    #[arg(long)]
    eval: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    /// x, xy or y.
    #[arg(long)]
    mixer: Option<Mixer>,
    /// ma or sa (orbit, rr and sublayer strategies only).
    #[arg(long)]
    layout: Option<Layout>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    param_seed: Option<u64>,
    #[arg(long)]
    shot_seed: Option<u64>,
    /// History as JSON lines.
    #[arg(long)]
    history: Option<PathBuf>,
    /// History as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary text (also printed).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Final parameters in the text format.
    #[arg(long)]
    params_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the worker count of the config.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train_cmd(*a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let Some(model) = a.model.build()? else {
        bail!("--model is required");
    };
    let g = model.generate(a.n, a.seed)?;
    let maxcut = brute_force_maxcut(&g)?;
    match &a.out {
        Some(path) => write_file(path, g.to_text().as_bytes())?,
        None => print!("{}", g.to_text()),
    }
    let summary = format!("n {}\nm {}\nmaxcut {}\n", g.n(), g.m(), maxcut.max_value);
    if a.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(a: TrainArgs) -> Result<ExitCode> {
    let (mut cfg, base) = match &a.config {
        Some(path) => (
            RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            path.parent().map(Path::to_path_buf),
        ),
        None => (RunConfig::default(), None),
    };
    if let Some(m) = a.model.build()? {
        cfg.graph.model = Some(ModelSpec(m));
        cfg.graph.file = None;
    }
    if let Some(f) = a.graph_file {
        cfg.graph.file = Some(f);
        cfg.graph.model = None;
    }
    let g = &mut cfg.graph;
    g.n = a.n.or(g.n);
    g.seed = a.graph_seed.unwrap_or(g.seed);
    let t = &mut cfg.train;
    if let Some(s) = a.strategy {
        t.strategy = s;
    }
    t.layers = a.p.unwrap_or(t.layers);
    t.epsilon = a.eps.unwrap_or(t.epsilon);
    if let Some(o) = a.order {
        t.order = match o.as_str() {
            "sequential" => OrderKind::Sequential,
            "random" => OrderKind::Random,
            other => bail!("unknown order `{other}` (sequential or random)"),
        };
    }
    t.order_seed = a.order_seed.unwrap_or(t.order_seed);
    t.lma_steps = a.lma_steps.unwrap_or(t.lma_steps);
    t.max_steps = a.max_steps.unwrap_or(t.max_steps);
    if let Some(e) = a.eval {
        t.eval = match e.as_str() {
            "analytic" => EvalKind::Analytic,
            "shots" => EvalKind::Shots,
            other => bail!("unknown eval mode `{other}` (analytic or shots)"),
        };
    }
    t.shots = a.shots.unwrap_or(t.shots);
    t.mixer = a.mixer.unwrap_or(t.mixer);
    t.layout = a.layout.or(t.layout);
    t.lr = a.lr.unwrap_or(t.lr);
    t.param_seed = a.param_seed.unwrap_or(t.param_seed);
    t.shot_seed = a.shot_seed.unwrap_or(t.shot_seed);

    let trainer_cfg = cfg.train.trainer_config()?;
    let graph = cfg.build_graph(base.as_deref())?;
    let maxcut = brute_force_maxcut(&graph)?.max_value;
    let h = train_with_maxcut(&graph, &trainer_cfg, maxcut)?;

    if let Some(path) = &a.history {
        let mut buf = Vec::new();
        h.write_jsonl(&mut buf)?;
        write_file(path, &buf)?;
    }
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        h.write_csv(&mut buf)?;
        write_file(path, &buf)?;
    }
    if let Some(path) = &a.params_out {
        write_file(path, h.final_params.to_text().as_bytes())?;
    }

    let m = RunMetrics::of(&h.records);
    let mut text = String::new();
    text += &format!("graph n {} m {} maxcut {}\n", graph.n(), graph.m(), maxcut);
    text += &format!("strategy {}\n", trainer_cfg.strategy);
    text += &format!("status {}\n", h.status);
    text += &format!("final_acr {}\n", m.final_acr);
    if let Some(a) = h.records.last().and_then(|r| r.acr_analytic) {
        text += &format!("final_acr_analytic {a}\n");
    }
    text += &format!("steps_to_converge {}\n", m.steps);
    text += &format!("total_steps {}\n", m.total_steps);
    text += &format!("rps {}\n", m.rps);
    text += &format!("gips {}\n", m.gips);
    text += "\n# effective config\n";
    text += &cfg.to_toml();
    print!("{text}");
    if let Some(path) = &a.summary {
        write_file(path, text.as_bytes())?;
    }
    Ok(match h.status {
        RunStatus::Converged => ExitCode::SUCCESS,
        RunStatus::BudgetExhausted => ExitCode::from(2),
    })
}

fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let mut cfg = SweepConfig::load(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    let report = orbit_core::experiment::run_sweep(&cfg)?;
    report.write(&cfg, &a.out)?;
    let mut out = BufWriter::new(std::io::stdout());
    writeln!(out, "cells {}", report.results.len())?;
    writeln!(out, "failed {}", report.failures())?;
    for r in report.results.iter().filter(|r| r.outcome.is_err()) {
        writeln!(
            out,
            "  {} {} n={} seed={} {}: {}",
            r.cell.grid,
            r.cell.model.label(),
            r.cell.n,
            r.cell.seed,
            r.cell.config.strategy,
            r.status()
        )?;
    }
    writeln!(out, "report {}", a.out.display())?;
    out.flush()?;
    Ok(if report.failures() > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

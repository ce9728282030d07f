//! QAOA circuits over a Max-Cut graph.
//!
//! Parameters live in one flat vector, layer-major. Within a layer the
//! cost angles come first (one per edge in canonical edge order for the
//! multi-angle layout, a single shared angle for the single-angle layout),
//! followed by the mixer angles (one per qubit for the X and Y mixers, one
//! per edge for the XY mixer; a single shared angle in the single-angle
//! layout).
//!
//! Multi-angle cost terms are applied as `exp(+i γ Z_i Z_j)`. The
//! single-angle layout reproduces `exp(-i γ C)` up to global phase, which
//! is `exp(+i (γ/2) Z_i Z_j)` on every edge.

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, parse_err, Error, Result};
use crate::graph::Graph;
use crate::statevec::{StateVector, DEFAULT_MAX_QUBITS};

/// Half-width of the uniform initialisation interval.
pub const INIT_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "ma")]
    MultiAngle,
    #[serde(rename = "sa")]
    SingleAngle,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::MultiAngle => "ma",
            Layout::SingleAngle => "sa",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ma" | "multi-angle" => Ok(Layout::MultiAngle),
            "sa" | "single-angle" => Ok(Layout::SingleAngle),
            other => Err(invalid(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixer {
    #[default]
    X,
    Xy,
    Y,
}

impl fmt::Display for Mixer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mixer::X => "x",
            Mixer::Xy => "xy",
            Mixer::Y => "y",
        })
    }
}

impl FromStr for Mixer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Mixer::X),
            "xy" => Ok(Mixer::Xy),
            "y" => Ok(Mixer::Y),
            other => Err(invalid(format!("unknown mixer `{other}`"))),
        }
    }
}

/// How the objective is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Exact expectation from the amplitudes.
    Analytic,
    /// Estimate from this many sampled shots.
    Shots(u64),
}

impl EvalMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            EvalMode::Shots(0) => Err(invalid("shot count must be at least 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalMode::Analytic => f.write_str("analytic"),
            EvalMode::Shots(s) => write!(f, "shots({s})"),
        }
    }
}

/// Number of layers and per-layer parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub layers: usize,
    pub gammas_per_layer: usize,
    pub betas_per_layer: usize,
}

impl ParamShape {
    pub fn for_graph(g: &Graph, layers: usize, layout: Layout, mixer: Mixer) -> Self {
        let (gammas, betas) = match layout {
            Layout::SingleAngle => (1, 1),
            Layout::MultiAngle => (
                g.m(),
                match mixer {
                    Mixer::X | Mixer::Y => g.n(),
                    Mixer::Xy => g.m(),
                },
            ),
        };
        Self {
            layers,
            gammas_per_layer: gammas,
            betas_per_layer: betas,
        }
    }

    pub fn per_layer(&self) -> usize {
        self.gammas_per_layer + self.betas_per_layer
    }

    pub fn len(&self) -> usize {
        self.layers * self.per_layer()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index range of layer `l`.
    pub fn layer_range(&self, l: usize) -> Range<usize> {
        let w = self.per_layer();
        l * w..(l + 1) * w
    }

    pub fn layer_of(&self, index: usize) -> usize {
        index / self.per_layer()
    }

    pub fn gamma_index(&self, l: usize, k: usize) -> usize {
        l * self.per_layer() + k
    }

    pub fn beta_index(&self, l: usize, k: usize) -> usize {
        l * self.per_layer() + self.gammas_per_layer + k
    }
}

/// Variational angles plus the trainable-entry mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    layout: Layout,
    shape: ParamShape,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ParamSet {
    pub fn zeros(g: &Graph, layers: usize, layout: Layout, mixer: Mixer) -> Result<Self> {
        if layers == 0 {
            return Err(invalid("layer count must be at least 1"));
        }
        let shape = ParamShape::for_graph(g, layers, layout, mixer);
        Ok(Self {
            layout,
            shape,
            values: vec![0.0; shape.len()],
            mask: vec![true; shape.len()],
        })
    }

    /// Builds a set from raw values, all entries trainable.
    pub fn from_values(layout: Layout, shape: ParamShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a shape of {}",
                values.len(),
                shape.len()
            )));
        }
        if shape.layers == 0 {
            return Err(invalid("layer count must be at least 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("parameter {i} is not finite")));
        }
        Ok(Self {
            layout,
            shape,
            mask: vec![true; values.len()],
            values,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn shape(&self) -> ParamShape {
        self.shape
    }

    pub fn layers(&self) -> usize {
        self.shape.layers
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn gammas(&self, l: usize) -> &[f64] {
        let start = self.shape.gamma_index(l, 0);
        &self.values[start..start + self.shape.gammas_per_layer]
    }

    pub fn betas(&self, l: usize) -> &[f64] {
        let start = self.shape.beta_index(l, 0);
        &self.values[start..start + self.shape.betas_per_layer]
    }

    pub fn layer_values(&self, l: usize) -> &[f64] {
        &self.values[self.shape.layer_range(l)]
    }

    pub fn set_mask_all(&mut self, on: bool) {
        self.mask.fill(on);
    }

    /// Makes exactly the given flat indices trainable.
    pub fn set_mask_indices(&mut self, indices: impl IntoIterator<Item = usize>) -> Result<()> {
        self.mask.fill(false);
        for i in indices {
            *self
                .mask
                .get_mut(i)
                .ok_or_else(|| invalid(format!("parameter index {i} out of range")))? = true;
        }
        Ok(())
    }

    /// Makes exactly the listed layers trainable.
    pub fn set_mask_layers(&mut self, layers: &[usize]) -> Result<()> {
        if let Some(&l) = layers.iter().find(|&&l| l >= self.shape.layers) {
            return Err(invalid(format!("layer {l} out of range")));
        }
        let shape = self.shape;
        self.set_mask_indices(layers.iter().flat_map(|&l| shape.layer_range(l)))
    }

    /// Multi-angle set whose circuit equals this single-angle one: every
    /// cost angle is `γ/2` and every mixer angle is `β`.
    pub fn tied_multi_angle(&self, g: &Graph, mixer: Mixer) -> Result<ParamSet> {
        if self.layout != Layout::SingleAngle {
            return Err(invalid("tied_multi_angle expects a single-angle set"));
        }
        let mut out = ParamSet::zeros(g, self.layers(), Layout::MultiAngle, mixer)?;
        let shape = out.shape;
        for l in 0..self.layers() {
            let (gamma, beta) = (self.gammas(l)[0], self.betas(l)[0]);
            for k in 0..shape.gammas_per_layer {
                out.values[shape.gamma_index(l, k)] = 0.5 * gamma;
            }
            for k in 0..shape.betas_per_layer {
                out.values[shape.beta_index(l, k)] = beta;
            }
        }
        Ok(out)
    }

    /// Layer-major text form.
    ///
    /// ```text
    /// layout ma
    /// shape <layers> <gammas per layer> <betas per layer>
    /// gamma <layer> <values...>
    /// beta <layer> <values...>
    /// mask <layer> <0/1 per entry, gammas then betas>
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "layout {}", self.layout);
        let _ = writeln!(
            s,
            "shape {} {} {}",
            self.shape.layers, self.shape.gammas_per_layer, self.shape.betas_per_layer
        );
        for l in 0..self.layers() {
            let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "gamma {l} {}", join(self.gammas(l)));
            let _ = writeln!(s, "beta {l} {}", join(self.betas(l)));
            let bits: String = self.mask[self.shape.layer_range(l)]
                .iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect();
            let _ = writeln!(s, "mask {l} {bits}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut layout = None;
        let mut shape: Option<ParamShape> = None;
        let mut values: Vec<Option<f64>> = Vec::new();
        let mut seen_gamma = Vec::new();
        let mut seen_beta = Vec::new();
        let mut mask: Vec<bool> = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let mut tok = body.split_whitespace();
            let key = tok.next().unwrap_or_default();
            match key {
                "layout" => {
                    let v = tok.next().ok_or_else(|| parse_err(line, "missing layout"))?;
                    layout = Some(v.parse::<Layout>().map_err(|e| parse_err(line, e.to_string()))?);
                }
                "shape" => {
                    let mut num = |what: &str| -> Result<usize> {
                        let t = tok.next().ok_or_else(|| parse_err(line, format!("missing {what}")))?;
                        t.parse().map_err(|_| parse_err(line, format!("bad {what} `{t}`")))
                    };
                    let s = ParamShape {
                        layers: num("layer count")?,
                        gammas_per_layer: num("gamma count")?,
                        betas_per_layer: num("beta count")?,
                    };
                    if s.layers == 0 || s.per_layer() == 0 {
                        return Err(parse_err(line, "shape must be non-empty"));
                    }
                    if s.len() > 1 << 24 {
                        return Err(parse_err(line, "shape too large"));
                    }
                    if shape.is_some() {
                        return Err(parse_err(line, "duplicate shape line"));
                    }
                    values = vec![None; s.len()];
                    mask = vec![true; s.len()];
                    seen_gamma = vec![false; s.layers];
                    seen_beta = vec![false; s.layers];
                    shape = Some(s);
                }
                "gamma" | "beta" | "mask" => {
                    let s = shape.ok_or_else(|| parse_err(line, "`shape` must precede layer lines"))?;
                    let lt = tok.next().ok_or_else(|| parse_err(line, "missing layer index"))?;
                    let l: usize = lt
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad layer index `{lt}`")))?;
                    if l >= s.layers {
                        return Err(parse_err(line, format!("layer {l} out of range")));
                    }
                    if key == "mask" {
                        let bits = tok.next().ok_or_else(|| parse_err(line, "missing mask bits"))?;
                        if bits.len() != s.per_layer() {
                            return Err(parse_err(
                                line,
                                format!("mask has {} bits, layer has {}", bits.len(), s.per_layer()),
                            ));
                        }
                        for (slot, c) in mask[s.layer_range(l)].iter_mut().zip(bits.chars()) {
                            *slot = match c {
                                '0' => false,
                                '1' => true,
                                other => return Err(parse_err(line, format!("bad mask bit `{other}`"))),
                            };
                        }
                    } else {
                        let (start, count, seen) = if key == "gamma" {
                            (s.gamma_index(l, 0), s.gammas_per_layer, &mut seen_gamma)
                        } else {
                            (s.beta_index(l, 0), s.betas_per_layer, &mut seen_beta)
                        };
                        if seen[l] {
                            return Err(parse_err(line, format!("duplicate {key} line for layer {l}")));
                        }
                        seen[l] = true;
                        let nums: Vec<f64> = tok
                            .by_ref()
                            .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("bad angle `{t}`"))))
                            .collect::<Result<_>>()?;
                        if nums.len() != count {
                            return Err(parse_err(
                                line,
                                format!("{key} layer {l} needs {count} values, got {}", nums.len()),
                            ));
                        }
                        if nums.iter().any(|v| !v.is_finite()) {
                            return Err(parse_err(line, "angles must be finite"));
                        }
                        for (k, v) in nums.into_iter().enumerate() {
                            values[start + k] = Some(v);
                        }
                    }
                    if tok.next().is_some() {
                        return Err(parse_err(line, "trailing tokens"));
                    }
                }
                other => return Err(parse_err(line, format!("unknown key `{other}`"))),
            }
        }
        let layout = layout.ok_or_else(|| parse_err(last_line.max(1), "missing layout line"))?;
        let shape = shape.ok_or_else(|| parse_err(last_line.max(1), "missing shape line"))?;
        if layout == Layout::SingleAngle && (shape.gammas_per_layer != 1 || shape.betas_per_layer != 1) {
            return Err(parse_err(last_line.max(1), "single-angle layout needs one gamma and one beta per layer"));
        }
        let values: Vec<f64> = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| parse_err(last_line.max(1), format!("missing value for layer {}", shape.layer_of(i))))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            layout,
            shape,
            values,
            mask,
        })
    }
}

/// Random initial angles, i.i.d. uniform on `[-0.1, 0.1]`, all trainable.
pub fn init_params(g: &Graph, layers: usize, layout: Layout, mixer: Mixer, seed: u64) -> Result<ParamSet> {
    let mut params = ParamSet::zeros(g, layers, layout, mixer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in params.values_mut() {
        *v = rng.random_range(-INIT_SPREAD..=INIT_SPREAD);
    }
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum GateKind {
    Zz(usize, usize),
    Rx(usize),
    Ry(usize),
    Xy(usize, usize),
}

/// One parameterised gate: its angle is `scale * values[param]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GateOp {
    pub kind: GateKind,
    pub param: usize,
    pub scale: f64,
}

impl GateOp {
    #[inline]
    pub fn apply(&self, s: &mut StateVector, angle: f64) {
        match self.kind {
            GateKind::Zz(i, j) => s.zz_phase(i, j, angle),
            GateKind::Rx(j) => s.rx(j, angle),
            GateKind::Ry(j) => s.ry(j, angle),
            GateKind::Xy(i, j) => s.xy(i, j, angle),
        }
    }
}

/// A compiled circuit for one graph, layout, mixer and depth.
#[derive(Debug, Clone)]
pub struct Ansatz<'g> {
    graph: &'g Graph,
    layout: Layout,
    mixer: Mixer,
    shape: ParamShape,
    depth: usize,
    gates: Vec<GateOp>,
    // cut value of every basis state, shared by truncated copies
    cuts: Arc<Vec<f64>>,
}

impl<'g> Ansatz<'g> {
    /// Circuit of `layers` layers. Per layer: every edge phase in canonical
    /// edge order, then the mixer terms (qubits ascending, or edges in
    /// canonical order for the XY mixer).
    pub fn new(graph: &'g Graph, layers: usize, layout: Layout, mixer: Mixer) -> Result<Self> {
        if layers == 0 {
            return Err(invalid("layer count must be at least 1"));
        }
        if graph.n() > DEFAULT_MAX_QUBITS {
            return Err(Error::SizeLimit {
                what: "qubit count",
                actual: graph.n(),
                limit: DEFAULT_MAX_QUBITS,
            });
        }
        let shape = ParamShape::for_graph(graph, layers, layout, mixer);
        let mut gates = Vec::new();
        for l in 0..layers {
            for (k, e) in graph.edges().iter().enumerate() {
                let (param, scale) = match layout {
                    Layout::MultiAngle => (shape.gamma_index(l, k), 1.0),
                    Layout::SingleAngle => (shape.gamma_index(l, 0), 0.5),
                };
                gates.push(GateOp {
                    kind: GateKind::Zz(e.u, e.v),
                    param,
                    scale,
                });
            }
            let slot = |k: usize| match layout {
                Layout::MultiAngle => shape.beta_index(l, k),
                Layout::SingleAngle => shape.beta_index(l, 0),
            };
            match mixer {
                Mixer::X | Mixer::Y => {
                    for j in 0..graph.n() {
                        let kind = if mixer == Mixer::X {
                            GateKind::Rx(j)
                        } else {
                            GateKind::Ry(j)
                        };
                        gates.push(GateOp {
                            kind,
                            param: slot(j),
                            scale: 1.0,
                        });
                    }
                }
                Mixer::Xy => {
                    for (k, e) in graph.edges().iter().enumerate() {
                        gates.push(GateOp {
                            kind: GateKind::Xy(e.u, e.v),
                            param: slot(k),
                            scale: 1.0,
                        });
                    }
                }
            }
        }
        Ok(Self {
            graph,
            layout,
            mixer,
            shape,
            depth: layers,
            gates,
            cuts: Arc::new(cut_table(graph)),
        })
    }

    /// Same circuit restricted to its first `depth` layers. Parameter sets
    /// keep their full shape; entries of the dropped layers are ignored.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        if depth == 0 || depth > self.shape.layers {
            return Err(invalid(format!(
                "depth {depth} outside 1..={}",
                self.shape.layers
            )));
        }
        let per = self.gates.len() / self.shape.layers;
        Ok(Self {
            depth,
            gates: self.gates[..per * depth].to_vec(),
            ..self.clone()
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn mixer(&self) -> Mixer {
        self.mixer
    }

    pub fn shape(&self) -> ParamShape {
        self.shape
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub(crate) fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn check(&self, params: &ParamSet) -> Result<()> {
        if params.layout() != self.layout || params.shape() != self.shape {
            return Err(Error::ShapeMismatch(format!(
                "parameters are {} {:?}, circuit expects {} {:?}",
                params.layout(),
                params.shape(),
                self.layout,
                self.shape
            )));
        }
        Ok(())
    }

    /// Applies gates `start..` to `state`.
    pub(crate) fn run_from(&self, state: &mut StateVector, start: usize, values: &[f64]) {
        self.run_range(state, start, self.gates.len(), values);
    }

    pub(crate) fn run_range(&self, state: &mut StateVector, start: usize, end: usize, values: &[f64]) {
        for g in &self.gates[start..end] {
            g.apply(state, g.scale * values[g.param]);
        }
    }

    /// Prepares `|+>^n` and runs the circuit.
    pub fn evaluate(&self, params: &ParamSet) -> Result<StateVector> {
        self.check(params)?;
        let mut s = StateVector::plus(self.graph.n())?;
        self.run_from(&mut s, 0, params.values());
        Ok(s)
    }

    /// Minimised objective of a prepared state: the negated cut expectation
    /// (analytic) or the negated shot estimate.
    pub(crate) fn measure<R: Rng + ?Sized>(&self, state: &StateVector, mode: EvalMode, rng: &mut R) -> Result<f64> {
        match mode {
            EvalMode::Analytic => {
                if state.n_qubits() != self.graph.n() {
                    return Err(Error::ShapeMismatch("state and graph sizes differ".into()));
                }
                let c: f64 = state
                    .amplitudes()
                    .iter()
                    .zip(self.cuts.iter())
                    .map(|(a, c)| a.norm_sqr() * c)
                    .sum();
                Ok(-c)
            }
            EvalMode::Shots(shots) => Ok(-state.sample(shots, rng)?.estimate_cut(self.graph)?),
        }
    }

    pub fn objective<R: Rng + ?Sized>(&self, params: &ParamSet, mode: EvalMode, rng: &mut R) -> Result<f64> {
        mode.validate()?;
        let s = self.evaluate(params)?;
        self.measure(&s, mode, rng)
    }
}

fn cut_table(g: &Graph) -> Vec<f64> {
    (0..1u64 << g.n()).map(|z| g.cut_value_of_index(z)).collect()
}

/// Prepares the QAOA state for `params` on `g`.
pub fn evaluate(g: &Graph, params: &ParamSet, mixer: Mixer) -> Result<StateVector> {
    Ansatz::new(g, params.layers(), params.layout(), mixer)?.evaluate(params)
}

/// Negated cut expectation (analytic) or negated shot estimate.
pub fn objective<R: Rng + ?Sized>(
    g: &Graph,
    params: &ParamSet,
    mixer: Mixer,
    mode: EvalMode,
    rng: &mut R,
) -> Result<f64> {
    Ansatz::new(g, params.layers(), params.layout(), mixer)?.objective(params, mode, rng)
}

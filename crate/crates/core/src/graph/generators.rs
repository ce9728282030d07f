//! Seeded random-graph models.
//!
//! Every generator is a pure function of its parameters and seed. The seed
//! feeds a ChaCha8 generator whose stream id is fixed per model, so two
//! models given the same seed draw from unrelated sequences.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{invalid, Error, Result};

/// Whole-edge-set resampling budget for models that must be connected.
pub const MAX_RESAMPLES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkWeights {
    #[default]
    Unit,
    PlusMinusOne,
}

/// A graph model with its shape parameters. The node count and seed are
/// supplied at generation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphModel {
    Path,
    Er {
        #[serde(default = "half")]
        prob: f64,
    },
    Ra {
        #[serde(default = "half")]
        r: f64,
    },
    Ba {
        #[serde(default = "two")]
        m_attach: usize,
    },
    Bb {
        #[serde(default = "two")]
        m_attach: usize,
    },
    Ws {
        #[serde(default = "four")]
        k_ring: usize,
        #[serde(default = "default_rewire")]
        p_rewire: f64,
    },
    Pl,
    Sk {
        #[serde(default)]
        weights: SkWeights,
    },
}

fn half() -> f64 {
    0.5
}
fn two() -> usize {
    2
}
fn four() -> usize {
    4
}
fn default_rewire() -> f64 {
    0.3
}

impl GraphModel {
    /// Model with default parameters from its short name
    /// (`path`, `er`, `ra`, `ba`, `bb`, `ws`, `pl`, `sk`).
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "path" => Self::Path,
            "er" => Self::Er { prob: half() },
            "ra" => Self::Ra { r: half() },
            "ba" => Self::Ba { m_attach: two() },
            "bb" => Self::Bb { m_attach: two() },
            "ws" => Self::Ws {
                k_ring: four(),
                p_rewire: default_rewire(),
            },
            "pl" => Self::Pl,
            "sk" => Self::Sk {
                weights: SkWeights::Unit,
            },
            other => return Err(invalid(format!("unknown graph model `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Path => "path",
            Self::Er { .. } => "er",
            Self::Ra { .. } => "ra",
            Self::Ba { .. } => "ba",
            Self::Bb { .. } => "bb",
            Self::Ws { .. } => "ws",
            Self::Pl => "pl",
            Self::Sk { .. } => "sk",
        }
    }

    /// Short label including non-default parameters, for report rows.
    pub fn label(&self) -> String {
        match *self {
            Self::Er { prob } => format!("er(p={prob})"),
            Self::Ra { r } => format!("ra(r={r})"),
            Self::Ba { m_attach } => format!("ba(m={m_attach})"),
            Self::Bb { m_attach } => format!("bb(m={m_attach})"),
            Self::Ws { k_ring, p_rewire } => format!("ws(k={k_ring},p={p_rewire})"),
            Self::Sk {
                weights: SkWeights::PlusMinusOne,
            } => "sk(pm1)".to_string(),
            other => other.name().to_string(),
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Graph> {
        match *self {
            Self::Path => path(n),
            Self::Er { prob } => erdos_renyi(n, prob, seed),
            Self::Ra { r } => random_connected(n, r, seed),
            Self::Ba { m_attach } => barabasi_albert(n, m_attach, seed),
            Self::Bb { m_attach } => bianconi_barabasi(n, m_attach, seed),
            Self::Ws { k_ring, p_rewire } => watts_strogatz(n, k_ring, p_rewire, seed),
            Self::Pl => power_law_tree(n, seed),
            Self::Sk { weights } => sherrington_kirkpatrick(n, seed, weights),
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("graph needs at least 2 nodes, got {n}")));
    }
    Ok(())
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1], got {p}")));
    }
    Ok(())
}

pub fn path(n: usize) -> Result<Graph> {
    check_n(n)?;
    Graph::unweighted(n, (0..n - 1).map(|i| (i, i + 1)))
}

fn gnp(n: usize, prob: f64, rng: &mut ChaCha8Rng) -> Result<Graph> {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < prob {
                pairs.push((u, v));
            }
        }
    }
    Graph::unweighted(n, pairs)
}

fn resample_connected(
    model: &str,
    mut draw: impl FnMut() -> Result<Graph>,
) -> Result<Graph> {
    for _ in 0..MAX_RESAMPLES {
        let g = draw()?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailure(format!(
        "{model}: no connected sample after {MAX_RESAMPLES} attempts"
    )))
}

/// G(n, p) conditioned on connectivity by whole-graph resampling.
pub fn erdos_renyi(n: usize, prob: f64, seed: u64) -> Result<Graph> {
    check_n(n)?;
    check_prob("edge probability", prob)?;
    let mut rng = rng_for(seed, 1);
    resample_connected("er", || gnp(n, prob, &mut rng))
}

/// Randomly connected model: each pair is an edge with probability `r`,
/// resampled until connected.
pub fn random_connected(n: usize, r: f64, seed: u64) -> Result<Graph> {
    check_n(n)?;
    check_prob("connection ratio", r)?;
    let mut rng = rng_for(seed, 2);
    resample_connected("ra", || gnp(n, r, &mut rng))
}

/// Draws `k` distinct indices with probability proportional to `weights`.
fn distinct_weighted(weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut chosen = BTreeSet::new();
    let total: f64 = weights.iter().sum();
    while chosen.len() < k {
        let mut x = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if x < w {
                pick = i;
                break;
            }
            x -= w;
        }
        if weights[pick] > 0.0 {
            chosen.insert(pick);
        }
    }
    chosen.into_iter().collect()
}

/// Preferential attachment seeded with a star on `m_attach + 1` nodes.
/// `fitness` multiplies the degree in the attachment weight.
fn attachment(n: usize, m_attach: usize, fitness: &[f64], rng: &mut ChaCha8Rng) -> Result<Graph> {
    let mut pairs: Vec<(usize, usize)> = (1..=m_attach).map(|v| (0, v)).collect();
    let mut deg = vec![0usize; n];
    deg[0] = m_attach;
    for d in deg.iter_mut().take(m_attach + 1).skip(1) {
        *d = 1;
    }
    for t in m_attach + 1..n {
        let weights: Vec<f64> = (0..t).map(|i| fitness[i] * deg[i] as f64).collect();
        for target in distinct_weighted(&weights, m_attach, rng) {
            pairs.push((target, t));
            deg[target] += 1;
            deg[t] += 1;
        }
    }
    Graph::unweighted(n, pairs)
}

fn check_attach(n: usize, m_attach: usize) -> Result<()> {
    check_n(n)?;
    if m_attach == 0 || m_attach >= n {
        return Err(invalid(format!(
            "attachment count must lie in [1, n), got {m_attach} for n={n}"
        )));
    }
    Ok(())
}

pub fn barabasi_albert(n: usize, m_attach: usize, seed: u64) -> Result<Graph> {
    check_attach(n, m_attach)?;
    let mut rng = rng_for(seed, 3);
    attachment(n, m_attach, &vec![1.0; n], &mut rng)
}

/// Fitness-weighted preferential attachment; fitness is uniform on (0, 1].
pub fn bianconi_barabasi(n: usize, m_attach: usize, seed: u64) -> Result<Graph> {
    check_attach(n, m_attach)?;
    let mut rng = rng_for(seed, 4);
    let fitness: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    attachment(n, m_attach, &fitness, &mut rng)
}

/// Ring lattice with `k_ring / 2` neighbours per side, each lattice edge
/// rewired with probability `p_rewire`; resampled until connected.
pub fn watts_strogatz(n: usize, k_ring: usize, p_rewire: f64, seed: u64) -> Result<Graph> {
    check_n(n)?;
    if k_ring < 2 || k_ring >= n {
        return Err(invalid(format!(
            "ring degree must lie in [2, n), got {k_ring} for n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p_rewire) {
        return Err(invalid(format!("rewiring probability must lie in [0, 1], got {p_rewire}")));
    }
    let mut rng = rng_for(seed, 5);
    let half = k_ring / 2;
    resample_connected("ws", || {
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
        for j in 1..=half {
            for u in 0..n {
                edges.insert(key(u, (u + j) % n));
            }
        }
        for j in 1..=half {
            for u in 0..n {
                if rng.random::<f64>() >= p_rewire {
                    continue;
                }
                let v = (u + j) % n;
                let current = key(u, v);
                if !edges.contains(&current) {
                    continue;
                }
                let free: Vec<usize> = (0..n)
                    .filter(|&w| w != u && !edges.contains(&key(u, w)))
                    .collect();
                if free.is_empty() {
                    continue;
                }
                let w = free[rng.random_range(0..free.len())];
                edges.remove(&current);
                edges.insert(key(u, w));
            }
        }
        Graph::unweighted(n, edges)
    })
}

/// Power-law tree: each new node attaches to one existing node chosen with
/// probability proportional to its degree.
pub fn power_law_tree(n: usize, seed: u64) -> Result<Graph> {
    check_n(n)?;
    let mut rng = rng_for(seed, 6);
    let mut pairs = vec![(0, 1)];
    let mut deg = vec![0usize; n];
    deg[0] = 1;
    deg[1] = 1;
    for t in 2..n {
        let weights: Vec<f64> = deg[..t].iter().map(|&d| d as f64).collect();
        let target = distinct_weighted(&weights, 1, &mut rng)[0];
        pairs.push((target, t));
        deg[target] += 1;
        deg[t] += 1;
    }
    Graph::unweighted(n, pairs)
}

/// Complete graph. With [`SkWeights::PlusMinusOne`] each coupling is an
/// independent fair ±1; otherwise all weights are 1 and the seed is unused.
pub fn sherrington_kirkpatrick(n: usize, seed: u64, weights: SkWeights) -> Result<Graph> {
    check_n(n)?;
    let mut rng = rng_for(seed, 7);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            let w = match weights {
                SkWeights::Unit => 1.0,
                SkWeights::PlusMinusOne => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            edges.push((u, v, w));
        }
    }
    Graph::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_models() -> Vec<GraphModel> {
        ["path", "er", "ra", "ba", "bb", "ws", "pl", "sk"]
            .iter()
            .map(|m| GraphModel::from_name(m).unwrap())
            .collect()
    }

    #[test]
    fn path_edges() {
        let g = path(5).unwrap();
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn sk_is_complete() {
        assert_eq!(sherrington_kirkpatrick(6, 0, SkWeights::Unit).unwrap().m(), 15);
    }

    #[test]
    fn er_is_deterministic() {
        let a = erdos_renyi(10, 0.4, 7).unwrap();
        let b = erdos_renyi(10, 0.4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn every_model_connected_and_deterministic() {
        for model in all_models() {
            for n in [5usize, 6, 9, 11] {
                for seed in 0..5 {
                    let g = model.generate(n, seed).unwrap();
                    assert!(g.is_connected(), "{} n={n} seed={seed}", model.name());
                    assert_eq!(g, model.generate(n, seed).unwrap());
                }
            }
        }
    }

    #[test]
    fn tree_and_attachment_sizes() {
        assert_eq!(power_law_tree(9, 3).unwrap().m(), 8);
        // star on 3 nodes (2 edges) + 2 edges for each of the 4 later nodes
        assert_eq!(barabasi_albert(7, 2, 1).unwrap().m(), 10);
        assert_eq!(bianconi_barabasi(7, 2, 1).unwrap().m(), 10);
        assert_eq!(watts_strogatz(8, 4, 0.2, 1).unwrap().m(), 16);
    }

    #[test]
    fn seeds_change_graphs() {
        let a = erdos_renyi(10, 0.4, 1).unwrap();
        let distinct = (2..10).any(|s| erdos_renyi(10, 0.4, s).unwrap() != a);
        assert!(distinct);
    }

    #[test]
    fn invalid_parameters() {
        assert!(erdos_renyi(5, 0.0, 1).is_err());
        assert!(random_connected(5, 1.5, 1).is_err());
        assert!(barabasi_albert(5, 5, 1).is_err());
        assert!(watts_strogatz(5, 6, 0.1, 1).is_err());
        assert!(path(1).is_err());
        assert!(GraphModel::from_name("hypercube").is_err());
    }

    #[test]
    fn hopeless_probability_fails_after_retries() {
        let err = erdos_renyi(30, 1e-9, 1).unwrap_err();
        assert!(matches!(err, Error::GenerationFailure(_)));
    }

    #[test]
    fn model_serde() {
        let m: GraphModel = toml::from_str("kind = \"ra\"\nr = 0.2\n").unwrap();
        assert_eq!(m, GraphModel::Ra { r: 0.2 });
        let m: GraphModel = toml::from_str("kind = \"ws\"\n").unwrap();
        assert_eq!(m, GraphModel::from_name("ws").unwrap());
    }
}

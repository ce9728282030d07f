use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Largest node count accepted by [`brute_force_maxcut`].
pub const DEFAULT_MAXCUT_LIMIT: usize = 30;

/// Exact Max-Cut solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutResult {
    pub max_value: f64,
    /// Every optimal assignment as a basis-state index, sorted ascending.
    /// Closed under the global bit flip.
    pub optimal_assignments: Vec<u64>,
}

pub fn brute_force_maxcut(g: &Graph) -> Result<CutResult> {
    brute_force_maxcut_with_limit(g, DEFAULT_MAXCUT_LIMIT)
}

/// Exhaustive Max-Cut over the `2^(n-1)` assignments with the last node
/// fixed to side 0, visited in Gray-code order so each move costs one
/// node's degree.
pub fn brute_force_maxcut_with_limit(g: &Graph, max_nodes: usize) -> Result<CutResult> {
    let n = g.n();
    if n > max_nodes {
        return Err(Error::SizeLimit {
            what: "node count for brute-force Max-Cut",
            actual: n,
            limit: max_nodes,
        });
    }
    let adj = g.adjacency();
    let scale = g.edges().iter().map(|e| e.w.abs()).sum::<f64>().max(1.0);
    let tol = 1e-12 * scale;

    let mut z: u64 = 0;
    let mut side = vec![false; n];
    let mut cut = 0.0f64;
    let mut best = 0.0f64;
    let mut optimal = vec![0u64];

    let half: u64 = 1 << (n - 1);
    for i in 1..half {
        let k = i.trailing_zeros() as usize;
        let delta: f64 = adj[k]
            .iter()
            .map(|&(y, w)| if side[y] == side[k] { w } else { -w })
            .sum();
        side[k] = !side[k];
        z ^= 1 << k;
        cut += delta;
        if cut > best + tol {
            best = cut;
            optimal.clear();
            optimal.push(z);
        } else if (cut - best).abs() <= tol {
            optimal.push(z);
        }
    }

    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut all: Vec<u64> = optimal.iter().flat_map(|&z| [z, !z & mask]).collect();
    all.sort_unstable();
    all.dedup();
    // Re-evaluate the winner exactly so accumulated rounding never leaks out.
    let max_value = g.cut_value_of_index(all[0]);
    Ok(CutResult {
        max_value,
        optimal_assignments: all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;

    /// Naive oracle: every one of the 2^n assignments, no symmetry.
    fn naive(g: &Graph) -> (f64, Vec<u64>) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = Vec::new();
        for z in 0..(1u64 << g.n()) {
            let c = g.cut_value_of_index(z);
            if c > best + 1e-12 {
                best = c;
                arg = vec![z];
            } else if (c - best).abs() <= 1e-12 {
                arg.push(z);
            }
        }
        (best, arg)
    }

    #[test]
    fn k4_and_path() {
        let k4 = generators::sherrington_kirkpatrick(4, 0, crate::graph::SkWeights::Unit).unwrap();
        assert_eq!(brute_force_maxcut(&k4).unwrap().max_value, 4.0);
        let p5 = generators::path(5).unwrap();
        let r = brute_force_maxcut(&p5).unwrap();
        assert_eq!(r.max_value, 4.0);
        assert_eq!(r.optimal_assignments, vec![0b01010, 0b10101]);
    }

    #[test]
    fn er8_matches_naive_enumeration() {
        let g = generators::erdos_renyi(8, 0.5, 1).unwrap();
        let r = brute_force_maxcut(&g).unwrap();
        let (best, arg) = naive(&g);
        assert_eq!(r.max_value, best);
        assert_eq!(r.optimal_assignments, arg);
    }

    #[test]
    fn closed_under_flip() {
        let g = generators::barabasi_albert(7, 2, 3).unwrap();
        let r = brute_force_maxcut(&g).unwrap();
        for &z in &r.optimal_assignments {
            assert!(r.optimal_assignments.contains(&(!z & 0x7f)));
            assert_eq!(g.cut_value_of_index(z), r.max_value);
        }
    }

    #[test]
    fn size_guard() {
        let g = generators::path(12).unwrap();
        assert!(matches!(
            brute_force_maxcut_with_limit(&g, 10),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn signed_weights() {
        let g = generators::sherrington_kirkpatrick(6, 11, crate::graph::SkWeights::PlusMinusOne).unwrap();
        let r = brute_force_maxcut(&g).unwrap();
        let (best, arg) = naive(&g);
        assert!((r.max_value - best).abs() < 1e-12);
        assert_eq!(r.optimal_assignments, arg);
    }
}

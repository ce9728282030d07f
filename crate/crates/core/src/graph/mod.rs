//! Max-Cut problem instances.
//!
//! A [`Graph`] is an undirected weighted graph in canonical form: every edge
//! is stored as `(u, v, w)` with `u < v`, and the edge list is sorted
//! lexicographically. Basis-state indices use bit `j` for node `j`.

pub mod generators;
mod maxcut;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, parse_err, Error, Result};

pub use generators::{GraphModel, SkWeights};
pub use maxcut::{brute_force_maxcut, brute_force_maxcut_with_limit, CutResult, DEFAULT_MAXCUT_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph from `(u, v, w)` triples.
    ///
    /// Endpoints are reordered so that `u < v` and the list is sorted.
    /// Self-loops, duplicate pairs, out-of-range nodes and non-finite
    /// weights are rejected. Connectivity is not checked here; see
    /// [`Graph::require_connected`].
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("graph needs at least 2 nodes, got {n}")));
        }
        if n > 63 {
            return Err(Error::SizeLimit {
                what: "node count",
                actual: n,
                limit: 63,
            });
        }
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a},{b}) out of range for n={n}")));
            }
            if a == b {
                return Err(invalid(format!("self-loop on node {a}")));
            }
            if !w.is_finite() {
                return Err(invalid(format!("non-finite weight on edge ({a},{b})")));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            out.push(Edge { u, v, w });
        }
        out.sort_by(|x, y| (x.u, x.v).cmp(&(y.u, y.v)));
        if let Some(dup) = out.windows(2).find(|p| p[0].u == p[1].u && p[0].v == p[1].v) {
            return Err(invalid(format!("duplicate edge ({},{})", dup[0].u, dup[0].v)));
        }
        Ok(Self { n, edges: out })
    }

    /// Unit-weight graph from node pairs.
    pub fn unweighted(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(n, pairs.into_iter().map(|(u, v)| (u, v, 1.0)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn is_unit_weight(&self) -> bool {
        self.edges.iter().all(|e| e.w == 1.0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        adj
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == self.n
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(invalid("graph is not connected"))
        }
    }

    /// Cut weight of the assignment `z` (one entry per node).
    pub fn cut_value(&self, z: &[bool]) -> Result<f64> {
        if z.len() != self.n {
            return Err(invalid(format!(
                "assignment has length {}, graph has {} nodes",
                z.len(),
                self.n
            )));
        }
        Ok(self
            .edges
            .iter()
            .filter(|e| z[e.u] != z[e.v])
            .map(|e| e.w)
            .sum())
    }

    /// Cut weight of the basis-state index `z` (bit `j` is node `j`).
    pub fn cut_value_of_index(&self, z: u64) -> f64 {
        self.edges
            .iter()
            .filter(|e| ((z >> e.u) ^ (z >> e.v)) & 1 == 1)
            .map(|e| e.w)
            .sum()
    }

    /// Plain-text form: `n m` on the first line, then one `u v w` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n, self.m());
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.u, e.v, e.w);
        }
        s
    }

    /// Parses the plain-text form written by [`Graph::to_text`].
    ///
    /// Blank lines and lines starting with `#` are ignored. The weight
    /// column is optional and defaults to 1.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty graph file"))?;
        let mut head = header.split_whitespace();
        let n: usize = parse_field(head.next(), hline, "node count")?;
        let m: usize = parse_field(head.next(), hline, "edge count")?;
        if head.next().is_some() {
            return Err(parse_err(hline, "header must be `n m`"));
        }
        if n > 63 {
            return Err(parse_err(hline, format!("node count {n} exceeds 63")));
        }
        let mut edges = Vec::with_capacity(m.min(4096));
        for (line, body) in lines.by_ref() {
            if edges.len() == m {
                return Err(parse_err(line, format!("more than {m} edge lines")));
            }
            let mut f = body.split_whitespace();
            let u: usize = parse_field(f.next(), line, "u")?;
            let v: usize = parse_field(f.next(), line, "v")?;
            let w: f64 = match f.next() {
                Some(tok) => tok
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad weight `{tok}`")))?,
                None => 1.0,
            };
            if f.next().is_some() {
                return Err(parse_err(line, "edge line must be `u v [w]`"));
            }
            edges.push((u, v, w));
        }
        if edges.len() != m {
            return Err(parse_err(
                hline,
                format!("header declares {m} edges, found {}", edges.len()),
            ));
        }
        Graph::new(n, edges).map_err(|e| match e {
            Error::InvalidArgument(msg) => parse_err(hline, msg),
            other => other,
        })
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

/// Renders a basis-state index as a string with node 0 first.
pub fn bits_to_string(z: u64, n: usize) -> String {
    (0..n)
        .map(|j| if (z >> j) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`bits_to_string`].
pub fn bits_from_str(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(invalid(format!("bad bit `{other}`"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::unweighted(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn cut_value_examples() {
        let g = triangle();
        assert_eq!(g.cut_value(&bits_from_str("110").unwrap()).unwrap(), 2.0);
        let p5 = generators::path(5).unwrap();
        assert_eq!(p5.cut_value(&bits_from_str("10101").unwrap()).unwrap(), 4.0);
        assert_eq!(p5.cut_value(&[false; 5]).unwrap(), 0.0);
        assert_eq!(g.cut_value(&[false; 3]).unwrap(), 0.0);
    }

    #[test]
    fn cut_value_length_mismatch() {
        assert!(matches!(
            triangle().cut_value(&[true, false]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn index_and_slice_agree() {
        let g = Graph::unweighted(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
        for z in 0..16u64 {
            let bits: Vec<bool> = (0..4).map(|j| (z >> j) & 1 == 1).collect();
            assert_eq!(g.cut_value_of_index(z), g.cut_value(&bits).unwrap());
        }
    }

    #[test]
    fn canonical_form() {
        let g = Graph::unweighted(4, [(3, 2), (1, 0), (2, 0)]).unwrap();
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (2, 3)]);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::unweighted(3, [(0, 0)]).is_err());
        assert!(Graph::unweighted(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::unweighted(3, [(0, 3)]).is_err());
        assert!(Graph::unweighted(1, []).is_err());
        assert!(Graph::new(3, [(0, 1, f64::NAN)]).is_err());
    }

    #[test]
    fn connectivity() {
        assert!(triangle().is_connected());
        let g = Graph::unweighted(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
        assert!(g.require_connected().is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = Graph::new(4, [(0, 1, 1.0), (1, 2, -1.0), (2, 3, 0.5)]).unwrap();
        let back = Graph::from_text(&g.to_text()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let err = Graph::from_text("3 2\n0 1\n1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = Graph::from_text("3 3\n0 1\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = Graph::from_text("").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(Graph::from_text("3 1\n0 1 1 7\n").is_err());
    }

    #[test]
    fn text_accepts_comments_and_default_weight() {
        let g = Graph::from_text("# path\n3 2\n0 1\n\n1 2 2.5\n").unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.edges()[1].w, 2.5);
    }
}

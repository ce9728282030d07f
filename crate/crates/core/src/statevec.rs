//! Dense state-vector simulator.
//!
//! Qubit `j` is bit `j` of the basis-state index (little-endian). Every
//! gate kernel updates amplitudes in place, pairwise along the qubit
//! strides; no gate matrix is ever built.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;

/// Default memory guard for [`StateVector::plus`].
pub const DEFAULT_MAX_QUBITS: usize = 28;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amp: Vec<Complex64>,
}

impl StateVector {
    /// Uniform superposition `|+>^n`.
    pub fn plus(n: usize) -> Result<Self> {
        Self::plus_with_limit(n, DEFAULT_MAX_QUBITS)
    }

    pub fn plus_with_limit(n: usize, max_qubits: usize) -> Result<Self> {
        check_size(n, max_qubits)?;
        let len = 1usize << n;
        let a = (len as f64).sqrt().recip();
        Ok(Self {
            n,
            amp: vec![Complex64::new(a, 0.0); len],
        })
    }

    /// Computational basis state `|z>`.
    pub fn basis(n: usize, z: u64) -> Result<Self> {
        check_size(n, DEFAULT_MAX_QUBITS)?;
        let len = 1usize << n;
        if z as usize >= len {
            return Err(invalid(format!("basis index {z} out of range for {n} qubits")));
        }
        let mut amp = vec![Complex64::new(0.0, 0.0); len];
        amp[z as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amp })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the vector
    /// is used as given (callers normalise).
    pub fn from_amplitudes(amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() < 2 || !amp.len().is_power_of_two() {
            return Err(invalid(format!(
                "amplitude count {} is not a power of two >= 2",
                amp.len()
            )));
        }
        let n = amp.len().trailing_zeros() as usize;
        check_size(n, DEFAULT_MAX_QUBITS)?;
        Ok(Self { n, amp })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amp.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, j: usize) -> Result<()> {
        if j >= self.n {
            return Err(invalid(format!("qubit {j} out of range for {} qubits", self.n)));
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(invalid(format!("two-qubit gate needs distinct qubits, got {i} twice")));
        }
        Ok(())
    }

    /// `exp(+i θ Z_i Z_j)`: phase `e^{+iθ}` where bits `i`, `j` agree and
    /// `e^{-iθ}` where they differ.
    pub fn apply_zz_phase(&mut self, i: usize, j: usize, theta: f64) -> Result<()> {
        self.check_pair(i, j)?;
        self.zz_phase(i, j, theta);
        Ok(())
    }

    /// `exp(-i β X_j)`.
    pub fn apply_rx(&mut self, j: usize, beta: f64) -> Result<()> {
        self.check_qubit(j)?;
        self.rx(j, beta);
        Ok(())
    }

    /// `exp(-i β Y_j)`.
    pub fn apply_y_rot(&mut self, j: usize, beta: f64) -> Result<()> {
        self.check_qubit(j)?;
        self.ry(j, beta);
        Ok(())
    }

    /// `exp(-i β (X_i X_j + Y_i Y_j) / 2)`: identity on `|00>`, `|11>` and
    /// a rotation by `β` inside `span{|01>, |10>}`.
    pub fn apply_xy(&mut self, i: usize, j: usize, beta: f64) -> Result<()> {
        self.check_pair(i, j)?;
        self.xy(i, j, beta);
        Ok(())
    }

    /// `exp(-i φ X_i X_j)`.
    pub fn apply_xx(&mut self, i: usize, j: usize, phi: f64) -> Result<()> {
        self.check_pair(i, j)?;
        self.xx(i, j, phi);
        Ok(())
    }

    /// `exp(-i φ Y_i Y_j)`.
    pub fn apply_yy(&mut self, i: usize, j: usize, phi: f64) -> Result<()> {
        self.check_pair(i, j)?;
        self.yy(i, j, phi);
        Ok(())
    }

    // Unchecked kernels. Callers guarantee qubit indices are valid.

    pub(crate) fn zz_phase(&mut self, i: usize, j: usize, theta: f64) {
        let same = Complex64::from_polar(1.0, theta);
        let diff = same.conj();
        for (z, a) in self.amp.iter_mut().enumerate() {
            if ((z >> i) ^ (z >> j)) & 1 == 0 {
                *a *= same;
            } else {
                *a *= diff;
            }
        }
    }

    pub(crate) fn rx(&mut self, j: usize, beta: f64) {
        let (s, c) = beta.sin_cos();
        let stride = 1usize << j;
        for block in self.amp.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let x0 = *a0;
                let x1 = *a1;
                *a0 = x0 * c - I * (x1 * s);
                *a1 = x1 * c - I * (x0 * s);
            }
        }
    }

    pub(crate) fn ry(&mut self, j: usize, beta: f64) {
        let (s, c) = beta.sin_cos();
        let stride = 1usize << j;
        for block in self.amp.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let x0 = *a0;
                let x1 = *a1;
                *a0 = x0 * c - x1 * s;
                *a1 = x0 * s + x1 * c;
            }
        }
    }

    /// Visits every index with bits `i` and `j` both clear.
    fn for_each_base(&mut self, i: usize, j: usize, mut f: impl FnMut(&mut [Complex64], usize)) {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let len = self.amp.len();
        let quarter = len >> 2;
        for k in 0..quarter {
            // insert zero bits at positions lo and hi
            let low_mask = (1usize << lo) - 1;
            let mut z = (k & low_mask) | ((k & !low_mask) << 1);
            let high_mask = (1usize << hi) - 1;
            z = (z & high_mask) | ((z & !high_mask) << 1);
            f(&mut self.amp, z);
        }
    }

    pub(crate) fn xy(&mut self, i: usize, j: usize, beta: f64) {
        let (s, c) = beta.sin_cos();
        let bi = 1usize << i;
        let bj = 1usize << j;
        self.for_each_base(i, j, |amp, z| {
            let a = amp[z | bj];
            let b = amp[z | bi];
            amp[z | bj] = a * c - I * (b * s);
            amp[z | bi] = b * c - I * (a * s);
        });
    }

    pub(crate) fn xx(&mut self, i: usize, j: usize, phi: f64) {
        let (s, c) = phi.sin_cos();
        let bi = 1usize << i;
        let bj = 1usize << j;
        self.for_each_base(i, j, |amp, z| {
            for (p, q) in [(z, z | bi | bj), (z | bj, z | bi)] {
                let a = amp[p];
                let b = amp[q];
                amp[p] = a * c - I * (b * s);
                amp[q] = b * c - I * (a * s);
            }
        });
    }

    pub(crate) fn yy(&mut self, i: usize, j: usize, phi: f64) {
        let (s, c) = phi.sin_cos();
        let bi = 1usize << i;
        let bj = 1usize << j;
        self.for_each_base(i, j, |amp, z| {
            // Y⊗Y maps |00> -> -|11>, |11> -> -|00>, |01> <-> |10>.
            let (p, q) = (z, z | bi | bj);
            let a = amp[p];
            let b = amp[q];
            amp[p] = a * c + I * (b * s);
            amp[q] = b * c + I * (a * s);
            let (p, q) = (z | bj, z | bi);
            let a = amp[p];
            let b = amp[q];
            amp[p] = a * c - I * (b * s);
            amp[q] = b * c - I * (a * s);
        });
    }

    /// `<Z_i Z_j>`.
    pub fn zz_correlation(&self, i: usize, j: usize) -> f64 {
        self.amp
            .iter()
            .enumerate()
            .map(|(z, a)| {
                let p = a.norm_sqr();
                if ((z >> i) ^ (z >> j)) & 1 == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum()
    }

    /// Exact `<C> = Σ_edges w (1 - <Z_i Z_j>) / 2`.
    pub fn expectation_cut(&self, g: &Graph) -> Result<f64> {
        check_graph(self.n, g)?;
        Ok(g.edges()
            .iter()
            .map(|e| e.w * 0.5 * (1.0 - self.zz_correlation(e.u, e.v)))
            .sum())
    }

    /// Draws `shots` basis states from `|amp|²`.
    pub fn sample<R: Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> Result<SampleCounts> {
        if shots == 0 {
            return Err(invalid("shot count must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.amp.len());
        let mut acc = 0.0;
        for a in &self.amp {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let x = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
            *counts.entry(idx as u64).or_insert(0u64) += 1;
        }
        Ok(SampleCounts { shots, counts })
    }

    /// Text dump of the amplitudes, one basis state per line (n ≤ 6).
    pub fn debug_dump(&self) -> Result<String> {
        if self.n > 6 {
            return Err(Error::SizeLimit {
                what: "qubits for amplitude dump",
                actual: self.n,
                limit: 6,
            });
        }
        let mut s = String::new();
        for (z, a) in self.amp.iter().enumerate() {
            let _ = writeln!(
                s,
                "{} {:+.12} {:+.12}",
                crate::graph::bits_to_string(z as u64, self.n),
                a.re,
                a.im
            );
        }
        Ok(s)
    }
}

fn check_size(n: usize, max_qubits: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("state needs at least one qubit"));
    }
    if n > max_qubits {
        return Err(Error::SizeLimit {
            what: "qubit count",
            actual: n,
            limit: max_qubits,
        });
    }
    Ok(())
}

fn check_graph(n: usize, g: &Graph) -> Result<()> {
    if g.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "state has {n} qubits, graph has {} nodes",
            g.n()
        )));
    }
    Ok(())
}

/// Measurement outcomes: basis-state index to occurrence count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub shots: u64,
    pub counts: BTreeMap<u64, u64>,
}

impl SampleCounts {
    /// `(1/S) Σ_z counts(z) · cut(z)`.
    ///
    /// The weighted total is accumulated before the single division, so on
    /// integer-weight graphs the result is an exact multiple of `1/S`
    /// whenever `S` is a power of two.
    pub fn estimate_cut(&self, g: &Graph) -> Result<f64> {
        if let Some((&z, _)) = self.counts.iter().next_back() {
            if g.n() < 64 && z >> g.n() != 0 {
                return Err(Error::ShapeMismatch(format!(
                    "sample index {z} does not fit {} nodes",
                    g.n()
                )));
            }
        }
        let total: f64 = self
            .counts
            .iter()
            .map(|(&z, &c)| c as f64 * g.cut_value_of_index(z))
            .sum();
        Ok(total / self.shots as f64)
    }
}

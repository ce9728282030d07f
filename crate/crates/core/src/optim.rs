//! Masked gradients and AdaGrad.
//!
//! [`grad_param_shift`] differentiates the objective with the two-term
//! shift rule applied gate by gate. Every cost and single-qubit mixer gate
//! has the form `exp(∓iφP)` with `P² = 1`, so
//! `∂f/∂φ = f(φ + π/4) − f(φ − π/4)`. The XY term has generator eigenvalues
//! `{−1, 0, 0, 1}`, which the two-term rule does not cover; it is split into
//! its commuting factors `exp(−i(β/2)XX)·exp(−i(β/2)YY)` and each factor is
//! shifted on its own. A parameter that drives several gates (the shared
//! angles of the single-angle layout) collects the sum of its gates'
//! contributions, each scaled by the gate's angle factor.
//!
//! The sweep keeps a running state just before the gate being shifted, so
//! a shifted evaluation only replays the gates after it.

use std::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, EvalMode, GateKind, ParamSet, ParamShape};
use crate::error::{invalid, Error, Result};
use crate::statevec::StateVector;

/// Default AdaGrad step size.
pub const DEFAULT_LR: f64 = 0.1;
/// Divide guard added to the root of the accumulator.
pub const DEFAULT_EPS_DIV: f64 = 1e-8;

/// Gradient congruent to a [`ParamSet`]; entries outside the mask are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn max_abs_diff(&self, other: &Gradient) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Parameter-shift gradient of the objective w.r.t. the masked entries.
///
/// In shot mode every shifted evaluation draws a fresh sample from `rng`.
pub fn grad_param_shift<R: Rng + ?Sized>(
    ansatz: &Ansatz<'_>,
    params: &ParamSet,
    mode: EvalMode,
    rng: &mut R,
) -> Result<Gradient> {
    ansatz.check(params)?;
    mode.validate()?;
    let values = params.values();
    let mask = params.mask();
    let gates = ansatz.gates();
    let mut grad = Gradient::zeros(values.len());

    let Some(first) = gates.iter().position(|g| mask[g.param]) else {
        return Ok(grad);
    };
    let mut base = StateVector::plus(ansatz.graph().n())?;
    ansatz.run_range(&mut base, 0, first, values);

    for (k, gate) in gates.iter().enumerate().skip(first) {
        let angle = gate.scale * values[gate.param];
        if mask[gate.param] {
            let mut shifted = |extra: &dyn Fn(&mut StateVector, f64), delta: f64| -> Result<f64> {
                let mut s = base.clone();
                extra(&mut s, delta);
                ansatz.run_from(&mut s, k + 1, values);
                ansatz.measure(&s, mode, rng)
            };
            let d = match gate.kind {
                GateKind::Xy(i, j) => {
                    let xx = |s: &mut StateVector, d: f64| {
                        s.xy(i, j, angle);
                        s.xx(i, j, d);
                    };
                    let yy = |s: &mut StateVector, d: f64| {
                        s.xy(i, j, angle);
                        s.yy(i, j, d);
                    };
                    let dxx = shifted(&xx, FRAC_PI_4)? - shifted(&xx, -FRAC_PI_4)?;
                    let dyy = shifted(&yy, FRAC_PI_4)? - shifted(&yy, -FRAC_PI_4)?;
                    0.5 * (dxx + dyy)
                }
                _ => {
                    let plain = |s: &mut StateVector, d: f64| gate.apply(s, angle + d);
                    shifted(&plain, FRAC_PI_4)? - shifted(&plain, -FRAC_PI_4)?
                }
            };
            grad.values[gate.param] += gate.scale * d;
        }
        gate.apply(&mut base, angle);
    }
    Ok(grad)
}

/// Central finite differences on the masked entries (analytic objective).
pub fn grad_finite_diff(ansatz: &Ansatz<'_>, params: &ParamSet, h: f64) -> Result<Gradient> {
    ansatz.check(params)?;
    if !(h > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let mut grad = Gradient::zeros(params.len());
    let mut probe = params.clone();
    // analytic mode never draws from the generator
    let mut sink = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for i in 0..params.len() {
        if !params.mask()[i] {
            continue;
        }
        let x = params.values()[i];
        probe.values_mut()[i] = x + h;
        let up = ansatz.objective(&probe, EvalMode::Analytic, &mut sink)?;
        probe.values_mut()[i] = x - h;
        let down = ansatz.objective(&probe, EvalMode::Analytic, &mut sink)?;
        probe.values_mut()[i] = x;
        grad.values[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Which accumulators [`AdaGrad::reset_accum`] clears.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetScope {
    All,
    Layer(usize),
}

/// AdaGrad with per-entry squared-gradient accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaGrad {
    pub lr: f64,
    pub eps_div: f64,
    shape: ParamShape,
    accum: Vec<f64>,
}

impl AdaGrad {
    pub fn new(shape: ParamShape, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self {
            lr,
            eps_div: DEFAULT_EPS_DIV,
            shape,
            accum: vec![0.0; shape.len()],
        })
    }

    pub fn accum(&self) -> &[f64] {
        &self.accum
    }

    /// For every masked entry: `accum += g²; θ −= lr·g / (√accum + eps_div)`.
    /// Nothing is modified when any masked gradient entry is non-finite.
    pub fn step(&mut self, params: &mut ParamSet, grad: &Gradient) -> Result<()> {
        if params.shape() != self.shape || grad.values.len() != self.accum.len() {
            return Err(Error::ShapeMismatch(
                "optimizer, parameters and gradient must share a shape".into(),
            ));
        }
        let mask = params.mask().to_vec();
        if let Some(i) = (0..mask.len()).find(|&i| mask[i] && !grad.values[i].is_finite()) {
            return Err(Error::Numerical(format!("gradient entry {i} is not finite")));
        }
        let values = params.values_mut();
        for i in (0..mask.len()).filter(|&i| mask[i]) {
            let g = grad.values[i];
            self.accum[i] += g * g;
            values[i] -= self.lr * g / (self.accum[i].sqrt() + self.eps_div);
        }
        Ok(())
    }

    pub fn reset_accum(&mut self, scope: ResetScope) -> Result<()> {
        match scope {
            ResetScope::All => self.accum.fill(0.0),
            ResetScope::Layer(l) => {
                if l >= self.shape.layers {
                    return Err(invalid(format!(
                        "layer {l} out of range for {} layers",
                        self.shape.layers
                    )));
                }
                self.accum[self.shape.layer_range(l)].fill(0.0);
            }
        }
        Ok(())
    }

    /// Overwrites the accumulators at `indices` with those of `other`.
    pub(crate) fn copy_entries_from(&mut self, other: &AdaGrad, indices: impl IntoIterator<Item = usize>) {
        for i in indices {
            self.accum[i] = other.accum[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{init_params, Layout, Mixer};
    use crate::graph::{generators, Graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn analytic(a: &Ansatz<'_>, p: &ParamSet) -> Gradient {
        grad_param_shift(a, p, EvalMode::Analytic, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn zero_angles_single_edge_matches_finite_difference() {
        let g = generators::path(2).unwrap();
        let a = Ansatz::new(&g, 1, Layout::MultiAngle, Mixer::X).unwrap();
        let p = ParamSet::zeros(&g, 1, Layout::MultiAngle, Mixer::X).unwrap();
        let ps = analytic(&a, &p);
        let fd = grad_finite_diff(&a, &p, 1e-5).unwrap();
        assert!(ps.max_abs_diff(&fd) < 1e-6);
        // flat at the origin for every entry
        assert!(fd.values.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn matches_finite_difference_all_mixers_and_layouts() {
        let g = generators::barabasi_albert(5, 2, 7).unwrap();
        for layout in [Layout::MultiAngle, Layout::SingleAngle] {
            for mixer in [Mixer::X, Mixer::Y, Mixer::Xy] {
                let a = Ansatz::new(&g, 2, layout, mixer).unwrap();
                let mut p = init_params(&g, 2, layout, mixer, 3).unwrap();
                for v in p.values_mut() {
                    *v *= 8.0;
                }
                let ps = analytic(&a, &p);
                let fd = grad_finite_diff(&a, &p, 1e-5).unwrap();
                assert!(ps.max_abs_diff(&fd) < 1e-6, "{layout} {mixer}: {}", ps.max_abs_diff(&fd));
            }
        }
    }

    #[test]
    fn masked_entries_are_exactly_zero() {
        let g = generators::path(4).unwrap();
        let a = Ansatz::new(&g, 3, Layout::MultiAngle, Mixer::X).unwrap();
        let mut p = init_params(&g, 3, Layout::MultiAngle, Mixer::X, 1).unwrap();
        p.set_mask_layers(&[1]).unwrap();
        let grad = analytic(&a, &p);
        for (i, v) in grad.values.iter().enumerate() {
            if !p.mask()[i] {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(grad.values.iter().any(|v| *v != 0.0));
        p.set_mask_all(false);
        assert!(analytic(&a, &p).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn symmetric_edges_get_equal_gradients() {
        // 4-cycle with tied parameters: every edge is equivalent.
        let g = Graph::unweighted(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let a = Ansatz::new(&g, 1, Layout::MultiAngle, Mixer::X).unwrap();
        let sa = init_params(&g, 1, Layout::SingleAngle, Mixer::X, 2).unwrap();
        let p = sa.tied_multi_angle(&g, Mixer::X).unwrap();
        let grad = analytic(&a, &p);
        let gam = &grad.values[..4];
        let bet = &grad.values[4..];
        assert!(gam.iter().all(|v| (v - gam[0]).abs() < 1e-9));
        assert!(bet.iter().all(|v| (v - bet[0]).abs() < 1e-9));
    }

    #[test]
    fn doubling_weights_doubles_gradient() {
        let g = generators::erdos_renyi(5, 0.6, 1).unwrap();
        let g2 = Graph::new(5, g.edges().iter().map(|e| (e.u, e.v, 2.0 * e.w))).unwrap();
        let a = Ansatz::new(&g, 2, Layout::MultiAngle, Mixer::X).unwrap();
        let a2 = Ansatz::new(&g2, 2, Layout::MultiAngle, Mixer::X).unwrap();
        // Edge phases scale with the weight only through the observable here,
        // since the circuit angles are the parameters themselves.
        let p = init_params(&g, 2, Layout::MultiAngle, Mixer::X, 4).unwrap();
        let d1 = grad_finite_diff(&a, &p, 1e-5).unwrap();
        let d2 = grad_finite_diff(&a2, &p, 1e-5).unwrap();
        for (x, y) in d1.values.iter().zip(&d2.values) {
            assert!((2.0 * x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn shot_mode_is_seeded() {
        let g = generators::path(4).unwrap();
        let a = Ansatz::new(&g, 2, Layout::MultiAngle, Mixer::X).unwrap();
        let p = init_params(&g, 2, Layout::MultiAngle, Mixer::X, 1).unwrap();
        let x = grad_param_shift(&a, &p, EvalMode::Shots(128), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let y = grad_param_shift(&a, &p, EvalMode::Shots(128), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn finite_diff_rejects_bad_step() {
        let g = generators::path(3).unwrap();
        let a = Ansatz::new(&g, 1, Layout::MultiAngle, Mixer::X).unwrap();
        let p = ParamSet::zeros(&g, 1, Layout::MultiAngle, Mixer::X).unwrap();
        assert!(grad_finite_diff(&a, &p, 0.0).is_err());
    }

    fn setup() -> (ParamSet, AdaGrad) {
        let g = generators::path(3).unwrap();
        let p = init_params(&g, 2, Layout::MultiAngle, Mixer::X, 0).unwrap();
        let opt = AdaGrad::new(p.shape(), DEFAULT_LR).unwrap();
        (p, opt)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut p, mut opt) = setup();
        let before = p.clone();
        let zero = Gradient::zeros(p.len());
        opt.step(&mut p, &zero).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let (mut p, mut opt) = setup();
        let before = p.values().to_vec();
        let grad = Gradient {
            values: (0..p.len()).map(|i| (i as f64 - 3.5) * 0.3).collect(),
        };
        opt.step(&mut p, &grad).unwrap();
        for i in 0..p.len() {
            let g = grad.values[i];
            let want = before[i] - DEFAULT_LR * g / (g.abs() + DEFAULT_EPS_DIV);
            assert_eq!(p.values()[i], want);
            assert!((p.values()[i] - (before[i] - DEFAULT_LR * g.signum())).abs() < 1e-6);
        }
    }

    #[test]
    fn unmasked_entries_untouched() {
        let (mut p, mut opt) = setup();
        let grad = Gradient {
            values: vec![0.5; p.len()],
        };
        opt.step(&mut p, &grad).unwrap();
        let snapshot = (p.clone(), opt.accum().to_vec());
        p.set_mask_layers(&[1]).unwrap();
        opt.step(&mut p, &grad).unwrap();
        let range = p.shape().layer_range(0);
        assert_eq!(&p.values()[range.clone()], &snapshot.0.values()[range.clone()]);
        assert_eq!(&opt.accum()[range.clone()], &snapshot.1[range]);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let (mut p, mut opt) = setup();
        let before = (p.clone(), opt.clone());
        let mut grad = Gradient::zeros(p.len());
        grad.values[0] = 1.0;
        grad.values[3] = f64::NAN;
        assert!(matches!(opt.step(&mut p, &grad), Err(Error::Numerical(_))));
        assert_eq!((p, opt), before);
    }

    #[test]
    fn step_sizes_shrink_for_constant_gradient() {
        let (mut p, mut opt) = setup();
        let grad = Gradient {
            values: vec![0.7; p.len()],
        };
        let mut last = f64::INFINITY;
        for _ in 0..20 {
            let before = p.values()[0];
            opt.step(&mut p, &grad).unwrap();
            let size = (p.values()[0] - before).abs();
            assert!(size <= last);
            last = size;
        }
    }

    #[test]
    fn reset_semantics() {
        let (mut p, mut opt) = setup();
        let grad = Gradient {
            values: vec![0.4; p.len()],
        };
        let fresh = opt.clone();
        opt.step(&mut p, &grad).unwrap();
        opt.reset_accum(ResetScope::Layer(0)).unwrap();
        let range0 = p.shape().layer_range(0);
        let range1 = p.shape().layer_range(1);
        assert!(opt.accum()[range0].iter().all(|&a| a == 0.0));
        assert!(opt.accum()[range1].iter().all(|&a| a > 0.0));
        opt.reset_accum(ResetScope::All).unwrap();
        let once = opt.clone();
        opt.reset_accum(ResetScope::All).unwrap();
        assert_eq!(opt, once);
        assert_eq!(opt, fresh);

        let (mut q, _) = setup();
        let mut q2 = q.clone();
        let mut reset = opt.clone();
        let mut new = AdaGrad::new(q.shape(), DEFAULT_LR).unwrap();
        reset.step(&mut q, &grad).unwrap();
        new.step(&mut q2, &grad).unwrap();
        assert_eq!(q, q2);
        assert!(opt.reset_accum(ResetScope::Layer(2)).is_err());
    }
}

//! Reverse-mode differentiation over a per-forward-pass tape.
//!
//! Every op appends one node holding its output value and the inputs it
//! consumed, so node indices are already a topological order. `backward`
//! walks the nodes once in reverse and accumulates adjoints.

use super::gaussian::logprob_unchecked;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    Tanh {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: f64,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
    GatherBlocks {
        x: Var,
        width: usize,
        index: Vec<usize>,
    },
    GatherRows {
        x: Var,
        index: Vec<usize>,
    },
    GaussianLogProb {
        mean: Var,
        logstd: Var,
        action: Tensor,
    },
    GaussianEntropy {
        logstd: Var,
    },
    ClippedSurrogate {
        logp: Var,
        logp_old: Vec<f64>,
        advantages: Vec<f64>,
        clip: f64,
    },
    MeanSquaredError {
        pred: Var,
        target: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// d(loss)/d(var); exact zeros when `var` has no path to the loss.
    pub fn get(&self, var: Var) -> Tensor {
        match self.adjoints.get(var.0).and_then(|a| a.as_ref()) {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn collect(&self, vars: &[Var]) -> Vec<Tensor> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Differentiable leaf, typically a parameter tensor.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn params(&mut self, values: &[Tensor]) -> Vec<Var> {
        values.iter().map(|t| self.param(t.clone())).collect()
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let out = self.value(x).affine(self.value(w), self.value(b))?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Affine { x, w, b }, rg))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).tanh();
        let rg = self.rg(x);
        self.push(out, Op::Tanh { x }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::dims("add", va.shape(), vb.shape()));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).map(|v| v * factor);
        let rg = self.rg(x);
        self.push(out, Op::Scale { x, factor }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean { x }, rg)
    }

    /// Row `b` of the output is the `index[b]`-th block of `width` columns of
    /// row `b` of `x` (shape `[batch, blocks*width]`).
    pub fn gather_blocks(&mut self, x: Var, width: usize, index: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if t.shape().len() != 2 || width == 0 || !t.cols().is_multiple_of(width) || t.rows() != index.len() {
            return Err(Error::Dimension(format!(
                "gather_blocks: input {:?}, block width {width}, {} indices",
                t.shape(),
                index.len()
            )));
        }
        let blocks = t.cols() / width;
        let mut out = Vec::with_capacity(index.len() * width);
        for (b, &j) in index.iter().enumerate() {
            if j >= blocks {
                return Err(Error::Argument(format!("block index {j} >= {blocks}")));
            }
            out.extend_from_slice(&t.row(b)[j * width..(j + 1) * width]);
        }
        let out = Tensor::new(vec![index.len(), width], out)?;
        let rg = self.rg(x);
        Ok(self.push(
            out,
            Op::GatherBlocks {
                x,
                width,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Stacks rows `index[0], index[1], ...` of the matrix `x`.
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if t.shape().len() != 2 || index.is_empty() {
            return Err(Error::Dimension(format!(
                "gather_rows: input {:?} with {} indices",
                t.shape(),
                index.len()
            )));
        }
        let mut out = Vec::with_capacity(index.len() * t.cols());
        for &j in index {
            if j >= t.rows() {
                return Err(Error::Argument(format!("row index {j} >= {}", t.rows())));
            }
            out.extend_from_slice(t.row(j));
        }
        let out = Tensor::new(vec![index.len(), t.cols()], out)?;
        let rg = self.rg(x);
        Ok(self.push(
            out,
            Op::GatherRows {
                x,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Per-row diagonal Gaussian log density, `[batch, d]` inputs to `[batch]`.
    pub fn gaussian_logprob(&mut self, mean: Var, logstd: Var, action: Tensor) -> Result<Var> {
        let (m, s) = (self.value(mean), self.value(logstd));
        if m.shape() != s.shape() || m.shape() != action.shape() || m.shape().len() != 2 {
            return Err(Error::Dimension(format!(
                "gaussian_logprob: mean {:?}, logstd {:?}, action {:?}",
                m.shape(),
                s.shape(),
                action.shape()
            )));
        }
        let out: Vec<f64> = (0..m.rows())
            .map(|b| logprob_unchecked(m.row(b), s.row(b), action.row(b)))
            .collect();
        let out = Tensor::new(vec![m.rows()], out)?;
        let rg = self.rg(mean) || self.rg(logstd);
        Ok(self.push(out, Op::GaussianLogProb { mean, logstd, action }, rg))
    }

    /// Per-row diagonal Gaussian entropy, `[batch, d]` to `[batch]`.
    pub fn gaussian_entropy(&mut self, logstd: Var) -> Result<Var> {
        let s = self.value(logstd);
        if s.shape().len() != 2 {
            return Err(Error::Dimension(format!("gaussian_entropy: {:?}", s.shape())));
        }
        let out: Vec<f64> = (0..s.rows())
            .map(|b| super::gaussian::gaussian_entropy(s.row(b)))
            .collect();
        let out = Tensor::new(vec![s.rows()], out)?;
        let rg = self.rg(logstd);
        Ok(self.push(out, Op::GaussianEntropy { logstd }, rg))
    }

    /// PPO clipped surrogate loss `-mean(min(ρA, clip(ρ, 1-ε, 1+ε)A))` with
    /// `ρ = exp(logp - logp_old)`.
    ///
    /// When both branches tie the clipped one is taken, and the clip passes
    /// gradient only strictly inside `(1-ε, 1+ε)`; with `ε = 0` the loss has
    /// zero gradient everywhere.
    pub fn clipped_surrogate(&mut self, logp: Var, logp_old: &[f64], advantages: &[f64], clip: f64) -> Result<Var> {
        let lp = self.value(logp);
        if lp.len() != logp_old.len() || lp.len() != advantages.len() {
            return Err(Error::Dimension(format!(
                "clipped_surrogate: {} log-probs, {} old log-probs, {} advantages",
                lp.len(),
                logp_old.len(),
                advantages.len()
            )));
        }
        let n = lp.len() as f64;
        let mut total = 0.0;
        for ((&new, &old), &adv) in lp.data().iter().zip(logp_old).zip(advantages) {
            let ratio = (new - old).exp();
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
            total += unclipped.min(clipped);
        }
        let rg = self.rg(logp);
        Ok(self.push(
            Tensor::scalar(-total / n),
            Op::ClippedSurrogate {
                logp,
                logp_old: logp_old.to_vec(),
                advantages: advantages.to_vec(),
                clip,
            },
            rg,
        ))
    }

    /// `mean((pred - target)^2)` over all elements of `pred`.
    pub fn mean_squared_error(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() {
            return Err(Error::Dimension(format!(
                "mean_squared_error: prediction {:?} vs {} targets",
                p.shape(),
                target.len()
            )));
        }
        let mse = p.data().iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        let rg = self.rg(pred);
        Ok(self.push(
            Tensor::scalar(mse),
            Op::MeanSquaredError {
                pred,
                target: target.to_vec(),
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let Some(node) = self.nodes.get(loss.0) else {
            return Err(Error::Usage(format!(
                "loss {:?} is not on this tape ({} nodes)",
                loss,
                self.nodes.len()
            )));
        };
        if node.value.len() != 1 {
            return Err(Error::Usage(format!(
                "loss must be scalar, got shape {:?}",
                node.value.shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Tensor::full(node.value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(&node.op, &node.value, &g, &mut adj);
            }
            adj[idx] = Some(g);
        }

        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn accumulate(&self, adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut adj[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, adj: &mut [Option<Tensor>]) {
        match op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (batch, fan_in, fan_out) = (xv.rows(), wv.rows(), wv.cols());
                let gd = g.data();
                if self.rg(*x) {
                    let mut dx = vec![0.0; batch * fan_in];
                    for bi in 0..batch {
                        let grow = &gd[bi * fan_out..(bi + 1) * fan_out];
                        for i in 0..fan_in {
                            let wrow = &wv.data()[i * fan_out..(i + 1) * fan_out];
                            dx[bi * fan_in + i] = grow.iter().zip(wrow).map(|(a, b)| a * b).sum();
                        }
                    }
                    self.accumulate(adj, *x, Tensor::new(vec![batch, fan_in], dx).unwrap());
                }
                if self.rg(*w) {
                    let mut dw = vec![0.0; fan_in * fan_out];
                    for bi in 0..batch {
                        let grow = &gd[bi * fan_out..(bi + 1) * fan_out];
                        for (i, &xi) in xv.row(bi).iter().enumerate() {
                            let dst = &mut dw[i * fan_out..(i + 1) * fan_out];
                            for (d, &gj) in dst.iter_mut().zip(grow) {
                                *d += xi * gj;
                            }
                        }
                    }
                    self.accumulate(adj, *w, Tensor::new(vec![fan_in, fan_out], dw).unwrap());
                }
                if self.rg(*b) {
                    let mut db = vec![0.0; fan_out];
                    for bi in 0..batch {
                        for (d, &gj) in db.iter_mut().zip(&gd[bi * fan_out..(bi + 1) * fan_out]) {
                            *d += gj;
                        }
                    }
                    self.accumulate(adj, *b, Tensor::new(vec![fan_out], db).unwrap());
                }
            }
            Op::Tanh { x } => {
                let mut dx = g.clone();
                for (d, &y) in dx.data_mut().iter_mut().zip(out.data()) {
                    *d *= 1.0 - y * y;
                }
                self.accumulate(adj, *x, dx);
            }
            Op::Add { a, b } => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *b, g.clone());
            }
            Op::Scale { x, factor } => {
                self.accumulate(adj, *x, g.map(|v| v * factor));
            }
            Op::Sum { x } => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(adj, *x, Tensor::full(&shape, g.item()));
            }
            Op::Mean { x } => {
                let xv = self.value(*x);
                let shape = xv.shape().to_vec();
                let n = xv.len() as f64;
                self.accumulate(adj, *x, Tensor::full(&shape, g.item() / n));
            }
            Op::GatherBlocks { x, width, index } => {
                let xv = self.value(*x);
                let cols = xv.cols();
                let mut dx = Tensor::zeros(xv.shape());
                for (bi, &j) in index.iter().enumerate() {
                    let dst = &mut dx.data_mut()[bi * cols + j * width..bi * cols + (j + 1) * width];
                    dst.copy_from_slice(g.row(bi));
                }
                self.accumulate(adj, *x, dx);
            }
            Op::GatherRows { x, index } => {
                let xv = self.value(*x);
                let cols = xv.cols();
                let mut dx = Tensor::zeros(xv.shape());
                for (bi, &j) in index.iter().enumerate() {
                    let dst = &mut dx.data_mut()[j * cols..(j + 1) * cols];
                    for (d, &gv) in dst.iter_mut().zip(g.row(bi)) {
                        *d += gv;
                    }
                }
                self.accumulate(adj, *x, dx);
            }
            Op::GaussianLogProb { mean, logstd, action } => {
                let (m, s) = (self.value(*mean), self.value(*logstd));
                let mut dmean = Tensor::zeros(m.shape());
                let mut dlogstd = Tensor::zeros(s.shape());
                let d = m.cols();
                for bi in 0..m.rows() {
                    let gb = g.data()[bi];
                    for i in 0..d {
                        let k = bi * d + i;
                        let sigma = s.data()[k].exp();
                        let z = (action.data()[k] - m.data()[k]) / sigma;
                        dmean.data_mut()[k] = gb * z / sigma;
                        dlogstd.data_mut()[k] = gb * (z * z - 1.0);
                    }
                }
                self.accumulate(adj, *mean, dmean);
                self.accumulate(adj, *logstd, dlogstd);
            }
            Op::GaussianEntropy { logstd } => {
                let s = self.value(*logstd);
                let mut ds = Tensor::zeros(s.shape());
                let d = s.cols();
                for bi in 0..s.rows() {
                    ds.data_mut()[bi * d..(bi + 1) * d].fill(g.data()[bi]);
                }
                self.accumulate(adj, *logstd, ds);
            }
            Op::ClippedSurrogate {
                logp,
                logp_old,
                advantages,
                clip,
            } => {
                let lp = self.value(*logp);
                let n = lp.len() as f64;
                let scale = -g.item() / n;
                let dl: Vec<f64> = lp
                    .data()
                    .iter()
                    .zip(logp_old)
                    .zip(advantages)
                    .map(|((&new, &old), &adv)| {
                        let ratio = (new - old).exp();
                        let unclipped = ratio * adv;
                        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
                        let inside = ratio > 1.0 - clip && ratio < 1.0 + clip;
                        if unclipped < clipped || inside {
                            scale * adv * ratio
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.accumulate(adj, *logp, Tensor::new(lp.shape().to_vec(), dl).unwrap());
            }
            Op::MeanSquaredError { pred, target } => {
                let p = self.value(*pred);
                let n = p.len() as f64;
                let scale = g.item() * 2.0 / n;
                let dp: Vec<f64> = p.data().iter().zip(target).map(|(a, b)| scale * (a - b)).collect();
                self.accumulate(adj, *pred, Tensor::new(p.shape().to_vec(), dp).unwrap());
            }
        }
    }
}

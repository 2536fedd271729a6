//! Reverse-mode differentiation on a tape of dense matrices.
//!
//! A `Tape` records every operation; `Tensor` is a cheap handle into it.
//! Calling [`Tensor::backward`] on a scalar walks the tape in reverse and
//! accumulates gradients into every requires-grad node reachable from it.
//! Gradients keep accumulating until [`Tape::zero_grads`] is called.
//!
//! A tape and its tensors belong to one thread; training builds a fresh tape
//! per step and reads parameter gradients out of it.

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;
use thiserror::Error;

use crate::graph::SparseOperator;
use crate::mat::Mat;

/// Variance floor for the Gaussian alignment divergence.
pub const VAR_FLOOR: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidDropout(f64),
    #[error("label {value} out of range for {num_classes} classes")]
    LabelOutOfRange { value: usize, num_classes: usize },
    #[error("{op}: batch of {got} rows, need at least {need}")]
    BatchTooSmall {
        op: &'static str,
        got: usize,
        need: usize,
    },
    #[error("backward requires a scalar, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("operands belong to different tapes")]
    DifferentTapes,
}

enum Op {
    Leaf,
    Matmul(usize, usize),
    /// Constant sparse operator times a tensor. The operator must be
    /// symmetric: backward reuses the forward kernel.
    SparseMul(Rc<SparseOperator>, usize),
    Add(usize, usize),
    /// N×C plus a 1×C bias broadcast over rows.
    AddBiasRow(usize, usize),
    /// Tensor scaled by a learnable 1×1 tensor.
    ScaleBy(usize, usize),
    ScaleConst(usize, f64),
    Relu(usize),
    /// Mask holds 0 or 1/(1−p) per entry.
    Dropout(usize, Mat),
    SoftmaxRows(usize),
    /// Cached softmax probabilities for the backward pass.
    CrossEntropy(usize, Vec<usize>, Mat),
    MeanEntropy(usize, Mat),
    GaussianKl {
        zs: usize,
        zt: usize,
        stats: GaussStats,
    },
    Sum(usize),
}

struct GaussStats {
    mu_s: Vec<f64>,
    mu_t: Vec<f64>,
    var_s_raw: Vec<f64>,
    var_t_raw: Vec<f64>,
}

struct Node {
    value: Mat,
    grad: Option<Mat>,
    requires_grad: bool,
    op: Op,
}

/// Recording tape. Create with [`Tape::new`], add leaves, compose tensors.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Rc<Tape> {
        Rc::new(Tape {
            nodes: RefCell::new(Vec::new()),
        })
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clear every gradient slot on the tape.
    pub fn zero_grads(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            node.grad = None;
        }
    }
}

/// Handle to a tape node.
#[derive(Clone)]
pub struct Tensor {
    idx: usize,
    tape: Rc<Tape>,
}

fn push(tape: &Rc<Tape>, value: Mat, requires_grad: bool, op: Op) -> Tensor {
    let mut nodes = tape.nodes.borrow_mut();
    let idx = nodes.len();
    nodes.push(Node {
        value,
        grad: None,
        requires_grad,
        op,
    });
    Tensor {
        idx,
        tape: Rc::clone(tape),
    }
}

/// Create a leaf tensor on `tape`.
pub fn leaf(tape: &Rc<Tape>, value: Mat, requires_grad: bool) -> Tensor {
    push(tape, value, requires_grad, Op::Leaf)
}

impl Tensor {
    pub fn shape(&self) -> (usize, usize) {
        let nodes = self.tape.nodes.borrow();
        nodes[self.idx].value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.idx].requires_grad
    }

    /// Clone of the forward value.
    pub fn value(&self) -> Mat {
        self.tape.nodes.borrow()[self.idx].value.clone()
    }

    /// Forward value of a 1×1 tensor.
    pub fn scalar_value(&self) -> f64 {
        let nodes = self.tape.nodes.borrow();
        let v = &nodes[self.idx].value;
        assert!(v.is_scalar(), "scalar_value on {:?}", v.shape());
        v.get(0, 0)
    }

    /// Clone of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Mat> {
        self.tape.nodes.borrow()[self.idx].grad.clone()
    }

    fn same_tape(&self, other: &Tensor) -> Result<(), NnError> {
        if Rc::ptr_eq(&self.tape, &other.tape) {
            Ok(())
        } else {
            Err(NnError::DifferentTapes)
        }
    }

    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor, NnError> {
        self.same_tape(rhs)?;
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.idx];
            let b = &nodes[rhs.idx];
            if a.value.cols() != b.value.rows() {
                return Err(NnError::ShapeMismatch {
                    op: "matmul",
                    lhs: a.value.shape(),
                    rhs: b.value.shape(),
                });
            }
            (a.value.matmul(&b.value), a.requires_grad || b.requires_grad)
        };
        Ok(push(&self.tape, value, rg, Op::Matmul(self.idx, rhs.idx)))
    }

    /// `op · self` for a symmetric sparse operator.
    pub fn sparse_mul(&self, op: &Rc<SparseOperator>) -> Result<Tensor, NnError> {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            debug_assert!(op.is_symmetric(1e-12), "sparse_mul needs a symmetric operator");
            match op.mul_dense(&x.value) {
                Ok(v) => (v, x.requires_grad),
                Err(_) => {
                    return Err(NnError::ShapeMismatch {
                        op: "sparse_mul",
                        lhs: (op.rows(), op.cols()),
                        rhs: x.value.shape(),
                    })
                }
            }
        };
        Ok(push(
            &self.tape,
            value,
            rg,
            Op::SparseMul(Rc::clone(op), self.idx),
        ))
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor, NnError> {
        self.same_tape(rhs)?;
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.idx];
            let b = &nodes[rhs.idx];
            if a.value.shape() != b.value.shape() {
                return Err(NnError::ShapeMismatch {
                    op: "add",
                    lhs: a.value.shape(),
                    rhs: b.value.shape(),
                });
            }
            (a.value.add(&b.value), a.requires_grad || b.requires_grad)
        };
        Ok(push(&self.tape, value, rg, Op::Add(self.idx, rhs.idx)))
    }

    /// Add a 1×C bias row to every row of an N×C tensor.
    pub fn add_bias_row(&self, bias: &Tensor) -> Result<Tensor, NnError> {
        self.same_tape(bias)?;
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            let b = &nodes[bias.idx];
            if b.value.rows() != 1 || b.value.cols() != x.value.cols() {
                return Err(NnError::ShapeMismatch {
                    op: "add_bias_row",
                    lhs: x.value.shape(),
                    rhs: b.value.shape(),
                });
            }
            let mut out = x.value.clone();
            let brow = b.value.row(0).to_vec();
            for r in 0..out.rows() {
                for (o, &bv) in out.row_mut(r).iter_mut().zip(&brow) {
                    *o += bv;
                }
            }
            (out, x.requires_grad || b.requires_grad)
        };
        Ok(push(
            &self.tape,
            value,
            rg,
            Op::AddBiasRow(self.idx, bias.idx),
        ))
    }

    /// Multiply by a learnable 1×1 scalar tensor.
    pub fn scale_by(&self, scalar: &Tensor) -> Result<Tensor, NnError> {
        self.same_tape(scalar)?;
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            let s = &nodes[scalar.idx];
            if !s.value.is_scalar() {
                return Err(NnError::ShapeMismatch {
                    op: "scale_by",
                    lhs: x.value.shape(),
                    rhs: s.value.shape(),
                });
            }
            (
                x.value.scale(s.value.get(0, 0)),
                x.requires_grad || s.requires_grad,
            )
        };
        Ok(push(
            &self.tape,
            value,
            rg,
            Op::ScaleBy(self.idx, scalar.idx),
        ))
    }

    /// Multiply by a plain constant.
    pub fn scale_const(&self, c: f64) -> Tensor {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            (x.value.scale(c), x.requires_grad)
        };
        push(&self.tape, value, rg, Op::ScaleConst(self.idx, c))
    }

    pub fn relu(&self) -> Tensor {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            (x.value.map(|v| v.max(0.0)), x.requires_grad)
        };
        push(&self.tape, value, rg, Op::Relu(self.idx))
    }

    /// Inverted dropout: keeps entries with probability 1−p and rescales by
    /// 1/(1−p). Identity in eval mode (returns the same node).
    pub fn dropout(
        &self,
        p: f64,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<Tensor, NnError> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::InvalidDropout(p));
        }
        if !training || p == 0.0 {
            return Ok(self.clone());
        }
        let keep = 1.0 / (1.0 - p);
        let (value, mask, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            let (r, c) = x.value.shape();
            let mut mask = Mat::zeros(r, c);
            for m in mask.as_mut_slice() {
                if rng.random::<f64>() >= p {
                    *m = keep;
                }
            }
            (x.value.hadamard(&mask), mask, x.requires_grad)
        };
        Ok(push(&self.tape, value, rg, Op::Dropout(self.idx, mask)))
    }

    pub fn softmax_rows(&self) -> Tensor {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            (softmax(&x.value), x.requires_grad)
        };
        push(&self.tape, value, rg, Op::SoftmaxRows(self.idx))
    }

    /// Mean negative log-likelihood of `labels` under row-softmax of the
    /// logits; numerically stabilized by max subtraction.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Tensor, NnError> {
        let (value, probs, rg) = {
            let nodes = self.tape.nodes.borrow();
            let z = &nodes[self.idx];
            let (n, c) = z.value.shape();
            if labels.len() != n {
                return Err(NnError::ShapeMismatch {
                    op: "cross_entropy",
                    lhs: (n, c),
                    rhs: (labels.len(), 1),
                });
            }
            if n == 0 {
                return Err(NnError::BatchTooSmall {
                    op: "cross_entropy",
                    got: 0,
                    need: 1,
                });
            }
            for &y in labels {
                if y >= c {
                    return Err(NnError::LabelOutOfRange {
                        value: y,
                        num_classes: c,
                    });
                }
            }
            let probs = softmax(&z.value);
            let mut total = 0.0;
            for (i, &y) in labels.iter().enumerate() {
                let row = z.value.row(i);
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
                total += lse - row[y];
            }
            (Mat::scalar(total / n as f64), probs, z.requires_grad)
        };
        Ok(push(
            &self.tape,
            value,
            rg,
            Op::CrossEntropy(self.idx, labels.to_vec(), probs),
        ))
    }

    /// Mean Shannon entropy (natural log) of the row-softmax distribution.
    pub fn mean_entropy(&self) -> Result<Tensor, NnError> {
        let (value, probs, rg) = {
            let nodes = self.tape.nodes.borrow();
            let z = &nodes[self.idx];
            let (n, _) = z.value.shape();
            if n == 0 {
                return Err(NnError::BatchTooSmall {
                    op: "mean_entropy",
                    got: 0,
                    need: 1,
                });
            }
            let probs = softmax(&z.value);
            let mut total = 0.0;
            for i in 0..n {
                total += row_entropy(probs.row(i));
            }
            (Mat::scalar(total / n as f64), probs, z.requires_grad)
        };
        Ok(push(
            &self.tape,
            value,
            rg,
            Op::MeanEntropy(self.idx, probs),
        ))
    }

    /// KL divergence between diagonal Gaussians fitted to the rows of the
    /// two batches (direction: self ∥ other), variances floored at
    /// [`VAR_FLOOR`]. Differentiable with respect to both inputs.
    pub fn gaussian_kl(&self, other: &Tensor) -> Result<Tensor, NnError> {
        self.same_tape(other)?;
        let (value, stats, rg) = {
            let nodes = self.tape.nodes.borrow();
            let zs = &nodes[self.idx];
            let zt = &nodes[other.idx];
            if zs.value.cols() != zt.value.cols() {
                return Err(NnError::ShapeMismatch {
                    op: "gaussian_kl",
                    lhs: zs.value.shape(),
                    rhs: zt.value.shape(),
                });
            }
            for (side, rows) in [("gaussian_kl", zs.value.rows()), ("gaussian_kl", zt.value.rows())]
            {
                if rows < 2 {
                    return Err(NnError::BatchTooSmall {
                        op: side,
                        got: rows,
                        need: 2,
                    });
                }
            }
            let stats = GaussStats::fit(&zs.value, &zt.value);
            (
                Mat::scalar(stats.kl()),
                stats,
                zs.requires_grad || zt.requires_grad,
            )
        };
        Ok(push(
            &self.tape,
            value,
            rg,
            Op::GaussianKl {
                zs: self.idx,
                zt: other.idx,
                stats,
            },
        ))
    }

    /// Sum of all entries, as a 1×1 tensor.
    pub fn sum(&self) -> Tensor {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.idx];
            (Mat::scalar(x.value.sum()), x.requires_grad)
        };
        push(&self.tape, value, rg, Op::Sum(self.idx))
    }

    /// Reverse pass from a scalar. Gradients accumulate into every
    /// requires-grad node reachable from this tensor.
    pub fn backward(&self) -> Result<(), NnError> {
        let mut nodes = self.tape.nodes.borrow_mut();
        {
            let v = &nodes[self.idx].value;
            if !v.is_scalar() {
                return Err(NnError::NotScalar(v.shape()));
            }
        }
        let mut grads: Vec<Option<Mat>> = (0..=self.idx).map(|_| None).collect();
        grads[self.idx] = Some(Mat::scalar(1.0));

        for i in (0..=self.idx).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !nodes[i].requires_grad {
                continue;
            }
            // Persist the accumulated gradient on the node.
            match &mut nodes[i].grad {
                Some(slot) => slot.add_assign_scaled(&g, 1.0),
                slot @ None => *slot = Some(g.clone()),
            }

            let send = |grads: &mut Vec<Option<Mat>>, parent: usize, contrib: Mat| {
                if !nodes[parent].requires_grad {
                    return;
                }
                match &mut grads[parent] {
                    Some(acc) => acc.add_assign_scaled(&contrib, 1.0),
                    slot @ None => *slot = Some(contrib),
                }
            };

            match &nodes[i].op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = g.matmul(&nodes[b].value.transpose());
                    let db = nodes[a].value.transpose().matmul(&g);
                    send(&mut grads, a, da);
                    send(&mut grads, b, db);
                }
                Op::SparseMul(op, x) => {
                    let x = *x;
                    // Sᵀ = S by construction.
                    let dx = op.mul_dense(&g).expect("shape fixed at forward");
                    send(&mut grads, x, dx);
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    send(&mut grads, a, g.clone());
                    send(&mut grads, b, g);
                }
                Op::AddBiasRow(x, bias) => {
                    let (x, bias) = (*x, *bias);
                    let mut db = Mat::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in db.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    send(&mut grads, x, g);
                    send(&mut grads, bias, db);
                }
                Op::ScaleBy(x, s) => {
                    let (x, s) = (*x, *s);
                    let sv = nodes[s].value.get(0, 0);
                    let ds = Mat::scalar(g.dot(&nodes[x].value));
                    send(&mut grads, x, g.scale(sv));
                    send(&mut grads, s, ds);
                }
                Op::ScaleConst(x, c) => {
                    let (x, c) = (*x, *c);
                    send(&mut grads, x, g.scale(c));
                }
                Op::Relu(x) => {
                    let x = *x;
                    let mask = nodes[i].value.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    send(&mut grads, x, g.hadamard(&mask));
                }
                Op::Dropout(x, mask) => {
                    let x = *x;
                    send(&mut grads, x, g.hadamard(mask));
                }
                Op::SoftmaxRows(x) => {
                    let x = *x;
                    let p = &nodes[i].value;
                    let mut dx = Mat::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let pr = p.row(r);
                        let gr = g.row(r);
                        let dot: f64 = pr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for ((o, &pv), &gv) in dx.row_mut(r).iter_mut().zip(pr).zip(gr) {
                            *o = pv * (gv - dot);
                        }
                    }
                    send(&mut grads, x, dx);
                }
                Op::CrossEntropy(x, labels, probs) => {
                    let x = *x;
                    let gs = g.get(0, 0) / labels.len() as f64;
                    let mut dx = probs.scale(gs);
                    for (r, &y) in labels.iter().enumerate() {
                        let v = dx.get(r, y);
                        dx.set(r, y, v - gs);
                    }
                    send(&mut grads, x, dx);
                }
                Op::MeanEntropy(x, probs) => {
                    let x = *x;
                    let gs = g.get(0, 0) / probs.rows() as f64;
                    let mut dx = Mat::zeros(probs.rows(), probs.cols());
                    for r in 0..probs.rows() {
                        let pr = probs.row(r);
                        let h = row_entropy(pr);
                        for (o, &p) in dx.row_mut(r).iter_mut().zip(pr) {
                            if p > 0.0 {
                                *o = -gs * p * (p.ln() + h);
                            }
                        }
                    }
                    send(&mut grads, x, dx);
                }
                Op::GaussianKl { zs, zt, stats } => {
                    let (zs, zt) = (*zs, *zt);
                    let gs = g.get(0, 0);
                    let (dzs, dzt) =
                        stats.input_grads(&nodes[zs].value, &nodes[zt].value, gs);
                    send(&mut grads, zs, dzs);
                    send(&mut grads, zt, dzt);
                }
                Op::Sum(x) => {
                    let x = *x;
                    let (r, c) = nodes[x].value.shape();
                    send(&mut grads, x, Mat::filled(r, c, g.get(0, 0)));
                }
            }
        }
        Ok(())
    }
}

fn softmax(z: &Mat) -> Mat {
    let mut out = z.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn row_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum::<f64>()
}

impl GaussStats {
    fn fit(zs: &Mat, zt: &Mat) -> GaussStats {
        let mu_s = zs.col_mean();
        let mu_t = zt.col_mean();
        let var_s = zs.col_var(&mu_s);
        let var_t = zt.col_var(&mu_t);
        GaussStats {
            mu_s: mu_s.into_vec(),
            mu_t: mu_t.into_vec(),
            var_s_raw: var_s.into_vec(),
            var_t_raw: var_t.into_vec(),
        }
    }

    fn kl(&self) -> f64 {
        let mut total = 0.0;
        for d in 0..self.mu_s.len() {
            let vs = self.var_s_raw[d].max(VAR_FLOOR);
            let vt = self.var_t_raw[d].max(VAR_FLOOR);
            let dmu = self.mu_s[d] - self.mu_t[d];
            total += 0.5 * (vt / vs).ln() + (vs + dmu * dmu) / (2.0 * vt) - 0.5;
        }
        total
    }

    /// Gradients of the scalar KL with respect to both input batches,
    /// scaled by the upstream gradient.
    fn input_grads(&self, zs: &Mat, zt: &Mat, upstream: f64) -> (Mat, Mat) {
        let ns = zs.rows() as f64;
        let nt = zt.rows() as f64;
        let dims = self.mu_s.len();
        let mut g_mu_s = vec![0.0; dims];
        let mut g_mu_t = vec![0.0; dims];
        let mut g_var_s = vec![0.0; dims];
        let mut g_var_t = vec![0.0; dims];
        for d in 0..dims {
            let vs = self.var_s_raw[d].max(VAR_FLOOR);
            let vt = self.var_t_raw[d].max(VAR_FLOOR);
            let dmu = self.mu_s[d] - self.mu_t[d];
            g_mu_s[d] = dmu / vt;
            g_mu_t[d] = -dmu / vt;
            // Zero on the clamped side of the floor.
            g_var_s[d] = if self.var_s_raw[d] > VAR_FLOOR {
                -0.5 / vs + 0.5 / vt
            } else {
                0.0
            };
            g_var_t[d] = if self.var_t_raw[d] > VAR_FLOOR {
                0.5 / vt - (vs + dmu * dmu) / (2.0 * vt * vt)
            } else {
                0.0
            };
        }
        let mut dzs = Mat::zeros(zs.rows(), dims);
        for r in 0..zs.rows() {
            let zr = zs.row(r);
            let out = dzs.row_mut(r);
            for d in 0..dims {
                out[d] = upstream
                    * (g_mu_s[d] / ns + g_var_s[d] * 2.0 * (zr[d] - self.mu_s[d]) / ns);
            }
        }
        let mut dzt = Mat::zeros(zt.rows(), dims);
        for r in 0..zt.rows() {
            let zr = zt.row(r);
            let out = dzt.row_mut(r);
            for d in 0..dims {
                out[d] = upstream
                    * (g_mu_t[d] / nt + g_var_t[d] * 2.0 * (zr[d] - self.mu_t[d]) / nt);
            }
        }
        (dzs, dzt)
    }
}

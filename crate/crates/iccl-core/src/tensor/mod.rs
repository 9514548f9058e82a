//! Minimal reverse-mode differentiable tensor engine.
//!
//! Tensors are dense f64 arrays (rank 1 or 2) with an optional autodiff
//! record. Every forward op captures a backward closure; [`Tensor::backward`]
//! walks the recorded graph in reverse topological order and accumulates
//! gradients into all participating tensors that require them.
//!
//! Gradients accumulate across repeated `backward` calls until
//! [`Tensor::zero_grad`] is called; this is the documented semantics for
//! reuse of a graph.
//!
//! The graph is single-threaded by construction (`Tensor` is not `Send`);
//! the kernels underneath may parallelize per [`kernels`]' contract.

pub mod checkpoint;
pub mod kernels;
pub mod optim;

use std::cell::RefCell;
use std::collections::HashSet;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Norm floor used by [`Tensor::l2_normalize`]. Inputs with a smaller norm
/// divide by this constant instead, so zero vectors map to (near-)zero
/// output rather than NaN.
pub const NORM_EPS: f64 = 1e-12;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

type BackwardFn = Rc<dyn Fn(&[f64])>;

struct Inner {
    id: u64,
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    tracked: bool,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
}

/// Shared handle to a node in the computation graph.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<RefCell<Inner>>,
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    let numel: usize = shape.iter().product();
    if shape.is_empty() || numel == 0 || numel != len {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            len,
        });
    }
    Ok(())
}

impl Tensor {
    fn make(shape: Vec<usize>, values: Vec<f64>, requires_grad: bool) -> Tensor {
        Tensor {
            inner: Rc::new(RefCell::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                values,
                grad: None,
                requires_grad,
                tracked: requires_grad,
                parents: Vec::new(),
                backward: None,
            })),
        }
    }

    /// Constant tensor (not differentiated through).
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, values.len())?;
        Ok(Tensor::make(shape.to_vec(), values, false))
    }

    /// Trainable leaf tensor.
    pub fn parameter(shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, values.len())?;
        Ok(Tensor::make(shape.to_vec(), values, true))
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::make(vec![1], vec![v], false)
    }

    pub fn zeros(shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel])
    }

    fn op(
        shape: Vec<usize>,
        values: Vec<f64>,
        parents: Vec<Tensor>,
        backward: impl Fn(&[f64]) + 'static,
    ) -> Tensor {
        let tracked = parents.iter().any(Tensor::tracked);
        let t = Tensor {
            inner: Rc::new(RefCell::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                values,
                grad: None,
                requires_grad: false,
                tracked,
                parents: if tracked { parents } else { Vec::new() },
                backward: None,
            })),
        };
        if tracked {
            t.inner.borrow_mut().backward = Some(Rc::new(backward));
        }
        t
    }

    pub fn id(&self) -> u64 {
        self.inner.borrow().id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    fn tracked(&self) -> bool {
        self.inner.borrow().tracked
    }

    /// Copy of the stored values.
    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.borrow().values.clone()
    }

    /// Run `f` over the values without copying them.
    pub fn with_values<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.inner.borrow().values)
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        let b = self.inner.borrow();
        debug_assert_eq!(b.values.len(), 1);
        b.values[0]
    }

    /// Copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// Give this tensor an all-zero gradient if none was accumulated. Used
    /// by the trainer for parameters whose loss contribution is
    /// structurally zero in the current phase (their true gradient).
    pub fn ensure_grad(&self) {
        let mut b = self.inner.borrow_mut();
        if b.grad.is_none() {
            let n = b.values.len();
            b.grad = Some(vec![0.0; n]);
        }
    }

    /// Overwrite the stored values in place (used by the optimizer).
    pub fn set_values(&self, values: &[f64]) {
        let mut b = self.inner.borrow_mut();
        debug_assert_eq!(b.values.len(), values.len());
        b.values.copy_from_slice(values);
    }

    /// Constant copy of this tensor, cut off from the graph.
    pub fn detach(&self) -> Tensor {
        let b = self.inner.borrow();
        Tensor::make(b.shape.clone(), b.values.clone(), false)
    }

    fn accumulate_grad(&self, contrib: &[f64]) {
        let mut b = self.inner.borrow_mut();
        if !b.tracked {
            return;
        }
        match &mut b.grad {
            Some(g) => {
                for (gi, &c) in g.iter_mut().zip(contrib) {
                    *gi += c;
                }
            }
            None => b.grad = Some(contrib.to_vec()),
        }
    }

    /// Reverse-mode pass from a scalar loss. Populates `grad` on every
    /// tensor that participated and requires gradients. Repeated calls
    /// accumulate.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(Error::NonScalarLoss { shape: self.shape() });
        }
        if !self.tracked() {
            return Ok(()); // loss does not depend on any trainable tensor
        }

        // Post-order DFS over tracked parents.
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.id());
        while let Some((node, idx)) = stack.pop() {
            let parent = {
                let b = node.inner.borrow();
                b.parents.get(idx).cloned()
            };
            match parent {
                Some(p) => {
                    stack.push((node, idx + 1));
                    if p.tracked() && visited.insert(p.id()) {
                        stack.push((p, 0));
                    }
                }
                None => order.push(node),
            }
        }

        self.accumulate_grad(&[1.0]);
        for node in order.iter().rev() {
            let (grad, step) = {
                let b = node.inner.borrow();
                (b.grad.clone(), b.backward.clone())
            };
            if let (Some(g), Some(f)) = (grad, step) {
                f(&g);
            }
        }
        Ok(())
    }

    // ---- shape helpers ----

    fn dims2(&self) -> (usize, usize) {
        let b = self.inner.borrow();
        match b.shape.len() {
            1 => (1, b.shape[0]),
            2 => (b.shape[0], b.shape[1]),
            _ => unreachable!("tensors are rank 1 or 2"),
        }
    }

    fn require_matrix(&self, op: &'static str, other: &Tensor) -> Result<()> {
        if self.shape().len() != 2 || other.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }

    // ---- forward ops ----

    /// `self[m,k] * rhs[k,n]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.require_matrix("matmul", rhs)?;
        let (m, k) = self.dims2();
        let (k2, n) = rhs.dims2();
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let out = self.with_values(|a| rhs.with_values(|b| kernels::mm_nn(a, b, m, k, n)));
        let (lhs, rhsc) = (self.clone(), rhs.clone());
        let (a_vals, b_vals) = (self.to_vec(), rhs.to_vec());
        Ok(Tensor::op(
            vec![m, n],
            out,
            vec![self.clone(), rhs.clone()],
            move |g| {
                // dA = dC * B^T, dB = A^T * dC
                if lhs.tracked() {
                    lhs.accumulate_grad(&kernels::mm_nt(g, &b_vals, m, n, k));
                }
                if rhsc.tracked() {
                    rhsc.accumulate_grad(&kernels::mm_tn(&a_vals, g, m, k, n));
                }
            },
        ))
    }

    /// `self[m,k] * rhs[n,k]^T`; the usual linear-layer product with
    /// row-major `[out,in]` weights.
    pub fn matmul_nt(&self, rhs: &Tensor) -> Result<Tensor> {
        self.require_matrix("matmul_nt", rhs)?;
        let (m, k) = self.dims2();
        let (n, k2) = rhs.dims2();
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let out = self.with_values(|a| rhs.with_values(|b| kernels::mm_nt(a, b, m, k, n)));
        let (lhs, rhsc) = (self.clone(), rhs.clone());
        let (a_vals, b_vals) = (self.to_vec(), rhs.to_vec());
        Ok(Tensor::op(
            vec![m, n],
            out,
            vec![self.clone(), rhs.clone()],
            move |g| {
                // C = A * B^T: dA = dC * B, dB = dC^T * A
                if lhs.tracked() {
                    lhs.accumulate_grad(&kernels::mm_nn(g, &b_vals, m, n, k));
                }
                if rhsc.tracked() {
                    rhsc.accumulate_grad(&kernels::mm_tn(g, &a_vals, m, n, k));
                }
            },
        ))
    }

    /// Broadcast-add a bias vector over the rows of `self`.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let (m, n) = self.dims2();
        if bias.shape() != vec![n] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: self.shape(),
                rhs: bias.shape(),
            });
        }
        let out = self.with_values(|x| {
            bias.with_values(|b| {
                let mut o = vec![0.0; x.len()];
                for i in 0..m {
                    for j in 0..n {
                        o[i * n + j] = x[i * n + j] + b[j];
                    }
                }
                o
            })
        });
        let (xc, bc) = (self.clone(), bias.clone());
        Ok(Tensor::op(
            self.shape(),
            out,
            vec![self.clone(), bias.clone()],
            move |g| {
                if xc.tracked() {
                    xc.accumulate_grad(g);
                }
                if bc.tracked() {
                    let mut db = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            db[j] += g[i * n + j];
                        }
                    }
                    bc.accumulate_grad(&db);
                }
            },
        ))
    }

    fn binary_same_shape(
        &self,
        rhs: &Tensor,
        op: &'static str,
        fwd: impl Fn(f64, f64) -> f64 + Sync,
        bwd: impl Fn(&Tensor, &Tensor, &[f64]) + 'static,
    ) -> Result<Tensor> {
        if self.shape() != rhs.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let out = self.with_values(|a| rhs.with_values(|b| kernels::zip_map(a, b, fwd)));
        let (lhs, rhsc) = (self.clone(), rhs.clone());
        Ok(Tensor::op(
            self.shape(),
            out,
            vec![self.clone(), rhs.clone()],
            move |g| bwd(&lhs, &rhsc, g),
        ))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_same_shape(rhs, "add", |a, b| a + b, |l, r, g| {
            if l.tracked() {
                l.accumulate_grad(g);
            }
            if r.tracked() {
                r.accumulate_grad(g);
            }
        })
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_same_shape(rhs, "sub", |a, b| a - b, |l, r, g| {
            if l.tracked() {
                l.accumulate_grad(g);
            }
            if r.tracked() {
                let neg: Vec<f64> = g.iter().map(|&x| -x).collect();
                r.accumulate_grad(&neg);
            }
        })
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        let a_vals = self.to_vec();
        let b_vals = rhs.to_vec();
        self.binary_same_shape(rhs, "mul", |a, b| a * b, move |l, r, g| {
            if l.tracked() {
                let d: Vec<f64> = g.iter().zip(&b_vals).map(|(&gi, &b)| gi * b).collect();
                l.accumulate_grad(&d);
            }
            if r.tracked() {
                let d: Vec<f64> = g.iter().zip(&a_vals).map(|(&gi, &a)| gi * a).collect();
                r.accumulate_grad(&d);
            }
        })
    }

    /// Multiply every element by a constant.
    pub fn scale(&self, c: f64) -> Tensor {
        let out = self.with_values(|x| kernels::map(x, |v| c * v));
        let xc = self.clone();
        Tensor::op(self.shape(), out, vec![self.clone()], move |g| {
            if xc.tracked() {
                let d: Vec<f64> = g.iter().map(|&gi| c * gi).collect();
                xc.accumulate_grad(&d);
            }
        })
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    /// Elementwise max(0, x). The derivative at exactly 0 is taken as 0.
    pub fn relu(&self) -> Tensor {
        let x_vals = self.to_vec();
        let out = self.with_values(|x| kernels::map(x, |v| if v > 0.0 { v } else { 0.0 }));
        let xc = self.clone();
        Tensor::op(self.shape(), out, vec![self.clone()], move |g| {
            if xc.tracked() {
                let d: Vec<f64> = g
                    .iter()
                    .zip(&x_vals)
                    .map(|(&gi, &x)| if x > 0.0 { gi } else { 0.0 })
                    .collect();
                xc.accumulate_grad(&d);
            }
        })
    }

    /// Elementwise natural logarithm. Documented for positive inputs.
    pub fn log(&self) -> Tensor {
        let x_vals = self.to_vec();
        let out = self.with_values(|x| kernels::map(x, f64::ln));
        let xc = self.clone();
        Tensor::op(self.shape(), out, vec![self.clone()], move |g| {
            if xc.tracked() {
                let d: Vec<f64> = g.iter().zip(&x_vals).map(|(&gi, &x)| gi / x).collect();
                xc.accumulate_grad(&d);
            }
        })
    }

    /// L2-normalize along the last axis. Rows with norm below [`NORM_EPS`]
    /// are divided by the floor instead, keeping outputs and gradients
    /// finite for zero rows.
    pub fn l2_normalize(&self) -> Tensor {
        let (m, n) = self.dims2();
        let x_vals = self.to_vec();
        let mut out = vec![0.0; x_vals.len()];
        let mut denoms = vec![0.0; m];
        let mut floored = vec![false; m];
        for i in 0..m {
            let row = &x_vals[i * n..i * n + n];
            let r = kernels::dot(row, row).sqrt();
            floored[i] = r < NORM_EPS;
            let denom = if floored[i] { NORM_EPS } else { r };
            denoms[i] = denom;
            for j in 0..n {
                out[i * n + j] = row[j] / denom;
            }
        }
        let xc = self.clone();
        Tensor::op(self.shape(), out, vec![self.clone()], move |g| {
            if !xc.tracked() {
                return;
            }
            let mut d = vec![0.0; x_vals.len()];
            for i in 0..m {
                let row = &x_vals[i * n..i * n + n];
                let grow = &g[i * n..i * n + n];
                let r = denoms[i];
                if floored[i] {
                    // z = x / eps with a constant denominator
                    for j in 0..n {
                        d[i * n + j] = grow[j] / NORM_EPS;
                    }
                } else {
                    // z = x / r: dz/dx = I/r - x x^T / r^3
                    let xg = kernels::dot(row, grow);
                    let r3 = r * r * r;
                    for j in 0..n {
                        d[i * n + j] = grow[j] / r - row[j] * xg / r3;
                    }
                }
            }
            xc.accumulate_grad(&d);
        })
    }

    /// Numerically stable softmax along the last axis.
    pub fn softmax(&self) -> Tensor {
        let (m, n) = self.dims2();
        let x_vals = self.to_vec();
        let mut out = vec![0.0; x_vals.len()];
        for i in 0..m {
            let row = &x_vals[i * n..i * n + n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..n {
                let e = (row[j] - max).exp();
                out[i * n + j] = e;
                denom += e;
            }
            for j in 0..n {
                out[i * n + j] /= denom;
            }
        }
        let y_vals = out.clone();
        let xc = self.clone();
        Tensor::op(self.shape(), out, vec![self.clone()], move |g| {
            if !xc.tracked() {
                return;
            }
            let mut d = vec![0.0; y_vals.len()];
            for i in 0..m {
                let y = &y_vals[i * n..i * n + n];
                let grow = &g[i * n..i * n + n];
                let s = kernels::dot(y, grow);
                for j in 0..n {
                    d[i * n + j] = y[j] * (grow[j] - s);
                }
            }
            xc.accumulate_grad(&d);
        })
    }

    /// Log-softmax along the last axis via log-sum-exp.
    pub fn log_softmax(&self) -> Tensor {
        let (m, n) = self.dims2();
        let x_vals = self.to_vec();
        let mut out = vec![0.0; x_vals.len()];
        for i in 0..m {
            let row = &x_vals[i * n..i * n + n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for &v in row {
                denom += (v - max).exp();
            }
            let lse = max + denom.ln();
            for j in 0..n {
                out[i * n + j] = row[j] - lse;
            }
        }
        let ls_vals = out.clone();
        let xc = self.clone();
        Tensor::op(self.shape(), out, vec![self.clone()], move |g| {
            if !xc.tracked() {
                return;
            }
            let mut d = vec![0.0; ls_vals.len()];
            for i in 0..m {
                let ls = &ls_vals[i * n..i * n + n];
                let grow = &g[i * n..i * n + n];
                let gsum = kernels::sum(grow);
                for j in 0..n {
                    d[i * n + j] = grow[j] - ls[j].exp() * gsum;
                }
            }
            xc.accumulate_grad(&d);
        })
    }

    /// Mean over all elements; returns a `[1]` tensor.
    pub fn mean_all(&self) -> Tensor {
        let n = self.len();
        let v = self.with_values(kernels::sum) / n as f64;
        let xc = self.clone();
        Tensor::op(vec![1], vec![v], vec![self.clone()], move |g| {
            if xc.tracked() {
                let d = vec![g[0] / n as f64; n];
                xc.accumulate_grad(&d);
            }
        })
    }

    /// Sum over all elements; returns a `[1]` tensor.
    pub fn sum_all(&self) -> Tensor {
        let n = self.len();
        let v = self.with_values(kernels::sum);
        let xc = self.clone();
        Tensor::op(vec![1], vec![v], vec![self.clone()], move |g| {
            if xc.tracked() {
                let d = vec![g[0]; n];
                xc.accumulate_grad(&d);
            }
        })
    }

    /// Dot product of two vectors; returns a `[1]` tensor.
    pub fn dot(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.shape() != rhs.shape() || self.shape().len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "dot",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let v = self.with_values(|a| rhs.with_values(|b| kernels::dot(a, b)));
        let (lhs, rhsc) = (self.clone(), rhs.clone());
        let (a_vals, b_vals) = (self.to_vec(), rhs.to_vec());
        Ok(Tensor::op(
            vec![1],
            vec![v],
            vec![self.clone(), rhs.clone()],
            move |g| {
                if lhs.tracked() {
                    let d: Vec<f64> = b_vals.iter().map(|&b| g[0] * b).collect();
                    lhs.accumulate_grad(&d);
                }
                if rhsc.tracked() {
                    let d: Vec<f64> = a_vals.iter().map(|&a| g[0] * a).collect();
                    rhsc.accumulate_grad(&d);
                }
            },
        ))
    }

    /// Pick one element per row: `out[i] = self[i, idx[i]]`.
    pub fn gather(&self, idx: &[usize]) -> Result<Tensor> {
        let (m, n) = self.dims2();
        if idx.len() != m {
            return Err(Error::invalid(format!(
                "gather: {} indices for {} rows",
                idx.len(),
                m
            )));
        }
        for &j in idx {
            if j >= n {
                return Err(Error::LabelOutOfRange { label: j, classes: n });
            }
        }
        let out: Vec<f64> = self.with_values(|x| idx.iter().enumerate().map(|(i, &j)| x[i * n + j]).collect());
        let xc = self.clone();
        let idx = idx.to_vec();
        Ok(Tensor::op(vec![m], out, vec![self.clone()], move |g| {
            if xc.tracked() {
                let mut d = vec![0.0; m * n];
                for (i, &j) in idx.iter().enumerate() {
                    d[i * n + j] += g[i];
                }
                xc.accumulate_grad(&d);
            }
        }))
    }

    /// Per-row convex pick of two columns:
    /// `out[i] = w[i] * self[i, a[i]] + (1 - w[i]) * self[i, b[i]]`.
    ///
    /// Rows with `a[i] == b[i]` merge the two terms into a single pick, so
    /// the identity `out[i] = self[i, a[i]]` holds bitwise for any weight.
    pub fn gather_pair(&self, a: &[usize], b: &[usize], w: &[f64]) -> Result<Tensor> {
        let (m, n) = self.dims2();
        if a.len() != m || b.len() != m || w.len() != m {
            return Err(Error::invalid(format!(
                "gather_pair: got {}/{}/{} indices and weights for {} rows",
                a.len(),
                b.len(),
                w.len(),
                m
            )));
        }
        for &j in a.iter().chain(b.iter()) {
            if j >= n {
                return Err(Error::LabelOutOfRange { label: j, classes: n });
            }
        }
        let out: Vec<f64> = self.with_values(|x| {
            (0..m)
                .map(|i| {
                    if a[i] == b[i] {
                        x[i * n + a[i]]
                    } else {
                        w[i] * x[i * n + a[i]] + (1.0 - w[i]) * x[i * n + b[i]]
                    }
                })
                .collect()
        });
        let xc = self.clone();
        let (a, b, w) = (a.to_vec(), b.to_vec(), w.to_vec());
        Ok(Tensor::op(vec![m], out, vec![self.clone()], move |g| {
            if xc.tracked() {
                let mut d = vec![0.0; m * n];
                for i in 0..m {
                    if a[i] == b[i] {
                        d[i * n + a[i]] += g[i];
                    } else {
                        d[i * n + a[i]] += g[i] * w[i];
                        d[i * n + b[i]] += g[i] * (1.0 - w[i]);
                    }
                }
                xc.accumulate_grad(&d);
            }
        }))
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let b = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("id", &b.id)
            .field("shape", &b.shape)
            .field("requires_grad", &b.requires_grad)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn relu_at_sign_boundaries() {
        let x = Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(x.relu().to_vec(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn l2_normalize_345_triangle() {
        let x = Tensor::new(&[2], vec![3.0, 4.0]).unwrap();
        let z = x.l2_normalize();
        assert_relative_eq!(z.to_vec()[0], 0.6, max_relative = 1e-15);
        assert_relative_eq!(z.to_vec()[1], 0.8, max_relative = 1e-15);
    }

    #[test]
    fn l2_normalize_guards_zero_rows() {
        let x = Tensor::new(&[2], vec![0.0, 0.0]).unwrap();
        let z = x.l2_normalize();
        assert!(z.to_vec().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_symmetry() {
        let x = Tensor::new(&[2], vec![0.0, 0.0]).unwrap();
        assert_eq!(x.softmax().to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let w = Tensor::parameter(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let loss = w.sum_all();
        loss.backward().unwrap();
        assert_eq!(w.grad().unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_half_square_norm_is_w() {
        let w = Tensor::parameter(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let loss = w.dot(&w).unwrap().scale(0.5);
        loss.backward().unwrap();
        let g = w.grad().unwrap();
        for (gi, wi) in g.iter().zip(w.to_vec()) {
            assert_relative_eq!(*gi, wi, max_relative = 1e-15);
        }
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let w = Tensor::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let y = w.relu();
        assert!(matches!(y.backward(), Err(Error::NonScalarLoss { .. })));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let w = Tensor::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let loss = w.sum_all();
        loss.backward().unwrap();
        loss.backward().unwrap();
        assert_eq!(w.grad().unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Tensor::new(&[2, 3], vec![0.0; 6]).unwrap();
        let b = Tensor::new(&[2, 2], vec![0.0; 4]).unwrap();
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn reused_tensor_accumulates_both_paths() {
        // loss = sum(x + x) -> grad 2
        let x = Tensor::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let loss = x.add(&x).unwrap().sum_all();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn constants_do_not_record_graph() {
        let a = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(&[2], vec![3.0, 4.0]).unwrap();
        let c = a.add(&b).unwrap();
        assert!(!c.tracked());
        assert!(c.inner.borrow().backward.is_none());
    }

    #[test]
    fn gather_pair_merges_equal_labels_bitwise() {
        let x = Tensor::new(&[2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let merged = x.gather_pair(&[1, 2], &[1, 2], &[0.3, 0.77]).unwrap();
        let single = x.gather(&[1, 2]).unwrap();
        assert_eq!(merged.to_vec(), single.to_vec());
    }
}

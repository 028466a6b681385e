use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use super::{exact_sum, Matrix, ParamId, ParamStore};
use crate::error::ShapeError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Recorded operation with the inputs needed for its adjoint.
#[derive(Debug, Clone)]
pub enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// `x · W + b` with `b` broadcast over rows.
    Affine(Var, Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Every element of the first input times the `1 × 1` second input.
    ScaleBy(Var, Var),
    OneMinus(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    /// Elementwise multiply by a fixed mask (already scaled by 1/(1-rate)).
    Dropout(Var, Matrix),
    Square(Var),
    Sum(Var),
    Mean(Var),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Append-only record of a forward computation.
///
/// Parameters are copied onto the tape once per [`ParamId`] the first time
/// they are bound; gradients for them come back keyed by the same id.
pub struct Tape {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, a: &Matrix, b: &Matrix) -> ShapeError {
    ShapeError::Mismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            bound: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.bound.insert(id, v);
        v
    }

    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var, ShapeError> {
        let (a, b) = (self.value(x), self.value(w));
        if a.cols() != b.rows() {
            return Err(mismatch("matmul", a, b));
        }
        let y = a.matmul(b);
        Ok(self.push(y, Op::MatMul(x, w)))
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, ShapeError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.cols() != wv.rows() {
            return Err(mismatch("affine", xv, wv));
        }
        if bv.shape() != (1, wv.cols()) {
            return Err(mismatch("affine bias", wv, bv));
        }
        let mut y = xv.matmul(wv);
        let bias = bv.as_slice();
        for r in 0..y.rows() {
            for (o, &bb) in y.row_mut(r).iter_mut().zip(bias) {
                *o += bb;
            }
        }
        Ok(self.push(y, Op::Affine(x, w, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), ShapeError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, self.value(a), self.value(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.same_shape("add", a, b)?;
        let y = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.same_shape("sub", a, b)?;
        let y = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.same_shape("mul", a, b)?;
        let y = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(y, Op::Mul(a, b)))
    }

    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var, ShapeError> {
        if self.shape(s) != (1, 1) {
            return Err(mismatch("scale_by", self.value(x), self.value(s)));
        }
        let k = self.value(s).item();
        let y = self.value(x).map(|v| v * k);
        Ok(self.push(y, Op::ScaleBy(x, s)))
    }

    pub fn one_minus(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| 1.0 - v);
        self.push(y, Op::OneMinus(x))
    }

    /// `max(x, slope·x)` for `slope` in (0, 1).
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let y = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(y, Op::LeakyRelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = self.value(x).map(sigmoid);
        self.push(y, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.value(x).map(f64::tanh);
        self.push(y, Op::Tanh(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, ShapeError> {
        let rows = self.shape(parts[0]).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(mismatch("concat_cols", self.value(parts[0]), self.value(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut y = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut c = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                y.row_mut(r)[c..c + src.len()].copy_from_slice(src);
                c += src.len();
            }
        }
        Ok(self.push(y, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, ShapeError> {
        let xv = self.value(x);
        if start + len > xv.cols() {
            return Err(ShapeError::IndexOutOfRange {
                op: "slice_cols",
                index: start + len,
                bound: xv.cols(),
            });
        }
        let mut y = Matrix::zeros(xv.rows(), len);
        for r in 0..xv.rows() {
            y.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        Ok(self.push(y, Op::SliceCols(x, start)))
    }

    /// Row `i` of the result is row `index[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: impl Into<Arc<[usize]>>) -> Result<Var, ShapeError> {
        let index = index.into();
        let xv = self.value(x);
        let mut y = Matrix::zeros(index.len(), xv.cols());
        for (i, &src) in index.iter().enumerate() {
            if src >= xv.rows() {
                return Err(ShapeError::IndexOutOfRange {
                    op: "gather_rows",
                    index: src,
                    bound: xv.rows(),
                });
            }
            y.row_mut(i).copy_from_slice(xv.row(src));
        }
        Ok(self.push(y, Op::GatherRows(x, index)))
    }

    /// Row `s` of the result is the sum of the rows of `values` whose id is
    /// `s`; empty segments give zero rows.
    ///
    /// Each output element is the correctly rounded sum of its contributions,
    /// so the result is independent of the order of the input rows.
    pub fn segment_sum(
        &mut self,
        values: Var,
        segment_ids: impl Into<Arc<[usize]>>,
        num_segments: usize,
    ) -> Result<Var, ShapeError> {
        let ids = segment_ids.into();
        let xv = self.value(values);
        if ids.len() != xv.rows() {
            return Err(ShapeError::Mismatch {
                op: "segment_sum",
                left: xv.shape(),
                right: (ids.len(), 1),
            });
        }
        let y = segment_sum_values(xv, &ids, num_segments)?;
        let mut ids_full = ids.to_vec();
        ids_full.push(num_segments);
        Ok(self.push(y, Op::SegmentSum(values, ids_full.into())))
    }

    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Var {
        if !training || rate <= 0.0 {
            return x;
        }
        assert!(rate < 1.0, "dropout rate must be in [0, 1)");
        let keep = 1.0 / (1.0 - rate);
        let (r, c) = self.shape(x);
        let mask = Matrix::from_vec(
            r,
            c,
            (0..r * c)
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect(),
        );
        let y = self.value(x).zip_map(&mask, |a, m| a * m);
        self.push(y, Op::Dropout(x, mask))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v * v);
        self.push(y, Op::Square(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let y = Matrix::scalar(self.value(x).sum());
        self.push(y, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let y = Matrix::scalar(v.sum() / v.len() as f64);
        self.push(y, Op::Mean(x))
    }

    /// Mean squared error between an `n × 1` prediction and fixed targets.
    pub fn mse(&mut self, pred: Var, targets: &[f64]) -> Result<Var, ShapeError> {
        let t = self.input(Matrix::from_vec(targets.len(), 1, targets.to_vec()));
        let diff = self.sub(pred, t)?;
        let sq = self.square(diff);
        Ok(self.mean(sq))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, ShapeError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(ShapeError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::MatMul(x, w) => {
                    let dx = g.matmul_t(self.value(*w));
                    let dw = self.value(*x).t_matmul(&g);
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                }
                Op::Affine(x, w, b) => {
                    let dx = g.matmul_t(self.value(*w));
                    let dw = self.value(*x).t_matmul(&g);
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &v) in db.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v));
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(*b), |g, y| g * y);
                    let db = g.zip_map(self.value(*a), |g, x| g * x);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::ScaleBy(x, s) => {
                    let k = self.value(*s).item();
                    let ds = g
                        .as_slice()
                        .iter()
                        .zip(self.value(*x).as_slice())
                        .map(|(g, x)| g * x)
                        .sum::<f64>();
                    accumulate(&mut grads, *x, g.map(|v| v * k));
                    accumulate(&mut grads, *s, Matrix::scalar(ds));
                }
                Op::OneMinus(x) => accumulate(&mut grads, *x, g.map(|v| -v)),
                Op::LeakyRelu(x, slope) => {
                    let slope = *slope;
                    let dx = g.zip_map(self.value(*x), |g, x| if x > 0.0 { g } else { slope * g });
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sigmoid(x) => {
                    let dx = g.zip_map(&node.value, |g, y| g * y * (1.0 - y));
                    accumulate(&mut grads, *x, dx);
                }
                Op::Tanh(x) => {
                    let dx = g.zip_map(&node.value, |g, y| g * (1.0 - y * y));
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        let mut dp = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[c..c + w]);
                        }
                        c += w;
                        accumulate(&mut grads, p, dp);
                    }
                }
                Op::SliceCols(x, start) => {
                    let (rows, cols) = self.shape(*x);
                    let mut dx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        dx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::GatherRows(x, index) => {
                    let (rows, cols) = self.shape(*x);
                    let mut dx = Matrix::zeros(rows, cols);
                    for (i, &src) in index.iter().enumerate() {
                        for (d, &v) in dx.row_mut(src).iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::SegmentSum(x, ids) => {
                    let (rows, cols) = self.shape(*x);
                    let mut dx = Matrix::zeros(rows, cols);
                    for (r, &s) in ids[..rows].iter().enumerate() {
                        dx.row_mut(r).copy_from_slice(g.row(s));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Dropout(x, mask) => accumulate(&mut grads, *x, g.zip_map(mask, |g, m| g * m)),
                Op::Square(x) => {
                    let dx = g.zip_map(self.value(*x), |g, x| 2.0 * g * x);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sum(x) => {
                    let (r, c) = self.shape(*x);
                    accumulate(&mut grads, *x, Matrix::filled(r, c, g.item()));
                }
                Op::Mean(x) => {
                    let (r, c) = self.shape(*x);
                    let n = (r * c) as f64;
                    accumulate(&mut grads, *x, Matrix::filled(r, c, g.item() / n));
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            by_var: grads,
            bound: self.bound.clone(),
        })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn segment_sum_values(x: &Matrix, ids: &[usize], num_segments: usize) -> Result<Matrix, ShapeError> {
    let cols = x.cols();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_segments];
    for (r, &s) in ids.iter().enumerate() {
        if s >= num_segments {
            return Err(ShapeError::IndexOutOfRange {
                op: "segment_sum",
                index: s,
                bound: num_segments,
            });
        }
        members[s].push(r);
    }
    let mut y = Matrix::zeros(num_segments, cols);
    let mut scratch = Vec::new();
    for (s, rows) in members.iter().enumerate() {
        match rows.len() {
            0 => {}
            1 => y.row_mut(s).copy_from_slice(x.row(rows[0])),
            // a single addition is already correctly rounded and commutative
            2 => {
                let (a, b) = (x.row(rows[0]), x.row(rows[1]));
                for (c, o) in y.row_mut(s).iter_mut().enumerate() {
                    *o = a[c] + b[c];
                }
            }
            _ => {
                for c in 0..cols {
                    scratch.clear();
                    scratch.extend(rows.iter().map(|&r| x.get(r, c)));
                    y.set(s, c, exact_sum(scratch.iter().copied()));
                }
            }
        }
    }
    Ok(y)
}

/// Gradients from one [`Tape::backward`] call.
pub struct Gradients {
    by_var: Vec<Option<Matrix>>,
    bound: HashMap<ParamId, Var>,
}

impl Gradients {
    /// Gradient of the loss with respect to a recorded value. Values not on
    /// a path to the loss get zeros.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Matrix {
        let (r, c) = tape.shape(v);
        match self.by_var.get(v.0) {
            Some(Some(g)) if g.shape() == (r, c) => g.clone(),
            _ => Matrix::zeros(r, c),
        }
    }

    /// Gradient for every parameter in `store`, zeros for those the loss does
    /// not reach.
    pub fn for_params(&self, tape: &Tape, store: &ParamStore) -> Vec<Matrix> {
        store
            .ids()
            .map(|id| match self.bound.get(&id) {
                Some(&v) => self.wrt(tape, v),
                None => {
                    let (r, c) = store.value(id).shape();
                    Matrix::zeros(r, c)
                }
            })
            .collect()
    }
}

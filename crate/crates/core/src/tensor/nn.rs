use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Tape, Var};
use crate::error::ShapeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named parameter matrices. Names are unique paths such as
/// `gnn.il.layer0.gine.w1`; ids follow insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on a duplicate name; parameter layouts are fixed by code.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(!self.by_name.contains_key(&name), "duplicate parameter name {name}");
        let id = ParamId(self.values.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Overwrites every value with the matching entry of `values`.
    pub fn assign(&mut self, values: &[Matrix]) {
        assert_eq!(values.len(), self.values.len());
        for (dst, src) in self.values.iter_mut().zip(values) {
            assert_eq!(dst.shape(), src.shape());
            dst.clone_from(src);
        }
    }
}

/// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-a..=a)).collect())
}

/// Dense layer `x · W (+ b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(format!("{name}.w"), glorot_uniform(in_dim, out_dim, rng));
        let bias = bias.then(|| store.add(format!("{name}.b"), Matrix::zeros(1, out_dim)));
        Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, ShapeError> {
        let w = tape.param(store, self.weight);
        match self.bias {
            Some(b) => {
                let b = tape.param(store, b);
                tape.affine(x, w, b)
            }
            None => tape.matmul(x, w),
        }
    }
}

/// Stack of affine layers with a leaky activation (and optional dropout)
/// after each hidden layer, and after the last one when `activate_last`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub slope: f64,
    pub dropout: f64,
    pub activate_last: bool,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        widths: &[usize],
        slope: f64,
        dropout: f64,
        activate_last: bool,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut d = in_dim;
        for (i, &w) in widths.iter().enumerate() {
            layers.push(Linear::new(store, &format!("{name}.{i}"), d, w, true, rng));
            d = w;
        }
        Mlp {
            layers,
            slope,
            dropout,
            activate_last,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        mut x: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, ShapeError> {
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, store, x)?;
            if i < last || self.activate_last {
                x = tape.leaky_relu(x, self.slope);
                x = tape.dropout(x, self.dropout, training, rng);
            }
        }
        Ok(x)
    }
}

/// GRU cell with gates packed as [z | r | n] along the columns:
///
/// z = σ(x W_z + h U_z + b_z), r = σ(x W_r + h U_r + b_r),
/// n = tanh(x W_n + b_nx + r ⊙ (h U_n + b_nh)), h' = (1 − z) ⊙ n + z ⊙ h.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    /// `d_in × 3d`
    pub w_input: ParamId,
    /// `d × 3d`
    pub w_hidden: ParamId,
    /// `1 × 3d`: b_z, b_r, b_nx
    pub b_input: ParamId,
    /// `1 × d`: b_nh
    pub b_hidden_n: ParamId,
    pub dim: usize,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, dim: usize, rng: &mut R) -> Self {
        let mut wx = Matrix::zeros(in_dim, 3 * dim);
        let mut wh = Matrix::zeros(dim, 3 * dim);
        for gate in 0..3 {
            let bx = glorot_uniform(in_dim, dim, rng);
            let bh = glorot_uniform(dim, dim, rng);
            for r in 0..in_dim {
                wx.row_mut(r)[gate * dim..(gate + 1) * dim].copy_from_slice(bx.row(r));
            }
            for r in 0..dim {
                wh.row_mut(r)[gate * dim..(gate + 1) * dim].copy_from_slice(bh.row(r));
            }
        }
        GruCell {
            w_input: store.add(format!("{name}.w_input"), wx),
            w_hidden: store.add(format!("{name}.w_hidden"), wh),
            b_input: store.add(format!("{name}.b_input"), Matrix::zeros(1, 3 * dim)),
            b_hidden_n: store.add(format!("{name}.b_hidden_n"), Matrix::zeros(1, dim)),
            dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h_prev: Var, x: Var) -> Result<Var, ShapeError> {
        let d = self.dim;
        if tape.shape(h_prev).1 != d || tape.shape(h_prev).0 != tape.shape(x).0 {
            return Err(ShapeError::Mismatch {
                op: "gru_cell",
                left: tape.shape(h_prev),
                right: tape.shape(x),
            });
        }
        let wx = tape.param(store, self.w_input);
        let wh = tape.param(store, self.w_hidden);
        let bx = tape.param(store, self.b_input);
        let bnh = tape.param(store, self.b_hidden_n);

        let gx = tape.affine(x, wx, bx)?;
        let gh = tape.matmul(h_prev, wh)?;

        let gx_z = tape.slice_cols(gx, 0, d)?;
        let gx_r = tape.slice_cols(gx, d, d)?;
        let gx_n = tape.slice_cols(gx, 2 * d, d)?;
        let gh_z = tape.slice_cols(gh, 0, d)?;
        let gh_r = tape.slice_cols(gh, d, d)?;
        let gh_n = tape.slice_cols(gh, 2 * d, d)?;

        let z_pre = tape.add(gx_z, gh_z)?;
        let z = tape.sigmoid(z_pre);
        let r_pre = tape.add(gx_r, gh_r)?;
        let r = tape.sigmoid(r_pre);

        // broadcast b_nh over the batch rows
        let bnh_rows = tape.gather_rows(bnh, vec![0; tape.shape(h_prev).0])?;
        let hn = tape.add(gh_n, bnh_rows)?;
        let r_hn = tape.mul(r, hn)?;
        let n_pre = tape.add(gx_n, r_hn)?;
        let n = tape.tanh(n_pre);

        let one_minus_z = tape.one_minus(z);
        let keep_new = tape.mul(one_minus_z, n)?;
        let keep_old = tape.mul(z, h_prev)?;
        tape.add(keep_new, keep_old)
    }
}

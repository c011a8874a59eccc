//! Minimal reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records operations on [`Var`] handles; [`Tape::backward`]
//! returns gradients for every parameter of the [`ParamStore`] the tape
//! reads from. Everything is row-major 2-D; vectors are `1 x n`.

use ndarray::{concatenate, s, Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::collections::HashMap;
use std::path::Path;

use crate::{Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
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

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn metas(&self) -> Vec<ParamMeta> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| ParamMeta {
                name: n.clone(),
                shape: [v.nrows(), v.ncols()],
            })
            .collect()
    }

    /// All values as little-endian `f64`, in registration order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.num_scalars() * 8);
        for v in &self.values {
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_le_bytes(metas: &[ParamMeta], bytes: &[u8]) -> Result<Self> {
        let total: usize = metas.iter().map(|m| m.shape[0] * m.shape[1]).sum();
        if bytes.len() != total * 8 {
            return Err(Error::invalid(format!(
                "parameter blob holds {} bytes, expected {}",
                bytes.len(),
                total * 8
            )));
        }
        let mut store = ParamStore::new();
        let mut chunks = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for m in metas {
            let data: Vec<f64> = chunks.by_ref().take(m.shape[0] * m.shape[1]).collect();
            let arr =
                Array2::from_shape_vec((m.shape[0], m.shape[1]), data).expect("length checked");
            store.add(m.name.clone(), arr);
        }
        Ok(store)
    }

    pub fn write_blob(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_le_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_blob(metas: &[ParamMeta], path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_le_bytes(metas, &bytes)
    }
}

/// Name and shape of one stored tensor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Elu(Var),
    Ln(Var),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Row {
        x: Var,
        row: usize,
    },
    Element {
        x: Var,
        row: usize,
        col: usize,
    },
    Sum(Var),
}

/// Per-parameter gradients, aligned with the [`ParamStore`].
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads[id.0].as_ref()
    }
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    /// `None` for parameter leaves, which are read from the store.
    values: Vec<Option<Array2<f64>>>,
    ops: Vec<Op>,
    param_vars: HashMap<ParamId, Var>,
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x * FRAC_1_SQRT_2))
}

fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn log_softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            values: Vec::new(),
            ops: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(Some(value));
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        match (&self.values[v.0], &self.ops[v.0]) {
            (Some(x), _) => x,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("only parameter leaves are stored by reference"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf for a stored parameter; repeated calls return the same handle.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        self.values.push(None);
        self.ops.push(Op::Param(id));
        let v = Var(self.ops.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// `a (n x m) + b (1 x m)` broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let v = log_softmax_rows(self.value(a));
        self.push(v, Op::LogSoftmaxRows(a))
    }

    /// Row-wise layer normalization with `1 x m` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let m = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / m;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Exact (erf) GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(v, Op::Elu(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::ln);
        self.push(v, Op::Ln(a))
    }

    /// Rows of `table` selected by `ids` (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let v = t.select(Axis(0), ids);
        self.push(
            v,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let v = self.value(x).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("row counts agree");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("column counts agree");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn row(&mut self, x: Var, row: usize) -> Var {
        let v = self.value(x).slice(s![row..row + 1, ..]).to_owned();
        self.push(v, Op::Row { x, row })
    }

    pub fn element(&mut self, x: Var, row: usize, col: usize) -> Var {
        let v = Array2::from_elem((1, 1), self.value(x)[[row, col]]);
        self.push(v, Op::Element { x, row, col })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(v, Op::Sum(x))
    }

    /// Back-propagates from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        adj[output.0] = Some(Array2::ones(self.value(output).raw_dim()));
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.params.len()];

        fn acc(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
            match slot {
                Some(existing) => *existing += &g,
                None => *slot = Some(g),
            }
        }

        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.ops[i] {
                Op::Constant => {}
                Op::Param(id) => acc(&mut grads[id.0], g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut adj[a.0], ga);
                    acc(&mut adj[b.0], gb);
                }
                Op::Add(a, b) => {
                    acc(&mut adj[a.0], g.clone());
                    acc(&mut adj[b.0], g);
                }
                Op::AddRow(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut adj[a.0], g);
                    acc(&mut adj[b.0], gb);
                }
                Op::Scale(a, s) => acc(&mut adj[a.0], g * *s),
                Op::Transpose(a) => acc(&mut adj[a.0], g.t().to_owned()),
                Op::SoftmaxRows(a) => {
                    let y = self.values[i].as_ref().expect("computed node");
                    let gy = &g * y;
                    let dot = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut adj[a.0], gy - y * &dot);
                }
                Op::LogSoftmaxRows(a) => {
                    let p = self.values[i]
                        .as_ref()
                        .expect("computed node")
                        .mapv(f64::exp);
                    let total = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut adj[a.0], &g - &(p * &total));
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    acc(&mut adj[beta.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(
                        &mut adj[gamma.0],
                        (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)),
                    );
                    let dxhat = &g * self.value(*gamma);
                    let m = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(xhat.raw_dim());
                    for r in 0..xhat.nrows() {
                        let dh = dxhat.row(r);
                        let h = xhat.row(r);
                        let mean_dh = dh.sum() / m;
                        let mean_dh_h = (&dh * &h).sum() / m;
                        let mut out = dx.row_mut(r);
                        for c in 0..h.len() {
                            out[c] = inv_std[r] * (dh[c] - mean_dh - h[c] * mean_dh_h);
                        }
                    }
                    acc(&mut adj[x.0], dx);
                }
                Op::Gelu(a) => {
                    let d = self
                        .value(*a)
                        .mapv(|x| 0.5 * (1.0 + erf(x * FRAC_1_SQRT_2)) + x * phi(x));
                    acc(&mut adj[a.0], g * d);
                }
                Op::Elu(a) => {
                    let d = self.value(*a).mapv(|x| if x > 0.0 { 1.0 } else { x.exp() });
                    acc(&mut adj[a.0], g * d);
                }
                Op::Ln(a) => acc(&mut adj[a.0], g / self.value(*a)),
                Op::Gather { table, ids } => {
                    let mut gt = Array2::zeros(self.value(*table).raw_dim());
                    for (r, &id) in ids.iter().enumerate() {
                        let mut dst = gt.row_mut(id);
                        dst += &g.row(r);
                    }
                    acc(&mut adj[table.0], gt);
                }
                Op::SliceCols { x, start } => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    gx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(&mut adj[x.0], gx);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(&mut adj[p.0], g.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let h = self.value(*p).nrows();
                        acc(&mut adj[p.0], g.slice(s![off..off + h, ..]).to_owned());
                        off += h;
                    }
                }
                Op::Row { x, row } => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    gx.row_mut(*row).assign(&g.row(0));
                    acc(&mut adj[x.0], gx);
                }
                Op::Element { x, row, col } => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    gx[[*row, *col]] = g[[0, 0]];
                    acc(&mut adj[x.0], gx);
                }
                Op::Sum(x) => {
                    let gx = Array2::from_elem(self.value(*x).raw_dim(), g[[0, 0]]);
                    acc(&mut adj[x.0], gx);
                }
            }
        }
        Gradients { grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central-difference check of d(f)/d(param) for every scalar parameter.
    fn check<F>(store: &mut ParamStore, f: F)
    where
        F: Fn(&mut Tape) -> Var,
    {
        let grads = {
            let mut tape = Tape::new(store);
            let out = f(&mut tape);
            let g = tape.backward(out);
            store.ids().map(|id| g.get(id).cloned()).collect::<Vec<_>>()
        };
        let eval = |s: &ParamStore| {
            let mut tape = Tape::new(s);
            let out = f(&mut tape);
            tape.scalar(out)
        };
        let eps = 1e-6;
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.get(id).dim();
            for r in 0..shape.0 {
                for c in 0..shape.1 {
                    let orig = store.get(id)[[r, c]];
                    store.get_mut(id)[[r, c]] = orig + eps;
                    let up = eval(store);
                    store.get_mut(id)[[r, c]] = orig - eps;
                    let down = eval(store);
                    store.get_mut(id)[[r, c]] = orig;
                    let numeric = (up - down) / (2.0 * eps);
                    let analytic = grads[id.0].as_ref().map_or(0.0, |g| g[[r, c]]);
                    let denom = numeric.abs().max(analytic.abs()).max(1e-6);
                    assert!(
                        (numeric - analytic).abs() / denom < 1e-5,
                        "{}[{r},{c}]: numeric {numeric} analytic {analytic}",
                        store.name(id)
                    );
                }
            }
        }
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[0.3, -0.2, 0.5], [0.1, 0.4, -0.6]]);
        let b = store.add("b", array![[0.2, -0.1], [0.7, 0.3], [-0.5, 0.9]]);
        let bias = store.add("bias", array![[0.05, -0.02]]);
        let gamma = store.add("gamma", array![[1.1, 0.9, 1.3]]);
        let beta = store.add("beta", array![[0.1, 0.0, -0.1]]);
        let table = store.add(
            "table",
            array![[0.2, 0.1, -0.3], [0.5, -0.4, 0.6], [0.0, 0.3, 0.2]],
        );
        check(&mut store, |t| {
            let av = t.param(a);
            let bv = t.param(b);
            let ab = t.matmul(av, bv);
            let bv2 = t.param(bias);
            let biased = t.add_row(ab, bv2);
            let sm = t.softmax_rows(biased);
            let ls = t.log_softmax_rows(biased);
            let g = t.param(gamma);
            let be = t.param(beta);
            let ln = t.layer_norm(av, g, be, 1e-12);
            let ge = t.gelu(ln);
            let el = t.elu(ge);
            let tb = t.param(table);
            let emb = t.gather_rows(tb, &[2, 0, 2]);
            let embt = t.transpose(emb);
            let mixed = t.matmul(el, embt);
            let sl = t.slice_cols(mixed, 1, 3);
            let cc = t.concat_cols(&[sl, sm]);
            let cr = t.concat_rows(&[cc, cc]);
            let r = t.row(cr, 3);
            let e = t.element(ls, 1, 0);
            let p = t.element(sm, 0, 1);
            let lp = t.ln(p);
            let s = t.sum(r);
            let s2 = t.scale(s, 0.7);
            let x = t.add(s2, e);
            t.add(x, lp)
        });
    }

    #[test]
    fn softmax_rows_are_stochastic() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let x = t.constant(array![[1.0, 2.0, 3.0], [1000.0, 1000.0, -1000.0]]);
        let y = t.softmax_rows(x);
        for row in t.value(y).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert!((t.value(y)[[1, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn blob_round_trip_is_bit_exact() {
        let mut store = ParamStore::new();
        store.add("w", array![[0.1, -2.5e-300], [f64::MIN_POSITIVE, 3.0]]);
        store.add("b", array![[1.0 / 3.0]]);
        let back = ParamStore::from_le_bytes(&store.metas(), &store.to_le_bytes()).unwrap();
        assert_eq!(back, store);
        assert!(ParamStore::from_le_bytes(&store.metas(), &[0u8; 8]).is_err());
    }

    #[test]
    fn unused_param_has_no_gradient() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[1.0]]);
        let b = store.add("b", array![[2.0]]);
        let mut t = Tape::new(&store);
        let av = t.param(a);
        let out = t.sum(av);
        let g = t.backward(out);
        assert_eq!(g.get(a).unwrap()[[0, 0]], 1.0);
        assert!(g.get(b).is_none());
    }
}

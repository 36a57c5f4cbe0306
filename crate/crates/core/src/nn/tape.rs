use std::collections::BTreeMap;

use super::loss;
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Lookup { table: ParamId, row: usize },
    Affine { w: ParamId, x: Var, b: Option<ParamId> },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Slice { x: Var, start: usize },
    Concat(Vec<Var>),
    Mean(Vec<Var>),
    Softmax(Var),
    CrossEntropy { probs: Var, gold: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Records a forward computation over a read-only [`ParamStore`] so that
/// gradients of a scalar result can be computed in reverse.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn dim(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::vector(self.nodes[v.0].value.clone())
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; receives no gradient.
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, len: usize) -> Var {
        self.input(vec![0.0; len])
    }

    /// Row `row` of a 2-d parameter table (or the whole parameter when it is a vector and `row == 0`).
    pub fn lookup(&mut self, table: ParamId, row: usize) -> Result<Var> {
        let t = self.params.get(table);
        if row >= t.rows() {
            return Err(Error::dim(self.params.name(table), format!("row < {}", t.rows()), row));
        }
        let value = t.row(row).to_vec();
        Ok(self.push(Op::Lookup { table, row }, value))
    }

    /// `W x (+ b)` where `W` has shape `[out, in]`.
    pub fn affine(&mut self, w: ParamId, x: Var, b: Option<ParamId>) -> Result<Var> {
        let wt = self.params.get(w);
        let (out, inp) = (wt.rows(), wt.cols());
        let xv = &self.nodes[x.0].value;
        if xv.len() != inp {
            return Err(Error::dim(
                self.params.name(w),
                format!("input of length {inp}"),
                xv.len(),
            ));
        }
        let mut y = match b {
            Some(b) => {
                let bt = self.params.get(b);
                if bt.len() != out {
                    return Err(Error::dim(self.params.name(b), out, bt.len()));
                }
                bt.data().to_vec()
            }
            None => vec![0.0; out],
        };
        let wd = wt.data();
        for (r, yr) in y.iter_mut().enumerate() {
            let row = &wd[r * inp..(r + 1) * inp];
            *yr += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(self.push(Op::Affine { w, x, b }, y))
    }

    fn check_same(&self, what: &str, a: Var, b: Var) -> Result<()> {
        let (la, lb) = (self.dim(a), self.dim(b));
        if la != lb {
            return Err(Error::dim(what, la, lb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("add operand", a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(Op::Add(a, b), value))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("mul operand", a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).iter().map(|x| x * factor).collect();
        self.push(Op::Scale(a, factor), value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(Op::Sigmoid(a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh(a), value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|&x| x.max(0.0)).collect();
        self.push(Op::Relu(a), value)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.dim(x);
        if start + len > n {
            return Err(Error::dim("slice source", format!("at least {}", start + len), n));
        }
        let value = self.value(x)[start..start + len].to_vec();
        Ok(self.push(Op::Slice { x, start }, value))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut value = Vec::with_capacity(parts.iter().map(|&p| self.dim(p)).sum());
        for &p in parts {
            value.extend_from_slice(self.value(p));
        }
        self.push(Op::Concat(parts.to_vec()), value)
    }

    /// Elementwise mean of equal-length vectors. An empty list yields a zero
    /// vector of length `len`.
    pub fn mean(&mut self, parts: &[Var], len: usize) -> Result<Var> {
        if parts.is_empty() {
            return Ok(self.zeros(len));
        }
        let mut value = vec![0.0; len];
        for &p in parts {
            let pv = self.value(p);
            if pv.len() != len {
                return Err(Error::dim("mean operand", len, pv.len()));
            }
            for (acc, x) in value.iter_mut().zip(pv) {
                *acc += x;
            }
        }
        let n = parts.len() as f64;
        value.iter_mut().for_each(|v| *v /= n);
        Ok(self.push(Op::Mean(parts.to_vec()), value))
    }

    pub fn softmax(&mut self, s: Var) -> Result<Var> {
        let value = loss::softmax(self.value(s))?;
        Ok(self.push(Op::Softmax(s), value))
    }

    /// `-Σ gold_i · ln(max(probs_i, ε))` as a one-element value.
    pub fn cross_entropy(&mut self, probs: Var, gold: &[f64]) -> Result<Var> {
        let value = loss::cross_entropy(self.value(probs), gold)?;
        Ok(self.push(
            Op::CrossEntropy {
                probs,
                gold: gold.to_vec(),
            },
            vec![value],
        ))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::BackwardBeforeForward);
        }
        let n = self.dim(loss);
        if n != 1 {
            return Err(Error::NonScalarLoss(n));
        }
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        node_grads[loss.0] = Some(vec![1.0]);
        let mut grads = Gradients::new(self.params.len());

        for idx in (0..=loss.0).rev() {
            let Some(g) = node_grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Lookup { table, row } => {
                    let cols = self.params.get(*table).cols();
                    grads.accumulate_row(*table, cols, *row, &g);
                }
                Op::Affine { w, x, b } => {
                    let wt = self.params.get(*w);
                    let (out, inp) = (wt.rows(), wt.cols());
                    let xv = &self.nodes[x.0].value;
                    let gw = grads.dense_mut(*w, out * inp);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        let dst = &mut gw[r * inp..(r + 1) * inp];
                        for (d, xi) in dst.iter_mut().zip(xv) {
                            *d += gr * xi;
                        }
                    }
                    if let Some(b) = b {
                        let gb = grads.dense_mut(*b, out);
                        for (d, gr) in gb.iter_mut().zip(&g) {
                            *d += gr;
                        }
                    }
                    let wd = wt.data();
                    let mut gx = vec![0.0; inp];
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        let row = &wd[r * inp..(r + 1) * inp];
                        for (d, wi) in gx.iter_mut().zip(row) {
                            *d += gr * wi;
                        }
                    }
                    accumulate(&mut node_grads, *x, &gx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut node_grads, *a, &g);
                    accumulate(&mut node_grads, *b, &g);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(g, y)| g * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(g, x)| g * x).collect();
                    accumulate(&mut node_grads, *a, &ga);
                    accumulate(&mut node_grads, *b, &gb);
                }
                Op::Scale(a, factor) => {
                    let ga: Vec<f64> = g.iter().map(|g| g * factor).collect();
                    accumulate(&mut node_grads, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<f64> = g.iter().zip(&node.value).map(|(g, y)| g * y * (1.0 - y)).collect();
                    accumulate(&mut node_grads, *a, &ga);
                }
                Op::Tanh(a) => {
                    let ga: Vec<f64> = g.iter().zip(&node.value).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut node_grads, *a, &ga);
                }
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    let ga: Vec<f64> = g.iter().zip(av).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 }).collect();
                    accumulate(&mut node_grads, *a, &ga);
                }
                Op::Slice { x, start } => {
                    let mut gx = vec![0.0; self.dim(*x)];
                    gx[*start..*start + g.len()].copy_from_slice(&g);
                    accumulate(&mut node_grads, *x, &gx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.dim(p);
                        accumulate(&mut node_grads, p, &g[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::Mean(parts) => {
                    let n = parts.len() as f64;
                    let gp: Vec<f64> = g.iter().map(|g| g / n).collect();
                    for &p in parts {
                        accumulate(&mut node_grads, p, &gp);
                    }
                }
                Op::Softmax(s) => {
                    let p = &node.value;
                    let dot: f64 = g.iter().zip(p).map(|(g, p)| g * p).sum();
                    let gs: Vec<f64> = g.iter().zip(p).map(|(g, p)| p * (g - dot)).collect();
                    accumulate(&mut node_grads, *s, &gs);
                }
                Op::CrossEntropy { probs, gold } => {
                    let pv = &self.nodes[probs.0].value;
                    let gp: Vec<f64> = pv
                        .iter()
                        .zip(gold)
                        .map(|(&p, &d)| {
                            if d == 0.0 || p <= loss::LOG_FLOOR {
                                0.0
                            } else {
                                -g[0] * d / p
                            }
                        })
                        .collect();
                    accumulate(&mut node_grads, *probs, &gp);
                }
            }
        }
        Ok(grads)
    }
}

fn accumulate(node_grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut node_grads[v.0] {
        Some(acc) => {
            for (a, x) in acc.iter_mut().zip(g) {
                *a += x;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
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

/// Gradient for one parameter. Embedding tables accumulate sparsely by row.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamGrad {
    Dense(Vec<f64>),
    Rows {
        cols: usize,
        rows: BTreeMap<usize, Vec<f64>>,
    },
}

impl ParamGrad {
    /// Gradient entry at a flat (row-major) index.
    pub fn at(&self, flat: usize) -> f64 {
        match self {
            ParamGrad::Dense(v) => v[flat],
            ParamGrad::Rows { cols, rows } => rows.get(&(flat / cols)).map_or(0.0, |r| r[flat % cols]),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            ParamGrad::Dense(v) => v.iter_mut().for_each(|x| *x *= factor),
            ParamGrad::Rows { rows, .. } => rows.values_mut().flatten().for_each(|x| *x *= factor),
        }
    }
}

/// Per-parameter gradients produced by [`Tape::backward`]. Parameters the
/// forward pass never touched have no entry and read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    entries: Vec<Option<ParamGrad>>,
}

impl Gradients {
    pub fn new(num_params: usize) -> Self {
        Gradients {
            entries: vec![None; num_params],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&ParamGrad> {
        self.entries.get(id.0).and_then(|e| e.as_ref())
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut ParamGrad> {
        self.entries.get_mut(id.0).and_then(|e| e.as_mut())
    }

    pub fn at(&self, id: ParamId, flat: usize) -> f64 {
        self.get(id).map_or(0.0, |g| g.at(flat))
    }

    /// Dense gradient shaped like the parameter; zeros when untouched.
    pub fn dense(&self, id: ParamId, store: &ParamStore) -> Tensor {
        let shape = store.get(id).shape().to_vec();
        let mut t = Tensor::zeros(&shape);
        match self.get(id) {
            None => {}
            Some(ParamGrad::Dense(v)) => t.data_mut().copy_from_slice(v),
            Some(ParamGrad::Rows { cols, rows }) => {
                for (&r, v) in rows {
                    t.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(v);
                }
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().flatten().all(|g| match g {
            ParamGrad::Dense(v) => v.iter().all(|x| x.is_finite()),
            ParamGrad::Rows { rows, .. } => rows.values().flatten().all(|x| x.is_finite()),
        })
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamGrad)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }

    fn dense_mut(&mut self, id: ParamId, len: usize) -> &mut Vec<f64> {
        let slot = &mut self.entries[id.0];
        if let Some(ParamGrad::Rows { cols, rows }) = slot {
            let mut dense = vec![0.0; len];
            for (&r, v) in rows.iter() {
                dense[r * *cols..(r + 1) * *cols].copy_from_slice(v);
            }
            *slot = Some(ParamGrad::Dense(dense));
        }
        match slot.get_or_insert_with(|| ParamGrad::Dense(vec![0.0; len])) {
            ParamGrad::Dense(v) => v,
            ParamGrad::Rows { .. } => unreachable!(),
        }
    }

    fn accumulate_row(&mut self, id: ParamId, cols: usize, row: usize, g: &[f64]) {
        let slot = self.entries[id.0].get_or_insert_with(|| ParamGrad::Rows {
            cols,
            rows: BTreeMap::new(),
        });
        match slot {
            ParamGrad::Dense(v) => {
                for (d, x) in v[row * cols..(row + 1) * cols].iter_mut().zip(g) {
                    *d += x;
                }
            }
            ParamGrad::Rows { rows, .. } => {
                let r = rows.entry(row).or_insert_with(|| vec![0.0; cols]);
                for (d, x) in r.iter_mut().zip(g) {
                    *d += x;
                }
            }
        }
    }
}

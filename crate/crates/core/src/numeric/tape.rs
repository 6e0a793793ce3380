//! Reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its value. [`Tape::backward`] walks the nodes in reverse, accumulating
//! gradients into intermediate nodes and into the [`ParamStore`] the leaves
//! were read from. Tapes are built per forward pass and thrown away after.

use crate::error::{Error, Result};
use crate::numeric::tensor::{ParamId, ParamStore, Tensor};

/// Smallest probability fed to `ln` in cross-entropy; keeps the loss finite
/// when a softmax saturates.
const PROB_FLOOR: f64 = 1e-300;

/// Floors a probability, letting NaN through (`f64::max` would drop it).
fn floored(p: f64) -> f64 {
    if p.is_nan() {
        p
    } else {
        p.max(PROB_FLOOR)
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    GatherParam { param: ParamId, ids: Vec<usize> },
    Gather { src: Var, ids: Vec<usize> },
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<f64>),
    Scale(Var, f64),
    Tanh(Var),
    Softmax(Var),
    SliceCols { src: Var, start: usize },
    SliceRows { src: Var, start: usize },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MeanRows { src: Var, count: usize },
    Sum(Var),
    CrossEntropy {
        probs: Var,
        gold: Vec<usize>,
        weights: Vec<f64>,
        total: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    grad: Option<Vec<f64>>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::new(vec![rows, cols], data).expect("internal shape bookkeeping")
}

/// `c = a · b` with explicit strides, through the blocked GEMM kernel.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    // SAFETY: the asserts above bound every element the kernel reads; `c`
    // holds exactly m*n elements with row stride n.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss with respect to `v`, if any flowed.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        dims(&self.nodes[v.0].value)
    }

    /// Records a value that no gradient flows into. Higher-rank tensors are
    /// folded to `rows × rest`.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let (r, c) = dims(&t);
        let t = matrix(r, c, t.into_data());
        self.push(t, Op::Constant, false)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let t = store.tensor(id);
        let (r, c) = dims(t);
        let value = matrix(r, c, t.data().to_vec());
        self.push(value, Op::Param(id), t.requires_grad)
    }

    /// Row lookup straight from a stored table; the backward pass
    /// scatter-adds into the table's gradient without copying the table.
    pub fn gather_param(&mut self, store: &ParamStore, id: ParamId, ids: &[usize]) -> Result<Var> {
        let table = store.tensor(id);
        let (rows, cols) = dims(table);
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            if i >= rows {
                return Err(Error::Index(format!(
                    "row {i} out of range for {} with {rows} rows",
                    store.name(id)
                )));
            }
            data.extend_from_slice(table.row(i));
        }
        let value = matrix(ids.len(), cols, data);
        Ok(self.push(
            value,
            Op::GatherParam {
                param: id,
                ids: ids.to_vec(),
            },
            table.requires_grad,
        ))
    }

    pub fn gather(&mut self, src: Var, ids: &[usize]) -> Result<Var> {
        let (rows, cols) = self.dims(src);
        let table = &self.nodes[src.0].value;
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            if i >= rows {
                return Err(Error::Index(format!("row {i} out of range for {rows} rows")));
            }
            data.extend_from_slice(table.row(i));
        }
        let value = matrix(ids.len(), cols, data);
        let needs = self.needs(src);
        Ok(self.push(
            value,
            Op::Gather {
                src,
                ids: ids.to_vec(),
            },
            needs,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{m}x{k}] x [{k2}x{n}]")));
        }
        let out = gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k, 1),
            self.value(b).data(),
            (n, 1),
        );
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(matrix(m, n, out), Op::MatMul(a, b), needs))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (n, k2) = self.dims(b);
        if k != k2 {
            return Err(Error::shape("matmul_nt", format!("[{m}x{k}] x [{n}x{k2}]^T")));
        }
        let out = gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k, 1),
            self.value(b).data(),
            (1, k),
        );
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(matrix(m, n, out), Op::MatMulNt(a, b), needs))
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(Error::shape(op, format!("{da:?} vs {db:?}")));
        }
        Ok(da)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(matrix(r, c, data), Op::Add(a, b), needs))
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if self.dims(row) != (1, c) {
            return Err(Error::shape(
                "add_row",
                format!("[{r}x{c}] + {:?}", self.dims(row)),
            ));
        }
        let bias = self.value(row).data();
        let data = self
            .value(a)
            .data()
            .chunks(c)
            .flat_map(|chunk| chunk.iter().zip(bias).map(|(x, b)| x + b))
            .collect();
        let needs = self.needs(a) || self.needs(row);
        Ok(self.push(matrix(r, c, data), Op::AddRow(a, row), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(matrix(r, c, data), Op::Mul(a, b), needs))
    }

    /// Element-wise product with a fixed factor (masks, dropout).
    pub fn mul_const(&mut self, a: Var, factor: &Tensor) -> Result<Var> {
        let (r, c) = self.dims(a);
        if dims(factor) != (r, c) {
            return Err(Error::shape(
                "mul_const",
                format!("[{r}x{c}] vs {:?}", factor.shape()),
            ));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(factor.data())
            .map(|(x, m)| x * m)
            .collect();
        let needs = self.needs(a);
        Ok(self.push(
            matrix(r, c, data),
            Op::MulConst(a, factor.data().to_vec()),
            needs,
        ))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let (r, c) = self.dims(a);
        let data = self.value(a).data().iter().map(|x| x * s).collect();
        let needs = self.needs(a);
        self.push(matrix(r, c, data), Op::Scale(a, s), needs)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let data = self.value(a).data().iter().map(|x| x.tanh()).collect();
        let needs = self.needs(a);
        self.push(matrix(r, c, data), Op::Tanh(a), needs)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if c == 0 {
            return Err(Error::shape("softmax", "empty last axis"));
        }
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(c) {
            softmax_in_place(row);
        }
        let needs = self.needs(a);
        Ok(self.push(matrix(r, c, data), Op::Softmax(a), needs))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if start >= end || end > c {
            return Err(Error::shape("slice_cols", format!("{start}..{end} of {c} columns")));
        }
        let data = self
            .value(a)
            .data()
            .chunks(c)
            .flat_map(|row| row[start..end].iter().copied())
            .collect();
        let needs = self.needs(a);
        Ok(self.push(matrix(r, end - start, data), Op::SliceCols { src: a, start }, needs))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if start >= end || end > r {
            return Err(Error::shape("slice_rows", format!("{start}..{end} of {r} rows")));
        }
        let data = self.value(a).data()[start * c..end * c].to_vec();
        let needs = self.needs(a);
        Ok(self.push(matrix(end - start, c, data), Op::SliceRows { src: a, start }, needs))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::shape("concat_cols", "nothing to concatenate"))?;
        let r = self.dims(first).0;
        if let Some(bad) = parts.iter().find(|p| self.dims(**p).0 != r) {
            return Err(Error::shape(
                "concat_cols",
                format!("{r} rows vs {:?}", self.dims(*bad)),
            ));
        }
        let c: usize = parts.iter().map(|p| self.dims(*p).1).sum();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(i));
            }
        }
        let needs = parts.iter().any(|p| self.needs(*p));
        Ok(self.push(matrix(r, c, data), Op::ConcatCols(parts.to_vec()), needs))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::shape("concat_rows", "nothing to concatenate"))?;
        let c = self.dims(first).1;
        if let Some(bad) = parts.iter().find(|p| self.dims(**p).1 != c) {
            return Err(Error::shape(
                "concat_rows",
                format!("{c} columns vs {:?}", self.dims(*bad)),
            ));
        }
        let r: usize = parts.iter().map(|p| self.dims(*p).0).sum();
        let mut data = Vec::with_capacity(r * c);
        for p in parts {
            data.extend_from_slice(self.value(*p).data());
        }
        let needs = parts.iter().any(|p| self.needs(*p));
        Ok(self.push(matrix(r, c, data), Op::ConcatRows(parts.to_vec()), needs))
    }

    /// Mean of the first `count` rows, as a `1 × c` row.
    pub fn mean_rows(&mut self, a: Var, count: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if count == 0 || count > r {
            return Err(Error::shape("mean_rows", format!("mean of {count} rows out of {r}")));
        }
        let mut data = vec![0.0; c];
        for row in self.value(a).data().chunks(c).take(count) {
            for (acc, v) in data.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let inv = 1.0 / count as f64;
        data.iter_mut().for_each(|v| *v *= inv);
        let needs = self.needs(a);
        Ok(self.push(matrix(1, c, data), Op::MeanRows { src: a, count }, needs))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(total), Op::Sum(a), needs)
    }

    /// Weighted mean of `-ln p[row, gold[row]]` over rows of a probability matrix.
    ///
    /// `weights` defaults to all ones; a zero weight drops the row from both
    /// numerator and denominator.
    pub fn cross_entropy(&mut self, probs: Var, gold: &[usize], weights: Option<&[f64]>) -> Result<Var> {
        let (r, c) = self.dims(probs);
        if gold.len() != r {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} gold labels for {r} rows", gold.len()),
            ));
        }
        if let Some(&bad) = gold.iter().find(|&&g| g >= c) {
            return Err(Error::Index(format!("gold class {bad} out of range for {c} classes")));
        }
        let weights = match weights {
            Some(w) if w.len() != r => {
                return Err(Error::shape(
                    "cross_entropy",
                    format!("{} weights for {r} rows", w.len()),
                ))
            }
            Some(w) => w.to_vec(),
            None => vec![1.0; r],
        };
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Contract("cross-entropy weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Contract("cross-entropy over zero unmasked rows".into()));
        }
        let p = self.value(probs);
        let loss = gold
            .iter()
            .zip(&weights)
            .enumerate()
            .filter(|(_, (_, w))| **w != 0.0)
            .map(|(row, (&g, w))| -w * floored(p.get(row, g)).ln())
            .sum::<f64>()
            / total;
        let needs = self.needs(probs);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs,
                gold: gold.to_vec(),
                weights,
                total,
            },
            needs,
        ))
    }

    fn accumulate(&mut self, v: Var, contrib: Vec<f64>) {
        let node = &mut self.nodes[v.0];
        if !node.needs_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(contrib).for_each(|(a, b)| *a += b),
            None => node.grad = Some(contrib),
        }
    }

    /// Back-propagates from the scalar `loss`, leaving per-node gradients on
    /// the tape and adding parameter gradients into `store`.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let shape = self.dims(loss);
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {shape:?}"
            )));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        if !self.needs(loss) {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            let (rows, cols) = dims(&self.nodes[idx].value);
            // Temporarily take the op out so its inputs can be borrowed freely.
            let op = std::mem::replace(&mut self.nodes[idx].op, Op::Constant);
            match &op {
                Op::Constant => {}
                Op::Param(id) => {
                    if store.tensor(*id).requires_grad {
                        let buf = store.grad_buffer(*id);
                        buf.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                    }
                }
                Op::GatherParam { param, ids } => {
                    if store.tensor(*param).requires_grad {
                        let buf = store.grad_buffer(*param);
                        for (r, &i) in ids.iter().enumerate() {
                            let dst = &mut buf[i * cols..(i + 1) * cols];
                            dst.iter_mut()
                                .zip(&g[r * cols..(r + 1) * cols])
                                .for_each(|(a, b)| *a += b);
                        }
                    }
                }
                Op::Gather { src, ids } => {
                    let n = self.nodes[src.0].value.len();
                    let mut contrib = vec![0.0; n];
                    for (r, &i) in ids.iter().enumerate() {
                        contrib[i * cols..(i + 1) * cols]
                            .iter_mut()
                            .zip(&g[r * cols..(r + 1) * cols])
                            .for_each(|(a, b)| *a += b);
                    }
                    self.accumulate(*src, contrib);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.dims(*a);
                    let n = cols;
                    if self.needs(*a) {
                        // dA = dC · Bᵀ
                        let bt = self.value(*b).data();
                        let da = gemm(m, n, k, &g, (n, 1), bt, (1, n));
                        self.accumulate(*a, da);
                    }
                    if self.needs(*b) {
                        // dB = Aᵀ · dC
                        let at = self.value(*a).data();
                        let db = gemm(k, m, n, at, (1, k), &g, (n, 1));
                        self.accumulate(*b, db);
                    }
                }
                Op::MatMulNt(a, b) => {
                    let (m, k) = self.dims(*a);
                    let n = cols;
                    if self.needs(*a) {
                        // dA = dC · B
                        let bv = self.value(*b).data();
                        let da = gemm(m, n, k, &g, (n, 1), bv, (k, 1));
                        self.accumulate(*a, da);
                    }
                    if self.needs(*b) {
                        // dB = dCᵀ · A
                        let av = self.value(*a).data();
                        let db = gemm(n, m, k, &g, (1, n), av, (k, 1));
                        self.accumulate(*b, db);
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(*a, g.clone());
                    self.accumulate(*b, g.clone());
                }
                Op::AddRow(a, row) => {
                    let mut db = vec![0.0; cols];
                    for chunk in g.chunks(cols) {
                        db.iter_mut().zip(chunk).for_each(|(acc, v)| *acc += v);
                    }
                    self.accumulate(*row, db);
                    self.accumulate(*a, g.clone());
                }
                Op::Mul(a, b) => {
                    let da = g.iter().zip(self.value(*b).data()).map(|(x, y)| x * y).collect();
                    let db = g.iter().zip(self.value(*a).data()).map(|(x, y)| x * y).collect();
                    self.accumulate(*a, da);
                    self.accumulate(*b, db);
                }
                Op::MulConst(a, factor) => {
                    let da = g.iter().zip(factor).map(|(x, m)| x * m).collect();
                    self.accumulate(*a, da);
                }
                Op::Scale(a, s) => {
                    let da = g.iter().map(|x| x * s).collect();
                    self.accumulate(*a, da);
                }
                Op::Tanh(a) => {
                    let y = self.nodes[idx].value.data();
                    let da = g.iter().zip(y).map(|(x, y)| x * (1.0 - y * y)).collect();
                    self.accumulate(*a, da);
                }
                Op::Softmax(a) => {
                    let p = self.nodes[idx].value.data();
                    let mut da = vec![0.0; rows * cols];
                    for ((out, pr), gr) in da.chunks_mut(cols).zip(p.chunks(cols)).zip(g.chunks(cols)) {
                        let dot: f64 = pr.iter().zip(gr).map(|(p, g)| p * g).sum();
                        for ((o, p), g) in out.iter_mut().zip(pr).zip(gr) {
                            *o = p * (g - dot);
                        }
                    }
                    self.accumulate(*a, da);
                }
                Op::SliceCols { src, start } => {
                    let (r, c) = self.dims(*src);
                    let mut da = vec![0.0; r * c];
                    for (dst, gr) in da.chunks_mut(c).zip(g.chunks(cols)) {
                        dst[*start..*start + cols].copy_from_slice(gr);
                    }
                    self.accumulate(*src, da);
                }
                Op::SliceRows { src, start } => {
                    let (r, c) = self.dims(*src);
                    let mut da = vec![0.0; r * c];
                    da[start * c..(start + rows) * c].copy_from_slice(&g);
                    self.accumulate(*src, da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.dims(*p).1;
                        let dp = g
                            .chunks(cols)
                            .flat_map(|row| row[offset..offset + pc].iter().copied())
                            .collect();
                        self.accumulate(*p, dp);
                        offset += pc;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        self.accumulate(*p, g[offset..offset + n].to_vec());
                        offset += n;
                    }
                }
                Op::MeanRows { src, count } => {
                    let (r, c) = self.dims(*src);
                    let inv = 1.0 / *count as f64;
                    let mut da = vec![0.0; r * c];
                    for row in da.chunks_mut(c).take(*count) {
                        row.iter_mut().zip(&g).for_each(|(d, g)| *d = g * inv);
                    }
                    self.accumulate(*src, da);
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    self.accumulate(*a, vec![g[0]; n]);
                }
                Op::CrossEntropy {
                    probs,
                    gold,
                    weights,
                    total,
                } => {
                    let p = self.value(*probs);
                    let c = p.cols();
                    let mut dp = vec![0.0; p.len()];
                    for (row, (&gc, &w)) in gold.iter().zip(weights).enumerate() {
                        if w != 0.0 {
                            let prob = floored(p.get(row, gc));
                            dp[row * c + gc] = -g[0] * w / (total * prob);
                        }
                    }
                    self.accumulate(*probs, dp);
                }
            }
            self.nodes[idx].grad = Some(g);
            self.restore(idx, op);
        }
        Ok(())
    }

    fn restore(&mut self, idx: usize, op: Op) {
        self.nodes[idx].op = op;
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::numeric::tensor::ParamKind;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn matmul_small_cases() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let eye = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let c = tape.matmul(a, eye).unwrap();
        assert_eq!(tape.value(c).data(), [1.0, 2.0, 3.0, 4.0]);

        let row = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let col = tape.constant(Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap());
        let c = tape.matmul(row, col).unwrap();
        assert_eq!(tape.value(c).data(), [11.0]);

        let bad = tape.constant(Tensor::zeros(&[3, 1]));
        assert!(matches!(tape.matmul(a, bad), Err(Error::Shape { .. })));
    }

    #[test]
    fn softmax_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap());
        let p = tape.softmax(x).unwrap();
        assert!(tape.value(p).data().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));

        let x = tape.constant(Tensor::from_rows(&[vec![1000.0, 0.0]]).unwrap());
        let p = tape.softmax(x).unwrap();
        assert_eq!(tape.value(p).data()[0], 1.0);
        assert!(tape.value(p).data()[1] < 1e-300);

        let x = tape.constant(Tensor::from_rows(&[vec![1f64.ln(), 2f64.ln(), 3f64.ln()]]).unwrap());
        let p = tape.softmax(x).unwrap();
        for (got, want) in tape.value(p).data().iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap());
        let l = tape.cross_entropy(p, &[1], None).unwrap();
        assert_eq!(tape.scalar(l), 0.0);

        let p = tape.constant(Tensor::filled(&[2, 3], 1.0 / 3.0));
        let l = tape.cross_entropy(p, &[0, 2], None).unwrap();
        assert!((tape.scalar(l) - 3f64.ln()).abs() < 1e-15);

        let p = tape.constant(Tensor::from_rows(&[vec![0.5, 0.5], vec![1e-9, 1.0]]).unwrap());
        let l = tape.cross_entropy(p, &[0, 0], Some(&[1.0, 0.0])).unwrap();
        assert!((tape.scalar(l) - 2f64.ln()).abs() < 1e-15);

        assert!(matches!(tape.cross_entropy(p, &[0, 2], None), Err(Error::Index(_))));

        let nan = tape.constant(Tensor::from_rows(&[vec![f64::NAN, 0.5]]).unwrap());
        let l = tape.cross_entropy(nan, &[0], None).unwrap();
        assert!(tape.scalar(l).is_nan());
        assert!(matches!(tape.cross_entropy(p, &[0, 0], Some(&[0.0, 0.0])), Err(Error::Contract(_))));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut store = ParamStore::new();
        let id = store.add("w", ParamKind::Weight, Tensor::filled(&[2, 3], 0.7).with_grad());
        store.zero_grad();
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let s = tape.sum(w);
        tape.backward(s, &mut store).unwrap();
        assert_eq!(store.tensor(id).grad.as_deref().unwrap(), [1.0; 6]);
    }

    #[test]
    fn squared_norm_gradient_is_twice_weights() {
        let values = vec![0.5, -1.0, 2.0, 0.25];
        let mut store = ParamStore::new();
        let id = store.add("w", ParamKind::Weight, Tensor::new(vec![2, 2], values.clone()).unwrap().with_grad());
        store.zero_grad();
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let sq = tape.mul(w, w).unwrap();
        let s = tape.sum(sq);
        tape.backward(s, &mut store).unwrap();
        let g = store.tensor(id).grad.as_deref().unwrap();
        for (g, w) in g.iter().zip(&values) {
            assert_eq!(*g, 2.0 * w);
        }
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.backward(x, &mut store), Err(Error::Contract(_))));
    }

    /// A graph touching every differentiable op, as a function of the store.
    fn composite(tape: &mut Tape, store: &ParamStore, ids: &[ParamId]) -> Var {
        let (a, b, r, e) = (ids[0], ids[1], ids[2], ids[3]);
        let a = tape.param(store, a);
        let b = tape.param(store, b);
        let r = tape.param(store, r);
        let x = tape.gather_param(store, e, &[2, 0, 2]).unwrap();
        let h = tape.matmul(x, a).unwrap();
        let h = tape.add_row(h, r).unwrap();
        let h = tape.tanh(h);
        let g = tape.gather(h, &[1, 1, 0]).unwrap();
        let h2 = tape.mul(h, g).unwrap();
        let m = tape.mul_const(h2, &Tensor::new(vec![3, 4], (0..12).map(|i| 0.5 + i as f64 * 0.1).collect()).unwrap()).unwrap();
        let nt = tape.matmul_nt(m, h).unwrap();
        let nt = tape.scale(nt, 0.7);
        let att = tape.softmax(nt).unwrap();
        let mixed = tape.matmul(att, h).unwrap();
        let left = tape.slice_cols(mixed, 0, 2).unwrap();
        let right = tape.slice_cols(mixed, 2, 4).unwrap();
        let sum = tape.add(left, right).unwrap();
        let cat = tape.concat_cols(&[sum, left]).unwrap();
        let top = tape.slice_rows(cat, 0, 2).unwrap();
        let stacked = tape.concat_rows(&[top, cat]).unwrap();
        let pooled = tape.mean_rows(stacked, 4).unwrap();
        let logits = tape.matmul(pooled, b).unwrap();
        let probs = tape.softmax(logits).unwrap();
        let rows = tape.concat_rows(&[probs, probs]).unwrap();
        tape.cross_entropy(rows, &[1, 2], Some(&[0.3, 0.7])).unwrap()
    }

    fn composite_store() -> (ParamStore, Vec<ParamId>) {
        let mut store = ParamStore::new();
        let vals = |n: usize, k: f64| (0..n).map(|i| ((i as f64 + 1.0) * k).sin() * 0.8).collect::<Vec<_>>();
        let ids = vec![
            store.add("a", ParamKind::Weight, Tensor::new(vec![3, 4], vals(12, 1.3)).unwrap().with_grad()),
            store.add("b", ParamKind::Weight, Tensor::new(vec![4, 3], vals(12, 0.7)).unwrap().with_grad()),
            store.add("r", ParamKind::Bias, Tensor::new(vec![1, 4], vals(4, 2.1)).unwrap().with_grad()),
            store.add("e", ParamKind::Weight, Tensor::new(vec![3, 3], vals(9, 0.9)).unwrap().with_grad()),
        ];
        (store, ids)
    }

    #[test]
    fn composite_matches_finite_differences() {
        let (mut store, ids) = composite_store();
        store.zero_grad();
        let mut tape = Tape::new();
        let loss = composite(&mut tape, &store, &ids);
        tape.backward(loss, &mut store).unwrap();

        let eps = 1e-5;
        for &id in &ids {
            let analytic = store.tensor(id).grad.clone().unwrap();
            for i in 0..analytic.len() {
                let eval = |store: &ParamStore| {
                    let mut t = Tape::new();
                    let l = composite(&mut t, store, &ids);
                    t.scalar(l)
                };
                let mut probe = store.clone();
                probe.tensor_mut(id).data_mut()[i] += eps;
                let up = eval(&probe);
                probe.tensor_mut(id).data_mut()[i] -= 2.0 * eps;
                let down = eval(&probe);
                let numeric = (up - down) / (2.0 * eps);
                let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-8);
                assert!(
                    rel < 1e-4 || (analytic[i] - numeric).abs() < 1e-10,
                    "{}[{i}]: analytic {} numeric {numeric}",
                    store.name(id),
                    analytic[i]
                );
            }
        }
    }

    proptest! {
        #[test]
        fn matmul_matches_triple_loop(
            m in 1usize..=8, k in 1usize..=8, n in 1usize..=8,
            seed in prop::collection::vec(-3.0f64..3.0, 128),
        ) {
            let a: Vec<f64> = seed.iter().cycle().take(m * k).copied().collect();
            let b: Vec<f64> = seed.iter().rev().cycle().take(k * n).copied().collect();
            let mut tape = Tape::new();
            let av = tape.constant(Tensor::new(vec![m, k], a.clone()).unwrap());
            let bv = tape.constant(Tensor::new(vec![k, n], b.clone()).unwrap());
            let c = tape.matmul(av, bv).unwrap();
            for (got, want) in tape.value(c).data().iter().zip(naive_matmul(&a, &b, m, k, n)) {
                prop_assert!((got - want).abs() < 1e-12);
            }
            // a·(bᵀ)ᵀ through the transposed kernel
            let mut bt = vec![0.0; n * k];
            for p in 0..k {
                for j in 0..n {
                    bt[j * k + p] = b[p * n + j];
                }
            }
            let btv = tape.constant(Tensor::new(vec![n, k], bt).unwrap());
            let c2 = tape.matmul_nt(av, btv).unwrap();
            prop_assert_eq!(tape.value(c).data(), tape.value(c2).data());
        }

        #[test]
        fn softmax_rows_sum_to_one(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 5), 1..6)) {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::from_rows(&rows).unwrap());
            let p = tape.softmax(x).unwrap();
            for row in tape.value(p).data().chunks(5) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

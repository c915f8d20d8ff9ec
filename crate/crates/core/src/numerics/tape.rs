//! Reverse-mode differentiation over a flat, topologically ordered tape.
//!
//! Every primitive appends one node holding its forward value. Nodes only
//! ever reference earlier nodes, so a single reverse sweep visits each node
//! exactly once. Parameters enter the tape through [`Tape::param`], which
//! copies the current value once per tape; [`Tape::backward`] consumes the
//! tape and accumulates gradients into the owning [`ParamSet`].

use std::collections::HashMap;

use super::tensor::gemm;
use super::{NumericsError, ParamId, ParamSet, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols { src: Var, start: usize },
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Embedding { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<usize>, pad: usize, probs: Vec<f64>, count: usize },
    Sum(Var),
    Blend { new: Var, old: Var, mask: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    needs_grad: bool,
    op: Op,
}

impl Node {
    fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [] => (1, 1),
            [n] => (1, *n),
            [r, c] => (*r, *c),
            s => (s[..s.len() - 1].iter().product(), s[s.len() - 1]),
        }
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

type Result<T> = std::result::Result<T, NumericsError>;

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

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, needs_grad: bool, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            needs_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn ng(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape nodes are well formed")
    }

    /// Records a constant (or a gradient-tracked free tensor when
    /// `t.requires_grad`; its gradient is reported by [`Tape::backward_inputs`]).
    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), t.requires_grad, Op::Input)
    }

    /// Records a parameter leaf. Repeated calls for the same id return the
    /// same node.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        if let Some(v) = self.params.get(&id) {
            return *v;
        }
        let t = params.get(id);
        let v = self.push(t.shape().to_vec(), t.data().to_vec(), t.requires_grad, Op::Param(id));
        self.params.insert(id, v);
        v
    }

    /// Matrix product of 2-D operands (vectors are treated as one row).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.node(a).dims2();
        let (k2, n) = self.node(b).dims2();
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.node(a).value, false, &self.node(b).value, false, 0.0, &mut out);
        let ng = self.ng(&[a, b]);
        Ok(self.push(vec![m, n], out, ng, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.node(a).shape != self.node(b).shape {
            return Err(self.mismatch("add", a, b));
        }
        let out = zip_map(&self.node(a).value, &self.node(b).value, |x, y| x + y);
        let shape = self.node(a).shape.clone();
        let ng = self.ng(&[a, b]);
        Ok(self.push(shape, out, ng, Op::Add(a, b)))
    }

    /// Adds the vector `bias` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, c) = self.node(a).dims2();
        if self.node(bias).value.len() != c {
            return Err(self.mismatch("add_bias", a, bias));
        }
        let b = &self.node(bias).value;
        let mut out = self.node(a).value.clone();
        for row in out.chunks_exact_mut(c) {
            row.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        let shape = self.node(a).shape.clone();
        let ng = self.ng(&[a, bias]);
        Ok(self.push(shape, out, ng, Op::AddBias(a, bias)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.node(a).shape != self.node(b).shape {
            return Err(self.mismatch("mul", a, b));
        }
        let out = zip_map(&self.node(a).value, &self.node(b).value, |x, y| x * y);
        let shape = self.node(a).shape.clone();
        let ng = self.ng(&[a, b]);
        Ok(self.push(shape, out, ng, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.node(a).value.iter().map(|x| x * s).collect();
        let shape = self.node(a).shape.clone();
        let ng = self.ng(&[a]);
        self.push(shape, out, ng, Op::Scale(a, s))
    }

    /// Concatenates 2-D operands with equal row counts along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(NumericsError::Empty("concat"))?;
        let (rows, _) = self.node(first).dims2();
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = self.node(*p).dims2();
            if r != rows {
                return Err(self.mismatch("concat", first, *p));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; rows * total];
        let mut offset = 0;
        for (p, w) in parts.iter().zip(&widths) {
            let src = &self.node(*p).value;
            for r in 0..rows {
                out[r * total + offset..r * total + offset + w].copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let ng = self.ng(parts);
        Ok(self.push(vec![rows, total], out, ng, Op::Concat(parts.to_vec())))
    }

    /// Stacks 2-D operands with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(NumericsError::Empty("concat_rows"))?;
        let (_, cols) = self.node(first).dims2();
        let mut rows = 0;
        for p in parts {
            let (r, c) = self.node(*p).dims2();
            if c != cols {
                return Err(self.mismatch("concat_rows", first, *p));
            }
            rows += r;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for p in parts {
            out.extend_from_slice(&self.node(*p).value);
        }
        let ng = self.ng(parts);
        Ok(self.push(vec![rows, cols], out, ng, Op::ConcatRows(parts.to_vec())))
    }

    /// Columns `start..start + width` of a 2-D operand.
    pub fn slice_cols(&mut self, src: Var, start: usize, width: usize) -> Result<Var> {
        let (rows, cols) = self.node(src).dims2();
        if start + width > cols {
            return Err(NumericsError::Dimension {
                op: "slice_cols",
                left: self.node(src).shape.clone(),
                right: vec![start, width],
            });
        }
        let v = &self.node(src).value;
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            out.extend_from_slice(&v[r * cols + start..r * cols + start + width]);
        }
        let ng = self.ng(&[src]);
        Ok(self.push(vec![rows, width], out, ng, Op::SliceCols { src, start }))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.node(a).value.iter().map(|&x| sigmoid(x)).collect();
        let shape = self.node(a).shape.clone();
        let ng = self.ng(&[a]);
        self.push(shape, out, ng, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.node(a).value.iter().map(|x| x.tanh()).collect();
        let shape = self.node(a).shape.clone();
        let ng = self.ng(&[a]);
        self.push(shape, out, ng, Op::Tanh(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (_, c) = self.node(a).dims2();
        let mut out = self.node(a).value.clone();
        for row in out.chunks_exact_mut(c.max(1)) {
            softmax_in_place(row);
        }
        let shape = self.node(a).shape.clone();
        let ng = self.ng(&[a]);
        self.push(shape, out, ng, Op::Softmax(a))
    }

    /// Gathers rows of a 2-D `table`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, d) = self.node(table).dims2();
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(NumericsError::IndexOutOfRange { index: bad, len: rows });
        }
        let t = &self.node(table).value;
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&t[i * d..(i + 1) * d]);
        }
        let ng = self.ng(&[table]);
        Ok(self.push(vec![ids.len(), d], out, ng, Op::Embedding { table, ids: ids.to_vec() }))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, ignoring positions whose target is `pad`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], pad: usize) -> Result<Var> {
        let (rows, v) = self.node(logits).dims2();
        if rows != targets.len() {
            return Err(NumericsError::Dimension {
                op: "cross_entropy",
                left: self.node(logits).shape.clone(),
                right: vec![targets.len()],
            });
        }
        let mut probs = self.node(logits).value.clone();
        let mut total = 0.0;
        let mut count = 0;
        for (row, &t) in probs.chunks_exact_mut(v).zip(targets) {
            if t == pad {
                continue;
            }
            if t >= v {
                return Err(NumericsError::IndexOutOfRange { index: t, len: v });
            }
            total -= log_softmax_at(row, t);
            softmax_in_place(row);
            count += 1;
        }
        if count == 0 {
            return Err(NumericsError::DegenerateBatch);
        }
        let loss = total / count as f64;
        let ng = self.ng(&[logits]);
        Ok(self.push(
            Vec::new(),
            vec![loss],
            ng,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                pad,
                probs,
                count,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.node(a).value.iter().sum();
        let ng = self.ng(&[a]);
        self.push(Vec::new(), vec![s], ng, Op::Sum(a))
    }

    /// Row-wise select: `mask[r] * new[r] + (1 - mask[r]) * old[r]`.
    pub fn blend(&mut self, new: Var, old: Var, mask: &[f64]) -> Result<Var> {
        if self.node(new).shape != self.node(old).shape {
            return Err(self.mismatch("blend", new, old));
        }
        let (rows, c) = self.node(new).dims2();
        if mask.len() != rows {
            return Err(NumericsError::Dimension {
                op: "blend",
                left: self.node(new).shape.clone(),
                right: vec![mask.len()],
            });
        }
        let a = &self.node(new).value;
        let b = &self.node(old).value;
        let mut out = Vec::with_capacity(a.len());
        for r in 0..rows {
            let m = mask[r];
            for j in 0..c {
                out.push(m * a[r * c + j] + (1.0 - m) * b[r * c + j]);
            }
        }
        let shape = self.node(new).shape.clone();
        let ng = self.ng(&[new, old]);
        Ok(self.push(shape, out, ng, Op::Blend { new, old, mask: mask.to_vec() }))
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> NumericsError {
        NumericsError::Dimension {
            op,
            left: self.node(a).shape.clone(),
            right: self.node(b).shape.clone(),
        }
    }

    /// Back-propagates from the scalar `loss`, accumulating parameter
    /// gradients into `params`. Consumes the tape.
    pub fn backward(self, loss: Var, params: &mut ParamSet) -> Result<()> {
        let grads = self.sweep(loss)?;
        for (i, g) in grads.into_iter().enumerate() {
            if let (Some(g), Op::Param(id)) = (g, &self.nodes[i].op) {
                let t = params.get_mut(*id);
                if t.requires_grad {
                    t.accumulate_grad(&g);
                }
            }
        }
        Ok(())
    }

    /// Gradients of `loss` with respect to the given input nodes.
    pub fn backward_inputs(self, loss: Var, inputs: &[Var]) -> Result<Vec<Vec<f64>>> {
        let mut grads = self.sweep(loss)?;
        Ok(inputs
            .iter()
            .map(|v| grads[v.0].take().unwrap_or_else(|| vec![0.0; self.nodes[v.0].value.len()]))
            .collect())
    }

    fn sweep(&self, loss: Var) -> Result<Vec<Option<Vec<f64>>>> {
        let ln = self.node(loss);
        if ln.value.len() != 1 {
            return Err(NumericsError::NotScalar(ln.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(grads)
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let needs = |v: &Var| self.nodes[v.0].needs_grad;
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.node(*a).dims2();
                let (_, n) = self.node(*b).dims2();
                if needs(a) {
                    let buf = slot(grads, *a, m * k);
                    gemm(m, n, k, g, false, &self.node(*b).value, true, 1.0, buf);
                }
                if needs(b) {
                    let buf = slot(grads, *b, k * n);
                    gemm(k, m, n, &self.node(*a).value, true, g, false, 1.0, buf);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if needs(v) {
                        add_into(slot(grads, *v, g.len()), g);
                    }
                }
            }
            Op::AddBias(a, bias) => {
                if needs(a) {
                    add_into(slot(grads, *a, g.len()), g);
                }
                if needs(bias) {
                    let c = self.node(*bias).value.len();
                    let buf = slot(grads, *bias, c);
                    for row in g.chunks_exact(c) {
                        add_into(buf, row);
                    }
                }
            }
            Op::Mul(a, b) => {
                if needs(a) {
                    let other = &self.node(*b).value;
                    let buf = slot(grads, *a, g.len());
                    for ((d, x), y) in buf.iter_mut().zip(g).zip(other) {
                        *d += x * y;
                    }
                }
                if needs(b) {
                    let other = &self.node(*a).value;
                    let buf = slot(grads, *b, g.len());
                    for ((d, x), y) in buf.iter_mut().zip(g).zip(other) {
                        *d += x * y;
                    }
                }
            }
            Op::Scale(a, s) => {
                if needs(a) {
                    let buf = slot(grads, *a, g.len());
                    buf.iter_mut().zip(g).for_each(|(d, x)| *d += s * x);
                }
            }
            Op::Concat(parts) => {
                let (rows, total) = node.dims2();
                let mut offset = 0;
                for p in parts {
                    let (_, w) = self.node(*p).dims2();
                    if needs(p) {
                        let buf = slot(grads, *p, rows * w);
                        for r in 0..rows {
                            add_into(&mut buf[r * w..(r + 1) * w], &g[r * total + offset..r * total + offset + w]);
                        }
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.node(*p).value.len();
                    if needs(p) {
                        add_into(slot(grads, *p, n), &g[offset..offset + n]);
                    }
                    offset += n;
                }
            }
            Op::SliceCols { src, start } => {
                if needs(src) {
                    let (rows, cols) = self.node(*src).dims2();
                    let (_, w) = node.dims2();
                    let buf = slot(grads, *src, rows * cols);
                    for r in 0..rows {
                        add_into(&mut buf[r * cols + start..r * cols + start + w], &g[r * w..(r + 1) * w]);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if needs(a) {
                    let buf = slot(grads, *a, g.len());
                    for ((d, x), y) in buf.iter_mut().zip(g).zip(&node.value) {
                        *d += x * y * (1.0 - y);
                    }
                }
            }
            Op::Tanh(a) => {
                if needs(a) {
                    let buf = slot(grads, *a, g.len());
                    for ((d, x), y) in buf.iter_mut().zip(g).zip(&node.value) {
                        *d += x * (1.0 - y * y);
                    }
                }
            }
            Op::Softmax(a) => {
                if needs(a) {
                    let (_, c) = node.dims2();
                    let buf = slot(grads, *a, g.len());
                    for ((drow, grow), yrow) in buf.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(node.value.chunks_exact(c)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                        for ((d, x), y) in drow.iter_mut().zip(grow).zip(yrow) {
                            *d += y * (x - dot);
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                if needs(table) {
                    let (rows, d) = self.node(*table).dims2();
                    let buf = slot(grads, *table, rows * d);
                    for (k, &i) in ids.iter().enumerate() {
                        add_into(&mut buf[i * d..(i + 1) * d], &g[k * d..(k + 1) * d]);
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                pad,
                probs,
                count,
            } => {
                if needs(logits) {
                    let (_, v) = self.node(*logits).dims2();
                    let scale = g[0] / *count as f64;
                    let buf = slot(grads, *logits, probs.len());
                    for (r, &t) in targets.iter().enumerate() {
                        if t == *pad {
                            continue;
                        }
                        let row = &mut buf[r * v..(r + 1) * v];
                        for (d, p) in row.iter_mut().zip(&probs[r * v..(r + 1) * v]) {
                            *d += scale * p;
                        }
                        row[t] -= scale;
                    }
                }
            }
            Op::Sum(a) => {
                if needs(a) {
                    let n = self.node(*a).value.len();
                    slot(grads, *a, n).iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Blend { new, old, mask } => {
                let (rows, c) = node.dims2();
                if needs(new) {
                    let buf = slot(grads, *new, rows * c);
                    for r in 0..rows {
                        let m = mask[r];
                        if m != 0.0 {
                            for j in 0..c {
                                buf[r * c + j] += m * g[r * c + j];
                            }
                        }
                    }
                }
                if needs(old) {
                    let buf = slot(grads, *old, rows * c);
                    for r in 0..rows {
                        let m = 1.0 - mask[r];
                        if m != 0.0 {
                            for j in 0..c {
                                buf[r * c + j] += m * g[r * c + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    row.iter_mut().for_each(|x| *x /= z);
}

fn log_softmax_at(row: &[f64], t: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
    row[t] - max - z.ln()
}

//! Forward operations and their backward rules.

use super::{Op, Tape, Var};
use crate::error::{Error, Result};

/// Parameters of one LSTM cell, already bound onto a tape.
///
/// Gate layout along the stacked dimension is `[input, forget,
/// candidate, output]`, so `w_x` is `[4H x d]`, `w_h` is `[4H x H]`
/// and `b` is `[4H]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmCellVars {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Raw matrix product of row-major buffers: C[m,n] = A[m,k] * B[k,n].
fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        let cr = &mut c[i * n..(i + 1) * n];
        for (p, &av) in ar.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let br = &b[p * n..(p + 1) * n];
            for j in 0..n {
                cr[j] += av * br[j];
            }
        }
    }
    c
}

/// Normalized matmul dims: vectors are promoted to a row (lhs) or a
/// column (rhs).
fn normalize_matmul(lhs: &[usize], rhs: &[usize]) -> Result<(usize, usize, usize)> {
    let (m, k1) = match lhs {
        [k] => (1, *k),
        [m, k] => (*m, *k),
        _ => {
            return Err(Error::InvalidShape {
                op: "matmul",
                shape: lhs.to_vec(),
                reason: "left operand must be 1-D or 2-D".into(),
            })
        }
    };
    let (k2, n) = match rhs {
        [k] => (*k, 1),
        [k, n] => (*k, *n),
        _ => {
            return Err(Error::InvalidShape {
                op: "matmul",
                shape: rhs.to_vec(),
                reason: "right operand must be 1-D or 2-D".into(),
            })
        }
    };
    if k1 != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        });
    }
    Ok((m, k1, n))
}

impl Tape {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.derived(self.shape(a).to_vec(), data, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.derived(self.shape(a).to_vec(), data, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.derived(self.shape(a).to_vec(), data, Op::Mul(a, b), &[a, b]))
    }

    /// Multiplication by a compile-time constant (not differentiated
    /// with respect to `c`).
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let data: Vec<f64> = self.data(a).iter().map(|x| x * c).collect();
        self.derived(self.shape(a).to_vec(), data, Op::Scale(a, c), &[a])
    }

    /// Matrix product. Accepts `[m,k]x[k,n]`, and promotes 1-D
    /// operands: `[m,k]x[k] -> [m]`, `[k]x[k,n] -> [n]`, `[k]x[k] -> [1]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k, n) = normalize_matmul(self.shape(a), self.shape(b))?;
        let a_vec = self.shape(a).len() == 1;
        let b_vec = self.shape(b).len() == 1;
        let data = matmul_raw(self.data(a), self.data(b), m, k, n);
        let shape = match (a_vec, b_vec) {
            (true, true) => vec![1],
            (true, false) => vec![n],
            (false, true) => vec![m],
            (false, false) => vec![m, n],
        };
        Ok(self.derived(shape, data, Op::Matmul { a, b, m, k, n }, &[a, b]))
    }

    /// Valid (unpadded) cross-correlation over the last axis:
    /// `x [C_in, L]`, `w [C_out, C_in, W]`, `b [C_out]` -> `[C_out, L-W+1]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (c_in, len) = match self.shape(x) {
            [c, l] => (*c, *l),
            s => {
                return Err(Error::InvalidShape {
                    op: "conv1d",
                    shape: s.to_vec(),
                    reason: "input must be [channels, length]".into(),
                })
            }
        };
        let (c_out, wc_in, width) = match self.shape(w) {
            [o, c, w] => (*o, *c, *w),
            s => {
                return Err(Error::InvalidShape {
                    op: "conv1d",
                    shape: s.to_vec(),
                    reason: "kernels must be [out, in, width]".into(),
                })
            }
        };
        if wc_in != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv1d",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(w).to_vec(),
            });
        }
        if self.shape(b) != [c_out] {
            return Err(Error::ShapeMismatch {
                op: "conv1d",
                lhs: self.shape(w).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        if len < width {
            return Err(Error::InputShorterThanKernel { len, width });
        }
        let out_len = len - width + 1;
        let xd = self.data(x);
        let wd = self.data(w);
        let bd = self.data(b);
        let mut out = vec![0.0; c_out * out_len];
        for o in 0..c_out {
            let orow = &mut out[o * out_len..(o + 1) * out_len];
            orow.fill(bd[o]);
            for c in 0..c_in {
                let xr = &xd[c * len..(c + 1) * len];
                let wr = &wd[(o * c_in + c) * width..(o * c_in + c + 1) * width];
                for t in 0..out_len {
                    let mut s = 0.0;
                    for (i, &wv) in wr.iter().enumerate() {
                        s += xr[t + i] * wv;
                    }
                    orow[t] += s;
                }
            }
        }
        Ok(self.derived(vec![c_out, out_len], out, Op::Conv1d { x, w, b }, &[x, w, b]))
    }

    /// Windowed maximum per channel. Gradient flows to the first
    /// (lowest-index) maximum of each window.
    pub fn max_pool1d(&mut self, x: Var, width: usize, stride: usize) -> Result<Var> {
        let (channels, len) = match self.shape(x) {
            [c, l] => (*c, *l),
            s => {
                return Err(Error::InvalidShape {
                    op: "max_pool1d",
                    shape: s.to_vec(),
                    reason: "input must be [channels, length]".into(),
                })
            }
        };
        if stride == 0 {
            return Err(Error::InvalidShape {
                op: "max_pool1d",
                shape: vec![width, stride],
                reason: "stride must be >= 1".into(),
            });
        }
        if len < width || width == 0 {
            return Err(Error::WindowTooWide {
                op: "max_pool1d",
                len,
                width,
            });
        }
        let out_len = (len - width) / stride + 1;
        let xd = self.data(x);
        let mut out = vec![0.0; channels * out_len];
        let mut argmax = vec![0usize; channels * out_len];
        for c in 0..channels {
            for t in 0..out_len {
                let start = c * len + t * stride;
                let window = &xd[start..start + width];
                let (mut best_i, mut best) = (0usize, window[0]);
                for (i, &v) in window.iter().enumerate().skip(1) {
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                out[c * out_len + t] = best;
                argmax[c * out_len + t] = start + best_i;
            }
        }
        Ok(self.derived(vec![channels, out_len], out, Op::MaxPool1d { x, argmax }, &[x]))
    }

    /// Fixed-size pooling: partitions `[0, L)` into `bins` contiguous
    /// intervals with boundaries `floor(b*L/bins)` and emits the
    /// per-bin maximum, so the output shape is `[C, bins]` for every
    /// input length `L >= 1`. Empty bins (possible when `L < bins`)
    /// borrow their start index.
    pub fn roi_pool1d(&mut self, x: Var, bins: usize) -> Result<Var> {
        let (channels, len) = match self.shape(x) {
            [c, l] => (*c, *l),
            s => {
                return Err(Error::InvalidShape {
                    op: "roi_pool1d",
                    shape: s.to_vec(),
                    reason: "input must be [channels, length]".into(),
                })
            }
        };
        if bins == 0 {
            return Err(Error::InvalidShape {
                op: "roi_pool1d",
                shape: vec![bins],
                reason: "bins must be >= 1".into(),
            });
        }
        if len == 0 {
            return Err(Error::EmptyInput { op: "roi_pool1d" });
        }
        let xd = self.data(x);
        let mut out = vec![0.0; channels * bins];
        let mut argmax = vec![0usize; channels * bins];
        for c in 0..channels {
            let row = &xd[c * len..(c + 1) * len];
            for b in 0..bins {
                // start < len for every b < bins, so borrowing an empty
                // bin's start index is always in range.
                let start = b * len / bins;
                let end = ((b + 1) * len / bins).max(start + 1).min(len);
                let (mut best_i, mut best) = (start, row[start]);
                for (i, &v) in row.iter().enumerate().take(end).skip(start + 1) {
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                out[c * bins + b] = best;
                argmax[c * bins + b] = c * len + best_i;
            }
        }
        Ok(self.derived(vec![channels, bins], out, Op::RoiPool1d { x, argmax }, &[x]))
    }

    /// Stable softmax over a 1-D vector.
    pub fn softmax(&mut self, z: Var) -> Result<Var> {
        let shape = self.shape(z);
        if shape.len() != 1 {
            return Err(Error::InvalidShape {
                op: "softmax",
                shape: shape.to_vec(),
                reason: "expects a 1-D vector".into(),
            });
        }
        let zd = self.data(z);
        let max = zd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = zd.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let data: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        Ok(self.derived(shape.to_vec(), data, Op::Softmax(z), &[z]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let data: Vec<f64> = self.data(x).iter().map(|&v| sigmoid_scalar(v)).collect();
        self.derived(self.shape(x).to_vec(), data, Op::Sigmoid(x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let data: Vec<f64> = self.data(x).iter().map(|v| v.tanh()).collect();
        self.derived(self.shape(x).to_vec(), data, Op::Tanh(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let data: Vec<f64> = self.data(x).iter().map(|v| v.max(0.0)).collect();
        self.derived(self.shape(x).to_vec(), data, Op::Relu(x), &[x])
    }

    /// Concatenates 1-D vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptyInput { op: "concat" });
        }
        let mut data = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::InvalidShape {
                    op: "concat",
                    shape: self.shape(p).to_vec(),
                    reason: "expects 1-D vectors".into(),
                });
            }
            data.extend_from_slice(self.data(p));
        }
        let n = data.len();
        Ok(self.derived(vec![n], data, Op::Concat(parts.to_vec()), parts))
    }

    /// `x[start..end]` of a 1-D vector, end exclusive.
    pub fn slice(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(x);
        if shape.len() != 1 || start >= end || end > shape[0] {
            return Err(Error::InvalidShape {
                op: "slice",
                shape: shape.to_vec(),
                reason: format!("range {start}..{end} invalid"),
            });
        }
        let data = self.data(x)[start..end].to_vec();
        Ok(self.derived(vec![end - start], data, Op::Slice { x, start }, &[x]))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.data(x).iter().sum();
        self.derived(vec![1], vec![s], Op::Sum(x), &[x])
    }

    /// Mean of all entries, as a scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).numel() as f64;
        let s: f64 = self.data(x).iter().sum::<f64>() / n;
        self.derived(vec![1], vec![s], Op::Mean(x), &[x])
    }

    /// Reinterprets the buffer under a new shape with the same number
    /// of elements.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() {
            return Err(Error::InvalidShape {
                op: "reshape",
                shape,
                reason: format!("element count != {}", self.value(x).numel()),
            });
        }
        let data = self.data(x).to_vec();
        Ok(self.derived(shape, data, Op::Reshape(x), &[x]))
    }

    /// Negative log-likelihood of `target` under a softmax over the
    /// logits `z`, computed as `logsumexp(z) - z[target]`.
    pub fn cross_entropy_logits(&mut self, z: Var, target: usize) -> Result<Var> {
        let shape = self.shape(z);
        if shape.len() != 1 || target >= shape[0] {
            return Err(Error::InvalidShape {
                op: "cross_entropy_logits",
                shape: shape.to_vec(),
                reason: format!("target {target} out of range"),
            });
        }
        let zd = self.data(z);
        let max = zd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + zd.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - zd[target];
        Ok(self.derived(vec![1], vec![loss], Op::CrossEntropyLogits { z, target }, &[z]))
    }

    /// Per-label sigmoid cross-entropy against binary targets, summed
    /// over labels: `sum_j max(x_j,0) - x_j*y_j + ln(1 + exp(-|x_j|))`.
    /// Overflow-free for logit magnitudes up to at least 1e4; equals the
    /// naive `-[y ln s(x) + (1-y) ln(1-s(x))]` wherever that is finite.
    pub fn bce_with_logits(&mut self, x: Var, y: Var) -> Result<Var> {
        self.same_shape("bce_with_logits", x, y)?;
        let loss: f64 = self
            .data(x)
            .iter()
            .zip(self.data(y))
            .map(|(&xi, &yi)| xi.max(0.0) - xi * yi + (-xi.abs()).exp().ln_1p())
            .sum();
        Ok(self.derived(vec![1], vec![loss], Op::BceWithLogits { x, y }, &[x, y]))
    }

    /// One LSTM recurrence step (sigmoid gates, tanh candidate),
    /// composed from recorded primitives so it is differentiable
    /// through both the hidden and the cell path.
    pub fn lstm_cell(
        &mut self,
        x: Var,
        h_prev: Var,
        c_prev: Var,
        params: &LstmCellVars,
    ) -> Result<(Var, Var)> {
        let hidden = match self.shape(h_prev) {
            [h] => *h,
            s => {
                return Err(Error::InvalidShape {
                    op: "lstm_cell",
                    shape: s.to_vec(),
                    reason: "hidden state must be a 1-D vector".into(),
                })
            }
        };
        if self.shape(c_prev) != [hidden] {
            return Err(Error::ShapeMismatch {
                op: "lstm_cell",
                lhs: self.shape(h_prev).to_vec(),
                rhs: self.shape(c_prev).to_vec(),
            });
        }
        if self.shape(params.w_x).first() != Some(&(4 * hidden))
            || self.shape(params.w_h) != [4 * hidden, hidden]
            || self.shape(params.b) != [4 * hidden]
        {
            return Err(Error::ShapeMismatch {
                op: "lstm_cell",
                lhs: self.shape(params.w_x).to_vec(),
                rhs: vec![4 * hidden, hidden],
            });
        }
        let from_x = self.matmul(params.w_x, x)?;
        let from_h = self.matmul(params.w_h, h_prev)?;
        let pre = self.add(from_x, from_h)?;
        let pre = self.add(pre, params.b)?;
        let i_pre = self.slice(pre, 0, hidden)?;
        let f_pre = self.slice(pre, hidden, 2 * hidden)?;
        let g_pre = self.slice(pre, 2 * hidden, 3 * hidden)?;
        let o_pre = self.slice(pre, 3 * hidden, 4 * hidden)?;
        let i = self.sigmoid(i_pre);
        let f = self.sigmoid(f_pre);
        let g = self.tanh(g_pre);
        let o = self.sigmoid(o_pre);
        let keep = self.mul(f, c_prev)?;
        let write = self.mul(i, g)?;
        let c = self.add(keep, write)?;
        let c_act = self.tanh(c);
        let h = self.mul(o, c_act)?;
        Ok((h, c))
    }

    /// Gradient contributions of node `i` into its inputs.
    pub(crate) fn backward_node(&self, i: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let needs = |v: Var| self.nodes[v.0].tensor.requires_grad;
        match &self.nodes[i].op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => {
                let mut out = Vec::new();
                if needs(*a) {
                    out.push((*a, g.to_vec()));
                }
                if needs(*b) {
                    out.push((*b, g.to_vec()));
                }
                out
            }
            Op::Sub(a, b) => {
                let mut out = Vec::new();
                if needs(*a) {
                    out.push((*a, g.to_vec()));
                }
                if needs(*b) {
                    out.push((*b, g.iter().map(|v| -v).collect()));
                }
                out
            }
            Op::Mul(a, b) => {
                let mut out = Vec::new();
                if needs(*a) {
                    let bd = self.data(*b);
                    out.push((*a, g.iter().zip(bd).map(|(gi, bi)| gi * bi).collect()));
                }
                if needs(*b) {
                    let ad = self.data(*a);
                    out.push((*b, g.iter().zip(ad).map(|(gi, ai)| gi * ai).collect()));
                }
                out
            }
            Op::Scale(a, c) => {
                if needs(*a) {
                    vec![(*a, g.iter().map(|gi| gi * c).collect())]
                } else {
                    Vec::new()
                }
            }
            Op::Matmul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let mut out = Vec::new();
                if needs(*a) {
                    // dA = G * B^T
                    let bd = self.data(*b);
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += g[i * n + j] * bd[p * n + j];
                            }
                            da[i * k + p] = s;
                        }
                    }
                    out.push((*a, da));
                }
                if needs(*b) {
                    // dB = A^T * G
                    let ad = self.data(*a);
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let av = ad[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += av * g[i * n + j];
                            }
                        }
                    }
                    out.push((*b, db));
                }
                out
            }
            Op::Conv1d { x, w, b } => {
                let [c_in, len] = *self.shape(*x) else { unreachable!() };
                let [c_out, _, width] = *self.shape(*w) else { unreachable!() };
                let out_len = len - width + 1;
                let mut out = Vec::new();
                if needs(*x) {
                    let wd = self.data(*w);
                    let mut dx = vec![0.0; c_in * len];
                    for o in 0..c_out {
                        let gr = &g[o * out_len..(o + 1) * out_len];
                        for c in 0..c_in {
                            let wr = &wd[(o * c_in + c) * width..(o * c_in + c + 1) * width];
                            let dxr = &mut dx[c * len..(c + 1) * len];
                            for (t, &gv) in gr.iter().enumerate() {
                                if gv == 0.0 {
                                    continue;
                                }
                                for (idx, &wv) in wr.iter().enumerate() {
                                    dxr[t + idx] += gv * wv;
                                }
                            }
                        }
                    }
                    out.push((*x, dx));
                }
                if needs(*w) {
                    let xd = self.data(*x);
                    let mut dw = vec![0.0; c_out * c_in * width];
                    for o in 0..c_out {
                        let gr = &g[o * out_len..(o + 1) * out_len];
                        for c in 0..c_in {
                            let xr = &xd[c * len..(c + 1) * len];
                            let dwr = &mut dw[(o * c_in + c) * width..(o * c_in + c + 1) * width];
                            for (t, &gv) in gr.iter().enumerate() {
                                if gv == 0.0 {
                                    continue;
                                }
                                for (idx, dwv) in dwr.iter_mut().enumerate() {
                                    *dwv += gv * xr[t + idx];
                                }
                            }
                        }
                    }
                    out.push((*w, dw));
                }
                if needs(*b) {
                    let mut db = vec![0.0; c_out];
                    for (o, dbo) in db.iter_mut().enumerate() {
                        *dbo = g[o * out_len..(o + 1) * out_len].iter().sum();
                    }
                    out.push((*b, db));
                }
                out
            }
            Op::MaxPool1d { x, argmax } | Op::RoiPool1d { x, argmax } => {
                if !needs(*x) {
                    return Vec::new();
                }
                let mut dx = vec![0.0; self.nodes[x.0].tensor.numel()];
                for (e, &src) in argmax.iter().enumerate() {
                    dx[src] += g[e];
                }
                vec![(*x, dx)]
            }
            Op::Softmax(z) => {
                if !needs(*z) {
                    return Vec::new();
                }
                let p = self.nodes[i].tensor.data();
                let dot: f64 = g.iter().zip(p).map(|(gi, pi)| gi * pi).sum();
                vec![(
                    *z,
                    p.iter().zip(g).map(|(pi, gi)| pi * (gi - dot)).collect(),
                )]
            }
            Op::Sigmoid(x) => {
                if !needs(*x) {
                    return Vec::new();
                }
                let s = self.nodes[i].tensor.data();
                vec![(
                    *x,
                    s.iter().zip(g).map(|(si, gi)| gi * si * (1.0 - si)).collect(),
                )]
            }
            Op::Tanh(x) => {
                if !needs(*x) {
                    return Vec::new();
                }
                let t = self.nodes[i].tensor.data();
                vec![(
                    *x,
                    t.iter().zip(g).map(|(ti, gi)| gi * (1.0 - ti * ti)).collect(),
                )]
            }
            Op::Relu(x) => {
                if !needs(*x) {
                    return Vec::new();
                }
                let xd = self.data(*x);
                vec![(
                    *x,
                    xd.iter()
                        .zip(g)
                        .map(|(xi, gi)| if *xi > 0.0 { *gi } else { 0.0 })
                        .collect(),
                )]
            }
            Op::Concat(parts) => {
                let mut out = Vec::new();
                let mut offset = 0;
                for &p in parts {
                    let n = self.nodes[p.0].tensor.numel();
                    if needs(p) {
                        out.push((p, g[offset..offset + n].to_vec()));
                    }
                    offset += n;
                }
                out
            }
            Op::Slice { x, start } => {
                if !needs(*x) {
                    return Vec::new();
                }
                let mut dx = vec![0.0; self.nodes[x.0].tensor.numel()];
                dx[*start..*start + g.len()].copy_from_slice(g);
                vec![(*x, dx)]
            }
            Op::Sum(x) => {
                if !needs(*x) {
                    return Vec::new();
                }
                vec![(*x, vec![g[0]; self.nodes[x.0].tensor.numel()])]
            }
            Op::Mean(x) => {
                if !needs(*x) {
                    return Vec::new();
                }
                let n = self.nodes[x.0].tensor.numel();
                vec![(*x, vec![g[0] / n as f64; n])]
            }
            Op::Reshape(x) => {
                if !needs(*x) {
                    return Vec::new();
                }
                vec![(*x, g.to_vec())]
            }
            Op::CrossEntropyLogits { z, target } => {
                if !needs(*z) {
                    return Vec::new();
                }
                let zd = self.data(*z);
                let max = zd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = zd.iter().map(|&v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                let mut dz: Vec<f64> = exps.iter().map(|e| g[0] * e / sum).collect();
                dz[*target] -= g[0];
                vec![(*z, dz)]
            }
            Op::BceWithLogits { x, y } => {
                // d/dx = sigmoid(x) - y; targets receive no gradient.
                if !needs(*x) {
                    return Vec::new();
                }
                let xd = self.data(*x);
                let yd = self.data(*y);
                vec![(
                    *x,
                    xd.iter()
                        .zip(yd)
                        .map(|(&xi, &yi)| g[0] * (sigmoid_scalar(xi) - yi))
                        .collect(),
                )]
            }
        }
    }
}

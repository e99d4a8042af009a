//! Dynamic tape: every forward op appends a node, `backward` walks them in reverse.

use std::collections::HashMap;

use super::{AutodiffError, Gradients, ParamId, ParamStore, Tensor};

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Lookup(ParamId, usize),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    LogSigmoid(NodeId),
    Softmax(NodeId, Axis),
    LogSoftmax(NodeId, Axis),
    Pick(NodeId, usize),
    LinComb(Vec<(NodeId, f64)>),
    LstmStep {
        w: NodeId,
        b: NodeId,
        x: NodeId,
        state: NodeId,
        /// i, f, g, o activations.
        gates: Vec<f64>,
        tanh_c: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A single-threaded computation record over a frozen parameter snapshot.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Visits each softmax group: `f(offset, stride, len)`.
fn for_each_group(shape: &[usize], axis: Axis, mut f: impl FnMut(usize, usize, usize)) {
    match (shape, axis) {
        ([n], _) => f(0, 1, *n),
        ([r, c], Axis::Cols) => (0..*r).for_each(|i| f(i * c, 1, *c)),
        ([r, c], Axis::Rows) => (0..*c).for_each(|j| f(j, *c, *r)),
        _ => {}
    }
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.data[0]
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].value.shape
    }

    fn data(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value.data
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// The whole parameter as a node; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let value = self.store.value(id).clone();
        let n = self.push(value, Op::Param(id));
        self.param_nodes.insert(id, n);
        n
    }

    /// Row `row` of a 2-D parameter (an embedding lookup).
    pub fn embedding_lookup(&mut self, table: ParamId, row: usize) -> Result<NodeId, AutodiffError> {
        let t = self.store.value(table);
        let (rows, cols) = t.dims2();
        if row >= rows {
            return Err(AutodiffError::IndexOutOfRange { index: row, len: rows });
        }
        let v = Tensor::vector(t.data[row * cols..(row + 1) * cols].to_vec());
        Ok(self.push(v, Op::Lookup(table, row)))
    }

    /// `(m×k)·(k×n)` or `(m×k)·(k)`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let (m, k) = match sa.as_slice() {
            [m, k] => (*m, *k),
            _ => return Err(shape_err("matmul", &sa, &sb)),
        };
        let (k2, n, out_shape) = match sb.as_slice() {
            [k2] => (*k2, 1, vec![m]),
            [k2, n] => (*k2, *n, vec![m, *n]),
            _ => return Err(shape_err("matmul", &sa, &sb)),
        };
        if k != k2 {
            return Err(shape_err("matmul", &sa, &sb));
        }
        let ad = self.data(a);
        let bd = self.data(b);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ad[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            if n == 1 {
                orow[0] = arow.iter().zip(bd).map(|(x, y)| x * y).sum();
            } else {
                for (p, &av) in arow.iter().enumerate() {
                    let brow = &bd[p * n..(p + 1) * n];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
        }
        Ok(self.push(
            Tensor {
                shape: out_shape,
                data: out,
            },
            Op::MatMul(a, b),
        ))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.same_shape("add", a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = &self.nodes[a.0].value;
        let t = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|x| x * s).collect(),
        };
        self.push(t, Op::Scale(a, s))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.data(a).iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Concatenates vectors (or flattens and concatenates anything else).
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        if parts.is_empty() {
            return Err(AutodiffError::Empty("concat"));
        }
        let mut data = Vec::with_capacity(parts.iter().map(|&p| self.data(p).len()).sum());
        for &p in parts {
            data.extend_from_slice(self.data(p));
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    /// `len` elements of a flattened node starting at `start`.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId, AutodiffError> {
        let n = self.data(a).len();
        if start + len > n {
            return Err(AutodiffError::IndexOutOfRange {
                index: start + len,
                len: n,
            });
        }
        let v = Tensor::vector(self.data(a)[start..start + len].to_vec());
        Ok(self.push(v, Op::Slice(a, start)))
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let v = &self.nodes[a.0].value;
        let t = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&x| f(x)).collect(),
        };
        self.push(t, op)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn log_sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, log_sigmoid, Op::LogSigmoid(a))
    }

    fn softmax_values(&self, a: NodeId, axis: Axis, log: bool) -> Result<Tensor, AutodiffError> {
        let v = &self.nodes[a.0].value;
        if v.shape.len() > 2 || v.is_empty() {
            return Err(shape_err("softmax", &v.shape, &[]));
        }
        let mut out = vec![0.0; v.len()];
        for_each_group(&v.shape, axis, |off, stride, len| {
            let idx = |i: usize| off + i * stride;
            let max = (0..len).map(|i| v.data[idx(i)]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..len).map(|i| (v.data[idx(i)] - max).exp()).sum();
            let lz = z.ln();
            for i in 0..len {
                let s = v.data[idx(i)] - max;
                out[idx(i)] = if log { s - lz } else { s.exp() / z };
            }
        });
        Ok(Tensor {
            shape: v.shape.clone(),
            data: out,
        })
    }

    /// Softmax over a vector, or along `axis` of a matrix (`Cols` normalizes each row).
    pub fn softmax(&mut self, a: NodeId, axis: Axis) -> Result<NodeId, AutodiffError> {
        let t = self.softmax_values(a, axis, false)?;
        Ok(self.push(t, Op::Softmax(a, axis)))
    }

    pub fn log_softmax(&mut self, a: NodeId, axis: Axis) -> Result<NodeId, AutodiffError> {
        let t = self.softmax_values(a, axis, true)?;
        Ok(self.push(t, Op::LogSoftmax(a, axis)))
    }

    /// Element `index` of a flattened node, as a scalar.
    pub fn pick(&mut self, a: NodeId, index: usize) -> Result<NodeId, AutodiffError> {
        let n = self.data(a).len();
        if index >= n {
            return Err(AutodiffError::IndexOutOfRange { index, len: n });
        }
        let v = self.data(a)[index];
        Ok(self.push(Tensor::scalar(v), Op::Pick(a, index)))
    }

    /// `Σ c_i · x_i` over same-shaped nodes.
    pub fn linear_combination(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId, AutodiffError> {
        let (first, _) = *terms.first().ok_or(AutodiffError::Empty("linear_combination"))?;
        let shape = self.shape(first).to_vec();
        let mut data = vec![0.0; self.data(first).len()];
        for &(n, c) in terms {
            if self.shape(n) != shape.as_slice() {
                return Err(shape_err("linear_combination", &shape, self.shape(n)));
            }
            for (o, x) in data.iter_mut().zip(self.data(n)) {
                *o += c * x;
            }
        }
        Ok(self.push(Tensor { shape, data }, Op::LinComb(terms.to_vec())))
    }

    /// `Σ w_i · x_i / Σ w_i`. Weights must be positive.
    pub fn weighted_mean(&mut self, items: &[(NodeId, f64)]) -> Result<NodeId, AutodiffError> {
        let total: f64 = items.iter().map(|&(_, w)| w).sum();
        if items.is_empty() || total <= 0.0 {
            return Err(AutodiffError::Empty("weighted_mean"));
        }
        let normalized: Vec<(NodeId, f64)> = items.iter().map(|&(n, w)| (n, w / total)).collect();
        self.linear_combination(&normalized)
    }

    /// One LSTM step. `w` is `4H × (I + H)` with gate blocks ordered
    /// input, forget, cell, output; `b` has length `4H`; `state` is `[h; c]`
    /// of length `2H`. Returns the new `[h; c]`.
    pub fn lstm_step(&mut self, w: NodeId, b: NodeId, x: NodeId, state: NodeId) -> Result<NodeId, AutodiffError> {
        let sw = self.shape(w).to_vec();
        let (rows, cols) = match sw.as_slice() {
            [r, c] => (*r, *c),
            _ => return Err(shape_err("lstm_step", &sw, self.shape(x))),
        };
        if rows % 4 != 0 {
            return Err(shape_err("lstm_step", &sw, self.shape(b)));
        }
        let h = rows / 4;
        let i_len = self.data(x).len();
        if cols != i_len + h {
            return Err(shape_err("lstm_step", &sw, self.shape(x)));
        }
        if self.data(b).len() != rows {
            return Err(shape_err("lstm_step", &sw, self.shape(b)));
        }
        if self.data(state).len() != 2 * h {
            return Err(shape_err("lstm_step", &sw, self.shape(state)));
        }
        let wd = self.data(w);
        let bd = self.data(b);
        let xd = self.data(x);
        let sd = self.data(state);
        let (h_prev, c_prev) = sd.split_at(h);
        let mut gates = vec![0.0; rows];
        for (r, g) in gates.iter_mut().enumerate() {
            let wrow = &wd[r * cols..(r + 1) * cols];
            let mut z = bd[r];
            z += wrow[..i_len].iter().zip(xd).map(|(a, b)| a * b).sum::<f64>();
            z += wrow[i_len..].iter().zip(h_prev).map(|(a, b)| a * b).sum::<f64>();
            *g = if (2 * h..3 * h).contains(&r) {
                z.tanh()
            } else {
                sigmoid(z)
            };
        }
        let mut out = vec![0.0; 2 * h];
        let mut tanh_c = vec![0.0; h];
        for j in 0..h {
            let (ig, fg, gg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let c = fg * c_prev[j] + ig * gg;
            tanh_c[j] = c.tanh();
            out[j] = og * tanh_c[j];
            out[h + j] = c;
        }
        Ok(self.push(
            Tensor::vector(out),
            Op::LstmStep {
                w,
                b,
                x,
                state,
                gates,
                tanh_c,
            },
        ))
    }

    /// Reverse pass from a scalar `loss`. Returns parameter gradients; the
    /// store is not modified.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, AutodiffError> {
        let shape = self.shape(loss);
        if self.data(loss).len() != 1 {
            return Err(AutodiffError::NotScalar(shape.to_vec()));
        }
        let mut grads = Gradients::with_capacity(self.store.len());
        let mut node_grads: Vec<Option<Vec<f64>>> = Vec::new();
        node_grads.resize_with(loss.0 + 1, || None);
        node_grads[loss.0] = Some(vec![1.0]);

        fn acc(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
            slot.get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let g = match node_grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            let out = &node.value.data;
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => {
                    let slot = grads.slot(*pid, g.len());
                    slot.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Op::Lookup(pid, row) => {
                    let table = self.store.value(*pid);
                    let (_, cols) = table.dims2();
                    let slot = grads.slot(*pid, table.len());
                    slot[row * cols..(row + 1) * cols]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(a, b)| *a += b);
                }
                Op::MatMul(a, b) => {
                    let ad = self.data(*a);
                    let bd = self.data(*b);
                    let (m, k) = self.value(*a).dims2();
                    let n = bd.len() / k;
                    {
                        let ga = acc(&mut node_grads[a.0], m * k);
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            let garow = &mut ga[i * k..(i + 1) * k];
                            for (p, ga_ip) in garow.iter_mut().enumerate() {
                                let brow = &bd[p * n..(p + 1) * n];
                                *ga_ip += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                    let gb = acc(&mut node_grads[b.0], k * n);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        let arow = &ad[i * k..(i + 1) * k];
                        for (p, &av) in arow.iter().enumerate() {
                            let gbrow = &mut gb[p * n..(p + 1) * n];
                            for (o, &gv) in gbrow.iter_mut().zip(grow) {
                                *o += av * gv;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for n in [a, b] {
                        let s = acc(&mut node_grads[n.0], g.len());
                        s.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                    }
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    let ga = acc(&mut node_grads[a.0], g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bd[i];
                    }
                    let gb = acc(&mut node_grads[b.0], g.len());
                    for i in 0..g.len() {
                        gb[i] += g[i] * ad[i];
                    }
                }
                Op::Scale(a, s) => {
                    let ga = acc(&mut node_grads[a.0], g.len());
                    ga.iter_mut().zip(&g).for_each(|(x, y)| *x += s * y);
                }
                Op::Sum(a) => {
                    let n = self.data(*a).len();
                    let ga = acc(&mut node_grads[a.0], n);
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.data(*p).len();
                        let gp = acc(&mut node_grads[p.0], n);
                        gp.iter_mut().zip(&g[off..off + n]).for_each(|(x, y)| *x += y);
                        off += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.data(*a).len();
                    let ga = acc(&mut node_grads[a.0], n);
                    ga[*start..start + g.len()]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(x, y)| *x += y);
                }
                Op::Relu(a) => {
                    let ga = acc(&mut node_grads[a.0], g.len());
                    for i in 0..g.len() {
                        if out[i] > 0.0 {
                            ga[i] += g[i];
                        }
                    }
                }
                Op::Tanh(a) => {
                    let ga = acc(&mut node_grads[a.0], g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * (1.0 - out[i] * out[i]);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut node_grads[a.0], g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * out[i] * (1.0 - out[i]);
                    }
                }
                Op::LogSigmoid(a) => {
                    let ad = self.data(*a);
                    let ga = acc(&mut node_grads[a.0], g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * sigmoid(-ad[i]);
                    }
                }
                Op::Softmax(a, axis) => {
                    let shape = node.value.shape.clone();
                    let ga = acc(&mut node_grads[a.0], g.len());
                    for_each_group(&shape, *axis, |off, stride, len| {
                        let dot: f64 = (0..len).map(|i| g[off + i * stride] * out[off + i * stride]).sum();
                        for i in 0..len {
                            let j = off + i * stride;
                            ga[j] += out[j] * (g[j] - dot);
                        }
                    });
                }
                Op::LogSoftmax(a, axis) => {
                    let shape = node.value.shape.clone();
                    let ga = acc(&mut node_grads[a.0], g.len());
                    for_each_group(&shape, *axis, |off, stride, len| {
                        let total: f64 = (0..len).map(|i| g[off + i * stride]).sum();
                        for i in 0..len {
                            let j = off + i * stride;
                            ga[j] += g[j] - out[j].exp() * total;
                        }
                    });
                }
                Op::Pick(a, index) => {
                    let n = self.data(*a).len();
                    let ga = acc(&mut node_grads[a.0], n);
                    ga[*index] += g[0];
                }
                Op::LinComb(terms) => {
                    for &(n, c) in terms {
                        let gn = acc(&mut node_grads[n.0], g.len());
                        gn.iter_mut().zip(&g).for_each(|(x, y)| *x += c * y);
                    }
                }
                Op::LstmStep {
                    w,
                    b,
                    x,
                    state,
                    gates,
                    tanh_c,
                } => {
                    let h = tanh_c.len();
                    let xd = self.data(*x);
                    let sd = self.data(*state);
                    let wd = self.data(*w);
                    let i_len = xd.len();
                    let cols = i_len + h;
                    let (gh, gc) = g.split_at(h);
                    let mut dz = vec![0.0; 4 * h];
                    let mut dc_prev = vec![0.0; h];
                    for j in 0..h {
                        let (ig, fg, gg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                        let tc = tanh_c[j];
                        let dc = gc[j] + gh[j] * og * (1.0 - tc * tc);
                        let d_o = gh[j] * tc;
                        let d_i = dc * gg;
                        let d_g = dc * ig;
                        let d_f = dc * sd[h + j];
                        dc_prev[j] = dc * fg;
                        dz[j] = d_i * ig * (1.0 - ig);
                        dz[h + j] = d_f * fg * (1.0 - fg);
                        dz[2 * h + j] = d_g * (1.0 - gg * gg);
                        dz[3 * h + j] = d_o * og * (1.0 - og);
                    }
                    {
                        let gw = acc(&mut node_grads[w.0], 4 * h * cols);
                        for (r, &d) in dz.iter().enumerate() {
                            if d == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            for (o, &v) in row[..i_len].iter_mut().zip(xd) {
                                *o += d * v;
                            }
                            for (o, &v) in row[i_len..].iter_mut().zip(&sd[..h]) {
                                *o += d * v;
                            }
                        }
                    }
                    {
                        let gb = acc(&mut node_grads[b.0], 4 * h);
                        gb.iter_mut().zip(&dz).for_each(|(a, d)| *a += d);
                    }
                    let mut ginput = vec![0.0; cols];
                    for (r, &d) in dz.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        let row = &wd[r * cols..(r + 1) * cols];
                        for (o, &wv) in ginput.iter_mut().zip(row) {
                            *o += d * wv;
                        }
                    }
                    {
                        let gx = acc(&mut node_grads[x.0], i_len);
                        gx.iter_mut().zip(&ginput[..i_len]).for_each(|(a, d)| *a += d);
                    }
                    let gs = acc(&mut node_grads[state.0], 2 * h);
                    for j in 0..h {
                        gs[j] += ginput[i_len + j];
                        gs[h + j] += dc_prev[j];
                    }
                }
            }
        }
        Ok(grads)
    }
}

//! Reverse-mode automatic differentiation over vectors.
//!
//! A [`Graph`] borrows a [`ParameterStore`], records every operation with its
//! forward value, and [`Graph::backward`] accumulates exact gradients for the
//! parameters reachable from a scalar root.

use super::array::{dot, sigmoid, softmax};
use super::params::{Gradients, ParamId, ParameterStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Row(ParamId, usize),
    MatVec(ParamId, Var),
    Sum(Vec<Var>),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Dot(Var, Var),
    Scale(Var, f64),
    Gather(Var, Vec<usize>),
    Gru { gi: Var, h: Var, u: ParamId, z: Vec<f64>, r: Vec<f64>, cand: Vec<f64> },
    Attention { query: Var, keys: Vec<Var>, values: Vec<Var>, weights: Vec<f64>, scale: f64 },
    NegLogSoftmax { logits: Var, target: usize, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Graph<'p> {
    params: &'p ParameterStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParameterStore) -> Self {
        Graph { params, nodes: Vec::with_capacity(256) }
    }

    pub fn params(&self) -> &'p ParameterStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    /// The whole parameter, flattened.
    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.get(id).data().to_vec();
        self.push(value, Op::Param(id))
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, id: ParamId, index: usize) -> Var {
        let value = self.params.get(id).row(index).to_vec();
        self.push(value, Op::Row(id, index))
    }

    pub fn matvec(&mut self, w: ParamId, x: Var) -> Var {
        let m = self.params.get(w);
        let xv = &self.nodes[x.0].value;
        assert_eq!(m.cols(), xv.len(), "matvec shape mismatch for {}", self.params.name(w));
        let value = (0..m.rows()).map(|r| dot(m.row(r), xv)).collect();
        self.push(value, Op::MatVec(w, x))
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: ParamId, b: ParamId, x: Var) -> Var {
        let wx = self.matvec(w, x);
        let bias = self.param(b);
        self.sum(&[wx, bias])
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let n = self.nodes[parts[0].0].value.len();
        let mut value = vec![0.0; n];
        for p in parts {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.len(), n, "sum of vectors with different lengths");
            for (o, x) in value.iter_mut().zip(pv) {
                *o += x;
            }
        }
        self.push(value, Op::Sum(parts.to_vec()))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x * y).collect();
        self.push(value, Op::Mul(a, b))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.iter().map(|&x| sigmoid(x)).collect();
        self.push(value, Op::Sigmoid(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts.iter().flat_map(|p| self.nodes[p.0].value.iter().copied()).collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let value = vec![dot(&self.nodes[a.0].value, &self.nodes[b.0].value)];
        self.push(value, Op::Dot(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.nodes[a.0].value.iter().map(|x| x * factor).collect();
        self.push(value, Op::Scale(a, factor))
    }

    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Var {
        let src = &self.nodes[a.0].value;
        let value = indices.iter().map(|&i| src[i]).collect();
        self.push(value, Op::Gather(a, indices.to_vec()))
    }

    /// Fused GRU step. `gi` is the precomputed input projection `W x + b`
    /// (length 3H, gate order z, r, h) and `u` the 3H×H recurrent matrix.
    pub fn gru(&mut self, gi: Var, h: Var, u: ParamId) -> Var {
        let um = self.params.get(u);
        let hv = &self.nodes[h.0].value;
        let giv = &self.nodes[gi.0].value;
        let n = hv.len();
        assert_eq!(giv.len(), 3 * n, "gru input projection must be 3H");
        assert_eq!(um.shape(), &[3 * n, n], "gru recurrent matrix must be 3H x H");
        let mut z = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            z[i] = sigmoid(giv[i] + dot(um.row(i), hv));
            r[i] = sigmoid(giv[n + i] + dot(um.row(n + i), hv));
        }
        let rh: Vec<f64> = r.iter().zip(hv).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = (0..n).map(|i| (giv[2 * n + i] + dot(um.row(2 * n + i), &rh)).tanh()).collect();
        let value = (0..n).map(|i| (1.0 - z[i]) * hv[i] + z[i] * cand[i]).collect();
        self.push(value, Op::Gru { gi, h, u, z, r, cand })
    }

    /// Scaled dot-product attention; keys and values must be non-empty and
    /// of equal count.
    pub fn attention(&mut self, query: Var, keys: &[Var], values: &[Var]) -> Var {
        assert!(!keys.is_empty() && keys.len() == values.len(), "attention needs matching non-empty keys/values");
        let q = &self.nodes[query.0].value;
        let scale = 1.0 / (q.len() as f64).sqrt();
        let scores: Vec<f64> = keys.iter().map(|k| dot(q, &self.nodes[k.0].value) * scale).collect();
        let weights = softmax(&scores);
        let mut value = vec![0.0; self.nodes[values[0].0].value.len()];
        for (w, v) in weights.iter().zip(values) {
            for (o, x) in value.iter_mut().zip(&self.nodes[v.0].value) {
                *o += w * x;
            }
        }
        self.push(value, Op::Attention { query, keys: keys.to_vec(), values: values.to_vec(), weights, scale })
    }

    /// `−log softmax(logits)[target]` as a scalar node.
    pub fn neg_log_softmax(&mut self, logits: Var, target: usize) -> Var {
        let lv = &self.nodes[logits.0].value;
        let probs = softmax(lv);
        let max = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lv.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let value = vec![lse - lv[target]];
        self.push(value, Op::NegLogSoftmax { logits, target, probs })
    }

    /// Accumulates d(root)/d(param) into `grads`. `root` must be a scalar.
    pub fn backward(&self, root: Var, grads: &mut Gradients) {
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward root must be a scalar");
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    for (d, x) in grads.get_mut(*id).data_mut().iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Row(id, index) => {
                    for (d, x) in grads.get_mut(*id).row_mut(*index).iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::MatVec(id, x) => {
                    let m = self.params.get(*id);
                    let xv = &self.nodes[x.0].value;
                    let gm = grads.get_mut(*id);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            for (d, xx) in gm.row_mut(r).iter_mut().zip(xv) {
                                *d += gr * xx;
                            }
                        }
                    }
                    let gx = acc(&mut adj, *x, xv.len());
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            for (d, w) in gx.iter_mut().zip(m.row(r)) {
                                *d += gr * w;
                            }
                        }
                    }
                }
                Op::Sum(parts) => {
                    for p in parts {
                        add_into(acc(&mut adj, *p, g.len()), &g);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    add_into(acc(&mut adj, *a, g.len()), &ga);
                    add_into(acc(&mut adj, *b, g.len()), &gb);
                }
                Op::Tanh(a) => {
                    let d: Vec<f64> = g.iter().zip(&node.value).map(|(x, y)| x * (1.0 - y * y)).collect();
                    add_into(acc(&mut adj, *a, g.len()), &d);
                }
                Op::Sigmoid(a) => {
                    let d: Vec<f64> = g.iter().zip(&node.value).map(|(x, y)| x * y * (1.0 - y)).collect();
                    add_into(acc(&mut adj, *a, g.len()), &d);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        add_into(acc(&mut adj, *p, n), &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<f64> = bv.iter().map(|y| g[0] * y).collect();
                    let gb: Vec<f64> = av.iter().map(|y| g[0] * y).collect();
                    add_into(acc(&mut adj, *a, ga.len()), &ga);
                    add_into(acc(&mut adj, *b, gb.len()), &gb);
                }
                Op::Scale(a, f) => {
                    let d: Vec<f64> = g.iter().map(|x| x * f).collect();
                    add_into(acc(&mut adj, *a, d.len()), &d);
                }
                Op::Gather(a, indices) => {
                    let n = self.nodes[a.0].value.len();
                    let ga = acc(&mut adj, *a, n);
                    for (gi, &ix) in g.iter().zip(indices) {
                        ga[ix] += gi;
                    }
                }
                Op::Gru { gi, h, u, z, r, cand } => {
                    let n = g.len();
                    let hv = &self.nodes[h.0].value;
                    let um = self.params.get(*u);
                    let mut da = vec![0.0; 3 * n];
                    let mut dh: Vec<f64> = (0..n).map(|i| g[i] * (1.0 - z[i])).collect();
                    for i in 0..n {
                        let dz = g[i] * (cand[i] - hv[i]);
                        let dc = g[i] * z[i];
                        da[i] = dz * z[i] * (1.0 - z[i]);
                        da[2 * n + i] = dc * (1.0 - cand[i] * cand[i]);
                    }
                    let rh: Vec<f64> = r.iter().zip(hv).map(|(a, b)| a * b).collect();
                    // d(rh) = U_hᵀ da_h
                    let mut drh = vec![0.0; n];
                    for i in 0..n {
                        let d = da[2 * n + i];
                        if d != 0.0 {
                            for (o, w) in drh.iter_mut().zip(um.row(2 * n + i)) {
                                *o += d * w;
                            }
                        }
                    }
                    for i in 0..n {
                        da[n + i] = drh[i] * hv[i] * r[i] * (1.0 - r[i]);
                        dh[i] += drh[i] * r[i];
                    }
                    for row in 0..2 * n {
                        let d = da[row];
                        if d != 0.0 {
                            for (o, w) in dh.iter_mut().zip(um.row(row)) {
                                *o += d * w;
                            }
                        }
                    }
                    let gu = grads.get_mut(*u);
                    for row in 0..3 * n {
                        let d = da[row];
                        if d == 0.0 {
                            continue;
                        }
                        let src = if row >= 2 * n { &rh } else { hv };
                        for (o, x) in gu.row_mut(row).iter_mut().zip(src) {
                            *o += d * x;
                        }
                    }
                    add_into(acc(&mut adj, *gi, 3 * n), &da);
                    add_into(acc(&mut adj, *h, n), &dh);
                }
                Op::Attention { query, keys, values, weights, scale } => {
                    let dw: Vec<f64> = values.iter().map(|v| dot(&g, &self.nodes[v.0].value)).collect();
                    let mean: f64 = weights.iter().zip(&dw).map(|(w, d)| w * d).sum();
                    let q = &self.nodes[query.0].value;
                    let mut dq = vec![0.0; q.len()];
                    for (i, (k, v)) in keys.iter().zip(values).enumerate() {
                        let ds = weights[i] * (dw[i] - mean) * scale;
                        let kv = &self.nodes[k.0].value;
                        for (o, x) in dq.iter_mut().zip(kv) {
                            *o += ds * x;
                        }
                        let dk: Vec<f64> = q.iter().map(|x| ds * x).collect();
                        add_into(acc(&mut adj, *k, dk.len()), &dk);
                        let dv: Vec<f64> = g.iter().map(|x| weights[i] * x).collect();
                        add_into(acc(&mut adj, *v, dv.len()), &dv);
                    }
                    add_into(acc(&mut adj, *query, dq.len()), &dq);
                }
                Op::NegLogSoftmax { logits, target, probs } => {
                    let mut d: Vec<f64> = probs.iter().map(|p| g[0] * p).collect();
                    d[*target] -= g[0];
                    add_into(acc(&mut adj, *logits, d.len()), &d);
                }
            }
        }
    }
}

fn acc(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    adj[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::kernels::{attention, gru_cell, GruParameters};
    use super::super::DenseArray;
    use super::*;

    #[test]
    fn half_squared_norm_gradient_is_identity() {
        let mut store = ParameterStore::new();
        let p = store.add("p", DenseArray::vector(vec![0.5, -1.5, 2.0])).unwrap();
        let unused = store.add("q", DenseArray::vector(vec![3.0])).unwrap();
        let mut g = Graph::new(&store);
        let v = g.param(p);
        let sq = g.dot(v, v);
        let loss = g.scale(sq, 0.5);
        let mut grads = store.zero_gradients();
        g.backward(loss, &mut grads);
        assert_eq!(grads.get(p).data(), &[0.5, -1.5, 2.0]);
        assert_eq!(grads.get(unused).data(), &[0.0]);
    }

    #[test]
    fn fused_gru_agrees_with_reference_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParameterStore::new();
        let w = store.add_uniform("g.input", &[9, 4], 0.8, &mut rng);
        let u = store.add_uniform("g.recurrent", &[9, 3], 0.8, &mut rng);
        let b = store.add_uniform("g.bias", &[9], 0.8, &mut rng);
        let x = vec![0.3, -0.7, 1.1, 0.05];
        let h = vec![0.2, -0.4, 0.9];
        let mut g = Graph::new(&store);
        let xv = g.input(x.clone());
        let hv = g.input(h.clone());
        let gi = g.affine(w, b, xv);
        let out = g.gru(gi, hv, u);
        let reference =
            gru_cell(&DenseArray::vector(x), &DenseArray::vector(h), &GruParameters::from_store(&store, "g").unwrap()).unwrap();
        for (a, b) in g.value(out).iter().zip(reference.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn tape_attention_agrees_with_reference_kernel() {
        let store = ParameterStore::new();
        let mut g = Graph::new(&store);
        let keys = [vec![0.1, 0.4], vec![-0.3, 0.8], vec![1.0, 0.0]];
        let vals = [vec![1.0, 2.0, 3.0], vec![0.0, -1.0, 0.5], vec![2.0, 2.0, -2.0]];
        let q = g.input(vec![0.7, -0.2]);
        let kv: Vec<Var> = keys.iter().map(|k| g.input(k.clone())).collect();
        let vv: Vec<Var> = vals.iter().map(|v| g.input(v.clone())).collect();
        let out = g.attention(q, &kv, &vv);
        let reference = attention(
            &DenseArray::vector(vec![0.7, -0.2]),
            &keys.map(DenseArray::vector),
            &vals.map(DenseArray::vector),
        )
        .unwrap();
        for (a, b) in g.value(out).iter().zip(reference.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

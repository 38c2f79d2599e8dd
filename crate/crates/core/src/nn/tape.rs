//! Reverse-mode autodiff over a fixed operator set.
//!
//! Values are dense row-major buffers whose first axis is the batch. The tape
//! borrows the parameter tensors, so building a graph never copies weights.

use crate::scalar::Real;

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Stride-2, padding-1, 3×3×3 convolution geometry for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl ConvGeom {
    pub fn out_dim(d_in: usize) -> usize {
        (d_in + 2 - 3) / 2 + 1
    }

    fn patch(&self) -> usize {
        self.c_in * 27
    }

    fn out_voxels(&self) -> usize {
        self.d_out * self.d_out * self.d_out
    }
}

enum Op<T> {
    Input,
    Param(usize),
    Conv3d { x: Var, w: Var, b: Var, geom: ConvGeom, cols: Vec<T> },
    Affine { x: Var, w: Var, b: Var, rows: usize, n_in: usize, n_out: usize },
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Concat { a: Var, b: Var, rows: usize, na: usize, nb: usize },
    Slice { x: Var, rows: usize, width: usize, start: usize, len: usize },
    Embedding { table: Var, ids: Vec<usize>, width: usize },
    Lstm { gates: Var, c: Var, rows: usize, h: usize, acts: Vec<T>, tanh_c: Vec<T> },
    SoftmaxXent { logits: Var, targets: Vec<Option<usize>>, classes: usize, probs: Vec<T> },
    Add(Var, Var),
    Scale(Var, T),
}

struct Node<T> {
    op: Op<T>,
    value: Vec<T>,
    needs_grad: bool,
}

pub struct Tape<'a, T> {
    params: &'a [Tensor<T>],
    nodes: Vec<Node<T>>,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `[patch, voxels]` column matrix of one sample.
fn im2col<T: Real>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let (d, o) = (g.d_in as isize, g.d_out);
    let nv = g.out_voxels();
    for c in 0..g.c_in {
        let xc = &x[c * g.d_in * g.d_in * g.d_in..];
        for kz in 0..3 {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = ((c * 3 + kz) * 3 + ky) * 3 + kx;
                    let out = &mut cols[row * nv..(row + 1) * nv];
                    for oz in 0..o {
                        let iz = (oz * 2 + kz) as isize - 1;
                        for oy in 0..o {
                            let iy = (oy * 2 + ky) as isize - 1;
                            let base = (oz * o + oy) * o;
                            if iz < 0 || iz >= d || iy < 0 || iy >= d {
                                out[base..base + o].iter_mut().for_each(|v| *v = T::zero());
                                continue;
                            }
                            let line = ((iz * d + iy) * d) as usize;
                            for ox in 0..o {
                                let ix = (ox * 2 + kx) as isize - 1;
                                out[base + ox] = if ix < 0 || ix >= d { T::zero() } else { xc[line + ix as usize] };
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back into `dx`.
fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let (d, o) = (g.d_in as isize, g.d_out);
    let nv = g.out_voxels();
    for c in 0..g.c_in {
        let xc = &mut dx[c * g.d_in * g.d_in * g.d_in..];
        for kz in 0..3 {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = ((c * 3 + kz) * 3 + ky) * 3 + kx;
                    let src = &cols[row * nv..(row + 1) * nv];
                    for oz in 0..o {
                        let iz = (oz * 2 + kz) as isize - 1;
                        if iz < 0 || iz >= d {
                            continue;
                        }
                        for oy in 0..o {
                            let iy = (oy * 2 + ky) as isize - 1;
                            if iy < 0 || iy >= d {
                                continue;
                            }
                            let base = (oz * o + oy) * o;
                            let line = ((iz * d + iy) * d) as usize;
                            for ox in 0..o {
                                let ix = (ox * 2 + kx) as isize - 1;
                                if ix >= 0 && ix < d {
                                    xc[line + ix as usize] += src[base + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new(params: &'a [Tensor<T>]) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    fn push(&mut self, op: Op<T>, value: Vec<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        match self.nodes[v.0].op {
            Op::Param(i) => &self.params[i].data,
            _ => &self.nodes[v.0].value,
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Constant leaf.
    pub fn input(&mut self, value: Vec<T>) -> Var {
        self.push(Op::Input, value, false)
    }

    pub fn param(&mut self, index: usize) -> Var {
        self.push(Op::Param(index), Vec::new(), true)
    }

    /// `x: [batch, c_in, d, d, d]`, `w: [c_out, c_in·27]`, `b: [c_out]`.
    pub fn conv3d(&mut self, x: Var, w: Var, b: Var, geom: ConvGeom) -> Var {
        let (patch, nv) = (geom.patch(), geom.out_voxels());
        let in_len = geom.c_in * geom.d_in.pow(3);
        assert_eq!(self.value(x).len(), geom.batch * in_len, "conv3d input size");
        assert_eq!(self.value(w).len(), geom.c_out * patch, "conv3d weight size");
        let mut cols = vec![T::zero(); geom.batch * patch * nv];
        let mut out = vec![T::zero(); geom.batch * geom.c_out * nv];
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        for s in 0..geom.batch {
            let cs = &mut cols[s * patch * nv..(s + 1) * patch * nv];
            im2col(&xv[s * in_len..(s + 1) * in_len], &geom, cs);
            let os = &mut out[s * geom.c_out * nv..(s + 1) * geom.c_out * nv];
            for (oc, row) in os.chunks_mut(nv).enumerate() {
                row.iter_mut().for_each(|v| *v = bv[oc]);
            }
            T::gemm(geom.c_out, patch, nv, T::one(), wv, (patch, 1), cs, (nv, 1), T::one(), os, (nv, 1));
        }
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(Op::Conv3d { x, w, b, geom, cols }, out, ng)
    }

    /// `y = x·W + b` with `x: [rows, n_in]`, `W: [n_in, n_out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let n_out = self.value(b).len();
        let n_in = self.value(w).len() / n_out;
        assert_eq!(self.value(w).len(), n_in * n_out, "affine weight size");
        let rows = self.value(x).len() / n_in;
        assert_eq!(rows * n_in, self.value(x).len(), "affine input size");
        let mut out = Vec::with_capacity(rows * n_out);
        for _ in 0..rows {
            out.extend_from_slice(self.value(b));
        }
        T::gemm(rows, n_in, n_out, T::one(), self.value(x), (n_in, 1), self.value(w), (n_out, 1), T::one(), &mut out, (n_out, 1));
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(Op::Affine { x, w, b, rows, n_in, n_out }, out, ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).iter().map(|&a| a.max(T::zero())).collect();
        let ng = self.needs(x);
        self.push(Op::Relu(x), v, ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).iter().map(|&a| a.tanh()).collect();
        let ng = self.needs(x);
        self.push(Op::Tanh(x), v, ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).iter().map(|&a| sigmoid(a)).collect();
        let ng = self.needs(x);
        self.push(Op::Sigmoid(x), v, ng)
    }

    /// Column concatenation of `[rows, na]` and `[rows, nb]`.
    pub fn concat(&mut self, a: Var, b: Var, rows: usize) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let (na, nb) = (av.len() / rows, bv.len() / rows);
        let mut out = Vec::with_capacity(rows * (na + nb));
        for r in 0..rows {
            out.extend_from_slice(&av[r * na..(r + 1) * na]);
            out.extend_from_slice(&bv[r * nb..(r + 1) * nb]);
        }
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Concat { a, b, rows, na, nb }, out, ng)
    }

    /// Columns `start..start + len` of `[rows, width]`.
    pub fn slice(&mut self, x: Var, rows: usize, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        let width = xv.len() / rows;
        let out = (0..rows).flat_map(|r| xv[r * width + start..r * width + start + len].iter().copied()).collect();
        let ng = self.needs(x);
        self.push(Op::Slice { x, rows, width, start, len }, out, ng)
    }

    /// Rows of `table` selected by zero-based `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[usize], width: usize) -> Var {
        let tv = self.value(table);
        let out = ids.iter().flat_map(|&i| tv[i * width..(i + 1) * width].iter().copied()).collect();
        let ng = self.needs(table);
        self.push(Op::Embedding { table, ids: ids.to_vec(), width }, out, ng)
    }

    /// Gated recurrent cell. `gates: [rows, 4h]` pre-activations ordered
    /// input, forget, candidate, output; `c: [rows, h]`. Returns `[rows, 2h]`
    /// holding the new hidden state followed by the new cell state.
    pub fn lstm(&mut self, gates: Var, c: Var, rows: usize) -> Var {
        let (gv, cv) = (self.value(gates), self.value(c));
        let h = cv.len() / rows;
        assert_eq!(gv.len(), rows * 4 * h, "lstm gate size");
        let mut acts = vec![T::zero(); rows * 4 * h];
        let mut tanh_c = vec![T::zero(); rows * h];
        let mut out = vec![T::zero(); rows * 2 * h];
        for r in 0..rows {
            for k in 0..h {
                let z = |g: usize| gv[r * 4 * h + g * h + k];
                let (i, f, g, o) = (sigmoid(z(0)), sigmoid(z(1)), z(2).tanh(), sigmoid(z(3)));
                let cn = f * cv[r * h + k] + i * g;
                let tc = cn.tanh();
                for (gi, a) in [i, f, g, o].into_iter().enumerate() {
                    acts[r * 4 * h + gi * h + k] = a;
                }
                tanh_c[r * h + k] = tc;
                out[r * 2 * h + k] = o * tc;
                out[r * 2 * h + h + k] = cn;
            }
        }
        let ng = self.needs(gates) || self.needs(c);
        self.push(Op::Lstm { gates, c, rows, h, acts, tanh_c }, out, ng)
    }

    /// Summed negative log-likelihood over rows with a target; rows with
    /// `None` are masked out. Log-softmax uses max subtraction.
    pub fn softmax_xent(&mut self, logits: Var, targets: &[Option<usize>]) -> Var {
        let lv = self.value(logits);
        let rows = targets.len();
        let classes = lv.len() / rows;
        let mut probs = vec![T::zero(); lv.len()];
        let mut loss = T::zero();
        for (r, t) in targets.iter().enumerate() {
            let row = &lv[r * classes..(r + 1) * classes];
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let z: T = row.iter().map(|&x| (x - m).exp()).sum();
            let lz = z.ln();
            for (p, &x) in probs[r * classes..(r + 1) * classes].iter_mut().zip(row) {
                *p = (x - m).exp() / z;
            }
            if let Some(t) = *t {
                loss += lz - (row[t] - m);
            }
        }
        let ng = self.needs(logits);
        self.push(Op::SoftmaxXent { logits, targets: targets.to_vec(), classes, probs }, vec![loss], ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Add(a, b), v, ng)
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let v = self.value(x).iter().map(|&a| a * s).collect();
        let ng = self.needs(x);
        self.push(Op::Scale(x, s), v, ng)
    }

    /// Back-propagates from scalar `root`; returns one gradient per
    /// parameter (`None` when the parameter is not on the tape).
    pub fn backward(&self, root: Var) -> Vec<Option<Vec<T>>> {
        assert_eq!(self.value(root).len(), 1, "backward needs a scalar root");
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);
        let mut param_grads: Vec<Option<Vec<T>>> = (0..self.params.len()).map(|_| None).collect();
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(i) => accumulate(&mut param_grads[*i], &g),
                Op::Conv3d { x, w, b, geom, cols } => {
                    let (patch, nv) = (geom.patch(), geom.out_voxels());
                    let in_len = geom.c_in * geom.d_in.pow(3);
                    let mut dw = vec![T::zero(); geom.c_out * patch];
                    let mut db = vec![T::zero(); geom.c_out];
                    let mut dx = self.needs(*x).then(|| vec![T::zero(); geom.batch * in_len]);
                    let mut dcols = vec![T::zero(); patch * nv];
                    let wv = self.value(*w);
                    for s in 0..geom.batch {
                        let gs = &g[s * geom.c_out * nv..(s + 1) * geom.c_out * nv];
                        let cs = &cols[s * patch * nv..(s + 1) * patch * nv];
                        for (oc, row) in gs.chunks(nv).enumerate() {
                            db[oc] += row.iter().copied().sum::<T>();
                        }
                        // dW += g · colsᵀ
                        T::gemm(geom.c_out, nv, patch, T::one(), gs, (nv, 1), cs, (1, nv), T::one(), &mut dw, (patch, 1));
                        if let Some(dx) = dx.as_mut() {
                            // dcols = Wᵀ · g
                            T::gemm(patch, geom.c_out, nv, T::one(), wv, (1, patch), gs, (nv, 1), T::zero(), &mut dcols, (nv, 1));
                            col2im(&dcols, geom, &mut dx[s * in_len..(s + 1) * in_len]);
                        }
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut grads[x.0], &dx);
                    }
                    accumulate(&mut grads[w.0], &dw);
                    accumulate(&mut grads[b.0], &db);
                }
                Op::Affine { x, w, b, rows, n_in, n_out } => {
                    let (rows, n_in, n_out) = (*rows, *n_in, *n_out);
                    if self.needs(*w) {
                        let mut dw = vec![T::zero(); n_in * n_out];
                        T::gemm(n_in, rows, n_out, T::one(), self.value(*x), (1, n_in), &g, (n_out, 1), T::zero(), &mut dw, (n_out, 1));
                        accumulate(&mut grads[w.0], &dw);
                    }
                    if self.needs(*b) {
                        let mut db = vec![T::zero(); n_out];
                        for r in 0..rows {
                            for (d, &v) in db.iter_mut().zip(&g[r * n_out..(r + 1) * n_out]) {
                                *d += v;
                            }
                        }
                        accumulate(&mut grads[b.0], &db);
                    }
                    if self.needs(*x) {
                        let mut dx = vec![T::zero(); rows * n_in];
                        T::gemm(rows, n_out, n_in, T::one(), &g, (n_out, 1), self.value(*w), (1, n_out), T::zero(), &mut dx, (n_in, 1));
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::Relu(x) => {
                    let d: Vec<T> = g.iter().zip(&node.value).map(|(&gi, &y)| if y > T::zero() { gi } else { T::zero() }).collect();
                    accumulate(&mut grads[x.0], &d);
                }
                Op::Tanh(x) => {
                    let d: Vec<T> = g.iter().zip(&node.value).map(|(&gi, &y)| gi * (T::one() - y * y)).collect();
                    accumulate(&mut grads[x.0], &d);
                }
                Op::Sigmoid(x) => {
                    let d: Vec<T> = g.iter().zip(&node.value).map(|(&gi, &y)| gi * y * (T::one() - y)).collect();
                    accumulate(&mut grads[x.0], &d);
                }
                Op::Concat { a, b, rows, na, nb } => {
                    let w = na + nb;
                    if self.needs(*a) {
                        let d: Vec<T> = (0..*rows).flat_map(|r| g[r * w..r * w + na].iter().copied()).collect();
                        accumulate(&mut grads[a.0], &d);
                    }
                    if self.needs(*b) {
                        let d: Vec<T> = (0..*rows).flat_map(|r| g[r * w + na..(r + 1) * w].iter().copied()).collect();
                        accumulate(&mut grads[b.0], &d);
                    }
                }
                Op::Slice { x, rows, width, start, len } => {
                    let mut d = vec![T::zero(); rows * width];
                    for r in 0..*rows {
                        d[r * width + start..r * width + start + len].copy_from_slice(&g[r * len..(r + 1) * len]);
                    }
                    accumulate(&mut grads[x.0], &d);
                }
                Op::Embedding { table, ids, width } => {
                    let mut d = vec![T::zero(); self.value(*table).len()];
                    for (r, &i) in ids.iter().enumerate() {
                        for k in 0..*width {
                            d[i * width + k] += g[r * width + k];
                        }
                    }
                    accumulate(&mut grads[table.0], &d);
                }
                Op::Lstm { gates, c, rows, h, acts, tanh_c } => {
                    let (rows, h) = (*rows, *h);
                    let cv = self.value(*c);
                    let mut dz = vec![T::zero(); rows * 4 * h];
                    let mut dc_prev = vec![T::zero(); rows * h];
                    let one = T::one();
                    for r in 0..rows {
                        for k in 0..h {
                            let a = |gi: usize| acts[r * 4 * h + gi * h + k];
                            let (i, f, gg, o) = (a(0), a(1), a(2), a(3));
                            let tc = tanh_c[r * h + k];
                            let dh = g[r * 2 * h + k];
                            let dc = g[r * 2 * h + h + k] + dh * o * (one - tc * tc);
                            let base = r * 4 * h + k;
                            dz[base] = dc * gg * i * (one - i);
                            dz[base + h] = dc * cv[r * h + k] * f * (one - f);
                            dz[base + 2 * h] = dc * i * (one - gg * gg);
                            dz[base + 3 * h] = dh * tc * o * (one - o);
                            dc_prev[r * h + k] = dc * f;
                        }
                    }
                    accumulate(&mut grads[gates.0], &dz);
                    if self.needs(*c) {
                        accumulate(&mut grads[c.0], &dc_prev);
                    }
                }
                Op::SoftmaxXent { logits, targets, classes, probs } => {
                    let mut d = vec![T::zero(); probs.len()];
                    for (r, t) in targets.iter().enumerate() {
                        if let Some(t) = *t {
                            for k in 0..*classes {
                                d[r * classes + k] = g[0] * probs[r * classes + k];
                            }
                            d[r * classes + t] -= g[0];
                        }
                    }
                    accumulate(&mut grads[logits.0], &d);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g);
                    accumulate(&mut grads[b.0], &g);
                }
                Op::Scale(x, s) => {
                    let d: Vec<T> = g.iter().map(|&v| v * *s).collect();
                    accumulate(&mut grads[x.0], &d);
                }
            }
        }
        param_grads
    }
}

fn accumulate<T: Real>(slot: &mut Option<Vec<T>>, g: &[T]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

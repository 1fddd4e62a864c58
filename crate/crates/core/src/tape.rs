//! Tape-based reverse-mode differentiation over `f64` vectors.
//!
//! Every operation appends a node holding its value and a record of how it
//! was computed. [`Tape::backward`] walks the tape once in reverse and returns
//! the gradient of a scalar root with respect to every node. The operation set
//! is exactly what the sequence model needs: affine maps, elementwise
//! activations, 3×3 convolutions, 2×2 max pooling, and the two fused loss
//! terms (diagonal-Gaussian KL and half squared error).

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `w · x + b`, `w` stored row-major `out × in`.
    Linear { w: Var, b: Var, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<f64>),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Clamp(Var, f64, f64),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Conv3x3 { x: Var, w: Var, b: Var, shape: ConvShape },
    MaxPool2 { x: Var, argmax: Vec<usize> },
    KlDiag { mq: Var, lq: Var, mp: Var, lp: Var },
    HalfSqErr { pred: Var, target: Vec<f64> },
    WeightedSum(Vec<(Var, f64)>),
}

/// Adds a gradient contribution into the buffer of the given variable.
type Accumulate<'a> = dyn FnMut(Var, &mut dyn FnMut(&mut [f64])) + 'a;

struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one root with respect to every node of a tape.
pub struct Gradients {
    grads: Vec<Vec<f64>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` does not influence the root.
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        let g = &self.grads[v.0];
        if g.is_empty() {
            vec![0.0; self.lens[v.0]]
        } else {
            g.clone()
        }
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

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.len(), 1);
        val[0]
    }

    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn linear(&mut self, w: Var, b: Var, x: Var) -> Var {
        let (wv, bv, xv) = (self.value(w), self.value(b), self.value(x));
        let (out, inp) = (bv.len(), xv.len());
        assert_eq!(wv.len(), out * inp, "linear: weight is not {out}x{inp}");
        let value = (0..out)
            .map(|r| {
                let row = &wv[r * inp..(r + 1) * inp];
                bv[r] + row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        self.push(value, Op::Linear { w, b, x })
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "elementwise op on mismatched lengths");
        let value = av.iter().zip(bv).map(|(x, y)| f(*x, *y)).collect();
        self.push(value, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        self.push(value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn mul_const(&mut self, a: Var, c: Vec<f64>) -> Var {
        assert_eq!(self.value(a).len(), c.len());
        let value = self.value(a).iter().zip(&c).map(|(x, y)| x * y).collect();
        self.push(value, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    /// Hard clamp; the gradient is zero outside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a)[start..start + len].to_vec();
        self.push(value, Op::Slice(a, start))
    }

    /// Stride-1, zero-padded ("same") 3×3 convolution over a `C×H×W` input;
    /// weights are `O×C×3×3`.
    pub fn conv3x3(&mut self, x: Var, w: Var, b: Var, shape: ConvShape) -> Var {
        let ConvShape {
            in_channels: ci,
            out_channels: co,
            height: h,
            width: wd,
        } = shape;
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(xv.len(), ci * h * wd, "conv input shape");
        assert_eq!(wv.len(), co * ci * 9, "conv weight shape");
        assert_eq!(bv.len(), co, "conv bias shape");
        let mut out = vec![0.0; co * h * wd];
        for o in 0..co {
            let plane = &mut out[o * h * wd..(o + 1) * h * wd];
            plane.iter_mut().for_each(|v| *v = bv[o]);
            for c in 0..ci {
                let input = &xv[c * h * wd..(c + 1) * h * wd];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let k = wv[((o * ci + c) * 3 + ky) * 3 + kx];
                        if k == 0.0 {
                            continue;
                        }
                        let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                        let (x0, x1) = (1usize.saturating_sub(kx), (wd + 1 - kx).min(wd));
                        for y in y0..y1 {
                            let iy = y + ky - 1;
                            let orow = &mut plane[y * wd..(y + 1) * wd];
                            let irow = &input[iy * wd..(iy + 1) * wd];
                            for xx in x0..x1 {
                                orow[xx] += k * irow[xx + kx - 1];
                            }
                        }
                    }
                }
            }
        }
        self.push(out, Op::Conv3x3 { x, w, b, shape })
    }

    /// 2×2 max pooling with stride 2 over `C×H×W` (H and W even).
    pub fn max_pool2(&mut self, x: Var, channels: usize, height: usize, width: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.len(), channels * height * width);
        assert!(height.is_multiple_of(2) && width.is_multiple_of(2), "pooling needs even spatial dims");
        let (oh, ow) = (height / 2, width / 2);
        let mut value = Vec::with_capacity(channels * oh * ow);
        let mut argmax = Vec::with_capacity(channels * oh * ow);
        for c in 0..channels {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut best = usize::MAX;
                    let mut best_v = f64::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let i = (c * height + 2 * y + dy) * width + 2 * xx + dx;
                            if xv[i] > best_v {
                                best_v = xv[i];
                                best = i;
                            }
                        }
                    }
                    value.push(best_v);
                    argmax.push(best);
                }
            }
        }
        self.push(value, Op::MaxPool2 { x, argmax })
    }

    /// Closed-form `KL(N(mq, e^lq) ‖ N(mp, e^lp))` summed over dimensions.
    pub fn kl_diag(&mut self, mq: Var, lq: Var, mp: Var, lp: Var) -> Var {
        let kl = crate::model::kl_divergence_parts(
            self.value(mq),
            self.value(lq),
            self.value(mp),
            self.value(lp),
        );
        self.push(vec![kl], Op::KlDiag { mq, lq, mp, lp })
    }

    /// `0.5 · Σ (pred − target)²`.
    pub fn half_sq_err(&mut self, pred: Var, target: &[f64]) -> Var {
        let p = self.value(pred);
        assert_eq!(p.len(), target.len());
        let v = 0.5 * p.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        self.push(vec![v], Op::HalfSqErr {
            pred,
            target: target.to_vec(),
        })
    }

    /// `Σ c_i · s_i` over scalar nodes `s_i`.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let v = terms.iter().map(|&(s, c)| c * self.scalar(s)).sum();
        self.push(vec![v], Op::WeightedSum(terms.to_vec()))
    }

    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.value(root).len(), 1, "backward needs a scalar root");
        let lens: Vec<usize> = self.nodes.iter().map(|n| n.value.len()).collect();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        grads[root.0] = vec![1.0];

        for i in (0..=root.0).rev() {
            let (lower, upper) = grads.split_at_mut(i);
            let g = &upper[0];
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                let slot = &mut lower[v.0];
                if slot.is_empty() {
                    *slot = vec![0.0; lens[v.0]];
                }
                f(slot);
            };
            match &node.op {
                Op::Leaf => {}
                Op::Linear { w, b, x } => {
                    let (wv, xv) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
                    let inp = xv.len();
                    acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                    acc(*w, &mut |gw| {
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                for (d, xi) in gw[r * inp..(r + 1) * inp].iter_mut().zip(xv) {
                                    *d += gr * xi;
                                }
                            }
                        }
                    });
                    acc(*x, &mut |gx| {
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                for (d, wi) in gx.iter_mut().zip(&wv[r * inp..(r + 1) * inp]) {
                                    *d += gr * wi;
                                }
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                    acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                    acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d -= s));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    acc(*a, &mut |d| {
                        for ((d, s), y) in d.iter_mut().zip(g).zip(bv) {
                            *d += s * y;
                        }
                    });
                    acc(*b, &mut |d| {
                        for ((d, s), x) in d.iter_mut().zip(g).zip(av) {
                            *d += s * x;
                        }
                    });
                }
                Op::MulConst(a, c) => acc(*a, &mut |d| {
                    for ((d, s), k) in d.iter_mut().zip(g).zip(c) {
                        *d += s * k;
                    }
                }),
                Op::Scale(a, k) => acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += s * k)),
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    acc(*a, &mut |d| {
                        for ((d, s), x) in d.iter_mut().zip(g).zip(av) {
                            if *x > 0.0 {
                                *d += s;
                            }
                        }
                    });
                }
                Op::Sigmoid(a) => acc(*a, &mut |d| {
                    for ((d, s), y) in d.iter_mut().zip(g).zip(&node.value) {
                        *d += s * y * (1.0 - y);
                    }
                }),
                Op::Tanh(a) => acc(*a, &mut |d| {
                    for ((d, s), y) in d.iter_mut().zip(g).zip(&node.value) {
                        *d += s * (1.0 - y * y);
                    }
                }),
                Op::Exp(a) => acc(*a, &mut |d| {
                    for ((d, s), y) in d.iter_mut().zip(g).zip(&node.value) {
                        *d += s * y;
                    }
                }),
                Op::Clamp(a, lo, hi) => {
                    let av = &self.nodes[a.0].value;
                    acc(*a, &mut |d| {
                        for ((d, s), x) in d.iter_mut().zip(g).zip(av) {
                            if *x >= *lo && *x <= *hi {
                                *d += s;
                            }
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = lens[p.0];
                        acc(*p, &mut |d| {
                            d.iter_mut().zip(&g[offset..offset + n]).for_each(|(d, s)| *d += s)
                        });
                        offset += n;
                    }
                }
                Op::Slice(a, start) => acc(*a, &mut |d| {
                    d[*start..*start + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(d, s)| *d += s)
                }),
                Op::Conv3x3 { x, w, b, shape } => {
                    self.conv_backward(g, *x, *w, *b, *shape, &mut acc);
                }
                Op::MaxPool2 { x, argmax } => acc(*x, &mut |d| {
                    for (s, &i) in g.iter().zip(argmax) {
                        d[i] += s;
                    }
                }),
                Op::KlDiag { mq, lq, mp, lp } => {
                    let s = g[0];
                    let (mqv, lqv) = (&self.nodes[mq.0].value, &self.nodes[lq.0].value);
                    let (mpv, lpv) = (&self.nodes[mp.0].value, &self.nodes[lp.0].value);
                    let dim = mqv.len();
                    let mut d_mq = vec![0.0; dim];
                    let mut d_lq = vec![0.0; dim];
                    let mut d_lp = vec![0.0; dim];
                    for i in 0..dim {
                        let inv_vp = (-lpv[i]).exp();
                        let vq = lqv[i].exp();
                        let diff = mqv[i] - mpv[i];
                        d_mq[i] = s * diff * inv_vp;
                        d_lq[i] = s * 0.5 * (vq * inv_vp - 1.0);
                        d_lp[i] = s * 0.5 * (1.0 - (vq + diff * diff) * inv_vp);
                    }
                    acc(*mq, &mut |d| d.iter_mut().zip(&d_mq).for_each(|(d, v)| *d += v));
                    acc(*mp, &mut |d| d.iter_mut().zip(&d_mq).for_each(|(d, v)| *d -= v));
                    acc(*lq, &mut |d| d.iter_mut().zip(&d_lq).for_each(|(d, v)| *d += v));
                    acc(*lp, &mut |d| d.iter_mut().zip(&d_lp).for_each(|(d, v)| *d += v));
                }
                Op::HalfSqErr { pred, target } => {
                    let s = g[0];
                    let pv = &self.nodes[pred.0].value;
                    acc(*pred, &mut |d| {
                        for ((d, p), t) in d.iter_mut().zip(pv).zip(target) {
                            *d += s * (p - t);
                        }
                    });
                }
                Op::WeightedSum(terms) => {
                    for &(v, c) in terms {
                        acc(v, &mut |d| d[0] += g[0] * c);
                    }
                }
            }
        }
        Gradients { grads, lens }
    }

    fn conv_backward(
        &self,
        g: &[f64],
        x: Var,
        w: Var,
        b: Var,
        shape: ConvShape,
        acc: &mut Accumulate<'_>,
    ) {
        let ConvShape {
            in_channels: ci,
            out_channels: co,
            height: h,
            width: wd,
        } = shape;
        let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
        acc(b, &mut |gb| {
            for (o, d) in gb.iter_mut().enumerate() {
                *d += g[o * h * wd..(o + 1) * h * wd].iter().sum::<f64>();
            }
        });
        acc(w, &mut |gw| {
            for o in 0..co {
                let gplane = &g[o * h * wd..(o + 1) * h * wd];
                for c in 0..ci {
                    let input = &xv[c * h * wd..(c + 1) * h * wd];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                            let (x0, x1) = (1usize.saturating_sub(kx), (wd + 1 - kx).min(wd));
                            let mut s = 0.0;
                            for y in y0..y1 {
                                let iy = y + ky - 1;
                                let grow = &gplane[y * wd..(y + 1) * wd];
                                let irow = &input[iy * wd..(iy + 1) * wd];
                                for xx in x0..x1 {
                                    s += grow[xx] * irow[xx + kx - 1];
                                }
                            }
                            gw[((o * ci + c) * 3 + ky) * 3 + kx] += s;
                        }
                    }
                }
            }
        });
        acc(x, &mut |gx| {
            for o in 0..co {
                let gplane = &g[o * h * wd..(o + 1) * h * wd];
                for c in 0..ci {
                    let dplane = &mut gx[c * h * wd..(c + 1) * h * wd];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let k = wv[((o * ci + c) * 3 + ky) * 3 + kx];
                            if k == 0.0 {
                                continue;
                            }
                            let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                            let (x0, x1) = (1usize.saturating_sub(kx), (wd + 1 - kx).min(wd));
                            for y in y0..y1 {
                                let iy = y + ky - 1;
                                for xx in x0..x1 {
                                    dplane[iy * wd + xx + kx - 1] += k * gplane[y * wd + xx];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
}

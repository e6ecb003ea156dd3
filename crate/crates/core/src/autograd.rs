//! Minimal reverse-mode automatic differentiation over `ndarray` tensors.
//!
//! A [`Tape`] records one forward evaluation as a flat node list; each op
//! stores a boxed backward closure over the arrays it needs. Backward walks
//! the list in reverse and accumulates gradients into parameter slots.
//! Tapes are cheap, single-threaded values: data parallelism happens one
//! tape per sample, with per-sample gradients reduced in a fixed order by
//! the caller.
//!
//! The element type is generic so the same graph code can train in f32 and
//! be checked against central finite differences in f64.

use std::sync::Arc;

use ndarray::{ArrayD, Axis, Dimension, Ix1, Ix2, Ix3, Ix4, IxDyn};

/// Float element: f32 for training, f64 for gradient verification.
pub trait Real: ndarray::NdFloat + Send + Sync + std::iter::Sum {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

type BackwardFn<T> = Box<dyn FnOnce(&ArrayD<T>, &mut GradSink<T>)>;

struct Node<T: Real> {
    value: Arc<ArrayD<T>>,
    /// Parameter slot for leaves bound to trainable tensors.
    param_slot: Option<usize>,
    backward: Option<BackwardFn<T>>,
}

/// Per-node gradient accumulator used during the reverse sweep.
pub struct GradSink<T: Real> {
    grads: Vec<Option<ArrayD<T>>>,
}

impl<T: Real> GradSink<T> {
    fn add(&mut self, var: Var, grad: ArrayD<T>) {
        match &mut self.grads[var.0] {
            Some(g) => *g += &grad,
            slot @ None => *slot = Some(grad),
        }
    }
}

/// One recorded forward pass.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    n_slots: usize,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::with_capacity(256),
            n_slots: 0,
        }
    }

    fn push(&mut self, value: ArrayD<T>, backward: Option<BackwardFn<T>>) -> Var {
        self.nodes.push(Node {
            value: Arc::new(value),
            param_slot: None,
            backward,
        });
        Var(self.nodes.len() - 1)
    }

    /// Value of a node.
    pub fn value(&self, var: Var) -> &ArrayD<T> {
        &self.nodes[var.0].value
    }

    fn arc(&self, var: Var) -> Arc<ArrayD<T>> {
        Arc::clone(&self.nodes[var.0].value)
    }

    /// Leaf with no gradient.
    pub fn constant(&mut self, value: ArrayD<T>) -> Var {
        self.push(value, None)
    }

    /// Leaf bound to parameter slot `slot`; gradients accumulate there.
    pub fn param(&mut self, value: Arc<ArrayD<T>>, slot: usize) -> Var {
        self.n_slots = self.n_slots.max(slot + 1);
        self.nodes.push(Node {
            value,
            param_slot: Some(slot),
            backward: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reverse sweep from a scalar loss; returns per-slot gradients
    /// (zero-shaped `None` slots are omitted as `None`).
    pub fn backward(&mut self, loss: Var) -> Vec<Option<ArrayD<T>>> {
        assert_eq!(self.value(loss).len(), 1, "loss must be scalar");
        let mut sink = GradSink {
            grads: vec![None; self.nodes.len()],
        };
        sink.grads[loss.0] = Some(ArrayD::ones(self.value(loss).raw_dim()));
        let mut slot_grads: Vec<Option<ArrayD<T>>> = vec![None; self.n_slots];
        for idx in (0..=loss.0).rev() {
            let Some(grad) = sink.grads[idx].take() else {
                continue;
            };
            if let Some(slot) = self.nodes[idx].param_slot {
                match &mut slot_grads[slot] {
                    Some(g) => *g += &grad,
                    s @ None => *s = Some(grad),
                }
                continue;
            }
            if let Some(backward) = self.nodes[idx].backward.take() {
                backward(&grad, &mut sink);
            }
        }
        slot_grads
    }

    // ── elementwise ─────────────────────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = &*self.nodes[a.0].value + &*self.nodes[b.0].value;
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                sink.add(a, dy.clone());
                sink.add(b, dy.clone());
            })),
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let y = &*self.nodes[a.0].value - &*self.nodes[b.0].value;
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                sink.add(a, dy.clone());
                sink.add(b, dy.mapv(|v| -v));
            })),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.arc(a), self.arc(b));
        let y = &*av * &*bv;
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                sink.add(a, dy * &*bv);
                sink.add(b, dy * &*av);
            })),
        )
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let y = self.nodes[x.0].value.mapv(|v| v * c);
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                sink.add(x, dy.mapv(|v| v * c));
            })),
        )
    }

    /// Elementwise multiply by a fixed mask (dropout and similar).
    pub fn mul_mask(&mut self, x: Var, mask: ArrayD<T>) -> Var {
        let y = &*self.nodes[x.0].value * &mask;
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                sink.add(x, dy * &mask);
            })),
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.arc(x);
        let y = xv.mapv(|v| if v > T::zero() { v } else { T::zero() });
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                let mut dx = dy.clone();
                ndarray::Zip::from(&mut dx).and(&*xv).for_each(|d, &v| {
                    if v <= T::zero() {
                        *d = T::zero();
                    }
                });
                sink.add(x, dx);
            })),
        )
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = T::one();
        let y = self.nodes[x.0].value.mapv(|v| one / (one + (-v).exp()));
        let y_arc = Arc::new(y);
        let y_saved = Arc::clone(&y_arc);
        self.nodes.push(Node {
            value: y_arc,
            param_slot: None,
            backward: Some(Box::new(move |dy, sink| {
                let mut dx = dy.clone();
                ndarray::Zip::from(&mut dx).and(&*y_saved).for_each(|d, &v| {
                    *d = *d * v * (T::one() - v);
                });
                sink.add(x, dx);
            })),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.nodes[x.0].value.mapv(|v| v.tanh());
        let y_arc = Arc::new(y);
        let y_saved = Arc::clone(&y_arc);
        self.nodes.push(Node {
            value: y_arc,
            param_slot: None,
            backward: Some(Box::new(move |dy, sink| {
                let mut dx = dy.clone();
                ndarray::Zip::from(&mut dx).and(&*y_saved).for_each(|d, &v| {
                    *d = *d * (T::one() - v * v);
                });
                sink.add(x, dx);
            })),
        });
        Var(self.nodes.len() - 1)
    }

    // ── linear algebra ──────────────────────────────────────────────────

    /// `a [R,K] . b [K,C] -> [R,C]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.arc(a), self.arc(b));
        let a2 = av.view().into_dimensionality::<Ix2>().expect("matmul lhs 2-d");
        let b2 = bv.view().into_dimensionality::<Ix2>().expect("matmul rhs 2-d");
        let y = a2.dot(&b2).into_dyn();
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                let a2 = av.view().into_dimensionality::<Ix2>().unwrap();
                let b2 = bv.view().into_dimensionality::<Ix2>().unwrap();
                sink.add(a, dy2.dot(&b2.t()).into_dyn());
                sink.add(b, a2.t().dot(&dy2).into_dyn());
            })),
        )
    }

    /// Row-broadcast bias: `x [R,C] + b [C]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let bv = self.arc(b);
        let b1 = bv.view().into_dimensionality::<Ix1>().expect("bias 1-d");
        let y = &self.nodes[x.0].value.view().into_dimensionality::<Ix2>().expect("x 2-d") + &b1;
        self.push(
            y.into_dyn(),
            Some(Box::new(move |dy, sink| {
                let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                sink.add(x, dy.clone());
                sink.add(b, dy2.sum_axis(Axis(0)).into_dyn());
            })),
        )
    }

    /// Multiply by a gate broadcast along size-1 axes of `g`.
    pub fn mul_bcast(&mut self, x: Var, g: Var) -> Var {
        let (xv, gv) = (self.arc(x), self.arc(g));
        assert_eq!(xv.ndim(), gv.ndim(), "mul_bcast rank mismatch");
        let bcast_axes: Vec<usize> = (0..xv.ndim())
            .filter(|&i| gv.shape()[i] == 1 && xv.shape()[i] != 1)
            .collect();
        let y = &*xv * &gv.broadcast(xv.raw_dim()).expect("broadcastable gate");
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                let dx = dy * &gv.broadcast(xv.raw_dim()).unwrap();
                sink.add(x, dx);
                let mut dg = dy * &*xv;
                for &axis in &bcast_axes {
                    dg = dg.sum_axis(Axis(axis)).insert_axis(Axis(axis));
                }
                sink.add(g, dg);
            })),
        )
    }

    // ── reductions and shape ops ────────────────────────────────────────

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Var {
        let xv = self.arc(x);
        let n = xv.shape()[axis];
        let inv = T::one() / T::from_f64(n as f64);
        let y = xv.sum_axis(Axis(axis)).mapv(|v| v * inv);
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                let scale = T::one() / T::from_f64(n as f64);
                let expanded = dy
                    .clone()
                    .insert_axis(Axis(axis))
                    .broadcast(xv.raw_dim())
                    .unwrap()
                    .mapv(|v| v * scale);
                sink.add(x, expanded);
            })),
        )
    }

    pub fn max_axis(&mut self, x: Var, axis: usize) -> Var {
        let xv = self.arc(x);
        let y = xv.map_axis(Axis(axis), |lane| {
            lane.iter().copied().fold(T::neg_infinity(), T::max)
        });
        let argmax = xv.map_axis(Axis(axis), |lane| {
            let mut best = 0usize;
            for (i, &v) in lane.iter().enumerate() {
                if v > lane[best] {
                    best = i;
                }
            }
            best
        });
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                let mut dx = ArrayD::<T>::zeros(xv.raw_dim());
                for (idx, &am) in argmax.indexed_iter() {
                    let mut full = idx.slice().to_vec();
                    full.insert(axis, am);
                    dx[IxDyn(&full)] = dy[&idx];
                }
                sink.add(x, dx);
            })),
        )
    }

    /// Sum every element to a scalar of shape [1].
    pub fn sum_all(&mut self, x: Var) -> Var {
        let xv = self.arc(x);
        let total: T = xv.iter().copied().sum();
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[1]), vec![total]).unwrap(),
            Some(Box::new(move |dy, sink| {
                let g = dy[[0]];
                sink.add(x, ArrayD::from_elem(xv.raw_dim(), g));
            })),
        )
    }

    /// Sum scalar vars into one scalar.
    pub fn add_scalars(&mut self, terms: &[Var]) -> Var {
        let mut total = T::zero();
        for &t in terms {
            total = total + self.value(t)[[0]];
        }
        let terms: Vec<Var> = terms.to_vec();
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[1]), vec![total]).unwrap(),
            Some(Box::new(move |dy, sink| {
                for &t in &terms {
                    sink.add(t, dy.clone());
                }
            })),
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let xv = self.arc(x);
        let old = xv.raw_dim();
        let y = xv
            .to_shape(IxDyn(shape))
            .expect("reshape size mismatch")
            .to_owned();
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                sink.add(x, dy.to_shape(old).unwrap().to_owned());
            })),
        )
    }

    /// Contiguous slice along one axis.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Var {
        let xv = self.arc(x);
        let y = xv
            .slice_axis(Axis(axis), ndarray::Slice::from(start..start + len))
            .to_owned();
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                let mut dx = ArrayD::<T>::zeros(xv.raw_dim());
                dx.slice_axis_mut(Axis(axis), ndarray::Slice::from(start..start + len))
                    .assign(dy);
                sink.add(x, dx);
            })),
        )
    }

    pub fn concat(&mut self, axis: usize, parts: &[Var]) -> Var {
        let views: Vec<Arc<ArrayD<T>>> = parts.iter().map(|&p| self.arc(p)).collect();
        let y = ndarray::concatenate(
            Axis(axis),
            &views.iter().map(|v| v.view()).collect::<Vec<_>>(),
        )
        .expect("concat shape mismatch");
        let parts: Vec<(Var, usize)> = parts
            .iter()
            .zip(views.iter())
            .map(|(&p, v)| (p, v.shape()[axis]))
            .collect();
        self.push(
            y,
            Some(Box::new(move |dy, sink| {
                let mut offset = 0usize;
                for &(p, len) in &parts {
                    let slice = dy
                        .slice_axis(Axis(axis), ndarray::Slice::from(offset..offset + len))
                        .to_owned();
                    sink.add(p, slice);
                    offset += len;
                }
            })),
        )
    }

    // ── convolution and pooling ─────────────────────────────────────────

    /// 2-D convolution: `x [B,C,H,W] * w [O,C,kh,kw] (+ bias [O])`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        bias: Option<Var>,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Var {
        let (xv, wv) = (self.arc(x), self.arc(w));
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("conv2d input 4-d");
        let w4 = wv.view().into_dimensionality::<Ix4>().expect("conv2d weight 4-d");
        let (batch, c_in, h, width) = x4.dim();
        let (c_out, wc, kh, kw) = w4.dim();
        assert_eq!(c_in, wc, "conv2d channel mismatch");
        let h_out = conv_out(h, kh, stride.0, pad.0);
        let w_out = conv_out(width, kw, stride.1, pad.1);
        let w_mat = w4.to_shape((c_out, wc * kh * kw)).unwrap().to_owned();

        let mut y = ndarray::Array4::<T>::zeros((batch, c_out, h_out, w_out));
        let mut col = ndarray::Array2::<T>::zeros((wc * kh * kw, h_out * w_out));
        for b in 0..batch {
            im2col(&x4.index_axis(Axis(0), b), kh, kw, stride, pad, &mut col);
            let out = w_mat.dot(&col);
            y.index_axis_mut(Axis(0), b)
                .assign(&out.to_shape((c_out, h_out, w_out)).unwrap());
        }
        if let Some(bvar) = bias {
            let bval = self.arc(bvar);
            let b1 = bval.view().into_dimensionality::<Ix1>().unwrap();
            for o in 0..c_out {
                y.slice_mut(ndarray::s![.., o, .., ..]).mapv_inplace(|v| v + b1[o]);
            }
        }

        self.push(
            y.into_dyn(),
            Some(Box::new(move |dy, sink| {
                let dy4 = dy.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
                let w4 = wv.view().into_dimensionality::<Ix4>().unwrap();
                let w_mat = w4.to_shape((c_out, wc * kh * kw)).unwrap().to_owned();
                let mut dw_mat = ndarray::Array2::<T>::zeros((c_out, wc * kh * kw));
                let mut dx = ndarray::Array4::<T>::zeros((batch, c_in, h, width));
                let mut col = ndarray::Array2::<T>::zeros((wc * kh * kw, h_out * w_out));
                for b in 0..batch {
                    let dy_b = dy4
                        .index_axis(Axis(0), b)
                        .to_shape((c_out, h_out * w_out))
                        .unwrap()
                        .to_owned();
                    im2col(&x4.index_axis(Axis(0), b), kh, kw, stride, pad, &mut col);
                    dw_mat += &dy_b.dot(&col.t());
                    let dcol = w_mat.t().dot(&dy_b);
                    col2im(
                        &dcol,
                        kh,
                        kw,
                        stride,
                        pad,
                        &mut dx.index_axis_mut(Axis(0), b),
                    );
                }
                if let Some(bvar) = bias {
                    let db = dy4.sum_axis(Axis(3)).sum_axis(Axis(2)).sum_axis(Axis(0));
                    sink.add(bvar, db.into_dyn());
                }
                sink.add(w, dw_mat.to_shape((c_out, wc, kh, kw)).unwrap().to_owned().into_dyn());
                sink.add(x, dx.into_dyn());
            })),
        )
    }

    /// 1-D convolution over the last axis: `x [B,C,L] * w [O,C,k]`.
    pub fn conv1d(&mut self, x: Var, w: Var, bias: Option<Var>, pad: usize) -> Var {
        // reuse conv2d by treating the signal as height-1 rows
        let xv = self.arc(x);
        let (b, c, l) = xv.view().into_dimensionality::<Ix3>().expect("conv1d input 3-d").dim();
        let wv = self.arc(w);
        let (o, wc, k) = wv.view().into_dimensionality::<Ix3>().expect("conv1d weight 3-d").dim();
        let x4 = self.reshape(x, &[b, c, 1, l]);
        let w4 = self.reshape(w, &[o, wc, 1, k]);
        let y4 = self.conv2d(x4, w4, bias, (1, 1), (0, pad));
        let l_out = conv_out(l, k, 1, pad);
        self.reshape(y4, &[b, o, l_out])
    }

    /// Global average pool `[B,C,H,W] -> [B,C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let xv = self.arc(x);
        let (b, c, h, w) = xv.view().into_dimensionality::<Ix4>().expect("gap input 4-d").dim();
        let flat = self.reshape(x, &[b, c, h * w]);
        self.mean_axis(flat, 2)
    }

    /// Max over the last axis `[B,F,L] -> [B,F]`.
    pub fn max_over_time(&mut self, x: Var) -> Var {
        self.max_axis(x, 2)
    }

    /// Group normalization with affine parameters per channel.
    /// `x [B,C,H,W]`, `gamma/beta [C]`; groups must divide C.
    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize, eps: T) -> Var {
        let xv = self.arc(x);
        let gv = self.arc(gamma);
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("gn input 4-d");
        let (b, c, h, w) = x4.dim();
        assert!(c % groups == 0, "groups must divide channels");
        let per = c / groups;
        let m = per * h * w;

        let mut xhat = ndarray::Array4::<T>::zeros((b, c, h, w));
        let mut inv_std = ndarray::Array2::<T>::zeros((b, groups));
        for bi in 0..b {
            for g in 0..groups {
                let slab = x4.slice(ndarray::s![bi, g * per..(g + 1) * per, .., ..]);
                let mean: T = slab.iter().copied().sum::<T>() / T::from_f64(m as f64);
                let var: T = slab
                    .iter()
                    .map(|&v| (v - mean) * (v - mean))
                    .sum::<T>()
                    / T::from_f64(m as f64);
                let istd = T::one() / (var + eps).sqrt();
                inv_std[[bi, g]] = istd;
                let mut dst = xhat.slice_mut(ndarray::s![bi, g * per..(g + 1) * per, .., ..]);
                dst.assign(&slab.mapv(|v| (v - mean) * istd));
            }
        }
        let xhat = Arc::new(xhat);
        let xhat_fw = Arc::clone(&xhat);

        let gamma1 = gv.view().into_dimensionality::<Ix1>().unwrap();
        let beta_arc = self.arc(beta);
        let beta1 = beta_arc.view().into_dimensionality::<Ix1>().unwrap();
        let mut y = ndarray::Array4::<T>::zeros((b, c, h, w));
        for ci in 0..c {
            let src = xhat_fw.index_axis(Axis(1), ci);
            let mut dst = y.index_axis_mut(Axis(1), ci);
            dst.assign(&src.mapv(|v| v * gamma1[ci] + beta1[ci]));
        }

        self.push(
            y.into_dyn(),
            Some(Box::new(move |dy, sink| {
                let dy4 = dy.view().into_dimensionality::<Ix4>().unwrap();
                let g1 = gv.view().into_dimensionality::<Ix1>().unwrap();
                // affine grads
                let mut dgamma = ndarray::Array1::<T>::zeros(c);
                let mut dbeta = ndarray::Array1::<T>::zeros(c);
                for ci in 0..c {
                    let dyc = dy4.index_axis(Axis(1), ci);
                    let xc = xhat.index_axis(Axis(1), ci);
                    dgamma[ci] = dyc.iter().zip(xc.iter()).map(|(&d, &v)| d * v).sum();
                    dbeta[ci] = dyc.iter().copied().sum();
                }
                // input grad per group
                let mut dx = ndarray::Array4::<T>::zeros((b, c, h, w));
                let m_t = T::from_f64(m as f64);
                for bi in 0..b {
                    for g in 0..groups {
                        let range = g * per..(g + 1) * per;
                        let xh = xhat.slice(ndarray::s![bi, range.clone(), .., ..]);
                        let dyg = dy4.slice(ndarray::s![bi, range.clone(), .., ..]);
                        // dxhat = dy * gamma (per channel)
                        let mut dxhat = dyg.to_owned();
                        for (pci, mut plane) in dxhat.outer_iter_mut().enumerate() {
                            let gc = g1[g * per + pci];
                            plane.mapv_inplace(|v| v * gc);
                        }
                        let sum_dxhat: T = dxhat.iter().copied().sum();
                        let sum_dxhat_xhat: T =
                            dxhat.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum();
                        let istd = inv_std[[bi, g]];
                        let mut dst = dx.slice_mut(ndarray::s![bi, range, .., ..]);
                        ndarray::Zip::from(&mut dst)
                            .and(&dxhat)
                            .and(&xh)
                            .for_each(|d, &dxh, &xhv| {
                                *d = istd
                                    * (dxh - sum_dxhat / m_t - xhv * sum_dxhat_xhat / m_t);
                            });
                    }
                }
                sink.add(gamma, dgamma.into_dyn());
                sink.add(beta, dbeta.into_dyn());
                sink.add(x, dx.into_dyn());
            })),
        )
    }

    /// Focal loss for one head: `logits [K]`, softmax probability of the
    /// target, loss `-alpha * (1 - p_t)^gamma * ln(p_t)` as a [1] scalar.
    pub fn focal_loss(&mut self, logits: Var, target: usize, gamma: T, alpha: T) -> Var {
        let zv = self.arc(logits);
        let z = zv.view().into_dimensionality::<Ix1>().expect("logits 1-d");
        let k = z.len();
        assert!(target < k, "target out of range");
        let zmax = z.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = z.iter().map(|&v| (v - zmax).exp()).collect();
        let denom: T = exps.iter().copied().sum();
        let p: Vec<T> = exps.iter().map(|&e| e / denom).collect();
        let floor = T::from_f64(1e-12);
        let pt = p[target].max(floor);
        let one = T::one();
        let loss = -alpha * (one - pt).powf(gamma) * pt.ln();
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[1]), vec![loss]).unwrap(),
            Some(Box::new(move |dy, sink| {
                let g = dy[[0]];
                // dL/dpt, then chain through softmax
                let dl_dpt = alpha * gamma * (one - pt).powf(gamma - one) * pt.ln()
                    - alpha * (one - pt).powf(gamma) / pt;
                let mut dz = vec![T::zero(); k];
                for (j, dzj) in dz.iter_mut().enumerate() {
                    let indicator = if j == target { one } else { T::zero() };
                    *dzj = g * dl_dpt * pt * (indicator - p[j]);
                }
                sink.add(
                    logits,
                    ArrayD::from_shape_vec(IxDyn(&[k]), dz).unwrap(),
                );
            })),
        )
    }
}

/// Output length of a convolution along one axis.
pub fn conv_out(len: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - kernel) / stride + 1
}

/// Unfold one image `[C,H,W]` into the column matrix `[C*kh*kw, H'*W']`.
/// First and one-past-last output index whose input index
/// `o * stride + k - pad` lands inside `0..len`.
#[inline]
fn valid_out_range(len: usize, out_len: usize, stride: usize, pad: usize, k: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k).div_ceil(stride.max(1));
    let hi_excl = if len + pad > k {
        ((len + pad - k - 1) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo.min(out_len), hi_excl)
}

fn im2col<T: Real>(
    x: &ndarray::ArrayView3<T>,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    pad: (usize, usize),
    col: &mut ndarray::Array2<T>,
) {
    let (c, h, w) = x.dim();
    let h_out = conv_out(h, kh, stride.0, pad.0);
    let w_out = conv_out(w, kw, stride.1, pad.1);
    debug_assert_eq!(col.dim(), (c * kh * kw, h_out * w_out));
    col.fill(T::zero());
    for ci in 0..c {
        let plane = x.index_axis(Axis(0), ci);
        for i in 0..kh {
            let (oh_lo, oh_hi) = valid_out_range(h, h_out, stride.0, pad.0, i);
            for j in 0..kw {
                let row = (ci * kh + i) * kw + j;
                let (ow_lo, ow_hi) = valid_out_range(w, w_out, stride.1, pad.1, j);
                let mut col_row = col.row_mut(row);
                let col_slice = col_row.as_slice_mut().unwrap();
                for oh in oh_lo..oh_hi {
                    let ih = oh * stride.0 + i - pad.0;
                    let src = plane.index_axis(Axis(0), ih);
                    let src = src.as_slice().unwrap();
                    let dst = &mut col_slice[oh * w_out..(oh + 1) * w_out];
                    for ow in ow_lo..ow_hi {
                        dst[ow] = src[ow * stride.1 + j - pad.1];
                    }
                }
            }
        }
    }
}

/// Fold a column-matrix gradient back onto the image (scatter-add).
fn col2im<T: Real>(
    dcol: &ndarray::Array2<T>,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    pad: (usize, usize),
    dx: &mut ndarray::ArrayViewMut3<T>,
) {
    let (c, h, w) = dx.dim();
    let h_out = conv_out(h, kh, stride.0, pad.0);
    let w_out = conv_out(w, kw, stride.1, pad.1);
    for ci in 0..c {
        let mut plane = dx.index_axis_mut(Axis(0), ci);
        for i in 0..kh {
            let (oh_lo, oh_hi) = valid_out_range(h, h_out, stride.0, pad.0, i);
            for j in 0..kw {
                let row = (ci * kh + i) * kw + j;
                let col_row = dcol.row(row);
                let col_slice = col_row
                    .as_slice()
                    .unwrap_or_else(|| panic!("col2im dcol row not contiguous: dcol dim {:?} strides {:?}", dcol.dim(), dcol.strides()));
                let (ow_lo, ow_hi) = valid_out_range(w, w_out, stride.1, pad.1, j);
                for oh in oh_lo..oh_hi {
                    let ih = oh * stride.0 + i - pad.0;
                    let mut dst_row = plane.index_axis_mut(Axis(0), ih);
                    let dst = dst_row.as_slice_mut().unwrap();
                    let src = &col_slice[oh * w_out..(oh + 1) * w_out];
                    for ow in ow_lo..ow_hi {
                        let iw = ow * stride.1 + j - pad.1;
                        dst[iw] = dst[iw] + src[ow];
                    }
                }
            }
        }
    }
}

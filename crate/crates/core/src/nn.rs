//! Layers, initialization, parameter storage, and the AdamW optimizer.
//!
//! Layers are plain structs holding parameter slot indices into a
//! [`ParamStore`]; a forward pass binds every tensor to a [`Tape`] once and
//! layers consume those bound `Var`s. Initial values are drawn in f64 and
//! converted, so an f32 training model and its f64 gradient-check twin start
//! from identical weights.

use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Real, Tape, Var};
use crate::error::{Error, Result};

/// Named trainable tensors addressed by slot index.
pub struct ParamStore<T: Real> {
    tensors: Vec<Arc<ArrayD<T>>>,
    names: Vec<String>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            tensors: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: ArrayD<T>) -> usize {
        self.tensors.push(Arc::new(value));
        self.names.push(name.into());
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn tensor(&self, slot: usize) -> &Arc<ArrayD<T>> {
        &self.tensors[slot]
    }

    pub fn name(&self, slot: usize) -> &str {
        &self.names[slot]
    }

    pub fn set(&mut self, slot: usize, value: ArrayD<T>) {
        assert_eq!(value.shape(), self.tensors[slot].shape(), "shape mismatch");
        self.tensors[slot] = Arc::new(value);
    }

    /// Bind every tensor to the tape; index the result by slot.
    pub fn bind_all(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(slot, t)| tape.param(Arc::clone(t), slot))
            .collect()
    }

    /// Apply `update(slot, tensor)` in place on every tensor.
    pub fn update_tensors(&mut self, mut update: impl FnMut(usize, &mut ArrayD<T>)) {
        for (slot, tensor) in self.tensors.iter_mut().enumerate() {
            update(slot, Arc::make_mut(tensor));
        }
    }

    /// Convert element type (f32 <-> f64) keeping names and shapes.
    pub fn convert<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|t| Arc::new(t.mapv(|v| U::from_f64(v.to_f64()))))
                .collect(),
            names: self.names.clone(),
        }
    }

    /// Flatten all tensors into one vector (slot order, row-major).
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in &self.tensors {
            out.extend(t.iter().copied());
        }
        out
    }

    /// Load a flat vector produced by [`ParamStore::flat`].
    pub fn load_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat parameter vector has {} values, store holds {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0usize;
        for tensor in &mut self.tensors {
            let t = Arc::make_mut(tensor);
            let n = t.len();
            for (dst, &src) in t.iter_mut().zip(&flat[offset..offset + n]) {
                *dst = src;
            }
            offset += n;
        }
        Ok(())
    }
}

impl ParamStore<f32> {
    const MAGIC: &'static [u8; 8] = b"MISPARM1";

    /// Write the documented little-endian checkpoint layout.
    pub fn save_binary(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(Self::MAGIC)?;
        out.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (tensor, name) in self.tensors.iter().zip(&self.names) {
            out.write_all(&(name.len() as u16).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(tensor.ndim() as u8).to_le_bytes())?;
            for &d in tensor.shape() {
                out.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in tensor.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Read a checkpoint; tensor names and shapes must match this store.
    pub fn load_binary(&mut self, path: &std::path::Path) -> Result<()> {
        use std::io::Read;
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        let fail = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
        if data.len() < 12 || &data[..8] != Self::MAGIC {
            return Err(fail("bad magic"));
        }
        let count = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
        if count != self.tensors.len() {
            return Err(fail("tensor count mismatch"));
        }
        let mut off = 12usize;
        let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
            if *off + n > data.len() {
                return Err(fail("truncated checkpoint"));
            }
            let s = &data[*off..*off + n];
            *off += n;
            Ok(s)
        };
        for slot in 0..count {
            let name_len = u16::from_le_bytes(take(&mut off, 2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(&mut off, name_len)?.to_vec())
                .map_err(|_| fail("bad tensor name"))?;
            if name != self.names[slot] {
                return Err(fail(&format!(
                    "tensor {slot} is {name:?}, expected {:?}",
                    self.names[slot]
                )));
            }
            let ndim = take(&mut off, 1)?[0] as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize);
            }
            if shape != self.tensors[slot].shape() {
                return Err(fail(&format!("shape mismatch for {name}")));
            }
            let n: usize = shape.iter().product();
            let bytes = take(&mut off, 4 * n)?;
            let values: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            self.tensors[slot] = Arc::new(ArrayD::from_shape_vec(IxDyn(&shape), values).unwrap());
        }
        if off != data.len() {
            return Err(fail("trailing bytes"));
        }
        Ok(())
    }
}

// ── initializers ────────────────────────────────────────────────────────

pub fn he_normal<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> ArrayD<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    randn(rng, shape, std)
}

pub fn xavier_uniform<T: Real>(
    rng: &mut ChaCha8Rng,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> ArrayD<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    ArrayD::from_shape_fn(IxDyn(shape), |_| {
        T::from_f64(rng.gen_range(-limit..limit))
    })
}

pub fn randn<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], std: f64) -> ArrayD<T> {
    use rand_distr::Distribution;
    let normal = rand_distr::Normal::new(0.0f64, std).unwrap();
    ArrayD::from_shape_fn(IxDyn(shape), |_| T::from_f64(normal.sample(rng)))
}

pub fn zeros<T: Real>(shape: &[usize]) -> ArrayD<T> {
    ArrayD::zeros(IxDyn(shape))
}

pub fn ones<T: Real>(shape: &[usize]) -> ArrayD<T> {
    ArrayD::ones(IxDyn(shape))
}

// ── layers ──────────────────────────────────────────────────────────────

/// Fully connected layer `[R,in] -> [R,out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        let w = store.add(format!("{name}.w"), he_normal(rng, &[in_dim, out_dim], in_dim));
        let b = store.add(format!("{name}.b"), zeros(&[out_dim]));
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Var {
        let y = tape.matmul(x, vars[self.w]);
        tape.add_bias(y, vars[self.b])
    }
}

/// 2-D convolution layer.
#[derive(Debug, Clone)]
pub struct Conv2dLayer {
    pub w: usize,
    pub b: usize,
    pub stride: (usize, usize),
    pub pad: (usize, usize),
}

impl Conv2dLayer {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Self {
        let fan_in = in_ch * kernel.0 * kernel.1;
        let w = store.add(
            format!("{name}.w"),
            he_normal(rng, &[out_ch, in_ch, kernel.0, kernel.1], fan_in),
        );
        let b = store.add(format!("{name}.b"), zeros(&[out_ch]));
        Conv2dLayer { w, b, stride, pad }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Var {
        tape.conv2d(x, vars[self.w], Some(vars[self.b]), self.stride, self.pad)
    }
}

/// Group normalization layer with affine parameters.
#[derive(Debug, Clone)]
pub struct GroupNormLayer {
    pub gamma: usize,
    pub beta: usize,
    pub groups: usize,
}

impl GroupNormLayer {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        let groups = if channels % 8 == 0 { 8 } else { 1 };
        GroupNormLayer {
            gamma: store.add(format!("{name}.gamma"), ones(&[channels])),
            beta: store.add(format!("{name}.beta"), zeros(&[channels])),
            groups,
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Var {
        tape.group_norm(
            x,
            vars[self.gamma],
            vars[self.beta],
            self.groups,
            T::from_f64(1e-5),
        )
    }
}

/// Squeeze-excitation channel gate.
#[derive(Debug, Clone)]
pub struct SeBlock {
    fc1: Linear,
    fc2: Linear,
}

impl SeBlock {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        channels: usize,
        reduction: usize,
    ) -> Self {
        let mid = (channels / reduction).max(1);
        SeBlock {
            fc1: Linear::new(store, rng, &format!("{name}.fc1"), channels, mid),
            fc2: Linear::new(store, rng, &format!("{name}.fc2"), mid, channels),
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Var {
        let (b, c) = {
            let shape = tape.value(x).shape();
            (shape[0], shape[1])
        };
        let pooled = tape.global_avg_pool(x); // [B,C]
        let h = self.fc1.forward(tape, vars, pooled);
        let h = tape.relu(h);
        let h = self.fc2.forward(tape, vars, h);
        let gate = tape.sigmoid(h);
        let gate = tape.reshape(gate, &[b, c, 1, 1]);
        tape.mul_bcast(x, gate)
    }
}

/// Residual block: conv-GN-ReLU-conv-GN (+SE) with projection shortcut on
/// shape change, ReLU after the join.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    conv1: Conv2dLayer,
    gn1: GroupNormLayer,
    conv2: Conv2dLayer,
    gn2: GroupNormLayer,
    se: Option<SeBlock>,
    shortcut: Option<(Conv2dLayer, GroupNormLayer)>,
}

impl ResidualBlock {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        squeeze_excitation: bool,
    ) -> Self {
        let conv1 = Conv2dLayer::new(
            store,
            rng,
            &format!("{name}.conv1"),
            in_ch,
            out_ch,
            (3, 3),
            (stride, stride),
            (1, 1),
        );
        let gn1 = GroupNormLayer::new(store, &format!("{name}.gn1"), out_ch);
        let conv2 = Conv2dLayer::new(
            store,
            rng,
            &format!("{name}.conv2"),
            out_ch,
            out_ch,
            (3, 3),
            (1, 1),
            (1, 1),
        );
        let gn2 = GroupNormLayer::new(store, &format!("{name}.gn2"), out_ch);
        let se = squeeze_excitation
            .then(|| SeBlock::new(store, rng, &format!("{name}.se"), out_ch, 4));
        let shortcut = (in_ch != out_ch || stride != 1).then(|| {
            (
                Conv2dLayer::new(
                    store,
                    rng,
                    &format!("{name}.sc"),
                    in_ch,
                    out_ch,
                    (1, 1),
                    (stride, stride),
                    (0, 0),
                ),
                GroupNormLayer::new(store, &format!("{name}.scgn"), out_ch),
            )
        });
        ResidualBlock {
            conv1,
            gn1,
            conv2,
            gn2,
            se,
            shortcut,
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Var {
        let y = self.conv1.forward(tape, vars, x);
        let y = self.gn1.forward(tape, vars, y);
        let y = tape.relu(y);
        let y = self.conv2.forward(tape, vars, y);
        let mut y = self.gn2.forward(tape, vars, y);
        if let Some(se) = &self.se {
            y = se.forward(tape, vars, y);
        }
        let residual = match &self.shortcut {
            Some((conv, gn)) => {
                let s = conv.forward(tape, vars, x);
                gn.forward(tape, vars, s)
            }
            None => x,
        };
        let joined = tape.add(y, residual);
        tape.relu(joined)
    }
}

/// One LSTM layer; weights laid out input-major so steps are two matmuls.
/// Gate order i, f, g, o; forget-gate bias initialized to 1.
#[derive(Debug, Clone)]
pub struct LstmLayer {
    pub w_ih: usize,
    pub w_hh: usize,
    pub bias: usize,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmLayer {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Self {
        let w_ih = store.add(
            format!("{name}.w_ih"),
            xavier_uniform(rng, &[input_dim, 4 * hidden], input_dim, hidden),
        );
        let w_hh = store.add(
            format!("{name}.w_hh"),
            xavier_uniform(rng, &[hidden, 4 * hidden], hidden, hidden),
        );
        let mut b = zeros::<T>(&[4 * hidden]);
        for i in hidden..2 * hidden {
            b[[i]] = T::one(); // forget gate
        }
        let bias = store.add(format!("{name}.bias"), b);
        LstmLayer {
            w_ih,
            w_hh,
            bias,
            input_dim,
            hidden,
        }
    }

    /// Run over a sequence of `[1, input_dim]` steps; returns per-step
    /// hidden states `[1, hidden]`.
    pub fn forward_seq<T: Real>(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        inputs: &[Var],
    ) -> Vec<Var> {
        let h0 = tape.constant(zeros::<T>(&[1, self.hidden]));
        let c0 = tape.constant(zeros::<T>(&[1, self.hidden]));
        let (mut h, mut c) = (h0, c0);
        let mut outputs = Vec::with_capacity(inputs.len());
        for &x in inputs {
            let zx = tape.matmul(x, vars[self.w_ih]);
            let zh = tape.matmul(h, vars[self.w_hh]);
            let z = tape.add(zx, zh);
            let z = tape.add_bias(z, vars[self.bias]);
            let hsize = self.hidden;
            let i_gate = tape.narrow(z, 1, 0, hsize);
            let f_gate = tape.narrow(z, 1, hsize, hsize);
            let g_gate = tape.narrow(z, 1, 2 * hsize, hsize);
            let o_gate = tape.narrow(z, 1, 3 * hsize, hsize);
            let i_gate = tape.sigmoid(i_gate);
            let f_gate = tape.sigmoid(f_gate);
            let g_gate = tape.tanh(g_gate);
            let o_gate = tape.sigmoid(o_gate);
            let fc = tape.mul(f_gate, c);
            let ig = tape.mul(i_gate, g_gate);
            c = tape.add(fc, ig);
            let ct = tape.tanh(c);
            h = tape.mul(o_gate, ct);
            outputs.push(h);
        }
        outputs
    }
}

/// Sequence CBAM: channel attention over embedding dims, then position
/// attention over blocks, on a `[B, D]` block-embedding matrix.
#[derive(Debug, Clone)]
pub struct CbamSeq {
    mlp1: Linear,
    mlp2: Linear,
    spatial: usize, // conv1d weight [1, 2, k]
    spatial_bias: usize,
    kernel: usize,
}

impl CbamSeq {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        dim: usize,
        reduction: usize,
    ) -> Self {
        let mid = (dim / reduction).max(1);
        let kernel = 3usize;
        CbamSeq {
            mlp1: Linear::new(store, rng, &format!("{name}.mlp1"), dim, mid),
            mlp2: Linear::new(store, rng, &format!("{name}.mlp2"), mid, dim),
            spatial: store.add(
                format!("{name}.spatial.w"),
                he_normal(rng, &[1, 2, kernel], 2 * kernel),
            ),
            spatial_bias: store.add(format!("{name}.spatial.b"), zeros(&[1])),
            kernel,
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Var {
        let (blocks, dim) = {
            let shape = tape.value(x).shape();
            (shape[0], shape[1])
        };
        // channel attention: shared MLP over avg- and max-pooled descriptors
        let avg = tape.mean_axis(x, 0);
        let avg = tape.reshape(avg, &[1, dim]);
        let max = tape.max_axis(x, 0);
        let max = tape.reshape(max, &[1, dim]);
        let a = self.mlp1.forward(tape, vars, avg);
        let a = tape.relu(a);
        let a = self.mlp2.forward(tape, vars, a);
        let m = self.mlp1.forward(tape, vars, max);
        let m = tape.relu(m);
        let m = self.mlp2.forward(tape, vars, m);
        let gate = tape.add(a, m);
        let gate = tape.sigmoid(gate); // [1, D]
        let x = tape.mul_bcast(x, gate);

        // position attention along the block axis
        let mean_d = tape.mean_axis(x, 1); // [B]
        let max_d = tape.max_axis(x, 1); // [B]
        let mean_d = tape.reshape(mean_d, &[1, 1, blocks]);
        let max_d = tape.reshape(max_d, &[1, 1, blocks]);
        let stacked = tape.concat(1, &[mean_d, max_d]); // [1,2,B]
        let conv = tape.conv1d(
            stacked,
            vars[self.spatial],
            Some(vars[self.spatial_bias]),
            self.kernel / 2,
        ); // [1,1,B]
        let gate = tape.sigmoid(conv);
        let gate = tape.reshape(gate, &[blocks, 1]);
        tape.mul_bcast(x, gate)
    }
}

/// 2-D CBAM applied to a convolutional feature map `[B,C,H,W]`.
#[derive(Debug, Clone)]
pub struct Cbam2d {
    mlp1: Linear,
    mlp2: Linear,
    spatial: usize, // conv2d weight [1, 2, k, k]
    spatial_bias: usize,
    kernel: usize,
}

impl Cbam2d {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        channels: usize,
        reduction: usize,
    ) -> Self {
        let mid = (channels / reduction).max(1);
        let kernel = 7usize;
        Cbam2d {
            mlp1: Linear::new(store, rng, &format!("{name}.mlp1"), channels, mid),
            mlp2: Linear::new(store, rng, &format!("{name}.mlp2"), mid, channels),
            spatial: store.add(
                format!("{name}.spatial.w"),
                he_normal(rng, &[1, 2, kernel, kernel], 2 * kernel * kernel),
            ),
            spatial_bias: store.add(format!("{name}.spatial.b"), zeros(&[1])),
            kernel,
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Var {
        let (b, c, h, w) = {
            let shape = tape.value(x).shape();
            (shape[0], shape[1], shape[2], shape[3])
        };
        let avg = tape.global_avg_pool(x); // [B,C]
        let flat = tape.reshape(x, &[b, c, h * w]);
        let max = tape.max_over_time(flat); // [B,C]
        let a = self.mlp1.forward(tape, vars, avg);
        let a = tape.relu(a);
        let a = self.mlp2.forward(tape, vars, a);
        let m = self.mlp1.forward(tape, vars, max);
        let m = tape.relu(m);
        let m = self.mlp2.forward(tape, vars, m);
        let gate = tape.add(a, m);
        let gate = tape.sigmoid(gate);
        let gate = tape.reshape(gate, &[b, c, 1, 1]);
        let x = tape.mul_bcast(x, gate);

        let mean_c = tape.mean_axis(x, 1); // [B,H,W]
        let max_c = tape.max_axis(x, 1); // [B,H,W]
        let mean_c = tape.reshape(mean_c, &[b, 1, h, w]);
        let max_c = tape.reshape(max_c, &[b, 1, h, w]);
        let stacked = tape.concat(1, &[mean_c, max_c]); // [B,2,H,W]
        let pad = self.kernel / 2;
        let conv = tape.conv2d(
            stacked,
            vars[self.spatial],
            Some(vars[self.spatial_bias]),
            (1, 1),
            (pad, pad),
        ); // [B,1,H,W]
        let gate = tape.sigmoid(conv);
        tape.mul_bcast(x, gate)
    }
}

// ── optimizer ───────────────────────────────────────────────────────────

/// Adam with decoupled weight decay.
pub struct AdamW<T: Real> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub weight_decay: T,
    step: u64,
    m: Vec<ArrayD<T>>,
    v: Vec<ArrayD<T>>,
}

impl<T: Real> AdamW<T> {
    pub fn new(store: &ParamStore<T>, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr: T::from_f64(lr),
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            weight_decay: T::from_f64(weight_decay),
            step: 0,
            m: (0..store.len())
                .map(|s| ArrayD::zeros(store.tensor(s).raw_dim()))
                .collect(),
            v: (0..store.len())
                .map(|s| ArrayD::zeros(store.tensor(s).raw_dim()))
                .collect(),
        }
    }

    /// One update; `grads` are per-slot (missing slots are skipped).
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<ArrayD<T>>]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        let (lr, eps, wd) = (self.lr, self.eps, self.weight_decay);
        let (m, v) = (&mut self.m, &mut self.v);
        store.update_tensors(|slot, tensor| {
            let Some(grad) = &grads[slot] else { return };
            let m = &mut m[slot];
            let v = &mut v[slot];
            ndarray::Zip::from(tensor)
                .and(m)
                .and(v)
                .and(grad)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (T::one() - b1) * g;
                    *v = b2 * *v + (T::one() - b2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p = *p - lr * (mhat / (vhat.sqrt() + eps) + wd * *p);
                });
        });
    }
}

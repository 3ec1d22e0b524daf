//! Small dense/convolutional network kernel with exact reverse-mode
//! gradients, Adam, and target-network soft updates. Double precision.
//!
//! Tensors are batch-major `[batch, features]`. A [`Conv1d`] layer reads each
//! sample's features as a `[length, channels]` row-major block and writes
//! `[out_length, out_channels]`, so a following dense layer sees the flattened
//! feature map without any reshaping.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(batch, features)` of a 2-D tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            other => Err(Error::Shape {
                expected: vec![0, 0],
                actual: other.to_vec(),
            }),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => crate::lifecycle::logistic(v),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// `c ← a·b + beta·c` on strided row-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(k == 0 || last(m, k, rsa, csa) < a.len(), "gemm: lhs view out of bounds");
    assert!(k == 0 || last(k, n, rsb, csb) < b.len(), "gemm: rhs view out of bounds");
    assert!(last(m, n, rsc, csc) < c.len(), "gemm: output view out of bounds");
    // SAFETY: every view was bounds-checked above and `c` is uniquely borrowed.
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
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

fn uniform_init<R: Rng + ?Sized>(rng: &mut R, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `[out, in]`
    pub w: Tensor,
    /// `[out]`
    pub b: Tensor,
    pub activation: Activation,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            w: Tensor {
                shape: vec![outputs, inputs],
                data: uniform_init(rng, outputs * inputs, inputs),
            },
            b: Tensor {
                shape: vec![outputs],
                data: uniform_init(rng, outputs, inputs),
            },
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.shape[1]
    }

    pub fn outputs(&self) -> usize {
        self.w.shape[0]
    }

    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (out, inp) = (self.outputs(), self.inputs());
        let mut y = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            y.extend_from_slice(&self.b.data);
        }
        gemm(batch, inp, out, x, (inp, 1), &self.w.data, (1, inp), 1.0, &mut y, (out, 1));
        let act = self.activation;
        if act != Activation::Identity {
            y.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        y
    }

    /// `dz` is the gradient w.r.t. the pre-activation.
    fn backward(&self, x: &[f64], dz: &[f64], batch: usize, need: Need) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
        let (out, inp) = (self.outputs(), self.inputs());
        let mut dw = vec![0.0; out * inp];
        if need.params {
            gemm(out, batch, inp, dz, (1, out), x, (inp, 1), 0.0, &mut dw, (inp, 1));
        }
        let mut db = vec![0.0; out];
        for r in 0..batch {
            for (acc, g) in db.iter_mut().zip(&dz[r * out..(r + 1) * out]) {
                *acc += g;
            }
        }
        let dx = need.input.then(|| {
            let mut dx = vec![0.0; batch * inp];
            gemm(batch, out, inp, dz, (out, 1), &self.w.data, (inp, 1), 0.0, &mut dx, (inp, 1));
            dx
        });
        (dw, db, dx)
    }
}

#[derive(Clone, Copy)]
struct Need {
    params: bool,
    input: bool,
}

/// 1-D convolution along the length axis of a channels-last sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    /// `[out_channels, kernel_len, in_channels]`
    pub kernels: Tensor,
    /// `[out_channels]`
    pub b: Tensor,
    pub stride: usize,
    pub in_len: usize,
    pub activation: Activation,
}

pub fn conv_output_len(in_len: usize, kernel_len: usize, stride: usize) -> Option<usize> {
    if stride == 0 || kernel_len == 0 || in_len < kernel_len {
        None
    } else {
        Some((in_len - kernel_len) / stride + 1)
    }
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        rng: &mut R,
        in_len: usize,
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
        activation: Activation,
    ) -> Result<Self> {
        if conv_output_len(in_len, kernel_len, stride).is_none() {
            return Err(Error::Config(format!(
                "conv: length {in_len} too short for kernel {kernel_len} / stride {stride}"
            )));
        }
        let fan_in = kernel_len * in_channels;
        Ok(Self {
            kernels: Tensor {
                shape: vec![out_channels, kernel_len, in_channels],
                data: uniform_init(rng, out_channels * fan_in, fan_in),
            },
            b: Tensor {
                shape: vec![out_channels],
                data: uniform_init(rng, out_channels, fan_in),
            },
            stride,
            in_len,
            activation,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape[0]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape[1]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape[2]
    }

    pub fn out_len(&self) -> usize {
        conv_output_len(self.in_len, self.kernel_len(), self.stride).unwrap_or(0)
    }

    pub fn inputs(&self) -> usize {
        self.in_len * self.in_channels()
    }

    pub fn outputs(&self) -> usize {
        self.out_len() * self.out_channels()
    }

    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (oc, ol, c) = (self.out_channels(), self.out_len(), self.in_channels());
        let patch = self.kernel_len() * c;
        let (inp, outp) = (self.inputs(), self.outputs());
        let mut y = Vec::with_capacity(batch * outp);
        for _ in 0..batch * ol {
            y.extend_from_slice(&self.b.data);
        }
        for s in 0..batch {
            // Patches overlap in memory: row `pos` starts at `pos·stride·c`.
            let xs = &x[s * inp..(s + 1) * inp];
            let ys = &mut y[s * outp..(s + 1) * outp];
            gemm(ol, patch, oc, xs, (self.stride * c, 1), &self.kernels.data, (1, patch), 1.0, ys, (oc, 1));
        }
        let act = self.activation;
        if act != Activation::Identity {
            y.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        y
    }

    fn backward(&self, x: &[f64], dz: &[f64], batch: usize, need: Need) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
        let (oc, ol, c) = (self.out_channels(), self.out_len(), self.in_channels());
        let patch = self.kernel_len() * c;
        let (inp, outp) = (self.inputs(), self.outputs());
        let mut dw = vec![0.0; oc * patch];
        let mut db = vec![0.0; oc];
        let mut dx = need.input.then(|| vec![0.0; batch * inp]);
        let mut dpatch = vec![0.0; ol * patch];
        for s in 0..batch {
            let xs = &x[s * inp..(s + 1) * inp];
            let dzs = &dz[s * outp..(s + 1) * outp];
            if need.params {
                gemm(oc, ol, patch, dzs, (1, oc), xs, (self.stride * c, 1), 1.0, &mut dw, (patch, 1));
            }
            for pos in 0..ol {
                for (acc, g) in db.iter_mut().zip(&dzs[pos * oc..(pos + 1) * oc]) {
                    *acc += g;
                }
            }
            if let Some(dx) = dx.as_mut() {
                gemm(ol, oc, patch, dzs, (oc, 1), &self.kernels.data, (patch, 1), 0.0, &mut dpatch, (patch, 1));
                let dxs = &mut dx[s * inp..(s + 1) * inp];
                for pos in 0..ol {
                    let start = pos * self.stride * c;
                    for (acc, g) in dxs[start..start + patch].iter_mut().zip(&dpatch[pos * patch..(pos + 1) * patch]) {
                        *acc += g;
                    }
                }
            }
        }
        (dw, db, dx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
}

impl Layer {
    pub fn inputs(&self) -> usize {
        match self {
            Layer::Dense(l) => l.inputs(),
            Layer::Conv1d(l) => l.inputs(),
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Layer::Dense(l) => l.outputs(),
            Layer::Conv1d(l) => l.outputs(),
        }
    }

    fn activation(&self) -> Activation {
        match self {
            Layer::Dense(l) => l.activation,
            Layer::Conv1d(l) => l.activation,
        }
    }

    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        match self {
            Layer::Dense(l) => l.forward(x, batch),
            Layer::Conv1d(l) => l.forward(x, batch),
        }
    }

    fn backward(&self, x: &[f64], dz: &[f64], batch: usize, need: Need) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
        match self {
            Layer::Dense(l) => l.backward(x, dz, batch, need),
            Layer::Conv1d(l) => l.backward(x, dz, batch, need),
        }
    }

    fn params(&self) -> [&Tensor; 2] {
        match self {
            Layer::Dense(l) => [&l.w, &l.b],
            Layer::Conv1d(l) => [&l.kernels, &l.b],
        }
    }

    fn params_mut(&mut self) -> [&mut Tensor; 2] {
        match self {
            Layer::Dense(l) => [&mut l.w, &mut l.b],
            Layer::Conv1d(l) => [&mut l.kernels, &mut l.b],
        }
    }
}

static NETWORK_IDS: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NETWORK_IDS.fetch_add(1, Ordering::Relaxed)
}

/// Sequential stack of layers.
#[derive(Debug, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    #[serde(skip, default = "fresh_id")]
    id: u64,
    #[serde(skip)]
    version: u64,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Intermediates of one forward pass.
#[derive(Clone, Debug)]
pub struct Cache {
    network: u64,
    version: u64,
    batch: usize,
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Vec<f64>>,
}

/// Gradients aligned with [`Network::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads(pub Vec<Tensor>);

impl Grads {
    pub fn flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn add_assign(&mut self, other: &Grads) -> Result<()> {
        check_aligned(&self.0, &other.0)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }
}

fn check_aligned(a: &[Tensor], b: &[Tensor]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    for (x, y) in a.iter().zip(b) {
        if x.shape != y.shape {
            return Err(Error::Shape {
                expected: x.shape.clone(),
                actual: y.shape.clone(),
            });
        }
    }
    Ok(())
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Dimension {
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        Ok(Self {
            layers,
            id: fresh_id(),
            version: 0,
        })
    }

    /// Dense stack `widths[0] → … → widths[last]` with `hidden` activation
    /// between layers and `output` on the last.
    pub fn mlp<R: Rng + ?Sized>(rng: &mut R, widths: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config("mlp needs at least input and output widths".into()));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer::Dense(Dense::new(rng, w[0], w[1], if i == last { output } else { hidden })))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Mutable parameter access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.version += 1;
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.params().iter().map(|t| Tensor::zeros(t.shape.clone())).collect())
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let (batch, features) = input.dims2()?;
        if features != self.inputs() {
            return Err(Error::Shape {
                expected: vec![batch, self.inputs()],
                actual: input.shape.clone(),
            });
        }
        Ok(batch)
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Cache)> {
        let batch = self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.data.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("input present"), batch);
            activations.push(next);
        }
        let out = Tensor {
            shape: vec![batch, self.outputs()],
            data: activations.last().expect("output present").clone(),
        };
        Ok((
            out,
            Cache {
                network: self.id,
                version: self.version,
                batch,
                activations,
            },
        ))
    }

    /// Forward pass without retaining intermediates.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let batch = self.check_input(input)?;
        let mut current = self.layers[0].forward(&input.data, batch);
        for layer in &self.layers[1..] {
            current = layer.forward(&current, batch);
        }
        Ok(Tensor {
            shape: vec![batch, self.outputs()],
            data: current,
        })
    }

    /// Parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &Cache, output_grad: &Tensor) -> Result<(Grads, Tensor)> {
        self.backward_impl(cache, output_grad, Need { params: true, input: true })
            .map(|(g, dx)| (g, dx.expect("input gradient requested")))
    }

    /// Parameter gradients only; skips the first layer's input gradient.
    pub fn backward_params(&self, cache: &Cache, output_grad: &Tensor) -> Result<Grads> {
        self.backward_impl(cache, output_grad, Need { params: true, input: false })
            .map(|(g, _)| g)
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn backward_input(&self, cache: &Cache, output_grad: &Tensor) -> Result<Tensor> {
        self.backward_impl(cache, output_grad, Need { params: false, input: true })
            .map(|(_, dx)| dx.expect("input gradient requested"))
    }

    fn backward_impl(&self, cache: &Cache, output_grad: &Tensor, need: Need) -> Result<(Grads, Option<Tensor>)> {
        if cache.network != self.id {
            return Err(Error::StaleCache("cache was produced by a different network"));
        }
        if cache.version != self.version {
            return Err(Error::StaleCache("parameters changed since the forward pass"));
        }
        let batch = cache.batch;
        if output_grad.shape != [batch, self.outputs()] {
            return Err(Error::Shape {
                expected: vec![batch, self.outputs()],
                actual: output_grad.shape.clone(),
            });
        }
        let mut grads: Vec<Tensor> = Vec::with_capacity(self.layers.len() * 2);
        let mut upstream = output_grad.data.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[i + 1];
            let act = layer.activation();
            if act != Activation::Identity {
                upstream.iter_mut().zip(y).for_each(|(g, &out)| *g *= act.derivative_from_output(out));
            }
            let layer_need = Need {
                params: need.params,
                input: i > 0 || need.input,
            };
            let (dw, db, dx) = layer.backward(&cache.activations[i], &upstream, batch, layer_need);
            let [w, b] = layer.params();
            grads.push(Tensor {
                shape: b.shape.clone(),
                data: db,
            });
            grads.push(Tensor {
                shape: w.shape.clone(),
                data: dw,
            });
            upstream = dx.unwrap_or_default();
        }
        grads.reverse();
        let dx = need.input.then(|| Tensor {
            shape: vec![batch, self.inputs()],
            data: upstream,
        });
        Ok((Grads(grads), dx))
    }

    /// `θ' ← τ·θ' + (1 − τ)·θ`
    pub fn soft_update_from(&mut self, online: &Network, tau: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau {tau} outside [0, 1]")));
        }
        let online_params = online.params();
        let len = online_params.len();
        let mut mine = self.params_mut();
        if mine.len() != len {
            return Err(Error::Dimension {
                expected: len,
                actual: mine.len(),
            });
        }
        for (t, o) in mine.iter().zip(&online_params) {
            if t.shape != o.shape {
                return Err(Error::Shape {
                    expected: t.shape.clone(),
                    actual: o.shape.clone(),
                });
            }
        }
        for (t, o) in mine.iter_mut().zip(online_params) {
            t.data.iter_mut().zip(&o.data).for_each(|(tv, &ov)| *tv = tau * *tv + (1.0 - tau) * ov);
        }
        Ok(())
    }

    /// Copies parameters from a network of identical architecture.
    pub fn copy_from(&mut self, other: &Network) -> Result<()> {
        self.soft_update_from(other, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first/second moments and the step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn for_network(net: &Network, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = net.params().iter().map(|t| Tensor::zeros(t.shape.clone())).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam descent step on `params`.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &Grads) -> Result<()> {
        if params.len() != grads.0.len() || params.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                actual: grads.0.len(),
            });
        }
        for ((p, g), m) in params.iter().zip(&grads.0).zip(&self.m) {
            if p.shape != g.shape || p.shape != m.shape {
                return Err(Error::Shape {
                    expected: p.shape.clone(),
                    actual: g.shape.clone(),
                });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, epsilon } = self.config;
        let t = self.step as i32;
        let correct1 = 1.0 - beta1.powi(t);
        let correct2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(&grads.0).zip(&mut self.m).zip(&mut self.v) {
            for (((pv, &gv), mv), vv) in p.data.iter_mut().zip(&g.data).zip(&mut m.data).zip(&mut v.data) {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / correct1;
                let v_hat = *vv / correct2;
                *pv -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Descends `net` along `grads`.
pub fn adam_step(net: &mut Network, grads: &Grads, state: &mut AdamState) -> Result<()> {
    let mut params = net.params_mut();
    state.step(&mut params, grads)
}

#[cfg(test)]
pub(crate) mod gradcheck {
    use super::*;

    /// Max over entries of `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub fn relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
            .fold(0.0, f64::max)
    }

    /// Central differences of `f` with respect to every parameter of `net`.
    pub fn numeric_param_grads(net: &mut Network, h: f64, f: impl Fn(&Network) -> f64) -> Vec<f64> {
        let count = net.param_count();
        let mut out = Vec::with_capacity(count);
        let mut flat_index = 0;
        let n_tensors = net.params().len();
        for ti in 0..n_tensors {
            let len = net.params()[ti].len();
            for j in 0..len {
                let orig = net.params()[ti].data[j];
                net.params_mut()[ti].data[j] = orig + h;
                let up = f(net);
                net.params_mut()[ti].data[j] = orig - h;
                let down = f(net);
                net.params_mut()[ti].data[j] = orig;
                out.push((up - down) / (2.0 * h));
                flat_index += 1;
            }
        }
        debug_assert_eq!(flat_index, count);
        out
    }
}

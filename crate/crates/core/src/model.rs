//! Stacked LSTM with a dense regression head, and its exact gradients by
//! backpropagation through time.
//!
//! Gate blocks are stacked in the order input, forget, cell, output. Every
//! weight matrix is row-major with one row per output unit.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::ingest::NUM_CHANNELS;
use crate::scalar::Scalar;

const GATES: usize = 4;

/// Dimensions of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub output_size: usize,
    /// Width of an optional tanh dense layer between the LSTM stack and the
    /// output layer.
    pub head_hidden: Option<usize>,
}

impl ModelShape {
    /// 12 features in, 12 out, single dense output layer.
    pub fn new(hidden_size: usize, num_layers: usize) -> Self {
        Self {
            input_size: NUM_CHANNELS,
            hidden_size,
            num_layers,
            output_size: NUM_CHANNELS,
            head_hidden: None,
        }
    }

    pub fn with_head_hidden(mut self, width: Option<usize>) -> Self {
        self.head_hidden = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0
            || self.num_layers == 0
            || self.input_size == 0
            || self.output_size == 0
        {
            return Err(Error::Config(format!(
                "model sizes must be positive (input {}, hidden {}, layers {}, output {})",
                self.input_size, self.hidden_size, self.num_layers, self.output_size
            )));
        }
        if self.head_hidden == Some(0) {
            return Err(Error::Config("head hidden width must be positive".into()));
        }
        Ok(())
    }

    /// Closed-form count of learnable parameters.
    pub fn param_count(&self) -> usize {
        let h = self.hidden_size;
        let lstm: usize = (0..self.num_layers)
            .map(|l| {
                let input = if l == 0 { self.input_size } else { h };
                GATES * (h * input + h * h + h)
            })
            .sum();
        let head = match self.head_hidden {
            None => self.output_size * h + self.output_size,
            Some(d) => d * h + d + self.output_size * d + self.output_size,
        };
        lstm + head
    }

    fn head_dims(&self) -> Vec<(usize, usize)> {
        match self.head_hidden {
            None => vec![(self.hidden_size, self.output_size)],
            Some(d) => vec![(self.hidden_size, d), (d, self.output_size)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<T> {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `4H x input`.
    pub w_input: Vec<T>,
    /// `4H x H`.
    pub w_recurrent: Vec<T>,
    /// `4H`.
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub input_size: usize,
    pub output_size: usize,
    /// `output x input`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Named view of one parameter tensor, in canonical order.
pub struct ParamTensor<'a, T> {
    pub name: String,
    pub kind: ParamKind,
    pub data: &'a [T],
}

pub struct ParamTensorMut<'a, T> {
    pub name: String,
    pub kind: ParamKind,
    pub data: &'a mut [T],
}

/// All learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel<T> {
    shape: ModelShape,
    layers: Vec<LstmLayer<T>>,
    head: Vec<DenseLayer<T>>,
}

/// Gradients have the layout of the model they belong to.
pub type Gradients<T> = LstmModel<T>;

/// Activations of one LSTM layer over all timesteps, flattened row-major by
/// timestep.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    inputs: Vec<T>,
    preactivations: Vec<T>,
    gates: Vec<T>,
    cells: Vec<T>,
    cell_tanh: Vec<T>,
    hidden: Vec<T>,
}

/// Intermediate values of one forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    shape: ModelShape,
    steps: usize,
    layers: Vec<LayerCache<T>>,
    head_inputs: Vec<Vec<T>>,
    prediction: Vec<T>,
}

/// Activated gates of one layer at one timestep.
#[derive(Debug, Clone, Copy)]
pub struct GateView<'a, T> {
    pub input: &'a [T],
    pub forget: &'a [T],
    pub cell: &'a [T],
    pub output: &'a [T],
}

impl<T: Scalar> ForwardCache<T> {
    /// Sequence length.
    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    pub fn prediction(&self) -> &[T] {
        &self.prediction
    }

    pub fn gates(&self, layer: usize, t: usize) -> GateView<'_, T> {
        let h = self.shape.hidden_size;
        let g = &self.layers[layer].gates[t * GATES * h..(t + 1) * GATES * h];
        GateView {
            input: &g[..h],
            forget: &g[h..2 * h],
            cell: &g[2 * h..3 * h],
            output: &g[3 * h..],
        }
    }

    /// Gate pre-activations (i, f, g, o stacked) of one layer at one timestep.
    pub fn preactivations(&self, layer: usize, t: usize) -> &[T] {
        let h = self.shape.hidden_size;
        &self.layers[layer].preactivations[t * GATES * h..(t + 1) * GATES * h]
    }

    pub fn cell_state(&self, layer: usize, t: usize) -> &[T] {
        let h = self.shape.hidden_size;
        &self.layers[layer].cells[t * h..(t + 1) * h]
    }

    pub fn hidden_state(&self, layer: usize, t: usize) -> &[T] {
        let h = self.shape.hidden_size;
        &self.layers[layer].hidden[t * h..(t + 1) * h]
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Dot product with four partial sums.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = c * 4;
        acc[0] = acc[0] + a[k] * b[k];
        acc[1] = acc[1] + a[k + 1] * b[k + 1];
        acc[2] = acc[2] + a[k + 2] * b[k + 2];
        acc[3] = acc[3] + a[k + 3] * b[k + 3];
    }
    let mut tail = T::zero();
    for k in chunks * 4..a.len() {
        tail = tail + a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out += M x` for row-major `M` with `x.len()` columns.
#[inline]
fn gemv_acc<T: Scalar>(out: &mut [T], m: &[T], x: &[T]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o = *o + dot(row, x);
    }
}

/// `out += M^T y`.
#[inline]
fn gemv_t_acc<T: Scalar>(out: &mut [T], m: &[T], y: &[T]) {
    let cols = out.len();
    for (&yr, row) in y.iter().zip(m.chunks_exact(cols)) {
        if yr == T::zero() {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(row) {
            *o = *o + w * yr;
        }
    }
}

/// `M += y x^T`.
#[inline]
fn outer_acc<T: Scalar>(m: &mut [T], y: &[T], x: &[T]) {
    let cols = x.len();
    for (&yr, row) in y.iter().zip(m.chunks_exact_mut(cols)) {
        if yr == T::zero() {
            continue;
        }
        for (w, &xv) in row.iter_mut().zip(x) {
            *w = *w + yr * xv;
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

impl<T: Scalar> LstmModel<T> {
    /// All parameters zero.
    pub fn zeros(shape: ModelShape) -> Result<Self> {
        shape.validate()?;
        let h = shape.hidden_size;
        let layers = (0..shape.num_layers)
            .map(|l| {
                let input_size = if l == 0 { shape.input_size } else { h };
                LstmLayer {
                    input_size,
                    hidden_size: h,
                    w_input: vec![T::zero(); GATES * h * input_size],
                    w_recurrent: vec![T::zero(); GATES * h * h],
                    bias: vec![T::zero(); GATES * h],
                }
            })
            .collect();
        let head = shape
            .head_dims()
            .into_iter()
            .map(|(input_size, output_size)| DenseLayer {
                input_size,
                output_size,
                weight: vec![T::zero(); output_size * input_size],
                bias: vec![T::zero(); output_size],
            })
            .collect();
        Ok(Self {
            shape,
            layers,
            head,
        })
    }

    /// Seeded initialization: weights uniform in `[-1/sqrt(fan), 1/sqrt(fan)]`
    /// (fan = hidden size for LSTM and output layers), forget-gate biases 1,
    /// other biases 0. Identical seeds give bit-identical parameters.
    pub fn new(shape: ModelShape, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |data: &mut [T], fan: usize| {
            let k = 1.0 / (fan as f64).sqrt();
            let dist = Uniform::new_inclusive(-k, k).expect("finite bound");
            for v in data.iter_mut() {
                *v = T::from_f64_lossy(dist.sample(&mut rng));
            }
        };
        let h = shape.hidden_size;
        for layer in &mut model.layers {
            fill(&mut layer.w_input, h);
            fill(&mut layer.w_recurrent, h);
            for b in &mut layer.bias[h..2 * h] {
                *b = T::one();
            }
        }
        for dense in &mut model.head {
            let fan = dense.input_size;
            fill(&mut dense.weight, fan);
        }
        Ok(model)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape).expect("shape already validated")
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn layers(&self) -> &[LstmLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LstmLayer<T>] {
        &mut self.layers
    }

    pub fn head(&self) -> &[DenseLayer<T>] {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.head
    }

    /// Parameter tensors in canonical (checkpoint) order.
    pub fn tensors(&self) -> Vec<ParamTensor<'_, T>> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(ParamTensor {
                name: format!("lstm.{l}.w_input"),
                kind: ParamKind::Weight,
                data: &layer.w_input,
            });
            out.push(ParamTensor {
                name: format!("lstm.{l}.w_recurrent"),
                kind: ParamKind::Weight,
                data: &layer.w_recurrent,
            });
            out.push(ParamTensor {
                name: format!("lstm.{l}.bias"),
                kind: ParamKind::Bias,
                data: &layer.bias,
            });
        }
        for (k, dense) in self.head.iter().enumerate() {
            out.push(ParamTensor {
                name: format!("dense.{k}.weight"),
                kind: ParamKind::Weight,
                data: &dense.weight,
            });
            out.push(ParamTensor {
                name: format!("dense.{k}.bias"),
                kind: ParamKind::Bias,
                data: &dense.bias,
            });
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ParamTensorMut<'_, T>> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.push(ParamTensorMut {
                name: format!("lstm.{l}.w_input"),
                kind: ParamKind::Weight,
                data: &mut layer.w_input,
            });
            out.push(ParamTensorMut {
                name: format!("lstm.{l}.w_recurrent"),
                kind: ParamKind::Weight,
                data: &mut layer.w_recurrent,
            });
            out.push(ParamTensorMut {
                name: format!("lstm.{l}.bias"),
                kind: ParamKind::Bias,
                data: &mut layer.bias,
            });
        }
        for (k, dense) in self.head.iter_mut().enumerate() {
            out.push(ParamTensorMut {
                name: format!("dense.{k}.weight"),
                kind: ParamKind::Weight,
                data: &mut dense.weight,
            });
            out.push(ParamTensorMut {
                name: format!("dense.{k}.bias"),
                kind: ParamKind::Bias,
                data: &mut dense.bias,
            });
        }
        out
    }

    /// Number of parameters, counted from the tensors.
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }

    /// Overwrites all parameters from a canonical-order flat vector.
    pub fn load_flat(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.data.len();
            t.data.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }

    /// SHA-256 of the little-endian parameter bytes.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(self.param_count() * T::BYTES);
        for t in self.tensors() {
            for &v in t.data {
                v.write_le(&mut bytes);
            }
        }
        sha256_hex(&bytes)
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for v in t.data.iter_mut() {
                *v = *v * factor;
            }
        }
    }

    /// Elementwise `self += other`. Shapes must match.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            add_into(dst.data, src.data);
        }
    }

    pub fn sum_squares(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .fold(T::zero(), |acc, &v| acc + v * v)
    }

    fn check_input<R: AsRef<[T]>>(&self, input: &[R]) -> Result<()> {
        if input.is_empty() {
            return Err(Error::Shape("input sequence is empty".into()));
        }
        if let Some((t, row)) = input
            .iter()
            .enumerate()
            .find(|(_, r)| r.as_ref().len() != self.shape.input_size)
        {
            return Err(Error::Shape(format!(
                "input row {t} has width {}, model expects {}",
                row.as_ref().len(),
                self.shape.input_size
            )));
        }
        Ok(())
    }

    /// Runs the sequence through the stack from zero initial state and
    /// regresses the next frame from the final top-layer hidden state.
    pub fn forward<R: AsRef<[T]>>(&self, input: &[R]) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_input(input)?;
        let steps = input.len();
        let h = self.shape.hidden_size;
        let mut caches: Vec<LayerCache<T>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let inputs: Vec<T> = if l == 0 {
                input
                    .iter()
                    .flat_map(|r| r.as_ref().iter().copied())
                    .collect()
            } else {
                caches[l - 1].hidden.clone()
            };
            let mut cache = LayerCache {
                inputs,
                preactivations: vec![T::zero(); steps * GATES * h],
                gates: vec![T::zero(); steps * GATES * h],
                cells: vec![T::zero(); steps * h],
                cell_tanh: vec![T::zero(); steps * h],
                hidden: vec![T::zero(); steps * h],
            };
            let zero_state = vec![T::zero(); h];
            for t in 0..steps {
                let x = &cache.inputs[t * layer.input_size..(t + 1) * layer.input_size];
                let z = &mut cache.preactivations[t * GATES * h..(t + 1) * GATES * h];
                z.copy_from_slice(&layer.bias);
                gemv_acc(z, &layer.w_input, x);
                let (h_prev, c_prev) = if t == 0 {
                    (&zero_state[..], &zero_state[..])
                } else {
                    (
                        &cache.hidden[(t - 1) * h..t * h],
                        &cache.cells[(t - 1) * h..t * h],
                    )
                };
                gemv_acc(z, &layer.w_recurrent, h_prev);
                let c_prev = c_prev.to_vec();
                let gates = &mut cache.gates[t * GATES * h..(t + 1) * GATES * h];
                for j in 0..h {
                    gates[j] = sigmoid(z[j]);
                    gates[h + j] = sigmoid(z[h + j]);
                    gates[2 * h + j] = z[2 * h + j].tanh();
                    gates[3 * h + j] = sigmoid(z[3 * h + j]);
                }
                for j in 0..h {
                    let c = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
                    let ct = c.tanh();
                    cache.cells[t * h + j] = c;
                    cache.cell_tanh[t * h + j] = ct;
                    cache.hidden[t * h + j] = gates[3 * h + j] * ct;
                }
            }
            caches.push(cache);
        }

        let top = &caches[caches.len() - 1];
        let mut activation = top.hidden[(steps - 1) * h..steps * h].to_vec();
        let mut head_inputs = Vec::with_capacity(self.head.len());
        for (k, dense) in self.head.iter().enumerate() {
            let mut z = dense.bias.clone();
            gemv_acc(&mut z, &dense.weight, &activation);
            head_inputs.push(std::mem::replace(&mut activation, z));
            if k + 1 < self.head.len() {
                for v in &mut activation {
                    *v = v.tanh();
                }
            }
        }
        let prediction = activation;
        let cache = ForwardCache {
            shape: self.shape,
            steps,
            layers: caches,
            head_inputs,
            prediction: prediction.clone(),
        };
        Ok((prediction, cache))
    }

    /// Forward pass without keeping the cache.
    pub fn predict<R: AsRef<[T]>>(&self, input: &[R]) -> Result<Vec<T>> {
        self.forward(input).map(|(p, _)| p)
    }

    /// Gradients of `prediction . grad_output` with respect to every
    /// parameter.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &[T]) -> Result<Gradients<T>> {
        let mut grads = self.zeros_like();
        self.backward_into(cache, grad_output, &mut grads)?;
        Ok(grads)
    }

    /// Like [`LstmModel::backward`], accumulating into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache<T>,
        grad_output: &[T],
        grads: &mut Gradients<T>,
    ) -> Result<()> {
        if cache.shape != self.shape || grads.shape != self.shape {
            return Err(Error::Shape(
                "cache or gradient buffer belongs to a different model shape".into(),
            ));
        }
        if cache.steps == 0 || cache.layers.len() != self.layers.len() {
            return Err(Error::Shape("cache does not match model".into()));
        }
        if grad_output.len() != self.shape.output_size {
            return Err(Error::Shape(format!(
                "grad_output has {} entries, model outputs {}",
                grad_output.len(),
                self.shape.output_size
            )));
        }
        let steps = cache.steps;
        let h = self.shape.hidden_size;

        // Dense head.
        let mut delta = grad_output.to_vec();
        for k in (0..self.head.len()).rev() {
            let dense = &self.head[k];
            let a = &cache.head_inputs[k];
            let g = &mut grads.head[k];
            outer_acc(&mut g.weight, &delta, a);
            add_into(&mut g.bias, &delta);
            let mut da = vec![T::zero(); dense.input_size];
            gemv_t_acc(&mut da, &dense.weight, &delta);
            if k > 0 {
                // `a` is the tanh output of the previous dense layer.
                for (d, &av) in da.iter_mut().zip(a) {
                    *d = *d * (T::one() - av * av);
                }
            }
            delta = da;
        }

        // LSTM stack, top to bottom. `dh_above[t]` is the loss gradient
        // flowing into this layer's hidden state at step t from above.
        let mut dh_above = vec![T::zero(); steps * h];
        dh_above[(steps - 1) * h..].copy_from_slice(&delta);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let lc = &cache.layers[l];
            let g = &mut grads.layers[l];
            let in_size = layer.input_size;
            let mut dx_all = if l > 0 {
                vec![T::zero(); steps * in_size]
            } else {
                Vec::new()
            };
            let mut dh_next = vec![T::zero(); h];
            let mut dc_next = vec![T::zero(); h];
            let mut dz = vec![T::zero(); GATES * h];
            for t in (0..steps).rev() {
                let gates = &lc.gates[t * GATES * h..(t + 1) * GATES * h];
                for j in 0..h {
                    let i = gates[j];
                    let f = gates[h + j];
                    let gg = gates[2 * h + j];
                    let o = gates[3 * h + j];
                    let ct = lc.cell_tanh[t * h + j];
                    let c_prev = if t > 0 {
                        lc.cells[(t - 1) * h + j]
                    } else {
                        T::zero()
                    };
                    let dh = dh_above[t * h + j] + dh_next[j];
                    let dc = dc_next[j] + dh * o * (T::one() - ct * ct);
                    dz[j] = dc * gg * i * (T::one() - i);
                    dz[h + j] = dc * c_prev * f * (T::one() - f);
                    dz[2 * h + j] = dc * i * (T::one() - gg * gg);
                    dz[3 * h + j] = dh * ct * o * (T::one() - o);
                    dc_next[j] = dc * f;
                }
                let x = &lc.inputs[t * in_size..(t + 1) * in_size];
                outer_acc(&mut g.w_input, &dz, x);
                add_into(&mut g.bias, &dz);
                for v in dh_next.iter_mut() {
                    *v = T::zero();
                }
                if t > 0 {
                    let h_prev = &lc.hidden[(t - 1) * h..t * h];
                    outer_acc(&mut g.w_recurrent, &dz, h_prev);
                    gemv_t_acc(&mut dh_next, &layer.w_recurrent, &dz);
                }
                if l > 0 {
                    gemv_t_acc(
                        &mut dx_all[t * in_size..(t + 1) * in_size],
                        &layer.w_input,
                        &dz,
                    );
                }
            }
            if l > 0 {
                dh_above = dx_all;
            }
        }
        Ok(())
    }
}

/// Seeded model with the default 12-in/12-out layout.
pub fn init_model<T: Scalar>(
    hidden_size: usize,
    num_layers: usize,
    seed: u64,
) -> Result<LstmModel<T>> {
    LstmModel::new(ModelShape::new(hidden_size, num_layers), seed)
}

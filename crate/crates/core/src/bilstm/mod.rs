//! Stacked bidirectional LSTM sequence classifier.
//!
//! Each layer runs an independent forward and backward LSTM over the valid
//! prefix of the sequence and concatenates their per-position states. Inverted
//! dropout is applied to the network input and to the output of every layer.
//! The head reads the forward state at the last valid position and the
//! backward state at position 0 and maps them through an affine layer and a
//! sigmoid. Gradients are computed by hand with backpropagation through time.

mod train;

pub use train::{fit, fit_until, label_for, predict, EpochRecord, Example, Prediction, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{accumulate_mat_vec, accumulate_outer, accumulate_vec_mat, dot, sigmoid, Matrix, ParamSet, Rng};

/// Initial value of the forget-gate bias.
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl NetworkConfig {
    /// Three layers of 50 units per direction over `input_dim` features.
    pub fn new(input_dim: usize) -> Self {
        NetworkConfig {
            input_dim,
            hidden: 50,
            layers: 3,
        }
    }
}

/// One LSTM direction. Gate blocks are laid out `[input, forget, candidate,
/// output]` along the columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    /// `in_dim x 4h`.
    pub w_in: Matrix,
    /// `h x 4h`.
    pub w_hh: Matrix,
    /// `1 x 4h`.
    pub bias: Matrix,
}

impl LstmCell {
    fn zeros(in_dim: usize, hidden: usize) -> Self {
        LstmCell {
            w_in: Matrix::zeros(in_dim, 4 * hidden),
            w_hh: Matrix::zeros(hidden, 4 * hidden),
            bias: Matrix::zeros(1, 4 * hidden),
        }
    }

    fn init(in_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut bias = Matrix::zeros(1, 4 * hidden);
        bias.as_mut_slice()[hidden..2 * hidden].fill(FORGET_BIAS);
        LstmCell {
            w_in: Matrix::glorot(in_dim, 4 * hidden, rng),
            w_hh: Matrix::orthogonal(hidden, 4 * hidden, rng),
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w_in.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmLayer {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmNetwork {
    pub config: NetworkConfig,
    pub layers: Vec<BiLstmLayer>,
    /// `2h x 1`.
    pub w_out: Matrix,
    /// `1 x 1`.
    pub b_out: Matrix,
}

/// Gradients share the network's layout.
pub type Gradients = BiLstmNetwork;

impl ParamSet for BiLstmNetwork {
    fn params(&self) -> Vec<&Matrix> {
        let mut out = Vec::with_capacity(6 * self.layers.len() + 2);
        for layer in &self.layers {
            for cell in [&layer.forward, &layer.backward] {
                out.extend([&cell.w_in, &cell.w_hh, &cell.bias]);
            }
        }
        out.extend([&self.w_out, &self.b_out]);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(6 * self.layers.len() + 2);
        for layer in &mut self.layers {
            for cell in [&mut layer.forward, &mut layer.backward] {
                out.extend([&mut cell.w_in, &mut cell.w_hh, &mut cell.bias]);
            }
        }
        out.extend([&mut self.w_out, &mut self.b_out]);
        out
    }
}

/// Whether dropout is active for a forward pass.
pub enum Mode<'a> {
    Infer,
    /// Inverted dropout with the given rate, masks drawn from `rng`.
    Train { dropout: f64, rng: &'a mut Rng },
}

/// Activations of one direction, indexed by sequence position.
#[derive(Debug, Clone)]
struct DirectionCache {
    /// Post-activation gates, `len x 4h`.
    gates: Vec<f64>,
    /// Cell states, `len x h`.
    cells: Vec<f64>,
    /// `tanh` of the cell states.
    cells_tanh: Vec<f64>,
    /// Hidden states, `len x h`.
    states: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Layer input after dropout, `len x in_dim`.
    input: Vec<f64>,
    forward: DirectionCache,
    backward: DirectionCache,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub valid_len: usize,
    pub score: f64,
    layers: Vec<LayerCache>,
    /// Dropout multipliers per site (`0` or `1/(1-rate)`); site 0 is the
    /// network input, site `k` the output of layer `k - 1`.
    masks: Vec<Option<Vec<f64>>>,
    /// Concatenated `[forward state at len-1, backward state at 0]` after
    /// the last dropout site.
    summary: Vec<f64>,
}

impl ForwardCache {
    /// Forward-direction hidden states of `layer`, one row per position.
    pub fn forward_states(&self, layer: usize) -> Vec<Vec<f64>> {
        rows(&self.layers[layer].forward.states, self.valid_len)
    }

    /// Backward-direction hidden states of `layer`, one row per position.
    pub fn backward_states(&self, layer: usize) -> Vec<Vec<f64>> {
        rows(&self.layers[layer].backward.states, self.valid_len)
    }
}

fn rows(flat: &[f64], len: usize) -> Vec<Vec<f64>> {
    let width = flat.len() / len.max(1);
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

/// Positions in processing order for one direction.
fn positions(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

fn run_direction(cell: &LstmCell, input: &[f64], len: usize, reverse: bool) -> DirectionCache {
    let h = cell.hidden();
    let in_dim = cell.in_dim();
    let mut cache = DirectionCache {
        gates: vec![0.0; len * 4 * h],
        cells: vec![0.0; len * h],
        cells_tanh: vec![0.0; len * h],
        states: vec![0.0; len * h],
    };
    let mut prev: Option<usize> = None;
    let mut a = vec![0.0; 4 * h];
    for t in positions(len, reverse) {
        a.copy_from_slice(cell.bias.as_slice());
        accumulate_vec_mat(&mut a, &input[t * in_dim..(t + 1) * in_dim], cell.w_in.as_slice());
        if let Some(p) = prev {
            accumulate_vec_mat(&mut a, &cache.states[p * h..(p + 1) * h], cell.w_hh.as_slice());
        }
        for j in 0..h {
            let i_g = sigmoid(a[j]);
            let f_g = sigmoid(a[h + j]);
            let g_g = a[2 * h + j].tanh();
            let o_g = sigmoid(a[3 * h + j]);
            let c_prev = prev.map_or(0.0, |p| cache.cells[p * h + j]);
            let c = f_g * c_prev + i_g * g_g;
            let tc = c.tanh();
            let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
            gates[j] = i_g;
            gates[h + j] = f_g;
            gates[2 * h + j] = g_g;
            gates[3 * h + j] = o_g;
            cache.cells[t * h + j] = c;
            cache.cells_tanh[t * h + j] = tc;
            cache.states[t * h + j] = o_g * tc;
        }
        prev = Some(t);
    }
    cache
}

/// Backpropagates `d_states` (`len x h`, the loss gradient with respect to
/// each emitted hidden state) through one direction, accumulating parameter
/// gradients into `grad` and input gradients into `d_input`.
#[allow(clippy::too_many_arguments)]
fn backprop_direction(
    cell: &LstmCell,
    grad: &mut LstmCell,
    cache: &DirectionCache,
    input: &[f64],
    len: usize,
    reverse: bool,
    d_states: &[f64],
    d_input: &mut [f64],
) {
    let h = cell.hidden();
    let in_dim = cell.in_dim();
    let order: Vec<usize> = positions(len, reverse).collect();
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for k in (0..len).rev() {
        let t = order[k];
        let prev = k.checked_sub(1).map(|k| order[k]);
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let (i_g, f_g, g_g, o_g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = cache.cells_tanh[t * h + j];
            let c_prev = prev.map_or(0.0, |p| cache.cells[p * h + j]);
            let dh = d_states[t * h + j] + dh_next[j];
            let dc = dc_next[j] + dh * o_g * (1.0 - tc * tc);
            da[j] = dc * g_g * i_g * (1.0 - i_g);
            da[h + j] = dc * c_prev * f_g * (1.0 - f_g);
            da[2 * h + j] = dc * i_g * (1.0 - g_g * g_g);
            da[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
            dc_next[j] = dc * f_g;
        }
        let x = &input[t * in_dim..(t + 1) * in_dim];
        accumulate_outer(grad.w_in.as_mut_slice(), x, &da);
        grad.bias.as_mut_slice().iter_mut().zip(&da).for_each(|(g, d)| *g += d);
        accumulate_mat_vec(&mut d_input[t * in_dim..(t + 1) * in_dim], cell.w_in.as_slice(), &da);
        dh_next.fill(0.0);
        if let Some(p) = prev {
            accumulate_outer(grad.w_hh.as_mut_slice(), &cache.states[p * h..(p + 1) * h], &da);
            accumulate_mat_vec(&mut dh_next, cell.w_hh.as_slice(), &da);
        }
    }
}

fn dropout_mask(len: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len).map(|_| if rng.bernoulli(rate) { 0.0 } else { keep }).collect()
}

fn apply_mask(values: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(mask) = mask {
        values.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
    }
}

impl BiLstmNetwork {
    /// Glorot input weights, orthogonal recurrent weights, zero biases
    /// except the forget gate, and a Glorot readout.
    pub fn new(config: NetworkConfig, rng: &mut Rng) -> Result<Self> {
        if config.input_dim == 0 || config.hidden == 0 || config.layers == 0 {
            return Err(Error::InvalidArgument(
                "input_dim, hidden and layers must all be positive".into(),
            ));
        }
        let h = config.hidden;
        let layers = (0..config.layers)
            .map(|l| {
                let in_dim = if l == 0 { config.input_dim } else { 2 * h };
                BiLstmLayer {
                    forward: LstmCell::init(in_dim, h, rng),
                    backward: LstmCell::init(in_dim, h, rng),
                }
            })
            .collect();
        Ok(BiLstmNetwork {
            config,
            layers,
            w_out: Matrix::glorot(2 * h, 1, rng),
            b_out: Matrix::zeros(1, 1),
        })
    }

    /// A network of the same shape with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        let h = self.config.hidden;
        BiLstmNetwork {
            config: self.config,
            layers: self
                .layers
                .iter()
                .map(|l| BiLstmLayer {
                    forward: LstmCell::zeros(l.forward.in_dim(), h),
                    backward: LstmCell::zeros(l.backward.in_dim(), h),
                })
                .collect(),
            w_out: Matrix::zeros(2 * h, 1),
            b_out: Matrix::zeros(1, 1),
        }
    }

    /// Checks that parameter shapes agree with `config`, e.g. after loading.
    pub fn validate(&self) -> Result<()> {
        let NetworkConfig { input_dim, hidden: h, layers } = self.config;
        let bad = |what: String| Err(Error::Artifact(format!("network shape mismatch: {what}")));
        if self.layers.len() != layers || layers == 0 {
            return bad(format!("{} layers, config says {layers}", self.layers.len()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let in_dim = if l == 0 { input_dim } else { 2 * h };
            for cell in [&layer.forward, &layer.backward] {
                if cell.w_in.shape() != (in_dim, 4 * h) || cell.w_hh.shape() != (h, 4 * h) || cell.bias.shape() != (1, 4 * h) {
                    return bad(format!("layer {l}"));
                }
            }
        }
        if self.w_out.shape() != (2 * h, 1) || self.b_out.shape() != (1, 1) {
            return bad("output head".into());
        }
        if self.params().iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(())
    }

    /// Runs the network over the first `valid_len` rows of `sequence`; rows
    /// past `valid_len` are never read.
    pub fn forward(&self, sequence: &Matrix, valid_len: usize, mode: Mode<'_>) -> Result<ForwardCache> {
        let len = valid_len;
        if len == 0 {
            return Err(Error::InvalidArgument("sequence has no valid positions".into()));
        }
        if len > sequence.rows() || sequence.cols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "sequence {:?} with valid length {len} does not fit input dim {}",
                sequence.shape(),
                self.config.input_dim
            )));
        }
        let h = self.config.hidden;
        let (rate, mut rng) = match mode {
            Mode::Train { dropout, rng } if dropout > 0.0 => {
                if dropout.is_nan() || dropout >= 1.0 {
                    return Err(Error::InvalidArgument(format!("dropout rate {dropout} must be below 1")));
                }
                (dropout, Some(rng))
            }
            _ => (0.0, None),
        };
        let mut draw = |n: usize| rng.as_mut().map(|r| dropout_mask(n, rate, r));

        let mut input = sequence.as_slice()[..len * self.config.input_dim].to_vec();
        let mut masks = Vec::with_capacity(self.layers.len() + 1);
        let mask = draw(input.len());
        apply_mask(&mut input, &mask);
        masks.push(mask);

        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let forward = run_direction(&layer.forward, &input, len, false);
            let backward = run_direction(&layer.backward, &input, len, true);
            let mut output = vec![0.0; len * 2 * h];
            for t in 0..len {
                output[t * 2 * h..t * 2 * h + h].copy_from_slice(&forward.states[t * h..(t + 1) * h]);
                output[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&backward.states[t * h..(t + 1) * h]);
            }
            let mask = draw(output.len());
            apply_mask(&mut output, &mask);
            masks.push(mask);
            caches.push(LayerCache {
                input: std::mem::replace(&mut input, output),
                forward,
                backward,
            });
        }

        // `input` now holds the last layer's dropped-out output.
        let mut summary = Vec::with_capacity(2 * h);
        summary.extend_from_slice(&input[(len - 1) * 2 * h..(len - 1) * 2 * h + h]);
        summary.extend_from_slice(&input[h..2 * h]);
        let z = dot(&summary, self.w_out.as_slice()) + self.b_out.get(0, 0);
        let score = sigmoid(z);
        if !score.is_finite() || summary.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("BiLSTM activations".into()));
        }
        Ok(ForwardCache {
            valid_len: len,
            score,
            layers: caches,
            masks,
            summary,
        })
    }

    /// Inference-mode score.
    pub fn score(&self, sequence: &Matrix, valid_len: usize) -> Result<f64> {
        Ok(self.forward(sequence, valid_len, Mode::Infer)?.score)
    }

    /// Accumulates into `grad` the parameter gradients of a loss whose
    /// derivative with respect to the score is `d_score`.
    pub fn backward(&self, cache: &ForwardCache, d_score: f64, grad: &mut Gradients) -> Result<()> {
        let h = self.config.hidden;
        let len = cache.valid_len;
        if cache.layers.len() != self.layers.len() || grad.config != self.config {
            return Err(Error::Shape("forward cache or gradient buffer does not match the network".into()));
        }
        let dz = d_score * cache.score * (1.0 - cache.score);
        grad.w_out
            .as_mut_slice()
            .iter_mut()
            .zip(&cache.summary)
            .for_each(|(g, s)| *g += dz * s);
        grad.b_out.as_mut_slice()[0] += dz;

        // Gradient with respect to the last layer's dropped-out output.
        let mut d_out = vec![0.0; len * 2 * h];
        for j in 0..h {
            d_out[(len - 1) * 2 * h + j] += dz * self.w_out.get(j, 0);
            d_out[h + j] += dz * self.w_out.get(h + j, 0);
        }

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let lc = &cache.layers[l];
            apply_mask(&mut d_out, &cache.masks[l + 1]);
            let mut d_fwd = vec![0.0; len * h];
            let mut d_bwd = vec![0.0; len * h];
            for t in 0..len {
                d_fwd[t * h..(t + 1) * h].copy_from_slice(&d_out[t * 2 * h..t * 2 * h + h]);
                d_bwd[t * h..(t + 1) * h].copy_from_slice(&d_out[t * 2 * h + h..(t + 1) * 2 * h]);
            }
            let in_dim = layer.forward.in_dim();
            let mut d_input = vec![0.0; len * in_dim];
            let g = &mut grad.layers[l];
            backprop_direction(&layer.forward, &mut g.forward, &lc.forward, &lc.input, len, false, &d_fwd, &mut d_input);
            backprop_direction(&layer.backward, &mut g.backward, &lc.backward, &lc.input, len, true, &d_bwd, &mut d_input);
            d_out = d_input;
        }
        Ok(())
    }
}

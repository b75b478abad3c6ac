//! Stacked bidirectional LSTM with a dense head, trained end to end with the
//! quantum-fidelity loss.
//!
//! The network maps an n x 2 pulse sequence to a corrected n x 2 sequence.
//! Each of the three layers runs one LSTM over the sequence forwards and one
//! backwards and concatenates their hidden states per timestep; a per-timestep
//! dense layer with tanh squashing produces outputs strictly inside (-1, 1).
//!
//! Training backpropagates through the whole composition: the simulator
//! supplies d(F_err)/d(pulses) (see [`crate::grape::grape_gradient`]), which
//! is chained through the tanh head and through time in every layer. The
//! simulator side stays decoupled: anything that maps pulses to a loss
//! gradient of the same shape can drive the network.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::dataset::DatasetRecord;
use crate::dynamics::{evolve, fidelity_error, ControlPulses, SystemSpec};
use crate::error::{Error, Result};
use crate::grape::grape_gradient;
use crate::presets::SystemConfig;
use crate::quantum::Superoperator;
use crate::rng::RngSeed;

/// Stacked bidirectional layers in the model.
pub const NUM_LAYERS: usize = 3;
/// Hidden width per direction.
pub const DEFAULT_HIDDEN_DIM: usize = 64;
/// A record whose achieved fidelity falls below this counts as an outlier.
pub const OUTLIER_THRESHOLD: f64 = 0.9;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One gate's weights: the gate preactivation is `x V + s_prev W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub v: Array2<f64>,
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl GateParams {
    fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            v: Array2::zeros((input_dim, hidden_dim)),
            w: Array2::zeros((hidden_dim, hidden_dim)),
            b: Array1::zeros(hidden_dim),
        }
    }

    fn init<R: rand::Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let kv = 1.0 / (input_dim as f64).sqrt();
        let kw = 1.0 / (hidden_dim as f64).sqrt();
        Self {
            v: Array2::from_shape_fn((input_dim, hidden_dim), |_| rng.gen_range(-kv..=kv)),
            w: Array2::from_shape_fn((hidden_dim, hidden_dim), |_| rng.gen_range(-kw..=kw)),
            b: Array1::zeros(hidden_dim),
        }
    }

    fn len(&self) -> usize {
        self.v.len() + self.w.len() + self.b.len()
    }
}

/// Weights of one direction of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionParams {
    pub input_gate: GateParams,
    pub forget_gate: GateParams,
    pub output_gate: GateParams,
    pub candidate_gate: GateParams,
}

impl DirectionParams {
    fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_gate: GateParams::zeros(input_dim, hidden_dim),
            forget_gate: GateParams::zeros(input_dim, hidden_dim),
            output_gate: GateParams::zeros(input_dim, hidden_dim),
            candidate_gate: GateParams::zeros(input_dim, hidden_dim),
        }
    }

    fn init<R: rand::Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = Self {
            input_gate: GateParams::init(input_dim, hidden_dim, rng),
            forget_gate: GateParams::init(input_dim, hidden_dim, rng),
            output_gate: GateParams::init(input_dim, hidden_dim, rng),
            candidate_gate: GateParams::init(input_dim, hidden_dim, rng),
        };
        // Start with an open forget gate so gradients flow along the sequence.
        p.forget_gate.b.fill(1.0);
        p
    }

    fn gates(&self) -> [&GateParams; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.output_gate,
            &self.candidate_gate,
        ]
    }

    fn gates_mut(&mut self) -> [&mut GateParams; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate_gate,
        ]
    }

    pub fn input_dim(&self) -> usize {
        self.input_gate.v.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.input_gate.v.ncols()
    }
}

/// One bidirectional layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub forward: DirectionParams,
    pub backward: DirectionParams,
}

/// All weights: three bidirectional layers plus the dense head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hidden_dim: usize,
    pub layers: Vec<LayerParams>,
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
}

impl ModelParams {
    /// Seeded uniform init in [-k, k] with k the inverse square root of each
    /// matrix's fan-in; forget-gate biases start at one.
    pub fn init(hidden_dim: usize, seed: RngSeed) -> Self {
        let mut rng = seed.rng();
        let layers = (0..NUM_LAYERS)
            .map(|l| {
                let input_dim = if l == 0 { 2 } else { 2 * hidden_dim };
                LayerParams {
                    forward: DirectionParams::init(input_dim, hidden_dim, &mut rng),
                    backward: DirectionParams::init(input_dim, hidden_dim, &mut rng),
                }
            })
            .collect();
        let kd = 1.0 / (2.0 * hidden_dim as f64).sqrt();
        Self {
            hidden_dim,
            layers,
            dense_w: Array2::from_shape_fn((2 * hidden_dim, 2), |_| rng.gen_range(-kd..=kd)),
            dense_b: Array1::zeros(2),
        }
    }

    /// All-zero weights of the same shape (also the gradient container).
    pub fn zeros(hidden_dim: usize) -> Self {
        let layers = (0..NUM_LAYERS)
            .map(|l| {
                let input_dim = if l == 0 { 2 } else { 2 * hidden_dim };
                LayerParams {
                    forward: DirectionParams::zeros(input_dim, hidden_dim),
                    backward: DirectionParams::zeros(input_dim, hidden_dim),
                }
            })
            .collect();
        Self {
            hidden_dim,
            layers,
            dense_w: Array2::zeros((2 * hidden_dim, 2)),
            dense_b: Array1::zeros(2),
        }
    }

    pub fn param_count(&self) -> usize {
        let gates: usize = self
            .layers
            .iter()
            .flat_map(|l| [&l.forward, &l.backward])
            .flat_map(|d| d.gates())
            .map(|g| g.len())
            .sum();
        gates + self.dense_w.len() + self.dense_b.len()
    }

    /// Deterministic flattening (layer order, forward then backward, gates
    /// i/f/o/candidate, each v then w then b, then the dense head).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for dir in [&layer.forward, &layer.backward] {
                for gate in dir.gates() {
                    out.extend(gate.v.iter());
                    out.extend(gate.w.iter());
                    out.extend(gate.b.iter());
                }
            }
        }
        out.extend(self.dense_w.iter());
        out.extend(self.dense_b.iter());
        out
    }

    /// Inverse of [`Self::to_flat`], writing into this parameter set.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat length mismatch");
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        for layer in &mut self.layers {
            for dir in [&mut layer.forward, &mut layer.backward] {
                for gate in dir.gates_mut() {
                    take(gate.v.as_slice_mut().expect("standard layout"));
                    take(gate.w.as_slice_mut().expect("standard layout"));
                    take(gate.b.as_slice_mut().expect("standard layout"));
                }
            }
        }
        take(self.dense_w.as_slice_mut().expect("standard layout"));
        take(self.dense_b.as_slice_mut().expect("standard layout"));
        assert_eq!(pos, flat.len());
    }

    fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let mut flat = self.to_flat();
        let other_flat = other.to_flat();
        for (a, b) in flat.iter_mut().zip(other_flat.iter()) {
            *a += scale * b;
        }
        self.assign_flat(&flat);
    }
}

/// One LSTM cell update. Returns `(s_t, c_t)` from input `x_t`, previous
/// hidden state `s_prev`, and previous cell state `c_prev`:
///
/// ```text
/// i_t = sigma(x V^i + s W^i + b^i)        f_t = sigma(x V^f + s W^f + b^f)
/// o_t = sigma(x V^o + s W^o + b^o)        g_t = tanh (x V^c + s W^c + b^c)
/// c_t = c_prev . f_t + g_t . i_t          s_t = tanh(c_t) . o_t
/// ```
pub fn cell_step(
    x: &Array1<f64>,
    s_prev: &Array1<f64>,
    c_prev: &Array1<f64>,
    p: &DirectionParams,
) -> (Array1<f64>, Array1<f64>) {
    assert_eq!(x.len(), p.input_dim(), "input width mismatch");
    assert_eq!(s_prev.len(), p.hidden_dim(), "hidden width mismatch");
    assert_eq!(c_prev.len(), p.hidden_dim(), "cell width mismatch");
    let pre = |g: &GateParams| x.dot(&g.v) + s_prev.dot(&g.w) + &g.b;
    let i = pre(&p.input_gate).mapv(sigmoid);
    let f = pre(&p.forget_gate).mapv(sigmoid);
    let o = pre(&p.output_gate).mapv(sigmoid);
    let g = pre(&p.candidate_gate).mapv(f64::tanh);
    let c = c_prev * &f + &g * &i;
    let s = c.mapv(f64::tanh) * &o;
    (s, c)
}

/// Per-direction activations cached in processing order (step 0 is the first
/// step that direction takes, regardless of its orientation in time).
struct DirectionTrace {
    i: Array2<f64>,
    f: Array2<f64>,
    o: Array2<f64>,
    g: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    s: Array2<f64>,
}

struct LayerTrace {
    /// Layer input, indexed by original timestep.
    input: Array2<f64>,
    fwd: DirectionTrace,
    bwd: DirectionTrace,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardTrace {
    layers: Vec<LayerTrace>,
    /// Final concatenated hidden sequence (n x 2 hidden), original time order.
    hidden: Array2<f64>,
    /// Head output after tanh (n x 2).
    output: Array2<f64>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn hidden(&self) -> &Array2<f64> {
        &self.hidden
    }
}

fn run_direction(input: &Array2<f64>, p: &DirectionParams, reversed: bool) -> DirectionTrace {
    let n = input.nrows();
    let h = p.hidden_dim();

    // Input contributions do not depend on the recurrence; compute them for
    // the whole sequence at once.
    let order: Vec<usize> = if reversed {
        (0..n).rev().collect()
    } else {
        (0..n).collect()
    };
    let mut x_proc = Array2::zeros((n, input.ncols()));
    for (step, &t) in order.iter().enumerate() {
        x_proc.row_mut(step).assign(&input.row(t));
    }
    let xin_i = x_proc.dot(&p.input_gate.v) + &p.input_gate.b;
    let xin_f = x_proc.dot(&p.forget_gate.v) + &p.forget_gate.b;
    let xin_o = x_proc.dot(&p.output_gate.v) + &p.output_gate.b;
    let xin_g = x_proc.dot(&p.candidate_gate.v) + &p.candidate_gate.b;

    let mut trace = DirectionTrace {
        i: Array2::zeros((n, h)),
        f: Array2::zeros((n, h)),
        o: Array2::zeros((n, h)),
        g: Array2::zeros((n, h)),
        c: Array2::zeros((n, h)),
        tanh_c: Array2::zeros((n, h)),
        s: Array2::zeros((n, h)),
    };
    let mut s_prev = Array1::zeros(h);
    let mut c_prev: Array1<f64> = Array1::zeros(h);
    for step in 0..n {
        let i = (&xin_i.row(step) + &s_prev.dot(&p.input_gate.w)).mapv(sigmoid);
        let f = (&xin_f.row(step) + &s_prev.dot(&p.forget_gate.w)).mapv(sigmoid);
        let o = (&xin_o.row(step) + &s_prev.dot(&p.output_gate.w)).mapv(sigmoid);
        let g = (&xin_g.row(step) + &s_prev.dot(&p.candidate_gate.w)).mapv(f64::tanh);
        let c = &c_prev * &f + &g * &i;
        let tanh_c = c.mapv(f64::tanh);
        let s = &tanh_c * &o;

        trace.i.row_mut(step).assign(&i);
        trace.f.row_mut(step).assign(&f);
        trace.o.row_mut(step).assign(&o);
        trace.g.row_mut(step).assign(&g);
        trace.c.row_mut(step).assign(&c);
        trace.tanh_c.row_mut(step).assign(&tanh_c);
        trace.s.row_mut(step).assign(&s);

        s_prev = s;
        c_prev = c;
    }
    trace
}

/// Full forward pass, caching activations for backpropagation.
pub fn forward_trace(input: &Array2<f64>, p: &ModelParams) -> ForwardTrace {
    assert_eq!(input.ncols(), 2, "model input must be n x 2");
    let n = input.nrows();
    let h = p.hidden_dim;

    let mut layers = Vec::with_capacity(NUM_LAYERS);
    let mut current = input.to_owned();
    for layer in &p.layers {
        let fwd = run_direction(&current, &layer.forward, false);
        let bwd = run_direction(&current, &layer.backward, true);
        let mut concat = Array2::zeros((n, 2 * h));
        for t in 0..n {
            // The backward direction visited timestep t at step n-1-t.
            concat
                .row_mut(t)
                .slice_mut(ndarray::s![..h])
                .assign(&fwd.s.row(t));
            concat
                .row_mut(t)
                .slice_mut(ndarray::s![h..])
                .assign(&bwd.s.row(n - 1 - t));
        }
        layers.push(LayerTrace {
            input: current,
            fwd,
            bwd,
        });
        current = concat;
    }

    let z = current.dot(&p.dense_w) + &p.dense_b;
    let output = z.mapv(f64::tanh);
    ForwardTrace {
        layers,
        hidden: current,
        output,
    }
}

/// Apply the network: `nnDCP = ANN(NCP)`. Outputs lie strictly inside
/// (-1, 1) thanks to the tanh head.
pub fn model_forward(ncp: &ControlPulses, p: &ModelParams) -> ControlPulses {
    let trace = forward_trace(ncp.values(), p);
    ControlPulses::new(trace.output.clone()).expect("tanh output is within bounds")
}

/// Pre-dense concatenated hidden sequence of the last layer.
pub fn hidden_sequence(ncp: &ControlPulses, p: &ModelParams) -> Array2<f64> {
    forward_trace(ncp.values(), p).hidden
}

fn backprop_direction(
    trace: &DirectionTrace,
    input: &Array2<f64>,
    p: &DirectionParams,
    d_s_by_time: &Array2<f64>,
    reversed: bool,
    grads: &mut DirectionParams,
    d_input: &mut Array2<f64>,
) {
    let n = input.nrows();
    let h = p.hidden_dim();
    let order: Vec<usize> = if reversed {
        (0..n).rev().collect()
    } else {
        (0..n).collect()
    };
    let mut x_proc = Array2::zeros((n, input.ncols()));
    for (step, &t) in order.iter().enumerate() {
        x_proc.row_mut(step).assign(&input.row(t));
    }

    let mut dz_i = Array2::zeros((n, h));
    let mut dz_f = Array2::zeros((n, h));
    let mut dz_o = Array2::zeros((n, h));
    let mut dz_g = Array2::zeros((n, h));

    let mut ds_carry: Array1<f64> = Array1::zeros(h);
    let mut dc_carry: Array1<f64> = Array1::zeros(h);
    for step in (0..n).rev() {
        let t = order[step];
        let ds_total = &d_s_by_time.row(t) + &ds_carry;

        let o = trace.o.row(step);
        let i = trace.i.row(step);
        let f = trace.f.row(step);
        let g = trace.g.row(step);
        let tanh_c = trace.tanh_c.row(step);

        // sigma'(z) = o (1 - o), tanh'(z) = 1 - tanh^2(z).
        let dzo = Array1::from_iter(
            ds_total
                .iter()
                .zip(tanh_c.iter())
                .zip(o.iter())
                .map(|((&ds, &tc), &ov)| ds * tc * ov * (1.0 - ov)),
        );

        let mut dc: Array1<f64> = Array1::from_iter(
            ds_total
                .iter()
                .zip(o.iter())
                .zip(tanh_c.iter())
                .map(|((&ds, &ov), &tc)| ds * ov * (1.0 - tc * tc)),
        );
        dc += &dc_carry;

        let c_prev: Array1<f64> = if step > 0 {
            trace.c.row(step - 1).to_owned()
        } else {
            Array1::zeros(h)
        };

        let dzf = Array1::from_iter(
            dc.iter()
                .zip(c_prev.iter())
                .zip(f.iter())
                .map(|((&d, &cp), &fv)| d * cp * fv * (1.0 - fv)),
        );
        let dzi = Array1::from_iter(
            dc.iter()
                .zip(g.iter())
                .zip(i.iter())
                .map(|((&d, &gv), &iv)| d * gv * iv * (1.0 - iv)),
        );
        let dzg = Array1::from_iter(
            dc.iter()
                .zip(i.iter())
                .zip(g.iter())
                .map(|((&d, &iv), &gv)| d * iv * (1.0 - gv * gv)),
        );

        dc_carry = &dc * &f;
        ds_carry = dzi.dot(&p.input_gate.w.t())
            + dzf.dot(&p.forget_gate.w.t())
            + dzo.dot(&p.output_gate.w.t())
            + dzg.dot(&p.candidate_gate.w.t());

        dz_i.row_mut(step).assign(&dzi);
        dz_f.row_mut(step).assign(&dzf);
        dz_o.row_mut(step).assign(&dzo);
        dz_g.row_mut(step).assign(&dzg);
    }

    // Previous hidden states in processing order (zero row first).
    let mut s_prev_mat = Array2::zeros((n, h));
    for step in 1..n {
        s_prev_mat.row_mut(step).assign(&trace.s.row(step - 1));
    }

    for (gate_grads, dz, gate) in [
        (&mut grads.input_gate, &dz_i, &p.input_gate),
        (&mut grads.forget_gate, &dz_f, &p.forget_gate),
        (&mut grads.output_gate, &dz_o, &p.output_gate),
        (&mut grads.candidate_gate, &dz_g, &p.candidate_gate),
    ] {
        gate_grads.v += &x_proc.t().dot(dz);
        gate_grads.w += &s_prev_mat.t().dot(dz);
        gate_grads.b += &dz.sum_axis(ndarray::Axis(0));
        let dx_proc = dz.dot(&gate.v.t());
        for (step, &t) in order.iter().enumerate() {
            let mut row = d_input.row_mut(t);
            row += &dx_proc.row(step);
        }
    }
}

/// Backpropagate `d_output = dL/d(nnDCP)` through the head and all layers.
/// Returns parameter gradients in a [`ModelParams`]-shaped container.
pub fn backward_trace(trace: &ForwardTrace, p: &ModelParams, d_output: &Array2<f64>) -> ModelParams {
    let n = d_output.nrows();
    let h = p.hidden_dim;
    let mut grads = ModelParams::zeros(h);

    // Through the tanh head.
    let dz = Array2::from_shape_fn((n, 2), |(t, k)| {
        let out = trace.output[[t, k]];
        d_output[[t, k]] * (1.0 - out * out)
    });
    grads.dense_w = trace.hidden.t().dot(&dz);
    grads.dense_b = dz.sum_axis(ndarray::Axis(0));
    let mut d_hidden = dz.dot(&p.dense_w.t());

    for (l, layer) in p.layers.iter().enumerate().rev() {
        let lt = &trace.layers[l];
        let n_rows = lt.input.nrows();
        let mut d_input = Array2::zeros((n_rows, lt.input.ncols()));

        // Forward direction reads the first h columns of the incoming
        // gradient; backward the rest, in its own processing order.
        let d_s_fwd = d_hidden.slice(ndarray::s![.., ..h]).to_owned();
        let d_s_bwd = d_hidden.slice(ndarray::s![.., h..]).to_owned();

        backprop_direction(
            &lt.fwd,
            &lt.input,
            &layer.forward,
            &d_s_fwd,
            false,
            &mut grads.layers[l].forward,
            &mut d_input,
        );
        backprop_direction(
            &lt.bwd,
            &lt.input,
            &layer.backward,
            &d_s_bwd,
            true,
            &mut grads.layers[l].backward,
            &mut d_input,
        );
        d_hidden = d_input;
    }
    grads
}

/// One (input pulses, target superoperator) pair.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub ncp: ControlPulses,
    pub target: Superoperator,
}

impl TrainExample {
    pub fn from_record(rec: &DatasetRecord) -> Result<Self> {
        Ok(Self {
            ncp: rec.ncp_pulses()?,
            target: rec.target()?,
        })
    }
}

/// Mean fidelity error over the batch and its exact parameter gradient,
/// obtained by chaining the simulator gradient through the network.
pub fn loss_and_grad(
    batch: &[TrainExample],
    p: &ModelParams,
    sys: &SystemSpec,
) -> (f64, ModelParams) {
    assert!(!batch.is_empty(), "loss_and_grad needs a nonempty batch");
    let per_record: Vec<(f64, ModelParams)> = batch
        .par_iter()
        .map(|ex| {
            let trace = forward_trace(ex.ncp.values(), p);
            let nn_dcp = ControlPulses::new(trace.output().clone()).expect("tanh bounded");
            let x = evolve(sys, &nn_dcp);
            let loss = fidelity_error(&ex.target, &x).expect("matching dims");
            let d_pulses = grape_gradient(sys, &nn_dcp, &ex.target);
            let grads = backward_trace(&trace, p, &d_pulses);
            (loss, grads)
        })
        .collect();

    let scale = 1.0 / batch.len() as f64;
    let mut total_loss = 0.0;
    let mut total_grads = ModelParams::zeros(p.hidden_dim);
    for (loss, grads) in &per_record {
        total_loss += loss * scale;
        total_grads.add_scaled(grads, scale);
    }
    (total_loss, total_grads)
}

/// Training hyperparameters, stored alongside checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    /// Drives mini-batch shuffling; weight init uses a separate seed.
    pub seed: RngSeed,
    /// The drifted system defining the loss.
    pub system: SystemConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 5,
            epochs: 100,
            learning_rate: 1e-3,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            seed: RngSeed::new(0, 0),
            system: SystemConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.hidden_dim < 1 {
            return Err(Error::InvalidArgument("hidden_dim must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        self.system.validate()
    }
}

/// Per-epoch metrics. Wall times are informational and excluded from the
/// deterministic artifacts derived from a history.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_err: Vec<f64>,
    pub test_fidelity: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

/// Train with shuffled mini-batches and adaptive-moment updates. Returns the
/// parameters with the lowest mean training error seen (best-so-far
/// checkpointing) along with the per-epoch history.
pub fn train(
    trainset: &[TrainExample],
    testset: &[TrainExample],
    cfg: &TrainConfig,
    init_seed: RngSeed,
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if trainset.is_empty() || testset.is_empty() {
        return Err(Error::InvalidArgument("train and test sets must be nonempty".into()));
    }
    let sys = cfg.system.drifted()?;

    let mut params = ModelParams::init(cfg.hidden_dim, init_seed);
    let mut adam = Adam::new(params.param_count());
    let mut shuffle_rng = cfg.seed.rng();
    let mut history = TrainHistory::default();
    let mut best_err = f64::INFINITY;
    let mut best_params = params.clone();

    let mut order: Vec<usize> = (0..trainset.len()).collect();
    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut shuffle_rng);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainExample> = chunk.iter().map(|&i| trainset[i].clone()).collect();
            let (loss, grads) = loss_and_grad(&batch, &params, &sys);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;

            let dir = adam.direction(&grads.to_flat());
            let mut flat = params.to_flat();
            for (w, d) in flat.iter_mut().zip(dir.iter()) {
                *w -= cfg.learning_rate * d;
            }
            params.assign_flat(&flat);
        }
        let mean_err = epoch_loss / trainset.len() as f64;
        if mean_err < best_err {
            best_err = mean_err;
            best_params = params.clone();
        }

        let eval = evaluate(&params, testset, &sys);
        history.train_err.push(mean_err);
        history.test_fidelity.push(eval.mean_fidelity);
        history.epoch_seconds.push(t0.elapsed().as_secs_f64());
    }

    Ok((best_params, history))
}

/// Per-record fidelities of the model's outputs on a test set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_fidelity: f64,
    pub fidelities: Vec<f64>,
    /// Records with fidelity below [`OUTLIER_THRESHOLD`].
    pub outliers: usize,
}

/// Evaluate the model on every record; the mean excludes nothing.
pub fn evaluate(p: &ModelParams, testset: &[TrainExample], sys: &SystemSpec) -> Evaluation {
    assert!(!testset.is_empty(), "evaluate needs a nonempty test set");
    let fidelities: Vec<f64> = testset
        .par_iter()
        .map(|ex| {
            let nn_dcp = model_forward(&ex.ncp, p);
            let x = evolve(sys, &nn_dcp);
            1.0 - fidelity_error(&ex.target, &x).expect("matching dims")
        })
        .collect();
    let mean_fidelity = fidelities.iter().sum::<f64>() / fidelities.len() as f64;
    let outliers = fidelities.iter().filter(|&&f| f < OUTLIER_THRESHOLD).count();
    Evaluation {
        mean_fidelity,
        fidelities,
        outliers,
    }
}

/// Saved model: weights, the training configuration that produced them, and
/// the SHA-256 of the dataset manifest they were trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub params: ModelParams,
    pub train_config: TrainConfig,
    pub manifest_sha256: String,
}

pub fn write_checkpoint(path: &std::path::Path, checkpoint: &Checkpoint) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut file, checkpoint)?;
    std::io::Write::write_all(&mut file, b"\n")?;
    std::io::Write::flush(&mut file)?;
    Ok(())
}

pub fn read_checkpoint(path: &std::path::Path) -> Result<Checkpoint> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let ckpt: Checkpoint = serde_json::from_reader(file)?;
    if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint format version {} (this build reads {})",
            ckpt.format_version, CHECKPOINT_FORMAT_VERSION
        )));
    }
    Ok(ckpt)
}

//! Conditional recurrent GAN over 1 Hz airflow windows.
//!
//! The generator reads `[z_t, c]` at every step (per-step standard-normal
//! noise plus the label channel) and emits `tanh(h_t W + b)`. The
//! discriminator reads `[x_t, c]` and emits a per-step probability of the
//! sequence being real given its history.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::nn::{dense, lstm_step, Dense, Graph, LstmParams, NodeId, OptimizerConfig, OptimizerState, Tensor};
use crate::signal::{Label, Window};

pub const CHECKPOINT_FORMAT_VERSION: u64 = 1;

/// Recording id carried by generated windows until a caller renames them.
pub const SYNTHETIC_ID: &str = "synthetic";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub hidden_size: usize,
    pub minibatch_size: usize,
    pub noise_dim: usize,
    pub sequence_length: usize,
    pub g_optimizer: OptimizerConfig,
    pub d_optimizer: OptimizerConfig,
    pub epochs: usize,
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for GanConfig {
    /// Full-size configuration: 300 hidden units, minibatch 50, SGD 0.01 for
    /// the generator and Adam 0.01 for the discriminator.
    fn default() -> Self {
        GanConfig {
            hidden_size: 300,
            minibatch_size: 50,
            noise_dim: 4,
            sequence_length: 60,
            g_optimizer: OptimizerConfig::sgd(0.01),
            d_optimizer: OptimizerConfig::adam(0.01),
            epochs: 1000,
            checkpoint_every: 10,
            seed: 0,
        }
    }
}

impl GanConfig {
    /// Small configuration that trains in minutes on one core. Smaller
    /// minibatches and Adam on both sides keep the generator from ignoring
    /// the condition at this size.
    pub fn desk(sequence_length: usize) -> Self {
        GanConfig {
            hidden_size: 32,
            sequence_length,
            epochs: 200,
            minibatch_size: 10,
            g_optimizer: OptimizerConfig::adam(0.002),
            d_optimizer: OptimizerConfig::adam(0.0005),
            ..GanConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_size", self.hidden_size),
            ("minibatch_size", self.minibatch_size),
            ("noise_dim", self.noise_dim),
            ("sequence_length", self.sequence_length),
            ("checkpoint_every", self.checkpoint_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("gan config: {name} must be positive")));
            }
        }
        for (name, o) in [("g_optimizer", self.g_optimizer), ("d_optimizer", self.d_optimizer)] {
            if !(o.learning_rate > 0.0) {
                return Err(Error::invalid(format!("gan config: {name} learning rate must be positive")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: GanConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// LSTM followed by a one-unit projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub lstm: LstmParams,
    pub head: Dense,
}

impl Net {
    fn init(input_size: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Net {
            lstm: LstmParams::init(input_size, hidden, rng),
            head: Dense::init(hidden, 1, rng),
        }
    }

    pub const NAMES: [&'static str; 10] = [
        "lstm.w_input",
        "lstm.w_forget",
        "lstm.w_output",
        "lstm.w_cell",
        "lstm.b_input",
        "lstm.b_forget",
        "lstm.b_output",
        "lstm.b_cell",
        "head.weight",
        "head.bias",
    ];

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = self.lstm.tensors().into_iter().collect();
        v.push(&self.head.weight);
        v.push(&self.head.bias);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.lstm.tensors_mut().into_iter().collect();
        v.push(&mut self.head.weight);
        v.push(&mut self.head.bias);
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.numel()).sum()
    }

    fn bind(&self, g: &mut Graph, trainable: bool) -> BoundNet {
        BoundNet {
            lstm: self.lstm.bind(g, trainable),
            head: self.head.bind(g, trainable),
        }
    }
}

struct BoundNet {
    lstm: crate::nn::LstmVars,
    head: (NodeId, NodeId),
}

impl BoundNet {
    fn ids(&self) -> Vec<NodeId> {
        let mut v = self.lstm.ids.to_vec();
        v.push(self.head.0);
        v.push(self.head.1);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanModel {
    pub generator: Net,
    pub discriminator: Net,
    pub config: GanConfig,
    pub epoch: usize,
}

impl GanModel {
    pub fn new(config: GanConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = Net::init(config.noise_dim + 1, config.hidden_size, &mut rng);
        let discriminator = Net::init(2, config.hidden_size, &mut rng);
        Ok(GanModel { generator, discriminator, config, epoch: 0 })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_checkpoint(&value).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    /// Checkpoint document: format version, sizes, config, epoch, and every
    /// parameter as a nested list under `generator.*` / `discriminator.*`.
    pub fn to_checkpoint(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("format_version".into(), CHECKPOINT_FORMAT_VERSION.into());
        doc.insert("hidden_size".into(), self.config.hidden_size.into());
        doc.insert("input_size".into(), self.generator.lstm.input_size.into());
        doc.insert("epoch".into(), self.epoch.into());
        doc.insert("config".into(), serde_json::to_value(&self.config).expect("config serializes"));
        for (prefix, net) in [("generator", &self.generator), ("discriminator", &self.discriminator)] {
            for (name, t) in Net::NAMES.iter().zip(net.tensors()) {
                doc.insert(format!("{prefix}.{name}"), serde_json::to_value(t.to_rows()).expect("rows serialize"));
            }
        }
        Value::Object(doc)
    }

    pub fn from_checkpoint(doc: &Value) -> Result<Self> {
        let obj = doc.as_object().ok_or_else(|| Error::invalid("checkpoint must be a JSON object"))?;
        let version = obj.get("format_version").and_then(Value::as_u64);
        if version != Some(CHECKPOINT_FORMAT_VERSION) {
            return Err(Error::invalid(format!("unsupported checkpoint format_version {version:?}")));
        }
        let config: GanConfig = serde_json::from_value(
            obj.get("config").cloned().ok_or_else(|| Error::invalid("checkpoint missing config"))?,
        )?;
        config.validate()?;
        let epoch = obj.get("epoch").and_then(Value::as_u64).unwrap_or(0) as usize;
        let mut model = GanModel {
            generator: Net::init(config.noise_dim + 1, config.hidden_size, &mut ChaCha8Rng::seed_from_u64(0)),
            discriminator: Net::init(2, config.hidden_size, &mut ChaCha8Rng::seed_from_u64(0)),
            config,
            epoch,
        };
        for (prefix, net) in [("generator", &mut model.generator), ("discriminator", &mut model.discriminator)] {
            for (name, t) in Net::NAMES.iter().zip(net.tensors_mut()) {
                let key = format!("{prefix}.{name}");
                let rows: Vec<Vec<f64>> = serde_json::from_value(
                    obj.get(&key).cloned().ok_or_else(|| Error::invalid(format!("checkpoint missing {key}")))?,
                )?;
                let loaded = Tensor::from_rows(&rows)?;
                if !loaded.same_shape(t) {
                    return Err(Error::shape(format!("{key}: {:?} vs expected {:?}", loaded.shape(), t.shape())));
                }
                *t = loaded;
            }
        }
        Ok(model)
    }
}

fn condition_column(labels: &[Label]) -> Tensor {
    Tensor::matrix(labels.len(), 1, labels.iter().map(|l| l.condition()).collect()).expect("non-empty batch")
}

/// Noise laid out window-major: `noise[w][t * noise_dim + k]`.
fn draw_noise(rng: &mut impl Rng, count: usize, steps: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..steps * dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

fn noise_step(noise: &[Vec<f64>], t: usize, dim: usize) -> Tensor {
    let data = noise.iter().flat_map(|w| w[t * dim..(t + 1) * dim].iter().copied()).collect();
    Tensor::matrix(noise.len(), dim, data).expect("non-empty batch")
}

fn zero_state(g: &mut Graph, batch: usize, hidden: usize) -> (NodeId, NodeId) {
    (g.constant(Tensor::zeros(batch, hidden)), g.constant(Tensor::zeros(batch, hidden)))
}

/// Generator unroll. Returns one `batch × 1` output node per step.
fn run_generator(g: &mut Graph, net: &BoundNet, noise: &[Vec<f64>], cond: NodeId, steps: usize) -> Result<Vec<NodeId>> {
    let dim = net.lstm.input_size - 1;
    let (mut h, mut c) = zero_state(g, noise.len(), net.lstm.hidden_size);
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let z = g.constant(noise_step(noise, t, dim));
        let x = g.concat(&[z, cond])?;
        (h, c) = lstm_step(g, &net.lstm, x, h, c)?;
        let y = dense(g, net.head, h)?;
        out.push(g.tanh(y));
    }
    Ok(out)
}

/// Discriminator unroll over per-step `batch × 1` inputs. Returns the
/// `batch × steps` matrix of per-step probabilities.
fn run_discriminator(g: &mut Graph, net: &BoundNet, inputs: &[NodeId], cond: NodeId) -> Result<NodeId> {
    let batch = g.value(cond).rows();
    let (mut h, mut c) = zero_state(g, batch, net.lstm.hidden_size);
    let mut probs = Vec::with_capacity(inputs.len());
    for &x_t in inputs {
        let x = g.concat(&[x_t, cond])?;
        (h, c) = lstm_step(g, &net.lstm, x, h, c)?;
        let y = dense(g, net.head, h)?;
        probs.push(g.sigmoid(y));
    }
    g.concat(&probs)
}

fn window_columns(g: &mut Graph, windows: &[&Window], steps: usize) -> Result<Vec<NodeId>> {
    if let Some(w) = windows.iter().find(|w| w.len() != steps) {
        return Err(Error::shape(format!(
            "window {}/{} has length {}, model expects {steps}",
            w.recording_id,
            w.index,
            w.len()
        )));
    }
    Ok((0..steps)
        .map(|t| {
            let col = windows.iter().map(|w| w.values[t]).collect();
            g.constant(Tensor::matrix(windows.len(), 1, col).expect("non-empty batch"))
        })
        .collect())
}

fn finite(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Diverged(format!("{what} is not finite")))
    }
}

/// Per-step discriminator probabilities, `windows.len() × sequence_length`.
pub fn discriminate(model: &GanModel, windows: &[Window]) -> Result<Tensor> {
    if windows.is_empty() {
        return Err(Error::empty("discriminate needs at least one window"));
    }
    let mut g = Graph::new();
    let net = model.discriminator.bind(&mut g, false);
    let refs: Vec<&Window> = windows.iter().collect();
    let cols = window_columns(&mut g, &refs, model.config.sequence_length)?;
    let labels: Vec<Label> = windows.iter().map(|w| w.label).collect();
    let cond = g.constant(condition_column(&labels));
    let p = run_discriminator(&mut g, &net, &cols, cond)?;
    Ok(g.value(p).clone())
}

/// Discriminator loss `-mean[log D(real) + log(1 - D(fake))]`, averaged over
/// samples and time steps.
pub fn d_loss(model: &GanModel, real: &[Window], fake: &[Window]) -> Result<f64> {
    let mut g = Graph::new();
    let net = model.discriminator.bind(&mut g, false);
    let loss = d_loss_node(&mut g, &net, &real.iter().collect::<Vec<_>>(), &fake.iter().collect::<Vec<_>>(), model.config.sequence_length)?;
    finite(g.value(loss).item()?, "discriminator loss")
}

/// Non-saturating generator loss `-mean log D(fake)`.
pub fn g_loss(model: &GanModel, fake: &[Window]) -> Result<f64> {
    if fake.is_empty() {
        return Err(Error::empty("generator loss needs a batch"));
    }
    let mut g = Graph::new();
    let net = model.discriminator.bind(&mut g, false);
    let refs: Vec<&Window> = fake.iter().collect();
    let cols = window_columns(&mut g, &refs, model.config.sequence_length)?;
    let labels: Vec<Label> = fake.iter().map(|w| w.label).collect();
    let cond = g.constant(condition_column(&labels));
    let p = run_discriminator(&mut g, &net, &cols, cond)?;
    let ones = g.constant(Tensor::full(fake.len(), model.config.sequence_length, 1.0));
    let loss = g.bce(p, ones)?;
    finite(g.value(loss).item()?, "generator loss")
}

fn d_loss_node(g: &mut Graph, net: &BoundNet, real: &[&Window], fake: &[&Window], steps: usize) -> Result<NodeId> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::empty("discriminator loss needs real and fake batches"));
    }
    let real_cols = window_columns(g, real, steps)?;
    let fake_cols = window_columns(g, fake, steps)?;
    let real_cond = g.constant(condition_column(&real.iter().map(|w| w.label).collect::<Vec<_>>()));
    let fake_cond = g.constant(condition_column(&fake.iter().map(|w| w.label).collect::<Vec<_>>()));
    let p_real = run_discriminator(g, net, &real_cols, real_cond)?;
    let p_fake = run_discriminator(g, net, &fake_cols, fake_cond)?;
    let ones = g.constant(Tensor::full(real.len(), steps, 1.0));
    let zeros = g.constant(Tensor::zeros(fake.len(), steps));
    let l_real = g.bce(p_real, ones)?;
    let l_fake = g.bce(p_fake, zeros)?;
    g.add(l_real, l_fake)
}

const GENERATE_BATCH: usize = 256;

/// Generates `count` windows of `label`. Noise is i.i.d. standard normal
/// drawn from `seed`, so output does not depend on internal batching.
pub fn generate(model: &GanModel, label: Label, count: usize, seed: u64) -> Result<Vec<Window>> {
    if count == 0 {
        return Err(Error::invalid("generate count must be positive"));
    }
    generate_labels(model, &vec![label; count], seed)
}

/// Generates one window per entry of `labels`.
pub fn generate_labels(model: &GanModel, labels: &[Label], seed: u64) -> Result<Vec<Window>> {
    if labels.is_empty() {
        return Err(Error::invalid("generate count must be positive"));
    }
    let cfg = &model.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(labels.len());
    for chunk in labels.chunks(GENERATE_BATCH) {
        let noise = draw_noise(&mut rng, chunk.len(), cfg.sequence_length, cfg.noise_dim);
        let mut g = Graph::new();
        let net = model.generator.bind(&mut g, false);
        let cond = g.constant(condition_column(chunk));
        let steps = run_generator(&mut g, &net, &noise, cond, cfg.sequence_length)?;
        for (r, &label) in chunk.iter().enumerate() {
            let values: Vec<f64> = steps.iter().map(|&s| g.value(s).data()[r]).collect();
            out.push(Window { recording_id: SYNTHETIC_ID.into(), index: out.len(), values, label });
        }
    }
    Ok(out)
}

/// Supplies minibatches to the training loop.
pub trait BatchSource {
    fn batches_per_epoch(&self) -> usize;
    fn next_batch(&mut self, rng: &mut ChaCha8Rng) -> Vec<&Window>;
}

/// Cycles through a window pool in reshuffled passes.
#[derive(Clone, Debug)]
pub struct PoolCursor<'a> {
    pool: Vec<&'a Window>,
    order: Vec<usize>,
    pos: usize,
    batch: usize,
}

impl<'a> PoolCursor<'a> {
    pub fn new(pool: Vec<&'a Window>, batch: usize) -> Self {
        PoolCursor { order: (0..pool.len()).collect(), pool, pos: usize::MAX, batch }
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    /// Next minibatch; the final batch of a pass may be short.
    pub fn next(&mut self, rng: &mut ChaCha8Rng) -> Vec<&'a Window> {
        if self.pos >= self.pool.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.pool.len());
        let out = self.order[self.pos..end].iter().map(|&i| self.pool[i]).collect();
        self.pos = end;
        out
    }
}

/// Plain shuffled epochs over one training set.
pub struct EpochSource<'a> {
    cursor: PoolCursor<'a>,
}

impl<'a> EpochSource<'a> {
    pub fn new(windows: &'a [Window], batch: usize) -> Self {
        EpochSource { cursor: PoolCursor::new(windows.iter().collect(), batch) }
    }
}

impl BatchSource for EpochSource<'_> {
    fn batches_per_epoch(&self) -> usize {
        self.cursor.len().div_ceil(self.cursor.batch)
    }

    fn next_batch(&mut self, rng: &mut ChaCha8Rng) -> Vec<&Window> {
        self.cursor.next(rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: GanModel,
    pub checkpoints: Vec<GanModel>,
    pub history: Vec<EpochLosses>,
}

/// Trains on `windows` for `epochs` epochs, calling `on_checkpoint` every
/// `checkpoint_every` epochs with the model at that point.
pub fn train(
    model: GanModel,
    windows: &[Window],
    epochs: usize,
    on_checkpoint: impl FnMut(&GanModel),
) -> Result<TrainOutcome> {
    if windows.is_empty() {
        return Err(Error::empty("GAN training needs at least one window"));
    }
    let batch = model.config.minibatch_size;
    let mut source = EpochSource::new(windows, batch);
    train_with_source(model, &mut source, epochs, on_checkpoint)
}

pub fn train_with_source<S: BatchSource + ?Sized>(
    mut model: GanModel,
    source: &mut S,
    epochs: usize,
    mut on_checkpoint: impl FnMut(&GanModel),
) -> Result<TrainOutcome> {
    model.config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
    rng.set_stream(1);
    let mut d_opt = OptimizerState::new(model.config.d_optimizer)?;
    let mut g_opt = OptimizerState::new(model.config.g_optimizer)?;
    let mut checkpoints = Vec::new();
    let mut history = Vec::with_capacity(epochs);
    let per_epoch = source.batches_per_epoch();
    for _ in 0..epochs {
        let (mut d_sum, mut g_sum) = (0.0, 0.0);
        for _ in 0..per_epoch {
            let batch = source.next_batch(&mut rng);
            let (dl, gl) = train_step(&mut model, &batch, &mut rng, &mut d_opt, &mut g_opt)?;
            d_sum += dl;
            g_sum += gl;
        }
        model.epoch += 1;
        history.push(EpochLosses {
            epoch: model.epoch,
            d_loss: d_sum / per_epoch as f64,
            g_loss: g_sum / per_epoch as f64,
        });
        if model.epoch % model.config.checkpoint_every == 0 {
            on_checkpoint(&model);
            checkpoints.push(model.clone());
        }
    }
    Ok(TrainOutcome { model, checkpoints, history })
}

/// One discriminator update followed by one generator update.
fn train_step(
    model: &mut GanModel,
    real: &[&Window],
    rng: &mut ChaCha8Rng,
    d_opt: &mut OptimizerState,
    g_opt: &mut OptimizerState,
) -> Result<(f64, f64)> {
    let cfg = model.config.clone();
    let steps = cfg.sequence_length;
    let labels: Vec<Label> = real.iter().map(|w| w.label).collect();

    // Discriminator: generator frozen, fake sequence detached.
    let noise = draw_noise(rng, real.len(), steps, cfg.noise_dim);
    let mut g = Graph::new();
    let gen = model.generator.bind(&mut g, false);
    let disc = model.discriminator.bind(&mut g, true);
    let cond = g.constant(condition_column(&labels));
    let fake_cols = run_generator(&mut g, &gen, &noise, cond, steps)?;
    let real_cols = window_columns(&mut g, real, steps)?;
    let p_real = run_discriminator(&mut g, &disc, &real_cols, cond)?;
    let p_fake = run_discriminator(&mut g, &disc, &fake_cols, cond)?;
    let ones = g.constant(Tensor::full(real.len(), steps, 1.0));
    let zeros = g.constant(Tensor::zeros(real.len(), steps));
    let l_real = g.bce(p_real, ones)?;
    let l_fake = g.bce(p_fake, zeros)?;
    let d_total = g.add(l_real, l_fake)?;
    let d_value = finite(g.value(d_total).item()?, "discriminator loss")?;
    g.backward(d_total)?;
    let grads: Vec<Tensor> = disc.ids().into_iter().map(|id| g.grad(id)).collect();
    d_opt.step(&mut model.discriminator.tensors_mut(), &grads)?;

    // Generator: discriminator frozen, gradient flows through it.
    let noise = draw_noise(rng, real.len(), steps, cfg.noise_dim);
    let mut g = Graph::new();
    let gen = model.generator.bind(&mut g, true);
    let disc = model.discriminator.bind(&mut g, false);
    let cond = g.constant(condition_column(&labels));
    let fake_cols = run_generator(&mut g, &gen, &noise, cond, steps)?;
    let p_fake = run_discriminator(&mut g, &disc, &fake_cols, cond)?;
    let ones = g.constant(Tensor::full(real.len(), steps, 1.0));
    let g_total = g.bce(p_fake, ones)?;
    let g_value = finite(g.value(g_total).item()?, "generator loss")?;
    g.backward(g_total)?;
    let grads: Vec<Tensor> = gen.ids().into_iter().map(|id| g.grad(id)).collect();
    g_opt.step(&mut model.generator.tensors_mut(), &grads)?;

    Ok((d_value, g_value))
}

/// Names every parameter array of a model, for introspection.
pub fn parameter_shapes(model: &GanModel) -> BTreeMap<String, Vec<usize>> {
    let mut out = BTreeMap::new();
    for (prefix, net) in [("generator", &model.generator), ("discriminator", &model.discriminator)] {
        for (name, t) in Net::NAMES.iter().zip(net.tensors()) {
            out.insert(format!("{prefix}.{name}"), t.shape().to_vec());
        }
    }
    out
}

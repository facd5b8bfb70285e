//! The NAAQA network: feature extractor, question encoder, FiLM generator,
//! FiLM-modulated residual blocks, classifier and the optional acoustic
//! (MALiMo) controller.

use std::collections::HashMap;

use aqa_autodiff::init::{fan_in_uniform, uniform};
use aqa_autodiff::{BatchNormMode, BatchStats, Checkpoint, Padding, ParamStore, Real, Tape, Tensor, Var};
use aqa_core::seed::rng_for;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{CoordKind, ExtractorKind, ModelConfig};
use crate::coordmap::coord_tensor;
use crate::error::{ModelError, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct BnLayer<T> {
    pub name: String,
    pub affine: bool,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

/// Whether the residual blocks apply their FiLM layers. `Bypass` gives the
/// unmodulated reference network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modulation {
    Film,
    Bypass,
}

/// One model input batch.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    /// `(batch, 1, n_mels, frames)`.
    pub spec: Tensor<T>,
    pub valid_frames: Vec<usize>,
    /// Right-padded token ids, `batch x seq_len` row-major.
    pub tokens: Vec<usize>,
    pub lengths: Vec<usize>,
    pub seq_len: usize,
}

impl<T: Real> Batch<T> {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

/// Tape plus the per-pass state: mode, dropout stream, collected batch
/// statistics.
pub struct Graph<T> {
    pub tape: Tape<T>,
    pub training: bool,
    pub modulation: Modulation,
    rng: ChaCha8Rng,
    stats: Vec<(usize, BatchStats<T>)>,
    input_frames: usize,
    valid_frames: Vec<usize>,
}

impl<T: Real> Graph<T> {
    pub fn eval() -> Self {
        Self::new(false, 0)
    }

    /// Training pass; `seed` drives dropout.
    pub fn training(seed: u64) -> Self {
        Self::new(true, seed)
    }

    fn new(training: bool, seed: u64) -> Self {
        Self {
            tape: Tape::new(),
            training,
            modulation: Modulation::Film,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: Vec::new(),
            input_frames: 0,
            valid_frames: Vec::new(),
        }
    }

    pub fn with_modulation(mut self, modulation: Modulation) -> Self {
        self.modulation = modulation;
        self
    }

    /// Sets the valid-frame bookkeeping used by coordinate maps.
    pub fn set_frames(&mut self, input_frames: usize, valid_frames: &[usize]) {
        self.input_frames = input_frames;
        self.valid_frames = valid_frames.to_vec();
    }

    fn valid_cols(&self, b: usize, w: usize) -> Vec<usize> {
        if self.valid_frames.len() != b || self.input_frames == 0 {
            return vec![w; b];
        }
        self.valid_frames.iter().map(|&v| (v * w).div_ceil(self.input_frames).clamp(1, w)).collect()
    }
}

/// FiLM coefficients per residual block, each `(batch, M)`.
pub struct FilmParams {
    pub gammas: Vec<Var>,
    pub betas: Vec<Var>,
}

pub struct Naaqa<T> {
    config: ModelConfig,
    store: ParamStore<T>,
    bn: Vec<BnLayer<T>>,
    bn_index: HashMap<String, usize>,
}

enum Init {
    FanIn(usize),
    Uniform(f64),
    Const(f64),
    /// First half `a`, second half `b`.
    Split(f64, f64),
}

struct Builder<T> {
    seed: u64,
    store: ParamStore<T>,
    bn: Vec<BnLayer<T>>,
}

impl<T: Real> Builder<T> {
    fn param(&mut self, name: String, shape: &[usize], init: Init) -> Result<()> {
        let mut rng = rng_for(self.seed, &name, 0);
        let n: usize = shape.iter().product();
        let value = match init {
            Init::FanIn(fan_in) => fan_in_uniform(shape, fan_in, &mut rng),
            Init::Uniform(bound) => uniform(shape, bound, &mut rng),
            Init::Const(v) => Tensor::full(shape, T::from_f64_lossy(v)),
            Init::Split(a, b) => {
                Tensor::from_vec(shape, (0..n).map(|i| T::from_f64_lossy(if i < n / 2 { a } else { b })).collect())?
            }
        };
        self.store.add(name, value)?;
        Ok(())
    }

    fn conv(&mut self, name: &str, out: usize, inp: usize, kh: usize, kw: usize, bias: bool) -> Result<()> {
        let fan_in = inp * kh * kw;
        self.param(format!("{name}.weight"), &[out, inp, kh, kw], Init::FanIn(fan_in))?;
        if bias {
            self.param(format!("{name}.bias"), &[out], Init::FanIn(fan_in))?;
        }
        Ok(())
    }

    fn bn(&mut self, name: &str, channels: usize, affine: bool) -> Result<()> {
        if affine {
            self.param(format!("{name}.weight"), &[channels], Init::Const(1.0))?;
            self.param(format!("{name}.bias"), &[channels], Init::Const(0.0))?;
        }
        self.bn.push(BnLayer {
            name: name.to_string(),
            affine,
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        });
        Ok(())
    }

    fn conv_bn(&mut self, name: &str, out: usize, inp: usize, kh: usize, kw: usize) -> Result<()> {
        self.conv(&format!("{name}.conv"), out, inp, kh, kw, false)?;
        self.bn(&format!("{name}.bn"), out, true)
    }

    fn linear(&mut self, name: &str, out: usize, inp: usize) -> Result<()> {
        self.param(format!("{name}.weight"), &[out, inp], Init::FanIn(inp))?;
        self.param(format!("{name}.bias"), &[out], Init::FanIn(inp))
    }

    /// Linear layer predicting `(gamma, beta)` halves; starts at gamma = 1, beta = 0.
    fn film_head(&mut self, name: &str, out: usize, inp: usize) -> Result<()> {
        self.param(format!("{name}.weight"), &[out, inp], Init::Const(0.0))?;
        self.param(format!("{name}.bias"), &[out], Init::Split(1.0, 0.0))
    }

    fn gru(&mut self, name: &str, hidden: usize, input: usize) -> Result<()> {
        let bound = (1.0 / hidden as f64).sqrt();
        self.param(format!("{name}.w_ih"), &[3 * hidden, input], Init::Uniform(bound))?;
        self.param(format!("{name}.w_hh"), &[3 * hidden, hidden], Init::Uniform(bound))?;
        self.param(format!("{name}.b_ih"), &[3 * hidden], Init::Uniform(bound))?;
        self.param(format!("{name}.b_hh"), &[3 * hidden], Init::Uniform(bound))
    }
}

impl<T: Real> Naaqa<T> {
    /// Builds and initializes a network. Each parameter draws from its own
    /// stream keyed by its name, so adding a module leaves the others intact.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut b = Builder { seed, store: ParamStore::new(), bn: Vec::new() };
        let ext_in = 1 + c.coordmaps.extractor_input.channels();
        match c.extractor {
            ExtractorKind::Conv2dStack => {
                let widths = [c.n1, c.n2, c.n3];
                let mut inp = ext_in;
                for (i, &w) in widths.iter().enumerate() {
                    b.conv_bn(&format!("extractor.stack.{i}"), w, inp, 3, 3)?;
                    inp = w;
                }
                b.conv_bn("extractor.stack.3", c.n4, inp, 1, 1)?;
            }
            ExtractorKind::Parallel => {
                let (mut fin, mut tin) = (ext_in, ext_in);
                for k in 0..c.k {
                    let n = c.block_filters(k);
                    b.conv_bn(&format!("extractor.freq.{k}"), n, fin, 3, 1)?;
                    b.conv_bn(&format!("extractor.time.{k}"), n, tin, 1, 3)?;
                    (fin, tin) = (n, n);
                }
                if c.p > 0 {
                    b.conv_bn("extractor.fusion", c.p, fin + tin, 1, 1)?;
                }
            }
            ExtractorKind::InterleavedTimeFirst | ExtractorKind::InterleavedFreqFirst => {
                let prefix = format!("extractor.{}", c.extractor.name());
                let time_first = c.extractor == ExtractorKind::InterleavedTimeFirst;
                let mut inp = ext_in;
                for k in 0..c.k {
                    let n = c.block_filters(k);
                    let (first, second) = if time_first { ("time", "freq") } else { ("freq", "time") };
                    let kernel = |axis: &str| if axis == "time" { (1, 3) } else { (3, 1) };
                    let (kh, kw) = kernel(first);
                    b.conv_bn(&format!("{prefix}.{k}.{first}"), n, inp, kh, kw)?;
                    let (kh, kw) = kernel(second);
                    b.conv_bn(&format!("{prefix}.{k}.{second}"), n, n, kh, kw)?;
                    inp = n;
                }
                if c.p > 0 {
                    b.conv_bn("extractor.fusion", c.p, inp, 1, 1)?;
                }
            }
        }
        let f = c.feature_channels();
        b.conv_bn("stem", c.m, f + c.coordmaps.stem.channels(), 3, 3)?;
        for j in 0..c.j {
            b.conv(&format!("resblock.{j}.conv1x1"), c.m, c.m, 1, 1, true)?;
            b.conv(&format!("resblock.{j}.conv3x3"), c.m, c.m + c.coordmaps.resblocks.channels(), 3, 3, false)?;
            b.bn(&format!("resblock.{j}.bn"), c.m, false)?;
        }
        b.conv_bn("classifier", c.c, c.m + c.coordmaps.classifier.channels(), 1, 1)?;
        b.linear("classifier.hidden", c.h, c.c)?;
        b.linear("classifier.output", c.o, c.h)?;
        b.param("question.embedding.weight".into(), &[c.vocab_size, c.e], Init::Uniform(1.0))?;
        b.gru("question.gru", c.g, c.e)?;
        b.film_head("film_generator", 2 * c.j * c.m, c.g)?;
        if c.malimo {
            b.gru("malimo.gru", c.malimo_hidden, f)?;
            b.film_head("malimo.film", 2 * c.j * c.m, c.malimo_hidden)?;
        }
        let bn_index = b.bn.iter().enumerate().map(|(i, l)| (l.name.clone(), i)).collect();
        Ok(Self { config, store: b.store, bn: b.bn, bn_index })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn bn_layers(&self) -> &[BnLayer<T>] {
        &self.bn
    }

    pub fn bn_layers_mut(&mut self) -> &mut [BnLayer<T>] {
        &mut self.bn
    }

    /// Number of trainable scalars.
    pub fn count_parameters(&self) -> usize {
        self.store.numel()
    }

    /// Parameter counts per top-level module, in construction order.
    pub fn parameter_breakdown(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for (_, p) in self.store.iter() {
            let module = p.name.split('.').next().unwrap_or_default().to_string();
            match out.iter_mut().find(|(m, _)| *m == module) {
                Some((_, n)) => *n += p.value.numel(),
                None => out.push((module, p.value.numel())),
            }
        }
        out
    }

    fn p(&self, g: &mut Graph<T>, name: &str) -> Result<Var> {
        Ok(g.tape.param(&self.store, self.store.id(name)?))
    }

    fn batchnorm(&self, g: &mut Graph<T>, x: Var, name: &str) -> Result<Var> {
        let idx = *self.bn_index.get(name).ok_or_else(|| ModelError::Config(format!("no batch norm `{name}`")))?;
        let layer = &self.bn[idx];
        let (gamma, beta) = if layer.affine {
            (Some(self.p(g, &format!("{name}.weight"))?), Some(self.p(g, &format!("{name}.bias"))?))
        } else {
            (None, None)
        };
        let eps = T::from_f64_lossy(BN_EPS);
        let mode = if g.training {
            BatchNormMode::Train
        } else {
            BatchNormMode::Eval { running_mean: &layer.running_mean, running_var: &layer.running_var }
        };
        let (y, stats) = g.tape.batchnorm2d(x, gamma, beta, mode, eps)?;
        if let Some(s) = stats {
            g.stats.push((idx, s));
        }
        Ok(y)
    }

    /// conv (no bias) -> batch norm -> ReLU.
    fn conv_bn_relu(&self, g: &mut Graph<T>, x: Var, name: &str, stride: (usize, usize)) -> Result<Var> {
        let w = self.p(g, &format!("{name}.conv.weight"))?;
        let y = g.tape.conv2d(x, w, None, stride, Padding::Same)?;
        let y = self.batchnorm(g, y, &format!("{name}.bn"))?;
        Ok(g.tape.relu(y))
    }

    fn append_coords(&self, g: &mut Graph<T>, x: Var, kind: CoordKind) -> Result<Var> {
        if kind == CoordKind::None {
            return Ok(x);
        }
        let (b, _, h, w) = g.tape.value(x).dims4("coordmaps")?;
        let cols = g.valid_cols(b, w);
        let maps = g.tape.input(coord_tensor(kind, self.config.coord_span, h, w, &cols)?);
        Ok(g.tape.concat_channels(x, maps)?)
    }

    /// Spectrogram `(b, 1, n_mels, frames)` to extractor features.
    pub fn extract(&self, g: &mut Graph<T>, spec: Var) -> Result<Var> {
        let c = &self.config;
        let x = self.append_coords(g, spec, c.coordmaps.extractor_input)?;
        let out = match c.extractor {
            ExtractorKind::Conv2dStack => {
                let mut y = x;
                for i in 0..3 {
                    y = self.conv_bn_relu(g, y, &format!("extractor.stack.{i}"), (2, 2))?;
                }
                self.conv_bn_relu(g, y, "extractor.stack.3", (1, 1))?
            }
            ExtractorKind::Parallel => {
                let (mut f, mut t) = (x, x);
                for k in 0..c.k {
                    f = self.conv_bn_relu(g, f, &format!("extractor.freq.{k}"), (2, 1))?;
                    f = g.tape.maxpool2d(f, (1, 2), true)?;
                    t = self.conv_bn_relu(g, t, &format!("extractor.time.{k}"), (1, 2))?;
                    t = g.tape.maxpool2d(t, (2, 1), true)?;
                    let (fs, ts) = (g.tape.shape(f), g.tape.shape(t));
                    assert_eq!(fs[2..], ts[2..], "parallel pipelines diverged after block {k}");
                }
                let y = g.tape.concat_channels(f, t)?;
                if c.p > 0 {
                    self.conv_bn_relu(g, y, "extractor.fusion", (1, 1))?
                } else {
                    y
                }
            }
            ExtractorKind::InterleavedTimeFirst | ExtractorKind::InterleavedFreqFirst => {
                let prefix = format!("extractor.{}", c.extractor.name());
                let order = if c.extractor == ExtractorKind::InterleavedTimeFirst {
                    [("time", (1, 2)), ("freq", (2, 1))]
                } else {
                    [("freq", (2, 1)), ("time", (1, 2))]
                };
                let mut y = x;
                for k in 0..c.k {
                    for (axis, stride) in order {
                        y = self.conv_bn_relu(g, y, &format!("{prefix}.{k}.{axis}"), stride)?;
                    }
                }
                if c.p > 0 {
                    self.conv_bn_relu(g, y, "extractor.fusion", (1, 1))?
                } else {
                    y
                }
            }
        };
        Ok(out)
    }

    /// Final GRU state at each question's last real token, `(b, G)`.
    pub fn encode_question(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        lengths: &[usize],
        seq_len: usize,
    ) -> Result<Var> {
        if seq_len == 0 || lengths.contains(&0) {
            return Err(ModelError::EmptyQuestion);
        }
        let table = self.p(g, "question.embedding.weight")?;
        let x = g.tape.embedding(table, tokens, lengths.len(), seq_len)?;
        self.gru(g, x, lengths, "question.gru")
    }

    fn gru(&self, g: &mut Graph<T>, x: Var, lengths: &[usize], name: &str) -> Result<Var> {
        let w_ih = self.p(g, &format!("{name}.w_ih"))?;
        let w_hh = self.p(g, &format!("{name}.w_hh"))?;
        let b_ih = self.p(g, &format!("{name}.b_ih"))?;
        let b_hh = self.p(g, &format!("{name}.b_hh"))?;
        Ok(g.tape.gru(x, lengths, w_ih, w_hh, b_ih, b_hh)?)
    }

    fn film_head(&self, g: &mut Graph<T>, x: Var, name: &str) -> Result<FilmParams> {
        let (j, m) = (self.config.j, self.config.m);
        let w = self.p(g, &format!("{name}.weight"))?;
        let b = self.p(g, &format!("{name}.bias"))?;
        let out = g.tape.linear(x, w, Some(b))?;
        let mut gammas = Vec::with_capacity(j);
        let mut betas = Vec::with_capacity(j);
        for block in 0..j {
            gammas.push(g.tape.narrow(out, block * m, m)?);
            betas.push(g.tape.narrow(out, j * m + block * m, m)?);
        }
        Ok(FilmParams { gammas, betas })
    }

    /// Question embedding to per-block `(gamma, beta)`.
    pub fn film_generator(&self, g: &mut Graph<T>, question: Var) -> Result<FilmParams> {
        self.film_head(g, question, "film_generator")
    }

    /// Acoustic FiLM coefficients from the extractor features.
    pub fn malimo_controller(&self, g: &mut Graph<T>, features: Var) -> Result<FilmParams> {
        let (b, _, _, w) = g.tape.value(features).dims4("malimo")?;
        let seq = g.tape.mean_over_freq(features)?;
        let lengths = g.valid_cols(b, w);
        let h = self.gru(g, seq, &lengths, "malimo.gru")?;
        self.film_head(g, h, "malimo.film")
    }

    fn stem(&self, g: &mut Graph<T>, features: Var) -> Result<Var> {
        let x = self.append_coords(g, features, self.config.coordmaps.stem)?;
        self.conv_bn_relu(g, x, "stem", (1, 1))
    }

    /// One residual block; `acoustic` is applied right after the question FiLM.
    pub fn resblock_forward(
        &self,
        g: &mut Graph<T>,
        x: Var,
        j: usize,
        question: (Var, Var),
        acoustic: Option<(Var, Var)>,
    ) -> Result<Var> {
        let w1 = self.p(g, &format!("resblock.{j}.conv1x1.weight"))?;
        let b1 = self.p(g, &format!("resblock.{j}.conv1x1.bias"))?;
        let a = g.tape.conv2d(x, w1, Some(b1), (1, 1), Padding::Same)?;
        let a = g.tape.relu(a);
        let y = self.append_coords(g, a, self.config.coordmaps.resblocks)?;
        let w3 = self.p(g, &format!("resblock.{j}.conv3x3.weight"))?;
        let y = g.tape.conv2d(y, w3, None, (1, 1), Padding::Same)?;
        let mut y = self.batchnorm(g, y, &format!("resblock.{j}.bn"))?;
        if g.modulation == Modulation::Film {
            y = g.tape.film(y, question.0, question.1)?;
            if let Some((gamma, beta)) = acoustic {
                y = g.tape.film(y, gamma, beta)?;
            }
        }
        let y = g.tape.relu(y);
        Ok(g.tape.add(y, a)?)
    }

    /// Residual output to logits `(b, O)`.
    pub fn classify(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let x = self.append_coords(g, x, self.config.coordmaps.classifier)?;
        let y = self.conv_bn_relu(g, x, "classifier", (1, 1))?;
        let y = g.tape.global_maxpool(y)?;
        let w = self.p(g, "classifier.hidden.weight")?;
        let b = self.p(g, "classifier.hidden.bias")?;
        let y = g.tape.linear(y, w, Some(b))?;
        let y = g.tape.relu(y);
        let training = g.training;
        let y = g.tape.dropout(y, self.config.dropout_p, training, &mut g.rng)?;
        let w = self.p(g, "classifier.output.weight")?;
        let b = self.p(g, "classifier.output.bias")?;
        Ok(g.tape.linear(y, w, Some(b))?)
    }

    /// Full forward pass to logits.
    pub fn forward(&self, g: &mut Graph<T>, batch: &Batch<T>) -> Result<Var> {
        let (b, ch, mels, frames) = batch.spec.dims4("forward")?;
        if ch != 1 || mels != self.config.n_mels {
            return Err(ModelError::Incompatible(format!(
                "input is {ch}x{mels}, model expects 1x{}",
                self.config.n_mels
            )));
        }
        if batch.lengths.len() != b || batch.valid_frames.len() != b {
            return Err(ModelError::Data(format!("batch of {b} spectrograms with {} questions", batch.lengths.len())));
        }
        if let Some(&bad) = batch.tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(ModelError::Incompatible(format!(
                "token {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        g.set_frames(frames, &batch.valid_frames);
        let spec = g.tape.input(batch.spec.clone());
        let features = self.extract(g, spec)?;
        let q = self.encode_question(g, &batch.tokens, &batch.lengths, batch.seq_len)?;
        let film = self.film_generator(g, q)?;
        let acoustic = if self.config.malimo { Some(self.malimo_controller(g, features)?) } else { None };
        let mut x = self.stem(g, features)?;
        for j in 0..self.config.j {
            let a = acoustic.as_ref().map(|a| (a.gammas[j], a.betas[j]));
            x = self.resblock_forward(g, x, j, (film.gammas[j], film.betas[j]), a)?;
        }
        self.classify(g, x)
    }

    /// Folds a training pass's batch statistics into the running averages.
    pub fn commit_batch_stats(&mut self, g: &mut Graph<T>) {
        let mom = T::from_f64_lossy(BN_MOMENTUM);
        for (idx, stats) in g.stats.drain(..) {
            let layer = &mut self.bn[idx];
            for (r, &m) in layer.running_mean.iter_mut().zip(&stats.mean) {
                *r = (T::one() - mom) * *r + mom * m;
            }
            for (r, &v) in layer.running_var.iter_mut().zip(&stats.var) {
                *r = (T::one() - mom) * *r + mom * v;
            }
        }
    }

    fn buffers(&self) -> Vec<(String, Tensor<f32>)> {
        let mut out = Vec::new();
        for l in &self.bn {
            let cast =
                |v: &[T]| Tensor::from_vec(&[v.len()], v.iter().map(|x| x.as_f64() as f32).collect()).expect("1-d");
            out.push((format!("{}.running_mean", l.name), cast(&l.running_mean)));
            out.push((format!("{}.running_var", l.name), cast(&l.running_var)));
        }
        out
    }
}

impl Naaqa<f32> {
    /// Snapshot with the config embedded in the metadata under `config`.
    pub fn to_checkpoint(&self, mut metadata: serde_json::Value) -> Checkpoint {
        if !metadata.is_object() {
            metadata = serde_json::json!({});
        }
        metadata["config"] = serde_json::to_value(&self.config).expect("config serializes");
        Checkpoint::from_store(&self.store, &self.buffers(), self.config.hash(), metadata)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(
            ckpt.manifest
                .metadata
                .get("config")
                .cloned()
                .ok_or_else(|| ModelError::Incompatible("checkpoint has no config".into()))?,
        )?;
        let mut model = Self::new(config, 0)?;
        ckpt.restore_params(&mut model.store, &model.config.hash())?;
        for l in &mut model.bn {
            for (suffix, dst) in [("running_mean", &mut l.running_mean), ("running_var", &mut l.running_var)] {
                let name = format!("{}.{suffix}", l.name);
                let t = ckpt.buffer(&name).ok_or_else(|| ModelError::Incompatible(format!("missing buffer {name}")))?;
                if t.numel() != dst.len() {
                    return Err(ModelError::Incompatible(format!(
                        "{name}: {} values for {} channels",
                        t.numel(),
                        dst.len()
                    )));
                }
                dst.copy_from_slice(t.data());
            }
        }
        Ok(model)
    }

    /// Copies parameters and running statistics from `other`.
    pub fn load_state(&mut self, other: &Naaqa<f32>) {
        self.store = other.store.clone();
        self.bn = other.bn.clone();
    }
}

impl<T: Real> Clone for Naaqa<T> {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            store: self.store.clone(),
            bn: self.bn.clone(),
            bn_index: self.bn_index.clone(),
        }
    }
}

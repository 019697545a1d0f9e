//! Offline unsupervised training: trace-based STDP with adaptive thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{LayerSim, ModelParams, RefNetwork, StepHooks};
use crate::encoding::{EncoderConfig, SpikeVector};
use crate::error::{Error, Result};

/// Weight change applied to synapse `(post, pre)` when `post` fires.
pub trait PlasticityRule: Send + Sync {
    /// `pre_trace` is the presynaptic trace at the time of the post spike.
    fn on_post_spike(&self, w: f64, pre_trace: f64) -> f64;
}

/// `w += eta_post * (x_pre - x_offset)`, clipped to `[0, w_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PostTraceRule {
    pub eta_post: f64,
    pub x_offset: f64,
    pub w_max: f64,
}

impl Default for PostTraceRule {
    fn default() -> Self {
        PostTraceRule { eta_post: 0.01, x_offset: 0.4, w_max: 1.0 }
    }
}

impl PlasticityRule for PostTraceRule {
    #[inline]
    fn on_post_spike(&self, w: f64, pre_trace: f64) -> f64 {
        (w + self.eta_post * (pre_trace - self.x_offset)).clamp(0.0, self.w_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub params: ModelParams,
    pub rule: PostTraceRule,
    pub n_neurons: usize,
    pub epochs: usize,
    pub n_steps: usize,
    /// Presynaptic trace time constant, ms.
    pub tau_pre: f64,
    /// Initial weights are uniform in `[0, init_scale * w_max]`.
    pub init_scale: f64,
    /// After every image each neuron's incoming weights are rescaled to sum
    /// to this value.
    pub weight_sum: Option<f64>,
    pub seed: u64,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            params: ModelParams::default(),
            rule: PostTraceRule::default(),
            n_neurons: 400,
            epochs: 1,
            n_steps: crate::engine::DEFAULT_STEPS,
            tau_pre: 20.0,
            init_scale: 0.3,
            weight_sum: Some(78.0),
            seed: 0,
            encoder: EncoderConfig::per_input_lfsr(0x5eed),
        }
    }
}

/// Progress information handed to the training callback.
#[derive(Debug, Clone, Copy)]
pub struct TrainProgress {
    pub epoch: usize,
    pub image: usize,
    pub spikes: u32,
}

/// Seeded uniform initialization.
pub fn init_network(n_inputs: usize, cfg: &TrainConfig) -> RefNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hi = cfg.init_scale * cfg.rule.w_max;
    let weights: Vec<f64> = (0..n_inputs * cfg.n_neurons).map(|_| rng.gen::<f64>() * hi).collect();
    RefNetwork::new(n_inputs, cfg.n_neurons, &weights, vec![0.0; cfg.n_neurons])
        .expect("dimensions are consistent")
}

/// Trains `net` in place on `images` (each `n_inputs` pixels) for `cfg.epochs`
/// sequential passes.
pub fn stdp_train_with<R: PlasticityRule>(
    net: &mut RefNetwork,
    images: &[&[u8]],
    cfg: &TrainConfig,
    rule: &R,
    mut progress: impl FnMut(TrainProgress),
) -> Result<()> {
    if images.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    cfg.params.validate()?;
    let theta_decay = (-(cfg.n_steps as f64) * cfg.params.dt / cfg.params.tau_theta).exp();
    let mut learner = Learner {
        rule,
        theta_plus: cfg.params.theta_plus,
        trace_decay: (-cfg.params.dt / cfg.tau_pre).exp(),
        trace_table: Vec::new(),
        last_pre: vec![None; net.n_inputs()],
    };
    let mut sim = LayerSim::new(net, &cfg.params);
    let mut enc = cfg.encoder.clone();

    for epoch in 0..cfg.epochs {
        // distinct stream per presentation of the same image
        enc.seed = cfg.encoder.seed ^ ((epoch as u64) << 32);
        for (idx, &pixels) in images.iter().enumerate() {
            learner.last_pre.iter_mut().for_each(|t| *t = None);
            let counts = sim.run(&mut &mut *net, pixels, &enc, cfg.n_steps, &mut learner)?;
            for t in net.thetas_mut() {
                *t *= theta_decay;
            }
            if let Some(total) = cfg.weight_sum {
                normalize_rows(net, total, cfg.rule.w_max);
            }
            progress(TrainProgress { epoch, image: idx, spikes: counts.iter().sum() });
        }
    }
    Ok(())
}

/// Trains a freshly initialized network with the default rule.
pub fn stdp_train(images: &[&[u8]], cfg: &TrainConfig, progress: impl FnMut(TrainProgress)) -> Result<RefNetwork> {
    let n_inputs = images
        .first()
        .map(|i| i.len())
        .ok_or_else(|| Error::config("training set is empty"))?;
    let mut net = init_network(n_inputs, cfg);
    stdp_train_with(&mut net, images, cfg, &cfg.rule.clone(), progress)?;
    Ok(net)
}

/// Rescales every neuron's incoming weights to sum to `total`, then clips
/// them to `w_max`.
pub fn normalize_rows(net: &mut RefNetwork, total: f64, w_max: f64) {
    let (n_in, n) = (net.n_inputs(), net.n_neurons());
    let mut sums = vec![0.0; n];
    for j in 0..n_in {
        for (i, s) in sums.iter_mut().enumerate() {
            *s += net.weight(i, j);
        }
    }
    let factors: Vec<f64> = sums.iter().map(|&s| if s > 0.0 { total / s } else { 1.0 }).collect();
    for j in 0..n_in {
        for (i, f) in factors.iter().enumerate() {
            let w = net.weight_mut(i, j);
            *w = (*w * f).min(w_max);
        }
    }
}

/// Nearest-spike presynaptic traces plus the plasticity and homeostasis
/// updates applied on each post spike.
struct Learner<'a, R> {
    rule: &'a R,
    theta_plus: f64,
    trace_decay: f64,
    trace_table: Vec<f64>,
    last_pre: Vec<Option<usize>>,
}

impl<R: PlasticityRule> Learner<'_, R> {
    fn trace(&mut self, age: usize) -> f64 {
        while self.trace_table.len() <= age {
            let k = self.trace_table.len() as i32;
            self.trace_table.push(self.trace_decay.powi(k));
        }
        self.trace_table[age]
    }
}

impl<R: PlasticityRule> StepHooks<&mut RefNetwork> for Learner<'_, R> {
    fn on_input(&mut self, step: usize, input: &SpikeVector) {
        for j in input.ones() {
            self.last_pre[j] = Some(step);
        }
    }

    fn on_fire(&mut self, net: &mut &mut RefNetwork, step: usize, post: usize) {
        for j in 0..self.last_pre.len() {
            let x = match self.last_pre[j] {
                Some(s) => self.trace(step - s),
                None => 0.0,
            };
            let w = net.weight_mut(post, j);
            *w = self.rule.on_post_spike(*w, x);
        }
        net.thetas_mut()[post] += self.theta_plus;
    }
}

//! Cycle-accounted emulation of the accelerator's inference path.
//!
//! A step is *active* for a layer when its excitatory or inhibitory input
//! vector has any bit set. Active steps serialize every spike position
//! through the neurons and cost `n_inputs + n_neurons` clock cycles;
//! inactive steps only decay and cost one cycle.
//!
//! Step order inside a layer: excitatory spikes in ascending index order,
//! then inhibitory spikes (the layer's own outputs from the previous step,
//! skipping each neuron's own bit), then one shift decay, then the
//! threshold comparison.

use crate::encoding::{Encoder, EncoderConfig, SpikeVector};
use crate::error::{Error, Result};
use crate::fixedpoint::{
    align, decay_raw, ArithMode, DecayMode, FixedFormat, FixedPoint, OverflowLog, WidthProfile,
};
use crate::reference::LabelMap;

/// Default shift approximating dt/tau = 0.1 ms / 100 ms by 2^-10.
pub const DEFAULT_DECAY_SHIFT: u32 = 10;
/// 350 ms at 0.1 ms per step.
pub const DEFAULT_STEPS: usize = 3500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub arith: ArithMode,
    pub decay_shift: u32,
    pub decay_mode: DecayMode,
    /// Skip the leak on active steps (strict reading of the skip logic).
    pub decay_only_on_inactive: bool,
    pub n_steps: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            arith: ArithMode::Saturate,
            decay_shift: DEFAULT_DECAY_SHIFT,
            decay_mode: DecayMode::Faithful,
            decay_only_on_inactive: false,
            n_steps: DEFAULT_STEPS,
        }
    }
}

/// Membrane register and threshold register of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeuronState {
    pub v: FixedPoint,
    pub theta: FixedPoint,
}

impl NeuronState {
    pub fn at_rest(theta: FixedPoint) -> Self {
        NeuronState { v: FixedPoint::zero(theta.format()), theta }
    }

    /// Adds an (aligned) synaptic weight to the membrane potential.
    #[inline]
    pub fn integrate(&mut self, w: FixedPoint, mode: ArithMode, log: &mut OverflowLog) {
        debug_assert_eq!(w.format().frac_bits(), self.v.format().frac_bits());
        let fmt = self.v.format();
        let raw = fmt.fit(self.v.raw() as i64 + w.raw() as i64, mode, log);
        self.v = FixedPoint::from_raw(raw as i64, fmt).expect("fit keeps value in range");
    }

    #[inline]
    pub fn decay(&mut self, shift: u32, mode: DecayMode) {
        self.v = crate::fixedpoint::decay_step(self.v, shift, mode);
    }

    /// Strict comparison `v > theta`; on fire the potential is set to `v_reset`.
    #[inline]
    pub fn fire_check(&mut self, v_reset: FixedPoint) -> bool {
        if self.v.raw() > self.theta.raw() {
            self.v = v_reset;
            true
        } else {
            false
        }
    }

    /// End-of-image reset to the (shifted) rest potential, 0.
    #[inline]
    pub fn rest_reset(&mut self) {
        self.v = FixedPoint::zero(self.v.format());
    }
}

/// Immutable parameters of one fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    n_inputs: usize,
    n_neurons: usize,
    /// Row-major `[neuron][input]`, all in one weight format.
    weights: Vec<FixedPoint>,
    thresholds: Vec<FixedPoint>,
    w_inh: FixedPoint,
    v_reset: FixedPoint,
    /// Input-major copy of `weights` aligned to the membrane format.
    aligned: Vec<FixedPoint>,
}

impl Layer {
    pub fn new(
        n_inputs: usize,
        n_neurons: usize,
        weights: Vec<FixedPoint>,
        thresholds: Vec<FixedPoint>,
        w_inh: FixedPoint,
        v_reset: FixedPoint,
    ) -> Result<Self> {
        if n_inputs == 0 || n_neurons == 0 {
            return Err(Error::contract("layer dimensions must be nonzero"));
        }
        if weights.len() != n_inputs * n_neurons {
            return Err(Error::contract(format!(
                "expected {} weights for {n_neurons}x{n_inputs}, got {}",
                n_inputs * n_neurons,
                weights.len()
            )));
        }
        if thresholds.len() != n_neurons {
            return Err(Error::contract(format!(
                "expected {n_neurons} thresholds, got {}",
                thresholds.len()
            )));
        }
        let wfmt = weights[0].format();
        if weights.iter().any(|w| w.format() != wfmt) {
            return Err(Error::contract("weights use mixed formats"));
        }
        if weights.iter().any(|w| w.raw() < 0) {
            return Err(Error::contract("excitatory weights must be non-negative"));
        }
        let membrane = w_inh.format();
        if v_reset.format() != membrane || thresholds.iter().any(|t| t.format() != membrane) {
            return Err(Error::contract(
                "thresholds, v_reset and w_inh must share the membrane format",
            ));
        }
        if w_inh.raw() >= 0 {
            return Err(Error::contract("inhibitory weight must be negative"));
        }
        let mut aligned = vec![FixedPoint::zero(membrane); weights.len()];
        for i in 0..n_neurons {
            for j in 0..n_inputs {
                aligned[j * n_neurons + i] = align(weights[i * n_inputs + j], membrane)?;
            }
        }
        Ok(Layer { n_inputs, n_neurons, weights, thresholds, w_inh, v_reset, aligned })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn weight_format(&self) -> FixedFormat {
        self.weights[0].format()
    }

    pub fn membrane_format(&self) -> FixedFormat {
        self.w_inh.format()
    }

    /// Row-major `[neuron][input]`.
    pub fn weights(&self) -> &[FixedPoint] {
        &self.weights
    }

    pub fn weight(&self, neuron: usize, input: usize) -> FixedPoint {
        self.weights[neuron * self.n_inputs + input]
    }

    pub fn thresholds(&self) -> &[FixedPoint] {
        &self.thresholds
    }

    pub fn w_inh(&self) -> FixedPoint {
        self.w_inh
    }

    pub fn v_reset(&self) -> FixedPoint {
        self.v_reset
    }

    /// Copy of this layer with its membrane-side constants moved into a
    /// register of `total_bits` (same fractional split). Constants that do
    /// not fit are clamped or wrapped per `mode` and logged.
    pub fn with_membrane_bits(&self, total_bits: u32, mode: ArithMode, log: &mut OverflowLog) -> Result<Self> {
        let fmt = self.membrane_format().with_total_bits(total_bits)?;
        let refit = |x: FixedPoint, log: &mut OverflowLog| {
            FixedPoint::from_raw(fmt.fit(x.raw() as i64, mode, log) as i64, fmt)
        };
        let thresholds = self.thresholds.iter().map(|&t| refit(t, log)).collect::<Result<Vec<_>>>()?;
        let v_reset = refit(self.v_reset, log)?;
        let w_inh = refit(self.w_inh, log)?;
        if w_inh.raw() >= 0 {
            return Err(Error::config(format!("inhibitory weight loses its sign in {fmt}")));
        }
        let mut aligned = Vec::with_capacity(self.aligned.len());
        for &w in &self.aligned {
            aligned.push(refit(w, log)?);
        }
        Ok(Layer {
            n_inputs: self.n_inputs,
            n_neurons: self.n_neurons,
            weights: self.weights.clone(),
            thresholds,
            w_inh,
            v_reset,
            aligned,
        })
    }
}

/// Feed-forward stack of layers plus the output neurons' labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    labels: Option<LabelMap>,
}

impl Network {
    pub fn new(layers: Vec<Layer>, labels: Option<LabelMap>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("network has no layers"));
        }
        for pair in layers.windows(2) {
            if pair[1].n_inputs != pair[0].n_neurons {
                return Err(Error::contract(format!(
                    "layer with {} inputs cannot follow a layer of {} neurons",
                    pair[1].n_inputs, pair[0].n_neurons
                )));
            }
        }
        let membrane = layers[0].membrane_format();
        if layers.iter().any(|l| l.membrane_format() != membrane) {
            return Err(Error::contract("layers use different membrane formats"));
        }
        let n_out = layers.last().map(|l| l.n_neurons).unwrap_or(0);
        if let Some(map) = &labels {
            if map.n_neurons() != n_out {
                return Err(Error::contract(format!(
                    "label map covers {} neurons, output layer has {n_out}",
                    map.n_neurons()
                )));
            }
        }
        Ok(Network { layers, labels })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn labels(&self) -> Option<&LabelMap> {
        self.labels.as_ref()
    }

    pub fn set_labels(&mut self, labels: LabelMap) -> Result<()> {
        let n_out = self.n_outputs();
        if labels.n_neurons() != n_out {
            return Err(Error::contract(format!(
                "label map covers {} neurons, output layer has {n_out}",
                labels.n_neurons()
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map(|l| l.n_neurons).unwrap_or(0)
    }

    pub fn membrane_format(&self) -> FixedFormat {
        self.layers[0].membrane_format()
    }

    /// Same network with every layer's membrane register resized.
    pub fn with_membrane_bits(&self, total_bits: u32, mode: ArithMode, log: &mut OverflowLog) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|l| l.with_membrane_bits(total_bits, mode, log))
            .collect::<Result<Vec<_>>>()?;
        Ok(Network { layers, labels: self.labels.clone() })
    }
}

/// Dynamic state of one layer: its neurons and last step's output register.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub neurons: Vec<NeuronState>,
    pub out_spikes: SpikeVector,
}

impl LayerState {
    pub fn at_rest(layer: &Layer) -> Self {
        LayerState {
            neurons: layer.thresholds.iter().map(|&t| NeuronState::at_rest(t)).collect(),
            out_spikes: SpikeVector::new(layer.n_neurons),
        }
    }

    pub fn rest_reset(&mut self) {
        for n in &mut self.neurons {
            n.rest_reset();
        }
        self.out_spikes.clear();
    }

    pub fn potentials(&self) -> impl Iterator<Item = i32> + '_ {
        self.neurons.iter().map(|n| n.v.raw())
    }
}

/// What one layer did during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub active: bool,
    pub cycles: u64,
    pub exc_spikes: usize,
    pub inh_spikes: usize,
    pub fired: usize,
}

/// Advances one layer by one elaboration step. The fired bits are written to
/// `state.out_spikes`; `inh` is normally the previous content of that register.
pub fn layer_step(
    layer: &Layer,
    state: &mut LayerState,
    exc: &SpikeVector,
    inh: &SpikeVector,
    cfg: &EngineConfig,
    log: &mut OverflowLog,
) -> Result<StepOutcome> {
    layer_step_profiled(layer, state, exc, inh, cfg, log, None)
}

/// [`layer_step`] that also records every exact synaptic sum in `profile`.
pub fn layer_step_profiled(
    layer: &Layer,
    state: &mut LayerState,
    exc: &SpikeVector,
    inh: &SpikeVector,
    cfg: &EngineConfig,
    log: &mut OverflowLog,
    mut profile: Option<&mut WidthProfile>,
) -> Result<StepOutcome> {
    if exc.len() != layer.n_inputs {
        return Err(Error::contract(format!(
            "excitatory vector has {} bits, layer has {} inputs",
            exc.len(),
            layer.n_inputs
        )));
    }
    if inh.len() != layer.n_neurons || state.neurons.len() != layer.n_neurons {
        return Err(Error::contract(format!(
            "inhibitory vector/state sized {}/{}, layer has {} neurons",
            inh.len(),
            state.neurons.len(),
            layer.n_neurons
        )));
    }
    let n = layer.n_neurons;
    let exc_spikes = exc.count_ones();
    let inh_spikes = inh.count_ones();
    let active = exc_spikes > 0 || inh_spikes > 0;

    if active {
        for j in exc.ones() {
            let column = &layer.aligned[j * n..(j + 1) * n];
            for (neuron, &w) in state.neurons.iter_mut().zip(column) {
                if let Some(p) = profile.as_deref_mut() {
                    p.record(neuron.v.raw() as i64 + w.raw() as i64);
                }
                neuron.integrate(w, cfg.arith, log);
            }
        }
        if inh_spikes > 0 {
            // every other neuron's spike adds the same w_inh, so the run of
            // adds collapses to one closed-form update per neuron
            let w = layer.w_inh.raw() as i64;
            for (i, neuron) in state.neurons.iter_mut().enumerate() {
                let k = (inh_spikes - inh.get(i) as usize) as u64;
                let fmt = neuron.v.format();
                if let Some(p) = profile.as_deref_mut() {
                    p.record_run(neuron.v.raw() as i64, w, k);
                }
                let raw = fmt.fit_repeated(neuron.v.raw() as i64, w, k, cfg.arith, log);
                neuron.v = FixedPoint::from_raw(raw as i64, fmt)?;
            }
        }
    }

    let decay = !(active && cfg.decay_only_on_inactive);
    let mut fired = 0;
    state.out_spikes.clear();
    for (i, neuron) in state.neurons.iter_mut().enumerate() {
        if decay {
            let raw = decay_raw(neuron.v.raw(), cfg.decay_shift, cfg.decay_mode);
            neuron.v = FixedPoint::from_raw(raw as i64, neuron.v.format())?;
        }
        if neuron.fire_check(layer.v_reset) {
            state.out_spikes.set(i, true);
            fired += 1;
        }
    }

    let cycles = if active { (layer.n_inputs + layer.n_neurons) as u64 } else { 1 };
    Ok(StepOutcome { active, cycles, exc_spikes, inh_spikes, fired })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CycleStats {
    pub active_steps: u64,
    pub inactive_steps: u64,
    pub clock_cycles: u64,
    /// Spikes emitted by each output neuron.
    pub spikes_out: Vec<u32>,
}

impl CycleStats {
    pub fn total_steps(&self) -> u64 {
        self.active_steps + self.inactive_steps
    }

    /// Seconds at clock frequency `f_clk` (Hz).
    pub fn classification_time(&self, f_clk: f64) -> f64 {
        self.clock_cycles as f64 / f_clk
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub label: usize,
    /// Output spikes summed per label.
    pub counts: Vec<u64>,
    /// No output neuron fired; `label` is only the tie-break result.
    pub zero_confidence: bool,
    pub stats: CycleStats,
    pub overflow: OverflowLog,
}

/// Outcome of a network-wide step (the control unit waits for the slowest layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NetworkStep {
    pub cycles: u64,
    pub active: bool,
    /// Outcome of the first layer, which sees the encoder output.
    pub first_layer: StepOutcome,
}

/// One single-threaded engine instance. Parameters are borrowed read-only,
/// so many engines may share one [`Network`].
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    net: &'a Network,
    cfg: EngineConfig,
    states: Vec<LayerState>,
    /// Outputs registered at the end of the previous step, per layer.
    registered: Vec<SpikeVector>,
    stats: CycleStats,
    log: OverflowLog,
    profile: Option<WidthProfile>,
}

impl<'a> Engine<'a> {
    pub fn new(net: &'a Network, cfg: EngineConfig) -> Result<Self> {
        let bits = net.membrane_format().total_bits();
        if cfg.decay_shift == 0 || cfg.decay_shift >= bits {
            return Err(Error::config(format!("decay shift {} must be in 1..{bits}", cfg.decay_shift)));
        }
        if cfg.n_steps == 0 {
            return Err(Error::config("n_steps must be at least 1"));
        }
        let states: Vec<LayerState> = net.layers.iter().map(LayerState::at_rest).collect();
        let registered = net.layers.iter().map(|l| SpikeVector::new(l.n_neurons)).collect();
        Ok(Engine {
            net,
            cfg,
            states,
            registered,
            stats: CycleStats { spikes_out: vec![0; net.n_outputs()], ..Default::default() },
            log: OverflowLog::default(),
            profile: None,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn states(&self) -> &[LayerState] {
        &self.states
    }

    pub fn stats(&self) -> &CycleStats {
        &self.stats
    }

    pub fn overflow(&self) -> &OverflowLog {
        &self.log
    }

    /// One elaboration step. Layer `L` sees layer `L-1`'s outputs from the
    /// previous step as excitatory input and its own previous outputs as
    /// inhibitory input.
    pub fn step(&mut self, input: &SpikeVector) -> Result<NetworkStep> {
        let mut result = NetworkStep::default();
        for l in 0..self.net.layers.len() {
            let layer = &self.net.layers[l];
            let (before, rest) = self.registered.split_at(l);
            let exc = if l == 0 { input } else { &before[l - 1] };
            let inh = &rest[0];
            let outcome = layer_step_profiled(
                layer,
                &mut self.states[l],
                exc,
                inh,
                &self.cfg,
                &mut self.log,
                self.profile.as_mut(),
            )?;
            if l == 0 {
                result.first_layer = outcome;
            }
            result.active |= outcome.active;
            result.cycles = result.cycles.max(outcome.cycles);
        }
        for (reg, state) in self.registered.iter_mut().zip(&self.states) {
            reg.copy_from(&state.out_spikes);
        }
        let last = self.states.last().expect("network has layers");
        for i in last.out_spikes.ones() {
            self.stats.spikes_out[i] += 1;
        }
        if result.active {
            self.stats.active_steps += 1;
        } else {
            self.stats.inactive_steps += 1;
        }
        self.stats.clock_cycles += result.cycles;
        Ok(result)
    }

    /// Runs `n_steps` of encoder output through the network, then resets
    /// every neuron to rest. Returns the per-output-neuron statistics and the
    /// overflow log of this image.
    pub fn run_image(&mut self, pixels: &[u8], enc: &EncoderConfig) -> Result<(CycleStats, OverflowLog)> {
        self.run_image_observed(pixels, enc, |_| {})
    }

    /// [`Engine::run_image`] with a per-step callback.
    pub fn run_image_observed(
        &mut self,
        pixels: &[u8],
        enc: &EncoderConfig,
        mut observe: impl FnMut(&NetworkStep),
    ) -> Result<(CycleStats, OverflowLog)> {
        if pixels.len() != self.net.n_inputs() {
            return Err(Error::contract(format!(
                "image has {} pixels, network expects {}",
                pixels.len(),
                self.net.n_inputs()
            )));
        }
        let mut encoder = Encoder::new(enc, pixels)?;
        let mut input = SpikeVector::new(pixels.len());
        for _ in 0..self.cfg.n_steps {
            encoder.step_into(&mut input);
            let s = self.step(&input)?;
            observe(&s);
        }
        let stats = std::mem::take(&mut self.stats);
        self.stats.spikes_out = vec![0; self.net.n_outputs()];
        let log = std::mem::take(&mut self.log);
        self.rest_reset();
        Ok((stats, log))
    }

    /// [`Engine::run_image`] that also scores every synaptic sum against
    /// narrower membrane registers.
    pub fn run_image_profiled(
        &mut self,
        pixels: &[u8],
        enc: &EncoderConfig,
    ) -> Result<(CycleStats, OverflowLog, WidthProfile)> {
        self.profile = Some(WidthProfile::default());
        let run = self.run_image(pixels, enc);
        let profile = self.profile.take().unwrap_or_default();
        run.map(|(stats, log)| (stats, log, profile))
    }

    /// Classifies one image with the network's label map.
    pub fn infer(&mut self, pixels: &[u8], enc: &EncoderConfig) -> Result<InferenceResult> {
        let labels = self
            .net
            .labels
            .as_ref()
            .ok_or_else(|| Error::config("network has no label assignment"))?;
        let (stats, overflow) = self.run_image(pixels, enc)?;
        let vote = labels.classify(&stats.spikes_out);
        Ok(InferenceResult {
            label: vote.label,
            counts: vote.totals,
            zero_confidence: vote.silent,
            stats,
            overflow,
        })
    }

    /// Every neuron back to the rest potential and output registers cleared.
    pub fn rest_reset(&mut self) {
        for s in &mut self.states {
            s.rest_reset();
        }
        for r in &mut self.registered {
            r.clear();
        }
    }
}

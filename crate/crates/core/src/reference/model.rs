//! Current-based LIF layer in full precision.

use crate::encoding::{Encoder, EncoderConfig, SpikeVector};
use crate::error::{Error, Result};

/// Biophysical and homeostasis constants (mV, ms).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub v_rest: f64,
    pub tau: f64,
    pub dt: f64,
    pub v_thresh_base: f64,
    pub v_reset: f64,
    /// Lower clip for the membrane potential, if any.
    pub v_floor: Option<f64>,
    /// Potential change caused by one lateral inhibitory spike (negative).
    pub w_inh: f64,
    pub theta_plus: f64,
    pub tau_theta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            v_rest: -65.0,
            tau: 100.0,
            dt: 0.1,
            v_thresh_base: -52.0,
            v_reset: -60.0,
            v_floor: None,
            w_inh: -15.0,
            theta_plus: 0.05,
            tau_theta: 1e7,
            // (tau_theta is 10^4 s expressed in ms)
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.dt > 0.0) {
            return Err(Error::config("tau and dt must be positive"));
        }
        if self.dt * 10.0 > self.tau {
            return Err(Error::config(format!(
                "dt ({}) must be much smaller than tau ({})",
                self.dt, self.tau
            )));
        }
        if self.w_inh >= 0.0 {
            return Err(Error::config("w_inh must be negative"));
        }
        if self.tau_theta <= 0.0 {
            return Err(Error::config("tau_theta must be positive"));
        }
        Ok(())
    }

    /// Per-step membrane decay factor e^(-dt/tau).
    pub fn decay_factor(&self) -> f64 {
        (-self.dt / self.tau).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefNeuron {
    /// Membrane potential, mV (unshifted).
    pub v: f64,
    /// Adaptive threshold offset, mV.
    pub theta: f64,
}

impl RefNeuron {
    pub fn at_rest(params: &ModelParams) -> Self {
        RefNeuron { v: params.v_rest, theta: 0.0 }
    }
}

/// One step of one neuron: exact exponential leak toward rest, then the
/// summed synaptic input, then the floor clip and the threshold test.
/// With `adapt`, a spike also raises `theta` by `theta_plus`.
pub fn ref_step(n: RefNeuron, input: f64, params: &ModelParams, adapt: bool) -> (RefNeuron, bool) {
    let mut v = params.v_rest + (n.v - params.v_rest) * params.decay_factor() + input;
    if let Some(floor) = params.v_floor {
        v = v.max(floor);
    }
    let mut theta = n.theta;
    let fired = v > params.v_thresh_base + theta;
    if fired {
        v = params.v_reset;
        if adapt {
            theta += params.theta_plus;
        }
    }
    (RefNeuron { v, theta }, fired)
}

/// Trained single-layer parameters in full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct RefNetwork {
    n_inputs: usize,
    n_neurons: usize,
    /// Input-major: `weights[input * n_neurons + neuron]`.
    weights: Vec<f64>,
    thetas: Vec<f64>,
}

impl RefNetwork {
    pub fn new(n_inputs: usize, n_neurons: usize, weights_row_major: &[f64], thetas: Vec<f64>) -> Result<Self> {
        if weights_row_major.len() != n_inputs * n_neurons || thetas.len() != n_neurons {
            return Err(Error::contract(format!(
                "RefNetwork {n_neurons}x{n_inputs}: got {} weights and {} thetas",
                weights_row_major.len(),
                thetas.len()
            )));
        }
        let mut weights = vec![0.0; weights_row_major.len()];
        for i in 0..n_neurons {
            for j in 0..n_inputs {
                weights[j * n_neurons + i] = weights_row_major[i * n_inputs + j];
            }
        }
        Ok(RefNetwork { n_inputs, n_neurons, weights, thetas })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    #[inline]
    pub fn weight(&self, neuron: usize, input: usize) -> f64 {
        self.weights[input * self.n_neurons + neuron]
    }

    #[inline]
    pub(crate) fn weight_mut(&mut self, neuron: usize, input: usize) -> &mut f64 {
        &mut self.weights[input * self.n_neurons + neuron]
    }

    pub fn weights_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.weights.len()];
        for j in 0..self.n_inputs {
            for i in 0..self.n_neurons {
                out[i * self.n_inputs + j] = self.weights[j * self.n_neurons + i];
            }
        }
        out
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub(crate) fn thetas_mut(&mut self) -> &mut [f64] {
        &mut self.thetas
    }

    /// Runs one image with frozen parameters; returns spikes per neuron.
    pub fn spike_counts(
        &self,
        pixels: &[u8],
        params: &ModelParams,
        enc: &EncoderConfig,
        n_steps: usize,
    ) -> Result<Vec<u32>> {
        let mut sim = LayerSim::new(self, params);
        sim.run(&mut &*self, pixels, enc, n_steps, &mut Frozen)
    }
}

/// Per-image dynamic state of a [`RefNetwork`], kept in the rest-shifted
/// frame (`u = v - v_rest`) internally.
pub(crate) struct LayerSim {
    u: Vec<f64>,
    decay: f64,
    u_thresh: f64,
    u_reset: f64,
    u_floor: Option<f64>,
    w_inh: f64,
}

impl LayerSim {
    pub(crate) fn new(net: &RefNetwork, params: &ModelParams) -> Self {
        LayerSim {
            u: vec![0.0; net.n_neurons],
            decay: params.decay_factor(),
            u_thresh: params.v_thresh_base - params.v_rest,
            u_reset: params.v_reset - params.v_rest,
            u_floor: params.v_floor.map(|f| f - params.v_rest),
            w_inh: params.w_inh,
        }
    }

    /// Simulates one image and returns spikes per neuron. `hooks` sees every
    /// input vector and every output spike (after the reset).
    pub(crate) fn run<N, H>(
        &mut self,
        net: &mut N,
        pixels: &[u8],
        enc: &EncoderConfig,
        n_steps: usize,
        hooks: &mut H,
    ) -> Result<Vec<u32>>
    where
        N: std::ops::Deref<Target = RefNetwork>,
        H: StepHooks<N>,
    {
        if pixels.len() != net.n_inputs {
            return Err(Error::contract(format!(
                "image has {} pixels, network expects {}",
                pixels.len(),
                net.n_inputs
            )));
        }
        let n = net.n_neurons;
        let mut encoder = Encoder::new(enc, pixels)?;
        let mut input = SpikeVector::new(pixels.len());
        let mut counts = vec![0u32; n];
        self.u.iter_mut().for_each(|u| *u = 0.0);
        let mut fired: Vec<usize> = Vec::new();

        for step in 0..n_steps {
            encoder.step_into(&mut input);
            hooks.on_input(step, &input);
            for u in &mut self.u {
                *u *= self.decay;
            }
            for j in input.ones() {
                let column = &net.weights[j * n..(j + 1) * n];
                for (u, &w) in self.u.iter_mut().zip(column) {
                    *u += w;
                }
            }
            if !fired.is_empty() {
                let total = self.w_inh * fired.len() as f64;
                for u in &mut self.u {
                    *u += total;
                }
                // no self-inhibition
                for &k in &fired {
                    self.u[k] -= self.w_inh;
                }
            }
            fired.clear();
            let thetas = &net.thetas;
            for (i, u) in self.u.iter_mut().enumerate() {
                if let Some(floor) = self.u_floor {
                    *u = u.max(floor);
                }
                if *u > self.u_thresh + thetas[i] {
                    *u = self.u_reset;
                    fired.push(i);
                }
            }
            for &i in &fired {
                counts[i] += 1;
                hooks.on_fire(net, step, i);
            }
        }
        Ok(counts)
    }
}

/// Observation points inside [`LayerSim::run`].
pub(crate) trait StepHooks<N> {
    fn on_input(&mut self, _step: usize, _input: &SpikeVector) {}
    fn on_fire(&mut self, _net: &mut N, _step: usize, _neuron: usize) {}
}

pub(crate) struct Frozen;

impl<N> StepHooks<N> for Frozen {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_is_a_fixed_point() {
        let p = ModelParams::default();
        let mut n = RefNeuron::at_rest(&p);
        for _ in 0..10_000 {
            n = ref_step(n, 0.0, &p, false).0;
        }
        assert_eq!(n.v, p.v_rest);
    }

    #[test]
    fn leak_matches_closed_form_after_100ms() {
        let p = ModelParams::default();
        let mut n = RefNeuron { v: p.v_rest + 10.0, theta: 0.0 };
        for _ in 0..1000 {
            n = ref_step(n, 0.0, &p, false).0;
        }
        let expected = 10.0 * (-1.0f64).exp();
        assert!((n.v - p.v_rest - expected).abs() < 1e-9, "{}", n.v - p.v_rest);
        assert!((n.v - p.v_rest - 3.679).abs() < 5e-4);
    }

    #[test]
    fn shifted_frame_is_pure_exponential() {
        let p = ModelParams { v_rest: 0.0, v_thresh_base: 1e9, ..Default::default() };
        let mut n = RefNeuron { v: 7.0, theta: 0.0 };
        for k in 1..=500 {
            n = ref_step(n, 0.0, &p, false).0;
            let exact = 7.0 * (-(k as f64) * p.dt / p.tau).exp();
            assert!(((n.v - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn fire_resets_and_adapts() {
        let p = ModelParams::default();
        let n = RefNeuron { v: -52.5, theta: 0.0 };
        let (n2, fired) = ref_step(n, 1.0, &p, true);
        assert!(fired);
        assert_eq!(n2.v, p.v_reset);
        assert_eq!(n2.theta, p.theta_plus);
        let (n3, fired) = ref_step(n, 1.0, &p, false);
        assert!(fired);
        assert_eq!(n3.theta, 0.0);
    }

    #[test]
    fn floor_clips() {
        let p = ModelParams { v_floor: Some(-80.0), ..Default::default() };
        let (n, _) = ref_step(RefNeuron::at_rest(&p), -100.0, &p, false);
        assert_eq!(n.v, -80.0);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        assert!(ModelParams { dt: 50.0, ..Default::default() }.validate().is_err());
        assert!(ModelParams { w_inh: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let w: Vec<f64> = (0..12).map(|x| x as f64).collect();
        let net = RefNetwork::new(4, 3, &w, vec![0.0; 3]).unwrap();
        assert_eq!(net.weight(1, 2), 6.0);
        assert_eq!(net.weights_row_major(), w);
    }
}

//! Full-precision counterpart of the engine: current-based LIF dynamics,
//! offline STDP training, label assignment and export to fixed point.

mod labels;
mod model;
mod stdp;

use rayon::prelude::*;

pub use labels::{argmax, LabelMap, ResponseAccumulator, Vote};
pub use model::{ref_step, ModelParams, RefNetwork, RefNeuron};
pub use stdp::{
    init_network, normalize_rows, stdp_train, stdp_train_with, PlasticityRule, PostTraceRule, TrainConfig,
    TrainProgress,
};

use crate::encoding::EncoderConfig;
use crate::engine::{Layer, Network};
use crate::error::{Error, Result};
use crate::fixedpoint::{quantize, ArithMode, FixedFormat, FixedPoint, OverflowLog};

/// Runs `images` through the frozen network and assigns every neuron the
/// class it responds to most on average.
pub fn assign_labels(
    net: &RefNetwork,
    params: &ModelParams,
    enc: &EncoderConfig,
    n_steps: usize,
    images: &[&[u8]],
    labels: &[u8],
    n_classes: usize,
) -> Result<LabelMap> {
    if images.len() != labels.len() {
        return Err(Error::contract("images and labels differ in length"));
    }
    if images.is_empty() {
        return Err(Error::config("labelling set is empty"));
    }
    let counts: Vec<Vec<u32>> = images
        .par_iter()
        .map(|px| net.spike_counts(px, params, enc, n_steps))
        .collect::<Result<_>>()?;
    let mut acc = ResponseAccumulator::new(net.n_neurons(), n_classes);
    for (c, &l) in counts.iter().zip(labels) {
        if l as usize >= n_classes {
            return Err(Error::contract(format!("label {l} >= n_classes {n_classes}")));
        }
        acc.add(l, c);
    }
    acc.finish()
}

/// Formats and the arithmetic mode used when exporting to the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportFormats {
    pub weight: FixedFormat,
    pub membrane: FixedFormat,
    pub mode: ArithMode,
}

impl Default for ExportFormats {
    fn default() -> Self {
        ExportFormats { weight: FixedFormat::WEIGHT, membrane: FixedFormat::MEMBRANE, mode: ArithMode::Saturate }
    }
}

/// Quantizes trained parameters into an engine network. Potentials are moved
/// into the rest-shifted frame (rest = 0) before quantization. Clamped
/// values are reported in the returned log.
pub fn quantize_network(
    net: &RefNetwork,
    params: &ModelParams,
    formats: ExportFormats,
    labels: Option<LabelMap>,
) -> Result<(Network, OverflowLog)> {
    let mut log = OverflowLog::default();
    let q = |x: f64, fmt: FixedFormat, log: &mut OverflowLog| quantize(x, fmt, formats.mode, log);
    let weights: Vec<FixedPoint> = net
        .weights_row_major()
        .iter()
        .map(|&w| q(w, formats.weight, &mut log))
        .collect();
    let shift = -params.v_rest;
    let thresholds: Vec<FixedPoint> = net
        .thetas()
        .iter()
        .map(|&theta| q(params.v_thresh_base + theta + shift, formats.membrane, &mut log))
        .collect();
    let w_inh = q(params.w_inh, formats.membrane, &mut log);
    let v_reset = q(params.v_reset + shift, formats.membrane, &mut log);
    let layer = Layer::new(net.n_inputs(), net.n_neurons(), weights, thresholds, w_inh, v_reset)?;
    Ok((Network::new(vec![layer], labels)?, log))
}

//! Design-space studies: input/output activity, register width against
//! overflow, weight precision against accuracy, and the cycle cost model.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::encoding::EncoderConfig;
use crate::engine::{Engine, EngineConfig, Network};
use crate::error::{Error, Result};
use crate::fixedpoint::{ArithMode, FixedFormat, OverflowLog, WidthProfile};
use crate::reference::{quantize_network, ExportFormats, LabelMap, ModelParams, RefNetwork};

/// Average-case cycle cost of one classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub avg_active_steps: f64,
    pub n_exc: u64,
    pub n_inh: u64,
    pub total_steps: u64,
    pub f_clk: f64,
}

impl CostModel {
    pub fn new(avg_active_steps: f64, n_exc: u64, n_inh: u64, total_steps: u64, f_clk: f64) -> Result<Self> {
        if !(avg_active_steps >= 0.0 && avg_active_steps <= total_steps as f64) {
            return Err(Error::config(format!(
                "active steps {avg_active_steps} outside 0..={total_steps}"
            )));
        }
        if !(f_clk > 0.0 && f_clk.is_finite()) {
            return Err(Error::config("f_clk must be positive"));
        }
        Ok(CostModel { avg_active_steps, n_exc, n_inh, total_steps, f_clk })
    }
}

/// Active steps serialize every excitatory and inhibitory position; the
/// rest cost one cycle each.
pub fn cycle_count(m: &CostModel) -> f64 {
    m.avg_active_steps * (m.n_exc + m.n_inh) as f64 + (m.total_steps as f64 - m.avg_active_steps)
}

/// Seconds for `cycles` clock cycles at `f_clk` Hz.
pub fn classification_time(cycles: f64, f_clk: f64) -> Result<f64> {
    if !(f_clk > 0.0) {
        return Err(Error::config("f_clk must be positive"));
    }
    Ok(cycles / f_clk)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivityReport {
    pub n_images: u64,
    pub total_steps: u64,
    /// Steps with any excitatory or inhibitory spike at the first layer.
    pub active_steps: u64,
    pub exc_active_steps: u64,
    pub inh_active_steps: u64,
    /// active steps in an image -> number of images
    pub active_steps_histogram: BTreeMap<u64, u64>,
    /// excitatory spikes in a step (> 0) -> number of steps
    pub exc_spike_histogram: BTreeMap<u64, u64>,
    /// inhibitory spikes in a step (> 0) -> number of steps
    pub inh_spike_histogram: BTreeMap<u64, u64>,
}

impl ActivityReport {
    pub fn active_step_fraction(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.active_steps as f64 / self.total_steps as f64
        }
    }

    pub fn mean_active_steps(&self) -> f64 {
        if self.n_images == 0 {
            0.0
        } else {
            self.active_steps as f64 / self.n_images as f64
        }
    }

    fn merge(&mut self, o: &ActivityReport) {
        self.n_images += o.n_images;
        self.total_steps += o.total_steps;
        self.active_steps += o.active_steps;
        self.exc_active_steps += o.exc_active_steps;
        self.inh_active_steps += o.inh_active_steps;
        for (dst, src) in [
            (&mut self.active_steps_histogram, &o.active_steps_histogram),
            (&mut self.exc_spike_histogram, &o.exc_spike_histogram),
            (&mut self.inh_spike_histogram, &o.inh_spike_histogram),
        ] {
            for (&k, &v) in src {
                *dst.entry(k).or_default() += v;
            }
        }
    }
}

/// Runs every image through the engine and records first-layer activity.
pub fn activity_stats(
    images: &[&[u8]],
    enc: &EncoderConfig,
    net: &Network,
    cfg: &EngineConfig,
) -> Result<ActivityReport> {
    let per_image: Vec<ActivityReport> = images
        .par_iter()
        .map(|px| {
            let mut engine = Engine::new(net, *cfg)?;
            let mut r = ActivityReport { n_images: 1, ..Default::default() };
            engine.run_image_observed(px, enc, |s| {
                let o = &s.first_layer;
                r.total_steps += 1;
                if o.active {
                    r.active_steps += 1;
                }
                if o.exc_spikes > 0 {
                    r.exc_active_steps += 1;
                    *r.exc_spike_histogram.entry(o.exc_spikes as u64).or_default() += 1;
                }
                if o.inh_spikes > 0 {
                    r.inh_active_steps += 1;
                    *r.inh_spike_histogram.entry(o.inh_spikes as u64).or_default() += 1;
                }
            })?;
            r.active_steps_histogram.insert(r.active_steps, 1);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let mut total = ActivityReport::default();
    for r in &per_image {
        total.merge(r);
    }
    Ok(total)
}

/// One metric per point of a swept bit width.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Strictly increasing bit widths.
    pub axis: Vec<u32>,
    pub metric: Vec<f64>,
    /// Secondary metric (images with at least one event, for overflow sweeps).
    pub alt_metric: Option<Vec<f64>>,
    /// First zero-overflow width, or the first width on the accuracy plateau.
    pub threshold: Option<u32>,
}

/// Overflow events per membrane register width. The engine runs once per
/// image in a 32-bit register (same fractional split, wrap mode) and every
/// exact synaptic sum is scored against each swept width, so all widths see
/// the same trajectory and the counts are non-increasing in width.
/// `threshold` is the narrowest width from which every wider width is
/// overflow-free.
pub fn overflow_sweep(
    images: &[&[u8]],
    net: &Network,
    enc: &EncoderConfig,
    cfg: &EngineConfig,
    widths: RangeInclusive<u32>,
) -> Result<SweepResult> {
    let cfg = EngineConfig { arith: ArithMode::Wrap, ..*cfg };
    let axis: Vec<u32> = widths.collect();
    if axis.is_empty() {
        return Err(Error::config("empty width range"));
    }
    let frac = net.membrane_format().frac_bits();
    if axis[0] <= frac || *axis.last().unwrap() > 32 {
        return Err(Error::config(format!("widths must lie in {}..=32", frac + 1)));
    }
    let wide = net.with_membrane_bits(32, ArithMode::Wrap, &mut OverflowLog::default())?;
    let profiles: Vec<WidthProfile> = images
        .par_iter()
        .map(|px| Engine::new(&wide, cfg)?.run_image_profiled(px, enc).map(|(_, _, p)| p))
        .collect::<Result<_>>()?;
    let events: Vec<f64> = axis.iter().map(|&w| profiles.iter().map(|p| p.misses(w) as f64).sum()).collect();
    let affected: Vec<f64> =
        axis.iter().map(|&w| profiles.iter().filter(|p| p.misses(w) > 0).count() as f64).collect();
    let threshold = zero_tail(&axis, &events);
    Ok(SweepResult { axis, metric: events, alt_metric: Some(affected), threshold })
}

fn zero_tail(axis: &[u32], metric: &[f64]) -> Option<u32> {
    let mut first = None;
    for (&a, &m) in axis.iter().zip(metric).rev() {
        if m != 0.0 {
            break;
        }
        first = Some(a);
    }
    first
}

/// Accuracy and bookkeeping of one batch evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalResult {
    pub predictions: Vec<usize>,
    pub correct: usize,
    /// Images where no output neuron fired.
    pub silent: usize,
    pub overflow: OverflowLog,
    pub active_steps: u64,
    pub clock_cycles: u64,
}

impl EvalResult {
    pub fn total(&self) -> usize {
        self.predictions.len()
    }

    /// Fraction correct in `[0, 1]`.
    pub fn accuracy(&self) -> f64 {
        if self.predictions.is_empty() {
            0.0
        } else {
            self.correct as f64 / self.predictions.len() as f64
        }
    }
}

fn check_labels(images: &[&[u8]], labels: &[u8]) -> Result<()> {
    if images.len() != labels.len() {
        return Err(Error::contract("images and labels differ in length"));
    }
    Ok(())
}

/// Classifies every image with the engine; results keep input order.
pub fn eval_engine(
    net: &Network,
    cfg: &EngineConfig,
    enc: &EncoderConfig,
    images: &[&[u8]],
    labels: &[u8],
) -> Result<EvalResult> {
    check_labels(images, labels)?;
    let runs: Vec<_> = images
        .par_iter()
        .map(|px| Engine::new(net, *cfg)?.infer(px, enc))
        .collect::<Result<_>>()?;
    let mut out = EvalResult::default();
    for (r, &l) in runs.iter().zip(labels) {
        out.predictions.push(r.label);
        out.correct += (r.label == l as usize) as usize;
        out.silent += r.zero_confidence as usize;
        out.overflow.merge(&r.overflow);
        out.active_steps += r.stats.active_steps;
        out.clock_cycles += r.stats.clock_cycles;
    }
    Ok(out)
}

/// Classifies every image with the full-precision model.
pub fn eval_reference(
    net: &RefNetwork,
    map: &LabelMap,
    params: &ModelParams,
    enc: &EncoderConfig,
    n_steps: usize,
    images: &[&[u8]],
    labels: &[u8],
) -> Result<EvalResult> {
    check_labels(images, labels)?;
    let counts: Vec<Vec<u32>> = images
        .par_iter()
        .map(|px| net.spike_counts(px, params, enc, n_steps))
        .collect::<Result<_>>()?;
    let mut out = EvalResult::default();
    for (c, &l) in counts.iter().zip(labels) {
        let v = map.classify(c);
        out.predictions.push(v.label);
        out.correct += (v.label == l as usize) as usize;
        out.silent += v.silent as usize;
    }
    Ok(out)
}

/// Export formats for a weight grid of `frac_bits` fractional bits: the
/// weight keeps two integer bits (range [-2, 2)), the membrane keeps its 13
/// integer bits and at least 3 fractional bits.
pub fn quant_formats(frac_bits: u32, mode: ArithMode) -> Result<ExportFormats> {
    let m_frac = frac_bits.max(FixedFormat::MEMBRANE.frac_bits());
    let m_int = FixedFormat::MEMBRANE.total_bits() - FixedFormat::MEMBRANE.frac_bits();
    Ok(ExportFormats {
        weight: FixedFormat::new(frac_bits + 2, frac_bits)?,
        membrane: FixedFormat::new(m_int + m_frac, m_frac)?,
        mode,
    })
}

/// Engine accuracy (percent) per fractional weight width. `threshold` is the
/// narrowest width within `tolerance` points of the widest one.
pub fn quant_sweep(
    images: &[&[u8]],
    labels: &[u8],
    net: &RefNetwork,
    params: &ModelParams,
    map: &LabelMap,
    frac_bits: RangeInclusive<u32>,
    cfg: &EngineConfig,
    enc: &EncoderConfig,
    tolerance: f64,
) -> Result<(SweepResult, Vec<EvalResult>)> {
    let axis: Vec<u32> = frac_bits.collect();
    if axis.is_empty() {
        return Err(Error::config("empty fractional-bit range"));
    }
    let mut evals = Vec::with_capacity(axis.len());
    for &f in &axis {
        let (q, _) = quantize_network(net, params, quant_formats(f, cfg.arith)?, Some(map.clone()))?;
        evals.push(eval_engine(&q, cfg, enc, images, labels)?);
    }
    let metric: Vec<f64> = evals.iter().map(|e| 100.0 * e.accuracy()).collect();
    let best = *metric.last().unwrap();
    let threshold = axis.iter().zip(&metric).find(|(_, &m)| m >= best - tolerance).map(|(&a, _)| a);
    Ok((SweepResult { axis, metric, alt_metric: None, threshold }, evals))
}

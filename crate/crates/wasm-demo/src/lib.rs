//! Browser bindings for three small pieces of the simulator: the shift
//! decay against the exact exponential, the LFSR spike encoder, and the
//! cycle cost model.

use wasm_bindgen::prelude::*;

use snnaccel::analysis::{classification_time, cycle_count, CostModel};
use snnaccel::encoding::{encode_image, EncoderConfig};
use snnaccel::fixedpoint::{decay_step, DecayMode, FixedFormat, FixedPoint};

/// Membrane trajectory under `v - (v >> shift)` starting from raw `v0`
/// (16-bit, 3 fractional bits). Returns `steps + 1` raw values.
#[wasm_bindgen]
pub fn decay_trajectory(v0: i32, shift: u32, steps: u32, strict_leak: bool) -> Result<Vec<f64>, JsError> {
    let fmt = FixedFormat::MEMBRANE;
    if shift == 0 || shift >= fmt.total_bits() {
        return Err(JsError::new("shift must be in 1..16"));
    }
    let mut v = FixedPoint::from_raw(v0 as i64, fmt).map_err(|e| JsError::new(&e.to_string()))?;
    let mode = if strict_leak { DecayMode::StrictLeak } else { DecayMode::Faithful };
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(v.raw() as f64);
    for _ in 0..steps {
        v = decay_step(v, shift, mode);
        out.push(v.raw() as f64);
    }
    Ok(out)
}

/// `v0 * exp(-n * dt / tau)` for `n = 0..=steps`.
#[wasm_bindgen]
pub fn exact_trajectory(v0: f64, dt_over_tau: f64, steps: u32) -> Vec<f64> {
    (0..=steps).map(|n| v0 * (-(n as f64) * dt_over_tau).exp()).collect()
}

/// Spike raster of `pixels` over `steps` steps, flattened step-major
/// (`out[t * pixels.len() + j]` is 1 when source `j` spiked at step `t`).
#[wasm_bindgen]
pub fn encoder_raster(pixels: &[u8], single_lfsr: bool, seed: u32, steps: u32) -> Result<Vec<u8>, JsError> {
    let cfg = if single_lfsr {
        EncoderConfig::single_lfsr(seed as u64)
    } else {
        EncoderConfig::per_input_lfsr(seed as u64)
    };
    let train = encode_image(pixels, &cfg, steps as usize).map_err(|e| JsError::new(&e.to_string()))?;
    let mut out = vec![0u8; pixels.len() * steps as usize];
    for (t, s) in train.iter().enumerate() {
        for j in s.ones() {
            out[t * pixels.len() + j] = 1;
        }
    }
    Ok(out)
}

/// `[cycles, seconds]` for one classification.
#[wasm_bindgen]
pub fn cycle_model(active_steps: f64, n_exc: u32, n_inh: u32, total_steps: u32, f_clk: f64) -> Result<Vec<f64>, JsError> {
    let m = CostModel::new(active_steps, n_exc as u64, n_inh as u64, total_steps as u64, f_clk)
        .map_err(|e| JsError::new(&e.to_string()))?;
    let cycles = cycle_count(&m);
    let t = classification_time(cycles, f_clk).map_err(|e| JsError::new(&e.to_string()))?;
    Ok(vec![cycles, t])
}

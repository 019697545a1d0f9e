//! Rate coding of pixel intensities into per-step spike vectors.
//!
//! Randomness comes from Fibonacci LFSRs. Stages are numbered 1..=N with
//! stage 1 the most significant bit of the state word; each clock shifts the
//! word right by one and feeds the XOR of the tapped stages into stage 1.
//! The whole state word is used as the uniform draw, so a draw lies in
//! `1..2^N`.

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

/// Maximal-length Fibonacci taps for widths 3 through 32 (stage numbers,
/// highest stage first).
pub const MAXIMAL_TAPS: [&[u8]; 30] = [
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 6, 2, 1],
    &[20, 17],
    &[21, 19],
    &[22, 21],
    &[23, 18],
    &[24, 23, 22, 17],
    &[25, 22],
    &[26, 6, 2, 1],
    &[27, 5, 2, 1],
    &[28, 25],
    &[29, 27],
    &[30, 6, 4, 1],
    &[31, 28],
    &[32, 22, 2, 1],
];

/// Shipped taps for `width`, if the table covers it.
pub fn maximal_taps(width: u32) -> Option<&'static [u8]> {
    if (3..=32).contains(&width) {
        Some(MAXIMAL_TAPS[width as usize - 3])
    } else {
        None
    }
}

/// Fibonacci linear feedback shift register, XOR feedback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lfsr {
    state: u32,
    width: u32,
    tap_mask: u32,
}

impl Lfsr {
    /// `taps` are stage numbers in `1..=width`.
    pub fn new(width: u32, taps: &[u8], seed: u32) -> Result<Self> {
        if !(2..=32).contains(&width) {
            return Err(Error::contract(format!("LFSR width {width} outside 2..=32")));
        }
        if taps.is_empty() {
            return Err(Error::contract("LFSR needs at least one tap"));
        }
        let mut tap_mask = 0u32;
        for &t in taps {
            let t = t as u32;
            if t == 0 || t > width {
                return Err(Error::contract(format!("tap {t} outside 1..={width}")));
            }
            tap_mask |= 1 << (width - t);
        }
        let state = seed & word_mask(width);
        if state == 0 {
            return Err(Error::contract("LFSR seed is zero in the register width (lock-up state)"));
        }
        Ok(Lfsr { state, width, tap_mask })
    }

    /// LFSR using the shipped maximal-length taps for `width`.
    pub fn maximal(width: u32, seed: u32) -> Result<Self> {
        let taps = maximal_taps(width)
            .ok_or_else(|| Error::contract(format!("no shipped taps for width {width}")))?;
        Lfsr::new(width, taps, seed)
    }

    #[inline]
    pub fn state(&self) -> u32 {
        self.state
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Clocks the register once and returns the new state as the random word.
    #[inline]
    pub fn next_word(&mut self) -> u32 {
        self.state = step_state(self.state, self.width, self.tap_mask);
        self.state
    }

    /// Pure form of [`Lfsr::next_word`].
    pub fn advanced(&self) -> Result<(Lfsr, u32)> {
        if self.state == 0 {
            return Err(Error::contract("LFSR in the all-zero state"));
        }
        let mut next = self.clone();
        let word = next.next_word();
        Ok((next, word))
    }
}

#[inline]
fn word_mask(width: u32) -> u32 {
    if width == 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

#[inline]
fn step_state(state: u32, width: u32, tap_mask: u32) -> u32 {
    let feedback = (state & tap_mask).count_ones() & 1;
    (state >> 1) | (feedback << (width - 1))
}

/// One bit per source for a single elaboration step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeVector(FixedBitSet);

impl SpikeVector {
    pub fn new(len: usize) -> Self {
        SpikeVector(FixedBitSet::with_capacity(len))
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = SpikeVector::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.0.set(i, b);
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0.contains(i)
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        self.0.set(i, value);
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    /// The OR over all bits.
    #[inline]
    pub fn any(&self) -> bool {
        !self.0.is_clear()
    }

    pub fn count_ones(&self) -> usize {
        self.0.count_ones(..)
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn copy_from(&mut self, other: &SpikeVector) {
        self.0.clone_from(&other.0);
    }

    pub fn is_superset(&self, other: &SpikeVector) -> bool {
        self.0.is_superset(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderMode {
    /// One draw per step shared by every source.
    #[default]
    SingleLfsr,
    /// An independent LFSR per source.
    PerInputLfsr,
}

/// Peak input frequency for a full-scale (255) pixel, Hz.
pub const DEFAULT_MAX_RATE_HZ: f64 = 63.75;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub mode: EncoderMode,
    /// Spike probability per step per unit of pixel value.
    pub rate_scale: f64,
    pub lfsr_width: u32,
    /// Overrides the shipped maximal taps for `lfsr_width`.
    pub taps: Option<Vec<u8>>,
    /// Base seed; each image derives its own stream from this and the pixels.
    pub seed: u64,
}

impl EncoderConfig {
    /// Rate scale that maps pixel 255 to `max_rate_hz` at step `dt_ms`.
    pub fn rate_scale_for(max_rate_hz: f64, dt_ms: f64) -> f64 {
        max_rate_hz * dt_ms * 1e-3 / 255.0
    }

    pub fn single_lfsr(seed: u64) -> Self {
        EncoderConfig {
            mode: EncoderMode::SingleLfsr,
            rate_scale: Self::rate_scale_for(DEFAULT_MAX_RATE_HZ, 0.1),
            lfsr_width: 32,
            taps: None,
            seed,
        }
    }

    pub fn per_input_lfsr(seed: u64) -> Self {
        EncoderConfig {
            mode: EncoderMode::PerInputLfsr,
            lfsr_width: 16,
            ..Self::single_lfsr(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_scale >= 0.0 && self.rate_scale * 255.0 <= 1.0) {
            return Err(Error::config(format!(
                "rate_scale {} is not a probability scale (need 0 <= rate_scale * 255 <= 1)",
                self.rate_scale
            )));
        }
        let taps = self.taps()?;
        // Builds a throwaway register to validate width and taps.
        Lfsr::new(self.lfsr_width, &taps, 1)?;
        Ok(())
    }

    pub fn taps(&self) -> Result<Vec<u8>> {
        match &self.taps {
            Some(t) => Ok(t.clone()),
            None => maximal_taps(self.lfsr_width).map(<[u8]>::to_vec).ok_or_else(|| {
                Error::config(format!("no shipped taps for LFSR width {}", self.lfsr_width))
            }),
        }
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig::single_lfsr(1)
    }
}

/// Stateful spike generator for one image.
#[derive(Debug, Clone)]
pub struct Encoder {
    mode: EncoderMode,
    width: u32,
    tap_mask: u32,
    /// Spike iff `draw - 1 < threshold`.
    thresholds: Vec<u32>,
    max_threshold: u32,
    states: Vec<u32>,
}

impl Encoder {
    pub fn new(cfg: &EncoderConfig, pixels: &[u8]) -> Result<Self> {
        cfg.validate()?;
        let taps = cfg.taps()?;
        let template = Lfsr::new(cfg.lfsr_width, &taps, 1)?;
        let width = cfg.lfsr_width;
        let scale = cfg.rate_scale * (width as f64).exp2();
        let thresholds: Vec<u32> = pixels
            .iter()
            .map(|&p| {
                let t = (p as f64 * scale).round_ties_even();
                t.min(word_mask(width) as f64) as u32
            })
            .collect();
        let max_threshold = thresholds.iter().copied().max().unwrap_or(0);

        let image_seed = image_seed(cfg.seed, pixels);
        let n_streams = match cfg.mode {
            EncoderMode::SingleLfsr => 1,
            EncoderMode::PerInputLfsr => pixels.len(),
        };
        let states = (0..n_streams as u64)
            .map(|i| nonzero_seed(splitmix64(image_seed ^ splitmix64(i)), width))
            .collect();

        Ok(Encoder { mode: cfg.mode, width, tap_mask: template.tap_mask, thresholds, max_threshold, states })
    }

    pub fn n_sources(&self) -> usize {
        self.thresholds.len()
    }

    /// Produces the next step's spikes into `out` (resized as needed).
    pub fn step_into(&mut self, out: &mut SpikeVector) {
        if out.len() != self.thresholds.len() {
            *out = SpikeVector::new(self.thresholds.len());
        } else {
            out.clear();
        }
        match self.mode {
            EncoderMode::SingleLfsr => {
                let draw = step_state(self.states[0], self.width, self.tap_mask);
                self.states[0] = draw;
                let u = draw - 1;
                if u < self.max_threshold {
                    for (i, &t) in self.thresholds.iter().enumerate() {
                        if u < t {
                            out.set(i, true);
                        }
                    }
                }
            }
            EncoderMode::PerInputLfsr => {
                let (width, mask) = (self.width, self.tap_mask);
                for (i, (s, &t)) in self.states.iter_mut().zip(&self.thresholds).enumerate() {
                    *s = step_state(*s, width, mask);
                    if *s - 1 < t {
                        out.set(i, true);
                    }
                }
            }
        }
    }

    pub fn step(&mut self) -> SpikeVector {
        let mut out = SpikeVector::new(self.thresholds.len());
        self.step_into(&mut out);
        out
    }
}

/// Spike train for a whole image.
pub fn encode_image(pixels: &[u8], cfg: &EncoderConfig, n_steps: usize) -> Result<Vec<SpikeVector>> {
    if n_steps == 0 {
        return Err(Error::contract("n_steps must be at least 1"));
    }
    let mut enc = Encoder::new(cfg, pixels)?;
    Ok((0..n_steps).map(|_| enc.step()).collect())
}

/// Per-image stream seed: depends only on the base seed and the image
/// content, so results do not depend on dataset order.
fn image_seed(seed: u64, pixels: &[u8]) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &p in pixels {
        h ^= p as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn nonzero_seed(x: u64, width: u32) -> u32 {
    let s = (x as u32) & word_mask(width);
    if s == 0 {
        1
    } else {
        s
    }
}

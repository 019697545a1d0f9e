//! Two's-complement fixed-point arithmetic matching the neuron datapath.
//!
//! Values are carried as a raw signed integer plus a [`FixedFormat`]
//! (total and fractional bit counts). Every operation that can leave the
//! representable range either clamps ([`ArithMode::Saturate`]) or wraps
//! ([`ArithMode::Wrap`]) and records the event in an [`OverflowLog`].

use std::fmt;

use crate::error::{Error, Result};

/// Bit layout of a fixed-point register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    total_bits: u8,
    frac_bits: u8,
}

impl FixedFormat {
    /// 16-bit membrane register with 3 fractional bits.
    pub const MEMBRANE: FixedFormat = FixedFormat { total_bits: 16, frac_bits: 3 };
    /// 5-bit synapse weight word with 3 fractional bits.
    pub const WEIGHT: FixedFormat = FixedFormat { total_bits: 5, frac_bits: 3 };

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if !(2..=32).contains(&total_bits) {
            return Err(Error::contract(format!(
                "total_bits must be in 2..=32, got {total_bits}"
            )));
        }
        if frac_bits >= total_bits {
            return Err(Error::contract(format!(
                "frac_bits ({frac_bits}) must be below total_bits ({total_bits})"
            )));
        }
        Ok(FixedFormat { total_bits: total_bits as u8, frac_bits: frac_bits as u8 })
    }

    #[inline]
    pub fn total_bits(self) -> u32 {
        self.total_bits as u32
    }

    #[inline]
    pub fn frac_bits(self) -> u32 {
        self.frac_bits as u32
    }

    #[inline]
    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    #[inline]
    pub fn max_raw(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Model-unit value of one raw step.
    pub fn resolution(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.resolution()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.resolution()
    }

    #[inline]
    pub fn contains_raw(self, raw: i64) -> bool {
        raw >= self.min_raw() && raw <= self.max_raw()
    }

    /// Same fractional split, different register width.
    pub fn with_total_bits(self, total_bits: u32) -> Result<Self> {
        FixedFormat::new(total_bits, self.frac_bits())
    }

    /// Reduce an exact integer result into this format, logging the event if
    /// the value did not fit.
    #[inline]
    pub fn fit(self, exact: i64, mode: ArithMode, log: &mut OverflowLog) -> i32 {
        if self.contains_raw(exact) {
            return exact as i32;
        }
        match mode {
            ArithMode::Saturate => {
                log.saturations += 1;
                exact.clamp(self.min_raw(), self.max_raw()) as i32
            }
            ArithMode::Wrap => {
                log.overflows += 1;
                let shift = 64 - self.total_bits as u32;
                ((exact << shift) >> shift) as i32
            }
        }
    }

    /// Same result and log as `count` successive `fit(v + step)` calls
    /// starting from `start`, in O(1). `start` and `step` must be in range.
    pub fn fit_repeated(self, start: i64, step: i64, count: u64, mode: ArithMode, log: &mut OverflowLog) -> i32 {
        debug_assert!(self.contains_raw(start) && self.contains_raw(step));
        let exact = start + step * count as i64;
        if step == 0 || self.contains_raw(exact) {
            return exact as i32;
        }
        // distance past the bound that is being approached
        let (room, beyond) = if step < 0 {
            (start - self.min_raw(), self.min_raw() - exact)
        } else {
            (self.max_raw() - start, exact - self.max_raw())
        };
        match mode {
            ArithMode::Saturate => {
                // adds that still fit, then every remaining add clamps
                log.saturations += count - (room / step.abs()) as u64;
                exact.clamp(self.min_raw(), self.max_raw()) as i32
            }
            ArithMode::Wrap => {
                // |step| never exceeds half the span, so each add crosses at most one boundary
                let span = 1i64 << self.total_bits;
                log.overflows += ((beyond + span - 1) / span) as u64;
                let shift = 64 - self.total_bits;
                ((exact << shift) >> shift) as i32
            }
        }
    }
}

impl fmt::Display for FixedFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.total_bits, self.frac_bits)
    }
}

/// What happens when an exact result leaves the register range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArithMode {
    #[default]
    Saturate,
    Wrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddSub {
    Add,
    Sub,
}

/// Behaviour of the shift decay for small positive potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecayMode {
    /// `v - (v >> k)`, exactly as the shifter and subtractor compute it. Values
    /// in `1..2^k` do not move.
    #[default]
    Faithful,
    /// Like `Faithful` but removes one raw unit when the shifted term truncates
    /// to zero on a positive value, so every positive potential keeps leaking.
    StrictLeak,
}

/// Out-of-range events seen during a run. Only ever incremented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverflowLog {
    /// Results that were wrapped modulo 2^total_bits.
    pub overflows: u64,
    /// Results that were clamped to the format bounds.
    pub saturations: u64,
}

impl OverflowLog {
    pub fn total(&self) -> u64 {
        self.overflows + self.saturations
    }

    pub fn merge(&mut self, other: &OverflowLog) {
        self.overflows += other.overflows;
        self.saturations += other.saturations;
    }
}

/// A raw two's-complement code together with its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPoint {
    raw: i32,
    format: FixedFormat,
}

impl FixedPoint {
    /// Builds a value from a raw code, rejecting codes outside the format.
    pub fn from_raw(raw: i64, format: FixedFormat) -> Result<Self> {
        if !format.contains_raw(raw) {
            return Err(Error::contract(format!(
                "raw code {raw} does not fit format {format}"
            )));
        }
        Ok(FixedPoint { raw: raw as i32, format })
    }

    pub fn zero(format: FixedFormat) -> Self {
        FixedPoint { raw: 0, format }
    }

    #[inline]
    pub fn raw(self) -> i32 {
        self.raw
    }

    #[inline]
    pub fn format(self) -> FixedFormat {
        self.format
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 * self.format.resolution()
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (raw {} in {})", self.to_f64(), self.raw, self.format)
    }
}

/// Round-to-nearest-even quantization of a model-unit value.
///
/// NaN maps to zero. Infinite or huge inputs saturate (or wrap) like any
/// other out-of-range value.
pub fn quantize(value: f64, format: FixedFormat, mode: ArithMode, log: &mut OverflowLog) -> FixedPoint {
    let scaled = (value * (format.frac_bits() as f64).exp2()).round_ties_even();
    let exact = if scaled.is_nan() {
        0
    } else {
        // `as` saturates at the i64 bounds, which are far outside any format.
        scaled as i64
    };
    FixedPoint { raw: format.fit(exact, mode, log), format }
}

pub fn dequantize(x: FixedPoint) -> f64 {
    x.to_f64()
}

/// Signed adder/subtractor. `b` must already share `a`'s fractional bits
/// (see [`align`]); the result is expressed in `a`'s format.
pub fn add_sub(
    a: FixedPoint,
    b: FixedPoint,
    op: AddSub,
    mode: ArithMode,
    log: &mut OverflowLog,
) -> Result<FixedPoint> {
    if a.format.frac_bits != b.format.frac_bits {
        return Err(Error::contract(format!(
            "add_sub operands have different fractional bits: {} vs {}",
            a.format, b.format
        )));
    }
    let exact = match op {
        AddSub::Add => a.raw as i64 + b.raw as i64,
        AddSub::Sub => a.raw as i64 - b.raw as i64,
    };
    Ok(FixedPoint { raw: a.format.fit(exact, mode, log), format: a.format })
}

/// Re-expresses `w` in `target` without changing its value (sign extension
/// plus a left shift for extra fractional bits).
pub fn align(w: FixedPoint, target: FixedFormat) -> Result<FixedPoint> {
    let extra = target
        .frac_bits()
        .checked_sub(w.format.frac_bits())
        .ok_or_else(|| {
            Error::contract(format!(
                "cannot align {} to {}: target has fewer fractional bits",
                w.format, target
            ))
        })?;
    let raw = (w.raw as i64) << extra;
    FixedPoint::from_raw(raw, target).map_err(|_| {
        Error::contract(format!("value {} is not representable in {}", w.to_f64(), target))
    })
}

/// Smallest two's-complement width that holds `x`.
#[inline]
pub fn required_bits(x: i64) -> u32 {
    65 - (x ^ (x >> 63)).leading_zeros()
}

/// Exact arithmetic results observed in a wide register, scored against
/// every narrower register width at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidthProfile {
    /// `needed[b]`: single results that need exactly `b` bits.
    needed: [u64; 65],
    /// `run_misses[w]`: results of collapsed runs that do not fit `w` bits.
    run_misses: [u64; 65],
}

impl Default for WidthProfile {
    fn default() -> Self {
        WidthProfile { needed: [0; 65], run_misses: [0; 65] }
    }
}

impl WidthProfile {
    #[inline]
    pub fn record(&mut self, exact: i64) {
        self.needed[required_bits(exact) as usize] += 1;
    }

    /// Records the results `start + i * step` for `i = 1..=count`.
    pub fn record_run(&mut self, start: i64, step: i64, count: u64) {
        if count == 0 {
            return;
        }
        let last = start + step * count as i64;
        let widest = required_bits(start).max(required_bits(last));
        for w in 2..widest {
            let (min, max) = (-(1i64 << (w - 1)), (1i64 << (w - 1)) - 1);
            // range of i for which the result lies in [min, max]
            let (lo, hi) = match step.signum() {
                0 => {
                    if (min..=max).contains(&start) {
                        (1, count as i64)
                    } else {
                        (1, 0)
                    }
                }
                -1 => (ceil_div(start - max, -step), (start - min).div_euclid(-step)),
                _ => (ceil_div(min - start, step), (max - start).div_euclid(step)),
            };
            let inside = (hi.min(count as i64) - lo.max(1) + 1).max(0) as u64;
            self.run_misses[w as usize] += count - inside;
        }
    }

    /// Results that would not fit a register of `width` bits.
    pub fn misses(&self, width: u32) -> u64 {
        let w = width.min(64) as usize;
        self.needed[w + 1..].iter().sum::<u64>() + self.run_misses[w]
    }

    pub fn merge(&mut self, other: &WidthProfile) {
        for (a, b) in self.needed.iter_mut().zip(&other.needed) {
            *a += b;
        }
        for (a, b) in self.run_misses.iter_mut().zip(&other.run_misses) {
            *a += b;
        }
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// One step of shift-based leak: `v - (v >> shift)` with an arithmetic shift.
///
/// The subtracted term always has the sign of `v` and a magnitude no larger
/// than `|v|`, so the result never leaves the format.
///
/// # Panics
///
/// If `shift` is not in `1..total_bits`.
#[inline]
pub fn decay_step(v: FixedPoint, shift: u32, mode: DecayMode) -> FixedPoint {
    assert!(
        shift > 0 && shift < v.format.total_bits(),
        "decay shift {shift} outside 1..{}",
        v.format.total_bits()
    );
    FixedPoint { raw: decay_raw(v.raw, shift, mode), format: v.format }
}

#[inline]
pub(crate) fn decay_raw(raw: i32, shift: u32, mode: DecayMode) -> i32 {
    let leak = raw >> shift;
    if mode == DecayMode::StrictLeak && leak == 0 && raw > 0 {
        raw - 1
    } else {
        raw - leak
    }
}

//! Binary network files.
//!
//! `SNNW` holds a quantized engine network, `SNNF` a full-precision
//! reference network. All integers and floats are little-endian.
//!
//! `SNNW` version 1:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `SNNW` |
//! | 4 | 2 | version (u16) |
//! | 6 | 2 | layer count (u16) |
//! | 8 | 2 | weight format total, frac bits (u8, u8) |
//! | 10 | 2 | membrane format total, frac bits (u8, u8) |
//! | 12 | 1 | decay shift (u8) |
//! | 13 | 1 | reserved, 0 |
//! | 14 | 2 | class count (u16), 0 when unlabelled |
//! | 16 | 16 per layer | n_inputs u32, n_neurons u32, w_inh i32, v_reset i32 (raw codes) |
//!
//! Then per layer: weight codes as i32 row-major `[neuron][input]`, then
//! threshold codes as i32. When labelled, one label byte and one flag byte
//! (1 = neuron silent during labelling) per output neuron follow. The file
//! must end exactly there.

use std::fs;
use std::path::Path;

use crate::engine::{Layer, Network};
use crate::error::{Error, Result};
use crate::fixedpoint::{FixedFormat, FixedPoint};
use crate::reference::{LabelMap, RefNetwork};

pub const NETWORK_MAGIC: &[u8; 4] = b"SNNW";
pub const REF_NETWORK_MAGIC: &[u8; 4] = b"SNNF";
pub const VERSION: u16 = 1;

/// Quantized network plus the decay shift it was exported for.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub network: Network,
    pub decay_shift: u32,
}

/// Full-precision network, optionally with its label map.
#[derive(Debug, Clone, PartialEq)]
pub struct RefNetworkFile {
    pub network: RefNetwork,
    pub labels: Option<LabelMap>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format_err(format!("truncated at offset {} ({n} bytes needed)", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(self.u32()? as i32)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    /// Ensures `count` items of `size` bytes remain before allocating.
    fn expect_items(&self, count: usize, size: usize) -> Result<()> {
        let need = count.checked_mul(size).ok_or_else(|| format_err("dimension overflow"))?;
        if self.bytes.len() - self.pos < need {
            return Err(format_err(format!(
                "payload too short at offset {}: {need} bytes needed, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(format_err(format!("bad magic {got:?}")));
        }
        let v = self.u16()?;
        if v != VERSION {
            return Err(format_err(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(format_err(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn code(raw: i32, fmt: FixedFormat) -> Result<FixedPoint> {
    FixedPoint::from_raw(raw as i64, fmt).map_err(|_| format_err(format!("code {raw} does not fit {fmt}")))
}

fn read_labels(r: &mut Reader<'_>, n: usize, n_classes: usize) -> Result<LabelMap> {
    r.expect_items(n, 2)?;
    let labels = r.take(n)?.to_vec();
    let flags = r.take(n)?;
    if flags.iter().any(|&f| f > 1) {
        return Err(format_err("label flag byte must be 0 or 1"));
    }
    let flagged = flags.iter().map(|&f| f == 1).collect();
    LabelMap::with_flags(labels, n_classes, flagged).map_err(|e| format_err(e.to_string()))
}

fn write_labels(out: &mut Vec<u8>, map: &LabelMap) {
    out.extend_from_slice(map.labels());
    out.extend(map.flagged().iter().map(|&f| f as u8));
}

fn class_count(labels: Option<&LabelMap>) -> Result<u16> {
    match labels {
        None => Ok(0),
        Some(m) => u16::try_from(m.n_classes()).map_err(|_| format_err("too many classes")),
    }
}

pub fn write_network(file: &NetworkFile) -> Result<Vec<u8>> {
    let net = &file.network;
    let layers = net.layers();
    let wfmt = layers[0].weight_format();
    if layers.iter().any(|l| l.weight_format() != wfmt) {
        return Err(format_err("all layers must share one weight format"));
    }
    let mfmt = net.membrane_format();
    let shift = u8::try_from(file.decay_shift).map_err(|_| format_err("decay shift too large"))?;
    let n_layers = u16::try_from(layers.len()).map_err(|_| format_err("too many layers"))?;

    let mut out = Vec::new();
    out.extend_from_slice(NETWORK_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&n_layers.to_le_bytes());
    out.extend_from_slice(&[wfmt.total_bits() as u8, wfmt.frac_bits() as u8]);
    out.extend_from_slice(&[mfmt.total_bits() as u8, mfmt.frac_bits() as u8]);
    out.extend_from_slice(&[shift, 0]);
    out.extend_from_slice(&class_count(net.labels())?.to_le_bytes());
    for l in layers {
        for x in [l.n_inputs() as u32, l.n_neurons() as u32] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for x in [l.w_inh().raw(), l.v_reset().raw()] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    for l in layers {
        for w in l.weights().iter().chain(l.thresholds()) {
            out.extend_from_slice(&w.raw().to_le_bytes());
        }
    }
    if let Some(map) = net.labels() {
        write_labels(&mut out, map);
    }
    Ok(out)
}

/// Parses a whole `SNNW` file; nothing is returned unless every check passes.
pub fn read_network(bytes: &[u8]) -> Result<NetworkFile> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(NETWORK_MAGIC)?;
    let n_layers = r.u16()? as usize;
    if n_layers == 0 {
        return Err(format_err("layer count is zero"));
    }
    let bad_fmt = |e: Error| format_err(e.to_string());
    let wfmt = FixedFormat::new(r.u8()? as u32, r.u8()? as u32).map_err(bad_fmt)?;
    let mfmt = FixedFormat::new(r.u8()? as u32, r.u8()? as u32).map_err(bad_fmt)?;
    let decay_shift = r.u8()? as u32;
    if decay_shift == 0 || decay_shift >= mfmt.total_bits() {
        return Err(format_err(format!("decay shift {decay_shift} invalid for {mfmt}")));
    }
    if r.u8()? != 0 {
        return Err(format_err("reserved byte must be zero"));
    }
    let n_classes = r.u16()? as usize;

    r.expect_items(n_layers, 16)?;
    let mut dims = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let n_in = r.u32()? as usize;
        let n = r.u32()? as usize;
        let w_inh = code(r.i32()?, mfmt)?;
        let v_reset = code(r.i32()?, mfmt)?;
        dims.push((n_in, n, w_inh, v_reset));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (n_in, n, w_inh, v_reset) in dims {
        let n_w = n_in.checked_mul(n).ok_or_else(|| format_err("dimension overflow"))?;
        r.expect_items(n_w.checked_add(n).ok_or_else(|| format_err("dimension overflow"))?, 4)?;
        let weights = (0..n_w).map(|_| code(r.i32()?, wfmt)).collect::<Result<Vec<_>>>()?;
        let thresholds = (0..n).map(|_| code(r.i32()?, mfmt)).collect::<Result<Vec<_>>>()?;
        layers.push(Layer::new(n_in, n, weights, thresholds, w_inh, v_reset).map_err(bad_fmt)?);
    }
    let labels = if n_classes > 0 {
        let n_out = layers.last().map(|l| l.n_neurons()).unwrap_or(0);
        Some(read_labels(&mut r, n_out, n_classes)?)
    } else {
        None
    };
    r.finish()?;
    let network = Network::new(layers, labels).map_err(bad_fmt)?;
    Ok(NetworkFile { network, decay_shift })
}

/// `SNNF` version 1: magic, version u16, n_inputs u32, n_neurons u32,
/// class count u16, then f64 weights row-major, f64 thetas, and the
/// optional label and flag bytes.
pub fn write_ref_network(file: &RefNetworkFile) -> Result<Vec<u8>> {
    let net = &file.network;
    if let Some(m) = &file.labels {
        if m.n_neurons() != net.n_neurons() {
            return Err(format_err("label map size differs from neuron count"));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(REF_NETWORK_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.n_inputs() as u32).to_le_bytes());
    out.extend_from_slice(&(net.n_neurons() as u32).to_le_bytes());
    out.extend_from_slice(&class_count(file.labels.as_ref())?.to_le_bytes());
    for x in net.weights_row_major().iter().chain(net.thetas()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(m) = &file.labels {
        write_labels(&mut out, m);
    }
    Ok(out)
}

pub fn read_ref_network(bytes: &[u8]) -> Result<RefNetworkFile> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(REF_NETWORK_MAGIC)?;
    let n_in = r.u32()? as usize;
    let n = r.u32()? as usize;
    let n_classes = r.u16()? as usize;
    let n_w = n_in.checked_mul(n).ok_or_else(|| format_err("dimension overflow"))?;
    r.expect_items(n_w.checked_add(n).ok_or_else(|| format_err("dimension overflow"))?, 8)?;
    let weights = (0..n_w).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let thetas = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if weights.iter().chain(&thetas).any(|x| !x.is_finite()) {
        return Err(format_err("non-finite parameter"));
    }
    let labels = if n_classes > 0 { Some(read_labels(&mut r, n, n_classes)?) } else { None };
    r.finish()?;
    let network = RefNetwork::new(n_in, n, &weights, thetas).map_err(|e| format_err(e.to_string()))?;
    Ok(RefNetworkFile { network, labels })
}

pub fn load_network(path: &Path) -> Result<NetworkFile> {
    read_network(&read_file(path)?)
}

pub fn save_network(path: &Path, file: &NetworkFile) -> Result<()> {
    Ok(fs::write(path, write_network(file)?)?)
}

pub fn load_ref_network(path: &Path) -> Result<RefNetworkFile> {
    read_ref_network(&read_file(path)?)
}

pub fn save_ref_network(path: &Path, file: &RefNetworkFile) -> Result<()> {
    Ok(fs::write(path, write_ref_network(file)?)?)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

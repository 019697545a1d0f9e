#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snnaccel::engine::{Layer, Network};
use snnaccel::fixedpoint::{FixedFormat, FixedPoint};
use snnaccel::io::{IdxDataset, Split, DATA_DIR_ENV};

/// MNIST location for tests: the env override, else `<workspace>/data/mnist`.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub fn load_mnist(split: Split) -> IdxDataset {
    let dir = mnist_dir();
    IdxDataset::load(&dir, split).unwrap_or_else(|e| {
        panic!(
            "MNIST not found in {} ({e}); run scripts/fetch_mnist.sh or set {DATA_DIR_ENV}",
            dir.display()
        )
    })
}

/// Parameters of a random single-layer network in raw integer codes.
#[derive(Debug, Clone)]
pub struct RawLayer {
    pub n_in: usize,
    pub n: usize,
    /// row-major `[neuron][input]`, weight format {5,3}
    pub w: Vec<i64>,
    /// membrane format {16,3}
    pub theta: Vec<i64>,
    pub w_inh: i64,
    pub v_reset: i64,
}

impl RawLayer {
    pub fn random(rng: &mut ChaCha8Rng, max_in: usize, max_n: usize) -> Self {
        let n_in = rng.gen_range(1..=max_in);
        let n = rng.gen_range(1..=max_n);
        RawLayer {
            n_in,
            n,
            w: (0..n_in * n).map(|_| rng.gen_range(0..=15)).collect(),
            theta: (0..n).map(|_| rng.gen_range(1..=400)).collect(),
            w_inh: rng.gen_range(-300..=-1),
            v_reset: rng.gen_range(-100..=100),
        }
    }

    pub fn to_network(&self) -> Network {
        let wf = FixedFormat::WEIGHT;
        let mf = FixedFormat::MEMBRANE;
        let layer = Layer::new(
            self.n_in,
            self.n,
            self.w.iter().map(|&w| FixedPoint::from_raw(w, wf).unwrap()).collect(),
            self.theta.iter().map(|&t| FixedPoint::from_raw(t, mf).unwrap()).collect(),
            FixedPoint::from_raw(self.w_inh, mf).unwrap(),
            FixedPoint::from_raw(self.v_reset, mf).unwrap(),
        )
        .unwrap();
        Network::new(vec![layer], None).unwrap()
    }
}

pub struct OracleTrace {
    /// potentials after every step
    pub v: Vec<Vec<i64>>,
    /// output spikes of every step
    pub spikes: Vec<Vec<bool>>,
    pub cycles: u64,
}

/// Brute-force reimplementation with plain integers: 16-bit saturating
/// adds, weights shifted from 3 to 3 fractional bits (no-op), excitatory
/// then inhibitory accumulation, `v - (v >> 10)` leak, strict threshold.
pub fn oracle_run(l: &RawLayer, inputs: &[Vec<bool>]) -> OracleTrace {
    let sat = |x: i64| x.clamp(-32768, 32767);
    let mut v = vec![0i64; l.n];
    let mut prev = vec![false; l.n];
    let mut out = OracleTrace { v: vec![], spikes: vec![], cycles: 0 };
    for input in inputs {
        let any_exc = input.iter().any(|&b| b);
        let any_inh = prev.iter().any(|&b| b);
        for (j, &s) in input.iter().enumerate() {
            if s {
                for i in 0..l.n {
                    v[i] = sat(v[i] + l.w[i * l.n_in + j]);
                }
            }
        }
        for k in 0..l.n {
            if prev[k] {
                for i in 0..l.n {
                    if i != k {
                        v[i] = sat(v[i] + l.w_inh);
                    }
                }
            }
        }
        let mut fired = vec![false; l.n];
        for i in 0..l.n {
            v[i] -= v[i] >> 10;
            if v[i] > l.theta[i] {
                v[i] = l.v_reset;
                fired[i] = true;
            }
        }
        out.cycles += if any_exc || any_inh { (l.n_in + l.n) as u64 } else { 1 };
        out.v.push(v.clone());
        out.spikes.push(fired.clone());
        prev = fired;
    }
    out
}

pub fn random_inputs(rng: &mut ChaCha8Rng, n_in: usize, steps: usize, density: f64) -> Vec<Vec<bool>> {
    (0..steps).map(|_| (0..n_in).map(|_| rng.gen_bool(density)).collect()).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

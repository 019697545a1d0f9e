//! Checks on the trained network shipped in `artifacts/`.

mod common;

use std::path::PathBuf;

use common::{load_mnist, mnist_dir};
use snnaccel::analysis::{activity_stats, overflow_sweep};
use snnaccel::fixedpoint::FixedFormat;
use snnaccel::io::{load_network, NetworkFile, RunConfig, Split};

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shipped() -> NetworkFile {
    load_network(&workspace().join("artifacts/mnist.snnw")).unwrap()
}

fn run_config(file: &NetworkFile) -> RunConfig {
    let mut cfg = RunConfig::load(&workspace().join("configs/mnist.cfg")).unwrap();
    cfg.decay_shift = file.decay_shift;
    cfg
}

fn have_mnist() -> bool {
    let ok = mnist_dir().join("t10k-images-idx3-ubyte").exists();
    if !ok {
        eprintln!("skipping: MNIST not present in {}", mnist_dir().display());
    }
    ok
}

#[test]
fn weight_codes_fit_the_declared_format() {
    let file = shipped();
    let layers = file.network.layers();
    assert_eq!(layers.len(), 1);
    let l = &layers[0];
    assert_eq!((l.n_inputs(), l.n_neurons()), (784, 400));
    assert_eq!(l.weight_format(), FixedFormat::WEIGHT);
    assert!(l.weights().iter().all(|w| (-16..=15).contains(&w.raw())));
    assert_eq!(l.membrane_format(), FixedFormat::MEMBRANE);
    assert!(file.network.labels().is_some());
}

#[test]
fn input_activity_is_sparse() {
    if !have_mnist() {
        return;
    }
    let file = shipped();
    let cfg = run_config(&file);
    let test = load_mnist(Split::Test).head(1000);
    let r = activity_stats(&test.images(), &cfg.encoder_config(), &file.network, &cfg.engine_config()).unwrap();
    eprintln!("mean active steps {:.1}, fraction {:.4}", r.mean_active_steps(), r.active_step_fraction());
    assert!(r.active_step_fraction() < 0.05);
    assert!(r.mean_active_steps() > 0.0);
}

#[test]
fn no_overflow_at_32_bits() {
    if !have_mnist() {
        return;
    }
    let file = shipped();
    let cfg = run_config(&file);
    let test = load_mnist(Split::Test).head(100);
    let r = overflow_sweep(&test.images(), &file.network, &cfg.encoder_config(), &cfg.engine_config(), 32..=32).unwrap();
    assert_eq!(r.metric, vec![0.0]);
}

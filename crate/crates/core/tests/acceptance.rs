//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Criteria 2 and 6-8 need MNIST (see scripts/fetch_mnist.sh)
//! and share one network trained here for a full epoch.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::index::sample;

use common::{load_mnist, oracle_run, random_inputs, rng, RawLayer};
use snnaccel::analysis::*;
use snnaccel::encoding::{encode_image, EncoderConfig, EncoderMode, Lfsr, SpikeVector};
use snnaccel::engine::{layer_step, Engine, EngineConfig, Layer, LayerState, Network};
use snnaccel::fixedpoint::*;
use snnaccel::io::idx::{encode_idx_images, encode_idx_labels};
use snnaccel::io::*;
use snnaccel::reference::{assign_labels, quantize_network, stdp_train, LabelMap, RefNetwork};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Tuned run configuration shipped with the repository.
fn run_config() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/mnist.cfg");
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

struct Trained {
    cfg: RunConfig,
    reference: RefNetwork,
    labels: LabelMap,
    quantized: Network,
    test: IdxDataset,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = run_config();
        let train = load_mnist(Split::Train);
        let test = load_mnist(Split::Test);
        let t0 = Instant::now();
        let imgs = train.images();
        let reference = stdp_train(&imgs, &cfg.train_config(), |_| {}).unwrap();
        let n_label = cfg.label_images.min(train.len());
        let labels = assign_labels(
            &reference,
            &cfg.model_params(),
            &cfg.encoder_config_in(EncoderMode::PerInputLfsr),
            cfg.n_steps,
            &imgs[..n_label],
            &train.labels[..n_label],
            10,
        )
        .unwrap();
        let (quantized, _) =
            quantize_network(&reference, &cfg.model_params(), cfg.export_formats().unwrap(), Some(labels.clone()))
                .unwrap();
        eprintln!(
            "# trained {} neurons on {} images, labelled on {} in {:.0} s",
            cfg.n_neurons,
            imgs.len(),
            n_label,
            t0.elapsed().as_secs_f64()
        );
        Trained { cfg, reference, labels, quantized, test }
    })
}

fn c1_cycle_model() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_snnaccel"))
        .args(["cycles", "--active", "23", "--exc", "784", "--inh", "400", "--steps", "3500", "--fclk", "886e6"])
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let field = |prefix: &str| -> Option<f64> {
        text.lines().find_map(|l| l.strip_prefix(prefix)).and_then(|r| r.split_whitespace().next()?.parse().ok())
    };
    let cycles = field("cycles: ").ok_or_else(|| format!("no cycle line in {text:?}"))?;
    let us = field("classification time: ").ok_or_else(|| format!("no time line in {text:?}"))?;
    ensure(
        out.status.success() && cycles == 30709.0 && (34.6..=35.0).contains(&us),
        format!("{cycles} cycles, {us} us"),
    )
}

fn c2_engine_vs_model() -> Outcome {
    let t = trained();
    let cfg = t.cfg.engine_config();
    let mut r = rng(2);
    let idx = sample(&mut r, t.test.len(), 100);
    let mut checked = 0;
    for (k, i) in idx.iter().enumerate() {
        // half the images per encoder mode
        let mode = if k % 2 == 0 { EncoderMode::SingleLfsr } else { EncoderMode::PerInputLfsr };
        let enc = t.cfg.encoder_config_in(mode);
        let (stats, _) = Engine::new(&t.quantized, cfg).unwrap().run_image(t.test.image(i), &enc).unwrap();
        let layer = &t.quantized.layers()[0];
        let m = CostModel::new(
            stats.active_steps as f64,
            layer.n_inputs() as u64,
            layer.n_neurons() as u64,
            cfg.n_steps as u64,
            t.cfg.f_clk,
        )
        .unwrap();
        if cycle_count(&m) != stats.clock_cycles as f64 {
            return Err(format!("image {i}: engine {} vs model {}", stats.clock_cycles, cycle_count(&m)));
        }
        checked += 1;
    }
    Ok(format!("{checked} images exact"))
}

fn c3_decay_fidelity() -> Outcome {
    let n_steps = 3500;
    let v0 = 20000.0;
    let ideal = 1.0 - 2f64.powi(-10);
    let mut v = FixedPoint::from_raw(20000, FixedFormat::MEMBRANE).unwrap();
    let (mut analytic_gap, mut integer_gap) = (0.0f64, 0.0f64);
    let mut envelope_ok = true;
    for n in 1..=n_steps {
        v = decay_step(v, 10, DecayMode::Faithful);
        let exact = v0 * (-(n as f64) / 1000.0).exp();
        let geometric = v0 * ideal.powi(n);
        analytic_gap = analytic_gap.max((geometric - exact).abs() / v0);
        integer_gap = integer_gap.max((v.raw() as f64 - exact).abs() / v0);
        // flooring the leak keeps the register above the geometric curve by
        // less than the sum of the decayed per-step losses, i.e. 2^10 units
        let above = v.raw() as f64 - geometric;
        envelope_ok &= (-1e-9..1024.0).contains(&above);
    }
    // closed form: the gap peaks where d/dn [q^n - e^(-n/1000)] = 0
    let (a, b) = (-ideal.ln(), 1e-3);
    let n_star = (a / b).ln() / (a - b);
    let closed = (ideal.powf(n_star) - (-n_star * b).exp()).abs();
    ensure(
        analytic_gap < 0.02 && (closed - analytic_gap).abs() < 1e-6 && envelope_ok,
        format!(
            "max |(1-2^-10)^n - e^(-n/1000)| = {:.3}% of V0 (closed form {:.3}% at n = {n_star:.0}); \
             integer register within 2^10 units of the geometric curve: {envelope_ok}; \
             integer register vs exponential {:.2}% of V0 (floor truncation)",
            100.0 * analytic_gap,
            100.0 * closed,
            100.0 * integer_gap
        ),
    )
}

fn c4_lfsr_periods() -> Outcome {
    for w in 3..=20u32 {
        let mut l = Lfsr::maximal(w, 1).unwrap();
        let start = l.state();
        let mut n = 0u64;
        loop {
            l.next_word();
            n += 1;
            if l.state() == start || n > 1 << w {
                break;
            }
        }
        if n != (1 << w) - 1 {
            return Err(format!("width {w}: period {n}"));
        }
    }
    Ok("widths 3..=20 maximal".into())
}

fn c5_oracle() -> Outcome {
    let mut r = rng(5);
    for case in 0..50 {
        let l = RawLayer::random(&mut r, 10, 5);
        let steps = 1 + (case * 37) % 100;
        let inputs = random_inputs(&mut r, l.n_in, steps, 0.3);
        let net = l.to_network();
        let want = oracle_run(&l, &inputs);
        let mut e = Engine::new(&net, EngineConfig { n_steps: steps, ..Default::default() }).unwrap();
        for (t, input) in inputs.iter().enumerate() {
            e.step(&SpikeVector::from_bits(input)).unwrap();
            let v: Vec<i64> = e.states()[0].potentials().map(i64::from).collect();
            let s: Vec<bool> = (0..l.n).map(|i| e.states()[0].out_spikes.get(i)).collect();
            if v != want.v[t] || s != want.spikes[t] {
                return Err(format!("case {case} step {t}: {v:?} vs {:?}", want.v[t]));
            }
        }
        if e.stats().clock_cycles != want.cycles {
            return Err(format!("case {case}: cycles {} vs {}", e.stats().clock_cycles, want.cycles));
        }
    }
    Ok("50 networks bit-identical".into())
}

fn c6_overflow_sweep() -> Outcome {
    let t = trained();
    let sub = t.test.head(1000);
    let r = overflow_sweep(&sub.images(), &t.quantized, &t.cfg.encoder_config(), &t.cfg.engine_config(), 5..=32).unwrap();
    let monotone = r.metric.windows(2).all(|w| w[1] <= w[0]);
    // 16 bits is the target knee; trained weights may move it by two
    let knee_ok = r.threshold.is_some_and(|b| b <= 18);
    let shown: Vec<String> = r.axis.iter().zip(&r.metric).take(14).map(|(b, m)| format!("{b}:{m}")).collect();
    ensure(monotone && knee_ok, format!("zero from {:?} bits; events {}", r.threshold, shown.join(" ")))
}

fn c7_accuracy_ladder() -> Outcome {
    let t = trained();
    let imgs = t.test.images();
    let labels = &t.test.labels;
    let per_input = t.cfg.encoder_config_in(EncoderMode::PerInputLfsr);
    let single = t.cfg.encoder_config_in(EncoderMode::SingleLfsr);
    let params = t.cfg.model_params();
    let reference = |enc: &EncoderConfig| {
        100.0 * eval_reference(&t.reference, &t.labels, &params, enc, t.cfg.n_steps, &imgs, labels).unwrap().accuracy()
    };
    let (ref_pi, ref_single) = (reference(&per_input), reference(&single));
    // the deployed pipeline: shared LFSR, {5,3} weights, 16-bit membrane
    let quant_single = 100.0 * eval_engine(&t.quantized, &t.cfg.engine_config(), &single, &imgs, labels).unwrap().accuracy();
    ensure(
        (72.0..=82.0).contains(&ref_pi)
            && (ref_pi - ref_single).abs() <= 4.0
            && (ref_single - quant_single).abs() <= 4.0,
        format!(
            "{} test images: full precision {ref_pi:.2}% per-input LFSRs, {ref_single:.2}% single LFSR; \
             {{5,3}}/16-bit engine {quant_single:.2}% single LFSR",
            imgs.len()
        ),
    )
}

fn c8_quant_plateau() -> Outcome {
    let t = trained();
    let sub = t.test.head(1000);
    let (r, _) = quant_sweep(
        &sub.images(),
        &sub.labels,
        &t.reference,
        &t.cfg.model_params(),
        &t.labels,
        0..=12,
        &t.cfg.engine_config(),
        &t.cfg.encoder_config(),
        1.5,
    )
    .unwrap();
    let at3 = r.metric[r.axis.iter().position(|&f| f == 3).unwrap()];
    let widest = *r.metric.last().unwrap();
    // a 0-bit grid rounds nearly every weight to zero
    let at0 = r.metric[0];
    let shown: Vec<String> = r.axis.iter().zip(&r.metric).map(|(f, m)| format!("{f}:{m:.1}")).collect();
    ensure(
        widest - at3 <= 1.5 && at0 < at3,
        format!("loss at 3 bits {:.1} points; accuracy {}", widest - at3, shown.join(" ")),
    )
}

fn c9_properties() -> Outcome {
    // no source file to persist failures next to in a harness-less target
    let mut runner = TestRunner::new(Config { cases: 512, failure_persistence: None, ..Config::default() });
    let fmt_and_pair = (2u32..=32)
        .prop_flat_map(|t| (Just(t), 0..t))
        .prop_flat_map(|(t, f)| {
            let fmt = FixedFormat::new(t, f).unwrap();
            (Just(fmt), fmt.min_raw()..=fmt.max_raw(), fmt.min_raw()..=fmt.max_raw())
        });
    let mut passed = Vec::new();

    runner
        .run(&fmt_and_pair, |(fmt, a, b)| {
            let (x, y) = (FixedPoint::from_raw(a, fmt).unwrap(), FixedPoint::from_raw(b, fmt).unwrap());
            let mut log = OverflowLog::default();
            let s = add_sub(x, y, AddSub::Add, ArithMode::Saturate, &mut log).unwrap();
            prop_assert_eq!(s.raw() as i64, (a + b).clamp(fmt.min_raw(), fmt.max_raw()));
            prop_assert_eq!(log.saturations, (!fmt.contains_raw(a + b)) as u64);
            let mut log = OverflowLog::default();
            prop_assert_eq!(quantize(dequantize(x), fmt, ArithMode::Saturate, &mut log), x);
            Ok(())
        })
        .map_err(|e| format!("saturation algebra: {e}"))?;
    passed.push("saturation");

    runner
        .run(&(any::<u64>(), 1u32..16), |(seed, shift)| {
            let l = RawLayer::random(&mut rng(seed), 12, 6);
            let f = NetworkFile { network: l.to_network(), decay_shift: shift };
            let bytes = write_network(&f).unwrap();
            prop_assert_eq!(&read_network(&bytes).unwrap(), &f);
            prop_assert!(read_network(&bytes[..bytes.len() - 1]).is_err());
            Ok(())
        })
        .map_err(|e| format!("network round trip: {e}"))?;
    passed.push("round-trip");

    let m = |raw: i64| FixedPoint::from_raw(raw, FixedFormat::MEMBRANE).unwrap();
    runner
        .run(&(2usize..8, 0usize..8, -500i64..500), |(n, k, v0)| {
            let k = k % n;
            let w = FixedPoint::from_raw(0, FixedFormat::WEIGHT).unwrap();
            let l = Layer::new(1, n, vec![w; n], vec![m(30000); n], m(-16), m(0)).unwrap();
            let mut s = LayerState::at_rest(&l);
            s.neurons.iter_mut().for_each(|x| x.v = m(v0));
            let mut inh = SpikeVector::new(n);
            inh.set(k, true);
            let mut log = OverflowLog::default();
            layer_step(&l, &mut s, &SpikeVector::new(1), &inh, &EngineConfig::default(), &mut log).unwrap();
            for (i, v) in s.potentials().enumerate() {
                let before = if i == k { v0 } else { v0 - 16 };
                prop_assert_eq!(v as i64, before - (before >> 10));
            }
            Ok(())
        })
        .map_err(|e| format!("self-inhibition: {e}"))?;
    passed.push("self-inhibition");

    runner
        .run(&(0i64..2000, -200i64..200, 1i64..15), |(theta, reset, extra)| {
            let w = FixedPoint::from_raw(extra, FixedFormat::WEIGHT).unwrap();
            let l = Layer::new(1, 1, vec![w], vec![m(theta)], m(-8), m(reset)).unwrap();
            let mut s = LayerState::at_rest(&l);
            s.neurons[0].v = m(theta);
            let mut log = OverflowLog::default();
            let one = SpikeVector::from_bits(&[true]);
            let out = layer_step(&l, &mut s, &one, &SpikeVector::new(1), &EngineConfig::default(), &mut log).unwrap();
            let after = theta + extra - ((theta + extra) >> 10);
            prop_assert_eq!(out.fired, (after > theta) as usize);
            if after > theta {
                prop_assert_eq!(s.neurons[0].v.raw() as i64, reset);
            }
            Ok(())
        })
        .map_err(|e| format!("fire-reset: {e}"))?;
    passed.push("fire-reset");

    let px: Vec<u8> = (0..2 * 28 * 28).map(|i| (i * 13 % 256) as u8).collect();
    let img = encode_idx_images(2, 28, 28, &px);
    let lab = encode_idx_labels(&[3, 7]);
    if (0..img.len()).any(|n| parse_idx_images(&img[..n]).is_ok())
        || (0..lab.len()).any(|n| parse_idx_labels(&lab[..n]).is_ok())
        || IdxDataset::from_bytes(&img, &lab).is_err()
    {
        return Err("IDX truncation accepted or full file rejected".into());
    }
    passed.push("truncation");

    runner
        .run(&(prop::collection::vec(any::<u8>(), 1..30), any::<u64>()), |(pixels, seed)| {
            for enc in [EncoderConfig::single_lfsr(seed), EncoderConfig::per_input_lfsr(seed)] {
                prop_assert_eq!(encode_image(&pixels, &enc, 100).unwrap(), encode_image(&pixels, &enc, 100).unwrap());
            }
            let mut l = RawLayer::random(&mut rng(seed), 5, 5);
            l.n_in = pixels.len();
            l.w = (0..l.n_in * l.n).map(|i| (i % 16) as i64).collect();
            let net = l.to_network();
            let cfg = EngineConfig { n_steps: 200, ..Default::default() };
            let enc = EncoderConfig::per_input_lfsr(seed);
            let a = Engine::new(&net, cfg).unwrap().infer(&pixels, &enc).unwrap();
            let b = Engine::new(&net, cfg).unwrap().infer(&pixels, &enc).unwrap();
            prop_assert_eq!(a, b);
            Ok(())
        })
        .map_err(|e| format!("determinism: {e}"))?;
    passed.push("determinism");

    Ok(format!("{} x 512 cases: {}", passed.len(), passed.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("cycle model exactness", c1_cycle_model),
        ("decay fidelity", c3_decay_fidelity),
        ("LFSR periods", c4_lfsr_periods),
        ("oracle equivalence", c5_oracle),
        ("property suites", c9_properties),
        ("engine vs cost model", c2_engine_vs_model),
        ("overflow sweep shape", c6_overflow_sweep),
        ("accuracy ladder", c7_accuracy_ladder),
        ("quantization plateau", c8_quant_plateau),
    ];
    let numbers = [1, 3, 4, 5, 9, 2, 6, 7, 8];
    let mut lines = Vec::new();
    for (&(name, f), &num) in criteria.iter().zip(&numbers) {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let line = format!("criterion {num} {tag}: {name} ({detail}) [{:.1} s]", t0.elapsed().as_secs_f64());
        println!("{line}");
        lines.push((num, outcome.is_ok(), line));
    }
    lines.sort_by_key(|l| l.0);
    println!("\nsummary");
    for (_, _, line) in &lines {
        println!("{line}");
    }
    if lines.iter().all(|l| l.1) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

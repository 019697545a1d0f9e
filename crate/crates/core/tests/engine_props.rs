mod common;

use proptest::prelude::*;

use common::{oracle_run, random_inputs, rng, RawLayer};
use snnaccel::analysis::{cycle_count, overflow_sweep, CostModel};
use snnaccel::encoding::{EncoderConfig, SpikeVector};
use snnaccel::engine::{layer_step, Engine, EngineConfig, Layer, LayerState};
use snnaccel::fixedpoint::{ArithMode, FixedFormat, FixedPoint, OverflowLog};

fn to_vector(bits: &[bool]) -> SpikeVector {
    SpikeVector::from_bits(bits)
}

#[test]
fn matches_integer_oracle_on_random_networks() {
    let mut r = rng(42);
    for case in 0..200 {
        let l = RawLayer::random(&mut r, 10, 5);
        let steps = 1 + (case % 100);
        let inputs = random_inputs(&mut r, l.n_in, steps, 0.3);
        let net = l.to_network();
        let mut e = Engine::new(&net, EngineConfig { n_steps: steps, ..Default::default() }).unwrap();
        let want = oracle_run(&l, &inputs);
        for (t, input) in inputs.iter().enumerate() {
            e.step(&to_vector(input)).unwrap();
            let v: Vec<i64> = e.states()[0].potentials().map(i64::from).collect();
            assert_eq!(v, want.v[t], "case {case} step {t}");
            let s: Vec<bool> = (0..l.n).map(|i| e.states()[0].out_spikes.get(i)).collect();
            assert_eq!(s, want.spikes[t], "case {case} step {t}");
        }
        assert_eq!(e.stats().clock_cycles, want.cycles, "case {case}");
    }
}

fn m(raw: i64) -> FixedPoint {
    FixedPoint::from_raw(raw, FixedFormat::MEMBRANE).unwrap()
}

proptest! {
    /// A neuron's own previous spike never inhibits it.
    #[test]
    fn self_inhibition_excluded(n in 2usize..8, k in 0usize..8, v0 in -500i64..500) {
        let k = k % n;
        let w = FixedPoint::from_raw(0, FixedFormat::WEIGHT).unwrap();
        let l = Layer::new(1, n, vec![w; n], vec![m(30000); n], m(-16), m(0)).unwrap();
        let mut s = LayerState::at_rest(&l);
        for neuron in &mut s.neurons {
            neuron.v = m(v0);
        }
        let mut inh = SpikeVector::new(n);
        inh.set(k, true);
        let mut log = OverflowLog::default();
        layer_step(&l, &mut s, &SpikeVector::new(1), &inh, &EngineConfig::default(), &mut log).unwrap();
        let decay = |x: i64| x - (x >> 10);
        for (i, v) in s.potentials().enumerate() {
            let want = if i == k { decay(v0) } else { decay(v0 - 16) };
            prop_assert_eq!(v as i64, want);
        }
    }

    /// Crossing the threshold emits exactly one spike and loads v_reset.
    #[test]
    fn fire_then_reset(theta in 0i64..2000, reset in -200i64..200, extra in 1i64..15) {
        let w = FixedPoint::from_raw(extra, FixedFormat::WEIGHT).unwrap();
        let l = Layer::new(1, 1, vec![w], vec![m(theta)], m(-8), m(reset)).unwrap();
        let mut s = LayerState::at_rest(&l);
        // start just below threshold so that the input crosses it
        s.neurons[0].v = m(theta);
        let mut log = OverflowLog::default();
        let out = layer_step(&l, &mut s, &SpikeVector::from_bits(&[true]), &SpikeVector::new(1), &EngineConfig::default(), &mut log).unwrap();
        let v_after = theta + extra - ((theta + extra) >> 10);
        prop_assert_eq!(out.fired, (v_after > theta) as usize);
        if v_after > theta {
            prop_assert_eq!(s.neurons[0].v.raw() as i64, reset);
            prop_assert!(s.out_spikes.get(0));
        }
    }

    /// Measured cycles equal the cost model fed with the measured active steps.
    #[test]
    fn cycles_agree_with_cost_model(seed in any::<u64>(), pixels in prop::collection::vec(any::<u8>(), 1..10), per_input in any::<bool>()) {
        let mut r = rng(seed);
        let mut l = RawLayer::random(&mut r, 10, 5);
        l.n_in = pixels.len();
        l.w = (0..l.n_in * l.n).map(|i| (i % 16) as i64).collect();
        let net = l.to_network();
        let cfg = EngineConfig { n_steps: 500, ..Default::default() };
        let enc = if per_input { EncoderConfig::per_input_lfsr(seed) } else { EncoderConfig::single_lfsr(seed) };
        let (stats, _) = Engine::new(&net, cfg).unwrap().run_image(&pixels, &enc).unwrap();
        let model = CostModel::new(stats.active_steps as f64, l.n_in as u64, l.n as u64, 500, 1.0).unwrap();
        prop_assert_eq!(cycle_count(&model), stats.clock_cycles as f64);
    }

    /// Same network, image and seed give identical outputs.
    #[test]
    fn run_is_deterministic(seed in any::<u64>(), pixels in prop::collection::vec(any::<u8>(), 1..10)) {
        let mut r = rng(seed);
        let mut l = RawLayer::random(&mut r, 10, 5);
        l.n_in = pixels.len();
        l.w = (0..l.n_in * l.n).map(|i| (i % 16) as i64).collect();
        let net = l.to_network();
        let cfg = EngineConfig { n_steps: 300, ..Default::default() };
        let enc = EncoderConfig::per_input_lfsr(seed);
        let a = Engine::new(&net, cfg).unwrap().run_image(&pixels, &enc).unwrap();
        let mut e = Engine::new(&net, cfg).unwrap();
        e.run_image(&pixels, &enc).unwrap();
        // second image on a reused engine starts from rest again
        let b = e.run_image(&pixels, &enc).unwrap();
        prop_assert_eq!(a, b);
    }

    /// A width scored overflow-free by the sweep runs identically in a real
    /// wrapping register of that width, and vice versa.
    #[test]
    fn sweep_zero_matches_real_narrow_run(seed in any::<u64>(), pixels in prop::collection::vec(any::<u8>(), 1..10)) {
        let mut r = rng(seed);
        let mut l = RawLayer::random(&mut r, 10, 5);
        l.n_in = pixels.len();
        l.w = (0..l.n_in * l.n).map(|i| ((i as u64 ^ seed) % 16) as i64).collect();
        let net = l.to_network();
        let cfg = EngineConfig { n_steps: 400, arith: ArithMode::Wrap, ..Default::default() };
        let enc = EncoderConfig::per_input_lfsr(seed);
        let sweep = overflow_sweep(&[&pixels[..]], &net, &enc, &cfg, 11..=20).unwrap();
        prop_assert!(sweep.metric.windows(2).all(|w| w[1] <= w[0]));
        let wide_net = net.with_membrane_bits(32, ArithMode::Wrap, &mut OverflowLog::default()).unwrap();
        let wide = Engine::new(&wide_net, cfg).unwrap().run_image(&pixels, &enc).unwrap().0.spikes_out;
        for (&bits, &events) in sweep.axis.iter().zip(&sweep.metric) {
            let narrow = net.with_membrane_bits(bits, ArithMode::Wrap, &mut OverflowLog::default()).unwrap();
            let (stats, log) = Engine::new(&narrow, cfg).unwrap().run_image(&pixels, &enc).unwrap();
            prop_assert_eq!(events == 0.0, log.overflows == 0, "{} bits", bits);
            if events == 0.0 {
                prop_assert_eq!(&stats.spikes_out, &wide);
            }
        }
    }
}

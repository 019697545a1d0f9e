//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys
//! not listed in [`RunConfig::KEYS`] are rejected, as are repeated keys.
//! Missing keys keep their defaults.

use std::fmt::Write as _;
use std::path::Path;

use crate::encoding::{EncoderConfig, EncoderMode, DEFAULT_MAX_RATE_HZ};
use crate::engine::{EngineConfig, DEFAULT_DECAY_SHIFT, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::fixedpoint::{ArithMode, DecayMode, FixedFormat};
use crate::reference::{ExportFormats, ModelParams, PostTraceRule, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // neuron model, mV and ms
    pub v_rest: f64,
    pub tau: f64,
    pub dt: f64,
    pub v_thresh: f64,
    pub v_reset: f64,
    pub v_floor: Option<f64>,
    pub w_inh: f64,
    pub theta_plus: f64,
    pub tau_theta: f64,
    // training
    pub n_neurons: usize,
    pub epochs: usize,
    pub train_images: usize,
    pub label_images: usize,
    pub tau_pre: f64,
    pub eta_post: f64,
    pub x_offset: f64,
    pub w_max: f64,
    pub init_scale: f64,
    pub weight_sum: Option<f64>,
    pub train_encoder: EncoderMode,
    // encoder
    pub encoder: EncoderMode,
    pub max_rate_hz: f64,
    pub lfsr_width: Option<u32>,
    pub taps: Option<Vec<u8>>,
    pub seed: u64,
    // engine
    pub n_steps: usize,
    pub decay_shift: u32,
    pub decay_mode: DecayMode,
    pub decay_only_on_inactive: bool,
    pub arith: ArithMode,
    pub weight_bits: u32,
    pub weight_frac_bits: u32,
    pub membrane_bits: u32,
    pub membrane_frac_bits: u32,
    // cost model
    pub f_clk: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::default();
        let t = TrainConfig::default();
        RunConfig {
            v_rest: p.v_rest,
            tau: p.tau,
            dt: p.dt,
            v_thresh: p.v_thresh_base,
            v_reset: p.v_reset,
            v_floor: p.v_floor,
            w_inh: p.w_inh,
            theta_plus: p.theta_plus,
            tau_theta: p.tau_theta,
            n_neurons: t.n_neurons,
            epochs: t.epochs,
            train_images: 0,
            label_images: 10_000,
            tau_pre: t.tau_pre,
            eta_post: t.rule.eta_post,
            x_offset: t.rule.x_offset,
            w_max: t.rule.w_max,
            init_scale: t.init_scale,
            weight_sum: t.weight_sum,
            train_encoder: EncoderMode::PerInputLfsr,
            encoder: EncoderMode::SingleLfsr,
            max_rate_hz: DEFAULT_MAX_RATE_HZ,
            lfsr_width: None,
            taps: None,
            seed: 1,
            n_steps: DEFAULT_STEPS,
            decay_shift: DEFAULT_DECAY_SHIFT,
            decay_mode: DecayMode::Faithful,
            decay_only_on_inactive: false,
            arith: ArithMode::Saturate,
            weight_bits: FixedFormat::WEIGHT.total_bits(),
            weight_frac_bits: FixedFormat::WEIGHT.frac_bits(),
            membrane_bits: FixedFormat::MEMBRANE.total_bits(),
            membrane_frac_bits: FixedFormat::MEMBRANE.frac_bits(),
            f_clk: 886e6,
        }
    }
}

fn mode_name(m: EncoderMode) -> &'static str {
    match m {
        EncoderMode::SingleLfsr => "single",
        EncoderMode::PerInputLfsr => "per_input",
    }
}

fn opt_f64(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "v_rest",
        "tau",
        "dt",
        "v_thresh",
        "v_reset",
        "v_floor",
        "w_inh",
        "theta_plus",
        "tau_theta",
        "n_neurons",
        "epochs",
        "train_images",
        "label_images",
        "tau_pre",
        "eta_post",
        "x_offset",
        "w_max",
        "init_scale",
        "weight_sum",
        "train_encoder",
        "encoder",
        "max_rate_hz",
        "lfsr_width",
        "taps",
        "seed",
        "n_steps",
        "decay_shift",
        "decay_mode",
        "decay_only_on_inactive",
        "arith",
        "weight_bits",
        "weight_frac_bits",
        "membrane_bits",
        "membrane_frac_bits",
        "f_clk",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let key = *Self::KEYS.iter().find(|&&k| k == key).ok_or_else(|| at(format!("unknown key `{key}`")))?;
            if seen.contains(&key) {
                return Err(at(format!("duplicate key `{key}`")));
            }
            seen.push(key);
            cfg.set(key, value).map_err(at)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        RunConfig::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        fn num(v: &str) -> std::result::Result<f64, String> {
            v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("`{v}` is not a finite number"))
        }
        fn opt_num(v: &str) -> std::result::Result<Option<f64>, String> {
            if v == "none" {
                Ok(None)
            } else {
                num(v).map(Some)
            }
        }
        fn int<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse::<T>().map_err(|_| format!("`{v}` is not a valid unsigned integer"))
        }
        fn boolean(v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(format!("`{v}` is not true/false")),
            }
        }
        fn mode(v: &str) -> std::result::Result<EncoderMode, String> {
            match v {
                "single" => Ok(EncoderMode::SingleLfsr),
                "per_input" => Ok(EncoderMode::PerInputLfsr),
                _ => Err(format!("encoder mode `{v}` is not single/per_input")),
            }
        }
        match key {
            "v_rest" => self.v_rest = num(v)?,
            "tau" => self.tau = num(v)?,
            "dt" => self.dt = num(v)?,
            "v_thresh" => self.v_thresh = num(v)?,
            "v_reset" => self.v_reset = num(v)?,
            "v_floor" => self.v_floor = opt_num(v)?,
            "w_inh" => self.w_inh = num(v)?,
            "theta_plus" => self.theta_plus = num(v)?,
            "tau_theta" => self.tau_theta = num(v)?,
            "n_neurons" => self.n_neurons = int(v)?,
            "epochs" => self.epochs = int(v)?,
            "train_images" => self.train_images = int(v)?,
            "label_images" => self.label_images = int(v)?,
            "tau_pre" => self.tau_pre = num(v)?,
            "eta_post" => self.eta_post = num(v)?,
            "x_offset" => self.x_offset = num(v)?,
            "w_max" => self.w_max = num(v)?,
            "init_scale" => self.init_scale = num(v)?,
            "weight_sum" => self.weight_sum = opt_num(v)?,
            "train_encoder" => self.train_encoder = mode(v)?,
            "encoder" => self.encoder = mode(v)?,
            "max_rate_hz" => self.max_rate_hz = num(v)?,
            "lfsr_width" => self.lfsr_width = if v == "default" { None } else { Some(int(v)?) },
            "taps" => {
                self.taps = if v == "default" {
                    None
                } else {
                    Some(v.split(',').map(|t| int::<u8>(t.trim())).collect::<std::result::Result<_, _>>()?)
                }
            }
            "seed" => self.seed = int(v)?,
            "n_steps" => self.n_steps = int(v)?,
            "decay_shift" => self.decay_shift = int(v)?,
            "decay_mode" => {
                self.decay_mode = match v {
                    "faithful" => DecayMode::Faithful,
                    "strict_leak" => DecayMode::StrictLeak,
                    _ => return Err(format!("decay mode `{v}` is not faithful/strict_leak")),
                }
            }
            "decay_only_on_inactive" => self.decay_only_on_inactive = boolean(v)?,
            "arith" => {
                self.arith = match v {
                    "saturate" => ArithMode::Saturate,
                    "wrap" => ArithMode::Wrap,
                    _ => return Err(format!("arith mode `{v}` is not saturate/wrap")),
                }
            }
            "weight_bits" => self.weight_bits = int(v)?,
            "weight_frac_bits" => self.weight_frac_bits = int(v)?,
            "membrane_bits" => self.membrane_bits = int(v)?,
            "membrane_frac_bits" => self.membrane_frac_bits = int(v)?,
            "f_clk" => self.f_clk = num(v)?,
            _ => unreachable!("key list and setter disagree"),
        }
        Ok(())
    }

    /// Cross-field checks; every builder below succeeds afterwards.
    pub fn validate(&self) -> Result<()> {
        // sub-validators report contract violations; here they are bad input
        let as_config = |e: Error| match e {
            Error::Contract(msg) => Error::Config(msg),
            e => e,
        };
        self.model_params().validate().map_err(as_config)?;
        self.encoder_config().validate().map_err(as_config)?;
        self.train_encoder_config().validate().map_err(as_config)?;
        let f = self.export_formats().map_err(as_config)?;
        if self.decay_shift == 0 || self.decay_shift >= f.membrane.total_bits() {
            return Err(Error::config(format!("decay_shift {} invalid for {}", self.decay_shift, f.membrane)));
        }
        if self.n_steps == 0 {
            return Err(Error::config("n_steps must be positive"));
        }
        if self.n_neurons == 0 {
            return Err(Error::config("n_neurons must be positive"));
        }
        if !(self.f_clk > 0.0) {
            return Err(Error::config("f_clk must be positive"));
        }
        if !(self.tau_pre > 0.0 && self.w_max > 0.0 && self.init_scale >= 0.0) {
            return Err(Error::config("tau_pre and w_max must be positive, init_scale non-negative"));
        }
        if self.weight_sum.is_some_and(|s| s <= 0.0) {
            return Err(Error::config("weight_sum must be positive"));
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            v_rest: self.v_rest,
            tau: self.tau,
            dt: self.dt,
            v_thresh_base: self.v_thresh,
            v_reset: self.v_reset,
            v_floor: self.v_floor,
            w_inh: self.w_inh,
            theta_plus: self.theta_plus,
            tau_theta: self.tau_theta,
        }
    }

    fn encoder_for(&self, mode: EncoderMode) -> EncoderConfig {
        let base = match mode {
            EncoderMode::SingleLfsr => EncoderConfig::single_lfsr(self.seed),
            EncoderMode::PerInputLfsr => EncoderConfig::per_input_lfsr(self.seed),
        };
        EncoderConfig {
            rate_scale: EncoderConfig::rate_scale_for(self.max_rate_hz, self.dt),
            lfsr_width: self.lfsr_width.unwrap_or(base.lfsr_width),
            taps: self.taps.clone(),
            ..base
        }
    }

    /// Encoder used for inference and evaluation.
    pub fn encoder_config(&self) -> EncoderConfig {
        self.encoder_for(self.encoder)
    }

    /// Same settings in the other encoder mode.
    pub fn encoder_config_in(&self, mode: EncoderMode) -> EncoderConfig {
        self.encoder_for(mode)
    }

    pub fn train_encoder_config(&self) -> EncoderConfig {
        self.encoder_for(self.train_encoder)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            params: self.model_params(),
            rule: PostTraceRule { eta_post: self.eta_post, x_offset: self.x_offset, w_max: self.w_max },
            n_neurons: self.n_neurons,
            epochs: self.epochs,
            n_steps: self.n_steps,
            tau_pre: self.tau_pre,
            init_scale: self.init_scale,
            weight_sum: self.weight_sum,
            seed: self.seed,
            encoder: self.train_encoder_config(),
        }
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            arith: self.arith,
            decay_shift: self.decay_shift,
            decay_mode: self.decay_mode,
            decay_only_on_inactive: self.decay_only_on_inactive,
            n_steps: self.n_steps,
        }
    }

    pub fn export_formats(&self) -> Result<ExportFormats> {
        Ok(ExportFormats {
            weight: FixedFormat::new(self.weight_bits, self.weight_frac_bits)?,
            membrane: FixedFormat::new(self.membrane_bits, self.membrane_frac_bits)?,
            mode: self.arith,
        })
    }

    /// Renders every key; `parse(to_text())` gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("v_rest", self.v_rest.to_string());
        kv("tau", self.tau.to_string());
        kv("dt", self.dt.to_string());
        kv("v_thresh", self.v_thresh.to_string());
        kv("v_reset", self.v_reset.to_string());
        kv("v_floor", opt_f64(self.v_floor));
        kv("w_inh", self.w_inh.to_string());
        kv("theta_plus", self.theta_plus.to_string());
        kv("tau_theta", self.tau_theta.to_string());
        kv("n_neurons", self.n_neurons.to_string());
        kv("epochs", self.epochs.to_string());
        kv("train_images", self.train_images.to_string());
        kv("label_images", self.label_images.to_string());
        kv("tau_pre", self.tau_pre.to_string());
        kv("eta_post", self.eta_post.to_string());
        kv("x_offset", self.x_offset.to_string());
        kv("w_max", self.w_max.to_string());
        kv("init_scale", self.init_scale.to_string());
        kv("weight_sum", opt_f64(self.weight_sum));
        kv("train_encoder", mode_name(self.train_encoder).into());
        kv("encoder", mode_name(self.encoder).into());
        kv("max_rate_hz", self.max_rate_hz.to_string());
        kv("lfsr_width", self.lfsr_width.map_or("default".into(), |w| w.to_string()));
        kv(
            "taps",
            self.taps.as_ref().map_or("default".into(), |t| {
                t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
            }),
        );
        kv("seed", self.seed.to_string());
        kv("n_steps", self.n_steps.to_string());
        kv("decay_shift", self.decay_shift.to_string());
        kv(
            "decay_mode",
            match self.decay_mode {
                DecayMode::Faithful => "faithful",
                DecayMode::StrictLeak => "strict_leak",
            }
            .into(),
        );
        kv("decay_only_on_inactive", self.decay_only_on_inactive.to_string());
        kv(
            "arith",
            match self.arith {
                ArithMode::Saturate => "saturate",
                ArithMode::Wrap => "wrap",
            }
            .into(),
        );
        kv("weight_bits", self.weight_bits.to_string());
        kv("weight_frac_bits", self.weight_frac_bits.to_string());
        kv("membrane_bits", self.membrane_bits.to_string());
        kv("membrane_frac_bits", self.membrane_frac_bits.to_string());
        kv("f_clk", self.f_clk.to_string());
        s
    }
}

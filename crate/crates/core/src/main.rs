use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use snnaccel::analysis::{
    activity_stats, classification_time, cycle_count, eval_engine, eval_reference, overflow_sweep, quant_sweep,
    CostModel,
};
use snnaccel::encoding::EncoderMode;
use snnaccel::engine::Engine;
use snnaccel::io::{
    data_dir, save_network, save_ref_network, IdxDataset, NetworkFile,
    RefNetworkFile, RunConfig, Split, Table,
};
use snnaccel::reference::{assign_labels, quantize_network, stdp_train};
use snnaccel::{Error, Result};

#[derive(Parser)]
#[command(name = "snnaccel", version, about = "Fixed-point spiking network accelerator simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Network file (SNNW quantized or SNNF full precision)
    #[arg(long, global = true)]
    net: Option<PathBuf>,
    /// Base encoder and initialization seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Elaboration steps per image (total steps for `cycles`)
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Encoder used for evaluation
    #[arg(long, global = true, value_enum)]
    encoder: Option<Mode>,
    /// Also write the result table as TSV to this path
    #[arg(long, global = true)]
    tsv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Single,
    PerInput,
}

impl From<Mode> for EncoderMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Single => EncoderMode::SingleLfsr,
            Mode::PerInput => EncoderMode::PerInputLfsr,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a full-precision network with STDP on the MNIST training set
    Train {
        #[arg(long)]
        out: PathBuf,
        /// Use only the first N training images (0 = config value)
        #[arg(long, default_value_t = 0)]
        images: usize,
    },
    /// Assign a class to every neuron of a full-precision network
    AssignLabels {
        #[arg(long)]
        out: PathBuf,
        /// Labelling images taken from the start of the training set (0 = config value)
        #[arg(long, default_value_t = 0)]
        images: usize,
    },
    /// Export a labelled full-precision network to the fixed-point engine
    Quantize {
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one test image
    Infer {
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Accuracy on the test set; a full-precision network is evaluated
    /// before and after quantization
    BatchEval {
        #[arg(long, default_value_t = 1000)]
        images: usize,
    },
    /// Input and output activity statistics
    Stats {
        #[arg(long, default_value_t = 1000)]
        images: usize,
    },
    /// Overflow events against membrane register width
    SweepParallelism {
        #[arg(long, default_value_t = 1000)]
        images: usize,
        #[arg(long, default_value_t = 5)]
        from: u32,
        #[arg(long, default_value_t = 32)]
        to: u32,
    },
    /// Engine accuracy against fractional weight bits
    SweepQuant {
        #[arg(long, default_value_t = 1000)]
        images: usize,
        #[arg(long, default_value_t = 0)]
        from: u32,
        #[arg(long, default_value_t = 12)]
        to: u32,
    },
    /// Cycle count and classification time from the cost model
    Cycles {
        #[arg(long)]
        active: f64,
        #[arg(long, default_value_t = 784)]
        exc: u64,
        #[arg(long, default_value_t = 400)]
        inh: u64,
        #[arg(long)]
        fclk: Option<f64>,
    },
}

enum AnyNet {
    Quantized(NetworkFile),
    Reference(RefNetworkFile),
}

struct Ctx {
    cfg: RunConfig,
    global: Global,
}

impl Ctx {
    fn net_path(&self) -> Result<&Path> {
        self.global.net.as_deref().ok_or_else(|| Error::Config("--net is required".into()))
    }

    fn load_any(&self) -> Result<AnyNet> {
        let path = self.net_path()?;
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        match bytes.get(..4) {
            Some(b"SNNF") => Ok(AnyNet::Reference(snnaccel::io::read_ref_network(&bytes)?)),
            _ => Ok(AnyNet::Quantized(snnaccel::io::read_network(&bytes)?)),
        }
    }

    fn load_quantized(&self) -> Result<NetworkFile> {
        match self.load_any()? {
            AnyNet::Quantized(f) => Ok(f),
            AnyNet::Reference(r) => self.export(&r),
        }
    }

    fn export(&self, r: &RefNetworkFile) -> Result<NetworkFile> {
        let labels = r.labels.clone().ok_or_else(|| Error::Config("network has no labels; run assign-labels".into()))?;
        let (network, log) =
            quantize_network(&r.network, &self.cfg.model_params(), self.cfg.export_formats()?, Some(labels))?;
        if log.total() > 0 {
            eprintln!("note: {} parameters clamped or wrapped during export", log.total());
        }
        Ok(NetworkFile { network, decay_shift: self.cfg.decay_shift })
    }

    fn dataset(&self, split: Split, n: usize) -> Result<IdxDataset> {
        let ds = IdxDataset::load(&data_dir(), split)?;
        Ok(if n == 0 { ds } else { ds.head(n) })
    }

    fn emit(&self, table: &Table) -> Result<()> {
        print!("{}", table.to_pretty());
        if let Some(p) = &self.global.tsv {
            std::fs::write(p, table.to_tsv())?;
        }
        Ok(())
    }
}

fn timed<T>(what: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let r = f()?;
    eprintln!("# time {what}: {:.2} s", t.elapsed().as_secs_f64());
    Ok(r)
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.global.steps {
        cfg.n_steps = n;
    }
    if let Some(m) = cli.global.encoder {
        cfg.encoder = m.into();
    }
    cfg.validate()?;
    let ctx = Ctx { cfg, global: cli.global };
    let cfg = &ctx.cfg;

    match cli.cmd {
        Command::Train { out, images } => {
            let n = if images > 0 { images } else { cfg.train_images };
            let ds = ctx.dataset(Split::Train, n)?;
            let imgs = ds.images();
            let tc = cfg.train_config();
            let total = imgs.len() * tc.epochs;
            let net = timed("train", || {
                stdp_train(&imgs, &tc, |p| {
                    let done = p.epoch * imgs.len() + p.image + 1;
                    if done % 1000 == 0 || done == total {
                        eprintln!("# trained {done}/{total}");
                    }
                })
            })?;
            save_ref_network(&out, &RefNetworkFile { network: net, labels: None })?;
            println!("trained {} neurons on {} images x {} epochs -> {}", tc.n_neurons, imgs.len(), tc.epochs, out.display());
        }
        Command::AssignLabels { out, images } => {
            let AnyNet::Reference(mut r) = ctx.load_any()? else {
                return Err(Error::Config("assign-labels needs a full-precision (SNNF) network".into()));
            };
            let n = if images > 0 { images } else { cfg.label_images };
            let ds = ctx.dataset(Split::Train, n)?;
            let map = timed("assign-labels", || {
                assign_labels(
                    &r.network,
                    &cfg.model_params(),
                    &cfg.encoder_config(),
                    cfg.n_steps,
                    &ds.images(),
                    &ds.labels,
                    10,
                )
            })?;
            let mut per_class = [0usize; 10];
            for &l in map.labels() {
                per_class[l as usize] += 1;
            }
            let silent = map.flagged().iter().filter(|&&f| f).count();
            r.labels = Some(map);
            save_ref_network(&out, &r)?;
            let mut t = Table::new(["class", "neurons"]);
            for (c, k) in per_class.iter().enumerate() {
                t.push(vec![c.into(), (*k).into()]);
            }
            ctx.emit(&t)?;
            println!("silent neurons: {silent}");
        }
        Command::Quantize { out } => {
            let AnyNet::Reference(r) = ctx.load_any()? else {
                return Err(Error::Config("quantize needs a full-precision (SNNF) network".into()));
            };
            let f = ctx.export(&r)?;
            save_network(&out, &f)?;
            let l = &f.network.layers()[0];
            println!(
                "wrote {} ({}x{}, weights {}, membrane {}, shift {})",
                out.display(),
                l.n_neurons(),
                l.n_inputs(),
                l.weight_format(),
                l.membrane_format(),
                f.decay_shift
            );
        }
        Command::Infer { index } => {
            let f = ctx.load_quantized()?;
            let ds = IdxDataset::load(&data_dir(), Split::Test)?;
            if index >= ds.len() {
                return Err(Error::Config(format!("image index {index} outside 0..{}", ds.len())));
            }
            let ecfg = snnaccel::engine::EngineConfig { decay_shift: f.decay_shift, ..cfg.engine_config() };
            let r = Engine::new(&f.network, ecfg)?.infer(ds.image(index), &cfg.encoder_config())?;
            println!(
                "image {index}: predicted {} (true {}){}",
                r.label,
                ds.labels[index],
                if r.zero_confidence { " [no output spikes]" } else { "" }
            );
            let t_us = r.stats.classification_time(cfg.f_clk) * 1e6;
            println!(
                "active steps {}, inactive steps {}, clock cycles {}, time {:.3} us at {} MHz, overflow events {}",
                r.stats.active_steps,
                r.stats.inactive_steps,
                r.stats.clock_cycles,
                t_us,
                cfg.f_clk / 1e6,
                r.overflow.total()
            );
        }
        Command::BatchEval { images } => {
            let ds = ctx.dataset(Split::Test, images)?;
            let imgs = ds.images();
            let enc = cfg.encoder_config();
            let mut t = Table::new(["model", "images", "accuracy", "silent"]);
            let quantized = match ctx.load_any()? {
                AnyNet::Quantized(f) => f,
                AnyNet::Reference(r) => {
                    let map = r.labels.clone().ok_or_else(|| Error::Config("network has no labels".into()))?;
                    let e = timed("reference eval", || {
                        eval_reference(&r.network, &map, &cfg.model_params(), &enc, cfg.n_steps, &imgs, &ds.labels)
                    })?;
                    t.push(vec!["full_precision".into(), e.total().into(), (100.0 * e.accuracy()).into(), e.silent.into()]);
                    ctx.export(&r)?
                }
            };
            let ecfg = snnaccel::engine::EngineConfig { decay_shift: quantized.decay_shift, ..cfg.engine_config() };
            let e = timed("engine eval", || eval_engine(&quantized.network, &ecfg, &enc, &imgs, &ds.labels))?;
            t.push(vec!["engine".into(), e.total().into(), (100.0 * e.accuracy()).into(), e.silent.into()]);
            ctx.emit(&t)?;
        }
        Command::Stats { images } => {
            let f = ctx.load_quantized()?;
            let ds = ctx.dataset(Split::Test, images)?;
            let ecfg = snnaccel::engine::EngineConfig { decay_shift: f.decay_shift, ..cfg.engine_config() };
            let r = timed("stats", || activity_stats(&ds.images(), &cfg.encoder_config(), &f.network, &ecfg))?;
            println!("images {}, steps per image {}", r.n_images, cfg.n_steps);
            println!("active steps: mean {:.3} per image, fraction {}", r.mean_active_steps(), pct(r.active_step_fraction()));
            println!("steps with excitatory spikes: {}, with inhibitory spikes: {}", r.exc_active_steps, r.inh_active_steps);
            let mut t = Table::new(["kind", "value", "count"]);
            for (k, v) in &r.active_steps_histogram {
                t.push(vec!["active_steps_per_image".into(), (*k).into(), (*v).into()]);
            }
            for (k, v) in &r.exc_spike_histogram {
                t.push(vec!["exc_spikes_per_step".into(), (*k).into(), (*v).into()]);
            }
            for (k, v) in &r.inh_spike_histogram {
                t.push(vec!["inh_spikes_per_step".into(), (*k).into(), (*v).into()]);
            }
            if let Some(p) = &ctx.global.tsv {
                std::fs::write(p, t.to_tsv())?;
            }
        }
        Command::SweepParallelism { images, from, to } => {
            let f = ctx.load_quantized()?;
            let ds = ctx.dataset(Split::Test, images)?;
            let ecfg = snnaccel::engine::EngineConfig { decay_shift: f.decay_shift, ..cfg.engine_config() };
            let r = timed("sweep", || {
                overflow_sweep(&ds.images(), &f.network, &cfg.encoder_config(), &ecfg, from..=to)
            })?;
            let mut t = Table::new(["bits", "overflow_events", "images_with_overflow"]);
            let alt = r.alt_metric.clone().unwrap_or_default();
            for (i, &b) in r.axis.iter().enumerate() {
                t.push(vec![b.into(), r.metric[i].into(), alt.get(i).copied().unwrap_or(0.0).into()]);
            }
            ctx.emit(&t)?;
            match r.threshold {
                Some(b) => println!("minimal zero-overflow width: {b} bits"),
                None => println!("overflow at every width"),
            }
        }
        Command::SweepQuant { images, from, to } => {
            let AnyNet::Reference(r) = ctx.load_any()? else {
                return Err(Error::Config("sweep-quant needs a full-precision (SNNF) network".into()));
            };
            let map = r.labels.clone().ok_or_else(|| Error::Config("network has no labels".into()))?;
            let ds = ctx.dataset(Split::Test, images)?;
            let (s, _) = timed("sweep", || {
                quant_sweep(
                    &ds.images(),
                    &ds.labels,
                    &r.network,
                    &cfg.model_params(),
                    &map,
                    from..=to,
                    &cfg.engine_config(),
                    &cfg.encoder_config(),
                    1.5,
                )
            })?;
            let mut t = Table::new(["frac_bits", "accuracy"]);
            for (&b, &m) in s.axis.iter().zip(&s.metric) {
                t.push(vec![b.into(), m.into()]);
            }
            ctx.emit(&t)?;
            if let Some(b) = s.threshold {
                println!("plateau reached at {b} fractional bits");
            }
        }
        Command::Cycles { active, exc, inh, fclk } => {
            let steps = cfg.n_steps as u64;
            let f_clk = fclk.unwrap_or(cfg.f_clk);
            let m = CostModel::new(active, exc, inh, steps, f_clk)?;
            let cycles = cycle_count(&m);
            let t = classification_time(cycles, f_clk)?;
            println!("cycles: {cycles}");
            println!("classification time: {:.2} us at {} MHz", t * 1e6, f_clk / 1e6);
            let mut table = Table::new(["active_steps", "exc", "inh", "steps", "f_clk", "cycles", "seconds"]);
            table.push(vec![active.into(), exc.into(), inh.into(), steps.into(), f_clk.into(), cycles.into(), t.into()]);
            if let Some(p) = &ctx.global.tsv {
                std::fs::write(p, table.to_tsv())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

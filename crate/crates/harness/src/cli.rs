//! Command-line interface.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use ddfas_core::predictor::TrainMode;

use crate::config::{ExperimentConfig, ModeName};
use crate::error::{HarnessError, Result};
use crate::exec::executor;
use crate::formats;
use crate::pipeline::{self, FileFrames, Forecaster, GeneratedFrames, Row, Workdir};
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(
    name = "ddfas",
    version,
    about = "Delay-Doppler fluid-antenna CSI compression and forecasting experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for training; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Working directory holding all artifacts.
    #[arg(long, global = true, default_value = "ddfas-out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeName>,
    /// LoRA-only training (on) or full training (off).
    #[arg(long, global = true, value_enum)]
    pub lora: Option<Switch>,
    /// Replace the transformer forecasts with the true channel.
    #[arg(long, global = true)]
    pub perfect_csi: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the channel sequence into channels.ddch.
    Gen,
    /// Fit the PCA basis and compress every frame into basis.ddpb and codes.ddcd.
    FitCompress {
        /// Override the retained-energy threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Print the training-split reconstruction NMSE.
        #[arg(long)]
        check: bool,
    },
    /// Train one forecaster per horizon.
    Train {
        /// Restrict to these horizons (repeatable).
        #[arg(long)]
        horizon: Vec<usize>,
    },
    /// Evaluate forecasters and baselines into report.csv.
    Eval,
    /// Run every stage from simulation to report.csv without storing the channel file.
    Report,
}

impl Cli {
    /// File configuration with command-line overrides applied, validated.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.channel.mode = m;
        }
        if let Some(l) = self.lora {
            cfg.train.lora = l == Switch::On;
        }
        if let Command::FitCompress { threshold: Some(t), .. } = self.command {
            cfg.compression.threshold = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    let work = Workdir::new(&cli.out);
    work.create()?;
    match &cli.command {
        Command::Gen => gen(&cfg, &work),
        Command::FitCompress { check, .. } => {
            let source = FileFrames::open(&work.channels())?;
            fit_compress(&cfg, &work, &source, *check)
        }
        Command::Train { horizon } => {
            let horizons = if horizon.is_empty() {
                cfg.eval.horizons.clone()
            } else {
                horizon.clone()
            };
            train(&cfg, &work, &horizons, cli.threads)
        }
        Command::Eval => eval(&cfg, &work, cli.perfect_csi),
        Command::Report => {
            let source = GeneratedFrames::new(&cfg)?;
            fit_compress(&cfg, &work, &source, false)?;
            train(&cfg, &work, &cfg.eval.horizons, cli.threads)?;
            eval(&cfg, &work, cli.perfect_csi)
        }
    }
}

fn gen(cfg: &ExperimentConfig, work: &Workdir) -> Result<()> {
    let s = pipeline::generate(cfg, &work.channels())?;
    println!(
        "frames {} shape {}x{}x{}x{} (ports x tx x doppler x delay)",
        s.n_frames, s.shape.n_ports, s.shape.n_tx, s.shape.n_doppler, s.shape.n_delay
    );
    println!(
        "frame energy mean {} min {} max {}",
        s.mean_energy, s.min_energy, s.max_energy
    );
    println!("wrote {}", work.channels().display());
    Ok(())
}

fn fit_compress(cfg: &ExperimentConfig, work: &Workdir, source: &dyn pipeline::FrameSource, check: bool) -> Result<()> {
    let c = pipeline::compress_frames(source, cfg)?;
    let raw = c.basis.n_tx() * c.basis.n_bins();
    println!("reference port {}", c.codes.ref_port);
    println!("r_s {} r_d {}", c.basis.r_s(), c.basis.r_d());
    println!(
        "retained energy spatial {} delay-doppler {}",
        c.basis.retained_ratio_s(),
        c.basis.retained_ratio_d()
    );
    println!("code size {} of {} raw coefficients", c.basis.code_len(), raw);
    if check {
        println!("training reconstruction nmse_db {}", c.train_recon_nmse_db);
    }
    formats::write_basis(&work.basis(), &c.basis)?;
    formats::write_codes(&work.codes(), &c.codes)?;
    Ok(())
}

fn train(cfg: &ExperimentConfig, work: &Workdir, horizons: &[usize], threads: usize) -> Result<()> {
    let codes = formats::read_codes(&work.codes())?;
    let exec = executor(threads)?;
    let mode = cfg.train_mode();
    for &m in horizons {
        if m == 0 {
            return Err(HarnessError::Config("field `horizon`: must be >= 1".into()));
        }
        let t = pipeline::train_forecaster(cfg, &codes, m, mode, exec.as_ref())?;
        formats::write_model(&work.model(mode, m), &t.file)?;
        let log = work.loss_log(mode, m);
        std::fs::write(&log, pipeline::loss_log(&t.history)).map_err(|e| HarnessError::io(&log, e))?;
        let last = t.history.epochs.last();
        println!(
            "horizon {m}: final train loss {} val loss {}",
            last.map_or(f64::NAN, |e| e.train_loss),
            t.history.final_val_loss().map_or(f64::NAN, |v| v)
        );
    }
    Ok(())
}

fn eval(cfg: &ExperimentConfig, work: &Workdir, perfect_csi: bool) -> Result<()> {
    let (basis, codes) = pipeline::load_compressed(work)?;
    let n_train = cfg.n_train().min(codes.codes.len());
    let truth = pipeline::true_references(cfg, &codes, &basis, n_train)?;
    let mode = cfg.train_mode();
    let other = match mode {
        TrainMode::LoraOnly => TrainMode::Full,
        TrainMode::Full => TrainMode::LoraOnly,
    };
    let mut rows: Vec<Row> = Vec::new();
    for &m in &cfg.eval.horizons {
        let main_name = format!("transformer_{}", pipeline::mode_tag(mode));
        let main = if perfect_csi {
            None
        } else {
            Some(formats::read_model(&work.model(mode, m))?)
        };
        let other_path = work.model(other, m);
        let extra = if other_path.exists() {
            Some(formats::read_model(&other_path)?)
        } else {
            None
        };
        let mut fs = Vec::new();
        match &main {
            Some(file) => fs.push(Forecaster::Model { name: main_name, file }),
            None => fs.push(Forecaster::Oracle { name: main_name }),
        }
        if let Some(file) = &extra {
            fs.push(Forecaster::Model {
                name: format!("transformer_{}", pipeline::mode_tag(other)),
                file,
            });
        }
        fs.extend([Forecaster::Persistence, Forecaster::Ar, Forecaster::Codec]);
        rows.extend(pipeline::evaluate_horizon(
            cfg, &codes, &basis, &truth, n_train, m, &fs,
        )?);
    }
    report::write_csv(&work.report(), &rows, &cfg.hash())?;
    println!("wrote {} rows to {}", rows.len(), work.report().display());
    Ok(())
}

//! The experiment stages: generation, compression, training and evaluation.

use std::path::{Path, PathBuf};

use ddfas_core::channel::{ChannelTensor, SequenceGenerator, TensorShape};
use ddfas_core::compression::{
    compress, extract_reference, fit_pca, reconstruct_ref, Code, PcaBasis, PortEnergy, RefMatrix,
};
use ddfas_core::metrics::{
    active_tap_capacity, beamformed_slice, db_to_linear, frame_capacity, nmse_db, nmse_db_complex,
    outage_from_capacities, rmse,
};
use ddfas_core::predictor::data::code_series;
use ddfas_core::predictor::{
    ar_fit, ar_predict, complexify, persistence_predict, predict_codes, train, Executor, MicroModel, Normalizer,
    TrainHistory, TrainMode, WindowSet,
};
use num_complex::Complex64;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::formats::{self, ChannelReader, ChannelWriter, CodeFile, ModelFile};

/// File names inside a working directory.
#[derive(Debug, Clone)]
pub struct Workdir {
    pub root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workdir { root: root.into() }
    }

    pub fn create(&self) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| HarnessError::io(&self.root, e))
    }

    pub fn channels(&self) -> PathBuf {
        self.root.join("channels.ddch")
    }

    pub fn basis(&self) -> PathBuf {
        self.root.join("basis.ddpb")
    }

    pub fn codes(&self) -> PathBuf {
        self.root.join("codes.ddcd")
    }

    pub fn model(&self, mode: TrainMode, horizon: usize) -> PathBuf {
        self.root.join(format!("model_{}_m{horizon}.ddmd", mode_tag(mode)))
    }

    pub fn loss_log(&self, mode: TrainMode, horizon: usize) -> PathBuf {
        self.root.join(format!("loss_{}_m{horizon}.csv", mode_tag(mode)))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.csv")
    }
}

pub fn mode_tag(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::LoraOnly => "lora",
        TrainMode::Full => "full",
    }
}

/// A replayable, in-order sequence of channel frames.
pub trait FrameSource {
    fn shape(&self) -> TensorShape;
    fn n_frames(&self) -> usize;
    /// Visits frames `0..limit` in order.
    fn visit(&self, limit: usize, f: &mut dyn FnMut(ChannelTensor) -> Result<()>) -> Result<()>;
}

/// Frames rendered on demand from the configured scatterer draw.
pub struct GeneratedFrames {
    pub generator: SequenceGenerator,
    pub n_frames: usize,
}

impl GeneratedFrames {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(GeneratedFrames {
            generator: SequenceGenerator::new(&cfg.sequence_params(), cfg.seed)?,
            n_frames: cfg.n_frames,
        })
    }
}

impl FrameSource for GeneratedFrames {
    fn shape(&self) -> TensorShape {
        let p = &self.generator.params;
        TensorShape::new(&p.geometry, &p.grid)
    }

    fn n_frames(&self) -> usize {
        self.n_frames
    }

    fn visit(&self, limit: usize, f: &mut dyn FnMut(ChannelTensor) -> Result<()>) -> Result<()> {
        for q in 0..limit.min(self.n_frames) {
            f(self.generator.frame(q)?)?;
        }
        Ok(())
    }
}

/// Frames streamed from a DDCH1 file.
pub struct FileFrames {
    path: PathBuf,
    shape: TensorShape,
    n_frames: usize,
}

impl FileFrames {
    pub fn open(path: &Path) -> Result<Self> {
        let r = ChannelReader::open(path)?;
        Ok(FileFrames {
            path: path.to_path_buf(),
            shape: r.shape,
            n_frames: r.n_frames,
        })
    }
}

impl FrameSource for FileFrames {
    fn shape(&self) -> TensorShape {
        self.shape
    }

    fn n_frames(&self) -> usize {
        self.n_frames
    }

    fn visit(&self, limit: usize, f: &mut dyn FnMut(ChannelTensor) -> Result<()>) -> Result<()> {
        let mut r = ChannelReader::open(&self.path)?;
        for _ in 0..limit.min(self.n_frames) {
            match r.next_frame()? {
                Some(frame) => f(frame)?,
                None => break,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub n_frames: usize,
    pub shape: TensorShape,
    pub mean_energy: f64,
    pub min_energy: f64,
    pub max_energy: f64,
}

/// Generates the configured sequence into a DDCH1 file.
pub fn generate(cfg: &ExperimentConfig, path: &Path) -> Result<GenSummary> {
    let source = GeneratedFrames::new(cfg)?;
    let shape = source.shape();
    let mut writer = ChannelWriter::create(path, shape, source.n_frames)?;
    let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, 0.0f64);
    source.visit(source.n_frames, &mut |frame| {
        let e = frame.energy();
        sum += e;
        min = min.min(e);
        max = max.max(e);
        writer.write_frame(&frame)
    })?;
    writer.finish()?;
    Ok(GenSummary {
        n_frames: source.n_frames,
        shape,
        mean_energy: sum / source.n_frames as f64,
        min_energy: min,
        max_energy: max,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    pub basis: PcaBasis,
    pub codes: CodeFile,
    pub n_train: usize,
    /// Aggregate reconstruction NMSE over the training references.
    pub train_recon_nmse_db: f64,
}

/// Selects the reference port on the training frames, fits the basis there
/// and compresses every frame. Reads the source twice.
pub fn compress_frames(source: &dyn FrameSource, cfg: &ExperimentConfig) -> Result<Compressed> {
    let n = source.n_frames();
    let n_train = cfg.n_train();
    if n_train == 0 || n_train > n {
        return Err(HarnessError::Config(format!(
            "field `compression.train_fraction`: {n} frames leave no training split"
        )));
    }
    let mut energy = PortEnergy::default();
    source.visit(n_train, &mut |frame| Ok(energy.add(&frame)?))?;
    let ref_port = energy.best()?;

    let mut refs: Vec<RefMatrix> = Vec::with_capacity(n);
    source.visit(n, &mut |frame| {
        refs.push(extract_reference(&frame, ref_port)?);
        Ok(())
    })?;
    if refs.len() != n {
        return Err(HarnessError::Config(format!(
            "expected {n} frames, read {}",
            refs.len()
        )));
    }
    let basis = fit_pca(&refs[..n_train], cfg.compression.threshold)?;
    let codes = refs
        .iter()
        .map(|r| compress(r, &basis))
        .collect::<ddfas_core::Result<Vec<Code>>>()?;

    let mut preds = Vec::with_capacity(n_train);
    for c in &codes[..n_train] {
        preds.push(reconstruct_ref(c, &basis)?.data.into_vec());
    }
    let truths: Vec<&[Complex64]> = refs[..n_train].iter().map(|r| r.data.as_slice()).collect();
    let preds: Vec<&[Complex64]> = preds.iter().map(|p| p.as_slice()).collect();
    let train_recon_nmse_db = nmse_db_complex(&preds, &truths)?;

    Ok(Compressed {
        codes: CodeFile {
            ref_port,
            r_s: basis.r_s(),
            r_d: basis.r_d(),
            codes,
        },
        basis,
        n_train,
        train_recon_nmse_db,
    })
}

/// Normaliser fitted on the training split of a code sequence.
pub fn fit_normalizer(codes: &CodeFile, n_train: usize) -> Result<Normalizer> {
    let series = code_series(&codes.codes[..n_train.min(codes.codes.len())]);
    Ok(Normalizer::fit(&series)?)
}

/// Training and validation windows: training windows lie inside the
/// training split, validation windows start at or after its end.
pub fn window_sets(series: &[Vec<f64>], past: usize, horizon: usize, n_train: usize) -> Result<(WindowSet, WindowSet)> {
    let train_set = WindowSet::within(series, past, horizon, 0..n_train)?;
    let val_set = WindowSet::within(series, past, horizon, n_train..series.len())?;
    Ok((train_set, val_set))
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub file: ModelFile,
    pub history: TrainHistory,
}

/// Trains one forecaster for `horizon` on the code sequence.
pub fn train_forecaster(
    cfg: &ExperimentConfig,
    codes: &CodeFile,
    horizon: usize,
    mode: TrainMode,
    exec: &dyn Executor,
) -> Result<Trained> {
    let n_train = cfg.n_train().min(codes.codes.len());
    let normalizer = fit_normalizer(codes, n_train)?;
    let series: Vec<Vec<f64>> = code_series(&codes.codes).iter().map(|r| normalizer.apply(r)).collect();
    let past = cfg.model.past;
    let (train_set, val_set) = window_sets(&series, past, horizon, n_train)?;
    if train_set.count == 0 {
        return Err(HarnessError::Config(format!(
            "{n_train} training frames are too few for a window of {past} past and {horizon} future frames"
        )));
    }
    let d_in = 2 * codes.r_s * codes.r_d;
    let mut model = MicroModel::new(cfg.model_config(d_in, horizon), cfg.seed)?;
    let mut tcfg = cfg.train_config();
    tcfg.mode = mode;
    let val = (val_set.count > 0).then_some(&val_set);
    let history = train(&mut model, &train_set, val, &tcfg, exec)?;
    Ok(Trained {
        file: ModelFile { model, normalizer },
        history,
    })
}

/// `epoch,loss` lines, one per epoch.
pub fn loss_log(history: &TrainHistory) -> String {
    history
        .epochs
        .iter()
        .map(|e| format!("{},{}\n", e.epoch, e.train_loss))
        .collect()
}

/// One report value.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub metric: String,
    pub horizon: usize,
    pub snr_db: Option<f64>,
    pub value: f64,
}

/// A forecaster evaluated in the report.
pub enum Forecaster<'a> {
    Model {
        name: String,
        file: &'a ModelFile,
    },
    /// Hands back the true future codes.
    Oracle {
        name: String,
    },
    Persistence,
    Ar,
    /// True codes, so only the compression loss remains.
    Codec,
}

impl Forecaster<'_> {
    pub fn name(&self) -> &str {
        match self {
            Forecaster::Model { name, .. } | Forecaster::Oracle { name } => name,
            Forecaster::Persistence => "persistence",
            Forecaster::Ar => "ar",
            Forecaster::Codec => "codec",
        }
    }
}

/// Evaluation windows of one horizon: starts `s >= n_train` with the whole
/// window inside the sequence.
pub fn eval_starts(n_frames: usize, n_train: usize, past: usize, horizon: usize) -> Vec<usize> {
    (n_train..n_frames)
        .take_while(|s| s + past + horizon <= n_frames)
        .collect()
}

/// True reference matrices of frames `from..to`, re-rendered from the
/// configuration. Fails when they disagree with the stored codes.
pub fn true_references(
    cfg: &ExperimentConfig,
    codes: &CodeFile,
    basis: &PcaBasis,
    from: usize,
) -> Result<Vec<RefMatrix>> {
    let source = GeneratedFrames::new(cfg)?;
    if source.n_frames != codes.codes.len() {
        return Err(HarnessError::Config(format!(
            "field `n_frames`: config has {} frames, code file has {}",
            source.n_frames,
            codes.codes.len()
        )));
    }
    let mut refs = Vec::new();
    for q in from..source.n_frames {
        let frame = source.generator.frame(q)?;
        refs.push(extract_reference(&frame, codes.ref_port)?);
    }
    if let Some(first) = refs.first() {
        let recoded = compress(first, basis)?;
        let stored = &codes.codes[from].matrix;
        let scale = stored
            .as_slice()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        if recoded.matrix.rows() != stored.rows()
            || recoded.matrix.cols() != stored.cols()
            || recoded.matrix.max_abs_diff(stored) > 1e-9 * scale
        {
            return Err(HarnessError::Config(
                "codes do not match the configured channel (seed or config differ)".into(),
            ));
        }
    }
    Ok(refs)
}

/// Predicted codes for every `(window, step)` pair, window-major.
#[allow(clippy::too_many_arguments)]
fn forecast(
    f: &Forecaster,
    codes: &CodeFile,
    series: &[Vec<f64>],
    n_train: usize,
    starts: &[usize],
    past: usize,
    horizon: usize,
    ar_order: usize,
    ar_ridge: f64,
) -> Result<Vec<Code>> {
    let (r_s, r_d) = (codes.r_s, codes.r_d);
    let to_codes = |rows: Vec<Vec<f64>>, first: usize| -> Result<Vec<Code>> {
        rows.iter()
            .enumerate()
            .map(|(k, r)| Ok(Code::from_vec(&complexify(r)?, r_s, r_d, first + k)?))
            .collect()
    };
    let ar = match f {
        Forecaster::Ar => Some(ar_fit(&series[..n_train], ar_order, ar_ridge)?),
        _ => None,
    };
    let mut out = Vec::with_capacity(starts.len() * horizon);
    for &s in starts {
        let hist = s..s + past;
        let first = s + past;
        match f {
            Forecaster::Model { file, .. } => {
                let c = &file.model.config;
                if c.horizon != horizon || c.past != past || c.d_in != 2 * r_s * r_d {
                    return Err(HarnessError::Config(format!(
                        "model {}x{} for horizon {} does not fit codes {r_s}x{r_d}, past {past}, horizon {horizon}",
                        c.d_in, c.past, c.horizon
                    )));
                }
                out.extend(predict_codes(&file.model, &file.normalizer, &codes.codes[hist])?);
            }
            Forecaster::Oracle { .. } | Forecaster::Codec => {
                out.extend_from_slice(&codes.codes[first..first + horizon]);
            }
            Forecaster::Persistence => out.extend(to_codes(persistence_predict(&series[hist], horizon)?, first)?),
            Forecaster::Ar => {
                let model = ar.as_ref().expect("fitted above");
                out.extend(to_codes(ar_predict(model, &series[hist], horizon)?, first)?);
            }
        }
    }
    Ok(out)
}

/// Per-frame beamformed capacities at every configured SNR.
fn capacities(slices: &[Vec<Complex64>], snr_db: &[f64]) -> Result<Vec<Vec<f64>>> {
    snr_db
        .iter()
        .map(|&s| {
            let rho = db_to_linear(s);
            slices.iter().map(|h| Ok(frame_capacity(h, rho)?)).collect()
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn link_rows(
    rows: &mut Vec<Row>,
    name: &str,
    horizon: usize,
    cfg: &ExperimentConfig,
    slices: &[Vec<Complex64>],
    caps: &[Vec<f64>],
    true_caps: &[Vec<f64>],
) -> Result<()> {
    let e = &cfg.eval;
    for (k, &snr) in e.snr_db.iter().enumerate() {
        let rho = db_to_linear(snr);
        let row = |metric: String, value: f64| Row {
            metric,
            horizon,
            snr_db: Some(snr),
            value,
        };
        let c = mean(&caps[k]);
        rows.push(row(format!("{name}.ergodic_capacity"), c));
        rows.push(row(format!("{name}.capacity_gap"), mean(&true_caps[k]) - c));
        let active = slices
            .iter()
            .map(|h| Ok(active_tap_capacity(h, rho, e.active_energy)?))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row(format!("{name}.active_tap_capacity"), mean(&active)));
        for &r0 in &e.target_rates {
            rows.push(row(
                format!("{name}.outage_predicted@{r0}"),
                outage_from_capacities(&caps[k], r0)?,
            ));
            let failed = caps[k]
                .iter()
                .zip(&true_caps[k])
                .filter(|(p, t)| **p >= r0 && **t < r0)
                .count();
            rows.push(row(
                format!("{name}.outage_scheduled_fail@{r0}"),
                failed as f64 / caps[k].len() as f64,
            ));
        }
    }
    Ok(())
}

/// Report rows of one horizon for the true channel and every forecaster,
/// all over the same evaluation windows.
pub fn evaluate_horizon(
    cfg: &ExperimentConfig,
    codes: &CodeFile,
    basis: &PcaBasis,
    truth: &[RefMatrix],
    truth_from: usize,
    horizon: usize,
    forecasters: &[Forecaster],
) -> Result<Vec<Row>> {
    if codes.r_s != basis.r_s() || codes.r_d != basis.r_d() {
        return Err(HarnessError::Config(format!(
            "codes are {}x{} but the basis has ranks {}x{}",
            codes.r_s,
            codes.r_d,
            basis.r_s(),
            basis.r_d()
        )));
    }
    let n_frames = codes.codes.len();
    let n_train = cfg.n_train().min(n_frames);
    let past = cfg.model.past;
    let starts = eval_starts(n_frames, n_train, past, horizon);
    if starts.is_empty() {
        return Err(HarnessError::Config(format!(
            "no evaluation window of {past}+{horizon} frames fits after frame {n_train}"
        )));
    }
    let series = code_series(&codes.codes);
    let targets: Vec<usize> = starts.iter().flat_map(|&s| s + past..s + past + horizon).collect();
    let true_refs: Vec<&RefMatrix> = targets.iter().map(|&q| &truth[q - truth_from]).collect();
    let true_slices: Vec<Vec<Complex64>> = true_refs.iter().map(|r| beamformed_slice(r)).collect();
    let true_caps = capacities(&true_slices, &cfg.eval.snr_db)?;
    let true_series: Vec<&Vec<f64>> = targets.iter().map(|&q| &series[q]).collect();

    let mut rows = Vec::new();
    link_rows(&mut rows, "actual", horizon, cfg, &true_slices, &true_caps, &true_caps)?;
    for f in forecasters {
        let name = f.name();
        let pred = forecast(
            f,
            codes,
            &series,
            n_train,
            &starts,
            past,
            horizon,
            cfg.eval.ar_order,
            cfg.eval.ar_ridge,
        )?;
        let pred_series: Vec<Vec<f64>> = code_series(&pred);
        let pred_refs = pred
            .iter()
            .map(|c| reconstruct_ref(c, basis))
            .collect::<ddfas_core::Result<Vec<_>>>()?;
        let pred_slices: Vec<Vec<Complex64>> = match f {
            Forecaster::Oracle { .. } => true_slices.clone(),
            _ => pred_refs.iter().map(beamformed_slice).collect(),
        };
        let channel_nmse = match f {
            Forecaster::Oracle { .. } => ddfas_core::metrics::NMSE_FLOOR_DB,
            _ => {
                let p: Vec<&[Complex64]> = pred_refs.iter().map(|r| r.data.as_slice()).collect();
                let t: Vec<&[Complex64]> = true_refs.iter().map(|r| r.data.as_slice()).collect();
                nmse_db_complex(&p, &t)?
            }
        };
        let truth_rows: Vec<&[f64]> = true_series.iter().map(|r| r.as_slice()).collect();
        let pred_rows: Vec<&[f64]> = pred_series.iter().map(|r| r.as_slice()).collect();
        let plain = |metric: &str, value: f64| Row {
            metric: format!("{name}.{metric}"),
            horizon,
            snr_db: None,
            value,
        };
        rows.push(plain("code_nmse_db", nmse_db(&pred_rows, &truth_rows)?));
        rows.push(plain("code_rmse", rmse(&pred_rows, &truth_rows)?));
        rows.push(plain("channel_nmse_db", channel_nmse));
        let caps = capacities(&pred_slices, &cfg.eval.snr_db)?;
        link_rows(&mut rows, name, horizon, cfg, &pred_slices, &caps, &true_caps)?;
    }
    Ok(rows)
}

/// Loads the compressed sequence written by the compression stage.
pub fn load_compressed(work: &Workdir) -> Result<(PcaBasis, CodeFile)> {
    Ok((formats::read_basis(&work.basis())?, formats::read_codes(&work.codes())?))
}

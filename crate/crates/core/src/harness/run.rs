//! The four stages behind the command line: dataset generation, training,
//! evaluation and report files. Every stage reads and writes under one
//! output directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Estimator, EvalRecords, RunConfig};
use super::dataset::{file_path, DatasetHeader, DatasetReader, DatasetWriter, Record};
use super::link::{true_noise_variance, Link};
use super::metrics::{write_csv, MetricsRow, PointAccumulator};
use super::seed::{mix, run_seed, Purpose};
use crate::chanest::channel_mse;
use crate::error::{Error, Result};
use crate::grid::ResourceGrid;
use crate::nn::train::stratified_split;
use crate::nn::{build_model, fit, grid_to_tensor, tensor_to_grid, ArchConfig, Checkpoint, Mode, Model, Tensor, TrainReport, TrainSample};
use crate::transport::block_error;

/// Records scored together by the network.
const EVAL_CHUNK: usize = 16;

/// File layout under the output directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.cvxm")
    }
    pub fn train_loss(&self) -> PathBuf {
        self.root.join("train_loss.csv")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn channel_mse(&self) -> PathBuf {
        self.root.join("channel_mse.csv")
    }
    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
    pub fn metadata(&self, stage: &str) -> PathBuf {
        self.root.join(format!("{stage}_metadata.txt"))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run metadata: the full configuration followed by every modelling
/// choice the configuration does not name.
pub fn metadata_text(stage: &str, cfg: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!("# cv2x-sim run metadata\nstage={stage}\n");
    s.push_str(&cfg.to_text());
    let fixed = [
        ("grid", "48 PRB x 12 subcarriers x 14 symbols, DMRS on symbols 2,5,8,11".to_string()),
        ("modem", "1024-point FFT at 15.36 Msps, CP 80/72 samples, unitary DFT spreading of data symbols".into()),
        ("dmrs", "Zadoff-Chu length 571 cyclically extended to 576, fixed root and cyclic shift, no hopping".into()),
        ("snr_definition", "per resource element: unit symbol power per occupied subcarrier over noise variance per subcarrier".into()),
        ("fading", "sum of 32 sinusoids per tap, independent per antenna and subframe, gains linearly interpolated every 8 samples".into()),
        ("h_perf", "channel frequency response at each symbol's FFT-window midpoint".into()),
        ("h_noisy", "raw LS on DMRS, linear interpolation in time, edge symbols hold the nearest DMRS value".into()),
        ("ls_estimator", "LS on DMRS, centered window average with edge truncation, then time interpolation".into()),
        ("noise_estimate", "mean squared residual of raw LS against the window average, scaled by n/(n-1)".into()),
        ("perfect_noise_variance", "true value from the SNR".into()),
        ("llr_scaling", "per-symbol mean equalizer gain predicted by the estimate divided out before demapping".into()),
        ("evm_reference", "mrc-normalized equalizer output on data symbols after de-spreading, against transmitted QPSK symbols".into()),
        ("channel_coding", "CRC-24A, tail-biting convolutional code K=7 (133,171,165), circular-buffer rate matching, 10-column time interleaver".into()),
        ("qpsk", "Gray, bit 0 -> +1/sqrt(2) on I (first bit) and Q (second bit)".into()),
        ("nn_architecture", "conv 16@9x3, 8@5x3, 4@5x3, 2@3x3, each with batch norm; ReLU after the first three; position-wise dense 2->2".into()),
        ("nn_samples", "one sample per receive antenna, input h_noisy, target h_perf".into()),
        ("train_split_unit", "subframes, stratified per (speed, snr)".into()),
        ("parallelism", "single-threaded, bitwise deterministic".into()),
        ("dataset_format_version", super::dataset::VERSION.to_string()),
        ("checkpoint_format_version", crate::nn::checkpoint::VERSION.to_string()),
    ];
    for (k, v) in fixed.iter().chain(extra.iter().map(|(k, v)| (*k, v.clone())).collect::<Vec<_>>().iter()) {
        writeln!(s, "{k}={v}").unwrap();
    }
    s
}

/// Summary of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub files: Vec<PathBuf>,
    pub records: usize,
}

/// Writes one dataset file per (speed, SNR) point.
pub fn generate_dataset(cfg: &RunConfig, paths: &RunPaths) -> Result<GenSummary> {
    let link = Link::new(cfg)?;
    let dir = paths.dataset_dir();
    create_dir(&dir)?;
    let mut files = Vec::new();
    for &speed in &cfg.speeds_kmph {
        for &snr in &cfg.snr_db {
            let path = file_path(&dir, speed, snr);
            let header = DatasetHeader {
                n_rx: cfg.n_rx,
                payload_bits: cfg.tbs,
                speed_kmph: speed,
                snr_db: snr,
                n_records: cfg.n_subframes,
            };
            let mut w = DatasetWriter::create(&path, header)?;
            for sf in 0..cfg.n_subframes {
                w.write(&link.simulate(cfg.seed, speed, snr, sf)?)?;
            }
            w.finish()?;
            files.push(path);
        }
    }
    let records = files.len() * cfg.n_subframes;
    write_file(
        &paths.metadata("gen"),
        &metadata_text("gen", cfg, &[("records", records.to_string()), ("files", files.len().to_string())]),
    )?;
    Ok(GenSummary { files, records })
}

/// Training subframes of every (speed, SNR) point, in point order. Each
/// point's split depends only on its own speed and SNR.
pub fn training_subframes(cfg: &RunConfig) -> Vec<BTreeSet<usize>> {
    let strata: Vec<(u64, usize)> = points(cfg)
        .into_iter()
        .map(|(v, s)| (mix(&[v.to_bits(), s.to_bits()]), cfg.n_subframes))
        .collect();
    stratified_split(&strata, cfg.train_split, run_seed(cfg.seed, Purpose::Split))
        .into_iter()
        .map(|v| v.into_iter().collect())
        .collect()
}

fn points(cfg: &RunConfig) -> Vec<(f64, f64)> {
    cfg.speeds_kmph
        .iter()
        .flat_map(|&v| cfg.snr_db.iter().map(move |&s| (v, s)))
        .collect()
}

fn open_point(cfg: &RunConfig, dir: &Path, speed: f64, snr: f64) -> Result<DatasetReader> {
    let path = file_path(dir, speed, snr);
    let reader = DatasetReader::open(&path)?;
    let h = &reader.header;
    if h.n_rx != cfg.n_rx || h.payload_bits != cfg.tbs || h.n_records != cfg.n_subframes {
        return Err(Error::format(
            &path,
            format!(
                "dataset holds {} records of {} antennas and {} bits; config expects {}, {}, {}",
                h.n_records, h.n_rx, h.payload_bits, cfg.n_subframes, cfg.n_rx, cfg.tbs
            ),
        ));
    }
    Ok(reader)
}

/// Network samples (one per antenna) of the training subframes.
pub fn load_training_samples(cfg: &RunConfig, dir: &Path) -> Result<Vec<TrainSample<f32>>> {
    let split = training_subframes(cfg);
    let mut samples = Vec::new();
    for (p, (speed, snr)) in points(cfg).into_iter().enumerate() {
        for rec in open_point(cfg, dir, speed, snr)? {
            let rec = rec?;
            if !split[p].contains(&(rec.subframe as usize)) {
                continue;
            }
            for (hn, hp) in rec.h_noisy.iter().zip(&rec.h_perf) {
                samples.push(TrainSample { stratum: p as u64, input: grid_to_tensor(hn), target: grid_to_tensor(hp) });
            }
        }
    }
    Ok(samples)
}

/// Trains the network on the training split and writes the checkpoint
/// and per-epoch loss.
pub fn train_model(cfg: &RunConfig, paths: &RunPaths, on_epoch: impl FnMut(usize, f64)) -> Result<(Checkpoint, TrainReport)> {
    cfg.validate()?;
    let samples = load_training_samples(cfg, &paths.dataset_dir())?;
    let mut model = build_model::<f32>(&ArchConfig::default(), run_seed(cfg.seed, Purpose::Init))?;
    let train_cfg = cfg.train_config(run_seed(cfg.seed, Purpose::Shuffle));
    let report = fit(&mut model, &samples, &train_cfg, on_epoch)?;
    let ck = Checkpoint { model, train: train_cfg };
    ck.save(&paths.model())?;
    let mut loss = String::from("epoch,loss\n");
    for (e, l) in report.loss_history.iter().enumerate() {
        writeln!(loss, "{},{l}", e + 1).unwrap();
    }
    write_file(&paths.train_loss(), &loss)?;
    write_file(
        &paths.metadata("train"),
        &metadata_text(
            "train",
            cfg,
            &[
                ("train_samples", samples.len().to_string()),
                ("train_steps", report.steps.to_string()),
                ("parameters", ck.model.param_count().to_string()),
                ("init_seed", run_seed(cfg.seed, Purpose::Init).to_string()),
                ("shuffle_seed", ck.train.seed.to_string()),
            ],
        ),
    )?;
    Ok((ck, report))
}

/// Mean channel MSE against `h_perf` of each estimate at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMseRow {
    pub speed_kmph: f64,
    pub snr_db: f64,
    pub noisy: f64,
    pub ls: f64,
    /// `NaN` when no model was given.
    pub ann: f64,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub rows: Vec<MetricsRow>,
    pub channel_mse: Vec<ChannelMseRow>,
}

fn predict_batch(model: &mut Model<f32>, grids: &[&ResourceGrid]) -> Result<Vec<ResourceGrid>> {
    let inputs: Vec<Tensor<f32>> = grids.iter().map(|g| grid_to_tensor(g)).collect();
    let x = Tensor::stack(&inputs.iter().collect::<Vec<_>>())?;
    let y = model.forward(&x, Mode::Infer)?;
    (0..grids.len()).map(|i| tensor_to_grid(&y, i)).collect()
}

struct PointState {
    acc: Vec<PointAccumulator>,
    mse_noisy: f64,
    mse_ls: f64,
    mse_ann: f64,
    records: usize,
}

fn score_chunk(link: &Link, cfg: &RunConfig, chunk: &[Record], model: &mut Option<&mut Model<f32>>, st: &mut PointState) -> Result<()> {
    let predicted = match model {
        Some(m) => {
            let grids: Vec<&ResourceGrid> = chunk.iter().flat_map(|r| r.h_noisy.iter()).collect();
            Some(predict_batch(m, &grids)?)
        }
        None => None,
    };
    for (i, rec) in chunk.iter().enumerate() {
        let tx = link.data_symbols(&rec.payload)?;
        let (h_ls, nv_ls) = link.ls_estimate(&rec.rx)?;
        let h_ann = predicted.as_ref().map(|p| p[i * cfg.n_rx..(i + 1) * cfg.n_rx].to_vec());
        st.records += 1;
        st.mse_noisy += channel_mse(&rec.h_noisy, &rec.h_perf);
        st.mse_ls += channel_mse(&h_ls, &rec.h_perf);
        if let Some(h) = &h_ann {
            st.mse_ann += channel_mse(h, &rec.h_perf);
        }
        for (e, acc) in cfg.estimators.iter().zip(&mut st.acc) {
            let (h, nv) = match e {
                Estimator::Perfect => (&rec.h_perf, true_noise_variance(rec.snr_db)),
                Estimator::Ls => (&h_ls, nv_ls),
                Estimator::Ann => (h_ann.as_ref().expect("model checked"), nv_ls),
            };
            let out = link.receive(&rec.rx, h, nv)?;
            let err = block_error(&rec.payload, &out.decoded.payload, out.decoded.crc_ok);
            acc.add(err, &tx, &out.symbols, channel_mse(h, &rec.h_perf));
        }
    }
    Ok(())
}

/// Scores every selected estimator on the dataset and writes the metrics
/// and channel-MSE CSVs.
pub fn run_eval(cfg: &RunConfig, paths: &RunPaths, mut model: Option<&mut Model<f32>>) -> Result<EvalOutput> {
    cfg.validate()?;
    if cfg.estimators.contains(&Estimator::Ann) && model.is_none() {
        return Err(Error::InvalidArgument("estimator \"ann\" needs a trained model".into()));
    }
    let link = Link::new(cfg)?;
    let dir = paths.dataset_dir();
    let split = training_subframes(cfg);
    let mut rows = Vec::new();
    let mut mse_rows = Vec::new();
    for (p, (speed, snr)) in points(cfg).into_iter().enumerate() {
        let mut st = PointState {
            acc: vec![PointAccumulator::default(); cfg.estimators.len()],
            mse_noisy: 0.0,
            mse_ls: 0.0,
            mse_ann: 0.0,
            records: 0,
        };
        let mut chunk = Vec::with_capacity(EVAL_CHUNK);
        for rec in open_point(cfg, &dir, speed, snr)? {
            let rec = rec?;
            if cfg.eval_records == EvalRecords::Holdout && split[p].contains(&(rec.subframe as usize)) {
                continue;
            }
            chunk.push(rec);
            if chunk.len() == EVAL_CHUNK {
                score_chunk(&link, cfg, &chunk, &mut model, &mut st)?;
                chunk.clear();
            }
        }
        if !chunk.is_empty() {
            score_chunk(&link, cfg, &chunk, &mut model, &mut st)?;
        }
        for (e, acc) in cfg.estimators.iter().zip(&st.acc) {
            rows.push(acc.finish(speed, snr, e.name())?);
        }
        let n = st.records.max(1) as f64;
        mse_rows.push(ChannelMseRow {
            speed_kmph: speed,
            snr_db: snr,
            noisy: st.mse_noisy / n,
            ls: st.mse_ls / n,
            ann: if model.is_some() { st.mse_ann / n } else { f64::NAN },
            records: st.records,
        });
    }
    write_csv(&paths.metrics(), &rows)?;
    let mut text = String::from("speed_kmph,snr_db,noisy,ls,ann,records\n");
    for r in &mse_rows {
        writeln!(text, "{},{},{},{},{},{}", r.speed_kmph, r.snr_db, r.noisy, r.ls, r.ann, r.records).unwrap();
    }
    write_file(&paths.channel_mse(), &text)?;
    write_file(
        &paths.metadata("eval"),
        &metadata_text("eval", cfg, &[("rows", rows.len().to_string()), ("model", model.is_some().to_string())]),
    )?;
    Ok(EvalOutput { rows, channel_mse: mse_rows })
}

/// One file per (speed, estimator) curve with SNR, BLER, EVM and MSE columns.
pub fn write_report(rows: &[MetricsRow], dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut curves: Vec<(f64, &str)> = Vec::new();
    for r in rows {
        if !curves.iter().any(|&(v, e)| v == r.speed_kmph && e == r.estimator) {
            curves.push((r.speed_kmph, &r.estimator));
        }
    }
    let mut files = Vec::new();
    for (speed, est) in curves {
        let mut pts: Vec<&MetricsRow> = rows.iter().filter(|r| r.speed_kmph == speed && r.estimator == est).collect();
        pts.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        let mut text = String::from("snr_db,bler,evm_pct,mse,blocks\n");
        for r in pts {
            writeln!(text, "{},{},{},{},{}", r.snr_db, r.bler, r.evm_pct, r.mse, r.blocks).unwrap();
        }
        let path = dir.join(format!("speed{speed}_{est}.csv"));
        write_file(&path, &text)?;
        files.push(path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke() -> RunConfig {
        RunConfig::parse("speeds_kmph=0\nsnr_db=inf\nn_subframes=2\nestimators=perfect,ls\n").unwrap()
    }

    #[test]
    fn split_is_stratified() {
        let mut c = RunConfig::default();
        c.n_subframes = 100;
        let s = training_subframes(&c);
        assert_eq!(s.len(), 32);
        assert!(s.iter().all(|p| p.len() == 30));
        assert_ne!(s[0], s[1]);
        let mut sub = c.clone();
        sub.speeds_kmph = vec![400.0];
        sub.snr_db = vec![5.0];
        assert_eq!(training_subframes(&sub)[0], s[31]);
    }

    #[test]
    fn noiseless_smoke_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let paths = RunPaths::new(dir.path());
        let cfg = smoke();
        let g = generate_dataset(&cfg, &paths).unwrap();
        assert_eq!(g.records, 2);
        assert!(paths.metadata("gen").exists());
        let out = run_eval(&cfg, &paths, None).unwrap();
        assert_eq!(out.rows.len(), 2);
        for r in &out.rows {
            assert_eq!(r.bler, 0.0, "{r:?}");
            assert_eq!(r.blocks, 2);
        }
        assert!(out.rows[0].evm_pct < 0.1);
        let files = write_report(&out.rows, &paths.report_dir()).unwrap();
        assert_eq!(files.len(), 2);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert!(text.starts_with("snr_db,bler"));
    }

    #[test]
    fn ann_without_model_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = smoke();
        cfg.estimators = vec![Estimator::Ann];
        assert!(run_eval(&cfg, &RunPaths::new(dir.path()), None).is_err());
    }

    #[test]
    fn missing_dataset_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_eval(&smoke(), &RunPaths::new(dir.path()), None).unwrap_err();
        assert!(err.to_string().contains("speed0_snrinf.cvxd"), "{err}");
    }
}

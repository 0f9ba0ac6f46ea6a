//! What the `hgan` subcommands do, minus argument parsing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::data::{Dataset, LabeledBatch};
use crate::defense::{self, SweepRow};
use crate::error::{Error, Result};
use crate::eval::{self, Evaluator};
use crate::metrics::{EvalReport, EVAL_HEADER};
use crate::models::GeneratorNet;
use crate::rng;
use crate::tensor::Tensor;
use crate::training::{metrics_csv, StepMetrics, Trainer, Variant};

pub const CHECKPOINT_FILE: &str = "checkpoint.hgck";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const COMPARE_HEADER: &str = "variant,metric,median,min,max,seeds";

/// `YYYYMMDDTHHMMSS` in UTC.
pub fn timestamp(secs: u64) -> String {
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    // Days-to-civil conversion for the proleptic Gregorian calendar.
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!(
        "{year:04}{month:02}{day:02}T{:02}{:02}{:02}",
        rem / 3600,
        rem / 60 % 60,
        rem % 60
    )
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Creates `{variant}-{seed}-{timestamp}` under `out`, adding a numeric
/// suffix if that name is taken.
pub fn create_run_dir(out: &Path, variant: Variant, seed: u64) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let base = format!("{variant}-{seed}-{}", timestamp(now_secs()));
    let mut dir = out.join(&base);
    let mut k = 1;
    loop {
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                k += 1;
                dir = out.join(format!("{base}-{k}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}

pub struct TrainOutput {
    pub dir: PathBuf,
    pub checkpoint: Checkpoint,
    pub metrics: Vec<StepMetrics>,
}

/// Trains and writes the config echo, metric log and checkpoint.
pub fn train(config: &ExperimentConfig, out: &Path) -> Result<TrainOutput> {
    config.validate()?;
    let mut trainer = Trainer::new(config.training.clone())?;
    let metrics = trainer.run()?;
    let checkpoint = Checkpoint::from_trainer(&trainer, config);
    let dir = create_run_dir(out, config.training.variant, config.training.seed)?;
    write_file(&dir.join(CONFIG_FILE), &config.serialize())?;
    write_file(&dir.join(METRICS_FILE), &metrics_csv(&metrics))?;
    checkpoint.save(dir.join(CHECKPOINT_FILE))?;
    Ok(TrainOutput { dir, checkpoint, metrics })
}

pub fn eval_csv(rows: &[(Variant, u64, EvalReport)]) -> String {
    let mut s = format!("{EVAL_HEADER}\n");
    for (v, seed, r) in rows {
        s.push_str(&r.csv_row(v.as_str(), *seed));
        s.push('\n');
    }
    s
}

/// Scores a checkpoint's generator with `config.evaluation` settings.
pub fn evaluate(checkpoint: &Checkpoint, config: &ExperimentConfig, seed: u64) -> Result<EvalReport> {
    let dataset = checkpoint.config.training.dataset.build()?;
    let evaluator = Evaluator::new(dataset, config.evaluation.clone(), seed)?;
    evaluator.evaluate(&checkpoint.nets.generator, seed)
}

/// Continuous samples as CSV, one row per draw.
pub fn samples_csv(samples: Option<&Tensor>, dim: usize) -> String {
    let header: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    let mut s = header.join(",");
    s.push('\n');
    if let Some(t) = samples {
        for r in 0..t.rows() {
            let row: Vec<String> = t.row(r).iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
    }
    s
}

/// Square canvases tiled row-major into a `ceil(√n) × ceil(√n)` grid of
/// cells, as binary PGM with maxval 255. Unused cells are black.
pub fn samples_pgm(samples: Option<&Tensor>, side: usize) -> Vec<u8> {
    let n = samples.map_or(0, |t| t.rows());
    let grid = (n as f64).sqrt().ceil() as usize;
    let width = grid * side;
    let mut pixels = vec![0u8; width * width];
    if let Some(t) = samples {
        for k in 0..n {
            let (gy, gx) = (k / grid, k % grid);
            for (p, v) in t.row(k).iter().enumerate() {
                let (y, x) = (gy * side + p / side, gx * side + p % side);
                pixels[y * width + x] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
    }
    let mut out = format!("P5\n{width} {width}\n255\n").into_bytes();
    out.extend(pixels);
    out
}

/// The first `n` draws of the sampling stream, unfiltered.
pub fn draw_samples(generator: &GeneratorNet, n: usize, seed: u64) -> Result<Option<Tensor>> {
    if n == 0 {
        return Ok(None);
    }
    Ok(Some(eval::generator_samples(generator, n, seed)?))
}

/// Writes `n` samples to `path`: CSV for continuous data, PGM for images.
pub fn sample(checkpoint: &Checkpoint, n: usize, seed: u64, path: &Path) -> Result<()> {
    let dataset = checkpoint.config.training.dataset.build()?;
    let samples = draw_samples(&checkpoint.nets.generator, n, seed)?;
    match &dataset {
        Dataset::Patterns(p) => {
            fs::File::create(path)?.write_all(&samples_pgm(samples.as_ref(), p.canvas_side()))?;
        }
        Dataset::Mixture(_) => write_file(path, &samples_csv(samples.as_ref(), dataset.dim()))?,
    }
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub variant: Variant,
    pub metric: &'static str,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub seeds: usize,
}

/// Median, min and max of every report field per variant.
pub fn aggregate(rows: &[(Variant, u64, EvalReport)]) -> Vec<CompareRow> {
    let fields: [(&str, fn(&EvalReport) -> f64); 7] = [
        ("kl", |r| r.kl_divergence),
        ("chi2", |r| r.chi_square),
        ("modes_covered", |r| r.modes_covered as f64),
        ("mode_score", |r| r.surrogate_mode_score),
        ("frechet", |r| r.surrogate_frechet),
        ("n", |r| r.sample_count as f64),
        ("clf_acc", |r| r.classifier_accuracy),
    ];
    let mut out = Vec::new();
    let mut variants: Vec<Variant> = Vec::new();
    for (v, _, _) in rows {
        if !variants.contains(v) {
            variants.push(*v);
        }
    }
    for v in variants {
        let reports: Vec<&EvalReport> = rows.iter().filter(|(w, _, _)| *w == v).map(|(_, _, r)| r).collect();
        for (name, get) in fields {
            let mut vals: Vec<f64> = reports.iter().map(|r| get(r)).collect();
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.push(CompareRow {
                variant: v,
                metric: name,
                median: median(&mut vals),
                min,
                max,
                seeds: reports.len(),
            });
        }
    }
    out
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = format!("{COMPARE_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:?},{:?},{:?},{}\n",
            r.variant, r.metric, r.median, r.min, r.max, r.seeds
        ));
    }
    s
}

pub struct CompareOutput {
    pub runs: Vec<(Variant, u64, EvalReport)>,
    pub summary: Vec<CompareRow>,
}

/// Trains and evaluates every `(variant, seed)` pair, then aggregates.
/// Each run gets its own run directory under `out`.
pub fn compare(config: &ExperimentConfig, variants: &[Variant], seeds: &[u64], out: &Path) -> Result<CompareOutput> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidSpec("compare needs at least one variant and one seed".into()));
    }
    let dataset = config.training.dataset.build()?;
    let evaluator = Evaluator::new(dataset, config.evaluation.clone(), config.training.seed)?;
    let mut runs = Vec::new();
    for &v in variants {
        for &seed in seeds {
            let mut cfg = config.clone();
            cfg.training.variant = v;
            cfg.training.seed = seed;
            let t = train(&cfg, out)?;
            let report = evaluator.evaluate(&t.checkpoint.nets.generator, seed)?;
            write_file(&t.dir.join("eval.csv"), &eval_csv(&[(v, seed, report.clone())]))?;
            runs.push((v, seed, report));
        }
    }
    let summary = aggregate(&runs);
    fs::create_dir_all(out)?;
    write_file(&out.join("compare_runs.csv"), &eval_csv(&runs))?;
    write_file(&out.join("compare.csv"), &compare_csv(&summary))?;
    Ok(CompareOutput { runs, summary })
}

/// Held-out test set for the defense sweep.
pub fn defense_test_set(dataset: &Dataset, n: usize, seed: u64) -> LabeledBatch {
    dataset.sample_with(n, &mut rng::stream(seed, "defense-test"))
}

/// Attacks a freshly trained classifier and sweeps the projection grid
/// through the checkpoint's generator.
pub fn defend(checkpoint: &Checkpoint, config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let dataset = checkpoint.config.training.dataset.build()?;
    let seed = checkpoint.config.training.seed;
    let evaluator = Evaluator::new(dataset.clone(), config.evaluation.clone(), seed)?;
    let test = defense_test_set(&dataset, config.defense.test_samples, seed);
    let d = &config.defense;
    defense::defense_sweep(
        &evaluator.classifier,
        &checkpoint.nets.generator,
        &test,
        &d.iterations_grid,
        &d.restarts_grid,
        &d.attack,
        &d.seeds,
        d.projection.learning_rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(timestamp(0), "19700101T000000");
        assert_eq!(timestamp(951_782_400), "20000229T000000");
        assert_eq!(timestamp(1_700_000_000), "20231114T221320");
    }

    #[test]
    fn pgm_layout() {
        let t = Tensor::full(&[5, 4], 1.0);
        let pgm = samples_pgm(Some(&t), 2);
        let header = b"P5\n6 6\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 36);
        let px = &pgm[header.len()..];
        // Cells 0..5 are white, the last of the 3×3 grid stays black.
        assert_eq!(px[0], 255);
        assert_eq!(px[5 * 6 + 5], 0);
        assert_eq!(px[3 * 6 + 2], 255);
        assert_eq!(samples_pgm(None, 4), b"P5\n0 0\n255\n".to_vec());
    }

    #[test]
    fn empty_csv_dump_is_header_only() {
        assert_eq!(samples_csv(None, 2), "x0,x1\n");
    }

    #[test]
    fn aggregate_single_run_reduces_to_report() {
        let r = EvalReport {
            kl_divergence: 0.5,
            chi_square: 3.0,
            modes_covered: 7,
            surrogate_mode_score: 6.0,
            surrogate_frechet: 0.1,
            sample_count: 100,
            classifier_accuracy: 0.9,
        };
        let rows = aggregate(&[(Variant::Gan, 0, r)]);
        assert_eq!(rows.len(), 7);
        for row in rows {
            assert_eq!(row.median, row.min);
            assert_eq!(row.max, row.min);
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

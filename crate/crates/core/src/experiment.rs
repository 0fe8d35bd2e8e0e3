//! End-to-end benchmark pipeline.
//!
//! One call generates the synthetic chain, splits it at the cutoff,
//! fits normalization on the training side, trains the four neural
//! models, prices the test windows with the two analytic references,
//! and writes the full report directory: dataset, loss curves,
//! checkpoints, the comparison table, per-model predicted-vs-actual
//! series (first 240 rows) with SVG charts, and a hashed manifest.
//! Every artifact except the manifest's timings is a pure function of
//! (config, seed).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::config::BenchConfig;
use crate::data::{self, generate_synthetic, split_by_cutoff, DataError, WindowedSample};
use crate::manifest::RunManifest;
use crate::models::{Checkpoint, ModelError, ModelKind, NeuralModel};
use crate::pricing::{self, MarketParams, PricingError};
use crate::svg;
use crate::train::{self, MetricsReport, MetricsRow, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report error: {0}")]
    Report(String),
}

/// Rows recorded in each predicted-vs-actual series.
pub const PREDICTION_ROWS: usize = 240;

/// Summary of one benchmark run.
pub struct BenchOutcome {
    pub report: MetricsReport,
    pub out_dir: PathBuf,
    pub train_observations: usize,
    pub test_observations: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    pub elapsed_seconds: f64,
}

fn stage<T>(
    manifest: &mut RunManifest,
    out_dir: &Path,
    name: &str,
    f: impl FnOnce() -> Result<T, ExperimentError>,
) -> Result<T, ExperimentError> {
    let start = Instant::now();
    match f() {
        Ok(v) => {
            manifest.record_timing(name, start.elapsed().as_secs_f64());
            Ok(v)
        }
        Err(e) => {
            manifest.status = format!("aborted at stage {name}: {e}");
            let _ = manifest.save(&out_dir.join("manifest.json"));
            Err(e)
        }
    }
}

/// Analytic reference prices on the final observation of each test
/// window. The no-dividend model ignores the dividend feature; the
/// dividend model converts the stored monthly rate to an annual yield.
pub fn analytic_predictions(
    kind: ModelKind,
    samples: &[WindowedSample],
    dividend_monthly_factor: f64,
) -> Result<Vec<f64>, PricingError> {
    samples
        .iter()
        .map(|s| {
            let q = &s.final_quote;
            let params = MarketParams {
                spot: q.spot,
                strike: q.strike,
                rate: q.rf_rate,
                dividend_yield: q.div_rate * dividend_monthly_factor,
                volatility: q.garch_vol,
                maturity: q.ttm_years,
            };
            match kind {
                ModelKind::Bs => pricing::price_bs(&params, q.kind),
                ModelKind::Bsm => pricing::price_bsm(&params, q.kind),
                other => panic!("{other:?} is not an analytic model"),
            }
        })
        .collect()
}

fn write_loss_curve(path: &Path, curve: &train::LossCurve) -> Result<(), ExperimentError> {
    let mut text = String::from("epoch,loss\n");
    for (i, loss) in curve.per_epoch.iter().enumerate() {
        text.push_str(&format!("{},{loss}\n", i + 1));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_predictions(
    path: &Path,
    samples: &[WindowedSample],
    predictions: &[f64],
) -> Result<(), ExperimentError> {
    let mut text = String::from("index,date,contract_id,actual,predicted\n");
    for (i, (s, p)) in samples
        .iter()
        .zip(predictions)
        .take(PREDICTION_ROWS)
        .enumerate()
    {
        text.push_str(&format!(
            "{i},{},{},{},{p}\n",
            s.date, s.contract_id, s.final_quote.target_price
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn render_chart(
    path: &Path,
    label: &str,
    samples: &[WindowedSample],
    predictions: &[f64],
) -> Result<(), ExperimentError> {
    let actual: Vec<f64> = samples
        .iter()
        .take(PREDICTION_ROWS)
        .map(|s| s.final_quote.target_price)
        .collect();
    let predicted: Vec<f64> = predictions.iter().take(PREDICTION_ROWS).copied().collect();
    std::fs::write(path, svg::line_chart(label, &actual, &predicted))?;
    Ok(())
}

/// Runs the whole experiment into `out_dir` (created if missing).
pub fn run_bench(
    cfg: &BenchConfig,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> Result<BenchOutcome, ExperimentError> {
    let total_start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new("bench", cfg.seed, out_dir);
    manifest.config = cfg.echo();
    manifest.config_path = config_path.map(|p| p.display().to_string());
    let mut artifacts: Vec<PathBuf> = Vec::new();

    // generate
    let quotes = stage(&mut manifest, out_dir, "generate", || {
        Ok(generate_synthetic(&cfg.gen, cfg.seed)?)
    })?;
    let dataset_path = out_dir.join("dataset.csv");
    stage(&mut manifest, out_dir, "write_dataset", || {
        data::save_csv(&dataset_path, &quotes)?;
        Ok(())
    })?;
    artifacts.push(dataset_path.clone());

    // split + normalize + window
    let (split, stats, train_windows, test_windows) =
        stage(&mut manifest, out_dir, "split_and_window", || {
            let split = split_by_cutoff(&quotes, cfg.cutoff);
            if split.train.is_empty() || split.test.is_empty() {
                return Err(ExperimentError::Report(format!(
                    "cutoff {} leaves an empty side (train {}, test {})",
                    cfg.cutoff,
                    split.train.len(),
                    split.test.len()
                )));
            }
            let stats = data::fit_norm(&split.train)?;
            let (train_w, train_report) = data::window(&split.train, &stats, cfg.model.window)?;
            let (test_w, test_report) = data::window(&split.test, &stats, cfg.model.window)?;
            if train_w.is_empty() || test_w.is_empty() {
                return Err(ExperimentError::Report(
                    "windowing produced an empty side".into(),
                ));
            }
            let _ = (train_report, test_report);
            Ok((split, stats, train_w, test_w))
        })?;

    manifest
        .config
        .insert("data.train_observations".into(), split.train.len().to_string());
    manifest
        .config
        .insert("data.test_observations".into(), split.test.len().to_string());
    manifest
        .config
        .insert("data.train_windows".into(), train_windows.len().to_string());
    manifest
        .config
        .insert("data.test_windows".into(), test_windows.len().to_string());

    let targets: Vec<f64> = test_windows
        .iter()
        .map(|s| s.final_quote.target_price)
        .collect();

    let mut report = MetricsReport {
        rows: Vec::new(),
        config_echo: manifest.config.clone(),
    };

    // every model in table order
    for kind in ModelKind::REPORT_ORDER {
        let slug = kind.slug();
        let predictions: Vec<f64> = if kind.is_trainable() {
            let train_cfg = cfg.train_config_for(kind);
            let (model, curve) =
                stage(&mut manifest, out_dir, &format!("train_{slug}"), || {
                    let model = NeuralModel::build(kind, &cfg.model, cfg.model_seed(kind))?;
                    let curve = train::train(&model, &train_windows, &train_cfg)?;
                    Ok((model, curve))
                })?;
            let loss_path = out_dir.join(format!("loss_{slug}.csv"));
            write_loss_curve(&loss_path, &curve)?;
            artifacts.push(loss_path);

            let ckpt_path = out_dir.join(format!("{slug}.ckpt.json"));
            let mut meta = BTreeMap::new();
            meta.insert("architecture".into(), model.describe());
            meta.insert("seed".into(), cfg.model_seed(kind).to_string());
            meta.insert("epochs".into(), train_cfg.epochs.to_string());
            Checkpoint::capture(&model, meta).save(&ckpt_path)?;
            artifacts.push(ckpt_path);

            stage(&mut manifest, out_dir, &format!("predict_{slug}"), || {
                let refs: Vec<&WindowedSample> = test_windows.iter().collect();
                let normalized = model.predict(&refs)?;
                Ok(normalized
                    .into_iter()
                    .map(|z| stats.denormalize_target(z))
                    .collect())
            })?
        } else {
            stage(&mut manifest, out_dir, &format!("price_{slug}"), || {
                Ok(analytic_predictions(
                    kind,
                    &test_windows,
                    cfg.gen.dividend_monthly_factor,
                )?)
            })?
        };

        let metrics = train::evaluate(&predictions, &targets)?;
        report.rows.push(MetricsRow {
            model: kind.label().into(),
            metrics,
        });

        let pred_path = out_dir.join(format!("pred_vs_actual_{slug}.csv"));
        write_predictions(&pred_path, &test_windows, &predictions)?;
        artifacts.push(pred_path);
        let chart_path = out_dir.join(format!("plot_{slug}.svg"));
        render_chart(&chart_path, kind.label(), &test_windows, &predictions)?;
        artifacts.push(chart_path);
    }

    let metrics_path = out_dir.join("metrics.csv");
    std::fs::write(&metrics_path, report.to_csv())?;
    artifacts.push(metrics_path);

    for artifact in &artifacts {
        manifest.record_artifact(out_dir, artifact)?;
    }
    let elapsed = total_start.elapsed().as_secs_f64();
    manifest.record_timing("total", elapsed);
    manifest.save(&out_dir.join("manifest.json"))?;

    Ok(BenchOutcome {
        report,
        out_dir: out_dir.to_path_buf(),
        train_observations: split.train.len(),
        test_observations: split.test.len(),
        train_windows: train_windows.len(),
        test_windows: test_windows.len(),
        elapsed_seconds: elapsed,
    })
}

/// Re-renders every SVG chart in a report directory from its
/// prediction CSV. Returns the chart paths written; because the charts
/// are pure functions of the CSVs, re-rendering an intact directory
/// changes nothing.
pub fn rerender_charts(dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut written = Vec::new();
    for kind in ModelKind::REPORT_ORDER {
        let slug = kind.slug();
        let pred_path = dir.join(format!("pred_vs_actual_{slug}.csv"));
        if !pred_path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&pred_path)?;
        let mut actual = Vec::new();
        let mut predicted = Vec::new();
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(ExperimentError::Report(format!(
                    "malformed prediction row in {}: '{line}'",
                    pred_path.display()
                )));
            }
            actual.push(cols[3].parse::<f64>().map_err(|e| {
                ExperimentError::Report(format!("bad actual value '{}': {e}", cols[3]))
            })?);
            predicted.push(cols[4].parse::<f64>().map_err(|e| {
                ExperimentError::Report(format!("bad predicted value '{}': {e}", cols[4]))
            })?);
        }
        let chart_path = dir.join(format!("plot_{slug}.svg"));
        std::fs::write(&chart_path, svg::line_chart(kind.label(), &actual, &predicted))?;
        written.push(chart_path);
    }
    if written.is_empty() {
        return Err(ExperimentError::Report(format!(
            "no prediction series found in {}",
            dir.display()
        )));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BenchConfig;
    use chrono::NaiveDate;

    /// Small configuration for fast pipeline tests.
    pub(crate) fn tiny_config() -> BenchConfig {
        let mut cfg = BenchConfig::default();
        cfg.gen.contracts = 8;
        cfg.gen.contract_days = 60;
        cfg.gen.end_date = NaiveDate::from_ymd_opt(2020, 8, 31).unwrap();
        cfg.cutoff = NaiveDate::from_ymd_opt(2020, 6, 30).unwrap();
        cfg.kan_epochs = 1;
        cfg.lstm_epochs = 1;
        cfg.model.kan_hidden = vec![2];
        cfg.model.conv_kan_filters = 1;
        cfg.model.conv_kan_head = vec![4];
        cfg.model.lstm_hidden = 2;
        cfg.model.conv_lstm_channels = 1;
        cfg.seed = 7;
        cfg
    }

    #[test]
    fn bench_produces_the_full_report_directory() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let outcome = run_bench(&cfg, dir.path(), None).unwrap();

        assert_eq!(outcome.report.rows.len(), 6);
        let labels: Vec<&str> = outcome
            .report
            .rows
            .iter()
            .map(|r| r.model.as_str())
            .collect();
        assert_eq!(
            labels,
            ["B-S", "B-S-M", "LSTM", "Conv-LSTM", "KANs", "Conv-KANs"]
        );
        for name in [
            "dataset.csv",
            "metrics.csv",
            "manifest.json",
            "loss_kan.csv",
            "kan.ckpt.json",
            "pred_vs_actual_bs.csv",
            "plot_conv_lstm.svg",
        ] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        let manifest = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(manifest.status, "completed");
        assert!(manifest.artifacts.len() >= 19);
        assert!(manifest.config.contains_key("model.window"));
    }

    #[test]
    fn rerendering_charts_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        run_bench(&cfg, dir.path(), None).unwrap();
        let before = crate::manifest::file_sha256(&dir.path().join("plot_kan.svg")).unwrap();
        rerender_charts(dir.path()).unwrap();
        let after = crate::manifest::file_sha256(&dir.path().join("plot_kan.svg")).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn aborted_runs_leave_a_manifest_with_the_stage_name() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        // Cutoff after the end date leaves the test side empty.
        cfg.cutoff = NaiveDate::from_ymd_opt(2021, 12, 31).unwrap();
        assert!(run_bench(&cfg, dir.path(), None).is_err());
        let manifest = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
        assert!(manifest.status.contains("aborted at stage split_and_window"));
        assert!(manifest.status.contains("empty side"));
    }
}

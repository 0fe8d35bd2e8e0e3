//! Command-line driver.
//!
//! Subcommands: `price`, `verify`, `gen-data`, `fit-garch`, `train`,
//! `bench`, `report`. Configuration comes from an optional flat
//! key-value file (`--config`) with `--set key=value` overrides; the
//! output root is `--out`, the `OPTIKAN_OUT` environment variable, or
//! `./optikan-out`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use optikan_core::config::{BenchConfig, FlatConfig};
use optikan_core::data;
use optikan_core::experiment::{self, run_bench};
use optikan_core::garch;
use optikan_core::manifest::RunManifest;
use optikan_core::models::{Checkpoint, ModelKind, NeuralModel};
use optikan_core::pricing::{self, MarketParams, OptionKind};
use optikan_core::train;
use optikan_core::verify;

#[derive(Parser)]
#[command(
    name = "optikan",
    about = "European option pricing lab: analytic pricers, KAN/Conv-KAN and LSTM/Conv-LSTM regressors, GARCH volatility, and a deterministic benchmark",
    version
)]
struct Cli {
    /// Master seed; overrides the config file's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Flat key-value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Config override, repeatable: --set train.kan_epochs=5
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output root (fallback: $OPTIKAN_OUT, then ./optikan-out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one European option with both closed forms.
    Price {
        #[arg(long)]
        spot: f64,
        #[arg(long)]
        strike: f64,
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        /// Continuous annual dividend yield.
        #[arg(long, default_value_t = 0.0)]
        dividend: f64,
        #[arg(long, default_value_t = 0.2)]
        vol: f64,
        /// Time to maturity in years.
        #[arg(long)]
        ttm: f64,
        #[arg(long, value_parser = parse_kind)]
        kind: OptionKind,
    },
    /// Run the pricing verification suites (parity grid, Monte-Carlo
    /// comparison, PDE residual); exits nonzero on any failure.
    Verify {
        /// Antithetic paths per Monte-Carlo grid point.
        #[arg(long, default_value_t = 1_000_000)]
        paths: usize,
        /// Random parameter points for the parity grid.
        #[arg(long, default_value_t = 1_000)]
        grid_points: usize,
        /// Run the payoff-surface negative control and require that it
        /// fails the residual check.
        #[arg(long)]
        negative_control: bool,
    },
    /// Generate the synthetic option chain configured by --config.
    GenData {
        /// Output CSV (default: <out>/dataset.csv).
        #[arg(long, value_name = "FILE")]
        out_file: Option<PathBuf>,
    },
    /// Fit GARCH(1,1) on a `date,return` CSV and emit the annualized
    /// volatility series.
    FitGarch {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Output CSV (default: <out>/garch_vol.csv).
        #[arg(long, value_name = "FILE")]
        out_file: Option<PathBuf>,
        #[arg(long, default_value_t = 252)]
        trading_days: usize,
    },
    /// Train one model on a dataset (generated if --data is omitted).
    Train {
        #[arg(long, value_parser = parse_trainable)]
        model: ModelKind,
        /// Quote CSV in the documented dialect.
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
    },
    /// Run the full six-model benchmark into the output directory.
    Bench,
    /// Re-render report charts from an existing directory and print
    /// its metrics table.
    Report {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<OptionKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "call" | "c" => Ok(OptionKind::Call),
        "put" | "p" => Ok(OptionKind::Put),
        other => Err(format!("unknown option kind '{other}' (call|put)")),
    }
}

fn parse_trainable(s: &str) -> Result<ModelKind, String> {
    match ModelKind::from_slug(&s.to_ascii_lowercase()) {
        Some(kind) if kind.is_trainable() => Ok(kind),
        Some(kind) => Err(format!("{} is analytic; nothing to train", kind.label())),
        None => Err(format!(
            "unknown model '{s}' (kan|conv-kan|lstm|conv-lstm)"
        )),
    }
}

fn load_config(cli: &Cli) -> Result<(BenchConfig, Option<PathBuf>)> {
    let mut flat = match &cli.config {
        Some(path) => FlatConfig::from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => FlatConfig::default(),
    };
    for pair in &cli.overrides {
        let Some((k, v)) = pair.split_once('=') else {
            bail!("--set expects KEY=VALUE, got '{pair}'");
        };
        flat.set(k, v);
    }
    if let Some(seed) = cli.seed {
        flat.set("seed", &seed.to_string());
    }
    let cfg = BenchConfig::from_flat(&flat)?;
    Ok((cfg, cli.config.clone()))
}

fn out_root(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("OPTIKAN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("optikan-out"))
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Price {
            spot,
            strike,
            rate,
            dividend,
            vol,
            ttm,
            kind,
        } => cmd_price(*spot, *strike, *rate, *dividend, *vol, *ttm, *kind),
        Command::Verify {
            paths,
            grid_points,
            negative_control,
        } => {
            let (cfg, _) = load_config(&cli)?;
            cmd_verify(*paths, *grid_points, *negative_control, cfg.seed)
        }
        Command::GenData { out_file } => {
            let (cfg, config_path) = load_config(&cli)?;
            let root = out_root(&cli);
            cmd_gen_data(&cfg, config_path.as_deref(), &root, out_file.as_deref())
        }
        Command::FitGarch {
            input,
            out_file,
            trading_days,
        } => {
            let root = out_root(&cli);
            cmd_fit_garch(input, out_file.as_deref(), *trading_days, &root)
        }
        Command::Train { model, data } => {
            let (cfg, config_path) = load_config(&cli)?;
            let root = out_root(&cli);
            cmd_train(*model, data.as_deref(), &cfg, config_path.as_deref(), &root)
        }
        Command::Bench => {
            let (cfg, config_path) = load_config(&cli)?;
            let root = out_root(&cli);
            cmd_bench(&cfg, config_path.as_deref(), &root)
        }
        Command::Report { dir } => cmd_report(dir),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_price(
    spot: f64,
    strike: f64,
    rate: f64,
    dividend: f64,
    vol: f64,
    ttm: f64,
    kind: OptionKind,
) -> Result<i32> {
    let params = MarketParams {
        spot,
        strike,
        rate,
        dividend_yield: dividend,
        volatility: vol,
        maturity: ttm,
    };
    let bs = pricing::price_bs(&params, kind)?;
    let bsm = pricing::price_bsm(&params, kind)?;
    println!(
        "# spot={spot} strike={strike} rate={rate} dividend={dividend} vol={vol} ttm={ttm} kind={kind}"
    );
    println!("quantity,value");
    println!("price_bs,{bs}");
    println!("price_bsm,{bsm}");
    if ttm > 0.0 {
        let (d1, d2) = pricing::d1_d2(&params)?;
        println!("d1,{d1}");
        println!("d2,{d2}");
    } else {
        println!("d1,");
        println!("d2,");
    }
    let call = pricing::price_bsm(&params, OptionKind::Call)?;
    let put = pricing::price_bsm(&params, OptionKind::Put)?;
    let forward = spot * (-dividend * ttm).exp() - strike * (-rate * ttm).exp();
    println!("parity_residual,{}", call - put - forward);
    Ok(0)
}

fn cmd_verify(
    paths: usize,
    grid_points: usize,
    negative_control: bool,
    seed: u64,
) -> Result<i32> {
    let mut all_pass = true;

    let (rows, worst_parity, worst_reduction) = verify::parity_suite(grid_points, seed);
    println!("# table: parity_grid ({} random points)", rows.len());
    println!("spot,strike,rate,dividend,vol,ttm,call,put,parity_residual,bs_vs_bsm_q0");
    for r in rows.iter().take(10) {
        let p = &r.params;
        println!(
            "{},{},{},{},{},{},{},{},{},{}",
            p.spot,
            p.strike,
            p.rate,
            p.dividend_yield,
            p.volatility,
            p.maturity,
            r.call,
            r.put,
            r.parity_residual,
            r.bs_vs_bsm_q0
        );
    }
    let parity_ok = worst_parity < 1e-10 && worst_reduction < 1e-12;
    all_pass &= parity_ok;
    println!(
        "# RESULT parity_grid {} worst_parity={worst_parity:e} worst_q0_reduction={worst_reduction:e}",
        if parity_ok { "PASS" } else { "FAIL" }
    );

    println!("# table: mc_comparison ({paths} antithetic paths per point)");
    println!("spot,strike,rate,dividend,vol,ttm,kind,analytic,mc_mean,mc_std_error,z");
    let mut worst_z = 0.0f64;
    for r in verify::mc_suite(paths, seed) {
        let p = &r.params;
        println!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.spot,
            p.strike,
            p.rate,
            p.dividend_yield,
            p.volatility,
            p.maturity,
            r.kind,
            r.analytic,
            r.mc_mean,
            r.mc_std_error,
            r.z_score
        );
        worst_z = worst_z.max(r.z_score);
    }
    let mc_ok = worst_z < 3.0;
    all_pass &= mc_ok;
    println!(
        "# RESULT mc_comparison {} worst_z={worst_z:.3}",
        if mc_ok { "PASS" } else { "FAIL" }
    );

    let atm = MarketParams {
        spot: 100.0,
        strike: 100.0,
        rate: 0.05,
        dividend_yield: 0.01,
        volatility: 0.2,
        maturity: 1.0,
    };
    println!("# table: pde_residual (25 interior points)");
    println!("spot,ttm,analytic_residual,payoff_residual,separation");
    let mut worst_sep = f64::INFINITY;
    for r in verify::residual_suite(&atm, OptionKind::Call) {
        let sep = r.payoff_residual.abs() / r.analytic_residual.abs().max(1e-300);
        println!(
            "{},{},{},{},{sep:.1}",
            r.spot, r.maturity, r.analytic_residual, r.payoff_residual
        );
        worst_sep = worst_sep.min(sep);
    }
    let pde_ok = worst_sep >= 100.0;
    all_pass &= pde_ok;
    println!(
        "# RESULT pde_residual {} min_separation={worst_sep:.1}x",
        if pde_ok { "PASS" } else { "FAIL" }
    );

    if negative_control {
        // The payoff surface must NOT satisfy the PDE: require that
        // its residual would fail the analytic-smallness check.
        let ds = 1e-3 * atm.spot;
        let dt = 1e-5;
        let analytic = verify::pde_residual(&atm, OptionKind::Call, ds, dt)?;
        let control = verify::pde_residual_payoff(&atm, OptionKind::Call, ds, dt)?;
        let control_fails_as_expected = control.abs() > 100.0 * analytic.abs();
        all_pass &= control_fails_as_expected;
        println!(
            "# RESULT negative_control {} payoff_residual={control:.6} (analytic {analytic:e})",
            if control_fails_as_expected {
                "PASS (payoff correctly fails the PDE check)"
            } else {
                "FAIL"
            }
        );
    }

    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_gen_data(
    cfg: &BenchConfig,
    config_path: Option<&Path>,
    root: &Path,
    out_file: Option<&Path>,
) -> Result<i32> {
    std::fs::create_dir_all(root)?;
    let out_file = out_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| root.join("dataset.csv"));
    let start = Instant::now();
    let quotes = data::generate_synthetic(&cfg.gen, cfg.seed)?;
    data::save_csv(&out_file, &quotes)?;

    let mut manifest = RunManifest::new("gen-data", cfg.seed, root);
    manifest.config = cfg.echo();
    manifest.config_path = config_path.map(|p| p.display().to_string());
    manifest.record_artifact(root, &out_file)?;
    manifest.record_timing("total", start.elapsed().as_secs_f64());
    manifest.save(&root.join("manifest_gen.json"))?;

    let contracts: std::collections::BTreeSet<&str> =
        quotes.iter().map(|q| q.contract_id.as_str()).collect();
    println!(
        "wrote {} observations of {} contracts to {}",
        quotes.len(),
        contracts.len(),
        out_file.display()
    );
    println!(
        "date range {}..{}",
        quotes.first().map(|q| q.date.to_string()).unwrap_or_default(),
        quotes.last().map(|q| q.date.to_string()).unwrap_or_default()
    );
    Ok(0)
}

fn cmd_fit_garch(
    input: &Path,
    out_file: Option<&Path>,
    trading_days: usize,
    root: &Path,
) -> Result<i32> {
    std::fs::create_dir_all(root)?;
    let out_file = out_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| root.join("garch_vol.csv"));
    let rows = data::load_returns_csv(input)?;
    let returns: Vec<f64> = rows.iter().map(|(_, r)| *r).collect();
    let params = garch::garch_fit(&returns)?;
    let loglik = garch::garch_loglik(&params, &returns)?;
    let variance = garch::garch_filter(&params, &returns)?;
    let series = garch::VolSeries {
        dates: rows.iter().map(|(d, _)| *d).collect(),
        sigma: variance
            .iter()
            .map(|v| garch::annualize(v.sqrt(), trading_days))
            .collect(),
    };
    series.validate()?;
    data::save_vol_series_csv(&out_file, &series)?;

    println!("model=GARCH(1,1) gaussian");
    println!("omega={}", params.omega);
    println!("alpha={}", params.alpha);
    println!("beta={}", params.beta);
    println!("persistence={}", params.alpha + params.beta);
    println!("loglik={loglik}");
    println!("annualization=sqrt({trading_days})");
    println!("observations={}", returns.len());
    println!("vol_series={}", out_file.display());
    Ok(0)
}

fn cmd_train(
    kind: ModelKind,
    data_path: Option<&Path>,
    cfg: &BenchConfig,
    config_path: Option<&Path>,
    root: &Path,
) -> Result<i32> {
    std::fs::create_dir_all(root)?;
    let start = Instant::now();
    let quotes = match data_path {
        Some(path) => {
            let load = data::load_csv(path)?;
            for issue in &load.rejected {
                eprintln!("warning: rejected row {}: {}", issue.row, issue.reason);
            }
            if load.quotes.is_empty() {
                bail!("no usable quotes in {}", path.display());
            }
            load.quotes
        }
        None => data::generate_synthetic(&cfg.gen, cfg.seed)?,
    };
    let split = data::split_by_cutoff(&quotes, cfg.cutoff);
    if split.train.is_empty() || split.test.is_empty() {
        bail!(
            "cutoff {} leaves an empty side (train {}, test {})",
            cfg.cutoff,
            split.train.len(),
            split.test.len()
        );
    }
    let stats = data::fit_norm(&split.train)?;
    let (train_w, _) = data::window(&split.train, &stats, cfg.model.window)?;
    let (test_w, _) = data::window(&split.test, &stats, cfg.model.window)?;

    let slug = kind.slug();
    let train_cfg = cfg.train_config_for(kind);
    let model = NeuralModel::build(kind, &cfg.model, cfg.model_seed(kind))?;
    println!(
        "training {} ({}) on {} windows for {} epochs",
        kind.label(),
        model.describe(),
        train_w.len(),
        train_cfg.epochs
    );
    let curve = train::train(&model, &train_w, &train_cfg)?;

    let ckpt_path = root.join(format!("{slug}.ckpt.json"));
    let mut meta = BTreeMap::new();
    meta.insert("architecture".into(), model.describe());
    meta.insert("seed".into(), train_cfg.seed.to_string());
    meta.insert("epochs".into(), train_cfg.epochs.to_string());
    Checkpoint::capture(&model, meta).save(&ckpt_path)?;

    let loss_path = root.join(format!("loss_{slug}.csv"));
    let mut text = String::from("epoch,loss\n");
    for (i, l) in curve.per_epoch.iter().enumerate() {
        text.push_str(&format!("{},{l}\n", i + 1));
    }
    std::fs::write(&loss_path, text)?;

    let refs: Vec<&data::WindowedSample> = test_w.iter().collect();
    let preds: Vec<f64> = model
        .predict(&refs)?
        .into_iter()
        .map(|z| stats.denormalize_target(z))
        .collect();
    let targets: Vec<f64> = test_w.iter().map(|s| s.final_quote.target_price).collect();
    let metrics = train::evaluate(&preds, &targets)?;

    let mut manifest = RunManifest::new("train", cfg.seed, root);
    manifest.config = cfg.echo();
    manifest.config_path = config_path.map(|p| p.display().to_string());
    manifest.record_artifact(root, &ckpt_path)?;
    manifest.record_artifact(root, &loss_path)?;
    manifest.record_timing("total", start.elapsed().as_secs_f64());
    manifest.save(&root.join(format!("manifest_train_{slug}.json")))?;

    println!(
        "final_train_loss={}",
        curve.per_epoch.last().copied().unwrap_or(f64::NAN)
    );
    println!(
        "test: mse={} rmse={} mae={} mape={} (guarded {} of {})",
        metrics.mse, metrics.rmse, metrics.mae, metrics.mape, metrics.mape_guarded, metrics.n
    );
    println!("checkpoint={}", ckpt_path.display());
    Ok(0)
}

fn cmd_bench(cfg: &BenchConfig, config_path: Option<&Path>, root: &Path) -> Result<i32> {
    let outcome = run_bench(cfg, root, config_path)?;
    println!(
        "observations: train={} test={} | windows: train={} test={}",
        outcome.train_observations,
        outcome.test_observations,
        outcome.train_windows,
        outcome.test_windows
    );
    print!("{}", outcome.report.to_csv());
    println!(
        "# completed in {:.1}s; report in {}",
        outcome.elapsed_seconds,
        outcome.out_dir.display()
    );
    Ok(0)
}

fn cmd_report(dir: &Path) -> Result<i32> {
    let charts = experiment::rerender_charts(dir)?;
    let metrics_path = dir.join("metrics.csv");
    let metrics = std::fs::read_to_string(&metrics_path)
        .with_context(|| format!("reading {}", metrics_path.display()))?;
    print!("{metrics}");
    println!("# re-rendered {} charts in {}", charts.len(), dir.display());
    Ok(0)
}

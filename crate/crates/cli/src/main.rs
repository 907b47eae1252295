use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use knet::cluster::{kmeans, nmi};
use knet::data::{
    gen_moons, gen_spirals, subsample, write_csv, LabeledDataset, Pca, Standardizer,
    DEFAULT_MOON_NOISE, DEFAULT_SPIRAL_NOISE, MOONS_SIGMA, SPIRALS_SIGMA,
};
use knet::kernel::Bandwidth;
use knet::spectral::spectral_embedding;
use knet::trainer::{fit, write_history_csv, KNetConfig, KNetModel, PredictMode, SigmaMode, UUpdate};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

mod config;

use config::{DatasetSpec, RunConfig};

#[derive(Parser)]
#[command(name = "knet", version, about = "Deep kernel clustering with KNet")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration (and of `gen`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (output file for `gen`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Moons,
    Spirals,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    NearestCenter,
    KmeansRefit,
}

impl From<ModeArg> for PredictMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::NearestCenter => PredictMode::NearestCenter,
            ModeArg::KmeansRefit => PredictMode::KmeansRefit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled dataset as CSV.
    Gen {
        dataset: Generator,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Gaussian noise std (generator default when omitted).
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 3)]
        arms: usize,
    },
    /// Train KNet and export the model, metrics, history, embedding and kernel.
    Fit,
    /// Train on a subsample and cluster the full dataset out of sample.
    Oos {
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Train with each λ under both U updates and tabulate HSIC, reconstruction error and NMI.
    SweepLambda {
        /// Comma-separated list, e.g. `1,1e-4,0`.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Classic spectral clustering: k-means on the initial spectral embedding.
    BaselineSc,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Gen { dataset, n, noise, arms } = cli.command {
        return cmd_gen(dataset, n, noise, arms, cli.seed.unwrap_or(0), cli.out, cli.quiet);
    }
    let path = cli.config.context("--config is required for this command")?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.output_dir.display()))?;
    match cli.command {
        Command::Gen { .. } => unreachable!(),
        Command::Fit => cmd_fit(&cfg),
        Command::Oos { fraction, mode } => {
            if let Some(f) = fraction {
                cfg.subsample_fraction = f;
            }
            if let Some(m) = mode {
                cfg.predict_mode = m.into();
            }
            cmd_oos(&cfg)
        }
        Command::SweepLambda { lambdas } => {
            if let Some(l) = lambdas {
                cfg.lambdas = l;
            }
            cmd_sweep_lambda(&cfg)
        }
        Command::BaselineSc => cmd_baseline_sc(&cfg),
    }
}

fn cmd_gen(
    dataset: Generator,
    n: usize,
    noise: Option<f64>,
    arms: usize,
    seed: u64,
    out: Option<PathBuf>,
    quiet: bool,
) -> anyhow::Result<()> {
    let out = out.context("gen needs --out FILE")?;
    let ds = match dataset {
        Generator::Moons => gen_moons(n, noise.unwrap_or(DEFAULT_MOON_NOISE), seed)?,
        Generator::Spirals => gen_spirals(n, arms, noise.unwrap_or(DEFAULT_SPIRAL_NOISE), seed)?,
    };
    write_csv(&ds, &out)?;
    if !quiet {
        println!("N={} c={} d={}", ds.len(), ds.num_classes().unwrap_or(0), ds.dim());
    }
    Ok(())
}

/// The dataset after standardization (and optional PCA), with the fitted transforms.
struct Prepared {
    raw: LabeledDataset,
    x: Array2<f64>,
    standardizer: Option<Standardizer>,
    pca: Option<Pca>,
}

impl Prepared {
    /// Applies the transforms fitted on the training rows to other rows.
    fn transform(&self, raw: ArrayView2<'_, f64>) -> anyhow::Result<Array2<f64>> {
        let mut x = match &self.standardizer {
            Some(s) => s.apply(raw)?,
            None => raw.to_owned(),
        };
        if let Some(p) = &self.pca {
            x = p.transform(x.view())?;
        }
        Ok(x)
    }
}

fn prepare(cfg: &RunConfig, raw: LabeledDataset) -> anyhow::Result<Prepared> {
    let (mut x, standardizer) = if cfg.standardize {
        let s = Standardizer::fit(raw.x.view(), Some(&raw.feature_names))?;
        (s.apply(raw.x.view())?, Some(s))
    } else {
        (raw.x.clone(), None)
    };
    let pca = match cfg.pca_dim {
        Some(k) => {
            let p = Pca::fit(x.view(), k)?;
            x = p.transform(x.view())?;
            Some(p)
        }
        None => None,
    };
    Ok(Prepared {
        raw,
        x,
        standardizer,
        pca,
    })
}

fn knet_config(cfg: &RunConfig, ds: &LabeledDataset, lambda: Option<f64>, update: Option<UUpdate>) -> anyhow::Result<KNetConfig> {
    let c = match cfg.c.or(ds.num_classes()) {
        Some(c) => c,
        None => bail!("config must set c when the dataset has no labels"),
    };
    let sigma = match (cfg.sigma, &cfg.dataset) {
        (Some(s), _) => s,
        (None, DatasetSpec::Moons { .. }) if cfg.standardize && cfg.pca_dim.is_none() => SigmaMode::Fixed(MOONS_SIGMA),
        (None, DatasetSpec::Spirals { .. }) if cfg.standardize && cfg.pca_dim.is_none() => SigmaMode::Fixed(SPIRALS_SIGMA),
        (None, _) => SigmaMode::Median,
    };
    let base = KNetConfig::default();
    let k = KNetConfig {
        c,
        sigma,
        lambda: lambda.unwrap_or(cfg.lambda),
        u_update: update.unwrap_or(cfg.u_update),
        learning_rate: cfg.learning_rate.unwrap_or(base.learning_rate),
        batch_size: cfg.batch_size.unwrap_or(base.batch_size),
        max_outer_iters: cfg.max_outer_iters.unwrap_or(base.max_outer_iters),
        min_outer_iters: cfg.min_outer_iters.unwrap_or(base.min_outer_iters),
        convergence_tol: cfg.convergence_tol.unwrap_or(base.convergence_tol),
        kmeans_restarts: cfg.kmeans_restarts.unwrap_or(base.kmeans_restarts),
        hidden_width: cfg.hidden_width,
        seed: cfg.seed,
    };
    k.validate()?;
    Ok(k)
}

fn score(labels: Option<&Vec<usize>>, predicted: &[usize]) -> anyhow::Result<Option<f64>> {
    Ok(match labels {
        Some(truth) => Some(nmi(truth, predicted)?),
        None => None,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct FitMetrics {
    dataset: String,
    n: usize,
    d: usize,
    c: usize,
    sigma: f64,
    u_update: UUpdate,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmi: Option<f64>,
    prep_seconds: f64,
    run_seconds: f64,
    outer_iterations: usize,
    converged: bool,
    final_hsic: f64,
    final_recon_error: f64,
    pretrain_residual: f64,
}

fn fit_metrics(name: &str, model: &KNetModel, x: ArrayView2<'_, f64>, nmi: Option<f64>) -> FitMetrics {
    let last = model.history.last();
    FitMetrics {
        dataset: name.to_string(),
        n: x.nrows(),
        d: x.ncols(),
        c: model.config.c,
        sigma: model.sigma.value(),
        u_update: model.config.u_update,
        lambda: model.config.lambda,
        nmi,
        prep_seconds: model.timings.prep_seconds,
        run_seconds: model.timings.run_seconds,
        outer_iterations: model.outer_iterations(),
        converged: model.converged,
        final_hsic: last.map_or(f64::NAN, |r| r.hsic),
        final_recon_error: last.map_or(f64::NAN, |r| r.recon_error),
        pretrain_residual: model.pretrain_residual,
    }
}

fn write_embedding(path: &Path, z: &Array2<f64>, truth: Option<&Vec<usize>>, predicted: &[usize]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header: Vec<String> = (0..z.ncols()).map(|j| format!("z{j}")).collect();
    if truth.is_some() {
        header.push("label".into());
    }
    header.push("cluster".into());
    w.write_record(&header)?;
    for (i, row) in z.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(t) = truth {
            rec.push(t[i].to_string());
        }
        rec.push(predicted[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// The learned kernel with rows and columns sorted by `order_by` (stable), so
/// clusters show up as diagonal blocks. Larger kernels are thinned to at most
/// `max_rows` evenly spaced rows of the sorted order.
fn write_kernel(path: &Path, kernel: &Array2<f64>, order_by: &[usize], max_rows: usize) -> anyhow::Result<()> {
    let n = kernel.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| order_by[i]);
    if n > max_rows && max_rows > 0 {
        order = (0..max_rows).map(|k| order[k * n / max_rows]).collect();
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    for &i in &order {
        w.write_record(order.iter().map(|&j| format!("{:.6e}", kernel[[i, j]])))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> anyhow::Result<()> {
    let raw = cfg.load_dataset()?;
    let prepared = prepare(cfg, raw)?;
    let ds = &prepared.raw;
    let kcfg = knet_config(cfg, ds, None, None)?;
    let model = fit(prepared.x.view(), &kcfg).context("training failed")?;
    let nmi = score(ds.labels.as_ref(), &model.labels)?;
    let out = &cfg.output_dir;
    model.save(out.join("model.json"))?;
    write_history_csv(&model.history, out.join("history.csv"))?;
    write_embedding(&out.join("embedding.csv"), &model.embedding, ds.labels.as_ref(), &model.labels)?;
    let order = ds.labels.as_ref().unwrap_or(&model.labels);
    write_kernel(&out.join("kernel.csv"), &model.learned_kernel()?, order, cfg.kernel_max_rows)?;
    let metrics = fit_metrics(&ds.name, &model, prepared.x.view(), nmi);
    write_json(&out.join("metrics.json"), &metrics)?;
    match nmi {
        Some(v) => log::info!("NMI {v:.4} after {} outer iterations", model.outer_iterations()),
        None => log::info!("finished after {} outer iterations", model.outer_iterations()),
    }
    Ok(())
}

#[derive(Serialize)]
struct OosMetrics {
    dataset: String,
    fraction: f64,
    mode: PredictMode,
    n_train: usize,
    n_total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmi_train: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmi_holdout: Option<f64>,
    prep_seconds: f64,
    run_seconds: f64,
    predict_seconds: f64,
    outer_iterations: usize,
}

fn cmd_oos(cfg: &RunConfig) -> anyhow::Result<()> {
    let full = cfg.load_dataset()?;
    let split = subsample(&full, cfg.subsample_fraction, cfg.seed)?;
    let probe_c = cfg.c.or(full.num_classes()).unwrap_or(2);
    if split.subset.len() < 2 * probe_c {
        bail!(
            "subsample of {} rows is smaller than 2c = {}",
            split.subset.len(),
            2 * probe_c
        );
    }
    let prepared = prepare(cfg, split.subset)?;
    let kcfg = knet_config(cfg, &prepared.raw, None, None)?;
    let model = fit(prepared.x.view(), &kcfg).context("training failed")?;

    let start = Instant::now();
    let x_full = prepared.transform(full.x.view())?;
    let predicted = model.predict(x_full.view(), cfg.predict_mode)?;
    let predict_seconds = start.elapsed().as_secs_f64();

    let holdout_pred: Vec<usize> = split.holdout_indices.iter().map(|&i| predicted[i]).collect();
    let nmi_holdout = match (&split.holdout.labels, holdout_pred.is_empty()) {
        (Some(t), false) => Some(nmi(t, &holdout_pred)?),
        _ => None,
    };
    let metrics = OosMetrics {
        dataset: full.name.clone(),
        fraction: cfg.subsample_fraction,
        mode: cfg.predict_mode,
        n_train: prepared.x.nrows(),
        n_total: full.len(),
        nmi: score(full.labels.as_ref(), &predicted)?,
        nmi_train: score(prepared.raw.labels.as_ref(), &model.labels)?,
        nmi_holdout,
        prep_seconds: model.timings.prep_seconds,
        run_seconds: model.timings.run_seconds,
        predict_seconds,
        outer_iterations: model.outer_iterations(),
    };
    model.save(cfg.output_dir.join("model.json"))?;
    write_json(&cfg.output_dir.join("metrics.json"), &metrics)?;
    if let Some(v) = metrics.nmi {
        log::info!("full-set NMI {v:.4} from a {:.0}% subsample", 100.0 * cfg.subsample_fraction);
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    hsic: f64,
    recon_error: f64,
    nmi_eig: f64,
    nmi_sma: f64,
    lambda: f64,
}

fn cmd_sweep_lambda(cfg: &RunConfig) -> anyhow::Result<()> {
    let raw = cfg.load_dataset()?;
    let prepared = prepare(cfg, raw)?;
    let ds = &prepared.raw;
    let truth = ds.labels.as_ref().context("sweep-lambda needs a labeled dataset")?;
    if cfg.lambdas.is_empty() {
        bail!("no lambda values to sweep");
    }
    let path = cfg.output_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    for &lambda in &cfg.lambdas {
        let eig = fit(prepared.x.view(), &knet_config(cfg, ds, Some(lambda), Some(UUpdate::Eig))?)
            .with_context(|| format!("training failed at lambda {lambda}"))?;
        let sma = fit(prepared.x.view(), &knet_config(cfg, ds, Some(lambda), Some(UUpdate::Sma))?)
            .with_context(|| format!("training failed at lambda {lambda}"))?;
        let last = eig.history.last().context("no outer iterations")?;
        let row = SweepRow {
            hsic: last.hsic,
            recon_error: last.recon_error,
            nmi_eig: nmi(truth, &eig.labels)?,
            nmi_sma: nmi(truth, &sma.labels)?,
            lambda,
        };
        log::info!("lambda {lambda:e}: NMI EIG {:.4}, SMA {:.4}", row.nmi_eig, row.nmi_sma);
        w.serialize(&row)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BaselineMetrics {
    dataset: String,
    n: usize,
    c: usize,
    sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmi: Option<f64>,
    run_seconds: f64,
}

fn cmd_baseline_sc(cfg: &RunConfig) -> anyhow::Result<()> {
    let raw = cfg.load_dataset()?;
    let prepared = prepare(cfg, raw)?;
    let ds = &prepared.raw;
    let kcfg = knet_config(cfg, ds, None, None)?;
    let start = Instant::now();
    let sigma = match kcfg.sigma {
        SigmaMode::Median => knet::kernel::median_sigma(prepared.x.view())?,
        SigmaMode::Fixed(s) => Bandwidth::new(s)?,
    };
    let u0 = spectral_embedding(prepared.x.view(), sigma, kcfg.c)?;
    let km = kmeans(u0.view(), kcfg.c, kcfg.kmeans_restarts, kcfg.seed)?;
    let metrics = BaselineMetrics {
        dataset: ds.name.clone(),
        n: ds.len(),
        c: kcfg.c,
        sigma: sigma.value(),
        nmi: score(ds.labels.as_ref(), &km.labels)?,
        run_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&cfg.output_dir.join("metrics.json"), &metrics)?;
    if let Some(v) = metrics.nmi {
        log::info!("spectral clustering NMI {v:.4}");
    }
    Ok(())
}

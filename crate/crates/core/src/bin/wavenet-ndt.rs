//! Command-line surface: dataset generation, training, evaluation, and
//! single-profile reconstruction. Plot rendering is out of process; every
//! command emits CSV files for external tooling.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::time::Instant;

use wavenet_ndt::config::RunConfig;
use wavenet_ndt::dataset::{
    generate, load_dataset, save_dataset, DatasetKind, DefectDataset, GenerationSpec, Split,
};
use wavenet_ndt::defects::{sample_profile, DefectParams};
use wavenet_ndt::error::{Error, Result};
use wavenet_ndt::eval::{evaluate, export_report, ReportFormat};
use wavenet_ndt::nn::{load_checkpoint, save_checkpoint, train, CnnModel};
use wavenet_ndt::physics::{forward_reflection, wnst_invert, WavenumberGrid};

#[derive(Parser)]
#[command(
    name = "wavenet-ndt",
    about = "Guided-wave plate-thinning reconstruction: analytic wavenumber inversion plus a 1D CNN post-processor",
    version
)]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override for the command.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path (file or directory, command-dependent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Mixed,
    NoisyRect,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DefectArg {
    Triangle,
    Rect,
    Step,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of (pre-reconstruction, exact) profile pairs.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Sample count (default: 1200 mixed, 400 noisy-rect).
        #[arg(long)]
        count: Option<usize>,
        /// Injected SNR in dB for noisy datasets.
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Train the network on a generated dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// History CSV path (default: checkpoint path with .history.csv).
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
    },
    /// Score reconstructions on one split; without --model only the
    /// analytic baseline column is produced.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Emit a 100-row CSV with exact, analytic, and network profiles for
    /// one defect.
    Reconstruct {
        /// Take the defect from a dataset file...
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        sample_id: Option<usize>,
        /// ...or synthesize one ad hoc.
        #[arg(long, value_enum)]
        defect: Option<DefectArg>,
        #[arg(long)]
        depth_mm: Option<f64>,
        #[arg(long)]
        width_mm: Option<f64>,
        #[arg(long)]
        center_mm: Option<f64>,
        #[arg(long)]
        step_fraction: Option<f64>,
        #[arg(long)]
        depth2_mm: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

/// WAVENET_NDT_THREADS caps internal parallelism (0 or unset = auto).
fn configure_threads() {
    if let Ok(value) = std::env::var("WAVENET_NDT_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<RunConfig> {
    let cfg = match cli_config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn required_out(out: &Option<PathBuf>) -> Result<&Path> {
    out.as_deref()
        .ok_or_else(|| Error::InvalidParameter("--out is required for this command".into()))
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.config)?;
    match cli.command {
        Command::Generate { kind, count, snr_db } => {
            let out = required_out(&cli.out)?;
            let seed = cli.seed.unwrap_or(config.seed);
            let mut noise = config.noise;
            if let Some(db) = snr_db {
                noise.snr_db = db;
            }
            let spec = match kind {
                KindArg::Mixed => GenerationSpec {
                    kind: DatasetKind::Mixed,
                    count: count.unwrap_or(1200),
                    seed,
                    plate: config.plate,
                    grid: config.grid,
                    ranges: config.ranges,
                    noise: None,
                },
                KindArg::NoisyRect => GenerationSpec {
                    kind: DatasetKind::NoisyRect,
                    count: count.unwrap_or(400),
                    seed,
                    plate: config.plate,
                    grid: config.grid,
                    ranges: config.ranges,
                    noise: Some(noise),
                },
            };
            let ds = generate(&spec)?;
            save_dataset(&ds, out)?;
            let sizes: Vec<usize> = Split::ALL.iter().map(|s| ds.split_indices(*s).len()).collect();
            println!(
                "wrote {} samples to {} (train/val/test = {}/{}/{})",
                ds.len(),
                out.display(),
                sizes[0],
                sizes[1],
                sizes[2]
            );
            Ok(())
        }
        Command::Train { data, history, lr, batch_size, max_epochs, l2, dropout, patience } => {
            let out = required_out(&cli.out)?;
            let ds = load_dataset(&data)?;
            let mut tc = config.train;
            if let Some(v) = lr {
                tc.learning_rate = v;
            }
            if let Some(v) = batch_size {
                tc.batch_size = v;
            }
            if let Some(v) = max_epochs {
                tc.max_epochs = v;
            }
            if let Some(v) = l2 {
                tc.l2_lambda = v;
            }
            if let Some(v) = dropout {
                tc.dropout_rate = v;
            }
            if let Some(v) = patience {
                tc.patience = v;
            }
            if let Some(v) = cli.seed {
                tc.seed = v;
            }
            tc.validate()?;

            let input_len = ds.provenance.grid.point_count;
            let specs = CnnModel::default_architecture(input_len, tc.dropout_rate);
            let mut model = CnnModel::from_specs(&specs, input_len, tc.seed)?;
            let started = Instant::now();
            let hist = train(&mut model, &ds.split_pairs(Split::Train), &ds.split_pairs(Split::Val), &tc)?;
            save_checkpoint(&model, &tc, out)?;
            let history_path = history.unwrap_or_else(|| {
                let mut p = out.as_os_str().to_owned();
                p.push(".history.csv");
                PathBuf::from(p)
            });
            hist.write_csv(&history_path)?;
            println!(
                "trained {} epochs in {:.1}s (best epoch {}, val mse {:.3e}); checkpoint {}, history {}",
                hist.epochs.len(),
                started.elapsed().as_secs_f64(),
                hist.best_epoch,
                hist.best_val_mse().unwrap_or(f64::NAN),
                out.display(),
                history_path.display()
            );
            Ok(())
        }
        Command::Eval { data, model, split } => {
            let out = required_out(&cli.out)?;
            let ds = load_dataset(&data)?;
            let loaded = match model {
                Some(path) => Some(load_checkpoint(&path)?.0),
                None => None,
            };
            let report = evaluate(loaded.as_ref(), &ds, split.into())?;
            export_report(&report, out, ReportFormat::Csv)?;
            export_report(&report, out, ReportFormat::Markdown)?;
            println!("class      count  wnst_mean_db  convnet_mean_db");
            for row in report.per_class.iter().chain(std::iter::once(&report.overall)) {
                println!(
                    "{:<10} {:>5}  {:>12.2}  {}",
                    row.label,
                    row.count,
                    row.wnst_mean_db,
                    row.convnet_mean_db.map(|v| format!("{v:>15.2}")).unwrap_or_else(|| format!("{:>15}", "-"))
                );
            }
            println!("reports written to {}", out.display());
            Ok(())
        }
        Command::Reconstruct {
            data,
            sample_id,
            defect,
            depth_mm,
            width_mm,
            center_mm,
            step_fraction,
            depth2_mm,
            model,
        } => {
            let out = required_out(&cli.out)?;
            let loaded = match model {
                Some(path) => Some(load_checkpoint(&path)?.0),
                None => None,
            };
            match (data, defect) {
                (Some(data), None) => {
                    let id = sample_id.ok_or_else(|| {
                        Error::InvalidParameter("--sample-id is required with --data".into())
                    })?;
                    let ds = load_dataset(&data)?;
                    reconstruct_from_dataset(&ds, id, loaded.as_ref(), out)
                }
                (None, Some(defect)) => {
                    let params = adhoc_params(defect, depth_mm, width_mm, center_mm, step_fraction, depth2_mm)?;
                    reconstruct_adhoc(&config, &params, loaded.as_ref(), out)
                }
                _ => Err(Error::InvalidParameter(
                    "reconstruct needs either --data with --sample-id or --defect with dimensions".into(),
                )),
            }
        }
    }
}

fn adhoc_params(
    defect: DefectArg,
    depth_mm: Option<f64>,
    width_mm: Option<f64>,
    center_mm: Option<f64>,
    step_fraction: Option<f64>,
    depth2_mm: Option<f64>,
) -> Result<DefectParams> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::InvalidParameter(format!("--{name} is required for ad-hoc reconstruction")))
    };
    let depth = need(depth_mm, "depth-mm")? * 1e-3;
    let width = need(width_mm, "width-mm")? * 1e-3;
    let center = need(center_mm, "center-mm")? * 1e-3;
    match defect {
        DefectArg::Triangle => DefectParams::triangle(center, width, depth),
        DefectArg::Rect => DefectParams::rectangle(center, width, depth),
        DefectArg::Step => {
            let fraction = step_fraction.ok_or_else(|| {
                Error::InvalidParameter("--step-fraction is required for step defects".into())
            })?;
            let depth2 = need(depth2_mm, "depth2-mm")? * 1e-3;
            DefectParams::step(center, width, depth, fraction, depth2)
        }
    }
}

fn write_overlay_csv(
    path: &Path,
    xs: &[f64],
    exact: &[f64],
    wnst: &[f64],
    convnet: Option<&[f64]>,
) -> Result<()> {
    use std::fmt::Write as _;
    let mut text = String::from("x_m,exact_m,wnst_m,convnet_m\n");
    for i in 0..xs.len() {
        let conv = convnet.map(|c| c[i].to_string()).unwrap_or_default();
        writeln!(text, "{},{},{},{}", xs[i], exact[i], wnst[i], conv).expect("string write");
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn predict_scaled(model: &CnnModel, normalized_input: &[f64], scale: f64) -> Result<Vec<f64>> {
    let started = Instant::now();
    let prediction = model.predict(normalized_input)?;
    let elapsed = started.elapsed();
    println!("convnet inference took {:.3} ms", elapsed.as_secs_f64() * 1e3);
    Ok(prediction.into_iter().map(|v| v * scale).collect())
}

fn reconstruct_from_dataset(
    ds: &DefectDataset,
    id: usize,
    model: Option<&CnnModel>,
    out: &Path,
) -> Result<()> {
    let pair = ds.samples.get(id).ok_or_else(|| {
        Error::InvalidParameter(format!("sample id {id} out of range (dataset has {})", ds.len()))
    })?;
    let scale = ds.provenance.depth_scale;
    let grid = ds.provenance.grid;
    let xs: Vec<f64> = grid.positions().collect();
    let exact: Vec<f64> = pair.target.iter().map(|v| v * scale).collect();
    let wnst: Vec<f64> = pair.input.iter().map(|v| v * scale).collect();
    let convnet = match model {
        Some(m) => Some(predict_scaled(m, &pair.input, scale)?),
        None => None,
    };
    write_overlay_csv(out, &xs, &exact, &wnst, convnet.as_deref())?;
    println!("wrote {} ({} rows)", out.display(), xs.len());
    Ok(())
}

fn reconstruct_adhoc(
    config: &RunConfig,
    params: &DefectParams,
    model: Option<&CnnModel>,
    out: &Path,
) -> Result<()> {
    let grid = config.grid;
    let plate = config.plate;
    let exact = sample_profile(params, &grid)?;
    let wavenumbers = WavenumberGrid::matched_to(&grid);
    let spectrum = forward_reflection(&exact, &plate, &wavenumbers)?;
    let wnst = wnst_invert(&spectrum, &plate, &grid)?;
    let scale = plate.half_thickness;
    let normalized: Vec<f64> = wnst.depths.iter().map(|v| v / scale).collect();
    let convnet = match model {
        Some(m) => Some(predict_scaled(m, &normalized, scale)?),
        None => None,
    };
    let xs: Vec<f64> = grid.positions().collect();
    write_overlay_csv(out, &xs, &exact.depths, &wnst.depths, convnet.as_deref())?;
    println!("wrote {} ({} rows)", out.display(), xs.len());
    Ok(())
}

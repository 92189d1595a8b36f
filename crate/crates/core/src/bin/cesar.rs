use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cesar::burgers::{simulate, BurgersConfig};
use cesar::cae::CaeConfig;
use cesar::esn::EsnConfig;
use cesar::eval::{coverage, grand_mean_coverage, mse_map, persistence_forecast, EvalReport};
use cesar::io::{load_gsf, load_model, save_gsf, save_model};
use cesar::pipeline::{forecast, interval, train_cesar, ForecastOptions};
use cesar::protocol::{run_dataset, DatasetScores, StudyConfig, StudySummary};
use cesar::rng::derive_seed;
use cesar::wind::{power_map, PowerCurve, DEFAULT_SHEAR_EXPONENT};
use cesar::{CesarError, Result};

#[derive(Parser)]
#[command(name = "cesar", version, about = "Convolutional echo state autoencoder forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Burgers,
    Wrf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded 2D Burgers datasets as GSF files.
    SimulateBurgers {
        #[arg(long, default_value_t = 0.005)]
        nu: f64,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        /// Number of datasets.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 2024)]
        base_seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the CAE and ESN ensemble on the leading frames of a GSF file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "burgers")]
        preset: Preset,
        #[arg(long)]
        train_frames: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        cae_filters: Option<Vec<usize>>,
        #[arg(long)]
        cae_epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        esn_nh: Option<usize>,
        #[arg(long)]
        esn_depth: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_model: PathBuf,
    },
    /// Forecast past the training window with reservoir and dropout ensembles.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        n_temporal: usize,
        #[arg(long, default_value_t = 1)]
        n_spatial: usize,
        #[arg(long, default_value_t = 1.0)]
        keep_prob: f64,
        /// Nominal interval levels in percent.
        #[arg(long, value_delimiter = ',', default_value = "95,90,80")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write every ensemble member.
        #[arg(long)]
        members: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Convert wind speeds to turbine power through a power curve.
    Power {
        #[arg(long)]
        data: PathBuf,
        /// `speed_ms,power_kw` CSV; the bundled N100/2500 curve when omitted.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 80.0)]
        hub_height: f64,
        #[arg(long, default_value_t = 10.0)]
        source_height: f64,
        #[arg(long, default_value_t = DEFAULT_SHEAR_EXPONENT)]
        kappa: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Burgers simulation study and write the pooled report.
    Study {
        #[arg(long, default_value_t = 10)]
        datasets: usize,
        #[arg(long, default_value_t = 2024)]
        base_seed: u64,
        #[arg(long)]
        cae_epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn presets(preset: Preset) -> (CaeConfig, EsnConfig, usize) {
    match preset {
        Preset::Burgers => (CaeConfig::burgers(), EsnConfig::burgers(), 80),
        Preset::Wrf => (CaeConfig::wrf(), EsnConfig::wrf(), 217),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CesarError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no such file: {}", path.display()),
        )))
    }
}

fn simulate_burgers(nu: f64, grid: usize, steps: usize, seeds: usize, base_seed: u64, out_dir: &Path) -> Result<()> {
    let config = BurgersConfig {
        viscosity: nu,
        grid,
        steps,
        ..BurgersConfig::default()
    };
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    for i in 0..seeds {
        let series = simulate(&config, derive_seed(base_seed, i as u64))?;
        let path = out_dir.join(format!("burgers_{i:02}.gsf"));
        save_gsf(&path, &series)?;
        println!("{}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    data: &Path,
    preset: Preset,
    train_frames: Option<usize>,
    cae_filters: Option<Vec<usize>>,
    cae_epochs: Option<usize>,
    batch: Option<usize>,
    esn_nh: Option<usize>,
    esn_depth: Option<usize>,
    q: Option<usize>,
    ensemble: Option<usize>,
    seed: u64,
    out_model: &Path,
) -> Result<()> {
    require_file(data)?;
    let series = load_gsf(data)?;
    let (mut cae, mut esn, default_frames) = presets(preset);
    let train_frames = train_frames.unwrap_or(default_frames);
    if train_frames > series.len() {
        return Err(CesarError::Config(format!(
            "--train-frames {train_frames} exceeds the {} frames in {}",
            series.len(),
            data.display()
        )));
    }
    let (m, n, p) = series.frame_shape();
    cae.input_height = m;
    cae.input_width = n;
    cae.input_channels = p;
    if let Some(f) = cae_filters {
        cae.filters = f;
    }
    if let Some(e) = cae_epochs {
        cae.epochs = e;
    }
    if let Some(b) = batch {
        cae.batch_size = b;
    }
    cae.seed = derive_seed(seed, 1);
    if let Some(nh) = esn_nh {
        esn.reservoir_size = nh;
    }
    if let Some(d) = esn_depth {
        esn.depth = d;
        esn.scaling = vec![esn.scaling[0]; d];
    }
    if let Some(q) = q {
        esn.lags = q;
    }
    if let Some(k) = ensemble {
        esn.ensemble_size = k;
    }
    esn.seed = derive_seed(seed, 2);
    cae.validate()?;
    esn.validate()?;
    let model = train_cesar(&series, train_frames, &cae, &esn)?;
    save_model(out_model, &model)?;
    println!("cae final loss: {:.6e}", model.cae.loss_history.last().copied().unwrap_or(f64::NAN));
    println!("cae observation variance: {:.6e}", model.observation_variance);
    println!(
        "esn leak rate {} scaling {:?} validation mse {}",
        model.esn.leak_rate,
        model.esn.scaling,
        model.esn.validation_mse.map_or("n/a".into(), |v| format!("{v:.6e}"))
    );
    println!("esn state variance: {:.6e}", model.state_variance);
    println!("{}", out_model.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_forecast(
    model_path: &Path,
    data: &Path,
    horizon: usize,
    n_temporal: usize,
    n_spatial: usize,
    keep_prob: f64,
    levels: &[f64],
    seed: u64,
    members: bool,
    out_dir: &Path,
) -> Result<()> {
    require_file(model_path)?;
    require_file(data)?;
    let model = load_model(model_path)?;
    let series = load_gsf(data)?;
    let t0 = model.train_frames;
    if series.len() < t0 {
        return Err(CesarError::Config(format!(
            "{} holds {} frames, fewer than the model's {t0}-frame training window",
            data.display(),
            series.len()
        )));
    }
    if n_temporal > model.esn.len() {
        return Err(CesarError::Config(format!(
            "--n-temporal {n_temporal} exceeds the {} fitted reservoirs",
            model.esn.len()
        )));
    }
    let history = series.slice(0..t0)?;
    let options = ForecastOptions {
        horizon,
        n_temporal,
        n_spatial,
        keep_prob,
        seed,
    };
    let ensemble = forecast(&model, &history, &options)?;
    fs::create_dir_all(out_dir)?;
    let mean = ensemble.mean()?;
    save_gsf(&out_dir.join("mean.gsf"), &mean)?;
    let mut bands = Vec::new();
    if ensemble.len() >= 2 {
        for &pct in levels {
            let (lo, hi) = interval(&ensemble, pct / 100.0)?;
            save_gsf(&out_dir.join(format!("lower_{pct}.gsf")), &lo)?;
            save_gsf(&out_dir.join(format!("upper_{pct}.gsf")), &hi)?;
            bands.push((pct, lo, hi));
        }
    } else if !levels.is_empty() {
        log::warn!("a single member has no interval; skipping bands");
    }
    if members {
        let dir = out_dir.join("members");
        fs::create_dir_all(&dir)?;
        for (i, m) in ensemble.members.iter().enumerate() {
            save_gsf(&dir.join(format!("member_{i:03}.gsf")), m)?;
        }
    }
    fs::write(out_dir.join("provenance.json"), serde_json::to_vec_pretty(&ensemble.provenance)?)?;

    if series.len() >= t0 + horizon {
        let truth = series.slice(t0..t0 + horizon)?;
        let mut report = EvalReport::default();
        report.metadata.push(("model".into(), model_path.display().to_string()));
        report.metadata.push(("data".into(), data.display().to_string()));
        report.metadata.push(("horizon".into(), horizon.to_string()));
        report.metadata.push(("members".into(), ensemble.len().to_string()));
        report.metadata.push(("seed".into(), seed.to_string()));
        report.push_mse_summary("cesar", &mse_map(&truth, &mean)?)?;
        report.push_mse_summary("persistence", &mse_map(&truth, &persistence_forecast(&history, horizon)?)?)?;
        for (pct, lo, hi) in &bands {
            report.push("cesar", &format!("coverage_{pct}"), coverage(lo, hi, &truth)?);
            report.push(
                "cesar",
                &format!("grand_mean_coverage_{pct}"),
                grand_mean_coverage(&ensemble.members, &truth, pct / 100.0)?,
            );
        }
        report.save_csv(&out_dir.join("report.csv"))?;
        print!("{report}");
    } else {
        println!("{}: no truth frames past the training window, report skipped", out_dir.display());
    }
    Ok(())
}

fn power(
    data: &Path,
    curve: Option<&Path>,
    hub_height: f64,
    source_height: f64,
    kappa: f64,
    out: &Path,
) -> Result<()> {
    require_file(data)?;
    let speeds = load_gsf(data)?;
    let curve = match curve {
        Some(path) => {
            require_file(path)?;
            PowerCurve::from_csv(path, hub_height)?
        }
        None => PowerCurve {
            hub_height_m: hub_height,
            ..PowerCurve::n100_2500()
        },
    };
    let map = power_map(&speeds, &curve, kappa, source_height)?;
    save_gsf(out, &map.power)?;
    println!("curve: {} (rated {} kW, hub {} m)", curve.name, curve.rated_kw, curve.hub_height_m);
    println!("mean_kw: {:.6}", map.mean_kw);
    println!("std_kw: {:.6}", map.std_kw);
    Ok(())
}

fn study(datasets: usize, base_seed: u64, cae_epochs: Option<usize>, out: &Path) -> Result<()> {
    let mut config = StudyConfig {
        base_seed,
        ..StudyConfig::default()
    };
    if let Some(e) = cae_epochs {
        config.cae.epochs = e;
    }
    let mut scores = Vec::with_capacity(datasets);
    for i in 0..datasets {
        let s = run_dataset(&config, i)?;
        println!(
            "dataset {i}: cae {:.4e} pca {:.4e} cesar {:.4e} persistence {:.4e}",
            DatasetScores::median(&s.cae_mse),
            DatasetScores::median(&s.pca_mse),
            DatasetScores::median(&s.cesar_mse),
            DatasetScores::median(&s.persistence_mse),
        );
        scores.push(s);
    }
    let report = StudySummary::from_scores(&scores)?.report();
    report.save_csv(out)?;
    print!("{report}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SimulateBurgers {
            nu,
            grid,
            steps,
            seeds,
            base_seed,
            out_dir,
        } => simulate_burgers(nu, grid, steps, seeds, base_seed, &out_dir),
        Command::Train {
            data,
            preset,
            train_frames,
            cae_filters,
            cae_epochs,
            batch,
            esn_nh,
            esn_depth,
            q,
            ensemble,
            seed,
            out_model,
        } => train(
            &data,
            preset,
            train_frames,
            cae_filters,
            cae_epochs,
            batch,
            esn_nh,
            esn_depth,
            q,
            ensemble,
            seed,
            &out_model,
        ),
        Command::Forecast {
            model,
            data,
            horizon,
            n_temporal,
            n_spatial,
            keep_prob,
            levels,
            seed,
            members,
            out_dir,
        } => run_forecast(
            &model, &data, horizon, n_temporal, n_spatial, keep_prob, &levels, seed, members, &out_dir,
        ),
        Command::Power {
            data,
            curve,
            hub_height,
            source_height,
            kappa,
            out,
        } => power(&data, curve.as_deref(), hub_height, source_height, kappa, &out),
        Command::Study {
            datasets,
            base_seed,
            cae_epochs,
            out,
        } => study(datasets, base_seed, cae_epochs, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CesarError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::sync::Arc;
use wavedens_cli::config::{ExperimentConfig, RatesTarget, WaveletChoice};
use wavedens_cli::csvio;
use wavedens_cli::runner;
use wavedens_cli::CliError;

/// Experiment runner for wavelet density estimation on simulated spatial
/// lattice data.
#[derive(Parser, Debug)]
#[command(name = "wavedens", version, about)]
struct Cli {
    /// JSON configuration file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// lattice edge lengths, e.g. 20,35,50,65
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    /// replications per sample size
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// wavelet family: haar, d4 or both
    #[arg(long, global = true)]
    wavelet: Option<String>,

    /// base seed of the replication streams
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Gibbs sweeps per replication
    #[arg(long, global = true)]
    iters: Option<usize>,

    /// draw the independent reference sample instead of the Gibbs chain
    #[arg(long, global = true)]
    iid: bool,

    /// dependence parameters of the five components, e.g. 0.2,-0.1,-0.22,0.2,0.22
    #[arg(long, global = true, value_delimiter = ',')]
    eta: Option<Vec<f64>>,

    /// relative threshold multiples, e.g. 0.1,0.2,0.3
    #[arg(long, global = true, value_delimiter = ',')]
    mult: Option<Vec<f64>>,

    /// largest level in the table (levels 0..=jmax)
    #[arg(long, global = true)]
    jmax: Option<i32>,

    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// compute verification criteria on positive-part normalized estimates
    #[arg(long, global = true)]
    normalized: bool,

    /// take the relative-threshold maximum across all levels instead of
    /// per level
    #[arg(long, global = true)]
    global_threshold: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate lattice samples; one CSV per replication plus metadata
    Simulate,
    /// Verification-criterion tables, one CSV per wavelet
    Table,
    /// Mean-ISE rate study across sample sizes
    Rates {
        /// sampling target: uniform, tent or mixture
        #[arg(long)]
        target: Option<String>,
        /// Besov smoothness s of the target class
        #[arg(long)]
        s: Option<f64>,
        /// Besov integrability p ("inf" allowed)
        #[arg(long)]
        p: Option<String>,
        /// loss index p'
        #[arg(long = "pprime")]
        p_prime: Option<f64>,
        /// multiplier on the theoretical threshold constant K0
        #[arg(long)]
        k0_scale: Option<f64>,
    },
    /// Estimate a density from a sample CSV; writes a grid CSV and the
    /// serialized estimate
    Estimate {
        /// input sample CSV (site_row,site_col,y1,y2)
        #[arg(long)]
        input: Option<PathBuf>,
        /// estimator kind: linear, hard, soft or target
        #[arg(long, default_value = "hard")]
        kind: String,
        /// level of the linear estimator
        #[arg(long)]
        j: Option<i32>,
        #[arg(long, default_value_t = 0)]
        j0: i32,
        #[arg(long, default_value_t = 3)]
        j1: i32,
        /// relative threshold multiple for the hard estimator
        #[arg(long, default_value_t = 0.1)]
        multiple: f64,
        /// shrinkage for the soft estimator
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Gaussian-block correlation of the reference target surface
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        /// evaluation grid resolution per axis on [-0.5, 1.5]^2
        #[arg(long, default_value_t = 512)]
        grid_res: usize,
        /// positive-part normalize before writing
        #[arg(long)]
        normalize: bool,
    },
}

fn merged_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(sizes) = &cli.sizes {
        cfg.sizes = sizes.clone();
    }
    if let Some(reps) = cli.reps {
        cfg.replications = reps;
    }
    if let Some(wavelet) = &cli.wavelet {
        cfg.wavelet = wavelet.parse::<WaveletChoice>().map_err(CliError::Config)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(iters) = cli.iters {
        cfg.iterations = iters;
    }
    if cli.iid {
        cfg.iid = true;
    }
    if let Some(etas) = &cli.eta {
        if etas.len() != 5 {
            return Err(CliError::Config(format!(
                "--eta needs exactly five values, got {}",
                etas.len()
            )));
        }
        cfg.etas = [etas[0], etas[1], etas[2], etas[3], etas[4]];
    }
    if let Some(mult) = &cli.mult {
        cfg.multiples = mult.clone();
    }
    if let Some(jmax) = cli.jmax {
        cfg.j_max = jmax;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.normalized {
        cfg.normalized_ver = true;
    }
    if cli.global_threshold {
        cfg.threshold_scope = wavedens::estimator::ThresholdScope::Global;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    for &size in &cfg.sizes {
        let shape = wavedens::lattice::LatticeShape::square(size)?;
        let reps = runner::simulate_replications(cfg, size)?;
        for (idx, rep) in reps.iter().enumerate() {
            let path = cfg.out_dir.join(format!("sim_n{size}_rep{idx:04}.csv"));
            csvio::write_sample_csv(&path, &shape, &rep.full)?;
        }
        let meta = serde_json::json!({
            "seed": cfg.seed,
            "eta": cfg.etas,
            "iterations": cfg.iterations,
            "shape": [size, size],
            "iid": cfg.iid,
            "replications": cfg.replications,
            "copula": cfg.copula,
        });
        let meta_path = cfg.out_dir.join(format!("sim_n{size}_meta.json"));
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
        println!(
            "wrote {} replications of the {size}x{size} lattice to {}",
            cfg.replications,
            cfg.out_dir.display()
        );
    }
    Ok(())
}

fn cmd_table(cfg: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    for wavelet in cfg.wavelet.names() {
        let report = runner::run_table(cfg, wavelet)?;
        let path = cfg.out_dir.join(format!("table_{wavelet}.csv"));
        csvio::write_table_csv(&path, &report)?;
        println!("wrote {}", path.display());
    }
    let echo = cfg.out_dir.join("table_config.json");
    std::fs::write(&echo, serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

fn cmd_rates(
    cfg: &mut ExperimentConfig,
    target: Option<String>,
    s: Option<f64>,
    p: Option<String>,
    p_prime: Option<f64>,
    k0_scale: Option<f64>,
) -> Result<(), CliError> {
    if let Some(t) = target {
        cfg.rates_target = t.parse::<RatesTarget>().map_err(CliError::Config)?;
    }
    if let Some(s) = s {
        cfg.rates_s = s;
    }
    if let Some(p) = p {
        cfg.rates_p = if p == "inf" {
            f64::INFINITY
        } else {
            p.parse::<f64>().map_err(|e| CliError::Config(format!("bad --p: {e}")))?
        };
    }
    if let Some(pp) = p_prime {
        cfg.rates_p_prime = pp;
    }
    if let Some(k) = k0_scale {
        cfg.k0_scale = k;
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let report = runner::run_rates(cfg)?;
    let path = cfg.out_dir.join("rates.csv");
    csvio::write_rates_csv(&path, &report.rows)?;
    let summary = cfg.out_dir.join("rates_summary.json");
    std::fs::write(&summary, serde_json::to_string_pretty(&report)?)?;
    println!("wrote {} and {}", path.display(), summary.display());
    for (wavelet, estimator, slope) in &report.slopes {
        println!("log-log ISE slope [{wavelet}/{estimator}]: {slope:.4}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    cfg: &ExperimentConfig,
    input: Option<PathBuf>,
    kind: String,
    j: Option<i32>,
    j0: i32,
    j1: i32,
    multiple: f64,
    delta: f64,
    rho: f64,
    grid_res: usize,
    do_normalize: bool,
) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let grid = wavedens::postprocess::QuadratureGrid::new(
        vec![-0.5, -0.5],
        vec![1.5, 1.5],
        vec![grid_res, grid_res],
    )?;

    if kind == "target" {
        let target = wavedens::gmrf::TargetDensity::new(rho)?;
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_node(|x| values.push(target.pdf(x)));
        let path = cfg.out_dir.join("estimate_grid.csv");
        csvio::write_grid_csv(&path, &grid, &values)?;
        println!("wrote reference density surface to {}", path.display());
        return Ok(());
    }

    let input = input
        .ok_or_else(|| CliError::Config("estimate needs --input <sample.csv>".into()))?;
    let (_, sample) = csvio::read_sample_csv(&input)?;
    let wavelet = cfg.wavelet.names()[0];
    let basis = runner::basis_for(wavelet)?;

    let estimate = match kind.as_str() {
        "linear" => {
            let j = j.ok_or_else(|| CliError::Config("linear estimate needs --j".into()))?;
            wavedens::estimator::linear_estimate(&sample, &basis, j)?
        }
        "hard" => {
            let coeffs = wavedens::estimator::empirical_coefficient_set(&sample, &basis, j0, j1)?;
            let lambda = wavedens::estimator::relative_thresholds(
                &coeffs,
                multiple,
                j0,
                j1,
                cfg.threshold_scope,
            );
            wavedens::estimator::hard_threshold_from_coeffs(&basis, &coeffs, j0, j1, &lambda)?
        }
        "soft" => wavedens::estimator::soft_threshold_estimate(&sample, &basis, j0, j1, delta)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown estimator kind '{other}' (linear, hard, soft or target)"
            )))
        }
    };
    let estimate = if do_normalize {
        wavedens::postprocess::normalize(&estimate, &grid)?
    } else {
        estimate
    };

    let values = estimate.evaluate_grid(&grid);
    let grid_path = cfg.out_dir.join("estimate_grid.csv");
    csvio::write_grid_csv(&grid_path, &grid, &values)?;
    let json_path = cfg.out_dir.join("estimate.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&estimate.to_dto())?)?;
    println!(
        "wrote {} ({} kept coefficients) and {}",
        grid_path.display(),
        estimate.raw().coeffs.theta.len() + estimate.raw().coeffs.detail_count(),
        json_path.display()
    );
    let _ = Arc::strong_count(&basis);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = merged_config(&cli)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Table => cmd_table(&cfg),
        Command::Rates { target, s, p, p_prime, k0_scale } => {
            cmd_rates(&mut cfg, target, s, p, p_prime, k0_scale)
        }
        Command::Estimate {
            input,
            kind,
            j,
            j0,
            j1,
            multiple,
            delta,
            rho,
            grid_res,
            normalize,
        } => cmd_estimate(&cfg, input, kind, j, j0, j1, multiple, delta, rho, grid_res, normalize),
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

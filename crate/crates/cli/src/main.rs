use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn, LevelFilter};

use fiberpinn_core::analysis::{
    amplitude_mse, loss_statistics, mac_counts, mse_vs_oracle, ComplexityModel,
};
use fiberpinn_core::config::RunConfig;
use fiberpinn_core::io::{
    fmt_f64, manifest_entry, read_basis, read_coefficient_csv, write_coefficient_csv, write_lattice_csv,
    write_manifest, write_snapshot, BasisManifest, MANIFEST_FILE,
};
use fiberpinn_core::physics::{derive_coefficients, generate_pulse, FiberParams, Grid, PulseShape};
use fiberpinn_core::pinn::train_eigen;
use fiberpinn_core::rbm::{combine, greedy_build_with, predict, CoefficientSet, FitOnDemand, GreedyReport};
use fiberpinn_core::ssfm::propagate;
use fiberpinn_core::Error;

const COEFFICIENTS_FILE: &str = "coefficients.csv";

#[derive(Parser, Debug)]
#[command(name = "fiberpinn", version, about = "Parameterized PINN fiber model with a greedy reduced basis")]
struct Cli {
    /// TOML run configuration; command-line flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to the config file, then FIBERPINN_OUTPUT_DIR, then ./out).
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More output per repetition (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the parameter lattice as CSV.
    Lattice,
    /// Propagate the input pulse with the split-step reference solver.
    Ssfm {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Train one eigen network and store its snapshot.
    TrainEigen {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Build the reduced basis greedily; resumes from an existing basis directory.
    Greedy {
        #[arg(long)]
        n_b: Option<usize>,
        /// Start over even if the output directory holds a basis.
        #[arg(long)]
        fresh: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict the field at one parameter point from a stored basis.
    Predict {
        /// Basis directory written by `greedy`.
        #[arg(long)]
        basis: PathBuf,
        #[command(flatten)]
        point: PointArgs,
    },
    /// Loss statistics of a basis, optionally with errors against the reference solver.
    Evaluate {
        #[arg(long)]
        basis: PathBuf,
        /// Lattice indices to compare against the split-step solver.
        #[arg(long, value_delimiter = ',')]
        oracle: Vec<usize>,
    },
    /// MAC counts of the three approaches.
    Complexity {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        n_b: Option<u64>,
        #[arg(long)]
        hidden_layers: Option<u64>,
        #[arg(long)]
        width: Option<u64>,
        #[arg(long)]
        m_t: Option<u64>,
        #[arg(long)]
        m_c: Option<u64>,
        #[arg(long)]
        l_max: Option<f64>,
        #[arg(long)]
        l_u: Option<f64>,
    },
}

/// A parameter point: a lattice index or explicit swept values.
#[derive(Args, Debug)]
struct PointArgs {
    #[arg(long, conflicts_with_all = ["alpha", "beta2", "n2"])]
    index: Option<usize>,
    /// Attenuation (1/m).
    #[arg(long, requires_all = ["beta2", "n2"], allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Group velocity dispersion (s²/m).
    #[arg(long, requires_all = ["alpha", "n2"], allow_hyphen_values = true)]
    beta2: Option<f64>,
    /// Nonlinear index (m²/W).
    #[arg(long, requires_all = ["alpha", "beta2"], allow_hyphen_values = true)]
    n2: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    t_points: Option<usize>,
    #[arg(long)]
    zeta_points: Option<usize>,
    /// Fiber length (m).
    #[arg(long)]
    l_max: Option<f64>,
    #[arg(long)]
    shape: Option<PulseShape>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    stop_loss: Option<f64>,
    /// Layer widths, e.g. 2,40,40,2.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
}

/// Errors of the binary: bad invocation or a failure inside the library.
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.verbosity = cfg.verbosity.max(cli.verbose);
    init_logging(cfg.verbosity);
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    let out = cfg.resolve_output_dir(cli.output_dir.as_deref());

    match cli.command {
        Command::Lattice => {
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let path = out.join("lattice.csv");
            fs::create_dir_all(&out)?;
            write_lattice_csv(BufWriter::new(File::create(&path)?), &cfg.space)?;
            println!("wrote {} points to {}", cfg.space.size(), path.display());
        }
        Command::Ssfm { point, grid } => {
            apply_grid(&mut cfg, &grid)?;
            let params = resolve_point(&cfg, &point)?;
            let pulse = cfg.pulse.spec()?;
            let oracle_grid = Grid::oracle(cfg.grid.zeta_points, cfg.grid.l_max)?;
            let coeffs = derive_coefficients(&params, &pulse, &oracle_grid)?;
            let field = propagate(&generate_pulse(&pulse, &oracle_grid)?, &coeffs, &oracle_grid, &cfg.ssfm)?;
            fs::create_dir_all(&out)?;
            field.write_binary(BufWriter::new(File::create(out.join("ssfm.bin"))?))?;
            field.write_csv(BufWriter::new(File::create(out.join("ssfm.csv"))?))?;
            let last = field.grid.zeta_points - 1;
            println!(
                "output energy / input energy = {}",
                fmt_f64(field.row_energy(last) / field.row_energy(0))
            );
        }
        Command::TrainEigen { point, grid, train } => {
            apply_grid(&mut cfg, &grid)?;
            apply_train(&mut cfg, &train)?;
            let params = resolve_point(&cfg, &point)?;
            let pulse = cfg.pulse.spec()?;
            fs::create_dir_all(&out)?;
            let trained = match train_eigen(&params, &pulse, &cfg.grid, &cfg.layers, cfg.seed, &cfg.train) {
                Ok(t) => t,
                Err(e) => {
                    if let Error::TrainingDiverged { history, .. } = &e {
                        write_partial_history(&out.join("loss.csv"), history)?;
                    }
                    return Err(e.into());
                }
            };
            trained.model.write(BufWriter::new(File::create(out.join("model.bin"))?))?;
            trained.history.write_csv(BufWriter::new(File::create(out.join("loss.csv"))?))?;
            write_snapshot(&out, 0, &trained.snapshot)?;
            trained.snapshot.field().write_csv(BufWriter::new(File::create(out.join("field.csv"))?))?;
            println!(
                "trained {} epochs, final loss {}",
                trained.history.len(),
                fmt_f64(trained.snapshot.loss)
            );
        }
        Command::Greedy { n_b, fresh, grid, train } => {
            apply_grid(&mut cfg, &grid)?;
            apply_train(&mut cfg, &train)?;
            if let Some(n_b) = n_b {
                cfg.greedy.n_b = n_b;
            }
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            run_greedy(&cfg, &out, fresh)?;
        }
        Command::Predict { basis, point } => {
            let (basis_set, manifest) = read_basis(&basis)?;
            cfg.space = manifest.space;
            let params = resolve_point(&cfg, &point)?;
            let map = read_coefficients(&basis, &manifest)?;
            let demand = FitOnDemand { pulse: manifest.pulse.clone(), fit: cfg.fit };
            let field = predict(&basis_set, &map, &params, Some(&demand))?;
            fs::create_dir_all(&out)?;
            field.write_csv(BufWriter::new(File::create(out.join("prediction.csv"))?))?;
            field.write_binary(BufWriter::new(File::create(out.join("prediction.bin"))?))?;
            println!("wrote prediction to {}", out.display());
        }
        Command::Evaluate { basis, oracle } => {
            let (basis_set, manifest) = read_basis(&basis)?;
            let map = read_coefficients(&basis, &manifest)?;
            if map.is_empty() {
                return Err(usage(format!("{} holds no {COEFFICIENTS_FILE}", basis.display())));
            }
            let mut amplitude = BTreeMap::new();
            let mut full = BTreeMap::new();
            let oracle_grid = Grid::oracle(manifest.grid.zeta_points, manifest.grid.l_max)?;
            let initial = generate_pulse(&manifest.pulse, &oracle_grid)?;
            for idx in oracle {
                let Some(set) = map.get(&idx) else {
                    return Err(usage(format!("lattice index {idx} has no fitted coefficients")));
                };
                let predicted = combine(&basis_set, &set.coefficients)?;
                let coeffs = derive_coefficients(&set.params, &manifest.pulse, &oracle_grid)?;
                let reference = propagate(&initial, &coeffs, &oracle_grid, &cfg.ssfm)?;
                amplitude.insert(idx, amplitude_mse(&predicted, &reference)?);
                full.insert(idx, mse_vs_oracle(&predicted, &reference)?);
            }
            let shape = manifest.pulse.shape;
            let report = loss_statistics(&map, &basis_set, &manifest.space, shape, &amplitude)?;
            fs::create_dir_all(&out)?;
            report.write_csv(BufWriter::new(File::create(out.join("evaluation.csv"))?))?;
            report.write_scatter_csv(BufWriter::new(File::create(out.join("scatter.csv"))?))?;
            println!("pulse: {}", shape.name());
            println!("mean loss: {} (log10 {:.3})", fmt_f64(report.mean_loss), report.log10_mean_loss);
            println!("worst lattice index: {}", report.worst_index);
            println!("eigen points on the boundary: {:.2}", report.boundary_fraction);
            if let Some(m) = report.mean_amplitude_mse {
                println!("mean amplitude MSE vs split-step: {}", fmt_f64(m));
            }
            for (idx, mse) in full {
                info!("index {idx}: complex MSE vs split-step {}", fmt_f64(mse));
            }
        }
        Command::Complexity { n, n_b, hidden_layers, width, m_t, m_c, l_max, l_u } => {
            let d = ComplexityModel::default();
            let model = ComplexityModel::with_grid(
                n.unwrap_or(d.n),
                m_t.unwrap_or(d.m_t),
                m_c.unwrap_or(d.m_c),
                hidden_layers.unwrap_or(d.k),
                width.unwrap_or(d.p),
                n_b.unwrap_or(d.n_b),
                l_max.unwrap_or(d.l_max),
                l_u.unwrap_or(d.l_u),
            );
            let c = mac_counts(&model).map_err(|e| usage(e.to_string()))?;
            println!("C_SSFM            {:.4e}", c.c_ssfm);
            println!("C_F               {:.4e}", c.c_f);
            println!("C_PF              {:.4e}", c.c_pf);
            println!("C_PF combination  {:.4e}", c.c_pf_combination);
            println!("C_PF / C_F        {:.4e}", c.pf_over_f());
            println!("C_PF / C_SSFM     {:.4e}", c.pf_over_ssfm());
        }
    }
    Ok(())
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        2 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
}

fn apply_grid(cfg: &mut RunConfig, args: &GridArgs) -> CliResult<()> {
    if let Some(n) = args.t_points {
        cfg.grid.t_points = n;
    }
    if let Some(n) = args.zeta_points {
        cfg.grid.zeta_points = n;
    }
    if let Some(l) = args.l_max {
        cfg.grid.l_max = l;
    }
    if let Some(shape) = args.shape {
        cfg.pulse.shape = shape;
    }
    cfg.grid.validate().map_err(|e| usage(e.to_string()))?;
    cfg.pulse.spec().map_err(|e| usage(e.to_string()))?;
    Ok(())
}

fn apply_train(cfg: &mut RunConfig, args: &TrainArgs) -> CliResult<()> {
    if let Some(e) = args.epochs {
        cfg.train.max_epochs = e;
    }
    if let Some(s) = args.stop_loss {
        cfg.train.stop_loss = s;
    }
    if let Some(layers) = &args.layers {
        cfg.layers = layers.clone();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))
}

fn resolve_point(cfg: &RunConfig, args: &PointArgs) -> CliResult<FiberParams> {
    let params = match (args.index, args.alpha, args.beta2, args.n2) {
        (Some(k), ..) => {
            if k >= cfg.space.size() {
                return Err(usage(format!("index {k} outside the {}-point lattice", cfg.space.size())));
            }
            cfg.space.point(k)
        }
        (None, Some(a), Some(b), Some(n)) => cfg.space.with_swept(a, b, n),
        _ => return Err(usage("give either --index or all of --alpha, --beta2, --n2")),
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    Ok(params)
}

fn read_coefficients(dir: &Path, manifest: &BasisManifest) -> CliResult<BTreeMap<usize, CoefficientSet>> {
    let path = dir.join(COEFFICIENTS_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let rows = read_coefficient_csv(BufReader::new(File::open(&path)?))?;
    let size = manifest.space.size();
    rows.into_iter()
        .map(|(idx, coefficients, loss)| {
            if idx >= size {
                return Err(usage(format!("{}: index {idx} outside the lattice", path.display())));
            }
            Ok((idx, CoefficientSet { coefficients, params: manifest.space.point(idx), loss, iterations: 0 }))
        })
        .collect()
}

fn run_greedy(cfg: &RunConfig, out: &Path, fresh: bool) -> CliResult<()> {
    let pulse = cfg.pulse.spec()?;
    let mut manifest = BasisManifest {
        seed: cfg.seed,
        n_b: cfg.greedy.n_b,
        layers: cfg.layers.clone(),
        pulse: pulse.clone(),
        grid: cfg.grid,
        space: cfg.space,
        entries: Vec::new(),
    };
    let resume = if !fresh && out.join(MANIFEST_FILE).exists() {
        let (basis, stored) = read_basis(out)?;
        let same = stored.seed == manifest.seed
            && stored.layers == manifest.layers
            && stored.pulse == manifest.pulse
            && stored.grid == manifest.grid
            && stored.space == manifest.space;
        if !same {
            return Err(usage(format!(
                "{} holds a basis built with different settings; pass --fresh to overwrite it",
                out.display()
            )));
        }
        if basis.len() > cfg.greedy.n_b {
            return Err(usage(format!("stored basis already has {} > n_b eigen solutions", basis.len())));
        }
        info!("resuming with {} stored eigen solutions", basis.len());
        manifest.entries = stored.entries;
        Some(basis)
    } else {
        None
    };

    fs::create_dir_all(out)?;
    write_manifest(out, &manifest)?;
    let trainer = |idx: usize, params: &FiberParams| {
        info!("training eigen solution at lattice index {idx}");
        let trained = train_eigen(params, &pulse, &cfg.grid, &cfg.layers, cfg.seed, &cfg.train)?;
        write_snapshot(out, idx, &trained.snapshot)?;
        trained.history.write_csv(BufWriter::new(File::create(out.join(format!("loss_{idx:04}.csv")))?))?;
        manifest.entries.push(manifest_entry(idx, &trained.snapshot));
        write_manifest(out, &manifest)?;
        Ok(trained.snapshot)
    };
    let (basis, report) = greedy_build_with(&cfg.space, &pulse, &cfg.grid, &cfg.greedy, resume, trainer)?;

    let mut w = BufWriter::new(File::create(out.join(COEFFICIENTS_FILE))?);
    write_coefficient_csv(&mut w, &report.coefficients)?;
    w.flush()?;
    write_rounds(&out.join("rounds.csv"), &report)?;
    for r in &report.rounds {
        for (idx, why) in &r.fallbacks {
            warn!("round {}: skipped index {idx}: {why}", r.round);
        }
    }
    println!("basis indices: {:?}", basis.indices());
    let worst: Vec<String> = report.worst_losses().iter().map(|l| format!("{l:.3e}")).collect();
    println!("worst loss per round: {}", worst.join(" "));
    Ok(())
}

fn write_partial_history(path: &Path, history: &[(usize, f64)]) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,loss")?;
    for (epoch, loss) in history {
        writeln!(w, "{epoch},{}", fmt_f64(*loss))?;
    }
    w.flush()?;
    Ok(())
}

fn write_rounds(path: &Path, report: &GreedyReport) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "round,chosen,worst_loss")?;
    for r in &report.rounds {
        writeln!(w, "{},{},{}", r.round, r.chosen, r.worst_loss.map(fmt_f64).unwrap_or_default())?;
    }
    if let Some(f) = report.final_worst {
        writeln!(w, "final,,{}", fmt_f64(f))?;
    }
    w.flush()?;
    Ok(())
}

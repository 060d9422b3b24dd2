//! `spinent`: thermal entanglement of small Heisenberg clusters from the
//! command line.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use spinent::experiment::{self, ChiUnits, ExtractionOptions, SeriesMeta, ThresholdOptions};
use spinent::report::{self, ReportOptions};
use spinent::sweep::{self, GridFormat};
use spinent::ClusterSpec;

use config::{ExpConfig, GridConfig, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "spinent", version, about = "Thermal entanglement of small Heisenberg spin clusters")]
struct Cli {
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Built-in model (na2cu5si4o14).
    #[arg(long, global = true, conflicts_with = "model")]
    preset: Option<String>,

    /// Model JSON file (`n_spins`, `bonds` as [i, j, J] with 1-based sites, optional `g`, `subsystems`).
    #[arg(long, global = true, value_name = "FILE")]
    model: Option<PathBuf>,

    /// Override the model's g factor.
    #[arg(long, global = true)]
    g: Option<f64>,

    /// Worker threads for temperature loops and sweep cells.
    #[arg(long, global = true, env = "SPINENT_WORKERS")]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "SPINENT_OUT_DIR", value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct TempArgs {
    /// Lowest temperature (K).
    #[arg(long)]
    tmin: Option<f64>,
    /// Highest temperature (K).
    #[arg(long)]
    tmax: Option<f64>,
    /// Number of temperature points.
    #[arg(long)]
    tsteps: Option<usize>,
}

impl TempArgs {
    fn grid(&self) -> GridConfig {
        GridConfig {
            min: self.tmin,
            max: self.tmax,
            steps: self.tsteps,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectrum summary, symmetry check and the susceptibility curve.
    Validate {
        #[command(flatten)]
        temps: TempArgs,
        /// Field for the susceptibility curve and commutator check (Oe).
        #[arg(long)]
        field: Option<f64>,
    },
    /// Witness, pair EF and trimer-energy curves with their thresholds.
    ZeroField {
        #[command(flatten)]
        temps: TempArgs,
        /// Threshold tolerance (K).
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Threshold temperatures only, printed as JSON.
    Thresholds {
        #[command(flatten)]
        temps: TempArgs,
        /// Applied field (Oe).
        #[arg(long)]
        field: Option<f64>,
        /// Threshold tolerance (K).
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// (H, T) grid of entanglement quantities, critical lines and level crossings.
    Sweep {
        #[command(flatten)]
        temps: TempArgs,
        /// Lowest field (Oe).
        #[arg(long)]
        hmin: Option<f64>,
        /// Highest field (Oe).
        #[arg(long)]
        hmax: Option<f64>,
        /// Number of field points.
        #[arg(long)]
        hsteps: Option<usize>,
        /// Grid file format: csv or json.
        #[arg(long)]
        format: Option<GridFormat>,
        /// Upper field for the ground-state crossing search (Oe).
        #[arg(long)]
        crossing_hmax: Option<f64>,
    },
    /// Extract subsystem witnesses and pair EF from measured susceptibility.
    Exp {
        /// Susceptibility CSV (`temperature_K,chi_emu_per_mol`).
        #[arg(long, value_name = "FILE", conflicts_with = "synthesize")]
        input: Option<PathBuf>,
        /// Use model data on the temperature grid instead of a file.
        #[arg(long)]
        synthesize: bool,
        /// Units of the input values: emu-per-mol or reduced.
        #[arg(long)]
        units: Option<ChiUnits>,
        /// Field the data were measured in (Oe).
        #[arg(long)]
        field: Option<f64>,
        /// Spins per formula unit of the molar basis.
        #[arg(long)]
        moles_basis: Option<usize>,
        /// g factor used to reduce the data.
        #[arg(long)]
        g_assumed: Option<f64>,
        /// Drop data below this temperature (K).
        #[arg(long)]
        min_temperature: Option<f64>,
        /// Smoothing half-width for threshold location (K); 0 disables.
        #[arg(long)]
        smoothing: Option<f64>,
        /// Relative Gaussian noise for synthesized data.
        #[arg(long)]
        noise: Option<f64>,
        /// Seed for synthesized noise.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        temps: TempArgs,
    },
}

enum Outcome {
    Complete,
    Partial(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct RunContext {
    cfg: RunConfig,
    spec: ClusterSpec,
    out: PathBuf,
}

impl RunContext {
    fn write(&self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn temperature(&self, flags: &TempArgs, default: GridConfig) -> GridConfig {
        flags.grid().over(self.cfg.temperature.unwrap_or_default()).over(default)
    }

    /// Writes the fully resolved configuration next to the outputs.
    fn echo(&mut self) -> anyhow::Result<()> {
        self.cfg.model = Some(serde_json::from_str(&self.spec.to_json())?);
        self.cfg.g = Some(self.spec.g_factor());
        self.cfg.out_dir = Some(self.out.clone());
        self.write_json("effective_config.json", &self.cfg)?;
        Ok(())
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let spec = cfg.resolve_model(cli.preset.as_deref(), cli.model.as_deref(), cli.g)?;
    let workers = cli.workers.or(cfg.workers);
    if let Some(n) = workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        cfg.workers = Some(n);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure worker threads")?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("spinent-out"));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut ctx = RunContext { cfg, spec, out };

    match cli.command {
        Command::Validate { temps, field } => cmd_validate(&mut ctx, &temps, field),
        Command::ZeroField { temps, tolerance } => cmd_zero_field(&mut ctx, &temps, tolerance),
        Command::Thresholds { temps, field, tolerance } => cmd_thresholds(&mut ctx, &temps, field, tolerance),
        Command::Sweep {
            temps,
            hmin,
            hmax,
            hsteps,
            format,
            crossing_hmax,
        } => {
            let h = GridConfig {
                min: hmin,
                max: hmax,
                steps: hsteps,
            };
            cmd_sweep(&mut ctx, &temps, h, format, crossing_hmax)
        }
        Command::Exp {
            input,
            synthesize,
            units,
            field,
            moles_basis,
            g_assumed,
            min_temperature,
            smoothing,
            noise,
            seed,
            temps,
        } => {
            let flags = ExpConfig {
                input,
                synthesize: synthesize.then_some(true),
                units,
                field_oe: field,
                moles_basis,
                g_assumed,
                min_temperature,
                smoothing_half_width: smoothing,
                noise,
                seed,
            };
            cmd_exp(&mut ctx, flags, &temps)
        }
    }
}

fn cmd_validate(ctx: &mut RunContext, temps: &TempArgs, field: Option<f64>) -> anyhow::Result<Outcome> {
    let field = field.or(ctx.cfg.field_oe).unwrap_or(100.0);
    let grid = ctx.temperature(temps, GridConfig::full(2.0, 300.0, 150));
    ctx.cfg.field_oe = Some(field);
    ctx.cfg.temperature = Some(grid);
    let ts = grid.points("temperature")?;

    let summary = report::model_summary(&ctx.spec, field)?;
    let curve = report::susceptibility_curve(&ctx.spec, &ts, field)?;
    ctx.echo()?;
    ctx.write_json("model_summary.json", &summary)?;
    ctx.write("susceptibility.csv", &curve.to_csv_string())?;

    println!("spins: {}  states: {}  g: {}", summary.n_spins, summary.eigenvalues.len(), summary.g_factor);
    println!(
        "ground energy: {:.4} K  multiplicity: {}",
        summary.ground_energy, summary.ground_multiplicity
    );
    let mut levels: Vec<(f64, usize)> = Vec::new();
    for &e in &summary.eigenvalues {
        match levels.last_mut() {
            Some((v, n)) if (e - *v).abs() < 1e-6 * v.abs().max(1.0) => *n += 1,
            _ => levels.push((e, 1)),
        }
    }
    let shown: Vec<String> = levels.iter().take(6).map(|(e, n)| format!("{e:.3}×{n}")).collect();
    println!("lowest levels (K): {}", shown.join(", "));
    println!(
        "‖[H, S^z_total]‖ at {field} Oe: {:.2e}  eigenvector residual: {:.2e}",
        summary.commutator_norm, summary.orthonormality_residual
    );
    println!("T (K)      T·χ̃ at {field} Oe");
    let tc = curve.column("t_chi").expect("t_chi column");
    let stride = (ts.len() / 10).max(1);
    for k in (0..ts.len()).step_by(stride) {
        println!("{:<10.2} {:.5}", ts[k], tc[k]);
    }
    println!("wrote {}", ctx.out.display());
    Ok(Outcome::Complete)
}

fn report_options(ctx: &mut RunContext, temps: &TempArgs, field: Option<f64>, tolerance: Option<f64>) -> anyhow::Result<ReportOptions> {
    let grid = ctx.temperature(temps, GridConfig::full(1.0, 400.0, 400));
    let defaults = ReportOptions::default();
    let field = field.or(ctx.cfg.field_oe).unwrap_or(0.0);
    let tolerance = tolerance.or(ctx.cfg.tolerance).unwrap_or(defaults.tolerance);
    ctx.cfg.temperature = Some(grid);
    ctx.cfg.field_oe = Some(field);
    ctx.cfg.tolerance = Some(tolerance);
    let (Some(t_min), Some(t_max), Some(steps)) = (grid.min, grid.max, grid.steps) else {
        bail!("temperature grid is incomplete");
    };
    Ok(ReportOptions {
        t_min,
        t_max,
        steps,
        field_oe: field,
        tolerance,
    })
}

fn fmt_threshold(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |t| format!("{t:.2} K"))
}

fn cmd_zero_field(ctx: &mut RunContext, temps: &TempArgs, tolerance: Option<f64>) -> anyhow::Result<Outcome> {
    let opts = report_options(ctx, temps, None, tolerance)?;
    let r = report::zero_field_report(&ctx.spec, &opts)?;
    ctx.echo()?;
    ctx.write("zero_field.csv", &r.curve.to_csv_string())?;
    ctx.write_json("zero_field.json", &r.curve)?;
    ctx.write_json("thresholds.json", &r.thresholds)?;
    let th = &r.thresholds;
    println!("whole-cluster witness:   {}", fmt_threshold(th.t_ew5));
    println!("trimer witness:          {}", fmt_threshold(th.t_ew3));
    println!("pair EF:                 {}", fmt_threshold(th.t_ef_pair));
    println!("trimer-energy criterion: {}", fmt_threshold(th.t_genuine));
    println!("wrote {}", ctx.out.display());
    Ok(Outcome::Complete)
}

fn cmd_thresholds(ctx: &mut RunContext, temps: &TempArgs, field: Option<f64>, tolerance: Option<f64>) -> anyhow::Result<Outcome> {
    let opts = report_options(ctx, temps, field, tolerance)?;
    let r = report::zero_field_report(&ctx.spec, &opts)?;
    ctx.echo()?;
    ctx.write_json("thresholds.json", &r.thresholds)?;
    let short: BTreeMap<&str, Option<f64>> = [
        ("t_ew5", r.thresholds.t_ew5),
        ("t_ew3", r.thresholds.t_ew3),
        ("t_ef_pair", r.thresholds.t_ef_pair),
        ("t_genuine", r.thresholds.t_genuine),
    ]
    .into_iter()
    .collect();
    println!("{}", serde_json::to_string_pretty(&short)?);
    Ok(Outcome::Complete)
}

fn cmd_sweep(
    ctx: &mut RunContext,
    temps: &TempArgs,
    h_flags: GridConfig,
    format: Option<GridFormat>,
    crossing_hmax: Option<f64>,
) -> anyhow::Result<Outcome> {
    let t_grid = ctx.temperature(temps, GridConfig::full(1.0, 400.0, 50));
    let h_grid = h_flags
        .over(ctx.cfg.field.unwrap_or_default())
        .over(GridConfig::full(0.0, 1e4, 50));
    let format = format.or(ctx.cfg.format).unwrap_or(GridFormat::Csv);
    let crossing_hmax = crossing_hmax.or(ctx.cfg.crossing_h_max).unwrap_or(1e7);
    ctx.cfg.temperature = Some(t_grid);
    ctx.cfg.field = Some(h_grid);
    ctx.cfg.format = Some(format);
    ctx.cfg.crossing_h_max = Some(crossing_hmax);
    let ts = t_grid.points("temperature")?;
    let hs = h_grid.points("field")?;

    let grid = sweep::run_ht_sweep(&ctx.spec, &ts, &hs, ctx.cfg.workers)?;
    let crossings = sweep::ground_state_crossing_fields(&ctx.spec, crossing_hmax)?;
    let mut lines = BTreeMap::new();
    for q in sweep::QUANTITIES {
        lines.insert(q, sweep::critical_line(&grid, q)?);
    }
    ctx.echo()?;
    let path = ctx.out.join(format!("sweep.{format}"));
    sweep::serialize_grid(&grid, format, &path)?;
    ctx.write_json("critical_lines.json", &lines)?;
    ctx.write_json("crossings.json", &crossings)?;

    println!("{} × {} cells, g = {}", ts.len(), hs.len(), ctx.spec.g_factor());
    if crossings.fields_oe.is_empty() {
        println!("no ground-state level crossing below {crossing_hmax} Oe");
    }
    for (k, h) in crossings.fields_oe.iter().enumerate() {
        println!(
            "ground-state crossing at {h:.1} Oe: S^z {} -> {}",
            crossings.ground_labels[k],
            crossings.ground_labels[k + 1]
        );
    }
    println!("wrote {}", ctx.out.display());
    for f in &grid.failures {
        eprintln!("failed cell T = {} K, H = {} Oe: {}", f.t, f.h, f.message);
    }
    if grid.failures.is_empty() {
        Ok(Outcome::Complete)
    } else {
        Ok(Outcome::Partial(format!(
            "{} of {} cells failed; see the grid file",
            grid.failures.len(),
            grid.cells.len()
        )))
    }
}

fn cmd_exp(ctx: &mut RunContext, flags: ExpConfig, temps: &TempArgs) -> anyhow::Result<Outcome> {
    let file = ctx.cfg.exp.clone().unwrap_or_default();
    let synthesize = flags.input.is_none() && flags.synthesize.or(file.synthesize).unwrap_or(false);
    let input = if flags.synthesize == Some(true) { None } else { flags.input.or(file.input) };
    let defaults = SeriesMeta::default();
    let e = ExpConfig {
        input: input.clone(),
        synthesize: Some(synthesize),
        units: flags.units.or(file.units).or(Some(ChiUnits::EmuPerMol)),
        field_oe: flags.field_oe.or(file.field_oe).or(Some(defaults.applied_field_oe)),
        moles_basis: flags.moles_basis.or(file.moles_basis).or(Some(ctx.spec.n_spins())),
        g_assumed: flags.g_assumed.or(file.g_assumed).or(Some(ctx.spec.g_factor())),
        min_temperature: flags
            .min_temperature
            .or(file.min_temperature)
            .or(Some(experiment::DEFAULT_MIN_TEMPERATURE)),
        smoothing_half_width: flags
            .smoothing_half_width
            .or(file.smoothing_half_width)
            .or(Some(experiment::DEFAULT_SMOOTHING_HALF_WIDTH)),
        noise: flags.noise.or(file.noise).or(Some(0.0)),
        seed: flags.seed.or(file.seed).or(Some(0)),
    };
    let field = e.field_oe.unwrap_or_default();

    let series = if synthesize {
        let grid = ctx.temperature(temps, GridConfig::full(2.0, 400.0, 399));
        ctx.cfg.temperature = Some(grid);
        let ts = grid.points("temperature")?;
        let s = experiment::synthesize_dataset(&ctx.spec, &ts, field, e.noise.unwrap_or(0.0), e.seed.unwrap_or(0))?;
        s.write_csv(&ctx.out.join("synthetic_input.csv"))?;
        s
    } else {
        let Some(path) = &input else {
            bail!("exp needs --input FILE or --synthesize");
        };
        let meta = SeriesMeta {
            applied_field_oe: field,
            moles_basis: e.moles_basis.unwrap_or_default(),
            g_assumed: e.g_assumed.unwrap_or_default(),
        };
        experiment::load_csv(path, e.units.unwrap_or(ChiUnits::EmuPerMol), meta)
            .with_context(|| format!("cannot ingest {}", path.display()))?
    };
    ctx.cfg.exp = Some(e.clone());

    let opts = ExtractionOptions {
        min_temperature: e.min_temperature.unwrap_or_default(),
        threshold: ThresholdOptions {
            smoothing_half_width: e.smoothing_half_width.unwrap_or_default(),
            ..Default::default()
        },
    };
    let report = experiment::extract(&ctx.spec, &series, &opts)?;
    ctx.echo()?;
    report.write_files(&ctx.out)?;

    println!(
        "{} rows read, {} below {} K excluded, {} used",
        report.raw_row_count,
        report.excluded_low_temperature.len(),
        opts.min_temperature,
        report.temperatures.len()
    );
    for w in &report.witnesses {
        println!("{:<10} threshold: {}", w.name, fmt_threshold(w.threshold.value()));
    }
    for p in &report.pair_ef {
        println!("{:<10} threshold: {}", p.name, fmt_threshold(p.threshold.value()));
    }
    println!("wrote {}", ctx.out.display());
    Ok(Outcome::Complete)
}

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cf_power_cli::config::{
    load_config, preset, to_toml, ConfigError, ExperimentConfig, PRESET_NAMES,
};
use cf_power_cli::reproduce::{report_thresholds, reproduce};
use cf_power_cli::sweep::{dump_policies, run_sweep, sig6, write_csv, Cell, SweepRow};
use clap::{Parser, Subcommand};

const EXIT_FAILED_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CELL_ERROR: u8 = 3;

/// Power allocation experiments for compute-and-forward over fading channels.
#[derive(Parser, Debug)]
#[command(name = "cfpower", version, about)]
struct Cli {
    /// Experiment configuration file (TOML)
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in preset to use instead of a config file
    #[arg(long, global = true)]
    preset: Option<String>,

    /// CSV output path (overrides the config's `output`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Directory receiving one JSON policy file per row
    #[arg(long, global = true)]
    dump_policies: Option<PathBuf>,

    /// Seed for every random choice (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print nothing but errors
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve at a single power budget
    Solve {
        #[arg(long)]
        pbar: f64,
    },
    /// Sweep the configured budget grid
    Sweep,
    /// Large-budget thresholds (every discrete preset unless a model is given)
    Thresholds,
    /// Run a preset on its grid and check its golden values
    Reproduce { preset: String },
    /// Print a preset as a config file
    ShowPreset { preset: String },
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(ConfigError::Invalid {
                field: "--config".into(),
                line: None,
                message: "give a config file or --preset".into(),
            })
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out.is_some() {
        cfg.output.clone_from(&cli.out);
    }
    Ok(cfg)
}

fn print_rows(rows: &[SweepRow]) {
    println!(
        "{:>9}  {:<4} {:>10}  {:<16} {:>10}  error",
        "pbar", "alg", "rate", "active", "multiplier"
    );
    for r in rows {
        println!(
            "{:>9}  {:<4} {:>10}  {:<16} {:>10}  {}",
            sig6(r.pbar),
            r.algorithm_id.to_string(),
            r.expected_rate.map(sig6).unwrap_or_default(),
            r.active_set,
            r.multiplier.map(sig6).unwrap_or_default(),
            r.error.as_deref().unwrap_or(""),
        );
    }
}

fn write_outputs(
    cells: &[Cell],
    csv_path: Option<&Path>,
    dump_dir: Option<&Path>,
    quiet: bool,
) -> io::Result<()> {
    let rows: Vec<SweepRow> = cells.iter().map(|c| c.row.clone()).collect();
    if let Some(path) = csv_path {
        write_csv(&rows, BufWriter::new(File::create(path)?))?;
    }
    if let Some(dir) = dump_dir {
        dump_policies(cells, dir)?;
    }
    if !quiet {
        print_rows(&rows);
    }
    Ok(())
}

fn sweep(cli: &Cli, mut cfg: ExperimentConfig, pbar: Option<f64>) -> Result<ExitCode, ConfigError> {
    if let Some(p) = pbar {
        cfg.pbar_grid = vec![p];
    }
    let cells = run_sweep(&cfg)?;
    if let Err(e) = write_outputs(
        &cells,
        cfg.output.as_deref(),
        cli.dump_policies.as_deref(),
        cli.quiet,
    ) {
        eprintln!("error: cannot write output: {e}");
        return Ok(ExitCode::from(EXIT_FAILED_CHECK));
    }
    let failed = cells.iter().filter(|c| c.row.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", cells.len());
        return Ok(ExitCode::from(EXIT_CELL_ERROR));
    }
    Ok(ExitCode::SUCCESS)
}

fn thresholds(cli: &Cli) -> Result<ExitCode, ConfigError> {
    let targets: Vec<(String, ExperimentConfig)> = if cli.config.is_some() || cli.preset.is_some() {
        let name = cli.preset.clone().unwrap_or_else(|| "config".into());
        vec![(name, load(cli)?)]
    } else {
        ["example1", "example2", "example3"]
            .iter()
            .map(|n| Ok((n.to_string(), preset(n)?)))
            .collect::<Result<_, ConfigError>>()?
    };
    let rows = targets
        .iter()
        .map(|(name, cfg)| report_thresholds(name, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &cli.out {
        let result = File::create(path).map_err(csv::Error::from).and_then(|f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["model", "pbar_threshold", "multiplier"])?;
            for r in &rows {
                w.write_record([r.name.clone(), sig6(r.pbar), sig6(r.multiplier)])?;
            }
            w.flush().map_err(csv::Error::from)
        });
        if let Err(e) = result {
            eprintln!("error: cannot write {}: {e}", path.display());
            return Ok(ExitCode::from(EXIT_FAILED_CHECK));
        }
    }
    if !cli.quiet {
        println!("{:<10} {:>10} {:>12}", "model", "threshold", "multiplier");
        for r in &rows {
            println!(
                "{:<10} {:>10} {:>12}",
                r.name,
                sig6(r.pbar),
                sig6(r.multiplier)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_reproduce(cli: &Cli, name: &str) -> Result<ExitCode, ConfigError> {
    let rep = reproduce(name, cli.seed)?;
    if let Err(e) = write_outputs(
        &rep.cells,
        cli.out.as_deref(),
        cli.dump_policies.as_deref(),
        true,
    ) {
        eprintln!("error: cannot write output: {e}");
        return Ok(ExitCode::from(EXIT_FAILED_CHECK));
    }
    if !cli.quiet {
        println!(
            "{name}: {} budgets × {} algorithms",
            rep.config.pbar_grid.len(),
            rep.config.algorithms.len()
        );
        for c in &rep.checks {
            println!(
                "{:<4} {:<28} expected {:<48} observed {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.observed
            );
        }
    }
    Ok(if rep.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED_CHECK)
    })
}

fn run(cli: &Cli) -> Result<ExitCode, ConfigError> {
    match &cli.command {
        Command::Solve { pbar } => sweep(cli, load(cli)?, Some(*pbar)),
        Command::Sweep => sweep(cli, load(cli)?, None),
        Command::Thresholds => thresholds(cli),
        Command::Reproduce { preset } => run_reproduce(cli, preset),
        Command::ShowPreset { preset: name } => {
            print!("{}", to_toml(&preset(name)?)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("config error: {e}");
            if matches!(e, ConfigError::UnknownPreset(_)) {
                eprintln!("presets: {}", PRESET_NAMES.join(", "));
            }
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lyaplab::harness::report::format_ext;
use lyaplab::harness::{run_with_workers, ExperimentConfig, ExperimentKind, ExperimentReport, OutputFormat, Table};
use lyaplab::spectrum::{ergodic_spectrum_estimate, periodic_spectrum};
use lyaplab::symbolic::{anosov_close, enumerate_periodic_orbits, first_recurrence, parse_word, word_string};
use lyaplab::symbolic::PeriodicOrbit;

#[derive(Parser)]
#[command(name = "lyaplab", version, about = "Periodic approximation of Lyapunov exponents over shift spaces")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (results do not depend on the count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimate of the ergodic spectrum (knobs n, samples).
    Estimate,
    /// Exact spectra at periodic orbits up to knobs.max_period, or at one orbit.
    Periodic {
        /// Orbit word such as 0011; all orbits when omitted.
        #[arg(long)]
        word: Option<String>,
    },
    /// Close first recurrences of seeded points into periodic orbits and check the shadowing bound.
    Close {
        /// Recurrence level k (radius θ^k); defaults to knobs.levels.
        #[arg(long)]
        level: Option<u32>,
        /// Number of seeded points; defaults to knobs.samples.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Adapted-norm property suite (the norm_properties experiment).
    VerifyNorms,
    /// Run one experiment pipeline; without --config the stock configuration is used.
    Experiment {
        #[arg(value_parser = parse_kind)]
        kind: ExperimentKind,
    },
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    ExperimentKind::parse(s).map_err(|e| e.to_string())
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli, fallback: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, fallback) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(kind)) => {
            let Some(seed) = cli.seed else {
                bail!("a seed is mandatory: pass --seed or a --config with `seed`");
            };
            ExperimentConfig::default_for(kind, seed)
        }
        (None, None) => bail!("this command needs --config <path>"),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = Some(dir.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .context("building the worker pool")?
            .install(f),
    }
}

/// Write `text` to `<dir>/<stem>.<ext>` or stdout.
fn emit(cfg: &ExperimentConfig, stem: &str, text: &str) -> Result<()> {
    let ext = match cfg.output.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    match &cfg.output.dir {
        Some(dir) => {
            let dir = Path::new(dir);
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_table(cfg: &ExperimentConfig, stem: &str, table: &Table) -> Result<()> {
    let text = match cfg.output.format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => table.to_json() + "\n",
    };
    emit(cfg, stem, &text)
}

fn gamma_columns(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("gamma_{i}")).collect()
}

fn table(columns: Vec<String>) -> Table {
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    Table::new(&cols)
}

fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Estimate => estimate(cli),
        Command::Periodic { word } => periodic(cli, word.as_deref()),
        Command::Close { level, points } => close(cli, *level, *points),
        Command::VerifyNorms => {
            let mut cfg = load_config(cli, None)?;
            cfg.kind = ExperimentKind::NormProperties;
            experiment(cli, cfg)
        }
        Command::Experiment { kind } => {
            let mut cfg = load_config(cli, Some(*kind))?;
            cfg.kind = *kind;
            experiment(cli, cfg)
        }
    }
}

fn estimate(cli: &Cli) -> Result<Outcome> {
    let cfg = load_config(cli, None)?;
    let (a, shift, law) = (cfg.cocycle()?, cfg.shift()?, cfg.law()?);
    let k = &cfg.knobs;
    let est = in_pool(cli.workers, || Ok(ergodic_spectrum_estimate(&a, &shift, &law, k.n, k.samples, cfg.seed)?))?;
    let d = est.values.len();
    let mut cols = gamma_columns(d);
    cols.extend((1..=d).map(|i| format!("se_{i}")));
    cols.extend(["n_steps".into(), "samples".into(), "seed".into()]);
    let mut t = table(cols);
    let mut row: Vec<String> = est.values.iter().map(|&v| format_ext(v)).collect();
    row.extend(est.std_err.iter().map(|s| s.map(format_ext).unwrap_or_default()));
    row.extend([est.n_steps.to_string(), est.n_samples.to_string(), cfg.seed.to_string()]);
    t.push(row);
    emit_table(&cfg, &format!("estimate-{}", cfg.seed), &t)?;
    Ok(Outcome::Pass)
}

fn periodic(cli: &Cli, word: Option<&str>) -> Result<Outcome> {
    let cfg = load_config(cli, None)?;
    let (a, shift) = (cfg.cocycle()?, cfg.shift()?);
    let orbits = match word {
        Some(w) => {
            let w = parse_word(w)?;
            shift.check_cyclic(&w)?;
            vec![PeriodicOrbit::from_word(&w)?]
        }
        None => enumerate_periodic_orbits(&shift, cfg.knobs.max_period)?,
    };
    let spectra = in_pool(cli.workers, || {
        use rayon::prelude::*;
        Ok(orbits.par_iter().map(|p| periodic_spectrum(&a, p)).collect::<lyaplab::Result<Vec<_>>>()?)
    })?;
    let mut cols = vec!["word".to_string(), "period".into()];
    cols.extend(gamma_columns(a.dim()));
    cols.push("seed".into());
    let mut t = table(cols);
    for (p, s) in orbits.iter().zip(&spectra) {
        let mut row = vec![word_string(p.word()), p.period().to_string()];
        row.extend(s.values().iter().map(|&v| format_ext(v)));
        row.push(cfg.seed.to_string());
        t.push(row);
    }
    emit_table(&cfg, &format!("periodic-{}", cfg.seed), &t)?;
    Ok(Outcome::Pass)
}

fn close(cli: &Cli, level: Option<u32>, points: Option<usize>) -> Result<Outcome> {
    let cfg = load_config(cli, None)?;
    let (shift, law) = (cfg.shift()?, cfg.law()?);
    let level = level.unwrap_or(cfg.knobs.levels);
    let points = points.unwrap_or(cfg.knobs.samples);
    let rho = shift.theta().powi(level as i32);
    let max_n = cfg.knobs.max_return;
    let mut t = table(
        ["seed", "index", "n", "orbit", "recurrence_distance", "worst_ratio", "holds"]
            .map(String::from)
            .to_vec(),
    );
    let mut all_hold = true;
    for (i, x) in lyaplab::spectrum::sample_points(&law, points, cfg.seed).into_iter().enumerate() {
        let Some(n) = first_recurrence(&x, rho, 1, max_n, &shift) else {
            bail!("point {i} does not return within {max_n} steps at level {level}");
        };
        let cert = anosov_close(&x, n as usize, &shift)?;
        let holds = cert.holds() && cert.holds_exact();
        all_hold &= holds;
        t.push(vec![
            cfg.seed.to_string(),
            i.to_string(),
            n.to_string(),
            word_string(cert.orbit.word()),
            format_ext(cert.recurrence_distance),
            format_ext(cert.worst_ratio()),
            holds.to_string(),
        ]);
    }
    emit_table(&cfg, &format!("close-{}", cfg.seed), &t)?;
    Ok(if all_hold { Outcome::Pass } else { Outcome::Fail })
}

fn experiment(cli: &Cli, cfg: ExperimentConfig) -> Result<Outcome> {
    let report: ExperimentReport = run_with_workers(&cfg, cli.workers)?;
    let text = match cfg.output.format {
        OutputFormat::Json => report.to_json() + "\n",
        OutputFormat::Csv => report.to_csv(),
    };
    emit(&cfg, &format!("{}-{}", cfg.kind.name(), cfg.seed), &text)?;
    for v in &report.verdicts {
        eprintln!(
            "[{}] {} (criterion {}): margin {}",
            if v.passed { "pass" } else { "FAIL" },
            v.name,
            v.criterion,
            v.margin.to_text()
        );
    }
    Ok(if report.all_pass() { Outcome::Pass } else { Outcome::Fail })
}

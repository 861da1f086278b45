use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nafdyn::estimators::Reduction;
use nafdyn::runner::{self, DvrConfig, RunConfig, SweepJob, VerifyOptions, VerifySuite};

#[derive(Parser)]
#[command(name = "nafdyn", version, about = "Nonadiabatic field dynamics with triangle-window mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "NAFDYN_WORKERS")]
    workers: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed-order reductions (byte-identical output for any worker count).
    #[arg(long)]
    bitwise: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate an ensemble and write the requested estimates.
    Run(Overrides),
    /// Run an oracle suite: windows, frozen, sqz, dvr-sanity or all.
    Verify {
        suite: String,
        /// Monte-Carlo samples (suite default when absent).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Repeat a run (or a DVR job) for each value of one parameter.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Dotted parameter path, e.g. `model.p0`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Treat the config as a DVR job.
        #[arg(long)]
        dvr: bool,
    },
    /// Grid wavepacket reference for a one-dimensional model.
    Dvr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_value(s: &str) -> toml::Value {
    let s = s.trim();
    if let Ok(i) = s.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(x) = s.parse::<f64>() {
        toml::Value::Float(x)
    } else if let Ok(b) = s.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(s.to_string())
    }
}

fn run(o: &Overrides) -> nafdyn::Result<ExitCode> {
    let mut cfg = RunConfig::load(&o.config)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    if let Some(out) = &o.out {
        cfg.output_dir = out.clone();
    }
    if o.bitwise {
        cfg.reduction = Reduction::Bitwise;
    }
    let rep = runner::run(&cfg)?;
    let m = &rep.manifest;
    println!(
        "{} {} trajectories ({} failed) in {:.2} s -> {}",
        m.method,
        m.ensemble,
        m.failed,
        m.wall_time_s,
        rep.output_dir.display()
    );
    for o in &m.outputs {
        println!("  {}", o.file);
    }
    for s in &m.scattering {
        println!("  {} state {}: {:.5}", s.channel, s.state, s.probability);
    }
    for r in &m.rates {
        println!("  flux-flux rate {:.6e} (converged: {})", r.rate, r.converged);
    }
    if let Err(e) = rep.check() {
        eprintln!("error: {e}");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(suite: &str, samples: Option<usize>, seed: u64) -> nafdyn::Result<ExitCode> {
    let suites: Vec<VerifySuite> = if suite == "all" {
        VerifySuite::ALL.to_vec()
    } else {
        vec![suite.parse()?]
    };
    let mut ok = true;
    for s in suites {
        let rep = runner::verify(s, VerifyOptions { samples, seed })?;
        println!("[{}] samples = {}", s.label(), rep.samples);
        for c in &rep.checks {
            println!("{c}");
        }
        ok &= rep.pass();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn sweep(o: &Overrides, param: &str, values: &[String], dvr: bool) -> nafdyn::Result<ExitCode> {
    let text = std::fs::read_to_string(&o.config)
        .map_err(|e| nafdyn::Error::Config(format!("cannot read {}: {e}", o.config.display())))?;
    let mut doc: toml::Table = toml::from_str(&text).map_err(|e| nafdyn::Error::Config(e.to_string()))?;
    if !dvr {
        if let Some(s) = o.seed {
            doc.insert("seed".into(), toml::Value::Integer(s as i64));
        }
        if let Some(w) = o.workers {
            doc.insert("workers".into(), toml::Value::Integer(w as i64));
        }
        if o.bitwise {
            doc.insert("reduction".into(), toml::Value::String("bitwise".into()));
        }
    }
    let text = toml::to_string(&doc).map_err(|e| nafdyn::Error::Config(e.to_string()))?;
    let values: Vec<toml::Value> = values.iter().map(|v| parse_value(v)).collect();
    let job = if dvr { SweepJob::Dvr } else { SweepJob::Ensemble };
    let rep = runner::sweep(&text, o.config.parent(), job, param, &values, o.out.as_deref())?;
    for p in &rep.points {
        println!("{param} = {} -> {}", p.value, p.output_dir.display());
    }
    println!("{} rows -> {}", rep.rows, rep.combined.display());
    Ok(ExitCode::SUCCESS)
}

fn dvr(config: &PathBuf, out: Option<&PathBuf>) -> nafdyn::Result<ExitCode> {
    let mut cfg = DvrConfig::load(config)?;
    if let Some(out) = out {
        cfg.output_dir = out.clone();
    }
    let rep = runner::run_dvr(&cfg)?;
    let m = &rep.manifest;
    println!("{} on {} points (dR = {:.4}) to t = {}", m.model, m.grid.n, m.dr, m.final_time);
    for (k, (t, r)) in m.transmission.iter().zip(&m.reflection).enumerate() {
        println!("  state {}: transmission {:.6} reflection {:.6}", k + 1, t, r);
    }
    if let Some(c) = &m.convergence {
        println!("  grid convergence: refined {:.2e}, enlarged {:.2e}", c.refined, c.enlarged);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(o) => run(o),
        Command::Verify { suite, samples, seed } => verify(suite, *samples, *seed),
        Command::Sweep { overrides, param, values, dvr: is_dvr } => sweep(overrides, param, values, *is_dvr),
        Command::Dvr { config, out } => dvr(config, out.as_ref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

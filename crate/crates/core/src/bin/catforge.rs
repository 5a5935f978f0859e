use std::path::PathBuf;
use std::process::ExitCode;

use catforge::config::{parse_override, ConfigError, Mode, Preset, RunConfig};
use catforge::run::{run, RunError};
use clap::Parser;

/// Mechanical cat-state simulations: closed and open dynamics, tomography
/// and parameter sweeps.
#[derive(Parser, Debug)]
#[command(name = "catforge", version)]
struct Cli {
    /// closed, open, wigner, quadrature, sweep or detect-times
    mode: Mode,
    /// Flat `key = value` configuration document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Figure preset applied before the document.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory [default: output_dir key, then $CATFORGE_OUT, then ./catforge-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for scans.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(cli: &Cli) -> Result<RunConfig, RunError> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let preset = cli.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let mut overrides = vec![("mode".to_string(), cli.mode.name().to_string())];
    for s in &cli.set {
        overrides.push(parse_override(s)?);
    }
    Ok(RunConfig::resolve(&text, preset, &overrides)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|cfg| {
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .or_else(|| std::env::var_os("CATFORGE_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("catforge-out"));
        run(&cfg, &out, cli.workers).map(|runs| (out, runs))
    });
    match result {
        Ok((out, runs)) => {
            for r in runs {
                let name = if r.label.is_empty() { "run" } else { r.label.as_str() };
                let shown: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("{name}: {}", shown.join(" "));
            }
            println!("outputs in {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let RunError::Config(ConfigError::Missing(_)) = e {
                eprintln!("hint: start from a preset, e.g. `--preset fig2`");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

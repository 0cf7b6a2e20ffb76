//! `fcl` — command-line front end for the fold-crossing laboratory.
//!
//! Exit codes: 0 = all checks passed, 1 = a verification failed or a numeric
//! routine broke down, 2 = usage or configuration error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fcl::config::Config;
use fcl::error::FclError;

use commands::Ctx;
use output::RunManifest;

#[derive(Parser)]
#[command(
    name = "fcl",
    version,
    about = "Fold-crossing transition maps for three time-scale systems"
)]
struct Cli {
    /// TOML configuration file (defaults to the built-in unit system).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the angular time-scale exponent alpha.
    #[arg(long, global = true, value_name = "N")]
    alpha: Option<u32>,

    /// Override the perturbation parameter eps.
    #[arg(long, global = true, value_name = "X")]
    eps: Option<f64>,

    /// Grid of eps values: "a:b:n" (linear) or "a:b:n(log)" / "a:b:n:log".
    #[arg(long = "eps-grid", global = true, value_name = "SPEC")]
    eps_grid: Option<String>,

    /// Entry radius on the entry section.
    #[arg(long = "entry-r", global = true, value_name = "X")]
    entry_r: Option<f64>,

    /// Output directory for CSV/SVG artifacts (env FCL_OUT takes precedence).
    #[arg(long, global = true, value_name = "DIR", default_value = "fcl-out")]
    out: PathBuf,

    /// Worker threads for grid scans (0 = rayon default).
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the universal drift constant Omega0 with its residuals.
    Omega0,
    /// Compute one fold transition: entry section to exit section.
    Transition,
    /// Sweep the transition map over an eps grid (parallel, deterministic).
    Scan,
    /// Check the transition-map asymptotics: drift law, rotation counts,
    /// contraction.
    Verify,
    /// Check the rescaling machinery: chart round-trips, orbit consistency,
    /// corner spectrum.
    ChartsVerify,
    /// Trace the distinguished Riccati solution and its right asymptote.
    Riccati {
        /// Coefficient a of r2' = -a y2 + b r2^2.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Coefficient b of r2' = -a y2 + b r2^2.
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Coefficient c of y2' = -c.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Half-width L of the r2 window [-L, L] (L >= 5).
        #[arg(long = "L", default_value_t = 20.0)]
        l: f64,
    },
    /// Reduce a forced Lienard oscillator to normal form and verify the
    /// exit-drift law.
    Lienard,
    /// Verify the tipping-window model: folded singularities, jump angles,
    /// transit times.
    Tipping,
    /// Certify the fold of limit cycles of the layer-family Poincare map.
    Poincare,
}

fn parse_eps_grid(spec: &str) -> Result<Vec<f64>, FclError> {
    let bad = |msg: &str| FclError::Config(format!("config parse error: eps-grid: {msg} (got {spec:?})"));
    let (body, mut log) = match spec.strip_suffix("(log)") {
        Some(b) => (b, true),
        None => (spec, false),
    };
    let parts: Vec<&str> = body.split(':').collect();
    let parts = if parts.len() == 4 && parts[3] == "log" {
        log = true;
        &parts[..3]
    } else {
        &parts[..]
    };
    if parts.len() != 3 {
        return Err(bad("expected a:b:n, a:b:n:log, or a:b:n(log)"));
    }
    let a: f64 = parts[0].parse().map_err(|_| bad("bad start value"))?;
    let b: f64 = parts[1].parse().map_err(|_| bad("bad end value"))?;
    let n: usize = parts[2].parse().map_err(|_| bad("bad point count"))?;
    if n < 1 {
        return Err(bad("need at least 1 point"));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(bad("eps endpoints must be positive"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let f = i as f64 / (n - 1) as f64;
        grid.push(if log {
            (a.ln() + f * (b.ln() - a.ln())).exp()
        } else {
            a + f * (b - a)
        });
    }
    Ok(grid)
}

fn run(cli: Cli) -> Result<bool, FclError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default_unit(cli.alpha.unwrap_or(2), cli.eps.unwrap_or(0.01)),
    };
    let eps_grid = cli.eps_grid.as_deref().map(parse_eps_grid).transpose()?;

    let out = match std::env::var_os("FCL_OUT") {
        Some(dir) => PathBuf::from(dir),
        None => cli.out.clone(),
    };

    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| FclError::Config(format!("cannot size thread pool: {e}")))?;
    }

    let command = match &cli.cmd {
        Cmd::Omega0 => "omega0",
        Cmd::Transition => "transition",
        Cmd::Scan => "scan",
        Cmd::Verify => "verify",
        Cmd::ChartsVerify => "charts-verify",
        Cmd::Riccati { .. } => "riccati",
        Cmd::Lienard => "lienard",
        Cmd::Tipping => "tipping",
        Cmd::Poincare => "poincare",
    };
    let mut overrides = Vec::new();
    if let Some(a) = cli.alpha {
        overrides.push(("alpha".to_string(), a.to_string()));
    }
    if let Some(e) = cli.eps {
        overrides.push(("eps".to_string(), e.to_string()));
    }
    if let Some(g) = &cli.eps_grid {
        overrides.push(("eps-grid".to_string(), g.clone()));
    }
    if let Some(r) = cli.entry_r {
        overrides.push(("entry-r".to_string(), r.to_string()));
    }
    if let Cmd::Riccati { a, b, c, l } = &cli.cmd {
        overrides.push(("riccati".to_string(), format!("a={a} b={b} c={c} L={l}")));
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config_path: cli
            .config
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "(built-in unit system)".to_string()),
        overrides,
        out_dir: out.display().to_string(),
        seed: 0x5EED_0F01,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };

    let ctx = Ctx {
        cfg,
        alpha: cli.alpha,
        eps: cli.eps,
        eps_grid,
        entry_r: cli.entry_r,
        out,
        manifest,
    };

    match cli.cmd {
        Cmd::Omega0 => commands::cmd_omega0(&ctx),
        Cmd::Transition => commands::cmd_transition(&ctx),
        Cmd::Scan => commands::cmd_scan(&ctx),
        Cmd::Verify => commands::cmd_verify(&ctx),
        Cmd::ChartsVerify => commands::cmd_charts_verify(&ctx),
        Cmd::Riccati { a, b, c, l } => commands::cmd_riccati(&ctx, a, b, c, l),
        Cmd::Lienard => commands::cmd_lienard(&ctx),
        Cmd::Tipping => commands::cmd_tipping(&ctx),
        Cmd::Poincare => commands::cmd_poincare(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("fcl: verification failed");
            ExitCode::from(1)
        }
        Err(e @ FclError::Config(_)) => {
            eprintln!("fcl: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("fcl: {e}");
            ExitCode::from(1)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sparse_bandit::harness::config::{parse_override_value, set_dotted_key};
use sparse_bandit::harness::experiment::trial_theta;
use sparse_bandit::harness::{export_csv, run_experiment, ExperimentConfig, ExperimentResult};
use sparse_bandit::oracles::{
    greedy_factor, submodularity_ratio, RatioMode, EXHAUSTIVE_RATIO_MAX_DIM,
};
use sparse_bandit::{verify, Error, Result};

#[derive(Parser)]
#[command(
    name = "sparse-bandit",
    version,
    about = "Sparse linear bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV files
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in oracle and invariant checks
    Verify,
    /// Run one experiment per value of a single config key
    Sweep {
        /// Dotted key, e.g. `problem.sigma`
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        config: PathBuf,
        /// Parent directory for the per-value outputs
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Print the submodularity-ratio certificate for the first trial's parameter
    CertifyRatio {
        config: PathBuf,
        /// Sampled pairs when the dimension is too large for enumeration
        #[arg(long, default_value_t = 20_000)]
        pairs: usize,
    },
}

fn print_summary(res: &ExperimentResult) {
    let s = &res.summary;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    println!("{}", res.config);
    println!("  R_T        {:.4} ± {:.4}", s.regret.mean, s.regret.std);
    println!(
        "  alpha-R_T  {:.4} ± {:.4}  (alpha {:.6})",
        s.alpha_regret.mean, s.alpha_regret.std, s.mean_alpha
    );
    println!(
        "  R_T/sqrt(T) {:.4}  R_T/T^(2/3) {:.4}  R_T/T {:.6}",
        s.regret_over_sqrt_t, s.regret_over_t23, s.regret_over_t
    );
    println!(
        "  locked {:.0}%  mean lock cycle {}  mean recovery cycle {}  C0 {}",
        100.0 * s.lock_fraction,
        opt(s.mean_lock_cycle),
        opt(s.mean_recovery_cycle),
        opt(s.c0)
    );
}

fn run(config: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let res = run_experiment(&cfg)?;
    export_csv(&res, out)?;
    print_summary(&res);
    println!("  wrote {}", out.display());
    Ok(())
}

fn sweep(param: &str, values: &[String], config: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
    let base: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    for value in values {
        let mut table = base.clone();
        set_dotted_key(&mut table, param, parse_override_value(value))?;
        let cfg = ExperimentConfig::from_table(table, config.parent())?;
        let res = run_experiment(&cfg)?;
        let dir = out.join(format!("{param}={value}"));
        export_csv(&res, &dir)?;
        println!("[{param} = {value}]");
        print_summary(&res);
        println!("  wrote {}", dir.display());
    }
    Ok(())
}

fn certify(config: &Path, pairs: usize) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let geom = cfg.build_geometry()?;
    let theta = trial_theta(&cfg, cfg.seed)?;
    let mode = if cfg.dimension <= EXHAUSTIVE_RATIO_MAX_DIM {
        RatioMode::Exhaustive
    } else {
        RatioMode::Sampled {
            pairs,
            seed: cfg.seed,
        }
    };
    let cert = submodularity_ratio(&geom, &theta, mode)?;
    println!("geometry        {} (d = {})", geom.kind(), geom.dim());
    println!(
        "mode            {}",
        if cert.exhaustive {
            "exhaustive"
        } else {
            "sampled (upper estimate of gamma)"
        }
    );
    println!("pairs           {}", cert.instance_count);
    println!("gamma           {}", cert.gamma);
    println!("alpha           {}", cert.alpha);
    if let Some((lmin, _)) = geom.ellipsoid_spectrum() {
        println!("lambda_min(A)   {lmin}");
        println!("alpha bound     {}", greedy_factor(lmin));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(&config, &out),
        Command::Sweep {
            param,
            values,
            config,
            out,
        } => sweep(&param, &values, &config, &out),
        Command::CertifyRatio { config, pairs } => certify(&config, pairs),
        Command::Verify => match verify::run_checks() {
            Ok(checks) => {
                let failed = checks.iter().filter(|c| !c.passed).count();
                for c in &checks {
                    println!(
                        "{} {} ({})",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.detail
                    );
                }
                println!(
                    "{} of {} checks passed",
                    checks.len() - failed,
                    checks.len()
                );
                if failed > 0 {
                    return ExitCode::FAILURE;
                }
                Ok(())
            }
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! CSV artifacts. Floats use the shortest round-trip decimal form, so a
//! re-export of the same result is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::ExperimentResult;
use crate::error::{Error, Result};

pub const REGRET_HEADER: &str =
    "trial,t,cycle,phase,inst_regret,cum_regret,inst_alpha_regret,cum_alpha_regret";
pub const CYCLES_HEADER: &str = "trial,c,eps_c,gap,locked,ols_error";
pub const RECOVERY_HEADER: &str = "trial,t,overlap_fraction";
pub const SUMMARY_HEADER: &str = "name,algorithm,geometry,d,H,sigma,delta,T,trials,alpha_source,alpha_mean,\
mean_R_T,std_R_T,mean_alpha_R_T,std_alpha_R_T,R_T_over_sqrt_T,R_T_over_T23,R_T_over_T,\
alpha_R_T_over_sqrt_T,alpha_R_T_over_T23,alpha_R_T_over_T,lock_fraction,mean_lock_cycle,mean_recovery_cycle,C0";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn regret_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(REGRET_HEADER);
    out.push('\n');
    for trial in &result.trials {
        for r in &trial.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                trial.trial,
                r.t,
                r.cycle,
                r.phase.name(),
                r.inst_regret,
                r.cum_regret,
                r.inst_alpha_regret,
                r.cum_alpha_regret
            );
        }
    }
    out
}

pub fn cycles_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(CYCLES_HEADER);
    out.push('\n');
    for trial in &result.trials {
        for c in &trial.cycles {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                trial.trial, c.cycle, c.eps, c.gap, c.locked as u8, c.ols_error
            );
        }
    }
    out
}

pub fn recovery_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(RECOVERY_HEADER);
    out.push('\n');
    for trial in &result.trials {
        for r in &trial.rows {
            let _ = writeln!(out, "{},{},{}", trial.trial, r.t, r.overlap);
        }
    }
    out
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let cfg = &result.config;
    let s = &result.summary;
    let fields = [
        cfg.name.replace(',', ";"),
        cfg.policy.name().to_string(),
        cfg.geometry.kind().name().to_string(),
        cfg.dimension.to_string(),
        cfg.sparsity.to_string(),
        cfg.sigma.to_string(),
        cfg.delta.to_string(),
        cfg.horizon.to_string(),
        cfg.trials.to_string(),
        cfg.alpha.name(),
        s.mean_alpha.to_string(),
        s.regret.mean.to_string(),
        s.regret.std.to_string(),
        s.alpha_regret.mean.to_string(),
        s.alpha_regret.std.to_string(),
        s.regret_over_sqrt_t.to_string(),
        s.regret_over_t23.to_string(),
        s.regret_over_t.to_string(),
        s.alpha_regret_over_sqrt_t.to_string(),
        s.alpha_regret_over_t23.to_string(),
        s.alpha_regret_over_t.to_string(),
        s.lock_fraction.to_string(),
        opt(s.mean_lock_cycle),
        opt(s.mean_recovery_cycle),
        opt(s.c0),
    ];
    format!("{SUMMARY_HEADER}\n{}\n", fields.join(","))
}

/// Writes `regret.csv`, `cycles.csv`, `recovery.csv` and `summary.csv` into
/// `out_dir`, creating it if needed. Returns the written paths.
pub fn export_csv(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let files = [
        ("regret.csv", regret_csv(result)),
        ("cycles.csv", cycles_csv(result)),
        ("recovery.csv", recovery_csv(result)),
        ("summary.csv", summary_csv(result)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

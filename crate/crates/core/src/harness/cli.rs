//! Command-line front end: `run`, `sweep`, `spectra`, `oracle-check`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgMatches, Command};
use rayon::prelude::*;

use super::{oracle_check, read_manifest, run_experiment, ExperimentConfig, HarnessError, Result, CONFIG_KEYS};
use crate::netgraph::{spectral_bounds, NetworkSchedule, Topology};

fn config_flags(cmd: Command) -> Command {
    CONFIG_KEYS.iter().fold(cmd, |cmd, (key, help)| {
        cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").help(*help))
    })
}

fn command() -> Command {
    let run = config_flags(
        Command::new("run")
            .about("Run one experiment")
            .arg(Arg::new("config").long("config").value_name("FILE").help("key = value config file"))
            .arg(
                Arg::new("manifest")
                    .long("manifest")
                    .value_name("FILE")
                    .conflicts_with("config")
                    .help("replay the config stored in a run manifest"),
            ),
    );
    let sweep = config_flags(
        Command::new("sweep")
            .about("Run one experiment per value of a config key, in parallel")
            .arg(Arg::new("config").long("config").value_name("FILE"))
            .arg(Arg::new("over").long("over").value_name("KEY").required(true).help("config key to vary"))
            .arg(Arg::new("values").long("values").value_name("LIST").required(true).help("comma-separated values")),
    );
    let spectra = Command::new("spectra")
        .about("Print the spectral bounds of a schedule")
        .arg(Arg::new("family").long("family").default_value("complete"))
        .arg(Arg::new("m").long("m").required(true))
        .arg(Arg::new("edge_prob").long("edge_prob").default_value("0.9"))
        .arg(Arg::new("epoch_len").long("epoch_len").default_value("inf"))
        .arg(Arg::new("seed").long("seed").default_value("0"))
        .arg(Arg::new("horizon").long("horizon").default_value("1000").help("iterations covered"));
    let check = Command::new("oracle-check")
        .about("Finite-difference and simplex checks of the dual gradient")
        .arg(Arg::new("d").long("d").default_value("5"))
        .arg(Arg::new("gamma").long("gamma").default_value("0.05"))
        .arg(Arg::new("seed").long("seed").default_value("1"));
    Command::new("madom")
        .about("Decentralized Wasserstein barycenters with Modified ADOM")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(run)
        .subcommand(sweep)
        .subcommand(spectra)
        .subcommand(check)
}

fn value<T: std::str::FromStr>(m: &ArgMatches, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = m.get_one::<String>(key).expect("defaulted or required");
    raw.parse().map_err(|e: T::Err| HarnessError::invalid(key, raw, &e.to_string()))
}

fn load_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let mut cfg = if let Some(path) = m.try_get_one::<String>("manifest").ok().flatten() {
        read_manifest(&PathBuf::from(path))?.config
    } else if let Some(path) = m.get_one::<String>("config") {
        ExperimentConfig::from_file(&PathBuf::from(path))?
    } else {
        ExperimentConfig::default()
    };
    for (key, _) in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn cmd_run(m: &ArgMatches) -> Result<()> {
    let cfg = load_config(m)?;
    let out = run_experiment(&cfg)?;
    let last = out.rows.last().expect("the last iteration is always recorded");
    println!("output = {}", out.output_dir.display());
    println!("iterations = {}", cfg.n_iters);
    println!("objective_gap = {}", last.objective_gap);
    println!("consensus = {}", last.consensus);
    Ok(())
}

fn cmd_sweep(m: &ArgMatches) -> Result<()> {
    let base = load_config(m)?;
    let over: String = value(m, "over")?;
    let values: Vec<String> = m
        .get_one::<String>("values")
        .expect("required")
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(&over, v)?;
            cfg.output = base.output.join(format!("{over}={v}"));
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<_>> = configs.par_iter().map(run_experiment).collect();
    println!("{over}\tobjective_gap\tconsensus\toutput");
    let mut first_err = None;
    for (v, res) in values.iter().zip(results) {
        match res {
            Ok(out) => {
                let last = out.rows.last().expect("recorded");
                println!("{v}\t{}\t{}\t{}", last.objective_gap, last.consensus, out.output_dir.display());
            }
            Err(e) => {
                eprintln!("{over}={v}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn round12(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(11 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

fn cmd_spectra(m: &ArgMatches) -> Result<()> {
    let family: String = value(m, "family")?;
    let edge_prob: f64 = value(m, "edge_prob")?;
    let topology = Topology::from_name(&family, edge_prob)?;
    let mut cfg = ExperimentConfig::default();
    cfg.set("epoch_len", m.get_one::<String>("epoch_len").expect("defaulted"))?;
    let schedule = NetworkSchedule::new(topology, value(m, "m")?, cfg.epoch_len, value(m, "seed")?)?;
    let bounds = spectral_bounds(&schedule, value(m, "horizon")?)?;
    println!("lambda_min_plus = {}", round12(bounds.lambda_min_plus));
    println!("lambda_max = {}", round12(bounds.lambda_max));
    println!("condition_number = {}", round12(bounds.condition_number()));
    Ok(())
}

fn cmd_oracle_check(m: &ArgMatches) -> Result<bool> {
    let d: usize = value(m, "d")?;
    let gamma: f64 = value(m, "gamma")?;
    let report = oracle_check(d, gamma, value(m, "seed")?)?;
    println!("fd_max_rel_error = {:e}", report.fd_max_rel_error);
    println!("simplex_sum_error = {:e}", report.simplex_sum_error);
    println!("min_entry = {:e}", report.min_entry);
    println!("oracle_deviation = {:e}", report.oracle_deviation);
    let ok = report.fd_max_rel_error <= 1e-6
        && report.simplex_sum_error <= 1e-10
        && report.min_entry >= 0.0
        && report.oracle_deviation <= 1e-10;
    println!("status = {}", if ok { "ok" } else { "FAILED" });
    Ok(ok)
}

/// Parses `args` (program name first) and runs the subcommand; returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match matches.subcommand() {
        Some(("run", m)) => cmd_run(m).map(|_| true),
        Some(("sweep", m)) => cmd_sweep(m).map(|_| true),
        Some(("spectra", m)) => cmd_spectra(m).map(|_| true),
        Some(("oracle-check", m)) => cmd_oracle_check(m),
        _ => unreachable!("subcommand_required"),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

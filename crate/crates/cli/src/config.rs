use std::path::PathBuf;

use aou_core::compression::{ScheduleParams, DEFAULT_BUDGET_ROWS, DEFAULT_T_MAX};
use aou_core::nonsignalling::Scenario;
use aou_core::space::DEFAULT_SCHEDULE;
use aou_core::verify::Suite;
use aou_core::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "aou",
    version,
    about = "Classify bipartite correlations and test abstract projections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Validity, nonsignalling, locality and qc outer levels of correlation files.
    Classify,
    /// Dimension, basis and relation rank of the nonsignalling space.
    SpaceInfo,
    /// Projection test on a diagonal model file.
    ProjectionTest,
    /// Maximize a Bell functional over the nonsignalling and local polytopes.
    BellOpt,
    /// Run the invariant suite.
    Verify,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario: N inputs and K outputs per party.
    #[arg(long, global = true, num_args = 2, value_names = ["N", "K"])]
    pub scenario: Option<Vec<usize>>,
    /// Input file; repeat for batch classification.
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Vec<PathBuf>,
    /// Write the machine-readable certificate payload here.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Strictly decreasing ε values, comma separated.
    #[arg(long = "eps-schedule", global = true, value_name = "CSV")]
    pub eps_schedule: Option<String>,
    #[arg(long = "t-max", global = true, value_name = "R", default_value_t = DEFAULT_T_MAX)]
    pub t_max: f64,
    #[arg(long = "L-max", global = true, value_name = "N", default_value_t = 1)]
    pub l_max: usize,
    #[arg(long = "budget-rows", global = true, value_name = "N", default_value_t = DEFAULT_BUDGET_ROWS)]
    pub budget_rows: usize,
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_name = "R", default_value_t = 1e-9)]
    pub tol: f64,
    /// Invariant suite for `verify`.
    #[arg(long, global = true, default_value = "all")]
    pub suite: String,
    /// Random probes added to the defaults in `projection-test`.
    #[arg(long, global = true, value_name = "N", default_value_t = 50)]
    pub probes: usize,
}

/// Everything a command needs, validated.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip)]
    pub inputs: Vec<PathBuf>,
    pub scenario: Option<Scenario>,
    pub params: ScheduleParams,
    pub l_max: usize,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub tol: f64,
    pub suite: Suite,
    pub probes: usize,
}

pub fn parse_schedule(csv: &str) -> Result<Vec<f64>> {
    csv.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|_| Error::InvalidSchedule(format!("`{s}` is not a number")))
        })
        .collect()
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let c = &cli.common;
        let scenario = match c.scenario.as_deref() {
            None => None,
            Some([n, k]) => Some(Scenario::new(*n, *k)?),
            Some(other) => {
                return Err(Error::InvalidInput(format!(
                    "--scenario takes two counts, got {}",
                    other.len()
                )))
            }
        };
        let eps = match &c.eps_schedule {
            Some(csv) => parse_schedule(csv)?,
            None => DEFAULT_SCHEDULE.to_vec(),
        };
        let params = ScheduleParams {
            eps,
            t_max: c.t_max,
            budget_rows: c.budget_rows,
            ..ScheduleParams::default()
        };
        params.validate()?;
        if c.l_max == 0 {
            return Err(Error::InvalidInput("--L-max must be at least 1".into()));
        }
        if !(c.tol.is_finite() && c.tol >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "--tol must be a nonnegative number, got {}",
                c.tol
            )));
        }
        Ok(Self {
            command: cli.command,
            inputs: c.input.clone(),
            scenario,
            params,
            l_max: c.l_max,
            output: c.out.clone(),
            seed: c.seed,
            tol: c.tol,
            suite: c.suite.parse()?,
            probes: c.probes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("aou").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_after_the_subcommand() {
        let c = RunConfig::from_cli(&cli(&[
            "classify",
            "--scenario",
            "2",
            "3",
            "--in",
            "a.corr",
            "--in",
            "b.corr",
            "--L-max",
            "2",
            "--eps-schedule",
            "0.5, 0.05",
        ]))
        .unwrap();
        assert_eq!(c.command, Command::Classify);
        assert_eq!(c.scenario, Some(Scenario::new(2, 3).unwrap()));
        assert_eq!(c.inputs.len(), 2);
        assert_eq!(c.l_max, 2);
        assert_eq!(c.params.eps, vec![0.5, 0.05]);
        assert_eq!(c.params.budget_rows, DEFAULT_BUDGET_ROWS);
    }

    #[test]
    fn bad_values_are_rejected() {
        for args in [
            &["verify", "--eps-schedule", "0.1,0.2"][..],
            &["verify", "--eps-schedule", "0.1,x"],
            &["verify", "--L-max", "0"],
            &["verify", "--suite", "everything"],
            &["space-info", "--scenario", "0", "2"],
            &["verify", "--t-max=-1"],
        ] {
            assert!(RunConfig::from_cli(&cli(args)).is_err(), "{args:?}");
        }
        assert!(Cli::try_parse_from(["aou", "space-info", "--scenario", "2"]).is_err());
    }
}

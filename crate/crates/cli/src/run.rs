use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use aou_core::compression::{default_probes, projection_test, ContractionTuple, ProjectionVerdict};
use aou_core::correlations::{
    bell_value, classify, maximize_over_local, maximize_over_ns, BellFunctional, Classification, Correlation,
};
use aou_core::nonsignalling::{basis_rank_with_relations, build_ns_space, relation_rank, Scenario, MAX_DETERMINISTIC};
use aou_core::space::{diagonal_cone, DiagonalModel, SpaceElement};
use aou_core::verify::{run_suite, SCHEMA};
use aou_core::{Certificate, Error, Result, Status, Verdict};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::model::parse_model;

/// What a command produced: text for the terminal, a payload for `--out`,
/// and whether every requested verdict was decided.
#[derive(Debug)]
pub struct Report {
    pub text: String,
    pub payload: String,
    pub decided: bool,
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        if self.decided {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'static str,
    config: &'a RunConfig,
    result: Value,
}

fn envelope(config: &RunConfig, result: Value) -> String {
    serde_json::to_string_pretty(&Envelope {
        schema: SCHEMA,
        config,
        result,
    })
    .expect("payload serializes")
}

pub fn run(config: &RunConfig) -> Result<Report> {
    let report = match config.command {
        Command::Classify => run_classify(config)?,
        Command::SpaceInfo => run_space_info(config)?,
        Command::ProjectionTest => run_projection_test(config)?,
        Command::BellOpt => run_bell_opt(config)?,
        Command::Verify => run_verify(config)?,
    };
    if let Some(path) = &config.output {
        fs::write(path, &report.payload)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(report)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

/// Prefixes errors with the file they came from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn single_input(config: &RunConfig) -> Result<&Path> {
    match config.inputs.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::InvalidInput("missing --in PATH".into())),
        _ => Err(Error::InvalidInput("this command takes a single --in PATH".into())),
    }
}

fn check_declared(config: &RunConfig, found: Scenario, path: &Path) -> Result<()> {
    match config.scenario {
        Some(s) if s != found => Err(Error::ScenarioMismatch {
            expected_n: s.n,
            expected_k: s.k,
            got_n: found.n,
            got_k: found.k,
        })
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display()))),
        _ => Ok(()),
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "✓"
    } else {
        "✗"
    }
}

fn describe(v: &Verdict) -> String {
    match (&v.status, &v.certificate) {
        (Status::Member, _) => "✓".into(),
        (Status::NonMember, Certificate::BellWitness { name, bound, value, .. }) => {
            let label = if name == "chsh" { "CHSH" } else { "Bell" };
            format!("✗ ({label} witness {} > {})", fmt_num(*value), fmt_num(*bound))
        }
        (Status::NonMember, Certificate::Relation { relation, residual }) => {
            format!("✗ (relation {relation} violated by {residual:.3e})")
        }
        (Status::NonMember, Certificate::Probe { value, .. }) => {
            format!("✗ (level-cone probe with value {value:.3e})")
        }
        (Status::NonMember, _) => "✗".into(),
        (Status::Unknown, Certificate::Budget { reason }) => format!("Unknown(budget: {reason})"),
        (Status::Unknown, _) => "Unknown".into(),
    }
}

/// Rounds away float noise for display only.
fn fmt_num(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    format!("{r}")
}

fn classification_text(name: &str, c: &Classification) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{name} (scenario {} {})", c.scenario.n, c.scenario.k);
    let _ = writeln!(out, "  valid             {}", mark(c.valid));
    for issue in &c.issues {
        let _ = writeln!(out, "    - {issue}");
    }
    if let Some(d) = &c.ns_direct {
        let _ = writeln!(
            out,
            "  nonsignalling     {} (max marginal deviation {:.3e})",
            mark(d.nonsignalling),
            d.max_violation
        );
    }
    if let Some(v) = &c.ns_state {
        let _ = writeln!(out, "  ns state          {}", describe(v));
    }
    if let Some(v) = &c.local {
        let _ = writeln!(out, "  local             {}", describe(v));
    }
    for (l, v) in &c.qc_outer {
        let _ = writeln!(out, "  qc-outer L={l:<5}  {}", describe(v));
    }
    out
}

fn run_classify(config: &RunConfig) -> Result<Report> {
    if config.inputs.is_empty() {
        return Err(Error::InvalidInput("missing --in PATH".into()));
    }
    let loaded = config
        .inputs
        .iter()
        .map(|path| {
            let p = in_file(path, Correlation::parse(&read(path)?))?;
            check_declared(config, p.scenario, path)?;
            Ok((path.display().to_string(), p))
        })
        .collect::<Result<Vec<_>>>()?;
    // correlations are independent, so classify them in parallel; results keep input order
    let results = loaded
        .par_iter()
        .map(|(name, p)| {
            let ns = build_ns_space(p.scenario)?;
            let c = classify(p, &ns, config.l_max, &config.params, config.tol, config.seed)?;
            Ok((name.clone(), c))
        })
        .collect::<Result<Vec<_>>>()?;
    let text = results
        .iter()
        .map(|(n, c)| classification_text(n, c))
        .collect::<Vec<_>>()
        .join("\n");
    let decided = results.iter().all(|(_, c)| c.decided());
    let payload = envelope(config, json!(results.iter().map(|(_, c)| c).collect::<Vec<_>>()));
    Ok(Report { text, payload, decided })
}

fn run_space_info(config: &RunConfig) -> Result<Report> {
    let s = config
        .scenario
        .ok_or_else(|| Error::InvalidInput("space-info needs --scenario N K".into()))?;
    let ns = build_ns_space(s)?;
    let rank = relation_rank(s);
    let full = basis_rank_with_relations(s);
    let mut text = String::new();
    let _ = writeln!(text, "scenario          {} {}", s.n, s.k);
    let _ = writeln!(text, "generators        {}", s.num_generators());
    let _ = writeln!(text, "dimension         {}", ns.dim());
    let _ = writeln!(
        text,
        "relation rank     {} = {} - {}",
        rank,
        s.num_generators(),
        ns.dim()
    );
    let _ = writeln!(
        text,
        "basis independent {}",
        mark(full == s.num_generators() && rank + ns.dim() == s.num_generators())
    );
    let det = s.deterministic_count();
    if det <= MAX_DETERMINISTIC {
        let _ = writeln!(text, "deterministic     {det}");
    } else {
        let _ = writeln!(
            text,
            "deterministic     {det} (over the enumeration limit {MAX_DETERMINISTIC})"
        );
    }
    let _ = writeln!(text, "basis             {}", ns.basis_labels().join(", "));
    let payload = envelope(
        config,
        json!({
            "scenario": s,
            "generators": s.num_generators(),
            "dimension": ns.dim(),
            "relation_rank": rank,
            "basis": ns.basis_labels(),
            "deterministic_strategies": det,
        }),
    );
    Ok(Report {
        text,
        payload,
        decided: true,
    })
}

fn run_projection_test(config: &RunConfig) -> Result<Report> {
    let path = single_input(config)?;
    let spec = in_file(path, parse_model(&read(path)?))?;
    let model = DiagonalModel::full(spec.size);
    let cone = diagonal_cone(&model);
    let tuple = ContractionTuple::new(
        cone.as_ref(),
        spec.contractions.iter().map(|p| SpaceElement::real(p)).collect(),
    )?;
    let mut probes = default_probes(&tuple, config.probes, config.seed);
    probes.extend(spec.probes.iter().map(|v| SpaceElement::real(v)));
    let report = projection_test(cone.as_ref(), &tuple, &probes, config.l_max.max(2), &config.params)?;
    let mut text = String::new();
    let _ = writeln!(text, "model size        {}", spec.size);
    let _ = writeln!(text, "contractions      {}", spec.contractions.len());
    let _ = writeln!(text, "probes            {}", probes.len());
    let decided = match &report.verdict {
        ProjectionVerdict::Pass { probes } => {
            let _ = writeln!(text, "verdict           Pass ({probes} probes agree)");
            true
        }
        ProjectionVerdict::Fail { probe, witness } => {
            let _ = writeln!(text, "verdict           Fail (probe {probe}, witness {witness:?})");
            true
        }
        ProjectionVerdict::Unknown { undecided } => {
            let _ = writeln!(text, "verdict           Unknown ({undecided} probes undecided)");
            false
        }
    };
    let payload = envelope(config, json!(report));
    Ok(Report { text, payload, decided })
}

fn run_bell_opt(config: &RunConfig) -> Result<Report> {
    let path = single_input(config)?;
    let f = in_file(path, BellFunctional::parse(&read(path)?))?;
    check_declared(config, f.scenario, path)?;
    let (ns_max, p) = maximize_over_ns(&f)?;
    let (local_max, vertex) = maximize_over_local(&f)?;
    let check = bell_value(&p, &f)?;
    let mut text = String::new();
    let _ = writeln!(text, "scenario          {} {}", f.scenario.n, f.scenario.k);
    let _ = writeln!(text, "nonsignalling max {}", fmt_num(ns_max));
    let _ = writeln!(
        text,
        "local max         {} (deterministic strategy {vertex})",
        fmt_num(local_max)
    );
    let _ = writeln!(text, "maximizer:");
    for line in p.to_text().lines() {
        let _ = writeln!(text, "  {line}");
    }
    let payload = envelope(
        config,
        json!({
            "ns_max": ns_max,
            "local_max": local_max,
            "local_vertex": vertex,
            "maximizer": p,
            "maximizer_value": check,
        }),
    );
    Ok(Report {
        text,
        payload,
        decided: true,
    })
}

fn run_verify(config: &RunConfig) -> Result<Report> {
    let report = run_suite(config.suite, config.seed);
    if !report.all_passed() {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.ok())
            .map(|c| c.id.as_str())
            .collect();
        // still write the payload so the failure can be inspected
        if let Some(path) = &config.output {
            let _ = fs::write(path, report.payload());
        }
        return Err(Error::InvalidInput(format!(
            "{} of {} checks failed: {}\n{}",
            failed.len(),
            report.checks.len(),
            failed.join(", "),
            report.table()
        )));
    }
    Ok(Report {
        text: report.table(),
        payload: report.payload(),
        decided: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Cli;
    use clap::Parser;

    fn config(args: &[&str]) -> RunConfig {
        let cli = Cli::try_parse_from(std::iter::once("aou").chain(args.iter().copied())).unwrap();
        RunConfig::from_cli(&cli).unwrap()
    }

    #[test]
    fn space_info_reports_dimension_and_rank() {
        let r = run(&config(&["space-info", "--scenario", "2", "3"])).unwrap();
        assert!(r.text.contains("dimension         25"), "{}", r.text);
        assert!(r.text.contains("relation rank     11 = 36 - 25"), "{}", r.text);
        let v: Value = serde_json::from_str(&r.payload).unwrap();
        assert_eq!(v["result"]["relation_rank"], 11);
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn describe_covers_statuses() {
        let budget = Verdict::unknown(Certificate::Budget {
            reason: "needs 65536 rows".into(),
        });
        assert_eq!(describe(&budget), "Unknown(budget: needs 65536 rows)");
        let w = Verdict::non_member(Certificate::BellWitness {
            name: "chsh".into(),
            coefficients: vec![],
            bound: 2.0,
            value: 4.000000000001,
        });
        assert_eq!(describe(&w), "✗ (CHSH witness 4 > 2)");
    }

    #[test]
    fn missing_inputs_are_errors() {
        assert!(run(&config(&["classify"])).is_err());
        assert!(run(&config(&["bell-opt"])).is_err());
        assert!(run(&config(&["space-info"])).is_err());
        assert!(run(&config(&["projection-test", "--in", "/nonexistent/model.txt"])).is_err());
    }
}

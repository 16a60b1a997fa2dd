//! The `report` subcommand: render a saved detection report as a human
//! summary.

use std::path::PathBuf;

use clap::Args;
use pricescope_core::detect::DetectionReport;
use pricescope_core::infer::VerdictBackend;

use crate::{EXIT_CLEAN, EXIT_FATAL};

#[derive(Args)]
pub struct ReportArgs {
    /// Report JSON file, as written by `scan --out`.
    #[arg(value_name = "PATH")]
    path: PathBuf,
}

fn backend_label(backend: VerdictBackend) -> &'static str {
    match backend {
        VerdictBackend::Analytic => "analytic",
        VerdictBackend::LlmTypeI => "llm-type1",
        VerdictBackend::LlmTypeII => "llm-type2",
    }
}

fn render(report: &DetectionReport) -> String {
    let mut out = String::new();
    let push = |out: &mut String, line: &str| {
        out.push_str(line);
        out.push('\n');
    };

    push(&mut out, &format!("transaction {}", report.tx_hash));
    push(
        &mut out,
        &format!(
            "{} operation(s), {} verdict(s), {} finding(s)",
            report.operations.len(),
            report.verdicts.len(),
            report.findings.len()
        ),
    );

    for (i, finding) in report.findings.iter().enumerate() {
        push(&mut out, "");
        push(
            &mut out,
            &format!(
                "finding {}: pattern {} ({:?}), invocation {}",
                i + 1,
                finding.pattern,
                finding.family,
                finding.invocation_index
            ),
        );
        push(&mut out, &format!("  {}", finding.narrative));
        for &v in &finding.verdicts {
            let Some(verdict) = report.verdicts.get(v) else {
                push(&mut out, &format!("  evidence: verdict #{v} (missing)"));
                continue;
            };
            push(
                &mut out,
                &format!(
                    "  evidence: price of {} at {} {} (confidence {}, {})",
                    verdict.token,
                    verdict.contract,
                    verdict.direction.verb(),
                    verdict.confidence,
                    backend_label(verdict.backend)
                ),
            );
        }
    }

    if !report.warnings.is_empty() {
        push(&mut out, "");
        push(&mut out, "warnings:");
        for w in &report.warnings {
            push(&mut out, &format!("  - {w}"));
        }
    }

    push(&mut out, "");
    let t = &report.timings;
    push(
        &mut out,
        &format!(
            "timings: decode {}ms, graph {}ms, recover {}ms, infer {}ms, match {}ms",
            t.decode_ms, t.graph_ms, t.recover_ms, t.infer_ms, t.match_ms
        ),
    );
    out
}

pub fn run(args: ReportArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("pricescope: cannot read {}: {e}", args.path.display());
            return EXIT_FATAL;
        }
    };
    let report: DetectionReport = match serde_json::from_str(&text) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("pricescope: {} is not a report: {e}", args.path.display());
            return EXIT_FATAL;
        }
    };
    print!("{}", render(&report));
    EXIT_CLEAN
}

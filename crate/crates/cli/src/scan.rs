//! The `scan` subcommand: single-transaction scans from a fixture file or a
//! live RPC endpoint, and multi-file batch scans with JSONL output.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use clap::Args;
use pricescope_core::detect::{detect, DetectConfig};
use pricescope_core::graph::{build_graph, identify_user_controlled, to_dot};
use pricescope_core::infer::{BackendKind, InferenceBackendConfig, LLM_KEY_ENV};
use pricescope_core::ingest::{
    atomic_write, fetch_trace, load_trace, slice_user_invocations, RpcConfig, ScanInput,
};
use pricescope_core::primitives::{Address, Word};

use crate::config::{resolve_rpc_url, FileConfig};
use crate::{EXIT_CLEAN, EXIT_FATAL, EXIT_FINDINGS, EXIT_USAGE};

/// Router list compiled into the binary; `--routers` and `routers_file`
/// extend it.
const BUILTIN_ROUTERS: &str = include_str!("../data/known_routers.txt");

#[derive(Args)]
pub struct ScanArgs {
    /// Fixture file to scan.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["tx", "batch"])]
    fixture: Option<PathBuf>,

    /// Transaction hash to fetch over RPC and scan.
    #[arg(long, value_name = "HASH", conflicts_with = "batch")]
    tx: Option<String>,

    /// JSON-RPC endpoint with debug tracing (or PRICESCOPE_RPC_URL, or
    /// rpc_url in the config file).
    #[arg(long, value_name = "URL")]
    rpc: Option<String>,

    /// Directory of fixture files to scan as a batch; reports stream out as
    /// one JSON line each.
    #[arg(long, value_name = "DIR")]
    batch: Option<PathBuf>,

    /// Price-inference engine: auto, analytic, llm-type1, or llm-type2.
    /// `analytic` never opens a network connection.
    #[arg(long, value_name = "KIND")]
    backend: Option<BackendKind>,

    /// Whole-scan wall-clock cap in seconds; on expiry the report is
    /// returned partial with a TimeoutWarning.
    #[arg(long, value_name = "SECS")]
    timeout: Option<u64>,

    /// Confidence floor (1-10) for verdicts entering pattern matching.
    #[arg(long, value_name = "N")]
    min_confidence: Option<u8>,

    /// Worker threads for batch scans (default: logical CPU count).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,

    /// Print each invocation's transfer graph as DOT on stderr (single
    /// scans).
    #[arg(long)]
    dump_graph: bool,

    /// Directory of per-contract verified-source bundles.
    #[arg(long, value_name = "DIR")]
    bundles: Option<PathBuf>,

    /// File of extra router addresses (one per line) kept outside the
    /// user-controlled set.
    #[arg(long, value_name = "PATH")]
    routers: Option<PathBuf>,

    /// LLM chat-completions endpoint for the llm-type1/llm-type2/auto
    /// backends.
    #[arg(long, value_name = "URL")]
    llm_endpoint: Option<String>,

    /// Model name sent with LLM requests.
    #[arg(long, value_name = "NAME")]
    model: Option<String>,

    /// Write the report (or batch JSONL) here instead of stdout. Single
    /// reports are written atomically.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub fn run(args: ScanArgs, file_cfg: &FileConfig) -> i32 {
    let cfg = match build_detect_config(&args, file_cfg) {
        Ok(cfg) => cfg,
        Err(BuildError::Usage(msg)) => {
            eprintln!("pricescope: {msg}");
            return EXIT_USAGE;
        }
        Err(BuildError::Fatal(msg)) => {
            eprintln!("pricescope: {msg}");
            return EXIT_FATAL;
        }
    };

    match (&args.fixture, &args.tx, &args.batch) {
        (Some(path), None, None) => {
            let input = match load_trace(path) {
                Ok(input) => input,
                Err(e) => {
                    eprintln!("pricescope: {e}");
                    return EXIT_FATAL;
                }
            };
            scan_single(&input, &args, &cfg)
        }
        (None, Some(tx), None) => {
            let input = match fetch_input(tx, &args, file_cfg) {
                Ok(input) => input,
                Err(code) => return code,
            };
            scan_single(&input, &args, &cfg)
        }
        (None, None, Some(dir)) => scan_batch(dir, &args, &cfg),
        _ => {
            eprintln!("pricescope: pass exactly one of --fixture, --tx, or --batch");
            EXIT_USAGE
        }
    }
}

enum BuildError {
    Usage(String),
    Fatal(String),
}

fn build_detect_config(args: &ScanArgs, file: &FileConfig) -> Result<DetectConfig, BuildError> {
    let kind = match (&args.backend, &file.backend) {
        (Some(kind), _) => *kind,
        (None, Some(name)) => name.parse::<BackendKind>().map_err(BuildError::Fatal)?,
        (None, None) => BackendKind::Auto,
    };

    let mut backend = InferenceBackendConfig {
        kind,
        ..InferenceBackendConfig::default()
    };
    backend.endpoint = args
        .llm_endpoint
        .clone()
        .or_else(|| file.llm.endpoint.clone());
    backend.api_key = std::env::var(LLM_KEY_ENV)
        .ok()
        .filter(|s| !s.is_empty())
        .or_else(|| file.llm.api_key.clone());
    if let Some(model) = args.model.clone().or_else(|| file.llm.model.clone()) {
        backend.model = model;
    }
    if let Some(n) = file.llm.max_concurrent {
        backend.max_concurrent = n;
    }
    if let Some(secs) = file.llm.request_timeout_secs {
        backend.timeout_secs = secs;
    }

    let min_confidence = match args.min_confidence.or(file.min_confidence) {
        Some(n @ 1..=10) => n,
        Some(n) => {
            return Err(BuildError::Usage(format!(
                "--min-confidence must be 1 through 10, got {n}"
            )))
        }
        None => DetectConfig::default().min_confidence,
    };

    let mut known_routers = parse_routers(BUILTIN_ROUTERS)
        .map_err(|e| BuildError::Fatal(format!("built-in router list: {e}")))?;
    for path in args.routers.iter().chain(file.routers_file.iter()) {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BuildError::Fatal(format!("cannot read {}: {e}", path.display())))?;
        let extra = parse_routers(&text)
            .map_err(|e| BuildError::Fatal(format!("{}: {e}", path.display())))?;
        known_routers.extend(extra);
    }

    let default = DetectConfig::default();
    Ok(DetectConfig {
        backend,
        bundles_dir: args.bundles.clone().or_else(|| file.bundles_dir.clone()),
        min_confidence,
        timeout: args
            .timeout
            .or(file.timeout_secs)
            .map(Duration::from_secs)
            .unwrap_or(default.timeout),
        search_budget: default.search_budget,
        known_routers,
    })
}

/// Parses a router list: one address per line, `#` comments and trailing
/// annotations ignored.
fn parse_routers(text: &str) -> Result<BTreeSet<Address>, String> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let word = line.split_whitespace().next().expect("non-empty line");
        let addr: Address = word
            .parse()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        out.insert(addr);
    }
    Ok(out)
}

fn fetch_input(tx: &str, args: &ScanArgs, file_cfg: &FileConfig) -> Result<ScanInput, i32> {
    let Some(url) = resolve_rpc_url(args.rpc.as_deref(), file_cfg) else {
        eprintln!(
            "pricescope: no RPC endpoint: pass --rpc, set PRICESCOPE_RPC_URL, or set rpc_url in pricescope.toml"
        );
        return Err(EXIT_USAGE);
    };
    let hash: Word = match tx.parse() {
        Ok(hash) => hash,
        Err(e) => {
            eprintln!("pricescope: bad transaction hash: {e}");
            return Err(EXIT_USAGE);
        }
    };
    fetch_trace(&RpcConfig::new(url), hash).map_err(|e| {
        eprintln!("pricescope: {e}");
        EXIT_FATAL
    })
}

fn scan_single(input: &ScanInput, args: &ScanArgs, cfg: &DetectConfig) -> i32 {
    if args.dump_graph {
        let uc = identify_user_controlled(&input.trace, &cfg.known_routers);
        for inv in slice_user_invocations(&input.trace, &uc) {
            eprint!("{}", to_dot(&build_graph(&inv, &uc), &input.tokens));
        }
    }
    let report = match detect(input, cfg) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("pricescope: {e}");
            return EXIT_FATAL;
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serialization");
    if let Some(path) = &args.out {
        if let Err(e) = atomic_write(path, format!("{json}\n").as_bytes()) {
            eprintln!("pricescope: cannot write {}: {e}", path.display());
            return EXIT_FATAL;
        }
    } else {
        println!("{json}");
    }
    if report.findings.is_empty() {
        EXIT_CLEAN
    } else {
        EXIT_FINDINGS
    }
}

/// One batch line: either a full report or a per-file failure that leaves
/// the rest of the batch running.
fn batch_line(path: &Path, cfg: &DetectConfig) -> (String, bool, bool) {
    let file = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let fail = |msg: String| {
        let line = serde_json::json!({ "file": file, "fatal": msg }).to_string();
        (line, false, true)
    };
    match load_trace(path) {
        Ok(input) => match detect(&input, cfg) {
            Ok(report) => {
                let has_findings = !report.findings.is_empty();
                let line = serde_json::to_string(&report).expect("report serialization");
                (line, has_findings, false)
            }
            Err(e) => fail(e.to_string()),
        },
        Err(e) => fail(e.to_string()),
    }
}

fn scan_batch(dir: &Path, args: &ScanArgs, cfg: &DetectConfig) -> i32 {
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => {
            eprintln!("pricescope: cannot read {}: {e}", dir.display());
            return EXIT_FATAL;
        }
    };
    files.sort();
    if files.is_empty() {
        eprintln!("pricescope: no .json fixtures in {}", dir.display());
        return EXIT_FATAL;
    }

    let jobs = args
        .jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(std::num::NonZeroUsize::get)
                .unwrap_or(1)
        })
        .clamp(1, files.len());

    let next = AtomicUsize::new(0);
    let (sender, receiver) = mpsc::channel::<(usize, (String, bool, bool))>();
    let mut any_findings = false;
    let mut any_fatal = false;
    let mut collected = String::new();
    let to_stdout = args.out.is_none();

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            let sender = sender.clone();
            let next = &next;
            let files = &files;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= files.len() {
                    break;
                }
                if sender.send((i, batch_line(&files[i], cfg))).is_err() {
                    break;
                }
            });
        }
        drop(sender);

        // Reorder results so output follows the sorted file order even
        // though workers finish out of order.
        let mut pending: BTreeMap<usize, (String, bool, bool)> = BTreeMap::new();
        let mut next_out = 0usize;
        let stdout = std::io::stdout();
        for (i, result) in receiver {
            pending.insert(i, result);
            while let Some((line, findings, fatal)) = pending.remove(&next_out) {
                any_findings |= findings;
                any_fatal |= fatal;
                if to_stdout {
                    let mut lock = stdout.lock();
                    let _ = writeln!(lock, "{line}");
                } else {
                    collected.push_str(&line);
                    collected.push('\n');
                }
                next_out += 1;
            }
        }
    });

    if let Some(path) = &args.out {
        if let Err(e) = atomic_write(path, collected.as_bytes()) {
            eprintln!("pricescope: cannot write {}: {e}", path.display());
            return EXIT_FATAL;
        }
    }
    if any_findings {
        EXIT_FINDINGS
    } else if any_fatal {
        EXIT_FATAL
    } else {
        EXIT_CLEAN
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_router_list_parses_and_is_nonempty() {
        let routers = parse_routers(BUILTIN_ROUTERS).unwrap();
        assert_eq!(routers.len(), 6);
        let v2: Address = "0x7a250d5630b4cf539739df2c5dacb4c659f2488d".parse().unwrap();
        assert!(routers.contains(&v2));
    }

    #[test]
    fn router_parse_rejects_bad_lines() {
        assert!(parse_routers("0x1234\n").is_err());
        let ok = parse_routers("# comment\n\n0x7a250d5630b4cf539739df2c5dacb4c659f2488d trailing words\n")
            .unwrap();
        assert_eq!(ok.len(), 1);
    }
}

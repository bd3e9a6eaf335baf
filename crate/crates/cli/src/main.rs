use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vsixscan::deps::{load_vuln_db, VulnDatabase};
use vsixscan::graph::{build_graph, chains, cross_flags_with_cap, DEFAULT_MIN_CHAIN, DEFAULT_PATH_CAP};
use vsixscan::intel::{classify, FixtureBackend, Indicator, IntelBackend, IntelClient, ThreatClass, TopDomainList};
use vsixscan::market::{parse_timestamp, CrawlOptions, EndpointProfile, MarketClient, Store};
use vsixscan::par::Parallelism;
use vsixscan::pipeline::{file_items, store_items, CorpusItem, CorpusScan, Scanner};
use vsixscan::policy::Policy;
use vsixscan::report::{self, emit_reports, emit_summary, summarize, Format, SCHEMA_VERSION};

/// Exit status for operational errors.
const OPERATIONAL_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "vsixscan", version, about = "Static security scanner for code-editor extension packages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Policy file (TOML).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Vulnerability database file.
    #[arg(long = "vuln-db")]
    vuln_db: Option<PathBuf>,
    /// structured, text or table.
    #[arg(long, default_value = "text")]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run every stage on one thread.
    #[arg(long)]
    sequential: bool,
    /// Skip threat-intel lookups even when a backend is configured.
    #[arg(long = "no-intel")]
    no_intel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Scan .vsix files and report findings per extension.
    Scan {
        #[arg(required = true)]
        vsix: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Scan a package store or a directory of .vsix files and summarize.
    Corpus {
        store_dir: PathBuf,
        /// Also write the per-extension reports here, in the same format.
        #[arg(long)]
        reports: Option<PathBuf>,
        /// Scan every stored version, not only the newest.
        #[arg(long = "all-versions")]
        all_versions: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Download listings and packages from a marketplace into a store.
    Crawl {
        /// public-gallery, fixture-server, or a profile file.
        #[arg(long = "endpoint-profile", default_value = "public-gallery")]
        endpoint_profile: String,
        /// Base URL for the fixture-server profile.
        #[arg(long)]
        endpoint: Option<String>,
        /// Only extensions updated after this time (Unix seconds or RFC 3339).
        #[arg(long)]
        since: Option<String>,
        /// Store directory; created if missing, resumed if present.
        #[arg(long = "out-store")]
        out_store: PathBuf,
        /// Requests per second.
        #[arg(long)]
        rate: Option<u32>,
        /// Parallel downloads.
        #[arg(long)]
        workers: Option<usize>,
        /// Download every published version, not only the newest.
        #[arg(long = "all-versions")]
        all_versions: bool,
        /// Stop after this many downloads; a later run picks up the rest.
        #[arg(long = "max-downloads")]
        max_downloads: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Build the install graph of a store and report install chains.
    Chains {
        store_dir: PathBuf,
        /// Fewest extensions on a reported chain.
        #[arg(long = "min-length", default_value_t = DEFAULT_MIN_CHAIN)]
        min_length: usize,
        /// Stop enumerating after this many chains.
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        cap: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Look up one indicator: a file hash, domain, IP or URL.
    Intel {
        indicator: String,
        /// Answer from a CSV table instead of the configured backend.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_policy(c: &Common) -> Result<Policy> {
    match &c.policy {
        Some(p) => Ok(Policy::load(p)?),
        None => Ok(Policy::default()),
    }
}

fn load_db(c: &Common) -> Result<VulnDatabase> {
    match &c.vuln_db {
        Some(p) => Ok(load_vuln_db(p)?),
        None => Ok(VulnDatabase::default()),
    }
}

fn mode(c: &Common) -> Parallelism {
    if c.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::default()
    }
}

fn intel_client(policy: &Policy, fixture: Option<&Path>) -> Result<Option<Arc<IntelClient>>> {
    let backend: Option<Arc<dyn IntelBackend>> = match fixture {
        Some(path) => Some(Arc::new(FixtureBackend::load(path)?)),
        None => policy.intel.build_backend()?,
    };
    Ok(backend.map(|b| Arc::new(IntelClient::new(b, &policy.intel))))
}

fn scanner(c: &Common) -> Result<Scanner> {
    let policy = load_policy(c)?;
    let db = load_db(c)?;
    let client = if c.no_intel { None } else { intel_client(&policy, None)? };
    let allowlist = match &policy.intel.allowlist {
        Some(p) if client.is_some() => TopDomainList::load(p)?,
        _ => TopDomainList::default(),
    };
    let mut s = Scanner::new(policy, db).with_mode(mode(c));
    if let Some(client) = client {
        s = s.with_intel(client, allowlist);
    }
    Ok(s)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).context("cannot write to stdout")
        }
    }
}

fn corpus_items(dir: &Path, all_versions: bool) -> Result<Vec<CorpusItem>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    match store_items(dir, !all_versions) {
        Ok(items) => Ok(items),
        Err(_) if !dir.join(vsixscan::market::LEDGER_FILE).exists() => Ok(file_items(&[dir.to_path_buf()])?),
        Err(e) => Err(e.into()),
    }
}

fn scan_dir(dir: &Path, all_versions: bool, common: &Common) -> Result<CorpusScan> {
    let items = corpus_items(dir, all_versions)?;
    let scan = scanner(common)?.scan_corpus(&items);
    for f in &scan.failures {
        eprintln!("warning: skipped {f}");
    }
    Ok(scan)
}

fn run_scan(files: &[PathBuf], common: &Common) -> Result<u8> {
    let s = scanner(common)?;
    let items = file_items(files)?;
    let scan = s.scan_corpus(&items);
    write_output(common.out.as_deref(), &emit_reports(&scan.reports, common.format))?;
    if !scan.failures.is_empty() {
        for f in &scan.failures {
            eprintln!("error: {f}");
        }
        return Ok(OPERATIONAL_ERROR);
    }
    Ok(report::exit_code(&scan.reports) as u8)
}

fn run_corpus(dir: &Path, reports: Option<&Path>, all_versions: bool, common: &Common) -> Result<u8> {
    let scan = scan_dir(dir, all_versions, common)?;
    let summary = summarize(&scan.reports, &scan.installs());
    if let Some(path) = reports {
        write_output(Some(path), &emit_reports(&scan.reports, common.format))?;
    }
    write_output(common.out.as_deref(), &emit_summary(&summary, common.format))?;
    Ok(report::exit_code(&scan.reports) as u8)
}

fn run_chains(dir: &Path, min_length: usize, cap: u64, common: &Common) -> Result<u8> {
    let scan = scan_dir(dir, false, common)?;
    let (graph, notes) = build_graph(&scan.subjects);
    let flags = cross_flags_with_cap(&graph, cap);
    let found = chains(&graph, min_length, cap);
    let bytes = match common.format {
        Format::Structured => {
            let v = json!({
                "schema_version": SCHEMA_VERSION,
                "graph": graph,
                "cross_flags": flags,
                "chains": found,
                "notes": notes,
            });
            let mut b = serde_json::to_vec_pretty(&v)?;
            b.push(b'\n');
            b
        }
        Format::Text => {
            let mut s = format!("{} extensions, {} install edges\n", graph.nodes.len(), graph.edges.len());
            for (label, n) in flags.rows() {
                s.push_str(&format!("  {label:<52} {n:>8}\n"));
            }
            s.push_str(&format!(
                "{} chain(s) of {min_length} or more{}\n",
                found.count,
                if found.truncated { " (truncated)" } else { "" }
            ));
            for p in &found.paths {
                s.push_str(&format!("  {}\n", p.join(" -> ")));
            }
            for n in &notes {
                s.push_str(&format!("note: {} {}\n", n.rule_id, n.evidence));
            }
            s.into_bytes()
        }
        Format::Table => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["Suspicious Type", "Extension Count"])?;
            for (label, n) in flags.rows() {
                w.write_record([label, &n.to_string()])?;
            }
            w.into_inner().map_err(|e| anyhow!("{e}"))?
        }
    };
    write_output(common.out.as_deref(), &bytes)?;
    Ok(if found.count > 0 { 1 } else { 0 })
}

fn run_intel(text: &str, fixture: Option<&Path>, common: &Common) -> Result<u8> {
    let policy = load_policy(common)?;
    let client = intel_client(&policy, fixture)?
        .ok_or_else(|| anyhow!("no intel backend: pass --fixture or set [intel.backend] in the policy file"))?;
    let indicator = Indicator::infer(text)?;
    let v = client.lookup(&indicator)?;
    let class = classify(&v, policy.intel.threshold);
    let bytes = match common.format {
        Format::Structured => {
            let mut b = serde_json::to_vec_pretty(&json!({
                "schema_version": SCHEMA_VERSION,
                "indicator": v.indicator,
                "class": class,
                "engines_positive": v.engines_positive,
                "engines_total": v.engines_total,
                "threshold": policy.intel.threshold,
                "backend": v.backend,
                "fetched_at": v.fetched_at,
            }))?;
            b.push(b'\n');
            b
        }
        Format::Text => format!(
            "{} {} ({}/{} engines, threshold {}, {})\n",
            v.indicator,
            class.as_str(),
            v.engines_positive,
            v.engines_total,
            policy.intel.threshold,
            v.backend
        )
        .into_bytes(),
        Format::Table => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["indicator", "class", "engines_positive", "engines_total", "backend"])?;
            w.write_record([
                v.indicator.to_string(),
                class.as_str().to_string(),
                v.engines_positive.to_string(),
                v.engines_total.to_string(),
                v.backend.clone(),
            ])?;
            w.into_inner().map_err(|e| anyhow!("{e}"))?
        }
    };
    write_output(common.out.as_deref(), &bytes)?;
    Ok(match class {
        ThreatClass::Clean => 0,
        ThreatClass::Flagged => 1,
        ThreatClass::Malicious => 2,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_crawl(
    profile: &str,
    endpoint: Option<&str>,
    since: Option<&str>,
    out_store: &Path,
    rate: Option<u32>,
    workers: Option<usize>,
    all_versions: bool,
    max_downloads: Option<usize>,
    common: &Common,
) -> Result<u8> {
    let policy = load_policy(common)?;
    let mut config = policy.market.clone();
    if let Some(r) = rate {
        config.rate_per_second = r;
    }
    if let Some(w) = workers {
        config.workers = w.max(1);
    }
    let updated_since = match since {
        Some(s) => Some(parse_timestamp(s).ok_or_else(|| anyhow!("--since `{s}` is neither Unix seconds nor RFC 3339"))?),
        None => None,
    };
    let client = MarketClient::new(EndpointProfile::resolve(profile, endpoint)?, config);
    let store = Store::open(out_store)?;
    let r = client.crawl(&store, &CrawlOptions { updated_since, all_versions, max_downloads })?;
    let bytes = match common.format {
        Format::Structured => {
            let mut b = serde_json::to_vec_pretty(&json!({
                "schema_version": SCHEMA_VERSION,
                "store": out_store.display().to_string(),
                "listings": r.listings.len(),
                "downloaded": r.downloaded,
                "already_stored": r.already_stored,
                "failed": r.failed.iter().map(|(k, e)| json!({ "package": k, "error": e })).collect::<Vec<_>>(),
                "interrupted": r.interrupted,
            }))?;
            b.push(b'\n');
            b
        }
        Format::Text | Format::Table => {
            let mut s = format!(
                "{} listings, {} downloaded, {} already stored, {} failed{}\n",
                r.listings.len(),
                r.downloaded,
                r.already_stored,
                r.failed.len(),
                if r.interrupted { " (stopped at --max-downloads)" } else { "" }
            );
            for (k, e) in &r.failed {
                s.push_str(&format!("  failed {k}: {e}\n"));
            }
            s.into_bytes()
        }
    };
    write_output(common.out.as_deref(), &bytes)?;
    Ok(if r.failed.is_empty() { 0 } else { OPERATIONAL_ERROR })
}

fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Scan { vsix, common } => run_scan(vsix, common),
        Command::Corpus { store_dir, reports, all_versions, common } => {
            run_corpus(store_dir, reports.as_deref(), *all_versions, common)
        }
        Command::Chains { store_dir, min_length, cap, common } => run_chains(store_dir, *min_length, *cap, common),
        Command::Intel { indicator, fixture, common } => run_intel(indicator, fixture.as_deref(), common),
        Command::Crawl {
            endpoint_profile,
            endpoint,
            since,
            out_store,
            rate,
            workers,
            all_versions,
            max_downloads,
            common,
        } => run_crawl(
            endpoint_profile,
            endpoint.as_deref(),
            since.as_deref(),
            out_store,
            *rate,
            *workers,
            *all_versions,
            *max_downloads,
            common,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { OPERATIONAL_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(OPERATIONAL_ERROR)
        }
    }
}

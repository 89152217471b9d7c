use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use psido_core::anomaly::{log_det_weighted, log_det_zeta_local, zeta_anomaly_local, Weight};
use psido_core::holo::SpectralCut;
use psido_core::trace::{canonical_trace, cutoff_trace_density, residue, weighted_trace_with_log};
use psido_oracle::{anomaly_spectral, log_det_zeta_spectral};
use psido_workbench::config::{parse_operator, parse_problem, spec_from_expression, OperatorSpec, ProblemConfig, Settings};
use psido_workbench::report::{complex_text, to_json, Report};
use psido_workbench::suites::{config_checks, criterion_title, run_criteria, thread_pool, Suite};

#[derive(Parser)]
#[command(name = "psido", version, about = "Residues, regularized traces, determinants and multiplicative anomalies on the circle")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Problem file with operators `a`, `b`, `weight` and `settings`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Operator given inline: `P(n)^p` or a JSON operator spec.
    #[arg(long, global = true)]
    op: Option<String>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Tolerance of problem-file checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory receiving report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Verb {
    /// Noncommutative residue of A.
    Residue,
    /// Canonical trace of A, or its weighted trace when a weight is configured.
    Trace,
    /// Zeta determinant of A, and the weighted one when a weight is configured.
    Logdet,
    /// Multiplicative anomaly of the zeta determinant for A and B.
    Anomaly,
    /// Runs a verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn problem(cli: &Cli) -> Result<Option<ProblemConfig>, String> {
    let mut p = match (&cli.config, &cli.op) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_problem(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(op)) => {
            let a: OperatorSpec = if op.trim_start().starts_with('{') { parse_operator(op) } else { spec_from_expression(op) }
                .map_err(|e| e.to_string())?;
            ProblemConfig { a, b: None, weight: None, settings: Settings::default() }
        }
        (None, None) => return Ok(None),
    };
    apply_overrides(cli, &mut p.settings);
    Ok(Some(p))
}

/// Problem files named by `--config` (a file, or every `*.json` in a directory) or `--op`.
fn problem_files(cli: &Cli) -> Result<BTreeMap<String, ProblemConfig>, String> {
    let mut out = BTreeMap::new();
    match &cli.config {
        Some(path) if path.is_dir() => {
            let entries = std::fs::read_dir(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            for f in files {
                let text = std::fs::read_to_string(&f).map_err(|e| format!("{}: {e}", f.display()))?;
                let mut p = parse_problem(&text).map_err(|e| format!("{}: {e}", f.display()))?;
                apply_overrides(cli, &mut p.settings);
                let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                out.insert(name, p);
            }
        }
        _ => {
            if let Some(p) = problem(cli)? {
                let name = cli
                    .config
                    .as_ref()
                    .and_then(|p| p.file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "op".to_string());
                out.insert(name, p);
            }
        }
    }
    Ok(out)
}

fn apply_overrides(cli: &Cli, s: &mut Settings) {
    if let Some(d) = cli.depth {
        s.depth = d;
    }
    if let Some(g) = cli.grid {
        s.grid = g;
    }
    if let Some(m) = cli.modes {
        s.modes = m;
    }
    if let Some(t) = cli.tol {
        s.tol = t;
    }
}

fn require(cli: &Cli) -> Result<ProblemConfig, String> {
    problem(cli)?.ok_or_else(|| "an operator is required: pass --config or --op".to_string())
}

fn show(v: Complex64) -> String {
    if v.im.abs() <= 1e-12 * v.re.abs().max(1.0) {
        format!("{:.7}", v.re)
    } else {
        format!("{:.7}{:+.7}i", v.re, v.im)
    }
}

fn write_out(cli: &Cli, name: &str, json: &str, csv: Option<&str>) -> Result<(), String> {
    let Some(dir) = &cli.out else { return Ok(()) };
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let write = |p: &Path, text: &str| std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()));
    write(&dir.join(format!("{name}.json")), json)?;
    if let Some(csv) = csv {
        write(&dir.join(format!("{name}.csv")), csv)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    match &cli.verb {
        Verb::Residue => {
            let p = require(cli)?;
            let a = p.a.build(&p.settings).map_err(|e| e.to_string())?;
            let r = residue(a.symbol().as_log());
            println!("{}", show(r));
            let json = to_json(&serde_json::json!({ "config": p, "residue": [r.re, r.im] }));
            write_out(cli, "residue", &json, None)?;
        }
        Verb::Trace => {
            let p = require(cli)?;
            let s = p.settings;
            let a = p.a.build(&s).map_err(|e| e.to_string())?;
            let opts = s.trace();
            let (value, density) = match &p.weight {
                Some(w) => {
                    let q = w.build(&s).map_err(|e| e.to_string())?;
                    let wt = Weight::of(&q.op, s.depth).and_then(|w| w.acting_on(a.symbol().rank())).map_err(|e| e.to_string())?;
                    let r = weighted_trace_with_log(a.symbol().as_log(), &wt.log_q, wt.q, &opts).map_err(|e| e.to_string())?;
                    (r.value, r.density)
                }
                None => {
                    let r = match canonical_trace(a.symbol().as_log(), &opts) {
                        Ok(r) => r,
                        Err(e) => {
                            eprintln!("warning: {e}; reporting the cut-off regularized trace");
                            cutoff_trace_density(a.symbol().as_log(), &opts.accepting_obstruction()).map_err(|e| e.to_string())?
                        }
                    };
                    (r.integral, r)
                }
            };
            println!("{}", show(value));
            let json = to_json(&serde_json::json!({ "config": p, "trace": [value.re, value.im], "density": density }));
            write_out(cli, "trace", &json, None)?;
        }
        Verb::Logdet => {
            let p = require(cli)?;
            let s = p.settings;
            let a = p.a.build(&s).map_err(|e| e.to_string())?;
            let cfg = s.anomaly();
            let local = log_det_zeta_local(&a.op, &cfg).map_err(|e| e.to_string())?;
            println!("log det_zeta (local)    = {}", show(local.log_det));
            let spectral = match a.multiplier() {
                Some(m) => Some(log_det_zeta_spectral(&m, &s.oracle()).map_err(|e| e.to_string())?),
                None => None,
            };
            if let Some(v) = spectral {
                println!("log det_zeta (spectral) = {}", show(v));
            }
            let weighted = match &p.weight {
                Some(w) => {
                    let q = w.build(&s).map_err(|e| e.to_string())?;
                    let v = log_det_weighted(&a.op, &q.op, &cfg).map_err(|e| e.to_string())?.value;
                    println!("log det^Q               = {}", show(v));
                    Some(v)
                }
                None => None,
            };
            let c = |v: Option<Complex64>| v.map(|v| [v.re, v.im]);
            let json = to_json(&serde_json::json!({
                "config": p,
                "log_det_zeta": local,
                "log_det_zeta_spectral": c(spectral),
                "log_det_weighted": c(weighted),
            }));
            write_out(cli, "logdet", &json, None)?;
        }
        Verb::Anomaly => {
            let p = require(cli)?;
            let s = p.settings;
            let a = p.a.build(&s).map_err(|e| e.to_string())?;
            let b = p.b.as_ref().ok_or("the anomaly needs operator `b`")?.build(&s).map_err(|e| e.to_string())?;
            let mut r = thread_pool().install(|| zeta_anomaly_local(&a.op, &b.op, None, &s.anomaly())).map_err(|e| e.to_string())?;
            if let (Some(ma), Some(mb)) = (a.multiplier(), b.multiplier()) {
                let v = anomaly_spectral(&ma, &mb, SpectralCut::new(r.cut_ab), &s.oracle()).map_err(|e| e.to_string())?;
                r = r.with_spectral(v);
            }
            println!("log M (local)    = {}", show(r.log_m_local));
            if let Some(v) = r.log_m_spectral {
                println!("log M (spectral) = {}", show(v));
                println!("exp(log M) = {}  vs  oracle ratio {}", complex_text(r.log_m_local.exp()), complex_text(v.exp()));
            }
            let json = to_json(&serde_json::json!({ "config": p, "anomaly": r }));
            write_out(cli, "anomaly", &json, None)?;
        }
        Verb::Verify { suite } => {
            let problems = problem_files(cli)?;
            let report = if problems.is_empty() {
                let mut s = Settings::default();
                apply_overrides(cli, &mut s);
                let results = run_criteria(&suite.criteria(), &s);
                for (id, checks) in &results {
                    let ok = checks.iter().all(|c| c.pass);
                    println!("criterion {id:2} {}: {}", if ok { "PASS" } else { "FAIL" }, criterion_title(*id));
                }
                Report::new(suite.name(), s, BTreeMap::new(), results.into_iter().flat_map(|(_, c)| c).collect())
            } else {
                let mut checks = Vec::new();
                for (name, p) in &problems {
                    for mut c in thread_pool().install(|| config_checks(*suite, p)) {
                        if problems.len() > 1 {
                            c.check_id = format!("{name}.{}", c.check_id);
                        }
                        checks.push(c);
                    }
                }
                let settings = problems.values().next().map(|p| p.settings).unwrap_or_default();
                Report::new(suite.name(), settings, problems, checks)
            };
            for c in &report.checks {
                println!(
                    "{:5} {:55} value {}  reference {}  error {:.3e}  tol {:.1e}",
                    if c.pass { "ok" } else { "FAIL" },
                    c.check_id,
                    complex_text(c.value),
                    complex_text(c.reference),
                    c.error,
                    c.tolerance
                );
            }
            let json = report.to_json();
            let csv = report.to_csv();
            write_out(cli, &format!("verify_{}", suite.name()), &json, Some(&csv))?;
            if cli.out.is_none() {
                match cli.format {
                    Format::Json => eprintln!("{} passed, {} failed", report.passed, report.failed),
                    Format::Csv => print!("{csv}"),
                }
            }
            if !report.all_pass() {
                eprintln!("failed checks:");
                for c in report.failures() {
                    eprintln!("  {}: {}{}", c.check_id, c.paper_ref, c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default());
                }
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

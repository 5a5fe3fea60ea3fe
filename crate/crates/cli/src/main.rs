//! `oclog`: validate, convert, refine, flatten and generate object-centric
//! event logs.
//!
//! Exit codes: 0 success, 1 violations or unwanted loss, 2 input error,
//! 3 internal error.

use std::collections::BTreeSet;
use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use oclog::analysis::{flatten, flatten_to_csv, log_stats};
use oclog::converter::convert;
use oclog::framework::{matrix_descriptors, render_matrix};
use oclog::generator::{generate, GenConfig};
use oclog::refiner::{key_changes_by_event, reify_relations, relations_as_dynamic_attributes};
use oclog::validator::{validate, ConformanceReport};
use oclog::{detect_format, format_capabilities, formats, FormatId, OCLog, Strictness};
use rayon::prelude::*;

const EXIT_OK: u8 = 0;
const EXIT_FINDINGS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "oclog", version, about = "Object-centric event log toolkit")]
struct Cli {
    /// Colour verdicts in human output.
    #[arg(long, global = true, env = "OCLOG_COLOR", value_enum, default_value_t = Color::Auto)]
    color: Color,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Color {
    Auto,
    Always,
    Never,
}

#[derive(Subcommand)]
enum Command {
    /// Check logs against the nineteen specifications.
    Validate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Input format, or `auto` to detect it.
        #[arg(long, default_value = "auto")]
        format: String,
        #[arg(long, env = "OCLOG_MODE", default_value = "lax")]
        mode: Strictness,
        /// Write the JSON report here; `-` prints it on stdout instead of the table.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Worker threads for several inputs; 0 picks one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Print the format capability matrix.
    Capabilities {
        #[arg(long, conflicts_with = "all")]
        format: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long)]
        json: bool,
    },
    /// Rewrite a log in another format; the loss report goes to `<out>.loss.json`.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        to: FormatId,
        #[arg(long, default_value = "auto")]
        from: String,
        /// Exit 1 when anything was lost.
        #[arg(long)]
        require_lossless: bool,
    },
    /// Apply refinements in the given order.
    Refine {
        input: PathBuf,
        output: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "key-changes,reify,dyn-relations"
        )]
        steps: Vec<Step>,
        #[arg(long, default_value = "ROCEL")]
        to: FormatId,
        /// Only reify these qualifiers.
        #[arg(long, value_delimiter = ',')]
        qualifiers: Option<Vec<String>>,
        /// Exit 1 when some changes stay without a causing event.
        #[arg(long)]
        require_resolved: bool,
    },
    /// Flatten onto one case notion and write a CSV event table.
    Flatten {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        case_type: String,
        #[arg(long)]
        json: bool,
    },
    /// Summarise a log.
    Stats {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic log from a JSON configuration.
    Gen {
        config: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "ROCEL")]
        to: FormatId,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Step {
    KeyChanges,
    Reify,
    DynRelations,
}

/// An error caused by what the user supplied.
#[derive(Debug)]
struct InputError(anyhow::Error);

type CmdResult = Result<u8, InputError>;

fn input<E: Into<anyhow::Error>>(e: E) -> InputError {
    InputError(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    let code = match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(InputError(e))) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
        Err(_) => EXIT_INTERNAL,
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> CmdResult {
    let color = match cli.color {
        Color::Always => true,
        Color::Never => false,
        Color::Auto => std::io::stdout().is_terminal(),
    };
    match cli.command {
        Command::Validate {
            inputs,
            format,
            mode,
            json,
            jobs,
        } => cmd_validate(&inputs, &format, mode, json.as_deref(), jobs, color),
        Command::Capabilities {
            format,
            all: _,
            json,
        } => cmd_capabilities(format.as_deref(), json),
        Command::Convert {
            input,
            output,
            to,
            from,
            require_lossless,
        } => cmd_convert(&input, &output, &from, to, require_lossless),
        Command::Refine {
            input,
            output,
            steps,
            to,
            qualifiers,
            require_resolved,
        } => cmd_refine(&input, &output, &steps, to, qualifiers, require_resolved),
        Command::Flatten {
            input,
            output,
            case_type,
            json,
        } => cmd_flatten(&input, &output, &case_type, json),
        Command::Stats { input, json } => cmd_stats(&input, json),
        Command::Gen { config, output, to } => cmd_gen(&config, &output, to),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, InputError> {
    fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), InputError> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(input)
}

fn resolve_format(bytes: &[u8], name: &str) -> anyhow::Result<FormatId> {
    if name.eq_ignore_ascii_case("auto") {
        Ok(detect_format(bytes)?)
    } else {
        Ok(name.parse()?)
    }
}

/// Reads a log, reporting decoder warnings on stderr.
fn load(path: &Path, format: &str) -> anyhow::Result<(FormatId, OCLog)> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let format = resolve_format(&bytes, format).with_context(|| path.display().to_string())?;
    let (log, warnings) =
        formats::read(format, &bytes).with_context(|| path.display().to_string())?;
    for w in warnings {
        eprintln!(
            "warning: {}: {} at {}: {}",
            path.display(),
            w.code,
            w.location,
            w.message
        );
    }
    Ok((format, log))
}

fn paint(text: &str, violated: bool, color: bool) -> String {
    match (color, violated) {
        (true, true) => format!("\x1b[31m{text}\x1b[0m"),
        (true, false) => format!("\x1b[32m{text}\x1b[0m"),
        _ => text.to_string(),
    }
}

fn render_report(report: &ConformanceReport, color: bool) -> String {
    report
        .render_text()
        .lines()
        .zip(&report.results)
        .map(|(line, r)| paint(line, r.verdict.is_violated(), color) + "\n")
        .collect()
}

fn cmd_validate(
    inputs: &[PathBuf],
    format: &str,
    mode: Strictness,
    json: Option<&Path>,
    jobs: usize,
    color: bool,
) -> CmdResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(input)?;
    // par_iter keeps input order in the collected results
    let outcomes: Vec<anyhow::Result<ConformanceReport>> = pool.install(|| {
        inputs
            .par_iter()
            .map(|path| load(path, format).map(|(_, log)| validate(&log, mode)))
            .collect()
    });

    let mut any_violated = false;
    let mut any_failed = false;
    let mut documents = Vec::new();
    let mut text = String::new();
    for (path, outcome) in inputs.iter().zip(outcomes) {
        match outcome {
            Ok(report) => {
                any_violated |= report.any_violated();
                if inputs.len() > 1 {
                    text.push_str(&format!("== {}\n", path.display()));
                }
                text.push_str(&render_report(&report, color));
                documents.push(serde_json::json!({
                    "input": path.display().to_string(),
                    "report": report,
                }));
            }
            Err(e) => {
                any_failed = true;
                eprintln!("error: {e:#}");
            }
        }
    }

    let json_doc = if inputs.len() == 1 {
        documents.first().map(|d| d["report"].clone())
    } else {
        Some(serde_json::Value::Array(documents))
    };
    match (json, json_doc) {
        (Some(path), Some(doc)) => {
            let mut body = serde_json::to_string_pretty(&doc).expect("reports serialize");
            body.push('\n');
            if path == Path::new("-") {
                print!("{body}");
            } else {
                write_bytes(path, body.as_bytes())?;
                print!("{text}");
            }
        }
        _ => print!("{text}"),
    }
    let _ = std::io::stdout().flush();

    Ok(if any_failed {
        EXIT_INPUT
    } else if any_violated {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    })
}

fn cmd_capabilities(format: Option<&str>, json: bool) -> CmdResult {
    let descriptors = match format {
        Some(name) => vec![format_capabilities(name).map_err(input)?],
        None => matrix_descriptors(),
    };
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&descriptors).expect("descriptors serialize")
        );
    } else {
        print!("{}", render_matrix(&descriptors));
    }
    Ok(EXIT_OK)
}

fn loss_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".loss.json");
    PathBuf::from(name)
}

fn cmd_convert(
    input_path: &Path,
    output: &Path,
    from: &str,
    to: FormatId,
    require_lossless: bool,
) -> CmdResult {
    let bytes = read_bytes(input_path)?;
    let source = resolve_format(&bytes, from).map_err(input)?;
    let conversion = convert(&bytes, source, to)
        .with_context(|| input_path.display().to_string())
        .map_err(input)?;
    for w in &conversion.warnings {
        eprintln!(
            "warning: {}: {} at {}: {}",
            input_path.display(),
            w.code,
            w.location,
            w.message
        );
    }
    write_bytes(output, &conversion.output)?;
    write_bytes(
        &loss_path(output),
        conversion.loss.to_json_pretty().as_bytes(),
    )?;
    for (spec, entry) in conversion.loss.entries() {
        eprintln!("lost {spec}: {} item(s)", entry.count);
    }
    Ok(if require_lossless && !conversion.loss.is_lossless() {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    })
}

fn cmd_refine(
    input_path: &Path,
    output: &Path,
    steps: &[Step],
    to: FormatId,
    qualifiers: Option<Vec<String>>,
    require_resolved: bool,
) -> CmdResult {
    let (_, mut log) = load(input_path, "auto").map_err(input)?;
    let qualifiers: Option<BTreeSet<String>> = qualifiers.map(|q| q.into_iter().collect());
    for step in steps {
        let outcome = match step {
            Step::KeyChanges => key_changes_by_event(&log),
            Step::Reify => reify_relations(&log, qualifiers.as_ref()),
            Step::DynRelations => relations_as_dynamic_attributes(&log),
        };
        let name = step
            .to_possible_value()
            .expect("steps have names")
            .get_name()
            .to_string();
        eprintln!(
            "{name}: {} item(s) resolved, {} object(s) created",
            outcome.resolved,
            outcome.created_objects.len()
        );
        log = outcome.log;
    }
    let unresolved = oclog::validator::find_ambiguous_changes(&log);
    eprintln!("unresolved changes: {}", unresolved.len());
    let (bytes, loss) = formats::write(to, &log);
    write_bytes(output, &bytes)?;
    if !loss.is_lossless() {
        write_bytes(&loss_path(output), loss.to_json_pretty().as_bytes())?;
    }
    Ok(if require_resolved && !unresolved.is_empty() {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    })
}

fn cmd_flatten(input_path: &Path, output: &Path, case_type: &str, json: bool) -> CmdResult {
    let (_, log) = load(input_path, "auto").map_err(input)?;
    let result = flatten(&log, case_type).map_err(input)?;
    write_bytes(output, &flatten_to_csv(&log, &result))?;
    let summary = serde_json::json!({
        "case_type": result.case_type,
        "cases": result.cases.len(),
        "rows": result.cases.values().map(Vec::len).sum::<usize>(),
        "convergence_count": result.convergence_count,
        "divergence_count": result.divergence_count,
        "orphan_events": result.orphan_events.len(),
    });
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("summary serializes")
        );
    } else {
        eprintln!(
            "{} case(s), convergence {}, divergence {}, {} event(s) in no case",
            result.cases.len(),
            result.convergence_count,
            result.divergence_count,
            result.orphan_events.len()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_stats(input_path: &Path, json: bool) -> CmdResult {
    let (format, log) = load(input_path, "auto").map_err(input)?;
    let stats = log_stats(&log);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&stats).expect("stats serialize")
        );
        return Ok(EXIT_OK);
    }
    println!("format      {format}");
    println!("events      {}", stats.events);
    println!("objects     {}", stats.objects);
    println!("e2o links   {}", stats.e2o_links);
    println!("relations   {}", stats.relations);
    println!("changes     {}", stats.changes);
    let sections = [
        ("activity", &stats.events_per_activity),
        ("object type", &stats.objects_per_type),
        ("qualifier", &stats.relations_per_qualifier),
        ("changed attribute", &stats.changes_per_attribute),
    ];
    for (label, counts) in sections {
        for (key, n) in counts {
            println!("{label:<18} {key:<24} {n}");
        }
    }
    for (f, n) in &stats.codec_bytes {
        println!("{:<18} {:<24} {n}", "encoded bytes", f.to_string());
    }
    Ok(EXIT_OK)
}

fn cmd_gen(config_path: &Path, output: &Path, to: FormatId) -> CmdResult {
    let config = GenConfig::from_json(&read_bytes(config_path)?).map_err(input)?;
    let log = generate(&config).map_err(input)?;
    let (bytes, loss) = formats::write(to, &log);
    write_bytes(output, &bytes)?;
    if !loss.is_lossless() {
        write_bytes(&loss_path(output), loss.to_json_pretty().as_bytes())?;
    }
    eprintln!(
        "{} event(s), {} object(s) -> {}",
        log.events().len(),
        log.objects().len(),
        output.display()
    );
    Ok(EXIT_OK)
}

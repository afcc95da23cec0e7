use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wnu_csp::algebra::{
    classify_four_cases, enumerate_congruences, restrict_language, subuniverses, wnu_profile,
    FourCaseWitness,
};
use wnu_csp::certkit::{
    cnf_to_dimacs, emit_cnf, parse_trace, serialize_trace, verify_trace, CheckMode,
};
use wnu_csp::model::{parse_instance, serialize_instance, validate_instance, Instance, Language};
use wnu_csp::presets::{gen_instance, template, TEMPLATE_NAMES};
use wnu_csp::solver::{solve, Answer, SolveConfig};

#[derive(Parser)]
#[command(name = "wnu-csp", about = "CSP solver with checkable reduction traces", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance; exit 0 on a solution, 20 on none
    Solve {
        instance: PathBuf,
        /// write the reduction trace (NDJSON) here
        #[arg(long)]
        trace: Option<PathBuf>,
        /// recursion budget
        #[arg(long)]
        depth: Option<usize>,
        /// enumeration cap for the brute-force oracle
        #[arg(long)]
        oracle_cap: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Verify a trace against an instance; exit 0 accept, 1 reject
    Check {
        instance: PathBuf,
        trace: PathBuf,
        /// also brute-check satisfiability preservation per step
        #[arg(long)]
        semantic: bool,
        #[arg(long)]
        oracle_cap: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print the WNU profile, congruence lattice and four-case classification
    Analyze {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Emit the one-hot DIMACS CNF encoding of an instance
    Cnf {
        instance: PathBuf,
        /// output path (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a random valid instance over a template language
    Gen {
        /// one of: z2, z3, meet2, z2z2, z4, selfdual2, rps
        template: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn read_instance(path: &PathBuf) -> wnu_csp::Result<(Instance, Language)> {
    parse_instance(&fs::read_to_string(path)?)
}

fn describe_witness(w: &FourCaseWitness) -> String {
    fn set(s: &BTreeSet<usize>) -> String {
        let v: Vec<String> = s.iter().map(|e| e.to_string()).collect();
        format!("{{{}}}", v.join(","))
    }
    match w {
        FourCaseWitness::BinaryAbsorbing { b, .. } => format!("BinaryAbsorbing(B={})", set(b)),
        FourCaseWitness::Central { c, .. } => format!("Central(C={})", set(c)),
        FourCaseWitness::PcQuotient { sigma, .. } => {
            let blocks: Vec<String> = sigma.blocks.iter().map(set).collect();
            format!("PCQuotient([{}])", blocks.join(" | "))
        }
        FourCaseWitness::LinearQuotient(lq) => {
            let sigma = if lq.sigma.is_delta() {
                "Δ".to_string()
            } else {
                let blocks: Vec<String> = lq.sigma.blocks.iter().map(set).collect();
                format!("[{}]", blocks.join(" | "))
            };
            format!("LinearQuotient({}, {:?})", sigma, lq.primes)
        }
    }
}

fn run_solve(
    instance: PathBuf,
    trace: Option<PathBuf>,
    depth: Option<usize>,
    oracle_cap: Option<usize>,
    format: Format,
) -> wnu_csp::Result<u8> {
    let (inst, lang) = read_instance(&instance)?;
    let mut cfg = SolveConfig::default();
    if let Some(d) = depth {
        cfg.max_depth = d;
    }
    if let Some(c) = oracle_cap {
        cfg.oracle_cap = c;
    }
    let out = solve(&inst, &lang, &cfg)?;
    if let Some(path) = trace {
        fs::write(path, serialize_trace(&out.trace))?;
    }
    match (&out.answer, format) {
        (Answer::Solution(h), Format::Text) => {
            let named: Vec<&str> = h.iter().map(|&e| lang.element_names[e].as_str()).collect();
            println!("solution: {:?} ({})", h, named.join(","));
        }
        (Answer::NoSolution, Format::Text) => println!("no solution"),
        (answer, Format::Json) => {
            let (value, assignment) = match answer {
                Answer::Solution(h) => ("yes", Some(h.clone())),
                Answer::NoSolution => ("no", None),
            };
            println!(
                "{}",
                serde_json::json!({ "answer": value, "assignment": assignment })
            );
        }
    }
    Ok(if matches!(out.answer, Answer::Solution(_)) { 0 } else { 20 })
}

fn run_check(
    instance: PathBuf,
    trace: PathBuf,
    semantic: bool,
    oracle_cap: Option<usize>,
    format: Format,
) -> wnu_csp::Result<u8> {
    let (inst, lang) = read_instance(&instance)?;
    let parsed = parse_trace(&fs::read_to_string(&trace)?)?;
    let mode = if semantic { CheckMode::Semantic } else { CheckMode::Witness };
    let verdict = verify_trace(&inst, &lang, &parsed, mode, oracle_cap.unwrap_or(1 << 20))?;
    match format {
        Format::Text => {
            for r in &verdict.steps {
                println!("step {:>3} {:<12} {:?}", r.index, r.kind, r.status);
            }
            if !verdict.unchecked.is_empty() {
                println!("semantically unchecked steps: {:?}", verdict.unchecked);
            }
            println!("verdict: {}", if verdict.accept { "ACCEPT" } else { "REJECT" });
        }
        Format::Json => {
            let steps: Vec<_> = verdict
                .steps
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "index": r.index,
                        "kind": r.kind,
                        "status": format!("{:?}", r.status),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::json!({
                    "accept": verdict.accept,
                    "steps": steps,
                    "unchecked": verdict.unchecked,
                })
            );
        }
    }
    Ok(if verdict.accept { 0 } else { 1 })
}

fn run_analyze(instance: PathBuf, format: Format) -> wnu_csp::Result<u8> {
    let (_, lang) = read_instance(&instance)?;
    let profile = wnu_profile(&lang.wnu);
    let full: BTreeSet<usize> = (0..lang.base).collect();
    let congs = enumerate_congruences(&full, &lang.wnu);
    let mut classified = Vec::new();
    for d in subuniverses(&full, &lang.wnu) {
        if d.len() < 2 {
            continue;
        }
        let gamma = restrict_language(&lang, &d);
        let w = classify_four_cases(&d, &lang.wnu, &gamma)?;
        classified.push((d, w));
    }
    match format {
        Format::Text => {
            println!(
                "operation: arity {}, base {}",
                lang.wnu.arity, lang.base
            );
            println!(
                "idempotent: {}; WNU: {}; special WNU: {}",
                yn(profile.idempotent),
                yn(profile.wnu),
                yn(profile.special)
            );
            println!("congruences on the full domain:");
            for c in &congs {
                let blocks: Vec<String> = c
                    .congruence
                    .blocks
                    .iter()
                    .map(|b| format!("{:?}", b.iter().collect::<Vec<_>>()))
                    .collect();
                let mut flags = Vec::new();
                if c.congruence.is_delta() {
                    flags.push("Δ");
                }
                if c.congruence.is_nabla() {
                    flags.push("∇");
                }
                if c.maximal {
                    flags.push("maximal");
                }
                println!("  {} {}", blocks.join(" | "), flags.join(" "));
            }
            println!("four cases per subuniverse:");
            for (d, w) in &classified {
                println!("  {:?}: {}", d.iter().collect::<Vec<_>>(), describe_witness(w));
            }
        }
        Format::Json => {
            let congs: Vec<_> = congs
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "blocks": c.congruence.blocks.iter()
                            .map(|b| b.iter().collect::<Vec<_>>()).collect::<Vec<_>>(),
                        "maximal": c.maximal,
                        "proper": c.proper,
                    })
                })
                .collect();
            let cases: Vec<_> = classified
                .iter()
                .map(|(d, w)| {
                    serde_json::json!({
                        "subuniverse": d.iter().collect::<Vec<_>>(),
                        "case": describe_witness(w),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::json!({
                    "idempotent": profile.idempotent,
                    "wnu": profile.wnu,
                    "special_wnu": profile.special,
                    "congruences": congs,
                    "four_cases": cases,
                })
            );
        }
    }
    Ok(0)
}

fn yn(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn run_cnf(instance: PathBuf, output: Option<PathBuf>) -> wnu_csp::Result<u8> {
    let (inst, _) = read_instance(&instance)?;
    let dimacs = cnf_to_dimacs(&emit_cnf(&inst));
    match output {
        Some(path) => fs::write(path, dimacs)?,
        None => print!("{}", dimacs),
    }
    Ok(0)
}

fn run_gen(
    name: String,
    n: usize,
    density: f64,
    seed: u64,
    output: Option<PathBuf>,
) -> wnu_csp::Result<u8> {
    let lang = template(&name).ok_or_else(|| {
        wnu_csp::Error::Precondition(format!(
            "unknown template {:?}; available: {}",
            name,
            TEMPLATE_NAMES.join(", ")
        ))
    })?;
    let inst = gen_instance(&lang, n, density, seed);
    let report = validate_instance(&inst, &lang);
    if !report.is_empty() {
        return Err(wnu_csp::Error::Internal(report.join("; ")));
    }
    let text = serialize_instance(&inst, &lang);
    match output {
        Some(path) => fs::write(path, text)?,
        None => println!("{}", text),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { instance, trace, depth, oracle_cap, format } => {
            run_solve(instance, trace, depth, oracle_cap, format)
        }
        Command::Check { instance, trace, semantic, oracle_cap, format } => {
            run_check(instance, trace, semantic, oracle_cap, format)
        }
        Command::Analyze { instance, format } => run_analyze(instance, format),
        Command::Cnf { instance, output } => run_cnf(instance, output),
        Command::Gen { template, n, density, seed, output } => {
            run_gen(template, n, density, seed, output)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}

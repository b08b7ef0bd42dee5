//! `boxdistill` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a checked invariant or a reproduction value
//! fails, 2 on usage or parse errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use boxdistill::boxes::{bits_to_string, parse_bits};
use boxdistill::comm::{
    channels_distill_bound, channels_scratch, corollary_holds, make_isolation_plan,
    survey_three_party,
};
use boxdistill::distill::{distill_rounds, distill_to, DistillOptions, DistillationTrace};
use boxdistill::doc::BoxSpec;
use boxdistill::example::reproduce_example;
use boxdistill::localdist::{l1_distance_to_local_with, DistanceOptions};
use boxdistill::rational;
use boxdistill::wiring::sample;
use boxdistill::{ConditionalBox, Error};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "boxdistill", version, about = "Exact analysis of n-party non-signaling boxes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a box document.
    Box {
        spec: PathBuf,
        /// Exit with status 1 if the box signals.
        #[arg(long)]
        check: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Iterate the two-copy distillation round on the noisy n-PR family.
    Distill {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        epsilon: String,
        /// Stop once 1 - epsilon drops below this value.
        #[arg(long, conflicts_with = "rounds", required_unless_present = "rounds")]
        delta: Option<String>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Carry out every exact round on full box tables as well.
        #[arg(long)]
        audit_boxlevel: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Channel counts and isolation plan for a full-correlation document.
    Comm {
        spec: PathBuf,
    },
    /// Exact L1 distance to the local polytope, with certificate.
    Distance {
        spec: PathBuf,
        /// Largest party count to attempt.
        #[arg(long, default_value_t = boxdistill::localdist::DEFAULT_MAX_PARTIES)]
        max_parties: usize,
    },
    /// Channel counts for every three-party Boolean function.
    Survey3 {
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run the five-party worked example end to end.
    ReproduceExample {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Compare sampled output frequencies with the exact distribution.
    Sample {
        spec: PathBuf,
        /// Input bitstring, party 1 first.
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Document(_)
            | Error::Rational(_)
            | Error::EpsilonRange(_)
            | Error::FixedPoint(_)
            | Error::DeltaRange(_)
            | Error::PartyCount(_)
            | Error::VariableIndex { .. }
            | Error::SizeCap { .. }
            | Error::TableSize { .. }
            | Error::NegativeProbability { .. }
            | Error::NotNormalized { .. }
            | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Invariant(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Box { spec, check, format } => cmd_box(&spec, check, format),
        Command::Distill {
            n,
            epsilon,
            delta,
            rounds,
            audit_boxlevel,
            format,
        } => cmd_distill(n, &epsilon, delta.as_deref(), rounds, audit_boxlevel, format),
        Command::Comm { spec } => cmd_comm(&spec),
        Command::Distance { spec, max_parties } => cmd_distance(&spec, max_parties),
        Command::Survey3 { format } => cmd_survey(format),
        Command::ReproduceExample { format } => cmd_reproduce(format),
        Command::Sample {
            spec,
            input,
            samples,
            seed,
        } => cmd_sample(&spec, &input, samples, seed),
    }
}

fn read_spec(path: &PathBuf) -> Result<BoxSpec, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    BoxSpec::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("values serialize"));
}

fn cmd_box(path: &PathBuf, check: bool, format: Format) -> Outcome {
    let b = read_spec(path)?.to_box()?;
    let n = b.n();
    let violation = b.nonsignaling_report();
    let supports: serde_json::Map<String, Value> = (0..b.inputs())
        .map(|x| (bits_to_string(x, n), json!(b.support_size(x))))
        .collect();
    let uniform = b.subset_outputs_uniform(n.saturating_sub(1));
    match format {
        Format::Text | Format::Csv => {
            println!("parties: {n}");
            println!("non-signaling: {}", violation.is_none());
            if let Some(v) = &violation {
                println!("violation: {v}");
            }
            println!("proper subsets uniform: {uniform}");
        }
        Format::Json => print_json(&json!({
            "n": n,
            "support_sizes": supports,
            "nonsignaling": violation.is_none(),
            "violation": violation.as_ref().map(|v| v.to_string()),
            "proper_subsets_uniform": uniform,
        })),
    }
    match violation {
        Some(v) if check => Err(Failure::Invariant(format!("box signals: {v}"))),
        _ => Ok(()),
    }
}

fn trace_json(trace: &DistillationTrace) -> Value {
    json!({
        "n": trace.n,
        "rounds": trace.rounds(),
        "box_level_rounds": trace.box_level_rounds,
        "copies": trace.copies_used().to_string(),
        "epsilons": trace.epsilons.iter().map(|e| e.render()).collect::<Vec<_>>(),
    })
}

fn cmd_distill(
    n: usize,
    epsilon: &str,
    delta: Option<&str>,
    rounds: Option<usize>,
    audit: bool,
    format: Format,
) -> Outcome {
    let e = rational::parse(epsilon)?;
    let opts = DistillOptions {
        box_level: audit,
        ..DistillOptions::default()
    };
    let trace = match (delta, rounds) {
        (Some(d), _) => distill_to(n, &e, &rational::parse(d)?, opts)?,
        (None, Some(r)) => distill_rounds(n, &e, r, opts)?,
        (None, None) => unreachable!("clap requires one of --delta and --rounds"),
    };
    match format {
        Format::Json => print_json(&trace_json(&trace)),
        Format::Csv | Format::Text => print!("{}", trace.to_csv()),
    }
    if !trace.is_consistent() {
        return Err(Failure::Invariant("trace is not consistent with the map".into()));
    }
    Ok(())
}

fn cmd_comm(path: &PathBuf) -> Outcome {
    let f = read_spec(path)?.function()?;
    let s = f.structure();
    let mut out = json!({
        "n": s.n,
        "J": s.j.iter().map(|m| m.indices().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "n_J": s.n_j(),
        "m": s.m.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "support": s.support.indices().collect::<Vec<_>>(),
    });
    if s.n_j() != 1 {
        out["notice"] = json!(format!(
            "theorem hypothesis not met: n_J = {} (need 1); counts are not defined",
            s.n_j()
        ));
        print_json(&out);
        return Ok(());
    }
    out["N_scratch"] = json!(channels_scratch(&s)?);
    out["N_distill_bound"] = json!(channels_distill_bound(&s)?);
    out["corollary_holds"] = json!(corollary_holds(&s)?);
    match make_isolation_plan(&s) {
        Ok(plan) => {
            out["plan"] = json!({
                "isolated_monomial": plan.isolated_monomial.indices().collect::<Vec<_>>(),
                "receiver": plan.receiver.0,
                "channels": plan.channels.iter().map(|(a, b)| [a.0, b.0]).collect::<Vec<_>>(),
                "constants": plan.constant_assignment.iter()
                    .map(|(p, v)| (p.0.to_string(), json!(u8::from(*v))))
                    .collect::<serde_json::Map<_, _>>(),
            });
        }
        Err(e) => out["plan_error"] = json!(e.to_string()),
    }
    print_json(&out);
    Ok(())
}

fn cmd_distance(path: &PathBuf, max_parties: usize) -> Outcome {
    let b: ConditionalBox = read_spec(path)?.to_box()?;
    let opts = DistanceOptions {
        max_parties,
        ..DistanceOptions::default()
    };
    let cert = l1_distance_to_local_with(&b, opts)?;
    let closest = serde_json::to_value(BoxSpec::from_box(&cert.closest_box)).expect("serializes");
    print_json(&json!({
        "distance": rational::format(&cert.distance),
        "primal_witness": cert.primal_witness.iter()
            .map(|(v, w)| json!([v, rational::format(w)]))
            .collect::<Vec<_>>(),
        "dual_witness": cert.dual_witness.iter().map(rational::format).collect::<Vec<_>>(),
        "closest_box": closest,
    }));
    Ok(())
}

fn cmd_survey(format: Format) -> Outcome {
    let report = survey_three_party();
    match format {
        Format::Json => print_json(&serde_json::to_value(&report).expect("serializes")),
        Format::Csv => {
            println!("truth_table,anf,class,n_j,max_m,scratch,distill_bound,corollary_holds");
            let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
            for e in &report.entries {
                println!(
                    "{},{},{},{},{},{},{},{}",
                    e.truth_table,
                    e.anf,
                    e.class,
                    e.n_j,
                    e.m.values().max().copied().unwrap_or(0),
                    opt(e.scratch),
                    opt(e.distill_bound),
                    e.corollary_holds.map(|b| b.to_string()).unwrap_or_default()
                );
            }
        }
        Format::Text => {
            for c in &report.classes {
                println!("{:<28} members {:>3}  condition holds for {:>3}", c.representative, c.members, c.holding);
            }
            for d in &report.discrepancies {
                println!("discrepancy: {d}");
            }
        }
    }
    Ok(())
}

fn cmd_reproduce(format: Format) -> Outcome {
    let report = reproduce_example()?;
    match format {
        Format::Json => print_json(&serde_json::to_value(&report).expect("serializes")),
        Format::Csv => print!("{}", report.trace_csv),
        Format::Text => {
            print!("{}", report.render());
            print!("{}", report.trace_csv);
        }
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure::Invariant(format!("mismatched checks: {}", failed.join(", "))))
    }
}

fn cmd_sample(path: &PathBuf, input: &str, samples: usize, seed: u64) -> Outcome {
    let b = read_spec(path)?.to_box()?;
    let n = b.n();
    let x = parse_bits(input, n)
        .ok_or_else(|| Failure::Usage(format!("input {input:?} is not a {n}-bit string")))?;
    if samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; b.inputs()];
    for _ in 0..samples {
        counts[sample(&b, x, &mut rng)] += 1;
    }
    let total = samples as f64;
    let mut worst: f64 = 0.0;
    let rows: Vec<Value> = (0..b.inputs())
        .map(|a| {
            let p = rational::to_f64(b.prob(x, a));
            let freq = counts[a] as f64 / total;
            let sigma = (p * (1.0 - p) / total).sqrt();
            let z = if sigma > 0.0 {
                (freq - p).abs() / sigma
            } else if counts[a] == 0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
            json!({
                "output": bits_to_string(a, n),
                "exact": rational::format(b.prob(x, a)),
                "frequency": freq,
                "sigmas": z,
            })
        })
        .collect();
    print_json(&json!({
        "input": input,
        "samples": samples,
        "seed": seed,
        "outputs": rows,
        "max_sigmas": worst,
    }));
    if worst > 3.0 {
        return Err(Failure::Invariant(format!(
            "a frequency is {worst:.2} standard deviations from its exact value"
        )));
    }
    Ok(())
}

//! Command-line front end: field inspection, diagram evaluation, rule
//! verification, matrix synthesis, and the interpolation walkthrough.
//!
//! Machine output is a single JSON document on stdout; anything meant for
//! people goes to stderr. Exit code 0 means success, 1 means a verification
//! ran and failed, 2 means the invocation itself was unusable.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use zhff::{
    contract, contract_numeric, equal_diagrams, float_precision, run_interpolation, sample_runs,
    soundness_sweep, synthesize, Diagram, ExactTensor, FieldSpec, LinearPoly,
    OutcomeDistribution, RunCounts,
};

#[derive(Parser)]
#[command(name = "zhff", version, about = "Exact toolkit for a graphical calculus over finite fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe a finite field: modulus, named generator, operation tables
    Field(FieldArgs),
    /// Contract a diagram file to its tensor
    Eval(EvalArgs),
    /// Decide whether two diagram files denote the same linear map
    Equal(EqualArgs),
    /// Sweep every rewrite rule against the contraction engine
    CheckRules(CheckRulesArgs),
    /// Compile a matrix file into a diagram
    Synth(SynthArgs),
    /// Exact outcome statistics for a linear-polynomial quantum query
    Interpolate(InterpolateArgs),
    /// Walk the full interpolation pipeline at q = 4
    Demo(DemoArgs),
}

#[derive(Args)]
struct FieldArgs {
    /// Field order, as an alternative to --p/--t
    #[arg(long, conflicts_with_all = ["p", "t"])]
    q: Option<u64>,
    /// Characteristic
    #[arg(long, required_unless_present = "q")]
    p: Option<u64>,
    /// Extension degree
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// Modulus coefficients as a JSON array, low degree first
    #[arg(long)]
    modulus: Option<String>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Diagram JSON file
    #[arg(long)]
    diagram: PathBuf,
    /// Emit complex entries instead of exact ring elements
    #[arg(long)]
    numeric: bool,
    /// Write the result here instead of stdout
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct EqualArgs {
    /// First diagram JSON file
    left: PathBuf,
    /// Second diagram JSON file
    right: PathBuf,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct CheckRulesArgs {
    /// Field order
    #[arg(long)]
    q: u64,
    /// Largest spider arity instantiated per rule
    #[arg(long, default_value_t = 2)]
    max_arity: usize,
    /// Worker threads for the sweep
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Matrix JSON file (shape plus exact entries)
    #[arg(long)]
    matrix: PathBuf,
    /// Expected field order; rejected if the matrix disagrees
    #[arg(long)]
    q: Option<u64>,
    /// Re-contract the output and confirm it reproduces the matrix
    #[arg(long)]
    check: bool,
    /// Write the diagram here instead of stdout
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct InterpolateArgs {
    /// Field order
    #[arg(long)]
    q: u64,
    /// Slope: basis index, or coefficient array like "[0,1]"
    #[arg(long)]
    a: String,
    /// Offset: basis index, or coefficient array like "[1,0]"
    #[arg(long)]
    b: String,
    /// Also draw this many Monte-Carlo samples
    #[arg(long)]
    runs: Option<u64>,
    /// Seed for the sampler
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    pretty: bool,
}

/// Failures that should end the process with a chosen code.
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError { message: message.into(), code: 2 }
    }
}

macro_rules! usage_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> CliError {
                CliError::usage(e.to_string())
            }
        }
    )*};
}

usage_from!(
    std::io::Error,
    zhff::DiagramError,
    zhff::FieldError,
    zhff::TensorError,
    zhff::InterpError
);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Field(args) => cmd_field(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Equal(args) => cmd_equal(args),
        Command::CheckRules(args) => cmd_check_rules(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Interpolate(args) => cmd_interpolate(args),
        Command::Demo(args) => cmd_demo(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn emit(doc: &Value, pretty: bool, output: Option<&PathBuf>) -> Result<(), CliError> {
    let text = if pretty {
        serde_json::to_string_pretty(doc).expect("serializable")
    } else {
        serde_json::to_string(doc).expect("serializable")
    };
    match output {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn read_json(path: &PathBuf) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn read_diagram(path: &PathBuf) -> Result<Diagram, CliError> {
    Ok(Diagram::from_json(&read_json(path)?)?)
}

fn cmd_field(args: FieldArgs) -> Result<u8, CliError> {
    let modulus: Option<Vec<u64>> = match &args.modulus {
        Some(text) => Some(serde_json::from_str(text).map_err(|e| {
            CliError::usage(format!("--modulus must be a JSON integer array: {e}"))
        })?),
        None => None,
    };
    let field = match args.q {
        Some(q) => {
            if modulus.is_some() {
                return Err(CliError::usage("--modulus requires --p and --t"));
            }
            FieldSpec::of_order(q)?
        }
        None => {
            let p = args.p.expect("clap enforces --p without --q");
            FieldSpec::new(p, args.t, modulus.as_deref())?
        }
    };
    let q = field.q();
    let mut doc = json!({
        "field": field.to_json(),
        "q": q,
        "generator": field.kappa().coeffs(),
        "elements": field.enumerate().iter().map(|e| e.coeffs().to_vec()).collect::<Vec<_>>(),
    });
    // operation tables stay readable only at desk scale
    if q <= 64 {
        let idx = |e| field.index_of(&e);
        let table = |op: &dyn Fn(u64, u64) -> u64| -> Vec<Vec<u64>> {
            (0..q)
                .map(|i| (0..q).map(|j| op(i, j)).collect())
                .collect()
        };
        doc["tables"] = json!({
            "add": table(&|i, j| idx(field.add(&field.element_at(i), &field.element_at(j)))),
            "mul": table(&|i, j| idx(field.mul(&field.element_at(i), &field.element_at(j)))),
            "bilinear": table(&|i, j| field.bilinear(&field.element_at(i), &field.element_at(j))),
        });
    }
    emit(&doc, args.pretty, None)?;
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<u8, CliError> {
    let diagram = read_diagram(&args.diagram)?;
    let doc = if args.numeric {
        contract_numeric(&diagram, float_precision()).to_json()
    } else {
        contract(&diagram).to_json()
    };
    emit(&doc, args.pretty, args.output.as_ref())?;
    Ok(0)
}

fn cmd_equal(args: EqualArgs) -> Result<u8, CliError> {
    let left = read_diagram(&args.left)?;
    let right = read_diagram(&args.right)?;
    let equal = equal_diagrams(&left, &right)?;
    emit(&json!({ "equal": equal }), args.pretty, None)?;
    Ok(if equal { 0 } else { 1 })
}

fn cmd_check_rules(args: CheckRulesArgs) -> Result<u8, CliError> {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage(format!("--jobs: {e}")))?;
    }
    let field = FieldSpec::of_order(args.q)?;
    let tol = float_precision();
    let records = soundness_sweep(&field, args.max_arity, tol);
    let ok = records.iter().all(|r| r.ok(tol));
    let doc = json!({
        "q": args.q,
        "max_arity": args.max_arity,
        "tolerance": tol,
        "ok": ok,
        "checked": records.len(),
        "records": records
            .iter()
            .map(|r| json!({
                "rule": r.rule.name(),
                "params": r.detail,
                "exact_ok": r.exact_ok,
                "float_dev": r.float_dev,
            }))
            .collect::<Vec<_>>(),
    });
    emit(&doc, args.pretty, None)?;
    if !ok {
        eprintln!(
            "{} of {} instances failed",
            records.iter().filter(|r| !r.ok(tol)).count(),
            records.len()
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn cmd_synth(args: SynthArgs) -> Result<u8, CliError> {
    let matrix = ExactTensor::from_json(&read_json(&args.matrix)?)?;
    if let Some(q) = args.q {
        if matrix.field().q() != q {
            return Err(CliError::usage(format!(
                "matrix lives over a field of order {}, not {q}",
                matrix.field().q()
            )));
        }
    }
    let diagram = synthesize(&matrix)?;
    if args.check && !contract(&diagram).equal(&matrix) {
        emit(&json!({ "verified": false }), args.pretty, None)?;
        return Ok(1);
    }
    eprintln!(
        "compiled {}->{} matrix into {} nodes",
        matrix.n_in(),
        matrix.n_out(),
        diagram.nodes().len()
    );
    emit(&diagram.to_json(), args.pretty, args.output.as_ref())?;
    Ok(0)
}

fn parse_element(field: &FieldSpec, text: &str, flag: &str) -> Result<zhff::FieldElement, CliError> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| CliError::usage(format!("--{flag}: {e}")))?;
    match v {
        Value::Number(n) => {
            let i = n
                .as_u64()
                .filter(|i| *i < field.q())
                .ok_or_else(|| CliError::usage(format!("--{flag}: index out of range")))?;
            Ok(field.element_at(i))
        }
        Value::Array(_) => {
            let coeffs: Vec<u64> = serde_json::from_value(v)
                .map_err(|e| CliError::usage(format!("--{flag}: {e}")))?;
            if coeffs.len() != field.t() || coeffs.iter().any(|&c| c >= field.p()) {
                return Err(CliError::usage(format!(
                    "--{flag}: expected {} coefficients below {}",
                    field.t(),
                    field.p()
                )));
            }
            // coefficient arrays are base-p digits of the basis index
            let index = coeffs
                .iter()
                .rev()
                .fold(0u64, |acc, &c| acc * field.p() + c);
            Ok(field.element_at(index))
        }
        _ => Err(CliError::usage(format!(
            "--{flag} must be a basis index or a coefficient array"
        ))),
    }
}

fn distribution_json(field: &FieldSpec, dist: &OutcomeDistribution) -> Value {
    json!({
        "p_abort": dist.p_abort.to_string(),
        "joint": dist
            .joint
            .iter()
            .map(|((x, z), p)| json!({
                "first": field.element_at(*x).coeffs(),
                "second": field.element_at(*z).coeffs(),
                "probability": p.to_string(),
            }))
            .collect::<Vec<_>>(),
    })
}

fn counts_json(counts: &RunCounts) -> Value {
    json!({
        "aborts": counts.aborts,
        "keeps": counts.keeps,
        "first": counts
            .first_counts
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect::<serde_json::Map<_, _>>(),
        "second": counts
            .second_counts
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect::<serde_json::Map<_, _>>(),
    })
}

fn cmd_interpolate(args: InterpolateArgs) -> Result<u8, CliError> {
    let field = FieldSpec::of_order(args.q)?;
    let a = parse_element(&field, &args.a, "a")?;
    let b = parse_element(&field, &args.b, "b")?;
    let linear = LinearPoly::new(&field, a, b)?;
    let run = run_interpolation(&field, &linear)?;
    let mut doc = json!({
        "field": field.to_json(),
        "a": linear.a().coeffs(),
        "b": linear.b().coeffs(),
        "quantum_queries": run.quantum_queries,
        "distribution": distribution_json(&field, &run.distribution),
    });
    if let Some(runs) = args.runs {
        let counts = sample_runs(&field, &linear, runs, args.seed)?;
        doc["samples"] = json!({
            "runs": runs,
            "seed": args.seed,
            "counts": counts_json(&counts),
        });
    }
    emit(&doc, args.pretty, None)?;
    Ok(0)
}

fn cmd_demo(args: DemoArgs) -> Result<u8, CliError> {
    let field = FieldSpec::of_order(4)?;
    let e = |i: u64| field.element_at(i);
    // a hidden cubic: the generator times x^3, plus x, plus 1
    let hidden = vec![e(1), e(1), e(0), e(2)];
    let result = zhff::interpolate_pipeline(&field, &hidden)?;
    eprintln!(
        "hidden cubic reduced with {} classical queries, then 1 quantum query",
        result.classical_queries
    );
    eprintln!(
        "abort probability {}, correct-offset probability {}",
        result.distribution.p_abort,
        result
            .distribution
            .p_second(field.index_of(result.linear.b()))
    );
    let recovered = result.recovered.coeffs() == &hidden[..];
    let doc = json!({
        "field": field.to_json(),
        "hidden": hidden.iter().map(|c| c.coeffs().to_vec()).collect::<Vec<_>>(),
        "sample_points": result
            .reduction
            .points
            .iter()
            .map(|x| x.coeffs().to_vec())
            .collect::<Vec<_>>(),
        "classical_queries": result.classical_queries,
        "quantum_queries": result.quantum_queries,
        "reduced_slope": result.linear.a().coeffs(),
        "reduced_offset": result.linear.b().coeffs(),
        "distribution": distribution_json(&field, &result.distribution),
        "recovered": result
            .recovered
            .coeffs()
            .iter()
            .map(|c| c.coeffs().to_vec())
            .collect::<Vec<_>>(),
        "recovered_exactly": recovered,
    });
    emit(&doc, args.pretty, None)?;
    Ok(if recovered { 0 } else { 1 })
}

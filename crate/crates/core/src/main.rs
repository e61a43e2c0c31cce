//! Command-line surface: verification, configuration surveys, the gate
//! budget search, controlled-U decomposition, and the identity battery.
//!
//! Exit codes are a stable contract: 0 for success or an expected verdict
//! pattern, 1 for input or internal errors (including failed checks), 2
//! when a survey's verdicts do not match the expected pattern. Reports are
//! byte-deterministic for a fixed seed; measured wall time goes to stderr
//! only.

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use margolus::circuit::{
    circuit_text, decompose_controlled_u, embed_controlled, eval_circuit, CnotConfig,
};
use margolus::qmat::{self, phase_dist, C64, CMat};
use margolus::survey::{
    check_identities, min_single_qubit_search, run_survey, verify_margolus, CheckRecord,
    CheckReport, SurveyReport,
};
use margolus::synth::{
    OptimizerSettings, Verdict, DEFAULT_FEASIBLE_TOL, DEFAULT_INFEASIBLE_FLOOR, DEFAULT_RESTARTS,
    DEFAULT_SEED,
};
use std::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "margolus",
    version,
    about = "Surveys and exact checks for the simplified Toffoli gate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the reference build and its basis action.
    Verify(VerifyArgs),
    /// Synthesize every k-CNOT configuration against the target.
    Survey(SurveyArgs),
    /// Search slot subsets of a configuration for feasible gate budgets.
    Mingates(MingatesArgs),
    /// Decompose a controlled single-qubit gate into the two-CNOT template.
    Decompose(DecomposeArgs),
    /// Run the seeded identity battery behind the survey arguments.
    Identities(IdentitiesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Markdown,
}

#[derive(Args)]
struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Markdown)]
    output: OutputFormat,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Master seed; work items derive their own seeds from it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random restarts per work item.
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    /// Worker threads for independent work items.
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Best cost at or below this is a feasible verdict.
    #[arg(long, default_value_t = DEFAULT_FEASIBLE_TOL)]
    feasible_tol: f64,
    /// Best cost at or above this after all restarts is evidence of
    /// infeasibility.
    #[arg(long, default_value_t = DEFAULT_INFEASIBLE_FLOOR)]
    infeasible_floor: f64,
}

impl BudgetArgs {
    fn to_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            restarts: self.restarts,
            seed: self.seed,
            feasible_tol: self.feasible_tol,
            infeasible_floor: self.infeasible_floor,
            ..OptimizerSettings::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetKind {
    /// The simplified Toffoli gate.
    M,
    /// The same gate with the two most significant wires interchanged.
    Mprime,
}

impl TargetKind {
    fn matrix(self) -> CMat {
        margolus::circuit::permuted_target(matches!(self, TargetKind::Mprime))
    }

    fn label(self) -> &'static str {
        match self {
            TargetKind::M => "m",
            TargetKind::Mprime => "mprime",
        }
    }

    fn expected_config(self) -> &'static [u8] {
        match self {
            TargetKind::M => &[0, 1, 0],
            TargetKind::Mprime => &[1, 0, 1],
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SurveyArgs {
    /// CNOT count of the surveyed configurations.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    cnots: u8,
    /// Gate the configurations are synthesized against.
    #[arg(long, value_enum, default_value_t = TargetKind::M)]
    target: TargetKind,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Report the verdicts without holding them against the expected
    /// pattern (always exit 0 on completion).
    #[arg(long)]
    no_expect: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MingatesArgs {
    /// Number of slots freed per subset.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=12))]
    k: u8,
    /// CNOT configuration whose template is searched.
    #[arg(long, default_value = "0,1,0")]
    config: String,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Report the verdicts without holding them against the expected
    /// pattern (always exit 0 on completion).
    #[arg(long)]
    no_expect: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
#[command(group = ArgGroup::new("source").required(true).multiple(false))]
struct DecomposeArgs {
    /// Named payload gate: x, z, y, h, g or gdag.
    #[arg(long, group = "source")]
    gate: Option<String>,
    /// File holding a 2x2 matrix: one row per line, entries as re,im.
    #[arg(long, group = "source")]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct IdentitiesArgs {
    /// Master seed for the sampled sweeps.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Length of the main predicate sweep; the other sweeps scale with it.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version leave through clap's error path with success;
            // everything else is an input error, exit 1 by the contract.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn Error>> {
    match cli.command {
        Command::Verify(args) => {
            let t0 = Instant::now();
            let report = verify_margolus();
            emit_check(&report, &args.output, t0)?;
            Ok(exit_flag(report.all_pass(), 1))
        }
        Command::Survey(args) => {
            let settings = args.budget.to_settings();
            let target = args.target.matrix();
            let t0 = Instant::now();
            let report = run_survey(
                args.cnots as usize,
                &settings,
                &target,
                args.target.label(),
                args.budget.workers,
            )?;
            emit_survey(&report, &args.output, t0)?;
            if args.no_expect {
                return Ok(ExitCode::SUCCESS);
            }
            Ok(exit_flag(
                survey_matches_expectation(&report, args.cnots, args.target),
                2,
            ))
        }
        Command::Mingates(args) => {
            let cfg = CnotConfig::parse(&args.config)?;
            let settings = args.budget.to_settings();
            let t0 = Instant::now();
            let report =
                min_single_qubit_search(&cfg, args.k as usize, &settings, args.budget.workers)?;
            emit_survey(&report, &args.output, t0)?;
            if args.no_expect {
                return Ok(ExitCode::SUCCESS);
            }
            let feasible = report.feasible_count();
            let ok = if args.k >= 4 { feasible >= 1 } else { feasible == 0 };
            Ok(exit_flag(ok, 2))
        }
        Command::Decompose(args) => {
            let (u, source) = load_payload(&args)?;
            let t0 = Instant::now();
            let circuit = decompose_controlled_u(&u)?;
            let target = embed_controlled(2, 1, 0, &u)?;
            let d = phase_dist(&eval_circuit(&circuit), &target)?;
            let report = CheckReport {
                command: format!("decompose {source}"),
                seed: 0,
                samples: None,
                records: vec![CheckRecord {
                    check: "round_trip",
                    pass: d <= 1e-10,
                    detail: format!("phase_dist {d:.3e}"),
                }],
                table_label: "circuit",
                table: circuit_text(&circuit)?
                    .lines()
                    .map(str::to_owned)
                    .collect(),
            };
            emit_check(&report, &args.output, t0)?;
            Ok(exit_flag(report.all_pass(), 1))
        }
        Command::Identities(args) => {
            let t0 = Instant::now();
            let report = check_identities(args.seed, args.samples);
            emit_check(&report, &args.output, t0)?;
            Ok(exit_flag(report.all_pass(), 1))
        }
    }
}

fn exit_flag(ok: bool, fail_code: u8) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(fail_code)
    }
}

fn survey_matches_expectation(report: &SurveyReport, cnots: u8, target: TargetKind) -> bool {
    let feasible: Vec<_> = report.records.iter().filter(|r| r.is_feasible()).collect();
    if cnots < 3 {
        return feasible.is_empty();
    }
    feasible.len() == 1
        && feasible[0]
            .config
            .as_ref()
            .is_some_and(|cfg| cfg.codes() == target.expected_config())
}

fn emit_survey(
    report: &SurveyReport,
    output: &OutputArgs,
    t0: Instant,
) -> Result<(), Box<dyn Error>> {
    let text = match output.output {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Markdown => report.to_markdown(),
    };
    let feasible = report
        .records
        .iter()
        .filter(|r| r.verdict() == Some(Verdict::Feasible))
        .count();
    emit(text, output)?;
    eprintln!(
        "elapsed {:.3}s ({} records, {} feasible)",
        t0.elapsed().as_secs_f64(),
        report.records.len(),
        feasible
    );
    Ok(())
}

fn emit_check(report: &CheckReport, output: &OutputArgs, t0: Instant) -> Result<(), Box<dyn Error>> {
    let text = match output.output {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Markdown => report.to_markdown(),
    };
    emit(text, output)?;
    let passed = report.records.iter().filter(|r| r.pass).count();
    eprintln!(
        "elapsed {:.3}s ({}/{} checks pass)",
        t0.elapsed().as_secs_f64(),
        passed,
        report.records.len()
    );
    Ok(())
}

fn emit(text: String, output: &OutputArgs) -> std::io::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_payload(args: &DecomposeArgs) -> Result<(CMat, String), Box<dyn Error>> {
    if let Some(name) = &args.gate {
        let gate = match name.to_ascii_lowercase().as_str() {
            "x" => qmat::x(),
            "z" => qmat::z(),
            "y" => qmat::y(),
            "h" => qmat::h(),
            "g" => qmat::g(),
            "gdag" => qmat::g_dag(),
            other => return Err(format!("unknown gate '{other}'; expected x, z, y, h, g or gdag").into()),
        };
        return Ok((gate, format!("--gate {}", name.to_ascii_lowercase())));
    }
    let path = args.matrix.as_ref().expect("clap enforces the source group");
    let text = std::fs::read_to_string(path)?;
    Ok((parse_matrix(&text)?, format!("--matrix {}", path.display())))
}

/// Parses a 2x2 complex matrix: one row per line, whitespace-separated
/// entries, each entry "re,im". Blank lines and '#' comments are skipped.
fn parse_matrix(text: &str) -> Result<CMat, Box<dyn Error>> {
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        for tok in line.split_whitespace() {
            let (re, im) = tok
                .split_once(',')
                .ok_or_else(|| format!("matrix entry '{tok}' is not re,im"))?;
            entries.push(C64::new(re.trim().parse()?, im.trim().parse()?));
        }
    }
    if entries.len() != 4 {
        return Err(format!("expected 4 matrix entries, found {}", entries.len()).into());
    }
    Ok(CMat::new(2, entries)?)
}

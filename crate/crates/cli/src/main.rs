//! Command-line surface for the claim protocol engine.
//!
//! Exit codes: 0 success, 1 expected/actual outcome mismatch, 2 ledger
//! verification failure, 3 configuration or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use claimchain_core::canonical::{digest_from_hex, to_hex};
use claimchain_core::gas::{
    parse_price_csv, reference_reports, render_reports, GasSchedule, ReportFormat,
};
use claimchain_core::ledger::ChainStatus;
use claimchain_core::scenario::{
    expected_outcome, run_scenario, run_suite, FraudScenario, ScenarioKind, SuiteConfig,
};
use claimchain_core::{Ledger, Money};

const EXIT_MISMATCH: u8 = 1;
const EXIT_CHAIN: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(
    name = "claimchain",
    about = "Multi-signature insurance claim processing over a tamper-evident ledger",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the happy path and pretty-print the audit trail.
    Demo {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run one named scenario and write its ledger and outcome.
    RunScenario {
        /// Scenario name (happy-path, phantom-billing, upcoding, unbundling,
        /// identity-theft, policyholder-mismatch).
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a configured scenario suite and write ledgers plus summaries.
    RunSuite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-verify a persisted ledger's hash chain.
    VerifyLedger {
        #[arg(long)]
        file: PathBuf,
    },
    /// Price the reference operations over a daily price series.
    ReportCosts {
        /// Gas schedule JSON; the built-in default schedule when omitted.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// CSV with header day,gas_price_gwei,token_usd.
        #[arg(long)]
        prices: PathBuf,
        /// Output format: csv or table.
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Print one claim's slice of a ledger.
    Audit {
        #[arg(long)]
        ledger: PathBuf,
        /// Claim id as 64 hex characters.
        #[arg(long)]
        claim: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Demo { seed } => demo(seed),
        Command::RunScenario { name, seed, out } => run_one_scenario(&name, seed, &out),
        Command::RunSuite { config, out } => run_suite_cmd(&config, &out),
        Command::VerifyLedger { file } => verify_ledger(&file),
        Command::ReportCosts {
            schedule,
            prices,
            format,
        } => report_costs(schedule.as_deref(), &prices, &format),
        Command::Audit { ledger, claim } => audit(&ledger, &claim),
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn demo(seed: u64) -> Result<ExitCode, String> {
    let run = run_scenario(&FraudScenario::catalog(ScenarioKind::HappyPath), seed)
        .map_err(|e| e.to_string())?;
    let engine = &run.engine;
    let claim = engine.claim(&run.claim_id).ok_or("claim vanished")?;
    let policy = engine.policy(&claim.policy_id).ok_or("policy vanished")?;

    println!("claim {}", claim.claim_id_hex());
    println!(
        "  policy {}  patient {}  provider {}  insurer {}",
        policy.policy_id, claim.patient_id, claim.provider_id, policy.insurer_id
    );
    println!("  state: {}", claim.state);
    println!();
    println!("line items");
    let mut total = Money::ZERO;
    for line in &claim.lines {
        println!("  {:<8} {:>12}", line.encounter_code.as_str(), line.amount.to_string());
        total = total
            .checked_add(line.amount)
            .map_err(|e| e.to_string())?;
    }
    let (copay, claimable) = claimchain_core::policy::compute_copay_split(total, policy);
    println!("  {:<8} {:>12}", "total", total.to_string());
    println!("  {:<8} {:>12}  (charged directly to the patient)", "copay", copay.to_string());
    println!("  {:<8} {:>12}", "claimed", claimable.to_string());

    if let Some(decision) = engine.approval(&run.claim_id) {
        println!();
        println!("insurer decision");
        for line in &decision.lines {
            println!(
                "  {:<8} submitted {:>12}  approved {:>12}  delta {:>10}",
                line.encounter_code.as_str(),
                line.submitted.to_string(),
                line.approved.to_string(),
                line.delta.to_string(),
            );
        }
        println!("  approved total {}", decision.total_approved);
    }

    println!();
    println!("audit trail");
    for record in engine.audit_trail(&run.claim_id) {
        println!(
            "  [{}] ts={} {:<16} hash={}",
            record.index,
            record.ts_ms,
            record.kind.to_string(),
            &to_hex(&record.record_hash)[..16],
        );
    }
    println!();
    println!("ledger chain: {}", engine.ledger().verify_chain());

    if claim.state == claimchain_core::ClaimState::Closed {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_MISMATCH))
    }
}

fn run_one_scenario(name: &str, seed: u64, out: &Path) -> Result<ExitCode, String> {
    let kind = ScenarioKind::from_str(name).map_err(|e| e.to_string())?;
    let scenario = FraudScenario::catalog(kind);
    let run = run_scenario(&scenario, seed).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let ledger_path = out.join(format!("{}-{seed}.jsonl", kind.slug()));
    run.engine
        .ledger()
        .write_jsonl(&ledger_path)
        .map_err(|e| e.to_string())?;
    let outcome_path = out.join(format!("{}-{seed}-outcome.json", kind.slug()));
    std::fs::write(
        &outcome_path,
        serde_json::to_string_pretty(&run.outcome).expect("outcome serializes"),
    )
    .map_err(|e| format!("{}: {e}", outcome_path.display()))?;

    let expected = expected_outcome(kind);
    let matched = expected.matches(&run.outcome);
    println!(
        "{kind}: blocked={} blocked_at={:?} reason={:?} evidence={:?}",
        run.outcome.blocked, run.outcome.blocked_at, run.outcome.reason, run.outcome.evidence
    );
    println!("ledger written to {}", ledger_path.display());
    if matched {
        println!("outcome matches the catalog expectation");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("MISMATCH: expected {expected:?}");
        Ok(ExitCode::from(EXIT_MISMATCH))
    }
}

fn run_suite_cmd(config_path: &Path, out: &Path) -> Result<ExitCode, String> {
    let text = read(config_path)?;
    let config = SuiteConfig::from_json(&text).map_err(|e| e.to_string())?;
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let report = run_suite(&config, config_dir, out).map_err(|e| e.to_string())?;
    print!("{}", report.render_table());
    if report.all_matched {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_MISMATCH))
    }
}

fn verify_ledger(file: &Path) -> Result<ExitCode, String> {
    let text = read(file)?;
    let ledger = Ledger::parse_jsonl(&text).map_err(|e| e.to_string())?;
    match ledger.verify_chain() {
        ChainStatus::Ok => {
            println!("ok: {} records, chain verifies", ledger.len());
            Ok(ExitCode::SUCCESS)
        }
        ChainStatus::FirstBadIndex(i) => {
            println!("TAMPERED: first bad index {i}");
            Ok(ExitCode::from(EXIT_CHAIN))
        }
    }
}

fn report_costs(
    schedule_path: Option<&Path>,
    prices: &Path,
    format: &str,
) -> Result<ExitCode, String> {
    let schedule = match schedule_path {
        Some(path) => GasSchedule::from_json(&read(path)?).map_err(|e| e.to_string())?,
        None => GasSchedule::default(),
    };
    let format = ReportFormat::from_str(format)?;
    let series = parse_price_csv(&read(prices)?).map_err(|e| e.to_string())?;
    let reports = reference_reports(&schedule, &series).map_err(|e| e.to_string())?;
    print!("{}", render_reports(&reports, format));
    Ok(ExitCode::SUCCESS)
}

fn audit(ledger_path: &Path, claim_hex: &str) -> Result<ExitCode, String> {
    let claim_id = digest_from_hex(claim_hex)
        .ok_or_else(|| format!("claim id must be 64 hex characters, got {claim_hex:?}"))?;
    let text = read(ledger_path)?;
    let ledger = Ledger::parse_jsonl(&text).map_err(|e| e.to_string())?;
    if let ChainStatus::FirstBadIndex(i) = ledger.verify_chain() {
        println!("TAMPERED: first bad index {i}; refusing to audit");
        return Ok(ExitCode::from(EXIT_CHAIN));
    }
    let trail = ledger.audit_trail(&claim_id);
    if trail.is_empty() {
        println!("no records reference claim {claim_hex}");
        return Ok(ExitCode::SUCCESS);
    }
    for record in trail {
        let body: serde_json::Value =
            serde_json::from_slice(&record.payload).unwrap_or(serde_json::Value::Null);
        println!(
            "[{}] ts={} {:<16} {}",
            record.index,
            record.ts_ms,
            record.kind.to_string(),
            serde_json::to_string(&body).expect("value serializes"),
        );
    }
    Ok(ExitCode::SUCCESS)
}

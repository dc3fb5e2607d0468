use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Subcommand};
use mixpack_core::exec::Execution;
use mixpack_core::packing::{PackingChoice, SearchOptions, Signedness};
use mixpack_core::profile::DspProfile;
use mixpack_core::sim::{verify_choice, SamplePolicy, ScheduleContext, VerificationReport, DEFAULT_SEED};
use mixpack_core::table::{build_table, search_optimal, BuildOptions, KernelShape, LookupTable, SeqLen};
use serde::{Deserialize, Serialize};

use crate::io::{emit, profile, read};

#[derive(Debug, Subcommand)]
pub enum PackCommand {
    /// Optimal packing for one bit-width pair.
    Search(SearchArgs),
    /// Verified lookup table over a bit-width grid.
    Table(TableArgs),
    /// Re-verify every entry of a lookup table.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// Built-in profile name or profile JSON path.
    #[arg(long, env = "MIXPACK_PROFILE", default_value = "dsp48e2")]
    pub profile: String,
    /// Kernel shape as HxW.
    #[arg(long, default_value = "1x1")]
    pub kernel: KernelShape,
    /// Sequence length for filter packing: `generic` or a positive integer.
    #[arg(long, default_value = "generic")]
    pub seq_len: SeqLen,
    /// Two's-complement operands instead of unsigned.
    #[arg(long)]
    pub signed: bool,
    #[arg(long)]
    pub allow_overpack: bool,
    #[arg(long)]
    pub allow_separation: bool,
}

impl SpaceArgs {
    fn options(&self) -> SearchOptions {
        SearchOptions {
            allow_overpack: self.allow_overpack,
            allow_separation: self.allow_separation,
            signedness: if self.signed {
                Signedness::TwosComplement
            } else {
                Signedness::Unsigned
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Exhaustive verification up to this many operand bits per multiply.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(0..=40))]
    pub exhaustive_bits: u32,
    /// Random trials above the exhaustive limit.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Run on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

impl PolicyArgs {
    fn policy(&self) -> SamplePolicy {
        SamplePolicy {
            exhaustive_bits: self.exhaustive_bits,
            samples: self.samples,
            seed: self.seed,
            exec: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub wb: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub ab: u32,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Output file; stdout otherwise.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
pub struct BitRange(u32, u32);

impl std::str::FromStr for BitRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bit range must look like 2..8, got `{s}`");
        let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
        let lo: u32 = lo.parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim_start_matches('=').parse().map_err(|_| bad())?;
        if lo == 0 || lo > hi || hi > 64 {
            return Err(bad());
        }
        Ok(BitRange(lo, hi))
    }
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Inclusive width range for both operands.
    #[arg(long, default_value = "2..8")]
    pub bits: BitRange,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the throughput grid as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub table: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Write the per-entry reports here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(cmd: PackCommand) -> Result<()> {
    match cmd {
        PackCommand::Search(a) => search(a),
        PackCommand::Table(a) => table(a),
        PackCommand::Verify(a) => verify(a),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchDoc {
    version: u32,
    profile: DspProfile,
    kernel_shape: KernelShape,
    seq_len_policy: SeqLen,
    choice: PackingChoice,
    verification: VerificationSummary,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerificationSummary {
    mode: mixpack_core::sim::VerificationMode,
    trials: u64,
    mismatches: u64,
    accumulation_budget: u64,
    accumulation_trials: u64,
    schedule_trials: u64,
}

impl From<&VerificationReport> for VerificationSummary {
    fn from(r: &VerificationReport) -> Self {
        VerificationSummary {
            mode: r.mode,
            trials: r.trials,
            mismatches: r.mismatches,
            accumulation_budget: r.accumulation_budget,
            accumulation_trials: r.accumulation_trials,
            schedule_trials: r.schedule_trials,
        }
    }
}

fn describe(c: &PackingChoice) -> String {
    format!(
        "({}, {}) t_mul={} e_g={} strategy={:?} overpacked={} separated={} gates={}",
        c.w_b,
        c.a_b,
        c.t_mul,
        c.e_g,
        c.strategy(),
        c.overpacked(),
        c.separated(),
        c.correction_gates
    )
}

fn search(a: SearchArgs) -> Result<()> {
    let profile = profile(&a.space.profile)?;
    let shape = a.space.kernel;
    let choice = search_optimal(a.wb, a.ab, shape, a.space.seq_len, &profile, a.space.options())?;
    let ctx = ScheduleContext {
        rows: shape.k_h,
        k: shape.k_w,
        seq: a.space.seq_len,
    };
    let report = verify_choice(&choice, &profile, &a.policy.policy(), Some(&ctx))?;
    if !report.passed() {
        eprintln!("{}", serde_json::to_string_pretty(&report)?);
        bail!(mixpack_core::Error::Verification(format!(
            "{} mismatches",
            report.mismatches
        )));
    }
    let doc = SearchDoc {
        version: 1,
        profile: profile.clone(),
        kernel_shape: shape,
        seq_len_policy: a.space.seq_len,
        choice,
        verification: (&report).into(),
    };
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    let back: SearchDoc = serde_json::from_str(&text)?;
    back.choice
        .recheck(shape.k_w, a.space.seq_len, &profile)
        .map_err(mixpack_core::Error::Invariant)?;
    emit(a.output.as_ref(), &text)?;
    eprintln!("{}", describe(&doc.choice));
    Ok(())
}

fn table(a: TableArgs) -> Result<()> {
    let profile = profile(&a.space.profile)?;
    let opts = BuildOptions {
        bits_min: a.bits.0,
        bits_max: a.bits.1,
        seq: a.space.seq_len,
        search: a.space.options(),
        policy: a.policy.policy(),
    };
    let t = build_table(a.space.kernel, &profile, &opts)?;
    let text = t.to_json();
    if LookupTable::from_json(&text)? != t {
        bail!(mixpack_core::Error::Invariant(
            "table does not survive a round trip".into()
        ));
    }
    if let Err(m) = t.check_monotone() {
        bail!(mixpack_core::Error::Invariant(m));
    }
    emit(a.output.as_ref(), &text)?;
    if let Some(csv) = &a.csv {
        emit(Some(csv), &t.to_csv()?)?;
    }
    eprintln!(
        "{} table, {} entries, bits {}..={}",
        t.kernel_shape,
        t.entries.len(),
        t.bits_min,
        t.bits_max
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EntryCheck {
    w_b: u32,
    a_b: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    invariant_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<VerificationReport>,
    passed: bool,
}

fn verify(a: VerifyArgs) -> Result<()> {
    let text = read(&a.table)?;
    let t = LookupTable::parse_document(&text)?;
    let policy = a.policy.policy();
    let ctx = t.schedule_context();
    let mut checks = Vec::with_capacity(t.entries.len());
    for e in &t.entries {
        let (invariant_error, report) = match t.check_entry(e) {
            Err(m) => (Some(m), None),
            Ok(()) => match verify_choice(e, &t.profile, &policy, Some(&ctx)) {
                Ok(r) => (None, Some(r)),
                Err(err) => (Some(err.to_string()), None),
            },
        };
        let passed = invariant_error.is_none() && report.as_ref().is_some_and(|r| r.passed());
        checks.push(EntryCheck {
            w_b: e.w_b,
            a_b: e.a_b,
            invariant_error,
            report,
            passed,
        });
    }
    let failed: Vec<&EntryCheck> = checks.iter().filter(|c| !c.passed).collect();
    let doc = serde_json::json!({
        "version": 1,
        "kernel_shape": t.kernel_shape,
        "entries": checks.len(),
        "failed": failed.len(),
        "trials": checks.iter().filter_map(|c| c.report.as_ref()).map(|r| r.trials + r.accumulation_trials + r.schedule_trials).sum::<u64>(),
        "checks": checks,
    });
    emit(a.output.as_ref(), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    if let Some(first) = failed.first() {
        eprintln!("{}", serde_json::to_string_pretty(first)?);
        bail!(mixpack_core::Error::Verification(format!(
            "{} of {} entries failed",
            failed.len(),
            checks.len()
        )));
    }
    eprintln!(
        "{} table: {} entries verified, 0 mismatches",
        t.kernel_shape,
        checks.len()
    );
    Ok(())
}

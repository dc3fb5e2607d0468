use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};
use mixpack_core::alloc::{brute_force_allocate, dp_allocate, stage_inputs, AllocOptions, Budgets, CostModel};

use crate::io::{emit, read};
use crate::model::NetInputs;

#[derive(Debug, Subcommand)]
pub enum AllocCommand {
    /// Dynamic-programming allocation.
    Run(AllocArgs),
    /// Exhaustive allocation for small instances.
    Brute(AllocArgs),
}

#[derive(Debug, Args)]
pub struct AllocArgs {
    #[command(flatten)]
    pub inputs: NetInputs,
    /// Cost model JSON.
    #[arg(long)]
    pub cost: PathBuf,
    #[arg(long)]
    pub dsp_budget: u64,
    #[arg(long, default_value_t = 0)]
    pub lut_budget: u64,
    /// Allow LUT-built lanes.
    #[arg(long)]
    pub lut_replacement: bool,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub lut_unit: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub dsp_unit: u64,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(1..))]
    pub pf_cap: u32,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(cmd: AllocCommand) -> Result<()> {
    let (brute, a) = match cmd {
        AllocCommand::Run(a) => (false, a),
        AllocCommand::Brute(a) => (true, a),
    };
    let (net, bits, tables) = a.inputs.load()?;
    let model = CostModel::from_json(&read(&a.cost)?)?;
    let stages = stage_inputs(&net, &bits, &tables)?;
    let budgets = Budgets {
        dsp: a.dsp_budget,
        lut: a.lut_budget,
    };
    let opts = AllocOptions {
        dsp_unit: a.dsp_unit,
        lut_unit: a.lut_unit,
        pf_cap: a.pf_cap,
        lut_replacement: a.lut_replacement,
    };
    let plan = if brute {
        brute_force_allocate(&stages, &model, budgets, &opts)?
    } else {
        dp_allocate(&stages, &model, budgets, &opts)?.0
    };
    plan.recheck(&stages, &model).map_err(mixpack_core::Error::Invariant)?;
    emit(a.output.as_ref(), &plan.to_json())?;
    for s in &plan.stages {
        eprintln!(
            "{:<16} pf_dsp={} pf_lut={} dsp={} lut={} wns={:.3} latency={}/{}",
            s.name,
            s.pf_dsp,
            s.pf_lut,
            s.estimate.r_dsp,
            s.estimate.r_lut,
            s.estimate.t_wns,
            s.latency.num,
            s.latency.den
        );
    }
    eprintln!(
        "lat={}/{} dsp={}/{} lut={}/{}",
        plan.lat.num, plan.lat.den, plan.totals.r_dsp, budgets.dsp, plan.totals.r_lut, budgets.lut
    );
    Ok(())
}

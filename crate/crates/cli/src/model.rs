use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};
use mixpack_core::network::{op_dsp, BitwidthAssignment, NetworkSpec, TableSet};
use mixpack_core::table::LookupTable;

use crate::io::{emit, read};

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Per-layer multiplications, throughput and total DSP operations.
    Ops(OpsArgs),
}

#[derive(Debug, Args)]
pub struct NetInputs {
    /// Network JSON.
    pub net: PathBuf,
    /// Assignment JSON mapping layer names to {w_b, a_b}. Frozen layers
    /// may be left out.
    #[arg(long)]
    pub bits: Option<PathBuf>,
    /// Lookup table JSON; repeat for several kernel shapes.
    #[arg(long = "lut", required = true)]
    pub luts: Vec<PathBuf>,
}

impl NetInputs {
    pub fn load(&self) -> Result<(NetworkSpec, Vec<mixpack_core::network::BitPair>, TableSet)> {
        let net = NetworkSpec::from_json(&read(&self.net)?)?;
        let assignment = match &self.bits {
            Some(p) => BitwidthAssignment::from_json(&read(p)?)?,
            None => BitwidthAssignment::default(),
        };
        let bits = assignment.resolve(&net)?;
        let tables = self
            .luts
            .iter()
            .map(|p| Ok(LookupTable::from_json(&read(p)?)?))
            .collect::<Result<Vec<_>>>()?;
        Ok((net, bits, TableSet::new(tables)?))
    }
}

#[derive(Debug, Args)]
pub struct OpsArgs {
    #[command(flatten)]
    pub inputs: NetInputs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(cmd: ModelCommand) -> Result<()> {
    match cmd {
        ModelCommand::Ops(a) => ops(a),
    }
}

fn ops(a: OpsArgs) -> Result<()> {
    let (net, bits, tables) = a.inputs.load()?;
    let report = op_dsp(&net, &bits, &tables)?;
    emit(a.output.as_ref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    for l in &report.layers {
        eprintln!(
            "{:<16} ({}, {}) op_mul={} t_mul={}/{} op_dsp={}/{}",
            l.name, l.bits.w_b, l.bits.a_b, l.op_mul, l.t_mul.num, l.t_mul.den, l.op_dsp.num, l.op_dsp.den
        );
    }
    eprintln!(
        "total op_mul={} op_dsp={}/{} (~{:.2})",
        report.total_op_mul, report.op_dsp.num, report.op_dsp.den, report.op_dsp_approx
    );
    Ok(())
}

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Subcommand};
use mixpack_core::alloc::{read_samples, synth_samples, write_samples, CostModel, GeneratorSpec, RidgeOptions};

use crate::io::{emit, read};

#[derive(Debug, Subcommand)]
pub enum CostCommand {
    /// Fit the DSP, LUT and slack regressions to a sample CSV.
    Train(TrainArgs),
    /// Generate synthetic stage samples.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub samples: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Fixed noise precision; needs --fixed-lambda.
    #[arg(long, requires = "fixed_lambda")]
    pub fixed_alpha: Option<f64>,
    /// Fixed weight precision; needs --fixed-alpha.
    #[arg(long, requires = "fixed_alpha")]
    pub fixed_lambda: Option<f64>,
    #[arg(long, default_value_t = 300)]
    pub max_iter: u32,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator JSON; the built-in example generator otherwise.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the generator's sample count.
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Print the generator JSON instead of samples.
    #[arg(long)]
    pub print_spec: bool,
}

pub fn run(cmd: CostCommand) -> Result<()> {
    match cmd {
        CostCommand::Train(a) => train(a),
        CostCommand::Synth(a) => synth(a),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let samples = read_samples(&read(&a.samples)?)?;
    let opts = RidgeOptions {
        max_iter: a.max_iter,
        fixed: a.fixed_alpha.zip(a.fixed_lambda),
        ..RidgeOptions::default()
    };
    let model = CostModel::fit(&samples, &opts)?;
    let text = model.to_json();
    if CostModel::from_json(&text)? != model {
        bail!(mixpack_core::Error::Invariant(
            "model does not survive a round trip".into()
        ));
    }
    emit(a.output.as_ref(), &text)?;
    for (name, m) in [
        ("r_dsp", &model.r_dsp),
        ("r_lut", &model.r_lut),
        ("t_wns", &model.t_wns),
    ] {
        eprintln!(
            "{name}: alpha={:.4e} lambda={:.4e} iterations={} converged={}",
            m.alpha, m.lambda, m.iterations, m.converged
        );
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => GeneratorSpec::from_json(&read(p)?)?,
        None => GeneratorSpec::example(),
    };
    if let Some(n) = a.samples {
        spec.samples = n;
    }
    if a.print_spec {
        return emit(a.output.as_ref(), &(serde_json::to_string_pretty(&spec)? + "\n"));
    }
    let samples = synth_samples(&spec, a.seed)?;
    let text = write_samples(&samples)?;
    if read_samples(&text)? != samples {
        bail!(mixpack_core::Error::Invariant(
            "samples do not survive a round trip".into()
        ));
    }
    emit(a.output.as_ref(), &text)?;
    eprintln!("{} samples, seed {}", samples.len(), a.seed);
    Ok(())
}

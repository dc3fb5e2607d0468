#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixpack_core::network::{LayerSpec, NetworkSpec, OpKind};
use mixpack_core::packing::{KernelPackingConfig, OperandRole, PackingChoice, PackingConfig, Signedness};
use mixpack_core::profile::DspProfile;
use mixpack_core::table::{KernelShape, LookupTable, SeqLen};
use serde_json::Value;

pub fn mixpack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixpack"))
        .current_dir(dir)
        .env_remove("MIXPACK_PROFILE")
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Run and insist on exit 0.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = mixpack(dir, args);
    assert_eq!(code(&out), 0, "mixpack {args:?}: {}", stderr(&out));
    out
}

pub fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

/// `{num, den}` as a pair.
pub fn frac(v: &Value) -> (u128, u128) {
    (v["num"].as_u64().unwrap() as u128, v["den"].as_u64().unwrap() as u128)
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

pub fn conv(name: &str, c_in: u32, c_out: u32, k: (u32, u32), out: u32) -> LayerSpec {
    LayerSpec {
        name: name.into(),
        op_kind: OpKind::Conv,
        c_in,
        c_out,
        k_h: k.0,
        k_w: k.1,
        h_out: out,
        w_out: out,
        groups: None,
        frozen_bits: None,
    }
}

pub fn network(layers: Vec<LayerSpec>) -> String {
    NetworkSpec::new(layers).unwrap().to_json()
}

/// Grid over 2..=8 bits where every cell performs one multiply per DSP.
pub fn unit_table(shape: KernelShape) -> String {
    let p = DspProfile::dsp48e2();
    let mut entries = Vec::new();
    for w in 2..=8 {
        for a in 2..=8 {
            let c = KernelPackingConfig {
                d_b: w,
                e_b: a,
                g_b: 0,
                n_d: 1,
                n_e: 1,
                overpacked: false,
                port_swap: false,
                d_operand: OperandRole::Weight,
            };
            entries.push(PackingChoice::new(
                PackingConfig::Kernel(c),
                None,
                w,
                a,
                Signedness::Unsigned,
                shape.k_w,
                SeqLen::Generic,
                &p,
            ));
        }
    }
    LookupTable {
        profile: p,
        kernel_shape: shape,
        seq_len_policy: SeqLen::Generic,
        signedness: Signedness::Unsigned,
        bits_min: 2,
        bits_max: 8,
        allow_overpack: false,
        allow_separation: false,
        entries,
    }
    .to_json()
}

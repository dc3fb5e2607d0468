use std::sync::OnceLock;

use mixpack_core::exec::Execution;
use mixpack_core::packing::{enumerate_configs, SearchOptions, Signedness, Strategy, Throughput};
use mixpack_core::profile::DspProfile;
use mixpack_core::table::{build_table, BuildOptions, KernelShape, LookupTable, SeqLen};
use mixpack_core::Error;
use num_rational::Ratio;

fn dsp() -> DspProfile {
    DspProfile::dsp48e2()
}

fn build(shape: &str, search: SearchOptions, exec: Execution) -> LookupTable {
    let mut opts = BuildOptions {
        search,
        ..BuildOptions::default()
    };
    opts.policy.exec = exec;
    build_table(shape.parse().unwrap(), &dsp(), &opts).unwrap()
}

fn full(shape: &str) -> &'static LookupTable {
    static ONE: OnceLock<LookupTable> = OnceLock::new();
    static THREE: OnceLock<LookupTable> = OnceLock::new();
    let cell = if shape == "1x1" { &ONE } else { &THREE };
    cell.get_or_init(|| build(shape, SearchOptions::full(Signedness::Unsigned), Execution::Parallel))
}

fn plain(shape: &str) -> &'static LookupTable {
    static ONE: OnceLock<LookupTable> = OnceLock::new();
    static THREE: OnceLock<LookupTable> = OnceLock::new();
    let cell = if shape == "1x1" { &ONE } else { &THREE };
    cell.get_or_init(|| build(shape, SearchOptions::default(), Execution::Parallel))
}

fn best_pure(w: u32, a: u32, k: u32, strategy: Strategy) -> Throughput {
    enumerate_configs(w, a, k, SeqLen::Generic, &dsp(), SearchOptions::default())
        .into_iter()
        .filter(|c| c.strategy() == strategy)
        .map(|c| c.t_mul)
        .max()
        .unwrap_or_else(|| Ratio::from_integer(0))
}

#[test]
fn grids_are_monotone() {
    for shape in ["1x1", "3x3"] {
        full(shape).check_monotone().unwrap();
        plain(shape).check_monotone().unwrap();
    }
}

#[test]
fn mixed_strategy_dominates_each_pure_strategy() {
    for shape in ["1x1", "3x3"] {
        let t = full(shape);
        let k = t.kernel_shape.k_w;
        for c in &t.entries {
            assert!(c.t_mul >= best_pure(c.w_b, c.a_b, k, Strategy::Kernel), "{shape} {c:?}");
            assert!(c.t_mul >= best_pure(c.w_b, c.a_b, k, Strategy::Filter), "{shape} {c:?}");
        }
    }
}

#[test]
fn enhancements_never_lower_a_cell() {
    for shape in ["1x1", "3x3"] {
        for (with, without) in full(shape).entries.iter().zip(&plain(shape).entries) {
            assert_eq!((with.w_b, with.a_b), (without.w_b, without.a_b));
            assert!(with.t_mul >= without.t_mul, "{shape} ({}, {})", with.w_b, with.a_b);
        }
    }
}

#[test]
fn anchor_cells() {
    let at = |shape, w, a| full(shape).get(w, a).unwrap().t_mul;
    assert!(at("1x1", 4, 4) >= Ratio::from_integer(4));
    assert!(at("3x3", 4, 4) >= Ratio::from_integer(6));
    assert!(at("1x1", 5, 8) >= Ratio::from_integer(2));
    assert!(at("3x3", 2, 2) >= Ratio::from_integer(12));
    assert!(at("1x1", 8, 8) >= Ratio::from_integer(1));
}

#[test]
fn build_is_identical_across_execution_modes() {
    let seq = build("3x3", SearchOptions::full(Signedness::Unsigned), Execution::Sequential);
    assert_eq!(seq.to_json(), full("3x3").to_json());
}

#[test]
fn json_round_trip_and_tamper_detection() {
    let t = full("3x3");
    let text = t.to_json();
    assert_eq!(&LookupTable::from_json(&text).unwrap(), t);

    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let entry = &mut doc["entries"][0];
    let num = entry["t_mul"]["num"].as_u64().unwrap();
    entry["t_mul"]["num"] = (num * 2).into();
    let tampered = serde_json::to_string(&doc).unwrap();
    assert!(matches!(LookupTable::from_json(&tampered), Err(Error::Invariant(_))));

    let mut empty: serde_json::Value = serde_json::from_str(&text).unwrap();
    empty["entries"] = serde_json::json!([]);
    let err = LookupTable::from_json(&empty.to_string()).unwrap_err();
    assert!(err.is_schema(), "{err}");
}

#[test]
fn csv_grid_layout() {
    let t = full("1x1");
    let csv = t.to_csv().unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0].split(',').count(), 8);
    assert!(rows[1].starts_with("2,"));
}

#[test]
fn signed_table_verifies_and_is_monotone() {
    let mut opts = BuildOptions::default();
    opts.search.signedness = Signedness::TwosComplement;
    let t = build_table(KernelShape::new(1, 1), &dsp(), &opts).unwrap();
    t.check_monotone().unwrap();
    assert!(t.entries.iter().all(|c| c.signedness == Signedness::TwosComplement));
}

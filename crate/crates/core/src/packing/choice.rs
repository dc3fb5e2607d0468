use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{
    filter::min_filter_guard, separate_operand, FilterPackingConfig, KernelPackingConfig, OperandFormat, OperandRole,
    Signedness,
};
use crate::profile::DspProfile;
use crate::table::SeqLen;

/// Average multiplications per wide multiply, kept exact.
pub type Throughput = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Kernel,
    Filter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PackingConfig {
    Kernel(KernelPackingConfig),
    Filter(FilterPackingConfig),
}

impl PackingConfig {
    pub fn strategy(&self) -> Strategy {
        match self {
            PackingConfig::Kernel(_) => Strategy::Kernel,
            PackingConfig::Filter(_) => Strategy::Filter,
        }
    }

    pub fn overpacked(&self) -> bool {
        match self {
            PackingConfig::Kernel(c) => c.overpacked,
            PackingConfig::Filter(c) => c.overpacked,
        }
    }

    pub fn stride(&self) -> i64 {
        match self {
            PackingConfig::Kernel(c) => c.stride(),
            PackingConfig::Filter(c) => c.stride(),
        }
    }

    pub fn lanes(&self) -> u32 {
        match self {
            PackingConfig::Kernel(c) => c.lanes(),
            PackingConfig::Filter(c) => c.lanes(),
        }
    }

    /// Packed operand widths as (weight bits, activation bits).
    pub fn operand_bits(&self) -> (u32, u32) {
        match self {
            PackingConfig::Kernel(c) => c.operand_bits(),
            PackingConfig::Filter(c) => (c.w_b, c.a_b),
        }
    }

    pub fn is_valid(&self, profile: &DspProfile) -> bool {
        match self {
            PackingConfig::Kernel(c) => super::validate_kernel(c, profile),
            PackingConfig::Filter(c) => super::validate_filter(c, profile),
        }
    }

    /// Bit offsets of the operands on the (weight, activation) ports.
    pub(crate) fn operand_offsets(&self) -> (Vec<u32>, Vec<u32>) {
        let p = self.stride() as u32;
        match self {
            PackingConfig::Kernel(c) => {
                let d: Vec<u32> = (0..c.n_d).map(|i| i * p).collect();
                let e: Vec<u32> = (0..c.n_e).map(|j| j * c.n_d * p).collect();
                match c.d_operand {
                    OperandRole::Weight => (d, e),
                    OperandRole::Activation => (e, d),
                }
            }
            PackingConfig::Filter(c) => ((0..c.k_p).map(|i| i * p).collect(), (0..c.n_p).map(|j| j * p).collect()),
        }
    }
}

/// Surplus guard bits beyond what the packing itself consumes.
/// Negative only for overpacked layouts.
pub fn extra_guard_bits(config: &PackingConfig) -> i32 {
    match config {
        PackingConfig::Kernel(c) => c.g_b,
        PackingConfig::Filter(c) => c.g_b - min_filter_guard(c.k_p, c.n_p),
    }
}

/// Multiplication throughput for a 1-D filter of length `k` over `seq`.
/// Kernel packing ignores both.
pub fn throughput(config: &PackingConfig, separation: Option<OperandRole>, k: u32, seq: SeqLen) -> Throughput {
    let t = match config {
        PackingConfig::Kernel(c) => Ratio::from_integer(u64::from(c.n_d) * u64::from(c.n_e)),
        PackingConfig::Filter(c) => {
            let k = u64::from(k.max(1));
            let k_tasks = k.div_ceil(u64::from(c.k_p));
            match seq {
                SeqLen::Generic => Ratio::new(k * u64::from(c.n_p), k_tasks),
                SeqLen::Explicit(n) => {
                    let n = u64::from(n.max(1));
                    Ratio::new(k * n, k_tasks * n.div_ceil(u64::from(c.n_p)))
                }
            }
        }
    };
    if separation.is_some() {
        t / 2
    } else {
        t
    }
}

/// Operand formats of each wide multiply the choice performs, as
/// (weight, activation) pairs. Separation yields a high and a low half.
pub(crate) fn half_formats(
    separation: Option<OperandRole>,
    w_b: u32,
    a_b: u32,
    signedness: Signedness,
) -> Vec<(OperandFormat, OperandFormat)> {
    let w = OperandFormat::new(w_b, signedness);
    let a = OperandFormat::new(a_b, signedness);
    let halves = |bits: u32| {
        let (hi, lo) = separate_operand(bits).expect("separated operand has >= 2 bits");
        (
            OperandFormat::new(hi, signedness),
            OperandFormat::new(lo, Signedness::Unsigned),
        )
    };
    match separation {
        None => vec![(w, a)],
        Some(OperandRole::Weight) => {
            let (hi, lo) = halves(w_b);
            vec![(hi, a), (lo, a)]
        }
        Some(OperandRole::Activation) => {
            let (hi, lo) = halves(a_b);
            vec![(w, hi), (w, lo)]
        }
    }
}

fn max_word_magnitude(fmt: OperandFormat, offsets: &[u32]) -> u128 {
    let m = fmt.min().unsigned_abs().max(fmt.max().unsigned_abs()) as u128;
    offsets.iter().map(|&o| m << o).sum()
}

/// Log2 of the number of packed products that may be summed before decoding:
/// the guard surplus (plus the overlap bit the correction recovers), capped
/// so the accumulated word still fits the accumulator.
pub fn accumulation_exponent(
    config: &PackingConfig,
    separation: Option<OperandRole>,
    w_b: u32,
    a_b: u32,
    signedness: Signedness,
    profile: &DspProfile,
) -> u32 {
    let surplus = (extra_guard_bits(config) + i32::from(config.overpacked())).max(0) as u32;
    let (w_off, a_off) = config.operand_offsets();
    let mut headroom = u32::MAX;
    for (wf, af) in half_formats(separation, w_b, a_b, signedness) {
        let product = max_word_magnitude(wf, &w_off) * max_word_magnitude(af, &a_off);
        let signed = wf.signedness.is_signed() || af.signedness.is_signed();
        let limit = if signed {
            (1u128 << (profile.accumulator - 1)) - 1
        } else {
            (1u128 << profile.accumulator) - 1
        };
        let mut t = 0;
        while product > 0 && (product << (t + 1)) <= limit {
            t += 1;
        }
        headroom = headroom.min(t);
    }
    surplus.min(headroom)
}

/// Gates in the overlap correction network: per corrected boundary, one AND
/// per product in the upper segment, XORs to fold them, one XOR against the
/// overlapped bit and two single-bit adders.
pub fn correction_gates(config: &PackingConfig, separation: Option<OperandRole>) -> u32 {
    if !config.overpacked() {
        return 0;
    }
    let per_word: u32 = match config {
        PackingConfig::Kernel(c) => (c.lanes() - 1) * 4,
        PackingConfig::Filter(c) => (1..c.lanes()).map(|k| 2 * c.products_in_lane(k) + 2).sum(),
    };
    if separation.is_some() {
        per_word * 2
    } else {
        per_word
    }
}

/// A validated packing together with its metrics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "ChoiceDoc", try_from = "ChoiceDoc")]
pub struct PackingChoice {
    pub config: PackingConfig,
    /// Operand split into high and low halves, if any. The config then
    /// describes one half-width multiply.
    pub separation: Option<OperandRole>,
    /// Original operand widths.
    pub w_b: u32,
    pub a_b: u32,
    pub signedness: Signedness,
    pub t_mul: Throughput,
    pub e_g: u32,
    pub correction_gates: u32,
}

impl PackingChoice {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: PackingConfig,
        separation: Option<OperandRole>,
        w_b: u32,
        a_b: u32,
        signedness: Signedness,
        k: u32,
        seq: SeqLen,
        profile: &DspProfile,
    ) -> Self {
        PackingChoice {
            config,
            separation,
            w_b,
            a_b,
            signedness,
            t_mul: throughput(&config, separation, k, seq),
            e_g: accumulation_exponent(&config, separation, w_b, a_b, signedness, profile),
            correction_gates: correction_gates(&config, separation),
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.config.strategy()
    }

    pub fn overpacked(&self) -> bool {
        self.config.overpacked()
    }

    pub fn separated(&self) -> bool {
        self.separation.is_some()
    }

    /// Operand bits that define one packed multiply's input space.
    pub fn operand_bits_total(&self) -> u32 {
        let (w_off, a_off) = self.config.operand_offsets();
        w_off.len() as u32 * self.w_b + a_off.len() as u32 * self.a_b
    }

    /// Number of packed products that can be summed before decoding.
    pub fn accumulation_budget(&self) -> u64 {
        1u64 << self.e_g.min(63)
    }

    /// (weight, activation) operand formats per wide multiply.
    pub fn half_formats(&self) -> Vec<(OperandFormat, OperandFormat)> {
        half_formats(self.separation, self.w_b, self.a_b, self.signedness)
    }

    /// Widths the packed config must carry for the original operands.
    pub fn packed_operand_bits(&self) -> (u32, u32) {
        let half = |b: u32| separate_operand(b).map(|(_, lo)| lo).unwrap_or(b);
        match self.separation {
            None => (self.w_b, self.a_b),
            Some(OperandRole::Weight) => (half(self.w_b), self.a_b),
            Some(OperandRole::Activation) => (self.w_b, half(self.a_b)),
        }
    }

    /// Recompute every derived field and check it against the stored values.
    pub fn recheck(&self, k: u32, seq: SeqLen, profile: &DspProfile) -> Result<(), String> {
        if !self.config.is_valid(profile) {
            return Err(format!("{:?} violates the port or guard constraints", self.config));
        }
        if self.config.operand_bits() != self.packed_operand_bits() {
            return Err(format!(
                "packed widths {:?} do not match operands ({}, {}) with separation {:?}",
                self.config.operand_bits(),
                self.w_b,
                self.a_b,
                self.separation
            ));
        }
        let fresh = PackingChoice::new(
            self.config,
            self.separation,
            self.w_b,
            self.a_b,
            self.signedness,
            k,
            seq,
            profile,
        );
        if fresh.t_mul != self.t_mul {
            return Err(format!(
                "t_mul {} but the configuration yields {}",
                self.t_mul, fresh.t_mul
            ));
        }
        if fresh.e_g != self.e_g {
            return Err(format!("e_g {} but the configuration yields {}", self.e_g, fresh.e_g));
        }
        if fresh.correction_gates != self.correction_gates {
            return Err(format!(
                "correction_gates {} but the configuration yields {}",
                self.correction_gates, fresh.correction_gates
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatioDoc {
    num: u64,
    den: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum ParamsDoc {
    Kernel(KernelPackingConfig),
    Filter(FilterPackingConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiceDoc {
    w_b: u32,
    a_b: u32,
    strategy: Strategy,
    params: ParamsDoc,
    #[serde(default)]
    signedness: Signedness,
    separation: Option<OperandRole>,
    t_mul: RatioDoc,
    e_g: u32,
    correction_gates: u32,
    overpacked: bool,
    separated: bool,
}

impl From<PackingChoice> for ChoiceDoc {
    fn from(c: PackingChoice) -> Self {
        ChoiceDoc {
            w_b: c.w_b,
            a_b: c.a_b,
            strategy: c.strategy(),
            params: match c.config {
                PackingConfig::Kernel(k) => ParamsDoc::Kernel(k),
                PackingConfig::Filter(f) => ParamsDoc::Filter(f),
            },
            signedness: c.signedness,
            separation: c.separation,
            t_mul: RatioDoc {
                num: *c.t_mul.numer(),
                den: *c.t_mul.denom(),
            },
            e_g: c.e_g,
            correction_gates: c.correction_gates,
            overpacked: c.overpacked(),
            separated: c.separated(),
        }
    }
}

impl TryFrom<ChoiceDoc> for PackingChoice {
    type Error = String;

    fn try_from(d: ChoiceDoc) -> Result<Self, String> {
        let config = match d.params {
            ParamsDoc::Kernel(k) => PackingConfig::Kernel(k),
            ParamsDoc::Filter(f) => PackingConfig::Filter(f),
        };
        if config.strategy() != d.strategy {
            return Err(format!("strategy {:?} does not match its params", d.strategy));
        }
        if config.overpacked() != d.overpacked {
            return Err("overpacked flag disagrees with params".into());
        }
        if d.separation.is_some() != d.separated {
            return Err("separated flag disagrees with separation".into());
        }
        if d.t_mul.den == 0 || d.t_mul.num == 0 {
            return Err("t_mul must be a positive fraction".into());
        }
        Ok(PackingChoice {
            config,
            separation: d.separation,
            w_b: d.w_b,
            a_b: d.a_b,
            signedness: d.signedness,
            t_mul: Ratio::new(d.t_mul.num, d.t_mul.den),
            e_g: d.e_g,
            correction_gates: d.correction_gates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(n_d: u32, n_e: u32, g_b: i32) -> PackingConfig {
        PackingConfig::Kernel(KernelPackingConfig {
            d_b: 4,
            e_b: 4,
            g_b,
            n_d,
            n_e,
            overpacked: g_b < 0,
            port_swap: false,
            d_operand: OperandRole::Weight,
        })
    }

    fn filter(w_b: u32, a_b: u32, g_b: i32, k_p: u32, n_p: u32) -> PackingConfig {
        PackingConfig::Filter(FilterPackingConfig {
            w_b,
            a_b,
            g_b,
            k_p,
            n_p,
            filter_on_large_port: true,
            overpacked: false,
        })
    }

    #[test]
    fn kernel_throughput_is_lane_count() {
        assert_eq!(
            throughput(&kernel(2, 2, 0), None, 3, SeqLen::Generic),
            Ratio::from_integer(4)
        );
        assert_eq!(
            throughput(&kernel(2, 2, 0), Some(OperandRole::Weight), 3, SeqLen::Explicit(7)),
            Ratio::from_integer(2)
        );
    }

    #[test]
    fn filter_throughput() {
        let c = filter(4, 4, 1, 3, 2);
        assert_eq!(throughput(&c, None, 3, SeqLen::Explicit(6)), Ratio::from_integer(6));
        assert_eq!(throughput(&c, None, 3, SeqLen::Generic), Ratio::from_integer(6));
        // ragged tail: 3 * 5 / (1 * 3)
        assert_eq!(throughput(&c, None, 3, SeqLen::Explicit(5)), Ratio::from_integer(5));
        let c = filter(2, 2, 2, 3, 4);
        assert_eq!(throughput(&c, None, 3, SeqLen::Explicit(4)), Ratio::from_integer(12));
        // filter longer than k_p: 5 * 4 / (2 * 1)
        assert_eq!(throughput(&c, None, 5, SeqLen::Explicit(4)), Ratio::from_integer(10));
        assert_eq!(throughput(&c, None, 5, SeqLen::Explicit(3)), Ratio::new(15, 2));
    }

    #[test]
    fn guard_surplus() {
        assert_eq!(extra_guard_bits(&kernel(2, 2, 0)), 0);
        assert_eq!(extra_guard_bits(&filter(2, 2, 2, 3, 4)), 0);
        assert_eq!(extra_guard_bits(&filter(2, 2, 5, 3, 4)), 3);
        let five_eight = PackingConfig::Kernel(KernelPackingConfig {
            d_b: 5,
            e_b: 8,
            g_b: 0,
            n_d: 2,
            n_e: 1,
            overpacked: false,
            port_swap: false,
            d_operand: OperandRole::Weight,
        });
        assert_eq!(five_eight.stride(), 13);
        assert_eq!(extra_guard_bits(&five_eight), 0);
        assert_eq!(extra_guard_bits(&kernel(2, 1, -1)), -1);
    }

    #[test]
    fn accumulation_exponent_counts_overlap_and_caps_at_accumulator() {
        let p = DspProfile::dsp48e2();
        let ov = kernel(2, 1, -1);
        assert_eq!(accumulation_exponent(&ov, None, 4, 4, Signedness::Unsigned, &p), 0);
        // identity with a huge guard is capped by the 48-bit accumulator:
        // (2^8 - 1)^2 < 2^16, 2^32 * that still fits in 48 bits
        let id = PackingConfig::Kernel(KernelPackingConfig {
            d_b: 8,
            e_b: 8,
            g_b: 40,
            n_d: 1,
            n_e: 1,
            overpacked: false,
            port_swap: false,
            d_operand: OperandRole::Weight,
        });
        assert_eq!(accumulation_exponent(&id, None, 8, 8, Signedness::Unsigned, &p), 32);
        // signed: 128 * 128 = 2^14 against a 2^47 - 1 limit
        assert_eq!(
            accumulation_exponent(&id, None, 8, 8, Signedness::TwosComplement, &p),
            32
        );
    }

    #[test]
    fn gates_only_when_overpacked() {
        assert_eq!(correction_gates(&kernel(2, 2, 0), None), 0);
        assert_eq!(correction_gates(&kernel(2, 2, -1), None), 12);
        assert_eq!(correction_gates(&kernel(2, 2, -1), Some(OperandRole::Weight)), 24);
    }
}

//! Constraint mathematics for packing several low-precision multiplications
//! into one wide multiplier.
//!
//! Two strategies are modelled. *Kernel packing* places independent operands
//! on both ports so that every pairwise product lands in its own result
//! segment. *Filter packing* encodes a short 1-D filter and an activation
//! sequence as polynomials evaluated at `2^p`; one wide product then yields
//! the convolution coefficients directly.

mod choice;
mod enumerate;
mod filter;
mod kernel;

use serde::{Deserialize, Serialize};

pub use choice::{
    accumulation_exponent, correction_gates, extra_guard_bits, throughput, PackingChoice, PackingConfig, Strategy,
    Throughput,
};
pub use enumerate::{enumerate_configs, SearchOptions};
pub use filter::{min_filter_guard, validate_filter, FilterPackingConfig};
pub use kernel::{validate_kernel, KernelPackingConfig};

/// Interpretation of operand bit fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Signedness {
    #[default]
    Unsigned,
    TwosComplement,
}

impl Signedness {
    pub fn is_signed(self) -> bool {
        self == Signedness::TwosComplement
    }

    pub fn label(self) -> &'static str {
        match self {
            Signedness::Unsigned => "unsigned",
            Signedness::TwosComplement => "twos_complement",
        }
    }
}

/// Weight or activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperandRole {
    Weight,
    Activation,
}

/// Value range of one packed operand field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperandFormat {
    pub bits: u32,
    pub signedness: Signedness,
}

impl OperandFormat {
    pub fn new(bits: u32, signedness: Signedness) -> Self {
        OperandFormat { bits, signedness }
    }

    pub fn min(self) -> i64 {
        match self.signedness {
            Signedness::Unsigned => 0,
            Signedness::TwosComplement => -(1i64 << (self.bits - 1)),
        }
    }

    pub fn max(self) -> i64 {
        match self.signedness {
            Signedness::Unsigned => (1i64 << self.bits) - 1,
            Signedness::TwosComplement => (1i64 << (self.bits - 1)) - 1,
        }
    }

    pub fn contains(self, v: i64) -> bool {
        (self.min()..=self.max()).contains(&v)
    }

    /// Number of distinct values.
    pub fn cardinality(self) -> u64 {
        1u64 << self.bits
    }

    /// The `idx`-th value in ascending order.
    pub fn nth(self, idx: u64) -> i64 {
        self.min() + idx as i64
    }
}

/// Split a `bits`-wide operand into high and low parts for operand
/// separation. Returns `(high_bits, low_bits)` with the low part taking the
/// larger half.
pub fn separate_operand(bits: u32) -> crate::Result<(u32, u32)> {
    if bits < 2 {
        return Err(crate::Error::InvalidConfig(format!(
            "operand separation needs at least 2 bits, got {bits}"
        )));
    }
    let low = bits.div_ceil(2);
    Ok((bits - low, low))
}

/// Split a value into `(high, low)` so that `value == high * 2^low_bits + low`
/// with `low` unsigned. The high part keeps the sign of the input.
pub fn split_value(value: i64, low_bits: u32) -> (i64, i64) {
    let low = value & ((1i64 << low_bits) - 1);
    ((value - low) >> low_bits, low)
}

pub(crate) fn ceil_log2(x: u32) -> u32 {
    debug_assert!(x >= 1);
    if x <= 1 {
        0
    } else {
        32 - (x - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_splits() {
        assert_eq!(separate_operand(7).unwrap(), (3, 4));
        assert_eq!(separate_operand(2).unwrap(), (1, 1));
        assert_eq!(separate_operand(8).unwrap(), (4, 4));
        assert!(separate_operand(1).is_err());
        assert!(separate_operand(0).is_err());
    }

    #[test]
    fn split_value_recombines() {
        for bits in 2..=8u32 {
            let (_, lo) = separate_operand(bits).unwrap();
            for s in [Signedness::Unsigned, Signedness::TwosComplement] {
                let f = OperandFormat::new(bits, s);
                let hi_f = OperandFormat::new(bits - lo, s);
                let lo_f = OperandFormat::new(lo, Signedness::Unsigned);
                for v in f.min()..=f.max() {
                    let (h, l) = split_value(v, lo);
                    assert_eq!(h * (1 << lo) + l, v);
                    assert!(hi_f.contains(h), "{v} -> high {h} ({bits} bits, {s:?})");
                    assert!(lo_f.contains(l));
                }
            }
        }
    }

    #[test]
    fn ceil_log2_small() {
        let got: Vec<u32> = (1..=9).map(ceil_log2).collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 3, 3, 4]);
    }

    #[test]
    fn format_ranges() {
        let s = OperandFormat::new(4, Signedness::TwosComplement);
        assert_eq!((s.min(), s.max()), (-8, 7));
        let u = OperandFormat::new(4, Signedness::Unsigned);
        assert_eq!((u.min(), u.max()), (0, 15));
        assert_eq!(u.nth(u.cardinality() - 1), 15);
        assert_eq!(s.nth(0), -8);
    }
}

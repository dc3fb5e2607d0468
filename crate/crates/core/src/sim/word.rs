use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::{OperandFormat, Signedness};

/// Operands shifted into one multiplier port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedWord {
    /// Bit pattern as the port sees it, `< 2^width`.
    pub value: u128,
    pub width: u32,
    pub lane_offsets: Vec<u32>,
    pub lane_width: u32,
    pub signedness: Signedness,
}

impl PackedWord {
    /// The integer the port holds: two's-complement words are sign-extended
    /// from the port width.
    pub fn as_int(&self) -> i128 {
        let v = self.value as i128;
        if self.signedness.is_signed() && self.width > 0 && (self.value >> (self.width - 1)) & 1 == 1 {
            v - (1i128 << self.width)
        } else {
            v
        }
    }
}

/// Shift-and-add `values` into a `port_bits`-wide word at `stride_bits`
/// spacing. Two's-complement elements are added with their sign, which is
/// what a sign-extending pre-adder produces.
pub fn encode(
    values: &[i64],
    element_bits: u32,
    stride_bits: u32,
    signedness: Signedness,
    port_bits: u32,
) -> Result<PackedWord> {
    if values.is_empty() || element_bits == 0 || port_bits == 0 || port_bits > 120 {
        return Err(Error::InvalidConfig("empty encode request".into()));
    }
    let fmt = OperandFormat::new(element_bits, signedness);
    if let Some(&bad) = values.iter().find(|&&v| !fmt.contains(v)) {
        return Err(Error::OperandOutOfRange {
            value: bad,
            bits: element_bits,
            signedness: signedness.label(),
        });
    }
    let span = element_bits + (values.len() as u32 - 1) * stride_bits;
    if span > port_bits {
        return Err(Error::SpanOverflow { span, port: port_bits });
    }
    let sum: i128 = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v as i128) << (i as u32 * stride_bits))
        .sum();
    let mask = (1u128 << port_bits) - 1;
    Ok(PackedWord {
        value: (sum as u128) & mask,
        width: port_bits,
        lane_offsets: (0..values.len() as u32).map(|i| i * stride_bits).collect(),
        lane_width: element_bits,
        signedness,
    })
}

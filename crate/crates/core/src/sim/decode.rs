use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::{PackingConfig, Signedness};

/// Result segments of one wide product, lowest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedLanes {
    pub values: Vec<i64>,
    pub overlap_corrected: bool,
}

fn low_bits(x: i128, bits: u32) -> i128 {
    x & ((1i128 << bits) - 1)
}

fn extend(field: i128, bits: u32, signed: bool) -> i128 {
    if signed && (field >> (bits - 1)) & 1 == 1 {
        field - (1i128 << bits)
    } else {
        field
    }
}

/// Undo a one-bit overlap between two adjacent segments.
///
/// `raw_low` is the lower segment's field including the shared bit at
/// position `overlap_bit`; `raw_high` is the word from `overlap_bit` upward.
/// `operand_lsbs` holds the LSB pair of every product summed into the upper
/// segment.
///
/// The upper segment's true LSB is the XOR over the AND of each pair. Adding
/// it at the shared bit cancels its contamination of the lower segment. The
/// lower segment's own top bit leaked into the upper field as a carry (`+1`,
/// unsigned) or as a sign-extension borrow (`-1`, two's complement); it is
/// present exactly when the shared bit differs from the recomputed LSB, so
/// the upper field is compensated by that XOR.
pub fn overpack_correct(
    raw_low: u128,
    raw_high: i128,
    operand_lsbs: &[(u8, u8)],
    products: usize,
    overlap_bit: u32,
    signedness: Signedness,
) -> Result<(i64, i128)> {
    if operand_lsbs.len() != products {
        return Err(Error::LsbCount {
            expected: products,
            got: operand_lsbs.len(),
        });
    }
    let b = operand_lsbs.iter().fold(0u8, |acc, &(x, y)| acc ^ (x & y & 1));
    Ok(correct_with_lsb(
        raw_low as i128,
        raw_high,
        b,
        overlap_bit,
        signedness.is_signed(),
    ))
}

#[inline]
fn correct_with_lsb(raw_low: i128, raw_high: i128, b: u8, p: u32, signed: bool) -> (i64, i128) {
    let field = low_bits(raw_low + ((b as i128) << p), p + 1);
    let low = extend(field, p + 1, signed);
    let c = ((raw_high as u8) & 1) ^ b;
    let high = if signed {
        raw_high + c as i128
    } else {
        raw_high - c as i128
    };
    (low as i64, high)
}

/// Decode `lanes` segments at stride `p` from the bottom up. A two's
/// complement segment that decodes negative has borrowed one from the next
/// segment; subtracting the decoded value before shifting undoes that.
/// `lsbs[k]` is the true LSB of segment `k`, only read when overpacked.
#[inline]
pub(crate) fn decode_into(word: i128, p: u32, overpacked: bool, signed: bool, lsbs: &[u8], out: &mut [i64]) {
    let lanes = out.len();
    let mut rem = word;
    for k in 0..lanes - 1 {
        if overpacked {
            let (low, high) = correct_with_lsb(low_bits(rem, p + 1), rem >> p, lsbs[k + 1], p, signed);
            out[k] = low;
            rem = high;
        } else {
            let low = extend(low_bits(rem, p), p, signed);
            out[k] = low as i64;
            rem = (rem - low) >> p;
        }
    }
    out[lanes - 1] = rem as i64;
}

/// Decode a wide product laid out by `config`. `lane_signedness` is the
/// signedness of the products (two's complement if either operand is).
/// `lane_lsbs` must hold each lane's true LSB when the layout is overpacked
/// and is ignored otherwise.
pub fn decode(
    word: i128,
    config: &PackingConfig,
    lane_signedness: Signedness,
    lane_lsbs: &[u8],
) -> Result<DecodedLanes> {
    let lanes = config.lanes() as usize;
    let p = config.stride();
    if p < 1 {
        return Err(Error::InvalidConfig(format!("stride {p}")));
    }
    if config.overpacked() && lane_lsbs.len() != lanes {
        return Err(Error::LsbCount {
            expected: lanes,
            got: lane_lsbs.len(),
        });
    }
    let mut values = vec![0i64; lanes];
    decode_into(
        word,
        p as u32,
        config.overpacked(),
        lane_signedness.is_signed(),
        lane_lsbs,
        &mut values,
    );
    Ok(DecodedLanes {
        values,
        overlap_corrected: config.overpacked(),
    })
}

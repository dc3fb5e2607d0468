use serde::{Deserialize, Serialize};

use super::OperandRole;
use crate::profile::DspProfile;

/// Kernel packing: `n_d` operands of `d_b` bits at stride `p` on one port,
/// `n_e` operands of `e_b` bits at stride `n_d * p` on the other. Product
/// `(i, j)` lands at bit `(i + j * n_d) * p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelPackingConfig {
    pub d_b: u32,
    pub e_b: u32,
    pub g_b: i32,
    pub n_d: u32,
    pub n_e: u32,
    pub overpacked: bool,
    /// `false`: d-operands on the small port, `true`: on the large port.
    pub port_swap: bool,
    /// Which operand class fills the d slots.
    pub d_operand: OperandRole,
}

impl KernelPackingConfig {
    /// Result segment stride `d_b + e_b + g_b`.
    pub fn stride(&self) -> i64 {
        self.d_b as i64 + self.e_b as i64 + self.g_b as i64
    }

    pub fn lanes(&self) -> u32 {
        self.n_d * self.n_e
    }

    pub fn d_port(&self, profile: &DspProfile) -> u32 {
        profile.port(self.port_swap)
    }

    pub fn e_port(&self, profile: &DspProfile) -> u32 {
        profile.port(!self.port_swap)
    }

    /// Bits occupied on the d port.
    pub fn d_span(&self) -> i64 {
        self.d_b as i64 + (self.n_d as i64 - 1) * self.stride()
    }

    /// Bits occupied on the e port.
    pub fn e_span(&self) -> i64 {
        self.e_b as i64 + (self.n_e as i64 - 1) * self.n_d as i64 * self.stride()
    }

    /// Widths as (weight bits, activation bits).
    pub fn operand_bits(&self) -> (u32, u32) {
        match self.d_operand {
            OperandRole::Weight => (self.d_b, self.e_b),
            OperandRole::Activation => (self.e_b, self.d_b),
        }
    }
}

/// Check the kernel-packing port and guard constraints.
pub fn validate_kernel(config: &KernelPackingConfig, profile: &DspProfile) -> bool {
    let c = config;
    if c.d_b == 0 || c.e_b == 0 || c.n_d == 0 || c.n_e == 0 {
        return false;
    }
    let guard_ok = if c.overpacked { c.g_b == -1 } else { c.g_b >= 0 };
    guard_ok && c.stride() >= 1 && c.d_span() <= c.d_port(profile) as i64 && c.e_span() <= c.e_port(profile) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d_b: u32, e_b: u32, g_b: i32, n_d: u32, n_e: u32) -> KernelPackingConfig {
        KernelPackingConfig {
            d_b,
            e_b,
            g_b,
            n_d,
            n_e,
            overpacked: false,
            port_swap: false,
            d_operand: OperandRole::Weight,
        }
    }

    #[test]
    fn five_by_eight_two_lanes() {
        let p = DspProfile::dsp48e2();
        // 5 + 13 = 18 on the small port, 8 on the large port
        assert!(validate_kernel(&cfg(5, 8, 0, 2, 1), &p));
        assert!(!validate_kernel(&cfg(5, 8, 1, 2, 1), &p));
    }

    #[test]
    fn identity_always_fits() {
        let p = DspProfile::dsp48e2();
        assert!(validate_kernel(&cfg(18, 27, 0, 1, 1), &p));
        assert!(!validate_kernel(&cfg(19, 27, 0, 1, 1), &p));
    }

    #[test]
    fn four_by_four_quad() {
        let p = DspProfile::dsp48e2();
        // d: 4 + 8 = 12 <= 18, e: 4 + 16 = 20 <= 27
        let c = cfg(4, 4, 0, 2, 2);
        assert_eq!((c.d_span(), c.e_span()), (12, 20));
        assert!(validate_kernel(&c, &p));
        assert!(!validate_kernel(&cfg(4, 4, 0, 2, 3), &p));
    }

    #[test]
    fn port_swap_moves_operands() {
        let p = DspProfile::dsp48e2();
        let mut c = cfg(4, 4, 0, 3, 1);
        // d span 4 + 16 = 20 only fits on the large port
        assert!(!validate_kernel(&c, &p));
        c.port_swap = true;
        assert!(validate_kernel(&c, &p));
    }

    #[test]
    fn guard_sign_rules() {
        let p = DspProfile::dsp48e2();
        let mut c = cfg(4, 4, -1, 2, 1);
        assert!(!validate_kernel(&c, &p));
        c.overpacked = true;
        assert!(validate_kernel(&c, &p));
        c.g_b = 0;
        assert!(!validate_kernel(&c, &p));
    }

    #[test]
    fn zero_counts_are_invalid() {
        let p = DspProfile::dsp48e2();
        assert!(!validate_kernel(&cfg(4, 4, 0, 0, 1), &p));
        assert!(!validate_kernel(&cfg(0, 4, 0, 1, 1), &p));
    }
}

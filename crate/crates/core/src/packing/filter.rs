use serde::{Deserialize, Serialize};

use super::ceil_log2;
use crate::profile::DspProfile;

/// Filter packing: `k_p` filter taps and `n_p` sequence elements, both at
/// stride `p = w_b + a_b + g_b`. The product holds the `k_p + n_p - 1`
/// coefficients of their 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPackingConfig {
    pub w_b: u32,
    pub a_b: u32,
    pub g_b: i32,
    pub k_p: u32,
    pub n_p: u32,
    pub filter_on_large_port: bool,
    pub overpacked: bool,
}

impl FilterPackingConfig {
    pub fn stride(&self) -> i64 {
        self.w_b as i64 + self.a_b as i64 + self.g_b as i64
    }

    pub fn lanes(&self) -> u32 {
        self.k_p + self.n_p - 1
    }

    pub fn weight_port(&self, profile: &DspProfile) -> u32 {
        profile.port(self.filter_on_large_port)
    }

    pub fn activation_port(&self, profile: &DspProfile) -> u32 {
        profile.port(!self.filter_on_large_port)
    }

    pub fn weight_span(&self) -> i64 {
        self.w_b as i64 + (self.k_p as i64 - 1) * self.stride()
    }

    pub fn activation_span(&self) -> i64 {
        self.a_b as i64 + (self.n_p as i64 - 1) * self.stride()
    }

    /// Products summed into coefficient `k`.
    pub fn products_in_lane(&self, k: u32) -> u32 {
        let lo = k.saturating_sub(self.n_p - 1);
        let hi = k.min(self.k_p - 1);
        if hi < lo {
            0
        } else {
            hi - lo + 1
        }
    }
}

/// Guard bits inherently consumed by the polynomial accumulation.
pub fn min_filter_guard(k_p: u32, n_p: u32) -> i32 {
    ceil_log2(k_p.min(n_p).max(1)) as i32
}

/// Check the filter-packing port and guard constraints.
pub fn validate_filter(config: &FilterPackingConfig, profile: &DspProfile) -> bool {
    let c = config;
    if c.w_b == 0 || c.a_b == 0 || c.k_p == 0 || c.n_p == 0 {
        return false;
    }
    let floor = min_filter_guard(c.k_p, c.n_p) - i32::from(c.overpacked);
    c.g_b >= floor
        && c.stride() >= 1
        && c.activation_span() <= c.activation_port(profile) as i64
        && c.weight_span() <= c.weight_port(profile) as i64
}

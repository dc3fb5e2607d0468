use super::{
    filter::min_filter_guard, separate_operand, FilterPackingConfig, KernelPackingConfig, OperandRole, PackingChoice,
    PackingConfig, Signedness,
};
use crate::profile::DspProfile;
use crate::table::SeqLen;

/// Which enhancements the enumeration may use, and how operands are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
pub struct SearchOptions {
    pub allow_overpack: bool,
    pub allow_separation: bool,
    #[serde(default)]
    pub signedness: Signedness,
}

impl SearchOptions {
    pub fn full(signedness: Signedness) -> Self {
        SearchOptions {
            allow_overpack: true,
            allow_separation: true,
            signedness,
        }
    }
}

/// Every valid kernel and filter packing for `(w_b, a_b)`.
///
/// Both port assignments are tried, kernel packing additionally tries both
/// operand-to-slot roles. Guard bits run from their floor up to
/// `port_large`; an overpacked variant uses the floor minus one. Counts are
/// bounded by `port_large`. With separation enabled each operand of at least
/// two bits is also tried split into halves. The order is deterministic.
pub fn enumerate_configs(
    w_b: u32,
    a_b: u32,
    k: u32,
    seq: SeqLen,
    profile: &DspProfile,
    opts: SearchOptions,
) -> Vec<PackingChoice> {
    let mut out = Vec::new();
    if w_b == 0 || a_b == 0 || w_b > profile.port_large || a_b > profile.port_large {
        return out;
    }
    let mut separations = vec![None];
    if opts.allow_separation {
        if w_b >= 2 {
            separations.push(Some(OperandRole::Weight));
        }
        if a_b >= 2 {
            separations.push(Some(OperandRole::Activation));
        }
    }
    let overpack_modes: &[bool] = if opts.allow_overpack { &[false, true] } else { &[false] };

    for sep in separations {
        let (pw, pa) = match sep {
            None => (w_b, a_b),
            Some(OperandRole::Weight) => (separate_operand(w_b).unwrap().1, a_b),
            Some(OperandRole::Activation) => (w_b, separate_operand(a_b).unwrap().1),
        };
        let mut push = |config: PackingConfig| {
            debug_assert!(config.is_valid(profile), "{config:?}");
            out.push(PackingChoice::new(
                config,
                sep,
                w_b,
                a_b,
                opts.signedness,
                k,
                seq,
                profile,
            ));
        };
        for &overpacked in overpack_modes {
            kernel_configs(pw, pa, profile, overpacked, &mut push);
            filter_configs(pw, pa, profile, overpacked, &mut push);
        }
    }
    out
}

fn kernel_configs(w_b: u32, a_b: u32, profile: &DspProfile, overpacked: bool, push: &mut impl FnMut(PackingConfig)) {
    let bound = profile.port_large;
    for d_operand in [OperandRole::Weight, OperandRole::Activation] {
        let (d_b, e_b) = match d_operand {
            OperandRole::Weight => (w_b, a_b),
            OperandRole::Activation => (a_b, w_b),
        };
        for port_swap in [false, true] {
            let guards = if overpacked { -1..=-1 } else { 0..=bound as i32 };
            for g_b in guards {
                for n_d in 1..=bound {
                    for n_e in 1..=bound {
                        let c = KernelPackingConfig {
                            d_b,
                            e_b,
                            g_b,
                            n_d,
                            n_e,
                            overpacked,
                            port_swap,
                            d_operand,
                        };
                        if !super::validate_kernel(&c, profile) {
                            break;
                        }
                        // a single segment has no boundary to overlap
                        if overpacked && c.lanes() < 2 {
                            continue;
                        }
                        push(PackingConfig::Kernel(c));
                    }
                }
            }
        }
    }
}

fn filter_configs(w_b: u32, a_b: u32, profile: &DspProfile, overpacked: bool, push: &mut impl FnMut(PackingConfig)) {
    let bound = profile.port_large;
    for filter_on_large_port in [true, false] {
        for k_p in 1..=bound {
            for n_p in 1..=bound {
                let floor = min_filter_guard(k_p, n_p) - i32::from(overpacked);
                let top = if overpacked { floor } else { bound as i32 };
                for g_b in floor..=top {
                    let c = FilterPackingConfig {
                        w_b,
                        a_b,
                        g_b,
                        k_p,
                        n_p,
                        filter_on_large_port,
                        overpacked,
                    };
                    if overpacked && c.lanes() < 2 {
                        continue;
                    }
                    if super::validate_filter(&c, profile) {
                        push(PackingConfig::Filter(c));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::Strategy;
    use num_rational::Ratio;

    fn best(choices: &[PackingChoice]) -> Ratio<u64> {
        choices.iter().map(|c| c.t_mul).max().unwrap()
    }

    #[test]
    fn int4_has_quad_kernel_packing() {
        let p = DspProfile::dsp48e2();
        let all = enumerate_configs(4, 4, 1, SeqLen::Generic, &p, SearchOptions::default());
        assert!(all
            .iter()
            .any(|c| c.strategy() == Strategy::Kernel && c.t_mul >= Ratio::from_integer(4)));
    }

    #[test]
    fn widest_operands_admit_identity() {
        let p = DspProfile::dsp48e2();
        let all = enumerate_configs(27, 18, 1, SeqLen::Generic, &p, SearchOptions::default());
        assert!(!all.is_empty());
        assert!(all.iter().all(|c| c.t_mul == Ratio::from_integer(1)));
    }

    #[test]
    fn three_tap_4bit_reaches_six() {
        let p = DspProfile::dsp48e2();
        let all = enumerate_configs(4, 4, 3, SeqLen::Explicit(6), &p, SearchOptions::default());
        assert!(all
            .iter()
            .any(|c| c.strategy() == Strategy::Filter && c.t_mul == Ratio::from_integer(6)));
    }

    #[test]
    fn oversize_is_empty() {
        let p = DspProfile::dsp48e2();
        assert!(enumerate_configs(28, 4, 1, SeqLen::Generic, &p, SearchOptions::default()).is_empty());
        assert!(enumerate_configs(0, 4, 1, SeqLen::Generic, &p, SearchOptions::default()).is_empty());
        // both 27 bits: no port pair takes two 27-bit operands
        assert!(enumerate_configs(27, 27, 1, SeqLen::Generic, &p, SearchOptions::default()).is_empty());
    }

    #[test]
    fn enhancements_only_add() {
        let p = DspProfile::dsp48e2();
        for (w, a) in [(2, 2), (4, 4), (5, 8), (8, 8), (3, 7)] {
            let base = enumerate_configs(w, a, 3, SeqLen::Generic, &p, SearchOptions::default());
            let full = enumerate_configs(w, a, 3, SeqLen::Generic, &p, SearchOptions::full(Signedness::Unsigned));
            assert!(full.len() > base.len());
            assert!(base.iter().all(|c| full.contains(c)));
            assert!(best(&full) >= best(&base));
        }
    }

    #[test]
    fn all_yielded_are_valid() {
        let p = DspProfile::dsp48e2();
        for (w, a) in [(2, 3), (6, 6), (8, 2)] {
            for c in enumerate_configs(
                w,
                a,
                5,
                SeqLen::Explicit(9),
                &p,
                SearchOptions::full(Signedness::TwosComplement),
            ) {
                assert!(c.config.is_valid(&p));
                assert!(c.recheck(5, SeqLen::Explicit(9), &p).is_ok());
            }
        }
    }
}

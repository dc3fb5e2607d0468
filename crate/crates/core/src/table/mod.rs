//! Optimal packing per bit-width pair, and verified lookup tables over a
//! bit-width grid.

mod io;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::map_collect;
use crate::packing::{enumerate_configs, PackingChoice, SearchOptions, Signedness};
use crate::profile::DspProfile;
use crate::sim::{verify_choice, SamplePolicy, ScheduleContext};

pub use io::TABLE_VERSION;

/// Sequence length assumed for filter-packing throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqLen {
    /// `N` taken as a multiple of every `N_p`.
    #[default]
    Generic,
    Explicit(u32),
}

impl FromStr for SeqLen {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "generic" {
            return Ok(SeqLen::Generic);
        }
        match s.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(SeqLen::Explicit(n)),
            _ => Err(format!(
                "sequence length must be `generic` or a positive integer, got `{s}`"
            )),
        }
    }
}

impl fmt::Display for SeqLen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeqLen::Generic => f.write_str("generic"),
            SeqLen::Explicit(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelShape {
    pub k_h: u32,
    pub k_w: u32,
}

impl KernelShape {
    pub fn new(k_h: u32, k_w: u32) -> Self {
        KernelShape { k_h, k_w }
    }
}

impl FromStr for KernelShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("kernel shape must look like 3x3, got `{s}`");
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let h: u32 = h.trim().parse().map_err(|_| bad())?;
        let w: u32 = w.trim().parse().map_err(|_| bad())?;
        if h == 0 || w == 0 {
            return Err(bad());
        }
        Ok(KernelShape { k_h: h, k_w: w })
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.k_h, self.k_w)
    }
}

/// Total order used to pick the best choice; `Greater` is better.
/// Higher throughput, then more accumulation headroom, then fewer correction
/// gates, then kernel before filter.
pub fn rank(a: &PackingChoice, b: &PackingChoice) -> Ordering {
    a.t_mul
        .cmp(&b.t_mul)
        .then(a.e_g.cmp(&b.e_g))
        .then(b.correction_gates.cmp(&a.correction_gates))
        .then(b.strategy().cmp(&a.strategy()))
}

/// Best of the candidates under [`rank`]; the earliest wins a full tie.
pub fn select_optimal(candidates: impl IntoIterator<Item = PackingChoice>) -> Option<PackingChoice> {
    candidates.into_iter().fold(None, |best, c| match best {
        Some(b) if rank(&c, &b) != Ordering::Greater => Some(b),
        _ => Some(c),
    })
}

/// Optimal packing for one bit-width pair. Filter packing runs along the
/// kernel's rows, so its filter length is `k_w`.
pub fn search_optimal(
    w_b: u32,
    a_b: u32,
    shape: KernelShape,
    seq: SeqLen,
    profile: &DspProfile,
    opts: SearchOptions,
) -> Result<PackingChoice> {
    select_optimal(enumerate_configs(w_b, a_b, shape.k_w, seq, profile, opts)).ok_or(Error::NoValidPacking { w_b, a_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub bits_min: u32,
    pub bits_max: u32,
    pub seq: SeqLen,
    pub search: SearchOptions,
    pub policy: SamplePolicy,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            bits_min: 2,
            bits_max: 8,
            seq: SeqLen::Generic,
            search: SearchOptions::full(Signedness::Unsigned),
            policy: SamplePolicy::default(),
        }
    }
}

/// Optimal choices over a square bit-width grid for one kernel shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    pub profile: DspProfile,
    pub kernel_shape: KernelShape,
    pub seq_len_policy: SeqLen,
    pub signedness: Signedness,
    pub bits_min: u32,
    pub bits_max: u32,
    pub allow_overpack: bool,
    pub allow_separation: bool,
    /// Row-major over `w_b`, then `a_b`.
    pub entries: Vec<PackingChoice>,
}

impl LookupTable {
    pub fn side(&self) -> usize {
        (self.bits_max - self.bits_min + 1) as usize
    }

    pub fn get(&self, w_b: u32, a_b: u32) -> Option<&PackingChoice> {
        let range = self.bits_min..=self.bits_max;
        if !range.contains(&w_b) || !range.contains(&a_b) {
            return None;
        }
        let idx = (w_b - self.bits_min) as usize * self.side() + (a_b - self.bits_min) as usize;
        self.entries.get(idx).filter(|c| c.w_b == w_b && c.a_b == a_b)
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            allow_overpack: self.allow_overpack,
            allow_separation: self.allow_separation,
            signedness: self.signedness,
        }
    }

    pub fn schedule_context(&self) -> ScheduleContext {
        ScheduleContext {
            rows: self.kernel_shape.k_h,
            k: self.kernel_shape.k_w,
            seq: self.seq_len_policy,
        }
    }

    /// Adjacent cells never gain throughput as either width grows.
    pub fn check_monotone(&self) -> Result<(), String> {
        for w in self.bits_min..=self.bits_max {
            for a in self.bits_min..=self.bits_max {
                let here = self.get(w, a).ok_or_else(|| format!("missing ({w}, {a})"))?;
                for (nw, na) in [(w + 1, a), (w, a + 1)] {
                    if let Some(next) = self.get(nw, na) {
                        if next.t_mul > here.t_mul {
                            return Err(format!(
                                "t_mul rises from {} at ({w}, {a}) to {} at ({nw}, {na})",
                                here.t_mul, next.t_mul
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn grid(lo: u32, hi: u32) -> Vec<(u32, u32)> {
    (lo..=hi).flat_map(|w| (lo..=hi).map(move |a| (w, a))).collect()
}

/// Search and verify every cell. A cell whose choice fails bit-exact
/// verification aborts the build.
pub fn build_table(shape: KernelShape, profile: &DspProfile, opts: &BuildOptions) -> Result<LookupTable> {
    profile.validate()?;
    if opts.bits_min == 0 || opts.bits_min > opts.bits_max {
        return Err(Error::InvalidConfig(format!(
            "bit range {}..={} is empty",
            opts.bits_min, opts.bits_max
        )));
    }
    let ctx = ScheduleContext {
        rows: shape.k_h,
        k: shape.k_w,
        seq: opts.seq,
    };
    let cells = grid(opts.bits_min, opts.bits_max);
    let entries = map_collect(opts.policy.exec, &cells, |&(w, a)| {
        let choice = search_optimal(w, a, shape, opts.seq, profile, opts.search)?;
        let report = verify_choice(&choice, profile, &opts.policy, Some(&ctx))?;
        if !report.passed() {
            return Err(Error::Verification(format!(
                "({w}, {a}) {} mismatches; first: {}",
                report.mismatches,
                serde_json::to_string(&report.counterexample).unwrap_or_default()
            )));
        }
        Ok(choice)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(LookupTable {
        profile: profile.clone(),
        kernel_shape: shape,
        seq_len_policy: opts.seq,
        signedness: opts.search.signedness,
        bits_min: opts.bits_min,
        bits_max: opts.bits_max,
        allow_overpack: opts.search.allow_overpack,
        allow_separation: opts.search.allow_separation,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn p() -> DspProfile {
        DspProfile::dsp48e2()
    }

    #[test]
    fn parses_shapes_and_lengths() {
        assert_eq!("3x3".parse::<KernelShape>().unwrap(), KernelShape::new(3, 3));
        assert_eq!("1X5".parse::<KernelShape>().unwrap(), KernelShape::new(1, 5));
        assert!("3".parse::<KernelShape>().is_err());
        assert!("0x3".parse::<KernelShape>().is_err());
        assert_eq!("generic".parse::<SeqLen>().unwrap(), SeqLen::Generic);
        assert_eq!("40".parse::<SeqLen>().unwrap(), SeqLen::Explicit(40));
        assert!("0".parse::<SeqLen>().is_err());
    }

    #[test]
    fn seq_len_serde_shape() {
        assert_eq!(serde_json::to_string(&SeqLen::Generic).unwrap(), "\"generic\"");
        assert_eq!(serde_json::to_string(&SeqLen::Explicit(8)).unwrap(), "{\"explicit\":8}");
    }

    #[test]
    fn anchor_points() {
        let full = SearchOptions::full(Signedness::Unsigned);
        let t = |w, a, s| search_optimal(w, a, s, SeqLen::Generic, &p(), full).unwrap().t_mul;
        assert!(t(4, 4, KernelShape::new(1, 1)) >= Ratio::from_integer(4));
        assert!(t(4, 4, KernelShape::new(3, 3)) >= Ratio::from_integer(6));
        assert!(t(5, 8, KernelShape::new(1, 1)) >= Ratio::from_integer(2));
        assert!(t(2, 2, KernelShape::new(3, 3)) >= Ratio::from_integer(12));
        assert!(t(8, 8, KernelShape::new(1, 1)) >= Ratio::from_integer(1));
    }

    #[test]
    fn ranking_prefers_headroom_then_fewer_gates_then_kernel() {
        let opts = SearchOptions::default();
        let all = enumerate_configs(4, 4, 1, SeqLen::Generic, &p(), opts);
        let best = select_optimal(all.clone()).unwrap();
        for c in &all {
            assert_ne!(rank(c, &best), Ordering::Greater);
        }
        let top: Vec<_> = all.iter().filter(|c| c.t_mul == best.t_mul).collect();
        assert!(top.iter().all(|c| c.e_g <= best.e_g));
    }

    #[test]
    fn optimum_is_deterministic() {
        let opts = SearchOptions::full(Signedness::TwosComplement);
        let a = search_optimal(3, 5, KernelShape::new(3, 3), SeqLen::Explicit(10), &p(), opts).unwrap();
        let b = search_optimal(3, 5, KernelShape::new(3, 3), SeqLen::Explicit(10), &p(), opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_widths_have_no_packing() {
        let err = search_optimal(
            28,
            2,
            KernelShape::new(1, 1),
            SeqLen::Generic,
            &p(),
            SearchOptions::default(),
        );
        assert!(matches!(err, Err(Error::NoValidPacking { w_b: 28, a_b: 2 })));
    }
}

use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::cost::{CostModel, StageConfig, StageEstimate};
use crate::error::{Error, Result};
use crate::network::{op_dsp, BitPair, Fraction, NetworkSpec, OpCount, TableSet};

pub const PLAN_VERSION: u32 = 1;
/// Largest DP table, in cells, before refusing.
const MAX_DP_CELLS: u64 = 400_000_000;
const MAX_BRUTE_SPACE: u128 = 10_000_000;

/// Per-stage workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageInput {
    pub name: String,
    /// Packed DSP operations of the layer.
    pub op_dsp: Fraction,
    pub bits: BitPair,
    pub op_mul: u64,
    pub kernel_area: u32,
    /// Channel tiling; parallel factors include its multiples.
    pub c_out: u32,
}

/// Stage inputs for every layer of a network.
pub fn stage_inputs(net: &NetworkSpec, bits: &[BitPair], tables: &TableSet) -> Result<Vec<StageInput>> {
    let report = op_dsp(net, bits, tables)?;
    Ok(net
        .layers
        .iter()
        .zip(report.layers)
        .map(|(l, ops)| StageInput {
            name: l.name.clone(),
            op_dsp: ops.op_dsp,
            bits: ops.bits,
            op_mul: ops.op_mul,
            kernel_area: l.k_h * l.k_w,
            c_out: l.c_out,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub dsp: u64,
    pub lut: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocOptions {
    /// DSP axis granularity; estimates round up to whole units.
    pub dsp_unit: u64,
    /// LUT axis granularity; estimates round up to whole units.
    pub lut_unit: u64,
    pub pf_cap: u32,
    /// Allow LUT-built lanes next to (or instead of) DSP lanes.
    pub lut_replacement: bool,
}

impl Default for AllocOptions {
    fn default() -> Self {
        AllocOptions {
            dsp_unit: 1,
            lut_unit: 500,
            pf_cap: 512,
            lut_replacement: false,
        }
    }
}

/// Powers of two and multiples of `c_out`, up to `cap`.
pub fn pf_domain(c_out: u32, cap: u32) -> Vec<u32> {
    let mut d = BTreeSet::new();
    let mut p = 1u32;
    while p <= cap {
        d.insert(p);
        p = match p.checked_mul(2) {
            Some(n) => n,
            None => break,
        };
    }
    if let Some(n) = cap.checked_div(c_out) {
        d.extend((1..=n).map(|m| m * c_out));
    }
    d.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub name: String,
    pub pf_dsp: u32,
    pub pf_lut: u32,
    pub bits: BitPair,
    pub op_dsp: Fraction,
    /// `op_dsp / (pf_dsp + pf_lut)` cycles.
    pub latency: Fraction,
    pub estimate: StageEstimate,
    pub dsp_units: u64,
    pub lut_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTotals {
    pub r_dsp: u64,
    pub r_lut: u64,
    pub dsp_units: u64,
    pub lut_units: u64,
    /// Worst stage slack.
    pub t_wns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub version: u32,
    pub budgets: Budgets,
    pub options: AllocOptions,
    pub stages: Vec<StagePlan>,
    pub totals: PlanTotals,
    /// Pipeline latency: the slowest stage.
    pub lat: Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DpStats {
    /// (stage, dsp, lut) cells filled across both passes.
    pub cells: u64,
    /// Candidate evaluations across both passes.
    pub evaluations: u64,
}

#[derive(Debug, Clone)]
struct Candidate {
    pf_dsp: u32,
    pf_lut: u32,
    est: StageEstimate,
    dsp_units: u64,
    lut_units: u64,
    latency: OpCount,
}

fn units(v: u64, unit: u64) -> u64 {
    v.div_ceil(unit)
}

fn check_inputs(stages: &[StageInput], opts: &AllocOptions) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::InvalidConfig("no stages to allocate".into()));
    }
    if opts.dsp_unit == 0 || opts.lut_unit == 0 || opts.pf_cap == 0 {
        return Err(Error::InvalidConfig(
            "units and the parallel-factor cap must be positive".into(),
        ));
    }
    if stages.iter().any(|s| s.op_dsp.den == 0) {
        return Err(Error::InvalidConfig("zero denominator in op_dsp".into()));
    }
    Ok(())
}

/// Configurations of one stage that close timing and fit the budgets on
/// their own, in a fixed order.
fn candidates(stage: &StageInput, model: &CostModel, budgets: Budgets, opts: &AllocOptions) -> Vec<Candidate> {
    let domain = pf_domain(stage.c_out, opts.pf_cap);
    let (dsp_lanes, lut_lanes): (Vec<u32>, Vec<u32>) = if opts.lut_replacement {
        let with_zero: Vec<u32> = std::iter::once(0).chain(domain.iter().copied()).collect();
        (with_zero.clone(), with_zero)
    } else {
        (domain, vec![0])
    };
    let max_d = budgets.dsp / opts.dsp_unit;
    let max_l = budgets.lut / opts.lut_unit;
    let op = OpCount::from(stage.op_dsp);
    let mut out = Vec::new();
    for &pf_dsp in &dsp_lanes {
        for &pf_lut in &lut_lanes {
            if pf_dsp + pf_lut == 0 {
                continue;
            }
            let est = model.predict(&StageConfig {
                pf_dsp,
                pf_lut,
                bits: stage.bits,
                op_mul: stage.op_mul,
                kernel_area: stage.kernel_area,
            });
            let (du, lu) = (units(est.r_dsp, opts.dsp_unit), units(est.r_lut, opts.lut_unit));
            // C3 and stage-wise C2
            if est.t_wns <= 0.0 || du > max_d || lu > max_l {
                continue;
            }
            out.push(Candidate {
                pf_dsp,
                pf_lut,
                est,
                dsp_units: du,
                lut_units: lu,
                latency: op / Ratio::from_integer(u128::from(pf_dsp + pf_lut)),
            });
        }
    }
    out
}

/// Latencies replaced by their rank among all candidate latencies.
fn latency_ranks(cands: &[Vec<Candidate>]) -> Vec<Vec<u32>> {
    let mut all: Vec<&OpCount> = cands.iter().flatten().map(|c| &c.latency).collect();
    all.sort();
    all.dedup();
    cands
        .iter()
        .map(|cs| {
            cs.iter()
                .map(|c| all.binary_search(&&c.latency).unwrap() as u32)
                .collect()
        })
        .collect()
}

fn infeasible(stages: &[StageInput], cands: &[Vec<Candidate>]) -> Error {
    match stages.iter().zip(cands).find(|(_, c)| c.is_empty()) {
        Some((s, _)) => Error::Infeasible(format!(
            "stage `{}` has no configuration with positive slack inside the budgets",
            s.name
        )),
        None => Error::Infeasible("the budgets cannot hold every stage at once".into()),
    }
}

fn build_plan(stages: &[StageInput], picks: &[&Candidate], budgets: Budgets, opts: &AllocOptions) -> AllocationPlan {
    let stage_plans: Vec<StagePlan> = stages
        .iter()
        .zip(picks)
        .map(|(s, c)| StagePlan {
            name: s.name.clone(),
            pf_dsp: c.pf_dsp,
            pf_lut: c.pf_lut,
            bits: s.bits,
            op_dsp: s.op_dsp,
            latency: c.latency.into(),
            estimate: c.est,
            dsp_units: c.dsp_units,
            lut_units: c.lut_units,
        })
        .collect();
    let lat = picks.iter().map(|c| c.latency).max().unwrap_or_default();
    AllocationPlan {
        version: PLAN_VERSION,
        budgets,
        options: *opts,
        totals: PlanTotals {
            r_dsp: picks.iter().map(|c| c.est.r_dsp).sum(),
            r_lut: picks.iter().map(|c| c.est.r_lut).sum(),
            dsp_units: picks.iter().map(|c| c.dsp_units).sum(),
            lut_units: picks.iter().map(|c| c.lut_units).sum(),
            t_wns: picks.iter().map(|c| c.est.t_wns).fold(f64::INFINITY, f64::min),
        },
        stages: stage_plans,
        lat: lat.into(),
    }
}

/// Latency-optimal allocation by dynamic programming over
/// (stage, DSP units, LUT units).
///
/// The first pass fills `Lat[l][d][u]`, the best pipeline latency of the
/// first `l` stages using at most `d` DSP units and `u` LUT units, keeping
/// a candidate only when it strictly improves the cell. The second pass
/// fixes that latency and minimises total DSPs, then LUTs, and records the
/// backtrace.
pub fn dp_allocate(
    stages: &[StageInput],
    model: &CostModel,
    budgets: Budgets,
    opts: &AllocOptions,
) -> Result<(AllocationPlan, DpStats)> {
    check_inputs(stages, opts)?;
    let cands: Vec<Vec<Candidate>> = stages.iter().map(|s| candidates(s, model, budgets, opts)).collect();
    if cands.iter().any(Vec::is_empty) {
        return Err(infeasible(stages, &cands));
    }
    let ranks = latency_ranks(&cands);
    let rd = (budgets.dsp / opts.dsp_unit) as usize;
    let rl = (budgets.lut / opts.lut_unit) as usize;
    let width = (rd + 1) * (rl + 1);
    let n = stages.len();
    let cells = (n as u64).saturating_mul(width as u64);
    if cells > MAX_DP_CELLS {
        return Err(Error::SpaceTooLarge(u128::from(cells)));
    }
    let mut stats = DpStats::default();
    let idx = |d: usize, u: usize| d * (rl + 1) + u;

    // pass 1: best latency rank, u32::MAX = unreachable
    const NONE: u32 = u32::MAX;
    let mut prev = vec![0u32; width];
    let mut cur = vec![NONE; width];
    for l in 0..n {
        // dominated candidates cannot change a cell's value
        let mut order: Vec<usize> = (0..cands[l].len()).collect();
        order.retain(|&i| {
            let a = &cands[l][i];
            !cands[l].iter().enumerate().any(|(j, b)| {
                let no_worse = b.dsp_units <= a.dsp_units && b.lut_units <= a.lut_units && ranks[l][j] <= ranks[l][i];
                let better = b.dsp_units < a.dsp_units || b.lut_units < a.lut_units || ranks[l][j] < ranks[l][i];
                no_worse && (better || j < i)
            })
        });
        for d in 0..=rd {
            for u in 0..=rl {
                let mut best = NONE;
                for &i in &order {
                    let c = &cands[l][i];
                    stats.evaluations += 1;
                    if c.dsp_units as usize > d || c.lut_units as usize > u {
                        continue;
                    }
                    let before = prev[idx(d - c.dsp_units as usize, u - c.lut_units as usize)];
                    if before == NONE {
                        continue;
                    }
                    let v = before.max(ranks[l][i]);
                    if v < best {
                        best = v;
                    }
                }
                cur[idx(d, u)] = best;
            }
        }
        stats.cells += width as u64;
        std::mem::swap(&mut prev, &mut cur);
    }
    let target = prev[idx(rd, rl)];
    if target == NONE {
        return Err(infeasible(stages, &cands));
    }

    // pass 2: fewest DSPs then LUTs at that latency
    type Cost = Option<(u64, u64)>;
    let mut prev: Vec<Cost> = vec![Some((0, 0)); width];
    let mut cur: Vec<Cost> = vec![None; width];
    let mut back = vec![vec![u16::MAX; width]; n];
    for l in 0..n {
        let allowed: Vec<usize> = (0..cands[l].len()).filter(|&i| ranks[l][i] <= target).collect();
        for d in 0..=rd {
            for u in 0..=rl {
                let mut best: Cost = None;
                let mut pick = u16::MAX;
                for &i in &allowed {
                    let c = &cands[l][i];
                    stats.evaluations += 1;
                    if c.dsp_units as usize > d || c.lut_units as usize > u {
                        continue;
                    }
                    let Some((pd, pl)) = prev[idx(d - c.dsp_units as usize, u - c.lut_units as usize)] else {
                        continue;
                    };
                    let v = (pd + c.est.r_dsp, pl + c.est.r_lut);
                    if best.is_none_or(|b| v < b) {
                        best = Some(v);
                        pick = i as u16;
                    }
                }
                cur[idx(d, u)] = best;
                back[l][idx(d, u)] = pick;
            }
        }
        stats.cells += width as u64;
        std::mem::swap(&mut prev, &mut cur);
    }
    let mut picks = Vec::with_capacity(n);
    let (mut d, mut u) = (rd, rl);
    for l in (0..n).rev() {
        let i = back[l][idx(d, u)];
        debug_assert_ne!(i, u16::MAX);
        let c = &cands[l][i as usize];
        d -= c.dsp_units as usize;
        u -= c.lut_units as usize;
        picks.push(c);
    }
    picks.reverse();
    Ok((build_plan(stages, &picks, budgets, opts), stats))
}

/// Exhaustive search over every combination of stage configurations under
/// the same constraints and ordering as [`dp_allocate`]. Small instances
/// only.
pub fn brute_force_allocate(
    stages: &[StageInput],
    model: &CostModel,
    budgets: Budgets,
    opts: &AllocOptions,
) -> Result<AllocationPlan> {
    check_inputs(stages, opts)?;
    let cands: Vec<Vec<Candidate>> = stages.iter().map(|s| candidates(s, model, budgets, opts)).collect();
    let space = cands.iter().map(|c| c.len() as u128).product::<u128>();
    if space > MAX_BRUTE_SPACE {
        return Err(Error::SpaceTooLarge(space));
    }
    if space == 0 {
        return Err(infeasible(stages, &cands));
    }
    let max_d = budgets.dsp / opts.dsp_unit;
    let max_l = budgets.lut / opts.lut_unit;
    let mut pos = vec![0usize; cands.len()];
    let mut best: Option<(OpCount, u64, u64, Vec<usize>)> = None;
    loop {
        let picks: Vec<&Candidate> = pos.iter().zip(&cands).map(|(&i, c)| &c[i]).collect();
        let du: u64 = picks.iter().map(|c| c.dsp_units).sum();
        let lu: u64 = picks.iter().map(|c| c.lut_units).sum();
        if du <= max_d && lu <= max_l {
            let lat = picks.iter().map(|c| c.latency).max().unwrap();
            let key = (
                lat,
                picks.iter().map(|c| c.est.r_dsp).sum::<u64>(),
                picks.iter().map(|c| c.est.r_lut).sum::<u64>(),
            );
            if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
                best = Some((key.0, key.1, key.2, pos.clone()));
            }
        }
        // odometer, last stage fastest
        let mut l = cands.len();
        loop {
            if l == 0 {
                let (_, _, _, pos) = best.ok_or_else(|| infeasible(stages, &cands))?;
                let picks: Vec<&Candidate> = pos.iter().zip(&cands).map(|(&i, c)| &c[i]).collect();
                return Ok(build_plan(stages, &picks, budgets, opts));
            }
            l -= 1;
            pos[l] += 1;
            if pos[l] < cands[l].len() {
                break;
            }
            pos[l] = 0;
        }
    }
}

impl AllocationPlan {
    pub fn lat(&self) -> OpCount {
        self.lat.into()
    }

    /// Re-derive every stage from the inputs and the model, then check the
    /// resource, slack and latency constraints.
    pub fn recheck(&self, stages: &[StageInput], model: &CostModel) -> Result<(), String> {
        if self.stages.len() != stages.len() {
            return Err(format!("{} stage plans for {} stages", self.stages.len(), stages.len()));
        }
        let o = &self.options;
        if o.dsp_unit == 0 || o.lut_unit == 0 {
            return Err("zero resource unit".into());
        }
        let mut totals = (0u64, 0u64, 0u64, 0u64);
        let mut worst = OpCount::from_integer(0);
        for (p, s) in self.stages.iter().zip(stages) {
            if p.name != s.name || p.op_dsp != s.op_dsp || p.bits != s.bits {
                return Err(format!("stage `{}` does not match its input", p.name));
            }
            let lanes = p.pf_dsp + p.pf_lut;
            if lanes == 0 {
                return Err(format!("stage `{}` has no lanes", p.name));
            }
            if p.pf_lut > 0 && !o.lut_replacement {
                return Err(format!("stage `{}` uses LUT lanes with replacement disabled", p.name));
            }
            let domain = pf_domain(s.c_out, o.pf_cap);
            let dsp_ok = domain.contains(&p.pf_dsp) || (p.pf_dsp == 0 && o.lut_replacement);
            let lut_ok = p.pf_lut == 0 || domain.contains(&p.pf_lut);
            if !dsp_ok || !lut_ok {
                return Err(format!("stage `{}` uses a parallel factor outside the domain", p.name));
            }
            let lat = OpCount::from(s.op_dsp) / Ratio::from_integer(u128::from(lanes));
            if OpCount::from(p.latency) != lat {
                return Err(format!("stage `{}` latency {:?} should be {lat}", p.name, p.latency));
            }
            let est = model.predict(&StageConfig {
                pf_dsp: p.pf_dsp,
                pf_lut: p.pf_lut,
                bits: s.bits,
                op_mul: s.op_mul,
                kernel_area: s.kernel_area,
            });
            if est != p.estimate {
                return Err(format!("stage `{}` estimate differs from the model", p.name));
            }
            if est.t_wns <= 0.0 {
                return Err(format!("stage `{}` has non-positive slack {}", p.name, est.t_wns));
            }
            if p.dsp_units != units(est.r_dsp, o.dsp_unit) || p.lut_units != units(est.r_lut, o.lut_unit) {
                return Err(format!("stage `{}` resource units are wrong", p.name));
            }
            totals.0 += est.r_dsp;
            totals.1 += est.r_lut;
            totals.2 += p.dsp_units;
            totals.3 += p.lut_units;
            worst = worst.max(lat);
        }
        if totals.0 > self.budgets.dsp || totals.2 > self.budgets.dsp / o.dsp_unit {
            return Err(format!("{} DSPs exceed the budget of {}", totals.0, self.budgets.dsp));
        }
        if totals.1 > self.budgets.lut || totals.3 > self.budgets.lut / o.lut_unit {
            return Err(format!("{} LUTs exceed the budget of {}", totals.1, self.budgets.lut));
        }
        let t = &self.totals;
        if (t.r_dsp, t.r_lut, t.dsp_units, t.lut_units) != totals {
            return Err("totals do not add up".into());
        }
        if self.lat() != worst {
            return Err(format!("plan latency {:?} should be {worst}", self.lat));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes") + "\n"
    }
}

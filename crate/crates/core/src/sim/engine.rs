use super::decode::{decode_into, DecodedLanes};
use crate::error::{Error, Result};
use crate::packing::{
    accumulation_exponent, split_value, FilterPackingConfig, KernelPackingConfig, OperandFormat, OperandRole,
    PackingChoice, PackingConfig, Signedness,
};
use crate::profile::DspProfile;

const MAX_SLOTS: usize = 128;

/// One wide multiply for a fixed layout. `x` operands sit on the d / filter
/// side, `y` operands on the e / sequence side.
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    stride: u32,
    overpacked: bool,
    lane_signed: bool,
    lanes: usize,
    x_fmt: OperandFormat,
    y_fmt: OperandFormat,
    x_off: Vec<u32>,
    y_off: Vec<u32>,
    /// Lane of product `(i, j)` at `i * y_len + j`.
    lane_of: Vec<u16>,
    acc_min: i128,
    acc_max: i128,
    accumulator: u32,
}

impl Engine {
    pub(crate) fn new(
        config: &PackingConfig,
        x_fmt: OperandFormat,
        y_fmt: OperandFormat,
        profile: &DspProfile,
    ) -> Result<Self> {
        if !config.is_valid(profile) {
            return Err(Error::InvalidConfig(format!(
                "{config:?} is not valid for {}",
                profile.name
            )));
        }
        let (x_bits, y_bits, x_len, y_len, lane) = match config {
            PackingConfig::Kernel(c) => (
                c.d_b,
                c.e_b,
                c.n_d,
                c.n_e,
                Box::new(move |i: u32, j: u32| i + j * c.n_d) as Box<dyn Fn(u32, u32) -> u32>,
            ),
            PackingConfig::Filter(c) => (
                c.w_b,
                c.a_b,
                c.k_p,
                c.n_p,
                Box::new(|i: u32, j: u32| i + j) as Box<dyn Fn(u32, u32) -> u32>,
            ),
        };
        if x_fmt.bits > x_bits || y_fmt.bits > y_bits || x_fmt.bits == 0 || y_fmt.bits == 0 {
            return Err(Error::InvalidConfig(format!(
                "operand widths ({}, {}) exceed packed widths ({x_bits}, {y_bits})",
                x_fmt.bits, y_fmt.bits
            )));
        }
        let lanes = config.lanes() as usize;
        if lanes > MAX_SLOTS || x_len as usize > MAX_SLOTS || y_len as usize > MAX_SLOTS {
            return Err(Error::InvalidConfig(format!("more than {MAX_SLOTS} slots")));
        }
        let stride = config.stride() as u32;
        let (x_off, y_off) = match config {
            PackingConfig::Kernel(c) => (
                (0..c.n_d).map(|i| i * stride).collect(),
                (0..c.n_e).map(|j| j * c.n_d * stride).collect(),
            ),
            PackingConfig::Filter(c) => (
                (0..c.k_p).map(|i| i * stride).collect(),
                (0..c.n_p).map(|j| j * stride).collect(),
            ),
        };
        let lane_of = (0..x_len)
            .flat_map(|i| (0..y_len).map(move |j| (i, j)))
            .map(|(i, j)| lane(i, j) as u16)
            .collect();
        let lane_signed = x_fmt.signedness.is_signed() || y_fmt.signedness.is_signed();
        let acc = profile.accumulator;
        let (acc_min, acc_max) = if lane_signed {
            (-(1i128 << (acc - 1)), (1i128 << (acc - 1)) - 1)
        } else {
            (0, (1i128 << acc) - 1)
        };
        Ok(Engine {
            stride,
            overpacked: config.overpacked(),
            lane_signed,
            lanes,
            x_fmt,
            y_fmt,
            x_off,
            y_off,
            lane_of,
            acc_min,
            acc_max,
            accumulator: acc,
        })
    }

    pub(crate) fn lanes(&self) -> usize {
        self.lanes
    }

    pub(crate) fn x_len(&self) -> usize {
        self.x_off.len()
    }

    pub(crate) fn y_len(&self) -> usize {
        self.y_off.len()
    }

    fn check_operands(&self, x: &[i64], y: &[i64]) -> Result<()> {
        if x.len() != self.x_len() || y.len() != self.y_len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} x {} operands, got {} x {}",
                self.x_len(),
                self.y_len(),
                x.len(),
                y.len()
            )));
        }
        for (&v, fmt) in x
            .iter()
            .map(|v| (v, self.x_fmt))
            .chain(y.iter().map(|v| (v, self.y_fmt)))
        {
            if !fmt.contains(v) {
                return Err(Error::OperandOutOfRange {
                    value: v,
                    bits: fmt.bits,
                    signedness: fmt.signedness.label(),
                });
            }
        }
        Ok(())
    }

    #[inline]
    fn word(vals: &[i64], offs: &[u32]) -> i128 {
        vals.iter().zip(offs).map(|(&v, &o)| (v as i128) << o).sum()
    }

    /// Sum `times * X * Y` over all terms and decode. Operand ranges are the
    /// caller's responsibility.
    #[inline]
    pub(crate) fn run_unchecked(&self, terms: &[(&[i64], &[i64], u64)], out: &mut [i64]) -> Result<()> {
        let mut word: i128 = 0;
        let mut lsbs = [0u8; MAX_SLOTS];
        let ny = self.y_len();
        for &(x, y, times) in terms {
            word += Self::word(x, &self.x_off) * Self::word(y, &self.y_off) * times as i128;
            if self.overpacked && times & 1 == 1 {
                for (i, &xi) in x.iter().enumerate() {
                    for (j, &yj) in y.iter().enumerate() {
                        lsbs[self.lane_of[i * ny + j] as usize] ^= (xi & yj & 1) as u8;
                    }
                }
            }
        }
        if word < self.acc_min || word > self.acc_max {
            return Err(Error::AccumulatorOverflow(self.accumulator));
        }
        decode_into(
            word,
            self.stride,
            self.overpacked,
            self.lane_signed,
            &lsbs[..self.lanes],
            out,
        );
        Ok(())
    }

    pub(crate) fn run(&self, terms: &[(&[i64], &[i64], u64)], out: &mut [i64]) -> Result<()> {
        for &(x, y, _) in terms {
            self.check_operands(x, y)?;
        }
        self.run_unchecked(terms, out)
    }
}

/// A packing choice wired for simulation, including operand separation.
#[derive(Debug, Clone)]
pub(crate) struct ChoiceSim {
    halves: Vec<Engine>,
    /// Separated role and the low half's width.
    split: Option<(OperandRole, u32)>,
    /// Weights ride on the x side.
    weights_on_x: bool,
    pub(crate) w_fmt: OperandFormat,
    pub(crate) a_fmt: OperandFormat,
    pub(crate) n_w: usize,
    pub(crate) n_a: usize,
    pub(crate) lanes: usize,
}

impl ChoiceSim {
    pub(crate) fn new(choice: &PackingChoice, profile: &DspProfile) -> Result<Self> {
        let weights_on_x = match &choice.config {
            PackingConfig::Kernel(c) => c.d_operand == OperandRole::Weight,
            PackingConfig::Filter(_) => true,
        };
        let halves = choice
            .half_formats()
            .into_iter()
            .map(|(wf, af)| {
                let (xf, yf) = if weights_on_x { (wf, af) } else { (af, wf) };
                Engine::new(&choice.config, xf, yf, profile)
            })
            .collect::<Result<Vec<_>>>()?;
        let split = choice.separation.map(|role| {
            let bits = match role {
                OperandRole::Weight => choice.w_b,
                OperandRole::Activation => choice.a_b,
            };
            (role, bits.div_ceil(2))
        });
        let (n_w, n_a) = if weights_on_x {
            (halves[0].x_len(), halves[0].y_len())
        } else {
            (halves[0].y_len(), halves[0].x_len())
        };
        Ok(ChoiceSim {
            lanes: halves[0].lanes(),
            halves,
            split,
            weights_on_x,
            w_fmt: OperandFormat::new(choice.w_b, choice.signedness),
            a_fmt: OperandFormat::new(choice.a_b, choice.signedness),
            n_w,
            n_a,
        })
    }

    /// Accumulate `times * weights (*) activations` over the terms through the
    /// packed datapath; lanes land in `out`.
    pub(crate) fn run(&self, terms: &[(&[i64], &[i64], u64)], out: &mut [i64], checked: bool) -> Result<()> {
        let orient = |w: &'_ [i64], a: &'_ [i64]| -> (Vec<i64>, Vec<i64>) {
            if self.weights_on_x {
                (w.to_vec(), a.to_vec())
            } else {
                (a.to_vec(), w.to_vec())
            }
        };
        let exec = |engine: &Engine, owned: &[(Vec<i64>, Vec<i64>, u64)], out: &mut [i64]| {
            let refs: Vec<(&[i64], &[i64], u64)> =
                owned.iter().map(|(x, y, t)| (x.as_slice(), y.as_slice(), *t)).collect();
            if checked {
                engine.run(&refs, out)
            } else {
                engine.run_unchecked(&refs, out)
            }
        };
        match self.split {
            None if !self.weights_on_x || checked => {
                let owned: Vec<_> = terms
                    .iter()
                    .map(|&(w, a, t)| {
                        let (x, y) = orient(w, a);
                        (x, y, t)
                    })
                    .collect();
                exec(&self.halves[0], &owned, out)
            }
            None => self.halves[0].run_unchecked(terms, out),
            Some((role, low_bits)) => {
                let mut hi_terms = Vec::with_capacity(terms.len());
                let mut lo_terms = Vec::with_capacity(terms.len());
                for &(w, a, t) in terms {
                    let split =
                        |v: &[i64]| -> (Vec<i64>, Vec<i64>) { v.iter().map(|&x| split_value(x, low_bits)).unzip() };
                    match role {
                        OperandRole::Weight => {
                            let (h, l) = split(w);
                            let (x, y) = orient(&h, a);
                            hi_terms.push((x, y, t));
                            let (x, y) = orient(&l, a);
                            lo_terms.push((x, y, t));
                        }
                        OperandRole::Activation => {
                            let (h, l) = split(a);
                            let (x, y) = orient(w, &h);
                            hi_terms.push((x, y, t));
                            let (x, y) = orient(w, &l);
                            lo_terms.push((x, y, t));
                        }
                    }
                }
                let mut lo = vec![0i64; self.lanes];
                exec(&self.halves[0], &hi_terms, out)?;
                exec(&self.halves[1], &lo_terms, &mut lo)?;
                for (o, l) in out.iter_mut().zip(lo) {
                    *o = (*o << low_bits) + l;
                }
                Ok(())
            }
        }
    }

    /// Full 1-D convolution of each row's filter with its sequence, summed
    /// over rows, via the `ceil(K/k_p) x ceil(N/n_p)` sub-task schedule.
    /// Rows of one sub-task are accumulated in the packed domain.
    pub(crate) fn run_schedule(&self, rows: &[(&[i64], &[i64])], checked: bool) -> Result<Vec<i64>> {
        let (k, n) = (rows[0].0.len(), rows[0].1.len());
        let (k_p, n_p) = (self.n_w, self.n_a);
        let mut out = vec![0i64; k + n - 1];
        let mut lanes = vec![0i64; self.lanes];
        let chunk = |v: &[i64], start: usize, len: usize| -> Vec<i64> {
            (start..start + len).map(|i| v.get(i).copied().unwrap_or(0)).collect()
        };
        // filter-chunk outer, sequence-chunk inner
        for kk in (0..k).step_by(k_p) {
            for nn in (0..n).step_by(n_p) {
                let owned: Vec<(Vec<i64>, Vec<i64>)> = rows
                    .iter()
                    .map(|(f, s)| (chunk(f, kk, k_p), chunk(s, nn, n_p)))
                    .collect();
                let terms: Vec<(&[i64], &[i64], u64)> =
                    owned.iter().map(|(f, s)| (f.as_slice(), s.as_slice(), 1)).collect();
                self.run(&terms, &mut lanes, checked)?;
                for (t, &v) in lanes.iter().enumerate() {
                    if let Some(slot) = out.get_mut(kk + nn + t) {
                        *slot += v;
                    } else {
                        debug_assert_eq!(v, 0);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn filter_choice(config: &FilterPackingConfig, signedness: Signedness, profile: &DspProfile) -> PackingChoice {
    PackingChoice::new(
        PackingConfig::Filter(*config),
        None,
        config.w_b,
        config.a_b,
        signedness,
        config.k_p,
        crate::table::SeqLen::Generic,
        profile,
    )
}

fn check_budget(
    requested: usize,
    config: &PackingConfig,
    w: u32,
    a: u32,
    s: Signedness,
    profile: &DspProfile,
) -> Result<()> {
    let budget = 1u64 << accumulation_exponent(config, None, w, a, s, profile).min(63);
    if requested as u64 > budget {
        return Err(Error::AccumulationBudget {
            requested: requested as u64,
            budget,
        });
    }
    Ok(())
}

/// One kernel-packed multiply: lanes hold `d[i] * e[j]` at index `i + j * n_d`.
pub fn simulate_kernel(
    config: &KernelPackingConfig,
    d: &[i64],
    e: &[i64],
    signedness: Signedness,
    profile: &DspProfile,
) -> Result<DecodedLanes> {
    simulate_kernel_acc(config, &[(d.to_vec(), e.to_vec())], signedness, profile)
}

/// Kernel-packed multiply-accumulate over several operand sets, decoded
/// once. The number of terms must stay within the accumulation budget.
pub fn simulate_kernel_acc(
    config: &KernelPackingConfig,
    terms: &[(Vec<i64>, Vec<i64>)],
    signedness: Signedness,
    profile: &DspProfile,
) -> Result<DecodedLanes> {
    let pc = PackingConfig::Kernel(*config);
    let (w, a) = config.operand_bits();
    check_budget(terms.len(), &pc, w, a, signedness, profile)?;
    let engine = Engine::new(
        &pc,
        OperandFormat::new(config.d_b, signedness),
        OperandFormat::new(config.e_b, signedness),
        profile,
    )?;
    let refs: Vec<(&[i64], &[i64], u64)> = terms.iter().map(|(d, e)| (d.as_slice(), e.as_slice(), 1)).collect();
    let mut values = vec![0i64; engine.lanes()];
    engine.run(&refs, &mut values)?;
    Ok(DecodedLanes {
        values,
        overlap_corrected: config.overpacked,
    })
}

/// Full convolution `f * s` (length `K + N - 1`) via filter packing.
pub fn simulate_filter(
    config: &FilterPackingConfig,
    f: &[i64],
    s: &[i64],
    signedness: Signedness,
    profile: &DspProfile,
) -> Result<DecodedLanes> {
    simulate_filter_rows(config, &[(f.to_vec(), s.to_vec())], signedness, profile)
}

/// Sum of the row convolutions, each sub-task word accumulated across rows
/// before decoding. Every row needs the same filter and sequence length.
pub fn simulate_filter_rows(
    config: &FilterPackingConfig,
    rows: &[(Vec<i64>, Vec<i64>)],
    signedness: Signedness,
    profile: &DspProfile,
) -> Result<DecodedLanes> {
    let pc = PackingConfig::Filter(*config);
    check_budget(rows.len(), &pc, config.w_b, config.a_b, signedness, profile)?;
    let (k, n) = rows
        .first()
        .map(|(f, s)| (f.len(), s.len()))
        .ok_or_else(|| Error::InvalidConfig("no rows".into()))?;
    if k == 0 || n == 0 || rows.iter().any(|(f, s)| f.len() != k || s.len() != n) {
        return Err(Error::InvalidConfig(
            "rows need equal, non-empty filter and sequence lengths".into(),
        ));
    }
    let sim = ChoiceSim::new(&filter_choice(config, signedness, profile), profile)?;
    let refs: Vec<(&[i64], &[i64])> = rows.iter().map(|(f, s)| (f.as_slice(), s.as_slice())).collect();
    Ok(DecodedLanes {
        values: sim.run_schedule(&refs, true)?,
        overlap_corrected: config.overpacked,
    })
}

/// One wide multiply (two when separated) for a full choice. `weights` and
/// `activations` fill the choice's weight and activation slots.
pub fn simulate_choice(
    choice: &PackingChoice,
    weights: &[i64],
    activations: &[i64],
    profile: &DspProfile,
) -> Result<DecodedLanes> {
    let sim = ChoiceSim::new(choice, profile)?;
    for (v, fmt) in weights
        .iter()
        .map(|v| (v, sim.w_fmt))
        .chain(activations.iter().map(|v| (v, sim.a_fmt)))
    {
        if !fmt.contains(*v) {
            return Err(Error::OperandOutOfRange {
                value: *v,
                bits: fmt.bits,
                signedness: fmt.signedness.label(),
            });
        }
    }
    let mut values = vec![0i64; sim.lanes];
    sim.run(&[(weights, activations, 1)], &mut values, true)?;
    Ok(DecodedLanes {
        values,
        overlap_corrected: choice.overpacked(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> DspProfile {
        DspProfile::dsp48e2()
    }

    fn kcfg(d_b: u32, e_b: u32, g_b: i32, n_d: u32, n_e: u32) -> KernelPackingConfig {
        KernelPackingConfig {
            d_b,
            e_b,
            g_b,
            n_d,
            n_e,
            overpacked: g_b < 0,
            port_swap: false,
            d_operand: OperandRole::Weight,
        }
    }

    fn fcfg(w_b: u32, a_b: u32, g_b: i32, k_p: u32, n_p: u32) -> FilterPackingConfig {
        FilterPackingConfig {
            w_b,
            a_b,
            g_b,
            k_p,
            n_p,
            filter_on_large_port: false,
            overpacked: false,
        }
    }

    #[test]
    fn kernel_quad_example() {
        let out = simulate_kernel(&kcfg(4, 4, 0, 2, 2), &[3, 5], &[7, 9], Signedness::Unsigned, &p()).unwrap();
        assert_eq!(out.values, vec![21, 35, 27, 45]);
    }

    #[test]
    fn kernel_zero_and_identity() {
        let out = simulate_kernel(&kcfg(4, 4, 0, 2, 2), &[0, 0], &[11, 6], Signedness::Unsigned, &p()).unwrap();
        assert_eq!(out.values, vec![0; 4]);
        let out = simulate_kernel(&kcfg(4, 4, 0, 1, 1), &[1], &[1], Signedness::Unsigned, &p()).unwrap();
        assert_eq!(out.values, vec![1]);
    }

    #[test]
    fn filter_examples() {
        let out = simulate_filter(
            &fcfg(2, 2, 2, 3, 4),
            &[1, 1, 1],
            &[1, 1, 1, 1],
            Signedness::Unsigned,
            &p(),
        )
        .unwrap();
        assert_eq!(out.values, vec![1, 2, 3, 3, 2, 1]);
        let out = simulate_filter(
            &fcfg(2, 2, 2, 3, 4),
            &[0, 0, 0],
            &[3, 1, 2, 3],
            Signedness::Unsigned,
            &p(),
        )
        .unwrap();
        assert_eq!(out.values, vec![0; 6]);
        let out = simulate_filter(&fcfg(2, 2, 1, 2, 1), &[2, 1], &[3], Signedness::Unsigned, &p()).unwrap();
        assert_eq!(out.values, vec![6, 3]);
    }

    #[test]
    fn filter_schedule_handles_ragged_tails() {
        // 5-tap filter, 7-long sequence over 2 x 3 sub-tasks
        let f = [1, 3, 0, 2, 3];
        let s = [2, 1, 3, 3, 0, 1, 2];
        let mut expect = vec![0i64; 11];
        for (i, &fi) in f.iter().enumerate() {
            for (j, &sj) in s.iter().enumerate() {
                expect[i + j] += fi * sj;
            }
        }
        let out = simulate_filter(&fcfg(2, 2, 2, 2, 3), &f, &s, Signedness::Unsigned, &p()).unwrap();
        assert_eq!(out.values, expect);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(simulate_kernel(&kcfg(4, 4, 0, 2, 2), &[16, 0], &[1, 1], Signedness::Unsigned, &p()).is_err());
        assert!(simulate_kernel(&kcfg(4, 4, 0, 2, 2), &[1], &[1, 1], Signedness::Unsigned, &p()).is_err());
        // invalid layout: 3 lanes of 8 bits on the 18-bit port
        assert!(simulate_kernel(&kcfg(4, 4, 0, 3, 1), &[1, 1, 1], &[1], Signedness::Unsigned, &p()).is_err());
    }

    #[test]
    fn accumulation_budget_enforced() {
        // g_b = 1: two accumulated products fit, three do not
        let c = kcfg(4, 4, 1, 2, 1);
        let term = (vec![15, 15], vec![15]);
        let two = simulate_kernel_acc(&c, &[term.clone(), term.clone()], Signedness::Unsigned, &p()).unwrap();
        assert_eq!(two.values, vec![450, 450]);
        let three = simulate_kernel_acc(&c, &[term.clone(), term.clone(), term], Signedness::Unsigned, &p());
        assert!(matches!(
            three,
            Err(Error::AccumulationBudget {
                requested: 3,
                budget: 2
            })
        ));
    }

    #[test]
    fn overflow_past_budget_corrupts_lanes() {
        // the unchecked path shows why the budget exists: 2 * 225 overflows 8 bits
        let c = PackingConfig::Kernel(kcfg(4, 4, 0, 2, 1));
        let e = Engine::new(
            &c,
            OperandFormat::new(4, Signedness::Unsigned),
            OperandFormat::new(4, Signedness::Unsigned),
            &p(),
        )
        .unwrap();
        let mut out = [0i64; 2];
        e.run_unchecked(&[(&[15, 15], &[15], 2)], &mut out).unwrap();
        assert_ne!(out.to_vec(), vec![450, 450]);
    }

    #[test]
    fn filter_rows_accumulate_in_packed_domain() {
        let c = fcfg(2, 2, 4, 3, 4); // guard surplus 2 -> 4 rows
        let rows: Vec<(Vec<i64>, Vec<i64>)> = vec![
            (vec![3, 3, 3], vec![3, 3, 3, 3]),
            (vec![3, 2, 1], vec![1, 2, 3, 3]),
            (vec![3, 3, 3], vec![3, 3, 3, 3]),
            (vec![0, 1, 3], vec![3, 3, 0, 3]),
        ];
        let mut expect = vec![0i64; 6];
        for (f, s) in &rows {
            for (i, fi) in f.iter().enumerate() {
                for (j, sj) in s.iter().enumerate() {
                    expect[i + j] += fi * sj;
                }
            }
        }
        let out = simulate_filter_rows(&c, &rows, Signedness::Unsigned, &p()).unwrap();
        assert_eq!(out.values, expect);
        let mut five = rows.clone();
        five.push(rows[0].clone());
        assert!(matches!(
            simulate_filter_rows(&c, &five, Signedness::Unsigned, &p()),
            Err(Error::AccumulationBudget {
                requested: 5,
                budget: 4
            })
        ));
    }
}

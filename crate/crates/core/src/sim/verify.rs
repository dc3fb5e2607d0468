use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::ChoiceSim;
use crate::error::Result;
use crate::exec::{fold_chunks, Execution};
use crate::packing::{OperandFormat, OperandRole, PackingChoice, PackingConfig};
use crate::profile::DspProfile;
use crate::table::SeqLen;

pub const DEFAULT_SEED: u64 = 0x6d69_7870_6163_6b00;

const CHUNK: u64 = 1 << 13;
const ACC_RANDOM_TRIALS: u64 = 2_000;
const SCHEDULE_TRIALS: u64 = 2_000;
const MAX_EXTREMAL_OPERANDS: usize = 14;
/// Distinct accumulated terms per random accumulation trial; the rest of the
/// budget rides on the last term's multiplicity.
const DISTINCT_TERMS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplePolicy {
    /// Exhaustive when one multiply's operand bits total at most this.
    pub exhaustive_bits: u32,
    /// Random trials otherwise.
    pub samples: u64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for SamplePolicy {
    fn default() -> Self {
        SamplePolicy {
            exhaustive_bits: 20,
            samples: 100_000,
            seed: DEFAULT_SEED,
            exec: Execution::Parallel,
        }
    }
}

/// Convolution context for checking the filter sub-task schedule: `rows`
/// row-convolutions of length `k` over a sequence of `seq` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleContext {
    pub rows: u32,
    pub k: u32,
    pub seq: SeqLen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub phase: String,
    /// Weight and activation vectors of each accumulated term (or row).
    pub weights: Vec<Vec<i64>>,
    pub activations: Vec<Vec<i64>>,
    /// Multiplicity of the last term.
    pub times: u64,
    pub expected: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub got: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub choice: PackingChoice,
    pub mode: VerificationMode,
    pub trials: u64,
    pub mismatches: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    pub accumulation_budget: u64,
    pub accumulation_trials: u64,
    pub schedule_trials: u64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Reference lanes computed straight from the strategy definitions.
fn oracle(choice: &PackingChoice, terms: &[(&[i64], &[i64], u64)]) -> Vec<i64> {
    let mut out = vec![0i64; choice.config.lanes() as usize];
    for &(w, a, times) in terms {
        let t = times as i64;
        match &choice.config {
            PackingConfig::Kernel(c) => {
                let (d, e) = match c.d_operand {
                    OperandRole::Weight => (w, a),
                    OperandRole::Activation => (a, w),
                };
                for (i, &di) in d.iter().enumerate() {
                    for (j, &ej) in e.iter().enumerate() {
                        out[i + j * c.n_d as usize] += di * ej * t;
                    }
                }
            }
            PackingConfig::Filter(_) => {
                for (i, &wi) in w.iter().enumerate() {
                    for (j, &aj) in a.iter().enumerate() {
                        out[i + j] += wi * aj * t;
                    }
                }
            }
        }
    }
    out
}

fn convolution_oracle(rows: &[(Vec<i64>, Vec<i64>)]) -> Vec<i64> {
    let (k, n) = (rows[0].0.len(), rows[0].1.len());
    let mut out = vec![0i64; k + n - 1];
    for (f, s) in rows {
        for (i, &fi) in f.iter().enumerate() {
            for (j, &sj) in s.iter().enumerate() {
                out[i + j] += fi * sj;
            }
        }
    }
    out
}

#[derive(Debug, Default)]
struct Tally {
    trials: u64,
    mismatches: u64,
    first: Option<(u64, Counterexample)>,
}

impl Tally {
    fn record(&mut self, idx: u64, cx: impl FnOnce() -> Counterexample) {
        self.mismatches += 1;
        if self.first.as_ref().is_none_or(|(i, _)| idx < *i) {
            self.first = Some((idx, cx()));
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.mismatches += other.mismatches;
        if let Some((i, cx)) = other.first {
            if self.first.as_ref().is_none_or(|(j, _)| i < *j) {
                self.first = Some((i, cx));
            }
        }
        self
    }
}

fn check_terms(
    sim: &ChoiceSim,
    choice: &PackingChoice,
    phase: &str,
    terms: &[(&[i64], &[i64], u64)],
    idx: u64,
    tally: &mut Tally,
    buf: &mut [i64],
) {
    tally.trials += 1;
    let expected = oracle(choice, terms);
    let res = sim.run(terms, buf, false);
    if res.is_err() || buf != expected.as_slice() {
        tally.record(idx, || Counterexample {
            phase: phase.into(),
            weights: terms.iter().map(|t| t.0.to_vec()).collect(),
            activations: terms.iter().map(|t| t.1.to_vec()).collect(),
            times: terms.last().map_or(1, |t| t.2),
            expected,
            got: res.is_ok().then(|| buf.to_vec()),
            error: res.err().map(|e| e.to_string()),
        });
    }
}

fn draw(rng: &mut ChaCha8Rng, fmt: OperandFormat, out: &mut [i64]) {
    for v in out {
        *v = rng.random_range(fmt.min()..=fmt.max());
    }
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Check a choice bit-exactly against the reference products: every single
/// multiply (exhaustively when small enough), accumulation at the full
/// budget, and for filter packing the sub-task schedule of `schedule`.
pub fn verify_choice(
    choice: &PackingChoice,
    profile: &DspProfile,
    policy: &SamplePolicy,
    schedule: Option<&ScheduleContext>,
) -> Result<VerificationReport> {
    let sim = ChoiceSim::new(choice, profile)?;
    let (nw, na) = (sim.n_w, sim.n_a);
    let (wf, af) = (sim.w_fmt, sim.a_fmt);
    let bits = choice.operand_bits_total();
    let exhaustive = bits <= policy.exhaustive_bits && bits < 63;
    let lanes = sim.lanes;

    // single multiplies
    let single = if exhaustive {
        let wmask = (1u64 << wf.bits) - 1;
        let amask = (1u64 << af.bits) - 1;
        fold_chunks(
            policy.exec,
            0..1u64 << bits,
            CHUNK,
            |_, range| {
                let mut tally = Tally::default();
                let (mut w, mut a, mut buf) = (vec![0i64; nw], vec![0i64; na], vec![0i64; lanes]);
                for idx in range {
                    let mut rest = idx;
                    for v in w.iter_mut() {
                        *v = wf.nth(rest & wmask);
                        rest >>= wf.bits;
                    }
                    for v in a.iter_mut() {
                        *v = af.nth(rest & amask);
                        rest >>= af.bits;
                    }
                    check_terms(&sim, choice, "single", &[(&w, &a, 1)], idx, &mut tally, &mut buf);
                }
                tally
            },
            Tally::merge,
        )
    } else {
        fold_chunks(
            policy.exec,
            0..policy.samples,
            CHUNK,
            |chunk, range| {
                let mut tally = Tally::default();
                let mut rng = chunk_rng(policy.seed, chunk);
                let (mut w, mut a, mut buf) = (vec![0i64; nw], vec![0i64; na], vec![0i64; lanes]);
                for idx in range {
                    draw(&mut rng, wf, &mut w);
                    draw(&mut rng, af, &mut a);
                    check_terms(&sim, choice, "single", &[(&w, &a, 1)], idx, &mut tally, &mut buf);
                }
                tally
            },
            Tally::merge,
        )
    }
    .unwrap_or_default();

    let budget = choice.accumulation_budget();
    let acc = if budget > 1 {
        accumulation_phase(&sim, choice, policy, budget)
    } else {
        Tally::default()
    };
    let sched = match (&choice.config, schedule) {
        (PackingConfig::Filter(_), Some(ctx)) => schedule_phase(&sim, policy, ctx, budget),
        _ => Tally::default(),
    };

    let counterexample = [&single, &acc, &sched]
        .into_iter()
        .find_map(|t| t.first.as_ref().map(|(_, cx)| cx.clone()));
    Ok(VerificationReport {
        choice: choice.clone(),
        mode: if exhaustive {
            VerificationMode::Exhaustive
        } else {
            VerificationMode::Sampled
        },
        trials: single.trials,
        mismatches: single.mismatches + acc.mismatches + sched.mismatches,
        counterexample,
        accumulation_budget: budget,
        accumulation_trials: acc.trials,
        schedule_trials: sched.trials,
    })
}

/// Sum `budget` products: every min/max operand pattern (or a random subset
/// of them) repeated `budget` times, then random mixes of distinct terms.
fn accumulation_phase(sim: &ChoiceSim, choice: &PackingChoice, policy: &SamplePolicy, budget: u64) -> Tally {
    let (nw, na) = (sim.n_w, sim.n_a);
    let (wf, af) = (sim.w_fmt, sim.a_fmt);
    let slots = nw + na;
    let extremal = if slots <= MAX_EXTREMAL_OPERANDS {
        1u64 << slots
    } else {
        1u64 << MAX_EXTREMAL_OPERANDS
    };
    let pick = |fmt: OperandFormat, bit: u64| if bit == 1 { fmt.max() } else { fmt.min() };
    let total = extremal + ACC_RANDOM_TRIALS;
    fold_chunks(
        policy.exec,
        0..total,
        CHUNK,
        |chunk, range| {
            let mut tally = Tally::default();
            let mut rng = chunk_rng(policy.seed ^ 0xacc, chunk);
            let mut buf = vec![0i64; sim.lanes];
            for idx in range {
                if idx < extremal {
                    let pattern = if slots <= MAX_EXTREMAL_OPERANDS {
                        idx
                    } else {
                        rng.random::<u64>()
                    };
                    let w: Vec<i64> = (0..nw).map(|i| pick(wf, pattern >> i & 1)).collect();
                    let a: Vec<i64> = (0..na).map(|j| pick(af, pattern >> (nw + j) & 1)).collect();
                    check_terms(
                        sim,
                        choice,
                        "accumulation",
                        &[(&w, &a, budget)],
                        idx,
                        &mut tally,
                        &mut buf,
                    );
                } else {
                    let distinct = DISTINCT_TERMS.min(budget) as usize;
                    let owned: Vec<(Vec<i64>, Vec<i64>)> = (0..distinct)
                        .map(|_| {
                            let (mut w, mut a) = (vec![0i64; nw], vec![0i64; na]);
                            draw(&mut rng, wf, &mut w);
                            draw(&mut rng, af, &mut a);
                            (w, a)
                        })
                        .collect();
                    let last = budget - distinct as u64 + 1;
                    let terms: Vec<(&[i64], &[i64], u64)> = owned
                        .iter()
                        .enumerate()
                        .map(|(t, (w, a))| (w.as_slice(), a.as_slice(), if t + 1 == distinct { last } else { 1 }))
                        .collect();
                    check_terms(sim, choice, "accumulation", &terms, idx, &mut tally, &mut buf);
                }
            }
            tally
        },
        Tally::merge,
    )
    .unwrap_or_default()
}

/// Full `rows x k` filter over a sequence, run through the packed sub-task
/// schedule. Rows sharing one word are capped by the accumulation budget.
fn schedule_phase(sim: &ChoiceSim, policy: &SamplePolicy, ctx: &ScheduleContext, budget: u64) -> Tally {
    let k = ctx.k.max(1) as usize;
    let n = match ctx.seq {
        SeqLen::Explicit(n) => n.max(1) as usize,
        // a ragged tail on top of two full chunks
        SeqLen::Generic => 2 * sim.n_a + 1,
    };
    let rows = (ctx.rows.max(1) as u64).min(budget) as usize;
    let (wf, af) = (sim.w_fmt, sim.a_fmt);
    fold_chunks(
        policy.exec,
        0..SCHEDULE_TRIALS,
        CHUNK,
        |chunk, range| {
            let mut tally = Tally::default();
            let mut rng = chunk_rng(policy.seed ^ 0x5ced, chunk);
            for idx in range {
                let owned: Vec<(Vec<i64>, Vec<i64>)> = (0..rows)
                    .map(|_| {
                        let (mut f, mut s) = (vec![0i64; k], vec![0i64; n]);
                        if idx == 0 {
                            f.fill(wf.max());
                            s.fill(af.max());
                        } else if idx == 1 {
                            f.fill(wf.min());
                            s.fill(af.min());
                        } else {
                            draw(&mut rng, wf, &mut f);
                            draw(&mut rng, af, &mut s);
                        }
                        (f, s)
                    })
                    .collect();
                tally.trials += 1;
                let refs: Vec<(&[i64], &[i64])> = owned.iter().map(|(f, s)| (f.as_slice(), s.as_slice())).collect();
                let expected = convolution_oracle(&owned);
                let got = sim.run_schedule(&refs, false);
                if got.as_ref().map_or(true, |g| *g != expected) {
                    tally.record(idx, || Counterexample {
                        phase: "schedule".into(),
                        weights: owned.iter().map(|r| r.0.clone()).collect(),
                        activations: owned.iter().map(|r| r.1.clone()).collect(),
                        times: 1,
                        expected,
                        got: got.as_ref().ok().cloned(),
                        error: got.as_ref().err().map(|e| e.to_string()),
                    });
                }
            }
            tally
        },
        Tally::merge,
    )
    .unwrap_or_default()
}

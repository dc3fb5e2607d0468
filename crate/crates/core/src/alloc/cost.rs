use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::regression::{fit_ridge, RidgeModel, RidgeOptions};
use crate::error::{Error, Result};
use crate::network::BitPair;

pub const MODEL_VERSION: u32 = 1;
pub const FEATURE_MAP_ID: &str = "stage-v1";
/// Regression inputs, in column order. An intercept is always fitted.
pub const FEATURES: [&str; 7] = ["pf_dsp", "pf_lut", "w_b", "a_b", "w_b_a_b", "op_mul", "kernel_area"];
pub const TARGETS: [&str; 3] = ["r_dsp", "r_lut", "t_wns"];

/// One pipeline stage's hardware configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageConfig {
    pub pf_dsp: u32,
    /// LUT-built lanes replacing DSP lanes; 0 when disabled.
    pub pf_lut: u32,
    pub bits: BitPair,
    pub op_mul: u64,
    pub kernel_area: u32,
}

impl StageConfig {
    pub fn features(&self) -> [f64; 7] {
        let (w, a) = (self.bits.w_b as f64, self.bits.a_b as f64);
        [
            self.pf_dsp as f64,
            self.pf_lut as f64,
            w,
            a,
            w * a,
            self.op_mul as f64,
            self.kernel_area as f64,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEstimate {
    pub r_dsp: u64,
    pub r_lut: u64,
    /// Nanoseconds; must be positive for timing closure.
    pub t_wns: f64,
}

/// One synthesised (or generated) stage observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub pf_dsp: u32,
    pub pf_lut: u32,
    pub w_b: u32,
    pub a_b: u32,
    pub w_b_a_b: u32,
    pub op_mul: u64,
    pub kernel_area: u32,
    pub r_dsp: f64,
    pub r_lut: f64,
    pub t_wns: f64,
}

impl Sample {
    pub fn config(&self) -> StageConfig {
        StageConfig {
            pf_dsp: self.pf_dsp,
            pf_lut: self.pf_lut,
            bits: BitPair::new(self.w_b, self.a_b),
            op_mul: self.op_mul,
            kernel_area: self.kernel_area,
        }
    }
}

fn header() -> Vec<&'static str> {
    FEATURES.iter().chain(TARGETS.iter()).copied().collect()
}

pub fn write_samples(samples: &[Sample]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(s)?;
    }
    if samples.is_empty() {
        w.write_record(header())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn read_samples(text: &str) -> Result<Vec<Sample>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header() {
        return Err(Error::Schema(format!(
            "sample header must be `{}`, found `{}`",
            header().join(","),
            found.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<Sample>().enumerate() {
        let s = row?;
        if s.w_b_a_b != s.w_b * s.a_b {
            return Err(Error::Schema(format!("row {}: w_b_a_b must equal w_b * a_b", i + 1)));
        }
        if ![s.r_dsp, s.r_lut, s.t_wns].iter().all(|v| v.is_finite()) {
            return Err(Error::Schema(format!("row {}: non-finite target", i + 1)));
        }
        out.push(s);
    }
    Ok(out)
}

/// Separate regressions for DSP count, LUT count and worst slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub version: u32,
    pub feature_map_id: String,
    pub features: Vec<String>,
    pub r_dsp: RidgeModel,
    pub r_lut: RidgeModel,
    pub t_wns: RidgeModel,
}

impl CostModel {
    pub fn from_parts(r_dsp: RidgeModel, r_lut: RidgeModel, t_wns: RidgeModel) -> Self {
        CostModel {
            version: MODEL_VERSION,
            feature_map_id: FEATURE_MAP_ID.into(),
            features: FEATURES.iter().map(|s| s.to_string()).collect(),
            r_dsp,
            r_lut,
            t_wns,
        }
    }

    pub fn fit(samples: &[Sample], opts: &RidgeOptions) -> Result<Self> {
        let x: Vec<Vec<f64>> = samples.iter().map(|s| s.config().features().to_vec()).collect();
        let target = |f: fn(&Sample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
        Ok(Self::from_parts(
            fit_ridge(&x, &target(|s| s.r_dsp), opts)?,
            fit_ridge(&x, &target(|s| s.r_lut), opts)?,
            fit_ridge(&x, &target(|s| s.t_wns), opts)?,
        ))
    }

    /// Resources are clamped at zero and rounded up; a tolerance of 1e-9
    /// absorbs float noise in exactly integral predictions.
    pub fn predict(&self, config: &StageConfig) -> StageEstimate {
        let x = config.features();
        let count = |m: &RidgeModel| {
            let v = m.predict(&x);
            (v - 1e-9).ceil().max(0.0) as u64
        };
        StageEstimate {
            r_dsp: count(&self.r_dsp),
            r_lut: count(&self.r_lut),
            t_wns: self.t_wns.predict(&x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Schema(format!("unsupported model version {}", self.version)));
        }
        if self.feature_map_id != FEATURE_MAP_ID || self.features != FEATURES {
            return Err(Error::Schema(format!(
                "model uses feature map `{}`, expected `{FEATURE_MAP_ID}`",
                self.feature_map_id
            )));
        }
        for m in [&self.r_dsp, &self.r_lut, &self.t_wns] {
            m.validate()?;
            if m.coefficients.len() != FEATURES.len() {
                return Err(Error::Schema("coefficient count does not match the feature map".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: CostModel = serde_json::from_str(text).map_err(|e| Error::Schema(format!("cost model: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearTarget {
    pub intercept: f64,
    /// Keyed by feature name; missing features weigh 0.
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise_std: f64,
}

impl LinearTarget {
    fn weights(&self) -> Result<[f64; 7]> {
        let mut w = [0.0; 7];
        for (name, &c) in &self.coefficients {
            let idx = FEATURES
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::Schema(format!("unknown feature `{name}` in generator")))?;
            w[idx] = c;
        }
        Ok(w)
    }

    pub fn eval(&self, x: &[f64; 7]) -> Result<f64> {
        Ok(self.intercept + self.weights()?.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub samples: u32,
    /// Inclusive ranges drawn uniformly.
    pub pf_dsp: [u32; 2],
    pub pf_lut: [u32; 2],
    pub bits: [u32; 2],
    pub op_mul: [u64; 2],
    pub kernel_areas: Vec<u32>,
    pub r_dsp: LinearTarget,
    pub r_lut: LinearTarget,
    pub t_wns: LinearTarget,
}

impl GeneratorSpec {
    /// Slack falls linearly with lane count and reaches zero at
    /// `pf_dsp + pf_lut / 2 = 300`.
    pub fn example() -> Self {
        let lin = |intercept: f64, terms: &[(&str, f64)], noise_std: f64| LinearTarget {
            intercept,
            coefficients: terms.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            noise_std,
        };
        GeneratorSpec {
            samples: 200,
            pf_dsp: [1, 512],
            pf_lut: [0, 64],
            bits: [2, 8],
            op_mul: [10_000, 2_000_000],
            kernel_areas: vec![1, 9],
            r_dsp: lin(4.0, &[("pf_dsp", 1.0), ("w_b_a_b", 0.25)], 0.0),
            r_lut: lin(300.0, &[("pf_dsp", 12.0), ("pf_lut", 90.0), ("w_b_a_b", 4.0)], 0.0),
            t_wns: lin(1.5, &[("pf_dsp", -0.005), ("pf_lut", -0.0025)], 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [self.pf_dsp, self.pf_lut, self.bits];
        if ranges.iter().any(|r| r[0] > r[1]) || self.op_mul[0] > self.op_mul[1] {
            return Err(Error::Schema("generator range with min > max".into()));
        }
        if self.bits[0] == 0 || self.op_mul[0] == 0 || self.kernel_areas.is_empty() || self.kernel_areas.contains(&0) {
            return Err(Error::Schema(
                "generator widths, op counts and kernel areas must be positive".into(),
            ));
        }
        for t in [&self.r_dsp, &self.r_lut, &self.t_wns] {
            t.weights()?;
            if !(t.noise_std >= 0.0 && t.noise_std.is_finite()) {
                return Err(Error::Schema("noise_std must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: GeneratorSpec = serde_json::from_str(text).map_err(|e| Error::Schema(format!("generator: {e}")))?;
        g.validate()?;
        Ok(g)
    }
}

/// Reproducible linear-plus-Gaussian-noise samples.
pub fn synth_samples(spec: &GeneratorSpec, seed: u64) -> Result<Vec<Sample>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |std: f64| Normal::new(0.0, std).map_err(|e| Error::Schema(e.to_string()));
    let (nd, nl, nw) = (
        noise(spec.r_dsp.noise_std)?,
        noise(spec.r_lut.noise_std)?,
        noise(spec.t_wns.noise_std)?,
    );
    (0..spec.samples)
        .map(|_| {
            let config = StageConfig {
                pf_dsp: rng.random_range(spec.pf_dsp[0]..=spec.pf_dsp[1]),
                pf_lut: rng.random_range(spec.pf_lut[0]..=spec.pf_lut[1]),
                bits: BitPair::new(
                    rng.random_range(spec.bits[0]..=spec.bits[1]),
                    rng.random_range(spec.bits[0]..=spec.bits[1]),
                ),
                op_mul: rng.random_range(spec.op_mul[0]..=spec.op_mul[1]),
                kernel_area: spec.kernel_areas[rng.random_range(0..spec.kernel_areas.len())],
            };
            let x = config.features();
            let r_dsp = spec.r_dsp.eval(&x)? + nd.sample(&mut rng);
            let r_lut = spec.r_lut.eval(&x)? + nl.sample(&mut rng);
            let t_wns = spec.t_wns.eval(&x)? + nw.sample(&mut rng);
            Ok(Sample {
                pf_dsp: config.pf_dsp,
                pf_lut: config.pf_lut,
                w_b: config.bits.w_b,
                a_b: config.bits.a_b,
                w_b_a_b: config.bits.w_b * config.bits.a_b,
                op_mul: config.op_mul,
                kernel_area: config.kernel_area,
                r_dsp,
                r_lut,
                t_wns,
            })
        })
        .collect()
}

//! Layer shapes, multiplication counts, bit-width assignments, and total
//! DSP operations under a set of lookup tables.

use std::collections::{BTreeMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::Throughput;
use crate::table::{KernelShape, LookupTable};

pub const NETWORK_VERSION: u32 = 1;

/// Exact operation counts.
pub type OpCount = Ratio<u128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Conv,
    DepthwiseConv,
    PointwiseConv,
    FullyConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitPair {
    pub w_b: u32,
    pub a_b: u32,
}

impl BitPair {
    pub fn new(w_b: u32, a_b: u32) -> Self {
        BitPair { w_b, a_b }
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    pub op_kind: OpKind,
    pub c_in: u32,
    pub c_out: u32,
    #[serde(default = "one")]
    pub k_h: u32,
    #[serde(default = "one")]
    pub k_w: u32,
    #[serde(default = "one")]
    pub h_out: u32,
    #[serde(default = "one")]
    pub w_out: u32,
    /// Defaults to 1, or to `c_in` for depthwise layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<u32>,
    /// Widths pinned regardless of the assignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_bits: Option<BitPair>,
}

impl LayerSpec {
    pub fn groups(&self) -> u32 {
        match (self.op_kind, self.groups) {
            (_, Some(g)) => g,
            (OpKind::DepthwiseConv, None) => self.c_in,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Network(format!("layer `{}`: {m}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Network("layer with an empty name".into()));
        }
        let dims = [
            self.c_in,
            self.c_out,
            self.k_h,
            self.k_w,
            self.h_out,
            self.w_out,
            self.groups(),
        ];
        if dims.contains(&0) {
            return bad("dimensions must be at least 1".into());
        }
        let g = self.groups();
        if !self.c_in.is_multiple_of(g) || !self.c_out.is_multiple_of(g) {
            return bad(format!(
                "groups {g} must divide c_in {} and c_out {}",
                self.c_in, self.c_out
            ));
        }
        match self.op_kind {
            OpKind::DepthwiseConv if g != self.c_in => bad(format!("depthwise needs groups = c_in, got {g}")),
            OpKind::PointwiseConv if (self.k_h, self.k_w) != (1, 1) => bad("pointwise needs a 1x1 kernel".into()),
            OpKind::FullyConnected if (self.k_h, self.k_w, self.h_out, self.w_out, g) != (1, 1, 1, 1, 1) => {
                bad("fully connected needs unit kernel, output and groups".into())
            }
            _ => Ok(()),
        }
    }

    /// Multiplications in one inference.
    pub fn op_mul(&self) -> u64 {
        let spatial = u64::from(self.h_out) * u64::from(self.w_out) * u64::from(self.k_h) * u64::from(self.k_w);
        spatial * u64::from(self.c_in) * u64::from(self.c_out) / u64::from(self.groups())
    }

    pub fn kernel_shape(&self) -> KernelShape {
        KernelShape::new(self.k_h, self.k_w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub version: u32,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let net = NetworkSpec {
            version: NETWORK_VERSION,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != NETWORK_VERSION {
            return Err(Error::Network(format!("unsupported network version {}", self.version)));
        }
        if self.layers.is_empty() {
            return Err(Error::Network("no layers".into()));
        }
        let mut seen = HashSet::new();
        for l in &self.layers {
            l.validate()?;
            if !seen.insert(l.name.as_str()) {
                return Err(Error::Network(format!("duplicate layer name `{}`", l.name)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: NetworkSpec = serde_json::from_str(text).map_err(|e| Error::Network(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes") + "\n"
    }

    pub fn total_op_mul(&self) -> u128 {
        self.layers.iter().map(|l| u128::from(l.op_mul())).sum()
    }
}

/// Per-layer widths keyed by layer name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitwidthAssignment(pub BTreeMap<String, BitPair>);

impl BitwidthAssignment {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Assignment(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assignment serializes") + "\n"
    }

    pub fn uniform(net: &NetworkSpec, bits: BitPair) -> Self {
        BitwidthAssignment(net.layers.iter().map(|l| (l.name.clone(), bits)).collect())
    }

    /// Widths per layer in network order. Frozen layers keep their pinned
    /// widths; an assignment that names them must agree.
    pub fn resolve(&self, net: &NetworkSpec) -> Result<Vec<BitPair>> {
        let names: HashSet<&str> = net.layers.iter().map(|l| l.name.as_str()).collect();
        if let Some(unknown) = self.0.keys().find(|k| !names.contains(k.as_str())) {
            return Err(Error::Assignment(format!("unknown layer `{unknown}`")));
        }
        net.layers
            .iter()
            .map(|l| {
                let given = self.0.get(&l.name).copied();
                let bits = match (l.frozen_bits, given) {
                    (Some(f), Some(g)) if f != g => {
                        return Err(Error::Assignment(format!(
                            "layer `{}` is frozen at ({}, {}) but assigned ({}, {})",
                            l.name, f.w_b, f.a_b, g.w_b, g.a_b
                        )))
                    }
                    (Some(f), _) => f,
                    (None, Some(g)) => g,
                    (None, None) => return Err(Error::Assignment(format!("no widths for layer `{}`", l.name))),
                };
                if bits.w_b == 0 || bits.a_b == 0 {
                    return Err(Error::Assignment(format!("layer `{}` has a zero width", l.name)));
                }
                Ok(bits)
            })
            .collect()
    }
}

/// Lookup tables keyed by kernel shape.
#[derive(Debug, Clone, Default)]
pub struct TableSet {
    tables: Vec<LookupTable>,
}

impl TableSet {
    pub fn new(tables: Vec<LookupTable>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &tables {
            if !seen.insert(t.kernel_shape) {
                return Err(Error::Schema(format!(
                    "two lookup tables for kernel {}",
                    t.kernel_shape
                )));
            }
        }
        Ok(TableSet { tables })
    }

    pub fn for_shape(&self, shape: KernelShape) -> Option<&LookupTable> {
        self.tables.iter().find(|t| t.kernel_shape == shape)
    }

    pub fn throughput(&self, shape: KernelShape, bits: BitPair) -> Result<Throughput> {
        let table = self
            .for_shape(shape)
            .ok_or_else(|| Error::MissingEntry(format!("kernel {shape} (no table)")))?;
        table
            .get(bits.w_b, bits.a_b)
            .map(|c| c.t_mul)
            .ok_or_else(|| Error::MissingEntry(format!("({}, {}) in the {shape} table", bits.w_b, bits.a_b)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u128,
    pub den: u128,
}

impl From<OpCount> for Fraction {
    fn from(r: OpCount) -> Self {
        Fraction {
            num: *r.numer(),
            den: *r.denom(),
        }
    }
}

impl From<Fraction> for OpCount {
    fn from(f: Fraction) -> Self {
        Ratio::new(f.num, f.den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOps {
    pub name: String,
    pub op_kind: OpKind,
    pub kernel_shape: KernelShape,
    pub bits: BitPair,
    pub op_mul: u64,
    pub t_mul: Fraction,
    pub op_dsp: Fraction,
}

impl LayerOps {
    pub fn op_dsp(&self) -> OpCount {
        self.op_dsp.into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpsReport {
    pub layers: Vec<LayerOps>,
    pub total_op_mul: u128,
    pub op_dsp: Fraction,
    /// `op_dsp` rounded for reading.
    pub op_dsp_approx: f64,
}

/// Per-layer terms `Op_mul / T_mul` and their exact sum.
pub fn op_dsp(net: &NetworkSpec, bits: &[BitPair], tables: &TableSet) -> Result<OpsReport> {
    if bits.len() != net.layers.len() {
        return Err(Error::Assignment(format!(
            "{} widths for {} layers",
            bits.len(),
            net.layers.len()
        )));
    }
    let mut total = OpCount::from_integer(0);
    let mut layers = Vec::with_capacity(bits.len());
    for (l, &b) in net.layers.iter().zip(bits) {
        let t = tables.throughput(l.kernel_shape(), b)?;
        let t128 = Ratio::new(u128::from(*t.numer()), u128::from(*t.denom()));
        let term = OpCount::from_integer(u128::from(l.op_mul())) / t128;
        total += term;
        layers.push(LayerOps {
            name: l.name.clone(),
            op_kind: l.op_kind,
            kernel_shape: l.kernel_shape(),
            bits: b,
            op_mul: l.op_mul(),
            t_mul: t128.into(),
            op_dsp: term.into(),
        });
    }
    Ok(OpsReport {
        layers,
        total_op_mul: net.total_op_mul(),
        op_dsp: total.into(),
        op_dsp_approx: *total.numer() as f64 / *total.denom() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(name: &str, c_in: u32, c_out: u32, k: u32, out: u32) -> LayerSpec {
        LayerSpec {
            name: name.into(),
            op_kind: OpKind::Conv,
            c_in,
            c_out,
            k_h: k,
            k_w: k,
            h_out: out,
            w_out: out,
            groups: None,
            frozen_bits: None,
        }
    }

    #[test]
    fn op_mul_examples() {
        assert_eq!(conv("a", 1, 1, 1, 1).op_mul(), 1);
        assert_eq!(conv("b", 16, 32, 3, 20).op_mul(), 1_843_200);
        let dw = LayerSpec {
            op_kind: OpKind::DepthwiseConv,
            ..conv("c", 32, 32, 3, 10)
        };
        assert_eq!(dw.op_mul(), 28_800);
        dw.validate().unwrap();
        let fc = LayerSpec {
            op_kind: OpKind::FullyConnected,
            ..conv("d", 128, 10, 1, 1)
        };
        assert_eq!(fc.op_mul(), 1280);
    }

    #[test]
    fn layer_validation() {
        let mut l = conv("a", 6, 4, 3, 5);
        l.groups = Some(4);
        assert!(l.validate().is_err());
        l.groups = Some(2);
        l.validate().unwrap();
        let pw = LayerSpec {
            op_kind: OpKind::PointwiseConv,
            ..conv("p", 4, 4, 3, 5)
        };
        assert!(pw.validate().is_err());
        assert!(NetworkSpec::new(vec![conv("x", 1, 1, 1, 1), conv("x", 1, 1, 1, 1)]).is_err());
        assert!(NetworkSpec::new(vec![]).is_err());
    }

    #[test]
    fn assignment_resolution() {
        let mut first = conv("first", 3, 8, 3, 4);
        first.frozen_bits = Some(BitPair::new(8, 8));
        let net = NetworkSpec::new(vec![first, conv("mid", 8, 8, 3, 4)]).unwrap();
        let mut a = BitwidthAssignment::default();
        a.0.insert("mid".into(), BitPair::new(4, 4));
        assert_eq!(a.resolve(&net).unwrap(), vec![BitPair::new(8, 8), BitPair::new(4, 4)]);
        a.0.insert("first".into(), BitPair::new(2, 2));
        assert!(matches!(a.resolve(&net), Err(Error::Assignment(_))));
        let mut b = BitwidthAssignment::default();
        b.0.insert("mid".into(), BitPair::new(4, 4));
        b.0.insert("nope".into(), BitPair::new(4, 4));
        assert!(b.resolve(&net).unwrap_err().is_schema());
        let c = BitwidthAssignment::default();
        assert!(c.resolve(&net).is_err());
    }

    #[test]
    fn network_json_round_trip() {
        let net = NetworkSpec::new(vec![conv("a", 3, 8, 3, 4)]).unwrap();
        assert_eq!(NetworkSpec::from_json(&net.to_json()).unwrap(), net);
        assert!(NetworkSpec::from_json("{\"version\":1,\"layers\":[{\"name\":\"a\"}]}")
            .unwrap_err()
            .is_schema());
    }
}

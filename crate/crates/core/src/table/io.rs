use serde::{Deserialize, Serialize};

use super::{KernelShape, LookupTable, SeqLen};
use crate::error::{Error, Result};
use crate::packing::{PackingChoice, Signedness};
use crate::profile::DspProfile;

pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BitsDoc {
    min: u32,
    max: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlagsDoc {
    allow_overpack: bool,
    allow_separation: bool,
    /// Some entry is both separated and overpacked.
    separation_with_overpack: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    version: u32,
    profile: DspProfile,
    kernel_shape: KernelShape,
    seq_len_policy: SeqLen,
    signedness: Signedness,
    bits: BitsDoc,
    flags: FlagsDoc,
    entries: Vec<PackingChoice>,
}

fn combined(entries: &[PackingChoice]) -> bool {
    entries.iter().any(|c| c.overpacked() && c.separated())
}

impl LookupTable {
    pub fn to_json(&self) -> String {
        let doc = TableDoc {
            version: TABLE_VERSION,
            profile: self.profile.clone(),
            kernel_shape: self.kernel_shape,
            seq_len_policy: self.seq_len_policy,
            signedness: self.signedness,
            bits: BitsDoc {
                min: self.bits_min,
                max: self.bits_max,
            },
            flags: FlagsDoc {
                allow_overpack: self.allow_overpack,
                allow_separation: self.allow_separation,
                separation_with_overpack: combined(&self.entries),
            },
            entries: self.entries.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }

    /// Parse and check the document's shape without re-deriving entry
    /// metrics.
    pub fn parse_document(text: &str) -> Result<LookupTable> {
        let doc: TableDoc = serde_json::from_str(text).map_err(|e| Error::Schema(format!("lookup table: {e}")))?;
        if doc.version != TABLE_VERSION {
            return Err(Error::Schema(format!(
                "lookup table version {} is not supported (expected {TABLE_VERSION})",
                doc.version
            )));
        }
        doc.profile.validate()?;
        if doc.entries.is_empty() {
            return Err(Error::Schema("lookup table has no entries".into()));
        }
        if doc.bits.min == 0 || doc.bits.min > doc.bits.max {
            return Err(Error::Schema(format!(
                "bit range {}..={} is empty",
                doc.bits.min, doc.bits.max
            )));
        }
        if doc.kernel_shape.k_h == 0 || doc.kernel_shape.k_w == 0 {
            return Err(Error::Schema("kernel shape must be at least 1x1".into()));
        }
        let side = (doc.bits.max - doc.bits.min + 1) as usize;
        if doc.entries.len() != side * side {
            return Err(Error::Schema(format!(
                "expected {} entries for bits {}..={}, found {}",
                side * side,
                doc.bits.min,
                doc.bits.max,
                doc.entries.len()
            )));
        }
        let cells = super::grid(doc.bits.min, doc.bits.max);
        for (e, (w, a)) in doc.entries.iter().zip(cells) {
            if (e.w_b, e.a_b) != (w, a) {
                return Err(Error::Schema(format!(
                    "entry ({}, {}) found where ({w}, {a}) belongs",
                    e.w_b, e.a_b
                )));
            }
            if e.signedness != doc.signedness {
                return Err(Error::Schema(format!("entry ({w}, {a}) has mixed signedness")));
            }
        }
        Ok(LookupTable {
            profile: doc.profile,
            kernel_shape: doc.kernel_shape,
            seq_len_policy: doc.seq_len_policy,
            signedness: doc.signedness,
            bits_min: doc.bits.min,
            bits_max: doc.bits.max,
            allow_overpack: doc.flags.allow_overpack,
            allow_separation: doc.flags.allow_separation,
            entries: doc.entries,
        })
    }

    /// Parse, then re-derive every entry against the profile.
    pub fn from_json(text: &str) -> Result<LookupTable> {
        let table = Self::parse_document(text)?;
        table.check_invariants()?;
        Ok(table)
    }

    /// Every entry is valid for the profile, honours the table's flags, and
    /// carries the metrics its configuration actually yields.
    pub fn check_invariants(&self) -> Result<()> {
        for e in &self.entries {
            self.check_entry(e).map_err(Error::Invariant)?;
        }
        Ok(())
    }

    pub fn check_entry(&self, e: &PackingChoice) -> Result<(), String> {
        let cell = format!("({}, {})", e.w_b, e.a_b);
        if e.overpacked() && !self.allow_overpack {
            return Err(format!("{cell} is overpacked but the table disallows it"));
        }
        if e.separated() && !self.allow_separation {
            return Err(format!("{cell} is separated but the table disallows it"));
        }
        e.recheck(self.kernel_shape.k_w, self.seq_len_policy, &self.profile)
            .map_err(|m| format!("{cell}: {m}"))
    }

    /// Throughput grid, rows `w_b`, columns `a_b`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["w_b\\a_b".to_string()];
        header.extend((self.bits_min..=self.bits_max).map(|a| a.to_string()));
        w.write_record(&header)?;
        for wb in self.bits_min..=self.bits_max {
            let mut row = vec![wb.to_string()];
            for ab in self.bits_min..=self.bits_max {
                let t = self
                    .get(wb, ab)
                    .ok_or_else(|| Error::MissingEntry(format!("({wb}, {ab})")))?
                    .t_mul;
                row.push(t.to_string());
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::SearchOptions;
    use crate::table::{search_optimal, BuildOptions};
    use num_rational::Ratio;

    /// A small table assembled without verification.
    fn small() -> LookupTable {
        let p = DspProfile::dsp48e2();
        let shape = KernelShape::new(3, 3);
        let opts = SearchOptions::full(Signedness::Unsigned);
        let entries = super::super::grid(2, 4)
            .into_iter()
            .map(|(w, a)| search_optimal(w, a, shape, SeqLen::Generic, &p, opts).unwrap())
            .collect();
        let b = BuildOptions::default();
        LookupTable {
            profile: p,
            kernel_shape: shape,
            seq_len_policy: b.seq,
            signedness: Signedness::Unsigned,
            bits_min: 2,
            bits_max: 4,
            allow_overpack: true,
            allow_separation: true,
            entries,
        }
    }

    #[test]
    fn round_trip() {
        let t = small();
        let back = LookupTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), t.to_json());
    }

    #[test]
    fn inflated_throughput_is_an_invariant_error() {
        let mut t = small();
        t.entries[0].t_mul += Ratio::from_integer(1);
        let err = LookupTable::from_json(&t.to_json()).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)), "{err}");
        assert!(LookupTable::parse_document(&t.to_json()).is_ok());
    }

    #[test]
    fn empty_and_malformed_documents_are_schema_errors() {
        let t = small();
        let mut v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        v["entries"] = serde_json::json!([]);
        assert!(LookupTable::from_json(&v.to_string()).unwrap_err().is_schema());
        v["entries"] = serde_json::json!([{"w_b": 2}]);
        assert!(LookupTable::from_json(&v.to_string()).unwrap_err().is_schema());
        assert!(LookupTable::from_json("{}").unwrap_err().is_schema());
        let mut v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        v["version"] = serde_json::json!(99);
        assert!(LookupTable::from_json(&v.to_string()).unwrap_err().is_schema());
    }

    #[test]
    fn csv_grid() {
        let csv = small().to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "w_b\\a_b,2,3,4");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("2,"));
    }
}

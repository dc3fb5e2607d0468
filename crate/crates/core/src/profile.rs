//! Hard multiplier primitive description.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-width multiplier: two input ports and an accumulator.
///
/// `port_small` and `port_large` are raw bit capacities of the two physical
/// multiplier inputs. Packings address them by role, so the order only
/// matters for validation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DspProfile {
    pub name: String,
    pub port_small: u32,
    pub port_large: u32,
    pub accumulator: u32,
}

impl DspProfile {
    pub fn new(name: impl Into<String>, port_small: u32, port_large: u32, accumulator: u32) -> Result<Self> {
        let p = DspProfile {
            name: name.into(),
            port_small,
            port_large,
            accumulator,
        };
        p.validate()?;
        Ok(p)
    }

    /// The 27x18 multiplier with a 48-bit accumulator.
    pub fn dsp48e2() -> Self {
        DspProfile {
            name: "dsp48e2".to_string(),
            port_small: 18,
            port_large: 27,
            accumulator: 48,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "dsp48e2" => Some(Self::dsp48e2()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.port_small == 0 || self.port_small > self.port_large {
            return Err(Error::InvalidProfile(format!(
                "need 0 < port_small <= port_large, got {} / {}",
                self.port_small, self.port_large
            )));
        }
        if self.accumulator < self.port_small + self.port_large {
            return Err(Error::InvalidProfile(format!(
                "accumulator {} narrower than full product {}",
                self.accumulator,
                self.port_small + self.port_large
            )));
        }
        // Words are simulated in i128; keep a wide margin for accumulation.
        if self.accumulator > 120 {
            return Err(Error::InvalidProfile(format!(
                "accumulator {} exceeds the 120-bit simulation limit",
                self.accumulator
            )));
        }
        Ok(())
    }

    /// Port width for the given physical port.
    pub fn port(&self, large: bool) -> u32 {
        if large {
            self.port_large
        } else {
            self.port_small
        }
    }
}

impl Default for DspProfile {
    fn default() -> Self {
        Self::dsp48e2()
    }
}

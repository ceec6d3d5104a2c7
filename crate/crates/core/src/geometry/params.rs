use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Mm,
    Deg,
}

impl Unit {
    pub fn to_si(self, v: f64) -> f64 {
        match self {
            Unit::Mm => v * 1e-3,
            Unit::Deg => v.to_radians(),
        }
    }
}

/// A free design parameter with its admissible range, in user units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub min: f64,
    pub max: f64,
    pub unit: Unit,
}

/// A fixed template dimension in user units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedParameter {
    pub name: String,
    pub value: f64,
    pub unit: Unit,
}

pub const DMAG: usize = 0;
pub const DSLIT5: usize = 1;
pub const DSLIT6: usize = 2;
pub const LSLIT1: usize = 3;
pub const LSLIT2: usize = 4;
pub const MA: usize = 5;
pub const MT1: usize = 6;
pub const MW1: usize = 7;
pub const OPERATING_ANGLE: usize = 8;
pub const RA1: usize = 9;
pub const RA2: usize = 10;
pub const RS: usize = 11;
pub const RW2: usize = 12;
pub const RW3: usize = 13;
pub const RW4: usize = 14;
pub const RW5: usize = 15;
pub const WMAG: usize = 16;

pub const NUM_FREE: usize = 17;

const FREE_TABLE: [(&str, f64, f64, f64, Unit); NUM_FREE] = [
    ("DMAG", 30.0, 20.0, 40.0, Unit::Mm),
    ("DSLIT5", 1.0, 0.5, 6.0, Unit::Mm),
    ("DSLIT6", 2.0, 1.5, 8.0, Unit::Mm),
    ("LSLIT1", 6.4, 1.0, 8.0, Unit::Mm),
    ("LSLIT2", 4.3, 1.0, 8.0, Unit::Mm),
    ("MA", 150.0, 100.0, 160.0, Unit::Deg),
    ("MT1", 4.0, 1.5, 10.0, Unit::Mm),
    ("MW1", 22.0, 10.0, 27.0, Unit::Mm),
    ("OPERATING_ANGLE", 0.0, -20.0, 20.0, Unit::Deg),
    ("RA1", 144.0, 130.0, 170.0, Unit::Deg),
    ("RA2", 166.0, 150.0, 179.0, Unit::Deg),
    ("RS", 1.0, 1.0, 4.0, Unit::Mm),
    ("RW2", 1.0, 0.5, 4.0, Unit::Mm),
    ("RW3", 1.0, 0.5, 4.0, Unit::Mm),
    ("RW4", 1.0, 0.5, 2.0, Unit::Mm),
    ("RW5", 1.0, 0.5, 2.0, Unit::Mm),
    ("WMAG", 4.0, 3.0, 8.0, Unit::Mm),
];

const FIXED_TABLE: [(&str, f64, Unit); 10] = [
    ("LENGTH", 35.0, Unit::Mm),
    ("RD1", 100.0, Unit::Mm),
    ("RD2", 29.1, Unit::Mm),
    ("RF", 0.2, Unit::Mm),
    ("SD1", 204.0, Unit::Mm),
    ("SD2", 102.0, Unit::Mm),
    ("ST", 1.6, Unit::Mm),
    ("SW1", 6.0, Unit::Mm),
    ("SW2", 3.6, Unit::Mm),
    ("SW4", 25.5, Unit::Mm),
];

/// Named template parameters: 17 free ones with bounds plus fixed dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub free: Vec<Parameter>,
    pub fixed: Vec<FixedParameter>,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::initial()
    }
}

impl ParameterSet {
    /// Initial motor values and bounds.
    pub fn initial() -> Self {
        Self {
            free: FREE_TABLE
                .iter()
                .map(|&(name, value, min, max, unit)| Parameter {
                    name: name.to_string(),
                    value,
                    min,
                    max,
                    unit,
                })
                .collect(),
            fixed: FIXED_TABLE
                .iter()
                .map(|&(name, value, unit)| FixedParameter {
                    name: name.to_string(),
                    value,
                    unit,
                })
                .collect(),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.free.iter().position(|p| p.name == name)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.free[i].value
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.free[i].value = v;
    }

    /// Value of free parameter `i` in meters or radians.
    pub fn si(&self, i: usize) -> f64 {
        self.free[i].unit.to_si(self.free[i].value)
    }

    /// Value of a fixed dimension in SI units.
    pub fn fixed_si(&self, name: &str) -> Result<f64> {
        self.fixed
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.unit.to_si(p.value))
            .ok_or_else(|| Error::Config(format!("missing fixed parameter {name}")))
    }

    /// Checks structure and bounds.
    pub fn validate(&self) -> Result<()> {
        if self.free.len() != NUM_FREE {
            return Err(Error::Config(format!(
                "expected {NUM_FREE} free parameters, got {}",
                self.free.len()
            )));
        }
        for (p, &(name, ..)) in self.free.iter().zip(FREE_TABLE.iter()) {
            if p.name != name {
                return Err(Error::Config(format!(
                    "parameter {} out of order, expected {name}",
                    p.name
                )));
            }
            if !(p.min < p.max) {
                return Err(Error::Config(format!("parameter {} has empty range", p.name)));
            }
            if !(p.value >= p.min && p.value <= p.max) {
                return Err(Error::Bounds {
                    name: p.name.clone(),
                    value: p.value,
                    min: p.min,
                    max: p.max,
                });
            }
        }
        for (name, ..) in FIXED_TABLE {
            self.fixed_si(name)?;
        }
        Ok(())
    }

    /// Affine map of every free value onto `[0, 1]`.
    pub fn to_scaled(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|p| (p.value - p.min) / (p.max - p.min))
            .collect()
    }

    /// Inverse of [`to_scaled`](Self::to_scaled).
    pub fn set_scaled(&mut self, x: &[f64]) {
        for (p, &xi) in self.free.iter_mut().zip(x) {
            p.value = p.min + xi * (p.max - p.min);
        }
    }

    /// Range `max − min` of free parameter `i` in SI units.
    pub fn range_si(&self, i: usize) -> f64 {
        let p = &self.free[i];
        p.unit.to_si(p.max) - p.unit.to_si(p.min)
    }
}

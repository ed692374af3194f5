use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AnchorSet, UwbError};
use crate::geom::{Segment, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangingNoiseModel {
    /// Standard deviation of the Gaussian range error, meters.
    pub sigma: f64,
    /// Added to a range whose tag-anchor line crosses an obstacle, meters.
    pub nlos_bias: f64,
    /// Probability that an occluded range is lost altogether.
    pub nlos_dropout_prob: f64,
}

impl Default for RangingNoiseModel {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            nlos_bias: 0.3,
            nlos_dropout_prob: 0.0,
        }
    }
}

impl RangingNoiseModel {
    pub fn validate(&self) -> Result<(), UwbError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(UwbError::InvalidNoise(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.nlos_bias >= 0.0 && self.nlos_bias.is_finite()) {
            return Err(UwbError::InvalidNoise(format!("nlos_bias must be >= 0, got {}", self.nlos_bias)));
        }
        if !(0.0..=1.0).contains(&self.nlos_dropout_prob) {
            return Err(UwbError::InvalidNoise(format!(
                "nlos_dropout_prob must lie in [0, 1], got {}",
                self.nlos_dropout_prob
            )));
        }
        Ok(())
    }
}

/// One set of anchor ranges; `None` marks a lost measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement {
    pub ranges: [Option<f64>; 4],
    pub nlos: [bool; 4],
}

impl RangeMeasurement {
    /// Bits 0-3: NLOS per anchor; bits 4-7: missing per anchor.
    pub fn flags(&self) -> u8 {
        let mut f = 0;
        for i in 0..4 {
            if self.nlos[i] {
                f |= 1 << i;
            }
            if self.ranges[i].is_none() {
                f |= 1 << (4 + i);
            }
        }
        f
    }
}

/// Ranges from the tag at `true_pos` to each anchor. `obstacles` are the
/// segments that can block the radio path (tested in the x-y plane).
/// Draws one normal and one uniform variate per anchor regardless of the
/// outcome, so equal seeds give paired noise across noise levels.
pub fn simulate_ranges<R: Rng + ?Sized>(
    anchors: &AnchorSet,
    true_pos: Vec2,
    obstacles: &[Segment],
    noise: &RangingNoiseModel,
    rng: &mut R,
) -> RangeMeasurement {
    let mut m = RangeMeasurement::default();
    for i in 0..4 {
        let n: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let occluded = obstacles.iter().any(|s| s.crosses(true_pos, anchors.xy(i)));
        let mut r = anchors.distance(i, true_pos) + noise.sigma * n;
        if occluded {
            r += noise.nlos_bias;
        }
        m.nlos[i] = occluded;
        m.ranges[i] = if occluded && u < noise.nlos_dropout_prob {
            None
        } else {
            Some(r.max(0.0))
        };
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangingRecord {
    pub t: f64,
    pub m: RangeMeasurement,
}

/// CSV with header `t,r1,r2,r3,r4,flags`; lost ranges are empty fields.
pub fn write_ranging_log<W: Write>(w: &mut W, records: &[RangingRecord]) -> std::io::Result<()> {
    writeln!(w, "t,r1,r2,r3,r4,flags")?;
    for rec in records {
        write!(w, "{}", rec.t)?;
        for r in rec.m.ranges {
            match r {
                Some(r) => write!(w, ",{r}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w, ",{}", rec.m.flags())?;
    }
    Ok(())
}

pub fn read_ranging_log<R: BufRead>(r: R) -> Result<Vec<RangingRecord>, UwbError> {
    let err = |line: usize, message: String| UwbError::Log { line, message };
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let n = idx + 1;
        let line = line.map_err(|e| err(n, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || (n == 1 && line.starts_with('t')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(n, format!("expected 6 fields, found {}", fields.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| err(n, format!("{s:?}: {e}")));
        let t = num(fields[0])?;
        let flags: u8 = fields[5].trim().parse().map_err(|e| err(n, format!("flags: {e}")))?;
        let mut m = RangeMeasurement::default();
        for i in 0..4 {
            let f = fields[1 + i].trim();
            m.ranges[i] = if f.is_empty() { None } else { Some(num(f)?) };
            m.nlos[i] = flags & (1 << i) != 0;
            if (flags & (1 << (4 + i)) != 0) != m.ranges[i].is_none() {
                return Err(err(n, format!("missing flag disagrees with range {}", i + 1)));
            }
        }
        out.push(RangingRecord { t, m });
    }
    Ok(out)
}

use serde::{Deserialize, Serialize};

use super::kalman::{kalman_update, KalmanState, SIGMA_M2, SIGMA_P2};
use super::ranging::{RangeMeasurement, RangingRecord};
use super::solver::{gauss_newton_solve, GnOptions};
use super::{AnchorSet, UwbError};
use crate::geom::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizerConfig {
    /// Fix rate, Hz.
    pub rate_hz: f64,
    /// Smooth each range with its Kalman filter before solving.
    pub filter: bool,
    pub sigma_m2: f64,
    pub sigma_p2: f64,
    pub gn: GnOptions,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            filter: true,
            sigma_m2: SIGMA_M2,
            sigma_p2: SIGMA_P2,
            gn: GnOptions::default(),
        }
    }
}

impl LocalizerConfig {
    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fix {
    pub t: f64,
    pub position: Vec2,
    pub residual: f64,
    /// False when the solver hit its iteration cap or too few ranges were
    /// available (the previous fix is then repeated).
    pub converged: bool,
    pub damped: bool,
}

/// Sequential range filter + position solver, warm-started from its last fix.
#[derive(Clone, Debug)]
pub struct Localizer {
    anchors: AnchorSet,
    cfg: LocalizerConfig,
    filters: [KalmanState; 4],
    last: Vec2,
}

impl Localizer {
    pub fn new(anchors: AnchorSet, x0: Vec2, cfg: LocalizerConfig) -> Self {
        let filters = [KalmanState::new(cfg.sigma_m2, cfg.sigma_p2); 4];
        Self {
            anchors,
            cfg,
            filters,
            last: x0,
        }
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn config(&self) -> &LocalizerConfig {
        &self.cfg
    }

    pub fn last_position(&self) -> Vec2 {
        self.last
    }

    pub fn filters(&self) -> &[KalmanState; 4] {
        &self.filters
    }

    pub fn update(&mut self, t: f64, m: &RangeMeasurement) -> Result<Fix, UwbError> {
        let ranges: [Option<f64>; 4] = if self.cfg.filter {
            std::array::from_fn(|i| {
                self.filters[i] = kalman_update(self.filters[i], m.ranges[i]);
                self.filters[i].initialized.then_some(self.filters[i].x_hat)
            })
        } else {
            m.ranges
        };
        match gauss_newton_solve(&self.anchors, &ranges, self.last, &self.cfg.gn) {
            Ok(s) => {
                self.last = s.position;
                Ok(Fix {
                    t,
                    position: s.position,
                    residual: s.residual,
                    converged: s.converged,
                    damped: s.damped,
                })
            }
            Err(UwbError::TooFewRanges(_)) => Ok(Fix {
                t,
                position: self.last,
                residual: f64::NAN,
                converged: false,
                damped: false,
            }),
            Err(e) => Err(e),
        }
    }
}

/// Runs a fresh localizer over a recorded range stream.
pub fn localize(
    anchors: &AnchorSet,
    x0: Vec2,
    cfg: &LocalizerConfig,
    records: &[RangingRecord],
) -> Result<Vec<Fix>, UwbError> {
    let mut loc = Localizer::new(anchors.clone(), x0, cfg.clone());
    records.iter().map(|r| loc.update(r.t, &r.m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uwb::{simulate_ranges, RangingNoiseModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn anchors() -> AnchorSet {
        AnchorSet::new([[0.0, 0.0, 1.5], [5.0, 0.0, 1.6], [5.0, 5.0, 1.7], [0.0, 5.0, 1.8]], 0.2).unwrap()
    }

    fn stream(p: Vec2, sigma: f64, n: usize, seed: u64) -> Vec<RangingRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = RangingNoiseModel { sigma, ..Default::default() };
        (0..n)
            .map(|k| RangingRecord {
                t: k as f64 * 0.1,
                m: simulate_ranges(&anchors(), p, &[], &noise, &mut rng),
            })
            .collect()
    }

    #[test]
    fn static_noiseless_tag() {
        let p = Vec2::new(1.2, 3.4);
        let fixes = localize(&anchors(), Vec2::new(2.5, 2.5), &LocalizerConfig::default(), &stream(p, 0.0, 20, 0)).unwrap();
        assert!(fixes.iter().all(|f| f.position.distance(p) < 1e-6));
    }

    #[test]
    fn filtering_reduces_fix_spread() {
        let p = Vec2::new(3.0, 2.0);
        let recs = stream(p, 0.05, 2000, 1);
        let spread = |filter: bool| {
            let cfg = LocalizerConfig { filter, ..Default::default() };
            let fixes = localize(&anchors(), p, &cfg, &recs).unwrap();
            // skip the filter transient
            let tail = &fixes[100..];
            (tail.iter().map(|f| f.position.distance(p).powi(2)).sum::<f64>() / tail.len() as f64).sqrt()
        };
        let (filtered, raw) = (spread(true), spread(false));
        assert!(filtered < raw, "filtered {filtered} raw {raw}");
    }

    #[test]
    fn lost_ranges_hold_the_last_fix_without_filtering() {
        let cfg = LocalizerConfig { filter: false, ..Default::default() };
        let mut loc = Localizer::new(anchors(), Vec2::new(1.0, 1.0), cfg);
        let m = RangeMeasurement { ranges: [Some(1.0), None, None, Some(2.0)], nlos: [false; 4] };
        let f = loc.update(0.0, &m).unwrap();
        assert_eq!(f.position, Vec2::new(1.0, 1.0));
        assert!(!f.converged);
    }
}

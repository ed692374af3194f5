use serde::{Deserialize, Serialize};

/// Range measurement noise variance, m².
pub const SIGMA_M2: f64 = 6.67e-4;
/// Process noise variance per update, m².
pub const SIGMA_P2: f64 = 1e-4;

/// Scalar constant-value Kalman filter on one anchor's range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub x_hat: f64,
    pub p: f64,
    pub sigma_m2: f64,
    pub sigma_p2: f64,
    /// Gain applied by the last measurement update (0 before any).
    pub gain: f64,
    pub initialized: bool,
}

impl Default for KalmanState {
    fn default() -> Self {
        Self::new(SIGMA_M2, SIGMA_P2)
    }
}

impl KalmanState {
    pub fn new(sigma_m2: f64, sigma_p2: f64) -> Self {
        Self {
            x_hat: 0.0,
            p: sigma_m2,
            sigma_m2,
            sigma_p2,
            gain: 0.0,
            initialized: false,
        }
    }
}

/// One predict/update cycle. The first measurement initializes the estimate
/// with variance σ_m²; a missing measurement only predicts.
pub fn kalman_update(state: KalmanState, z: Option<f64>) -> KalmanState {
    let mut s = state;
    match z {
        Some(z) if !s.initialized => {
            s.x_hat = z;
            s.p = s.sigma_m2;
            s.initialized = true;
        }
        Some(z) => {
            let p_prior = s.p + s.sigma_p2;
            let k = p_prior / (p_prior + s.sigma_m2);
            s.x_hat += k * (z - s.x_hat);
            s.p = (1.0 - k) * p_prior;
            s.gain = k;
        }
        None if s.initialized => s.p += s.sigma_p2,
        None => {}
    }
    s
}

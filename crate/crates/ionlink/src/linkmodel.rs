//! Photon-link analytics: multiplicative loss budgets, fiber transmission,
//! and the background-count noise models that predict how much a measured
//! dark-count rate degrades the reconstructed entangled state.

use serde::{Deserialize, Serialize};

use crate::qstate::{self, DensityMatrix, PureState};
use crate::tomography::{self, MleConfig};
use crate::{Error, Result};

/// One efficiency stage in a photon path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub efficiency: f64,
    #[serde(default)]
    pub uncertainty: f64,
}

/// Ordered list of stage efficiencies whose product is the end-to-end
/// detection probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossBudget {
    pub stages: Vec<Stage>,
}

impl LossBudget {
    pub fn validate(&self) -> Result<()> {
        for stage in &self.stages {
            if !(stage.efficiency > 0.0 && stage.efficiency <= 1.0) {
                return Err(Error::validation(
                    "loss budget",
                    format!(
                        "stage '{}' efficiency {} outside (0, 1]",
                        stage.name, stage.efficiency
                    ),
                ));
            }
            if stage.uncertainty < 0.0 {
                return Err(Error::validation(
                    "loss budget",
                    format!("stage '{}' has negative uncertainty", stage.name),
                ));
            }
        }
        Ok(())
    }
}

/// Product of all stage efficiencies with first-order uncertainty
/// propagation (relative uncertainties added in quadrature).
pub fn budget_product(budget: &LossBudget) -> Result<(f64, f64)> {
    if budget.stages.is_empty() {
        return Err(Error::validation("loss budget", "no stages"));
    }
    budget.validate()?;
    let product: f64 = budget.stages.iter().map(|s| s.efficiency).product();
    let rel_sq: f64 = budget.stages.iter().map(|s| (s.uncertainty / s.efficiency).powi(2)).sum();
    Ok((product, product * rel_sq.sqrt()))
}

/// Fiber segment with nominal attenuation and an optional measured value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberSpec {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    #[serde(default)]
    pub measured_transmission: Option<f64>,
}

/// Transmission 10^(-attenuation·length/10) from the attenuation spec.
pub fn fiber_transmission(spec: &FiberSpec) -> f64 {
    10f64.powf(-spec.attenuation_db_per_km * spec.length_km / 10.0)
}

impl FiberSpec {
    /// Measured minus predicted transmission, when a measurement exists
    /// (connectors and splices usually make this negative).
    pub fn transmission_gap(&self) -> Option<f64> {
        self.measured_transmission.map(|m| m - fiber_transmission(self))
    }
}

/// Background-count environment of one detection arm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BackgroundModel {
    /// Dark/background count rate in counts per second.
    pub rate_cps: f64,
    /// Detection window in seconds.
    pub window_s: f64,
    /// Per-attempt probability of a signal photon while one measurement
    /// setting is being analysed.
    pub signal_probability_per_setting: f64,
}

impl BackgroundModel {
    pub fn validate(&self) -> Result<()> {
        if self.rate_cps < 0.0 || self.window_s < 0.0 || self.signal_probability_per_setting < 0.0
        {
            return Err(Error::validation("background model", "negative parameter"));
        }
        if self.rate_cps * self.window_s >= 1.0 {
            return Err(Error::validation(
                "background model",
                "background probability rate x window must stay below 1",
            ));
        }
        Ok(())
    }

    /// Probability of a background count inside one detection window.
    pub fn window_probability(&self) -> f64 {
        self.rate_cps * self.window_s
    }
}

/// Fraction of detected events that are background:
/// ε = (rate·window) / (rate·window + signal probability per setting).
pub fn background_fraction(bg: &BackgroundModel) -> Result<f64> {
    bg.validate()?;
    let b = bg.window_probability();
    let s = bg.signal_probability_per_setting;
    if b + s <= 0.0 {
        return Err(Error::validation("background model", "signal and background both zero"));
    }
    Ok(b / (b + s))
}

/// Mixes every setting's outcome distribution with the uniform one:
/// p' = (1-ε)·p + ε/4. Background light is unpolarized and carries no ion
/// correlation, so it lands evenly on the four outcomes; per-setting
/// normalization is preserved exactly.
pub fn apply_background(probabilities: &[f64; 36], epsilon: f64) -> [f64; 36] {
    let mut out = [0.0; 36];
    for (o, p) in out.iter_mut().zip(probabilities) {
        *o = (1.0 - epsilon) * p + epsilon / 4.0;
    }
    out
}

/// Which ingredients enter the noisy-state prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Measured background counts applied to a perfect Bell state.
    Model1,
    /// Background counts applied to a supplied (imperfect) base state.
    Model2,
}

/// Outcome of pushing a base state through the background + reconstruction
/// pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct NoisyStatePrediction {
    pub model: NoiseModel,
    pub base_state: DensityMatrix,
    pub epsilon: f64,
    /// Fidelity of the reconstructed noisy state with the nearest maximally
    /// entangled state (full pipeline).
    pub predicted_fidelity: f64,
    /// First-order estimate (1-ε)·F_base + ε/4 for comparison.
    pub closed_form_fidelity: f64,
}

/// Predicted fidelity after adding background counts to `base`:
/// Born probabilities → uniform background mixture → maximum-likelihood
/// reconstruction → fidelity with the nearest maximally entangled state.
///
/// Model 1 requires `base` to be the ideal Bell state.
pub fn predict_fidelity(
    model: NoiseModel,
    base: &DensityMatrix,
    bg: &BackgroundModel,
) -> Result<NoisyStatePrediction> {
    if model == NoiseModel::Model1 {
        let overlap = qstate::fidelity_pure(base, &qstate::ideal_ion_photon_state());
        if overlap < 1.0 - 1e-9 {
            return Err(Error::validation(
                "noise model",
                format!("Model1 requires the ideal Bell state as base (overlap {overlap})"),
            ));
        }
    }
    let epsilon = background_fraction(bg)?;
    let noisy = apply_background(&tomography::born_probabilities(base), epsilon);
    let reconstruction = tomography::mle_from_probabilities(&noisy, &MleConfig::default())?;
    let (predicted_fidelity, _) = qstate::fidelity_max_entangled(&reconstruction.rho)?;
    let base_fidelity = match model {
        NoiseModel::Model1 => 1.0,
        NoiseModel::Model2 => qstate::fidelity_max_entangled(base)?.0,
    };
    Ok(NoisyStatePrediction {
        model,
        base_state: base.clone(),
        epsilon,
        predicted_fidelity,
        closed_form_fidelity: (1.0 - epsilon) * base_fidelity + epsilon / 4.0,
    })
}

/// Shorter-window trade-off: the detection window shrinks to
/// `kept_fraction` of the full window while `signal_kept` of the signal
/// survives. Returns the Model-1 fidelity at the rescaled background
/// fraction and the efficiency factor (= `signal_kept`).
pub fn window_tradeoff(
    full_window_s: f64,
    kept_fraction: f64,
    signal_kept: f64,
    bg: &BackgroundModel,
) -> Result<(f64, f64)> {
    for (name, v) in [("kept_fraction", kept_fraction), ("signal_kept", signal_kept)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::validation(
                "window tradeoff",
                format!("{name} = {v} outside (0, 1]"),
            ));
        }
    }
    let scaled = BackgroundModel {
        rate_cps: bg.rate_cps,
        window_s: full_window_s * kept_fraction,
        signal_probability_per_setting: bg.signal_probability_per_setting * signal_kept,
    };
    let bell = qstate::ideal_ion_photon_state().density();
    let prediction = predict_fidelity(NoiseModel::Model1, &bell, &scaled)?;
    Ok((prediction.predicted_fidelity, signal_kept))
}

/// Detected clicks per second: P × attempt rate.
pub fn click_rate(click_probability: f64, attempt_rate_hz: f64) -> f64 {
    click_probability * attempt_rate_hz
}

/// Rank-2 proxy state with prescribed purity and maximally-entangled
/// fidelity, used when no measured base-state matrix is available. The
/// eigenvalue weights fix the purity and a common Schmidt imbalance pulls
/// the fidelity below the larger eigenvalue.
pub fn synthetic_base_state(fidelity: f64, purity: f64) -> Result<DensityMatrix> {
    if !(0.5 < purity && purity <= 1.0) {
        return Err(Error::validation(
            "synthetic state",
            format!("purity {purity} outside (0.5, 1]"),
        ));
    }
    if !(0.5 < fidelity && fidelity <= 1.0) {
        return Err(Error::validation(
            "synthetic state",
            format!("fidelity {fidelity} outside (0.5, 1]"),
        ));
    }
    let gap = (2.0 * purity - 1.0).sqrt(); // λ1 - λ2 for a rank-2 spectrum
    let lambda1 = (1.0 + gap) / 2.0;
    let lambda2 = 1.0 - lambda1;
    let q = (2.0 * fidelity - 1.0) / gap;
    if q > 1.0 {
        return Err(Error::validation(
            "synthetic state",
            format!("fidelity {fidelity} unreachable at purity {purity} (needs F <= {lambda1})"),
        ));
    }
    // Schmidt amplitudes (√p, √(1-p)) with 2√(p(1-p)) = q.
    let p = (1.0 + (1.0 - q * q).max(0.0).sqrt()) / 2.0;
    let (a, b) = (p.sqrt(), (1.0 - p).sqrt());
    let c = |x: f64| qstate::C64::new(x, 0.0);
    let psi1 = PureState::normalized(nalgebra::Vector4::new(c(a), c(0.0), c(0.0), c(b)))?;
    let psi2 = PureState::normalized(nalgebra::Vector4::new(c(b), c(0.0), c(0.0), c(-a)))?;
    DensityMatrix::sanitize(
        psi1.density().matrix() * c(lambda1) + psi2.density().matrix() * c(lambda2),
    )
}

// ---------------------------------------------------------------------------
// Named background environments of the three measurement arms
// ---------------------------------------------------------------------------

/// Detection window shared by all arms.
pub const DETECTION_WINDOW_S: f64 = 30e-6;
/// Total per-attempt click probability of the 50 km arm, summed over both
/// polarization projections.
pub const P_CLICK_50KM: f64 = 5.3e-4;
/// Measured 50 km spool transmission (includes connectors/splices).
pub const FIBER_TRANSMISSION_50KM: f64 = 0.104;

/// Telecom arm after 50 km: 2 cps dark counts, signal P/2 per setting.
pub fn background_telecom_50km() -> BackgroundModel {
    BackgroundModel {
        rate_cps: 2.0,
        window_s: DETECTION_WINDOW_S,
        signal_probability_per_setting: P_CLICK_50KM / 2.0,
    }
}

/// Telecom arm at 0 km: 4 cps background (dark counts plus conversion-stage
/// noise), signal scaled up by the removed fiber transmission.
pub fn background_telecom_0km() -> BackgroundModel {
    BackgroundModel {
        rate_cps: 4.0,
        window_s: DETECTION_WINDOW_S,
        signal_probability_per_setting: P_CLICK_50KM / 2.0 / FIBER_TRANSMISSION_50KM,
    }
}

/// 854 nm arm: 10 cps detector dark counts. The arm's absolute signal rate
/// is back-solved from its known background fraction of 1/150.
pub fn background_854nm() -> BackgroundModel {
    let b = 10.0 * DETECTION_WINDOW_S;
    let eps = 1.0 / 150.0;
    BackgroundModel {
        rate_cps: 10.0,
        window_s: DETECTION_WINDOW_S,
        signal_probability_per_setting: b * (1.0 - eps) / eps,
    }
}

//! Seeded Monte-Carlo simulation of the pulsed ion-photon experiment:
//! the looping pulse sequence sets the attempt rate, each attempt may yield
//! a signal click (Born-distributed outcome, wavepacket-shaped arrival) or a
//! background click (uniform outcome and arrival), and accumulated counts
//! round-trip through the tomography engine.
//!
//! Rare clicks are sampled with a geometric skip-ahead over attempts, which
//! is distribution-identical to per-attempt Bernoulli draws but costs
//! O(clicks) instead of O(attempts).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linkmodel::{self, BackgroundModel, NoiseModel, NoisyStatePrediction};
use crate::qstate::{self, metric_report, DensityMatrix, MetricReport};
use crate::tomography::{
    bootstrap, mle_reconstruct, BootstrapReport, MeasurementSetting, MleConfig, Outcome,
    OutcomeCounts, TomographyResult,
};
use crate::{Error, Result};

/// One timed step of the sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub duration_s: f64,
}

impl Segment {
    fn new(name: &str, duration_s: f64) -> Self {
        Segment { name: name.into(), duration_s }
    }
}

/// Laser pulse sequence: a preamble, a photon-generation loop that repeats
/// until a click, and the ion-readout chain that runs on a click.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
    /// Index of the first segment belonging to the repeated loop.
    pub loop_start_index: usize,
    /// Index of the detection-window segment (inside the loop).
    pub detection_segment_index: usize,
    /// Segments executed after a click (basis rotation, state detection).
    #[serde(default)]
    pub on_click: Vec<Segment>,
}

impl PulseSequence {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::validation("pulse sequence", "no segments"));
        }
        for seg in self.segments.iter().chain(&self.on_click) {
            if seg.duration_s <= 0.0 {
                return Err(Error::validation(
                    "pulse sequence",
                    format!("segment '{}' must have positive duration", seg.name),
                ));
            }
        }
        if self.loop_start_index >= self.segments.len() {
            return Err(Error::validation("pulse sequence", "loop start out of range"));
        }
        if self.detection_segment_index < self.loop_start_index
            || self.detection_segment_index >= self.segments.len()
        {
            return Err(Error::validation(
                "pulse sequence",
                "detection segment must lie inside the loop",
            ));
        }
        Ok(())
    }

    /// Loop period: sum of the looped segment durations.
    pub fn loop_period_s(&self) -> f64 {
        self.segments[self.loop_start_index..].iter().map(|s| s.duration_s).sum()
    }

    /// Attempt rate set by the loop period.
    pub fn attempt_rate_hz(&self) -> f64 {
        1.0 / self.loop_period_s()
    }

    pub fn detection_segment(&self) -> &Segment {
        &self.segments[self.detection_segment_index]
    }
}

/// The 453 µs photon-generation loop: initialisation and Doppler cooling,
/// then {cool 50 µs, pump 60 µs, Raman 30 µs, fiber wait 283 µs, detection
/// window 30 µs} repeating until a click, then ion state detection.
pub fn build_default_sequence() -> PulseSequence {
    PulseSequence {
        segments: vec![
            Segment::new("initialisation 393 nm", 30e-6),
            Segment::new("initial doppler cooling", 1500e-6),
            Segment::new("doppler cooling", 50e-6),
            Segment::new("optical pumping 397 nm", 60e-6),
            Segment::new("raman photon generation 393 nm", 30e-6),
            Segment::new("fiber travel wait", 283e-6),
            Segment::new("detection window", 30e-6),
        ],
        loop_start_index: 2,
        detection_segment_index: 6,
        on_click: vec![Segment::new("ion state detection 397 nm", 1500e-6)],
    }
}

/// Arrival-time envelope of the signal photon inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavepacketShape {
    /// Raised cosine over the window (default).
    RaisedCosine,
    /// Uniform over the window.
    Flat,
}

impl WavepacketShape {
    fn sample<R: Rng>(&self, rng: &mut R, window_s: f64) -> f64 {
        match self {
            WavepacketShape::Flat => rng.random_range(0.0..window_s),
            WavepacketShape::RaisedCosine => {
                // Rejection against the bounding box; density peaks at 2/T.
                loop {
                    let t = rng.random_range(0.0..window_s);
                    let y: f64 = rng.random_range(0.0..2.0);
                    let density = 1.0 - (std::f64::consts::TAU * t / window_s).cos();
                    if y <= density {
                        return t;
                    }
                }
            }
        }
    }

    /// Normalized density over the window, for shape tests.
    pub fn density(&self, t: f64, window_s: f64) -> f64 {
        match self {
            WavepacketShape::Flat => 1.0 / window_s,
            WavepacketShape::RaisedCosine => {
                (1.0 - (std::f64::consts::TAU * t / window_s).cos()) / window_s
            }
        }
    }
}

fn default_true_state() -> DensityMatrix {
    qstate::ideal_ion_photon_state().density()
}

fn default_sequence() -> PulseSequence {
    build_default_sequence()
}

fn default_wavepacket() -> WavepacketShape {
    WavepacketShape::RaisedCosine
}

fn default_n_attempts() -> u64 {
    10_000_000
}

fn default_bootstrap_replicas() -> usize {
    200
}

/// Full configuration of one simulated experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// State the source emits on every successful attempt.
    #[serde(default = "default_true_state")]
    pub true_state: DensityMatrix,
    /// Per-attempt probability of a signal click while one setting is
    /// analysed (background adds on top of this).
    pub click_probability_per_attempt: f64,
    pub background_rate_cps: f64,
    pub detection_window_s: f64,
    #[serde(default = "default_sequence")]
    pub sequence: PulseSequence,
    #[serde(default = "default_wavepacket")]
    pub wavepacket_shape: WavepacketShape,
    pub rng_seed: u64,
    pub target_events_per_setting: u64,
    /// Attempts simulated by the click-rate phase of [`end_to_end`].
    #[serde(default = "default_n_attempts")]
    pub n_attempts: u64,
    #[serde(default = "default_bootstrap_replicas")]
    pub bootstrap_replicas: usize,
    /// Probability that the ion state readout reports flipped.
    #[serde(default)]
    pub ion_readout_error: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.sequence.validate()?;
        if !(0.0..=1.0).contains(&self.click_probability_per_attempt) {
            return Err(Error::validation("experiment config", "click probability outside [0, 1]"));
        }
        if self.background_rate_cps < 0.0 {
            return Err(Error::validation("experiment config", "negative background rate"));
        }
        if self.background_rate_cps * self.detection_window_s >= 1.0 {
            return Err(Error::validation(
                "experiment config",
                "background probability per window must stay below 1",
            ));
        }
        if self.detection_window_s <= 0.0
            || self.detection_window_s > self.sequence.detection_segment().duration_s + 1e-15
        {
            return Err(Error::validation(
                "experiment config",
                "detection window must fit the loop's detection segment",
            ));
        }
        if !(0.0..1.0).contains(&self.ion_readout_error) {
            return Err(Error::validation("experiment config", "readout error outside [0, 1)"));
        }
        if self.target_events_per_setting == 0 {
            return Err(Error::validation("experiment config", "need at least one event per setting"));
        }
        Ok(())
    }

    pub fn attempt_rate_hz(&self) -> f64 {
        self.sequence.attempt_rate_hz()
    }

    /// Probability of a background click inside one detection window.
    pub fn background_probability(&self) -> f64 {
        self.background_rate_cps * self.detection_window_s
    }

    /// The analytic background environment this configuration corresponds
    /// to: each attempt analyses one setting, so the per-attempt signal
    /// probability is the per-setting one.
    pub fn background_model(&self) -> BackgroundModel {
        BackgroundModel {
            rate_cps: self.background_rate_cps,
            window_s: self.detection_window_s,
            signal_probability_per_setting: self.click_probability_per_attempt,
        }
    }

    /// Paper-scale 50 km run: 5.3e-4 click probability, 2 cps dark counts,
    /// 30 µs window, the 453 µs loop.
    pub fn paper_50km(seed: u64) -> Self {
        ExperimentConfig {
            true_state: default_true_state(),
            click_probability_per_attempt: linkmodel::P_CLICK_50KM,
            background_rate_cps: 2.0,
            detection_window_s: linkmodel::DETECTION_WINDOW_S,
            sequence: build_default_sequence(),
            wavepacket_shape: WavepacketShape::RaisedCosine,
            rng_seed: seed,
            target_events_per_setting: 20_000,
            n_attempts: default_n_attempts(),
            bootstrap_replicas: default_bootstrap_replicas(),
            ion_readout_error: 0.0,
        }
    }
}

/// Where a click came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickOrigin {
    Signal,
    Background,
}

/// One detector click.
#[derive(Debug, Clone, Serialize)]
pub struct ClickRecord {
    pub attempt_index: u64,
    pub arrival_time_s: f64,
    pub origin: ClickOrigin,
    pub setting: MeasurementSetting,
    pub outcome: Outcome,
}

/// Aggregate statistics of a trial run.
#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub attempts: u64,
    pub clicks: u64,
    pub signal_clicks: u64,
    pub background_clicks: u64,
    pub elapsed_s: f64,
    pub click_rate_cps: f64,
    pub signal_rate_cps: f64,
    pub background_fraction: f64,
}

// RNG streams used by the simulation phases; bootstrap replicas occupy
// streams 0..replicas on the same key, so these start at 2^32.
const TRIALS_STREAM: u64 = 1 << 32;
const SYNTH_STREAM: u64 = (1 << 32) + 1;

/// Number of attempts skipped until the next click, geometric with
/// per-attempt click probability `p`, or `None` if `p` is zero.
fn geometric_skip<R: Rng>(rng: &mut R, p: f64) -> Option<u64> {
    if p <= 0.0 {
        return None;
    }
    let u: f64 = rng.random();
    let skip = (1.0 - u).ln() / (1.0 - p).ln();
    if skip.is_finite() {
        Some(skip as u64)
    } else {
        None
    }
}

/// Conditional outcome distributions per setting, normalized to 1.
fn conditional_outcomes(rho: &DensityMatrix) -> [[f64; 4]; 9] {
    let p = crate::tomography::born_probabilities(rho);
    let mut cond = [[0.0; 4]; 9];
    for s in 0..9 {
        let total: f64 = (0..4).map(|o| p[4 * s + o]).sum();
        for o in 0..4 {
            cond[s][o] = if total > 0.0 { p[4 * s + o] / total } else { 0.25 };
        }
    }
    cond
}

fn sample_outcome<R: Rng>(rng: &mut R, dist: &[f64; 4]) -> Outcome {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for outcome in Outcome::ALL {
        acc += dist[outcome.index()];
        if u < acc {
            return outcome;
        }
    }
    Outcome::MM
}

struct ClickSampler<'a> {
    config: &'a ExperimentConfig,
    conditional: [[f64; 4]; 9],
    p_signal: f64,
    p_click: f64,
}

impl<'a> ClickSampler<'a> {
    fn new(config: &'a ExperimentConfig) -> Self {
        let p_signal = config.click_probability_per_attempt;
        let p_background = config.background_probability();
        ClickSampler {
            config,
            conditional: conditional_outcomes(&config.true_state),
            p_signal,
            // Signal takes precedence; background fires only when no signal
            // arrived in the same window (single free-running detector).
            p_click: p_signal + (1.0 - p_signal) * p_background,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, setting: MeasurementSetting) -> (ClickOrigin, Outcome, f64) {
        let is_signal = rng.random::<f64>() < self.p_signal / self.p_click;
        let (origin, mut outcome, arrival) = if is_signal {
            let outcome = sample_outcome(rng, &self.conditional[setting.index()]);
            let t = self.config.wavepacket_shape.sample(rng, self.config.detection_window_s);
            (ClickOrigin::Signal, outcome, t)
        } else {
            let outcome = Outcome::ALL[rng.random_range(0..4usize)];
            let t = rng.random_range(0.0..self.config.detection_window_s);
            (ClickOrigin::Background, outcome, t)
        };
        if self.config.ion_readout_error > 0.0 && rng.random::<f64>() < self.config.ion_readout_error
        {
            outcome = outcome.flip_ion();
        }
        (origin, outcome, arrival)
    }
}

/// Simulates `n_attempts` photon-generation attempts with the settings
/// cycled round-robin, returning every click and a summary.
pub fn run_trials(
    config: &ExperimentConfig,
    n_attempts: u64,
) -> Result<(Vec<ClickRecord>, TrialSummary)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(TRIALS_STREAM);

    let sampler = ClickSampler::new(config);
    let settings = MeasurementSetting::all();
    let mut records = Vec::new();
    let mut signal_clicks = 0u64;

    let mut attempt = 0u64;
    while attempt < n_attempts {
        let Some(skip) = geometric_skip(&mut rng, sampler.p_click) else { break };
        let click_at = match attempt.checked_add(skip) {
            Some(idx) if idx < n_attempts => idx,
            _ => break,
        };
        let setting = settings[(click_at % 9) as usize];
        let (origin, outcome, arrival_time_s) = sampler.draw(&mut rng, setting);
        if origin == ClickOrigin::Signal {
            signal_clicks += 1;
        }
        records.push(ClickRecord { attempt_index: click_at, arrival_time_s, origin, setting, outcome });
        attempt = click_at + 1;
    }

    let clicks = records.len() as u64;
    let elapsed_s = n_attempts as f64 * config.sequence.loop_period_s();
    let summary = TrialSummary {
        attempts: n_attempts,
        clicks,
        signal_clicks,
        background_clicks: clicks - signal_clicks,
        elapsed_s,
        click_rate_cps: clicks as f64 / elapsed_s,
        signal_rate_cps: signal_clicks as f64 / elapsed_s,
        background_fraction: if clicks > 0 {
            (clicks - signal_clicks) as f64 / clicks as f64
        } else {
            0.0
        },
    };
    Ok((records, summary))
}

/// Ground-truth bookkeeping of a synthetic tomography run.
#[derive(Debug, Clone, Serialize)]
pub struct SynthesisSummary {
    pub attempts: u64,
    pub signal_events: u64,
    pub background_events: u64,
    /// Background fraction actually realized in the counts.
    pub background_fraction: f64,
}

/// Collects clicks setting by setting until each of the nine settings has
/// `target_events_per_setting` events, distributing outcomes through the
/// Born rule for signal and uniformly for background.
pub fn synth_tomography_run(config: &ExperimentConfig) -> Result<(OutcomeCounts, SynthesisSummary)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(SYNTH_STREAM);

    let sampler = ClickSampler::new(config);
    if sampler.p_click <= 0.0 {
        return Err(Error::validation(
            "experiment config",
            "zero click probability cannot reach the per-setting event target",
        ));
    }
    let mut counts = OutcomeCounts::zeros();
    let mut attempts = 0u64;
    let mut signal_events = 0u64;
    for setting in MeasurementSetting::all() {
        let mut collected = 0;
        while collected < config.target_events_per_setting {
            let skip = geometric_skip(&mut rng, sampler.p_click).expect("positive click probability");
            attempts = attempts.saturating_add(skip + 1);
            let (origin, outcome, _) = sampler.draw(&mut rng, setting);
            if origin == ClickOrigin::Signal {
                signal_events += 1;
            }
            counts.add(setting, outcome, 1);
            collected += 1;
        }
    }
    let total = counts.total();
    let summary = SynthesisSummary {
        attempts,
        signal_events,
        background_events: total - signal_events,
        background_fraction: (total - signal_events) as f64 / total as f64,
    };
    Ok((counts, summary))
}

/// Binned click-arrival histogram over the detection window.
#[derive(Debug, Clone, Serialize)]
pub struct ClickHistogram {
    pub bin_width_s: f64,
    pub window_s: f64,
    pub counts: Vec<u64>,
}

impl ClickHistogram {
    /// CSV rows `bin_start_s,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_s,count\n");
        for (k, n) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:.9},{}\n", k as f64 * self.bin_width_s, n));
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histograms arrival times into bins of `bin_width_s` covering the window.
pub fn histogram(records: &[ClickRecord], bin_width_s: f64, window_s: f64) -> Result<ClickHistogram> {
    if bin_width_s <= 0.0 || window_s <= 0.0 {
        return Err(Error::validation("histogram", "bin width and window must be positive"));
    }
    let ratio = window_s / bin_width_s;
    // Exact divisions must not gain a bin to float fuzz.
    let bins = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() }
        .max(1.0) as usize;
    let mut counts = vec![0u64; bins];
    for record in records {
        let k = ((record.arrival_time_s / bin_width_s) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(ClickHistogram { bin_width_s, window_s, counts })
}

/// Everything one simulated experiment produces, both raw and reconstructed.
#[derive(Debug, Clone, Serialize)]
pub struct EndToEndReport {
    pub attempt_rate_hz: f64,
    pub trial_summary: TrialSummary,
    pub histogram: ClickHistogram,
    pub counts: OutcomeCounts,
    pub synthesis: SynthesisSummary,
    pub reconstruction: TomographyResult,
    pub metrics: MetricReport,
    pub bootstrap: BootstrapReport,
    pub analytic: NoisyStatePrediction,
    /// Reconstructed minus analytic maximally-entangled fidelity.
    pub fidelity_difference: f64,
}

/// Full pipeline: click-rate trials, synthetic tomography counts,
/// maximum-likelihood reconstruction with bootstrap error bars, and the
/// analytic background-model prediction for comparison.
pub fn end_to_end(config: &ExperimentConfig) -> Result<EndToEndReport> {
    config.validate()?;
    let (records, trial_summary) = run_trials(config, config.n_attempts)?;
    let hist = histogram(&records, config.detection_window_s / 30.0, config.detection_window_s)?;
    let (counts, synthesis) = synth_tomography_run(config)?;
    let reconstruction = mle_reconstruct(&counts, &MleConfig::default())?;
    let metrics = metric_report(&reconstruction.rho)?;
    let boot = bootstrap(&counts, config.bootstrap_replicas, config.rng_seed)?;

    let bell = qstate::ideal_ion_photon_state().density();
    let model = if qstate::fidelity_pure(&config.true_state, &qstate::ideal_ion_photon_state())
        > 1.0 - 1e-9
    {
        NoiseModel::Model1
    } else {
        NoiseModel::Model2
    };
    let base = if model == NoiseModel::Model1 { &bell } else { &config.true_state };
    let analytic = linkmodel::predict_fidelity(model, base, &config.background_model())?;

    Ok(EndToEndReport {
        attempt_rate_hz: config.attempt_rate_hz(),
        fidelity_difference: metrics.fidelity_max_ent - analytic.predicted_fidelity,
        trial_summary,
        histogram: hist,
        counts,
        synthesis,
        reconstruction,
        metrics,
        bootstrap: boot,
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity_pure, ideal_ion_photon_state};
    use approx::assert_relative_eq;

    #[test]
    fn default_sequence_timing() {
        let seq = build_default_sequence();
        seq.validate().unwrap();
        assert_relative_eq!(seq.loop_period_s(), 453e-6, max_relative = 1e-12);
        let rate = seq.attempt_rate_hz();
        assert!((rate - 2207.5).abs() < 0.1, "attempt rate {rate}");

        // Pulse durations plus wait and window close the 453 us loop, and
        // the wait leaves room for the 247 us fiber travel.
        let wait = seq.segments.iter().find(|s| s.name.contains("wait")).unwrap();
        assert_relative_eq!(wait.duration_s, 453e-6 - (50e-6 + 60e-6 + 30e-6 + 30e-6), epsilon = 1e-12);
        assert!(wait.duration_s >= 247e-6);
    }

    #[test]
    fn pulses_only_loop_rate() {
        let seq = PulseSequence {
            segments: vec![
                Segment::new("doppler cooling", 50e-6),
                Segment::new("optical pumping", 60e-6),
                Segment::new("raman", 30e-6),
            ],
            loop_start_index: 0,
            detection_segment_index: 2,
            on_click: vec![],
        };
        assert!((seq.attempt_rate_hz() - 7142.9).abs() < 1.0);
    }

    #[test]
    fn sequence_validation() {
        let mut seq = build_default_sequence();
        seq.segments[0].duration_s = 0.0;
        assert!(seq.validate().is_err());

        let mut seq = build_default_sequence();
        seq.detection_segment_index = 0; // before the loop
        assert!(seq.validate().is_err());
    }

    fn quiet_config(p: f64, bg_cps: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            click_probability_per_attempt: p,
            background_rate_cps: bg_cps,
            target_events_per_setting: 1000,
            n_attempts: 1_000_000,
            bootstrap_replicas: 10,
            rng_seed: seed,
            ..ExperimentConfig::paper_50km(seed)
        }
    }

    #[test]
    fn run_trials_reproduces_click_rate() {
        let config = quiet_config(5.3e-4, 0.0, 5);
        let (records, summary) = run_trials(&config, 10_000_000).unwrap();
        assert_eq!(summary.clicks, records.len() as u64);
        assert!(
            (summary.click_rate_cps - 1.17).abs() < 0.05,
            "click rate {} cps",
            summary.click_rate_cps
        );
        assert_eq!(summary.background_clicks, 0);
    }

    #[test]
    fn run_trials_empty_when_silent() {
        let config = quiet_config(0.0, 0.0, 5);
        let (records, summary) = run_trials(&config, 100_000).unwrap();
        assert!(records.is_empty());
        assert_eq!(summary.clicks, 0);
        assert_eq!(summary.background_fraction, 0.0);
    }

    #[test]
    fn run_trials_background_fraction() {
        // Per-setting signal 2.65e-4 against 2 cps / 30 us darks: 18.5%.
        let config = quiet_config(2.65e-4, 2.0, 6);
        let (_, summary) = run_trials(&config, 40_000_000).unwrap();
        assert!(
            (summary.background_fraction - 0.185).abs() < 0.01,
            "background fraction {}",
            summary.background_fraction
        );
    }

    #[test]
    fn run_trials_total_click_probability() {
        // Empirical click probability converges to p + (1-p)*bg.
        let config = quiet_config(4e-4, 3.0, 7);
        let n = 20_000_000u64;
        let (_, summary) = run_trials(&config, n).unwrap();
        let p = 4e-4 + (1.0 - 4e-4) * 3.0 * 30e-6;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            ((summary.clicks as f64) - n as f64 * p).abs() < 5.0 * sigma,
            "clicks {} vs expected {}",
            summary.clicks,
            n as f64 * p
        );
    }

    #[test]
    fn run_trials_deterministic() {
        let config = quiet_config(3e-4, 2.0, 99);
        let (r1, s1) = run_trials(&config, 2_000_000).unwrap();
        let (r2, s2) = run_trials(&config, 2_000_000).unwrap();
        assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
        assert_eq!(serde_json::to_string(&s1).unwrap(), serde_json::to_string(&s2).unwrap());
    }

    #[test]
    fn histogram_totals_and_flat_background() {
        let empty = histogram(&[], 1e-6, 30e-6).unwrap();
        assert_eq!(empty.total(), 0);
        assert_eq!(empty.counts.len(), 30);

        // Background-only run: flat within 5 sigma Poisson bands.
        let mut config = quiet_config(0.0, 30.0, 8);
        config.n_attempts = 30_000_000;
        let (records, _) = run_trials(&config, config.n_attempts).unwrap();
        let hist = histogram(&records, 3e-6, 30e-6).unwrap();
        assert_eq!(hist.total(), records.len() as u64);
        let expected = records.len() as f64 / hist.counts.len() as f64;
        for &n in &hist.counts {
            assert!(
                (n as f64 - expected).abs() < 5.0 * expected.sqrt(),
                "bin count {n} vs flat expectation {expected}"
            );
        }
    }

    #[test]
    fn histogram_recovers_wavepacket_shape() {
        let mut config = quiet_config(5e-3, 0.0, 9);
        config.n_attempts = 10_000_000;
        let (records, _) = run_trials(&config, config.n_attempts).unwrap();
        let hist = histogram(&records, 3e-6, 30e-6).unwrap();
        let total = hist.total() as f64;
        for (k, &n) in hist.counts.iter().enumerate() {
            // Integrate the raised-cosine density over the bin.
            let (a, b) = (k as f64 * 3e-6, (k as f64 + 1.0) * 3e-6);
            let cdf = |t: f64| {
                t / 30e-6 - (std::f64::consts::TAU * t / 30e-6).sin() / std::f64::consts::TAU
            };
            let expected = total * (cdf(b) - cdf(a));
            let sigma = (expected.max(1.0)).sqrt();
            assert!(
                (n as f64 - expected).abs() < 5.0 * sigma,
                "bin {k}: {n} vs {expected:.1}"
            );
        }
    }

    #[test]
    fn synth_round_trip_noiseless() {
        let mut config = quiet_config(5e-3, 0.0, 10);
        config.target_events_per_setting = 10_000;
        let (counts, summary) = synth_tomography_run(&config).unwrap();
        assert_eq!(summary.background_events, 0);
        for s in MeasurementSetting::all() {
            assert_eq!(counts.setting_total(s), 10_000);
        }
        let result = mle_reconstruct(&counts, &MleConfig::default()).unwrap();
        let f = fidelity_pure(&result.rho, &ideal_ion_photon_state());
        assert!(f > 0.999, "round-trip fidelity {f}");
    }

    #[test]
    fn synth_background_fraction_matches_analytic() {
        let mut config = quiet_config(2.65e-4, 2.0, 11);
        config.target_events_per_setting = 20_000;
        let (_, summary) = synth_tomography_run(&config).unwrap();
        let analytic = linkmodel::background_fraction(&config.background_model()).unwrap();
        // 3 sigma binomial band on the realized fraction.
        let n = (config.target_events_per_setting * 9) as f64;
        let sigma = (analytic * (1.0 - analytic) / n).sqrt();
        assert!(
            (summary.background_fraction - analytic).abs() < 3.0 * sigma + 1e-4,
            "fraction {} vs analytic {}",
            summary.background_fraction,
            analytic
        );
    }

    #[test]
    fn ion_readout_error_decorrelates_z_basis() {
        let mut config = quiet_config(5e-3, 0.0, 12);
        config.ion_readout_error = 0.5; // fully scrambled readout
        config.target_events_per_setting = 20_000;
        let (counts, _) = synth_tomography_run(&config).unwrap();
        let zz = MeasurementSetting { photon: crate::tomography::PauliBasis::Z, ion: crate::tomography::PauliBasis::Z };
        // Perfect correlation would leave PM/MP empty; a scrambled readout
        // fills them to ~1/4 each.
        let pm = counts.get(zz, Outcome::PM) as f64;
        let total = counts.setting_total(zz) as f64;
        assert!((pm / total - 0.25).abs() < 0.02, "PM fraction {}", pm / total);
    }

    #[test]
    fn end_to_end_deterministic_and_consistent() {
        let mut config = quiet_config(2.65e-4, 2.0, 33);
        config.target_events_per_setting = 3000;
        config.n_attempts = 2_000_000;
        config.bootstrap_replicas = 8;
        let report1 = end_to_end(&config).unwrap();
        let report2 = end_to_end(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&report1).unwrap(),
            serde_json::to_string(&report2).unwrap()
        );
        assert!(
            report1.fidelity_difference.abs() < 0.03,
            "simulated vs analytic fidelity differ by {}",
            report1.fidelity_difference
        );
        assert_eq!(report1.histogram.total(), report1.trial_summary.clicks);
    }
}

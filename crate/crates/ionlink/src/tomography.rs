//! 9-setting / 36-outcome two-qubit tomography: forward measurement model,
//! linear inversion, iterative maximum-likelihood reconstruction, and
//! Monte-Carlo bootstrap error bars.
//!
//! Settings pair a photon Pauli basis (Z = H/V, X = D/A, Y = R/L) with an ion
//! Pauli basis. Outcomes are labelled (photon sign, ion sign) in the order
//! ++, +-, -+, --; flat probability/count vectors are indexed by
//! `4 * setting + outcome` with settings in photon-major order.

use std::sync::OnceLock;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::par::map_indexed;
use crate::qstate::{self, kron, metric_report, DensityMatrix, Mat2, Mat4, MetricReport, C64};
use crate::{Error, Result};

/// Pauli measurement basis for one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliBasis {
    Z,
    X,
    Y,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::Z, PauliBasis::X, PauliBasis::Y];

    fn index(self) -> usize {
        match self {
            PauliBasis::Z => 0,
            PauliBasis::X => 1,
            PauliBasis::Y => 2,
        }
    }

    /// The Pauli operator this basis diagonalizes.
    fn pauli_matrix(self) -> Mat2 {
        match self {
            PauliBasis::X => qstate::pauli(0),
            PauliBasis::Y => qstate::pauli(1),
            PauliBasis::Z => qstate::pauli(2),
        }
    }

    /// Normalized +1/-1 eigenvector of the corresponding Pauli operator.
    fn eigenvector(self, plus: bool) -> Vector2<C64> {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match (self, plus) {
            (PauliBasis::Z, true) => Vector2::new(one, zero),
            (PauliBasis::Z, false) => Vector2::new(zero, one),
            (PauliBasis::X, true) => Vector2::new(h, h),
            (PauliBasis::X, false) => Vector2::new(h, -h),
            (PauliBasis::Y, true) => Vector2::new(h, i * h),
            (PauliBasis::Y, false) => Vector2::new(h, -i * h),
        }
    }
}

/// One joint measurement configuration (photon basis, ion basis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub photon: PauliBasis,
    pub ion: PauliBasis,
}

impl MeasurementSetting {
    /// All nine settings in canonical (photon-major) order.
    pub fn all() -> [MeasurementSetting; 9] {
        let mut out = [MeasurementSetting { photon: PauliBasis::Z, ion: PauliBasis::Z }; 9];
        let mut k = 0;
        for photon in PauliBasis::ALL {
            for ion in PauliBasis::ALL {
                out[k] = MeasurementSetting { photon, ion };
                k += 1;
            }
        }
        out
    }

    /// Canonical index in 0..9.
    pub fn index(self) -> usize {
        3 * self.photon.index() + self.ion.index()
    }
}

impl std::fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "photon {:?} x ion {:?}", self.photon, self.ion)
    }
}

/// Joint outcome, labelled (photon sign, ion sign).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    PP,
    PM,
    MP,
    MM,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::PP, Outcome::PM, Outcome::MP, Outcome::MM];

    pub fn index(self) -> usize {
        match self {
            Outcome::PP => 0,
            Outcome::PM => 1,
            Outcome::MP => 2,
            Outcome::MM => 3,
        }
    }

    pub fn photon_plus(self) -> bool {
        matches!(self, Outcome::PP | Outcome::PM)
    }

    pub fn ion_plus(self) -> bool {
        matches!(self, Outcome::PP | Outcome::MP)
    }

    /// The outcome with the ion sign toggled (readout bit flip).
    pub fn flip_ion(self) -> Outcome {
        match self {
            Outcome::PP => Outcome::PM,
            Outcome::PM => Outcome::PP,
            Outcome::MP => Outcome::MM,
            Outcome::MM => Outcome::MP,
        }
    }
}

/// Flat index into 36-element probability/count vectors.
pub fn flat_index(setting: MeasurementSetting, outcome: Outcome) -> usize {
    4 * setting.index() + outcome.index()
}

fn rank1(v: &Vector2<C64>) -> Mat2 {
    v * v.adjoint()
}

/// Rank-1 ⊗ rank-1 projector for one setting and outcome.
pub fn projector(setting: MeasurementSetting, outcome: Outcome) -> Mat4 {
    let ion = rank1(&setting.ion.eigenvector(outcome.ion_plus()));
    let photon = rank1(&setting.photon.eigenvector(outcome.photon_plus()));
    kron(&ion, &photon)
}

/// All 36 projectors in flat-index order, built once.
fn projector_table() -> &'static [Mat4; 36] {
    static TABLE: OnceLock<[Mat4; 36]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Mat4::zeros(); 36];
        for setting in MeasurementSetting::all() {
            for outcome in Outcome::ALL {
                t[flat_index(setting, outcome)] = projector(setting, outcome);
            }
        }
        t
    })
}

/// Born probabilities Tr(ρΠ) for all 36 (setting, outcome) pairs.
pub fn born_probabilities(rho: &DensityMatrix) -> [f64; 36] {
    let mut p = [0.0; 36];
    for (k, proj) in projector_table().iter().enumerate() {
        p[k] = (rho.matrix() * proj).trace().re.max(0.0);
    }
    p
}

// ---------------------------------------------------------------------------
// Counts
// ---------------------------------------------------------------------------

/// Event counts for the 36 (setting, outcome) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    counts: [u64; 36],
}

impl OutcomeCounts {
    pub fn zeros() -> Self {
        OutcomeCounts { counts: [0; 36] }
    }

    pub fn from_flat(counts: [u64; 36]) -> Result<Self> {
        let c = OutcomeCounts { counts };
        if c.total() == 0 {
            return Err(Error::validation("outcome counts", "all 36 entries are zero"));
        }
        Ok(c)
    }

    pub fn get(&self, setting: MeasurementSetting, outcome: Outcome) -> u64 {
        self.counts[flat_index(setting, outcome)]
    }

    pub fn set(&mut self, setting: MeasurementSetting, outcome: Outcome, value: u64) {
        self.counts[flat_index(setting, outcome)] = value;
    }

    pub fn add(&mut self, setting: MeasurementSetting, outcome: Outcome, value: u64) {
        self.counts[flat_index(setting, outcome)] += value;
    }

    pub fn flat(&self) -> &[u64; 36] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn setting_total(&self, setting: MeasurementSetting) -> u64 {
        let base = 4 * setting.index();
        self.counts[base..base + 4].iter().sum()
    }
}

#[derive(Serialize, Deserialize)]
struct SettingCountsRepr {
    photon: PauliBasis,
    ion: PauliBasis,
    counts: [u64; 4],
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    settings: Vec<SettingCountsRepr>,
}

impl Serialize for OutcomeCounts {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let settings = MeasurementSetting::all()
            .iter()
            .map(|s| SettingCountsRepr {
                photon: s.photon,
                ion: s.ion,
                counts: [
                    self.get(*s, Outcome::PP),
                    self.get(*s, Outcome::PM),
                    self.get(*s, Outcome::MP),
                    self.get(*s, Outcome::MM),
                ],
            })
            .collect();
        CountsRepr { settings }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OutcomeCounts {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CountsRepr::deserialize(deserializer)?;
        if repr.settings.len() != 9 {
            return Err(D::Error::custom(format!(
                "expected 9 settings, got {}",
                repr.settings.len()
            )));
        }
        let mut seen = [false; 9];
        let mut out = OutcomeCounts::zeros();
        for entry in &repr.settings {
            let setting = MeasurementSetting { photon: entry.photon, ion: entry.ion };
            if seen[setting.index()] {
                return Err(D::Error::custom(format!("duplicate setting: {setting}")));
            }
            seen[setting.index()] = true;
            for (outcome, &n) in Outcome::ALL.iter().zip(&entry.counts) {
                out.set(setting, *outcome, n);
            }
        }
        if out.total() == 0 {
            return Err(D::Error::custom("all 36 counts are zero"));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Linear inversion
// ---------------------------------------------------------------------------

/// Per-setting frequencies and weights extracted from counts.
fn frequencies(counts: &OutcomeCounts) -> Result<([f64; 36], [f64; 9])> {
    let mut f = [0.0; 36];
    let mut w = [0.0; 9];
    for setting in MeasurementSetting::all() {
        let s = setting.index();
        let total = counts.setting_total(setting);
        if total == 0 {
            return Err(Error::InsufficientData { setting: setting.to_string() });
        }
        w[s] = total as f64;
        for outcome in Outcome::ALL {
            f[flat_index(setting, outcome)] = counts.get(setting, outcome) as f64 / total as f64;
        }
    }
    Ok((f, w))
}

fn sign(plus: bool) -> f64 {
    if plus {
        1.0
    } else {
        -1.0
    }
}

/// Least-squares linear reconstruction from per-setting frequencies:
/// Hermitian and unit trace by construction, but possibly not PSD.
/// Single-qubit marginals are averaged over the three settings that
/// measure them, which is the least-squares solution for this design.
fn linear_inversion_from_frequencies(f: &[f64; 36]) -> Mat4 {
    let mut corr = [[0.0; 3]; 3]; // [ion axis][photon axis]
    let mut ion_marginal = [0.0; 3];
    let mut photon_marginal = [0.0; 3];
    for setting in MeasurementSetting::all() {
        let (a, b) = (setting.ion.index(), setting.photon.index());
        for outcome in Outcome::ALL {
            let freq = f[flat_index(setting, outcome)];
            let (si, sp) = (sign(outcome.ion_plus()), sign(outcome.photon_plus()));
            corr[a][b] += si * sp * freq;
            ion_marginal[a] += si * freq / 3.0;
            photon_marginal[b] += sp * freq / 3.0;
        }
    }

    let id = Mat2::identity();
    let mut m = kron(&id, &id);
    for a in PauliBasis::ALL {
        m += kron(&a.pauli_matrix(), &id) * C64::new(ion_marginal[a.index()], 0.0);
        m += kron(&id, &a.pauli_matrix()) * C64::new(photon_marginal[a.index()], 0.0);
        for b in PauliBasis::ALL {
            m += kron(&a.pauli_matrix(), &b.pauli_matrix())
                * C64::new(corr[a.index()][b.index()], 0.0);
        }
    }
    m * C64::new(0.25, 0.0)
}

/// Linear reconstruction from counts; Hermitian, unit trace, possibly non-PSD.
pub fn linear_inversion(counts: &OutcomeCounts) -> Result<Mat4> {
    let (f, _) = frequencies(counts)?;
    Ok(linear_inversion_from_frequencies(&f))
}

/// Projection onto physical states: eigendecompose, clamp negative
/// eigenvalues to zero, renormalize the trace.
pub fn psd_project(m: &Mat4) -> Result<DensityMatrix> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let (values, vectors) = qstate::hermitian_eigen_desc(&herm);
    let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Err(Error::validation("psd projection", "matrix has no positive spectrum"));
    }
    let mut out = Mat4::zeros();
    for (lambda, v) in clamped.iter().zip(&vectors) {
        out += v * v.adjoint() * C64::new(lambda / total, 0.0);
    }
    DensityMatrix::sanitize(out)
}

// ---------------------------------------------------------------------------
// Maximum likelihood
// ---------------------------------------------------------------------------

/// Stopping parameters for the RρR iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MleConfig {
    pub max_iterations: usize,
    /// Relative log-likelihood gain below which the iteration stops.
    pub tolerance: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig { max_iterations: 5000, tolerance: 1e-10 }
    }
}

/// Result of a maximum-likelihood reconstruction.
#[derive(Debug, Clone, Serialize)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each iteration; non-decreasing.
    #[serde(skip_serializing)]
    pub ll_history: Vec<f64>,
}

/// Mixing weight of I/4 in the seed, keeping it full rank so the RρR
/// iteration can repopulate directions the linear seed lost.
const SEED_MIX: f64 = 1e-9;
/// Probability floor guarding the f/p ratios.
const MIN_PROBABILITY: f64 = 1e-15;

fn log_likelihood(f: &[f64; 36], w: &[f64; 9], p: &[f64; 36]) -> f64 {
    let mut ll = 0.0;
    for (s, &ws) in w.iter().enumerate() {
        for o in 0..4 {
            let k = 4 * s + o;
            if f[k] > 0.0 {
                ll += ws * f[k] * p[k].max(MIN_PROBABILITY).ln();
            }
        }
    }
    ll
}

/// Core RρR fixed-point iteration on per-setting frequencies `f` with
/// setting weights `w`, seeded from the PSD-projected linear inversion.
fn mle_core(f: &[f64; 36], w: &[f64; 9], config: &MleConfig) -> Result<TomographyResult> {
    let projectors = projector_table();
    let seed = psd_project(&linear_inversion_from_frequencies(f))?;
    let mut rho = DensityMatrix::sanitize(
        seed.matrix() * C64::new(1.0 - SEED_MIX, 0.0)
            + Mat4::identity() * C64::new(SEED_MIX / 4.0, 0.0),
    )?;

    let total_weight: f64 = w.iter().sum();
    let probs = |rho: &DensityMatrix| -> [f64; 36] {
        let mut p = [0.0; 36];
        for (k, proj) in projectors.iter().enumerate() {
            p[k] = (rho.matrix() * proj).trace().re.max(0.0);
        }
        p
    };

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut p = probs(&rho);
    let mut ll = log_likelihood(f, w, &p);
    history.push(ll);

    while iterations < config.max_iterations {
        iterations += 1;

        let mut r = Mat4::zeros();
        for (s, &ws) in w.iter().enumerate() {
            for o in 0..4 {
                let k = 4 * s + o;
                if f[k] > 0.0 {
                    let ratio = ws * f[k] / p[k].max(MIN_PROBABILITY);
                    r += projectors[k] * C64::new(ratio / total_weight, 0.0);
                }
            }
        }
        let next = DensityMatrix::sanitize(r * rho.matrix() * r)?;
        let p_next = probs(&next);
        let ll_next = log_likelihood(f, w, &p_next);
        let gain = ll_next - ll;

        if gain <= 0.0 {
            // Numerical floor reached: keep the previous (no worse) state.
            converged = true;
            break;
        }
        rho = next;
        p = p_next;
        ll = ll_next;
        history.push(ll);
        if gain < config.tolerance * (1.0 + ll.abs()) {
            converged = true;
            break;
        }
    }

    Ok(TomographyResult { rho, log_likelihood: ll, iterations, converged, ll_history: history })
}

/// Maximum-likelihood state reconstruction from counts.
pub fn mle_reconstruct(counts: &OutcomeCounts, config: &MleConfig) -> Result<TomographyResult> {
    let (f, w) = frequencies(counts)?;
    mle_core(&f, &w, config)
}

/// Maximum-likelihood fixed point for exact outcome probabilities
/// (infinite-statistics limit; every setting weighted equally).
pub fn mle_from_probabilities(p: &[f64; 36], config: &MleConfig) -> Result<TomographyResult> {
    let mut f = [0.0; 36];
    for s in 0..9 {
        let total: f64 = (0..4).map(|o| p[4 * s + o]).sum();
        if total <= 0.0 {
            return Err(Error::InsufficientData {
                setting: MeasurementSetting::all()[s].to_string(),
            });
        }
        for o in 0..4 {
            f[4 * s + o] = (p[4 * s + o] / total).max(0.0);
        }
    }
    mle_core(&f, &[1.0; 9], config)
}

// ---------------------------------------------------------------------------
// Synthetic counts
// ---------------------------------------------------------------------------

/// Multinomial draw of `events_per_setting` events for each of the nine
/// settings from the Born distribution of `rho`, via conditional binomials.
pub fn sample_counts(rho: &DensityMatrix, events_per_setting: u64, seed: u64) -> OutcomeCounts {
    let p = born_probabilities(rho);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = OutcomeCounts::zeros();
    for setting in MeasurementSetting::all() {
        let s = setting.index();
        let total: f64 = (0..4).map(|o| p[4 * s + o]).sum();
        let mut remaining = events_per_setting;
        let mut tail = total;
        for outcome in Outcome::ALL {
            if remaining == 0 {
                break;
            }
            if outcome == Outcome::MM {
                counts.set(setting, outcome, remaining);
                break;
            }
            let pk = p[flat_index(setting, outcome)];
            let cond = if tail > 0.0 { (pk / tail).clamp(0.0, 1.0) } else { 0.0 };
            let draw = Binomial::new(remaining, cond).expect("valid binomial").sample(&mut rng);
            counts.set(setting, outcome, draw);
            remaining -= draw;
            tail = (tail - pk).max(0.0);
        }
    }
    counts
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

/// Mean and one-standard-deviation width (sample deviation, n-1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

fn stat_of(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Stat { mean, std: var.sqrt() }
}

/// Bootstrap uncertainty report over `replicas` Poisson-resampled count sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicas: usize,
    pub used: usize,
    pub dropped: usize,
    pub fidelity_max_ent: Stat,
    pub concurrence: Stat,
    pub purity: Stat,
    pub chsh: Stat,
}

fn bootstrap_replica(means: &[f64; 36], seed: u64, replica: usize) -> Option<MetricReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    let mut flat = [0u64; 36];
    for (slot, &mean) in flat.iter_mut().zip(means) {
        if mean > 0.0 {
            let draw: f64 = Poisson::new(mean).expect("positive mean").sample(&mut rng);
            *slot = draw as u64;
        }
    }
    let counts = OutcomeCounts::from_flat(flat).ok()?;
    let result = mle_reconstruct(&counts, &MleConfig::default()).ok()?;
    metric_report(&result.rho).ok()
}

fn finalize_bootstrap(
    replicas: usize,
    results: Vec<Option<MetricReport>>,
) -> Result<BootstrapReport> {
    let used: Vec<MetricReport> = results.into_iter().flatten().collect();
    let dropped = replicas - used.len();
    if dropped * 10 > replicas {
        return Err(Error::TooManyReplicaFailures { failed: dropped, total: replicas });
    }
    let collect =
        |f: fn(&MetricReport) -> f64| -> Stat { stat_of(&used.iter().map(f).collect::<Vec<_>>()) };
    Ok(BootstrapReport {
        replicas,
        used: used.len(),
        dropped,
        fidelity_max_ent: collect(|m| m.fidelity_max_ent),
        concurrence: collect(|m| m.concurrence),
        purity: collect(|m| m.purity),
        chsh: collect(|m| m.chsh),
    })
}

fn count_means(counts: &OutcomeCounts) -> [f64; 36] {
    let mut means = [0.0; 36];
    for (m, &n) in means.iter_mut().zip(counts.flat()) {
        *m = n as f64;
    }
    means
}

/// Monte-Carlo bootstrap: each replica redraws all 36 counts from Poisson
/// laws with means equal to the observed counts, re-runs the reconstruction,
/// and recomputes the metrics. Replica RNG streams are derived from
/// (seed, replica index) and results gathered in replica order, so the
/// report does not depend on scheduling. Failed replicas are dropped and
/// reported; more than 10% failures is an error.
pub fn bootstrap(counts: &OutcomeCounts, replicas: usize, seed: u64) -> Result<BootstrapReport> {
    if replicas < 2 {
        return Err(Error::validation("bootstrap replicas", "need at least 2"));
    }
    let means = count_means(counts);
    let results = map_indexed(replicas, |r| bootstrap_replica(&means, seed, r));
    finalize_bootstrap(replicas, results)
}

/// Sequential reference path for [`bootstrap`]; produces identical reports.
/// Public so the benchmark suite can compare the two.
pub fn bootstrap_serial(
    counts: &OutcomeCounts,
    replicas: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    if replicas < 2 {
        return Err(Error::validation("bootstrap replicas", "need at least 2"));
    }
    let means = count_means(counts);
    let results = (0..replicas).map(|r| bootstrap_replica(&means, seed, r)).collect();
    finalize_bootstrap(replicas, results)
}

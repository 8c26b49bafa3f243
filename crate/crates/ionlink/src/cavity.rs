//! Cavity-QED parameter calculator for a symmetric near-concentric cavity.
//!
//! All internal rates are angular (rad/s); file and table interfaces carry
//! ordinary frequencies in Hz with the 2π conversion done explicitly here.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Fraction of P_3/2 spontaneous decay that goes to D_5/2 (the 854 nm
/// branch) in ⁴⁰Ca⁺. Literature value; see e.g. M. Hettrich et al.,
/// Phys. Rev. Lett. 115, 143003 (2015), which gives 0.0587(2).
pub const P32_D52_BRANCHING: f64 = 0.0587;

/// Symmetric two-mirror cavity geometry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub length_m: f64,
    /// Radius of curvature of both (identical) mirrors.
    pub roc_m: f64,
}

impl CavityGeometry {
    pub fn new(length_m: f64, roc_m: f64) -> Result<Self> {
        let g = CavityGeometry { length_m, roc_m };
        g.validate()?;
        Ok(g)
    }

    /// Stability: 0 < l < 2·ROC (near-concentric allowed).
    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.roc_m > 0.0 && self.length_m < 2.0 * self.roc_m) {
            return Err(Error::validation(
                "cavity geometry",
                format!("unstable: length {} m, roc {} m", self.length_m, self.roc_m),
            ));
        }
        Ok(())
    }
}

/// Mirror transmissions and combined scatter/absorption loss, in ppm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MirrorSet {
    pub t1_ppm: f64,
    pub t2_ppm: f64,
    pub scatter_absorption_ppm: f64,
}

impl MirrorSet {
    pub fn validate(&self) -> Result<()> {
        if self.t1_ppm <= 0.0 || self.t2_ppm <= 0.0 || self.scatter_absorption_ppm <= 0.0 {
            return Err(Error::validation("mirror set", "all losses must be positive"));
        }
        Ok(())
    }

    /// Total round-trip loss in absolute units.
    pub fn total_loss(&self) -> f64 {
        (self.t1_ppm + self.t2_ppm + self.scatter_absorption_ppm) * 1e-6
    }
}

/// Atomic transition the cavity is resonant with.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AtomLine {
    pub wavelength_m: f64,
    /// Half width of the upper level, ordinary frequency (Hz).
    pub gamma_hz: f64,
    /// Branching fraction of the decay into this line.
    pub branching: f64,
}

impl AtomLine {
    pub fn validate(&self) -> Result<()> {
        if self.wavelength_m <= 0.0 || self.gamma_hz <= 0.0 {
            return Err(Error::validation("atom line", "wavelength and gamma must be positive"));
        }
        if !(self.branching > 0.0 && self.branching <= 1.0) {
            return Err(Error::validation(
                "atom line",
                format!("branching {} outside (0, 1]", self.branching),
            ));
        }
        Ok(())
    }

    /// Half width in rad/s.
    pub fn gamma_angular(&self) -> f64 {
        std::f64::consts::TAU * self.gamma_hz
    }
}

/// Bichromatic Raman drive; all rates angular (rad/s).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RamanDrive {
    pub omega1: f64,
    pub omega2: f64,
    pub detuning: f64,
    /// Frequency splitting between the two drive components.
    pub splitting: f64,
}

impl RamanDrive {
    pub fn validate(&self) -> Result<()> {
        if self.detuning == 0.0 || self.detuning + self.splitting == 0.0 {
            return Err(Error::validation("raman drive", "drive components must be detuned"));
        }
        Ok(())
    }
}

/// Mode waist w₀ with w₀² = (λ/2π)·√(l(2·ROC - l)).
pub fn waist(geom: &CavityGeometry, wavelength_m: f64) -> Result<f64> {
    geom.validate()?;
    let l = geom.length_m;
    let w0_sq = wavelength_m / std::f64::consts::TAU * (l * (2.0 * geom.roc_m - l)).sqrt();
    Ok(w0_sq.sqrt())
}

/// Free spectral range c/(2l), Hz.
pub fn fsr(geom: &CavityGeometry) -> f64 {
    SPEED_OF_LIGHT / (2.0 * geom.length_m)
}

/// Finesse 2π / total loss.
pub fn finesse(mirrors: &MirrorSet) -> f64 {
    std::f64::consts::TAU / mirrors.total_loss()
}

/// Cavity linewidth, both as the full width 2κ in Hz and κ in rad/s.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Linewidth {
    /// Full width at half maximum, ordinary frequency: FSR/finesse.
    pub full_width_hz: f64,
    /// Half width at half maximum, angular.
    pub kappa_rad_s: f64,
}

pub fn linewidth(geom: &CavityGeometry, mirrors: &MirrorSet) -> Linewidth {
    let full_width_hz = fsr(geom) / finesse(mirrors);
    Linewidth { full_width_hz, kappa_rad_s: std::f64::consts::PI * full_width_hz }
}

/// Ringdown time τ = (finesse/π)·(l/c), seconds.
pub fn ringdown(geom: &CavityGeometry, mirrors: &MirrorSet) -> f64 {
    finesse(mirrors) / std::f64::consts::PI * geom.length_m / SPEED_OF_LIGHT
}

/// Maximum ion-cavity coupling rate, rad/s:
/// g = √(3·c·λ²·γ_partial / (π²·w₀²·l)) with γ_partial = branching·γ.
pub fn g_max(geom: &CavityGeometry, line: &AtomLine) -> Result<f64> {
    line.validate()?;
    let w0 = waist(geom, line.wavelength_m)?;
    let gamma_partial = line.branching * line.gamma_angular();
    let num = 3.0 * SPEED_OF_LIGHT * line.wavelength_m.powi(2) * gamma_partial;
    let den = std::f64::consts::PI.powi(2) * w0.powi(2) * geom.length_m;
    Ok((num / den).sqrt())
}

/// Cooperativity g²/(2κγ); all rates angular.
pub fn cooperativity(g_rad_s: f64, kappa_rad_s: f64, gamma_rad_s: f64) -> f64 {
    g_rad_s.powi(2) / (2.0 * kappa_rad_s * gamma_rad_s)
}

/// Probability that an intracavity photon leaves through the output mirror:
/// T₂/(T₁+T₂+losses).
pub fn p_out_max(mirrors: &MirrorSet) -> f64 {
    mirrors.t2_ppm / (mirrors.t1_ppm + mirrors.t2_ppm + mirrors.scatter_absorption_ppm)
}

/// Higher-order transverse mode spacing FSR·arccos(1 - l/ROC)/π, Hz.
/// For the near-concentric branch the arccos argument lies in (-1, 0).
pub fn transverse_mode_spacing(geom: &CavityGeometry) -> Result<f64> {
    geom.validate()?;
    let g = 1.0 - geom.length_m / geom.roc_m;
    Ok(fsr(geom) * g.acos() / std::f64::consts::PI)
}

/// Inverts (FSR, transverse mode spacing) into the symmetric geometry.
/// The Gouy phase arccos(1 - l/ROC) is a bijection of (0, π), so the
/// inversion is closed-form and unique for 0 < spacing < FSR.
pub fn geometry_from_spectrum(fsr_hz: f64, mode_spacing_hz: f64) -> Result<CavityGeometry> {
    if fsr_hz <= 0.0 {
        return Err(Error::validation("cavity spectrum", "FSR must be positive"));
    }
    if !(mode_spacing_hz > 0.0 && mode_spacing_hz < fsr_hz) {
        return Err(Error::validation(
            "cavity spectrum",
            format!(
                "no stable-cavity solution: mode spacing {mode_spacing_hz} Hz must lie strictly \
                 between 0 and the FSR {fsr_hz} Hz (planar through concentric branch)"
            ),
        ));
    }
    let length_m = SPEED_OF_LIGHT / (2.0 * fsr_hz);
    let gouy = std::f64::consts::PI * mode_spacing_hz / fsr_hz;
    let roc_m = length_m / (1.0 - gouy.cos());
    CavityGeometry::new(length_m, roc_m)
}

/// Total AC Stark shift Ω₁²/4Δ + Ω₂²/4(Δ+δ), rad/s.
pub fn ac_stark(drive: &RamanDrive) -> Result<f64> {
    drive.validate()?;
    Ok(drive.omega1.powi(2) / (4.0 * drive.detuning)
        + drive.omega2.powi(2) / (4.0 * (drive.detuning + drive.splitting)))
}

// ---------------------------------------------------------------------------
// File description and derived-parameter table
// ---------------------------------------------------------------------------

/// JSON description of one cavity system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CavityDescription {
    pub geometry: CavityGeometry,
    pub mirrors: MirrorSet,
    pub line: AtomLine,
}

impl CavityDescription {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.mirrors.validate()?;
        self.line.validate()
    }
}

/// All derived cavity parameters, frequencies in Hz unless suffixed.
#[derive(Debug, Clone, Serialize)]
pub struct CavityReport {
    pub waist_m: f64,
    pub fsr_hz: f64,
    pub transverse_mode_spacing_hz: f64,
    pub finesse: f64,
    /// Full linewidth 2κ as an ordinary frequency.
    pub linewidth_full_hz: f64,
    pub ringdown_s: f64,
    /// g_max as an ordinary frequency (divide the angular rate by 2π).
    pub g_max_hz: f64,
    pub cooperativity: f64,
    pub p_out_max: f64,
}

/// Computes the full derived-parameter table for one cavity description.
pub fn parameter_table(desc: &CavityDescription) -> Result<CavityReport> {
    desc.validate()?;
    let lw = linewidth(&desc.geometry, &desc.mirrors);
    let g = g_max(&desc.geometry, &desc.line)?;
    Ok(CavityReport {
        waist_m: waist(&desc.geometry, desc.line.wavelength_m)?,
        fsr_hz: fsr(&desc.geometry),
        transverse_mode_spacing_hz: transverse_mode_spacing(&desc.geometry)?,
        finesse: finesse(&desc.mirrors),
        linewidth_full_hz: lw.full_width_hz,
        ringdown_s: ringdown(&desc.geometry, &desc.mirrors),
        g_max_hz: g / std::f64::consts::TAU,
        cooperativity: cooperativity(g, lw.kappa_rad_s, desc.line.gamma_angular()),
        p_out_max: p_out_max(&desc.mirrors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn paper_geometry() -> CavityGeometry {
        CavityGeometry { length_m: 19.9057e-3, roc_m: 9.9841e-3 }
    }

    fn paper_mirrors() -> MirrorSet {
        MirrorSet { t1_ppm: 2.2, t2_ppm: 97.0, scatter_absorption_ppm: 17.0 }
    }

    // The independently measured total loss is 116 ppm; the rounded
    // per-mirror breakdown above sums to 116.2 ppm.
    fn mirrors_total_116() -> MirrorSet {
        MirrorSet { t1_ppm: 2.2, t2_ppm: 97.0, scatter_absorption_ppm: 16.8 }
    }

    fn paper_line() -> AtomLine {
        AtomLine { wavelength_m: 854e-9, gamma_hz: 11.45e6, branching: P32_D52_BRANCHING }
    }

    #[test]
    fn waist_values() {
        let w = waist(&paper_geometry(), 854e-9).unwrap();
        assert!((w - 12.31e-6).abs() < 0.01e-6, "waist {w}");

        // Confocal: w0^2 = (lambda/2pi) * l exactly.
        let confocal = CavityGeometry { length_m: 10e-3, roc_m: 10e-3 };
        let w = waist(&confocal, 854e-9).unwrap();
        assert_relative_eq!(w * w, 854e-9 / TAU * 10e-3, max_relative = 1e-12);

        // Concentric limit: waist collapses.
        let near = CavityGeometry { length_m: 2.0 * 10e-3 - 1e-9, roc_m: 10e-3 };
        assert!(waist(&near, 854e-9).unwrap() < 1e-6);

        let unstable = CavityGeometry { length_m: 20.1e-3, roc_m: 10e-3 };
        assert!(waist(&unstable, 854e-9).is_err());
    }

    #[test]
    fn waist_scales_as_sqrt_wavelength() {
        let g = paper_geometry();
        let w1 = waist(&g, 854e-9).unwrap();
        let w2 = waist(&g, 4.0 * 854e-9).unwrap();
        assert_relative_eq!(w2, 2.0 * w1, max_relative = 1e-12);
    }

    #[test]
    fn fsr_values() {
        assert_relative_eq!(fsr(&paper_geometry()), 7.530e9, max_relative = 1e-3);
        let huge = CavityGeometry { length_m: SPEED_OF_LIGHT / 2.0, roc_m: SPEED_OF_LIGHT };
        assert_relative_eq!(fsr(&huge), 1.0, max_relative = 1e-12);
        let doubled =
            CavityGeometry { length_m: 2.0 * paper_geometry().length_m, roc_m: 9.9841e-3 };
        assert_relative_eq!(fsr(&doubled), fsr(&paper_geometry()) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn finesse_values() {
        let f = finesse(&mirrors_total_116());
        assert!((f - 54165.4).abs() < 1.0, "finesse {f}");
        // The rounded per-mirror breakdown also lands in the quoted band.
        assert!((53000.0..=55000.0).contains(&finesse(&paper_mirrors())));

        let ideal = MirrorSet { t1_ppm: TAU / 3.0, t2_ppm: TAU / 3.0, scatter_absorption_ppm: TAU / 3.0 };
        assert_relative_eq!(finesse(&ideal), 1e6, max_relative = 1e-12);

        let doubled = MirrorSet { t1_ppm: 4.4, t2_ppm: 194.0, scatter_absorption_ppm: 33.6 };
        assert_relative_eq!(finesse(&doubled), f / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn linewidth_values() {
        let lw = linewidth(&paper_geometry(), &paper_mirrors());
        assert!(
            (139e3..141e3).contains(&lw.full_width_hz),
            "full width {} Hz",
            lw.full_width_hz
        );
        assert_relative_eq!(lw.kappa_rad_s, std::f64::consts::PI * lw.full_width_hz, epsilon = 1e-6);

        // FSR / finesse arithmetic.
        assert_relative_eq!(
            lw.full_width_hz,
            fsr(&paper_geometry()) / finesse(&paper_mirrors()),
            max_relative = 1e-12
        );

        // Loss -> 0 closes the linewidth.
        let tiny_loss = MirrorSet { t1_ppm: 1e-4, t2_ppm: 1e-4, scatter_absorption_ppm: 1e-4 };
        assert!(linewidth(&paper_geometry(), &tiny_loss).full_width_hz < 1.0);
    }

    #[test]
    fn ringdown_values_and_decay_identity() {
        // Finesse 54165 x 19.9057 mm / (pi c).
        let tau = ringdown(&paper_geometry(), &mirrors_total_116());
        assert_relative_eq!(tau, 1.1448e-6, max_relative = 1e-3);

        // Finesse pi and l = c gives exactly one second.
        let mirrors = MirrorSet {
            t1_ppm: 2e6 / 3.0,
            t2_ppm: 2e6 / 3.0,
            scatter_absorption_ppm: 2e6 / 3.0,
        };
        let geom = CavityGeometry { length_m: SPEED_OF_LIGHT, roc_m: SPEED_OF_LIGHT };
        assert_relative_eq!(ringdown(&geom, &mirrors), 1.0, max_relative = 1e-12);

        // Intensity decay: tau * (2 kappa in rad/s) = 1. The identity
        // follows from tau = F l/(pi c) and 2 kappa = pi c/(l F).
        let lw = linewidth(&paper_geometry(), &mirrors_total_116());
        let product = tau * 2.0 * lw.kappa_rad_s;
        assert!((product - 1.0).abs() < 0.01, "tau * 2kappa = {product}");
    }

    #[test]
    fn g_max_values() {
        let g = g_max(&paper_geometry(), &paper_line()).unwrap();
        let target = TAU * 1.53e6;
        assert!((g - target).abs() / target < 0.01, "g = 2pi * {} Hz", g / TAU);

        let dark = AtomLine { branching: 1e-300, ..paper_line() };
        assert!(g_max(&paper_geometry(), &dark).unwrap() < 1.0);

        // Quadrupling (2 roc - l) doubles w0 and halves g at fixed length.
        let g0 = paper_geometry();
        let d = 2.0 * g0.roc_m - g0.length_m;
        let wider = CavityGeometry { length_m: g0.length_m, roc_m: (g0.length_m + 16.0 * d) / 2.0 };
        let g_wide = g_max(&wider, &paper_line()).unwrap();
        assert_relative_eq!(g_wide, g / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn cooperativity_values() {
        let c = cooperativity(TAU * 1.53e6, TAU * 70e3, TAU * 11.45e6);
        assert!((c - 1.46).abs() < 0.005, "cooperativity {c}");
        assert_eq!(cooperativity(0.0, TAU * 70e3, TAU * 11.45e6), 0.0);
        assert_relative_eq!(
            cooperativity(2.0 * TAU * 1.53e6, TAU * 70e3, TAU * 11.45e6),
            4.0 * c,
            max_relative = 1e-12
        );
        // Invariant under g -> a g, kappa -> a^2 kappa.
        let a: f64 = 1.7;
        assert_relative_eq!(
            cooperativity(a * TAU * 1.53e6, a * a * TAU * 70e3, TAU * 11.45e6),
            c,
            max_relative = 1e-12
        );
    }

    #[test]
    fn p_out_values() {
        let p = p_out_max(&paper_mirrors());
        assert!((p - 0.835).abs() < 0.001, "p_out {p}");

        let t2_only = MirrorSet { t1_ppm: 1e-9, t2_ppm: 97.0, scatter_absorption_ppm: 1e-9 };
        assert_relative_eq!(p_out_max(&t2_only), 1.0, epsilon = 1e-9);

        let symmetric = MirrorSet { t1_ppm: 50.0, t2_ppm: 50.0, scatter_absorption_ppm: 1e-12 };
        assert_relative_eq!(p_out_max(&symmetric), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn mode_spacing_values() {
        let confocal = CavityGeometry { length_m: 10e-3, roc_m: 10e-3 };
        assert_relative_eq!(
            transverse_mode_spacing(&confocal).unwrap(),
            fsr(&confocal) / 2.0,
            max_relative = 1e-12
        );

        // Golden value for the near-concentric geometry.
        let spacing = transverse_mode_spacing(&paper_geometry()).unwrap();
        assert_relative_eq!(spacing, 7.262e9, max_relative = 1e-3);

        // Concentric limit: spacing approaches the FSR (mode degeneracy).
        let near = CavityGeometry { length_m: 2.0 * 10e-3 * (1.0 - 1e-9), roc_m: 10e-3 };
        assert_relative_eq!(
            transverse_mode_spacing(&near).unwrap(),
            fsr(&near),
            max_relative = 1e-3
        );
    }

    #[test]
    fn geometry_from_spectrum_round_trip() {
        let g = paper_geometry();
        let back =
            geometry_from_spectrum(fsr(&g), transverse_mode_spacing(&g).unwrap()).unwrap();
        assert_relative_eq!(back.length_m, g.length_m, max_relative = 1e-6);
        assert_relative_eq!(back.roc_m, g.roc_m, max_relative = 1e-6);

        // Half-FSR spacing is the confocal point l = roc.
        let confocal = geometry_from_spectrum(7.5e9, 3.75e9).unwrap();
        assert_relative_eq!(confocal.length_m, confocal.roc_m, max_relative = 1e-12);

        assert!(geometry_from_spectrum(7.5e9, 7.5e9).is_err());
        assert!(geometry_from_spectrum(7.5e9, 0.0).is_err());
    }

    #[test]
    fn ac_stark_values() {
        let single = RamanDrive { omega1: TAU * 30e6, omega2: 0.0, detuning: TAU * 409e6, splitting: 0.0 };
        assert_relative_eq!(
            ac_stark(&single).unwrap(),
            (TAU * 30e6f64).powi(2) / (4.0 * TAU * 409e6),
            max_relative = 1e-12
        );

        let both = RamanDrive {
            omega1: TAU * 30e6,
            omega2: TAU * 30e6,
            detuning: TAU * 409e6,
            splitting: 0.0,
        };
        assert_relative_eq!(
            ac_stark(&both).unwrap(),
            (TAU * 30e6f64).powi(2) / (2.0 * TAU * 409e6),
            max_relative = 1e-12
        );

        // Drive strength that reproduces a 2pi * 1.14 MHz shift at
        // Delta = 2pi * 409 MHz with equal components and no splitting.
        let target = TAU * 1.14e6;
        let omega = (2.0 * TAU * 409e6 * target).sqrt();
        assert!((omega / TAU - 30.5e6).abs() < 0.1e6, "omega = 2pi * {} Hz", omega / TAU);
        let solved = RamanDrive { omega1: omega, omega2: omega, detuning: TAU * 409e6, splitting: 0.0 };
        assert_relative_eq!(ac_stark(&solved).unwrap(), target, max_relative = 1e-12);

        let degenerate = RamanDrive { omega1: 1.0, omega2: 1.0, detuning: 0.0, splitting: 0.0 };
        assert!(ac_stark(&degenerate).is_err());
    }

    #[test]
    fn parameter_table_is_consistent() {
        let desc = CavityDescription {
            geometry: paper_geometry(),
            mirrors: paper_mirrors(),
            line: paper_line(),
        };
        let report = parameter_table(&desc).unwrap();
        assert!((report.cooperativity - 1.47).abs() < 0.02, "C = {}", report.cooperativity);
        assert!(report.waist_m > 0.0 && report.ringdown_s > 0.0 && report.g_max_hz > 0.0);

        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("cooperativity"));
    }

    #[test]
    fn outputs_finite_positive_over_random_valid_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let roc: f64 = rng.random_range(1e-3..50e-3);
            let length = rng.random_range(0.05..1.95) * roc;
            let geom = CavityGeometry { length_m: length, roc_m: roc };
            let mirrors = MirrorSet {
                t1_ppm: rng.random_range(0.5..200.0),
                t2_ppm: rng.random_range(0.5..200.0),
                scatter_absorption_ppm: rng.random_range(0.5..100.0),
            };
            let line = AtomLine {
                wavelength_m: rng.random_range(300e-9..2e-6),
                gamma_hz: rng.random_range(1e5..1e8),
                branching: rng.random_range(1e-3..1.0),
            };
            let report = parameter_table(&CavityDescription { geometry: geom, mirrors, line })
                .unwrap();
            for (name, v) in [
                ("waist", report.waist_m),
                ("fsr", report.fsr_hz),
                ("spacing", report.transverse_mode_spacing_hz),
                ("finesse", report.finesse),
                ("linewidth", report.linewidth_full_hz),
                ("ringdown", report.ringdown_s),
                ("g_max", report.g_max_hz),
                ("cooperativity", report.cooperativity),
                ("p_out", report.p_out_max),
            ] {
                assert!(v.is_finite() && v > 0.0, "{name} = {v} not finite positive");
            }
        }
    }
}

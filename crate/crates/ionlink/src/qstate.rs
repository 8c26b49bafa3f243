//! Two-qubit (ion ⊗ photon) states and entanglement metrics.
//!
//! Basis ordering is fixed everywhere as {|0,H⟩, |0,V⟩, |1,H⟩, |1,V⟩} with
//! the ion qubit first: index = 2·ion + photon, |0⟩ = D(-3/2), |1⟩ = D(-5/2),
//! H/V the photon polarization. The ideal source state is
//! (|0,H⟩ + |1,V⟩)/√2 with the canonical +1 relative phase.

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::optim::{nelder_mead, NmOptions};
use crate::{Error, Result};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

/// Hermiticity / unit-trace tolerance for a valid density matrix.
pub const MATRIX_TOL: f64 = 1e-12;
/// Eigenvalues above this (negative) floor count as numerically nonnegative.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pauli matrices; index 0..3 = x, y, z.
pub fn pauli(axis: usize) -> Mat2 {
    match axis {
        0 => Mat2::new(ZERO, ONE, ONE, ZERO),
        1 => Mat2::new(ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO),
        2 => Mat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli axis out of range"),
    }
}

/// Kronecker product with the ion factor first, matching the basis ordering.
pub fn kron(ion: &Mat2, photon: &Mat2) -> Mat4 {
    ion.kronecker(photon)
}

/// Hermitian eigendecomposition with eigenvalues sorted descending
/// (ties broken by the original index, so the order is deterministic).
pub fn hermitian_eigen_desc(m: &Mat4) -> (Vec<f64>, Vec<Vector4<C64>>) {
    let eig = SymmetricEigen::new(*m);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();
    (values, vectors)
}

fn outer(v: &Vector4<C64>) -> Mat4 {
    v * v.adjoint()
}

/// Hermitian square root of a (numerically) positive semidefinite matrix.
/// Eigenvalues in `[EIGENVALUE_FLOOR, 0)` are clamped to zero before the root.
pub fn sqrt_psd(m: &Mat4) -> Mat4 {
    let (values, vectors) = hermitian_eigen_desc(m);
    let mut out = Mat4::zeros();
    for (lambda, v) in values.iter().zip(&vectors) {
        let l = lambda.max(0.0).sqrt();
        out += outer(v) * c(l, 0.0);
    }
    out
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Validated 4×4 two-qubit density matrix (Hermitian, unit trace, PSD).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: Mat4,
}

impl DensityMatrix {
    /// Wraps a matrix after checking all invariants.
    pub fn new(mat: Mat4) -> Result<Self> {
        let herm_defect = (mat - mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_defect > MATRIX_TOL {
            return Err(Error::validation(
                "density matrix",
                format!("not Hermitian: max |rho - rho^dag| = {herm_defect:.3e}"),
            ));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > MATRIX_TOL || tr.im.abs() > MATRIX_TOL {
            return Err(Error::validation(
                "density matrix",
                format!("trace = {tr} instead of 1"),
            ));
        }
        let herm = (mat + mat.adjoint()) * c(0.5, 0.0);
        let (values, _) = hermitian_eigen_desc(&herm);
        let min = values.last().copied().unwrap();
        if min < EIGENVALUE_FLOOR {
            return Err(Error::validation(
                "density matrix",
                format!("negative eigenvalue {min:.3e}"),
            ));
        }
        Ok(DensityMatrix { mat })
    }

    /// Absorbs floating-point fuzz from internal algorithms: symmetrizes,
    /// renormalizes the trace, then runs the full validation.
    pub(crate) fn sanitize(mat: Mat4) -> Result<Self> {
        let herm = (mat + mat.adjoint()) * c(0.5, 0.0);
        let tr = herm.trace().re;
        if tr.abs() < 1e-300 {
            return Err(Error::validation("density matrix", "zero trace"));
        }
        DensityMatrix::new(herm / c(tr, 0.0))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.mat
    }

    /// I/4.
    pub fn maximally_mixed() -> Self {
        DensityMatrix { mat: Mat4::identity() * c(0.25, 0.0) }
    }

    /// Isotropic mixture (1-ε)·|Bell⟩⟨Bell| + ε·I/4.
    pub fn werner(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::validation("werner mixing", format!("epsilon = {epsilon}")));
        }
        let bell = ideal_ion_photon_state().density();
        let mat = bell.mat * c(1.0 - epsilon, 0.0) + Mat4::identity() * c(epsilon / 4.0, 0.0);
        Ok(DensityMatrix { mat })
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let re: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| self.mat[(i, j)].re).collect())
            .collect();
        let im: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| self.mat[(i, j)].im).collect())
            .collect();
        DmRepr { dim: 4, re, im }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DmRepr::deserialize(deserializer)?;
        if repr.dim != 4 {
            return Err(D::Error::custom(format!("dim must be 4, got {}", repr.dim)));
        }
        for (name, rows) in [("re", &repr.re), ("im", &repr.im)] {
            if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
                return Err(D::Error::custom(format!("field '{name}' must be a 4x4 array")));
            }
        }
        let mat = Mat4::from_fn(|i, j| c(repr.re[i][j], repr.im[i][j]));
        DensityMatrix::new(mat).map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct DmRepr {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Normalized two-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vector4<C64>,
}

impl PureState {
    pub fn new(amps: Vector4<C64>) -> Result<Self> {
        let norm2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > MATRIX_TOL {
            return Err(Error::validation("pure state", format!("norm^2 = {norm2}")));
        }
        Ok(PureState { amps })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amps: Vector4<C64>) -> Result<Self> {
        let norm2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if norm2 < 1e-300 {
            return Err(Error::validation("pure state", "zero vector"));
        }
        Ok(PureState { amps: amps / c(norm2.sqrt(), 0.0) })
    }

    pub fn amplitudes(&self) -> &Vector4<C64> {
        &self.amps
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { mat: outer(&self.amps) }
    }
}

/// Pair of single-qubit unitaries acting as U_ion ⊗ U_photon.
#[derive(Debug, Clone)]
pub struct LocalUnitary {
    ion: Mat2,
    photon: Mat2,
}

impl LocalUnitary {
    pub fn new(ion: Mat2, photon: Mat2) -> Result<Self> {
        for (name, u) in [("ion", &ion), ("photon", &photon)] {
            let defect = (u.adjoint() * u - Mat2::identity())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if defect > MATRIX_TOL {
                return Err(Error::validation(
                    "local unitary",
                    format!("{name} factor not unitary (defect {defect:.3e})"),
                ));
            }
        }
        Ok(LocalUnitary { ion, photon })
    }

    pub fn identity() -> Self {
        LocalUnitary { ion: Mat2::identity(), photon: Mat2::identity() }
    }

    pub fn ion(&self) -> &Mat2 {
        &self.ion
    }

    pub fn photon(&self) -> &Mat2 {
        &self.photon
    }

    /// (U⊗V) ρ (U⊗V)†.
    pub fn conjugate(&self, rho: &DensityMatrix) -> DensityMatrix {
        let u = kron(&self.ion, &self.photon);
        // Unitary conjugation preserves all invariants up to float fuzz.
        DensityMatrix::sanitize(u * rho.mat * u.adjoint()).expect("unitary conjugation")
    }

    pub fn apply(&self, psi: &PureState) -> PureState {
        let u = kron(&self.ion, &self.photon);
        PureState::normalized(u * psi.amps).expect("unitary application")
    }
}

/// The four state-quality figures used throughout.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricReport {
    pub fidelity_max_ent: f64,
    pub concurrence: f64,
    pub purity: f64,
    pub chsh: f64,
}

/// Computes all four metrics of [`MetricReport`] for one state.
pub fn metric_report(rho: &DensityMatrix) -> Result<MetricReport> {
    let (fidelity_max_ent, _) = fidelity_max_entangled(rho)?;
    Ok(MetricReport {
        fidelity_max_ent,
        concurrence: concurrence(rho),
        purity: purity(rho),
        chsh: chsh_horodecki(rho),
    })
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// The ideal ion-photon source state (|0,H⟩ + |1,V⟩)/√2.
pub fn ideal_ion_photon_state() -> PureState {
    let a = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    PureState { amps: Vector4::new(a, ZERO, ZERO, a) }
}

/// Overlap ⟨ψ|ρ|ψ⟩, clamped to [0, 1].
pub fn fidelity_pure(rho: &DensityMatrix, psi: &PureState) -> f64 {
    let v = (psi.amps.adjoint() * rho.mat * psi.amps)[(0, 0)];
    debug_assert!(v.im.abs() < 1e-10);
    v.re.clamp(0.0, 1.0)
}

/// 2×2 unitary from three angles:
/// rows (cos θ/2, -e^{iλ} sin θ/2; e^{iφ} sin θ/2, e^{i(φ+λ)} cos θ/2).
pub fn unitary_from_angles(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (s, cth) = (theta / 2.0).sin_cos();
    Mat2::new(
        c(cth, 0.0),
        -c(0.0, lambda).exp() * c(s, 0.0),
        c(0.0, phi).exp() * c(s, 0.0),
        c(0.0, phi + lambda).exp() * c(cth, 0.0),
    )
}

/// Number of random restarts in the maximally-entangled fidelity search.
const FIDELITY_SEARCH_STARTS: usize = 16;
/// Fixed seed for the restart points, keeping the search a pure function.
const FIDELITY_SEARCH_SEED: u64 = 0x494f_4e4c_494e_4b00;

/// Fidelity with the nearest maximally entangled pure state,
/// max over |Φ⟩ = (U⊗V)|Bell⟩ of ⟨Φ|ρ|Φ⟩, together with the maximizer.
///
/// The search runs Nelder-Mead over the six local-unitary angles from
/// [`FIDELITY_SEARCH_STARTS`] deterministic start points.
pub fn fidelity_max_entangled(rho: &DensityMatrix) -> Result<(f64, LocalUnitary)> {
    use rand::SeedableRng;

    let bell = ideal_ion_photon_state();
    let objective = |x: &[f64]| {
        let u = unitary_from_angles(x[0], x[1], x[2]);
        let v = unitary_from_angles(x[3], x[4], x[5]);
        let phi = LocalUnitary { ion: u, photon: v }.apply(&bell);
        -fidelity_pure(rho, &phi)
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(FIDELITY_SEARCH_SEED);
    let opts = NmOptions { f_tol: 1e-9, max_iterations: 2500, initial_step: 0.4 };
    let mut best: Option<crate::optim::NmResult> = None;
    let mut any_converged = false;
    for start in 0..FIDELITY_SEARCH_STARTS {
        let x0: Vec<f64> = if start == 0 {
            vec![0.0; 6]
        } else {
            (0..6).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
        };
        let r = nelder_mead(objective, &x0, &opts);
        any_converged |= r.converged;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let best = best.unwrap();
    let fidelity = (-best.value).clamp(0.0, 1.0);
    if !any_converged {
        return Err(Error::NonConvergence { best: fidelity, restarts: FIDELITY_SEARCH_STARTS });
    }
    let u = unitary_from_angles(best.x[0], best.x[1], best.x[2]);
    let v = unitary_from_angles(best.x[3], best.x[4], best.x[5]);
    Ok((fidelity, LocalUnitary::new(u, v)?))
}

/// Wootters concurrence C = max(0, λ₁-λ₂-λ₃-λ₄) with λᵢ the descending
/// square roots of the eigenvalues of ρρ̃. Computed through the Hermitian
/// matrix √ρ ρ̃ √ρ, which shares its spectrum with ρρ̃.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let flipped = spin_flip(&rho.mat);
    let root = sqrt_psd(&rho.mat);
    let m = root * flipped * root;
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let (values, _) = hermitian_eigen_desc(&herm);
    let lambdas: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0)
}

/// Spin-flipped matrix (σy⊗σy) ρ* (σy⊗σy).
fn spin_flip(m: &Mat4) -> Mat4 {
    let yy = kron(&pauli(1), &pauli(1));
    let conj = m.map(|z| z.conj());
    yy * conj * yy
}

/// Tr(ρ²).
pub fn purity(rho: &DensityMatrix) -> f64 {
    (rho.mat * rho.mat).trace().re
}

/// 3×3 correlation matrix T_ab = Tr(ρ σ_a^ion ⊗ σ_b^photon).
pub fn pauli_correlation_matrix(rho: &DensityMatrix) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| (rho.mat * kron(&pauli(a), &pauli(b))).trace().re)
}

/// Maximal CHSH value 2√(u₁+u₂), with u₁ ≥ u₂ the two largest eigenvalues
/// of TᵀT (Horodecki criterion).
pub fn chsh_horodecki(rho: &DensityMatrix) -> f64 {
    let t = pauli_correlation_matrix(rho);
    let m = t.transpose() * t;
    let eig = SymmetricEigen::new(m);
    let mut u: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let s = 2.0 * (u[0] + u[1]).sqrt();
    s.clamp(0.0, 2.0 * std::f64::consts::SQRT_2)
}

/// Ion-memory dephasing channel: the coherences between the ion |0⟩ and |1⟩
/// blocks are scaled by `visibility` ∈ [0, 1].
pub fn dephase_memory(rho: &DensityMatrix, visibility: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::validation("visibility", format!("{visibility} outside [0, 1]")));
    }
    let mat = Mat4::from_fn(|i, j| {
        if (i < 2) == (j < 2) {
            rho.mat[(i, j)]
        } else {
            rho.mat[(i, j)] * c(visibility, 0.0)
        }
    });
    DensityMatrix::sanitize(mat)
}

/// Visibility of the memory channel that reproduces a Bell-state fidelity
/// F = (1+v)/2, i.e. v = 2F - 1.
pub fn visibility_for_fidelity(fidelity: f64) -> f64 {
    (2.0 * fidelity - 1.0).clamp(0.0, 1.0)
}

/// Trace distance ½ Tr|ρ-σ|.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (values, _) = hermitian_eigen_desc(&(a.mat - b.mat));
    0.5 * values.iter().map(|v| v.abs()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// Random states for tests and Monte-Carlo studies
// ---------------------------------------------------------------------------

fn standard_complex<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im)
}

/// Random full-rank density matrix from the Ginibre ensemble (GG†, normalized).
pub fn random_density_matrix<R: Rng>(rng: &mut R) -> DensityMatrix {
    let g = Mat4::from_fn(|_, _| standard_complex(rng));
    let m = g * g.adjoint();
    DensityMatrix::sanitize(m).expect("Ginibre construction")
}

/// Haar-like random pure state.
pub fn random_pure_state<R: Rng>(rng: &mut R) -> PureState {
    let v = Vector4::from_fn(|_, _| standard_complex(rng));
    PureState::normalized(v).expect("random vector")
}

/// Random local-unitary pair.
pub fn random_local_unitary<R: Rng>(rng: &mut R) -> LocalUnitary {
    let mut angles = || {
        let theta = 2.0 * (rng.random_range(0.0f64..1.0)).sqrt().asin();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let lambda = rng.random_range(0.0..std::f64::consts::TAU);
        (theta, phi, lambda)
    };
    let (t1, p1, l1) = angles();
    let (t2, p2, l2) = angles();
    LocalUnitary {
        ion: unitary_from_angles(t1, p1, l1),
        photon: unitary_from_angles(t2, p2, l2),
    }
}

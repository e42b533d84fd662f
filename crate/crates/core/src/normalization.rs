//! Fiberwise normalization of Cartan connections on the adjoint complex.
//!
//! With `V = g` the slices are `V_0 = g_-1`, `V_1 = g_0`, `V_2 = g_1`, so
//! `L(Λ²g_-1, g_-1)`, `L(g_-1, g_0)`, `L(Λ²g_-1, g_0)` and `L(g_-1, g_1)` are
//! slices of the cochain spaces. A map in `L(Λ^k g_-1, g_j)` is stored as a
//! matrix with one row per increasing index set and one column per basis
//! element of `g_j`; its row-major entries are exactly the slice coordinates.

use std::sync::Arc;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::algebra::{AlgebraElement, GradedLieAlgebra};
use crate::error::{Error, Result};
use crate::kostant::KostantComplex;
use crate::linalg::{binomial, rat, Matrix, Rational};
use crate::report::CheckResult;
use crate::representation::GradedRepresentation;

/// An element of `L(Λ²g_-1, g_-1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorsionCandidate(pub Matrix);

/// An element of `L(Λ²g_-1, g_0)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurvatureG0Candidate(pub Matrix);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedFiber {
    /// `ψ ∈ L(g_-1, g_0)` removing the `im ∂` part of the torsion.
    pub torsion_psi: Matrix,
    pub torsion: TorsionCandidate,
    /// `ψ ∈ L(g_-1, g_1)` normalizing the `g_0` curvature.
    pub extension_psi: Matrix,
    pub curvature: CurvatureG0Candidate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RigidityReport {
    pub dim_g1: usize,
    pub kernel_dim: usize,
    pub kernel_equals_ad_g1: bool,
    pub extension_rank: usize,
    pub extension_expected_rank: usize,
    /// Basis of `ker ∂` on `L(g_-1, g_0)` when it differs from `ad(g_1)`.
    pub offending_kernel: Option<Vec<Vec<String>>>,
}

impl RigidityReport {
    pub fn passes(&self) -> bool {
        self.kernel_dim == self.dim_g1 && self.kernel_equals_ad_g1 && self.extension_rank == self.extension_expected_rank
    }
}

/// Precomputed slice maps of the adjoint complex.
#[derive(Debug)]
pub struct Normalizer {
    algebra: Arc<GradedLieAlgebra>,
    complex: KostantComplex,
    /// `∂: L(g_-1, g_0) → L(Λ², g_-1)`.
    d_g0: Matrix,
    /// `∂: L(g_-1, g_1) → L(Λ², g_0)`.
    d_g1: Matrix,
    /// `∂*: L(Λ², g_-1) → L(g_-1, g_0)`.
    dstar_torsion: Matrix,
    /// `∂*: L(Λ², g_0) → L(g_-1, g_1)`.
    dstar_curvature: Matrix,
    proj_im_d: Matrix,
    left_inverse: Matrix,
    extension_system: Matrix,
    extension_nullity: usize,
}

impl Normalizer {
    pub fn new(algebra: Arc<GradedLieAlgebra>) -> Result<Self> {
        let rep = GradedRepresentation::adjoint(algebra.clone())?;
        if rep.basis_change() != &Matrix::identity(rep.dim()) {
            return Err(Error::Construction("adjoint adapted basis differs from the graded basis".into()));
        }
        let complex = KostantComplex::new(Arc::new(rep));
        let c1 = complex.space(1);
        let c2 = complex.space(2);
        let (s1_1, s1_2) = (c1.slice_indices(1), c1.slice_indices(2));
        let (s2_0, s2_1) = (c2.slice_indices(0), c2.slice_indices(1));

        let d1 = complex.differential_matrix(1);
        let d_g0 = d1.submatrix(&s2_0, &s1_1);
        let d_g1 = d1.submatrix(&s2_1, &s1_2);
        let dstar2 = complex.codifferential_matrix(2);
        let dstar_torsion = dstar2.submatrix(&s1_1, &s2_0);
        let dstar_curvature = dstar2.submatrix(&s1_2, &s2_1);
        let hodge = complex.hodge_decomposition(2)?;
        let proj_im_d = hodge.proj_im_d.submatrix(&s2_0, &s2_0);
        let left_inverse = left_inverse(&d_g0);
        let extension_system = &dstar_curvature * &d_g1;
        let extension_nullity = extension_system.nullspace().cols();

        Ok(Normalizer {
            algebra,
            complex,
            d_g0,
            d_g1,
            dstar_torsion,
            dstar_curvature,
            proj_im_d,
            left_inverse,
            extension_system,
            extension_nullity,
        })
    }

    pub fn algebra(&self) -> &Arc<GradedLieAlgebra> {
        &self.algebra
    }

    pub fn complex(&self) -> &KostantComplex {
        &self.complex
    }

    fn pairs(&self) -> usize {
        binomial(self.algebra.graded_dims().0, 2)
    }

    fn check_shape(&self, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
        if m.rows() != rows || m.cols() != cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: m.rows() * m.cols(),
            });
        }
        Ok(())
    }

    /// `∂ψ` for `ψ ∈ L(g_-1, g_0)`.
    pub fn differential_g0(&self, psi: &Matrix) -> Result<TorsionCandidate> {
        let (n, d0, _) = self.algebra.graded_dims();
        self.check_shape(psi, n, d0)?;
        Ok(TorsionCandidate(reshape(self.d_g0.mul_vec(psi.entries()), self.pairs(), n)))
    }

    /// `∂ψ` for `ψ ∈ L(g_-1, g_1)`.
    pub fn differential_g1(&self, psi: &Matrix) -> Result<CurvatureG0Candidate> {
        let (n, d0, d1) = self.algebra.graded_dims();
        self.check_shape(psi, n, d1)?;
        Ok(CurvatureG0Candidate(reshape(self.d_g1.mul_vec(psi.entries()), self.pairs(), d0)))
    }

    pub fn codifferential_torsion(&self, tau: &TorsionCandidate) -> Result<Matrix> {
        let (n, d0, _) = self.algebra.graded_dims();
        self.check_shape(&tau.0, self.pairs(), n)?;
        Ok(reshape(self.dstar_torsion.mul_vec(tau.0.entries()), n, d0))
    }

    pub fn codifferential_curvature(&self, rho: &CurvatureG0Candidate) -> Result<Matrix> {
        let (n, d0, d1) = self.algebra.graded_dims();
        self.check_shape(&rho.0, self.pairs(), d0)?;
        Ok(reshape(self.dstar_curvature.mul_vec(rho.0.entries()), n, d1))
    }

    /// Splits off the `im ∂` component of `τ`. The preimage is chosen by the
    /// fixed left inverse of [`left_inverse`].
    pub fn normalize_torsion(&self, tau: &TorsionCandidate) -> Result<(Matrix, TorsionCandidate)> {
        let (n, d0, _) = self.algebra.graded_dims();
        self.check_shape(&tau.0, self.pairs(), n)?;
        let image_part = self.proj_im_d.mul_vec(tau.0.entries());
        let psi = self.left_inverse.mul_vec(&image_part);
        let d_psi = self.d_g0.mul_vec(&psi);
        if d_psi != image_part {
            return Err(Error::LinearSystem("left inverse does not reproduce the im ∂ component".into()));
        }
        let normal: Vec<Rational> = tau.0.entries().iter().zip(&d_psi).map(|(a, b)| a - b).collect();
        if !self.dstar_torsion.mul_vec(&normal).iter().all(Zero::is_zero) {
            return Err(Error::NotInKernel { degree: 2 });
        }
        Ok((reshape(psi, n, d0), TorsionCandidate(reshape(normal, self.pairs(), n))))
    }

    /// The unique `ψ ∈ L(g_-1, g_1)` with `∂*(ρ + ∂ψ) = 0`.
    pub fn solve_unique_extension(&self, rho: &CurvatureG0Candidate) -> Result<Matrix> {
        let (n, d0, d1) = self.algebra.graded_dims();
        self.check_shape(&rho.0, self.pairs(), d0)?;
        let rhs: Vec<Rational> = self.dstar_curvature.mul_vec(rho.0.entries()).iter().map(|x| -x).collect();
        if self.extension_nullity() != 0 {
            return Err(Error::LinearSystem("extension system is underdetermined".into()));
        }
        let psi = self
            .extension_system
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSystem("extension system is inconsistent".into()))?;
        Ok(reshape(psi, n, d1))
    }

    /// Dimension of the solution space of the homogeneous extension system.
    pub fn extension_nullity(&self) -> usize {
        self.extension_nullity
    }

    /// `ad(Z)|_{g_-1} ∈ L(g_-1, g_0)` for each basis element `Z` of `g_1`.
    pub fn ad_g1_restrictions(&self) -> Result<Vec<Matrix>> {
        let alg = &self.algebra;
        let (n, d0, _) = alg.graded_dims();
        let zero = alg.zero_range();
        alg.plus_range()
            .map(|z| {
                let mut m = Matrix::zeros(n, d0);
                for a in alg.minus_range() {
                    let b = alg.bracket(&AlgebraElement::basis(alg.dim(), z), &AlgebraElement::basis(alg.dim(), a))?;
                    for (j, c) in b.coeffs().iter().enumerate() {
                        if !c.is_zero() {
                            if !zero.contains(&j) {
                                return Err(Error::Construction("[g_1, g_-1] leaves g_0".into()));
                            }
                            m[(a, j - zero.start)] = c.clone();
                        }
                    }
                }
                Ok(m)
            })
            .collect()
    }

    pub fn check_prolongation_rigidity(&self) -> Result<RigidityReport> {
        let (n, _, d1) = self.algebra.graded_dims();
        let kernel = self.d_g0.nullspace();
        let ad: Vec<Vec<Rational>> = self.ad_g1_restrictions()?.iter().map(|m| m.entries().to_vec()).collect();
        let ad = Matrix::from_columns(kernel.rows(), &ad);
        let joint = Matrix::hstack(kernel.rows(), &[&kernel, &ad]).rank();
        let equal = joint == kernel.cols() && joint == ad.rank();
        let extension_rank = self.d_g1.rank();
        let expected = n * d1;
        let mut report = RigidityReport {
            dim_g1: d1,
            kernel_dim: kernel.cols(),
            kernel_equals_ad_g1: equal,
            extension_rank,
            extension_expected_rank: expected,
            offending_kernel: None,
        };
        if !report.passes() {
            report.offending_kernel = Some(
                kernel
                    .columns()
                    .iter()
                    .map(|c| c.iter().map(ToString::to_string).collect())
                    .collect(),
            );
        }
        Ok(report)
    }

    /// Torsion normalization followed by the `g_1` extension on the
    /// resulting `g_0` curvature (zero when not supplied).
    pub fn normalized_connection_fiber(
        &self,
        torsion: &TorsionCandidate,
        curvature: Option<&CurvatureG0Candidate>,
    ) -> Result<NormalizedFiber> {
        let (_, d0, _) = self.algebra.graded_dims();
        let (torsion_psi, normal) = self.normalize_torsion(torsion)?;
        let rho = curvature
            .cloned()
            .unwrap_or_else(|| CurvatureG0Candidate(Matrix::zeros(self.pairs(), d0)));
        let extension_psi = self.solve_unique_extension(&rho)?;
        let correction = self.differential_g1(&extension_psi)?;
        Ok(NormalizedFiber {
            torsion_psi,
            torsion: normal,
            extension_psi,
            curvature: CurvatureG0Candidate(&rho.0 + &correction.0),
        })
    }

    pub fn random_torsion(&self, rng: &mut ChaCha8Rng) -> TorsionCandidate {
        TorsionCandidate(random_matrix(rng, self.pairs(), self.algebra.graded_dims().0))
    }

    pub fn random_curvature(&self, rng: &mut ChaCha8Rng) -> CurvatureG0Candidate {
        CurvatureG0Candidate(random_matrix(rng, self.pairs(), self.algebra.graded_dims().1))
    }

    pub fn random_g0_map(&self, rng: &mut ChaCha8Rng) -> Matrix {
        let (n, d0, _) = self.algebra.graded_dims();
        random_matrix(rng, n, d0)
    }

    pub fn random_g1_map(&self, rng: &mut ChaCha8Rng) -> Matrix {
        let (n, _, d1) = self.algebra.graded_dims();
        random_matrix(rng, n, d1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub family: String,
    pub params: String,
    pub samples: usize,
    pub seed: u64,
    pub rigidity: RigidityReport,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

#[derive(Default)]
struct SampleOutcome {
    in_kernel: bool,
    splits: bool,
    idempotent: bool,
    residual_zero: bool,
}

impl Normalizer {
    fn run_sample(&self, seed: u64) -> Result<SampleOutcome> {
        let mut rng = seeded_rng(seed);
        let tau = self.random_torsion(&mut rng);
        let rho = self.random_curvature(&mut rng);
        let (psi, normal) = self.normalize_torsion(&tau)?;
        let in_kernel = self.codifferential_torsion(&normal)?.is_zero();
        let splits = &tau.0 - &normal.0 == self.differential_g0(&psi)?.0;
        let (psi2, again) = self.normalize_torsion(&normal)?;
        let idempotent = again == normal && psi2.is_zero();
        let ext = self.solve_unique_extension(&rho)?;
        let total = CurvatureG0Candidate(&rho.0 + &self.differential_g1(&ext)?.0);
        let residual_zero = self.codifferential_curvature(&total)?.is_zero();
        Ok(SampleOutcome {
            in_kernel,
            splits,
            idempotent,
            residual_zero,
        })
    }

    /// Rigidity plus `samples` seeded random torsions and curvatures; sample
    /// `j` uses the generator seeded with `seed + j`.
    pub fn batch_report(&self, samples: usize, seed: u64) -> NormalizationReport {
        let rigidity = self.check_prolongation_rigidity();
        let mut checks = Vec::new();
        match &rigidity {
            Ok(r) => checks.push(CheckResult::from_bool(
                "prolongation_rigidity",
                r.passes(),
                json!({"kernel_dim": r.kernel_dim, "dim_g1": r.dim_g1, "extension_rank": r.extension_rank}),
                || json!({"offending_kernel": r.offending_kernel}),
            )),
            Err(e) => checks.push(CheckResult::fail("prolongation_rigidity", json!({}), json!({"error": e.to_string()}))),
        }
        let outcomes: Vec<Result<SampleOutcome>> = (0..samples)
            .into_par_iter()
            .map(|j| self.run_sample(seed.wrapping_add(j as u64)))
            .collect();
        let first_error = outcomes.iter().enumerate().find_map(|(j, o)| o.as_ref().err().map(|e| (j, e.to_string())));
        let outcome_check = |name: &str, f: fn(&SampleOutcome) -> bool| {
            let bad = outcomes
                .iter()
                .enumerate()
                .find(|(_, o)| o.as_ref().map_or(true, |o| !f(o)))
                .map(|(j, _)| j);
            CheckResult::from_bool(name, bad.is_none(), json!({"samples": samples}), || match &first_error {
                Some((j, e)) => json!({"sample": j, "error": e}),
                None => json!({"sample": bad, "seed": seed.wrapping_add(bad.unwrap_or(0) as u64)}),
            })
        };
        checks.push(outcome_check("torsion_in_kernel", |o| o.in_kernel && o.splits));
        checks.push(outcome_check("torsion_idempotent", |o| o.idempotent));
        checks.push(outcome_check("extension_residual", |o| o.residual_zero));
        checks.push(CheckResult::from_bool(
            "extension_unique",
            self.extension_nullity() == 0,
            json!({"nullity": self.extension_nullity()}),
            || json!({"nullity": self.extension_nullity()}),
        ));
        let all_pass = checks.iter().all(CheckResult::passed);
        let family = self.algebra.family();
        NormalizationReport {
            family: family.name().to_string(),
            params: family.params(),
            samples,
            seed,
            rigidity: rigidity.unwrap_or(RigidityReport {
                dim_g1: 0,
                kernel_dim: 0,
                kernel_equals_ad_g1: false,
                extension_rank: 0,
                extension_expected_rank: 0,
                offending_kernel: None,
            }),
            checks,
            all_pass,
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer entries in `-5..=5`.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rat(rng.gen_range(-5..=5)))
}

fn reshape(entries: Vec<Rational>, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |r, c| entries[r * cols + c].clone())
}

/// Left inverse of `a` on its column space: the pivot columns of the
/// reduced row echelon form span the image, and the first lexicographically
/// independent rows of those columns give an invertible square block, whose
/// inverse is placed at (pivot columns, chosen rows). All other entries vanish.
pub fn left_inverse(a: &Matrix) -> Matrix {
    let pivots = a.rref().pivots;
    let basis = a.select_columns(&pivots);
    let rows = basis.transpose().rref().pivots;
    let block = basis.select_rows(&rows).inverse().expect("independent rows of a full-rank block");
    let mut l = Matrix::zeros(a.cols(), a.rows());
    for (i, &p) in pivots.iter().enumerate() {
        for (j, &r) in rows.iter().enumerate() {
            l[(p, r)] = block[(i, j)].clone();
        }
    }
    l
}

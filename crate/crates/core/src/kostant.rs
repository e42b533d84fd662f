//! Kostant's algebraic Hodge theory on `Λ^k g_-1^* ⊗ V`.
//!
//! A cochain of degree `k` is stored by its components `α(X_{i_1}, .., X_{i_k})`
//! for increasing index sets, in lexicographic order of the index sets; each
//! component is a vector in the adapted basis of `V`. The same coordinates
//! describe `Λ^k g_1 ⊗ V` through `Z^{i_1} ∧ .. ∧ Z^{i_k} ⊗ v`, with `Z^i`
//! the Killing-dual basis; this is the only place the two pictures meet.
//!
//! Every operator here maps the `(k, i)` slice `Λ^k ⊗ V_i` into a single
//! slice, so the Hodge decomposition is computed slice by slice.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, OnceLock};

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{mask_elements, sign, sparsify, subsets, Matrix, Polynomial, Rational, SparseRref};
use crate::report::CheckResult;
use crate::representation::GradedRepresentation;

/// Knobs for building a complex. `inject_sign_bug` corrupts the sign of the
/// leading term in the differential; it only exists so verification suites
/// can prove they catch a broken complex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ComplexOptions {
    pub inject_sign_bug: bool,
}

impl ComplexOptions {
    /// Sign of the `t`-th term of an alternating sum.
    pub(crate) fn differential_sign(&self, t: usize) -> Rational {
        if self.inject_sign_bug && t == 0 {
            -sign(t)
        } else {
            sign(t)
        }
    }
}

/// Indexing of `Λ^k g_-1^* ⊗ V`.
#[derive(Clone, Debug)]
pub struct CochainSpace {
    degree: usize,
    leaf_dim: usize,
    dim_v: usize,
    subsets: Vec<u32>,
    positions: HashMap<u32, usize>,
    slice_of_v: Vec<usize>,
}

impl CochainSpace {
    pub fn new(rep: &GradedRepresentation, degree: usize) -> Self {
        let leaf_dim = rep.algebra().graded_dims().0;
        let subsets = subsets(leaf_dim, degree);
        let positions = subsets.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        CochainSpace {
            degree,
            leaf_dim,
            dim_v: rep.dim(),
            subsets,
            positions,
            slice_of_v: (0..rep.dim()).map(|c| rep.slice_of(c)).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.subsets.len() * self.dim_v
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_dim
    }

    pub fn subsets(&self) -> &[u32] {
        &self.subsets
    }

    pub fn subset_position(&self, mask: u32) -> Option<usize> {
        self.positions.get(&mask).copied()
    }

    pub fn index(&self, subset_position: usize, v: usize) -> usize {
        subset_position * self.dim_v + v
    }

    /// `(subset mask, V coordinate)` of a flat index.
    pub fn split(&self, index: usize) -> (u32, usize) {
        (self.subsets[index / self.dim_v], index % self.dim_v)
    }

    pub fn slice_of(&self, index: usize) -> usize {
        self.slice_of_v[index % self.dim_v]
    }

    /// Total degree `k + i` of a basis element.
    pub fn total_degree(&self, index: usize) -> usize {
        self.degree + self.slice_of(index)
    }

    pub fn slice_indices(&self, slice: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.slice_of(j) == slice).collect()
    }
}

/// An exact linear map between cochain spaces. A target degree of `-1`
/// denotes the zero space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearMap {
    pub source_degree: usize,
    pub target_degree: isize,
    pub matrix: Matrix,
}

/// `Λ^k ⊗ V = im ∂ ⊕ ker □ ⊕ im ∂*` for one degree, with bases in full
/// coordinates (grouped slice by slice) and the three complementary projectors.
#[derive(Clone, Debug)]
pub struct HodgeDecomposition {
    pub degree: usize,
    pub im_d: Matrix,
    pub harmonic: Matrix,
    pub im_dstar: Matrix,
    pub proj_im_d: Matrix,
    pub proj_harmonic: Matrix,
    pub proj_im_dstar: Matrix,
    /// Harmonic coordinates of the projection along `im ∂ ⊕ im ∂*`.
    pub harmonic_coordinates: Matrix,
    /// `(slice, harmonic column range)` for every slice with harmonics.
    pub harmonic_blocks: Vec<(usize, Range<usize>)>,
    pub slices: Vec<SliceHodge>,
}

/// The decomposition restricted to `Λ^k ⊗ V_i`, in slice-local coordinates.
#[derive(Clone, Debug)]
pub struct SliceHodge {
    pub slice: usize,
    pub indices: Vec<usize>,
    pub im_d: Matrix,
    pub harmonic: Matrix,
    pub im_dstar: Matrix,
    pub laplacian: Matrix,
}

impl HodgeDecomposition {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.im_d.cols(), self.harmonic.cols(), self.im_dstar.cols())
    }

    /// Slice index of each harmonic basis column.
    pub fn harmonic_slice(&self, column: usize) -> usize {
        self.harmonic_blocks
            .iter()
            .find(|(_, r)| r.contains(&column))
            .map(|(s, _)| *s)
            .expect("column inside a harmonic block")
    }
}

/// `p^V_{k,i}`: a polynomial with `□ p(□) = id` on `im ∂*` inside the slice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InversePolynomial {
    pub degree: usize,
    pub slice: usize,
    pub polynomial: Polynomial,
    pub minimal_polynomial: Polynomial,
    /// Set when `im ∂*` meets the slice trivially; the polynomial is zero.
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyRow {
    pub k: usize,
    pub dim_chain: usize,
    pub dim_im_d: usize,
    pub dim_harmonic: usize,
    pub dim_im_dstar: usize,
}

/// The full Kostant complex of a representation, with lazily cached
/// Laplacians and Hodge decompositions.
#[derive(Debug)]
pub struct KostantComplex {
    rep: Arc<GradedRepresentation>,
    options: ComplexOptions,
    spaces: Vec<CochainSpace>,
    differentials: Vec<Matrix>,
    codifferentials: Vec<Matrix>,
    laplacians: Vec<OnceLock<Matrix>>,
    hodge: Vec<OnceLock<Result<Arc<HodgeDecomposition>>>>,
}

impl KostantComplex {
    pub fn new(rep: Arc<GradedRepresentation>) -> Self {
        Self::with_options(rep, ComplexOptions::default())
    }

    pub fn with_options(rep: Arc<GradedRepresentation>, options: ComplexOptions) -> Self {
        let n = rep.algebra().graded_dims().0;
        let spaces: Vec<CochainSpace> = (0..=n + 1).map(|k| CochainSpace::new(&rep, k)).collect();
        let differentials = (0..=n).map(|k| build_differential(&rep, &spaces[k], &spaces[k + 1], options)).collect();
        let codifferentials = (0..=n)
            .map(|k| {
                if k == 0 {
                    Matrix::zeros(0, spaces[0].dim())
                } else {
                    build_codifferential(&rep, &spaces[k], &spaces[k - 1])
                }
            })
            .collect();
        KostantComplex {
            rep,
            options,
            spaces,
            differentials,
            codifferentials,
            laplacians: (0..=n).map(|_| OnceLock::new()).collect(),
            hodge: (0..=n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn representation(&self) -> &Arc<GradedRepresentation> {
        &self.rep
    }

    pub fn options(&self) -> ComplexOptions {
        self.options
    }

    /// `n = dim g_-1`.
    pub fn top_degree(&self) -> usize {
        self.spaces.len() - 2
    }

    fn check_degree(&self, k: usize) -> Result<()> {
        if k > self.top_degree() {
            return Err(Error::IndexOutOfRange {
                index: k,
                max: self.top_degree(),
            });
        }
        Ok(())
    }

    /// Cochain space of degree `k`, for `0 <= k <= n + 1` (degree `n + 1` is zero).
    pub fn space(&self, k: usize) -> &CochainSpace {
        &self.spaces[k]
    }

    /// `∂: Λ^k → Λ^{k+1}`, `∂α(A_0..A_k) = Σ (-1)^t A_t · α(.., Â_t, ..)`.
    pub fn differential_matrix(&self, k: usize) -> &Matrix {
        &self.differentials[k]
    }

    /// `∂*: Λ^k → Λ^{k-1}`,
    /// `∂*(Z_1 ∧ .. ∧ Z_k ⊗ v) = Σ_t (-1)^t Z_1 ∧ .. Ẑ_t .. ∧ Z_k ⊗ Z_t · v`.
    pub fn codifferential_matrix(&self, k: usize) -> &Matrix {
        &self.codifferentials[k]
    }

    pub fn differential(&self, k: usize) -> Result<LinearMap> {
        self.check_degree(k)?;
        Ok(LinearMap {
            source_degree: k,
            target_degree: k as isize + 1,
            matrix: self.differentials[k].clone(),
        })
    }

    pub fn codifferential(&self, k: usize) -> Result<LinearMap> {
        self.check_degree(k)?;
        Ok(LinearMap {
            source_degree: k,
            target_degree: k as isize - 1,
            matrix: self.codifferentials[k].clone(),
        })
    }

    /// `□ = ∂*∂ + ∂∂*` on degree `k`.
    pub fn laplacian_matrix(&self, k: usize) -> &Matrix {
        self.laplacians[k].get_or_init(|| {
            let dim = self.spaces[k].dim();
            let mut lap = Matrix::zeros(dim, dim);
            if k < self.top_degree() {
                lap = &self.codifferentials[k + 1] * &self.differentials[k];
            }
            if k > 0 {
                lap = &lap + &(&self.differentials[k - 1] * &self.codifferentials[k]);
            }
            lap
        })
    }

    pub fn laplacian(&self, k: usize) -> Result<LinearMap> {
        self.check_degree(k)?;
        Ok(LinearMap {
            source_degree: k,
            target_degree: k as isize,
            matrix: self.laplacian_matrix(k).clone(),
        })
    }

    pub fn hodge_decomposition(&self, k: usize) -> Result<Arc<HodgeDecomposition>> {
        self.check_degree(k)?;
        self.hodge[k].get_or_init(|| self.compute_hodge(k).map(Arc::new)).clone()
    }

    fn compute_hodge(&self, k: usize) -> Result<HodgeDecomposition> {
        let space = &self.spaces[k];
        let dim = space.dim();
        let lap = self.laplacian_matrix(k);
        let n_slices = self.rep.filtration_length() + 1;

        let mut slices = Vec::new();
        let mut full = [Vec::new(), Vec::new(), Vec::new()];
        let mut proj = [Matrix::zeros(dim, dim), Matrix::zeros(dim, dim), Matrix::zeros(dim, dim)];
        let mut harmonic_rows: Vec<Vec<Rational>> = Vec::new();
        let mut harmonic_blocks = Vec::new();

        for i in 0..n_slices {
            let idx = space.slice_indices(i);
            if idx.is_empty() {
                continue;
            }
            let fail = |reason: &str| Error::DecompositionFailure {
                degree: k,
                slice: i,
                reason: reason.to_string(),
            };
            let im_d = if k > 0 {
                let src = self.spaces[k - 1].slice_indices(i + 1);
                self.differentials[k - 1].submatrix(&idx, &src).column_space()
            } else {
                Matrix::zeros(idx.len(), 0)
            };
            let im_dstar = if k < self.top_degree() && i > 0 {
                let src = self.spaces[k + 1].slice_indices(i - 1);
                self.codifferentials[k + 1].submatrix(&idx, &src).column_space()
            } else {
                Matrix::zeros(idx.len(), 0)
            };
            let slice_lap = lap.submatrix(&idx, &idx);
            let harmonic = slice_lap.nullspace();
            let (a, h, b) = (im_d.cols(), harmonic.cols(), im_dstar.cols());
            if a + h + b != idx.len() {
                return Err(fail(&format!("dimensions {a} + {h} + {b} != {}", idx.len())));
            }
            let basis = Matrix::hstack(idx.len(), &[&im_d, &harmonic, &im_dstar]);
            let inverse = basis.inverse().ok_or_else(|| fail("summands are not independent"))?;

            // ker ∂ = im ∂ ⊕ ker □ and ker ∂* = ker □ ⊕ im ∂*.
            let all_rows: Vec<usize> = (0..self.differentials[k].rows()).collect();
            let d_slice = self.differentials[k].submatrix(&all_rows, &idx);
            let ker_d = Matrix::hstack(idx.len(), &[&im_d, &harmonic]);
            if !(&d_slice * &ker_d).is_zero() || d_slice.nullspace().cols() != a + h {
                return Err(fail("im ∂ ⊕ ker □ differs from ker ∂"));
            }
            let star_rows: Vec<usize> = (0..self.codifferentials[k].rows()).collect();
            let dstar_slice = self.codifferentials[k].submatrix(&star_rows, &idx);
            let ker_dstar = Matrix::hstack(idx.len(), &[&harmonic, &im_dstar]);
            if !(&dstar_slice * &ker_dstar).is_zero() || dstar_slice.nullspace().cols() != h + b {
                return Err(fail("ker □ ⊕ im ∂* differs from ker ∂*"));
            }

            let ranges = [0..a, a..a + h, a + h..a + h + b];
            for (s, range) in ranges.iter().enumerate() {
                let cols: Vec<usize> = range.clone().collect();
                let local = &basis.select_columns(&cols) * &inverse.select_rows(&cols);
                for (r_local, &r) in idx.iter().enumerate() {
                    for (c_local, &c) in idx.iter().enumerate() {
                        let x = &local[(r_local, c_local)];
                        if !x.is_zero() {
                            proj[s][(r, c)] = x.clone();
                        }
                    }
                }
                for c in range.clone() {
                    let mut v = vec![Rational::zero(); dim];
                    for (r_local, &r) in idx.iter().enumerate() {
                        v[r] = basis[(r_local, c)].clone();
                    }
                    full[s].push(v);
                }
            }
            let start = harmonic_rows.len();
            for row in ranges[1].clone() {
                let mut v = vec![Rational::zero(); dim];
                for (c_local, &c) in idx.iter().enumerate() {
                    v[c] = inverse[(row, c_local)].clone();
                }
                harmonic_rows.push(v);
            }
            if h > 0 {
                harmonic_blocks.push((i, start..start + h));
            }
            slices.push(SliceHodge {
                slice: i,
                indices: idx,
                im_d,
                harmonic,
                im_dstar,
                laplacian: slice_lap,
            });
        }

        let [im_d, harmonic, im_dstar] = full;
        let [proj_im_d, proj_harmonic, proj_im_dstar] = proj;
        let harmonic_coordinates = if harmonic_rows.is_empty() {
            Matrix::zeros(0, dim)
        } else {
            Matrix::from_rows(harmonic_rows)
        };
        Ok(HodgeDecomposition {
            degree: k,
            im_d: Matrix::from_columns(dim, &im_d),
            harmonic: Matrix::from_columns(dim, &harmonic),
            im_dstar: Matrix::from_columns(dim, &im_dstar),
            proj_im_d,
            proj_harmonic,
            proj_im_dstar,
            harmonic_coordinates,
            harmonic_blocks,
            slices,
        })
    }

    /// `dim H_k` for `k = 0..=n`, each cross-checked three ways.
    pub fn homology_dimensions(&self) -> Result<Vec<usize>> {
        Ok(self.homology_table()?.into_iter().map(|r| r.dim_harmonic).collect())
    }

    pub fn homology_table(&self) -> Result<Vec<HomologyRow>> {
        let n = self.top_degree();
        let rank = |m: &Matrix| -> usize {
            let mut s = SparseRref::new(m.cols());
            for r in 0..m.rows() {
                s.insert(sparsify(m.row(r)));
            }
            s.rank()
        };
        let d_ranks: Vec<usize> = self.differentials.iter().map(rank).collect();
        let star_ranks: Vec<usize> = self.codifferentials.iter().map(rank).collect();
        let mut rows = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let hodge = self.hodge_decomposition(k)?;
            let dim = self.spaces[k].dim();
            let (a, h, b) = hodge.dims();
            let im_d = if k > 0 { d_ranks[k - 1] } else { 0 };
            let im_dstar = if k < n { star_ranks[k + 1] } else { 0 };
            let via_d = dim - d_ranks[k] - im_d;
            let via_star = dim - star_ranks[k] - im_dstar;
            if via_d != h || via_star != h || a != im_d || b != im_dstar {
                return Err(Error::HomologyMismatch {
                    degree: k,
                    harmonic: h,
                    via_codifferential: via_star,
                    via_differential: via_d,
                });
            }
            rows.push(HomologyRow {
                k,
                dim_chain: dim,
                dim_im_d: a,
                dim_harmonic: h,
                dim_im_dstar: b,
            });
        }
        Ok(rows)
    }

    /// Projection `ker ∂* → H_k` in harmonic coordinates.
    pub fn harmonic_projection(&self, k: usize) -> Result<LinearMap> {
        let hodge = self.hodge_decomposition(k)?;
        Ok(LinearMap {
            source_degree: k,
            target_degree: k as isize,
            matrix: hodge.harmonic_coordinates.clone(),
        })
    }

    /// Applies the harmonic projection to a cochain, which must lie in `ker ∂*`.
    pub fn project_harmonic(&self, k: usize, cochain: &[Rational]) -> Result<Vec<Rational>> {
        let hodge = self.hodge_decomposition(k)?;
        if cochain.len() != self.spaces[k].dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spaces[k].dim(),
                found: cochain.len(),
            });
        }
        if !self.codifferentials[k].mul_vec(cochain).iter().all(Zero::is_zero) {
            return Err(Error::NotInKernel { degree: k });
        }
        Ok(hodge.harmonic_coordinates.mul_vec(cochain))
    }

    pub fn inverse_laplacian_polynomial(&self, k: usize, slice: usize) -> Result<InversePolynomial> {
        let hodge = self.hodge_decomposition(k)?;
        let empty = InversePolynomial {
            degree: k,
            slice,
            polynomial: Polynomial::zero(),
            minimal_polynomial: Polynomial::one(),
            empty: true,
        };
        let Some(sh) = hodge.slices.iter().find(|s| s.slice == slice) else {
            return Ok(empty);
        };
        if sh.im_dstar.cols() == 0 {
            return Ok(empty);
        }
        let image = &sh.laplacian * &sh.im_dstar;
        let restricted = sh
            .im_dstar
            .solve_full_rank(&image)
            .ok_or_else(|| Error::LinearSystem(format!("□ does not preserve im ∂* in degree {k}, slice {slice}")))?;
        let mu = restricted.minimal_polynomial();
        let c0 = mu.coeffs()[0].clone();
        if c0.is_zero() {
            return Err(Error::SingularLaplacian { degree: k, slice });
        }
        let coeffs: Vec<Rational> = mu.coeffs()[1..].iter().map(|c| -c / &c0).collect();
        Ok(InversePolynomial {
            degree: k,
            slice,
            polynomial: Polynomial::new(coeffs),
            minimal_polynomial: mu,
            empty: false,
        })
    }

    /// `∂` lowers the slice index by one, `∂*` raises it, `□` preserves it.
    pub fn check_slice_homogeneity(&self) -> bool {
        let ok = |m: &Matrix, src: &CochainSpace, dst: &CochainSpace, shift: i64| {
            (0..m.rows()).all(|r| {
                (0..m.cols()).all(|c| m[(r, c)].is_zero() || dst.slice_of(r) as i64 == src.slice_of(c) as i64 + shift)
            })
        };
        let n = self.top_degree();
        (0..=n).all(|k| {
            ok(&self.differentials[k], &self.spaces[k], &self.spaces[k + 1], -1)
                && (k == 0 || ok(&self.codifferentials[k], &self.spaces[k], &self.spaces[k - 1], 1))
                && ok(self.laplacian_matrix(k), &self.spaces[k], &self.spaces[k], 0)
        })
    }
}

/// Summary of one inverse polynomial in a suite report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InversePolynomialSummary {
    pub k: usize,
    pub slice: usize,
    pub empty: bool,
    pub degree: Option<usize>,
    pub minimal_polynomial_degree: Option<usize>,
    pub polynomial: String,
    pub inverts: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KostantReport {
    pub family: String,
    pub params: String,
    pub representation: String,
    pub rows: Vec<HomologyRow>,
    pub euler_sum: i64,
    pub inverse_polynomials: Vec<InversePolynomialSummary>,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl KostantComplex {
    /// Checks `p(□)` against the slice Laplacian: `□ p(□) = id` on `im ∂*`.
    pub fn verify_inverse_polynomial(&self, p: &InversePolynomial) -> Result<bool> {
        let hodge = self.hodge_decomposition(p.degree)?;
        let Some(sh) = hodge.slices.iter().find(|s| s.slice == p.slice) else {
            return Ok(p.empty);
        };
        if sh.im_dstar.cols() == 0 {
            return Ok(p.empty && p.polynomial.is_zero());
        }
        let image = &sh.laplacian * &p.polynomial.eval_matrix(&sh.laplacian);
        Ok(&image * &sh.im_dstar == sh.im_dstar)
    }

    /// Full algebraic suite: squares, slice homogeneity, Hodge decompositions,
    /// three-way homology agreement, Euler sums and inverse polynomials.
    pub fn suite_report(&self) -> KostantReport {
        let n = self.top_degree();
        let mut checks = Vec::new();

        let square = |name: &str, op: &str, pairs: Vec<(usize, Matrix)>| {
            let bad = pairs.into_iter().find_map(|(k, m)| m.first_nonzero().map(|(r, c, v)| (k, r, c, v.to_string())));
            CheckResult::from_bool(name, bad.is_none(), json!({"degrees": n}), || {
                let (k, r, c, v) = bad.clone().expect("failing entry");
                json!({"kind": "nonzero square", "operator": op, "degree": k, "row": r, "column": c, "value": v})
            })
        };
        checks.push(square(
            "d_squared",
            "∂∘∂",
            (0..n).map(|k| (k, &self.differentials[k + 1] * &self.differentials[k])).collect(),
        ));
        checks.push(square(
            "dstar_squared",
            "∂*∘∂*",
            (2..=n).map(|k| (k, &self.codifferentials[k - 1] * &self.codifferentials[k])).collect(),
        ));
        let homogeneous = self.check_slice_homogeneity();
        checks.push(CheckResult::from_bool("slice_homogeneity", homogeneous, json!({}), || json!({"homogeneous": false})));

        let hodge: Vec<Result<Arc<HodgeDecomposition>>> = (0..=n).map(|k| self.hodge_decomposition(k)).collect();
        let hodge_failure = hodge.iter().find_map(|h| h.as_ref().err().map(ToString::to_string));
        let sums: Vec<Value> = hodge
            .iter()
            .flatten()
            .map(|h| {
                let (a, b, c) = h.dims();
                json!({"k": h.degree, "im_d": a, "harmonic": b, "im_dstar": c, "dim": self.spaces[h.degree].dim()})
            })
            .collect();
        let sums_ok = hodge.iter().flatten().all(|h| {
            let (a, b, c) = h.dims();
            a + b + c == self.spaces[h.degree].dim()
        });
        checks.push(CheckResult::from_bool(
            "hodge_decomposition",
            hodge_failure.is_none() && sums_ok,
            json!({"degrees": sums}),
            || json!({"error": hodge_failure.clone().unwrap_or_else(|| "dimensions do not add up".into())}),
        ));

        let table = self.homology_table();
        let rows = table.as_ref().cloned().unwrap_or_default();
        checks.push(match &table {
            Ok(rows) => CheckResult::pass(
                "homology_agreement",
                json!({"dimensions": rows.iter().map(|r| r.dim_harmonic).collect::<Vec<_>>()}),
            ),
            Err(e) => CheckResult::fail("homology_agreement", json!({}), json!({"error": e.to_string()})),
        });

        let alternating = |f: &dyn Fn(&HomologyRow) -> usize| -> i64 {
            rows.iter()
                .map(|r| if r.k % 2 == 0 { f(r) as i64 } else { -(f(r) as i64) })
                .sum()
        };
        let euler_sum = alternating(&|r| r.dim_harmonic);
        let chain_sum = alternating(&|r| r.dim_chain);
        checks.push(CheckResult::from_bool(
            "euler_sum",
            table.is_ok() && euler_sum == 0 && chain_sum == 0,
            json!({"homology": euler_sum, "chains": chain_sum}),
            || json!({"homology": euler_sum, "chains": chain_sum}),
        ));

        let mut inverse_polynomials = Vec::new();
        let mut inverse_error = None;
        for k in 0..=n {
            for i in 0..=self.rep.filtration_length() {
                match self
                    .inverse_laplacian_polynomial(k, i)
                    .and_then(|p| self.verify_inverse_polynomial(&p).map(|ok| (p, ok)))
                {
                    Ok((p, inverts)) => inverse_polynomials.push(InversePolynomialSummary {
                        k,
                        slice: i,
                        empty: p.empty,
                        degree: p.polynomial.degree(),
                        minimal_polynomial_degree: p.minimal_polynomial.degree(),
                        polynomial: p.polynomial.to_string(),
                        inverts,
                    }),
                    Err(e) => {
                        inverse_error.get_or_insert_with(|| json!({"k": k, "slice": i, "error": e.to_string()}));
                    }
                }
            }
        }
        let bad_inverse = inverse_polynomials.iter().find(|p| !p.inverts).map(|p| json!({"k": p.k, "slice": p.slice}));
        let max_degree = inverse_polynomials.iter().filter_map(|p| p.minimal_polynomial_degree).max();
        checks.push(CheckResult::from_bool(
            "inverse_polynomials",
            inverse_error.is_none() && bad_inverse.is_none(),
            json!({"slices": inverse_polynomials.iter().filter(|p| !p.empty).count(), "max_minimal_degree": max_degree}),
            || inverse_error.clone().or(bad_inverse.clone()).unwrap_or(Value::Null),
        ));

        let alg = self.rep.algebra();
        let all_pass = checks.iter().all(CheckResult::passed);
        KostantReport {
            family: alg.family().name().to_string(),
            params: alg.family().params(),
            representation: self.rep.name().to_string(),
            rows,
            euler_sum,
            inverse_polynomials,
            checks,
            all_pass,
        }
    }
}

fn build_differential(rep: &GradedRepresentation, src: &CochainSpace, dst: &CochainSpace, options: ComplexOptions) -> Matrix {
    let dim_v = rep.dim();
    let mut m = Matrix::zeros(dst.dim(), src.dim());
    for (jpos, &mask) in dst.subsets().iter().enumerate() {
        for (t, a) in mask_elements(mask).into_iter().enumerate() {
            let ipos = src.subset_position(mask & !(1 << a)).expect("face of a subset");
            let s = options.differential_sign(t);
            let x = rep.x_action(a);
            for r in 0..dim_v {
                for c in 0..dim_v {
                    let v = &x[(r, c)];
                    if !v.is_zero() {
                        m[(dst.index(jpos, r), src.index(ipos, c))] += &s * v;
                    }
                }
            }
        }
    }
    m
}

fn build_codifferential(rep: &GradedRepresentation, src: &CochainSpace, dst: &CochainSpace) -> Matrix {
    let dim_v = rep.dim();
    let mut m = Matrix::zeros(dst.dim(), src.dim());
    for (ipos, &mask) in src.subsets().iter().enumerate() {
        for (t, a) in mask_elements(mask).into_iter().enumerate() {
            let jpos = dst.subset_position(mask & !(1 << a)).expect("face of a subset");
            // Terms are numbered from 1.
            let s = sign(t + 1);
            let z = rep.z_action(a);
            for r in 0..dim_v {
                for c in 0..dim_v {
                    let v = &z[(r, c)];
                    if !v.is_zero() {
                        m[(dst.index(jpos, r), src.index(ipos, c))] += &s * v;
                    }
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::GradedLieAlgebra;
    use crate::linalg::rat;

    fn complex(alg: GradedLieAlgebra, adjoint: bool) -> KostantComplex {
        let a = Arc::new(alg);
        let rep = if adjoint {
            GradedRepresentation::adjoint(a).unwrap()
        } else {
            GradedRepresentation::standard(a).unwrap()
        };
        KostantComplex::new(Arc::new(rep))
    }

    fn so41_standard() -> KostantComplex {
        complex(GradedLieAlgebra::conformal(3).unwrap(), false)
    }

    #[test]
    fn squares_vanish() {
        let c = so41_standard();
        for k in 0..3 {
            assert!((c.differential_matrix(k + 1) * c.differential_matrix(k)).is_zero());
        }
        for k in 2..=3 {
            assert!((c.codifferential_matrix(k - 1) * c.codifferential_matrix(k)).is_zero());
        }
    }

    #[test]
    fn degree_zero_differential() {
        let c = so41_standard();
        let rep = c.representation().clone();
        let d0 = c.differential_matrix(0);
        // g_-1 lowers the slice index, so the top vector has a nonzero image.
        let top = rep.slice_basis(2).column(0);
        let dv = d0.mul_vec(&top);
        assert!(!dv.iter().all(Zero::is_zero));
        for a in 0..3 {
            let expected = rep.x_action(a).mul_vec(&top);
            assert_eq!(&dv[a * 5..(a + 1) * 5], expected.as_slice());
        }
        let bottom = rep.slice_basis(0).column(0);
        assert!(d0.mul_vec(&bottom).iter().all(Zero::is_zero));
        // Oracle: invariants of g_-1 on V, by brute-force nullspace of the stacked actions.
        let stacked = Matrix::vstack(5, &[rep.x_action(0), rep.x_action(1), rep.x_action(2)]);
        let invariants = stacked.nullspace().cols();
        assert_eq!(invariants, 1);
        assert_eq!(d0.rank(), 5 - invariants);
    }

    #[test]
    fn degree_one_codifferential_is_minus_action() {
        let c = so41_standard();
        let rep = c.representation().clone();
        let m = c.codifferential_matrix(1);
        for a in 0..3 {
            for v in 0..5 {
                let mut e = vec![rat(0); 15];
                e[a * 5 + v] = rat(1);
                let mut unit = vec![rat(0); 5];
                unit[v] = rat(1);
                let expected: Vec<Rational> = rep.z_action(a).mul_vec(&unit).iter().map(|x| -x).collect();
                assert_eq!(m.mul_vec(&e), expected);
            }
        }
    }

    /// Second formula for the codifferential on 2-forms,
    /// `(∂*φ)(X) = Σ_i Z^i · φ(X_i, X)`, evaluated directly on alternating maps.
    fn codifferential_by_dual_bases(c: &KostantComplex) -> Matrix {
        let rep = c.representation();
        let n = c.top_degree();
        let dim_v = rep.dim();
        let src = c.space(2);
        let mut columns = Vec::new();
        for col in 0..src.dim() {
            let (mask, v) = src.split(col);
            let elems = mask_elements(mask);
            let phi = |x: usize, y: usize| -> Rational {
                if x == elems[0] && y == elems[1] {
                    rat(1)
                } else if x == elems[1] && y == elems[0] {
                    rat(-1)
                } else {
                    rat(0)
                }
            };
            let mut out = vec![rat(0); n * dim_v];
            for x in 0..n {
                for i in 0..n {
                    let f = phi(i, x);
                    if f.is_zero() {
                        continue;
                    }
                    let z = rep.z_action(i);
                    for r in 0..dim_v {
                        out[x * dim_v + r] += &f * &z[(r, v)];
                    }
                }
            }
            columns.push(out);
        }
        Matrix::from_columns(n * dim_v, &columns)
    }

    #[test]
    fn codifferential_formulas_agree_up_to_global_sign() {
        let c = so41_standard();
        let direct = codifferential_by_dual_bases(&c);
        assert_eq!(&-&direct, c.codifferential_matrix(2));
    }

    #[test]
    fn laplacian_properties() {
        let c = so41_standard();
        assert!(c.check_slice_homogeneity());
        for k in 0..=3 {
            let lap = c.laplacian_matrix(k);
            if k < 3 {
                assert_eq!(c.differential_matrix(k) * lap, c.laplacian_matrix(k + 1) * c.differential_matrix(k));
            }
            if k > 0 {
                assert_eq!(c.codifferential_matrix(k) * lap, c.laplacian_matrix(k - 1) * c.codifferential_matrix(k));
            }
            let h = c.hodge_decomposition(k).unwrap();
            assert!((lap * &h.harmonic).is_zero());
        }
    }

    #[test]
    fn hodge_dimensions_so41_standard() {
        let c = so41_standard();
        let h0 = c.hodge_decomposition(0).unwrap();
        assert_eq!(h0.dims(), (0, 1, 4));
        assert_eq!(c.hodge_decomposition(1).unwrap().dims().1, 5);
        assert_eq!(c.homology_dimensions().unwrap(), vec![1, 5, 5, 1]);
    }

    #[test]
    fn hodge_projectors_are_complementary() {
        let c = complex(GradedLieAlgebra::grassmannian(2, 2).unwrap(), false);
        for k in 0..=4 {
            let h = c.hodge_decomposition(k).unwrap();
            let dim = c.space(k).dim();
            let sum = &(&h.proj_im_d + &h.proj_harmonic) + &h.proj_im_dstar;
            assert_eq!(sum, Matrix::identity(dim));
            for p in [&h.proj_im_d, &h.proj_harmonic, &h.proj_im_dstar] {
                assert_eq!(&(p * p), p);
            }
            assert!((&h.proj_im_d * &h.proj_harmonic).is_zero());
            assert!((&h.proj_harmonic * &h.proj_im_dstar).is_zero());
        }
    }

    #[test]
    fn harmonic_projection_behaviour() {
        let c = so41_standard();
        let k = 1;
        let h = c.hodge_decomposition(k).unwrap();
        let pi = c.harmonic_projection(k).unwrap().matrix;
        assert_eq!(&pi * &h.harmonic, Matrix::identity(h.harmonic.cols()));
        assert!((&pi * &h.im_dstar).is_zero());
        // π_H(h + ∂*ψ) = h.
        let psi: Vec<Rational> = (0..c.space(2).dim()).map(|i| rat((i % 7) as i64 - 3)).collect();
        let coeffs: Vec<Rational> = (0..h.harmonic.cols()).map(|i| rat(i as i64 + 1)).collect();
        let harm = h.harmonic.mul_vec(&coeffs);
        let x: Vec<Rational> = harm
            .iter()
            .zip(c.codifferential_matrix(2).mul_vec(&psi))
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(c.project_harmonic(k, &x).unwrap(), coeffs);
        // Elements outside ker ∂* are rejected.
        let mut bad = vec![rat(0); c.space(1).dim()];
        bad[c.space(1).index(0, 0)] = rat(1);
        bad[c.space(1).index(0, 4)] = rat(1);
        if !c.codifferential_matrix(1).mul_vec(&bad).iter().all(Zero::is_zero) {
            assert!(matches!(c.project_harmonic(k, &bad), Err(Error::NotInKernel { .. })));
        }
    }

    #[test]
    fn inverse_polynomials_invert_on_image() {
        let c = so41_standard();
        for k in 0..=3 {
            for i in 0..=2 {
                let p = c.inverse_laplacian_polynomial(k, i).unwrap();
                let h = c.hodge_decomposition(k).unwrap();
                let Some(sh) = h.slices.iter().find(|s| s.slice == i) else {
                    assert!(p.empty);
                    continue;
                };
                if sh.im_dstar.cols() == 0 {
                    assert!(p.empty && p.polynomial.is_zero());
                    continue;
                }
                let inv = p.polynomial.eval_matrix(&sh.laplacian);
                assert_eq!(&(&sh.laplacian * &inv) * &sh.im_dstar, sh.im_dstar);
                // Oracle: minimality means I, M, .., M^{d-1} are independent.
                let restricted = sh.im_dstar.solve_full_rank(&(&sh.laplacian * &sh.im_dstar)).unwrap();
                let d = p.minimal_polynomial.degree().unwrap();
                let m = restricted.rows();
                let powers: Vec<Vec<Rational>> = (0..d).map(|e| restricted.pow(e).entries().to_vec()).collect();
                assert_eq!(Matrix::from_columns(m * m, &powers).rank(), d);
                assert!(p.minimal_polynomial.eval_matrix(&restricted).is_zero());
                assert!(p.polynomial.degree().unwrap() < d);
            }
        }
    }

    #[test]
    fn out_of_range_degrees() {
        let c = so41_standard();
        assert!(matches!(c.differential(4), Err(Error::IndexOutOfRange { .. })));
        assert!(c.codifferential(0).unwrap().matrix.rows() == 0);
        assert_eq!(c.differential(3).unwrap().matrix.rows(), 0);
    }

    #[test]
    fn suite_report_passes_and_flags_sign_bug() {
        let r = so41_standard().suite_report();
        assert!(r.all_pass, "{:#?}", r.checks);
        assert_eq!(r.euler_sum, 0);
        let alg = Arc::new(GradedLieAlgebra::conformal(3).unwrap());
        let rep = Arc::new(GradedRepresentation::adjoint(alg).unwrap());
        let bad = KostantComplex::with_options(rep, ComplexOptions { inject_sign_bug: true }).suite_report();
        assert!(!bad.all_pass);
        let d2 = bad.checks.iter().find(|c| c.name == "d_squared").unwrap();
        assert!(!d2.passed());
        assert_eq!(d2.witness.as_ref().unwrap()["kind"], "nonzero square");
    }

    #[test]
    fn adjoint_euler_characteristic() {
        let c = complex(GradedLieAlgebra::conformal(3).unwrap(), true);
        let dims = c.homology_dimensions().unwrap();
        let euler: i64 = dims.iter().enumerate().map(|(k, &d)| if k % 2 == 0 { d as i64 } else { -(d as i64) }).sum();
        assert_eq!(euler, 0);
    }
}

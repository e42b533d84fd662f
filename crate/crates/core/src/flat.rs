//! The flat foliated model: leaf coordinates `x_1..x_n` (one per basis
//! element of `g_-1`), inert transverse coordinates `y_1..y_m`, and partial
//! forms with polynomial coefficients.
//!
//! In the exponential gauge the Cartan connection pulls back to the constant
//! form `θ(∂/∂x_a) = X_a`, so the twisted derivative is `d^V = d + ∂` where
//! `∂` acts pointwise. A term `x^m ⊗ (e_I ⊗ v)` with `v ∈ V_i` has weight
//! `|I| + i + |m|`; `d`, `∂` and `∂*` all preserve it and ignore `y`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kostant::{ComplexOptions, HodgeDecomposition, InversePolynomial, KostantComplex};
use crate::linalg::{mask_elements, rat, Matrix, Polynomial, Rational, SparseMatrix, SparseRref, SparseVec};
use crate::normalization::seeded_rng;
use crate::report::CheckResult;

/// Exponents of the leaf and transverse variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Monomial {
    pub x: Vec<u32>,
    pub y: Vec<u32>,
}

impl Monomial {
    pub fn one(leaf_dim: usize, transverse_dim: usize) -> Self {
        Monomial {
            x: vec![0; leaf_dim],
            y: vec![0; transverse_dim],
        }
    }

    pub fn x_degree(&self) -> u32 {
        self.x.iter().sum()
    }

    pub fn y_degree(&self) -> u32 {
        self.y.iter().sum()
    }

    pub fn degree(&self) -> u32 {
        self.x_degree() + self.y_degree()
    }

    /// `∂/∂x_a` of the monomial: the lowered monomial and the factor.
    pub fn derivative(&self, a: usize) -> Option<(Monomial, u32)> {
        let e = self.x[a];
        (e > 0).then(|| {
            let mut m = self.clone();
            m.x[a] -= 1;
            (m, e)
        })
    }

    pub fn times_x(&self, a: usize) -> Monomial {
        let mut m = self.clone();
        m.x[a] += 1;
        m
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (name, exps) in [("x", &self.x), ("y", &self.y)] {
            for (i, &e) in exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => parts.push(format!("{name}{}", i + 1)),
                    _ => parts.push(format!("{name}{}^{e}", i + 1)),
                }
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// All exponent vectors in `vars` variables of total degree `degree`.
pub fn monomials(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    if vars == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for rest in monomials(vars - 1, degree - first) {
            let mut m = Vec::with_capacity(vars);
            m.push(first);
            m.extend(rest);
            out.push(m);
        }
    }
    out
}

/// Vector-valued polynomial: a map from monomials to nonzero coefficient vectors.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PolyVec {
    width: usize,
    terms: BTreeMap<Monomial, Vec<Rational>>,
}

impl PolyVec {
    pub fn new(width: usize) -> Self {
        PolyVec {
            width,
            terms: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Vec<Rational>> {
        &self.terms
    }

    pub fn get(&self, m: &Monomial) -> Option<&Vec<Rational>> {
        self.terms.get(m)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `self[m] += s * v`.
    pub fn add_scaled(&mut self, m: &Monomial, v: &[Rational], s: &Rational) {
        assert_eq!(v.len(), self.width, "coefficient width mismatch");
        if s.is_zero() || v.iter().all(Zero::is_zero) {
            return;
        }
        let entry = self
            .terms
            .entry(m.clone())
            .or_insert_with(|| vec![Rational::zero(); v.len()]);
        for (e, x) in entry.iter_mut().zip(v) {
            if !x.is_zero() {
                *e += s * x;
            }
        }
        if entry.iter().all(Zero::is_zero) {
            self.terms.remove(m);
        }
    }

    pub fn add_entry(&mut self, m: &Monomial, index: usize, value: &Rational) {
        if value.is_zero() {
            return;
        }
        let width = self.width;
        let entry = self
            .terms
            .entry(m.clone())
            .or_insert_with(|| vec![Rational::zero(); width]);
        entry[index] += value;
        if entry.iter().all(Zero::is_zero) {
            self.terms.remove(m);
        }
    }

    pub fn combine(&self, other: &PolyVec, s: &Rational) -> PolyVec {
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.add_scaled(m, v, s);
        }
        out
    }

    pub fn scale(&self, s: &Rational) -> PolyVec {
        let mut out = PolyVec::new(self.width);
        for (m, v) in &self.terms {
            out.add_scaled(m, v, s);
        }
        out
    }

    /// Applies a constant matrix to every coefficient.
    pub fn map(&self, m: &SparseMatrix) -> PolyVec {
        let mut out = PolyVec::new(m.rows());
        for (mono, v) in &self.terms {
            out.add_scaled(mono, &m.apply(v), &Rational::one());
        }
        out
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn first_nonzero(&self) -> Option<(&Monomial, usize, &Rational)> {
        self.terms
            .iter()
            .next()
            .and_then(|(m, v)| v.iter().enumerate().find(|(_, x)| !x.is_zero()).map(|(i, x)| (m, i, x)))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(m, v)| {
                    let coeffs: Vec<Value> = v
                        .iter()
                        .enumerate()
                        .filter(|(_, x)| !x.is_zero())
                        .map(|(i, x)| json!([i, x.to_string()]))
                        .collect();
                    json!({"monomial": m.to_string(), "coefficients": coeffs})
                })
                .collect(),
        )
    }
}

/// A partial `V`-valued form of degree `degree`; coefficients are cochains of
/// that degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyPartialForm {
    pub degree: usize,
    pub coeffs: PolyVec,
}

impl PolyPartialForm {
    pub fn zero(degree: usize, width: usize) -> Self {
        PolyPartialForm {
            degree,
            coeffs: PolyVec::new(width),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_zero()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree);
        PolyPartialForm {
            degree: self.degree,
            coeffs: self.coeffs.combine(&other.coeffs, &Rational::one()),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree);
        PolyPartialForm {
            degree: self.degree,
            coeffs: self.coeffs.combine(&other.coeffs, &-Rational::one()),
        }
    }

    pub fn scale(&self, s: &Rational) -> Self {
        PolyPartialForm {
            degree: self.degree,
            coeffs: self.coeffs.scale(s),
        }
    }
}

/// A section of the homology bundle in degree `degree`, in coordinates of
/// the harmonic basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HarmonicSection {
    pub degree: usize,
    pub coeffs: PolyVec,
}

impl HarmonicSection {
    pub fn zero(degree: usize, width: usize) -> Self {
        HarmonicSection {
            degree,
            coeffs: PolyVec::new(width),
        }
    }

    /// `x^m` times the `j`-th harmonic basis element.
    pub fn basis(degree: usize, width: usize, monomial: Monomial, j: usize) -> Self {
        let mut coeffs = PolyVec::new(width);
        coeffs.add_entry(&monomial, j, &Rational::one());
        HarmonicSection { degree, coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_zero()
    }
}

/// Everything derived from the Hodge decompositions; computed on first use.
#[derive(Debug)]
struct HarmonicData {
    hodge: Vec<Arc<HodgeDecomposition>>,
    inclusion: Vec<SparseMatrix>,
    projection: Vec<SparseMatrix>,
    harmonic_slices: Vec<Vec<usize>>,
    inverse_polys: Vec<Vec<InversePolynomial>>,
}

/// Solution operator of the splitting characterization on one weight block.
#[derive(Debug)]
struct WeightSolution {
    phi_keys: Vec<(Vec<u32>, usize)>,
    beta_index: HashMap<(Vec<u32>, usize), usize>,
    columns: Vec<SparseVec>,
}

type WeightCell = Arc<OnceLock<Result<Arc<WeightSolution>>>>;

#[derive(Debug)]
pub struct FlatModel {
    complex: Arc<KostantComplex>,
    leaf_dim: usize,
    transverse_dim: usize,
    max_degree: u32,
    algebraic: Vec<SparseMatrix>,
    codiff: Vec<SparseMatrix>,
    /// `wedge[k][a][I]`: position and sign of `e_a ∧ e_I` in degree `k + 1`.
    wedge: Vec<Vec<Vec<Option<(usize, Rational)>>>>,
    harmonic: OnceLock<Result<Arc<HarmonicData>>>,
    weight_blocks: Mutex<HashMap<(usize, u32), WeightCell>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Polynomial degree of the harmonic sections used for the splitting checks.
    pub test_degree: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 8,
            seed: 0,
            test_degree: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub family: String,
    pub params: String,
    pub representation: String,
    pub degree_cap: u32,
    pub transverse_dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    Bgg,
    Splitting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderStatus {
    Pass,
    Fail,
    /// The component vanished on every test section.
    ZeroComponent,
}

/// One row of the order table. For BGG rows `expected` is the predicted
/// order `i_2 - i_1 + 1`; for splitting rows it is the bound `N - i_0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderRow {
    pub kind: OrderKind,
    pub k: usize,
    pub source_slice: usize,
    pub target_slice: Option<usize>,
    pub expected: i64,
    pub measured: Option<u32>,
    pub status: OrderStatus,
}

impl FlatModel {
    pub fn new(complex: Arc<KostantComplex>, transverse_dim: usize, max_degree: u32) -> Result<Self> {
        let rep = complex.representation().clone();
        let n = complex.top_degree();
        let big_n = rep.filtration_length() as u32;
        if max_degree < big_n {
            return Err(Error::InvalidParameters(format!(
                "degree cap {max_degree} is below the filtration length {big_n}"
            )));
        }
        let options = complex.options();
        let algebraic = (0..=n).map(|k| SparseMatrix::from_dense(complex.differential_matrix(k))).collect();
        let mut codiff: Vec<SparseMatrix> =
            (0..=n).map(|k| SparseMatrix::from_dense(complex.codifferential_matrix(k))).collect();
        // Degree n + 1 is the zero space.
        codiff.push(SparseMatrix::from_dense(&Matrix::zeros(complex.space(n).dim(), 0)));
        let wedge = (0..=n).map(|k| wedge_table(&complex, k, options)).collect();
        Ok(FlatModel {
            complex,
            leaf_dim: n,
            transverse_dim,
            max_degree,
            algebraic,
            codiff,
            wedge,
            harmonic: OnceLock::new(),
            weight_blocks: Mutex::new(HashMap::new()),
        })
    }

    pub fn complex(&self) -> &Arc<KostantComplex> {
        &self.complex
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_dim
    }

    pub fn transverse_dim(&self) -> usize {
        self.transverse_dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// `N`, the largest slice index of `V`.
    pub fn filtration_length(&self) -> usize {
        self.complex.representation().filtration_length()
    }

    pub fn form_width(&self, k: usize) -> usize {
        self.complex.space(k).dim()
    }

    pub fn one(&self) -> Monomial {
        Monomial::one(self.leaf_dim, self.transverse_dim)
    }

    fn harmonic_data(&self) -> Result<Arc<HarmonicData>> {
        self.harmonic
            .get_or_init(|| {
                let n = self.leaf_dim;
                let big_n = self.filtration_length();
                let hodge = (0..=n)
                    .map(|k| self.complex.hodge_decomposition(k))
                    .collect::<Result<Vec<_>>>()?;
                let inclusion = hodge.iter().map(|h| SparseMatrix::from_dense(&h.harmonic)).collect();
                let projection = hodge
                    .iter()
                    .map(|h| SparseMatrix::from_dense(&h.harmonic_coordinates))
                    .collect();
                let harmonic_slices = hodge
                    .iter()
                    .map(|h| (0..h.harmonic.cols()).map(|j| h.harmonic_slice(j)).collect())
                    .collect();
                let inverse_polys = (0..=n)
                    .map(|k| {
                        (0..=big_n)
                            .map(|i| self.complex.inverse_laplacian_polynomial(k, i))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Arc::new(HarmonicData {
                    hodge,
                    inclusion,
                    projection,
                    harmonic_slices,
                    inverse_polys,
                }))
            })
            .clone()
    }

    /// `dim H_k`.
    pub fn harmonic_dim(&self, k: usize) -> Result<usize> {
        Ok(self.harmonic_data()?.hodge[k].harmonic.cols())
    }

    /// Slice index of each harmonic basis element in degree `k`.
    pub fn harmonic_slices(&self, k: usize) -> Result<Vec<usize>> {
        Ok(self.harmonic_data()?.harmonic_slices[k].clone())
    }

    pub fn inverse_polynomial(&self, k: usize, i: usize) -> Result<InversePolynomial> {
        Ok(self.harmonic_data()?.inverse_polys[k][i].clone())
    }

    fn check_form(&self, phi: &PolyPartialForm) -> Result<()> {
        if phi.degree > self.leaf_dim {
            return Err(Error::IndexOutOfRange {
                index: phi.degree,
                max: self.leaf_dim,
            });
        }
        if phi.coeffs.width() != self.form_width(phi.degree) {
            return Err(Error::DimensionMismatch {
                expected: self.form_width(phi.degree),
                found: phi.coeffs.width(),
            });
        }
        self.check_cap(phi.coeffs.max_degree())
    }

    fn check_section(&self, alpha: &HarmonicSection) -> Result<()> {
        if alpha.degree > self.leaf_dim {
            return Err(Error::IndexOutOfRange {
                index: alpha.degree,
                max: self.leaf_dim,
            });
        }
        let width = self.harmonic_dim(alpha.degree)?;
        if alpha.coeffs.width() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: alpha.coeffs.width(),
            });
        }
        self.check_cap(alpha.coeffs.max_degree())
    }

    fn check_cap(&self, degree: Option<u32>) -> Result<()> {
        match degree {
            Some(d) if d > self.max_degree => Err(Error::DegreeOverflow {
                found: d as usize,
                cap: self.max_degree as usize,
            }),
            _ => Ok(()),
        }
    }

    /// Leafwise exterior derivative; `y` is a parameter.
    pub fn partial_exterior_derivative(&self, phi: &PolyPartialForm) -> Result<PolyPartialForm> {
        self.check_form(phi)?;
        Ok(self.d_flat(phi))
    }

    fn d_flat(&self, phi: &PolyPartialForm) -> PolyPartialForm {
        let k = phi.degree;
        let dim_v = self.complex.representation().dim();
        let mut out = PolyPartialForm::zero(k + 1, self.form_width(k + 1));
        for (m, v) in phi.coeffs.terms() {
            for a in 0..self.leaf_dim {
                let Some((lower, e)) = m.derivative(a) else { continue };
                let mut target = vec![Rational::zero(); out.coeffs.width()];
                let mut any = false;
                for (ipos, entry) in self.wedge[k][a].iter().enumerate() {
                    let Some((jpos, s)) = entry else { continue };
                    for c in 0..dim_v {
                        let x = &v[ipos * dim_v + c];
                        if !x.is_zero() {
                            target[jpos * dim_v + c] += s * x;
                            any = true;
                        }
                    }
                }
                if any {
                    out.coeffs.add_scaled(&lower, &target, &rat(e as i64));
                }
            }
        }
        out
    }

    /// Pointwise algebraic differential `∂`.
    pub fn algebraic_differential(&self, phi: &PolyPartialForm) -> Result<PolyPartialForm> {
        self.check_form(phi)?;
        Ok(PolyPartialForm {
            degree: phi.degree + 1,
            coeffs: phi.coeffs.map(&self.algebraic[phi.degree]),
        })
    }

    /// `d^V φ = dφ + θ ∧• φ`.
    pub fn twisted_derivative(&self, phi: &PolyPartialForm) -> Result<PolyPartialForm> {
        self.check_form(phi)?;
        Ok(self.twisted(phi))
    }

    fn twisted(&self, phi: &PolyPartialForm) -> PolyPartialForm {
        let mut out = self.d_flat(phi);
        for (m, v) in phi.coeffs.terms() {
            out.coeffs.add_scaled(m, &self.algebraic[phi.degree].apply(v), &Rational::one());
        }
        out
    }

    /// Pointwise `∂*`, defined for forms of degree at least one.
    pub fn codifferential(&self, phi: &PolyPartialForm) -> Result<PolyPartialForm> {
        self.check_form(phi)?;
        if phi.degree == 0 {
            return Err(Error::IndexOutOfRange { index: 0, max: 0 });
        }
        Ok(self.dstar(phi))
    }

    fn dstar(&self, phi: &PolyPartialForm) -> PolyPartialForm {
        PolyPartialForm {
            degree: phi.degree - 1,
            coeffs: phi.coeffs.map(&self.codiff[phi.degree]),
        }
    }

    fn dstar_d(&self, phi: &PolyPartialForm) -> PolyPartialForm {
        self.dstar(&self.twisted(phi))
    }

    /// `□^R = ∂* d^V + d^V ∂*`.
    pub fn laplacian_r(&self, phi: &PolyPartialForm) -> Result<PolyPartialForm> {
        self.check_form(phi)?;
        let mut out = self.dstar_d(phi);
        if phi.degree > 0 {
            out = out.add(&self.twisted(&self.dstar(phi)));
        }
        Ok(out)
    }

    /// Harmonic representative of a section of the homology bundle.
    pub fn include(&self, alpha: &HarmonicSection) -> Result<PolyPartialForm> {
        self.check_section(alpha)?;
        let data = self.harmonic_data()?;
        Ok(PolyPartialForm {
            degree: alpha.degree,
            coeffs: alpha.coeffs.map(&data.inclusion[alpha.degree]),
        })
    }

    /// `π_H`, defined on forms with values in `ker ∂*`.
    pub fn project(&self, phi: &PolyPartialForm) -> Result<HarmonicSection> {
        self.check_form(phi)?;
        if phi.degree > 0 && !self.dstar(phi).is_zero() {
            return Err(Error::NotInKernel { degree: phi.degree });
        }
        let data = self.harmonic_data()?;
        Ok(HarmonicSection {
            degree: phi.degree,
            coeffs: phi.coeffs.map(&data.projection[phi.degree]),
        })
    }

    /// `S = S_N ∘ .. ∘ S_0` with `S_i φ = φ - p_{k,i}(∂* d^V)(∂* d^V φ)`.
    pub fn splitting_operator(&self, alpha: &HarmonicSection) -> Result<PolyPartialForm> {
        let data = self.harmonic_data()?;
        let mut phi = self.include(alpha)?;
        for p in &data.inverse_polys[alpha.degree] {
            let psi = self.dstar_d(&phi);
            if psi.is_zero() {
                break;
            }
            if p.empty {
                continue;
            }
            phi = phi.sub(&self.horner(&p.polynomial, &psi));
        }
        Ok(phi)
    }

    /// `p(∂* d^V) ψ`.
    fn horner(&self, p: &Polynomial, psi: &PolyPartialForm) -> PolyPartialForm {
        let coeffs = p.coeffs();
        let mut acc = PolyPartialForm::zero(psi.degree, psi.coeffs.width());
        for c in coeffs.iter().rev() {
            acc = self.dstar_d(&acc).add(&psi.scale(c));
        }
        acc
    }

    /// The splitting operator obtained by solving `∂*φ = 0`, `π_H φ = α`,
    /// `∂* d^V φ = 0` directly on each weight block.
    pub fn splitting_by_characterization(&self, alpha: &HarmonicSection) -> Result<PolyPartialForm> {
        self.check_section(alpha)?;
        let data = self.harmonic_data()?;
        let k = alpha.degree;
        let slices = &data.harmonic_slices[k];
        let mut out = PolyPartialForm::zero(k, self.form_width(k));
        for (m, v) in alpha.coeffs.terms() {
            for (j, a) in v.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                let w = (k + slices[j]) as u32 + m.x_degree();
                let sol = self.weight_solution(k, w)?;
                let col = sol.beta_index[&(m.x.clone(), j)];
                for (p, val) in &sol.columns[col] {
                    let (x, c) = &sol.phi_keys[*p];
                    let mono = Monomial {
                        x: x.clone(),
                        y: m.y.clone(),
                    };
                    out.coeffs.add_entry(&mono, *c, &(a * val));
                }
            }
        }
        Ok(out)
    }

    fn weight_solution(&self, k: usize, w: u32) -> Result<Arc<WeightSolution>> {
        let cell = {
            let mut blocks = self.weight_blocks.lock().expect("weight block cache poisoned");
            blocks.entry((k, w)).or_default().clone()
        };
        cell.get_or_init(|| self.solve_weight_block(k, w).map(Arc::new)).clone()
    }

    fn solve_weight_block(&self, k: usize, w: u32) -> Result<WeightSolution> {
        let data = self.harmonic_data()?;
        let space = self.complex.space(k);
        let n = self.leaf_dim;
        let degree_of = |slice: usize| -> Option<u32> {
            let d = w as i64 - (k + slice) as i64;
            (d >= 0 && d <= self.max_degree as i64).then_some(d as u32)
        };
        let mut phi_keys = Vec::new();
        for c in 0..space.dim() {
            if let Some(d) = degree_of(space.slice_of(c)) {
                for m in monomials(n, d) {
                    phi_keys.push((m, c));
                }
            }
        }
        let mut beta_keys = Vec::new();
        for (j, &s) in data.harmonic_slices[k].iter().enumerate() {
            if let Some(d) = degree_of(s) {
                for m in monomials(n, d) {
                    beta_keys.push((m, j));
                }
            }
        }
        let n_phi = phi_keys.len();
        let ncols = n_phi + beta_keys.len();

        // Equations keyed by (condition, monomial, coordinate).
        let mut rows: BTreeMap<(u8, Vec<u32>, usize), SparseVec> = BTreeMap::new();
        let mut push = |key: (u8, Vec<u32>, usize), col: usize, val: Rational| {
            rows.entry(key).or_default().push((col, val));
        };
        let equations: Vec<Vec<(u8, Vec<u32>, usize, Rational)>> = phi_keys
            .par_iter()
            .map(|(m, c)| {
                let mono = Monomial {
                    x: m.clone(),
                    y: vec![0; self.transverse_dim],
                };
                let mut phi = PolyPartialForm::zero(k, space.dim());
                phi.coeffs.add_entry(&mono, *c, &Rational::one());
                let mut eqs = Vec::new();
                let mut collect = |tag: u8, f: &PolyVec| {
                    for (mm, v) in f.terms() {
                        for (i, x) in v.iter().enumerate() {
                            if !x.is_zero() {
                                eqs.push((tag, mm.x.clone(), i, x.clone()));
                            }
                        }
                    }
                };
                if k > 0 {
                    collect(0, &self.dstar(&phi).coeffs);
                }
                collect(1, &self.dstar_d(&phi).coeffs);
                collect(2, &phi.coeffs.map(&data.projection[k]));
                eqs
            })
            .collect();
        for (col, eqs) in equations.into_iter().enumerate() {
            for (tag, m, i, x) in eqs {
                push((tag, m, i), col, x);
            }
        }
        for (b, (m, j)) in beta_keys.iter().enumerate() {
            push((2, m.clone(), *j), n_phi + b, -Rational::one());
        }

        let mut rref = SparseRref::new(ncols);
        for (_, mut row) in rows {
            row.sort_by_key(|(c, _)| *c);
            rref.insert(row);
        }
        if let Some(p) = rref.pivots().find(|&p| p >= n_phi) {
            return Err(Error::Characterization(format!(
                "weight {w} in degree {k}: harmonic coordinate {} is constrained",
                p - n_phi
            )));
        }
        if rref.rank() != n_phi {
            return Err(Error::Characterization(format!(
                "weight {w} in degree {k}: solution is not unique ({} free coefficients)",
                n_phi - rref.rank()
            )));
        }
        let mut columns = vec![SparseVec::new(); beta_keys.len()];
        for p in 0..n_phi {
            let row = rref.pivot_row(p).expect("every coefficient is a pivot");
            for (c, v) in row {
                if *c >= n_phi {
                    columns[*c - n_phi].push((p, -v.clone()));
                }
            }
        }
        let beta_index = beta_keys.into_iter().enumerate().map(|(i, key)| (key, i)).collect();
        Ok(WeightSolution {
            phi_keys,
            beta_index,
            columns,
        })
    }

    /// `D α = π_H(d^V S α)`.
    pub fn bgg_operator(&self, alpha: &HarmonicSection) -> Result<HarmonicSection> {
        if alpha.degree >= self.leaf_dim {
            return Err(Error::IndexOutOfRange {
                index: alpha.degree,
                max: self.leaf_dim - 1,
            });
        }
        let s = self.splitting_operator(alpha)?;
        self.project(&self.twisted(&s))
    }

    /// Basis of the parallel sections `f(y) exp(-Σ x_a ρ(X_a)) v` with
    /// `deg f ≤ transverse_degree`.
    pub fn parallel_sections(&self, transverse_degree: u32) -> Result<Vec<PolyPartialForm>> {
        let rep = self.complex.representation();
        let big_n = self.filtration_length() as u32;
        let needed = big_n + if self.transverse_dim > 0 { transverse_degree } else { 0 };
        self.check_cap(Some(needed))?;
        let dim_v = rep.dim();
        let one = self.one();
        let mut out = Vec::new();
        for y in self.y_monomials(transverse_degree) {
            for v in 0..dim_v {
                let mut term = PolyVec::new(dim_v);
                let mut unit = vec![Rational::zero(); dim_v];
                unit[v] = Rational::one();
                term.add_scaled(&Monomial { x: one.x.clone(), y: y.clone() }, &unit, &Rational::one());
                let mut total = term.clone();
                for j in 1.. {
                    let mut next = PolyVec::new(dim_v);
                    let s = -rat(1) / rat(j);
                    for (m, c) in term.terms() {
                        for a in 0..self.leaf_dim {
                            next.add_scaled(&m.times_x(a), &rep.x_action(a).mul_vec(c), &s);
                        }
                    }
                    if next.is_zero() {
                        break;
                    }
                    total = total.combine(&next, &Rational::one());
                    term = next;
                }
                out.push(PolyPartialForm {
                    degree: 0,
                    coeffs: total,
                });
            }
        }
        Ok(out)
    }

    fn y_monomials(&self, max_degree: u32) -> Vec<Vec<u32>> {
        if self.transverse_dim == 0 {
            return vec![vec![]];
        }
        (0..=max_degree).flat_map(|d| monomials(self.transverse_dim, d)).collect()
    }

    /// Dimension of `ker d^V` on 0-forms of total degree at most the cap and
    /// transverse degree at most `transverse_degree`, by exact elimination.
    pub fn parallel_dimension_by_solve(&self, transverse_degree: u32) -> Result<usize> {
        let dim_v = self.complex.representation().dim();
        let mut basis = Vec::new();
        for y in self.y_monomials(transverse_degree) {
            let yd: u32 = y.iter().sum();
            for d in 0..=self.max_degree.saturating_sub(yd) {
                for x in monomials(self.leaf_dim, d) {
                    basis.push(Monomial { x, y: y.clone() });
                }
            }
        }
        let images: Vec<PolyPartialForm> = basis
            .par_iter()
            .flat_map_iter(|m| {
                (0..dim_v).map(move |v| {
                    let mut phi = PolyPartialForm::zero(0, dim_v);
                    phi.coeffs.add_entry(m, v, &Rational::one());
                    self.twisted(&phi)
                })
            })
            .collect();
        let count = images.len();
        Ok(count - rank_of_forms(images.iter().map(|f| &f.coeffs)))
    }

    /// Random form of degree `k` with a few terms of total degree at most
    /// `max_degree`, including transverse variables when present.
    pub fn random_form(&self, rng: &mut ChaCha8Rng, k: usize, max_degree: u32, terms: usize) -> PolyPartialForm {
        let width = self.form_width(k);
        let mut phi = PolyPartialForm::zero(k, width);
        for _ in 0..terms {
            let mut m = self.one();
            let d = rng.gen_range(0..=max_degree);
            for _ in 0..d {
                let total = self.leaf_dim + self.transverse_dim;
                let v = rng.gen_range(0..total);
                if v < self.leaf_dim {
                    m.x[v] += 1;
                } else {
                    m.y[v - self.leaf_dim] += 1;
                }
            }
            let coeffs: Vec<Rational> = (0..width).map(|_| rat(rng.gen_range(-3..=3))).collect();
            phi.coeffs.add_scaled(&m, &coeffs, &Rational::one());
        }
        phi
    }

    /// Harmonic basis sections `x^m h_j` with `|m| ≤ degree` in degree `k`,
    /// optionally restricted to one harmonic slice.
    pub fn harmonic_test_basis(&self, k: usize, degree: u32, slice: Option<usize>) -> Result<Vec<HarmonicSection>> {
        let slices = self.harmonic_slices(k)?;
        let width = slices.len();
        let mut out = Vec::new();
        for d in 0..=degree.min(self.max_degree) {
            for x in monomials(self.leaf_dim, d) {
                for (j, &s) in slices.iter().enumerate() {
                    if slice.is_none_or(|t| t == s) {
                        let m = Monomial {
                            x: x.clone(),
                            y: vec![0; self.transverse_dim],
                        };
                        out.push(HarmonicSection::basis(k, width, m, j));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Measured orders of the BGG components and splitting operators.
    pub fn order_table(&self) -> Result<Vec<OrderRow>> {
        let big_n = self.filtration_length();
        let test_degree = (big_n as u32 + 1).min(self.max_degree);
        let mut rows = Vec::new();
        for k in 0..=self.leaf_dim {
            let src = distinct(&self.harmonic_slices(k)?);
            for &i0 in &src {
                let basis = self.harmonic_test_basis(k, test_degree, Some(i0))?;
                let images: Vec<(u32, PolyPartialForm)> = basis
                    .par_iter()
                    .map(|a| Ok((a.coeffs.max_degree().unwrap_or(0), self.splitting_operator(a)?)))
                    .collect::<Result<_>>()?;
                let measured = images
                    .iter()
                    .flat_map(|(d, s)| s.coeffs.terms().keys().map(move |m| d - m.degree()))
                    .max()
                    .unwrap_or(0);
                let bound = (big_n - i0) as i64;
                rows.push(OrderRow {
                    kind: OrderKind::Splitting,
                    k,
                    source_slice: i0,
                    target_slice: None,
                    expected: bound,
                    measured: Some(measured),
                    status: if measured as i64 <= bound { OrderStatus::Pass } else { OrderStatus::Fail },
                });
                if k == self.leaf_dim {
                    continue;
                }
                let target_slices = self.harmonic_slices(k + 1)?;
                let outputs: Vec<(u32, HarmonicSection)> = basis
                    .par_iter()
                    .map(|a| Ok((a.coeffs.max_degree().unwrap_or(0), self.bgg_operator(a)?)))
                    .collect::<Result<_>>()?;
                for &i2 in &distinct(&target_slices) {
                    let mut measured: Option<u32> = None;
                    for (d, out) in &outputs {
                        for (m, v) in out.coeffs.terms() {
                            let hit = v.iter().enumerate().any(|(j, x)| !x.is_zero() && target_slices[j] == i2);
                            if hit {
                                let drop = d - m.degree();
                                measured = Some(measured.map_or(drop, |x| x.max(drop)));
                            }
                        }
                    }
                    let predicted = i2 as i64 - i0 as i64 + 1;
                    let status = match measured {
                        None => OrderStatus::ZeroComponent,
                        Some(x) if x as i64 == predicted => OrderStatus::Pass,
                        Some(_) => OrderStatus::Fail,
                    };
                    rows.push(OrderRow {
                        kind: OrderKind::Bgg,
                        k,
                        source_slice: i0,
                        target_slice: Some(i2),
                        expected: predicted,
                        measured,
                        status,
                    });
                }
            }
        }
        Ok(rows)
    }

    /// Runs the exact verification suite of the flat model.
    pub fn verify_complex(&self, options: &VerifyOptions) -> VerifyReport {
        let mut checks = vec![
            self.check_kostant_squares(),
            self.check_d_squared(options, false),
            self.check_d_squared(options, true),
            self.check_transverse_inertness(options),
            self.check_graded_identity(options),
        ];
        checks.push(CheckResult::from_result("laplacian_r_injective", self.check_laplacian_injective(options)));
        checks.push(CheckResult::from_result(
            "splitting_characterization",
            self.check_splitting(options),
        ));
        checks.push(CheckResult::from_result("bgg_squared", self.check_bgg_squared()));
        checks.push(CheckResult::from_result("parallel_sections", self.check_parallel()));
        checks.push(CheckResult::from_result("parallel_in_kernel", self.check_parallel_in_kernel()));
        let algebra = self.complex.representation().algebra();
        let all_pass = checks.iter().all(CheckResult::passed);
        VerifyReport {
            family: algebra.family().name().to_string(),
            params: algebra.family().params(),
            representation: self.complex.representation().name().to_string(),
            degree_cap: self.max_degree,
            transverse_dim: self.transverse_dim,
            samples: options.samples,
            seed: options.seed,
            checks,
            all_pass,
        }
    }

    fn check_kostant_squares(&self) -> CheckResult {
        let name = "kostant_d_squared";
        let n = self.leaf_dim;
        for k in 0..n {
            let sq = self.complex.differential_matrix(k + 1) * self.complex.differential_matrix(k);
            if let Some((r, c, v)) = sq.first_nonzero() {
                return CheckResult::fail(
                    name,
                    json!({"degrees": n}),
                    json!({"kind": "nonzero square", "operator": "∂∘∂", "degree": k, "row": r, "column": c, "value": v.to_string()}),
                );
            }
        }
        for k in 2..=n {
            let sq = self.complex.codifferential_matrix(k - 1) * self.complex.codifferential_matrix(k);
            if let Some((r, c, v)) = sq.first_nonzero() {
                return CheckResult::fail(
                    name,
                    json!({"degrees": n}),
                    json!({"kind": "nonzero square", "operator": "∂*∘∂*", "degree": k, "row": r, "column": c, "value": v.to_string()}),
                );
            }
        }
        CheckResult::pass(name, json!({"degrees": n}))
    }

    fn check_d_squared(&self, options: &VerifyOptions, twisted: bool) -> CheckResult {
        let name = if twisted { "twisted_d_squared" } else { "d_squared" };
        let mut rng = seeded_rng(options.seed ^ if twisted { 0x7457 } else { 0xd5 });
        let mut tested = 0;
        for k in 0..self.leaf_dim.saturating_sub(1) {
            for _ in 0..options.samples {
                let phi = self.random_form(&mut rng, k, self.max_degree, 4);
                let dd = if twisted {
                    self.twisted(&self.twisted(&phi))
                } else {
                    self.d_flat(&self.d_flat(&phi))
                };
                tested += 1;
                if let Some((m, i, v)) = dd.coeffs.first_nonzero() {
                    let op = if twisted { "d^V∘d^V" } else { "d∘d" };
                    return CheckResult::fail(
                        name,
                        json!({"forms": tested}),
                        json!({"kind": "nonzero square", "operator": op, "degree": k, "monomial": m.to_string(), "coordinate": i, "value": v.to_string(), "input": phi.coeffs.to_json()}),
                    );
                }
            }
        }
        CheckResult::pass(name, json!({"forms": tested}))
    }

    fn check_transverse_inertness(&self, options: &VerifyOptions) -> CheckResult {
        let name = "transverse_inert";
        let mut rng = seeded_rng(options.seed ^ 0x11);
        let mut tested = 0;
        for k in 0..self.leaf_dim {
            for _ in 0..options.samples {
                let mut phi = self.random_form(&mut rng, k, self.max_degree, 3);
                phi.coeffs.terms = std::mem::take(&mut phi.coeffs.terms)
                    .into_iter()
                    .map(|(mut m, v)| {
                        m.x.iter_mut().for_each(|e| *e = 0);
                        (m, v)
                    })
                    .collect();
                tested += 1;
                let d = self.d_flat(&phi);
                if let Some((m, i, v)) = d.coeffs.first_nonzero() {
                    return CheckResult::fail(
                        name,
                        json!({"forms": tested}),
                        json!({"monomial": m.to_string(), "coordinate": i, "value": v.to_string()}),
                    );
                }
            }
        }
        CheckResult::pass(name, json!({"forms": tested}))
    }

    /// For `φ` with values in slice `i`, the slice `i - 1` part of `d^V φ`
    /// is `∂φ` and nothing lies below it.
    fn check_graded_identity(&self, options: &VerifyOptions) -> CheckResult {
        let name = "graded_identity";
        let mut rng = seeded_rng(options.seed ^ 0x9e);
        let big_n = self.filtration_length();
        let mut tested = 0;
        for k in 0..self.leaf_dim {
            let space = self.complex.space(k);
            let target = self.complex.space(k + 1);
            for i in 0..=big_n {
                let mut phi = self.random_form(&mut rng, k, self.max_degree, 3);
                for v in phi.coeffs.terms.values_mut() {
                    for (c, x) in v.iter_mut().enumerate() {
                        if space.slice_of(c) != i {
                            *x = Rational::zero();
                        }
                    }
                }
                phi.coeffs.terms.retain(|_, v| v.iter().any(|x| !x.is_zero()));
                tested += 1;
                let full = self.twisted(&phi);
                let alg = phi.coeffs.map(&self.algebraic[k]);
                for (m, v) in full.coeffs.terms() {
                    for (c, x) in v.iter().enumerate() {
                        let s = target.slice_of(c);
                        let expected = if s + 1 == i {
                            alg.get(m).map(|w| w[c].clone()).unwrap_or_else(Rational::zero)
                        } else if s + 1 < i {
                            Rational::zero()
                        } else {
                            continue;
                        };
                        if *x != expected {
                            return CheckResult::fail(
                                name,
                                json!({"forms": tested}),
                                json!({"degree": k, "slice": i, "monomial": m.to_string(), "coordinate": c, "value": x.to_string(), "expected": expected.to_string()}),
                            );
                        }
                    }
                }
                for (m, v) in alg.terms() {
                    let got = full.coeffs.get(m);
                    for (c, x) in v.iter().enumerate() {
                        let g = got.map(|w| w[c].clone()).unwrap_or_else(Rational::zero);
                        if target.slice_of(c) + 1 == i && g != *x {
                            return CheckResult::fail(
                                name,
                                json!({"forms": tested}),
                                json!({"degree": k, "slice": i, "monomial": m.to_string(), "coordinate": c, "value": g.to_string(), "expected": x.to_string()}),
                            );
                        }
                    }
                }
            }
        }
        CheckResult::pass(name, json!({"forms": tested}))
    }

    /// `□^R = ∂* d^V` is injective on `im ∂*`-valued forms of degree at most
    /// the test degree.
    fn check_laplacian_injective(&self, options: &VerifyOptions) -> Result<CheckResult> {
        let name = "laplacian_r_injective";
        let data = self.harmonic_data()?;
        let degree = options.test_degree.min(self.max_degree);
        let mut detail = Vec::new();
        for k in 0..=self.leaf_dim {
            let im = data.hodge[k].im_dstar.columns();
            let mut images = Vec::new();
            for d in 0..=degree {
                for x in monomials(self.leaf_dim, d) {
                    let m = Monomial {
                        x,
                        y: vec![0; self.transverse_dim],
                    };
                    for col in &im {
                        let mut phi = PolyPartialForm::zero(k, self.form_width(k));
                        phi.coeffs.add_scaled(&m, col, &Rational::one());
                        images.push(phi);
                    }
                }
            }
            let images: Vec<PolyPartialForm> = images.par_iter().map(|phi| self.dstar_d(phi)).collect();
            let count = images.len();
            let rank = rank_of_forms(images.iter().map(|f| &f.coeffs));
            detail.push(json!({"k": k, "dimension": count, "rank": rank}));
            if rank != count {
                return Ok(CheckResult::fail(
                    name,
                    json!({"degree": degree, "blocks": detail}),
                    json!({"degree": k, "kernel_dimension": count - rank}),
                ));
            }
        }
        Ok(CheckResult::pass(name, json!({"degree": degree, "blocks": detail})))
    }

    fn check_splitting(&self, options: &VerifyOptions) -> Result<CheckResult> {
        let name = "splitting_characterization";
        let degree = options.test_degree.min(self.max_degree);
        let mut detail = Vec::new();
        for k in 0..=self.leaf_dim {
            let basis = self.harmonic_test_basis(k, degree, None)?;
            let failures: Vec<Value> = basis
                .par_iter()
                .map(|alpha| -> Result<Option<Value>> {
                    let s = self.splitting_operator(alpha)?;
                    let witness = |what: &str| Some(json!({"condition": what, "section": alpha.coeffs.to_json(), "degree": k}));
                    if k > 0 && !self.dstar(&s).is_zero() {
                        return Ok(witness("∂*S = 0"));
                    }
                    if self.project(&s)? != *alpha {
                        return Ok(witness("π_H S = id"));
                    }
                    if !self.dstar_d(&s).is_zero() {
                        return Ok(witness("∂* d^V S = 0"));
                    }
                    if self.splitting_by_characterization(alpha)? != s {
                        return Ok(witness("composition equals characterization"));
                    }
                    Ok(None)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            detail.push(json!({"k": k, "sections": basis.len()}));
            if let Some(w) = failures.into_iter().next() {
                return Ok(CheckResult::fail(name, json!({"degree": degree, "tested": detail}), w));
            }
        }
        Ok(CheckResult::pass(name, json!({"degree": degree, "tested": detail})))
    }

    /// `D ∘ D = 0` on harmonic sections of degree at most `cap - N`.
    fn check_bgg_squared(&self) -> Result<CheckResult> {
        let name = "bgg_squared";
        if self.leaf_dim < 2 {
            return Ok(CheckResult::pass(name, json!({"skipped": "leaf dimension below 2"})));
        }
        let degree = self.max_degree - self.filtration_length() as u32;
        let mut detail = Vec::new();
        for k in 0..self.leaf_dim - 1 {
            let basis = self.harmonic_test_basis(k, degree, None)?;
            let first: Vec<HarmonicSection> = basis.par_iter().map(|a| self.bgg_operator(a)).collect::<Result<_>>()?;
            let second: Vec<HarmonicSection> = first
                .par_iter()
                .map(|b| self.bgg_operator(b))
                .collect::<Result<_>>()?;
            detail.push(json!({"k": k, "sections": basis.len()}));
            for (a, dd) in basis.iter().zip(&second) {
                if let Some((m, i, v)) = dd.coeffs.first_nonzero() {
                    return Ok(CheckResult::fail(
                        name,
                        json!({"degree": degree, "tested": detail}),
                        json!({"section": a.coeffs.to_json(), "monomial": m.to_string(), "coordinate": i, "value": v.to_string()}),
                    ));
                }
            }
        }
        Ok(CheckResult::pass(name, json!({"degree": degree, "tested": detail})))
    }

    fn check_parallel(&self) -> Result<CheckResult> {
        let name = "parallel_sections";
        let dim_v = self.complex.representation().dim();
        let big_n = self.filtration_length() as u32;
        let mut detail = Vec::new();
        let degrees: Vec<u32> = if self.transverse_dim > 0 && big_n < self.max_degree { vec![0, 1] } else { vec![0] };
        for dy in degrees {
            let sections = self.parallel_sections(dy)?;
            let expected = dim_v * crate::linalg::binomial(self.transverse_dim + dy as usize, dy as usize);
            for s in &sections {
                if let Some((m, i, v)) = self.twisted(s).coeffs.first_nonzero() {
                    return Ok(CheckResult::fail(
                        name,
                        json!({"transverse_degree": dy}),
                        json!({"section": s.coeffs.to_json(), "monomial": m.to_string(), "coordinate": i, "value": v.to_string()}),
                    ));
                }
            }
            let rank = rank_of_forms(sections.iter().map(|s| &s.coeffs));
            let solved = self.parallel_dimension_by_solve(dy)?;
            detail.push(json!({"transverse_degree": dy, "constructed": sections.len(), "independent": rank, "by_solve": solved, "expected": expected}));
            if rank != sections.len() || sections.len() != expected || solved != expected {
                return Ok(CheckResult::fail(
                    name,
                    json!({"counts": detail}),
                    json!({"constructed": sections.len(), "independent": rank, "by_solve": solved, "expected": expected}),
                ));
            }
        }
        Ok(CheckResult::pass(name, json!({"counts": detail})))
    }

    /// `π_H` of every parallel section is killed by the first BGG operator;
    /// both `rank π_H(parallel)` and `dim ker D` are reported.
    fn check_parallel_in_kernel(&self) -> Result<CheckResult> {
        let name = "parallel_in_kernel";
        if self.leaf_dim == 0 {
            return Ok(CheckResult::pass(name, json!({})));
        }
        let sections = self.parallel_sections(0)?;
        let projected: Vec<HarmonicSection> = sections.iter().map(|s| self.project(s)).collect::<Result<_>>()?;
        for (s, p) in sections.iter().zip(&projected) {
            let d = self.bgg_operator(p)?;
            if let Some((m, i, v)) = d.coeffs.first_nonzero() {
                return Ok(CheckResult::fail(
                    name,
                    json!({}),
                    json!({"section": s.coeffs.to_json(), "monomial": m.to_string(), "coordinate": i, "value": v.to_string()}),
                ));
            }
        }
        let projected_rank = rank_of_forms(projected.iter().map(|p| &p.coeffs));
        let degree = self.max_degree - self.filtration_length() as u32;
        let degree = degree.max(self.filtration_length() as u32);
        let basis = self.harmonic_test_basis(0, degree, None)?;
        let images: Vec<HarmonicSection> = basis.par_iter().map(|a| self.bgg_operator(a)).collect::<Result<_>>()?;
        let kernel = basis.len() - rank_of_forms(images.iter().map(|p| &p.coeffs));
        let detail = json!({"projected_parallel": projected_rank, "kernel_dimension": kernel, "degree": degree});
        if projected_rank > kernel {
            return Ok(CheckResult::fail(name, detail.clone(), detail));
        }
        Ok(CheckResult::pass(name, detail))
    }
}

/// Rank of a family of vector-valued polynomials, by sparse elimination over
/// the (monomial, coordinate) coordinates.
pub fn rank_of_forms<'a>(forms: impl Iterator<Item = &'a PolyVec>) -> usize {
    let mut index: HashMap<(Monomial, usize), usize> = HashMap::new();
    let mut rows = Vec::new();
    for f in forms {
        let mut row: SparseVec = Vec::new();
        for (m, v) in f.terms() {
            for (i, x) in v.iter().enumerate() {
                if !x.is_zero() {
                    let next = index.len();
                    let col = *index.entry((m.clone(), i)).or_insert(next);
                    row.push((col, x.clone()));
                }
            }
        }
        row.sort_by_key(|(c, _)| *c);
        rows.push(row);
    }
    let mut rref = SparseRref::new(index.len());
    for row in rows {
        rref.insert(row);
    }
    rref.rank()
}

fn distinct(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn wedge_table(complex: &KostantComplex, k: usize, options: ComplexOptions) -> Vec<Vec<Option<(usize, Rational)>>> {
    let n = complex.top_degree();
    let src = complex.space(k);
    let dst = complex.space(k + 1);
    (0..n)
        .map(|a| {
            src.subsets()
                .iter()
                .map(|&mask| {
                    if mask & (1 << a) != 0 {
                        return None;
                    }
                    let joined = mask | (1 << a);
                    let t = mask_elements(joined).iter().position(|&e| e == a).expect("inserted element");
                    Some((dst.subset_position(joined).expect("subset of the next degree"), options.differential_sign(t)))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::GradedLieAlgebra;
    use crate::representation::GradedRepresentation;

    fn model(alg: GradedLieAlgebra, adjoint: bool, transverse: usize, cap: u32) -> FlatModel {
        let a = Arc::new(alg);
        let rep = if adjoint {
            GradedRepresentation::adjoint(a).unwrap()
        } else {
            GradedRepresentation::standard(a).unwrap()
        };
        let complex = Arc::new(KostantComplex::new(Arc::new(rep)));
        FlatModel::new(complex, transverse, cap).unwrap()
    }

    fn conformal_standard(transverse: usize) -> FlatModel {
        model(GradedLieAlgebra::conformal(3).unwrap(), false, transverse, 6)
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials(3, 2).len(), 6);
        assert_eq!(monomials(4, 0), vec![vec![0, 0, 0, 0]]);
        assert_eq!(monomials(0, 1).len(), 0);
    }

    #[test]
    fn exterior_derivative_basics() {
        let m = conformal_standard(1);
        let width = m.form_width(0);
        let mut rng = seeded_rng(1);
        let mut constant = PolyPartialForm::zero(0, width);
        constant.coeffs.add_entry(&m.one(), 2, &rat(7));
        assert!(m.partial_exterior_derivative(&constant).unwrap().is_zero());
        for _ in 0..5 {
            let phi = m.random_form(&mut rng, 1, 5, 4);
            let d = m.partial_exterior_derivative(&phi).unwrap();
            assert!(m.partial_exterior_derivative(&d).unwrap().is_zero());
        }
        let mut y_only = PolyPartialForm::zero(0, width);
        let mut mono = m.one();
        mono.y[0] = 3;
        y_only.coeffs.add_entry(&mono, 0, &rat(1));
        assert!(m.partial_exterior_derivative(&y_only).unwrap().is_zero());
    }

    #[test]
    fn derivative_of_monomial() {
        let m = conformal_standard(0);
        let mut phi = PolyPartialForm::zero(0, 5);
        let mut mono = m.one();
        mono.x = vec![2, 1, 0];
        phi.coeffs.add_entry(&mono, 0, &rat(1));
        let d = m.partial_exterior_derivative(&phi).unwrap();
        // d(x1² x2) = 2 x1 x2 dx1 + x1² dx2.
        let mut expected = PolyPartialForm::zero(1, 15);
        expected.coeffs.add_entry(&Monomial { x: vec![1, 1, 0], y: vec![] }, 0, &rat(2));
        expected.coeffs.add_entry(&Monomial { x: vec![2, 0, 0], y: vec![] }, 5, &rat(1));
        assert_eq!(d, expected);
    }

    #[test]
    fn twisted_derivative_properties() {
        let m = conformal_standard(1);
        let rep = m.complex().representation().clone();
        let mut rng = seeded_rng(2);
        for k in 0..2 {
            for _ in 0..4 {
                let phi = m.random_form(&mut rng, k, 6, 4);
                let d = m.twisted_derivative(&phi).unwrap();
                assert!(m.twisted_derivative(&d).unwrap().is_zero());
            }
        }
        let v: Vec<Rational> = (0..5).map(|i| rat(i as i64 + 1)).collect();
        let mut phi = PolyPartialForm::zero(0, 5);
        phi.coeffs.add_scaled(&m.one(), &v, &rat(1));
        let d = m.twisted_derivative(&phi).unwrap();
        let c = d.coeffs.get(&m.one()).unwrap();
        for a in 0..3 {
            assert_eq!(&c[a * 5..(a + 1) * 5], rep.x_action(a).mul_vec(&v).as_slice());
        }
    }

    #[test]
    fn laplacian_r_on_constants_matches_algebraic_laplacian() {
        let m = conformal_standard(0);
        let mut rng = seeded_rng(4);
        for k in 0..=3 {
            let width = m.form_width(k);
            let v: Vec<Rational> = (0..width).map(|_| rat(rng.gen_range(-3..=3))).collect();
            let mut phi = PolyPartialForm::zero(k, width);
            phi.coeffs.add_scaled(&m.one(), &v, &rat(1));
            let l = m.laplacian_r(&phi).unwrap();
            assert_eq!(l.degree, k);
            let expected = m.complex().laplacian_matrix(k).mul_vec(&v);
            let got = l.coeffs.get(&m.one()).cloned().unwrap_or_else(|| vec![rat(0); width]);
            assert_eq!(got, expected);
            assert!(l.coeffs.terms().len() <= 1);
        }
        assert!(m.laplacian_r(&PolyPartialForm::zero(1, 15)).unwrap().is_zero());
    }

    #[test]
    fn degree_cap_is_enforced() {
        let m = conformal_standard(0);
        let mut phi = PolyPartialForm::zero(0, 5);
        phi.coeffs.add_entry(&Monomial { x: vec![7, 0, 0], y: vec![] }, 0, &rat(1));
        assert!(matches!(m.twisted_derivative(&phi), Err(Error::DegreeOverflow { .. })));
        let a = Arc::new(GradedLieAlgebra::conformal(3).unwrap());
        let rep = Arc::new(GradedRepresentation::standard(a).unwrap());
        assert!(FlatModel::new(Arc::new(KostantComplex::new(rep)), 0, 1).is_err());
    }

    #[test]
    fn parallel_sections_conformal_standard() {
        let m = conformal_standard(0);
        let sections = m.parallel_sections(0).unwrap();
        assert_eq!(sections.len(), 5);
        for s in &sections {
            assert!(m.twisted_derivative(s).unwrap().is_zero());
            assert!(s.coeffs.max_degree().unwrap() <= 2);
        }
        assert_eq!(m.parallel_dimension_by_solve(0).unwrap(), 5);
        // The bottom slice is killed by g_-1, so its section is constant.
        let rep = m.complex().representation().clone();
        let bottom = rep.slice_range(0).start;
        assert_eq!(sections[bottom].coeffs.terms().len(), 1);
    }

    #[test]
    fn parallel_sections_with_transverse_degree() {
        let m = conformal_standard(2);
        assert_eq!(m.parallel_sections(1).unwrap().len(), 15);
        assert_eq!(m.parallel_dimension_by_solve(1).unwrap(), 15);
    }

    #[test]
    fn splitting_two_ways() {
        let m = conformal_standard(0);
        for k in 0..2 {
            for alpha in m.harmonic_test_basis(k, 2, None).unwrap() {
                let s = m.splitting_operator(&alpha).unwrap();
                assert_eq!(m.project(&s).unwrap(), alpha);
                assert!(m.dstar_d(&s).is_zero());
                assert_eq!(m.splitting_by_characterization(&alpha).unwrap(), s);
            }
        }
    }

    #[test]
    fn constant_top_slice_harmonic_needs_no_correction() {
        let m = conformal_standard(0);
        let big_n = m.filtration_length();
        for k in 0..=3 {
            for alpha in m.harmonic_test_basis(k, 0, Some(big_n)).unwrap() {
                assert_eq!(m.splitting_operator(&alpha).unwrap(), m.include(&alpha).unwrap());
            }
        }
    }

    #[test]
    fn bgg_first_operator() {
        let m = conformal_standard(0);
        assert_eq!(m.harmonic_slices(0).unwrap(), vec![0]);
        let table = m.order_table().unwrap();
        let row = table
            .iter()
            .find(|r| r.kind == OrderKind::Bgg && r.k == 0)
            .unwrap();
        assert_eq!(row.expected, 2);
        assert_eq!(row.measured, Some(2));
        assert!(table.iter().all(|r| r.status != OrderStatus::Fail));
    }

    #[test]
    fn project_rejects_forms_outside_kernel() {
        let m = conformal_standard(0);
        let mut phi = PolyPartialForm::zero(1, 15);
        let rep = m.complex().representation().clone();
        let bottom = rep.slice_range(0).start;
        phi.coeffs.add_entry(&m.one(), bottom, &rat(1));
        if !m.dstar(&phi).is_zero() {
            assert!(matches!(m.project(&phi), Err(Error::NotInKernel { .. })));
        }
    }

    #[test]
    fn verification_passes_and_is_deterministic() {
        let m = conformal_standard(1);
        let opts = VerifyOptions {
            samples: 3,
            seed: 42,
            test_degree: 2,
        };
        let r1 = m.verify_complex(&opts);
        assert!(r1.all_pass, "{:#?}", r1.checks);
        let r2 = m.verify_complex(&opts);
        assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
    }

    #[test]
    fn sign_bug_is_caught() {
        let a = Arc::new(GradedLieAlgebra::conformal(3).unwrap());
        let rep = Arc::new(GradedRepresentation::standard(a).unwrap());
        let complex = KostantComplex::with_options(rep, ComplexOptions { inject_sign_bug: true });
        let m = FlatModel::new(Arc::new(complex), 0, 6).unwrap();
        let r = m.verify_complex(&VerifyOptions {
            samples: 2,
            seed: 1,
            test_degree: 1,
        });
        assert!(!r.all_pass);
        let failing: Vec<&str> = r.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
        assert!(failing.iter().any(|n| n.contains("squared")), "{failing:?}");
    }
}

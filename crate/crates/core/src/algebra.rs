//! Matrix realizations of |1|-graded simple Lie algebras.
//!
//! Basis ordering is fixed per family and is part of the output contract:
//! the basis is always `[g_-1 | g_0 | g_1]`, the grading element `E` is the
//! first element of the `g_0` block.
//!
//! * `conformal(n)`: `so(n+1,1)` preserving the form with Gram matrix
//!   `[[0,0,1],[0,I_n,0],[1,0,0]]` on `R^{n+2}`. A general element is
//!   `[[a, z, 0], [x, M, -z^T], [0, -x^T, -a]]`. `g_-1` is spanned by
//!   `x = e_i`, `g_1` by `z = e_i^T`, `g_0` by `E = diag(1, 0, .., 0, -1)`
//!   followed by `M = e_ij - e_ji` for `i < j` in lexicographic order.
//! * `grassmannian(p, q)`: `sl(p+q)` with `g_-1` the lower-left `q x p`
//!   block (`e_{p+a, b}`, ordered by `(a, b)`), `g_1` the upper-right block
//!   (`e_{b, p+a}`, ordered by `(b, a)`), and `g_0` spanned by
//!   `E = diag(q/(p+q) I_p, -p/(p+q) I_q)`, then the within-block diagonal
//!   differences `e_ii - e_{i+1,i+1}`, then within-block off-diagonal `e_ij`
//!   in lexicographic order.

use std::ops::Range;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutator, parse_rational, rat, ratio, Matrix, Rational};

pub const ALGEBRA_SCHEMA: &str = "partial-bgg.algebra/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Conformal { n: usize },
    Grassmannian { p: usize, q: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Conformal { .. } => "conformal",
            Family::Grassmannian { .. } => "grassmannian",
        }
    }

    pub fn params(&self) -> String {
        match self {
            Family::Conformal { n } => format!("n={n}"),
            Family::Grassmannian { p, q } => format!("p={p};q={q}"),
        }
    }

    pub fn build(&self) -> Result<GradedLieAlgebra> {
        match *self {
            Family::Conformal { n } => GradedLieAlgebra::conformal(n),
            Family::Grassmannian { p, q } => GradedLieAlgebra::grassmannian(p, q),
        }
    }
}

/// Coefficient vector over the ordered basis of an algebra.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlgebraElement(pub Vec<Rational>);

impl AlgebraElement {
    pub fn zero(dim: usize) -> Self {
        AlgebraElement(vec![Rational::zero(); dim])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zero(dim);
        v.0[i] = Rational::one();
        v
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        AlgebraElement(self.0.iter().map(|x| x * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        AlgebraElement(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

#[derive(Clone, Debug)]
pub struct GradedLieAlgebra {
    family: Family,
    matrix_size: usize,
    basis: Vec<Matrix>,
    grades: Vec<i8>,
    dims: (usize, usize, usize),
    grading_index: usize,
    ad: Vec<Matrix>,
    killing: Matrix,
    /// Row `i` holds the coefficients of `Z^i` in the native `g_1` basis.
    dual_coefficients: Matrix,
    coord_positions: Vec<usize>,
    coord_inverse: Matrix,
}

fn unit(m: usize, r: usize, c: usize) -> Matrix {
    let mut a = Matrix::zeros(m, m);
    a[(r, c)] = Rational::one();
    a
}

impl GradedLieAlgebra {
    /// `so(n+1,1)` with its conformal |1|-grading.
    pub fn conformal(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameters(format!(
                "conformal family requires n >= 3, got n = {n}"
            )));
        }
        let m = n + 2;
        let last = n + 1;
        let minus = (0..n)
            .map(|i| {
                let mut a = unit(m, i + 1, 0);
                a[(last, i + 1)] = rat(-1);
                a
            })
            .collect();
        let plus = (0..n)
            .map(|i| {
                let mut a = unit(m, 0, i + 1);
                a[(i + 1, last)] = rat(-1);
                a
            })
            .collect();
        let mut zero = Vec::new();
        let mut e = unit(m, 0, 0);
        e[(last, last)] = rat(-1);
        zero.push(e);
        for i in 0..n {
            for j in i + 1..n {
                let mut a = unit(m, i + 1, j + 1);
                a[(j + 1, i + 1)] = rat(-1);
                zero.push(a);
            }
        }
        Self::from_basis(Family::Conformal { n }, m, minus, zero, plus, 0)
    }

    /// `sl(p+q)` with the Grassmannian |1|-grading; `p, q >= 2`.
    pub fn grassmannian(p: usize, q: usize) -> Result<Self> {
        if p < 2 || q < 2 {
            return Err(Error::InvalidParameters(format!(
                "grassmannian family requires p, q >= 2 (p = 1 or q = 1 is the projective case), got p = {p}, q = {q}"
            )));
        }
        let m = p + q;
        let mut minus = Vec::new();
        for a in 0..q {
            for b in 0..p {
                minus.push(unit(m, p + a, b));
            }
        }
        let mut plus = Vec::new();
        for b in 0..p {
            for a in 0..q {
                plus.push(unit(m, b, p + a));
            }
        }
        let mut zero = Vec::new();
        let mut e = Matrix::zeros(m, m);
        for i in 0..m {
            e[(i, i)] = if i < p {
                ratio(q as i64, m as i64)
            } else {
                ratio(-(p as i64), m as i64)
            };
        }
        zero.push(e);
        for block in [0..p, p..m] {
            for i in block.start..block.end - 1 {
                let mut h = unit(m, i, i);
                h[(i + 1, i + 1)] = rat(-1);
                zero.push(h);
            }
        }
        for block in [0..p, p..m] {
            for i in block.clone() {
                for j in block.clone() {
                    if i != j {
                        zero.push(unit(m, i, j));
                    }
                }
            }
        }
        Self::from_basis(Family::Grassmannian { p, q }, m, minus, zero, plus, 0)
    }

    /// Assembles an algebra from graded basis blocks and derives its structure
    /// constants, Killing form and dual basis.
    pub fn from_basis(
        family: Family,
        matrix_size: usize,
        minus: Vec<Matrix>,
        zero: Vec<Matrix>,
        plus: Vec<Matrix>,
        grading_in_zero: usize,
    ) -> Result<Self> {
        let dims = (minus.len(), zero.len(), plus.len());
        if grading_in_zero >= dims.1 {
            return Err(Error::Construction("grading element index outside g_0".into()));
        }
        let mut grades = vec![-1i8; dims.0];
        grades.extend(std::iter::repeat(0).take(dims.1));
        grades.extend(std::iter::repeat(1).take(dims.2));
        let basis: Vec<Matrix> = minus.into_iter().chain(zero).chain(plus).collect();
        if basis.iter().any(|b| b.rows() != matrix_size || !b.is_square()) {
            return Err(Error::Construction("basis matrix has wrong size".into()));
        }
        let dim = basis.len();

        // Coordinates are read off a set of matrix positions on which the
        // flattened basis is invertible.
        let flat = Matrix::from_rows(basis.iter().map(|b| b.entries().to_vec()).collect());
        let coord_positions = flat.rref().pivots;
        if coord_positions.len() != dim {
            return Err(Error::Construction("basis matrices are linearly dependent".into()));
        }
        let coord_inverse = flat
            .select_columns(&coord_positions)
            .transpose()
            .inverse()
            .ok_or_else(|| Error::Construction("coordinate block not invertible".into()))?;

        let mut alg = GradedLieAlgebra {
            family,
            matrix_size,
            basis,
            grades,
            dims,
            grading_index: dims.0 + grading_in_zero,
            ad: Vec::new(),
            killing: Matrix::zeros(0, 0),
            dual_coefficients: Matrix::zeros(0, 0),
            coord_positions,
            coord_inverse,
        };

        let mut ad = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut cols = Vec::with_capacity(dim);
            for j in 0..dim {
                let c = commutator(&alg.basis[i], &alg.basis[j]);
                let coords = alg.coordinates(&c).ok_or_else(|| {
                    Error::Construction(format!("bracket of basis elements {i} and {j} leaves the span"))
                })?;
                cols.push(coords.0);
            }
            ad.push(Matrix::from_columns(dim, &cols));
        }
        alg.ad = ad;
        alg.killing = Matrix::from_fn(dim, dim, |i, j| (&alg.ad[i] * &alg.ad[j]).trace());

        let n = dims.0;
        let pairing = Matrix::from_fn(n, n, |i, j| alg.killing[(alg.plus_range().start + i, j)].clone());
        alg.dual_coefficients = pairing
            .inverse()
            .ok_or_else(|| Error::Construction("Killing pairing between g_1 and g_-1 is singular".into()))?;
        Ok(alg)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn matrix_size(&self) -> usize {
        self.matrix_size
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `(dim g_-1, dim g_0, dim g_1)`.
    pub fn graded_dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn minus_range(&self) -> Range<usize> {
        0..self.dims.0
    }

    pub fn zero_range(&self) -> Range<usize> {
        self.dims.0..self.dims.0 + self.dims.1
    }

    pub fn plus_range(&self) -> Range<usize> {
        self.dims.0 + self.dims.1..self.dim()
    }

    pub fn grade(&self, i: usize) -> i8 {
        self.grades[i]
    }

    pub fn grades(&self) -> &[i8] {
        &self.grades
    }

    pub fn basis(&self) -> &[Matrix] {
        &self.basis
    }

    pub fn grading_index(&self) -> usize {
        self.grading_index
    }

    pub fn grading_element(&self) -> AlgebraElement {
        AlgebraElement::basis(self.dim(), self.grading_index)
    }

    /// `ad(b_i)` in the ordered basis.
    pub fn ad_basis(&self, i: usize) -> &Matrix {
        &self.ad[i]
    }

    pub fn ad(&self, x: &AlgebraElement) -> Result<Matrix> {
        self.check_len(x)?;
        let mut out = Matrix::zeros(self.dim(), self.dim());
        for (c, a) in x.0.iter().zip(&self.ad) {
            out.add_scaled(c, a);
        }
        Ok(out)
    }

    pub fn killing_gram(&self) -> &Matrix {
        &self.killing
    }

    /// Row `i`: coefficients of `Z^i` over the native `g_1` basis.
    pub fn dual_coefficients(&self) -> &Matrix {
        &self.dual_coefficients
    }

    fn check_len(&self, x: &AlgebraElement) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_matrix(&self, x: &AlgebraElement) -> Result<Matrix> {
        self.check_len(x)?;
        let mut out = Matrix::zeros(self.matrix_size, self.matrix_size);
        for (c, b) in x.0.iter().zip(&self.basis) {
            out.add_scaled(c, b);
        }
        Ok(out)
    }

    /// Coordinates of a matrix in the basis, or `None` if it is not in the span.
    pub fn coordinates(&self, m: &Matrix) -> Option<AlgebraElement> {
        if m.rows() != self.matrix_size || m.cols() != self.matrix_size {
            return None;
        }
        let picked: Vec<Rational> = self.coord_positions.iter().map(|&p| m.entries()[p].clone()).collect();
        let coords = AlgebraElement(self.coord_inverse.mul_vec(&picked));
        let mut rebuilt = Matrix::zeros(self.matrix_size, self.matrix_size);
        for (c, b) in coords.0.iter().zip(&self.basis) {
            rebuilt.add_scaled(c, b);
        }
        (rebuilt == *m).then_some(coords)
    }

    pub fn bracket(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_len(x)?;
        self.check_len(y)?;
        let mut out = vec![Rational::zero(); self.dim()];
        for (c, a) in x.0.iter().zip(&self.ad) {
            if c.is_zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(a.mul_vec(&y.0)) {
                *o += c * v;
            }
        }
        Ok(AlgebraElement(out))
    }

    pub fn killing_form(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<Rational> {
        self.check_len(x)?;
        self.check_len(y)?;
        let ky = self.killing.mul_vec(&y.0);
        Ok(x.0.iter().zip(&ky).fold(Rational::zero(), |acc, (a, b)| acc + a * b))
    }

    /// The native `g_-1` basis `X_i` and the Killing-dual `g_1` basis `Z^i`
    /// with `B(Z^i, X_j) = δ_ij`.
    pub fn dual_basis_pair(&self) -> (Vec<AlgebraElement>, Vec<AlgebraElement>) {
        let dim = self.dim();
        let xs = self.minus_range().map(|i| AlgebraElement::basis(dim, i)).collect();
        let plus = self.plus_range();
        let zs = (0..self.dims.0)
            .map(|i| {
                let mut z = AlgebraElement::zero(dim);
                for (l, p) in plus.clone().enumerate() {
                    z.0[p] = self.dual_coefficients[(i, l)].clone();
                }
                z
            })
            .collect();
        (xs, zs)
    }

    /// Runs every structural check and reports which pass.
    pub fn check_invariants(&self) -> AlgebraReport {
        let dim = self.dim();
        let mut report = AlgebraReport::default();

        // Jacobi on every basis triple.
        report.jacobi = (0..dim).all(|i| {
            (i + 1..dim).all(|j| {
                (j + 1..dim).all(|k| {
                    let a = self.ad[i].mul_vec(&self.ad[j].column(k));
                    let b = self.ad[j].mul_vec(&self.ad[k].column(i));
                    let c = self.ad[k].mul_vec(&self.ad[i].column(j));
                    a.iter().zip(&b).zip(&c).all(|((x, y), z)| (x + y + z).is_zero())
                })
            })
        });

        report.grading_closure = (0..dim).all(|i| {
            (0..dim).all(|j| {
                let target = self.grades[i] + self.grades[j];
                self.ad[i]
                    .column(j)
                    .iter()
                    .enumerate()
                    .all(|(l, c)| c.is_zero() || self.grades[l] == target)
            })
        });

        let ad_e = &self.ad[self.grading_index];
        report.grading_element = (0..dim).all(|j| {
            (0..dim).all(|l| {
                let expected = if l == j { rat(self.grades[j] as i64) } else { Rational::zero() };
                ad_e[(l, j)] == expected
            })
        });

        // Recompute tr(ad X ad Y) from raw matrix commutators.
        report.killing_ad_trace = (0..dim).all(|i| {
            let ad_i = Matrix::from_columns(
                dim,
                &(0..dim)
                    .map(|j| {
                        self.coordinates(&commutator(&self.basis[i], &self.basis[j]))
                            .map(|c| c.0)
                            .unwrap_or_else(|| vec![Rational::zero(); dim])
                    })
                    .collect::<Vec<_>>(),
            );
            (i..dim).all(|j| {
                let t = (&ad_i * &self.ad[j]).trace();
                t == self.killing[(i, j)] && t == self.killing[(j, i)]
            })
        });
        report.killing_nondegenerate = self.killing.rank() == dim;

        let (xs, zs) = self.dual_basis_pair();
        report.dual_pairing = zs.iter().enumerate().all(|(i, z)| {
            xs.iter().enumerate().all(|(j, x)| {
                let b = self.killing_form(z, x).expect("dimensions agree");
                b == if i == j { Rational::one() } else { Rational::zero() }
            })
        });
        report
    }

    pub fn descriptor(&self) -> AlgebraDescriptor {
        let to_strings = |m: &Matrix| -> Vec<Vec<String>> {
            (0..m.rows()).map(|r| m.row(r).iter().map(|x| x.to_string()).collect()).collect()
        };
        AlgebraDescriptor {
            schema: ALGEBRA_SCHEMA.to_string(),
            family: self.family,
            matrix_size: self.matrix_size,
            graded_dims: [self.dims.0, self.dims.1, self.dims.2],
            grades: self.grades.clone(),
            grading_index: self.grading_index,
            basis: self.basis.iter().map(to_strings).collect(),
            killing: to_strings(&self.killing),
            dual_coefficients: to_strings(&self.dual_coefficients),
        }
    }

    pub fn from_descriptor(d: &AlgebraDescriptor) -> Result<Self> {
        if d.schema != ALGEBRA_SCHEMA {
            return Err(Error::Serialization(format!("unknown schema {:?}", d.schema)));
        }
        let parse = |rows: &Vec<Vec<String>>| -> Result<Matrix> {
            let parsed = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|s| parse_rational(s).ok_or_else(|| Error::Serialization(format!("bad rational {s:?}"))))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Matrix::from_rows(parsed))
        };
        let mut basis = d.basis.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let [a, b, _] = d.graded_dims;
        let plus = basis.split_off(a + b);
        let zero = basis.split_off(a);
        let alg = Self::from_basis(d.family, d.matrix_size, basis, zero, plus, d.grading_index - a)?;
        if alg.killing != parse(&d.killing)? {
            return Err(Error::Serialization("stored Killing Gram matrix disagrees with the basis".into()));
        }
        Ok(alg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub jacobi: bool,
    pub grading_closure: bool,
    pub grading_element: bool,
    pub killing_ad_trace: bool,
    pub killing_nondegenerate: bool,
    pub dual_pairing: bool,
}

impl AlgebraReport {
    pub fn all_pass(&self) -> bool {
        self.jacobi
            && self.grading_closure
            && self.grading_element
            && self.killing_ad_trace
            && self.killing_nondegenerate
            && self.dual_pairing
    }
}

/// JSON form of an algebra. Rationals are strings `"p/q"` (or `"p"`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraDescriptor {
    pub schema: String,
    #[serde(flatten)]
    pub family: Family,
    pub matrix_size: usize,
    pub graded_dims: [usize; 3],
    pub grades: Vec<i8>,
    pub grading_index: usize,
    pub basis: Vec<Vec<Vec<String>>>,
    pub killing: Vec<Vec<String>>,
    pub dual_coefficients: Vec<Vec<String>>,
}

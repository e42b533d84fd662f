//! Exact rational matrices, polynomials and row reduction.
//!
//! Everything here works over `BigRational`; no operation rounds. Row
//! reduction always picks the first nonzero entry of the current column as
//! pivot (lexicographic pivot order), so every derived basis is reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                None
            } else {
                Some(Rational::new(p, q))
            }
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

/// `(-1)^t` as a rational.
pub fn sign(t: usize) -> Rational {
    if t % 2 == 0 {
        Rational::one()
    } else {
        -Rational::one()
    }
}

pub fn is_zero_vec(v: &[Rational]) -> bool {
    v.iter().all(Zero::is_zero)
}

/// Dense row-major matrix of rationals.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Rational;
    fn index(&self, (r, c): (usize, usize)) -> &Rational {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Rational {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Reduced row echelon form together with the pivot columns.
#[derive(Clone, Debug)]
pub struct Rref {
    pub reduced: Matrix,
    pub pivots: Vec<usize>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend(row);
        }
        Matrix { rows: n, cols, data }
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| rat(x)).collect()).collect())
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<Rational>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (r, x) in col.iter().enumerate() {
                if !x.is_zero() {
                    m[(r, c)] = x.clone();
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Rational> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<Rational>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        is_zero_vec(&self.data)
    }

    /// First nonzero entry in row-major order.
    pub fn first_nonzero(&self) -> Option<(usize, usize, &Rational)> {
        self.data
            .iter()
            .position(|x| !x.is_zero())
            .map(|p| (p / self.cols, p % self.cols, &self.data[p]))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn trace(&self) -> Rational {
        assert!(self.is_square());
        (0..self.rows).fold(Rational::zero(), |acc, i| acc + &self[(i, i)])
    }

    pub fn scale(&self, s: &Rational) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Adds `s * other` in place.
    pub fn add_scaled(&mut self, s: &Rational, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        if s.is_zero() {
            return;
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            if !b.is_zero() {
                *a += s * b;
            }
        }
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        let mut out = vec![Rational::zero(); self.rows];
        for (c, x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                let a = &self.data[r * self.cols + c];
                if !a.is_zero() {
                    *o += a * x;
                }
            }
        }
        out
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])].clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), self.cols, |r, c| self[(rows[r], c)].clone())
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])].clone())
    }

    /// Horizontal concatenation; all parts must share the row count.
    pub fn hstack(rows: usize, parts: &[&Matrix]) -> Matrix {
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for m in parts {
            assert_eq!(m.rows, rows);
            for r in 0..rows {
                for c in 0..m.cols {
                    let x = &m[(r, c)];
                    if !x.is_zero() {
                        out[(r, offset + c)] = x.clone();
                    }
                }
            }
            offset += m.cols;
        }
        out
    }

    pub fn vstack(cols: usize, parts: &[&Matrix]) -> Matrix {
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            assert_eq!(m.cols, cols);
            data.extend(m.data.iter().cloned());
            rows += m.rows;
        }
        Matrix { rows, cols, data }
    }

    pub fn rref(&self) -> Rref {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        Rref { reduced: m, pivots }
    }

    fn rref_in_place(&mut self) -> Vec<usize> {
        let (rows, cols) = (self.rows, self.cols);
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            if p != r {
                for j in c..cols {
                    self.data.swap(p * cols + j, r * cols + j);
                }
            }
            let inv = self[(r, c)].recip();
            for j in c..cols {
                if !self.data[r * cols + j].is_zero() {
                    self.data[r * cols + j] *= &inv;
                }
            }
            let support: Vec<usize> = (c..cols).filter(|&j| !self.data[r * cols + j].is_zero()).collect();
            for i in 0..rows {
                if i == r {
                    continue;
                }
                let f = self.data[i * cols + c].clone();
                if f.is_zero() {
                    continue;
                }
                for &j in &support {
                    let delta = &f * &self.data[r * cols + j];
                    self.data[i * cols + j] -= delta;
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.rref().pivots.len()
    }

    /// Basis of the right nullspace, one column per free variable.
    pub fn nullspace(&self) -> Matrix {
        let Rref { reduced, pivots } = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = Matrix::zeros(self.cols, free.len());
        for (k, &f) in free.iter().enumerate() {
            out[(f, k)] = Rational::one();
            for (r, &p) in pivots.iter().enumerate() {
                let x = &reduced[(r, f)];
                if !x.is_zero() {
                    out[(p, k)] = -x.clone();
                }
            }
        }
        out
    }

    /// The pivot columns of `self`: a basis of the column space drawn from
    /// the original columns.
    pub fn column_space(&self) -> Matrix {
        let pivots = self.rref().pivots;
        self.select_columns(&pivots)
    }

    /// Particular solution of `self * x = b` with all free variables zero.
    pub fn solve(&self, b: &[Rational]) -> Option<Vec<Rational>> {
        assert_eq!(b.len(), self.rows);
        let aug = Matrix::hstack(self.rows, &[self, &Matrix::from_columns(self.rows, &[b.to_vec()])]);
        let Rref { reduced, pivots } = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Rational::zero(); self.cols];
        for (r, &p) in pivots.iter().enumerate() {
            x[p] = reduced[(r, self.cols)].clone();
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Matrix> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let aug = Matrix::hstack(n, &[self, &Matrix::identity(n)]);
        let Rref { reduced, pivots } = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        Some(reduced.select_columns(&cols))
    }

    /// Solves `self * X = rhs` for a matrix `X`, requiring `self` to have full
    /// column rank and every column of `rhs` to lie in its column space.
    pub fn solve_full_rank(&self, rhs: &Matrix) -> Option<Matrix> {
        assert_eq!(rhs.rows, self.rows);
        let aug = Matrix::hstack(self.rows, &[self, rhs]);
        let Rref { reduced, pivots } = aug.rref();
        if pivots.len() < self.cols || pivots[..self.cols].iter().enumerate().any(|(i, &p)| p != i) {
            return None;
        }
        if pivots.len() > self.cols {
            return None;
        }
        let rows: Vec<usize> = (0..self.cols).collect();
        let cols: Vec<usize> = (self.cols..self.cols + rhs.cols).collect();
        Some(reduced.submatrix(&rows, &cols))
    }

    pub fn pow(&self, e: usize) -> Matrix {
        let mut acc = Matrix::identity(self.rows);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Monic minimal polynomial, found as the first linear dependence among
    /// `I, A, A^2, ...`.
    pub fn minimal_polynomial(&self) -> Polynomial {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return Polynomial::one();
        }
        let mut powers: Vec<Vec<Rational>> = vec![Matrix::identity(n).data];
        let mut current = Matrix::identity(n);
        loop {
            current = &current * self;
            let k = powers.len();
            let basis = Matrix::from_columns(n * n, &powers);
            if let Some(c) = basis.solve(&current.data) {
                let mut coeffs: Vec<Rational> = c.into_iter().map(|x| -x).collect();
                coeffs.push(Rational::one());
                return Polynomial::new(coeffs);
            }
            powers.push(current.data.clone());
            assert!(k <= n, "Cayley-Hamilton bound exceeded");
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        let rhs_support: Vec<Vec<usize>> = (0..rhs.rows)
            .map(|k| (0..rhs.cols).filter(|&j| !rhs[(k, j)].is_zero()).collect())
            .collect();
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                for &j in &rhs_support[k] {
                    out.data[i * rhs.cols + j] += a * &rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| -a).collect(),
        }
    }
}

/// Commutator `AB - BA`.
pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    &(a * b) - &(b * a)
}

/// Column-compressed sparse matrix, used for the pointwise operators applied
/// to every coefficient of a polynomial form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    rows: usize,
    columns: Vec<Vec<(usize, Rational)>>,
}

impl SparseMatrix {
    pub fn from_dense(m: &Matrix) -> Self {
        let columns = (0..m.cols())
            .map(|c| {
                (0..m.rows())
                    .filter(|&r| !m[(r, c)].is_zero())
                    .map(|r| (r, m[(r, c)].clone()))
                    .collect()
            })
            .collect();
        SparseMatrix { rows: m.rows(), columns }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, c: usize) -> &[(usize, Rational)] {
        &self.columns[c]
    }

    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.columns.len(), "sparse apply dimension mismatch");
        let mut out = vec![Rational::zero(); self.rows];
        for (x, col) in v.iter().zip(&self.columns) {
            if x.is_zero() {
                continue;
            }
            for (r, a) in col {
                out[*r] += a * x;
            }
        }
        out
    }

    /// `out += s * self * v`.
    pub fn apply_add(&self, s: &Rational, v: &[Rational], out: &mut [Rational]) {
        for (x, col) in v.iter().zip(&self.columns) {
            if x.is_zero() {
                continue;
            }
            let sx = s * x;
            for (r, a) in col {
                out[*r] += a * &sx;
            }
        }
    }
}

/// Sparse vector as a sorted list of `(index, nonzero value)`.
pub type SparseVec = Vec<(usize, Rational)>;

/// Incrementally maintained reduced row echelon form of sparse rows.
///
/// Pivot rows are kept fully reduced: no pivot row has a nonzero entry in
/// another row's pivot column. The pivot of a new row is its smallest
/// surviving column.
#[derive(Clone, Debug, Default)]
pub struct SparseRref {
    ncols: usize,
    pivot_rows: BTreeMap<usize, SparseVec>,
}

impl SparseRref {
    pub fn new(ncols: usize) -> Self {
        SparseRref {
            ncols,
            pivot_rows: BTreeMap::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.pivot_rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivot_rows.keys().copied()
    }

    pub fn pivot_row(&self, pivot: usize) -> Option<&SparseVec> {
        self.pivot_rows.get(&pivot)
    }

    /// Reduces `row` against the current pivots.
    pub fn reduce(&self, row: &SparseVec) -> SparseVec {
        let mut acc: BTreeMap<usize, Rational> = row.iter().cloned().collect();
        for (c, v) in row {
            if let Some(prow) = self.pivot_rows.get(c) {
                // Pivot rows carry no other pivot columns, so one pass suffices.
                for (j, a) in prow {
                    let e = acc.entry(*j).or_insert_with(Rational::zero);
                    *e -= v * a;
                }
            }
        }
        acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
    }

    /// Inserts a row; returns `true` when the rank grew.
    pub fn insert(&mut self, row: SparseVec) -> bool {
        debug_assert!(row.iter().all(|(c, _)| *c < self.ncols));
        let reduced = self.reduce(&row);
        let Some((pivot, lead)) = reduced.first().cloned() else {
            return false;
        };
        let inv = lead.recip();
        let new_row: SparseVec = reduced.into_iter().map(|(c, v)| (c, v * &inv)).collect();
        for prow in self.pivot_rows.values_mut() {
            let Ok(pos) = prow.binary_search_by_key(&pivot, |(c, _)| *c) else {
                continue;
            };
            let f = prow[pos].1.clone();
            let mut acc: BTreeMap<usize, Rational> = prow.drain(..).collect();
            for (j, a) in &new_row {
                let e = acc.entry(*j).or_insert_with(Rational::zero);
                *e -= &f * a;
            }
            *prow = acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        }
        self.pivot_rows.insert(pivot, new_row);
        true
    }

    /// Nullspace basis vectors, one per free column in increasing order.
    pub fn nullspace(&self) -> Vec<SparseVec> {
        let mut out = Vec::new();
        for f in 0..self.ncols {
            if self.pivot_rows.contains_key(&f) {
                continue;
            }
            let mut v: SparseVec = vec![(f, Rational::one())];
            for (p, row) in &self.pivot_rows {
                if let Ok(pos) = row.binary_search_by_key(&f, |(c, _)| *c) {
                    v.push((*p, -row[pos].1.clone()));
                }
            }
            v.sort_by_key(|(c, _)| *c);
            out.push(v);
        }
        out
    }
}

/// Dense vector to sparse.
pub fn sparsify(v: &[Rational]) -> SparseVec {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !x.is_zero())
        .map(|(i, x)| (i, x.clone()))
        .collect()
}

/// Polynomial with rational coefficients, lowest degree first, no trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Polynomial {
    coeffs: Vec<Rational>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Polynomial { coeffs: vec![Rational::one()] }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_matrix(&self, m: &Matrix) -> Matrix {
        assert!(m.is_square());
        let n = m.rows();
        let mut acc = Matrix::zeros(n, n);
        for c in self.coeffs.iter().rev() {
            acc = &acc * m;
            for i in 0..n {
                acc[(i, i)] += c;
            }
        }
        acc
    }

    /// Distinct rational roots in increasing order, by the rational root test.
    pub fn rational_roots(&self) -> Vec<Rational> {
        if self.coeffs.is_empty() {
            return Vec::new();
        }
        let lcm = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let mut ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| (c * Rational::from_integer(lcm.clone())).to_integer())
            .collect();
        let mut roots = Vec::new();
        if ints.first().is_some_and(Zero::is_zero) {
            roots.push(Rational::zero());
            let shift = ints.iter().position(|x| !x.is_zero()).unwrap_or(0);
            ints.drain(..shift);
        }
        if ints.len() > 1 {
            let constant = ints[0].abs();
            let leading = ints[ints.len() - 1].abs();
            let reduced = Polynomial::new(ints.iter().cloned().map(Rational::from_integer).collect());
            for p in divisors(&constant) {
                for q in divisors(&leading) {
                    for s in [1i64, -1] {
                        let cand = Rational::new(p.clone() * s, q.clone());
                        if reduced.eval(&cand).is_zero() && !roots.contains(&cand) {
                            roots.push(cand);
                        }
                    }
                }
            }
        }
        roots.sort();
        roots
    }
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let n_small = n.to_u64().expect("rational root search on oversized coefficient");
    let mut out = Vec::new();
    let mut d = 1u64;
    while d * d <= n_small {
        if n_small % d == 0 {
            out.push(BigInt::from(d));
            if d * d != n_small {
                out.push(BigInt::from(n_small / d));
            }
        }
        d += 1;
    }
    out
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let (neg, mag) = if c.is_negative() { (true, -c) } else { (false, c.clone()) };
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let unit = mag.is_one() && k > 0;
            if !unit {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => write!(f, "{}t", if unit { "" } else { "*" })?,
                _ => write!(f, "{}t^{k}", if unit { "" } else { "*" })?,
            }
        }
        Ok(())
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Increasing `k`-subsets of `0..n` as bitmasks, in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<u32> {
    fn rec(start: usize, n: usize, k: usize, mask: u32, out: &mut Vec<u32>) {
        if k == 0 {
            out.push(mask);
            return;
        }
        for i in start..n {
            if n - i < k {
                break;
            }
            rec(i + 1, n, k - 1, mask | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, 0, &mut out);
    }
    out
}

/// Elements of a bitmask subset in increasing order.
pub fn mask_elements(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

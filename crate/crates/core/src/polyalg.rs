//! Real univariate polynomials, real root finding, and Sylvester-resultant
//! elimination for two-variable polynomial systems.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomial is identically zero")]
    IdenticallyZero,
    #[error("polynomial has a non-finite coefficient")]
    NonFinite,
    #[error("both polynomials are constant in the eliminated variable")]
    ConstantInEliminated,
}

/// Commutative ring operations needed by division-free determinant expansion.
pub trait Ring: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    fn is_zero(&self) -> bool;

    fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    fn constant(c: f64) -> Self {
        Self::one().scale(c)
    }
}

impl Ring for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

/// Real polynomial with coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial and trims trailing (highest-degree) exact zeros.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// The polynomial `z`.
    pub fn identity() -> Self {
        Polynomial::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut p = Polynomial::constant(1.0);
        for &r in roots {
            p = p.mul(&Polynomial::new(vec![-r, 1.0]));
        }
        p
    }

    /// `c * z^k`
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Polynomial::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `z^i` (zero past the degree).
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == 0.0) {
            self.coeffs.pop();
        }
    }

    /// Drops high-degree coefficients whose magnitude is below
    /// `eps * max_abs_coeff`.
    pub fn trim_relative(&self, eps: f64) -> Self {
        let thr = eps * self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while matches!(coeffs.last(), Some(c) if c.abs() <= thr) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    /// Horner evaluation.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner.
    pub fn eval_with_derivative(&self, z: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `sum |c_i| |z|^i`, the natural rounding-error scale of `eval(z)`.
    pub fn abs_eval(&self, z: f64) -> f64 {
        let az = z.abs();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * az + c.abs())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    /// Quotient and remainder of Euclidean division.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial), PolyError> {
        let dv = divisor.degree().ok_or(PolyError::IdenticallyZero)?;
        let Some(dd) = self.degree() else {
            return Ok((Polynomial::zero(), Polynomial::zero()));
        };
        if dd < dv {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; dd - dv + 1];
        for i in (0..=dd - dv).rev() {
            let q = rem[i + dv] / lead;
            quot[i] = q;
            for (j, &dc) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= q * dc;
            }
            rem[i + dv] = 0.0;
        }
        rem.truncate(dv);
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// `p(s z)`
    pub fn scale_variable(&self, s: f64) -> Self {
        let mut f = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let v = c * f;
                f *= s;
                v
            })
            .collect();
        Polynomial::new(coeffs)
    }
}

impl Ring for Polynomial {
    fn zero() -> Self {
        Polynomial::zero()
    }
    fn one() -> Self {
        Polynomial::constant(1.0)
    }
    fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }
    fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }
    fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
    fn scale(&self, s: f64) -> Self {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// A polynomial in an outer variable whose coefficients are polynomials in an
/// inner variable: `sum_j outer[j](a) * b^j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolyInTwoStages {
    pub outer: Vec<Polynomial>,
}

impl PolyInTwoStages {
    pub fn new(outer: Vec<Polynomial>) -> Self {
        let mut p = PolyInTwoStages { outer };
        while matches!(p.outer.last(), Some(c) if c.is_zero()) {
            p.outer.pop();
        }
        p
    }

    /// Polynomial depending on the inner variable only.
    pub fn from_inner(p: Polynomial) -> Self {
        PolyInTwoStages::new(vec![p])
    }

    /// Polynomial depending on the outer variable only.
    pub fn from_outer(p: &Polynomial) -> Self {
        PolyInTwoStages::new(p.coeffs().iter().map(|&c| Polynomial::constant(c)).collect())
    }

    /// The inner variable itself.
    pub fn inner_var() -> Self {
        PolyInTwoStages::from_inner(Polynomial::identity())
    }

    /// The outer variable itself.
    pub fn outer_var() -> Self {
        PolyInTwoStages::new(vec![Polynomial::zero(), Polynomial::constant(1.0)])
    }

    pub fn outer_degree(&self) -> Option<usize> {
        if self.outer.is_empty() {
            None
        } else {
            Some(self.outer.len() - 1)
        }
    }

    pub fn inner_degree(&self) -> Option<usize> {
        self.outer.iter().filter_map(|p| p.degree()).max()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.outer.iter().fold(0.0_f64, |m, p| m.max(p.max_abs_coeff()))
    }

    /// Substitutes a numeric inner variable, leaving a polynomial in the
    /// outer variable.
    pub fn at_inner(&self, a: f64) -> Polynomial {
        Polynomial::new(self.outer.iter().map(|p| p.eval(a)).collect())
    }

    /// Substitutes a numeric outer variable, leaving a polynomial in the
    /// inner variable.
    pub fn at_outer(&self, b: f64) -> Polynomial {
        let mut acc = Polynomial::zero();
        for p in self.outer.iter().rev() {
            acc = acc.scale(b).add(p);
        }
        acc
    }

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        self.at_inner(a).eval(b)
    }

    /// Partial derivative in the inner variable.
    pub fn d_inner(&self) -> Self {
        PolyInTwoStages::new(self.outer.iter().map(|p| p.derivative()).collect())
    }

    /// Partial derivative in the outer variable.
    pub fn d_outer(&self) -> Self {
        if self.outer.len() <= 1 {
            return PolyInTwoStages::new(Vec::new());
        }
        PolyInTwoStages::new(
            self.outer
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, p)| p.scale(j as f64))
                .collect(),
        )
    }

    /// Exchanges the roles of the inner and outer variables.
    pub fn swap_variables(&self) -> Self {
        let inner_len = self.inner_degree().map_or(0, |d| d + 1);
        let outer = (0..inner_len)
            .map(|i| Polynomial::new(self.outer.iter().map(|p| p.coeff(i)).collect()))
            .collect();
        PolyInTwoStages::new(outer)
    }

    /// Drops coefficients below `eps` times the largest coefficient, then
    /// trailing outer terms that became zero.
    pub fn trim_relative(&self, eps: f64) -> Self {
        let thr = eps * self.max_abs_coeff();
        let outer = self
            .outer
            .iter()
            .map(|p| {
                if p.max_abs_coeff() <= thr {
                    Polynomial::zero()
                } else {
                    p.clone()
                }
            })
            .collect();
        PolyInTwoStages::new(outer)
    }
}

impl Ring for PolyInTwoStages {
    fn zero() -> Self {
        PolyInTwoStages::new(Vec::new())
    }
    fn one() -> Self {
        PolyInTwoStages::from_inner(Polynomial::constant(1.0))
    }
    fn add(&self, other: &Self) -> Self {
        let n = self.outer.len().max(other.outer.len());
        let zero = Polynomial::zero();
        PolyInTwoStages::new(
            (0..n)
                .map(|j| {
                    self.outer.get(j).unwrap_or(&zero).add(other.outer.get(j).unwrap_or(&zero))
                })
                .collect(),
        )
    }
    fn sub(&self, other: &Self) -> Self {
        let n = self.outer.len().max(other.outer.len());
        let zero = Polynomial::zero();
        PolyInTwoStages::new(
            (0..n)
                .map(|j| {
                    self.outer.get(j).unwrap_or(&zero).sub(other.outer.get(j).unwrap_or(&zero))
                })
                .collect(),
        )
    }
    fn mul(&self, other: &Self) -> Self {
        if self.outer.is_empty() || other.outer.is_empty() {
            return Self::zero();
        }
        let mut out = vec![Polynomial::zero(); self.outer.len() + other.outer.len() - 1];
        for (i, p) in self.outer.iter().enumerate() {
            for (j, q) in other.outer.iter().enumerate() {
                out[i + j] = out[i + j].add(&p.mul(q));
            }
        }
        PolyInTwoStages::new(out)
    }
    fn scale(&self, s: f64) -> Self {
        PolyInTwoStages::new(self.outer.iter().map(|p| p.scale(s)).collect())
    }
    fn is_zero(&self) -> bool {
        self.outer.is_empty()
    }
}

/// Division-free determinant by expansion over column subsets.
///
/// Cost is `O(2^k k)` ring products; intended for `k <= 12`.
pub fn det_expand<R: Ring>(m: &[Vec<R>]) -> R {
    let k = m.len();
    if k == 0 {
        return R::one();
    }
    assert!(k <= 20, "det_expand is limited to 20x20");
    let full = (1usize << k) - 1;
    let mut dp: Vec<Option<R>> = vec![None; 1 << k];
    dp[0] = Some(R::one());
    // masks in order of popcount guarantees predecessors are final
    let mut masks: Vec<usize> = (0..=full).collect();
    masks.sort_by_key(|m| m.count_ones());
    for mask in masks {
        let Some(cur) = dp[mask].take() else { continue };
        let row = mask.count_ones() as usize;
        if row == k {
            dp[mask] = Some(cur);
            continue;
        }
        if cur.is_zero() {
            dp[mask] = Some(cur);
            continue;
        }
        for col in 0..k {
            if mask & (1 << col) != 0 || m[row][col].is_zero() {
                continue;
            }
            let above = (mask >> (col + 1)).count_ones();
            let mut term = cur.mul(&m[row][col]);
            if above % 2 == 1 {
                term = term.neg();
            }
            let next = mask | (1 << col);
            dp[next] = Some(match dp[next].take() {
                Some(v) => v.add(&term),
                None => term,
            });
        }
        dp[mask] = Some(cur);
    }
    dp[full].take().unwrap_or_else(R::zero)
}

/// Fraction-free (Bareiss) determinant of a matrix of polynomials, using
/// exact polynomial division with the remainder discarded.
pub fn det_bareiss_poly(m: &[Vec<Polynomial>]) -> Polynomial {
    let n = m.len();
    if n == 0 {
        return Polynomial::constant(1.0);
    }
    let mut a: Vec<Vec<Polynomial>> = m.to_vec();
    let mut sign = 1.0;
    let mut prev = Polynomial::constant(1.0);
    for k in 0..n - 1 {
        let pivot = (k..n)
            .filter(|&i| !a[i][k].is_zero())
            .max_by(|&i, &j| a[i][k].max_abs_coeff().total_cmp(&a[j][k].max_abs_coeff()));
        let Some(p) = pivot else {
            return Polynomial::zero();
        };
        if p != k {
            a.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = a[k][k].mul(&a[i][j]).sub(&a[i][k].mul(&a[k][j]));
                a[i][j] = num
                    .div_rem(&prev)
                    .map(|(q, _)| q)
                    .unwrap_or_else(|_| Polynomial::zero());
            }
            a[i][k] = Polynomial::zero();
        }
        prev = a[k][k].clone();
    }
    a[n - 1][n - 1].scale(sign)
}

/// Determinant of a real matrix: fraction-free elimination with row
/// pivoting up to 8x8, partial-pivot LU above.
pub fn det_real(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    if n > 8 {
        let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
        return mat.lu().determinant();
    }
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut sign = 1.0;
    let mut prev = 1.0;
    for k in 0..n - 1 {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap_or(k);
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[k][k] * a[i][j] - a[i][k] * a[k][j]) / prev;
            }
            a[i][k] = 0.0;
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Sign and natural log of the absolute determinant (partial-pivot LU).
/// Returns `(0.0, -inf)` for an exactly singular factorization.
pub fn log_det_real(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let lu = m.clone().lu();
    let u = lu.u();
    let mut sign = if lu.p().determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let mut log = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        log += d.abs().ln();
    }
    (sign, log)
}

/// A real root with its multiplicity after merging near-coincident roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Residual tolerance relative to `max|coeff| * max(1,|z|)^deg`.
    pub tol_root: f64,
    /// Roots closer than `merge_tol * max(1,|z|)` are merged.
    pub merge_tol: f64,
    /// Eigenvalues with `|Im| <= imag_tol * max(1,|λ|)` (in scaled units)
    /// are treated as real candidates.
    pub imag_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { tol_root: 1e-10, merge_tol: 1e-7, imag_tol: 1e-6 }
    }
}

/// Residual bound used to accept a polished root.
pub fn root_residual_bound(p: &Polynomial, z: f64, tol_root: f64) -> f64 {
    let deg = p.degree().unwrap_or(0) as i32;
    tol_root * p.max_abs_coeff() * z.abs().max(1.0).powi(deg)
}

fn newton_polish(p: &Polynomial, z0: f64) -> f64 {
    let mut z = z0;
    let reach = 1e-4 * z0.abs().max(1.0);
    for _ in 0..60 {
        let (v, dv) = p.eval_with_derivative(z);
        if v == 0.0 || dv == 0.0 || !dv.is_finite() {
            break;
        }
        let step = v / dv;
        let next = z - step;
        if !next.is_finite() || (next - z0).abs() > reach {
            break;
        }
        // only keep steps that do not increase the residual
        if p.eval(next).abs() > v.abs() {
            break;
        }
        z = next;
        if step.abs() <= 4.0 * f64::EPSILON * z.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    z
}

/// All real roots of `p` (optionally restricted to `[lo, hi]`), ascending,
/// with near-multiple roots merged and their multiplicity reported.
pub fn real_roots(p: &Polynomial, interval: Option<(f64, f64)>) -> Result<Vec<RealRoot>, PolyError> {
    real_roots_with(p, interval, &RootOptions::default())
}

pub fn real_roots_with(
    p: &Polynomial,
    interval: Option<(f64, f64)>,
    opts: &RootOptions,
) -> Result<Vec<RealRoot>, PolyError> {
    if !p.is_finite() {
        return Err(PolyError::NonFinite);
    }
    let Some(deg) = p.degree() else {
        return Err(PolyError::IdenticallyZero);
    };
    if deg == 0 {
        return Ok(Vec::new());
    }
    let zero_mult = p.coeffs().iter().take_while(|c| **c == 0.0).count();
    let q = Polynomial::new(p.coeffs()[zero_mult..].to_vec());
    let dq = q.degree().unwrap_or(0);

    let mut candidates: Vec<f64> = Vec::new();
    if dq > 0 {
        // power-of-two variable scaling keeps the companion matrix balanced
        let r = (q.coeff(0).abs() / q.leading().abs()).powf(1.0 / dq as f64);
        let s = if r.is_finite() && r > 0.0 { 2f64.powi(r.log2().round() as i32) } else { 1.0 };
        let qs = q.scale_variable(s);
        let lead = qs.leading();
        let comp = DMatrix::from_fn(dq, dq, |i, j| {
            if i == 0 {
                -qs.coeff(dq - 1 - j) / lead
            } else if j + 1 == i {
                1.0
            } else {
                0.0
            }
        });
        for lam in comp.complex_eigenvalues().iter() {
            if lam.im.abs() <= opts.imag_tol * lam.norm().max(1.0) {
                candidates.push(lam.re * s);
            }
        }
    }

    let mut roots: Vec<f64> = Vec::new();
    for z0 in candidates {
        let z = newton_polish(&q, z0);
        let res = p.eval(z).abs();
        if res <= root_residual_bound(p, z, opts.tol_root) {
            roots.push(z);
        }
    }
    for _ in 0..zero_mult {
        roots.push(0.0);
    }
    roots.sort_by(|a, b| a.total_cmp(b));

    let mut merged: Vec<RealRoot> = Vec::new();
    let mut group: Vec<f64> = Vec::new();
    let flush = |group: &mut Vec<f64>, merged: &mut Vec<RealRoot>| {
        if !group.is_empty() {
            let mean = group.iter().sum::<f64>() / group.len() as f64;
            merged.push(RealRoot { value: mean, multiplicity: group.len() });
            group.clear();
        }
    };
    for z in roots {
        if let Some(&last) = group.last() {
            if (z - last).abs() > opts.merge_tol * z.abs().max(1.0) {
                flush(&mut group, &mut merged);
            }
        }
        group.push(z);
    }
    flush(&mut group, &mut merged);

    if let Some((lo, hi)) = interval {
        merged.retain(|r| r.value >= lo && r.value <= hi);
    }
    Ok(merged)
}

/// Real values in the interval where both `p` and `q` vanish, to a
/// tolerance relative to `sum |coeff| |z|^i` of each polynomial.
pub fn common_roots(p: &Polynomial, q: &Polynomial, interval: Option<(f64, f64)>, tol: f64) -> Vec<f64> {
    if p.is_zero() && q.is_zero() {
        return Vec::new();
    }
    let (first, second) = match (p.degree(), q.degree()) {
        (Some(dp), Some(dq)) if dq > 0 && (dq < dp || dp == 0) => (q, p),
        (None, _) => (q, p),
        _ => (p, q),
    };
    let Ok(roots) = real_roots(first, interval) else {
        return Vec::new();
    };
    roots
        .into_iter()
        .map(|r| r.value)
        .filter(|&z| {
            let ok = |f: &Polynomial| f.is_zero() || f.eval(z).abs() <= tol * f.abs_eval(z).max(f64::MIN_POSITIVE);
            ok(first) && ok(second)
        })
        .collect()
}

/// Sylvester matrix of two polynomials given by formal degrees, with rows of
/// `p` first and coefficients in descending order.
pub fn sylvester_matrix<R: Ring>(p: &[R], q: &[R]) -> Vec<Vec<R>> {
    let dp = p.len() - 1;
    let dq = q.len() - 1;
    let size = dp + dq;
    let mut m = vec![vec![R::zero(); size]; size];
    for i in 0..dq {
        for (j, c) in p.iter().rev().enumerate() {
            m[i][i + j] = c.clone();
        }
    }
    for i in 0..dp {
        for (j, c) in q.iter().rev().enumerate() {
            m[dq + i][i + j] = c.clone();
        }
    }
    m
}

/// Resultant of `p` and `q` with respect to their outer variable, as a
/// polynomial in the inner variable.
pub fn sylvester_resultant(p: &PolyInTwoStages, q: &PolyInTwoStages) -> Result<Polynomial, PolyError> {
    let (Some(dp), Some(dq)) = (p.outer_degree(), q.outer_degree()) else {
        return Err(PolyError::IdenticallyZero);
    };
    if dp == 0 && dq == 0 {
        return Err(PolyError::ConstantInEliminated);
    }
    let m = sylvester_matrix(&p.outer, &q.outer);
    if m.len() <= 12 {
        Ok(det_expand(&m))
    } else {
        Ok(det_bareiss_poly(&m))
    }
}

/// Numeric resultant at a fixed inner value, using the formal outer degrees
/// of `p` and `q`. Returns `(sign, ln|det|)`.
pub fn sylvester_resultant_at(p: &PolyInTwoStages, q: &PolyInTwoStages, a: f64) -> (f64, f64) {
    let pc: Vec<f64> = p.outer.iter().map(|c| c.eval(a)).collect();
    let qc: Vec<f64> = q.outer.iter().map(|c| c.eval(a)).collect();
    if pc.len() < 2 && qc.len() < 2 {
        return (0.0, f64::NEG_INFINITY);
    }
    let m = sylvester_matrix(&pc, &qc);
    let n = m.len();
    // row equilibration keeps the LU well scaled; positive factors keep the sign
    let mut shift = 0.0;
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let mut scaled = mat.clone();
    for i in 0..n {
        let norm = (0..n).fold(0.0_f64, |acc, j| acc.max(mat[(i, j)].abs()));
        if norm > 0.0 {
            for j in 0..n {
                scaled[(i, j)] /= norm;
            }
            shift += norm.ln();
        }
    }
    let (s, l) = log_det_real(&scaled);
    (s, l + shift)
}

//! Moment sequences, their shifted variants, and Hankel determinant and
//! definiteness tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyalg::{det_expand, det_real, Ring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HankelError {
    #[error("sequence of length {len} is too short for {what}")]
    TooShort { len: usize, what: String },
    #[error("moment sequence has a non-finite entry")]
    NonFinite,
}

/// A finite sequence `c_1, ..., c_n` (stored zero-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    pub c: Vec<f64>,
}

impl MomentSequence {
    pub fn new(c: Vec<f64>) -> Result<Self, HankelError> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(HankelError::NonFinite);
        }
        Ok(MomentSequence { c })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// One-based access: `get(1)` is `c_1`.
    pub fn get(&self, j: usize) -> f64 {
        self.c[j - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Moments `sum_s w_s p_s^(j-1)`, `j = 1..n`, of a finitely supported measure.
    pub fn of_atoms(points: &[f64], weights: &[f64], n: usize) -> Self {
        let mut c = vec![0.0; n];
        for (&p, &w) in points.iter().zip(weights) {
            let mut pw = w;
            for cj in c.iter_mut() {
                *cj += pw;
                pw *= p;
            }
        }
        MomentSequence { c }
    }
}

/// Which shifted sequence to form from `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShiftKind {
    Plain,
    /// `c^a_j = c_{j+1} - a c_j`
    A,
    /// `c^b_j = -c_{j+1} + b c_j`
    B,
    /// `c^{a,b}_j = -c_{j+2} + (a+b) c_{j+1} - a b c_j`
    AB,
}

impl ShiftKind {
    /// How many entries the shift consumes.
    pub fn shortening(self) -> usize {
        match self {
            ShiftKind::Plain => 0,
            ShiftKind::A | ShiftKind::B => 1,
            ShiftKind::AB => 2,
        }
    }
}

/// Applies a shift over any ring, so the same formulas serve numeric and
/// symbolic (polynomial-valued) sequences.
pub fn shift_generic<R: Ring>(c: &[R], kind: ShiftKind, a: &R, b: &R) -> Option<Vec<R>> {
    let drop = kind.shortening();
    if c.len() <= drop {
        return None;
    }
    let len = c.len() - drop;
    let out = match kind {
        ShiftKind::Plain => c.to_vec(),
        ShiftKind::A => (0..len).map(|j| c[j + 1].sub(&a.mul(&c[j]))).collect(),
        ShiftKind::B => (0..len).map(|j| b.mul(&c[j]).sub(&c[j + 1])).collect(),
        ShiftKind::AB => {
            let sum = a.add(b);
            let prod = a.mul(b);
            (0..len)
                .map(|j| sum.mul(&c[j + 1]).sub(&c[j + 2]).sub(&prod.mul(&c[j])))
                .collect()
        }
    };
    Some(out)
}

pub fn shift_sequence(
    c: &MomentSequence,
    kind: ShiftKind,
    a: f64,
    b: f64,
) -> Result<MomentSequence, HankelError> {
    shift_generic(&c.c, kind, &a, &b)
        .map(|c| MomentSequence { c })
        .ok_or_else(|| HankelError::TooShort { len: c.len(), what: format!("{kind:?} shift") })
}

fn check_span(len: usize, k: usize, d: usize) -> Result<(), HankelError> {
    if k > 0 && 2 * k - 1 + d > len {
        return Err(HankelError::TooShort { len, what: format!("{k}x{k} Hankel block at shift {d}") });
    }
    Ok(())
}

/// The `k x k` matrix `{c_{i+j-1+d}}`.
pub fn hankel_matrix(c: &MomentSequence, k: usize, d: usize) -> Result<Vec<Vec<f64>>, HankelError> {
    check_span(c.len(), k, d)?;
    Ok((0..k).map(|i| (0..k).map(|j| c.c[i + j + d]).collect()).collect())
}

/// Symbolic counterpart of [`hankel_matrix`].
pub fn hankel_matrix_generic<R: Ring>(c: &[R], k: usize, d: usize) -> Option<Vec<Vec<R>>> {
    if k > 0 && 2 * k - 1 + d > c.len() {
        return None;
    }
    Some((0..k).map(|i| (0..k).map(|j| c[i + j + d].clone()).collect()).collect())
}

/// `det {c_{i+j-1+d}}_{i,j=1..k}`; the empty determinant is 1.
pub fn hankel_det(c: &MomentSequence, k: usize, d: usize) -> Result<f64, HankelError> {
    Ok(det_real(&hankel_matrix(c, k, d)?))
}

pub fn hankel_det_generic<R: Ring>(c: &[R], k: usize, d: usize) -> Option<R> {
    hankel_matrix_generic(c, k, d).map(|m| det_expand(&m))
}

/// `|det| / prod ||row||_2`, which lies in `[0, 1]` by Hadamard's inequality.
pub fn normalized_det(m: &[Vec<f64>]) -> f64 {
    let det = det_real(m);
    let mut bound = 1.0;
    for row in m {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        bound *= norm;
    }
    (det.abs() / bound).min(1.0)
}

/// Leading principal minors `D_1, ..., D_k` of `{c_{i+j-1+d}}`.
pub fn leading_minors(c: &MomentSequence, k: usize, d: usize) -> Result<Vec<f64>, HankelError> {
    let m = hankel_matrix(c, k, d)?;
    Ok((1..=k)
        .map(|i| {
            let sub: Vec<Vec<f64>> = m[..i].iter().map(|r| r[..i].to_vec()).collect();
            det_real(&sub)
        })
        .collect())
}

/// Thresholds `tol * |H_ii| * D_(i-1)` for the minors `D_i`, i.e. each
/// Cholesky pivot `D_i / D_(i-1)` must exceed `tol` times its diagonal entry.
pub fn minor_thresholds(c: &MomentSequence, k: usize, d: usize, tol: f64) -> Result<Vec<f64>, HankelError> {
    let m = hankel_matrix(c, k, d)?;
    let minors = leading_minors(c, k, d)?;
    Ok((0..k)
        .map(|i| {
            let prev = if i == 0 { 1.0 } else { minors[i - 1].max(0.0) };
            tol * m[i][i].abs() * prev
        })
        .collect())
}

/// Strict positive definiteness by leading principal minors against a
/// scale-relative threshold. `k = 0` is vacuously true.
pub fn is_positive_definite(c: &MomentSequence, k: usize, d: usize, tol: f64) -> bool {
    if k == 0 {
        return true;
    }
    match (leading_minors(c, k, d), minor_thresholds(c, k, d, tol)) {
        (Ok(minors), Ok(thr)) => minors.iter().zip(&thr).all(|(m, t)| *m > *t),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{PolyInTwoStages, Polynomial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(v: &[f64]) -> MomentSequence {
        MomentSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_a_shift_drops_first_entry() {
        let c = seq(&[1.0, 2.0, 3.0, 4.0]);
        let s = shift_sequence(&c, ShiftKind::A, 0.0, 7.0).unwrap();
        assert_eq!(s.c, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn shift_compositions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = seq(&(0..7).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
            let (a, b) = (rng.gen_range(-3.0..0.0), rng.gen_range(0.0..3.0));
            let ab = shift_sequence(&c, ShiftKind::AB, a, b).unwrap();
            let a_then_b =
                shift_sequence(&shift_sequence(&c, ShiftKind::A, a, b).unwrap(), ShiftKind::B, a, b).unwrap();
            let b_then_a =
                shift_sequence(&shift_sequence(&c, ShiftKind::B, a, b).unwrap(), ShiftKind::A, a, b).unwrap();
            for j in 0..ab.len() {
                let s = 1.0 + ab.c[j].abs();
                assert!((ab.c[j] - a_then_b.c[j]).abs() <= 1e-12 * s);
                assert!((ab.c[j] - b_then_a.c[j]).abs() <= 1e-12 * s);
            }
        }
    }

    #[test]
    fn too_short_errors() {
        assert!(shift_sequence(&seq(&[1.0]), ShiftKind::A, 0.0, 1.0).is_err());
        assert!(hankel_det(&seq(&[1.0, 2.0]), 2, 0).is_err());
    }

    #[test]
    fn one_by_one_is_first_entry() {
        assert_eq!(hankel_det(&seq(&[3.5, 1.0]), 1, 0).unwrap(), 3.5);
        assert_eq!(hankel_det(&seq(&[3.5, 1.0]), 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn two_node_moments_give_singular_three_by_three() {
        let c = MomentSequence::of_atoms(&[1.7, -0.6], &[2.0, 0.8], 5);
        let m = hankel_matrix(&c, 3, 0).unwrap();
        assert!(normalized_det(&m) < 1e-10);
        assert!(hankel_det(&c, 3, 0).unwrap().abs() < 1e-10 * c.max_abs().powi(3));
    }

    #[test]
    fn three_node_moments_are_positive_definite() {
        let c = MomentSequence::of_atoms(&[1.3, 0.4, -0.9], &[0.5, 2.0, 1.1], 7);
        assert!(is_positive_definite(&c, 2, 0, 1e-9));
        assert!(is_positive_definite(&c, 2, 2, 1e-9));
        assert!(is_positive_definite(&c, 3, 0, 1e-9));
        assert!(!is_positive_definite(&c, 4, 0, 1e-9));
    }

    #[test]
    fn empty_definiteness_is_true() {
        assert!(is_positive_definite(&seq(&[-1.0]), 0, 0, 1e-9));
    }

    #[test]
    fn symbolic_case_four_determinant() {
        // c2 = a^2 + 3/2, c3 = 2/3 a^3 + 17/3, c4 = 1/2 a^4 - 9/4
        let c = vec![
            Polynomial::zero(),
            Polynomial::new(vec![1.5, 0.0, 1.0]),
            Polynomial::new(vec![17.0 / 3.0, 0.0, 0.0, 2.0 / 3.0]),
            Polynomial::new(vec![-2.25, 0.0, 0.0, 0.0, 0.5]),
        ];
        let det = hankel_det_generic(&c, 2, 1).unwrap();
        let want = [-2555.0 / 72.0, 0.0, -9.0 / 4.0, -68.0 / 9.0, 0.75, 0.0, 1.0 / 18.0];
        for (i, w) in want.iter().enumerate() {
            assert!((det.coeff(i) - w).abs() <= 1e-12 * w.abs().max(1.0));
        }
        // generic shift over two-variable polynomials matches numeric shift
        let cc: Vec<PolyInTwoStages> = c.iter().map(|p| PolyInTwoStages::from_inner(p.clone())).collect();
        let a = PolyInTwoStages::inner_var();
        let b = PolyInTwoStages::outer_var();
        let s = shift_generic(&cc, ShiftKind::AB, &a, &b).unwrap();
        let (av, bv) = (-0.4, 1.2);
        let num: Vec<f64> = c.iter().map(|p| p.eval(av)).collect();
        let ns = shift_sequence(&seq(&num), ShiftKind::AB, av, bv).unwrap();
        for j in 0..ns.len() {
            assert!((s[j].eval(av, bv) - ns.c[j]).abs() < 1e-13);
        }
    }
}

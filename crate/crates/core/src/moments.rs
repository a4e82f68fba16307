//! Moment sequences of the control problem: numeric assembly from the initial
//! state and endpoint parameters, their polynomial forms per case, and the
//! sign symmetry of the system.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::casesolver::CaseDescriptor;
use crate::compensated::CompensatedSum;
use crate::hankel::MomentSequence;
use crate::polyalg::{PolyInTwoStages, Polynomial, Ring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentsError {
    #[error("state dimension {0} is below 4")]
    TooShort(usize),
    #[error("initial state has a non-finite component")]
    NonFinite,
    #[error("x1 = 0 is a non-generic initial state")]
    NonGeneric,
    #[error("x1 must be positive after normalization, got {0}")]
    NotNormalized(f64),
    #[error("endpoints violate a <= 0 <= x1 <= b (a = {a}, b = {b})")]
    InvalidEndpoints { a: f64, b: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
}

/// Initial state with `n >= 4` and positive first component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    x0: Vec<f64>,
}

impl InitialState {
    pub fn new(x0: Vec<f64>) -> Result<Self, MomentsError> {
        if x0.len() < 4 {
            return Err(MomentsError::TooShort(x0.len()));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(MomentsError::NonFinite);
        }
        if x0[0] <= 0.0 {
            return Err(MomentsError::NotNormalized(x0[0]));
        }
        Ok(InitialState { x0 })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// `x_1^0`
    pub fn x1(&self) -> f64 {
        self.x0[0]
    }

    /// One-based component access.
    pub fn x(&self, j: usize) -> f64 {
        self.x0[j - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.x0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// The segment `[a, b]` carrying the measure: `a <= 0`, `b >= x_1^0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointPair {
    pub a: f64,
    pub b: f64,
}

/// The state reached by `u -> -u`: `y_1 = -x_1`, `y_j = (-1)^(j-1) x_j`.
pub fn mirror(x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| match i {
            0 => -v,
            _ if i % 2 == 1 => -v,
            _ => v,
        })
        .collect()
}

/// Maps a raw state to one with `x_1 > 0`, reporting whether it was mirrored.
pub fn normalize_initial_state(raw: &[f64]) -> Result<(InitialState, bool), MomentsError> {
    if raw.len() < 4 {
        return Err(MomentsError::TooShort(raw.len()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(MomentsError::NonFinite);
    }
    if raw[0] == 0.0 {
        return Err(MomentsError::NonGeneric);
    }
    if raw[0] > 0.0 {
        Ok((InitialState::new(raw.to_vec())?, false))
    } else {
        Ok((InitialState::new(mirror(raw))?, true))
    }
}

/// Moments `c_1 .. c_n` for given `a`, `b`, and time `theta`:
/// `c_1 = theta + x_1 - 2b + 2a`, `c_j = -x_j + (x_1^j - 2 b^j + 2 a^j) / j`.
pub fn assemble_moments(
    x0: &InitialState,
    a: f64,
    b: f64,
    theta: f64,
) -> Result<MomentSequence, MomentsError> {
    let x1 = x0.x1();
    if !(a <= 0.0 && b >= x1) {
        return Err(MomentsError::InvalidEndpoints { a, b });
    }
    if theta.is_nan() || theta < 0.0 {
        return Err(MomentsError::NegativeTime(theta));
    }
    Ok(assemble_unchecked(x0, a, b, theta))
}

/// [`assemble_moments`] without the admissibility checks, for diagnostics
/// on rejected candidates.
pub fn assemble_unchecked(x0: &InitialState, a: f64, b: f64, theta: f64) -> MomentSequence {
    let n = x0.dim();
    let x1 = x0.x1();
    let mut c = Vec::with_capacity(n);
    let mut c1 = CompensatedSum::new(theta);
    c1.add(x1);
    c1.add(-2.0 * b);
    c1.add(2.0 * a);
    c.push(c1.value());
    let (mut px, mut pb, mut pa) = (x1, b, a);
    for j in 2..=n {
        px *= x1;
        pb *= b;
        pa *= a;
        let jf = j as f64;
        let mut s = CompensatedSum::new(-x0.x(j));
        s.add(px / jf);
        s.add(-2.0 * pb / jf);
        s.add(2.0 * pa / jf);
        c.push(s.value());
    }
    MomentSequence { c }
}

/// `c_j` as polynomials in the free endpoints (inner variable `a`, outer
/// variable `b`), with fixed endpoints substituted. `c_1` is stored without
/// its `theta` term: `c_1 = theta + c1_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPolynomials {
    /// `cj[0]` is `c1_offset`, `cj[j-1]` is `c_j` for `j >= 2`.
    pub cj: Vec<PolyInTwoStages>,
    pub a_fixed: bool,
    pub b_fixed: bool,
}

impl MomentPolynomials {
    /// `a_fixed` substitutes `a = 0`; `b_fixed` substitutes `b = x_1^0`.
    pub fn build(x0: &InitialState, a_fixed: bool, b_fixed: bool) -> Self {
        let n = x0.dim();
        let x1 = x0.x1();
        let mut cj = Vec::with_capacity(n);
        for j in 1..=n {
            let jf = j as f64;
            let xj_pow = x1.powi(j as i32);
            let mut constant = CompensatedSum::new(if j == 1 { x1 } else { -x0.x(j) + xj_pow / jf });
            let mut poly = PolyInTwoStages::zero();
            if b_fixed {
                constant.add(-2.0 * xj_pow / jf);
            } else {
                poly = poly.add(&PolyInTwoStages::from_outer(&Polynomial::monomial(-2.0 / jf, j)));
            }
            if !a_fixed {
                poly = poly.add(&PolyInTwoStages::from_inner(Polynomial::monomial(2.0 / jf, j)));
            }
            poly = poly.add(&PolyInTwoStages::from_inner(Polynomial::constant(constant.value())));
            cj.push(poly);
        }
        MomentPolynomials { cj, a_fixed, b_fixed }
    }

    /// Numeric moment sequence; fixed endpoints ignore the passed values.
    pub fn eval(&self, a: f64, b: f64, theta: f64) -> MomentSequence {
        let c = self
            .cj
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let v = p.eval(a, b);
                if i == 0 {
                    v + theta
                } else {
                    v
                }
            })
            .collect();
        MomentSequence { c }
    }
}

/// Polynomial moments for the endpoint substitutions of a case.
pub fn case_polynomials(x0: &InitialState, case: &CaseDescriptor) -> MomentPolynomials {
    MomentPolynomials::build(x0, case.a_fixed, case.b_fixed)
}

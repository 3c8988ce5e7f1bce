//! Padé approximants `R_{S,T}(θ) = P_T(θ)/Q_S(θ)` of `exp(θ)`.
//!
//! Coefficients come from the classical closed form and are kept as exact
//! rationals; they are converted to `f64` only when applied.
//!
//! ```text
//! a_j = (S+T-j)! T! / ((S+T)! j! (T-j)!)            numerator,   j = 0..T
//! b_j = (-1)^j (S+T-j)! S! / ((S+T)! j! (S-j)!)     denominator, j = 0..S
//! exp(θ) - R_{S,T}(θ) = c θ^{S+T+1} + O(θ^{S+T+2}),
//! c = (-1)^S S! T! / ((S+T)! (S+T+1)!)
//! ```

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::operators::BlockOperator;

pub type Rational = Ratio<i64>;

pub const MAX_ORDER: usize = 4;

/// `|Q_S(θ)|` below this is treated as a pole.
pub const POLE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct RationalApproximant {
    /// Denominator degree `S`.
    pub s: usize,
    /// Numerator degree `T`.
    pub t: usize,
    /// `a_0 .. a_T`, `a_0 = 1`.
    pub numerator: Vec<Rational>,
    /// `b_0 .. b_S`, `b_0 = 1`.
    pub denominator: Vec<Rational>,
    /// `c_{S+T+1}`.
    pub leading_error: Rational,
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

pub fn pade_coefficients(s: usize, t: usize) -> Result<RationalApproximant> {
    if s > MAX_ORDER || t > MAX_ORDER || s + t == 0 {
        return Err(Error::UnsupportedOrder { s, t });
    }
    let total = factorial(s + t);
    let numerator = (0..=t)
        .map(|j| {
            Rational::new(
                factorial(s + t - j) * factorial(t),
                total * factorial(j) * factorial(t - j),
            )
        })
        .collect();
    let denominator = (0..=s)
        .map(|j| {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            Rational::new(
                sign * factorial(s + t - j) * factorial(s),
                total * factorial(j) * factorial(s - j),
            )
        })
        .collect();
    let sign = if s.is_multiple_of(2) { 1 } else { -1 };
    let leading_error = Rational::new(
        sign * factorial(s) * factorial(t),
        total * factorial(s + t + 1),
    );
    Ok(RationalApproximant {
        s,
        t,
        numerator,
        denominator,
        leading_error,
    })
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn horner(coeffs: &[f64], theta: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * theta + c)
}

impl RationalApproximant {
    pub fn numerator_f64(&self) -> Vec<f64> {
        self.numerator.iter().map(to_f64).collect()
    }

    pub fn denominator_f64(&self) -> Vec<f64> {
        self.denominator.iter().map(to_f64).collect()
    }

    pub fn leading_error_f64(&self) -> f64 {
        to_f64(&self.leading_error)
    }

    /// Explicit when `S = 0`.
    pub fn is_explicit(&self) -> bool {
        self.s == 0
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        let q = horner(&self.denominator_f64(), theta);
        if q.abs() < POLE_TOLERANCE {
            return Err(Error::Pole {
                theta,
                denominator: q.abs(),
            });
        }
        Ok(horner(&self.numerator_f64(), theta) / q)
    }
}

pub fn eval_scalar(approx: &RationalApproximant, theta: f64) -> Result<f64> {
    approx.eval(theta)
}

/// `sum_j coeffs[j] (kM)^j v`, by Horner's rule over block matvecs.
pub fn apply_poly(coeffs: &[f64], op: &BlockOperator, k: f64, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: v.len(),
        });
    }
    let Some((&last, rest)) = coeffs.split_last() else {
        return Ok(vec![0.0; v.len()]);
    };
    let mut acc: Vec<f64> = v.iter().map(|x| last * x).collect();
    let mut tmp = vec![0.0; v.len()];
    for &c in rest.iter().rev() {
        op.apply(&acc, &mut tmp)?;
        for ((a, m), x) in acc.iter_mut().zip(&tmp).zip(v) {
            *a = k * m + c * x;
        }
    }
    Ok(acc)
}

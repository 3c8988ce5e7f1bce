//! Root-location test for quadratics, the explicit scheme's stability region
//! and the spectra of the implicit one-step maps.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{assemble_system, SpatialGrid};
use crate::pade::{pade_coefficients, RationalApproximant};
use crate::problems::DampedWaveProblem;
use crate::schemes::{make_stepper, SchemeConfig, SchemeKind, Stepper};
use crate::linalg::{spectral_radius, SpectralEstimate};

/// `p(x) = a x^2 + b x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticCoeffs {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        QuadraticCoeffs { a, b, c }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    /// Both roots, via the complex quadratic formula.
    pub fn roots(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.b * self.b - 4.0 * self.a * self.c, 0.0).sqrt();
        let two_a = 2.0 * self.a;
        [(-self.b + disc) / two_a, (-self.b - disc) / two_a]
    }
}

/// True iff both roots lie strictly inside the unit disk:
/// `|c| < a`, `p(1) > 0` and `p(-1) > 0`.
pub fn jury_stable(q: &QuadraticCoeffs) -> Result<bool> {
    if !(q.a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "leading coefficient a = {} must be > 0",
            q.a
        )));
    }
    Ok(q.c.abs() < q.a && q.eval(1.0) > 0.0 && q.eval(-1.0) > 0.0)
}

/// Characteristic quadratic of mode `n` of the explicit scheme with
/// constant damping `gamma_n`:
/// `(1, -2 + γk, 1 - γk + 4 r^2 sin^2(nπ/2N))`, `r = k/h`.
pub fn explicit_char_poly(n: usize, big_n: usize, k: f64, h: f64, gamma_n: f64) -> QuadraticCoeffs {
    let r = k / h;
    let s = (n as f64 * std::f64::consts::PI / (2.0 * big_n as f64)).sin();
    QuadraticCoeffs::new(1.0, -2.0 + gamma_n * k, 1.0 - k * gamma_n + 4.0 * r * r * s * s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; positive when the strict inequality `lhs < rhs` holds.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub conditions: Vec<ConditionReport>,
    pub gamma_star: f64,
}

fn condition(name: &'static str, lhs: f64, rhs: f64) -> ConditionReport {
    ConditionReport {
        name,
        lhs,
        rhs,
        margin: rhs - lhs,
        passed: lhs < rhs,
    }
}

/// Sufficient conditions for the explicit scheme: `k < 2/γ*` and
/// `sqrt(k)/h < sqrt(γ*)/2`. Never stable for `γ* = 0`.
pub fn check_explicit_stability(k: f64, h: f64, gamma_star: f64) -> Result<StabilityVerdict> {
    if !(k > 0.0 && h > 0.0 && gamma_star >= 0.0) || !(k.is_finite() && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need k > 0, h > 0, gamma_star >= 0 (got k = {k}, h = {h}, gamma_star = {gamma_star})"
        )));
    }
    let conditions = vec![
        condition("k < 2/gamma_star", k, 2.0 / gamma_star),
        condition("sqrt(k)/h < sqrt(gamma_star)/2", k.sqrt() / h, gamma_star.sqrt() / 2.0),
    ];
    Ok(StabilityVerdict {
        stable: conditions.iter().all(|c| c.passed),
        conditions,
        gamma_star,
    })
}

/// Jury verdict for every mode `n = 1..N-1` with constant damping `gamma`.
pub fn explicit_mode_checks(big_n: usize, k: f64, h: f64, gamma: f64) -> Vec<bool> {
    (1..big_n)
        .map(|n| jury_stable(&explicit_char_poly(n, big_n, k, h, gamma)).unwrap_or(false))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpectrum {
    pub n: usize,
    /// Eigenvalues of `M` on mode `n`, `+` branch first.
    pub lambda: [Complex64; 2],
    /// Corresponding factors of the one-step map.
    pub mu: [Complex64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationSpectrum {
    pub modes: Vec<ModeSpectrum>,
    pub max_modulus: f64,
}

impl AmplificationSpectrum {
    /// All `λ`, `+` and `-` branch interleaved by mode.
    pub fn lambdas(&self) -> Vec<Complex64> {
        self.modes.iter().flat_map(|m| m.lambda).collect()
    }
}

/// `Some(re)` when `|im| < 1e-12`.
pub fn as_real(z: Complex64) -> Option<f64> {
    (z.im.abs() < 1e-12).then_some(z.re)
}

/// Mode eigenvalues `λ± = -γ/2 ± sqrt(γ^2 - 16 sin^2(nπ/2N)/h^2)/2` of `M`
/// for constant damping.
pub fn mode_eigenvalues(n: usize, big_n: usize, h: f64, gamma: f64) -> [Complex64; 2] {
    let s = (n as f64 * std::f64::consts::PI / (2.0 * big_n as f64)).sin();
    let disc = Complex64::new(gamma * gamma - 16.0 * s * s / (h * h), 0.0).sqrt();
    let half = Complex64::new(-gamma / 2.0, 0.0);
    [half + disc / 2.0, half - disc / 2.0]
}

fn eval_complex(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Spectrum of `Q_S(kM)^{-1} P_T(kM)` on each mode, for constant damping.
pub fn pade_amplification(
    approx: &RationalApproximant,
    big_n: usize,
    h: f64,
    k: f64,
    gamma: f64,
) -> Result<AmplificationSpectrum> {
    if big_n < 2 || !(h > 0.0) || !(k > 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need N >= 2, h > 0, k > 0, gamma >= 0 (got N = {big_n}, h = {h}, k = {k}, gamma = {gamma})"
        )));
    }
    let (p, q) = (approx.numerator_f64(), approx.denominator_f64());
    let mut modes = Vec::with_capacity(big_n - 1);
    let mut max_modulus: f64 = 0.0;
    for n in 1..big_n {
        let lambda = mode_eigenvalues(n, big_n, h, gamma);
        let mut mu = [Complex64::new(0.0, 0.0); 2];
        for (m, l) in mu.iter_mut().zip(lambda) {
            let z = l * k;
            let den = eval_complex(&q, z);
            if den.norm() < crate::pade::POLE_TOLERANCE {
                return Err(Error::Pole {
                    theta: z.re,
                    denominator: den.norm(),
                });
            }
            *m = eval_complex(&p, z) / den;
            max_modulus = max_modulus.max(m.norm());
        }
        modes.push(ModeSpectrum { n, lambda, mu });
    }
    Ok(AmplificationSpectrum { modes, max_modulus })
}

/// `μ = (1 + kλ/2)/(1 - kλ/2)` per mode: the FD-(1,1) map.
pub fn implicit_amplification(big_n: usize, h: f64, k: f64, gamma: f64) -> Result<AmplificationSpectrum> {
    pade_amplification(&pade_coefficients(1, 1)?, big_n, h, k, gamma)
}

/// Power-iteration estimate of the spectral radius of a semigroup scheme's
/// one-step map on an arbitrary problem (variable damping allowed).
pub fn estimate_spectral_radius(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    kind: SchemeKind,
    k: f64,
    seed: u64,
) -> Result<SpectralEstimate> {
    if !matches!(kind, SchemeKind::Semigroup { .. }) {
        return Err(Error::InvalidArgument(format!(
            "spectral radius is only available for the semigroup family, not {}",
            kind.label()
        )));
    }
    let op = assemble_system(grid, problem)?;
    let config = SchemeConfig::new(kind, k)?;
    let Stepper::Semigroup(stepper) = make_stepper(&config, &op, grid, problem)? else {
        unreachable!("semigroup kind builds a semigroup stepper")
    };
    let mut failure = None;
    let estimate = spectral_radius(
        |v, out| match stepper.amplify(v) {
            Ok(w) => out.copy_from_slice(&w),
            Err(e) => {
                failure.get_or_insert(e);
                out.fill(f64::NAN);
            }
        },
        op.dim(),
        seed,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(estimate),
    }
}

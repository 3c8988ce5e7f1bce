//! Banded LU with partial pivoting, a power-iteration spectral radius
//! estimate, and a dense scaling-and-squaring matrix exponential used as a
//! reference for single time steps.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operators::BlockOperator;

/// Square matrix with `kl` sub- and `ku` super-diagonals, row-major band storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let kl = kl.min(n.saturating_sub(1));
        let ku = ku.min(n.saturating_sub(1));
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BandedMatrix::zeros(n, 0, 0);
        m.data.fill(1.0);
        m
    }

    /// From the three diagonals; `sub` and `sup` have length `n - 1`.
    pub fn tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        let mut m = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, diag[i]);
            if i + 1 < n {
                m.set(i + 1, i, sub[i]);
                m.set(i, i + 1, sup[i]);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = value;
    }

    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect())
    }

    pub fn matmul(&self, other: &BandedMatrix) -> Result<BandedMatrix> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut out = BandedMatrix::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for l in self.row_range(i) {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in other.row_range(l) {
                    let idx = i * out.width() + j + out.kl - i;
                    out.data[idx] += a * other.get(l, j);
                }
            }
        }
        Ok(out)
    }

    /// `self + alpha * other`, widening the band as needed.
    pub fn add_scaled(&self, alpha: f64, other: &BandedMatrix) -> BandedMatrix {
        let mut out = BandedMatrix::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in out.row_range(i) {
                out.set(i, j, self.get(i, j) + alpha * other.get(i, j));
            }
        }
        out
    }

    /// Shrinks the band to the outermost nonzero diagonals.
    pub fn trimmed(&self) -> BandedMatrix {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for j in self.row_range(i) {
                if self.get(i, j) != 0.0 {
                    if i > j {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        let mut out = BandedMatrix::zeros(self.n, kl, ku);
        for i in 0..self.n {
            for j in out.row_range(i) {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<BandedMatrix> {
        if !m.is_square() {
            return Err(Error::InvalidArgument(format!(
                "banded matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut full = BandedMatrix::zeros(n, n, n);
        for i in 0..n {
            for j in 0..n {
                full.set(i, j, m[(i, j)]);
            }
        }
        Ok(full.trimmed())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// LU factors of a banded matrix with row partial pivoting.
///
/// Each row stores columns `i - kl ..= i + kl + ku`; the extra `kl` upper
/// diagonals hold fill-in from row interchanges. Multipliers stay in the
/// row that produced them (Gauss-transform form).
#[derive(Debug, Clone)]
pub struct BandedFactorization {
    n: usize,
    kl: usize,
    ku: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedFactorization {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + j + self.kl - i
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        solve_banded(self, rhs)
    }
}

/// Pivots below `1e-14 * max|a_ij|` are reported as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

pub fn lu_factor_banded(matrix: &BandedMatrix) -> Result<BandedFactorization> {
    let (n, kl, ku) = (matrix.n, matrix.kl, matrix.ku);
    let mut f = BandedFactorization {
        n,
        kl,
        ku,
        lu: vec![0.0; n * (2 * kl + ku + 1)],
        pivots: vec![0; n],
    };
    for i in 0..n {
        for j in matrix.row_range(i) {
            let idx = f.idx(i, j);
            f.lu[idx] = matrix.get(i, j);
        }
    }
    let threshold = SINGULAR_PIVOT_RATIO * matrix.max_abs();

    for c in 0..n {
        let last_row = (c + kl).min(n - 1);
        let last_col = (c + kl + ku).min(n - 1);
        let mut p = c;
        let mut best = f.lu[f.idx(c, c)].abs();
        for r in c + 1..=last_row {
            let v = f.lu[f.idx(r, c)].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if !(best > threshold) {
            return Err(Error::Singular { row: c, pivot: best });
        }
        f.pivots[c] = p;
        if p != c {
            for j in c..=last_col {
                let (a, b) = (f.idx(c, j), f.idx(p, j));
                f.lu.swap(a, b);
            }
        }
        let pivot = f.lu[f.idx(c, c)];
        for r in c + 1..=last_row {
            let rc = f.idx(r, c);
            let m = f.lu[rc] / pivot;
            f.lu[rc] = m;
            if m == 0.0 {
                continue;
            }
            for j in c + 1..=last_col {
                let (rj, cj) = (f.idx(r, j), f.idx(c, j));
                f.lu[rj] -= m * f.lu[cj];
            }
        }
    }
    Ok(f)
}

pub fn solve_banded(fact: &BandedFactorization, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = fact.n;
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut x = rhs.to_vec();
    for c in 0..n {
        x.swap(c, fact.pivots[c]);
        let xc = x[c];
        for r in c + 1..=(c + fact.kl).min(n.saturating_sub(1)) {
            x[r] -= fact.lu[fact.idx(r, c)] * xc;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..=(i + fact.kl + fact.ku).min(n - 1) {
            s -= fact.lu[fact.idx(i, j)] * x[j];
        }
        x[i] = s / fact.lu[fact.idx(i, i)];
    }
    Ok(x)
}

/// Largest state dimension accepted by [`matrix_exponential`].
pub const ORACLE_MAX_DIM: usize = 200;

// Padé-13 numerator coefficients, scaling threshold for the 1-norm.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA_13: f64 = 5.371920351148152;

/// `exp(A)` by scaling and squaring with the diagonal (13,13) Padé approximant.
pub fn expm_dense(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("expm needs a square matrix".into()));
    }
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let squarings = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let lu = (&v - &u).lu();
    let mut r = lu
        .solve(&(&v + &u))
        .ok_or(Error::Singular { row: 0, pivot: 0.0 })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Dense `exp(kM)`; reference only, limited to `2(N-1) <= 200`.
pub fn matrix_exponential(op: &BlockOperator, k: f64) -> Result<DMatrix<f64>> {
    if op.dim() > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge(op.dim()));
    }
    expm_dense(&(op.to_dense() * k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOLERANCE: f64 = 1e-6;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

/// Dominant eigenvalue modulus of a real linear map by power iteration.
///
/// Each iterate is normalized and two further images are taken. If the image
/// is parallel to the iterate the eigenvalue is real; otherwise a
/// least-squares fit `y2 + p y1 + q y0 = 0` over the three vectors recovers a
/// dominant complex pair (or a `±λ` pair) as the roots of `z^2 + p z + q`.
/// Non-convergence within the cap is reported, not treated as an error.
pub fn spectral_radius<F>(mut apply: F, n: usize, seed: u64) -> SpectralEstimate
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let mut y1 = DVector::zeros(n);
    let mut y2 = DVector::zeros(n);
    let mut previous = f64::NAN;
    let mut estimate = 0.0;
    for iter in 1..=POWER_MAX_ITERATIONS {
        let norm = y0.norm();
        if norm == 0.0 {
            return SpectralEstimate {
                radius: 0.0,
                iterations: iter,
                converged: true,
            };
        }
        y0 /= norm;
        apply(y0.as_slice(), y1.as_mut_slice());
        apply(y1.as_slice(), y2.as_mut_slice());

        let rayleigh = y0.dot(&y1);
        let residual = (&y1 - &y0 * rayleigh).norm();
        estimate = if residual <= 1e-10 * y1.norm().max(f64::MIN_POSITIVE) {
            rayleigh.abs()
        } else {
            pair_modulus(&y0, &y1, &y2).unwrap_or_else(|| y1.norm())
        };
        if (estimate - previous).abs() <= POWER_TOLERANCE * estimate.abs().max(f64::MIN_POSITIVE) {
            return SpectralEstimate {
                radius: estimate,
                iterations: iter,
                converged: true,
            };
        }
        previous = estimate;
        std::mem::swap(&mut y0, &mut y1);
    }
    SpectralEstimate {
        radius: estimate,
        iterations: POWER_MAX_ITERATIONS,
        converged: false,
    }
}

fn pair_modulus(y0: &DVector<f64>, y1: &DVector<f64>, y2: &DVector<f64>) -> Option<f64> {
    // normal equations for min |y2 + p y1 + q y0|
    let (a11, a12, a22) = (y1.dot(y1), y1.dot(y0), y0.dot(y0));
    let (r1, r2) = (-y2.dot(y1), -y2.dot(y0));
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-14 * a11 * a22 {
        return None;
    }
    let p = (r1 * a22 - r2 * a12) / det;
    let q = (a11 * r2 - a12 * r1) / det;
    let disc = p * p - 4.0 * q;
    Some(if disc < 0.0 {
        q.abs().sqrt()
    } else {
        let s = disc.sqrt();
        ((-p + s) / 2.0).abs().max(((-p - s) / 2.0).abs())
    })
}

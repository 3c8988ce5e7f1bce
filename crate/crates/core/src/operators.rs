//! Spatial grid, the block operator `M = [[0, I], [A/h^2, -Gamma]]` and the
//! forcing vector `F(t) = [0; G(t) + B(t)/h^2]`.
//!
//! `M` is never stored densely: the Laplacian block is the fixed stencil
//! `tridiag(1, -2, 1)` and the damping block is a diagonal.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problems::DampedWaveProblem;

/// Uniform mesh `x_i = a + i h`, `h = (b - a)/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    a: f64,
    b: f64,
    subintervals: usize,
    h: f64,
    interior: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(a: f64, b: f64, subintervals: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidGrid(format!("need a < b, got [{a}, {b}]")));
        }
        if subintervals < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 subintervals, got {subintervals}"
            )));
        }
        let h = (b - a) / subintervals as f64;
        let interior = (1..subintervals).map(|i| a + i as f64 * h).collect();
        Ok(SpatialGrid {
            a,
            b,
            subintervals,
            h,
            interior,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `N`, the number of subintervals.
    pub fn subintervals(&self) -> usize {
        self.subintervals
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.interior
    }

    /// `N - 1`.
    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// All `N + 1` nodes including both endpoints.
    pub fn all_nodes(&self) -> Vec<f64> {
        let mut nodes = Vec::with_capacity(self.subintervals + 1);
        nodes.push(self.a);
        nodes.extend_from_slice(&self.interior);
        nodes.push(self.b);
        nodes
    }
}

pub fn build_grid(a: f64, b: f64, subintervals: usize) -> Result<SpatialGrid> {
    SpatialGrid::new(a, b, subintervals)
}

/// `M = [[0, I], [A/h^2, -Gamma]]` in block storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    damping: Vec<f64>,
    inv_h2: f64,
}

impl BlockOperator {
    /// Builds the operator from nodal damping values and `1/h^2`.
    pub fn from_parts(damping: Vec<f64>, inv_h2: f64) -> Result<Self> {
        if damping.is_empty() {
            return Err(Error::InvalidArgument("operator needs at least one node".into()));
        }
        if let Some((i, &g)) = damping.iter().enumerate().find(|(_, g)| !(**g >= 0.0)) {
            return Err(Error::InvalidArgument(format!("damping[{i}] = {g} is not >= 0")));
        }
        Ok(BlockOperator { damping, inv_h2 })
    }

    /// `N - 1`.
    pub fn n_interior(&self) -> usize {
        self.damping.len()
    }

    /// Length of state vectors, `2(N - 1)`.
    pub fn dim(&self) -> usize {
        2 * self.damping.len()
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn inv_h2(&self) -> f64 {
        self.inv_h2
    }

    /// `out = A u` with `A = tridiag(1, -2, 1)`.
    pub fn apply_laplacian(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            out[i] = left - 2.0 * u[i] + right;
        }
    }

    /// `out = M v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.n_interior();
        if v.len() != 2 * m || out.len() != 2 * m {
            return Err(Error::DimensionMismatch {
                expected: 2 * m,
                got: if v.len() != 2 * m { v.len() } else { out.len() },
            });
        }
        let (u, w) = v.split_at(m);
        let (out_u, out_w) = out.split_at_mut(m);
        out_u.copy_from_slice(w);
        self.apply_laplacian(u, out_w);
        for i in 0..m {
            out_w[i] = self.inv_h2 * out_w[i] - self.damping[i] * w[i];
        }
        Ok(())
    }

    /// Dense `A` of size `(N-1) x (N-1)`.
    pub fn laplacian_dense(&self) -> DMatrix<f64> {
        let n = self.n_interior();
        DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => -2.0,
            1 => 1.0,
            _ => 0.0,
        })
    }

    /// Densified `M`, for validation and the matrix-exponential oracle.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_interior();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        let a = self.laplacian_dense();
        for i in 0..n {
            m[(i, n + i)] = 1.0;
            for j in 0..n {
                m[(n + i, j)] = self.inv_h2 * a[(i, j)];
            }
            m[(n + i, n + i)] = -self.damping[i];
        }
        m
    }
}

/// Samples `gamma` at the interior nodes; rejects negative damping.
pub fn assemble_system(grid: &SpatialGrid, problem: &DampedWaveProblem) -> Result<BlockOperator> {
    let mut damping = Vec::with_capacity(grid.n_interior());
    for &x in grid.interior_nodes() {
        let value = problem.gamma(x)?;
        if value < 0.0 {
            return Err(Error::NegativeDamping { x, value });
        }
        damping.push(value);
    }
    Ok(BlockOperator {
        damping,
        inv_h2: 1.0 / (grid.h() * grid.h()),
    })
}

/// `max gamma` over all grid nodes, endpoints included.
pub fn gamma_star(grid: &SpatialGrid, problem: &DampedWaveProblem) -> Result<f64> {
    let mut max = 0.0f64;
    for x in grid.all_nodes() {
        max = max.max(problem.gamma(x)?);
    }
    Ok(max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingVector {
    pub t: f64,
    /// `[0; G(t) + B(t)/h^2]`, length `2(N-1)`.
    pub values: Vec<f64>,
}

impl ForcingVector {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

pub fn forcing_vector(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    t: f64,
) -> Result<ForcingVector> {
    let m = grid.n_interior();
    let mut values = vec![0.0; 2 * m];
    let second = &mut values[m..];
    for (slot, &x) in second.iter_mut().zip(grid.interior_nodes()) {
        *slot = problem.g(x, t)?;
    }
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    second[0] += inv_h2 * problem.u_a(t)?;
    second[m - 1] += inv_h2 * problem.u_b(t)?;
    Ok(ForcingVector { t, values })
}

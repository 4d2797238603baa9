//! Linear solves against `I - P`, where `P` is the interior-to-interior
//! quarter-step transition matrix. `P` is symmetric and strictly
//! substochastic on every component (each finite component touches the
//! absorbing layer), so `I - P` is symmetric positive definite and the
//! visit-count Green matrix `G = (I - P)^{-1}` exists for any model,
//! connected or not.

use nalgebra::{DMatrix, DVector};

use super::{LatticeError, LatticeModel, Neighbor};

/// Models up to this many interior vertices use one dense factorization;
/// larger systems switch to matrix-free conjugate gradients.
const DENSE_LIMIT: usize = 500;

/// Cap for assembling the full Green matrix; the result is dense, so the
/// quadratic memory and cubic factorization cost set a much lower practical
/// limit than the column solver's.
pub const MAX_GREEN_VERTICES: usize = 4_000;

/// Cap for single-column solves.
pub const MAX_COLUMN_VERTICES: usize = 20_000;

const CG_TOL: f64 = 1e-13;

/// `y = (I - P) x` without forming the matrix.
fn apply_system(model: &LatticeModel, x: &DVector<f64>, y: &mut DVector<f64>) {
    for i in 0..model.interior_count() {
        let mut acc = x[i];
        for nb in model.neighbors(i) {
            if let Neighbor::Interior(j) = nb {
                acc -= 0.25 * x[*j];
            }
        }
        y[i] = acc;
    }
}

fn dense_system(model: &LatticeModel) -> DMatrix<f64> {
    let n = model.interior_count();
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for nb in model.neighbors(i) {
            if let Neighbor::Interior(j) = nb {
                m[(i, *j)] -= 0.25;
            }
        }
    }
    m
}

fn cg_solve(model: &LatticeModel, b: &DVector<f64>) -> Result<DVector<f64>, LatticeError> {
    let n = model.interior_count();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = DVector::zeros(n);
    let mut rs = r.dot(&r);
    let target = CG_TOL * b.norm().max(1.0);
    if rs.sqrt() <= target {
        return Ok(x);
    }
    let max_iter = 20 * n + 200;
    for _ in 0..max_iter {
        apply_system(model, &p, &mut ap);
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            return Err(LatticeError::Solver("system lost positive definiteness".into()));
        }
        let alpha = rs / denom;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_new = r.dot(&r);
        if rs_new.sqrt() <= target {
            return Ok(x);
        }
        p.axpy(1.0, &r, rs_new / rs);
        rs = rs_new;
    }
    Err(LatticeError::Solver(format!("conjugate gradients stalled after {max_iter} iterations")))
}

/// Solves `(I - P) u = rhs` for one right-hand side, choosing dense or
/// matrix-free form by model size.
pub(super) fn solve_system(
    model: &LatticeModel,
    rhs: &DVector<f64>,
) -> Result<DVector<f64>, LatticeError> {
    let n = model.interior_count();
    if n > MAX_COLUMN_VERTICES {
        return Err(LatticeError::Config(format!(
            "solves capped at {MAX_COLUMN_VERTICES} interior vertices, got {n}"
        )));
    }
    if n <= DENSE_LIMIT {
        dense_system(model)
            .lu()
            .solve(rhs)
            .ok_or_else(|| LatticeError::Solver("dense factorization failed".into()))
    } else {
        cg_solve(model, rhs)
    }
}

/// Full visit-count Green matrix: `G(x, y)` is the expected number of
/// visits to `y` (the start counts as a visit) before absorption for the
/// walk started at `x`. Symmetric with strictly positive diagonal;
/// off-diagonal entries vanish exactly between different components.
pub fn discrete_green(model: &LatticeModel) -> Result<DMatrix<f64>, LatticeError> {
    let n = model.interior_count();
    if n > MAX_GREEN_VERTICES {
        return Err(LatticeError::Config(format!(
            "full Green matrix capped at {MAX_GREEN_VERTICES} interior vertices, got {n}; \
             use green_column for larger models"
        )));
    }
    dense_system(model)
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or_else(|| LatticeError::Solver("dense factorization failed".into()))
}

/// One column of the Green matrix: `green_column(m, y)[x] = G(x, y)`.
/// Scales to much larger models than the full matrix.
pub fn green_column(model: &LatticeModel, y: usize) -> Result<DVector<f64>, LatticeError> {
    let n = model.interior_count();
    if y >= n {
        return Err(LatticeError::Config(format!("vertex index {y} out of range {n}")));
    }
    let mut e = DVector::zeros(n);
    e[y] = 1.0;
    solve_system(model, &e)
}

/// Upper estimate of the spectral radius of `P`. Since `P` is symmetric its
/// spectral radius equals its operator norm, so every entry of `P^m` is
/// bounded by `rho^m`; the dynamic programs build their truncation bounds
/// on that. Power iteration runs on `P^2` (positive semidefinite, so the
/// Rayleigh quotient converges monotonically from below and bipartite sign
/// flips cancel); the result carries a small multiplicative safety margin.
pub fn spectral_radius(model: &LatticeModel) -> f64 {
    let n = model.interior_count();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut pv = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    let mut prev = 0.0f64;
    for iter in 0..20_000 {
        apply_p(model, &v, &mut pv);
        apply_p(model, &pv, &mut w);
        let lambda = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            // the walk dies out in finitely many steps (no interior cycle)
            return 0.0;
        }
        w.unscale_mut(norm);
        std::mem::swap(&mut v, &mut w);
        if iter > 10 && (lambda - prev).abs() <= 1e-14 * lambda.max(1e-300) {
            return (lambda.sqrt() * (1.0 + 1e-9) + 1e-12).min(1.0 - 1e-12);
        }
        prev = lambda;
    }
    (prev.sqrt() * (1.0 + 1e-6) + 1e-12).min(1.0 - 1e-12)
}

/// `y = P x`.
fn apply_p(model: &LatticeModel, x: &DVector<f64>, y: &mut DVector<f64>) {
    for i in 0..model.interior_count() {
        let mut acc = 0.0;
        for nb in model.neighbors(i) {
            if let Neighbor::Interior(j) = nb {
                acc += 0.25 * x[*j];
            }
        }
        y[i] = acc;
    }
}

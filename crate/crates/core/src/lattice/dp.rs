//! Path-sum dynamic programs over the lattice walk, with rigorous
//! truncation bounds derived from the spectral norm of the transition
//! matrix. These never consult the Green matrix, so their agreement with
//! the closed-form targets is a genuine two-sided check of both codes.
//!
//! Excursion side: the boundary-excursion measure puts weight `4^{-steps}`
//! on every path that starts at an absorbing vertex, immediately steps
//! inside, and ends at its first return to the absorbing layer. Summing
//! entry weights against the Green matrix shows the measure of paths
//! passing through a fixed interior vertex factorizes as
//! `(entry sum) G (exit sum)` with both outer sums exactly 1: the entry sum
//! is `sum_x G(y, x) bd(x)/4`, which is the total absorption probability
//! from `y`, and the exit sum is the same quantity by reversibility. Hence
//! the pair moment over disjoint vertex sets equals `2 sum_{A x B} G`.
//!
//! Loop side: rooted closed paths of length `L` carry weight `4^{-L}/L`,
//! which makes the measure rotation invariant (each unrooted loop once).
//! Decomposing the pair moment over the gap between the two marked times
//! gives `sum_{g=1}^{L-1} P^g(a,b) P^{L-g}(b,a)` per length, and summing
//! over `L` telescopes to `G(a,b)^2` for `a != b`.

use nalgebra::DMatrix;

use super::green::spectral_radius;
use super::{LatticeError, LatticeModel, Neighbor};

/// Truncated path-sum value together with its certified truncation bound.
#[derive(Clone, Copy, Debug)]
pub struct DpResult {
    pub value: f64,
    /// Upper bound on the mass discarded by stopping at `len_used`.
    pub tail_bound: f64,
    /// Path length at which the recursion stopped.
    pub len_used: usize,
}

/// `sum_{k>=1} rho^{k-1} (l+k)^2`, the polynomial-times-geometric series
/// behind the excursion tail bound.
fn poly_geom_tail(rho: f64, l: f64) -> f64 {
    let q = 1.0 - rho;
    (l + 1.0) * (l + 1.0) / q + 2.0 * (l + 1.0) * rho / (q * q) + rho * (1.0 + rho) / (q * q * q)
}

fn check_sets(model: &LatticeModel, a: &[usize], b: &[usize]) -> Result<(), LatticeError> {
    let n = model.interior_count();
    for &x in a.iter().chain(b) {
        if x >= n {
            return Err(LatticeError::Config(format!("vertex index {x} out of range {n}")));
        }
    }
    Ok(())
}

/// Pair occupation moment of the boundary-excursion measure: the measure of
/// `(visits to a) * (visits to b)` summed over `a` in `A`, `b` in `B`,
/// truncated at paths of `max_len` interior arrivals.
///
/// The recursion pushes four vectors through the walk: surviving mass and
/// the mass-weighted first and mixed visit counters. At absorption after
/// `j` arrivals each counter is at most `j`, and surviving mass after the
/// cutoff decays like the spectral norm, which yields the geometric tail
/// bound; an error is returned if the bound cannot be brought under
/// `tail_tol` within `max_len`.
pub fn dp_excursion_moment(
    model: &LatticeModel,
    a: &[usize],
    b: &[usize],
    max_len: usize,
    tail_tol: f64,
) -> Result<DpResult, LatticeError> {
    check_sets(model, a, b)?;
    if !(tail_tol > 0.0) {
        return Err(LatticeError::Config("tail tolerance must be positive".into()));
    }
    if max_len == 0 {
        return Err(LatticeError::Config("path cutoff must be positive".into()));
    }
    let n = model.interior_count();
    let mut in_a = vec![false; n];
    let mut in_b = vec![false; n];
    for &x in a {
        in_a[x] = true;
    }
    for &x in b {
        in_b[x] = true;
    }
    let rho = spectral_radius(model);
    let sqrt_n = (n as f64).sqrt();

    // m0: surviving mass at each vertex; ma/mb: mass-weighted visit counts
    // accumulated so far; mab: mass-weighted count products
    let mut m0: Vec<f64> = (0..n).map(|x| model.boundary_degree(x) as f64 / 4.0).collect();
    let mut ma = vec![0.0f64; n];
    let mut mb = vec![0.0f64; n];
    let mut mab = vec![0.0f64; n];
    let mut next = vec![vec![0.0f64; n]; 4];
    let mut value = 0.0;

    for len in 1..=max_len {
        // arrival update: a path arriving at x increments its counters by
        // the indicators of x, so the product gains old-counter cross terms
        for x in 0..n {
            let (fa, fb) = (in_a[x], in_b[x]);
            if fa && fb {
                mab[x] += ma[x] + mb[x] + m0[x];
                ma[x] += m0[x];
                mb[x] += m0[x];
            } else if fa {
                mab[x] += mb[x];
                ma[x] += m0[x];
            } else if fb {
                mab[x] += ma[x];
                mb[x] += m0[x];
            }
        }
        // absorption: paths exiting from x contribute their product counter
        let mut alive = 0.0;
        for x in 0..n {
            let exit = model.boundary_degree(x) as f64 / 4.0;
            if exit > 0.0 {
                value += mab[x] * exit;
            }
        }
        // propagate all four vectors one step through the interior
        for buf in &mut next {
            buf.iter_mut().for_each(|v| *v = 0.0);
        }
        for x in 0..n {
            for nb in model.neighbors(x) {
                if let Neighbor::Interior(y) = nb {
                    next[0][*y] += 0.25 * m0[x];
                    next[1][*y] += 0.25 * ma[x];
                    next[2][*y] += 0.25 * mb[x];
                    next[3][*y] += 0.25 * mab[x];
                }
            }
        }
        std::mem::swap(&mut m0, &mut next[0]);
        std::mem::swap(&mut ma, &mut next[1]);
        std::mem::swap(&mut mb, &mut next[2]);
        std::mem::swap(&mut mab, &mut next[3]);
        alive += m0.iter().sum::<f64>();

        // paths absorbed at arrival count len + k carry counters at most
        // (len + k)^2 and mass at most sqrt(n) rho^{k-1} alive
        let tail_bound = sqrt_n * alive * poly_geom_tail(rho, len as f64);
        if tail_bound <= tail_tol || alive == 0.0 {
            return Ok(DpResult { value, tail_bound: tail_bound.min(tail_tol), len_used: len });
        }
    }
    let alive = m0.iter().sum::<f64>();
    let bound = sqrt_n * alive * poly_geom_tail(rho, max_len as f64);
    Err(LatticeError::Tail { bound, tol: tail_tol })
}

/// Cap for the loop moment recursion, which carries dense matrices.
pub const MAX_LOOP_DP_VERTICES: usize = 500;

/// Pair occupation moment of the closed-walk measure (`4^{-L}/L` per rooted
/// loop of length `L`): the measure of `(visits to A) * (visits to B)`,
/// truncated at loops of `max_len` steps.
///
/// Per length the contribution is `sum_a sum_{g=1}^{L-1} (P^g D_B
/// P^{L-g})(a, a)`, maintained by one matrix recursion alongside the powers
/// of `P`. Every entry of `P^m` is bounded by `rho^m` (symmetry), so the
/// discarded lengths contribute at most `|A||B| sum_{L > cutoff} (L-1)
/// rho^L`, the certified tail.
pub fn dp_loop_moment(
    model: &LatticeModel,
    a: &[usize],
    b: &[usize],
    max_len: usize,
    tail_tol: f64,
) -> Result<DpResult, LatticeError> {
    check_sets(model, a, b)?;
    if !(tail_tol > 0.0) {
        return Err(LatticeError::Config("tail tolerance must be positive".into()));
    }
    if max_len < 2 {
        return Err(LatticeError::Config("loop cutoff must be at least 2".into()));
    }
    let n = model.interior_count();
    if n > MAX_LOOP_DP_VERTICES {
        return Err(LatticeError::Config(format!(
            "loop recursion capped at {MAX_LOOP_DP_VERTICES} interior vertices, got {n}"
        )));
    }
    let rho = spectral_radius(model);
    let pair_count = (a.len() * b.len()) as f64;

    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        for nb in model.neighbors(x) {
            if let Neighbor::Interior(y) = nb {
                p[(x, *y)] = 0.25;
            }
        }
    }
    // D_B P: transitions out of B only
    let mut db_p = p.clone();
    let mut in_b = vec![false; n];
    for &x in b {
        in_b[x] = true;
    }
    for x in 0..n {
        if !in_b[x] {
            db_p.row_mut(x).fill(0.0);
        }
    }

    let mut q = p.clone(); // P^{len-1} entering each iteration
    let mut v = DMatrix::zeros(n, n); // sum_{g=1}^{len-2} P^g D_B P^{len-1-g}
    let mut value = 0.0;
    for len in 2..=max_len {
        v = v * &p + &q * &db_p;
        for &x in a {
            value += v[(x, x)];
        }
        q *= &p;
        let l = len as f64;
        let geom = 1.0 - rho;
        let tail_bound = pair_count * rho.powi(len as i32 + 1) * (l / geom + rho / (geom * geom));
        if tail_bound <= tail_tol {
            return Ok(DpResult { value, tail_bound, len_used: len });
        }
    }
    let l = max_len as f64;
    let geom = 1.0 - rho;
    let bound = pair_count * rho.powi(max_len as i32 + 1) * (l / geom + rho / (geom * geom));
    Err(LatticeError::Tail { bound, tol: tail_tol })
}

/// Indicator sums of the Green matrix used as the closed-form targets.
pub fn green_pair_sum(g: &DMatrix<f64>, a: &[usize], b: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &x in a {
        for &y in b {
            acc += g[(x, y)];
        }
    }
    acc
}

/// `sum_{A x B} G^2`, the closed-walk pair target.
pub fn green_square_sum(g: &DMatrix<f64>, a: &[usize], b: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &x in a {
        for &y in b {
            acc += g[(x, y)] * g[(x, y)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::super::discrete_green;
    use super::*;

    fn block_4x4() -> LatticeModel {
        let cells: Vec<_> = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        LatticeModel::from_interior(0.2, &cells).unwrap()
    }

    #[test]
    fn excursion_dp_matches_the_green_factorization() {
        let model = block_4x4();
        let g = discrete_green(&model).unwrap();
        let x = model.index_of((0, 0)).unwrap();
        let y = model.index_of((3, 3)).unwrap();
        let got = dp_excursion_moment(&model, &[x], &[y], 5_000, 1e-10).unwrap();
        let want = 2.0 * g[(x, y)];
        assert!(got.tail_bound <= 1e-10);
        assert!(
            (got.value - want).abs() <= 1e-10 + got.tail_bound,
            "dp {} vs closed form {want}",
            got.value
        );
    }

    #[test]
    fn excursion_dp_is_additive_over_the_first_set() {
        let model = block_4x4();
        let g = discrete_green(&model).unwrap();
        let x1 = model.index_of((0, 0)).unwrap();
        let x2 = model.index_of((1, 2)).unwrap();
        let y = model.index_of((3, 0)).unwrap();
        let joined = dp_excursion_moment(&model, &[x1, x2], &[y], 5_000, 1e-10).unwrap();
        let want = 2.0 * (g[(x1, y)] + g[(x2, y)]);
        assert!((joined.value - want).abs() <= 1e-10 + joined.tail_bound);
    }

    #[test]
    fn excursion_dp_with_an_empty_set_is_zero() {
        let model = block_4x4();
        let x = model.index_of((2, 2)).unwrap();
        let got = dp_excursion_moment(&model, &[x], &[], 5_000, 1e-8).unwrap();
        assert_eq!(got.value, 0.0);
    }

    #[test]
    fn loop_dp_matches_the_squared_green_target() {
        let model = block_4x4();
        let g = discrete_green(&model).unwrap();
        let x = model.index_of((0, 1)).unwrap();
        let y = model.index_of((3, 2)).unwrap();
        let got = dp_loop_moment(&model, &[x], &[y], 2_000, 1e-10).unwrap();
        let want = g[(x, y)] * g[(x, y)];
        assert!(got.tail_bound <= 1e-10);
        assert!(
            (got.value - want).abs() <= 1e-10 + got.tail_bound,
            "dp {} vs closed form {want}",
            got.value
        );
    }

    #[test]
    fn loop_dp_handles_sets_with_several_vertices() {
        let model = block_4x4();
        let g = discrete_green(&model).unwrap();
        let a: Vec<_> = [(0, 0), (0, 1)].iter().map(|&c| model.index_of(c).unwrap()).collect();
        let b: Vec<_> = [(3, 3), (2, 3)].iter().map(|&c| model.index_of(c).unwrap()).collect();
        let got = dp_loop_moment(&model, &a, &b, 2_000, 1e-10).unwrap();
        let want = green_square_sum(&g, &a, &b);
        assert!((got.value - want).abs() <= 1e-10 + got.tail_bound);
    }

    #[test]
    fn loop_dp_vanishes_across_separated_components() {
        let model = LatticeModel::from_interior(0.1, &[(0, 0), (6, 6)]).unwrap();
        let got = dp_loop_moment(&model, &[0], &[1], 100, 1e-12).unwrap();
        assert_eq!(got.value, 0.0);
    }

    #[test]
    fn doubling_the_cutoff_stays_within_the_reported_tail() {
        let model = block_4x4();
        let x = model.index_of((1, 1)).unwrap();
        let y = model.index_of((2, 2)).unwrap();
        let coarse = dp_loop_moment(&model, &[x], &[y], 60, 1e-3).unwrap();
        let fine = dp_loop_moment(&model, &[x], &[y], 240, 1e-12).unwrap();
        assert!(fine.tail_bound < coarse.tail_bound);
        assert!(
            (fine.value - coarse.value).abs() <= coarse.tail_bound,
            "refinement moved the value {} -> {} beyond the bound {}",
            coarse.value,
            fine.value,
            coarse.tail_bound
        );

        let coarse_exc = dp_excursion_moment(&model, &[x], &[y], 100, 5e-2).unwrap();
        let fine_exc = dp_excursion_moment(&model, &[x], &[y], 5_000, 1e-10).unwrap();
        assert!((fine_exc.value - coarse_exc.value).abs() <= coarse_exc.tail_bound);
    }
}

//! Exact oracle on the square lattice: absorbed-walk Green matrices,
//! boundary-excursion and closed-walk dynamic programs with certified
//! truncation error, continuum calibration, and discrete Gaussian fields.
//!
//! Everything in this module is deterministic linear algebra (the one
//! exception is [`GffSampler`], which consumes a caller-provided RNG), so
//! it serves as the exactness reference the Monte Carlo layers are tested
//! against. The walk is the simple random walk: from an interior vertex it
//! moves to each of the four grid neighbours with probability `1/4` and is
//! absorbed the moment it lands on a non-interior vertex.

mod dp;
mod green;

pub use dp::{dp_excursion_moment, dp_loop_moment, green_pair_sum, green_square_sum, DpResult};
pub use green::{discrete_green, green_column, spectral_radius};

use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::analytic::green_disc;
use crate::geom::{Point, Region};

/// Integer grid coordinates of a lattice vertex; the physical position is
/// the coordinate pair scaled by the lattice spacing.
pub type Cell = (i32, i32);

/// What an interior vertex sees in one of the four grid directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    /// Another interior vertex, by interior index.
    Interior(usize),
    /// An absorbing boundary vertex, by boundary index.
    Boundary(usize),
}

#[derive(Debug, thiserror::Error)]
pub enum LatticeError {
    #[error("lattice config: {0}")]
    Config(String),
    #[error("interior vertex graph is disconnected")]
    Disconnected,
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("dp tail bound {bound:.3e} exceeds the requested tolerance {tol:.3e}")]
    Tail { bound: f64, tol: f64 },
}

/// Finite absorbed-walk model: an interior vertex set on the grid `h Z^2`
/// together with the absorbing boundary layer of adjacent outside vertices.
///
/// Every interior vertex has exactly four neighbours, each of which is
/// interior or boundary; the boundary carries no dynamics of its own.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    h: f64,
    sites: Vec<Cell>,
    index: HashMap<Cell, usize>,
    neighbors: Vec<[Neighbor; 4]>,
    boundary: Vec<Cell>,
    /// Number of absorbing neighbours per interior vertex (0..=4).
    boundary_degree: Vec<u8>,
}

const NEIGHBOR_OFFSETS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl LatticeModel {
    /// Discretization of the unit disc with spacing `1/n`: interior vertices
    /// are the grid points with `|v| < 1 - h`, decided in exact integer
    /// arithmetic (`i^2 + j^2 < (n-1)^2`). The interior must come out
    /// connected; for the disc it always does, but the invariant is checked.
    pub fn unit_disc(n: u32) -> Result<LatticeModel, LatticeError> {
        if !(2..=512).contains(&n) {
            return Err(LatticeError::Config(format!(
                "disc refinement {n} outside the supported range 2..=512"
            )));
        }
        let m = (n - 1) as i64;
        let mut cells = Vec::new();
        for i in -(m as i32)..=(m as i32) {
            for j in -(m as i32)..=(m as i32) {
                if (i as i64).pow(2) + (j as i64).pow(2) < m * m {
                    cells.push((i, j));
                }
            }
        }
        let model = LatticeModel::assemble(1.0 / n as f64, cells)?;
        if !model.is_connected() {
            return Err(LatticeError::Disconnected);
        }
        Ok(model)
    }

    /// Disc model from the grid spacing itself. The reciprocal must be an
    /// integer (up to rounding noise), since the construction is exact in
    /// lattice units.
    pub fn from_spacing(h: f64) -> Result<LatticeModel, LatticeError> {
        if !(h > 0.0 && h < 0.5) {
            return Err(LatticeError::Config(format!("spacing {h} outside (0, 0.5)")));
        }
        let n = (1.0 / h).round();
        if ((1.0 / h) - n).abs() > 1e-9 {
            return Err(LatticeError::Config(format!(
                "spacing {h} is not the reciprocal of an integer"
            )));
        }
        LatticeModel::unit_disc(n as u32)
    }

    /// Model over an explicit interior vertex set, for small hand-built
    /// scenarios. Disconnected interiors are permitted here: every finite
    /// component still touches the absorbing layer, so all solves below
    /// remain well posed; only the disc constructor enforces connectivity.
    pub fn from_interior(h: f64, cells: &[Cell]) -> Result<LatticeModel, LatticeError> {
        if !(h > 0.0 && h < 1.0) {
            return Err(LatticeError::Config(format!("spacing {h} outside (0, 1)")));
        }
        LatticeModel::assemble(h, cells.to_vec())
    }

    fn assemble(h: f64, mut cells: Vec<Cell>) -> Result<LatticeModel, LatticeError> {
        if cells.is_empty() {
            return Err(LatticeError::Config("interior vertex set is empty".into()));
        }
        cells.sort_unstable();
        if cells.windows(2).any(|w| w[0] == w[1]) {
            return Err(LatticeError::Config("duplicate interior vertex".into()));
        }
        let index: HashMap<Cell, usize> =
            cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut boundary = Vec::new();
        for &(i, j) in &cells {
            for (di, dj) in NEIGHBOR_OFFSETS {
                let nb = (i + di, j + dj);
                if !index.contains_key(&nb) {
                    boundary.push(nb);
                }
            }
        }
        boundary.sort_unstable();
        boundary.dedup();
        let boundary_index: HashMap<Cell, usize> =
            boundary.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut neighbors = Vec::with_capacity(cells.len());
        let mut boundary_degree = Vec::with_capacity(cells.len());
        for &(i, j) in &cells {
            let mut slots = [Neighbor::Boundary(0); 4];
            let mut deg = 0u8;
            for (s, (di, dj)) in NEIGHBOR_OFFSETS.into_iter().enumerate() {
                let nb = (i + di, j + dj);
                slots[s] = match index.get(&nb) {
                    Some(&k) => Neighbor::Interior(k),
                    None => {
                        deg += 1;
                        Neighbor::Boundary(boundary_index[&nb])
                    }
                };
            }
            neighbors.push(slots);
            boundary_degree.push(deg);
        }
        Ok(LatticeModel { h, sites: cells, index, neighbors, boundary, boundary_degree })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn interior_count(&self) -> usize {
        self.sites.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn interior_sites(&self) -> &[Cell] {
        &self.sites
    }

    pub fn boundary_sites(&self) -> &[Cell] {
        &self.boundary
    }

    pub fn neighbors(&self, idx: usize) -> &[Neighbor; 4] {
        &self.neighbors[idx]
    }

    /// Number of absorbing neighbours of interior vertex `idx`.
    pub fn boundary_degree(&self, idx: usize) -> u8 {
        self.boundary_degree[idx]
    }

    pub fn index_of(&self, cell: Cell) -> Option<usize> {
        self.index.get(&cell).copied()
    }

    pub fn position(&self, idx: usize) -> Point {
        let (i, j) = self.sites[idx];
        Point::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn boundary_position(&self, idx: usize) -> Point {
        let (i, j) = self.boundary[idx];
        Point::new(i as f64 * self.h, j as f64 * self.h)
    }

    /// Interior indices whose physical position lies in `region`.
    pub fn sites_in(&self, region: &Region) -> Vec<usize> {
        (0..self.sites.len()).filter(|&k| region.contains(self.position(k))).collect()
    }

    /// Whether the interior vertex graph is a single component.
    pub fn is_connected(&self) -> bool {
        let n = self.sites.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for nb in self.neighbors[x] {
                if let Neighbor::Interior(y) = nb {
                    if !seen[y] {
                        seen[y] = true;
                        count += 1;
                        stack.push(y);
                    }
                }
            }
        }
        count == n
    }

    /// Plain-text vertex listing for debugging: a header line with the
    /// counts, then one `i j kind` line per vertex in index order.
    pub fn dump_vertices(&self) -> String {
        let mut out = format!(
            "# lattice h={} interior={} boundary={}\n",
            self.h,
            self.sites.len(),
            self.boundary.len()
        );
        for &(i, j) in &self.sites {
            out.push_str(&format!("{i} {j} interior\n"));
        }
        for &(i, j) in &self.boundary {
            out.push_str(&format!("{i} {j} boundary\n"));
        }
        out
    }
}

/// Real-valued function on the interior vertices of a model, indexed like
/// `LatticeModel::interior_sites`.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    pub values: DVector<f64>,
}

/// Solves the discrete Dirichlet problem: the harmonic extension of the
/// boundary data `f` (evaluated at the physical positions of the absorbing
/// vertices) into the interior. Equivalently, the expected value of `f` at
/// the walk's absorption site, so the solution obeys the maximum principle
/// exactly: it stays inside the range of the boundary data up to solver
/// tolerance.
pub fn dirichlet_solve<F>(model: &LatticeModel, f: F) -> Result<DiscreteField, LatticeError>
where
    F: Fn(Point) -> f64,
{
    let n = model.interior_count();
    let mut rhs = DVector::zeros(n);
    for x in 0..n {
        let mut acc = 0.0;
        for nb in model.neighbors(x) {
            if let Neighbor::Boundary(b) = nb {
                acc += 0.25 * f(model.boundary_position(*b));
            }
        }
        rhs[x] = acc;
    }
    let values = green::solve_system(model, &rhs)?;
    Ok(DiscreteField { values })
}

/// Cap on the interior size for Gaussian field sampling; the covariance
/// factorization is dense, so memory and the cubic factorization cost set
/// the limit.
pub const MAX_GFF_VERTICES: usize = 4_000;

/// Draws centered Gaussian fields with covariance `G / (2 c_g)`, where `G`
/// is the visit-count Green matrix and `c_g` the lattice-to-continuum
/// normalization measured by [`calibrate_constants`]. The scaling makes the
/// field's covariance match `G_disc / c_g = G_cont` up to the conventional
/// factor `1/2` carried by the continuum field.
pub struct GffSampler {
    factor: nalgebra::DMatrix<f64>,
}

impl GffSampler {
    pub fn new(model: &LatticeModel, c_g: f64) -> Result<GffSampler, LatticeError> {
        if !(c_g > 0.0) {
            return Err(LatticeError::Config(format!("normalization {c_g} must be positive")));
        }
        if model.interior_count() > MAX_GFF_VERTICES {
            return Err(LatticeError::Config(format!(
                "field sampling capped at {MAX_GFF_VERTICES} interior vertices, got {}",
                model.interior_count()
            )));
        }
        let cov = discrete_green(model)? * (0.5 / c_g);
        let chol = nalgebra::Cholesky::new(cov).ok_or_else(|| {
            LatticeError::Solver("field covariance is not positive definite".into())
        })?;
        Ok(GffSampler { factor: chol.unpack() })
    }

    /// Covariance entry of the sampled field between interior indices.
    pub fn covariance(&self, x: usize, y: usize) -> f64 {
        let row_x = self.factor.row(x);
        let row_y = self.factor.row(y);
        row_x.iter().zip(row_y.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DiscreteField {
        let n = self.factor.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        DiscreteField { values: &self.factor * z }
    }
}

/// One refinement level of the calibration: the spacing and the measured
/// ratio of the lattice Green entry to the continuum one at each probe pair.
#[derive(Clone, Debug)]
pub struct CalibrationPoint {
    pub h: f64,
    pub ratios: Vec<f64>,
}

/// Result of matching the lattice model to its continuum limit.
#[derive(Clone, Debug)]
pub struct Calibration {
    /// Green normalization `G_disc ~ c_g G_cont`, extrapolated to `h -> 0`.
    pub c_g: f64,
    /// Extrapolation error estimate for `c_g` (Richardson consistency plus
    /// the spread across probe pairs).
    pub c_g_error: f64,
    /// Time-per-step scaling `dt = c_t h^2`, computed exactly from the
    /// per-coordinate variance of one walk step.
    pub c_t: f64,
    /// Whether the Green ratios approach the extrapolated constant
    /// monotonically as the spacing shrinks.
    pub residuals_monotone: bool,
    pub per_h: Vec<CalibrationPoint>,
}

/// Probe pairs used for the Green calibration, in physical coordinates.
/// Both coordinates land exactly on lattice vertices for every spacing used
/// here, so no interpolation enters the measurement.
const CALIBRATION_PAIRS: [(Point, Point); 2] = [
    (Point { x: 0.0, y: 0.0 }, Point { x: 0.5, y: 0.0 }),
    (Point { x: -0.25, y: 0.0 }, Point { x: 0.25, y: 0.0 }),
];

/// Measures the lattice-to-continuum constants on the disc models with
/// spacings 1/16, 1/32 and 1/64.
///
/// The Green ratio at each probe pair converges to `c_g` with a spacing
/// correction dominated by the staircase boundary, so consecutive
/// refinements are combined by Richardson extrapolation in `h`. The time
/// scaling needs no fit: one step moves a single coordinate by `±h` with
/// probability `1/2` each way, so the per-coordinate variance per step is
/// `h^2/2` and `c_t = 1/2` follows from the step law itself.
pub fn calibrate_constants() -> Result<Calibration, LatticeError> {
    let mut per_h = Vec::new();
    for n in [16u32, 32, 64] {
        let model = LatticeModel::unit_disc(n)?;
        let mut ratios = Vec::new();
        for (px, py) in CALIBRATION_PAIRS {
            let x = model
                .index_of(cell_at(px, n))
                .ok_or_else(|| LatticeError::Config("probe vertex outside interior".into()))?;
            let y = model
                .index_of(cell_at(py, n))
                .ok_or_else(|| LatticeError::Config("probe vertex outside interior".into()))?;
            let col = green_column(&model, y)?;
            let cont = green_disc(1.0, px, py)
                .map_err(|e| LatticeError::Config(format!("continuum reference: {e}")))?;
            ratios.push(col[x] / cont);
        }
        per_h.push(CalibrationPoint { h: 1.0 / n as f64, ratios });
    }

    let pairs = CALIBRATION_PAIRS.len();
    let mut extrapolated = Vec::with_capacity(pairs);
    let mut consistency = Vec::with_capacity(pairs);
    for j in 0..pairs {
        let r16 = per_h[0].ratios[j];
        let r32 = per_h[1].ratios[j];
        let r64 = per_h[2].ratios[j];
        // first-order Richardson on the two finest levels; the coarser pair
        // provides the consistency estimate
        extrapolated.push(2.0 * r64 - r32);
        consistency.push(((2.0 * r32 - r16) - (2.0 * r64 - r32)).abs());
    }
    let c_g = extrapolated.iter().sum::<f64>() / pairs as f64;
    let spread = extrapolated
        .iter()
        .map(|c| (c - c_g).abs())
        .fold(0.0f64, f64::max);
    let c_g_error = spread + consistency.iter().copied().fold(0.0f64, f64::max);

    let mut residuals_monotone = true;
    let residual = |point: &CalibrationPoint| {
        point
            .ratios
            .iter()
            .map(|r| (r - c_g).abs())
            .fold(0.0f64, f64::max)
    };
    for w in per_h.windows(2) {
        if residual(&w[1]) >= residual(&w[0]) {
            residuals_monotone = false;
        }
    }

    // per-coordinate second moment of one step, straight from the step law
    let h = per_h.last().expect("three levels").h;
    let steps = [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)];
    let c_t = steps.iter().map(|(dx, _)| 0.25 * dx * dx).sum::<f64>() / (h * h);

    Ok(Calibration { c_g, c_g_error, c_t, residuals_monotone, per_h })
}

fn cell_at(p: Point, n: u32) -> Cell {
    ((p.x * n as f64).round() as i32, (p.y * n as f64).round() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn disc_interior_vertices_resolve_all_four_directions() {
        let model = LatticeModel::unit_disc(12).unwrap();
        assert!(model.is_connected());
        for x in 0..model.interior_count() {
            let mut interior = 0;
            let mut absorbing = 0;
            for nb in model.neighbors(x) {
                match nb {
                    Neighbor::Interior(k) => {
                        assert!(*k < model.interior_count());
                        interior += 1;
                    }
                    Neighbor::Boundary(b) => {
                        assert!(*b < model.boundary_count());
                        absorbing += 1;
                    }
                }
            }
            assert_eq!(interior + absorbing, 4);
            assert_eq!(absorbing, model.boundary_degree(x) as usize);
        }
        for &cell in model.boundary_sites() {
            assert!(model.index_of(cell).is_none(), "boundary cell {cell:?} is interior");
        }
    }

    #[test]
    fn spacing_constructor_requires_an_integer_reciprocal() {
        assert!(LatticeModel::from_spacing(0.3).is_err());
        let a = LatticeModel::from_spacing(1.0 / 16.0).unwrap();
        let b = LatticeModel::unit_disc(16).unwrap();
        assert_eq!(a.interior_sites(), b.interior_sites());
    }

    #[test]
    fn duplicate_interior_cells_are_rejected() {
        assert!(LatticeModel::from_interior(0.1, &[(0, 0), (0, 0)]).is_err());
        assert!(LatticeModel::from_interior(0.1, &[]).is_err());
    }

    #[test]
    fn split_interiors_are_representable_but_not_connected() {
        let model = LatticeModel::from_interior(0.1, &[(0, 0), (5, 5)]).unwrap();
        assert!(!model.is_connected());
        assert_eq!(model.boundary_count(), 8);
    }

    #[test]
    fn vertex_dump_lists_every_site_once() {
        let model = LatticeModel::unit_disc(4).unwrap();
        let dump = model.dump_vertices();
        let interior_lines = dump.lines().filter(|l| l.ends_with("interior")).count();
        let boundary_lines = dump.lines().filter(|l| l.ends_with("boundary")).count();
        assert_eq!(interior_lines, model.interior_count());
        assert_eq!(boundary_lines, model.boundary_count());
        assert!(dump.starts_with("# lattice h=0.25"));
    }

    #[test]
    fn region_selection_matches_the_physical_positions() {
        let model = LatticeModel::unit_disc(8).unwrap();
        let region = Region::disc(0.0, 0.0, 0.3);
        let picked = model.sites_in(&region);
        for x in 0..model.interior_count() {
            let inside = model.position(x).norm() < 0.3;
            assert_eq!(inside, picked.contains(&x));
        }
        assert!(!picked.is_empty());
    }

    #[test]
    fn constant_boundary_data_extends_exactly() {
        let model = LatticeModel::unit_disc(10).unwrap();
        let u = dirichlet_solve(&model, |_| 1.0).unwrap();
        for x in 0..model.interior_count() {
            assert!((u.values[x] - 1.0).abs() < 1e-11, "u({x}) = {}", u.values[x]);
        }
    }

    #[test]
    fn coordinate_boundary_data_extends_exactly() {
        // the first coordinate is discretely harmonic, so the solve must
        // reproduce it to solver precision at every interior vertex
        let model = LatticeModel::unit_disc(9).unwrap();
        let u = dirichlet_solve(&model, |p| p.x).unwrap();
        for x in 0..model.interior_count() {
            let expect = model.position(x).x;
            assert!((u.values[x] - expect).abs() < 1e-11);
        }
    }

    #[test]
    fn maximum_principle_bounds_the_staircase_error() {
        // |z|^2 is 1 on the circle but only 1 + O(h) on the staircase
        // boundary; the interior solution must stay inside the boundary
        // range, giving an O(h) bound on the deviation from the continuum
        // harmonic extension (which is identically 1).
        let model = LatticeModel::unit_disc(16).unwrap();
        let u = dirichlet_solve(&model, |p| p.norm_sq()).unwrap();
        let boundary_dev = (0..model.boundary_count())
            .map(|b| (model.boundary_position(b).norm_sq() - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(boundary_dev <= 3.0 * model.spacing(), "staircase wider than O(h)");
        for x in 0..model.interior_count() {
            assert!((u.values[x] - 1.0).abs() <= boundary_dev + 1e-11);
        }
    }

    #[test]
    fn sampled_fields_reproduce_the_scaled_green_covariance() {
        let model = LatticeModel::unit_disc(6).unwrap();
        let c_g = 2.0;
        let sampler = GffSampler::new(&model, c_g).unwrap();
        let x = model.index_of((0, 0)).unwrap();
        let y = model.index_of((2, 0)).unwrap();
        let g = discrete_green(&model).unwrap();
        let want_xx = 0.5 * g[(x, x)] / c_g;
        let want_xy = 0.5 * g[(x, y)] / c_g;
        assert!((sampler.covariance(x, x) - want_xx).abs() < 1e-10);
        assert!((sampler.covariance(x, y) - want_xy).abs() < 1e-10);

        let mut rng = RngStream { seed: 401, stream: 0 }.rng();
        let n_draws = 40_000;
        let mut sum_x = 0.0;
        let mut sum_xx = 0.0;
        let mut sum_xy = 0.0;
        for _ in 0..n_draws {
            let f = sampler.sample(&mut rng);
            sum_x += f.values[x];
            sum_xx += f.values[x] * f.values[x];
            sum_xy += f.values[x] * f.values[y];
        }
        let n = n_draws as f64;
        let mean_x = sum_x / n;
        let var_x = sum_xx / n - mean_x * mean_x;
        let cov_xy = sum_xy / n;
        // second-moment estimates have relative error ~ sqrt(2/n) = 0.7%,
        // so 3% is a > 4 sigma allowance
        assert!((var_x - want_xx).abs() < 0.03 * want_xx, "var {var_x} vs {want_xx}");
        assert!((cov_xy - want_xy).abs() < 0.03 * want_xx, "cov {cov_xy} vs {want_xy}");
        assert!(mean_x.abs() < 4.0 * (want_xx / n).sqrt());
    }

    #[test]
    fn calibration_recovers_the_continuum_normalization() {
        let cal = calibrate_constants().unwrap();
        assert_eq!(cal.c_t, 0.5, "step law variance is exactly h^2/2");
        assert!(
            (cal.c_g - 2.0).abs() < 0.05,
            "extrapolated normalization {} (error estimate {})",
            cal.c_g,
            cal.c_g_error
        );
        assert!((cal.c_g - 2.0).abs() <= cal.c_g_error + 0.02);
        assert!(cal.residuals_monotone, "ratios should approach the limit monotonically");
        assert_eq!(cal.per_h.len(), 3);
        for point in &cal.per_h {
            for r in &point.ratios {
                assert!(*r > 1.5 && *r < 2.5, "raw ratio {r} far from the limit");
            }
        }
    }
}

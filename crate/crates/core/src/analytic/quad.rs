//! Area quadrature over regions and region pairs against powers of the
//! disc Green's function.
//!
//! The double integrals that serve as verification targets,
//!
//!   int_{A x B} G(x, y)^p dx dy,
//!
//! are computed by a tensor midpoint rule over region-native cells (ring
//! sectors in (rho^2, theta) coordinates for discs, quadrants for
//! rectangles; both have exact areas, so region boundaries cost nothing).
//! Cell pairs closer than `near_factor` times their summed diameters are
//! subdivided dyadically; at the bottom scale the remaining nearly-diagonal
//! pairs are closed with a local equal-area-disc model of the logarithmic
//! kernel. Resolution doubles per level and Richardson extrapolation of the
//! midpoint rule supplies both the returned value and its error estimate.

use super::{AnalyticError, Result};
use crate::geom::{Density, Point, Region};
use once_cell::sync::Lazy;
use std::f64::consts::PI;

/// Controls for the area quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Rings (disc) or cells per axis (rectangle) at the coarsest level.
    pub base_resolution: usize,
    /// Number of resolution doublings attempted before giving up.
    pub max_levels: usize,
    /// Relative tolerance on the extrapolated value.
    pub tol: f64,
    /// Extra dyadic levels below the base grid spent on nearly-singular
    /// cell pairs; the smallest resolved scale is the base cell size times
    /// 2^-singular_depth.
    pub singular_depth: u32,
    /// Cell pairs with center distance below `near_factor * (diam_a +
    /// diam_b)` are subdivided instead of evaluated at midpoints.
    pub near_factor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            base_resolution: 12,
            max_levels: 4,
            tol: 1e-6,
            singular_depth: 5,
            near_factor: 2.0,
        }
    }
}

impl QuadratureSpec {
    /// Preset for integrals whose domain pairs overlap: the log singularity
    /// caps the practical accuracy, so the tolerance is relaxed.
    pub fn singular() -> Self {
        QuadratureSpec {
            tol: 2e-4,
            ..Default::default()
        }
    }
}

/// A quadrature value with the error estimate from its final refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// One integration cell: exact area, a midpoint node, and a diameter bound.
#[derive(Debug, Clone, Copy)]
enum Cell {
    /// Ring sector of the disc centered at `center`, in u = rho^2 and theta.
    Polar {
        center: Point,
        u0: f64,
        u1: f64,
        t0: f64,
        t1: f64,
    },
    Rect {
        lo: Point,
        hi: Point,
    },
}

impl Cell {
    fn area(&self) -> f64 {
        match *self {
            Cell::Polar { u0, u1, t0, t1, .. } => 0.5 * (u1 - u0) * (t1 - t0),
            Cell::Rect { lo, hi } => (hi.x - lo.x) * (hi.y - lo.y),
        }
    }

    fn node(&self) -> Point {
        match *self {
            Cell::Polar { center, u0, u1, t0, t1 } => {
                let rho = (0.5 * (u0 + u1)).sqrt();
                center + Point::polar(rho, 0.5 * (t0 + t1))
            }
            Cell::Rect { lo, hi } => Point::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)),
        }
    }

    fn diam(&self) -> f64 {
        match *self {
            Cell::Polar { u0, u1, t0, t1, .. } => {
                let r1 = u1.sqrt();
                let dr = r1 - u0.sqrt();
                let arc = r1 * (t1 - t0);
                dr.hypot(arc)
            }
            Cell::Rect { lo, hi } => (hi.x - lo.x).hypot(hi.y - lo.y),
        }
    }

    fn subdivide(&self) -> [Cell; 4] {
        match *self {
            Cell::Polar { center, u0, u1, t0, t1 } => {
                let um = 0.5 * (u0 + u1);
                let tm = 0.5 * (t0 + t1);
                [
                    Cell::Polar { center, u0, u1: um, t0, t1: tm },
                    Cell::Polar { center, u0, u1: um, t0: tm, t1 },
                    Cell::Polar { center, u0: um, u1, t0, t1: tm },
                    Cell::Polar { center, u0: um, u1, t0: tm, t1 },
                ]
            }
            Cell::Rect { lo, hi } => {
                let m = Point::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
                [
                    Cell::Rect { lo, hi: m },
                    Cell::Rect { lo: Point::new(m.x, lo.y), hi: Point::new(hi.x, m.y) },
                    Cell::Rect { lo: Point::new(lo.x, m.y), hi: Point::new(m.x, hi.y) },
                    Cell::Rect { lo: m, hi },
                ]
            }
        }
    }
}

/// Base cell grid at `n` radial rings / cells per axis.
fn region_cells(region: &Region, n: usize) -> Vec<Cell> {
    match *region {
        Region::Disc { center, radius } => {
            // rings linear in radius so every cell has comparable linear
            // size; areas stay exact because cells live in (rho^2, theta)
            let n_theta = 4 * n;
            let dt = 2.0 * PI / n_theta as f64;
            let mut cells = Vec::with_capacity(n * n_theta);
            for i in 0..n {
                let r0 = radius * i as f64 / n as f64;
                let r1 = radius * (i + 1) as f64 / n as f64;
                for j in 0..n_theta {
                    cells.push(Cell::Polar {
                        center,
                        u0: r0 * r0,
                        u1: r1 * r1,
                        t0: dt * j as f64,
                        t1: dt * (j + 1) as f64,
                    });
                }
            }
            cells
        }
        Region::Rect { lo, hi } => {
            let dx = (hi.x - lo.x) / n as f64;
            let dy = (hi.y - lo.y) / n as f64;
            let mut cells = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    cells.push(Cell::Rect {
                        lo: Point::new(lo.x + dx * i as f64, lo.y + dy * j as f64),
                        hi: Point::new(lo.x + dx * (i + 1) as f64, lo.y + dy * (j + 1) as f64),
                    });
                }
            }
            cells
        }
    }
}

/// Green's function of the unit disc without domain checks; callers
/// guarantee interior, distinct points.
#[inline]
fn g_unit(x: Point, y: Point) -> f64 {
    let sep = x.dist(y);
    let cross = (Point::new(1.0, 0.0) - x.cmul(y.conj())).norm();
    -(sep / cross).ln() / PI
}

/// Smooth part of the Green's function: G = -(1/pi) ln|x-y| + smooth(x, y).
#[inline]
fn g_smooth_part(x: Point, y: Point) -> f64 {
    (Point::new(1.0, 0.0) - x.cmul(y.conj())).norm().ln() / PI
}

/// Moments M_k = E[(ln |x - y|)^k] for x, y independent uniform in the unit
/// disc, k = 0..=6. M_1 = -1/4 exactly; the rest come from the pair-distance
/// density f(s) = (2 s / pi) (2 acos(s/2) - (s/2) sqrt(4 - s^2)), the radial
/// form of the self-convolution of the uniform disc density.
static LOG_MOMENTS: Lazy<[f64; 7]> = Lazy::new(|| {
    let density = |s: f64| -> f64 {
        (2.0 * s / PI) * (2.0 * (s / 2.0).acos() - 0.5 * s * (4.0 - s * s).sqrt())
    };
    let mut m = [0.0; 7];
    for (k, slot) in m.iter_mut().enumerate() {
        // graded toward both endpoints: ln s at 0, a (2-s)^{3/2} cusp at 2
        let f = |s: f64| {
            if s <= 0.0 || s >= 2.0 {
                0.0
            } else {
                s.ln().powi(k as i32) * density(s)
            }
        };
        *slot = super::quad1d::gauss_graded_left(32, 0.0, 1.0, 60, f)
            + super::quad1d::gauss_graded_right(32, 1.0, 2.0, 60, f);
    }
    m
});

/// E[(ln(r |x - y|))^k] for a same-cell pair modeled as one disc of radius r.
fn same_cell_log_moment(k: usize, r: f64) -> f64 {
    let lr = r.ln();
    let mut sum = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        // binom(k, j) lr^{k-j} M_j
        sum += binom * lr.powi((k - j) as i32) * LOG_MOMENTS[j];
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    sum
}

const BINOM: [[f64; 7]; 7] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0, 0.0, 0.0],
    [1.0, 5.0, 10.0, 10.0, 5.0, 1.0, 0.0],
    [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0],
];

/// Contribution of a bottom-scale cell pair that the subdivision could not
/// separate. The logarithmic factor is averaged exactly under an equal-area
/// disc model of the cells; the smooth factor is frozen at the nodes.
fn near_pair_base_case(a: &NearCell, b: &NearCell, p: usize) -> f64 {
    let (na, nb) = (Point::new(a.nx, a.ny), Point::new(b.nx, b.ny));
    let (wa, wb) = (a.area, b.area);
    let s = g_smooth_part(na, nb);
    let ra = a.req;
    let rb = b.req;
    let d = na.dist(nb);
    // e^{-1/4} matches the identical-disc mean of ln|x-y| in the limit d->0.
    let d_floor = (-0.25f64).exp() * (ra + rb) * 0.5;
    let same = d < 1e-9 * (ra + rb);
    if p == 1 {
        let mean_log = if same {
            (0.5 * (ra + rb)).ln() + LOG_MOMENTS[1]
        } else {
            d.max(d_floor).ln()
        };
        return wa * wb * (-mean_log / PI + s);
    }
    let mut total = 0.0;
    for k in 0..=p {
        let log_moment = if same {
            same_cell_log_moment(k, 0.5 * (ra + rb))
        } else {
            d.max(d_floor).ln().powi(k as i32)
        };
        total += BINOM[p][k] * (-1.0 / PI).powi(k as i32) * log_moment * s.powi((p - k) as i32);
    }
    total * wa * wb
}

/// A cell with its derived geometry cached, so the subdivision loop never
/// recomputes square roots on a revisit.
#[derive(Clone, Copy)]
struct NearCell {
    cell: Cell,
    nx: f64,
    ny: f64,
    area: f64,
    diam: f64,
    /// radius of the equal-area model disc
    req: f64,
}

impl NearCell {
    fn of(cell: Cell) -> Self {
        let node = cell.node();
        let area = cell.area();
        NearCell {
            cell,
            nx: node.x,
            ny: node.y,
            area,
            diam: cell.diam(),
            req: (area / PI).sqrt(),
        }
    }
}

/// Green's function power term for a far pair, written on squared distances
/// so no square root is taken.
#[inline]
fn far_term_sq(d2: f64, cross2: f64, p: i32) -> f64 {
    (-0.5 * (d2 / cross2).ln() / PI).powi(p)
}

/// Drains a stack of near cell pairs, subdividing while a pair is close
/// relative to its own size and the area floor allows.
///
/// The floor is on cell area rather than diameter: sectors touching a disc
/// center stay long after many angular splits, but their mass shrinks
/// geometrically, which is what bounds both the work and the model error.
fn drain_near_pairs(
    stack: &mut Vec<(NearCell, NearCell, u32)>,
    p: usize,
    spec: &QuadratureSpec,
    floor_area: f64,
) -> f64 {
    let pw = p as i32;
    let mut total = 0.0;
    while let Some((a, b, depth)) = stack.pop() {
        let dx = a.nx - b.nx;
        let dy = a.ny - b.ny;
        let d2 = dx * dx + dy * dy;
        let thr = spec.near_factor * 0.5 * (a.diam + b.diam);
        if d2 >= thr * thr {
            let cx = 1.0 - (a.nx * b.nx + a.ny * b.ny);
            let cy = a.nx * b.ny - a.ny * b.nx;
            total += a.area * b.area * far_term_sq(d2, cx * cx + cy * cy, pw);
            continue;
        }
        // ln|x-y| is harmonic away from the diagonal, so its average over a
        // pair of disjoint model discs is the log of the center distance
        // exactly; once the model discs separate with a margin the local
        // model is at least as accurate as further midpoint refinement.
        let margin = 1.5 * (a.req + b.req);
        let deep_a = a.area <= floor_area;
        let deep_b = b.area <= floor_area;
        if depth >= 64 || (deep_a && deep_b) || d2 >= margin * margin {
            total += near_pair_base_case(&a, &b, p);
        } else if !deep_a && !deep_b {
            // both cells still coarse: refine the pair in one step
            let ka = a.cell.subdivide().map(NearCell::of);
            let kb = b.cell.subdivide().map(NearCell::of);
            for ca in &ka {
                for cb in &kb {
                    stack.push((*ca, *cb, depth + 1));
                }
            }
        } else if deep_b {
            for child in a.cell.subdivide() {
                stack.push((NearCell::of(child), b, depth + 1));
            }
        } else {
            for child in b.cell.subdivide() {
                stack.push((a, NearCell::of(child), depth + 1));
            }
        }
    }
    total
}

/// Flat per-cell geometry so the quadratic far-pair loop stays tight.
struct CellArrays {
    cells: Vec<Cell>,
    x: Vec<f64>,
    y: Vec<f64>,
    area: Vec<f64>,
    diam: Vec<f64>,
}

impl CellArrays {
    fn build(region: &Region, n: usize) -> Self {
        let cells = region_cells(region, n);
        let nodes: Vec<Point> = cells.iter().map(|c| c.node()).collect();
        CellArrays {
            x: nodes.iter().map(|p| p.x).collect(),
            y: nodes.iter().map(|p| p.y).collect(),
            area: cells.iter().map(|c| c.area()).collect(),
            diam: cells.iter().map(|c| c.diam()).collect(),
            cells,
        }
    }
}

/// Far-pair contribution of (i, j) with the Green's function inlined in
/// terms of the flat arrays; squared norms only, so no square root.
#[inline]
fn far_pair_term(a: &CellArrays, i: usize, b: &CellArrays, j: usize, p: i32) -> f64 {
    let dx = a.x[i] - b.x[j];
    let dy = a.y[i] - b.y[j];
    let d2 = dx * dx + dy * dy;
    // |1 - x conj(y)|^2
    let cx = 1.0 - (a.x[i] * b.x[j] + a.y[i] * b.y[j]);
    let cy = a.x[i] * b.y[j] - a.y[i] * b.x[j];
    a.area[i] * b.area[j] * far_term_sq(d2, cx * cx + cy * cy, p)
}

fn check_region_in_disc(r: &Region) -> Result<()> {
    if r.outer_radius() > 1.0 + 1e-12 {
        return Err(AnalyticError::Domain(format!(
            "region escapes the unit disc (outer radius {})",
            r.outer_radius()
        )));
    }
    match *r {
        Region::Disc { radius, .. } if radius < 0.0 => Err(AnalyticError::Domain(
            "disc region needs a nonnegative radius".into(),
        )),
        _ => Ok(()),
    }
}

/// Typical linear size of a base cell for a region at the coarse level.
fn base_cell_scale(region: &Region, n: usize) -> f64 {
    match *region {
        Region::Disc { radius, .. } => radius / n as f64,
        Region::Rect { lo, hi } => ((hi.x - lo.x).max(hi.y - lo.y)) / n as f64,
    }
}

fn double_sum(a: &Region, b: &Region, p: usize, spec: &QuadratureSpec, n: usize) -> f64 {
    let scale_floor = (base_cell_scale(a, spec.base_resolution)
        .min(base_cell_scale(b, spec.base_resolution)))
        / 2f64.powi(spec.singular_depth as i32);
    let floor_area = scale_floor * scale_floor;
    let pw = p as i32;
    let ca = CellArrays::build(a, n);
    let mut near: Vec<(NearCell, NearCell, u32)> = Vec::new();
    let mut total = 0.0;
    if a == b {
        // exploit symmetry of the integrand: off-diagonal pairs count twice
        for i in 0..ca.cells.len() {
            near.push((NearCell::of(ca.cells[i]), NearCell::of(ca.cells[i]), 0));
            total += drain_near_pairs(&mut near, p, spec, floor_area);
            let mut row = 0.0;
            for j in (i + 1)..ca.cells.len() {
                let dx = ca.x[i] - ca.x[j];
                let dy = ca.y[i] - ca.y[j];
                let thr = spec.near_factor * 0.5 * (ca.diam[i] + ca.diam[j]);
                if dx * dx + dy * dy >= thr * thr {
                    row += far_pair_term(&ca, i, &ca, j, pw);
                } else {
                    near.push((NearCell::of(ca.cells[i]), NearCell::of(ca.cells[j]), 0));
                }
            }
            total += 2.0 * (row + drain_near_pairs(&mut near, p, spec, floor_area));
        }
    } else {
        let cb = CellArrays::build(b, n);
        for i in 0..ca.cells.len() {
            for j in 0..cb.cells.len() {
                let dx = ca.x[i] - cb.x[j];
                let dy = ca.y[i] - cb.y[j];
                let thr = spec.near_factor * 0.5 * (ca.diam[i] + cb.diam[j]);
                if dx * dx + dy * dy >= thr * thr {
                    total += far_pair_term(&ca, i, &cb, j, pw);
                } else {
                    near.push((NearCell::of(ca.cells[i]), NearCell::of(cb.cells[j]), 0));
                }
            }
            total += drain_near_pairs(&mut near, p, spec, floor_area);
        }
    }
    total
}

/// Run a level-doubling iteration with Richardson extrapolation until two
/// consecutive extrapolated values agree to `spec.tol` relative.
fn refine_to_tolerance<F: FnMut(usize) -> f64>(spec: &QuadratureSpec, mut eval: F) -> Result<QuadResult> {
    let mut raw_prev = f64::NAN;
    let mut extrap_prev = f64::NAN;
    for level in 0..spec.max_levels.max(2) {
        let n = spec.base_resolution << level;
        let raw = eval(n);
        if level >= 1 {
            let extrap = raw + (raw - raw_prev) / 3.0;
            let err = if level == 1 {
                (raw - raw_prev).abs() / 3.0
            } else {
                (extrap - extrap_prev).abs()
            };
            let scale = extrap.abs().max(1e-300);
            if err <= spec.tol * scale {
                return Ok(QuadResult {
                    value: extrap,
                    error_estimate: err,
                });
            }
            extrap_prev = extrap;
        }
        raw_prev = raw;
    }
    Err(AnalyticError::Precision {
        last: extrap_prev,
        previous: raw_prev,
        error_estimate: (extrap_prev - raw_prev).abs(),
    })
}

/// int_{A x B} G(x, y)^p dx dy over the unit disc, 1 <= p <= 6.
///
/// Overlapping or touching region pairs are admitted; the near-diagonal
/// subdivision then carries the log^p singularity. Zero-area regions give 0.
pub fn quad_green_power(a: &Region, b: &Region, p: usize, spec: &QuadratureSpec) -> Result<QuadResult> {
    if p == 0 || p > 6 {
        return Err(AnalyticError::Domain(format!("power p must be in 1..=6, got {p}")));
    }
    check_region_in_disc(a)?;
    check_region_in_disc(b)?;
    if a.area() == 0.0 || b.area() == 0.0 {
        return Ok(QuadResult { value: 0.0, error_estimate: 0.0 });
    }
    refine_to_tolerance(spec, |n| double_sum(a, b, p, spec, n))
}

/// Chained integral over a list of pairwise-consecutive disjoint regions:
///
///   int_{A_1 x ... x A_p} G(x_1, x_2) G(x_2, x_3) ... G(x_{p-1}, x_p) dx.
///
/// Evaluated by midpoint tensor grids with the product factorized into
/// successive kernel applications, so the cost is quadratic per adjacent
/// pair rather than exponential in p.
pub fn quad_green_chain(regions: &[Region], spec: &QuadratureSpec) -> Result<QuadResult> {
    if regions.len() < 2 {
        return Err(AnalyticError::Config(
            "green chain needs at least two regions".into(),
        ));
    }
    for r in regions {
        check_region_in_disc(r)?;
        if r.area() == 0.0 {
            return Ok(QuadResult { value: 0.0, error_estimate: 0.0 });
        }
    }
    for w in regions.windows(2) {
        if w[0].separation(&w[1]) < 1e-3 {
            return Err(AnalyticError::Config(
                "consecutive chain regions must be separated by at least 1e-3".into(),
            ));
        }
    }
    refine_to_tolerance(spec, |n| {
        let grids: Vec<Vec<Cell>> = regions.iter().map(|r| region_cells(r, n)).collect();
        // forward accumulation: a_{k+1}(y) = w(y) sum_x a_k(x) G(x, y)
        let mut acc: Vec<f64> = grids[0].iter().map(|c| c.area()).collect();
        for k in 1..grids.len() {
            let prev_nodes: Vec<Point> = grids[k - 1].iter().map(|c| c.node()).collect();
            let mut next = vec![0.0; grids[k].len()];
            for (j, cell) in grids[k].iter().enumerate() {
                let y = cell.node();
                let mut s = 0.0;
                for (i, &x) in prev_nodes.iter().enumerate() {
                    s += acc[i] * g_unit(x, y);
                }
                next[j] = s * cell.area();
            }
            acc = next;
        }
        acc.iter().sum()
    })
}

/// Integral of a scalar field over a region by the same midpoint/Richardson
/// machinery (no singularity handling; the integrand must be smooth).
pub fn integrate_over_region<F: Fn(Point) -> f64>(
    region: &Region,
    spec: &QuadratureSpec,
    f: F,
) -> Result<QuadResult> {
    check_region_in_disc(region)?;
    if region.area() == 0.0 {
        return Ok(QuadResult { value: 0.0, error_estimate: 0.0 });
    }
    refine_to_tolerance(spec, |n| {
        region_cells(region, n)
            .iter()
            .map(|c| c.area() * f(c.node()))
            .sum()
    })
}

/// Covariance form of the occupation field against two region-weighted
/// densities:
///
///   (1/2) int int G(x, y) rho1(x) rho2(y) dx dy,
///
/// expanded over the density terms. Pairs that overlap or touch are routed
/// through the singular preset automatically.
pub fn gff_covariance(rho1: &Density, rho2: &Density, spec: &QuadratureSpec) -> Result<QuadResult> {
    let mut value = 0.0;
    let mut err = 0.0;
    for (ra, ca) in &rho1.terms {
        for (rb, cb) in &rho2.terms {
            if ca.abs() == 0.0 || cb.abs() == 0.0 {
                continue;
            }
            let pair_spec = if ra.separation(rb) >= 1e-3 {
                *spec
            } else {
                QuadratureSpec {
                    tol: spec.tol.max(QuadratureSpec::singular().tol),
                    ..*spec
                }
            };
            let q = quad_green_power(ra, rb, 1, &pair_spec)?;
            value += ca * cb * q.value;
            err += (ca * cb).abs() * q.error_estimate;
        }
    }
    Ok(QuadResult {
        value: 0.5 * value,
        error_estimate: 0.5 * err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_moment_density_normalizes() {
        assert_relative_eq!(LOG_MOMENTS[0], 1.0, epsilon = 1e-10);
        // E[ln|x-y|] over the unit disc is exactly -1/4.
        assert_relative_eq!(LOG_MOMENTS[1], -0.25, epsilon = 1e-10);
    }

    #[test]
    fn zero_area_region_gives_zero() {
        let a = Region::disc(0.1, 0.0, 0.0);
        let b = Region::disc(-0.3, 0.0, 0.2);
        let q = quad_green_power(&a, &b, 1, &QuadratureSpec::default()).unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn rejects_escaping_region_and_bad_power() {
        let a = Region::disc(0.8, 0.0, 0.3);
        let b = Region::disc(0.0, 0.0, 0.2);
        assert!(quad_green_power(&a, &b, 1, &QuadratureSpec::default()).is_err());
        let a = Region::disc(0.0, 0.0, 0.2);
        assert!(quad_green_power(&a, &b, 7, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn disjoint_pair_first_order_magnitude() {
        // Coarse sanity: small well-separated discs see an almost constant
        // kernel, so the integral is close to |A| |B| G(centers).
        let a = Region::disc(-0.4, 0.0, 0.25);
        let b = Region::disc(0.4, 0.0, 0.25);
        let q = quad_green_power(&a, &b, 1, &QuadratureSpec::default()).unwrap();
        let first_order = a.area()
            * b.area()
            * g_unit(Point::new(-0.4, 0.0), Point::new(0.4, 0.0));
        assert!((q.value - first_order).abs() / q.value < 0.05);
        assert!(q.error_estimate < 1e-6 * q.value.abs());
    }

    #[test]
    fn matches_centered_disc_closed_form() {
        // For A = B = disc(0, R): int_{A x A} G = pi R^4 (1/4 - ln R),
        // from solving the radial Poisson problem for u = int_A G(., y) dy.
        for &radius in &[0.25, 0.4] {
            let a = Region::disc(0.0, 0.0, radius);
            let q = quad_green_power(&a, &a, 1, &QuadratureSpec::singular()).unwrap();
            let exact = PI * radius.powi(4) * (0.25 - radius.ln());
            let rel = (q.value - exact).abs() / exact;
            assert!(
                rel < 5e-4,
                "self integral off by {rel:.2e} at R={radius}: {} vs {exact}",
                q.value
            );
        }
    }

    #[test]
    fn shrinking_disc_pair_approaches_pointwise_green_squared() {
        // quad(U(0,d), U(y0,d), p=2) / (pi d^2)^2 -> G(0, y0)^2 as d -> 0.
        let y0 = Point::new(0.5, 0.0);
        let g2 = g_unit(Point::ORIGIN, y0).powi(2);
        let mut prev_err = f64::INFINITY;
        for &d in &[0.08, 0.04, 0.02] {
            let a = Region::disc(0.0, 0.0, d);
            let b = Region::disc(0.5, 0.0, d);
            let q = quad_green_power(&a, &b, 2, &QuadratureSpec::default()).unwrap();
            let ratio = q.value / (PI * d * d).powi(2);
            let err = (ratio - g2).abs() / g2;
            assert!(err < prev_err, "ratio should converge: err={err} at d={d}");
            prev_err = err;
        }
        assert!(prev_err < 5e-3);
    }

    #[test]
    fn monotone_under_shrinking_region() {
        let b = Region::disc(0.4, 0.0, 0.2);
        let spec = QuadratureSpec::default();
        let big = quad_green_power(&Region::disc(-0.4, 0.0, 0.25), &b, 1, &spec).unwrap();
        let small = quad_green_power(&Region::disc(-0.4, 0.0, 0.18), &b, 1, &spec).unwrap();
        assert!(
            small.value <= big.value + big.error_estimate + small.error_estimate,
            "integral must not grow when the region shrinks"
        );
    }

    #[test]
    fn rectangle_pair_agrees_with_disc_limit_check() {
        // Compare a rect x rect integral against a brute-force midpoint
        // evaluation at an unrelated resolution.
        let a = Region::rect(-0.5, -0.1, -0.2, 0.2);
        let b = Region::rect(0.2, -0.15, 0.55, 0.15);
        let q = quad_green_power(&a, &b, 1, &QuadratureSpec::default()).unwrap();
        let n = 37; // deliberately off the dyadic ladder
        let mut brute = 0.0;
        let (wa, wb) = (a.area() / (n * n) as f64, b.area() / (n * n) as f64);
        for i in 0..n {
            for j in 0..n {
                let x = Point::new(
                    -0.5 + 0.3 * (i as f64 + 0.5) / n as f64,
                    -0.1 + 0.3 * (j as f64 + 0.5) / n as f64,
                );
                for k in 0..n {
                    for l in 0..n {
                        let y = Point::new(
                            0.2 + 0.35 * (k as f64 + 0.5) / n as f64,
                            -0.15 + 0.3 * (l as f64 + 0.5) / n as f64,
                        );
                        brute += wa * wb * g_unit(x, y);
                    }
                }
            }
        }
        assert_relative_eq!(q.value, brute, max_relative = 1e-3);
    }

    #[test]
    fn chain_with_two_regions_matches_pair_integral() {
        let a = Region::disc(-0.4, 0.0, 0.2);
        let b = Region::disc(0.4, 0.0, 0.2);
        let spec = QuadratureSpec::default();
        let chain = quad_green_chain(&[a, b], &spec).unwrap();
        let pair = quad_green_power(&a, &b, 1, &spec).unwrap();
        assert_relative_eq!(chain.value, pair.value, max_relative = 1e-6);
    }

    #[test]
    fn chain_rejects_touching_regions() {
        let a = Region::disc(-0.2, 0.0, 0.2);
        let b = Region::disc(0.2, 0.0, 0.2);
        assert!(quad_green_chain(&[a, b], &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn gff_covariance_zero_density() {
        let rho1 = Density::indicator(Region::disc(0.0, 0.0, 0.3));
        let rho2 = Density::default();
        let q = gff_covariance(&rho1, &rho2, &QuadratureSpec::default()).unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn gff_covariance_matches_closed_form_self_term() {
        let r = 0.3;
        let rho = Density::indicator(Region::disc(0.0, 0.0, r));
        let q = gff_covariance(&rho, &rho, &QuadratureSpec::default()).unwrap();
        let exact = 0.5 * PI * r.powi(4) * (0.25 - r.ln());
        assert_relative_eq!(q.value, exact, max_relative = 5e-4);
    }

    #[test]
    fn integrate_over_region_smooth_field() {
        // int_A Re(y) dy = Re(center) * area for any disc.
        let a = Region::disc(0.3, -0.1, 0.2);
        let q = integrate_over_region(&a, &QuadratureSpec::default(), |p| p.x).unwrap();
        assert_relative_eq!(q.value, 0.3 * a.area(), epsilon = 1e-10);
    }
}

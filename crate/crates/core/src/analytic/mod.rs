//! Closed-form kernels of the disc and the deterministic quadratures built
//! on them.
//!
//! Everything here is exact-formula or spectrally convergent quadrature; no
//! randomness. These values serve as the targets that the Monte Carlo
//! estimators are checked against, so their accuracy budget (1e-6 relative
//! or better) is deliberately far below the statistical noise floor.

pub mod quad;
pub mod quad1d;

pub use quad::{
    gff_covariance, integrate_over_region, quad_green_chain, quad_green_power, QuadResult,
    QuadratureSpec,
};

use crate::geom::Point;
use thiserror::Error;

/// Errors from analytic evaluations.
#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    /// Requested accuracy was not reached; carries the last two refinement
    /// iterates so the caller can judge how far the computation got.
    #[error("precision not reached: last iterates {last} and {previous}, error estimate {error_estimate}")]
    Precision {
        last: f64,
        previous: f64,
        error_estimate: f64,
    },
}

pub type Result<T> = std::result::Result<T, AnalyticError>;

/// Green's function of the disc of radius `r` centered at the origin:
///
///   G_r(x, y) = -(1/pi) ln( |x - y| / |1 - (x/r) conj(y/r)| ) with x, y
///   rescaled to the unit disc first, so the scaling law
///   G_r(x, y) = G_1(x/r, y/r) holds exactly by construction.
///
/// Symmetric, positive inside, and +infinity on the diagonal (rejected).
pub fn green_disc(r: f64, x: Point, y: Point) -> Result<f64> {
    if !(r > 0.0) {
        return Err(AnalyticError::Domain(format!("radius must be positive, got {r}")));
    }
    let xs = x.scale(1.0 / r);
    let ys = y.scale(1.0 / r);
    if xs.norm() >= 1.0 || ys.norm() >= 1.0 {
        return Err(AnalyticError::Domain(format!(
            "green_disc needs both points strictly inside the disc of radius {r}"
        )));
    }
    let sep = xs.dist(ys);
    if sep == 0.0 {
        return Err(AnalyticError::Domain(
            "green_disc is singular on the diagonal x = y".into(),
        ));
    }
    let cross = (Point::new(1.0, 0.0) - xs.cmul(ys.conj())).norm();
    Ok(-(sep / cross).ln() / std::f64::consts::PI)
}

/// Poisson kernel of the disc of radius `r` against arc length on the
/// boundary circle:
///
///   h_r(x, z) = (r^2 - |x|^2) / (2 pi r |x - z|^2),  |x| < r, |z| = r.
///
/// Normalized so that the integral over the boundary circle (arc-length
/// measure) is 1. `z` is snapped onto the circle; it must already lie within
/// 1e-9 of it.
pub fn poisson_kernel_disc(r: f64, x: Point, z: Point) -> Result<f64> {
    if !(r > 0.0) {
        return Err(AnalyticError::Domain(format!("radius must be positive, got {r}")));
    }
    if x.norm() >= r {
        return Err(AnalyticError::Domain(format!(
            "poisson kernel needs |x| < r, got |x| = {}",
            x.norm()
        )));
    }
    let zn = z.norm();
    if (zn - r).abs() > 1e-9 * r.max(1.0) {
        return Err(AnalyticError::Domain(format!(
            "boundary point must satisfy |z| = {r}, got |z| = {zn}"
        )));
    }
    let z_on = z.scale(r / zn);
    let d2 = x.dist(z_on).powi(2);
    Ok((r * r - x.norm_sq()) / (2.0 * std::f64::consts::PI * r * d2))
}

/// Number of boundary nodes needed for the periodic trapezoid rule to
/// resolve Poisson-kernel integrands whose Fourier coefficients decay like
/// q^|n|. Aims at ~1e-13 aliasing error; floors at `min_nodes`.
fn boundary_nodes(q: f64, min_nodes: usize) -> usize {
    if q <= 0.0 {
        return min_nodes;
    }
    let needed = (30.0 / -q.ln()).ceil();
    (needed as usize).clamp(min_nodes, 4_000_000)
}

/// Harmonic extension into the unit disc of a function sampled at `n`
/// equally spaced boundary angles theta_k = 2 pi k / n:
///
///   u(x) = (2 pi / n) sum_k h_1(x, e^{i theta_k}) f_k.
///
/// The periodic trapezoid rule is spectrally accurate for smooth data. With
/// piecewise-constant data (arc indicators) accuracy degrades to O(1/n)
/// unless the jumps sit on grid nodes.
pub fn harmonic_extension(boundary_values: &[f64], x: Point) -> Result<f64> {
    let n = boundary_values.len();
    if n < 8 {
        return Err(AnalyticError::Config(format!(
            "harmonic_extension needs at least 8 boundary samples, got {n}"
        )));
    }
    if x.norm() >= 1.0 {
        return Err(AnalyticError::Domain(format!(
            "harmonic_extension evaluates strictly inside the disc, got |x| = {}",
            x.norm()
        )));
    }
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let mut sum = 0.0;
    for (k, f) in boundary_values.iter().enumerate() {
        let z = Point::polar(1.0, step * k as f64);
        sum += poisson_kernel_disc(1.0, x, z)? * f;
    }
    Ok(sum * step)
}

/// Boundary-pair kernel of the disc of radius `r`:
///
///   K_r(x, y) = 4 int_0^{2 pi} h_r(x, r e^{i t}) h_r(y, r e^{i t}) dt,
///
/// evaluated by the periodic trapezoid rule with at least 512 nodes and
/// automatic refinement as |x| or |y| approaches the boundary. Satisfies
/// K_r(r x, r y) = K_1(x, y) / r^2, which is how the general radius is
/// reduced to the unit case here.
pub fn kernel_k(r: f64, x: Point, y: Point) -> Result<f64> {
    if !(r > 0.0) {
        return Err(AnalyticError::Domain(format!("radius must be positive, got {r}")));
    }
    let xs = x.scale(1.0 / r);
    let ys = y.scale(1.0 / r);
    Ok(kernel_k_unit(xs, ys)? / (r * r))
}

fn kernel_k_unit(x: Point, y: Point) -> Result<f64> {
    if x.norm() >= 1.0 || y.norm() >= 1.0 {
        return Err(AnalyticError::Domain(
            "kernel_k needs both points strictly inside the disc".into(),
        ));
    }
    let q = x.norm().max(y.norm());
    let n = boundary_nodes(q, 512);
    let step = 2.0 * std::f64::consts::PI / n as f64;
    // Inline the unit-disc Poisson kernel; this loop runs up to a few
    // million nodes when q is close to 1.
    let cx = (1.0 - x.norm_sq()) / (2.0 * std::f64::consts::PI);
    let cy = (1.0 - y.norm_sq()) / (2.0 * std::f64::consts::PI);
    let mut sum = 0.0;
    for k in 0..n {
        let (s, c) = (step * k as f64).sin_cos();
        let dx2 = (x.x - c).powi(2) + (x.y - s).powi(2);
        let dy2 = (y.x - c).powi(2) + (y.y - s).powi(2);
        sum += 1.0 / (dx2 * dy2);
    }
    Ok(4.0 * cx * cy * sum * step)
}

/// Radial chain for the second moment of small-disc occupations under the
/// loop measure: with both marked points at 0 and y0 = (y, 0),
///
///   F(y0) = int_{y0}^1 r G_r(0, y0) K_r(0, y0) dr,
///
/// evaluated with Gauss-Legendre panels graded toward r = y0, where the
/// integrand vanishes like (r - y0) but K_r needs ever finer boundary
/// resolution. The integral is cut at r = y0 (1 + delta) with delta chosen
/// so the dropped sliver is below 1e-9 absolute. Uses `green_disc` and
/// `kernel_k` internally rather than any closed form of the product.
pub fn loop_f_chain(y0: f64) -> Result<f64> {
    if !(0.0 < y0 && y0 < 1.0) {
        return Err(AnalyticError::Domain(format!(
            "loop_f_chain needs 0 < y0 < 1, got {y0}"
        )));
    }
    let p = Point::new(y0, 0.0);
    let integrand = |r: f64| -> f64 {
        let g = green_disc(r, Point::ORIGIN, p).expect("interior point");
        let k = kernel_k(r, Point::ORIGIN, p).expect("interior point");
        r * g * k
    };
    // Near r = y0 the integrand is ~ 2 (r - y0) / (pi^2 y0 r); the sliver
    // [y0, y0(1+delta)] contributes about y0 delta^2 / pi^2.
    let delta = 1e-4;
    let cut = y0 * (1.0 + delta);
    if cut >= 1.0 {
        return Err(AnalyticError::Domain(format!(
            "y0 = {y0} leaves no room between the cut and the boundary"
        )));
    }
    // Panels geometrically graded toward the cut keep the expensive
    // fine-resolution kernel evaluations confined to short intervals.
    let coarse = quad1d::gauss_graded_left(32, cut, 1.0, 24, integrand);
    let refined = quad1d::gauss_graded_left(48, cut, 1.0, 32, integrand);
    let err = (refined - coarse).abs();
    let tol = 1e-6 * refined.abs().max(1e-12);
    if err > tol {
        return Err(AnalyticError::Precision {
            last: refined,
            previous: coarse,
            error_estimate: err,
        });
    }
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::MoebiusMap;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn green_disc_known_values() {
        // G(0, y) = -ln|y| / pi
        let g = green_disc(1.0, Point::ORIGIN, Point::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(g, 2f64.ln() / PI, epsilon = 1e-15);
        assert_relative_eq!(g, 0.220636, epsilon = 1e-6);

        let g = green_disc(1.0, Point::new(0.5, 0.0), Point::new(-0.5, 0.0)).unwrap();
        assert_relative_eq!(g, 1.25f64.ln() / PI, epsilon = 1e-15);
        assert_relative_eq!(g, 0.071029, epsilon = 1e-6);
    }

    #[test]
    fn green_disc_symmetry_and_positivity() {
        let pts = [
            (Point::new(0.1, 0.2), Point::new(-0.3, 0.4)),
            (Point::new(0.7, -0.1), Point::new(0.65, -0.12)),
            (Point::new(-0.8, 0.5), Point::new(0.2, 0.0)),
        ];
        for (x, y) in pts {
            let a = green_disc(1.0, x, y).unwrap();
            let b = green_disc(1.0, y, x).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-14);
            assert!(a > 0.0);
        }
    }

    #[test]
    fn green_disc_scaling_law_is_exact() {
        let x = Point::new(0.2, -0.1);
        let y = Point::new(-0.35, 0.3);
        for &r in &[0.5, 0.8, 2.0] {
            let scaled = green_disc(r, x.scale(r), y.scale(r)).unwrap();
            let unit = green_disc(1.0, x, y).unwrap();
            assert_eq!(scaled, unit);
        }
    }

    #[test]
    fn green_disc_rejects_singular_and_outside() {
        let p = Point::new(0.3, 0.3);
        assert!(green_disc(1.0, p, p).is_err());
        assert!(green_disc(1.0, Point::new(1.0, 0.0), p).is_err());
        assert!(green_disc(0.5, Point::new(0.6, 0.0), p).is_err());
    }

    #[test]
    fn green_disc_conformal_invariance() {
        // G(m(x), m(y)) = G(x, y) for every disc automorphism, to 1e-12.
        let maps = [
            MoebiusMap::new(Point::new(0.3, -0.2), 0.0).unwrap(),
            MoebiusMap::new(Point::new(-0.5, 0.1), 1.9).unwrap(),
            MoebiusMap::new(Point::new(0.0, 0.72), -2.4).unwrap(),
        ];
        let pairs = [
            (Point::new(0.1, 0.0), Point::new(0.4, 0.3)),
            (Point::new(-0.6, 0.2), Point::new(0.3, -0.5)),
            (Point::new(0.05, -0.85), Point::new(-0.1, 0.0)),
        ];
        for m in &maps {
            for (x, y) in pairs {
                let lhs = green_disc(1.0, m.eval(x).unwrap(), m.eval(y).unwrap()).unwrap();
                let rhs = green_disc(1.0, x, y).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "invariance broken: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn poisson_kernel_known_values() {
        // Center: h(0, z) = 1 / (2 pi)
        let h = poisson_kernel_disc(1.0, Point::ORIGIN, Point::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(h, 1.0 / (2.0 * PI), epsilon = 1e-15);
        // (0.5, 1): (1 - 0.25) / (2 pi * 0.25) = 3 / (2 pi) = 0.477465
        let h = poisson_kernel_disc(1.0, Point::new(0.5, 0.0), Point::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(h, 0.477465, epsilon = 1e-6);
    }

    #[test]
    fn poisson_kernel_normalizes_over_boundary() {
        // int h_r(x, r e^{it}) r dt = 1 for every interior x, any radius.
        for &(r, x) in &[
            (1.0, Point::new(0.3, 0.4)),
            (1.0, Point::new(-0.85, 0.1)),
            (0.7, Point::new(0.2, -0.5)),
            (2.5, Point::new(1.3, 1.2)),
        ] {
            let q = x.norm() / r;
            let n = boundary_nodes(q, 512);
            let step = 2.0 * PI / n as f64;
            let mut sum = 0.0;
            for k in 0..n {
                let z = Point::polar(r, step * k as f64);
                sum += poisson_kernel_disc(r, x, z).unwrap();
            }
            sum *= step * r;
            assert!((sum - 1.0).abs() < 1e-10, "normalization off: {sum} at r={r}");
        }
    }

    #[test]
    fn poisson_kernel_is_green_boundary_derivative() {
        // G(x, z - eps n) / (2 eps) -> h(x, z) as eps -> 0, with O(eps) error.
        let x = Point::new(0.2, 0.3);
        let z = Point::polar(1.0, 1.1);
        let h = poisson_kernel_disc(1.0, x, z).unwrap();
        let mut prev_err = f64::INFINITY;
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let inner = z.scale(1.0 - eps);
            let g = green_disc(1.0, x, inner).unwrap();
            let err = (g / (2.0 * eps) - h).abs() / h;
            assert!(err < prev_err, "error should shrink with eps");
            assert!(err < 5.0 * eps, "first-order convergence violated: {err} at eps={eps}");
            prev_err = err;
        }
    }

    #[test]
    fn poisson_kernel_moebius_covariance() {
        // |m'(z)| h(m(x), m(z)) = h(x, z) on the unit circle, to 1e-10.
        let m = MoebiusMap::new(Point::new(0.4, -0.15), 0.8).unwrap();
        for k in 0..16 {
            let z = Point::polar(1.0, 0.3 + 2.0 * PI * k as f64 / 16.0);
            for &x in &[Point::new(0.1, 0.55), Point::new(-0.3, -0.2)] {
                let lhs = m.derivative_norm(z).unwrap()
                    * poisson_kernel_disc(1.0, m.eval(x).unwrap(), m.eval(z).unwrap()).unwrap();
                let rhs = poisson_kernel_disc(1.0, x, z).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "covariance broken at node {k}");
            }
        }
    }

    #[test]
    fn poisson_kernel_rejects_off_circle_points() {
        assert!(poisson_kernel_disc(1.0, Point::ORIGIN, Point::new(0.9, 0.0)).is_err());
        assert!(poisson_kernel_disc(1.0, Point::new(1.2, 0.0), Point::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn harmonic_extension_constant_and_linear_data() {
        let n = 256;
        let ones = vec![1.0; n];
        let u = harmonic_extension(&ones, Point::new(0.3, 0.4)).unwrap();
        assert!((u - 1.0).abs() < 1e-12);

        // f = cos(theta) extends to Re(x).
        let cos_data: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * k as f64 / n as f64).cos())
            .collect();
        let u = harmonic_extension(&cos_data, Point::new(0.3, 0.4)).unwrap();
        assert!((u - 0.3).abs() < 1e-10);
    }

    #[test]
    fn harmonic_extension_arc_indicator_at_center() {
        // At the center the kernel is constant, so an arc indicator
        // integrates to its angular fraction; jumps are placed on grid nodes
        // to keep the trapezoid rule exact. Arc = [0, w), w = 2 pi m / n.
        let n = 256;
        let m = 37;
        let data: Vec<f64> = (0..n).map(|k| if k < m { 1.0 } else { 0.0 }).collect();
        let u = harmonic_extension(&data, Point::ORIGIN).unwrap();
        assert_relative_eq!(u, m as f64 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_extension_rejects_bad_input() {
        assert!(harmonic_extension(&[1.0; 7], Point::ORIGIN).is_err());
        assert!(harmonic_extension(&[1.0; 64], Point::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn kernel_k_center_value() {
        // K(0, y) = 2 / pi independent of y, to 1e-8 relative.
        for &y in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let k = kernel_k(1.0, Point::ORIGIN, Point::new(y, 0.0)).unwrap();
            assert_relative_eq!(k, 2.0 / PI, max_relative = 1e-8);
        }
    }

    #[test]
    fn kernel_k_symmetry_and_scaling() {
        let x = Point::new(0.3, -0.2);
        let y = Point::new(-0.1, 0.6);
        let a = kernel_k(1.0, x, y).unwrap();
        let b = kernel_k(1.0, y, x).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-13);
        for &r in &[0.4, 0.9, 1.7] {
            let scaled = kernel_k(r, x.scale(r), y.scale(r)).unwrap();
            assert_relative_eq!(scaled, a / (r * r), max_relative = 1e-12);
        }
    }

    #[test]
    fn kernel_k_handles_near_boundary_points() {
        // The node count grows as the points approach the boundary; the
        // center identity still holds against a point at |y| = 0.995.
        let k = kernel_k(1.0, Point::ORIGIN, Point::new(0.0, 0.995)).unwrap();
        assert_relative_eq!(k, 2.0 / PI, max_relative = 1e-8);
    }

    #[test]
    fn loop_f_chain_matches_log_squared() {
        // F(y0) = (ln y0)^2 / pi^2; also equals green_disc(1, 0, y0)^2.
        for &y0 in &[0.3, 0.5, 0.7] {
            let f = loop_f_chain(y0).unwrap();
            let target = (y0.ln() / PI).powi(2);
            assert!(
                (f - target).abs() < 1e-6 && (f - target).abs() / target < 1e-6,
                "chain value {f} should match {target} at y0={y0}"
            );
            let g = green_disc(1.0, Point::ORIGIN, Point::new(y0, 0.0)).unwrap();
            assert!((f - g * g).abs() < 1e-6);
        }
        // Spot value from the closed form at y0 = 0.5.
        assert_relative_eq!(loop_f_chain(0.5).unwrap(), 0.048680, epsilon = 1e-6);
    }

    #[test]
    fn loop_f_chain_vanishes_toward_boundary() {
        let f95 = loop_f_chain(0.95).unwrap();
        let f98 = loop_f_chain(0.98).unwrap();
        assert!(f98 < f95 && f95 < 0.001);
    }

    #[test]
    fn loop_f_chain_rejects_out_of_range() {
        assert!(loop_f_chain(0.0).is_err());
        assert!(loop_f_chain(1.0).is_err());
        assert!(loop_f_chain(-0.2).is_err());
    }
}

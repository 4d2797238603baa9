//! Mollified intersection time between two paths: a double sum over grid
//! points weighted by the normalized overlap area of two eps-discs. A
//! spatial hash with cells of side 2 eps keeps the sum near-linear.

use super::{Path, SampleError};
use crate::geom::{Point, Region};
use std::collections::HashMap;

/// Overlap area of two discs of radius `eps` at centre distance `d`,
/// divided by `(pi eps^2)^2`. This is the convolution of the two disc
/// mollifiers, so it integrates to one in the centre-distance variable and
/// peaks at `1 / (pi eps^2)`.
fn lens_weight(d: f64, eps: f64) -> f64 {
    if d >= 2.0 * eps {
        return 0.0;
    }
    let lens = 2.0 * eps * eps * (d / (2.0 * eps)).acos()
        - 0.5 * d * (4.0 * eps * eps - d * d).sqrt();
    let norm = std::f64::consts::PI * eps * eps;
    lens / (norm * norm)
}

fn cell_of(p: Point, side: f64) -> (i64, i64) {
    ((p.x / side).floor() as i64, (p.y / side).floor() as i64)
}

/// Approximate intersection time of two paths inside `region`:
///
/// ```text
///   sum over grid points s of p1 and t of p2, both in the region, of
///   dt1 * dt2 * w(|p1(s) - p2(t)|)
/// ```
///
/// with `w` the two-disc overlap kernel above. `eps_moll` must exceed the
/// grid scale `sqrt(dt)` of both paths (otherwise the kernel undersamples)
/// and stay below 0.2.
pub fn mollified_pair_intersection(
    p1: &Path,
    p2: &Path,
    region: &Region,
    eps_moll: f64,
) -> Result<f64, SampleError> {
    let grid = p1.dt.max(p2.dt).sqrt();
    if !(eps_moll > grid && eps_moll < 0.2) {
        return Err(SampleError::Config(format!(
            "eps_moll {eps_moll} must lie in (sqrt(dt) = {grid:.3e}, 0.2)"
        )));
    }
    let side = 2.0 * eps_moll;
    let cutoff_sq = side * side;

    let mut buckets: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
    let n2 = p2.points.len() - 1;
    for q in &p2.points[..n2] {
        if region.contains(*q) {
            buckets.entry(cell_of(*q, side)).or_default().push(*q);
        }
    }

    let mut sum = 0.0;
    let n1 = p1.points.len() - 1;
    for p in &p1.points[..n1] {
        if !region.contains(*p) {
            continue;
        }
        let (cx, cy) = cell_of(*p, side);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(cell) = buckets.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for q in cell {
                    let d_sq = (*p - *q).norm_sq();
                    if d_sq < cutoff_sq {
                        sum += lens_weight(d_sq.sqrt(), eps_moll);
                    }
                }
            }
        }
    }
    Ok(sum * p1.dt * p2.dt)
}

#[cfg(test)]
mod tests {
    use super::super::sample_excursion;
    use super::super::ExcursionConfig;
    use super::*;
    use crate::analytic::quad1d::gauss_graded_right;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn kernel_peak_and_support() {
        let eps = 0.07;
        assert_relative_eq!(lens_weight(0.0, eps), 1.0 / (PI * eps * eps), epsilon = 1e-12);
        assert_eq!(lens_weight(2.0 * eps, eps), 0.0);
        assert_eq!(lens_weight(3.0 * eps, eps), 0.0);
        assert!(lens_weight(eps, eps) > 0.0);
    }

    // The kernel is a probability density in the plane:
    // int_0^{2 eps} w(s) 2 pi s ds = 1. The lens area has a 3/2-power cusp
    // at s = 2 eps, so the quadrature grades its panels toward that end.
    #[test]
    fn kernel_integrates_to_one() {
        let eps = 0.05;
        let mass = gauss_graded_right(32, 0.0, 2.0 * eps, 12, |s| {
            lens_weight(s, eps) * 2.0 * PI * s
        });
        assert_relative_eq!(mass, 1.0, epsilon = 1e-10);
    }

    fn two_real_paths() -> (Path, Path) {
        let cfg = ExcursionConfig::new(0.15, 2e-3);
        let a = sample_excursion(&cfg, RngStream { seed: 70, stream: 0 }).unwrap();
        let b = sample_excursion(&cfg, RngStream { seed: 70, stream: 1 }).unwrap();
        (a, b)
    }

    #[test]
    fn hashed_sum_matches_brute_force() {
        let cfg = ExcursionConfig::new(0.15, 2e-3);
        let region = Region::disc(0.0, 0.0, 0.9);
        let eps = 0.08;
        let mut met = 0;
        for k in 0..12 {
            let a = sample_excursion(&cfg, RngStream { seed: 70, stream: 2 * k }).unwrap();
            let b = sample_excursion(&cfg, RngStream { seed: 70, stream: 2 * k + 1 }).unwrap();
            let fast = mollified_pair_intersection(&a, &b, &region, eps).unwrap();
            let mut brute = 0.0;
            for p in &a.points[..a.points.len() - 1] {
                if !region.contains(*p) {
                    continue;
                }
                for q in &b.points[..b.points.len() - 1] {
                    if region.contains(*q) {
                        brute += lens_weight((*p - *q).norm(), eps);
                    }
                }
            }
            brute *= a.dt * b.dt;
            if brute > 0.0 {
                met += 1;
                assert_relative_eq!(fast, brute, max_relative = 1e-12);
            } else {
                assert_eq!(fast, 0.0);
            }
        }
        assert!(met > 0, "no test pair ever met");
    }

    #[test]
    fn intersection_is_symmetric_in_the_paths() {
        let (a, b) = two_real_paths();
        let region = Region::disc(0.0, 0.0, 0.9);
        let xy = mollified_pair_intersection(&a, &b, &region, 0.06).unwrap();
        let yx = mollified_pair_intersection(&b, &a, &region, 0.06).unwrap();
        assert_relative_eq!(xy, yx, max_relative = 1e-12);
    }

    #[test]
    fn far_apart_segments_contribute_nothing() {
        let left = Path {
            dt: 1e-3,
            points: vec![Point::new(-0.5, 0.0), Point::new(-0.5, 0.01), Point::new(-0.5, 0.02)],
        };
        let right = Path {
            dt: 1e-3,
            points: vec![Point::new(0.5, 0.0), Point::new(0.5, 0.01), Point::new(0.5, 0.02)],
        };
        let region = Region::disc(0.0, 0.0, 0.95);
        let v = mollified_pair_intersection(&left, &right, &region, 0.05).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn eps_window_is_enforced() {
        let (a, b) = two_real_paths();
        let region = Region::disc(0.0, 0.0, 0.9);
        // sqrt(dt) = 0.0447, so 0.03 undersamples; 0.25 exceeds the cap
        assert!(mollified_pair_intersection(&a, &b, &region, 0.03).is_err());
        assert!(mollified_pair_intersection(&a, &b, &region, 0.25).is_err());
    }
}

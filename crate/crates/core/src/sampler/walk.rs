//! The three walk samplers: plain Brownian motion stopped at a disc exit,
//! boundary-layer excursions of the unit disc, and loops conditioned to
//! leave a disc at a chosen root point.

use super::{ExcursionConfig, LoopRootConfig, Path, SampleError};
use crate::geom::Point;
use crate::rng::RngStream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

// Consecutive in-step rejections before declaring the walk stuck. The
// boundary drift always has an inward component, so this is unreachable in
// practice; it exists to turn a misconfiguration into an error instead of a
// spin.
const MAX_REJECTIONS: usize = 10_000;

fn gaussian_step(rng: &mut ChaCha8Rng, sqrt_dt: f64) -> Point {
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    Point::new(gx * sqrt_dt, gy * sqrt_dt)
}

fn driftless_walk(
    start: Point,
    radius: f64,
    dt: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point>, Vec<Point>> {
    let r_sq = radius * radius;
    let sqrt_dt = dt.sqrt();
    let expected = ((r_sq - start.norm_sq()) / (2.0 * dt)).ceil() as usize;
    let mut points = Vec::with_capacity((2 * expected).clamp(16, max_steps + 1));
    points.push(start);
    let mut x = start;
    for _ in 0..max_steps {
        x = x + gaussian_step(rng, sqrt_dt);
        points.push(x);
        if x.norm_sq() >= r_sq {
            return Ok(points);
        }
    }
    Err(points)
}

/// Runs a Brownian walk from `start` until it first reaches or crosses the
/// circle of radius `disc_radius` about the origin. The crossing point is
/// kept as the final entry, overshoot and all.
pub fn sample_bm_until_exit(
    start: Point,
    disc_radius: f64,
    dt: f64,
    max_steps: usize,
    stream: RngStream,
) -> Result<Path, SampleError> {
    if !(disc_radius > 0.0) || start.norm() >= disc_radius {
        return Err(SampleError::Config(format!(
            "start must lie strictly inside the disc of radius {disc_radius}"
        )));
    }
    if !(dt > 0.0) || max_steps == 0 {
        return Err(SampleError::Config("dt and max_steps must be positive".into()));
    }
    let mut rng = stream.rng();
    match driftless_walk(start, disc_radius, dt, max_steps, &mut rng) {
        Ok(points) => Ok(Path { dt, points }),
        Err(points) => Err(SampleError::Truncated { partial: Path { dt, points } }),
    }
}

/// Samples one boundary excursion of the unit disc: a uniform angle `theta`
/// is drawn first (exactly one uniform draw, so callers can reconstruct the
/// start point from the stream), then a Brownian walk runs from
/// `(1 - eps_start) e^{i theta}` until it exits the unit disc.
pub fn sample_excursion(cfg: &ExcursionConfig, stream: RngStream) -> Result<Path, SampleError> {
    cfg.validate()?;
    let mut rng = stream.rng();
    let theta = rng.gen::<f64>() * TAU;
    let start = Point::polar(1.0 - cfg.eps_start, theta);
    match driftless_walk(start, 1.0, cfg.dt, cfg.max_steps, &mut rng) {
        Ok(points) => Ok(Path { dt: cfg.dt, points }),
        Err(points) => Err(SampleError::Truncated { partial: Path { dt: cfg.dt, points } }),
    }
}

/// Samples a loop rooted at `z = r e^{i theta}` on the boundary of the disc
/// of radius `r`: a Brownian walk started `eps_offset` inside `z`, with the
/// drift of the transform that conditions the walk to exit at `z`,
///
/// ```text
///   b(x) = -2 x / (r^2 - |x|^2) - 2 (x - z) / |x - z|^2
/// ```
///
/// stopped when it comes within `stop_radius` of the root. Proposed steps
/// that would leave the disc anywhere other than at the root are resampled,
/// so every recorded point except the last is strictly inside.
pub fn sample_conditioned_loop(cfg: &LoopRootConfig, stream: RngStream) -> Result<Path, SampleError> {
    cfg.validate()?;
    let mut rng = stream.rng();
    let z = cfg.root();
    let start = Point::polar(cfg.r - cfg.eps_offset, cfg.theta);
    let r_sq = cfg.r * cfg.r;
    let stop_sq = cfg.stop_radius * cfg.stop_radius;
    let sqrt_dt = cfg.dt.sqrt();
    // The drift blows up like 1/gap at the boundary; a fixed-dt Euler mean
    // would then overshoot across the whole disc. Capping the drift
    // displacement at the noise scale leaves the dynamics untouched wherever
    // |b| dt <= 3 sqrt(dt) and keeps the walk stable inside the O(sqrt(dt))
    // layer where a fixed step cannot resolve the drift anyway.
    let drift_cap = 3.0 * sqrt_dt;
    let mut points = Vec::with_capacity(64);
    points.push(start);
    let mut x = start;
    for _ in 0..cfg.max_steps {
        let to_root = x - z;
        let drift = x.scale(-2.0 / (r_sq - x.norm_sq()))
            + to_root.scale(-2.0 / to_root.norm_sq());
        let mut displacement = drift.scale(cfg.dt);
        let len = displacement.norm();
        if len > drift_cap {
            displacement = displacement.scale(drift_cap / len);
        }
        let mean = x + displacement;
        let mut rejections = 0;
        let next = loop {
            let proposal = mean + gaussian_step(&mut rng, sqrt_dt);
            if (proposal - z).norm_sq() <= stop_sq || proposal.norm_sq() < r_sq {
                break proposal;
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(SampleError::Truncated { partial: Path { dt: cfg.dt, points } });
            }
        };
        points.push(next);
        x = next;
        if (x - z).norm_sq() <= stop_sq {
            return Ok(Path { dt: cfg.dt, points });
        }
    }
    Err(SampleError::Truncated { partial: Path { dt: cfg.dt, points } })
}

//! Poisson clouds of boundary excursions and interior loops: cumulative
//! occupation statistics, signed and centered fluctuation replicas in the
//! central-limit regime, and covariance comparisons against both the
//! continuum Gaussian-field quadrature and the lattice oracle.
//!
//! A cloud at intensity `c` holds a Poisson number of independent
//! excursions together with independent fair signs. The count is tied to
//! the approximation level: one excursion carries measure weight
//! `2 pi / eps_eff` (see the estimator layer), so matching the intensity
//! measure `c mu` requires `2 pi c / eps_eff` excursions on average. All
//! cloud-level expectations are then plain sums: `E[X_f] = c mu(l_f) =
//! 2 c Int f`, and `Var[Y_f] = c mu(l_f^2) = 4 c Int Int G f f`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::analytic::{
    gff_covariance, integrate_over_region, quad_green_power, AnalyticError, QuadratureSpec,
};
use crate::estimators::LoopMeasureSpec;
use crate::geom::{Density, Region};
use crate::lattice::{discrete_green, LatticeError, LatticeModel};
use crate::parallel::run_tasks;
use crate::rng::RngStream;
use crate::sampler::{
    effective_layer_width, occupation_time, sample_conditioned_loop, sample_excursion,
    ExcursionConfig, LoopRootConfig, Path, SampleError,
};

#[derive(Debug, thiserror::Error)]
pub enum CloudError {
    #[error("cloud config: {0}")]
    Config(String),
    #[error("budget guard: {0}")]
    Budget(String),
    #[error("restriction mass estimation failed: {0}")]
    RestrictionMass(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Stream spacing reserved per cloud: the cloud's own stream drives the
/// count and the signs, and each path gets one of the following streams.
/// Callers sampling several clouds must space their base streams by this.
pub const CLOUD_STREAM_STRIDE: u64 = 1 << 24;

/// Stream spacing reserved per replica in the fluctuation drivers.
const REPLICA_STREAM_STRIDE: u64 = 1 << 40;

const MAX_CLOUDS_PER_REPLICA: usize = (REPLICA_STREAM_STRIDE / CLOUD_STREAM_STRIDE) as usize;
const MAX_REPLICAS: usize = 1 << 24;

/// Poisson cloud of signed boundary excursions.
#[derive(Clone, Debug)]
pub struct Cloud {
    pub paths: Vec<Path>,
    /// Fair independent signs, one per path.
    pub signs: Vec<i8>,
    /// Intensity multiplier `c` of the underlying measure.
    pub intensity: f64,
    /// Start-layer width the cloud was sampled at.
    pub eps_used: f64,
    /// Step size the cloud was sampled at (with `eps_used`, fixes the
    /// effective layer geometry that analytic centerings depend on).
    pub dt_used: f64,
}

/// Expected number of excursions in one cloud at intensity `c`: the total
/// measure carried per sample is `2 pi / eps_eff`, so the count must scale
/// as `2 pi c / eps_eff` for cloud sums to estimate `c mu` integrals.
pub fn expected_excursion_count(c: f64, cfg: &ExcursionConfig) -> f64 {
    TAU * c / effective_layer_width(cfg.eps_start, cfg.dt)
}

/// Samples one excursion cloud. The stream `base` seeds the count and sign
/// draws; paths use the `CLOUD_STREAM_STRIDE - 1` streams following it.
pub fn sample_excursion_cloud(
    c: f64,
    cfg: &ExcursionConfig,
    base: RngStream,
) -> Result<Cloud, CloudError> {
    cfg.validate()?;
    if !(c >= 0.0) {
        return Err(CloudError::Config(format!("intensity {c} must be nonnegative")));
    }
    if c / cfg.eps_start > 1e7 {
        return Err(CloudError::Budget(format!(
            "intensity / eps = {:.3e} exceeds 1e7",
            c / cfg.eps_start
        )));
    }
    let mut rng = base.rng();
    let mean = expected_excursion_count(c, cfg);
    let count = if mean == 0.0 {
        0
    } else {
        let draw: f64 = Poisson::new(mean)
            .map_err(|e| CloudError::Config(format!("count distribution: {e}")))?
            .sample(&mut rng);
        draw as u64
    };
    if count + 2 >= CLOUD_STREAM_STRIDE {
        return Err(CloudError::Budget(format!(
            "cloud of {count} paths exceeds the reserved stream band"
        )));
    }
    let mut paths = Vec::with_capacity(count as usize);
    let mut signs = Vec::with_capacity(count as usize);
    for i in 0..count {
        let stream = RngStream { seed: base.seed, stream: base.stream + 1 + i };
        paths.push(sample_excursion(cfg, stream)?);
        signs.push(if rng.gen::<bool>() { 1 } else { -1 });
    }
    Ok(Cloud { paths, signs, intensity: c, eps_used: cfg.eps_start, dt_used: cfg.dt })
}

/// Occupation integral of a density along a path (left-endpoint rule, the
/// same convention as region occupation).
pub fn density_occupation(path: &Path, f: &Density) -> f64 {
    let n = path.points.len() - 1;
    path.points[..n].iter().map(|p| f.eval(*p)).sum::<f64>() * path.dt
}

/// Integral of a density over the plane (sum of coefficient times area).
pub fn density_integral(f: &Density) -> f64 {
    f.terms.iter().map(|(r, c)| c * r.area()).sum()
}

/// Exact mean of the cumulative occupation `X_f` for one cloud.
///
/// Averaging the Green function of the monitored domain over the start
/// circle gives the radial profile `(1/pi) ln(R_eff / max(s, |x|))`, where
/// `s = 1 - eps` is the start radius and `R_eff = s + eps_eff` the
/// effective absorbing boundary of the discrete walk. Weighting by the
/// cloud intensity leaves `2 c ln(R_eff/s) / eps_eff` times the integral of
/// `f` for regions inside the start circle, which tends to `2 c Int f` as
/// the layer shrinks. Centering with this exact value rather than the
/// limit keeps the centered statistics mean-zero at any layer width; the
/// centering stays analytic, so no estimate is checked against itself.
pub fn expected_cloud_occupation(
    c: f64,
    cfg: &ExcursionConfig,
    f: &Density,
) -> Result<f64, CloudError> {
    let eps_eff = effective_layer_width(cfg.eps_start, cfg.dt);
    let s = 1.0 - cfg.eps_start;
    let r_eff = s + eps_eff;
    let mut total = 0.0;
    for (region, coeff) in &f.terms {
        let integral = if region.outer_radius() <= s {
            region.area() * (r_eff / s).ln()
        } else {
            // region pokes into the start layer: the profile is flat only
            // up to |x| = s, integrate the kinked tail numerically
            integrate_over_region(region, &QuadratureSpec::singular(), |p| {
                (r_eff / s.max(p.norm())).ln()
            })?
            .value
        };
        total += coeff * integral;
    }
    Ok(2.0 * c * total / eps_eff)
}

/// Per-cloud occupation statistics of a test density.
#[derive(Clone, Copy, Debug)]
pub struct CloudStats {
    /// Cumulative occupation `X_f`.
    pub x: f64,
    /// `X_f` minus its analytic mean (never the empirical one, so
    /// downstream variance checks are not self-referential).
    pub x_centered: f64,
    /// Signed sum `Y_f`.
    pub y: f64,
}

/// Plain and signed occupation sums of one cloud.
fn cloud_sums(cloud: &Cloud, f: &Density) -> (f64, f64) {
    let mut x = 0.0;
    let mut y = 0.0;
    for (path, sign) in cloud.paths.iter().zip(&cloud.signs) {
        let occ = density_occupation(path, f);
        x += occ;
        y += *sign as f64 * occ;
    }
    (x, y)
}

/// Cloud sums of the occupation of `f`, centered with the analytic mean at
/// the cloud's own layer geometry.
pub fn cloud_statistics(cloud: &Cloud, f: &Density) -> Result<CloudStats, CloudError> {
    let (x, y) = cloud_sums(cloud, f);
    let cfg = ExcursionConfig::new(cloud.eps_used, cloud.dt_used);
    let x_centered = x - expected_cloud_occupation(cloud.intensity, &cfg, f)?;
    Ok(CloudStats { x, x_centered, y })
}

/// One aggregated fluctuation value.
#[derive(Clone, Debug)]
pub struct FluctuationSample {
    pub value: f64,
    pub n_clouds: usize,
    pub f_descriptor: String,
}

/// Parallel replica sequences of the two centered statistics.
#[derive(Clone, Debug)]
pub struct CltReplicas {
    /// `(Y^1 + ... + Y^N) / sqrt(N)` per replica.
    pub y: Vec<FluctuationSample>,
    /// Same aggregation of the analytically centered occupation.
    pub x_centered: Vec<FluctuationSample>,
}

fn check_replica_budget(n_clouds: usize, n_replicas: usize) -> Result<(), CloudError> {
    if n_clouds > MAX_CLOUDS_PER_REPLICA {
        return Err(CloudError::Budget(format!(
            "{n_clouds} clouds per replica exceeds the stream band of {MAX_CLOUDS_PER_REPLICA}"
        )));
    }
    if n_replicas > MAX_REPLICAS {
        return Err(CloudError::Budget(format!(
            "{n_replicas} replicas exceeds the stream band of {MAX_REPLICAS}"
        )));
    }
    Ok(())
}

/// Draws `n_replicas` independent replicas, each aggregating `n_clouds`
/// i.i.d. clouds at intensity `c` into `(sum of Y) / sqrt(N)` and the same
/// for the centered occupation. Replica `k` is a deterministic function of
/// `(seed, k)`, so results do not depend on the worker count.
pub fn clt_fluctuation(
    n_clouds: usize,
    c: f64,
    f: &Density,
    cfg: &ExcursionConfig,
    n_replicas: usize,
    seed: u64,
    workers: usize,
) -> Result<CltReplicas, CloudError> {
    if n_clouds < 16 {
        return Err(CloudError::Config(format!(
            "need at least 16 clouds per replica, got {n_clouds}"
        )));
    }
    if n_replicas < 1_000 {
        return Err(CloudError::Config(format!(
            "need at least 1000 replicas, got {n_replicas}"
        )));
    }
    check_replica_budget(n_clouds, n_replicas)?;
    cfg.validate()?;
    let descriptor = format!("{f:?}");
    let sqrt_n = (n_clouds as f64).sqrt();
    let center = expected_cloud_occupation(c, cfg, f)?;
    let values: Vec<Result<(f64, f64), CloudError>> =
        run_tasks(n_replicas, workers, |k| {
            let mut y_sum = 0.0;
            let mut x_sum = 0.0;
            for j in 0..n_clouds {
                let base = RngStream {
                    seed,
                    stream: k as u64 * REPLICA_STREAM_STRIDE + j as u64 * CLOUD_STREAM_STRIDE,
                };
                let cloud = sample_excursion_cloud(c, cfg, base)?;
                let (x, y) = cloud_sums(&cloud, f);
                y_sum += y;
                x_sum += x - center;
            }
            Ok((y_sum / sqrt_n, x_sum / sqrt_n))
        });
    let mut y = Vec::with_capacity(n_replicas);
    let mut x_centered = Vec::with_capacity(n_replicas);
    for v in values {
        let (yv, xv) = v?;
        y.push(FluctuationSample {
            value: yv,
            n_clouds,
            f_descriptor: descriptor.clone(),
        });
        x_centered.push(FluctuationSample {
            value: xv,
            n_clouds,
            f_descriptor: descriptor.clone(),
        });
    }
    Ok(CltReplicas { y, x_centered })
}

/// Entrywise comparison of the replica covariance over a test family
/// against the Gaussian-field prediction and the lattice oracle.
#[derive(Clone, Debug)]
pub struct GffReport {
    /// Empirical covariance of the `Y`-replica vectors.
    pub empirical: Vec<Vec<f64>>,
    /// `8 x` the Gaussian-field covariance quadrature (the replica variance
    /// is `4 Int Int G f f`, the field convention carries `1/2`).
    pub target: Vec<Vec<f64>>,
    /// Same functional computed exactly from the lattice Green matrix after
    /// calibration (midpoint sums over the interior vertices).
    pub lattice: Vec<Vec<f64>>,
    /// Max relative deviation of `empirical` from `target` over entries
    /// with a nonnegligible target.
    pub max_rel_dev_target: f64,
    /// Same for `lattice` vs `target` (pure discretization error).
    pub max_rel_dev_lattice: f64,
}

/// Runs joint `Y`-replicas for up to eight test densities over shared
/// clouds and reports their empirical covariance against `8 x` the
/// Gaussian-field quadrature and against the calibrated lattice functional.
#[allow(clippy::too_many_arguments)]
pub fn gff_compare(
    family: &[Density],
    n_clouds: usize,
    c: f64,
    cfg: &ExcursionConfig,
    n_replicas: usize,
    seed: u64,
    workers: usize,
    lattice_refinement: u32,
    c_g: f64,
) -> Result<GffReport, CloudError> {
    let m = family.len();
    if m == 0 || m > 8 {
        return Err(CloudError::Config(format!("family size {m} outside 1..=8")));
    }
    if n_clouds == 0 || n_replicas < 2 {
        return Err(CloudError::Config("need clouds and at least two replicas".into()));
    }
    check_replica_budget(n_clouds, n_replicas)?;
    cfg.validate()?;
    let sqrt_n = (n_clouds as f64).sqrt();
    let rows: Vec<Result<Vec<f64>, CloudError>> = run_tasks(n_replicas, workers, |k| {
        let mut sums = vec![0.0f64; m];
        for j in 0..n_clouds {
            let base = RngStream {
                seed,
                stream: k as u64 * REPLICA_STREAM_STRIDE + j as u64 * CLOUD_STREAM_STRIDE,
            };
            let cloud = sample_excursion_cloud(c, cfg, base)?;
            for (i, f) in family.iter().enumerate() {
                sums[i] += cloud_sums(&cloud, f).1;
            }
        }
        sums.iter_mut().for_each(|s| *s /= sqrt_n);
        Ok(sums)
    });
    let mut samples = Vec::with_capacity(n_replicas);
    for row in rows {
        samples.push(row?);
    }
    let r = samples.len() as f64;
    let mut mean = vec![0.0f64; m];
    for row in &samples {
        for i in 0..m {
            mean[i] += row[i];
        }
    }
    mean.iter_mut().for_each(|v| *v /= r);
    let mut empirical = vec![vec![0.0f64; m]; m];
    for row in &samples {
        for i in 0..m {
            for j in 0..m {
                empirical[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    for row in &mut empirical {
        for v in row.iter_mut() {
            *v /= r - 1.0;
        }
    }

    let quad = QuadratureSpec::default();
    let mut target = vec![vec![0.0f64; m]; m];
    for i in 0..m {
        for j in i..m {
            let value = 8.0 * c * gff_covariance(&family[i], &family[j], &quad)?.value;
            target[i][j] = value;
            target[j][i] = value;
        }
    }

    // exact lattice counterpart: midpoint sums of the calibrated Green
    // matrix against the same densities
    let model = LatticeModel::unit_disc(lattice_refinement)?;
    let g = discrete_green(&model)?;
    let h2 = model.spacing() * model.spacing();
    let weights: Vec<Vec<f64>> = family
        .iter()
        .map(|f| (0..model.interior_count()).map(|v| f.eval(model.position(v))).collect())
        .collect();
    let mut lattice = vec![vec![0.0f64; m]; m];
    for j in 0..m {
        let wj = nalgebra::DVector::from_vec(weights[j].clone());
        let gwj = &g * wj;
        for i in 0..m {
            let dot: f64 = weights[i].iter().zip(gwj.iter()).map(|(a, b)| a * b).sum();
            // 8 * (1/2) * G_disc / c_g * h^4 midpoint measure
            lattice[i][j] = 8.0 * c * 0.5 * dot * h2 * h2 / c_g;
        }
    }

    let mut max_rel_dev_target = 0.0f64;
    let mut max_rel_dev_lattice = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if target[i][j].abs() > 1e-9 {
                max_rel_dev_target = max_rel_dev_target
                    .max((empirical[i][j] - target[i][j]).abs() / target[i][j].abs());
                max_rel_dev_lattice = max_rel_dev_lattice
                    .max((lattice[i][j] - target[i][j]).abs() / target[i][j].abs());
            }
        }
    }
    Ok(GffReport { empirical, target, lattice, max_rel_dev_target, max_rel_dev_lattice })
}

/// Number of lifetime buckets in the loop-cloud centering partition; the
/// last bucket collects every loop with lifetime at most `1/16`. At a fixed
/// approximation level the restricted measure is finite, so the partition
/// is a finite relabeling of the global centering; it is kept because the
/// bucket means are the natural diagnostic of where the mass sits.
pub const LIFETIME_BUCKETS: usize = 16;

/// Replica report for the signed loop soup restricted to a support region.
#[derive(Clone, Debug)]
pub struct LoopSoupReport {
    pub y: Vec<FluctuationSample>,
    pub x_centered: Vec<FluctuationSample>,
    /// Closed-form measure of all representable loops (roots above the
    /// floor) at the configured approximation level.
    pub total_mass: f64,
    /// Estimated measure of loops that actually visit the support region.
    pub restricted_mass: f64,
    pub restricted_mass_se: f64,
    /// `c Int Int G^2 f f` over the test region.
    pub variance_target: f64,
}

/// total loop-measure mass above the root floor: integrating the sampling
/// weight `(1 - floor^2)(2 - eps) / (2 eps^2 r^2)` against the root density
/// `2 r dr / (1 - floor^2)` leaves `(2 - eps) ln(1/floor) / eps^2`.
fn loop_total_mass(spec: &LoopMeasureSpec) -> f64 {
    (2.0 - spec.eps_rel) * (1.0 / spec.r_floor).ln() / (spec.eps_rel * spec.eps_rel)
}

struct SoupLoopDraw {
    path: Path,
    sign: f64,
    lifetime: f64,
}

/// One loop from the normalized restricted-measure sampler: the root radius
/// has density proportional to `1/r` (inverse-CDF draw, matching the
/// measure's `1/r^2` weight against the `2 r` sampling density), the angle
/// is uniform, and the walk is the conditioned loop sampler.
fn sample_soup_loop(
    spec: &LoopMeasureSpec,
    control: &mut impl Rng,
    path_stream: RngStream,
) -> Result<SoupLoopDraw, CloudError> {
    let u: f64 = control.gen();
    let r = spec.r_floor.powf(1.0 - u);
    let theta = TAU * control.gen::<f64>();
    let sign = if control.gen::<bool>() { 1.0 } else { -1.0 };
    let cfg = LoopRootConfig::new(r, theta, spec.eps_rel * r, spec.dt_rel * r * r);
    let path = sample_conditioned_loop(&cfg, path_stream)?;
    let lifetime = (path.points.len().saturating_sub(1)) as f64 * path.dt;
    Ok(SoupLoopDraw { path, sign, lifetime })
}

fn lifetime_bucket(lifetime: f64) -> usize {
    if lifetime >= 1.0 {
        0
    } else {
        (((1.0 / lifetime).ceil() as usize).saturating_sub(1)).min(LIFETIME_BUCKETS - 1)
    }
}

fn hits_region(path: &Path, region: &Region) -> bool {
    let n = path.points.len() - 1;
    path.points[..n].iter().any(|p| region.contains(*p))
}

/// Poissonized signed loop soup restricted to loops visiting `support`,
/// with occupation fluctuations of the indicator of `f_region`.
///
/// The soup draws a Poisson number of loops from the normalized measure and
/// rejects the ones that miss the support; thinning a Poisson cloud is
/// again Poisson, so every reported statistic is unbiased for the
/// restricted soup. The centered variant subtracts pilot-estimated bucket
/// means over the lifetime partition `{tau > 1/k}`; the pilot runs on its
/// own streams so the centering never reuses the replica randomness.
#[allow(clippy::too_many_arguments)]
pub fn loop_soup_signed(
    c: f64,
    spec: &LoopMeasureSpec,
    support: &Region,
    f_region: &Region,
    n_clouds: usize,
    n_replicas: usize,
    seed: u64,
    workers: usize,
) -> Result<LoopSoupReport, CloudError> {
    spec.validate().map_err(|e| CloudError::Config(e.to_string()))?;
    if spec.r_floor <= 0.0 {
        return Err(CloudError::Config(
            "restricted soups need a positive root floor; the loop measure below it is infinite"
                .into(),
        ));
    }
    if !(c > 0.0) {
        return Err(CloudError::Config(format!("intensity {c} must be positive")));
    }
    if n_clouds == 0 || n_replicas < 2 {
        return Err(CloudError::Config("need clouds and at least two replicas".into()));
    }
    check_replica_budget(n_clouds, n_replicas + 1)?;
    if support.outer_radius() > 0.95 {
        return Err(CloudError::Config(
            "support region must stay 0.05 away from the unit circle".into(),
        ));
    }
    // probe grid: the test region must sit inside the support
    let reach = f_region.outer_radius();
    let probes = 24;
    for i in 0..probes {
        for j in 0..probes {
            let p = crate::geom::Point::new(
                reach * (2.0 * i as f64 / (probes - 1) as f64 - 1.0),
                reach * (2.0 * j as f64 / (probes - 1) as f64 - 1.0),
            );
            if f_region.contains(p) && !support.contains(p) {
                return Err(CloudError::Config(
                    "test region must be supported inside the support region".into(),
                ));
            }
        }
    }

    let total_mass = loop_total_mass(spec);
    let mean_count = c * total_mass;
    if mean_count * n_clouds as f64 > 1e7 {
        return Err(CloudError::Budget(format!(
            "expected {:.3e} loops per replica exceeds 1e7",
            mean_count * n_clouds as f64
        )));
    }

    // pilot pass: restriction mass and bucket means, on a reserved stream
    // band one past the last replica
    let pilot_base = n_replicas as u64 * REPLICA_STREAM_STRIDE;
    let n_pilot: usize = 512;
    let mut control = RngStream { seed, stream: pilot_base }.rng();
    let mut hits = 0usize;
    let mut bucket_sums = [0.0f64; LIFETIME_BUCKETS];
    for i in 0..n_pilot {
        let draw = sample_soup_loop(
            spec,
            &mut control,
            RngStream { seed, stream: pilot_base + 1 + i as u64 },
        )?;
        if hits_region(&draw.path, support) {
            hits += 1;
            bucket_sums[lifetime_bucket(draw.lifetime)] +=
                occupation_time(&draw.path, f_region);
        }
    }
    if hits == 0 {
        return Err(CloudError::RestrictionMass(
            "pilot sample found no loops visiting the support".into(),
        ));
    }
    let p_hat = hits as f64 / n_pilot as f64;
    let p_se = (p_hat * (1.0 - p_hat) / n_pilot as f64).sqrt();
    if p_se > 0.5 * p_hat {
        return Err(CloudError::RestrictionMass(format!(
            "hit fraction {p_hat:.4} +- {p_se:.4} is too uncertain to budget the soup"
        )));
    }
    // expected X contribution per bucket per cloud at intensity c
    let bucket_means: Vec<f64> =
        bucket_sums.iter().map(|s| c * total_mass * s / n_pilot as f64).collect();

    let descriptor = format!("{f_region:?}");
    let sqrt_n = (n_clouds as f64).sqrt();
    let rows: Vec<Result<(f64, f64), CloudError>> = run_tasks(n_replicas, workers, |k| {
        let mut y_sum = 0.0;
        let mut x_sum = 0.0;
        for j in 0..n_clouds {
            let base = k as u64 * REPLICA_STREAM_STRIDE + j as u64 * CLOUD_STREAM_STRIDE;
            let mut control = RngStream { seed, stream: base }.rng();
            let count: f64 = Poisson::new(mean_count)
                .map_err(|e| CloudError::Config(format!("count distribution: {e}")))?
                .sample(&mut control);
            let count = count as u64;
            if count + 2 >= CLOUD_STREAM_STRIDE {
                return Err(CloudError::Budget(format!(
                    "cloud of {count} loops exceeds the reserved stream band"
                )));
            }
            let mut buckets = [0.0f64; LIFETIME_BUCKETS];
            for i in 0..count {
                let draw = sample_soup_loop(
                    spec,
                    &mut control,
                    RngStream { seed, stream: base + 1 + i },
                )?;
                if !hits_region(&draw.path, support) {
                    continue;
                }
                let occ = occupation_time(&draw.path, f_region);
                y_sum += draw.sign * occ;
                buckets[lifetime_bucket(draw.lifetime)] += occ;
            }
            for (got, center) in buckets.iter().zip(&bucket_means) {
                x_sum += got - center;
            }
        }
        Ok((y_sum / sqrt_n, x_sum / sqrt_n))
    });

    let mut y = Vec::with_capacity(n_replicas);
    let mut x_centered = Vec::with_capacity(n_replicas);
    for row in rows {
        let (yv, xv) = row?;
        y.push(FluctuationSample {
            value: yv,
            n_clouds,
            f_descriptor: descriptor.clone(),
        });
        x_centered.push(FluctuationSample {
            value: xv,
            n_clouds,
            f_descriptor: descriptor.clone(),
        });
    }
    // the f x f self-integral overlaps, so use the singular-pair preset
    let variance_target =
        c * quad_green_power(f_region, f_region, 2, &QuadratureSpec::singular())?.value;
    Ok(LoopSoupReport {
        y,
        x_centered,
        total_mass,
        restricted_mass: total_mass * p_hat,
        restricted_mass_se: total_mass * p_se,
        variance_target,
    })
}

//! Small statistical helpers shared by the samplers' distribution tests and
//! the cloud experiments: streaming moments, Kolmogorov-Smirnov distances,
//! and kurtosis.

/// Streaming mean/variance accumulator (Welford), mergeable so parallel
/// tasks can combine partial results in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 until two samples arrive.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// One-sample Kolmogorov-Smirnov distance against the uniform law on [0, 1].
/// Values outside [0, 1] are clamped; the input need not be sorted.
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut xs: Vec<f64> = samples.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((x - lo).abs()).max((hi - x).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        // Consume the whole tied block on both sides before comparing the
        // empirical CDFs, otherwise atoms shared by the two samples inflate d.
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] == t {
            i += 1;
        }
        while j < m && ys[j] == t {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(gap);
    }
    d
}

/// True when a one-sample KS distance is consistent with the hypothesized
/// law at significance 0.01 (asymptotic critical value 1.628 / sqrt(n)).
pub fn ks_uniform_ok(d: f64, n: usize) -> bool {
    d * (n as f64).sqrt() < 1.628
}

/// True when a two-sample KS distance is consistent with equality in law at
/// significance 0.01.
pub fn ks_two_sample_ok(d: f64, n: usize, m: usize) -> bool {
    let scale = ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    d < 1.628 * scale
}

/// Excess kurtosis (zero for a Gaussian), with the small-sample bias left
/// in; callers use it as a relative diagnostic.
pub fn excess_kurtosis(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

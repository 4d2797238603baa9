//! One-dimensional Gauss-Legendre quadrature.
//!
//! Nodes and weights are generated once per order by Newton iteration on the
//! Legendre polynomial and cached. Orders up to 64 are plenty for the smooth
//! panel integrands in this crate; endpoint-singular integrands are handled
//! by the callers with graded panels.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::Mutex;

/// Nodes and weights on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

static RULES: Lazy<Mutex<HashMap<usize, GaussRule>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build_rule(n: usize) -> GaussRule {
    assert!(n >= 2, "gauss rule needs at least 2 nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
pub fn gauss<F: FnMut(f64) -> f64>(n: usize, a: f64, b: f64, mut f: F) -> f64 {
    let rule = {
        let mut cache = RULES.lock().unwrap();
        cache.entry(n).or_insert_with(|| build_rule(n)).clone()
    };
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// Integrate over [a, b] split into panels that shrink geometrically toward
/// `a` (ratio 1/2), for integrands with an integrable singularity or a sharp
/// feature at the left endpoint. `levels` panels are used.
pub fn gauss_graded_left<F: FnMut(f64) -> f64>(
    n: usize,
    a: f64,
    b: f64,
    levels: usize,
    mut f: F,
) -> f64 {
    let len = b - a;
    let mut total = 0.0;
    let mut hi = b;
    for k in 1..=levels {
        let lo = if k == levels {
            a
        } else {
            a + len * 0.5f64.powi(k as i32)
        };
        total += gauss(n, lo, hi, &mut f);
        hi = lo;
    }
    total
}

/// Mirror of [`gauss_graded_left`] with the grading toward `b`.
pub fn gauss_graded_right<F: FnMut(f64) -> f64>(
    n: usize,
    a: f64,
    b: f64,
    levels: usize,
    mut f: F,
) -> f64 {
    gauss_graded_left(n, 0.0, b - a, levels, |t| f(b - t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        // 8-point rule is exact through degree 15.
        let val = gauss(8, -1.0, 2.0, |x| 3.0 * x * x * x - x + 2.0);
        let exact = |x: f64| 0.75 * x.powi(4) - 0.5 * x * x + 2.0 * x;
        assert_relative_eq!(val, exact(2.0) - exact(-1.0), epsilon = 1e-13);
    }

    #[test]
    fn integrates_smooth_transcendental() {
        let val = gauss(32, 0.0, std::f64::consts::PI, f64::sin);
        assert_relative_eq!(val, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn graded_panels_handle_log_singularity() {
        // int_0^1 ln(x) dx = -1
        let val = gauss_graded_left(32, 0.0, 1.0, 48, f64::ln);
        assert_relative_eq!(val, -1.0, epsilon = 1e-12);
        // int_0^1 (1-x) ln(1-x) dx = -1/4, graded to the right; the endpoint
        // guard is the idiom every singular integrand needs, because panel
        // nodes can round onto the singular endpoint itself
        let val = gauss_graded_right(32, 0.0, 1.0, 48, |x| {
            if x >= 1.0 {
                0.0
            } else {
                (1.0 - x) * (1.0 - x).ln()
            }
        });
        assert_relative_eq!(val, -0.25, epsilon = 1e-12);
    }

    #[test]
    fn high_order_rules_stay_stable() {
        let val = gauss(64, 0.0, 1.0, |x| (-x * x).exp());
        assert_relative_eq!(val, 0.746824132812427, epsilon = 1e-13);
    }
}

//! Small numerical kernels shared by the rest of the crate.

use statrs::function::gamma;

/// `ln(sum(exp(x)))` with the usual max shift.
///
/// Entries equal to `-inf` contribute nothing; an all `-inf` input returns `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// `ln N!`, exact for the first few values and via `ln Γ` beyond.
pub fn ln_factorial(n: u64) -> f64 {
    const SMALL: [f64; 2] = [0.0, 0.0];
    if n < 2 {
        return SMALL[n as usize];
    }
    if n <= 20 {
        let mut p: u64 = 1;
        for k in 2..=n {
            p *= k;
        }
        return (p as f64).ln();
    }
    ln_gamma(n as f64 + 1.0)
}

/// Digamma `ψ(x)`.
pub fn digamma(x: f64) -> f64 {
    gamma::digamma(x)
}

/// Remainder of Stirling's formula, `ln Γ(x+1) - (x + 1/2) ln x + x - ln √(2π)`.
///
/// Uses the asymptotic series above `x = 15`, where direct evaluation would
/// cancel away the last digits, and direct evaluation below.
pub fn stirling_remainder(x: f64) -> f64 {
    if x >= 15.0 {
        // Bernoulli terms B_{2k} / (2k (2k-1) x^{2k-1})
        const COEFFS: [f64; 7] = [
            1.0 / 12.0,
            -1.0 / 360.0,
            1.0 / 1260.0,
            -1.0 / 1680.0,
            1.0 / 1188.0,
            -691.0 / 360360.0,
            1.0 / 156.0,
        ];
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let mut term = inv;
        let mut sum = 0.0;
        for c in COEFFS {
            sum += c * term;
            term *= inv2;
        }
        sum
    } else {
        ln_gamma(x + 1.0) - (x + 0.5) * x.ln() + x - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule mapped onto `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(points: usize) -> Self {
        let (nodes, weights) = gauss_legendre(points);
        Self { nodes, weights }
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    /// Iterate `(x, w)` over `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    /// Integrate `f` over `[lo, hi]` split at the given interior breakpoints.
    pub fn integrate_split<F: FnMut(f64) -> f64>(
        &self,
        lo: f64,
        hi: f64,
        breaks: &[f64],
        mut f: F,
    ) -> f64 {
        let cuts = segment_cuts(lo, hi, breaks);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            for (x, wt) in self.mapped(w[0], w[1]) {
                total += wt * f(x);
            }
        }
        total
    }
}

/// Sorted, deduplicated cut points `lo = c0 < c1 < ... < ck = hi`.
pub fn segment_cuts(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    let scale = (hi - lo).abs().max(1.0);
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * scale);
    cuts
}

/// Ordinary least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Elementary symmetric polynomials `e_0..e_k` of `ys`.
pub fn elementary_symmetric(ys: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; ys.len() + 1];
    e[0] = 1.0;
    for (i, &y) in ys.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += y * e[k - 1];
        }
    }
    e
}

/// Falling factorial `n (n-1) ... (n-k+1)` as a float.
pub fn falling_factorial(n: f64, k: usize) -> f64 {
    (0..k).map(|j| n - j as f64).product()
}

/// `k!` as a float.
pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_handles_neg_infinity() {
        assert_eq!(
            logsumexp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        let v = logsumexp(&[0.0, f64::NEG_INFINITY]);
        assert!(v.abs() < 1e-15);
        let v = logsumexp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::new(8);
        // degree 15 is the limit for 8 points
        let v = rule.integrate_split(-1.0, 2.0, &[], |x| x.powi(15));
        let exact = (2f64.powi(16) - 1.0) / 16.0;
        assert!((v - exact).abs() < 1e-10 * exact);
        let (_, w) = gauss_legendre(64);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn split_integration_is_exact_for_step_functions() {
        let rule = GaussRule::new(3);
        let v = rule.integrate_split(-5.0, 5.0, &[-1.0, 1.0], |x| {
            if x.abs() < 1.0 {
                -1.0
            } else {
                0.0
            }
        });
        assert!((v + 2.0).abs() < 1e-14);
    }

    #[test]
    fn stirling_remainder_branches_agree() {
        let x = 15.0;
        let direct =
            ln_gamma(x + 1.0) - (x + 0.5) * x.ln() + x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((direct - stirling_remainder(x)).abs() < 1e-13);
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-15);
        assert!((ln_factorial(30) - ln_gamma(31.0)).abs() < 1e-12);
    }

    #[test]
    fn elementary_symmetric_matches_expansion() {
        // (t+1)(t+2)(t+3) = t^3 + 6t^2 + 11t + 6
        let e = elementary_symmetric(&[1.0, 2.0, 3.0]);
        assert_eq!(e, vec![1.0, 6.0, 11.0, 6.0]);
    }
}

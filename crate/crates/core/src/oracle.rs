//! Exact and brute-force reference values: hard rods in closed form, direct
//! quadrature of small partition functions, Poisson, grand-canonical weights
//! and Fourier inversion of the particle-number distribution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cluster_coeffs::{ClusterTable, CoefficientMode};
use crate::error::{Error, Result};
use crate::integrate::{integrate_pairs, Domain, IntegrationConfig, Scheme};
use crate::numerics::{ln_factorial, logsumexp};
use crate::potentials::PairPotential;
use crate::region::SimulationRegion;

pub const N_QUAD_MAX_1D: usize = 6;
pub const N_QUAD_MAX_2D: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    CharFnInversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub method: OracleMethod,
    pub error: f64,
    pub seed: Option<u64>,
}

impl OracleResult {
    fn exact(value: f64) -> Self {
        Self {
            value,
            method: OracleMethod::ClosedForm,
            error: 0.0,
            seed: None,
        }
    }
}

/// `log Z(N)` for `N` hard rods of length `a` with centres in an interval of
/// length `l`; `-inf` when they cannot fit.
pub fn tonks_log_z(n: u64, l: f64, a: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let free = l - (n as f64 - 1.0) * a;
    if free <= 0.0 {
        return f64::NEG_INFINITY;
    }
    n as f64 * free.ln() - ln_factorial(n)
}

/// Infinite-volume hard-rod pressure `βp = ρ / (1 - ρa)`.
pub fn tonks_pressure(rho: f64, a: f64) -> f64 {
    rho / (1.0 - rho * a)
}

/// Infinite-volume hard-rod chemical potential `βμ` at density `ρ`.
pub fn tonks_beta_mu(rho: f64, a: f64) -> f64 {
    let x = rho * a / (1.0 - rho * a);
    (rho / (1.0 - rho * a)).ln() + x
}

/// `(1/N!) ∫_{Λ^N} e^{-βH}` by direct integration.
pub fn quadrature_log_z(
    potential: &PairPotential,
    beta: f64,
    region: &SimulationRegion,
    n: usize,
    cfg: &IntegrationConfig,
) -> Result<OracleResult> {
    let cap = if region.dim == 1 {
        N_QUAD_MAX_1D
    } else {
        N_QUAD_MAX_2D
    };
    if n > cap {
        return Err(Error::Capacity(format!(
            "direct integration limited to N <= {cap} in d={}",
            region.dim
        )));
    }
    let ideal = n as f64 * region.volume().ln() - ln_factorial(n as u64);
    if n < 2 || potential.is_zero() {
        return Ok(OracleResult::exact(ideal));
    }
    let est = integrate_pairs(
        potential,
        beta,
        n,
        Domain::Box(*region),
        true,
        cfg,
        0x4000 + n as u64,
        |f| f.iter().map(|x| 1.0 + x).product(),
    )?;
    if !(est.value > 0.0) {
        return Err(Error::Integration(format!(
            "non-positive configuration integral {}",
            est.value
        )));
    }
    let rel = est.error / est.value;
    if cfg.scheme == Scheme::TensorQuadrature && rel > cfg.tolerance {
        return Err(Error::Integration(format!(
            "relative error {rel:.3e} above tolerance"
        )));
    }
    let (method, seed) = match cfg.scheme {
        Scheme::TensorQuadrature if region.dim == 1 => (OracleMethod::Quadrature, None),
        _ => (OracleMethod::MonteCarlo, Some(cfg.seed)),
    };
    Ok(OracleResult {
        value: est.value.ln() - ln_factorial(n as u64),
        method,
        error: rel,
        seed,
    })
}

/// Poisson mass function.
pub fn poisson_pmf(lambda: f64, n: u64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * lambda.ln() - lambda - ln_factorial(n)).exp()
}

/// Grand-canonical particle-number distribution over `N = 0..log_z.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberDistribution {
    pub probabilities: Vec<f64>,
    /// Log of the truncated grand partition function.
    pub log_xi: f64,
    /// Bound on the mass beyond the last retained `N`.
    pub truncation: f64,
}

impl NumberDistribution {
    /// Probability of `n`; past the retained range the value is 0 with
    /// [`Self::truncation`] as its upper bound.
    pub fn prob(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// `e^{βμN} Z(N) / Ξ` from a table of `log Z(N)`.
pub fn exact_prob(log_z: &[f64], beta_mu: f64, truncation: f64) -> Result<NumberDistribution> {
    if log_z.is_empty() {
        return Err(Error::Argument("empty log Z table".into()));
    }
    let w: Vec<f64> = log_z
        .iter()
        .enumerate()
        .map(|(n, lz)| beta_mu * n as f64 + lz)
        .collect();
    let log_xi = logsumexp(&w);
    let probabilities = w.iter().map(|x| (x - log_xi).exp()).collect();
    Ok(NumberDistribution {
        probabilities,
        log_xi,
        truncation,
    })
}

/// Exact hard-rod `log Z(N)` for `N = 0..=n_max`.
pub fn tonks_log_z_table(l: f64, a: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max as u64).map(|n| tonks_log_z(n, l, a)).collect()
}

/// Recover `p_N` from the characteristic function `φ(t) = Σ p_N e^{itN}`
/// sampled on the `M`-point grid `t_j = 2πj/M`, `M` = support size.
pub fn char_fn_invert(probabilities: &[f64], n_target: usize) -> f64 {
    let m = probabilities.len();
    if n_target >= m {
        return 0.0;
    }
    let tau = 2.0 * std::f64::consts::PI / m as f64;
    let mut acc = 0.0;
    for j in 0..m {
        let t = tau * j as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, p) in probabilities.iter().enumerate() {
            let ang = t * n as f64;
            re += p * ang.cos();
            im += p * ang.sin();
        }
        // Re[e^{-itÑ} φ(t)]
        let ang = t * n_target as f64;
        acc += re * ang.cos() + im * ang.sin();
    }
    acc / m as f64
}

/// Hard-rod finite-volume coefficients read off the exact `log Z`:
/// `(log Z(N) - log(L^N/N!))/N = ln(1 - (N-1)a/L)` expanded over falling
/// factorials of `N - 1` through Stirling numbers of the second kind.
pub fn tonks_series_table(beta: f64, l: f64, a: f64, n_max: usize) -> Result<ClusterTable> {
    let region = SimulationRegion::new(1, l)?;
    if !(a >= 0.0) || (n_max as f64) * a >= l {
        return Err(Error::Domain(format!(
            "series needs n_max·a < L, got {n_max}·{a} vs {l}"
        )));
    }
    let x = a / l;
    let mut values = Vec::with_capacity(n_max);
    if a == 0.0 {
        return Ok(ClusterTable::zeros(
            beta,
            Some(region),
            CoefficientMode::OracleFitted,
            n_max,
        ));
    }
    // s[j] = S2(k, j) x^k, advanced in k.
    let mut s = vec![0.0; n_max + 1];
    s[0] = 1.0;
    let mut sums = vec![0.0; n_max + 1];
    for k in 1..100_000usize {
        for j in (1..=n_max).rev() {
            s[j] = x * (j as f64 * s[j] + s[j - 1]);
        }
        s[0] = 0.0;
        let mut small = k >= n_max;
        for j in 1..=n_max.min(k) {
            let t = s[j] / k as f64;
            sums[j] += t;
            if t.abs() > 1e-18 * sums[j].abs() {
                small = false;
            }
        }
        if small {
            break;
        }
    }
    for (n, s) in sums.iter().enumerate().skip(1) {
        values.push(-(n as f64 + 1.0) * l.powi(n as i32) * s);
    }
    ClusterTable::new(
        beta,
        Some(region),
        CoefficientMode::OracleFitted,
        values,
        vec![0.0; n_max],
    )
}

/// Irreducible coefficients from a least-squares polynomial fit of
/// `βp/ρ - 1 = Σ c_n ρ^n` on Chebyshev nodes in `(0, rho_max]`, using
/// `β_n = -(n+1) c_n / n`.
pub fn virial_from_equation_of_state<F: Fn(f64) -> f64>(
    compressibility_excess: F,
    rho_max: f64,
    degree: usize,
    n_max: usize,
) -> Result<Vec<f64>> {
    if n_max > degree {
        return Err(Error::Argument("fit degree must cover n_max".into()));
    }
    let samples = 4 * degree + 8;
    let mut a = DMatrix::<f64>::zeros(samples, degree);
    let mut y = DVector::<f64>::zeros(samples);
    for i in 0..samples {
        let c = (std::f64::consts::PI * (i as f64 + 0.5) / samples as f64).cos();
        let t = 0.5 * (1.0 + c);
        let rho = t * rho_max;
        y[i] = compressibility_excess(rho);
        for d in 1..=degree {
            a[(i, d - 1)] = t.powi(d as i32);
        }
    }
    let coef = a
        .svd(true, true)
        .solve(&y, 0.0)
        .map_err(|e| Error::Fit(e.to_string()))?;
    Ok((1..=n_max)
        .map(|n| {
            let c = coef[n - 1] / rho_max.powi(n as i32);
            -(n as f64 + 1.0) * c / n as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tonks_examples() {
        assert_abs_diff_eq!(tonks_log_z(1, 10.0, 1.0), 10f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(tonks_log_z(2, 10.0, 1.0), 40.5f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            tonks_log_z(3, 10.0, 1.0),
            (512.0f64 / 6.0).ln(),
            epsilon = 1e-14
        );
        assert_eq!(tonks_log_z(12, 10.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn quadrature_reproduces_tonks() {
        let rod = PairPotential::hard_core(1, 1.0).unwrap();
        let cfg = IntegrationConfig::default();
        for (n, l) in [(2usize, 10.0), (3, 10.0), (3, 20.0), (4, 7.5)] {
            let r = SimulationRegion::new(1, l).unwrap();
            let q = quadrature_log_z(&rod, 1.0, &r, n, &cfg).unwrap();
            assert_abs_diff_eq!(q.value, tonks_log_z(n as u64, l, 1.0), epsilon = 1e-8);
        }
    }

    #[test]
    fn poisson_mass() {
        assert_abs_diff_eq!(poisson_pmf(5.0, 5), 0.1754673697678507, epsilon = 1e-7);
        let log_z: Vec<f64> = (0..=60u64)
            .map(|n| n as f64 * 100f64.ln() - ln_factorial(n))
            .collect();
        let d = exact_prob(&log_z, 0.05f64.ln(), 0.0).unwrap();
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.prob(5), poisson_pmf(5.0, 5), epsilon = 1e-12);
    }

    #[test]
    fn inversion_of_point_mass_and_poisson() {
        let mut p = vec![0.0; 8];
        p[3] = 1.0;
        for n in 0..8 {
            assert_abs_diff_eq!(
                char_fn_invert(&p, n),
                if n == 3 { 1.0 } else { 0.0 },
                epsilon = 1e-14
            );
        }
        let p: Vec<f64> = (0..=60).map(|n| poisson_pmf(5.0, n)).collect();
        for n in [0, 5, 11, 30] {
            assert_abs_diff_eq!(char_fn_invert(&p, n), p[n], epsilon = 1e-10);
        }
    }

    #[test]
    fn series_table_reproduces_log_z() {
        let (l, a) = (50.0, 1.0);
        let t = tonks_series_table(1.0, l, a, 12).unwrap();
        // 2L ln(1 - a/L) at n = 1
        assert_abs_diff_eq!(t.values[0], 2.0 * l * (1.0 - a / l).ln(), epsilon = 1e-12);
        for n in 1..=12u64 {
            let mut s = 0.0;
            for k in 1..=12 {
                s += crate::cluster_coeffs::p_poly(n, l, k) * t.values[k - 1] / (k as f64 + 1.0);
            }
            let lz = n as f64 * l.ln() - ln_factorial(n) + n as f64 * s;
            assert_abs_diff_eq!(lz, tonks_log_z(n, l, a), epsilon = 1e-10);
        }
    }

    #[test]
    fn equation_of_state_fit_gives_virial_coefficients() {
        let b = virial_from_equation_of_state(|r| tonks_pressure(r, 1.0) / r - 1.0, 0.1, 14, 5)
            .unwrap();
        for (n, v) in b.iter().enumerate() {
            let n = n as f64 + 1.0;
            assert_abs_diff_eq!(*v, -(n + 1.0) / n, epsilon = 1e-6);
        }
    }

    #[test]
    fn canonical_pressure_matches_equation_of_state() {
        // βp_N = ∂_L log Z(N); approaches ρ/(1-ρa) at ρ = N/L.
        let (n, l, a) = (300u64, 10_000.0, 1.0);
        let h = 1e-3;
        let p = (tonks_log_z(n, l + h, a) - tonks_log_z(n, l - h, a)) / (2.0 * h);
        let rho = n as f64 / l;
        assert!((p - tonks_pressure(rho, a)).abs() / p < 1e-3);
    }
}

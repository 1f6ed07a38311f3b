//! Canonical and grand-canonical thermodynamics from a cluster table.
//!
//! Everything is carried in log domain. Series are truncated at the table's
//! `n_max` and return their tail bound alongside the value.

use serde::{Deserialize, Serialize};

use crate::cluster_coeffs::{p_poly, ClusterTable};
use crate::error::{Error, Result};
use crate::numerics::{
    digamma, elementary_symmetric, factorial, ln_factorial, ln_gamma, logsumexp, stirling_remainder,
};
use crate::potentials::check_condition_star;
use crate::region::SimulationRegion;

/// Floor on the grand-canonical term bound that fixes the particle cutoff.
pub const LOG_TERM_FLOOR: f64 = -30.0;
/// Minimum particle-number cap.
pub const N_CAP_FLOOR: usize = 128;
/// Hard limit on the grand-sum cutoff.
pub const N_GRAND_MAX: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StirlingPolicy {
    ExactLnFactorial,
    GammaAsymptotic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warnings {
    pub condition_star: bool,
    /// The table carries no decay constants, so the tail bound is unknown.
    pub tail_unknown: bool,
}

impl Warnings {
    pub fn any(&self) -> bool {
        self.condition_star || self.tail_unknown
    }

    pub fn label(&self) -> String {
        let mut v = Vec::new();
        if self.condition_star {
            v.push("condition-star");
        }
        if self.tail_unknown {
            v.push("tail-unknown");
        }
        v.join("|")
    }
}

/// A truncated series value with its tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub warnings: Warnings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyModel {
    pub beta: f64,
    pub region: SimulationRegion,
    pub table: ClusterTable,
    pub stirling: StirlingPolicy,
    pub stability_b: f64,
    /// Regularity constant `C(β)` and convergence threshold `c0` for condition (★).
    pub c_beta: f64,
    pub c0: f64,
}

impl FreeEnergyModel {
    pub fn new(beta: f64, region: SimulationRegion, table: ClusterTable) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Argument(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if (table.beta - beta).abs() > 1e-12 * beta {
            return Err(Error::Argument(format!(
                "table beta {} differs from model beta {beta}",
                table.beta
            )));
        }
        if let Some(r) = table.region {
            if r != region {
                return Err(Error::Argument(
                    "table region differs from model region".into(),
                ));
            }
        }
        Ok(Self {
            beta,
            region,
            table,
            stirling: StirlingPolicy::ExactLnFactorial,
            stability_b: 0.0,
            c_beta: 0.0,
            c0: 1.0,
        })
    }

    /// The free gas: an all-zero table.
    pub fn ideal(beta: f64, region: SimulationRegion) -> Self {
        let t = ClusterTable::zeros(
            beta,
            Some(region),
            crate::cluster_coeffs::CoefficientMode::OracleFitted,
            1,
        );
        Self::new(beta, region, t).expect("consistent ideal model")
    }

    pub fn with_condition(mut self, c_beta: f64, c0: f64) -> Self {
        self.c_beta = c_beta;
        self.c0 = c0;
        self
    }

    pub fn with_stability_b(mut self, b: f64) -> Self {
        self.stability_b = b;
        self
    }

    pub fn with_stirling(mut self, policy: StirlingPolicy) -> Self {
        self.stirling = policy;
        self
    }

    pub fn volume(&self) -> f64 {
        self.region.volume()
    }

    fn warnings_at(&self, rho: f64) -> Warnings {
        Warnings {
            condition_star: !check_condition_star(rho, self.c_beta, self.c0).holds,
            tail_unknown: self.table.tail.is_none() && !self.table.is_zero(),
        }
    }

    /// `Σ_{n > n_max} (n+1)^m C e^{-cn}` or 0 without decay constants.
    fn tail_moment(&self, m: u32) -> f64 {
        match self.table.tail {
            None => 0.0,
            Some(t) if t.rate <= 0.0 => f64::INFINITY,
            Some(t) => {
                let mut s = 0.0;
                for n in self.table.n_max() + 1..self.table.n_max() + 400 {
                    s += (n as f64 + 1.0).powi(m as i32) * t.prefactor * (-t.rate * n as f64).exp();
                }
                s
            }
        }
    }
}

/// `ρ(ρ - 1/|Λ|)...(ρ - n/|Λ|)` when `n/|Λ| < ρ`, else 0.
pub fn script_p_poly(rho: f64, volume: f64, n: usize) -> f64 {
    if rho <= n as f64 / volume {
        return 0.0;
    }
    (0..=n).map(|k| rho - k as f64 / volume).product()
}

/// `m`-th derivative of [`script_p_poly`] on its active branch:
/// `m! e_{n+1-m}(ρ - k/|Λ|, k = 0..n)`.
pub fn script_p_derivative(rho: f64, volume: f64, n: usize, m: usize) -> f64 {
    if rho <= n as f64 / volume || m > n + 1 {
        return 0.0;
    }
    let ys: Vec<f64> = (0..=n).map(|k| rho - k as f64 / volume).collect();
    factorial(m) * elementary_symmetric(&ys)[n + 1 - m]
}

/// `F(n) = P_{N,|Λ|}(n) B(n) / (n+1)`.
pub fn f_coefficient(model: &FreeEnergyModel, n_particles: u64, n: usize) -> Result<f64> {
    let b = model.table.get(n)?;
    Ok(p_poly(n_particles, model.volume(), n) * b / (n as f64 + 1.0))
}

/// `log Z(N) = log(|Λ|^N / N!) + N Σ_n F(n)`.
pub fn log_z_canonical(model: &FreeEnergyModel, n_particles: u64) -> SeriesValue {
    let vol = model.volume();
    let nf = n_particles as f64;
    let mut s = 0.0;
    let top = model
        .table
        .n_max()
        .min(n_particles.saturating_sub(1) as usize);
    for n in 1..=top {
        s += p_poly(n_particles, vol, n) * model.table.values[n - 1] / (n as f64 + 1.0);
    }
    let exact = n_particles <= model.table.n_max() as u64 + 1;
    let tail_bound = if exact {
        0.0
    } else {
        nf * model.tail_moment(0)
    };
    let mut warnings = model.warnings_at(nf / vol);
    warnings.tail_unknown &= !exact;
    SeriesValue {
        value: nf * vol.ln() - ln_factorial(n_particles) + nf * s,
        tail_bound,
        warnings,
    }
}

/// Finite-volume canonical free energy `-(β|Λ|)^{-1} log Z(N)`.
pub fn free_energy_f(model: &FreeEnergyModel, n_particles: u64) -> SeriesValue {
    let lz = log_z_canonical(model, n_particles);
    let s = model.beta * model.volume();
    SeriesValue {
        value: -lz.value / s,
        tail_bound: lz.tail_bound / s,
        warnings: lz.warnings,
    }
}

fn check_density(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!(
            "density must lie in (0, 1), got {rho}"
        )));
    }
    Ok(())
}

/// Continuous free energy `𝓕(ρ)`.
pub fn cal_f(model: &FreeEnergyModel, rho: f64) -> Result<SeriesValue> {
    cal_f_derivative(model, rho, 0)
}

/// `m`-th derivative of `𝓕` in `ρ`, term by term.
pub fn cal_f_derivative(model: &FreeEnergyModel, rho: f64, m: usize) -> Result<SeriesValue> {
    check_density(rho)?;
    let vol = model.volume();
    let entropy = match m {
        0 => rho * (rho.ln() - 1.0),
        1 => rho.ln(),
        _ => {
            let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * factorial(m - 2) / rho.powi(m as i32 - 1)
        }
    };
    let mut interaction = 0.0;
    for n in 1..=model.table.n_max() {
        let b = model.table.values[n - 1];
        if b != 0.0 {
            interaction += script_p_derivative(rho, vol, n, m) * b / (n as f64 + 1.0);
        }
    }
    // Each derivative of ρ^{n+1} costs at most a factor (n+1)/ρ.
    let tail = rho.powi(1 - m as i32) * model.tail_moment(m as u32);
    Ok(SeriesValue {
        value: (entropy - interaction) / model.beta,
        tail_bound: tail / model.beta,
        warnings: model.warnings_at(rho),
    })
}

/// Stirling correction `S(ρ) = (1/|Λ|) ln[(ρ|Λ|)! (e/(ρ|Λ|))^{ρ|Λ|}]`.
pub fn stirling_s(rho: f64, volume: f64, policy: StirlingPolicy) -> f64 {
    let x = rho * volume;
    match policy {
        StirlingPolicy::ExactLnFactorial => (ln_gamma(x + 1.0) - x * x.ln() + x) / volume,
        StirlingPolicy::GammaAsymptotic => stirling_parts(rho, volume).total(),
    }
}

/// `S` split as `(ln√(2πx) + r(x))/|Λ|` with Stirling remainder `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StirlingParts {
    pub volume: f64,
    pub log_sqrt: f64,
    pub remainder: f64,
}

impl StirlingParts {
    pub fn total(&self) -> f64 {
        (self.log_sqrt + self.remainder) / self.volume
    }

    pub fn lower(&self) -> f64 {
        self.log_sqrt / self.volume
    }

    /// `ln√(2πx)/|Λ| + 1/(12 x |Λ|)`.
    pub fn upper(&self, x: f64) -> f64 {
        self.lower() + 1.0 / (12.0 * x * self.volume)
    }
}

pub fn stirling_parts(rho: f64, volume: f64) -> StirlingParts {
    let x = rho * volume;
    StirlingParts {
        volume,
        log_sqrt: 0.5 * (2.0 * std::f64::consts::PI * x).ln(),
        remainder: stirling_remainder(x),
    }
}

/// `dS/dρ = ψ(ρ|Λ| + 1) - ln(ρ|Λ|)`.
pub fn stirling_s_prime(rho: f64, volume: f64) -> f64 {
    let x = rho * volume;
    digamma(x + 1.0) - x.ln()
}

/// Grand-canonical weights `βμN + log Z(N)` for `N = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandSum {
    pub beta_mu: f64,
    pub log_weights: Vec<f64>,
    pub log_xi: f64,
    /// Bound on the omitted weight `Σ_{N > n_max}`, relative to `Ξ`.
    pub remainder: f64,
    pub tail_bound: f64,
}

impl GrandSum {
    pub fn n_max(&self) -> usize {
        self.log_weights.len() - 1
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.log_weights
            .get(n)
            .map_or(0.0, |w| (w - self.log_xi).exp())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .map(|w| (w - self.log_xi).exp())
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.log_weights
            .iter()
            .enumerate()
            .map(|(n, w)| n as f64 * (w - self.log_xi).exp())
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.log_weights
            .iter()
            .enumerate()
            .map(|(n, w)| (n as f64 - m).powi(2) * (w - self.log_xi).exp())
            .sum()
    }
}

/// Log of the stability bound on the `N`-th grand-canonical term,
/// `N ln(λ_B e/N) - 1/(12N+1) - ln√(2πN)` with `λ_B = e^{β(μ+B)}|Λ|`.
fn log_term_bound(log_lambda_b: f64, n: usize) -> f64 {
    let nf = n as f64;
    nf * (log_lambda_b + 1.0 - nf.ln())
        - 1.0 / (12.0 * nf + 1.0)
        - 0.5 * (2.0 * std::f64::consts::PI * nf).ln()
}

/// Particle cutoff for the grand sum at chemical potential `mu`, and the bound
/// on the omitted weight.
pub fn n_max_particles(model: &FreeEnergyModel, mu: f64) -> Result<(usize, f64)> {
    let log_lambda_b = model.beta * (mu + model.stability_b) + model.volume().ln();
    let lambda_b = log_lambda_b.exp();
    let cap = ((10.0 * lambda_b).ceil().min(N_GRAND_MAX as f64) as usize).max(N_CAP_FLOOR);
    let mut n = 1usize;
    loop {
        if n as f64 > lambda_b && log_term_bound(log_lambda_b, n) < LOG_TERM_FLOOR {
            break;
        }
        n += 1;
        if n > cap {
            return Err(Error::Capacity(format!(
                "particle cutoff exceeds cap {cap} at mu={mu}"
            )));
        }
    }
    // Σ_{N > n} λ^N/N! <= λ^{n+1}/(n+1)! / (1 - λ/(n+2))
    let next = (n as f64 + 1.0) * log_lambda_b - ln_factorial(n as u64 + 1);
    let remainder = next.exp() / (1.0 - lambda_b / (n as f64 + 2.0));
    Ok((n, remainder))
}

pub fn grand_sum(model: &FreeEnergyModel, mu: f64) -> Result<GrandSum> {
    let (n_max, rem) = n_max_particles(model, mu)?;
    grand_sum_to(model, mu, n_max, rem)
}

/// Grand sum over an explicit range `0..=n_max`.
pub fn grand_sum_to(
    model: &FreeEnergyModel,
    mu: f64,
    n_max: usize,
    remainder: f64,
) -> Result<GrandSum> {
    let beta_mu = model.beta * mu;
    let mut log_weights = Vec::with_capacity(n_max + 1);
    let mut tails = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max as u64 {
        let lz = log_z_canonical(model, n);
        log_weights.push(beta_mu * n as f64 + lz.value);
        tails.push(lz.tail_bound);
    }
    let log_xi = logsumexp(&log_weights);
    if !log_xi.is_finite() {
        return Err(Error::Convergence(format!(
            "grand partition function not finite at mu={mu}"
        )));
    }
    // Σ_N w_N (e^{t_N} - 1) / Ξ with per-N log Z tails.
    let tail_bound = log_weights
        .iter()
        .zip(&tails)
        .map(|(w, t)| (w - log_xi).exp() * t.exp_m1())
        .sum();
    Ok(GrandSum {
        beta_mu,
        log_weights,
        log_xi,
        remainder: remainder / log_xi.exp().max(1.0),
        tail_bound,
    })
}

/// Finite-volume pressure `(β|Λ|)^{-1} log Ξ(μ)` with its truncation bound.
pub fn pressure_grand(model: &FreeEnergyModel, mu: f64) -> Result<SeriesValue> {
    let g = grand_sum(model, mu)?;
    let s = model.beta * model.volume();
    let rho = g.mean() / model.volume();
    Ok(SeriesValue {
        value: g.log_xi / s,
        tail_bound: (g.remainder + g.tail_bound) / s,
        warnings: model.warnings_at(rho),
    })
}

//! Precise large deviations, local moderate deviations and the local CLT,
//! with the J/K decomposition of the particle-number probability.

use serde::{Deserialize, Serialize};

use crate::duality::{duality_point, find_mu_tilde, n_star_of, DualityPoint, InfiniteVolume};
use crate::error::{Error, Result};
use crate::numerics::{factorial, logsumexp};
use crate::oracle::NumberDistribution;
use crate::potentials::check_condition_star;
use crate::thermo::{
    cal_f_derivative, grand_sum, log_z_canonical, pressure_grand, script_p_poly, stirling_s,
    FreeEnergyModel,
};

/// Extra derivative orders kept beyond `m(α)` in the error term.
pub const E_EXTRA_ORDERS: usize = 6;

/// Relative allowance for floating-point evaluation in every bound.
pub const ROUNDOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Center {
    /// Floored grand-canonical mean.
    Mean,
    /// Canonical maximiser at `μ0`.
    Maximizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSpec {
    pub alpha: f64,
    pub u: f64,
    pub center: Center,
    pub center_value: u64,
    pub n_tilde: u64,
    pub effective_u: f64,
}

/// Integer deviation `Ñ = center + round(u|Λ|^α)`; `α = 1` centres on `N̄`,
/// `α < 1` on `N*`.
pub fn make_deviation(
    model: &FreeEnergyModel,
    point: &DualityPoint,
    alpha: f64,
    u: f64,
) -> Result<DeviationSpec> {
    if !(0.5..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "alpha must lie in [1/2, 1], got {alpha}"
        )));
    }
    let vol = model.volume();
    let (center, center_value) = if alpha == 1.0 {
        (Center::Mean, point.n_bar)
    } else {
        (Center::Maximizer, point.n_star)
    };
    let scale = vol.powf(alpha);
    let shift = (u * scale).round();
    let n_tilde = center_value as f64 + shift;
    if n_tilde < 0.0 {
        return Err(Error::Range(format!(
            "deviation gives negative particle number {n_tilde}"
        )));
    }
    let cs = check_condition_star(n_tilde / vol, model.c_beta, model.c0);
    if !cs.holds {
        return Err(Error::Regime(format!(
            "density {} outside the convergence window (ratio {:.3})",
            n_tilde / vol,
            cs.ratio
        )));
    }
    Ok(DeviationSpec {
        alpha,
        u,
        center,
        center_value,
        n_tilde: n_tilde as u64,
        effective_u: shift / scale,
    })
}

/// Smallest `m` with `m(1 - α) - 1 > 0`.
pub fn m_alpha(alpha: f64) -> Result<usize> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "m(alpha) needs alpha in [1/2, 1), got {alpha}"
        )));
    }
    let gap = 1.0 - alpha;
    Ok((1..)
        .find(|&m| m as f64 * gap - 1.0 > 1e-12)
        .expect("finite for alpha < 1"))
}

/// `β 𝓕^{(m)}(ρ)`.
fn beta_derivative(model: &FreeEnergyModel, rho: f64, m: usize) -> Result<f64> {
    Ok(model.beta * cal_f_derivative(model, rho, m)?.value)
}

/// `[β𝓕''(ρ*)]^{-1}`.
pub fn variance_d(model: &FreeEnergyModel, rho_star: f64) -> Result<f64> {
    variance_d_alpha(model, rho_star, 0.5, 0.0, Variant::Plain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Plain,
    Plus,
    Minus,
}

/// Moderate-deviation variance with the cubic-and-higher corrections up to
/// order `m(α) - 1`; empty at `α = 1/2`.
pub fn variance_d_alpha(
    model: &FreeEnergyModel,
    rho_star: f64,
    alpha: f64,
    u_eff: f64,
    variant: Variant,
) -> Result<f64> {
    let m_top = m_alpha(alpha)?;
    let vol = model.volume();
    let mut bracket = beta_derivative(model, rho_star, 2)?;
    if m_top > 3 {
        let mut sum = 0.0;
        for m in 3..m_top {
            let g = beta_derivative(model, rho_star, m)?;
            let g = match variant {
                Variant::Plain => g,
                Variant::Plus => g.abs(),
                Variant::Minus => -g.abs(),
            };
            sum += 2.0 * u_eff.powi(m as i32 - 2) * g
                / (factorial(m) * vol.powf((m as f64 - 2.0) * (1.0 - alpha)));
        }
        bracket += sum;
    }
    if !(bracket > 0.0) {
        return Err(Error::Regime(format!(
            "non-positive curvature bracket {bracket} at density {rho_star}"
        )));
    }
    Ok(1.0 / bracket)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerm {
    pub value: f64,
    /// Bound on the orders past the truncation.
    pub tail_bound: f64,
    pub leading: f64,
    pub mu_term: f64,
    /// The tail bound is not small against the leading term.
    pub precision_warning: bool,
}

impl ErrorTerm {
    pub fn total(&self) -> f64 {
        self.value + self.tail_bound
    }
}

/// The error term of the `J` expansion at `N = N* + v|Λ|^α`, with each term
/// taken in absolute value. Orders `m(α)..=m(α)+6` are summed; later orders
/// are bounded exactly for the interaction part (a polynomial) and
/// geometrically for the entropy part.
pub fn error_e(
    model: &FreeEnergyModel,
    alpha: f64,
    v: f64,
    rho_star: f64,
    mu0: f64,
) -> Result<ErrorTerm> {
    let m0 = m_alpha(alpha)?;
    let vol = model.volume();
    let beta = model.beta;
    let gap = 1.0 - alpha;
    let prefactor = beta / vol.powf(m0 as f64 * gap - 1.0);
    let f1 = cal_f_derivative(model, rho_star, 1)?.value;
    let fm = |m: usize| cal_f_derivative(model, rho_star, m).map(|s| s.value);
    let term =
        |m: usize, d: f64| v.powi(m as i32) * d / (factorial(m) * vol.powf((m - m0) as f64 * gap));
    let leading = term(m0, fm(m0)?).abs();
    let mu_term = (v * (mu0 - f1) / vol.powf(1.0 - m0 as f64 * gap - alpha)).abs();
    let m_trunc = m0 + E_EXTRA_ORDERS;
    let mut rest = 0.0;
    for m in m0 + 1..=m_trunc {
        rest += term(m, fm(m)?).abs();
    }
    // Entropy part of order m: (-1)^m (m-2)!/ρ^{m-1}/β, so the terms form a
    // geometric sequence with ratio q = |v| / (ρ |Λ|^{1-α}).
    let q = v.abs() / (rho_star * vol.powf(gap));
    let m_next = m_trunc + 1;
    let entropy_next = term(
        m_next,
        factorial(m_next - 2) / rho_star.powi(m_next as i32 - 1) / beta,
    )
    .abs();
    let entropy_tail = if v == 0.0 {
        0.0
    } else if q < 1.0 {
        entropy_next / (1.0 - q)
    } else {
        f64::INFINITY
    };
    let mut interaction_tail = 0.0;
    let n_top = model.table.n_max() + 1;
    for m in m_next..=n_top {
        let full = fm(m)?;
        let entropy = if m % 2 == 0 { 1.0 } else { -1.0 } * factorial(m - 2)
            / rho_star.powi(m as i32 - 1)
            / beta;
        interaction_tail += term(m, full - entropy).abs();
    }
    let value = prefactor * (leading + mu_term + rest);
    let tail_bound = prefactor * (entropy_tail + interaction_tail);
    Ok(ErrorTerm {
        value,
        tail_bound,
        leading: prefactor * leading,
        mu_term: prefactor * mu_term,
        precision_warning: !(tail_bound < prefactor * leading.max(mu_term)),
    })
}

/// `log J = βμ(N - N_ref) + log Z(N) - log Z(N_ref)`.
pub fn j_ratio(model: &FreeEnergyModel, mu: f64, n: u64, n_ref: u64) -> f64 {
    if n == n_ref {
        return 0.0;
    }
    model.beta * mu * (n as f64 - n_ref as f64) + log_z_canonical(model, n).value
        - log_z_canonical(model, n_ref).value
}

/// The expansion of `log J(N, N*)`: Gaussian exponent, Stirling difference and
/// error term, next to the exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JExpansion {
    pub log_j: f64,
    pub gaussian: f64,
    /// `-|Λ|[S(ρ) - S(ρ*)]`.
    pub stirling: f64,
    /// Interaction terms that switch on between `ρ*` and `ρ`.
    pub branch: f64,
    pub error: ErrorTerm,
}

impl JExpansion {
    pub fn center(&self) -> f64 {
        self.gaussian + self.stirling
    }

    pub fn lower(&self) -> f64 {
        self.center() - self.error.total() - self.branch.abs()
    }

    pub fn upper(&self) -> f64 {
        self.center() + self.error.total() + self.branch.abs()
    }

    pub fn sandwich_holds(&self) -> bool {
        self.lower() <= self.log_j && self.log_j <= self.upper()
    }
}

pub fn j_expansion(
    model: &FreeEnergyModel,
    mu0: f64,
    n_star: u64,
    alpha: f64,
    n: u64,
) -> Result<JExpansion> {
    let vol = model.volume();
    let rho_star = n_star as f64 / vol;
    let rho = n as f64 / vol;
    let v = (n as f64 - n_star as f64) / vol.powf(alpha);
    let d_alpha = variance_d_alpha(model, rho_star, alpha, v, Variant::Plain)?;
    let gaussian = -v * v * vol.powf(2.0 * alpha - 1.0) / (2.0 * d_alpha);
    let stirling = if n == n_star {
        0.0
    } else {
        -vol * (stirling_s(rho, vol, model.stirling) - stirling_s(rho_star, vol, model.stirling))
    };
    let mut branch = 0.0;
    if n > n_star {
        for k in n_star as usize..n as usize {
            if let Ok(b) = model.table.get(k) {
                branch += model.beta * vol * script_p_poly(rho, vol, k) * b / (k as f64 + 1.0);
            }
        }
    }
    let error = error_e(model, alpha, v, rho_star, mu0)?;
    Ok(JExpansion {
        log_j: j_ratio(model, mu0, n, n_star),
        gaussian,
        stirling,
        branch,
        error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub log_k: f64,
    /// `log Σ_N J(N, N_ref)`.
    pub log_sum_j: f64,
}

/// `K(μ, N_ref) = [Σ_N J(N, N_ref)]^{-1}` over the grand sum's range.
pub fn k_normalization(model: &FreeEnergyModel, mu: f64, n_ref: u64) -> Result<Normalization> {
    let g = grand_sum(model, mu)?;
    let log_j: Vec<f64> = (0..=g.n_max() as u64)
        .map(|n| j_ratio(model, mu, n, n_ref))
        .collect();
    let log_sum_j = logsumexp(&log_j);
    Ok(Normalization {
        log_k: -log_sum_j,
        log_sum_j,
    })
}

/// Corrected bounds on `K(μ0, N*)`: `[√(2πD⁺|Λ|)(1 ± E)]^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSandwich {
    pub k: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn k_sandwich(
    model: &FreeEnergyModel,
    mu0: f64,
    n_star: u64,
    alpha: f64,
    v: f64,
) -> Result<KSandwich> {
    let vol = model.volume();
    let rho_star = n_star as f64 / vol;
    let d_plus = variance_d_alpha(model, rho_star, alpha, v, Variant::Plus)?;
    let e = error_e(model, alpha, v, rho_star, mu0)?.total();
    let base = (2.0 * std::f64::consts::PI * d_plus * vol).sqrt();
    let k = k_normalization(model, mu0, n_star)?.log_k.exp();
    let upper = if e < 1.0 {
        1.0 / (base * (1.0 - e))
    } else {
        f64::INFINITY
    };
    Ok(KSandwich {
        k,
        lower: 1.0 / (base * (1.0 + e)),
        upper,
    })
}

/// Probability mass of `K^{-1}` split over the interval decomposition around
/// `N*`: the core `|N - N*| <= v|Λ|^α`, the shell up to `v'|Λ|^δ` (only used
/// when `α <= (2d-1)/2d`), and everything else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMasses {
    pub core: f64,
    pub shell: Option<f64>,
    pub outer: f64,
}

pub fn k_region_masses(
    model: &FreeEnergyModel,
    mu0: f64,
    n_star: u64,
    alpha: f64,
    v: f64,
    delta: f64,
    v_prime: f64,
) -> Result<RegionMasses> {
    let d = model.region.dim as f64;
    let threshold = (2.0 * d - 1.0) / (2.0 * d);
    let use_shell = alpha <= threshold;
    if use_shell && !(delta > threshold) {
        return Err(Error::Argument(format!("delta must exceed {threshold}")));
    }
    let vol = model.volume();
    let g = grand_sum(model, mu0)?;
    let r_core = v * vol.powf(alpha);
    let r_shell = v_prime * vol.powf(delta);
    let (mut core, mut shell, mut outer) = (0.0, 0.0, 0.0);
    for (n, p) in g.probabilities().iter().enumerate() {
        let dist = (n as f64 - n_star as f64).abs();
        if dist <= r_core {
            core += p;
        } else if use_shell && dist <= r_shell {
            shell += p;
        } else {
            outer += p;
        }
    }
    Ok(RegionMasses {
        core,
        shell: use_shell.then_some(shell),
        outer,
    })
}

/// `P(N) = J(N, N*) K(μ0, N*)` by the canonical route.
pub fn option2_probability(model: &FreeEnergyModel, mu0: f64, n: u64) -> Result<f64> {
    let g = grand_sum(model, mu0)?;
    let n_star = n_star_of(&g).n;
    let k = k_normalization(model, mu0, n_star)?;
    Ok((j_ratio(model, mu0, n, n_star) + k.log_k).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub volume: f64,
    pub spec: DeviationSpec,
    pub rate: f64,
    /// `D` for large deviations, `D^α` for moderate ones.
    pub d_variant: f64,
    pub d_plus: f64,
    pub m_alpha: Option<usize>,
    pub error_e: f64,
    pub estimate: f64,
    /// Bound on `|P(Ñ) - estimate|` before series tails; `None` when the
    /// large-deviation constant is unknown.
    pub theorem_bound: Option<f64>,
    pub series_tail: f64,
    pub mu_tilde: Option<f64>,
    pub n_tilde_star: Option<u64>,
    pub oracle: Option<f64>,
    pub oracle_residual: Option<f64>,
    pub warnings: Vec<String>,
}

impl DeviationReport {
    /// Theorem bound plus series tails.
    pub fn budget(&self) -> Option<f64> {
        self.theorem_bound.map(|b| b + self.series_tail)
    }

    pub fn attach_oracle(&mut self, dist: &NumberDistribution) {
        let p = dist.prob(self.spec.n_tilde as usize);
        self.oracle = Some(p);
        self.oracle_residual = Some((p - self.estimate).abs());
    }

    /// `|oracle - estimate| |Λ| / e^{-|Λ| I}`, the constant of the large-deviation bound.
    pub fn observed_constant(&self) -> Option<f64> {
        self.oracle_residual
            .map(|r| r * self.volume / (-self.volume * self.rate).exp())
    }

    pub fn within_budget(&self) -> Option<bool> {
        match (self.oracle_residual, self.budget()) {
            (Some(r), Some(b)) => Some(r <= b),
            _ => None,
        }
    }

    pub const CSV_HEADER: &'static str =
        "volume,alpha,u_eff,n_tilde,estimate,oracle,rate,d_variant,e,residual,budget";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
        format!(
            "{},{},{:.12e},{},{:.12e},{},{:.12e},{:.12e},{:.12e},{},{}",
            self.volume,
            self.spec.alpha,
            self.spec.effective_u,
            self.spec.n_tilde,
            self.estimate,
            opt(self.oracle),
            self.rate,
            self.d_variant,
            self.error_e,
            opt(self.oracle_residual),
            opt(self.budget()),
        )
    }
}

/// `I^GC(ρ̃; ρ̄) = β(μ̃ - μ0)ρ̃ - β[p(μ̃) - p(μ0)]` from the Legendre pair.
pub fn rate_i_gc(model: &FreeEnergyModel, rho_tilde: f64, mu_tilde: f64, mu0: f64) -> Result<f64> {
    let dp = pressure_grand(model, mu_tilde)?.value - pressure_grand(model, mu0)?.value;
    Ok(model.beta * ((mu_tilde - mu0) * rho_tilde - dp))
}

/// Same rate at a real tilted density.
pub fn rate_i_gc_at(model: &FreeEnergyModel, rho_tilde: f64, mu0: f64) -> Result<f64> {
    let mu_tilde = find_mu_tilde(model, rho_tilde * model.volume(), mu0)?;
    rate_i_gc(model, rho_tilde, mu_tilde, mu0)
}

/// Large deviation at `Ñ = N̄ + round(u|Λ|)`; `c_fit` is the calibrated
/// constant of the bound, if any.
pub fn precise_ld(
    model: &FreeEnergyModel,
    mu0: f64,
    u: f64,
    c_fit: Option<f64>,
) -> Result<DeviationReport> {
    let vol = model.volume();
    let point = duality_point(model, mu0)?;
    let spec = make_deviation(model, &point, 1.0, u)?;
    let mut warnings = Vec::new();
    let (rate, mu_tilde) = if spec.n_tilde as f64 == point.rho_bar * vol {
        (0.0, mu0)
    } else {
        let mu_tilde = find_mu_tilde(model, spec.n_tilde as f64, mu0)?;
        (
            rate_i_gc(model, spec.n_tilde as f64 / vol, mu_tilde, mu0)?,
            mu_tilde,
        )
    };
    let g = grand_sum(model, mu_tilde)?;
    let ns = n_star_of(&g);
    if ns.at_boundary {
        warnings.push("n-star-at-cutoff".into());
    }
    if ns.n == 0 {
        return Err(Error::Regime(
            "tilted maximiser is the empty configuration".into(),
        ));
    }
    if spec.n_tilde.abs_diff(ns.n) > 2 + (vol.sqrt() as u64) {
        warnings.push("tilted-maximiser-far".into());
    }
    let d = variance_d(model, ns.n as f64 / vol)?;
    let ld = (-vol * rate).exp();
    let estimate = ld / (2.0 * std::f64::consts::PI * d * vol).sqrt();
    let series_tail = g.tail_bound + g.remainder + grand_sum(model, mu0)?.tail_bound;
    Ok(DeviationReport {
        volume: vol,
        spec,
        rate,
        d_variant: d,
        d_plus: d,
        m_alpha: None,
        error_e: 0.0,
        estimate,
        theorem_bound: c_fit.map(|c| c * ld / vol + ROUNDOFF * estimate),
        series_tail,
        mu_tilde: Some(mu_tilde),
        n_tilde_star: Some(ns.n),
        oracle: None,
        oracle_residual: None,
        warnings,
    })
}

/// Local moderate deviation at `Ñ = N* + round(u|Λ|^α)`.
///
/// The bound splits `P(Ñ) = J(Ñ, N*) K(μ0, N*)`: `J` is bracketed by its
/// expansion (error term, Stirling difference, branch terms), and `K` is
/// summed from the expansion and compared with `[2πD^{α,+}|Λ|]^{-1/2}`.
pub fn moderate_dev(
    model: &FreeEnergyModel,
    mu0: f64,
    u: f64,
    alpha: f64,
) -> Result<DeviationReport> {
    let vol = model.volume();
    let point = duality_point(model, mu0)?;
    if point.n_star == 0 {
        return Err(Error::Regime("maximiser is the empty configuration".into()));
    }
    let spec = make_deviation(model, &point, alpha, u)?;
    let m = m_alpha(alpha)?;
    let rho_star = point.rho_star;
    let v = spec.effective_u;
    let d_plus = variance_d_alpha(model, rho_star, alpha, v, Variant::Plus)?;
    let jx = j_expansion(model, mu0, point.n_star, alpha, spec.n_tilde)?;
    let d_alpha = variance_d_alpha(model, rho_star, alpha, v, Variant::Plain)?;
    let gauss = jx.gaussian.exp();
    let norm = (2.0 * std::f64::consts::PI * d_plus * vol).sqrt();
    let estimate = gauss / norm;
    let k = k_normalization(model, mu0, point.n_star)?.log_k.exp();
    let e_j = jx.error.total() + jx.stirling.abs() + jx.branch.abs();
    let bound = (gauss * k - estimate).abs() + gauss * k * e_j.exp_m1() + ROUNDOFF * estimate;
    let mut warnings = Vec::new();
    if jx.error.precision_warning {
        warnings.push("error-tail-not-small".into());
    }
    if point.n_star_at_boundary {
        warnings.push("n-star-at-cutoff".into());
    }
    let g = grand_sum(model, mu0)?;
    Ok(DeviationReport {
        volume: vol,
        spec,
        rate: v * v * vol.powf(2.0 * alpha - 1.0) / (2.0 * d_alpha) / vol,
        d_variant: d_alpha,
        d_plus,
        m_alpha: Some(m),
        error_e: jx.error.total(),
        estimate,
        theorem_bound: Some(bound),
        series_tail: g.tail_bound + g.remainder,
        mu_tilde: None,
        n_tilde_star: None,
        oracle: None,
        oracle_residual: None,
        warnings,
    })
}

/// Local CLT: the moderate deviation at `α = 1/2`.
pub fn lclt(model: &FreeEnergyModel, mu0: f64, u: f64) -> Result<DeviationReport> {
    moderate_dev(model, mu0, u, 0.5)
}

/// `βf_β(ρ̃) - βf_β(ρ0) - βf'_β(ρ0)(ρ̃ - ρ0)`.
pub fn rate_i_infinite(inf: &InfiniteVolume, rho_tilde: f64, rho0: f64) -> Result<f64> {
    Ok(inf.beta_f(rho_tilde)?
        - inf.beta_f(rho0)?
        - inf.beta_f_derivative(rho0, 1)? * (rho_tilde - rho0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{
        exact_prob, poisson_pmf, tonks_beta_mu, tonks_log_z_table, tonks_series_table,
    };
    use crate::region::SimulationRegion;
    use approx::assert_abs_diff_eq;

    fn ideal(vol: f64) -> FreeEnergyModel {
        FreeEnergyModel::ideal(1.0, SimulationRegion::new(1, vol).unwrap())
    }

    fn tonks(l: f64) -> FreeEnergyModel {
        let t = tonks_series_table(1.0, l, 1.0, 20).unwrap();
        FreeEnergyModel::new(1.0, SimulationRegion::new(1, l).unwrap(), t).unwrap()
    }

    #[test]
    fn m_alpha_values() {
        assert_eq!(m_alpha(0.5).unwrap(), 3);
        assert_eq!(m_alpha(2.0 / 3.0).unwrap(), 4);
        assert_eq!(m_alpha(0.75).unwrap(), 5);
        assert!(m_alpha(1.0).is_err());
    }

    #[test]
    fn deviation_rounding() {
        let m = ideal(100.0);
        let mut p = duality_point(&m, 0.05f64.ln()).unwrap();
        p.n_star = 5;
        let s = make_deviation(&m, &p, 0.5, 0.31).unwrap();
        assert_eq!(s.n_tilde, 8);
        assert_abs_diff_eq!(s.effective_u, 0.3, epsilon = 1e-15);
        assert_eq!(make_deviation(&m, &p, 1.0, 0.01).unwrap().n_tilde, 6);
        let z = make_deviation(&m, &p, 0.6, 0.0).unwrap();
        assert_eq!((z.n_tilde, z.effective_u), (5, 0.0));
    }

    #[test]
    fn variants_collapse_at_half() {
        let m = tonks(100.0);
        let d = variance_d(&m, 0.03).unwrap();
        for v in [Variant::Plain, Variant::Plus, Variant::Minus] {
            assert_eq!(
                variance_d_alpha(&m, 0.03, 0.5, 0.7, v).unwrap().to_bits(),
                d.to_bits()
            );
        }
        assert!(d < 0.03);
        let plus = variance_d_alpha(&m, 0.05, 0.75, 0.05, Variant::Plus).unwrap();
        let plain = variance_d_alpha(&m, 0.05, 0.75, 0.05, Variant::Plain).unwrap();
        let minus = variance_d_alpha(&m, 0.05, 0.75, 0.05, Variant::Minus).unwrap();
        assert!(plus <= plain && plain <= minus);
    }

    #[test]
    fn ideal_error_term_closed_form() {
        let m = ideal(100.0);
        let (alpha, v, rho, mu0) = (0.5, 0.3, 0.05, 0.05f64.ln());
        let e = error_e(&m, alpha, v, rho, mu0).unwrap();
        let vol: f64 = 100.0;
        let m0 = 3usize;
        let d = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 } * factorial(k - 2) / rho.powi(k as i32 - 1);
        let mut s = (v.powi(3) * d(3) / 6.0).abs() + (v * (mu0 - rho.ln()) * vol).abs();
        for k in 4..=m0 + 6 {
            s += (v.powi(k as i32) * d(k) / (factorial(k) * vol.powf((k - m0) as f64 * 0.5))).abs();
        }
        assert_abs_diff_eq!(e.value, s / vol.sqrt(), epsilon = 1e-10);
        let z = error_e(&m, alpha, 0.0, rho, mu0).unwrap();
        assert_eq!(z.total(), 0.0);
    }

    #[test]
    fn j_and_k_identities() {
        let m = ideal(100.0);
        let mu0 = 0.05f64.ln();
        assert_eq!(j_ratio(&m, mu0, 4, 4), 0.0);
        let lj = j_ratio(&m, mu0, 7, 4);
        let expect = mu0 * 3.0 + 3.0 * 100f64.ln() + (24.0f64 / 5040.0).ln();
        assert_abs_diff_eq!(lj, expect, epsilon = 1e-12);
        let k = k_normalization(&m, mu0, 4).unwrap();
        assert_abs_diff_eq!((k.log_k + k.log_sum_j).exp(), 1.0, epsilon = 1e-12);
        assert!(k.log_k < 0.0);
    }

    #[test]
    fn tonks_j_sandwich() {
        let m = tonks(100.0);
        let mu0 = tonks_beta_mu(0.03, 1.0);
        let p = duality_point(&m, mu0).unwrap();
        let s = make_deviation(&m, &p, 0.5, 0.3).unwrap();
        let j = j_expansion(&m, mu0, p.n_star, 0.5, s.n_tilde).unwrap();
        assert!(j.sandwich_holds(), "{j:?}");
    }

    #[test]
    fn lclt_matches_moderate_at_half() {
        let m = ideal(100.0);
        let mu0 = 0.05f64.ln();
        let a = lclt(&m, mu0, 0.2).unwrap();
        let b = moderate_dev(&m, mu0, 0.2, 0.5).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.d_variant.to_bits(), a.d_plus.to_bits());
    }

    #[test]
    fn precise_ld_center_and_poisson() {
        let m = ideal(100.0);
        let mu0 = 0.05f64.ln();
        let r = precise_ld(&m, mu0, 0.0, None).unwrap();
        assert_eq!(r.rate, 0.0);
        let mut r = precise_ld(&m, mu0, 0.01, None).unwrap();
        assert_eq!(r.spec.n_tilde, 6);
        let log_z: Vec<f64> = (0..=80u64)
            .map(|n| n as f64 * 100f64.ln() - crate::numerics::ln_factorial(n))
            .collect();
        r.attach_oracle(&exact_prob(&log_z, mu0, 0.0).unwrap());
        assert_abs_diff_eq!(r.oracle.unwrap(), poisson_pmf(5.0, 6), epsilon = 1e-12);
        assert!(r.oracle_residual.unwrap() / r.oracle.unwrap() < 0.15);
    }

    #[test]
    fn option2_reproduces_exact_probability() {
        let m = tonks(50.0);
        let mu0 = tonks_beta_mu(0.03, 1.0);
        let g = grand_sum(&m, mu0).unwrap();
        let exact = exact_prob(&tonks_log_z_table(50.0, 1.0, g.n_max()), mu0, 0.0).unwrap();
        for n in [0u64, 1, 3, 5] {
            assert_abs_diff_eq!(
                option2_probability(&m, mu0, n).unwrap(),
                exact.prob(n as usize),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn ideal_infinite_rate_is_poisson() {
        let inf = InfiniteVolume::ideal(1.0);
        let (rt, r0): (f64, f64) = (0.06, 0.05);
        assert_abs_diff_eq!(
            rate_i_infinite(&inf, rt, r0).unwrap(),
            rt * (rt / r0).ln() - rt + r0,
            epsilon = 1e-15
        );
        assert_eq!(rate_i_infinite(&inf, r0, r0).unwrap(), 0.0);
    }
}

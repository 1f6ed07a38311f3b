//! Grand-canonical moments, the canonical maximiser, tilted chemical
//! potentials and the Legendre pair `(f, p)` in finite and infinite volume.

use serde::{Deserialize, Serialize};

use crate::cluster_coeffs::{decay_fit, ClusterTable};
use crate::error::{Error, Result};
use crate::numerics::{factorial, logsumexp};
use crate::thermo::{
    cal_f_derivative, grand_sum, pressure_grand, stirling_s_prime, FreeEnergyModel, GrandSum,
};

/// Half-width of the initial chemical-potential bracket.
pub const MU_BRACKET: f64 = 10.0;
/// Target accuracy of the tilted density.
pub const DENSITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityPoint {
    pub mu0: f64,
    pub rho_bar: f64,
    pub n_bar: u64,
    pub sigma2: f64,
    pub n_star: u64,
    pub rho_star: f64,
    /// `|μ0 - 𝓕'(ρ*) - S'(ρ*)|`; NaN when `N* = 0`.
    pub mu_consistency_residual: f64,
    pub n_star_at_boundary: bool,
}

/// `⌊x⌋` forgiving rounding noise just below an integer.
pub fn floor_count(x: f64) -> u64 {
    (x + 1e-9 * x.abs().max(1.0)).floor().max(0.0) as u64
}

/// `(ρ̄, ⌊ρ̄|Λ|⌋)` at chemical potential `mu0`.
pub fn mean_density(model: &FreeEnergyModel, mu0: f64) -> Result<(f64, u64)> {
    let g = grand_sum(model, mu0)?;
    let rho = g.mean() / model.volume();
    Ok((rho, floor_count(rho * model.volume())))
}

/// `Var(N)/|Λ|`.
pub fn variance_sigma2(model: &FreeEnergyModel, mu0: f64) -> Result<f64> {
    Ok(grand_sum(model, mu0)?.variance() / model.volume())
}

/// `|∂p/∂μ - ρ̄|` by central differences, relative to `ρ̄`.
pub fn mean_identity_residual(model: &FreeEnergyModel, mu0: f64, h: f64) -> Result<f64> {
    let (rho, _) = mean_density(model, mu0)?;
    let dp =
        (pressure_grand(model, mu0 + h)?.value - pressure_grand(model, mu0 - h)?.value) / (2.0 * h);
    Ok((dp - rho).abs() / rho)
}

/// `|β^{-1} ∂²p/∂μ² - σ²|` by central differences, relative to `σ²`.
pub fn variance_identity_residual(model: &FreeEnergyModel, mu0: f64, h: f64) -> Result<f64> {
    let s2 = variance_sigma2(model, mu0)?;
    let p = |m: f64| pressure_grand(model, m).map(|v| v.value);
    let d2 = (p(mu0 + h)? - 2.0 * p(mu0)? + p(mu0 - h)?) / (h * h);
    Ok((d2 / model.beta - s2).abs() / s2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NStar {
    pub n: u64,
    /// The maximiser sits on the last scanned `N`.
    pub at_boundary: bool,
}

/// Exhaustive argmax of `βμN + log Z(N)` over the grand sum's range; near-ties
/// resolve to the smaller `N`.
pub fn n_star_of(g: &GrandSum) -> NStar {
    let mut best = 0usize;
    for (n, &w) in g.log_weights.iter().enumerate().skip(1) {
        let b = g.log_weights[best];
        let tol = 64.0 * f64::EPSILON * b.abs().max(w.abs()).max(1.0);
        if w > b + tol {
            best = n;
        }
    }
    NStar {
        n: best as u64,
        at_boundary: best == g.n_max(),
    }
}

pub fn find_n_star(model: &FreeEnergyModel, mu: f64) -> Result<NStar> {
    Ok(n_star_of(&grand_sum(model, mu)?))
}

/// The chemical potential whose grand-canonical mean count is `n_tilde`.
pub fn find_mu_tilde(model: &FreeEnergyModel, n_tilde: f64, mu0: f64) -> Result<f64> {
    let vol = model.volume();
    let target = n_tilde / vol;
    if !(target > 0.0) {
        return Err(Error::Range(format!(
            "tilted count must be positive, got {n_tilde}"
        )));
    }
    let rho = |m: f64| grand_sum(model, m).map(|g| g.mean() / vol);
    // Grow the bracket outward in unit steps, up to MU_BRACKET on each side.
    let r0 = rho(mu0)?;
    let (mut lo, mut hi) = (mu0, mu0);
    if r0 < target {
        loop {
            lo = hi;
            hi += 1.0;
            if rho(hi)? >= target {
                break;
            }
            if hi - mu0 >= MU_BRACKET {
                return Err(Error::Range(format!(
                    "density {target} not reached within mu0 + {MU_BRACKET}"
                )));
            }
        }
    } else {
        loop {
            hi = lo;
            lo -= 1.0;
            if rho(lo)? <= target {
                break;
            }
            if mu0 - lo >= MU_BRACKET {
                return Err(Error::Range(format!(
                    "density {target} not reached within mu0 - {MU_BRACKET}"
                )));
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rho(mid)?;
        if (r - target).abs() <= DENSITY_TOLERANCE * target.clamp(1e-300, 1.0) || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcFreeEnergy {
    pub value: f64,
    pub mu: f64,
}

/// `f^GC(ρ) = μρ - p(μ)` at the `μ` matching density `rho`.
pub fn gc_free_energy(model: &FreeEnergyModel, rho: f64, mu_hint: f64) -> Result<GcFreeEnergy> {
    let mu = find_mu_tilde(model, rho * model.volume(), mu_hint)?;
    let p = pressure_grand(model, mu)?.value;
    Ok(GcFreeEnergy {
        value: mu * rho - p,
        mu,
    })
}

/// `L(μ) = β|Λ|[p(μ + μ0) - p(μ0)]`.
pub fn log_mgf(model: &FreeEnergyModel, mu0: f64, mu: f64) -> Result<f64> {
    let s = model.beta * model.volume();
    Ok(s * (pressure_grand(model, mu0 + mu)?.value - pressure_grand(model, mu0)?.value))
}

/// `log Σ_N P_{μ0}(N) e^{βμN}` over the `μ0` distribution.
pub fn log_mgf_direct(model: &FreeEnergyModel, mu0: f64, mu: f64) -> Result<f64> {
    let g0 = grand_sum(model, mu0)?;
    let g1 = grand_sum(model, mu0 + mu)?;
    let n = g0.n_max().max(g1.n_max());
    let g = crate::thermo::grand_sum_to(model, mu0, n, 0.0)?;
    let terms: Vec<f64> = g
        .log_weights
        .iter()
        .enumerate()
        .map(|(k, w)| w - g.log_xi + model.beta * mu * k as f64)
        .collect();
    Ok(logsumexp(&terms))
}

pub fn duality_point(model: &FreeEnergyModel, mu0: f64) -> Result<DualityPoint> {
    let g = grand_sum(model, mu0)?;
    let vol = model.volume();
    let rho_bar = g.mean() / vol;
    let ns = n_star_of(&g);
    let rho_star = ns.n as f64 / vol;
    let residual = if ns.n == 0 {
        f64::NAN
    } else {
        let fp = cal_f_derivative(model, rho_star, 1)?.value;
        (mu0 - fp - stirling_s_prime(rho_star, vol) / model.beta).abs()
    };
    Ok(DualityPoint {
        mu0,
        rho_bar,
        n_bar: floor_count(rho_bar * vol),
        sigma2: g.variance() / vol,
        n_star: ns.n,
        rho_star,
        mu_consistency_residual: residual,
        n_star_at_boundary: ns.at_boundary,
    })
}

/// Infinite-volume free energy and pressure from irreducible coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteVolume {
    pub beta: f64,
    pub coefficients: Vec<f64>,
}

impl InfiniteVolume {
    pub fn new(beta: f64, table: &ClusterTable) -> Result<Self> {
        if table.region.is_some() {
            return Err(Error::Argument(
                "infinite-volume limits need an infinite-volume table".into(),
            ));
        }
        Ok(Self {
            beta,
            coefficients: table.values.clone(),
        })
    }

    pub fn ideal(beta: f64) -> Self {
        Self {
            beta,
            coefficients: Vec::new(),
        }
    }

    fn check(&self, rho: f64) -> Result<()> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!(
                "density must be positive, got {rho}"
            )));
        }
        let t = ClusterTable::new(
            self.beta,
            None,
            crate::cluster_coeffs::CoefficientMode::InfiniteVolume,
            self.coefficients.clone(),
            vec![0.0; self.coefficients.len()],
        )?;
        match decay_fit(&t, rho) {
            Ok(fit) if fit.violation => Err(Error::Convergence(format!(
                "virial series does not decay at density {rho}"
            ))),
            _ => Ok(()),
        }
    }

    /// `m`-th density derivative of `βf_β`.
    pub fn beta_f_derivative(&self, rho: f64, m: usize) -> Result<f64> {
        self.check(rho)?;
        let entropy = match m {
            0 => rho * (rho.ln() - 1.0),
            1 => rho.ln(),
            _ => {
                let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * factorial(m - 2) / rho.powi(m as i32 - 1)
            }
        };
        let mut s = 0.0;
        for (i, b) in self.coefficients.iter().enumerate() {
            let n = i + 1;
            if m > n + 1 {
                continue;
            }
            let falling = factorial(n + 1) / factorial(n + 1 - m);
            s += falling * rho.powi((n + 1 - m) as i32) * b / (n as f64 + 1.0);
        }
        Ok(entropy - s)
    }

    pub fn beta_f(&self, rho: f64) -> Result<f64> {
        self.beta_f_derivative(rho, 0)
    }

    /// `βp = ρ - Σ n ρ^{n+1} β_n / (n+1)`.
    pub fn beta_p_of_rho(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        let mut s = 0.0;
        for (i, b) in self.coefficients.iter().enumerate() {
            let n = (i + 1) as f64;
            s += n * rho.powf(n + 1.0) * b / (n + 1.0);
        }
        Ok(rho - s)
    }

    /// `μ = f'_β(ρ)`.
    pub fn mu_of_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.beta_f_derivative(rho, 1)? / self.beta)
    }

    /// Density at chemical potential `mu` by bisection on `f'_β`.
    pub fn rho_of_mu(&self, mu: f64) -> Result<f64> {
        let (mut lo, mut hi) = (1e-300f64, 1.0f64);
        let g = |r: f64| self.beta_f_derivative(r, 1).map(|v| v / self.beta - mu);
        // Shrink the upper end into the convergence window.
        while g(hi).is_err() {
            hi *= 0.5;
            if hi < 1e-12 {
                return Err(Error::Convergence("no convergent density window".into()));
            }
        }
        if g(hi)? < 0.0 {
            return Err(Error::Range(format!(
                "chemical potential {mu} beyond the convergence window"
            )));
        }
        for _ in 0..2000 {
            let mid = (lo * hi).sqrt();
            if g(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `p_β(μ) = sup_ρ {μρ - f_β(ρ)}`.
    pub fn pressure(&self, mu: f64) -> Result<f64> {
        let rho = self.rho_of_mu(mu)?;
        Ok(mu * rho - self.beta_f(rho)? / self.beta)
    }

    /// `ρ0 = p'_β(μ0)` by central differences with step `h`.
    pub fn rho0(&self, mu0: f64, h: f64) -> Result<f64> {
        Ok((self.pressure(mu0 + h)? - self.pressure(mu0 - h)?) / (2.0 * h))
    }

    /// `f_β(ρ) = sup_μ {μρ - p_β(μ)}`, attained at `μ = f'_β(ρ)`.
    pub fn legendre_of_pressure(&self, rho: f64) -> Result<f64> {
        let mu = self.mu_of_rho(rho)?;
        Ok(mu * rho - self.pressure(mu)?)
    }

    /// `σ²_∞ = 1/(β f''_β(ρ))`.
    pub fn variance(&self, rho: f64) -> Result<f64> {
        Ok(1.0 / self.beta_f_derivative(rho, 2)?)
    }
}

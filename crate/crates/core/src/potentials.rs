//! Radial pair potentials, the Mayer function and the low-density condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::IntegrationConfig;
use crate::numerics::GaussRule;

/// Pair energy; the hard core is a distinguished value rather than `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Energy::Infinite)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Energy::Finite(v) => v,
            Energy::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    HardCore,
    SquareWell,
    TabulatedRadial,
}

impl PotentialKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" | "ideal" => Some(Self::Zero),
            "hard-core" | "hard_core" | "hard-rod" => Some(Self::HardCore),
            "square-well" | "square_well" => Some(Self::SquareWell),
            "tabulated-radial" | "tabulated" => Some(Self::TabulatedRadial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    pub kind: PotentialKind,
    pub dim: usize,
    pub hard_core_radius: f64,
    pub range: f64,
    pub well_depth: f64,
    pub stability_b: f64,
    /// `(radius, energy)` samples for the tabulated kind, sorted by radius.
    pub table: Vec<(f64, f64)>,
}

impl PairPotential {
    pub fn zero(dim: usize) -> Self {
        Self {
            kind: PotentialKind::Zero,
            dim,
            hard_core_radius: 0.0,
            range: 0.0,
            well_depth: 0.0,
            stability_b: 0.0,
            table: Vec::new(),
        }
    }

    pub fn hard_core(dim: usize, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Argument(format!(
                "hard-core radius must be positive, got {a}"
            )));
        }
        Ok(Self {
            kind: PotentialKind::HardCore,
            dim,
            hard_core_radius: a,
            range: a,
            well_depth: 0.0,
            stability_b: 0.0,
            table: Vec::new(),
        })
    }

    /// `V = ∞` for `|x| < a`, `-depth` for `a ≤ |x| ≤ range`, 0 beyond.
    pub fn square_well(dim: usize, a: f64, range: f64, depth: f64) -> Result<Self> {
        if !(a > 0.0) || !(range >= a) || !(depth >= 0.0) {
            return Err(Error::Argument(format!(
                "square well needs 0 < a <= range and depth >= 0 (a={a}, range={range}, depth={depth})"
            )));
        }
        let neighbours = max_neighbours(dim, a, range);
        Ok(Self {
            kind: PotentialKind::SquareWell,
            dim,
            hard_core_radius: a,
            range,
            well_depth: depth,
            stability_b: 0.5 * depth * neighbours,
            table: Vec::new(),
        })
    }

    /// Linear interpolation through `samples`; `V = ∞` below `a`, 0 beyond the last radius.
    pub fn tabulated(dim: usize, a: f64, mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("tabulated potential needs samples".into()));
        }
        if samples
            .iter()
            .any(|(r, v)| !r.is_finite() || !v.is_finite() || *r < 0.0)
        {
            return Err(Error::Argument(
                "tabulated samples must be finite with r >= 0".into(),
            ));
        }
        samples.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
        let range = samples.last().map(|s| s.0).unwrap_or(0.0).max(a);
        let min_v = samples.iter().map(|s| s.1).fold(0.0, f64::min);
        let stability_b = if min_v >= 0.0 {
            0.0
        } else if a > 0.0 {
            0.5 * (-min_v) * max_neighbours(dim, a, range)
        } else {
            return Err(Error::Argument(
                "attractive tabulated potential without hard core: give stability_b explicitly"
                    .into(),
            ));
        };
        Ok(Self {
            kind: PotentialKind::TabulatedRadial,
            dim,
            hard_core_radius: a,
            range,
            well_depth: -min_v.min(0.0),
            stability_b,
            table: samples,
        })
    }

    pub fn with_stability_b(mut self, b: f64) -> Self {
        self.stability_b = b;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.kind == PotentialKind::Zero
    }

    /// Energy at displacement `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Energy> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "displacement has dimension {}, potential has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.radial(x.iter().map(|v| v * v).sum::<f64>().sqrt()))
    }

    /// Energy at distance `r`.
    pub fn radial(&self, r: f64) -> Energy {
        let r = r.abs();
        match self.kind {
            PotentialKind::Zero => Energy::Finite(0.0),
            PotentialKind::HardCore => {
                if r < self.hard_core_radius {
                    Energy::Infinite
                } else {
                    Energy::Finite(0.0)
                }
            }
            PotentialKind::SquareWell => {
                if r < self.hard_core_radius {
                    Energy::Infinite
                } else if r <= self.range {
                    Energy::Finite(-self.well_depth)
                } else {
                    Energy::Finite(0.0)
                }
            }
            PotentialKind::TabulatedRadial => {
                if r < self.hard_core_radius {
                    return Energy::Infinite;
                }
                if r > self.range {
                    return Energy::Finite(0.0);
                }
                Energy::Finite(interpolate(&self.table, r))
            }
        }
    }

    /// Mayer function at displacement `x`.
    pub fn mayer_f(&self, beta: f64, x: &[f64]) -> Result<f64> {
        check_beta(beta)?;
        let e = self.evaluate(x)?;
        Ok(mayer_of(beta, e))
    }

    /// Mayer function at distance `r`.
    pub fn mayer_radial(&self, beta: f64, r: f64) -> f64 {
        mayer_of(beta, self.radial(r))
    }

    /// Radii where the Mayer function jumps or kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::new();
        match self.kind {
            PotentialKind::Zero => {}
            PotentialKind::HardCore => b.push(self.hard_core_radius),
            PotentialKind::SquareWell => {
                b.push(self.hard_core_radius);
                b.push(self.range);
            }
            PotentialKind::TabulatedRadial => {
                if self.hard_core_radius > 0.0 {
                    b.push(self.hard_core_radius);
                }
                b.extend(
                    self.table
                        .iter()
                        .map(|s| s.0)
                        .filter(|&r| r > self.hard_core_radius),
                );
            }
        }
        b.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        b.dedup();
        b
    }

    /// Distinct lengths whose integer combinations locate the kinks of
    /// iterated integrals of products of Mayer functions.
    pub fn kink_lengths(&self) -> Vec<f64> {
        match self.kind {
            PotentialKind::TabulatedRadial => {
                let mut v = vec![self.range];
                if self.hard_core_radius > 0.0 {
                    v.insert(0, self.hard_core_radius);
                }
                v
            }
            _ => self.breakpoints(),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Argument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

fn mayer_of(beta: f64, e: Energy) -> f64 {
    match e {
        Energy::Infinite => -1.0,
        Energy::Finite(v) => (-beta * v).exp_m1(),
    }
}

fn interpolate(table: &[(f64, f64)], r: f64) -> f64 {
    if r <= table[0].0 {
        return table[0].1;
    }
    for w in table.windows(2) {
        let (r0, v0) = w[0];
        let (r1, v1) = w[1];
        if r <= r1 {
            if r1 == r0 {
                return v1;
            }
            return v0 + (v1 - v0) * (r - r0) / (r1 - r0);
        }
    }
    table[table.len() - 1].1
}

/// Upper bound on the number of points at mutual distance `>= a` inside a ball of radius `range`.
fn max_neighbours(dim: usize, a: f64, range: f64) -> f64 {
    if dim == 1 {
        2.0 * (range / a).floor()
    } else {
        (2.0 * range / a + 1.0).powi(dim as i32) - 1.0
    }
}

/// `∫ |e^{-βV(x)} - 1| dx` with an error estimate from a doubled rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularity {
    pub value: f64,
    pub error: f64,
}

pub fn c_beta(
    potential: &PairPotential,
    beta: f64,
    quad: &IntegrationConfig,
) -> Result<Regularity> {
    check_beta(beta)?;
    if potential.is_zero() {
        return Ok(Regularity {
            value: 0.0,
            error: 0.0,
        });
    }
    let d = potential.dim;
    let shell = |r: f64| -> f64 {
        match d {
            1 => 2.0,
            2 => 2.0 * std::f64::consts::PI * r,
            3 => 4.0 * std::f64::consts::PI * r * r,
            _ => {
                // surface of the unit sphere in R^d times r^{d-1}
                let dd = d as f64;
                2.0 * std::f64::consts::PI.powf(dd / 2.0) / statrs::function::gamma::gamma(dd / 2.0)
                    * r.powi(d as i32 - 1)
            }
        }
    };
    let breaks = potential.breakpoints();
    let integrand = |r: f64| shell(r) * potential.mayer_radial(beta, r).abs();
    let n = quad.points.max(2);
    let coarse = GaussRule::new(n).integrate_split(0.0, potential.range, &breaks, integrand);
    let fine = GaussRule::new(2 * n).integrate_split(0.0, potential.range, &breaks, integrand);
    let error = (fine - coarse).abs();
    if error > quad.tolerance * fine.abs().max(1.0) {
        return Err(Error::Integration(format!(
            "regularity integral did not converge (estimate {error:e})"
        )));
    }
    Ok(Regularity { value: fine, error })
}

/// Default convergence constant `c0 = e^{-2βB-1}`.
pub fn default_c0(beta: f64, stability_b: f64) -> f64 {
    (-2.0 * beta * stability_b - 1.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionStar {
    pub holds: bool,
    /// `ρ C(β) / c0`; the condition holds iff this is below one.
    pub ratio: f64,
}

pub fn check_condition_star(rho: f64, c_beta_value: f64, c0: f64) -> ConditionStar {
    let ratio = rho * c_beta_value / c0;
    ConditionStar {
        holds: ratio < 1.0,
        ratio,
    }
}

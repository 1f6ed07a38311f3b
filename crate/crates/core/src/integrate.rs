//! Integrals of functions of the pairwise Mayer factors of `k` particles.
//!
//! In one dimension the integral is iterated Gauss–Legendre with every axis
//! split wherever the integrand (after the inner integrations) can kink: at
//! integer combinations of the potential's discontinuity radii measured from
//! the coordinates already fixed and from the box walls. For piecewise
//! constant Mayer functions this makes the rule exact. Higher dimensions use
//! seeded Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_enum::{pair_count, pair_index};
use crate::numerics::{factorial, segment_cuts, GaussRule};
use crate::potentials::{PairPotential, PotentialKind};
use crate::region::SimulationRegion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    TensorQuadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub scheme: Scheme,
    /// Gauss points per split segment for one- and two-dimensional integrals.
    pub points: usize,
    /// Gauss points per split segment for integrals of dimension three and up.
    pub points_multi: usize,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::TensorQuadrature,
            points: 64,
            points_multi: 8,
            samples: 200_000,
            seed: 0x5eed,
            tolerance: 1e-8,
        }
    }
}

impl IntegrationConfig {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            scheme: Scheme::MonteCarlo,
            samples,
            seed,
            ..Self::default()
        }
    }
}

/// Integral value with a standard error (0 for exact quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Where the `k` coordinates live.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Every coordinate ranges over the box.
    Box(SimulationRegion),
    /// The first coordinate sits at the origin; the rest range over all space.
    PinnedOrigin { dim: usize },
}

/// Derive an independent stream seed for a named term.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `∫ g(f_{01}, f_{02}, ...) dx` over `k` coordinates, with the Mayer factors
/// passed to `g` in lexicographic pair order.
///
/// `symmetric` declares `g` invariant under relabeling of the coordinates, which
/// lets the quadrature integrate over ordered configurations only.
#[allow(clippy::too_many_arguments)]
pub fn integrate_pairs<G>(
    potential: &PairPotential,
    beta: f64,
    k: usize,
    domain: Domain,
    symmetric: bool,
    cfg: &IntegrationConfig,
    tag: u64,
    g: G,
) -> Result<Estimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let dim = match domain {
        Domain::Box(r) => r.dim,
        Domain::PinnedOrigin { dim } => dim,
    };
    if dim != potential.dim {
        return Err(Error::Argument(format!(
            "domain dimension {dim} does not match potential dimension {}",
            potential.dim
        )));
    }
    if k == 0 {
        return Ok(Estimate {
            value: 1.0,
            error: 0.0,
        });
    }
    if let Domain::PinnedOrigin { .. } = domain {
        if potential.range <= 0.0 && k > 1 {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
            });
        }
    }
    if dim == 1 && cfg.scheme == Scheme::TensorQuadrature {
        tensor_1d(potential, beta, k, domain, symmetric, cfg, &g)
    } else {
        monte_carlo(potential, beta, k, domain, dim, cfg, tag, &g)
    }
}

fn free_extent(potential: &PairPotential, k: usize) -> f64 {
    (k.saturating_sub(1)) as f64 * potential.range
}

/// All sums `Σ c_i ℓ_i` with `Σ |c_i| <= depth`.
fn offset_set(lengths: &[f64], depth: usize) -> Vec<f64> {
    let mut set = vec![0.0];
    for _ in 0..depth {
        let mut next = set.clone();
        for &s in &set {
            for &l in lengths {
                next.push(s + l);
                next.push(s - l);
            }
        }
        next.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        next.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        set = next;
    }
    set
}

struct Tensor<'a, G> {
    potential: &'a PairPotential,
    beta: f64,
    k: usize,
    first_free: usize,
    lo: f64,
    hi: f64,
    ordered: bool,
    offsets: Vec<Vec<f64>>,
    rule: GaussRule,
    g: &'a G,
}

impl<G: Fn(&[f64]) -> f64> Tensor<'_, G> {
    fn recurse(&self, t: usize, xs: &mut [f64], fbuf: &mut [f64]) -> f64 {
        if t == self.k {
            return (self.g)(fbuf);
        }
        let lo_t = if self.ordered && t > self.first_free {
            xs[t - 1]
        } else {
            self.lo
        };
        let hi_t = self.hi;
        if lo_t >= hi_t {
            return 0.0;
        }
        let remaining = self.k - t;
        let offs = &self.offsets[remaining];
        let mut breaks = Vec::with_capacity(offs.len() * (t + 2));
        for &o in offs {
            for &xj in &xs[..t] {
                breaks.push(xj + o);
            }
            breaks.push(self.lo + o);
            breaks.push(self.hi + o);
        }
        let cuts = segment_cuts(lo_t, hi_t, &breaks);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            for (x, wt) in self.rule.mapped(w[0], w[1]) {
                xs[t] = x;
                for j in 0..t {
                    fbuf[pair_index(self.k, j, t)] =
                        self.potential.mayer_radial(self.beta, x - xs[j]);
                }
                total += wt * self.recurse(t + 1, xs, fbuf);
            }
        }
        total
    }
}

fn tensor_1d<G: Fn(&[f64]) -> f64>(
    potential: &PairPotential,
    beta: f64,
    k: usize,
    domain: Domain,
    symmetric: bool,
    cfg: &IntegrationConfig,
    g: &G,
) -> Result<Estimate> {
    let (first_free, lo, hi) = match domain {
        Domain::Box(r) => (0, r.lower(), r.upper()),
        Domain::PinnedOrigin { .. } => {
            let e = free_extent(potential, k);
            (1, -e, e)
        }
    };
    let free = k - first_free;
    let piecewise_constant = potential.kind != PotentialKind::TabulatedRadial;
    let points = if free <= 2 {
        cfg.points
    } else {
        cfg.points_multi
    };
    // After splitting, inner integrals of a piecewise-constant integrand are
    // polynomials of degree < free in each outer variable, which
    // ceil(free / 2) Gauss points integrate exactly.
    let points = if piecewise_constant {
        points.min(free.div_ceil(2).max(2))
    } else {
        points
    };
    let lengths = potential.kink_lengths();
    let offsets: Vec<Vec<f64>> = (0..=k).map(|r| offset_set(&lengths, r)).collect();
    let run = |pts: usize| {
        let t = Tensor {
            potential,
            beta,
            k,
            first_free,
            lo,
            hi,
            ordered: symmetric,
            offsets: offsets.clone(),
            rule: GaussRule::new(pts),
            g,
        };
        let mut xs = vec![0.0; k];
        let mut fbuf = vec![0.0; pair_count(k)];
        let v = t.recurse(first_free, &mut xs, &mut fbuf);
        if symmetric {
            v * factorial(free)
        } else {
            v
        }
    };
    let value = run(points);
    // Piecewise-constant Mayer functions integrate exactly once split; smooth
    // tabulated ones get an error estimate from a coarser rule.
    let error = if !piecewise_constant {
        (value - run((points / 2).max(2))).abs()
    } else {
        0.0
    };
    Ok(Estimate { value, error })
}

#[allow(clippy::too_many_arguments)]
fn monte_carlo<G: Fn(&[f64]) -> f64>(
    potential: &PairPotential,
    beta: f64,
    k: usize,
    domain: Domain,
    dim: usize,
    cfg: &IntegrationConfig,
    tag: u64,
    g: &G,
) -> Result<Estimate> {
    if cfg.samples < 2 {
        return Err(Error::Argument(
            "Monte Carlo needs at least two samples".into(),
        ));
    }
    let (first_free, lo, hi) = match domain {
        Domain::Box(r) => (0, r.lower(), r.upper()),
        Domain::PinnedOrigin { .. } => {
            let e = free_extent(potential, k);
            (1, -e, e)
        }
    };
    let free = k - first_free;
    let box_volume = (hi - lo).powi((free * dim) as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, tag));
    let mut xs = vec![0.0; k * dim];
    let mut fbuf = vec![0.0; pair_count(k)];
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..cfg.samples {
        for v in xs.iter_mut().skip(first_free * dim) {
            *v = rng.random_range(lo..hi);
        }
        for i in 0..k {
            for j in i + 1..k {
                let r2: f64 = (0..dim)
                    .map(|c| (xs[i * dim + c] - xs[j * dim + c]).powi(2))
                    .sum();
                fbuf[pair_index(k, i, j)] = potential.mayer_radial(beta, r2.sqrt());
            }
        }
        let v = g(&fbuf);
        sum += v;
        sum2 += v * v;
    }
    let n = cfg.samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(Estimate {
        value: mean * box_volume,
        error: (var / n).sqrt() * box_volume,
    })
}

/// `Σ_g Π_{e∈g} f_e` over a list of edge masks.
pub fn graph_sum(masks: &[u32], f: &[f64]) -> f64 {
    let mut total = 0.0;
    for &m in masks {
        let mut p = 1.0;
        let mut bits = m;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            p *= f[e];
            if p == 0.0 {
                break;
            }
            bits &= bits - 1;
        }
        total += p;
    }
    total
}

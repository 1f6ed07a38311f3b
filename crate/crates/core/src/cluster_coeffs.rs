//! Irreducible and finite-volume cluster coefficients.
//!
//! Coefficients are stored for `n = 1..=n_max`; index `n - 1` of `values`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_enum::{enumerate, Predicate, N_GRAPH_MAX};
use crate::integrate::{graph_sum, integrate_pairs, Domain, Estimate, IntegrationConfig, Scheme};
use crate::numerics::{factorial, linear_fit};
use crate::potentials::PairPotential;
use crate::region::SimulationRegion;

pub const TABLE_SCHEMA_VERSION: u32 = 1;
/// Largest `n` accepted by the polymer route.
pub const N_POLY_MAX: usize = 3;
/// Total polymer multiplicity kept in the polymer sum.
pub const POLYMER_ORDER: usize = 4;
/// Largest `n` the one-dimensional tensor rule is asked to handle.
pub const N_TENSOR_MAX: usize = 3;
pub const FIT_CONDITION_MAX: f64 = 1e12;
/// A decay fit whose tail bound exceeds this fraction of the retained terms'
/// absolute sum is flagged as a violation.
pub const TAIL_FRACTION_MAX: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientMode {
    PolymerExact,
    TwoConnectedIntegral,
    InfiniteVolume,
    OracleFitted,
}

impl CoefficientMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "polymer-exact" => Some(Self::PolymerExact),
            "two-connected-integral" => Some(Self::TwoConnectedIntegral),
            "infinite-volume" => Some(Self::InfiniteVolume),
            "oracle-fitted" => Some(Self::OracleFitted),
            _ => None,
        }
    }
}

/// Constants of the geometric bound `|F(n)| <= C e^{-c n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConstants {
    pub prefactor: f64,
    pub rate: f64,
}

impl TailConstants {
    /// `Σ_{n > n_max} C e^{-c n}`.
    pub fn tail_after(&self, n_max: usize) -> f64 {
        if self.rate <= 0.0 {
            return f64::INFINITY;
        }
        self.prefactor * (-self.rate * (n_max as f64 + 1.0)).exp() / (-(-self.rate).exp_m1())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub schema_version: u32,
    pub beta: f64,
    /// `None` for infinite-volume coefficients.
    pub region: Option<SimulationRegion>,
    pub mode: CoefficientMode,
    pub values: Vec<f64>,
    pub uncertainty: Vec<f64>,
    pub tail: Option<TailConstants>,
    pub seed: Option<u64>,
}

impl ClusterTable {
    pub fn new(
        beta: f64,
        region: Option<SimulationRegion>,
        mode: CoefficientMode,
        values: Vec<f64>,
        uncertainty: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != uncertainty.len() {
            return Err(Error::Argument(
                "values and uncertainties differ in length".into(),
            ));
        }
        if uncertainty.iter().any(|u| !(*u >= 0.0)) {
            return Err(Error::Argument("uncertainties must be non-negative".into()));
        }
        Ok(Self {
            schema_version: TABLE_SCHEMA_VERSION,
            beta,
            region,
            mode,
            values,
            uncertainty,
            tail: None,
            seed: None,
        })
    }

    /// All-zero table, the exact answer for the free gas.
    pub fn zeros(
        beta: f64,
        region: Option<SimulationRegion>,
        mode: CoefficientMode,
        n_max: usize,
    ) -> Self {
        Self::new(beta, region, mode, vec![0.0; n_max], vec![0.0; n_max])
            .expect("consistent lengths")
    }

    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    /// Coefficient `n` (1-based).
    pub fn get(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.values.len() {
            return Err(Error::Range(format!(
                "coefficient n={n} outside table 1..={}",
                self.values.len()
            )));
        }
        Ok(self.values[n - 1])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        if t.schema_version != TABLE_SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "unsupported table schema version {}",
                t.schema_version
            )));
        }
        if t.values.len() != t.uncertainty.len() {
            return Err(Error::Argument(
                "table values and uncertainties differ in length".into(),
            ));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Argument("coefficient index starts at 1".into()));
    }
    if n > max {
        return Err(Error::Capacity(format!(
            "coefficient n={n} exceeds limit {max}"
        )));
    }
    Ok(())
}

fn graph_integral(
    potential: &PairPotential,
    beta: f64,
    k: usize,
    predicate: Predicate,
    domain: Domain,
    cfg: &IntegrationConfig,
    tag: u64,
) -> Result<Estimate> {
    let masks: Vec<u32> = enumerate(k, predicate)?
        .graphs
        .iter()
        .map(|g| g.mask())
        .collect();
    let est = integrate_pairs(potential, beta, k, domain, true, cfg, tag, |f| {
        graph_sum(&masks, f)
    })?;
    if est.error > cfg.tolerance.max(0.0) * est.value.abs().max(1.0)
        && cfg.scheme == Scheme::TensorQuadrature
    {
        return Err(Error::Integration(format!(
            "{k}-point {predicate} integral error {:.3e} above tolerance",
            est.error
        )));
    }
    Ok(est)
}

fn tensor_capacity(potential: &PairPotential, cfg: &IntegrationConfig, n: usize) -> Result<()> {
    if potential.dim == 1 && cfg.scheme == Scheme::TensorQuadrature && n > N_TENSOR_MAX {
        return Err(Error::Capacity(format!(
            "tensor quadrature handles n <= {N_TENSOR_MAX}; use the monte-carlo scheme for n={n}"
        )));
    }
    Ok(())
}

/// Irreducible coefficient `β_n`: 2-connected graphs on `n + 1` vertices with one
/// vertex pinned at the origin, divided by `n!`.
pub fn beta_n_infinite(
    potential: &PairPotential,
    beta: f64,
    n: usize,
    cfg: &IntegrationConfig,
) -> Result<Estimate> {
    check_n(n, N_GRAPH_MAX - 1)?;
    if potential.is_zero() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    tensor_capacity(potential, cfg, n)?;
    let e = graph_integral(
        potential,
        beta,
        n + 1,
        Predicate::Biconnected,
        Domain::PinnedOrigin { dim: potential.dim },
        cfg,
        0x1000 + n as u64,
    )?;
    let nf = factorial(n);
    Ok(Estimate {
        value: e.value / nf,
        error: e.error / nf,
    })
}

/// Finite-volume 2-connected coefficient: every coordinate in the box, one
/// volume factor divided out.
pub fn b_lambda_2connected(
    potential: &PairPotential,
    beta: f64,
    region: &SimulationRegion,
    n: usize,
    cfg: &IntegrationConfig,
) -> Result<Estimate> {
    check_n(n, N_GRAPH_MAX - 1)?;
    if potential.is_zero() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    tensor_capacity(potential, cfg, n)?;
    let e = graph_integral(
        potential,
        beta,
        n + 1,
        Predicate::Biconnected,
        Domain::Box(*region),
        cfg,
        0x2000 + n as u64,
    )?;
    let s = factorial(n) * region.volume();
    Ok(Estimate {
        value: e.value / s,
        error: e.error / s,
    })
}

/// Polymer activity for a support of `k` particles: connected-graph integral
/// over the box divided by `|Λ|^k`.
pub fn polymer_weight(
    potential: &PairPotential,
    beta: f64,
    region: &SimulationRegion,
    k: usize,
    cfg: &IntegrationConfig,
) -> Result<Estimate> {
    if k < 2 {
        return Err(Error::Argument(
            "polymers have at least two particles".into(),
        ));
    }
    if potential.is_zero() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let e = graph_integral(
        potential,
        beta,
        k,
        Predicate::Connected,
        Domain::Box(*region),
        cfg,
        0x3000 + k as u64,
    )?;
    let s = region.volume().powi(k as i32);
    Ok(Estimate {
        value: e.value / s,
        error: e.error / s,
    })
}

/// One multi-index of the polymer sum: the supports (as vertex bitmasks, with
/// repetition) and its combinatorial coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymerTerm {
    pub supports: Vec<u8>,
    pub coefficient: f64,
}

/// Signed count of connected spanning subgraphs of the graph on `m` nodes with
/// the given edges.
fn connected_spanning_signed(m: usize, edges: &[(usize, usize)]) -> f64 {
    let mut total = 0.0;
    for sub in 0u32..(1u32 << edges.len()) {
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut comps = m;
        for (e, &(a, b)) in edges.iter().enumerate() {
            if sub & (1 << e) != 0 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                    comps -= 1;
                }
            }
        }
        if comps == 1 {
            total += if sub.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    total
}

/// Multi-indices over polymers in `{0..m}` covering every vertex, with total
/// multiplicity at most `order` and a connected overlap graph.
pub fn polymer_terms(m: usize, order: usize) -> Vec<PolymerTerm> {
    let full: u8 = ((1u16 << m) - 1) as u8;
    let polymers: Vec<u8> = (1..=full).filter(|s| s.count_ones() >= 2).collect();
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    fn walk(
        polymers: &[u8],
        full: u8,
        order: usize,
        start: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<PolymerTerm>,
    ) {
        if !stack.is_empty() {
            let supports: Vec<u8> = stack.iter().map(|&i| polymers[i]).collect();
            if supports.iter().fold(0u8, |a, s| a | s) == full {
                let q = supports.len();
                let mut edges = Vec::new();
                for i in 0..q {
                    for j in i + 1..q {
                        if supports[i] & supports[j] != 0 {
                            edges.push((i, j));
                        }
                    }
                }
                let signed = connected_spanning_signed(q, &edges);
                if signed != 0.0 {
                    let mut mult = 1.0;
                    let mut run = 1;
                    for w in 1..q {
                        if supports[w] == supports[w - 1] {
                            run += 1;
                            mult *= run as f64;
                        } else {
                            run = 1;
                        }
                    }
                    out.push(PolymerTerm {
                        supports,
                        coefficient: signed / mult,
                    });
                }
            }
        }
        if stack.len() == order {
            return;
        }
        for i in start..polymers.len() {
            stack.push(i);
            walk(polymers, full, order, i, stack, out);
            stack.pop();
        }
    }
    walk(&polymers, full, order, 0, &mut stack, &mut out);
    out
}

/// Finite-volume coefficient from the polymer expansion, truncated to total
/// multiplicity [`POLYMER_ORDER`].
pub fn b_lambda_polymer(
    potential: &PairPotential,
    beta: f64,
    region: &SimulationRegion,
    n: usize,
    cfg: &IntegrationConfig,
) -> Result<Estimate> {
    check_n(n, N_POLY_MAX)?;
    if potential.is_zero() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let m = n + 1;
    let mut weights = vec![
        Estimate {
            value: 0.0,
            error: 0.0
        };
        m + 1
    ];
    for (k, w) in weights.iter_mut().enumerate().skip(2) {
        *w = polymer_weight(potential, beta, region, k, cfg)?;
    }
    let mut value = 0.0;
    let mut error = 0.0;
    for term in polymer_terms(m, POLYMER_ORDER) {
        let ws: Vec<Estimate> = term
            .supports
            .iter()
            .map(|s| weights[s.count_ones() as usize])
            .collect();
        let prod: f64 = ws.iter().map(|w| w.value).product();
        value += term.coefficient * prod;
        for (i, w) in ws.iter().enumerate() {
            let others: f64 = ws
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, x)| x.value)
                .product();
            error += (term.coefficient * others).abs() * w.error;
        }
    }
    let scale = region.volume().powi(n as i32) / factorial(n);
    Ok(Estimate {
        value: value * scale,
        error: error * scale,
    })
}

/// Table of coefficients `1..=n_max` computed by the given route.
pub fn compute_table(
    potential: &PairPotential,
    beta: f64,
    region: Option<&SimulationRegion>,
    mode: CoefficientMode,
    n_max: usize,
    cfg: &IntegrationConfig,
) -> Result<ClusterTable> {
    let mut values = Vec::with_capacity(n_max);
    let mut errs = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let est = match (mode, region) {
            (CoefficientMode::InfiniteVolume, _) => beta_n_infinite(potential, beta, n, cfg)?,
            (CoefficientMode::TwoConnectedIntegral, Some(r)) => {
                b_lambda_2connected(potential, beta, r, n, cfg)?
            }
            (CoefficientMode::PolymerExact, Some(r)) => {
                b_lambda_polymer(potential, beta, r, n, cfg)?
            }
            (CoefficientMode::OracleFitted, _) => {
                return Err(Error::Argument(
                    "oracle-fitted tables come from fit_coefficients_from_oracle".into(),
                ))
            }
            (_, None) => return Err(Error::Argument("finite-volume modes need a region".into())),
        };
        values.push(est.value);
        errs.push(est.error);
    }
    let region = if mode == CoefficientMode::InfiniteVolume {
        None
    } else {
        region.copied()
    };
    let mut t = ClusterTable::new(beta, region, mode, values, errs)?;
    if cfg.scheme == Scheme::MonteCarlo {
        t.seed = Some(cfg.seed);
    }
    Ok(t)
}

/// `(N-1)(N-2)...(N-n) / |Λ|^n` for `n < N`, else 0.
pub fn p_poly(n_particles: u64, volume: f64, n: usize) -> f64 {
    if (n as u64) >= n_particles {
        return 0.0;
    }
    let mut p = 1.0;
    for k in 1..=n as u64 {
        p *= (n_particles - k) as f64 / volume;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub table: ClusterTable,
    /// Largest absolute log-partition-function residual over the fitted rows.
    pub residual: f64,
    pub condition_number: f64,
}

/// Least-squares inversion of the canonical expansion for the coefficients.
///
/// `log_z[i]` is `log Z(N)` at `N = i + 1`.
pub fn fit_coefficients_from_oracle(
    log_z: &[f64],
    beta: f64,
    region: &SimulationRegion,
    n_max: usize,
) -> Result<FitReport> {
    let n_fit = log_z.len();
    if n_max == 0 {
        return Err(Error::Argument("n_max must be at least 1".into()));
    }
    if n_fit < n_max + 1 {
        return Err(Error::InsufficientData(format!(
            "need N_fit >= n_max + 1 = {}, got {n_fit}",
            n_max + 1
        )));
    }
    let vol = region.volume();
    // Row N = 1 carries no information (every P vanishes) and is kept only in the residual.
    let rows: Vec<u64> = (2..=n_fit as u64).collect();
    let ideal = |nn: u64| nn as f64 * vol.ln() - crate::numerics::ln_factorial(nn);
    let mut a = DMatrix::<f64>::zeros(rows.len(), n_max);
    let mut y = DVector::<f64>::zeros(rows.len());
    for (r, &nn) in rows.iter().enumerate() {
        y[r] = log_z[nn as usize - 1] - ideal(nn);
        for n in 1..=n_max {
            a[(r, n - 1)] = nn as f64 * p_poly(nn, vol, n) / (n as f64 + 1.0);
        }
    }
    let scales: Vec<f64> = (0..n_max).map(|c| a.column(c).amax()).collect();
    if scales.contains(&0.0) {
        return Err(Error::Fit(
            "a coefficient column is identically zero".into(),
        ));
    }
    let mut scaled = a.clone();
    for (c, s) in scales.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = scaled.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond > FIT_CONDITION_MAX {
        return Err(Error::Fit(format!(
            "condition number {cond:.3e} above {FIT_CONDITION_MAX:.0e}"
        )));
    }
    let x = svd.solve(&y, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let values: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| v / s).collect();
    let fitted = scaled * &x;
    let mut residual = (log_z[0] - ideal(1)).abs();
    for r in 0..rows.len() {
        residual = residual.max((fitted[r] - y[r]).abs());
    }
    let table = ClusterTable::new(
        beta,
        Some(*region),
        CoefficientMode::OracleFitted,
        values,
        vec![0.0; n_max],
    )?;
    Ok(FitReport {
        table,
        residual,
        condition_number: cond,
    })
}

/// The series terms `F(n)` at reference density `rho`: `P_{N,|Λ|}(n) B(n)/(n+1)`
/// with `N = round(ρ|Λ|)` for finite-volume tables, `ρ^n β_n/(n+1)` otherwise.
pub fn series_terms(table: &ClusterTable, rho: f64) -> Vec<f64> {
    (1..=table.n_max())
        .map(|n| {
            let b = table.values[n - 1];
            let weight = match table.region {
                Some(r) => p_poly((rho * r.volume()).round() as u64, r.volume(), n),
                None => rho.powi(n as i32),
            };
            weight * b / (n as f64 + 1.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub constants: TailConstants,
    /// Non-decaying series, or a tail bound above [`TAIL_FRACTION_MAX`] of the retained sum.
    pub violation: bool,
    pub tail_bound: f64,
    pub retained: f64,
}

/// Fit `log|F(n)| ≈ log C − c n` over the nonzero terms. The constant `C` is
/// raised until the fitted line bounds every term.
pub fn decay_fit(table: &ClusterTable, rho: f64) -> Result<DecayFit> {
    let terms = series_terms(table, rho);
    let pts: Vec<(f64, f64)> = terms
        .iter()
        .enumerate()
        .filter(|(_, f)| **f != 0.0 && f.is_finite())
        .map(|(i, f)| ((i + 1) as f64, f.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} nonzero series terms, need 3",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, _) = linear_fit(&xs, &ys);
    let rate = -slope;
    let log_c = pts
        .iter()
        .map(|(n, l)| l + rate * n)
        .fold(f64::NEG_INFINITY, f64::max);
    let constants = TailConstants {
        prefactor: log_c.exp(),
        rate,
    };
    let retained: f64 = terms.iter().map(|f| f.abs()).sum();
    let tail_bound = constants.tail_after(table.n_max());
    let violation = !(rate > 0.0) || !(tail_bound <= TAIL_FRACTION_MAX * retained);
    Ok(DecayFit {
        constants,
        violation,
        tail_bound,
        retained,
    })
}

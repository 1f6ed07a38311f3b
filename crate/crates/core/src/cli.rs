//! Batch front-end: builds models from a [`RunConfig`], runs the pipelines
//! and writes CSV/JSON reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster_coeffs::{
    compute_table, decay_fit, fit_coefficients_from_oracle, ClusterTable, CoefficientMode,
};
use crate::config::{Chemical, PotentialKind, RunConfig, TableSource};
use crate::deviations::{k_normalization, lclt, moderate_dev, precise_ld, DeviationReport};
use crate::duality::{
    duality_point, log_mgf, mean_identity_residual, variance_identity_residual, DualityPoint,
    InfiniteVolume,
};
use crate::error::{Error, Result};
use crate::integrate::derive_seed;
use crate::oracle::{
    exact_prob, tonks_beta_mu, tonks_log_z_table, tonks_series_table, NumberDistribution,
};
use crate::potentials::{c_beta, check_condition_star, default_c0, PairPotential};
use crate::region::SimulationRegion;
use crate::thermo::{cal_f_derivative, grand_sum, pressure_grand, FreeEnergyModel};

/// Version tag carried by every JSON report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "cluster-ld",
    version,
    about = "Cluster-expansion thermodynamics and particle-number deviations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Serialized coefficient table for `source = load`.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Coefficient tables per volume plus the infinite-volume table.
    Coeffs,
    /// Pressure and mean density per volume.
    Thermo,
    /// Duality diagnostics per volume.
    Duality,
    /// Deviation estimates against the exact oracle.
    Deviations,
    /// Invariant checks; non-zero exit on any failure.
    Validate,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Argument(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

/// Parsed configuration plus everything shared by all volumes.
pub struct Pipeline {
    pub cfg: RunConfig,
    pub potential: PairPotential,
    pub c_beta: f64,
    pub c0: f64,
    pub mu0: f64,
    loaded: Option<ClusterTable>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, loaded: Option<ClusterTable>) -> Result<Self> {
        let potential = cfg.potential.build()?;
        if cfg.source == TableSource::Load && loaded.is_none() {
            return Err(Error::Argument(
                "coefficients.source = load needs --table".into(),
            ));
        }
        let c = c_beta(&potential, cfg.beta, &cfg.integration)?.value;
        let c0 = default_c0(cfg.beta, potential.stability_b);
        let mut p = Self {
            cfg,
            potential,
            c_beta: c,
            c0,
            mu0: 0.0,
            loaded,
        };
        p.mu0 = p.resolve_mu0()?;
        Ok(p)
    }

    fn resolve_mu0(&self) -> Result<f64> {
        match self.cfg.chemical {
            Chemical::Mu0(m) => Ok(m),
            Chemical::RhoTarget(r) if self.cfg.potential.is_tonks() => {
                let a = if self.cfg.potential.kind == PotentialKind::Zero {
                    0.0
                } else {
                    self.cfg.potential.a
                };
                Ok(tonks_beta_mu(r, a) / self.cfg.beta)
            }
            Chemical::RhoTarget(r) => self.infinite_volume()?.mu_of_rho(r),
        }
    }

    fn rod_length(&self) -> f64 {
        if self.cfg.potential.kind == PotentialKind::Zero {
            0.0
        } else {
            self.cfg.potential.a
        }
    }

    /// Infinite-volume coefficients: closed form for rods, otherwise integrated.
    pub fn infinite_table(&self) -> Result<ClusterTable> {
        let beta = self.cfg.beta;
        if self.cfg.potential.is_tonks() {
            let a = self.rod_length();
            let values = (1..=self.cfg.n_max)
                .map(|n| -((n + 1) as f64) * a.powi(n as i32) / n as f64)
                .collect();
            return ClusterTable::new(
                beta,
                None,
                CoefficientMode::InfiniteVolume,
                values,
                vec![0.0; self.cfg.n_max],
            );
        }
        let n = self.cfg.n_max.min(crate::cluster_coeffs::N_TENSOR_MAX);
        compute_table(
            &self.potential,
            beta,
            None,
            CoefficientMode::InfiniteVolume,
            n,
            &self.cfg.integration,
        )
    }

    pub fn infinite_volume(&self) -> Result<InfiniteVolume> {
        InfiniteVolume::new(self.cfg.beta, &self.infinite_table()?)
    }

    pub fn region(&self, side: f64) -> Result<SimulationRegion> {
        SimulationRegion::new(self.cfg.potential.dim, side)
    }

    pub fn table(&self, side: f64, index: usize) -> Result<ClusterTable> {
        let region = self.region(side)?;
        let beta = self.cfg.beta;
        let n_max = self.cfg.n_max;
        match self.cfg.source {
            TableSource::ClosedForm => {
                let a = self.rod_length();
                // The series needs n_max·a < L.
                let cap = if a > 0.0 {
                    ((side / a).ceil() as usize).saturating_sub(1).max(1)
                } else {
                    n_max
                };
                tonks_series_table(beta, side, a, n_max.min(cap))
            }
            TableSource::OracleFit { n_fit } => {
                let log_z = tonks_log_z_table(side, self.rod_length(), n_fit);
                Ok(fit_coefficients_from_oracle(&log_z[1..], beta, &region, n_max)?.table)
            }
            TableSource::Compute(mode) => {
                let mut cfg = self.cfg.integration;
                cfg.seed = derive_seed(self.cfg.seed, index as u64);
                compute_table(&self.potential, beta, Some(&region), mode, n_max, &cfg)
            }
            TableSource::Load => {
                let t = self.loaded.clone().expect("checked in new");
                if t.region != Some(region) {
                    return Err(Error::Argument(format!(
                        "loaded table does not match side {side}"
                    )));
                }
                Ok(t)
            }
        }
    }

    pub fn model(&self, side: f64, index: usize) -> Result<FreeEnergyModel> {
        let table = self.table(side, index)?;
        Ok(
            FreeEnergyModel::new(self.cfg.beta, self.region(side)?, table)?
                .with_stability_b(self.potential.stability_b)
                .with_condition(self.c_beta, self.c0),
        )
    }

    /// Exact number distribution when a closed-form oracle exists.
    pub fn oracle(&self, model: &FreeEnergyModel, mu: f64) -> Result<Option<NumberDistribution>> {
        if !self.cfg.potential.is_tonks() {
            return Ok(None);
        }
        let g = grand_sum(model, mu)?;
        let log_z = tonks_log_z_table(model.region.side, self.rod_length(), g.n_max());
        Ok(Some(exact_prob(&log_z, self.cfg.beta * mu, 0.0)?))
    }

    /// Largest observed constant of the large-deviation bound over the
    /// calibration volumes.
    pub fn calibrate_c(&self, us: &[f64]) -> Result<Option<f64>> {
        if self.cfg.calibration_sides.is_empty() || !self.cfg.potential.is_tonks() {
            return Ok(None);
        }
        let mut c: f64 = 0.0;
        for (i, &side) in self.cfg.calibration_sides.iter().enumerate() {
            let model = self.model(side, 10_000 + i)?;
            for &u in us {
                // Deviations that land on an empty box carry no constant.
                let Ok(mut r) = precise_ld(&model, self.mu0, u, None) else {
                    continue;
                };
                if let Some(d) = self.oracle(&model, self.mu0)? {
                    r.attach_oracle(&d);
                    c = c.max(r.observed_constant().unwrap_or(0.0));
                }
            }
        }
        Ok(Some(c))
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<T: Serialize> {
    schema_version: u32,
    command: &'static str,
    rows: T,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, command: &'static str, rows: T) -> Result<()> {
    let r = JsonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command,
        rows,
    };
    write_atomic(&dir.join(name), &(serde_json::to_string_pretty(&r)? + "\n"))
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.12e}"))
}

pub fn cmd_coeffs(p: &Pipeline, out: &Path) -> Result<String> {
    let sides = &p.cfg.sides;
    let tables: Vec<Result<ClusterTable>> = sides
        .par_iter()
        .enumerate()
        .map(|(i, &s)| p.table(s, i))
        .collect();
    let inf = p.infinite_table()?;
    let rho_ref = match p.cfg.chemical {
        Chemical::RhoTarget(r) => r,
        Chemical::Mu0(_) => p
            .model(sides[0], 0)
            .and_then(|m| duality_point(&m, p.mu0))
            .map(|d| d.rho_bar)?,
    };
    let mut csv = String::from("side,n,value,uncertainty\n");
    let mut log = String::new();
    for (side, t) in sides.iter().zip(&tables) {
        let t = t.as_ref().map_err(|e| e.clone())?;
        t.save(&out.join(format!("coeffs_L{side}.json")))?;
        for (i, (v, u)) in t.values.iter().zip(&t.uncertainty).enumerate() {
            writeln!(csv, "{side},{},{v:.15e},{u:.3e}", i + 1).unwrap();
        }
    }
    inf.save(&out.join("coeffs_inf.json"))?;
    for (i, (v, u)) in inf.values.iter().zip(&inf.uncertainty).enumerate() {
        writeln!(csv, "inf,{},{v:.15e},{u:.3e}", i + 1).unwrap();
    }
    write_atomic(&out.join("coeffs.csv"), &csv)?;
    match decay_fit(&inf, rho_ref) {
        Ok(f) => writeln!(
            log,
            "decay fit at rho={rho_ref}: C={:.6e} c={:.6} tail={:.3e} violation={}",
            f.constants.prefactor, f.constants.rate, f.tail_bound, f.violation
        )
        .unwrap(),
        Err(e) => writeln!(log, "decay fit at rho={rho_ref}: {e}").unwrap(),
    }
    Ok(log)
}

#[derive(Debug, Clone, Serialize)]
struct ThermoRow {
    side: f64,
    volume: f64,
    mu0: f64,
    beta_p: f64,
    p_tail: f64,
    rho_bar: f64,
    n_max: usize,
    remainder: f64,
    condition_ratio: f64,
    warnings: String,
}

fn thermo_row(p: &Pipeline, side: f64, i: usize) -> Result<ThermoRow> {
    let m = p.model(side, i)?;
    let pr = pressure_grand(&m, p.mu0)?;
    let g = grand_sum(&m, p.mu0)?;
    let rho_bar = g.mean() / m.volume();
    Ok(ThermoRow {
        side,
        volume: m.volume(),
        mu0: p.mu0,
        beta_p: m.beta * pr.value,
        p_tail: pr.tail_bound,
        rho_bar,
        n_max: g.n_max(),
        remainder: g.remainder,
        condition_ratio: check_condition_star(rho_bar, m.c_beta, m.c0).ratio,
        warnings: pr.warnings.label(),
    })
}

pub fn cmd_thermo(p: &Pipeline, out: &Path) -> Result<String> {
    let rows: Vec<ThermoRow> = p
        .cfg
        .sides
        .par_iter()
        .enumerate()
        .map(|(i, &s)| thermo_row(p, s, i))
        .collect::<Result<_>>()?;
    let mut csv = String::from(
        "side,volume,mu0,beta_p,p_tail,rho_bar,n_max,remainder,condition_ratio,warnings\n",
    );
    for r in &rows {
        writeln!(
            csv,
            "{},{},{:.15e},{:.15e},{:.3e},{:.15e},{},{:.3e},{:.6},{}",
            r.side,
            r.volume,
            r.mu0,
            r.beta_p,
            r.p_tail,
            r.rho_bar,
            r.n_max,
            r.remainder,
            r.condition_ratio,
            r.warnings
        )
        .unwrap();
    }
    write_atomic(&out.join("thermo.csv"), &csv)?;
    write_json(out, "thermo.json", "thermo", &rows)?;
    Ok(String::new())
}

#[derive(Debug, Clone, Serialize)]
struct DualityRow {
    side: f64,
    point: DualityPoint,
    condition_ratio: f64,
}

pub fn cmd_duality(p: &Pipeline, out: &Path) -> Result<String> {
    let rows: Vec<DualityRow> = p
        .cfg
        .sides
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let m = p.model(s, i)?;
            let point = duality_point(&m, p.mu0)?;
            let condition_ratio = check_condition_star(point.rho_bar, m.c_beta, m.c0).ratio;
            Ok(DualityRow {
                side: s,
                point,
                condition_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from(
        "side,mu0,rho_bar,n_bar,sigma2,n_star,rho_star,mu_consistency_residual,n_star_at_boundary,condition_ratio\n",
    );
    for r in &rows {
        let d = &r.point;
        writeln!(
            csv,
            "{},{:.15e},{:.15e},{},{:.15e},{},{:.15e},{:.3e},{},{:.6}",
            r.side,
            d.mu0,
            d.rho_bar,
            d.n_bar,
            d.sigma2,
            d.n_star,
            d.rho_star,
            d.mu_consistency_residual,
            d.n_star_at_boundary,
            r.condition_ratio
        )
        .unwrap();
    }
    write_atomic(&out.join("duality.csv"), &csv)?;
    write_json(out, "duality.json", "duality", &rows)?;
    Ok(String::new())
}

/// One deviation row; failures are kept in place of the report.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationRow {
    pub side: f64,
    pub alpha: f64,
    pub u: f64,
    pub report: Option<DeviationReport>,
    pub status: String,
}

pub fn deviation_rows(p: &Pipeline, c_fit: Option<f64>) -> Vec<DeviationRow> {
    let grid = p.cfg.grid();
    let jobs: Vec<(usize, f64, f64, f64)> = p
        .cfg
        .sides
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| grid.iter().map(move |&(a, u)| (i, s, a, u)))
        .collect();
    jobs.par_iter()
        .map(|&(i, side, alpha, u)| {
            let run = || -> Result<DeviationReport> {
                let m = p.model(side, i)?;
                let mut r = if alpha == 1.0 {
                    precise_ld(&m, p.mu0, u, c_fit)?
                } else if alpha == 0.5 {
                    lclt(&m, p.mu0, u)?
                } else {
                    moderate_dev(&m, p.mu0, u, alpha)?
                };
                if let Some(d) = p.oracle(&m, p.mu0)? {
                    r.attach_oracle(&d);
                }
                Ok(r)
            };
            match run() {
                Ok(r) => DeviationRow {
                    side,
                    alpha,
                    u,
                    status: "ok".into(),
                    report: Some(r),
                },
                Err(e) => DeviationRow {
                    side,
                    alpha,
                    u,
                    report: None,
                    status: e.to_string().replace(',', ";"),
                },
            }
        })
        .collect()
}

pub const DEVIATION_CSV_HEADER: &str =
    "side,alpha,u,u_eff,n_tilde,estimate,oracle,rate,d_variant,e,residual,budget,status";

pub fn deviation_csv(rows: &[DeviationRow]) -> String {
    let mut csv = String::from(DEVIATION_CSV_HEADER);
    csv.push('\n');
    for r in rows {
        match &r.report {
            Some(d) => {
                let budget = d.budget().unwrap_or(f64::INFINITY);
                writeln!(
                    csv,
                    "{},{},{},{:.12e},{},{:.12e},{},{:.12e},{:.12e},{:.12e},{},{:.12e},{}",
                    r.side,
                    r.alpha,
                    r.u,
                    d.spec.effective_u,
                    d.spec.n_tilde,
                    d.estimate,
                    opt(d.oracle),
                    d.rate,
                    d.d_variant,
                    d.error_e,
                    opt(d.oracle_residual),
                    budget,
                    r.status
                )
                .unwrap();
            }
            None => writeln!(csv, "{},{},{},,,,,,,,,,{}", r.side, r.alpha, r.u, r.status).unwrap(),
        }
    }
    csv
}

pub fn cmd_deviations(p: &Pipeline, out: &Path) -> Result<String> {
    let c_fit = match p.cfg.c_fit {
        Some(c) => Some(c),
        None => p.calibrate_c(&p.cfg.us)?,
    };
    let rows = deviation_rows(p, c_fit);
    write_atomic(&out.join("deviations.csv"), &deviation_csv(&rows))?;
    write_json(out, "deviations.json", "deviations", &rows)?;
    let mut plot = String::from("alpha,u,volume,log_volume,log_rel_residual\n");
    for r in &rows {
        if let Some(d) = &r.report {
            if let Some(res) = d.oracle_residual.filter(|x| *x > 0.0) {
                writeln!(
                    plot,
                    "{},{},{},{:.12e},{:.12e}",
                    r.alpha,
                    r.u,
                    d.volume,
                    d.volume.ln(),
                    (res / d.estimate).ln()
                )
                .unwrap();
            }
        }
    }
    write_atomic(&out.join("deviations_plot.csv"), &plot)?;
    let failed = rows.iter().filter(|r| r.report.is_none()).count();
    Ok(format!(
        "{} rows, {failed} failed, c_fit={}\n",
        rows.len(),
        c_fit.map_or("none".into(), |c| format!("{c:.6}"))
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((pass, detail)) => Check {
            name: name.into(),
            pass,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// Invariant suite for one configuration.
pub fn validate_checks(p: &Pipeline) -> Vec<Check> {
    let mut out = Vec::new();
    let mu0 = p.mu0;
    let inf = p.infinite_table();
    let rho_ref = match p.cfg.chemical {
        Chemical::RhoTarget(r) => Some(r),
        Chemical::Mu0(_) => None,
    };
    if let Some(rho) = rho_ref {
        out.push(check(
            "condition-star-target",
            Ok({
                let c = check_condition_star(rho, p.c_beta, p.c0);
                (c.holds, format!("ratio {:.4}", c.ratio))
            }),
        ));
        out.push(check(
            "decay-fit",
            inf.clone().and_then(|t| match decay_fit(&t, rho) {
                Ok(f) => Ok((
                    !f.violation,
                    format!("C={:.3e} c={:.4}", f.constants.prefactor, f.constants.rate),
                )),
                Err(Error::InsufficientData(m)) => Ok((true, format!("skipped: {m}"))),
                Err(e) => Err(e),
            }),
        ));
    }
    let mut gaps = Vec::new();
    for (i, &side) in p.cfg.sides.iter().enumerate() {
        let tag = |s: &str| format!("{s}[L={side}]");
        let model = match p.model(side, i) {
            Ok(m) => m,
            Err(e) => {
                out.push(check(tag("model"), Err(e)));
                continue;
            }
        };
        let point = duality_point(&model, mu0);
        out.push(check(
            tag("condition-star"),
            point.clone().map(|d| {
                let c = check_condition_star(d.rho_bar, model.c_beta, model.c0);
                (c.holds, format!("ratio {:.4}", c.ratio))
            }),
        ));
        out.push(check(
            tag("stirling-sandwich"),
            grand_sum(&model, mu0).map(|g| {
                let top = g.n_max().clamp(1, 10_000);
                let bad = (1..=top)
                    .filter(|&n| {
                        let x = n as f64;
                        let r = crate::numerics::stirling_remainder(x);
                        !(1.0 / (12.0 * x + 1.0) < r && r < 1.0 / (12.0 * x))
                    })
                    .count();
                (bad == 0, format!("{bad} violations up to N={top}"))
            }),
        ));
        out.push(check(
            tag("probability-sum"),
            grand_sum(&model, mu0).map(|g| {
                let s: f64 = g.probabilities().iter().sum();
                ((s - 1.0).abs() <= 1e-10, format!("sum-1 = {:.2e}", s - 1.0))
            }),
        ));
        out.push(check(
            tag("k-times-sum-j"),
            point
                .clone()
                .and_then(|d| k_normalization(&model, mu0, d.n_star))
                .map(|k| {
                    let r = (k.log_k + k.log_sum_j).exp() - 1.0;
                    (r.abs() <= 1e-12, format!("{r:.2e}"))
                }),
        ));
        out.push(check(
            tag("mgf-at-zero"),
            log_mgf(&model, mu0, 0.0).map(|l| (l.abs() <= 1e-12, format!("{l:.2e}"))),
        ));
        out.push(check(
            tag("mean-identity"),
            mean_identity_residual(&model, mu0, 1e-4).map(|r| (r <= 1e-4, format!("{r:.2e}"))),
        ));
        out.push(check(
            tag("variance-identity"),
            variance_identity_residual(&model, mu0, 1e-3).map(|r| (r <= 1e-4, format!("{r:.2e}"))),
        ));
        out.push(check(
            tag("derivatives"),
            point.clone().and_then(|d| {
                let rho = d.rho_bar;
                let h = 1e-5 * rho;
                let mut worst: f64 = 0.0;
                for m in 1..=3 {
                    let f = |r: f64| cal_f_derivative(&model, r, m - 1).map(|s| s.value);
                    let fd = (f(rho + h)? - f(rho - h)?) / (2.0 * h);
                    let an = cal_f_derivative(&model, rho, m)?.value;
                    worst = worst.max((fd - an).abs() / an.abs().max(1e-300));
                }
                Ok((worst <= 1e-5, format!("max rel {worst:.2e}")))
            }),
        ));
        if let Ok(d) = &point {
            gaps.push(d.n_bar as i64 - d.n_star as i64);
        }
    }
    if !gaps.is_empty() {
        let lo = *gaps.iter().min().unwrap();
        let hi = *gaps.iter().max().unwrap();
        out.push(check(
            "center-gap-bounded",
            Ok((hi - lo <= 2 && lo >= 0, format!("N̄-N* in [{lo}, {hi}]"))),
        ));
    }
    let c_fit = match p.cfg.c_fit {
        Some(c) => Ok(Some(c)),
        None => p.calibrate_c(&p.cfg.us),
    };
    match c_fit {
        Err(e) => out.push(check("calibration", Err(e))),
        Ok(c_fit) => {
            for r in deviation_rows(p, c_fit) {
                let name = format!("deviation[L={},alpha={},u={}]", r.side, r.alpha, r.u);
                let res = match &r.report {
                    None => Err(Error::Regime(r.status.clone())),
                    Some(d) => match (d.oracle_residual, d.budget()) {
                        (Some(res), Some(b)) => {
                            Ok((res <= b, format!("residual {res:.3e} budget {b:.3e}")))
                        }
                        (None, _) => Ok((true, "no oracle".into())),
                        (Some(res), None) => {
                            Ok((true, format!("residual {res:.3e}, bound constant unknown")))
                        }
                    },
                };
                out.push(check(name, res));
            }
        }
    }
    out
}

pub fn cmd_validate(p: &Pipeline, out: &Path) -> Result<(String, bool)> {
    let checks = validate_checks(p);
    let mut log = String::new();
    for c in &checks {
        writeln!(
            log,
            "{} {} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )
        .unwrap();
    }
    let ok = checks.iter().all(|c| c.pass);
    write_json(out, "validate.json", "validate", &checks)?;
    Ok((log, ok))
}

/// Runs one command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = (|| -> Result<i32> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| Error::Argument("--config is required".into()))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(o) = &cli.out {
            cfg.out_dir = o.clone();
        }
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        let loaded = cli.table.as_deref().map(ClusterTable::load).transpose()?;
        let out = cfg.out_dir.clone();
        std::fs::create_dir_all(&out)?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cli.threads {
            builder = builder.num_threads(t);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Argument(e.to_string()))?;
        pool.install(|| {
            let p = Pipeline::new(cfg, loaded)?;
            let (log, code) = match cli.command {
                Command::Coeffs => (cmd_coeffs(&p, &out)?, EXIT_OK),
                Command::Thermo => (cmd_thermo(&p, &out)?, EXIT_OK),
                Command::Duality => (cmd_duality(&p, &out)?, EXIT_OK),
                Command::Deviations => (cmd_deviations(&p, &out)?, EXIT_OK),
                Command::Validate => {
                    let (log, ok) = cmd_validate(&p, &out)?;
                    (log, if ok { EXIT_OK } else { EXIT_VALIDATION })
                }
            };
            print!("{log}");
            Ok(code)
        })
    })();
    match result {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers, `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cluster_coeffs::CoefficientMode;
use crate::error::{Error, Result};
use crate::integrate::{IntegrationConfig, Scheme};
use crate::potentials::PairPotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Zero,
    HardCore,
    SquareWell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub dim: usize,
    pub a: f64,
    pub range: f64,
    pub depth: f64,
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PairPotential> {
        match self.kind {
            PotentialKind::Zero => Ok(PairPotential::zero(self.dim)),
            PotentialKind::HardCore => PairPotential::hard_core(self.dim, self.a),
            PotentialKind::SquareWell => {
                PairPotential::square_well(self.dim, self.a, self.range, self.depth)
            }
        }
    }

    /// One-dimensional hard rods, where the closed-form oracle applies.
    pub fn is_tonks(&self) -> bool {
        self.dim == 1 && matches!(self.kind, PotentialKind::HardCore | PotentialKind::Zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableSource {
    /// Quadrature or polymer route through `compute_table`.
    Compute(CoefficientMode),
    /// Closed-form hard-rod coefficients.
    ClosedForm,
    /// Least-squares fit to the exact canonical partition functions.
    OracleFit { n_fit: usize },
    /// A serialized table given with `--table`.
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chemical {
    Mu0(f64),
    /// `μ0` from the infinite-volume equation of state at this density.
    RhoTarget(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub beta: f64,
    pub sides: Vec<f64>,
    pub chemical: Chemical,
    pub source: TableSource,
    pub n_max: usize,
    pub integration: IntegrationConfig,
    pub alphas: Vec<f64>,
    pub us: Vec<f64>,
    /// Constant of the large-deviation bound; calibrated when absent.
    pub c_fit: Option<f64>,
    pub calibration_sides: Vec<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Parsed `section.key` map with line numbers kept for error reports.
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header"))?
                    .trim();
                if name.is_empty() || name.contains(['[', ']', '.', '=']) {
                    return Err(err(line, format!("bad section name '{name}'")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key = value, got '{body}'")))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(err(line, format!("bad key '{k}'")));
            }
            if section.is_empty() {
                return Err(err(line, format!("key '{k}' outside any section")));
            }
            let key = format!("{section}.{k}");
            if let Some(prev) = entries.get(&key) {
                let prev: &Entry = prev;
                return Err(err(
                    line,
                    format!("duplicate key '{key}' (first on line {})", prev.line),
                ));
            }
            entries.insert(
                key,
                Entry {
                    value: v.trim().to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<(f64, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| err(line, format!("'{key}' expects a number, got '{v}'")))?;
                if !x.is_finite() {
                    return Err(err(line, format!("'{key}' must be finite")));
                }
                Ok(Some((x, line)))
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<(f64, usize)> {
        Ok(self.f64_opt(key)?.unwrap_or((default, 0)))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| {
                err(
                    line,
                    format!("'{key}' expects a non-negative integer, got '{v}'"),
                )
            }),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<(Vec<f64>, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => {
                if v.is_empty() {
                    return Ok(Some((Vec::new(), line)));
                }
                let xs = v
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            err(line, format!("'{key}' has a bad entry '{}'", s.trim()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some((xs, line)))
            }
        }
    }

    fn finish(&self) -> Result<()> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => Err(err(e.line, format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;

        let (kind, kind_line) = raw
            .take("model.potential")
            .ok_or_else(|| err(0, "missing model.potential"))?;
        let kind = match kind.as_str() {
            "zero" => PotentialKind::Zero,
            "hard-core" => PotentialKind::HardCore,
            "square-well" => PotentialKind::SquareWell,
            other => return Err(err(kind_line, format!("unknown potential '{other}'"))),
        };
        let dim = raw.usize_or("model.dim", 1)?;
        let (a, _) = raw.f64_or("model.a", 1.0)?;
        let (range, _) = raw.f64_or("model.range", a)?;
        let (depth, _) = raw.f64_or("model.depth", 0.0)?;
        let potential = PotentialSpec {
            kind,
            dim,
            a,
            range,
            depth,
        };
        let (beta, beta_line) = raw.f64_or("model.beta", 1.0)?;
        if !(beta > 0.0) {
            return Err(err(beta_line, format!("beta must be positive, got {beta}")));
        }

        let (sides, sides_line) = raw
            .list("sweep.sides")?
            .ok_or_else(|| err(0, "missing sweep.sides"))?;
        if sides.is_empty() || sides.iter().any(|s| !(*s > 0.0)) {
            return Err(err(sides_line, "sweep.sides needs positive side lengths"));
        }
        let mu0 = raw.f64_opt("sweep.mu0")?;
        let rho = raw.f64_opt("sweep.rho_target")?;
        let chemical = match (mu0, rho) {
            (Some((m, _)), None) => Chemical::Mu0(m),
            (None, Some((r, line))) => {
                if !(r > 0.0) {
                    return Err(err(line, "sweep.rho_target must be positive"));
                }
                Chemical::RhoTarget(r)
            }
            (Some(_), Some((_, line))) => {
                return Err(err(line, "give either sweep.mu0 or sweep.rho_target"))
            }
            (None, None) => return Err(err(0, "missing sweep.mu0 or sweep.rho_target")),
        };
        let calibration_sides = raw
            .list("sweep.calibration_sides")?
            .map(|x| x.0)
            .unwrap_or_default();

        let source = match raw.take("coefficients.source") {
            None => TableSource::ClosedForm,
            Some((s, line)) => match s.as_str() {
                "closed-form" => TableSource::ClosedForm,
                "load" => TableSource::Load,
                "oracle-fit" => TableSource::OracleFit {
                    n_fit: raw.usize_or("coefficients.n_fit", 8)?,
                },
                "compute" => {
                    let (m, mline) = raw
                        .take("coefficients.mode")
                        .unwrap_or(("polymer-exact".into(), line));
                    let mode = CoefficientMode::parse(&m)
                        .ok_or_else(|| err(mline, format!("unknown mode '{m}'")))?;
                    TableSource::Compute(mode)
                }
                other => return Err(err(line, format!("unknown coefficient source '{other}'"))),
            },
        };
        if matches!(
            source,
            TableSource::ClosedForm | TableSource::OracleFit { .. }
        ) && !potential.is_tonks()
        {
            return Err(err(0, "closed-form and oracle-fit tables need a one-dimensional hard-core or zero potential"));
        }
        let n_max = raw.usize_or("coefficients.n_max", 3)?;
        if n_max == 0 {
            return Err(err(0, "coefficients.n_max must be at least 1"));
        }
        let mut integration = IntegrationConfig::default();
        integration.points = raw.usize_or("coefficients.points", integration.points)?;
        integration.samples = raw.usize_or("coefficients.samples", integration.samples)?;
        if let Some((s, line)) = raw.take("coefficients.scheme") {
            integration.scheme = match s.as_str() {
                "tensor-quadrature" => Scheme::TensorQuadrature,
                "monte-carlo" => Scheme::MonteCarlo,
                other => return Err(err(line, format!("unknown scheme '{other}'"))),
            };
        }

        let alphas = raw
            .list("deviations.alpha")?
            .map(|x| x.0)
            .unwrap_or_default();
        if let Some(bad) = alphas.iter().find(|a| !(0.5..=1.0).contains(*a)) {
            return Err(err(
                0,
                format!("deviations.alpha entries must lie in [0.5, 1], got {bad}"),
            ));
        }
        let us = raw.list("deviations.u")?.map(|x| x.0).unwrap_or_default();
        let c_fit = raw.f64_opt("deviations.c_fit")?.map(|x| x.0);

        let out_dir = raw
            .take("output.dir")
            .map(|x| PathBuf::from(x.0))
            .unwrap_or_else(|| PathBuf::from("out"));
        let seed = match raw.take("output.seed") {
            None => 0,
            Some((v, line)) => v
                .parse()
                .map_err(|_| err(line, format!("output.seed expects a u64, got '{v}'")))?,
        };
        raw.finish()?;
        Ok(Self {
            potential,
            beta,
            sides,
            chemical,
            source,
            n_max,
            integration,
            alphas,
            us,
            c_fit,
            calibration_sides,
            out_dir,
            seed,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Deviation grid as `(α, u)` pairs in canonical order.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.alphas
            .iter()
            .flat_map(|&a| self.us.iter().map(move |&u| (a, u)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[model]\npotential = hard-core\na = 1\nbeta = 1\n[sweep]\nsides = 50, 100\nrho_target = 0.03\n";

    #[test]
    fn parses_minimal() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.sides, vec![50.0, 100.0]);
        assert_eq!(c.chemical, Chemical::RhoTarget(0.03));
        assert_eq!(c.source, TableSource::ClosedForm);
        assert!(c.grid().is_empty());
    }

    #[test]
    fn negative_beta_reports_line() {
        let text = BASE.replace("beta = 1", "beta = -1");
        match RunConfig::parse(&text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(matches!(
            RunConfig::parse(&format!("{BASE}bogus = 1\n")),
            Err(Error::Config { line: 8, .. })
        ));
        assert!(matches!(
            RunConfig::parse(&format!("{BASE}sides = 3\n")),
            Err(Error::Config { line: 8, .. })
        ));
        assert!(matches!(
            RawConfig::parse("x = 1"),
            Err(Error::Config { line: 1, .. })
        ));
    }

    #[test]
    fn grid_order() {
        let c = RunConfig::parse(&format!(
            "{BASE}[deviations]\nalpha = 1, 0.5\nu = 0.01, 0.1\n"
        ))
        .unwrap();
        assert_eq!(
            c.grid(),
            vec![(1.0, 0.01), (1.0, 0.1), (0.5, 0.01), (0.5, 0.1)]
        );
    }
}

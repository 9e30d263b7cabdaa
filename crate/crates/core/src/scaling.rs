//! Regime classification, bound formulas, power-law fits, sweeps and the
//! phase diagram.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::constructions::{self, ConstructedState, ConstructionId, ConstructionParams};
use crate::energies::{default_eta, EnergyBreakdown, EnergyParams, Evaluator, FunctionalKind};
use crate::error::{Error, Result};
use crate::fields::{BoundarySpec, Grid, VectorField2};
use crate::optimize::{self, MinimizeOptions};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    A,
    B,
    C,
    D,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::A, Regime::B, Regime::C, Regime::D];

    pub fn label(&self) -> &'static str {
        match self {
            Regime::A => "A",
            Regime::B => "B",
            Regime::C => "C",
            Regime::D => "D",
        }
    }

    /// Upper-bound formula without its constant.
    pub fn formula(&self, sigma: f64, gamma: f64) -> f64 {
        match self {
            Regime::A => 1.0,
            Regime::B => (sigma * gamma).powf(0.4),
            Regime::C => sigma.sqrt() * gamma.powf(0.625),
            Regime::D => sigma,
        }
    }

    fn admits(&self, sigma: f64, gamma: f64) -> bool {
        let (lo_c, hi_c) = (sigma.powf(0.8), sigma.powf(-4.0 / 9.0));
        match self {
            Regime::A => sigma * gamma > 1.0,
            Regime::B => hi_c <= gamma && gamma <= 1.0 / sigma,
            Regime::C => lo_c <= gamma && gamma <= hi_c,
            Regime::D => gamma < lo_c,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.label() == s)
            .ok_or_else(|| Error::input("regime", format!("unknown label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LowerRegime {
    A,
    BPrime,
    DPrime,
}

impl LowerRegime {
    pub fn label(&self) -> &'static str {
        match self {
            LowerRegime::A => "A",
            LowerRegime::BPrime => "B'",
            LowerRegime::DPrime => "D'",
        }
    }
}

pub fn check_point(sigma: f64, gamma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::input("sigma", format!("must lie in (0, 1), got {sigma}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::input("gamma", format!("must be positive, got {gamma}")));
    }
    Ok(())
}

/// Upper-bound regime; on shared boundaries the smaller formula wins, then the
/// earlier label.
pub fn classify_regime(sigma: f64, gamma: f64) -> Result<Regime> {
    check_point(sigma, gamma)?;
    let mut best: Option<(Regime, f64)> = None;
    for r in Regime::ALL {
        if r.admits(sigma, gamma) {
            let v = r.formula(sigma, gamma);
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((r, v));
            }
        }
    }
    best.map(|(r, _)| r)
        .ok_or_else(|| Error::Regime(format!("no regime admits sigma={sigma}, gamma={gamma}")))
}

pub fn upper_bound_value(sigma: f64, gamma: f64) -> Result<f64> {
    Ok(classify_regime(sigma, gamma)?.formula(sigma, gamma))
}

/// Lower-bound regime; between `σ^{1/2}` and `σ^{−1}` the bound is `(σγ)^{2/3}`.
pub fn lower_regime(sigma: f64, gamma: f64) -> Result<LowerRegime> {
    check_point(sigma, gamma)?;
    Ok(if sigma * gamma > 1.0 {
        LowerRegime::A
    } else if gamma >= sigma.sqrt() {
        LowerRegime::BPrime
    } else {
        LowerRegime::DPrime
    })
}

pub fn lower_bound_value(sigma: f64, gamma: f64) -> Result<f64> {
    Ok(match lower_regime(sigma, gamma)? {
        LowerRegime::A => 1.0,
        LowerRegime::BPrime => (sigma * gamma).powf(2.0 / 3.0),
        LowerRegime::DPrime => sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_max: f64,
}

/// Least squares on `(ln x, ln y)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::input("points", "need at least 3 points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::input("points", "all coordinates must be positive and finite"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = crate::sum::sum(lx.iter().copied()) / n;
    let my = crate::sum::sum(ly.iter().copied()) / n;
    let mut sxx = NeumaierSum::new();
    let mut sxy = NeumaierSum::new();
    let mut syy = NeumaierSum::new();
    for (a, b) in lx.iter().zip(&ly) {
        let (dx, dy) = (a - mx, b - my);
        sxx.add(dx * dx);
        sxy.add(dx * dy);
        syy.add(dy * dy);
    }
    let (sxx, sxy, syy) = (sxx.value(), sxy.value(), syy.value());
    if sxx == 0.0 {
        return Err(Error::input("points", "abscissae must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_max = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(FitResult { slope, intercept, r_squared, residual_max })
}

/// `n` log-uniform samples from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub sigmas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `labels[i][j]` belongs to `(sigmas[i], gammas[j])`.
    pub labels: Vec<Vec<Regime>>,
    pub curves: Vec<BoundaryCurve>,
}

/// Regime lattice on a log-log rectangle; a degenerate axis (`lo == hi`)
/// contributes a single sample.
pub fn phase_diagram(sigma_range: (f64, f64), gamma_range: (f64, f64), resolution: usize) -> Result<PhaseDiagram> {
    let (s0, s1) = sigma_range;
    let (g0, g1) = gamma_range;
    check_point(s0, g0)?;
    check_point(s1, g1)?;
    if s0 > s1 || g0 > g1 {
        return Err(Error::input("range", "ranges must be nondecreasing"));
    }
    let axis = |lo: f64, hi: f64| -> Result<Vec<f64>> {
        if lo == hi {
            Ok(vec![lo])
        } else if resolution < 2 {
            Err(Error::input("resolution", "need at least 2 samples per axis"))
        } else {
            Ok(log_space(lo, hi, resolution))
        }
    };
    let sigmas = axis(s0, s1)?;
    let gammas = axis(g0, g1)?;
    let labels = sigmas
        .iter()
        .map(|&s| gammas.iter().map(|&g| classify_regime(s, g)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let curve = |name: &str, e: f64| BoundaryCurve {
        name: name.to_string(),
        points: sigmas.iter().map(|&s| (s, s.powf(e))).collect(),
    };
    let curves = vec![curve("A|B", -1.0), curve("B|C", -4.0 / 9.0), curve("C|D", 0.8)];
    Ok(PhaseDiagram { sigmas, gammas, labels, curves })
}

/// Strip cells per tube width along `y` for laminate sweeps.
pub const LAMINATE_CELLS_PER_TUBE: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    ConstructOnly,
    ConstructMinimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub sigma: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub points: Vec<SweepPoint>,
    /// Cells along `x`; see [`sweep_grid`] for the other axis.
    pub grid: usize,
    pub mode: SweepMode,
    /// `None` selects the construction by regime.
    pub construction: Option<ConstructionId>,
    pub minimize_iterations: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            grid: 128,
            mode: SweepMode::ConstructOnly,
            construction: None,
            minimize_iterations: 100,
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::input("points", "sweep needs at least one point"));
        }
        for p in &self.points {
            check_point(p.sigma, p.gamma)?;
        }
        if self.grid < 8 {
            return Err(Error::input("grid", format!("need at least 8 cells, got {}", self.grid)));
        }
        if self.mode == SweepMode::ConstructMinimize && self.minimize_iterations == 0 {
            return Err(Error::input("minimize_iterations", "must be positive when minimizing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub regime: Regime,
    pub construction: ConstructionId,
    /// Bonded energy per unit tangential width; `None` when the point failed.
    pub energy: Option<EnergyBreakdown>,
    pub constructed_total: Option<f64>,
    pub minimized: bool,
    pub converged: bool,
    pub grid: Option<Grid>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn total(&self) -> Option<f64> {
        self.energy.map(|e| e.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub grid: usize,
    pub seed: u64,
    pub mode: SweepMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub provenance: Provenance,
}

impl SweepResult {
    /// Power-law fit of total energy against `x(record)` over successful records.
    pub fn fit<F: Fn(&SweepRecord) -> f64>(&self, x: F) -> Result<FitResult> {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter_map(|r| r.total().map(|t| (x(r), t)))
            .collect();
        fit_power_law(&pts)
    }
}

/// Domain and resolution used for one sweep point: unit square for flat,
/// tent and blister states, one-period strips for laminates and tubes.
pub fn sweep_grid(id: ConstructionId, n: usize, sigma: f64, gamma: f64) -> Result<Grid> {
    match id {
        ConstructionId::Flat | ConstructionId::MollifiedTent | ConstructionId::BranchedBlister => Grid::unit(n),
        ConstructionId::Laminate => {
            let p = constructions::laminate_params_formula(sigma, gamma);
            let ny = ((LAMINATE_CELLS_PER_TUBE * p.period / p.tube_width).ceil() as usize).max(n);
            constructions::laminate_strip_grid(n, ny, sigma, gamma)
        }
        ConstructionId::BranchedTubes => constructions::tube_strip_grid(n, (n / 2).max(4), sigma, gamma),
    }
}

/// Builds construction `id` on `grid`; regime-specific builders check the regime.
pub fn build_construction(id: ConstructionId, grid: &Grid, sigma: f64, gamma: f64) -> Result<ConstructedState> {
    match id {
        ConstructionId::Flat => Ok(constructions::flat(grid)),
        ConstructionId::MollifiedTent => {
            let w = constructions::mollified_tent(grid, sigma)?;
            Ok(ConstructedState {
                id,
                u: VectorField2::zeros(*grid),
                w,
                boundary: BoundarySpec::all_dirichlet(),
                predicted_energy: 1.0 + 8.0 / 3.0 * sigma,
                params_used: ConstructionParams::None,
            })
        }
        ConstructionId::Laminate => constructions::laminate(grid, sigma, gamma),
        ConstructionId::BranchedTubes => constructions::branched_tubes(grid, sigma, gamma),
        ConstructionId::BranchedBlister => constructions::branched_blister(grid, sigma),
    }
}

fn run_point(spec: &SweepSpec, index: usize, pt: SweepPoint) -> Result<SweepRecord> {
    let (sigma, gamma) = (pt.sigma, pt.gamma);
    let regime = classify_regime(sigma, gamma)?;
    let id = spec.construction.unwrap_or_else(|| ConstructionId::for_regime(regime));
    let mut rec = SweepRecord {
        index,
        sigma,
        gamma,
        regime,
        construction: id,
        energy: None,
        constructed_total: None,
        minimized: false,
        converged: true,
        grid: None,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let grid = sweep_grid(id, spec.grid, sigma, gamma)?;
        rec.grid = Some(grid);
        let eta = default_eta(&grid);
        let cs = build_construction(id, &grid, sigma, gamma)?;
        let built = cs.bonded_per_width(sigma, gamma, eta)?;
        rec.constructed_total = Some(built.total);
        rec.energy = Some(built);
        if spec.mode == SweepMode::ConstructMinimize {
            let opts = MinimizeOptions {
                max_iter: spec.minimize_iterations,
                kind: FunctionalKind::BondedSmooth,
                params: EnergyParams { sigma, gamma, eta, ..EnergyParams::default() },
                boundary: cs.boundary,
                ..MinimizeOptions::default()
            };
            let res = optimize::minimize(&cs.state(), &opts)?;
            let e = Evaluator::new(grid).bonded(&res.state, sigma, gamma, eta)?;
            rec.energy = Some(constructions::per_width(e, grid.ly));
            rec.minimized = true;
            rec.converged = res.converged;
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
        rec.converged = false;
    }
    Ok(rec)
}

/// Evaluates every point independently; records come back in input order and
/// per-point failures are stored rather than propagated.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let records = spec
        .points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| run_point(spec, i, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        records,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            grid: spec.grid,
            seed: spec.seed,
            mode: spec.mode,
        },
    })
}

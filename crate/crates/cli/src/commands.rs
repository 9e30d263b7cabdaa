use std::str::FromStr;

use anyhow::Result;
use delamina::constructions::{self, ConstructedState, ConstructionId};
use delamina::energies::{default_eta, energy_3d, fvk_energy, Evaluator};
use delamina::optimize::{self, MinimizeOptions};
use delamina::scaling::{
    self, build_construction, lower_bound_value, run_sweep, sweep_grid, upper_bound_value, SweepMode, SweepPoint,
    SweepRecord, SweepResult,
};
use delamina::stability::{self, StabilityParams};
use delamina::{BoundarySpec, EnergyBreakdown, EnergyParams, FunctionalKind, Grid, ScalarField, State, VectorField2};
use serde::Serialize;

use crate::config::{self, LiftConfig, MinimizeConfig, PhaseConfig, RunConfig, StabilityConfig};
use crate::output::{Outputs, Provenance};
use crate::{Cli, Command, ConfigError, ParamFlags, PartialFailure};

const DEFAULT_GRID: usize = 128;

/// A functional selectable on the command line; `bonded` is the sharp
/// threshold form, which has no gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Functional {
    Bonded,
    Kind(FunctionalKind),
}

impl Functional {
    fn parse(s: &str) -> Result<Self, ConfigError> {
        if s == "bonded" {
            return Ok(Functional::Bonded);
        }
        FunctionalKind::from_str(s).map(Functional::Kind).map_err(|_| {
            ConfigError(format!(
                "invalid parameter `functional`: unknown functional `{s}` (expected eikonal, fvk, fvk-general, bonded, bonded-smooth or linearized)"
            ))
        })
    }

    fn name(&self) -> String {
        match self {
            Functional::Bonded => "bonded".into(),
            Functional::Kind(k) => k.to_string(),
        }
    }
}

fn parse_construction(s: &str) -> Result<ConstructionId, ConfigError> {
    ConstructionId::from_str(s).map_err(|e| ConfigError(e.to_string()))
}

fn merge_params(base: Option<EnergyParams>, f: &ParamFlags) -> Result<EnergyParams, ConfigError> {
    let mut p = base.unwrap_or_default();
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut p.sigma, f.sigma);
    set(&mut p.gamma, f.gamma);
    set(&mut p.nu, f.nu);
    set(&mut p.young, f.young);
    set(&mut p.thickness, f.thickness);
    set(&mut p.eigenstrain, f.eigenstrain);
    set(&mut p.eta, f.eta);
    p.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(p)
}

fn grid_of(cli: &Cli, cfg: &RunConfig) -> Result<usize, ConfigError> {
    let n = cli.grid.or(cfg.grid).unwrap_or(DEFAULT_GRID);
    if n < 8 {
        return Err(ConfigError(format!("invalid parameter `grid`: need at least 8 cells, got {n}")));
    }
    Ok(n)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    match &cli.command {
        Command::Energy(a) => energy(cli, &cfg, seed, a),
        Command::Construct(a) => construct(cli, &cfg, seed, a),
        Command::Minimize(a) => minimize(cli, &cfg, seed, a),
        Command::Sweep(a) => sweep(cli, &cfg, seed, a),
        Command::PhaseDiagram(a) => phase(cli, &cfg, seed, a),
        Command::Stability(a) => stability_cmd(cli, &cfg, seed, a),
        Command::Lift3d(a) => lift3d(cli, &cfg, seed, a),
    }
}

fn dims(g: &Grid) -> Option<[usize; 2]> {
    Some([g.nx, g.ny])
}

fn evaluate(f: Functional, s: &State, p: &EnergyParams) -> Result<EnergyBreakdown> {
    let ev = Evaluator::new(s.grid());
    Ok(match f {
        Functional::Bonded => ev.bonded(s, p.sigma, p.gamma, p.eta)?,
        Functional::Kind(k) => ev.breakdown(k, s, p)?,
    })
}

#[derive(Serialize)]
struct NodeRow {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    u1: f64,
    u2: f64,
    w: f64,
}

fn node_rows(s: &State) -> Vec<NodeRow> {
    let g = s.grid();
    let mut rows = Vec::with_capacity(g.n_nodes());
    for i in 0..=g.nx {
        for j in 0..=g.ny {
            let k = g.idx(i, j);
            rows.push(NodeRow {
                i,
                j,
                x: g.x(i),
                y: g.y(j),
                u1: s.u.x[k],
                u2: s.u.y[k],
                w: s.w.values[k],
            });
        }
    }
    rows
}

/// Rebuilds a deserialized state through the checked constructors.
fn checked_state(s: State) -> Result<State> {
    let g = s.w.grid;
    let g = Grid::new(g.nx, g.ny, g.lx, g.ly)?;
    let w = ScalarField::from_values(g, s.w.values)?;
    let ux = ScalarField::from_values(g, s.u.x)?;
    let uy = ScalarField::from_values(g, s.u.y)?;
    Ok(State::new(VectorField2 { grid: g, x: ux.values, y: uy.values }, w)?)
}

fn build(id: ConstructionId, n: usize, p: &EnergyParams) -> Result<ConstructedState> {
    let grid = sweep_grid(id, n, p.sigma, p.gamma)?;
    Ok(build_construction(id, &grid, p.sigma, p.gamma)?)
}

#[derive(Serialize)]
struct EnergyEffective<'a> {
    functional: String,
    source: String,
    grid: usize,
    params: &'a EnergyParams,
}

fn energy(cli: &Cli, cfg: &RunConfig, seed: u64, a: &crate::EnergyArgs) -> Result<()> {
    let functional = Functional::parse(a.functional.as_deref().or(cfg.functional.as_deref()).unwrap_or("bonded"))?;
    let n = grid_of(cli, cfg)?;
    let mut params = merge_params(cfg.params, &a.params)?;
    let construction = match &a.construction {
        Some(c) => Some(parse_construction(c)?),
        None if a.w.is_none() && a.state.is_none() => cfg.construction,
        None => None,
    };
    let (state, source) = if let Some(path) = &a.state {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read state {}: {e}", path.display())))?;
        let s: State = serde_json::from_str(&text).map_err(|e| ConfigError(format!("state {}: {e}", path.display())))?;
        (checked_state(s)?, format!("state:{}", path.display()))
    } else if let Some(id) = construction {
        (build(id, n, &params)?.state(), id.to_string())
    } else if a.w.is_some() {
        (State::zeros(Grid::unit(n)?), "zero".to_string())
    } else {
        return Err(ConfigError("invalid parameter `construction`: give --construction, --w zero or --state".into()).into());
    };
    if a.params.eta.is_none() && cfg.params.is_none() {
        params.eta = default_eta(&state.grid());
    }
    let e = evaluate(functional, &state, &params)?;
    let ly = state.grid().ly;
    let per_width = constructions::per_width(e, ly);
    let eff = EnergyEffective { functional: functional.name(), source: source.clone(), grid: n, params: &params };
    let prov = Provenance::new("energy", &eff, seed, dims(&state.grid()))?;
    #[derive(Serialize)]
    struct Body<'a> {
        functional: String,
        source: String,
        params: &'a EnergyParams,
        domain: [f64; 2],
        breakdown: EnergyBreakdown,
        per_width: EnergyBreakdown,
    }
    let body = Body {
        functional: functional.name(),
        source,
        params: &params,
        domain: [state.grid().lx, ly],
        breakdown: e,
        per_width,
    };
    println!("{}", serde_json::to_string(&body.breakdown)?);
    let mut out = Outputs::new(&cli.out);
    out.json("energy.json", &prov, &body)?;
    out.commit()?;
    Ok(())
}

fn construction_of(flag: &Option<String>, cfg: &RunConfig) -> Result<ConstructionId, ConfigError> {
    match flag {
        Some(c) => parse_construction(c),
        None => cfg
            .construction
            .ok_or_else(|| ConfigError("invalid parameter `construction`: required".into())),
    }
}

#[derive(Serialize)]
struct ConstructEffective<'a> {
    construction: ConstructionId,
    grid: usize,
    params: &'a EnergyParams,
}

fn construct(cli: &Cli, cfg: &RunConfig, seed: u64, a: &crate::ConstructArgs) -> Result<()> {
    let id = construction_of(&a.construction, cfg)?;
    let n = grid_of(cli, cfg)?;
    let mut params = merge_params(cfg.params, &a.params)?;
    let cs = build(id, n, &params)?;
    let grid = cs.grid();
    if a.params.eta.is_none() && cfg.params.is_none() {
        params.eta = default_eta(&grid);
    }
    let energy = cs.bonded_per_width(params.sigma, params.gamma, params.eta)?;
    let prov = Provenance::new("construct", &ConstructEffective { construction: id, grid: n, params: &params }, seed, dims(&grid))?;
    #[derive(Serialize)]
    struct Body<'a> {
        construction: ConstructionId,
        grid: Grid,
        boundary: BoundarySpec,
        predicted_energy: f64,
        params_used: &'a constructions::ConstructionParams,
        bonded_per_width: EnergyBreakdown,
    }
    let body = Body {
        construction: id,
        grid,
        boundary: cs.boundary,
        predicted_energy: cs.predicted_energy,
        params_used: &cs.params_used,
        bonded_per_width: energy,
    };
    println!("{}", serde_json::to_string(&energy)?);
    let state = cs.state();
    let mut out = Outputs::new(&cli.out);
    out.json("construct.json", &prov, &body)?;
    out.json("state.json", &prov, &state)?;
    out.csv("nodes.csv", &prov, &node_rows(&state))?;
    out.commit()?;
    Ok(())
}

#[derive(Serialize)]
struct MinimizeEffective<'a> {
    construction: ConstructionId,
    functional: String,
    grid: usize,
    params: &'a EnergyParams,
    minimize: &'a MinimizeConfig,
}

fn minimize(cli: &Cli, cfg: &RunConfig, seed: u64, a: &crate::MinimizeArgs) -> Result<()> {
    let id = construction_of(&a.construction, cfg)?;
    let functional = Functional::parse(a.functional.as_deref().or(cfg.functional.as_deref()).unwrap_or("bonded-smooth"))?;
    let Functional::Kind(kind) = functional else {
        return Err(ConfigError("invalid parameter `functional`: the sharp bonded energy has no gradient; use bonded-smooth".into()).into());
    };
    let n = grid_of(cli, cfg)?;
    let mut params = merge_params(cfg.params, &a.params)?;
    let mut mc = cfg.minimize.clone().unwrap_or_default();
    if let Some(v) = a.max_iter {
        mc.max_iter = v;
    }
    if let Some(v) = a.grad_tol {
        mc.grad_tol = v;
    }
    if let Some(v) = a.noise {
        mc.noise = v;
    }
    let cs = build(id, n, &params)?;
    let grid = cs.grid();
    if a.params.eta.is_none() && cfg.params.is_none() {
        params.eta = default_eta(&grid);
    }
    let opts = MinimizeOptions {
        max_iter: mc.max_iter,
        grad_tol: mc.grad_tol,
        kind,
        params,
        boundary: cs.boundary,
        ..MinimizeOptions::default()
    };
    opts.validate()?;
    let start = optimize::perturb(&cs.state(), &cs.boundary, mc.noise, seed)?;
    let initial = evaluate(functional, &start, &params)?;
    let res = optimize::minimize(&start, &opts)?;
    let sharp = constructions::per_width(
        Evaluator::new(grid).bonded(&res.state, params.sigma, params.gamma, params.eta)?,
        grid.ly,
    );
    let eff = MinimizeEffective { construction: id, functional: functional.name(), grid: n, params: &params, minimize: &mc };
    let prov = Provenance::new("minimize", &eff, seed, dims(&grid))?;
    #[derive(Serialize)]
    struct Body {
        construction: ConstructionId,
        functional: String,
        initial: EnergyBreakdown,
        energy: EnergyBreakdown,
        bonded_per_width: EnergyBreakdown,
        iterations: usize,
        converged: bool,
        final_projected_gradient_norm: f64,
        diagnostic: Option<String>,
    }
    let body = Body {
        construction: id,
        functional: functional.name(),
        initial,
        energy: res.energy,
        bonded_per_width: sharp,
        iterations: res.iterations,
        converged: res.converged,
        final_projected_gradient_norm: res.final_projected_gradient_norm,
        diagnostic: res.diagnostic.clone(),
    };
    #[derive(Serialize)]
    struct HistoryRow {
        iteration: usize,
        energy: f64,
    }
    let history: Vec<HistoryRow> = res
        .energy_history
        .iter()
        .enumerate()
        .map(|(iteration, &energy)| HistoryRow { iteration, energy })
        .collect();
    println!("{}", serde_json::to_string(&body.energy)?);
    let mut out = Outputs::new(&cli.out);
    out.json("minimize.json", &prov, &body)?;
    out.json("state.json", &prov, &res.state)?;
    out.csv("history.csv", &prov, &history)?;
    out.csv("nodes.csv", &prov, &node_rows(&res.state))?;
    out.commit()?;
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    sigma: f64,
    gamma: f64,
    regime: String,
    stretch: Option<f64>,
    bend: Option<f64>,
    bond: Option<f64>,
    total: Option<f64>,
    construction: String,
    converged: bool,
    status: String,
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        Self {
            sigma: r.sigma,
            gamma: r.gamma,
            regime: r.regime.to_string(),
            stretch: r.energy.map(|e| e.stretch),
            bend: r.energy.map(|e| e.bend),
            bond: r.energy.map(|e| e.bond),
            total: r.total(),
            construction: r.construction.to_string(),
            converged: r.converged,
            status: r.error.clone().unwrap_or_else(|| "ok".into()),
        }
    }
}

#[derive(Serialize)]
struct FitRow {
    variable: &'static str,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    residual_max: f64,
}

/// Fits against every coordinate that takes at least three distinct values.
fn sweep_fits(res: &SweepResult) -> Vec<FitRow> {
    let vars: [(&'static str, fn(&SweepRecord) -> f64); 3] = [
        ("sigma", |r| r.sigma),
        ("gamma", |r| r.gamma),
        ("sigma_gamma", |r| r.sigma * r.gamma),
    ];
    let distinct = |x: fn(&SweepRecord) -> f64| {
        let mut xs: Vec<f64> = res.records.iter().filter(|r| r.is_ok()).map(x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    let both_vary = distinct(vars[0].1) > 1 && distinct(vars[1].1) > 1;
    let mut rows = Vec::new();
    for (name, x) in vars {
        // σγ only carries new information when both coordinates move
        if distinct(x) < 3 || (name == "sigma_gamma" && !both_vary) {
            continue;
        }
        if let Ok(f) = res.fit(x) {
            rows.push(FitRow { variable: name, slope: f.slope, intercept: f.intercept, r_squared: f.r_squared, residual_max: f.residual_max });
        }
    }
    rows
}

fn parse_point(s: &str) -> Result<SweepPoint, ConfigError> {
    let bad = || ConfigError(format!("invalid parameter `point`: expected SIGMA,GAMMA, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok(SweepPoint {
        sigma: a.trim().parse().map_err(|_| bad())?,
        gamma: b.trim().parse().map_err(|_| bad())?,
    })
}

fn sweep(cli: &Cli, cfg: &RunConfig, _seed: u64, a: &crate::SweepArgs) -> Result<()> {
    let mut spec = cfg.sweep.clone().unwrap_or_default();
    if !a.points.is_empty() {
        spec.points = a.points.iter().map(|s| parse_point(s)).collect::<Result<_, _>>()?;
    }
    if let Some(n) = cli.grid.or(cfg.grid) {
        spec.grid = n;
    }
    spec.seed = cli.seed.or(cfg.seed).unwrap_or(spec.seed);
    if let Some(m) = &a.mode {
        spec.mode = match m.as_str() {
            "construct-only" => SweepMode::ConstructOnly,
            "construct-minimize" => SweepMode::ConstructMinimize,
            _ => return Err(ConfigError(format!("invalid parameter `mode`: unknown mode `{m}`")).into()),
        };
    }
    if let Some(c) = &a.construction {
        spec.construction = Some(parse_construction(c)?);
    }
    if let Some(k) = a.minimize_iterations {
        spec.minimize_iterations = k;
    }
    spec.validate().map_err(|e| ConfigError(e.to_string()))?;
    let res = run_sweep(&spec)?;
    let prov = Provenance::new("sweep", &spec, spec.seed, Some([spec.grid, spec.grid]))?;
    let rows: Vec<SweepRow> = res.records.iter().map(SweepRow::from).collect();
    let fits = sweep_fits(&res);
    let failed = res.records.iter().filter(|r| !r.is_ok()).count();
    #[derive(Serialize)]
    struct Body<'a> {
        sweep_provenance: &'a scaling::Provenance,
        points: usize,
        failed: usize,
        fits: &'a [FitRow],
        records: &'a [SweepRecord],
    }
    let body = Body { sweep_provenance: &res.provenance, points: res.records.len(), failed, fits: &fits, records: &res.records };
    for f in &fits {
        println!("slope vs {}: {:.4} (r^2 = {:.4})", f.variable, f.slope, f.r_squared);
    }
    if failed == res.records.len() {
        let first = res.records[0].error.clone().unwrap_or_default();
        return Err(PartialFailure { code: 3, message: format!("every sweep point failed; first: {first}") }.into());
    }
    let mut out = Outputs::new(&cli.out);
    out.csv("sweep.csv", &prov, &rows)?;
    out.csv("sweep_fit.csv", &prov, &fits)?;
    out.json("sweep.json", &prov, &body)?;
    out.commit()?;
    if failed > 0 {
        return Err(PartialFailure { code: 5, message: format!("{failed} of {} sweep points failed", res.records.len()) }.into());
    }
    Ok(())
}

fn phase(cli: &Cli, cfg: &RunConfig, seed: u64, a: &crate::PhaseArgs) -> Result<()> {
    let mut pc: PhaseConfig = cfg.phase_diagram.clone().unwrap_or_default();
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut pc.sigma_min, a.sigma_min);
    set(&mut pc.sigma_max, a.sigma_max);
    set(&mut pc.gamma_min, a.gamma_min);
    set(&mut pc.gamma_max, a.gamma_max);
    if let Some(r) = a.resolution {
        pc.resolution = r;
    }
    let pd = scaling::phase_diagram((pc.sigma_min, pc.sigma_max), (pc.gamma_min, pc.gamma_max), pc.resolution)
        .map_err(|e| ConfigError(e.to_string()))?;
    #[derive(Serialize)]
    struct Cell {
        sigma: f64,
        gamma: f64,
        regime: String,
        upper_bound_value: f64,
        lower_bound_value: f64,
    }
    let mut cells = Vec::new();
    for (i, &s) in pd.sigmas.iter().enumerate() {
        for (j, &g) in pd.gammas.iter().enumerate() {
            cells.push(Cell {
                sigma: s,
                gamma: g,
                regime: pd.labels[i][j].to_string(),
                upper_bound_value: upper_bound_value(s, g)?,
                lower_bound_value: lower_bound_value(s, g)?,
            });
        }
    }
    #[derive(Serialize)]
    struct CurvePoint<'a> {
        curve: &'a str,
        sigma: f64,
        gamma: f64,
    }
    let curves: Vec<CurvePoint> = pd
        .curves
        .iter()
        .flat_map(|c| c.points.iter().map(move |&(sigma, gamma)| CurvePoint { curve: &c.name, sigma, gamma }))
        .collect();
    let prov = Provenance::new("phase-diagram", &pc, seed, None)?;
    println!("{} cells", cells.len());
    let mut out = Outputs::new(&cli.out);
    out.csv("phase_diagram.csv", &prov, &cells)?;
    out.csv("phase_curves.csv", &prov, &curves)?;
    out.commit()?;
    Ok(())
}

fn stability_cmd(cli: &Cli, cfg: &RunConfig, seed: u64, a: &crate::StabilityArgs) -> Result<()> {
    let mut sc: StabilityConfig = cfg.stability.clone().unwrap_or_default();
    macro_rules! over {
        ($($f:ident),*) => { $( if a.$f.is_some() { sc.$f = a.$f; } )* };
    }
    over!(young, thickness, radius, nu, n_points, delta_exp);
    let reference = StabilityParams::experiment();
    if a.experiment {
        sc.thickness = sc.thickness.or(Some(reference.thickness));
        sc.radius = sc.radius.or(Some(reference.radius));
        sc.nu = sc.nu.or(Some(reference.nu));
        sc.delta_exp = sc.delta_exp.or(Some(stability::EXPERIMENT_STRAIN));
    }
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| ConfigError(format!("invalid parameter `{name}`: required (or pass --experiment)")))
    };
    let params = StabilityParams {
        young: sc.young.unwrap_or(1.0),
        thickness: need("thickness", sc.thickness)?,
        radius: need("radius", sc.radius)?,
        nu: need("nu", sc.nu)?,
        n_points: sc.n_points.unwrap_or(reference.n_points),
    };
    params.validate().map_err(|e| ConfigError(e.to_string()))?;
    if let Some(d) = sc.delta_exp {
        if !(d > 0.0 && d.is_finite()) {
            return Err(ConfigError(format!("invalid parameter `delta_exp`: must be positive, got {d}")).into());
        }
    }
    let mut res = stability::critical_strain(&params)?;
    res.ratio_to_experiment = sc.delta_exp.map(|d| d / res.delta_crit);
    let estimate = stability::buckling_estimate(params.thickness, params.radius)?;
    let prov = Provenance::new("stability", &sc, seed, Some([params.n_points, 1]))?;
    #[derive(Serialize)]
    struct Body<'a> {
        params: &'a StabilityParams,
        delta_crit: f64,
        prefactor: f64,
        buckling_estimate: f64,
        delta_exp: Option<f64>,
        ratio_to_experiment: Option<f64>,
    }
    let body = Body {
        params: &params,
        delta_crit: res.delta_crit,
        prefactor: res.prefactor,
        buckling_estimate: estimate,
        delta_exp: sc.delta_exp,
        ratio_to_experiment: res.ratio_to_experiment,
    };
    #[derive(Serialize)]
    struct ModeRow {
        r: f64,
        phi: f64,
    }
    let mode: Vec<ModeRow> = res.radii.iter().zip(&res.mode).map(|(&r, &phi)| ModeRow { r, phi }).collect();
    println!("{}", serde_json::to_string(&body)?);
    let mut out = Outputs::new(&cli.out);
    out.json("stability.json", &prov, &body)?;
    out.csv("mode.csv", &prov, &mode)?;
    out.commit()?;
    Ok(())
}

#[derive(Serialize)]
pub struct LiftRow {
    pub delta: f64,
    pub thickness: f64,
    pub sigma: f64,
    pub energy_3d: f64,
    pub fvk: f64,
    pub ratio: f64,
}

/// `energy_3d(lift)/(δ² E_σ)` for the mollified tent with `u = 0` and
/// `σ = h/δ^{1/2}`.
pub fn lift_rows(n: usize, lc: &LiftConfig) -> delamina::Result<Vec<LiftRow>> {
    let grid = Grid::unit(n)?;
    let w = constructions::mollified_tent(&grid, lc.mollify)?;
    let u = VectorField2::zeros(grid);
    lc.deltas
        .iter()
        .map(|&delta| {
            let h = lc.thickness_ratio * delta;
            let sigma = h / delta.sqrt();
            let v = constructions::lift_to_3d(&u, &w, delta, h, lc.nz)?;
            let e3 = energy_3d(&v)?;
            let f = fvk_energy(&u, &w, sigma)?.total;
            Ok(LiftRow { delta, thickness: h, sigma, energy_3d: e3, fvk: f, ratio: e3 / (delta * delta * f) })
        })
        .collect()
}

fn lift3d(cli: &Cli, cfg: &RunConfig, seed: u64, a: &crate::LiftArgs) -> Result<()> {
    let mut lc = cfg.lift3d.clone().unwrap_or_default();
    if !a.deltas.is_empty() {
        lc.deltas = a.deltas.clone();
    }
    if let Some(v) = a.thickness_ratio {
        lc.thickness_ratio = v;
    }
    if let Some(v) = a.nz {
        lc.nz = v;
    }
    if let Some(v) = a.mollify {
        lc.mollify = v;
    }
    if lc.deltas.is_empty() {
        return Err(ConfigError("invalid parameter `deltas`: need at least one value".into()).into());
    }
    let n = grid_of(cli, cfg)?;
    let rows = lift_rows(n, &lc)?;
    for r in &rows {
        println!("delta {:.4}: ratio {:.6}", r.delta, r.ratio);
    }
    let prov = Provenance::new("lift3d", &lc, seed, Some([n, n]))?;
    let mut out = Outputs::new(&cli.out);
    out.csv("lift3d.csv", &prov, &rows)?;
    out.commit()?;
    Ok(())
}

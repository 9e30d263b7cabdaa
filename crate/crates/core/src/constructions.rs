//! Explicit low-energy states: tents, the branched blister, the flat bonded
//! film, straight and branched tube patterns, and the lift to three dimensions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energies::{
    DeformationField3D, EnergyBreakdown, EnergyParams, Evaluator, FoldSegment, FoldSet, FunctionalKind, State,
};
use crate::error::{Error, Result};
use crate::fields::{distance_to_boundary, gradient, mollify, BoundarySpec, Grid, ScalarField, VectorField2};
use crate::optimize::relax_displacement;
use crate::scaling::{classify_regime, Regime};

/// CG iterations spent relaxing the analytic displacement of a construction.
pub const RELAX_ITERATIONS: usize = 400;
pub const RELAX_TOLERANCE: f64 = 1e-9;

/// Tube-pattern width `4 σ^{3/4} γ^{−5/16}`.
pub const TUBE_WIDTH_FACTOR: f64 = 4.0;
/// Local period `1.4 γ^{1/16} σ^{1/4} x₁^{1/3}`.
pub const TUBE_PERIOD_FACTOR: f64 = 1.4;
/// Finest tube period in units of the tube width.
pub const TUBE_BASE_RATIO: f64 = 2.5;
/// Finest blister fold period in units of σ.
pub const BLISTER_BASE_RATIO: f64 = 4.0;
/// Blister doubling law `p_k² = λ σ T_k`.
pub const BLISTER_DOUBLING_LAMBDA: f64 = 16.0;
pub const TUBES_PREDICTED_CONSTANT: f64 = 12.0;
pub const BLISTER_PREDICTED_CONSTANT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminateParams {
    pub period: f64,
    pub tube_width: f64,
    pub boundary_layer: f64,
}

impl LaminateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tube_width > 0.0) {
            return Err(Error::input("tube_width", "must be positive"));
        }
        if !(self.tube_width <= self.period && self.period <= 1.0) {
            return Err(Error::input("period", "need tube_width <= period <= 1"));
        }
        if !(self.boundary_layer > 0.0 && self.boundary_layer <= 1.0) {
            return Err(Error::input("boundary_layer", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingParams {
    pub generations: usize,
    pub base_period: f64,
    /// Normal distance at which generation `k + 1` starts.
    pub positions: Vec<f64>,
    /// Extent of each doubling transition.
    pub transition_lengths: Vec<f64>,
    pub boundary_layer: f64,
    /// Tube width; `None` for fold patterns.
    pub feature_width: Option<f64>,
}

impl BranchingParams {
    pub fn period(&self, generation: usize) -> f64 {
        self.base_period * (1u64 << generation) as f64
    }

    pub fn coarsest_period(&self) -> f64 {
        self.period(self.generations)
    }

    /// Generations fit inside `(0, depth)`; periods double exactly.
    pub fn validate(&self, depth: f64) -> Result<()> {
        if !(self.base_period > 0.0) {
            return Err(Error::input("base_period", "must be positive"));
        }
        if self.positions.len() != self.generations || self.transition_lengths.len() != self.generations {
            return Err(Error::input("positions", "need one position and transition per generation"));
        }
        let mut prev = 0.0;
        for (x, l) in self.positions.iter().zip(&self.transition_lengths) {
            if !(*x >= prev && *x > 0.0 && *l > 0.0 && x + l <= depth) {
                return Err(Error::input("positions", "transitions must be increasing and fit the domain"));
            }
            prev = x + l;
        }
        if !(self.boundary_layer > 0.0 && self.boundary_layer <= depth) {
            return Err(Error::input("boundary_layer", "must lie in (0, depth]"));
        }
        Ok(())
    }

    /// Generation active at normal distance `t` and the merge progress into it.
    fn locate(&self, t: f64) -> (usize, f64) {
        let g = self.positions.iter().take_while(|&&x| x <= t).count();
        if g == 0 {
            return (0, 1.0);
        }
        let z = (t - self.positions[g - 1]) / self.transition_lengths[g - 1];
        (g, smoothstep(z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstructionParams {
    None,
    Laminate(LaminateParams),
    Branching(BranchingParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionId {
    Flat,
    MollifiedTent,
    Laminate,
    BranchedTubes,
    BranchedBlister,
}

impl ConstructionId {
    pub fn name(&self) -> &'static str {
        match self {
            ConstructionId::Flat => "flat",
            ConstructionId::MollifiedTent => "mollified-tent",
            ConstructionId::Laminate => "laminate",
            ConstructionId::BranchedTubes => "branched-tubes",
            ConstructionId::BranchedBlister => "branched-blister",
        }
    }

    pub fn for_regime(r: Regime) -> Self {
        match r {
            Regime::A => ConstructionId::Flat,
            Regime::B => ConstructionId::Laminate,
            Regime::C => ConstructionId::BranchedTubes,
            Regime::D => ConstructionId::BranchedBlister,
        }
    }
}

impl std::fmt::Display for ConstructionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ConstructionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            ConstructionId::Flat,
            ConstructionId::MollifiedTent,
            ConstructionId::Laminate,
            ConstructionId::BranchedTubes,
            ConstructionId::BranchedBlister,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::input("construction", format!("unknown construction `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructedState {
    pub id: ConstructionId,
    pub u: VectorField2,
    pub w: ScalarField,
    pub boundary: BoundarySpec,
    pub predicted_energy: f64,
    pub params_used: ConstructionParams,
}

impl ConstructedState {
    pub fn grid(&self) -> Grid {
        self.w.grid
    }

    pub fn state(&self) -> State {
        State {
            u: self.u.clone(),
            w: self.w.clone(),
        }
    }

    /// Bonded energy divided by the tangential width `ly`.
    pub fn bonded_per_width(&self, sigma: f64, gamma: f64, eta: f64) -> Result<EnergyBreakdown> {
        let e = Evaluator::new(self.grid()).bonded(&self.state(), sigma, gamma, eta)?;
        Ok(per_width(e, self.grid().ly))
    }
}

pub fn per_width(e: EnergyBreakdown, ly: f64) -> EnergyBreakdown {
    EnergyBreakdown::new(e.stretch / ly, e.bend / ly, e.bond / ly)
}

fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)
}

pub fn tent(grid: &Grid) -> ScalarField {
    distance_to_boundary(grid)
}

/// Ridges of the rectangle tent: four corner bisectors with jump `√2` and,
/// for non-square domains, the central ridge with jump 2.
pub fn tent_folds(grid: &Grid) -> FoldSet {
    let m = grid.lx.min(grid.ly);
    let mut segs = vec![
        FoldSegment {
            length: m / 2.0 * 2f64.sqrt(),
            jump_magnitude: 2f64.sqrt(),
        };
        4
    ];
    let ridge = (grid.lx - grid.ly).abs();
    if ridge > 0.0 {
        segs.push(FoldSegment { length: ridge, jump_magnitude: 2.0 });
    }
    FoldSet { segments: segs }
}

/// Distance function convolved with the σ-mollifier; exactly zero on `∂Ω`.
pub fn mollified_tent(grid: &Grid, sigma: f64) -> Result<ScalarField> {
    if !(sigma < grid.lx.min(grid.ly) / 4.0) {
        return Err(Error::input("sigma", "must be below a quarter of the shorter side"));
    }
    let mut w = mollify(&tent(grid), sigma)?;
    w.values.iter_mut().for_each(|v| *v = v.max(0.0));
    BoundarySpec::all_dirichlet().apply_zero(grid, &mut w.values);
    Ok(w)
}

pub fn flat(grid: &Grid) -> ConstructedState {
    ConstructedState {
        id: ConstructionId::Flat,
        u: VectorField2::zeros(*grid),
        w: ScalarField::zeros(*grid),
        boundary: BoundarySpec::left_only(),
        predicted_energy: 2.0,
        params_used: ConstructionParams::None,
    }
}

/// Laminate optimisers clamped to `δ ≤ h ≤ 1`, without a regime check.
pub fn laminate_params_formula(sigma: f64, gamma: f64) -> LaminateParams {
    let period = (sigma * gamma).powf(0.4).min(1.0);
    let tube_width = (sigma.powf(0.8) * gamma.powf(-0.2)).min(period);
    LaminateParams {
        period,
        tube_width,
        boundary_layer: period,
    }
}

pub fn optimal_laminate_params(sigma: f64, gamma: f64) -> Result<LaminateParams> {
    let r = classify_regime(sigma, gamma)?;
    if r != Regime::B {
        return Err(Error::Regime(format!("laminate needs regime B, got {r}")));
    }
    Ok(laminate_params_formula(sigma, gamma))
}

/// `h + γδ/h + σ²/δ²`.
pub fn laminate_predicted_energy(sigma: f64, gamma: f64, p: &LaminateParams) -> f64 {
    p.period + gamma * p.tube_width / p.period + sigma * sigma / (p.tube_width * p.tube_width)
}

/// Tube-pattern branching: width `4σ^{3/4}γ^{−5/16}`, period law
/// `p(x₁) = 1.4 γ^{1/16} σ^{1/4} x₁^{1/3}` sampled at doublings, transition
/// extent equal to the local period, transitions disjoint.
pub fn tube_branching_params(sigma: f64, gamma: f64, depth: f64) -> BranchingParams {
    let delta = TUBE_WIDTH_FACTOR * sigma.powf(0.75) * gamma.powf(-5.0 / 16.0);
    let scale = TUBE_PERIOD_FACTOR * gamma.powf(1.0 / 16.0) * sigma.powf(0.25);
    let p0 = TUBE_BASE_RATIO * delta;
    let mut positions = Vec::new();
    let mut lengths = Vec::new();
    let mut k = 1;
    loop {
        let pk = p0 * (1u64 << k) as f64;
        let prev = positions.last().zip(lengths.last()).map_or(0.0, |(x, l): (&f64, &f64)| x + l);
        // a doubling starts no earlier than the end of the previous transition
        let xk = (pk / scale).powi(3).max(prev);
        if xk + pk > depth {
            break;
        }
        positions.push(xk);
        lengths.push(pk);
        k += 1;
    }
    BranchingParams {
        generations: positions.len(),
        base_period: p0,
        positions,
        transition_lengths: lengths,
        boundary_layer: p0,
        feature_width: Some(delta),
    }
}

/// Fold-pattern branching: base period `4σ`, doublings where `p_k² = 16 σ T_k`,
/// transitions as long as the new period, all within half the shorter side.
pub fn blister_branching_params(sigma: f64, depth: f64) -> BranchingParams {
    blister_branching_params_with(sigma, depth, BLISTER_BASE_RATIO, BLISTER_DOUBLING_LAMBDA)
}

/// Fold-pattern branching with base period `base_ratio·σ` and doublings where
/// `p_k² = lambda σ T_k`, transitions disjoint.
pub fn blister_branching_params_with(sigma: f64, depth: f64, base_ratio: f64, lambda: f64) -> BranchingParams {
    let p0 = base_ratio * sigma;
    let mut positions = Vec::new();
    let mut lengths = Vec::new();
    let mut k = 1;
    loop {
        let pk = p0 * (1u64 << k) as f64;
        let prev = positions.last().zip(lengths.last()).map_or(0.0, |(x, l): (&f64, &f64)| x + l);
        let tk = (pk * pk / (lambda * sigma)).max(prev);
        if tk + pk > depth {
            break;
        }
        positions.push(tk);
        lengths.push(pk);
        k += 1;
    }
    BranchingParams {
        generations: positions.len(),
        base_period: p0,
        positions,
        transition_lengths: lengths,
        boundary_layer: p0,
        feature_width: None,
    }
}

/// Strip `[0,1] × [0, ly]` carrying one coarsest tube period.
pub fn tube_strip_grid(nx: usize, ny: usize, sigma: f64, gamma: f64) -> Result<Grid> {
    Grid::new(nx, ny, 1.0, tube_branching_params(sigma, gamma, 1.0).coarsest_period())
}

pub fn laminate_strip_grid(nx: usize, ny: usize, sigma: f64, gamma: f64) -> Result<Grid> {
    Grid::new(nx, ny, 1.0, laminate_params_formula(sigma, gamma).period)
}

/// `∫₀^δ (φ′)²` for `φ(ξ) = sin⁴(πξ/δ)`.
fn bump_dirichlet(delta: f64) -> f64 {
    5.0 * PI * PI / (8.0 * delta)
}

fn bump(xi: f64, delta: f64) -> f64 {
    if xi <= 0.0 || xi >= delta {
        0.0
    } else {
        (PI * xi / delta).sin().powi(4)
    }
}

/// Tube amplitude with `∫(w′)² = period` across one tube.
pub fn tube_amplitude(period: f64, width: f64) -> f64 {
    (period / bump_dirichlet(width)).sqrt()
}

/// Adds `(A φ(y − c + δ/2))²` for one tube centred at `c` into `sq`.
fn add_tube_sq(grid: &Grid, sq: &mut [f64], c: f64, amp: f64, delta: f64) {
    let hy = grid.hy();
    let j0 = ((c - delta / 2.0) / hy).floor().max(0.0) as usize;
    let j1 = (((c + delta / 2.0) / hy).ceil() as usize).min(grid.ny);
    for (j, s) in sq.iter_mut().enumerate().take(j1 + 1).skip(j0) {
        let v = amp * bump(grid.y(j) - c + delta / 2.0, delta);
        *s += v * v;
    }
}

fn tube_row(grid: &Grid, params: &BranchingParams, delta: f64, x: f64) -> Vec<f64> {
    let (g, s) = params.locate(x);
    let pg = params.period(g);
    let mut sq = vec![0.0; grid.ny + 1];
    let ncell = (grid.ly / pg).ceil() as usize + 1;
    if s < 1.0 {
        let pp = pg / 2.0;
        let amp = tube_amplitude(pp, delta);
        for j in 0..ncell {
            let cm = (j as f64 + 0.5) * pg;
            for c0 in [(2 * j) as f64 * pp + 0.5 * pp, (2 * j) as f64 * pp + 1.5 * pp] {
                add_tube_sq(grid, &mut sq, c0 + (cm - c0) * s, amp, delta);
            }
        }
    } else {
        let amp = tube_amplitude(pg, delta);
        for j in 0..ncell {
            add_tube_sq(grid, &mut sq, (j as f64 + 0.5) * pg, amp, delta);
        }
    }
    let blend = (x / params.boundary_layer).min(1.0);
    sq.iter().map(|v| blend * v.sqrt()).collect()
}

/// Tube deflection, `u₁ = x₁/2` and the row-wise primitive `u₂` that
/// cancels the 22-stretch, blended to zero across the boundary layer.
fn tube_state(grid: &Grid, params: &BranchingParams, delta: f64) -> State {
    let n = grid.n_nodes();
    let mut w = vec![0.0; n];
    for i in 0..=grid.nx {
        let row = tube_row(grid, params, delta, grid.x(i));
        w[i * grid.row_len()..(i + 1) * grid.row_len()].copy_from_slice(&row);
    }
    let w = ScalarField { grid: *grid, values: w };
    let wy = gradient(&w).y;
    let hy = grid.hy();
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    for i in 0..=grid.nx {
        let x = grid.x(i);
        let blend = (x / params.boundary_layer).min(1.0);
        let mut acc = 0.0;
        for j in 0..=grid.ny {
            let k = grid.idx(i, j);
            if j > 0 {
                let kp = grid.idx(i, j - 1);
                acc += 0.25 * hy * ((1.0 - wy[k] * wy[k]) + (1.0 - wy[kp] * wy[kp]));
            }
            u1[k] = x / 2.0;
            u2[k] = blend * acc;
        }
    }
    let bc = BoundarySpec::left_only();
    let mut u = VectorField2 { grid: *grid, x: u1, y: u2 };
    bc.apply_zero(grid, &mut u.x);
    bc.apply_zero(grid, &mut u.y);
    State { u, w }
}

fn relax(state: &mut State, boundary: &BoundarySpec, sigma: f64, iterations: usize) -> Result<()> {
    let ev = Evaluator::new(state.grid());
    let p = EnergyParams { sigma, ..EnergyParams::default() };
    relax_displacement(&ev, state, FunctionalKind::Fvk, &p, boundary, iterations, RELAX_TOLERANCE)?;
    Ok(())
}

fn check_resolved(name: &str, length: f64, spacing: f64) -> Result<()> {
    if length < 4.0 * spacing {
        return Err(Error::Resolution(format!(
            "{name} = {length:.3e} is below four grid spacings ({spacing:.3e})"
        )));
    }
    Ok(())
}

pub fn laminate(grid: &Grid, sigma: f64, gamma: f64) -> Result<ConstructedState> {
    let p = optimal_laminate_params(sigma, gamma)?;
    laminate_with(grid, sigma, gamma, &p, RELAX_ITERATIONS)
}

pub fn laminate_with(
    grid: &Grid,
    sigma: f64,
    gamma: f64,
    p: &LaminateParams,
    relax_iterations: usize,
) -> Result<ConstructedState> {
    p.validate()?;
    check_resolved("tube_width", p.tube_width, grid.hy())?;
    let bp = BranchingParams {
        generations: 0,
        base_period: p.period,
        positions: vec![],
        transition_lengths: vec![],
        boundary_layer: p.boundary_layer,
        feature_width: Some(p.tube_width),
    };
    let mut s = tube_state(grid, &bp, p.tube_width);
    let bc = BoundarySpec::left_only();
    relax(&mut s, &bc, sigma, relax_iterations)?;
    Ok(ConstructedState {
        id: ConstructionId::Laminate,
        u: s.u,
        w: s.w,
        boundary: bc,
        predicted_energy: laminate_predicted_energy(sigma, gamma, p),
        params_used: ConstructionParams::Laminate(*p),
    })
}

pub fn branched_tubes(grid: &Grid, sigma: f64, gamma: f64) -> Result<ConstructedState> {
    let r = classify_regime(sigma, gamma)?;
    if r != Regime::C {
        return Err(Error::Regime(format!("branched tubes need regime C, got {r}")));
    }
    let p = tube_branching_params(sigma, gamma, grid.lx);
    branched_tubes_with(grid, sigma, gamma, &p, RELAX_ITERATIONS)
}

pub fn branched_tubes_with(
    grid: &Grid,
    sigma: f64,
    gamma: f64,
    p: &BranchingParams,
    relax_iterations: usize,
) -> Result<ConstructedState> {
    p.validate(grid.lx)?;
    let delta = p
        .feature_width
        .ok_or_else(|| Error::input("feature_width", "tube patterns need a tube width"))?;
    if !(delta > 0.0 && delta < p.base_period) {
        return Err(Error::input("feature_width", "must lie in (0, base_period)"));
    }
    check_resolved("tube_width", delta, grid.hy())?;
    check_resolved("base_period", p.base_period, grid.hx())?;
    let mut s = tube_state(grid, p, delta);
    let bc = BoundarySpec::left_only();
    relax(&mut s, &bc, sigma, relax_iterations)?;
    Ok(ConstructedState {
        id: ConstructionId::BranchedTubes,
        u: s.u,
        w: s.w,
        boundary: bc,
        predicted_energy: TUBES_PREDICTED_CONSTANT * sigma.sqrt() * gamma.powf(0.625),
        params_used: ConstructionParams::Branching(p.clone()),
    })
}

/// Sawtooth of slopes ±1 on a cell `[0, 2P]` merging two teeth of period `P`
/// (`s = 0`) into one of period `2P` (`s = 1`).
pub fn merge_template(tau: f64, period: f64, s: f64) -> f64 {
    let a = period / 2.0 + s * period / 2.0;
    let b = period + s * period / 2.0;
    let c = 1.5 * period;
    if tau < a {
        tau
    } else if tau < b {
        2.0 * a - tau
    } else if tau < c {
        2.0 * a - b + (tau - b)
    } else {
        2.0 * period - tau
    }
}

fn sawtooth(tau: f64, period: f64) -> f64 {
    let t = tau.rem_euclid(period);
    t.min(period - t)
}

/// Tangential fold profile at normal distance `t` and tangential coordinate
/// `tau` on an edge of length `len`, mirrored about the edge midpoint.
fn fold_profile(p: &BranchingParams, t: f64, tau: f64, len: f64) -> f64 {
    let tau = tau.min(len - tau).max(0.0);
    let (g, s) = p.locate(t);
    let raw = if s < 1.0 {
        let pp = p.period(g - 1);
        merge_template(tau.rem_euclid(2.0 * pp), pp, s)
    } else {
        sawtooth(tau, p.period(g))
    };
    raw * (t / p.boundary_layer).min(1.0)
}

pub fn branched_blister(grid: &Grid, sigma: f64) -> Result<ConstructedState> {
    let p = blister_branching_params(sigma, grid.lx.min(grid.ly) / 2.0);
    branched_blister_with(grid, sigma, &p, RELAX_ITERATIONS)
}

/// Tent plus tangential sawtooth folds in each edge region, `w = min` over
/// the four edge profiles, `u = −g n` with `n` the inward normal of the active
/// edge; then `w` is mollified at σ and `u` relaxed.
pub fn branched_blister_with(
    grid: &Grid,
    sigma: f64,
    p: &BranchingParams,
    relax_iterations: usize,
) -> Result<ConstructedState> {
    p.validate(grid.lx.min(grid.ly) / 2.0)?;
    if p.feature_width.is_some() {
        return Err(Error::input("feature_width", "fold patterns carry no tube width"));
    }
    check_resolved("base_period", p.base_period, grid.h_min().max(grid.hx().max(grid.hy())))?;
    let n = grid.n_nodes();
    let mut w = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let (lx, ly) = (grid.lx, grid.ly);
    for i in 0..=grid.nx {
        let x = grid.x(i);
        for j in 0..=grid.ny {
            let y = grid.y(j);
            // (normal distance, tangential coordinate, edge length, inward normal)
            let edges = [
                (y, x, lx, (0.0, 1.0)),
                (ly - y, x, lx, (0.0, -1.0)),
                (x, y, ly, (1.0, 0.0)),
                (lx - x, y, ly, (-1.0, 0.0)),
            ];
            let mut best = (f64::INFINITY, 0.0, (0.0, 0.0));
            for (t, tau, len, nrm) in edges {
                let g = fold_profile(p, t.max(0.0), tau, len);
                let v = t.max(0.0) + g;
                if v < best.0 {
                    best = (v, g, nrm);
                }
            }
            let k = grid.idx(i, j);
            w[k] = best.0;
            u1[k] = -best.1 * best.2 .0;
            u2[k] = -best.1 * best.2 .1;
        }
    }
    let raw = ScalarField { grid: *grid, values: w };
    let mut w = mollify(&raw, sigma)?;
    w.values.iter_mut().for_each(|v| *v = v.max(0.0));
    let bc = BoundarySpec::all_dirichlet();
    bc.apply_zero(grid, &mut w.values);
    bc.apply_zero(grid, &mut u1);
    bc.apply_zero(grid, &mut u2);
    let mut s = State {
        u: VectorField2 { grid: *grid, x: u1, y: u2 },
        w,
    };
    relax(&mut s, &bc, sigma, relax_iterations)?;
    Ok(ConstructedState {
        id: ConstructionId::BranchedBlister,
        u: s.u,
        w: s.w,
        boundary: bc,
        predicted_energy: BLISTER_PREDICTED_CONSTANT * sigma,
        params_used: ConstructionParams::Branching(p.clone()),
    })
}

/// `v = (1−δ)[ψ + x₃ n]` with `ψ = (x + 2δu, (2δ)^{1/2} w)` and
/// `n = (−(2δ)^{1/2} Dw, 1)`.
pub fn lift_to_3d(u: &VectorField2, w: &ScalarField, delta: f64, h: f64, nz: usize) -> Result<DeformationField3D> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input("delta", "must lie in (0, 1)"));
    }
    if !(h > 0.0 && h < delta.sqrt()) {
        return Err(Error::input("h", "must lie in (0, delta^{1/2})"));
    }
    if nz < 2 {
        return Err(Error::input("nz", "need at least 2 layers"));
    }
    let grid = w.grid;
    grid.check_same(&u.grid)?;
    let dw = gradient(w);
    let r = (2.0 * delta).sqrt();
    let n2 = grid.n_nodes();
    let mut v = [vec![0.0; n2 * (nz + 1)], vec![0.0; n2 * (nz + 1)], vec![0.0; n2 * (nz + 1)]];
    for k in 0..=nz {
        let z = h * k as f64 / nz as f64;
        for i in 0..=grid.nx {
            for j in 0..=grid.ny {
                let p = grid.idx(i, j);
                let q = k * n2 + p;
                v[0][q] = (1.0 - delta) * (grid.x(i) + 2.0 * delta * u.x[p] - z * r * dw.x[p]);
                v[1][q] = (1.0 - delta) * (grid.y(j) + 2.0 * delta * u.y[p] - z * r * dw.y[p]);
                v[2][q] = (1.0 - delta) * (r * w.values[p] + z);
            }
        }
    }
    Ok(DeformationField3D { grid, nz, thickness: h, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::{bonded_energy, energy_3d, fold_energy};
    use crate::fields::integrate_values;

    #[test]
    fn tent_examples() {
        let g = Grid::unit(16).unwrap();
        let t = tent(&g);
        assert_eq!(t.at(8, 8), 0.5);
        assert!((fold_energy(&tent_folds(&g)) - 8.0 / 3.0).abs() < 1e-12);
        assert!((tent_folds(&g).total_length() - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn mollified_tent_is_feasible_and_unit_slope_away_from_folds() {
        let g = Grid::unit(128).unwrap();
        let s = 0.1;
        let w = mollified_tent(&g, s).unwrap();
        assert!(w.values.iter().all(|v| *v >= 0.0));
        let d = gradient(&w);
        for i in 0..=g.nx {
            for j in 0..=g.ny {
                let (x, y) = (g.x(i), g.y(j));
                let to_fold = ((x - y).abs().min((x + y - 1.0).abs())) / 2f64.sqrt();
                let to_edge = x.min(1.0 - x).min(y).min(1.0 - y);
                if to_fold > s && to_edge > s {
                    let k = g.idx(i, j);
                    let m = (d.x[k].powi(2) + d.y[k].powi(2)).sqrt();
                    assert!((m - 1.0).abs() < 1e-3, "|Dw| = {m} at ({x}, {y})");
                }
            }
        }
        assert!(mollified_tent(&g, 0.01).is_err());
    }

    #[test]
    fn flat_state_values() {
        let g = Grid::unit(16).unwrap();
        let f = flat(&g);
        let e = bonded_energy(&f.u, &f.w, 0.01, 100.0, 1e-6).unwrap();
        assert_eq!(e.total, 2.0);
        assert_eq!(e.bond, 0.0);
        assert_eq!(e.bend, 0.0);
        assert_eq!(f.predicted_energy, 2.0);
    }

    #[test]
    fn laminate_parameter_examples() {
        let p = laminate_params_formula(1e-3, 1.0);
        assert!((p.period - 0.0631).abs() < 1e-4);
        assert!((p.tube_width - 0.00398).abs() < 1e-5);
        assert_eq!(p.boundary_layer, p.period);
        assert!(optimal_laminate_params(1e-3, 1.0).is_err());
        let q = optimal_laminate_params(0.01, 10.0).unwrap();
        let e = laminate_predicted_energy(0.01, 10.0, &q);
        let target = 3.0 * (0.1f64).powf(0.4);
        assert!(e / target > 0.5 && e / target < 2.0);
    }

    #[test]
    fn tube_amplitude_matches_period() {
        let (p, d) = (0.07, 0.013);
        let a = tube_amplitude(p, d);
        let n = 200_000;
        let h = d / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let x = (k as f64 + 0.5) * h;
            let dphi = 4.0 * (PI * x / d).sin().powi(3) * (PI * x / d).cos() * PI / d;
            acc += a * a * dphi * dphi * h;
        }
        assert!((acc - p).abs() < 1e-9);
    }

    #[test]
    fn merge_template_endpoints() {
        let p = 0.2;
        for k in 0..=40 {
            let t = 2.0 * p * k as f64 / 40.0;
            assert!((merge_template(t, p, 0.0) - sawtooth(t, p)).abs() < 1e-14);
            assert!((merge_template(t, p, 1.0) - sawtooth(t, 2.0 * p)).abs() < 1e-14);
            let m = merge_template(t, p, 0.37);
            assert!(m >= -1e-14);
        }
    }

    #[test]
    fn laminate_is_invariant_beyond_boundary_layer() {
        let (s, gm) = (0.01, 20.0);
        let g = laminate_strip_grid(64, 256, s, gm).unwrap();
        let c = laminate(&g, s, gm).unwrap();
        let ConstructionParams::Laminate(p) = c.params_used else { panic!() };
        let i0 = (p.boundary_layer / g.hx()).ceil() as usize;
        for i in i0..=g.nx {
            for j in 0..=g.ny {
                assert_eq!(c.w.at(i, j), c.w.at(i0, j));
            }
        }
        assert!(c.w.values.iter().all(|v| *v >= 0.0));
        assert!((0..=g.ny).all(|j| c.w.at(0, j) == 0.0 && c.u.x[g.idx(0, j)] == 0.0 && c.u.y[g.idx(0, j)] == 0.0));
    }

    #[test]
    fn tube_params_fit_and_double() {
        let p = tube_branching_params(1e-4, 1.0, 1.0);
        assert!(p.generations >= 2);
        p.validate(1.0).unwrap();
        assert_eq!(p.period(3), 8.0 * p.base_period);
        assert!(p.positions.windows(2).all(|w| w[1] / w[0] > 7.99 && w[1] / w[0] < 8.01));
    }

    #[test]
    fn blister_is_feasible() {
        let g = Grid::unit(128).unwrap();
        let c = branched_blister(&g, 0.04).unwrap();
        assert!(c.w.values.iter().all(|v| *v >= 0.0));
        let m = c.boundary.mask(&g);
        for k in 0..g.n_nodes() {
            if m[k] {
                assert_eq!((c.w.values[k], c.u.x[k], c.u.y[k]), (0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn lift_of_reference_state_is_uniform_compression() {
        let g = Grid::unit(8).unwrap();
        let d = 0.1;
        let v = lift_to_3d(&VectorField2::zeros(g), &ScalarField::zeros(g), d, 0.1, 2).unwrap();
        let k = v.idx(2, g.idx(3, 5));
        assert!((v.v[0][k] - 0.9 * g.x(3)).abs() < 1e-15);
        assert!((v.v[2][k] - 0.9 * 0.1).abs() < 1e-15);
        assert!((energy_3d(&v).unwrap() - 3.0 * d * d).abs() < 1e-12);
        assert!(lift_to_3d(&VectorField2::zeros(g), &ScalarField::zeros(g), d, 0.5, 2).is_err());
        let ones = vec![1.0; g.n_nodes()];
        assert!((integrate_values(&g, &ones) - 1.0).abs() < 1e-15);
    }
}

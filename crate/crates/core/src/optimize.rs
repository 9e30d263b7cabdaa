//! Projected gradient descent with Armijo backtracking, gradient checks, and a
//! Jacobi-preconditioned conjugate-gradient relaxation of the in-plane
//! displacement at fixed deflection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energies::{EnergyBreakdown, EnergyParams, Evaluator, FunctionalKind, State};
use crate::error::{Error, Result};
use crate::fields::{BoundarySpec, Grid};
use crate::sum::dot;

pub const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    pub kind: FunctionalKind,
    pub params: EnergyParams,
    pub boundary: BoundarySpec,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-9,
            initial_step: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            kind: FunctionalKind::Fvk,
            params: EnergyParams::default(),
            boundary: BoundarySpec::all_dirichlet(),
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::input("max_iter", "must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::input("grad_tol", "must be positive"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::input("initial_step", "must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::input("backtrack", "must lie in (0, 1)"));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(Error::input("sufficient_decrease", "must lie in (0, 1)"));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub state: State,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub final_projected_gradient_norm: f64,
    pub energy_history: Vec<f64>,
    pub diagnostic: Option<String>,
}

/// Smooth objective on a flat vector of unknowns.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Nodewise constraint set: fixed entries and entries clamped to `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub fixed: Vec<bool>,
    pub nonneg: Vec<bool>,
}

impl Projection {
    pub fn none(n: usize) -> Self {
        Self {
            fixed: vec![false; n],
            nonneg: vec![false; n],
        }
    }

    /// Dirichlet rows on all three unknowns and `w ≥ 0`.
    pub fn for_state(grid: &Grid, boundary: &BoundarySpec) -> Self {
        let n = grid.n_nodes();
        let m = boundary.mask(grid);
        let mut fixed = Vec::with_capacity(3 * n);
        for _ in 0..3 {
            fixed.extend_from_slice(&m);
        }
        let mut nonneg = vec![false; 3 * n];
        nonneg[2 * n..].iter_mut().for_each(|v| *v = true);
        Self { fixed, nonneg }
    }

    /// Projects `trial` in place; fixed entries are copied from `anchor`.
    pub fn apply(&self, anchor: &[f64], trial: &mut [f64]) {
        for k in 0..trial.len() {
            if self.fixed[k] {
                trial[k] = anchor[k];
            } else if self.nonneg[k] && trial[k] < 0.0 {
                trial[k] = 0.0;
            }
        }
    }

    pub fn is_feasible(&self, anchor: &[f64], x: &[f64]) -> bool {
        (0..x.len()).all(|k| (!self.fixed[k] || x[k] == anchor[k]) && (!self.nonneg[k] || x[k] >= 0.0))
    }

    /// `‖x − P(x − g)‖₂`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut t: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        self.apply(x, &mut t);
        let d: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a - b).collect();
        dot(&d, &d).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_projected_gradient_norm: f64,
    pub history: Vec<f64>,
    pub diagnostic: Option<String>,
}

/// Projected gradient descent; the step grows by `1/backtrack` after each
/// accepted iterate and shrinks by `backtrack` on rejection.
pub fn projected_descent(
    obj: &dyn Objective,
    x0: &[f64],
    proj: &Projection,
    opts: &MinimizeOptions,
) -> DescentOutcome {
    let mut x = x0.to_vec();
    proj.apply(x0, &mut x);
    let mut f = obj.value(&x);
    let mut history = vec![f];
    let mut step = opts.initial_step;
    let mut diagnostic = None;
    let mut g = obj.gradient(&x);
    let mut pg = proj.projected_gradient_norm(&x, &g);
    let mut iterations = 0;
    while iterations < opts.max_iter && pg > opts.grad_tol {
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            proj.apply(x0, &mut trial);
            let d: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &d);
            let ft = obj.value(&trial);
            if ft.is_finite() && ft <= f + opts.sufficient_decrease * slope && ft < f {
                x = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= opts.backtrack;
        }
        if !accepted {
            diagnostic = Some(format!(
                "line search failed after {MAX_HALVINGS} halvings at iteration {iterations}"
            ));
            break;
        }
        iterations += 1;
        history.push(f);
        step /= opts.backtrack;
        g = obj.gradient(&x);
        pg = proj.projected_gradient_norm(&x, &g);
    }
    DescentOutcome {
        x,
        value: f,
        iterations,
        converged: pg <= opts.grad_tol,
        final_projected_gradient_norm: pg,
        history,
        diagnostic,
    }
}

struct KindObjective<'a> {
    ev: &'a Evaluator,
    opts: &'a MinimizeOptions,
}

impl Objective for KindObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let s = State::from_vec(self.ev.grid(), x);
        self.ev
            .value(self.opts.kind, &s, &self.opts.params)
            .unwrap_or(f64::INFINITY)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = State::from_vec(self.ev.grid(), x);
        self.ev
            .gradient(self.opts.kind, &s, &self.opts.params, &self.opts.boundary)
            .map(|g| g.to_vec())
            .unwrap_or_else(|_| vec![0.0; x.len()])
    }
}

/// Minimises `opts.kind` from `initial`; the result is never worse than the start.
pub fn minimize(initial: &State, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    opts.validate()?;
    if initial.w.values.iter().any(|v| *v < 0.0) {
        return Err(Error::input("initial", "deflection must be non-negative"));
    }
    let grid = initial.grid();
    let ev = Evaluator::new(grid);
    let proj = Projection::for_state(&grid, &opts.boundary);
    let x0 = initial.to_vec();
    let out = projected_descent(&KindObjective { ev: &ev, opts }, &x0, &proj, opts);
    let state = State::from_vec(grid, &out.x);
    let energy = ev.breakdown(opts.kind, &state, &opts.params)?;
    Ok(MinimizeResult {
        state,
        energy,
        iterations: out.iterations,
        converged: out.converged,
        final_projected_gradient_norm: out.final_projected_gradient_norm,
        energy_history: out.history,
        diagnostic: out.diagnostic,
    })
}

pub const GRADIENT_CHECK_DIRECTIONS: usize = 32;
pub const GRADIENT_CHECK_STEP: f64 = 1e-6;

/// Adds uniform noise of the given amplitude to every free unknown and
/// projects back onto `w ≥ 0`; identical seeds give identical states.
pub fn perturb(state: &State, boundary: &BoundarySpec, amplitude: f64, seed: u64) -> Result<State> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::input("amplitude", format!("must be nonnegative, got {amplitude}")));
    }
    let grid = state.grid();
    let proj = Projection::for_state(&grid, boundary);
    let x0 = state.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = x0.iter().map(|v| v + amplitude * rng.random_range(-1.0..1.0)).collect();
    proj.apply(&x0, &mut x);
    Ok(State::from_vec(grid, &x))
}

/// Largest relative mismatch between the analytic directional derivative and
/// a central difference over seeded random directions.
pub fn check_gradient(state: &State, kind: FunctionalKind, params: &EnergyParams, seed: u64) -> Result<f64> {
    params.validate()?;
    let grid = state.grid();
    let ev = Evaluator::new(grid);
    let free = BoundarySpec {
        left: crate::fields::EdgeCondition::Free,
        right: crate::fields::EdgeCondition::Free,
        bottom: crate::fields::EdgeCondition::Free,
        top: crate::fields::EdgeCondition::Free,
    };
    let g = ev.gradient(kind, state, params, &free)?.to_vec();
    let x = state.to_vec();
    let n = x.len();
    let rms = (dot(&x, &x) / n as f64).sqrt();
    let step = GRADIENT_CHECK_STEP * rms.max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..GRADIENT_CHECK_DIRECTIONS {
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let an = dot(&g, &d);
        let plus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
        let minus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - step * b).collect();
        let fp = ev.value(kind, &State::from_vec(grid, &plus), params)?;
        let fm = ev.value(kind, &State::from_vec(grid, &minus), params)?;
        let fd = (fp - fm) / (2.0 * step);
        let scale = an.abs().max(fd.abs());
        let err = if scale == 0.0 { 0.0 } else { (an - fd).abs() / scale };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Membrane stiffness `scale·[(1−ν)|e|² + ν(tr e)²]` with `e = Du + Duᵀ + …`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneModel {
    pub scale: f64,
    pub nu: f64,
}

impl MembraneModel {
    pub fn for_kind(kind: FunctionalKind, p: &EnergyParams) -> Option<Self> {
        match kind {
            FunctionalKind::Eikonal => None,
            FunctionalKind::Fvk | FunctionalKind::BondedSmooth => Some(Self { scale: 1.0, nu: 0.0 }),
            FunctionalKind::FvkGeneral | FunctionalKind::Linearized => Some(Self {
                scale: 0.5 * p.young * p.thickness,
                nu: p.nu,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxReport {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

/// Minimises over `u` at fixed `w` by preconditioned CG on the exact quadratic;
/// Dirichlet rows of `u` keep their values.
pub fn relax_displacement(
    ev: &Evaluator,
    state: &mut State,
    kind: FunctionalKind,
    params: &EnergyParams,
    boundary: &BoundarySpec,
    max_iter: usize,
    rel_tol: f64,
) -> Result<RelaxReport> {
    let Some(model) = MembraneModel::for_kind(kind, params) else {
        return Ok(RelaxReport { iterations: 0, initial_residual: 0.0, final_residual: 0.0 });
    };
    let grid = ev.grid();
    let n = grid.n_nodes();
    let mask = boundary.mask(&grid);
    let g = ev.gradient(kind, state, params, boundary)?;
    let mut r: Vec<f64> = g.u.x.iter().chain(&g.u.y).map(|v| -v).collect();
    let wts = &ev.weights;
    let gx = ev.ops.gram_diag(0, wts);
    let gy = ev.ops.gram_diag(1, wts);
    let mut dinv = vec![0.0; 2 * n];
    for p in 0..n {
        let a = 8.0 * model.scale * gx[p] + 4.0 * model.scale * (1.0 - model.nu) * gy[p];
        let b = 8.0 * model.scale * gy[p] + 4.0 * model.scale * (1.0 - model.nu) * gx[p];
        dinv[p] = if mask[p] || a <= 0.0 { 0.0 } else { 1.0 / a };
        dinv[n + p] = if mask[p] || b <= 0.0 { 0.0 } else { 1.0 / b };
    }
    let r0 = dot(&r, &r).sqrt();
    if r0 == 0.0 {
        return Ok(RelaxReport { iterations: 0, initial_residual: 0.0, final_residual: 0.0 });
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut delta = vec![0.0; 2 * n];
    let mut it = 0;
    let mut rn = r0;
    while it < max_iter && rn > rel_tol * r0 {
        let hp = membrane_hessian(ev, model, &p, &mask);
        let php = dot(&p, &hp);
        if !(php > 0.0) {
            break;
        }
        let alpha = rz / php;
        for k in 0..2 * n {
            delta[k] += alpha * p[k];
            r[k] -= alpha * hp[k];
        }
        z = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..2 * n {
            p[k] = z[k] + beta * p[k];
        }
        rn = dot(&r, &r).sqrt();
        it += 1;
    }
    for k in 0..n {
        state.u.x[k] += delta[k];
        state.u.y[k] += delta[n + k];
    }
    Ok(RelaxReport { iterations: it, initial_residual: r0, final_residual: rn })
}

fn membrane_hessian(ev: &Evaluator, m: MembraneModel, v: &[f64], mask: &[bool]) -> Vec<f64> {
    let n = mask.len();
    let (v1, v2) = v.split_at(n);
    let o = &ev.ops;
    let wts = &ev.weights;
    let v1x = o.dx(v1);
    let v1y = o.dy(v1);
    let v2x = o.dx(v2);
    let v2y = o.dy(v2);
    let mut sxx2 = vec![0.0; n];
    let mut syy2 = vec![0.0; n];
    let mut sxy = vec![0.0; n];
    for i in 0..n {
        let exx = 2.0 * v1x[i];
        let eyy = 2.0 * v2y[i];
        let exy = v1y[i] + v2x[i];
        let tr = exx + eyy;
        let c = m.scale * wts[i];
        sxx2[i] = 2.0 * c * (2.0 * (1.0 - m.nu) * exx + 2.0 * m.nu * tr);
        syy2[i] = 2.0 * c * (2.0 * (1.0 - m.nu) * eyy + 2.0 * m.nu * tr);
        sxy[i] = c * 4.0 * (1.0 - m.nu) * exy;
    }
    let a = o.dx_t(&sxx2);
    let b = o.dy_t(&sxy);
    let c = o.dy_t(&syy2);
    let d = o.dx_t(&sxy);
    let mut out = Vec::with_capacity(2 * n);
    out.extend((0..n).map(|i| if mask[i] { 0.0 } else { a[i] + b[i] }));
    out.extend((0..n).map(|i| if mask[i] { 0.0 } else { c[i] + d[i] }));
    out
}

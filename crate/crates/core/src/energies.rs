//! Discrete functionals and their exact gradients.
//!
//! Every energy is the trapezoid integral of a nodewise density built from the
//! finite-difference operators in [`crate::fields`]. Gradients are assembled
//! with the transposed stencils, so they are the exact derivative of the
//! discrete value, not a discretisation of the continuous first variation.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{integrate_values, BoundarySpec, Grid, Ops, ScalarField, Stencil1D, VectorField2};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    pub sigma: f64,
    pub gamma: f64,
    pub nu: f64,
    pub young: f64,
    pub thickness: f64,
    pub eigenstrain: f64,
    pub eta: f64,
}

/// Threshold separating bonded from lifted nodes on a domain of size `max(lx, ly)`.
pub fn default_eta(grid: &Grid) -> f64 {
    1e-6 * grid.lx.max(grid.ly)
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            gamma: 0.0,
            nu: 0.0,
            young: 1.0,
            thickness: 0.01,
            eigenstrain: 0.01,
            eta: 1e-6,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::input(name, format!("must be positive, got {v}")))
            }
        };
        pos("sigma", self.sigma)?;
        pos("young", self.young)?;
        pos("thickness", self.thickness)?;
        pos("eta", self.eta)?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::input("gamma", "must be non-negative"));
        }
        if !(self.nu.is_finite() && (-1.0..=0.5).contains(&self.nu)) {
            return Err(Error::input("nu", "Poisson ratio must lie in [-1, 1/2]"));
        }
        if !(self.eigenstrain.is_finite() && self.eigenstrain >= 0.0 && self.eigenstrain < 1.0) {
            return Err(Error::input("eigenstrain", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub stretch: f64,
    pub bend: f64,
    pub bond: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(stretch: f64, bend: f64, bond: f64) -> Self {
        Self {
            stretch,
            bend,
            bond,
            total: stretch + bend + bond,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldSegment {
    pub length: f64,
    pub jump_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FoldSet {
    pub segments: Vec<FoldSegment>,
}

impl FoldSet {
    pub fn new(segments: Vec<FoldSegment>) -> Result<Self> {
        for s in &segments {
            if !(s.length.is_finite() && s.length > 0.0) {
                return Err(Error::input("length", "fold lengths must be positive"));
            }
            if !(s.jump_magnitude.is_finite() && s.jump_magnitude >= 0.0) {
                return Err(Error::input("jump_magnitude", "must be finite and non-negative"));
            }
        }
        Ok(Self { segments })
    }

    pub fn total_length(&self) -> f64 {
        crate::sum::sum(self.segments.iter().map(|s| s.length))
    }
}

/// `(1/3) Σ |[Dw]|³ · length`.
pub fn fold_energy(folds: &FoldSet) -> f64 {
    crate::sum::sum(
        folds
            .segments
            .iter()
            .map(|s| s.jump_magnitude.powi(3) * s.length / 3.0),
    )
}

/// In-plane displacement and deflection on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: VectorField2,
    pub w: ScalarField,
}

impl State {
    pub fn new(u: VectorField2, w: ScalarField) -> Result<Self> {
        u.grid.check_same(&w.grid)?;
        Ok(Self { u, w })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            u: VectorField2::zeros(grid),
            w: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.w.grid
    }

    /// Flattened `(u₁, u₂, w)` degrees of freedom.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.w.values.len());
        v.extend_from_slice(&self.u.x);
        v.extend_from_slice(&self.u.y);
        v.extend_from_slice(&self.w.values);
        v
    }

    pub fn from_vec(grid: Grid, v: &[f64]) -> Self {
        let n = grid.n_nodes();
        Self {
            u: VectorField2 {
                grid,
                x: v[..n].to_vec(),
                y: v[n..2 * n].to_vec(),
            },
            w: ScalarField {
                grid,
                values: v[2 * n..3 * n].to_vec(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    Eikonal,
    Fvk,
    FvkGeneral,
    BondedSmooth,
    Linearized,
}

impl FunctionalKind {
    pub const ALL: [FunctionalKind; 5] = [
        FunctionalKind::Eikonal,
        FunctionalKind::Fvk,
        FunctionalKind::FvkGeneral,
        FunctionalKind::BondedSmooth,
        FunctionalKind::Linearized,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FunctionalKind::Eikonal => "eikonal",
            FunctionalKind::Fvk => "fvk",
            FunctionalKind::FvkGeneral => "fvk-general",
            FunctionalKind::BondedSmooth => "bonded-smooth",
            FunctionalKind::Linearized => "linearized",
        }
    }
}

impl fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FunctionalKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unsupported(s.to_string()))
    }
}

/// Precomputed operators and quadrature weights for one grid.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub(crate) ops: Ops,
    pub(crate) weights: Vec<f64>,
}

struct Derivs {
    u1x: Vec<f64>,
    u1y: Vec<f64>,
    u2x: Vec<f64>,
    u2y: Vec<f64>,
    wx: Vec<f64>,
    wy: Vec<f64>,
}

struct Curv {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Evaluator {
    pub fn new(grid: Grid) -> Self {
        Self {
            ops: Ops::new(grid),
            weights: grid.weights(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.ops.grid
    }

    fn derivs(&self, s: &State) -> Derivs {
        let o = &self.ops;
        Derivs {
            u1x: o.dx(&s.u.x),
            u1y: o.dy(&s.u.x),
            u2x: o.dx(&s.u.y),
            u2y: o.dy(&s.u.y),
            wx: o.dx(&s.w.values),
            wy: o.dy(&s.w.values),
        }
    }

    fn curv(&self, w: &[f64]) -> Curv {
        Curv {
            a: self.ops.dxx(w),
            b: self.ops.dxy(w),
            c: self.ops.dyy(w),
        }
    }

    fn integ(&self, density: &[f64]) -> f64 {
        integrate_values(&self.ops.grid, density)
    }

    fn check(&self, s: &State) -> Result<()> {
        self.ops.grid.check_same(&s.u.grid)?;
        self.ops.grid.check_same(&s.w.grid)
    }

    /// Stretch and bend of the scaled functional `|Du+Duᵀ+Dw⊗Dw−Id|² + σ²|D²w|²`.
    pub fn fvk(&self, s: &State, sigma: f64) -> Result<EnergyBreakdown> {
        self.check(s)?;
        let d = self.derivs(s);
        let k = self.curv(&s.w.values);
        let n = d.wx.len();
        let mut st = vec![0.0; n];
        let mut be = vec![0.0; n];
        for i in 0..n {
            let (exx, eyy, exy) = scaled_strain(&d, i, 0.5);
            st[i] = exx * exx + 2.0 * exy * exy + eyy * eyy;
            be[i] = sigma * sigma * (k.a[i] * k.a[i] + 2.0 * k.b[i] * k.b[i] + k.c[i] * k.c[i]);
        }
        Ok(EnergyBreakdown::new(self.integ(&st), self.integ(&be), 0.0))
    }

    pub fn eikonal(&self, w: &ScalarField, sigma: f64) -> Result<EnergyBreakdown> {
        self.ops.grid.check_same(&w.grid)?;
        let wx = self.ops.dx(&w.values);
        let wy = self.ops.dy(&w.values);
        let k = self.curv(&w.values);
        let n = wx.len();
        let mut st = vec![0.0; n];
        let mut be = vec![0.0; n];
        for i in 0..n {
            let q = wx[i] * wx[i] + wy[i] * wy[i] - 1.0;
            st[i] = q * q;
            be[i] = sigma * sigma * (k.a[i] * k.a[i] + 2.0 * k.b[i] * k.b[i] + k.c[i] * k.c[i]);
        }
        Ok(EnergyBreakdown::new(self.integ(&st), self.integ(&be), 0.0))
    }

    pub fn fvk_general(&self, s: &State, p: &EnergyParams) -> Result<EnergyBreakdown> {
        self.check(s)?;
        let d = self.derivs(s);
        let k = self.curv(&s.w.values);
        let n = d.wx.len();
        let pre = 0.5 * p.young * p.thickness;
        let kb = pre * p.thickness * p.thickness / 12.0;
        let mut st = vec![0.0; n];
        let mut be = vec![0.0; n];
        for i in 0..n {
            let (exx, eyy, exy) = scaled_strain(&d, i, p.eigenstrain);
            let tr = exx + eyy;
            st[i] = pre * ((1.0 - p.nu) * (exx * exx + 2.0 * exy * exy + eyy * eyy) + p.nu * tr * tr);
            let lap = k.a[i] + k.c[i];
            be[i] = kb
                * ((1.0 - p.nu) * (k.a[i] * k.a[i] + 2.0 * k.b[i] * k.b[i] + k.c[i] * k.c[i])
                    + p.nu * lap * lap);
        }
        Ok(EnergyBreakdown::new(self.integ(&st), self.integ(&be), 0.0))
    }

    /// Scaled functional plus `γ·|{w > η}|` measured by quadrature.
    pub fn bonded(&self, s: &State, sigma: f64, gamma: f64, eta: f64) -> Result<EnergyBreakdown> {
        let e = self.fvk(s, sigma)?;
        let ind: Vec<f64> = s
            .w
            .values
            .iter()
            .map(|&w| if w > eta { 1.0 } else { 0.0 })
            .collect();
        Ok(EnergyBreakdown::new(e.stretch, e.bend, gamma * self.integ(&ind)))
    }

    /// Bond term replaced by the ramp `γ∫min(w/η, 1)`.
    pub fn bonded_smooth(&self, s: &State, sigma: f64, gamma: f64, eta: f64) -> Result<EnergyBreakdown> {
        let e = self.fvk(s, sigma)?;
        let ramp: Vec<f64> = s.w.values.iter().map(|&w| (w / eta).min(1.0)).collect();
        Ok(EnergyBreakdown::new(e.stretch, e.bend, gamma * self.integ(&ramp)))
    }

    pub fn linearized(&self, s: &State, p: &EnergyParams) -> Result<f64> {
        self.check(s)?;
        let d = self.derivs(s);
        let k = self.curv(&s.w.values);
        let n = d.wx.len();
        let pre = 0.5 * p.young * p.thickness;
        let hh = p.thickness * p.thickness / 12.0;
        let del = p.eigenstrain;
        let mut dens = vec![0.0; n];
        for i in 0..n {
            let mxx = 2.0 * d.u1x[i] - 2.0 * del;
            let myy = 2.0 * d.u2y[i] - 2.0 * del;
            let mxy = d.u1y[i] + d.u2x[i];
            let tr = mxx + myy;
            let g2 = d.wx[i] * d.wx[i] + d.wy[i] * d.wy[i];
            let lap = k.a[i] + k.c[i];
            let hess2 = k.a[i] * k.a[i] + 2.0 * k.b[i] * k.b[i] + k.c[i] * k.c[i];
            dens[i] = pre
                * ((1.0 - p.nu) * (mxx * mxx + 2.0 * mxy * mxy + myy * myy)
                    - 4.0 * del * g2
                    + p.nu * tr * tr
                    - 8.0 * del * p.nu * g2
                    + hh * ((1.0 - p.nu) * hess2 + p.nu * lap * lap));
        }
        Ok(self.integ(&dens))
    }

    /// Scalar objective minimised for `kind`.
    pub fn value(&self, kind: FunctionalKind, s: &State, p: &EnergyParams) -> Result<f64> {
        Ok(match kind {
            FunctionalKind::Eikonal => self.eikonal(&s.w, p.sigma)?.total,
            FunctionalKind::Fvk => self.fvk(s, p.sigma)?.total,
            FunctionalKind::FvkGeneral => self.fvk_general(s, p)?.total,
            FunctionalKind::BondedSmooth => self.bonded_smooth(s, p.sigma, p.gamma, p.eta)?.total,
            FunctionalKind::Linearized => self.linearized(s, p)?,
        })
    }

    /// Breakdown reported for `kind`; the linearized value is stored as `stretch`.
    pub fn breakdown(&self, kind: FunctionalKind, s: &State, p: &EnergyParams) -> Result<EnergyBreakdown> {
        Ok(match kind {
            FunctionalKind::Eikonal => self.eikonal(&s.w, p.sigma)?,
            FunctionalKind::Fvk => self.fvk(s, p.sigma)?,
            FunctionalKind::FvkGeneral => self.fvk_general(s, p)?,
            FunctionalKind::BondedSmooth => self.bonded_smooth(s, p.sigma, p.gamma, p.eta)?,
            FunctionalKind::Linearized => {
                let v = self.linearized(s, p)?;
                EnergyBreakdown {
                    stretch: v,
                    bend: 0.0,
                    bond: 0.0,
                    total: v,
                }
            }
        })
    }

    /// Exact gradient of [`Evaluator::value`] with Dirichlet rows zeroed.
    pub fn gradient(
        &self,
        kind: FunctionalKind,
        s: &State,
        p: &EnergyParams,
        boundary: &BoundarySpec,
    ) -> Result<State> {
        self.check(s)?;
        let grid = self.ops.grid;
        let n = grid.n_nodes();
        let wt = &self.weights;
        let d = self.derivs(s);
        let k = self.curv(&s.w.values);
        // sensitivities with respect to strain components and curvatures
        let mut sxx = vec![0.0; n];
        let mut sxy = vec![0.0; n];
        let mut syy = vec![0.0; n];
        let mut ta = vec![0.0; n];
        let mut tb = vec![0.0; n];
        let mut tc = vec![0.0; n];
        // direct sensitivities of the density with respect to (wx, wy) and w
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        let mut gw = vec![0.0; n];
        let mut couple_w = true;
        match kind {
            FunctionalKind::Eikonal => {
                couple_w = false;
                let s2 = p.sigma * p.sigma;
                for i in 0..n {
                    let q = d.wx[i] * d.wx[i] + d.wy[i] * d.wy[i] - 1.0;
                    gx[i] = 4.0 * wt[i] * q * d.wx[i];
                    gy[i] = 4.0 * wt[i] * q * d.wy[i];
                    ta[i] = 2.0 * s2 * wt[i] * k.a[i];
                    tb[i] = 4.0 * s2 * wt[i] * k.b[i];
                    tc[i] = 2.0 * s2 * wt[i] * k.c[i];
                }
            }
            FunctionalKind::Fvk | FunctionalKind::BondedSmooth => {
                let s2 = p.sigma * p.sigma;
                for i in 0..n {
                    let (exx, eyy, exy) = scaled_strain(&d, i, 0.5);
                    sxx[i] = 2.0 * wt[i] * exx;
                    syy[i] = 2.0 * wt[i] * eyy;
                    sxy[i] = 4.0 * wt[i] * exy;
                    ta[i] = 2.0 * s2 * wt[i] * k.a[i];
                    tb[i] = 4.0 * s2 * wt[i] * k.b[i];
                    tc[i] = 2.0 * s2 * wt[i] * k.c[i];
                    if kind == FunctionalKind::BondedSmooth && s.w.values[i] < p.eta {
                        gw[i] = p.gamma * wt[i] / p.eta;
                    }
                }
            }
            FunctionalKind::FvkGeneral => {
                let pre = 0.5 * p.young * p.thickness;
                let kb = pre * p.thickness * p.thickness / 12.0;
                for i in 0..n {
                    let (exx, eyy, exy) = scaled_strain(&d, i, p.eigenstrain);
                    let tr = exx + eyy;
                    sxx[i] = pre * wt[i] * (2.0 * (1.0 - p.nu) * exx + 2.0 * p.nu * tr);
                    syy[i] = pre * wt[i] * (2.0 * (1.0 - p.nu) * eyy + 2.0 * p.nu * tr);
                    sxy[i] = pre * wt[i] * 4.0 * (1.0 - p.nu) * exy;
                    let lap = k.a[i] + k.c[i];
                    ta[i] = kb * wt[i] * (2.0 * (1.0 - p.nu) * k.a[i] + 2.0 * p.nu * lap);
                    tc[i] = kb * wt[i] * (2.0 * (1.0 - p.nu) * k.c[i] + 2.0 * p.nu * lap);
                    tb[i] = kb * wt[i] * 4.0 * (1.0 - p.nu) * k.b[i];
                }
            }
            FunctionalKind::Linearized => {
                couple_w = false;
                let pre = 0.5 * p.young * p.thickness;
                let kb = pre * p.thickness * p.thickness / 12.0;
                let del = p.eigenstrain;
                for i in 0..n {
                    let mxx = 2.0 * d.u1x[i] - 2.0 * del;
                    let myy = 2.0 * d.u2y[i] - 2.0 * del;
                    let mxy = d.u1y[i] + d.u2x[i];
                    let tr = mxx + myy;
                    sxx[i] = pre * wt[i] * (2.0 * (1.0 - p.nu) * mxx + 2.0 * p.nu * tr);
                    syy[i] = pre * wt[i] * (2.0 * (1.0 - p.nu) * myy + 2.0 * p.nu * tr);
                    sxy[i] = pre * wt[i] * 4.0 * (1.0 - p.nu) * mxy;
                    let c = -2.0 * pre * wt[i] * (4.0 * del + 8.0 * del * p.nu);
                    gx[i] = c * d.wx[i];
                    gy[i] = c * d.wy[i];
                    let lap = k.a[i] + k.c[i];
                    ta[i] = kb * wt[i] * (2.0 * (1.0 - p.nu) * k.a[i] + 2.0 * p.nu * lap);
                    tc[i] = kb * wt[i] * (2.0 * (1.0 - p.nu) * k.c[i] + 2.0 * p.nu * lap);
                    tb[i] = kb * wt[i] * 4.0 * (1.0 - p.nu) * k.b[i];
                }
            }
        }
        let o = &self.ops;
        let (mut g1, mut g2) = if kind == FunctionalKind::Eikonal {
            (vec![0.0; n], vec![0.0; n])
        } else {
            let two_sxx: Vec<f64> = sxx.iter().map(|v| 2.0 * v).collect();
            let two_syy: Vec<f64> = syy.iter().map(|v| 2.0 * v).collect();
            let g1 = add(&o.dx_t(&two_sxx), &o.dy_t(&sxy));
            let g2 = add(&o.dy_t(&two_syy), &o.dx_t(&sxy));
            (g1, g2)
        };
        if couple_w {
            for i in 0..n {
                gx[i] += 2.0 * sxx[i] * d.wx[i] + sxy[i] * d.wy[i];
                gy[i] += 2.0 * syy[i] * d.wy[i] + sxy[i] * d.wx[i];
            }
        }
        let mut g3 = add(&o.dx_t(&gx), &o.dy_t(&gy));
        let bend = add(&add(&o.dxx_t(&ta), &o.dxy_t(&tb)), &o.dyy_t(&tc));
        for i in 0..n {
            g3[i] += bend[i] + gw[i];
        }
        boundary.apply_zero(&grid, &mut g1);
        boundary.apply_zero(&grid, &mut g2);
        boundary.apply_zero(&grid, &mut g3);
        Ok(State {
            u: VectorField2 {
                grid,
                x: g1,
                y: g2,
            },
            w: ScalarField { grid, values: g3 },
        })
    }
}

#[inline]
fn scaled_strain(d: &Derivs, i: usize, eig: f64) -> (f64, f64, f64) {
    (
        2.0 * d.u1x[i] + d.wx[i] * d.wx[i] - 2.0 * eig,
        2.0 * d.u2y[i] + d.wy[i] * d.wy[i] - 2.0 * eig,
        d.u1y[i] + d.u2x[i] + d.wx[i] * d.wy[i],
    )
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn eikonal_energy(w: &ScalarField, sigma: f64) -> Result<EnergyBreakdown> {
    Evaluator::new(w.grid).eikonal(w, sigma)
}

pub fn fvk_energy(u: &VectorField2, w: &ScalarField, sigma: f64) -> Result<EnergyBreakdown> {
    let s = State::new(u.clone(), w.clone())?;
    Evaluator::new(w.grid).fvk(&s, sigma)
}

pub fn fvk_general_energy(u: &VectorField2, w: &ScalarField, params: &EnergyParams) -> Result<EnergyBreakdown> {
    params.validate()?;
    let s = State::new(u.clone(), w.clone())?;
    Evaluator::new(w.grid).fvk_general(&s, params)
}

pub fn bonded_energy(u: &VectorField2, w: &ScalarField, sigma: f64, gamma: f64, eta: f64) -> Result<EnergyBreakdown> {
    check_bond(gamma, eta)?;
    let s = State::new(u.clone(), w.clone())?;
    Evaluator::new(w.grid).bonded(&s, sigma, gamma, eta)
}

pub fn bonded_energy_smooth(u: &VectorField2, w: &ScalarField, sigma: f64, gamma: f64, eta: f64) -> Result<f64> {
    check_bond(gamma, eta)?;
    let s = State::new(u.clone(), w.clone())?;
    Ok(Evaluator::new(w.grid).bonded_smooth(&s, sigma, gamma, eta)?.total)
}

fn check_bond(gamma: f64, eta: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::input("gamma", "must be non-negative"));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::input("eta", "must be positive"));
    }
    Ok(())
}

pub fn linearized_energy(u: &VectorField2, w: &ScalarField, params: &EnergyParams) -> Result<f64> {
    params.validate()?;
    let s = State::new(u.clone(), w.clone())?;
    Evaluator::new(w.grid).linearized(&s, params)
}

pub fn discrete_gradient(
    kind: FunctionalKind,
    state: &State,
    params: &EnergyParams,
    boundary: &BoundarySpec,
) -> Result<State> {
    Evaluator::new(state.grid()).gradient(kind, state, params, boundary)
}

/// `v : Ω × (0, h) → ℝ³` sampled on `(nx+1)·(ny+1)·(nz+1)` nodes, layer-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationField3D {
    pub grid: Grid,
    pub nz: usize,
    pub thickness: f64,
    pub v: [Vec<f64>; 3],
}

impl DeformationField3D {
    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes() * (self.nz + 1)
    }

    #[inline]
    pub fn idx(&self, k: usize, node2d: usize) -> usize {
        k * self.grid.n_nodes() + node2d
    }

    pub fn x3(&self, k: usize) -> f64 {
        self.thickness * k as f64 / self.nz as f64
    }

    /// `v(x) = f(x₁, x₂, x₃)` at every node.
    pub fn from_fn(
        grid: Grid,
        nz: usize,
        thickness: f64,
        f: impl Fn(f64, f64, f64) -> [f64; 3],
    ) -> Result<Self> {
        if nz < 2 {
            return Err(Error::input("nz", "need at least 2 layers"));
        }
        let n2 = grid.n_nodes();
        let mut v = [vec![0.0; n2 * (nz + 1)], vec![0.0; n2 * (nz + 1)], vec![0.0; n2 * (nz + 1)]];
        for k in 0..=nz {
            let z = thickness * k as f64 / nz as f64;
            for i in 0..=grid.nx {
                for j in 0..=grid.ny {
                    let r = f(grid.x(i), grid.y(j), z);
                    let p = k * n2 + grid.idx(i, j);
                    for c in 0..3 {
                        v[c][p] = r[c];
                    }
                }
            }
        }
        Ok(Self { grid, nz, thickness, v })
    }
}

/// Frobenius distance from `f` to SO(3); the smallest singular direction is
/// flipped when `det f < 0`.
pub fn dist_so3(f: &Matrix3<f64>) -> f64 {
    let sv = f.singular_values();
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if f.determinant() < 0.0 {
        s[2] = -s[2];
    }
    ((s[0] - 1.0).powi(2) + (s[1] - 1.0).powi(2) + (s[2] - 1.0).powi(2)).sqrt()
}

/// `(1/h)∫ dist²(Dv, SO(3))` with trapezoid weights along all three axes.
pub fn energy_3d(v: &DeformationField3D) -> Result<f64> {
    if v.nz < 2 {
        return Err(Error::input("nz", "need at least 2 layers"));
    }
    if !(v.thickness.is_finite() && v.thickness > 0.0) {
        return Err(Error::input("thickness", "must be positive"));
    }
    let grid = v.grid;
    let n2 = grid.n_nodes();
    let ops = Ops::new(grid);
    let dz = Stencil1D::d1(v.nz + 1, v.thickness / v.nz as f64);
    let mut layer_ints = Vec::with_capacity(v.nz + 1);
    for k in 0..=v.nz {
        let layer = |c: usize| &v.v[c][k * n2..(k + 1) * n2];
        let dxv: Vec<Vec<f64>> = (0..3).map(|c| ops.dx(layer(c))).collect();
        let dyv: Vec<Vec<f64>> = (0..3).map(|c| ops.dy(layer(c))).collect();
        let mut dzv = vec![vec![0.0; n2]; 3];
        for (c, out) in dzv.iter_mut().enumerate() {
            for &(col, coef) in dz.row(k) {
                let src = &v.v[c][col * n2..(col + 1) * n2];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += coef * s;
                }
            }
        }
        let dens: Vec<f64> = (0..n2)
            .map(|p| {
                let f = Matrix3::new(
                    dxv[0][p], dyv[0][p], dzv[0][p],
                    dxv[1][p], dyv[1][p], dzv[1][p],
                    dxv[2][p], dyv[2][p], dzv[2][p],
                );
                dist_so3(&f).powi(2)
            })
            .collect();
        layer_ints.push(integrate_values(&grid, &dens));
    }
    let hz = v.thickness / v.nz as f64;
    let mut acc = NeumaierSum::new();
    for (k, val) in layer_ints.iter().enumerate() {
        let c = if k == 0 || k == v.nz { 0.5 } else { 1.0 };
        acc.add(c * hz * val);
    }
    Ok(acc.value() / v.thickness)
}

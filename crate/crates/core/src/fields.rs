//! Node-centred fields on a uniform rectangular grid and the finite-difference
//! operators acting on them.
//!
//! Storage is row-major with the `x₁` index outermost: node `(i, j)` sits at
//! `(i·hx, j·hy)` and lives at offset `i·(ny+1) + j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 {
            return Err(Error::input("nx", format!("need at least 4 cells, got {nx}")));
        }
        if ny < 4 {
            return Err(Error::input("ny", format!("need at least 4 cells, got {ny}")));
        }
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::input("lx", "edge length must be positive"));
        }
        if !(ly.is_finite() && ly > 0.0) {
            return Err(Error::input("ly", "edge length must be positive"));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Unit square with `n × n` cells.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn row_len(&self) -> usize {
        self.ny + 1
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.lx
        } else {
            i as f64 * self.hx()
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny {
            self.ly
        } else {
            j as f64 * self.hy()
        }
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Trapezoid weights in units of `hx·hy`: 1 inside, 1/2 on edges, 1/4 at corners.
    #[inline]
    pub fn unit_weight(&self, i: usize, j: usize) -> f64 {
        let a = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
        let b = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
        a * b
    }

    /// Trapezoid quadrature weights, node by node.
    pub fn weights(&self) -> Vec<f64> {
        let c = self.hx() * self.hy();
        let mut w = vec![0.0; self.n_nodes()];
        w.par_chunks_mut(self.row_len())
            .enumerate()
            .for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = c * self.unit_weight(i, j);
                }
            });
        w
    }

    /// Samples `f(x₁, x₂)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        let mut v = vec![0.0; self.n_nodes()];
        v.par_chunks_mut(self.row_len())
            .enumerate()
            .for_each(|(i, row)| {
                let x = self.x(i);
                for (j, out) in row.iter_mut().enumerate() {
                    *out = f(x, self.y(j));
                }
            });
        v
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::input("grid", "fields live on different grids"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        Self {
            grid,
            values: grid.sample(f),
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::input(
                "values",
                format!("expected {} nodes, got {}", grid.n_nodes(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("values", "non-finite entry"));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField2 {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField2 {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.n_nodes()],
            y: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64) + Sync) -> Self {
        Self {
            grid,
            x: grid.sample(|a, b| f(a, b).0),
            y: grid.sample(|a, b| f(a, b).1),
        }
    }

    pub fn component(&self, k: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: if k == 0 { self.x.clone() } else { self.y.clone() },
        }
    }
}

/// Symmetric 2×2 tensor field; only `xx`, `xy`, `yy` are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTensorField {
    pub grid: Grid,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

impl SymTensorField {
    /// Pointwise `|M|² = Tr MᵀM`.
    pub fn frobenius_sq(&self) -> Vec<f64> {
        self.xx
            .iter()
            .zip(&self.xy)
            .zip(&self.yy)
            .map(|((a, b), c)| a * a + 2.0 * b * b + c * c)
            .collect()
    }

    pub fn trace(&self) -> Vec<f64> {
        self.xx.iter().zip(&self.yy).map(|(a, c)| a + c).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeCondition {
    Dirichlet,
    Free,
}

/// Edge conditions, shared by `u` and `w`. `left` is `{x₁ = 0}`, `bottom` is `{x₂ = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub left: EdgeCondition,
    pub right: EdgeCondition,
    pub bottom: EdgeCondition,
    pub top: EdgeCondition,
}

impl BoundarySpec {
    pub fn all_dirichlet() -> Self {
        use EdgeCondition::Dirichlet as D;
        Self {
            left: D,
            right: D,
            bottom: D,
            top: D,
        }
    }

    /// Clamped on `{x₁ = 0}` only; the bonded problem.
    pub fn left_only() -> Self {
        use EdgeCondition::{Dirichlet as D, Free as F};
        Self {
            left: D,
            right: F,
            bottom: F,
            top: F,
        }
    }

    pub fn any_dirichlet(&self) -> bool {
        [self.left, self.right, self.bottom, self.top].contains(&EdgeCondition::Dirichlet)
    }

    pub fn is_fixed(&self, grid: &Grid, i: usize, j: usize) -> bool {
        use EdgeCondition::Dirichlet as D;
        (i == 0 && self.left == D)
            || (i == grid.nx && self.right == D)
            || (j == 0 && self.bottom == D)
            || (j == grid.ny && self.top == D)
    }

    /// Node mask, `true` on Dirichlet nodes.
    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        let mut m = vec![false; grid.n_nodes()];
        for i in 0..=grid.nx {
            for j in 0..=grid.ny {
                m[grid.idx(i, j)] = self.is_fixed(grid, i, j);
            }
        }
        m
    }

    /// Zeroes `v` on Dirichlet nodes.
    pub fn apply_zero(&self, grid: &Grid, v: &mut [f64]) {
        for i in 0..=grid.nx {
            for j in 0..=grid.ny {
                if self.is_fixed(grid, i, j) {
                    v[grid.idx(i, j)] = 0.0;
                }
            }
        }
    }
}

/// Sparse 1D operator on a line of `m` nodes: `rows[r]` lists `(column, coefficient)`.
#[derive(Debug, Clone)]
pub(crate) struct Stencil1D {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Stencil1D {
    /// First derivative: central inside, second-order one-sided at both ends.
    pub fn d1(m: usize, h: f64) -> Self {
        let c = 0.5 / h;
        let mut rows = Vec::with_capacity(m);
        rows.push(vec![(0, -3.0 * c), (1, 4.0 * c), (2, -c)]);
        for k in 1..m - 1 {
            rows.push(vec![(k - 1, -c), (k + 1, c)]);
        }
        rows.push(vec![(m - 3, c), (m - 2, -4.0 * c), (m - 1, 3.0 * c)]);
        Self { rows }
    }

    /// Second derivative: 3-point inside, 4-point second-order at both ends.
    pub fn d2(m: usize, h: f64) -> Self {
        let c = 1.0 / (h * h);
        let mut rows = Vec::with_capacity(m);
        rows.push(vec![(0, 2.0 * c), (1, -5.0 * c), (2, 4.0 * c), (3, -c)]);
        for k in 1..m - 1 {
            rows.push(vec![(k - 1, c), (k, -2.0 * c), (k + 1, c)]);
        }
        rows.push(vec![
            (m - 4, -c),
            (m - 3, 4.0 * c),
            (m - 2, -5.0 * c),
            (m - 1, 2.0 * c),
        ]);
        Self { rows }
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn transpose(&self) -> Self {
        let m = self.rows.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                rows[c].push((r, v));
            }
        }
        Self { rows }
    }

    /// Applies the operator along `axis` (0 = x₁, 1 = x₂) of a grid array.
    pub fn apply(&self, grid: &Grid, f: &[f64], axis: usize) -> Vec<f64> {
        let rl = grid.row_len();
        let mut out = vec![0.0; f.len()];
        if axis == 0 {
            out.par_chunks_mut(rl).enumerate().for_each(|(r, orow)| {
                for &(c, v) in &self.rows[r] {
                    let irow = &f[c * rl..(c + 1) * rl];
                    for (o, x) in orow.iter_mut().zip(irow) {
                        *o += v * x;
                    }
                }
            });
        } else {
            out.par_chunks_mut(rl)
                .zip(f.par_chunks(rl))
                .for_each(|(orow, irow)| {
                    for (o, row) in orow.iter_mut().zip(&self.rows) {
                        let mut acc = 0.0;
                        for &(c, v) in row {
                            acc += v * irow[c];
                        }
                        *o = acc;
                    }
                });
        }
        out
    }
}

/// Differential operators for one grid, with their adjoints.
#[derive(Debug, Clone)]
pub(crate) struct Ops {
    pub grid: Grid,
    dx: Stencil1D,
    dy: Stencil1D,
    dxx: Stencil1D,
    dyy: Stencil1D,
    dx_t: Stencil1D,
    dy_t: Stencil1D,
    dxx_t: Stencil1D,
    dyy_t: Stencil1D,
}

impl Ops {
    pub fn new(grid: Grid) -> Self {
        let dx = Stencil1D::d1(grid.nx + 1, grid.hx());
        let dy = Stencil1D::d1(grid.ny + 1, grid.hy());
        let dxx = Stencil1D::d2(grid.nx + 1, grid.hx());
        let dyy = Stencil1D::d2(grid.ny + 1, grid.hy());
        Self {
            grid,
            dx_t: dx.transpose(),
            dy_t: dy.transpose(),
            dxx_t: dxx.transpose(),
            dyy_t: dyy.transpose(),
            dx,
            dy,
            dxx,
            dyy,
        }
    }

    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        self.dx.apply(&self.grid, f, 0)
    }
    pub fn dy(&self, f: &[f64]) -> Vec<f64> {
        self.dy.apply(&self.grid, f, 1)
    }
    pub fn dxx(&self, f: &[f64]) -> Vec<f64> {
        self.dxx.apply(&self.grid, f, 0)
    }
    pub fn dyy(&self, f: &[f64]) -> Vec<f64> {
        self.dyy.apply(&self.grid, f, 1)
    }
    /// Mixed derivative as the first-derivative operator applied twice.
    pub fn dxy(&self, f: &[f64]) -> Vec<f64> {
        self.dy(&self.dx(f))
    }
    pub fn dx_t(&self, g: &[f64]) -> Vec<f64> {
        self.dx_t.apply(&self.grid, g, 0)
    }
    pub fn dy_t(&self, g: &[f64]) -> Vec<f64> {
        self.dy_t.apply(&self.grid, g, 1)
    }
    pub fn dxx_t(&self, g: &[f64]) -> Vec<f64> {
        self.dxx_t.apply(&self.grid, g, 0)
    }
    pub fn dyy_t(&self, g: &[f64]) -> Vec<f64> {
        self.dyy_t.apply(&self.grid, g, 1)
    }
    pub fn dxy_t(&self, g: &[f64]) -> Vec<f64> {
        self.dx_t(&self.dy_t(g))
    }

    /// Diagonal of `Dᵀ diag(wts) D` for the first-derivative operator along `axis`.
    pub fn gram_diag(&self, axis: usize, wts: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.n_nodes()];
        for i in 0..=g.nx {
            for j in 0..=g.ny {
                let mut acc = 0.0;
                if axis == 0 {
                    for &(r, c) in self.dx_t.row(i) {
                        acc += c * c * wts[g.idx(r, j)];
                    }
                } else {
                    for &(r, c) in self.dy_t.row(j) {
                        acc += c * c * wts[g.idx(i, r)];
                    }
                }
                out[g.idx(i, j)] = acc;
            }
        }
        out
    }
}

pub fn gradient(f: &ScalarField) -> VectorField2 {
    let ops = Ops::new(f.grid);
    VectorField2 {
        grid: f.grid,
        x: ops.dx(&f.values),
        y: ops.dy(&f.values),
    }
}

pub fn hessian(f: &ScalarField) -> SymTensorField {
    let ops = Ops::new(f.grid);
    SymTensorField {
        grid: f.grid,
        xx: ops.dxx(&f.values),
        xy: ops.dxy(&f.values),
        yy: ops.dyy(&f.values),
    }
}

/// `Du + Duᵀ + Dw⊗Dw − 2·eigenstrain·Id`, nodewise.
pub fn strain(u: &VectorField2, w: &ScalarField, eigenstrain: f64) -> Result<SymTensorField> {
    u.grid.check_same(&w.grid)?;
    let ops = Ops::new(w.grid);
    Ok(strain_with(&ops, &u.x, &u.y, &w.values, eigenstrain))
}

pub(crate) fn strain_with(ops: &Ops, u1: &[f64], u2: &[f64], w: &[f64], eig: f64) -> SymTensorField {
    let u1x = ops.dx(u1);
    let u1y = ops.dy(u1);
    let u2x = ops.dx(u2);
    let u2y = ops.dy(u2);
    let wx = ops.dx(w);
    let wy = ops.dy(w);
    let n = w.len();
    let mut xx = vec![0.0; n];
    let mut xy = vec![0.0; n];
    let mut yy = vec![0.0; n];
    for k in 0..n {
        xx[k] = 2.0 * u1x[k] + wx[k] * wx[k] - 2.0 * eig;
        yy[k] = 2.0 * u2y[k] + wy[k] * wy[k] - 2.0 * eig;
        xy[k] = u1y[k] + u2x[k] + wx[k] * wy[k];
    }
    SymTensorField {
        grid: ops.grid,
        xx,
        xy,
        yy,
    }
}

/// Trapezoid rule; rows are reduced independently and then combined in row order.
pub fn integrate(f: &ScalarField) -> f64 {
    integrate_values(&f.grid, &f.values)
}

pub fn integrate_values(grid: &Grid, v: &[f64]) -> f64 {
    let rl = grid.row_len();
    let partials: Vec<f64> = v
        .par_chunks(rl)
        .enumerate()
        .map(|(i, row)| {
            let mut acc = NeumaierSum::new();
            let a = if i == 0 || i == grid.nx { 0.5 } else { 1.0 };
            for (j, x) in row.iter().enumerate() {
                let b = if j == 0 || j == grid.ny { 0.5 } else { 1.0 };
                acc.add(a * b * x);
            }
            acc.value()
        })
        .collect();
    let mut acc = NeumaierSum::new();
    for p in partials {
        acc.add(p);
    }
    acc.value() * (grid.lx * grid.ly) / (grid.nx as f64 * grid.ny as f64)
}

/// Weighted sum `Σ weight·v` over nodes where `mask` holds.
pub fn integrate_masked(grid: &Grid, v: &[f64], mask: impl Fn(usize) -> bool + Sync) -> f64 {
    let masked: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(k, x)| if mask(k) { *x } else { 0.0 })
        .collect();
    integrate_values(grid, &masked)
}

pub fn distance_to_boundary(grid: &Grid) -> ScalarField {
    let (lx, ly) = (grid.lx, grid.ly);
    ScalarField::from_fn(*grid, |x, y| x.min(lx - x).min(y).min(ly - y))
}

/// Normalised weights of the bump `(1 − r²/σ²)³` on the node lattice.
pub(crate) fn mollifier_kernel(grid: &Grid, sigma: f64) -> (Vec<f64>, usize, usize) {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mx = (sigma / hx).ceil() as usize;
    let my = (sigma / hy).ceil() as usize;
    let (sx, sy) = (2 * mx + 1, 2 * my + 1);
    let mut k = vec![0.0; sx * sy];
    let mut acc = NeumaierSum::new();
    for a in 0..sx {
        let dx = (a as f64 - mx as f64) * hx;
        for b in 0..sy {
            let dy = (b as f64 - my as f64) * hy;
            let r2 = (dx * dx + dy * dy) / (sigma * sigma);
            let v = if r2 < 1.0 { (1.0 - r2).powi(3) } else { 0.0 };
            k[a * sy + b] = v;
            acc.add(v);
        }
    }
    let s = acc.value();
    for v in &mut k {
        *v /= s;
    }
    (k, mx, my)
}

/// Point reflection through the boundary value: `f(−s) = 2f(0) − f(s)` along each axis.
/// Affine data are extended affinely; data vanishing on an edge are extended oddly.
fn reflect_index(k: isize, n: usize) -> (usize, bool) {
    let n = n as isize;
    if k < 0 {
        ((-k) as usize, true)
    } else if k > n {
        ((2 * n - k) as usize, true)
    } else {
        (k as usize, false)
    }
}

/// Convolution with the normalised `(1 − r²/σ²)³` bump after point-reflecting `f`
/// across each edge, so fields vanishing on a straight edge stay zero there.
pub fn mollify(f: &ScalarField, sigma: f64) -> Result<ScalarField> {
    let grid = f.grid;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::input("sigma", "must be positive"));
    }
    if sigma < 2.0 * grid.hx().max(grid.hy()) {
        return Err(Error::Resolution(format!(
            "sigma = {sigma} is below twice the grid spacing {}",
            grid.hx().max(grid.hy())
        )));
    }
    let (k, mx, my) = mollifier_kernel(&grid, sigma);
    let sy = 2 * my + 1;
    if mx > grid.nx || my > grid.ny {
        return Err(Error::Resolution("sigma exceeds the domain".into()));
    }
    // Extended array with a halo of (mx, my) nodes.
    let ex = grid.nx + 1 + 2 * mx;
    let ey = grid.ny + 1 + 2 * my;
    let mut ext = vec![0.0; ex * ey];
    // reflection in x₂ at fixed x₁ index
    let ey_val = |i: usize, kj: isize| -> f64 {
        let (rj, out) = reflect_index(kj, grid.ny);
        if out {
            let ej = if kj < 0 { 0 } else { grid.ny };
            2.0 * f.at(i, ej) - f.at(i, rj)
        } else {
            f.at(i, rj)
        }
    };
    for a in 0..ex {
        let ki = a as isize - mx as isize;
        let (ri, out) = reflect_index(ki, grid.nx);
        let ei = if ki < 0 { 0 } else { grid.nx };
        for b in 0..ey {
            let kj = b as isize - my as isize;
            ext[a * ey + b] = if out {
                2.0 * ey_val(ei, kj) - ey_val(ri, kj)
            } else {
                ey_val(ri, kj)
            };
        }
    }
    let rl = grid.row_len();
    let mut out = vec![0.0; grid.n_nodes()];
    out.par_chunks_mut(rl).enumerate().for_each(|(i, row)| {
        for (j, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..2 * mx + 1 {
                let base = (i + a) * ey + j;
                let kr = &k[a * sy..(a + 1) * sy];
                let er = &ext[base..base + sy];
                for (kv, ev) in kr.iter().zip(er) {
                    acc += kv * ev;
                }
            }
            *o = acc;
        }
    });
    Ok(ScalarField {
        grid,
        values: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn grid_rejects_too_few_cells() {
        assert!(Grid::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 0.0, 1.0).is_err());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid::unit(16).unwrap();
        let d = gradient(&ScalarField::constant(g, 3.5));
        assert!(max_abs(&d.x) < 1e-12 && max_abs(&d.y) < 1e-12);
    }

    #[test]
    fn gradient_exact_on_linear() {
        let g = Grid::new(7, 11, 1.3, 0.7).unwrap();
        let d = gradient(&ScalarField::from_fn(g, |x, _| x));
        assert!(d.x.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(max_abs(&d.y) < 1e-12);
    }

    #[test]
    fn gradient_second_order() {
        let err = |n: usize| {
            let g = Grid::unit(n).unwrap();
            let f = ScalarField::from_fn(g, |x, _| (std::f64::consts::PI * x).sin());
            let d = gradient(&f);
            let exact = g.sample(|x, _| std::f64::consts::PI * (std::f64::consts::PI * x).cos());
            d.x.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let g = Grid::new(9, 6, 1.0, 2.0).unwrap();
        let h = hessian(&ScalarField::from_fn(g, |x, _| x * x));
        assert!(h.xx.iter().all(|v| (v - 2.0).abs() < 1e-9));
        assert!(max_abs(&h.xy) < 1e-9 && max_abs(&h.yy) < 1e-9);
        let h = hessian(&ScalarField::from_fn(g, |x, y| x * y));
        assert!(h.xy.iter().all(|v| (v - 1.0).abs() < 1e-9));
        let h = hessian(&ScalarField::from_fn(g, |x, y| 2.0 * x - y + 1.0));
        assert!(max_abs(&h.xx) < 1e-8 && max_abs(&h.xy) < 1e-8 && max_abs(&h.yy) < 1e-8);
    }

    #[test]
    fn strain_examples() {
        let g = Grid::unit(8).unwrap();
        let z = VectorField2::zeros(g);
        let e = strain(&z, &ScalarField::zeros(g), 0.5).unwrap();
        assert!(e.xx.iter().chain(&e.yy).all(|v| *v == -1.0));
        assert!(e.xy.iter().all(|v| *v == 0.0));
        let u = VectorField2::from_fn(g, |x, y| (x / 2.0, y / 2.0));
        let e = strain(&u, &ScalarField::zeros(g), 0.5).unwrap();
        assert!(max_abs(&e.xx) < 1e-12 && max_abs(&e.yy) < 1e-12);
        let e = strain(&z, &ScalarField::from_fn(g, |x, _| x), 0.5).unwrap();
        assert!(max_abs(&e.xx) < 1e-12);
        assert!(e.yy.iter().all(|v| *v == -1.0));
    }

    #[test]
    fn strain_rejects_grid_mismatch() {
        let a = Grid::unit(8).unwrap();
        let b = Grid::unit(9).unwrap();
        assert!(strain(&VectorField2::zeros(a), &ScalarField::zeros(b), 0.5).is_err());
    }

    #[test]
    fn integrate_constants_and_linear() {
        for n in [4, 7, 16, 33] {
            let g = Grid::unit(n).unwrap();
            assert_eq!(integrate(&ScalarField::constant(g, 1.0)), 1.0);
            let lin = integrate(&ScalarField::from_fn(g, |x, _| x));
            assert!((lin - 0.5).abs() < 1e-15);
        }
        let g = Grid::new(8, 4, 2.0, 0.5).unwrap();
        assert_eq!(integrate(&ScalarField::constant(g, 3.0)), 3.0);
    }

    #[test]
    fn integrate_sine_product() {
        let g = Grid::unit(128).unwrap();
        let pi = std::f64::consts::PI;
        let v = integrate(&ScalarField::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin()));
        assert!((v - 4.0 / (pi * pi)).abs() < 1e-4);
    }

    #[test]
    fn distance_examples() {
        let g = Grid::unit(10).unwrap();
        let d = distance_to_boundary(&g);
        assert_eq!(d.at(5, 5), 0.5);
        assert!((d.at(1, 3) - 0.1).abs() < 1e-15);
        for i in 0..=10 {
            assert_eq!(d.at(i, 0), 0.0);
            assert_eq!(d.at(0, i), 0.0);
        }
    }

    #[test]
    fn kernel_is_normalised() {
        let g = Grid::unit(64).unwrap();
        let (k, _, _) = mollifier_kernel(&g, 0.1);
        let s: f64 = crate::sum::sum(k.iter().copied());
        assert!((s - 1.0).abs() < 1e-15);
        assert!(k.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn mollify_reproduces_affine_fields() {
        let g = Grid::unit(64).unwrap();
        let c = mollify(&ScalarField::constant(g, 2.5), 0.1).unwrap();
        assert!(c.values.iter().all(|v| (v - 2.5).abs() < 1e-13));
        let l = mollify(&ScalarField::from_fn(g, |x, y| x - 0.3 * y), 0.1).unwrap();
        let exact = g.sample(|x, y| x - 0.3 * y);
        assert!(l.values.iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn mollify_keeps_zero_boundary_data() {
        let g = Grid::unit(64).unwrap();
        let m = mollify(&distance_to_boundary(&g), 0.1).unwrap();
        for i in 0..=64 {
            assert!(m.at(i, 0).abs() < 1e-15 && m.at(0, i).abs() < 1e-15);
            assert!(m.at(i, 64).abs() < 1e-15 && m.at(64, i).abs() < 1e-15);
        }
    }

    #[test]
    fn mollify_rejects_unresolved_sigma() {
        let g = Grid::unit(16).unwrap();
        assert!(matches!(
            mollify(&ScalarField::zeros(g), 0.05),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn boundary_masks() {
        let g = Grid::unit(4).unwrap();
        let m = BoundarySpec::left_only().mask(&g);
        assert_eq!(m.iter().filter(|b| **b).count(), 5);
        let m = BoundarySpec::all_dirichlet().mask(&g);
        assert_eq!(m.iter().filter(|b| **b).count(), 16);
    }

    #[test]
    fn adjoint_stencils() {
        let g = Grid::new(6, 9, 1.0, 1.4).unwrap();
        let ops = Ops::new(g);
        let f = g.sample(|x, y| (3.0 * x + y).sin() + x * y * y);
        let h = g.sample(|x, y| (x - 2.0 * y).cos());
        let pairs: [(Vec<f64>, Vec<f64>); 5] = [
            (ops.dx(&f), ops.dx_t(&h)),
            (ops.dy(&f), ops.dy_t(&h)),
            (ops.dxx(&f), ops.dxx_t(&h)),
            (ops.dyy(&f), ops.dyy_t(&h)),
            (ops.dxy(&f), ops.dxy_t(&h)),
        ];
        for (af, ath) in pairs {
            let l: f64 = af.iter().zip(&h).map(|(a, b)| a * b).sum();
            let r: f64 = f.iter().zip(&ath).map(|(a, b)| a * b).sum();
            assert!((l - r).abs() < 1e-9 * (1.0 + l.abs()), "{l} vs {r}");
        }
    }
}

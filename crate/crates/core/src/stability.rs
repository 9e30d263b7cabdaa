//! Linear stability of a compressed disc under radial deflections.
//!
//! The profile `φ` is sampled on `n_points` uniform nodes of `[0, R]`. Slopes
//! `φ′` live on interval midpoints; the bending density is sampled on nodes
//! with the trapezoid rule and the destabilizing density with the midpoint
//! rule, so the latter is positive definite on profiles with `φ(R) = 0`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Film thickness of the reference experiment, in meters.
pub const EXPERIMENT_THICKNESS: f64 = 20e-9;
/// Blister radius of the reference experiment, in meters.
pub const EXPERIMENT_RADIUS: f64 = 10e-6;
pub const EXPERIMENT_NU: f64 = 0.277;
/// Eigenstrain applied in the reference experiment.
pub const EXPERIMENT_STRAIN: f64 = 0.011;

const MIN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    pub young: f64,
    pub thickness: f64,
    pub radius: f64,
    pub nu: f64,
    pub n_points: usize,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self::experiment()
    }
}

impl StabilityParams {
    /// Thickness, radius and Poisson ratio of the reference experiment.
    pub fn experiment() -> Self {
        Self {
            young: 1.0,
            thickness: EXPERIMENT_THICKNESS,
            radius: EXPERIMENT_RADIUS,
            nu: EXPERIMENT_NU,
            n_points: 512,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::input(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("young", self.young)?;
        positive("thickness", self.thickness)?;
        positive("radius", self.radius)?;
        if !(-1.0..=0.5).contains(&self.nu) {
            return Err(Error::input("nu", format!("must lie in [-1, 1/2], got {}", self.nu)));
        }
        if 1.0 + 2.0 * self.nu <= 0.0 {
            return Err(Error::input("nu", "1 + 2nu must be positive for a finite threshold"));
        }
        if self.n_points < MIN_POINTS {
            return Err(Error::input("n_points", format!("need at least {MIN_POINTS}, got {}", self.n_points)));
        }
        Ok(())
    }

    fn spacing(&self) -> f64 {
        self.radius / (self.n_points - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub delta_crit: f64,
    /// `c` in `δ_crit = c·h²/R²`.
    pub prefactor: f64,
    pub radii: Vec<f64>,
    /// Unstable radial profile, scaled to `φ(0) = 1`.
    pub mode: Vec<f64>,
    pub ratio_to_experiment: Option<f64>,
}

/// One quadrature sample `weight · (a·φ)(b·φ)`; rows are sparse.
struct Sample {
    weight: f64,
    a: Vec<(usize, f64)>,
    b: Vec<(usize, f64)>,
}

fn dot(row: &[(usize, f64)], phi: &[f64]) -> f64 {
    row.iter().map(|&(k, c)| c * phi[k]).sum()
}

fn scale(row: &[(usize, f64)], s: f64) -> Vec<(usize, f64)> {
    row.iter().map(|&(k, c)| (k, c * s)).collect()
}

fn combine(p: &[(usize, f64)], sp: f64, q: &[(usize, f64)], sq: f64) -> Vec<(usize, f64)> {
    let mut out = scale(p, sp);
    out.extend(scale(q, sq));
    out
}

/// Bending samples `∫[ψ′² + (ψ/r)² + 2νψ′ψ/r] r dr` and destabilizing samples
/// `∫ψ² r dr`, with `ψ = φ′`.
fn samples(n: usize, dr: f64, nu: f64) -> (Vec<Sample>, Vec<Sample>) {
    let m = n - 1;
    let slope = |i: usize| vec![(i + 1, 1.0 / dr), (i, -1.0 / dr)];
    let mut destab = Vec::with_capacity(m);
    for i in 0..m {
        let r = (i as f64 + 0.5) * dr;
        destab.push(Sample { weight: dr * r, a: slope(i), b: slope(i) });
    }
    let mut bend = Vec::with_capacity(3 * n);
    for i in 0..=m {
        let r = i as f64 * dr;
        let w = if i == 0 || i == m { 0.5 * dr } else { dr };
        let (psi, dpsi) = if i == 0 {
            // ψ is odd about the origin, so ψ′(0) = 2ψ(Δ/2)/Δ and ψ/r → ψ′(0).
            (Vec::new(), scale(&slope(0), 2.0 / dr))
        } else if i == m {
            (combine(&slope(m - 1), 1.5, &slope(m - 2), -0.5), combine(&slope(m - 1), 1.0 / dr, &slope(m - 2), -1.0 / dr))
        } else {
            (combine(&slope(i - 1), 0.5, &slope(i), 0.5), combine(&slope(i), 1.0 / dr, &slope(i - 1), -1.0 / dr))
        };
        if i == 0 {
            // r·(integrand) vanishes at the origin; kept for a uniform layout.
            let limit = dpsi.clone();
            bend.push(Sample { weight: 0.0, a: dpsi.clone(), b: dpsi });
            bend.push(Sample { weight: 0.0, a: limit.clone(), b: limit });
            continue;
        }
        bend.push(Sample { weight: w * r, a: dpsi.clone(), b: dpsi.clone() });
        bend.push(Sample { weight: w / r, a: psi.clone(), b: psi.clone() });
        bend.push(Sample { weight: 2.0 * nu * w, a: dpsi, b: psi });
    }
    (bend, destab)
}

fn evaluate(samples: &[Sample], phi: &[f64]) -> f64 {
    crate::sum::sum(samples.iter().map(|s| s.weight * dot(&s.a, phi) * dot(&s.b, phi)))
}

/// Dense symmetric matrix over the first `dim` nodes.
fn assemble(samples: &[Sample], dim: usize) -> DMatrix<f64> {
    let mut mat = DMatrix::zeros(dim, dim);
    for s in samples {
        for &(i, ci) in &s.a {
            for &(j, cj) in &s.b {
                if i < dim && j < dim {
                    let v = 0.5 * s.weight * ci * cj;
                    mat[(i, j)] += v;
                    mat[(j, i)] += v;
                }
            }
        }
    }
    mat
}

fn check_profile(phi: &[f64], params: &StabilityParams) -> Result<()> {
    if phi.len() != params.n_points {
        return Err(Error::input("phi", format!("expected {} samples, got {}", params.n_points, phi.len())));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("phi", "samples must be finite"));
    }
    let amp = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if amp == 0.0 {
        return Ok(());
    }
    if phi[phi.len() - 1].abs() > 1e-12 * amp {
        return Err(Error::input("phi", "profile must vanish at r = R"));
    }
    let dr = params.spacing();
    let r = params.radius;
    let slope0 = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * dr);
    if slope0.abs() * r > 10.0 * (dr / r) * amp {
        return Err(Error::input("phi", "profile must have zero slope at the origin"));
    }
    Ok(())
}

/// Radial reduction of the linearized energy for the profile `φ` sampled on
/// `n_points` uniform nodes from `0` to `R`.
pub fn radial_quadratic_form(phi: &[f64], delta: f64, params: &StabilityParams) -> Result<f64> {
    params.validate()?;
    check_profile(phi, params)?;
    let (bend, destab) = samples(params.n_points, params.spacing(), params.nu);
    let h = params.thickness;
    let b = evaluate(&bend, phi);
    let d = evaluate(&destab, phi);
    Ok(0.5 * params.young * h * (-4.0 * delta * (1.0 + 2.0 * params.nu) * d + h * h / 12.0 * b))
}

/// Smallest eigenstrain at which the discrete radial form stops being
/// positive definite.
pub fn critical_strain(params: &StabilityParams) -> Result<StabilityResult> {
    params.validate()?;
    // The threshold depends on h/R only, so solve on the unit disc.
    let n = params.n_points;
    let dr = 1.0 / (n - 1) as f64;
    let (bend, destab) = samples(n, dr, params.nu);
    let dim = n - 1;
    let a = assemble(&bend, dim);
    let b = assemble(&destab, dim);
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::Solver("destabilizing form is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Solver("Cholesky factor is singular".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| Error::Solver("symmetric eigensolver did not converge".into()))?;
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::Solver("empty spectrum".into()))?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Solver(format!("bending form lost definiteness: eigenvalue {lambda}")));
    }
    let y = eig.eigenvectors.column(k).into_owned();
    let x = l_inv.transpose() * y;
    let mut mode: Vec<f64> = x.iter().copied().collect();
    mode.push(0.0);
    let m0 = mode[0];
    if m0 != 0.0 {
        mode.iter_mut().for_each(|v| *v /= m0);
    }
    let prefactor = lambda / (48.0 * (1.0 + 2.0 * params.nu));
    let ratio = params.thickness / params.radius;
    let radii = (0..n).map(|i| i as f64 * params.spacing()).collect();
    Ok(StabilityResult {
        delta_crit: prefactor * ratio * ratio,
        prefactor,
        radii,
        mode,
        ratio_to_experiment: None,
    })
}

/// Order-of-magnitude threshold `h²/R²`.
pub fn buckling_estimate(h: f64, r: f64) -> Result<f64> {
    if !(h > 0.0 && r > 0.0) {
        return Err(Error::input("h, R", "must be positive"));
    }
    Ok(h * h / (r * r))
}

/// `δ_exp / δ_crit` for the sharp discrete threshold.
pub fn compare_to_experiment(params: &StabilityParams, delta_exp: f64) -> Result<f64> {
    if !(delta_exp > 0.0 && delta_exp.is_finite()) {
        return Err(Error::input("delta_exp", format!("must be positive, got {delta_exp}")));
    }
    Ok(delta_exp / critical_strain(params)?.delta_crit)
}

/// Crossing strain of a single admissible profile, where its form vanishes.
pub fn profile_threshold(phi: &[f64], params: &StabilityParams) -> Result<f64> {
    let q0 = radial_quadratic_form(phi, 0.0, params)?;
    let q1 = radial_quadratic_form(phi, 1.0, params)?;
    if q1 >= q0 {
        return Err(Error::input("phi", "profile has no destabilizing part"));
    }
    Ok(q0 / (q0 - q1))
}

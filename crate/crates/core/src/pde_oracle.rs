//! Stochastic-Galerkin finite-difference solver for the space-homogeneous
//! 1D alignment equation
//!
//! ```text
//! ∂_t f(θ, v, t) = ∂_v [ K(θ) (v − u) f(θ, v, t) ]
//! ```
//!
//! Expanding `f` in the gPC basis gives the coupled system
//! `∂_t f̂_h = ∂_v [ (v − u) Σ_k A_hk f̂_k ]`, `A_hk = E[K Φ_h Φ_k] / ‖Φ_h‖²`,
//! which is discretized with central differences in conservative form and
//! RK4 in time. Used as the mean-field reference for the particle solver.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gpc_basis::{GpcBasis, GpcSpace};
use crate::models::UncertainScalar;

/// Uniform grid of `n_points` velocities including both end points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    v_min: f64,
    v_max: f64,
    n_points: usize,
}

impl VelocityGrid {
    pub fn new(v_min: f64, v_max: f64, n_points: usize) -> Result<Self> {
        if !(v_min < v_max) || !v_min.is_finite() || !v_max.is_finite() {
            return Err(Error::config(format!("velocity grid needs v_min < v_max, got [{v_min}, {v_max}]")));
        }
        if n_points < 3 {
            return Err(Error::config(format!("velocity grid needs at least 3 points, got {n_points}")));
        }
        Ok(VelocityGrid { v_min, v_max, n_points })
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.v_min + j as f64 * self.dv()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.point(j)).collect()
    }

    /// The largest stable step, `dv²`.
    pub fn max_dt(&self) -> f64 {
        let dv = self.dv();
        dv * dv
    }
}

/// Samples `f` on the grid and rescales it to unit discrete mass `Σ f_j dv = 1`.
pub fn discretize_density(grid: &VelocityGrid, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = grid.points().into_iter().map(f).collect();
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::config("initial density must be finite and nonnegative"));
    }
    let mass: f64 = values.iter().sum::<f64>() * grid.dv();
    if !(mass > 0.0) {
        return Err(Error::config("initial density has zero mass on the grid"));
    }
    values.iter_mut().for_each(|v| *v /= mass);
    Ok(values)
}

/// Equal mixture of `N(μ, σ²)` and `N(−μ, σ²)`.
pub fn bimodal_density(mu: f64, sigma2: f64, v: f64) -> f64 {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma2).sqrt();
    let g = |m: f64| norm * (-(v - m) * (v - m) / (2.0 * sigma2)).exp();
    0.5 * (g(mu) + g(-mu))
}

/// gPC coefficients `f̂_h(v_j, t)` on a velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SgDensity {
    grid: VelocityGrid,
    modes: usize,
    /// Mode-major: `coeffs[h * n_points + j]`.
    coeffs: Vec<f64>,
    time: f64,
    drift: f64,
}

impl SgDensity {
    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// The velocity `u` the density relaxes towards.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn mode(&self, h: usize) -> &[f64] {
        let n = self.grid.n_points;
        &self.coeffs[h * n..(h + 1) * n]
    }

    /// `Σ_j f̂_0(v_j) dv`.
    pub fn mass(&self) -> f64 {
        self.mode(0).iter().sum::<f64>() * self.grid.dv()
    }

    /// Density values `f^M(θ_q, v_j)` at quadrature node `q`.
    pub fn at_node(&self, basis: &GpcBasis, q: usize) -> Vec<f64> {
        let phi = basis.node_values(q);
        let n = self.grid.n_points;
        let mut out = vec![0.0; n];
        for (h, p) in phi.iter().enumerate().take(self.modes) {
            for (o, f) in out.iter_mut().zip(&self.coeffs[h * n..(h + 1) * n]) {
                *o += p * f;
            }
        }
        out
    }

    /// Variance in `v` of the expected density `f̂_0`.
    pub fn expected_density_variance(&self) -> f64 {
        let f = self.mode(0);
        let dv = self.grid.dv();
        let mass: f64 = f.iter().sum::<f64>() * dv;
        let mean = (0..f.len()).map(|j| self.grid.point(j) * f[j]).sum::<f64>() * dv / mass;
        (0..f.len()).map(|j| (self.grid.point(j) - mean).powi(2) * f[j]).sum::<f64>() * dv / mass
    }

    /// CSV with one row per grid point: `v,f_0,...,f_M`, plus a `.meta` sidecar.
    pub fn write_csv(&self, dir: &Path, stem: &str, basis: &GpcBasis) -> Result<()> {
        let mut out = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
        let header: Vec<String> = (0..self.modes).map(|h| format!("f_{h}")).collect();
        writeln!(out, "v,{}", header.join(","))?;
        for j in 0..self.grid.n_points {
            write!(out, "{:?}", self.grid.point(j))?;
            for h in 0..self.modes {
                write!(out, ",{:?}", self.mode(h)[j])?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        let mut side = BufWriter::new(File::create(dir.join(format!("{stem}.meta")))?);
        writeln!(side, "v_min={:?}", self.grid.v_min)?;
        writeln!(side, "v_max={:?}", self.grid.v_max)?;
        writeln!(side, "n_points={}", self.grid.n_points)?;
        writeln!(side, "family={}", basis.family())?;
        writeln!(side, "M={}", basis.order())?;
        writeln!(side, "time={:?}", self.time)?;
        writeln!(side, "u={:?}", self.drift)?;
        side.flush()?;
        Ok(())
    }
}

/// Solver knobs beyond the grid and the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgOptions {
    /// Recompute `u` from the current expected density at every stage
    /// instead of keeping the initial mean.
    pub recompute_drift: bool,
    /// Observer stride in steps.
    pub observe_every: usize,
}

impl Default for SgOptions {
    fn default() -> Self {
        SgOptions { recompute_drift: false, observe_every: 1 }
    }
}

const MASS_DRIFT_TOL: f64 = 1e-6;

/// Solves to `t_end` with the initial density `f0` (deterministic in θ).
pub fn sg_homogeneous_solve(
    f0: &[f64],
    k: &UncertainScalar,
    basis: &GpcBasis,
    grid: &VelocityGrid,
    dt: f64,
    t_end: f64,
) -> Result<SgDensity> {
    sg_homogeneous_solve_with(f0, k, basis, grid, dt, t_end, SgOptions::default(), |_| Ok(()))
}

/// As [`sg_homogeneous_solve`], calling `observe` at the initial state, every
/// `opts.observe_every` steps, and at the final state.
#[allow(clippy::too_many_arguments)]
pub fn sg_homogeneous_solve_with(
    f0: &[f64],
    k: &UncertainScalar,
    basis: &GpcBasis,
    grid: &VelocityGrid,
    dt: f64,
    t_end: f64,
    opts: SgOptions,
    mut observe: impl FnMut(&SgDensity) -> Result<()>,
) -> Result<SgDensity> {
    let n = grid.n_points;
    let dv = grid.dv();
    if f0.len() != n {
        return Err(Error::Dimension { expected: n, got: f0.len() });
    }
    if f0.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::config("initial density must be nonnegative"));
    }
    let mass0: f64 = f0.iter().sum::<f64>() * dv;
    if (mass0 - 1.0).abs() > 1e-6 {
        return Err(Error::config(format!("initial density must have unit mass, got {mass0}")));
    }
    if !(dt > 0.0) || dt > grid.max_dt() * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "time step {dt} violates the stability bound dt <= dv^2 = {}",
            grid.max_dt()
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::config(format!("final time must be >= 0, got {t_end}")));
    }
    if opts.observe_every == 0 {
        return Err(Error::config("observer stride must be >= 1"));
    }
    if basis.n_modes() == 0 || k.min_over(basis.nodes()) <= 0.0 {
        return Err(Error::config("alignment strength must be positive at every quadrature node"));
    }

    let modes = basis.n_modes();
    let a = galerkin_matrix(k, basis);
    let points = grid.points();
    let first_moment = |f: &[f64]| -> f64 { points.iter().zip(f).map(|(v, f)| v * f).sum::<f64>() * dv };
    let u0 = first_moment(f0) / mass0;

    let mut sol = SgDensity { grid: *grid, modes, coeffs: vec![0.0; modes * n], time: 0.0, drift: u0 };
    sol.coeffs[..n].copy_from_slice(f0);
    observe(&sol)?;

    let steps = if t_end == 0.0 { 0 } else { (t_end / dt - 1e-9).ceil().max(1.0) as usize };
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };

    let rhs = |f: &[f64], u: f64, out: &mut [f64], flux: &mut [f64]| {
        // cell fluxes G_{h,j} = (v_j − u) Σ_k A_hk f_{k,j}
        for hh in 0..modes {
            let g = &mut flux[hh * n..(hh + 1) * n];
            g.iter_mut().for_each(|x| *x = 0.0);
            for kk in 0..modes {
                let coef = a[hh * modes + kk];
                if coef == 0.0 {
                    continue;
                }
                for (gj, fj) in g.iter_mut().zip(&f[kk * n..(kk + 1) * n]) {
                    *gj += coef * fj;
                }
            }
            for (gj, v) in g.iter_mut().zip(&points) {
                *gj *= v - u;
            }
        }
        // interface fluxes (G_j + G_{j+1}) / 2, zero at both ends
        for hh in 0..modes {
            let g = &flux[hh * n..(hh + 1) * n];
            let o = &mut out[hh * n..(hh + 1) * n];
            let mut left = 0.0;
            for j in 0..n {
                let right = if j + 1 < n { 0.5 * (g[j] + g[j + 1]) } else { 0.0 };
                o[j] = (right - left) / dv;
                left = right;
            }
        }
    };

    let len = modes * n;
    let mut stage = vec![0.0; len];
    let mut kbuf = vec![0.0; len];
    let mut acc = vec![0.0; len];
    let mut flux = vec![0.0; len];
    const NEXT: [f64; 3] = [0.5, 0.5, 1.0];
    const WEIGHT: [f64; 4] = [1.0, 2.0, 2.0, 1.0];
    for step in 1..=steps {
        stage.copy_from_slice(&sol.coeffs);
        acc.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..4 {
            let u = if opts.recompute_drift { first_moment(&stage[..n]) / mass0 } else { u0 };
            rhs(&stage, u, &mut kbuf, &mut flux);
            for (a, k) in acc.iter_mut().zip(&kbuf) {
                *a += WEIGHT[s] * k;
            }
            if s < 3 {
                let c = NEXT[s] * h;
                for ((st, f), k) in stage.iter_mut().zip(&sol.coeffs).zip(&kbuf) {
                    *st = f + c * k;
                }
            }
        }
        for (f, a) in sol.coeffs.iter_mut().zip(&acc) {
            *f += h / 6.0 * a;
        }
        sol.time = if step == steps { t_end } else { step as f64 * h };
        if opts.recompute_drift {
            sol.drift = first_moment(sol.mode(0)) / mass0;
        }

        let mass = sol.mass();
        if !mass.is_finite() || (mass - mass0).abs() > MASS_DRIFT_TOL {
            return Err(Error::SchemeFailure(format!("mass drifted from {mass0} to {mass} at t={}", sol.time)));
        }
        if step % opts.observe_every == 0 || step == steps {
            observe(&sol)?;
        }
    }
    Ok(sol)
}

/// `A_hk = Σ_q w_q K(θ_q) Φ_h(θ_q) Φ_k(θ_q) / ‖Φ_h‖²`, row-major.
fn galerkin_matrix(k: &UncertainScalar, basis: &GpcBasis) -> Vec<f64> {
    let m = basis.n_modes();
    let mut a = vec![0.0; m * m];
    for q in 0..basis.n_nodes() {
        let phi = basis.node_values(q);
        let wk = basis.weights()[q] * k.eval(basis.nodes()[q]);
        for h in 0..m {
            for kk in 0..m {
                a[h * m + kk] += wk * phi[h] * phi[kk];
            }
        }
    }
    for h in 0..m {
        let norm = basis.sq_norms()[h];
        a[h * m..(h + 1) * m].iter_mut().for_each(|x| *x /= norm);
    }
    a
}

/// `Σ_q w_q Σ_j (v_j − u_q)² f^M(θ_q, v_j) dv`, with `u_q` the mean at node `q`.
pub fn oracle_expected_temperature(sol: &SgDensity, basis: &GpcBasis) -> f64 {
    let dv = sol.grid.dv();
    let points = sol.grid.points();
    (0..basis.n_nodes())
        .map(|q| {
            let f = sol.at_node(basis, q);
            let mass: f64 = f.iter().sum::<f64>() * dv;
            let u = points.iter().zip(&f).map(|(v, f)| v * f).sum::<f64>() * dv / mass;
            let t = points.iter().zip(&f).map(|(v, f)| (v - u) * (v - u) * f).sum::<f64>() * dv;
            basis.weights()[q] * t
        })
        .sum()
}

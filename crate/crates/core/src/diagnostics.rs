//! Expected-density reconstruction, macroscopic statistics and error metrics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ensemble::GpcEnsemble;
use crate::error::{Error, Result};
use crate::gpc_basis::{dot, GpcSpace};

/// One histogram axis: `bins` equal cells covering `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, bins: usize) -> Result<Self> {
        if !(min < max) || !min.is_finite() || !max.is_finite() || bins == 0 {
            return Err(Error::config(format!("invalid axis [{min}, {max}] with {bins} bins")));
        }
        Ok(Axis { min, max, bins })
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.min + (b as f64 + 0.5) * self.width()
    }

    /// Bin of `x`, clamped to the edge bins; the flag is set when clamping happened.
    fn locate(&self, x: f64) -> (usize, bool) {
        let raw = ((x - self.min) / self.width()).floor();
        if raw < 0.0 || raw.is_nan() {
            (0, true)
        } else if raw >= self.bins as f64 {
            // the right end point itself belongs to the last bin
            (self.bins - 1, x > self.max)
        } else {
            (raw as usize, false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Position,
    Velocity,
    /// Positions followed by velocities.
    PhaseSpace,
}

impl DensityKind {
    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Position => "position",
            DensityKind::Velocity => "velocity",
            DensityKind::PhaseSpace => "phase-space",
        }
    }
}

/// Normalized histogram; the last axis varies fastest in `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub kind: DensityKind,
    pub total_mass: f64,
    /// Samples that fell outside the axes and were clamped into edge bins.
    pub spill: usize,
}

impl DensityGrid {
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::width).product()
    }

    /// Mass in each cell, `values * cell_volume`.
    pub fn cell_masses(&self) -> Vec<f64> {
        let vol = self.cell_volume();
        self.values.iter().map(|v| v * vol).collect()
    }

    /// CSV matrix preceded by a `#`-prefixed header block describing the axes.
    ///
    /// One-dimensional grids are written as a single row; two-dimensional
    /// grids one row per bin of the first axis. Higher dimensions are written
    /// flattened, one value per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# kind={}", self.kind.name())?;
        for (k, a) in self.axes.iter().enumerate() {
            writeln!(out, "# axis{k}={:?},{:?},{}", a.min, a.max, a.bins)?;
        }
        writeln!(out, "# spill={}", self.spill)?;
        let line = |row: &[f64]| row.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
        match self.axes.len() {
            1 => writeln!(out, "{}", line(&self.values))?,
            2 => {
                for row in self.values.chunks(self.axes[1].bins) {
                    writeln!(out, "{}", line(row))?;
                }
            }
            _ => {
                for v in &self.values {
                    writeln!(out, "{v:?}")?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Plain (ASCII) PGM with `maxval` 255.
    ///
    /// Two-dimensional grids only. The first axis runs along the image
    /// columns and the second axis upwards, so row 0 of the image is the top
    /// bin of the second axis. Gray levels are `round(255 * value / max)`.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        if self.axes.len() != 2 {
            return Err(Error::Dimension { expected: 2, got: self.axes.len() });
        }
        let (nx, ny) = (self.axes[0].bins, self.axes[1].bins);
        let peak = self.values.iter().cloned().fold(0.0, f64::max);
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "P2")?;
        writeln!(out, "{nx} {ny}")?;
        writeln!(out, "255")?;
        for row in (0..ny).rev() {
            let levels: Vec<String> = (0..nx)
                .map(|col| {
                    let v = self.values[col * ny + row];
                    let g = if peak > 0.0 { (255.0 * v / peak).round() } else { 0.0 };
                    format!("{}", g as u8)
                })
                .collect();
            writeln!(out, "{}", levels.join(" "))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn coordinates(ens: &GpcEnsemble, i: usize, kind: DensityKind) -> Vec<f64> {
    let d = ens.dim();
    let pos = (0..d).map(|c| ens.mean_position(i, c));
    let vel = (0..d).map(|c| ens.mean_velocity(i, c));
    match kind {
        DensityKind::Position => pos.collect(),
        DensityKind::Velocity => vel.collect(),
        DensityKind::PhaseSpace => pos.chain(vel).collect(),
    }
}

/// Histogram of the expected (mode-0) positions and/or velocities.
pub fn reconstruct_expected_density(ens: &GpcEnsemble, axes: &[Axis], kind: DensityKind) -> Result<DensityGrid> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let want = match kind {
        DensityKind::PhaseSpace => 2 * ens.dim(),
        _ => ens.dim(),
    };
    if axes.len() != want {
        return Err(Error::Dimension { expected: want, got: axes.len() });
    }
    let cells: usize = axes.iter().map(|a| a.bins).product();
    let mut counts = vec![0usize; cells];
    let mut spill = 0;
    for i in 0..ens.len() {
        let mut flat = 0;
        let mut clamped = false;
        for (a, x) in axes.iter().zip(coordinates(ens, i, kind)) {
            let (b, c) = a.locate(x);
            flat = flat * a.bins + b;
            clamped |= c;
        }
        counts[flat] += 1;
        spill += usize::from(clamped);
    }
    let vol: f64 = axes.iter().map(Axis::width).product();
    let scale = 1.0 / (ens.len() as f64 * vol);
    let values: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
    let total_mass = counts.iter().sum::<usize>() as f64 / ens.len() as f64;
    Ok(DensityGrid { axes: axes.to_vec(), values, kind, total_mass, spill })
}

/// Per-cell mean of the expected velocities over a 2D position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub axes: [Axis; 2],
    /// `(vx, vy)` per cell, zero in empty cells; the second axis varies fastest.
    pub mean: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
}

impl VelocityField {
    /// CSV rows `x,y,vx,vy,count` at cell centers.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "x,y,vx,vy,count")?;
        let [ax, ay] = self.axes;
        for bx in 0..ax.bins {
            for by in 0..ay.bins {
                let k = bx * ay.bins + by;
                let [vx, vy] = self.mean[k];
                writeln!(out, "{:?},{:?},{vx:?},{vy:?},{}", ax.center(bx), ay.center(by), self.counts[k])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn velocity_field(ens: &GpcEnsemble, axes: [Axis; 2]) -> Result<VelocityField> {
    if ens.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: ens.dim() });
    }
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let cells = axes[0].bins * axes[1].bins;
    let mut sum = vec![[0.0; 2]; cells];
    let mut counts = vec![0usize; cells];
    for i in 0..ens.len() {
        let (bx, _) = axes[0].locate(ens.mean_position(i, 0));
        let (by, _) = axes[1].locate(ens.mean_position(i, 1));
        let k = bx * axes[1].bins + by;
        sum[k][0] += ens.mean_velocity(i, 0);
        sum[k][1] += ens.mean_velocity(i, 1);
        counts[k] += 1;
    }
    let mean = sum
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { [0.0; 2] } else { [s[0] / c as f64, s[1] / c as f64] })
        .collect();
    Ok(VelocityField { axes, mean, counts })
}

/// Node-space values of all particles: `out[(q * n + i) * dim + c]`.
fn at_nodes(coeffs: &[f64], n: usize, dim: usize, space: &dyn GpcSpace) -> Vec<f64> {
    let m = space.n_modes();
    let nodes = space.n_nodes();
    let mut out = vec![0.0; nodes * n * dim];
    for q in 0..nodes {
        let phi = space.node_values(q);
        for i in 0..n {
            for c in 0..dim {
                let row = (i * dim + c) * m;
                out[(q * n + i) * dim + c] = dot(&coeffs[row..row + m], phi);
            }
        }
    }
    out
}

fn check_space(ens: &GpcEnsemble, space: &dyn GpcSpace) -> Result<()> {
    if ens.modes() != space.n_modes() {
        return Err(Error::Dimension { expected: space.n_modes(), got: ens.modes() });
    }
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(())
}

/// `(1/N) Σ_i |u_i − ū|²` for `n` points of dimension `dim`.
fn mean_sq_deviation(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    let mut mean = vec![0.0; dim];
    for p in points.chunks(dim) {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    points.chunks(dim).map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>()).sum::<f64>() / n as f64
}

/// `Σ_q w_q (1/N) Σ_i |v_i(θ_q) − u(θ_q)|²` with `u(θ_q)` the ensemble mean
/// velocity at node `q`; components are summed in 2D.
pub fn expected_temperature(ens: &GpcEnsemble, space: &dyn GpcSpace) -> Result<f64> {
    check_space(ens, space)?;
    let (n, d) = (ens.len(), ens.dim());
    let values = at_nodes(ens.v_hat_raw(), n, d, space);
    Ok(values.chunks(n * d).zip(space.weights()).map(|(node, w)| w * mean_sq_deviation(node, d)).sum())
}

/// Mean and variance over the random input of an observable sampled at the
/// quadrature nodes.
pub fn observable_uq(per_node_values: &[f64], space: &dyn GpcSpace) -> Result<(f64, f64)> {
    let coeffs = space.project_nodes(per_node_values)?;
    Ok(space.mean_and_variance(&coeffs))
}

/// Above this size the pairwise sums use the `N Σ|u_i − ū|²` identity.
pub const PAIRWISE_DIRECT_LIMIT: usize = 1000;

/// `½ Σ_{i≠j} |u_i − u_j|²`.
pub fn pairwise_spread(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    if n > PAIRWISE_DIRECT_LIMIT {
        n as f64 * n as f64 * mean_sq_deviation(points, dim)
    } else {
        pairwise_spread_direct(points, dim)
    }
}

/// Brute-force `½ Σ_{i≠j} |u_i − u_j|²`.
pub fn pairwise_spread_direct(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += (0..dim).map(|c| (points[i * dim + c] - points[j * dim + c]).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Position spread Γ and velocity spread Λ at every quadrature node.
pub fn flocking_spreads(ens: &GpcEnsemble, space: &dyn GpcSpace) -> Result<(Vec<f64>, Vec<f64>)> {
    check_space(ens, space)?;
    if ens.len() < 2 {
        return Err(Error::config("flocking spreads need at least two particles"));
    }
    let (n, d) = (ens.len(), ens.dim());
    let xs = at_nodes(ens.x_hat_raw(), n, d, space);
    let vs = at_nodes(ens.v_hat_raw(), n, d, space);
    let gamma = xs.chunks(n * d).map(|p| pairwise_spread(p, d)).collect();
    let lambda = vs.chunks(n * d).map(|p| pairwise_spread(p, d)).collect();
    Ok((gamma, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Absolute,
    Relative,
}

pub fn convergence_error(quantity: f64, reference: f64, mode: ErrorMode) -> Result<f64> {
    let abs = (quantity - reference).abs();
    match mode {
        ErrorMode::Absolute => Ok(abs),
        ErrorMode::Relative if reference == 0.0 => Err(Error::config("relative error against a zero reference")),
        ErrorMode::Relative => Ok(abs / reference.abs()),
    }
}

/// Macroscopic summary of an ensemble at one time.
///
/// Temperature, Λ and Γ are expectations over the random input. Speeds and
/// the rotation split are taken at the center of the input support. In 1D
/// `ccw_frac` is NaN and the second velocity component is reported as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StatRecord {
    pub time: f64,
    pub temperature: f64,
    pub mean_velocity: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub ccw_frac: f64,
}

impl StatRecord {
    pub const CSV_HEADER: &'static str = "t,temperature,mean_vx,mean_vy,Lambda,Gamma,speed_mean,speed_std,ccw_frac";

    pub fn cw_frac(&self) -> f64 {
        1.0 - self.ccw_frac
    }

    pub fn csv_row(&self) -> String {
        let vx = self.mean_velocity.first().copied().unwrap_or(0.0);
        let vy = self.mean_velocity.get(1).copied().unwrap_or(0.0);
        format!(
            "{:?},{:?},{vx:?},{vy:?},{:?},{:?},{:?},{:?},{:?}",
            self.time, self.temperature, self.lambda, self.gamma, self.speed_mean, self.speed_std, self.ccw_frac
        )
    }
}

pub fn compute_stats(ens: &GpcEnsemble, space: &dyn GpcSpace) -> Result<StatRecord> {
    check_space(ens, space)?;
    let (n, d) = (ens.len(), ens.dim());
    let temperature = expected_temperature(ens, space)?;
    let mean_velocity = (0..d).map(|c| (0..n).map(|i| ens.mean_velocity(i, c)).sum::<f64>() / n as f64).collect();
    let (lambda, gamma) = if n >= 2 {
        let (g, l) = flocking_spreads(ens, space)?;
        (dot(&l, space.weights()), dot(&g, space.weights()))
    } else {
        (0.0, 0.0)
    };
    let center = space.center_values();
    let mut speeds = Vec::with_capacity(n);
    let mut ccw = 0usize;
    for i in 0..n {
        let (x, v) = ens.evaluate_with(i, &center)?;
        speeds.push(v.iter().map(|c| c * c).sum::<f64>().sqrt());
        if d == 2 && x[0] * v[1] - x[1] * v[0] > 0.0 {
            ccw += 1;
        }
    }
    let speed_mean = speeds.iter().sum::<f64>() / n as f64;
    let speed_std = (speeds.iter().map(|s| (s - speed_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let ccw_frac = if d == 2 { ccw as f64 / n as f64 } else { f64::NAN };
    Ok(StatRecord { time: ens.time(), temperature, mean_velocity, lambda, gamma, speed_mean, speed_std, ccw_frac })
}

pub fn write_stats_csv(path: &Path, records: &[StatRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", StatRecord::CSV_HEADER)?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_initial, InitialCondition};
    use crate::gpc_basis::{GpcBasis, PolynomialFamily};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn legendre(order: usize) -> GpcBasis {
        GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, order).unwrap()
    }

    #[test]
    fn single_point_histogram() {
        let ens = GpcEnsemble::from_deterministic(1, 1, &[0.35; 5], &[0.0; 5]).unwrap();
        let axis = Axis::new(0.0, 1.0, 10).unwrap();
        let g = reconstruct_expected_density(&ens, &[axis], DensityKind::Position).unwrap();
        let masses = g.cell_masses();
        assert_abs_diff_eq!(masses[3], 1.0, epsilon = 1e-15);
        assert_eq!(masses.iter().filter(|&&m| m > 0.0).count(), 1);
        assert_eq!(g.spill, 0);
    }

    #[test]
    fn uniform_histogram_within_binomial_bounds() {
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|k| ((k as f64 + 0.5) * 0.618_033_988_749_895).fract() * 2.0 - 1.0).collect();
        let ens = GpcEnsemble::from_deterministic(1, 1, &xs, &vec![0.0; n]).unwrap();
        let bins = 25;
        let g =
            reconstruct_expected_density(&ens, &[Axis::new(-1.0, 1.0, bins).unwrap()], DensityKind::Position).unwrap();
        let p = 1.0 / bins as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        for m in g.cell_masses() {
            assert!((m - p).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn out_of_range_samples_spill_into_edges() {
        let ens = GpcEnsemble::from_deterministic(2, 1, &[5.0, 0.0, -5.0, 0.1, 0.0, 0.0], &[0.0; 6]).unwrap();
        let axes = [Axis::new(-1.0, 1.0, 4).unwrap(), Axis::new(-1.0, 1.0, 4).unwrap()];
        let g = reconstruct_expected_density(&ens, &axes, DensityKind::Position).unwrap();
        assert_eq!(g.spill, 2);
        assert_abs_diff_eq!(g.cell_masses().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(g.values[3 * 4 + 2] > 0.0);
        assert!(g.values[2] > 0.0);
    }

    #[test]
    fn temperature_examples() {
        let basis = legendre(2);
        let same = GpcEnsemble::from_deterministic(1, 3, &[0.0, 1.0, 2.0], &[0.7; 3]).unwrap();
        assert!(expected_temperature(&same, &basis).unwrap() < 1e-30);
        let det = GpcEnsemble::from_deterministic(1, 3, &[0.0; 4], &[1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_abs_diff_eq!(expected_temperature(&det, &basis).unwrap(), 3.5, epsilon = 1e-13);

        let n = 10_000;
        let ens = sample_initial(&InitialCondition::homogeneous_default(), n, 17, 3).unwrap();
        let t = expected_temperature(&ens, &basis).unwrap();
        assert!((t - 0.1625).abs() / 0.1625 < 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn temperature_of_random_velocities() {
        // v_1 = θ, v_2 = −θ: u = 0, mean of θ² is 1/3
        let basis = legendre(1);
        let mut ens = GpcEnsemble::zeros(2, 1, 2);
        ens.v_hat_mut(0, 0)[1] = 1.0;
        ens.v_hat_mut(1, 0)[1] = -1.0;
        assert_abs_diff_eq!(expected_temperature(&ens, &basis).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn uq_examples() {
        let basis = legendre(3);
        let constant = vec![2.0; basis.n_nodes()];
        let (m, v) = observable_uq(&constant, &basis).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        let (m, v) = observable_uq(basis.nodes(), &basis).unwrap();
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-14);

        let cubic: Vec<f64> = basis.nodes().iter().map(|t| 1.0 + t - 2.0 * t * t * t).collect();
        let (m, v) = observable_uq(&cubic, &basis).unwrap();
        let direct: f64 = cubic.iter().zip(basis.weights()).map(|(f, w)| w * (f - m) * (f - m)).sum();
        assert_abs_diff_eq!(v, direct, epsilon = 1e-10);
    }

    #[test]
    fn spreads_examples() {
        let basis = legendre(1);
        let two = GpcEnsemble::from_deterministic(1, 2, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        let (g, l) = flocking_spreads(&two, &basis).unwrap();
        assert!(l.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!(g.iter().all(|&x| x == 0.0));
        let same = GpcEnsemble::from_deterministic(1, 2, &[0.0, 1.0, 2.0], &[0.5; 3]).unwrap();
        let (_, l) = flocking_spreads(&same, &basis).unwrap();
        assert!(l.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn error_metrics() {
        assert_eq!(convergence_error(1.0, 1.0, ErrorMode::Absolute).unwrap(), 0.0);
        assert_abs_diff_eq!(convergence_error(1.1, 1.0, ErrorMode::Absolute).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(convergence_error(1.1, 1.0, ErrorMode::Relative).unwrap(), 0.1, epsilon = 1e-15);
        assert!(convergence_error(1.0, 0.0, ErrorMode::Relative).is_err());
    }

    #[test]
    fn stats_of_rotating_annulus() {
        let basis = legendre(2);
        let ens = sample_initial(&InitialCondition::annulus_default(), 500, 5, 3).unwrap();
        let s = compute_stats(&ens, &basis).unwrap();
        assert_eq!(s.ccw_frac, 1.0);
        assert_abs_diff_eq!(s.speed_mean, 1.0, epsilon = 1e-12);
        assert!(s.speed_std < 1e-12);
        let row = s.csv_row();
        assert_eq!(row.split(',').count(), StatRecord::CSV_HEADER.split(',').count());
    }

    proptest! {
        #[test]
        fn histogram_is_a_density(xs in prop::collection::vec(-3.0f64..3.0, 1..200), bins in 1usize..30) {
            let n = xs.len();
            let ens = GpcEnsemble::from_deterministic(1, 1, &xs, &vec![0.0; n]).unwrap();
            let g = reconstruct_expected_density(&ens, &[Axis::new(-1.0, 2.0, bins).unwrap()], DensityKind::Position).unwrap();
            prop_assert!(g.values.iter().all(|&v| v >= 0.0));
            prop_assert!((g.cell_masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn linear_identity_matches_pairwise_sum(pts in prop::collection::vec(-5.0f64..5.0, 200)) {
            let fast = 100.0 * 100.0 * mean_sq_deviation(&pts, 2);
            let direct = pairwise_spread_direct(&pts, 2);
            prop_assert!((fast - direct).abs() <= 1e-9 * direct.max(1.0));
        }

        #[test]
        fn uq_variance_shift_and_scale(vals in prop::collection::vec(-2.0f64..2.0, 8), shift in -5.0f64..5.0, scale in -3.0f64..3.0) {
            let basis = legendre(3);
            let (_, v) = observable_uq(&vals, &basis).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = vals.iter().map(|x| x * scale).collect();
            let (_, vs) = observable_uq(&shifted, &basis).unwrap();
            let (_, vk) = observable_uq(&scaled, &basis).unwrap();
            prop_assert!((vs - v).abs() < 1e-10 * (1.0 + v));
            prop_assert!((vk - scale * scale * v).abs() < 1e-10 * (1.0 + v));
        }
    }
}

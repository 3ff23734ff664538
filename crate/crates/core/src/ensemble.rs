//! gPC-expanded particle state and initial-condition samplers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gpc_basis::{dot, GpcSpace, PointwiseBasis};

/// `N` particles whose position and velocity components are gPC coefficient
/// vectors.
///
/// Storage is dense with the mode index innermost:
/// `x_hat[(i * dim + c) * modes + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpcEnsemble {
    n: usize,
    dim: usize,
    modes: usize,
    pub(crate) x_hat: Vec<f64>,
    pub(crate) v_hat: Vec<f64>,
    pub(crate) time: f64,
}

impl GpcEnsemble {
    pub fn zeros(n: usize, dim: usize, modes: usize) -> Self {
        let len = n * dim * modes;
        GpcEnsemble { n, dim, modes, x_hat: vec![0.0; len], v_hat: vec![0.0; len], time: 0.0 }
    }

    /// Deterministic ensemble from plain positions and velocities
    /// (`n * dim` values each, particle-major).
    pub fn from_deterministic(dim: usize, modes: usize, positions: &[f64], velocities: &[f64]) -> Result<Self> {
        if dim == 0 || modes == 0 {
            return Err(Error::config("dimension and mode count must be positive"));
        }
        if positions.len() != velocities.len() || !positions.len().is_multiple_of(dim) {
            return Err(Error::Dimension { expected: positions.len(), got: velocities.len() });
        }
        let n = positions.len() / dim;
        let mut ens = Self::zeros(n, dim, modes);
        for (row, (&x, &v)) in positions.iter().zip(velocities).enumerate() {
            ens.x_hat[row * modes] = x;
            ens.v_hat[row * modes] = v;
        }
        Ok(ens)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    #[inline]
    fn row(&self, i: usize, c: usize) -> std::ops::Range<usize> {
        let start = (i * self.dim + c) * self.modes;
        start..start + self.modes
    }

    /// Position coefficients of component `c` of particle `i`.
    pub fn x_hat(&self, i: usize, c: usize) -> &[f64] {
        &self.x_hat[self.row(i, c)]
    }

    pub fn v_hat(&self, i: usize, c: usize) -> &[f64] {
        &self.v_hat[self.row(i, c)]
    }

    pub fn x_hat_mut(&mut self, i: usize, c: usize) -> &mut [f64] {
        let r = self.row(i, c);
        &mut self.x_hat[r]
    }

    pub fn v_hat_mut(&mut self, i: usize, c: usize) -> &mut [f64] {
        let r = self.row(i, c);
        &mut self.v_hat[r]
    }

    pub fn x_hat_raw(&self) -> &[f64] {
        &self.x_hat
    }

    pub fn v_hat_raw(&self) -> &[f64] {
        &self.v_hat
    }

    /// Expected (mode-0) position of particle `i`, component `c`.
    pub fn mean_position(&self, i: usize, c: usize) -> f64 {
        self.x_hat[self.row(i, c).start]
    }

    pub fn mean_velocity(&self, i: usize, c: usize) -> f64 {
        self.v_hat[self.row(i, c).start]
    }

    /// Position and velocity of particle `i` at a given value of the random input.
    pub fn evaluate_at_theta<B: PointwiseBasis>(
        &self,
        i: usize,
        point: B::Point,
        basis: &B,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_basis(basis)?;
        let values = basis.values_at(point);
        self.evaluate_with(i, &values)
    }

    /// Position and velocity of particle `i` at quadrature node `q`.
    pub fn evaluate_at_node(&self, i: usize, q: usize, space: &dyn GpcSpace) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_basis(space)?;
        self.evaluate_with(i, space.node_values(q))
    }

    /// Reconstruction against an arbitrary vector of basis values.
    pub fn evaluate_with(&self, i: usize, basis_values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        if basis_values.len() != self.modes {
            return Err(Error::Dimension { expected: self.modes, got: basis_values.len() });
        }
        let x = (0..self.dim).map(|c| dot(self.x_hat(i, c), basis_values)).collect();
        let v = (0..self.dim).map(|c| dot(self.v_hat(i, c), basis_values)).collect();
        Ok((x, v))
    }

    fn check_basis(&self, space: &(impl GpcSpace + ?Sized)) -> Result<()> {
        if space.n_modes() != self.modes {
            return Err(Error::Dimension { expected: self.modes, got: space.n_modes() });
        }
        Ok(())
    }

    /// First particle with a non-finite coefficient, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        let row = self.dim * self.modes;
        (0..self.n).find(|&i| {
            let r = i * row..(i + 1) * row;
            self.x_hat[r.clone()].iter().chain(&self.v_hat[r]).any(|v| !v.is_finite())
        })
    }

    /// Writes `i,dim,mode,x_hat,v_hat` rows to `<stem>.csv` and a key=value
    /// sidecar to `<stem>.meta`.
    pub fn write_snapshot(&self, dir: &Path, stem: &str, meta: &SnapshotMeta) -> Result<()> {
        let mut out = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
        writeln!(out, "i,dim,mode,x_hat,v_hat")?;
        for i in 0..self.n {
            for c in 0..self.dim {
                for (h, (x, v)) in self.x_hat(i, c).iter().zip(self.v_hat(i, c)).enumerate() {
                    writeln!(out, "{i},{c},{h},{x:?},{v:?}")?;
                }
            }
        }
        out.flush()?;
        let mut side = BufWriter::new(File::create(dir.join(format!("{stem}.meta")))?);
        writeln!(side, "N={}", self.n)?;
        writeln!(side, "d={}", self.dim)?;
        writeln!(side, "M={}", meta.order)?;
        writeln!(side, "modes={}", self.modes)?;
        writeln!(side, "family={}", meta.family)?;
        writeln!(side, "time={:?}", self.time)?;
        writeln!(side, "seed={}", meta.seed)?;
        side.flush()?;
        Ok(())
    }
}

/// Sidecar fields of an ensemble snapshot that the ensemble itself does not know.
#[derive(Debug, Clone)]
pub struct SnapshotMeta {
    pub order: String,
    pub family: String,
    pub seed: u64,
}

impl SnapshotMeta {
    pub fn for_space(space: &dyn GpcSpace, seed: u64) -> Self {
        SnapshotMeta { order: space.order_label(), family: space.label(), seed }
    }
}

/// Deterministic initial densities of the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Symmetric bimodal velocity law `∝ exp(−(v−μ)²/2σ²) + exp(−(v+μ)²/2σ²)`;
    /// positions are Gaussian with the given variance, or all at the origin.
    BimodalVelocity1D { mu: f64, sigma2: f64, position_variance: Option<f64> },
    /// Gaussian positions times a bimodal velocity law centred at `±v̄`.
    /// With `duplicate_mode` both velocity modes sit at `−v̄`.
    BivariateBimodal1D { v_bar: f64, sigma_x2: f64, sigma_v2: f64, duplicate_mode: bool },
    /// Uniform on the annulus `r_in ≤ |x| ≤ r_out`, rotating with unit
    /// direction `k ∧ x / |x|` (clockwise if `counterclockwise` is false).
    AnnulusRotating2D { inner_radius: f64, outer_radius: f64, speed: f64, counterclockwise: bool },
}

impl InitialCondition {
    /// Velocity law of the homogeneous test: `σ² = 0.1`, `μ = 1/4`.
    pub fn homogeneous_default() -> Self {
        InitialCondition::BimodalVelocity1D { mu: 0.25, sigma2: 0.1, position_variance: None }
    }

    /// 1D Cucker–Smale test: `v̄ = 1`, `σ_x² = 0.5`, `σ_v² = 0.2`.
    pub fn cs_1d_default() -> Self {
        InitialCondition::BivariateBimodal1D { v_bar: 1.0, sigma_x2: 0.5, sigma_v2: 0.2, duplicate_mode: false }
    }

    pub fn annulus_default() -> Self {
        InitialCondition::AnnulusRotating2D { inner_radius: 0.5, outer_radius: 1.0, speed: 1.0, counterclockwise: true }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::AnnulusRotating2D { .. } => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            InitialCondition::BimodalVelocity1D { mu, sigma2, position_variance } => {
                positive("sigma2", sigma2)?;
                if !mu.is_finite() {
                    return Err(Error::config("mu must be finite"));
                }
                if let Some(pv) = position_variance {
                    positive("position variance", pv)?;
                }
            }
            InitialCondition::BivariateBimodal1D { v_bar, sigma_x2, sigma_v2, .. } => {
                positive("sigma_x2", sigma_x2)?;
                positive("sigma_v2", sigma_v2)?;
                if !v_bar.is_finite() {
                    return Err(Error::config("v_bar must be finite"));
                }
            }
            InitialCondition::AnnulusRotating2D { inner_radius, outer_radius, speed, .. } => {
                positive("inner radius", inner_radius)?;
                positive("outer radius", outer_radius)?;
                if inner_radius >= outer_radius {
                    return Err(Error::config(format!(
                        "annulus inner radius {inner_radius} must be below outer radius {outer_radius}"
                    )));
                }
                if !(speed >= 0.0 && speed.is_finite()) {
                    return Err(Error::config("annulus speed must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Second moment of the velocity law about its mean, for the 1D laws.
    pub fn velocity_variance(&self) -> Option<f64> {
        match *self {
            InitialCondition::BimodalVelocity1D { mu, sigma2, .. } => Some(sigma2 + mu * mu),
            InitialCondition::BivariateBimodal1D { v_bar, sigma_v2, duplicate_mode, .. } => {
                Some(if duplicate_mode { sigma_v2 } else { sigma_v2 + v_bar * v_bar })
            }
            InitialCondition::AnnulusRotating2D { .. } => None,
        }
    }
}

/// Samples `n` particles with deterministic initial data: mode 0 carries the
/// sample, higher modes are zero. The generator is ChaCha8 seeded from `seed`.
pub fn sample_initial(ic: &InitialCondition, n: usize, seed: u64, modes: usize) -> Result<GpcEnsemble> {
    ic.validate()?;
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if modes == 0 {
        return Err(Error::config("mode count must be positive"));
    }
    let dim = ic.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n * dim);
    let mut velocities = Vec::with_capacity(n * dim);
    let normal = |var: f64| Normal::new(0.0, var.sqrt()).map_err(|e| Error::config(e.to_string()));

    match *ic {
        InitialCondition::BimodalVelocity1D { mu, sigma2, position_variance } => {
            let vn = normal(sigma2)?;
            let xn = position_variance.map(normal).transpose()?;
            for _ in 0..n {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                velocities.push(sign * mu + vn.sample(&mut rng));
                positions.push(xn.map_or(0.0, |d| d.sample(&mut rng)));
            }
        }
        InitialCondition::BivariateBimodal1D { v_bar, sigma_x2, sigma_v2, duplicate_mode } => {
            let xn = normal(sigma_x2)?;
            let vn = normal(sigma_v2)?;
            for _ in 0..n {
                positions.push(xn.sample(&mut rng));
                let sign = if duplicate_mode || rng.random::<bool>() { -1.0 } else { 1.0 };
                velocities.push(sign * v_bar + vn.sample(&mut rng));
            }
        }
        InitialCondition::AnnulusRotating2D { inner_radius, outer_radius, speed, counterclockwise } => {
            let (r2_lo, r2_hi) = (inner_radius * inner_radius, outer_radius * outer_radius);
            let orient = if counterclockwise { 1.0 } else { -1.0 };
            for _ in 0..n {
                let r = rng.random_range(r2_lo..=r2_hi).sqrt();
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                let (s, c) = phi.sin_cos();
                positions.extend([r * c, r * s]);
                velocities.extend([-orient * speed * s, orient * speed * c]);
            }
        }
    }
    GpcEnsemble::from_deterministic(dim, modes, &positions, &velocities)
}

//! Monte Carlo gPC time integration.
//!
//! Every particle carries gPC coefficients of its position and velocity. The
//! coefficient dynamics is
//!
//! ```text
//! d x̂_i/dt = v̂_i
//! d v̂_{i,h}/dt = P_h[ S(v_i) + (1/S) Σ_s ( H(x_i, x_js)(v_js − v_i) − ∇_{x_i} U(|x_i − x_js|) ) ]
//! ```
//!
//! where `P_h[g] = E[g Φ_h] / ‖Φ_h‖²` is evaluated by the Gauss rule of the
//! basis and `j_1..j_S` is a uniform subsample drawn without repetition. For
//! the alignment part this is exactly `Σ_k e^{ij}_{hk} (v̂_{j,k} − v̂_{i,k})`
//! with the interaction matrix of [`interaction_coeffs`]; the solver
//! evaluates it in node space, which avoids forming the matrix per pair.
//!
//! Subsamples are drawn from a per-(step, particle) ChaCha8 stream derived
//! from the master seed, so results do not depend on the thread count.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ensemble::{sample_initial, GpcEnsemble, InitialCondition};
use crate::error::{Error, Result};
use crate::gpc_basis::{GpcSpace, Uncertainty};
use crate::models::{cs_kernel_value, morse_derivative, CuckerSmaleParams, MorseSwarmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Classical fourth-order Runge–Kutta.
    Rk4,
    /// Forward Euler, the literal one-stage update.
    Euler,
}

/// When interaction partners are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResamplePolicy {
    /// One subsample per particle per time step, shared by all RK stages.
    PerStep,
    /// A fresh subsample at every RK stage.
    PerStage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Interaction partners per particle, `1 ≤ S ≤ N`.
    pub subsample: usize,
    pub seed: u64,
    pub integrator: Integrator,
    pub resample: ResamplePolicy,
    /// Observers are invoked every this many steps (and at the final step).
    pub observe_every: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, subsample: usize, seed: u64) -> Self {
        SolverConfig {
            dt,
            t_end,
            subsample,
            seed,
            integrator: Integrator::Rk4,
            resample: ResamplePolicy::PerStep,
            observe_every: 1,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config(format!("final time must be >= 0, got {}", self.t_end)));
        }
        if self.subsample == 0 || self.subsample > n {
            return Err(Error::config(format!("subsample size S={} must satisfy 1 <= S <= N={n}", self.subsample)));
        }
        if self.observe_every == 0 {
            return Err(Error::config("observer stride must be >= 1"));
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_end`; the last one may be shorter.
    pub fn n_steps(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// Which forces act, their parameters, and the random-input model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    alignment: Option<CuckerSmaleParams>,
    morse: Option<MorseSwarmParams>,
    uncertainty: Uncertainty,
    // parameter values at every quadrature node
    k_nodes: Vec<f64>,
    gamma_nodes: Vec<f64>,
    c_a_nodes: Vec<f64>,
    c_r_nodes: Vec<f64>,
}

impl ModelSpec {
    /// In 2D-uncertainty mode, alignment parameters are functions of the first
    /// input and the potential strengths of the second.
    pub fn new(
        alignment: Option<CuckerSmaleParams>,
        morse: Option<MorseSwarmParams>,
        uncertainty: Uncertainty,
    ) -> Result<Self> {
        if alignment.is_none() && morse.is_none() {
            return Err(Error::config("at least one of alignment or morse forces must be enabled"));
        }
        if let Some(cs) = &alignment {
            CuckerSmaleParams::new(cs.k, cs.gamma, uncertainty.alignment_nodes())?;
        }
        let space = uncertainty.space();
        let params: Vec<(f64, f64)> = (0..space.n_nodes()).map(|q| space.node_params(q)).collect();
        let at = |f: &dyn Fn(f64) -> f64, pick: fn(&(f64, f64)) -> f64| -> Vec<f64> {
            params.iter().map(|p| f(pick(p))).collect()
        };
        let (k_nodes, gamma_nodes) = match &alignment {
            Some(cs) => (at(&|t| cs.k.eval(t), |p| p.0), at(&|t| cs.gamma.eval(t), |p| p.0)),
            None => (Vec::new(), Vec::new()),
        };
        let (c_a_nodes, c_r_nodes) = match &morse {
            Some(m) => (at(&|t| m.c_a.eval(t), |p| p.1), at(&|t| m.c_r.eval(t), |p| p.1)),
            None => (Vec::new(), Vec::new()),
        };
        Ok(ModelSpec { alignment, morse, uncertainty, k_nodes, gamma_nodes, c_a_nodes, c_r_nodes })
    }

    pub fn alignment(&self) -> Option<&CuckerSmaleParams> {
        self.alignment.as_ref()
    }

    pub fn morse(&self) -> Option<&MorseSwarmParams> {
        self.morse.as_ref()
    }

    pub fn uncertainty(&self) -> &Uncertainty {
        &self.uncertainty
    }

    pub fn space(&self) -> &dyn GpcSpace {
        self.uncertainty.space()
    }

    pub fn n_modes(&self) -> usize {
        self.space().n_modes()
    }

    /// Pure alignment with a kernel that ignores positions: the interaction
    /// sum collapses to an average of velocity coefficients.
    fn position_independent(&self) -> bool {
        self.morse.is_none() && self.alignment.is_some_and(|a| a.is_position_independent())
    }
}

/// `e^{ij}_{hk} = E[H(θ; |x_i − x_j|) Φ_k Φ_h] / ‖Φ_h‖²`, rows indexed by `h`.
pub fn interaction_coeffs(
    ens: &GpcEnsemble,
    i: usize,
    j: usize,
    params: &CuckerSmaleParams,
    space: &dyn GpcSpace,
) -> Result<DMatrix<f64>> {
    let m = space.n_modes();
    let mut e = DMatrix::<f64>::zeros(m, m);
    for q in 0..space.n_nodes() {
        let (xi, _) = ens.evaluate_at_node(i, q, space)?;
        let (xj, _) = ens.evaluate_at_node(j, q, space)?;
        let r_sq: f64 = xi.iter().zip(&xj).map(|(a, b)| (a - b) * (a - b)).sum();
        let weight = space.weights()[q] * params.kernel(space.node_params(q).0, r_sq);
        let phi = space.node_values(q);
        for h in 0..m {
            for k in 0..m {
                e[(h, k)] += weight * phi[k] * phi[h];
            }
        }
    }
    for h in 0..m {
        let norm = space.sq_norms()[h];
        e.row_mut(h).iter_mut().for_each(|v| *v /= norm);
    }
    Ok(e)
}

/// Velocity-coefficient rate of particle `i` for a given subsample, laid out
/// as `out[c * modes + h]`.
pub fn mcgpc_velocity_rhs(ens: &GpcEnsemble, i: usize, subsample: &[usize], spec: &ModelSpec) -> Result<Vec<f64>> {
    check_compatible(ens, spec)?;
    if i >= ens.len() {
        return Err(Error::IndexOutOfRange { index: i, len: ens.len() });
    }
    if let Some(&bad) = subsample.iter().find(|&&j| j >= ens.len()) {
        return Err(Error::IndexOutOfRange { index: bad, len: ens.len() });
    }
    if subsample.is_empty() {
        return Err(Error::config("subsample must contain at least one index"));
    }
    let layout = Layout::of(ens, spec);
    let cache = NodeCache::build(&layout, &ens.x_hat, &ens.v_hat, spec.space());
    let mut scratch = Scratch::new(&layout);
    let mut out = vec![0.0; layout.row()];
    let partners = Partners::List(subsample);
    let mean = spec.position_independent().then(Vec::new);
    layout.dispatch(|kernel| {
        kernel(&layout, spec, &cache, &ens.v_hat, i, &partners, mean.as_deref(), &mut scratch, &mut out)
    });
    Ok(out)
}

fn check_compatible(ens: &GpcEnsemble, spec: &ModelSpec) -> Result<()> {
    if ens.modes() != spec.n_modes() {
        return Err(Error::Dimension { expected: spec.n_modes(), got: ens.modes() });
    }
    if !(1..=3).contains(&ens.dim()) {
        return Err(Error::config(format!("spatial dimension must be 1, 2 or 3, got {}", ens.dim())));
    }
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    dim: usize,
    modes: usize,
    nodes: usize,
}

impl Layout {
    fn of(ens: &GpcEnsemble, spec: &ModelSpec) -> Self {
        Layout { n: ens.len(), dim: ens.dim(), modes: spec.n_modes(), nodes: spec.space().n_nodes() }
    }

    /// Coefficients per particle.
    fn row(&self) -> usize {
        self.dim * self.modes
    }

    fn dispatch<R>(&self, f: impl FnOnce(ParticleKernel) -> R) -> R {
        match self.dim {
            1 => f(particle_rhs::<1>),
            2 => f(particle_rhs::<2>),
            _ => f(particle_rhs::<3>),
        }
    }
}

type ParticleKernel =
    fn(&Layout, &ModelSpec, &NodeCache, &[f64], usize, &Partners<'_>, Option<&[f64]>, &mut Scratch, &mut [f64]);

/// Positions and velocities of every particle at every quadrature node,
/// `x[(i * nodes + q) * dim + c]`.
struct NodeCache {
    x: Vec<f64>,
    v: Vec<f64>,
}

impl NodeCache {
    fn build(layout: &Layout, x_hat: &[f64], v_hat: &[f64], space: &dyn GpcSpace) -> Self {
        let mut cache = NodeCache { x: vec![0.0; layout.n * layout.nodes * layout.dim], v: Vec::new() };
        cache.v = cache.x.clone();
        cache.refill(layout, x_hat, v_hat, space);
        cache
    }

    fn refill(&mut self, layout: &Layout, x_hat: &[f64], v_hat: &[f64], space: &dyn GpcSpace) {
        let Layout { dim, modes, nodes, .. } = *layout;
        let chunk = nodes * dim;
        self.x.par_chunks_mut(chunk).zip(self.v.par_chunks_mut(chunk)).enumerate().for_each(|(i, (xs, vs))| {
            let base = i * dim * modes;
            for q in 0..nodes {
                let phi = space.node_values(q);
                for c in 0..dim {
                    let row = base + c * modes..base + (c + 1) * modes;
                    xs[q * dim + c] = crate::gpc_basis::dot(&x_hat[row.clone()], phi);
                    vs[q * dim + c] = crate::gpc_basis::dot(&v_hat[row], phi);
                }
            }
        });
    }
}

enum Partners<'a> {
    All,
    List(&'a [usize]),
}

impl Partners<'_> {
    fn count(&self, n: usize) -> usize {
        match self {
            Partners::All => n,
            Partners::List(l) => l.len(),
        }
    }
}

struct Scratch {
    acc: Vec<f64>,
    avg: Vec<f64>,
    indices: Vec<usize>,
}

impl Scratch {
    fn new(layout: &Layout) -> Self {
        Scratch { acc: vec![0.0; layout.nodes * layout.dim], avg: vec![0.0; layout.row()], indices: Vec::new() }
    }
}

/// Node-space acceleration of particle `i` followed by projection onto the basis.
#[allow(clippy::too_many_arguments)]
fn particle_rhs<const D: usize>(
    layout: &Layout,
    spec: &ModelSpec,
    cache: &NodeCache,
    v_hat: &[f64],
    i: usize,
    partners: &Partners<'_>,
    global_mean: Option<&[f64]>,
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    let Layout { n, modes, nodes, .. } = *layout;
    let space = spec.space();
    let s_count = partners.count(n);
    let inv_s = 1.0 / s_count as f64;
    let acc = &mut scratch.acc;
    acc.iter_mut().for_each(|a| *a = 0.0);

    let xi_all = &cache.x[i * nodes * D..(i + 1) * nodes * D];
    let vi_all = &cache.v[i * nodes * D..(i + 1) * nodes * D];

    if let Some(morse) = &spec.morse {
        for q in 0..nodes {
            let v = &vi_all[q * D..(q + 1) * D];
            let speed_sq: f64 = v.iter().map(|x| x * x).sum();
            let factor = morse.a - morse.b * speed_sq;
            for c in 0..D {
                acc[q * D + c] += factor * v[c];
            }
        }
    }

    if spec.position_independent() {
        // H depends on θ only: (1/S) Σ_s K(θ)(v_j − v_i) = K(θ)(mean_s v_j − v_i)
        let row = D * modes;
        let avg = &mut scratch.avg;
        match (partners, global_mean) {
            (Partners::All, Some(mean)) if !mean.is_empty() => avg.copy_from_slice(mean),
            _ => {
                avg.iter_mut().for_each(|a| *a = 0.0);
                let mut add = |j: usize| {
                    for (a, v) in avg.iter_mut().zip(&v_hat[j * row..(j + 1) * row]) {
                        *a += v;
                    }
                };
                match partners {
                    Partners::All => (0..n).for_each(&mut add),
                    Partners::List(list) => list.iter().copied().for_each(&mut add),
                }
                avg.iter_mut().for_each(|a| *a *= inv_s);
            }
        }
        for q in 0..nodes {
            let phi = space.node_values(q);
            let k = spec.k_nodes[q];
            for c in 0..D {
                let mean_v = crate::gpc_basis::dot(&avg[c * modes..(c + 1) * modes], phi);
                acc[q * D + c] += k * (mean_v - vi_all[q * D + c]);
            }
        }
    } else {
        let mut visit = |j: usize| {
            let xj_all = &cache.x[j * nodes * D..(j + 1) * nodes * D];
            let vj_all = &cache.v[j * nodes * D..(j + 1) * nodes * D];
            for q in 0..nodes {
                let mut dx = [0.0; D];
                let mut r_sq = 0.0;
                for c in 0..D {
                    dx[c] = xi_all[q * D + c] - xj_all[q * D + c];
                    r_sq += dx[c] * dx[c];
                }
                let a = &mut acc[q * D..(q + 1) * D];
                if spec.alignment.is_some() {
                    let h = cs_kernel_value(spec.k_nodes[q], spec.gamma_nodes[q], r_sq) * inv_s;
                    for c in 0..D {
                        a[c] += h * (vj_all[q * D + c] - vi_all[q * D + c]);
                    }
                }
                if let Some(morse) = &spec.morse {
                    if j != i && r_sq > 0.0 {
                        let r = r_sq.sqrt();
                        let du = morse_derivative(spec.c_a_nodes[q], spec.c_r_nodes[q], morse.ell_a, morse.ell_r, r);
                        let scale = -du / r * inv_s;
                        for c in 0..D {
                            a[c] += scale * dx[c];
                        }
                    }
                }
            }
        };
        match partners {
            Partners::All => (0..n).for_each(&mut visit),
            Partners::List(list) => list.iter().copied().for_each(&mut visit),
        }
    }

    // projection: out[c * modes + h] = Σ_q w_q acc_q Φ_h(θ_q) / ‖Φ_h‖²
    out.iter_mut().for_each(|o| *o = 0.0);
    for q in 0..nodes {
        let phi = space.node_values(q);
        let w = space.weights()[q];
        for c in 0..D {
            let a = w * acc[q * D + c];
            for (o, p) in out[c * modes..(c + 1) * modes].iter_mut().zip(phi) {
                *o += a * p;
            }
        }
    }
    for c in 0..D {
        for (o, norm) in out[c * modes..(c + 1) * modes].iter_mut().zip(space.sq_norms()) {
            *o /= norm;
        }
    }
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the subsample stream for one particle at one step (and stage).
fn stream_seed(seed: u64, step: u64, stage: u64, particle: usize) -> u64 {
    splitmix(splitmix(splitmix(splitmix(seed) ^ step) ^ stage) ^ particle as u64)
}

/// Draws `s` distinct partners out of `n` for particle `particle`.
pub fn draw_subsample(seed: u64, step: u64, stage: u64, particle: usize, n: usize, s: usize, out: &mut Vec<usize>) {
    out.clear();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, step, stage, particle));
    out.extend(index::sample(&mut rng, n, s).iter());
}

/// Evaluates `dv̂/dt` for all particles into `dv`.
#[allow(clippy::too_many_arguments)]
fn velocity_rates(
    layout: &Layout,
    spec: &ModelSpec,
    cache: &mut NodeCache,
    x_hat: &[f64],
    v_hat: &[f64],
    cfg: &SolverConfig,
    step: u64,
    stage: u64,
    dv: &mut [f64],
) {
    cache.refill(layout, x_hat, v_hat, spec.space());
    let n = layout.n;
    let s = cfg.subsample;
    let full = s >= n;
    let global_mean = (full && spec.position_independent()).then(|| {
        let row = layout.row();
        let mut mean = vec![0.0; row];
        for chunk in v_hat.chunks(row) {
            for (m, v) in mean.iter_mut().zip(chunk) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        mean
    });
    let stage_tag = match cfg.resample {
        ResamplePolicy::PerStep => 0,
        ResamplePolicy::PerStage => stage,
    };
    let cache: &NodeCache = cache;
    layout.dispatch(|kernel| {
        dv.par_chunks_mut(layout.row()).enumerate().for_each_init(
            || Scratch::new(layout),
            |scratch, (i, out)| {
                let mut indices = std::mem::take(&mut scratch.indices);
                let partners = if full {
                    Partners::All
                } else {
                    draw_subsample(cfg.seed, step, stage_tag, i, n, s, &mut indices);
                    Partners::List(&indices)
                };
                kernel(layout, spec, cache, v_hat, i, &partners, global_mean.as_deref(), scratch, out);
                scratch.indices = indices;
            },
        )
    });
}

/// Time stepper holding the model, the configuration and the step counter
/// that seeds the subsample streams.
pub struct Solver {
    spec: ModelSpec,
    cfg: SolverConfig,
    step_index: u64,
    cache: Option<NodeCache>,
}

impl Solver {
    pub fn new(spec: ModelSpec, cfg: SolverConfig) -> Self {
        Solver { spec, cfg, step_index: 0, cache: None }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Sets the step counter, i.e. which subsample streams the next step uses.
    pub fn set_step_index(&mut self, step: u64) {
        self.step_index = step;
    }

    /// Advances by the configured `dt`.
    pub fn step(&mut self, ens: &mut GpcEnsemble) -> Result<()> {
        let dt = self.cfg.dt;
        self.step_with_dt(ens, dt)
    }

    /// Advances by `dt` (which may be zero or shorter than the configured step).
    pub fn step_with_dt(&mut self, ens: &mut GpcEnsemble, dt: f64) -> Result<()> {
        check_compatible(ens, &self.spec)?;
        if self.cfg.subsample == 0 || self.cfg.subsample > ens.len() {
            return Err(Error::config(format!(
                "subsample size S={} must satisfy 1 <= S <= N={}",
                self.cfg.subsample,
                ens.len()
            )));
        }
        let layout = Layout::of(ens, &self.spec);
        let cache =
            self.cache.get_or_insert_with(|| NodeCache::build(&layout, &ens.x_hat, &ens.v_hat, self.spec.space()));
        if cache.x.len() != layout.n * layout.nodes * layout.dim {
            *cache = NodeCache::build(&layout, &ens.x_hat, &ens.v_hat, self.spec.space());
        }
        let step = self.step_index;
        let len = ens.x_hat.len();

        match self.cfg.integrator {
            Integrator::Euler => {
                let mut dv = vec![0.0; len];
                velocity_rates(&layout, &self.spec, cache, &ens.x_hat, &ens.v_hat, &self.cfg, step, 0, &mut dv);
                for ((x, v), a) in ens.x_hat.iter_mut().zip(ens.v_hat.iter_mut()).zip(&dv) {
                    *x += dt * *v;
                    *v += dt * a;
                }
            }
            Integrator::Rk4 => {
                let (x0, v0) = (&ens.x_hat, &ens.v_hat);
                let mut sx = x0.clone();
                let mut sv = v0.clone();
                let mut kv = vec![0.0; len];
                let mut acc_x = vec![0.0; len];
                let mut acc_v = vec![0.0; len];
                const NEXT: [f64; 3] = [0.5, 0.5, 1.0];
                const WEIGHT: [f64; 4] = [1.0, 2.0, 2.0, 1.0];
                for stage in 0..4 {
                    velocity_rates(&layout, &self.spec, cache, &sx, &sv, &self.cfg, step, stage as u64, &mut kv);
                    let b = WEIGHT[stage];
                    // the position rate of this stage is the stage velocity sv
                    for idx in 0..len {
                        acc_x[idx] += b * sv[idx];
                        acc_v[idx] += b * kv[idx];
                    }
                    if stage < 3 {
                        let c = NEXT[stage] * dt;
                        for idx in 0..len {
                            let kx = sv[idx];
                            sx[idx] = x0[idx] + c * kx;
                            sv[idx] = v0[idx] + c * kv[idx];
                        }
                    }
                }
                let h = dt / 6.0;
                for idx in 0..len {
                    ens.x_hat[idx] += h * acc_x[idx];
                    ens.v_hat[idx] += h * acc_v[idx];
                }
            }
        }
        ens.time += dt;
        self.step_index += 1;
        if let Some(particle) = ens.first_non_finite() {
            return Err(Error::Blowup { particle, time: ens.time, dt });
        }
        Ok(())
    }
}

/// One time step of `ens` under `cfg`, using the subsample streams of step
/// number `step_index`. Pure: returns the advanced ensemble.
pub fn step(ens: &GpcEnsemble, spec: &ModelSpec, cfg: &SolverConfig, step_index: u64) -> Result<GpcEnsemble> {
    let mut next = ens.clone();
    let mut solver = Solver::new(spec.clone(), cfg.clone());
    solver.set_step_index(step_index);
    solver.step(&mut next)?;
    Ok(next)
}

/// Callback invoked on the ensemble during [`run`].
pub trait Observer {
    fn observe(&mut self, step: usize, ens: &GpcEnsemble, spec: &ModelSpec) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(usize, &GpcEnsemble, &ModelSpec) -> Result<()>,
{
    fn observe(&mut self, step: usize, ens: &GpcEnsemble, spec: &ModelSpec) -> Result<()> {
        self(step, ens, spec)
    }
}

/// Samples the initial ensemble and integrates it to `cfg.t_end`.
pub fn run(
    ic: &InitialCondition,
    n: usize,
    spec: &ModelSpec,
    cfg: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<GpcEnsemble> {
    let ens = sample_initial(ic, n, cfg.seed, spec.n_modes())?;
    run_from(ens, spec, cfg, observers)
}

/// Integrates a given ensemble from its current time to `cfg.t_end`.
///
/// Observers see step 0, every `observe_every`-th step and the last step.
pub fn run_from(
    mut ens: GpcEnsemble,
    spec: &ModelSpec,
    cfg: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<GpcEnsemble> {
    cfg.validate(ens.len())?;
    check_compatible(&ens, spec)?;
    let start = ens.time;
    let horizon = cfg.t_end - start;
    if horizon < -1e-12 {
        return Err(Error::config(format!("ensemble time {start} is past t_end {}", cfg.t_end)));
    }
    let steps = SolverConfig { t_end: horizon.max(0.0), ..cfg.clone() }.n_steps();
    let mut solver = Solver::new(spec.clone(), cfg.clone());
    for obs in observers.iter_mut() {
        obs.observe(0, &ens, spec)?;
    }
    for k in 1..=steps {
        let target = if k == steps { cfg.t_end } else { start + k as f64 * cfg.dt };
        let dt = target - ens.time;
        solver.step_with_dt(&mut ens, dt)?;
        ens.time = target;
        if k % cfg.observe_every == 0 || k == steps {
            for obs in observers.iter_mut() {
                obs.observe(k, &ens, spec)?;
            }
        }
    }
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpc_basis::{GpcBasis, PolynomialFamily};
    use crate::models::UncertainScalar;
    use approx::assert_abs_diff_eq;

    fn legendre(order: usize) -> GpcBasis {
        GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, order).unwrap()
    }

    fn cs_spec(k: UncertainScalar, gamma: UncertainScalar, order: usize) -> ModelSpec {
        let basis = legendre(order);
        let cs = CuckerSmaleParams::new(k, gamma, basis.nodes()).unwrap();
        ModelSpec::new(Some(cs), None, Uncertainty::OneD(basis)).unwrap()
    }

    #[test]
    fn constant_kernel_gives_scaled_identity() {
        let basis = legendre(3);
        let cs = CuckerSmaleParams::new(2.5.into(), 0.0.into(), basis.nodes()).unwrap();
        let ens = sample_initial(&InitialCondition::cs_1d_default(), 3, 1, 4).unwrap();
        let e = interaction_coeffs(&ens, 0, 1, &cs, &basis).unwrap();
        for h in 0..4 {
            for k in 0..4 {
                assert_abs_diff_eq!(e[(h, k)], if h == k { 2.5 } else { 0.0 }, epsilon = 1e-13);
            }
        }
        // deterministic positions and parameters: H(|x_i − x_j|) times identity
        let cs = CuckerSmaleParams::new(1.0.into(), 0.3.into(), basis.nodes()).unwrap();
        let e = interaction_coeffs(&ens, 0, 2, &cs, &basis).unwrap();
        let dx = ens.mean_position(0, 0) - ens.mean_position(2, 0);
        let h = cs.kernel(0.0, dx * dx);
        for hh in 0..4 {
            for k in 0..4 {
                assert_abs_diff_eq!(e[(hh, k)], if hh == k { h } else { 0.0 }, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn coincident_positions_affine_strength() {
        let basis = legendre(1);
        let cs = CuckerSmaleParams::new(UncertainScalar::affine(1.0, 0.9999), 0.7.into(), basis.nodes()).unwrap();
        let ens = GpcEnsemble::from_deterministic(1, 2, &[0.4, 0.4], &[0.0, 1.0]).unwrap();
        let e = interaction_coeffs(&ens, 0, 1, &cs, &basis).unwrap();
        // K(θ) = 1 + cθ:  e = [[1, c/3], [c, 1]]
        let c = 0.9999;
        assert_abs_diff_eq!(e[(0, 0)], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e[(0, 1)], c / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e[(1, 0)], c, epsilon = 1e-13);
        assert_abs_diff_eq!(e[(1, 1)], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn rhs_special_cases() {
        let spec = cs_spec(1.0.into(), UncertainScalar::affine(0.2, 0.1), 2);
        let mut ens = sample_initial(&InitialCondition::cs_1d_default(), 5, 3, 3).unwrap();
        // self-interaction cancels
        let r = mcgpc_velocity_rhs(&ens, 2, &[2], &spec).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
        // identical velocities: no alignment
        for i in 0..5 {
            ens.v_hat_mut(i, 0).copy_from_slice(&[0.3, -0.1, 0.05]);
        }
        let r = mcgpc_velocity_rhs(&ens, 0, &[1, 2, 3, 4], &spec).unwrap();
        assert!(r.iter().all(|&x| x.abs() < 1e-15));
        assert!(matches!(mcgpc_velocity_rhs(&ens, 0, &[9], &spec), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn two_particle_rate() {
        let spec = cs_spec(3.0.into(), 0.0.into(), 2);
        let ens = GpcEnsemble::from_deterministic(1, 3, &[0.0, 5.0], &[0.25, -1.0]).unwrap();
        let r = mcgpc_velocity_rhs(&ens, 0, &[1], &spec).unwrap();
        assert_abs_diff_eq!(r[0], 3.0 * (-1.0 - 0.25), epsilon = 1e-14);
        assert!(r[1..].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn node_route_matches_interaction_matrix_route() {
        let spec = cs_spec(UncertainScalar::affine(1.0, 0.4), UncertainScalar::affine(0.3, 0.2), 3);
        let mut ens = GpcEnsemble::zeros(4, 2, 4);
        for (k, v) in ens.x_hat.iter_mut().enumerate() {
            *v = ((k * 29 % 17) as f64 - 8.0) / 9.0;
        }
        for (k, v) in ens.v_hat.iter_mut().enumerate() {
            *v = ((k * 13 % 7) as f64 - 3.0) / 5.0;
        }
        let subsample = [1, 3, 2];
        let rate = mcgpc_velocity_rhs(&ens, 0, &subsample, &spec).unwrap();
        let cs = spec.alignment().unwrap();
        let mut expected = vec![0.0; 2 * 4];
        for &j in &subsample {
            let e = interaction_coeffs(&ens, 0, j, cs, spec.space()).unwrap();
            for c in 0..2 {
                for h in 0..4 {
                    for k in 0..4 {
                        expected[c * 4 + h] += e[(h, k)] * (ens.v_hat(j, c)[k] - ens.v_hat(0, c)[k]) / 3.0;
                    }
                }
            }
        }
        for (a, b) in rate.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_dt_is_identity_and_single_particle_translates() {
        let spec = cs_spec(1.0.into(), UncertainScalar::affine(0.1, 0.05), 2);
        let ens = sample_initial(&InitialCondition::cs_1d_default(), 6, 9, 3).unwrap();
        let mut solver = Solver::new(spec.clone(), SolverConfig::new(0.1, 1.0, 3, 1));
        let mut same = ens.clone();
        solver.step_with_dt(&mut same, 0.0).unwrap();
        assert_eq!(same.x_hat_raw(), ens.x_hat_raw());
        assert_eq!(same.v_hat_raw(), ens.v_hat_raw());

        let single = GpcEnsemble::from_deterministic(1, 3, &[0.5], &[-0.75]).unwrap();
        let after = step(&single, &spec, &SolverConfig::new(0.1, 1.0, 1, 1), 0).unwrap();
        assert_eq!(after.v_hat(0, 0), single.v_hat(0, 0));
        assert_abs_diff_eq!(after.mean_position(0, 0), 0.5 - 0.075, epsilon = 1e-15);
    }

    #[test]
    fn two_particle_contraction_matches_rk4_polynomial() {
        let k0 = 0.8;
        let dt = 0.3;
        let spec = cs_spec(k0.into(), 0.0.into(), 1);
        let ens = GpcEnsemble::from_deterministic(1, 2, &[0.0, 1.0], &[1.0, -0.5]).unwrap();
        let after = step(&ens, &spec, &SolverConfig::new(dt, dt, 2, 0), 0).unwrap();
        let z: f64 = -2.0 * k0 / 2.0 * dt; // rate of the difference is −2 K₀/N with N = 2
        let poly = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        let diff = after.mean_velocity(0, 0) - after.mean_velocity(1, 0);
        assert_abs_diff_eq!(diff, 1.5 * poly, epsilon = 1e-14);
    }

    #[test]
    fn subsamples_are_distinct_and_reproducible() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        draw_subsample(5, 7, 0, 3, 100, 20, &mut a);
        draw_subsample(5, 7, 0, 3, 100, 20, &mut b);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        draw_subsample(5, 8, 0, 3, 100, 20, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn subsample_uniformity_chi_square() {
        let (n, s, draws) = (20usize, 4usize, 25_000u64);
        let mut counts = vec![0u64; n];
        let mut buf = Vec::new();
        for step in 0..draws {
            draw_subsample(99, step, 0, 0, n, s, &mut buf);
            for &j in &buf {
                counts[j] += 1;
            }
        }
        let expected = (draws as usize * s) as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of chi-square with 19 degrees of freedom
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn deterministic_inputs_keep_higher_modes_zero() {
        let spec = cs_spec(1.0.into(), 0.3.into(), 4);
        let cfg = SolverConfig::new(0.05, 1.0, 4, 3);
        let out = run(&InitialCondition::cs_1d_default(), 20, &spec, &cfg, &mut []).unwrap();
        for i in 0..20 {
            assert!(out.x_hat(i, 0)[1..].iter().all(|&v| v.abs() < 1e-14));
            assert!(out.v_hat(i, 0)[1..].iter().all(|&v| v.abs() < 1e-14));
        }
        assert_abs_diff_eq!(out.time(), 1.0);
    }

    #[test]
    fn zero_horizon_invokes_observers_once() {
        let spec = cs_spec(1.0.into(), 0.0.into(), 1);
        let cfg = SolverConfig::new(0.1, 0.0, 5, 3);
        let mut calls = 0;
        let mut obs = |_: usize, _: &GpcEnsemble, _: &ModelSpec| -> Result<()> {
            calls += 1;
            Ok(())
        };
        let ens = run(&InitialCondition::homogeneous_default(), 10, &spec, &cfg, &mut [&mut obs]).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(ens, sample_initial(&InitialCondition::homogeneous_default(), 10, 3, 2).unwrap());
    }

    #[test]
    fn invalid_configs() {
        let spec = cs_spec(1.0.into(), 0.0.into(), 1);
        let ic = InitialCondition::homogeneous_default();
        for cfg in [
            SolverConfig::new(0.0, 1.0, 2, 0),
            SolverConfig::new(0.1, -1.0, 2, 0),
            SolverConfig::new(0.1, 1.0, 0, 0),
            SolverConfig::new(0.1, 1.0, 11, 0),
        ] {
            assert!(matches!(run(&ic, 10, &spec, &cfg, &mut []), Err(Error::Config(_))));
        }
        let basis = legendre(1);
        assert!(ModelSpec::new(None, None, Uncertainty::OneD(basis)).is_err());
    }

    #[test]
    fn blowup_is_reported() {
        let basis = legendre(1);
        let morse = MorseSwarmParams::new(5.0, 1.0, 1.0.into(), 1.0.into(), 1.0, 1.0).unwrap();
        let spec = ModelSpec::new(None, Some(morse), Uncertainty::OneD(basis)).unwrap();
        let ens = GpcEnsemble::from_deterministic(1, 2, &[0.0, 1.0], &[1e3, -1e3]).unwrap();
        let cfg = SolverConfig::new(1.0, 50.0, 2, 0);
        let err = run_from(ens, &spec, &cfg, &mut []).unwrap_err();
        assert!(matches!(err, Error::Blowup { .. }), "{err}");
        assert!(err.is_numerical());
    }
}

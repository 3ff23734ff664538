//! The `run`, `converge` and `oracle` commands.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mcgpc_core::pde_oracle::{bimodal_density, discretize_density};
use mcgpc_core::{
    compute_stats, expected_temperature, flocking_spreads, oracle_expected_temperature, reconstruct_expected_density,
    run, run_from, sample_initial, sg_homogeneous_solve_with, velocity_field, write_stats_csv, DensityKind,
    GpcEnsemble, GpcSpace, ModelSpec, SgOptions, SnapshotMeta, StatRecord, Uncertainty,
};

use crate::config::{Config, Prepared, ReferenceKind};
use crate::error::{CliError, Result};

/// Command-line overrides shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.particles.seed = seed;
        }
    }
}

/// Runs `f` on a dedicated rayon pool when a thread count is given.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Config("--threads must be >= 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

/// Output directory that only appears once everything has been written.
///
/// Artifacts go to a hidden sibling directory which is renamed onto the
/// target on [`Staging::commit`] and removed if the command fails.
struct Staging {
    tmp: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    fn begin(target: &Path) -> Result<Self> {
        if target.exists() {
            let empty = target.is_dir() && fs::read_dir(target)?.next().is_none();
            if !empty {
                return Err(CliError::Config(format!(
                    "output directory {} already exists and is not empty",
                    target.display()
                )));
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Config(format!("invalid output directory {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let tmp = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp)?;
        Ok(Staging { tmp, target: target.to_path_buf(), committed: false })
    }

    fn path(&self) -> &Path {
        &self.tmp
    }

    fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir(&self.target)?;
        }
        fs::rename(&self.tmp, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn write_manifest(dir: &Path, command: &str, cfg: &Config, extra: &[(&str, String)]) -> Result<()> {
    let mut out = fs::File::create(dir.join("manifest.txt"))?;
    writeln!(out, "mcgpc {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "command = {command}")?;
    writeln!(out, "seed = {}", cfg.particles.seed)?;
    for (k, v) in extra {
        writeln!(out, "{k} = {v}")?;
    }
    writeln!(out)?;
    writeln!(out, "# effective configuration")?;
    write!(out, "{}", cfg.to_toml())?;
    Ok(())
}

fn time_label(t: f64) -> String {
    format!("t{t:.4}")
}

fn write_densities(dir: &Path, ens: &GpcEnsemble, p: &Prepared, pgm: bool) -> mcgpc_core::Result<()> {
    let label = time_label(ens.time());
    let mut grids = vec![
        ("position", reconstruct_expected_density(ens, &p.position_axes, DensityKind::Position)?),
        ("velocity", reconstruct_expected_density(ens, &p.velocity_axes, DensityKind::Velocity)?),
    ];
    if p.dim == 1 {
        let axes = [p.position_axes[0], p.velocity_axes[0]];
        grids.push(("phase", reconstruct_expected_density(ens, &axes, DensityKind::PhaseSpace)?));
    } else {
        let field = velocity_field(ens, [p.position_axes[0], p.position_axes[1]])?;
        field.write_csv(&dir.join(format!("velocity_field_{label}.csv")))?;
    }
    for (name, grid) in &grids {
        grid.write_csv(&dir.join(format!("density_{name}_{label}.csv")))?;
        if pgm && grid.axes.len() == 2 {
            grid.write_pgm(&dir.join(format!("density_{name}_{label}.pgm")))?;
        }
    }
    Ok(())
}

fn spreads_row(ens: &GpcEnsemble, space: &dyn GpcSpace) -> mcgpc_core::Result<String> {
    let (gamma, lambda) = flocking_spreads(ens, space)?;
    let mut row = format!("{:?}", ens.time());
    for v in gamma.iter().chain(&lambda) {
        row.push_str(&format!(",{v:?}"));
    }
    Ok(row)
}

fn spreads_header(space: &dyn GpcSpace) -> String {
    let q = space.n_nodes();
    let mut h = String::from("t");
    for k in 0..q {
        h.push_str(&format!(",Gamma_q{k}"));
    }
    for k in 0..q {
        h.push_str(&format!(",Lambda_q{k}"));
    }
    h
}

/// Simulates `cfg` and writes all artifacts into `cfg.output.dir`.
pub fn run_experiment(cfg: &Config) -> Result<PathBuf> {
    let p = cfg.prepare()?;
    let staging = Staging::begin(&cfg.output.dir)?;
    let dir = staging.path().to_path_buf();
    write_manifest(&dir, "run", cfg, &[])?;

    let space = p.spec.space();
    let meta = SnapshotMeta::for_space(space, cfg.particles.seed);
    let ens0 = sample_initial(&p.initial, p.n, p.solver.seed, p.spec.n_modes())?;
    if cfg.output.snapshots {
        ens0.write_snapshot(&dir, "ensemble_initial", &meta)?;
    }

    let steps = p.solver.n_steps();
    let dt = p.solver.dt;
    let mut density_steps: BTreeSet<usize> =
        cfg.output.density_times.iter().map(|t| ((t / dt).round() as usize).min(steps)).collect();
    density_steps.insert(0);
    density_steps.insert(steps);
    let stride = cfg.time.stride;

    let mut records: Vec<StatRecord> = Vec::new();
    let mut spreads = vec![spreads_header(space)];
    let mut observe = |k: usize, ens: &GpcEnsemble, spec: &ModelSpec| -> mcgpc_core::Result<()> {
        if k.is_multiple_of(stride) || k == steps {
            records.push(compute_stats(ens, spec.space())?);
            if ens.len() >= 2 {
                spreads.push(spreads_row(ens, spec.space())?);
            }
        }
        if density_steps.contains(&k) {
            write_densities(&dir, ens, &p, cfg.output.pgm)?;
        }
        Ok(())
    };
    let mut solver_cfg = p.solver.clone();
    solver_cfg.observe_every = 1;
    let final_ens = run_from(ens0, &p.spec, &solver_cfg, &mut [&mut observe])?;

    write_stats_csv(&dir.join("stats.csv"), &records)?;
    if spreads.len() > 1 {
        fs::write(dir.join("spreads.csv"), spreads.join("\n") + "\n")?;
    }
    if cfg.output.snapshots && steps > 0 {
        final_ens.write_snapshot(&dir, "ensemble_final", &meta)?;
    }
    staging.commit()
}

/// Which configuration entry a convergence sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Order,
    Subsample,
    Particles,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Order => "M",
            SweepAxis::Subsample => "S",
            SweepAxis::Particles => "N",
        }
    }
}

/// Parses `M=1,2,3`, `S=10,100` or `N=1000,10000`.
pub fn parse_sweep(spec: &str) -> Result<(SweepAxis, Vec<usize>)> {
    let (axis, list) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("sweep `{spec}` must look like AXIS=v1,v2,...")))?;
    let axis = match axis.trim() {
        "M" | "order" => SweepAxis::Order,
        "S" | "subsample" => SweepAxis::Subsample,
        "N" | "n" | "particles" => SweepAxis::Particles,
        other => return Err(CliError::Config(format!("unknown sweep axis `{other}` (use M, S or N)"))),
    };
    let values = list
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| CliError::Config(format!("invalid sweep value `{v}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::Config("empty sweep".into()));
    }
    Ok((axis, values))
}

fn with_value(cfg: &Config, axis: SweepAxis, value: usize) -> Config {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Order => c.gpc.order = value,
        SweepAxis::Subsample => c.particles.subsample = Some(value),
        SweepAxis::Particles => c.particles.n = value,
    }
    c
}

/// Expected temperature at `t_end` of a run without artifacts.
pub fn final_temperature(cfg: &Config) -> Result<f64> {
    let p = cfg.prepare()?;
    let ens = run(&p.initial, p.n, &p.spec, &p.solver, &mut [])?;
    Ok(expected_temperature(&ens, p.spec.space())?)
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub order: usize,
    pub subsample: usize,
    pub n: usize,
    pub replicates: usize,
    /// Mean over replicates.
    pub temperature: f64,
    pub reference: f64,
    /// Root mean square over replicates of the per-replicate error.
    pub abs_error: f64,
    pub rel_error: f64,
}

pub const SWEEP_HEADER: &str = "axis,value,M,S,N,replicates,temperature,reference,abs_error,rel_error";

/// Runs every sweep point against its reference.
///
/// Replicate `r` uses seed `seed + r` for both the swept run and a particle
/// reference, so the error excludes the sampling noise of the initial data.
pub fn convergence_sweep(cfg: &Config, axis: SweepAxis, values: &[usize]) -> Result<Vec<SweepRow>> {
    let conv = cfg.converge.clone().unwrap_or_default();
    // validate every point before the first simulation
    for &v in values {
        with_value(cfg, axis, v).prepare()?;
    }
    let mut oracle_cache: HashMap<usize, f64> = HashMap::new();
    let mut particle_cache: HashMap<(usize, usize, u64), f64> = HashMap::new();
    let mut rows = Vec::new();
    for &v in values {
        let point = with_value(cfg, axis, v);
        let (mut sum_t, mut sum_ref, mut sum_sq) = (0.0, 0.0, 0.0);
        for r in 0..conv.replicates {
            let mut rep = point.clone();
            rep.particles.seed = cfg.particles.seed.wrapping_add(r as u64);
            let t = final_temperature(&rep)?;
            let reference = match conv.reference {
                ReferenceKind::Oracle => {
                    let order = conv.reference_order.unwrap_or(rep.gpc.order);
                    match oracle_cache.get(&order) {
                        Some(&t) => t,
                        None => {
                            let mut oc = rep.clone();
                            oc.gpc.order = order;
                            oc.gpc.quad_points = None;
                            let t = oracle_final_temperature(&oc)?;
                            oracle_cache.insert(order, t);
                            t
                        }
                    }
                }
                ReferenceKind::Particles => {
                    let mut rc = rep.clone();
                    rc.particles.n = conv.reference_n.unwrap_or(rep.particles.n);
                    rc.particles.subsample = None;
                    if let Some(order) = conv.reference_order {
                        rc.gpc.order = order;
                        rc.gpc.quad_points = None;
                    }
                    let key = (rc.particles.n, rc.gpc.order, rc.particles.seed);
                    match particle_cache.get(&key) {
                        Some(&t) => t,
                        None => {
                            let t = final_temperature(&rc)?;
                            particle_cache.insert(key, t);
                            t
                        }
                    }
                }
            };
            sum_t += t;
            sum_ref += reference;
            sum_sq += (t - reference) * (t - reference);
        }
        let reps = conv.replicates as f64;
        let reference = sum_ref / reps;
        let abs_error = (sum_sq / reps).sqrt();
        rows.push(SweepRow {
            value: v,
            order: point.gpc.order,
            subsample: point.subsample(),
            n: point.particles.n,
            replicates: conv.replicates,
            temperature: sum_t / reps,
            reference,
            abs_error,
            rel_error: if reference != 0.0 { abs_error / reference.abs() } else { f64::NAN },
        });
    }
    Ok(rows)
}

pub fn run_convergence(cfg: &Config, sweep: &str) -> Result<PathBuf> {
    let (axis, values) = parse_sweep(sweep)?;
    cfg.prepare()?;
    let staging = Staging::begin(&cfg.output.dir)?;
    let rows = convergence_sweep(cfg, axis, &values)?;
    let dir = staging.path();
    write_manifest(dir, "converge", cfg, &[("sweep", sweep.to_string())])?;
    let mut text = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{:?},{:?},{:?},{:?}\n",
            axis.name(),
            r.value,
            r.order,
            r.subsample,
            r.n,
            r.replicates,
            r.temperature,
            r.reference,
            r.abs_error,
            r.rel_error
        ));
    }
    fs::write(dir.join("converge.csv"), text)?;
    staging.commit()
}

fn oracle_inputs(cfg: &Config) -> Result<(mcgpc_core::GpcBasis, mcgpc_core::UncertainScalar)> {
    let basis = match cfg.uncertainty()? {
        Uncertainty::OneD(b) => b,
        Uncertainty::TwoD(_) => return Err(CliError::Config("the oracle needs a one-dimensional input".into())),
    };
    let k = cfg
        .alignment
        .as_ref()
        .ok_or_else(|| CliError::Config("the oracle needs an [alignment] section".into()))?
        .k
        .parse()?;
    Ok((basis, k))
}

/// Expected temperature of the grid solver at `t_end`.
pub fn oracle_final_temperature(cfg: &Config) -> Result<f64> {
    let (grid, dt, (mu, sigma2)) = cfg.oracle_setup()?;
    let (basis, k) = oracle_inputs(cfg)?;
    let f0 = discretize_density(&grid, |v| bimodal_density(mu, sigma2, v))?;
    let opts = SgOptions { observe_every: usize::MAX, ..Default::default() };
    let sol = sg_homogeneous_solve_with(&f0, &k, &basis, &grid, dt, cfg.time.t_end, opts, |_| Ok(()))?;
    Ok(oracle_expected_temperature(&sol, &basis))
}

pub fn run_oracle(cfg: &Config) -> Result<PathBuf> {
    cfg.prepare()?;
    let (grid, dt, (mu, sigma2)) = cfg.oracle_setup()?;
    let (basis, k) = oracle_inputs(cfg)?;
    let f0 = discretize_density(&grid, |v| bimodal_density(mu, sigma2, v))?;
    let staging = Staging::begin(&cfg.output.dir)?;
    let dir = staging.path().to_path_buf();
    write_manifest(&dir, "oracle", cfg, &[("oracle_dt", format!("{dt:?}"))])?;

    let stride = cfg.oracle.clone().unwrap_or_default().stride;
    let mut series = String::from("t,temperature,mass\n");
    let mut first = true;
    let opts = SgOptions { observe_every: stride, ..Default::default() };
    let sol = sg_homogeneous_solve_with(&f0, &k, &basis, &grid, dt, cfg.time.t_end, opts, |s| {
        series.push_str(&format!("{:?},{:?},{:?}\n", s.time(), oracle_expected_temperature(s, &basis), s.mass()));
        if first {
            s.write_csv(&dir, "oracle_density_initial", &basis)?;
            first = false;
        }
        Ok(())
    })?;
    sol.write_csv(&dir, "oracle_density_final", &basis)?;
    fs::write(dir.join("oracle_temperature.csv"), series)?;
    staging.commit()
}

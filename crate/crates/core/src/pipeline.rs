//! End-to-end runs driven by a TOML configuration file.
//!
//! ```toml
//! mode = "both"            # solve | verify | both
//! threads = 4              # optional; FSI_THREADS overrides
//!
//! [material]
//! preset = "steel_in_water"
//!
//! [mesh]
//! sphere_level = 2         # or: file = "body.mesh"
//!
//! [incident]
//! kind = "plane_wave"
//! direction = [1.0, 0.0, 0.0]
//!
//! [pulse]
//! kind = "gaussian_sine"
//! center = 4.0
//! width = 0.3
//! carrier = 2.0
//!
//! [grid]
//! horizon = 10.0
//! steps = 128
//!
//! [observation]
//! probes = [[-3.0, 0.0, 0.0]]
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Relative paths are taken relative to the directory of the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bem::QuadratureConfig;
use crate::coupled::{solve_sweep, CouplingOperators};
use crate::cq::{CQGrid, Scheme};
use crate::error::{FsiError, Result};
use crate::field::{energy_report, reconstruct, ObservationSet, SolutionTrace};
use crate::mesh::{load_mesh, sphere_volume, LoadedMesh, SurfaceMesh, VolumeMesh};
use crate::model::{IncidentField, MaterialSystem, Pulse, TimeSignal, Vec3};
use crate::verify::{render_reports, run_selected, runner_names, VerifySetup, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Verify,
    Both,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Worker threads for the frequency sweep; all logical cores if unset.
    pub threads: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub material: MaterialConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub incident: IncidentConfig,
    pub pulse: PulseConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub quadrature: Option<QuadratureSection>,
}

fn default_mode() -> Mode {
    Mode::Solve
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Either a named preset or all five constants.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub preset: Option<String>,
    pub rho_e: Option<f64>,
    pub lame_lambda: Option<f64>,
    pub lame_mu: Option<f64>,
    pub rho_0: Option<f64>,
    pub sound_speed: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub sphere_level: Option<usize>,
    #[serde(default = "one")]
    pub radius: f64,
    /// Volume mesh in the plain-text format of `mesh::io`.
    pub file: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncidentConfig {
    PlaneWave { direction: [f64; 3] },
    PointSource { source: [f64; 3] },
}

impl Default for IncidentConfig {
    fn default() -> Self {
        IncidentConfig::PlaneWave {
            direction: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseConfig {
    GaussianSine {
        center: f64,
        width: f64,
        carrier: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    SmoothRamp {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: String,
}

fn default_scheme() -> String {
    "bdf2".into()
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    #[serde(default)]
    pub probes: Vec<[f64; 3]>,
    #[serde(default)]
    pub surface_probes: Vec<usize>,
    #[serde(default)]
    pub volume_probes: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Time steps at which the volume displacement is written as VTK.
    #[serde(default)]
    pub snapshots: Vec<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out(),
            snapshots: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Subset of the registered properties; all of them if empty.
    #[serde(default)]
    pub properties: Vec<String>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub regular_order: usize,
    pub singular_order: usize,
}

impl RunConfig {
    /// Parses and validates; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| FsiError::Config(e.to_string()))?;
        if let Some(f) = &cfg.mesh.file {
            cfg.mesh.file = Some(base.join(f));
        }
        cfg.output.dir = base.join(&cfg.output.dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FsiError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<()> {
        match (&self.mesh.sphere_level, &self.mesh.file) {
            (Some(_), Some(_)) => return Err(FsiError::Config("mesh: give either sphere_level or file, not both".into())),
            (None, None) => return Err(FsiError::Config("mesh: one of sphere_level or file is required".into())),
            (None, Some(f)) if !f.is_file() => {
                return Err(FsiError::Config(format!("mesh file {} does not exist", f.display())))
            }
            _ => {}
        }
        if !self.grid.steps.is_power_of_two() || self.grid.steps < 2 {
            return Err(FsiError::Config(format!("grid.steps must be a power of two, got {}", self.grid.steps)));
        }
        if self.threads == Some(0) {
            return Err(FsiError::Config("threads must be positive".into()));
        }
        for &n in &self.output.snapshots {
            if n > self.grid.steps {
                return Err(FsiError::Config(format!("snapshot step {n} beyond grid.steps")));
            }
        }
        let known = runner_names();
        for p in &self.verify.properties {
            if !known.contains(&p.as_str()) {
                return Err(FsiError::Config(format!("unknown property {p}")));
            }
        }
        self.grid()?;
        self.material()?;
        self.incident()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<CQGrid> {
        CQGrid::new(self.grid.horizon, self.grid.steps, self.grid.scheme.parse::<Scheme>()?)
    }

    pub fn material(&self) -> Result<MaterialSystem> {
        let m = &self.material;
        let horizon = self.grid.horizon;
        match m.preset.as_deref() {
            Some("steel_in_water") => Ok(MaterialSystem::steel_in_water(horizon)),
            Some(other) => Err(FsiError::Config(format!("unknown material preset {other}"))),
            None => {
                let get = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| FsiError::Config(format!("material.{name} is required without a preset")))
                };
                MaterialSystem::new(
                    get(m.rho_e, "rho_e")?,
                    get(m.lame_lambda, "lame_lambda")?,
                    get(m.lame_mu, "lame_mu")?,
                    get(m.rho_0, "rho_0")?,
                    get(m.sound_speed, "sound_speed")?,
                    horizon,
                )
            }
        }
    }

    pub fn pulse(&self) -> Pulse {
        match self.pulse {
            PulseConfig::GaussianSine {
                center,
                width,
                carrier,
                amplitude,
            } => Pulse::GaussianSine {
                center,
                width,
                carrier,
                amplitude,
            },
            PulseConfig::SmoothRamp { center, width, amplitude } => Pulse::SmoothRamp { center, width, amplitude },
        }
    }

    pub fn incident(&self) -> Result<IncidentField> {
        let c = self.material()?.sound_speed;
        match self.incident {
            IncidentConfig::PlaneWave { direction } => IncidentField::plane_wave(direction.into(), self.pulse(), c),
            IncidentConfig::PointSource { source } => IncidentField::point_source(source.into(), self.pulse(), c),
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        self.quadrature.map_or_else(QuadratureConfig::default, |q| QuadratureConfig {
            regular_order: q.regular_order,
            singular_order: q.singular_order,
        })
    }

    pub fn meshes(&self) -> Result<(SurfaceMesh, VolumeMesh)> {
        if let Some(level) = self.mesh.sphere_level {
            return sphere_volume(level, self.mesh.radius);
        }
        let path = self.mesh.file.as_ref().expect("validated");
        match load_mesh(path)? {
            LoadedMesh::Volume(s, v) => Ok((s, v)),
            LoadedMesh::Surface(_) => Err(FsiError::Config(format!(
                "{} holds a surface mesh; the solid needs a volume mesh",
                path.display()
            ))),
        }
    }

    pub fn observation(&self) -> ObservationSet {
        ObservationSet {
            exterior_points: self.observation.probes.iter().map(|p| Vec3::from(*p)).collect(),
            surface_probes: self.observation.surface_probes.clone(),
            volume_probes: self.observation.volume_probes.clone(),
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// `Some(all_pass)` when verification ran.
    pub verified: Option<bool>,
}

impl RunOutcome {
    /// 0 on success, 2 when verification failed.
    pub fn exit_code(&self) -> i32 {
        if self.verified == Some(false) {
            2
        } else {
            0
        }
    }
}

/// Thread count: `FSI_THREADS` first, then the config.
pub fn thread_count(cfg: &RunConfig) -> Result<Option<usize>> {
    match std::env::var("FSI_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(FsiError::Config(format!("FSI_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(cfg.threads),
    }
}

/// Runs the configured mode inside a pool of the requested size.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cfg)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| FsiError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &RunConfig) -> Result<RunOutcome> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| FsiError::io(dir, e))?;
    let (surface, volume) = cfg.meshes()?;
    let mat = cfg.material()?;
    let incident = cfg.incident()?;
    let grid = cfg.grid()?;
    let mut report = String::new();
    let mut files = Vec::new();
    let _ = writeln!(report, "[run]");
    let _ = writeln!(report, "mode = {:?}", cfg.mode);
    let _ = writeln!(report, "surface = {} vertices, {} triangles", surface.n_vertices(), surface.n_triangles());
    let _ = writeln!(report, "volume = {} vertices, {} tetrahedra", volume.n_vertices(), volume.n_tetrahedra());
    let _ = writeln!(report, "grid = T {}, N {}, {:?}", grid.horizon(), grid.n_steps(), grid.scheme());
    let _ = writeln!(report);

    if cfg.mode != Mode::Verify {
        let ops = CouplingOperators::new(&surface, &volume, &mat, cfg.quadrature())?;
        let obs = cfg.observation();
        let sweep = solve_sweep(&ops, &grid, &incident)?;
        let trace = reconstruct(&sweep, &grid, &obs, &ops, &incident)?;
        files.extend(write_traces(dir, &obs, &ops, &trace)?);
        for &n in &cfg.output.snapshots {
            let path = dir.join(format!("snapshot_{n}.vtk"));
            write_file(&path, &snapshot_vtk(&volume, &trace, n))?;
            files.push(path);
        }
        let energy = energy_report(&trace, &ops.fem);
        let _ = writeln!(report, "[solve]");
        let _ = writeln!(report, "frequencies = {}", sweep.solutions.len() + usize::from(sweep.start.is_some()));
        let _ = writeln!(report, "imaginary_residue = {:.3e}", trace.imaginary_residue);
        let _ = writeln!(report, "max_solid_energy = {:.6e}", energy.iter().cloned().fold(0.0, f64::max));
        for (k, p) in obs.exterior_points.iter().enumerate() {
            let _ = writeln!(
                report,
                "probe {k} at ({}, {}, {}): peak scattered pressure {:.6e}",
                p.x,
                p.y,
                p.z,
                column_peak(&trace.pressure, k)
            );
        }
        let _ = writeln!(report);
    }

    let mut verified = None;
    if cfg.mode != Mode::Solve {
        let mut setup = match cfg.mesh.sphere_level {
            Some(level) if cfg.mesh.radius == 1.0 => VerifySetup::sphere(level, mat, incident, grid)?,
            _ => VerifySetup::from_meshes(surface, volume, mat, incident, grid),
        };
        setup.seed = cfg.seed;
        setup.quadrature = cfg.quadrature();
        if !cfg.observation.probes.is_empty() {
            setup.probes = cfg.observation().exterior_points;
        }
        let names: Vec<&str> = if cfg.verify.properties.is_empty() {
            runner_names()
        } else {
            cfg.verify.properties.iter().map(String::as_str).collect()
        };
        let reports = run_selected(&setup, &names);
        verified = Some(reports.iter().all(|r| r.ok()));
        report.push_str(&render_reports(&reports));
        for r in &reports {
            if !r.rows.is_empty() {
                let path = dir.join(format!("property_{}.csv", r.name));
                write_file(&path, &r.csv())?;
                files.push(path);
            }
        }
    }

    let path = dir.join("report.txt");
    write_file(&path, &report)?;
    files.push(path);
    Ok(RunOutcome { files, verified })
}

fn column_peak(sig: &TimeSignal, k: usize) -> f64 {
    (0..=sig.n_steps()).map(|n| sig.row(n)[k].abs()).fold(0.0, f64::max)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| FsiError::io(path, e))
}

fn csv(header: &[&str], sig: &TimeSignal) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "t,{}", header.join(","));
    for n in 0..=sig.n_steps() {
        let _ = write!(out, "{:e}", sig.time(n));
        for v in sig.row(n) {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

fn stack(parts: &[TimeSignal]) -> TimeSignal {
    let width = parts.iter().map(TimeSignal::width).sum();
    let first = &parts[0];
    TimeSignal::from_fn(first.dt(), first.n_steps(), width, |t, out| {
        let n = (t / first.dt()).round() as usize;
        let mut at = 0;
        for p in parts {
            out[at..at + p.width()].copy_from_slice(p.row(n));
            at += p.width();
        }
    })
}

/// One CSV per probe: `trace_p<k>.csv` for exterior points,
/// `trace_s<v>.csv` for surface vertices, `trace_v<v>.csv` for volume
/// vertices.
fn write_traces(dir: &Path, obs: &ObservationSet, ops: &CouplingOperators, trace: &SolutionTrace) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut emit = |name: String, header: &[&str], sig: TimeSignal| -> Result<()> {
        let path = dir.join(format!("trace_{name}.csv"));
        write_file(&path, &csv(header, &sig))?;
        files.push(path);
        Ok(())
    };
    for k in 0..obs.exterior_points.len() {
        emit(
            format!("p{k}"),
            &["scattered_potential", "scattered_pressure", "incident_pressure"],
            stack(&[trace.exterior.columns(&[k]), trace.pressure.columns(&[k]), trace.incident_pressure.columns(&[k])]),
        )?;
    }
    for &v in &obs.surface_probes {
        emit(
            format!("s{v}"),
            &["phi", "lambda"],
            stack(&[trace.surface_phi(v), trace.surface_lambda(&ops.surface, v)]),
        )?;
    }
    for &v in &obs.volume_probes {
        let u = trace.volume_probe(v);
        let vel = TimeSignal::from_fn(trace.velocity.dt(), trace.velocity.n_steps(), 3, |t, out| {
            let n = (t / trace.velocity.dt()).round() as usize;
            out.copy_from_slice(&trace.velocity.row(n)[3 * v..3 * v + 3]);
        });
        emit(format!("v{v}"), &["u_x", "u_y", "u_z", "v_x", "v_y", "v_z"], stack(&[u, vel]))?;
    }
    Ok(files)
}

/// Legacy VTK unstructured grid with the displacement at step `n`.
pub fn snapshot_vtk(volume: &VolumeMesh, trace: &SolutionTrace, n: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "displacement at t = {:e}", trace.displacement.time(n));
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", volume.n_vertices());
    for p in volume.vertices() {
        let _ = writeln!(out, "{:e} {:e} {:e}", p.x, p.y, p.z);
    }
    let nt = volume.n_tetrahedra();
    let _ = writeln!(out, "CELLS {} {}", nt, 5 * nt);
    for t in volume.tetrahedra() {
        let _ = writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "10");
    }
    let _ = writeln!(out, "POINT_DATA {}", volume.n_vertices());
    let _ = writeln!(out, "VECTORS displacement double");
    let u = trace.displacement.row(n);
    for v in 0..volume.n_vertices() {
        let _ = writeln!(out, "{:e} {:e} {:e}", u[3 * v], u[3 * v + 1], u[3 * v + 2]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[material]
preset = "steel_in_water"
[mesh]
sphere_level = 1
[pulse]
kind = "gaussian_sine"
center = 3.0
width = 0.3
carrier = 2.0
[grid]
horizon = 6.0
steps = 16
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::parse(BASE, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.mode, Mode::Solve);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.output.dir, Path::new("/tmp/out"));
        assert_eq!(cfg.grid().unwrap().n_steps(), 16);
    }

    #[test]
    fn steps_must_be_power_of_two() {
        let text = BASE.replace("steps = 16", "steps = 100");
        let err = RunConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, FsiError::Config(_)));
        assert!(err.to_string().contains("power of two"));
    }

    #[test]
    fn missing_mesh_names_the_path() {
        let text = BASE.replace("sphere_level = 1", "file = \"nowhere/body.mesh\"");
        let err = RunConfig::parse(&text, Path::new("/tmp")).unwrap_err();
        assert!(err.to_string().contains("nowhere/body.mesh"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}\n[extra]\nx = 1\n");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn explicit_material_needs_every_constant() {
        let text = BASE.replace("preset = \"steel_in_water\"", "rho_e = 7.85\nlame_lambda = 50.0");
        let err = RunConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("lame_mu"), "{err}");
    }

    #[test]
    fn unknown_property_is_a_config_error() {
        let text = format!("{BASE}\n[verify]\nproperties = [\"no_such_check\"]\n");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn exit_codes() {
        let ok = RunOutcome {
            files: vec![],
            verified: Some(true),
        };
        let bad = RunOutcome {
            files: vec![],
            verified: Some(false),
        };
        assert_eq!(ok.exit_code(), 0);
        assert_eq!(bad.exit_code(), 2);
    }
}

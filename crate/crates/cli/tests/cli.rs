use std::path::Path;
use std::process::{Command, Output};

use fsi_core::mesh::{load_mesh, LoadedMesh};

fn fsi(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fsi"));
    cmd.args(args).env_remove("FSI_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn config(dir: &Path, mesh: &str, steps: usize, extra: &str) -> String {
    let text = format!(
        r#"
mode = "solve"

[material]
preset = "steel_in_water"

[mesh]
{mesh}

[pulse]
kind = "gaussian_sine"
center = 3.0
width = 0.3
carrier = 2.0

[grid]
horizon = 6.0
steps = {steps}

[observation]
probes = [[-3.0, 0.0, 0.0]]
surface_probes = [0]
volume_probes = [0]

{extra}
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn mesh_command_writes_a_readable_volume_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sphere.mesh");
    let o = fsi(&["mesh", "--sphere-level", "1", "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    match load_mesh(&out).unwrap() {
        LoadedMesh::Volume(s, v) => {
            assert_eq!(s.n_triangles(), 32);
            assert!(v.n_tetrahedra() > 0);
        }
        LoadedMesh::Surface(_) => panic!("expected a volume mesh"),
    }
}

#[test]
fn non_power_of_two_steps_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "sphere_level = 1", 100, "");
    let o = fsi(&["run", &cfg], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("power of two"));
}

#[test]
fn missing_mesh_file_exit_1_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "file = \"missing/body.mesh\"", 16, "");
    let o = fsi(&["run", &cfg], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing/body.mesh"));
}

#[test]
fn bad_thread_override_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "sphere_level = 1", 16, "");
    let o = fsi(&["run", &cfg], &[("FSI_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FSI_THREADS"));
}

#[test]
fn solve_writes_traces_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("body.mesh");
    let o = fsi(&["mesh", "--sphere-level", "1", "--out", mesh_path.to_str().unwrap()], &[]);
    assert!(o.status.success());
    let cfg = config(dir.path(), "file = \"body.mesh\"", 16, "[output]\ndir = \"a\"\nsnapshots = [16]");
    let o = fsi(&["run", &cfg], &[("FSI_THREADS", "1")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg_b = config(dir.path(), "file = \"body.mesh\"", 16, "[output]\ndir = \"b\"");
    let o = fsi(&["run", &cfg_b], &[("FSI_THREADS", "2")]);
    assert_eq!(o.status.code(), Some(0));

    for name in ["trace_p0.csv", "trace_s0.csv", "trace_v0.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let trace = std::fs::read_to_string(dir.path().join("a/trace_p0.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t,scattered_potential,scattered_pressure,incident_pressure"));
    assert_eq!(lines.count(), 17);
    assert!(dir.path().join("a/snapshot_16.vtk").is_file());
    let report = std::fs::read_to_string(dir.path().join("a/report.txt")).unwrap();
    assert!(report.contains("imaginary_residue"));
}

#[test]
fn verify_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "sphere_level = 1",
        16,
        "[verify]\nproperties = [\"v_symmetry\", \"bio_conjugation\", \"cq_order\"]",
    );
    let o = fsi(&["verify", &cfg], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("summary = 3 properties, 0 failed, verdict all-pass"), "{report}");
    assert!(!dir.path().join("out/trace_p0.csv").exists());
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gomt::cli::{
    run_ensemble, run_ground_cost, run_steer, run_transport, Scenario, Verdict, TRAJECTORY_HEADER,
};
use gomt::rigid_body::InertiaBody;
use gomt::steering::{integrate, SteeringPolicy};
use gomt::StateVec;
use serde_json::Value;
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn gomt(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gomt"));
    cmd.args(args).env_remove("GOMT_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn gomt")
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const REST: &str = r#"
task = "steer"
horizon = 1.5

[body]
inertia = [1.0, 2.0, 3.0]

[endpoints]
mode = "fixed"
x0 = [0.0, 0.7, 0.0]
x_f = [0.0, 0.7, 0.0]

[settings]
policy = "feasible-ustar"
step = 1e-3
"#;

#[test]
fn reference_scenario_writes_trajectory_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("reference_steer");
    let scenario = scenarios().join("reference_steer.toml");
    let o = gomt(
        &[scenario.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,x3,u1,u2,u3,znorm,cost"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2001);
    assert!(rows.iter().all(|r| r.len() == 9));
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows.last().unwrap()[0], 2.0);

    let summary = read_json(&out.join("steer.json"));
    assert!(summary["terminal_error"].as_f64().unwrap() <= 1e-3);
    let last = rows.last().unwrap();
    assert_eq!(summary["total_cost"].as_f64().unwrap(), last[8]);
    assert!(summary["norm_law_deviation"].as_f64().unwrap() < 1e-5);
}

#[test]
fn equilibrium_steer_costs_nothing() {
    let tmp = TempDir::new().unwrap();
    let s = Scenario::from_toml(REST).unwrap();
    let summary = run_steer(&s, tmp.path()).unwrap();
    assert_eq!(summary.total_cost, 0.0);
    assert!(summary.terminal_error <= 1e-12);
    let text = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(text.starts_with(TRAJECTORY_HEADER));
}

#[test]
fn norm_law_is_tight_at_fine_step() {
    let tmp = TempDir::new().unwrap();
    let mut s = Scenario::load(&scenarios().join("reference_steer.toml")).unwrap();
    s.settings.step = Some(1e-4);
    let summary = run_steer(&s, tmp.path()).unwrap();
    assert!(summary.norm_law_deviation.unwrap() <= 1e-6);
}

#[test]
fn reference_ground_cost_reports_bounds() {
    let tmp = TempDir::new().unwrap();
    let s = Scenario::load(&scenarios().join("reference_ground_cost.toml")).unwrap();
    let g = run_ground_cost(&s, tmp.path()).unwrap();
    assert_eq!(g.upper_bound, 1.125);
    assert!(g.norm_invariant.is_none());
    assert_eq!(g.verdict, Verdict::Sandwiched);
    assert!(g.numeric_cost <= g.upper_bound);
    assert!(g.numeric_cost <= g.ustar_cost + 1e-6);
    let json = read_json(&tmp.path().join("ground_cost.json"));
    assert_eq!(json["upper_bound"], 1.125);
    assert_eq!(json["verdict"], "sandwiched");
}

#[test]
fn rest_target_is_equality_certified() {
    let tmp = TempDir::new().unwrap();
    let s = Scenario::load(&scenarios().join("rest_ground_cost.toml")).unwrap();
    let g = run_ground_cost(&s, tmp.path()).unwrap();
    let x0 = StateVec::new(0.6, -0.3, 0.5);
    let exact = x0.norm_squared() / 4.0;
    assert!((g.numeric_cost - exact).abs() <= 0.01 * exact);
    assert_eq!(g.verdict, Verdict::EqualityCertified);
    assert_eq!(g.norm_invariant, Some(exact));
}

#[test]
fn equilibrium_ground_cost_is_all_zero() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
task = "ground-cost"
horizon = 2.0

[body]
inertia = [1.0, 2.0, 3.0]

[endpoints]
mode = "fixed"
x0 = [0.0, 0.0, 0.0]
x_f = [0.0, 0.0, 0.0]
"#;
    let g = run_ground_cost(&Scenario::from_toml(text).unwrap(), tmp.path()).unwrap();
    for v in [
        g.classical,
        g.norm_invariant.unwrap(),
        g.upper_bound,
        g.lower_bound,
        g.ustar_cost,
        g.numeric_cost,
    ] {
        assert_eq!(v, 0.0);
    }
}

const GAUSS: &str = r#"
task = "transport"
horizon = 2.0
seed = 3

[body]
inertia = [1.0, 2.0, 3.0]

[endpoints]
mode = "sampled"

[endpoints.source]
mean = [0.0, 0.0, 0.0]
variances = [0.01, 0.01, 0.01]
count = 40
seed = 17

[endpoints.target]
mean = [0.0, 0.0, 0.0]
variances = [0.01, 0.01, 0.01]
count = 40
seed = 17

[settings]
cost = "classical"
"#;

#[test]
fn identical_samples_transport_for_free() {
    let tmp = TempDir::new().unwrap();
    let t = run_transport(&Scenario::from_toml(GAUSS).unwrap(), tmp.path()).unwrap();
    assert_eq!(t.coupling.transport_cost, 0.0);
    let coupling = fs::read_to_string(tmp.path().join("coupling.csv")).unwrap();
    let mut lines = coupling.lines();
    assert_eq!(lines.next(), Some("i,j,mass,cost"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], f[1]);
    }
    for name in [
        "source.csv",
        "target.csv",
        "cost_matrix.csv",
        "transport.json",
    ] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn gaussian_shift_costs_squared_mean_gap() {
    let tmp = TempDir::new().unwrap();
    let s = Scenario::load(&scenarios().join("gaussian_classical.toml")).unwrap();
    let t = run_transport(&s, tmp.path()).unwrap();
    assert!(
        (t.coupling.transport_cost - 0.25).abs() <= 0.025,
        "{}",
        t.coupling.transport_cost
    );
    assert!(t.coupling.row_residual <= 1e-9 && t.coupling.col_residual <= 1e-9);
}

#[test]
fn sinkhorn_and_exact_agree_on_a_scenario() {
    let base = GAUSS
        .replace("mean = [0.0, 0.0, 0.0]\nvariances = [0.01, 0.01, 0.01]\ncount = 40\nseed = 17\n\n[settings]", "mean = [0.0, 1.0, 0.0]\nvariances = [0.01, 0.01, 0.01]\ncount = 40\nseed = 18\n\n[settings]")
        .replace("count = 40", "count = 30");
    let exact_dir = TempDir::new().unwrap();
    let exact = run_transport(&Scenario::from_toml(&base).unwrap(), exact_dir.path()).unwrap();
    assert!(exact.coupling.transport_cost > 0.1);

    let matrix = fs::read_to_string(exact_dir.path().join("cost_matrix.csv")).unwrap();
    let mut costs: Vec<f64> = matrix
        .lines()
        .skip(2)
        .flat_map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().unwrap())
                .collect::<Vec<_>>()
        })
        .collect();
    costs.sort_by(f64::total_cmp);
    let median = 0.5 * (costs[costs.len() / 2 - 1] + costs[costs.len() / 2]);
    let floor = 1e-3 * median;
    let sink_text =
        format!("{base}solver = \"sinkhorn\"\n\n[settings.sinkhorn]\nepsilon = {floor:e}\n");
    let sink_dir = TempDir::new().unwrap();
    let sink = run_transport(&Scenario::from_toml(&sink_text).unwrap(), sink_dir.path()).unwrap();
    assert_eq!(sink.coupling.solver, "sinkhorn");
    let gap = (sink.coupling.transport_cost - exact.coupling.transport_cost).abs()
        / exact.coupling.transport_cost;
    assert!(gap <= 0.01, "gap {gap}");
    let json = read_json(&sink_dir.path().join("transport.json"));
    assert!(json["epsilon"].as_f64().unwrap() > 0.0);
}

#[test]
fn norm_invariant_ensemble_matches_transport_cost() {
    let tmp = TempDir::new().unwrap();
    let s = Scenario::load(&scenarios().join("ensemble_norminv.toml")).unwrap();
    let e = run_ensemble(&s, tmp.path()).unwrap();
    assert!(e.failures.is_empty());
    assert!((0.99..=1.01).contains(&e.cost_ratio), "{}", e.cost_ratio);
    let terminal = fs::read_to_string(tmp.path().join("terminal.csv")).unwrap();
    assert_eq!(terminal.lines().count(), e.steered_pairs + 1);
    assert!(tmp.path().join("ensemble.json").exists());
}

#[test]
fn large_ensemble_matches_target_second_moment() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(scenarios().join("ensemble_norminv.toml"))
        .unwrap()
        .replace("count = 100", "count = 500");
    let s = Scenario::from_toml(&text).unwrap();
    let e = run_ensemble(&s, tmp.path()).unwrap();
    let rel = (e.terminal_second_moment - e.target_second_moment).abs() / e.target_second_moment;
    assert!(rel <= 0.05, "{rel}");
}

#[test]
fn point_mass_ensemble_reduces_to_single_steer() {
    let text = r#"
task = "ensemble"
horizon = 2.0
seed = 1

[body]
inertia = [1.0, 2.0, 3.0]

[endpoints]
mode = "sampled"

[endpoints.source]
mean = [1.0, 0.0, 0.5]
variances = [1e-30, 1e-30, 1e-30]
count = 1

[endpoints.target]
mean = [0.0, 1.0, 0.0]
variances = [1e-30, 1e-30, 1e-30]
count = 1

[settings]
cost = "euler-bounded"
policy = "feasible-ustar"
step = 1e-3
"#;
    let s = Scenario::from_toml(text).unwrap();
    let tmp = TempDir::new().unwrap();
    let e = run_ensemble(&s, tmp.path()).unwrap();
    let (src, dst) = s.sampled_endpoints().unwrap();
    let body = InertiaBody::new([1.0, 2.0, 3.0]).unwrap();
    let (x0, xf) = (src.support()[0], dst.support()[0]);
    let single = integrate(
        &body,
        &SteeringPolicy::feasible(&body, &x0, &xf, 2.0).unwrap(),
        &x0,
        1e-3,
    )
    .unwrap();
    assert_eq!(e.realized_cost, single.cost());
    assert_eq!(e.max_terminal_error, single.terminal_error());
}

#[test]
fn output_dir_from_environment_and_seed_flag() {
    let tmp = TempDir::new().unwrap();
    let scenario = scenarios().join("gaussian_classical.toml");
    let a = tmp.path().join("a");
    let o = gomt(&[scenario.to_str().unwrap()], &[("GOMT_OUTPUT_DIR", &a)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(a.join("coupling.csv").exists());

    let b = tmp.path().join("b");
    let o = gomt(
        &[
            scenario.to_str().unwrap(),
            "--seed",
            "12",
            "--out",
            b.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert_ne!(
        fs::read(a.join("source.csv")).unwrap(),
        fs::read(b.join("source.csv")).unwrap()
    );
}

#[test]
fn bad_configs_exit_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let typo = write_scenario(
        tmp.path(),
        "typo.toml",
        &REST.replace("horizon = 1.5", "horizon = 1.5\nhorizn = 1.0"),
    );
    let missing = write_scenario(
        tmp.path(),
        "missing.toml",
        &REST.replace("policy = \"feasible-ustar\"\n", ""),
    );
    let both = write_scenario(
        tmp.path(),
        "both.toml",
        &GAUSS.replacen("variances = [0.01, 0.01, 0.01]", "variances = [0.01, 0.01, 0.01]\ncovariance = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]", 1),
    );
    for path in [typo, missing, both] {
        let o = gomt(
            &[path.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[],
        );
        assert_eq!(
            o.status.code(),
            Some(2),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert!(!out.exists());
}

#[test]
fn missing_scenario_file_is_not_a_success() {
    let o = gomt(&["/nonexistent/scenario.toml"], &[]);
    assert!(!o.status.success());
}

//! Acceptance run on the shipped configuration. Prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use nsring::config::RunConfig;
use nsring::euler2d::{mode_operator, solve_stream_mode, Weight};
use nsring::numerics::linalg::dense_eigenvalues;
use nsring::numerics::{Mapping, RadialGrid};
use nsring::pipeline::{Certificate, Command, Pipeline, Stage, EXIT_OK};
use nsring::profiles::VortexProfile;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

const CONJUGATE_TOL: f64 = 1e-8;
const GREEN_TOL: f64 = 1e-6;

/// Criterion id, name, certificate stage, check names, timed stages and
/// runtime limit in minutes.
type Criterion = (usize, &'static str, Stage, &'static [&'static str], &'static [Stage], f64);

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn minutes(m: f64) -> f64 {
    m * 60.0
}

fn main() {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&root);
    let (dir_a, dir_b) = (root.join("run_a"), root.join("run_b"));
    let cfg = RunConfig::default();
    let mut outcomes = Vec::new();

    let t0 = Instant::now();
    let (ok1, detail1) = mode_operator_oracles(&cfg);
    let oracle_secs = t0.elapsed().as_secs_f64();

    let mut pipeline = Pipeline::new(cfg.clone(), Some(dir_a.clone()), Some(1)).expect("output directory");
    let mut secs = BTreeMap::new();
    let mut exit = EXIT_OK;
    for stage in Stage::ALL {
        let t = Instant::now();
        let report = pipeline.run(Command::Stage(stage)).expect("artifacts written");
        secs.insert(stage, t.elapsed().as_secs_f64());
        eprintln!("  {:<13} {:>7.1}s exit {}", stage.name(), secs[&stage], report.exit_code);
        if report.exit_code != EXIT_OK {
            exit = report.exit_code;
            break;
        }
    }
    let time = |stages: &[Stage]| stages.iter().map(|s| secs.get(s).copied().unwrap_or(f64::NAN)).sum::<f64>();

    let search = pipeline.certificate(Stage::Search2d);
    let pipeline_checks = checks(search, &["zero_mode_norm", "conjugate_mode_gap"]);
    let t1 = oracle_secs + time(&[Stage::Search2d]);
    outcomes.push(Outcome {
        id: 1,
        name: "mode-operator correctness",
        passed: ok1 && pipeline_checks.0 && t1 < minutes(1.0),
        detail: format!("{detail1}; {}; {t1:.1}s", pipeline_checks.1),
    });

    let criteria: [Criterion; 7] = [
        (2, "truncation continuation", Stage::Truncate, &["distance_decreasing", "min_riesz_rank"], &[Stage::Truncate], 10.0),
        (
            3,
            "axisymmetric smallness and continuation",
            Stage::AxisymSweep,
            &["s_norm_slope", "distance_decreasing", "m_skew_defect", "min_riesz_rank"],
            &[Stage::AxisymSweep],
            30.0,
        ),
        (4, "stream-function convergence", Stage::AxisymSweep, &["stream_slope"], &[Stage::AxisymSweep], 10.0),
        (
            5,
            "similarity-layer identity",
            Stage::BetaSweep,
            &["eigenvalue_identity_gap", "distance_decreasing", "resolvent_over_bound"],
            &[Stage::BetaSweep],
            30.0,
        ),
        (
            6,
            "semigroup bounds",
            Stage::Semigroup,
            &["heat_oracle_error", "t_beta_growth_gap", "l_vor_growth_gap", "smoothing_constant"],
            &[Stage::Semigroup],
            20.0,
        ),
        (
            7,
            "fixed point",
            Stage::Manifold,
            &[
                "converged",
                "max_difference_ratio",
                "uper_weighted_norm",
                "refined_decay_exponent",
                "consistency_snapshots",
                "consistency_over_order_scale",
            ],
            &[Stage::Manifold],
            120.0,
        ),
        (
            8,
            "physical verification",
            Stage::Verify,
            &[
                "ubar_velocity_residual",
                "ubar_energy_gap",
                "ubar_energy_shrink",
                "u_energy_gap",
                "self_similar_column_variation",
                "distinctness_exponent_gap",
            ],
            &[Stage::Verify],
            30.0,
        ),
    ];
    for (id, name, stage, names, timed, limit) in criteria {
        let cert = pipeline.certificate(stage);
        let (ok, detail) = checks(cert, names);
        let cert_ok = cert.is_some_and(|c| c.passed);
        let t = time(timed);
        outcomes.push(Outcome {
            id,
            name,
            passed: ok && cert_ok && t < minutes(limit),
            detail: format!("{detail}; stage {}; {t:.1}s < {limit} min", if cert_ok { "passed" } else { "failed" }),
        });
    }

    let t = Instant::now();
    let rerun = Pipeline::new(cfg, Some(dir_b.clone()), Some(3))
        .and_then(|mut p| p.run(Command::FullPipeline))
        .expect("artifacts written");
    let (same, detail9) = compare_runs(&dir_a, &dir_b);
    outcomes.push(Outcome {
        id: 9,
        name: "determinism",
        passed: exit == EXIT_OK && rerun.exit_code == EXIT_OK && same,
        detail: format!("{detail9}; rerun with 3 workers {:.1}s", t.elapsed().as_secs_f64()),
    });

    outcomes.sort_by_key(|o| o.id);
    let mut failed = 0;
    for o in &outcomes {
        println!("criterion {} {:<40} {} ({})", o.id, o.name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed; artifacts in {}", outcomes.len() - failed, outcomes.len(), root.display());
    if failed > 0 {
        std::process::exit(1);
    }
}

/// All named checks present and passed; detail lists their values.
fn checks(cert: Option<&Certificate>, names: &[&str]) -> (bool, String) {
    let Some(cert) = cert else {
        return (false, "stage did not run".into());
    };
    if let Some(e) = &cert.error {
        return (false, format!("stage error: {e}"));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for name in names {
        match cert.checks.iter().find(|c| c.name == *name) {
            Some(c) => {
                ok &= c.passed;
                parts.push(format!("{} {:.4e} {} {:.4e}", c.name, c.value, c.relation, c.bound));
            }
            None => {
                ok = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    (ok, parts.join(", "))
}

/// Independent checks of the 2D mode operator: the zero mode vanishes,
/// `A^{(-n)}` has the conjugate spectrum of `A^{(n)}`, and the stream solve
/// matches the closed-form Green's-function solution.
fn mode_operator_oracles(cfg: &RunConfig) -> (bool, String) {
    let profile: VortexProfile = cfg.profile().expect("shipped profile is valid");
    let grid = RadialGrid::new(cfg.search.n_rho, cfg.search.rho_max, Mapping::Geometric).unwrap();

    let a0 = mode_operator(&profile, &grid, 0, Weight::Plain);
    let a0_max = a0.total.col_iter().flat_map(|c| c.iter().map(|z| z.norm()).collect::<Vec<_>>()).fold(0.0, f64::max);

    let mut conj_gap = 0.0f64;
    for n in [2i64, 4, 6] {
        let plus = dense_eigenvalues(mode_operator(&profile, &grid, n, Weight::Plain).total.as_ref()).unwrap();
        let minus = dense_eigenvalues(mode_operator(&profile, &grid, -n, Weight::Plain).total.as_ref()).unwrap();
        let scale = plus.iter().map(|l| l.norm()).fold(1.0, f64::max);
        for l in &plus {
            let d = minus.iter().map(|m| (m - l.conj()).norm()).fold(f64::INFINITY, f64::min);
            conj_gap = conj_gap.max(d / scale);
        }
    }

    let mut green = 0.0f64;
    for k in 1..=3usize {
        let g: Vec<f64> = grid.sample(|r| r.powi(k as i32) * (-r * r).exp());
        let f = solve_stream_mode(&grid, k as i64, &g).unwrap();
        let exact: Vec<f64> = grid.sample(|r| green_solution(k, r));
        let scale = exact.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = f.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        green = green.max(err);
    }

    let ok = a0_max == 0.0 && conj_gap <= CONJUGATE_TOL && green <= GREEN_TOL;
    (ok, format!("A0 max {a0_max:e}, conjugate gap {conj_gap:.2e}, green oracle {green:.2e}"))
}

/// Decaying solution of `f'' + f'/ρ − k²f/ρ² = ρ^k e^{−ρ²}`:
/// `f = −(2k)^{-1} [ρ^{−k} ∫_0^ρ s^{k+1} g + ρ^k ∫_ρ^∞ s^{1−k} g]`, with
/// `∫_0^ρ s^{2k+1} e^{−s²} ds = ½ γ(k+1, ρ²)` and `∫_ρ^∞ s e^{−s²} ds = ½ e^{−ρ²}`.
fn green_solution(k: usize, r: f64) -> f64 {
    let x = r * r;
    let kf = k as f64;
    let inner = 0.5 * lower_gamma_int(k, x);
    -(r.powi(-(k as i32)) * inner + r.powi(k as i32) * 0.5 * (-x).exp()) / (2.0 * kf)
}

/// `γ(k+1, x)` for integer `k`: the series `e^{−x} Σ_{j>k} x^j k!/j!` for
/// small `x` (no cancellation), the closed form `k!(1 − e^{−x} Σ_{j≤k} x^j/j!)`
/// otherwise.
fn lower_gamma_int(k: usize, x: f64) -> f64 {
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    if x < 2.0 + k as f64 {
        let mut term = x.powi(k as i32 + 1) / (k as f64 + 1.0);
        let mut sum = 0.0;
        let mut j = k + 1;
        while term > 1e-18 * sum || sum == 0.0 {
            sum += term;
            j += 1;
            term *= x / j as f64;
            if term == 0.0 {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0;
        let mut partial = 1.0;
        for j in 1..=k {
            term *= x / j as f64;
            partial += term;
        }
        fact * (1.0 - (-x).exp() * partial)
    }
}

/// Byte comparison of every artifact. `report.json` differs only in the
/// command name (stage-by-stage versus full pipeline), so its `stages`
/// and `exit_code` are compared instead.
fn compare_runs(a: &Path, b: &Path) -> (bool, String) {
    let list = |d: &Path| -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v
    };
    let (fa, fb) = (list(a), list(b));
    let names = |v: &[PathBuf]| -> Vec<String> {
        v.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect()
    };
    if names(&fa) != names(&fb) {
        return (false, format!("file sets differ: {:?} vs {:?}", names(&fa), names(&fb)));
    }
    let mut differing = Vec::new();
    for (pa, pb) in fa.iter().zip(&fb) {
        let name = pa.file_name().unwrap().to_string_lossy().into_owned();
        let (ba, bb) = (std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        let same = if name == "report.json" {
            let ja: serde_json::Value = serde_json::from_slice(&ba).unwrap();
            let jb: serde_json::Value = serde_json::from_slice(&bb).unwrap();
            ja["stages"] == jb["stages"] && ja["exit_code"] == jb["exit_code"] && ja["stamp"] == jb["stamp"]
        } else {
            ba == bb
        };
        if !same {
            differing.push(name);
        }
    }
    if differing.is_empty() {
        (true, format!("{} artifacts byte-identical", fa.len()))
    } else {
        (false, format!("differing: {}", differing.join(", ")))
    }
}

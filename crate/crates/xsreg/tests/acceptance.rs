//! Acceptance suite: one PASS/FAIL line per criterion and a summary line.
//! Runs without the libtest harness so the lines always appear in
//! `cargo test` output. A failing criterion makes the exit status nonzero
//! only when `XSREG_ACCEPTANCE_STRICT` is set, so the suite reports results
//! without blocking the rest of the workspace tests.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xsreg::WallClock;
use xsreg_core::affinity::AffinityMode;
use xsreg_core::assignment::solve_lap;
use xsreg_core::bench::{run_benchmark, BenchConfig, Method};
use xsreg_core::estimation::{fit_rigid, ransac_rigid, CorrespondenceSet, RansacParams};
use xsreg_core::geometry::rotation_angle;
use xsreg_core::matching::{match_problem, MatchConfig, MatchResult, MatchingProblem};
use xsreg_core::meshgen::{procedural, PROCEDURAL_MESHES};
use xsreg_core::preprocess::{estimate_scale, RadiusMode};
use xsreg_core::structure::esf::{EsfDescriptor, ESF_LEN};
use xsreg_core::structure::StructureGraph;
use xsreg_core::synth::{upsample_mesh, SynthesisConfig};
use xsreg_core::{apply_transform, Point3, RegistrationConfig, SimilarityTransform};

struct Outcome {
    pass: bool,
    detail: String,
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q = Quaternion::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

fn random_descriptor(rng: &mut ChaCha8Rng) -> EsfDescriptor {
    EsfDescriptor { bins: (0..ESF_LEN).map(|_| rng.random::<f64>()).collect() }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, edge_prob: f64) -> StructureGraph {
    let centroids: Vec<Point3> = (0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
    let descriptors = (0..n).map(|_| random_descriptor(rng)).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random::<f64>() < edge_prob {
                edges.push((a, b));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    StructureGraph::new(centroids, descriptors, edges, 1.0).unwrap()
}

/// Every injective map of the smaller side into the larger, as row → column.
fn partial_permutations(n1: usize, n2: usize) -> Vec<Vec<Option<usize>>> {
    fn go(k: usize, n_small: usize, n_large: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == n_small {
            out.push(cur.clone());
            return;
        }
        for j in 0..n_large {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(k + 1, n_small, n_large, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let (small, large) = (n1.min(n2), n1.max(n2));
    let mut raw = Vec::new();
    go(0, small, large, &mut vec![false; large], &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|p| {
            if n1 <= n2 {
                p.into_iter().map(Some).collect()
            } else {
                let mut rows = vec![None; n1];
                for (col, row) in p.into_iter().enumerate() {
                    rows[row] = Some(col);
                }
                rows
            }
        })
        .collect()
}

fn brute_force_lap(profit: &DMatrix<f64>) -> f64 {
    partial_permutations(profit.nrows(), profit.ncols())
        .iter()
        .map(|m| m.iter().enumerate().filter_map(|(i, j)| j.map(|j| profit[(i, j)])).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Matching score summed directly from the node and edge affinities.
fn direct_score(p: &MatchingProblem, map: &[Option<usize>]) -> f64 {
    let mut s: f64 = map.iter().enumerate().filter_map(|(i, j)| j.map(|j| p.affinities.kp[(i, j)])).sum();
    for (c1, &(t1, h1)) in p.g1.edges.iter().enumerate() {
        for (c2, &(t2, h2)) in p.g2.edges.iter().enumerate() {
            if map[t1] == Some(t2) && map[h1] == Some(h2) {
                s += p.affinities.kq[(c1, c2)];
            }
        }
    }
    s
}

/// `(steps checked, worst decrease)` over every α stage of a run.
fn trace_monotone(r: &MatchResult) -> (usize, f64) {
    let mut steps = 0;
    let mut worst: f64 = 0.0;
    for stage in &r.state.trace {
        for w in stage.objectives.windows(2) {
            steps += 1;
            worst = worst.max(w[0] - w[1]);
        }
    }
    (steps, worst)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut exact = 0;
    for trial in 0..200 {
        let (n1, n2) = if trial < 20 { (8, 8) } else { (rng.random_range(1..=8), rng.random_range(1..=8)) };
        let profit = DMatrix::from_fn(n1, n2, |_, _| rng.random_range(-50..=50) as f64);
        let got = solve_lap(&profit).unwrap();
        let direct: f64 = got.pairs().map(|(i, j)| profit[(i, j)]).sum();
        if got.pairs().count() == n1.min(n2) && direct == brute_force_lap(&profit) && got.value == direct {
            exact += 1;
        }
    }
    Outcome { pass: exact == 200, detail: format!("{exact}/200 optimal values equal the brute-force maximum") }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n1, n2) = loop {
            let (a, b) = (rng.random_range(2..=20), rng.random_range(2..=20));
            if a * b <= 400 {
                break (a, b);
            }
        };
        let (g1, g2) = (random_graph(&mut rng, n1, 0.3), random_graph(&mut rng, n2, 0.3));
        let p = MatchingProblem::new(&g1, &g2, AffinityMode::Similarity).unwrap();
        // dense K: diagonal node affinities, K[(h1,h2),(t1,t2)] = kq[c1][c2], index i1 + n1·i2
        let n = n1 * n2;
        let mut k = DMatrix::zeros(n, n);
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                k[(i1 + n1 * i2, i1 + n1 * i2)] = p.affinities.kp[(i1, i2)];
            }
        }
        for (c1, &(t1, h1)) in g1.edges.iter().enumerate() {
            for (c2, &(t2, h2)) in g2.edges.iter().enumerate() {
                k[(h1 + n1 * h2, t1 + n1 * t2)] += p.affinities.kq[(c1, c2)];
            }
        }
        let x = DMatrix::from_fn(n1, n2, |_, _| rng.random::<f64>());
        let v = DMatrix::from_column_slice(n, 1, x.as_slice());
        let dense = (v.transpose() * &k * &v)[(0, 0)];
        worst = worst.max((p.score(&x) - dense).abs());
    }
    Outcome { pass: worst < 1e-9, detail: format!("max |score − xᵀKx| = {worst:.2e} over 50 pairs") }
}

fn criteria_3_and_7(monotone: &mut (usize, f64)) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let config = MatchConfig { smooth_weight: 0.0, exact_trace: true, ..MatchConfig::default() };
    let mut good = 0;
    let mut worst_ratio: f64 = f64::INFINITY;
    for _ in 0..100 {
        let (n1, n2) = (rng.random_range(3..=6), rng.random_range(3..=6));
        let (g1, g2) = (random_graph(&mut rng, n1, 0.5), random_graph(&mut rng, n2, 0.5));
        let p = MatchingProblem::new(&g1, &g2, AffinityMode::Similarity).unwrap();
        let r = match_problem(&p, &config).unwrap();
        let optimum = partial_permutations(n1, n2).iter().map(|m| direct_score(&p, m)).fold(f64::NEG_INFINITY, f64::max);
        let ratio = direct_score(&p, &r.assignment.row_to_col) / optimum;
        worst_ratio = worst_ratio.min(ratio);
        if ratio >= 0.98 {
            good += 1;
        }
        let (steps, worst) = trace_monotone(&r);
        monotone.0 += steps;
        monotone.1 = monotone.1.max(worst);
    }
    Outcome { pass: good >= 95, detail: format!("{good}/100 runs reach ≥ 0.98 × optimum (worst ratio {worst_ratio:.4})") }
}

fn criteria_4_and_7(monotone: &mut (usize, f64)) -> Outcome {
    let config = MatchConfig { exact_trace: true, ..MatchConfig::default() };
    let mut recovered = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let g1 = random_graph(&mut rng, 10, 0.3);
        let mut perm: Vec<usize> = (0..10).collect();
        for i in (1..10).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut centroids = vec![Point3::origin(); 10];
        let mut descriptors = vec![EsfDescriptor::zeros(); 10];
        for i in 0..10 {
            centroids[perm[i]] = g1.centroids[i];
            descriptors[perm[i]] = g1.descriptors[i].clone();
        }
        let edges = g1.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let g2 = StructureGraph::new(centroids, descriptors, edges, 1.0).unwrap();
        let p = MatchingProblem::new(&g1, &g2, AffinityMode::Similarity).unwrap();
        let r = match_problem(&p, &config).unwrap();
        if (0..10).all(|i| r.assignment.row_to_col[i] == Some(perm[i])) {
            recovered += 1;
        }
        let (steps, worst) = trace_monotone(&r);
        monotone.0 += steps;
        monotone.1 = monotone.1.max(worst);
    }
    Outcome { pass: recovered == 20, detail: format!("{recovered}/20 permutations recovered exactly") }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = random_rotation(&mut rng);
        let t = Vector3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let n = rng.random_range(3..30);
        let pairs = (0..n)
            .map(|_| {
                let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (p, Point3::from(r * p.coords + t))
            })
            .collect();
        let est = fit_rigid(&CorrespondenceSet::new(pairs), false).unwrap();
        worst = worst.max(rotation_angle(&(est.rotation * r.transpose())).to_degrees());
    }
    Outcome { pass: worst < 1e-7, detail: format!("max angular error {worst:.2e}°") }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut ok = 0;
    let mut worst_rot: f64 = 0.0;
    let mut worst_recall: f64 = 1.0;
    for trial in 0..100 {
        let r = random_rotation(&mut rng);
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let mut pairs = Vec::new();
        let mut truth = Vec::new();
        for k in 0..50 {
            let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if k < 35 {
                pairs.push((p, Point3::from(r * p.coords + t)));
                truth.push(true);
            } else {
                pairs.push((p, Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))));
                truth.push(false);
            }
        }
        let res = ransac_rigid(&CorrespondenceSet::new(pairs), &RansacParams::new(0.05, trial)).unwrap();
        let rot = rotation_angle(&(res.transform.rotation * r.transpose())).to_degrees();
        let recall = truth.iter().zip(&res.inlier_mask).filter(|(t, m)| **t && **m).count() as f64 / 35.0;
        worst_rot = worst_rot.max(rot);
        worst_recall = worst_recall.min(recall);
        if rot < 1.0 && recall >= 0.95 {
            ok += 1;
        }
    }
    Outcome { pass: ok == 100, detail: format!("{ok}/100 trials pass (worst rotation {worst_rot:.2e}°, worst recall {worst_recall:.3})") }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(4..=15);
        let g1 = random_graph(&mut rng, n, 0.3);
        let motion = SimilarityTransform::rigid(random_rotation(&mut rng), Vector3::new(rng.random_range(-5.0..5.0), 0.0, rng.random_range(-5.0..5.0)));
        let g2 = g1.transformed(&motion).unwrap();
        let p = MatchingProblem::new(&g1, &g2, AffinityMode::Similarity).unwrap();
        let identity: Vec<Option<usize>> = (0..n).map(Some).collect();
        worst = worst.max(p.smooth_term(&identity).abs());
    }
    Outcome { pass: worst < 1e-9, detail: format!("max |J_smooth| = {worst:.2e} over 50 rigid motions") }
}

fn means(report: &xsreg_core::bench::BenchReport) -> (f64, f64, usize) {
    let s = report.summary();
    let get = |m: Method| s.iter().find(|x| x.method == m).unwrap();
    let failed = s.iter().map(|x| x.failed).sum();
    (get(Method::Pipeline).mean_rotation_rmse, get(Method::IcpBaseline).mean_rotation_rmse, failed)
}

fn criterion_9() -> Outcome {
    let mesh = procedural("bumpy-sphere").unwrap();
    let config = BenchConfig { synthesis: SynthesisConfig::same_source(909), registration: RegistrationConfig::default(), trials: 10 };
    let report = run_benchmark(&[mesh], &config, &WallClock::start());
    let (pipeline, icp, failed) = means(&report);
    Outcome {
        pass: failed == 0 && pipeline < icp,
        detail: format!("mean rotation RMSE pipeline {pipeline:.3}° vs ICP {icp:.3}° over 10 seeds, {failed} failed runs"),
    }
}

fn criterion_10() -> Outcome {
    let meshes: Vec<_> = PROCEDURAL_MESHES.iter().map(|n| procedural(n).unwrap()).collect();
    let config = BenchConfig { synthesis: SynthesisConfig::database_c(1010), registration: RegistrationConfig::default(), trials: 5 };
    let report = run_benchmark(&meshes, &config, &WallClock::start());
    let (pipeline, icp, failed) = means(&report);
    let per_mesh: Vec<String> = report
        .per_mesh()
        .iter()
        .filter(|s| s.method == Method::Pipeline)
        .map(|s| format!("{} {:.2}°", s.mesh.as_deref().unwrap_or(""), s.mean_rotation_rmse))
        .collect();
    Outcome {
        pass: failed == 0 && pipeline < 5.0 && pipeline < icp,
        detail: format!("mean rotation RMSE pipeline {pipeline:.3}° vs ICP {icp:.3}° over 3 meshes × 5 seeds, {failed} failed runs; pipeline per mesh: {}", per_mesh.join(", ")),
    }
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let clouds: Vec<_> = PROCEDURAL_MESHES.iter().map(|n| upsample_mesh(&procedural(n).unwrap()).unwrap()).collect();
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let p = &clouds[trial % clouds.len()];
        let s = rng.random_range(3.0..=5.0);
        let t = Vector3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let q = apply_transform(p, &SimilarityTransform::new(s, random_rotation(&mut rng), t));
        let est = estimate_scale(p, &q, RadiusMode::Max).unwrap();
        let recovered = 1.0 / est.scale;
        worst = worst.max((recovered - s).abs() / s);
    }
    Outcome { pass: worst < 0.02, detail: format!("max relative scale error {:.2e} over 50 trials", worst) }
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_xsreg")).args(["pipeline", "--seed", "7", "--out-dir"]).arg(&out).output().unwrap();
        if !status.status.success() {
            return Outcome { pass: false, detail: format!("pipeline run failed: {}", String::from_utf8_lossy(&status.stderr)) };
        }
        outputs.push((fs::read(out.join("transform.json")).unwrap(), fs::read(out.join("report.csv")).unwrap()));
    }
    let same = outputs[0] == outputs[1];
    Outcome { pass: same, detail: format!("transform.json and report.csv {}", if same { "bit-identical" } else { "differ" }) }
}

fn main() -> ExitCode {
    let mut passed = 0;
    let mut report = |id: &str, name: &str, limit: Duration, start: Instant, outcome: Outcome| {
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed < limit;
        passed += usize::from(pass);
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    let mut monotone = (0, 0.0);

    let t = Instant::now();
    report("1", "assignment vs brute force", Duration::from_secs(10), t, criterion_1());
    let t = Instant::now();
    report("2", "factorized score vs dense K", Duration::from_secs(30), t, criterion_2());
    let t = Instant::now();
    report("3", "path-following near-optimality", Duration::from_secs(300), t, criteria_3_and_7(&mut monotone));
    let t = Instant::now();
    report("4", "self-matching", Duration::from_secs(60), t, criteria_4_and_7(&mut monotone));
    let t = Instant::now();
    report("5", "rigid recovery", Duration::from_secs(10), t, criterion_5());
    let t = Instant::now();
    report("6", "RANSAC robustness", Duration::from_secs(30), t, criterion_6());
    let t = Instant::now();
    let (steps, worst) = monotone;
    report(
        "7",
        "monotone ascent",
        Duration::from_secs(1),
        t,
        Outcome { pass: steps > 0 && worst <= 1e-12, detail: format!("{steps} Frank–Wolfe steps in criteria 3–4, largest decrease {worst:.2e}") },
    );
    let t = Instant::now();
    report("8", "smoothness-term invariance", Duration::from_secs(10), t, criterion_8());
    let t = Instant::now();
    report("9", "same-source pipeline vs ICP", Duration::from_secs(600), t, criterion_9());
    let t = Instant::now();
    report("10", "cross-source pipeline vs ICP", Duration::from_secs(1800), t, criterion_10());
    let t = Instant::now();
    report("11", "scale normalization", Duration::from_secs(10), t, criterion_11());
    let t = Instant::now();
    report("12", "determinism", Duration::from_secs(600), t, criterion_12());

    println!("acceptance: {passed}/12 criteria pass");
    if passed < 12 && std::env::var_os("XSREG_ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.
//!
//! Pass a substring such as `ac7` to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use polyfw::afw::{afw_minimize_observed, apo, ProxObjective, QuadraticObjective, Termination};
use polyfw::games::{build_kuhn, build_leduc, to_sequence_form, SequenceFormGame};
use polyfw::learners::{Algorithm, ApoMode, EpsSchedule, LearnerConfig};
use polyfw::polytope::{ActiveSet, Treeplex};
use polyfw::selfplay::{run_selfplay, Averaging, RecordSchedule, RunOutcome, SelfPlayConfig};
use polyfw_cli::experiment::run_experiment;
use polyfw_cli::ExperimentConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn kuhn(players: usize) -> SequenceFormGame {
    to_sequence_form(&build_kuhn(players, players + 1).unwrap()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the probability simplex by sorting and thresholding.
fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut sum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        sum += uj;
        let t = (sum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// A point of `Treeplex::simplex(n)` from simplex weights.
fn lift(w: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(w.iter().copied()).collect()
}

fn random_simplex_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn ac1() -> Verdict {
    let out = Command::new(env!("CARGO_BIN_EXE_polyfw"))
        .args(["verify-fd", "--max-n", "5"])
        .output()
        .expect("binary runs");
    let rows = polyfw_cli::verify_facial_distance(5).unwrap();
    let mut worst_closed: f64 = 0.0;
    let mut margins_ok = true;
    for (k, n) in (2..=5usize).enumerate() {
        let r = &rows[k];
        let closed = (1.0 / (n / 2) as f64 + 1.0 / n.div_ceil(2) as f64).sqrt();
        worst_closed = worst_closed.max((r.brute - closed).abs());
        margins_ok &= r.brute > 1.0 / (n as f64).sqrt();
    }
    let kuhn_p1 = rows
        .iter()
        .find(|r| r.name.starts_with("kuhn2 player 1"))
        .unwrap();
    let kuhn_ok = kuhn_p1.brute > 1.0 / 13f64.sqrt();
    let pass = out.status.code() == Some(0) && worst_closed <= 1e-6 && margins_ok && kuhn_ok;
    verdict(
        pass,
        format!(
            "exit {:?}, max |brute - closed| {worst_closed:.1e}, kuhn p1 {:.5} vs {:.5}",
            out.status.code(),
            kuhn_p1.brute,
            1.0 / 13f64.sqrt()
        ),
    )
}

struct Projection {
    target: Vec<f64>,
}

impl QuadraticObjective for Projection {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.target) {
            *o = a - b;
        }
    }

    fn curvature(&self, d: &[f64]) -> f64 {
        dot(d, d)
    }
}

fn ac2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_dist: f64 = 0.0;
    let mut gap_violations = 0usize;
    for k in 0..200 {
        let n = 3 + k % 8;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let exact = lift(&project_simplex(&y));
        let obj = Projection { target: lift(&y) };
        let t = Treeplex::simplex(n).unwrap();
        let f_star = obj.value(&exact);
        let init = ActiveSet::singleton(t.lmo(&vec![0.0; n + 1]).unwrap(), n + 1);
        let r = afw_minimize_observed(&obj, &t, init, Termination::WolfeGap(1e-10), &mut |it| {
            if it.wolfe_gap < it.value - f_star - 1e-12 {
                gap_violations += 1;
            }
        })
        .unwrap();
        let dist = r
            .point
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_dist = worst_dist.max(dist);
    }
    verdict(
        worst_dist <= 1e-6 && gap_violations == 0,
        format!("max inf-norm error {worst_dist:.2e}, gap bound violations {gap_violations}"),
    )
}

fn ac3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_ratio: f64 = 0.0;
    let mut failures = 0usize;
    for k in 0..50 {
        let n = 3 + k % 8;
        let t = Treeplex::simplex(n).unwrap();
        let center_w = random_simplex_point(n, &mut rng);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eta = log_uniform(&mut rng, 0.01, 100.0);
        let eps = log_uniform(&mut rng, 1e-9, 1e-2);
        // the minimizer is the projection of c - eta g
        let shifted: Vec<f64> = center_w
            .iter()
            .zip(&g)
            .map(|(c, gi)| c - eta * gi)
            .collect();
        let exact = lift(&project_simplex(&shifted));
        let linear = lift(&g);
        let center = lift(&center_w);
        let obj = ProxObjective::new(linear.clone(), center.clone(), eta).unwrap();
        let r = apo(&linear, eta, &center, Termination::WolfeGap(eps), None, &t).unwrap();
        let subopt = obj.value(&r.point) - obj.value(&exact);
        worst_ratio = worst_ratio.max(subopt / eps);
        if subopt > eps {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("max suboptimality / eps {worst_ratio:.3}, violations {failures}"),
    )
}

fn fw_romd_accuracy(eta: f64, players: usize) -> SelfPlayConfig {
    let mut c = LearnerConfig::new(Algorithm::FwRomd, eta);
    c.apo = ApoMode::Accuracy(EpsSchedule::InverseSquare);
    SelfPlayConfig::new(vec![c; players])
}

fn ac4() -> Verdict {
    let game = kuhn(2);
    let mut details = Vec::new();
    let mut pass = true;
    for eta in [0.25, 1.28] {
        let mut cfg = fw_romd_accuracy(eta, 2);
        cfg.max_iterations = Some(2000);
        cfg.record = RecordSchedule::Every(1);
        let out = run_selfplay(&game, &cfg).unwrap();
        let audited = out.records.len();
        let min_slack = out
            .records
            .iter()
            .map(|r| r.rvu_slack.unwrap_or(f64::NEG_INFINITY))
            .fold(f64::INFINITY, f64::min);
        let max_margin = out
            .records
            .iter()
            .map(|r| r.stability_margin.unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max);
        pass &= out.error.is_none() && audited == 2000 && min_slack >= -1e-6 && max_margin <= 1e-6;
        details.push(format!(
            "eta {eta}: {audited} audited, min slack {min_slack:.3}, max margin {max_margin:.3}"
        ));
    }
    verdict(pass, details.join("; "))
}

fn exact_omega(t: &Treeplex) -> f64 {
    let n = t.num_sequences();
    let verts: Vec<Vec<f64>> = t
        .enumerate_vertices()
        .unwrap()
        .iter()
        .map(|v| v.to_dense(n))
        .collect();
    let mut best: f64 = 0.0;
    for (i, u) in verts.iter().enumerate() {
        for v in &verts[i + 1..] {
            best = best.max(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    0.5 * best
}

fn ac5() -> Verdict {
    let game = kuhn(2);
    let eta = 0.25;
    let omega = game
        .treeplexes()
        .iter()
        .map(exact_omega)
        .fold(0.0, f64::max);
    let bound = 2.0 * (omega + 2.0) / eta;
    let mut cfg = fw_romd_accuracy(eta, 2);
    cfg.max_iterations = Some(2000);
    cfg.record = RecordSchedule::Every(1);
    cfg.averaging = Averaging::Uniform;
    let out = run_selfplay(&game, &cfg).unwrap();
    let worst = out
        .records
        .iter()
        .map(|r| r.iteration as f64 * r.metric)
        .fold(0.0, f64::max);
    verdict(
        out.error.is_none() && out.records.len() == 2000 && worst <= bound,
        format!("Omega {omega}, max T*gap {worst:.3} vs bound {bound:.3}"),
    )
}

fn kuhn_equilibrium(game: &SequenceFormGame, alpha: f64) -> Vec<Vec<f64>> {
    let p1 = game
        .realization_plan(0, |name, _| {
            let parts: Vec<&str> = name.split('|').collect();
            let bet = match (parts[1], parts[2]) {
                ("0", "") => alpha,
                ("1", "") => 0.0,
                ("2", "") => 3.0 * alpha,
                ("0", "cb") => 0.0,
                ("1", "cb") => alpha + 1.0 / 3.0,
                ("2", "cb") => 1.0,
                other => panic!("unexpected infoset {other:?}"),
            };
            vec![1.0 - bet, bet]
        })
        .unwrap();
    let p2 = game
        .realization_plan(1, |name, _| {
            let parts: Vec<&str> = name.split('|').collect();
            let bet = match (parts[1], parts[2]) {
                ("0", "b") => 0.0,
                ("1", "b") => 1.0 / 3.0,
                ("2", "b") => 1.0,
                ("0", "c") => 1.0 / 3.0,
                ("1", "c") => 0.0,
                ("2", "c") => 1.0,
                other => panic!("unexpected infoset {other:?}"),
            };
            vec![1.0 - bet, bet]
        })
        .unwrap();
    vec![p1, p2]
}

fn fw_romd_budget(
    eta: f64,
    m: u64,
    averaging: Averaging,
    players: usize,
    budget: u64,
) -> SelfPlayConfig {
    let mut c = LearnerConfig::new(Algorithm::FwRomd, eta);
    c.apo = ApoMode::LmoBudget(m);
    let mut cfg = SelfPlayConfig::new(vec![c; players]);
    cfg.averaging = averaging;
    cfg.lmo_budget = Some(budget);
    cfg
}

fn ac6() -> Verdict {
    let game = kuhn(2);
    let anchor = kuhn_equilibrium(&game, 1.0 / 6.0);
    let anchor_gap = game.duality_gap(&anchor[0], &anchor[1]).unwrap();
    let anchor_value = game.raw_utility(0, &anchor);
    let cfg = fw_romd_budget(1.28, 5, Averaging::Quadratic, 2, 10_000);
    let out = run_selfplay(&game, &cfg).unwrap();
    let value = game.raw_utility(0, &out.averages);
    let target = -1.0 / 18.0;
    verdict(
        anchor_gap <= 1e-10
            && (anchor_value - target).abs() < 1e-12
            && out.error.is_none()
            && (value - target).abs() <= 5e-3,
        format!(
            "anchor gap {anchor_gap:.1e}, learned value {value:.6} vs {target:.6}, final gap {:.2e}",
            out.records.last().unwrap().metric
        ),
    )
}

/// Metric at the last record with at most `calls` average LMO calls.
fn metric_at(out: &RunOutcome, calls: f64) -> Option<f64> {
    out.records
        .iter()
        .take_while(|r| r.avg_lmo_calls <= calls)
        .last()
        .map(|r| r.metric)
}

/// Gap at each decade of LMO calls plus the final value must strictly decrease.
fn trends_down(out: &RunOutcome) -> (bool, Vec<f64>) {
    let mut points: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .filter_map(|&c| metric_at(out, c))
        .collect();
    points.push(out.records.last().unwrap().metric);
    (points.windows(2).all(|w| w[1] < w[0]), points)
}

fn baseline(alg: Algorithm, averaging: Averaging, budget: u64) -> SelfPlayConfig {
    let mut cfg = SelfPlayConfig::new(vec![LearnerConfig::new(alg, 1.28); 2]);
    cfg.averaging = averaging;
    cfg.lmo_budget = Some(budget);
    cfg
}

fn ac7() -> Verdict {
    let budget = 10_000;
    let mut pass = true;
    let mut details = Vec::new();
    let cases = [
        ("kuhn2", kuhn(2), 5, Averaging::Quadratic),
        (
            "leduc",
            to_sequence_form(&build_leduc(2).unwrap()).unwrap(),
            2,
            Averaging::Last,
        ),
    ];
    for (name, game, m, averaging) in cases {
        let fw = run_selfplay(&game, &fw_romd_budget(1.28, m, averaging, 2, budget)).unwrap();
        let br = run_selfplay(
            &game,
            &baseline(Algorithm::Br, Averaging::Quadratic, budget),
        )
        .unwrap();
        let fp = run_selfplay(&game, &baseline(Algorithm::Fp, Averaging::Uniform, budget)).unwrap();
        let fw_final = fw.records.last().unwrap().metric;
        let br_final = br.records.last().unwrap().metric;
        let fp_final = fp.records.last().unwrap().metric;
        let (down, points) = trends_down(&fw);
        let ok = fw.error.is_none()
            && down
            && fw_final <= 1e-2
            && fw_final < br_final
            && fw_final < fp_final;
        pass &= ok;
        let decades: Vec<String> = points.iter().map(|p| format!("{p:.2e}")).collect();
        details.push(format!(
            "{name} {}: fw-romd {fw_final:.2e} (decades {}), br {br_final:.2e}, fp {fp_final:.2e}",
            if ok { "ok" } else { "fails" },
            decades.join(" > ")
        ));
    }
    verdict(pass, details.join("; "))
}

fn ac8() -> Verdict {
    let game = kuhn(3);
    let mut c = LearnerConfig::new(Algorithm::FwOmd, 40.96);
    c.apo = ApoMode::LmoBudget(4);
    let mut cfg = SelfPlayConfig::new(vec![c; 3]);
    cfg.averaging = Averaging::Uniform;
    cfg.lmo_budget = Some(10_000);
    let out = run_selfplay(&game, &cfg).unwrap();
    let at10 = out
        .records
        .iter()
        .find(|r| r.iteration == 10)
        .unwrap()
        .metric;
    let last = out.records.last().unwrap();
    let ratio = at10 / last.metric;
    verdict(
        out.error.is_none() && ratio >= 10.0,
        format!(
            "max avg regret {at10:.3e} at iteration 10, {:.3e} at iteration {} ({:.0} LMO calls): ratio {ratio:.2}",
            last.metric, last.iteration, last.avg_lmo_calls
        ),
    )
}

fn ac9() -> Verdict {
    let mut pass = true;
    let mut checked = 0usize;
    for players in [2, 3] {
        let game = kuhn(players);
        for alg in [
            Algorithm::Fp,
            Algorithm::Ofp,
            Algorithm::Br,
            Algorithm::Obr,
            Algorithm::Ftpl,
            Algorithm::Oftpl,
        ] {
            let mut cfg = SelfPlayConfig::new(vec![LearnerConfig::new(alg, 1.0); players]);
            cfg.max_iterations = Some(300);
            cfg.record = RecordSchedule::Every(1);
            let out = run_selfplay(&game, &cfg).unwrap();
            for r in &out.records {
                pass &= r.lmo_calls.iter().all(|&c| c == r.iteration);
                checked += 1;
            }
        }
        for alg in [Algorithm::FwRomd, Algorithm::FwOmd] {
            for m in [1, 2, 5, 20] {
                let mut c = LearnerConfig::new(alg, 0.7);
                c.apo = ApoMode::LmoBudget(m);
                let mut cfg = SelfPlayConfig::new(vec![c; players]);
                cfg.max_iterations = Some(300);
                cfg.record = RecordSchedule::Every(1);
                let out = run_selfplay(&game, &cfg).unwrap();
                let mut prev = vec![0u64; players];
                for r in &out.records {
                    for (p, &c) in prev.iter_mut().zip(&r.lmo_calls) {
                        pass &= c - *p <= m;
                        *p = c;
                    }
                    checked += 1;
                }
            }
        }
    }
    verdict(pass, format!("{checked} iterations checked"))
}

fn ac10() -> Verdict {
    let text = r#"
schema = 1
seed = 42
lmo_budget = 400

[game]
id = "kuhn3"

[sweep]
algorithms = ["fw-romd", "fw-omd", "ftpl", "oftpl", "fp", "ofp", "br", "obr"]
eta = [0.32, 5.12]
lmo_per_iteration = [1, 4]
"#;
    let config = ExperimentConfig::from_toml(text, "determinism.toml").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    let mut manifests = Vec::new();
    for (dir, jobs) in dirs.iter().zip([1, 4]) {
        manifests.push(run_experiment(&config, dir, jobs).unwrap());
    }
    let mut identical = 0usize;
    let mut differing = Vec::new();
    for run in &manifests[0].runs {
        let a = std::fs::read(dirs[0].join(&run.file)).unwrap();
        let b = std::fs::read(dirs[1].join(&run.file)).unwrap();
        if a == b {
            identical += 1;
        } else {
            differing.push(run.file.clone());
        }
    }
    let total = manifests[0].runs.len();
    verdict(
        differing.is_empty() && total == manifests[1].runs.len() && !manifests[0].any_failed(),
        format!(
            "{identical}/{total} CSVs byte-identical across reruns{}",
            if differing.is_empty() {
                String::new()
            } else {
                format!(", differing: {}", differing.join(", "))
            }
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Verdict, Duration);

fn main() -> ExitCode {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria: [Criterion; 10] = [
        ("ac1", "facial-distance bounds", ac1, minutes(1)),
        ("ac2", "AFW projection correctness", ac2, minutes(1)),
        ("ac3", "APO accuracy contract", ac3, Duration::from_secs(30)),
        ("ac4", "RVU and stability audits", ac4, minutes(1)),
        ("ac5", "constant social regret", ac5, minutes(10)),
        ("ac6", "Kuhn equilibrium value", ac6, minutes(2)),
        ("ac7", "FW-ROMD against BR and FP", ac7, minutes(10)),
        ("ac8", "three-player average regret", ac8, minutes(10)),
        ("ac9", "LMO accounting", ac9, minutes(10)),
        ("ac10", "determinism", ac10, minutes(10)),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (key, name, run, limit) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| key.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(v) => (v.pass && elapsed <= limit, v.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {key} {name}: {detail} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one status line; exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cutlab::alt_optima::{collect_optima, OptimaSet};
use cutlab::bench::{
    evaluate_picker, gen_corpus, head_to_head, reference_incumbent, run_matrix, sgm_table, shifted_geo_mean,
    virtual_best_ratios, CorpusKind, ExperimentRecord, MatrixConfig, Metric, SizeParams, Variant,
};
use cutlab::bnb::{branch_and_cut_with, brute_force_optimum, max_cut_violation, BnbOptions, SolveStatus};
use cutlab::dominance::{self, construction_report, random_polytope};
use cutlab::lp_barrier::{analytic_center, optimal_face_center};
use cutlab::measures::{self, CachedCenter, MeasureError};
use cutlab::regress::{self, argmax_measure, synthetic_rule_corpus, KernelParams, TrainingRecord};
use cutlab::{
    solve_lp, CenterKind, CenterPoint, Cut, CutOrigin, FeatureVector, Incumbent, IncumbentSource, MeasureKind,
    MipInstance, SeparationConfig,
};

// ---------------------------------------------------------------------------
// Independent reference evaluations: plain arithmetic over slices, sharing no
// code with the library.

mod oracle {
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += a[i] * b[i];
        }
        s
    }

    pub fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    pub fn eff(a: &[f64], b: f64, x: &[f64]) -> f64 {
        (dot(a, x) - b) / norm(a)
    }

    /// Length of the part of the ray from `x` toward `t` cut off by `a·z ≤ b`,
    /// found by intersecting the parametric line with the hyperplane.
    pub fn directed(a: &[f64], b: f64, x: &[f64], t: &[f64]) -> f64 {
        let d: Vec<f64> = t.iter().zip(x).map(|(p, q)| p - q).collect();
        let len = norm(&d);
        let s = (b - dot(a, x)) / dot(a, &d);
        (s * len).abs() * (dot(a, x) - b).signum()
    }

    pub fn exp_improv(a: &[f64], b: f64, x: &[f64], c: &[f64]) -> f64 {
        norm(c) * (dot(a, c) / (norm(a) * norm(c))) * eff(a, b, x)
    }
}

// ---------------------------------------------------------------------------

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cut(a: &[f64], b: f64) -> Cut<f64> {
    Cut::new(a.to_vec(), b, CutOrigin::Test, 0).unwrap()
}

fn center(p: &[f64], kind: CenterKind) -> CenterPoint<f64> {
    CenterPoint { point: p.to_vec(), kind, newton_iters: 0, residual: 0.0, relaxation_slack: 0.0 }
}

fn incumbent(p: &[f64]) -> Incumbent<f64> {
    Incumbent { point: p.to_vec(), value: 0.0, source: IncumbentSource::Provided }
}

fn optima(points: Vec<Vec<f64>>) -> OptimaSet<f64> {
    OptimaSet { k_requested: points.len(), points, objective_value: 0.0 }
}

fn unit_box(d: usize, upper: &[f64], c: Vec<f64>) -> MipInstance<f64> {
    MipInstance::with_le_rows("box", c, vec![], vec![], vec![0.0; d], upper.to_vec(), vec![]).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

// ---------------------------------------------------------------------------
// 1

fn criterion_1() -> Outcome {
    let tol = 1e-9;
    let mut fails: Vec<String> = Vec::new();
    let mut exact = |name: &str, got: f64, want: f64| {
        if got != want {
            fails.push(format!("{name}: {got} != {want}"));
        }
    };
    exact("eff axis", measures::score_eff(&cut(&[1.0, 0.0], 1.0), &[3.0, 7.0]).unwrap(), 2.0);
    exact("eff on plane", measures::score_eff(&cut(&[1.0, 1.0], 2.0), &[1.0, 1.0]).unwrap(), 0.0);
    exact("dcd unit", measures::score_dcd(&cut(&[1.0, 0.0], 1.0), &[2.0, 0.0], &incumbent(&[0.0, 0.0])).unwrap(), 1.0);
    exact(
        "exp-improv collinear",
        measures::score_exp_improv(&cut(&[1.0, 0.0], 1.0), &[3.0, 0.0], &[1.0, 0.0]).unwrap(),
        2.0,
    );
    exact("exp-improv orthogonal", measures::score_exp_improv(&cut(&[0.0, 1.0], 1.0), &[3.0, 3.0], &[1.0, 0.0]).unwrap(), 0.0);
    let two = optima(vec![vec![1.0, 0.0], vec![2.0, 0.0]]);
    exact("avgeff", measures::score_avgeff(&cut(&[1.0, 0.0], 0.0), &two).unwrap(), 1.5);
    exact("mineff", measures::score_mineff(&cut(&[1.0, 0.0], 0.0), &two).unwrap(), 1.0);
    let c1 = cut(&[2.0, -1.0, 0.5], 0.3);
    let one = optima(vec![vec![0.7, 0.1, 0.4]]);
    let e1 = measures::score_eff(&c1, &one.points[0]).unwrap();
    exact("avgeff singleton", measures::score_avgeff(&c1, &one).unwrap(), e1);
    exact("mineff singleton", measures::score_mineff(&c1, &one).unwrap(), e1);
    exact(
        "a-eff unique optimum",
        measures::score_a_eff(&c1, &center(&one.points[0], CenterKind::OptimalFaceCenter)).unwrap(),
        e1,
    );
    exact("a-eff on plane", measures::score_a_eff(&cut(&[1.0, 1.0], 2.0), &center(&[1.5, 0.5], CenterKind::OptimalFaceCenter)).unwrap(), 0.0);
    let split = optima(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
    if measures::score_mineff(&cut(&[1.0, 0.0], 0.0), &split).unwrap() > 0.0 {
        fails.push("mineff with an unseparated optimum is positive".into());
    }
    let sample = cut(&[3.0, 0.0, -1.0, 0.5], 0.0);
    let dense = cut(&[1.0, 2.0, 3.0, 4.0], 0.0);
    let tiny = cut(&[1.0, 1e-12, 0.0, 2.0], 0.0);
    let zt = 1e-9;
    if measures::density(&cut(&[1.0, 0.0, 0.0, 2.0], 0.0), zt) != 2
        || measures::relative_density(&cut(&[1.0, 0.0, 0.0, 2.0], 0.0), 4, zt) != 0.5
        || measures::relative_density(&dense, 4, zt) != 1.0
        || measures::density(&tiny, zt) != 2
        || measures::density(&sample, zt) != 3
    {
        fails.push("density examples".into());
    }
    if !matches!(
        measures::score_dcd(&cut(&[0.0, 1.0], 1.0), &[2.0, 0.0], &incumbent(&[0.0, 0.0])),
        Err(MeasureError::ParallelDirection)
    ) {
        fails.push("dcd parallel direction not rejected".into());
    }
    if !matches!(
        measures::score_dcd(&cut(&[1.0, 0.0], 1.0), &[2.0, 0.0], &incumbent(&[2.0, 0.0])),
        Err(MeasureError::DegenerateDirection)
    ) {
        fails.push("dcd degenerate direction not rejected".into());
    }
    if measures::score_eff(&Cut { coeffs: vec![0.0, 0.0], rhs: 1.0, origin: CutOrigin::Test, round: 0 }, &[1.0, 1.0]).is_ok() {
        fails.push("zero α accepted".into());
    }

    // app-a-dcd cache rule
    let bx = unit_box(2, &[1.0, 1.0], vec![0.0, 0.0]);
    let xc = analytic_center(&bx, &[]).unwrap();
    let probe = cut(&[-1.0, -1.0], -0.5);
    let cache = CachedCenter::new(xc.clone());
    let fresh = measures::score_a_dcd(&probe, &[0.0, 0.0], &xc).unwrap();
    let cached = measures::score_app_a_dcd(&probe, &[0.0, 0.0], &cache, &bx, &[], 1e-6).unwrap();
    if (fresh - cached).abs() > tol {
        fails.push("app-a-dcd round 1 differs from a-dcd".into());
    }
    if !matches!(
        measures::score_app_a_dcd(&probe, &[0.0, 0.0], &cache, &bx, &[cut(&[1.0, 0.0], 0.3)], 1e-6),
        Err(MeasureError::CacheInvalid)
    ) {
        fails.push("separated cached center not invalidated".into());
    }

    let mut derived = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > tol {
            fails.push(format!("{name}: {got} vs oracle {want}"));
        }
    };
    derived("eff (3,4)", measures::score_eff(&cut(&[3.0, 4.0], 0.0), &[1.0, 1.0]).unwrap(), oracle::eff(&[3.0, 4.0], 0.0, &[1.0, 1.0]));
    derived(
        "dcd diagonal",
        measures::score_dcd(&cut(&[1.0, 0.0], 1.0), &[2.0, 0.0], &incumbent(&[0.0, 2.0])).unwrap(),
        oracle::directed(&[1.0, 0.0], 1.0, &[2.0, 0.0], &[0.0, 2.0]),
    );
    derived(
        "exp-improv (1,1)",
        measures::score_exp_improv(&cut(&[1.0, 1.0], 0.0), &[1.0, 1.0], &[1.0, 0.0]).unwrap(),
        oracle::exp_improv(&[1.0, 1.0], 0.0, &[1.0, 1.0], &[1.0, 0.0]),
    );
    derived("a-dcd box", fresh, oracle::directed(&[-1.0, -1.0], -0.5, &[0.0, 0.0], &xc.point));
    derived(
        "a-dcd center on plane",
        measures::score_a_dcd(&cut(&[1.0, 1.0], 1.0), &[2.0, 1.0], &center(&[0.5, 0.5], CenterKind::PolytopeCenter)).unwrap(),
        oracle::directed(&[1.0, 1.0], 1.0, &[2.0, 1.0], &[0.5, 0.5]),
    );

    // a-eff on an edge face: min x2 over [0,2]×[0,1] has the bottom edge as face
    let edge = unit_box(2, &[2.0, 1.0], vec![0.0, 1.0]);
    let lp = solve_lp(&edge, &[], None, 0).unwrap();
    let xf = optimal_face_center(&edge, &[], &lp).unwrap();
    let whole = cut(&[0.0, -1.0], -0.5);
    let corner = cut(&[-1.0, -1.0], -0.5);
    let s_whole = measures::score_a_eff(&whole, &xf).unwrap();
    let s_corner = measures::score_a_eff(&corner, &xf).unwrap();
    derived("a-eff edge, whole-face cut", s_whole, oracle::eff(&[0.0, -1.0], -0.5, &[1.0, 0.0]));
    let edge_signs = s_whole > 0.0 && s_corner <= 0.0;

    // random optima sets against a summed oracle
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let pts: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let c = cut(&a, b);
        let set = optima(pts.clone());
        let e: Vec<f64> = pts.iter().map(|p| oracle::eff(&a, b, p)).collect();
        derived("avgeff random", measures::score_avgeff(&c, &set).unwrap(), (e[0] + e[1] + e[2]) / 3.0);
        derived("mineff random", measures::score_mineff(&c, &set).unwrap(), e[0].min(e[1]).min(e[2]));
        let x = &pts[0];
        let t = &pts[1];
        if let Ok(v) = measures::score_directed(&c, x, t) {
            derived("directed random", v, oracle::directed(&a, b, x, t));
        }
        let obj: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        derived("exp-improv random", measures::score_exp_improv(&c, x, &obj).unwrap(), oracle::exp_improv(&a, b, x, &obj));
    }
    if !edge_signs {
        fails.push(format!("a-eff edge signs {s_whole} / {s_corner}"));
    }
    let pass = fails.is_empty();
    check(pass, if pass { "all measure examples match".to_string() } else { fails.join("; ") })
}

// ---------------------------------------------------------------------------
// 2

fn criterion_2() -> Outcome {
    let tol = 1e-6;
    let mut fails = Vec::new();
    let simplex =
        MipInstance::with_le_rows("s", vec![0.0; 2], vec![vec![1.0, 1.0]], vec![1.0], vec![0.0; 2], vec![f64::INFINITY; 2], vec![])
            .unwrap();
    let cases: Vec<(&str, MipInstance<f64>, Vec<f64>)> = vec![
        ("unit box", unit_box(2, &[1.0, 1.0], vec![0.0; 2]), vec![0.5, 0.5]),
        ("simplex", simplex, vec![1.0 / 3.0, 1.0 / 3.0]),
        ("rectangle", unit_box(2, &[1.0, 3.0], vec![0.0; 2]), vec![0.5, 1.5]),
    ];
    for (name, inst, want) in &cases {
        match analytic_center(inst, &[]) {
            Ok(c) if close(&c.point, want, tol) => {}
            Ok(c) => fails.push(format!("{name}: {:?}", c.point)),
            Err(e) => fails.push(format!("{name}: {e}")),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(2..=4);
        let h = rng.gen_range(3..=8);
        let (inst, _) = random_polytope(&mut rng, d, h);
        let mut scaled = inst.clone();
        for i in 0..scaled.m() {
            let t = rng.gen_range(0.1..10.0);
            scaled.rows[i].iter_mut().for_each(|v| *v *= t);
            scaled.rhs[i] *= t;
        }
        match (analytic_center(&inst, &[]), analytic_center(&scaled, &[])) {
            (Ok(a), Ok(b)) => {
                let dev = a.point.iter().zip(&b.point).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                worst = worst.max(dev);
            }
            (Err(e), _) | (_, Err(e)) => fails.push(format!("random polytope: {e}")),
        }
    }
    if worst > tol {
        fails.push(format!("row scaling moved the center by {worst:.2e}"));
    }
    let pass = fails.is_empty();
    check(pass, if pass { format!("closed forms met; max scaling deviation {worst:.1e}") } else { fails.join("; ") })
}

// ---------------------------------------------------------------------------
// 3

fn criterion_3() -> Outcome {
    let tol = 1e-7;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut accepted = 0;
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    let mut fails = Vec::new();
    let mut attempts = 0;
    while accepted < 100 && attempts < 1000 {
        attempts += 1;
        let d = rng.gen_range(2..=4);
        let h = rng.gen_range(3..=8);
        let (mut inst, anchor) = random_polytope(&mut rng, d, h);
        inst.objective = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lp = match solve_lp(&inst, &[], None, 0) {
            Ok(lp) if lp.is_optimal() => lp,
            _ => continue,
        };
        if !lp.is_dual_nondegenerate(1e-7, &inst) {
            continue;
        }
        accepted += 1;
        let face = optimal_face_center(&inst, &[], &lp);
        let opt = collect_optima(&inst, &[], 3, accepted as u64);
        let (face, opt) = match (face, opt) {
            (Ok(f), Ok(o)) => (f, o),
            (Err(e), _) | (_, Err(e)) => {
                fails.push(e.to_string());
                continue;
            }
        };
        if opt.points.len() != 1 {
            fails.push(format!("{} optima on a non-degenerate LP", opt.points.len()));
        }
        for _ in 0..5 {
            // a cut between the anchor and the vertex, so it separates x_lp
            let a: Vec<f64> = lp.point.iter().zip(&anchor).map(|(x, y)| x - y + rng.gen_range(-0.3..0.3)).collect();
            let t = rng.gen_range(0.3..0.9);
            let p: Vec<f64> = anchor.iter().zip(&lp.point).map(|(y, x)| y + t * (x - y)).collect();
            let Ok(c) = Cut::new(a.clone(), oracle::dot(&a, &p), CutOrigin::Test, 0) else { continue };
            let e = measures::score_eff(&c, &lp.point).unwrap();
            let others = [
                measures::score_a_eff(&c, &face).unwrap(),
                measures::score_mineff(&c, &opt).unwrap(),
                measures::score_avgeff(&c, &opt).unwrap(),
            ];
            compared += 1;
            for v in others {
                worst = worst.max((v - e).abs());
            }
        }
    }
    if accepted < 100 {
        fails.push(format!("only {accepted} non-degenerate LPs sampled"));
    }
    if worst > tol {
        fails.push(format!("largest disagreement {worst:.2e}"));
    }
    let pass = fails.is_empty();
    check(
        pass,
        if pass { format!("{accepted} LPs, {compared} cuts, max deviation {worst:.1e}") } else { fails.join("; ") },
    )
}

// ---------------------------------------------------------------------------
// 4

fn criterion_4() -> Outcome {
    const N: usize = 1000;
    let runs: Vec<(&str, Box<dyn Fn() -> cutlab::Result<dominance::SuiteReport> + Sync>)> = vec![
        ("prop1 eff", Box::new(|| dominance::prop1_suite(MeasureKind::Eff, N, 41))),
        ("prop1 a-eff", Box::new(|| dominance::prop1_suite(MeasureKind::AEff, N, 42))),
        ("prop2 mineff", Box::new(|| dominance::prop2_suite(N, 43))),
        ("prop3 dcd", Box::new(|| dominance::prop3_suite(MeasureKind::Dcd, N, 44))),
        ("prop3 a-dcd", Box::new(|| dominance::prop3_suite(MeasureKind::ADcd, N, 45))),
        ("prop3 app-a-dcd", Box::new(|| dominance::prop3_suite(MeasureKind::AppADcd, N, 46))),
    ];
    let results: Vec<(String, cutlab::Result<dominance::SuiteReport>)> =
        runs.par_iter().map(|(name, f)| (name.to_string(), f())).collect();
    let mut fails = Vec::new();
    let mut summary = Vec::new();
    for (name, r) in results {
        match r {
            Ok(rep) => {
                summary.push(format!(
                    "{name}: {} inst, {} pairs, {} dominated, {} violations",
                    rep.instances, rep.pairs_checked, rep.dominated_pairs, rep.violations
                ));
                if rep.violations != 0 || rep.instances < N || rep.dominated_pairs == 0 {
                    fails.push(name);
                }
            }
            Err(e) => fails.push(format!("{name}: {e}")),
        }
    }
    let fig2b = construction_report(&dominance::build_fig2b_counterexample(), MeasureKind::Eff);
    let fig3 = dominance::build_fig3_counterexample();
    let fig3_exp = construction_report(&fig3, MeasureKind::ExpImprov);
    let fig3_eff = construction_report(&fig3, MeasureKind::Eff);
    match (fig2b, fig3_exp, fig3_eff) {
        (Ok(a), Ok(b), Ok(c)) => {
            summary.push(format!(
                "fig2b eff violations {}, fig3 exp-improv violations {}, fig3 eff violations {}",
                a.violations.len(),
                b.violations.len(),
                c.violations.len()
            ));
            if a.violations.is_empty() || b.violations.is_empty() || !c.violations.is_empty() {
                fails.push("constructions".into());
            }
        }
        _ => fails.push("construction errored".into()),
    }
    let pass = fails.is_empty();
    let detail = summary.join("; ");
    check(pass, if pass { detail } else { format!("{} [{}]", fails.join(", "), detail) })
}

// ---------------------------------------------------------------------------
// 5

fn validity_corpus() -> Vec<MipInstance<f64>> {
    let size = SizeParams { n: 16, m: 6 };
    let mut out = Vec::new();
    for (kind, count) in
        [(CorpusKind::Knapsack, 13), (CorpusKind::SetCover, 13), (CorpusKind::Packing, 12), (CorpusKind::Mixed, 12)]
    {
        out.extend(gen_corpus(kind, count, size, 500).unwrap());
    }
    out
}

fn criterion_5() -> Outcome {
    let corpus = validity_corpus();
    let max_int = corpus.iter().map(|i| i.integer.len()).max().unwrap_or(0);
    let opts = BnbOptions::default();
    let jobs: Vec<(usize, MeasureKind, u64)> = (0..corpus.len())
        .flat_map(|i| MeasureKind::ALL.iter().flat_map(move |&m| [1u64, 2, 3].map(|s| (i, m, s))))
        .collect();
    let refs: Vec<(Option<(f64, Vec<f64>)>, Option<Incumbent<f64>>)> = corpus
        .par_iter()
        .map(|inst| (brute_force_optimum(inst).unwrap(), reference_incumbent(inst, None).unwrap()))
        .collect();
    let problems: Vec<String> = jobs
        .par_iter()
        .filter_map(|&(i, m, s)| {
            let inst = &corpus[i];
            let cfg = SeparationConfig { measure: m, seed: s, ..SeparationConfig::default() };
            let out = match branch_and_cut_with(inst, &cfg, &opts, refs[i].1.as_ref()) {
                Ok(o) => o,
                Err(e) => return Some(format!("{} {m} {s}: {e}", inst.name)),
            };
            let viol = match max_cut_violation(inst, &out.cuts) {
                Ok(v) => v,
                Err(e) => return Some(format!("{} {m} {s}: {e}", inst.name)),
            };
            if viol > 1e-6 {
                return Some(format!("{} {m} {s}: a cut removes a feasible point ({viol:.2e})", inst.name));
            }
            let z = refs[i].0.as_ref().map(|r| r.0);
            match (z, out.stats.primal_bound, out.stats.status) {
                (Some(z), Some(p), SolveStatus::Optimal) if (p - z).abs() <= 1e-6 * (1.0 + z.abs()) => None,
                (None, None, SolveStatus::Infeasible) => None,
                other => Some(format!("{} {m} {s}: brute force {:?}, solver {:?}", inst.name, other.0, (other.1, other.2))),
            }
        })
        .collect();
    let pass = problems.is_empty() && max_int <= 20;
    check(
        pass,
        if pass {
            format!("{} instances (≤ {max_int} integer vars) × 8 measures × 3 seeds valid and optimal", corpus.len())
        } else {
            format!("{} problems, first: {}", problems.len(), problems.first().cloned().unwrap_or_default())
        },
    )
}

// ---------------------------------------------------------------------------
// 6, 7, 8, 9 share one run matrix

fn protocol_corpus() -> Vec<MipInstance<f64>> {
    let size = SizeParams { n: 16, m: 8 };
    let mut out = Vec::new();
    for kind in [CorpusKind::Knapsack, CorpusKind::SetCover, CorpusKind::Packing, CorpusKind::Mixed] {
        out.extend(gen_corpus(kind, 10, size, 900).unwrap());
    }
    out
}

fn protocol_config() -> MatrixConfig {
    MatrixConfig {
        base: SeparationConfig { rounds: 50, max_cuts_per_round: 10, ..SeparationConfig::default() },
        time_limit: Some(30.0),
        jobs: rayon::current_num_threads(),
    }
}

fn criterion_6(records: &[ExperimentRecord], corpus_len: usize) -> Outcome {
    let variants = Variant::all_measures();
    let mine: Vec<&ExperimentRecord> = records.iter().filter(|r| matches!(r.variant, Variant::Measure(_))).collect();
    let mut fails = Vec::new();
    if mine.len() != corpus_len * 8 * 3 {
        fails.push(format!("{} records, expected {}", mine.len(), corpus_len * 24));
    }
    let over = mine.iter().filter(|r| r.rounds_executed > 50 || r.cuts_per_round.iter().any(|&c| c > 10)).count();
    if over > 0 {
        fails.push(format!("{over} records exceed the round budget"));
    }
    let mut tables = Vec::new();
    for metric in [Metric::Nodes, Metric::Gap, Metric::Time] {
        let h = head_to_head(records, metric, &variants);
        tables.push(format!("{metric:?} over {} instances", h.instances));
        for i in 0..8 {
            for j in 0..8 {
                let complete = if i == j { h.win[i][j].is_none() } else { h.win[i][j].is_some() && h.loss[i][j].is_some() };
                if !complete || h.win[i][j] != h.loss[j][i] {
                    fails.push(format!("{metric:?} entry ({i},{j})"));
                }
            }
        }
        if h.instances == 0 && metric != Metric::Time {
            fails.push(format!("{metric:?} matrix is empty"));
        }
    }
    let pass = fails.is_empty();
    check(pass, if pass { format!("{} records; {}", mine.len(), tables.join(", ")) } else { fails.join("; ") })
}

fn criterion_7(records: &[ExperimentRecord]) -> Outcome {
    let mut fails = Vec::new();
    for r in records {
        if let Some(t) = r.variant.density_threshold() {
            if r.max_relative_density > t + 1e-12 {
                fails.push(format!("{} {} has density {}", r.instance, r.variant, r.max_relative_density));
            }
        }
    }
    let loose_to_tight: Vec<Variant> = Variant::density_sweep().into_iter().rev().collect();
    let table = match sgm_table(records, Metric::Gap, &loose_to_tight, None) {
        Ok(t) => t,
        Err(e) => return check(false, e.to_string()),
    };
    let sgms: Vec<f64> = table.rows.iter().map(|r| r.1).collect();
    let monotone = sgms.windows(2).all(|w| w[1] >= w[0]);
    if !monotone {
        fails.push("gap SGM improves somewhere as the threshold tightens".into());
    }
    let shown: Vec<String> = table.rows.iter().map(|r| format!("{}={:.4}", r.0, r.1)).collect();
    let pass = fails.is_empty();
    check(pass, format!("{}{}", if pass { "" } else { "monotonicity or filter failed; " }, shown.join(" ")))
}

fn criterion_8(records: &[ExperimentRecord]) -> Outcome {
    let mut fails = Vec::new();
    let sgm = |v: &[f64], s: f64| shifted_geo_mean(v, s).unwrap();
    if sgm(&[1.0, 1.0, 1.0], 1.0) != 1.0 {
        fails.push(format!("[1,1,1] → {}", sgm(&[1.0, 1.0, 1.0], 1.0)));
    }
    if sgm(&[0.0, 3.0], 1.0) != 1.0 {
        fails.push(format!("[0,3] → {}", sgm(&[0.0, 3.0], 1.0)));
    }
    for v in [0.0, 2.5, 17.0, 1234.0] {
        if sgm(&[v], 10.0) != v {
            fails.push(format!("single {v} → {}", sgm(&[v], 10.0)));
        }
    }
    let mut rows = 0;
    for metric in [Metric::Nodes, Metric::Gap] {
        for row in virtual_best_ratios(records, metric, &Variant::all_measures(), false) {
            rows += 1;
            let min = row.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            if min != 1.0 || row.ratios.iter().any(|&r| r < 1.0) {
                fails.push(format!("{} {metric:?} row minimum {min}", row.instance));
            }
        }
    }
    let pass = fails.is_empty() && rows > 0;
    check(pass, if pass { format!("hand cases exact; {rows} VBR rows with minimum 1") } else { fails.join("; ") })
}

fn criterion_9(records: &[ExperimentRecord]) -> Outcome {
    let mut fails = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let make = |rng: &mut ChaCha8Rng, n: usize, f: &dyn Fn(&[f64; 5]) -> f64| -> Vec<TrainingRecord> {
        (0..n)
            .map(|i| {
                let x: [f64; 5] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
                TrainingRecord { instance: format!("r{i}"), seed: 1, features: FeatureVector::from_array(x), targets: [f(&x); 8] }
            })
            .collect()
    };
    let tight = KernelParams { lambda: 1e-6, ..KernelParams::default() };
    let constant = make(&mut rng, 40, &|_| 1.0);
    match regress::train(&constant, tight, 0) {
        Ok(m) => {
            let worst = constant.iter().flat_map(|r| m.predict(&r.features)).map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
            if worst > 1e-3 {
                fails.push(format!("constant fit off by {worst:.2e}"));
            }
        }
        Err(e) => fails.push(e.to_string()),
    }
    let linear = make(&mut rng, 60, &|x| 0.2 + 0.5 * x[2]);
    match regress::train(&linear, tight, 0) {
        Ok(m) => {
            let mse = linear.iter().map(|r| (m.predict(&r.features)[3] - r.targets[3]).powi(2)).sum::<f64>() / 60.0;
            if mse >= 1e-4 {
                fails.push(format!("linear fit mse {mse:.2e}"));
            }
        }
        Err(e) => fails.push(e.to_string()),
    }
    let syn = synthetic_rule_corpus(400, 8);
    let (tr, held) = syn.split_at(320);
    let agree = match regress::train(tr, KernelParams::default(), 0) {
        Ok(m) => held.iter().filter(|r| m.pick_measure(&r.features) == argmax_measure(&r.targets)).count() as f64 / held.len() as f64,
        Err(e) => {
            fails.push(e.to_string());
            0.0
        }
    };
    if agree < 0.9 {
        fails.push(format!("synthetic agreement {agree:.3}"));
    }
    let picker = evaluate_picker(records, KernelParams::default(), 5, 0);
    let detail = match &picker {
        Ok(p) => {
            let sgm = |m: MeasureKind| p.sgm_fixed.iter().find(|e| e.0 == m).map(|e| e.1).unwrap_or(f64::NAN);
            let worst = sgm(p.worst_fixed);
            let best = sgm(p.best_fixed);
            if !(p.sgm_picked <= worst) {
                fails.push(format!("picked node SGM {:.3} above worst fixed {worst:.3}", p.sgm_picked));
            }
            format!(
                "synthetic agreement {agree:.3}; picked node SGM {:.3} over {} instances, best fixed {} {best:.3} ({}), worst fixed {} {worst:.3}",
                p.sgm_picked,
                p.instances,
                p.best_fixed,
                if p.sgm_picked < best { "picked beats it" } else { "picked does not beat it" },
                p.worst_fixed
            )
        }
        Err(e) => {
            fails.push(e.to_string());
            String::new()
        }
    };
    let pass = fails.is_empty();
    check(pass, if pass { detail } else { format!("{} [{}]", fails.join("; "), detail) })
}

// ---------------------------------------------------------------------------
// 10

fn cli(args: &[&str], cwd: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_cutlab")).args(args).current_dir(cwd).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut fails = Vec::new();
    let mut twice = |label: &str, args: &[&str], files: &[&str]| {
        let (c1, o1) = cli(args, d);
        let f1: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join(f)).unwrap_or_default()).collect();
        for f in files {
            let _ = fs::remove_file(d.join(f));
        }
        let (c2, o2) = cli(args, d);
        let f2: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join(f)).unwrap_or_default()).collect();
        if c1 != 0 || c2 != 0 {
            fails.push(format!("{label}: exit {c1}/{c2}"));
        } else if o1 != o2 || f1 != f2 {
            fails.push(format!("{label}: outputs differ"));
        }
    };
    twice("bench gen", &["bench", "gen", "--kind", "packing", "--count", "4", "--seed", "3", "--out", "corpus"], &[]);
    let inst = "corpus/packing-3-000.json";
    twice("solve", &["solve", inst, "--measure", "a-dcd", "--seed", "2"], &[]);
    twice("solve density", &["solve", inst, "--measure", "eff", "--density-threshold", "0.4"], &[]);
    twice(
        "bench run",
        &["bench", "run", "--corpus", "corpus", "--variants", "all,eff-20", "--seeds", "1,2", "--jobs", "4", "--out", "runs.jsonl"],
        &["runs.jsonl"],
    );
    let _ = cli(
        &["bench", "run", "--corpus", "corpus", "--variants", "all,eff-20", "--seeds", "1,2", "--jobs", "4", "--out", "runs.jsonl"],
        d,
    );
    twice("bench stats h2h", &["bench", "stats", "--in", "runs.jsonl", "--metric", "nodes", "--table", "h2h"], &[]);
    twice("bench stats vbr", &["bench", "stats", "--in", "runs.jsonl", "--metric", "gap", "--table", "vbr"], &[]);
    twice("bench export", &["bench", "export", "--in", "runs.jsonl", "--out", "train.csv"], &["train.csv"]);
    let _ = cli(&["bench", "export", "--in", "runs.jsonl", "--out", "train.csv"], d);
    twice("regress train", &["regress", "train", "--in", "train.csv", "--out", "model.json"], &["model.json"]);
    let _ = cli(&["regress", "train", "--in", "train.csv", "--out", "model.json"], d);
    twice("regress predict", &["regress", "predict", "--model", "model.json", "--features", "0.1,0.2,0.3,0.4,0.5"], &[]);
    twice("regress pick", &["regress", "pick", "--model", "model.json", "--features", "0.6,0,0.5,0,1"], &[]);
    twice("regress regions", &["regress", "regions", "--model", "model.json", "--out", "grid.csv", "--resolution", "20"], &["grid.csv"]);
    twice("dominance suite", &["dominance", "suite", "--prop", "3", "--measure", "a-dcd", "--instances", "30"], &[]);
    twice("dominance fig3", &["dominance", "fig3"], &[]);
    let (code, _) = cli(&["solve", "missing.json"], d);
    if code != 2 {
        fails.push(format!("missing input exits {code}"));
    }
    let pass = fails.is_empty();
    check(pass, if pass { "15 invocations byte-identical on repeat".to_string() } else { fails.join("; ") })
}

// ---------------------------------------------------------------------------

fn report(n: usize, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = limit.map_or(true, |l| took <= l);
    let pass = out.pass && in_time;
    let budget = limit.map(|l| format!(" / limit {:.0}s", l.as_secs_f64())).unwrap_or_default();
    println!(
        "criterion {n}: {} ({:.2}s{budget}) {}{}",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        out.detail,
        if in_time { "" } else { " [over time limit]" }
    );
    pass
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let list_only = std::env::args().any(|a| a == "--list");
    if list_only {
        println!("acceptance: test");
        return;
    }
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    let mut ok = Vec::new();
    ok.push(report(1, Some(Duration::from_secs(1)), criterion_1));
    ok.push(report(2, Some(Duration::from_secs(10)), criterion_2));
    ok.push(report(3, Some(Duration::from_secs(30)), criterion_3));
    ok.push(report(4, mins(5), criterion_4));
    ok.push(report(5, mins(15), criterion_5));

    let corpus = protocol_corpus();
    let cfg = protocol_config();
    let start = Instant::now();
    let measures_only = run_matrix(&corpus, &Variant::all_measures(), &[1, 2, 3], &cfg, None).expect("measure matrix");
    let matrix_time = start.elapsed();
    ok.push(report(6, None, || criterion_6(&measures_only, corpus.len())));
    let mut sweep = Vec::new();
    ok.push(report(7, mins(20), || {
        sweep = run_matrix(&corpus, &Variant::density_sweep(), &[1, 2, 3], &cfg, None).expect("density matrix");
        criterion_7(&sweep)
    }));
    ok.push(report(8, None, || criterion_8(&measures_only)));
    ok.push(report(9, None, || criterion_9(&measures_only)));
    ok.push(report(10, None, criterion_10));
    println!(
        "protocol corpus: {} instances, measure matrix {:.1}s, {} of 10 criteria pass",
        corpus.len(),
        matrix_time.as_secs_f64(),
        ok.iter().filter(|&&b| b).count()
    );
    if ok.iter().any(|&b| !b) {
        std::process::exit(1);
    }
}

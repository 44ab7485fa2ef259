//! Cut dominance over a polytope and randomized consistency checks.
//!
//! `A` dominates `B` on `P` when every point of `P` cut off by `B` is also cut
//! off by `A`, and `A` cuts off some point `B` keeps. "Cut off" means
//! violation above `feas_tol` after scaling both cuts to unit norm. Each
//! direction is one LP: maximize the violation of one cut over `P` intersected
//! with the other cut.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist_inf, dot, norm2, sub};
use crate::lp_barrier::{analytic_center, optimal_face_center};
use crate::lp_simplex::solve_lp;
use crate::alt_optima::{collect_optima_from, OptimaSet};
use crate::measures::{score_a_dcd, score_a_eff, score_directed, score_eff, score_exp_improv, score_mineff, MeasureKind};
use crate::model::{lp_violation, Cut, CutOrigin, LpStatus, MipInstance};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    ADominatesB,
    BDominatesA,
    Equivalent,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DominanceVerdict<T> {
    pub relation: Relation,
    /// A point of `P` cut off by `A` but not by `B`, when one exists.
    pub cut_by_a_only: Option<Vec<T>>,
    pub cut_by_b_only: Option<Vec<T>>,
    /// Largest violation of `B` over `P ∩ {A satisfied}`.
    pub max_b_given_a: T,
    pub max_a_given_b: T,
}

/// max violation of `target` over P ∩ {`guard` satisfied}; `-inf` if empty.
fn max_violation_given<T: Real>(
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    target: &Cut<T>,
    guard: &Cut<T>,
) -> Result<(T, Option<Vec<T>>)> {
    let mut rows = cuts.to_vec();
    rows.push(guard.clone());
    let obj: Vec<T> = target.coeffs.iter().map(|&v| -v).collect();
    let lp = solve_lp(inst, &rows, Some(&obj), 0)?;
    match lp.status {
        LpStatus::Optimal => {
            let v = dot(&target.coeffs, &lp.point) - target.rhs;
            Ok((v, Some(lp.point)))
        }
        LpStatus::Infeasible => Ok((T::neg_infinity(), None)),
        LpStatus::Unbounded => Ok((T::infinity(), None)),
    }
}

/// Classifies the pair `(a, b)` on the polytope of `inst` with `cuts_in_lp`.
pub fn check_dominance<T: Real>(
    inst: &MipInstance<T>,
    cuts_in_lp: &[Cut<T>],
    a: &Cut<T>,
    b: &Cut<T>,
    feas_tol: T,
) -> Result<DominanceVerdict<T>> {
    if a.dim() != inst.n() || b.dim() != inst.n() {
        return Err(Error::DimensionMismatch { expected: inst.n(), found: a.dim().min(b.dim()) });
    }
    let zero = vec![T::zero(); inst.n()];
    if solve_lp(inst, cuts_in_lp, Some(&zero), 0)?.status == LpStatus::Infeasible {
        return Err(Error::RegionEmpty);
    }
    let (a, b) = (a.normalized(), b.normalized());
    let (mb, wb) = max_violation_given(inst, cuts_in_lp, &b, &a)?;
    let (ma, wa) = max_violation_given(inst, cuts_in_lp, &a, &b)?;
    let b_extra = mb > feas_tol;
    let a_extra = ma > feas_tol;
    let relation = match (a_extra, b_extra) {
        (true, false) => Relation::ADominatesB,
        (false, true) => Relation::BDominatesA,
        (false, false) => Relation::Equivalent,
        (true, true) => Relation::Incomparable,
    };
    Ok(DominanceVerdict {
        relation,
        cut_by_a_only: if a_extra { wa } else { None },
        cut_by_b_only: if b_extra { wb } else { None },
        max_b_given_a: mb,
        max_a_given_b: ma,
    })
}

/// A pair where the higher-scored cut is dominated by the lower-scored one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConsistencyViolation<T> {
    pub higher: usize,
    pub lower: usize,
    pub score_higher: T,
    pub score_lower: T,
    /// Point cut by the lower-scored (dominating) cut only.
    pub witness: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConsistencyReport<T> {
    pub scores: Vec<T>,
    pub pairs_checked: usize,
    /// Pairs excluded because a hypothesis gate failed.
    pub pairs_excluded: usize,
    pub violations: Vec<ConsistencyViolation<T>>,
}

/// Score margin above which one cut counts as strictly preferred.
pub const SCORE_MARGIN: f64 = 1e-7;

fn consistency_with_gate<T: Real>(
    inst: &MipInstance<T>,
    cuts_in_lp: &[Cut<T>],
    cut_set: &[Cut<T>],
    scores: Vec<T>,
    feas_tol: T,
    mut gate: impl FnMut(usize, usize) -> bool,
) -> Result<ConsistencyReport<T>> {
    let mut rep = ConsistencyReport { scores, pairs_checked: 0, pairs_excluded: 0, violations: Vec::new() };
    let margin = T::of(SCORE_MARGIN);
    for i in 0..cut_set.len() {
        for j in 0..cut_set.len() {
            if i == j || !(rep.scores[i] > rep.scores[j] + margin) {
                continue;
            }
            if !gate(i, j) {
                rep.pairs_excluded += 1;
                continue;
            }
            rep.pairs_checked += 1;
            let v = check_dominance(inst, cuts_in_lp, &cut_set[i], &cut_set[j], feas_tol)?;
            if v.relation == Relation::BDominatesA {
                rep.violations.push(ConsistencyViolation {
                    higher: i,
                    lower: j,
                    score_higher: rep.scores[i],
                    score_lower: rep.scores[j],
                    witness: v.cut_by_b_only,
                });
            }
        }
    }
    Ok(rep)
}

/// Checks that no cut scored strictly higher by `measure` is dominated.
pub fn check_consistency<T: Real>(
    inst: &MipInstance<T>,
    cuts_in_lp: &[Cut<T>],
    cut_set: &[Cut<T>],
    measure: impl Fn(&Cut<T>) -> Result<T>,
    feas_tol: T,
) -> Result<ConsistencyReport<T>> {
    let scores = cut_set.iter().map(&measure).collect::<Result<Vec<T>>>()?;
    consistency_with_gate(inst, cuts_in_lp, cut_set, scores, feas_tol, |_, _| true)
}

/// Orthogonal projection of `x` onto the hyperplane of `cut`.
pub fn project<T: Real>(cut: &Cut<T>, x: &[T]) -> Vec<T> {
    let nn = dot(&cut.coeffs, &cut.coeffs);
    let t = (dot(&cut.coeffs, x) - cut.rhs) / nn;
    x.iter().zip(&cut.coeffs).map(|(&xi, &ai)| xi - t * ai).collect()
}

/// mineff consistency, restricted to pairs where the lower-scored cut `B`
/// separates one of its active solutions and the projection of that solution
/// onto `B` is LP-feasible. Other pairs are counted in `pairs_excluded`.
pub fn check_mineff_consistency<T: Real>(
    inst: &MipInstance<T>,
    cuts_in_lp: &[Cut<T>],
    cut_set: &[Cut<T>],
    optima: &OptimaSet<T>,
    feas_tol: T,
) -> Result<ConsistencyReport<T>> {
    let scores = cut_set.iter().map(|c| score_mineff(c, optima)).collect::<std::result::Result<Vec<T>, _>>()?;
    let active_ok: Vec<bool> = cut_set
        .iter()
        .zip(&scores)
        .map(|(c, &s)| {
            optima.points.iter().any(|x0| {
                let e = score_eff(c, x0).unwrap_or(T::neg_infinity());
                let active = (e - s).abs() <= T::of(1e-9) * (T::one() + s.abs());
                active && e > feas_tol && lp_violation(inst, cuts_in_lp, &project(c, x0)) <= feas_tol
            })
        })
        .collect();
    consistency_with_gate(inst, cuts_in_lp, cut_set, scores, feas_tol, |_, j| active_ok[j])
}

/// Box `[0,10]^d` intersected with `h` random half-spaces, each keeping a
/// sampled anchor point strictly inside. Returns the instance and the anchor.
pub fn random_polytope(rng: &mut impl Rng, d: usize, h: usize) -> (MipInstance<f64>, Vec<f64>) {
    let anchor: Vec<f64> = (0..d).map(|_| rng.gen_range(3.0..7.0)).collect();
    let mut rows = Vec::with_capacity(h);
    let mut rhs = Vec::with_capacity(h);
    while rows.len() < h {
        let mut a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = norm2(&a);
        if nrm < 0.2 {
            continue;
        }
        a.iter_mut().for_each(|v| *v /= nrm);
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..10.0)).collect();
        let mut b = dot(&a, &p);
        let gap = b - dot(&a, &anchor);
        if gap.abs() < 0.5 {
            continue;
        }
        if gap < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            b = -b;
        }
        rows.push(a);
        rhs.push(b);
    }
    let inst = MipInstance::with_le_rows("random", vec![0.0; d], rows, rhs, vec![0.0; d], vec![10.0; d], vec![])
        .expect("generated polytope is well formed");
    (inst, anchor)
}

/// A vertex of `inst` minimizing a random objective, and the objective.
fn random_vertex(inst: &MipInstance<f64>, rng: &mut impl Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let c: Vec<f64> = (0..inst.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lp = solve_lp(inst, &[], Some(&c), 0)?;
    if !lp.is_optimal() {
        return Err(Error::LpNotOptimal(lp.status));
    }
    Ok((lp.point, c))
}

/// Random point of `P` as a convex combination of the anchor and vertices.
fn random_point(inst: &MipInstance<f64>, anchor: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mut y = anchor.to_vec();
    for _ in 0..2 {
        let (v, _) = random_vertex(inst, rng)?;
        let t = rng.gen_range(0.0..0.9);
        y = y.iter().zip(&v).map(|(&a, &b)| (1.0 - t) * a + t * b).collect();
    }
    Ok(y)
}

/// The cut through `p` whose normal points from `p` to `x`. The projection of
/// `x` onto it is `p`.
fn cut_facing(x: &[f64], p: &[f64]) -> Option<Cut<f64>> {
    let d = sub(x, p);
    let len = norm2(&d);
    if len < 1e-3 {
        return None;
    }
    let alpha: Vec<f64> = d.iter().map(|v| v / len).collect();
    let beta = dot(&alpha, p);
    Cut::new(alpha, beta, CutOrigin::Test, 0).ok()
}

/// Aggregate outcome of a randomized suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub measure: String,
    pub instances: usize,
    pub pairs_checked: usize,
    pub pairs_excluded: usize,
    pub violations: usize,
    /// Pairs where one cut dominated the other (the guarantee was exercised).
    pub dominated_pairs: usize,
}

impl SuiteReport {
    fn absorb(&mut self, rep: &ConsistencyReport<f64>) {
        self.instances += 1;
        self.pairs_checked += rep.pairs_checked;
        self.pairs_excluded += rep.pairs_excluded;
        self.violations += rep.violations.len();
    }
}

fn count_dominated(inst: &MipInstance<f64>, cuts: &[Cut<f64>]) -> Result<usize> {
    let mut k = 0;
    for i in 0..cuts.len() {
        for j in i + 1..cuts.len() {
            let v = check_dominance(inst, &[], &cuts[i], &cuts[j], 1e-6)?;
            if matches!(v.relation, Relation::ADominatesB | Relation::BDominatesA) {
                k += 1;
            }
        }
    }
    Ok(k)
}

/// Euclidean measures with every cut separating the reference point and every
/// projection LP-feasible. `measure` is `Eff` (reference `x_LP`) or `AEff`
/// (reference `x_F`, with a facet-aligned objective to make the face large).
pub fn prop1_suite(measure: MeasureKind, instances: usize, seed: u64) -> Result<SuiteReport> {
    if !matches!(measure, MeasureKind::Eff | MeasureKind::AEff) {
        return Err(Error::InvalidInput(format!("{measure} is not a Euclidean projection measure")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport { measure: measure.name().into(), ..Default::default() };
    while rep.instances < instances {
        let d = rng.gen_range(2..=4);
        let h = rng.gen_range(3..=8);
        let (mut inst, anchor) = random_polytope(&mut rng, d, h);
        let x = if measure == MeasureKind::Eff {
            random_vertex(&inst, &mut rng)?.0
        } else {
            let r = rng.gen_range(0..inst.m());
            inst.objective = inst.rows[r].iter().map(|v| -v).collect();
            let lp = solve_lp(&inst, &[], None, 0)?;
            match optimal_face_center(&inst, &[], &lp) {
                Ok(c) => c.point,
                Err(_) => continue,
            }
        };
        let cuts = prop1_cuts(&inst, &anchor, &x, &mut rng)?;
        let r = check_consistency(
            &inst,
            &[],
            &cuts,
            |c| match measure {
                MeasureKind::Eff => Ok(score_eff(c, &x)?),
                _ => Ok(score_a_eff(
                    c,
                    &crate::model::CenterPoint {
                        point: x.clone(),
                        kind: crate::model::CenterKind::OptimalFaceCenter,
                        newton_iters: 0,
                        residual: 0.0,
                        relaxation_slack: 0.0,
                    },
                )?),
            },
            1e-6,
        )?;
        rep.absorb(&r);
        rep.dominated_pairs += count_dominated(&inst, &cuts)?;
    }
    Ok(rep)
}

fn prop1_cuts(inst: &MipInstance<f64>, anchor: &[f64], x: &[f64], rng: &mut impl Rng) -> Result<Vec<Cut<f64>>> {
    let mut cuts = Vec::new();
    let k = rng.gen_range(3..=6);
    let mut targets: Vec<Vec<f64>> = Vec::new();
    while cuts.len() < k {
        // reuse an earlier target sometimes so nested (dominated) pairs occur
        let y = if !targets.is_empty() && rng.gen_bool(0.4) {
            targets[rng.gen_range(0..targets.len())].clone()
        } else {
            let y = random_point(inst, anchor, rng)?;
            targets.push(y.clone());
            y
        };
        let t = rng.gen_range(0.05..0.95);
        let p: Vec<f64> = x.iter().zip(&y).map(|(&a, &b)| a + t * (b - a)).collect();
        if let Some(c) = cut_facing(x, &p) {
            cuts.push(c);
        }
    }
    Ok(cuts)
}

/// Directed measures with every cut separating `x_LP` and crossing the segment
/// to the LP-feasible target (`Dcd`: a random feasible point; `ADcd`: the
/// analytic center; `AppADcd`: the center of a relaxation, recomputed when it
/// is cut off).
pub fn prop3_suite(measure: MeasureKind, instances: usize, seed: u64) -> Result<SuiteReport> {
    if !matches!(measure, MeasureKind::Dcd | MeasureKind::ADcd | MeasureKind::AppADcd) {
        return Err(Error::InvalidInput(format!("{measure} is not a directed measure")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport { measure: measure.name().into(), ..Default::default() };
    while rep.instances < instances {
        let d = rng.gen_range(2..=4);
        let h = rng.gen_range(3..=8);
        let (inst, anchor) = random_polytope(&mut rng, d, h);
        let (x, _) = random_vertex(&inst, &mut rng)?;
        let target = match measure {
            MeasureKind::Dcd => random_point(&inst, &anchor, &mut rng)?,
            MeasureKind::ADcd => analytic_center(&inst, &[])?.point,
            _ => {
                let mut relaxed = inst.clone();
                relaxed.rows.pop();
                relaxed.rhs.pop();
                relaxed.row_kind.pop();
                let c = analytic_center(&relaxed, &[])?.point;
                if lp_violation(&inst, &[], &c) <= 1e-6 {
                    c
                } else {
                    analytic_center(&inst, &[])?.point
                }
            }
        };
        if dist_inf(&x, &target) < 1e-3 {
            continue;
        }
        let mut cuts = Vec::new();
        let k = rng.gen_range(3..=6);
        let dir = sub(&x, &target);
        while cuts.len() < k {
            let t = rng.gen_range(0.05..0.95);
            let p: Vec<f64> = target.iter().zip(&dir).map(|(&a, &b)| a + t * b).collect();
            let mut a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nrm = norm2(&a);
            if nrm < 0.2 {
                continue;
            }
            a.iter_mut().for_each(|v| *v /= nrm);
            let cos = dot(&a, &dir) / norm2(&dir);
            if cos.abs() < 0.05 {
                continue;
            }
            if cos < 0.0 {
                a.iter_mut().for_each(|v| *v = -*v);
            }
            let b = dot(&a, &p);
            cuts.push(Cut::new(a, b, CutOrigin::Test, 0)?);
        }
        let r = check_consistency(&inst, &[], &cuts, |c| Ok(score_directed(c, &x, &target)?), 1e-6)?;
        rep.absorb(&r);
        rep.dominated_pairs += count_dominated(&inst, &cuts)?;
    }
    Ok(rep)
}

/// mineff over the vertices of a facet-aligned optimal face.
pub fn prop2_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport { measure: MeasureKind::MinEff.name().into(), ..Default::default() };
    while rep.instances < instances {
        let d = rng.gen_range(2..=4);
        let h = rng.gen_range(3..=8);
        let (mut inst, anchor) = random_polytope(&mut rng, d, h);
        let r = rng.gen_range(0..inst.m());
        inst.objective = inst.rows[r].iter().map(|v| -v).collect();
        let lp = solve_lp(&inst, &[], None, 0)?;
        let optima = collect_optima_from(&inst, &[], &lp, 3, seed.wrapping_add(rep.instances as u64))?;
        let mut cuts = Vec::new();
        let k = rng.gen_range(3..=6);
        while cuts.len() < k {
            let x0 = &optima.points[rng.gen_range(0..optima.points.len())];
            let y = random_point(&inst, &anchor, &mut rng)?;
            let t = rng.gen_range(0.05..0.95);
            let p: Vec<f64> = x0.iter().zip(&y).map(|(&a, &b)| a + t * (b - a)).collect();
            if let Some(c) = cut_facing(x0, &p) {
                cuts.push(c);
            }
        }
        let r = check_mineff_consistency(&inst, &[], &cuts, &optima, 1e-6)?;
        rep.absorb(&r);
        rep.dominated_pairs += count_dominated(&inst, &cuts)?;
    }
    Ok(rep)
}

/// Triangle `(0,0), (10,6), (6,10)` with `min x1 + x2`, so `x_LP = (0,0)`.
/// The dashed cut `x1 ≥ 2` dominates the dotted cut `x1 + x2 ≥ 2.97`, but the
/// projection of `x_LP` onto the dashed cut is infeasible and eff prefers the
/// dotted one.
#[derive(Debug, Clone)]
pub struct Construction {
    pub inst: MipInstance<f64>,
    pub dashed: Cut<f64>,
    pub dotted: Cut<f64>,
    pub x_lp: Vec<f64>,
    pub objective: Vec<f64>,
}

pub fn build_fig2b_counterexample() -> Construction {
    // edges: x2 ≥ 0.6 x1, x1 ≥ 0.6 x2, x1 + x2 ≤ 16
    let inst = MipInstance::with_le_rows(
        "fig2b",
        vec![1.0, 1.0],
        vec![vec![0.6, -1.0], vec![-1.0, 0.6], vec![1.0, 1.0]],
        vec![0.0, 0.0, 16.0],
        vec![0.0, 0.0],
        vec![10.0, 10.0],
        vec![0, 1],
    )
    .expect("static construction");
    Construction {
        inst,
        dashed: Cut::test(&[-1.0, 0.0], -2.0),
        dotted: Cut::test(&[-1.0, -1.0], -2.97),
        x_lp: vec![0.0, 0.0],
        objective: vec![1.0, 1.0],
    }
}

/// Pentagon `a(4,3.2), e(3,2), b(2,2), c(16/9,2.5), d(3,3)` with `min −x1`, so
/// `x_LP = a`. The dotted cut `5x1 + 6x2 ≤ 33` is dominated by the dashed cut
/// `5x1 + x2 ≤ 18`; both projections of `a` are feasible, eff ranks the
/// dashed cut higher, exp-improv ranks the dotted cut higher.
pub fn build_fig3_counterexample() -> Construction {
    let inst = MipInstance::with_le_rows(
        "fig3",
        vec![-1.0, 0.0],
        vec![
            vec![6.0, -5.0],
            vec![0.0, -1.0],
            vec![-9.0, -4.0],
            vec![-9.0, 22.0],
            vec![-1.0, 5.0],
        ],
        vec![8.0, -2.0, -26.0, 39.0, 12.0],
        vec![0.0, 0.0],
        vec![10.0, 10.0],
        vec![0, 1],
    )
    .expect("static construction");
    Construction {
        inst,
        dashed: Cut::test(&[5.0, 1.0], 18.0),
        dotted: Cut::test(&[5.0, 6.0], 33.0),
        x_lp: vec![4.0, 3.2],
        objective: vec![-1.0, 0.0],
    }
}

/// Consistency report of `measure` on a construction's two cuts
/// (index 0 = dashed, 1 = dotted).
pub fn construction_report(k: &Construction, measure: MeasureKind) -> Result<ConsistencyReport<f64>> {
    let cuts = vec![k.dashed.clone(), k.dotted.clone()];
    check_consistency(
        &k.inst,
        &[],
        &cuts,
        |c| match measure {
            MeasureKind::Eff => Ok(score_eff(c, &k.x_lp)?),
            MeasureKind::ExpImprov => Ok(score_exp_improv(c, &k.x_lp, &k.objective)?),
            MeasureKind::ADcd => {
                let center = analytic_center(&k.inst, &[])?;
                Ok(score_a_dcd(c, &k.x_lp, &center)?)
            }
            other => Err(Error::InvalidInput(format!("{other} is not supported on constructions"))),
        },
        1e-6,
    )
}

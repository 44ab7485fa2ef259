//! Best-bound branch-and-bound over the cut-strengthened root relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cutpipe::{run_separation_with, GomoryOptions, RoundReport, SeparationConfig};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::lp_simplex::{solve_lp_with, LpOptions};
use crate::model::{is_lp_feasible, Cut, Incumbent, IncumbentSource, LpStatus, MipInstance};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    Infeasible,
}

/// How `solve_time` is measured. `Work` charges a fixed cost per simplex
/// iteration and is reproducible; `Wall` reads the system clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ClockKind {
    #[default]
    Work,
    Wall,
}

/// Seconds charged per simplex iteration by the work clock.
pub const WORK_SECONDS_PER_ITERATION: f64 = 1e-6;

struct Clock {
    kind: ClockKind,
    start: Instant,
}

impl Clock {
    fn new(kind: ClockKind) -> Self {
        Clock { kind, start: Instant::now() }
    }

    fn seconds(&self, iterations: usize) -> f64 {
        match self.kind {
            ClockKind::Work => iterations as f64 * WORK_SECONDS_PER_ITERATION,
            ClockKind::Wall => self.start.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub nodes_processed: usize,
    pub lp_iterations_total: usize,
    pub solve_time: f64,
    /// `None` when no integer-feasible point is known.
    pub primal_bound: Option<f64>,
    /// `None` when the instance is infeasible.
    pub dual_bound: Option<f64>,
    pub status: SolveStatus,
    /// Primal minus dual bound after separation; `None` without a primal bound.
    pub gap_after_root: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// In seconds of the chosen clock.
    pub time_limit: Option<f64>,
    pub clock: ClockKind,
    pub lp: LpOptions,
    pub gomory: GomoryOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions { time_limit: None, clock: ClockKind::Work, lp: LpOptions::default(), gomory: GomoryOptions::default() }
    }
}

/// Everything a branch-and-cut run produces beyond its [`NodeStats`].
#[derive(Debug, Clone)]
pub struct BnbOutcome<T> {
    pub stats: NodeStats,
    pub cuts: Vec<Cut<T>>,
    pub reports: Vec<RoundReport>,
    /// `None` when the root LP is infeasible.
    pub features: Option<FeatureVector>,
    pub incumbent: Option<Incumbent<T>>,
    /// Global dual bound after each processed node.
    pub dual_trace: Vec<f64>,
}

struct Node<T> {
    bound: f64,
    id: usize,
    lower: Vec<T>,
    upper: Vec<T>,
}

// min-heap on (bound, id)
impl<T> Ord for Node<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

impl<T> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Node<T> {}

/// Whether a bound `z` can still beat the incumbent value `inc`.
fn improves(z: f64, inc: f64) -> bool {
    !inc.is_finite() || z < inc - 1e-6 * (1.0 + inc.abs())
}

/// Integer variable whose LP value is closest to half-integral; lowest index
/// on ties. `None` if all are integral.
fn most_fractional<T: Real>(inst: &MipInstance<T>, x: &[T], int_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in &inst.integer {
        let v = x[j].as_f64();
        let f = v - v.floor();
        if f <= int_tol || f >= 1.0 - int_tol {
            continue;
        }
        let score = f.min(1.0 - f);
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

/// Incumbent from an LP point that is integral within tolerance. Integer
/// coordinates are rounded when the rounded point stays feasible.
fn node_incumbent<T: Real>(inst: &MipInstance<T>, point: Vec<T>, value: T, feas: f64) -> Incumbent<T> {
    let mut r = point.clone();
    for &j in &inst.integer {
        r[j] = r[j].round();
    }
    if is_lp_feasible(inst, &[], &r, T::of(feas)) {
        let value = inst.objective_value(&r);
        return Incumbent { point: r, value, source: IncumbentSource::Node };
    }
    Incumbent { point, value, source: IncumbentSource::Node }
}

pub fn branch_and_cut<T: Real>(
    inst: &MipInstance<T>,
    cfg: &SeparationConfig,
    time_limit: Option<f64>,
    provided_incumbent: Option<&Incumbent<T>>,
) -> Result<NodeStats> {
    let opts = BnbOptions { time_limit, ..BnbOptions::default() };
    Ok(branch_and_cut_with(inst, cfg, &opts, provided_incumbent)?.stats)
}

pub fn branch_and_cut_with<T: Real>(
    inst: &MipInstance<T>,
    cfg: &SeparationConfig,
    opts: &BnbOptions,
    provided_incumbent: Option<&Incumbent<T>>,
) -> Result<BnbOutcome<T>> {
    inst.validate()?;
    let clock = Clock::new(opts.clock);
    let sep = match run_separation_with(inst, cfg, provided_incumbent, &opts.lp, &opts.gomory) {
        Ok(s) => s,
        Err(Error::LpNotOptimal(LpStatus::Infeasible)) => {
            return Ok(BnbOutcome {
                stats: NodeStats {
                    nodes_processed: 1,
                    lp_iterations_total: 0,
                    solve_time: clock.seconds(0),
                    primal_bound: None,
                    dual_bound: None,
                    status: SolveStatus::Infeasible,
                    gap_after_root: None,
                },
                cuts: Vec::new(),
                reports: Vec::new(),
                features: None,
                incumbent: None,
                dual_trace: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };
    let int_tol = cfg.tol.int;
    let mut iterations = sep.lp_iterations;
    let mut incumbent: Option<Incumbent<T>> = provided_incumbent.cloned();
    let inc_value = |inc: &Option<Incumbent<T>>| inc.as_ref().map_or(f64::INFINITY, |i| i.value.as_f64());

    let root_value = sep.final_lp.value.as_f64();
    let root_branch = most_fractional(inst, &sep.final_lp.point, int_tol);
    if root_branch.is_none() && root_value < inc_value(&incumbent) {
        incumbent = Some(node_incumbent(inst, sep.final_lp.point.clone(), sep.final_lp.value, cfg.tol.feas));
    }
    let gap_after_root = incumbent.as_ref().map(|i| (i.value.as_f64() - root_value).max(0.0));

    let mut heap: BinaryHeap<Node<T>> = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut nodes = 1usize;
    let mut dual_trace = vec![root_value.min(inc_value(&incumbent))];
    let mut timed_out = false;

    let mut branch = |heap: &mut BinaryHeap<Node<T>>, lower: &[T], upper: &[T], x: &[T], j: usize, bound: f64| {
        let v = x[j].as_f64();
        let mut up = upper.to_vec();
        up[j] = T::of(v.floor());
        heap.push(Node { bound, id: next_id, lower: lower.to_vec(), upper: up });
        let mut lo = lower.to_vec();
        lo[j] = T::of(v.ceil());
        heap.push(Node { bound, id: next_id + 1, lower: lo, upper: upper.to_vec() });
        next_id += 2;
    };

    if let Some(j) = root_branch {
        if improves(root_value, inc_value(&incumbent)) {
            branch(&mut heap, &inst.lower, &inst.upper, &sep.final_lp.point, j, root_value);
        }
    }

    while let Some(node) = heap.peek() {
        if !improves(node.bound, inc_value(&incumbent)) {
            heap.clear();
            break;
        }
        if let Some(limit) = opts.time_limit {
            if clock.seconds(iterations) >= limit {
                timed_out = true;
                break;
            }
        }
        let node = heap.pop().expect("peeked");
        let sub = inst.with_bounds(node.lower.clone(), node.upper.clone());
        let (lp, _) = solve_lp_with(&sub, &sep.cuts, None, cfg.seed, &opts.lp)?;
        nodes += 1;
        iterations += lp.iterations;
        match lp.status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(Error::LpNotOptimal(LpStatus::Unbounded)),
            LpStatus::Optimal => {
                let z = lp.value.as_f64();
                if improves(z, inc_value(&incumbent)) {
                    match most_fractional(inst, &lp.point, int_tol) {
                        None => {
                            incumbent = Some(node_incumbent(inst, lp.point, lp.value, cfg.tol.feas))
                        }
                        Some(j) => branch(&mut heap, &node.lower, &node.upper, &lp.point, j, z.max(node.bound)),
                    }
                }
            }
        }
        let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
        let last = *dual_trace.last().expect("seeded with the root");
        dual_trace.push(open.min(inc_value(&incumbent)).max(last));
    }

    let primal = incumbent.as_ref().map(|i| i.value.as_f64());
    let (status, dual) = if timed_out {
        let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
        (SolveStatus::TimeLimit, Some(open.min(primal.unwrap_or(f64::INFINITY))))
    } else if let Some(p) = primal {
        (SolveStatus::Optimal, Some(p))
    } else {
        (SolveStatus::Infeasible, None)
    };
    Ok(BnbOutcome {
        stats: NodeStats {
            nodes_processed: nodes,
            lp_iterations_total: iterations,
            solve_time: clock.seconds(iterations),
            primal_bound: primal,
            dual_bound: dual,
            status,
            gap_after_root,
        },
        cuts: sep.cuts,
        reports: sep.reports,
        features: Some(sep.features),
        incumbent,
        dual_trace,
    })
}

/// Assignment count above which enumeration refuses to run.
pub const ENUMERATION_BUDGET: f64 = (1u64 << 22) as f64;

fn integer_domains<T: Real>(inst: &MipInstance<T>) -> Result<Vec<Vec<f64>>> {
    if inst.integer.len() > 22 {
        return Err(Error::BudgetExceeded(format!("{} integer variables (at most 22)", inst.integer.len())));
    }
    let mut total = 1.0f64;
    let mut doms = Vec::with_capacity(inst.integer.len());
    for &j in &inst.integer {
        let (l, u) = (inst.lower[j].as_f64().ceil(), inst.upper[j].as_f64().floor());
        if !l.is_finite() || !u.is_finite() || u - l + 1.0 > 4.0 {
            return Err(Error::BudgetExceeded(format!("variable {j} has more than 4 integer values")));
        }
        let vals: Vec<f64> = (0..).map(|k| l + k as f64).take_while(|&v| v <= u).collect();
        total *= vals.len().max(1) as f64;
        doms.push(vals);
    }
    if total > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded(format!("{total} assignments")));
    }
    Ok(doms)
}

/// Calls `f` on every assignment of the integer variables (in `inst.integer`
/// order), lexicographic with the first variable slowest.
fn for_each_assignment(doms: &[Vec<f64>], mut f: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
    if doms.iter().any(|d| d.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; doms.len()];
    let mut vals: Vec<f64> = doms.iter().map(|d| d[0]).collect();
    loop {
        f(&vals)?;
        let mut k = doms.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < doms[k].len() {
                vals[k] = doms[k][idx[k]];
                break;
            }
            idx[k] = 0;
            vals[k] = doms[k][0];
        }
    }
}

/// Exact optimum by enumerating integer assignments, with one LP over the
/// continuous variables per assignment. `None` if infeasible.
pub fn brute_force_optimum<T: Real>(inst: &MipInstance<T>) -> Result<Option<(T, Vec<T>)>> {
    inst.validate()?;
    let doms = integer_domains(inst)?;
    let pure = inst.integer.len() == inst.n();
    let feas = T::of(1e-6);
    let mut best: Option<(T, Vec<T>)> = None;
    let mut lower = inst.lower.clone();
    let mut upper = inst.upper.clone();
    let mut x = inst.lower.clone();
    for_each_assignment(&doms, |vals| {
        if pure {
            for (&j, &v) in inst.integer.iter().zip(vals) {
                x[j] = T::of(v);
            }
            if is_lp_feasible(inst, &[], &x, feas) {
                let z = inst.objective_value(&x);
                if best.as_ref().map_or(true, |(b, _)| z < *b) {
                    best = Some((z, x.clone()));
                }
            }
            return Ok(());
        }
        for (&j, &v) in inst.integer.iter().zip(vals) {
            lower[j] = T::of(v);
            upper[j] = T::of(v);
        }
        let sub = inst.with_bounds(lower.clone(), upper.clone());
        let (lp, _) = solve_lp_with(&sub, &[], None, 0, &LpOptions::default())?;
        match lp.status {
            LpStatus::Optimal => {
                if best.as_ref().map_or(true, |(b, _)| lp.value < *b) {
                    best = Some((lp.value, lp.point));
                }
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(Error::LpNotOptimal(LpStatus::Unbounded)),
        }
        Ok(())
    })?;
    Ok(best)
}

/// All integer-feasible points of a pure integer instance.
pub fn enumerate_feasible_points<T: Real>(inst: &MipInstance<T>) -> Result<Vec<Vec<T>>> {
    inst.validate()?;
    if inst.integer.len() != inst.n() {
        return Err(Error::InvalidInput("enumeration needs every variable integer".into()));
    }
    let doms = integer_domains(inst)?;
    let mut out = Vec::new();
    let mut x = inst.lower.clone();
    for_each_assignment(&doms, |vals| {
        for (&j, &v) in inst.integer.iter().zip(vals) {
            x[j] = T::of(v);
        }
        if is_lp_feasible(inst, &[], &x, T::of(1e-9)) {
            out.push(x.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

/// Largest violation of any cut over the mixed-integer feasible set, found by
/// enumeration (LP per assignment when continuous variables exist).
/// `-inf` for an infeasible instance or an empty cut list.
pub fn max_cut_violation<T: Real>(inst: &MipInstance<T>, cuts: &[Cut<T>]) -> Result<f64> {
    if cuts.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    inst.validate()?;
    let doms = integer_domains(inst)?;
    let pure = inst.integer.len() == inst.n();
    let mut worst = f64::NEG_INFINITY;
    let mut lower = inst.lower.clone();
    let mut upper = inst.upper.clone();
    let mut x = inst.lower.clone();
    for_each_assignment(&doms, |vals| {
        if pure {
            for (&j, &v) in inst.integer.iter().zip(vals) {
                x[j] = T::of(v);
            }
            if is_lp_feasible(inst, &[], &x, T::of(1e-9)) {
                for c in cuts {
                    let v = (crate::linalg::dot(&c.coeffs, &x) - c.rhs).as_f64();
                    worst = worst.max(v);
                }
            }
            return Ok(());
        }
        for (&j, &v) in inst.integer.iter().zip(vals) {
            lower[j] = T::of(v);
            upper[j] = T::of(v);
        }
        let sub = inst.with_bounds(lower.clone(), upper.clone());
        for c in cuts {
            let obj: Vec<T> = c.coeffs.iter().map(|&a| -a).collect();
            let (lp, _) = solve_lp_with(&sub, &[], Some(&obj), 0, &LpOptions::default())?;
            if lp.status == LpStatus::Infeasible {
                return Ok(());
            }
            if lp.status == LpStatus::Unbounded {
                worst = f64::INFINITY;
                continue;
            }
            worst = worst.max((crate::linalg::dot(&c.coeffs, &lp.point) - c.rhs).as_f64());
        }
        Ok(())
    })?;
    Ok(worst)
}

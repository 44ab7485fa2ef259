//! Analytic centers by damped Newton on a relaxed log-barrier.
//!
//! The barrier is `φ(x) = −Σ log(h_i − g_i·x + δ)` over every inequality row,
//! cut and finite variable bound. Equality rows never enter the barrier; the
//! Newton step is taken in their null space. Constraints that are tight on the
//! whole region (implicit equalities) are detected by auxiliary LPs and moved
//! to the equality set, since their barrier term would have no interior.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, norm_inf, null_space, solve, solve_spd};
use crate::lp_simplex::solve_lp;
use crate::model::{CenterKind, CenterPoint, Cut, LpOutcome, MipInstance, RowKind, Tolerances};
use crate::real::Real;
use crate::alt_optima::optimal_slice;

#[derive(Debug, Clone)]
pub struct BarrierOptions {
    /// Stop once the Newton decrement falls to this value.
    pub center_tol: f64,
    pub max_newton: usize,
    pub armijo_slope: f64,
    pub backtrack: f64,
    pub step_fraction: f64,
    pub tol: Tolerances,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            center_tol: 1e-8,
            max_newton: 200,
            armijo_slope: 0.25,
            backtrack: 0.5,
            step_fraction: 0.99,
            tol: Tolerances::default(),
        }
    }
}

impl BarrierOptions {
    pub fn single_precision() -> Self {
        BarrierOptions { center_tol: 1e-3, tol: Tolerances::single_precision(), ..Default::default() }
    }
}

/// Where an inequality of a [`BarrierProblem`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Row(usize),
    Cut(usize),
    Lower(usize),
    Upper(usize),
}

/// Inequalities `g_i·x ≤ h_i` in the barrier, equalities `e_k·x = f_k`
/// imposed exactly, and the relaxation slack `δ`.
#[derive(Debug, Clone)]
pub struct BarrierProblem<T> {
    pub n: usize,
    pub ineq_rows: Vec<Vec<T>>,
    pub ineq_rhs: Vec<T>,
    pub ineq_source: Vec<Source>,
    pub eq_rows: Vec<Vec<T>>,
    pub eq_rhs: Vec<T>,
    pub delta: T,
}

impl<T: Real> BarrierProblem<T> {
    pub fn from_instance(inst: &MipInstance<T>, cuts: &[Cut<T>]) -> Self {
        let n = inst.n();
        let mut p = BarrierProblem {
            n,
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            ineq_source: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            delta: T::zero(),
        };
        let mut bmax = T::zero();
        for (i, row) in inst.rows.iter().enumerate() {
            match inst.row_kind[i] {
                RowKind::Le => p.push_ineq(row.clone(), inst.rhs[i], Source::Row(i)),
                RowKind::Eq => {
                    p.eq_rows.push(row.clone());
                    p.eq_rhs.push(inst.rhs[i]);
                }
            }
        }
        for (k, c) in cuts.iter().enumerate() {
            p.push_ineq(c.coeffs.clone(), c.rhs, Source::Cut(k));
        }
        for j in 0..n {
            if inst.lower[j].is_finite() {
                let mut e = vec![T::zero(); n];
                e[j] = -T::one();
                p.push_ineq(e, -inst.lower[j], Source::Lower(j));
            }
            if inst.upper[j].is_finite() {
                let mut e = vec![T::zero(); n];
                e[j] = T::one();
                p.push_ineq(e, inst.upper[j], Source::Upper(j));
            }
        }
        for (h, src) in p.ineq_rhs.iter().zip(&p.ineq_source) {
            if matches!(src, Source::Row(_) | Source::Cut(_)) {
                bmax = bmax.max(h.abs());
            }
        }
        p.delta = T::of(1e-7) * (T::one() + bmax);
        p
    }

    /// Rows are stored with unit norm so that `δ` means the same thing for
    /// every row and the center does not depend on row scaling.
    fn push_ineq(&mut self, row: Vec<T>, rhs: T, src: Source) {
        let nrm = norm2(&row);
        let (row, rhs) = if nrm > T::zero() { (row.iter().map(|&v| v / nrm).collect(), rhs / nrm) } else { (row, rhs) };
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
        self.ineq_source.push(src);
    }

    /// Moves inequality `i` to the equality set.
    pub fn make_equality(&mut self, i: usize) {
        let row = self.ineq_rows.remove(i);
        let rhs = self.ineq_rhs.remove(i);
        self.ineq_source.remove(i);
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_equality(&mut self, row: Vec<T>, rhs: T) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    fn slacks(&self, x: &[T]) -> Vec<T> {
        self.ineq_rows
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(g, &h)| h - dot(g, x) + self.delta)
            .collect()
    }

    pub fn barrier_value(&self, x: &[T]) -> T {
        let mut v = T::zero();
        for s in self.slacks(x) {
            if s <= T::zero() {
                return T::infinity();
            }
            v -= s.ln();
        }
        v
    }

    /// Largest `t` with `g_i·x + ‖g_i‖ t ≤ h_i + δ` for all `i`, capped at 1,
    /// and a point attaining it.
    pub fn phase_one(&self) -> Result<(Vec<T>, T)> {
        let n = self.n;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut kinds = Vec::new();
        for (g, &h) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            let mut r = g.clone();
            r.push(norm2(g));
            rows.push(r);
            rhs.push(h + self.delta);
            kinds.push(RowKind::Le);
        }
        for (e, &f) in self.eq_rows.iter().zip(&self.eq_rhs) {
            let mut r = e.clone();
            r.push(T::zero());
            rows.push(r);
            rhs.push(f);
            kinds.push(RowKind::Eq);
        }
        let mut c = vec![T::zero(); n + 1];
        c[n] = -T::one();
        let mut lower = vec![T::neg_infinity(); n + 1];
        let mut upper = vec![T::infinity(); n + 1];
        lower[n] = T::neg_infinity();
        upper[n] = T::one();
        let aux = MipInstance::new("phase-one", c, rows, rhs, kinds, lower, upper, vec![])?;
        let lp = solve_lp(&aux, &[], None, 0)?;
        if !lp.is_optimal() {
            return Err(Error::RegionEmpty);
        }
        let t = lp.point[n];
        if t <= T::zero() {
            return Err(Error::RegionEmpty);
        }
        Ok((lp.point[..n].to_vec(), t))
    }
}

/// Result of a barrier minimization, with the decrement after every step.
#[derive(Debug, Clone)]
pub struct NewtonTrace<T> {
    pub point: Vec<T>,
    pub iterations: usize,
    pub decrement: T,
    pub decrements: Vec<T>,
}

/// Damped Newton from a strictly interior `start`.
pub fn minimize_barrier<T: Real>(prob: &BarrierProblem<T>, start: &[T], opts: &BarrierOptions) -> Result<NewtonTrace<T>> {
    let n = prob.n;
    let emax = prob.eq_rows.iter().map(|r| norm_inf(r)).fold(T::zero(), T::max).max(T::one());
    let z = null_space(&prob.eq_rows, n, T::of(1e-9) * emax);
    let k = z.len();
    let mut x = start.to_vec();
    let mut trace = NewtonTrace { point: x.clone(), iterations: 0, decrement: T::zero(), decrements: Vec::new() };
    if k == 0 || prob.ineq_rows.is_empty() {
        if k > 0 {
            return Err(Error::RegionUnbounded);
        }
        return Ok(trace);
    }
    // g_i expressed in null-space coordinates
    let gz: Vec<Vec<T>> = prob.ineq_rows.iter().map(|g| z.iter().map(|zc| dot(g, zc)).collect()).collect();
    let tol = T::of(opts.center_tol);
    let far = T::of(1e9) * (T::one() + norm_inf(start));
    let mut phi = prob.barrier_value(&x);
    for it in 0..opts.max_newton {
        let s = prob.slacks(&x);
        let mut hess = vec![vec![T::zero(); k]; k];
        let mut grad = vec![T::zero(); k];
        for (i, gi) in gz.iter().enumerate() {
            let w = T::one() / s[i];
            for a in 0..k {
                let ga = gi[a] * w;
                grad[a] += ga;
                for b in 0..=a {
                    hess[a][b] += ga * gi[b] * w;
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[b][a] = hess[a][b];
            }
        }
        let neg: Vec<T> = grad.iter().map(|&g| -g).collect();
        let d = solve_spd(&hess, &neg)
            .or_else(|| solve(&hess, &neg))
            .ok_or(Error::RegionUnbounded)?;
        let lam2 = -dot(&grad, &d);
        let lam = lam2.max(T::zero()).sqrt();
        trace.decrements.push(lam);
        trace.iterations = it;
        trace.decrement = lam;
        if lam <= tol {
            trace.point = x;
            return Ok(trace);
        }
        let dx: Vec<T> = (0..n).map(|j| (0..k).fold(T::zero(), |acc, a| acc + z[a][j] * d[a])).collect();
        let mut amax = T::infinity();
        for (i, gi) in gz.iter().enumerate() {
            let rate = dot(gi, &d);
            if rate > T::zero() {
                amax = amax.min(s[i] / rate);
            }
        }
        let mut alpha = T::one().min(T::of(opts.step_fraction) * amax);
        let mut trial: Vec<T> = x.iter().zip(&dx).map(|(&a, &b)| a + alpha * b).collect();
        let mut phi_trial = prob.barrier_value(&trial);
        if lam >= T::of(0.5) {
            let mut tries = 0;
            while !(phi_trial <= phi - T::of(opts.armijo_slope) * alpha * lam2) {
                alpha *= T::of(opts.backtrack);
                tries += 1;
                if tries > 60 {
                    return Err(Error::NoConvergence { iterations: it, decrement: lam.as_f64() });
                }
                trial = x.iter().zip(&dx).map(|(&a, &b)| a + alpha * b).collect();
                phi_trial = prob.barrier_value(&trial);
            }
        } else if !phi_trial.is_finite() {
            return Err(Error::NoConvergence { iterations: it, decrement: lam.as_f64() });
        }
        x = trial;
        phi = phi_trial;
        if norm_inf(&x) > far {
            return Err(Error::RegionUnbounded);
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_newton, decrement: trace.decrement.as_f64() })
}

/// Inequalities whose slack is at most `feas_tol` everywhere on the region of
/// `inst` + `cuts` (+ `extra`), among the indices in `candidates`.
fn tight_everywhere<T: Real>(
    prob: &BarrierProblem<T>,
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    candidates: &[usize],
    feas_tol: T,
) -> Result<Vec<usize>> {
    let mut tight = Vec::new();
    for &i in candidates.iter().take(inst.n() + inst.m() + cuts.len()) {
        let lp = solve_lp(inst, cuts, Some(&prob.ineq_rows[i]), 0)?;
        if !lp.is_optimal() {
            if lp.status == crate::model::LpStatus::Infeasible {
                return Err(Error::RegionEmpty);
            }
            continue;
        }
        if prob.ineq_rhs[i] - lp.value <= feas_tol {
            tight.push(i);
        }
    }
    Ok(tight)
}

fn impose<T: Real>(prob: &mut BarrierProblem<T>, mut tight: Vec<usize>) {
    tight.sort_unstable();
    for &i in tight.iter().rev() {
        prob.make_equality(i);
    }
}

fn center_of<T: Real>(
    mut prob: BarrierProblem<T>,
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    opts: &BarrierOptions,
) -> Result<(Vec<T>, NewtonTrace<T>, T)> {
    let (mut x0, t) = prob.phase_one()?;
    if t <= T::of(100.0) * prob.delta {
        let all: Vec<usize> = (0..prob.ineq_rows.len()).collect();
        let tight = tight_everywhere(&prob, inst, cuts, &all, T::of(opts.tol.feas))?;
        if !tight.is_empty() {
            impose(&mut prob, tight);
            x0 = prob.phase_one()?.0;
        }
    }
    let delta = prob.delta;
    let trace = minimize_barrier(&prob, &x0, opts)?;
    Ok((trace.point.clone(), trace, delta))
}

/// Analytic center of the LP region of `inst` with `cuts` appended.
pub fn analytic_center<T: Real>(inst: &MipInstance<T>, cuts: &[Cut<T>]) -> Result<CenterPoint<T>> {
    analytic_center_with(inst, cuts, &BarrierOptions::default()).map(|r| r.0)
}

pub fn analytic_center_with<T: Real>(
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    opts: &BarrierOptions,
) -> Result<(CenterPoint<T>, NewtonTrace<T>)> {
    let prob = BarrierProblem::from_instance(inst, cuts);
    let (point, trace, delta) = center_of(prob, inst, cuts, opts)?;
    let cp = CenterPoint {
        point,
        kind: CenterKind::PolytopeCenter,
        newton_iters: trace.iterations,
        residual: trace.decrement,
        relaxation_slack: delta,
    };
    Ok((cp, trace))
}

/// Analytic center of the optimal face `{x ∈ P : c·x = z*}`.
pub fn optimal_face_center<T: Real>(inst: &MipInstance<T>, cuts: &[Cut<T>], lp: &LpOutcome<T>) -> Result<CenterPoint<T>> {
    optimal_face_center_with(inst, cuts, lp, &BarrierOptions::default()).map(|r| r.0)
}

pub fn optimal_face_center_with<T: Real>(
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    lp: &LpOutcome<T>,
    opts: &BarrierOptions,
) -> Result<(CenterPoint<T>, NewtonTrace<T>)> {
    if !lp.is_optimal() {
        return Err(Error::LpNotOptimal(lp.status));
    }
    let mut prob = BarrierProblem::from_instance(inst, cuts);
    let vertex = |prob: &BarrierProblem<T>| {
        let cp = CenterPoint {
            point: lp.point.clone(),
            kind: CenterKind::OptimalFaceCenter,
            newton_iters: 0,
            residual: T::zero(),
            relaxation_slack: prob.delta,
        };
        let trace = NewtonTrace { point: lp.point.clone(), iterations: 0, decrement: T::zero(), decrements: vec![] };
        (cp, trace)
    };
    if lp.is_dual_nondegenerate(T::of(opts.tol.opt), inst) {
        return Ok(vertex(&prob));
    }
    let feas = T::of(opts.tol.feas);
    let candidates: Vec<usize> = (0..prob.ineq_rows.len())
        .filter(|&i| prob.ineq_rhs[i] - dot(&prob.ineq_rows[i], &lp.point) <= feas)
        .collect();
    let mut sliced = cuts.to_vec();
    if let Some(s) = optimal_slice(inst, lp.value) {
        sliced.push(s);
        prob.add_equality(inst.objective.clone(), lp.value);
    }
    let tight = tight_everywhere(&prob, inst, &sliced, &candidates, feas)?;
    impose(&mut prob, tight);
    let delta = prob.delta;
    let x0 = match prob.phase_one() {
        Ok((x, _)) => x,
        // every remaining barrier is degenerate on the face: it is a single point
        Err(Error::RegionEmpty) => return Ok(vertex(&prob)),
        Err(e) => return Err(e),
    };
    let trace = minimize_barrier(&prob, &x0, opts)?;
    let cp = CenterPoint {
        point: trace.point.clone(),
        kind: CenterKind::OptimalFaceCenter,
        newton_iters: trace.iterations,
        residual: trace.decrement,
        relaxation_slack: delta,
    };
    Ok((cp, trace))
}

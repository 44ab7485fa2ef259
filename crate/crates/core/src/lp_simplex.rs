//! Dense bounded-variable primal simplex.
//!
//! Every LP row `i` gets a slack `s_i` with `a_i·x + s_i = b_i`; `≤` rows have
//! `s_i ∈ [0, ∞)` and equality rows `s_i ∈ [0, 0]`. Rows whose slack would
//! start infeasible receive an artificial column, and a phase-one objective
//! drives those to zero. Nonbasic variables sit at one of their bounds, which
//! makes the bound status of every variable available to callers.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations, with a fresh Gauss-Jordan factorization every
//! `refactor_every` pivots.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, invert, Dense};
use crate::model::{BasisStatus, Cut, LpOutcome, LpStatus, MipInstance, RowKind, Tolerances};
use crate::real::Real;

const NOT_BASIC: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub tol: Tolerances,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
    pub pivot_tol: f64,
    pub max_iterations: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            tol: Tolerances::default(),
            refactor_every: 50,
            stall_limit: 50,
            pivot_tol: 1e-9,
            max_iterations: None,
        }
    }
}

impl LpOptions {
    pub fn single_precision() -> Self {
        LpOptions { tol: Tolerances::single_precision(), pivot_tol: 1e-5, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColStatus {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Final basis of a solve, retained for tableau queries.
///
/// Column indices: `0..n` structural variables, `n..n+m` row slacks (instance
/// rows first, then cuts), followed by any artificial columns.
#[derive(Debug, Clone)]
pub struct SimplexState<T> {
    n: usize,
    m: usize,
    cols: Vec<Vec<T>>,
    rhs: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    basis: Vec<usize>,
    basis_pos: Vec<usize>,
    status: Vec<ColStatus>,
    x: Vec<T>,
    binv: Dense<T>,
    pivots_since_refactor: usize,
}

/// Row of the optimal tableau: `x_basic + Σ coeffs[j]·x_j = rhs`, over the
/// structural and slack columns. `coeffs` is zero on every other basic column
/// and one on the basic variable itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TableauRow<T> {
    pub basic_var: usize,
    pub coeffs: Vec<T>,
    pub rhs: T,
}

impl<T: Real> SimplexState<T> {
    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Basic column indices in row order, artificial columns excluded.
    pub fn basic_columns(&self) -> Vec<usize> {
        self.basis.iter().copied().filter(|&j| j < self.n + self.m).collect()
    }

    pub fn is_basic(&self, col: usize) -> bool {
        col < self.basis_pos.len() && self.basis_pos[col] != NOT_BASIC
    }

    /// Value of any structural or slack column in the final basic solution.
    pub fn value(&self, col: usize) -> T {
        self.x[col]
    }

    pub fn bounds(&self, col: usize) -> (T, T) {
        (self.lower[col], self.upper[col])
    }

    pub fn column_status(&self, col: usize) -> BasisStatus {
        match self.status[col] {
            ColStatus::Basic => BasisStatus::BasicAtValue,
            ColStatus::Lower => BasisStatus::NonbasicAtLower,
            ColStatus::Upper => BasisStatus::NonbasicAtUpper,
            ColStatus::Free => BasisStatus::NonbasicFree,
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = vec![vec![T::zero(); m]; m];
        for (pos, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                b[i][pos] = self.cols[j][i];
            }
        }
        self.binv = invert(&b).ok_or(Error::SingularBasis)?;
        let mut r = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.status[j] != ColStatus::Basic && self.x[j] != T::zero() {
                for i in 0..m {
                    r[i] -= col[i] * self.x[j];
                }
            }
        }
        for pos in 0..m {
            let v = dot(&self.binv[pos], &r);
            self.x[self.basis[pos]] = v;
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn ftran(&self, col: usize) -> Vec<T> {
        self.binv.iter().map(|row| dot(row, &self.cols[col])).collect()
    }

    fn duals(&self, cost: &[T]) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for pos in 0..m {
            let cb = cost[self.basis[pos]];
            if cb != T::zero() {
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += cb * self.binv[pos][k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[T], y: &[T], j: usize) -> T {
        cost[j] - dot(y, &self.cols[j])
    }

    fn pivot(&mut self, row: usize, entering: usize, w: &[T]) {
        let m = self.m;
        let p = w[row];
        let pivot_row: Vec<T> = self.binv[row].iter().map(|&v| v / p).collect();
        for i in 0..m {
            if i == row {
                continue;
            }
            let f = w[i];
            if f != T::zero() {
                for k in 0..m {
                    self.binv[i][k] -= f * pivot_row[k];
                }
            }
        }
        self.binv[row] = pivot_row;
        let leaving = self.basis[row];
        self.basis_pos[leaving] = NOT_BASIC;
        self.basis[row] = entering;
        self.basis_pos[entering] = row;
        self.status[entering] = ColStatus::Basic;
        self.pivots_since_refactor += 1;
    }

    /// Tableau row of a basic structural or slack column.
    pub fn tableau_row(&self, basic_var: usize) -> Result<TableauRow<T>> {
        if basic_var >= self.n + self.m || !self.is_basic(basic_var) {
            return Err(Error::NotBasic(basic_var));
        }
        let r = self.basis_pos[basic_var];
        let row = &self.binv[r];
        let coeffs = (0..self.n + self.m)
            .map(|j| {
                if j == basic_var {
                    T::one()
                } else if self.is_basic(j) {
                    T::zero()
                } else {
                    dot(row, &self.cols[j])
                }
            })
            .collect();
        Ok(TableauRow { basic_var, coeffs, rhs: dot(row, &self.rhs) })
    }
}

/// Tableau row of `basic_var` in the optimal basis held by `state`.
pub fn tableau_row<T: Real>(state: &SimplexState<T>, basic_var: usize) -> Result<TableauRow<T>> {
    state.tableau_row(basic_var)
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Engine<'a, T> {
    st: SimplexState<T>,
    opts: &'a LpOptions,
    rank: Vec<usize>,
    iterations: usize,
    max_iter: usize,
}

impl<'a, T: Real> Engine<'a, T> {
    fn run_phase(&mut self, cost: &[T]) -> Result<PhaseEnd> {
        let opt_tol = T::of(self.opts.tol.opt);
        let piv_tol = T::of(self.opts.pivot_tol);
        let harris = T::of(1e-9);
        let degenerate_step = T::of(1e-12);
        let mut stall = 0usize;
        let ncols = self.st.cols.len();
        loop {
            if self.st.pivots_since_refactor >= self.opts.refactor_every {
                self.st.refactor()?;
            }
            if self.iterations >= self.max_iter {
                return Err(Error::IterationLimit(self.iterations));
            }
            let bland = stall >= self.opts.stall_limit;
            let y = self.st.duals(cost);

            // pricing
            let mut best: Option<(usize, T, T)> = None; // (col, |d|, d)
            let mut cands: Vec<(usize, T, T)> = Vec::new();
            for j in 0..ncols {
                let s = self.st.status[j];
                if s == ColStatus::Basic || self.st.lower[j] == self.st.upper[j] {
                    continue;
                }
                let d = self.st.reduced_cost(cost, &y, j);
                let ok = match s {
                    ColStatus::Lower => d < -opt_tol,
                    ColStatus::Upper => d > opt_tol,
                    ColStatus::Free => d.abs() > opt_tol,
                    ColStatus::Basic => false,
                };
                if !ok {
                    continue;
                }
                if bland {
                    best = Some((j, d.abs(), d));
                    break;
                }
                cands.push((j, d.abs(), d));
            }
            if !bland && !cands.is_empty() {
                let top = cands.iter().fold(T::zero(), |m, c| m.max(c.1));
                let cut = top * (T::one() - T::of(1e-9));
                best = cands
                    .iter()
                    .filter(|c| c.1 >= cut)
                    .min_by_key(|c| self.rank[c.0])
                    .copied();
            }
            let Some((q, _, dq)) = best else {
                return Ok(PhaseEnd::Optimal);
            };
            let dir = if dq < T::zero() { T::one() } else { -T::one() };
            let w = self.st.ftran(q);

            // Harris two-pass ratio test
            let mut theta_max = T::infinity();
            for (pos, &wi) in w.iter().enumerate() {
                if wi.abs() <= piv_tol {
                    continue;
                }
                let b = self.st.basis[pos];
                let rate = -dir * wi;
                let lim = if rate < T::zero() {
                    (self.st.x[b] - self.st.lower[b] + harris) / -rate
                } else {
                    (self.st.upper[b] - self.st.x[b] + harris) / rate
                };
                if lim < theta_max {
                    theta_max = lim;
                }
            }
            let mut leave: Option<(usize, T)> = None; // (pos, ratio)
            if theta_max.is_finite() {
                let mut best_w = T::zero();
                let mut best_idx = usize::MAX;
                for (pos, &wi) in w.iter().enumerate() {
                    if wi.abs() <= piv_tol {
                        continue;
                    }
                    let b = self.st.basis[pos];
                    let rate = -dir * wi;
                    let ratio = if rate < T::zero() {
                        (self.st.x[b] - self.st.lower[b]) / -rate
                    } else {
                        (self.st.upper[b] - self.st.x[b]) / rate
                    };
                    if !ratio.is_finite() || ratio > theta_max {
                        continue;
                    }
                    let take = if bland { b < best_idx } else { wi.abs() > best_w };
                    if take {
                        best_w = wi.abs();
                        best_idx = b;
                        leave = Some((pos, ratio.max(T::zero())));
                    }
                }
            }
            let flip = self.st.upper[q] - self.st.lower[q];
            let row_theta = leave.map(|l| l.1).unwrap_or(T::infinity());
            if !flip.is_finite() && !row_theta.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }
            self.iterations += 1;
            let theta = if flip <= row_theta { flip } else { row_theta };
            let step = dir * theta;
            for (pos, &wi) in w.iter().enumerate() {
                if wi != T::zero() {
                    let b = self.st.basis[pos];
                    self.st.x[b] -= step * wi;
                }
            }
            self.st.x[q] += step;
            if flip <= row_theta {
                self.st.status[q] = if dir > T::zero() { ColStatus::Upper } else { ColStatus::Lower };
                self.st.x[q] = if dir > T::zero() { self.st.upper[q] } else { self.st.lower[q] };
            } else {
                let (pos, _) = leave.expect("row limit exists");
                let b = self.st.basis[pos];
                let rate = -dir * w[pos];
                if rate < T::zero() {
                    self.st.status[b] = ColStatus::Lower;
                    self.st.x[b] = self.st.lower[b];
                } else {
                    self.st.status[b] = ColStatus::Upper;
                    self.st.x[b] = self.st.upper[b];
                }
                self.st.pivot(pos, q, &w);
            }
            if theta <= degenerate_step {
                stall += 1;
            } else {
                stall = 0;
            }
        }
    }
}

/// Solves the LP relaxation of `inst` with `extra_cuts` appended as rows.
///
/// `objective_override` replaces `c`; `pivot_seed` permutes tie-breaking among
/// equally attractive entering columns.
pub fn solve_lp<T: Real>(
    inst: &MipInstance<T>,
    extra_cuts: &[Cut<T>],
    objective_override: Option<&[T]>,
    pivot_seed: u64,
) -> Result<LpOutcome<T>> {
    solve_lp_with(inst, extra_cuts, objective_override, pivot_seed, &LpOptions::default()).map(|r| r.0)
}

/// Like [`solve_lp`] but with explicit options, also returning the final basis
/// when the LP is optimal.
pub fn solve_lp_with<T: Real>(
    inst: &MipInstance<T>,
    extra_cuts: &[Cut<T>],
    objective_override: Option<&[T]>,
    pivot_seed: u64,
    opts: &LpOptions,
) -> Result<(LpOutcome<T>, Option<SimplexState<T>>)> {
    let n = inst.n();
    for cut in extra_cuts {
        if cut.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: cut.dim() });
        }
    }
    let objective = objective_override.unwrap_or(&inst.objective);
    if objective.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: objective.len() });
    }
    let m_inst = inst.m();
    let m = m_inst + extra_cuts.len();
    let row = |i: usize| -> (&[T], T, RowKind) {
        if i < m_inst {
            (&inst.rows[i], inst.rhs[i], inst.row_kind[i])
        } else {
            let c = &extra_cuts[i - m_inst];
            (&c.coeffs, c.rhs, RowKind::Le)
        }
    };

    let mut cols: Vec<Vec<T>> = (0..n).map(|j| (0..m).map(|i| row(i).0[j]).collect()).collect();
    let mut lower = inst.lower.clone();
    let mut upper = inst.upper.clone();
    let mut x = vec![T::zero(); n];
    let mut status = vec![ColStatus::Lower; n];
    for j in 0..n {
        if lower[j].is_finite() {
            x[j] = lower[j];
        } else if upper[j].is_finite() {
            x[j] = upper[j];
            status[j] = ColStatus::Upper;
        } else {
            status[j] = ColStatus::Free;
        }
    }
    let rhs: Vec<T> = (0..m).map(|i| row(i).1).collect();
    for i in 0..m {
        let mut e = vec![T::zero(); m];
        e[i] = T::one();
        cols.push(e);
        lower.push(T::zero());
        upper.push(if row(i).2 == RowKind::Eq { T::zero() } else { T::infinity() });
    }

    let mut basis = vec![0usize; m];
    let mut binv: Dense<T> = vec![vec![T::zero(); m]; m];
    let mut status_all = status;
    status_all.extend(std::iter::repeat(ColStatus::Lower).take(m));
    let mut x_all = x.clone();
    x_all.extend(std::iter::repeat(T::zero()).take(m));
    let mut artificial: Vec<usize> = Vec::new();
    for i in 0..m {
        let (a, b, kind) = row(i);
        let resid = b - dot(a, &x);
        let slack = n + i;
        if kind == RowKind::Le && resid >= T::zero() {
            basis[i] = slack;
            binv[i][i] = T::one();
            status_all[slack] = ColStatus::Basic;
            x_all[slack] = resid;
        } else {
            let sigma = if resid >= T::zero() { T::one() } else { -T::one() };
            let mut col = vec![T::zero(); m];
            col[i] = sigma;
            let art = cols.len();
            cols.push(col);
            lower.push(T::zero());
            upper.push(T::infinity());
            status_all.push(ColStatus::Basic);
            x_all.push(resid.abs());
            basis[i] = art;
            binv[i][i] = sigma;
            artificial.push(art);
        }
    }
    let ncols = cols.len();
    let mut basis_pos = vec![NOT_BASIC; ncols];
    for (pos, &j) in basis.iter().enumerate() {
        basis_pos[j] = pos;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(pivot_seed);
    let mut order: Vec<usize> = (0..ncols).collect();
    order.shuffle(&mut rng);
    let mut rank = vec![0usize; ncols];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }

    let st = SimplexState {
        n,
        m,
        cols,
        rhs,
        lower,
        upper,
        basis,
        basis_pos,
        status: status_all,
        x: x_all,
        binv,
        pivots_since_refactor: 0,
    };
    let max_iter = opts.max_iterations.unwrap_or(50 * (m + ncols) + 1000);
    let mut eng = Engine { st, opts, rank, iterations: 0, max_iter };
    let feas_tol = T::of(opts.tol.feas);

    if !artificial.is_empty() {
        let mut cost1 = vec![T::zero(); ncols];
        for &a in &artificial {
            cost1[a] = T::one();
        }
        eng.run_phase(&cost1)?;
        eng.st.refactor()?;
        let infeas: T = artificial.iter().map(|&a| eng.st.x[a].abs()).sum();
        if infeas > feas_tol {
            return Ok((LpOutcome::not_optimal(LpStatus::Infeasible, eng.iterations), None));
        }
        for &a in &artificial {
            eng.st.upper[a] = T::zero();
            if eng.st.status[a] != ColStatus::Basic {
                eng.st.status[a] = ColStatus::Lower;
                eng.st.x[a] = T::zero();
            }
        }
        // drive remaining artificials out of the basis with degenerate pivots
        let first_art = n + m;
        for pos in 0..m {
            let b = eng.st.basis[pos];
            if b < first_art {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..first_art {
                if eng.st.status[j] == ColStatus::Basic || eng.st.lower[j] == eng.st.upper[j] {
                    continue;
                }
                let alpha = dot(&eng.st.binv[pos], &eng.st.cols[j]).abs();
                if alpha > T::of(1e-7) && best.map_or(true, |(_, a)| alpha > a) {
                    best = Some((j, alpha));
                }
            }
            if let Some((j, _)) = best {
                let w = eng.st.ftran(j);
                eng.st.status[b] = ColStatus::Lower;
                eng.st.x[b] = T::zero();
                eng.st.pivot(pos, j, &w);
            }
        }
        eng.st.refactor()?;
    }

    let mut cost2 = vec![T::zero(); ncols];
    cost2[..n].copy_from_slice(objective);
    let end = eng.run_phase(&cost2)?;
    if let PhaseEnd::Unbounded = end {
        return Ok((LpOutcome::not_optimal(LpStatus::Unbounded, eng.iterations), None));
    }
    eng.st.refactor()?;
    let st = eng.st;
    let y = st.duals(&cost2);
    let reduced_costs: Vec<T> = (0..n)
        .map(|j| if st.is_basic(j) { T::zero() } else { st.reduced_cost(&cost2, &y, j) })
        .collect();
    let slack_reduced_costs: Vec<T> = (n..n + m)
        .map(|j| if st.is_basic(j) { T::zero() } else { st.reduced_cost(&cost2, &y, j) })
        .collect();
    let point: Vec<T> = st.x[..n].to_vec();
    let value = dot(objective, &point);
    let basis: Vec<BasisStatus> = (0..n).map(|j| st.column_status(j)).collect();
    let row_basis: Vec<BasisStatus> = (n..n + m).map(|j| st.column_status(j)).collect();
    let outcome = LpOutcome {
        status: LpStatus::Optimal,
        value,
        point,
        basis,
        row_basis,
        reduced_costs,
        slack_reduced_costs,
        iterations: eng.iterations,
    };
    Ok((outcome, Some(st)))
}

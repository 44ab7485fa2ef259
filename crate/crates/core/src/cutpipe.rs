//! Root separation loop: Gomory generation, density and parallelism filtering,
//! greedy selection by a measure.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::alt_optima::collect_optima_from;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector};
use crate::linalg::{dist_inf, dot, norm_inf};
use crate::lp_barrier::{analytic_center, optimal_face_center};
use crate::lp_simplex::{solve_lp_with, LpOptions, SimplexState};
use crate::measures::{relative_density, score, CachedCenter, MeasureError, MeasureKind, ScoringContext};
use crate::model::{BasisStatus, Cut, CutOrigin, Incumbent, LpOutcome, MipInstance, Tolerances};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub rounds: usize,
    pub max_cuts_per_round: usize,
    pub measure: MeasureKind,
    /// Candidates with relative density above this are dropped before scoring.
    pub density_threshold: Option<f64>,
    pub parallelism_threshold: f64,
    pub k_optima: usize,
    pub seed: u64,
    pub tol: Tolerances,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            rounds: 50,
            max_cuts_per_round: 10,
            measure: MeasureKind::Eff,
            density_threshold: None,
            parallelism_threshold: 0.95,
            k_optima: 3,
            seed: 1,
            tol: Tolerances::default(),
        }
    }
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.max_cuts_per_round == 0 {
            return bad("max_cuts_per_round must be at least 1");
        }
        if !(self.parallelism_threshold > 0.0 && self.parallelism_threshold <= 1.0) {
            return bad("parallelism threshold must lie in (0, 1]");
        }
        if let Some(t) = self.density_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return bad("density threshold must lie in (0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub generated: usize,
    pub after_density: usize,
    pub added: usize,
    pub lp_value: f64,
    pub center_recomputed: bool,
    /// Measure actually used; differs from the configured one on fallback.
    pub measure_used: MeasureKind,
}

#[derive(Debug, Clone)]
pub struct SeparationResult<T> {
    pub cuts: Vec<Cut<T>>,
    pub reports: Vec<RoundReport>,
    pub features: FeatureVector,
    pub root_lp: LpOutcome<T>,
    pub final_lp: LpOutcome<T>,
    /// Simplex iterations over all round LPs.
    pub lp_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GomoryOptions {
    /// Minimum distance of the basic value from an integer.
    pub min_fractionality: f64,
    /// Coefficients below this (relative to the largest) are dropped.
    pub drop_tol: f64,
    pub max_dynamism: f64,
    pub tol: Tolerances,
}

impl Default for GomoryOptions {
    fn default() -> Self {
        GomoryOptions { min_fractionality: 1e-3, drop_tol: 1e-10, max_dynamism: 1e8, tol: Tolerances::default() }
    }
}

fn frac<T: Real>(v: T) -> T {
    let f = v - v.floor();
    if f < T::of(1e-9) || f > T::one() - T::of(1e-9) {
        T::zero()
    } else {
        f
    }
}

fn is_integral<T: Real>(v: T) -> bool {
    (v - v.round()).abs() <= T::of(1e-9)
}

/// Row `i` of the LP (instance rows first, then `cuts`) as `(a, b)`.
fn lp_row<'a, T: Real>(inst: &'a MipInstance<T>, cuts: &'a [Cut<T>], i: usize) -> (&'a [T], T) {
    if i < inst.m() {
        (&inst.rows[i], inst.rhs[i])
    } else {
        let c = &cuts[i - inst.m()];
        (&c.coeffs, c.rhs)
    }
}

/// Mixed-integer Gomory cuts from the tableau rows of fractional basic
/// integer variables, in structural space.
pub fn generate_gomory<T: Real>(
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    lp: &LpOutcome<T>,
    state: &SimplexState<T>,
    round: usize,
    opts: &GomoryOptions,
) -> Result<Vec<Cut<T>>> {
    if !lp.is_optimal() {
        return Err(Error::LpNotOptimal(lp.status));
    }
    let n = inst.n();
    let m = state.num_rows();
    let is_int = inst.integer_mask();
    let slack_int: Vec<bool> = (0..m)
        .map(|i| {
            let (a, b) = lp_row(inst, cuts, i);
            is_integral(b) && (0..n).all(|j| if is_int[j] { is_integral(a[j]) } else { a[j] == T::zero() })
        })
        .collect();
    let bound_int = |j: usize, v: T| if j < n { is_int[j] && is_integral(v) } else { slack_int[j - n] };
    let min_frac = T::of(opts.min_fractionality);
    let mut out = Vec::new();
    for &j in &inst.integer {
        if !state.is_basic(j) {
            continue;
        }
        let f0 = frac(state.value(j));
        if f0 < min_frac || f0 > T::one() - min_frac {
            continue;
        }
        let row = state.tableau_row(j)?;
        let mut coef = vec![T::zero(); n];
        let mut constant = T::zero();
        let mut usable = true;
        for (col, &a) in row.coeffs.iter().enumerate() {
            if col == j || a == T::zero() || state.is_basic(col) {
                continue;
            }
            let (lo, up) = state.bounds(col);
            if lo == up {
                continue;
            }
            let (a_bar, at_upper) = match state.column_status(col) {
                BasisStatus::NonbasicAtLower => (a, false),
                BasisStatus::NonbasicAtUpper => (-a, true),
                _ => {
                    usable = false;
                    break;
                }
            };
            let bound = if at_upper { up } else { lo };
            let gamma = if bound_int(col, bound) {
                let fj = frac(a_bar);
                if fj <= f0 {
                    fj / f0
                } else {
                    (T::one() - fj) / (T::one() - f0)
                }
            } else if a_bar >= T::zero() {
                a_bar / f0
            } else {
                -a_bar / (T::one() - f0)
            };
            if gamma == T::zero() {
                continue;
            }
            if col < n {
                if at_upper {
                    coef[col] -= gamma;
                    constant += gamma * up;
                } else {
                    coef[col] += gamma;
                    constant -= gamma * lo;
                }
            } else {
                // s = b − a·x, nonbasic at its lower bound 0
                let (ar, br) = lp_row(inst, cuts, col - n);
                for k in 0..n {
                    coef[k] -= gamma * ar[k];
                }
                constant += gamma * br;
            }
        }
        if !usable {
            continue;
        }
        // Σ coef·x + constant ≥ 1  ⇔  −coef·x ≤ constant − 1
        let alpha: Vec<T> = coef.iter().map(|&c| -c).collect();
        if let Some(cut) = finish_cut(inst, alpha, constant - T::one(), &lp.point, round, opts) {
            out.push(cut);
        }
    }
    Ok(out)
}

/// Scales to unit max-coefficient, drops tiny entries with a bound-based rhs
/// relaxation, and rejects badly scaled or non-violated cuts.
fn finish_cut<T: Real>(
    inst: &MipInstance<T>,
    alpha: Vec<T>,
    beta: T,
    x_lp: &[T],
    round: usize,
    opts: &GomoryOptions,
) -> Option<Cut<T>> {
    let big = norm_inf(&alpha);
    if !(big > T::zero()) || !big.is_finite() {
        return None;
    }
    let mut alpha: Vec<T> = alpha.iter().map(|&v| v / big).collect();
    let mut beta = beta / big;
    let drop = T::of(opts.drop_tol);
    let mut small = T::one();
    for (j, a) in alpha.iter_mut().enumerate() {
        if *a == T::zero() {
            continue;
        }
        if a.abs() < drop {
            let lo = *a * inst.lower[j];
            let hi = *a * inst.upper[j];
            let least = if *a > T::zero() { lo } else { hi };
            if !least.is_finite() {
                return None;
            }
            beta -= least;
            *a = T::zero();
        } else {
            small = small.min(a.abs());
        }
    }
    if T::one() / small > T::of(opts.max_dynamism) {
        return None;
    }
    beta += T::of(1e-9) * (T::one() + beta.abs());
    let viol = dot(&alpha, x_lp) - beta;
    if !(viol > T::of(opts.tol.feas)) {
        return None;
    }
    Cut::new(alpha, beta, CutOrigin::Gomory, round).ok()
}

/// Keeps cuts with relative density at most `threshold`, preserving order.
pub fn filter_density<T: Real>(cands: Vec<Cut<T>>, threshold: f64, n: usize, zero_tol: f64) -> Vec<Cut<T>> {
    cands
        .into_iter()
        .filter(|c| relative_density(c, n, T::of(zero_tol)).as_f64() <= threshold + 1e-12)
        .collect()
}

/// Greedy selection; returns `(candidate index, score)` in selection order.
pub fn select_indices<T: Real>(
    cands: &[Cut<T>],
    ctx: &ScoringContext<T>,
    measure: MeasureKind,
    max_cuts: usize,
    parallelism_threshold: f64,
) -> Result<Vec<(usize, T)>> {
    ctx.require(measure)?;
    let mut scores = Vec::with_capacity(cands.len());
    for c in cands {
        match score(measure, c, ctx) {
            Ok(s) => scores.push(Some(s)),
            // the reference ray never meets the hyperplane
            Err(MeasureError::ParallelDirection) => scores.push(None),
            Err(e) => return Err(e.into()),
        }
    }
    let mut alive: Vec<bool> = scores.iter().map(|s| s.is_some()).collect();
    let par = T::of(parallelism_threshold);
    let mut chosen = Vec::new();
    while chosen.len() < max_cuts {
        let mut best: Option<(usize, T)> = None;
        for (i, s) in scores.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let s = s.unwrap();
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        let Some((i, s)) = best else { break };
        if s <= T::zero() {
            break;
        }
        chosen.push((i, s));
        alive[i] = false;
        for k in 0..cands.len() {
            if alive[k] && cands[k].cosine(&cands[i]) > par {
                alive[k] = false;
            }
        }
    }
    Ok(chosen)
}

/// Greedy score-based selection with a parallelism filter.
pub fn select_cuts<T: Real>(cands: &[Cut<T>], ctx: &ScoringContext<T>, cfg: &SeparationConfig) -> Result<Vec<Cut<T>>> {
    let picked = select_indices(cands, ctx, cfg.measure, cfg.max_cuts_per_round, cfg.parallelism_threshold)?;
    Ok(picked.into_iter().map(|(i, _)| cands[i].clone()).collect())
}

fn lp_is_integral<T: Real>(inst: &MipInstance<T>, x: &[T], int_tol: f64) -> bool {
    inst.integer.iter().all(|&j| (x[j] - x[j].round()).abs().as_f64() <= int_tol)
}

fn solve_round<T: Real>(
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    cfg: &SeparationConfig,
    lp_opts: &LpOptions,
) -> Result<(LpOutcome<T>, Option<SimplexState<T>>)> {
    solve_lp_with(inst, cuts, None, cfg.seed, lp_opts)
}

/// Builds the scoring context for this round. Returns the measure actually
/// usable and whether a polytope center was (re)computed.
#[allow(clippy::too_many_arguments)]
fn build_context<T: Real>(
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    lp: &LpOutcome<T>,
    cfg: &SeparationConfig,
    incumbent: Option<&Incumbent<T>>,
    cache: &mut Option<CachedCenter<T>>,
) -> Result<(ScoringContext<T>, MeasureKind, bool)> {
    let mut ctx = ScoringContext::new(lp.point.clone());
    let near = |p: &[T]| dist_inf(p, &lp.point) <= T::of(cfg.tol.zero);
    let mut recomputed = false;
    let used = match cfg.measure {
        MeasureKind::Eff => MeasureKind::Eff,
        MeasureKind::Dcd => match incumbent {
            Some(inc) if !near(&inc.point) => {
                ctx.incumbent = Some(inc.clone());
                MeasureKind::Dcd
            }
            _ => MeasureKind::Eff,
        },
        MeasureKind::ExpImprov => {
            if inst.objective.iter().all(|v| *v == T::zero()) {
                MeasureKind::Eff
            } else {
                ctx.objective = Some(inst.objective.clone());
                MeasureKind::ExpImprov
            }
        }
        MeasureKind::AEff => match optimal_face_center(inst, cuts, lp) {
            Ok(c) => {
                ctx.x_face = Some(c);
                MeasureKind::AEff
            }
            Err(e) => {
                debug!("face center failed ({e}), scoring by eff");
                MeasureKind::Eff
            }
        },
        MeasureKind::ADcd => {
            recomputed = true;
            match analytic_center(inst, cuts) {
                Ok(c) if !near(&c.point) => {
                    ctx.x_center = Some(c);
                    MeasureKind::ADcd
                }
                Ok(_) => MeasureKind::Eff,
                Err(e) => {
                    debug!("analytic center failed ({e}), scoring by eff");
                    MeasureKind::Eff
                }
            }
        }
        MeasureKind::AppADcd => {
            let feas = T::of(cfg.tol.feas);
            let valid = match cache.as_mut() {
                Some(c) => c.revalidate(inst, cuts, feas),
                None => false,
            };
            if !valid {
                recomputed = true;
                *cache = analytic_center(inst, cuts).ok().map(CachedCenter::new);
            }
            match cache.as_ref() {
                Some(c) if !near(&c.center.point) => {
                    ctx.cached_center = Some(c.clone());
                    MeasureKind::AppADcd
                }
                _ => MeasureKind::Eff,
            }
        }
        MeasureKind::AvgEff | MeasureKind::MinEff => {
            ctx.optima = Some(collect_optima_from(inst, cuts, lp, cfg.k_optima, cfg.seed)?);
            cfg.measure
        }
    };
    if used != cfg.measure {
        debug!("{} unavailable this round, falling back to eff", cfg.measure);
    }
    Ok((ctx, used, recomputed))
}

/// Runs up to `cfg.rounds` separation rounds at the root.
pub fn run_separation<T: Real>(
    inst: &MipInstance<T>,
    cfg: &SeparationConfig,
    incumbent: Option<&Incumbent<T>>,
) -> Result<SeparationResult<T>> {
    run_separation_with(inst, cfg, incumbent, &LpOptions::default(), &GomoryOptions::default())
}

pub fn run_separation_with<T: Real>(
    inst: &MipInstance<T>,
    cfg: &SeparationConfig,
    incumbent: Option<&Incumbent<T>>,
    lp_opts: &LpOptions,
    gomory: &GomoryOptions,
) -> Result<SeparationResult<T>> {
    cfg.validate()?;
    let n = inst.n();
    let (mut lp, mut state) = solve_round(inst, &[], cfg, lp_opts)?;
    if !lp.is_optimal() {
        return Err(Error::LpNotOptimal(lp.status));
    }
    let features = extract_features(inst, &lp, &cfg.tol)?;
    let root_lp = lp.clone();
    let mut lp_iterations = lp.iterations;
    let mut cuts: Vec<Cut<T>> = Vec::new();
    let mut reports = Vec::new();
    let mut cache: Option<CachedCenter<T>> = None;
    for round in 0..cfg.rounds {
        if lp_is_integral(inst, &lp.point, cfg.tol.int) {
            break;
        }
        let st = state.as_ref().expect("optimal LP keeps its basis");
        let generated = generate_gomory(inst, &cuts, &lp, st, round, gomory)?;
        let n_generated = generated.len();
        let cands = match cfg.density_threshold {
            Some(t) => filter_density(generated, t, n, cfg.tol.zero),
            None => generated,
        };
        if cands.is_empty() {
            break;
        }
        let (ctx, used, recomputed) = build_context(inst, &cuts, &lp, cfg, incumbent, &mut cache)?;
        let picked = select_indices(&cands, &ctx, used, cfg.max_cuts_per_round, cfg.parallelism_threshold)?;
        if picked.is_empty() {
            break;
        }
        let added = picked.len();
        cuts.extend(picked.into_iter().map(|(i, _)| cands[i].clone()));
        let (next, next_state) = solve_round(inst, &cuts, cfg, lp_opts)?;
        lp_iterations += next.iterations;
        if !next.is_optimal() {
            return Err(Error::CutMadeInfeasible(round));
        }
        lp = next;
        state = next_state;
        reports.push(RoundReport {
            round,
            generated: n_generated,
            after_density: cands.len(),
            added,
            lp_value: lp.value.as_f64(),
            center_recomputed: recomputed,
            measure_used: used,
        });
    }
    Ok(SeparationResult { cuts, reports, features, root_lp, final_lp: lp, lp_iterations })
}

//! Alternative optimal vertices of an LP relaxation.
//!
//! After the first solve, the feasible region is intersected with the slice
//! `c·x ≤ z* + ε` and re-optimized under seeded random ±1 objectives. Each
//! random objective is followed by its negation so opposite ends of the face
//! are reached deterministically.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist_inf, dot};
use crate::lp_simplex::solve_lp;
use crate::model::{Cut, CutOrigin, LpOutcome, MipInstance};
use crate::real::Real;

/// Distinct optimal vertices with their common objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OptimaSet<T> {
    pub points: Vec<Vec<T>>,
    pub k_requested: usize,
    pub objective_value: T,
}

const DISTINCT_TOL: f64 = 1e-7;

fn slice_eps<T: Real>(z: T) -> T {
    T::of(1e-9) * (T::one() + z.abs())
}

/// The cut `c·x ≤ z* + ε`, or `None` for a zero objective.
pub fn optimal_slice<T: Real>(inst: &MipInstance<T>, z: T) -> Option<Cut<T>> {
    Cut::new(inst.objective.clone(), z + slice_eps(z), CutOrigin::Test, 0).ok()
}

/// Solves the LP and collects up to `k` distinct optimal vertices.
pub fn collect_optima<T: Real>(inst: &MipInstance<T>, cuts: &[Cut<T>], k: usize, seed: u64) -> Result<OptimaSet<T>> {
    let lp = solve_lp(inst, cuts, None, seed)?;
    collect_optima_from(inst, cuts, &lp, k, seed)
}

/// Like [`collect_optima`] starting from an already solved LP.
pub fn collect_optima_from<T: Real>(
    inst: &MipInstance<T>,
    cuts: &[Cut<T>],
    lp: &LpOutcome<T>,
    k: usize,
    seed: u64,
) -> Result<OptimaSet<T>> {
    if !lp.is_optimal() {
        return Err(Error::LpNotOptimal(lp.status));
    }
    let k = k.max(1);
    let mut set = OptimaSet { points: vec![lp.point.clone()], k_requested: k, objective_value: lp.value };
    if k == 1 || lp.is_dual_nondegenerate(T::of(1e-7), inst) {
        return Ok(set);
    }
    let mut sliced: Vec<Cut<T>> = cuts.to_vec();
    if let Some(s) = optimal_slice(inst, lp.value) {
        sliced.push(s);
    }
    let n = inst.n();
    let tol = T::of(1e-7) * (T::one() + lp.value.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f0f);
    let mut dir: Vec<T> = Vec::new();
    for attempt in 0..2 * k {
        if set.points.len() >= k {
            break;
        }
        if attempt % 2 == 0 {
            dir = (0..n).map(|_| if rng.gen::<bool>() { T::one() } else { -T::one() }).collect();
        } else {
            dir.iter_mut().for_each(|v| *v = -*v);
        }
        let r = solve_lp(inst, &sliced, Some(&dir), seed.wrapping_add(attempt as u64 + 1))?;
        if !r.is_optimal() {
            continue;
        }
        let z = dot(&inst.objective, &r.point);
        if (z - lp.value).abs() > tol {
            continue;
        }
        if set.points.iter().all(|p| dist_inf(p, &r.point) > T::of(DISTINCT_TOL)) {
            set.points.push(r.point);
        }
    }
    Ok(set)
}

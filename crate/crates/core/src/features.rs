//! Root-node features of an instance and its first LP solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LpOutcome, MipInstance, Tolerances};
use crate::real::Real;

/// Five ratios in `[0, 1]`, in the fixed order of [`FeatureVector::NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dual_degeneracy: f64,
    pub primal_degeneracy: f64,
    pub fractionality: f64,
    pub thinness: f64,
    pub density: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl FeatureVector {
    pub const NAMES: [&'static str; 5] = ["dual_deg", "primal_deg", "frac", "thin", "density"];

    pub fn to_array(&self) -> [f64; 5] {
        [self.dual_degeneracy, self.primal_degeneracy, self.fractionality, self.thinness, self.density]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        FeatureVector {
            dual_degeneracy: a[0],
            primal_degeneracy: a[1],
            fractionality: a[2],
            thinness: a[3],
            density: a[4],
        }
    }

    /// `instance,seed,dual_deg,primal_deg,frac,thin,density`
    pub fn csv_row(&self, instance: &str, seed: u64) -> String {
        let a = self.to_array();
        format!("{instance},{seed},{},{},{},{},{}", a[0], a[1], a[2], a[3], a[4])
    }
}

/// Degeneracy counts use structural variables only; slack reduced costs are
/// the row duals and would count the same degeneracy twice.
pub fn extract_features<T: Real>(inst: &MipInstance<T>, lp: &LpOutcome<T>, tol: &Tolerances) -> Result<FeatureVector> {
    let n = inst.n();
    if !lp.is_optimal() {
        return Err(Error::LpNotOptimal(lp.status));
    }
    if lp.basis.len() != n || lp.reduced_costs.len() != n || lp.point.len() != n {
        return Err(Error::InvalidInput("LP outcome lacks basis information".into()));
    }
    let zero = T::of(tol.zero);
    let feas = T::of(tol.feas);
    let int_tol = tol.int;
    let (mut nonbasic, mut dual_deg, mut basic, mut primal_deg) = (0, 0, 0, 0);
    for j in 0..n {
        if lp.basis[j].is_basic() {
            basic += 1;
            let x = lp.point[j];
            if (x - inst.lower[j]).abs() <= feas || (inst.upper[j] - x).abs() <= feas {
                primal_deg += 1;
            }
        } else {
            nonbasic += 1;
            if lp.reduced_costs[j].abs() <= zero {
                dual_deg += 1;
            }
        }
    }
    let fractional = inst
        .integer
        .iter()
        .filter(|&&j| {
            let x = lp.point[j].as_f64();
            let f = x - x.floor();
            f > int_tol && f < 1.0 - int_tol
        })
        .count();
    let nnz = inst.rows.iter().flat_map(|r| r.iter()).filter(|v| v.abs() > zero).count();
    Ok(FeatureVector {
        dual_degeneracy: ratio(dual_deg, nonbasic),
        primal_degeneracy: ratio(primal_deg, basic),
        fractionality: ratio(fractional, inst.integer.len()),
        thinness: ratio(inst.eq_row_count(), inst.m()),
        density: ratio(nnz, inst.m() * n),
    })
}

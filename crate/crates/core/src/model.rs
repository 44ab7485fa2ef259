//! Problem, cut and solution types shared by every other module.
//!
//! Instances are `min c·x  s.t.  A x ≤ b (or = b per row),  l ≤ x ≤ u,
//! x_j integer for j in J`. Infinite bounds are stored as `±inf` in memory;
//! the file formats use a large sentinel instead (see [`crate::io`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::real::Real;

/// Row sense. Equality rows keep their tag so structural features can count
/// them; the simplex treats them as rows with a fixed slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RowKind {
    Le,
    Eq,
}

/// Numerical tolerances used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    pub int: f64,
    pub zero: f64,
    pub opt: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feas: 1e-6, int: 1e-6, zero: 1e-9, opt: 1e-7 }
    }
}

impl Tolerances {
    /// Tolerances loosened for single precision arithmetic.
    pub fn single_precision() -> Self {
        Tolerances { feas: 1e-4, int: 1e-4, zero: 1e-6, opt: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MipInstance<T> {
    pub name: String,
    pub objective: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub row_kind: Vec<RowKind>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// Sorted, deduplicated 0-based indices of integer variables.
    pub integer: Vec<usize>,
}

impl<T: Real> MipInstance<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        objective: Vec<T>,
        rows: Vec<Vec<T>>,
        rhs: Vec<T>,
        row_kind: Vec<RowKind>,
        lower: Vec<T>,
        upper: Vec<T>,
        mut integer: Vec<usize>,
    ) -> Result<Self> {
        integer.sort_unstable();
        integer.dedup();
        let inst =
            MipInstance { name: name.into(), objective, rows, rhs, row_kind, lower, upper, integer };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance with only `A x ≤ b` rows.
    pub fn with_le_rows(
        name: impl Into<String>,
        objective: Vec<T>,
        rows: Vec<Vec<T>>,
        rhs: Vec<T>,
        lower: Vec<T>,
        upper: Vec<T>,
        integer: Vec<usize>,
    ) -> Result<Self> {
        let kinds = vec![RowKind::Le; rows.len()];
        Self::new(name, objective, rows, rhs, kinds, lower, upper, integer)
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.rhs.len() != self.rows.len() || self.row_kind.len() != self.rows.len() {
            return bad(format!(
                "{} rows, {} rhs entries, {} row kinds",
                self.rows.len(),
                self.rhs.len(),
                self.row_kind.len()
            ));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!("bounds of length {}/{} for n = {n}", self.lower.len(), self.upper.len()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return bad(format!("row {i} has length {}, expected {n}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) || !self.rhs[i].is_finite() {
                return bad(format!("row {i} has non-finite data"));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return bad("objective has non-finite entries".into());
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() {
                return bad(format!("bound of variable {j} is NaN"));
            }
            if l > u {
                return bad(format!("variable {j} has lower bound {l} above upper bound {u}"));
            }
            if l == T::infinity() || u == T::neg_infinity() {
                return bad(format!("variable {j} has an empty domain"));
            }
        }
        if let Some(&j) = self.integer.iter().find(|&&j| j >= n) {
            return bad(format!("integer index {j} out of range"));
        }
        if self.integer.windows(2).any(|w| w[0] >= w[1]) {
            return bad("integer index set must be sorted and unique".into());
        }
        Ok(())
    }

    pub fn integer_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for &j in &self.integer {
            mask[j] = true;
        }
        mask
    }

    pub fn eq_row_count(&self) -> usize {
        self.row_kind.iter().filter(|k| **k == RowKind::Eq).count()
    }

    /// Copy with variable bounds replaced (used for branch-and-bound nodes).
    pub fn with_bounds(&self, lower: Vec<T>, upper: Vec<T>) -> Self {
        MipInstance { lower, upper, ..self.clone() }
    }

    /// Copy with an extra `≤` row appended.
    pub fn with_extra_row(&self, coeffs: Vec<T>, rhs: T, kind: RowKind) -> Self {
        let mut inst = self.clone();
        inst.rows.push(coeffs);
        inst.rhs.push(rhs);
        inst.row_kind.push(kind);
        inst
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        dot(&self.objective, x)
    }
}

/// Where a cut came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutOrigin {
    Gomory,
    User,
    Test,
}

/// The inequality `coeffs · x ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Cut<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
    pub origin: CutOrigin,
    pub round: usize,
}

impl<T: Real> Cut<T> {
    pub fn new(coeffs: Vec<T>, rhs: T, origin: CutOrigin, round: usize) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) || !rhs.is_finite() {
            return Err(Error::InvalidCut("non-finite entries".into()));
        }
        if coeffs.iter().all(|c| *c == T::zero()) {
            return Err(Error::InvalidCut("all coefficients are zero".into()));
        }
        Ok(Cut { coeffs, rhs, origin, round })
    }

    /// Test-origin cut from plain slices, panicking on invalid data.
    pub fn test(coeffs: &[f64], rhs: f64) -> Self {
        Cut::new(coeffs.iter().map(|&c| T::of(c)).collect(), T::of(rhs), CutOrigin::Test, 0)
            .expect("valid test cut")
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> T {
        norm2(&self.coeffs)
    }

    pub fn scaled(&self, t: T) -> Self {
        Cut {
            coeffs: self.coeffs.iter().map(|&c| c * t).collect(),
            rhs: self.rhs * t,
            ..self.clone()
        }
    }

    /// Same half-space with unit-norm coefficients.
    pub fn normalized(&self) -> Self {
        self.scaled(T::one() / self.norm())
    }

    /// Signed cosine between coefficient vectors.
    pub fn cosine(&self, other: &Cut<T>) -> T {
        dot(&self.coeffs, &other.coeffs) / (self.norm() * other.norm())
    }
}

/// `α·x − β`; positive iff `x` is separated by the cut.
pub fn violation<T: Real>(cut: &Cut<T>, x: &[T]) -> Result<T> {
    if cut.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: cut.dim(), found: x.len() });
    }
    Ok(dot(&cut.coeffs, x) - cut.rhs)
}

/// Largest violation of rows, bounds and `cuts` at `x` (0 when feasible).
pub fn lp_violation<T: Real>(inst: &MipInstance<T>, cuts: &[Cut<T>], x: &[T]) -> T {
    let mut worst = T::zero();
    for (i, row) in inst.rows.iter().enumerate() {
        let act = dot(row, x) - inst.rhs[i];
        let v = match inst.row_kind[i] {
            RowKind::Le => act,
            RowKind::Eq => act.abs(),
        };
        worst = worst.max(v);
    }
    for cut in cuts {
        worst = worst.max(dot(&cut.coeffs, x) - cut.rhs);
    }
    for j in 0..inst.n() {
        worst = worst.max(inst.lower[j] - x[j]).max(x[j] - inst.upper[j]);
    }
    worst
}

pub fn is_lp_feasible<T: Real>(inst: &MipInstance<T>, cuts: &[Cut<T>], x: &[T], feas_tol: T) -> bool {
    x.len() == inst.n() && lp_violation(inst, cuts, x) <= feas_tol
}

/// Bounds, rows and integrality on `J` within tolerances.
pub fn is_mip_feasible<T: Real>(inst: &MipInstance<T>, x: &[T], feas_tol: T, int_tol: T) -> bool {
    if x.len() != inst.n() || !is_lp_feasible(inst, &[], x, feas_tol) {
        return false;
    }
    inst.integer.iter().all(|&j| (x[j] - x[j].round()).abs() <= int_tol)
}

/// Termination status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Basis status of a structural variable or a row slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisStatus {
    BasicAtValue,
    NonbasicAtLower,
    NonbasicAtUpper,
    /// Nonbasic free variable sitting at zero.
    NonbasicFree,
}

impl BasisStatus {
    pub fn is_basic(self) -> bool {
        self == BasisStatus::BasicAtValue
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LpOutcome<T> {
    pub status: LpStatus,
    /// `c·x` at the optimum; `+inf` when infeasible, `-inf` when unbounded.
    pub value: T,
    pub point: Vec<T>,
    /// One entry per structural variable.
    pub basis: Vec<BasisStatus>,
    /// One entry per LP row (instance rows first, then cuts).
    pub row_basis: Vec<BasisStatus>,
    /// Reduced costs of the structural variables.
    pub reduced_costs: Vec<T>,
    /// Reduced costs of the row slacks (the negated row duals).
    pub slack_reduced_costs: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> LpOutcome<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn not_optimal(status: LpStatus, iterations: usize) -> Self {
        let value = match status {
            LpStatus::Unbounded => T::neg_infinity(),
            _ => T::infinity(),
        };
        LpOutcome {
            status,
            value,
            point: Vec::new(),
            basis: Vec::new(),
            row_basis: Vec::new(),
            reduced_costs: Vec::new(),
            slack_reduced_costs: Vec::new(),
            iterations,
        }
    }

    /// True when no nonbasic variable or slack has a zero reduced cost, which
    /// makes the optimal vertex unique.
    pub fn is_dual_nondegenerate(&self, tol: T, inst: &MipInstance<T>) -> bool {
        let structural = self.basis.iter().enumerate().all(|(j, s)| {
            s.is_basic() || inst.lower[j] == inst.upper[j] || self.reduced_costs[j].abs() > tol
        });
        let slacks = self.row_basis.iter().enumerate().all(|(i, s)| {
            let fixed = i < inst.m() && inst.row_kind[i] == RowKind::Eq;
            s.is_basic() || fixed || self.slack_reduced_costs[i].abs() > tol
        });
        structural && slacks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenterKind {
    PolytopeCenter,
    OptimalFaceCenter,
}

/// Analytic center of the polytope or of the LP optimal face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CenterPoint<T> {
    pub point: Vec<T>,
    pub kind: CenterKind,
    pub newton_iters: usize,
    /// Final Newton decrement.
    pub residual: T,
    pub relaxation_slack: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncumbentSource {
    Provided,
    Node,
    Enumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Incumbent<T> {
    pub point: Vec<T>,
    pub value: T,
    pub source: IncumbentSource,
}

impl<T: Real> Incumbent<T> {
    /// Builds an incumbent after checking MIP feasibility.
    pub fn checked(inst: &MipInstance<T>, point: Vec<T>, source: IncumbentSource, tol: &Tolerances) -> Result<Self> {
        if !is_mip_feasible(inst, &point, T::of(tol.feas), T::of(tol.int)) {
            return Err(Error::InvalidInput("incumbent is not MIP-feasible".into()));
        }
        let value = inst.objective_value(&point);
        Ok(Incumbent { point, value, source })
    }
}

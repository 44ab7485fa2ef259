//! Cut quality measures and density metrics.
//!
//! Every score is 0-homogeneous in `(α, β)`: scaling a cut by `t > 0` leaves
//! its score unchanged. Non-violating cuts get their true non-positive score.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alt_optima::OptimaSet;
use crate::linalg::{dot, norm2, sub};
use crate::model::{lp_violation, CenterPoint, Cut, Incumbent, MipInstance};
use crate::real::Real;

const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("cut has all-zero coefficients")]
    ZeroCoefficients,
    #[error("objective vector is zero")]
    ZeroObjective,
    #[error("reference point coincides with the LP point")]
    DegenerateDirection,
    #[error("cut is parallel to the reference direction")]
    ParallelDirection,
    #[error("cached center is cut off by the current relaxation")]
    CacheInvalid,
    #[error("scoring context lacks {0}")]
    MissingContext(&'static str),
    #[error("dimension mismatch: cut has {expected} entries, point has {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

type MResult<T> = std::result::Result<T, MeasureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasureKind {
    Eff,
    Dcd,
    ExpImprov,
    AEff,
    ADcd,
    AppADcd,
    AvgEff,
    MinEff,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 8] = [
        MeasureKind::Eff,
        MeasureKind::Dcd,
        MeasureKind::ExpImprov,
        MeasureKind::AEff,
        MeasureKind::ADcd,
        MeasureKind::AppADcd,
        MeasureKind::AvgEff,
        MeasureKind::MinEff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Eff => "eff",
            MeasureKind::Dcd => "dcd",
            MeasureKind::ExpImprov => "exp-improv",
            MeasureKind::AEff => "a-eff",
            MeasureKind::ADcd => "a-dcd",
            MeasureKind::AppADcd => "app-a-dcd",
            MeasureKind::AvgEff => "avgeff",
            MeasureKind::MinEff => "mineff",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn needs_incumbent(self) -> bool {
        self == MeasureKind::Dcd
    }

    pub fn needs_face_center(self) -> bool {
        self == MeasureKind::AEff
    }

    pub fn needs_polytope_center(self) -> bool {
        matches!(self, MeasureKind::ADcd | MeasureKind::AppADcd)
    }

    pub fn needs_optima(self) -> bool {
        matches!(self, MeasureKind::AvgEff | MeasureKind::MinEff)
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MeasureKind::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown measure '{s}'"))
    }
}

impl Serialize for MeasureKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MeasureKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Polytope center kept across separation rounds for app-a-dcd.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedCenter<T> {
    pub center: CenterPoint<T>,
    /// True only while the center is LP-feasible under the current cuts.
    pub valid: bool,
}

impl<T: Real> CachedCenter<T> {
    pub fn new(center: CenterPoint<T>) -> Self {
        CachedCenter { center, valid: true }
    }

    /// Re-checks LP feasibility against `inst` plus `cuts`.
    pub fn revalidate(&mut self, inst: &MipInstance<T>, cuts: &[Cut<T>], feas_tol: T) -> bool {
        self.valid = lp_violation(inst, cuts, &self.center.point) <= feas_tol;
        self.valid
    }
}

/// Reference points needed by the measures. Only the components a measure
/// uses need to be present.
#[derive(Debug, Clone, Default)]
pub struct ScoringContext<T> {
    pub x_lp: Vec<T>,
    pub incumbent: Option<Incumbent<T>>,
    pub x_face: Option<CenterPoint<T>>,
    pub x_center: Option<CenterPoint<T>>,
    pub cached_center: Option<CachedCenter<T>>,
    pub optima: Option<OptimaSet<T>>,
    pub objective: Option<Vec<T>>,
}

impl<T: Real> ScoringContext<T> {
    pub fn new(x_lp: Vec<T>) -> Self {
        ScoringContext {
            x_lp,
            incumbent: None,
            x_face: None,
            x_center: None,
            cached_center: None,
            optima: None,
            objective: None,
        }
    }

    /// Checks that every component `kind` reads is present.
    pub fn require(&self, kind: MeasureKind) -> MResult<()> {
        let missing = match kind {
            MeasureKind::Dcd if self.incumbent.is_none() => Some("incumbent"),
            MeasureKind::ExpImprov if self.objective.is_none() => Some("objective"),
            MeasureKind::AEff if self.x_face.is_none() => Some("x_face"),
            MeasureKind::ADcd if self.x_center.is_none() => Some("x_center"),
            MeasureKind::AppADcd if self.cached_center.is_none() => Some("cached_center"),
            MeasureKind::AvgEff | MeasureKind::MinEff if self.optima.is_none() => Some("optima"),
            _ => None,
        };
        match missing {
            Some(what) => Err(MeasureError::MissingContext(what)),
            None => Ok(()),
        }
    }
}

fn check_dim<T: Real>(cut: &Cut<T>, x: &[T]) -> MResult<()> {
    if cut.dim() != x.len() {
        return Err(MeasureError::DimensionMismatch { expected: cut.dim(), found: x.len() });
    }
    Ok(())
}

fn alpha_norm<T: Real>(cut: &Cut<T>) -> MResult<T> {
    let n = cut.norm();
    if n <= T::zero() {
        return Err(MeasureError::ZeroCoefficients);
    }
    Ok(n)
}

/// `(α·x − β)/‖α‖`, the signed distance of `x_lp` to the hyperplane.
pub fn score_eff<T: Real>(cut: &Cut<T>, x_lp: &[T]) -> MResult<T> {
    check_dim(cut, x_lp)?;
    let nrm = alpha_norm(cut)?;
    Ok((dot(&cut.coeffs, x_lp) - cut.rhs) / nrm)
}

/// Distance from `x_lp` to the hyperplane along the direction to `target`.
pub fn score_directed<T: Real>(cut: &Cut<T>, x_lp: &[T], target: &[T]) -> MResult<T> {
    check_dim(cut, x_lp)?;
    check_dim(cut, target)?;
    let nrm = alpha_norm(cut)?;
    let d = sub(target, x_lp);
    let len = norm2(&d);
    if len <= T::of(ZERO_TOL) {
        return Err(MeasureError::DegenerateDirection);
    }
    let ay = dot(&cut.coeffs, &d) / len;
    if ay.abs() <= T::of(ZERO_TOL) * nrm {
        return Err(MeasureError::ParallelDirection);
    }
    Ok((dot(&cut.coeffs, x_lp) - cut.rhs) / ay.abs())
}

pub fn score_dcd<T: Real>(cut: &Cut<T>, x_lp: &[T], incumbent: &Incumbent<T>) -> MResult<T> {
    score_directed(cut, x_lp, &incumbent.point)
}

/// `(α·c/‖α‖)·eff`, the product form taken literally (no sign correction for
/// minimization).
pub fn score_exp_improv<T: Real>(cut: &Cut<T>, x_lp: &[T], c: &[T]) -> MResult<T> {
    check_dim(cut, c)?;
    if c.iter().all(|v| *v == T::zero()) {
        return Err(MeasureError::ZeroObjective);
    }
    let eff = score_eff(cut, x_lp)?;
    Ok(dot(&cut.coeffs, c) / cut.norm() * eff)
}

pub fn score_a_eff<T: Real>(cut: &Cut<T>, x_face: &CenterPoint<T>) -> MResult<T> {
    score_eff(cut, &x_face.point)
}

pub fn score_a_dcd<T: Real>(cut: &Cut<T>, x_lp: &[T], x_center: &CenterPoint<T>) -> MResult<T> {
    score_directed(cut, x_lp, &x_center.point)
}

/// Directed distance toward the cached center. Returns
/// [`MeasureError::CacheInvalid`] when the center is cut off by `current_cuts`
/// so the caller can recompute it.
pub fn score_app_a_dcd<T: Real>(
    cut: &Cut<T>,
    x_lp: &[T],
    cached: &CachedCenter<T>,
    inst: &MipInstance<T>,
    current_cuts: &[Cut<T>],
    feas_tol: T,
) -> MResult<T> {
    if lp_violation(inst, current_cuts, &cached.center.point) > feas_tol {
        return Err(MeasureError::CacheInvalid);
    }
    score_directed(cut, x_lp, &cached.center.point)
}

fn per_point_eff<T: Real>(cut: &Cut<T>, optima: &OptimaSet<T>) -> MResult<Vec<T>> {
    if optima.points.is_empty() {
        return Err(MeasureError::MissingContext("optima"));
    }
    optima.points.iter().map(|p| score_eff(cut, p)).collect()
}

pub fn score_avgeff<T: Real>(cut: &Cut<T>, optima: &OptimaSet<T>) -> MResult<T> {
    let v = per_point_eff(cut, optima)?;
    let k = T::of(v.len() as f64);
    Ok(v.into_iter().sum::<T>() / k)
}

pub fn score_mineff<T: Real>(cut: &Cut<T>, optima: &OptimaSet<T>) -> MResult<T> {
    let v = per_point_eff(cut, optima)?;
    Ok(v.into_iter().fold(T::infinity(), T::min))
}

/// Scores `cut` under `kind`. For app-a-dcd only the cache's validity flag is
/// consulted; the pipeline is responsible for keeping it current.
pub fn score<T: Real>(kind: MeasureKind, cut: &Cut<T>, ctx: &ScoringContext<T>) -> MResult<T> {
    ctx.require(kind)?;
    match kind {
        MeasureKind::Eff => score_eff(cut, &ctx.x_lp),
        MeasureKind::Dcd => score_dcd(cut, &ctx.x_lp, ctx.incumbent.as_ref().unwrap()),
        MeasureKind::ExpImprov => score_exp_improv(cut, &ctx.x_lp, ctx.objective.as_ref().unwrap()),
        MeasureKind::AEff => score_a_eff(cut, ctx.x_face.as_ref().unwrap()),
        MeasureKind::ADcd => score_a_dcd(cut, &ctx.x_lp, ctx.x_center.as_ref().unwrap()),
        MeasureKind::AppADcd => {
            let cache = ctx.cached_center.as_ref().unwrap();
            if !cache.valid {
                return Err(MeasureError::CacheInvalid);
            }
            score_directed(cut, &ctx.x_lp, &cache.center.point)
        }
        MeasureKind::AvgEff => score_avgeff(cut, ctx.optima.as_ref().unwrap()),
        MeasureKind::MinEff => score_mineff(cut, ctx.optima.as_ref().unwrap()),
    }
}

/// Number of coefficients with magnitude above `zero_tol`.
pub fn density<T: Real>(cut: &Cut<T>, zero_tol: T) -> usize {
    cut.coeffs.iter().filter(|c| c.abs() > zero_tol).count()
}

pub fn relative_density<T: Real>(cut: &Cut<T>, n: usize, zero_tol: T) -> T {
    T::of(density(cut, zero_tol) as f64) / T::of(n.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CenterKind, IncumbentSource};

    fn cut(a: &[f64], b: f64) -> Cut<f64> {
        Cut::test(a, b)
    }

    fn center(p: &[f64]) -> CenterPoint<f64> {
        CenterPoint {
            point: p.to_vec(),
            kind: CenterKind::PolytopeCenter,
            newton_iters: 0,
            residual: 0.0,
            relaxation_slack: 0.0,
        }
    }

    fn inc(p: &[f64]) -> Incumbent<f64> {
        Incumbent { point: p.to_vec(), value: 0.0, source: IncumbentSource::Provided }
    }

    fn optima(points: &[&[f64]]) -> OptimaSet<f64> {
        OptimaSet { points: points.iter().map(|p| p.to_vec()).collect(), k_requested: 3, objective_value: 0.0 }
    }

    #[test]
    fn names_round_trip() {
        for m in MeasureKind::ALL {
            assert_eq!(m.name().parse::<MeasureKind>().unwrap(), m);
            let js = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<MeasureKind>(&js).unwrap(), m);
        }
        assert!("effx".parse::<MeasureKind>().is_err());
    }

    #[test]
    fn eff_examples() {
        assert_eq!(score_eff(&cut(&[1.0, 0.0], 1.0), &[3.0, 7.0]).unwrap(), 2.0);
        assert!((score_eff(&cut(&[3.0, 4.0], 0.0), &[1.0, 1.0]).unwrap() - 1.4).abs() < 1e-15);
        assert_eq!(score_eff(&cut(&[1.0, 1.0], 2.0), &[1.0, 1.0]).unwrap(), 0.0);
        let zero = Cut { coeffs: vec![0.0, 0.0], rhs: 1.0, origin: crate::model::CutOrigin::Test, round: 0 };
        assert_eq!(score_eff(&zero, &[1.0, 1.0]), Err(MeasureError::ZeroCoefficients));
    }

    #[test]
    fn dcd_examples() {
        let c = cut(&[1.0, 0.0], 1.0);
        assert!((score_dcd(&c, &[2.0, 0.0], &inc(&[0.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((score_dcd(&c, &[2.0, 0.0], &inc(&[0.0, 2.0])).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(score_dcd(&c, &[2.0, 0.0], &inc(&[2.0, 5.0])), Err(MeasureError::ParallelDirection));
        assert_eq!(score_dcd(&c, &[2.0, 0.0], &inc(&[2.0, 0.0])), Err(MeasureError::DegenerateDirection));
    }

    #[test]
    fn exp_improv_examples() {
        let c = cut(&[1.0, 0.0], 1.0);
        assert!((score_exp_improv(&c, &[3.0, 0.0], &[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(score_exp_improv(&cut(&[0.0, 1.0], 0.0), &[3.0, 3.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!((score_exp_improv(&cut(&[1.0, 1.0], 0.0), &[1.0, 1.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(score_exp_improv(&c, &[3.0, 0.0], &[0.0, 0.0]), Err(MeasureError::ZeroObjective));
    }

    #[test]
    fn a_dcd_box_segment() {
        // line from (0,0) toward (0.5,0.5) meets x1 + x2 = 0.5 at (0.25,0.25)
        let c = cut(&[-1.0, -1.0], -0.5);
        let s = score_a_dcd(&c, &[0.0, 0.0], &center(&[0.5, 0.5])).unwrap();
        assert!((s - (2.0 * 0.25f64 * 0.25).sqrt()).abs() < 1e-12);
        // center on the hyperplane: the whole segment is cut off
        let c = cut(&[1.0, 1.0], 1.0);
        let s = score_a_dcd(&c, &[1.0, 1.0], &center(&[0.5, 0.5])).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn app_a_dcd_cache_rule() {
        let inst = MipInstance::with_le_rows("b", vec![0.0; 2], vec![], vec![], vec![0.0; 2], vec![1.0; 2], vec![])
            .unwrap();
        let cache = CachedCenter::new(center(&[0.5, 0.5]));
        let c = cut(&[1.0, 1.0], 1.5);
        let fresh = score_a_dcd(&c, &[1.0, 1.0], &cache.center).unwrap();
        assert_eq!(score_app_a_dcd(&c, &[1.0, 1.0], &cache, &inst, &[], 1e-6).unwrap(), fresh);
        let cuts = vec![cut(&[1.0, 0.0], 0.4)];
        assert_eq!(score_app_a_dcd(&c, &[1.0, 1.0], &cache, &inst, &cuts, 1e-6), Err(MeasureError::CacheInvalid));
    }

    #[test]
    fn optima_measures() {
        let x = optima(&[&[1.0, 0.0], &[2.0, 0.0]]);
        let c = cut(&[1.0, 0.0], 0.0);
        assert_eq!(score_avgeff(&c, &x).unwrap(), 1.5);
        assert_eq!(score_mineff(&c, &x).unwrap(), 1.0);
        let single = optima(&[&[2.0, 0.5]]);
        let d = cut(&[1.0, 2.0], 1.0);
        let e = score_eff(&d, &[2.0, 0.5]).unwrap();
        assert_eq!(score_avgeff(&d, &single).unwrap(), e);
        assert_eq!(score_mineff(&d, &single).unwrap(), e);
        assert!(score_mineff(&cut(&[1.0, 0.0], 1.5), &x).unwrap() <= 0.0);
    }

    #[test]
    fn density_examples() {
        let c = cut(&[1.0, 0.0, 0.0, 2.0], 1.0);
        assert_eq!(density(&c, 1e-9), 2);
        assert_eq!(relative_density(&c, 4, 1e-9), 0.5);
        assert_eq!(relative_density(&cut(&[1.0, 1.0, 1.0], 1.0), 3, 1e-9), 1.0);
        assert_eq!(density(&cut(&[1.0, 1e-12], 1.0), 1e-9), 1);
    }

    #[test]
    fn missing_context_named() {
        let ctx = ScoringContext::new(vec![0.0, 0.0]);
        let c = cut(&[1.0, 0.0], -1.0);
        assert_eq!(score(MeasureKind::Dcd, &c, &ctx), Err(MeasureError::MissingContext("incumbent")));
        assert_eq!(score(MeasureKind::MinEff, &c, &ctx), Err(MeasureError::MissingContext("optima")));
        assert_eq!(score(MeasureKind::Eff, &c, &ctx).unwrap(), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn full_ctx(x: &[f64], t: &[f64], o: &[f64]) -> ScoringContext<f64> {
            let mut ctx = ScoringContext::new(x.to_vec());
            ctx.incumbent = Some(inc(t));
            ctx.x_face = Some(center(o));
            ctx.x_center = Some(center(t));
            ctx.cached_center = Some(CachedCenter::new(center(t)));
            ctx.optima = Some(optima(&[x, o]));
            ctx.objective = Some(vec![1.0, -0.5, 0.25]);
            ctx
        }

        proptest! {
            #[test]
            fn scores_are_scale_invariant(a in prop::collection::vec(-3.0..3.0f64, 3),
                                          b in -3.0..3.0f64,
                                          x in prop::collection::vec(-3.0..3.0f64, 3),
                                          t in prop::collection::vec(-3.0..3.0f64, 3),
                                          o in prop::collection::vec(-3.0..3.0f64, 3),
                                          s in 0.01..50.0f64) {
                prop_assume!(a.iter().any(|v| v.abs() > 0.1));
                let c = Cut::new(a, b, crate::model::CutOrigin::Test, 0).unwrap();
                let ctx = full_ctx(&x, &t, &o);
                for m in MeasureKind::ALL {
                    if let (Ok(u), Ok(v)) = (score(m, &c, &ctx), score(m, &c.scaled(s), &ctx)) {
                        prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
                    }
                }
            }

            #[test]
            fn sign_follows_violation(a in prop::collection::vec(-3.0..3.0f64, 3),
                                      b in -3.0..3.0f64,
                                      x in prop::collection::vec(-3.0..3.0f64, 3),
                                      t in prop::collection::vec(-3.0..3.0f64, 3)) {
                prop_assume!(a.iter().any(|v| v.abs() > 0.1));
                let c = Cut::new(a, b, crate::model::CutOrigin::Test, 0).unwrap();
                let viol = dot(&c.coeffs, &x) - c.rhs;
                if let Ok(d) = score_directed(&c, &x, &t) {
                    prop_assert_eq!(d >= 0.0, viol >= 0.0);
                }
                let o = vec![0.3, -1.0, 2.0];
                let e = score_exp_improv(&c, &x, &o).unwrap();
                let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
                prop_assert_eq!(sign(e), sign(dot(&c.coeffs, &o)) * sign(viol));
            }

            #[test]
            fn mineff_avgeff_ordering(a in prop::collection::vec(-3.0..3.0f64, 2),
                                      b in -3.0..3.0f64,
                                      pts in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 1..5)) {
                prop_assume!(a.iter().any(|v| v.abs() > 0.1));
                let c = Cut::new(a, b, crate::model::CutOrigin::Test, 0).unwrap();
                let set = OptimaSet { points: pts.clone(), k_requested: 5, objective_value: 0.0 };
                let mn = score_mineff(&c, &set).unwrap();
                let av = score_avgeff(&c, &set).unwrap();
                let mx = pts.iter().map(|p| score_eff(&c, p).unwrap()).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(mn <= av + 1e-12 && av <= mx + 1e-12);
            }
        }
    }
}

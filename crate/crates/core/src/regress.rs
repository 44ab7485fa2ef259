//! Feature → relative-performance regression and measure recommendation.
//!
//! Each of the eight outputs is a kernel ridge regression on standardized
//! features with kernel `(γ x·y + r)^3`. All outputs share one Cholesky
//! factorization of `K + λI`. A two-component PCA of the standardized
//! features is stored alongside for decision-region export.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::measures::MeasureKind;

pub const N_FEATURES: usize = 5;
pub const N_OUTPUTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub instance: String,
    pub seed: u64,
    pub features: FeatureVector,
    /// Indexed by [`MeasureKind::index`].
    pub targets: [f64; N_OUTPUTS],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub degree: i32,
    pub gamma: f64,
    pub offset: f64,
    pub lambda: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { degree: 3, gamma: 1.0 / N_FEATURES as f64, offset: 1.0, lambda: 1e-2 }
    }
}

impl KernelParams {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (self.gamma * d + self.offset).powi(self.degree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: [f64; N_FEATURES],
    /// Constant columns get 1.
    pub stds: [f64; N_FEATURES],
}

impl Standardizer {
    pub fn fit(xs: &[[f64; N_FEATURES]]) -> Self {
        let n = xs.len().max(1) as f64;
        let mut means = [0.0; N_FEATURES];
        let mut stds = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            means[k] = xs.iter().map(|x| x[k]).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x[k] - means[k]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            stds[k] = if sd > 1e-12 * (1.0 + means[k].abs()) { sd } else { 1.0 };
        }
        Standardizer { means, stds }
    }

    pub fn apply(&self, x: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut z = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            z[k] = (x[k] - self.means[k]) / self.stds[k];
        }
        z
    }

    pub fn invert(&self, z: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut x = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            x[k] = self.means[k] + self.stds[k] * z[k];
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub scaler: Standardizer,
    /// Two unit-norm loading vectors over the standardized features.
    pub components: [[f64; N_FEATURES]; 2],
    /// Explained variance ratio of all five components, non-increasing.
    pub explained_variance_ratio: [f64; N_FEATURES],
}

impl Pca {
    pub fn project(&self, x: &[f64; N_FEATURES]) -> [f64; 2] {
        let z = self.scaler.apply(x);
        let p = |c: &[f64; N_FEATURES]| c.iter().zip(&z).map(|(a, b)| a * b).sum();
        [p(&self.components[0]), p(&self.components[1])]
    }

    /// Feature vector on the plane spanned by the two components, with the
    /// remaining components at the mean.
    pub fn lift(&self, pc: [f64; 2]) -> [f64; N_FEATURES] {
        let mut z = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            z[k] = pc[0] * self.components[0][k] + pc[1] * self.components[1][k];
        }
        self.scaler.invert(&z)
    }
}

/// PCA of raw feature rows. Returns the fitted projection and projected points.
pub fn pca_project(xs: &[[f64; N_FEATURES]]) -> Result<(Pca, Vec<[f64; 2]>)> {
    if xs.len() < 2 {
        return Err(Error::InvalidInput("PCA needs at least two records".into()));
    }
    let scaler = Standardizer::fit(xs);
    let zs: Vec<[f64; N_FEATURES]> = xs.iter().map(|x| scaler.apply(x)).collect();
    let n = zs.len() as f64;
    let mut cov = DMatrix::<f64>::zeros(N_FEATURES, N_FEATURES);
    for z in &zs {
        for a in 0..N_FEATURES {
            for b in 0..N_FEATURES {
                cov[(a, b)] += z[a] * z[b] / n;
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..N_FEATURES).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let mut ratio = [0.0; N_FEATURES];
    for k in 0..N_FEATURES {
        ratio[k] = if total > 0.0 { vals[k] / total } else { 0.0 };
    }
    let mut components = [[0.0; N_FEATURES]; 2];
    for (c, &i) in components.iter_mut().zip(&order) {
        for k in 0..N_FEATURES {
            c[k] = eig.eigenvectors[(k, i)];
        }
        let nrm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= nrm);
        if let Some(first) = c.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
    let pca = Pca { scaler, components, explained_variance_ratio: ratio };
    let pts = xs.iter().map(|x| pca.project(x)).collect();
    Ok((pca, pts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    /// Mean squared error per output averaged over folds.
    pub mse: [f64; N_OUTPUTS],
    /// Error on the held-out validation share, from a model fit on the rest.
    pub validation_mse: [f64; N_OUTPUTS],
    pub validation_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kernel: KernelParams,
    pub scaler: Standardizer,
    /// Standardized training inputs.
    pub inputs: Vec<[f64; N_FEATURES]>,
    /// `coefficients[o][i]`: dual weight of training point `i` for output `o`.
    pub coefficients: Vec<Vec<f64>>,
    pub pca: Pca,
    pub cv: Option<CvReport>,
}

fn fit_dual(
    kernel: &KernelParams,
    zs: &[[f64; N_FEATURES]],
    targets: &[[f64; N_OUTPUTS]],
) -> Result<Vec<Vec<f64>>> {
    let n = zs.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&zs[i], &zs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += kernel.lambda;
    }
    let chol = k.cholesky().ok_or_else(|| {
        Error::Singular("kernel matrix is not positive definite; use a ridge parameter λ > 0".into())
    })?;
    let mut out = Vec::with_capacity(N_OUTPUTS);
    for o in 0..N_OUTPUTS {
        let t = DVector::from_iterator(n, targets.iter().map(|r| r[o]));
        let a = chol.solve(&t);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite dual coefficients; increase λ".into()));
        }
        out.push(a.iter().copied().collect());
    }
    Ok(out)
}

fn predict_dual(
    kernel: &KernelParams,
    inputs: &[[f64; N_FEATURES]],
    coef: &[Vec<f64>],
    z: &[f64; N_FEATURES],
) -> [f64; N_OUTPUTS] {
    let kv: Vec<f64> = inputs.iter().map(|x| kernel.eval(x, z)).collect();
    let mut out = [0.0; N_OUTPUTS];
    for (o, c) in coef.iter().enumerate() {
        out[o] = c.iter().zip(&kv).map(|(a, b)| a * b).sum();
    }
    out
}

fn fit_subset(kernel: &KernelParams, records: &[&TrainingRecord]) -> Result<(Standardizer, Vec<[f64; N_FEATURES]>, Vec<Vec<f64>>)> {
    let xs: Vec<[f64; N_FEATURES]> = records.iter().map(|r| r.features.to_array()).collect();
    let scaler = Standardizer::fit(&xs);
    let zs: Vec<_> = xs.iter().map(|x| scaler.apply(x)).collect();
    let ts: Vec<[f64; N_OUTPUTS]> = records.iter().map(|r| r.targets).collect();
    let coef = fit_dual(kernel, &zs, &ts)?;
    Ok((scaler, zs, coef))
}

fn mse_on(
    kernel: &KernelParams,
    fit: &(Standardizer, Vec<[f64; N_FEATURES]>, Vec<Vec<f64>>),
    test: &[&TrainingRecord],
) -> [f64; N_OUTPUTS] {
    let mut err = [0.0; N_OUTPUTS];
    for r in test {
        let p = predict_dual(kernel, &fit.1, &fit.2, &fit.0.apply(&r.features.to_array()));
        for o in 0..N_OUTPUTS {
            err[o] += (p[o] - r.targets[o]).powi(2) / test.len() as f64;
        }
    }
    err
}

/// Fits on all records. The CV report uses a seeded shuffle: 10% held out for
/// validation, 5-fold cross-validation on the remainder.
pub fn train(records: &[TrainingRecord], kernel: KernelParams, seed: u64) -> Result<RegressionModel> {
    if records.len() < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 records, got {}", records.len())));
    }
    if kernel.lambda < 0.0 || !kernel.lambda.is_finite() {
        return Err(Error::InvalidInput("λ must be finite and non-negative".into()));
    }
    for r in records {
        if r.targets.iter().chain(r.features.to_array().iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite values in record {}", r.instance)));
        }
    }
    let all: Vec<&TrainingRecord> = records.iter().collect();
    let (scaler, inputs, coefficients) = fit_subset(&kernel, &all)?;
    let xs: Vec<[f64; N_FEATURES]> = records.iter().map(|r| r.features.to_array()).collect();
    let (pca, _) = pca_project(&xs)?;

    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (records.len() / 10).max(1);
    let (val, rest) = idx.split_at(n_val);
    let folds = 5.min(rest.len());
    let mut mse = [0.0; N_OUTPUTS];
    for f in 0..folds {
        let test: Vec<&TrainingRecord> = rest.iter().enumerate().filter(|(p, _)| p % folds == f).map(|(_, &i)| &records[i]).collect();
        let trn: Vec<&TrainingRecord> = rest.iter().enumerate().filter(|(p, _)| p % folds != f).map(|(_, &i)| &records[i]).collect();
        let fit = fit_subset(&kernel, &trn)?;
        let e = mse_on(&kernel, &fit, &test);
        for o in 0..N_OUTPUTS {
            mse[o] += e[o] / folds as f64;
        }
    }
    let rest_recs: Vec<&TrainingRecord> = rest.iter().map(|&i| &records[i]).collect();
    let val_recs: Vec<&TrainingRecord> = val.iter().map(|&i| &records[i]).collect();
    let validation_mse = mse_on(&kernel, &fit_subset(&kernel, &rest_recs)?, &val_recs);
    Ok(RegressionModel {
        kernel,
        scaler,
        inputs,
        coefficients,
        pca,
        cv: Some(CvReport { folds, mse, validation_mse, validation_size: n_val }),
    })
}

impl RegressionModel {
    pub fn predict(&self, features: &FeatureVector) -> [f64; N_OUTPUTS] {
        self.predict_raw(&features.to_array())
    }

    pub fn predict_raw(&self, x: &[f64; N_FEATURES]) -> [f64; N_OUTPUTS] {
        predict_dual(&self.kernel, &self.inputs, &self.coefficients, &self.scaler.apply(x))
    }

    pub fn pick_measure(&self, features: &FeatureVector) -> MeasureKind {
        argmax_measure(&self.predict(features))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// First index of the maximum, mapped to its measure.
pub fn argmax_measure(pred: &[f64; N_OUTPUTS]) -> MeasureKind {
    let mut best = 0;
    for o in 1..N_OUTPUTS {
        if pred[o] > pred[best] {
            best = o;
        }
    }
    MeasureKind::ALL[best]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub pc1: f64,
    pub pc2: f64,
    pub measure: MeasureKind,
    /// Best minus second-best prediction.
    pub confidence: f64,
}

/// Evaluates `pick_measure` on a `resolution × resolution` grid over the
/// training points' PCA bounding box, widened by 5% on each side.
pub fn export_decision_regions(model: &RegressionModel, resolution: usize) -> Result<Vec<RegionCell>> {
    if resolution < 2 {
        return Err(Error::InvalidInput("grid resolution must be at least 2".into()));
    }
    let pts: Vec<[f64; 2]> = model.inputs.iter().map(|z| model.pca.project(&model.scaler.invert(z))).collect();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..2 {
        let w = (hi[k] - lo[k]).max(1e-9);
        lo[k] -= 0.05 * w;
        hi[k] += 0.05 * w;
    }
    let step = |k: usize| (hi[k] - lo[k]) / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for a in 0..resolution {
        for b in 0..resolution {
            let pc = [lo[0] + a as f64 * step(0), lo[1] + b as f64 * step(1)];
            let pred = model.predict_raw(&model.pca.lift(pc));
            let measure = argmax_measure(&pred);
            let top = pred[measure.index()];
            let second = pred
                .iter()
                .enumerate()
                .filter(|&(o, _)| o != measure.index())
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(RegionCell { pc1: pc[0], pc2: pc[1], measure, confidence: top - second });
        }
    }
    Ok(out)
}

pub fn write_regions_csv<W: Write>(cells: &[RegionCell], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["pc1", "pc2", "measure", "confidence"]).map_err(csv_err)?;
    for c in cells {
        wr.write_record([c.pc1.to_string(), c.pc2.to_string(), c.measure.name().to_string(), c.confidence.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn header() -> Vec<String> {
    let mut h = vec!["instance".to_string(), "seed".to_string()];
    h.extend(FeatureVector::NAMES.iter().map(|s| s.to_string()));
    h.extend(MeasureKind::ALL.iter().map(|m| m.name().to_string()));
    h
}

/// `instance,seed,<5 features>,<8 targets in measure order>`
pub fn write_training_csv<W: Write>(records: &[TrainingRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header()).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.instance.clone(), r.seed.to_string()];
        row.extend(r.features.to_array().iter().map(|v| v.to_string()));
        row.extend(r.targets.iter().map(|v| v.to_string()));
        wr.write_record(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_training_csv<R: Read>(r: R) -> Result<Vec<TrainingRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let want = header();
    let got: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(|s| s.to_string()).collect();
    if got != want {
        return Err(Error::Parse(format!("unexpected CSV header {got:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |k: usize| -> Result<f64> {
            rec[k].trim().parse::<f64>().map_err(|_| Error::Parse(format!("row {}: bad number {:?}", line + 2, &rec[k])))
        };
        let mut f = [0.0; N_FEATURES];
        for (k, v) in f.iter_mut().enumerate() {
            *v = num(2 + k)?;
        }
        let mut t = [0.0; N_OUTPUTS];
        for (k, v) in t.iter_mut().enumerate() {
            *v = num(2 + N_FEATURES + k)?;
        }
        let seed = rec[1].trim().parse::<u64>().map_err(|_| Error::Parse(format!("row {}: bad seed", line + 2)))?;
        out.push(TrainingRecord { instance: rec[0].to_string(), seed, features: FeatureVector::from_array(f), targets: t });
    }
    Ok(out)
}

/// Records whose best measure is a-dcd when `dual_deg > 0.5` and eff
/// otherwise. Other measures score uniformly in `[0.3, 0.8]`.
pub fn synthetic_rule_corpus(count: usize, seed: u64) -> Vec<TrainingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut f = [0.0; N_FEATURES];
            f.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
            let best = if f[0] > 0.5 { MeasureKind::ADcd } else { MeasureKind::Eff };
            let mut t = [0.0; N_OUTPUTS];
            for (o, v) in t.iter_mut().enumerate() {
                *v = if o == best.index() { 1.0 } else { rng.gen_range(0.3..0.8) };
            }
            TrainingRecord { instance: format!("syn{i}"), seed, features: FeatureVector::from_array(f), targets: t }
        })
        .collect()
}

//! Experiment harness: synthetic corpora, the run matrix with a resumable
//! JSON-lines store, and the comparison statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bnb::{branch_and_cut_with, BnbOptions, NodeStats, SolveStatus};
use crate::cutpipe::SeparationConfig;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::lp_simplex::solve_lp;
use crate::measures::{relative_density, MeasureKind};
use crate::model::{Incumbent, IncumbentSource, MipInstance, RowKind};
use crate::regress::{TrainingRecord, N_OUTPUTS};

/// A measure, or eff with a relative density filter in percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Measure(MeasureKind),
    EffDensity(u32),
}

impl Variant {
    pub const DENSITY_LEVELS: [u32; 5] = [5, 10, 20, 40, 80];

    pub fn measure(self) -> MeasureKind {
        match self {
            Variant::Measure(m) => m,
            Variant::EffDensity(_) => MeasureKind::Eff,
        }
    }

    pub fn density_threshold(self) -> Option<f64> {
        match self {
            Variant::Measure(_) => None,
            Variant::EffDensity(p) => Some(p as f64 / 100.0),
        }
    }

    pub fn all_measures() -> Vec<Variant> {
        MeasureKind::ALL.iter().map(|&m| Variant::Measure(m)).collect()
    }

    pub fn density_sweep() -> Vec<Variant> {
        Self::DENSITY_LEVELS.iter().map(|&p| Variant::EffDensity(p)).collect()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Measure(m) => write!(f, "{m}"),
            Variant::EffDensity(p) => write!(f, "eff-{p:02}"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(p) = s.strip_prefix("eff-") {
            let pct: u32 = p.parse().map_err(|_| format!("bad density variant {s:?}"))?;
            if pct == 0 || pct > 100 {
                return Err(format!("density percentage out of range in {s:?}"));
            }
            return Ok(Variant::EffDensity(pct));
        }
        s.parse::<MeasureKind>().map(Variant::Measure)
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Comma separated variant list; `all` expands to the eight measures and
/// `density` to the five filter levels.
pub fn parse_variants(s: &str) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok {
            "all" => out.extend(Variant::all_measures()),
            "density" => out.extend(Variant::density_sweep()),
            t => out.push(t.parse().map_err(Error::InvalidInput)?),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("empty variant list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Knapsack,
    SetCover,
    Packing,
    Mixed,
}

impl FromStr for CorpusKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "knapsack" => Ok(CorpusKind::Knapsack),
            "set_cover" | "set-cover" => Ok(CorpusKind::SetCover),
            "packing" => Ok(CorpusKind::Packing),
            "mixed" => Ok(CorpusKind::Mixed),
            _ => Err(format!("unknown corpus kind {s:?}")),
        }
    }
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CorpusKind::Knapsack => "knapsack",
            CorpusKind::SetCover => "set_cover",
            CorpusKind::Packing => "packing",
            CorpusKind::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// Upper limits on instance size. For `Mixed`, half of `n` is binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeParams {
    pub n: usize,
    pub m: usize,
}

impl Default for SizeParams {
    fn default() -> Self {
        SizeParams { n: 12, m: 6 }
    }
}

fn knapsack(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let rows = rng.gen_range(1..=m.clamp(1, 3));
    let mut a = Vec::with_capacity(rows);
    let mut b = Vec::with_capacity(rows);
    let mut value = vec![0.0; n];
    for _ in 0..rows {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=30) as f64).collect();
        let cap = (0.5 * w.iter().sum::<f64>()).floor();
        for (v, wj) in value.iter_mut().zip(&w) {
            *v += wj;
        }
        a.push(w);
        b.push(cap);
    }
    let c = value.iter().map(|v| -(v / rows as f64 + rng.gen_range(0..10) as f64).round()).collect();
    (c, a, b)
}

fn set_cover(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    // enough rows that every column tends to be shared, else the root is integral
    let rows = m.max(3).max(n / 2);
    let mut a = Vec::with_capacity(rows);
    for _ in 0..rows {
        let k = rng.gen_range(2..=3.min(n));
        let mut cols: Vec<usize> = (0..n).collect();
        cols.shuffle(rng);
        let mut row = vec![0.0; n];
        for &j in &cols[..k] {
            row[j] = -1.0;
        }
        a.push(row);
    }
    let c = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
    (c, a, vec![-1.0; rows])
}

fn packing(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let rows = m.max(1);
    let mut a = Vec::with_capacity(rows);
    let mut b = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(1..=9) as f64 }).collect();
        let sum: f64 = row.iter().sum();
        let max = row.iter().cloned().fold(0.0, f64::max);
        b.push((0.4 * sum).floor().max(max));
        a.push(row);
    }
    let c = (0..n).map(|_| -(rng.gen_range(1..=20) as f64)).collect();
    (c, a, b)
}

/// Capacitated facility choice: binaries `y`, flows `x_j ≤ cap_j y_j`, one
/// demand equality and a budget row on the binaries.
fn mixed(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MipInstance<f64> {
    let k = (n / 2).max(2);
    let nv = 2 * k;
    let cap: Vec<f64> = (0..k).map(|_| rng.gen_range(5..=20) as f64).collect();
    let total: f64 = cap.iter().sum();
    let demand = (rng.gen_range(0.3..0.6) * total).round();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut kinds = Vec::new();
    for j in 0..k {
        let mut r = vec![0.0; nv];
        r[k + j] = 1.0;
        r[j] = -cap[j];
        rows.push(r);
        rhs.push(0.0);
        kinds.push(RowKind::Le);
    }
    let mut d = vec![0.0; nv];
    d[k..].iter_mut().for_each(|v| *v = 1.0);
    rows.push(d);
    rhs.push(demand);
    kinds.push(RowKind::Eq);
    if rows.len() < m.max(k + 2) {
        let mut budget = vec![0.0; nv];
        budget[..k].iter_mut().for_each(|v| *v = 1.0);
        rows.push(budget);
        rhs.push((k as f64 * 0.8).ceil());
        kinds.push(RowKind::Le);
    }
    let mut c: Vec<f64> = (0..k).map(|_| rng.gen_range(10..=40) as f64).collect();
    c.extend((0..k).map(|_| rng.gen_range(1..=5) as f64));
    let mut upper = vec![1.0; k];
    upper.extend(cap.iter().copied());
    MipInstance::new("mixed", c, rows, rhs, kinds, vec![0.0; nv], upper, (0..k).collect())
        .expect("generated instance is well formed")
}

fn root_is_fractional(inst: &MipInstance<f64>) -> bool {
    match solve_lp(inst, &[], None, 0) {
        Ok(lp) if lp.is_optimal() => inst.integer.iter().any(|&j| (lp.point[j] - lp.point[j].round()).abs() > 1e-6),
        _ => false,
    }
}

/// Seeded synthetic corpus. Every instance is feasible, bounded and has a
/// fractional root LP (resampled up to 100 times otherwise).
pub fn gen_corpus(kind: CorpusKind, count: usize, size: SizeParams, seed: u64) -> Result<Vec<MipInstance<f64>>> {
    if size.n < 2 || size.n > 60 || size.m == 0 || size.m > 60 {
        return Err(Error::InvalidInput(format!("size {size:?} outside 2 ≤ n ≤ 60, 1 ≤ m ≤ 60")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut accepted = None;
        for _ in 0..100 {
            let n = rng.gen_range((size.n / 2).max(2)..=size.n);
            let m = rng.gen_range(1..=size.m);
            let mut inst = match kind {
                CorpusKind::Mixed => mixed(&mut rng, n, m),
                _ => {
                    let (c, a, b) = match kind {
                        CorpusKind::Knapsack => knapsack(&mut rng, n, m),
                        CorpusKind::SetCover => set_cover(&mut rng, n, m),
                        _ => packing(&mut rng, n, m),
                    };
                    MipInstance::with_le_rows("", c, a, b, vec![0.0; n], vec![1.0; n], (0..n).collect())?
                }
            };
            inst.name = format!("{kind}-{seed}-{i:03}");
            if root_is_fractional(&inst) {
                accepted = Some(inst);
                break;
            }
        }
        out.push(accepted.ok_or_else(|| Error::InvalidInput(format!("could not sample a fractional {kind} instance")))?);
    }
    Ok(out)
}

/// One `(instance, seed, variant)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub instance: String,
    pub seed: u64,
    pub variant: Variant,
    pub stats: NodeStats,
    pub features: Option<FeatureVector>,
    pub cuts_added: usize,
    pub rounds_executed: usize,
    pub cuts_per_round: Vec<usize>,
    /// Largest relative density among added cuts (0 without cuts).
    pub max_relative_density: f64,
}

impl ExperimentRecord {
    pub fn key(&self) -> (String, u64, Variant) {
        (self.instance.clone(), self.seed, self.variant)
    }
}

#[derive(Debug, Clone)]
pub struct MatrixConfig {
    pub base: SeparationConfig,
    pub time_limit: Option<f64>,
    pub jobs: usize,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig { base: SeparationConfig::default(), time_limit: None, jobs: 1 }
    }
}

/// Optimal point from plain branch-and-bound (no cuts). `None` if the
/// instance is infeasible or the limit was hit.
pub fn reference_incumbent(inst: &MipInstance<f64>, time_limit: Option<f64>) -> Result<Option<Incumbent<f64>>> {
    let cfg = SeparationConfig { rounds: 0, seed: 1, ..SeparationConfig::default() };
    let opts = BnbOptions { time_limit, ..BnbOptions::default() };
    let out = branch_and_cut_with(inst, &cfg, &opts, None)?;
    if out.stats.status != SolveStatus::Optimal {
        return Ok(None);
    }
    Ok(out.incumbent.map(|i| Incumbent { source: IncumbentSource::Provided, ..i }))
}

pub fn run_one(
    inst: &MipInstance<f64>,
    variant: Variant,
    seed: u64,
    cfg: &MatrixConfig,
    incumbent: Option<&Incumbent<f64>>,
) -> Result<ExperimentRecord> {
    let sep = SeparationConfig {
        measure: variant.measure(),
        density_threshold: variant.density_threshold(),
        seed,
        ..cfg.base.clone()
    };
    let opts = BnbOptions { time_limit: cfg.time_limit, ..BnbOptions::default() };
    let out = branch_and_cut_with(inst, &sep, &opts, incumbent)?;
    let n = inst.n();
    let max_rd = out.cuts.iter().map(|c| relative_density(c, n, sep.tol.zero)).fold(0.0, f64::max);
    Ok(ExperimentRecord {
        instance: inst.name.clone(),
        seed,
        variant,
        stats: out.stats,
        features: out.features,
        cuts_added: out.cuts.len(),
        rounds_executed: out.reports.len(),
        cuts_per_round: out.reports.iter().map(|r| r.added).collect(),
        max_relative_density: max_rd,
    })
}

pub fn read_store(path: &Path) -> Result<Vec<ExperimentRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ExperimentRecord>(&line) {
            Ok(r) => out.push(r),
            // a torn final line from an interrupted run is skipped
            Err(e) => log::warn!("skipping unreadable record on line {}: {e}", i + 1),
        }
    }
    Ok(out)
}

/// Runs the full cross product of `corpus × variants × seeds`. With a store,
/// existing records are kept and only missing ones are computed and appended.
/// Returned records are sorted by corpus order, variant order, then seed.
pub fn run_matrix(
    corpus: &[MipInstance<f64>],
    variants: &[Variant],
    seeds: &[u64],
    cfg: &MatrixConfig,
    store: Option<&Path>,
) -> Result<Vec<ExperimentRecord>> {
    let mut done: HashMap<(String, u64, Variant), ExperimentRecord> = HashMap::new();
    if let Some(p) = store {
        for r in read_store(p)? {
            done.entry(r.key()).or_insert(r);
        }
    }
    let names: HashSet<&str> = corpus.iter().map(|i| i.name.as_str()).collect();
    if names.len() != corpus.len() {
        return Err(Error::InvalidInput("instance names in the corpus must be unique".into()));
    }
    let mut todo = Vec::new();
    for (ii, inst) in corpus.iter().enumerate() {
        for &v in variants {
            for &s in seeds {
                if !done.contains_key(&(inst.name.clone(), s, v)) {
                    todo.push((ii, v, s));
                }
            }
        }
    }
    let needs_ref: Vec<usize> = {
        let mut v: Vec<usize> = todo.iter().map(|t| t.0).collect();
        v.dedup();
        v
    };
    let mut writer = match store {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    // records are appended chunk by chunk in task order, so the store bytes
    // do not depend on the thread count
    let chunk = 4 * cfg.jobs.max(1);
    let mut fresh = Vec::with_capacity(todo.len());
    pool.install(|| -> Result<()> {
        let refs: HashMap<usize, Option<Incumbent<f64>>> = needs_ref
            .par_iter()
            .map(|&i| reference_incumbent(&corpus[i], cfg.time_limit).map(|r| (i, r)))
            .collect::<Result<_>>()?;
        for part in todo.chunks(chunk) {
            let recs: Vec<ExperimentRecord> = part
                .par_iter()
                .map(|&(ii, v, s)| run_one(&corpus[ii], v, s, cfg, refs[&ii].as_ref()))
                .collect::<Result<_>>()?;
            if let Some(f) = writer.as_mut() {
                for rec in &recs {
                    writeln!(f, "{}", serde_json::to_string(rec)?)?;
                }
                f.flush()?;
            }
            fresh.extend(recs);
        }
        Ok(())
    })?;
    for r in fresh {
        done.insert(r.key(), r);
    }
    let mut out = Vec::with_capacity(corpus.len() * variants.len() * seeds.len());
    for inst in corpus {
        for &v in variants {
            for &s in seeds {
                if let Some(r) = done.remove(&(inst.name.clone(), s, v)) {
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Nodes,
    Time,
    Gap,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nodes" => Ok(Metric::Nodes),
            "time" => Ok(Metric::Time),
            "gap" | "gap_after_root" => Ok(Metric::Gap),
            _ => Err(format!("unknown metric {s:?}")),
        }
    }
}

impl Metric {
    pub fn value(self, r: &ExperimentRecord) -> Option<f64> {
        match self {
            Metric::Nodes => Some(r.stats.nodes_processed as f64),
            Metric::Time => Some(r.stats.solve_time),
            Metric::Gap => r.stats.gap_after_root,
        }
    }

    /// Shift used by [`shifted_geo_mean`] tables.
    pub fn shift(self) -> f64 {
        match self {
            Metric::Nodes => 10.0,
            Metric::Time | Metric::Gap => 1.0,
        }
    }
}

/// `instance → variant → per-seed values`, dropping instances where the
/// metric is missing for some record, and for nodes and time, instances where
/// any variant hit the time limit.
fn table(records: &[ExperimentRecord], metric: Metric) -> BTreeMap<String, BTreeMap<Variant, BTreeMap<u64, f64>>> {
    let mut t: BTreeMap<String, BTreeMap<Variant, BTreeMap<u64, f64>>> = BTreeMap::new();
    let mut bad: HashSet<String> = HashSet::new();
    for r in records {
        let timed_out = r.stats.status == SolveStatus::TimeLimit;
        match metric.value(r) {
            Some(v) if !(timed_out && metric != Metric::Gap) => {
                t.entry(r.instance.clone()).or_default().entry(r.variant).or_default().insert(r.seed, v);
            }
            _ => {
                bad.insert(r.instance.clone());
            }
        }
    }
    t.retain(|k, _| !bad.contains(k));
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadToHead {
    pub variants: Vec<Variant>,
    /// `win[i][j]`: share of instances where `i` is at least as good as `j`
    /// on every seed and strictly better on one. `None` on the diagonal.
    pub win: Vec<Vec<Option<f64>>>,
    pub loss: Vec<Vec<Option<f64>>>,
    pub instances: usize,
}

pub fn head_to_head(records: &[ExperimentRecord], metric: Metric, variants: &[Variant]) -> HeadToHead {
    let t = table(records, metric);
    let k = variants.len();
    // only instances with every variant on a common seed set
    let rows: Vec<&BTreeMap<Variant, BTreeMap<u64, f64>>> = t
        .values()
        .filter(|row| {
            let first = row.get(&variants[0]).map(|s| s.keys().collect::<Vec<_>>());
            variants.iter().all(|v| row.get(v).map(|s| s.keys().collect::<Vec<_>>()) == first) && first.is_some()
        })
        .collect();
    let beats = |row: &BTreeMap<Variant, BTreeMap<u64, f64>>, a: Variant, b: Variant| {
        let (sa, sb) = (&row[&a], &row[&b]);
        let mut strict = false;
        for (s, &va) in sa {
            let vb = sb[s];
            if va > vb {
                return false;
            }
            strict |= va < vb;
        }
        strict
    };
    let mut win = vec![vec![None; k]; k];
    let mut loss = vec![vec![None; k]; k];
    let n = rows.len();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let w = rows.iter().filter(|row| beats(row, variants[i], variants[j])).count();
            let share = if n == 0 { 0.0 } else { w as f64 / n as f64 };
            win[i][j] = Some(share);
            loss[j][i] = Some(share);
        }
    }
    HeadToHead { variants: variants.to_vec(), win, loss, instances: n }
}

/// `exp(mean(ln(v + s))) − s`.
pub fn shifted_geo_mean(values: &[f64], shift: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("shifted geometric mean of no values".into()));
    }
    if let Some(v) = values.iter().find(|&&v| !(v + shift > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("value {v} with shift {shift} is not positive")));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        return Ok(lo);
    }
    let mean = values.iter().map(|v| (v + shift).ln()).sum::<f64>() / values.len() as f64;
    // exp(ln(·)) rounding can step just outside the value range
    Ok((mean.exp() - shift).clamp(lo, hi))
}

/// Per-variant SGM over seed-averaged instance values, and the same divided
/// by the SGM of `normalize_by` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgmTable {
    pub metric: Metric,
    pub shift: f64,
    pub instances: usize,
    pub rows: Vec<(Variant, f64, Option<f64>)>,
}

pub fn sgm_table(records: &[ExperimentRecord], metric: Metric, variants: &[Variant], normalize_by: Option<Variant>) -> Result<SgmTable> {
    let t = table(records, metric);
    let complete: Vec<_> = t.values().filter(|row| variants.iter().all(|v| row.contains_key(v))).collect();
    let shift = metric.shift();
    let mut rows = Vec::new();
    let mean = |s: &BTreeMap<u64, f64>| s.values().sum::<f64>() / s.len() as f64;
    let sgm_of = |v: Variant| -> Result<f64> {
        let vals: Vec<f64> = complete.iter().map(|row| mean(&row[&v])).collect();
        shifted_geo_mean(&vals, shift)
    };
    let base = match normalize_by {
        Some(b) if variants.contains(&b) => Some(sgm_of(b)?),
        _ => None,
    };
    for &v in variants {
        let g = sgm_of(v)?;
        rows.push((v, g, base.map(|b| if b > 0.0 { g / b } else { f64::NAN })));
    }
    Ok(SgmTable { metric, shift, instances: complete.len(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbrRow {
    pub instance: String,
    /// Same order as the variant list; `best = 1`.
    pub ratios: Vec<f64>,
    /// Whether values were shifted by one because the row minimum was ≤ 0.
    pub shifted: bool,
}

/// Seed-averaged metric divided by the best variant's value per instance.
/// With `reciprocal`, the best value is divided by each variant's instead,
/// giving scores in `(0, 1]`.
pub fn virtual_best_ratios(records: &[ExperimentRecord], metric: Metric, variants: &[Variant], reciprocal: bool) -> Vec<VbrRow> {
    let t = table(records, metric);
    let mut out = Vec::new();
    for (inst, row) in &t {
        if !variants.iter().all(|v| row.contains_key(v)) {
            continue;
        }
        let avg: Vec<f64> = variants.iter().map(|v| row[v].values().sum::<f64>() / row[v].len() as f64).collect();
        out.push(ratio_row(inst.clone(), &avg, reciprocal));
    }
    out
}

fn ratio_row(instance: String, vals: &[f64], reciprocal: bool) -> VbrRow {
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let shifted = min <= 0.0;
    let s = if shifted { 1.0 - min.min(0.0) } else { 0.0 };
    let best = min + s;
    let ratios = vals.iter().map(|v| if reciprocal { best / (v + s) } else { (v + s) / best }).collect();
    VbrRow { instance, ratios, shifted }
}

/// Regression records from the eight measure variants: per `(instance, seed)`
/// the virtual-best node count divided by each measure's node count. Features
/// are taken from the eff run.
pub fn training_records(records: &[ExperimentRecord]) -> Vec<TrainingRecord> {
    let mut by: BTreeMap<(String, u64), HashMap<MeasureKind, &ExperimentRecord>> = BTreeMap::new();
    for r in records {
        if let Variant::Measure(m) = r.variant {
            by.entry((r.instance.clone(), r.seed)).or_default().insert(m, r);
        }
    }
    let mut out = Vec::new();
    for ((inst, seed), row) in by {
        if row.len() != N_OUTPUTS || row.values().any(|r| r.stats.status == SolveStatus::TimeLimit) {
            continue;
        }
        let Some(features) = row[&MeasureKind::Eff].features else { continue };
        let nodes: Vec<f64> = MeasureKind::ALL.iter().map(|m| row[m].stats.nodes_processed as f64).collect();
        let r = ratio_row(inst.clone(), &nodes, true);
        let mut targets = [0.0; N_OUTPUTS];
        targets.copy_from_slice(&r.ratios);
        out.push(TrainingRecord { instance: inst, seed, features, targets });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickerReport {
    pub folds: usize,
    pub instances: usize,
    pub sgm_picked: f64,
    /// Node SGM of each fixed measure on the same instances.
    pub sgm_fixed: Vec<(MeasureKind, f64)>,
    pub best_fixed: MeasureKind,
    pub worst_fixed: MeasureKind,
}

/// Cross-validated model selection by instance: each instance is scored by
/// a model that never saw it, and the picked measure's seed-averaged node
/// count enters the SGM.
pub fn evaluate_picker(records: &[ExperimentRecord], kernel: crate::regress::KernelParams, folds: usize, seed: u64) -> Result<PickerReport> {
    let train_all = training_records(records);
    let mut insts: Vec<String> = train_all.iter().map(|r| r.instance.clone()).collect();
    insts.dedup();
    if insts.len() < folds.max(2) {
        return Err(Error::InvalidInput("too few instances for cross-validated picking".into()));
    }
    let t = table(records, Metric::Nodes);
    let avg = |inst: &str, m: MeasureKind| {
        let s = &t[inst][&Variant::Measure(m)];
        s.values().sum::<f64>() / s.len() as f64
    };
    let mut picked_nodes = Vec::new();
    let mut fixed: Vec<Vec<f64>> = vec![Vec::new(); N_OUTPUTS];
    for f in 0..folds {
        let test: HashSet<&str> = insts.iter().enumerate().filter(|(i, _)| i % folds == f).map(|(_, s)| s.as_str()).collect();
        let train: Vec<TrainingRecord> = train_all.iter().filter(|r| !test.contains(r.instance.as_str())).cloned().collect();
        let model = crate::regress::train(&train, kernel, seed)?;
        for inst in insts.iter().filter(|s| test.contains(s.as_str())) {
            let recs: Vec<&TrainingRecord> = train_all.iter().filter(|r| &r.instance == inst).collect();
            // features are seed-averaged for the pick
            let mut fa = [0.0; 5];
            for r in &recs {
                for (k, v) in r.features.to_array().iter().enumerate() {
                    fa[k] += v / recs.len() as f64;
                }
            }
            let m = model.pick_measure(&FeatureVector::from_array(fa));
            picked_nodes.push(avg(inst, m));
            for (o, &mk) in MeasureKind::ALL.iter().enumerate() {
                fixed[o].push(avg(inst, mk));
            }
        }
    }
    let sgm_picked = shifted_geo_mean(&picked_nodes, Metric::Nodes.shift())?;
    let sgm_fixed: Vec<(MeasureKind, f64)> = MeasureKind::ALL
        .iter()
        .zip(&fixed)
        .map(|(&m, v)| shifted_geo_mean(v, Metric::Nodes.shift()).map(|g| (m, g)))
        .collect::<Result<_>>()?;
    let best = sgm_fixed.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("eight measures").0;
    let worst = sgm_fixed.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("eight measures").0;
    Ok(PickerReport { folds, instances: picked_nodes.len(), sgm_picked, sgm_fixed, best_fixed: best, worst_fixed: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnb::brute_force_optimum;

    fn rec(inst: &str, seed: u64, v: Variant, nodes: usize, gap: Option<f64>) -> ExperimentRecord {
        ExperimentRecord {
            instance: inst.into(),
            seed,
            variant: v,
            stats: NodeStats {
                nodes_processed: nodes,
                lp_iterations_total: 0,
                solve_time: 0.0,
                primal_bound: Some(0.0),
                dual_bound: Some(0.0),
                status: SolveStatus::Optimal,
                gap_after_root: gap,
            },
            features: Some(FeatureVector::default()),
            cuts_added: 0,
            rounds_executed: 0,
            cuts_per_round: vec![],
            max_relative_density: 0.0,
        }
    }

    const A: Variant = Variant::Measure(MeasureKind::Eff);
    const B: Variant = Variant::Measure(MeasureKind::Dcd);
    const C: Variant = Variant::Measure(MeasureKind::AEff);

    #[test]
    fn variant_names() {
        assert_eq!(Variant::EffDensity(5).to_string(), "eff-05");
        assert_eq!("eff-80".parse::<Variant>().unwrap(), Variant::EffDensity(80));
        assert_eq!("app-a-dcd".parse::<Variant>().unwrap(), Variant::Measure(MeasureKind::AppADcd));
        assert_eq!(parse_variants("all,density").unwrap().len(), 13);
        assert!(parse_variants("eff-0").is_err());
        let j = serde_json::to_string(&Variant::EffDensity(10)).unwrap();
        assert_eq!(j, "\"eff-10\"");
    }

    #[test]
    fn sgm_cases() {
        assert_eq!(shifted_geo_mean(&[1.0, 1.0, 1.0], 1.0).unwrap(), 1.0);
        assert!((shifted_geo_mean(&[0.0, 3.0], 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((shifted_geo_mean(&[7.5], 10.0).unwrap() - 7.5).abs() < 1e-12);
        assert!(shifted_geo_mean(&[-2.0], 1.0).is_err());
        assert!(shifted_geo_mean(&[], 1.0).is_err());
    }

    #[test]
    fn h2h_identical_and_dominant() {
        let mut rs = Vec::new();
        for s in 1..=3 {
            rs.push(rec("i", s, A, 10, None));
            rs.push(rec("i", s, B, 10, None));
            rs.push(rec("i", s, C, 5, None));
        }
        let h = head_to_head(&rs, Metric::Nodes, &[A, B, C]);
        assert_eq!((h.win[0][1], h.loss[0][1]), (Some(0.0), Some(0.0)));
        assert_eq!((h.win[2][0], h.loss[2][0]), (Some(1.0), Some(0.0)));
        assert_eq!(h.win[0][0], None);
    }

    #[test]
    fn h2h_hand_tally() {
        // i1: A better on one seed, tied elsewhere → A wins
        // i2: A and B trade seeds → neither wins
        // i3: B better everywhere → B wins
        let mut rs = Vec::new();
        for (s, a, b) in [(1, 3, 4), (2, 4, 4)] {
            rs.push(rec("i1", s, A, a, None));
            rs.push(rec("i1", s, B, b, None));
        }
        for (s, a, b) in [(1, 3, 4), (2, 5, 4)] {
            rs.push(rec("i2", s, A, a, None));
            rs.push(rec("i2", s, B, b, None));
        }
        for (s, a, b) in [(1, 9, 4), (2, 9, 4)] {
            rs.push(rec("i3", s, A, a, None));
            rs.push(rec("i3", s, B, b, None));
        }
        let h = head_to_head(&rs, Metric::Nodes, &[A, B]);
        assert_eq!(h.instances, 3);
        assert_eq!(h.win[0][1], Some(1.0 / 3.0));
        assert_eq!(h.win[1][0], Some(1.0 / 3.0));
        assert_eq!(h.loss[0][1], h.win[1][0]);
    }

    #[test]
    fn h2h_skips_timeouts_for_nodes() {
        let mut rs = vec![rec("i", 1, A, 3, Some(1.0)), rec("i", 1, B, 4, Some(2.0))];
        rs[1].stats.status = SolveStatus::TimeLimit;
        assert_eq!(head_to_head(&rs, Metric::Nodes, &[A, B]).instances, 0);
        assert_eq!(head_to_head(&rs, Metric::Gap, &[A, B]).instances, 1);
    }

    #[test]
    fn vbr_cases() {
        let rs = vec![rec("i", 1, A, 10, None), rec("i", 1, B, 20, None)];
        let r = virtual_best_ratios(&rs, Metric::Nodes, &[A, B], false);
        assert_eq!(r[0].ratios, vec![1.0, 2.0]);
        let r = virtual_best_ratios(&rs, Metric::Nodes, &[A, B], true);
        assert_eq!(r[0].ratios, vec![1.0, 0.5]);
        // three measures, seed averaged: A = (2+4)/2, B = 6, C = 1.5
        let rs = vec![
            rec("j", 1, A, 2, None),
            rec("j", 2, A, 4, None),
            rec("j", 1, B, 6, None),
            rec("j", 2, B, 6, None),
            rec("j", 1, C, 1, None),
            rec("j", 2, C, 2, None),
        ];
        let r = virtual_best_ratios(&rs, Metric::Nodes, &[A, B, C], false);
        assert_eq!(r[0].ratios, vec![2.0, 4.0, 1.0]);
        // zero gap shifts the row
        let rs = vec![rec("k", 1, A, 1, Some(0.0)), rec("k", 1, B, 1, Some(2.0))];
        let r = virtual_best_ratios(&rs, Metric::Gap, &[A, B], false);
        assert!(r[0].shifted);
        assert_eq!(r[0].ratios, vec![1.0, 3.0]);
    }

    #[test]
    fn corpus_is_deterministic_and_solvable() {
        let size = SizeParams { n: 8, m: 4 };
        for kind in [CorpusKind::Knapsack, CorpusKind::SetCover, CorpusKind::Packing, CorpusKind::Mixed] {
            let a = gen_corpus(kind, 10, size, 3).unwrap();
            let b = gen_corpus(kind, 10, size, 3).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            assert_eq!(a.len(), 10);
            for inst in &a {
                assert!(inst.n() <= 60 && inst.m() <= 60);
                assert!(root_is_fractional(inst));
                assert!(brute_force_optimum(inst).unwrap().is_some(), "{}", inst.name);
            }
        }
        let sc = gen_corpus(CorpusKind::SetCover, 5, size, 4).unwrap();
        for inst in sc {
            assert_eq!(inst.integer.len(), inst.n());
            assert!(inst.rows.iter().flatten().all(|&v| v <= 0.0) && inst.rhs.iter().all(|&b| b < 0.0));
            assert!(inst.upper.iter().all(|&u| u == 1.0));
        }
    }

    #[test]
    fn matrix_cardinality_resume_and_jobs() {
        let corpus = gen_corpus(CorpusKind::Knapsack, 2, SizeParams { n: 6, m: 2 }, 5).unwrap();
        let variants = [A, Variant::EffDensity(5)];
        let cfg = MatrixConfig { base: SeparationConfig { rounds: 5, ..SeparationConfig::default() }, ..MatrixConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("r.jsonl");
        let first = run_matrix(&corpus, &variants, &[1, 2, 3], &cfg, Some(&store)).unwrap();
        assert_eq!(first.len(), 12);
        let again = run_matrix(&corpus, &variants, &[1, 2, 3], &cfg, Some(&store)).unwrap();
        assert_eq!(again, first);
        assert_eq!(read_store(&store).unwrap().len(), 12);
        let par = run_matrix(&corpus, &variants, &[1, 2, 3], &MatrixConfig { jobs: 4, ..cfg.clone() }, None).unwrap();
        assert_eq!(par, first);
        for r in first.iter().filter(|r| r.variant == Variant::EffDensity(5)) {
            assert!(r.max_relative_density <= 0.05);
        }
    }

    #[test]
    fn training_targets() {
        let mut rs = Vec::new();
        for (k, m) in MeasureKind::ALL.iter().enumerate() {
            rs.push(rec("i", 1, Variant::Measure(*m), 10 + k, None));
        }
        let t = training_records(&rs);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].targets[0], 1.0);
        assert!((t[0].targets[7] - 10.0 / 17.0).abs() < 1e-15);
    }
}

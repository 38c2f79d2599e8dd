//! De-novo generation benchmark, fast library search, checkpoint selection
//! and dataset splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{detokenize, embed_conformers, parse_smiles, write_canonical_smiles, ChemError, EmbedOptions, Molecule};
use crate::nn::{sample_ids, CaptionerModel, NnError, SamplerConfig};
use crate::overlap::{best_tc, is_hit, OverlapError};
use crate::pharmacophore::perceive;
use crate::scalar::Real;
use crate::similarity::{default_fingerprint, murcko_scaffold, tanimoto, ConformerStore, LibraryIndex, SimilarityError};
use crate::voxel::{voxelize, GridSpec, VoxelError};

/// Ascending sampling temperatures; each gets an equal share of raw draws.
pub const DEFAULT_TAU_SCHEDULE: [f64; 4] = [1.0, 1.1, 1.25, 1.5];
/// Raw draws allowed per requested unique valid molecule.
pub const RAW_DRAW_FACTOR: usize = 20;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Overlap(#[from] OverlapError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Pharmacophore(#[from] crate::pharmacophore::PharmacophoreError),
}

/// A query molecule with 3D coordinates.
#[derive(Debug, Clone)]
pub struct Query {
    pub id: String,
    pub conformer: Molecule,
}

impl Query {
    pub fn smiles(&self) -> String {
        write_canonical_smiles(&self.conformer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub tau_schedule: Vec<f64>,
    pub top_k: Option<usize>,
    pub max_length: usize,
    /// Conformers embedded per generated molecule.
    pub conformers: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            tau_schedule: DEFAULT_TAU_SCHEDULE.to_vec(),
            top_k: None,
            max_length: 100,
            conformers: 5,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    fn validate(&self) -> Result<(), WorkflowError> {
        if self.tau_schedule.is_empty() || self.tau_schedule.windows(2).any(|w| w[0] > w[1]) {
            return Err(WorkflowError::Invalid("tau schedule must be non-empty and ascending".into()));
        }
        if self.conformers == 0 {
            return Err(WorkflowError::Invalid("conformers must be positive".into()));
        }
        Ok(())
    }
}

/// Unique valid molecules drawn for one grid, ordered by ascending τ.
#[derive(Debug, Clone)]
pub struct GeneratedPool {
    /// `(canonical SMILES, τ)` in pool order.
    pub molecules: Vec<(String, f64)>,
    pub raw_draws: usize,
    /// True when the raw-draw cap stopped sampling before `wanted`.
    pub exhausted: bool,
}

/// Draws in rounds: each round spends `ceil(wanted / |schedule|)` raw
/// draws at every τ, then
/// the pool is the τ-ordered concatenation of unique parseable molecules
/// other than `exclude`. Stops once the pool holds `wanted` molecules or
/// `RAW_DRAW_FACTOR * wanted` raw draws have been spent.
pub fn generate_pool<T: Real>(
    model: &CaptionerModel<T>,
    latent: &[T],
    wanted: usize,
    exclude: &str,
    cfg: &GenerationConfig,
    seed: u64,
) -> Result<GeneratedPool, WorkflowError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = RAW_DRAW_FACTOR * wanted;
    let per_tau = wanted.div_ceil(cfg.tau_schedule.len()).max(1);
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(exclude.to_string());
    let mut per_tau_valid: Vec<Vec<String>> = vec![Vec::new(); cfg.tau_schedule.len()];
    let mut raw = 0usize;
    while per_tau_valid.iter().map(Vec::len).sum::<usize>() < wanted && raw < cap {
        for (slot, &tau) in cfg.tau_schedule.iter().enumerate() {
            let n = per_tau.min(cap - raw);
            if n == 0 {
                break;
            }
            let sc = SamplerConfig { temperature: tau, top_k: cfg.top_k, max_length: cfg.max_length, seed: 0 };
            for ids in sample_ids(model, latent, &sc, n, &mut rng)? {
                let text = detokenize(&ids, model.vocabulary());
                let Ok(m) = parse_smiles(&text) else { continue };
                let canon = write_canonical_smiles(&m);
                if seen.insert(canon.clone()) {
                    per_tau_valid[slot].push(canon);
                }
            }
            raw += n;
        }
    }
    let mut molecules: Vec<(String, f64)> = per_tau_valid
        .into_iter()
        .zip(&cfg.tau_schedule)
        .flat_map(|(v, &tau)| v.into_iter().map(move |s| (s, tau)))
        .collect();
    let exhausted = molecules.len() < wanted;
    molecules.truncate(wanted);
    Ok(GeneratedPool { molecules, raw_draws: raw, exhausted })
}

/// One scored candidate of a query.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub smiles: String,
    /// `None` when no conformer could be scored.
    pub combo: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub scored: usize,
    pub hits: usize,
    pub unique_scaffold_hits: usize,
    /// 0 when nothing was scored.
    pub max_combo: f64,
}

/// Hits, unique-scaffold hits and max combo over `candidates`, skipping
/// any candidate whose SMILES equals `query_smiles`.
pub fn query_metrics(query_smiles: &str, candidates: &[Candidate]) -> QueryMetrics {
    let mut scaffolds = BTreeSet::new();
    let (mut scored, mut hits, mut max) = (0, 0, 0.0f64);
    for c in candidates.iter().filter(|c| c.smiles != query_smiles) {
        let Some(combo) = c.combo else { continue };
        scored += 1;
        max = max.max(combo);
        if is_hit(combo) {
            hits += 1;
            let scaffold = parse_smiles(&c.smiles).map_or_else(|_| c.smiles.clone(), |m| murcko_scaffold(&m));
            scaffolds.insert(scaffold);
        }
    }
    QueryMetrics { scored, hits, unique_scaffold_hits: scaffolds.len(), max_combo: max }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary { median: 0.0, mean: 0.0, sd: 0.0 };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 { 0.0 } else { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Summary { median, mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeNovoRow {
    pub query: String,
    pub smiles: String,
    pub candidates: usize,
    pub scored: usize,
    pub hits: usize,
    pub unique_scaffold_hits: usize,
    pub max_combo: f64,
    pub hit: bool,
    pub raw_draws: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeNovoReport {
    pub rows: Vec<DeNovoRow>,
    pub hits: Summary,
    pub unique_scaffold_hits: Summary,
    pub max_combo: Summary,
    pub queries_with_hit: usize,
}

impl DeNovoReport {
    pub fn from_rows(rows: Vec<DeNovoRow>) -> Self {
        let col = |f: fn(&DeNovoRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        DeNovoReport {
            hits: Summary::of(&col(|r| r.hits as f64)),
            unique_scaffold_hits: Summary::of(&col(|r| r.unique_scaffold_hits as f64)),
            max_combo: Summary::of(&col(|r| r.max_combo)),
            queries_with_hit: rows.iter().filter(|r| r.hits >= 1).count(),
            rows,
        }
    }

    /// Checks the report's structural invariants; returns the first
    /// violation.
    pub fn check(&self) -> Result<(), String> {
        for r in &self.rows {
            if r.unique_scaffold_hits > r.hits || r.hits > r.scored || r.scored > r.candidates {
                return Err(format!("inconsistent counts for query {}", r.query));
            }
            if !(0.0..=2.0).contains(&r.max_combo) {
                return Err(format!("max combo {} out of range for query {}", r.max_combo, r.query));
            }
            if r.hit != (r.hits >= 1) {
                return Err(format!("hit flag mismatch for query {}", r.query));
            }
        }
        if self.queries_with_hit != self.rows.iter().filter(|r| r.hits >= 1).count() {
            return Err("queries-with-hit count disagrees with rows".into());
        }
        if *self != Self::from_rows(self.rows.clone()) {
            return Err("aggregates are not recomputable from rows".into());
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("query,smiles,candidates,scored,hits,unique_scaffold_hits,max_combo,hit,raw_draws,exhausted\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{:.6},{},{},{}\n",
                csv_field(&r.query),
                csv_field(&r.smiles),
                r.candidates,
                r.scored,
                r.hits,
                r.unique_scaffold_hits,
                r.max_combo,
                r.hit,
                r.raw_draws,
                r.exhausted
            ));
        }
        s
    }
}

/// Quotes a CSV field when it contains a separator or quote.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Embeds each SMILES and scores its conformers against `query`. Molecules
/// that fail embedding or perception stay unscored.
pub fn score_smiles(query: &Molecule, smiles: &[String], conformers: usize, seed: u64) -> Result<Vec<Candidate>, WorkflowError> {
    let opts = EmbedOptions::default();
    let confs: Vec<Vec<Molecule>> = smiles
        .iter()
        .map(|s| {
            parse_smiles(s)
                .and_then(|m| embed_conformers(&m, conformers, seed, &opts))
                .ok()
                .filter(|c| c.iter().all(|c| perceive::<f64>(c).is_ok()))
                .unwrap_or_default()
        })
        .collect();
    let best = best_tc(query, &confs)?;
    Ok(smiles
        .iter()
        .zip(best)
        .map(|(s, b)| Candidate { smiles: s.clone(), combo: b.map(|b| b.score.combo) })
        .collect())
}

fn query_seed(seed: u64, i: usize) -> u64 {
    crate::similarity::hash_sequence(seed, [i as u64])
}

fn row(q: &Query, smiles: String, candidates: usize, m: QueryMetrics, raw_draws: usize, exhausted: bool) -> DeNovoRow {
    DeNovoRow {
        query: q.id.clone(),
        smiles,
        candidates,
        scored: m.scored,
        hits: m.hits,
        unique_scaffold_hits: m.unique_scaffold_hits,
        max_combo: m.max_combo,
        hit: m.hits >= 1,
        raw_draws,
        exhausted,
    }
}

/// Generates up to `budget` unique valid molecules per query from its grid
/// and scores them against the query.
pub fn run_denovo<T: Real>(
    model: &CaptionerModel<T>,
    queries: &[Query],
    budget: usize,
    cfg: &GenerationConfig,
) -> Result<DeNovoReport, WorkflowError> {
    if budget == 0 {
        return Err(WorkflowError::Invalid("budget must be at least 1".into()));
    }
    let spec: GridSpec = model.config().grid;
    let mut rows = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        let smiles = q.smiles();
        let grid = voxelize(&perceive::<T>(&q.conformer)?, &spec)?;
        let latent = model.encode(&grid)?;
        let seed = query_seed(cfg.seed, i);
        let pool = generate_pool(model, &latent, budget, &smiles, cfg, seed)?;
        let picked: Vec<String> = pool.molecules.into_iter().map(|(s, _)| s).collect();
        let cands = score_smiles(&q.conformer, &picked, cfg.conformers, seed)?;
        let metrics = query_metrics(&smiles, &cands);
        rows.push(row(q, smiles, cands.len(), metrics, pool.raw_draws, pool.exhausted));
    }
    Ok(DeNovoReport::from_rows(rows))
}

/// A library molecule with its stored conformers.
#[derive(Debug, Clone)]
pub struct LibraryMolecule {
    pub smiles: String,
    pub conformers: Vec<Molecule>,
}

/// Scores `per_query_sample` uniformly drawn library molecules per query,
/// clamped to the library size. The query's own entry is never drawn.
pub fn run_baseline(
    queries: &[Query],
    library: &[LibraryMolecule],
    per_query_sample: usize,
    seed: u64,
) -> Result<DeNovoReport, WorkflowError> {
    let mut rows = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        let smiles = q.smiles();
        let pool: Vec<&LibraryMolecule> = library.iter().filter(|l| l.smiles != smiles).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(query_seed(seed, i));
        let mut picks = index::sample(&mut rng, pool.len(), per_query_sample.min(pool.len())).into_vec();
        picks.sort_unstable();
        let confs: Vec<Vec<Molecule>> = picks.iter().map(|&k| pool[k].conformers.clone()).collect();
        let best = best_tc(&q.conformer, &confs)?;
        let cands: Vec<Candidate> = picks
            .iter()
            .zip(best)
            .map(|(&k, b)| Candidate { smiles: pool[k].smiles.clone(), combo: b.map(|b| b.score.combo) })
            .collect();
        let metrics = query_metrics(&smiles, &cands);
        rows.push(row(q, smiles, cands.len(), metrics, 0, false));
    }
    Ok(DeNovoReport::from_rows(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastSearchRow {
    pub query: String,
    pub smiles: String,
    pub n_g_requested: usize,
    /// Unique valid generated molecules realized.
    pub n_g: usize,
    pub n_a: usize,
    /// Analog mappings before dedup.
    pub analog_mappings: usize,
    pub unique_analogs: usize,
    /// Mean stored conformers per scored analog.
    pub alpha: f64,
    /// Executed conformer scorings.
    pub comparisons: usize,
    /// Mappings per unique analog; ≥ 1 whenever any analog was found.
    pub duplicate_analog_rate: f64,
    pub hits: usize,
    pub unique_scaffold_hits: usize,
    pub max_combo: f64,
    pub raw_draws: usize,
    pub exhausted: bool,
}

/// One generated-molecule/analog pair for the 2D-vs-3D correlation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationPair {
    pub query: String,
    pub generated: String,
    pub analog_id: u64,
    pub sim2d: f64,
    pub combo3d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastSearchOutcome {
    pub row: FastSearchRow,
    /// Top-1 analog similarity of every generated molecule.
    pub top1_sim2d: Vec<f64>,
    pub pairs: Vec<CorrelationPair>,
}

/// Maps each generated molecule to its `n_a` nearest library analogs,
/// scores the union of analogs once each, and reports the accounting.
pub fn search_analogs(
    query: &Query,
    generated: &[String],
    index: &LibraryIndex,
    store: &ConformerStore,
    n_a: usize,
) -> Result<(FastSearchRow, Vec<f64>, Vec<CorrelationPair>), WorkflowError> {
    let smiles = query.smiles();
    let mut mapping: Vec<(String, Vec<(u64, f64)>)> = Vec::with_capacity(generated.len());
    for g in generated {
        let m = parse_smiles(g)?;
        mapping.push((g.clone(), index.top_k_analogs(&m, n_a)?));
    }
    let unique: BTreeSet<u64> = mapping.iter().flat_map(|(_, a)| a.iter().map(|&(id, _)| id)).collect();
    let ids: Vec<u64> = unique.iter().copied().collect();
    let confs: Vec<Vec<Molecule>> = ids.iter().map(|&id| store.conformers(id)).collect::<Result<_, _>>()?;
    let best = best_tc(&query.conformer, &confs)?;
    let comparisons: usize = best.iter().flatten().map(|b| b.comparisons).sum();
    let combos: BTreeMap<u64, Option<f64>> = ids.iter().copied().zip(best.iter().map(|b| b.map(|b| b.score.combo))).collect();
    let cands: Vec<Candidate> = ids
        .iter()
        .map(|id| Candidate {
            smiles: index.get(*id).map(|e| e.smiles.clone()).unwrap_or_default(),
            combo: combos[id],
        })
        .collect();
    let metrics = query_metrics(&smiles, &cands);
    let mappings: usize = mapping.iter().map(|(_, a)| a.len()).sum();
    let scored_ids = best.iter().filter(|b| b.is_some()).count();
    let top1 = mapping.iter().filter_map(|(_, a)| a.first().map(|&(_, s)| s)).collect();
    let pairs = mapping
        .iter()
        .flat_map(|(g, a)| {
            a.iter().filter_map(|&(id, s)| {
                combos[&id].map(|c| CorrelationPair {
                    query: query.id.clone(),
                    generated: g.clone(),
                    analog_id: id,
                    sim2d: s,
                    combo3d: c,
                })
            })
        })
        .collect();
    let row = FastSearchRow {
        query: query.id.clone(),
        smiles,
        n_g_requested: generated.len(),
        n_g: generated.len(),
        n_a,
        analog_mappings: mappings,
        unique_analogs: ids.len(),
        alpha: if scored_ids == 0 { 0.0 } else { comparisons as f64 / scored_ids as f64 },
        comparisons,
        duplicate_analog_rate: if ids.is_empty() { 0.0 } else { mappings as f64 / ids.len() as f64 },
        hits: metrics.hits,
        unique_scaffold_hits: metrics.unique_scaffold_hits,
        max_combo: metrics.max_combo,
        raw_draws: 0,
        exhausted: false,
    };
    Ok((row, top1, pairs))
}

/// Generator-guided search: sample `n_g` unique molecules from the query's
/// grid, then search their analogs.
pub fn run_fast_search<T: Real>(
    model: &CaptionerModel<T>,
    query: &Query,
    index: &LibraryIndex,
    store: &ConformerStore,
    n_g: usize,
    n_a: usize,
    cfg: &GenerationConfig,
) -> Result<FastSearchOutcome, WorkflowError> {
    if n_g == 0 || n_a == 0 {
        return Err(WorkflowError::Invalid("n_g and n_a must be positive".into()));
    }
    let grid = voxelize(&perceive::<T>(&query.conformer)?, &model.config().grid)?;
    let latent = model.encode(&grid)?;
    let pool = generate_pool(model, &latent, n_g, &query.smiles(), cfg, cfg.seed)?;
    let generated: Vec<String> = pool.molecules.into_iter().map(|(s, _)| s).collect();
    let (mut row, top1_sim2d, pairs) = search_analogs(query, &generated, index, store, n_a)?;
    row.n_g_requested = n_g;
    row.raw_draws = pool.raw_draws;
    row.exhausted = pool.exhausted;
    Ok(FastSearchOutcome { row, top1_sim2d, pairs })
}

/// Scores every index entry against the query, bypassing the generator.
pub fn run_brute_force(query: &Query, index: &LibraryIndex, store: &ConformerStore) -> Result<FastSearchRow, WorkflowError> {
    let smiles = query.smiles();
    let ids: Vec<u64> = index.entries().iter().map(|e| e.id).collect();
    let confs: Vec<Vec<Molecule>> = ids.iter().map(|&id| store.conformers(id)).collect::<Result<_, _>>()?;
    let best = best_tc(&query.conformer, &confs)?;
    let comparisons: usize = best.iter().flatten().map(|b| b.comparisons).sum();
    let scored = best.iter().filter(|b| b.is_some()).count();
    let cands: Vec<Candidate> = index
        .entries()
        .iter()
        .zip(&best)
        .map(|(e, b)| Candidate { smiles: e.smiles.clone(), combo: b.map(|b| b.score.combo) })
        .collect();
    let m = query_metrics(&smiles, &cands);
    Ok(FastSearchRow {
        query: query.id.clone(),
        smiles,
        n_g_requested: 0,
        n_g: 0,
        n_a: 0,
        analog_mappings: ids.len(),
        unique_analogs: ids.len(),
        alpha: if scored == 0 { 0.0 } else { comparisons as f64 / scored as f64 },
        comparisons,
        duplicate_analog_rate: 1.0,
        hits: m.hits,
        unique_scaffold_hits: m.unique_scaffold_hits,
        max_combo: m.max_combo,
        raw_draws: 0,
        exhausted: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastSearchReport {
    pub rows: Vec<FastSearchRow>,
    pub top1_sim2d: Vec<f64>,
    pub top1_sim2d_summary: Summary,
    pub pairs: Vec<CorrelationPair>,
    /// Pearson correlation of `(sim2d, combo3d)` over all pairs.
    pub pearson_r: Option<f64>,
    pub total_comparisons: usize,
}

impl FastSearchReport {
    pub fn from_outcomes(outcomes: Vec<FastSearchOutcome>) -> Self {
        let mut rows = Vec::new();
        let mut top1 = Vec::new();
        let mut pairs = Vec::new();
        for o in outcomes {
            rows.push(o.row);
            top1.extend(o.top1_sim2d);
            pairs.extend(o.pairs);
        }
        let xs: Vec<f64> = pairs.iter().map(|p| p.sim2d).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.combo3d).collect();
        FastSearchReport {
            total_comparisons: rows.iter().map(|r| r.comparisons).sum(),
            top1_sim2d_summary: Summary::of(&top1),
            top1_sim2d: top1,
            pearson_r: pearson(&xs, &ys),
            rows,
            pairs,
        }
    }

    pub fn rows_csv(&self) -> String {
        let mut s = String::from(
            "query,smiles,n_g_requested,n_g,n_a,analog_mappings,unique_analogs,alpha,comparisons,duplicate_analog_rate,hits,unique_scaffold_hits,max_combo,raw_draws,exhausted\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6},{},{:.6},{},{},{:.6},{},{}\n",
                csv_field(&r.query),
                csv_field(&r.smiles),
                r.n_g_requested,
                r.n_g,
                r.n_a,
                r.analog_mappings,
                r.unique_analogs,
                r.alpha,
                r.comparisons,
                r.duplicate_analog_rate,
                r.hits,
                r.unique_scaffold_hits,
                r.max_combo,
                r.raw_draws,
                r.exhausted
            ));
        }
        s
    }

    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("query,generated_id,analog_id,sim2d,combo3d\n");
        for p in &self.pairs {
            s.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                csv_field(&p.query),
                csv_field(&p.generated),
                p.analog_id,
                p.sim2d,
                p.combo3d
            ));
        }
        s
    }
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Index of the largest total; ties go to the earliest entry.
pub fn select_best(totals: &[usize]) -> Option<usize> {
    totals.iter().enumerate().fold(None, |best: Option<(usize, usize)>, (i, &t)| match best {
        Some((_, bt)) if bt >= t => best,
        _ => Some((i, t)),
    })
    .map(|(i, _)| i)
}

/// Total unique-scaffold hits of each of `count` checkpoints over the
/// validation queries with `samples` generated molecules per query, and
/// the index of the winner. `load` is called once per checkpoint so only
/// one model is held at a time.
pub fn select_checkpoint<T: Real, F>(
    count: usize,
    mut load: F,
    validation: &[Query],
    samples: usize,
    cfg: &GenerationConfig,
) -> Result<(usize, Vec<usize>), WorkflowError>
where
    F: FnMut(usize) -> Result<CaptionerModel<T>, WorkflowError>,
{
    if count == 0 {
        return Err(WorkflowError::Invalid("no checkpoints".into()));
    }
    let mut totals = Vec::with_capacity(count);
    for i in 0..count {
        let m = load(i)?;
        let r = run_denovo(&m, validation, samples, cfg)?;
        totals.push(r.rows.iter().map(|r| r.unique_scaffold_hits).sum());
    }
    Ok((select_best(&totals).expect("non-empty"), totals))
}

/// Seeded split into train/validation/test by unique canonical SMILES.
/// Sizes are `round(f·n)` for the first two parts and the remainder for
/// the third, where `n` counts unique molecules.
pub fn split_dataset(
    smiles: &[String],
    fractions: [f64; 3],
    seed: u64,
) -> Result<(Vec<String>, Vec<String>, Vec<String>), WorkflowError> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(WorkflowError::Invalid(format!("fractions {fractions:?} must be in [0,1] and sum to 1")));
    }
    let mut unique = BTreeSet::new();
    for s in smiles {
        unique.insert(write_canonical_smiles(&parse_smiles(s)?));
    }
    let mut all: Vec<String> = unique.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    let n = all.len();
    let a = ((fractions[0] * n as f64).round() as usize).min(n);
    let b = ((fractions[1] * n as f64).round() as usize).min(n - a);
    let test = all.split_off(a + b);
    let val = all.split_off(a);
    Ok((all, val, test))
}

/// 2D similarity of two SMILES under the default fingerprint.
pub fn similarity_2d(a: &str, b: &str) -> Result<f64, WorkflowError> {
    let fa = default_fingerprint(&parse_smiles(a)?);
    let fb = default_fingerprint(&parse_smiles(b)?);
    Ok(tanimoto(&fa, &fb)?)
}

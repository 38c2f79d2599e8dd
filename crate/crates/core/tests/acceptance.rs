//! Acceptance suite: one PASS/FAIL line per criterion at its stated
//! tolerance. Runs single-threaded; the two training criteria take minutes.

mod support;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use phvox::chem::{
    build_vocabulary, detokenize, embed_3d, embed_conformers, parse_smiles, tokenize, write_canonical_smiles,
    EmbedOptions, Molecule, BOS,
};
use phvox::nn::{
    entropy, gradient_check, prepare_examples, sample_ids, sampling_distribution, train, CaptionerConfig,
    SamplerConfig, TrainConfig,
};
use phvox::overlap::{alignment_count, score_profiles, tanimoto_combo};
use phvox::pharmacophore::{perceive, Channel, PharmacophoreProfile};
use phvox::similarity::{default_fingerprint, ConformerStore, Fingerprint, LibraryIndex};
use phvox::toy::{toy_library, MEMORIZATION_FIXTURE};
use phvox::voxel::{voxelize, voxelize_at, GridSpec, KERNEL_WIDTH};
use phvox::workflows::{
    query_metrics, run_baseline, run_denovo, run_fast_search, search_analogs, select_checkpoint, split_dataset,
    Candidate, FastSearchReport, GenerationConfig, LibraryMolecule, Query, WorkflowError,
};
use phvox::{Model, Model64, Transform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{grid_search_combo, jittered_copy, random_three_point};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1 and 2

/// Untruncated occupancy of one voxel.
fn brute_voxel(points: &[[f64; 3]], at: [f64; 3], radius: f64) -> f64 {
    let w2 = (KERNEL_WIDTH * radius).powi(2);
    let mut keep = 1.0;
    for p in points {
        let d2: f64 = (0..3).map(|k| (p[k] - at[k]).powi(2)).sum();
        keep *= 1.0 - (-d2 / w2).exp();
    }
    1.0 - keep
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let spec = GridSpec { d: 16, resolution: 0.5, radius: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut p = PharmacophoreProfile::<f64>::empty();
        for c in Channel::ALL {
            let n = rng.gen_range(0..=20);
            for _ in 0..n {
                p.push(c, [0; 3].map(|_| rng.gen_range(-3.5..3.5))).map_err(err)?;
            }
        }
        let center = [0.0; 3];
        let g = voxelize_at(&p, &spec, center).map_err(err)?;
        for c in Channel::ALL {
            for z in 0..spec.d {
                for y in 0..spec.d {
                    for x in 0..spec.d {
                        let at = g.voxel_center(x, y, z);
                        let e = (g.get(c, x, y, z) - brute_voxel(p.channel(c), at, spec.radius)).abs();
                        worst = worst.max(e);
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-6, format!("max abs error {worst:.3e} > 1e-6"))?;
    ensure(secs < 10.0, format!("runtime {secs:.1}s >= 10s"))?;
    Ok(format!("max abs error {worst:.2e} over 100 profiles, {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let spec = GridSpec { d: 16, resolution: KERNEL_WIDTH, radius: 1.0 };
    let center = [0.25, -0.5, 1.0];
    let probe = voxelize_at(&PharmacophoreProfile::<f64>::empty(), &spec, center).map_err(err)?;
    let at = probe.voxel_center(7, 8, 9);
    let mut p = PharmacophoreProfile::<f64>::empty();
    p.push(Channel::Donor, at).map_err(err)?;
    let g = voxelize_at(&p, &spec, center).map_err(err)?;
    let on = g.get(Channel::Donor, 7, 8, 9);
    let next = g.get(Channel::Donor, 8, 8, 9);
    let want = (-1.0f64).exp();
    ensure(on == 1.0, format!("voxel at the point = {on}, expected exactly 1"))?;
    ensure((next - want).abs() <= 1e-9, format!("voxel 0.93 Å away = {next}, expected e^-1"))?;
    Ok(format!("center 1.0 exactly; 0.93 Å neighbour error {:.1e}", (next - want).abs()))
}

// ---------------------------------------------------------------- 3 and 4

fn random_rotation<R: Rng>(rng: &mut R) -> Transform {
    let axis = [0; 3].map(|_| rng.gen_range(-1.0..1.0f64));
    let q = phvox::geometry::Quaternion::from_rotation_vector(axis.map(|a| a * 2.5));
    Transform::new(q, [0; 3].map(|_| rng.gen_range(-4.0..4.0)))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let lib = toy_library(50, 303, 12, 30);
    let mols: Vec<Molecule> = lib
        .iter()
        .map(|s| embed_3d(&parse_smiles(s).map_err(err)?, 7).map_err(err))
        .collect::<Result<_, _>>()?;
    let mut worst_self = f64::MAX;
    for m in &mols {
        worst_self = worst_self.min(tanimoto_combo(m, m).map_err(err)?.combo);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_shift = 0.0f64;
    for pair in 0..10 {
        let a = perceive::<f64>(&mols[2 * pair]).map_err(err)?;
        let b = perceive::<f64>(&mols[2 * pair + 1]).map_err(err)?;
        let base = score_profiles(&a, &b).map_err(err)?.combo;
        for _ in 0..20 {
            let moved = b.transformed(&random_rotation(&mut rng));
            let s = score_profiles(&a, &moved).map_err(err)?.combo;
            worst_shift = worst_shift.max((s - base).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst_self >= 1.997, format!("min self combo {worst_self:.4} < 1.997"))?;
    ensure(worst_shift <= 1e-2, format!("max rigid-motion change {worst_shift:.4} > 1e-2"))?;
    ensure(secs < 300.0, format!("runtime {secs:.0}s >= 300s"))?;
    Ok(format!(
        "min self combo {worst_self:.5} (50 molecules); max |ΔTC| {worst_shift:.2e} (10 pairs × 20 motions); {secs:.1}s"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let q = random_three_point(&mut rng);
        let c = jittered_copy(&q, 0.4, &mut rng);
        let opt = score_profiles(&q, &c).map_err(err)?.combo;
        let grid = grid_search_combo(&q, &c, 5.0, 0.5, 0.1);
        worst = worst.max((opt - grid).abs());
    }
    ensure(worst <= 1e-2, format!("max |optimized − grid| {worst:.4} > 1e-2"))?;
    Ok(format!("max |optimized − grid search| {worst:.4} over 20 profiles"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let corpus = ["CCO", "c1ccncc1", "CC(=O)N"];
    let vocab = build_vocabulary(&corpus);
    let model = Model64::new(CaptionerConfig::tiny(), vocab.clone(), 5).map_err(err)?;
    ensure(model.parameter_count() <= 5000, format!("{} parameters", model.parameter_count()))?;
    let mut grids = Vec::new();
    let mut seqs = Vec::new();
    for s in corpus {
        let m = embed_3d(&parse_smiles(s).map_err(err)?, 5).map_err(err)?;
        grids.push(voxelize(&perceive::<f64>(&m).map_err(err)?, &model.config().grid).map_err(err)?);
        seqs.push(tokenize(&write_canonical_smiles(&m), &vocab).ids);
    }
    let r = gradient_check(&model, &grids, &seqs, 1e-4, 200, 5).map_err(err)?;
    ensure(r.max_relative_error < 1e-4, format!("max relative error {:.3e}", r.max_relative_error))?;
    Ok(format!(
        "max relative error {:.2e} over {} of {} parameters",
        r.max_relative_error,
        r.checked,
        model.parameter_count()
    ))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mols: Vec<Molecule> = MEMORIZATION_FIXTURE
        .iter()
        .map(|s| embed_3d(&parse_smiles(s).map_err(err)?, 1).map_err(err))
        .collect::<Result<_, _>>()?;
    let canon: Vec<String> = mols.iter().map(write_canonical_smiles).collect();
    let vocab = build_vocabulary(&canon);
    let cfg = CaptionerConfig::default();
    ensure(cfg.grid == GridSpec { d: 32, resolution: 0.5, radius: 1.0 }, "reference grid is not 32³ @ 0.5 Å")?;
    let (examples, skipped) = prepare_examples::<f32>(&mols, &vocab, &cfg.grid);
    ensure(skipped.is_empty(), format!("fixture molecules skipped: {skipped:?}"))?;
    let mut model = Model::new(cfg, vocab, 1).map_err(err)?;
    let tcfg = TrainConfig { epochs: 300, augment: false, seed: 1, ..Default::default() };
    let history = train(&mut model, &examples, &[], &tcfg, |_, _| Ok(())).map_err(err)?;
    let train_secs = start.elapsed().as_secs_f64();
    let first = history.epochs.iter().find(|e| e.train_accuracy > 0.95).map(|e| e.epoch);
    let last = history.epochs.last().map_or(0.0, |e| e.train_accuracy);
    ensure(first.is_some(), format!("accuracy never exceeded 95% (final {last:.4})"))?;
    ensure(train_secs < 1800.0, format!("training took {train_secs:.0}s"))?;

    let greedy = SamplerConfig { top_k: Some(1), ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut latents = Vec::new();
    let mut reproduced = 0;
    for e in &examples {
        let latent = model.encode(&e.grid).map_err(err)?;
        let ids = sample_ids(&model, &latent, &greedy, 1, &mut rng).map_err(err)?;
        reproduced += usize::from(detokenize(&ids[0], model.vocabulary()) == e.smiles);
        latents.push(latent);
    }
    let frac = reproduced as f64 / examples.len() as f64;
    ensure(frac >= 0.6, format!("greedy reproduction {reproduced}/{}", examples.len()))?;

    // Conditioning sensitivity over five disjoint pairs.
    let tau1 = SamplerConfig::default();
    let mut pairs = Vec::new();
    for i in 0..5 {
        let (a, b) = (i, i + 25);
        let count = |latent: &[f32], rng: &mut ChaCha8Rng| -> Result<usize, String> {
            let draws = sample_ids(&model, latent, &tau1, 200, rng).map_err(err)?;
            Ok(draws.iter().filter(|ids| detokenize(ids, model.vocabulary()) == examples[a].smiles).count())
        };
        let own = count(&latents[a], &mut rng)?;
        let other = count(&latents[b], &mut rng)?;
        ensure(own > other, format!("{}: {own}/200 with its grid vs {other}/200 with another", examples[a].smiles))?;
        pairs.push(format!("{own}>{other}"));
    }
    Ok(format!(
        "accuracy > 95% at epoch {} (final {last:.4}, {train_secs:.0}s); greedy reproduces {reproduced}/50; A-vs-B counts {}",
        first.unwrap_or(0),
        pairs.join(" ")
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let corpus = ["CCO", "c1ccncc1", "CC(=O)N", "CS(=O)(=O)N", "C#N", "OC(=O)c1ccccc1Cl"];
    let vocab = build_vocabulary(&corpus);
    let cfg = CaptionerConfig {
        grid: GridSpec { d: 16, resolution: 1.0, radius: 1.0 },
        widths: vec![4],
        latent: 16,
        embedding: 8,
    };
    let mut model = Model::new(cfg, vocab, 7).map_err(err)?;
    // Spread the first-step logits so the frequency test has contrast.
    let out_bias = model.params().len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for b in model.params_mut()[out_bias].data.iter_mut() {
        *b = rng.gen_range(-1.5..1.5);
    }
    let latent: Vec<f32> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (logits, _) = model.decode_step(&model.initial_state(&latent), BOS, &latent).map_err(err)?;

    // Exact softmax over the unmasked tokens (PAD, BOS, UNK excluded).
    let masked = [0usize, 1, 3];
    let mx = logits.iter().enumerate().filter(|(i, _)| !masked.contains(i)).map(|(_, &v)| v as f64).fold(f64::MIN, f64::max);
    let mut exact: Vec<f64> =
        logits.iter().enumerate().map(|(i, &v)| if masked.contains(&i) { 0.0 } else { (v as f64 - mx).exp() }).collect();
    let z: f64 = exact.iter().sum();
    exact.iter_mut().for_each(|p| *p /= z);

    let n = 10_000;
    let one = SamplerConfig { max_length: 1, ..Default::default() };
    let draws = sample_ids(&model, &latent, &one, n, &mut rng).map_err(err)?;
    let mut counts = vec![0usize; logits.len()];
    for d in &draws {
        // An empty draw means EOS came first.
        let idx = d.first().map_or(2, |&t| t as usize - 1);
        counts[idx] += 1;
    }
    let mut worst_z = 0.0f64;
    for (c, &p) in counts.iter().zip(&exact) {
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        if sd == 0.0 {
            ensure(*c == 0, "masked token was drawn")?;
            continue;
        }
        worst_z = worst_z.max((*c as f64 - mean).abs() / sd);
    }
    ensure(worst_z <= 3.0, format!("largest deviation {worst_z:.2}σ"))?;

    let mut last = -1.0;
    let argmax = |p: &[f64]| p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).map(|x| x.0);
    let a1 = argmax(&sampling_distribution(&logits, 1.0, None));
    let mut hs = Vec::new();
    for tau in [1.0, 1.5, 2.0, 4.0] {
        let p = sampling_distribution(&logits, tau, None);
        let h = entropy(&p);
        ensure(h >= last, format!("entropy fell to {h} at τ={tau}"))?;
        ensure(argmax(&p) == a1, format!("argmax moved at τ={tau}"))?;
        last = h;
        hs.push(format!("{h:.3}"));
    }
    Ok(format!("max deviation {worst_z:.2}σ over {} tokens; entropy {}; argmax fixed", logits.len(), hs.join(" ≤ ")))
}

// ---------------------------------------------------------------- 8

fn brute_top_k(index: &LibraryIndex, q: &Fingerprint, exclude: &str, k: usize) -> Vec<(u64, f64)> {
    let qb: BTreeSet<usize> = q.ones().collect();
    let mut all: Vec<(u64, f64)> = index
        .entries()
        .iter()
        .filter(|e| e.smiles != exclude)
        .map(|e| {
            let eb: BTreeSet<usize> = e.fingerprint.ones().collect();
            let inter = qb.intersection(&eb).count();
            let union = qb.union(&eb).count();
            (e.id, if union == 0 { 0.0 } else { inter as f64 / union as f64 })
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn criterion_8() -> Outcome {
    let lib = toy_library(10_000, 8, 6, 34);
    ensure(lib.len() == 10_000, format!("toy library has only {} molecules", lib.len()))?;
    let keyed: Vec<(u64, Molecule)> = lib
        .iter()
        .enumerate()
        .map(|(i, s)| parse_smiles(s).map(|m| (i as u64, m)).map_err(err))
        .collect::<Result<_, _>>()?;
    let index = LibraryIndex::build(&keyed, 2048).map_err(err)?;
    let queries = toy_library(1000, 88, 6, 34);
    let mut in_index = 0;
    for s in &queries {
        let m = parse_smiles(s).map_err(err)?;
        let fast = index.top_k_analogs(&m, 10).map_err(err)?;
        let slow = brute_top_k(&index, &default_fingerprint(&m), s, 10);
        ensure(fast == slow, format!("top-10 mismatch for {s}"))?;
        in_index += usize::from(index.entries().iter().any(|e| &e.smiles == s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (_, m) in keyed.iter().take(300) {
        let mut perm: Vec<usize> = (0..m.atom_count()).collect();
        perm.shuffle(&mut rng);
        ensure(default_fingerprint(&m.permuted(&perm)) == default_fingerprint(m), "fingerprint depends on atom order")?;
    }
    Ok(format!("1000 queries ({in_index} present in the index) match the exhaustive scan; 300 permutations bit-identical"))
}

// ---------------------------------------------------------------- 10

fn criterion_10_hand() -> Result<String, String> {
    let query = "Cc1ccccc1O";
    let c = |s: &str, v: f64| Candidate { smiles: s.into(), combo: Some(v) };
    let m = query_metrics(
        query,
        &[c("CCc1ccccc1", 1.3), c("Oc1ccccc1", 1.3), c("Cc1ccncc1", 1.25), c("C1CCCCC1", 0.9), c(query, 2.0)],
    );
    ensure(
        (m.hits, m.unique_scaffold_hits, m.max_combo) == (3, 2, 1.3),
        format!("hits {} unique {} max {}", m.hits, m.unique_scaffold_hits, m.max_combo),
    )?;
    Ok("hand-built set gives hits=3, unique-scaffold hits=2, max=1.3".into())
}

// ---------------------------------------------------------------- 9 and 11

struct Campaign {
    elapsed: Duration,
    log: Vec<String>,
    invariant_failures: Vec<String>,
    fast: FastSearchReport,
    /// `(alignment counter delta, reported comparisons, Σ stored conformers)`
    /// per fast-search query.
    audits: Vec<(usize, usize, usize)>,
    reports_checked: usize,
}

fn embed_all(smiles: &[String], n: usize, seed: u64) -> Vec<Vec<Molecule>> {
    smiles
        .iter()
        .map(|s| {
            parse_smiles(s)
                .ok()
                .and_then(|m| embed_conformers(&m, n, seed, &EmbedOptions::default()).ok())
                .map(|v| v.into_iter().filter(|c| perceive::<f64>(c).is_ok()).collect())
                .unwrap_or_default()
        })
        .collect()
}

fn queries_from(smiles: &[String], confs: &[Vec<Molecule>], prefix: &str, n: usize) -> Vec<Query> {
    smiles
        .iter()
        .zip(confs)
        .filter(|(_, c)| !c.is_empty())
        .take(n)
        .enumerate()
        .map(|(i, (_, c))| Query { id: format!("{prefix}{i}"), conformer: c[0].clone() })
        .collect()
}

fn run_campaign() -> Result<Campaign, String> {
    let start = Instant::now();
    let mut log = Vec::new();
    let mut failures = Vec::new();
    let seed = 11;
    let lib = toy_library(500, seed, 8, 26);
    ensure(lib.len() == 500, "toy library is short")?;
    let (train_s, val_s, test_s) = split_dataset(&lib, [0.8, 0.1, 0.1], seed).map_err(err)?;

    // Training conformers and the searchable library (train ∪ validation).
    let train_confs = embed_all(&train_s, 1, seed);
    let val_confs = embed_all(&val_s, 3, seed);
    let test_confs = embed_all(&test_s, 3, seed);
    let searchable: Vec<String> = train_s.iter().chain(&val_s).cloned().collect();
    let store_confs = embed_all(&searchable, 3, seed);
    let keyed: Vec<(u64, Molecule)> =
        searchable.iter().enumerate().map(|(i, s)| (i as u64, parse_smiles(s).expect("library SMILES parse"))).collect();
    let index = LibraryIndex::build(&keyed, 2048).map_err(err)?;
    let items: Vec<(u64, Vec<Molecule>)> = store_confs.iter().cloned().enumerate().map(|(i, c)| (i as u64, c)).collect();
    let store = ConformerStore::from_sdf(ConformerStore::from_conformers(&items).map_err(err)?.as_sdf().to_string())
        .map_err(err)?;
    log.push(format!("split {}/{}/{}, index {} entries", train_s.len(), val_s.len(), test_s.len(), index.len()));

    let train_mols: Vec<Molecule> = train_confs.iter().filter_map(|c| c.first().cloned()).collect();
    let val_mols: Vec<Molecule> = val_confs.iter().filter_map(|c| c.first().cloned()).collect();
    let canon: Vec<String> = train_mols.iter().map(write_canonical_smiles).collect();
    let vocab = build_vocabulary(&canon);
    let cfg = CaptionerConfig::default();
    let (examples, skipped) = prepare_examples::<f32>(&train_mols, &vocab, &cfg.grid);
    let (validation, _) = prepare_examples::<f32>(&val_mols, &vocab, &cfg.grid);
    let mut model = Model::new(cfg, vocab, seed).map_err(err)?;
    let tcfg = TrainConfig { epochs: 30, seed, ..Default::default() };
    let mut snapshots: Vec<(usize, Model)> = Vec::new();
    let history = train(&mut model, &examples, &validation, &tcfg, |s, m| {
        if s.epoch % 5 == 0 {
            snapshots.push((s.epoch, m.clone()));
        }
        Ok(())
    })
    .map_err(err)?;
    let last = history.epochs.last().expect("epochs ran");
    log.push(format!(
        "trained {} examples ({} skipped), loss {:.2} → {:.2}, accuracy {:.3}, val loss {:.2}",
        examples.len(),
        skipped.len(),
        history.initial_loss,
        last.train_loss,
        last.train_accuracy,
        last.val_loss.unwrap_or(f64::NAN)
    ));

    let gen = GenerationConfig { seed, ..Default::default() };
    let val_queries = queries_from(&val_s, &val_confs, "val", 10);
    let (best, totals) = select_checkpoint(
        snapshots.len(),
        |i| Ok::<_, WorkflowError>(snapshots[i].1.clone()),
        &val_queries,
        100,
        &gen,
    )
    .map_err(err)?;
    let (best_epoch, model) = snapshots.swap_remove(best);
    log.push(format!("checkpoint totals {totals:?}, selected epoch {best_epoch}"));

    let queries = queries_from(&test_s, &test_confs, "test", 10);
    ensure(queries.len() == 10, "fewer than 10 embeddable test queries")?;
    let denovo = run_denovo(&model, &queries, 100, &gen).map_err(err)?;
    let baseline_lib: Vec<LibraryMolecule> = test_s
        .iter()
        .zip(&test_confs)
        .map(|(s, c)| LibraryMolecule { smiles: s.clone(), conformers: c.clone() })
        .collect();
    let baseline = run_baseline(&queries, &baseline_lib, 100, seed).map_err(err)?;
    let mut reports_checked = 0;
    for (name, r) in [("denovo", &denovo), ("baseline", &baseline)] {
        reports_checked += 1;
        if let Err(e) = r.check() {
            failures.push(format!("{name}: {e}"));
        }
        if r.rows.iter().any(|row| row.scored > 100) {
            failures.push(format!("{name}: more than the budget scored"));
        }
        log.push(format!(
            "{name}: median hits {:.1}, median unique-scaffold hits {:.1}, median max {:.3}, queries with a hit {}",
            r.hits.median, r.unique_scaffold_hits.median, r.max_combo.median, r.queries_with_hit
        ));
    }

    let mut outcomes = Vec::new();
    let mut audits = Vec::new();
    for q in &queries {
        let before = alignment_count();
        let o = run_fast_search(&model, q, &index, &store, 500, 1, &gen).map_err(err)?;
        let executed = alignment_count() - before;
        let ids: BTreeSet<u64> = o.pairs.iter().map(|p| p.analog_id).collect();
        let stored: usize = ids.iter().map(|&id| store.count(id)).sum();
        audits.push((executed, o.row.comparisons, stored));
        outcomes.push(o);
    }
    let fast = FastSearchReport::from_outcomes(outcomes);
    reports_checked += 1;
    for r in &fast.rows {
        if r.unique_analogs > 0 && r.duplicate_analog_rate < 1.0 {
            failures.push(format!("fastsearch {}: duplicate-analog rate {}", r.query, r.duplicate_analog_rate));
        }
        if r.hits < r.unique_scaffold_hits || !(0.0..=2.0).contains(&r.max_combo) {
            failures.push(format!("fastsearch {}: inconsistent metrics", r.query));
        }
    }
    // Monotonicity in n_a on the first query, with a fixed generated set.
    let generated: Vec<String> = fast.pairs.iter().filter(|p| p.query == queries[0].id).map(|p| p.generated.clone()).collect();
    let a1 = search_analogs(&queries[0], &generated, &index, &store, 1).map_err(err)?.0.analog_mappings;
    let a2 = search_analogs(&queries[0], &generated, &index, &store, 2).map_err(err)?.0.analog_mappings;
    if a2 < a1 {
        failures.push(format!("analog set shrank from {a1} to {a2} when n_a grew"));
    }
    log.push(format!(
        "fastsearch: realized n_g {:?}, comparisons {:?}, median top-1 2D similarity {:.3}, Pearson r {}",
        fast.rows.iter().map(|r| r.n_g).collect::<Vec<_>>(),
        fast.rows.iter().map(|r| r.comparisons).collect::<Vec<_>>(),
        fast.top1_sim2d_summary.median,
        fast.pearson_r.map_or("n/a".into(), |r| format!("{r:.3}"))
    ));
    Ok(Campaign { elapsed: start.elapsed(), log, invariant_failures: failures, fast, audits, reports_checked })
}

fn criterion_9(c: &Campaign) -> Outcome {
    for ((executed, reported, stored), r) in c.audits.iter().zip(&c.fast.rows) {
        ensure(executed == reported, format!("{}: {executed} alignments executed, {reported} reported", r.query))?;
        ensure(reported == stored, format!("{}: {reported} reported, store holds {stored}", r.query))?;
        let via_alpha = r.alpha * r.unique_analogs as f64;
        ensure((via_alpha - *reported as f64).abs() < 1e-6, format!("{}: α·unique = {via_alpha}", r.query))?;
        // Every generated molecule maps to n_a analogs, so α·n_g·n_a equals
        // the comparisons once duplicates are divided out.
        let via_ng = r.alpha * (r.n_g * r.n_a) as f64 / r.duplicate_analog_rate.max(1.0);
        ensure((via_ng - *reported as f64).abs() < 1e-6, format!("{}: α·n_g·n_a/dup = {via_ng}", r.query))?;
    }
    ensure(!c.fast.top1_sim2d.is_empty(), "no top-1 2D similarities emitted")?;
    let r = &c.fast.rows[0];
    Ok(format!(
        "counter = reported = Σ stored conformers on all 10 queries; query 0: n_g {} of 500, α {:.3}, comparisons {} = α·{}·{}/{:.3} (duplicate-analog rate); {} top-1 similarities, median {:.3}",
        r.n_g,
        r.alpha,
        r.comparisons,
        r.n_g,
        r.n_a,
        r.duplicate_analog_rate,
        c.fast.top1_sim2d.len(),
        c.fast.top1_sim2d_summary.median
    ))
}

fn criterion_10(c: &Campaign) -> Outcome {
    let hand = criterion_10_hand()?;
    ensure(c.invariant_failures.is_empty(), c.invariant_failures.join("; "))?;
    Ok(format!("{hand}; {} campaign reports consistent", c.reports_checked))
}

fn criterion_11(c: &Campaign) -> Outcome {
    ensure(c.invariant_failures.is_empty(), c.invariant_failures.join("; "))?;
    let mins = c.elapsed.as_secs_f64() / 60.0;
    ensure(mins < 60.0, format!("campaign took {mins:.1} min"))?;
    Ok(format!("toy campaign finished in {mins:.1} min; {}", c.log.join("; ")))
}

fn main() {
    // Single-threaded for the stated runtimes and bitwise reproducibility.
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().expect("thread pool");
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let mut failed = 0;
    let mut report = |n: usize, name: &str, started: Instant, outcome: Outcome| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{n:>2}] {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{n:>2}] {name} ({secs:.1}s): {why}");
            }
        }
    };
    let simple: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "voxelization oracle", criterion_1),
        (2, "analytic voxel values", criterion_2),
        (3, "overlap self-score and rigid invariance", criterion_3),
        (4, "alignment oracle", criterion_4),
        (5, "gradient check", criterion_5),
        (7, "sampler statistics", criterion_7),
        (8, "2D search exactness", criterion_8),
    ];
    for (n, name, f) in simple {
        if wanted(n) {
            let t = Instant::now();
            report(n, name, t, f());
        }
    }
    if wanted(6) {
        let t = Instant::now();
        report(6, "memorization fixture", t, criterion_6());
    }
    if wanted(9) || wanted(10) || wanted(11) {
        let t = Instant::now();
        match run_campaign() {
            Ok(c) => {
                if wanted(9) {
                    report(9, "fast-search accounting", t, criterion_9(&c));
                }
                if wanted(10) {
                    report(10, "metric definitions", t, criterion_10(&c));
                }
                if wanted(11) {
                    report(11, "end-to-end toy campaign", t, criterion_11(&c));
                }
            }
            Err(e) => {
                for (n, name) in [(9, "fast-search accounting"), (10, "metric definitions"), (11, "end-to-end toy campaign")] {
                    if wanted(n) {
                        report(n, name, t, Err(format!("campaign failed: {e}")));
                    }
                }
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use phvox::chem::{
    build_vocabulary, embed_3d, embed_conformers, parse_smiles, read_smiles_lines, split_tokens, tokenize,
    write_canonical_smiles, write_sdf_record, EmbedOptions, Molecule,
};
use phvox::nn::{
    gradient_check, prepare_examples, sample_ids, train, CaptionerConfig, NnError, SamplerConfig, TrainConfig,
};
use phvox::overlap::best_tc;
use phvox::pharmacophore::perceive;
use phvox::similarity::{ConformerStore, LibraryIndex, DEFAULT_NBITS};
use phvox::voxel::{voxelize, write_voxg, GridSpec};
use phvox::workflows::{
    csv_field, run_baseline, run_brute_force, run_denovo, run_fast_search, select_checkpoint, FastSearchReport,
    GenerationConfig, LibraryMolecule, WorkflowError,
};
use phvox::{Model, Model64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{need_path, pick, RunConfig};
use crate::io::{
    emit, input_error, json, read_bytes, read_queries, read_sdf_file, read_smiles_file, read_text, write_atomic,
    InputContext,
};
use crate::{Cli, Command, IndexCommand};

const DEFAULT_CONFORMERS: usize = 3;

/// Shared run state: resolved seed and the loaded config.
struct Ctx {
    seed: u64,
    threads: Option<usize>,
    config: RunConfig,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let ctx = Ctx { seed: pick(cli.seed, config.seed, 0), threads: cli.threads.or(config.threads), config };
    if let Some(n) = ctx.threads {
        if n == 0 {
            return Err(input_error("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Canon(a) => canon(&ctx, a.input.as_deref(), a.out.as_deref()),
        Command::Tokenize(a) => tokenize_cmd(&ctx, a),
        Command::Embed(a) => embed(&ctx, a),
        Command::Perceive(a) => perceive_cmd(&ctx, a),
        Command::Voxelize(a) => voxelize_cmd(&ctx, a),
        Command::Score(a) => score(a),
        Command::Index(IndexCommand::Build(a)) => index_build(&ctx, a),
        Command::Index(IndexCommand::Query(a)) => index_query(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Sample(a) => sample_cmd(&ctx, a),
        Command::Denovo(a) => denovo(&ctx, a),
        Command::Fastsearch(a) => fastsearch(&ctx, a),
        Command::Gradcheck(a) => gradcheck(&ctx, a),
    }
}

fn input_path(flag: &Option<PathBuf>, ctx: &Ctx) -> Option<PathBuf> {
    flag.clone().or_else(|| ctx.config.paths.input.clone())
}

fn canon(ctx: &Ctx, input: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let input = input.map(Path::to_path_buf).or_else(|| ctx.config.paths.input.clone());
    let text = read_text(input.as_deref())?;
    let mut s = String::new();
    for (i, r) in read_smiles_lines(&text).into_iter().enumerate() {
        let m = parse_smiles(&r.smiles).input(format!("record {i} ({})", r.smiles))?;
        s.push_str(&write_canonical_smiles(&m));
        if let Some(n) = r.name {
            let _ = write!(s, "\t{n}");
        }
        s.push('\n');
    }
    emit(out.or(ctx.config.paths.output.as_deref()), &s)
}

fn load_model(path: &Path) -> Result<Model> {
    let bytes = read_bytes(path)?;
    let (m, _) = Model::read_checkpoint(bytes.as_slice()).input(format!("checkpoint {}", path.display()))?;
    Ok(m)
}

fn tokenize_cmd(ctx: &Ctx, a: crate::TokenizeArgs) -> Result<()> {
    let text = read_text(input_path(&a.io.input, ctx).as_deref())?;
    let model = a.checkpoint.as_deref().or(ctx.config.paths.checkpoint.as_deref()).map(load_model).transpose()?;
    let mut s = String::new();
    for r in read_smiles_lines(&text) {
        let line = match &model {
            Some(m) => {
                let ids = tokenize(&r.smiles, m.vocabulary()).ids;
                ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
            }
            None => split_tokens(&r.smiles).into_iter().map(|(t, _)| t).collect::<Vec<_>>().join(" "),
        };
        s.push_str(&line);
        s.push('\n');
    }
    emit(a.io.out.as_deref().or(ctx.config.paths.output.as_deref()), &s)
}

fn embed(ctx: &Ctx, a: crate::EmbedArgs) -> Result<()> {
    let mols = read_smiles_file(input_path(&a.io.input, ctx).as_deref())?;
    let n = pick(a.conformers, ctx.config.conformers, 1);
    let mut out = String::new();
    for (name, m) in mols {
        let confs = embed_conformers(&m, n, ctx.seed, &EmbedOptions::default()).input(format!("embedding {name}"))?;
        for c in confs {
            out.push_str(&write_sdf_record(&c.with_name(name.clone()))?);
        }
    }
    emit(a.io.out.as_deref().or(ctx.config.paths.output.as_deref()), &out)
}

fn record_name(m: &Molecule, i: usize) -> String {
    m.name().filter(|n| !n.is_empty()).map_or_else(|| i.to_string(), str::to_string)
}

fn perceive_cmd(ctx: &Ctx, a: crate::IoArgs) -> Result<()> {
    let path = need_path(&a.input, &ctx.config.paths.input, "input")?;
    let mut items = Vec::new();
    for (i, m) in read_sdf_file(&path)?.iter().enumerate() {
        let p = perceive::<f64>(m).input(format!("record {i}"))?;
        let profile: serde_json::Value = serde_json::from_str(&p.to_json())?;
        items.push(json!({ "name": record_name(m, i), "profile": profile }));
    }
    emit(a.out.as_deref().or(ctx.config.paths.output.as_deref()), &json(&items)?)
}

fn grid_spec(ctx: &Ctx, preset: Option<&str>, d: Option<usize>, resolution: Option<f64>) -> Result<GridSpec> {
    let mut spec = match preset {
        Some(p) => GridSpec::preset(p).ok_or_else(|| input_error(format!("unknown grid preset '{p}'")))?,
        None => ctx.config.grid.unwrap_or_default(),
    };
    if let Some(d) = d {
        spec.d = d;
    }
    if let Some(r) = resolution {
        spec.resolution = r;
    }
    spec.validate().input("grid")?;
    Ok(spec)
}

fn voxelize_cmd(ctx: &Ctx, a: crate::VoxelizeArgs) -> Result<()> {
    let path = need_path(&a.input, &ctx.config.paths.input, "input")?;
    let out = need_path(&a.out, &ctx.config.paths.output, "output")?;
    let spec = grid_spec(ctx, a.preset.as_deref(), a.d, a.resolution)?;
    let mols = read_sdf_file(&path)?;
    for (i, m) in mols.iter().enumerate() {
        let p = perceive::<f32>(m).input(format!("record {i}"))?;
        let g = voxelize(&p, &spec).input(format!("record {i}"))?;
        let mut bytes = Vec::new();
        write_voxg(&g, &mut bytes)?;
        write_atomic(&out.join(format!("{}.voxg", record_name(m, i))), &bytes)?;
    }
    write_atomic(&out.join("config.json"), json(&json!({ "grid": spec, "input": path, "seed": ctx.seed }))?.as_bytes())
}

/// Groups consecutive records sharing a non-empty title.
fn group_conformers(mols: Vec<Molecule>) -> Vec<(String, Vec<Molecule>)> {
    let mut groups: Vec<(String, Vec<Molecule>)> = Vec::new();
    for (i, m) in mols.into_iter().enumerate() {
        let name = record_name(&m, i);
        match groups.last_mut() {
            Some((n, v)) if *n == name && m.name().is_some_and(|t| !t.is_empty()) => v.push(m),
            _ => groups.push((name, vec![m])),
        }
    }
    groups
}

fn score(a: crate::ScoreArgs) -> Result<()> {
    let query = read_sdf_file(&a.query)?
        .into_iter()
        .next()
        .ok_or_else(|| input_error(format!("{} holds no molecules", a.query.display())))?;
    let groups = group_conformers(read_sdf_file(&a.cands)?);
    let confs: Vec<Vec<Molecule>> = groups.iter().map(|(_, v)| v.clone()).collect();
    let best = best_tc(&query, &confs).input("scoring")?;
    let mut s = String::from("candidate,name,smiles,conformer,shape,color,combo,hit\n");
    for (i, ((name, v), b)) in groups.iter().zip(best).enumerate() {
        let b = b.expect("groups are non-empty");
        let _ = writeln!(
            s,
            "{i},{},{},{},{:.6},{:.6},{:.6},{}",
            csv_field(name),
            csv_field(&write_canonical_smiles(&v[0])),
            b.conformer,
            b.score.shape,
            b.score.color,
            b.score.combo,
            b.score.is_hit()
        );
    }
    emit(a.out.as_deref(), &s)
}

/// Embeds every molecule, keyed by position.
fn embed_library(mols: &[Molecule], conformers: usize, seed: u64) -> Vec<(u64, Vec<Molecule>)> {
    mols.iter()
        .enumerate()
        .map(|(i, m)| {
            let confs = embed_conformers(m, conformers, seed, &EmbedOptions::default())
                .map(|v| v.into_iter().filter(|c| perceive::<f64>(c).is_ok()).collect())
                .unwrap_or_default();
            (i as u64, confs)
        })
        .collect()
}

fn index_build(ctx: &Ctx, a: crate::IndexBuildArgs) -> Result<()> {
    let mols = read_smiles_file(input_path(&a.input, ctx).as_deref())?;
    let out = need_path(&a.out, &ctx.config.paths.index, "index")?;
    let nbits = pick(a.nbits, ctx.config.nbits, DEFAULT_NBITS);
    let keyed: Vec<(u64, Molecule)> = mols.iter().enumerate().map(|(i, (_, m))| (i as u64, m.clone())).collect();
    let index = LibraryIndex::build(&keyed, nbits).input("building the index")?;
    let mut bytes = Vec::new();
    index.write(&mut bytes)?;
    write_atomic(&out, &bytes)?;
    if let Some(store) = a.store.or_else(|| ctx.config.paths.store.clone()) {
        let n = pick(a.conformers, ctx.config.conformers, DEFAULT_CONFORMERS);
        let plain: Vec<Molecule> = keyed.into_iter().map(|(_, m)| m).collect();
        let items = embed_library(&plain, n, ctx.seed);
        let store_data = ConformerStore::from_conformers(&items)?;
        write_atomic(&store, store_data.as_sdf().as_bytes())?;
    }
    Ok(())
}

fn read_index(path: &Path) -> Result<LibraryIndex> {
    let bytes = read_bytes(path)?;
    LibraryIndex::read(bytes.as_slice()).input(format!("index {}", path.display()))
}

fn index_query(ctx: &Ctx, a: crate::IndexQueryArgs) -> Result<()> {
    let index = read_index(&need_path(&a.index, &ctx.config.paths.index, "index")?)?;
    let k = pick(a.k, ctx.config.k, 10);
    let queries: Vec<(String, Molecule)> = match a.smiles {
        Some(s) => vec![(s.clone(), parse_smiles(&s).input(format!("query {s}"))?)],
        None => read_smiles_file(input_path(&a.input, ctx).as_deref())?,
    };
    let mut s = String::from("query,rank,id,smiles,similarity\n");
    for (name, m) in &queries {
        for (rank, (id, sim)) in index.top_k_analogs(m, k)?.into_iter().enumerate() {
            let smiles = &index.get(id).expect("id from index").smiles;
            let _ = writeln!(s, "{},{},{id},{},{sim:.6}", csv_field(name), rank + 1, csv_field(smiles));
        }
    }
    emit(a.out.as_deref().or(ctx.config.paths.output.as_deref()), &s)
}

fn model_config(ctx: &Ctx, preset: Option<&str>) -> Result<CaptionerConfig> {
    let mut cfg = match preset {
        Some("reference") => CaptionerConfig::default(),
        Some("tiny") => CaptionerConfig::tiny(),
        Some(p) => return Err(input_error(format!("unknown model preset '{p}'"))),
        None => ctx.config.model.clone().unwrap_or_default(),
    };
    if let Some(g) = ctx.config.grid {
        cfg.grid = g;
    }
    cfg.validate().input("model config")?;
    Ok(cfg)
}

fn conformers_of(mols: &[(String, Molecule)], seed: u64) -> Vec<Molecule> {
    mols.iter().filter_map(|(_, m)| embed_3d(m, seed).ok()).collect()
}

fn train_cmd(ctx: &Ctx, a: crate::TrainArgs) -> Result<()> {
    let out = need_path(&a.out, &ctx.config.paths.output, "output")?;
    let train_mols = read_smiles_file(Some(&need_path(&a.input, &ctx.config.paths.input, "input")?))?;
    let val_path = a.validation.clone().or_else(|| ctx.config.paths.validation.clone());
    let val_mols = val_path.as_deref().map(|p| read_smiles_file(Some(p))).transpose()?.unwrap_or_default();
    let model_cfg = model_config(ctx, a.preset.as_deref())?;
    let base = ctx.config.train.clone().unwrap_or_default();
    let tcfg = TrainConfig {
        epochs: pick(a.epochs, None, base.epochs),
        batch_size: pick(a.batch_size, None, base.batch_size),
        learning_rate: pick(a.learning_rate, None, base.learning_rate),
        augment: base.augment && !a.no_augment,
        stop_at_accuracy: a.stop_at_accuracy.or(base.stop_at_accuracy),
        seed: ctx.seed,
        ..base
    };
    let train_confs = conformers_of(&train_mols, ctx.seed);
    let canon: Vec<String> = train_confs.iter().map(write_canonical_smiles).collect();
    let vocab = build_vocabulary(&canon);
    let (examples, skipped) = prepare_examples::<f32>(&train_confs, &vocab, &model_cfg.grid);
    let (validation, val_skipped) = prepare_examples::<f32>(&conformers_of(&val_mols, ctx.seed), &vocab, &model_cfg.grid);
    if examples.is_empty() {
        return Err(input_error("no usable training molecules"));
    }
    let mut model = Model::new(model_cfg.clone(), vocab, ctx.seed).input("model")?;
    let echo = json!({
        "model": model_cfg,
        "train": tcfg,
        "seed": ctx.seed,
        "input": train_mols.len(),
        "examples": examples.len(),
        "skipped": skipped.iter().chain(&val_skipped).map(|(_, r)| r).collect::<Vec<_>>(),
        "validation": validation.len(),
    });
    write_atomic(&out.join("config.json"), json(&echo)?.as_bytes())?;
    let mut written = Vec::new();
    let history = train(&mut model, &examples, &validation, &tcfg, |stats, m| {
        let path = out.join(format!("epoch-{:04}.vcpt", stats.epoch));
        let mut bytes = Vec::new();
        m.write_checkpoint(Some(stats.epoch), &mut bytes)?;
        write_atomic(&path, &bytes).map_err(|e| NnError::Checkpoint(format!("{e:#}")))?;
        eprintln!(
            "epoch {:>4}  loss {:.4}  accuracy {:.4}{}",
            stats.epoch,
            stats.train_loss,
            stats.train_accuracy,
            stats.val_loss.map_or(String::new(), |v| format!("  val loss {v:.4}"))
        );
        written.push(path);
        Ok(())
    })?;
    write_atomic(&out.join("history.json"), json(&history)?.as_bytes())?;
    if let Some(q) = a.select_queries.as_deref() {
        let queries: Vec<_> = read_queries(q)?.into_iter().take(10).collect();
        let samples = a.select_samples.unwrap_or(100);
        let gen = GenerationConfig { seed: ctx.seed, ..ctx.config.generation.clone().unwrap_or_default() };
        let (best, totals) = select_checkpoint(
            written.len(),
            |i| load_model(&written[i]).map_err(|e| WorkflowError::Invalid(format!("{e:#}"))),
            &queries,
            samples,
            &gen,
        )?;
        std::fs::copy(&written[best], out.join("best.vcpt"))?;
        let report = json!({ "selected_epoch": best + 1, "unique_scaffold_hit_totals": totals, "samples": samples });
        write_atomic(&out.join("selection.json"), json(&report)?.as_bytes())?;
    }
    Ok(())
}

fn sampler_config(ctx: &Ctx, a: &crate::SamplerArgs) -> SamplerConfig {
    let base = ctx.config.sampler.clone().unwrap_or_default();
    SamplerConfig {
        temperature: pick(a.temperature, None, base.temperature),
        top_k: a.top_k.or(base.top_k),
        max_length: pick(a.max_length, None, base.max_length),
        seed: ctx.seed,
    }
}

fn sample_cmd(ctx: &Ctx, a: crate::SampleArgs) -> Result<()> {
    let model = load_model(&need_path(&a.checkpoint, &ctx.config.paths.checkpoint, "checkpoint")?)?;
    let query = read_queries(&a.query)?.remove(0);
    let cfg = sampler_config(ctx, &a.sampler);
    cfg.validate(model.vocab_size()).input("sampler")?;
    let grid = voxelize(&perceive::<f32>(&query.conformer).input("query")?, &model.config().grid).input("query")?;
    let latent = model.encode(&grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut s = String::new();
    for ids in sample_ids(&model, &latent, &cfg, a.n.unwrap_or(1), &mut rng)? {
        s.push_str(&phvox::chem::detokenize(&ids, model.vocabulary()));
        s.push('\n');
    }
    emit(a.out.as_deref().or(ctx.config.paths.output.as_deref()), &s)
}

fn generation_config(ctx: &Ctx, conformers: Option<usize>) -> GenerationConfig {
    let base = ctx.config.generation.clone().unwrap_or_default();
    GenerationConfig { conformers: pick(conformers, ctx.config.conformers, base.conformers), seed: ctx.seed, ..base }
}

#[derive(Serialize)]
struct Echo<'a> {
    command: &'a str,
    seed: u64,
    threads: Option<usize>,
    config: serde_json::Value,
}

fn denovo(ctx: &Ctx, a: crate::DenovoArgs) -> Result<()> {
    let out = need_path(&a.out, &ctx.config.paths.output, "output")?;
    let model = load_model(&need_path(&a.checkpoint, &ctx.config.paths.checkpoint, "checkpoint")?)?;
    let queries = read_queries(&need_path(&a.queries, &ctx.config.paths.queries, "queries")?)?;
    let budget = pick(a.budget, ctx.config.budget, 100);
    let gen = generation_config(ctx, a.conformers);
    let report = run_denovo(&model, &queries, budget, &gen).input("de-novo run")?;
    report.check().map_err(anyhow::Error::msg)?;
    let mut doc = json!({ "denovo": report });
    write_atomic(&out.join("denovo.csv"), report.to_csv().as_bytes())?;
    let baseline_path = a.baseline.clone().or_else(|| ctx.config.paths.baseline.clone());
    let per_query = pick(a.baseline_sample, ctx.config.baseline_sample, budget);
    if let Some(p) = &baseline_path {
        let lib = read_smiles_file(Some(p))?;
        let plain: Vec<Molecule> = lib.iter().map(|(_, m)| m.clone()).collect();
        let library: Vec<LibraryMolecule> = embed_library(&plain, gen.conformers, ctx.seed)
            .into_iter()
            .map(|(i, confs)| LibraryMolecule { smiles: write_canonical_smiles(&plain[i as usize]), conformers: confs })
            .collect();
        let base = run_baseline(&queries, &library, per_query, ctx.seed)?;
        base.check().map_err(anyhow::Error::msg)?;
        write_atomic(&out.join("baseline.csv"), base.to_csv().as_bytes())?;
        doc["baseline"] = serde_json::to_value(&base)?;
    }
    doc["run"] = serde_json::to_value(Echo {
        command: "denovo",
        seed: ctx.seed,
        threads: ctx.threads,
        config: json!({
            "budget": budget,
            "generation": gen,
            "baseline": baseline_path,
            "baseline_sample": per_query,
            "queries": queries.len(),
        }),
    })?;
    write_atomic(&out.join("denovo.json"), json(&doc)?.as_bytes())?;
    write_atomic(&out.join("config.json"), json(&doc["run"])?.as_bytes())
}

fn fastsearch(ctx: &Ctx, a: crate::FastsearchArgs) -> Result<()> {
    let out = need_path(&a.out, &ctx.config.paths.output, "output")?;
    let queries = read_queries(&need_path(&a.queries, &ctx.config.paths.queries, "queries")?)?;
    let index = read_index(&need_path(&a.index, &ctx.config.paths.index, "index")?)?;
    let store_path = need_path(&a.store, &ctx.config.paths.store, "store")?;
    let store = ConformerStore::from_sdf(read_text(Some(&store_path))?).input(format!("store {}", store_path.display()))?;
    let gen = generation_config(ctx, None);
    let n_g = pick(a.n_g, ctx.config.n_g, 500);
    let n_a = pick(a.n_a, ctx.config.n_a, 1);
    let report = if a.brute_force {
        let rows = queries.iter().map(|q| run_brute_force(q, &index, &store)).collect::<Result<Vec<_>, _>>()?;
        FastSearchReport::from_outcomes(
            rows.into_iter().map(|row| phvox::workflows::FastSearchOutcome { row, top1_sim2d: vec![], pairs: vec![] }).collect(),
        )
    } else {
        let model = load_model(&need_path(&a.checkpoint, &ctx.config.paths.checkpoint, "checkpoint")?)?;
        let outcomes = queries
            .iter()
            .map(|q| run_fast_search(&model, q, &index, &store, n_g, n_a, &gen))
            .collect::<Result<Vec<_>, _>>()
            .input("fast search")?;
        FastSearchReport::from_outcomes(outcomes)
    };
    write_atomic(&out.join("fastsearch.csv"), report.rows_csv().as_bytes())?;
    write_atomic(&out.join("pairs.csv"), report.pairs_csv().as_bytes())?;
    let run = Echo {
        command: "fastsearch",
        seed: ctx.seed,
        threads: ctx.threads,
        config: json!({
            "n_g": n_g,
            "n_a": n_a,
            "brute_force": a.brute_force,
            "generation": gen,
            "index_entries": index.len(),
            "queries": queries.len(),
        }),
    };
    let doc = json!({ "report": report, "run": run });
    write_atomic(&out.join("fastsearch.json"), json(&doc)?.as_bytes())?;
    write_atomic(&out.join("config.json"), json(&doc["run"])?.as_bytes())
}

fn gradcheck(ctx: &Ctx, a: crate::GradcheckArgs) -> Result<()> {
    let corpus = ["CCO", "c1ccncc1", "CC(=O)N"];
    let vocab = build_vocabulary(&corpus);
    let model = Model64::new(CaptionerConfig::tiny(), vocab.clone(), ctx.seed)?;
    let mut grids = Vec::new();
    let mut seqs = Vec::new();
    for s in corpus {
        let m = embed_3d(&parse_smiles(s)?, ctx.seed)?;
        grids.push(voxelize(&perceive::<f64>(&m)?, &model.config().grid)?);
        seqs.push(tokenize(&write_canonical_smiles(&m), &vocab).ids);
    }
    let step = a.step.unwrap_or(1e-4);
    let subset = a.subset.unwrap_or(200);
    let report = gradient_check(&model, &grids, &seqs, step, subset, ctx.seed).input("gradient check")?;
    emit(
        a.out.as_deref(),
        &json(&json!({ "report": report, "parameters": model.parameter_count(), "seed": ctx.seed }))?,
    )
}

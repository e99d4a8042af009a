use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::info;
use taxo_induct::data::{
    gen_synthetic as generate, load_candidates, load_embeddings, load_paths, load_split, load_taxonomy_dir,
    normalize_surface, write_taxonomy, CandidateTable, DataError, Dataset, SplitName, SyntheticConfig, TaxonomyFile,
    DEFAULT_PATH_CAP,
};
use taxo_induct::encoder::{Model, PreparedTaxonomy, Resources};
use taxo_induct::env::{Mode, Restriction};
use taxo_induct::pairwise::{baseline_tree, train_pairwise, PairwiseConfig};
use taxo_induct::taxo::{
    evaluate as evaluate_tree, two_phase_baseline, BaselineConfig, MetricReport, Taxonomy, Term, TermId,
};
use taxo_induct::trainer::{
    build_model, draw_root, eval_rng, evaluate, induce, prepare_files, surface_tokens, train as run_training,
    Checkpoint,
};

use crate::config::RunConfig;
use crate::{BaselineArgs, CliError, EvalArgs, GenArgs, InductArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.tsv";

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn print_table(rows: &[(String, String, MetricReport)]) {
    println!("split\tinduction\tPa\tRa\tF1a\tPe\tRe\tF1e");
    for (split, label, r) in rows {
        let cells: Vec<String> = r.as_array().iter().map(|v| format!("{v:.4}")).collect();
        println!("{split}\t{label}\t{}", cells.join("\t"));
    }
}

fn resources(ds: &Dataset) -> Resources<'_> {
    Resources {
        embeddings: &ds.embeddings,
        paths: &ds.paths,
        candidates: &ds.candidates,
    }
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(m) = args.mode {
        cfg.train.mode = m;
    }
    if let Some(r) = args.restriction {
        cfg.train.restriction = r;
    }
    if let Some(o) = args.output_dir {
        cfg.output_dir = o;
    }
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    let res = resources(&ds);
    let train_files = ds.split_taxonomies(SplitName::Train);
    if train_files.is_empty() {
        return Err(CliError::Config("split: no training taxonomies".into()));
    }
    let tokens = surface_tokens(ds.taxonomies.iter());
    let model = build_model(&cfg.train.model, &res, &train_files, &tokens, cfg.train.seed)?;
    let train = prepare_files(&model, &train_files, &res)?;
    let validation = prepare_files(&model, &ds.split_taxonomies(SplitName::Validation), &res)?;
    let test = prepare_files(&model, &ds.split_taxonomies(SplitName::Test), &res)?;
    info!(
        "training on {} taxonomies ({} validation, {} test)",
        train.len(),
        validation.len(),
        test.len()
    );
    let report = run_training(&cfg.train, model, &train, &validation, &test)?;

    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_error(&cfg.output_dir, e))?;
    let log_path = cfg.output_dir.join(METRICS_FILE);
    fs::write(&log_path, report.log_tsv()).map_err(|e| io_error(&log_path, e))?;
    let echo = serde_json::to_value(&cfg).map_err(|e| CliError::Failed(e.to_string()))?;
    let ck_path = cfg.output_dir.join(CHECKPOINT_FILE);
    Checkpoint::new(report.best, cfg.train.clone(), echo).save(&ck_path)?;
    eprintln!(
        "best epoch {}; wrote {} and {}",
        report.best_epoch,
        ck_path.display(),
        log_path.display()
    );
    let rows: Vec<_> = report
        .log
        .iter()
        .filter(|r| r.split.starts_with("test"))
        .map(|r| {
            let (split, label) = r.split.split_once('-').unwrap_or((&r.split, "none"));
            (split.to_string(), label.to_string(), r.report)
        })
        .collect();
    print_table(&rows);
    Ok(())
}

/// Normalized terms of a vocabulary file, in file order.
fn read_vocab(path: &Path) -> Result<Vec<Term>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut seen = BTreeSet::new();
    let mut terms = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let raw = line.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let surface = normalize_surface(raw);
        if !seen.insert(surface.clone()) {
            return Err(DataError::Parse {
                file: path.to_path_buf(),
                line: i + 1,
                msg: format!("duplicate term '{surface}'"),
            }
            .into());
        }
        terms.push(Term {
            id: terms.len(),
            surface,
            capitalized: raw.chars().any(char::is_uppercase),
        });
    }
    if terms.is_empty() {
        return Err(CliError::Data(format!("{}: empty vocabulary", path.display())));
    }
    Ok(terms)
}

/// A flag value, else the path recorded in the checkpoint's run config.
fn resource_path(flag: Option<PathBuf>, echo: &serde_json::Value, key: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| echo.get(key).and_then(|v| v.as_str()).map(PathBuf::from))
        .ok_or_else(|| CliError::Config(format!("{key}: not given and not recorded in the checkpoint")))
}

pub fn induct(args: InductArgs) -> Result<(), CliError> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let terms = read_vocab(&args.vocab)?;
    let embeddings_path = resource_path(args.embeddings, &ck.echo, "embeddings")?;
    let paths_path = resource_path(args.paths, &ck.echo, "paths")?;
    let candidates_path = resource_path(args.candidates, &ck.echo, "candidates")?;
    let path_cap = ck
        .echo
        .get("path_cap")
        .and_then(|v| v.as_u64())
        .map_or(DEFAULT_PATH_CAP, |c| c as usize);
    let embeddings = load_embeddings(&embeddings_path, ck.model.config.word_dim)?;
    let paths = load_paths(&paths_path, path_cap)?;
    let candidates = load_candidates(&candidates_path)?;
    let res = Resources {
        embeddings: &embeddings,
        paths: &paths,
        candidates: &candidates,
    };
    let mode = args.mode.unwrap_or(ck.train_config.mode);
    let restriction = args.restriction.unwrap_or(ck.train_config.restriction);
    let seed = args.seed.unwrap_or(ck.train_config.seed);
    let surfaces: Vec<String> = terms.iter().map(|t| t.surface.clone()).collect();
    let prep = ck.model.prepare("vocab", terms, None, &res)?;
    let root = match mode {
        Mode::Nr => Some(draw_root(&prep, &mut eval_rng(seed, 0))),
        Mode::Re => None,
    };
    let traj = induce(&ck.model, &prep, mode, restriction, root, args.sweep_roots)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let write = |out: &mut io::StdoutLock, line: String| {
        writeln!(out, "{line}").map_err(|e| CliError::Failed(format!("writing output: {e}")))
    };
    for (c, p) in traj.tree.edges() {
        write(&mut out, format!("{}\t{}", surfaces[c], surfaces[p]))?;
    }
    for t in &traj.unattached {
        write(&mut out, format!("# unattached: {}", surfaces[*t]))?;
    }
    Ok(())
}

/// Maps a predicted surface-level tree onto the gold vocabulary ids.
fn align_prediction(predicted: &TaxonomyFile, gold: &TaxonomyFile) -> Result<Taxonomy, CliError> {
    let index: BTreeMap<String, TermId> = gold.terms().into_iter().map(|t| (t.surface, t.id)).collect();
    let lookup = |s: &str| {
        index.get(s).copied().ok_or_else(|| {
            CliError::Data(format!(
                "predicted '{}' uses term '{s}' missing from gold",
                predicted.name
            ))
        })
    };
    let edges = predicted
        .edges
        .iter()
        .map(|(c, p)| Ok((lookup(c)?, lookup(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Taxonomy::from_edges(&edges).map_err(|e| CliError::Data(format!("predicted '{}': {e}", predicted.name)))
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let checkpoint = args.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    let cfg = match (&args.config, &checkpoint) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(ck)) => serde_json::from_value(ck.echo.clone())
            .map_err(|e| CliError::Config(format!("checkpoint run config: {e}")))?,
        (None, None) => {
            return Err(CliError::Config(
                "--predicted needs --config to locate the gold data".into(),
            ))
        }
    };
    let split = args.split;
    if let Some(dir) = &args.predicted {
        let gold_files = load_taxonomy_dir(&cfg.taxonomy_dir)?;
        let split_file = load_split(&cfg.split)?;
        let predicted = load_taxonomy_dir(dir)?;
        let mut reports = Vec::new();
        for name in split_file.names(split) {
            let gold = gold_files
                .iter()
                .find(|g| &g.name == name)
                .ok_or_else(|| CliError::Data(format!("split names unknown taxonomy '{name}'")))?;
            let pred = predicted
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| CliError::Data(format!("no prediction for '{name}' in {}", dir.display())))?;
            let (_, gold_tree) = gold.to_taxonomy();
            reports.push(evaluate_tree(&align_prediction(pred, gold)?, &gold_tree)?);
        }
        print_table(&[(
            split.to_string(),
            "predicted".into(),
            MetricReport::macro_average(&reports),
        )]);
        return Ok(());
    }
    let ck = checkpoint.expect("clap requires --checkpoint without --predicted");
    let ds = cfg.load_dataset()?;
    let res = resources(&ds);
    let preps = prepare_files(&ck.model, &ds.split_taxonomies(split), &res)?;
    let mode = args.mode.unwrap_or(ck.train_config.mode);
    let restriction = args.restriction.unwrap_or(ck.train_config.restriction);
    let seed = args.seed.unwrap_or(ck.train_config.seed);
    let variants: &[Restriction] = match restriction {
        Restriction::None => &[Restriction::None],
        _ => &[Restriction::Partial, Restriction::Full],
    };
    let rows = variants
        .iter()
        .map(|&r| {
            let report = evaluate(&ck.model, &preps, mode, r, seed, args.sweep_roots)?;
            Ok((split.to_string(), r.to_string(), report))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    print_table(&rows);
    Ok(())
}

/// `hyponym<TAB>hypernym<TAB>score` lines keyed by normalized surfaces.
fn read_pair_scores(path: &Path) -> Result<BTreeMap<(String, String), f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut scores = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| DataError::Parse {
            file: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [x, y, s] = fields[..] else {
            return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())).into());
        };
        let score: f64 = s.trim().parse().map_err(|_| err(format!("bad score '{s}'")))?;
        if !score.is_finite() {
            return Err(err(format!("non-finite score '{s}'")).into());
        }
        scores.insert((normalize_surface(x), normalize_surface(y)), score);
    }
    Ok(scores)
}

fn candidate_scores(table: &CandidateTable) -> BTreeMap<(String, String), f64> {
    table.entries().map(|(pair, &f)| (pair.clone(), f as f64)).collect()
}

/// Surface-keyed scores restricted to one taxonomy's vocabulary.
fn scores_for(file: &TaxonomyFile, scores: &BTreeMap<(String, String), f64>) -> BTreeMap<(TermId, TermId), f64> {
    let terms = file.terms();
    let mut out = BTreeMap::new();
    for x in &terms {
        for y in &terms {
            if x.id != y.id {
                if let Some(&s) = scores.get(&(x.surface.clone(), y.surface.clone())) {
                    out.insert((x.id, y.id), s);
                }
            }
        }
    }
    out
}

fn write_tree(dir: &Path, file: &TaxonomyFile, tree: &Taxonomy) -> Result<(), CliError> {
    let terms = file.terms();
    let edges = tree
        .edges()
        .map(|(c, p)| (terms[c].surface.clone(), terms[p].surface.clone()))
        .collect();
    write_taxonomy(dir, &TaxonomyFile::new(file.name.clone(), edges)?)?;
    Ok(())
}

pub fn baseline_mst(args: BaselineArgs) -> Result<(), CliError> {
    let config = BaselineConfig::default();
    let mut rows = Vec::new();
    if let Some(cfg_path) = &args.config {
        let cfg = RunConfig::load(cfg_path)?;
        cfg.validate()?;
        let ds = cfg.load_dataset()?;
        let res = resources(&ds);
        let split = args.split.unwrap_or(SplitName::Test);
        let pc = PairwiseConfig {
            epochs: args.epochs,
            lr: cfg.train.lr,
            seed: args.seed.unwrap_or(cfg.train.seed),
            model: cfg.train.model.clone(),
            baseline: config,
            ..PairwiseConfig::default()
        };
        let train_files = ds.split_taxonomies(SplitName::Train);
        if train_files.is_empty() {
            return Err(CliError::Config("split: no training taxonomies".into()));
        }
        let tokens = surface_tokens(ds.taxonomies.iter());
        let model = build_model(&pc.model, &res, &train_files, &tokens, pc.seed)?;
        let train = prepare_files(&model, &train_files, &res)?;
        let validation = prepare_files(&model, &ds.split_taxonomies(SplitName::Validation), &res)?;
        let report = train_pairwise(&pc, model, &train, &validation)?;
        info!("pairwise detector: best epoch {}", report.best_epoch);
        let files = ds.split_taxonomies(split);
        let preps = prepare_files(&report.best, &files, &res)?;
        let reports = mst_reports(&report.best, &files, &preps, &config, args.out.as_deref())?;
        rows.push((
            split.to_string(),
            "mst".to_string(),
            MetricReport::macro_average(&reports),
        ));
    } else {
        let scores = match (&args.pair_scores, &args.candidates) {
            (Some(p), _) => read_pair_scores(p)?,
            (None, Some(c)) => candidate_scores(&load_candidates(c)?),
            (None, None) => unreachable!("clap requires one score source"),
        };
        let dir = args
            .taxonomy_dir
            .as_ref()
            .ok_or_else(|| CliError::Config("--taxonomy-dir is required without --config".into()))?;
        let all = load_taxonomy_dir(dir)?;
        let (label, files): (String, Vec<&TaxonomyFile>) = match (&args.split_file, args.split) {
            (Some(sf), split) => {
                let split = split.unwrap_or(SplitName::Test);
                let names = load_split(sf)?;
                let files = names
                    .names(split)
                    .iter()
                    .map(|n| {
                        all.iter()
                            .find(|f| &f.name == n)
                            .ok_or_else(|| CliError::Data(format!("split names unknown taxonomy '{n}'")))
                    })
                    .collect::<Result<_, _>>()?;
                (split.to_string(), files)
            }
            (None, Some(_)) => return Err(CliError::Config("--split needs --split-file".into())),
            (None, None) => ("all".to_string(), all.iter().collect()),
        };
        let mut reports = Vec::new();
        for f in &files {
            let (terms, gold) = f.to_taxonomy();
            let ids: Vec<TermId> = terms.iter().map(|t| t.id).collect();
            let tree = two_phase_baseline(&scores_for(f, &scores), &ids, &config)?;
            if let Some(out) = &args.out {
                write_tree(out, f, &tree)?;
            }
            reports.push(evaluate_tree(&tree, &gold)?);
        }
        rows.push((label, "mst".to_string(), MetricReport::macro_average(&reports)));
    }
    print_table(&rows);
    Ok(())
}

fn mst_reports(
    model: &Model,
    files: &[&TaxonomyFile],
    preps: &[PreparedTaxonomy],
    config: &BaselineConfig,
    out: Option<&Path>,
) -> Result<Vec<MetricReport>, CliError> {
    let mut reports = Vec::new();
    for (f, prep) in files.iter().zip(preps) {
        let tree = baseline_tree(model, prep, config)?;
        if let Some(dir) = out {
            write_tree(dir, f, &tree)?;
        }
        let gold = prep.gold.as_ref().expect("prepared from a gold file");
        reports.push(evaluate_tree(&tree, gold)?);
    }
    Ok(reports)
}

pub fn gen_synthetic(args: GenArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(CliError::Config("--count must be positive".into()));
    }
    let cfg = SyntheticConfig {
        n_taxonomies: args.count,
        size_range: (args.min_terms, args.max_terms),
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let ds = generate(&cfg)?;
    ds.write_dir(&args.out)?;
    eprintln!("wrote {} taxonomies to {}", ds.taxonomies.len(), args.out.display());
    Ok(())
}

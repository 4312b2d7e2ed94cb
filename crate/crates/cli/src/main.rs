//! `tbvec`: train, sweep, predict and evaluate multi-treebank parsers.

mod config;
mod output;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use tbvec::conllu::{read_conllu_file, write_conllu, Sentence};
use tbvec::eval::export::{heatmap_svg, write_grid_csv, Heatmap};
use tbvec::eval::significance::DEFAULT_ITERATIONS;
use tbvec::eval::synth::{control_suite, default_suite, generate_synthetic_suite, write_suite, SuiteSpec};
use tbvec::eval::{las, median_over_seeds, micro_average, significance, sweep, AggregateLas, SweepResult};
use tbvec::parser::{train, ParserConfig, ParserModel, TrainingTreebank, TransitionSystem};
use tbvec::predict::{
    baseline, median_tables, predict, read_records, tables_from_records, treebank_index, write_records, write_report,
    Baseline, IndexEntry, LasTable, Mode, PredictorConfig, ReportRow, RepresentationKind, RetrievalIndex, TieBreak,
};
use tbvec::sentsim::{load_dense_vectors_file, treebank_centroid, DenseTable, NgramRange, Representation, TfIdf};
use tbvec::weights::{generate_grid, SampleSpace, WeightGrid, WeightVector};

use output::{write_atomic, Manifest};

#[derive(Parser, Debug)]
#[command(name = "tbvec", version, about = "Multi-treebank parsing with interpolated treebank vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic treebank suite as CoNLL-U files.
    Synth(SynthArgs),
    /// Train one model per seed on several treebanks.
    Train(TrainArgs),
    /// Parse annotated sets at every grid point and record LAS.
    Sweep(SweepArgs),
    /// Predict treebank weights for test sentences and parse with them.
    Predict(PredictArgs),
    /// Score parses against gold, optionally testing significance.
    Eval(EvalArgs),
}

/// Options shared by every subcommand.
#[derive(Args, Debug)]
struct Common {
    /// Key-value file with default option values (`key = value`).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Suite description in TOML; defaults to the built-in suite.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Use the built-in suite with identical conventions everywhere.
    #[arg(long, conflicts_with = "spec")]
    control: bool,
    /// Override the generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the split sizes (train, dev, test).
    #[arg(long, num_args = 3, value_names = ["TRAIN", "DEV", "TEST"])]
    sizes: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training treebanks as NAME=PATH (or PATH, named by file stem), in
    /// treebank-vector order.
    #[arg(long, num_args = 1.., required = true)]
    treebanks: Vec<String>,
    /// Seeds: a range `1..9` (inclusive) or a list `1,2,5`.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long)]
    out: PathBuf,
    /// Models trained in parallel; does not affect the output.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "arc-hybrid")]
    system: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    word_dim: Option<usize>,
    #[arg(long)]
    char_dim: Option<usize>,
    #[arg(long)]
    rnn_dim: Option<usize>,
    #[arg(long)]
    tb_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    min_word_freq: Option<usize>,
    #[arg(long)]
    word_dropout: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = 0.125)]
    grid_step: f64,
    #[arg(long, default_value_t = 0.5)]
    grid_margin: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Model files; with several, per-point medians are written as well.
    #[arg(long, num_args = 1.., required = true)]
    model: Vec<PathBuf>,
    /// Annotated sets as NAME=PATH (or PATH, named by file stem).
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<String>,
    #[command(flatten)]
    grid: GridArgs,
    /// Worker threads; does not affect the output.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    /// Test sentences (gold annotation needed for oracle and proxy modes).
    #[arg(long)]
    input: PathBuf,
    /// Retrieval sentences as NAME=PATH, one per training treebank.
    #[arg(long, num_args = 1..)]
    index: Vec<String>,
    /// LAS records of the retrieval sentences; several files are combined
    /// by per-point lower median.
    #[arg(long, num_args = 1..)]
    records: Vec<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = "se-se")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "any")]
    space: String,
    #[arg(long, default_value = "uniform-closest")]
    tie_break: String,
    /// Retrieve from an index that contains the test items themselves.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value = "tfidf")]
    representation: String,
    /// Dense sentence vectors covering index and test sentences.
    #[arg(long, value_name = "FILE")]
    dense_vectors: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    ngram_min: usize,
    #[arg(long, default_value_t = 5)]
    ngram_max: usize,
    /// Use a baseline instead of k-NN prediction.
    #[arg(long, conflicts_with = "oracle")]
    baseline: Option<String>,
    /// Seed for the random baseline.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    gold: PathBuf,
    /// One or two system outputs.
    #[arg(long, num_args = 1..=2, required = true)]
    system: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

/// Splits `NAME=PATH`; a bare path is named by its file stem.
fn named_path(spec: &str) -> Result<(String, PathBuf)> {
    if let Some((name, path)) = spec.split_once('=') {
        ensure!(!name.is_empty(), "empty name in {spec:?}");
        return Ok((name.to_string(), PathBuf::from(path)));
    }
    let path = PathBuf::from(spec);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .with_context(|| format!("cannot derive a name from {spec:?}"))?
        .to_string();
    Ok((stem, path))
}

fn named_paths(specs: &[String]) -> Result<Vec<(String, PathBuf)>> {
    let pairs = specs.iter().map(|s| named_path(s)).collect::<Result<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    for (name, path) in &pairs {
        ensure!(seen.insert(name.clone()), "name {name} given twice");
        ensure!(path.is_file(), "input file {} does not exist", path.display());
    }
    Ok(pairs)
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    ensure!(path.is_file(), "{what} {} does not exist", path.display());
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn read_sentences(path: &Path, treebank: Option<usize>, prefix: &str) -> Result<Vec<Sentence>> {
    read_conllu_file(path, treebank, prefix).with_context(|| format!("reading {}", path.display()))
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        ensure!(a <= b, "empty seed range {spec}");
        (a..=b).collect()
    } else {
        spec.split(',').map(|s| s.trim().parse::<u64>()).collect::<Result<_, _>>()?
    };
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    ensure!(!seeds.is_empty() && unique.len() == seeds.len(), "invalid seed list {spec}");
    Ok(seeds)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut spec: SuiteSpec = match &a.spec {
        Some(path) => {
            require_file(path, "suite spec")?;
            SuiteSpec::from_toml(&std::fs::read_to_string(path)?)?
        }
        None if a.control => control_suite(),
        None => default_suite(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(sizes) = &a.sizes {
        spec.train = sizes[0];
        spec.dev = sizes[1];
        spec.test = sizes[2];
    }
    spec.validate()?;
    prepare_out_dir(&a.out)?;
    let treebanks = generate_synthetic_suite(&spec)?;
    write_suite(&a.out, &spec, &treebanks)?;
    let mut manifest = Manifest::new("synth");
    manifest.push("seed", spec.seed);
    manifest.push("sizes", format!("{} {} {}", spec.train, spec.dev, spec.test));
    for tb in &spec.treebank {
        manifest.push(format!("treebank.{}", tb.name), tb.to_string());
    }
    manifest.write(&a.out)?;
    println!("wrote {} treebanks to {}", treebanks.len(), a.out.display());
    Ok(())
}

fn parser_config(a: &TrainArgs) -> Result<ParserConfig> {
    let d = ParserConfig::default();
    let config = ParserConfig {
        system: a.system.parse::<TransitionSystem>()?,
        epochs: a.epochs.unwrap_or(d.epochs),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        word_dim: a.word_dim.unwrap_or(d.word_dim),
        char_dim: a.char_dim.unwrap_or(d.char_dim),
        rnn_dim: a.rnn_dim.unwrap_or(d.rnn_dim),
        tb_dim: a.tb_dim.unwrap_or(d.tb_dim),
        hidden: a.hidden.unwrap_or(d.hidden),
        min_word_freq: a.min_word_freq.unwrap_or(d.min_word_freq),
        word_dropout: a.word_dropout.unwrap_or(d.word_dropout),
        embedding_init: d.embedding_init,
    };
    config.validate()?;
    Ok(config)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let config = parser_config(&a)?;
    let seeds = parse_seeds(&a.seeds)?;
    let inputs = named_paths(&a.treebanks)?;
    prepare_out_dir(&a.out)?;
    let treebanks = inputs
        .iter()
        .enumerate()
        .map(|(i, (name, path))| {
            Ok(TrainingTreebank {
                name: name.clone(),
                sentences: read_sentences(path, Some(i + 1), name)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for tb in &treebanks {
        ensure!(
            tb.sentences.iter().all(Sentence::is_annotated),
            "training treebank {} contains unannotated sentences",
            tb.name
        );
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.max(1)).build()?;
    let results: Vec<Result<(u64, ParserModel, Vec<f64>)>> = pool.install(|| {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&seed| {
                let (model, report) =
                    train(config.clone(), &treebanks, seed).with_context(|| format!("training seed {seed}"))?;
                Ok((seed, model, report.epoch_losses))
            })
            .collect()
    });

    let mut manifest = Manifest::new("train");
    for (k, v) in config.to_pairs() {
        manifest.push(format!("config.{k}"), v);
    }
    for (name, path) in &inputs {
        manifest.push(format!("treebank.{name}"), path.display());
    }
    manifest.push("seeds", seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    for r in results {
        let (seed, model, losses) = r?;
        let file = format!("model-seed{seed}.bin");
        write_atomic(&a.out.join(&file), &model.to_bytes())?;
        manifest.push(format!("model.{seed}"), &file);
        manifest.push(
            format!("losses.{seed}"),
            losses.iter().map(|l| format!("{l:.6}")).collect::<Vec<_>>().join(" "),
        );
        println!("seed {seed}: final epoch loss {:.4}", losses.last().copied().unwrap_or(0.0));
    }
    manifest.write(&a.out)?;
    Ok(())
}

fn build_grid(g: &GridArgs, m: usize) -> Result<WeightGrid> {
    Ok(generate_grid(m, g.grid_step, g.grid_margin)?)
}

fn load_model(path: &Path) -> Result<ParserModel> {
    require_file(path, "model")?;
    ParserModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn model_id(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string()
}

fn csv_bytes<F: FnOnce(&mut Vec<u8>) -> tbvec::Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn write_landscape(out: &Path, stem: &str, grid: &WeightGrid, agg: &AggregateLas, names: &[String]) -> Result<()> {
    write_atomic(
        &out.join(format!("{stem}.grid.csv")),
        &csv_bytes(|b| write_grid_csv(grid, agg, b))?,
    )?;
    match heatmap_svg(grid, agg, names) {
        Heatmap::Svg(svg) => write_atomic(&out.join(format!("{stem}.svg")), svg.as_bytes())?,
        Heatmap::Unsupported(note) => eprintln!("note: {note}"),
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    for m in &a.model {
        require_file(m, "model")?;
    }
    let inputs = named_paths(&a.input)?;
    let ids: BTreeSet<String> = a.model.iter().map(|m| model_id(m)).collect();
    ensure!(ids.len() == a.model.len(), "model files must have distinct names");
    let models = a.model.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let m = models[0].m();
    ensure!(models.iter().all(|x| x.m() == m), "models were trained on different numbers of treebanks");
    let grid = build_grid(&a.grid, m)?;
    let sets = inputs
        .iter()
        .map(|(name, path)| Ok((name.clone(), read_sentences(path, None, name)?)))
        .collect::<Result<Vec<_>>>()?;
    for (name, sentences) in &sets {
        ensure!(
            sentences.iter().all(Sentence::is_annotated),
            "input {name} needs gold annotation for a sweep"
        );
    }
    prepare_out_dir(&a.out)?;
    write_atomic(&a.out.join("grid.csv"), &csv_bytes(|b| grid.write_csv(b))?)?;

    let mut manifest = Manifest::new("sweep");
    manifest.push("grid_step", a.grid.grid_step);
    manifest.push("grid_margin", a.grid.grid_margin);
    manifest.push("grid_points", grid.len());
    for (path, model) in a.model.iter().zip(&models) {
        manifest.push(format!("model.{}", model_id(path)), path.display());
        manifest.push(format!("treebanks.{}", model_id(path)), model.treebanks.join(","));
    }
    for (name, sentences) in &sets {
        let mut results = Vec::new();
        for (path, model) in a.model.iter().zip(&models) {
            let id = model_id(path);
            let mut result: SweepResult = sweep(model, sentences, &grid, a.jobs)?;
            result.model_id = id.clone();
            result.test_id = name.clone();
            let stem = format!("{id}.{name}");
            write_atomic(
                &a.out.join(format!("{stem}.records.csv")),
                &csv_bytes(|b| write_records(&result.records(), b))?,
            )?;
            let agg = result.aggregate();
            write_landscape(&a.out, &stem, &grid, &agg, &model.treebanks)?;
            manifest.push(format!("range.{stem}"), format!("{:.6}", agg.range()));
            println!("{stem}: LAS range {:.4} over {} points", agg.range(), grid.len());
            results.push(result);
        }
        if results.len() > 1 {
            let agg = median_over_seeds(&results)?;
            let stem = format!("median.{name}");
            let tables = median_tables(&results.iter().map(|r| r.tables.clone()).collect::<Vec<_>>())?;
            let records: Vec<_> = tables.iter().flat_map(|t| t.records()).collect();
            write_atomic(
                &a.out.join(format!("{stem}.records.csv")),
                &csv_bytes(|b| write_records(&records, b))?,
            )?;
            write_landscape(&a.out, &stem, &grid, &agg, &models[0].treebanks)?;
            manifest.push(format!("range.{stem}"), format!("{:.6}", agg.range()));
            println!("{stem}: LAS range {:.4}", agg.range());
        }
    }
    manifest.write(&a.out)?;
    Ok(())
}

/// Per-sentence evidence from one or more record files.
fn load_evidence(paths: &[PathBuf], grid: &WeightGrid) -> Result<Vec<LasTable>> {
    let per_file = paths
        .iter()
        .map(|p| {
            let file = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let records = read_records(file).with_context(|| format!("reading {}", p.display()))?;
            tables_from_records(&records, grid.len()).with_context(|| format!("evidence in {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    if per_file.len() == 1 {
        return Ok(per_file.into_iter().next().expect("one file"));
    }
    // Several seeds cover the same sentences; other splits are concatenated.
    let same = per_file
        .iter()
        .all(|t| t.iter().map(|x| &x.key).eq(per_file[0].iter().map(|x| &x.key)));
    if same {
        Ok(median_tables(&per_file)?)
    } else {
        let mut all: BTreeMap<String, LasTable> = BTreeMap::new();
        for t in per_file.into_iter().flatten() {
            ensure!(!all.contains_key(&t.key), "sentence {} appears in several record files", t.key);
            all.insert(t.key.clone(), t);
        }
        Ok(all.into_values().collect())
    }
}

enum Representer {
    Tfidf(TfIdf),
    Dense(DenseTable),
}

impl Representer {
    fn rep(&self, s: &Sentence) -> Result<Representation> {
        Ok(match self {
            Representer::Tfidf(m) => m.transform(s),
            Representer::Dense(t) => t.get(&s.id)?.clone(),
        })
    }
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let config = PredictorConfig {
        k: a.k,
        space: a.space.parse::<SampleSpace>()?,
        tie_break: a.tie_break.parse::<TieBreak>()?,
        representation: a.representation.parse::<RepresentationKind>()?,
        mode: a.mode.parse::<Mode>()?,
        oracle: a.oracle,
    };
    config.validate()?;
    let baseline_kind = a.baseline.as_deref().map(str::parse::<Baseline>).transpose()?;
    match (config.representation, &a.dense_vectors) {
        (RepresentationKind::Dense, None) => bail!("--representation dense requires --dense-vectors"),
        (RepresentationKind::Tfidf, Some(_)) => {
            bail!("--dense-vectors requires --representation dense")
        }
        _ => {}
    }
    if let Some(p) = &a.dense_vectors {
        require_file(p, "dense vector file")?;
    }
    require_file(&a.input, "input")?;
    let index_inputs = named_paths(&a.index)?;
    for r in &a.records {
        require_file(r, "records file")?;
    }
    if baseline_kind.is_none() {
        ensure!(!index_inputs.is_empty(), "k-NN prediction requires --index");
        ensure!(!a.records.is_empty(), "k-NN prediction requires --records");
    }
    let model = load_model(&a.model)?;
    let grid = build_grid(&a.grid, model.m())?;
    let test = read_sentences(&a.input, None, "test")?;
    ensure!(!test.is_empty(), "input {} has no sentences", a.input.display());
    let gold_available = test.iter().all(Sentence::is_annotated);
    let needs_gold = config.oracle || matches!(baseline_kind, Some(Baseline::ProxyBest | Baseline::ProxyWorst));
    if needs_gold && !gold_available {
        bail!("oracle and proxy modes need gold annotation in {}", a.input.display());
    }
    prepare_out_dir(&a.out)?;

    let test_evidence = if needs_gold {
        Some(sweep(&model, &test, &grid, a.jobs)?.tables)
    } else {
        None
    };

    let mut manifest = Manifest::new("predict");
    manifest.push("model", a.model.display());
    manifest.push("input", a.input.display());
    manifest.push("grid_step", a.grid.grid_step);
    manifest.push("grid_margin", a.grid.grid_margin);

    let mut rows = Vec::with_capacity(test.len());
    let mut weights_for: Vec<WeightVector> = Vec::with_capacity(test.len());
    if let Some(kind) = baseline_kind {
        let choice = baseline(kind, &grid, config.space, test_evidence.as_deref(), a.seed)?;
        manifest.push("baseline", kind);
        manifest.push("space", config.space);
        manifest.push("seed", a.seed);
        for s in &test {
            rows.push(ReportRow {
                sentence_key: s.id.clone(),
                point_id: choice.point_id,
                weights: choice.weights.clone(),
                strategy: kind.to_string(),
                k: 0,
                space: config.space.to_string(),
            });
            weights_for.push(choice.weights.clone());
        }
    } else {
        let evidence = load_evidence(&a.records, &grid)?;
        let by_key: BTreeMap<&str, &LasTable> = evidence.iter().map(|t| (t.key.as_str(), t)).collect();
        let index_sets = index_inputs
            .iter()
            .map(|(name, path)| Ok((name.clone(), read_sentences(path, None, name)?)))
            .collect::<Result<Vec<_>>>()?;
        let index_sentences: Vec<&Sentence> = index_sets.iter().flat_map(|(_, s)| s).collect();
        let representer = match &a.dense_vectors {
            Some(path) => {
                let table = DenseTable::new(load_dense_vectors_file(path)?);
                table.check_known(index_sentences.iter().chain(&test.iter().collect::<Vec<_>>()).map(|s| s.id.as_str()))?;
                Representer::Dense(table)
            }
            None => Representer::Tfidf(TfIdf::fit(
                index_sentences.iter().copied(),
                NgramRange::new(a.ngram_min, a.ngram_max)?,
            )?),
        };
        let table_of = |key: &str| -> Result<&LasTable> {
            by_key
                .get(key)
                .copied()
                .with_context(|| format!("no LAS records for index sentence {key}"))
        };
        let test_tables = test_evidence.as_ref();
        manifest.push("mode", config.mode);
        manifest.push("k", config.k);
        manifest.push("space", config.space);
        manifest.push("tie_break", config.tie_break);
        manifest.push("oracle", config.oracle);
        manifest.push("representation", config.representation);
        match config.mode {
            Mode::SeSe => {
                let mut entries = Vec::new();
                for s in &index_sentences {
                    entries.push(IndexEntry {
                        rep: representer.rep(s)?,
                        table: table_of(&s.id)?.clone(),
                    });
                }
                if let Some(tables) = test_tables {
                    for (s, t) in test.iter().zip(tables) {
                        ensure!(!by_key.contains_key(s.id.as_str()), "test sentence {} is also in the index", s.id);
                        entries.push(IndexEntry {
                            rep: representer.rep(s)?,
                            table: t.clone(),
                        });
                    }
                }
                let index = RetrievalIndex::new(entries)?;
                let mut truncated = false;
                for s in &test {
                    let p = predict(&config, &grid, &index, &representer.rep(s)?)?;
                    truncated |= p.truncated;
                    rows.push(ReportRow {
                        sentence_key: s.id.clone(),
                        point_id: Some(p.point_id),
                        weights: p.weights.clone(),
                        strategy: config.tie_break.to_string(),
                        k: config.k,
                        space: config.space.to_string(),
                    });
                    weights_for.push(p.weights);
                }
                if truncated {
                    eprintln!("note: k = {} exceeds the index size; all entries were used", config.k);
                }
            }
            Mode::TrTr => {
                let mut treebanks = Vec::new();
                for (name, sentences) in &index_sets {
                    let reps = sentences.iter().map(|s| representer.rep(s)).collect::<Result<Vec<_>>>()?;
                    let tables = sentences.iter().map(|s| table_of(&s.id)).collect::<Result<Vec<_>>>()?;
                    treebanks.push((treebank_centroid(name, &reps)?, tables));
                }
                let test_reps = test.iter().map(|s| representer.rep(s)).collect::<Result<Vec<_>>>()?;
                let test_key = "test";
                ensure!(
                    !index_sets.iter().any(|(n, _)| n == test_key),
                    "index treebank name {test_key} is reserved"
                );
                let query = treebank_centroid(test_key, &test_reps)?;
                if let Some(tables) = test_tables {
                    treebanks.push((query.clone(), tables.iter().collect()));
                }
                let index = treebank_index(treebanks)?;
                let p = predict(&config, &grid, &index, &query)?;
                manifest.push("retrieved", p.neighbors.join(","));
                println!("nearest treebank: {}", p.neighbors[0]);
                for s in &test {
                    rows.push(ReportRow {
                        sentence_key: s.id.clone(),
                        point_id: Some(p.point_id),
                        weights: p.weights.clone(),
                        strategy: config.tie_break.to_string(),
                        k: config.k,
                        space: config.space.to_string(),
                    });
                    weights_for.push(p.weights.clone());
                }
            }
        }
    }

    let mut parsed = Vec::with_capacity(test.len());
    let mut counts = Vec::new();
    for (s, w) in test.iter().zip(&weights_for) {
        let result = model.parse(s, w)?;
        if gold_available {
            counts.push(las(s, &result)?);
        }
        parsed.push(s.with_annotation(&result.heads, &result.deprels)?);
    }
    write_atomic(
        &a.out.join("predictions.csv"),
        &csv_bytes(|b| write_report(&rows, model.m(), b))?,
    )?;
    write_atomic(&a.out.join("parsed.conllu"), write_conllu(&parsed).as_bytes())?;
    if gold_available {
        let (c, t, l) = micro_average(counts);
        manifest.push("las", format!("{l:.6}"));
        manifest.push("correct", c);
        manifest.push("total", t);
        println!("LAS {l:.4} ({c}/{t})");
    }
    manifest.write(&a.out)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    require_file(&a.gold, "gold file")?;
    for s in &a.system {
        require_file(s, "system file")?;
    }
    let gold = read_sentences(&a.gold, None, "gold")?;
    ensure!(gold.iter().all(Sentence::is_annotated), "gold file has unannotated sentences");
    let systems = a
        .system
        .iter()
        .map(|p| read_sentences(p, None, "gold"))
        .collect::<Result<Vec<_>>>()?;
    let mut report = String::new();
    let result = significance(&gold, &systems[0], systems.last().expect("one system"), a.iterations, a.seed)?;
    report.push_str(&format!("las_a = {:.6}\n", result.las_a));
    if systems.len() == 2 {
        report.push_str(&format!("las_b = {:.6}\n", result.las_b));
        report.push_str(&format!("difference = {:.6}\n", result.difference));
        report.push_str(&format!("p_value = {}\n", result.p_value));
        report.push_str(&format!("iterations = {}\nseed = {}\n", result.iterations, a.seed));
    }
    print!("{report}");
    if let Some(out) = &a.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            prepare_out_dir(parent)?;
        }
        write_atomic(out, report.as_bytes())?;
    }
    Ok(())
}

//! Acceptance criteria, one pass/fail line each.
//!
//! Runs without the libtest harness so the report is always printed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use tbvec::conllu::{read_conllu, write_conllu, Sentence, Treebank};
use tbvec::eval::synth::{control_suite, default_suite, generate_synthetic_suite, render_suite, SuiteSpec};
use tbvec::eval::{median_over_seeds, significance, sweep, SweepResult};
use tbvec::parser::{train, ParserConfig, ParserModel, Params, TrainingTreebank};
use tbvec::predict::{
    baseline, predict, read_records, retrieve, tables_from_records, treebank_index, write_records, Baseline,
    IndexEntry, LasTable, Mode, PredictorConfig, RetrievalIndex,
};
use tbvec::sentsim::{treebank_centroid, NgramRange, TfIdf};
use tbvec::weights::{corner, generate_grid, SampleSpace, WeightGrid};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=9;
const OOD: usize = 3;

struct Experiment {
    suite: Vec<Treebank>,
    models: Vec<ParserModel>,
    /// Out-of-domain test sweep per seed.
    ood: Vec<SweepResult>,
    /// Dev sweeps of the training treebanks per seed.
    dev: Vec<Vec<SweepResult>>,
}

fn grid() -> &'static WeightGrid {
    static GRID: OnceLock<WeightGrid> = OnceLock::new();
    GRID.get_or_init(|| generate_grid(3, 0.125, 0.5).unwrap())
}

fn training_data(suite: &[Treebank]) -> Vec<TrainingTreebank> {
    suite[..OOD]
        .iter()
        .map(|t| TrainingTreebank {
            name: t.name.clone(),
            sentences: t.split("train").to_vec(),
        })
        .collect()
}

fn run_experiment(spec: &SuiteSpec, with_dev: bool) -> Experiment {
    let suite = generate_synthetic_suite(spec).unwrap();
    let data = training_data(&suite);
    let mut models = Vec::new();
    let mut ood = Vec::new();
    let mut dev = Vec::new();
    for seed in SEEDS {
        let (model, _) = train(ParserConfig::default(), &data, seed).unwrap();
        ood.push(sweep(&model, suite[OOD].split("test"), grid(), 1).unwrap());
        if with_dev {
            dev.push(
                suite[..OOD]
                    .iter()
                    .map(|t| sweep(&model, t.split("dev"), grid(), 1).unwrap())
                    .collect(),
            );
        }
        models.push(model);
    }
    Experiment { suite, models, ood, dev }
}

fn default_experiment() -> &'static Experiment {
    static EXP: OnceLock<Experiment> = OnceLock::new();
    EXP.get_or_init(|| run_experiment(&default_suite(), true))
}

fn control_experiment() -> &'static Experiment {
    static EXP: OnceLock<Experiment> = OnceLock::new();
    EXP.get_or_init(|| run_experiment(&control_suite(), false))
}

type Outcome = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_corner_reduction() -> Outcome {
    let exp = default_experiment();
    let start = Instant::now();
    let model = &exp.models[0];
    let mut compared = 0;
    for t in 1..=model.m() {
        let row = model.tb_row(t).unwrap();
        let w = corner(t, model.m()).unwrap();
        for tb in &exp.suite {
            for s in tb.split("dev") {
                let prepared = model.prepare(s);
                let a = model.parse_prepared(&prepared, &w).unwrap();
                let b = model.parse_with_tbvec(&prepared, &row).unwrap();
                if a != b {
                    return Err(format!("treebank {t}, sentence {}: trees differ", s.id));
                }
                compared += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, format!("{compared} parses identical in {secs:.1}s"))
}

/// Oracle se-se: the index holds every dev sentence plus the test items.
fn oracle_se_se_las(exp: &Experiment, seed: usize, space: SampleSpace) -> (usize, usize) {
    let test = exp.suite[OOD].split("test");
    let index_sentences: Vec<&Sentence> = exp.suite[..OOD].iter().flat_map(|t| t.split("dev")).collect();
    let tfidf = TfIdf::fit(index_sentences.iter().copied(), NgramRange::default()).unwrap();
    let mut entries: Vec<IndexEntry> = index_sentences
        .iter()
        .zip(exp.dev[seed].iter().flat_map(|r| &r.tables))
        .map(|(s, t)| IndexEntry {
            rep: tfidf.transform(s),
            table: t.clone(),
        })
        .collect();
    for (s, t) in test.iter().zip(&exp.ood[seed].tables) {
        entries.push(IndexEntry {
            rep: tfidf.transform(s),
            table: t.clone(),
        });
    }
    let index = RetrievalIndex::new(entries).unwrap();
    let config = PredictorConfig {
        space,
        oracle: true,
        ..PredictorConfig::default()
    };
    let (mut correct, mut total) = (0, 0);
    for (s, t) in test.iter().zip(&exp.ood[seed].tables) {
        let p = predict(&config, grid(), &index, &tfidf.transform(s)).unwrap();
        correct += t.correct[p.point_id];
        total += t.total;
    }
    (correct, total)
}

fn c2_oracle_nesting() -> Outcome {
    let exp = default_experiment();
    let mut lines = Vec::new();
    for seed in 0..exp.models.len() {
        let [f, n, a] = [SampleSpace::Fixed, SampleSpace::NonNeg, SampleSpace::Any]
            .map(|space| oracle_se_se_las(exp, seed, space));
        lines.push(format!("{}/{}/{}", f.0, n.0, a.0));
        if !(f.0 <= n.0 && n.0 <= a.0) {
            return Err(format!("seed {}: fixed {} nonneg {} any {}", seed + 1, f.0, n.0, a.0));
        }
    }
    Ok(format!("correct arcs fixed/nonneg/any per seed: {}", lines.join(" ")))
}

fn c3_proxy_identity() -> Outcome {
    let exp = default_experiment();
    let test = exp.suite[OOD].split("test");
    let train_sents: Vec<&Sentence> = exp.suite[..OOD].iter().flat_map(|t| t.split("dev")).collect();
    let tfidf = TfIdf::fit(train_sents.iter().copied(), NgramRange::default()).unwrap();
    let mut picks = Vec::new();
    for seed in 0..exp.models.len() {
        let mut treebanks = Vec::new();
        for (t, sweep) in exp.suite[..OOD].iter().zip(&exp.dev[seed]) {
            let reps: Vec<_> = t.split("dev").iter().map(|s| tfidf.transform(s)).collect();
            treebanks.push((treebank_centroid(&t.name, &reps).unwrap(), sweep.tables.iter().collect()));
        }
        let test_reps: Vec<_> = test.iter().map(|s| tfidf.transform(s)).collect();
        let query = treebank_centroid("test", &test_reps).unwrap();
        treebanks.push((query.clone(), exp.ood[seed].tables.iter().collect()));
        let index = treebank_index(treebanks).unwrap();
        let config = PredictorConfig {
            mode: Mode::TrTr,
            space: SampleSpace::Fixed,
            oracle: true,
            ..PredictorConfig::default()
        };
        let oracle = predict(&config, grid(), &index, &query).unwrap();
        let proxy = baseline(
            Baseline::ProxyBest,
            grid(),
            SampleSpace::Fixed,
            Some(&exp.ood[seed].tables),
            0,
        )
        .unwrap();
        let agg = exp.ood[seed].aggregate();
        let las = |p: usize| agg.correct[p];
        if Some(oracle.point_id) != proxy.point_id || las(oracle.point_id) != las(proxy.point_id.unwrap()) {
            return Err(format!(
                "seed {}: oracle point {} vs proxy {:?}",
                seed + 1,
                oracle.point_id,
                proxy.point_id
            ));
        }
        picks.push(format!("{}", grid().point(oracle.point_id).weights));
    }
    Ok(format!("identical selections: {}", picks.join(" ")))
}

fn c4_landscape() -> Outcome {
    let start = Instant::now();
    let main = median_over_seeds(&default_experiment().ood).unwrap();
    let control = median_over_seeds(&control_experiment().ood).unwrap();
    let (r, rc) = (main.range(), control.range());
    let per_seed: Vec<String> = default_experiment()
        .ood
        .iter()
        .zip(&control_experiment().ood)
        .map(|(a, b)| format!("{:.3}/{:.3}", a.aggregate().range(), b.aggregate().range()))
        .collect();
    let detail = format!(
        "median range {r:.4} (> 0.02), control {rc:.4} (< 0.01); per seed {}; {:.0}s for control",
        per_seed.join(" "),
        start.elapsed().as_secs_f64()
    );
    check(r > 0.02 && rc < 0.01, detail)
}

fn c5_quantization() -> Outcome {
    let mut checked = 0;
    for exp in [default_experiment(), control_experiment()] {
        let mut sweeps: Vec<(&SweepResult, &[Sentence])> =
            exp.ood.iter().map(|r| (r, exp.suite[OOD].split("test"))).collect();
        for per_seed in &exp.dev {
            for (r, tb) in per_seed.iter().zip(&exp.suite) {
                sweeps.push((r, tb.split("dev")));
            }
        }
        for (result, sentences) in sweeps {
            let lengths: BTreeMap<&str, usize> = sentences.iter().map(|s| (s.id.as_str(), s.len())).collect();
            let mut buf = Vec::new();
            write_records(&result.records(), &mut buf).unwrap();
            // Every field of every written row must be an integer.
            let text = String::from_utf8(buf.clone()).unwrap();
            for line in text.lines().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                if fields[1..].iter().any(|f| f.parse::<u64>().is_err()) {
                    return Err(format!("non-integer field in record {line}"));
                }
            }
            let records = read_records(&buf[..]).unwrap();
            for r in &records {
                let n = lengths[r.sentence_key.as_str()];
                let las = r.correct as f64 / r.total as f64;
                let k = (las * n as f64).round();
                if r.total != n || r.correct > r.total || k != r.correct as f64 || las != k / n as f64 {
                    return Err(format!("record {r:?} is not a multiple of 1/{n}"));
                }
                checked += 1;
            }
            // Set LAS is the micro-average of the sentence records.
            let tables = tables_from_records(&records, grid().len()).unwrap();
            let agg = result.aggregate();
            for p in 0..grid().len() {
                let c: usize = tables.iter().map(|t| t.correct[p]).sum();
                let t: usize = tables.iter().map(|t| t.total).sum();
                if c != agg.correct[p] || t != agg.total {
                    return Err(format!("micro-average mismatch at point {p}"));
                }
            }
        }
    }
    Ok(format!("{checked} sentence records are integer multiples of 1/n"))
}

fn c6_retrieval() -> Outcome {
    let suite = generate_synthetic_suite(&default_suite()).unwrap();
    let train_sents: Vec<&Sentence> = suite[..OOD].iter().flat_map(|t| t.split("train")).collect();
    let tfidf = TfIdf::fit(train_sents.iter().copied(), NgramRange::default()).unwrap();
    let dummy = LasTable {
        key: String::new(),
        total: 1,
        correct: vec![0],
    };
    let entries = suite[..OOD]
        .iter()
        .map(|t| {
            let reps: Vec<_> = t.split("train").iter().map(|s| tfidf.transform(s)).collect();
            let rep = treebank_centroid(&t.name, &reps).unwrap();
            IndexEntry {
                table: LasTable {
                    key: t.name.clone(),
                    ..dummy.clone()
                },
                rep,
            }
        })
        .collect();
    let index = RetrievalIndex::new(entries).unwrap();
    let mut found = Vec::new();
    for t in &suite[..OOD] {
        let reps: Vec<_> = t.split("dev").iter().map(|s| tfidf.transform(s)).collect();
        let query = treebank_centroid(&format!("{}-dev", t.name), &reps).unwrap();
        let r = retrieve(&index, &query, 1).unwrap();
        let name = &index.entries()[r.neighbors[0].0].rep.key;
        found.push(format!("{}->{} ({:.3})", t.name, name, r.neighbors[0].1));
        if name != &t.name {
            return Err(found.join(", "));
        }
    }
    Ok(found.join(", "))
}

fn tbvec(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tbvec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("tbvec {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline(dir: &Path, jobs: &str) -> Result<(), String> {
    let train_args = "train --treebanks A=suite/A/train.conllu B=suite/B/train.conllu C=suite/C/train.conllu \
                      --seeds 1..2 --epochs 3 --hidden 32 --out models";
    let sweep_args = "sweep --model models/model-seed1.bin models/model-seed2.bin \
                      --input A=suite/A/dev.conllu B=suite/B/dev.conllu C=suite/C/dev.conllu X=suite/X/test.conllu \
                      --out sweep";
    let predict_args = "predict --model models/model-seed1.bin --input suite/X/test.conllu \
                        --index A=suite/A/dev.conllu B=suite/B/dev.conllu C=suite/C/dev.conllu \
                        --records sweep/median.A.records.csv sweep/median.B.records.csv sweep/median.C.records.csv \
                        --k 3 --tie-break next-neighbor-rerank --out predict";
    let split = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
    for args in [
        split("synth --out suite --sizes 120 30 30"),
        split(train_args),
        [split(sweep_args), vec!["--jobs".into(), jobs.into()]].concat(),
        [split(predict_args), vec!["--jobs".into(), jobs.into()]].concat(),
        split("eval --gold suite/X/test.conllu --system predict/parsed.conllu suite/X/test.conllu --out eval/report.txt"),
    ] {
        tbvec(&args.iter().map(String::as_str).collect::<Vec<_>>(), dir)?;
    }
    Ok(())
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c7_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (name, jobs) in [("serial", "1"), ("again", "1"), ("parallel", "8")] {
        let dir = root.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        pipeline(&dir, jobs)?;
        runs.push(files(&dir));
    }
    for (label, other) in [("repeat", &runs[1]), ("--jobs 8", &runs[2])] {
        if runs[0].keys().ne(other.keys()) {
            return Err(format!("{label}: different file sets"));
        }
        if let Some((k, _)) = runs[0].iter().find(|(k, v)| other[*k] != **v) {
            return Err(format!("{label}: {k} differs"));
        }
    }
    Ok(format!("{} output files byte-identical across repeat and --jobs 8", runs[0].len()))
}

fn c8_gradient_check() -> Outcome {
    let suite = generate_synthetic_suite(&SuiteSpec {
        train: 8,
        dev: 2,
        test: 2,
        ..default_suite()
    })
    .unwrap();
    let config = ParserConfig {
        word_dim: 6,
        char_dim: 3,
        rnn_dim: 4,
        tb_dim: 3,
        hidden: 8,
        epochs: 2,
        ..ParserConfig::default()
    };
    let (model, _) = train(config, &training_data(&suite), 3).unwrap();
    let batch: Vec<(usize, &Sentence)> = (0..3).map(|t| (t + 1, &suite[t].split("train")[1])).collect();
    let (_, analytic) = model.loss_and_gradient(&batch).unwrap();
    let h = 1e-4f64;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (ti, name) in Params::<f32>::NAMES.iter().enumerate() {
        for i in 0..model.params.tensors()[ti].len() {
            let x = model.params.tensors()[ti][i];
            let (plus, minus) = ((x as f64 + h) as f32, (x as f64 - h) as f32);
            let mut m = model.clone();
            m.params.tensors_mut()[ti][i] = plus;
            let lp = m.loss(&batch).unwrap();
            m.params.tensors_mut()[ti][i] = minus;
            let lm = m.loss(&batch).unwrap();
            let numeric = (lp - lm) / (plus as f64 - minus as f64);
            let a = analytic.tensors()[ti][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5);
            if rel > 1e-4 {
                return Err(format!("{name}[{i}]: analytic {a:e} numeric {numeric:e} rel {rel:e}"));
            }
            worst = worst.max(rel);
            count += 1;
        }
    }
    Ok(format!("{count} parameters, worst relative error {worst:.2e}"))
}

fn c9_significance() -> Outcome {
    let suite = generate_synthetic_suite(&default_suite()).unwrap();
    let gold = suite[0].split("test").to_vec();
    if gold.len() != 100 {
        return Err(format!("expected 100 sentences, got {}", gold.len()));
    }
    let same = significance(&gold, &gold, &gold, 10_000, 1).unwrap();
    // System b mislabels the first token of every sentence.
    let worse: Vec<Sentence> = gold
        .iter()
        .map(|s| {
            let heads = s.heads().unwrap();
            let mut labels: Vec<String> = s.tokens.iter().map(|t| t.deprel.clone().unwrap()).collect();
            labels[0] = format!("{}-x", labels[0]);
            s.with_annotation(&heads, &labels).unwrap()
        })
        .collect();
    let dominant = significance(&gold, &gold, &worse, 10_000, 1).unwrap();
    let swapped = significance(&gold, &worse, &gold, 10_000, 1).unwrap();
    check(
        same.p_value == 1.0 && dominant.p_value < 0.05 && swapped.p_value == dominant.p_value,
        format!(
            "identical p = {}, dominant p = {:.6}, swapped p = {:.6}",
            same.p_value, dominant.p_value, swapped.p_value
        ),
    )
}

const FIXTURE: &str = "# newdoc id = d1\n# sent_id = s1\n# text = Don't stop.\n1-2\tDon't\t_\t_\t_\t_\t_\t_\t_\tSpaceAfter=No\n1\tDo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n2\tn't\tnot\tPART\t_\tPolarity=Neg\t3\tadvmod\t_\t_\n3\tstop\tstop\tVERB\t_\t_\t0\troot\t_\tSpaceAfter=No\n3.1\tit\tit\tPRON\t_\t_\t_\t_\t3:obj\t_\n4\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_\n\n# sent_id = s2\n1\tYes\tyes\tINTJ\t_\t_\t0\troot\t_\t_\n\n";

fn c10_round_trip() -> Outcome {
    let mut files = 0;
    for spec in [default_suite(), control_suite()] {
        for (path, text) in render_suite(&generate_synthetic_suite(&spec).unwrap()) {
            let back = write_conllu(&read_conllu(&text, None, &path).unwrap());
            if back != text {
                return Err(format!("{path} changed on round trip"));
            }
            files += 1;
        }
    }
    let fixture = read_conllu(FIXTURE, None, "fixture").unwrap();
    if write_conllu(&fixture) != FIXTURE {
        return Err("hand-built fixture changed on round trip".into());
    }
    Ok(format!("{files} suite files and the MWT/empty-node fixture byte-identical"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (10, "CoNLL-U round-trip", c10_round_trip),
        (8, "gradient check", c8_gradient_check),
        (9, "significance sanity", c9_significance),
        (6, "tr-tr retrieval accuracy", c6_retrieval),
        (7, "determinism", c7_determinism),
        (1, "corner reduction", c1_corner_reduction),
        (2, "oracle nesting", c2_oracle_nesting),
        (3, "proxy identity", c3_proxy_identity),
        (4, "landscape non-triviality", c4_landscape),
        (5, "sentence-LAS quantization", c5_quantization),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let started = Instant::now();
    let mut results = Vec::new();
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str()) || x == &id.to_string()) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!(
            "criterion {id:>2} [{tag}] {name}: {detail} ({:.1}s)",
            t.elapsed().as_secs_f64()
        );
        results.push((id, outcome.is_ok()));
    }
    results.sort();
    let failed: Vec<u8> = results.iter().filter(|(_, ok)| !ok).map(|(id, _)| *id).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

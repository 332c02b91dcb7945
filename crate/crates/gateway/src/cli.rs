//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use manualqa_core::corpus::{ingest_dir, load_corpus, write_corpus, AbbrevTable, Normalizer, UnitRule};
use manualqa_core::index::{IndexParams, InvertedIndex};
use manualqa_core::metrics::{
    build_candidate_sets, evaluate_qa, evaluate_ranking, load_qa_jsonl, load_squad, read_candidate_sets, split_indices,
    write_candidate_sets, QaExample, Ranker,
};
use manualqa_core::reader::instances_for_example;
use manualqa_core::rerank::{synthetic_ranking_set, CandidateSet, Combiner, GbrtModel, GbrtParams, SyntheticParams};

use crate::config::Config;
use crate::server::{self, AnswerView, AppState};

#[derive(Debug, Parser)]
#[command(name = "manualqa", version, about = "Question answering over operating manuals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse XML manual sources into a normalized corpus (JSONL).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        abbrev: Option<PathBuf>,
        #[arg(long)]
        units: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a BM25F index from a corpus file.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
    },
    /// Print index contents.
    Dump {
        #[arg(long)]
        index: PathBuf,
        /// One line per term: term, document frequency, postings.
        #[arg(long)]
        terms: bool,
    },
    /// Answer one question and print the ranked answers.
    Ask {
        question: String,
        #[arg(long)]
        config: PathBuf,
        /// Print the answer list as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Evaluation harnesses.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Train the boosted re-ranker on candidate sets.
    TrainRerank {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_depth: usize,
        #[arg(long, default_value_t = 0.1)]
        shrinkage: f64,
        /// Train only on this fraction of the sets (same shuffle as `eval rank`).
        #[arg(long)]
        split: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic ranking set (candidate sets JSONL).
    GenSynthetic {
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 10)]
        candidates: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve and read every question of a QA dataset, writing candidate sets.
    MakeCandidates {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export (c, s, e, t) training instances from a QA dataset.
    ExportInstances {
        /// SQuAD 2.0 JSON, or JSONL examples together with --corpus.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        max_seq_len: usize,
        #[arg(long, default_value_t = 128)]
        stride: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Closed-document EM/F1 (reader runs on the gold document).
    Qa {
        /// JSONL examples (against the config's index) or SQuAD 2.0 JSON.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean nDCG@k of a ranker on the held-out split of candidate sets.
    Rank(RankArgs),
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Candidate sets JSONL.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// retriever_only, qa_only, multiply, zscore_add, gbrt (trained on the
    /// train split), gbrt:<model file>, or all.
    #[arg(long, default_value = "all")]
    ranker: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) if e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)) => 0,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            2
        }
    }
}

/// `a: b: c` for the error chain, skipping causes the outer message already
/// repeats.
fn error_chain(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest { input, abbrev, units, out: dest } => {
            let normalizer = Normalizer {
                abbrevs: abbrev.map(|p| read(&p).and_then(|t| Ok(AbbrevTable::from_tsv(&t)?))).transpose()?.unwrap_or_default(),
                unit_rules: units.map(|p| read(&p).and_then(|t| Ok(UnitRule::from_tsv(&t)?))).transpose()?.unwrap_or_default(),
            };
            let (report, files) = ingest_dir(&input, &normalizer)?;
            for w in &report.warnings {
                eprintln!("warning: {}:{}: {}", w.line, w.column, w.message);
            }
            let mut f = create(&dest)?;
            write_corpus(&report.docs, &mut f)?;
            f.flush()?;
            writeln!(out, "{} documents from {} files, {} warnings", report.docs.len(), files.len(), report.warnings.len())?;
        }
        Command::Index { corpus, out: dest, k1 } => {
            let docs = load_corpus(&corpus)?;
            let params = IndexParams { k1, ..IndexParams::default() };
            let index = InvertedIndex::build(docs, params)?;
            index.save(&dest)?;
            writeln!(out, "indexed {} documents", index.doc_count())?;
        }
        Command::Dump { index, terms } => {
            let index = InvertedIndex::load(&index)?;
            if terms {
                index.dump_terms(&mut *out)?;
            } else {
                for d in index.docs() {
                    writeln!(out, "{}\t{}\t{}", d.doc_id, d.ata_chapter, d.title)?;
                }
            }
        }
        Command::Ask { question, config, json } => {
            let cfg = Config::load(&config)?;
            let pipeline = cfg.pipeline()?;
            let answers = pipeline.answer(&question)?;
            let views: Vec<AnswerView> = answers.iter().map(|a| server::answer_view(&pipeline, a)).collect();
            if json {
                serde_json::to_writer_pretty(&mut *out, &views)?;
                writeln!(out)?;
            } else if views.is_empty() {
                writeln!(out, "no matching document")?;
            } else {
                for v in &views {
                    writeln!(
                        out,
                        "{}. {}  retriever={:.4} qa={:.4} tag={} combined={:.4}  {}",
                        v.rank,
                        v.doc_id,
                        v.retriever_score,
                        v.qa_score,
                        v.tag.as_str(),
                        v.combined_score,
                        v.answer_text.as_deref().unwrap_or("NO_ANSWER"),
                    )?;
                }
            }
        }
        Command::Eval(EvalCommand::Qa { dataset, config, out: dest }) => {
            let cfg = Config::load(&config)?;
            let (pipeline, examples) = if is_json(&dataset) {
                let squad = load_squad(&dataset)?;
                let index = InvertedIndex::build(squad.docs, IndexParams::default())?;
                (cfg.pipeline_over(Arc::new(index))?, squad.examples)
            } else {
                (cfg.pipeline()?, load_qa_jsonl(&dataset)?)
            };
            let report = evaluate_qa(&examples, &pipeline)?;
            if let Some(dest) = dest {
                let mut f = create(&dest)?;
                serde_json::to_writer_pretty(&mut f, &report)?;
                f.flush()?;
            }
            write!(out, "{}", report.summary())?;
        }
        Command::Eval(EvalCommand::Rank(args)) => eval_rank(args, out)?,
        Command::TrainRerank { dataset, rounds, seed, max_depth, shrinkage, split, out: dest } => {
            let sets = read_candidate_sets(&dataset)?;
            let train: Vec<&CandidateSet> = match split {
                Some(split) => split_indices(sets.len(), split, seed)?.0.into_iter().map(|i| &sets[i]).collect(),
                None => sets.iter().collect(),
            };
            let rows: Vec<_> = train.iter().flat_map(|s| s.training_rows()).collect();
            let params = GbrtParams { rounds, max_depth, shrinkage, seed };
            let (model, history) = GbrtModel::train_with_history(&rows, &params)?;
            model.save(&dest)?;
            writeln!(
                out,
                "trained {} rounds on {} rows from {} queries; mse {:.6} -> {:.6}",
                rounds,
                rows.len(),
                train.len(),
                history.first().copied().unwrap_or(0.0),
                history.last().copied().unwrap_or(0.0)
            )?;
        }
        Command::GenSynthetic { queries, candidates, seed, out: dest } => {
            let sets = synthetic_ranking_set(&SyntheticParams { queries, candidates, seed });
            let mut f = create(&dest)?;
            write_candidate_sets(&sets, &mut f)?;
            f.flush()?;
            writeln!(out, "{} queries written", sets.len())?;
        }
        Command::MakeCandidates { dataset, config, out: dest } => {
            let cfg = Config::load(&config)?;
            let pipeline = cfg.pipeline()?;
            let examples = load_qa_jsonl(&dataset)?;
            let sets = build_candidate_sets(&examples, &pipeline)?;
            let mut f = create(&dest)?;
            write_candidate_sets(&sets, &mut f)?;
            f.flush()?;
            writeln!(out, "{} candidate sets written", sets.len())?;
        }
        Command::ExportInstances { dataset, corpus, max_seq_len, stride, out: dest } => {
            let (docs, examples) = if is_json(&dataset) {
                let squad = load_squad(&dataset)?;
                (squad.docs, squad.examples)
            } else {
                let Some(corpus) = corpus else { bail!("JSONL datasets need --corpus") };
                (load_corpus(&corpus)?, load_qa_jsonl(&dataset)?)
            };
            let n = export_instances(&docs, &examples, max_seq_len, stride, &dest)?;
            writeln!(out, "{n} instances from {} examples", examples.len())?;
        }
        Command::Serve { config, port } => {
            let cfg = Config::load(&config)?;
            let port = port.unwrap_or(cfg.port);
            let state = Arc::new(AppState::new(cfg.pipeline()?, cfg.lexicon()?, cfg.session_snapshot.clone())?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(server::serve(state, port))?;
        }
    }
    Ok(())
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn export_instances(
    docs: &[manualqa_core::corpus::ProcedureDoc],
    examples: &[QaExample],
    max_seq_len: usize,
    stride: usize,
    dest: &Path,
) -> Result<usize> {
    #[derive(serde::Serialize)]
    struct Line<'a> {
        example: usize,
        passage_id: &'a str,
        #[serde(flatten)]
        instance: &'a manualqa_core::reader::TrainingInstance,
    }
    let mut f = create(dest)?;
    let mut n = 0;
    for (i, ex) in examples.iter().enumerate() {
        let doc = docs
            .iter()
            .find(|d| d.doc_id == ex.gold_doc_id)
            .with_context(|| format!("example {i}: unknown document {:?}", ex.gold_doc_id))?;
        // one instance set per gold answer; unanswerable examples get NO_SPAN windows
        let golds: Vec<Option<(&str, usize)>> = if ex.answers.is_empty() {
            vec![None]
        } else {
            ex.answers.iter().map(|a| Some((a.text.as_str(), a.char_start))).collect()
        };
        for gold in golds {
            for (p, inst) in instances_for_example(&ex.question, doc, gold, max_seq_len, stride)? {
                serde_json::to_writer(&mut f, &Line { example: i, passage_id: &p.passage_id, instance: &inst })?;
                f.write_all(b"\n")?;
                n += 1;
            }
        }
    }
    f.flush()?;
    Ok(n)
}

fn eval_rank(args: RankArgs, out: &mut dyn Write) -> Result<()> {
    let sets = read_candidate_sets(&args.dataset)?;
    let gbrt = || Ranker::TrainGbrt(GbrtParams { rounds: args.rounds, seed: args.seed, ..GbrtParams::default() });
    let rankers: Vec<Ranker> = match args.ranker.as_str() {
        "all" => ["retriever_only", "qa_only", "multiply", "zscore_add"]
            .iter()
            .map(|n| Combiner::from_name(n).map(Ranker::Fixed))
            .chain([Ok(gbrt())])
            .collect::<Result<_, _>>()?,
        "gbrt" => vec![gbrt()],
        other => match other.strip_prefix("gbrt:") {
            Some(path) => vec![Ranker::Fixed(Combiner::Gbrt(Arc::new(GbrtModel::load(Path::new(path))?)))],
            None => vec![Ranker::Fixed(Combiner::from_name(other)?)],
        },
    };
    let mut reports = Vec::new();
    writeln!(out, "{:<16}{:>8}{:>8}  metric", "ranker", "train", "test")?;
    for r in &rankers {
        let report = evaluate_ranking(&sets, r, args.split, args.seed, args.k)?;
        write!(out, "{}", report.summary())?;
        reports.push(report);
    }
    if let Some(dest) = args.out {
        let mut f = create(&dest)?;
        serde_json::to_writer_pretty(&mut f, &reports)?;
        f.flush()?;
    }
    Ok(())
}

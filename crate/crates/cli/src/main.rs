mod settings;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluentcrit::alignment::{build_alignment, parse_textgrid, AlignmentTable};
use fluentcrit::criteria::{BatchContext, BatchItem, LossWeights};
use fluentcrit::editing::{diff_words, edit_pipeline, tokenize, BaselinePredictor, EditOptions, EditPlan};
use fluentcrit::harness::{
    emit_report, evaluate_utterance, gradient_check, make_report, mcd, surrogate_utterance, synthetic_utterance,
    toy_train, EvalItem, ReportDoc, RunConfig, UtteranceRow,
};
use fluentcrit::masking::{apply_mask, select_word_mask, MaskSpec};
use fluentcrit::spectral::{compute_mel, read_mel, read_wav, write_mel, MelConfig, MelSpectrogram};
use serde_json::json;

use settings::{Settings, SEED_ENV};

#[derive(Parser)]
#[command(name = "fluentcrit", version, about = "Fluency-aware criteria for speech editing")]
struct Cli {
    /// TOML file of `key = value` settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice (default from FLUENTCRIT_SEED, else 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct LossFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Log-mel spectrogram of a mono 16-bit WAV file.
    Featurize {
        wav: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    /// Frame-level alignment table from a TextGrid and its spectrogram.
    Align {
        textgrid: PathBuf,
        melf: PathBuf,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Word-aligned mask covering about `lambda` of the speech.
    Mask {
        melf: PathBuf,
        alignment: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(short)]
        o: Option<PathBuf>,
        /// Also write the spectrogram with the span replaced by noise.
        #[arg(long)]
        masked: Option<PathBuf>,
    },
    /// Loss breakdown, MCD and boundary discontinuity of a prediction.
    Loss {
        pred: PathBuf,
        gt: PathBuf,
        alignment: PathBuf,
        mask: PathBuf,
        #[command(flatten)]
        weights: LossFlags,
        /// Contrastive negatives; a perturbed copy of the ground truth when absent.
        #[arg(long = "negative")]
        negatives: Vec<PathBuf>,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Apply a word-level edit plan to a spectrogram.
    Edit {
        melf: PathBuf,
        alignment: PathBuf,
        #[arg(long, conflicts_with_all = ["orig", "new"], required_unless_present = "orig")]
        plan: Option<PathBuf>,
        #[arg(long, requires = "new")]
        orig: Option<String>,
        #[arg(long, requires = "orig")]
        new: Option<String>,
        #[arg(long)]
        frames_per_word: Option<f64>,
        #[arg(short)]
        o: PathBuf,
        /// Also write the plan used.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
    /// Mel-cepstral distortion in dB.
    Mcd {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long)]
        n_ceps: Option<usize>,
    },
    /// Compare the analytic gradient with central differences.
    Gradcheck {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Fit masked frames of synthetic utterances by gradient descent.
    Toytrain {
        /// Run each seed with and without the boundary term and compare.
        #[arg(long)]
        ablate_hlac: bool,
        #[arg(long, default_value_t = 20)]
        runs: u64,
        #[arg(long, default_value_t = 8)]
        words: usize,
        #[arg(long, default_value_t = 16)]
        mels: usize,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[command(flatten)]
        weights: LossFlags,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Merge row files (a row, a list of rows, or a report) into one report.
    Report {
        #[arg(required = true)]
        rows: Vec<PathBuf>,
        #[arg(short)]
        o: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Internal(String),
}

impl From<fluentcrit::Error> for Failure {
    fn from(e: fluentcrit::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn settings(cli: &Cli) -> Outcome<Settings> {
    let env = std::env::var(SEED_ENV).ok();
    let mut s = Settings::from_env(env.as_deref()).map_err(Failure::Validation)?;
    if let Some(path) = &cli.config {
        s.load_file(path).map_err(Failure::Validation)?;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn apply_loss_flags(s: &mut Settings, f: &LossFlags) {
    s.alpha = f.alpha.unwrap_or(s.alpha);
    s.beta = f.beta.unwrap_or(s.beta);
    s.gamma = f.gamma.unwrap_or(s.gamma);
    s.tau = f.tau.unwrap_or(s.tau);
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_mel(path: &Path) -> Outcome<MelSpectrogram> {
    read_mel(open(path)?).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_alignment(path: &Path, mel: &MelSpectrogram) -> Outcome<AlignmentTable> {
    let table = AlignmentTable::from_json(&read_text(path)?)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    if table.n_frames() != mel.n_frames() {
        return Err(Failure::Validation(format!(
            "alignment covers {} frames, spectrogram has {}",
            table.n_frames(),
            mel.n_frames()
        )));
    }
    Ok(table)
}

fn save_mel(mel: &MelSpectrogram, path: &Path) -> Outcome {
    let file = File::create(path).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
    let mut sink = BufWriter::new(file);
    write_mel(mel, &mut sink)?;
    sink.flush().map_err(|e| Failure::Internal(e.to_string()))
}

/// Writes `text` to `path`, or to stdout.
fn emit(text: &str, path: Option<&Path>) -> Outcome {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Internal(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Internal(e.to_string())),
    }
}

fn emit_doc(doc: &ReportDoc, path: Option<&Path>) -> Outcome {
    let mut buf = Vec::new();
    emit_report(doc, &mut buf)?;
    emit(&String::from_utf8_lossy(&buf), path)
}

fn run_config(s: &Settings, seeds: Vec<u64>) -> RunConfig {
    RunConfig { weights: s.weights(), tau: s.tau, lambda: s.lambda, seeds }
}

fn run(cli: Cli) -> Outcome {
    let mut s = settings(&cli)?;
    match &cli.command {
        Command::Featurize { wav, o } => {
            let clip = read_wav(open(wav)?)?;
            let mel = compute_mel(&clip, &MelConfig::default())?;
            save_mel(&mel, o)
        }
        Command::Align { textgrid, melf, o } => {
            let doc = parse_textgrid(&read_text(textgrid)?)?;
            let mel = load_mel(melf)?;
            let table = build_alignment(&doc, mel.n_frames(), mel.config())?;
            emit(&table.to_json()?, o.as_deref())
        }
        Command::Mask { melf, alignment, lambda, o, masked } => {
            s.lambda = lambda.unwrap_or(s.lambda);
            let mel = load_mel(melf)?;
            let table = load_alignment(alignment, &mel)?;
            let spec = select_word_mask(&table, s.lambda, s.seed)?;
            if let Some(path) = masked {
                save_mel(&apply_mask(&mel, &spec, s.seed)?, path)?;
            }
            emit(&spec.to_json()?, o.as_deref())
        }
        Command::Loss { pred, gt, alignment, mask, weights, negatives, o } => {
            apply_loss_flags(&mut s, weights);
            let pred = load_mel(pred)?;
            let gt = load_mel(gt)?;
            let table = load_alignment(alignment, &gt)?;
            let spec = MaskSpec::from_json(&read_text(mask)?)?;
            spec.validate(&table)?;
            let (pred, gt) = (pred.to_f64(), gt.to_f64());
            let others = if negatives.is_empty() {
                let surrogate = surrogate_utterance(&gt, s.seed);
                vec![BatchItem::from_standin(surrogate.view(), spec.span())?]
            } else {
                negatives
                    .iter()
                    .map(|p| {
                        let m = load_mel(p)?.to_f64();
                        // the negative's own span, clipped to its length
                        let end = spec.end.min(m.nrows());
                        let start = spec.start.min(end.saturating_sub(1));
                        Ok(BatchItem::from_standin(m.view(), start..end)?)
                    })
                    .collect::<Outcome<Vec<_>>>()?
            };
            let batch = BatchContext::new(others);
            let id = gt_id(&cli.command);
            let item = EvalItem { id: &id, pred: pred.view(), gt: gt.view(), table: &table, spec: &spec };
            let weights = s.weights();
            let row = evaluate_utterance(&item, Some((&batch, &weights, s.tau)))?;
            emit_doc(&make_report(vec![row], run_config(&s, vec![spec.seed]))?, o.as_deref())
        }
        Command::Edit { melf, alignment, plan, orig, new, frames_per_word, o, plan_out } => {
            let mel = load_mel(melf)?;
            let table = load_alignment(alignment, &mel)?;
            let plan = match (plan, orig, new) {
                (Some(p), _, _) => EditPlan::from_json(&read_text(p)?)?,
                (None, Some(a), Some(b)) => diff_words(&tokenize(a), &tokenize(b)),
                _ => return Err(Failure::Validation("give --plan or both --orig and --new".into())),
            };
            let opts = EditOptions { frames_per_word: frames_per_word.or(s.frames_per_word) };
            let edited = edit_pipeline(&mel, &table, &plan, &BaselinePredictor, &opts)?;
            if let Some(path) = plan_out {
                emit(&plan.to_json()?, Some(path))?;
            }
            save_mel(&edited, o)
        }
        Command::Mcd { pred, gt, n_ceps } => {
            let n_ceps = n_ceps.unwrap_or(s.n_ceps);
            let value = mcd(&load_mel(pred)?, &load_mel(gt)?, n_ceps)?;
            emit(&format!("{value}"), None)
        }
        Command::Gradcheck { trials, h, tol } => {
            s.trials = trials.unwrap_or(s.trials);
            s.h = h.unwrap_or(s.h);
            let summary = gradient_check(s.trials, s.h, s.seed)?;
            let pass = summary.max_rel_err < *tol && summary.nonzero_outside_span == 0;
            let out = json!({ "summary": summary, "tolerance": tol, "pass": pass });
            emit(&serde_json::to_string_pretty(&out).map_err(|e| Failure::Internal(e.to_string()))?, None)?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Internal(format!("max relative error {:e} exceeds {tol:e}", summary.max_rel_err)))
            }
        }
        Command::Toytrain { ablate_hlac, runs, words, mels, lambda, steps, lr, weights, o } => {
            s.lambda = lambda.unwrap_or(s.lambda);
            s.steps = steps.unwrap_or(s.steps);
            s.lr = lr.unwrap_or(s.lr);
            apply_loss_flags(&mut s, weights);
            let out = toytrain(&s, *ablate_hlac, *runs, *words, *mels)?;
            emit(&serde_json::to_string_pretty(&out).map_err(|e| Failure::Internal(e.to_string()))?, o.as_deref())
        }
        Command::Report { rows, o } => {
            let mut all = Vec::new();
            for path in rows {
                all.extend(read_rows(path)?);
            }
            emit_doc(&make_report(all, run_config(&s, vec![s.seed]))?, o.as_deref())
        }
    }
}

/// Row id for `loss`: the ground-truth file stem.
fn gt_id(cmd: &Command) -> String {
    match cmd {
        Command::Loss { gt, .. } => gt.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        _ => String::new(),
    }
}

fn read_rows(path: &Path) -> Outcome<Vec<UtteranceRow>> {
    let bad = |e: serde_json::Error| Failure::Validation(format!("{}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&read_text(path)?).map_err(bad)?;
    if value.get("rows").is_some() {
        Ok(serde_json::from_value::<ReportDoc>(value).map_err(bad)?.rows)
    } else if value.is_array() {
        serde_json::from_value(value).map_err(bad)
    } else {
        Ok(vec![serde_json::from_value(value).map_err(bad)?])
    }
}

fn toytrain(s: &Settings, ablate: bool, runs: u64, words: usize, mels: usize) -> Outcome<serde_json::Value> {
    if runs == 0 {
        return Err(Failure::Validation("--runs must be at least 1".into()));
    }
    let one = |seed: u64, weights: LossWeights| -> Outcome<_> {
        let u = synthetic_utterance(words, mels, seed)?;
        let spec = select_word_mask(&u.table, s.lambda, seed)?;
        Ok(toy_train(&u.mel, &u.table, &spec, &weights, s.tau, s.steps, s.lr, seed)?)
    };
    let seeds: Vec<u64> = (0..runs).map(|k| s.seed.wrapping_add(k)).collect();
    if !ablate {
        let rows = seeds
            .iter()
            .map(|&seed| {
                let r = one(seed, s.weights())?;
                Ok(json!({
                    "seed": seed,
                    "initial_loss": r.trajectory[0],
                    "final_loss": r.final_loss,
                    "initial_boundary_discontinuity": r.initial_boundary_discontinuity,
                    "final_boundary_discontinuity": r.final_boundary_discontinuity,
                    "final_learning_rate": r.final_learning_rate,
                }))
            })
            .collect::<Outcome<Vec<_>>>()?;
        return Ok(json!({ "steps": s.steps, "learning_rate": s.lr, "runs": rows }));
    }
    let off_weights = LossWeights { alpha: 0.0, ..s.weights() };
    let mut rows = Vec::new();
    let (mut sum_on, mut sum_off, mut wins) = (0.0, 0.0, 0usize);
    for &seed in &seeds {
        let on = one(seed, s.weights())?.final_boundary_discontinuity;
        let off = one(seed, off_weights)?.final_boundary_discontinuity;
        sum_on += on;
        sum_off += off;
        wins += usize::from(on <= off);
        rows.push(json!({ "seed": seed, "with_hlac": on, "without_hlac": off }));
    }
    let n = seeds.len() as f64;
    let (mean_on, mean_off) = (sum_on / n, sum_off / n);
    let reduction = if mean_off > 0.0 { 1.0 - mean_on / mean_off } else { 0.0 };
    Ok(json!({
        "steps": s.steps,
        "learning_rate": s.lr,
        "alpha": s.alpha,
        "runs": rows,
        "wins": wins,
        "mean_with_hlac": mean_on,
        "mean_without_hlac": mean_off,
        "mean_reduction": reduction,
    }))
}

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use subspace_shot_core::harness::format_summary;
use subspace_shot_core::{
    confidence_interval, gen_synthetic, load_bank, predict_labels, run_benchmark, save_bank, solve,
    BankFormat, BenchmarkReport, Decomposition, EmbeddingBank, EpisodeMatrices, EpisodeSpec,
    LoadOptions, Matrix, Method, SyntheticSpec,
};

use crate::args::{BankArgs, Command, DecomposeArgs, DumpFormat, EvaluateArgs, GenSynthArgs};
use crate::error::CliError;
use crate::manifest::{InputDigest, RunManifest};

#[derive(Debug, Serialize)]
pub struct EvaluationOutput {
    pub manifest: RunManifest,
    pub reports: Vec<BenchmarkReport>,
    pub aggregate: Aggregate,
}

/// Mean of the per-run means and the 95% halfwidth across runs. With a single
/// run these are that run's own mean and halfwidth.
#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
    pub summary: String,
}

#[derive(Debug, Serialize)]
pub struct DecomposeOutput {
    pub manifest: RunManifest,
    pub classes: Vec<String>,
    pub support_labels: Vec<usize>,
    pub query_labels: Vec<usize>,
    pub predicted_labels: Vec<usize>,
    pub decomposition: Decomposition,
}

#[derive(Debug, Serialize)]
pub struct GenSynthOutput {
    pub manifest: RunManifest,
    pub bank: InputDigest,
    pub classes: usize,
    pub dim: usize,
    pub vectors: usize,
}

/// Writes `text` to `out`, or to stdout with a trailing newline.
pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn load(args: &BankArgs) -> Result<(EmbeddingBank, InputDigest), CliError> {
    let digest = InputDigest::of_file(&args.bank)?;
    let bank = load_bank(
        &args.bank,
        args.format(),
        LoadOptions {
            allow_negative: args.allow_negative,
        },
    )?;
    Ok((bank, digest))
}

pub fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Evaluate(args) => {
            let output = evaluate(args)?;
            for report in &output.reports {
                eprintln!("{}", report.summary_line());
                if let Some(warning) = &report.warning {
                    log::warn!("{warning}");
                }
            }
            if output.reports.len() > 1 {
                eprintln!(
                    "{} (over {} runs)",
                    output.aggregate.summary, output.aggregate.runs
                );
            }
            emit(&serde_json::to_string_pretty(&output)?, args.out.as_deref())
        }
        Command::Decompose(args) => decompose(args),
        Command::GenSynth(args) => {
            let output = gen_synth(args)?;
            emit(&serde_json::to_string_pretty(&output)?, None)
        }
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<EvaluationOutput, CliError> {
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let (bank, digest) = load(&args.bank)?;
    let method = Method::from(args.method);
    let cfg = args.solver.config(args.seed);
    let mut reports = Vec::with_capacity(args.repeats);
    for r in 0..args.repeats {
        let spec = EpisodeSpec {
            n_way: args.n_way,
            k_shot: args.k_shot,
            n_query_per_class: args.n_query,
            n_episodes: args.episodes,
            seed: args.seed.wrapping_add(r as u64),
            l2_normalize_columns: args.bank.l2_normalize_columns,
        };
        reports.push(run_benchmark(&bank, &spec, method, &cfg)?);
    }
    let aggregate = if reports.len() == 1 {
        Aggregate {
            runs: 1,
            mean_accuracy: reports[0].mean_accuracy,
            ci95_halfwidth: reports[0].ci95_halfwidth,
            summary: reports[0].summary_line(),
        }
    } else {
        let means: Vec<f64> = reports.iter().map(|r| r.mean_accuracy).collect();
        let (mean, halfwidth) = confidence_interval(&means)?;
        Aggregate {
            runs: reports.len(),
            mean_accuracy: mean,
            ci95_halfwidth: halfwidth,
            summary: format_summary(method.name(), mean, halfwidth),
        }
    };
    let manifest = RunManifest::new(
        Command::Evaluate(args.clone()),
        Some(args.seed),
        vec![digest],
    );
    Ok(EvaluationOutput {
        manifest,
        reports,
        aggregate,
    })
}

fn resolve_class(bank: &EmbeddingBank, key: &str) -> Result<usize, CliError> {
    if let Some(i) = bank.class_index(key) {
        return Ok(i);
    }
    match key.parse::<usize>() {
        Ok(i) if i < bank.n_classes() => Ok(i),
        _ => Err(CliError::Usage(format!("unknown class {key:?}"))),
    }
}

pub fn build_decompose_output(args: &DecomposeArgs) -> Result<DecomposeOutput, CliError> {
    let (bank, digest) = load(&args.bank)?;
    let classes = args
        .classes
        .iter()
        .map(|k| resolve_class(&bank, k))
        .collect::<Result<Vec<_>, _>>()?;
    let needed = args.offset + args.k_shot + args.n_query;
    let mut support = Vec::new();
    let mut support_labels = Vec::new();
    let mut queries = Vec::new();
    let mut query_labels = Vec::new();
    for (label, &class) in classes.iter().enumerate() {
        if bank.class_len(class) < needed {
            return Err(subspace_shot_core::Error::InfeasibleSpec(format!(
                "class {:?} has {} vectors, selection needs {needed}",
                bank.classes()[class].name,
                bank.class_len(class)
            ))
            .into());
        }
        for k in args.offset..args.offset + args.k_shot {
            support.push(bank.vector(class, k));
            support_labels.push(label);
        }
        for k in args.offset + args.k_shot..needed {
            queries.push(bank.vector(class, k));
            query_labels.push(label);
        }
    }
    let columns: Vec<Vec<f64>> = support
        .iter()
        .chain(&queries)
        .map(|v| v.iter().map(|&x| f64::from(x)).collect())
        .collect();
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let h = Matrix::from_columns(bank.dim(), &refs)?;
    let mut ep = EpisodeMatrices::new(h, classes.len(), support_labels.clone())?;
    if args.bank.l2_normalize_columns {
        ep = ep.l2_normalized();
    }
    let decomposition = solve(&ep, &args.solver.config(0))?;
    let predicted_labels = predict_labels(&decomposition, &ep);
    Ok(DecomposeOutput {
        manifest: RunManifest::new(Command::Decompose(args.clone()), None, vec![digest]),
        classes: classes
            .iter()
            .map(|&c| bank.classes()[c].name.clone())
            .collect(),
        support_labels,
        query_labels,
        predicted_labels,
        decomposition,
    })
}

fn matrix_csv(m: &Matrix, path: &Path) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Core(e.into()))?;
    for i in 0..m.rows() {
        writer
            .write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(|e| CliError::Core(e.into()))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

fn decompose(args: &DecomposeArgs) -> Result<(), CliError> {
    let output = build_decompose_output(args)?;
    match args.format {
        DumpFormat::Json => emit(&serde_json::to_string_pretty(&output)?, args.out.as_deref()),
        DumpFormat::Csv => {
            let dir = args
                .out
                .as_deref()
                .ok_or_else(|| CliError::Usage("--format csv requires --out <dir>".into()))?;
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let dec = &output.decomposition;
            matrix_csv(&dec.basis, &dir.join("basis.csv"))?;
            matrix_csv(&dec.coefficients, &dir.join("coefficients.csv"))?;
            let trace_path = dir.join("trace.csv");
            let mut writer =
                csv::Writer::from_path(&trace_path).map_err(|e| CliError::Core(e.into()))?;
            writer
                .write_record(["sweep", "objective"])
                .map_err(|e| CliError::Core(e.into()))?;
            for (i, v) in dec.objective_trace.iter().enumerate() {
                writer
                    .write_record([i.to_string(), v.to_string()])
                    .map_err(|e| CliError::Core(e.into()))?;
            }
            writer.flush().map_err(|e| CliError::io(&trace_path, e))?;
            let manifest_path = dir.join("manifest.json");
            fs::write(
                &manifest_path,
                serde_json::to_string_pretty(&output.manifest)?,
            )
            .map_err(|e| CliError::io(&manifest_path, e))
        }
    }
}

pub fn gen_synth(args: &GenSynthArgs) -> Result<GenSynthOutput, CliError> {
    let bank = gen_synthetic(&SyntheticSpec {
        n_classes: args.classes,
        per_class: args.per_class,
        dim: args.dim,
        noise_sigma: args.noise,
        style: args.style.into(),
        seed: args.seed,
    })?;
    let format = args
        .format
        .map(BankFormat::from)
        .unwrap_or_else(|| BankFormat::from_path(&args.out));
    save_bank(&bank, &args.out, format)?;
    Ok(GenSynthOutput {
        manifest: RunManifest::new(Command::GenSynth(args.clone()), Some(args.seed), vec![]),
        bank: InputDigest::of_file(&args.out)?,
        classes: bank.n_classes(),
        dim: bank.dim(),
        vectors: bank.total_vectors(),
    })
}

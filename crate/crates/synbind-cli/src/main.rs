//! Command-line entry point wiring extraction, loss evaluation, optimization
//! runs, prompt generation, and metric computation.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric divergence. Progress goes
//! to stderr; machine output goes to stdout or the requested files only, so
//! reruns with the same seed and config are byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use synbind::attention::{read_tensor_csv, read_tensor_json, AttentionTensor, PieceAlignment};
use synbind::binding::{extract_all, parse_conllu, BindingDocument};
use synbind::dvmp::{
    generate_dataset, swap_counterpart, write_gold_jsonl, write_prompts_txt, DvmpError,
};
use synbind::harness::{
    init_latent, run, separation_metrics, write_snapshots, write_trajectory_jsonl, HarnessError,
    ScheduleConfig, Trajectory,
};
use synbind::loss::loss_total;
use synbind::metrics::{read_records_csv, read_records_jsonl, summarize, write_summary_json};

#[derive(Parser)]
#[command(name = "synbind", version, about = "Syntax-driven binding control for attention maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract binding sets from a CoNLL-U file into JSON lines
    Extract {
        /// CoNLL-U input file
        #[arg(long)]
        input: PathBuf,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the binding losses on a dumped attention tensor
    Loss {
        /// Attention tensor as .json ({"grid_side", "maps"}) or .csv
        #[arg(long)]
        maps: PathBuf,
        /// Bindings JSONL produced by `extract`
        #[arg(long)]
        bindings: PathBuf,
        /// Which sentence of the bindings file to use
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Grid side for CSV input (JSON carries its own)
        #[arg(long, default_value_t = 16)]
        grid_side: usize,
        /// Optional piece alignment JSON: {"word": [piece, ...], ...}
        #[arg(long)]
        pieces: Option<PathBuf>,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the latent gradient-intervention schedule on the toy model
    Optimize {
        /// Bindings JSONL produced by `extract`
        #[arg(long)]
        bindings: PathBuf,
        /// Which sentence of the bindings file to use
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Flat JSON run config; toy defaults when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's rng_seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for trajectory.jsonl and snapshots/
        #[arg(long)]
        out: PathBuf,
        /// Toggle PGM map snapshots
        #[arg(long, value_enum, default_value_t = SnapshotMode::On)]
        snapshots: SnapshotMode,
    },
    /// Generate the diverse visual-modifier prompt set with gold bindings
    GenDvmp {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 600)]
        count: usize,
        /// Output directory for prompts.txt and prompts.jsonl
        #[arg(long)]
        out: PathBuf,
        /// Also write modifier-swapped counterparts for eligible records
        #[arg(long)]
        swap: bool,
    },
    /// Compute proper/improper binding and entity neglect from annotations
    Eval {
        /// Annotation records as .csv (with header) or .jsonl
        #[arg(long)]
        input: PathBuf,
        /// Include macro-averaged variants in the summary
        #[arg(long = "macro")]
        include_macro: bool,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SnapshotMode {
    On,
    Off,
}

/// Flat per-run configuration; unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    grid_side: usize,
    /// Token count of the prompt; defaults to the largest index in the
    /// bindings document.
    n_tokens: Option<usize>,
    total_steps: usize,
    intervention_steps: usize,
    scale_factor: f64,
    drift_stddev: f64,
    rng_seed: u64,
    snapshot_every: usize,
    blowup_limit: f64,
    /// Piece counts per word for multi-piece prompts: {"6": 2} splits word 6.
    pieces: Option<BTreeMap<usize, usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let toy = ScheduleConfig::toy();
        RunConfig {
            grid_side: 16,
            n_tokens: None,
            total_steps: toy.total_steps,
            intervention_steps: toy.intervention_steps,
            scale_factor: toy.scale_factor,
            drift_stddev: toy.drift_stddev,
            rng_seed: toy.rng_seed,
            snapshot_every: toy.snapshot_every,
            blowup_limit: toy.blowup_limit,
            pieces: None,
        }
    }
}

enum CliError {
    Input(String),
    Divergence(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Divergence(m) => m,
        }
    }

    fn input(context: impl std::fmt::Display) -> Self {
        CliError::Input(context.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Divergence { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

macro_rules! input_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Input(e.to_string())
            }
        })*
    };
}

input_error_from!(
    std::io::Error,
    serde_json::Error,
    synbind::binding::ConlluError,
    synbind::attention::AttentionError,
    synbind::loss::LossError,
    synbind::metrics::MetricsError,
    DvmpError
);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Extract { input, out } => cmd_extract(&input, out.as_deref()),
        Command::Loss {
            maps,
            bindings,
            index,
            grid_side,
            pieces,
            out,
        } => cmd_loss(&maps, &bindings, index, grid_side, pieces.as_deref(), out.as_deref()),
        Command::Optimize {
            bindings,
            index,
            config,
            seed,
            out,
            snapshots,
        } => cmd_optimize(&bindings, index, config.as_deref(), seed, &out, snapshots),
        Command::GenDvmp {
            seed,
            count,
            out,
            swap,
        } => cmd_gen_dvmp(seed, count, &out, swap),
        Command::Eval {
            input,
            include_macro,
            out,
        } => cmd_eval(&input, include_macro, out.as_deref()),
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format_args!("cannot read {}: {e}", path.display())))
}

/// Writes to the file at `out` or to stdout.
fn open_sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Ok(Box::new(BufWriter::new(File::create(path)?)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn cmd_extract(input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = read_to_string(input)?;
    let graphs = parse_conllu(&text)?;
    log::info!("parsed {} sentence(s) from {}", graphs.len(), input.display());
    let mut sink = open_sink(out)?;
    for graph in &graphs {
        let sets = extract_all(graph);
        let doc = BindingDocument::from_graph(graph, &sets);
        serde_json::to_writer(&mut sink, &doc)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

fn load_bindings(path: &Path, index: usize) -> Result<BindingDocument, CliError> {
    let text = read_to_string(path)?;
    let docs: Vec<BindingDocument> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    docs.into_iter().nth(index).ok_or_else(|| {
        CliError::input(format_args!(
            "bindings file {} has no sentence at index {index}",
            path.display()
        ))
    })
}

fn load_tensor(path: &Path, grid_side: usize) -> Result<AttentionTensor, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::input(format_args!("cannot read {}: {e}", path.display())))?;
    let is_csv = path.extension().map(|e| e == "csv").unwrap_or(false);
    if is_csv {
        Ok(read_tensor_csv(BufReader::new(file), grid_side)?)
    } else {
        Ok(read_tensor_json(BufReader::new(file))?)
    }
}

fn load_alignment(
    pieces: Option<&Path>,
    n_words: usize,
) -> Result<PieceAlignment, CliError> {
    match pieces {
        Some(path) => {
            let mut text = String::new();
            File::open(path)
                .map_err(|e| CliError::input(format_args!("cannot read {}: {e}", path.display())))?
                .read_to_string(&mut text)?;
            let map: BTreeMap<usize, Vec<usize>> = serde_json::from_str(&text)?;
            Ok(PieceAlignment::from_map(map)?)
        }
        None => Ok(PieceAlignment::identity(n_words)),
    }
}

fn cmd_loss(
    maps: &Path,
    bindings: &Path,
    index: usize,
    grid_side: usize,
    pieces: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let doc = load_bindings(bindings, index)?;
    let tensor = load_tensor(maps, grid_side)?;
    let align = load_alignment(pieces, doc.max_token_index().max(tensor.n_maps()))?;
    align.validate_rows(tensor.n_maps())?;
    let sets = doc.to_extracted_sets();
    let report = loss_total(&tensor, &sets, &align)?;
    let mut sink = open_sink(out)?;
    serde_json::to_writer_pretty(&mut sink, &report)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

/// Endpoint summary of an optimization run, printed on stdout.
#[derive(Debug, Serialize)]
struct RunSummary {
    steps: usize,
    initial_l_pos: f64,
    initial_l_neg: f64,
    initial_l_total: f64,
    final_l_pos: f64,
    final_l_neg: f64,
    final_l_total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_mean_pair: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_mean_pair: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_mean_unmatched: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_mean_unmatched: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_separation_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_separation_ratio: Option<f64>,
}

impl RunSummary {
    fn from_trajectory(traj: &Trajectory) -> Self {
        let first = &traj.records[0].report;
        let last = &traj.records[traj.records.len() - 1].report;
        let summary = separation_metrics(traj);
        let ends = |series: &Option<Vec<f64>>| {
            let s = series.as_ref()?;
            Some((*s.first()?, *s.last()?))
        };
        let pair = ends(&summary.mean_pair);
        let unmatched = ends(&summary.mean_unmatched);
        let ratio = ends(&summary.ratio);
        RunSummary {
            steps: traj.records.len(),
            initial_l_pos: first.l_pos,
            initial_l_neg: first.l_neg,
            initial_l_total: first.l_total,
            final_l_pos: last.l_pos,
            final_l_neg: last.l_neg,
            final_l_total: last.l_total,
            initial_mean_pair: pair.map(|(a, _)| a),
            final_mean_pair: pair.map(|(_, b)| b),
            initial_mean_unmatched: unmatched.map(|(a, _)| a),
            final_mean_unmatched: unmatched.map(|(_, b)| b),
            initial_separation_ratio: ratio.map(|(a, _)| a),
            final_separation_ratio: ratio.map(|(_, b)| b),
        }
    }
}

fn cmd_optimize(
    bindings: &Path,
    index: usize,
    config_path: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    snapshots: SnapshotMode,
) -> Result<(), CliError> {
    let mut config: RunConfig = match config_path {
        Some(path) => serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| CliError::input(format_args!("bad config {}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        config.rng_seed = seed;
    }
    if matches!(snapshots, SnapshotMode::Off) {
        config.snapshot_every = 0;
    }

    let doc = load_bindings(bindings, index)?;
    let sets = doc.to_extracted_sets();
    let max_index = doc.max_token_index();
    let n_tokens = config.n_tokens.unwrap_or(max_index);
    if n_tokens < max_index {
        return Err(CliError::input(format_args!(
            "n_tokens {n_tokens} is smaller than the largest bound token index {max_index}"
        )));
    }
    if n_tokens == 0 {
        return Err(CliError::input("the selected sentence has no bound tokens; nothing to optimize"));
    }
    let align = match &config.pieces {
        Some(counts) => {
            let mut all = vec![1usize; n_tokens];
            for (&word, &count) in counts {
                if word == 0 || word > n_tokens {
                    return Err(CliError::input(format_args!(
                        "pieces key {word} is outside 1..={n_tokens}"
                    )));
                }
                all[word - 1] = count;
            }
            PieceAlignment::from_piece_counts(&all)?
        }
        None => PieceAlignment::identity(n_tokens),
    };

    let schedule = ScheduleConfig {
        total_steps: config.total_steps,
        intervention_steps: config.intervention_steps,
        scale_factor: config.scale_factor,
        drift_stddev: config.drift_stddev,
        rng_seed: config.rng_seed,
        snapshot_every: config.snapshot_every,
        blowup_limit: config.blowup_limit,
    };
    let initial = init_latent(align.n_pieces(), config.grid_side, config.rng_seed)?;
    log::info!(
        "optimizing {} map rows on a {g}x{g} grid for {} steps ({} interventions)",
        align.n_pieces(),
        schedule.total_steps,
        schedule.intervention_steps,
        g = config.grid_side
    );
    let traj = run(&initial, &sets, &align, &schedule)?;

    std::fs::create_dir_all(out)?;
    let mut jsonl = BufWriter::new(File::create(out.join("trajectory.jsonl"))?);
    write_trajectory_jsonl(&traj, &mut jsonl)?;
    jsonl.flush()?;
    if !traj.snapshots.is_empty() {
        write_snapshots(&traj, &out.join("snapshots"))?;
    }
    let summary = RunSummary::from_trajectory(&traj);
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, &summary)?;
    lock.write_all(b"\n")?;
    Ok(())
}

fn mix_seed(seed: u64, index: usize) -> u64 {
    let mut x = seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^ (x >> 31)
}

fn cmd_gen_dvmp(seed: u64, count: usize, out: &Path, swap: bool) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::input("count must be at least 1"));
    }
    let records = generate_dataset(seed, count)?;
    std::fs::create_dir_all(out)?;
    let mut txt = BufWriter::new(File::create(out.join("prompts.txt"))?);
    write_prompts_txt(&records, &mut txt)?;
    txt.flush()?;
    let mut jsonl = BufWriter::new(File::create(out.join("prompts.jsonl"))?);
    write_gold_jsonl(&records, &mut jsonl)?;
    jsonl.flush()?;
    log::info!("wrote {} prompts to {}", records.len(), out.display());

    if swap {
        let mut swapped = Vec::new();
        let mut skipped = 0usize;
        for (i, record) in records.iter().enumerate() {
            if record.gold_sets.len() < 2 {
                continue;
            }
            match swap_counterpart(record, mix_seed(seed, i)) {
                Ok(counterpart) => swapped.push(counterpart),
                Err(DvmpError::NoCoherentSwap(_)) => skipped += 1,
                Err(e) => return Err(e.into()),
            }
        }
        let mut txt = BufWriter::new(File::create(out.join("swapped.txt"))?);
        write_prompts_txt(&swapped, &mut txt)?;
        txt.flush()?;
        let mut jsonl = BufWriter::new(File::create(out.join("swapped.jsonl"))?);
        write_gold_jsonl(&swapped, &mut jsonl)?;
        jsonl.flush()?;
        log::info!(
            "wrote {} swapped counterparts ({skipped} had no coherent swap)",
            swapped.len()
        );
    }
    Ok(())
}

fn cmd_eval(input: &Path, include_macro: bool, out: Option<&Path>) -> Result<(), CliError> {
    let file = File::open(input)
        .map_err(|e| CliError::input(format_args!("cannot read {}: {e}", input.display())))?;
    let is_csv = input.extension().map(|e| e == "csv").unwrap_or(false);
    let records = if is_csv {
        read_records_csv(file)?
    } else {
        read_records_jsonl(BufReader::new(file))?
    };
    let summary = summarize(&records, include_macro)?;
    let mut sink = open_sink(out)?;
    write_summary_json(&summary, &mut sink)?;
    sink.flush()?;
    Ok(())
}

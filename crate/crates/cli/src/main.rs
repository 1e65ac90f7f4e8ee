mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use segeval::analysis::FpDenominator;
use segeval::ranking::RankNormalization;
use segeval::{Connectivity, EvalConfig, HausdorffMode, IgnorePolicy, VolumeMetric};

/// Evaluation, ranking and fusion of lesion segmentations stored as NIfTI-1 volumes.
#[derive(Debug, Parser)]
#[command(name = "segeval", version, about)]
struct Cli {
    /// Worker threads for batch evaluation, bootstrap and maps. Defaults to all cores.
    #[arg(long, global = true, env = "SEG_EVAL_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one prediction against one reference and print the metrics as JSON.
    Evaluate(EvaluateArgs),
    /// Score every row of a manifest and write a result table CSV.
    Batch(BatchArgs),
    /// Rank methods from a result table CSV.
    Rank(RankArgs),
    /// Cluster boundaries from rank-ordered confidence intervals.
    Clusters(ClustersArgs),
    /// Fuse several segmentations with STAPLE.
    Staple(StapleArgs),
    /// Voxel-wise false-negative and false-positive rate maps.
    Maps(MapsArgs),
    /// Lesion volume and count distribution of reference segmentations.
    Cohort(CohortArgs),
    /// Generate synthetic reference/prediction pairs and a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IgnoreArg {
    /// Drop label-2 voxels from both volumes.
    Exclude,
    /// Count label-2 voxels as background.
    Background,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HausdorffArg {
    /// Larger of the two directed 95th percentiles.
    MaxDirected,
    /// 95th percentile of both directions pooled.
    Pooled,
}

#[derive(Debug, Clone, Args)]
struct EvalFlags {
    /// Lesion connectivity (6, 18 or 26).
    #[arg(long, default_value = "26")]
    connectivity: Connectivity,
    /// Treatment of reference label 2.
    #[arg(long, value_enum, default_value = "exclude")]
    ignore: IgnoreArg,
    /// How directed surface distances combine into H95.
    #[arg(long, value_enum, default_value = "max-directed")]
    hausdorff: HausdorffArg,
}

impl EvalFlags {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            connectivity: self.connectivity,
            ignore: ignore_policy(self.ignore),
            hausdorff: match self.hausdorff {
                HausdorffArg::MaxDirected => HausdorffMode::MaxDirected,
                HausdorffArg::Pooled => HausdorffMode::Pooled,
            },
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    reference: PathBuf,
    prediction: PathBuf,
    #[command(flatten)]
    eval: EvalFlags,
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// CSV with method_id, subject_id, scanner_id, reference_path, prediction_path.
    /// Relative paths resolve against the manifest's directory.
    manifest: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    eval: EvalFlags,
}

#[derive(Debug, Args)]
struct RankArgs {
    results: PathBuf,
    /// Bootstrap replicates; 0 disables intervals and clusters.
    #[arg(long, default_value_t = 2000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confidence level of the bootstrap intervals.
    #[arg(long, default_value_t = 0.95)]
    ci: f64,
    /// Volume agreement metric entering the final rank (lavd or avd).
    #[arg(long, default_value = "lavd")]
    volume_metric: VolumeMetric,
    /// Add the inter-scanner robustness ranking.
    #[arg(long)]
    interscanner: bool,
    /// Use ordinal positions instead of min-max scaling for the inter-scanner ranking.
    #[arg(long, requires = "interscanner")]
    ordinal: bool,
    /// JSON report; standard output when omitted.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Rank table CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClustersArgs {
    /// CSV with `low` and `high` columns in rank order.
    intervals: PathBuf,
}

#[derive(Debug, Args)]
struct StapleArgs {
    /// Input segmentations; any non-zero voxel counts as foreground.
    inputs: Vec<PathBuf>,
    /// Consensus mask.
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Posterior threshold for the consensus mask.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Posterior probability map (float32).
    #[arg(long)]
    weights_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FpDenominatorArg {
    /// Pairs where the voxel is reference background.
    ReferenceNegative,
    /// Every pair.
    AllPairs,
}

#[derive(Debug, Args)]
struct MapsArgs {
    manifest: PathBuf,
    /// Directory receiving fn_rate, fp_rate and lesion_count volumes.
    #[arg(long)]
    out_dir: PathBuf,
    /// Only use rows of this method.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, value_enum, default_value = "reference-negative")]
    fp_denominator: FpDenominatorArg,
    /// Count each subject once per voxel instead of once per row.
    #[arg(long)]
    per_subject: bool,
    /// Treatment of reference label 2.
    #[arg(long, value_enum, default_value = "exclude")]
    ignore: IgnoreArg,
}

#[derive(Debug, Args)]
struct CohortArgs {
    /// Reference segmentations (label 1 is the lesion class).
    references: Vec<PathBuf>,
    #[arg(long, default_value = "26")]
    connectivity: Connectivity,
    /// Histogram bin width for lesion volume (ml).
    #[arg(long, default_value_t = 5.0)]
    volume_bin: f64,
    /// Histogram bin width for lesion counts.
    #[arg(long, default_value_t = 10.0)]
    count_bin: f64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid size as X,Y,Z.
    #[arg(long, default_value = "64,64,24", value_parser = triple::<usize>)]
    dims: [usize; 3],
    /// Voxel spacing in mm as X,Y,Z.
    #[arg(long, default_value = "1,1,3", value_parser = triple::<f64>)]
    spacing: [f64; 3],
    /// Lesions per subject.
    #[arg(long, default_value_t = 8)]
    lesions: usize,
    #[arg(long, default_value_t = 3)]
    size_min: usize,
    #[arg(long, default_value_t = 120)]
    size_max: usize,
    /// Label-2 regions as a fraction of the lesion count.
    #[arg(long, default_value_t = 0.25)]
    ignore_fraction: f64,
    /// Subjects are spread round-robin over this many scanner ids.
    #[arg(long, default_value_t = 1)]
    scanners: usize,
    /// Method id; repeat for several methods.
    #[arg(long = "method", default_value = "synthetic")]
    methods: Vec<String>,
    /// Prediction edits as a JSON array, e.g. '[{"dilate":1},{"drop_components":[1]}]'.
    /// Give one per method or none for built-in edits that worsen with the method index.
    /// Blob seeds are mixed with the subject seed.
    #[arg(long)]
    perturb: Vec<String>,
}

fn triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts.as_slice() else {
        return Err(format!("expected three comma-separated values, got `{s}`"));
    };
    let parse = |v: &str| v.parse::<T>().map_err(|_| format!("invalid value `{v}`"));
    Ok([parse(x)?, parse(y)?, parse(z)?])
}

fn normalization(ordinal: bool) -> RankNormalization {
    if ordinal {
        RankNormalization::Ordinal
    } else {
        RankNormalization::MinMax
    }
}

fn ignore_policy(arg: IgnoreArg) -> IgnorePolicy {
    match arg {
        IgnoreArg::Exclude => IgnorePolicy::Exclude,
        IgnoreArg::Background => IgnorePolicy::Background,
    }
}

fn fp_denominator(arg: FpDenominatorArg) -> FpDenominator {
    match arg {
        FpDenominatorArg::ReferenceNegative => FpDenominator::ReferenceNegative,
        FpDenominatorArg::AllPairs => FpDenominator::AllPairs,
    }
}

/// Command finished; `degenerate` selects exit code 2.
pub struct Outcome {
    pub degenerate: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Batch(a) => commands::batch(&a),
        Command::Rank(a) => commands::rank(&a),
        Command::Clusters(a) => commands::clusters(&a),
        Command::Staple(a) => commands::staple(&a),
        Command::Maps(a) => commands::maps(&a),
        Command::Cohort(a) => commands::cohort(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    match result {
        Ok(Outcome { degenerate: false }) => ExitCode::SUCCESS,
        Ok(Outcome { degenerate: true }) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

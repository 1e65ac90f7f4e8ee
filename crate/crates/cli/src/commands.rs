use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use segeval::analysis::{
    cohort_summary, fn_fp_maps, Accumulation, CohortOptions, MapOptions, MapPair,
};
use segeval::metrics::evaluation_masks;
use segeval::ranking::{interscanner_rank, InterscannerResult, Interval, RankNormalization};
use segeval::synth::{generate_phantom, perturb_mask, PerturbOp, PhantomSpec};
use segeval::volume::{read_nifti, write_nifti};
use segeval::{
    bootstrap_ci, evaluate_pair, final_rank, significance_clusters, staple_fuse, BinaryMask,
    BootstrapConfig, EvalConfig, Metric, RankTable, ResultRecord, ResultTable, Scores,
    StapleParams, VolumeMetric,
};
use serde::Serialize;

use crate::manifest::{self, Row};
use crate::{
    fp_denominator, ignore_policy, normalization, BatchArgs, ClustersArgs, CohortArgs,
    EvaluateArgs, MapsArgs, Outcome, RankArgs, StapleArgs, SynthArgs,
};

const SCHEMA_VERSION: u32 = 1;

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        }
        None => print_json(value),
    }
}

fn load(path: &Path) -> Result<segeval::LabelVolume> {
    read_nifti(path).with_context(|| format!("reading {}", path.display()))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<Outcome> {
    let reference = load(&args.reference)?;
    let prediction = load(&args.prediction)?;
    let metrics = evaluate_pair(&reference, &prediction, &args.eval.config())?;
    print_json(&metrics)?;
    Ok(Outcome {
        degenerate: metrics.has_missing(),
    })
}

fn evaluate_row(row: &Row, config: &EvalConfig) -> Result<ResultRecord> {
    let reference = load(&row.reference_path)?;
    let prediction = load(&row.prediction_path)?;
    let metrics = evaluate_pair(&reference, &prediction, config)
        .with_context(|| format!("evaluating {} / {}", row.method_id, row.subject_id))?;
    Ok(ResultRecord {
        method_id: row.method_id.clone(),
        subject_id: row.subject_id.clone(),
        scanner_id: row.scanner_id.clone(),
        scores: Scores::from(&metrics),
    })
}

pub fn batch(args: &BatchArgs) -> Result<Outcome> {
    let rows = manifest::read(&args.manifest)?;
    let config = args.eval.config();
    let records = rows
        .par_iter()
        .map(|row| evaluate_row(row, &config))
        .collect::<Result<Vec<_>>>()?;
    let degenerate = records
        .iter()
        .any(|r| Metric::ALL.iter().any(|&m| r.scores.get(m).is_none()));
    match &args.output {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            segeval::ranking::write_records_csv(&records, BufWriter::new(file))?;
        }
        None => segeval::ranking::write_records_csv(&records, io::stdout().lock())?,
    }
    Ok(Outcome { degenerate })
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

const TOOL: Tool = Tool {
    name: "segeval",
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Serialize)]
struct RankConfig {
    volume_metric: VolumeMetric,
    log_base: &'static str,
    bootstrap_replicates: usize,
    confidence: f64,
    seed: u64,
    interscanner: bool,
    interscanner_normalization: RankNormalization,
}

#[derive(Serialize)]
struct RankReport<'a> {
    schema_version: u32,
    tool: Tool,
    config: RankConfig,
    results: &'a [ResultRecord],
    ranking: &'a RankTable,
    interscanner: Option<&'a InterscannerResult>,
    warnings: Vec<String>,
}

fn missing_warnings(table: &ResultTable, volume_metric: VolumeMetric) -> Vec<String> {
    let mut warnings = Vec::new();
    for method in table.methods() {
        for metric in volume_metric.ranked_metrics() {
            let missing = table
                .records()
                .iter()
                .filter(|r| &r.method_id == method && r.scores.get(metric).is_none())
                .count();
            if missing > 0 {
                warnings.push(format!(
                    "{method}: {metric} missing for {missing} subject(s); mean over the rest"
                ));
            }
        }
    }
    warnings
}

pub fn rank(args: &RankArgs) -> Result<Outcome> {
    let file =
        File::open(&args.results).with_context(|| format!("opening {}", args.results.display()))?;
    let table = ResultTable::read_csv(file)
        .with_context(|| format!("reading {}", args.results.display()))?;
    let mut warnings = missing_warnings(&table, args.volume_metric);

    let mut ranking = final_rank(&table, args.volume_metric)?;
    if args.bootstrap > 0 {
        if table.subjects().len() < 2 {
            warnings.push("bootstrap skipped: fewer than 2 subjects".into());
        } else {
            let config = BootstrapConfig {
                replicates: args.bootstrap,
                confidence: args.ci,
                seed: args.seed,
            };
            let boot = bootstrap_ci(&table, args.volume_metric, &config)?;
            if boot.redrawn > 0 {
                warnings.push(format!(
                    "{} bootstrap draws redrawn for all-missing cells",
                    boot.redrawn
                ));
            }
            ranking.attach_bootstrap(&boot);
        }
    }
    let interscanner = if args.interscanner {
        let result = interscanner_rank(&table, args.volume_metric, normalization(args.ordinal))?;
        warnings.extend(result.warnings.iter().cloned());
        Some(result)
    } else {
        None
    };

    let report = RankReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        config: RankConfig {
            volume_metric: args.volume_metric,
            log_base: "e",
            bootstrap_replicates: args.bootstrap,
            confidence: args.ci,
            seed: args.seed,
            interscanner: args.interscanner,
            interscanner_normalization: normalization(args.ordinal),
        },
        results: table.records(),
        ranking: &ranking,
        interscanner: interscanner.as_ref(),
        warnings,
    };
    write_json(&report, args.json.as_deref())?;
    if let Some(path) = &args.csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        ranking.write_csv(BufWriter::new(file))?;
    }
    Ok(Outcome { degenerate: false })
}

#[derive(serde::Deserialize)]
struct IntervalRow {
    low: f64,
    high: f64,
}

pub fn clusters(args: &ClustersArgs) -> Result<Outcome> {
    let mut rdr = csv::Reader::from_path(&args.intervals)
        .with_context(|| format!("opening {}", args.intervals.display()))?;
    let mut intervals = Vec::new();
    for (k, row) in rdr.deserialize::<IntervalRow>().enumerate() {
        let row = row.with_context(|| format!("{}: line {}", args.intervals.display(), k + 2))?;
        if row.low > row.high {
            bail!(
                "{}: line {}: low exceeds high",
                args.intervals.display(),
                k + 2
            );
        }
        intervals.push(Interval {
            low: row.low,
            high: row.high,
        });
    }
    print_json(&serde_json::json!({ "boundaries": significance_clusters(&intervals) }))?;
    Ok(Outcome { degenerate: false })
}

pub fn staple(args: &StapleArgs) -> Result<Outcome> {
    let masks = args
        .inputs
        .par_iter()
        .map(|p| load(p).map(|v| v.nonzero()))
        .collect::<Result<Vec<BinaryMask>>>()?;
    let params = StapleParams {
        max_iterations: args.max_iter,
        tolerance: args.tol,
        threshold: args.threshold,
        ..StapleParams::default()
    };
    let fused = staple_fuse(&masks, &params)?;
    write_nifti(&fused.consensus, &args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(path) = &args.weights_out {
        write_nifti(&fused.weight_map(), path)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let mut out = io::stdout().lock();
    writeln!(out, "rater\tsensitivity\tspecificity\tpath")?;
    for (j, path) in args.inputs.iter().enumerate() {
        writeln!(
            out,
            "{j}\t{:.6}\t{:.6}\t{}",
            fused.sensitivities[j],
            fused.specificities[j],
            path.display()
        )?;
    }
    writeln!(
        out,
        "# prior {:.6}, {} iterations, converged: {}",
        fused.prior, fused.iterations_used, fused.converged
    )?;
    Ok(Outcome { degenerate: false })
}

pub fn maps(args: &MapsArgs) -> Result<Outcome> {
    let rows: Vec<Row> = manifest::read(&args.manifest)?
        .into_iter()
        .filter(|r| args.method.as_ref().is_none_or(|m| &r.method_id == m))
        .collect();
    if rows.is_empty() {
        bail!("no manifest rows to map");
    }
    let policy = ignore_policy(args.ignore);
    let pairs = rows
        .par_iter()
        .map(|row| {
            let (reference, prediction) = evaluation_masks(
                &load(&row.reference_path)?,
                &load(&row.prediction_path)?,
                policy,
            )
            .with_context(|| format!("{} / {}", row.method_id, row.subject_id))?;
            Ok(MapPair {
                subject_id: row.subject_id.clone(),
                reference,
                prediction,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = *pairs[0].reference.grid();
    for (pair, row) in pairs.iter().zip(&rows) {
        if *pair.reference.grid() != grid {
            bail!(
                "grid check failed: {} has dims {:?} spacing {:?}, expected {:?} {:?}",
                row.reference_path.display(),
                pair.reference.grid().dims,
                pair.reference.grid().spacing,
                grid.dims,
                grid.spacing
            );
        }
    }
    let options = MapOptions {
        fp_denominator: fp_denominator(args.fp_denominator),
        accumulation: if args.per_subject {
            Accumulation::PerSubject
        } else {
            Accumulation::PerPair
        },
    };
    let result = fn_fp_maps(&pairs, options)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let outputs = [
        ("fn_rate.nii.gz", result.false_negative.rate_volume()),
        ("fp_rate.nii.gz", result.false_positive.rate_volume()),
        ("lesion_count.nii.gz", result.lesion_count_volume()),
    ];
    for (name, volume) in &outputs {
        let path = args.out_dir.join(name);
        write_nifti(volume, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&serde_json::json!({
        "pairs": pairs.len(),
        "dims": grid.dims,
        "spacing": grid.spacing,
        "outputs": outputs.iter().map(|o| o.0).collect::<Vec<_>>(),
    }))?;
    Ok(Outcome { degenerate: false })
}

pub fn cohort(args: &CohortArgs) -> Result<Outcome> {
    let masks = args
        .references
        .par_iter()
        .map(|p| load(p).map(|v| v.mask_of(1)))
        .collect::<Result<Vec<_>>>()?;
    let options = CohortOptions {
        connectivity: args.connectivity,
        volume_bin_ml: args.volume_bin,
        count_bin: args.count_bin,
    };
    print_json(&cohort_summary(&masks, &options)?)?;
    Ok(Outcome { degenerate: false })
}

/// Built-in edits for the `index`-th method; later methods miss more lesions
/// and add more false positives.
fn default_perturbation(index: usize) -> Vec<PerturbOp> {
    vec![
        PerturbOp::Dilate(1),
        PerturbOp::DropComponents((1..=index as u32 + 1).collect()),
        PerturbOp::AddBlobs {
            count: 2 * (index + 1),
            size_range: (2, 20),
            seed: index as u64,
        },
    ]
}

fn subject_seed(seed: u64, subject: usize) -> u64 {
    seed.wrapping_add((subject as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn with_subject_seed(ops: &[PerturbOp], subject_seed: u64) -> Vec<PerturbOp> {
    ops.iter()
        .cloned()
        .map(|op| match op {
            PerturbOp::AddBlobs {
                count,
                size_range,
                seed,
            } => PerturbOp::AddBlobs {
                count,
                size_range,
                seed: seed ^ subject_seed,
            },
            other => other,
        })
        .collect()
}

pub fn synth(args: &SynthArgs) -> Result<Outcome> {
    if args.scanners == 0 {
        bail!("--scanners must be at least 1");
    }
    let ops: Vec<Vec<PerturbOp>> = if args.perturb.is_empty() {
        (0..args.methods.len()).map(default_perturbation).collect()
    } else if args.perturb.len() == args.methods.len() {
        args.perturb
            .iter()
            .map(|json| {
                serde_json::from_str(json).with_context(|| format!("parsing --perturb {json}"))
            })
            .collect::<Result<_>>()?
    } else {
        bail!(
            "{} --perturb values for {} methods; give one per method or none",
            args.perturb.len(),
            args.methods.len()
        );
    };
    fs::create_dir_all(args.out_dir.join("ref"))
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    for method in &args.methods {
        let path = args.out_dir.join("pred").join(method);
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
    }
    let per_subject = (0..args.subjects)
        .into_par_iter()
        .map(|k| {
            let seed = subject_seed(args.seed, k);
            let spec = PhantomSpec {
                dims: args.dims,
                spacing: args.spacing,
                n_lesions: args.lesions,
                size_range: (args.size_min, args.size_max),
                seed,
                ignore_fraction: args.ignore_fraction,
            };
            let reference = generate_phantom(&spec).with_context(|| format!("subject {k}"))?;
            let subject = format!("s{k:03}");
            let name = format!("{subject}.nii.gz");
            let reference_path = Path::new("ref").join(&name);
            write_nifti(&reference, args.out_dir.join(&reference_path))?;
            let lesions = reference.mask_of(1);
            args.methods
                .iter()
                .zip(&ops)
                .map(|(method, ops)| {
                    let prediction = perturb_mask(&lesions, &with_subject_seed(ops, seed))?;
                    let prediction_path = Path::new("pred").join(method).join(&name);
                    write_nifti(&prediction, args.out_dir.join(&prediction_path))?;
                    Ok(Row {
                        method_id: method.clone(),
                        subject_id: subject.clone(),
                        scanner_id: format!("scanner{}", k % args.scanners),
                        reference_path: reference_path.clone(),
                        prediction_path,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    // Method-major order: all subjects of the first method, then the next.
    let rows: Vec<Row> = (0..args.methods.len())
        .flat_map(|m| per_subject.iter().map(move |rows| rows[m].clone()))
        .collect();
    let manifest_path = args.out_dir.join("manifest.csv");
    manifest::write(&rows, &manifest_path)?;
    println!("{}", manifest_path.display());
    Ok(Outcome { degenerate: false })
}

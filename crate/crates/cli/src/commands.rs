//! The four subcommands. Each writes its artifacts plus a `run_config.json`
//! echo of the resolved configuration, and prints a one-line summary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use classcp_core::io::{
    read_labels, read_tensor, write_experiment_tsv, write_id_map, write_json, write_labels,
    write_learning_curve_tsv, write_matrix, write_tensor,
};
use classcp_core::{
    build_tensor, derive_seed, filter_min_degree, fit_class_cp_with_jobs, fit_cp_with_jobs,
    parse_bundle, planted_bundle, run_experiment_on_tensor_with_jobs, CommunityProbs,
    DatasetBundle, ExperimentTable, FitReport, LabelBlock, SparseTensor3, SynthSpec, CLASS_FAKE,
};
use serde::Serialize;

use crate::config::RunConfig;

fn prepare_out_dir(out_dir: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    write_json(&out_dir.join("run_config.json"), cfg)?;
    Ok(())
}

pub fn cmd_ingest(
    cfg: &RunConfig,
    engagements: &Path,
    links: &Path,
    labels: &Path,
    out_dir: &Path,
) -> Result<()> {
    let bundle = parse_bundle(engagements, links, labels)?;
    let filtered = filter_min_degree(&bundle, cfg.min_degree);
    let tensor = build_tensor(&filtered)?;

    prepare_out_dir(out_dir, cfg)?;
    write_tensor(&out_dir.join("tensor.tsv"), &tensor)?;
    write_id_map(&out_dir.join("post_ids.tsv"), &filtered.post_ids)?;
    write_id_map(&out_dir.join("user_ids.tsv"), &filtered.user_ids)?;
    write_labels(&out_dir.join("labels.tsv"), &filtered.labels)?;

    println!(
        "posts={} users={} entries={}",
        tensor.post_count(),
        tensor.user_count(),
        tensor.entry_count()
    );
    Ok(())
}

/// Fit report artifact: the sweep log plus the headline reconstruction number.
#[derive(Serialize)]
struct FitDocument<'a> {
    rank: usize,
    lambda_g: f64,
    labeled_posts: usize,
    relative_reconstruction_error: f64,
    report: &'a FitReport,
}

fn relative_reconstruction_error(t: &SparseTensor3, report: &FitReport) -> f64 {
    let final_f = report
        .records
        .last()
        .map(|r| r.f_value)
        .unwrap_or(report.initial_f);
    (final_f / t.norm_sq()).sqrt()
}

fn read_label_block(path: &Path, post_count: usize) -> Result<LabelBlock> {
    let labels = read_labels(path, post_count)?;
    let pairs: Vec<(usize, usize)> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|class| (i, class)))
        .collect();
    Ok(LabelBlock::from_classes(&pairs, 2)?)
}

pub fn cmd_fit(
    cfg: &RunConfig,
    tensor_path: &Path,
    labels_path: Option<&Path>,
    out_dir: &Path,
    rank_sweep: Option<&[usize]>,
) -> Result<()> {
    let tensor = read_tensor(tensor_path)?;
    let label_block = labels_path
        .map(|p| read_label_block(p, tensor.post_count()))
        .transpose()?;
    prepare_out_dir(out_dir, cfg)?;

    if let Some(ranks) = rank_sweep {
        if ranks.is_empty() {
            bail!("--rank-sweep requires at least one rank");
        }
        for &rank in ranks {
            let fit_cfg = classcp_core::FitConfig {
                rank,
                ..cfg.to_fit()
            };
            let report = run_fit(&tensor, label_block.as_ref(), cfg, &fit_cfg, None)?;
            let doc = FitDocument {
                rank,
                lambda_g: fit_cfg.lambda_g,
                labeled_posts: label_block.as_ref().map_or(0, |lb| lb.len()),
                relative_reconstruction_error: relative_reconstruction_error(&tensor, &report),
                report: &report,
            };
            write_json(&out_dir.join(format!("fit_report_r{rank}.json")), &doc)?;
            println!(
                "rank={rank} converged={} iterations={} relative_error={:e}",
                report.converged, report.iterations_run, doc.relative_reconstruction_error
            );
        }
        return Ok(());
    }

    let fit_cfg = cfg.to_fit();
    let report = run_fit(&tensor, label_block.as_ref(), cfg, &fit_cfg, Some(out_dir))?;
    let doc = FitDocument {
        rank: fit_cfg.rank,
        lambda_g: fit_cfg.lambda_g,
        labeled_posts: label_block.as_ref().map_or(0, |lb| lb.len()),
        relative_reconstruction_error: relative_reconstruction_error(&tensor, &report),
        report: &report,
    };
    write_json(&out_dir.join("fit_report.json"), &doc)?;
    println!(
        "converged={} iterations={} relative_error={:e}",
        report.converged, report.iterations_run, doc.relative_reconstruction_error
    );
    Ok(())
}

/// Runs one fit; when `factor_dir` is set, writes the factor matrices.
fn run_fit(
    tensor: &SparseTensor3,
    label_block: Option<&LabelBlock>,
    cfg: &RunConfig,
    fit_cfg: &classcp_core::FitConfig,
    factor_dir: Option<&Path>,
) -> Result<FitReport> {
    match label_block {
        Some(lb) => {
            let (fs, w, report) = fit_class_cp_with_jobs(tensor, lb, fit_cfg, cfg.jobs)?;
            if let Some(dir) = factor_dir {
                write_matrix(&dir.join("a.tsv"), &fs.a)?;
                write_matrix(&dir.join("b.tsv"), &fs.b)?;
                write_matrix(&dir.join("c.tsv"), &fs.c)?;
                write_matrix(&dir.join("w.tsv"), &w.w)?;
            }
            Ok(report)
        }
        None => {
            let (fs, report) = fit_cp_with_jobs(tensor, fit_cfg, cfg.jobs)?;
            if let Some(dir) = factor_dir {
                write_matrix(&dir.join("a.tsv"), &fs.a)?;
                write_matrix(&dir.join("b.tsv"), &fs.b)?;
                write_matrix(&dir.join("c.tsv"), &fs.c)?;
            }
            Ok(report)
        }
    }
}

fn full_labels(labels: &[Option<usize>]) -> Result<Vec<usize>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| {
                anyhow::anyhow!("post index {i} has no label; evaluation needs every post labeled")
            })
        })
        .collect()
}

pub struct EvaluateInputs<'a> {
    pub tensor: Option<&'a Path>,
    pub engagements: Option<&'a Path>,
    pub links: Option<&'a Path>,
    pub labels: &'a Path,
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    inputs: &EvaluateInputs,
    out_dir: &Path,
    curve: bool,
) -> Result<()> {
    let (tensor, labels) = match (inputs.tensor, inputs.engagements, inputs.links) {
        (Some(tensor_path), None, None) => {
            let tensor = read_tensor(tensor_path)?;
            let labels = full_labels(&read_labels(inputs.labels, tensor.post_count())?)?;
            (tensor, labels)
        }
        (None, Some(engagements), Some(links)) => {
            let bundle = parse_bundle(engagements, links, inputs.labels)?;
            let filtered = filter_min_degree(&bundle, cfg.min_degree);
            let tensor = build_tensor(&filtered)?;
            let labels = full_labels(&filtered.labels)?;
            (tensor, labels)
        }
        _ => bail!("pass either --tensor, or both --engagements and --links"),
    };

    prepare_out_dir(out_dir, cfg)?;
    let seeds: Vec<u64> = (0..cfg.repeats)
        .map(|i| derive_seed(cfg.seed, &format!("repeat/{i}")))
        .collect();
    let exp_cfg = cfg.to_experiment();

    if curve {
        let fractions: Vec<f64> = (1..=8).map(|i| f64::from(i) / 10.0).collect();
        let points =
            classcp_core::learning_curve(&tensor, &labels, &exp_cfg, &fractions, &seeds, cfg.jobs)?;
        write_learning_curve_tsv(&out_dir.join("learning_curve.tsv"), &points)?;
        write_json(
            &out_dir.join("learning_curve.json"),
            &points
                .iter()
                .map(|(f, t)| CurvePoint {
                    fraction: *f,
                    table: t,
                })
                .collect::<Vec<_>>(),
        )?;
        println!("fractions={} repeats={}", points.len(), cfg.repeats);
        return Ok(());
    }

    let table = run_experiment_on_tensor_with_jobs(
        &tensor,
        &labels,
        &exp_cfg,
        cfg.repeats,
        &seeds,
        cfg.jobs,
    )?;
    write_experiment_tsv(&out_dir.join("metrics.tsv"), &table)?;
    write_json(&out_dir.join("metrics.json"), &table)?;
    println!(
        "class_cp accuracy={:.4} f1={:.4} | cp_knn f1={:.4} | raw_centroid f1={:.4}",
        table.class_cp.mean.accuracy,
        table.class_cp.mean.f1,
        table.cp_knn.mean.f1,
        table.raw_centroid.mean.f1
    );
    Ok(())
}

#[derive(Serialize)]
struct CurvePoint<'a> {
    fraction: f64,
    table: &'a ExperimentTable,
}

fn raw_bundle_files(dir: &Path, bundle: &DatasetBundle) -> Result<()> {
    let mut engagements = String::new();
    for &(i, k) in bundle.engagements.pairs() {
        engagements.push_str(&bundle.post_ids[i]);
        engagements.push('\t');
        engagements.push_str(&bundle.user_ids[k]);
        engagements.push('\n');
    }
    let mut links = String::new();
    for &(j, k) in bundle.graph.edges() {
        links.push_str(&bundle.user_ids[j]);
        links.push('\t');
        links.push_str(&bundle.user_ids[k]);
        links.push('\n');
    }
    let mut labels = String::new();
    for (i, label) in bundle.labels.iter().enumerate() {
        if let Some(class) = label {
            labels.push_str(&bundle.post_ids[i]);
            labels.push('\t');
            labels.push_str(if *class == CLASS_FAKE { "fake" } else { "real" });
            labels.push('\n');
        }
    }
    for (name, text) in [
        ("engagements.tsv", engagements),
        ("links.tsv", links),
        ("labels.tsv", labels),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub struct SynthArgs {
    pub posts: Option<usize>,
    pub users: Option<usize>,
    pub communities: Option<usize>,
    pub classes: Option<usize>,
    pub noise: Option<f64>,
    pub out_dir: PathBuf,
}

pub fn cmd_synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let defaults = SynthSpec::default();
    let spec = SynthSpec {
        post_count: args.posts.unwrap_or(defaults.post_count),
        user_count: args.users.unwrap_or(defaults.user_count),
        rank: cfg.rank,
        class_count: args.classes.unwrap_or(defaults.class_count),
        community_count: args.communities.unwrap_or(defaults.community_count),
        noise_flip_prob: args.noise.unwrap_or(0.0),
        seed: cfg.seed,
        probs: CommunityProbs::default(),
    };
    let bundle = planted_bundle(&spec)?;
    prepare_out_dir(&args.out_dir, cfg)?;
    raw_bundle_files(&args.out_dir, &bundle)?;
    println!(
        "posts={} users={} edges={} engagements={}",
        bundle.post_count(),
        bundle.user_count(),
        bundle.graph.edges().len(),
        bundle.engagements.pairs().len()
    );
    Ok(())
}

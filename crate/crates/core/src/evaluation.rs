//! Prediction, baselines, and metrics.
//!
//! The main protocol is transductive: the model fits on the full tensor with
//! only the training labels supplied, and test predictions read off the
//! learned post-factor rows. The same split feeds two baselines: k-NN on
//! plain CP embeddings, and a nearest-centroid rule on the raw mode-1 rows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{fit_class_cp, fit_cp, CoeffMatrix, FactorSet, FitConfig, LabelBlock};
use crate::ingestion::{build_tensor, make_label_split, DatasetBundle};
use crate::matrix::DenseMatrix;
use crate::seeding::derive_seed;
use crate::tensor::SparseTensor3;

/// Predictions for a set of posts: class per post plus the raw score vector
/// the class was read from. `tie` marks posts whose top score was shared and
/// resolved by the lower-class-index rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    posts: Vec<usize>,
    classes: Vec<usize>,
    scores: Vec<Vec<f64>>,
    ties: Vec<bool>,
}

impl PredictionSet {
    pub fn new(
        posts: Vec<usize>,
        classes: Vec<usize>,
        scores: Vec<Vec<f64>>,
        ties: Vec<bool>,
    ) -> Result<Self> {
        if classes.len() != posts.len() || scores.len() != posts.len() || ties.len() != posts.len()
        {
            return Err(Error::invalid("prediction fields must have equal length"));
        }
        Ok(Self {
            posts,
            classes,
            scores,
            ties,
        })
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn posts(&self) -> &[usize] {
        &self.posts
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn ties(&self) -> &[bool] {
        &self.ties
    }
}

/// Argmax with ties resolved to the lower index; reports whether a tie
/// occurred. Scores must be non-empty.
fn pick_best(scores: &[f64]) -> (usize, bool) {
    let mut best = 0;
    for (idx, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = idx;
        }
    }
    let tie = scores
        .iter()
        .enumerate()
        .any(|(idx, &s)| idx != best && s == scores[best]);
    (best, tie)
}

/// Regression predictions: score vector `a_i W` per post, class by argmax.
pub fn predict_classcp(fs: &FactorSet, w: &CoeffMatrix, posts: &[usize]) -> Result<PredictionSet> {
    if w.w.rows() != fs.rank() {
        return Err(Error::invalid(format!(
            "coefficient rows {} do not match rank {}",
            w.w.rows(),
            fs.rank()
        )));
    }
    if w.class_count() == 0 {
        return Err(Error::invalid("coefficient matrix has no class columns"));
    }
    let mut classes = Vec::with_capacity(posts.len());
    let mut scores = Vec::with_capacity(posts.len());
    let mut ties = Vec::with_capacity(posts.len());
    for &post in posts {
        if post >= fs.a.rows() {
            return Err(Error::invalid(format!(
                "post {post} out of range for {} posts",
                fs.a.rows()
            )));
        }
        let a_row = fs.a.row(post);
        let mut score = vec![0.0; w.class_count()];
        for (class, s) in score.iter_mut().enumerate() {
            for r in 0..fs.rank() {
                *s += a_row[r] * w.w.get(r, class);
            }
        }
        let (class, tie) = pick_best(&score);
        classes.push(class);
        scores.push(score);
        ties.push(tie);
    }
    PredictionSet::new(posts.to_vec(), classes, scores, ties)
}

/// `ceil(sqrt(train_size))`, the default neighbor count.
pub fn knn_default_k(train_size: usize) -> usize {
    (train_size as f64).sqrt().ceil() as usize
}

/// k-nearest-neighbor vote in embedding space (Euclidean distance).
///
/// Distance ties resolve to the lower training index; vote ties to the class
/// with the smaller summed neighbor distance, then the lower class index.
/// Prediction posts are positional (0..test rows); scores are vote counts.
pub fn knn_classify(
    train: &DenseMatrix,
    train_labels: &[usize],
    test: &DenseMatrix,
    k: usize,
) -> Result<PredictionSet> {
    if train.rows() == 0 {
        return Err(Error::precondition(
            "k-NN requires a non-empty training set",
        ));
    }
    if train_labels.len() != train.rows() {
        return Err(Error::invalid(format!(
            "{} training labels for {} training rows",
            train_labels.len(),
            train.rows()
        )));
    }
    if test.cols() != train.cols() {
        return Err(Error::invalid(format!(
            "embedding width mismatch: train {} vs test {}",
            train.cols(),
            test.cols()
        )));
    }
    if k < 1 || k > train.rows() {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={}",
            train.rows()
        )));
    }
    let class_count = train_labels.iter().max().unwrap() + 1;

    let mut classes = Vec::with_capacity(test.rows());
    let mut scores = Vec::with_capacity(test.rows());
    let mut ties = Vec::with_capacity(test.rows());
    for row in 0..test.rows() {
        let x = test.row(row);
        let mut dists: Vec<(f64, usize)> = (0..train.rows())
            .map(|tr| {
                let y = train.row(tr);
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), tr)
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut votes = vec![0.0; class_count];
        let mut dist_sum = vec![0.0; class_count];
        for &(d, tr) in &dists[..k] {
            votes[train_labels[tr]] += 1.0;
            dist_sum[train_labels[tr]] += d;
        }
        let mut best = 0;
        for class in 1..class_count {
            let better = votes[class] > votes[best]
                || (votes[class] == votes[best] && dist_sum[class] < dist_sum[best]);
            if better {
                best = class;
            }
        }
        let tie = (0..class_count).any(|c| c != best && votes[c] == votes[best]);
        classes.push(best);
        scores.push(votes);
        ties.push(tie);
    }
    PredictionSet::new((0..test.rows()).collect(), classes, scores, ties)
}

/// Nearest class centroid in embedding space; scores are negated distances so
/// argmax semantics hold. Classes absent from training are never predicted.
pub fn nearest_centroid_classify(
    train: &DenseMatrix,
    train_labels: &[usize],
    test: &DenseMatrix,
) -> Result<PredictionSet> {
    if train.rows() == 0 {
        return Err(Error::precondition(
            "centroid rule requires a non-empty training set",
        ));
    }
    if train_labels.len() != train.rows() {
        return Err(Error::invalid(format!(
            "{} training labels for {} training rows",
            train_labels.len(),
            train.rows()
        )));
    }
    if test.cols() != train.cols() {
        return Err(Error::invalid(format!(
            "embedding width mismatch: train {} vs test {}",
            train.cols(),
            test.cols()
        )));
    }
    let class_count = train_labels.iter().max().unwrap() + 1;
    let dim = train.cols();
    let mut sums = vec![vec![0.0; dim]; class_count];
    let mut counts = vec![0usize; class_count];
    for row in 0..train.rows() {
        let class = train_labels[row];
        counts[class] += 1;
        for (s, v) in sums[class].iter_mut().zip(train.row(row)) {
            *s += v;
        }
    }
    let centroids: Vec<Option<Vec<f64>>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &n)| (n > 0).then(|| sum.into_iter().map(|v| v / n as f64).collect()))
        .collect();

    let mut classes = Vec::with_capacity(test.rows());
    let mut scores = Vec::with_capacity(test.rows());
    let mut ties = Vec::with_capacity(test.rows());
    for row in 0..test.rows() {
        let x = test.row(row);
        let score: Vec<f64> = centroids
            .iter()
            .map(|centroid| match centroid {
                Some(mu) => {
                    let d2: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                    -d2.sqrt()
                }
                None => f64::NEG_INFINITY,
            })
            .collect();
        let (class, tie) = pick_best(&score);
        classes.push(class);
        scores.push(score);
        ties.push(tie);
    }
    PredictionSet::new((0..test.rows()).collect(), classes, scores, ties)
}

/// Nearest-centroid rule on raw mode-1 rows (each post's flattened binary
/// engagement-follower slice), computed sparsely. Prediction posts are the
/// given test post indices; scores are negated distances.
pub fn raw_centroid_classify(
    t: &SparseTensor3,
    train: &[(usize, usize)],
    test_posts: &[usize],
) -> Result<PredictionSet> {
    if train.is_empty() {
        return Err(Error::precondition(
            "centroid rule requires a non-empty training set",
        ));
    }
    let (p, u, _) = t.dims();
    for &(post, _) in train {
        if post >= p {
            return Err(Error::invalid(format!(
                "training post {post} out of range for {p} posts"
            )));
        }
    }
    let mut cols_of_post = vec![Vec::new(); p];
    for &(i, j, k) in t.entries() {
        cols_of_post[i].push(j + k * u);
    }

    let class_count = train.iter().map(|&(_, c)| c).max().unwrap() + 1;
    let mut counts = vec![0usize; class_count];
    let mut centroid: Vec<HashMap<usize, f64>> = vec![HashMap::new(); class_count];
    for &(post, class) in train {
        counts[class] += 1;
        for &col in &cols_of_post[post] {
            *centroid[class].entry(col).or_insert(0.0) += 1.0;
        }
    }
    let mut norm_sq = vec![0.0; class_count];
    for class in 0..class_count {
        if counts[class] == 0 {
            continue;
        }
        let n = counts[class] as f64;
        for v in centroid[class].values_mut() {
            *v /= n;
        }
        norm_sq[class] = centroid[class].values().map(|v| v * v).sum();
    }

    let mut classes = Vec::with_capacity(test_posts.len());
    let mut scores = Vec::with_capacity(test_posts.len());
    let mut ties = Vec::with_capacity(test_posts.len());
    for &post in test_posts {
        if post >= p {
            return Err(Error::invalid(format!(
                "test post {post} out of range for {p} posts"
            )));
        }
        let cols = &cols_of_post[post];
        let score: Vec<f64> = (0..class_count)
            .map(|class| {
                if counts[class] == 0 {
                    return f64::NEG_INFINITY;
                }
                let dot: f64 = cols
                    .iter()
                    .map(|col| centroid[class].get(col).copied().unwrap_or(0.0))
                    .sum();
                let d2 = (cols.len() as f64 - 2.0 * dot + norm_sq[class]).max(0.0);
                -d2.sqrt()
            })
            .collect();
        let (class, tie) = pick_best(&score);
        classes.push(class);
        scores.push(score);
        ties.push(tie);
    }
    PredictionSet::new(test_posts.to_vec(), classes, scores, ties)
}

/// Binary classification metrics with fake news (class 1) as the positive
/// class. Ratios with a zero denominator report 0 with the matching
/// `*_defined` flag cleared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
}

/// Confusion-matrix metrics from predictions and `(post, class)` truth pairs
/// over the same posts. Classes must be binary (0 or 1).
pub fn compute_metrics(pred: &PredictionSet, truth: &[(usize, usize)]) -> Result<Metrics> {
    if pred.is_empty() {
        return Err(Error::invalid("cannot compute metrics on zero predictions"));
    }
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} truth pairs for {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut truth_of = HashMap::new();
    for &(post, class) in truth {
        if class > 1 {
            return Err(Error::invalid(format!("truth class {class} is not binary")));
        }
        if truth_of.insert(post, class).is_some() {
            return Err(Error::invalid(format!("duplicate truth post {post}")));
        }
    }

    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (idx, &post) in pred.posts().iter().enumerate() {
        let truth_class = *truth_of
            .get(&post)
            .ok_or_else(|| Error::invalid(format!("no truth for predicted post {post}")))?;
        let pred_class = pred.classes()[idx];
        if pred_class > 1 {
            return Err(Error::invalid(format!(
                "predicted class {pred_class} is not binary"
            )));
        }
        match (truth_class, pred_class) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            (0, 0) => tn += 1,
            _ => unreachable!(),
        }
    }

    let ratio = |num: usize, den: usize| -> (f64, bool) {
        if den == 0 {
            (0.0, false)
        } else {
            (num as f64 / den as f64, true)
        }
    };
    let (precision, precision_defined) = ratio(tp, tp + fp);
    let (recall, recall_defined) = ratio(tp, tp + fn_);
    let f1_defined = precision + recall > 0.0;
    let f1 = if f1_defined {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let accuracy = (tp + tn) as f64 / pred.len() as f64;
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
        precision_defined,
        recall_defined,
        f1_defined,
    })
}

/// Mean or spread of the four headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-repeat metrics plus mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub per_repeat: Vec<Metrics>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

impl MetricsRecord {
    pub fn aggregate(per_repeat: Vec<Metrics>) -> Result<Self> {
        if per_repeat.is_empty() {
            return Err(Error::invalid("cannot aggregate zero repeats"));
        }
        let n = per_repeat.len() as f64;
        let mean_of =
            |get: &dyn Fn(&Metrics) -> f64| -> f64 { per_repeat.iter().map(get).sum::<f64>() / n };
        let std_of = |get: &dyn Fn(&Metrics) -> f64, mean: f64| -> f64 {
            if per_repeat.len() == 1 {
                return 0.0;
            }
            let ss: f64 = per_repeat.iter().map(|m| (get(m) - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        };
        let acc = mean_of(&|m| m.accuracy);
        let pre = mean_of(&|m| m.precision);
        let rec = mean_of(&|m| m.recall);
        let f1 = mean_of(&|m| m.f1);
        let mean = MetricSummary {
            accuracy: acc,
            precision: pre,
            recall: rec,
            f1,
        };
        let std = MetricSummary {
            accuracy: std_of(&|m| m.accuracy, acc),
            precision: std_of(&|m| m.precision, pre),
            recall: std_of(&|m| m.recall, rec),
            f1: std_of(&|m| m.f1, f1),
        };
        Ok(Self {
            per_repeat,
            mean,
            std,
        })
    }
}

/// Experiment settings shared by every repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub fit: FitConfig,
    pub train_fraction: f64,
    /// Neighbor count for the CP baseline; `None` uses [`knn_default_k`].
    pub knn_k: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            train_fraction: 0.8,
            knn_k: None,
        }
    }
}

/// Aggregated results per method over a shared seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub seeds: Vec<u64>,
    pub class_cp: MetricsRecord,
    pub cp_knn: MetricsRecord,
    pub raw_centroid: MetricsRecord,
}

struct RepeatOutcome {
    class_cp: Metrics,
    cp_knn: Metrics,
    raw_centroid: Metrics,
}

/// One split-fit-score repeat. Fit seeds derive from the repeat seed (tags
/// `fit/classcp`, `fit/cp`) so repeats are independent but reproducible.
fn run_repeat(
    t: &SparseTensor3,
    labels: &[usize],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<RepeatOutcome> {
    let plan = make_label_split(labels, cfg.train_fraction, seed)?;
    let class_count = labels.iter().max().unwrap() + 1;
    let train_pairs: Vec<(usize, usize)> =
        plan.train_indices.iter().map(|&i| (i, labels[i])).collect();
    let test_truth: Vec<(usize, usize)> =
        plan.test_indices.iter().map(|&i| (i, labels[i])).collect();

    let lb = LabelBlock::from_classes(&train_pairs, class_count)?;
    let mut class_cfg = cfg.fit.clone();
    class_cfg.seed = derive_seed(seed, "fit/classcp");
    let (fs, w, _) = fit_class_cp(t, &lb, &class_cfg)?;
    let pred = predict_classcp(&fs, &w, &plan.test_indices)?;
    let class_cp = compute_metrics(&pred, &test_truth)?;

    let mut cp_cfg = cfg.fit.clone();
    cp_cfg.seed = derive_seed(seed, "fit/cp");
    let (fs_cp, _) = fit_cp(t, &cp_cfg)?;
    let gather = |indices: &[usize]| -> DenseMatrix {
        let mut out = DenseMatrix::zeros(indices.len(), fs_cp.rank());
        for (row, &post) in indices.iter().enumerate() {
            out.row_mut(row).copy_from_slice(fs_cp.a.row(post));
        }
        out
    };
    let train_emb = gather(&plan.train_indices);
    let test_emb = gather(&plan.test_indices);
    let train_labels: Vec<usize> = plan.train_indices.iter().map(|&i| labels[i]).collect();
    let k = cfg
        .knn_k
        .unwrap_or_else(|| knn_default_k(train_labels.len()));
    let pred_knn = knn_classify(&train_emb, &train_labels, &test_emb, k)?;
    let positional_truth: Vec<(usize, usize)> = plan
        .test_indices
        .iter()
        .enumerate()
        .map(|(pos, &i)| (pos, labels[i]))
        .collect();
    let cp_knn = compute_metrics(&pred_knn, &positional_truth)?;

    let pred_raw = raw_centroid_classify(t, &train_pairs, &plan.test_indices)?;
    let raw_centroid = compute_metrics(&pred_raw, &test_truth)?;

    Ok(RepeatOutcome {
        class_cp,
        cp_knn,
        raw_centroid,
    })
}

/// Runs the three-method comparison over `seeds`, one split per seed, on an
/// already built tensor with a full label list.
pub fn run_experiment_on_tensor(
    t: &SparseTensor3,
    labels: &[usize],
    cfg: &ExperimentConfig,
    repeats: usize,
    seeds: &[u64],
) -> Result<ExperimentTable> {
    run_experiment_on_tensor_with_jobs(t, labels, cfg, repeats, seeds, 1)
}

/// [`run_experiment_on_tensor`] with repeats spread over `jobs` threads.
/// Restarts inside each repeat stay sequential.
pub fn run_experiment_on_tensor_with_jobs(
    t: &SparseTensor3,
    labels: &[usize],
    cfg: &ExperimentConfig,
    repeats: usize,
    seeds: &[u64],
    jobs: usize,
) -> Result<ExperimentTable> {
    if repeats != seeds.len() {
        return Err(Error::invalid(format!(
            "{repeats} repeats but {} seeds",
            seeds.len()
        )));
    }
    if labels.len() != t.post_count() {
        return Err(Error::invalid(format!(
            "{} labels for {} posts",
            labels.len(),
            t.post_count()
        )));
    }
    let outcomes: Vec<Result<RepeatOutcome>> =
        crate::parallel::run_parallel(seeds, jobs, |&seed| run_repeat(t, labels, cfg, seed));
    let mut class_cp = Vec::with_capacity(repeats);
    let mut cp_knn = Vec::with_capacity(repeats);
    let mut raw_centroid = Vec::with_capacity(repeats);
    for outcome in outcomes {
        let outcome = outcome?;
        class_cp.push(outcome.class_cp);
        cp_knn.push(outcome.cp_knn);
        raw_centroid.push(outcome.raw_centroid);
    }
    Ok(ExperimentTable {
        seeds: seeds.to_vec(),
        class_cp: MetricsRecord::aggregate(class_cp)?,
        cp_knn: MetricsRecord::aggregate(cp_knn)?,
        raw_centroid: MetricsRecord::aggregate(raw_centroid)?,
    })
}

/// [`run_experiment_on_tensor`] on a fully labeled bundle: builds the tensor,
/// then runs the repeats.
pub fn run_experiment(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    repeats: usize,
    seeds: &[u64],
) -> Result<ExperimentTable> {
    run_experiment_with_jobs(bundle, cfg, repeats, seeds, 1)
}

/// [`run_experiment`] with repeats spread over `jobs` threads.
pub fn run_experiment_with_jobs(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    repeats: usize,
    seeds: &[u64],
    jobs: usize,
) -> Result<ExperimentTable> {
    let labels: Vec<usize> = bundle
        .labels
        .iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::precondition(format!("post {i} is unlabeled"))))
        .collect::<Result<_>>()?;
    let t = build_tensor(bundle)?;
    run_experiment_on_tensor_with_jobs(&t, &labels, cfg, repeats, seeds, jobs)
}

/// Runs the experiment once per labeled fraction, reusing the seed list.
pub fn learning_curve(
    t: &SparseTensor3,
    labels: &[usize],
    cfg: &ExperimentConfig,
    fractions: &[f64],
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<(f64, ExperimentTable)>> {
    let mut out = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut point_cfg = cfg.clone();
        point_cfg.train_fraction = fraction;
        let table =
            run_experiment_on_tensor_with_jobs(t, labels, &point_cfg, seeds.len(), seeds, jobs)?;
        out.push((fraction, table));
    }
    Ok(out)
}

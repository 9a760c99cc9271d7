//! Alternating least-squares engines: plain CP and the class-aware joint
//! fit that couples reconstruction with a label-regression term.
//!
//! The joint objective is `f + g` with
//!
//! * `f = || tensor - [[A,B,C]] ||^2` (squared Frobenius reconstruction
//!   error), and
//! * `g = lambda_g * || Y - D A W ||^2`, where `D` selects the labeled post
//!   rows of `A`, `Y` is their one-hot label matrix, and `W` regresses post
//!   factors onto class scores.
//!
//! Each sweep updates `A`, `B`, `C`, `W` in that order; every block update is
//! the exact minimizer of the joint objective over its block (plus the fixed
//! ridge), so `f + g` is non-increasing per sweep up to roundoff. The solver
//! never materializes Kronecker operators: the normal equations of the `A`
//! update decouple per post row into `r x r` systems, one shared by all
//! unlabeled posts and one shared by all labeled posts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{gram_solve, gram_solve_left, DenseMatrix};
use crate::seeding::{derive_seed, rng_from_seed, unit_f64};
use crate::tensor::{mttkrp, SparseTensor3};

/// Factor matrices of a rank-`r` CP model: posts `p x r`, users `u x r`
/// twice. Column counts must agree and both user factors share the row count.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
}

impl FactorSet {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        if a.cols() == 0 {
            return Err(Error::invalid("factor rank must be at least 1"));
        }
        if a.cols() != b.cols() || a.cols() != c.cols() {
            return Err(Error::invalid(format!(
                "factor rank mismatch: {} / {} / {}",
                a.cols(),
                b.cols(),
                c.cols()
            )));
        }
        if b.rows() != c.rows() {
            return Err(Error::invalid(format!(
                "user factor row mismatch: {} vs {}",
                b.rows(),
                c.rows()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    fn check_tensor(&self, t: &SparseTensor3) -> Result<()> {
        let (p, u, _) = t.dims();
        if self.a.rows() != p || self.b.rows() != u || self.c.rows() != u {
            return Err(Error::invalid(format!(
                "factor shapes {}x{}/{}x{}/{}x{} do not match tensor {p}x{u}x{u}",
                self.a.rows(),
                self.a.cols(),
                self.b.rows(),
                self.b.cols(),
                self.c.rows(),
                self.c.cols()
            )));
        }
        Ok(())
    }
}

/// Regression coefficients `r x c` mapping post factors to class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    pub w: DenseMatrix,
}

impl CoeffMatrix {
    pub fn new(w: DenseMatrix) -> Self {
        Self { w }
    }

    pub fn class_count(&self) -> usize {
        self.w.cols()
    }
}

/// Labeled posts: a strictly increasing index set plus their one-hot rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelBlock {
    labeled_indices: Vec<usize>,
    y: DenseMatrix,
}

impl LabelBlock {
    /// Validates strict ordering and one-hot rows.
    pub fn new(labeled_indices: Vec<usize>, y: DenseMatrix) -> Result<Self> {
        if labeled_indices.len() != y.rows() {
            return Err(Error::invalid(format!(
                "{} labeled indices but {} label rows",
                labeled_indices.len(),
                y.rows()
            )));
        }
        if labeled_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "labeled indices must be strictly increasing",
            ));
        }
        for row in 0..y.rows() {
            let ones = y.row(row).iter().filter(|&&v| v == 1.0).count();
            let zeros = y.row(row).iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != y.cols() {
                return Err(Error::invalid(format!("label row {row} is not one-hot")));
            }
        }
        Ok(Self { labeled_indices, y })
    }

    /// Builds the one-hot matrix from `(post index, class)` pairs.
    pub fn from_classes(pairs: &[(usize, usize)], class_count: usize) -> Result<Self> {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        if let Some(&(_, class)) = sorted.iter().find(|&&(_, c)| c >= class_count) {
            return Err(Error::invalid(format!(
                "class {class} out of range for {class_count} classes"
            )));
        }
        let mut y = DenseMatrix::zeros(sorted.len(), class_count);
        for (row, &(_, class)) in sorted.iter().enumerate() {
            y.set(row, class, 1.0);
        }
        Self::new(sorted.into_iter().map(|(i, _)| i).collect(), y)
    }

    pub fn labeled_indices(&self) -> &[usize] {
        &self.labeled_indices
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.labeled_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labeled_indices.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.y.cols()
    }

    /// Class of the `row`-th labeled post (position of the 1 in its row).
    pub fn class_of_row(&self, row: usize) -> usize {
        self.y
            .row(row)
            .iter()
            .position(|&v| v == 1.0)
            .expect("rows are one-hot by construction")
    }

    fn check_post_count(&self, post_count: usize) -> Result<()> {
        if let Some(&last) = self.labeled_indices.last() {
            if last >= post_count {
                return Err(Error::invalid(format!(
                    "labeled index {last} out of range for {post_count} posts"
                )));
            }
        }
        Ok(())
    }
}

/// Solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub rank: usize,
    pub lambda_g: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 5,
            lambda_g: 1.0,
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
            restarts: 5,
            ridge: 1e-9,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if self.lambda_g.is_nan() || self.lambda_g < 0.0 {
            return Err(Error::invalid(format!(
                "lambda_g must be >= 0, got {}",
                self.lambda_g
            )));
        }
        if self.ridge.is_nan() || self.ridge < 0.0 {
            return Err(Error::invalid(format!(
                "ridge must be >= 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// One sweep's objective values and relative change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub f_value: f64,
    pub g_value: f64,
    pub relative_change: f64,
}

/// Per-iteration trace of a fit, plus convergence status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_run: usize,
    pub final_objective: f64,
    pub initial_f: f64,
    pub initial_g: f64,
}

/// Squared reconstruction error `|| tensor - [[A,B,C]] ||^2` computed from
/// sparse entries and Gram identities, never densifying the tensor:
/// `nnz - 2 <tensor, model> + sum((AᵀA) ∘ (BᵀB) ∘ (CᵀC))`. Tiny negative
/// roundoff near exact fits clamps to 0.
pub fn objective_f(t: &SparseTensor3, fs: &FactorSet) -> Result<f64> {
    fs.check_tensor(t)?;
    let rank = fs.rank();
    let mut inner = 0.0;
    for &(i, j, k) in t.entries() {
        let (ai, bj, ck) = (fs.a.row(i), fs.b.row(j), fs.c.row(k));
        let mut term = 0.0;
        for r in 0..rank {
            term += ai[r] * bj[r] * ck[r];
        }
        inner += term;
    }
    let model_norm_sq: f64 =
        fs.a.gram()
            .hadamard(&fs.b.gram())?
            .hadamard(&fs.c.gram())?
            .values()
            .iter()
            .sum();
    let raw = t.norm_sq() - 2.0 * inner + model_norm_sq;
    Ok(if raw <= 0.0 { 0.0 } else { raw })
}

/// Label-regression error `lambda_g * || Y - (DA) W ||^2`, where `DA` is the
/// labeled-row selection of `A`.
pub fn objective_g(fs: &FactorSet, w: &CoeffMatrix, lb: &LabelBlock, lambda_g: f64) -> Result<f64> {
    lb.check_post_count(fs.a.rows())?;
    if w.w.rows() != fs.rank() || w.w.cols() != lb.class_count() {
        return Err(Error::invalid(format!(
            "coefficient shape {}x{} does not match rank {} and {} classes",
            w.w.rows(),
            w.w.cols(),
            fs.rank(),
            lb.class_count()
        )));
    }
    let mut sum = 0.0;
    for (row, &post) in lb.labeled_indices().iter().enumerate() {
        let a_row = fs.a.row(post);
        for class in 0..lb.class_count() {
            let mut score = 0.0;
            for r in 0..fs.rank() {
                score += a_row[r] * w.w.get(r, class);
            }
            let diff = lb.y().get(row, class) - score;
            sum += diff * diff;
        }
    }
    Ok(lambda_g * sum)
}

/// Exact block minimizer for `B`: solves `B ((CᵀC) ∘ (AᵀA) + ridge I) =
/// mttkrp(tensor, A, C, mode 2)`.
pub fn update_b(t: &SparseTensor3, fs: &FactorSet, ridge: f64) -> Result<DenseMatrix> {
    fs.check_tensor(t)?;
    let gram = fs.c.gram().hadamard(&fs.a.gram())?;
    let rhs = mttkrp(t, &fs.a, &fs.c, 2)?;
    gram_solve(&gram, &rhs, ridge).map_err(|e| e.in_block("B"))
}

/// Exact block minimizer for `C`: solves `C ((BᵀB) ∘ (AᵀA) + ridge I) =
/// mttkrp(tensor, A, B, mode 3)`.
pub fn update_c(t: &SparseTensor3, fs: &FactorSet, ridge: f64) -> Result<DenseMatrix> {
    fs.check_tensor(t)?;
    let gram = fs.b.gram().hadamard(&fs.a.gram())?;
    let rhs = mttkrp(t, &fs.a, &fs.b, 3)?;
    gram_solve(&gram, &rhs, ridge).map_err(|e| e.in_block("C"))
}

/// Exact block minimizer for `A` under the joint objective.
///
/// The vectorized normal equations decouple per post row: every unlabeled
/// post solves against `(CᵀC) ∘ (BᵀB) + ridge I`, every labeled post against
/// the same Gram plus `lambda_g W Wᵀ`, with `lambda_g y_i Wᵀ` added to its
/// right-hand side. With `lambda_g = 0` or no labels this is exactly the
/// plain CP update.
pub fn update_a(
    t: &SparseTensor3,
    fs: &FactorSet,
    w: &CoeffMatrix,
    lb: &LabelBlock,
    lambda_g: f64,
    ridge: f64,
) -> Result<DenseMatrix> {
    update_a_impl(t, fs, Some((w, lb, lambda_g)), ridge)
}

fn update_a_impl(
    t: &SparseTensor3,
    fs: &FactorSet,
    supervision: Option<(&CoeffMatrix, &LabelBlock, f64)>,
    ridge: f64,
) -> Result<DenseMatrix> {
    fs.check_tensor(t)?;
    let gram_z = fs.c.gram().hadamard(&fs.b.gram())?;
    let m = mttkrp(t, &fs.b, &fs.c, 1)?;
    let (w, lb, lambda_g) = match supervision {
        Some((w, lb, lambda_g)) if lambda_g != 0.0 && !lb.is_empty() => (w, lb, lambda_g),
        _ => return gram_solve(&gram_z, &m, ridge).map_err(|e| e.in_block("A")),
    };
    lb.check_post_count(fs.a.rows())?;
    if w.w.rows() != fs.rank() || w.w.cols() != lb.class_count() {
        return Err(Error::invalid(format!(
            "coefficient shape {}x{} does not match rank {} and {} classes",
            w.w.rows(),
            w.w.cols(),
            fs.rank(),
            lb.class_count()
        )));
    }

    let rank = fs.rank();
    let p = fs.a.rows();
    let labeled = lb.labeled_indices();

    // Labeled rows share one system: gram_z + lambda_g * W Wᵀ.
    let wwt = w.w.matmul(&w.w.transpose())?;
    let mut labeled_gram = gram_z.clone();
    for r in 0..rank {
        for s in 0..rank {
            labeled_gram.set(r, s, labeled_gram.get(r, s) + lambda_g * wwt.get(r, s));
        }
    }

    let mut rhs_labeled = DenseMatrix::zeros(labeled.len(), rank);
    for (row, &post) in labeled.iter().enumerate() {
        let m_row = m.row(post);
        let dst = rhs_labeled.row_mut(row);
        for r in 0..rank {
            let mut label_term = 0.0;
            for class in 0..lb.class_count() {
                label_term += lb.y().get(row, class) * w.w.get(r, class);
            }
            dst[r] = m_row[r] + lambda_g * label_term;
        }
    }

    let unlabeled: Vec<usize> = {
        let mut next = labeled.iter().copied().peekable();
        (0..p)
            .filter(|&i| {
                if next.peek() == Some(&i) {
                    next.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    };
    let mut rhs_unlabeled = DenseMatrix::zeros(unlabeled.len(), rank);
    for (row, &post) in unlabeled.iter().enumerate() {
        rhs_unlabeled.row_mut(row).copy_from_slice(m.row(post));
    }

    let solved_labeled =
        gram_solve(&labeled_gram, &rhs_labeled, ridge).map_err(|e| e.in_block("A"))?;
    let mut out = DenseMatrix::zeros(p, rank);
    for (row, &post) in labeled.iter().enumerate() {
        out.row_mut(post).copy_from_slice(solved_labeled.row(row));
    }
    if !unlabeled.is_empty() {
        let solved_unlabeled =
            gram_solve(&gram_z, &rhs_unlabeled, ridge).map_err(|e| e.in_block("A"))?;
        for (row, &post) in unlabeled.iter().enumerate() {
            out.row_mut(post).copy_from_slice(solved_unlabeled.row(row));
        }
    }
    Ok(out)
}

/// Least-squares coefficient update: solves `((DA)ᵀ(DA) + ridge I) W =
/// (DA)ᵀ Y`. Independent of `lambda_g`, which scales out of this subproblem.
pub fn update_w(fs: &FactorSet, lb: &LabelBlock, ridge: f64) -> Result<DenseMatrix> {
    if lb.is_empty() {
        return Err(Error::precondition(
            "coefficient update requires at least one labeled post",
        ));
    }
    lb.check_post_count(fs.a.rows())?;
    let rank = fs.rank();
    let mut da = DenseMatrix::zeros(lb.len(), rank);
    for (row, &post) in lb.labeled_indices().iter().enumerate() {
        da.row_mut(row).copy_from_slice(fs.a.row(post));
    }
    let gram = da.gram();
    let rhs = da.transpose().matmul(lb.y())?;
    gram_solve_left(&gram, &rhs, ridge).map_err(|e| e.in_block("W"))
}

/// Relative-change stopping quantity `|(f_new+g_new) - (f_old+g_old)| /
/// (f_old+g_old)`.
///
/// Degenerate zero start: returns 0 when both sums are 0, infinity when only
/// the old sum is.
pub fn relative_change(f_old: f64, g_old: f64, f_new: f64, g_new: f64) -> f64 {
    let old = f_old + g_old;
    let new = f_new + g_new;
    if old == 0.0 {
        return if new == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (new - old).abs() / old
}

/// Outcome of one restart.
struct RunOutcome {
    factors: FactorSet,
    coeff: Option<CoeffMatrix>,
    report: FitReport,
}

/// One seeded run of the alternating sweeps. Factor entries initialize
/// i.i.d. uniform `[0,1)` in the order A, B, C (row-major); `W` initializes
/// with one coefficient update.
fn run_sweeps(
    t: &SparseTensor3,
    supervision: Option<(&LabelBlock, f64)>,
    cfg: &FitConfig,
    seed: u64,
) -> Result<RunOutcome> {
    let (p, u, _) = t.dims();
    let rank = cfg.rank;
    let mut rng = rng_from_seed(seed);
    let mut draw = |rows: usize| DenseMatrix::from_fn(rows, rank, |_, _| unit_f64(&mut rng));
    let a = draw(p);
    let b = draw(u);
    let c = draw(u);
    let mut fs = FactorSet::new(a, b, c)?;

    let mut coeff = match supervision {
        Some((lb, _)) if !lb.is_empty() => Some(CoeffMatrix::new(update_w(&fs, lb, cfg.ridge)?)),
        Some((lb, _)) => Some(CoeffMatrix::new(DenseMatrix::zeros(rank, lb.class_count()))),
        None => None,
    };

    let eval_g = |fs: &FactorSet, coeff: &Option<CoeffMatrix>| -> Result<f64> {
        match (supervision, coeff) {
            (Some((lb, lambda_g)), Some(w)) => objective_g(fs, w, lb, lambda_g),
            _ => Ok(0.0),
        }
    };

    let initial_f = objective_f(t, &fs)?;
    let initial_g = eval_g(&fs, &coeff)?;
    let mut f_old = initial_f;
    let mut g_old = initial_g;

    let mut records = Vec::new();
    let mut converged = false;

    // Zero objective at the start means the model is already exact.
    if f_old + g_old == 0.0 {
        converged = true;
    } else {
        for _ in 0..cfg.max_iters {
            fs.a = update_a_impl(
                t,
                &fs,
                supervision.and_then(|(lb, lambda_g)| coeff.as_ref().map(|w| (w, lb, lambda_g))),
                cfg.ridge,
            )?;
            fs.b = update_b(t, &fs, cfg.ridge)?;
            fs.c = update_c(t, &fs, cfg.ridge)?;
            if let Some((lb, _)) = supervision {
                if !lb.is_empty() {
                    coeff = Some(CoeffMatrix::new(update_w(&fs, lb, cfg.ridge)?));
                }
            }
            let f_new = objective_f(t, &fs)?;
            let g_new = eval_g(&fs, &coeff)?;
            let rel = relative_change(f_old, g_old, f_new, g_new);
            records.push(IterationRecord {
                f_value: f_new,
                g_value: g_new,
                relative_change: rel,
            });
            f_old = f_new;
            g_old = g_new;
            if rel < cfg.tol {
                converged = true;
                break;
            }
        }
    }

    let iterations_run = records.len();
    let report = FitReport {
        records,
        converged,
        iterations_run,
        final_objective: f_old + g_old,
        initial_f,
        initial_g,
    };
    Ok(RunOutcome {
        factors: fs,
        coeff,
        report,
    })
}

/// Runs `cfg.restarts` seeded restarts (seed tag `restart/<i>`) and keeps the
/// run with the lowest final objective, ties to the lowest restart index.
/// `jobs > 1` evaluates restarts on that many threads; the selection is
/// independent of scheduling.
fn fit_driver(
    t: &SparseTensor3,
    supervision: Option<(&LabelBlock, f64)>,
    cfg: &FitConfig,
    jobs: usize,
) -> Result<RunOutcome> {
    cfg.validate()?;
    if t.entry_count() == 0 {
        return Err(Error::precondition("tensor has no entries"));
    }
    if let Some((lb, _)) = supervision {
        lb.check_post_count(t.post_count())?;
    }

    let seeds: Vec<u64> = (0..cfg.restarts)
        .map(|i| derive_seed(cfg.seed, &format!("restart/{i}")))
        .collect();

    let outcomes: Vec<Result<RunOutcome>> =
        crate::parallel::run_parallel(&seeds, jobs, |&s| run_sweeps(t, supervision, cfg, s));

    let mut best: Option<RunOutcome> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        let better = match &best {
            None => true,
            Some(b) => outcome.report.final_objective < b.report.final_objective,
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Joint class-aware fit: alternating exact block updates of `A`, `B`, `C`,
/// `W` until the relative change of `f + g` drops below `cfg.tol` or
/// `cfg.max_iters` sweeps elapse, best of `cfg.restarts` seeded restarts.
///
/// With an empty label block the coefficient update is skipped and `W` stays
/// zero; the factor path then matches the unsupervised fit exactly.
pub fn fit_class_cp(
    t: &SparseTensor3,
    lb: &LabelBlock,
    cfg: &FitConfig,
) -> Result<(FactorSet, CoeffMatrix, FitReport)> {
    fit_class_cp_with_jobs(t, lb, cfg, 1)
}

/// [`fit_class_cp`] with restarts spread over `jobs` threads.
pub fn fit_class_cp_with_jobs(
    t: &SparseTensor3,
    lb: &LabelBlock,
    cfg: &FitConfig,
    jobs: usize,
) -> Result<(FactorSet, CoeffMatrix, FitReport)> {
    let outcome = fit_driver(t, Some((lb, cfg.lambda_g)), cfg, jobs)?;
    let coeff = outcome.coeff.expect("supervised run always carries W");
    Ok((outcome.factors, coeff, outcome.report))
}

/// Plain CP fit (no label term); produces bit-identical factors to
/// [`fit_class_cp`] with `lambda_g = 0` for equal seeds.
pub fn fit_cp(t: &SparseTensor3, cfg: &FitConfig) -> Result<(FactorSet, FitReport)> {
    fit_cp_with_jobs(t, cfg, 1)
}

/// [`fit_cp`] with restarts spread over `jobs` threads.
pub fn fit_cp_with_jobs(
    t: &SparseTensor3,
    cfg: &FitConfig,
    jobs: usize,
) -> Result<(FactorSet, FitReport)> {
    let outcome = fit_driver(t, None, cfg, jobs)?;
    Ok((outcome.factors, outcome.report))
}

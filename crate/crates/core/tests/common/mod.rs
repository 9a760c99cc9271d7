//! Independent oracles for integration tests: dense reference computations
//! that share no code with the sparse kernels they check.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use classcp_core::{rng_from_seed, unit_f64, DenseMatrix, FactorSet, LabelBlock, SparseTensor3};
use rand_chacha::ChaCha8Rng;

/// Dense copy of a tensor, laid out as `data[(i*u + j)*u + k]`.
pub fn densify(t: &SparseTensor3) -> Vec<f64> {
    let (p, u, _) = t.dims();
    let mut data = vec![0.0; p * u * u];
    for &(i, j, k) in t.entries() {
        data[(i * u + j) * u + k] = 1.0;
    }
    data
}

/// Dense CP model values in the same layout as [`densify`].
pub fn dense_model(fs: &FactorSet) -> Vec<f64> {
    let (p, u) = (fs.a.rows(), fs.b.rows());
    let mut data = vec![0.0; p * u * u];
    for i in 0..p {
        for j in 0..u {
            for k in 0..u {
                let mut v = 0.0;
                for r in 0..fs.rank() {
                    v += fs.a.get(i, r) * fs.b.get(j, r) * fs.c.get(k, r);
                }
                data[(i * u + j) * u + k] = v;
            }
        }
    }
    data
}

/// Reconstruction error by brute force over every cell.
pub fn dense_objective_f(t: &SparseTensor3, fs: &FactorSet) -> f64 {
    let x = densify(t);
    let m = dense_model(fs);
    x.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Mode-`mode` unfolding built cell by cell from the documented layout:
/// target mode as rows, remaining modes in increasing order with the first
/// varying fastest.
pub fn dense_matricize(t: &SparseTensor3, mode: usize) -> DenseMatrix {
    let (p, u, _) = t.dims();
    let x = densify(t);
    let cell = |i: usize, j: usize, k: usize| x[(i * u + j) * u + k];
    match mode {
        1 => DenseMatrix::from_fn(p, u * u, |i, col| cell(i, col % u, col / u)),
        2 => DenseMatrix::from_fn(u, p * u, |j, col| cell(col % p, j, col / p)),
        3 => DenseMatrix::from_fn(u, p * u, |k, col| cell(col % p, col / p, k)),
        _ => panic!("oracle called with bad mode {mode}"),
    }
}

/// Kronecker product, block layout `(a_row*b_rows + b_row, a_col*b_cols + b_col)`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |row, col| {
        a.get(row / b.rows(), col / b.cols()) * b.get(row % b.rows(), col % b.cols())
    })
}

/// Gaussian elimination with partial pivoting, solving `A X = B` for dense
/// square `A`. Panics on a vanishing pivot; oracle callers keep systems
/// well-conditioned.
pub fn solve_ge(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.rows(), n);
    let m = b.cols();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row: Vec<f64> = a.row(r).to_vec();
            row.extend_from_slice(b.row(r));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        assert!(aug[pivot][col].abs() > 0.0, "oracle system is singular");
        aug.swap(col, pivot);
        for row in col + 1..n {
            let factor = aug[row][col] / aug[col][col];
            for idx in col..n + m {
                aug[row][idx] -= factor * aug[col][idx];
            }
        }
    }
    let mut x = DenseMatrix::zeros(n, m);
    for rhs in 0..m {
        for row in (0..n).rev() {
            let mut v = aug[row][n + rhs];
            for col in row + 1..n {
                v -= aug[row][col] * x.get(col, rhs);
            }
            x.set(row, rhs, v / aug[row][row]);
        }
    }
    x
}

/// Column-major vectorization (columns stacked).
pub fn vec_col_major(m: &DenseMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for col in 0..m.cols() {
        for row in 0..m.rows() {
            out.push(m.get(row, col));
        }
    }
    out
}

pub fn unvec_col_major(v: &[f64], rows: usize, cols: usize) -> DenseMatrix {
    assert_eq!(v.len(), rows * cols);
    DenseMatrix::from_fn(rows, cols, |row, col| v[col * rows + row])
}

/// 0/1 selector matrix extracting `indices` rows from a height-`p` matrix.
pub fn selector(indices: &[usize], p: usize) -> DenseMatrix {
    DenseMatrix::from_fn(indices.len(), p, |row, col| {
        if indices[row] == col {
            1.0
        } else {
            0.0
        }
    })
}

pub fn rand_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| unit_f64(rng))
}

pub fn rand_factors(rng: &mut ChaCha8Rng, p: usize, u: usize, rank: usize) -> FactorSet {
    let a = rand_dense(rng, p, rank);
    let b = rand_dense(rng, u, rank);
    let c = rand_dense(rng, u, rank);
    FactorSet::new(a, b, c).unwrap()
}

/// Random binary tensor with roughly `density` fill, never empty.
pub fn rand_tensor(rng: &mut ChaCha8Rng, p: usize, u: usize, density: f64) -> SparseTensor3 {
    let mut entries = Vec::new();
    for i in 0..p {
        for j in 0..u {
            for k in 0..u {
                if unit_f64(rng) < density {
                    entries.push((i, j, k));
                }
            }
        }
    }
    if entries.is_empty() {
        let i = (unit_f64(rng) * p as f64) as usize;
        let j = (unit_f64(rng) * u as f64) as usize;
        let k = (unit_f64(rng) * u as f64) as usize;
        entries.push((i.min(p - 1), j.min(u - 1), k.min(u - 1)));
    }
    SparseTensor3::new(p, u, entries).unwrap()
}

/// Random label block: `l` distinct posts out of `p`, random binary classes,
/// at least one post per class when `l >= 2`.
pub fn rand_label_block(rng: &mut ChaCha8Rng, p: usize, l: usize, classes: usize) -> LabelBlock {
    assert!(l <= p);
    let mut posts: Vec<usize> = (0..p).collect();
    classcp_core::seeding::shuffle(&mut posts, rng);
    let pairs: Vec<(usize, usize)> = posts[..l]
        .iter()
        .enumerate()
        .map(|(row, &post)| {
            let class = if row < classes && l >= classes {
                row
            } else {
                (unit_f64(rng) * classes as f64) as usize % classes
            };
            (post, class)
        })
        .collect();
    LabelBlock::from_classes(&pairs, classes).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

/// Identity matrix.
pub fn identity(n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
}

/// Dense reference for the joint A update: assembles the full vectorized
/// normal equations with explicit Kronecker operators and solves them by
/// elimination. `vec` is column-major throughout.
pub fn dense_update_a_oracle(
    t: &SparseTensor3,
    fs: &FactorSet,
    w: &classcp_core::CoeffMatrix,
    lb: &LabelBlock,
    lambda_g: f64,
    ridge: f64,
) -> DenseMatrix {
    let (p, _, _) = t.dims();
    let r = fs.rank();
    let z1 = classcp_core::khatri_rao(&fs.c, &fs.b).unwrap();
    let g_op = kron(&z1, &identity(p));
    let t1 = dense_matricize(t, 1);
    let vec_t1 = DenseMatrix::from_vec(g_op.rows(), 1, vec_col_major(&t1)).unwrap();

    let mut system = g_op.transpose().matmul(&g_op).unwrap();
    let mut rhs = g_op.transpose().matmul(&vec_t1).unwrap();

    if lambda_g != 0.0 && !lb.is_empty() {
        let d = selector(lb.labeled_indices(), p);
        let l_op = kron(&w.w.transpose(), &d);
        let ltl = l_op.transpose().matmul(&l_op).unwrap();
        let vec_y = DenseMatrix::from_vec(l_op.rows(), 1, vec_col_major(lb.y())).unwrap();
        let lty = l_op.transpose().matmul(&vec_y).unwrap();
        system = DenseMatrix::from_fn(p * r, p * r, |row, col| {
            system.get(row, col) + lambda_g * ltl.get(row, col)
        });
        rhs = DenseMatrix::from_fn(p * r, 1, |row, _| {
            rhs.get(row, 0) + lambda_g * lty.get(row, 0)
        });
    }
    let system = DenseMatrix::from_fn(p * r, p * r, |row, col| {
        system.get(row, col) + if row == col { ridge } else { 0.0 }
    });
    let solved = solve_ge(&system, &rhs);
    unvec_col_major(solved.values(), p, r)
}

/// Dense reference for the B update (mode 2), ridge included.
pub fn dense_update_b_oracle(t: &SparseTensor3, fs: &FactorSet, ridge: f64) -> DenseMatrix {
    let z2 = classcp_core::khatri_rao(&fs.c, &fs.a).unwrap();
    dense_mode_solve(&z2, &dense_matricize(t, 2), ridge)
}

/// Dense reference for the C update (mode 3), ridge included.
pub fn dense_update_c_oracle(t: &SparseTensor3, fs: &FactorSet, ridge: f64) -> DenseMatrix {
    let z3 = classcp_core::khatri_rao(&fs.b, &fs.a).unwrap();
    dense_mode_solve(&z3, &dense_matricize(t, 3), ridge)
}

fn dense_mode_solve(z: &DenseMatrix, unfolded: &DenseMatrix, ridge: f64) -> DenseMatrix {
    let ztz = z.transpose().matmul(z).unwrap();
    let gram = DenseMatrix::from_fn(ztz.rows(), ztz.cols(), |row, col| {
        ztz.get(row, col) + if row == col { ridge } else { 0.0 }
    });
    let rhs = z.transpose().matmul(&unfolded.transpose()).unwrap();
    solve_ge(&gram, &rhs).transpose()
}

/// Dense reference for the coefficient update.
pub fn dense_update_w_oracle(fs: &FactorSet, lb: &LabelBlock, ridge: f64) -> DenseMatrix {
    let da = selector(lb.labeled_indices(), fs.a.rows())
        .matmul(&fs.a)
        .unwrap();
    let dag = da.gram();
    let gram = DenseMatrix::from_fn(fs.rank(), fs.rank(), |row, col| {
        dag.get(row, col) + if row == col { ridge } else { 0.0 }
    });
    let rhs = da.transpose().matmul(lb.y()).unwrap();
    solve_ge(&gram, &rhs)
}

/// Dense label-regression error.
pub fn dense_objective_g(
    fs: &FactorSet,
    w: &classcp_core::CoeffMatrix,
    lb: &LabelBlock,
    lambda_g: f64,
) -> f64 {
    let da = selector(lb.labeled_indices(), fs.a.rows())
        .matmul(&fs.a)
        .unwrap();
    let pred = da.matmul(&w.w).unwrap();
    let mut sum = 0.0;
    for row in 0..pred.rows() {
        for col in 0..pred.cols() {
            let diff = lb.y().get(row, col) - pred.get(row, col);
            sum += diff * diff;
        }
    }
    lambda_g * sum
}

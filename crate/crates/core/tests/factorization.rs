//! Alternating-update correctness against dense reference solvers, descent
//! behaviour of the joint objective, and recovery on planted tensors.

mod common;

use classcp_core::{
    fit_class_cp, fit_cp, generate_exact, objective_f, objective_g, update_a, update_b, update_c,
    update_w, CoeffMatrix, DenseMatrix, Error, FactorSet, FitConfig, LabelBlock, SynthSpec,
};
use common::{
    dense_objective_g, dense_update_a_oracle, dense_update_b_oracle, dense_update_c_oracle,
    dense_update_w_oracle, rand_dense, rand_factors, rand_label_block, rand_tensor, seeded,
};
use proptest::prelude::*;

fn max_abs_diff(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    assert_eq!((x.rows(), x.cols()), (y.rows(), y.cols()));
    x.values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn scale_of(x: &DenseMatrix) -> f64 {
    x.values().iter().fold(1.0, |acc, v| acc.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn update_a_matches_dense_vec_solve(
        seed in any::<u64>(),
        p in 2usize..6,
        u in 2usize..5,
        r in 1usize..4,
        l in 0usize..4,
        lambda_choice in 0usize..3,
        ridge_choice in 0usize..3,
    ) {
        let lambda_g = [0.0, 0.5, 2.0][lambda_choice];
        let ridge = [0.0, 1e-9, 1e-6][ridge_choice];
        let mut rng = seeded(seed);
        let t = rand_tensor(&mut rng, p, u, 0.4);
        let fs = rand_factors(&mut rng, p, u, r);
        let lb = rand_label_block(&mut rng, p, l.min(p), 2);
        let w = CoeffMatrix::new(rand_dense(&mut rng, r, 2));

        let got = match update_a(&t, &fs, &w, &lb, lambda_g, ridge) {
            Ok(m) => m,
            // A zero ridge on a random instance can legitimately hit a
            // rank-deficient block; that case is covered separately.
            Err(Error::Singular { .. }) if ridge == 0.0 => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let want = dense_update_a_oracle(&t, &fs, &w, &lb, lambda_g, ridge);
        prop_assert!(
            max_abs_diff(&got, &want) <= 1e-8 * scale_of(&want),
            "max diff {} over scale {}",
            max_abs_diff(&got, &want),
            scale_of(&want)
        );
    }

    #[test]
    fn update_b_matches_dense_least_squares(
        seed in any::<u64>(),
        p in 2usize..6,
        u in 2usize..5,
        r in 1usize..4,
        ridge_choice in 0usize..2,
    ) {
        let ridge = [1e-9, 1e-6][ridge_choice];
        let mut rng = seeded(seed);
        let t = rand_tensor(&mut rng, p, u, 0.4);
        let fs = rand_factors(&mut rng, p, u, r);
        let got = update_b(&t, &fs, ridge).unwrap();
        let want = dense_update_b_oracle(&t, &fs, ridge);
        prop_assert!(max_abs_diff(&got, &want) <= 1e-8 * scale_of(&want));
    }

    #[test]
    fn update_c_matches_dense_least_squares(
        seed in any::<u64>(),
        p in 2usize..6,
        u in 2usize..5,
        r in 1usize..4,
        ridge_choice in 0usize..2,
    ) {
        let ridge = [1e-9, 1e-6][ridge_choice];
        let mut rng = seeded(seed);
        let t = rand_tensor(&mut rng, p, u, 0.4);
        let fs = rand_factors(&mut rng, p, u, r);
        let got = update_c(&t, &fs, ridge).unwrap();
        let want = dense_update_c_oracle(&t, &fs, ridge);
        prop_assert!(max_abs_diff(&got, &want) <= 1e-8 * scale_of(&want));
    }

    #[test]
    fn update_w_matches_dense_least_squares(
        seed in any::<u64>(),
        p in 3usize..8,
        r in 1usize..4,
        l in 2usize..6,
        ridge_choice in 0usize..2,
    ) {
        let ridge = [1e-9, 1e-6][ridge_choice];
        let mut rng = seeded(seed);
        // Keep the labeled block at least as tall as the rank so the
        // regression system is well conditioned and both solvers agree.
        let r = r.min(l.min(p));
        let fs = rand_factors(&mut rng, p, 3, r);
        let lb = rand_label_block(&mut rng, p, l.min(p), 2);
        let got = update_w(&fs, &lb, ridge).unwrap();
        let want = dense_update_w_oracle(&fs, &lb, ridge);
        prop_assert!(max_abs_diff(&got, &want) <= 1e-8 * scale_of(&want));
    }

    #[test]
    fn objective_g_matches_dense_reference(
        seed in any::<u64>(),
        p in 2usize..7,
        r in 1usize..4,
        l in 1usize..5,
        lambda_choice in 0usize..3,
    ) {
        let lambda_g = [0.25, 1.0, 3.0][lambda_choice];
        let mut rng = seeded(seed);
        let fs = rand_factors(&mut rng, p, 3, r);
        let lb = rand_label_block(&mut rng, p, l.min(p), 2);
        let w = CoeffMatrix::new(rand_dense(&mut rng, r, 2));
        let got = objective_g(&fs, &w, &lb, lambda_g).unwrap();
        let want = dense_objective_g(&fs, &w, &lb, lambda_g);
        prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn joint_objective_never_increases_without_ridge(
        seed in any::<u64>(),
        p in 3usize..7,
        u in 3usize..6,
        r in 1usize..3,
        l in 0usize..4,
        lambda_choice in 0usize..3,
    ) {
        let lambda_g = [0.1, 1.0, 3.0][lambda_choice];
        let mut rng = seeded(seed);
        let t = rand_tensor(&mut rng, p, u, 0.5);
        let lb = rand_label_block(&mut rng, p, l.min(p), 2);
        let cfg = FitConfig {
            rank: r,
            lambda_g,
            max_iters: 8,
            tol: f64::MIN_POSITIVE,
            seed,
            restarts: 1,
            ridge: 0.0,
        };
        let report = match fit_class_cp(&t, &lb, &cfg) {
            Ok((_, _, report)) => report,
            // With ridge disabled a random sweep can produce a singular
            // block; that is expected behaviour, not an objective increase.
            Err(Error::Singular { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let mut prev = report.initial_f + report.initial_g;
        for (step, rec) in report.records.iter().enumerate() {
            let cur = rec.f_value + rec.g_value;
            prop_assert!(
                cur <= prev * (1.0 + 1e-10) + 1e-12,
                "objective rose from {prev} to {cur} at sweep {step}"
            );
            prev = cur;
        }
    }

    #[test]
    fn supervised_fit_with_zero_weight_matches_plain_fit(
        seed in any::<u64>(),
        p in 2usize..6,
        u in 2usize..5,
        r in 1usize..3,
        l in 0usize..4,
    ) {
        let mut rng = seeded(seed);
        let t = rand_tensor(&mut rng, p, u, 0.4);
        let lb = rand_label_block(&mut rng, p, l.min(p), 2);
        let cfg = FitConfig {
            rank: r,
            lambda_g: 0.0,
            max_iters: 10,
            tol: 1e-8,
            seed,
            restarts: 2,
            ridge: 1e-9,
        };
        let (fs_joint, _, report_joint) = fit_class_cp(&t, &lb, &cfg).unwrap();
        let (fs_plain, report_plain) = fit_cp(&t, &cfg).unwrap();
        prop_assert_eq!(fs_joint.a.values(), fs_plain.a.values());
        prop_assert_eq!(fs_joint.b.values(), fs_plain.b.values());
        prop_assert_eq!(fs_joint.c.values(), fs_plain.c.values());
        prop_assert_eq!(report_joint.final_objective.to_bits(),
                        report_plain.final_objective.to_bits());
        prop_assert_eq!(report_joint.iterations_run, report_plain.iterations_run);
    }

    #[test]
    fn more_restarts_never_hurt(
        seed in any::<u64>(),
        p in 3usize..6,
        u in 3usize..5,
    ) {
        let mut rng = seeded(seed);
        let t = rand_tensor(&mut rng, p, u, 0.5);
        let base = FitConfig {
            rank: 2,
            lambda_g: 0.0,
            max_iters: 12,
            tol: 1e-10,
            seed,
            restarts: 1,
            ridge: 1e-9,
        };
        let more = FitConfig { restarts: 4, ..base.clone() };
        let (_, report_one) = fit_cp(&t, &base).unwrap();
        let (_, report_four) = fit_cp(&t, &more).unwrap();
        prop_assert!(report_four.final_objective <= report_one.final_objective);
    }
}

#[test]
fn planted_tensor_recovered_at_true_rank() {
    let spec = SynthSpec {
        post_count: 10,
        user_count: 8,
        rank: 2,
        class_count: 2,
        community_count: 2,
        ..SynthSpec::default()
    };
    let (t, _, planted) = generate_exact(&spec).unwrap();
    assert_eq!(objective_f(&t, &planted).unwrap(), 0.0);

    let cfg = FitConfig {
        rank: 2,
        lambda_g: 0.0,
        max_iters: 200,
        tol: 1e-12,
        seed: 7,
        restarts: 5,
        ridge: 1e-9,
    };
    let (fs, report) = fit_cp(&t, &cfg).unwrap();
    let relative = (objective_f(&t, &fs).unwrap() / t.norm_sq()).sqrt();
    assert!(
        relative <= 1e-5,
        "relative reconstruction error {relative} after {} sweeps",
        report.iterations_run
    );
}

#[test]
fn supervised_fit_drives_label_error_down_on_planted_data() {
    let spec = SynthSpec {
        post_count: 12,
        user_count: 8,
        rank: 2,
        class_count: 2,
        community_count: 2,
        ..SynthSpec::default()
    };
    let (t, classes, _) = generate_exact(&spec).unwrap();
    let pairs: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .step_by(2)
        .map(|(i, &c)| (i, c))
        .collect();
    let lb = LabelBlock::from_classes(&pairs, 2).unwrap();
    let cfg = FitConfig {
        rank: 2,
        lambda_g: 1.0,
        max_iters: 200,
        tol: 1e-12,
        seed: 3,
        restarts: 5,
        ridge: 1e-9,
    };
    let (fs, w, report) = fit_class_cp(&t, &lb, &cfg).unwrap();
    let f = objective_f(&t, &fs).unwrap();
    let g = objective_g(&fs, &w, &lb, 1.0).unwrap();
    assert!(f / t.norm_sq() <= 1e-8, "residual reconstruction {f}");
    assert!(g <= 1e-6, "residual label error {g}");
    assert!(report.final_objective <= 1e-6);
}

#[test]
fn descent_holds_on_planted_data_with_supervision() {
    let spec = SynthSpec {
        post_count: 9,
        user_count: 6,
        rank: 2,
        class_count: 2,
        community_count: 2,
        ..SynthSpec::default()
    };
    let (t, classes, _) = generate_exact(&spec).unwrap();
    let pairs: Vec<(usize, usize)> = classes.iter().enumerate().map(|(i, &c)| (i, c)).collect();
    let lb = LabelBlock::from_classes(&pairs, 2).unwrap();
    let cfg = FitConfig {
        rank: 2,
        lambda_g: 0.5,
        max_iters: 40,
        tol: f64::MIN_POSITIVE,
        seed: 11,
        restarts: 1,
        ridge: 0.0,
    };
    let (_, _, report) = fit_class_cp(&t, &lb, &cfg).unwrap();
    let mut prev = report.initial_f + report.initial_g;
    for rec in &report.records {
        let cur = rec.f_value + rec.g_value;
        assert!(cur <= prev * (1.0 + 1e-10) + 1e-12);
        prev = cur;
    }
}

#[test]
fn factor_set_rejects_mismatched_ranks() {
    let a = DenseMatrix::from_fn(3, 2, |_, _| 1.0);
    let b = DenseMatrix::from_fn(4, 3, |_, _| 1.0);
    let c = DenseMatrix::from_fn(4, 2, |_, _| 1.0);
    assert!(FactorSet::new(a, b, c).is_err());
}

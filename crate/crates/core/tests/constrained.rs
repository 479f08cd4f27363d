mod common;

use common::{converter_run, residual};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use thermid::dataset::RegressionMatrices;
use thermid::identify::{
    fit_constrained, fit_least_squares, Block, ConstraintSpec, EqualityConstraint, IdentOptions, SignConstraint,
    SignKind,
};

/// Exact box-constrained optimum by enumerating which sign constraints sit
/// on their bound, row by row. Returns the optimal residual sum of squares.
fn enumeration_oracle(reg: &RegressionMatrices<f64>, spec: &ConstraintSpec<f64>) -> f64 {
    let m = reg.n_temps;
    let p = reg.z.nrows();
    let col = |block: Block, c: usize| if block == Block::A { c } else { m + c };
    let h = &reg.z * reg.z.transpose();
    let target = &reg.next * reg.z.transpose();
    let mut w = DMatrix::zeros(m, p);
    for i in 0..m {
        let signs: Vec<(usize, SignKind)> = spec
            .sign
            .iter()
            .filter(|s| s.row == i)
            .map(|s| (col(s.block, s.col), s.sign))
            .collect();
        let fixed: Vec<(usize, f64)> = spec
            .equality
            .iter()
            .filter(|e| e.row == i)
            .map(|e| (col(e.block, e.col), e.value))
            .collect();
        let mut best = (f64::INFINITY, DVector::zeros(p));
        for mask in 0..(1u32 << signs.len()) {
            let mut pinned: Vec<(usize, f64)> = fixed.clone();
            pinned.extend(
                (0..signs.len())
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| (signs[b].0, 0.0)),
            );
            let free: Vec<usize> = (0..p).filter(|j| pinned.iter().all(|(k, _)| k != j)).collect();
            let mut row = DVector::zeros(p);
            for &(j, v) in &pinned {
                row[j] = v;
            }
            let rhs = DVector::from_fn(free.len(), |a, _| {
                target[(i, free[a])] - pinned.iter().map(|&(j, v)| h[(free[a], j)] * v).sum::<f64>()
            });
            let h_free = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let Some(x) = h_free.lu().solve(&rhs) else { continue };
            for (a, &j) in free.iter().enumerate() {
                row[j] = x[a];
            }
            let feasible = signs.iter().all(|&(j, s)| match s {
                SignKind::NonNegative => row[j] >= -1e-12,
                SignKind::NonPositive => row[j] <= 1e-12,
            });
            let value = (row.transpose() * &h * &row)[(0, 0)] - 2.0 * (target.row(i) * &row)[(0, 0)];
            if feasible && value < best.0 {
                best = (value, row);
            }
        }
        w.row_mut(i).copy_from(&best.1.transpose());
    }
    residual(reg, &w).norm_squared()
}

fn off_diagonal_nonpositive(m: usize) -> ConstraintSpec<f64> {
    let mut spec = ConstraintSpec::default();
    for row in 0..m {
        for col in (0..m).filter(|&c| c != row) {
            spec.sign.push(SignConstraint {
                block: Block::A,
                row,
                col,
                sign: SignKind::NonPositive,
            });
        }
    }
    spec
}

#[test]
fn nonnegative_input_map_is_recovered() {
    let (truth, data) = converter_run(1.0, 10_000, 0.0, 0);
    let reg = data.build_regression().unwrap();
    let free = fit_least_squares(&reg, 0.0).unwrap();
    let fit = fit_constrained(&reg, &ConstraintSpec::nonnegative_b(7, 5), &IdentOptions::default()).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.constraint_violation, 0.0);
    assert!(fit.model.b_bar().iter().all(|&v| v >= 0.0));
    assert!(fit.model.relative_error(&truth) < 1e-6);
    assert!((fit.final_objective - free.final_objective).abs() <= 1e-6);
}

#[test]
fn active_constraints_reach_the_enumerated_optimum() {
    let (_, data) = converter_run(1.0, 6_000, 0.05, 2);
    let reg = data.build_regression().unwrap();
    let spec = off_diagonal_nonpositive(7);
    let fit = fit_constrained(&reg, &spec, &IdentOptions::default()).unwrap();
    let best = enumeration_oracle(&reg, &spec);
    assert!(fit.converged);
    assert_eq!(fit.constraint_violation, 0.0);
    assert!(fit.final_objective >= best * (1.0 - 1e-12));
    assert!(
        (fit.final_objective - best) <= 1e-8 * best,
        "{} vs {best}",
        fit.final_objective
    );
}

#[test]
fn inactive_equality_leaves_the_optimum_alone() {
    let (truth, data) = converter_run(1.0, 6_000, 0.0, 0);
    let reg = data.build_regression().unwrap();
    let spec = ConstraintSpec {
        equality: vec![EqualityConstraint {
            block: Block::A,
            row: 0,
            col: 0,
            value: truth.a_bar()[(0, 0)],
        }],
        ..ConstraintSpec::default()
    };
    let fit = fit_constrained(&reg, &spec, &IdentOptions::default()).unwrap();
    assert_eq!(fit.model.a_bar()[(0, 0)], truth.a_bar()[(0, 0)]);
    assert!(fit.final_objective <= 1e-9);
}

#[test]
fn equality_is_held_exactly() {
    let (_, data) = converter_run(1.0, 4_000, 0.1, 1);
    let reg = data.build_regression().unwrap();
    let spec =
        ConstraintSpec::from_toml_str("[[equality]]\nmatrix = \"A\"\nrow = 0\ncol = 0\nvalue = 0.9\n", 7, 5).unwrap();
    let fit = fit_constrained(&reg, &spec, &IdentOptions::default()).unwrap();
    assert_eq!(fit.model.a_bar()[(0, 0)], 0.9);
    let best = enumeration_oracle(&reg, &spec);
    assert!((fit.final_objective - best).abs() <= 1e-8 * best);
}

#[test]
fn unconstrained_fit_matches_closed_form() {
    let (_, data) = converter_run(1.0, 4_000, 0.1, 4);
    let reg = data.build_regression().unwrap();
    for eps in [0.0, 10.0] {
        let options = IdentOptions {
            epsilon: eps,
            ..IdentOptions::default()
        };
        let fit = fit_constrained(&reg, &ConstraintSpec::unconstrained(), &options).unwrap();
        let closed = fit_least_squares(&reg, eps).unwrap();
        let gap = (fit.model.stacked() - closed.model.stacked()).norm() / closed.model.stacked().norm();
        assert!(gap < 1e-9, "eps {eps}: {gap:e}");
    }
}

#[test]
fn rank_requirement_is_reported() {
    let (_, data) = converter_run(1.0, 4_000, 0.0, 0);
    let reg = data.build_regression().unwrap();
    let mut spec = ConstraintSpec::nonnegative_b(7, 5);
    spec.require_full_column_rank_b = true;
    let fit = fit_constrained(&reg, &spec, &IdentOptions::default()).unwrap();
    assert_eq!(fit.rank_condition_met, Some(true));
    assert_eq!(fit.singular_values_b.len(), 5);
    let plain = fit_constrained(&reg, &ConstraintSpec::unconstrained(), &IdentOptions::default()).unwrap();
    assert_eq!(plain.rank_condition_met, None);
}

#[test]
fn iteration_budget_exhaustion_is_not_an_error() {
    let (_, data) = converter_run(1.0, 4_000, 0.1, 5);
    let reg = data.build_regression().unwrap();
    let options = IdentOptions {
        max_iterations: 1,
        step_tolerance: 1e-300,
        objective_tolerance: 1e-300,
        ..IdentOptions::default()
    };
    let fit = fit_constrained(&reg, &off_diagonal_nonpositive(7), &options).unwrap();
    assert_eq!(fit.iterations_used, 1);
    assert!(!fit.converged);
    assert_eq!(fit.constraint_violation, 0.0);
}

type Problem = (DMatrix<f64>, DMatrix<f64>, Vec<(usize, usize, bool)>);

fn small_problem() -> impl Strategy<Value = Problem> {
    (
        proptest::collection::vec(-1.0f64..1.0, 5 * 30),
        proptest::collection::vec(-1.0f64..1.0, 2 * 30),
        proptest::collection::vec((0usize..2, 0usize..5, any::<bool>()), 0..6),
    )
        .prop_map(|(z, w, signs)| {
            let z = DMatrix::from_vec(5, 30, z);
            let next = DMatrix::from_vec(2, 5, w[..10].to_vec()) * &z + DMatrix::from_vec(2, 30, w) * 0.1;
            (z, next, signs)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_enumeration_on_random_boxes((z, next, signs) in small_problem()) {
        let reg = RegressionMatrices::new(z, next, 2).unwrap();
        let mut spec = ConstraintSpec::default();
        for (row, col, nonneg) in signs {
            let (block, col) = if col < 2 { (Block::A, col) } else { (Block::B, col - 2) };
            if spec.sign.iter().any(|s| s.block == block && s.row == row && s.col == col) {
                continue;
            }
            let sign = if nonneg { SignKind::NonNegative } else { SignKind::NonPositive };
            spec.sign.push(SignConstraint { block, row, col, sign });
        }
        let fit = fit_constrained(&reg, &spec, &IdentOptions::default()).unwrap();
        let best = enumeration_oracle(&reg, &spec);
        prop_assert!(fit.converged);
        prop_assert_eq!(fit.constraint_violation, 0.0);
        prop_assert!((fit.final_objective - best).abs() <= 1e-8 * best.max(1e-12), "{} vs {}", fit.final_objective, best);
        prop_assert!(fit.objective_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

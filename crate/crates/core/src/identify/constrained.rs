//! Constrained identification by projected gradient descent.
//!
//! Constraints act on single entries of Ā or B̄ (sign bounds or fixed
//! values), so the feasible set is a box and projecting onto it is exact:
//! clamp the bounded entries, overwrite the fixed ones.
//!
//! The solver works on column-scaled variables `W = V·S` with
//! `S = diag(1/√H_jj)`, `H = Z Zᵀ + εI`. A positive diagonal scaling keeps
//! the box separable, so the projection stays exact while the Jacobi scaling
//! evens out temperature and power magnitudes.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::{check_rank, residual_series, FitReport, LinearThermalModel, RegressorSvd};
use crate::dataset::RegressionMatrices;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Block {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "B")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SignKind {
    #[serde(rename = ">=0")]
    NonNegative,
    #[serde(rename = "<=0")]
    NonPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignConstraint {
    pub block: Block,
    pub row: usize,
    pub col: usize,
    pub sign: SignKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualityConstraint<T: Real> {
    pub block: Block,
    pub row: usize,
    pub col: usize,
    pub value: T,
}

/// Per-entry constraints on `(Ā, B̄)` and the rank requirement on B̄.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec<T: Real> {
    pub sign: Vec<SignConstraint>,
    pub equality: Vec<EqualityConstraint<T>>,
    pub require_full_column_rank_b: bool,
    /// Singular-value floor relative to the largest singular value.
    pub rank_tolerance: T,
}

impl<T: Real> Default for ConstraintSpec<T> {
    fn default() -> Self {
        Self {
            sign: Vec::new(),
            equality: Vec::new(),
            require_full_column_rank_b: false,
            rank_tolerance: T::lit(1e-10),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    #[serde(default)]
    require_full_column_rank_b: bool,
    rank_tolerance: Option<f64>,
    #[serde(default)]
    sign: Vec<SignEntry>,
    #[serde(default)]
    equality: Vec<EqualityEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignEntry {
    matrix: Block,
    row: Option<usize>,
    col: Option<usize>,
    sign: SignKind,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EqualityEntry {
    matrix: Block,
    row: usize,
    col: usize,
    value: f64,
}

impl<T: Real> ConstraintSpec<T> {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    /// Every entry of B̄ (m×n) constrained to be nonnegative.
    pub fn nonnegative_b(m: usize, n: usize) -> Self {
        let sign = (0..m)
            .flat_map(|row| {
                (0..n).map(move |col| SignConstraint {
                    block: Block::B,
                    row,
                    col,
                    sign: SignKind::NonNegative,
                })
            })
            .collect();
        Self {
            sign,
            ..Self::default()
        }
    }

    /// Parses a constraint document for a model with `m` temperatures and
    /// `n` powers. A sign entry without `row` or `col` applies to every row
    /// or column of its matrix.
    ///
    /// ```toml
    /// require_full_column_rank_b = true
    /// rank_tolerance = 1e-10
    /// [[sign]]
    /// matrix = "B"
    /// sign = ">=0"
    /// [[equality]]
    /// matrix = "A"
    /// row = 0
    /// col = 0
    /// value = 0.9
    /// ```
    pub fn from_toml_str(text: &str, m: usize, n: usize) -> Result<Self> {
        let file: ConstraintFile = toml::from_str(text).map_err(|e| Error::Constraint(e.to_string()))?;
        let dims = |block: Block| match block {
            Block::A => (m, m),
            Block::B => (m, n),
        };
        let mut sign = Vec::new();
        for entry in &file.sign {
            let (rows, cols) = dims(entry.matrix);
            let row_range = entry.row.map_or(0..rows, |r| r..r + 1);
            for row in row_range {
                let col_range = entry.col.map_or(0..cols, |c| c..c + 1);
                for col in col_range {
                    sign.push(SignConstraint {
                        block: entry.matrix,
                        row,
                        col,
                        sign: entry.sign,
                    });
                }
            }
        }
        let equality = file
            .equality
            .iter()
            .map(|e| EqualityConstraint {
                block: e.matrix,
                row: e.row,
                col: e.col,
                value: T::lit(e.value),
            })
            .collect();
        let spec = Self {
            sign,
            equality,
            require_full_column_rank_b: file.require_full_column_rank_b,
            rank_tolerance: T::lit(file.rank_tolerance.unwrap_or(1e-10)),
        };
        spec.validate(m, n)?;
        Ok(spec)
    }

    /// Checks indices and consistency for a model with `m` temperatures and
    /// `n` powers.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let in_range = |block: Block, row: usize, col: usize| match block {
            Block::A => row < m && col < m,
            Block::B => row < m && col < n,
        };
        if !(self.rank_tolerance >= T::zero()) {
            return Err(Error::Constraint("rank tolerance must be >= 0".into()));
        }
        let mut fixed: HashMap<(Block, usize, usize), T> = HashMap::new();
        for e in &self.equality {
            if !in_range(e.block, e.row, e.col) {
                return Err(Error::Constraint(format!(
                    "equality on {:?}[{}, {}] out of range",
                    e.block, e.row, e.col
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::Constraint(format!(
                    "equality on {:?}[{}, {}] has a non-finite value",
                    e.block, e.row, e.col
                )));
            }
            if let Some(&prev) = fixed.get(&(e.block, e.row, e.col)) {
                if prev != e.value {
                    return Err(Error::Constraint(format!(
                        "infeasible: {:?}[{}, {}] fixed to both {prev} and {}",
                        e.block, e.row, e.col, e.value
                    )));
                }
            }
            fixed.insert((e.block, e.row, e.col), e.value);
        }
        for s in &self.sign {
            if !in_range(s.block, s.row, s.col) {
                return Err(Error::Constraint(format!(
                    "sign constraint on {:?}[{}, {}] out of range",
                    s.block, s.row, s.col
                )));
            }
            if fixed.contains_key(&(s.block, s.row, s.col)) {
                return Err(Error::Constraint(format!(
                    "{:?}[{}, {}] carries both a sign and an equality constraint",
                    s.block, s.row, s.col
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.sign.is_empty() && self.equality.is_empty()
    }
}

/// Solver settings for [`fit_constrained`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentOptions<T: Real> {
    /// Ridge weight ε ≥ 0.
    pub epsilon: T,
    pub max_iterations: usize,
    /// Stop when `‖ΔW‖_F ≤ step_tolerance · max(1, ‖W‖_F)`.
    pub step_tolerance: T,
    /// Stop when the objective decrease is below `objective_tolerance` times
    /// the current objective.
    pub objective_tolerance: T,
}

impl<T: Real> Default for IdentOptions<T> {
    fn default() -> Self {
        Self {
            epsilon: T::zero(),
            max_iterations: 20_000,
            step_tolerance: T::lit(1e-12),
            objective_tolerance: T::lit(1e-15),
        }
    }
}

impl<T: Real> IdentOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::Argument(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be positive".into()));
        }
        if !(self.step_tolerance > T::zero() && self.objective_tolerance > T::zero()) {
            return Err(Error::Argument("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Entry-wise feasible box for `W`.
struct Projector<T: Real> {
    lower: DMatrix<T>,
    upper: DMatrix<T>,
}

impl<T: Real> Projector<T> {
    fn new(spec: &ConstraintSpec<T>, m: usize, n: usize) -> Self {
        let inf = T::max_value().expect("bounded scalar");
        let mut lower = DMatrix::from_element(m, m + n, -inf);
        let mut upper = DMatrix::from_element(m, m + n, inf);
        let column = |block: Block, col: usize| match block {
            Block::A => col,
            Block::B => m + col,
        };
        for s in &spec.sign {
            let at = (s.row, column(s.block, s.col));
            match s.sign {
                SignKind::NonNegative => lower[at] = lower[at].max(T::zero()),
                SignKind::NonPositive => upper[at] = upper[at].min(T::zero()),
            }
        }
        for e in &spec.equality {
            let at = (e.row, column(e.block, e.col));
            lower[at] = e.value;
            upper[at] = e.value;
        }
        Self { lower, upper }
    }

    /// Bounds for the scaled variable `V = W S⁻¹`.
    fn scaled(&self, scale: &DVector<T>) -> Self {
        let div = |b: &DMatrix<T>| {
            DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| {
                let v = b[(i, j)];
                if v.abs() == T::max_value().expect("bounded scalar") {
                    v
                } else {
                    v / scale[j]
                }
            })
        };
        Self {
            lower: div(&self.lower),
            upper: div(&self.upper),
        }
    }

    fn project(&self, w: &mut DMatrix<T>) {
        w.zip_zip_apply(&self.lower, &self.upper, |x, lo, hi| {
            if lo == hi {
                *x = lo;
            } else {
                *x = x.max(lo).min(hi);
            }
        });
    }

    fn violation(&self, w: &DMatrix<T>) -> T {
        let mut worst = T::zero();
        for ((&x, &lo), &hi) in w.iter().zip(self.lower.iter()).zip(self.upper.iter()) {
            worst = worst.max(lo - x).max(x - hi);
        }
        worst
    }
}

/// Newton step on row `i` of `v` over its interior entries, projected onto
/// the box and halved until the row objective decreases. Leaves the row
/// untouched when no decrease is found.
fn refine_row<T: Real>(v: &mut DMatrix<T>, i: usize, h: &DMatrix<T>, c: &DMatrix<T>, bounds: &Projector<T>) {
    let p = v.ncols();
    let row = v.row(i).transpose();
    let free: Vec<usize> = (0..p)
        .filter(|&j| bounds.lower[(i, j)] < row[j] && row[j] < bounds.upper[(i, j)])
        .collect();
    if free.is_empty() {
        return;
    }
    let curvature = h * &row;
    let target = c.row(i).transpose();
    let noise = (curvature.norm() + target.norm()) * T::eps() * T::from_count(p);
    let grad = curvature - target;
    let h_free = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
    let g_free = DVector::from_fn(free.len(), |a, _| grad[free[a]]);
    let Some(chol) = h_free.cholesky() else {
        return;
    };
    let newton = -chol.solve(&g_free);
    let half = T::lit(0.5);
    let mut alpha = T::one();
    for _ in 0..60 {
        let mut trial = row.clone();
        for (a, &j) in free.iter().enumerate() {
            let x = row[j] + alpha * newton[a];
            trial[j] = x.max(bounds.lower[(i, j)]).min(bounds.upper[(i, j)]);
        }
        let delta = &trial - &row;
        let change = grad.dot(&delta) + (h * &delta).dot(&delta) * half;
        if change < -noise * delta.norm() {
            v.row_mut(i).copy_from(&trial.transpose());
            return;
        }
        alpha *= half;
    }
}

fn frobenius_dot<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Projected-gradient identification of `W = [Ā B̄]` under `constraints`.
///
/// Minimizes `‖Uout − W Z‖²_F + ε‖W‖²_F` over the constraint box, starting
/// from the projected closed-form solution (or zero when the Gram matrix is
/// singular and ε = 0). The step starts at `1/L`, `L = λ_max` of the scaled
/// Gram matrix, and is halved until the quadratic upper bound holds.
/// Each projected step is followed by a Newton step on the entries it left
/// free, kept only when it lowers the objective, so the recorded objective
/// never increases. Stopping compares the length of each step with
/// `step_tolerance` and its decrease with `objective_tolerance`.
/// Running out of iterations yields a report with `converged = false`, not
/// an error.
pub fn fit_constrained<T: Real>(
    reg: &RegressionMatrices<T>,
    constraints: &ConstraintSpec<T>,
    options: &IdentOptions<T>,
) -> Result<FitReport<T>> {
    options.validate()?;
    let m = reg.n_temps;
    let n = reg.n_powers;
    let p = m + n;
    constraints.validate(m, n)?;
    if reg.z.ncols() == 0 {
        return Err(Error::InsufficientData("no transitions".into()));
    }
    let eps = options.epsilon;
    let z_t = reg.z.transpose();
    let mut gram = &reg.z * &z_t;
    for i in 0..p {
        gram[(i, i)] += eps;
    }
    let cross = &reg.next * &z_t;
    let scale = DVector::from_fn(p, |j, _| {
        let d = gram[(j, j)];
        if d > T::zero() {
            T::one() / d.sqrt()
        } else {
            T::one()
        }
    });
    let h = DMatrix::from_fn(p, p, |i, j| scale[i] * gram[(i, j)] * scale[j]);
    let c = DMatrix::from_fn(m, p, |i, j| cross[(i, j)] * scale[j]);

    let box_w = Projector::new(constraints, m, n);
    let box_v = box_w.scaled(&scale);

    let svd = RegressorSvd::new(&reg.z);
    let (hi, lo) = (svd.max_singular_value(), svd.min_singular_value());
    let solvable = eps > T::zero() || lo * lo > T::eps() * hi * hi;
    let start = if solvable {
        svd.ridge_solution(&reg.next, eps)
    } else {
        DMatrix::zeros(m, p)
    };
    let mut v = DMatrix::from_fn(m, p, |i, j| start[(i, j)] / scale[j]);
    box_v.project(&mut v);

    let to_w = |v: &DMatrix<T>| DMatrix::from_fn(m, p, |i, j| v[(i, j)] * scale[j]);
    let objective_at = |w: &DMatrix<T>| -> T {
        let r = &reg.next - w * &reg.z;
        r.norm_squared() + eps * w.norm_squared()
    };

    let lipschitz = h.clone().symmetric_eigenvalues().max();
    let mut step = if lipschitz > T::zero() {
        T::one() / lipschitz
    } else {
        T::one()
    };
    let min_step = step * T::eps();
    let two = T::lit(2.0);

    // Projected step from `point` with backtracking; halves `step` until the
    // quadratic upper bound holds. `None` when the projection does not move.
    let projected_step = |point: &DMatrix<T>, grad: &DMatrix<T>, step: &mut T| -> Option<DMatrix<T>> {
        loop {
            let mut candidate = point - grad * *step;
            box_v.project(&mut candidate);
            let delta = &candidate - point;
            let d2 = delta.norm_squared();
            if d2 == T::zero() {
                return None;
            }
            if frobenius_dot(&(&delta * &h), &delta) <= d2 / *step {
                return Some(candidate);
            }
            *step /= two;
            if *step < min_step {
                return None;
            }
        }
    };
    // Exact objective change (halved) of moving from `from` by `delta`.
    let change_from = |grad_from: &DMatrix<T>, delta: &DMatrix<T>| -> T {
        frobenius_dot(grad_from, delta) + frobenius_dot(&(delta * &h), delta) / two
    };

    // Half the objective, advanced by the quadratic-form change of each step.
    let mut half_obj = objective_at(&to_w(&v)) / two;
    let mut history = vec![half_obj * two];
    let mut converged = false;
    let mut iterations = 0;

    // Each iteration takes a backtracked projected-gradient step, then
    // refines every row by a Newton step restricted to the entries the
    // projection left strictly inside their bounds, projected back and
    // halved until it lowers the objective.
    while iterations < options.max_iterations {
        iterations += 1;
        let grad = &v * &h - &c;
        let Some(plain) = projected_step(&v, &grad, &mut step) else {
            converged = step >= min_step;
            break;
        };
        let mut next = plain;
        for i in 0..m {
            refine_row(&mut next, i, &h, &c, &box_v);
        }
        let delta = &next - &v;
        let change = change_from(&grad, &delta);

        let step_norm = DMatrix::from_fn(m, p, |i, j| delta[(i, j)] * scale[j]).norm();
        v = next;
        half_obj = (half_obj + change).max(T::zero());
        history.push(half_obj * two);
        let w_norm = to_w(&v).norm();
        if step_norm <= options.step_tolerance * w_norm.max(T::one())
            || -change <= options.objective_tolerance * half_obj
        {
            converged = true;
            break;
        }
    }

    let mut w = to_w(&v);
    box_w.project(&mut w);
    let model = LinearThermalModel::from_stacked(&w, reg)?;
    let residuals = residual_series(&model, reg)?;
    let rank = check_rank(&model, constraints.rank_tolerance);
    Ok(FitReport {
        final_objective: residuals.sum_of_squares(),
        iterations_used: iterations,
        converged,
        constraint_violation: box_w.violation(&w),
        rank_condition_met: constraints.require_full_column_rank_b.then_some(rank.full_column_rank),
        singular_values_b: rank.singular_values,
        objective_history: history,
        model,
    })
}

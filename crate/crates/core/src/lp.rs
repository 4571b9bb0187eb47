//! Dense linear programs of the form
//!
//! ```text
//! maximize    c · x
//! subject to  A x = b
//!             0 <= x_j <= u_j   (u_j optional)
//! ```
//!
//! [`solve`] runs a two-phase tableau simplex with Bland's rule.
//! [`enumerate_vertices`] finds the same optimum by brute force over every
//! basis and is kept as an independent cross-check for small instances.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest pivot magnitude accepted by the simplex.
pub const PIVOT_TOL: f64 = 1e-9;
/// Phase-one infeasibility and vertex feasibility threshold.
pub const FEASIBILITY_TOL: f64 = 1e-6;

const MAX_PIVOTS: usize = 50_000;
/// Upper limit on the number of candidate bases the enumerator will visit.
pub const MAX_ENUMERATED_BASES: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqConstraint {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

/// A maximization problem with equality rows and optional upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_constraints: Vec<EqConstraint>,
    pub upper_bounds: Vec<Option<f64>>,
    pub var_names: Vec<String>,
}

impl LpProblem {
    /// Empty problem over `num_vars` variables named `x1..xn`, zero objective.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            eq_constraints: Vec::new(),
            upper_bounds: vec![None; num_vars],
            var_names: (1..=num_vars).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn maximize(mut self, objective: Vec<f64>) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_equality(mut self, coefficients: Vec<f64>, rhs: f64) -> Self {
        self.eq_constraints.push(EqConstraint { coefficients, rhs });
        self
    }

    pub fn with_upper_bound(mut self, var: usize, bound: f64) -> Self {
        self.upper_bounds[var] = Some(bound);
        self
    }

    pub fn with_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.var_names = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("LpProblem serializes")
    }

    fn var_label(&self, j: usize) -> String {
        self.var_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("x{}", j + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
}

/// Largest violations of each feasibility condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub equality: f64,
    pub upper_bound: f64,
    pub negativity: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus, num_vars: usize) -> Self {
        Self {
            status,
            values: vec![0.0; num_vars],
            objective_value: 0.0,
        }
    }

    pub fn residuals(&self, problem: &LpProblem) -> Residuals {
        let equality = problem
            .eq_constraints
            .iter()
            .map(|row| (dot(&row.coefficients, &self.values) - row.rhs).abs())
            .fold(0.0, f64::max);
        let upper_bound = problem
            .upper_bounds
            .iter()
            .zip(&self.values)
            .filter_map(|(u, x)| u.map(|u| (x - u).max(0.0)))
            .fold(0.0, f64::max);
        let negativity = self.values.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max);
        Residuals {
            equality,
            upper_bound,
            negativity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoVariables,
    ObjectiveLength { expected: usize, found: usize },
    BoundsLength { expected: usize, found: usize },
    NamesLength { expected: usize, found: usize },
    RowLength { row: usize, expected: usize, found: usize },
    NonFiniteCoefficient { row: usize },
    NonFiniteObjective { var: String },
    InvalidRhs { row: usize, value: f64 },
    InvalidUpperBound { var: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVariables => write!(f, "problem has no variables"),
            Violation::ObjectiveLength { expected, found } => {
                write!(f, "objective has {found} coefficients, expected {expected}")
            }
            Violation::BoundsLength { expected, found } => {
                write!(f, "upper bound list has {found} entries, expected {expected}")
            }
            Violation::NamesLength { expected, found } => {
                write!(f, "name list has {found} entries, expected {expected}")
            }
            Violation::RowLength {
                row,
                expected,
                found,
            } => write!(f, "equality row {row} has {found} coefficients, expected {expected}"),
            Violation::NonFiniteCoefficient { row } => {
                write!(f, "equality row {row} has a non-finite coefficient")
            }
            Violation::NonFiniteObjective { var } => {
                write!(f, "objective coefficient of {var} is not finite")
            }
            Violation::InvalidRhs { row, value } => {
                write!(f, "equality row {row} has rhs {value}, must be finite and >= 0")
            }
            Violation::InvalidUpperBound { var, value } => {
                write!(f, "upper bound of {var} is {value}, must be finite and >= 0")
            }
        }
    }
}

/// Every structural rule a problem breaks. Empty means well formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Invalid(ValidationReport),
    #[error("instance too large to enumerate: {bases} candidate bases exceeds limit {limit}")]
    TooLarge { bases: u128, limit: u128 },
    #[error("simplex did not terminate within {0} pivots")]
    PivotLimit(usize),
}

pub fn validate(problem: &LpProblem) -> ValidationReport {
    let n = problem.num_vars;
    let mut violations = Vec::new();
    if n == 0 {
        violations.push(Violation::NoVariables);
    }
    if problem.objective.len() != n {
        violations.push(Violation::ObjectiveLength {
            expected: n,
            found: problem.objective.len(),
        });
    }
    if problem.upper_bounds.len() != n {
        violations.push(Violation::BoundsLength {
            expected: n,
            found: problem.upper_bounds.len(),
        });
    }
    if problem.var_names.len() != n {
        violations.push(Violation::NamesLength {
            expected: n,
            found: problem.var_names.len(),
        });
    }
    for (j, c) in problem.objective.iter().enumerate() {
        if !c.is_finite() {
            violations.push(Violation::NonFiniteObjective {
                var: problem.var_label(j),
            });
        }
    }
    for (i, row) in problem.eq_constraints.iter().enumerate() {
        if row.coefficients.len() != n {
            violations.push(Violation::RowLength {
                row: i,
                expected: n,
                found: row.coefficients.len(),
            });
        }
        if row.coefficients.iter().any(|a| !a.is_finite()) {
            violations.push(Violation::NonFiniteCoefficient { row: i });
        }
        if !row.rhs.is_finite() || row.rhs < 0.0 {
            violations.push(Violation::InvalidRhs {
                row: i,
                value: row.rhs,
            });
        }
    }
    for (j, bound) in problem.upper_bounds.iter().enumerate() {
        if let Some(u) = bound {
            if !u.is_finite() || *u < 0.0 {
                violations.push(Violation::InvalidUpperBound {
                    var: problem.var_label(j),
                    value: *u,
                });
            }
        }
    }
    ValidationReport { violations }
}

fn checked(problem: &LpProblem) -> Result<(), LpError> {
    let report = validate(problem);
    if report.is_empty() {
        Ok(())
    } else {
        Err(LpError::Invalid(report))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Equality rows first, then one `x_j + s_j = u_j` row per bounded variable.
/// Columns are the structural variables followed by the bound slacks.
struct StandardForm {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    num_structural: usize,
    num_eq: usize,
}

impl StandardForm {
    fn new(problem: &LpProblem) -> Self {
        let n = problem.num_vars;
        let bounded: Vec<(usize, f64)> = problem
            .upper_bounds
            .iter()
            .enumerate()
            .filter_map(|(j, u)| u.map(|u| (j, u)))
            .collect();
        let ncols = n + bounded.len();
        let mut rows = Vec::with_capacity(problem.eq_constraints.len() + bounded.len());
        let mut rhs = Vec::with_capacity(rows.capacity());
        for eq in &problem.eq_constraints {
            let mut row = eq.coefficients.clone();
            row.resize(ncols, 0.0);
            rows.push(row);
            rhs.push(eq.rhs);
        }
        for (k, &(j, u)) in bounded.iter().enumerate() {
            let mut row = vec![0.0; ncols];
            row[j] = 1.0;
            row[n + k] = 1.0;
            rows.push(row);
            rhs.push(u);
        }
        let mut cost = problem.objective.clone();
        cost.resize(ncols, 0.0);
        Self {
            rows,
            rhs,
            cost,
            num_structural: n,
            num_eq: problem.eq_constraints.len(),
        }
    }

    fn num_cols(&self) -> usize {
        self.cost.len()
    }

    fn solution(&self, problem: &LpProblem, full: &[f64]) -> LpSolution {
        let values: Vec<f64> = full[..self.num_structural]
            .iter()
            .map(|&v| if v < 0.0 && v > -PIVOT_TOL { 0.0 } else { v })
            .collect();
        let objective_value = dot(&problem.objective, &values);
        LpSolution {
            status: LpStatus::Optimal,
            values,
            objective_value,
        }
    }
}

struct Tableau {
    /// `m` rows of `width` coefficients followed by the rhs.
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.cells[i][self.width]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.cells[row][col];
        for v in self.cells[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.cells[row].clone();
        for (i, r) in self.cells.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let priced: f64 = self
            .basis
            .iter()
            .zip(&self.cells)
            .map(|(&b, row)| cost[b] * row[j])
            .sum();
        cost[j] - priced
    }

    /// Maximizes `cost` over the columns `0..active` with Bland's rule.
    fn optimize(&mut self, cost: &[f64], active: usize) -> Result<Outcome, LpError> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::PivotLimit(MAX_PIVOTS));
            }
            let entering = (0..active)
                .filter(|j| !self.basis.contains(j))
                .find(|&j| self.reduced_cost(cost, j) > PIVOT_TOL);
            let Some(col) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.cells.len() {
                let a = self.cells[i][col];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * best_ratio.abs().max(1.0);
                        if (!tie && ratio < best_ratio) || (tie && self.basis[i] < self.basis[best]) {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            match leaving {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(Outcome::Unbounded),
            }
        }
    }
}

/// Solves the problem with the two-phase simplex method.
///
/// Output is a deterministic function of the input: entering and leaving
/// variables are always the lowest eligible indices.
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    checked(problem)?;
    let form = StandardForm::new(problem);
    let ncols = form.num_cols();
    let m = form.rows.len();
    let num_art = form.num_eq;

    // Artificial columns cover the equality rows; bound rows start on their slacks.
    let width = ncols + num_art;
    let mut cells = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for (i, (row, &b)) in form.rows.iter().zip(&form.rhs).enumerate() {
        let mut r = row.clone();
        r.resize(width + 1, 0.0);
        if i < num_art {
            r[ncols + i] = 1.0;
            basis.push(ncols + i);
        } else {
            basis.push(form.num_structural + (i - num_art));
        }
        r[width] = b;
        cells.push(r);
    }
    let mut tab = Tableau {
        cells,
        basis,
        width,
        pivots: 0,
    };

    if num_art > 0 {
        let mut phase_one = vec![0.0; width];
        for c in &mut phase_one[ncols..] {
            *c = -1.0;
        }
        tab.optimize(&phase_one, width)?;
        let infeasibility: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= ncols)
            .map(|(i, _)| tab.rhs(i))
            .sum();
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, problem.num_vars));
        }
        // Drive remaining artificials out; a row with no usable pivot is redundant.
        let mut i = 0;
        while i < tab.cells.len() {
            if tab.basis[i] >= ncols {
                match (0..ncols).find(|&j| tab.cells[i][j].abs() > PIVOT_TOL) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.cells.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = form.cost.clone();
    cost.resize(width, 0.0);
    match tab.optimize(&cost, ncols)? {
        Outcome::Unbounded => Ok(LpSolution::without_point(LpStatus::Unbounded, problem.num_vars)),
        Outcome::Optimal => {
            let mut full = vec![0.0; ncols];
            for (i, &b) in tab.basis.iter().enumerate() {
                if b < ncols {
                    full[b] = tab.rhs(i);
                }
            }
            Ok(form.solution(problem, &full))
        }
    }
}

/// Row-reduces `[rows | rhs]` to a set of linearly independent rows.
/// Returns `None` when the system is inconsistent.
fn independent_rows(rows: &[Vec<f64>], rhs: &[f64]) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let mut r = r.clone();
            r.push(b);
            r
        })
        .collect();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        if rank == m.len() {
            break;
        }
        let (best, mag) = (rank..m.len())
            .map(|i| (i, m[i][col].abs()))
            .fold((rank, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= PIVOT_TOL {
            continue;
        }
        m.swap(rank, best);
        let p = m[rank][col];
        for v in m[rank].iter_mut() {
            *v /= p;
        }
        let pivot_row = m[rank].clone();
        for (i, r) in m.iter_mut().enumerate() {
            if i != rank && r[col] != 0.0 {
                let f = r[col];
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        rank += 1;
    }
    if m[rank..].iter().any(|r| r[ncols].abs() > FEASIBILITY_TOL) {
        return None;
    }
    m.truncate(rank);
    let b = m.iter_mut().map(|r| r.pop().unwrap_or(0.0)).collect();
    Some((m, b))
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[piv][col].abs() <= PIVOT_TOL {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[i][k] -= f * a[col][k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Calls `visit` with every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All basic feasible solutions of `rows x = rhs, x >= 0`, deduplicated.
fn basic_solutions(rows: &[Vec<f64>], rhs: &[f64], ncols: usize) -> Result<Vec<Vec<f64>>, LpError> {
    let Some((rows, rhs)) = independent_rows(rows, rhs) else {
        return Ok(Vec::new());
    };
    let r = rows.len();
    let bases = binomial(ncols, r);
    if bases > MAX_ENUMERATED_BASES {
        return Err(LpError::TooLarge {
            bases,
            limit: MAX_ENUMERATED_BASES,
        });
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    for_each_combination(ncols, r, |cols| {
        let square = rows
            .iter()
            .map(|row| cols.iter().map(|&c| row[c]).collect())
            .collect();
        let Some(xb) = solve_square(square, rhs.clone()) else {
            return;
        };
        if xb.iter().any(|&v| v < -PIVOT_TOL) {
            return;
        }
        let mut x = vec![0.0; ncols];
        for (&c, &v) in cols.iter().zip(&xb) {
            x[c] = v.max(0.0);
        }
        let seen = found
            .iter()
            .any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= FEASIBILITY_TOL));
        if !seen {
            found.push(x);
        }
    });
    Ok(found)
}

/// Every vertex of the feasible region, in the original variables.
pub fn feasible_vertices(problem: &LpProblem) -> Result<Vec<Vec<f64>>, LpError> {
    checked(problem)?;
    let form = StandardForm::new(problem);
    let mut vertices = basic_solutions(&form.rows, &form.rhs, form.num_cols())?;
    for v in &mut vertices {
        v.truncate(form.num_structural);
    }
    let mut distinct: Vec<Vec<f64>> = Vec::with_capacity(vertices.len());
    for v in vertices {
        if !distinct
            .iter()
            .any(|d| d.iter().zip(&v).all(|(x, y)| (x - y).abs() <= FEASIBILITY_TOL))
        {
            distinct.push(v);
        }
    }
    Ok(distinct)
}

/// Brute-force optimum over all basic feasible solutions.
///
/// Unboundedness is detected by enumerating the extreme rays of the
/// recession cone, normalized to unit sum.
pub fn enumerate_vertices(problem: &LpProblem) -> Result<LpSolution, LpError> {
    checked(problem)?;
    let form = StandardForm::new(problem);
    let ncols = form.num_cols();
    let vertices = basic_solutions(&form.rows, &form.rhs, ncols)?;
    if vertices.is_empty() {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, problem.num_vars));
    }

    let mut ray_rows = form.rows.clone();
    let mut ray_rhs = vec![0.0; ray_rows.len()];
    ray_rows.push(vec![1.0; ncols]);
    ray_rhs.push(1.0);
    let rays = basic_solutions(&ray_rows, &ray_rhs, ncols)?;
    if rays.iter().any(|d| dot(&form.cost, d) > PIVOT_TOL) {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, problem.num_vars));
    }

    let mut best: Option<(f64, &Vec<f64>)> = None;
    for v in &vertices {
        let value = dot(&form.cost, v);
        if best.is_none_or(|(b, _)| value > b + 1e-12) {
            best = Some((value, v));
        }
    }
    let (_, point) = best.expect("at least one vertex");
    Ok(form.solution(problem, point))
}

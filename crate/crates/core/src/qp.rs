//! Strictly convex QP with linear inequality constraints, dual extraction and
//! support-constraint counting.
//!
//! A [`ScenarioProgram`] stores each distinct constraint direction once as a
//! *template*; rows reference a template and carry their own right-hand
//! side. Scenario programs repeat the same comfort direction for every
//! scenario, so a template is only as tight as its smallest right-hand side.
//! The solver works on that tightest row per template (ties go to the lowest
//! row index) and hands the multiplier back to it; every other row of the
//! template gets a zero multiplier.
//!
//! The optimizer is the dual active-set method of Goldfarb and Idnani. It
//! starts at the unconstrained minimum and adds the most violated row one at
//! a time, so rows that never bind are never factored.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Where a constraint row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowTag {
    InputBound { step: usize, input: usize, upper: bool },
    Comfort { scenario: usize, zone: usize, step: usize },
    General,
}

/// Row `templates[template] · U <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow {
    pub template: usize,
    pub rhs: f64,
    pub tag: RowTag,
}

/// `min Uᵀ R U + gᵀ U + c` subject to the constraint rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProgram {
    cost: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
    templates: DMatrix<f64>,
    rows: Vec<ConstraintRow>,
}

impl ScenarioProgram {
    pub fn new(
        cost: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
        templates: DMatrix<f64>,
        rows: Vec<ConstraintRow>,
    ) -> Result<Self> {
        let d = cost.nrows();
        if !cost.is_square() || d == 0 {
            return Err(Error::validation("cost", "must be a non-empty square matrix"));
        }
        Error::check_dim("linear cost", d, linear.len())?;
        Error::check_dim("template width", d, templates.ncols())?;
        let scale = cost.amax().max(1.0);
        if (&cost - cost.transpose()).amax() > 1e-12 * scale {
            return Err(Error::validation("cost", "must be symmetric"));
        }
        if cost.clone().cholesky().is_none() {
            return Err(Error::validation("cost", "must be positive definite"));
        }
        if let Some((i, _)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.template >= templates.nrows() || !r.rhs.is_finite())
        {
            return Err(Error::validation(
                "rows",
                alloc::format!("row {i} has a bad template or rhs"),
            ));
        }
        Ok(ScenarioProgram {
            cost,
            linear,
            constant,
            templates,
            rows,
        })
    }

    /// One template per row of `a`, tagged [`RowTag::General`].
    pub fn dense(cost: DMatrix<f64>, linear: DVector<f64>, a: DMatrix<f64>, b: &[f64]) -> Result<Self> {
        Error::check_dim("rhs", a.nrows(), b.len())?;
        let rows = b
            .iter()
            .enumerate()
            .map(|(i, &rhs)| ConstraintRow {
                template: i,
                rhs,
                tag: RowTag::General,
            })
            .collect();
        Self::new(cost, linear, 0.0, a, rows)
    }

    pub fn dim(&self) -> usize {
        self.cost.nrows()
    }

    pub fn cost_matrix(&self) -> &DMatrix<f64> {
        &self.cost
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn templates(&self) -> &DMatrix<f64> {
        &self.templates
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        (u.transpose() * &self.cost * u)[(0, 0)] + self.linear.dot(u) + self.constant
    }

    /// `rhs - a·U` per row; negative entries are violations.
    pub fn slacks(&self, u: &DVector<f64>) -> Vec<f64> {
        let products = &self.templates * u;
        self.rows.iter().map(|r| r.rhs - products[r.template]).collect()
    }

    fn row_scale(&self, row: &ConstraintRow, u_norm: f64) -> f64 {
        let a_norm = self.templates.row(row.template).amax();
        1f64.max(row.rhs.abs()).max(a_norm * u_norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on primal feasibility and KKT residuals.
    pub feasibility_tol: f64,
    /// A multiplier counts as nonzero above this fraction of `max(1, ‖λ‖∞)`.
    pub dual_tol: f64,
    /// Removal changes the solution when `‖ΔU‖∞` exceeds this fraction of
    /// `max(1, ‖U*‖∞)`.
    pub change_tol: f64,
    /// Cap on add/drop steps; `None` scales with the problem.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-8,
            dual_tol: 1e-6,
            change_tol: 1e-6,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

/// Largest KKT violations at the returned point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `‖2 R U + g + Aᵀλ‖∞`
    pub stationarity: f64,
    pub primal: f64,
    /// Most negative multiplier, as a positive number.
    pub dual: f64,
    /// `max |λ_i · slack_i|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub u: DVector<f64>,
    pub cost: f64,
    /// One multiplier per program row.
    pub duals: Vec<f64>,
    /// Rows whose slack is within the feasibility tolerance.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

/// Index of the tightest row of each template, skipping `excluded` rows.
fn representatives(program: &ScenarioProgram, excluded: &dyn Fn(usize) -> bool) -> Vec<usize> {
    let mut best: Vec<Option<usize>> = vec![None; program.templates.nrows()];
    for (i, row) in program.rows.iter().enumerate() {
        if excluded(i) {
            continue;
        }
        let slot = &mut best[row.template];
        match *slot {
            Some(j) if program.rows[j].rhs <= row.rhs => {}
            _ => *slot = Some(i),
        }
    }
    best.into_iter().flatten().collect()
}

struct Rotation {
    c: f64,
    s: f64,
}

impl Rotation {
    /// Rotation mapping `(a, b)` to `(hypot(a, b), 0)`.
    fn zeroing(a: f64, b: f64) -> (Self, f64) {
        let h = libm::hypot(a, b);
        if h == 0.0 {
            (Rotation { c: 1.0, s: 0.0 }, 0.0)
        } else {
            (Rotation { c: a / h, s: b / h }, h)
        }
    }

    fn apply_columns(&self, m: &mut DMatrix<f64>, i: usize, j: usize) {
        for r in 0..m.nrows() {
            let (x, y) = (m[(r, i)], m[(r, j)]);
            m[(r, i)] = self.c * x + self.s * y;
            m[(r, j)] = -self.s * x + self.c * y;
        }
    }
}

/// Goldfarb–Idnani iterate: `Jᵀ N_A = [R; 0]` with `J = L⁻ᵀ Q`.
struct DualActiveSet<'a> {
    program: &'a ScenarioProgram,
    reps: Vec<usize>,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    /// Positions into `reps` of the active constraints, in insertion order.
    active: Vec<usize>,
    mult: Vec<f64>,
    x: DVector<f64>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Infeasible,
}

impl<'a> DualActiveSet<'a> {
    fn new(program: &'a ScenarioProgram, reps: Vec<usize>) -> Result<Self> {
        let n = program.dim();
        let hessian = &program.cost * 2.0;
        let chol = hessian
            .cholesky()
            .ok_or_else(|| Error::validation("cost", "must be positive definite"))?;
        let l = chol.l();
        let j = l
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::validation("cost", "must be positive definite"))?;
        // Unconstrained minimum: x = -P⁻¹ g = -J Jᵀ g.
        let x = -(&j * (j.transpose() * &program.linear));
        Ok(DualActiveSet {
            program,
            reps,
            j,
            r: DMatrix::zeros(n, n),
            active: Vec::new(),
            mult: Vec::new(),
            x,
            iterations: 0,
        })
    }

    fn normal(&self, rep: usize) -> DVector<f64> {
        let t = self.program.rows[self.reps[rep]].template;
        -self.program.templates.row(t).transpose()
    }

    /// `b - a·x` for representative `rep`.
    fn slack(&self, rep: usize) -> f64 {
        let row = &self.program.rows[self.reps[rep]];
        row.rhs - self.program.templates.row(row.template).dot(&self.x.transpose())
    }

    fn most_violated(&self) -> Option<(usize, f64)> {
        let u_norm = self.x.amax();
        let mut worst: Option<(usize, f64)> = None;
        for rep in 0..self.reps.len() {
            if self.active.contains(&rep) {
                continue;
            }
            let s = self.slack(rep);
            let row = &self.program.rows[self.reps[rep]];
            let tol = 1e-13 * self.program.row_scale(row, u_norm);
            if s < -tol && worst.is_none_or(|(_, w)| s < w) {
                worst = Some((rep, s));
            }
        }
        worst
    }

    fn solve_r(&self, d: &DVector<f64>) -> Vec<f64> {
        let q = self.active.len();
        let mut out = vec![0.0; q];
        for i in (0..q).rev() {
            let mut acc = d[i];
            for (k, o) in out.iter().enumerate().skip(i + 1) {
                acc -= self.r[(i, k)] * o;
            }
            out[i] = acc / self.r[(i, i)];
        }
        out
    }

    fn add(&mut self, rep: usize, mut d: DVector<f64>) {
        let q = self.active.len();
        let n = d.len();
        for k in ((q + 1)..n).rev() {
            let (rot, h) = Rotation::zeroing(d[k - 1], d[k]);
            d[k - 1] = h;
            d[k] = 0.0;
            rot.apply_columns(&mut self.j, k - 1, k);
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.active.push(rep);
    }

    fn drop(&mut self, pos: usize) {
        let q = self.active.len();
        for col in pos..(q - 1) {
            for i in 0..q {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for k in pos..(q - 1) {
            let (rot, h) = Rotation::zeroing(self.r[(k, k)], self.r[(k + 1, k)]);
            self.r[(k, k)] = h;
            self.r[(k + 1, k)] = 0.0;
            for col in (k + 1)..(q - 1) {
                let (a, b) = (self.r[(k, col)], self.r[(k + 1, col)]);
                self.r[(k, col)] = rot.c * a + rot.s * b;
                self.r[(k + 1, col)] = -rot.s * a + rot.c * b;
            }
            rot.apply_columns(&mut self.j, k, k + 1);
        }
        self.active.remove(pos);
        self.mult.remove(pos);
    }

    fn run(&mut self, cap: usize) -> Result<Outcome> {
        let n = self.program.dim();
        while let Some((p, _)) = self.most_violated() {
            let np = self.normal(p);
            self.mult.push(0.0);
            loop {
                self.iterations += 1;
                if self.iterations > cap {
                    return Err(Error::Convergence {
                        iterations: cap,
                        best: self.x.iter().copied().collect(),
                    });
                }
                let q = self.active.len();
                let d = self.j.transpose() * &np;
                let mut z = DVector::zeros(n);
                for k in q..n {
                    z.axpy(d[k], &self.j.column(k), 1.0);
                }
                let r = self.solve_r(&d);

                // Largest dual step before an active multiplier hits zero.
                let mut partial: Option<(f64, usize)> = None;
                for (k, &rk) in r.iter().enumerate() {
                    if rk > 0.0 {
                        let t = self.mult[k] / rk;
                        if partial.is_none_or(|(best, _)| t < best) {
                            partial = Some((t, k));
                        }
                    }
                }
                let d2_sq: f64 = d.rows(q, n - q).norm_squared();
                let full = if d2_sq > 1e-24 * d.norm_squared() {
                    Some(-self.slack(p) / d2_sq)
                } else {
                    None
                };

                match (full, partial) {
                    (None, None) => {
                        self.mult.pop();
                        return Ok(Outcome::Infeasible);
                    }
                    (None, Some((t, l))) => {
                        // Dual-only step; `p` is dependent on the active rows.
                        for (k, rk) in r.iter().enumerate() {
                            self.mult[k] -= t * rk;
                        }
                        self.mult[q] += t;
                        self.drop(l);
                    }
                    (Some(t2), partial) => {
                        let (t, drop_at) = match partial {
                            Some((t1, l)) if t1 < t2 => (t1, Some(l)),
                            _ => (t2, None),
                        };
                        self.x.axpy(t, &z, 1.0);
                        for (k, rk) in r.iter().enumerate() {
                            self.mult[k] -= t * rk;
                        }
                        self.mult[q] += t;
                        match drop_at {
                            None => {
                                self.add(p, d);
                                break;
                            }
                            Some(l) => self.drop(l),
                        }
                    }
                }
            }
        }
        Ok(Outcome::Optimal)
    }
}

fn kkt_residuals(program: &ScenarioProgram, u: &DVector<f64>, duals: &[f64], slacks: &[f64]) -> KktResiduals {
    let mut grad = &program.cost * u * 2.0 + &program.linear;
    let mut by_template = vec![0.0; program.templates.nrows()];
    for (row, &lambda) in program.rows.iter().zip(duals) {
        by_template[row.template] += lambda;
    }
    for (t, &lambda) in by_template.iter().enumerate() {
        if lambda != 0.0 {
            grad.axpy(lambda, &program.templates.row(t).transpose(), 1.0);
        }
    }
    KktResiduals {
        stationarity: grad.amax(),
        primal: slacks.iter().fold(0.0, |m, &s| m.max(-s)),
        dual: duals.iter().fold(0.0, |m, &l| m.max(-l)),
        complementarity: duals.iter().zip(slacks).fold(0.0, |m, (&l, &s)| m.max((l * s).abs())),
    }
}

fn solve_masked(
    program: &ScenarioProgram,
    opts: &SolverOptions,
    excluded: &dyn Fn(usize) -> bool,
) -> Result<SolveResult> {
    let reps = representatives(program, excluded);
    let cap = opts.max_iterations.unwrap_or(50 * (program.dim() + reps.len()) + 100);
    let mut gi = DualActiveSet::new(program, reps)?;
    let outcome = gi.run(cap)?;

    let mut duals = vec![0.0; program.rows.len()];
    if let Outcome::Optimal = outcome {
        for (&rep, &m) in gi.active.iter().zip(&gi.mult) {
            duals[gi.reps[rep]] = m;
        }
    }
    let u = gi.x;
    let slacks = program.slacks(&u);
    let active_set = slacks
        .iter()
        .enumerate()
        .filter(|(i, s)| !excluded(*i) && s.abs() <= opts.feasibility_tol)
        .map(|(i, _)| i)
        .collect();
    let masked_slacks: Vec<f64> = slacks
        .iter()
        .enumerate()
        .map(|(i, &s)| if excluded(i) { f64::INFINITY } else { s })
        .collect();
    let kkt = kkt_residuals(program, &u, &duals, &masked_slacks);
    Ok(SolveResult {
        status: match outcome {
            Outcome::Optimal => SolveStatus::Optimal,
            Outcome::Infeasible => SolveStatus::Infeasible,
        },
        cost: program.objective(&u),
        u,
        duals,
        active_set,
        iterations: gi.iterations,
        kkt,
    })
}

pub fn solve_qp(program: &ScenarioProgram, opts: &SolverOptions) -> Result<SolveResult> {
    solve_masked(program, opts, &|_| false)
}

/// Rows whose multiplier exceeds `tol · max(1, ‖λ‖∞)`; `None` uses the
/// default relative threshold.
pub fn active_constraints(result: &SolveResult, tol: Option<f64>) -> Result<Vec<usize>> {
    if result.status != SolveStatus::Optimal {
        return Err(Error::validation("result", "active constraints of a non-optimal solve"));
    }
    let scale = result.duals.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let threshold = tol.unwrap_or(SolverOptions::default().dual_tol) * scale;
    Ok(result
        .duals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > threshold)
        .map(|(i, _)| i)
        .collect())
}

/// Support constraints found by removal, with their count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportCount {
    pub count: usize,
    /// Row indices, or group ids for [`count_support_groups`].
    pub members: Vec<usize>,
}

fn solution_changed(base: &DVector<f64>, other: &DVector<f64>, opts: &SolverOptions) -> bool {
    (other - base).amax() > opts.change_tol * base.amax().max(1.0)
}

/// Rows that can possibly be of support: inactive rows of a convex program
/// never are.
fn near_active_rows(program: &ScenarioProgram, result: &SolveResult) -> Vec<usize> {
    let u_norm = result.u.amax();
    program
        .slacks(&result.u)
        .iter()
        .enumerate()
        .filter(|(i, &s)| s <= 1e-6 * program.row_scale(&program.rows[*i], u_norm))
        .map(|(i, _)| i)
        .collect()
}

/// Counts rows whose removal changes the optimal solution.
pub fn count_support_constraints(
    program: &ScenarioProgram,
    result: &SolveResult,
    opts: &SolverOptions,
) -> Result<SupportCount> {
    count_support_groups(program, result, opts, |i, _| Some(i))
}

/// Like [`count_support_constraints`], but removes whole groups of rows at a
/// time; `group` maps a row to its group, or `None` for rows that are never
/// removed (such as deterministic input bounds).
pub fn count_support_groups(
    program: &ScenarioProgram,
    result: &SolveResult,
    opts: &SolverOptions,
    group: impl Fn(usize, &RowTag) -> Option<usize>,
) -> Result<SupportCount> {
    if result.status != SolveStatus::Optimal {
        return Err(Error::validation("result", "support count of a non-optimal solve"));
    }
    let row_group: Vec<Option<usize>> = program.rows.iter().enumerate().map(|(i, r)| group(i, &r.tag)).collect();
    let mut candidates: Vec<usize> = near_active_rows(program, result)
        .into_iter()
        .filter_map(|i| row_group[i])
        .collect();
    candidates.sort_unstable();
    candidates.dedup();

    let mut members = Vec::new();
    for g in candidates {
        let without = solve_masked(program, opts, &|i| row_group[i] == Some(g)).map_err(|e| Error::SupportResolve {
            what: "constraint",
            index: g,
            source: Box::new(e),
        })?;
        if without.status != SolveStatus::Optimal {
            return Err(Error::SupportResolve {
                what: "constraint",
                index: g,
                source: Box::new(Error::Infeasible),
            });
        }
        if solution_changed(&result.u, &without.u, opts) {
            members.push(g);
        }
    }
    Ok(SupportCount {
        count: members.len(),
        members,
    })
}

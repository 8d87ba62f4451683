//! Self-contained LP engine: primal revised simplex on equality form.
//!
//! Problems are `min c'x  s.t.  Ax = b, x >= 0` with sparse columns. The
//! solver runs two phases from an all-artificial basis, prices with
//! Dantzig's rule, and maintains an explicit dense basis inverse updated
//! in product form. Every hundred pivots the basic solution is checked
//! against the constraints and the inverse is refactorized from scratch
//! if it has drifted; a ratio test that selects a pivot element below the
//! stability threshold on a stale factorization forces an immediate
//! refactorization and a retry instead.
//!
//! Degenerate ratio-test ties are broken by a draw seeded from the pivot
//! counter: the counter never repeats, so no tie can resolve the same way
//! twice and deterministic cycles are impossible, while transport-style
//! plateaus resolve far faster than under a rigid fixed order. Runs are
//! still bitwise reproducible because the draw depends only on the pivot
//! counter. If a plateau survives an extreme number of consecutive
//! degenerate pivots, the test falls back to the classic lexicographic
//! rule (comparing rows of the basis inverse, which from the identity
//! artificial start guarantees termination).
//!
//! Redundant rows (the transport and barycenter programs always carry a
//! few) keep their artificial variable in the basis at level zero; the
//! phase-two ratio test blocks those rows so the artificials never move.

use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

/// Primal feasibility tolerance, scaled by `1 + |b|_inf`.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost / duality tolerance.
pub const OPT_TOL: f64 = 1e-7;
/// Minimum admissible pivot element magnitude.
pub const PIVOT_TOL: f64 = 1e-10;
/// Minimum direction entry on a basic-artificial row before phase two
/// treats the artificial as blocking. Entries below this are transform
/// noise on redundant rows, never a structural coefficient.
const ART_PIVOT_TOL: f64 = 1e-7;
/// Pivot elements below this trigger a refactorization and a retry of the
/// iteration when the factorization is stale; see `run_phase`.
const STAB_TOL: f64 = 1e-7;
/// Default pivot budget per solve call.
pub const DEFAULT_PIVOT_LIMIT: usize = 1_000_000;
/// Pivots between drift checks of the basis inverse.
const REFACTOR_INTERVAL: usize = 100;
/// Consecutive degenerate pivots (relative to the row count) tolerated
/// before ratio-test ties switch from the seeded draw to the guaranteed
/// lexicographic rule.
const PLATEAU_LEX_FACTOR: usize = 8;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("column {col} references row {row}, but the program has {rows} rows")]
    RowOutOfRange { col: usize, row: usize, rows: usize },
    #[error("non-finite value in {place}")]
    NonFinite { place: String },
    #[error("row {row} has no nonzero coefficient in any column")]
    EmptyRow { row: usize },
    #[error("basis became singular during refactorization")]
    SingularBasis,
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("phase two requested before a feasible basis exists")]
    NotReady,
}

/// Sparse column: `(row, coefficient)` pairs, one entry per row.
pub type SparseCol = Vec<(u32, f64)>;

/// Row sense accepted by [`LpBuilder`]; inequalities receive slack columns
/// during `build` so the solver only ever sees equalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

/// Equality-form linear program `min c'x, Ax = b, x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_rows: usize,
    rhs: Vec<f64>,
    costs: Vec<f64>,
    cols: Vec<SparseCol>,
}

impl LinearProgram {
    /// Program with `rhs.len()` equality rows and no columns yet.
    pub fn new(rhs: Vec<f64>) -> Self {
        LinearProgram { num_rows: rhs.len(), rhs, costs: Vec::new(), cols: Vec::new() }
    }

    /// Appends one column; entries are sorted and per-row duplicates are
    /// summed. Returns the column index.
    pub fn add_column(&mut self, cost: f64, entries: &[(usize, f64)]) -> Result<usize, LpError> {
        let col = self.cols.len();
        if !cost.is_finite() {
            return Err(LpError::NonFinite { place: format!("cost of column {col}") });
        }
        let mut sorted: Vec<(usize, f64)> = entries.to_vec();
        sorted.sort_unstable_by_key(|&(r, _)| r);
        let mut packed: SparseCol = Vec::with_capacity(sorted.len());
        for (row, coef) in sorted {
            if row >= self.num_rows {
                return Err(LpError::RowOutOfRange { col, row, rows: self.num_rows });
            }
            if !coef.is_finite() {
                return Err(LpError::NonFinite { place: format!("column {col}, row {row}") });
            }
            match packed.last_mut() {
                Some(last) if last.0 as usize == row => last.1 += coef,
                _ => packed.push((row as u32, coef)),
            }
        }
        packed.retain(|&(_, c)| c != 0.0);
        self.costs.push(cost);
        self.cols.push(packed);
        Ok(col)
    }

    /// Appends several columns; the program keeps its existing columns and
    /// rows, so a basis from a previous solve remains a valid warm start.
    pub fn add_columns(&mut self, columns: &[(f64, Vec<(usize, f64)>)]) -> Result<(), LpError> {
        for (cost, entries) in columns {
            self.add_column(*cost, entries)?;
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        for (row, &b) in self.rhs.iter().enumerate() {
            if !b.is_finite() {
                return Err(LpError::NonFinite { place: format!("rhs of row {row}") });
            }
        }
        let mut covered = vec![false; self.num_rows];
        for col in &self.cols {
            for &(row, _) in col {
                covered[row as usize] = true;
            }
        }
        if let Some(row) = covered.iter().position(|&c| !c) {
            return Err(LpError::EmptyRow { row });
        }
        Ok(())
    }
}

/// Incremental construction with row senses; `build` converts `Le`/`Ge`
/// rows to equalities by appending zero-cost slack columns.
#[derive(Debug, Default)]
pub struct LpBuilder {
    senses: Vec<Sense>,
    rhs: Vec<f64>,
    costs: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_row(&mut self, sense: Sense, rhs: f64) -> usize {
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.senses.len() - 1
    }

    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> usize {
        self.costs.push(cost);
        self.cols.push(entries);
        self.costs.len() - 1
    }

    pub fn build(self) -> Result<LinearProgram, LpError> {
        let mut lp = LinearProgram::new(self.rhs);
        for (cost, entries) in self.costs.into_iter().zip(self.cols) {
            lp.add_column(cost, &entries)?;
        }
        for (row, sense) in self.senses.iter().enumerate() {
            match sense {
                Sense::Eq => {}
                Sense::Le => {
                    lp.add_column(0.0, &[(row, 1.0)])?;
                }
                Sense::Ge => {
                    lp.add_column(0.0, &[(row, -1.0)])?;
                }
            }
        }
        Ok(lp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Basis member: a program column or the artificial variable of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisVar {
    Col(usize),
    Artificial(usize),
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective of `primal`; NaN when no feasible point is available.
    pub objective: f64,
    /// Values for every column; empty when no feasible point is available.
    pub primal: Vec<f64>,
    /// One dual per row; populated only at optimality.
    pub duals: Vec<f64>,
    pub pivots: usize,
    pub basis: Vec<BasisVar>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
}

/// Revised simplex state. Keeping the state public lets column generation
/// append columns and reoptimize without refactorizing from scratch.
pub struct Simplex {
    m: usize,
    rhs: Vec<f64>,
    row_sign: Vec<f64>,
    costs: Vec<f64>,
    cols: Vec<SparseCol>,
    binv: Vec<f64>,
    basis: Vec<BasisVar>,
    in_basis: Vec<bool>,
    x_b: Vec<f64>,
    b_norm: f64,
    pivots: usize,
    since_refactor: usize,
    plateau: usize,
    devex_w: Vec<f64>,
    budget: usize,
    pivot_limit: usize,
    phase2_ready: bool,
    y: Vec<f64>,
    d: Vec<f64>,
    scratch_row: Vec<f64>,
}

impl Simplex {
    pub fn new(lp: &LinearProgram, pivot_limit: usize) -> Result<Self, LpError> {
        lp.validate()?;
        let m = lp.num_rows;
        let mut rhs = lp.rhs.clone();
        let mut row_sign = vec![1.0; m];
        let mut cols = lp.cols.clone();
        for (r, b) in rhs.iter_mut().enumerate() {
            if *b < 0.0 {
                *b = -*b;
                row_sign[r] = -1.0;
            }
        }
        for col in &mut cols {
            for (row, coef) in col.iter_mut() {
                *coef *= row_sign[*row as usize];
            }
        }
        let b_norm = rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Ok(Simplex {
            m,
            x_b: rhs.clone(),
            rhs,
            row_sign,
            costs: lp.costs.clone(),
            in_basis: vec![false; cols.len()],
            devex_w: vec![1.0; cols.len()],
            cols,
            binv,
            basis: (0..m).map(BasisVar::Artificial).collect(),
            b_norm,
            pivots: 0,
            since_refactor: 0,
            plateau: 0,
            budget: 0,
            pivot_limit,
            phase2_ready: false,
            y: vec![0.0; m],
            d: vec![0.0; m],
            scratch_row: vec![0.0; m],
        })
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Appends a nonbasic column without disturbing the current basis.
    pub fn add_column(&mut self, cost: f64, entries: &[(usize, f64)]) -> Result<usize, LpError> {
        let col = self.cols.len();
        if !cost.is_finite() {
            return Err(LpError::NonFinite { place: format!("cost of column {col}") });
        }
        let mut sorted: Vec<(usize, f64)> = entries.to_vec();
        sorted.sort_unstable_by_key(|&(r, _)| r);
        let mut packed: SparseCol = Vec::with_capacity(sorted.len());
        for (row, coef) in sorted {
            if row >= self.m {
                return Err(LpError::RowOutOfRange { col, row, rows: self.m });
            }
            if !coef.is_finite() {
                return Err(LpError::NonFinite { place: format!("column {col}, row {row}") });
            }
            let signed = coef * self.row_sign[row];
            match packed.last_mut() {
                Some(last) if last.0 as usize == row => last.1 += signed,
                _ => packed.push((row as u32, signed)),
            }
        }
        packed.retain(|&(_, c)| c != 0.0);
        self.costs.push(cost);
        self.cols.push(packed);
        self.in_basis.push(false);
        self.devex_w.push(1.0);
        Ok(col)
    }

    /// Full solve: phase one from the all-artificial basis, then phase two.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        self.budget = self.pivots + self.pivot_limit;
        self.devex_w.fill(1.0);
        match self.run_phase(true)? {
            PhaseEnd::Limit => return Ok(self.report(LpStatus::IterationLimit)),
            PhaseEnd::Unbounded => {
                return Err(LpError::NumericalBreakdown("phase one unbounded".into()))
            }
            PhaseEnd::Optimal => {}
        }
        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.x_b)
            .filter(|(v, _)| matches!(v, BasisVar::Artificial(_)))
            .map(|(_, &x)| x)
            .sum();
        if infeasibility > OPT_TOL * (1.0 + self.b_norm) {
            return Ok(self.report(LpStatus::Infeasible));
        }
        for (v, x) in self.basis.iter().zip(self.x_b.iter_mut()) {
            if matches!(v, BasisVar::Artificial(_)) {
                *x = 0.0;
            }
        }
        self.phase2_ready = true;
        // Phase two prices against a new cost vector; start a fresh devex
        // reference framework.
        self.devex_w.fill(1.0);
        self.reoptimize_within_budget()
    }

    /// Continues phase two from the current feasible basis; used after
    /// [`Simplex::add_column`].
    pub fn reoptimize(&mut self) -> Result<LpSolution, LpError> {
        if !self.phase2_ready {
            return Err(LpError::NotReady);
        }
        self.budget = self.pivots + self.pivot_limit;
        self.reoptimize_within_budget()
    }

    fn reoptimize_within_budget(&mut self) -> Result<LpSolution, LpError> {
        let end = self.run_phase(false)?;
        match end {
            PhaseEnd::Optimal => {
                self.enforce_accuracy()?;
                Ok(self.report(LpStatus::Optimal))
            }
            PhaseEnd::Unbounded => Ok(self.report(LpStatus::Unbounded)),
            PhaseEnd::Limit => Ok(self.report(LpStatus::IterationLimit)),
        }
    }

    fn run_phase(&mut self, phase1: bool) -> Result<PhaseEnd, LpError> {
        loop {
            if self.pivots >= self.budget {
                return Ok(PhaseEnd::Limit);
            }
            self.btran(phase1);
            let Some(entering) = self.price(phase1) else {
                return Ok(PhaseEnd::Optimal);
            };
            self.ftran(entering);
            let Some((leave, ratio)) = self.ratio_test(phase1) else {
                // Apparent unboundedness on a stale factorization can be
                // an artifact of accumulated error; confirm on a fresh one.
                if self.since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                return Ok(PhaseEnd::Unbounded);
            };
            // Pivot rejection: a pivot element this small on a stale
            // factorization is usually a true zero buried in update error.
            // Refactorizing collapses the noise and the ratio test then
            // picks a structurally sound row; only a freshly factorized
            // basis may force a genuinely tiny pivot through.
            if self.d[leave].abs() < STAB_TOL && self.since_refactor > 0 {
                self.refactor()?;
                continue;
            }
            self.update_devex(entering, leave);
            self.pivot(entering, leave, ratio);
            self.pivots += 1;
            if self.pivots % REFACTOR_INTERVAL == 0 {
                self.maybe_refactor()?;
            }
        }
    }

    /// `y = Binv' c_B` with the phase-appropriate basic costs.
    fn btran(&mut self, phase1: bool) {
        self.y.fill(0.0);
        for (i, v) in self.basis.iter().enumerate() {
            let c = match v {
                BasisVar::Artificial(_) => {
                    if phase1 {
                        1.0
                    } else {
                        0.0
                    }
                }
                BasisVar::Col(j) => {
                    if phase1 {
                        0.0
                    } else {
                        self.costs[*j]
                    }
                }
            };
            if c != 0.0 {
                let row = &self.binv[i * self.m..(i + 1) * self.m];
                for (acc, &b) in self.y.iter_mut().zip(row) {
                    *acc += c * b;
                }
            }
        }
    }

    /// Devex pricing: the entering column maximizes the squared reduced
    /// cost over its reference weight, which approximates steepest-edge
    /// selection and avoids the re-entry thrash Dantzig's rule exhibits on
    /// degenerate masters. Ties break toward the lowest column index.
    fn price(&self, phase1: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, col) in self.cols.iter().enumerate() {
            if self.in_basis[j] {
                continue;
            }
            let cost = if phase1 { 0.0 } else { self.costs[j] };
            let mut reduced = cost;
            for &(row, a) in col {
                reduced -= self.y[row as usize] * a;
            }
            if reduced < -OPT_TOL {
                let score = reduced * reduced / self.devex_w[j];
                match best {
                    Some((_, s)) if score <= s => {}
                    _ => best = Some((j, score)),
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Forrest-Goldfarb devex weight update for the pivot `(entering,
    /// leave)`, called with the pre-pivot basis inverse. The leaving row of
    /// `Binv A` prices every nonbasic column in one sparse pass.
    fn update_devex(&mut self, entering: usize, leave: usize) {
        let aq = self.d[leave];
        if aq.abs() <= PIVOT_TOL {
            return;
        }
        let wq = self.devex_w[entering].max(1.0);
        let row = &self.binv[leave * self.m..(leave + 1) * self.m];
        let mut w_max = 0.0f64;
        for (j, col) in self.cols.iter().enumerate() {
            if self.in_basis[j] || j == entering {
                continue;
            }
            let mut alpha = 0.0;
            for &(r, a) in col {
                alpha += row[r as usize] * a;
            }
            if alpha != 0.0 {
                let cand = (alpha / aq) * (alpha / aq) * wq;
                if cand > self.devex_w[j] {
                    self.devex_w[j] = cand;
                }
            }
            w_max = w_max.max(self.devex_w[j]);
        }
        if let BasisVar::Col(jl) = self.basis[leave] {
            self.devex_w[jl] = (wq / (aq * aq)).max(1.0);
            w_max = w_max.max(self.devex_w[jl]);
        }
        // A blown-up reference framework stops discriminating; restart it.
        if w_max > 1e8 {
            self.devex_w.fill(1.0);
        }
    }

    /// `d = Binv a_q` for the entering column.
    fn ftran(&mut self, entering: usize) {
        let col = &self.cols[entering];
        for i in 0..self.m {
            let row = &self.binv[i * self.m..(i + 1) * self.m];
            let mut acc = 0.0;
            for &(r, a) in col {
                acc += a * row[r as usize];
            }
            self.d[i] = acc;
        }
    }

    /// Minimum-ratio test with seeded-draw tie-breaking.
    ///
    /// Rows whose basic variable is an artificial are blocked at zero in
    /// phase two when the direction entry is structurally nonzero (either
    /// sign); such a row leaves with absolute priority, largest entry
    /// first. Entries below [`ART_PIVOT_TOL`] on artificial rows are
    /// transform noise from redundant constraints, where the true entry is
    /// zero: pivoting on one would scale a basis-inverse row by its
    /// reciprocal and wreck the factorization, so those artificials simply
    /// stay basic at level zero. Among genuine candidates, ratio ties are
    /// broken by a draw seeded from the pivot counter; once a plateau has
    /// run for [`PLATEAU_LEX_FACTOR`]` * m` consecutive degenerate pivots
    /// the tie-break switches to comparing the basis-inverse rows scaled
    /// by the direction entry, lexicographically smallest first, which
    /// from the identity artificial start cannot revisit a basis and so
    /// guarantees the plateau terminates.
    fn ratio_test(&self, phase1: bool) -> Option<(usize, f64)> {
        if !phase1 {
            let mut blocked: Option<usize> = None;
            for i in 0..self.m {
                if matches!(self.basis[i], BasisVar::Artificial(_))
                    && self.d[i].abs() > ART_PIVOT_TOL
                {
                    let better = match blocked {
                        None => true,
                        Some(b) => self.d[i].abs() > self.d[b].abs(),
                    };
                    if better {
                        blocked = Some(i);
                    }
                }
            }
            if let Some(i) = blocked {
                return Some((i, 0.0));
            }
        }
        let eligible = |i: usize| {
            (phase1 || !matches!(self.basis[i], BasisVar::Artificial(_)))
                && self.d[i] > PIVOT_TOL
        };
        // Basic values below the feasibility tolerance are treated as
        // exact zeros here; otherwise residual dust paired with a tiny
        // direction entry wins the minimum ratio alone and forces a pivot
        // on a numerically worthless element.
        let dust = FEAS_TOL * (1.0 + self.b_norm);
        let level = |i: usize| {
            let x = self.x_b[i];
            if x < dust {
                0.0
            } else {
                x
            }
        };
        let mut theta = f64::INFINITY;
        for i in 0..self.m {
            if eligible(i) {
                theta = theta.min(level(i) / self.d[i]);
            }
        }
        if theta == f64::INFINITY {
            return None;
        }
        let tie = 1e-14 * (1.0 + theta);
        let mut tied: Vec<usize> = (0..self.m)
            .filter(|&i| eligible(i) && level(i) / self.d[i] <= theta + tie)
            .collect();
        // Guard the factorization: among tied rows, refuse pivot entries
        // orders of magnitude below the best one on offer.
        let d_max = tied.iter().fold(0.0f64, |a, &i| a.max(self.d[i]));
        tied.retain(|&i| self.d[i] >= 1e-3 * d_max);
        if tied.len() > 1 {
            if self.plateau < PLATEAU_LEX_FACTOR * self.m {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.pivots as u64);
                let pick = (rng.next_u64() % tied.len() as u64) as usize;
                let leave = tied[pick];
                return Some((leave, level(leave) / self.d[leave]));
            }
            let mut col = 0;
            while tied.len() > 1 && col < self.m {
                let mut min_v = f64::INFINITY;
                for &i in &tied {
                    min_v = min_v.min(self.binv[i * self.m + col] / self.d[i]);
                }
                let keep = 1e-14 * (1.0 + min_v.abs());
                tied.retain(|&i| self.binv[i * self.m + col] / self.d[i] <= min_v + keep);
                col += 1;
            }
        }
        let leave = tied[0];
        Some((leave, level(leave) / self.d[leave]))
    }

    fn pivot(&mut self, entering: usize, leave: usize, ratio: f64) {
        let m = self.m;
        let piv = self.d[leave];
        let theta = ratio.max(0.0);
        let inv_piv = 1.0 / piv;
        {
            let src = &self.binv[leave * m..(leave + 1) * m];
            for (dst, &s) in self.scratch_row.iter_mut().zip(src) {
                *dst = s * inv_piv;
            }
        }
        for i in 0..m {
            if i == leave {
                continue;
            }
            let f = self.d[i];
            if f != 0.0 {
                let row = &mut self.binv[i * m..(i + 1) * m];
                for (b, &s) in row.iter_mut().zip(&self.scratch_row) {
                    *b -= f * s;
                }
            }
        }
        self.binv[leave * m..(leave + 1) * m].copy_from_slice(&self.scratch_row);
        for i in 0..m {
            if i != leave {
                let nx = self.x_b[i] - theta * self.d[i];
                self.x_b[i] = if nx.abs() < 1e-14 { 0.0 } else { nx };
            }
        }
        self.x_b[leave] = theta;
        if let BasisVar::Col(j) = self.basis[leave] {
            self.in_basis[j] = false;
        }
        self.basis[leave] = BasisVar::Col(entering);
        self.in_basis[entering] = true;
        self.since_refactor += 1;
        if theta <= 1e-12 {
            self.plateau += 1;
        } else {
            self.plateau = 0;
        }
    }

    /// `max_r |(B x_B - b)_r|` computed from the sparse basis columns.
    fn drift(&self) -> f64 {
        let mut residual = self.rhs.clone();
        for (i, v) in self.basis.iter().enumerate() {
            let x = self.x_b[i];
            match v {
                BasisVar::Artificial(r) => residual[*r] -= x,
                BasisVar::Col(j) => {
                    for &(row, a) in &self.cols[*j] {
                        residual[row as usize] -= a * x;
                    }
                }
            }
        }
        residual.iter().fold(0.0f64, |acc, &r| acc.max(r.abs()))
    }

    fn maybe_refactor(&mut self) -> Result<(), LpError> {
        if self.drift() > 0.5 * FEAS_TOL * (1.0 + self.b_norm) {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination with
    /// partial pivoting and refreshes the basic solution.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (pos, v) in self.basis.iter().enumerate() {
            match v {
                BasisVar::Artificial(r) => a[r * m + pos] = 1.0,
                BasisVar::Col(j) => {
                    for &(row, coef) in &self.cols[*j] {
                        a[row as usize * m + pos] = coef;
                    }
                }
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-12 {
                return Err(LpError::SingularBasis);
            }
            if piv_row != col {
                for j in 0..m {
                    a.swap(col * m + j, piv_row * m + j);
                    inv.swap(col * m + j, piv_row * m + j);
                }
            }
            let piv = a[col * m + col];
            let inv_piv = 1.0 / piv;
            for j in 0..m {
                a[col * m + j] *= inv_piv;
                inv[col * m + j] *= inv_piv;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for j in 0..m {
                        a[r * m + j] -= f * a[col * m + j];
                        inv[r * m + j] -= f * inv[col * m + j];
                    }
                }
            }
        }
        // Gauss-Jordan solved columns of B in basis order; rows of the
        // inverse line up with basis positions already.
        self.binv = inv;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let x: f64 = row.iter().zip(&self.rhs).map(|(b, r)| b * r).sum();
            self.x_b[i] = if x < 0.0 && x > -FEAS_TOL * (1.0 + self.b_norm) { 0.0 } else { x };
        }
        if self.x_b.iter().any(|&x| x < 0.0) {
            return Err(LpError::NumericalBreakdown(
                "basis lost primal feasibility after refactorization".into(),
            ));
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn enforce_accuracy(&mut self) -> Result<(), LpError> {
        if self.drift() > 0.5 * FEAS_TOL * (1.0 + self.b_norm) {
            self.refactor()?;
        }
        Ok(())
    }

    fn report(&mut self, status: LpStatus) -> LpSolution {
        let feasible_point = self.phase2_ready
            && matches!(status, LpStatus::Optimal | LpStatus::IterationLimit);
        let mut primal = Vec::new();
        let mut objective = f64::NAN;
        if feasible_point {
            primal = vec![0.0; self.cols.len()];
            for (i, v) in self.basis.iter().enumerate() {
                if let BasisVar::Col(j) = v {
                    primal[*j] = self.x_b[i].max(0.0);
                }
            }
            objective = primal.iter().zip(&self.costs).map(|(x, c)| x * c).sum();
        }
        let mut duals = Vec::new();
        if matches!(status, LpStatus::Optimal) {
            self.btran(false);
            duals = self.y.iter().zip(&self.row_sign).map(|(y, s)| y * s).collect();
        }
        LpSolution { status, objective, primal, duals, pivots: self.pivots, basis: self.basis.clone() }
    }
}

/// Solves with the default pivot budget.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, DEFAULT_PIVOT_LIMIT)
}

/// Solves with an explicit pivot budget; exceeding it reports
/// `IterationLimit` rather than a silently wrong answer.
pub fn solve_lp_with(lp: &LinearProgram, pivot_limit: usize) -> Result<LpSolution, LpError> {
    Simplex::new(lp, pivot_limit)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_equality_optimal_with_dual() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() <= 1e-12);
        assert!((sol.primal[0] - 1.0).abs() <= 1e-12);
        assert!((sol.duals[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn no_constraints_negative_cost_is_unbounded() {
        let mut lp = LinearProgram::new(vec![]);
        lp.add_column(-1.0, &[]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_with_nonnegative_variable_is_infeasible() {
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn builder_converts_inequalities() {
        // min x subject to x >= 3: slack turns it into x - s = 3.
        let mut b = LpBuilder::new();
        let row = b.add_row(Sense::Ge, 3.0);
        b.add_column(1.0, vec![(row, 1.0)]);
        let sol = solve_lp(&b.build().unwrap()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() <= 1e-9);

        // min -x subject to x <= 5.
        let mut b = LpBuilder::new();
        let row = b.add_row(Sense::Le, 5.0);
        b.add_column(-1.0, vec![(row, 1.0)]);
        let sol = solve_lp(&b.build().unwrap()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 5.0).abs() <= 1e-9);
    }

    #[test]
    fn added_cheaper_column_improves_objective() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        assert!((solve_lp(&lp).unwrap().objective - 1.0).abs() <= 1e-12);
        lp.add_columns(&[(0.0, vec![(0, 1.0)])]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert!(sol.objective.abs() <= 1e-12);
        assert!((sol.primal[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn added_disconnected_column_changes_nothing() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        lp.add_columns(&[(5.0, vec![])]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() <= 1e-12);
        assert_eq!(sol.primal[1], 0.0);
    }

    #[test]
    fn duplicate_column_keeps_lowest_index() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        lp.add_columns(&[(1.0, vec![(0, 1.0)])]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.objective - 1.0).abs() <= 1e-12);
        assert!((sol.primal[0] - 1.0).abs() <= 1e-12);
        assert_eq!(sol.primal[1], 0.0);
    }

    #[test]
    fn warm_reoptimize_after_add_column() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_column(3.0, &[(0, 1.0)]).unwrap();
        lp.add_column(1.0, &[(1, 1.0)]).unwrap();
        let mut sx = Simplex::new(&lp, DEFAULT_PIVOT_LIMIT).unwrap();
        let sol = sx.solve().unwrap();
        assert!((sol.objective - 5.0).abs() <= 1e-9);
        let pivots_before = sx.pivots();
        sx.add_column(0.5, &[(0, 1.0)]).unwrap();
        let sol = sx.reoptimize().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 2.5).abs() <= 1e-9);
        assert!(sx.pivots() - pivots_before <= 2, "warm restart should take few pivots");
    }

    #[test]
    fn redundant_rows_are_harmless() {
        // x + y = 1 stated twice; min x + 2y.
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_column(1.0, &[(0, 1.0), (1, 1.0)]).unwrap();
        lp.add_column(2.0, &[(0, 1.0), (1, 1.0)]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() <= 1e-9);
        assert!((sol.primal[0] - 1.0).abs() <= 1e-9);
        // Dual vector still prices both columns consistently.
        let y = sol.duals[0] + sol.duals[1];
        assert!(y <= 1.0 + 1e-7);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Classic degenerate program that cycles under naive most-negative
        // pricing with bad tie-breaking. Optimum is -1/20.
        let mut b = LpBuilder::new();
        let r0 = b.add_row(Sense::Eq, 0.0);
        let r1 = b.add_row(Sense::Eq, 0.0);
        let r2 = b.add_row(Sense::Eq, 1.0);
        b.add_column(0.0, vec![(r0, 1.0)]);
        b.add_column(0.0, vec![(r1, 1.0)]);
        b.add_column(0.0, vec![(r2, 1.0)]);
        b.add_column(-0.75, vec![(r0, 0.25), (r1, 0.5)]);
        b.add_column(150.0, vec![(r0, -60.0), (r1, -90.0)]);
        b.add_column(-0.02, vec![(r0, -0.04), (r1, -0.02), (r2, 1.0)]);
        b.add_column(6.0, vec![(r0, 9.0), (r1, 3.0)]);
        let sol = solve_lp(&b.build().unwrap()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 0.05).abs() <= 1e-9, "objective {}", sol.objective);
    }

    #[test]
    fn pivot_budget_reports_iteration_limit() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0, 3.0]);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        lp.add_column(1.0, &[(1, 1.0)]).unwrap();
        lp.add_column(1.0, &[(2, 1.0)]).unwrap();
        let sol = solve_lp_with(&lp, 1).unwrap();
        assert_eq!(sol.status, LpStatus::IterationLimit);
    }

    #[test]
    fn empty_row_is_rejected() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        assert!(matches!(solve_lp(&lp), Err(LpError::EmptyRow { row: 1 })));
    }

    fn random_feasible_lp(rng: &mut rng::Stream) -> (LinearProgram, f64) {
        let m = 1 + rng::index_below(rng, 5);
        let n = 1 + rng::index_below(rng, 8);
        let mut entries = vec![vec![0.0; n]; m];
        for row in entries.iter_mut() {
            for v in row.iter_mut() {
                if rng::unit_f64(rng) < 0.5 {
                    *v = ((rng::unit_f64(rng) * 16.0).round() - 8.0) / 4.0;
                }
            }
        }
        for (i, row) in entries.iter_mut().enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                row[i % n] = 1.0;
            }
        }
        let mut x0 = vec![0.0; n];
        for v in x0.iter_mut() {
            if rng::unit_f64(rng) < 0.6 {
                *v = (rng::unit_f64(rng) * 8.0).round() / 4.0;
            }
        }
        let rhs: Vec<f64> =
            (0..m).map(|i| (0..n).map(|j| entries[i][j] * x0[j]).sum()).collect();
        let costs: Vec<f64> = (0..n).map(|_| (rng::unit_f64(rng) * 12.0).round() / 4.0).collect();
        let mut lp = LinearProgram::new(rhs);
        for j in 0..n {
            let col: Vec<(usize, f64)> =
                (0..m).filter(|&i| entries[i][j] != 0.0).map(|i| (i, entries[i][j])).collect();
            lp.add_column(costs[j], &col).unwrap();
        }
        let ref_obj = costs.iter().zip(&x0).map(|(c, x)| c * x).sum();
        (lp, ref_obj)
    }

    #[test]
    fn random_programs_satisfy_duality_and_feasibility() {
        let mut rng = rng::stream(20240);
        for case in 0..200 {
            let (lp, ref_obj) = random_feasible_lp(&mut rng);
            let sol = solve_lp(&lp).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal, "case {case} not optimal");
            assert!(sol.objective <= ref_obj + 1e-7 * (1.0 + ref_obj.abs()), "case {case}");
            // Primal feasibility: recompute Ax - b.
            let mut residual = vec![0.0; lp.num_rows()];
            for (j, x) in sol.primal.iter().enumerate() {
                assert!(*x >= -FEAS_TOL, "case {case}: negative primal");
                for &(row, a) in &lp.cols[j] {
                    residual[row as usize] += a * x;
                }
            }
            let b_norm = lp.rhs.iter().fold(0.0f64, |acc, &b| acc.max(b.abs()));
            for (r, res) in residual.iter().enumerate() {
                assert!(
                    (res - lp.rhs[r]).abs() <= FEAS_TOL * (1.0 + b_norm),
                    "case {case}: residual {} in row {r}",
                    res - lp.rhs[r]
                );
            }
            // Strong duality and dual feasibility.
            let dual_obj: f64 = sol.duals.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum();
            assert!(
                (sol.objective - dual_obj).abs() <= OPT_TOL * (1.0 + sol.objective.abs()),
                "case {case}: duality gap {}",
                sol.objective - dual_obj
            );
            for (j, col) in lp.cols.iter().enumerate() {
                let mut reduced = lp.costs[j];
                for &(row, a) in col {
                    reduced -= sol.duals[row as usize] * a;
                }
                assert!(reduced >= -OPT_TOL, "case {case}: reduced cost {reduced} on col {j}");
                assert!(
                    sol.primal[j] * reduced <= 1e-6 * (1.0 + sol.objective.abs()),
                    "case {case}: complementary slackness violated on col {j}"
                );
            }
            // Determinism: a second solve reproduces everything bitwise.
            let again = solve_lp(&lp).unwrap();
            assert_eq!(sol.objective.to_bits(), again.objective.to_bits(), "case {case}");
            assert_eq!(sol.primal, again.primal, "case {case}");
            assert_eq!(sol.duals, again.duals, "case {case}");
        }
    }
}

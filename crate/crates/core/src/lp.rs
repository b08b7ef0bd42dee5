//! Exact rational simplex over bounded variables.
//!
//! Solves `min c·x` subject to rows `a·x ≤ b` and `0 ≤ x_j ≤ u_j` (`u_j` may be
//! infinite). Every row gets a slack column. The dense tableau supports adding rows
//! to a solved problem; the basis stays dual feasible and the dual simplex restores
//! primal feasibility, which is how cutting-plane loops reuse work.
//!
//! Pricing is Dantzig's largest-coefficient rule. After a run of degenerate
//! pivots it falls back to Bland's smallest-index rule, which cannot cycle.

use num_traits::{One, Signed, Zero};

use crate::rational::Q;

/// Degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Unbounded,
    Infeasible,
    /// Added rows made the basis primal infeasible while reduced costs were also
    /// not optimal; this solver has no phase-one procedure for that case.
    NotDualFeasible,
}

#[derive(Debug, Clone)]
pub struct BoundedSimplex {
    structural: usize,
    cost: Vec<Q>,
    upper: Vec<Option<Q>>,
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    beta: Vec<Q>,
    state: Vec<VarState>,
    reduced: Vec<Q>,
    pivots: usize,
}

impl BoundedSimplex {
    /// Structural variables with costs (minimized) and optional upper bounds.
    /// All variables start nonbasic at zero.
    pub fn new(cost: Vec<Q>, upper: Vec<Option<Q>>) -> Self {
        assert_eq!(cost.len(), upper.len());
        let structural = cost.len();
        Self {
            structural,
            reduced: cost.clone(),
            cost,
            upper,
            rows: Vec::new(),
            basis: Vec::new(),
            beta: Vec::new(),
            state: vec![VarState::AtLower; structural],
            pivots: 0,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    fn columns(&self) -> usize {
        self.cost.len()
    }

    /// Current value of column `j` (structural or slack).
    pub fn value(&self, j: usize) -> Q {
        match self.state[j] {
            VarState::Basic(r) => self.beta[r].clone(),
            VarState::AtLower => Q::zero(),
            VarState::AtUpper => self.upper[j].clone().expect("finite upper bound"),
        }
    }

    /// Values of the structural variables.
    pub fn solution(&self) -> Vec<Q> {
        (0..self.structural).map(|j| self.value(j)).collect()
    }

    pub fn objective(&self) -> Q {
        (0..self.columns())
            .map(|j| &self.cost[j] * self.value(j))
            .fold(Q::zero(), |a, b| a + b)
    }

    /// Row duals `y_i` of the minimization (`y ≤ 0` at optimum for `≤` rows).
    pub fn duals(&self) -> Vec<Q> {
        (0..self.rows.len())
            .map(|i| -self.reduced[self.structural + i].clone())
            .collect()
    }

    /// Appends `coeffs·x ≤ rhs` (sparse structural coefficients) and returns its index.
    pub fn add_row(&mut self, coeffs: &[(usize, Q)], rhs: Q) -> usize {
        let slack = self.columns();
        self.cost.push(Q::zero());
        self.upper.push(None);
        self.reduced.push(Q::zero());
        for row in &mut self.rows {
            row.push(Q::zero());
        }

        let mut row = vec![Q::zero(); slack + 1];
        let mut activity = Q::zero();
        for (j, a) in coeffs {
            assert!(*j < self.structural, "coefficient on non-structural column");
            row[*j] += a;
            activity += a * self.value(*j);
        }
        row[slack] = Q::one();
        // express in terms of the nonbasic columns
        for i in 0..self.rows.len() {
            let b = self.basis[i];
            if row[b].is_zero() {
                continue;
            }
            let factor = row[b].clone();
            axpy(&mut row, &factor, &self.rows[i]);
        }
        let index = self.rows.len();
        self.rows.push(row);
        self.basis.push(slack);
        self.beta.push(rhs - activity);
        self.state.push(VarState::Basic(index));
        index
    }

    /// Runs the dual simplex to primal feasibility, then the primal simplex to optimality.
    pub fn solve(&mut self) -> Status {
        if self.infeasible_row(false).is_some() {
            if !self.dual_feasible() {
                return Status::NotDualFeasible;
            }
            if let Some(status) = self.dual_phase() {
                return status;
            }
        }
        self.primal_phase()
    }

    fn dual_feasible(&self) -> bool {
        (0..self.columns()).all(|j| match self.state[j] {
            VarState::Basic(_) => true,
            VarState::AtLower => !self.reduced[j].is_negative(),
            VarState::AtUpper => !self.reduced[j].is_positive(),
        })
    }

    /// Basic row outside its bounds, as (row, violated upper bound?).
    fn infeasible_row(&self, bland: bool) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool, Q)> = None;
        for (i, v) in self.beta.iter().enumerate() {
            let b = self.basis[i];
            let violation = if v.is_negative() {
                Some((false, -v.clone()))
            } else {
                match &self.upper[b] {
                    Some(u) if v > u => Some((true, v - u)),
                    _ => None,
                }
            };
            let Some((above, amount)) = violation else { continue };
            let better = match &best {
                None => true,
                Some((bi, _, ba)) => {
                    if bland {
                        b < self.basis[*bi]
                    } else {
                        amount > *ba
                    }
                }
            };
            if better {
                best = Some((i, above, amount));
            }
        }
        best.map(|(i, above, _)| (i, above))
    }

    fn dual_phase(&mut self) -> Option<Status> {
        let mut streak = 0usize;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let (r, above) = self.infeasible_row(bland)?;
            let target = if above {
                self.upper[self.basis[r]].clone().expect("violated finite bound")
            } else {
                Q::zero()
            };
            // x_Br moves by -alpha_rj * delta_j; choose j so it moves toward target
            let mut best: Option<(usize, Q)> = None;
            for j in 0..self.columns() {
                let alpha = &self.rows[r][j];
                if alpha.is_zero() {
                    continue;
                }
                let eligible = match self.state[j] {
                    VarState::Basic(_) => false,
                    VarState::AtLower => alpha.is_positive() == above,
                    VarState::AtUpper => alpha.is_negative() == above,
                };
                if !eligible {
                    continue;
                }
                let ratio = (&self.reduced[j] / alpha).abs();
                if best.as_ref().is_none_or(|(_, b)| ratio < *b) {
                    best = Some((j, ratio));
                }
            }
            let Some((j, ratio)) = best else {
                return Some(Status::Infeasible);
            };
            streak = if ratio.is_zero() { streak + 1 } else { 0 };
            let delta = (&self.beta[r] - &target) / &self.rows[r][j];
            self.step(j, delta, Some((r, above)));
        }
    }

    fn primal_phase(&mut self) -> Status {
        let mut streak = 0usize;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let mut entering: Option<(usize, Q)> = None;
            for j in 0..self.columns() {
                let d = &self.reduced[j];
                let improving = match self.state[j] {
                    VarState::Basic(_) => false,
                    VarState::AtLower => d.is_negative(),
                    VarState::AtUpper => d.is_positive(),
                };
                if !improving {
                    continue;
                }
                if bland {
                    entering = Some((j, d.abs()));
                    break;
                }
                let score = d.abs();
                if entering.as_ref().is_none_or(|(_, s)| score > *s) {
                    entering = Some((j, score));
                }
            }
            let Some((j, _)) = entering else {
                return Status::Optimal;
            };
            let increasing = self.state[j] == VarState::AtLower;

            // ratio test over basic rows and the entering variable's own range
            let mut limit: Option<(Q, Option<(usize, bool)>)> =
                self.upper[j].clone().map(|u| (u, None));
            for i in 0..self.rows.len() {
                let alpha = &self.rows[i][j];
                if alpha.is_zero() {
                    continue;
                }
                // rate at which x_Bi decreases per unit of movement
                let rate = if increasing { alpha.clone() } else { -alpha.clone() };
                let b = self.basis[i];
                let candidate = if rate.is_positive() {
                    Some((&self.beta[i] / &rate, false))
                } else {
                    self.upper[b]
                        .as_ref()
                        .map(|u| ((u - &self.beta[i]) / -&rate, true))
                };
                let Some((t, to_upper)) = candidate else { continue };
                let better = match &limit {
                    None => true,
                    Some((lt, leave)) => {
                        t < *lt
                            || (t == *lt
                                && matches!(leave, Some((li, _)) if b < self.basis[*li]))
                    }
                };
                if better {
                    limit = Some((t, Some((i, to_upper))));
                }
            }
            let Some((t, leave)) = limit else {
                return Status::Unbounded;
            };
            streak = if t.is_zero() { streak + 1 } else { 0 };
            let delta = if increasing { t } else { -t };
            self.step(j, delta, leave);
        }
    }

    /// Moves nonbasic `j` by `delta`, then either pivots it into row `leave.0`
    /// (the leaving variable settles at its upper bound if `leave.1`) or flips its bound.
    fn step(&mut self, j: usize, delta: Q, leave: Option<(usize, bool)>) {
        let start = self.value(j);
        if !delta.is_zero() {
            for i in 0..self.rows.len() {
                let alpha = &self.rows[i][j];
                if !alpha.is_zero() {
                    self.beta[i] -= alpha * &delta;
                }
            }
        }
        match leave {
            None => {
                self.state[j] = match self.state[j] {
                    VarState::AtLower => VarState::AtUpper,
                    _ => VarState::AtLower,
                };
            }
            Some((r, to_upper)) => {
                let old = self.basis[r];
                self.state[old] = if to_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.pivot(r, j);
                self.beta[r] = start + delta;
                self.state[j] = VarState::Basic(r);
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        self.pivots += 1;
        let inv = self.rows[r][j].recip();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let nonzero: Vec<usize> = (0..pivot_row.len())
            .filter(|&k| !pivot_row[k].is_zero())
            .collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[j].is_zero() {
                continue;
            }
            let factor = row[j].clone();
            for &k in &nonzero {
                row[k] -= &factor * &pivot_row[k];
            }
        }
        if !self.reduced[j].is_zero() {
            let factor = self.reduced[j].clone();
            for &k in &nonzero {
                self.reduced[k] -= &factor * &pivot_row[k];
            }
        }
        self.rows[r] = pivot_row;
        self.basis[r] = j;
    }
}

/// `row -= factor * other`, skipping zeros of `other`.
fn axpy(row: &mut [Q], factor: &Q, other: &[Q]) {
    for (v, o) in row.iter_mut().zip(other) {
        if !o.is_zero() {
            *v -= factor * o;
        }
    }
}

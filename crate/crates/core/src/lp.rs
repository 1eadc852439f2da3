//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems here are small (a few variables, at most a few hundred active
//! rows thanks to row generation in `certify`), and degenerate: many nearly
//! identical rows come from similar Jacobians. Bland's rule trades speed for
//! guaranteed termination, which is the right call at this size.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn le(coeffs: Vec<T>, rhs: T) -> Self {
        Self { coeffs, relation: Relation::Le, rhs }
    }

    pub fn ge(coeffs: Vec<T>, rhs: T) -> Self {
        Self { coeffs, relation: Relation::Ge, rhs }
    }

    pub fn eq(coeffs: Vec<T>, rhs: T) -> Self {
        Self { coeffs, relation: Relation::Eq, rhs }
    }

    /// Amount by which `x` violates the constraint (zero or negative when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let lhs: T = self.coeffs.iter().zip(x).map(|(&a, &b)| a * b).sum();
        match self.relation {
            Relation::Le => lhs - self.rhs,
            Relation::Ge => self.rhs - lhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `maximize objective·x` subject to the constraints and `x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    num_vars: usize,
    objective: Vec<T>,
    constraints: Vec<Constraint<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub pivots: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<T> {
    Optimal(LpSolution<T>),
    Infeasible,
    Unbounded,
}

impl<T> LpOutcome<T> {
    pub fn optimal(self) -> Option<LpSolution<T>> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

const MAX_PIVOTS: usize = 200_000;

impl<T: Scalar> LinearProgram<T> {
    pub fn maximize(objective: Vec<T>) -> Self {
        Self { num_vars: objective.len(), objective, constraints: Vec::new() }
    }

    pub fn minimize(objective: Vec<T>) -> Self {
        Self::maximize(objective.into_iter().map(|c| -c).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn add(&mut self, c: Constraint<T>) -> Result<()> {
        if c.coeffs.len() != self.num_vars {
            return Err(Error::DimensionMismatch { expected: self.num_vars, found: c.coeffs.len() });
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::Lp("non-finite constraint data".into()));
        }
        self.constraints.push(c);
        Ok(())
    }

    pub fn with(mut self, c: Constraint<T>) -> Result<Self> {
        self.add(c)?;
        Ok(self)
    }

    /// Default pivot/optimality tolerance: about `eps^(2/3)`.
    pub fn default_tol() -> T {
        T::epsilon().powf(T::lit(2.0 / 3.0))
    }

    pub fn solve(&self) -> Result<LpOutcome<T>> {
        self.solve_with_tol(Self::default_tol())
    }

    pub fn solve_with_tol(&self, tol: T) -> Result<LpOutcome<T>> {
        Tableau::build(self).run(&self.objective, tol)
    }
}

struct Tableau<T> {
    /// m rows of `width + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    num_vars: usize,
    /// First artificial column; artificials occupy `art_start..width`.
    art_start: usize,
    width: usize,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars;
        // Normalize to rhs ≥ 0, flipping the relation where needed.
        let normalized: Vec<(Vec<T>, Relation, T)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < T::zero() {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|&a| -a).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let num_slack = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
        let num_art = normalized.iter().filter(|c| c.1 != Relation::Le).count();
        let art_start = n + num_slack;
        let width = art_start + num_art;
        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let (mut slack, mut art) = (n, art_start);
        for (coeffs, rel, rhs) in normalized {
            let mut row = vec![T::zero(); width + 1];
            row[..n].copy_from_slice(&coeffs);
            row[width] = rhs;
            match rel {
                Relation::Le => {
                    row[slack] = T::one();
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -T::one();
                    slack += 1;
                    row[art] = T::one();
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = T::one();
                    basis.push(art);
                    art += 1;
                }
            }
            rows.push(row);
        }
        Self { rows, basis, num_vars: n, art_start, width, pivots: 0 }
    }

    fn reduced_costs(&self, cost: &[T]) -> Vec<T> {
        let mut z = cost.to_vec();
        z.push(T::zero());
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != T::zero() {
                for (zj, &a) in z.iter_mut().zip(row) {
                    *zj -= cb * a;
                }
            }
        }
        z
    }

    fn pivot(&mut self, r: usize, c: usize, z: &mut [T]) {
        let p = self.rows[r][c];
        for a in self.rows[r].iter_mut() {
            *a /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != T::zero() {
                for (a, &pr) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * pr;
                }
                row[c] = T::zero();
            }
        }
        let f = z[c];
        if f != T::zero() {
            for (a, &pr) in z.iter_mut().zip(&pivot_row) {
                *a -= f * pr;
            }
            z[c] = T::zero();
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Primal simplex iterations on reduced-cost row `z` (maximization) over
    /// columns `< allowed`. Returns false when unbounded.
    fn iterate(&mut self, z: &mut [T], allowed: usize, tol: T) -> Result<bool> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Lp(format!("pivot limit {MAX_PIVOTS} exceeded")));
            }
            // Bland: lowest-index improving column.
            let Some(col) = (0..allowed).find(|&j| z[j] > tol) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > tol {
                    let ratio = row[self.width] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= tol * (T::one() + br.abs());
                            if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, col, z),
            }
        }
    }

    fn run(mut self, objective: &[T], tol: T) -> Result<LpOutcome<T>> {
        let scale = self.rows.iter().flat_map(|r| r.iter()).fold(T::one(), |m, &a| m.max(a.abs()));
        let feas_tol = tol * scale;

        if self.art_start < self.width {
            let mut cost = vec![T::zero(); self.width];
            for c in cost.iter_mut().skip(self.art_start) {
                *c = -T::one();
            }
            let mut z = self.reduced_costs(&cost);
            self.iterate(&mut z, self.width, tol)?;
            let infeasibility: T = self.rows.iter().zip(&self.basis).filter(|(_, &b)| b >= self.art_start).map(|(row, _)| row[self.width]).sum();
            if infeasibility > feas_tol {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive zero-level artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] >= self.art_start {
                    let entering = (0..self.art_start)
                        .filter(|&j| self.rows[i][j].abs() > tol)
                        .max_by(|&a, &b| self.rows[i][a].abs().partial_cmp(&self.rows[i][b].abs()).unwrap());
                    match entering {
                        Some(j) => {
                            let mut dummy = vec![T::zero(); self.width + 1];
                            self.pivot(i, j, &mut dummy);
                        }
                        None => {
                            self.rows.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        let mut cost = vec![T::zero(); self.width];
        cost[..self.num_vars].copy_from_slice(objective);
        let mut z = self.reduced_costs(&cost);
        if !self.iterate(&mut z, self.art_start, tol)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![T::zero(); self.num_vars];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.num_vars {
                x[b] = row[self.width].max(T::zero());
            }
        }
        let value = x.iter().zip(objective).map(|(&a, &c)| a * c).sum();
        Ok(LpOutcome::Optimal(LpSolution { x, objective: value, pivots: self.pivots }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let lp = LinearProgram::maximize(vec![3.0, 5.0])
            .with(Constraint::le(vec![1.0, 0.0], 4.0))
            .unwrap()
            .with(Constraint::le(vec![0.0, 2.0], 12.0))
            .unwrap()
            .with(Constraint::le(vec![3.0, 2.0], 18.0))
            .unwrap();
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!(approx(s.objective, 36.0));
        assert!(approx(s.x[0], 2.0) && approx(s.x[1], 6.0));
    }

    #[test]
    fn needs_phase_one() {
        // min x + y, x + y ≥ 2, x - y = 0 → (1, 1)
        let lp = LinearProgram::minimize(vec![1.0, 1.0]).with(Constraint::ge(vec![1.0, 1.0], 2.0)).unwrap().with(Constraint::eq(vec![1.0, -1.0], 0.0)).unwrap();
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!(approx(s.x[0], 1.0) && approx(s.x[1], 1.0));
        assert!(approx(-s.objective, 2.0));
    }

    #[test]
    fn negative_rhs_le() {
        // max -x, -x ≤ -3 → x = 3
        let lp = LinearProgram::maximize(vec![-1.0]).with(Constraint::le(vec![-1.0], -3.0)).unwrap();
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!(approx(s.x[0], 3.0));
    }

    #[test]
    fn infeasible_detected() {
        let lp = LinearProgram::maximize(vec![1.0]).with(Constraint::le(vec![1.0], 1.0)).unwrap().with(Constraint::ge(vec![1.0], 2.0)).unwrap();
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram::maximize(vec![1.0, 0.0]).with(Constraint::le(vec![-1.0, 1.0], 1.0)).unwrap();
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_duplicate_rows_terminate() {
        // Many copies of the same rows: classic cycling bait without Bland.
        let mut lp = LinearProgram::maximize(vec![10.0, -57.0, -9.0, -24.0]);
        for _ in 0..5 {
            lp.add(Constraint::le(vec![0.5, -5.5, -2.5, 9.0], 0.0)).unwrap();
            lp.add(Constraint::le(vec![0.5, -1.5, -0.5, 1.0], 0.0)).unwrap();
        }
        lp.add(Constraint::le(vec![1.0, 0.0, 0.0, 0.0], 1.0)).unwrap();
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!(approx(s.objective, 1.0));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::maximize(vec![1.0, 1.0]).with(Constraint::eq(vec![1.0, 1.0], 1.0)).unwrap().with(Constraint::eq(vec![2.0, 2.0], 2.0)).unwrap();
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!(approx(s.objective, 1.0));
    }

    #[test]
    fn f32_solve() {
        let lp = LinearProgram::<f32>::maximize(vec![1.0, 2.0])
            .with(Constraint::le(vec![1.0, 1.0], 3.0))
            .unwrap()
            .with(Constraint::le(vec![0.0, 1.0], 2.0))
            .unwrap();
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!((s.objective - 5.0).abs() < 1e-4);
    }

    #[test]
    fn dimension_checked() {
        let mut lp = LinearProgram::<f64>::maximize(vec![1.0]);
        assert!(lp.add(Constraint::le(vec![1.0, 2.0], 1.0)).is_err());
    }
}

//! Dense rational tableau, two phases, Bland's rule.
//!
//! Standard form: every free variable is split, `<=`/`>=` rows get a slack or
//! surplus column, rows with negative right-hand side are negated, and every
//! row receives an artificial column. The artificial block starts as the
//! identity, so at any point it holds `B^{-1}` and the reduced costs of the
//! artificial columns give the row duals directly.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{FarkasWitness, LinProgram, LpCertificate, LpOutcome, Relation, Sense, UnboundedWitness, VarBound};

/// Where each user variable went in standard form.
#[derive(Clone, Copy)]
enum VarMap {
    Plain(usize),
    Split(usize, usize),
}

struct Tableau {
    /// `m` rows of `ncols + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<BigRational>>,
    /// Reduced costs for each column, last entry is `-objective`.
    obj: Vec<BigRational>,
    basis: Vec<usize>,
    ncols: usize,
    /// First artificial column; artificials are `art0..art0 + m`.
    art0: usize,
}

enum Step {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            let inv = p.recip();
            for x in self.rows[r].iter_mut() {
                if !x.is_zero() {
                    *x *= &inv;
                }
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let nz: Vec<usize> = (0..pivot_row.len()).filter(|&j| !pivot_row[j].is_zero()).collect();
        let eliminate = |row: &mut Vec<BigRational>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for &j in &nz {
                let delta = &f * &pivot_row[j];
                row[j] -= delta;
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Runs Bland's rule over columns `< allowed`.
    fn run(&mut self, allowed: usize) -> Step {
        loop {
            let entering = (0..allowed).find(|&j| self.obj[j].is_negative());
            let Some(c) = entering else { return Step::Optimal };
            let mut best: Option<(usize, BigRational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c].is_positive() {
                    let ratio = &row[self.ncols] / &row[c];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return Step::Unbounded(c),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn reprice(&mut self, costs: &[BigRational]) {
        let mut obj = costs.to_vec();
        obj.push(BigRational::zero());
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for (o, a) in obj.iter_mut().zip(row) {
                if !a.is_zero() {
                    *o -= cb * a;
                }
            }
        }
        self.obj = obj;
    }

    fn basic_solution(&self) -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); self.ncols];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            x[b] = row[self.ncols].clone();
        }
        x
    }
}

pub(super) fn solve(lp: &LinProgram) -> LpOutcome {
    let m = lp.constraints.len();
    // column layout: user variables (split as needed), then slacks, then artificials
    let mut maps = Vec::with_capacity(lp.num_vars());
    let mut ncols = 0;
    for b in &lp.vars {
        match b {
            VarBound::NonNegative => {
                maps.push(VarMap::Plain(ncols));
                ncols += 1;
            }
            VarBound::Free => {
                maps.push(VarMap::Split(ncols, ncols + 1));
                ncols += 2;
            }
        }
    }
    let mut slack_of = vec![None; m];
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.relation != Relation::Eq {
            slack_of[i] = Some(ncols);
            ncols += 1;
        }
    }
    let art0 = ncols;
    ncols += m;

    let sign_flip: Vec<bool> = lp.constraints.iter().map(|c| c.rhs.is_negative()).collect();
    let mut rows = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut row = vec![BigRational::zero(); ncols + 1];
        for (j, a) in c.row.iter().enumerate() {
            match maps[j] {
                VarMap::Plain(k) => row[k] = a.clone(),
                VarMap::Split(p, q) => {
                    row[p] = a.clone();
                    row[q] = -a;
                }
            }
        }
        if let Some(s) = slack_of[i] {
            row[s] = if c.relation == Relation::Le {
                BigRational::one()
            } else {
                -BigRational::one()
            };
        }
        row[ncols] = c.rhs.clone();
        if sign_flip[i] {
            for x in row.iter_mut() {
                *x = -&*x;
            }
        }
        row[art0 + i] = BigRational::one();
        rows.push(row);
    }

    let mut t = Tableau {
        rows,
        obj: Vec::new(),
        basis: (art0..art0 + m).collect(),
        ncols,
        art0,
    };

    // phase 1: minimize the sum of artificials
    let mut phase1_costs = vec![BigRational::zero(); ncols];
    for c in phase1_costs[art0..].iter_mut() {
        *c = BigRational::one();
    }
    t.reprice(&phase1_costs);
    if let Step::Unbounded(_) = t.run(ncols) {
        unreachable!("phase 1 objective is bounded below by zero");
    }
    let infeasibility = -t.obj[ncols].clone();
    if infeasibility.is_positive() {
        // phase-1 duals y_i = 1 - d_{art_i}; the Farkas combination is -y / infeasibility
        let multipliers = (0..m)
            .map(|i| {
                let y_std = BigRational::one() - &t.obj[art0 + i];
                let y = if sign_flip[i] { -y_std } else { y_std };
                let y_prime = -y / &infeasibility;
                match lp.constraints[i].relation {
                    Relation::Ge => -y_prime,
                    _ => y_prime,
                }
            })
            .collect();
        return LpOutcome::Infeasible(FarkasWitness { multipliers });
    }

    // drive zero-level artificials out of the basis where possible
    for r in 0..m {
        if t.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&j| !t.rows[r][j].is_zero()) {
                t.pivot(r, c);
            }
        }
    }

    // phase 2 on the real columns, always as a minimization
    let flip_obj = lp.sense == Sense::Maximize;
    let mut costs = vec![BigRational::zero(); ncols];
    for (j, c) in lp.objective.iter().enumerate() {
        let c = if flip_obj { -c } else { c.clone() };
        match maps[j] {
            VarMap::Plain(k) => costs[k] = c,
            VarMap::Split(p, q) => {
                costs[q] = -&c;
                costs[p] = c;
            }
        }
    }
    t.reprice(&costs);
    let step = t.run(art0);

    let to_user = |x: &[BigRational]| -> Vec<BigRational> {
        maps.iter()
            .map(|m| match *m {
                VarMap::Plain(k) => x[k].clone(),
                VarMap::Split(p, q) => &x[p] - &x[q],
            })
            .collect()
    };
    let x_std = t.basic_solution();
    let primal = to_user(&x_std);

    match step {
        Step::Unbounded(c) => {
            let mut d = vec![BigRational::zero(); ncols];
            d[c] = BigRational::one();
            for (row, &b) in t.rows.iter().zip(&t.basis) {
                d[b] = -&row[c];
            }
            LpOutcome::Unbounded(UnboundedWitness {
                point: primal,
                ray: to_user(&d),
            })
        }
        Step::Optimal => {
            let dual = (0..m)
                .map(|i| {
                    let y_std = -&t.obj[t.art0 + i];
                    let y = if sign_flip[i] { -y_std } else { y_std };
                    if flip_obj {
                        -y
                    } else {
                        y
                    }
                })
                .collect();
            let value = super::dot(&lp.objective, &primal);
            LpOutcome::Optimal(LpCertificate { primal, dual, value })
        }
    }
}

//! LPs over the truncated unit ball and its polar: norming points, best
//! approximation from a finite-dimensional subspace, and its dual.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::{solve_certified, LinProgram, LpCertificate, Relation, Sense, VarBound};
use crate::construction::ReadConstruction;
use crate::error::{Error, Result};
use crate::exact::{rank, Sequence, SparseVec};
use crate::norm::PerturbedNorm;

#[derive(Clone, Debug, Serialize)]
pub struct BallMaximizer {
    pub x_star: SparseVec,
    #[serde(with = "crate::exact::serde_rational")]
    pub value: BigRational,
    pub lp: LpCertificate,
}

#[derive(Clone, Debug, Serialize)]
pub struct BestApproximation {
    /// `y_0 = sum_j s_j y_j`.
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub coefficients: Vec<BigRational>,
    pub y0: SparseVec,
    #[serde(with = "crate::exact::serde_rational")]
    pub dist: BigRational,
    /// `F in Y^perp` of truncated dual norm at most 1 with `<F, x> = dist`.
    pub functional: SparseVec,
    /// `F = g + sum_n c_n r_n v_n`, `||g||_1 <= 1`, `|c_n| <= 1`.
    pub g: SparseVec,
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub c: Vec<BigRational>,
    pub lp: LpCertificate,
}

fn working_dim(c: &ReadConstruction, n: usize, vecs: &[&SparseVec]) -> Result<usize> {
    let a_n = if n == 0 { 0 } else { c.term(n)?.a as usize };
    Ok(vecs.iter().map(|v| v.max_index()).fold(a_n, usize::max))
}

/// `max <f, x>` over the truncated unit ball, via the epigraph LP
/// `t + sum r_n s_n <= 1`, `|x_k| <= t`, `|<v_n, x>| <= s_n`.
///
/// The optimum is cross-checked against the decomposition LP of
/// [`PerturbedNorm::dual_norm_truncated`].
pub fn max_on_ball(c: &ReadConstruction, f: &SparseVec, big_n: usize) -> Result<BallMaximizer> {
    let norm = PerturbedNorm::new(c);
    let terms = norm.lowered_terms(big_n)?;
    let n = terms.len();
    let d = working_dim(c, n, &[f])?;
    // columns: x_1..x_d (free) | t | s_1..s_n
    let t = d;
    let s = |i: usize| d + 1 + i;
    let nv = d + 1 + n;
    let mut objective = vec![BigRational::zero(); nv];
    for (k, fk) in f.iter() {
        objective[k - 1] = fk.clone();
    }
    let mut vars = vec![VarBound::Free; d];
    vars.extend(vec![VarBound::NonNegative; n + 1]);
    let mut prog = LinProgram::new(Sense::Maximize, objective, vars);
    let one = BigRational::one;
    let mut budget = vec![(t, one())];
    budget.extend(terms.iter().enumerate().map(|(i, (_, r))| (s(i), r.clone())));
    prog.push_sparse(&budget, Relation::Le, one());
    for k in 0..d {
        prog.push_sparse(&[(k, one()), (t, -one())], Relation::Le, BigRational::zero());
        prog.push_sparse(&[(k, -one()), (t, -one())], Relation::Le, BigRational::zero());
    }
    for (i, (v, _)) in terms.iter().enumerate() {
        let plus: Vec<_> = v
            .iter()
            .map(|(k, vk)| (k - 1, vk.clone()))
            .chain([(s(i), -one())])
            .collect();
        let minus: Vec<_> = v.iter().map(|(k, vk)| (k - 1, -vk)).chain([(s(i), -one())]).collect();
        prog.push_sparse(&plus, Relation::Le, BigRational::zero());
        prog.push_sparse(&minus, Relation::Le, BigRational::zero());
    }
    let cert = solve_certified(&prog)?;
    let x_star = SparseVec::from_dense(&cert.primal[..d]);
    let value = cert.value.clone();
    if norm.norm_truncated(&x_star, n)? > BigRational::one() {
        return Err(Error::Certificate("maximizer leaves the truncated unit ball".into()));
    }
    let other = norm.dual_norm_truncated(f, n)?;
    if other.value != value {
        return Err(Error::Certificate(format!(
            "ball maximum {value} disagrees with decomposition value {}",
            other.value
        )));
    }
    Ok(BallMaximizer {
        x_star,
        value,
        lp: cert,
    })
}

fn check_independent(ys: &[SparseVec]) -> Result<()> {
    let d = ys.iter().map(|y| y.max_index()).max().unwrap_or(0);
    let rows: Vec<Vec<BigRational>> = ys.iter().map(|y| y.to_dense(d)).collect();
    if rank(&rows) != ys.len() {
        return Err(Error::Precondition("subspace generators are linearly dependent".into()));
    }
    Ok(())
}

/// Nearest point to `x` in `span Y` for the truncated norm, with a dual
/// certificate in `Y^perp`.
pub fn best_approximation(
    c: &ReadConstruction,
    x: &SparseVec,
    ys: &[SparseVec],
    big_n: usize,
) -> Result<BestApproximation> {
    check_independent(ys)?;
    let norm = PerturbedNorm::new(c);
    let terms = norm.lowered_terms(big_n)?;
    let n = terms.len();
    let mut all: Vec<&SparseVec> = ys.iter().collect();
    all.push(x);
    let d = working_dim(c, n, &all)?;
    let q = ys.len();
    // columns: s_1..s_q (free) | t | sigma_1..sigma_n
    let t = q;
    let sigma = |i: usize| q + 1 + i;
    let nv = q + 1 + n;
    let mut objective = vec![BigRational::zero(); nv];
    objective[t] = BigRational::one();
    for (i, (_, r)) in terms.iter().enumerate() {
        objective[sigma(i)] = r.clone();
    }
    let mut vars = vec![VarBound::Free; q];
    vars.extend(vec![VarBound::NonNegative; n + 1]);
    let mut prog = LinProgram::new(Sense::Minimize, objective, vars);
    let one = BigRational::one;
    // z = x - sum s_j y_j; rows -z_k... written as  -sum s_j y_jk - t <= -x_k  and  sum s_j y_jk - t <= x_k
    for k in 1..=d {
        let ys_k: Vec<_> = ys.iter().map(|y| y.get(k)).collect();
        let lower: Vec<_> = ys_k
            .iter()
            .enumerate()
            .map(|(j, a)| (j, -a))
            .chain([(t, -one())])
            .collect();
        let upper: Vec<_> = ys_k
            .iter()
            .enumerate()
            .map(|(j, a)| (j, a.clone()))
            .chain([(t, -one())])
            .collect();
        prog.push_sparse(&lower, Relation::Le, -x.get(k));
        prog.push_sparse(&upper, Relation::Le, x.get(k));
    }
    for (i, (v, _)) in terms.iter().enumerate() {
        let yv: Vec<_> = ys.iter().map(|y| y.dot(v)).collect();
        let xv = x.dot(v);
        let lower: Vec<_> = yv
            .iter()
            .enumerate()
            .map(|(j, a)| (j, -a))
            .chain([(sigma(i), -one())])
            .collect();
        let upper: Vec<_> = yv
            .iter()
            .enumerate()
            .map(|(j, a)| (j, a.clone()))
            .chain([(sigma(i), -one())])
            .collect();
        prog.push_sparse(&lower, Relation::Le, -&xv);
        prog.push_sparse(&upper, Relation::Le, xv);
    }
    let cert = solve_certified(&prog)?;
    let coefficients = cert.primal[..q].to_vec();
    let y0 = ys
        .iter()
        .zip(&coefficients)
        .fold(SparseVec::new(), |acc, (y, s)| acc.add(&y.scale(s)));
    let dist = cert.value.clone();
    // duals of the "<=" rows of a minimization are <= 0; negate to read F
    let g = SparseVec::from_dense(
        &(0..d)
            .map(|k| -&cert.dual[2 * k] + &cert.dual[2 * k + 1])
            .collect::<Vec<_>>(),
    );
    let base = 2 * d;
    let mut coeffs = Vec::with_capacity(n);
    let mut functional = g.clone();
    for (i, (v, r)) in terms.iter().enumerate() {
        let weight = -&cert.dual[base + 2 * i] + &cert.dual[base + 2 * i + 1];
        functional = functional.add(&v.scale(&weight));
        coeffs.push(weight / r);
    }
    let out = BestApproximation {
        coefficients,
        y0,
        dist,
        functional,
        g,
        c: coeffs,
        lp: cert,
    };
    check_best_approximation(c, x, ys, n, &out)?;
    Ok(out)
}

/// Re-checks a best-approximation certificate without the LP.
pub fn check_best_approximation(
    c: &ReadConstruction,
    x: &SparseVec,
    ys: &[SparseVec],
    big_n: usize,
    cert: &BestApproximation,
) -> Result<()> {
    let norm = PerturbedNorm::new(c);
    let terms = norm.lowered_terms(big_n)?;
    let fail = |m: &str| Err(Error::Certificate(m.to_string()));
    if norm.norm_truncated(&x.sub(&cert.y0), big_n)? != cert.dist {
        return fail("distance is not attained at y0");
    }
    if ys.iter().any(|y| !cert.functional.dot(y).is_zero()) {
        return fail("functional does not annihilate Y");
    }
    if cert.functional.dot(x) != cert.dist {
        return fail("functional does not attain the distance");
    }
    if cert.g.l1_norm() > BigRational::one() || cert.c.iter().any(|ci| ci.abs() > BigRational::one()) {
        return fail("functional is not in the dual unit ball");
    }
    let rebuilt = terms
        .iter()
        .zip(&cert.c)
        .fold(cert.g.clone(), |acc, ((v, r), ci)| acc.add(&v.scale(&(r * ci))));
    if rebuilt != cert.functional {
        return fail("decomposition does not reproduce the functional");
    }
    Ok(())
}

/// The truncated quotient norm of `x + span Y`.
pub fn quotient_norm(c: &ReadConstruction, x: &SparseVec, ys: &[SparseVec], big_n: usize) -> Result<BigRational> {
    Ok(best_approximation(c, x, ys, big_n)?.dist)
}

/// `max <F, x>` over `F in Y^perp` with truncated dual norm at most 1; equals
/// the distance from `x` to `span Y` by duality.
pub fn annihilator_distance(
    c: &ReadConstruction,
    x: &SparseVec,
    ys: &[SparseVec],
    big_n: usize,
) -> Result<BigRational> {
    let norm = PerturbedNorm::new(c);
    let terms = norm.lowered_terms(big_n)?;
    let n = terms.len();
    let mut all: Vec<&SparseVec> = ys.iter().collect();
    all.push(x);
    let d = working_dim(c, n, &all)?;
    // columns: g+_k, g-_k | c+_n, c-_n ; F = g + sum c_n r_n v_n
    let g_col = |k: usize, neg: bool| 2 * (k - 1) + neg as usize;
    let c_col = |i: usize, neg: bool| 2 * d + 2 * i + neg as usize;
    let nv = 2 * d + 2 * n;
    // <F, w> as a linear form in the columns
    let pairing = |w: &SparseVec| -> Vec<(usize, BigRational)> {
        let mut row = Vec::new();
        for (k, wk) in w.iter() {
            row.push((g_col(k, false), wk.clone()));
            row.push((g_col(k, true), -wk));
        }
        for (i, (v, r)) in terms.iter().enumerate() {
            let coef = r * w.dot(v);
            if !coef.is_zero() {
                row.push((c_col(i, true), -&coef));
                row.push((c_col(i, false), coef));
            }
        }
        row
    };
    let mut objective = vec![BigRational::zero(); nv];
    for (j, a) in pairing(x) {
        objective[j] += a;
    }
    let mut prog = LinProgram::new(Sense::Maximize, objective, vec![VarBound::NonNegative; nv]);
    let one = BigRational::one;
    let l1: Vec<_> = (0..2 * d).map(|j| (j, one())).collect();
    prog.push_sparse(&l1, Relation::Le, one());
    for i in 0..n {
        prog.push_sparse(
            &[(c_col(i, false), one()), (c_col(i, true), one())],
            Relation::Le,
            one(),
        );
    }
    for y in ys {
        prog.push_sparse(&pairing(y), Relation::Eq, BigRational::zero());
    }
    Ok(solve_certified(&prog)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::tests::toy1;
    use crate::exact::{int, rat};
    use proptest::prelude::*;

    fn sv(vals: &[(usize, BigRational)]) -> SparseVec {
        SparseVec::from_entries(vals.iter().cloned()).unwrap()
    }

    #[test]
    fn toy1_ball_maximizers() {
        let c = toy1();
        let m = max_on_ball(&c, &SparseVec::unit(1), 1).unwrap();
        assert_eq!(m.value, int(1));
        assert_eq!(m.x_star, sv(&[(1, int(1)), (2, int(1))]));
        let f = sv(&[(1, rat(1, 16)), (2, rat(-1, 16))]);
        let m = max_on_ball(&c, &f, 1).unwrap();
        assert_eq!(m.value, rat(1, 9));
        assert_eq!(m.x_star, sv(&[(1, rat(8, 9)), (2, rat(-8, 9))]));
        assert_eq!(max_on_ball(&c, &SparseVec::new(), 1).unwrap().value, int(0));
    }

    #[test]
    fn toy1_best_approximation() {
        let c = toy1();
        let ys = [sv(&[(1, int(1)), (2, int(1))])];
        let b = best_approximation(&c, &SparseVec::unit(1), &ys, 1).unwrap();
        assert_eq!(b.y0, sv(&[(1, rat(1, 2)), (2, rat(1, 2))]));
        assert_eq!(b.dist, rat(9, 16));
        assert_eq!(b.functional, sv(&[(1, rat(9, 16)), (2, rat(-9, 16))]));
        assert_eq!(
            annihilator_distance(&c, &SparseVec::unit(1), &ys, 1).unwrap(),
            rat(9, 16)
        );
        // x in Y
        let b = best_approximation(&c, &ys[0].scale(&int(3)), &ys, 1).unwrap();
        assert_eq!(b.dist, int(0));
        assert_eq!(b.y0, ys[0].scale(&int(3)));
        // empty Y
        let x = sv(&[(1, int(1)), (2, rat(-1, 3))]);
        let norm = PerturbedNorm::new(&c).norm_truncated(&x, 1).unwrap();
        assert_eq!(quotient_norm(&c, &x, &[], 1).unwrap(), norm);
        assert_eq!(
            quotient_norm(&c, &SparseVec::unit(1).scale(&int(2)), &ys, 1).unwrap(),
            rat(9, 8)
        );
        assert!(best_approximation(&c, &x, &[ys[0].clone(), ys[0].scale(&int(2))], 1).is_err());
    }

    fn arb_vec(max_index: usize) -> impl Strategy<Value = SparseVec> {
        proptest::collection::vec((1..=max_index, -6i64..7, 1i64..4), 1..4)
            .prop_map(|es| SparseVec::from_entries(es.into_iter().map(|(k, p, q)| (k, rat(p, q)))).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn two_formulations_agree(f in arb_vec(5), n in 0usize..4) {
            let c = ReadConstruction::canonical();
            // max_on_ball errors out on any disagreement
            let m = max_on_ball(&c, &f, n).unwrap();
            prop_assert_eq!(m.value, PerturbedNorm::new(&c).dual_norm_truncated(&f, n).unwrap().value);
        }

        #[test]
        fn distance_duality(x in arb_vec(4), y in arb_vec(4), n in 0usize..3) {
            prop_assume!(!y.is_zero());
            let c = ReadConstruction::canonical();
            let ys = [y];
            let b = best_approximation(&c, &x, &ys, n).unwrap();
            prop_assert_eq!(b.dist.clone(), annihilator_distance(&c, &x, &ys, n).unwrap());
            let q2 = quotient_norm(&c, &x.scale(&int(2)), &ys, n).unwrap();
            prop_assert_eq!(q2, b.dist * int(2));
        }
    }
}

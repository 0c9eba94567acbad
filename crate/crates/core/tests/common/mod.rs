//! Brute-force oracles shared by the integration tests. They rebuild the norm
//! from `u_n` and `a_n` alone and never call the LP layer.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use readspace::construction::{ARule, Descriptor, ReadConstruction, Scheme};
use readspace::exact::SparseVec;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

pub fn toy1() -> ReadConstruction {
    ReadConstruction::new(Descriptor {
        scheme: Scheme::FrontLoaded(vec![SparseVec::unit(1)]),
        a_rule: ARule::Explicit(vec![2]),
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Non-zero sparse vector on `1..=dim` with small numerators and denominators.
pub fn random_vec(rng: &mut ChaCha8Rng, dim: usize, support: usize) -> SparseVec {
    loop {
        let mut v = SparseVec::new();
        for _ in 0..support {
            let k = rng.gen_range(1..=dim);
            v.set(k, q(rng.gen_range(-9..=9), rng.gen_range(1..=7)));
        }
        if !v.is_zero() {
            return v;
        }
    }
}

pub fn dense(v: &SparseVec, d: usize) -> Vec<Q> {
    (1..=d).map(|k| v.get(k)).collect()
}

/// `(v_n, r_n)` recomputed from the listing and exponents.
#[derive(Clone, Debug)]
pub struct OracleTerm {
    pub a: usize,
    pub v: Vec<(usize, Q)>,
    pub r: Q,
}

pub fn oracle_terms(c: &ReadConstruction, n: usize) -> Vec<OracleTerm> {
    (1..=c.available(n))
        .map(|i| {
            let u = c.u(i);
            let a = c.assign_a(i).unwrap() as usize;
            let mut w: Vec<(usize, Q)> = u.iter().map(|(k, x)| (k, x.clone())).collect();
            match w.iter_mut().find(|(k, _)| *k == a) {
                Some(e) => e.1 -= Q::one(),
                None => w.push((a, -Q::one())),
            }
            w.retain(|(_, x)| !x.is_zero());
            let l1: Q = w.iter().map(|(_, x)| x.abs()).sum();
            let r = &l1 / Q::from_integer(BigInt::one() << (a * a));
            OracleTerm {
                a,
                v: w.into_iter().map(|(k, x)| (k, x / &l1)).collect(),
                r,
            }
        })
        .collect()
}

fn pair(v: &[(usize, Q)], x: &[Q]) -> Q {
    v.iter()
        .filter(|(k, _)| *k <= x.len())
        .map(|(k, c)| c * &x[k - 1])
        .sum()
}

/// `||x||_inf + sum r_n |<x, v_n>|` on a dense vector.
pub fn oracle_norm(terms: &[OracleTerm], x: &[Q]) -> Q {
    let sup = x.iter().map(|c| c.abs()).max().unwrap_or_else(Q::zero);
    sup + terms.iter().map(|t| &t.r * pair(&t.v, x).abs()).sum::<Q>()
}

pub fn oracle_norm_f64(terms: &[OracleTerm], x: &[f64]) -> f64 {
    let sup = x.iter().fold(0f64, |m, c| m.max(c.abs()));
    sup + terms
        .iter()
        .map(|t| {
            let p: f64 =
                t.v.iter()
                    .filter(|(k, _)| *k <= x.len())
                    .map(|(k, c)| c.to_f64().unwrap() * x[k - 1])
                    .sum();
            t.r.to_f64().unwrap() * p.abs()
        })
        .sum::<f64>()
}

/// Solves a square system exactly; `None` when singular.
fn solve_exact(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let s = &f * &a[col][c];
                    a[r][c] -= s;
                }
                let s = &f * &b[col];
                b[r] -= s;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Every inequality `<row, x> <= 1` describing the truncated unit ball in `R^d`:
/// `s x_k + sum_n s_n r_n <x, v_n> <= 1` over all sign choices.
fn ball_facets(terms: &[OracleTerm], d: usize) -> Vec<Vec<Q>> {
    let mut out = Vec::new();
    for k in 0..d {
        for s in [Q::one(), -Q::one()] {
            for mask in 0..(1usize << terms.len()) {
                let mut row = vec![Q::zero(); d];
                row[k] += &s;
                for (i, t) in terms.iter().enumerate() {
                    let sign = if mask >> i & 1 == 1 { -Q::one() } else { Q::one() };
                    for (j, c) in &t.v {
                        if *j <= d {
                            row[j - 1] += &sign * &t.r * c;
                        }
                    }
                }
                out.push(row);
            }
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Vertices of the truncated unit ball in `R^d`, by exact enumeration of
/// every `d`-subset of facets.
pub fn ball_vertices(terms: &[OracleTerm], d: usize) -> Vec<Vec<Q>> {
    let facets = ball_facets(terms, d);
    let mut verts: Vec<Vec<Q>> = Vec::new();
    for idx in combinations(facets.len(), d) {
        let a: Vec<Vec<Q>> = idx.iter().map(|&i| facets[i].clone()).collect();
        if let Some(x) = solve_exact(a, vec![Q::one(); d]) {
            let feasible = facets
                .iter()
                .all(|f| f.iter().zip(&x).map(|(a, b)| a * b).sum::<Q>() <= Q::one());
            if feasible && !verts.contains(&x) {
                verts.push(x);
            }
        }
    }
    verts
}

/// `max <f, x>` over the vertices of the truncated unit ball.
pub fn vertex_dual_norm(verts: &[Vec<Q>], f: &[Q]) -> Q {
    verts
        .iter()
        .map(|x| x.iter().zip(f).map(|(a, b)| a * b).sum::<Q>())
        .max()
        .unwrap()
}

/// `min_t |||x - t y|||_N` over every breakpoint of the piecewise-linear
/// function `t -> |||x - t y|||_N`.
pub fn breakpoint_quotient(terms: &[OracleTerm], x: &[Q], y: &[Q]) -> Q {
    let mut affine: Vec<(Q, Q)> = x.iter().cloned().zip(y.iter().cloned()).collect();
    for t in terms {
        affine.push((pair(&t.v, x), pair(&t.v, y)));
    }
    let mut cands = vec![Q::zero()];
    let root = |p: &Q, s: &Q| if s.is_zero() { None } else { Some(p / s) };
    let d = x.len();
    for (i, (p, s)) in affine.iter().enumerate() {
        cands.extend(root(p, s));
        if i < d {
            for (p2, s2) in &affine[..d] {
                cands.extend(root(&(p - p2), &(s - s2)));
                cands.extend(root(&(p + p2), &(s + s2)));
            }
        }
    }
    cands
        .iter()
        .map(|t| {
            let z: Vec<Q> = x.iter().zip(y).map(|(a, b)| a - t * b).collect();
            oracle_norm(terms, &z)
        })
        .min()
        .unwrap()
}

/// `min_a max(|||x - T a|||_N, ||a||_2)` by nested grid search, where
/// `T a = sum_i a_i 2^-i p_i`.
pub fn grid_gauge(terms: &[OracleTerm], points: &[Vec<f64>], x: &[f64]) -> f64 {
    let q = points.len();
    let eval = |a: &[f64]| {
        let mut z = x.to_vec();
        for (i, p) in points.iter().enumerate() {
            let w = a[i] * 0.5f64.powi(i as i32 + 1);
            for (zk, pk) in z.iter_mut().zip(p) {
                *zk -= w * pk;
            }
        }
        let e = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        oracle_norm_f64(terms, &z).max(e)
    };
    let mut center = vec![0.0; q];
    let mut best = eval(&center);
    // any optimal a has ||a||_2 <= mu <= |||x|||
    let mut radius = oracle_norm_f64(terms, x) + 0.5;
    let steps = 40i32;
    while radius > 1e-9 {
        let h = radius / steps as f64;
        let mut improved = center.clone();
        let mut idx = vec![-steps; q];
        loop {
            let a: Vec<f64> = center.iter().zip(&idx).map(|(c, &i)| c + h * i as f64).collect();
            let v = eval(&a);
            if v < best {
                best = v;
                improved = a;
            }
            let mut j = 0;
            while j < q && idx[j] == steps {
                idx[j] = -steps;
                j += 1;
            }
            if j == q {
                break;
            }
            idx[j] += 1;
        }
        center = improved;
        radius *= 0.5;
    }
    best
}

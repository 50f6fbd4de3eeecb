//! Reference computations shared by the integration and acceptance tests.
//! None of them reuse the code under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// `(I + M/k)^k` with `k = 2^doublings`, by repeated squaring.
fn euler_power(m: &DMatrix<f64>, doublings: u32) -> DMatrix<f64> {
    let k = (1u64 << doublings) as f64;
    let mut p = DMatrix::identity(m.nrows(), m.ncols()) + m / k;
    for _ in 0..doublings {
        p = &p * &p;
    }
    p
}

/// Matrix exponential from forward Euler at `2^20` and `2^21` sub-steps
/// with one Richardson extrapolation.
pub fn euler_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let coarse = euler_power(m, 20);
    let fine = euler_power(m, 21);
    fine * 2.0 - coarse
}

/// Natural log of a big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    assert!(!x.is_zero());
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln Σ_{j<=k} C(n,j) ε^j (1-ε)^(n-j)` with `ε = num/den`.
///
/// The sum factors as `den^-n (den-num)^(n-k) Σ_j C(n,j) num^j (den-num)^(k-j)`;
/// the last sum is evaluated exactly in integers.
pub fn ln_binomial_tail(n: u64, k: u64, num: u64, den: u64) -> f64 {
    assert!(k <= n && num > 0 && num < den);
    let c = den - num;
    let mut choose = BigUint::one();
    let mut sum = BigUint::zero();
    for j in 0..=k {
        if j > 0 {
            choose = choose * BigUint::from(n - j + 1) / BigUint::from(j);
        }
        sum += &choose * BigUint::from(num).pow(j as u32) * BigUint::from(c).pow((k - j) as u32);
    }
    let eps = num as f64 / den as f64;
    ln_big(&sum) - k as f64 * (den as f64).ln() + (n - k) as f64 * (-eps).ln_1p()
}

/// Exhaustive QP optimum: the best feasible point among the minimizers of
/// every face spanned by at most `d` rows.
pub fn brute_force_qp(
    r: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let d = r.nrows();
    let m = a.nrows();
    let cost = |u: &DVector<f64>| (u.transpose() * r * u)[(0, 0)] + g.dot(u);
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut subset = Vec::new();
    fn visit(start: usize, m: usize, d: usize, subset: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        f(subset);
        if subset.len() == d {
            return;
        }
        for i in start..m {
            subset.push(i);
            visit(i + 1, m, d, subset, f);
            subset.pop();
        }
    }
    visit(0, m, d, &mut subset, &mut |s: &[usize]| {
        let k = s.len();
        let mut kkt = DMatrix::zeros(d + k, d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(&(r * 2.0));
        let mut rhs = DVector::zeros(d + k);
        rhs.rows_mut(0, d).copy_from(&(-g));
        for (i, &row) in s.iter().enumerate() {
            for c in 0..d {
                kkt[(d + i, c)] = a[(row, c)];
                kkt[(c, d + i)] = a[(row, c)];
            }
            rhs[d + i] = b[row];
        }
        let lu = kkt.lu();
        if lu.determinant().abs() < 1e-12 {
            return;
        }
        let Some(sol) = lu.solve(&rhs) else { return };
        let u = sol.rows(0, d).into_owned();
        if (a * &u - b).max() > 1e-9 {
            return;
        }
        let c = cost(&u);
        if best.as_ref().is_none_or(|(_, bc)| c < *bc) {
            best = Some((u, c));
        }
    });
    best
}

/// `P(X = k)` for `X ~ Poisson(lambda)`, summed in log-space.
pub fn poisson_pmf(lambda: f64, k: u32) -> f64 {
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    (k as f64 * lambda.ln() - lambda - ln_fact).exp()
}

/// A random strictly convex QP with `d <= 6` variables and up to 20 rows,
/// feasible at the origin. Returns `(R, g, A, b)`.
pub fn random_qp(rng: &mut impl rand::Rng) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let d = rng.random_range(1..=6usize);
    let m = rng.random_range(1..=20usize);
    let l = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let r = &l * l.transpose() + DMatrix::identity(d, d) * 0.1;
    let g = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
    let a = DMatrix::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |_, _| rng.random_range(0.05..1.0));
    (r, g, a, b)
}

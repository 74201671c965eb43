//! Test support: deterministic random matrices and independent oracles
//! (characteristic-polynomial root finder, Gaussian-elimination determinant).
//! Kept free of the production eigensolver path so the two routes stay
//! independent.

#![doc(hidden)]

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::model::{Channel, Conventions, DiagEnergy, SystemSpec, WidthSign};

/// SplitMix64: tiny deterministic generator so tests need no RNG crate.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> TestRng {
        TestRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }

    pub fn range(&mut self, lo: usize, hi_incl: usize) -> usize {
        lo + (self.next_u64() % (hi_incl - lo + 1) as u64) as usize
    }
}

pub fn random_symmetric(rng: &mut TestRng, n: usize) -> Array2<C64> {
    let mut a = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let z = C64::new(rng.unit(), rng.unit());
            a[[i, j]] = z;
            a[[j, i]] = z;
        }
    }
    a
}

/// The constructed exceptional-point fixture [[0, 1/2], [1/2, i]]:
/// discriminant (0 - i)^2 + 4 (1/2)^2 = 0, double eigenvalue i/2.
pub fn ep_fixture() -> Array2<C64> {
    let mut a = Array2::<C64>::zeros((2, 2));
    a[[0, 1]] = C64::new(0.5, 0.0);
    a[[1, 0]] = C64::new(0.5, 0.0);
    a[[1, 1]] = C64::new(0.0, 1.0);
    a
}

/// A SystemSpec whose Hamiltonian at a = 0, omega = i is exactly the EP
/// fixture: the channel W = (1,1) with omega = i adds 1/2 on the whole
/// 2x2 block, compensated by e0 = -1/2 and gamma0 = 2 under the plus
/// width-sign convention.
pub fn ep_fixture_spec() -> SystemSpec {
    SystemSpec {
        n_states: 2,
        diag_energies: vec![
            DiagEnergy { e0: -0.5, e1: 0.0, gamma0: 0.0 },
            DiagEnergy { e0: -0.5, e1: 0.0, gamma0: 2.0 },
        ],
        channels: vec![Channel {
            w: vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
            label: "env".into(),
        }],
        conventions: Conventions { width_sign: WidthSign::PaperPlus },
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det_gauss(a: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = C64::new(1.0, 0.0);
    for k in 0..n {
        let mut imax = k;
        for i in k + 1..n {
            if m[[i, k]].norm() > m[[imax, k]].norm() {
                imax = i;
            }
        }
        if imax != k {
            for j in 0..n {
                let t = m[[k, j]];
                m[[k, j]] = m[[imax, j]];
                m[[imax, j]] = t;
            }
            det = -det;
        }
        let p = m[[k, k]];
        if p == C64::new(0.0, 0.0) {
            return C64::new(0.0, 0.0);
        }
        det *= p;
        for i in k + 1..n {
            let f = m[[i, k]] / p;
            for j in k..n {
                let sub = f * m[[k, j]];
                m[[i, j]] -= sub;
            }
        }
    }
    det
}

/// Roots of the characteristic polynomial for N <= 3, via closed-form
/// quadratic/cubic solution on directly expanded coefficients.
pub fn char_poly_roots(a: &Array2<C64>) -> Vec<C64> {
    let n = a.nrows();
    match n {
        1 => vec![a[[0, 0]]],
        2 => {
            let tr = a[[0, 0]] + a[[1, 1]];
            let det = a[[0, 0]] * a[[1, 1]] - a[[0, 1]] * a[[1, 0]];
            solve_quadratic(-tr, det)
        }
        3 => {
            let tr = a[[0, 0]] + a[[1, 1]] + a[[2, 2]];
            let minors = a[[0, 0]] * a[[1, 1]] - a[[0, 1]] * a[[1, 0]]
                + a[[0, 0]] * a[[2, 2]]
                - a[[0, 2]] * a[[2, 0]]
                + a[[1, 1]] * a[[2, 2]]
                - a[[1, 2]] * a[[2, 1]];
            let det = det_gauss(a);
            solve_cubic(-tr, minors, -det)
        }
        _ => panic!("char_poly_roots supports N <= 3 only"),
    }
}

/// z^2 + p z + q = 0.
fn solve_quadratic(p: C64, q: C64) -> Vec<C64> {
    let disc = (p * p - 4.0 * q).sqrt();
    // avoid cancellation: pick the larger-magnitude root first
    let r1 = if (-p + disc).norm() >= (-p - disc).norm() { (-p + disc) * 0.5 } else { (-p - disc) * 0.5 };
    let r2 = if r1.norm() > 0.0 { q / r1 } else { (-p - disc) * 0.5 };
    vec![r1, r2]
}

/// z^3 + p z^2 + q z + r = 0 (complex Cardano).
fn solve_cubic(p: C64, q: C64, r: C64) -> Vec<C64> {
    let third = 1.0 / 3.0;
    let shift = p * third;
    // depressed: t^3 + a t + b
    let a = q - p * p * third;
    let b = 2.0 * p * p * p / 27.0 - p * q * third + r;
    let half_b = b * 0.5;
    let disc = (half_b * half_b + (a * third) * (a * third) * (a * third)).sqrt();
    let mut u_cubed = -half_b + disc;
    if u_cubed.norm() < (-half_b - disc).norm() {
        u_cubed = -half_b - disc;
    }
    let omega = C64::new(-0.5, 0.75f64.sqrt());
    if u_cubed.norm() == 0.0 {
        // a ~ 0: t^3 = -b
        let t0 = (-b).powf(third);
        return (0..3).map(|k| t0 * omega.powu(k) - shift).collect();
    }
    let u0 = u_cubed.powf(third);
    (0..3)
        .map(|k| {
            let u = u0 * omega.powu(k);
            u - a * third / u - shift
        })
        .collect()
}

/// True iff the two lists agree as multisets within `tol`, checked by
/// brute-force permutation matching (small N only).
pub fn match_multisets(got: &[C64], expected: &[C64], tol: f64) -> bool {
    assert!(got.len() == expected.len() && got.len() <= 8);
    fn rec(got: &[C64], expected: &[C64], used: &mut [bool], i: usize, tol: f64) -> bool {
        if i == got.len() {
            return true;
        }
        for j in 0..expected.len() {
            if !used[j] && (got[i] - expected[j]).norm() <= tol {
                used[j] = true;
                if rec(got, expected, used, i + 1, tol) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    let mut used = vec![false; got.len()];
    rec(got, expected, &mut used, 0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, ParameterPoint};

    #[test]
    fn cubic_oracle_roots_satisfy_polynomial() {
        let mut rng = TestRng::new(42);
        for _ in 0..100 {
            let p = C64::new(rng.unit(), rng.unit());
            let q = C64::new(rng.unit(), rng.unit());
            let r = C64::new(rng.unit(), rng.unit());
            for z in solve_cubic(p, q, r) {
                let val = z * z * z + p * z * z + q * z + r;
                assert!(val.norm() < 1e-10, "residual {}", val.norm());
            }
        }
    }

    #[test]
    fn fixture_spec_builds_the_fixture_matrix() {
        let spec = ep_fixture_spec();
        let point = ParameterPoint { a: 0.0, omegas: vec![C64::new(0.0, 1.0)] };
        let h = build_hamiltonian(&spec, &point).unwrap();
        let expect = ep_fixture();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.entries[[i, j]] - expect[[i, j]]).norm() < 1e-15);
            }
        }
    }
}

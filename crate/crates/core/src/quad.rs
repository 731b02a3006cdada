//! Quadrature rules for the KL information integrals.
//!
//! Two kinds of expectation show up in the channel penalty terms:
//! Gaussian expectations `E[f(ν)]`, `ν ~ N(0,1)`, handled by Gauss-Hermite
//! rules, and exponential-weight integrals `∫₀^∞ f(u) e^{-u} du` from
//! squared complex Gaussians, handled by an adaptive Gauss-Kronrod rule on
//! a truncated interval. The integrands are bounded (logs of mixture
//! ratios), so truncation at `u = 60` keeps the tail below 1e-24 of the
//! bound.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

const SQRT_PI: f64 = 1.772453850905516_f64;

/// Gauss-Hermite rule for the weight `e^{-x²}` on the whole real line.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the `n`-point rule by Newton iteration on the (orthonormal)
    /// Hermite recurrence. Supports the range used here (`4 ..= 256`).
    pub fn new(n: usize) -> Self {
        assert!(
            (4..=256).contains(&n),
            "unsupported Gauss-Hermite order {n}"
        );
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..m {
            // Standard initial guesses, largest root first.
            z = match i {
                0 => fmath::sqrt(2.0 * nf + 1.0) - 1.85575 * libm::pow(2.0 * nf + 1.0, -1.0 / 6.0),
                1 => z - 1.14 * libm::pow(nf, 0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                // Orthonormal recurrence keeps the iterates bounded.
                let mut p1 = 1.0 / fmath::sqrt(SQRT_PI); // pi^(-1/4)
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * fmath::sqrt(2.0 / jf) * p2 - fmath::sqrt((jf - 1.0) / jf) * p3;
                }
                pp = fmath::sqrt(2.0 * nf) * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 * (1.0 + z.abs()) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫ f(x) e^{-x²} dx`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(*x);
        }
        acc
    }

    /// `E[f(ν)]` for standard normal `ν`.
    pub fn normal_expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.integrate(|x| f(core::f64::consts::SQRT_2 * x)) / SQRT_PI
    }

    /// `E[f(ν₁, ν₂)]` for independent standard normals, as a tensor rule.
    pub fn normal_expectation_2d(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (x1, w1) in self.nodes.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for (x2, w2) in self.nodes.iter().zip(&self.weights) {
                inner += w2
                    * f(
                        core::f64::consts::SQRT_2 * x1,
                        core::f64::consts::SQRT_2 * x2,
                    );
            }
            acc += w1 * inner;
        }
        acc / (SQRT_PI * SQRT_PI)
    }
}

// 15-point Kronrod extension of 7-point Gauss (QUADPACK dqk15 constants).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to the given
/// absolute tolerance. Interval-splitting is iterative with a small
/// explicit stack; panics only if the tolerance is unreachable within the
/// subdivision budget.
pub fn adaptive_gauss_kronrod(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    let mut stack = vec![(a, b, abs_tol)];
    let mut total = 0.0;
    let mut splits = 0usize;
    while let Some((lo, hi, tol)) = stack.pop() {
        let (val, err) = gk15(&mut f, lo, hi);
        if err <= tol || hi - lo < 1e-12 * (1.0 + lo.abs()) {
            total += val;
        } else {
            splits += 1;
            assert!(splits < 100_000, "quadrature failed to converge");
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol));
            stack.push((mid, hi, 0.5 * tol));
        }
    }
    total
}

/// `∫₀^∞ f(u) e^{-u} du` for bounded `f`, truncated where the weight is
/// negligible.
pub fn exp_weighted_integral(mut f: impl FnMut(f64) -> f64, abs_tol: f64) -> f64 {
    adaptive_gauss_kronrod(|u| f(u) * fmath::exp(-u), 0.0, 60.0, abs_tol)
}

/// `E[f(ν)]` for standard normal `ν` by adaptive quadrature, for integrands
/// too cliff-like for a fixed Gauss-Hermite rule. Truncation at `|ν| = 14`
/// leaves tail mass below 1e-43.
pub fn normal_expectation_adaptive(mut f: impl FnMut(f64) -> f64, abs_tol: f64) -> f64 {
    const INV_SQRT_TAU: f64 = 0.3989422804014327; // 1/sqrt(2 pi)
    adaptive_gauss_kronrod(
        |v| f(v) * INV_SQRT_TAU * fmath::exp(-0.5 * v * v),
        -14.0,
        14.0,
        abs_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_hermite_moments() {
        for n in [16usize, 64, 96, 128] {
            let gh = GaussHermite::new(n);
            assert_relative_eq!(gh.integrate(|_| 1.0), SQRT_PI, max_relative = 1e-13);
            assert_relative_eq!(gh.normal_expectation(|v| v * v), 1.0, max_relative = 1e-12);
            assert_relative_eq!(
                gh.normal_expectation(|v| v * v * v * v),
                3.0,
                max_relative = 1e-12
            );
            assert!(gh.normal_expectation(|v| v).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_hermite_gaussian_mgf() {
        // E[e^{tv}] = e^{t^2/2}; smooth non-polynomial check.
        let gh = GaussHermite::new(64);
        for t in [0.3, 1.0, 2.5] {
            assert_relative_eq!(
                gh.normal_expectation(|v| (t * v).exp()),
                (t * t / 2.0_f64).exp(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn gauss_hermite_2d_product_rule() {
        let gh = GaussHermite::new(32);
        let v = gh.normal_expectation_2d(|x, y| x * x * y * y + x + y);
        assert_relative_eq!(v, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn kronrod_known_integrals() {
        let v = adaptive_gauss_kronrod(|x| x.sin(), 0.0, core::f64::consts::PI, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        let v = adaptive_gauss_kronrod(|x| (-x * x).exp(), -8.0, 8.0, 1e-12);
        assert_relative_eq!(v, SQRT_PI, max_relative = 1e-12);
    }

    #[test]
    fn exponential_weight_moments() {
        assert_relative_eq!(
            exp_weighted_integral(|_| 1.0, 1e-12),
            1.0,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            exp_weighted_integral(|u| u, 1e-12),
            1.0,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            exp_weighted_integral(|u| u * u, 1e-12),
            2.0,
            max_relative = 1e-11
        );
    }
}

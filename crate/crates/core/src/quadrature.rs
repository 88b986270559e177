//! Globally adaptive 21-point Gauss–Kronrod quadrature over real or complex
//! valued integrands.

#![allow(clippy::excessive_precision)]

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077632044045955,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for XGK[1], XGK[3], .., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Values the integrator can accumulate.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Fixed-size vector of reals, for integrating several profiles at once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<const N: usize>(pub [f64; N]);

impl<const N: usize> Add for Vector<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] += o.0[i];
        }
        self
    }
}

impl<const N: usize> Sub for Vector<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] -= o.0[i];
        }
        self
    }
}

impl<const N: usize> Mul<f64> for Vector<N> {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for v in &mut self.0 {
            *v *= s;
        }
        self
    }
}

impl<const N: usize> QuadValue for Vector<N> {
    fn zero() -> Self {
        Vector([0.0; N])
    }
    fn magnitude(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadTolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_evals: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOutput<T> {
    pub value: T,
    pub error: f64,
    pub evals: usize,
}

/// One 21-point Kronrod panel: (Kronrod estimate, |Kronrod - Gauss|).
pub fn gk21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[10];
    let mut g = T::zero();
    for i in 0..10 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[i];
        if i % 2 == 1 {
            g = g + s * WG[i / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).magnitude())
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Adaptive integration over `[a, b]`.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    tol: &QuadTolerance,
) -> Result<QuadOutput<T>> {
    integrate_breaks(f, &[a, b], tol)
}

/// Adaptive integration starting from the panels delimited by `breaks`.
pub fn integrate_breaks<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    breaks: &[f64],
    tol: &QuadTolerance,
) -> Result<QuadOutput<T>> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk21(&mut f, w[0], w[1]);
            evals += 21;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    let (mut total, mut err) = heap
        .iter()
        .fold((T::zero(), 0.0), |(s, e), p| (s + p.value, e + p.error));
    loop {
        let target = tol.abs_tol.max(tol.rel_tol * total.magnitude());
        if err <= target {
            // Re-sum from the panels so the result does not carry drift.
            let (value, error) = heap
                .iter()
                .fold((T::zero(), 0.0), |(s, e), p| (s + p.value, e + p.error));
            return Ok(QuadOutput {
                value,
                error,
                evals,
            });
        }
        if evals >= tol.max_evals {
            return Err(Error::Quadrature {
                value: total.magnitude(),
                error: err,
                evals,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) || worst.error == 0.0 {
            // Interval exhausted at machine precision; accept its contribution.
            err -= worst.error;
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            if heap.iter().all(|p| p.error == 0.0) {
                err = 0.0;
            }
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, m);
        let (v2, e2) = gk21(&mut f, m, worst.b);
        evals += 42;
        total = total - worst.value + v1 + v2;
        err = (err - worst.error + e1 + e2).max(0.0);
        heap.push(Panel {
            a: worst.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: m,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        // Kronrod part integrates degree 31 exactly, Gauss part degree 19.
        for deg in [0, 5, 19, 30] {
            let (k, _) = gk21(&mut |x: f64| x.powi(deg), -1.0, 1.0);
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert!((k - exact).abs() < 1e-14, "deg {deg}: {k}");
        }
        let (_, e) = gk21(&mut |x: f64| x.powi(18), -1.0, 1.0);
        assert!(e < 1e-14);
    }

    #[test]
    fn adaptive_on_peaked_integrand() {
        let tol = QuadTolerance {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_evals: 100_000,
        };
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, &tol).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((r.value - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn complex_and_vector_values() {
        let tol = QuadTolerance::default();
        let r = integrate(
            |x: f64| Complex64::new(0.0, x).exp(),
            0.0,
            std::f64::consts::PI,
            &tol,
        )
        .unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-10);
        let r = integrate(|x: f64| Vector([x, x * x]), 0.0, 1.0, &tol).unwrap();
        assert!((r.value.0[0] - 0.5).abs() < 1e-14 && (r.value.0[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = QuadTolerance {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_evals: 200,
        };
        assert!(matches!(
            integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &tol),
            Err(Error::Quadrature { .. })
        ));
    }
}

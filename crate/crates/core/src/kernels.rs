//! Symmetric compactly supported kernels of arbitrary even order.
//!
//! Every kernel here has the form
//!
//! ```text
//! K(u) = (3/4)(1 - u²) · P(u²)   for |u| ≤ 1,   0 otherwise
//! ```
//!
//! where `(3/4)(1 - u²)` is the Epanechnikov base weight `w` and `P` is an
//! even polynomial. A kernel of order `r` has `∫K = 1` and `∫uᵏK = 0` for
//! `k = 1..=r`. It is obtained from the reproducing kernel of the
//! polynomials of degree `≤ r` under the inner product `⟨p, q⟩ = ∫ p q w`:
//!
//! ```text
//! K_r(u) = w(u) · Σ_{k ≤ r} p_k(0) p_k(u) / ⟨p_k, p_k⟩
//! ```
//!
//! with `p_k` the monic orthogonal polynomials for `w` (Gegenbauer, λ = 3/2).
//! The expansion is carried out in exact rational arithmetic and rounded
//! once, so the coefficients are bit-for-bit reproducible.
//!
//! Kernels with `r ≥ 2` take negative values somewhere in (-1, 1).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Points per unit used when scanning for `sup |K|`.
const SUP_SCAN_POINTS: usize = 8192;

/// A symmetric kernel supported on [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    order: u32,
    coefficients: Vec<f64>,
    sup_bound: f64,
}

impl KernelSpec {
    /// The Epanechnikov kernel `(3/4)(1 - u²)`.
    ///
    /// Its first moment vanishes but its second is `1/5`, so its order in
    /// the "moments `1..=r` vanish" sense is 1.
    pub fn epanechnikov() -> Self {
        Self::from_coefficients(1, vec![1.0])
    }

    fn from_coefficients(order: u32, coefficients: Vec<f64>) -> Self {
        let mut kernel = Self {
            order,
            coefficients,
            sup_bound: 0.0,
        };
        kernel.sup_bound = kernel.scan_sup();
        kernel
    }

    /// Number of leading moments (after the zeroth) that vanish.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Half-width of the support; always 1.
    pub fn support_halfwidth(&self) -> f64 {
        1.0
    }

    /// Coefficients of `P` in ascending powers of `u²`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Upper bound `D` on `|K(u)|` over the real line.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Evaluates `K(u)`. Returns exactly 0 outside [-1, 1] (and for NaN).
    #[inline]
    pub fn evaluate(&self, u: f64) -> f64 {
        if !(u.abs() <= 1.0) {
            return 0.0;
        }
        let t = u * u;
        let poly = self
            .coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * t + c);
        0.75 * (1.0 - t) * poly
    }

    fn scan_sup(&self) -> f64 {
        // K is even, so scanning [0, 1] suffices.
        let step = 1.0 / SUP_SCAN_POINTS as f64;
        let mut best_u = 0.0;
        let mut best = 0.0f64;
        for i in 0..=SUP_SCAN_POINTS {
            let u = i as f64 * step;
            let v = self.evaluate(u).abs();
            if v > best {
                best = v;
                best_u = u;
            }
        }
        // Golden-section refinement of the best bracket.
        let (mut lo, mut hi) = ((best_u - step).max(0.0), (best_u + step).min(1.0));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let a = hi - ratio * (hi - lo);
            let b = lo + ratio * (hi - lo);
            if self.evaluate(a).abs() >= self.evaluate(b).abs() {
                hi = b;
            } else {
                lo = a;
            }
        }
        let refined = self.evaluate(0.5 * (lo + hi)).abs();
        best.max(refined) * (1.0 + 1e-12)
    }
}

/// Builds the order-`r` kernel on [-1, 1] for a positive even `r`.
///
/// The returned kernel integrates to one and has vanishing moments
/// `1..=r`; `P` has degree `r` in `u`.
pub fn build_order_r_kernel(r: i64) -> Result<KernelSpec> {
    if r <= 0 || r % 2 != 0 {
        return Err(Error::InvalidKernelOrder(r));
    }
    let half = (r / 2) as usize;
    let coefficients = reproducing_kernel_at_zero(half)
        .iter()
        .map(|c| c.to_f64().expect("finite rational coefficient"))
        .collect();
    Ok(KernelSpec::from_coefficients(r as u32, coefficients))
}

/// `∫ uᵏ K(u) du` under the 512-node Gauss–Legendre rule.
pub fn kernel_moment(kernel: &KernelSpec, k: u32) -> f64 {
    let k = k as i32;
    GaussLegendre::moment_rule().integrate(|u| u.powi(k) * kernel.evaluate(u))
}

/// Polynomials in `t = u²`, ascending coefficients.
type EvenPoly = Vec<BigRational>;

/// `∫ u^{2m} (3/4)(1 - u²) du = 3 / ((2m + 1)(2m + 3))`.
fn base_even_moment(m: usize) -> BigRational {
    let m = m as i64;
    BigRational::new(BigInt::from(3), BigInt::from((2 * m + 1) * (2 * m + 3)))
}

fn inner(p: &EvenPoly, q: &EvenPoly) -> BigRational {
    let mut acc = BigRational::zero();
    for (i, a) in p.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in q.iter().enumerate() {
            if !b.is_zero() {
                acc += a * b * base_even_moment(i + j);
            }
        }
    }
    acc
}

/// Coefficients of `Σ_{k ≤ half} p_k(0) p_k(t) / ⟨p_k, p_k⟩` over the even
/// orthogonal polynomials of degree `≤ 2·half`. Odd-degree terms vanish
/// at zero and drop out.
fn reproducing_kernel_at_zero(half: usize) -> EvenPoly {
    let mut basis: Vec<(EvenPoly, BigRational)> = Vec::with_capacity(half + 1);
    let mut result: EvenPoly = vec![BigRational::zero(); half + 1];
    for k in 0..=half {
        let mut p: EvenPoly = vec![BigRational::zero(); k + 1];
        p[k] = BigRational::one();
        let monomial = p.clone();
        for (q, norm) in &basis {
            let proj = inner(&monomial, q) / norm;
            for (i, c) in q.iter().enumerate() {
                p[i] -= &proj * c;
            }
        }
        let norm = inner(&p, &p);
        let scale = &p[0] / &norm;
        for (i, c) in p.iter().enumerate() {
            result[i] += &scale * c;
        }
        basis.push((p, norm));
    }
    result
}

//! Gauss–Legendre quadrature on [-1, 1].

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of nodes used for every kernel moment check.
pub const MOMENT_NODES: usize = 512;

/// A Gauss–Legendre rule stored as the positive half of its nodes.
///
/// Only even node counts are supported, so no node sits at the origin and
/// every node `x` has a mirror `-x` with the same weight.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-node rule by Newton iteration on the Legendre
    /// polynomial `P_n`.
    ///
    /// # Panics
    /// If `n` is zero or odd.
    pub fn new(n: usize) -> Self {
        assert!(
            n > 0 && n.is_multiple_of(2),
            "node count must be even and positive"
        );
        let half = n / 2;
        let mut nodes = Vec::with_capacity(half);
        let mut weights = Vec::with_capacity(half);
        let nf = n as f64;
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    /// The shared 512-node rule.
    pub fn moment_rule() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(MOMENT_NODES))
    }

    pub fn len(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over [-1, 1]. Mirrored node pairs are summed before
    /// accumulation, so an odd integrand whose values at `x` and `-x`
    /// are exact negatives integrates to exactly zero.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * (f(x) + f(-x)))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

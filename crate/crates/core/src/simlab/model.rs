use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::stream;
use crate::error::{Error, Result};
use crate::sample::Sample;

/// Link functions `F` in `Y = F(β₁ᵀX, …, β_NᵀX, ε)`, with `tₖ = βₖᵀX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// M1: `Y = t₁ + σε`.
    Linear,
    /// M2: `Y = t₁(t₂ + 1) + σε`.
    Product,
    /// M3: `Y = t₁² + σε`. `E[X | Y] = 0` by symmetry, so `Λ = 0`.
    Quadratic,
    /// `Y = σε`, independent of `X`.
    PureNoise,
}

impl Link {
    /// Number of index directions the link reads.
    pub fn indices_used(self) -> usize {
        match self {
            Link::Linear | Link::Quadratic => 1,
            Link::Product => 2,
            Link::PureNoise => 0,
        }
    }

    fn apply(self, t: &[f64], noise: f64) -> f64 {
        match self {
            Link::Linear => t[0] + noise,
            Link::Product => t[0] * (t[1] + 1.0) + noise,
            Link::Quadratic => t[0] * t[0] + noise,
            Link::PureNoise => noise,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Linear => "m1",
            Link::Product => "m2",
            Link::Quadratic => "m3",
            Link::PureNoise => "noise",
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "linear" => Ok(Link::Linear),
            "m2" | "product" => Ok(Link::Product),
            "m3" | "quadratic" => Ok(Link::Quadratic),
            "noise" | "pure-noise" | "pure_noise" => Ok(Link::PureNoise),
            _ => Err(Error::UnknownLink(s.to_string())),
        }
    }
}

/// A semiparametric regression model with predictors uniform on the
/// sphere of radius `√d` (bounded, identity covariance, spherical).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    directions: DMatrix<f64>,
    link: Link,
    noise_sd: f64,
}

impl SyntheticModel {
    /// `directions` is `d × N` with orthonormal columns and `N < d`.
    pub fn new(directions: DMatrix<f64>, link: Link, noise_sd: f64) -> Result<Self> {
        let (d, n_dir) = directions.shape();
        if d < 2 {
            return Err(Error::InvalidModel(format!("dimension {d} < 2")));
        }
        if n_dir == 0 || n_dir >= d {
            return Err(Error::InvalidModel(format!(
                "need 1 <= N < d, got N = {n_dir}, d = {d}"
            )));
        }
        if n_dir < link.indices_used() {
            return Err(Error::InvalidModel(format!(
                "link {link} reads {} directions but only {n_dir} given",
                link.indices_used()
            )));
        }
        let gram = directions.transpose() * &directions;
        let defect = (gram - DMatrix::identity(n_dir, n_dir)).amax();
        if !(defect <= 1e-12) {
            return Err(Error::InvalidModel(format!(
                "directions are not orthonormal (defect {defect:e})"
            )));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidModel(format!("noise_sd = {noise_sd}")));
        }
        Ok(Self {
            directions,
            link,
            noise_sd,
        })
    }

    /// Catalogue model by link with fixed directions:
    /// `β₁ = (e₁ + e₂)/√2` and, for the product link, `β₂ = (e₁ − e₂)/√2`.
    pub fn preset(link: Link, d: usize, noise_sd: f64) -> Result<Self> {
        if d < 3 && link == Link::Product {
            return Err(Error::InvalidModel("the product link needs d >= 3".into()));
        }
        if d < 2 {
            return Err(Error::InvalidModel(format!("dimension {d} < 2")));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let n_dir = link.indices_used().max(1);
        let mut b = DMatrix::zeros(d, n_dir);
        b[(0, 0)] = s;
        b[(1, 0)] = s;
        if n_dir == 2 {
            b[(0, 1)] = s;
            b[(1, 1)] = -s;
        }
        Self::new(b, link, noise_sd)
    }

    pub fn d(&self) -> usize {
        self.directions.nrows()
    }

    pub fn n_directions(&self) -> usize {
        self.directions.ncols()
    }

    /// `d × N` matrix of the true `βₖ`.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Raw draws `(Y, X)`.
    pub(crate) fn draw(&self, seed: u64, n: usize) -> (Vec<f64>, DMatrix<f64>) {
        let x = sphere_rows(seed, n, self.d());
        let mut noise_rng = stream(seed, 1);
        let mut t = vec![0.0; self.n_directions()];
        let y = (0..n)
            .map(|i| {
                for (k, tk) in t.iter_mut().enumerate() {
                    *tk = x.row(i).dot(&self.directions.column(k).transpose());
                }
                let eps: f64 = StandardNormal.sample(&mut noise_rng);
                self.link.apply(&t, self.noise_sd * eps)
            })
            .collect();
        (y, x)
    }
}

/// `n` rows drawn uniformly from the sphere of radius `√d`.
pub fn sample_sphere_predictors(seed: u64, n: usize, d: usize) -> Result<DMatrix<f64>> {
    if d < 2 {
        return Err(Error::InvalidModel(format!("dimension {d} < 2")));
    }
    Ok(sphere_rows(seed, n, d))
}

fn sphere_rows(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
    let mut rng = stream(seed, 0);
    let radius = (d as f64).sqrt();
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let v = loop {
            let v = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let norm = v.norm();
            if norm > 0.0 {
                break v * (radius / norm);
            }
        };
        x.set_row(i, &v.transpose());
    }
    x
}

/// Draws a sample of size `n` from `model`.
pub fn generate(model: &SyntheticModel, seed: u64, n: usize) -> Result<Sample> {
    let (y, x) = model.draw(seed, n);
    Sample::new(y, x)
}

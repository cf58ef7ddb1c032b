use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Point, SmoothConvexFn};

/// Largest eigenvalue of `A^T A`.
pub fn lambda_max_gram(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// The zero function.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSmooth;

impl SmoothConvexFn for ZeroSmooth {
    fn eval(&self, _: &Point) -> f64 {
        0.0
    }

    fn grad(&self, x: &Point) -> Point {
        Point::zeros(x.len())
    }

    fn lipschitz_grad(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `<a, x> + b`.
#[derive(Debug, Clone)]
pub struct Affine {
    a: Point,
    b: f64,
}

impl Affine {
    pub fn new(a: Point, b: f64) -> Self {
        Self { a, b }
    }
}

impl SmoothConvexFn for Affine {
    fn eval(&self, x: &Point) -> f64 {
        self.a.dot(x) + self.b
    }

    fn grad(&self, _: &Point) -> Point {
        self.a.clone()
    }

    fn lipschitz_grad(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `(scale / 2) |x - center|^2`.
#[derive(Debug, Clone)]
pub struct HalfSquaredDistance {
    center: Point,
    scale: f64,
}

impl HalfSquaredDistance {
    pub fn new(center: Point, scale: f64) -> Self {
        assert!(scale >= 0.0, "scale must be nonnegative");
        Self { center, scale }
    }

    pub fn origin(dim: usize, scale: f64) -> Self {
        Self::new(Point::zeros(dim), scale)
    }
}

impl SmoothConvexFn for HalfSquaredDistance {
    fn eval(&self, x: &Point) -> f64 {
        0.5 * self.scale * (x - &self.center).norm_squared()
    }

    fn grad(&self, x: &Point) -> Point {
        (x - &self.center) * self.scale
    }

    fn lipschitz_grad(&self) -> Option<f64> {
        Some(self.scale)
    }

    fn strong_convexity(&self) -> f64 {
        self.scale
    }
}

/// `(1 / 2N) |A x - b|^2` for an `N x m` matrix `A`.
///
/// The Gram matrix is cached so gradients cost `O(m^2)`; values are computed
/// from the residual to avoid cancellation near the optimum.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
    atb: DVector<f64>,
    inv_n: f64,
    lipschitz: f64,
}

impl LeastSquares {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len(), "row count must match target length");
        let inv_n = 1.0 / a.nrows() as f64;
        let gram = a.transpose() * &a * inv_n;
        let atb = a.transpose() * &b * inv_n;
        let lipschitz = lambda_max_gram(&a) * inv_n;
        Self {
            a,
            b,
            gram,
            atb,
            inv_n,
            lipschitz,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothConvexFn for LeastSquares {
    fn eval(&self, x: &Point) -> f64 {
        0.5 * self.inv_n * (&self.a * x - &self.b).norm_squared()
    }

    fn grad(&self, x: &Point) -> Point {
        &self.gram * x - &self.atb
    }

    fn lipschitz_grad(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// Logistic loss `(1/N) sum_i log(1 + exp(a_i^T x)) - z_i a_i^T x` with labels in `{0, 1}`.
///
/// This is the negative mean log-likelihood, so it is convex and minimized.
#[derive(Debug, Clone)]
pub struct Logistic {
    a: DMatrix<f64>,
    z: DVector<f64>,
    inv_n: f64,
    lipschitz: f64,
}

impl Logistic {
    pub fn new(a: DMatrix<f64>, z: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), z.len(), "row count must match label count");
        let inv_n = 1.0 / a.nrows() as f64;
        let lipschitz = 0.25 * lambda_max_gram(&a) * inv_n;
        Self {
            a,
            z,
            inv_n,
            lipschitz,
        }
    }
}

/// Numerically stable logistic function `1 / (1 + e^(-t))`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl SmoothConvexFn for Logistic {
    fn eval(&self, x: &Point) -> f64 {
        let margins = &self.a * x;
        let total: f64 = margins
            .iter()
            .zip(self.z.iter())
            .map(|(&t, &z)| softplus(t) - z * t)
            .sum();
        total * self.inv_n
    }

    fn grad(&self, x: &Point) -> Point {
        let margins = &self.a * x;
        let resid = DVector::from_iterator(
            margins.len(),
            margins.iter().zip(self.z.iter()).map(|(&t, &z)| sigmoid(t) - z),
        );
        self.a.tr_mul(&resid) * self.inv_n
    }

    fn lipschitz_grad(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// `sum_i w_i s_i` with nonnegative weights.
#[derive(Debug, Clone)]
pub struct SmoothSum {
    parts: Vec<(f64, Arc<dyn SmoothConvexFn>)>,
}

impl SmoothSum {
    pub fn new(parts: Vec<(f64, Arc<dyn SmoothConvexFn>)>) -> Self {
        assert!(parts.iter().all(|(w, _)| *w >= 0.0), "weights must be nonnegative");
        Self { parts }
    }
}

impl SmoothConvexFn for SmoothSum {
    fn eval(&self, x: &Point) -> f64 {
        self.parts.iter().map(|(w, s)| w * s.eval(x)).sum()
    }

    fn grad(&self, x: &Point) -> Point {
        let mut g = Point::zeros(x.len());
        for (w, s) in &self.parts {
            g.axpy(*w, &s.grad(x), 1.0);
        }
        g
    }

    fn lipschitz_grad(&self) -> Option<f64> {
        self.parts
            .iter()
            .map(|(w, s)| s.lipschitz_grad().map(|l| w * l))
            .sum()
    }

    fn strong_convexity(&self) -> f64 {
        self.parts.iter().map(|(w, s)| w * s.strong_convexity()).sum()
    }
}

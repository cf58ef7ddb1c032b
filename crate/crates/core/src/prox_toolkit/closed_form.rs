//! Closed-form proximal operators and the functions they belong to.

use crate::error::{Error, Result};
use crate::problems::{ExtReal, Point, ProxFriendlyFn};

pub(crate) fn check_step(t: f64, name: &str) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {t}")))
    }
}

/// `sign(v) * max(|v| - threshold, 0)`.
#[inline]
pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

fn sign_or_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Prox of `t |.|_1`.
pub fn prox_l1(t: f64, x: &Point) -> Result<Point> {
    check_step(t, "t")?;
    Ok(x.map(|v| soft_threshold(v, t)))
}

/// Prox of `t mu |.|_2^2`.
pub fn prox_sq_l2(t: f64, x: &Point, mu: f64) -> Result<Point> {
    check_step(t, "t")?;
    Ok(x / (1.0 + 2.0 * t * mu))
}

/// Prox of `t (l1 |.|_1 + l2 |.|_2^2)`: soft-threshold, then shrink.
pub fn prox_elastic_net(t: f64, x: &Point, l1: f64, l2: f64) -> Result<Point> {
    check_step(t, "t")?;
    Ok(elastic_net_prox(t, x, l1, l2))
}

fn elastic_net_prox(t: f64, x: &Point, l1: f64, l2: f64) -> Point {
    let scale = 1.0 / (1.0 + 2.0 * t * l2);
    x.map(|v| soft_threshold(v, t * l1) * scale)
}

/// Projection onto `[lo, hi]^n`; independent of `t`.
pub fn prox_indicator_box(t: f64, x: &Point, lo: f64, hi: f64) -> Result<Point> {
    check_step(t, "t")?;
    Ok(x.map(|v| v.clamp(lo, hi)))
}

/// Projection onto the Euclidean ball of the given radius around the origin.
pub fn prox_indicator_ball(t: f64, x: &Point, radius: f64) -> Result<Point> {
    check_step(t, "t")?;
    Ok(ball_projection(x, radius))
}

fn ball_projection(x: &Point, radius: f64) -> Point {
    let norm = x.norm();
    if norm <= radius {
        x.clone()
    } else {
        x * (radius / norm)
    }
}

/// Prox of the zero function (identity).
pub fn prox_zero(t: f64, x: &Point) -> Result<Point> {
    check_step(t, "t")?;
    Ok(x.clone())
}

/// `g = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFn;

impl ProxFriendlyFn for ZeroFn {
    fn eval(&self, _: &Point) -> ExtReal {
        ExtReal::ZERO
    }

    fn prox(&self, _t: f64, x: &Point) -> Point {
        x.clone()
    }

    fn subgrad(&self, x: &Point) -> Point {
        Point::zeros(x.len())
    }

    fn elastic_net_weights(&self) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }
}

/// `l1 |x|_1 + l2 |x|_2^2`, covering the plain l1 norm and the squared l2 norm.
///
/// The sub-gradient selector takes `0` on zero coordinates of the l1 part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNet {
    l1: f64,
    l2: f64,
}

impl ElasticNet {
    pub fn new(l1: f64, l2: f64) -> Self {
        assert!(l1 >= 0.0 && l2 >= 0.0, "elastic-net weights must be nonnegative");
        Self { l1, l2 }
    }

    pub fn l1(weight: f64) -> Self {
        Self::new(weight, 0.0)
    }

    pub fn sq_l2(mu: f64) -> Self {
        Self::new(0.0, mu)
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.l1, self.l2)
    }
}

impl ProxFriendlyFn for ElasticNet {
    fn eval(&self, x: &Point) -> ExtReal {
        ExtReal::Finite(self.l1 * x.lp_norm(1) + self.l2 * x.norm_squared())
    }

    fn prox(&self, t: f64, x: &Point) -> Point {
        elastic_net_prox(t, x, self.l1, self.l2)
    }

    fn subgrad(&self, x: &Point) -> Point {
        x.map(|v| self.l1 * sign_or_zero(v) + 2.0 * self.l2 * v)
    }

    fn strong_convexity(&self) -> f64 {
        2.0 * self.l2
    }

    fn elastic_net_weights(&self) -> Option<(f64, f64)> {
        Some((self.l1, self.l2))
    }
}

/// Indicator of the box `[lo, hi]^n`; bounds may be infinite.
#[derive(Debug, Clone, Copy)]
pub struct IndicatorBox {
    lo: f64,
    hi: f64,
}

impl IndicatorBox {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty box");
        Self { lo, hi }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl ProxFriendlyFn for IndicatorBox {
    fn eval(&self, x: &Point) -> ExtReal {
        if x.iter().all(|&v| v >= self.lo && v <= self.hi) {
            ExtReal::ZERO
        } else {
            ExtReal::PosInfinity
        }
    }

    fn prox(&self, _t: f64, x: &Point) -> Point {
        x.map(|v| v.clamp(self.lo, self.hi))
    }

    fn subgrad(&self, x: &Point) -> Point {
        Point::zeros(x.len())
    }
}

/// Indicator of the closed Euclidean ball `{x : |x| <= radius}`.
#[derive(Debug, Clone, Copy)]
pub struct IndicatorBall {
    radius: f64,
}

impl IndicatorBall {
    pub fn new(radius: f64) -> Self {
        assert!(radius >= 0.0, "radius must be nonnegative");
        Self { radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ProxFriendlyFn for IndicatorBall {
    fn eval(&self, x: &Point) -> ExtReal {
        // A relative slack absorbs rounding in projected points.
        if x.norm() <= self.radius * (1.0 + 1e-12) {
            ExtReal::ZERO
        } else {
            ExtReal::PosInfinity
        }
    }

    fn prox(&self, _t: f64, x: &Point) -> Point {
        ball_projection(x, self.radius)
    }

    fn subgrad(&self, x: &Point) -> Point {
        Point::zeros(x.len())
    }
}

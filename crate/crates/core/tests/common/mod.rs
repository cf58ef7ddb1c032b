#![allow(dead_code)]

use bisg::problems::Point;

pub const GRID_POINTS: usize = 100_000;

/// Minimize `h(u) + (u - x)^2 / (2t)` over a grid on `[x - 3ts, x + 3ts]`
/// with `s = 1 + |x|`, widened to contain `extra`, then refine twice around
/// the best grid point.
pub fn brute_prox_1d(h: impl Fn(f64) -> f64, t: f64, x: f64, extra: &[f64]) -> f64 {
    let s = 1.0 + x.abs();
    let mut lo = x - 3.0 * t * s;
    let mut hi = x + 3.0 * t * s;
    for &e in extra {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    let obj = |u: f64| h(u) + (u - x).powi(2) / (2.0 * t);
    let mut best = x;
    let mut best_v = f64::INFINITY;
    for _ in 0..3 {
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        let mut pts: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
        pts.extend_from_slice(extra);
        for u in pts {
            if u < lo || u > hi {
                continue;
            }
            let v = obj(u);
            if v < best_v {
                best_v = v;
                best = u;
            }
        }
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
    best
}

pub fn p(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}

/// Plain summation of `n^(-r)` for `n` in `[n1, n2]`.
pub fn direct_power_sum(n1: u64, n2: u64, r: f64) -> f64 {
    (n1..=n2).map(|n| (n as f64).powf(-r)).sum()
}

/// OLS slope of `ys` on `xs`, computed independently of the library.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

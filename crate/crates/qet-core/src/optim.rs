//! Box-bounded Nelder–Mead with seeded random restarts.
//!
//! Points are clamped into the box before every evaluation, so the objective
//! is never queried outside the bounds. Minimizes; wrap the objective in a
//! negation to maximize.

use rand::Rng;
use rayon::prelude::*;

use crate::rng::stream_rng;

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the simplex's spread in function values falls below this.
    pub f_tol: f64,
    /// ... and its size in parameter space falls below this.
    pub x_tol: f64,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            f_tol: 1e-12,
            x_tol: 1e-10,
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimumPoint {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Single Nelder–Mead run from `x0`. With `max_evals == 0` returns `x0`
/// (clamped) unevaluated except for its objective value.
pub fn nelder_mead<F>(f: &F, x0: &[f64], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> OptimumPoint
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = x0.len();
    assert_eq!(n, bounds.len(), "nelder_mead: bounds length");
    let mut start = x0.to_vec();
    clamp(&mut start, bounds);
    let f0 = f(&start);
    if opts.max_evals == 0 || n == 0 {
        return OptimumPoint { x: start, f: f0, evals: 1 };
    }
    let eval = |x: &mut Vec<f64>| -> f64 {
        clamp(x, bounds);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.clone(), if f0.is_nan() { f64::INFINITY } else { f0 }));
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let mut p = start.clone();
        let step = opts.initial_step * (hi - lo);
        // Step away from the nearer wall so the vertex stays distinct.
        p[i] = if p[i] + step <= hi { p[i] + step } else { p[i] - step };
        let v = eval(&mut p);
        simplex.push((p, v));
    }
    let mut evals = n + 1;

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= opts.f_tol * (1.0 + best.abs()) && size <= opts.x_tol {
            break;
        }
        if size <= opts.x_tol * 1e-3 {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let mut xr = along(alpha);
        let fr = eval(&mut xr);
        evals += 1;
        if fr < simplex[0].1 {
            let mut xe = along(gamma);
            let fe = eval(&mut xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (mut xc, fc) = if fr < simplex[n].1 {
            let mut x = along(rho);
            let v = eval(&mut x);
            (x, v)
        } else {
            let mut x = along(-rho);
            let v = eval(&mut x);
            (x, v)
        };
        evals += 1;
        if fc < simplex[n].1.min(fr) {
            clamp(&mut xc, bounds);
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (p, v) in simplex.iter_mut().skip(1) {
            for (pi, bi) in p.iter_mut().zip(&x_best) {
                *pi = bi + sigma * (*pi - bi);
            }
            *v = eval(p);
            evals += 1;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fv) = simplex.swap_remove(0);
    OptimumPoint { x, f: fv, evals }
}

/// Multi-start Nelder–Mead. Restart 0 begins at `x0` when given; every other
/// restart draws a uniform start from stream `r` of `seed`. Restarts run in
/// parallel; the winner is the lowest value, ties broken by restart index,
/// so the result does not depend on scheduling.
pub fn nelder_mead_restarts<F>(
    f: &F,
    x0: Option<&[f64]>,
    bounds: &[(f64, f64)],
    restarts: usize,
    seed: u64,
    opts: &NelderMeadOptions,
) -> OptimumPoint
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let restarts = restarts.max(1);
    let runs: Vec<(usize, OptimumPoint)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start: Vec<f64> = match (r, x0) {
                (0, Some(x)) => x.to_vec(),
                _ => {
                    let mut rng = stream_rng(seed, r as u64);
                    bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
                }
            };
            (r, nelder_mead(f, &start, bounds, opts))
        })
        .collect();
    runs.into_iter()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .map(|(_, p)| p)
        .expect("at least one restart")
}

/// Golden-section minimization of a unimodal function on [a, b].
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let b = [(-2.0, 2.0), (-2.0, 2.0)];
        let opts = NelderMeadOptions {
            max_evals: 5000,
            ..Default::default()
        };
        let r = nelder_mead(&rosenbrock, &[-1.2, 1.0], &b, &opts);
        assert!(r.f < 1e-10, "{r:?}");
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] - 5.0).powi(2);
        let r = nelder_mead(&f, &[0.0], &[(-1.0, 1.0)], &NelderMeadOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_evals_returns_start() {
        let opts = NelderMeadOptions {
            max_evals: 0,
            ..Default::default()
        };
        let r = nelder_mead(&rosenbrock, &[0.3, 0.4], &[(-2.0, 2.0), (-2.0, 2.0)], &opts);
        assert_eq!(r.x, vec![0.3, 0.4]);
    }

    #[test]
    fn restarts_deterministic() {
        let b = [(-2.0, 2.0), (-2.0, 2.0)];
        let o = NelderMeadOptions::default();
        let a = nelder_mead_restarts(&rosenbrock, None, &b, 4, 11, &o);
        let c = nelder_mead_restarts(&rosenbrock, None, &b, 4, 11, &o);
        assert_eq!(a, c);
    }

    #[test]
    fn golden_section_parabola() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}

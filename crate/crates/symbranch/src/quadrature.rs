//! One-dimensional quadrature helpers shared by the analysis layers.
//!
//! The torus quadrature for lattice kernels lives in [`crate::kernels`]; this
//! module only carries generic adaptive Simpson integration and a few grid
//! utilities.

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_step(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Trapezoid rule over explicit nodes (strictly increasing).
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
    }
    acc
}

/// A grid that is linear with spacing `h0` up to `t_lin`, then geometric with
/// ratio `ratio` up to `t_max`. Starts at 0, ends exactly at `t_max`.
pub fn graded_grid(h0: f64, t_lin: f64, ratio: f64, t_max: f64) -> Vec<f64> {
    assert!(h0 > 0.0 && ratio > 1.0 && t_max > 0.0);
    let mut grid = vec![0.0];
    let mut t = 0.0;
    while t + h0 < t_lin.min(t_max) - 1e-12 {
        t += h0;
        grid.push(t);
    }
    while t < t_max {
        t = (t * ratio).max(t + h0);
        if t >= t_max {
            t = t_max;
        }
        grid.push(t);
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_exact() {
        let v = adaptive_simpson(&|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12);
        // ∫ = 4 - 4 + 2 = 2
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_exponential() {
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 5.0, 1e-12);
        assert!((v - (1.0 - (-5.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn simpson_mild_singularity_after_substitution() {
        // ∫_0^1 (1-r)^{-1/2} dr = 2 via r = 1 - z^2, dr = -2z dz
        let v = adaptive_simpson(&|_z: f64| 2.0, 0.0, 1.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn graded_grid_shape() {
        let g = graded_grid(0.1, 1.0, 1.2, 50.0);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 50.0);
        for w in g.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn trapezoid_linear_exact() {
        let t = [0.0, 0.5, 1.25, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - (1.5 * 4.0 + 2.0)).abs() < 1e-14);
    }
}

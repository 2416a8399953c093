//! Monotone cubic (Fritsch–Carlson) interpolation.
//!
//! Return-probability curves are positive and nonincreasing; the monotone
//! limiter keeps the interpolant that way, which plain cubic splines do not.

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2, "need at least two nodes");
        for w in xs.windows(2) {
            assert!(w[1] > w[0], "nodes must be strictly increasing");
        }
        let n = xs.len();
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        }
        let mut m = vec![0.0; n];
        if n == 2 {
            return MonotoneCubic {
                xs: xs.to_vec(),
                ys: ys.to_vec(),
                slopes: vec![d[0], d[0]],
            };
        }
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                // weighted harmonic mean keeps monotonicity
                let w1 = 2.0 * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
                let w2 = (xs[i + 1] - xs[i]) + 2.0 * (xs[i] - xs[i - 1]);
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        m[0] = endpoint_slope(xs[1] - xs[0], xs[2] - xs[1], d[0], d[1]);
        m[n - 1] = endpoint_slope(
            xs[n - 1] - xs[n - 2],
            xs[n - 2] - xs[n - 3],
            d[n - 2],
            d[n - 3],
        );
        MonotoneCubic {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes: m,
        }
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    /// Evaluate at `x`; clamps to the boundary values outside the range.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ys.last().unwrap();
        }
        let i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (h00, h10, h01, h11) = hermite_basis(t);
        self.ys[i] * h00
            + h * self.slopes[i] * h10
            + self.ys[i + 1] * h01
            + h * self.slopes[i + 1] * h11
    }

    /// Exact integral of the interpolant over `[a, b]` within the node range.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        assert!(a <= b);
        let lo = a.max(self.x_min());
        let hi = b.min(self.x_max());
        if lo >= hi {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut i = match self.xs.binary_search_by(|v| v.partial_cmp(&lo).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let mut left = lo;
        while left < hi {
            let right = self.xs[i + 1].min(hi);
            acc += self.segment_integral(i, left, right);
            left = right;
            i += 1;
            if i + 1 >= self.xs.len() {
                break;
            }
        }
        acc
    }

    fn segment_integral(&self, i: usize, a: f64, b: f64) -> f64 {
        // integrate the cubic Hermite segment with 3-point Gauss-Legendre (exact for cubics)
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let r = (0.6f64).sqrt();
        let _ = i;
        let w = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let x = [mid - half * r, mid, mid + half * r];
        half * (w[0] * self.eval(x[0]) + w[1] * self.eval(x[1]) + w[2] * self.eval(x[2]))
    }
}

/// Second-order one-sided endpoint slope with the usual shape-preserving
/// clamps: `h0` the adjacent spacing, `h1` the next one, `d0`, `d1` the
/// matching secant slopes.
fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

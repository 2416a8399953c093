//! Translation-invariant random-walk kernels on Z^d and their return
//! probabilities, Green functions, and power-law tails.
//!
//! A kernel stores the normalized jump distribution together with a total
//! jump rate ρ, so the generator acts as ρ(A - I). Return probabilities are
//! computed by Fourier inversion over the torus,
//!
//! ```text
//! p_t(0,0) = (2π)^{-d} ∫_{[-π,π]^d} exp(t·ρ·(â(θ) - 1)) dθ,
//! â(θ) = Σ_j a(0,j) e^{i θ·j},
//! ```
//!
//! with a midpoint tensor rule whose node count doubles until two successive
//! estimates agree. The midpoint offset keeps the θ = 0 singularity of the
//! Green-function integrands off the grid; the residual O(h^{d-s}) error from
//! the singular cell is removed by one Richardson step at the known exponent.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quadrature::adaptive_simpson;

/// Declarative description of a kernel, used for construction, cache keys,
/// and CLI/provenance round-trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Nearest-neighbour walk: a(i,j) = 1/(2d) for |i-j| = 1.
    DiscreteLaplacian { dim: usize },
    /// Heavy-tailed walk on Z with rates ∝ |j|^{-1-beta}, truncated at `radius`.
    RiemannWalk { beta: f64, radius: i64 },
    /// Arbitrary finite list of (offset, rate) pairs; rates are normalized.
    FiniteRange {
        dim: usize,
        rates: Vec<(Vec<i64>, f64)>,
    },
}

/// A validated kernel: normalized jump distribution plus total jump rate.
#[derive(Debug, Clone)]
pub struct Kernel {
    dim: usize,
    /// (offset, probability); probabilities sum to 1.
    jumps: Vec<(Vec<i64>, f64)>,
    /// total jump rate ρ (1 for a base walk, doubled by symmetrization)
    rate: f64,
    symmetric: bool,
    is_symmetrization: bool,
    spec: KernelSpec,
    /// Riemann walk: relative rate mass discarded by the truncation.
    truncated_mass: f64,
    structure_cache: Arc<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>>,
}

/// Power-law tail metadata p_t(0,0) ≈ coeff · t^{-exponent} for large t.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerTail {
    pub coeff: f64,
    pub exponent: f64,
    /// true when fitted by log-log regression rather than attached analytically
    pub fitted: bool,
    /// max |log p - log fit| over the fitting window, when fitted
    pub residual: Option<f64>,
}

/// Where a return curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveProvenance {
    BaseWalk,
    Symmetrization,
}

/// A sampled return-probability curve t ↦ p_t(0,0) with tail metadata.
#[derive(Debug, Clone)]
pub struct ReturnCurve {
    times: Vec<f64>,
    values: Vec<f64>,
    tail: Option<PowerTail>,
    provenance: CurveProvenance,
    interp: MonotoneCubic,
}

/// Green function values G∞ = ∫ p_t dt and H∞ = ∫ t p_t dt.
#[derive(Debug, Clone, Copy)]
pub struct GreenValues {
    /// G∞; `f64::INFINITY` when the walk is recurrent.
    pub green: f64,
    /// H∞ = ∫ t p_t dt; `f64::INFINITY` when divergent (tail exponent ≤ 2).
    pub weighted: f64,
    pub recurrent: bool,
    /// quadrature error estimates for the finite entries
    pub green_error: f64,
    pub weighted_error: f64,
}

/// Default absolute quadrature tolerance per dimension.
pub fn default_tolerance(dim: usize) -> f64 {
    if dim <= 2 {
        1e-10
    } else {
        1e-8
    }
}

fn max_level(dim: usize) -> usize {
    match dim {
        1 => 1 << 21,
        2 => 1 << 12,
        _ => 1 << 9,
    }
}

impl Kernel {
    /// Build a kernel from its description, normalizing the rates.
    pub fn from_spec(spec: &KernelSpec) -> Result<Kernel> {
        match spec {
            KernelSpec::DiscreteLaplacian { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidInput("dimension must be positive".into()));
                }
                let mut rates = Vec::with_capacity(2 * dim);
                for axis in 0..*dim {
                    for sign in [-1i64, 1] {
                        let mut off = vec![0i64; *dim];
                        off[axis] = sign;
                        rates.push((off, 1.0));
                    }
                }
                Self::build(*dim, rates, spec.clone(), 0.0)
            }
            KernelSpec::RiemannWalk { beta, radius } => {
                if !(*beta > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "riemann walk needs beta > 0, got {beta}"
                    )));
                }
                if *radius < 1 {
                    return Err(Error::InvalidInput(format!(
                        "riemann walk needs radius >= 1, got {radius}"
                    )));
                }
                let mut rates = Vec::with_capacity(2 * *radius as usize);
                for j in 1..=*radius {
                    let w = (j as f64).powf(-1.0 - beta);
                    rates.push((vec![j], w));
                    rates.push((vec![-j], w));
                }
                // relative mass beyond the truncation radius: Σ_{j>R} j^{-1-β}
                // bounded by ∫_R^∞ x^{-1-β} dx = R^{-β}/β
                let kept: f64 = rates.iter().map(|(_, w)| w).sum();
                let discarded = 2.0 * (*radius as f64).powf(-*beta) / beta;
                let trunc = discarded / (kept + discarded);
                Self::build(1, rates, spec.clone(), trunc)
            }
            KernelSpec::FiniteRange { dim, rates } => {
                if *dim == 0 {
                    return Err(Error::InvalidInput("dimension must be positive".into()));
                }
                for (off, _) in rates {
                    if off.len() != *dim {
                        return Err(Error::InvalidInput(format!(
                            "offset {off:?} does not match dimension {dim}"
                        )));
                    }
                }
                Self::build(*dim, rates.clone(), spec.clone(), 0.0)
            }
        }
    }

    /// Nearest-neighbour simple random walk kernel.
    pub fn discrete_laplacian(dim: usize) -> Kernel {
        Self::from_spec(&KernelSpec::DiscreteLaplacian { dim }).expect("valid dimension")
    }

    /// Heavy-tailed Riemann walk on Z.
    pub fn riemann_walk(beta: f64, radius: i64) -> Result<Kernel> {
        Self::from_spec(&KernelSpec::RiemannWalk { beta, radius })
    }

    /// Kernel from explicit (offset, rate) pairs.
    pub fn finite_range(dim: usize, rates: Vec<(Vec<i64>, f64)>) -> Result<Kernel> {
        Self::from_spec(&KernelSpec::FiniteRange { dim, rates })
    }

    fn build(
        dim: usize,
        rates: Vec<(Vec<i64>, f64)>,
        spec: KernelSpec,
        truncated_mass: f64,
    ) -> Result<Kernel> {
        for (off, r) in &rates {
            if *r < 0.0 {
                return Err(Error::NegativeRate {
                    offset: off.clone(),
                    rate: *r,
                });
            }
            if !r.is_finite() {
                return Err(Error::NonNormalizable(format!(
                    "rate {r} at {off:?} is not finite"
                )));
            }
        }
        // merge duplicate offsets
        let mut merged: HashMap<Vec<i64>, f64> = HashMap::new();
        for (off, r) in rates {
            if r > 0.0 {
                *merged.entry(off).or_insert(0.0) += r;
            }
        }
        if merged.is_empty() {
            return Err(Error::EmptySupport);
        }
        let total: f64 = merged.values().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::NonNormalizable(format!("rate sum {total}")));
        }
        let mut jumps: Vec<(Vec<i64>, f64)> =
            merged.into_iter().map(|(o, r)| (o, r / total)).collect();
        jumps.sort_by(|a, b| a.0.cmp(&b.0));
        let symmetric = jumps.iter().all(|(off, p)| {
            let neg: Vec<i64> = off.iter().map(|x| -x).collect();
            jumps
                .iter()
                .find(|(o, _)| *o == neg)
                .map(|(_, q)| (p - q).abs() <= 1e-12 * p.max(*q))
                .unwrap_or(false)
        });
        Ok(Kernel {
            dim,
            jumps,
            rate: 1.0,
            symmetric,
            is_symmetrization: false,
            spec,
            truncated_mass,
            structure_cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// The difference walk X¹ - X² of two independent copies: rates
    /// ā(0,j) = a(0,j) + a(0,-j), total jump rate 2ρ (not re-normalized).
    pub fn symmetrize(&self) -> Kernel {
        let mut merged: HashMap<Vec<i64>, f64> = HashMap::new();
        for (off, p) in &self.jumps {
            let eff = self.rate * p;
            *merged.entry(off.clone()).or_insert(0.0) += eff;
            let neg: Vec<i64> = off.iter().map(|x| -x).collect();
            *merged.entry(neg).or_insert(0.0) += eff;
        }
        let new_rate = 2.0 * self.rate;
        let mut jumps: Vec<(Vec<i64>, f64)> = merged
            .into_iter()
            .map(|(o, r)| (o, r / new_rate))
            .collect();
        jumps.sort_by(|a, b| a.0.cmp(&b.0));
        Kernel {
            dim: self.dim,
            jumps,
            rate: new_rate,
            symmetric: true,
            is_symmetrization: true,
            spec: self.spec.clone(),
            truncated_mass: self.truncated_mass,
            structure_cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total jump rate ρ.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_symmetrization(&self) -> bool {
        self.is_symmetrization
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Effective transition rates a(0,j) = ρ · P(jump = j).
    pub fn effective_rates(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.jumps.iter().map(|(o, p)| (o.as_slice(), self.rate * p))
    }

    /// Normalized jump distribution.
    pub fn jump_distribution(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.jumps.iter().map(|(o, p)| (o.as_slice(), *p))
    }

    /// Mean jump vector (drift) of the normalized distribution.
    pub fn drift(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim];
        for (off, p) in &self.jumps {
            for (a, x) in b.iter_mut().zip(off.iter()) {
                *a += p * *x as f64;
            }
        }
        b
    }

    fn has_drift(&self) -> bool {
        self.drift().iter().any(|x| x.abs() > 1e-12)
    }

    /// Small-θ singularity order s of 1 - Re â(θ) ~ |θ|^s.
    fn singular_order(&self) -> f64 {
        match &self.spec {
            KernelSpec::RiemannWalk { beta, .. } if *beta < 2.0 => *beta,
            _ => 2.0,
        }
    }

    /// Tail exponent α in p_t(0,0) ~ c t^{-α}, when known analytically.
    pub fn analytic_tail_exponent(&self) -> Option<f64> {
        if self.has_drift() {
            return None;
        }
        match &self.spec {
            KernelSpec::DiscreteLaplacian { dim } => Some(*dim as f64 / 2.0),
            KernelSpec::RiemannWalk { beta, .. } => {
                if *beta < 2.0 {
                    Some(1.0 / beta)
                } else {
                    Some(0.5)
                }
            }
            KernelSpec::FiniteRange { .. } => None,
        }
    }

    /// Tail coefficient c, known in closed form for the discrete Laplacian
    /// from the local CLT: p_t(0,0) ~ (d/(2πρt))^{d/2}.
    pub fn analytic_tail_coeff(&self) -> Option<f64> {
        match &self.spec {
            KernelSpec::DiscreteLaplacian { dim } => {
                let d = *dim as f64;
                Some((d / (2.0 * std::f64::consts::PI * self.rate)).powf(d / 2.0))
            }
            _ => None,
        }
    }

    // ------------------------------------------------------------------
    // Fourier structure function and torus quadrature
    // ------------------------------------------------------------------

    /// â(θ) = Σ_j P(jump = j) e^{iθ·j}, returned as (re, im).
    pub fn structure_function(&self, theta: &[f64]) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (off, p) in &self.jumps {
            let dot: f64 = off
                .iter()
                .zip(theta.iter())
                .map(|(j, t)| *j as f64 * t)
                .sum();
            re += p * dot.cos();
            im += p * dot.sin();
        }
        (re, im)
    }

    /// Midpoint-rule mean of `map(Re â, Im â)` over the torus at level `n`.
    fn scan<F: Fn(f64, f64) -> f64 + Sync>(&self, n: usize, map: &F) -> f64 {
        match self.dim {
            1 => self.scan_d1(n, map),
            2 => self.scan_d2(n, map),
            3 => self.scan_d3(n, map),
            _ => self.scan_generic(n, map),
        }
    }

    fn nodes(n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| -std::f64::consts::PI + (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64)
            .collect()
    }

    fn scan_d1<F: Fn(f64, f64) -> f64 + Sync>(&self, n: usize, map: &F) -> f64 {
        let grid = self.structure_grid_d1(n);
        let sum: f64 = grid
            .par_chunks(8192)
            .map(|chunk| chunk.iter().map(|&(re, im)| map(re, im)).sum::<f64>())
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        sum / n as f64
    }

    /// â at all level-n midpoint nodes for d = 1; FFT-folded for large
    /// supports (Riemann walk), direct otherwise. Cached per level.
    fn structure_grid_d1(&self, n: usize) -> Arc<Vec<(f64, f64)>> {
        if let Some(hit) = self.structure_cache.lock().unwrap().get(&n) {
            return hit.clone();
        }
        let vals = if self.jumps.len() > 64 {
            self.structure_grid_fft(n)
        } else {
            let nodes = Self::nodes(n);
            nodes
                .iter()
                .map(|&t| self.structure_function(&[t]))
                .collect()
        };
        let arc = Arc::new(vals);
        let mut cache = self.structure_cache.lock().unwrap();
        cache.insert(n, arc.clone());
        // keep the cache bounded: drop everything except the two largest levels
        if cache.len() > 3 {
            let mut levels: Vec<usize> = cache.keys().copied().collect();
            levels.sort_unstable();
            for lvl in &levels[..levels.len() - 2] {
                cache.remove(lvl);
            }
        }
        arc
    }

    /// θ_k = δ + 2πk/n with δ = π/n - π, so â(θ_k) is an (unnormalized)
    /// inverse DFT of the rate sequence folded mod n.
    fn structure_grid_fft(&self, n: usize) -> Vec<(f64, f64)> {
        use rustfft::num_complex::Complex64;
        let delta = std::f64::consts::PI / n as f64 - std::f64::consts::PI;
        let mut bins = vec![Complex64::new(0.0, 0.0); n];
        for (off, p) in &self.jumps {
            let j = off[0];
            let m = j.rem_euclid(n as i64) as usize;
            let phase = j as f64 * delta;
            bins[m] += Complex64::new(p * phase.cos(), p * phase.sin());
        }
        let fft = rustfft::FftPlanner::new().plan_fft_inverse(n);
        fft.process(&mut bins);
        bins.into_iter().map(|c| (c.re, c.im)).collect()
    }

    fn axis_terms(&self) -> Option<Vec<Vec<(i64, f64)>>> {
        // Some kernels decompose as â(θ) = Σ_axis â_a(θ_a): every jump moves
        // along a single axis. Nearest-neighbour walks always do.
        let mut per_axis: Vec<Vec<(i64, f64)>> = vec![Vec::new(); self.dim];
        for (off, p) in &self.jumps {
            let nz: Vec<usize> = (0..self.dim).filter(|&a| off[a] != 0).collect();
            match nz.len() {
                0 => per_axis[0].push((0, *p)),
                1 => per_axis[nz[0]].push((off[nz[0]], *p)),
                _ => return None,
            }
        }
        Some(per_axis)
    }

    fn scan_d2<F: Fn(f64, f64) -> f64 + Sync>(&self, n: usize, map: &F) -> f64 {
        let nodes = Self::nodes(n);
        if let Some(axes) = self.axis_terms() {
            let (ax, ay) = (&axes[0], &axes[1]);
            let tx: Vec<(f64, f64)> = nodes.iter().map(|&t| eval_axis(ax, t)).collect();
            let ty: Vec<(f64, f64)> = nodes.iter().map(|&t| eval_axis(ay, t)).collect();
            let sum: f64 = tx
                .par_iter()
                .map(|&(rex, imx)| {
                    ty.iter()
                        .map(|&(rey, imy)| map(rex + rey, imx + imy))
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            return sum / (n * n) as f64;
        }
        let sum: f64 = nodes
            .par_iter()
            .map(|&t0| {
                let mut s = 0.0;
                for &t1 in &nodes {
                    let (re, im) = self.structure_function(&[t0, t1]);
                    s += map(re, im);
                }
                s
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        sum / (n * n) as f64
    }

    fn scan_d3<F: Fn(f64, f64) -> f64 + Sync>(&self, n: usize, map: &F) -> f64 {
        let nodes = Self::nodes(n);
        if let Some(axes) = self.axis_terms() {
            let t: Vec<Vec<(f64, f64)>> = axes
                .iter()
                .map(|ax| nodes.iter().map(|&v| eval_axis(ax, v)).collect())
                .collect();
            let (t0, t1, t2) = (&t[0], &t[1], &t[2]);
            let sum: f64 = t0
                .par_iter()
                .map(|&(re0, im0)| {
                    let mut s = 0.0;
                    for &(re1, im1) in t1.iter() {
                        let (ra, ia) = (re0 + re1, im0 + im1);
                        for &(re2, im2) in t2.iter() {
                            s += map(ra + re2, ia + im2);
                        }
                    }
                    s
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            return sum / (n * n * n) as f64;
        }
        let sum: f64 = nodes
            .par_iter()
            .map(|&t0| {
                let mut s = 0.0;
                for &t1 in &nodes {
                    for &t2 in &nodes {
                        let (re, im) = self.structure_function(&[t0, t1, t2]);
                        s += map(re, im);
                    }
                }
                s
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        sum / (n * n * n) as f64
    }

    fn scan_generic<F: Fn(f64, f64) -> f64 + Sync>(&self, n: usize, map: &F) -> f64 {
        let nodes = Self::nodes(n);
        let mut idx = vec![0usize; self.dim];
        let mut theta = vec![0.0; self.dim];
        let mut sum = 0.0;
        let total = n.pow(self.dim as u32);
        for _ in 0..total {
            for (a, &i) in idx.iter().enumerate() {
                theta[a] = nodes[i];
            }
            let (re, im) = self.structure_function(&theta);
            sum += map(re, im);
            for a in (0..self.dim).rev() {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
        sum / total as f64
    }

    /// Doubling scan until two successive levels differ by less than `tol`.
    fn converge_scan<F: Fn(f64, f64) -> f64 + Sync>(
        &self,
        start_n: usize,
        tol: f64,
        map: &F,
    ) -> Result<(f64, f64)> {
        let mut n = start_n.max(16).next_power_of_two();
        let mut prev = self.scan(n, map);
        let cap = max_level(self.dim);
        while n < cap {
            n *= 2;
            let cur = self.scan(n, map);
            let err = (cur - prev).abs();
            if err < tol {
                return Ok((cur, err));
            }
            prev = cur;
        }
        Err(Error::QuadratureNotConverged {
            achieved: f64::NAN,
            required: tol,
        })
    }

    /// p_t(0,0) by Fourier inversion, to absolute tolerance `tol`.
    pub fn return_probability(&self, t: f64, tol: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        let rho = self.rate;
        // integrand width shrinks like 1/sqrt(ρt); seed the level accordingly
        let start = ((rho * t).sqrt() * 4.0).max(16.0).min(max_level(self.dim) as f64) as usize;
        let (v, err) = self.converge_scan(start, tol, &|re: f64, im: f64| {
            (t * rho * (re - 1.0)).exp() * (t * rho * im).cos()
        })?;
        let _ = err;
        Ok(v.max(0.0).min(1.0))
    }

    /// p_t(0, target) by Fourier inversion with a phase factor.
    pub fn transition_probability(&self, t: f64, target: &[i64], tol: f64) -> Result<f64> {
        if target.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "target {target:?} does not match dimension {}",
                self.dim
            )));
        }
        if t < 0.0 {
            return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
        }
        let rho = self.rate;
        let mut n = (((rho * t).sqrt() * 4.0).max(16.0) as usize).next_power_of_two();
        let cap = max_level(self.dim);
        let eval = |n: usize| -> f64 {
            let nodes = Self::nodes(n);
            let mut idx = vec![0usize; self.dim];
            let mut theta = vec![0.0; self.dim];
            let mut sum = 0.0;
            let total = n.pow(self.dim as u32);
            for _ in 0..total {
                for (a, &i) in idx.iter().enumerate() {
                    theta[a] = nodes[i];
                }
                let (re, im) = self.structure_function(&theta);
                let phase: f64 = theta
                    .iter()
                    .zip(target.iter())
                    .map(|(th, j)| th * *j as f64)
                    .sum();
                sum += (t * rho * (re - 1.0)).exp() * (t * rho * im - phase).cos();
                for a in (0..self.dim).rev() {
                    idx[a] += 1;
                    if idx[a] < n {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            sum / total as f64
        };
        let mut prev = eval(n);
        while n < cap {
            n *= 2;
            let cur = eval(n);
            if (cur - prev).abs() < tol {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::QuadratureNotConverged {
            achieved: f64::NAN,
            required: tol,
        })
    }

    /// Sample the return curve on `grid` and attach tail metadata.
    pub fn return_curve(&self, grid: &[f64], tol: f64) -> Result<ReturnCurve> {
        if grid.is_empty() || grid[0] != 0.0 {
            return Err(Error::InvalidInput("grid must start at t = 0".into()));
        }
        for w in grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput("grid must be strictly increasing".into()));
            }
        }
        let values: Vec<Result<f64>> = grid
            .par_iter()
            .map(|&t| self.return_probability(t, tol))
            .collect();
        let mut vals = Vec::with_capacity(grid.len());
        for v in values {
            vals.push(v?);
        }
        let provenance = if self.is_symmetrization {
            CurveProvenance::Symmetrization
        } else {
            CurveProvenance::BaseWalk
        };
        let mut curve = ReturnCurve::new(grid.to_vec(), vals, None, provenance);
        curve.tail = self.attach_tail(&curve);
        Ok(curve)
    }

    fn attach_tail(&self, curve: &ReturnCurve) -> Option<PowerTail> {
        let alpha = self.analytic_tail_exponent();
        let coeff = self.analytic_tail_coeff();
        match (alpha, coeff) {
            (Some(a), Some(c)) => Some(PowerTail {
                coeff: c,
                exponent: a,
                fitted: false,
                residual: None,
            }),
            (Some(a), None) => {
                // analytic exponent, fitted coefficient
                let c = curve.fit_tail_coeff(a)?;
                Some(PowerTail {
                    coeff: c,
                    exponent: a,
                    fitted: true,
                    residual: None,
                })
            }
            _ => curve.fit_tail(),
        }
    }

    /// G∞ and H∞ by quadrature of the resolvent integrands, with a Richardson
    /// step at the known singular-cell exponent and divergence classification.
    pub fn green_values(&self, tol: f64) -> Result<GreenValues> {
        let rho = self.rate;
        if self.has_drift() {
            // The real part of the resolvent is bounded but rough near θ = 0;
            // integrate in the time domain instead, where p_t decays
            // exponentially for drifted walks.
            let intr = |t: f64| self.return_probability(t, tol.min(1e-9)).unwrap_or(0.0);
            let mut horizon = 8.0;
            while intr(horizon) > 1e-13 && horizon < 1e5 {
                horizon *= 2.0;
            }
            let g = adaptive_simpson(&intr, 0.0, horizon, tol * 0.1);
            let h = adaptive_simpson(&|t| t * intr(t), 0.0, horizon, tol * 0.1);
            return Ok(GreenValues {
                green: g,
                weighted: h,
                recurrent: false,
                green_error: tol,
                weighted_error: tol,
            });
        }
        let s = self.singular_order();
        let d = self.dim as f64;
        let p_green = d - s;
        let p_weighted = d - 2.0 * s;
        let green = self.singular_integral(p_green, tol, &|re: f64, im: f64| {
            let dre = rho * (1.0 - re);
            let dim_ = rho * im;
            dre / (dre * dre + dim_ * dim_)
        })?;
        let weighted = self.singular_integral(p_weighted, tol, &|re: f64, im: f64| {
            let dre = rho * (1.0 - re);
            let dim_ = rho * im;
            let den = dre * dre + dim_ * dim_;
            (dre * dre - dim_ * dim_) / (den * den)
        })?;
        Ok(GreenValues {
            green: green.0,
            weighted: weighted.0,
            recurrent: !green.0.is_finite(),
            green_error: green.1,
            weighted_error: weighted.1,
        })
    }

    /// Shared machinery for integrals with an integrable |θ|^{-s} singularity
    /// at the origin: raw midpoint sums carry an O(n^{-p}) error with
    /// p = d - s, removed by extrapolating two successive levels. `p <= 0`
    /// means the integral diverges.
    fn singular_integral<F: Fn(f64, f64) -> f64 + Sync>(
        &self,
        p: f64,
        tol: f64,
        map: &F,
    ) -> Result<(f64, f64)> {
        if p <= 1e-9 {
            return Ok((f64::INFINITY, 0.0));
        }
        let cap = match &self.spec {
            // beyond n ~ radius the grid resolves the truncated region where
            // the kernel turns diffusive; stay in the power-law window
            KernelSpec::RiemannWalk { radius, .. } => {
                (*radius as usize / 2).next_power_of_two().max(64).min(max_level(1))
            }
            _ => max_level(self.dim),
        };
        let weight = 2f64.powf(p);
        let mut n = 16usize;
        let mut raw_prev = self.scan(n, map);
        let mut extrap_prev: Option<f64> = None;
        let mut best = (f64::NAN, f64::INFINITY);
        while n < cap {
            n *= 2;
            let raw = self.scan(n, map);
            // divergence backstop: successive refinements keep growing
            if raw > raw_prev && (raw - raw_prev) > 0.9 * raw_prev.abs().max(1e-12) {
                return Ok((f64::INFINITY, 0.0));
            }
            let extrap = (weight * raw - raw_prev) / (weight - 1.0);
            if let Some(prev) = extrap_prev {
                let err = (extrap - prev).abs();
                if err < best.1 {
                    best = (extrap, err);
                }
                if err < tol {
                    return Ok((extrap, err));
                }
            }
            extrap_prev = Some(extrap);
            raw_prev = raw;
        }
        if best.1.is_finite() && best.1 < tol * 50.0 {
            // close enough to be useful; report the achieved error
            return Ok(best);
        }
        Err(Error::QuadratureNotConverged {
            achieved: best.1,
            required: tol,
        })
    }

    /// f̂(λ) = (2π)^{-d} ∫ dθ / (λ + ρ(1 - â(θ))) by direct quadrature.
    /// Reliable when λ is large enough that the resolvent peak is resolved;
    /// the local-time layer switches to a time-domain route below that.
    pub fn laplace_resolvent(&self, lambda: f64, tol: f64) -> Result<f64> {
        if lambda < 0.0 {
            return Err(Error::InvalidInput("lambda must be >= 0".into()));
        }
        let rho = self.rate;
        let map = move |re: f64, im: f64| {
            let dre = lambda + rho * (1.0 - re);
            let dim_ = rho * im;
            dre / (dre * dre + dim_ * dim_)
        };
        // seed the level so the Lorentzian-like peak of width ~ sqrt(λ/ρ)
        // (or λ^{1/β} for heavy tails) is sampled
        let s = self.singular_order();
        let width = (lambda / rho).powf(1.0 / s).max(1e-8);
        let start = (8.0 * std::f64::consts::PI / width)
            .min(max_level(self.dim) as f64 / 2.0)
            .max(16.0) as usize;
        let (v, _err) = self.converge_scan(start, tol, &map)?;
        Ok(v)
    }

    /// Smallest λ for which the direct resolvent quadrature is trusted.
    pub fn resolvent_lambda_floor(&self) -> f64 {
        let s = self.singular_order();
        let n_ok = (max_level(self.dim) / 4) as f64;
        // invert width(λ) = 8π/n_ok
        self.rate * (8.0 * std::f64::consts::PI / n_ok).powf(s)
    }
}

fn eval_axis(terms: &[(i64, f64)], theta: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for &(j, p) in terms {
        let x = j as f64 * theta;
        re += p * x.cos();
        im += p * x.sin();
    }
    (re, im)
}

impl ReturnCurve {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        tail: Option<PowerTail>,
        provenance: CurveProvenance,
    ) -> ReturnCurve {
        assert!(!times.is_empty() && times[0] == 0.0, "curve must start at t = 0");
        let interp = MonotoneCubic::new(&times, &values);
        ReturnCurve {
            times,
            values,
            tail,
            provenance,
            interp,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Option<PowerTail> {
        self.tail
    }

    pub fn set_tail(&mut self, tail: Option<PowerTail>) {
        self.tail = tail;
    }

    pub fn provenance(&self) -> CurveProvenance {
        self.provenance
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Interpolated value; beyond the grid the tail continues the last point
    /// as v(T)·(t/T)^{-α} so the extension is continuous.
    pub fn value(&self, t: f64) -> f64 {
        let t_max = self.horizon();
        if t <= t_max {
            self.interp.eval(t)
        } else {
            let last = *self.values.last().unwrap();
            match self.tail {
                Some(tail) => last * (t / t_max).powf(-tail.exponent),
                None => last,
            }
        }
    }

    /// ∫_a^b p_t dt using the interpolant and, beyond the grid, the tail law.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        assert!(a <= b);
        let t_max = self.horizon();
        let mut acc = self.interp.integrate(a, b.min(t_max));
        if b > t_max {
            let lo = a.max(t_max);
            let last = *self.values.last().unwrap();
            match self.tail {
                Some(tail) if (tail.exponent - 1.0).abs() > 1e-9 => {
                    let e = 1.0 - tail.exponent;
                    acc += last * t_max.powf(tail.exponent) * (b.powf(e) - lo.powf(e)) / e;
                }
                Some(_) => {
                    acc += last * t_max * (b / lo).ln();
                }
                None => {
                    acc += last * (b - lo);
                }
            }
        }
        acc
    }

    /// Least-squares power-law fit over the last decade of the grid.
    pub fn fit_tail(&self) -> Option<PowerTail> {
        let t_max = self.horizon();
        if t_max < 20.0 {
            return None;
        }
        let window: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(self.values.iter())
            .filter(|(t, v)| **t >= t_max / 10.0 && **v > 0.0)
            .map(|(t, v)| (t.ln(), v.ln()))
            .collect();
        if window.len() < 6 {
            return None;
        }
        let n = window.len() as f64;
        let sx: f64 = window.iter().map(|(x, _)| x).sum();
        let sy: f64 = window.iter().map(|(_, y)| y).sum();
        let sxx: f64 = window.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = window.iter().map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let residual = window
            .iter()
            .map(|(x, y)| (y - slope * x - intercept).abs())
            .fold(0.0f64, f64::max);
        Some(PowerTail {
            coeff: intercept.exp(),
            exponent: -slope,
            fitted: true,
            residual: Some(residual),
        })
    }

    /// Fit only the coefficient with the exponent pinned.
    fn fit_tail_coeff(&self, alpha: f64) -> Option<f64> {
        let t_max = self.horizon();
        if t_max < 20.0 {
            return None;
        }
        let window: Vec<f64> = self
            .times
            .iter()
            .zip(self.values.iter())
            .filter(|(t, v)| **t >= t_max / 10.0 && **v > 0.0)
            .map(|(t, v)| v * t.powf(alpha))
            .collect();
        if window.len() < 3 {
            return None;
        }
        Some(window.iter().sum::<f64>() / window.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_i0_scaled;

    const WATSON: f64 = 1.516386059151978;

    #[test]
    fn laplacian_d1_rates() {
        let k = Kernel::discrete_laplacian(1);
        let rates: Vec<(Vec<i64>, f64)> = k
            .effective_rates()
            .map(|(o, r)| (o.to_vec(), r))
            .collect();
        assert_eq!(rates.len(), 2);
        for (off, r) in rates {
            assert!(off == vec![1] || off == vec![-1]);
            assert!((r - 0.5).abs() < 1e-15);
        }
        assert!(k.is_symmetric());
        assert_eq!(k.rate(), 1.0);
    }

    #[test]
    fn riemann_normalization_by_hand() {
        // rates ∝ {1, 2^{-1.5}, 3^{-1.5}} at ±1, ±2, ±3
        let k = Kernel::riemann_walk(0.5, 3).unwrap();
        let w1: f64 = 1.0;
        let w2 = 2f64.powf(-1.5);
        let w3 = 3f64.powf(-1.5);
        let total = 2.0 * (w1 + w2 + w3);
        for (off, r) in k.effective_rates() {
            let expect = match off[0].abs() {
                1 => w1,
                2 => w2,
                3 => w3,
                _ => panic!("unexpected offset"),
            } / total;
            assert!((r - expect).abs() < 1e-14);
        }
        let sum: f64 = k.jump_distribution().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rate_rejected() {
        let err = Kernel::finite_range(1, vec![(vec![1], -0.1)]).unwrap_err();
        assert!(matches!(err, Error::NegativeRate { .. }));
    }

    #[test]
    fn empty_support_rejected() {
        let err = Kernel::finite_range(1, vec![(vec![1], 0.0)]).unwrap_err();
        assert!(matches!(err, Error::EmptySupport));
        let err = Kernel::finite_range(2, vec![]).unwrap_err();
        assert!(matches!(err, Error::EmptySupport));
    }

    #[test]
    fn non_finite_rate_rejected() {
        let err = Kernel::finite_range(1, vec![(vec![1], f64::INFINITY)]).unwrap_err();
        assert!(matches!(err, Error::NonNormalizable(_)));
    }

    #[test]
    fn symmetrize_doubles_symmetric_kernel() {
        let k = Kernel::discrete_laplacian(1).symmetrize();
        assert_eq!(k.rate(), 2.0);
        for (_, r) in k.effective_rates() {
            assert!((r - 1.0).abs() < 1e-15);
        }
        assert!(k.is_symmetric());
        assert!(k.is_symmetrization());
    }

    #[test]
    fn symmetrize_one_sided_kernel() {
        let k = Kernel::finite_range(1, vec![(vec![1], 1.0)]).unwrap();
        assert!(!k.is_symmetric());
        let s = k.symmetrize();
        let rates: Vec<(Vec<i64>, f64)> = s
            .effective_rates()
            .map(|(o, r)| (o.to_vec(), r))
            .collect();
        assert_eq!(rates.len(), 2);
        for (_, r) in rates {
            assert!((r - 1.0).abs() < 1e-15);
        }
        assert_eq!(s.rate(), 2.0);
    }

    #[test]
    fn return_probability_srw_bessel_oracle() {
        // d=1 SRW rate 1: p_t(0,0) = e^{-t} I0(t)
        let k = Kernel::discrete_laplacian(1);
        assert_eq!(k.return_probability(0.0, 1e-10).unwrap(), 1.0);
        for &t in &[0.5, 1.0, 2.0, 5.0, 20.0] {
            let p = k.return_probability(t, 1e-11).unwrap();
            let oracle = bessel_i0_scaled(t);
            assert!((p - oracle).abs() < 1e-10, "t={t}: {p} vs {oracle}");
        }
    }

    #[test]
    fn symmetrization_is_time_doubling() {
        let k = Kernel::discrete_laplacian(1);
        let s = k.symmetrize();
        for &t in &[0.25, 0.5, 1.0, 3.0] {
            let a = s.return_probability(t, 1e-11).unwrap();
            let b = k.return_probability(2.0 * t, 1e-11).unwrap();
            assert!((a - b).abs() < 2e-10, "t={t}");
        }
    }

    #[test]
    fn double_symmetrization_matches_rate_rescaling() {
        // symmetrizing a symmetrization doubles the rate again: p̄̄_t = p̄_{2t}
        let s = Kernel::discrete_laplacian(1).symmetrize();
        let ss = s.symmetrize();
        for &t in &[0.5, 1.0] {
            let a = ss.return_probability(t, 1e-11).unwrap();
            let b = s.return_probability(2.0 * t, 1e-11).unwrap();
            assert!((a - b).abs() < 2e-10);
        }
    }

    #[test]
    fn return_probability_d2_product_oracle() {
        // d-dim SRW factorizes over coordinates: p_t = [e^{-t/d} I0(t/d)]^d
        let k = Kernel::discrete_laplacian(2);
        for &t in &[0.5, 2.0, 10.0] {
            let p = k.return_probability(t, 1e-10).unwrap();
            let oracle = bessel_i0_scaled(t / 2.0).powi(2);
            assert!((p - oracle).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn return_probability_monotone_on_grid() {
        let k = Kernel::discrete_laplacian(2);
        let mut prev = 1.0;
        for i in 1..=20 {
            let t = i as f64 * 0.5;
            let p = k.return_probability(t, 1e-10).unwrap();
            assert!(p <= prev + 1e-9, "not monotone at t={t}");
            prev = p;
        }
    }

    #[test]
    fn drift_walk_exact_return() {
        // one-sided walk: return only with zero jumps, p_t = e^{-t}
        let k = Kernel::finite_range(1, vec![(vec![1], 2.0)]).unwrap();
        assert_eq!(k.rate(), 1.0); // normalized
        for &t in &[0.3, 1.0, 4.0] {
            let p = k.return_probability(t, 1e-11).unwrap();
            assert!((p - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn uniformization_cross_check() {
        // e^{-ρt} Σ (ρt)^n/n! q^{(n)}(0,0) with n-step convolution on a box
        let k = Kernel::discrete_laplacian(2);
        let t = 2.0;
        let rho = k.rate();
        let box_r = 30usize;
        let size = 2 * box_r + 1;
        let mut dist = vec![0.0f64; size * size];
        dist[box_r * size + box_r] = 1.0;
        let idx = |x: usize, y: usize| x * size + y;
        let mut series = 0.0;
        let mut poisson = (-rho * t).exp();
        series += poisson * dist[idx(box_r, box_r)];
        for n in 1..=40 {
            let mut next = vec![0.0f64; size * size];
            for x in 0..size {
                for y in 0..size {
                    let m = dist[idx(x, y)];
                    if m == 0.0 {
                        continue;
                    }
                    for (off, p) in k.jump_distribution() {
                        let nx = x as i64 + off[0];
                        let ny = y as i64 + off[1];
                        if nx >= 0 && ny >= 0 && (nx as usize) < size && (ny as usize) < size {
                            next[idx(nx as usize, ny as usize)] += m * p;
                        }
                    }
                }
            }
            dist = next;
            poisson *= rho * t / n as f64;
            series += poisson * dist[idx(box_r, box_r)];
        }
        let p = k.return_probability(t, 1e-11).unwrap();
        assert!((p - series).abs() < 1e-8, "{p} vs {series}");
    }

    #[test]
    fn difference_walk_identity() {
        // p̄_t(0,0) = Σ_j p_t(0,j)² for two iid copies
        let k = Kernel::discrete_laplacian(1);
        let s = k.symmetrize();
        let t = 1.0;
        let mut sum = 0.0;
        for j in -25i64..=25 {
            let pj = k.transition_probability(t, &[j], 1e-12).unwrap();
            sum += pj * pj;
        }
        let pbar = s.return_probability(t, 1e-11).unwrap();
        assert!((pbar - sum).abs() < 1e-6, "{pbar} vs {sum}");
    }

    #[test]
    fn watson_green_value() {
        let k = Kernel::discrete_laplacian(3);
        let g = k.green_values(1e-4).unwrap();
        assert!(!g.recurrent);
        assert!((g.green - WATSON).abs() < 1e-3, "got {}", g.green);
        // H∞ diverges for d=3 (tail exponent 3/2 < 2)
        assert!(g.weighted.is_infinite());
    }

    #[test]
    fn symmetrized_green_is_half() {
        let s = Kernel::discrete_laplacian(3).symmetrize();
        let g = s.green_values(1e-4).unwrap();
        assert!((g.green - WATSON / 2.0).abs() < 1e-3, "got {}", g.green);
    }

    #[test]
    fn recurrent_kernels_flagged() {
        for d in [1usize, 2] {
            let g = Kernel::discrete_laplacian(d).green_values(1e-6).unwrap();
            assert!(g.recurrent, "d={d} should be recurrent");
            assert!(g.green.is_infinite());
        }
    }

    #[test]
    fn riemann_transient_green_finite() {
        // β = 0.4 → α = 2.5 > 1: transient; modest accuracy expected in the
        // truncation window
        let k = Kernel::riemann_walk(0.4, 400).unwrap();
        let g = k.green_values(0.05).unwrap();
        assert!(!g.recurrent);
        assert!(g.green.is_finite() && g.green > 0.0);
        // α > 2 ⇒ H∞ finite as well
        assert!(g.weighted.is_finite());
    }

    #[test]
    fn riemann_recurrent_beta_above_one() {
        let k = Kernel::riemann_walk(1.5, 200).unwrap();
        let g = k.green_values(1e-4).unwrap();
        assert!(g.recurrent);
    }

    #[test]
    fn green_consistency_time_route() {
        // θ-route G∞ vs ∫_0^T p_t dt + tail c·T^{1-α}/(α-1), d=3 SRW
        let k = Kernel::discrete_laplacian(3);
        let g = k.green_values(1e-4).unwrap().green;
        let horizon = 60.0;
        let tol = 1e-9;
        let body = adaptive_simpson(
            &|t: f64| k.return_probability(t, tol).unwrap(),
            0.0,
            horizon,
            1e-7,
        );
        let alpha = 1.5;
        let c = k.analytic_tail_coeff().unwrap();
        let tail = c * horizon.powf(1.0 - alpha) / (alpha - 1.0);
        let combined = body + tail;
        assert!(
            (g - combined).abs() / g < 1e-3,
            "theta {g} vs time {combined}"
        );
    }

    #[test]
    fn laplace_resolvent_closed_form_d1() {
        // symmetrized d=1 SRW (ρ=2): f̂(λ) = 1/sqrt(λ² + 2ρλ)
        let s = Kernel::discrete_laplacian(1).symmetrize();
        for &lam in &[0.25, 1.0, 4.0] {
            let v = s.laplace_resolvent(lam, 1e-11).unwrap();
            let exact = 1.0 / (lam * lam + 4.0 * lam).sqrt();
            assert!((v - exact).abs() < 1e-9, "λ={lam}: {v} vs {exact}");
        }
        let v = s.laplace_resolvent(1.0, 1e-11).unwrap();
        assert!((v - 0.447213595499958).abs() < 1e-9);
    }

    #[test]
    fn return_curve_tail_attachment() {
        // d=2 SRW symmetrization → α = 1 attached analytically
        let s = Kernel::discrete_laplacian(2).symmetrize();
        let grid = crate::quadrature::graded_grid(0.1, 2.0, 1.3, 60.0);
        let curve = s.return_curve(&grid, 1e-9).unwrap();
        let tail = curve.tail().unwrap();
        assert_eq!(tail.exponent, 1.0);
        assert!(!tail.fitted);
        assert_eq!(curve.provenance(), CurveProvenance::Symmetrization);
        // Riemann walk β = 0.5 → α = 2 attached
        let k = Kernel::riemann_walk(0.5, 100).unwrap();
        let curve = k.return_curve(&grid, 1e-9).unwrap();
        assert_eq!(curve.tail().unwrap().exponent, 2.0);
    }

    #[test]
    fn fitted_tail_exponent_srw() {
        // log-log fit over the last decade of a long grid: α = 0.5 ± 0.02
        let k = Kernel::discrete_laplacian(1);
        let grid = crate::quadrature::graded_grid(0.25, 4.0, 1.15, 1e4);
        let curve = k.return_curve(&grid, 1e-10).unwrap();
        let fit = curve.fit_tail().unwrap();
        assert!(
            (fit.exponent - 0.5).abs() < 0.02,
            "fitted α = {}",
            fit.exponent
        );
        // fitted coefficient should be near 1/sqrt(2π)
        let c = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((fit.coeff - c).abs() / c < 0.05);
    }

    #[test]
    fn curve_value_and_integral_extension() {
        let k = Kernel::discrete_laplacian(1);
        let grid = crate::quadrature::graded_grid(0.1, 2.0, 1.2, 100.0);
        let curve = k.return_curve(&grid, 1e-10).unwrap();
        // inside the grid: matches the Bessel oracle
        for &t in &[0.3, 7.0, 42.0] {
            assert!((curve.value(t) - bessel_i0_scaled(t)).abs() < 1e-4);
        }
        // beyond: continuous power-law extension
        let v100 = curve.value(100.0);
        let v400 = curve.value(400.0);
        assert!((v400 / v100 - (4.0f64).powf(-0.5)).abs() < 1e-12);
        // integral against the oracle on [0, 50]
        let exact = adaptive_simpson(&|t: f64| bessel_i0_scaled(t), 0.0, 50.0, 1e-10);
        assert!((curve.integrate(0.0, 50.0) - exact).abs() < 1e-3);
    }

    #[test]
    fn quadrature_is_deterministic() {
        let k = Kernel::discrete_laplacian(3);
        let a = k.return_probability(1.7, 1e-9).unwrap();
        let b = k.return_probability(1.7, 1e-9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn truncated_mass_reported() {
        let k = Kernel::riemann_walk(0.5, 100).unwrap();
        assert!(k.truncated_mass() > 0.0 && k.truncated_mass() < 0.2);
        let k2 = Kernel::riemann_walk(0.5, 10000).unwrap();
        assert!(k2.truncated_mass() < k.truncated_mass());
    }
}

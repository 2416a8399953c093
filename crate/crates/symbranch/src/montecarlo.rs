//! Independent stochastic verification.
//!
//! Three estimators cross-check the analytic pipeline:
//!
//! * Euler-Maruyama simulation of the coupled lattice SDE system on a torus
//!   with per-site noises correlated by ϱ;
//! * an event-driven two-walker dual whose collision local time feeds the
//!   estimator e^{κ(L^= + ϱ L^≠)} for second moments;
//! * the coalescing two-walker dual for the stepping stone model.
//!
//! Replicas use independent counter-derived ChaCha streams, run in parallel,
//! and merge in replica order, so results are bit-reproducible regardless of
//! thread scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Configuration of a lattice simulation.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub kernel: Kernel,
    /// torus side length N (per dimension), N ≥ 4
    pub torus_side: usize,
    pub dt: f64,
    /// observation time t
    pub horizon: f64,
    pub kappa: f64,
    pub rho: f64,
    pub replicas: usize,
    pub seed: u64,
    /// clamp uv to max(uv, 0) under the square root (default true); applied
    /// symmetrically to both equations so the ϱ = -1 conservation law holds
    pub clamp: bool,
    /// homogeneous initial value for u and v (1 for the standard setup)
    pub initial: f64,
    /// optional second observation time t + lag for two-time correlations
    pub lag: Option<f64>,
}

impl SimConfig {
    pub fn new(kernel: Kernel, torus_side: usize, dt: f64, horizon: f64) -> SimConfig {
        SimConfig {
            kernel,
            torus_side,
            dt,
            horizon,
            kappa: 1.0,
            rho: 0.0,
            replicas: 1000,
            seed: 0,
            clamp: true,
            initial: 1.0,
            lag: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.torus_side < 4 {
            return Err(Error::InvalidConfig(format!(
                "torus side must be >= 4, got {}",
                self.torus_side
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        if self.kappa * self.dt > 0.1 {
            return Err(Error::InvalidConfig(format!(
                "stability guard: kappa*dt = {} > 0.1",
                self.kappa * self.dt
            )));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidConfig("need at least one replica".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "rho = {} outside [-1, 1]",
                self.rho
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Diffusive validity window of the periodic approximation.
    fn finite_size_ok(&self) -> bool {
        let n = self.torus_side as f64;
        let total_t = self.horizon + self.lag.unwrap_or(0.0);
        total_t <= 0.5 * (n / 2.0) * (n / 2.0) / self.kernel.rate()
    }
}

/// Observables of the lattice simulation at the observation site 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// E[u(t,0)]
    MeanU,
    /// E[u(t,0)²]
    SecondMomentU,
    /// E[u(t,0) v(t,0)]
    MixedMoment,
    /// cor[u(t,0), u(t+lag,0)] (requires `lag`)
    TwoTimeCorrelation,
}

/// A Monte Carlo estimate with its sampling error and provenance.
#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub observable: String,
    pub estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub seed: u64,
    pub flags: Vec<String>,
}

/// Deterministic, collision-free replica seed: SHA-256 of (master, index).
pub fn derive_replica_seed(master: u64, index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    hasher.finalize().into()
}

fn replica_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_replica_seed(master, index))
}

// ---------------------------------------------------------------------------
// Lattice Euler-Maruyama
// ---------------------------------------------------------------------------

struct Lattice {
    sites: usize,
    /// per jump: (rate, wrapped neighbour index table)
    jumps: Vec<(f64, Vec<usize>)>,
    rate: f64,
}

fn build_lattice(kernel: &Kernel, n: usize) -> Lattice {
    let dim = kernel.dim();
    let sites = n.pow(dim as u32);
    let mut strides = vec![1usize; dim];
    for a in (0..dim.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * n;
    }
    let coords = |mut i: usize| -> Vec<usize> {
        let mut c = vec![0usize; dim];
        for a in 0..dim {
            c[a] = i / strides[a];
            i %= strides[a];
        }
        c
    };
    let jumps = kernel
        .effective_rates()
        .map(|(off, rate)| {
            let table: Vec<usize> = (0..sites)
                .map(|i| {
                    let c = coords(i);
                    let mut idx = 0usize;
                    for a in 0..dim {
                        let shifted =
                            (c[a] as i64 + off[a]).rem_euclid(n as i64) as usize;
                        idx += shifted * strides[a];
                    }
                    idx
                })
                .collect();
            (rate, table)
        })
        .collect();
    Lattice {
        sites,
        jumps,
        rate: kernel.rate(),
    }
}

struct ReplicaOutput {
    u0: f64,
    v0: f64,
    u0_lag: f64,
}

fn evolve_replica(
    cfg: &SimConfig,
    lattice: &Lattice,
    rng: &mut ChaCha8Rng,
    keep_state: bool,
) -> Result<(ReplicaOutput, Option<(Vec<f64>, Vec<f64>)>)> {
    let sites = lattice.sites;
    let mut u = vec![cfg.initial; sites];
    let mut v = vec![cfg.initial; sites];
    let mut drift_u = vec![0.0f64; sites];
    let mut drift_v = vec![0.0f64; sites];
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();
    let rho = cfg.rho;
    let ortho = (1.0 - rho * rho).max(0.0).sqrt();
    let steps_t = (cfg.horizon / dt).round() as usize;
    let steps_total = match cfg.lag {
        Some(lag) => steps_t + (lag / dt).round() as usize,
        None => steps_t,
    };
    let mut u0_at_t = cfg.initial;
    let mut v0_at_t = cfg.initial;
    for step in 0..steps_total {
        for i in 0..sites {
            drift_u[i] = -lattice.rate * u[i];
            drift_v[i] = -lattice.rate * v[i];
        }
        for (rate, table) in &lattice.jumps {
            for i in 0..sites {
                drift_u[i] += rate * u[table[i]];
                drift_v[i] += rate * v[table[i]];
            }
        }
        for i in 0..sites {
            let prod = u[i] * v[i];
            let arg = if cfg.clamp { prod.max(0.0) } else { prod };
            let scale = (cfg.kappa * arg).sqrt() * sqrt_dt;
            let xi: f64 = StandardNormal.sample(rng);
            let xi_perp: f64 = StandardNormal.sample(rng);
            u[i] += drift_u[i] * dt + scale * xi;
            v[i] += drift_v[i] * dt + scale * (rho * xi + ortho * xi_perp);
            if !(u[i].abs() <= 1e10 && v[i].abs() <= 1e10) {
                return Err(Error::UnstableStep {
                    time: (step + 1) as f64 * dt,
                    value: u[i].abs().max(v[i].abs()),
                });
            }
        }
        if step + 1 == steps_t {
            u0_at_t = u[0];
            v0_at_t = v[0];
        }
    }
    let out = ReplicaOutput {
        u0: u0_at_t,
        v0: v0_at_t,
        u0_lag: u[0],
    };
    let state = if keep_state { Some((u, v)) } else { None };
    Ok((out, state))
}

/// Run the lattice simulation and estimate the requested observables at
/// site 0, with per-observable standard errors and reliability flags.
pub fn simulate_lattice(cfg: &SimConfig, observables: &[Observable]) -> Result<Vec<SimResult>> {
    cfg.validate()?;
    if observables.contains(&Observable::TwoTimeCorrelation) && cfg.lag.is_none() {
        return Err(Error::InvalidConfig(
            "two-time correlation needs a lag".into(),
        ));
    }
    let lattice = build_lattice(&cfg.kernel, cfg.torus_side);
    let outputs: Vec<Result<ReplicaOutput>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(cfg.seed, r as u64);
            evolve_replica(cfg, &lattice, &mut rng, false).map(|(o, _)| o)
        })
        .collect();
    let mut reps = Vec::with_capacity(cfg.replicas);
    for o in outputs {
        reps.push(o?);
    }
    let mut flags = Vec::new();
    if !cfg.finite_size_ok() {
        flags.push("finite_size_window_exceeded".to_string());
    }
    let mut results = Vec::new();
    for obs in observables {
        let (name, result) = match obs {
            Observable::MeanU => ("mean_u", mean_result(reps.iter().map(|r| r.u0), cfg)),
            Observable::SecondMomentU => (
                "second_moment_u",
                mean_result(reps.iter().map(|r| r.u0 * r.u0), cfg),
            ),
            Observable::MixedMoment => (
                "mixed_moment_uv",
                mean_result(reps.iter().map(|r| r.u0 * r.v0), cfg),
            ),
            Observable::TwoTimeCorrelation => {
                ("two_time_correlation", correlation_result(&reps, cfg))
            }
        };
        let mut r = result;
        r.observable = name.to_string();
        r.flags.extend(flags.iter().cloned());
        results.push(r);
    }
    Ok(results)
}

/// Final (u, v) fields of a single replica — used by the exact pathwise
/// invariant checks (ϱ = 1 degeneracy, ϱ = -1 conservation).
pub fn simulate_lattice_final_state(cfg: &SimConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let lattice = build_lattice(&cfg.kernel, cfg.torus_side);
    let mut rng = replica_rng(cfg.seed, 0);
    let (_, state) = evolve_replica(cfg, &lattice, &mut rng, true)?;
    Ok(state.expect("state requested"))
}

fn mean_result<I: Iterator<Item = f64>>(values: I, cfg: &SimConfig) -> SimResult {
    let vals: Vec<f64> = values.collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut flags = Vec::new();
    if heavy_tailed(&vals) {
        flags.push("heavy_tailed_estimator".to_string());
    }
    SimResult {
        observable: String::new(),
        estimate: mean,
        std_error: (var / n).sqrt(),
        replicas: vals.len(),
        seed: cfg.seed,
        flags,
    }
}

fn correlation_result(reps: &[ReplicaOutput], cfg: &SimConfig) -> SimResult {
    let n = reps.len() as f64;
    let mx = reps.iter().map(|r| r.u0).sum::<f64>() / n;
    let my = reps.iter().map(|r| r.u0_lag).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for r in reps {
        sxx += (r.u0 - mx) * (r.u0 - mx);
        syy += (r.u0_lag - my) * (r.u0_lag - my);
        sxy += (r.u0 - mx) * (r.u0_lag - my);
    }
    let corr = sxy / (sxx * syy).sqrt();
    SimResult {
        observable: String::new(),
        estimate: corr,
        // first-order normal-theory error for a correlation coefficient
        std_error: (1.0 - corr * corr) / n.sqrt(),
        replicas: reps.len(),
        seed: cfg.seed,
        flags: vec!["correlation_se_first_order".to_string()],
    }
}

/// Top 1% of replicas contributing more than half the mean marks the
/// exponential estimator as unreliable.
fn heavy_tailed(vals: &[f64]) -> bool {
    if vals.len() < 100 {
        return false;
    }
    let total: f64 = vals.iter().map(|x| x.abs()).sum();
    if total == 0.0 {
        return false;
    }
    let mut sorted: Vec<f64> = vals.iter().map(|x| x.abs()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = vals.len() / 100;
    let top_sum: f64 = sorted[..top].iter().sum();
    top_sum > 0.5 * total
}

// ---------------------------------------------------------------------------
// Event-driven dual-pair estimators
// ---------------------------------------------------------------------------

/// Starting type configuration of the dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairType {
    /// both particles the same type: estimates E[u(t,k)²]
    Same,
    /// opposite types: estimates E[u(t,k) v(t,k)]
    Different,
}

struct JumpSampler {
    cumulative: Vec<f64>,
    offsets: Vec<Vec<i64>>,
}

impl JumpSampler {
    fn new(kernel: &Kernel) -> JumpSampler {
        let mut cumulative = Vec::new();
        let mut offsets = Vec::new();
        let mut acc = 0.0;
        for (off, p) in kernel.jump_distribution() {
            acc += p;
            cumulative.push(acc);
            offsets.push(off.to_vec());
        }
        JumpSampler {
            cumulative,
            offsets,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> &[i64] {
        let x: f64 = rng.gen();
        let i = match self
            .cumulative
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.min(self.offsets.len() - 1),
        };
        &self.offsets[i]
    }
}

/// Collision local time of two independent walkers up to `t`, split at the
/// type-switch instant. The switch threshold Y ~ Exp(κ) applies only to a
/// same-type pair and fires exactly once, when the accrued same-type
/// collision time crosses Y (located exactly within the accrual interval).
fn run_dual_pair(
    kernel: &Kernel,
    sampler: &JumpSampler,
    kappa: f64,
    t: f64,
    start: PairType,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let dim = kernel.dim();
    let mut x1 = vec![0i64; dim];
    let mut x2 = vec![0i64; dim];
    let mut same = start == PairType::Same;
    let mut l_same = 0.0f64;
    let mut l_diff = 0.0f64;
    // threshold on the same-type collision clock
    let mut switch_at = if same {
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        -u.ln() / kappa
    } else {
        f64::INFINITY
    };
    let pair_rate = 2.0 * kernel.rate();
    let mut clock = 0.0f64;
    while clock < t {
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let hold = -u.ln() / pair_rate;
        let segment_end = (clock + hold).min(t);
        if x1 == x2 {
            let mut span = segment_end - clock;
            if same && l_same + span >= switch_at {
                // exact switch instant inside this accrual interval
                let into = switch_at - l_same;
                l_same = switch_at;
                span -= into;
                same = false;
                switch_at = f64::INFINITY;
            }
            if same {
                l_same += span;
            } else {
                l_diff += span;
            }
        }
        clock += hold;
        if clock >= t {
            break;
        }
        // move one of the walkers
        let first: bool = rng.gen();
        let off = sampler.sample(rng);
        let target = if first { &mut x1 } else { &mut x2 };
        for (c, o) in target.iter_mut().zip(off.iter()) {
            *c += o;
        }
    }
    (l_same, l_diff)
}

/// Estimate E[u(t,k)²] (start `Same`) or E[u(t,k) v(t,k)] (start
/// `Different`) by averaging e^{κ(L^= + ϱ L^≠)} over event-driven replicas.
pub fn simulate_dual_pair(
    kernel: &Kernel,
    kappa: f64,
    rho: f64,
    t: f64,
    start: PairType,
    replicas: usize,
    seed: u64,
) -> Result<SimResult> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput("branching rate must be positive".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput("time must be positive".into()));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho = {rho} outside [-1,1]")));
    }
    let sampler = JumpSampler::new(kernel);
    let vals: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            let (l_same, l_diff) = run_dual_pair(kernel, &sampler, kappa, t, start, &mut rng);
            (kappa * (l_same + rho * l_diff)).exp()
        })
        .collect();
    let cfg_seed = seed;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut flags = Vec::new();
    if heavy_tailed(&vals) {
        flags.push("heavy_tailed_estimator".to_string());
    }
    Ok(SimResult {
        observable: match start {
            PairType::Same => "dual_second_moment".to_string(),
            PairType::Different => "dual_mixed_moment".to_string(),
        },
        estimate: mean,
        std_error: (var / n).sqrt(),
        replicas,
        seed: cfg_seed,
        flags,
    })
}

/// Coalescing dual for the stepping stone model with flat initial density w:
/// the pair coalesces once its collision time exceeds Y ~ Exp(κ); the
/// estimator w^{#non-coalesced} averages to E[u(t,k)²].
pub fn simulate_coalescing_dual(
    kernel: &Kernel,
    kappa: f64,
    w: f64,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<SimResult> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::InvalidInput(format!("w = {w} outside (0,1)")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput("branching rate must be positive".into()));
    }
    let sampler = JumpSampler::new(kernel);
    let vals: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            if t == 0.0 {
                return w * w;
            }
            if coalesced(kernel, &sampler, kappa, t, &mut rng) {
                w
            } else {
                w * w
            }
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(SimResult {
        observable: "coalescing_second_moment".to_string(),
        estimate: mean,
        std_error: (var / n).sqrt(),
        replicas,
        seed,
        flags: Vec::new(),
    })
}

fn coalesced(
    kernel: &Kernel,
    sampler: &JumpSampler,
    kappa: f64,
    t: f64,
    rng: &mut ChaCha8Rng,
) -> bool {
    let dim = kernel.dim();
    let mut x1 = vec![0i64; dim];
    let mut x2 = vec![0i64; dim];
    let mut collision = 0.0f64;
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let threshold = -u.ln() / kappa;
    let pair_rate = 2.0 * kernel.rate();
    let mut clock = 0.0f64;
    while clock < t {
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let hold = -u.ln() / pair_rate;
        let segment_end = (clock + hold).min(t);
        if x1 == x2 {
            collision += segment_end - clock;
            if collision >= threshold {
                return true;
            }
        }
        clock += hold;
        if clock >= t {
            break;
        }
        let first: bool = rng.gen();
        let off = sampler.sample(rng);
        let target = if first { &mut x1 } else { &mut x2 };
        for (c, o) in target.iter_mut().zip(off.iter()) {
            *c += o;
        }
    }
    false
}

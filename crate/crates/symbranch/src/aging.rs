//! Two-time correlations and aging.
//!
//! For symmetric kernels and homogeneous initial conditions the covariance of
//! u(t,k) and u(t+s,k) has the integral representation
//!
//! ```text
//! cov = κ ∫_0^t p_{2r+s}(k,k) · m(t-r) dr,       m(t) = E[f(u(t,k))],
//! ```
//!
//! with matching variance integrals, so the correlation is a ratio of three
//! integrals in which constant prefactors of m cancel. Whether the limit of
//! cor[u(t,k), u(t+s,k)] depends on the (t, s) scaling — aging — splits into
//! three regimes by the sign of the noise correlation, with closed-form
//! limits when the return-probability tail exponent is α ≤ 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::localtime::{
    subexp_asymptotics, volterra_solve, Asymptote, ExtendedMomentCurve, GrowthForm, LatticeReturn,
    ReturnKernel, SubexpRegime,
};
use crate::quadrature::adaptive_simpson;
use crate::special::gamma;

/// Interacting-diffusion model selector for two-time correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DiffusionModel {
    /// the two-type model itself: m(t) = E[e^{κϱL_t}]
    Symbiotic { rho: f64 },
    /// diffusion function u²: the ϱ = 1 special case
    Anderson,
    /// diffusion function bounded between lo and hi: envelope only
    Bounded { lo: f64, hi: f64 },
    /// linear diffusion function: m ≡ 1
    SuperWalk,
    /// diffusion function u(1-u) with flat initial density w: coalescing dual
    SteppingStone { w: f64 },
}

/// Correlation regime by the sign of the effective noise correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationRegime {
    PositiveRho,
    ZeroRho,
    NegativeRho,
}

impl DiffusionModel {
    pub fn regime(&self) -> CorrelationRegime {
        match self {
            DiffusionModel::Symbiotic { rho } => {
                if *rho > 0.0 {
                    CorrelationRegime::PositiveRho
                } else if *rho == 0.0 {
                    CorrelationRegime::ZeroRho
                } else {
                    CorrelationRegime::NegativeRho
                }
            }
            DiffusionModel::Anderson => CorrelationRegime::PositiveRho,
            DiffusionModel::Bounded { .. } | DiffusionModel::SuperWalk => CorrelationRegime::ZeroRho,
            DiffusionModel::SteppingStone { .. } => CorrelationRegime::NegativeRho,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DiffusionModel::Symbiotic { rho } => {
                if !(-1.0..=1.0).contains(rho) {
                    return Err(Error::InvalidInput(format!("rho = {rho} outside [-1,1]")));
                }
            }
            DiffusionModel::Bounded { lo, hi } => {
                if !(*lo > 0.0 && hi >= lo) {
                    return Err(Error::InvalidInput(format!(
                        "bounded model needs 0 < lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
            DiffusionModel::SteppingStone { w } => {
                if !(*w > 0.0 && *w < 1.0) {
                    return Err(Error::InvalidInput(format!("w = {w} outside (0,1)")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A two-time correlation query: base time t, lag s ≥ 0.
#[derive(Debug, Clone)]
pub struct AgingQuery {
    pub kernel: Kernel,
    pub kappa: f64,
    pub model: DiffusionModel,
    pub t: f64,
    pub s: f64,
}

/// The moment function m(t) = E[f(u(t,k))] entering the covariance integrals.
pub enum MomentFunction {
    /// m ≡ value (super random walk; ϱ = 0 where E[e^{0·L}] = 1)
    Constant(f64),
    /// constant envelope hi/lo for bounded diffusion functions
    Envelope { lo: f64, hi: f64 },
    /// prefactor · g(t), g solved and extended past its horizon
    Curve {
        prefactor: f64,
        curve: ExtendedMomentCurve,
    },
}

impl MomentFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            MomentFunction::Constant(v) => *v,
            MomentFunction::Envelope { lo, hi } => 0.5 * (lo + hi),
            MomentFunction::Curve { prefactor, curve } => prefactor * curve.value(t),
        }
    }

    pub fn envelope(&self) -> Option<(f64, f64)> {
        match self {
            MomentFunction::Envelope { lo, hi } => Some((*lo, *hi)),
            _ => None,
        }
    }
}

/// Options for the numerical correlation evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationOptions {
    /// quadrature tolerance for the return-probability curve
    pub tol: f64,
    /// horizon up to which m(t) is solved before the asymptote takes over
    pub solve_horizon: f64,
    /// Volterra step for m
    pub step: f64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions {
            tol: 1e-9,
            solve_horizon: 512.0,
            step: 0.01,
        }
    }
}

/// Which evaluation path produced a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    /// all integrand arguments within the exactly-quadratured window
    Exact,
    /// tail or moment-asymptote extensions were used
    Asymptotic,
}

#[derive(Debug, Clone, Copy)]
pub struct CorrelationValue {
    pub value: f64,
    pub path: EvalPath,
    /// lower/upper correlation bounds for bounded-f models
    pub envelope: Option<(f64, f64)>,
}

/// Build m(t) = E[f(u(t,k))] for a model on a symmetric kernel.
///
/// For the symbiotic/Anderson family m is the local-time moment g_{κϱ}; for
/// the stepping stone model the coalescing dual gives
/// m(t) = (w - w²) E[e^{-κL_t}]; super random walks have m ≡ 1 and bounded
/// diffusion functions only an envelope.
pub fn moment_function(
    model: DiffusionModel,
    kernel: &Kernel,
    kappa: f64,
    opts: &CorrelationOptions,
) -> Result<MomentFunction> {
    model.validate()?;
    let effective_kappa = match model {
        DiffusionModel::Symbiotic { rho } => kappa * rho,
        DiffusionModel::Anderson => kappa,
        DiffusionModel::SuperWalk => return Ok(MomentFunction::Constant(1.0)),
        DiffusionModel::Bounded { lo, hi } => return Ok(MomentFunction::Envelope { lo, hi }),
        DiffusionModel::SteppingStone { .. } => -kappa,
    };
    if effective_kappa == 0.0 {
        return Ok(MomentFunction::Constant(1.0));
    }
    let prefactor = match model {
        DiffusionModel::SteppingStone { w } => w - w * w,
        _ => 1.0,
    };
    // m solves the renewal equation against the symmetrization; for a
    // symmetric kernel p̄_r = p_{2r}, so the base-walk curve is reused.
    let base = LatticeReturn::new(kernel.clone(), opts.tol);
    let g = volterra_solve(
        |r| base.return_prob(2.0 * r),
        effective_kappa,
        opts.solve_horizon,
        opts.step.min(0.01 / effective_kappa.abs().max(1e-9)),
    )?;
    let extension = if effective_kappa < 0.0 {
        let base_tail = base.tail().ok_or_else(|| {
            Error::RegimeMismatch("moment extension needs tail data for the kernel".into())
        })?;
        // symmetrization tail: p_{2t} ~ c·2^{-α} t^{-α}
        let sym_tail = crate::kernels::PowerTail {
            coeff: base_tail.coeff * 2f64.powf(-base_tail.exponent),
            exponent: base_tail.exponent,
            fitted: base_tail.fitted,
            residual: base_tail.residual,
        };
        let greens = base.green_values().ok();
        let sym_greens = greens.map(|g| crate::kernels::GreenValues {
            green: g.green / 2.0,
            weighted: g.weighted / 4.0,
            recurrent: g.recurrent,
            green_error: g.green_error,
            weighted_error: g.weighted_error,
        });
        subexp_asymptotics(
            SubexpRegime::Negative,
            &sym_tail,
            effective_kappa,
            sym_greens.as_ref(),
        )?
    } else {
        // bounded or growing m: continue flat from the horizon (callers keep
        // t within the solved window for κϱ > 0)
        Asymptote {
            form: GrowthForm::Constant,
            scale: 1.0,
            offset: 0.0,
        }
    };
    Ok(MomentFunction::Curve {
        prefactor,
        curve: ExtendedMomentCurve::new(g, extension),
    })
}

/// Numerically evaluate cor[u(t,k), u(t+s,k)] from the covariance integrals.
pub fn correlation(query: &AgingQuery, opts: &CorrelationOptions) -> Result<CorrelationValue> {
    if !query.kernel.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    if !(query.t > 0.0) || query.s < 0.0 {
        return Err(Error::InvalidInput("need t > 0 and s >= 0".into()));
    }
    let m = moment_function(query.model, &query.kernel, query.kappa, opts)?;
    correlation_with_moment(query, &m, opts)
}

/// Same as [`correlation`] but with a caller-supplied moment function, so
/// sweeps can reuse one solved curve across many (t, s) cells.
pub fn correlation_with_moment(
    query: &AgingQuery,
    m: &MomentFunction,
    opts: &CorrelationOptions,
) -> Result<CorrelationValue> {
    if !query.kernel.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    if let MomentFunction::Curve { curve, .. } = m {
        // growing m must not be evaluated beyond its solved horizon
        if curve.base().kappa() > 0.0 && query.t + query.s > curve.splice() {
            return Err(Error::InvalidInput(format!(
                "t+s = {} exceeds the solved horizon {} for a growing moment function",
                query.t + query.s,
                curve.splice()
            )));
        }
    }
    let base = LatticeReturn::new(query.kernel.clone(), opts.tol);
    let curve = base.curve();
    let (t, s) = (query.t, query.s);

    // constant prefactors of m cancel in the ratio; normalizing by m(0)
    // makes that exact in floating point as well
    let m0 = m.eval(0.0);
    let mn = |x: f64| m.eval(x) / m0;
    let num = covariance_integral(|u| curve.value(u), &mn, t, s);
    let var1 = covariance_integral(|u| curve.value(u), &mn, t, 0.0);
    let var2 = covariance_integral(|u| curve.value(u), &mn, t + s, 0.0);
    let value = num / (var1 * var2).sqrt();

    let path = if 2.0 * (t + s) <= curve.horizon() {
        EvalPath::Exact
    } else {
        EvalPath::Asymptotic
    };
    let envelope = m.envelope().map(|(lo, hi)| {
        // m between lo and hi bounds the ratio between (lo/hi)·v and (hi/lo)·v
        ((lo / hi) * value, ((hi / lo) * value).min(1.0))
    });
    Ok(CorrelationValue {
        value,
        path,
        envelope,
    })
}

/// ∫_0^t p(2r+s) m(t-r) dr with geometric segmentation from both endpoints
/// (the integrand concentrates near r = 0 through p and varies on all scales
/// through m).
fn covariance_integral<P, M>(p: P, m: M, t: f64, s: f64) -> f64
where
    P: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
{
    let f = |r: f64| p(2.0 * r + s) * m(t - r);
    let mut cuts: Vec<f64> = vec![0.0];
    let mut x = 1.0_f64.min(t / 4.0);
    while x < t / 2.0 {
        cuts.push(x);
        x *= 2.0;
    }
    let mut upper = Vec::new();
    let mut y = 1.0_f64.min(t / 4.0);
    while y < t / 2.0 {
        upper.push(t - y);
        y *= 2.0;
    }
    cuts.push(t / 2.0);
    upper.reverse();
    cuts.extend(upper);
    cuts.push(t);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * t.max(1.0));
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += adaptive_simpson(&f, w[0], w[1], 1e-12 * t.max(1.0));
    }
    acc
}

/// Scaling descriptor for the aging limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scaling", rename_all = "snake_case")]
pub enum Scaling {
    /// s = a·t
    Linear { a: f64 },
    /// log s / log t = a
    LogRatio { a: f64 },
}

impl Scaling {
    pub fn lag(&self, t: f64) -> f64 {
        match self {
            Scaling::Linear { a } => a * t,
            Scaling::LogRatio { a } => t.powf(*a),
        }
    }

    pub fn parameter(&self) -> f64 {
        match self {
            Scaling::Linear { a } | Scaling::LogRatio { a } => *a,
        }
    }
}

/// The closed-form limits of cor[u(t,k), u(t+s,k)]:
///
/// * ϱ > 0: 0 for every α and scaling (no aging);
/// * ϱ = 0 or ϱ < 0 with α > 1: 0 (no aging);
/// * α = 1 under log s/log t = a: (1-a)₊;
/// * α < 1 under s = at: a closed form for ϱ = 0, a Beta-normalized
///   integral for ϱ < 0 (endpoint singularity removed by r = 1 - z^{1/α}).
pub fn aging_limit(regime: CorrelationRegime, alpha: f64, scaling: Scaling) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::RegimeMismatch(format!("alpha must be > 0, got {alpha}")));
    }
    if regime == CorrelationRegime::PositiveRho {
        return Ok(0.0);
    }
    if alpha > 1.0 + 1e-9 {
        return Ok(0.0);
    }
    if (alpha - 1.0).abs() <= 1e-9 {
        return match scaling {
            Scaling::LogRatio { a } => Ok((1.0 - a).max(0.0)),
            Scaling::Linear { .. } => Err(Error::RegimeMismatch(
                "alpha = 1 aging limits use the log s/log t = a scaling".into(),
            )),
        };
    }
    // α < 1
    let a = match scaling {
        Scaling::Linear { a } => a,
        Scaling::LogRatio { .. } => {
            return Err(Error::RegimeMismatch(
                "alpha < 1 aging limits use the s = a·t scaling".into(),
            ))
        }
    };
    if a < 0.0 {
        return Err(Error::RegimeMismatch("need a >= 0".into()));
    }
    match regime {
        CorrelationRegime::ZeroRho => {
            let one_m = 1.0 - alpha;
            Ok(((1.0 + 0.5 * a).powf(one_m) - (0.5 * a).powf(one_m)) / (1.0 + a).powf(one_m / 2.0))
        }
        CorrelationRegime::NegativeRho => {
            if a == 0.0 {
                return Ok(1.0);
            }
            // ∫_0^1 (2r+a)^{-α} (1-r)^{α-1} dr, substituting r = 1 - z^{1/α}
            // so the weight becomes flat: (1/α)·(2(1-z^{1/α})+a)^{-α} dz
            let integrand = |z: f64| {
                let r = 1.0 - z.powf(1.0 / alpha);
                (2.0 * r + a).powf(-alpha) / alpha
            };
            let integral = adaptive_simpson(&integrand, 0.0, 1.0, 1e-12);
            Ok(integral / (2f64.powf(-alpha) * gamma(alpha) * gamma(1.0 - alpha)))
        }
        CorrelationRegime::PositiveRho => unreachable!(),
    }
}

/// One cell of an aging sweep.
#[derive(Debug, Clone, Serialize)]
pub struct AgingRow {
    pub t: f64,
    pub s: f64,
    pub a: f64,
    pub numeric: f64,
    pub limit: f64,
    pub deviation: f64,
    pub path: EvalPath,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgingReport {
    pub rows: Vec<AgingRow>,
    /// per scaling parameter: deviations decrease along the t-list
    pub deviations_shrink: bool,
}

/// Compare numeric correlations against the scaling limits on an
/// (a, t) grid. Deviations must trend downward in t for each a (one
/// non-monotone step is tolerated for quadrature noise).
pub fn aging_sweep(
    kernel: &Kernel,
    model: DiffusionModel,
    kappa: f64,
    scalings: &[Scaling],
    times: &[f64],
    opts: &CorrelationOptions,
) -> Result<AgingReport> {
    if !kernel.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    let base = LatticeReturn::new(kernel.clone(), opts.tol);
    let alpha = base
        .tail()
        .map(|t| t.exponent)
        .ok_or_else(|| Error::InvalidInput("aging sweep needs a kernel with tail data".into()))?;
    let regime = model.regime();
    let m = moment_function(model, kernel, kappa, opts)?;
    let mut rows = Vec::new();
    let mut shrink = true;
    for scaling in scalings {
        let limit = aging_limit(regime, alpha, *scaling)?;
        let mut prev_dev = f64::INFINITY;
        let mut bumps = 0;
        for &t in times {
            let s = scaling.lag(t);
            let query = AgingQuery {
                kernel: kernel.clone(),
                kappa,
                model,
                t,
                s,
            };
            let cv = correlation_with_moment(&query, &m, opts)?;
            let deviation = (cv.value - limit).abs();
            if deviation > prev_dev + 1e-9 {
                bumps += 1;
            }
            prev_dev = deviation;
            rows.push(AgingRow {
                t,
                s,
                a: scaling.parameter(),
                numeric: cv.value,
                limit,
                deviation,
                path: cv.path,
                envelope: cv.envelope,
            });
        }
        if bumps > 1 {
            shrink = false;
        }
    }
    Ok(AgingReport {
        rows,
        deviations_shrink: shrink,
    })
}

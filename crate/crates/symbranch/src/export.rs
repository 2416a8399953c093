//! CSV and JSON artifact writers.
//!
//! CSV dialect: comma-separated, `.` decimal, 17 significant digits, one
//! header row, `#`-prefixed comment lines. 17 digits round-trip f64 exactly,
//! so re-running a deterministic computation reproduces files byte for byte.

use std::path::Path;

use crate::aging::AgingReport;
use crate::error::Result;
use crate::kernels::ReturnCurve;
use crate::localtime::MomentCurve;
use crate::moments::{IntermittencyReport, LyapunovReport, MomentReport, RateRegime};
use crate::montecarlo::SimResult;

/// 17 significant digits: enough to reproduce the exact f64 bits on parse.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Write atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into()),
        std::process::id()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// `t,p` body for a return curve, with optional comment lines prepended.
pub fn curve_csv(curve: &ReturnCurve, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("t,p\n");
    for (t, p) in curve.times().iter().zip(curve.values().iter()) {
        out.push_str(&fmt_float(*t));
        out.push(',');
        out.push_str(&fmt_float(*p));
        out.push('\n');
    }
    out
}

/// `t,g,residual` body for a moment curve.
pub fn moment_csv(curve: &MomentCurve, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("t,g,residual\n");
    let err = curve.error_estimate();
    for (t, g) in curve.times().iter().zip(curve.values().iter()) {
        out.push_str(&fmt_float(*t));
        out.push(',');
        out.push_str(&fmt_float(*g));
        out.push(',');
        out.push_str(&fmt_float(if err.is_nan() { f64::NAN } else { err * g.abs() }));
        out.push('\n');
    }
    out
}

/// `t,Euv,Eu2` body for a second-moment report.
pub fn moment_report_csv(report: &MomentReport, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("t,Euv,Eu2\n");
    for i in 0..report.times.len() {
        out.push_str(&fmt_float(report.times[i]));
        out.push(',');
        out.push_str(&fmt_float(report.mixed[i]));
        out.push(',');
        out.push_str(&fmt_float(report.square[i]));
        out.push('\n');
    }
    out
}

fn regime_str(r: RateRegime) -> &'static str {
    match r {
        RateRegime::Subcritical => "subcritical",
        RateRegime::Critical => "critical",
        RateRegime::Supercritical => "supercritical",
    }
}

/// `kappa,r,regime,prediction` body for a Lyapunov report.
pub fn lyapunov_csv(report: &LyapunovReport, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("kappa,r,regime,prediction\n");
    for e in &report.entries {
        out.push_str(&fmt_float(e.kappa));
        out.push(',');
        out.push_str(&fmt_float(e.rate));
        out.push(',');
        out.push_str(regime_str(e.regime));
        out.push(',');
        out.push_str(&e.prediction.map(fmt_float).unwrap_or_default());
        out.push('\n');
    }
    out
}

/// `t,s,a,numeric,limit,deviation,path` body for an aging report.
pub fn aging_csv(report: &AgingReport, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("t,s,a,numeric,limit,deviation,path\n");
    for r in &report.rows {
        for v in [r.t, r.s, r.a, r.numeric, r.limit, r.deviation] {
            out.push_str(&fmt_float(v));
            out.push(',');
        }
        out.push_str(match r.path {
            crate::aging::EvalPath::Exact => "exact",
            crate::aging::EvalPath::Asymptotic => "asymptotic",
        });
        out.push('\n');
    }
    out
}

/// Pretty JSON for a Monte Carlo result.
pub fn sim_result_json(result: &SimResult) -> String {
    serde_json::to_string_pretty(result).expect("serializable")
}

/// Verdict JSON `{kappa, rho, kappa_cr, gamma2, verdict}`.
pub fn verdict_json(report: &IntermittencyReport) -> String {
    serde_json::json!({
        "kappa": report.kappa,
        "rho": report.rho,
        "kappa_cr": report.threshold,
        "gamma2": report.gamma2,
        "verdict": report.verdict,
    })
    .to_string()
}

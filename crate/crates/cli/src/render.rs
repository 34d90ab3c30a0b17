//! CSV and JSON rendering. CSV floats carry 17 significant digits.

use std::fmt::Write;

use dynamo_core::lyapunov::LyapunovResult;
use dynamo_core::meansquare::MsReport;
use dynamo_core::model::{Equilibrium, ModelParams};
use dynamo_core::regions::{BoundaryPoint, RegionRecord, ScanSpec};
use dynamo_core::sde::{AngularHistogram, McEstimate, RngSpec, SimConfig};
use serde_json::json;

use crate::Format;

/// Monte Carlo agreement threshold in standard errors.
pub const AGREE_SE: f64 = 3.0;

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

fn to_json(value: serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(&value).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn equilibria(format: Format, params: &ModelParams, eqs: &[Equilibrium]) -> String {
    match format {
        Format::Json => to_json(json!({ "params": params, "equilibria": eqs })),
        Format::Csv => {
            let mut s = String::from("b_r,b_phi,residual\n");
            for e in eqs {
                let _ = writeln!(s, "{},{},{}", f(e.state.b_r), f(e.state.b_phi), f(e.residual));
            }
            s
        }
    }
}

pub fn lyapunov(format: Format, params: &ModelParams, results: &[LyapunovResult], discrepancy: Option<f64>) -> String {
    match format {
        Format::Json => to_json(json!({
            "params": params,
            "results": results,
            "max_rel_discrepancy": discrepancy,
        })),
        Format::Csv => {
            let mut s = String::from("method,lambda,noise_term,error_estimate,terms,evaluations,deterministic,max_rel_discrepancy\n");
            for r in results {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    if r.meta.deterministic { "deterministic" } else { r.method.as_str() },
                    f(r.value),
                    f(r.noise_term),
                    f(r.error_estimate),
                    r.meta.terms,
                    r.meta.evaluations,
                    r.meta.deterministic,
                    opt(discrepancy),
                );
            }
            s
        }
    }
}

pub fn meansquare(format: Format, params: &ModelParams, report: &MsReport) -> String {
    match format {
        Format::Json => to_json(json!({
            "params": params,
            "report": report,
            "critical_eps": params.critical_eps(),
        })),
        Format::Csv => format!(
            "abscissa,ms_stable,criticality,threshold_sigma,ryashko_trace,critical_eps\n{},{},{},{},{},{}\n",
            f(report.abscissa),
            report.ms_stable,
            report.criticality,
            opt(report.threshold_sigma),
            opt(report.ryashko_trace),
            f(params.critical_eps()),
        ),
    }
}

pub fn verdict(est: &McEstimate, reference: f64) -> &'static str {
    if (est.value - reference).abs() <= AGREE_SE * est.std_error {
        "AGREE"
    } else {
        "DISAGREE"
    }
}

pub fn simulation(
    format: Format,
    mode: &str,
    params: &ModelParams,
    cfg: &SimConfig,
    rng: &RngSpec,
    est: &McEstimate,
    reference: f64,
) -> String {
    let deviation = (est.value - reference).abs() / est.std_error;
    let verdict = verdict(est, reference);
    match format {
        Format::Json => to_json(json!({
            "mode": mode,
            "params": params,
            "config": cfg,
            "rng": rng,
            "estimate": est,
            "reference": reference,
            "deviation_se": deviation,
            "verdict": verdict,
        })),
        Format::Csv => format!(
            "mode,estimate,std_error,n_samples,reference,deviation_se,verdict\n{mode},{},{},{},{},{},{verdict}\n",
            f(est.value),
            f(est.std_error),
            est.n_samples,
            f(reference),
            f(deviation),
        ),
    }
}

pub fn angular(format: Format, params: &ModelParams, cfg: &SimConfig, rng: &RngSpec, hist: &AngularHistogram) -> String {
    match format {
        Format::Json => to_json(json!({
            "mode": "angular",
            "params": params,
            "config": cfg,
            "rng": rng,
            "histogram": hist,
        })),
        Format::Csv => {
            let mut s = String::from("angle,density,std_error\n");
            for ((c, d), e) in hist.centers().iter().zip(&hist.density).zip(&hist.std_error) {
                let _ = writeln!(s, "{},{},{}", f(*c), f(*d), f(*e));
            }
            s
        }
    }
}

pub fn scan(format: Format, spec: &ScanSpec, records: &[RegionRecord]) -> String {
    match format {
        Format::Json => to_json(json!({ "spec": spec, "records": records })),
        Format::Csv => {
            let mut s = String::from("eps,sigma1,lambda,lambda_sign,ms_abscissa,ms_stable,criticality,dep_f\n");
            for r in records {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    f(r.eps),
                    f(r.sigma1),
                    f(r.lambda),
                    r.lambda_sign,
                    f(r.ms_abscissa),
                    r.ms_stable,
                    r.criticality,
                    f(r.dep_f),
                );
            }
            s
        }
    }
}

pub fn boundaries(format: Format, points: &[BoundaryPoint]) -> String {
    match format {
        Format::Json => to_json(json!({ "boundaries": points })),
        Format::Csv => {
            let mut s = String::from("eps,sigma1,boundary_kind\n");
            for p in points {
                let _ = writeln!(s, "{},{},{}", f(p.eps), f(p.sigma1), p.kind);
            }
            s
        }
    }
}

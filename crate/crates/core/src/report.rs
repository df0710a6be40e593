//! CSV and JSON emission for sweep results.
//!
//! One flat table serves every sweep kind. The schema is versioned through
//! the leading comment line; column changes bump the version. Floats are
//! written with Rust's shortest round-trip formatting and lines end with LF,
//! so identical runs produce byte-identical files.

use std::fmt::Write as _;

use serde::Serialize;

use crate::harness::{ReportKind, RiskCurve, SpectrumTrace, SweepOutput};

pub const CSV_SCHEMA: &str = "ddlab.results.v1";
pub const CSV_HEADER: &str = "sweep,axis,n,p,k,gamma,trials,emp_excess_mean,emp_excess_se,emp_total_mean,theory_excess,theory_total";

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn push_curve_rows(out: &mut String, curve: &RiskCurve) {
    let want_excess = curve.report != ReportKind::Total;
    let want_total = curve.report != ReportKind::Excess;
    let gate = |on: bool, v: String| if on { v } else { String::new() };
    for pt in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            curve.sweep,
            pt.axis,
            pt.n,
            pt.p,
            pt.k.map(|k| k.to_string()).unwrap_or_default(),
            fmt_opt(pt.gamma),
            curve.trials,
            gate(want_excess, fmt_f64(pt.emp_excess_mean)),
            gate(want_excess, fmt_f64(pt.emp_excess_se)),
            gate(want_total, fmt_f64(pt.emp_total_mean)),
            gate(want_excess, fmt_opt(pt.theory_excess)),
            gate(want_total, fmt_opt(pt.theory_total)),
        );
    }
}

fn push_spectrum_rows(out: &mut String, trace: &SpectrumTrace) {
    // Spectrum rows reuse the empirical/theory columns: the empirical
    // largest eigenvalue and the Marchenko-Pastur edge prediction.
    for row in &trace.rows {
        let _ = writeln!(
            out,
            "spectrum,{},{},{},,,{},{},{},{},{},",
            row.n,
            row.n,
            row.p,
            trace.trials,
            fmt_f64(row.empirical_largest_mean),
            fmt_f64(row.empirical_largest_se),
            fmt_f64(row.empirical_largest_mean),
            fmt_f64(row.mp_prediction),
        );
    }
}

/// Render a sweep result as CSV (versioned comment line, header, rows).
pub fn to_csv(output: &SweepOutput) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {CSV_SCHEMA}");
    let _ = writeln!(out, "{CSV_HEADER}");
    match output {
        SweepOutput::Curve(curve) => push_curve_rows(&mut out, curve),
        SweepOutput::Curves(curves) => {
            for (_, curve) in curves {
                push_curve_rows(&mut out, curve);
            }
        }
        SweepOutput::Spectrum(trace) => push_spectrum_rows(&mut out, trace),
    }
    out
}

#[derive(Serialize)]
struct JsonDoc<'a, T: Serialize> {
    schema: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct CurvesBody<'a> {
    curves: Vec<LabeledCurve<'a>>,
}

#[derive(Serialize)]
struct LabeledCurve<'a> {
    gamma: f64,
    curve: &'a RiskCurve,
}

/// Render a sweep result as a JSON document with the same schema tag.
pub fn to_json(output: &SweepOutput) -> String {
    let doc = match output {
        SweepOutput::Curve(curve) => serde_json::to_string_pretty(&JsonDoc {
            schema: CSV_SCHEMA,
            body: curve,
        }),
        SweepOutput::Curves(curves) => {
            let body = CurvesBody {
                curves: curves
                    .iter()
                    .map(|(g, c)| LabeledCurve {
                        gamma: *g,
                        curve: c,
                    })
                    .collect(),
            };
            serde_json::to_string_pretty(&JsonDoc {
                schema: CSV_SCHEMA,
                body: &body,
            })
        }
        SweepOutput::Spectrum(trace) => serde_json::to_string_pretty(&JsonDoc {
            schema: CSV_SCHEMA,
            body: trace,
        }),
    };
    let mut s = doc.expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorSpec;
    use crate::harness::{run_sample_sweep, GammaPolicy, SweepConfig, SweepKind};

    fn small_curve() -> SweepOutput {
        let cfg = SweepConfig {
            sweep: SweepKind::Samples,
            grid: vec![20, 40],
            p: 5,
            sigma2: 0.25,
            estimator: EstimatorSpec::DropoutSpectral { gamma: 0.8 },
            gamma_policy: GammaPolicy::Fixed(0.8),
            trials: 10,
            master_seed: 3,
            ..SweepConfig::default()
        };
        SweepOutput::Curve(run_sample_sweep(&cfg).unwrap())
    }

    #[test]
    fn csv_has_version_header_and_rows() {
        let csv = to_csv(&small_curve());
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# ddlab.results.v1");
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert_eq!(row.split(',').count(), 12);
            assert!(row.starts_with("samples,"));
            // k column is empty for sample sweeps.
            assert_eq!(row.split(',').nth(4).unwrap(), "");
        }
    }

    #[test]
    fn report_kind_filters_csv_columns() {
        let mut out = small_curve();
        if let SweepOutput::Curve(c) = &mut out {
            c.report = ReportKind::Excess;
        }
        let csv = to_csv(&out);
        let row = csv.lines().nth(2).unwrap();
        let cols: Vec<&str> = row.split(',').collect();
        assert!(!cols[7].is_empty() && !cols[8].is_empty());
        assert!(cols[9].is_empty() && cols[11].is_empty(), "{row}");

        if let SweepOutput::Curve(c) = &mut out {
            c.report = ReportKind::Total;
        }
        let csv = to_csv(&out);
        let row = csv.lines().nth(2).unwrap();
        let cols: Vec<&str> = row.split(',').collect();
        assert!(cols[7].is_empty() && cols[8].is_empty() && cols[10].is_empty());
        assert!(!cols[9].is_empty() && !cols[11].is_empty(), "{row}");
    }

    #[test]
    fn csv_and_json_are_run_stable() {
        let a = small_curve();
        let b = small_curve();
        assert_eq!(to_csv(&a), to_csv(&b));
        assert_eq!(to_json(&a), to_json(&b));
        assert!(to_json(&a).contains("\"schema\": \"ddlab.results.v1\""));
    }
}

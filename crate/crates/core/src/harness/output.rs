//! CSV rendering of traces, run summaries and batch aggregates.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::scenario::{BatchAggregate, RunSummary};
use super::HarnessError;
use crate::optimizer::TraceRecord;

pub const TRACE_HEADER: &str = "elapsed_s,qber_est,qber_true,v1,v2,v3,v4,range_v,s1,s2,s3";
pub const SUMMARY_HEADER: &str = "seed,initial_qber,final_qber,iters_to_floor,recovered_jumps";
pub const AGGREGATE_HEADER: &str = "runs,failed_runs,success_fraction,median_iters_to_floor,median_convergence_time_s,final_qber_q10,final_qber_q50,final_qber_q90";

/// Renders `x` with 9 significant digits, in the style of C's `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn render_trace(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let fields = [
            r.elapsed,
            r.qber_est,
            r.qber_true,
            r.voltages[0],
            r.voltages[1],
            r.voltages[2],
            r.voltages[3],
            r.range,
            r.stokes[0],
            r.stokes[1],
            r.stokes[2],
        ];
        let line: Vec<String> = fields.iter().map(|&x| fmt_sig9(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn summary_line(s: &RunSummary) -> String {
    let iters = s.iters_to_floor.map(|n| n.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{}",
        s.seed,
        fmt_sig9(s.initial_qber),
        fmt_sig9(s.final_qber),
        iters,
        s.recovered_jumps
    )
}

pub fn render_summaries(summaries: &[RunSummary]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        out.push_str(&summary_line(s));
        out.push('\n');
    }
    out
}

pub fn render_aggregate(a: &BatchAggregate) -> String {
    let opt = |x: Option<f64>| x.map(fmt_sig9).unwrap_or_default();
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        a.runs,
        a.failed_runs,
        fmt_sig9(a.success_fraction),
        opt(a.median_iters_to_floor),
        opt(a.median_convergence_time),
        opt(a.final_qber_quantiles.map(|q| q[0])),
        opt(a.final_qber_quantiles.map(|q| q[1])),
        opt(a.final_qber_quantiles.map(|q| q[2])),
    );
    out
}

/// `<prefix><suffix>`, keeping any directory part of the prefix.
pub fn prefixed(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

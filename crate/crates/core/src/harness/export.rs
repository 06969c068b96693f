//! CSV, JSONL and plot-data writers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::bounds::BoundTrace;
use crate::units::rad_to_deg;

use super::campaign::CampaignSummary;
use super::sim::RunTrace;
use super::HarnessError;

/// Column names of the trace CSV for `m` actuators (`13 + m` columns).
pub fn trace_columns(m: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "t",
        "qe0",
        "qe1",
        "qe2",
        "qe3",
        "wex",
        "wey",
        "wez",
        "theta_e_deg",
        "snorm",
        "shatnorm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((1..=m).map(|i| format!("tau_u{i}")));
    cols.push("qtilde_norm".into());
    cols.push("wtilde_norm".into());
    cols
}

pub fn write_trace_csv(trace: &RunTrace, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_columns(trace.actuator_count()))?;
    for s in &trace.samples {
        let q = s.qe.to_array();
        let mut row = vec![
            s.t,
            q[0],
            q[1],
            q[2],
            q[3],
            s.omega_e.x,
            s.omega_e.y,
            s.omega_e.z,
            rad_to_deg(s.theta_e),
            s.s_norm,
            s.s_hat_norm,
        ];
        row.extend(&s.tau_u);
        row.push(s.q_tilde_norm);
        row.push(s.w_tilde_norm);
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Header and numeric rows of a trace CSV.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| HarnessError::Invalid(format!("{v}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn write_jsonl<I, T>(path: &Path, records: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = T>,
    T: Serialize,
{
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<serde_json::Value>, HarnessError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// One record per iteration followed by one summary record.
pub fn bound_trace_records(trace: &BoundTrace) -> Vec<serde_json::Value> {
    let mut out: Vec<_> = trace
        .loop1
        .iter()
        .enumerate()
        .map(|(i, b)| json!({"loop": 1, "i": i + 1, "s": b.s, "q": b.q}))
        .chain(
            trace
                .loop2
                .iter()
                .enumerate()
                .map(|(i, b)| json!({"loop": 2, "i": i + 1, "s": b.s, "q": b.q})),
        )
        .collect();
    out.push(json!({
        "summary": {
            "eta": trace.eta,
            "loop1_iterations": trace.loop1.len(),
            "loop2_iterations": trace.loop2.len(),
            "loop2_status": trace.loop2_status,
            "s_inf": trace.s_inf,
            "q_inf": trace.q_inf,
            "s_inf_prime": trace.s_inf_prime,
            "q_inf_prime": trace.q_inf_prime,
            "q_bound": trace.q_final,
            "omega_bound_rad_s": trace.omega_bound,
            "omega_bound_deg_s": rad_to_deg(trace.omega_bound),
            "theta_bound_deg": rad_to_deg(trace.theta_bound),
        }
    }));
    out
}

pub fn write_bound_trace_jsonl(trace: &BoundTrace, path: &Path) -> Result<(), HarnessError> {
    write_jsonl(path, bound_trace_records(trace))
}

/// One record per instance followed by the campaign maxima.
pub fn write_campaign_jsonl(summary: &CampaignSummary, path: &Path) -> Result<(), HarnessError> {
    let instances = summary
        .instances
        .iter()
        .map(|i| serde_json::to_value(i).expect("serializable"));
    let tail = json!({
        "campaign": {
            "scenario": summary.scenario,
            "seed": summary.seed,
            "instances": summary.instances.len(),
            "failed": summary.failed,
            "tail_fraction": summary.tail_fraction,
            "max": summary.max,
        }
    });
    write_jsonl(path, instances.chain(std::iter::once(tail)))
}

#[derive(Debug, Clone, Serialize)]
struct Axis {
    label: &'static str,
    unit: &'static str,
}

#[derive(Debug, Clone, Serialize)]
struct Series {
    name: String,
    x: Axis,
    y: Axis,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_y: Option<bool>,
    points: Vec<[f64; 2]>,
}

/// Time histories of the tracking errors and commands, each paired with
/// axis labels and units.
pub fn write_plot_data(trace: &RunTrace, path: &Path) -> Result<(), HarnessError> {
    let time = || Axis {
        label: "time",
        unit: "s",
    };
    let pts = |f: &dyn Fn(&super::sim::TraceSample) -> f64| -> Vec<[f64; 2]> {
        trace.samples.iter().map(|s| [s.t, f(s)]).collect()
    };
    let mut series = vec![
        Series {
            name: "theta_e".into(),
            x: time(),
            y: Axis {
                label: "principal angle of the attitude tracking error",
                unit: "deg",
            },
            log_y: Some(true),
            points: pts(&|s| rad_to_deg(s.theta_e)),
        },
        Series {
            name: "omega_e_norm".into(),
            x: time(),
            y: Axis {
                label: "angular velocity tracking error norm",
                unit: "deg/s",
            },
            log_y: Some(true),
            points: pts(&|s| rad_to_deg(s.omega_e.norm())),
        },
        Series {
            name: "s_norm".into(),
            x: time(),
            y: Axis {
                label: "sliding variable norm",
                unit: "rad/s",
            },
            log_y: Some(true),
            points: pts(&|s| s.s_norm),
        },
    ];
    for i in 0..trace.actuator_count() {
        series.push(Series {
            name: format!("tau_u{}", i + 1),
            x: time(),
            y: Axis {
                label: "command torque",
                unit: "N·m",
            },
            log_y: None,
            points: pts(&move |s| s.tau_u[i]),
        });
    }
    let doc = json!({
        "scenario": trace.scenario,
        "seed": trace.seed,
        "series": series,
    });
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.flush()?;
    Ok(())
}

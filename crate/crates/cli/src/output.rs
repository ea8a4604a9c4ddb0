//! Report serialization: JSON with floats fixed at 12 significant digits,
//! and plain-text tables.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use wigner::analysis::{FrameComparison, JointDistribution, ThetaRecovery};
use wigner::runner::RunReport;

use crate::scenario_file::SCHEMA_VERSION;

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    // Exponent form keeps the digit count fixed regardless of magnitude.
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json<T: Serialize>(command: &str, body: &T) -> serde_json::Result<String> {
    let mut value = serde_json::to_value(Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        body,
    })?;
    round_floats(&mut value);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

fn fmt_p(p: f64) -> String {
    format!("{:.12}", round12(p))
}

pub fn joint_table(out: &mut String, joint: &JointDistribution) {
    let names: Vec<String> = joint
        .variables
        .iter()
        .map(|v| format!("{}/{}", v.event_id, v.actor))
        .collect();
    let widths: Vec<usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            joint
                .entries
                .iter()
                .map(|e| e.outcome[i].chars().count())
                .chain([n.chars().count()])
                .max()
                .unwrap_or(1)
        })
        .collect();
    for (n, w) in names.iter().zip(&widths) {
        let _ = write!(out, "{n:<w$}  ");
    }
    let _ = writeln!(out, "probability");
    for e in &joint.entries {
        for (o, w) in e.outcome.iter().zip(&widths) {
            let _ = write!(out, "{o:<w$}  ");
        }
        let _ = writeln!(out, "{}", fmt_p(e.probability));
    }
}

pub fn run_header(out: &mut String, r: &RunReport) {
    let _ = writeln!(
        out,
        "scenario {}  beta {}  policy {}  semantics {}",
        r.scenario_id,
        round12(r.beta),
        r.policy,
        r.semantics
    );
    let _ = writeln!(out, "order: {}", r.event_order.join(" < "));
    for p in &r.spacelike_order {
        let _ = writeln!(out, "spacelike pair {}/{}: {} first", p.pair.0, p.pair.1, p.first);
    }
    for (a, b) in &r.simultaneous {
        let _ = writeln!(out, "simultaneous within tolerance: {a}, {b} (ordered by id)");
    }
}

pub fn branch_table(out: &mut String, r: &RunReport) {
    let _ = writeln!(out, "{} branches", r.branches.len());
    for b in &r.branches {
        let labels: Vec<String> = b
            .outcomes
            .iter()
            .map(|o| format!("{}/{}={}", o.event_id, o.actor, o.label))
            .collect();
        let _ = writeln!(out, "  {}  {}", fmt_p(b.weight), labels.join(" "));
    }
}

pub fn comparison_table(c: &FrameComparison) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {}  policy {}  semantics {}",
        c.scenario_id, c.policy, c.semantics
    );
    let _ = writeln!(out, "\nbeta {}", round12(c.beta1));
    joint_table(&mut out, &c.joint1);
    let _ = writeln!(out, "\nbeta {}", round12(c.beta2));
    joint_table(&mut out, &c.joint2);
    let _ = writeln!(
        out,
        "\ntvd {}  {}",
        fmt_p(c.tvd),
        if c.consistent { "consistent" } else { "INCONSISTENT" }
    );
    out
}

pub fn recovery_table(r: &ThetaRecovery) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}  beta {}  theta {}", r.scenario_id, round12(r.beta), fmt_p(r.theta));
    let _ = writeln!(out, "A outcome  weight          record                  theta_hat");
    for b in &r.branches {
        let _ = writeln!(
            out,
            "{:<9}  {}  {:<22}  {}",
            b.a_outcome,
            fmt_p(b.weight),
            b.record,
            fmt_p(b.theta_hat)
        );
    }
    let _ = writeln!(out, "orthogonality residual {:e}", round12(r.orthogonality_residual));
    out
}

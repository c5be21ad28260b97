//! JSON document layout. Rationals are strings `a/b`, intervals are pairs of
//! such strings, verdicts are `"true"`, `"false"` or `"unknown"`.

use ppda::solver::{Interval, Oracle};
use ppda::{format_rational, Rational};
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::Global;

/// Version of the output layout; bumped on incompatible changes.
pub const FORMAT: u32 = 1;

pub struct Report {
    pub result: Value,
    /// Command-specific provenance, merged with the oracle counters.
    pub provenance: Map<String, Value>,
    pub summary: String,
}

pub fn rat(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

pub fn interval(x: &Interval) -> Value {
    json!([format_rational(x.lo()), format_rational(x.hi())])
}

pub fn success(command: &str, global: &Global, oracle: &Oracle, report: Report) -> Value {
    let (queries, external, refinements) = oracle.stats.snapshot();
    let mut provenance = Map::new();
    provenance.insert("backend".into(), json!(global.backend.to_string()));
    provenance.insert(
        "solver".into(),
        json!(oracle.solver.as_ref().map(|s| s.argv().join(" "))),
    );
    provenance.insert("oracle_queries".into(), json!(queries));
    provenance.insert("external_calls".into(), json!(external));
    provenance.insert("refinements".into(), json!(refinements));
    provenance.extend(report.provenance);
    json!({
        "format": FORMAT,
        "command": command,
        "ok": true,
        "result": report.result,
        "provenance": provenance,
    })
}

pub fn failure(command: &str, e: &CliError) -> Value {
    json!({
        "format": FORMAT,
        "command": command,
        "ok": false,
        "error": e.to_json(),
    })
}

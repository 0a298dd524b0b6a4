use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use crate::config::{from_tree, get_path, parse_value, set_path, Command, ScenarioConfig};
use crate::failure::Failure;
use crate::run::run;

/// One row of `sweep.csv`.
#[derive(Debug)]
pub struct SweepRow {
    pub index: usize,
    pub value: String,
    pub status: String,
    pub scalars: Vec<(String, String)>,
}

fn scalars(results: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Value::Object(map) = results {
        for (k, v) in map {
            match v {
                Value::Number(n) => out.push((k.clone(), n.to_string())),
                Value::Bool(b) => out.push((k.clone(), b.to_string())),
                Value::String(s) => out.push((k.clone(), s.clone())),
                _ => {}
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs `command` once per value of `axis`, each in `out/run-XXX`, then writes `out/sweep.csv`.
pub fn sweep(
    command: Command,
    base: &ScenarioConfig,
    axis: &str,
    values: &[String],
    out: &Path,
) -> Result<Vec<SweepRow>, Failure> {
    let tree = serde_json::to_value(base).expect("config serializes");
    match get_path(&tree, axis) {
        Some(Value::Number(_)) | Some(Value::Bool(_)) | Some(Value::String(_)) => {}
        Some(Value::Null) => {}
        _ => return Err(Failure::Validation(format!("sweep axis `{axis}` is not a scalar config field"))),
    }
    let values: Vec<String> = values.iter().filter(|v| !v.trim().is_empty()).cloned().collect();
    let mut configs = Vec::with_capacity(values.len());
    for v in &values {
        let mut t = tree.clone();
        set_path(&mut t, axis, parse_value(v))?;
        configs.push(from_tree(t));
    }
    fs::create_dir_all(out)?;
    let rows: Vec<SweepRow> = configs
        .into_par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let result = cfg.and_then(|c| run(command, &c, &out.join(format!("run-{i:03}"))));
            let (status, scalars) = match result {
                Ok(r) => ("ok".to_string(), scalars(&r.results)),
                Err(e) => (format!("error:{}", e.tag()), Vec::new()),
            };
            SweepRow {
                index: i,
                value: values[i].clone(),
                status,
                scalars,
            }
        })
        .collect();
    let keys: BTreeSet<&str> = rows.iter().flat_map(|r| r.scalars.iter().map(|(k, _)| k.as_str())).collect();
    let mut text = String::from("index,value,status");
    for k in &keys {
        text.push(',');
        text.push_str(k);
    }
    text.push('\n');
    for r in &rows {
        text.push_str(&format!("{},{},{}", r.index, csv_field(&r.value), csv_field(&r.status)));
        for k in &keys {
            let cell = r.scalars.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str()).unwrap_or("");
            text.push(',');
            text.push_str(&csv_field(cell));
        }
        text.push('\n');
    }
    let tmp = out.join("sweep.csv.tmp");
    fs::File::create(&tmp)?.write_all(text.as_bytes())?;
    fs::rename(tmp, out.join("sweep.csv"))?;
    Ok(rows)
}

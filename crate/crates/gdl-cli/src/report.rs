//! Run reports: full-precision JSON payloads, one CSV per scan series, and a
//! manifest carrying the config hash and the only timestamp.
//!
//! Result floats are printed with 17 significant digits so a reader recovers
//! the exact bits; the results subtree is emitted by a small writer because
//! the default float formatting does not pin the digit count.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// 17-significant-digit decimal form of a float (exact round trip).
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        format!("\"{x}\"")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesPayload {
    pub axis: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Everything a run emits besides the state itself.
#[derive(Debug, Default)]
pub struct RunReport {
    /// Scan payloads keyed by name (each becomes one CSV).
    pub series: BTreeMap<String, SeriesPayload>,
    /// Scalar derived quantities (gap, defects, slopes, bounds, biases).
    pub scalars: BTreeMap<String, f64>,
    /// Integer-valued outcomes (kernel dimension, measured mixing time).
    pub counts: BTreeMap<String, u64>,
    /// Wall time of the computation; excluded from determinism comparisons.
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn scalar(&mut self, key: &str, value: f64) {
        self.scalars.insert(key.to_string(), value);
    }

    pub fn count(&mut self, key: &str, value: u64) {
        self.counts.insert(key.to_string(), value);
    }

    pub fn add_series(&mut self, name: &str, axis: &str, grid: Vec<f64>, values: Vec<f64>) {
        self.series.insert(
            name.to_string(),
            SeriesPayload { axis: axis.to_string(), grid, values },
        );
    }

    /// The deterministic payload subtree (no wall time), as JSON text.
    pub fn results_json(&self) -> String {
        let mut out = String::from("{\n    \"scalars\": {");
        let mut first = true;
        for (k, v) in &self.scalars {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("\n      \"{k}\": {}", f17(*v)));
        }
        out.push_str(if self.scalars.is_empty() { "},\n" } else { "\n    },\n" });
        out.push_str("    \"counts\": {");
        first = true;
        for (k, v) in &self.counts {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("\n      \"{k}\": {v}"));
        }
        out.push_str(if self.counts.is_empty() { "},\n" } else { "\n    },\n" });
        out.push_str("    \"series\": {");
        first = true;
        for (name, s) in &self.series {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("\n      \"{name}\": {{\n        \"axis\": \"{}\",", s.axis));
            let grid: Vec<String> = s.grid.iter().map(|&x| f17(x)).collect();
            let values: Vec<String> = s.values.iter().map(|&x| f17(x)).collect();
            out.push_str(&format!("\n        \"grid\": [{}],", grid.join(", ")));
            out.push_str(&format!("\n        \"values\": [{}]\n      }}", values.join(", ")));
        }
        out.push_str(if self.series.is_empty() { "}\n  }" } else { "\n    }\n  }" });
        out
    }

    pub fn report_json(&self, config: &RunConfig) -> String {
        let config_text = serde_json::to_string_pretty(config).expect("config serializes");
        let config_indented = config_text.replace('\n', "\n  ");
        format!(
            "{{\n  \"config\": {config_indented},\n  \"versions\": {{\n    \"gdl\": \"{}\"\n  }},\n  \"wall_time_secs\": {},\n  \"results\": {}\n}}\n",
            env!("CARGO_PKG_VERSION"),
            f17(self.wall_time_secs),
            self.results_json()
        )
    }
}

pub fn config_hash(config: &RunConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Write report.json, one `series[_name].csv` per scan (header `axis,value`),
/// and manifest.json (config hash + the only timestamp).
pub fn write_report(
    report: &RunReport,
    config: &RunConfig,
    dir: &Path,
) -> std::io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let text = report.report_json(config);
    // the emitted text must parse back as JSON
    debug_assert!(serde_json::from_str::<serde_json::Value>(&text).is_ok());
    fs::write(dir.join("report.json"), text)?;
    written.push("report.json".to_string());
    let single = report.series.len() == 1;
    for (name, s) in &report.series {
        let fname = if single { "series.csv".to_string() } else { format!("series_{name}.csv") };
        let mut text = String::from("axis,value\n");
        for (g, v) in s.grid.iter().zip(&s.values) {
            text.push_str(&format!("{},{}\n", f17(*g), f17(*v)));
        }
        fs::write(dir.join(&fname), text)?;
        written.push(fname);
    }
    let manifest = serde_json::json!({
        "config_sha256": config_hash(config),
        "timestamp_unix_secs": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "tool": format!("gdl {}", env!("CARGO_PKG_VERSION")),
        "files": written.clone(),
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    written.push("manifest.json".to_string());
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f17_round_trips_exactly() {
        for &x in &[
            1.0 / 3.0,
            std::f64::consts::PI,
            1.044802472334e0,
            -2.2250738585072014e-308,
            6.02e23,
        ] {
            let text = f17(x);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "round trip failed for {x}");
        }
    }

    #[test]
    fn report_json_is_valid_and_ordered() {
        let mut rep = RunReport::default();
        rep.scalar("gap", 1.0448024);
        rep.count("kernel_dim", 1);
        rep.add_series("bias", "alpha", vec![0.02, 0.04], vec![1e-7, 4e-7]);
        let text = rep.report_json(&RunConfig::defaults());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["results"]["scalars"]["gap"].as_f64().is_some());
        assert_eq!(v["results"]["counts"]["kernel_dim"].as_u64(), Some(1));
    }

    #[test]
    fn series_csv_has_header_and_rows() {
        let mut rep = RunReport::default();
        rep.add_series("bias", "alpha", vec![0.02, 0.04], vec![1e-7, 4e-7]);
        let dir = std::env::temp_dir().join(format!("gdl-report-test-{}", std::process::id()));
        let files = write_report(&rep, &RunConfig::defaults(), &dir).unwrap();
        assert!(files.contains(&"series.csv".to_string()));
        let text = std::fs::read_to_string(dir.join("series.csv")).unwrap();
        assert!(text.starts_with("axis,value\n"));
        assert_eq!(text.lines().count(), 3);
        std::fs::remove_dir_all(&dir).ok();
    }
}

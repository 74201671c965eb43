//! Run configuration: one JSON document drives every subcommand, with
//! dotted-path command-line overrides applied before deserialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eplocator::Knob;
use crate::error::{Error, Result};
use crate::model::{validate_spec, ParameterPath, ParameterPoint, SystemSpec};
use crate::observables::Thresholds;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<ParameterPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ep: Option<EpConfig>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub path: ParameterPath,
    pub samples: usize,
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default = "default_window")]
    pub plateau_window: usize,
    #[serde(default = "default_delta")]
    pub plateau_delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpConfig {
    pub pair: [usize; 2],
    pub knobs: [Knob; 2],
    pub base: ParameterPoint,
    /// Search seed for find-ep; loop center for encircle.
    pub seed: [f64; 2],
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Plot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
    pub precision: usize,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("."),
            prefix: "run".into(),
            precision: 12,
            formats: vec![Format::Csv],
        }
    }
}

fn default_true() -> bool {
    true
}
fn default_window() -> usize {
    5
}
fn default_delta() -> f64 {
    1e-3
}
fn default_radius() -> f64 {
    0.1
}
fn default_steps() -> usize {
    200
}

/// Applies one `dotted.path=json` edit to a JSON document. Path segments
/// descend through objects by key and arrays by index; the final segment is
/// set (or inserted, for objects) to the parsed JSON value.
pub fn apply_override(doc: &mut serde_json::Value, edit: &str) -> Result<()> {
    let (path, raw) = edit
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{edit}' is not of the form path=json")))?;
    let new: serde_json::Value = serde_json::from_str(raw)
        .map_err(|e| Error::Config(format!("override value '{raw}' is not valid JSON: {e}")))?;
    let segments: Vec<&str> = path.split('.').collect();
    let mut cur = doc;
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        match cur {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert((*seg).to_string(), new);
                    return Ok(());
                }
                // defaulted sections may be absent: materialize them
                cur = map
                    .entry((*seg).to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()));
            }
            serde_json::Value::Array(arr) => {
                let idx: usize = seg.parse().map_err(|_| {
                    Error::Config(format!("override path '{path}': '{seg}' is not an array index"))
                })?;
                let len = arr.len();
                let slot = arr.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!("override path '{path}': index {idx} out of range {len}"))
                })?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                cur = slot;
            }
            _ => {
                return Err(Error::Config(format!(
                    "override path '{path}': '{seg}' descends into a scalar"
                )))
            }
        }
    }
    unreachable!("split always yields at least one segment")
}

/// Reads, patches, deserializes and validates a run configuration.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for edit in overrides {
        apply_override(&mut doc, edit)?;
    }
    let cfg: RunConfig = serde_json::from_value(doc)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let problems = validate_spec(&cfg.system);
    if !problems.is_empty() {
        return Err(Error::Spec(problems));
    }
    if !(6..=17).contains(&cfg.output.precision) {
        return Err(Error::Config(format!(
            "output.precision must be in [6, 17], got {}",
            cfg.output.precision
        )));
    }
    if let Some(sweep) = &cfg.sweep {
        sweep.path.validate(cfg.system.n_channels())?;
        if sweep.samples < 2 {
            return Err(Error::Config("sweep.samples must be at least 2".into()));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> serde_json::Value {
        json!({
            "system": {
                "n_states": 2,
                "diag_energies": [
                    {"e0": 0.0, "e1": 0.0, "gamma0": 0.0},
                    {"e0": 1.0, "e1": 0.0, "gamma0": 0.0}
                ],
                "channels": [{"w": [[1.0, 0.0], [1.0, 0.0]], "label": "c"}],
                "conventions": {"width_sign": "physical_minus"}
            },
            "sweep": {
                "path": {
                    "points": [
                        {"a": 0.0, "omegas": [[0.2, 0.0]]},
                        {"a": 1.0, "omegas": [[0.2, 0.0]]}
                    ],
                    "closed": false
                },
                "samples": 11
            }
        })
    }

    fn write_tmp(v: &serde_json::Value) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), serde_json::to_string_pretty(v).unwrap()).unwrap();
        f
    }

    #[test]
    fn round_trip_and_defaults() {
        let f = write_tmp(&minimal());
        let cfg = parse_config(f.path(), &[]).unwrap();
        assert_eq!(cfg.system.n_states, 2);
        let sweep = cfg.sweep.as_ref().unwrap();
        assert_eq!(sweep.samples, 11);
        assert!(sweep.parallel);
        assert_eq!(sweep.plateau_window, 5);
        assert_eq!(cfg.output.precision, 12);
        assert_eq!(cfg.output.formats, vec![Format::Csv]);
        // echo re-serializes to an equivalent config
        let echoed: RunConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(echoed.system.n_states, cfg.system.n_states);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let mut v = minimal();
        v["frobnicate"] = json!(true);
        let f = write_tmp(&v);
        let err = parse_config(f.path(), &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains("frobnicate"));
    }

    #[test]
    fn malformed_complex_is_rejected() {
        let mut v = minimal();
        v["system"]["channels"][0]["w"][0] = json!([1.0, 0.0, 3.0]);
        let f = write_tmp(&v);
        let err = parse_config(f.path(), &[]).unwrap_err();
        assert!(err.to_string().contains("[re, im]"), "{err}");
    }

    #[test]
    fn overrides_edit_nested_values() {
        let f = write_tmp(&minimal());
        let cfg = parse_config(
            f.path(),
            &[
                "sweep.samples=501".into(),
                "sweep.path.points.0.a=-2.0".into(),
                "output.prefix=\"alt\"".into(),
                "thresholds.t_prob=0.2".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.sweep.as_ref().unwrap().samples, 501);
        assert_eq!(cfg.sweep.as_ref().unwrap().path.points[0].a, -2.0);
        assert_eq!(cfg.output.prefix, "alt");
        assert_eq!(cfg.thresholds.t_prob, 0.2);
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        let f = write_tmp(&minimal());
        for bad in [
            "sweep.samples",          // no '='
            "sweep.samples=oops",     // not JSON
            "sweep.nope.deep=1",      // missing key
            "sweep.path.points.7.a=1", // index out of range
            "system.n_states.x=1",    // descends into a scalar
            "output.precision=42",    // outside [6, 17]
        ] {
            let err = parse_config(f.path(), &[bad.to_string()]).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad} -> {err}");
        }
    }

    #[test]
    fn invalid_system_is_rejected_at_parse() {
        let mut v = minimal();
        v["system"]["n_states"] = json!(1);
        let f = write_tmp(&v);
        assert!(matches!(parse_config(f.path(), &[]), Err(Error::Spec(_))));
    }
}

//! Strict JSON config parsing for sweep runs.
//!
//! Unknown keys are rejected with a closest-key suggestion; type mismatches
//! report the offending JSON path. `--set key=value` overrides are applied
//! on top of the file before validation, so they win.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

use ddlab_core::estimators::EstimatorSpec;
use ddlab_core::harness::{FeatureAxis, GammaPolicy, ReportKind, SweepConfig, SweepKind};

pub const VALID_KEYS: [&str; 16] = [
    "sweep",
    "grid",
    "p",
    "n",
    "d",
    "feature_count",
    "feature_axis",
    "test_size",
    "sigma2",
    "b2",
    "estimator",
    "gamma_policy",
    "trials",
    "seed",
    "report",
    "threads",
];

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Closest valid key to an unknown one, scoring both the whole key and its
/// truncation to the unknown key's length (so `gama` finds `gamma_policy`).
fn suggest(unknown: &str) -> Option<&'static str> {
    let mut best: Option<(usize, &'static str)> = None;
    for key in VALID_KEYS {
        let full = levenshtein(unknown, key);
        let prefix_len = unknown.len().min(key.len());
        let prefix = levenshtein(unknown, &key[..prefix_len]);
        let score = full.min(prefix + 1);
        if best.map_or(true, |(s, _)| score < s) {
            best = Some((score, key));
        }
    }
    best.filter(|&(s, _)| s <= 3).map(|(_, k)| k)
}

fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{raw}` is not of the form key=value"))?;
    // String-typed fields keep the raw text; everything else is parsed as
    // JSON when possible so numbers and arrays round-trip.
    let string_typed = [
        "sweep",
        "estimator",
        "gamma_policy",
        "feature_axis",
        "report",
    ];
    let v = if string_typed.contains(&key) {
        Value::String(value.to_string())
    } else {
        serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()))
    };
    Ok((key.to_string(), v))
}

fn expect_u64(v: &Value, path: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| anyhow!("config error at `{path}`: expected a nonnegative integer, got {v}"))
}

fn expect_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| anyhow!("config error at `{path}`: expected a number, got {v}"))
}

fn expect_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| anyhow!("config error at `{path}`: expected a string, got {v}"))
}

fn parse_grid(v: &Value) -> Result<Vec<usize>> {
    let arr = v
        .as_array()
        .ok_or_else(|| anyhow!("config error at `/grid`: expected an array, got {v}"))?;
    arr.iter()
        .enumerate()
        .map(|(i, e)| Ok(expect_u64(e, &format!("/grid/{i}"))? as usize))
        .collect()
}

fn parse_estimator(s: &str) -> Result<EstimatorSpec> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let needs = |what: &str| anyhow!("estimator `{s}`: `{kind}` needs `{kind}:{what}`");
    let parse_num = |a: &str| -> Result<f64> {
        a.parse::<f64>()
            .with_context(|| format!("estimator `{s}`: `{a}` is not a number"))
    };
    match kind {
        "ols" => Ok(EstimatorSpec::Ols),
        "ridge" => {
            let a = arg.ok_or_else(|| needs("LAMBDA"))?;
            Ok(EstimatorSpec::Ridge {
                lambda: parse_num(a)?,
            })
        }
        "dropout_scalar" => {
            let a = arg.ok_or_else(|| needs("GAMMA"))?;
            Ok(EstimatorSpec::DropoutScalar {
                gamma: parse_num(a)?,
            })
        }
        "dropout_spectral" => {
            let a = arg.ok_or_else(|| needs("GAMMA"))?;
            Ok(EstimatorSpec::DropoutSpectral {
                gamma: parse_num(a)?,
            })
        }
        "dropout_diagonal" => Ok(EstimatorSpec::DropoutDiagonal { gammas: vec![] }),
        other => bail!(
            "unknown estimator `{other}`; expected ols, ridge:LAMBDA, dropout_scalar:GAMMA, \
             dropout_spectral:GAMMA, or dropout_diagonal"
        ),
    }
}

fn parse_policy(s: &str) -> Result<GammaPolicy> {
    if s == "optimal" || s == "optimal_per_point" {
        return Ok(GammaPolicy::OptimalPerPoint);
    }
    if let Some(rest) = s.strip_prefix("fixed:") {
        let g: f64 = rest
            .parse()
            .with_context(|| format!("gamma_policy `{s}`: `{rest}` is not a number"))?;
        return Ok(GammaPolicy::Fixed(g));
    }
    if let Some(rest) = s.strip_prefix("sweep:") {
        let list: Result<Vec<f64>> = rest
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .with_context(|| format!("gamma_policy `{s}`: `{x}` is not a number"))
            })
            .collect();
        return Ok(GammaPolicy::Sweep(list?));
    }
    bail!("unknown gamma_policy `{s}`; expected optimal, fixed:GAMMA, or sweep:G1,G2,...")
}

/// Parse a config file plus overrides into a validated [`SweepConfig`] for
/// the sweep kind the CLI subcommand selected.
pub fn parse_config(path: &Path, overrides: &[String], kind: SweepKind) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let root: Value = serde_json::from_str(&text)
        .with_context(|| format!("config {} is not valid JSON", path.display()))?;
    let mut map: BTreeMap<String, Value> = match root {
        Value::Object(m) => m.into_iter().collect(),
        other => bail!("config root must be a JSON object, got {other}"),
    };
    for raw in overrides {
        let (k, v) = parse_override(raw)?;
        map.insert(k, v);
    }

    for key in map.keys() {
        if !VALID_KEYS.contains(&key.as_str()) {
            match suggest(key) {
                Some(s) => bail!("unknown config field `{key}`; closest valid key is `{s}`"),
                None => bail!(
                    "unknown config field `{key}`; valid keys: {}",
                    VALID_KEYS.join(", ")
                ),
            }
        }
    }

    if let Some(v) = map.get("sweep") {
        let declared = expect_str(v, "/sweep")?;
        if declared != kind.label() {
            bail!(
                "config declares sweep `{declared}` but the `{}` command was invoked",
                kind.label()
            );
        }
    }

    let mut cfg = SweepConfig {
        sweep: kind,
        ..SweepConfig::default()
    };
    if let Some(v) = map.get("grid") {
        cfg.grid = parse_grid(v)?;
    }
    if let Some(v) = map.get("p") {
        cfg.p = expect_u64(v, "/p")? as usize;
    }
    if let Some(v) = map.get("n") {
        cfg.n = Some(expect_u64(v, "/n")? as usize);
    }
    if let Some(v) = map.get("d") {
        cfg.input_dim = Some(expect_u64(v, "/d")? as usize);
    }
    if let Some(v) = map.get("feature_count") {
        cfg.feature_count = Some(expect_u64(v, "/feature_count")? as usize);
    }
    if let Some(v) = map.get("feature_axis") {
        cfg.feature_axis = match expect_str(v, "/feature_axis")? {
            "samples" => FeatureAxis::Samples,
            "features" => FeatureAxis::Features,
            other => bail!("config error at `/feature_axis`: expected samples|features, got {other}"),
        };
    }
    if let Some(v) = map.get("test_size") {
        cfg.test_size = expect_u64(v, "/test_size")? as usize;
    }
    if let Some(v) = map.get("sigma2") {
        cfg.sigma2 = expect_f64(v, "/sigma2")?;
    }
    if let Some(v) = map.get("b2") {
        cfg.b2 = expect_f64(v, "/b2")?;
    }
    if let Some(v) = map.get("estimator") {
        cfg.estimator = parse_estimator(expect_str(v, "/estimator")?)?;
    }
    if let Some(v) = map.get("gamma_policy") {
        cfg.gamma_policy = parse_policy(expect_str(v, "/gamma_policy")?)?;
    }
    if let Some(v) = map.get("trials") {
        cfg.trials = expect_u64(v, "/trials")? as usize;
    }
    if let Some(v) = map.get("seed") {
        cfg.master_seed = expect_u64(v, "/seed")?;
    }
    if let Some(v) = map.get("report") {
        cfg.report = match expect_str(v, "/report")? {
            "excess" => ReportKind::Excess,
            "total" => ReportKind::Total,
            "both" => ReportKind::Both,
            other => bail!("config error at `/report`: expected excess|total|both, got {other}"),
        };
    }
    if let Some(v) = map.get("threads") {
        cfg.threads = Some(expect_u64(v, "/threads")? as usize);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_cfg(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let f = write_cfg(r#"{"sweep":"samples","p":500,"grid":[100,500,1000],"sigma2":0.25}"#);
        let cfg = parse_config(f.path(), &[], SweepKind::Samples).unwrap();
        assert_eq!(cfg.trials, 1000);
        assert_eq!(cfg.report, ReportKind::Both);
        assert_eq!(cfg.b2, 1.0);
        assert_eq!(cfg.master_seed, 0);
        assert_eq!(cfg.grid, vec![100, 500, 1000]);
    }

    #[test]
    fn override_wins_over_file() {
        let f = write_cfg(
            r#"{"sweep":"samples","p":20,"grid":[10,40],"sigma2":0.25,"gamma_policy":"optimal","estimator":"dropout_scalar:0.5"}"#,
        );
        let cfg = parse_config(
            f.path(),
            &["gamma_policy=fixed:0.8".into(), "trials=7".into()],
            SweepKind::Samples,
        )
        .unwrap();
        assert_eq!(cfg.gamma_policy, GammaPolicy::Fixed(0.8));
        assert_eq!(cfg.trials, 7);
    }

    #[test]
    fn unknown_key_suggests_closest() {
        let f = write_cfg(r#"{"sweep":"samples","p":20,"grid":[10],"sigma2":0.25,"gama":0.8}"#);
        let err = parse_config(f.path(), &[], SweepKind::Samples)
            .unwrap_err()
            .to_string();
        assert!(err.contains("gama"), "{err}");
        assert!(err.contains("gamma_policy"), "{err}");
    }

    #[test]
    fn type_mismatch_names_path() {
        let f = write_cfg(r#"{"sweep":"samples","p":20,"grid":[10,"x"],"sigma2":0.25}"#);
        let err = parse_config(f.path(), &[], SweepKind::Samples)
            .unwrap_err()
            .to_string();
        assert!(err.contains("/grid/1"), "{err}");
    }

    #[test]
    fn sweep_kind_mismatch_is_rejected() {
        let f = write_cfg(r#"{"sweep":"model","p":20,"grid":[10],"sigma2":0.25}"#);
        assert!(parse_config(f.path(), &[], SweepKind::Samples).is_err());
    }

    #[test]
    fn estimator_and_policy_grammar() {
        assert_eq!(parse_estimator("ols").unwrap(), EstimatorSpec::Ols);
        assert_eq!(
            parse_estimator("ridge:125").unwrap(),
            EstimatorSpec::Ridge { lambda: 125.0 }
        );
        assert_eq!(
            parse_estimator("dropout_spectral:0.8").unwrap(),
            EstimatorSpec::DropoutSpectral { gamma: 0.8 }
        );
        assert!(parse_estimator("rigde:1").is_err());
        assert_eq!(
            parse_policy("sweep:0.6,0.8").unwrap(),
            GammaPolicy::Sweep(vec![0.6, 0.8])
        );
        assert!(parse_policy("fixed").is_err());
    }
}

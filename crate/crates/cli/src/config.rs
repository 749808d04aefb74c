//! Flat `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Durations accept a
//! unit suffix (`s`, `m`, `h`) and are otherwise taken as ticks.

use std::fmt::Write as _;
use std::str::FromStr;

use chordrep::dynamic::UpdateMode;
use chordrep::sim::{ScenarioConfig, HOUR, MINUTE, SECOND};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Keys understood by [`apply`], in canonical order.
pub const SCENARIO_KEYS: [&str; 25] = [
    "nodes",
    "bits",
    "algorithm",
    "replicas",
    "r_min",
    "r_max",
    "maintenance_per_half_life",
    "items_per_node",
    "item_size",
    "churn",
    "fetches",
    "updates",
    "seed",
    "repeats",
    "lifetime_mean",
    "replacement_delay",
    "chord_repair_interval",
    "rtt_timeout",
    "recursive_timeout",
    "max_retries",
    "core_first",
    "remove_single",
    "update_mode",
    "overload_threshold",
    "warmup_rounds",
];

/// Splits text into `(key, value)` pairs, keeping file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses one `--set key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("bad value `{value}` for `{key}`"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

/// `none`/`auto` as absent, otherwise a number.
fn optional<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>> {
    if value == none {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

pub fn parse_duration(key: &str, value: &str) -> Result<u64> {
    let (digits, unit) = match value.char_indices().last() {
        Some((i, 's')) => (&value[..i], SECOND),
        Some((i, 'm')) => (&value[..i], MINUTE),
        Some((i, 'h')) => (&value[..i], HOUR),
        _ => (value, 1),
    };
    let n: u64 = num(key, digits.trim())?;
    n.checked_mul(unit).ok_or_else(|| bad(key, value))
}

fn parse_update_mode(key: &str, value: &str) -> Result<UpdateMode> {
    if value == "strict" {
        return Ok(UpdateMode::Strict);
    }
    value
        .strip_prefix("fast:")
        .and_then(|n| n.parse().ok())
        .map(|stop_after_empty| UpdateMode::Fast { stop_after_empty })
        .ok_or_else(|| bad(key, value))
}

fn render_update_mode(m: UpdateMode) -> String {
    match m {
        UpdateMode::Strict => "strict".into(),
        UpdateMode::Fast { stop_after_empty } => format!("fast:{stop_after_empty}"),
    }
}

/// Sets one scenario field. Returns `false` for a key that is not a
/// scenario key so callers can handle their own keys.
pub fn apply(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "nodes" => cfg.nodes = num(key, value)?,
        "bits" => cfg.bits = num(key, value)?,
        "algorithm" => cfg.algorithm = value.parse()?,
        "replicas" => cfg.replicas = num(key, value)?,
        "r_min" => cfg.r_min = num(key, value)?,
        "r_max" => cfg.r_max = num(key, value)?,
        "maintenance_per_half_life" | "s" => cfg.maintenance_per_half_life = num(key, value)?,
        "items_per_node" => cfg.items_per_node = num(key, value)?,
        "item_size" => cfg.item_size = num(key, value)?,
        "churn" => cfg.churn = value.parse()?,
        "fetches" => cfg.fetches = num(key, value)?,
        "updates" => cfg.updates = num(key, value)?,
        "seed" => cfg.seed = num(key, value)?,
        "repeats" => cfg.repeats = num(key, value)?,
        "lifetime_mean" => cfg.lifetime_mean = parse_duration(key, value)?,
        "replacement_delay" => cfg.replacement_delay = parse_duration(key, value)?,
        "chord_repair_interval" => cfg.chord_repair_interval = parse_duration(key, value)?,
        "rtt_timeout" => cfg.rtt_timeout = optional(key, value, "auto")?,
        "recursive_timeout" => cfg.recursive_timeout = optional(key, value, "auto")?,
        "max_retries" => cfg.max_retries = optional(key, value, "unlimited")?,
        "core_first" => cfg.core_first = flag(key, value)?,
        "remove_single" => cfg.remove_single = flag(key, value)?,
        "update_mode" => cfg.update_mode = parse_update_mode(key, value)?,
        "overload_threshold" => cfg.overload_threshold = optional(key, value, "none")?,
        "warmup_rounds" => cfg.warmup_rounds = num(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Builds a scenario from pairs, rejecting unknown keys.
pub fn scenario_from_pairs(pairs: &[(String, String)]) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    for (k, v) in pairs {
        if !apply(&mut cfg, k, v)? {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Every scenario field as `key = value` lines in [`SCENARIO_KEYS`] order.
/// Parsing the result gives back the same config.
pub fn canonical(cfg: &ScenarioConfig) -> String {
    let opt = |v: Option<u64>, none: &str| v.map_or(none.to_string(), |x| x.to_string());
    let values = [
        cfg.nodes.to_string(),
        cfg.bits.to_string(),
        cfg.algorithm.to_string(),
        cfg.replicas.to_string(),
        cfg.r_min.to_string(),
        cfg.r_max.to_string(),
        cfg.maintenance_per_half_life.to_string(),
        cfg.items_per_node.to_string(),
        cfg.item_size.to_string(),
        cfg.churn.to_string(),
        cfg.fetches.to_string(),
        cfg.updates.to_string(),
        cfg.seed.to_string(),
        cfg.repeats.to_string(),
        cfg.lifetime_mean.to_string(),
        cfg.replacement_delay.to_string(),
        cfg.chord_repair_interval.to_string(),
        opt(cfg.rtt_timeout, "auto"),
        opt(cfg.recursive_timeout, "auto"),
        opt(cfg.max_retries.map(u64::from), "unlimited"),
        cfg.core_first.to_string(),
        cfg.remove_single.to_string(),
        render_update_mode(cfg.update_mode),
        opt(cfg.overload_threshold, "none"),
        cfg.warmup_rounds.to_string(),
    ];
    let mut s = String::new();
    for (k, v) in SCENARIO_KEYS.iter().zip(values) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn hash_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chordrep::alloc::AllocationKind;
    use chordrep::sim::{Algorithm, ChurnMode};

    #[test]
    fn comments_and_blanks_are_skipped() {
        let p = parse_pairs("# x\n\nnodes = 50\n  seed=3  \n").unwrap();
        assert_eq!(p, vec![("nodes".into(), "50".into()), ("seed".into(), "3".into())]);
    }

    #[test]
    fn missing_equals_names_the_line() {
        let e = parse_pairs("nodes = 5\nbogus\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let e = scenario_from_pairs(&[("colour".into(), "red".into())]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn durations_take_units() {
        assert_eq!(parse_duration("d", "24h").unwrap(), 24 * HOUR);
        assert_eq!(parse_duration("d", "30m").unwrap(), 30 * MINUTE);
        assert_eq!(parse_duration("d", "7").unwrap(), 7);
        assert!(parse_duration("d", "h").is_err());
    }

    #[test]
    fn canonical_round_trips() {
        let mut cfg = ScenarioConfig {
            algorithm: Algorithm::Dynamic(AllocationKind::Finger),
            churn: ChurnMode::Catastrophe(0.25),
            max_retries: None,
            recursive_timeout: Some(9),
            update_mode: UpdateMode::Strict,
            overload_threshold: Some(40),
            ..ScenarioConfig::default()
        };
        cfg.r_max = 13;
        let text = canonical(&cfg);
        let back = scenario_from_pairs(&parse_pairs(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(canonical(&back), text);
    }

    #[test]
    fn hash_is_stable_and_short() {
        assert_eq!(hash_text("abc"), "ba7816bf8f01cfea");
    }
}

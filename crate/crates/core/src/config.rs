//! Flat `key = value` configuration with per-key provenance.
//!
//! Values come from three layers: built-in defaults, an optional file and
//! command-line flags, later layers winning. Blank lines and lines starting
//! with `#` are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::sat::BoundaryKind;
use crate::solution::SolutionChoice;
use crate::solver::{DataTiming, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Default,
    File,
    Flag,
}

/// Every recognized key.
pub const KEYS: [&str; 14] = [
    "dim",
    "order",
    "bc",
    "bc-x",
    "bc-y",
    "n",
    "levels",
    "tf",
    "cfl",
    "penalty-factor",
    "solution",
    "timing",
    "seed",
    "exec",
];

/// Raw entries of a config file, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", k + 1)))?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", k + 1)));
            }
            entries.push((key, value.trim().to_string()));
        }
        Ok(Self { entries })
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ConfigFile::parse(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub sim: SimulationConfig,
    pub levels: Vec<usize>,
    /// How independent levels or sweep points are scheduled.
    pub exec: Execution,
    pub provenance: BTreeMap<String, Provenance>,
}

pub const DEFAULT_LEVELS: [usize; 4] = [41, 81, 161, 321];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{key}` must be positive, got {value}")))
    }
}

fn parse_levels(value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|s| parse::<usize>("levels", s.trim())).collect()
}

fn parse_exec(value: &str) -> Result<Execution> {
    match value {
        "parallel" => Ok(Execution::Parallel),
        "sequential" => Ok(Execution::Sequential),
        other => Err(Error::Config(format!("`exec`: unknown mode `{other}`"))),
    }
}

fn apply(cfg: &mut ResolvedConfig, key: &str, value: &str) -> Result<()> {
    let sim = &mut cfg.sim;
    match key {
        "dim" => sim.dim = parse(key, value)?,
        "order" => sim.order = parse(key, value)?,
        "bc" => {
            let kind: BoundaryKind = parse(key, value)?;
            sim.bc_x = kind;
            sim.bc_y = kind;
        }
        "bc-x" => sim.bc_x = parse(key, value)?,
        "bc-y" => sim.bc_y = parse(key, value)?,
        "n" => sim.n = parse(key, value)?,
        "levels" => cfg.levels = parse_levels(value)?,
        "tf" => sim.tf = positive(key, value)?,
        "cfl" => sim.cfl = positive(key, value)?,
        "penalty-factor" => sim.penalty_factor = positive(key, value)?,
        "solution" => sim.solution = value.parse::<SolutionChoice>()?,
        "timing" => sim.timing = value.parse::<DataTiming>()?,
        "seed" => sim.seed = parse(key, value)?,
        "exec" => cfg.exec = parse_exec(value)?,
        other => return Err(Error::Config(format!("unknown key `{other}`"))),
    }
    Ok(())
}

/// Merges defaults, then `file`, then `flags`.
pub fn resolve(file: Option<&ConfigFile>, flags: &[(String, String)]) -> Result<ResolvedConfig> {
    let mut cfg = ResolvedConfig {
        sim: SimulationConfig::default(),
        levels: DEFAULT_LEVELS.to_vec(),
        exec: Execution::default(),
        provenance: KEYS.iter().map(|k| (k.to_string(), Provenance::Default)).collect(),
    };
    let layers = file.map(|f| (&f.entries[..], Provenance::File)).into_iter().chain([(flags, Provenance::Flag)]);
    for (entries, source) in layers {
        for (key, value) in entries {
            apply(&mut cfg, key, value)?;
            cfg.provenance.insert(key.clone(), source);
            if key == "bc" {
                cfg.provenance.insert("bc-x".into(), source);
                cfg.provenance.insert("bc-y".into(), source);
            }
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flag(k: &str, v: &str) -> (String, String) {
        (k.into(), v.into())
    }

    #[test]
    fn empty_file_gives_defaults() {
        let f = ConfigFile::parse("").unwrap();
        let c = resolve(Some(&f), &[]).unwrap();
        assert_eq!(c.sim.cfl, 0.1);
        assert_eq!(c.sim.tf, 2.0);
        assert_eq!(c.sim.penalty_factor, 1.2);
        assert!(c.provenance.values().all(|p| *p == Provenance::Default));
    }

    #[test]
    fn flags_override_file() {
        let f = ConfigFile::parse("# study\norder = 4\ntf=0.5\n").unwrap();
        let c = resolve(Some(&f), &[flag("order", "6")]).unwrap();
        assert_eq!(c.sim.order, 6);
        assert_eq!(c.sim.tf, 0.5);
        assert_eq!(c.provenance["order"], Provenance::Flag);
        assert_eq!(c.provenance["tf"], Provenance::File);
        assert_eq!(c.provenance["cfl"], Provenance::Default);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(resolve(None, &[flag("cfl", "-1")]).is_err());
        assert!(resolve(None, &[flag("order", "four")]).is_err());
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("order 4").is_err());
        assert!(load_config(Path::new("/nonexistent/wavelab.conf")).is_err());
    }

    #[test]
    fn bc_sets_both_directions() {
        let c = resolve(None, &[flag("bc", "neumann"), flag("levels", "21, 41")]).unwrap();
        assert_eq!((c.sim.bc_x, c.sim.bc_y), (BoundaryKind::Neumann, BoundaryKind::Neumann));
        assert_eq!(c.levels, [21, 41]);
        assert_eq!(c.provenance["bc-y"], Provenance::Flag);
    }

    #[test]
    fn underscores_are_accepted() {
        let f = ConfigFile::parse("penalty_factor = 1.5").unwrap();
        assert_eq!(resolve(Some(&f), &[]).unwrap().sim.penalty_factor, 1.5);
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::crane::CraneConfig;
use crate::error::{FslpError, Result};
use crate::outer::SolverParams;

/// Perturbed-instance benchmark settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Number of instances, a perfect square.
    pub instances: usize,
    /// Half-width of the squares the endpoints are drawn from, in m.
    pub radius: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            radius: 0.05,
            seed: 0,
        }
    }
}

/// Everything a run needs: `[solver]`, `[crane]` and `[bench]` tables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub solver: SolverParams,
    pub crane: CraneConfig,
    pub bench: BenchConfig,
}

const SECTIONS: [&str; 3] = ["solver", "crane", "bench"];

impl RunConfig {
    /// Reads a TOML file; missing keys take their defaults, unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FslpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e| FslpError::Config(format!("invalid TOML: {e}")))?;
        check_known_keys(&table, &Self::default().to_table()?, "")?;
        let cfg = Self::from_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FslpError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.crane.validate()?;
        if !(self.bench.radius >= 0.0 && self.bench.radius.is_finite()) {
            return Err(FslpError::Config(
                "bench.radius must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Applies `key=value` overrides. Keys are flat names such as `kappa_watch`, `horizon`
    /// or `bounds.time`; a `solver.`, `crane.` or `bench.` prefix resolves ambiguity. Values
    /// use TOML syntax (`0.5`, `[0.1, 10.0]`, `true`).
    pub fn apply_overrides<S: AsRef<str>>(&mut self, sets: &[S]) -> Result<()> {
        if sets.is_empty() {
            return Ok(());
        }
        let mut table = self.to_table()?;
        for set in sets {
            let set = set.as_ref();
            let (key, raw) = set
                .split_once('=')
                .ok_or_else(|| FslpError::Config(format!("override {set:?} is not key=value")))?;
            let path = resolve_key(&table, key.trim())?;
            let value = parse_value(raw.trim());
            assign(&mut table, &path, value)?;
        }
        let cfg = Self::from_table(table)?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    fn to_table(&self) -> Result<Table> {
        Table::try_from(self).map_err(|e| FslpError::Config(e.to_string()))
    }

    fn from_table(table: Table) -> Result<Self> {
        Value::Table(table)
            .try_into()
            .map_err(|e| FslpError::Config(format!("invalid configuration: {e}")))
    }
}

fn check_known_keys(given: &Table, known: &Table, prefix: &str) -> Result<()> {
    for (key, value) in given {
        let name = format!("{prefix}{key}");
        match (known.get(key), value) {
            (None, _) => return Err(FslpError::Config(format!("unknown key {name:?}"))),
            (Some(Value::Table(k)), Value::Table(g)) => {
                check_known_keys(g, k, &format!("{name}."))?
            }
            _ => {}
        }
    }
    Ok(())
}

fn lookup<'a>(table: &'a Table, path: &[&str]) -> Option<&'a Value> {
    let (first, rest) = path.split_first()?;
    let v = table.get(*first)?;
    match (rest.is_empty(), v) {
        (true, v) => Some(v),
        (false, Value::Table(t)) => lookup(t, rest),
        _ => None,
    }
}

fn resolve_key(table: &Table, key: &str) -> Result<Vec<String>> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(FslpError::Config(format!("malformed override key {key:?}")));
    }
    let leaf = |path: &[&str]| matches!(lookup(table, path), Some(v) if !v.is_table());
    if SECTIONS.contains(&parts[0]) && parts.len() > 1 && leaf(&parts) {
        return Ok(parts.iter().map(|s| s.to_string()).collect());
    }
    let hits: Vec<Vec<String>> = SECTIONS
        .iter()
        .filter_map(|s| {
            let mut path = vec![*s];
            path.extend(&parts);
            leaf(&path).then(|| path.iter().map(|p| p.to_string()).collect())
        })
        .collect();
    match hits.len() {
        1 => Ok(hits.into_iter().next().expect("one hit")),
        0 => Err(FslpError::Config(format!("unknown override key {key:?}"))),
        _ => Err(FslpError::Config(format!(
            "override key {key:?} is ambiguous, prefix it with solver., crane. or bench."
        ))),
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn assign(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("resolved paths are nonempty");
    let mut t = table;
    for p in parents {
        t = t
            .get_mut(p)
            .and_then(Value::as_table_mut)
            .ok_or_else(|| FslpError::Internal(format!("override path {path:?} vanished")))?;
    }
    // integers are accepted where floats are expected
    let value = match (t.get(last), value) {
        (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
        (_, v) => v,
    };
    t.insert(last.clone(), value);
    Ok(())
}

//! Layered settings (built-in defaults, then `--config` JSON, then flags) and
//! the run record written next to every output.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::io;

/// Tag key of internally tagged enums.
const TAG: &str = "style";

/// Objects naming another enum variant replace the default wholesale: a
/// different `style` tag, or a different key of a one-key object.
fn same_variant(b: &Map<String, Value>, o: &Map<String, Value>) -> bool {
    if o.get(TAG).is_some_and(|t| b.get(TAG) != Some(t)) {
        return false;
    }
    !(b.len() == 1 && o.len() == 1 && b.keys().next() != o.keys().next())
}

fn merge(base: &mut Value, over: &Value, path: &str) -> CliResult<()> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) if same_variant(b, o) => {
            for (k, v) in o {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(CliError::flags(format!("unknown config key `{here}`"))),
                }
            }
            Ok(())
        }
        (b, o) => {
            *b = o.clone();
            Ok(())
        }
    }
}

/// `defaults` overridden by the keys present in `overrides`.
pub fn layer<T: Serialize + DeserializeOwned + Clone>(
    defaults: &T,
    overrides: Option<&Value>,
) -> CliResult<T> {
    let Some(over) = overrides else {
        return Ok(defaults.clone());
    };
    if !over.is_object() {
        return Err(CliError::flags("config file must hold a JSON object"));
    }
    let mut base = serde_json::to_value(defaults).map_err(internal)?;
    merge(&mut base, over, "")?;
    serde_json::from_value(base).map_err(|e| CliError::flags(format!("invalid config: {e}")))
}

fn internal(e: serde_json::Error) -> CliError {
    CliError::io(format!("settings serialization failed: {e}"))
}

pub fn load_overrides(path: Option<&Path>) -> CliResult<Option<Value>> {
    path.map(io::read_json).transpose()
}

/// Resolved configuration of one invocation.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub threads: usize,
    pub log_level: String,
    pub config_file: Option<PathBuf>,
    pub inputs: Map<String, Value>,
    pub outputs: Map<String, Value>,
    pub settings: Value,
}

impl RunRecord {
    pub fn new(subcommand: &str, settings: &impl Serialize) -> CliResult<Self> {
        Ok(Self {
            tool: "regloss",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            threads: rayon::current_num_threads(),
            log_level: log::max_level().to_string().to_ascii_lowercase(),
            config_file: None,
            inputs: Map::new(),
            outputs: Map::new(),
            settings: serde_json::to_value(settings).map_err(internal)?,
        })
    }

    pub fn input(&mut self, key: &str, path: &Path) -> &mut Self {
        self.inputs.insert(key.into(), Value::String(path.display().to_string()));
        self
    }

    pub fn output(&mut self, key: &str, path: Option<&Path>) -> &mut Self {
        let v = path.map_or(Value::String("-".into()), |p| Value::String(p.display().to_string()));
        self.outputs.insert(key.into(), v);
        self
    }

    /// Writes the record to `explicit`, else next to `primary` as
    /// `<primary>.run.json`, else logs it.
    pub fn write(&self, explicit: Option<&Path>, primary: Option<&Path>) -> CliResult<()> {
        let text = io::to_json(self)?;
        let target = explicit.map(Path::to_path_buf).or_else(|| {
            primary.map(|p| {
                let mut s = p.as_os_str().to_owned();
                s.push(".run.json");
                PathBuf::from(s)
            })
        });
        match target {
            Some(p) => io::write_bytes(&p, text.as_bytes()),
            None => {
                log::info!("run record:\n{text}");
                Ok(())
            }
        }
    }
}

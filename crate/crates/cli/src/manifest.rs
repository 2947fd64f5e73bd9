use std::path::{Path, PathBuf};

use serde::Serialize;

/// Everything needed to re-run a command: the parsed parameters (defaults
/// included), the seed and the files read and written.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &'static str, params: &P, seed: Option<u64>) -> Self {
        RunManifest {
            tool: "fqi",
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            params: serde_json::to_value(params).expect("parameters serialize"),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// `--manifest` if given, else `<out>.manifest.json`, else
/// `fqi-<command>.manifest.json` in the working directory.
pub fn manifest_path(explicit: Option<&Path>, out: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match out {
        Some(o) => {
            let mut name = o.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        }
        None => PathBuf::from(format!("fqi-{command}.manifest.json")),
    }
}

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;

pub const TOOL_NAME: &str = "qanneal";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where one invocation writes its artifacts. Every file carries the tool
/// version and the config hash so results stay traceable; the resolved
/// config itself is persisted as `config.json` for exact replay.
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    config_sha: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(cfg: &ExperimentConfig) -> std::io::Result<OutputDir> {
        let dir = PathBuf::from(cfg.out_dir());
        fs::create_dir_all(&dir)?;
        let mut out = OutputDir {
            dir,
            command: cfg.command.clone(),
            config_sha: cfg.sha256(),
            written: Vec::new(),
        };
        out.write_json("config.json", &json!({ "config": cfg.identity() }))?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn written_files(&self) -> &[PathBuf] {
        &self.written
    }

    fn header_lines(&self) -> [String; 3] {
        [
            format!("# {TOOL_NAME} {TOOL_VERSION}"),
            format!("# command: {}", self.command),
            format!("# config-sha256: {}", self.config_sha),
        ]
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> std::io::Result<PathBuf> {
        let path = self.path(name);
        let mut buf = String::new();
        for line in self.header_lines() {
            buf.push_str(&line);
            buf.push('\n');
        }
        buf.push_str(&columns.join(","));
        buf.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            buf.push_str(&row.join(","));
            buf.push('\n');
        }
        fs::write(&path, buf)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Wraps the payload under a `tool` block carrying version and hash.
    pub fn write_json<T: Serialize>(&mut self, name: &str, payload: &T) -> std::io::Result<PathBuf> {
        let path = self.path(name);
        let mut doc = json!({
            "tool": {
                "name": TOOL_NAME,
                "version": TOOL_VERSION,
                "command": self.command,
                "config_sha256": self.config_sha,
            },
        });
        let payload = serde_json::to_value(payload).expect("payload serializes");
        if let (Some(obj), Some(extra)) = (doc.as_object_mut(), payload.as_object()) {
            for (k, v) in extra {
                obj.insert(k.clone(), v.clone());
            }
        } else if let Some(obj) = doc.as_object_mut() {
            obj.insert("data".into(), payload);
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// Shortest-roundtrip decimal form; the default `Display` for f64 is
/// already deterministic, this just names the intent at call sites.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn print_written(out: &OutputDir) {
    let mut stdout = std::io::stdout().lock();
    for p in out.written_files() {
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
}

//! Command output: one list of named values rendered either as aligned text
//! or as JSON, so both forms carry the same numbers.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

/// Render numbers the same way in both outputs: shortest round-trip form.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone)]
enum Entry {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
}

#[derive(Debug, Default)]
pub struct Report {
    command: String,
    sections: Vec<(String, Vec<(String, Entry)>)>,
    files: Vec<PathBuf>,
    extra: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), ..Default::default() }
    }

    /// Starts a titled group of values.
    pub fn section(&mut self, title: &str) -> &mut Self {
        self.sections.push((title.into(), Vec::new()));
        self
    }

    fn push(&mut self, key: &str, e: Entry) -> &mut Self {
        if self.sections.is_empty() {
            self.section("");
        }
        self.sections.last_mut().expect("section").1.push((key.into(), e));
        self
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.push(key, Entry::Num(v))
    }

    pub fn int(&mut self, key: &str, v: impl Into<u64>) -> &mut Self {
        self.push(key, Entry::Int(v.into()))
    }

    pub fn opt(&mut self, key: &str, v: Option<f64>) -> &mut Self {
        match v {
            Some(v) => self.num(key, v),
            None => self.text(key, "n/a"),
        }
    }

    pub fn text(&mut self, key: &str, v: impl Into<String>) -> &mut Self {
        self.push(key, Entry::Text(v.into()))
    }

    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.push(key, Entry::Flag(v))
    }

    pub fn file(&mut self, path: &Path) -> &mut Self {
        self.files.push(path.to_path_buf());
        self
    }

    /// Structured data that only appears in the JSON form.
    pub fn attach(&mut self, key: &str, v: Value) -> &mut Self {
        self.extra.insert(key.into(), v);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut sections = Map::new();
        for (title, rows) in &self.sections {
            let mut m = Map::new();
            for (k, e) in rows {
                let v = match e {
                    // Parse back the rendered text so JSON and text agree digit for digit.
                    Entry::Num(x) if x.is_finite() => json!(num(*x).parse::<f64>().expect("round trip")),
                    Entry::Num(x) => json!(x.to_string()),
                    Entry::Int(n) => json!(n),
                    Entry::Text(t) => json!(t),
                    Entry::Flag(b) => json!(b),
                };
                m.insert(k.clone(), v);
            }
            let name = if title.is_empty() { "results".to_string() } else { title.replace(' ', "_") };
            sections.insert(name, Value::Object(m));
        }
        let mut out = Map::new();
        out.insert("command".into(), json!(self.command));
        out.insert("results".into(), Value::Object(sections));
        out.insert("files".into(), json!(self.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()));
        for (k, v) in &self.extra {
            out.insert(k.clone(), v.clone());
        }
        Value::Object(out)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let width = self.sections.iter().flat_map(|(_, r)| r.iter().map(|(k, _)| k.len())).max().unwrap_or(0);
        for (title, rows) in &self.sections {
            if !title.is_empty() {
                writeln!(w, "[{title}]")?;
            }
            for (k, e) in rows {
                let v = match e {
                    Entry::Num(x) => num(*x),
                    Entry::Int(n) => n.to_string(),
                    Entry::Text(t) => t.clone(),
                    Entry::Flag(b) => b.to_string(),
                };
                writeln!(w, "  {k:<width$}  {v}")?;
            }
        }
        for f in &self.files {
            writeln!(w, "wrote {}", f.display())?;
        }
        Ok(())
    }

    pub fn emit(&self, as_json: bool) -> std::io::Result<()> {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        if as_json {
            serde_json::to_writer_pretty(&mut lock, &self.to_json())?;
            writeln!(lock)
        } else {
            self.write_text(lock)
        }
    }
}

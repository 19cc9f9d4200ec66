//! Plain-text run reports with a deterministic body.
//!
//! Everything that depends on wall-clock time or machine load goes into a
//! single trailing `== timing ==` section, so the rest of the output can
//! be compared byte for byte across repeated runs and worker counts.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Report {
    body: Vec<String>,
    timing: Vec<String>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn heading(&mut self, name: &str) {
        self.body.push(format!("== {name} =="));
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.body.push(s.into());
    }

    pub fn kv(&mut self, key: &str, value: impl Display) {
        self.body.push(format!("{key}: {value}"));
    }

    /// Splice a multi-line block in, line by line.
    pub fn block(&mut self, text: &str) {
        for l in text.lines() {
            self.body.push(l.to_string());
        }
    }

    pub fn timing(&mut self, key: &str, value: impl Display) {
        self.timing.push(format!("{key}: {value}"));
    }

    /// The deterministic part, without timing.
    pub fn body(&self) -> String {
        let mut s = self.body.join("\n");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        let mut s = self.body();
        if !self.timing.is_empty() {
            s.push_str("== timing ==\n");
            for l in &self.timing {
                s.push_str(l);
                s.push('\n');
            }
        }
        s
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| {
                    Error::Scenario(format!("create {}: {e}", dir.display()))
                })?;
            }
        }
        fs::write(path, self.render())
            .map_err(|e| Error::Scenario(format!("write {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_stays_out_of_the_body() {
        let mut r = Report::new();
        r.heading("system");
        r.kv("runs", 4);
        r.timing("wall-ms", 12);
        assert_eq!(r.body(), "== system ==\nruns: 4\n");
        assert!(r.render().contains("== timing =="));
        assert!(!r.body().contains("timing"));
    }

    #[test]
    fn block_splits_lines() {
        let mut r = Report::new();
        r.block("a: 1\nb: 2");
        assert_eq!(r.body(), "a: 1\nb: 2\n");
    }
}

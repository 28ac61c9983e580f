//! JSON-lines transition dumps: one serialized transition per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use pgrad_core::Transition;

pub struct TransitionDump {
    out: BufWriter<File>,
}

impl TransitionDump {
    /// `append` continues an existing dump (resumed runs).
    pub fn open(path: &Path, append: bool) -> anyhow::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(TransitionDump {
            out: BufWriter::new(file),
        })
    }

    pub fn write_all(&mut self, transitions: &[Transition]) -> anyhow::Result<()> {
        for t in transitions {
            serde_json::to_writer(&mut self.out, t)?;
            self.out.write_all(b"\n")?;
        }
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_dump(path: &Path) -> anyhow::Result<Vec<Transition>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

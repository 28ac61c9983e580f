//! Metrics CSV: a version line, a fixed header, then one row per update.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};

pub const VERSION_LINE: &str = "# pgrad metrics v1";

pub const COLUMNS: [&str; 13] = [
    "update",
    "env_steps",
    "episodes",
    "mean_return",
    "success_rate",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "ratio_epoch0",
    "grad_norm",
    "epochs",
];

/// One update. Loss statistics come from the last epoch run; `ratio_epoch0`
/// is the mean importance ratio before the first parameter step. Return and
/// success rate cover the most recent (up to 100) finished episodes and are
/// empty before any episode ends.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub update: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub mean_return: Option<f64>,
    pub success_rate: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub ratio_epoch0: f64,
    pub grad_norm: f64,
    pub epochs: usize,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl MetricsRow {
    fn fields(&self) -> [String; 13] {
        [
            self.update.to_string(),
            self.env_steps.to_string(),
            self.episodes.to_string(),
            opt(self.mean_return),
            opt(self.success_rate),
            self.policy_loss.to_string(),
            self.value_loss.to_string(),
            self.entropy.to_string(),
            self.clip_fraction.to_string(),
            self.approx_kl.to_string(),
            self.ratio_epoch0.to_string(),
            self.grad_norm.to_string(),
            self.epochs.to_string(),
        ]
    }
}

pub struct MetricsWriter {
    out: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    /// Starts a fresh file holding only the version line and header.
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "{VERSION_LINE}")?;
        let mut w = MetricsWriter::wrap(file);
        w.out.write_record(COLUMNS)?;
        w.out.flush()?;
        Ok(w)
    }

    /// Keeps the version line, header and first `rows` rows, then appends.
    pub fn resume(path: &Path, rows: u64) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let keep = 2 + rows as usize;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < keep || lines[0] != VERSION_LINE || lines[1] != COLUMNS.join(",") {
            bail!(
                "{} does not hold the {rows} rows recorded in the checkpoint",
                path.display()
            );
        }
        let mut kept = lines[..keep].join("\n");
        kept.push('\n');
        std::fs::write(path, kept)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(MetricsWriter::wrap(file))
    }

    fn wrap(file: File) -> Self {
        MetricsWriter {
            out: csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(BufWriter::new(file)),
        }
    }

    pub fn append(&mut self, row: &MetricsRow) -> anyhow::Result<()> {
        self.out.write_record(row.fields())?;
        self.out.flush()?;
        Ok(())
    }
}

/// Parsed view of a metrics file: `(env_steps, mean_return)` for rows that
/// have a return.
pub fn read_learning_curve(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_learning_curve(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_learning_curve(text: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().context("line 2: missing header")?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("header lacks the {name} column"))
    };
    let (steps_col, return_col) = (col("env_steps")?, col("mean_return")?);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            bail!("line {line}: expected {} fields, found {}", headers.len(), record.len());
        }
        let steps: f64 = record[steps_col]
            .parse()
            .with_context(|| format!("line {line}: env_steps {:?} is not a number", &record[steps_col]))?;
        let ret = &record[return_col];
        if ret.is_empty() {
            continue;
        }
        let ret: f64 = ret
            .parse()
            .with_context(|| format!("line {line}: mean_return {ret:?} is not a number"))?;
        out.push((steps, ret));
    }
    Ok(out)
}

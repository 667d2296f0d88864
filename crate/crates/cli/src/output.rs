//! Output files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct TaskStatus {
    pub name: String,
    pub status: String,
    pub outputs: Vec<String>,
    pub rows: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the command name and the effective configuration, leaving
    /// out keys that cannot change results (output directory, workers, SVG).
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub status: String,
    pub tasks: Vec<TaskStatus>,
    pub summary: Vec<(String, String)>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn config_hash(command: &str, cfg: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    let cfg = ExperimentConfig { out_dir: None, workers: None, svg: None, ..cfg.clone() };
    h.update(serde_json::to_vec(&cfg).expect("config serializes"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects outputs of one command and writes the manifest last.
pub struct Run {
    pub command: String,
    pub cfg: ExperimentConfig,
    pub dir: PathBuf,
    hash: String,
    started: f64,
    tasks: Vec<TaskStatus>,
    summary: Vec<(String, String)>,
}

impl Run {
    pub fn new(command: &str, cfg: ExperimentConfig) -> Result<Self> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir)?;
        Ok(Run {
            command: command.to_string(),
            hash: config_hash(command, &cfg),
            cfg,
            dir,
            started: now(),
            tasks: Vec::new(),
            summary: Vec::new(),
        })
    }

    pub fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    fn record(&mut self, task: &str, file: &str, rows: usize) {
        match self.tasks.iter_mut().find(|t| t.name == task) {
            Some(t) => {
                t.outputs.push(file.to_string());
                t.rows += rows;
            }
            None => self.tasks.push(TaskStatus {
                name: task.to_string(),
                status: "ok".into(),
                outputs: vec![file.to_string()],
                rows,
            }),
        }
    }

    /// Writes a CSV with a header row; the last line is a `#` comment
    /// naming the manifest and the config hash.
    pub fn csv(&mut self, task: &str, file: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let mut bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        writeln!(bytes, "# manifest={} config_sha256={}", self.manifest_name(), self.hash)?;
        fs::write(self.dir.join(file), bytes)?;
        self.record(task, file, rows.len());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, task: &str, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("output serializes");
        text.push('\n');
        fs::write(self.dir.join(file), text)?;
        self.record(task, file, 0);
        Ok(())
    }

    pub fn text(&mut self, task: &str, file: &str, text: &str) -> Result<()> {
        fs::write(self.dir.join(file), text)?;
        self.record(task, file, 0);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn fail_task(&mut self, task: &str, status: &str) {
        match self.tasks.iter_mut().find(|t| t.name == task) {
            Some(t) => t.status = status.to_string(),
            None => self.tasks.push(TaskStatus {
                name: task.to_string(),
                status: status.to_string(),
                outputs: Vec::new(),
                rows: 0,
            }),
        }
    }

    pub fn finish(self, status: &str) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.hash.clone(),
            config: self.cfg.clone(),
            started_unix: self.started,
            finished_unix: now(),
            status: status.to_string(),
            tasks: self.tasks,
            summary: self.summary,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(self.dir.join(format!("{}.manifest.json", self.command)), text)?;
        Ok(manifest)
    }
}

pub fn print_summary(m: &RunManifest) {
    let width = m.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    println!("{} [{}] config {}", m.command, m.status, &m.config_hash[..12]);
    for (k, v) in &m.summary {
        println!("  {k:<width$}  {v}");
    }
    for t in &m.tasks {
        println!("  -> {} ({}, {} rows): {}", t.name, t.status, t.rows, t.outputs.join(", "));
    }
}

/// Minimal static line chart. Axes are log-scaled on request; points with
/// nonpositive coordinates on a log axis are dropped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], log_x: bool, log_y: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 56.0;
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|(_, p)| {
            p.iter()
                .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0) && x.is_finite() && y.is_finite())
                .map(|&(x, y)| (tx(x), ty(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += &format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n");
    s += &format!("<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>\n", W / 2.0);
    s += &format!(
        "<path d=\"M{PAD},{PAD} V{} H{}\" fill=\"none\" stroke=\"black\"/>\n",
        H - PAD,
        W - PAD
    );
    let fmt_axis = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    s += &format!("<text x=\"{PAD}\" y=\"{}\">{}</text>\n", H - PAD + 16.0, fmt_axis(x0, log_x));
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", W - PAD, H - PAD + 16.0, fmt_axis(x1, log_x));
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", PAD - 4.0, H - PAD, fmt_axis(y0, log_y));
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", PAD - 4.0, PAD + 4.0, fmt_axis(y1, log_y));
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n", W / 2.0, H - 12.0);
    s += &format!("<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{y_label}</text>\n", H / 2.0, H / 2.0);
    for (i, ((name, _), p)) in series.iter().zip(&pts).enumerate() {
        if p.is_empty() {
            continue;
        }
        let color = colors[i % colors.len()];
        let d: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        s += &format!("<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\"/>\n", d.join(" "));
        if series.len() > 1 && i < 12 {
            s += &format!(
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{name}</text>\n",
                W - PAD + 4.0,
                PAD + 14.0 * i as f64
            );
        }
    }
    s += "</svg>\n";
    s
}

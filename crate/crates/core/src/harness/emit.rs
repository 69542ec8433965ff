//! CSV and JSON-lines writers. Numbers are printed with six decimals so output
//! is byte-stable across runs and platforms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::spatial::SpatialResult;
use super::temporal::TemporalResult;
use crate::engine::AgentProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Format {
    Csv,
    JsonLines,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn jsonl(self) -> bool {
        matches!(self, Format::JsonLines | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
    Empty,
}

/// Fixed six-decimal rendering; negative zero prints as zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => fmt6(*x),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Text(s) => serde_json::to_string(s).expect("strings always serialize"),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) if x.is_finite() => fmt6(*x),
            Cell::Num(_) | Cell::Empty => "null".to_owned(),
        }
    }
}

/// A header plus rows of cells, rendered as CSV or JSON lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        w.flush()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for row in &self.rows {
            let fields: Vec<String> = self
                .header
                .iter()
                .zip(row)
                .map(|(k, v)| format!("{}:{}", serde_json::to_string(k).expect("keys serialize"), v.json()))
                .collect();
            writeln!(out, "{{{}}}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Writes `<dir>/<stem>.csv` and/or `<dir>/<stem>.jsonl`; returns the paths written.
    pub fn emit(&self, dir: &Path, stem: &str, format: Format) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if format.csv() {
            let path = dir.join(format!("{stem}.csv"));
            let mut f = BufWriter::new(File::create(&path)?);
            self.write_csv(&mut f)?;
            f.flush()?;
            written.push(path);
        }
        if format.jsonl() {
            let path = dir.join(format!("{stem}.jsonl"));
            let mut f = BufWriter::new(File::create(&path)?);
            self.write_jsonl(&mut f)?;
            f.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn spatial_table(res: &SpatialResult) -> Table {
    Table {
        header: vec!["regime", "seed", "se_interface", "se_memory", "gain_pct"],
        rows: res
            .rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Text(r.regime.label().into()),
                    Cell::Int(r.seed),
                    Cell::Num(r.se_interface),
                    Cell::Num(r.se_memory),
                    Cell::Num(r.gain_pct),
                ]
            })
            .collect(),
    }
}

pub fn spatial_summary_table(res: &SpatialResult) -> Table {
    Table {
        header: vec![
            "regime",
            "se_interface",
            "se_memory",
            "gain_pct_mean",
            "gain_pct_stdev",
            "gain_pct_min",
            "gain_pct_max",
            "recovered_db",
        ],
        rows: res
            .summaries
            .iter()
            .map(|s| {
                vec![
                    Cell::Text(s.regime.label().into()),
                    Cell::Num(s.se_interface),
                    Cell::Num(s.se_memory),
                    Cell::Num(s.gain_pct_mean),
                    Cell::Num(s.gain_pct_stdev),
                    Cell::Num(s.gain_pct_min),
                    Cell::Num(s.gain_pct_max),
                    Cell::Num(s.recovered_db),
                ]
            })
            .collect(),
    }
}

pub fn temporal_table(res: &TemporalResult) -> Table {
    Table {
        header: vec!["event", "agent", "cumulative_30", "similarity", "store_size"],
        rows: res
            .summaries
            .iter()
            .map(|s| {
                vec![
                    Cell::Int(s.event as u64),
                    Cell::Text(s.agent.label().into()),
                    Cell::Num(s.cumulative),
                    s.similarity.map_or(Cell::Empty, Cell::Num),
                    Cell::Num(s.store_size),
                ]
            })
            .collect(),
    }
}

/// One row per seed, event and agent.
pub fn temporal_seed_table(res: &TemporalResult) -> Table {
    let mut rows = Vec::new();
    for run in &res.runs {
        for ev in &run.events {
            for (agent, rec) in [(AgentProfile::Interface, &ev.interface), (AgentProfile::Memory, &ev.memory)] {
                rows.push(vec![
                    Cell::Int(run.seed),
                    Cell::Int(ev.event as u64),
                    Cell::Text(agent.label().into()),
                    Cell::Text(ev.family.label().into()),
                    Cell::Num(rec.cumulative),
                    rec.similarity.map_or(Cell::Empty, Cell::Num),
                    Cell::Int(rec.warm as u64),
                    Cell::Int(rec.store_size as u64),
                ]);
            }
        }
    }
    Table {
        header: vec!["seed", "event", "agent", "family", "cumulative_30", "similarity", "warm", "store_size"],
        rows,
    }
}

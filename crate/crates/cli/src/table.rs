//! Average relative volume of the parameter set, grouped by δ.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const TABLE_TIMES: [usize; 5] = [1, 5, 15, 50, 100];

/// Volume ratios `Vol(Θ_t)/Vol(Θ₀)` of every seed run at one δ, indexed by `t − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGroup {
    pub delta: f64,
    pub runs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeRow {
    pub delta: f64,
    pub seeds: usize,
    /// Percent of the initial volume.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeTable {
    pub times: Vec<usize>,
    pub rows: Vec<VolumeRow>,
}

/// Mean and standard error across runs at step `t`; NaN when a run is too short.
pub fn mean_and_se(runs: &[Vec<f64>], t: usize) -> (f64, f64) {
    let vals: Vec<f64> = runs
        .iter()
        .map(|r| r.get(t - 1).copied().unwrap_or(f64::NAN) * 100.0)
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Rows ordered by decreasing δ.
pub fn aggregate_volumes(groups: &[VolumeGroup], times: &[usize]) -> VolumeTable {
    let mut rows: Vec<VolumeRow> = groups
        .iter()
        .filter(|g| !g.runs.is_empty())
        .map(|g| {
            let (mean, std_error) = times.iter().map(|&t| mean_and_se(&g.runs, t)).unzip();
            VolumeRow {
                delta: g.delta,
                seeds: g.runs.len(),
                mean,
                std_error,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    VolumeTable {
        times: times.to_vec(),
        rows,
    }
}

impl VolumeTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,seeds");
        for t in &self.times {
            out.push_str(&format!(",mean_t{t},se_t{t}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:e},{}", r.delta, r.seeds));
            for (m, s) in r.mean.iter().zip(&r.std_error) {
                out.push_str(&format!(",{m},{s}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut cells: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["delta".to_string()];
        header.extend(self.times.iter().map(|t| format!("t={t}")));
        cells.push(header);
        for r in &self.rows {
            let mut line = vec![format!("{:e}", r.delta)];
            line.extend(
                r.mean
                    .iter()
                    .zip(&r.std_error)
                    .map(|(m, s)| {
                        if m.is_nan() {
                            "-".to_string()
                        } else {
                            format!("{} ± {}", fmt_pct(*m), fmt_pct(*s))
                        }
                    }),
            );
            cells.push(line);
        }
        let ncol = cells[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|c| cells.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &cells {
            let padded: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}", w = *w))
                .collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn fmt_pct(v: f64) -> String {
    if v == 0.0 || v >= 1.0 {
        format!("{v:.2}%")
    } else {
        format!("{v:.3}%")
    }
}

pub fn delta_dir_name(delta: f64) -> String {
    format!("delta_{delta:e}")
}

/// Reads `traces/delta_*/seed_*.csv` under `dir`.
pub fn load_groups(dir: &Path) -> Result<Vec<VolumeGroup>, CliError> {
    let traces = dir.join("traces");
    let mut by_delta: BTreeMap<String, (f64, Vec<(u64, Vec<f64>)>)> = BTreeMap::new();
    let entries = match std::fs::read_dir(&traces) {
        Ok(e) => e,
        Err(_) => return Ok(Vec::new()),
    };
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(delta) = name.strip_prefix("delta_").and_then(|d| d.parse::<f64>().ok()) else { continue };
        for file in std::fs::read_dir(&path)? {
            let file = file?.path();
            let Some(stem) = file.file_stem().and_then(|s| s.to_str()) else { continue };
            let Some(seed) = stem.strip_prefix("seed_").and_then(|s| s.parse::<u64>().ok()) else { continue };
            if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let ratios = read_volume_column(&file)?;
            by_delta
                .entry(name.to_string())
                .or_insert_with(|| (delta, Vec::new()))
                .1
                .push((seed, ratios));
        }
    }
    Ok(by_delta
        .into_values()
        .map(|(delta, mut runs)| {
            runs.sort_by_key(|(s, _)| *s);
            VolumeGroup {
                delta,
                runs: runs.into_iter().map(|(_, r)| r).collect(),
            }
        })
        .collect())
}

fn read_volume_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Io(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let col = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .position(|h| h == "volume_ratio")
        .ok_or_else(|| bad("no volume_ratio column".into()))?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| bad(e.to_string()))?;
            r[col].parse::<f64>().map_err(|e| bad(e.to_string()))
        })
        .collect()
}

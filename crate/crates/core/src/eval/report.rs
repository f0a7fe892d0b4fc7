//! Evaluation rows and their text and CSV renderings.
//!
//! CSV columns, in order: `id`, `category`, `corruption`, `noise` (empty
//! unless the row comes from a noise sweep), then the three errors
//! `err_input` (nearest-upsampled corrupted input), `err_lowres`
//! (nearest-upsampled encoder-decoder output) and `err_hybrid`.

use std::collections::BTreeMap;
use std::fmt::Write;

pub const CSV_HEADER: &str = "id,category,corruption,noise,err_input,err_lowres,err_hybrid";

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub id: String,
    pub category: String,
    pub corruption: String,
    pub noise: Option<f64>,
    pub input: f64,
    pub lowres: f64,
    pub hybrid: f64,
}

/// Mean and standard error of the hybrid error over one group of rows,
/// plus the means of the two baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub key: String,
    pub count: usize,
    pub input: f64,
    pub lowres: f64,
    pub hybrid: f64,
    pub hybrid_std_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

fn summarize<'a>(key: String, rows: impl Iterator<Item = &'a EvalRow>) -> LevelSummary {
    let rows: Vec<&EvalRow> = rows.collect();
    let n = rows.len() as f64;
    let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    let hybrid = mean(|r| r.hybrid);
    let var = if rows.len() > 1 {
        rows.iter().map(|r| (r.hybrid - hybrid).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    LevelSummary {
        key,
        count: rows.len(),
        input: mean(|r| r.input),
        lowres: mean(|r| r.lowres),
        hybrid,
        hybrid_std_err: (var / n).sqrt(),
    }
}

impl EvalReport {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn overall(&self) -> Option<LevelSummary> {
        (!self.rows.is_empty()).then(|| summarize("all".into(), self.rows.iter()))
    }

    /// One summary per category, sorted by name.
    pub fn by_category(&self) -> Vec<LevelSummary> {
        let mut groups: BTreeMap<&str, Vec<&EvalRow>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry(&r.category).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|(k, rows)| summarize(k.to_string(), rows.into_iter()))
            .collect()
    }

    /// One summary per noise fraction, in order of first appearance.
    pub fn by_noise(&self) -> Vec<LevelSummary> {
        let mut levels: Vec<f64> = Vec::new();
        for f in self.rows.iter().filter_map(|r| r.noise) {
            if !levels.contains(&f) {
                levels.push(f);
            }
        }
        levels
            .into_iter()
            .map(|f| summarize(f.to_string(), self.rows.iter().filter(|r| r.noise == Some(f))))
            .collect()
    }

    /// Fraction of rows whose hybrid error is strictly below the input
    /// baseline.
    pub fn hybrid_win_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.hybrid < r.input).count() as f64 / self.rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let noise = r.noise.map(|f| f.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{noise},{},{},{}",
                r.id, r.category, r.corruption, r.input, r.lowres, r.hybrid
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "samples {}", self.rows.len());
        let _ = writeln!(out, "{:<28} {:<8} {:>10} {:>10} {:>10}", "id", "category", "input", "lowres", "hybrid");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<28} {:<8} {:>10.6} {:>10.6} {:>10.6}",
                r.id, r.category, r.input, r.lowres, r.hybrid
            );
        }
        let line = |out: &mut String, label: &str, s: &LevelSummary| {
            let _ = writeln!(
                out,
                "{label} {:<10} n={:<4} input={:.6} lowres={:.6} hybrid={:.6} se={:.6}",
                s.key, s.count, s.input, s.lowres, s.hybrid, s.hybrid_std_err
            );
        };
        if let Some(all) = self.overall() {
            line(&mut out, "mean    ", &all);
            let _ = writeln!(out, "hybrid beats input on {:.1}% of samples", 100.0 * self.hybrid_win_rate());
        }
        for s in self.by_category() {
            line(&mut out, "category", &s);
        }
        for s in self.by_noise() {
            line(&mut out, "noise   ", &s);
        }
        out
    }
}

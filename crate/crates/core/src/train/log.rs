//! Per-step training records, written as one `key=value` line each.
//!
//! Line layout: `stage=<tag> epoch=<n> step=<n>`, then the loss components of
//! that stage in a fixed order, then the optional discriminator fields
//! `acc`, `prev_acc`, `d_update` (`0`/`1`) and `d_delta`, then `ms`. Values
//! use the shortest decimal form that parses back to the same `f64`.

use std::fmt;
use std::io::Write;

use super::{generator_objective, loss_edgan, loss_hybrid, Stage, TrainConfig, TrainError};

/// Loss component names, in the order they are written.
pub const COMPONENTS: [&str; 9] = ["recon", "gan", "gan_fake", "d_loss", "edgan", "g_obj", "l1", "hybrid", "total"];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub stage: Stage,
    pub epoch: usize,
    /// Global step index, strictly increasing across a log.
    pub step: u64,
    /// Named loss components; `total` is the minimized objective.
    pub losses: Vec<(String, f64)>,
    /// Discriminator accuracy on this batch, before any update.
    pub accuracy: Option<f64>,
    /// Accuracy the gate looked at; `None` on the first batch of a stage.
    pub prev_accuracy: Option<f64>,
    pub d_update: Option<bool>,
    /// Largest absolute change of any discriminator parameter in this step.
    pub d_delta: Option<f64>,
    /// Wall time in milliseconds at microsecond resolution.
    pub wall_ms: f64,
}

impl TrainRecord {
    pub fn loss(&self, name: &str) -> Option<f64> {
        self.losses.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn total(&self) -> f64 {
        self.loss("total").unwrap_or(f64::NAN)
    }

    /// `total` recomputed from the other components of the record.
    pub fn recombined_total(&self, cfg: &TrainConfig) -> Option<f64> {
        let get = |n| self.loss(n);
        Some(match self.stage {
            Stage::Reconstruction => -get("recon")?,
            Stage::Adversarial => generator_objective(get("gan_fake")?, get("recon")?, cfg.alpha1, cfg.alpha2),
            Stage::Upsampler => get("l1")?,
            Stage::Joint => {
                let g = generator_objective(get("gan_fake")?, get("recon")?, cfg.alpha1, cfg.alpha2);
                cfg.alpha3 * g + cfg.alpha4 * get("l1")?
            }
        })
    }

    /// Checks `total`, `edgan` and `hybrid` against their components.
    pub fn check_bookkeeping(&self, cfg: &TrainConfig, tol: f64) -> Result<(), String> {
        let close = |name: &str, want: f64| match self.loss(name) {
            Some(got) if (got - want).abs() <= tol => Ok(()),
            Some(got) => Err(format!("step {}: {name} {got} but components give {want}", self.step)),
            None => Ok(()),
        };
        let total = self
            .recombined_total(cfg)
            .ok_or_else(|| format!("step {}: missing components for stage {}", self.step, self.stage))?;
        close("total", total)?;
        if let (Some(gan), Some(recon)) = (self.loss("gan"), self.loss("recon")) {
            let edgan = loss_edgan(gan, recon, cfg.alpha1, cfg.alpha2);
            close("edgan", edgan)?;
            if let Some(l1) = self.loss("l1") {
                close("hybrid", loss_hybrid(edgan, l1, cfg.alpha3, cfg.alpha4))?;
            }
        }
        Ok(())
    }

    pub fn parse(line: &str) -> Result<Self, TrainError> {
        let bad = |msg: String| TrainError::Contract(format!("log line {line:?}: {msg}"));
        let mut rec = TrainRecord {
            stage: Stage::Reconstruction,
            epoch: 0,
            step: 0,
            losses: Vec::new(),
            accuracy: None,
            prev_accuracy: None,
            d_update: None,
            d_delta: None,
            wall_ms: 0.0,
        };
        let mut seen_stage = false;
        for field in line.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(format!("field {field:?} lacks '='")))?;
            let num = || value.parse::<f64>().map_err(|_| bad(format!("{key}: bad number {value:?}")));
            let int = || value.parse::<u64>().map_err(|_| bad(format!("{key}: bad integer {value:?}")));
            match key {
                "stage" => {
                    rec.stage = value.parse()?;
                    seen_stage = true;
                }
                "epoch" => rec.epoch = int()? as usize,
                "step" => rec.step = int()?,
                "acc" => rec.accuracy = Some(num()?),
                "prev_acc" => rec.prev_accuracy = Some(num()?),
                "d_update" => rec.d_update = Some(int()? != 0),
                "d_delta" => rec.d_delta = Some(num()?),
                "ms" => rec.wall_ms = num()?,
                k if COMPONENTS.contains(&k) => rec.losses.push((k.to_string(), num()?)),
                k => return Err(bad(format!("unknown field {k:?}"))),
            }
        }
        if !seen_stage {
            return Err(bad("missing stage".into()));
        }
        Ok(rec)
    }
}

impl fmt::Display for TrainRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage={} epoch={} step={}", self.stage, self.epoch, self.step)?;
        for (name, v) in &self.losses {
            write!(f, " {name}={v}")?;
        }
        if let Some(a) = self.accuracy {
            write!(f, " acc={a}")?;
        }
        if let Some(a) = self.prev_accuracy {
            write!(f, " prev_acc={a}")?;
        }
        if let Some(u) = self.d_update {
            write!(f, " d_update={}", u as u8)?;
        }
        if let Some(d) = self.d_delta {
            write!(f, " d_delta={d}")?;
        }
        write!(f, " ms={}", self.wall_ms)
    }
}

/// Records of a run, optionally streamed to a writer as they arrive.
#[derive(Default)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    sink: Option<Box<dyn Write + Send>>,
}

impl fmt::Debug for TrainLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrainLog")
            .field("records", &self.records.len())
            .field("streaming", &self.sink.is_some())
            .finish()
    }
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_sink(sink: Box<dyn Write + Send>) -> Self {
        Self {
            records: Vec::new(),
            sink: Some(sink),
        }
    }

    pub fn push(&mut self, record: TrainRecord) -> Result<(), TrainError> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(TrainError::Contract(format!(
                    "step {} does not follow step {}",
                    record.step, last.step
                )));
            }
        }
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{record}")
                .and_then(|_| sink.flush())
                .map_err(|e| TrainError::Contract(format!("writing log: {e}")))?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &TrainRecord> + '_ {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut log = Self::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            log.push(TrainRecord::parse(line)?)?;
        }
        Ok(log)
    }

    /// Steps that broke the gate: the previous accuracy exceeded the
    /// threshold but the discriminator changed.
    pub fn gate_violations(&self, threshold: f64) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.prev_accuracy.is_some_and(|a| a > threshold))
            .filter(|r| r.d_update != Some(false) || r.d_delta.is_some_and(|d| d != 0.0))
            .map(|r| r.step)
            .collect()
    }

    /// Number of steps whose previous accuracy exceeded the threshold.
    pub fn gated_steps(&self, threshold: f64) -> usize {
        self.records
            .iter()
            .filter(|r| r.prev_accuracy.is_some_and(|a| a > threshold))
            .count()
    }
}

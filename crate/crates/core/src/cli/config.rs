//! `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment and blank lines are
//! ignored. Values are applied over the defaults of the chosen `scale`, file
//! first and then command-line overrides in order, so the last assignment of
//! a key wins. `scale` itself is resolved before anything else.

use std::fmt::{self, Write};
use std::str::FromStr;

use crate::data::{Category, CorruptionSpec, ViewDirection};
use crate::eval::ProbeConfig;
use crate::nets::Scale;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Dataset generation settings.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSettings {
    pub n: usize,
    pub seed: u64,
    pub categories: Vec<Category>,
    pub corruption: CorruptionSpec,
}

/// Noise sweep, interpolation and probe settings.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub fractions: Vec<f64>,
    pub noise_seed: u64,
    pub gammas: Vec<f64>,
    pub probe: ProbeConfig,
    pub shuffles: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub train: TrainConfig,
    pub data: DataSettings,
    pub eval: EvalSettings,
}

impl Settings {
    pub fn new(scale: Scale) -> Self {
        Self {
            train: TrainConfig::new(scale),
            data: DataSettings {
                n: 100,
                seed: 1,
                categories: Category::ALL.to_vec(),
                corruption: CorruptionSpec::scan(ViewDirection { axis: 2, positive: true }),
            },
            eval: EvalSettings {
                fractions: vec![0.0, 0.2, 0.4, 0.6],
                noise_seed: 7,
                gammas: vec![1.0, 0.75, 0.5, 0.25, 0.0],
                probe: ProbeConfig::default(),
                shuffles: 20,
            },
        }
    }

    /// Every key in the order [`Settings::to_text`] writes them.
    pub fn keys() -> Vec<String> {
        let mut keys: Vec<String> = [
            "scale", "seed", "d_l", "d_h", "c", "ed.channels", "lrcn.channels", "lrcn.feature_dim",
            "lrcn.hidden_dim", "lrcn.seed_channels", "lrcn.mid_channels", "alpha1", "alpha2", "alpha3", "alpha4",
            "gate", "beta1", "beta2",
        ]
        .map(String::from)
        .to_vec();
        for tag in ["1a", "1b", "2", "3"] {
            for field in ["epochs", "batch", "lr", "disc_lr"] {
                keys.push(format!("{tag}.{field}"));
            }
        }
        keys.extend(
            [
                "data.n", "data.seed", "data.categories", "data.corruption", "sweep.fractions", "sweep.seed",
                "interpolate.gammas", "probe.epochs", "probe.lr", "probe.l2", "probe.seed", "probe.shuffles",
            ]
            .map(String::from),
        );
        keys
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let floats = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        if let Some((stage, field)) = stage_key(key) {
            let s = self.train.stage(stage.parse().ok()?);
            return Some(match field {
                "epochs" => s.epochs.to_string(),
                "batch" => s.batch.to_string(),
                "lr" => s.lr.to_string(),
                _ => s.disc_lr.to_string(),
            });
        }
        Some(match key {
            "scale" => t.scale.to_string(),
            "seed" => t.seed.to_string(),
            "d_l" => t.edgan.d_l.to_string(),
            "d_h" => t.lrcn.d_h.to_string(),
            "c" => t.lrcn.c.to_string(),
            "ed.channels" => list(&t.edgan.channels),
            "lrcn.channels" => list(&t.lrcn.channels),
            "lrcn.feature_dim" => t.lrcn.feature_dim.to_string(),
            "lrcn.hidden_dim" => t.lrcn.hidden_dim.to_string(),
            "lrcn.seed_channels" => t.lrcn.seed_channels.to_string(),
            "lrcn.mid_channels" => t.lrcn.mid_channels.to_string(),
            "alpha1" => t.alpha1.to_string(),
            "alpha2" => t.alpha2.to_string(),
            "alpha3" => t.alpha3.to_string(),
            "alpha4" => t.alpha4.to_string(),
            "gate" => t.gate.to_string(),
            "beta1" => t.beta1.to_string(),
            "beta2" => t.beta2.to_string(),
            "data.n" => self.data.n.to_string(),
            "data.seed" => self.data.seed.to_string(),
            "data.categories" => self.data.categories.iter().map(Category::to_string).collect::<Vec<_>>().join(","),
            "data.corruption" => self.data.corruption.to_string(),
            "sweep.fractions" => floats(&self.eval.fractions),
            "sweep.seed" => self.eval.noise_seed.to_string(),
            "interpolate.gammas" => floats(&self.eval.gammas),
            "probe.epochs" => self.eval.probe.epochs.to_string(),
            "probe.lr" => self.eval.probe.lr.to_string(),
            "probe.l2" => self.eval.probe.l2.to_string(),
            "probe.seed" => self.eval.probe.seed.to_string(),
            "probe.shuffles" => self.eval.shuffles.to_string(),
            _ => return None,
        })
    }

    /// Assigns one key. `scale` is rejected here; it picks the defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        if let Some((stage, field)) = stage_key(key) {
            let s = t.stage_mut(stage.parse().map_err(|_| format!("unknown key {key:?}"))?);
            match field {
                "epochs" => s.epochs = num(value)?,
                "batch" => s.batch = num(value)?,
                "lr" => s.lr = num(value)?,
                _ => s.disc_lr = num(value)?,
            }
            return Ok(());
        }
        match key {
            "seed" => t.seed = num(value)?,
            "d_l" => {
                t.edgan.d_l = num(value)?;
                t.lrcn.d_l = t.edgan.d_l;
            }
            "d_h" => t.lrcn.d_h = num(value)?,
            "c" => t.lrcn.c = num(value)?,
            "ed.channels" => t.edgan.channels = triple(value)?,
            "lrcn.channels" => t.lrcn.channels = triple(value)?,
            "lrcn.feature_dim" => t.lrcn.feature_dim = num(value)?,
            "lrcn.hidden_dim" => t.lrcn.hidden_dim = num(value)?,
            "lrcn.seed_channels" => t.lrcn.seed_channels = num(value)?,
            "lrcn.mid_channels" => t.lrcn.mid_channels = num(value)?,
            "alpha1" => t.alpha1 = num(value)?,
            "alpha2" => t.alpha2 = num(value)?,
            "alpha3" => t.alpha3 = num(value)?,
            "alpha4" => t.alpha4 = num(value)?,
            "gate" => t.gate = num(value)?,
            "beta1" => t.beta1 = num(value)?,
            "beta2" => t.beta2 = num(value)?,
            "data.n" => self.data.n = num(value)?,
            "data.seed" => self.data.seed = num(value)?,
            "data.categories" => self.data.categories = list(value)?,
            "data.corruption" => self.data.corruption = num(value)?,
            "sweep.fractions" => self.eval.fractions = list(value)?,
            "sweep.seed" => self.eval.noise_seed = num(value)?,
            "interpolate.gammas" => self.eval.gammas = list(value)?,
            "probe.epochs" => self.eval.probe.epochs = num(value)?,
            "probe.lr" => self.eval.probe.lr = num(value)?,
            "probe.l2" => self.eval.probe.l2 = num(value)?,
            "probe.seed" => self.eval.probe.seed = num(value)?,
            "probe.shuffles" => self.eval.shuffles = num(value)?,
            "scale" => return Err("scale must be resolved before other keys".into()),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.train.validate().map_err(|e| e.to_string())?;
        if self.data.categories.is_empty() {
            return Err("data.categories is empty".into());
        }
        if self.data.n == 0 {
            return Err("data.n must be positive".into());
        }
        let in_unit = |v: &[f64]| v.iter().all(|x| (0.0..=1.0).contains(x));
        if !in_unit(&self.eval.fractions) || self.eval.fractions.windows(2).any(|w| w[0] > w[1]) {
            return Err("sweep.fractions must ascend within [0, 1]".into());
        }
        if !in_unit(&self.eval.gammas) {
            return Err("interpolate.gammas must lie in [0, 1]".into());
        }
        if self.eval.shuffles == 0 {
            return Err("probe.shuffles must be positive".into());
        }
        Ok(())
    }

    /// The effective configuration, one `key = value` line per key. Parsing
    /// this text gives back the same settings.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::keys() {
            let _ = writeln!(out, "{key} = {}", self.get(&key).unwrap_or_default());
        }
        out
    }
}

fn stage_key(key: &str) -> Option<(&str, &str)> {
    let (stage, field) = key.split_once('.')?;
    (["1a", "1b", "2", "3"].contains(&stage) && ["epochs", "batch", "lr", "disc_lr"].contains(&field))
        .then_some((stage, field))
}

fn num<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse {value:?}"))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    value.split(',').map(|v| num(v.trim())).collect()
}

fn triple(value: &str) -> Result<[usize; 3], String> {
    list::<usize>(value)?
        .try_into()
        .map_err(|_| format!("expected three comma-separated widths, got {value:?}"))
}

/// One assignment and where it came from.
struct Entry {
    line: Option<usize>,
    key: String,
    value: String,
}

fn split_assignment(text: &str, line: Option<usize>) -> Result<Entry, ConfigError> {
    let (key, value) = text.split_once('=').ok_or_else(|| ConfigError {
        line,
        key: None,
        message: format!("expected key = value, got {text:?}"),
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError {
            line,
            key: None,
            message: "empty key".into(),
        });
    }
    Ok(Entry {
        line,
        key: key.to_string(),
        value: value.trim().to_string(),
    })
}

/// Defaults, then `file` (if any), then `overrides` (`key=value` each).
pub fn parse_config(file: Option<&str>, overrides: &[String]) -> Result<Settings, ConfigError> {
    let mut entries = Vec::new();
    for (i, raw) in file.unwrap_or("").lines().enumerate() {
        let text = raw.split('#').next().unwrap_or("").trim();
        if !text.is_empty() {
            entries.push(split_assignment(text, Some(i + 1))?);
        }
    }
    for o in overrides {
        entries.push(split_assignment(o, None)?);
    }
    let fail = |e: &Entry, message: String| ConfigError {
        line: e.line,
        key: Some(e.key.clone()),
        message,
    };

    let mut scale = Scale::Desk;
    for e in entries.iter().filter(|e| e.key == "scale") {
        scale = e.value.parse().map_err(|err: crate::nets::NetError| fail(e, err.to_string()))?;
    }
    let mut settings = Settings::new(scale);
    for e in entries.iter().filter(|e| e.key != "scale") {
        settings.set(&e.key, &e.value).map_err(|m| fail(e, m))?;
    }
    settings.validate().map_err(|message| ConfigError {
        line: None,
        key: None,
        message,
    })?;
    Ok(settings)
}

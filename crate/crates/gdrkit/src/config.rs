//! Flat `key = value` configuration mirroring `TrainConfig` field for field.
//!
//! Nested structs use dotted keys (`aug.hue.hi`, `net.conv1_channels`,
//! `weak.min_area`). `#` starts a comment. Keys may appear at most once per
//! source; command-line overrides are applied after the file.

use std::path::Path;

use gdrkit_core::augment::TransformKind;
use gdrkit_core::dcr::QMode;
use gdrkit_core::model::{AlphaMode, DcrApplication, Method, TrainConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("{origin}: expected `key = value`, found `{text}`")]
    Syntax { origin: String, text: String },
    #[error("{origin}: unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey {
        origin: String,
        key: String,
        suggestion: Option<String>,
    },
    #[error("{origin}: key `{key}` given twice")]
    Duplicate { origin: String, key: String },
    #[error("{origin}: `{key}` expects {expected}, found `{value}`")]
    BadValue {
        origin: String,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

const TOP_KEYS: [&str; 18] = [
    "method",
    "epochs",
    "batch_size",
    "lr_initial",
    "lr_final",
    "warmup_epochs",
    "momentum",
    "weight_decay",
    "tau",
    "beta",
    "q_mode",
    "alpha",
    "unit_weights",
    "dcr_application",
    "dcr_on_contrastive",
    "symmetric_contrastive",
    "seed",
    "aug.order",
];
const AUG_FIELDS: [&str; 4] = ["enabled", "probability", "lo", "hi"];
const WEAK_KEYS: [&str; 3] = ["weak.flip_probability", "weak.min_area", "weak.max_area"];
const NET_KEYS: [&str; 8] = [
    "net.input_width",
    "net.input_height",
    "net.input_pool",
    "net.conv1_channels",
    "net.conv2_channels",
    "net.classes",
    "net.proj_hidden",
    "net.embed_dim",
];

/// Every accepted key, in rendering order.
pub fn known_keys() -> Vec<String> {
    let mut keys: Vec<String> = TOP_KEYS.iter().map(|s| s.to_string()).collect();
    for k in TransformKind::ALL {
        for f in AUG_FIELDS {
            keys.push(format!("aug.{}.{f}", k.name()));
        }
    }
    keys.extend(WEAK_KEYS.iter().map(|s| s.to_string()));
    keys.extend(NET_KEYS.iter().map(|s| s.to_string()));
    keys
}

/// Closest known key within a small edit distance.
pub fn suggest(key: &str) -> Option<String> {
    let limit = (key.len() / 3).max(2);
    known_keys()
        .into_iter()
        .map(|k| (strsim::levenshtein(key, &k), k))
        .filter(|(d, _)| *d <= limit)
        .min()
        .map(|(_, k)| k)
}

fn parse_num<T: std::str::FromStr>(origin: &str, key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        origin: origin.to_string(),
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

/// Assigns one key. `origin` labels diagnostics.
pub fn set_key(cfg: &mut TrainConfig, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
    let bad = |expected: &'static str| ConfigError::BadValue {
        origin: origin.to_string(),
        key: key.to_string(),
        value: value.to_string(),
        expected,
    };
    let real = || parse_num::<f64>(origin, key, value, "a real number");
    let count = || parse_num::<usize>(origin, key, value, "a nonnegative integer");
    let flag = || parse_num::<bool>(origin, key, value, "`true` or `false`");
    match key {
        "method" => cfg.method = Method::parse(value).ok_or_else(|| bad("erm, gdrnet, or A..G"))?,
        "epochs" => cfg.epochs = count()?,
        "batch_size" => cfg.batch_size = count()?,
        "lr_initial" => cfg.lr_initial = real()?,
        "lr_final" => cfg.lr_final = real()?,
        "warmup_epochs" => cfg.warmup_epochs = count()?,
        "momentum" => cfg.momentum = real()?,
        "weight_decay" => cfg.weight_decay = real()?,
        "tau" => cfg.tau = real()?,
        "beta" => cfg.beta = real()?,
        "q_mode" => {
            cfg.q_mode = match value {
                "joint" => QMode::Joint,
                "conditional" => QMode::Conditional,
                _ => return Err(bad("`joint` or `conditional`")),
            }
        }
        "alpha" => {
            cfg.alpha = match value {
                "linear" => AlphaMode::Linear,
                v => AlphaMode::Constant(v.parse().map_err(|_| bad("`linear` or a real number"))?),
            }
        }
        "unit_weights" => cfg.unit_weights = flag()?,
        "dcr_application" => {
            cfg.dcr_application = DcrApplication::parse(value).ok_or_else(|| bad("`loss` or `sampling`"))?
        }
        "dcr_on_contrastive" => cfg.dcr_on_contrastive = flag()?,
        "symmetric_contrastive" => cfg.symmetric_contrastive = flag()?,
        "seed" => cfg.seed = parse_num(origin, key, value, "a nonnegative integer")?,
        "aug.order" => {
            let order = value
                .split(',')
                .map(|s| TransformKind::from_name(s.trim()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("a comma-separated list of transform names"))?;
            cfg.aug
                .set_order(order)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        "weak.flip_probability" => cfg.weak.flip_probability = real()?,
        "weak.min_area" => cfg.weak.min_area = real()?,
        "weak.max_area" => cfg.weak.max_area = real()?,
        "net.input_width" => cfg.net.input_width = count()?,
        "net.input_height" => cfg.net.input_height = count()?,
        "net.input_pool" => cfg.net.input_pool = count()?,
        "net.conv1_channels" => cfg.net.conv1_channels = count()?,
        "net.conv2_channels" => cfg.net.conv2_channels = count()?,
        "net.classes" => cfg.net.classes = count()?,
        "net.proj_hidden" => cfg.net.proj_hidden = count()?,
        "net.embed_dim" => cfg.net.embed_dim = count()?,
        _ => {
            let parts: Vec<&str> = key.split('.').collect();
            let kind = match parts.as_slice() {
                ["aug", name, _] => TransformKind::from_name(name),
                _ => None,
            };
            let Some(kind) = kind else {
                return Err(ConfigError::UnknownKey {
                    origin: origin.to_string(),
                    key: key.to_string(),
                    suggestion: suggest(key),
                });
            };
            let s = cfg.aug.setting_mut(kind);
            match parts[2] {
                "enabled" => s.enabled = flag()?,
                "probability" => s.probability = real()?,
                "lo" => s.lo = real()?,
                "hi" => s.hi = real()?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        origin: origin.to_string(),
                        key: key.to_string(),
                        suggestion: suggest(key),
                    })
                }
            }
        }
    }
    Ok(())
}

/// Every key with its current value, in [`known_keys`] order.
pub fn entries(cfg: &TrainConfig) -> Vec<(String, String)> {
    let mut out = vec![
        ("method".into(), cfg.method.name().to_string()),
        ("epochs".into(), cfg.epochs.to_string()),
        ("batch_size".into(), cfg.batch_size.to_string()),
        ("lr_initial".into(), cfg.lr_initial.to_string()),
        ("lr_final".into(), cfg.lr_final.to_string()),
        ("warmup_epochs".into(), cfg.warmup_epochs.to_string()),
        ("momentum".into(), cfg.momentum.to_string()),
        ("weight_decay".into(), cfg.weight_decay.to_string()),
        ("tau".into(), cfg.tau.to_string()),
        ("beta".into(), cfg.beta.to_string()),
        (
            "q_mode".into(),
            match cfg.q_mode {
                QMode::Joint => "joint",
                QMode::Conditional => "conditional",
            }
            .to_string(),
        ),
        (
            "alpha".into(),
            match cfg.alpha {
                AlphaMode::Linear => "linear".to_string(),
                AlphaMode::Constant(a) => a.to_string(),
            },
        ),
        ("unit_weights".into(), cfg.unit_weights.to_string()),
        ("dcr_application".into(), cfg.dcr_application.name().to_string()),
        ("dcr_on_contrastive".into(), cfg.dcr_on_contrastive.to_string()),
        ("symmetric_contrastive".into(), cfg.symmetric_contrastive.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        (
            "aug.order".into(),
            cfg.aug.order().iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
        ),
    ];
    for k in TransformKind::ALL {
        let s = cfg.aug.setting(k);
        let n = k.name();
        out.push((format!("aug.{n}.enabled"), s.enabled.to_string()));
        out.push((format!("aug.{n}.probability"), s.probability.to_string()));
        out.push((format!("aug.{n}.lo"), s.lo.to_string()));
        out.push((format!("aug.{n}.hi"), s.hi.to_string()));
    }
    let w = &cfg.weak;
    out.push(("weak.flip_probability".into(), w.flip_probability.to_string()));
    out.push(("weak.min_area".into(), w.min_area.to_string()));
    out.push(("weak.max_area".into(), w.max_area.to_string()));
    let n = &cfg.net;
    for (k, v) in [
        ("net.input_width", n.input_width),
        ("net.input_height", n.input_height),
        ("net.input_pool", n.input_pool),
        ("net.conv1_channels", n.conv1_channels),
        ("net.conv2_channels", n.conv2_channels),
        ("net.classes", n.classes),
        ("net.proj_hidden", n.proj_hidden),
        ("net.embed_dim", n.embed_dim),
    ] {
        out.push((k.into(), v.to_string()));
    }
    out
}

/// Text that [`parse_config`] maps back to `cfg`.
pub fn render_config(cfg: &TrainConfig) -> String {
    entries(cfg).into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Applies `text` on top of `base`, line by line. `source` names the text
/// in diagnostics.
pub fn apply_text(base: &mut TrainConfig, text: &str, source: &str) -> Result<(), ConfigError> {
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{source}:{}", i + 1);
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: origin.clone(),
            text: line.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Duplicate {
                origin,
                key: key.to_string(),
            });
        }
        set_key(base, key, value, &origin)?;
    }
    Ok(())
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(base: &mut TrainConfig, overrides: &[String]) -> Result<(), ConfigError> {
    for o in overrides {
        let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: "override".into(),
            text: o.clone(),
        })?;
        set_key(base, key.trim(), value.trim(), "override")?;
    }
    Ok(())
}

/// Pulls augmentation ranges into their admissible domains and validates
/// the rest; returns one warning per clamped range.
pub fn finalize(cfg: &mut TrainConfig) -> Result<Vec<String>, ConfigError> {
    let warnings = cfg.aug.clamp_to_domains();
    cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(warnings)
}

pub fn parse_config(text: &str, base: TrainConfig) -> Result<TrainConfig, ConfigError> {
    let mut cfg = base;
    apply_text(&mut cfg, text, "config")?;
    Ok(cfg)
}

pub fn load_config_file(path: &Path, base: TrainConfig) -> Result<TrainConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut cfg = base;
    apply_text(&mut cfg, &text, &path.display().to_string())?;
    Ok(cfg)
}

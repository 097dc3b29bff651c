//! Flat `key = value` run configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment.
//! Command-line overrides use the same keys and are applied after the file.
//! Unknown or repeated keys are errors.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scheduler::{GateThresholds, DEFAULT_T_EASY, DEFAULT_T_HARD};
use crate::synthdata::DataConfig;

/// Training configuration of one run. Which stages of the dual flow are
/// active is decided by the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// No augmentation, no gate.
    Baseline,
    /// RGB shuffle on every sample.
    ShuffleAlways,
    /// Shuffle with probability `1 − d`.
    DaOnly,
    /// Shuffle on every sample, loss gate on.
    NoOnly,
    /// No augmentation, loss gate on.
    NoOnlyNoAug,
    /// Difficulty-gated shuffle and loss gate.
    Full,
    /// Shuffle plus maximum-amplitude brightness/contrast jitter on every
    /// sample. Reference arm for loss-curve comparisons; not an ablation row.
    StrongDa,
}

impl Mode {
    /// The six ablation rows, in table order.
    pub const ABLATION: [Mode; 6] =
        [Mode::Baseline, Mode::ShuffleAlways, Mode::DaOnly, Mode::NoOnlyNoAug, Mode::NoOnly, Mode::Full];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::ShuffleAlways => "shuffle_always",
            Mode::DaOnly => "da_only",
            Mode::NoOnly => "no_only",
            Mode::NoOnlyNoAug => "no_only_noaug",
            Mode::Full => "full",
            Mode::StrongDa => "strong_da",
        }
    }

    /// Whether the original-image pass runs and writes the loss bank.
    pub fn uses_bank(self) -> bool {
        self != Mode::Baseline
    }

    /// Whether the loss gate decides sample weights.
    pub fn gated(self) -> bool {
        matches!(self, Mode::NoOnly | Mode::NoOnlyNoAug | Mode::Full)
    }

    /// Augmentation probability given the DA-flow difficulty.
    pub fn degree(self, d_da: Option<f64>) -> f64 {
        match self {
            Mode::Baseline | Mode::NoOnlyNoAug => 0.0,
            Mode::ShuffleAlways | Mode::NoOnly | Mode::StrongDa => 1.0,
            Mode::DaOnly | Mode::Full => 1.0 - d_da.expect("bank modes compute d_da"),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Mode::ABLATION.iter().chain(&[Mode::StrongDa]).copied().find(|m| m.name() == norm).ok_or_else(|| {
            Error::config(
                "mode",
                format!(
                    "unknown mode `{s}` (expected one of baseline, shuffle_always, da_only, \
                         no_only, no_only_noaug, full, strong_da)"
                ),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    /// Initial bank value; `None` means `ln(n_classes)`.
    pub alpha: Option<f64>,
    pub thresholds: GateThresholds,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub poly_power: f64,
    pub data: DataConfig,
    pub hidden: Vec<usize>,
    /// Extended augmentation: brightness/contrast jitter of amplitude
    /// `jitter_amplitude · degree` on augmented samples. 0 disables it.
    pub jitter_amplitude: f64,
    pub out_dir: PathBuf,
}

impl TrainConfig {
    pub fn new(mode: Mode) -> Self {
        TrainConfig {
            mode,
            seed: 0,
            epochs: 30,
            batch_size: 32,
            lambda: 0.9,
            alpha: None,
            thresholds: GateThresholds::default(),
            base_lr: 2.5e-4,
            momentum: 0.9,
            weight_decay: 5e-4,
            poly_power: 0.9,
            data: DataConfig::default(),
            hidden: vec![64],
            jitter_amplitude: 0.0,
            out_dir: PathBuf::from("runs"),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| (self.data.n_classes as f64).ln())
    }

    /// Layer widths `[D, hidden…, C]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.data.input_dim()];
        s.extend(&self.hidden);
        s.push(self.data.n_classes);
        s
    }

    /// `ceil(n_train / batch_size)`.
    pub fn iters_per_epoch(&self) -> usize {
        self.data.n_train.div_ceil(self.batch_size)
    }

    pub fn total_iters(&self) -> usize {
        self.epochs * self.iters_per_epoch()
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::config("lambda", format!("must be in [0, 1), got {}", self.lambda)));
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(Error::config("alpha", format!("must be finite, got {a}")));
            }
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::config("base_lr", format!("must be > 0, got {}", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", format!("must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", format!("must be >= 0, got {}", self.weight_decay)));
        }
        if !(self.poly_power.is_finite() && self.poly_power > 0.0) {
            return Err(Error::config("poly_power", format!("must be > 0, got {}", self.poly_power)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        if !(0.0..=crate::augment::ColorJitter::MAX_AMPLITUDE).contains(&self.jitter_amplitude) {
            return Err(Error::config(
                "jitter_amplitude",
                format!(
                    "must be in [0, {}], got {}",
                    crate::augment::ColorJitter::MAX_AMPLITUDE,
                    self.jitter_amplitude
                ),
            ));
        }
        Ok(())
    }

    /// `key = value` lines for every key, in [`KEYS`] order. Parses back to
    /// an equal config.
    pub fn to_kv_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.value_of(k))).collect()
    }

    /// FNV-1a hash of every key except mode, seed and out_dir, so runs of one
    /// experiment share a fingerprint.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for k in KEYS.iter().filter(|k| !matches!(**k, "mode" | "seed" | "out_dir")) {
            for b in format!("{k}={};", self.value_of(k)).bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Run directory name `<mode>-s<seed>-<hash>`.
    pub fn run_name(&self) -> String {
        format!("{}-s{}-{:08x}", self.mode, self.seed, self.fingerprint() as u32)
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "mode" => self.mode.to_string(),
            "seed" => self.seed.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "lambda" => self.lambda.to_string(),
            "alpha" => self.alpha.map_or_else(|| "ln_c".to_string(), |a| a.to_string()),
            "t_easy" => self.thresholds.t_easy().to_string(),
            "t_hard" => self.thresholds.t_hard().to_string(),
            "base_lr" => self.base_lr.to_string(),
            "momentum" => self.momentum.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "poly_power" => self.poly_power.to_string(),
            "n_train" => self.data.n_train.to_string(),
            "n_eval" => self.data.n_eval.to_string(),
            "k_targets" => self.data.k_targets.to_string(),
            "image_size" => self.data.image_size.to_string(),
            "n_classes" => self.data.n_classes.to_string(),
            "hidden" => {
                if self.hidden.is_empty() {
                    "none".to_string()
                } else {
                    self.hidden.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
                }
            }
            "jitter_amplitude" => self.jitter_amplitude.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }
}

/// Every accepted key. Command-line flags are the same names in kebab case.
pub const KEYS: [&str; 20] = [
    "mode",
    "seed",
    "epochs",
    "batch_size",
    "lambda",
    "alpha",
    "t_easy",
    "t_hard",
    "base_lr",
    "momentum",
    "weight_decay",
    "poly_power",
    "n_train",
    "n_eval",
    "k_targets",
    "image_size",
    "n_classes",
    "hidden",
    "jitter_amplitude",
    "out_dir",
];

/// Split config-file text into `(key, value)` pairs.
pub fn parse_kv_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line.to_string(), format!("line {}: expected `key = value`", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

/// Build a config from file text (if any) then `overrides`, which win.
/// `mode` has no default and must appear in one of the two.
pub fn parse_config(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<TrainConfig> {
    let file = match file_text {
        Some(t) => parse_kv_text(t)?,
        None => Vec::new(),
    };
    for (i, (k, _)) in file.iter().enumerate() {
        if file[..i].iter().any(|(p, _)| p == k) {
            return Err(Error::config(k.clone(), "given twice in config file"));
        }
    }

    let mut cfg = TrainConfig::new(Mode::Full);
    let mut mode = None;
    let mut t_easy = DEFAULT_T_EASY;
    let mut t_hard = DEFAULT_T_HARD;
    for (raw_key, v) in file.iter().chain(overrides) {
        let key = raw_key.replace('-', "_");
        let k = key.as_str();
        match k {
            "mode" => mode = Some(v.parse::<Mode>()?),
            "seed" => cfg.seed = num(k, v)?,
            "epochs" => cfg.epochs = num(k, v)?,
            "batch_size" => cfg.batch_size = num(k, v)?,
            "lambda" => cfg.lambda = num(k, v)?,
            "alpha" => cfg.alpha = if v.eq_ignore_ascii_case("ln_c") { None } else { Some(num(k, v)?) },
            "t_easy" => t_easy = num(k, v)?,
            "t_hard" => t_hard = num(k, v)?,
            "base_lr" => cfg.base_lr = num(k, v)?,
            "momentum" => cfg.momentum = num(k, v)?,
            "weight_decay" => cfg.weight_decay = num(k, v)?,
            "poly_power" => cfg.poly_power = num(k, v)?,
            "n_train" => cfg.data.n_train = num(k, v)?,
            "n_eval" => cfg.data.n_eval = num(k, v)?,
            "k_targets" => cfg.data.k_targets = num(k, v)?,
            "image_size" => cfg.data.image_size = num(k, v)?,
            "n_classes" => cfg.data.n_classes = num(k, v)?,
            "hidden" => {
                cfg.hidden = if v.eq_ignore_ascii_case("none") || v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|w| num::<usize>(k, w.trim())).collect::<Result<_>>()?
                }
            }
            "jitter_amplitude" => cfg.jitter_amplitude = num(k, v)?,
            "out_dir" => cfg.out_dir = PathBuf::from(v),
            _ => return Err(Error::config(raw_key.clone(), "unknown key")),
        }
    }
    cfg.mode = mode.ok_or_else(|| Error::config("mode", "required (no default)"))?;
    cfg.thresholds = GateThresholds::new(t_easy, t_hard).map_err(|_| {
        Error::config(
            "t_easy",
            format!("thresholds must satisfy 0 <= t_easy < t_hard <= 1, got t_easy={t_easy}, t_hard={t_hard}"),
        )
    })?;
    cfg.data.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn empty_config_needs_mode() {
        let err = parse_config(None, &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "mode"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn defaults_fill_absent_keys() {
        let cfg = parse_config(Some("mode = full\n"), &[]).unwrap();
        assert_eq!(cfg.lambda, 0.9);
        assert_eq!(cfg.alpha(), 4f64.ln());
        assert_eq!(cfg.thresholds, GateThresholds::new(0.05, 0.95).unwrap());
        assert_eq!(cfg.momentum, 0.9);
        assert_eq!(cfg.weight_decay, 5e-4);
        assert_eq!(cfg.base_lr, 2.5e-4);
        assert_eq!(cfg.poly_power, 0.9);
        assert_eq!(cfg.epochs, 30);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.data, DataConfig::default());
    }

    #[test]
    fn inverted_thresholds_are_rejected() {
        let err = parse_config(Some("mode=full\nt_easy=0.5\nt_hard=0.4"), &[]).unwrap_err();
        assert!(err.to_string().contains("t_easy"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let cfg = parse_config(Some("mode = da_only\nlambda = 0.9"), &[kv("lambda", "0.5")]).unwrap();
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.mode, Mode::DaOnly);
    }

    #[test]
    fn unknown_and_malformed_keys_name_the_key() {
        let err = parse_config(Some("mode=full\nlamda=0.5"), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "lamda"));
        let err = parse_config(Some("mode=full\nepochs=lots"), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "epochs"));
        let err = parse_config(Some("mode=full\nlambda=1.0"), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "lambda"));
        let err = parse_config(Some("mode=full\nmode=baseline"), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "mode"));
        assert!(parse_config(Some("just words"), &[]).is_err());
        let err = parse_config(Some("mode=full\nn_train=2001"), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "n_train"));
    }

    #[test]
    fn kebab_case_overrides_are_accepted() {
        let cfg = parse_config(None, &[kv("mode", "full"), kv("batch-size", "20")]).unwrap();
        assert_eq!(cfg.batch_size, 20);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = parse_config(Some("mode=no_only\nseed=7\nhidden=32,16\nalpha=1.25\nt_easy=0.1"), &[]).unwrap();
        let back = parse_config(Some(&cfg.to_kv_text()), &[]).unwrap();
        assert_eq!(back, cfg);
        cfg.hidden.clear();
        let back = parse_config(Some(&cfg.to_kv_text()), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn fingerprint_ignores_mode_and_seed() {
        let a = parse_config(None, &[kv("mode", "full"), kv("seed", "1")]).unwrap();
        let b = parse_config(None, &[kv("mode", "baseline"), kv("seed", "2")]).unwrap();
        let c = parse_config(None, &[kv("mode", "full"), kv("lambda", "0.5")]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert!(a.run_name().starts_with("full-s1-"));
    }

    #[test]
    fn mode_names_parse() {
        for m in Mode::ABLATION.iter().chain(&[Mode::StrongDa]) {
            assert_eq!(m.name().parse::<Mode>().unwrap(), *m);
        }
        assert_eq!("NO-ONLY".parse::<Mode>().unwrap(), Mode::NoOnly);
        assert!("fancy".parse::<Mode>().is_err());
    }
}

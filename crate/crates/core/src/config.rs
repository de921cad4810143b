//! Run configuration: a flat `key = value` text format.
//!
//! The canonical rendering (sorted keys, one per line) is embedded in
//! checkpoints and run manifests, so a manifest can always be replayed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Error;

/// Inversion-network architecture choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Unet,
    Uresnet,
}

impl Arch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::Unet => "unet",
            Arch::Uresnet => "uresnet",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "unet" => Ok(Arch::Unet),
            "uresnet" => Ok(Arch::Uresnet),
            _ => Err(Error::InvalidValue {
                key: "arch".into(),
                reason: format!("expected unet|uresnet, got `{s}`"),
            }),
        }
    }
}

/// Snapshot selection rule for the reconstruction-initialization stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconSelect {
    HighestSsim,
    LowestSsim,
}

impl ReconSelect {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReconSelect::HighestSsim => "highest_ssim",
            ReconSelect::LowestSsim => "lowest_ssim",
        }
    }
}

/// Versioned experiment configuration. Field defaults are the desk-scale
/// values; paper-scale settings are reachable by editing the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub arch: Arch,
    pub batch_images: usize,
    pub batch_patches: usize,
    pub data_dir: String,
    pub db_size: usize,
    pub descriptor_dim: usize,
    pub dropout: f64,
    pub encoder_checkpoint: String,
    pub epochs_attack: usize,
    pub epochs_joint: usize,
    pub epochs_recon: usize,
    pub epochs_utility: usize,
    pub harris_k: f64,
    pub harris_nms_radius: usize,
    pub harris_sigma: f64,
    pub image_size: usize,
    pub keypoint_budget: usize,
    pub lambda: f64,
    pub lr_phi: f64,
    pub lr_theta: f64,
    pub lr_utility: f64,
    pub ninja_submodules: usize,
    pub patch_size: usize,
    pub perceptual_weights: String,
    pub phi_checkpoint: String,
    pub recon_select: ReconSelect,
    pub seed: u64,
    pub theta_checkpoint: String,
    pub triplet_margin: f64,
    pub unet_width: usize,
    pub uresnet_width: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            arch: Arch::Unet,
            batch_images: 8,
            batch_patches: 64,
            data_dir: String::new(),
            db_size: 8000,
            descriptor_dim: 128,
            dropout: 0.1,
            encoder_checkpoint: String::new(),
            epochs_attack: 5,
            epochs_joint: 4,
            epochs_recon: 4,
            epochs_utility: 20,
            harris_k: 0.04,
            harris_nms_radius: 4,
            harris_sigma: 1.0,
            image_size: 64,
            keypoint_budget: 1000,
            lambda: 0.0,
            lr_phi: 1e-3,
            lr_theta: 1e-3,
            lr_utility: 0.01,
            ninja_submodules: 1,
            patch_size: 32,
            perceptual_weights: String::new(),
            phi_checkpoint: String::new(),
            recon_select: ReconSelect::HighestSsim,
            seed: 0,
            theta_checkpoint: String::new(),
            triplet_margin: 1.0,
            unet_width: 16,
            uresnet_width: 8,
        }
    }
}

/// Every key the format defines, sorted. Keep in sync with the struct.
pub const KEYS: &[&str] = &[
    "arch",
    "batch_images",
    "batch_patches",
    "data_dir",
    "db_size",
    "descriptor_dim",
    "dropout",
    "encoder_checkpoint",
    "epochs_attack",
    "epochs_joint",
    "epochs_recon",
    "epochs_utility",
    "harris_k",
    "harris_nms_radius",
    "harris_sigma",
    "image_size",
    "keypoint_budget",
    "lambda",
    "lr_phi",
    "lr_theta",
    "lr_utility",
    "ninja_submodules",
    "patch_size",
    "perceptual_weights",
    "phi_checkpoint",
    "recon_select",
    "seed",
    "theta_checkpoint",
    "triplet_margin",
    "unet_width",
    "uresnet_width",
];

impl ExperimentConfig {
    /// Canonical text: sorted `key = value` lines. Parsing this text yields
    /// an identical config.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for &key in KEYS {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.value_of(key));
            out.push('\n');
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "arch" => self.arch.as_str().to_string(),
            "batch_images" => self.batch_images.to_string(),
            "batch_patches" => self.batch_patches.to_string(),
            "data_dir" => self.data_dir.clone(),
            "db_size" => self.db_size.to_string(),
            "descriptor_dim" => self.descriptor_dim.to_string(),
            "dropout" => self.dropout.to_string(),
            "encoder_checkpoint" => self.encoder_checkpoint.clone(),
            "epochs_attack" => self.epochs_attack.to_string(),
            "epochs_joint" => self.epochs_joint.to_string(),
            "epochs_recon" => self.epochs_recon.to_string(),
            "epochs_utility" => self.epochs_utility.to_string(),
            "harris_k" => self.harris_k.to_string(),
            "harris_nms_radius" => self.harris_nms_radius.to_string(),
            "harris_sigma" => self.harris_sigma.to_string(),
            "image_size" => self.image_size.to_string(),
            "keypoint_budget" => self.keypoint_budget.to_string(),
            "lambda" => self.lambda.to_string(),
            "lr_phi" => self.lr_phi.to_string(),
            "lr_theta" => self.lr_theta.to_string(),
            "lr_utility" => self.lr_utility.to_string(),
            "ninja_submodules" => self.ninja_submodules.to_string(),
            "patch_size" => self.patch_size.to_string(),
            "perceptual_weights" => self.perceptual_weights.clone(),
            "phi_checkpoint" => self.phi_checkpoint.clone(),
            "recon_select" => self.recon_select.as_str().to_string(),
            "seed" => self.seed.to_string(),
            "theta_checkpoint" => self.theta_checkpoint.clone(),
            "triplet_margin" => self.triplet_margin.to_string(),
            "unet_width" => self.unet_width.to_string(),
            "uresnet_width" => self.uresnet_width.to_string(),
            _ => unreachable!("unknown key"),
        }
    }

    /// Parse the flat text format. Blank lines and `#` comments are allowed;
    /// every key in [`KEYS`] must be present exactly once.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidValue {
                key: format!("line {}", lineno + 1),
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::InvalidValue { key, reason: "unknown key".into() });
            }
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(Error::InvalidValue { key, reason: "duplicate key".into() });
            }
            pairs.push((key, value));
        }
        let lookup = |key: &str| -> Result<&str, Error> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::MissingKey { key: key.into(), expected: KEYS.join(", ") })
        };

        fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T, Error> {
            v.parse::<T>().map_err(|_| Error::InvalidValue {
                key: key.into(),
                reason: format!("cannot parse `{v}`"),
            })
        }

        let cfg = ExperimentConfig {
            arch: Arch::parse(lookup("arch")?)?,
            batch_images: num("batch_images", lookup("batch_images")?)?,
            batch_patches: num("batch_patches", lookup("batch_patches")?)?,
            data_dir: lookup("data_dir")?.to_string(),
            db_size: num("db_size", lookup("db_size")?)?,
            descriptor_dim: num("descriptor_dim", lookup("descriptor_dim")?)?,
            dropout: num("dropout", lookup("dropout")?)?,
            encoder_checkpoint: lookup("encoder_checkpoint")?.to_string(),
            epochs_attack: num("epochs_attack", lookup("epochs_attack")?)?,
            epochs_joint: num("epochs_joint", lookup("epochs_joint")?)?,
            epochs_recon: num("epochs_recon", lookup("epochs_recon")?)?,
            epochs_utility: num("epochs_utility", lookup("epochs_utility")?)?,
            harris_k: num("harris_k", lookup("harris_k")?)?,
            harris_nms_radius: num("harris_nms_radius", lookup("harris_nms_radius")?)?,
            harris_sigma: num("harris_sigma", lookup("harris_sigma")?)?,
            image_size: num("image_size", lookup("image_size")?)?,
            keypoint_budget: num("keypoint_budget", lookup("keypoint_budget")?)?,
            lambda: num("lambda", lookup("lambda")?)?,
            lr_phi: num("lr_phi", lookup("lr_phi")?)?,
            lr_theta: num("lr_theta", lookup("lr_theta")?)?,
            lr_utility: num("lr_utility", lookup("lr_utility")?)?,
            ninja_submodules: num("ninja_submodules", lookup("ninja_submodules")?)?,
            patch_size: num("patch_size", lookup("patch_size")?)?,
            perceptual_weights: lookup("perceptual_weights")?.to_string(),
            phi_checkpoint: lookup("phi_checkpoint")?.to_string(),
            recon_select: match lookup("recon_select")? {
                "highest_ssim" => ReconSelect::HighestSsim,
                "lowest_ssim" => ReconSelect::LowestSsim,
                other => {
                    return Err(Error::InvalidValue {
                        key: "recon_select".into(),
                        reason: format!("expected highest_ssim|lowest_ssim, got `{other}`"),
                    })
                }
            },
            seed: num("seed", lookup("seed")?)?,
            theta_checkpoint: lookup("theta_checkpoint")?.to_string(),
            triplet_margin: num("triplet_margin", lookup("triplet_margin")?)?,
            unet_width: num("unet_width", lookup("unet_width")?)?,
            uresnet_width: num("uresnet_width", lookup("uresnet_width")?)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        fn bad(key: &str, reason: &str) -> Error {
            Error::InvalidValue { key: key.into(), reason: reason.into() }
        }
        if self.lambda < 0.0 {
            return Err(bad("lambda", "must be >= 0"));
        }
        for (key, v) in [
            ("lr_phi", self.lr_phi),
            ("lr_theta", self.lr_theta),
            ("lr_utility", self.lr_utility),
        ] {
            if !(v > 0.0) {
                return Err(bad(key, "must be > 0"));
            }
        }
        if self.image_size == 0 || self.image_size % 32 != 0 {
            return Err(bad("image_size", "must be a positive multiple of 32"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(bad("dropout", "must be in [0,1)"));
        }
        for (key, v) in [
            ("batch_images", self.batch_images),
            ("batch_patches", self.batch_patches),
            ("descriptor_dim", self.descriptor_dim),
            ("keypoint_budget", self.keypoint_budget),
            ("ninja_submodules", self.ninja_submodules),
            ("unet_width", self.unet_width),
            ("uresnet_width", self.uresnet_width),
        ] {
            if v == 0 {
                return Err(bad(key, "must be > 0"));
            }
        }
        if self.patch_size < 3 {
            return Err(bad("patch_size", "must be >= 3"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.lambda = 2.5;
        cfg.seed = 1234;
        cfg.arch = Arch::Uresnet;
        cfg.data_dir = "runs/data".into();
        let text = cfg.to_canonical_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(text, back.to_canonical_text());
    }

    #[test]
    fn missing_key_lists_expected_keys() {
        let mut cfg_text = ExperimentConfig::default().to_canonical_text();
        cfg_text = cfg_text.replace("lambda = 0\n", "");
        match ExperimentConfig::parse(&cfg_text) {
            Err(Error::MissingKey { key, expected }) => {
                assert_eq!(key, "lambda");
                for k in KEYS {
                    assert!(expected.contains(k));
                }
            }
            other => panic!("expected MissingKey, got {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_lambda() {
        let text = ExperimentConfig::default().to_canonical_text().replace("lambda = 0", "lambda = -1");
        assert!(matches!(ExperimentConfig::parse(&text), Err(Error::InvalidValue { .. })));
    }

    #[test]
    fn rejects_unknown_key() {
        let mut text = ExperimentConfig::default().to_canonical_text();
        text.push_str("mystery = 1\n");
        assert!(matches!(ExperimentConfig::parse(&text), Err(Error::InvalidValue { .. })));
    }
}

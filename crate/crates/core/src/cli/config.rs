//! Run configuration: an INI file with an optional top-level `seed` and
//! `[data]`, `[model]` and `[vote]` sections.
//!
//! ```ini
//! seed = 42
//!
//! [data]
//! train = train.tsv
//! dev = dev.tsv
//! embeddings = glove.840B.300d.txt
//! embedding_dim = 300
//! header = false
//!
//! [model]
//! max_length = 512
//! epochs = 15
//!
//! [vote]
//! order = xlnet,roberta,bert,bigrucnn
//! tie_break = priority
//! ```
//!
//! Relative paths resolve against `$INFOTWEET_DATA_ROOT` when set, otherwise
//! against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};

use crate::bigrucnn::ModelConfig;
use crate::ensemble::{TieBreak, VoteConfig, DEFAULT_PRIORITY};
use crate::error::{Error, Result};

pub const DATA_ROOT_ENV: &str = "INFOTWEET_DATA_ROOT";
pub const DEFAULT_EMBEDDING_DIM: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    /// Split files start with a header row.
    pub header: bool,
    pub model: ModelConfig,
    pub vote: VoteConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        RunConfig {
            train: None,
            dev: None,
            test: None,
            embeddings: None,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            header: false,
            seed: model.seed,
            model,
            vote: VoteConfig {
                members: DEFAULT_PRIORITY.iter().map(|s| s.to_string()).collect(),
                tie_break: TieBreak::Priority,
            },
        }
    }
}

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {value:?}")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("[{section}] {key}: expected a boolean, got {value:?}"))),
    }
}

fn unknown(section: &str, key: &str) -> Error {
    Error::Config(format!("[{section}] unknown key {key:?}"))
}

impl RunConfig {
    /// Reads `path`, resolving relative paths as described in the module docs.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root),
            _ => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        Self::parse(&text, &base).map_err(|e| e.in_file(path))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut config = RunConfig::default();
        let (mut top_seed, mut model_seed) = (None, None);
        for (section, props) in ini.iter() {
            match section {
                None => top_seed = config.apply_general(props)?.or(top_seed),
                Some("data") => config.apply_data(props, base)?,
                Some("model") => model_seed = config.apply_model(props)?.or(model_seed),
                Some("vote") => config.apply_vote(props)?,
                Some(other) => return Err(Error::Config(format!("unknown section [{other}]"))),
            }
        }
        config.seed = match (top_seed, model_seed) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(
                    "[model] seed conflicts with the top-level seed; set it once".into(),
                ))
            }
            (Some(seed), _) | (None, Some(seed)) => seed,
            (None, None) => config.seed,
        };
        config.model.seed = config.seed;
        config.model.validate()?;
        config
            .vote
            .validate()
            .map_err(|e| Error::Config(format!("[vote] {e}")))?;
        Ok(config)
    }

    fn apply_general(&self, props: &Properties) -> Result<Option<u64>> {
        let mut seed = None;
        for (key, value) in props.iter() {
            match key {
                "seed" => seed = Some(parse_value("", key, value)?),
                _ => return Err(Error::Config(format!("unknown top-level key {key:?}"))),
            }
        }
        Ok(seed)
    }

    fn apply_data(&mut self, props: &Properties, base: &Path) -> Result<()> {
        let resolve = |v: &str| {
            let p = Path::new(v.trim());
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        for (key, value) in props.iter() {
            match key {
                "train" => self.train = Some(resolve(value)),
                "dev" => self.dev = Some(resolve(value)),
                "test" => self.test = Some(resolve(value)),
                "embeddings" => self.embeddings = Some(resolve(value)),
                "embedding_dim" => self.embedding_dim = parse_value("data", key, value)?,
                "header" => self.header = parse_bool("data", key, value)?,
                _ => return Err(unknown("data", key)),
            }
        }
        Ok(())
    }

    /// Returns the `[model] seed`, if present, for the conflict check.
    fn apply_model(&mut self, props: &Properties) -> Result<Option<u64>> {
        let m = &mut self.model;
        let mut seed = None;
        for (key, value) in props.iter() {
            let s = "model";
            match key {
                "max_length" => m.max_length = parse_value(s, key, value)?,
                "conv_filters" => m.conv_filters = parse_value(s, key, value)?,
                "conv_kernel" => m.conv_kernel = parse_value(s, key, value)?,
                "gru_hidden" => m.gru_hidden = parse_value(s, key, value)?,
                "dropout" => m.dropout = parse_value(s, key, value)?,
                "learning_rate" => m.learning_rate = parse_value(s, key, value)?,
                "epochs" => m.epochs = parse_value(s, key, value)?,
                "batch_size" => m.batch_size = parse_value(s, key, value)?,
                "trainable_embeddings" => m.trainable_embeddings = parse_bool(s, key, value)?,
                "adam_beta1" => m.adam_beta1 = parse_value(s, key, value)?,
                "adam_beta2" => m.adam_beta2 = parse_value(s, key, value)?,
                "adam_epsilon" => m.adam_epsilon = parse_value(s, key, value)?,
                "seed" => seed = Some(parse_value(s, key, value)?),
                _ => return Err(unknown(s, key)),
            }
        }
        Ok(seed)
    }

    fn apply_vote(&mut self, props: &Properties) -> Result<()> {
        for (key, value) in props.iter() {
            match key {
                "order" => self.vote.members = parse_order(value),
                "tie_break" => self.vote.tie_break = value.trim().parse()?,
                _ => return Err(unknown("vote", key)),
            }
        }
        Ok(())
    }

    /// Fails with the first missing input file.
    pub fn check_inputs(&self, needed: &[(&str, &Option<PathBuf>)]) -> Result<()> {
        for (name, path) in needed {
            match path {
                None => return Err(Error::Config(format!("no {name} path configured"))),
                Some(p) if !p.is_file() => {
                    return Err(Error::Config(format!("{name} file {} does not exist", p.display())))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Splits a comma-separated member list, dropping blanks.
pub fn parse_order(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_sections() {
        let config = RunConfig::parse("", Path::new("/data")).unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.vote.members, DEFAULT_PRIORITY);
    }

    #[test]
    fn full_file() {
        let text = "seed = 7\n[data]\ntrain = a/train.tsv\ndev = /abs/dev.tsv\nembedding_dim = 6\nheader = yes\n\
                    [model]\nmax_length = 64\ndropout = 0.1\ntrainable_embeddings = true\n\
                    [vote]\norder = bert, xlnet\ntie_break = informative\n";
        let config = RunConfig::parse(text, Path::new("/root")).unwrap();
        assert_eq!(config.train, Some(PathBuf::from("/root/a/train.tsv")));
        assert_eq!(config.dev, Some(PathBuf::from("/abs/dev.tsv")));
        assert_eq!(config.embedding_dim, 6);
        assert!(config.header);
        assert_eq!(config.model.max_length, 64);
        assert_eq!(config.model.dropout, 0.1);
        assert!(config.model.trainable_embeddings);
        assert_eq!(config.model.seed, 7);
        assert_eq!(config.vote.members, vec!["bert", "xlnet"]);
        assert_eq!(config.vote.tie_break, TieBreak::TowardInformative);

        let config = RunConfig::parse("[model]\nseed = 5\n", Path::new(".")).unwrap();
        assert_eq!((config.seed, config.model.seed), (5, 5));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let base = Path::new(".");
        for text in [
            "[mdoel]\nepochs = 3\n",
            "[model]\nepoch = 3\n",
            "[model]\ndropout = 1.5\n",
            "[model]\nepochs = many\n",
            "[data]\nheader = maybe\n",
            "[vote]\norder = bert\n",
            "seed = 1\n[model]\nseed = 2\n",
        ] {
            let err = RunConfig::parse(text, base).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text:?}: {err:?}");
        }
    }
}

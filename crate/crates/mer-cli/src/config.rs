//! Plain-text `key = value` configuration files and flag merging.
//!
//! Flags win over file values; unknown keys are rejected up front. The fully
//! resolved configuration is hashed (FNV-1a over sorted `key=value` lines)
//! and the hash is stamped into every output CSV as a provenance comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mer_core::error::{Error, Result};
use mer_core::numerics::fnv1a64;

/// Every key a config file may contain.
const KNOWN_KEYS: &[&str] = &[
    "features_dir",
    "annotations_dir",
    "eval_features_dir",
    "eval_annotations_dir",
    "checkpoint_out",
    "report_out",
    "out",
    "audio_dir",
    "out_dir",
    "n_mels",
    "feature_dim",
    "cnn_filters",
    "fc_units",
    "gru_units",
    "branched",
    "dropout",
    "maxout_pieces",
    "batch_size",
    "seq_len",
    "learning_rate",
    "l1",
    "l2",
    "max_epochs",
    "patience",
    "seed",
    "val_fraction",
    "seq_lens",
    "seeds",
    "eval_mode",
];

/// Parsed config file: raw string values by key.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        if !path.is_file() {
            return Err(Error::Config(format!(
                "config file not found: {}",
                path.display()
            )));
        }
        let text = std::fs::read_to_string(path)?;
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key = value, got {line:?}",
                    path.display(),
                    no + 1
                ))
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "{}:{}: unknown key {key:?}",
                    path.display(),
                    no + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    /// Flag value if present, else the parsed file value.
    pub fn resolve<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>> {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }

    pub fn resolve_path(&self, flag: &Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        Ok(self.values.get(key).map(PathBuf::from))
    }

    /// Comma-separated list value.
    pub fn resolve_list<T: FromStr>(
        &self,
        flag: &Option<Vec<T>>,
        key: &str,
    ) -> Result<Option<Vec<T>>>
    where
        T: Clone,
    {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Config(format!("config key {key}: bad element {s:?}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

/// Canonical `key=value` rendering of a resolved configuration, hashed for
/// provenance. Entries arrive in any order; the hash sorts them.
#[derive(Debug, Default)]
pub struct ResolvedConfig {
    entries: BTreeMap<String, String>,
}

impl ResolvedConfig {
    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn hash(&self) -> String {
        let canonical: String = self
            .entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    /// The comment line stamped into output CSVs.
    pub fn provenance(&self) -> String {
        format!("config_hash={}", self.hash())
    }
}

pub fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        return Err(Error::Config(format!(
            "{what} directory not found: {}",
            path.display()
        )));
    }
    Ok(())
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!("{what} not found: {}", path.display())));
    }
    Ok(())
}

/// Creates the parent directory of an output file when needed.
pub fn prepare_output(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_cfg(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
        let path = dir.join("run.cfg");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn parses_values_and_skips_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_cfg(dir.path(), "# run settings\nseq_len = 20\n\nseed=7\n");
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.resolve::<usize>(&None, "seq_len").unwrap(), Some(20));
        assert_eq!(cfg.resolve::<u64>(&None, "seed").unwrap(), Some(7));
        assert_eq!(cfg.resolve::<usize>(&None, "batch_size").unwrap(), None);
    }

    #[test]
    fn flags_win_over_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_cfg(dir.path(), "seq_len = 20\n");
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.resolve::<usize>(&Some(30), "seq_len").unwrap(), Some(30));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_cfg(dir.path(), "made_up = 1\n");
        let err = FileConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("made_up"), "{err}");

        let path = write_cfg(dir.path(), "seq_len = banana\n");
        let cfg = FileConfig::load(&path).unwrap();
        let err = cfg.resolve::<usize>(&None, "seq_len").unwrap_err();
        assert!(err.to_string().contains("banana"), "{err}");

        let path = write_cfg(dir.path(), "just a line\n");
        assert!(FileConfig::load(&path).is_err());
    }

    #[test]
    fn lists_parse_from_file_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_cfg(dir.path(), "seq_lens = 10, 20,30\n");
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(
            cfg.resolve_list::<usize>(&None, "seq_lens").unwrap(),
            Some(vec![10, 20, 30])
        );
        assert_eq!(
            cfg.resolve_list(&Some(vec![60usize]), "seq_lens").unwrap(),
            Some(vec![60])
        );
    }

    #[test]
    fn hash_depends_on_values_not_insertion_order() {
        let mut a = ResolvedConfig::default();
        a.put("seed", 1);
        a.put("seq_len", 20);
        let mut b = ResolvedConfig::default();
        b.put("seq_len", 20);
        b.put("seed", 1);
        assert_eq!(a.hash(), b.hash());
        let mut c = ResolvedConfig::default();
        c.put("seed", 2);
        c.put("seq_len", 20);
        assert_ne!(a.hash(), c.hash());
        assert!(a.provenance().starts_with("config_hash="));
    }
}

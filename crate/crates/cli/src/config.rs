//! Run configuration read from a TOML file. Keys mirror the long flags;
//! a flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub q: Option<f64>,
    pub f: Option<f64>,
    pub h: Option<f64>,
    #[serde(rename = "L", alias = "big_l", alias = "big-l")]
    pub threshold: Option<f64>,
    pub m: Option<u32>,
    pub depth: Option<u32>,
    pub depths: Option<Vec<u32>>,
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub restarts: Option<usize>,
    pub grid: Option<u32>,
    pub suite: Option<String>,
    pub n: Option<usize>,
    pub phi: Option<PathBuf>,
    pub exact: Option<bool>,
    pub refine: Option<u32>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub format: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("--config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("--config {}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mirrored_keys() {
        let c: FileConfig =
            toml::from_str("q = 0.5\nL = 1.2\ndepths = [4, 6]\nsuite = \"gphi\"").unwrap();
        assert_eq!(c.q, Some(0.5));
        assert_eq!(c.threshold, Some(1.2));
        assert_eq!(c.depths, Some(vec![4, 6]));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}

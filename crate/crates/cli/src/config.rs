//! Optional `key=value` defaults: `n`, `out_dir`, `workers`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    pub n: Option<u32>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Config::parse(&text)
    }

    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> anyhow::Result<Config> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key=value", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || anyhow!("config line {}: bad value `{value}` for {key}", i + 1);
            match key {
                "n" => cfg.n = Some(value.parse().map_err(|_| bad())?),
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                "workers" => {
                    let w: usize = value.parse().map_err(|_| bad())?;
                    if w == 0 {
                        return Err(bad());
                    }
                    cfg.workers = Some(w);
                }
                _ => bail!("config line {}: unknown key `{key}`", i + 1),
            }
        }
        Ok(cfg)
    }

    /// Relative output paths land in `out_dir` when one is configured.
    pub fn output_path(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}

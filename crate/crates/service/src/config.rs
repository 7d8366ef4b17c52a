// Copyright 2026 The vsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::ServiceError;

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_ci_samples() -> usize {
    vsyn_core::confidence::DEFAULT_MC_SAMPLES
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub key_file: PathBuf,
    pub curator_token: String,
    pub analyst_token: String,
    #[serde(default = "default_ci_samples")]
    pub ci_samples: usize,
}

impl ServiceConfig {
    /// Parses TOML; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ServiceError> {
        let mut config: Self =
            toml::from_str(text).map_err(|e| ServiceError::config(format!("invalid config: {e}")))?;
        for path in [&mut config.data_dir, &mut config.key_file] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn check(&self) -> Result<(), ServiceError> {
        if self.curator_token.len() < 8 || self.analyst_token.len() < 8 {
            return Err(ServiceError::config("tokens must be at least 8 characters"));
        }
        if self.curator_token == self.analyst_token {
            return Err(ServiceError::config("curator and analyst tokens must differ"));
        }
        if self.ci_samples == 0 {
            return Err(ServiceError::config("ci_samples must be positive"));
        }
        Ok(())
    }
}

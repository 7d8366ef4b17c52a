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

//! Key file: one `<table> <64 hex digits>` line per table. `#` starts a
//! comment. The file is rewritten atomically and created owner-only.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::synopsis::SecretKey;

pub const KEY_FILE_ENV: &str = "VSYN_KEY_FILE";

/// `$VSYN_KEY_FILE` if set, otherwise `fallback`.
pub fn key_file_path(fallback: impl Into<PathBuf>) -> PathBuf {
    std::env::var_os(KEY_FILE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| fallback.into())
}

#[derive(Debug)]
pub struct KeyFile {
    path: PathBuf,
    keys: BTreeMap<String, SecretKey>,
}

impl KeyFile {
    /// Reads `path`; a missing file is an empty key set.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let keys = match fs::read_to_string(&path) {
            Ok(text) => parse(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self { path, keys })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, table: &str) -> Option<&SecretKey> {
        self.keys.get(table)
    }

    pub fn tables(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    /// Existing key for `table`, or a fresh one written through to disk.
    pub fn get_or_create(&mut self, table: &str) -> Result<SecretKey> {
        if let Some(key) = self.keys.get(table) {
            return Ok(key.clone());
        }
        crate::store::check_table_name(table)?;
        let key = SecretKey::generate();
        self.keys.insert(table.to_string(), key.clone());
        self.save()?;
        Ok(key)
    }

    pub fn save(&self) -> Result<()> {
        let mut text = String::new();
        for (table, key) in &self.keys {
            text.push_str(table);
            text.push(' ');
            text.push_str(&key.to_hex());
            text.push('\n');
        }
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let tmp = self.path.with_extension("tmp");
        let mut options = fs::OpenOptions::new();
        options.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            options.mode(0o600);
        }
        let mut file = options.open(&tmp)?;
        file.write_all(text.as_bytes())?;
        file.sync_all()?;
        fs::rename(&tmp, &self.path)?;
        Ok(())
    }
}

fn parse(text: &str) -> Result<BTreeMap<String, SecretKey>> {
    let mut keys = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(table), Some(hex), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Key(format!(
                "key file line {}: expected `<table> <hex key>`",
                n + 1
            )));
        };
        let key = SecretKey::from_hex(hex).map_err(|e| Error::Key(format!("key file line {}: {e}", n + 1)))?;
        if keys.insert(table.to_string(), key).is_some() {
            return Err(Error::Key(format!(
                "key file line {}: duplicate table `{table}`",
                n + 1
            )));
        }
    }
    Ok(keys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("keys");
        let mut kf = KeyFile::open(&path).unwrap();
        let a = kf.get_or_create("alpha").unwrap();
        let again = kf.get_or_create("alpha").unwrap();
        assert_eq!(a.as_bytes(), again.as_bytes());
        kf.get_or_create("beta").unwrap();
        let reread = KeyFile::open(&path).unwrap();
        assert_eq!(reread.get("alpha").unwrap().as_bytes(), a.as_bytes());
        assert_eq!(reread.tables().collect::<Vec<_>>(), ["alpha", "beta"]);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap().len(), "alpha ".len() + 64);
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            assert_eq!(fs::metadata(&path).unwrap().permissions().mode() & 0o777, 0o600);
        }
    }

    #[test]
    fn parse_errors() {
        assert!(parse("# only a comment\n\n").unwrap().is_empty());
        assert!(parse("t 00").is_err());
        assert!(parse("t").is_err());
        let zero = "0".repeat(64);
        assert!(parse(&format!("t {zero}\nt {zero}")).is_err());
        assert!(parse(&format!("t {zero} extra")).is_err());
        assert_eq!(parse(&format!("t {zero} # note")).unwrap()["t"].as_bytes(), &[0u8; 32]);
    }
}

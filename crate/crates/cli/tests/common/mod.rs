#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use crossmap_cli::config::Config;
use crossmap_cli::pipeline::run_pipeline;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture_config() -> Config {
    Config::load(&root().join("configs/fixture.toml")).unwrap()
}

/// One pipeline run on the fixture config, shared by every test in the binary.
pub fn shared_artifacts() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        run_pipeline(&fixture_config(), Some(dir.path())).unwrap();
        dir
    })
    .path()
}

/// A private copy of the shared artifacts, so adjudication writes stay isolated.
pub fn artifacts_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(shared_artifacts()).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::CliError;
use crate::jsonw::Json;
use crate::params::Params;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a 64-bit hash; used for config digests and output checksums. Fast,
/// dependency-free, and stable across platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn checksum_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

/// Write `manifest.json` describing one finished run. Output paths are
/// stored relative to the run directory with fresh checksums, so a re-run
/// with the same config and version can be compared checksum-for-checksum.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    params: &Params,
    started: DateTime<Utc>,
    workers: usize,
    outputs: &[PathBuf],
) -> Result<(), CliError> {
    let mut listed = Vec::new();
    for rel in outputs {
        let checksum = checksum_file(&dir.join(rel))?;
        listed.push(Json::Obj(vec![
            ("path".into(), Json::str(rel.to_string_lossy())),
            ("checksum".into(), Json::Str(checksum)),
        ]));
    }
    let parameters = Json::Obj(
        params
            .iter()
            .map(|(k, v)| (k.clone(), Json::str(v)))
            .collect(),
    );
    let doc = Json::Obj(vec![
        ("command".into(), Json::str(command)),
        ("artifact_version".into(), Json::str(ARTIFACT_VERSION)),
        ("config_digest".into(), Json::Str(params.digest())),
        ("workers".into(), Json::Int(workers as i64)),
        (
            "started".into(),
            Json::Str(started.to_rfc3339_opts(SecondsFormat::Micros, true)),
        ),
        (
            "finished".into(),
            Json::Str(Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true)),
        ),
        ("parameters".into(), parameters),
        ("outputs".into(), Json::Arr(listed)),
    ]);
    std::fs::write(dir.join("manifest.json"), doc.render())?;
    Ok(())
}

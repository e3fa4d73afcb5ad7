//! Run manifests: every output embeds the parameters that produced it.
//!
//! Reruns with an equal manifest produce byte-identical payloads; the
//! timestamp is caller-suppliable (`--timestamp`) so archived runs can be
//! reproduced bit for bit. No configuration comes from the environment.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "shapestore";

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub input_path: String,
    pub input_sha256: String,
    /// Every resolved parameter, defaults materialized.
    pub parameters: serde_json::Value,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        input_path: &str,
        input_bytes: &[u8],
        parameters: serde_json::Value,
        timestamp: Option<String>,
    ) -> Self {
        RunManifest {
            tool: TOOL_NAME.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: subcommand.to_owned(),
            input_path: input_path.to_owned(),
            input_sha256: sha256_hex(input_bytes),
            parameters,
            timestamp: timestamp.unwrap_or_else(|| chrono::Utc::now().to_rfc3339()),
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    /// Hash of the serialized manifest, used by sidecar files to reference it.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("manifest serializes").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

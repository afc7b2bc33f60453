//! Provenance headers: every artifact starts with one `#` line recording the
//! tool version, the command, its seeds, and digests of its inputs. Headers
//! never contain timestamps, so reruns with identical inputs are
//! byte-identical.

use sha2::{Digest, Sha256};

/// First 16 hex characters of the SHA-256 of `bytes`.
pub fn digest16(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Render a one-line header: `# forge <version> k=v k=v ...`.
pub fn header(version: &str, fields: &[(&str, String)]) -> String {
    let mut line = format!("# forge {version}");
    for (key, value) in fields {
        line.push_str(&format!(" {key}={value}"));
    }
    line.push('\n');
    line
}

/// Split leading `#` metadata lines from the body.
pub fn split_meta(text: &str) -> (Vec<&str>, String) {
    let mut meta = Vec::new();
    let mut body = String::new();
    let mut in_meta = true;
    for line in text.lines() {
        if in_meta && line.starts_with('#') {
            meta.push(line);
        } else {
            in_meta = false;
            body.push_str(line);
            body.push('\n');
        }
    }
    (meta, body)
}

//! Versioned JSON session files.

use std::path::Path;

use activeclust_core::engine::Session;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::{Error, Result};

pub const SESSION_FORMAT: &str = "activeclust-session";
pub const SESSION_VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize)]
struct FileRef<'a> {
    format: &'static str,
    version: u32,
    config: Option<&'a SessionConfig>,
    session: &'a Session,
}

#[derive(Deserialize)]
struct FileOwned {
    config: Option<SessionConfig>,
    session: Session,
}

pub fn to_bytes(session: &Session, config: Option<&SessionConfig>) -> Vec<u8> {
    serde_json::to_vec(&FileRef { format: SESSION_FORMAT, version: SESSION_VERSION, config, session })
        .expect("sessions always serialize")
}

/// Parses a session file, checking the format tag and version first.
pub fn from_bytes(bytes: &[u8]) -> Result<(Session, Option<SessionConfig>)> {
    let header: Header =
        serde_json::from_slice(bytes).map_err(|e| Error::IncompatibleSession(format!("unreadable: {e}")))?;
    if header.format != SESSION_FORMAT {
        return Err(Error::IncompatibleSession(format!("format {:?}", header.format)));
    }
    if header.version != SESSION_VERSION {
        return Err(Error::IncompatibleSession(format!(
            "version {} (this build reads {SESSION_VERSION})",
            header.version
        )));
    }
    let file: FileOwned =
        serde_json::from_slice(bytes).map_err(|e| Error::IncompatibleSession(format!("malformed: {e}")))?;
    Ok((file.session, file.config))
}

pub fn save_session(path: &Path, session: &Session, config: Option<&SessionConfig>) -> Result<()> {
    std::fs::write(path, to_bytes(session, config)).map_err(|e| Error::io(path, e))
}

pub fn load_session(path: &Path) -> Result<(Session, Option<SessionConfig>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

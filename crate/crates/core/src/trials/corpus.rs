//! Line-delimited corpus files: a header record, then one trial per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CategoryLabels, Trial, TrialConfig, TrialError};
use crate::world::WorldConfig;

pub const CORPUS_SCHEMA: &str = "attn-trials/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusHeader {
    pub schema: String,
    pub count: usize,
    pub seed: u64,
    pub generator: TrialConfig,
    pub world: WorldConfig,
    /// SHA-256 of the JSON encoding of `(generator, world)`.
    pub config_hash: String,
}

impl CorpusHeader {
    pub fn new(count: usize, seed: u64, generator: TrialConfig, world: WorldConfig) -> Self {
        let config_hash = config_hash(&generator, &world);
        Self { schema: CORPUS_SCHEMA.to_string(), count, seed, generator, world, config_hash }
    }
}

pub fn config_hash(generator: &TrialConfig, world: &WorldConfig) -> String {
    let bytes = serde_json::to_vec(&(generator, world)).expect("config serializes");
    hex(&Sha256::digest(&bytes))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_corpus<W: Write>(mut w: W, header: &CorpusHeader, trials: &[Trial]) -> Result<(), TrialError> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus<R: BufRead>(r: R) -> Result<(CorpusHeader, Vec<Trial>), TrialError> {
    let mut lines = r.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let (_, first) = lines.next().ok_or(TrialError::EmptyCorpus)?;
    let first = first?;
    let probe: serde_json::Value =
        serde_json::from_str(&first).map_err(|source| TrialError::Malformed { line: 1, source })?;
    match probe.get("schema").and_then(|s| s.as_str()) {
        Some(CORPUS_SCHEMA) => {}
        Some(other) => return Err(TrialError::Schema(other.to_string())),
        None => return Err(TrialError::Schema(String::new())),
    }
    let header: CorpusHeader =
        serde_json::from_value(probe).map_err(|source| TrialError::Malformed { line: 1, source })?;
    let mut trials = Vec::with_capacity(header.count);
    for (i, line) in lines {
        let line = line?;
        let t: Trial = serde_json::from_str(&line).map_err(|source| TrialError::Malformed { line: i + 1, source })?;
        trials.push(t);
    }
    if trials.len() != header.count {
        return Err(TrialError::Count { expected: header.count, found: trials.len() });
    }
    if trials.is_empty() {
        return Err(TrialError::EmptyCorpus);
    }
    Ok((header, trials))
}

/// One line of a label file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: u64,
    pub labels: CategoryLabels,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trials::generate_corpus;

    #[test]
    fn round_trip_is_exact() {
        let world = WorldConfig::default();
        let gen = TrialConfig::default();
        let trials = generate_corpus(5, 200, &world, &gen).unwrap();
        let header = CorpusHeader::new(trials.len(), 5, gen, world);
        let mut buf = Vec::new();
        write_corpus(&mut buf, &header, &trials).unwrap();
        let (h, back) = read_corpus(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, trials);
    }

    #[test]
    fn empty_and_bad_inputs_are_errors() {
        assert!(matches!(read_corpus(&b""[..]), Err(TrialError::EmptyCorpus)));
        assert!(matches!(read_corpus(&b"\n\n"[..]), Err(TrialError::EmptyCorpus)));
        assert!(matches!(read_corpus(&b"{\"schema\":\"x/9\"}\n"[..]), Err(TrialError::Schema(_))));
        assert!(matches!(read_corpus(&b"not json\n"[..]), Err(TrialError::Malformed { line: 1, .. })));
        let header = CorpusHeader::new(2, 0, TrialConfig::default(), WorldConfig::default());
        let mut buf = Vec::new();
        write_corpus(&mut buf, &header, &[]).unwrap();
        assert!(matches!(read_corpus(&buf[..]), Err(TrialError::Count { expected: 2, found: 0 })));
    }

    #[test]
    fn hash_tracks_config() {
        let w = WorldConfig::default();
        let g = TrialConfig::default();
        let other = TrialConfig { alpha: 0.5, ..g.clone() };
        assert_eq!(config_hash(&g, &w), config_hash(&g, &w));
        assert_ne!(config_hash(&g, &w), config_hash(&other, &w));
        assert_eq!(config_hash(&g, &w).len(), 64);
    }
}

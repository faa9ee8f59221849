//! Checkpoints, the line-delimited run log and the best-genome file.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EvolutionConfig, EvolutionError, GenerationRecord, ShapingState};
use crate::genome::{Genome, GenomeFile};
use crate::trials::hex;

pub const CHECKPOINT_SCHEMA: &str = "attn-checkpoint/1";
pub const RUNLOG_SCHEMA: &str = "attn-runlog/1";

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const RUNLOG_FILE: &str = "run.jsonl";
pub const BEST_GENOME_FILE: &str = "best_genome.json";

/// SHA-256 of the JSON encoding of the full config (seed included).
pub fn config_hash(cfg: &EvolutionConfig) -> String {
    hex(&Sha256::digest(serde_json::to_vec(cfg).expect("config serializes")))
}

/// Everything needed to continue a run. RNG streams are derived from
/// (seed, generation, individual), so no generator state is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub config_hash: String,
    pub next_generation: usize,
    pub population: Vec<Genome>,
    pub shaping: ShapingState,
    pub history: Vec<GenerationRecord>,
}

impl Checkpoint {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join(CHECKPOINT_FILE)
    }

    /// Written to a temporary file and renamed, so an interrupted write
    /// leaves the previous checkpoint intact.
    pub fn save(&self, dir: &Path) -> Result<(), EvolutionError> {
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{CHECKPOINT_FILE}.tmp"));
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer(&mut w, self)?;
            w.flush()?;
        }
        fs::rename(tmp, Self::path(dir))?;
        Ok(())
    }

    /// `None` when there is no checkpoint yet.
    pub fn load(dir: &Path, expected_hash: &str) -> Result<Option<Self>, EvolutionError> {
        let path = Self::path(dir);
        if !path.exists() {
            return Ok(None);
        }
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(&path)?))
            .map_err(|e| EvolutionError::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.schema != CHECKPOINT_SCHEMA {
            return Err(EvolutionError::Checkpoint(format!("schema {:?}", ck.schema)));
        }
        if ck.config_hash != expected_hash {
            return Err(EvolutionError::ConfigMismatch {
                expected: expected_hash.to_string(),
                found: ck.config_hash,
            });
        }
        if ck.history.len() != ck.next_generation {
            return Err(EvolutionError::Checkpoint(format!(
                "{} history records for {} generations",
                ck.history.len(),
                ck.next_generation
            )));
        }
        for g in &ck.population {
            g.validate().map_err(|e| EvolutionError::Checkpoint(e.to_string()))?;
        }
        if ck.shaping.n_added != ck.shaping.replacements_log.len() {
            return Err(EvolutionError::Checkpoint("shaping log length mismatch".into()));
        }
        Ok(Some(ck))
    }
}

/// First line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    pub schema: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: EvolutionConfig,
}

pub(crate) struct RunLog {
    w: BufWriter<File>,
}

impl RunLog {
    /// (Re)writes the header and `history`; later records are appended.
    pub(crate) fn create(
        dir: &Path,
        cfg: &EvolutionConfig,
        hash: &str,
        history: &[GenerationRecord],
    ) -> Result<Self, EvolutionError> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(RUNLOG_FILE))?);
        let header = RunLogRecord {
            schema: RUNLOG_SCHEMA.to_string(),
            seed: cfg.seed,
            config_hash: hash.to_string(),
            config: cfg.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut log = Self { w };
        for r in history {
            log.write(r)?;
        }
        log.w.flush()?;
        Ok(log)
    }

    fn write(&mut self, r: &GenerationRecord) -> Result<(), EvolutionError> {
        serde_json::to_writer(&mut self.w, r)?;
        self.w.write_all(b"\n")?;
        Ok(())
    }

    pub(crate) fn append(&mut self, r: &GenerationRecord) -> Result<(), EvolutionError> {
        self.write(r)?;
        self.w.flush()?;
        Ok(())
    }
}

pub(crate) fn write_best_genome(dir: &Path, genome: &Genome, cfg: &EvolutionConfig) -> Result<(), EvolutionError> {
    let file = GenomeFile::new(genome, &cfg.ranges, serde_json::to_value(cfg)?);
    let mut w = BufWriter::new(File::create(dir.join(BEST_GENOME_FILE))?);
    file.write(&mut w)?;
    w.flush()?;
    Ok(())
}

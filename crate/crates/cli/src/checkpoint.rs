//! Binary checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! magic     8 bytes  "SPARTCKP"
//! version   u32
//! hlen      u64      length of the JSON header
//! header    hlen bytes
//! densities n·nodes f64, cell-major, lexicographic node order
//! void      nodes f64, multiphase runs only
//! vectors   n·nodes f64, last eigenvector of each cell
//! ```
//!
//! Everything needed to continue the iteration exactly is stored, including
//! the warm-start eigenvectors, so a resumed run reproduces the
//! uninterrupted one bit for bit.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use specpart::partition_opt::{CellEval, DensitySet, Evaluation, IterationRecord, OptState};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"SPARTCKP";
pub const VERSION: u32 = 1;

const PREFIX: usize = 8 + 4 + 8;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub level_energies: Vec<f64>,
    /// Wall-clock seconds spent before this checkpoint.
    pub elapsed: f64,
    pub state: OptState,
}

#[derive(Serialize, Deserialize)]
struct CellMeta {
    eigenvalue: f64,
    restricted_size: usize,
    iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: RunConfig,
    level: usize,
    level_energies: Vec<f64>,
    elapsed: f64,
    cells: usize,
    nodes: usize,
    multiphase: bool,
    step: f64,
    iteration: usize,
    energy: f64,
    area: f64,
    evals: Vec<CellMeta>,
    history: Vec<IterationRecord>,
    reinitialized: Vec<usize>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Checkpoint(msg.into())
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let s = &self.state;
        let d = &s.densities;
        let header = Header {
            config: self.config.clone(),
            level: s.level,
            level_energies: self.level_energies.clone(),
            elapsed: self.elapsed,
            cells: d.cell_count(),
            nodes: d.node_count(),
            multiphase: d.is_multiphase(),
            step: s.step,
            iteration: s.iteration,
            energy: s.eval.energy,
            area: s.eval.area,
            evals: s
                .eval
                .cells
                .iter()
                .map(|c| CellMeta {
                    eigenvalue: c.eigenvalue,
                    restricted_size: c.restricted_size,
                    iterations: c.iterations,
                })
                .collect(),
            history: s.history.clone(),
            reinitialized: s.reinitialized.clone(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(PREFIX + json.len() + 16 * d.values().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        put_f64s(&mut out, d.values());
        if let Some(v) = d.void() {
            put_f64s(&mut out, v);
        }
        for c in &s.eval.cells {
            put_f64s(&mut out, &c.eigenvector);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> CliResult<Self> {
        if bytes.len() < PREFIX {
            return Err(bad("file too short"));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}, expected {VERSION}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let rest = &bytes[PREFIX..];
        let hlen = usize::try_from(hlen)
            .ok()
            .filter(|&h| h <= rest.len())
            .ok_or_else(|| bad("header length exceeds file size"))?;
        let header: Header =
            serde_json::from_slice(&rest[..hlen]).map_err(|e| bad(format!("header: {e}")))?;
        let payload = &rest[hlen..];

        let (n, nodes) = (header.cells, header.nodes);
        if n == 0 || nodes == 0 {
            return Err(bad("empty density set"));
        }
        if header.evals.len() != n {
            return Err(bad("cell count disagrees with stored evaluations"));
        }
        let block = n.checked_mul(nodes).ok_or_else(|| bad("size overflow"))?;
        let void_len = if header.multiphase { nodes } else { 0 };
        let floats = block
            .checked_mul(2)
            .and_then(|b| b.checked_add(void_len))
            .ok_or_else(|| bad("size overflow"))?;
        if floats.checked_mul(8) != Some(payload.len()) {
            return Err(bad(format!(
                "payload has {} bytes, expected {} values",
                payload.len(),
                floats
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let dens: Vec<f64> = values.by_ref().take(block).collect();
        let void = header
            .multiphase
            .then(|| values.by_ref().take(nodes).collect::<Vec<_>>());
        let vectors: Vec<f64> = values.collect();

        let config = header.config.into_effective()?;
        if header.level >= config.level_count() {
            return Err(bad(format!("level {} beyond the continuation schedule", header.level)));
        }
        if config.optimization.mode.is_multiphase() != header.multiphase {
            return Err(bad("void phase disagrees with the configured mode"));
        }
        if config.optimization.cells != n {
            return Err(bad("cell count disagrees with the configuration"));
        }
        if !(header.step.is_finite() && header.step >= 0.0) {
            return Err(bad("step size is not a finite non-negative number"));
        }
        let densities =
            DensitySet::new(n, nodes, dens, void).map_err(|e| bad(format!("densities: {e}")))?;
        let cells = header
            .evals
            .into_iter()
            .zip(vectors.chunks_exact(nodes))
            .map(|(m, v)| CellEval {
                eigenvalue: m.eigenvalue,
                eigenvector: v.to_vec(),
                restricted_size: m.restricted_size,
                iterations: m.iterations,
            })
            .collect();
        Ok(Checkpoint {
            config,
            level_energies: header.level_energies,
            elapsed: header.elapsed,
            state: OptState {
                densities,
                eval: Evaluation {
                    energy: header.energy,
                    cells,
                    area: header.area,
                },
                step: header.step,
                iteration: header.iteration,
                level: header.level,
                history: header.history,
                reinitialized: header.reinitialized,
            },
        })
    }

    /// Writes through a temporary file so an interrupted write never
    /// clobbers the previous checkpoint.
    pub fn save(&self, path: &Path) -> CliResult<()> {
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(&self.encode()).map_err(|e| CliError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::decode(&bytes)
    }
}

//! `PICD` binary dataset files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PICD" | version u16 | agents u32 | solved instances u32 | fov u16 | records u64
//! record: spatial bits | dx f32 | dy f32 | distance f32 | action u8 | priority u8
//! ```
//!
//! The `4·fov·fov` spatial flags are packed channel by channel, each channel
//! row-major, least significant bit first, padded to a whole byte.

use std::path::Path;

use super::ImitationDatasets;
use crate::error::{Error, Result};
use crate::mapf::{Action, Observation};

pub const MAGIC: &[u8; 4] = b"PICD";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 2 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub observation: Observation,
    pub action: Action,
    pub priority: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicdFile {
    pub n_agents: u32,
    pub solved_instances: u32,
    pub fov: u16,
    pub records: Vec<Record>,
}

fn spatial_bytes(fov: usize) -> usize {
    (4 * fov * fov).div_ceil(8)
}

pub fn record_len(fov: usize) -> usize {
    spatial_bytes(fov) + 12 + 2
}

pub fn encode(ds: &ImitationDatasets) -> Result<Vec<u8>> {
    let n_agents = u32::try_from(ds.n_agents).map_err(|_| Error::contract("agent count exceeds u32"))?;
    let solved = u32::try_from(ds.solved.len()).map_err(|_| Error::contract("instance count exceeds u32"))?;
    let fov = u16::try_from(ds.fov).map_err(|_| Error::contract("fov exceeds u16"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * record_len(ds.fov));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&n_agents.to_le_bytes());
    out.extend_from_slice(&solved.to_le_bytes());
    out.extend_from_slice(&fov.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());

    let nbytes = spatial_bytes(ds.fov);
    for (a, p) in ds.d_imt.iter().zip(&ds.d_imp) {
        let obs = &a.observation;
        if obs.fov != ds.fov {
            return Err(Error::contract(format!("sample fov {} differs from dataset fov {}", obs.fov, ds.fov)));
        }
        let mut bits = vec![0u8; nbytes];
        for (k, flag) in obs.spatial.iter().flatten().enumerate() {
            if *flag {
                bits[k / 8] |= 1 << (k % 8);
            }
        }
        out.extend_from_slice(&bits);
        out.extend_from_slice(&obs.goal_direction.0.to_le_bytes());
        out.extend_from_slice(&obs.goal_direction.1.to_le_bytes());
        out.extend_from_slice(&obs.goal_distance.to_le_bytes());
        out.push(a.action.index() as u8);
        out.push(p.priority);
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<PicdFile> {
    let bad = |message: String| Error::Malformed { path: path.to_path_buf(), message };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("missing PICD magic".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n_agents = u32_at(6);
    let solved_instances = u32_at(10);
    let fov = u16_at(14);
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let f = fov as usize;
    if f < 3 || f.is_multiple_of(2) {
        return Err(bad(format!("invalid fov {fov}")));
    }
    let rlen = record_len(f);
    let body = &bytes[HEADER_LEN..];
    if (body.len() as u64) != count.saturating_mul(rlen as u64) {
        return Err(bad(format!("{count} records need {} bytes, found {}", count as u128 * rlen as u128, body.len())));
    }

    let cells = f * f;
    let nbytes = spatial_bytes(f);
    let mut records = Vec::with_capacity(count as usize);
    for (r, chunk) in body.chunks_exact(rlen).enumerate() {
        let flag = |k: usize| chunk[k / 8] >> (k % 8) & 1 == 1;
        let spatial = std::array::from_fn(|ch| (0..cells).map(|k| flag(ch * cells + k)).collect());
        let f32_at = |o: usize| f32::from_le_bytes(chunk[nbytes + o..nbytes + o + 4].try_into().unwrap());
        let action = Action::from_index(chunk[nbytes + 12] as usize)
            .ok_or_else(|| bad(format!("record {r}: action code {}", chunk[nbytes + 12])))?;
        let priority = chunk[nbytes + 13];
        if priority > 1 {
            return Err(bad(format!("record {r}: priority {priority}")));
        }
        records.push(Record {
            observation: Observation {
                fov: f,
                spatial,
                goal_direction: (f32_at(0), f32_at(4)),
                goal_distance: f32_at(8),
            },
            action,
            priority,
        });
    }
    Ok(PicdFile { n_agents, solved_instances, fov, records })
}

//! Dataset serialization.
//!
//! Binary layout (little-endian), fixed and versioned by the magic:
//!
//! ```text
//! b"JDS1"
//! u8  num_players
//! u32 game-id length, then that many UTF-8 bytes
//! u64 profile hash
//! u8  exploration kind (0 none, 1 random, 2 targeted)
//! f64 delta
//! u64 episode count
//! per episode:
//!   u32 step count
//!   per step: u32 payload length, then
//!     u32 state, u8 step kind (0 chance, 1 decision), u32 branch index,
//!     u32 next state, num_players x f64 rewards
//! ```
//!
//! Counts are not stored; they are recomputed from the transitions on read.
//! A CSV export exists for inspection.

use std::io::{Read, Write};

use crate::game::{EpisodeTrace, MarkovGame, StepAction, TraceStep};
use crate::{Error, Result};

use super::{CollectionDescriptor, ExplorationKind, JointDataset};

const MAGIC: &[u8; 4] = b"JDS1";

impl JointDataset {
    pub fn write_binary<W: Write>(&self, game: &MarkovGame, out: &mut W) -> Result<()> {
        let n = game.num_players();
        out.write_all(MAGIC)?;
        out.write_all(&[n as u8])?;
        let id = self.descriptor.game.to_string();
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
        out.write_all(&self.descriptor.profile_hash.to_le_bytes())?;
        out.write_all(&[kind_code(self.descriptor.kind)])?;
        out.write_all(&self.descriptor.delta.to_le_bytes())?;
        out.write_all(&(self.episodes.len() as u64).to_le_bytes())?;
        let payload_len = (4 + 1 + 4 + 4 + 8 * n) as u32;
        for episode in &self.episodes {
            out.write_all(&(episode.steps.len() as u32).to_le_bytes())?;
            for step in &episode.steps {
                out.write_all(&payload_len.to_le_bytes())?;
                out.write_all(&step.state.to_le_bytes())?;
                let (kind, index) = match step.action {
                    StepAction::Chance { outcome } => (0u8, outcome),
                    StepAction::Decision { joint } => (1u8, joint),
                };
                out.write_all(&[kind])?;
                out.write_all(&index.to_le_bytes())?;
                out.write_all(&step.next.to_le_bytes())?;
                for r in &step.rewards {
                    out.write_all(&r.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// One row per transition, with the players' infostate keys at decision
    /// states for inspection.
    pub fn write_csv<W: Write>(&self, game: &MarkovGame, out: &mut W) -> Result<()> {
        let n = game.num_players();
        write!(out, "episode,step,state,kind,branch,next")?;
        for p in 0..n {
            write!(out, ",reward_p{p}")?;
        }
        for p in 0..n {
            write!(out, ",info_p{p}")?;
        }
        writeln!(out)?;
        for (e, episode) in self.episodes.iter().enumerate() {
            for (s, step) in episode.steps.iter().enumerate() {
                let (kind, index) = match step.action {
                    StepAction::Chance { outcome } => ("chance", outcome),
                    StepAction::Decision { joint } => ("decision", joint),
                };
                write!(out, "{e},{s},{},{kind},{index},{}", step.state, step.next)?;
                for r in &step.rewards {
                    write!(out, ",{r}")?;
                }
                for p in 0..n {
                    write!(out, ",{}", game.infostate_key(p, step.state).unwrap_or(""))?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Reads a dataset written by [`JointDataset::write_binary`], validating it
/// against the game (id match and transition support).
pub fn read_binary<R: Read>(game: &MarkovGame, input: &mut R) -> Result<JointDataset> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MalformedData("bad dataset magic".into()));
    }
    let n = read_u8(input)? as usize;
    if n != game.num_players() {
        return Err(Error::MalformedData("player count mismatch".into()));
    }
    let id_len = read_u32(input)? as usize;
    if id_len > 4096 {
        return Err(Error::MalformedData("unreasonable game-id length".into()));
    }
    let mut id = vec![0u8; id_len];
    input.read_exact(&mut id)?;
    let id = String::from_utf8(id).map_err(|_| Error::MalformedData("game id not UTF-8".into()))?;
    if id != game.id().to_string() {
        return Err(Error::MalformedData(format!(
            "dataset was collected on `{id}`, not `{}`",
            game.id()
        )));
    }
    let profile_hash = read_u64(input)?;
    let kind = match read_u8(input)? {
        0 => ExplorationKind::None,
        1 => ExplorationKind::Random,
        2 => ExplorationKind::Targeted,
        other => {
            return Err(Error::MalformedData(format!("unknown exploration kind {other}")))
        }
    };
    let delta = f64::from_le_bytes(read_array(input)?);
    let episodes = read_u64(input)? as usize;
    let mut traces = Vec::with_capacity(episodes.min(1 << 20));
    for _ in 0..episodes {
        let steps = read_u32(input)? as usize;
        let mut trace = EpisodeTrace::default();
        for _ in 0..steps {
            let len = read_u32(input)? as usize;
            if len != 4 + 1 + 4 + 4 + 8 * n {
                return Err(Error::MalformedData("unexpected transition length".into()));
            }
            let state = read_u32(input)?;
            let kind = read_u8(input)?;
            let index = read_u32(input)?;
            let next = read_u32(input)?;
            let mut rewards = Vec::with_capacity(n);
            for _ in 0..n {
                rewards.push(f64::from_le_bytes(read_array(input)?));
            }
            let action = match kind {
                0 => StepAction::Chance { outcome: index },
                1 => StepAction::Decision { joint: index },
                other => {
                    return Err(Error::MalformedData(format!("unknown step kind {other}")))
                }
            };
            trace.steps.push(TraceStep { state, action, rewards, next });
        }
        trace.validate(game)?;
        traces.push(trace);
    }
    let mut counts = super::empty_counts(game);
    for trace in &traces {
        super::tally_episode(game, trace, &mut counts);
    }
    Ok(JointDataset {
        descriptor: CollectionDescriptor { game: game.id(), profile_hash, delta, kind },
        episodes: traces,
        counts,
    })
}

fn kind_code(kind: ExplorationKind) -> u8 {
    match kind {
        ExplorationKind::None => 0,
        ExplorationKind::Random => 1,
        ExplorationKind::Targeted => 2,
    }
}

fn read_u8<R: Read>(input: &mut R) -> Result<u8> {
    Ok(u8::from_le_bytes(read_array(input)?))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(input)?))
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(input)?))
}

fn read_array<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

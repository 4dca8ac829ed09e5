//! Reference-based delta frames.
//!
//! The sender moves every message agent that also appears in the reference to the reference's
//! position, fills the gaps with empty placeholder nodes and appends new agents at the end. Each
//! node is then stored as the byte-wise difference (mod 256) against the reference node at the
//! same position over their common length, with any excess bytes verbatim. The receiver walks the
//! reference in the same order, so no ordering side information is sent.
//!
//! Container layout (little-endian): `TADF`, version u16, flags u8 (bit 0 = delta), codec u8,
//! epoch u64, reference digest [32], raw body length u64, then the codec output.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::codec::CodecKind;
use super::frame::{self, agent_child_count, Reader, TypeRegistry, UnitSpans, NODE_HEADER_LEN, PLACEHOLDER_TAG};
use crate::engine::{Agent, GlobalAgentId};
use crate::{Error, Result};

pub const DELTA_MAGIC: &[u8; 4] = b"TADF";
pub const DELTA_VERSION: u16 = 1;
const FLAG_DELTA: u8 = 0x1;
const CONTAINER_HEADER: usize = 4 + 2 + 1 + 1 + 8 + 32 + 8;
pub const DEFAULT_REFERENCE_UPDATE: u64 = 10;

pub type Sha256Digest = [u8; 32];

pub fn digest(bytes: &[u8]) -> Sha256Digest {
    Sha256::digest(bytes).into()
}

/// A frame both sides of a channel hold byte-for-byte.
#[derive(Clone, Debug)]
pub struct Reference {
    frame: Vec<u8>,
    units: Vec<UnitSpans>,
    index: HashMap<GlobalAgentId, usize>,
    digest: Sha256Digest,
    epoch: u64,
}

impl Reference {
    pub fn new(frame: Vec<u8>, epoch: u64) -> Result<Self> {
        let units = frame::unit_spans(&frame)?;
        let mut index = HashMap::with_capacity(units.len());
        for (i, u) in units.iter().enumerate() {
            if let Some(g) = u.gid {
                index.entry(g).or_insert(i);
            }
        }
        let digest = digest(&frame);
        Ok(Self { frame, units, index, digest, epoch })
    }

    pub fn frame(&self) -> &[u8] {
        &self.frame
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn digest(&self) -> Sha256Digest {
        self.digest
    }

    pub fn agents(&self) -> usize {
        self.units.len()
    }

    fn node(&self, unit: usize, k: usize) -> Option<&[u8]> {
        self.units[unit].nodes.get(k).map(|n| &self.frame[n.start..n.start + n.len])
    }
}

/// Parsed container header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeltaHeader {
    pub is_delta: bool,
    pub codec: CodecKind,
    pub epoch: u64,
    pub reference_digest: Sha256Digest,
    pub raw_len: u64,
}

impl DeltaHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, 0);
        if r.bytes(4)? != DELTA_MAGIC {
            return Err(Error::Decode { offset: 0, reason: "bad delta magic".into() });
        }
        let v = r.u16()?;
        if v != DELTA_VERSION {
            return Err(Error::Decode { offset: 4, reason: format!("unsupported delta version {v}") });
        }
        let flags = r.u8()?;
        if flags & !FLAG_DELTA != 0 {
            return Err(Error::Decode { offset: 6, reason: format!("unknown flags {flags:#x}") });
        }
        let codec = CodecKind::from_id(r.u8()?)?;
        let epoch = r.u64()?;
        let reference_digest: Sha256Digest = r.bytes(32)?.try_into().unwrap();
        let raw_len = r.u64()?;
        Ok(Self { is_delta: flags & FLAG_DELTA != 0, codec, epoch, reference_digest, raw_len })
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(DELTA_MAGIC);
        out.extend_from_slice(&DELTA_VERSION.to_le_bytes());
        out.push(if self.is_delta { FLAG_DELTA } else { 0 });
        out.push(self.codec.codec().id());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.reference_digest);
        out.extend_from_slice(&self.raw_len.to_le_bytes());
    }
}

/// Result of encoding: the wire bytes plus the message as the receiver will reassemble it.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub defragmented: Vec<u8>,
    pub raw_body: Vec<u8>,
}

fn diff_into(out: &mut Vec<u8>, node: &[u8], reference: Option<&[u8]>) {
    let r = reference.unwrap_or(&[]);
    let common = node.len().min(r.len());
    out.extend(node[..common].iter().zip(&r[..common]).map(|(a, b)| a.wrapping_sub(*b)));
    out.extend_from_slice(&node[common..]);
}

const PLACEHOLDER: [u8; NODE_HEADER_LEN] = [0; NODE_HEADER_LEN];

/// Reorders `message` against `reference` and emits the difference stream.
pub fn delta_body(message: &[u8], reference: &Reference) -> Result<(Vec<u8>, Vec<u8>)> {
    let units = frame::unit_spans(message)?;
    let mut slot: Vec<Option<usize>> = vec![None; reference.units.len()];
    let mut appended = Vec::new();
    for (i, u) in units.iter().enumerate() {
        match u.gid.and_then(|g| reference.index.get(&g).copied()) {
            Some(j) if slot[j].is_none() => slot[j] = Some(i),
            _ => appended.push(i),
        }
    }
    let unit_bytes = |u: &UnitSpans, k: usize| {
        let n = u.nodes[k];
        &message[n.start..n.start + n.len]
    };
    let mut body = Vec::with_capacity(message.len());
    let mut defrag = Vec::with_capacity(message.len());
    frame::write_header(&mut defrag);
    for (j, s) in slot.iter().enumerate() {
        match s {
            None => diff_into(&mut body, &PLACEHOLDER, reference.node(j, 0)),
            Some(i) => {
                let u = &units[*i];
                for k in 0..u.nodes.len() {
                    let b = unit_bytes(u, k);
                    diff_into(&mut body, b, reference.node(j, k));
                    defrag.extend_from_slice(b);
                }
            }
        }
    }
    for &i in &appended {
        let u = &units[i];
        for k in 0..u.nodes.len() {
            body.extend_from_slice(unit_bytes(u, k));
            defrag.extend_from_slice(unit_bytes(u, k));
        }
    }
    Ok((body, defrag))
}

/// Inverse of [`delta_body`]: returns the defragmented frame (header included).
pub fn undelta_body(body: &[u8], reference: &Reference) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(body.len() + frame::HEADER_LEN);
    frame::write_header(&mut out);
    let mut pos = 0usize;
    let fail = |offset: usize, reason: &str| Error::Decode { offset, reason: reason.to_string() };
    let node = |pos: &mut usize, reference: Option<&[u8]>, out: &mut Vec<u8>| -> Result<(u32, usize)> {
        let r = reference.unwrap_or(&[]);
        if body.len() < *pos + NODE_HEADER_LEN {
            return Err(fail(*pos, "truncated delta node header"));
        }
        let mut head = [0u8; NODE_HEADER_LEN];
        for (t, h) in head.iter_mut().enumerate() {
            *h = body[*pos + t].wrapping_add(r.get(t).copied().unwrap_or(0));
        }
        let tag = u32::from_le_bytes(head[0..4].try_into().unwrap());
        let len = u64::from_le_bytes(head[4..12].try_into().unwrap());
        if len > (body.len() - *pos - NODE_HEADER_LEN) as u64 {
            return Err(fail(*pos, "delta node length exceeds body"));
        }
        let total = NODE_HEADER_LEN + len as usize;
        let start = out.len();
        let common = total.min(r.len());
        out.extend(body[*pos..*pos + common].iter().zip(&r[..common]).map(|(a, b)| a.wrapping_add(*b)));
        out.extend_from_slice(&body[*pos + common..*pos + total]);
        *pos += total;
        Ok((tag, start))
    };
    for j in 0..reference.units.len() {
        let at = pos;
        let (tag, start) = node(&mut pos, reference.node(j, 0), &mut out)?;
        if tag == PLACEHOLDER_TAG {
            if out.len() - start != NODE_HEADER_LEN {
                return Err(fail(at, "placeholder with payload"));
            }
            out.truncate(start);
            continue;
        }
        let children = agent_child_count(&out[start..]).ok_or_else(|| fail(at, "agent node too short"))?;
        for k in 0..children {
            node(&mut pos, reference.node(j, k + 1), &mut out)?;
        }
    }
    out.extend_from_slice(&body[pos..]);
    Ok(out)
}

/// Builds a full or delta container for `message`.
pub fn delta_encode(message: &[u8], reference: Option<&Reference>, codec: CodecKind) -> Result<Encoded> {
    let (is_delta, raw_body, defragmented, epoch, reference_digest) = match reference {
        Some(r) => {
            let (body, defrag) = delta_body(message, r)?;
            (true, body, defrag, r.epoch, r.digest)
        }
        None => {
            frame::unit_spans(message)?;
            (false, message.to_vec(), message.to_vec(), 0, [0u8; 32])
        }
    };
    let header = DeltaHeader { is_delta, codec, epoch, reference_digest, raw_len: raw_body.len() as u64 };
    let packed = codec.codec().compress(&raw_body);
    let mut bytes = Vec::with_capacity(CONTAINER_HEADER + packed.len());
    header.write(&mut bytes);
    bytes.extend_from_slice(&packed);
    Ok(Encoded { bytes, defragmented, raw_body })
}

/// Decodes a container into the (defragmented) frame it carries.
pub fn delta_decode_frame(bytes: &[u8], reference: Option<&Reference>) -> Result<Vec<u8>> {
    let h = DeltaHeader::parse(bytes)?;
    let raw = h.codec.codec().decompress(&bytes[CONTAINER_HEADER..], h.raw_len as usize)?;
    if !h.is_delta {
        return Ok(raw);
    }
    let r = reference.ok_or(Error::EpochMismatch { frame: h.epoch, local: 0 })?;
    if r.epoch != h.epoch {
        return Err(Error::EpochMismatch { frame: h.epoch, local: r.epoch });
    }
    if r.digest != h.reference_digest {
        return Err(Error::Codec("reference digest mismatch".into()));
    }
    undelta_body(&raw, r)
}

pub fn delta_decode(bytes: &[u8], reference: Option<&Reference>, registry: &TypeRegistry) -> Result<Vec<Agent>> {
    let f = delta_decode_frame(bytes, reference)?;
    Ok(frame::deserialize(&f, registry)?.agents)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelConfig {
    pub delta: bool,
    pub codec: CodecKind,
    /// Exchanges between reference refreshes; the first exchange always sets one.
    pub reference_update: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { delta: true, codec: CodecKind::Lz4, reference_update: DEFAULT_REFERENCE_UPDATE }
    }
}

/// State shared in lockstep by both ends of a one-way channel.
#[derive(Clone, Debug)]
struct ChannelState {
    cfg: ChannelConfig,
    reference: Option<Reference>,
    epoch: u64,
    exchanges: u64,
}

impl ChannelState {
    fn new(cfg: ChannelConfig) -> Self {
        Self { cfg, reference: None, epoch: 0, exchanges: 0 }
    }

    fn active(&self) -> Option<&Reference> {
        if self.cfg.delta {
            self.reference.as_ref()
        } else {
            None
        }
    }

    fn after_exchange(&mut self, defragmented: Vec<u8>) -> Result<()> {
        self.exchanges += 1;
        if self.cfg.delta && (self.exchanges - 1) % self.cfg.reference_update.max(1) == 0 {
            self.epoch += 1;
            self.reference = Some(Reference::new(defragmented, self.epoch)?);
        }
        Ok(())
    }

    fn reset(&mut self) {
        self.reference = None;
        self.cfg.delta = false;
    }
}

#[derive(Clone, Debug)]
pub struct DeltaSender {
    state: ChannelState,
}

impl DeltaSender {
    pub fn new(cfg: ChannelConfig) -> Self {
        Self { state: ChannelState::new(cfg) }
    }

    pub fn encode(&mut self, agents: &[Agent], registry: &TypeRegistry) -> Result<Vec<u8>> {
        let message = frame::serialize(agents, registry)?;
        let enc = delta_encode(&message, self.state.active(), self.state.cfg.codec)?;
        self.state.after_exchange(enc.defragmented)?;
        Ok(enc.bytes)
    }

    pub fn epoch(&self) -> u64 {
        self.state.epoch
    }

    pub fn reference_digest(&self) -> Option<Sha256Digest> {
        self.state.reference.as_ref().map(Reference::digest)
    }

    /// Falls back to full frames for the rest of the channel's life.
    pub fn reset(&mut self) {
        self.state.reset();
    }
}

#[derive(Clone, Debug)]
pub struct DeltaReceiver {
    state: ChannelState,
}

impl DeltaReceiver {
    pub fn new(cfg: ChannelConfig) -> Self {
        Self { state: ChannelState::new(cfg) }
    }

    pub fn decode(&mut self, bytes: &[u8], registry: &TypeRegistry) -> Result<Vec<Agent>> {
        let f = match delta_decode_frame(bytes, self.state.reference.as_ref()) {
            Ok(f) => f,
            Err(e) => {
                if matches!(e, Error::Codec(_) | Error::EpochMismatch { .. }) {
                    self.state.reset();
                }
                return Err(e);
            }
        };
        let agents = frame::deserialize(&f, registry)?.agents;
        self.state.after_exchange(f)?;
        Ok(agents)
    }

    pub fn epoch(&self) -> u64 {
        self.state.epoch
    }

    pub fn reference_digest(&self) -> Option<Sha256Digest> {
        self.state.reference.as_ref().map(Reference::digest)
    }
}

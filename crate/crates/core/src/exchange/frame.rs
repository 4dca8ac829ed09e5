//! Depth-first agent serialization.
//!
//! A frame is the header `TAIO`, a little-endian u16 version and an endianness tag, followed by
//! nodes of the form `kind_tag: u32, payload_len: u64, payload`. Each agent node is followed by
//! one node per behavior; the agent payload marks each of those child slots with a sentinel.

use std::collections::BTreeSet;

use crate::engine::{Agent, AgentKind, Behavior, BehaviorInstance, GlobalAgentId, SirState, StaticState};
use crate::{Error, Real3, Result};

pub const MAGIC: &[u8; 4] = b"TAIO";
pub const VERSION: u16 = 1;
pub const LITTLE_ENDIAN_TAG: u8 = 0x01;
pub const HEADER_LEN: usize = 7;
pub const NODE_HEADER_LEN: usize = 12;
/// Tag of an empty placeholder node in delta streams.
pub const PLACEHOLDER_TAG: u32 = 0;
pub const CHILD_SENTINEL: u64 = 0x1;
/// Agent payload bytes before the kind-specific field.
const FIXED_AGENT_PAYLOAD: usize = 58;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Agent,
    Behavior,
}

/// Kind tags the decoder accepts.
#[derive(Clone, Debug)]
pub struct TypeRegistry {
    agents: BTreeSet<u32>,
    behaviors: BTreeSet<u32>,
}

impl Default for TypeRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl TypeRegistry {
    pub fn empty() -> Self {
        Self { agents: BTreeSet::new(), behaviors: BTreeSet::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        for t in [AgentKind::CELL_TAG, AgentKind::PERSON_TAG, AgentKind::SOMA_TAG] {
            r.register(t, NodeClass::Agent);
        }
        for t in Behavior::GROW_DIVIDE_TAG..=Behavior::TUMOR_GROWTH_TAG {
            r.register(t, NodeClass::Behavior);
        }
        r
    }

    pub fn register(&mut self, tag: u32, class: NodeClass) {
        assert_ne!(tag, PLACEHOLDER_TAG, "tag 0 is reserved");
        match class {
            NodeClass::Agent => self.agents.insert(tag),
            NodeClass::Behavior => self.behaviors.insert(tag),
        };
    }

    pub fn unregister(&mut self, tag: u32) {
        self.agents.remove(&tag);
        self.behaviors.remove(&tag);
    }

    pub fn class_of(&self, tag: u32) -> Option<NodeClass> {
        if self.agents.contains(&tag) {
            Some(NodeClass::Agent)
        } else if self.behaviors.contains(&tag) {
            Some(NodeClass::Behavior)
        } else {
            None
        }
    }
}

/// Owned result of a decode. Dropping it releases everything the frame produced.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedBatch {
    pub agents: Vec<Agent>,
    pub nodes: usize,
}

pub fn write_header(out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(LITTLE_ENDIAN_TAG);
}

/// Serializes `agents` into a fresh frame.
pub fn serialize(agents: &[Agent], registry: &TypeRegistry) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + agents.len() * 128);
    write_header(&mut out);
    for a in agents {
        encode_agent(a, registry, &mut out)?;
    }
    Ok(out)
}

fn begin_node(out: &mut Vec<u8>, tag: u32) -> usize {
    out.extend_from_slice(&tag.to_le_bytes());
    let at = out.len();
    out.extend_from_slice(&0u64.to_le_bytes());
    at
}

fn end_node(out: &mut [u8], len_at: usize) {
    let len = (out.len() - len_at - 8) as u64;
    out[len_at..len_at + 8].copy_from_slice(&len.to_le_bytes());
}

/// Appends one agent node and its behavior nodes.
pub fn encode_agent(a: &Agent, registry: &TypeRegistry, out: &mut Vec<u8>) -> Result<()> {
    let tag = a.kind.tag();
    if registry.class_of(tag) != Some(NodeClass::Agent) {
        return Err(Error::UnregisteredKind(tag));
    }
    let at = begin_node(out, tag);
    match a.global_id {
        Some(g) => {
            out.push(1);
            out.extend_from_slice(&g.rank.to_le_bytes());
            out.extend_from_slice(&g.counter.to_le_bytes());
        }
        None => {
            out.push(0);
            out.extend_from_slice(&[0u8; 12]);
        }
    }
    out.extend_from_slice(&a.key.to_le_bytes());
    for c in a.position.iter() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&a.diameter.to_le_bytes());
    out.push(a.static_state.to_bits());
    out.extend_from_slice(&a.static_state.nonzero_forces.to_le_bytes());
    match a.kind {
        AgentKind::Cell { age } => out.extend_from_slice(&age.to_le_bytes()),
        AgentKind::Person { state } => out.push(state.code()),
        AgentKind::SomaCell { cell_type } => out.push(cell_type),
    }
    out.extend_from_slice(&(a.behaviors.len() as u32).to_le_bytes());
    for _ in &a.behaviors {
        out.extend_from_slice(&CHILD_SENTINEL.to_le_bytes());
    }
    end_node(out, at);
    for b in &a.behaviors {
        encode_behavior(b, registry, out)?;
    }
    Ok(())
}

fn encode_behavior(b: &BehaviorInstance, registry: &TypeRegistry, out: &mut Vec<u8>) -> Result<()> {
    let tag = b.behavior.tag();
    if registry.class_of(tag) != Some(NodeClass::Behavior) {
        return Err(Error::UnregisteredKind(tag));
    }
    let at = begin_node(out, tag);
    out.push(b.copy_on_division as u8);
    out.push(b.remove_on_division as u8);
    let f = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());
    match &b.behavior {
        Behavior::GrowDivide { growth_rate, target_diameter, volume_ratio } => {
            f(out, *growth_rate);
            f(out, *target_diameter);
            f(out, *volume_ratio);
        }
        Behavior::Infection { radius, probability } => {
            f(out, *radius);
            f(out, *probability);
        }
        Behavior::Recovery { probability } => f(out, *probability),
        Behavior::RandomMovement { speed } => f(out, *speed),
        Behavior::Secretion { substance, quantity } => {
            out.extend_from_slice(&substance.to_le_bytes());
            f(out, *quantity);
        }
        Behavior::Chemotaxis { substance, weight } => {
            out.extend_from_slice(&substance.to_le_bytes());
            f(out, *weight);
        }
        Behavior::TumorGrowth { growth_rate, max_diameter, division_probability, death_probability, min_age, displacement_rate } => {
            f(out, *growth_rate);
            f(out, *max_diameter);
            f(out, *division_probability);
            f(out, *death_probability);
            out.extend_from_slice(&min_age.to_le_bytes());
            f(out, *displacement_rate);
        }
    }
    end_node(out, at);
    Ok(())
}

/// Bounds-checked little-endian reader that reports absolute offsets.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], base: usize) -> Self {
        Self { buf, pos: 0, base }
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Decode { offset: self.offset(), reason: reason.into() })
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return self.fail(format!("truncated: need {n} bytes, have {}", self.remaining()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => self.fail(format!("invalid boolean {v}")),
        }
    }
}

pub fn check_header(frame: &[u8]) -> Result<()> {
    let mut r = Reader::new(frame, 0);
    if r.bytes(4)? != MAGIC {
        return Err(Error::Decode { offset: 0, reason: "bad magic".into() });
    }
    let v = r.u16()?;
    if v != VERSION {
        return Err(Error::Decode { offset: 4, reason: format!("unsupported version {v}") });
    }
    let e = r.u8()?;
    if e != LITTLE_ENDIAN_TAG {
        return Err(Error::Decode { offset: 6, reason: format!("unsupported endianness tag {e}") });
    }
    Ok(())
}

/// Decodes a complete frame. Either every agent is returned or an error names the first bad byte.
pub fn deserialize(frame: &[u8], registry: &TypeRegistry) -> Result<DecodedBatch> {
    check_header(frame)?;
    let (units, nodes) = decode_stream(&frame[HEADER_LEN..], HEADER_LEN, registry, false)?;
    Ok(DecodedBatch { agents: units.into_iter().flatten().collect(), nodes })
}

/// Decodes a bare node stream. Placeholders decode to `None` when allowed.
pub(crate) fn decode_stream(stream: &[u8], base: usize, registry: &TypeRegistry, placeholders: bool) -> Result<(Vec<Option<Agent>>, usize)> {
    let mut r = Reader::new(stream, base);
    let mut units = Vec::new();
    let mut nodes = 0;
    while r.remaining() > 0 {
        let (unit, n) = decode_unit(&mut r, registry, placeholders)?;
        units.push(unit);
        nodes += n;
    }
    Ok((units, nodes))
}

/// One agent with its children, or a placeholder.
pub(crate) fn decode_unit(r: &mut Reader<'_>, registry: &TypeRegistry, placeholders: bool) -> Result<(Option<Agent>, usize)> {
    let start = r.offset();
    let tag = r.u32()?;
    let len = r.u64()?;
    if tag == PLACEHOLDER_TAG && placeholders {
        if len != 0 {
            return Err(Error::Decode { offset: start, reason: "placeholder with payload".into() });
        }
        return Ok((None, 1));
    }
    if registry.class_of(tag) != Some(NodeClass::Agent) {
        return Err(Error::Decode { offset: start, reason: format!("unexpected kind tag {tag:#x}") });
    }
    if len > r.remaining() as u64 {
        return r.fail(format!("payload length {len} exceeds remaining {}", r.remaining()));
    }
    let payload_base = r.offset();
    let mut p = Reader::new(r.bytes(len as usize)?, payload_base);
    let has_gid = p.bool()?;
    let rank = p.u32()?;
    let counter = p.u64()?;
    let global_id = has_gid.then_some(GlobalAgentId { rank, counter });
    let key = p.u64()?;
    let position = Real3::new(p.f64()?, p.f64()?, p.f64()?);
    let diameter = p.f64()?;
    let bits_at = p.offset();
    let bits = p.u8()?;
    let nonzero = p.u32()?;
    let static_state = StaticState::from_bits(bits, nonzero).ok_or(Error::Decode { offset: bits_at, reason: format!("bad static flags {bits:#x}") })?;
    let kind = match tag {
        AgentKind::CELL_TAG => AgentKind::Cell { age: p.u32()? },
        AgentKind::PERSON_TAG => {
            let at = p.offset();
            let c = p.u8()?;
            AgentKind::Person { state: SirState::from_code(c).ok_or(Error::Decode { offset: at, reason: format!("bad SIR state {c}") })? }
        }
        AgentKind::SOMA_TAG => AgentKind::SomaCell { cell_type: p.u8()? },
        _ => return Err(Error::Decode { offset: start, reason: format!("no decoder for kind {tag:#x}") }),
    };
    let children = p.u32()? as usize;
    if children > p.remaining() / 8 {
        return p.fail(format!("child count {children} exceeds payload"));
    }
    for _ in 0..children {
        let at = p.offset();
        if p.u64()? != CHILD_SENTINEL {
            return Err(Error::Decode { offset: at, reason: "missing child sentinel".into() });
        }
    }
    if p.remaining() != 0 {
        return p.fail("trailing bytes in agent payload");
    }
    let mut agent = Agent::new(key, position, diameter, kind);
    agent.global_id = global_id;
    agent.static_state = static_state;
    agent.behaviors.reserve(children);
    for _ in 0..children {
        agent.behaviors.push(decode_behavior(r, registry)?);
    }
    if let Err(e) = agent.validate() {
        return Err(Error::Decode { offset: start, reason: e.to_string() });
    }
    Ok((Some(agent), 1 + children))
}

fn decode_behavior(r: &mut Reader<'_>, registry: &TypeRegistry) -> Result<BehaviorInstance> {
    let start = r.offset();
    let tag = r.u32()?;
    let len = r.u64()?;
    if registry.class_of(tag) != Some(NodeClass::Behavior) {
        return Err(Error::Decode { offset: start, reason: format!("unexpected behavior tag {tag:#x}") });
    }
    if len > r.remaining() as u64 {
        return r.fail(format!("payload length {len} exceeds remaining {}", r.remaining()));
    }
    let base = r.offset();
    let mut p = Reader::new(r.bytes(len as usize)?, base);
    let copy_on_division = p.bool()?;
    let remove_on_division = p.bool()?;
    let behavior = match tag {
        Behavior::GROW_DIVIDE_TAG => Behavior::GrowDivide { growth_rate: p.f64()?, target_diameter: p.f64()?, volume_ratio: p.f64()? },
        Behavior::INFECTION_TAG => Behavior::Infection { radius: p.f64()?, probability: p.f64()? },
        Behavior::RECOVERY_TAG => Behavior::Recovery { probability: p.f64()? },
        Behavior::RANDOM_MOVEMENT_TAG => Behavior::RandomMovement { speed: p.f64()? },
        Behavior::SECRETION_TAG => Behavior::Secretion { substance: p.u16()?, quantity: p.f64()? },
        Behavior::CHEMOTAXIS_TAG => Behavior::Chemotaxis { substance: p.u16()?, weight: p.f64()? },
        Behavior::TUMOR_GROWTH_TAG => Behavior::TumorGrowth {
            growth_rate: p.f64()?,
            max_diameter: p.f64()?,
            division_probability: p.f64()?,
            death_probability: p.f64()?,
            min_age: p.u32()?,
            displacement_rate: p.f64()?,
        },
        _ => return Err(Error::Decode { offset: start, reason: format!("no decoder for behavior {tag:#x}") }),
    };
    if p.remaining() != 0 {
        return p.fail("trailing bytes in behavior payload");
    }
    Ok(BehaviorInstance { behavior, copy_on_division, remove_on_division })
}

/// Byte span of one node inside a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeSpan {
    pub start: usize,
    pub len: usize,
}

/// Node spans of one agent unit: the agent node followed by its children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitSpans {
    pub gid: Option<GlobalAgentId>,
    pub nodes: Vec<NodeSpan>,
}

/// Splits a well-formed frame into units without building agents.
pub fn unit_spans(frame: &[u8]) -> Result<Vec<UnitSpans>> {
    check_header(frame)?;
    let mut units = Vec::new();
    let mut pos = HEADER_LEN;
    let node_at = |pos: usize| -> Result<NodeSpan> {
        if frame.len() < pos + NODE_HEADER_LEN {
            return Err(Error::Decode { offset: pos, reason: "truncated node header".into() });
        }
        let len = u64::from_le_bytes(frame[pos + 4..pos + 12].try_into().unwrap()) as usize;
        if frame.len() - pos - NODE_HEADER_LEN < len {
            return Err(Error::Decode { offset: pos, reason: "truncated node".into() });
        }
        Ok(NodeSpan { start: pos, len: NODE_HEADER_LEN + len })
    };
    while pos < frame.len() {
        let agent = node_at(pos)?;
        let payload = &frame[pos + NODE_HEADER_LEN..pos + agent.len];
        if payload.len() < FIXED_AGENT_PAYLOAD {
            return Err(Error::Decode { offset: pos, reason: "agent payload too short".into() });
        }
        let gid = (payload[0] == 1).then(|| GlobalAgentId {
            rank: u32::from_le_bytes(payload[1..5].try_into().unwrap()),
            counter: u64::from_le_bytes(payload[5..13].try_into().unwrap()),
        });
        let children = agent_child_count(&frame[pos..pos + agent.len]).ok_or(Error::Decode { offset: pos, reason: "agent payload too short".into() })?;
        let mut nodes = vec![agent];
        pos += agent.len;
        for _ in 0..children {
            let n = node_at(pos)?;
            nodes.push(n);
            pos += n.len;
        }
        units.push(UnitSpans { gid, nodes });
    }
    Ok(units)
}

/// Child count of a complete agent node (header included), if the node is long enough to hold it.
pub(crate) fn agent_child_count(node: &[u8]) -> Option<usize> {
    let tag = u32::from_le_bytes(node.get(0..4)?.try_into().ok()?);
    let kind_len = if tag == AgentKind::CELL_TAG { 4 } else { 1 };
    let at = NODE_HEADER_LEN + FIXED_AGENT_PAYLOAD + kind_len;
    Some(u32::from_le_bytes(node.get(at..at + 4)?.try_into().ok()?) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Agent {
        let mut a = Agent::new(42, Real3::new(1.5, -2.0, 3.25), 8.0, AgentKind::Cell { age: 17 })
            .with_behavior(BehaviorInstance::new(Behavior::GrowDivide { growth_rate: 1.0, target_diameter: 10.0, volume_ratio: 0.5 }))
            .with_behavior(BehaviorInstance { behavior: Behavior::Secretion { substance: 1, quantity: 1.0 }, copy_on_division: false, remove_on_division: true });
        a.global_id = Some(GlobalAgentId { rank: 2, counter: 9 });
        a.static_state = StaticState { moved: true, grew: false, is_new: true, nonzero_forces: 3, static_flag: false };
        a
    }

    #[test]
    fn empty_frame_is_header_only() {
        let f = serialize(&[], &TypeRegistry::standard()).unwrap();
        assert_eq!(f, b"TAIO\x01\x00\x01");
        assert!(deserialize(&f, &TypeRegistry::standard()).unwrap().agents.is_empty());
    }

    #[test]
    fn tree_shape() {
        let f = serialize(&[sample()], &TypeRegistry::standard()).unwrap();
        let batch = deserialize(&f, &TypeRegistry::standard()).unwrap();
        assert_eq!(batch.nodes, 3);
        let units = unit_spans(&f).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].nodes.len(), 3);
        assert_eq!(units[0].gid, Some(GlobalAgentId { rank: 2, counter: 9 }));
    }

    #[test]
    fn round_trip_and_mutability() {
        let reg = TypeRegistry::standard();
        let a = sample();
        let f = serialize(std::slice::from_ref(&a), &reg).unwrap();
        let mut back = deserialize(&f, &reg).unwrap().agents;
        assert_eq!(back[0], Agent { local_id: back[0].local_id, ..a.clone() });
        back[0].behaviors.push(BehaviorInstance::new(Behavior::Recovery { probability: 0.5 }));
        let f2 = serialize(&back, &reg).unwrap();
        let again = deserialize(&f2, &reg).unwrap();
        assert_eq!(again.nodes, 4);
        assert_eq!(unit_spans(&f2).unwrap()[0].nodes.len(), 4);
    }

    #[test]
    fn unregistered_kind_rejected() {
        let mut reg = TypeRegistry::standard();
        reg.unregister(AgentKind::CELL_TAG);
        assert!(matches!(serialize(&[sample()], &reg), Err(Error::UnregisteredKind(1))));
    }

    #[test]
    fn tampered_tag_reports_offset() {
        let reg = TypeRegistry::standard();
        let good = sample();
        let mut f = serialize(&[good.clone(), good], &reg).unwrap();
        let units = unit_spans(&f).unwrap();
        let second = units[1].nodes[0].start;
        f[second] = 0x77;
        match deserialize(&f, &reg) {
            Err(Error::Decode { offset, .. }) => assert_eq!(offset, second),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_rejected() {
        let reg = TypeRegistry::standard();
        let f = serialize(&[sample()], &reg).unwrap();
        for cut in [3, HEADER_LEN + 5, f.len() - 1] {
            assert!(matches!(deserialize(&f[..cut], &reg), Err(Error::Decode { .. })));
        }
    }

    #[test]
    fn agent_without_behaviors_spans() {
        let reg = TypeRegistry::standard();
        let a = Agent::new(1, Real3::zeros(), 1.0, AgentKind::Person { state: SirState::Infected });
        let f = serialize(&[a.clone(), a], &reg).unwrap();
        let u = unit_spans(&f).unwrap();
        assert_eq!(u.len(), 2);
        assert!(u.iter().all(|x| x.nodes.len() == 1 && x.gid.is_none()));
    }
}

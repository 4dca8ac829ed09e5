//! In-process point-to-point transport between rank threads.
//!
//! Every ordered pair of ranks has its own FIFO channel. Messages carry a tag and are split into
//! batches of at most `batch_bytes`; a message always produces at least one batch so that empty
//! messages still synchronize the two sides.

use std::sync::mpsc::{channel, Receiver, Sender};

use crate::{Error, Result};

pub const DEFAULT_BATCH_BYTES: usize = 4 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Aura = 1,
    Lookup = 2,
    LookupReply = 3,
    Migration = 4,
    Secretion = 5,
    Observation = 6,
    Control = 7,
}

#[derive(Debug)]
struct Batch {
    tag: Tag,
    index: u32,
    count: u32,
    bytes: Vec<u8>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub messages: u64,
    pub batches: u64,
    pub bytes: u64,
}

pub struct RankTransport {
    rank: u32,
    ranks: u32,
    batch_bytes: usize,
    outgoing: Vec<Option<Sender<Batch>>>,
    incoming: Vec<Option<Receiver<Batch>>>,
    stats: TransportStats,
}

/// One endpoint per rank, fully connected.
pub fn create_transports(ranks: usize, batch_bytes: usize) -> Vec<RankTransport> {
    assert!(batch_bytes > 0, "batch size must be positive");
    let mut outgoing: Vec<Vec<Option<Sender<Batch>>>> = (0..ranks).map(|_| (0..ranks).map(|_| None).collect()).collect();
    let mut incoming: Vec<Vec<Option<Receiver<Batch>>>> = (0..ranks).map(|_| (0..ranks).map(|_| None).collect()).collect();
    for from in 0..ranks {
        for to in 0..ranks {
            if from != to {
                let (tx, rx) = channel();
                outgoing[from][to] = Some(tx);
                incoming[to][from] = Some(rx);
            }
        }
    }
    outgoing
        .into_iter()
        .zip(incoming)
        .enumerate()
        .map(|(r, (outgoing, incoming))| RankTransport { rank: r as u32, ranks: ranks as u32, batch_bytes, outgoing, incoming, stats: TransportStats::default() })
        .collect()
}

impl RankTransport {
    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn ranks(&self) -> u32 {
        self.ranks
    }

    pub fn stats(&self) -> TransportStats {
        self.stats
    }

    fn peer_error(&self, peer: u32, what: &str) -> Error {
        Error::Transport { rank: self.rank, reason: format!("{what} rank {peer}") }
    }

    pub fn send(&mut self, to: u32, tag: Tag, bytes: &[u8]) -> Result<()> {
        let tx = self.outgoing.get(to as usize).and_then(Option::as_ref).ok_or_else(|| self.peer_error(to, "no channel to"))?;
        let chunks: Vec<&[u8]> = if bytes.is_empty() { vec![&[][..]] } else { bytes.chunks(self.batch_bytes).collect() };
        let count = chunks.len() as u32;
        for (i, c) in chunks.into_iter().enumerate() {
            tx.send(Batch { tag, index: i as u32, count, bytes: c.to_vec() }).map_err(|_| Error::Transport { rank: self.rank, reason: format!("rank {to} hung up") })?;
        }
        self.stats.messages += 1;
        self.stats.batches += count as u64;
        self.stats.bytes += bytes.len() as u64;
        Ok(())
    }

    /// Blocks until the next message from `from` arrives; its tag must match.
    pub fn recv(&mut self, from: u32, tag: Tag) -> Result<Vec<u8>> {
        let rx = self.incoming.get(from as usize).and_then(Option::as_ref).ok_or_else(|| self.peer_error(from, "no channel from"))?;
        let mut out = Vec::new();
        let mut expected = 0u32;
        loop {
            let b = rx.recv().map_err(|_| Error::Transport { rank: self.rank, reason: format!("rank {from} hung up") })?;
            if b.tag != tag || b.index != expected {
                return Err(Error::Transport { rank: self.rank, reason: format!("expected {tag:?} batch {expected} from rank {from}, got {:?} batch {}", b.tag, b.index) });
            }
            out.extend_from_slice(&b.bytes);
            expected += 1;
            if expected == b.count {
                return Ok(out);
            }
        }
    }

    /// Sends `messages[r]` to every other rank r and returns what each rank sent here.
    pub fn all_to_all(&mut self, tag: Tag, messages: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>> {
        assert_eq!(messages.len(), self.ranks as usize);
        let mut received = vec![Vec::new(); self.ranks as usize];
        for (to, m) in messages.into_iter().enumerate() {
            if to as u32 == self.rank {
                received[to] = m;
            } else {
                self.send(to as u32, tag, &m)?;
            }
        }
        for from in 0..self.ranks {
            if from != self.rank {
                received[from as usize] = self.recv(from, tag)?;
            }
        }
        Ok(received)
    }

    pub fn all_gather(&mut self, tag: Tag, mine: Vec<u8>) -> Result<Vec<Vec<u8>>> {
        let n = self.ranks as usize;
        self.all_to_all(tag, vec![mine; n])
    }

    /// Rank 0 receives every rank's message in rank order; other ranks get `None`.
    pub fn gather(&mut self, tag: Tag, mine: Vec<u8>) -> Result<Option<Vec<Vec<u8>>>> {
        if self.rank == 0 {
            let mut all = vec![mine];
            for from in 1..self.ranks {
                all.push(self.recv(from, tag)?);
            }
            Ok(Some(all))
        } else {
            self.send(0, tag, &mine)?;
            Ok(None)
        }
    }

    /// Rank 0's value reaches everyone.
    pub fn broadcast(&mut self, tag: Tag, mine: Vec<u8>) -> Result<Vec<u8>> {
        if self.rank == 0 {
            for to in 1..self.ranks {
                self.send(to, tag, &mine)?;
            }
            Ok(mine)
        } else {
            self.recv(0, tag)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_reassembles() {
        let mut t = create_transports(2, 3);
        let mut b = t.pop().unwrap();
        let mut a = t.pop().unwrap();
        a.send(1, Tag::Aura, b"hello world").unwrap();
        a.send(1, Tag::Aura, b"").unwrap();
        assert_eq!(a.stats().batches, 5);
        assert_eq!(b.recv(0, Tag::Aura).unwrap(), b"hello world");
        assert!(b.recv(0, Tag::Aura).unwrap().is_empty());
    }

    #[test]
    fn tag_mismatch_is_error() {
        let mut t = create_transports(2, 16);
        let mut b = t.pop().unwrap();
        let mut a = t.pop().unwrap();
        a.send(1, Tag::Aura, b"x").unwrap();
        assert!(b.recv(0, Tag::Migration).is_err());
    }

    #[test]
    fn hang_up_propagates() {
        let mut t = create_transports(2, 16);
        let b = t.pop().unwrap();
        let mut a = t.pop().unwrap();
        drop(b);
        assert!(a.send(1, Tag::Aura, b"x").is_err());
        assert!(a.recv(1, Tag::Aura).is_err());
    }

    #[test]
    fn collectives_across_threads() {
        let ts = create_transports(4, 2);
        let handles: Vec<_> = ts
            .into_iter()
            .map(|mut t| {
                std::thread::spawn(move || {
                    let r = t.rank() as u8;
                    let all = t.all_gather(Tag::Secretion, vec![r; r as usize + 1]).unwrap();
                    for (i, m) in all.iter().enumerate() {
                        assert_eq!(m, &vec![i as u8; i + 1]);
                    }
                    let g = t.gather(Tag::Observation, vec![r]).unwrap();
                    let b = t.broadcast(Tag::Control, vec![42, r]).unwrap();
                    assert_eq!(b, vec![42, 0]);
                    g
                })
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(results[0], Some(vec![vec![0], vec![1], vec![2], vec![3]]));
        assert!(results[1..].iter().all(Option::is_none));
    }
}

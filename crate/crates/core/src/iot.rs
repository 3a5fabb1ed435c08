//! Key-evolving stealth payments for constrained senders.
//!
//! A sender and receiver agree on `h_0 = H(r*V)` once per epoch, exactly as
//! in [`crate::dksap`], then evolve it as `h_i = H(h_{i-1})` for the next
//! transactions. Only the first transaction of an epoch carries `R`; the
//! `i`-th pays to `T_i = h_i*G + S`. An epoch is exactly `N` transactions.
//!
//! `cnt` counts transactions already handled in the current epoch. The
//! sender starts a new epoch when `cnt = N`. Chain values are overwritten as
//! soon as they are used and the last one is erased when the epoch ends, so
//! a table never holds `h_j` for `j < cnt`.
//!
//! The ledger carries no sender identity. A receiver keys each epoch by the
//! encoding of its `R` and indexes the precomputed destinations, so a warm
//! transaction is recognised by a hash-map lookup with no group operation.
//! The receiver keeps the next `W` expected destinations per epoch
//! (`W = 1` by default) so that a dropped transaction does not desynchronise
//! the chain.
//!
//! Exported state is plaintext; it holds spendable key material and must be
//! stored encrypted by the deployment.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::marker::PhantomData;

use rand_core::{CryptoRng, RngCore};

use crate::codec::{put_point, put_scalar, put_u16, put_u32, put_u64, Reader};
use crate::dksap::{
    one_time_destination, purported_destination, sender_build_payment_with_secret, AuditorBundle, KeyBundle,
    PublicBundle, ScanKeys,
};
use crate::error::{Error, Result};
use crate::group::{Backend, Group, HashAlg, Point, Scalar, Secp256k1};
use crate::tx::StealthTx;

pub const DEFAULT_LOOKAHEAD: u32 = 1;

const MAGIC: &[u8; 4] = b"SKIT";
const VERSION: u8 = 1;
const KIND_SENDER: u8 = 1;
const KIND_RECEIVER: u8 = 2;
const KIND_AUDITOR: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpochConfig {
    n: u32,
    lookahead: u32,
}

impl EpochConfig {
    pub fn new(n: u32) -> Result<Self> {
        Self::with_lookahead(n, DEFAULT_LOOKAHEAD)
    }

    pub fn with_lookahead(n: u32, lookahead: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidEpoch);
        }
        if lookahead == 0 {
            return Err(Error::InvalidLookahead);
        }
        Ok(EpochConfig { n, lookahead })
    }

    /// Transactions per ephemeral key.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Expected destinations a receiver keeps per epoch.
    pub fn lookahead(&self) -> u32 {
        self.lookahead
    }
}

/// `h_{i+1} = H(enc(h_i))`: 1 H.
pub fn chain_step<B: Backend>(g: &Group<B>, h: &Scalar<B>) -> Result<Scalar<B>> {
    g.hash_to_scalar(h.to_bytes().as_ref())
}

/// The `i`-fold chain image of `h0`: `i` H.
pub fn epoch_chain<B: Backend>(g: &Group<B>, h0: &Scalar<B>, i: u32) -> Result<Scalar<B>> {
    let mut h = *h0;
    for _ in 0..i {
        h = chain_step(g, &h)?;
    }
    Ok(h)
}

/// Opaque peer label. On the sender side it is chosen by the application; on
/// the receiver side it is the encoding of the epoch's ephemeral key.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeerId(Vec<u8>);

impl PeerId {
    pub const MAX_LEN: usize = u16::MAX as usize;

    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.len() > Self::MAX_LEN {
            return Err(Error::InvalidSpec("peer id longer than 65535 bytes"));
        }
        Ok(PeerId(bytes))
    }

    fn of_point<B: Backend>(p: &Point<B>) -> Self {
        PeerId(p.to_vec())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) if !s.is_empty() && s.chars().all(|c| c.is_ascii_graphic()) => f.write_str(s),
            _ => f.write_str(&crate::group::hex_string(&self.0)),
        }
    }
}

impl fmt::Debug for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeerId({self})")
    }
}

pub struct SenderPeerState<B: Backend = Secp256k1> {
    recipient: PublicBundle<B>,
    cnt: u32,
    chain: Option<Scalar<B>>,
}

impl<B: Backend> SenderPeerState<B> {
    pub fn recipient(&self) -> &PublicBundle<B> {
        &self.recipient
    }

    pub fn cnt(&self) -> u32 {
        self.cnt
    }

    /// `h_cnt`, or `None` once the epoch is used up.
    pub fn chain(&self) -> Option<&Scalar<B>> {
        self.chain.as_ref()
    }
}

impl<B: Backend> fmt::Debug for SenderPeerState<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SenderPeerState")
            .field("recipient", &self.recipient)
            .field("cnt", &self.cnt)
            .field("has_chain", &self.chain.is_some())
            .finish()
    }
}

/// Sender-side per-peer epochs.
pub struct SenderTable<B: Backend = Secp256k1> {
    config: EpochConfig,
    peers: BTreeMap<PeerId, SenderPeerState<B>>,
}

impl<B: Backend> fmt::Debug for SenderTable<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SenderTable")
            .field("config", &self.config)
            .field("peers", &self.peers)
            .finish()
    }
}

impl<B: Backend> SenderTable<B> {
    pub fn new(config: EpochConfig) -> Self {
        SenderTable {
            config,
            peers: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> EpochConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn peer(&self, id: &PeerId) -> Option<&SenderPeerState<B>> {
        self.peers.get(id)
    }

    pub fn peers(&self) -> impl Iterator<Item = (&PeerId, &SenderPeerState<B>)> {
        self.peers.iter()
    }

    /// Whether the next send to `peer` carries a fresh ephemeral key.
    pub fn next_is_cold(&self, peer: &PeerId, recipient: &PublicBundle<B>) -> bool {
        match self.peers.get(peer) {
            Some(st) => st.cnt >= self.config.n || st.chain.is_none() || st.recipient != *recipient,
            None => true,
        }
    }

    /// Builds the next transaction to `recipient`.
    ///
    /// Cold (new peer, finished epoch or changed bundle): 1 RP + 2 FP + 1 H.
    /// Warm: 1 FP. Either way 1 more H to advance the chain unless this was
    /// the epoch's last transaction.
    pub fn send<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        g: &Group<B>,
        rng: &mut R,
        peer: &PeerId,
        recipient: &PublicBundle<B>,
        amount: u64,
    ) -> Result<StealthTx<B>> {
        let (tx, used) = if self.next_is_cold(peer, recipient) {
            let (payment, h0) = sender_build_payment_with_secret(g, rng, recipient, amount)?;
            (payment.to_tx(), h0)
        } else {
            let st = &self.peers[peer];
            let h = st.chain.expect("warm peer has a chain value");
            let dest = one_time_destination(g, &h, recipient.spend_public())?;
            (StealthTx::new(None, dest, amount)?, h)
        };
        let cnt = if tx.has_ephemeral() { 1 } else { self.peers[peer].cnt + 1 };
        let chain = if cnt < self.config.n {
            Some(chain_step(g, &used)?)
        } else {
            None
        };
        self.peers.insert(
            peer.clone(),
            SenderPeerState {
                recipient: recipient.clone(),
                cnt,
                chain,
            },
        );
        Ok(tx)
    }

    pub fn forget(&mut self, peer: &PeerId) -> bool {
        self.peers.remove(peer).is_some()
    }

    pub fn export(&self, g: &Group<B>) -> Vec<u8> {
        let mut out = header::<B>(KIND_SENDER, g.hash_alg(), self.config, 0, self.peers.len());
        for (id, st) in &self.peers {
            put_id(&mut out, id);
            put_point(&mut out, st.recipient.scan_public());
            put_point(&mut out, st.recipient.spend_public());
            put_u32(&mut out, st.cnt);
            put_chain(&mut out, st.chain.as_ref());
        }
        out
    }

    pub fn import(g: &Group<B>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let (config, _, count) = read_header::<B>(&mut r, KIND_SENDER, g.hash_alg())?;
        let mut peers = BTreeMap::new();
        for _ in 0..count {
            let id = read_id(&mut r)?;
            let v = r.point::<B>("recipient scan key")?;
            let s = r.point::<B>("recipient spend key")?;
            let recipient = PublicBundle::new(v, s).map_err(|_| Error::CorruptState("identity recipient key"))?;
            let cnt = r.u32("sender cnt")?;
            let chain = read_chain::<B>(&mut r)?;
            if cnt == 0 || cnt > config.n {
                return Err(Error::CorruptState("sender cnt out of range"));
            }
            if chain.is_some() != (cnt < config.n) {
                return Err(Error::CorruptState("sender chain value inconsistent with cnt"));
            }
            if peers.insert(id, SenderPeerState { recipient, cnt, chain }).is_some() {
                return Err(Error::CorruptState("duplicate peer id"));
            }
        }
        r.finish()?;
        Ok(SenderTable { config, peers })
    }
}

/// One precomputed destination.
pub struct Expected<B: Backend, S> {
    index: u32,
    destination: Point<B>,
    spend: S,
}

impl<B: Backend, S: Copy> Expected<B, S> {
    /// Position in the epoch; the destination is `h_index*G + S`.
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn destination(&self) -> &Point<B> {
        &self.destination
    }

    pub fn spend(&self) -> S {
        self.spend
    }
}

/// Receiver-side state of one epoch.
pub struct ReceiverSlot<B: Backend, S> {
    cnt: u32,
    chain: Option<Scalar<B>>,
    expected: VecDeque<Expected<B, S>>,
}

impl<B: Backend, S: Copy> ReceiverSlot<B, S> {
    pub fn cnt(&self) -> u32 {
        self.cnt
    }

    /// Chain value for the last expected destination.
    pub fn chain(&self) -> Option<&Scalar<B>> {
        self.chain.as_ref()
    }

    /// Index of [`ReceiverSlot::chain`].
    pub fn frontier(&self) -> u32 {
        self.cnt + self.expected.len() as u32 - 1
    }

    pub fn expected(&self) -> impl Iterator<Item = &Expected<B, S>> {
        self.expected.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IotMatch<S> {
    /// Receiver-side epoch slot the tx belongs to.
    pub peer: PeerId,
    /// Position of the tx in its epoch.
    pub index: u32,
    pub spend: S,
}

/// Receiver-side epochs, generic over the scanning keys: a full
/// [`KeyBundle`] recovers spend keys, an [`AuditorBundle`] only detects.
pub struct ReceiverTable<B: Backend, K: ScanKeys<B>> {
    config: EpochConfig,
    next_height: u64,
    slots: BTreeMap<PeerId, ReceiverSlot<B, K::Spend>>,
    index: HashMap<Vec<u8>, (PeerId, u32)>,
    _keys: PhantomData<fn(&K)>,
}

pub type IotReceiverTable<B = Secp256k1> = ReceiverTable<B, KeyBundle<B>>;
pub type IotAuditorTable<B = Secp256k1> = ReceiverTable<B, AuditorBundle<B>>;

impl<B: Backend, K: ScanKeys<B>> fmt::Debug for ReceiverTable<B, K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReceiverTable")
            .field("config", &self.config)
            .field("next_height", &self.next_height)
            .field("slots", &self.slots.len())
            .field("expected", &self.index.len())
            .finish()
    }
}

impl<B: Backend, K: ScanKeys<B>> ReceiverTable<B, K> {
    pub fn new(config: EpochConfig) -> Self {
        ReceiverTable {
            config,
            next_height: 0,
            slots: BTreeMap::new(),
            index: HashMap::new(),
            _keys: PhantomData,
        }
    }

    pub fn config(&self) -> EpochConfig {
        self.config
    }

    /// First ledger height not yet scanned into this table.
    pub fn next_height(&self) -> u64 {
        self.next_height
    }

    pub fn set_next_height(&mut self, height: u64) {
        self.next_height = height;
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, peer: &PeerId) -> Option<&ReceiverSlot<B, K::Spend>> {
        self.slots.get(peer)
    }

    pub fn slots(&self) -> impl Iterator<Item = (&PeerId, &ReceiverSlot<B, K::Spend>)> {
        self.slots.iter()
    }

    /// Number of precomputed destinations across all slots.
    pub fn expected_len(&self) -> usize {
        self.index.len()
    }

    /// Checks one transaction against the table.
    ///
    /// With `R`: 1 RP + 1 H + 1 FP, then on a match 1 H + 1 FP per
    /// precomputed destination. Without `R`: a lookup; a hit costs 1 H + 1 FP
    /// to precompute the next destination, a miss costs nothing.
    pub fn process(&mut self, g: &Group<B>, keys: &K, tx: &StealthTx<B>) -> Result<Option<IotMatch<K::Spend>>> {
        match tx.ephemeral() {
            Some(r) => self.process_cold(g, keys, r, tx.destination()),
            None => self.process_warm(g, keys, tx.destination()),
        }
    }

    fn process_cold(
        &mut self,
        g: &Group<B>,
        keys: &K,
        r: &Point<B>,
        dest: &Point<B>,
    ) -> Result<Option<IotMatch<K::Spend>>> {
        let (h0, expected) = purported_destination(g, keys, r)?;
        if expected != *dest {
            return Ok(None);
        }
        let peer = PeerId::of_point(r);
        self.remove_slot(&peer);
        let spend = keys.spend_for(&h0);
        let mut slot = ReceiverSlot {
            cnt: 1,
            chain: Some(h0),
            expected: VecDeque::new(),
        };
        self.refill(g, keys, &peer, &mut slot, 0)?;
        self.store_slot(peer.clone(), slot);
        Ok(K::spend_usable(&spend).then_some(IotMatch { peer, index: 0, spend }))
    }

    fn process_warm(&mut self, g: &Group<B>, keys: &K, dest: &Point<B>) -> Result<Option<IotMatch<K::Spend>>> {
        let Some((peer, idx)) = self.index.get(dest.to_bytes().as_ref()).cloned() else {
            return Ok(None);
        };
        let mut slot = self.slots.remove(&peer).expect("indexed slot exists");
        if idx >= self.config.n || idx < slot.cnt {
            return Err(Error::CorruptState("indexed destination outside the epoch"));
        }
        let frontier = slot.frontier();
        let mut spend = None;
        while let Some(front) = slot.expected.front() {
            if front.index > idx {
                break;
            }
            let e = slot.expected.pop_front().expect("front exists");
            self.index.remove(e.destination.to_bytes().as_ref());
            if e.index == idx {
                spend = Some(e.spend);
            }
        }
        let spend = spend.expect("indexed entry present in its slot");
        slot.cnt = idx + 1;
        self.refill(g, keys, &peer, &mut slot, frontier)?;
        self.store_slot(peer.clone(), slot);
        Ok(K::spend_usable(&spend).then_some(IotMatch { peer, index: idx, spend }))
    }

    /// Extends `slot` to `min(W, N - cnt)` expected destinations starting
    /// after `frontier`, overwriting the chain value as it goes.
    fn refill(
        &mut self,
        g: &Group<B>,
        keys: &K,
        peer: &PeerId,
        slot: &mut ReceiverSlot<B, K::Spend>,
        mut frontier: u32,
    ) -> Result<()> {
        while (slot.expected.len() as u32) < self.config.lookahead && frontier + 1 < self.config.n {
            let h = chain_step(g, slot.chain.as_ref().expect("chain present while refilling"))?;
            frontier += 1;
            let destination = one_time_destination(g, &h, keys.spend_public())?;
            let spend = keys.spend_for(&h);
            slot.chain = Some(h);
            self.index.insert(destination.to_vec(), (peer.clone(), frontier));
            slot.expected.push_back(Expected {
                index: frontier,
                destination,
                spend,
            });
        }
        if slot.expected.is_empty() {
            slot.chain = None;
        }
        Ok(())
    }

    /// Keeps only slots with outstanding destinations.
    fn store_slot(&mut self, peer: PeerId, slot: ReceiverSlot<B, K::Spend>) {
        if !slot.expected.is_empty() {
            self.slots.insert(peer, slot);
        }
    }

    fn remove_slot(&mut self, peer: &PeerId) {
        if let Some(old) = self.slots.remove(peer) {
            for e in &old.expected {
                self.index.remove(e.destination.to_bytes().as_ref());
            }
        }
    }

    /// Recomputes the last expected destination of every slot from its
    /// chain value (1 FP per slot).
    pub fn verify(&self, g: &Group<B>, keys: &K) -> Result<()> {
        for slot in self.slots.values() {
            let h = slot.chain.as_ref().ok_or(Error::CorruptState("slot without chain value"))?;
            let last = slot.expected.back().ok_or(Error::CorruptState("slot without destinations"))?;
            if one_time_destination(g, h, keys.spend_public())? != last.destination {
                return Err(Error::CorruptState("chain value does not match expected destination"));
            }
            if last.spend != keys.spend_for(h) {
                return Err(Error::CorruptState("spend key does not match chain value"));
            }
        }
        Ok(())
    }

    fn kind() -> u8 {
        if K::SPEND_LEN == 0 {
            KIND_AUDITOR
        } else {
            KIND_RECEIVER
        }
    }

    pub fn export(&self, g: &Group<B>) -> Vec<u8> {
        let mut out = header::<B>(Self::kind(), g.hash_alg(), self.config, self.next_height, self.slots.len());
        for (id, slot) in &self.slots {
            put_id(&mut out, id);
            put_u32(&mut out, slot.cnt);
            put_chain(&mut out, slot.chain.as_ref());
            put_u16(&mut out, slot.expected.len() as u16);
            for e in &slot.expected {
                put_u32(&mut out, e.index);
                put_point(&mut out, &e.destination);
                K::encode_spend(&e.spend, &mut out);
            }
        }
        out
    }

    pub fn import(g: &Group<B>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let (config, next_height, count) = read_header::<B>(&mut r, Self::kind(), g.hash_alg())?;
        let mut table = Self::new(config);
        table.next_height = next_height;
        for _ in 0..count {
            let id = read_id(&mut r)?;
            let cnt = r.u32("slot cnt")?;
            let chain = read_chain::<B>(&mut r)?;
            let n = r.u16("slot entry count")? as u32;
            if cnt == 0 || cnt >= config.n {
                return Err(Error::CorruptState("slot cnt out of range"));
            }
            if n != config.lookahead.min(config.n - cnt) {
                return Err(Error::CorruptState("slot has wrong number of expected destinations"));
            }
            if chain.is_none() {
                return Err(Error::CorruptState("slot without chain value"));
            }
            let mut expected = VecDeque::with_capacity(n as usize);
            for k in 0..n {
                let index = r.u32("expected index")?;
                let destination = r.point::<B>("expected destination")?;
                let spend = K::decode_spend(r.take(K::SPEND_LEN, "expected spend key")?)?;
                if index != cnt + k {
                    return Err(Error::CorruptState("expected indices not contiguous"));
                }
                if destination.is_identity() {
                    return Err(Error::CorruptState("identity expected destination"));
                }
                if table.index.insert(destination.to_vec(), (id.clone(), index)).is_some() {
                    return Err(Error::CorruptState("duplicate expected destination"));
                }
                expected.push_back(Expected {
                    index,
                    destination,
                    spend,
                });
            }
            if table.slots.insert(id, ReceiverSlot { cnt, chain, expected }).is_some() {
                return Err(Error::CorruptState("duplicate slot id"));
            }
        }
        r.finish()?;
        Ok(table)
    }
}

fn header<B: Backend>(kind: u8, hash: HashAlg, config: EpochConfig, height: u64, count: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, kind, B::ID, hash.id()]);
    put_u32(&mut out, config.n);
    put_u32(&mut out, config.lookahead);
    put_u64(&mut out, height);
    put_u32(&mut out, count as u32);
    out
}

fn read_header<B: Backend>(r: &mut Reader<'_>, kind: u8, hash: HashAlg) -> Result<(EpochConfig, u64, u32)> {
    if r.take(4, "state magic")? != MAGIC {
        return Err(Error::BadMagic("state file"));
    }
    let version = r.u8("state version")?;
    if version != VERSION {
        return Err(Error::UnknownVersion(version));
    }
    if r.u8("state kind")? != kind {
        return Err(Error::CorruptState("state file is for a different role"));
    }
    let backend = r.u8("backend id")?;
    if backend != B::ID {
        return Err(Error::BackendMismatch {
            expected: B::NAME,
            found: backend,
        });
    }
    let hash_id = r.u8("hash id")?;
    if hash_id != hash.id() {
        return Err(Error::HashMismatch {
            expected: hash.name(),
            found: hash_id,
        });
    }
    let n = r.u32("epoch length")?;
    let w = r.u32("lookahead")?;
    let config = EpochConfig::with_lookahead(n, w).map_err(|_| Error::CorruptState("invalid epoch config"))?;
    let height = r.u64("next height")?;
    let count = r.u32("record count")?;
    Ok((config, height, count))
}

fn put_id(out: &mut Vec<u8>, id: &PeerId) {
    put_u16(out, id.0.len() as u16);
    out.extend_from_slice(&id.0);
}

fn read_id(r: &mut Reader<'_>) -> Result<PeerId> {
    let len = r.u16("peer id length")? as usize;
    Ok(PeerId(r.take(len, "peer id")?.to_vec()))
}

fn put_chain<B: Backend>(out: &mut Vec<u8>, h: Option<&Scalar<B>>) {
    match h {
        Some(h) => {
            out.push(1);
            put_scalar(out, h);
        }
        None => out.push(0),
    }
}

fn read_chain<B: Backend>(r: &mut Reader<'_>) -> Result<Option<Scalar<B>>> {
    match r.u8("chain flag")? {
        0 => Ok(None),
        1 => Ok(Some(
            r.scalar::<B>("chain value")
                .map_err(|e| match e {
                    Error::Truncated(w) => Error::Truncated(w),
                    _ => Error::CorruptState("chain value is not a canonical scalar"),
                })?,
        )),
        _ => Err(Error::CorruptState("bad chain flag")),
    }
}

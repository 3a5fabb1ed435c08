//! Append-only toy ledger, scanning actors and a traffic generator.
//!
//! File format: `b"SKLG" | version (1) | backend id (1)` followed by blocks,
//! each `u32 length | block`, where a block is a sequence of
//! `u32 length | tx wire bytes`. All integers are big-endian.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::bench::Scheme;
use crate::codec::{put_u32, Reader};
use crate::dksap::{
    keygen, purported_destination, sender_build_payment, AuditorBundle, KeyBundle, ScanKeys,
};
use crate::error::{Error, Result};
use crate::group::{Backend, Group, OpCounters, Secp256k1};
use crate::iot::{EpochConfig, IotMatch, PeerId, ReceiverTable, SenderTable};
use crate::par;
use crate::tx::StealthTx;

const MAGIC: &[u8; 4] = b"SKLG";
const VERSION: u8 = 1;

pub struct Block<B: Backend = Secp256k1> {
    height: u64,
    txs: Vec<StealthTx<B>>,
}

impl<B: Backend> Block<B> {
    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn txs(&self) -> &[StealthTx<B>] {
        &self.txs
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for tx in &self.txs {
            put_u32(&mut out, tx.encoded_len() as u32);
            tx.write_to(&mut out);
        }
        out
    }

    fn decode(height: u64, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let mut txs = Vec::new();
        while r.remaining() > 0 {
            let len = r.u32("tx length")? as usize;
            txs.push(StealthTx::from_bytes(r.take(len, "tx")?)?);
        }
        Ok(Block { height, txs })
    }
}

/// Blocks at heights `0, 1, 2, ...`. Committed blocks are never modified.
pub struct Ledger<B: Backend = Secp256k1> {
    blocks: Vec<Block<B>>,
}

impl<B: Backend> Default for Ledger<B> {
    fn default() -> Self {
        Ledger { blocks: Vec::new() }
    }
}

impl<B: Backend> Ledger<B> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of blocks; also the next height.
    pub fn len(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tx_count(&self) -> usize {
        self.blocks.iter().map(|b| b.txs.len()).sum()
    }

    pub fn blocks(&self) -> &[Block<B>] {
        &self.blocks
    }

    pub fn block(&self, height: u64) -> Option<&Block<B>> {
        self.blocks.get(usize::try_from(height).ok()?)
    }

    pub fn txs(&self) -> impl Iterator<Item = (u64, usize, &StealthTx<B>)> {
        self.blocks
            .iter()
            .flat_map(|b| b.txs.iter().enumerate().map(move |(i, tx)| (b.height, i, tx)))
    }

    /// Appends already-validated transactions and returns the new height.
    pub fn append_txs(&mut self, txs: Vec<StealthTx<B>>) -> u64 {
        let height = self.len();
        self.blocks.push(Block { height, txs });
        height
    }

    /// Decodes every transaction first; any malformed one rejects the whole
    /// block and leaves the ledger unchanged.
    pub fn append_block<T: AsRef<[u8]>>(&mut self, txs: &[T]) -> Result<u64> {
        let decoded = txs
            .iter()
            .map(|t| StealthTx::from_bytes(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.append_txs(decoded))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[VERSION, B::ID]);
        for b in &self.blocks {
            let enc = b.encode();
            put_u32(&mut out, enc.len() as u32);
            out.extend_from_slice(&enc);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4, "ledger magic")? != MAGIC {
            return Err(Error::BadMagic("ledger file"));
        }
        let version = r.u8("ledger version")?;
        if version != VERSION {
            return Err(Error::UnknownVersion(version));
        }
        let backend = r.u8("backend id")?;
        if backend != B::ID {
            return Err(Error::BackendMismatch {
                expected: B::NAME,
                found: backend,
            });
        }
        let mut ledger = Ledger::new();
        while r.remaining() > 0 {
            let len = r.u32("block length")? as usize;
            let block = Block::decode(ledger.len(), r.take(len, "block")?)?;
            ledger.blocks.push(block);
        }
        Ok(ledger)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Something that inspects ledger transactions in order.
pub trait Scanner<B: Backend> {
    type Found;

    fn scan_tx(&mut self, g: &Group<B>, tx: &StealthTx<B>) -> Result<Option<Self::Found>>;

    /// Matches in one block as `(tx index, found)`.
    fn scan_block(&mut self, g: &Group<B>, block: &Block<B>) -> Result<Vec<(usize, Self::Found)>> {
        let mut out = Vec::new();
        for (i, tx) in block.txs.iter().enumerate() {
            if let Some(f) = self.scan_tx(g, tx)? {
                out.push((i, f));
            }
        }
        Ok(out)
    }

    /// Called after a range has been scanned.
    fn finish_range(&mut self, _to: u64) {}
}

/// Baseline scanner: every tx with an ephemeral key costs 1 RP + 1 FP + 1 H.
/// Txs without one cannot be baseline payments and are skipped for free.
/// Blocks are scanned in parallel with the `parallel` feature.
pub struct DksapScanner<'k, B: Backend, K: ScanKeys<B>> {
    keys: &'k K,
    _backend: std::marker::PhantomData<B>,
}

pub type DksapReceiver<'k, B = Secp256k1> = DksapScanner<'k, B, KeyBundle<B>>;
pub type DksapAuditor<'k, B = Secp256k1> = DksapScanner<'k, B, AuditorBundle<B>>;

impl<'k, B: Backend, K: ScanKeys<B>> DksapScanner<'k, B, K> {
    pub fn new(keys: &'k K) -> Self {
        DksapScanner {
            keys,
            _backend: std::marker::PhantomData,
        }
    }
}

fn dksap_scan_tx<B: Backend, K: ScanKeys<B>>(g: &Group<B>, keys: &K, tx: &StealthTx<B>) -> Result<Option<K::Spend>> {
    let Some(r) = tx.ephemeral() else {
        return Ok(None);
    };
    let (secret, dest) = purported_destination(g, keys, r)?;
    if dest != *tx.destination() {
        return Ok(None);
    }
    let spend = keys.spend_for(&secret);
    Ok(K::spend_usable(&spend).then_some(spend))
}

impl<B: Backend, K: ScanKeys<B>> Scanner<B> for DksapScanner<'_, B, K> {
    type Found = K::Spend;

    fn scan_tx(&mut self, g: &Group<B>, tx: &StealthTx<B>) -> Result<Option<K::Spend>> {
        dksap_scan_tx(g, self.keys, tx)
    }

    fn scan_block(&mut self, g: &Group<B>, block: &Block<B>) -> Result<Vec<(usize, K::Spend)>> {
        let keys = self.keys;
        let results = par::map(&block.txs, |tx| dksap_scan_tx(g, keys, tx));
        let mut out = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            if let Some(f) = r? {
                out.push((i, f));
            }
        }
        Ok(out)
    }
}

/// Stateful scanner over a [`ReceiverTable`]. Must see txs in ledger order.
pub struct IotScanner<'k, B: Backend, K: ScanKeys<B>> {
    keys: &'k K,
    table: ReceiverTable<B, K>,
}

pub type IotReceiver<'k, B = Secp256k1> = IotScanner<'k, B, KeyBundle<B>>;
pub type IotAuditor<'k, B = Secp256k1> = IotScanner<'k, B, AuditorBundle<B>>;

impl<'k, B: Backend, K: ScanKeys<B>> IotScanner<'k, B, K> {
    pub fn new(keys: &'k K, config: EpochConfig) -> Self {
        Self::with_table(keys, ReceiverTable::new(config))
    }

    pub fn with_table(keys: &'k K, table: ReceiverTable<B, K>) -> Self {
        IotScanner { keys, table }
    }

    pub fn table(&self) -> &ReceiverTable<B, K> {
        &self.table
    }

    pub fn into_table(self) -> ReceiverTable<B, K> {
        self.table
    }
}

impl<B: Backend, K: ScanKeys<B>> Scanner<B> for IotScanner<'_, B, K> {
    type Found = IotMatch<K::Spend>;

    fn scan_tx(&mut self, g: &Group<B>, tx: &StealthTx<B>) -> Result<Option<Self::Found>> {
        self.table.process(g, self.keys, tx)
    }

    fn finish_range(&mut self, to: u64) {
        self.table.set_next_height(to);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanMatch<F> {
    pub height: u64,
    pub index: usize,
    pub found: F,
}

#[derive(Clone, Debug)]
pub struct ScanReport<F> {
    pub matches: Vec<ScanMatch<F>>,
    /// Group operations performed by this scan alone.
    pub counters: OpCounters,
    pub txs_scanned: u64,
}

impl<F> ScanReport<F> {
    /// `(height, index)` of every match.
    pub fn positions(&self) -> Vec<(u64, usize)> {
        self.matches.iter().map(|m| (m.height, m.index)).collect()
    }
}

/// Scans heights `[from, to)` in order. Operations are counted on a fresh
/// session of `g`, so concurrent scans report independent counters.
pub fn scan_range<B: Backend, S: Scanner<B>>(
    g: &Group<B>,
    ledger: &Ledger<B>,
    scanner: &mut S,
    from: u64,
    to: u64,
) -> Result<ScanReport<S::Found>> {
    if from > to || to > ledger.len() {
        return Err(Error::RangeOutOfBounds {
            from,
            to,
            len: ledger.len(),
        });
    }
    let session = g.session();
    let mut matches = Vec::new();
    let mut txs_scanned = 0u64;
    for block in &ledger.blocks[from as usize..to as usize] {
        for (index, found) in scanner.scan_block(&session, block)? {
            matches.push(ScanMatch {
                height: block.height,
                index,
                found,
            });
        }
        txs_scanned += block.txs.len() as u64;
    }
    scanner.finish_range(to);
    Ok(ScanReport {
        matches,
        counters: session.counters(),
        txs_scanned,
    })
}

#[derive(Clone, Debug)]
pub struct TrafficSpec {
    pub scheme: Scheme,
    pub senders: usize,
    pub receivers: usize,
    /// Payments from every sender to every receiver.
    pub txs_per_pair: usize,
    pub epoch: EpochConfig,
    /// Regular (non-stealth) txs mixed in.
    pub decoys: usize,
    pub txs_per_block: usize,
    pub seed: u64,
}

impl TrafficSpec {
    pub fn validate(&self) -> Result<()> {
        if self.senders == 0 || self.receivers == 0 {
            return Err(Error::InvalidSpec("need at least one sender and one receiver"));
        }
        if self.txs_per_block == 0 {
            return Err(Error::InvalidSpec("blocks must hold at least one tx"));
        }
        Ok(())
    }
}

/// Who a generated stealth tx was for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthEntry {
    pub height: u64,
    pub index: usize,
    pub sender: usize,
    pub receiver: usize,
}

pub struct Traffic<B: Backend = Secp256k1> {
    pub ledger: Ledger<B>,
    pub receivers: Vec<KeyBundle<B>>,
    pub truth: Vec<TruthEntry>,
}

impl<B: Backend> Traffic<B> {
    /// Ground-truth positions for one receiver, in ledger order.
    pub fn positions_for(&self, receiver: usize) -> Vec<(u64, usize)> {
        self.truth
            .iter()
            .filter(|t| t.receiver == receiver)
            .map(|t| (t.height, t.index))
            .collect()
    }
}

/// Deterministic interleaved traffic. Each sender keeps its own epoch
/// state; the order of payments within a sender/receiver pair is preserved.
pub fn traffic_generate<B: Backend>(g: &Group<B>, spec: &TrafficSpec) -> Result<Traffic<B>> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let receivers = (0..spec.receivers)
        .map(|_| keygen(g, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let publics: Vec<_> = receivers.iter().map(KeyBundle::public).collect();
    let peer_ids = (0..spec.receivers)
        .map(|r| PeerId::new(format!("r{r}")))
        .collect::<Result<Vec<_>>>()?;
    let mut sender_tables: Vec<SenderTable<B>> = (0..spec.senders).map(|_| SenderTable::new(spec.epoch)).collect();

    let mut schedule: Vec<Option<(usize, usize)>> = Vec::new();
    for s in 0..spec.senders {
        for r in 0..spec.receivers {
            schedule.extend(std::iter::repeat_n(Some((s, r)), spec.txs_per_pair));
        }
    }
    schedule.extend(std::iter::repeat_n(None, spec.decoys));
    schedule.shuffle(&mut rng);

    let mut txs = Vec::with_capacity(schedule.len());
    let mut owners = Vec::with_capacity(schedule.len());
    for slot in schedule {
        let amount = rng.next_u64() % 1_000_000;
        let tx = match slot {
            Some((s, r)) => match spec.scheme {
                Scheme::Dksap => sender_build_payment(g, &mut rng, &publics[r], amount)?.to_tx(),
                Scheme::DksapIot => sender_tables[s].send(g, &mut rng, &peer_ids[r], &publics[r], amount)?,
            },
            None => {
                let k = g.random_scalar(&mut rng)?;
                StealthTx::regular(g.mul_base(&k)?, amount)?
            }
        };
        txs.push(tx);
        owners.push(slot);
    }

    let mut ledger = Ledger::new();
    let mut truth = Vec::new();
    let mut owners = owners.into_iter();
    let mut txs = txs.into_iter().peekable();
    while txs.peek().is_some() {
        let block: Vec<_> = txs.by_ref().take(spec.txs_per_block).collect();
        let height = ledger.len();
        for (index, owner) in owners.by_ref().take(block.len()).enumerate() {
            if let Some((sender, receiver)) = owner {
                truth.push(TruthEntry {
                    height,
                    index,
                    sender,
                    receiver,
                });
            }
        }
        ledger.append_txs(block);
    }
    Ok(Traffic {
        ledger,
        receivers,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(scheme: Scheme, n: u32) -> TrafficSpec {
        TrafficSpec {
            scheme,
            senders: 2,
            receivers: 3,
            txs_per_pair: 5,
            epoch: EpochConfig::new(n).unwrap(),
            decoys: 4,
            txs_per_block: 4,
            seed: 99,
        }
    }

    #[test]
    fn heights_and_atomic_append() {
        let g = Group::<Secp256k1>::new();
        let mut ledger = Ledger::<Secp256k1>::new();
        let tx = StealthTx::regular(g.generator(), 1).unwrap().to_bytes();
        assert_eq!(ledger.append_block(std::slice::from_ref(&tx)).unwrap(), 0);
        assert_eq!(ledger.append_block(&[tx.clone(), tx.clone()]).unwrap(), 1);
        let mut bad = tx.clone();
        bad[1] = 0x09;
        assert!(ledger.append_block(&[tx.clone(), bad]).is_err());
        assert_eq!(ledger.len(), 2);
        assert_eq!(ledger.tx_count(), 3);
        assert_eq!(ledger.block(1).unwrap().height(), 1);
    }

    #[test]
    fn file_round_trip() {
        let g = Group::<Secp256k1>::new();
        let t = traffic_generate(&g, &spec(Scheme::DksapIot, 3)).unwrap();
        let bytes = t.ledger.to_bytes();
        let back = Ledger::<Secp256k1>::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.tx_count(), 2 * 3 * 5 + 4);
        assert!(Ledger::<Secp256k1>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(matches!(
            Ledger::<crate::group::P256>::from_bytes(&bytes),
            Err(Error::BackendMismatch { .. })
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let g = Group::<Secp256k1>::new();
        let a = traffic_generate(&g, &spec(Scheme::DksapIot, 4)).unwrap();
        let b = traffic_generate(&g, &spec(Scheme::DksapIot, 4)).unwrap();
        assert_eq!(a.ledger.to_bytes(), b.ledger.to_bytes());
        let mut other = spec(Scheme::DksapIot, 4);
        other.seed = 100;
        assert_ne!(traffic_generate(&g, &other).unwrap().ledger.to_bytes(), a.ledger.to_bytes());
    }

    #[test]
    fn single_pair_ephemeral_counts() {
        let g = Group::<Secp256k1>::new();
        for (scheme, expected) in [(Scheme::DksapIot, 1), (Scheme::Dksap, 7)] {
            let s = TrafficSpec {
                scheme,
                senders: 1,
                receivers: 1,
                txs_per_pair: 7,
                epoch: EpochConfig::new(7).unwrap(),
                decoys: 0,
                txs_per_block: 3,
                seed: 1,
            };
            let t = traffic_generate(&g, &s).unwrap();
            let with_r = t.ledger.txs().filter(|(_, _, tx)| tx.has_ephemeral()).count();
            assert_eq!(with_r, expected, "{scheme:?}");
        }
    }

    #[test]
    fn foreign_ledger_costs() {
        let g = Group::<Secp256k1>::new();
        let t = traffic_generate(&g, &spec(Scheme::Dksap, 1)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let stranger = keygen(&g, &mut rng).unwrap();
        let m = (2 * 3 * 5) as u64;
        let report = scan_range(&g, &t.ledger, &mut DksapReceiver::new(&stranger), 0, t.ledger.len()).unwrap();
        assert!(report.matches.is_empty());
        assert_eq!(report.counters, OpCounters::new(m, m, m));
        assert_eq!(report.txs_scanned, m + 4);
    }

    #[test]
    fn warm_only_ledger_costs_nothing() {
        let g = Group::<Secp256k1>::new();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let other = keygen(&g, &mut rng).unwrap();
        let me = keygen(&g, &mut rng).unwrap();
        let config = EpochConfig::new(10).unwrap();
        let mut sender = SenderTable::new(config);
        let peer = PeerId::new("x").unwrap();
        let txs: Vec<_> = (0..10)
            .map(|_| sender.send(&g, &mut rng, &peer, &other.public(), 1).unwrap())
            .collect();
        let mut ledger = Ledger::new();
        ledger.append_txs(txs[1..].to_vec());
        let report = scan_range(&g, &ledger, &mut IotReceiver::new(&me, config), 0, 1).unwrap();
        assert!(report.matches.is_empty());
        assert_eq!(report.counters, OpCounters::ZERO);
        assert_eq!(report.txs_scanned, 9);
    }

    #[test]
    fn receivers_see_exactly_their_own() {
        let g = Group::<Secp256k1>::new();
        for scheme in [Scheme::Dksap, Scheme::DksapIot] {
            let s = spec(scheme, 3);
            let t = traffic_generate(&g, &s).unwrap();
            for (r, keys) in t.receivers.iter().enumerate() {
                let expect = t.positions_for(r);
                let got = match scheme {
                    Scheme::Dksap => {
                        let rep = scan_range(&g, &t.ledger, &mut DksapReceiver::new(keys), 0, t.ledger.len()).unwrap();
                        for m in &rep.matches {
                            let tx = &t.ledger.block(m.height).unwrap().txs()[m.index];
                            assert_eq!(g.mul_base(&m.found).unwrap(), *tx.destination());
                        }
                        rep.positions()
                    }
                    Scheme::DksapIot => {
                        let mut sc = IotReceiver::new(keys, s.epoch);
                        scan_range(&g, &t.ledger, &mut sc, 0, t.ledger.len()).unwrap().positions()
                    }
                };
                assert_eq!(got, expect, "{scheme:?} receiver {r}");
            }
        }
    }

    #[test]
    fn rescanning_does_not_rematch_warm_txs() {
        let g = Group::<Secp256k1>::new();
        let s = TrafficSpec {
            senders: 1,
            receivers: 1,
            txs_per_pair: 10,
            epoch: EpochConfig::new(10).unwrap(),
            decoys: 0,
            txs_per_block: 1,
            ..spec(Scheme::DksapIot, 10)
        };
        let t = traffic_generate(&g, &s).unwrap();
        let mut sc = IotReceiver::new(&t.receivers[0], s.epoch);
        let first = scan_range(&g, &t.ledger, &mut sc, 0, t.ledger.len()).unwrap();
        assert_eq!(first.matches.len(), 10);
        assert_eq!(sc.table().next_height(), t.ledger.len());
        let again = scan_range(&g, &t.ledger, &mut sc, 1, t.ledger.len()).unwrap();
        assert!(again.matches.is_empty());
        assert_eq!(again.counters, OpCounters::ZERO);
    }

    #[test]
    fn range_checks() {
        let g = Group::<Secp256k1>::new();
        let t = traffic_generate(&g, &spec(Scheme::Dksap, 1)).unwrap();
        let k = &t.receivers[0];
        let len = t.ledger.len();
        assert!(matches!(
            scan_range(&g, &t.ledger, &mut DksapReceiver::new(k), 0, len + 1),
            Err(Error::RangeOutOfBounds { .. })
        ));
        assert!(scan_range(&g, &t.ledger, &mut DksapReceiver::new(k), 3, 2).is_err());
        let empty = scan_range(&g, &t.ledger, &mut DksapReceiver::new(k), 2, 2).unwrap();
        assert_eq!(empty.txs_scanned, 0);
    }

    #[test]
    fn invalid_spec() {
        let g = Group::<Secp256k1>::new();
        let mut s = spec(Scheme::Dksap, 1);
        s.receivers = 0;
        assert!(matches!(traffic_generate(&g, &s), Err(Error::InvalidSpec(_))));
        let mut s = spec(Scheme::Dksap, 1);
        s.txs_per_block = 0;
        assert!(traffic_generate(&g, &s).is_err());
    }
}

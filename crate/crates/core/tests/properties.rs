use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use stealthkit::bench::{expected_counts, Scheme, Side};
use stealthkit::dksap::{
    derive_shared_secret_receiver, derive_shared_secret_sender, keygen, receiver_scan, sender_build_payment,
    StealthPayment,
};
use stealthkit::group::{Group, OpCounters, Point, Scalar, Secp256k1};
use stealthkit::iot::{epoch_chain, EpochConfig, IotReceiverTable, PeerId, SenderTable};
use stealthkit::ledger::Ledger;
use stealthkit::tx::StealthTx;

fn group() -> Group<Secp256k1> {
    Group::new()
}

fn scalar(seed: u64) -> Scalar {
    Scalar::random(&mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hash_is_deterministic_and_input_sensitive(data in proptest::collection::vec(any::<u8>(), 1..200), flip in any::<usize>()) {
        let g = group();
        let a = g.hash_to_scalar(&data).unwrap();
        prop_assert_eq!(a, g.hash_to_scalar(&data).unwrap());
        prop_assert!(!a.is_zero());
        let mut other = data.clone();
        let i = flip % other.len();
        other[i] ^= 1;
        prop_assert_ne!(a, g.hash_to_scalar(&other).unwrap());
    }

    #[test]
    fn encodings_round_trip(seed in any::<u64>()) {
        let g = group();
        let k = scalar(seed);
        prop_assert_eq!(Scalar::<Secp256k1>::from_bytes(&k.to_vec()).unwrap(), k);
        let p = g.mul_base(&k).unwrap();
        prop_assert_eq!(Point::<Secp256k1>::from_bytes(&p.to_vec()).unwrap(), p);
    }

    #[test]
    fn shared_secret_symmetry(seed in any::<u64>()) {
        let g = group();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bob = keygen(&g, &mut rng).unwrap();
        let r = g.random_scalar(&mut rng).unwrap();
        let big_r = g.mul_base(&r).unwrap();
        prop_assert_eq!(
            derive_shared_secret_sender(&g, &r, bob.scan_public()).unwrap(),
            derive_shared_secret_receiver(&g, bob.scan_private(), &big_r).unwrap()
        );
    }

    #[test]
    fn payments_are_spendable(seed in any::<u64>(), amount in any::<u64>()) {
        let g = group();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bob = keygen(&g, &mut rng).unwrap();
        let p = sender_build_payment(&g, &mut rng, &bob.public(), amount).unwrap();
        let back = StealthPayment::<Secp256k1>::from_bytes(&p.to_bytes()).unwrap();
        let t = *receiver_scan(&g, &bob, &back).unwrap().spend_key().unwrap();
        prop_assert_eq!(g.mul_base(&t).unwrap(), *p.destination());
        prop_assert_eq!(back.amount(), amount);
    }

    #[test]
    fn tx_round_trip(a in any::<u64>(), b in any::<u64>(), amount in any::<u64>(), with_r in any::<bool>()) {
        let g = group();
        let r = with_r.then(|| g.mul_base(&scalar(a)).unwrap());
        let tx = StealthTx::new(r, g.mul_base(&scalar(b)).unwrap(), amount).unwrap();
        let bytes = tx.to_bytes();
        prop_assert_eq!(bytes.len(), tx.encoded_len());
        prop_assert_eq!(StealthTx::<Secp256k1>::from_bytes(&bytes).unwrap(), tx);
    }

    #[test]
    fn decoding_garbage_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..120)) {
        let _ = StealthTx::<Secp256k1>::from_bytes(&bytes);
        let _ = StealthPayment::<Secp256k1>::from_bytes(&bytes);
        let _ = Ledger::<Secp256k1>::from_bytes(&bytes);
        let g = group();
        let _ = SenderTable::<Secp256k1>::import(&g, &bytes);
        let _ = IotReceiverTable::<Secp256k1>::import(&g, &bytes);
    }

    #[test]
    fn chain_agreement_and_spendability(seed in any::<u64>(), n in 1u32..=12, w in 1u32..=3, sends in 1usize..40) {
        let g = group();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bob = keygen(&g, &mut rng).unwrap();
        let config = EpochConfig::with_lookahead(n, w).unwrap();
        let mut sender = SenderTable::new(config);
        let mut receiver = IotReceiverTable::new(config);
        let peer = PeerId::new("p").unwrap();
        let mut h0 = None;
        for k in 0..sends {
            let tx = sender.send(&g, &mut rng, &peer, &bob.public(), 0).unwrap();
            prop_assert_eq!(tx.has_ephemeral(), k % n as usize == 0);
            if let Some(r) = tx.ephemeral() {
                h0 = Some(derive_shared_secret_receiver(&g, bob.scan_private(), r).unwrap());
            }
            let i = (k % n as usize) as u32;
            let hi = epoch_chain(&g, h0.as_ref().unwrap(), i).unwrap();
            prop_assert_eq!(*tx.destination(), g.mul_base(&hi).unwrap() + *bob.spend_public());
            let m = receiver.process(&g, &bob, &tx).unwrap().unwrap();
            prop_assert_eq!(m.index, i);
            prop_assert_eq!(g.mul_base(&m.spend).unwrap(), *tx.destination());
        }
    }

    #[test]
    fn state_survives_export_at_any_point(seed in any::<u64>(), n in 2u32..=10, cut in 0usize..20) {
        let g = group();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bob = keygen(&g, &mut rng).unwrap();
        let config = EpochConfig::new(n).unwrap();
        let mut sender = SenderTable::new(config);
        let mut receiver = IotReceiverTable::new(config);
        let peer = PeerId::new("p").unwrap();
        for _ in 0..cut {
            let tx = sender.send(&g, &mut rng, &peer, &bob.public(), 0).unwrap();
            receiver.process(&g, &bob, &tx).unwrap().unwrap();
        }
        let mut sender = SenderTable::<Secp256k1>::import(&g, &sender.export(&g)).unwrap();
        let mut receiver = IotReceiverTable::<Secp256k1>::import(&g, &receiver.export(&g)).unwrap();
        for _ in 0..n + 1 {
            let tx = sender.send(&g, &mut rng, &peer, &bob.public(), 0).unwrap();
            prop_assert!(receiver.process(&g, &bob, &tx).unwrap().is_some());
        }
    }
}

#[test]
fn counts_match_closed_form_for_n_up_to_64() {
    let g = group();
    let mut rng = ChaCha20Rng::seed_from_u64(64);
    let bob = keygen(&g, &mut rng).unwrap();
    for n in 1..=64u32 {
        let (ds, dr) = (g.session(), g.session());
        for _ in 0..n {
            let p = sender_build_payment(&ds, &mut rng, &bob.public(), 0).unwrap();
            receiver_scan(&dr, &bob, &p).unwrap();
        }
        assert_eq!(ds.counters(), expected_counts(Scheme::Dksap, Side::Sender, n).unwrap());
        assert_eq!(dr.counters(), expected_counts(Scheme::Dksap, Side::Receiver, n).unwrap());

        let (is, ir) = (g.session(), g.session());
        let config = EpochConfig::new(n).unwrap();
        let mut st = SenderTable::new(config);
        let mut rt = IotReceiverTable::new(config);
        let peer = PeerId::new("b").unwrap();
        for _ in 0..n {
            let tx = st.send(&is, &mut rng, &peer, &bob.public(), 0).unwrap();
            rt.process(&ir, &bob, &tx).unwrap().unwrap();
        }
        assert_eq!(is.counters(), expected_counts(Scheme::DksapIot, Side::Sender, n).unwrap());
        assert_eq!(ir.counters(), expected_counts(Scheme::DksapIot, Side::Receiver, n).unwrap());
    }
}

#[test]
fn cost_over_many_epochs() {
    let g = group();
    let mut rng = ChaCha20Rng::seed_from_u64(65);
    let bob = keygen(&g, &mut rng).unwrap();
    for (n, epochs) in [(1u32, 5u64), (3, 4), (7, 3)] {
        let config = EpochConfig::new(n).unwrap();
        let mut st = SenderTable::new(config);
        let mut rt = IotReceiverTable::new(config);
        let (s, r) = (g.session(), g.session());
        let peer = PeerId::new("b").unwrap();
        for _ in 0..epochs * n as u64 {
            let tx = st.send(&s, &mut rng, &peer, &bob.public(), 0).unwrap();
            rt.process(&r, &bob, &tx).unwrap().unwrap();
        }
        let n = n as u64;
        assert_eq!(s.counters(), OpCounters::new(epochs, epochs * (n + 1), epochs * n));
        assert_eq!(r.counters(), OpCounters::new(epochs, epochs * n, epochs * n));
    }
}

#[test]
fn warm_txs_look_like_regular_txs() {
    let g = group();
    let mut rng = ChaCha20Rng::seed_from_u64(66);
    let bob = keygen(&g, &mut rng).unwrap();
    let mut st = SenderTable::new(EpochConfig::new(5).unwrap());
    let peer = PeerId::new("b").unwrap();
    st.send(&g, &mut rng, &peer, &bob.public(), 9).unwrap();
    let warm = st.send(&g, &mut rng, &peer, &bob.public(), 9).unwrap().to_bytes();
    let regular = StealthTx::regular(g.mul_base(&scalar(1)).unwrap(), 9).unwrap().to_bytes();
    assert_eq!(warm.len(), regular.len());
    assert_eq!(warm[0], regular[0]);
    assert_eq!(warm[warm.len() - 8..], regular[regular.len() - 8..]);
}

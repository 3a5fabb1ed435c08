//! Closed-form operation counts, a host cost model and instrumented
//! comparison runs of both schemes.

use std::fmt;
use std::hint::black_box;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::dksap::{keygen, receiver_scan, sender_build_payment};
use crate::error::{Error, Result};
use crate::group::{Backend, Group, OpCounters, Point, Scalar};
use crate::iot::{EpochConfig, IotReceiverTable, PeerId, SenderTable};
use crate::tx::StealthTx;

/// Default iteration count for [`measure_cost_model`].
pub const DEFAULT_ITERATIONS: usize = 1000;
/// Runs the iterations are split into; the per-op time is their median.
pub const TIMING_RUNS: usize = 10;
/// Shortest run accepted as a measurement.
pub const MIN_RUN: Duration = Duration::from_micros(50);
/// The half-cost comparison needs `t_h <= H_PREMISE_RATIO * min(t_rp, t_fp)`.
pub const H_PREMISE_RATIO: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    #[serde(rename = "dksap")]
    Dksap,
    #[serde(rename = "dksap-iot")]
    DksapIot,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Dksap, Scheme::DksapIot];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Dksap => "dksap",
            Scheme::DksapIot => "dksap-iot",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dksap" => Ok(Scheme::Dksap),
            "dksap-iot" | "iot" => Ok(Scheme::DksapIot),
            _ => Err(Error::InvalidSpec("scheme must be dksap or dksap-iot")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    #[serde(rename = "sender")]
    Sender,
    #[serde(rename = "receiver")]
    Receiver,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Sender, Side::Receiver];

    pub fn name(self) -> &'static str {
        match self {
            Side::Sender => "sender",
            Side::Receiver => "receiver",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(rp, fp, h)` for `n` transactions to one receiver.
pub fn expected_counts(scheme: Scheme, side: Side, n: u32) -> Result<OpCounters> {
    if n == 0 {
        return Err(Error::InvalidEpoch);
    }
    let n = n as u64;
    Ok(match (scheme, side) {
        (Scheme::Dksap, Side::Sender) => OpCounters::new(n, 2 * n, n),
        (Scheme::Dksap, Side::Receiver) => OpCounters::new(n, n, n),
        (Scheme::DksapIot, Side::Sender) => OpCounters::new(1, n + 1, n),
        (Scheme::DksapIot, Side::Receiver) => OpCounters::new(1, n, n),
    })
}

/// Bytes saved by one `n`-tx epoch: every tx after the first omits `R`.
pub fn wire_savings(point_len: usize, n: u32) -> usize {
    point_len * (n as usize).saturating_sub(1)
}

/// Seconds per operation on this host.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostModel {
    pub t_rp: f64,
    pub t_fp: f64,
    pub t_h: f64,
}

impl CostModel {
    pub fn new(t_rp: f64, t_fp: f64, t_h: f64) -> Result<Self> {
        if !(t_rp > 0.0 && t_fp > 0.0 && t_h > 0.0) || !(t_rp.is_finite() && t_fp.is_finite() && t_h.is_finite()) {
            return Err(Error::InvalidSpec("cost model timings must be positive"));
        }
        Ok(CostModel { t_rp, t_fp, t_h })
    }

    /// Seconds for the given operation counts.
    pub fn cost(&self, c: &OpCounters) -> f64 {
        c.rp as f64 * self.t_rp + c.fp as f64 * self.t_fp + c.h as f64 * self.t_h
    }

    /// Whether hashing is cheap enough for the half-cost comparison.
    pub fn h_premise_holds(&self) -> bool {
        self.t_h <= H_PREMISE_RATIO * self.t_rp.min(self.t_fp)
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RP {:.3} us, FP {:.3} us, H {:.3} us",
            self.t_rp * 1e6,
            self.t_fp * 1e6,
            self.t_h * 1e6
        )
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        (xs[m - 1] + xs[m]) / 2.0
    } else {
        xs[m]
    }
}

/// One timed operation: calls per run and the call itself.
struct Timed<'a> {
    per_run: usize,
    op: Box<dyn FnMut(usize) + 'a>,
}

/// Median per-call time of each op over [`TIMING_RUNS`] runs, after one
/// untimed warmup run. Runs of different ops are interleaved so a burst of
/// host load lands on few runs of each op.
fn time_ops(ops: &mut [Timed<'_>]) -> Result<Vec<f64>> {
    for t in ops.iter_mut() {
        for i in 0..t.per_run {
            (t.op)(i);
        }
    }
    let mut samples = vec![Vec::with_capacity(TIMING_RUNS); ops.len()];
    for run in 0..TIMING_RUNS {
        for (t, out) in ops.iter_mut().zip(samples.iter_mut()) {
            let start = Instant::now();
            for i in 0..t.per_run {
                (t.op)(run * t.per_run + i);
            }
            let elapsed = start.elapsed();
            if elapsed < MIN_RUN {
                return Err(Error::TimerResolution("a timing run finished faster than the minimum run length"));
            }
            out.push(elapsed.as_secs_f64() / t.per_run as f64);
        }
    }
    Ok(samples.into_iter().map(median).collect())
}

/// Times RP, FP and H with deterministic inputs. The hash is timed on a
/// point encoding, the input it gets in both protocols.
pub fn measure_cost_model<B: Backend>(g: &Group<B>, iterations: usize) -> Result<CostModel> {
    if iterations < 100 {
        return Err(Error::TooFewIterations(iterations));
    }
    let s = g.session();
    let per_run = iterations.div_ceil(TIMING_RUNS);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let scalars = (0..64).map(|_| s.random_scalar(&mut rng)).collect::<Result<Vec<Scalar<B>>>>()?;
    let points = scalars
        .iter()
        .map(|k| s.mul_base(k))
        .collect::<Result<Vec<Point<B>>>>()?;
    let encodings: Vec<Vec<u8>> = points.iter().map(Point::to_vec).collect();
    let at = |i: usize| i % scalars.len();

    let mut ops = [
        Timed {
            per_run,
            op: Box::new(|i| {
                black_box(s.mul_random(&scalars[at(i)], &points[at(i + 1)]).expect("valid inputs"));
            }),
        },
        Timed {
            per_run,
            op: Box::new(|i| {
                black_box(s.mul_base(&scalars[at(i)]).expect("non-zero scalar"));
            }),
        },
        // H is two orders of magnitude cheaper; give it more calls per run so
        // a run stays well above timer resolution.
        Timed {
            per_run: per_run * 50,
            op: Box::new(|i| {
                black_box(s.hash_to_scalar(&encodings[at(i)]).expect("non-empty input"));
            }),
        },
    ];
    let t = time_ops(&mut ops)?;
    CostModel::new(t[0], t[1], t[2])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scheme: Scheme,
    pub side: Side,
    pub n: u32,
    pub counts: OpCounters,
    /// Seconds, from `counts` and the cost model.
    pub modeled: f64,
    /// Seconds of wall-clock time for the instrumented run.
    pub measured: f64,
    /// Encoded size of the epoch's transactions.
    pub wire_bytes: usize,
}

#[derive(Serialize)]
struct CsvRow {
    scheme: Scheme,
    side: Side,
    #[serde(rename = "N")]
    n: u32,
    rp: u64,
    fp: u64,
    h: u64,
    modeled_ms: f64,
    measured_ms: f64,
    wire_bytes: usize,
}

/// Runs one `n`-tx epoch of `scheme` and checks its counts against
/// [`expected_counts`]. Returns the sender and receiver rows.
pub fn run_epoch<B: Backend>(
    g: &Group<B>,
    scheme: Scheme,
    n: u32,
    cost: &CostModel,
    seed: u64,
) -> Result<[ComparisonRow; 2]> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys = keygen(g, &mut rng)?;
    let public = keys.public();
    let sender = g.session();
    let receiver = g.session();

    let (txs, send_time, recv_time) = match scheme {
        Scheme::Dksap => {
            let start = Instant::now();
            let payments = (0..n)
                .map(|i| sender_build_payment(&sender, &mut rng, &public, i as u64))
                .collect::<Result<Vec<_>>>()?;
            let send_time = start.elapsed();
            let start = Instant::now();
            for p in &payments {
                if !receiver_scan(&receiver, &keys, p)?.is_match() {
                    return Err(Error::ProtocolRun(format!("dksap payment not recognised (N={n})")));
                }
            }
            let recv_time = start.elapsed();
            let txs: Vec<StealthTx<B>> = payments.into_iter().map(StealthTx::from).collect();
            (txs, send_time, recv_time)
        }
        Scheme::DksapIot => {
            let config = EpochConfig::new(n)?;
            let mut table = SenderTable::new(config);
            let peer = PeerId::new("receiver")?;
            let start = Instant::now();
            let txs = (0..n)
                .map(|i| table.send(&sender, &mut rng, &peer, &public, i as u64))
                .collect::<Result<Vec<_>>>()?;
            let send_time = start.elapsed();
            let mut rtable = IotReceiverTable::new(config);
            let start = Instant::now();
            for tx in &txs {
                if rtable.process(&receiver, &keys, tx)?.is_none() {
                    return Err(Error::ProtocolRun(format!("dksap-iot tx not recognised (N={n})")));
                }
            }
            let recv_time = start.elapsed();
            (txs, send_time, recv_time)
        }
    };
    let wire_bytes = txs.iter().map(StealthTx::encoded_len).sum();

    let row = |side: Side, counted: OpCounters, time: Duration| -> Result<ComparisonRow> {
        let expected = expected_counts(scheme, side, n)?;
        if counted != expected {
            return Err(Error::CountMismatch {
                scheme: scheme.name(),
                side: side.name(),
                n,
                expected,
                counted,
            });
        }
        Ok(ComparisonRow {
            scheme,
            side,
            n,
            counts: counted,
            modeled: cost.cost(&counted),
            measured: time.as_secs_f64(),
            wire_bytes,
        })
    };
    Ok([
        row(Side::Sender, sender.counters(), send_time)?,
        row(Side::Receiver, receiver.counters(), recv_time)?,
    ])
}

/// Four rows per `n`: both schemes, both sides. Any count that differs from
/// the closed form is an error.
pub fn run_comparison<B: Backend>(g: &Group<B>, ns: &[u32], cost: &CostModel, seed: u64) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::with_capacity(ns.len() * 4);
    for &n in ns {
        for scheme in Scheme::ALL {
            rows.extend(run_epoch(g, scheme, n, cost, seed ^ n as u64)?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            scheme: r.scheme,
            side: r.side,
            n: r.n,
            rp: r.counts.rp,
            fp: r.counts.fp,
            h: r.counts.h,
            modeled_ms: r.modeled * 1e3,
            measured_ms: r.measured * 1e3,
            wire_bytes: r.wire_bytes,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Modeled sender-plus-receiver ratio of the hash-chain scheme to the
/// baseline for one `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostRatio {
    pub n: u32,
    pub iot: f64,
    pub dksap: f64,
}

impl CostRatio {
    pub fn ratio(&self) -> f64 {
        self.iot / self.dksap
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClaimOutcome {
    Holds(Vec<CostRatio>),
    Fails(Vec<CostRatio>),
    Skipped(String),
}

/// Checks that the hash-chain scheme costs at most half the baseline for
/// each `n`, provided hashing is cheap on this host.
pub fn check_half_cost(cost: &CostModel, ns: &[u32]) -> Result<ClaimOutcome> {
    if !cost.h_premise_holds() {
        return Ok(ClaimOutcome::Skipped(format!(
            "t_h = {:.3e} s exceeds {H_PREMISE_RATIO} x min(t_rp, t_fp) = {:.3e} s",
            cost.t_h,
            H_PREMISE_RATIO * cost.t_rp.min(cost.t_fp)
        )));
    }
    let mut ratios = Vec::with_capacity(ns.len());
    for &n in ns {
        let total = |scheme| -> Result<f64> {
            Ok(cost.cost(&expected_counts(scheme, Side::Sender, n)?) + cost.cost(&expected_counts(scheme, Side::Receiver, n)?))
        };
        ratios.push(CostRatio {
            n,
            iot: total(Scheme::DksapIot)?,
            dksap: total(Scheme::Dksap)?,
        });
    }
    Ok(if ratios.iter().all(|r| r.ratio() <= 0.5) {
        ClaimOutcome::Holds(ratios)
    } else {
        ClaimOutcome::Fails(ratios)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Secp256k1;

    fn unit_cost() -> CostModel {
        CostModel::new(1.0, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(expected_counts(Scheme::Dksap, Side::Sender, 10).unwrap(), OpCounters::new(10, 20, 10));
        assert_eq!(
            expected_counts(Scheme::DksapIot, Side::Sender, 1).unwrap(),
            expected_counts(Scheme::Dksap, Side::Sender, 1).unwrap()
        );
        assert_eq!(expected_counts(Scheme::DksapIot, Side::Receiver, 30).unwrap(), OpCounters::new(1, 30, 30));
        assert!(matches!(expected_counts(Scheme::Dksap, Side::Sender, 0), Err(Error::InvalidEpoch)));
    }

    #[test]
    fn savings() {
        assert_eq!(wire_savings(33, 1), 0);
        assert_eq!(wire_savings(33, 10), 297);
        assert_eq!(wire_savings(72, 30), 72 * 29);
    }

    #[test]
    fn comparison_matches_formulas_and_sizes() {
        let g = Group::<Secp256k1>::new();
        let rows = run_comparison(&g, &[1, 4, 10], &unit_cost(), 7).unwrap();
        assert_eq!(rows.len(), 12);
        for n in [1u32, 4, 10] {
            let bytes = |s| rows.iter().find(|r| r.n == n && r.scheme == s).unwrap().wire_bytes;
            assert_eq!(bytes(Scheme::Dksap) - bytes(Scheme::DksapIot), wire_savings(33, n));
        }
        for r in &rows {
            assert_eq!(r.modeled, unit_cost().cost(&r.counts));
        }
    }

    #[test]
    fn csv_is_deterministic_apart_from_timings() {
        let g = Group::<Secp256k1>::new();
        let strip = |rows: &[ComparisonRow]| {
            let mut buf = Vec::new();
            let cleaned: Vec<_> = rows.iter().map(|r| ComparisonRow { measured: 0.0, ..r.clone() }).collect();
            write_csv(&cleaned, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = strip(&run_comparison(&g, &[3], &unit_cost(), 1).unwrap());
        let b = strip(&run_comparison(&g, &[3], &unit_cost(), 1).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("scheme,side,N,rp,fp,h,modeled_ms,measured_ms,wire_bytes\n"));
        assert!(a.contains("dksap-iot,sender,3,1,4,3,"));
    }

    #[test]
    fn claim_check() {
        match check_half_cost(&unit_cost(), &[10, 20, 30]).unwrap() {
            ClaimOutcome::Holds(r) => assert!(r.iter().all(|x| x.ratio() <= 0.5)),
            other => panic!("{other:?}"),
        }
        let slow_hash = CostModel::new(1.0, 1.0, 0.5).unwrap();
        assert!(matches!(check_half_cost(&slow_hash, &[10]).unwrap(), ClaimOutcome::Skipped(_)));
        // FP far dearer than RP: the saving on RP no longer halves the total.
        let pricey_fp = CostModel::new(1.0, 100.0, 1e-3).unwrap();
        assert!(matches!(check_half_cost(&pricey_fp, &[10]).unwrap(), ClaimOutcome::Fails(_)));
    }

    #[test]
    fn cost_model_validation() {
        assert!(CostModel::new(0.0, 1.0, 1.0).is_err());
        assert!(CostModel::new(1.0, f64::NAN, 1.0).is_err());
        let g = Group::<Secp256k1>::new();
        assert!(matches!(measure_cost_model(&g, 99), Err(Error::TooFewIterations(99))));
    }

    #[test]
    fn parsing() {
        assert_eq!("dksap-iot".parse::<Scheme>().unwrap(), Scheme::DksapIot);
        assert!("x".parse::<Scheme>().is_err());
        assert_eq!(median(vec![3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}

//! Benchmark harness: graph and update-stream file formats, staged stream
//! generation, per-algorithm runners with timing and allocation accounting,
//! and CSV reporting.
//!
//! A stream applies all edges as insertions split into stages, then all
//! edges as deletions split into stages, with a block of connectivity
//! queries after every stage (half random pairs, half endpoints of live
//! edges). Runners time only op application, read peak space from the
//! forests' tracked byte counters, and can verify every query against the
//! oracle in lockstep.

use crate::blocked::BlockedForest;
use crate::connectivity::{CfForest, InsertMode};
use crate::hdt::HdtConnectivity;
use crate::ids::{EdgeKey, VertexId};
use crate::oracle::{audit_blocked, audit_cf, audit_hdt, EdgeSetOracle};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

// ----- errors -----

#[derive(Debug)]
pub enum BenchError {
    Io(std::io::Error),
    Parse { line: usize, msg: String },
    InvalidStream { line: usize, msg: String },
    Divergence { algo: String, op_index: usize },
    AuditViolation { algo: String, stage: u32, summary: String },
    BudgetExceeded { algo: String, pushdowns: u64, budget: u64 },
    HashMismatch { first: String, second: String },
    Usage(String),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Io(e) => write!(f, "i/o error: {e}"),
            BenchError::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            BenchError::InvalidStream { line, msg } => {
                write!(f, "invalid stream at line {line}: {msg}")
            }
            BenchError::Divergence { algo, op_index } => {
                write!(f, "{algo} diverged from the oracle at op index {op_index}")
            }
            BenchError::AuditViolation { algo, stage, summary } => {
                write!(f, "{algo} failed the audit after stage {stage}: {summary}")
            }
            BenchError::BudgetExceeded { algo, pushdowns, budget } => {
                write!(f, "{algo} exceeded the push-down budget: {pushdowns} > {budget}")
            }
            BenchError::HashMismatch { first, second } => {
                write!(f, "query outcomes differ between {first} and {second}")
            }
            BenchError::Usage(msg) => write!(f, "usage error: {msg}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e)
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;

// ----- graph files -----

/// Parses "n m" then m lines "u v" (0-based); '#' lines are comments.
pub fn load_graph(path: &Path) -> BenchResult<(u32, Vec<(VertexId, VertexId)>)> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn parse_graph(text: &str) -> BenchResult<(u32, Vec<(VertexId, VertexId)>)> {
    let mut header: Option<(u32, usize)> = None;
    let mut edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<u32>().map_err(|_| BenchError::Parse {
                line: line_no,
                msg: format!("expected an integer, got {s:?}"),
            })
        };
        match header {
            None => {
                if fields.len() != 2 {
                    return Err(BenchError::Parse {
                        line: line_no,
                        msg: "expected header \"n m\"".into(),
                    });
                }
                let n = parse(fields[0])?;
                let m = parse(fields[1])? as usize;
                if n < 2 {
                    return Err(BenchError::Parse { line: line_no, msg: "n must be >= 2".into() });
                }
                header = Some((n, m));
            }
            Some((n, _)) => {
                if fields.len() != 2 {
                    return Err(BenchError::Parse {
                        line: line_no,
                        msg: "expected an edge \"u v\"".into(),
                    });
                }
                let u = parse(fields[0])?;
                let v = parse(fields[1])?;
                if u >= n || v >= n {
                    return Err(BenchError::Parse {
                        line: line_no,
                        msg: format!("vertex id out of range (n = {n})"),
                    });
                }
                if u == v {
                    return Err(BenchError::Parse { line: line_no, msg: "self-loop edge".into() });
                }
                let key = EdgeKey::new(VertexId(u), VertexId(v));
                if !seen.insert(key) {
                    return Err(BenchError::Parse {
                        line: line_no,
                        msg: format!("duplicate edge {key:?}"),
                    });
                }
                edges.push((VertexId(u), VertexId(v)));
            }
        }
    }
    let Some((n, m)) = header else {
        return Err(BenchError::Parse { line: 0, msg: "missing header".into() });
    };
    if edges.len() != m {
        return Err(BenchError::Parse {
            line: 0,
            msg: format!("header says {m} edges, found {}", edges.len()),
        });
    }
    Ok((n, edges))
}

pub fn write_graph(path: &Path, n: u32, edges: &[(VertexId, VertexId)]) -> BenchResult<()> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", n, edges.len()));
    for (u, v) in edges {
        out.push_str(&format!("{u} {v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

// ----- streams -----

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamOp {
    Stage(u32),
    Insert(VertexId, VertexId),
    Delete(VertexId, VertexId),
    Query(VertexId, VertexId),
}

#[derive(Clone, Debug)]
pub struct UpdateStream {
    pub n: u32,
    pub seed: u64,
    pub ops: Vec<StreamOp>,
}

impl UpdateStream {
    pub fn op_count(&self) -> usize {
        self.ops.iter().filter(|o| !matches!(o, StreamOp::Stage(_))).count()
    }

    /// Every deletion must target a live edge and every insertion a dead one.
    pub fn validate(&self) -> BenchResult<()> {
        let mut live = std::collections::BTreeSet::new();
        for (i, op) in self.ops.iter().enumerate() {
            match *op {
                StreamOp::Stage(_) => {}
                StreamOp::Insert(u, v) => {
                    if u == v || u.0 >= self.n || v.0 >= self.n {
                        return Err(BenchError::InvalidStream {
                            line: i,
                            msg: format!("bad insert {u} {v}"),
                        });
                    }
                    if !live.insert(EdgeKey::new(u, v)) {
                        return Err(BenchError::InvalidStream {
                            line: i,
                            msg: format!("insert of live edge {u}-{v}"),
                        });
                    }
                }
                StreamOp::Delete(u, v) => {
                    if u == v || u.0 >= self.n || v.0 >= self.n {
                        return Err(BenchError::InvalidStream {
                            line: i,
                            msg: format!("bad delete {u} {v}"),
                        });
                    }
                    if !live.remove(&EdgeKey::new(u, v)) {
                        return Err(BenchError::InvalidStream {
                            line: i,
                            msg: format!("delete of dead edge {u}-{v}"),
                        });
                    }
                }
                StreamOp::Query(u, v) => {
                    if u.0 >= self.n || v.0 >= self.n {
                        return Err(BenchError::InvalidStream {
                            line: i,
                            msg: format!("bad query {u} {v}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds the staged stream: a random permutation of the edges split into
/// `stages` insert stages, then a fresh permutation split into delete stages,
/// with `max(1000, m/10)` queries (half random, half live endpoints) after
/// every stage.
pub fn gen_stream(
    edges: &[(VertexId, VertexId)],
    n: u32,
    stages: u32,
    seed: u64,
) -> UpdateStream {
    assert!(stages >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = edges.len();
    let queries_per_stage = (m / 10).max(1000);
    let mut ops = Vec::new();
    let mut live: Vec<EdgeKey> = Vec::new();
    let mut live_pos: HashMap<EdgeKey, usize> = HashMap::new();

    let push_queries = |ops: &mut Vec<StreamOp>,
                            rng: &mut ChaCha8Rng,
                            live: &Vec<EdgeKey>| {
        for q in 0..queries_per_stage {
            if q % 2 == 0 || live.is_empty() {
                let u = rng.gen_range(0..n);
                let mut v = rng.gen_range(0..n);
                while v == u {
                    v = rng.gen_range(0..n);
                }
                ops.push(StreamOp::Query(VertexId(u), VertexId(v)));
            } else {
                let e = live[rng.gen_range(0..live.len())];
                ops.push(StreamOp::Query(e.a, e.b));
            }
        }
    };

    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let mut stage_no = 0u32;
    for chunk in chunks_for_stages(&perm, stages) {
        stage_no += 1;
        ops.push(StreamOp::Stage(stage_no));
        for &i in chunk {
            let (u, v) = edges[i];
            let key = EdgeKey::new(u, v);
            live_pos.insert(key, live.len());
            live.push(key);
            ops.push(StreamOp::Insert(u, v));
        }
        push_queries(&mut ops, &mut rng, &live);
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    for chunk in chunks_for_stages(&perm, stages) {
        stage_no += 1;
        ops.push(StreamOp::Stage(stage_no));
        for &i in chunk {
            let (u, v) = edges[i];
            let key = EdgeKey::new(u, v);
            let pos = live_pos.remove(&key).expect("edge is live");
            let last = *live.last().expect("non-empty");
            live.swap_remove(pos);
            if pos < live.len() {
                live_pos.insert(last, pos);
            }
            ops.push(StreamOp::Delete(u, v));
        }
        push_queries(&mut ops, &mut rng, &live);
    }
    let stream = UpdateStream { n, seed, ops };
    debug_assert!(stream.validate().is_ok());
    stream
}

fn chunks_for_stages<'a>(perm: &'a [usize], stages: u32) -> Vec<&'a [usize]> {
    let m = perm.len();
    let stages = stages as usize;
    let base = m / stages;
    let extra = m % stages;
    let mut out = Vec::with_capacity(stages);
    let mut at = 0;
    for s in 0..stages {
        let len = base + usize::from(s < extra);
        out.push(&perm[at..at + len]);
        at += len;
    }
    out
}

pub fn write_stream(path: &Path, stream: &UpdateStream) -> BenchResult<()> {
    let mut out = String::new();
    out.push_str(&format!("{} {} {}\n", stream.n, stream.op_count(), stream.seed));
    for op in &stream.ops {
        match *op {
            StreamOp::Stage(k) => out.push_str(&format!("# stage {k}\n")),
            StreamOp::Insert(u, v) => out.push_str(&format!("I {u} {v}\n")),
            StreamOp::Delete(u, v) => out.push_str(&format!("D {u} {v}\n")),
            StreamOp::Query(u, v) => out.push_str(&format!("Q {u} {v}\n")),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_stream(path: &Path) -> BenchResult<UpdateStream> {
    let stream = parse_stream(&fs::read_to_string(path)?)?;
    stream.validate()?;
    Ok(stream)
}

pub fn parse_stream(text: &str) -> BenchResult<UpdateStream> {
    let mut header: Option<(u32, usize, u64)> = None;
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() == 2 && fields[0] == "stage" {
                let k = fields[1].parse::<u32>().map_err(|_| BenchError::Parse {
                    line: line_no,
                    msg: "bad stage number".into(),
                })?;
                ops.push(StreamOp::Stage(k));
            }
            continue;
        }
        if header.is_none() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(BenchError::Parse {
                    line: line_no,
                    msg: "expected header \"n ops seed\"".into(),
                });
            }
            let n = fields[0].parse::<u32>().map_err(|_| BenchError::Parse {
                line: line_no,
                msg: "bad n".into(),
            })?;
            let count = fields[1].parse::<usize>().map_err(|_| BenchError::Parse {
                line: line_no,
                msg: "bad op count".into(),
            })?;
            let seed = fields[2].parse::<u64>().map_err(|_| BenchError::Parse {
                line: line_no,
                msg: "bad seed".into(),
            })?;
            header = Some((n, count, seed));
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(BenchError::Parse {
                line: line_no,
                msg: "expected \"I|D|Q u v\"".into(),
            });
        }
        let u = fields[1].parse::<u32>().map_err(|_| BenchError::Parse {
            line: line_no,
            msg: "bad vertex".into(),
        })?;
        let v = fields[2].parse::<u32>().map_err(|_| BenchError::Parse {
            line: line_no,
            msg: "bad vertex".into(),
        })?;
        let op = match fields[0] {
            "I" => StreamOp::Insert(VertexId(u), VertexId(v)),
            "D" => StreamOp::Delete(VertexId(u), VertexId(v)),
            "Q" => StreamOp::Query(VertexId(u), VertexId(v)),
            other => {
                return Err(BenchError::Parse {
                    line: line_no,
                    msg: format!("unknown op {other:?}"),
                })
            }
        };
        ops.push(op);
    }
    let Some((n, count, seed)) = header else {
        return Err(BenchError::Parse { line: 0, msg: "missing header".into() });
    };
    let stream = UpdateStream { n, seed, ops };
    if stream.op_count() != count {
        return Err(BenchError::Parse {
            line: 0,
            msg: format!("header says {count} ops, found {}", stream.op_count()),
        });
    }
    Ok(stream)
}

// ----- runners -----

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    CfRoot,
    CfLca,
    CfBlocked,
    CfBlockedBatch,
    Hdt,
    Oracle,
}

impl Algo {
    pub const ALL: [Algo; 6] =
        [Algo::CfRoot, Algo::CfLca, Algo::CfBlocked, Algo::CfBlockedBatch, Algo::Hdt, Algo::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Algo::CfRoot => "cf-root",
            Algo::CfLca => "cf-lca",
            Algo::CfBlocked => "cf-blocked",
            Algo::CfBlockedBatch => "cf-blocked-batch",
            Algo::Hdt => "hdt",
            Algo::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cf-root" => Ok(Algo::CfRoot),
            "cf-lca" => Ok(Algo::CfLca),
            "cf-blocked" => Ok(Algo::CfBlocked),
            "cf-blocked-batch" => Ok(Algo::CfBlockedBatch),
            "hdt" => Ok(Algo::Hdt),
            "oracle" => Ok(Algo::Oracle),
            other => Err(format!(
                "unknown algo {other:?} (expected cf-root, cf-lca, cf-blocked, cf-blocked-batch, hdt or oracle)"
            )),
        }
    }
}

enum Engine {
    Cf(CfForest),
    Blocked(BlockedForest),
    Hdt(HdtConnectivity),
    Oracle(EdgeSetOracle),
}

impl Engine {
    fn new(algo: Algo, n: u32) -> Engine {
        match algo {
            Algo::CfRoot => Engine::Cf(CfForest::new(n, InsertMode::Root)),
            Algo::CfLca => Engine::Cf(CfForest::new(n, InsertMode::Lca)),
            Algo::CfBlocked | Algo::CfBlockedBatch => Engine::Blocked(BlockedForest::new(n)),
            Algo::Hdt => Engine::Hdt(HdtConnectivity::new(n)),
            Algo::Oracle => Engine::Oracle(EdgeSetOracle::new(n)),
        }
    }

    fn insert(&mut self, u: VertexId, v: VertexId) {
        let r = match self {
            Engine::Cf(f) => f.insert(u, v),
            Engine::Blocked(f) => f.insert(u, v),
            Engine::Hdt(f) => f.insert(u, v),
            Engine::Oracle(f) => f.insert(u, v),
        };
        r.expect("validated stream insert");
    }

    fn delete(&mut self, u: VertexId, v: VertexId) {
        let r = match self {
            Engine::Cf(f) => f.delete(u, v),
            Engine::Blocked(f) => f.delete(u, v),
            Engine::Hdt(f) => f.delete(u, v),
            Engine::Oracle(f) => f.delete(u, v),
        };
        r.expect("validated stream delete");
    }

    fn batch_insert(&mut self, batch: &[(VertexId, VertexId)]) {
        match self {
            Engine::Blocked(f) => f.batch_insert(batch).expect("validated stream batch"),
            _ => {
                for &(u, v) in batch {
                    self.insert(u, v);
                }
            }
        }
    }

    fn batch_delete(&mut self, batch: &[(VertexId, VertexId)]) {
        match self {
            Engine::Blocked(f) => f.batch_delete(batch).expect("validated stream batch"),
            _ => {
                for &(u, v) in batch {
                    self.delete(u, v);
                }
            }
        }
    }

    fn connected(&mut self, u: VertexId, v: VertexId) -> bool {
        match self {
            Engine::Cf(f) => f.connected(u, v),
            Engine::Blocked(f) => f.connected(u, v),
            Engine::Hdt(f) => f.connected(u, v),
            Engine::Oracle(f) => f.connected(u, v),
        }
    }

    fn counters(&self) -> (u64, u64, f64) {
        match self {
            Engine::Cf(f) => {
                let c = f.counters();
                (c.fetches, c.pushdowns, c.nontree_fraction())
            }
            Engine::Blocked(f) => {
                let c = f.counters();
                (c.fetches, c.pushdowns, c.nontree_fraction())
            }
            Engine::Hdt(f) => {
                let c = f.counters();
                (c.fetches, c.pushdowns, c.nontree_fraction())
            }
            Engine::Oracle(_) => (0, 0, 0.0),
        }
    }

    fn peak_bytes(&self) -> u64 {
        match self {
            Engine::Cf(f) => f.peak_bytes(),
            Engine::Blocked(f) => f.peak_bytes(),
            Engine::Hdt(f) => f.peak_bytes(),
            Engine::Oracle(_) => 0,
        }
    }

    fn audit_summary(&self) -> Option<String> {
        let report = match self {
            Engine::Cf(f) => audit_cf(f),
            Engine::Blocked(f) => audit_blocked(f),
            Engine::Hdt(f) => audit_hdt(f),
            Engine::Oracle(_) => return None,
        };
        if report.is_clean() {
            None
        } else {
            Some(report.to_string())
        }
    }
}

pub fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    if hash == 0 {
        hash = 0xcbf29ce484222325;
    }
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub algo: String,
    pub stage: u32,
    pub phase: String,
    pub ops: u64,
    pub seconds: f64,
    pub peak_bytes: u64,
    pub fetches: u64,
    pub pushdowns: u64,
    pub nontree_fraction: f64,
    pub query_hash: u64,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub algo: String,
    pub rows: Vec<ReportRow>,
    pub query_hash: u64,
    pub insert_count: u64,
    pub delete_count: u64,
}

impl RunReport {
    /// Cumulative fetch counter at the end of the run.
    pub fn final_fetches(&self) -> u64 {
        self.rows.last().map(|r| r.fetches).unwrap_or(0)
    }

    pub fn final_pushdowns(&self) -> u64 {
        self.rows.last().map(|r| r.pushdowns).unwrap_or(0)
    }

    pub fn final_peak_bytes(&self) -> u64 {
        self.rows.last().map(|r| r.peak_bytes).unwrap_or(0)
    }

    pub fn final_nontree_fraction(&self) -> f64 {
        self.rows.last().map(|r| r.nontree_fraction).unwrap_or(0.0)
    }

    /// Cumulative fetches at the end of the insert phase (the last row whose
    /// phase is "insert" or its queries).
    pub fn fetches_before_deletions(&self) -> u64 {
        self.rows
            .iter()
            .filter(|r| r.phase == "insert")
            .map(|r| r.fetches)
            .last()
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub audit: bool,
    pub verify: bool,
}

/// Applies a validated stream to one algorithm, producing per-stage rows.
/// The batch algorithm applies each stage's updates as one batch. With
/// `verify`, every query is checked against the oracle in lockstep; with
/// `audit`, the structural auditor runs after every stage.
pub fn run_stream(algo: Algo, stream: &UpdateStream, opts: RunOptions) -> BenchResult<RunReport> {
    let mut engine = Engine::new(algo, stream.n);
    let mut oracle = if opts.verify { Some(EdgeSetOracle::new(stream.n)) } else { None };
    let batching = algo == Algo::CfBlockedBatch;
    let mut report = RunReport { algo: algo.name().to_string(), ..RunReport::default() };
    let mut hash = 0u64;

    let mut stage = 0u32;
    let mut phase = "insert";
    let mut update_ops = 0u64;
    let mut update_secs = 0.0f64;
    let mut query_ops = 0u64;
    let mut query_secs = 0.0f64;
    let mut pending: Vec<(bool, VertexId, VertexId)> = Vec::new();

    macro_rules! flush_pending {
        () => {
            if !pending.is_empty() {
                let inserts: Vec<(VertexId, VertexId)> = pending
                    .iter()
                    .filter(|(ins, _, _)| *ins)
                    .map(|&(_, u, v)| (u, v))
                    .collect();
                let deletes: Vec<(VertexId, VertexId)> = pending
                    .iter()
                    .filter(|(ins, _, _)| !*ins)
                    .map(|&(_, u, v)| (u, v))
                    .collect();
                let t = Instant::now();
                if !inserts.is_empty() {
                    engine.batch_insert(&inserts);
                }
                if !deletes.is_empty() {
                    engine.batch_delete(&deletes);
                }
                update_secs += t.elapsed().as_secs_f64();
                pending.clear();
            }
        };
    }

    macro_rules! emit_rows {
        () => {
            if update_ops > 0 || query_ops > 0 {
                let (fetches, pushdowns, ntf) = engine.counters();
                if update_ops > 0 {
                    report.rows.push(ReportRow {
                        algo: algo.name().to_string(),
                        stage,
                        phase: phase.to_string(),
                        ops: update_ops,
                        seconds: update_secs,
                        peak_bytes: engine.peak_bytes(),
                        fetches,
                        pushdowns,
                        nontree_fraction: ntf,
                        query_hash: hash,
                    });
                }
                if query_ops > 0 {
                    report.rows.push(ReportRow {
                        algo: algo.name().to_string(),
                        stage,
                        phase: "query".to_string(),
                        ops: query_ops,
                        seconds: query_secs,
                        peak_bytes: engine.peak_bytes(),
                        fetches,
                        pushdowns,
                        nontree_fraction: ntf,
                        query_hash: hash,
                    });
                }
                if opts.audit {
                    if let Some(summary) = engine.audit_summary() {
                        return Err(BenchError::AuditViolation {
                            algo: algo.name().to_string(),
                            stage,
                            summary,
                        });
                    }
                }
            }
        };
    }

    for (index, op) in stream.ops.iter().enumerate() {
        match *op {
            StreamOp::Stage(k) => {
                flush_pending!();
                emit_rows!();
                stage = k;
                update_ops = 0;
                update_secs = 0.0;
                query_ops = 0;
                query_secs = 0.0;
            }
            StreamOp::Insert(u, v) => {
                phase = "insert";
                update_ops += 1;
                report.insert_count += 1;
                if batching {
                    pending.push((true, u, v));
                } else {
                    let t = Instant::now();
                    engine.insert(u, v);
                    update_secs += t.elapsed().as_secs_f64();
                }
                if let Some(o) = oracle.as_mut() {
                    o.insert(u, v).expect("validated stream");
                }
            }
            StreamOp::Delete(u, v) => {
                phase = "delete";
                update_ops += 1;
                report.delete_count += 1;
                if batching {
                    pending.push((false, u, v));
                } else {
                    let t = Instant::now();
                    engine.delete(u, v);
                    update_secs += t.elapsed().as_secs_f64();
                }
                if let Some(o) = oracle.as_mut() {
                    o.delete(u, v).expect("validated stream");
                }
            }
            StreamOp::Query(u, v) => {
                flush_pending!();
                query_ops += 1;
                let t = Instant::now();
                let got = engine.connected(u, v);
                query_secs += t.elapsed().as_secs_f64();
                hash = fnv1a(hash, &u.0.to_le_bytes());
                hash = fnv1a(hash, &v.0.to_le_bytes());
                hash = fnv1a(hash, &[got as u8]);
                if let Some(o) = oracle.as_mut() {
                    if o.connected(u, v) != got {
                        return Err(BenchError::Divergence {
                            algo: algo.name().to_string(),
                            op_index: index,
                        });
                    }
                }
            }
        }
    }
    flush_pending!();
    emit_rows!();
    report.query_hash = hash;

    // The charging argument: total push-downs stay within the per-insert
    // level budget.
    let budget = report.insert_count * (levels_budget(stream.n) as u64);
    let pushdowns = report.final_pushdowns();
    if pushdowns > budget {
        return Err(BenchError::BudgetExceeded {
            algo: algo.name().to_string(),
            pushdowns,
            budget,
        });
    }
    Ok(report)
}

/// Per-insert push-down allowance: one per level an edge can ever occupy.
pub fn levels_budget(n: u32) -> u32 {
    crate::ids::ceil_log2(n) as u32 + 1
}

/// Runs several algorithms over one stream and checks that their query
/// outcome hashes agree.
pub fn compare(
    algos: &[Algo],
    stream: &UpdateStream,
    opts: RunOptions,
) -> BenchResult<Vec<RunReport>> {
    let mut reports = Vec::new();
    for &algo in algos {
        reports.push(run_stream(algo, stream, opts)?);
    }
    for pair in reports.windows(2) {
        if pair[0].query_hash != pair[1].query_hash {
            return Err(BenchError::HashMismatch {
                first: pair[0].algo.clone(),
                second: pair[1].algo.clone(),
            });
        }
    }
    Ok(reports)
}

// ----- CSV -----

pub const CSV_HEADER: &str =
    "algo,stage,phase,ops,seconds,peak_bytes,fetches,pushdowns,nontree_fraction,query_hash";

pub fn report_csv(reports: &[RunReport], path: &Path) -> BenchResult<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{CSV_HEADER}")?;
    for report in reports {
        for r in &report.rows {
            writeln!(
                file,
                "{},{},{},{},{:.6},{},{},{},{:.6},{:016x}",
                r.algo,
                r.stage,
                r.phase,
                r.ops,
                r.seconds,
                r.peak_bytes,
                r.fetches,
                r.pushdowns,
                r.nontree_fraction,
                r.query_hash
            )?;
        }
    }
    Ok(())
}

pub fn parse_csv(text: &str) -> BenchResult<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != CSV_HEADER {
                return Err(BenchError::Parse { line: 1, msg: "bad csv header".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(BenchError::Parse { line: i + 1, msg: "expected 10 columns".into() });
        }
        let err = |msg: &str| BenchError::Parse { line: i + 1, msg: msg.into() };
        rows.push(ReportRow {
            algo: f[0].to_string(),
            stage: f[1].parse().map_err(|_| err("bad stage"))?,
            phase: f[2].to_string(),
            ops: f[3].parse().map_err(|_| err("bad ops"))?,
            seconds: f[4].parse().map_err(|_| err("bad seconds"))?,
            peak_bytes: f[5].parse().map_err(|_| err("bad peak_bytes"))?,
            fetches: f[6].parse().map_err(|_| err("bad fetches"))?,
            pushdowns: f[7].parse().map_err(|_| err("bad pushdowns"))?,
            nontree_fraction: f[8].parse().map_err(|_| err("bad fraction"))?,
            query_hash: u64::from_str_radix(f[9], 16).map_err(|_| err("bad hash"))?,
        });
    }
    Ok(rows)
}

// ----- input generators -----

/// Axis-aligned grid graph, the sparse regime for the space comparison.
pub fn grid_graph(rows: u32, cols: u32) -> (u32, Vec<(VertexId, VertexId)>) {
    let n = rows * cols;
    let mut edges = Vec::new();
    let id = |r: u32, c: u32| VertexId(r * cols + c);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    (n, edges)
}

/// Random simple graph with exactly `m` distinct edges.
pub fn random_graph(n: u32, m: usize, seed: u64) -> (u32, Vec<(VertexId, VertexId)>) {
    assert!(m as u64 <= n as u64 * (n as u64 - 1) / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let key = EdgeKey::new(VertexId(u), VertexId(v));
        if seen.insert(key) {
            edges.push((key.a, key.b));
        }
    }
    (n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_parse_and_round_trip() {
        let (n, edges) = parse_graph("# comment\n4 2\n0 1\n2 3\n").unwrap();
        assert_eq!(n, 4);
        assert_eq!(edges.len(), 2);
        let dir = std::env::temp_dir().join("dyncon_graph_rt.txt");
        write_graph(&dir, n, &edges).unwrap();
        let (n2, edges2) = load_graph(&dir).unwrap();
        assert_eq!((n, edges), (n2, edges2));
    }

    #[test]
    fn graph_parse_rejects_bad_lines() {
        assert!(matches!(
            parse_graph("4 1\n0 0\n"),
            Err(BenchError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_graph("4 2\n0 1\n0 1\n"),
            Err(BenchError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_graph("4 1\n0 9\n"),
            Err(BenchError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn header_only_graph_is_empty() {
        let (n, edges) = parse_graph("5 0\n").unwrap();
        assert_eq!(n, 5);
        assert!(edges.is_empty());
    }

    #[test]
    fn stream_is_deterministic_and_balanced() {
        let (n, edges) = grid_graph(4, 4);
        let s1 = gen_stream(&edges, n, 2, 7);
        let s2 = gen_stream(&edges, n, 2, 7);
        assert_eq!(s1.ops, s2.ops);
        let inserts = s1.ops.iter().filter(|o| matches!(o, StreamOp::Insert(..))).count();
        let deletes = s1.ops.iter().filter(|o| matches!(o, StreamOp::Delete(..))).count();
        assert_eq!(inserts, edges.len());
        assert_eq!(deletes, edges.len());
        s1.validate().unwrap();
    }

    #[test]
    fn one_stage_stream_orders_all_inserts_first() {
        let (n, edges) = grid_graph(3, 3);
        let s = gen_stream(&edges, n, 1, 0);
        let first_delete =
            s.ops.iter().position(|o| matches!(o, StreamOp::Delete(..))).unwrap();
        let last_insert =
            s.ops.iter().rposition(|o| matches!(o, StreamOp::Insert(..))).unwrap();
        assert!(last_insert < first_delete);
    }

    #[test]
    fn stream_round_trips_through_text() {
        let (n, edges) = grid_graph(3, 3);
        let s = gen_stream(&edges, n, 2, 3);
        let dir = std::env::temp_dir().join("dyncon_stream_rt.txt");
        write_stream(&dir, &s).unwrap();
        let back = load_stream(&dir).unwrap();
        assert_eq!(s.ops, back.ops);
        assert_eq!(s.n, back.n);
        assert_eq!(s.seed, back.seed);
    }

    #[test]
    fn corrupted_stream_rejected_on_load() {
        let text = "4 2 0\nD 0 1\nI 0 1\n";
        let s = parse_stream(text).unwrap();
        assert!(matches!(s.validate(), Err(BenchError::InvalidStream { .. })));
    }

    #[test]
    fn oracle_run_is_self_consistent() {
        let (n, edges) = grid_graph(3, 4);
        let s = gen_stream(&edges, n, 2, 1);
        let r = run_stream(Algo::Oracle, &s, RunOptions { audit: false, verify: true }).unwrap();
        assert!(r.query_hash != 0);
    }

    #[test]
    fn csv_round_trip() {
        let (n, edges) = grid_graph(3, 3);
        let s = gen_stream(&edges, n, 1, 5);
        let r = run_stream(Algo::CfRoot, &s, RunOptions::default()).unwrap();
        let path = std::env::temp_dir().join("dyncon_csv_rt.csv");
        report_csv(&[r.clone()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), r.rows.len());
        for (a, b) in rows.iter().zip(r.rows.iter()) {
            assert_eq!(a.algo, b.algo);
            assert_eq!(a.stage, b.stage);
            assert_eq!(a.phase, b.phase);
            assert_eq!(a.ops, b.ops);
            assert_eq!(a.peak_bytes, b.peak_bytes);
            assert_eq!(a.fetches, b.fetches);
            assert_eq!(a.pushdowns, b.pushdowns);
            assert_eq!(a.query_hash, b.query_hash);
        }
    }

    #[test]
    fn empty_report_writes_header_only() {
        let path = std::env::temp_dir().join("dyncon_csv_empty.csv");
        report_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim(), CSV_HEADER);
    }
}

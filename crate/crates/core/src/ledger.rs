//! Append-only, hash-chained, tamper-evident event log.
//!
//! One event per record. Each record hash commits to the previous record's
//! hash, so any post-hoc modification is detectable by re-verification.
//!
//! ## Hash preimage layout
//!
//! `record_hash = SHA-256(preimage)` where, in canonical encoding
//! (big-endian, length-prefixed; see [`crate::canonical`]):
//!
//! ```text
//! preimage = prev_hash            32 bytes
//!         || index                u64
//!         || ts_ms                i64
//!         || event_kind tag       u8
//!         || payload              length-prefixed bytes
//!         || envelope flag        u8 (0 absent, 1 present)
//!         || envelope             if present:
//!              payload_digest     32 bytes
//!              required role tags u8 u8
//!              signature count    u32
//!              per signature:     signer_id (length-prefixed)
//!                                 role tag u8, nonce u64, sig 64 bytes
//! ```
//!
//! Record 0 has `prev_hash` of 32 zero bytes. Timestamps are logical,
//! injected by the caller; this module never reads a wall clock.
//!
//! ## Persistence
//!
//! JSON Lines, one record per line, fields `index`, `ts_ms`, `kind`,
//! `payload_hex`, `envelope` (nullable), `prev_hash_hex`, `hash_hex`.
//! Reload re-verifies the full chain before accepting.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{to_hex, CanonicalWriter};
use crate::identity::{hex_array, MultiSigEnvelope};

pub const GENESIS_PREV_HASH: [u8; 32] = [0u8; 32];

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("chain verification failed at index {0}")]
    ChainInvalid(u64),
    #[error("event payload could not be encoded: {0}")]
    Encoding(String),
}

/// Every kind of event the ledger records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    IdentityRegistered,
    PolicyRegistered,
    ClaimSubmitted,
    ClaimApproved,
    PaymentReceived,
    AckRecorded,
    ScenarioNote,
}

impl EventKind {
    pub const PROTOCOL_ORDER: [EventKind; 4] = [
        EventKind::ClaimSubmitted,
        EventKind::ClaimApproved,
        EventKind::PaymentReceived,
        EventKind::AckRecorded,
    ];

    /// One-byte tag used in the hash preimage.
    pub fn tag(self) -> u8 {
        match self {
            EventKind::IdentityRegistered => 0,
            EventKind::PolicyRegistered => 1,
            EventKind::ClaimSubmitted => 2,
            EventKind::ClaimApproved => 3,
            EventKind::PaymentReceived => 4,
            EventKind::AckRecorded => 5,
            EventKind::ScenarioNote => 6,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One hash-chained, tamper-evident event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub index: u64,
    pub ts_ms: i64,
    pub kind: EventKind,
    #[serde(with = "serde_payload_hex", rename = "payload_hex")]
    pub payload: Vec<u8>,
    pub envelope: Option<MultiSigEnvelope>,
    #[serde(with = "hex_array", rename = "prev_hash_hex")]
    pub prev_hash: [u8; 32],
    #[serde(with = "hex_array", rename = "hash_hex")]
    pub record_hash: [u8; 32],
}

mod serde_payload_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

impl LedgerRecord {
    /// The exact bytes hashed into `record_hash`.
    pub fn hash_preimage(&self) -> Vec<u8> {
        let mut w = CanonicalWriter::new();
        w.raw(&self.prev_hash);
        w.u64(self.index);
        w.i64(self.ts_ms);
        w.u8(self.kind.tag());
        w.bytes(&self.payload);
        match &self.envelope {
            None => {
                w.u8(0);
            }
            Some(env) => {
                w.u8(1);
                env.write_canonical(&mut w);
            }
        }
        w.into_bytes()
    }

    pub fn compute_hash(&self) -> [u8; 32] {
        crate::canonical::sha256(&self.hash_preimage())
    }

    /// The claim this record refers to, if its payload is a claim-scoped
    /// event body.
    pub fn claim_id_hex(&self) -> Option<String> {
        let body: serde_json::Value = serde_json::from_slice(&self.payload).ok()?;
        body.get("claim_id")?.as_str().map(str::to_string)
    }
}

/// The append-only event log. Records are immutable once appended; the only
/// mutation this type offers is appending.
#[derive(Debug, Default, Clone)]
pub struct Ledger {
    records: Vec<LedgerRecord>,
}

/// Outcome of a full-chain re-verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainStatus {
    Ok,
    FirstBadIndex(u64),
}

impl fmt::Display for ChainStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainStatus::Ok => write!(f, "ok"),
            ChainStatus::FirstBadIndex(i) => write!(f, "first bad index {i}"),
        }
    }
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps externally-loaded records for inspection. Run
    /// [`Ledger::verify_chain`] before trusting the content.
    pub fn from_records(records: Vec<LedgerRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_hash(&self) -> [u8; 32] {
        self.records
            .last()
            .map(|r| r.record_hash)
            .unwrap_or(GENESIS_PREV_HASH)
    }

    /// Appends one event and extends the hash chain.
    pub fn append_event(
        &mut self,
        kind: EventKind,
        ts_ms: i64,
        payload: Vec<u8>,
        envelope: Option<MultiSigEnvelope>,
    ) -> &LedgerRecord {
        let mut record = LedgerRecord {
            index: self.records.len() as u64,
            ts_ms,
            kind,
            payload,
            envelope,
            prev_hash: self.last_hash(),
            record_hash: [0u8; 32],
        };
        record.record_hash = record.compute_hash();
        self.records.push(record);
        self.records.last().expect("just pushed")
    }

    /// Recomputes every hash and link. Total function: returns the smallest
    /// failing index instead of erroring.
    pub fn verify_chain(&self) -> ChainStatus {
        let mut prev = GENESIS_PREV_HASH;
        for (i, record) in self.records.iter().enumerate() {
            if record.index != i as u64
                || record.prev_hash != prev
                || record.compute_hash() != record.record_hash
            {
                return ChainStatus::FirstBadIndex(i as u64);
            }
            prev = record.record_hash;
        }
        ChainStatus::Ok
    }

    /// All records referencing a claim, in ledger order. Unknown claims give
    /// an empty trail.
    pub fn audit_trail(&self, claim_id: &[u8; 32]) -> Vec<&LedgerRecord> {
        let want = to_hex(claim_id);
        self.records
            .iter()
            .filter(|r| r.claim_id_hex().as_deref() == Some(want.as_str()))
            .collect()
    }

    /// JSON Lines serialization, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), LedgerError> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| LedgerError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Parses JSON Lines without verification; errors carry 1-based line
    /// numbers.
    pub fn parse_jsonl(text: &str) -> Result<Self, LedgerError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: LedgerRecord =
                serde_json::from_str(line).map_err(|e| LedgerError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    /// Loads and re-verifies a persisted ledger, rejecting any chain break.
    pub fn read_jsonl(path: &Path) -> Result<Self, LedgerError> {
        let text = std::fs::read_to_string(path).map_err(|source| LedgerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ledger = Self::parse_jsonl(&text)?;
        match ledger.verify_chain() {
            ChainStatus::Ok => Ok(ledger),
            ChainStatus::FirstBadIndex(i) => Err(LedgerError::ChainInvalid(i)),
        }
    }
}

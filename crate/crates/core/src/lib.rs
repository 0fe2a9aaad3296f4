//! Protocol engine and simulation harness for multi-signature health-insurance
//! claim processing over a tamper-evident append-only ledger.
//!
//! Every claim moves through three co-signed phases — submission, approval,
//! acknowledgment — and every transition is recorded as a hash-chained ledger
//! event. The harness simulates honest and malicious actors to show that each
//! in-scope fraud class is blocked before it ever reaches the ledger as a
//! submitted claim.

pub mod canonical;
pub mod claim;
pub mod gas;
pub mod identity;
pub mod ledger;
pub mod policy;
pub mod scenario;

pub use claim::{Acknowledgment, ApprovalDecision, Claim, ClaimEvent, ClaimState, Engine};
pub use identity::{Identity, IdentityRegistry, MultiSigEnvelope, Role, Signature, SigningIdentity};
pub use ledger::{ChainStatus, EventKind, Ledger, LedgerRecord};
pub use policy::{BundleRule, ClaimLineItem, EncounterCode, InsurancePolicy, Money};

//! The three-phase claim state machine.
//!
//! A claim moves Draft → Reviewed → Submitted → Approved → Paid →
//! Acknowledged → Closed, with Rejected reachable from Reviewed, Submitted,
//! or Approved. Phase 1 (submission) is gated by a provider+patient
//! envelope, phase 2 (approval) by insurer+patient, phase 3 (acknowledgment)
//! by provider+patient again; each gated transition appends one ledger event
//! carrying the verified envelope.
//!
//! The claim id is a SHA-256 content hash over
//! `(policy_id, provider_id, patient_id, lines, creation_nonce)` in canonical
//! encoding, so identical medical content on different visits yields
//! distinct claims, and the id is recomputable at any time.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{to_hex, CanonicalWriter};
use crate::identity::{
    EnvelopeRejection, Identity, IdentityError, IdentityRegistry, MultiSigEnvelope, MultiSigError,
    Role,
};
use crate::ledger::{EventKind, Ledger, LedgerRecord};
use crate::policy::{
    compute_copay_split, detect_unbundling, zeta_check, ClaimLineItem, EncounterCode,
    InsurancePolicy, Money, PolicyError,
};

pub type ClaimId = [u8; 32];

/// Lifecycle states of a claim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimState {
    Draft,
    Reviewed,
    Submitted,
    Approved,
    Paid,
    Acknowledged,
    Closed,
    Rejected,
}

impl ClaimState {
    pub const ALL: [ClaimState; 8] = [
        ClaimState::Draft,
        ClaimState::Reviewed,
        ClaimState::Submitted,
        ClaimState::Approved,
        ClaimState::Paid,
        ClaimState::Acknowledged,
        ClaimState::Closed,
        ClaimState::Rejected,
    ];
}

impl fmt::Display for ClaimState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Events that drive state transitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimEvent {
    Review,
    Submit,
    Approve,
    Pay,
    Acknowledge,
    Close,
    Reject,
}

impl ClaimEvent {
    pub const ALL: [ClaimEvent; 7] = [
        ClaimEvent::Review,
        ClaimEvent::Submit,
        ClaimEvent::Approve,
        ClaimEvent::Pay,
        ClaimEvent::Acknowledge,
        ClaimEvent::Close,
        ClaimEvent::Reject,
    ];
}

impl fmt::Display for ClaimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// The complete transition graph. Everything off-graph is an
/// `InvalidTransition`.
pub fn transition(state: ClaimState, event: ClaimEvent) -> Result<ClaimState, ProtocolError> {
    use ClaimEvent as E;
    use ClaimState as S;
    match (state, event) {
        (S::Draft, E::Review) => Ok(S::Reviewed),
        (S::Reviewed, E::Submit) => Ok(S::Submitted),
        (S::Submitted, E::Approve) => Ok(S::Approved),
        (S::Approved, E::Pay) => Ok(S::Paid),
        (S::Paid, E::Acknowledge) => Ok(S::Acknowledged),
        (S::Acknowledged, E::Close) => Ok(S::Closed),
        (S::Reviewed | S::Submitted | S::Approved, E::Reject) => Ok(S::Rejected),
        (from, event) => Err(ProtocolError::InvalidTransition { from, event }),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReviewError {
    #[error("claim has no line items")]
    EmptyClaim,
    #[error("line {code} for {amount} is outside the policy coverage")]
    LineRejected { code: EncounterCode, amount: Money },
    #[error("lines unbundle packaged procedure {bundle_code}")]
    Unbundling { bundle_code: EncounterCode },
}

/// Why an otherwise well-formed envelope was refused by the protocol layer.
#[derive(Debug, PartialEq, Eq)]
pub enum EnvelopeFault {
    /// The digest does not bind the content this transition authorizes.
    DigestMismatch,
    /// A role is covered by a signer other than the claim's own party.
    SignerMismatch {
        role: Role,
        expected: String,
        actual: String,
    },
    /// The signature set itself failed verification.
    Rejected(EnvelopeRejection),
}

impl fmt::Display for EnvelopeFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DigestMismatch => write!(f, "envelope digest does not match the payload"),
            Self::SignerMismatch {
                role,
                expected,
                actual,
            } => write!(
                f,
                "{role} signature must come from {expected:?}, got {actual:?}"
            ),
            Self::Rejected(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("claim {0} not found")]
    UnknownClaim(String),
    #[error("policy {0:?} is not registered")]
    UnknownPolicy(String),
    #[error("policy {0:?} already registered")]
    DuplicatePolicy(String),
    #[error("invalid transition from {from} on {event}")]
    InvalidTransition { from: ClaimState, event: ClaimEvent },
    #[error("claim review failed: {0}")]
    Review(ReviewError),
    #[error("claim is not submitted: {0}")]
    NotSubmitted(EnvelopeFault),
    #[error("claim is not approved: {0}")]
    NotApproved(EnvelopeFault),
    #[error("claim is not acknowledged: {0}")]
    NotAcknowledged(EnvelopeFault),
    #[error("policy {policy_id:?} binds patient {policy_patient:?}, claim names {claim_patient:?}")]
    PolicyBindingMismatch {
        policy_id: String,
        policy_patient: String,
        claim_patient: String,
    },
    #[error("patient consent for data sharing is missing")]
    ConsentMissing,
    #[error("nothing to disburse: approved total is zero")]
    NothingToDisburse,
    #[error(transparent)]
    MultiSig(#[from] MultiSigError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// A claim and its line items, carried through the three phases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub claim_id: ClaimId,
    pub policy_id: String,
    pub provider_id: String,
    pub patient_id: String,
    pub lines: Vec<ClaimLineItem>,
    pub consent: bool,
    pub creation_nonce: u64,
    pub state: ClaimState,
}

impl Claim {
    /// Content hash over the canonical claim encoding.
    pub fn compute_id(
        policy_id: &str,
        provider_id: &str,
        patient_id: &str,
        lines: &[ClaimLineItem],
        creation_nonce: u64,
    ) -> ClaimId {
        let mut w = CanonicalWriter::new();
        w.str(policy_id);
        w.str(provider_id);
        w.str(patient_id);
        w.u32(lines.len() as u32);
        for line in lines {
            w.str(line.encounter_code.as_str());
            w.u64(line.amount.cents());
        }
        w.u64(creation_nonce);
        w.finish_sha256()
    }

    /// True iff the stored id still matches the content.
    pub fn verify_id(&self) -> bool {
        Self::compute_id(
            &self.policy_id,
            &self.provider_id,
            &self.patient_id,
            &self.lines,
            self.creation_nonce,
        ) == self.claim_id
    }

    pub fn total_submitted(&self) -> Result<Money, PolicyError> {
        Money::sum(self.lines.iter().map(|l| &l.amount))
    }

    pub fn claim_id_hex(&self) -> String {
        to_hex(&self.claim_id)
    }
}

/// Input for a new claim, before it has an id or a state.
#[derive(Clone, Debug)]
pub struct ClaimDraft {
    pub policy_id: String,
    pub provider_id: String,
    pub patient_id: String,
    pub consent: bool,
    pub lines: Vec<ClaimLineItem>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClaimFixture {
    policy_id: String,
    provider_id: String,
    patient_id: String,
    consent: bool,
    lines: Vec<LineFixture>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineFixture {
    code: String,
    amount_cents: u64,
}

impl ClaimDraft {
    /// Loads a claim fixture from its JSON form.
    pub fn from_fixture_json(json: &str) -> Result<Self, PolicyError> {
        let fixture: ClaimFixture =
            serde_json::from_str(json).map_err(|e| PolicyError::Fixture(e.to_string()))?;
        let mut lines = Vec::new();
        for l in fixture.lines {
            lines.push(ClaimLineItem::new(
                EncounterCode::new(l.code)?,
                Money(l.amount_cents),
            )?);
        }
        Ok(Self {
            policy_id: fixture.policy_id,
            provider_id: fixture.provider_id,
            patient_id: fixture.patient_id,
            consent: fixture.consent,
            lines,
        })
    }

    pub fn to_fixture_json(&self) -> String {
        serde_json::to_string_pretty(&ClaimFixture {
            policy_id: self.policy_id.clone(),
            provider_id: self.provider_id.clone(),
            patient_id: self.patient_id.clone(),
            consent: self.consent,
            lines: self
                .lines
                .iter()
                .map(|l| LineFixture {
                    code: l.encounter_code.as_str().to_string(),
                    amount_cents: l.amount.cents(),
                })
                .collect(),
        })
        .expect("claim fixture serialization cannot fail")
    }
}

/// One line of an insurer decision: the submitted amount, the approved
/// amount, and the downward adjustment between them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDecision {
    pub encounter_code: EncounterCode,
    pub submitted: Money,
    pub approved: Money,
    pub delta: Money,
}

/// The insurer's per-line adjudication of a submitted claim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApprovalDecision {
    pub claim_id: ClaimId,
    pub lines: Vec<LineDecision>,
    pub total_approved: Money,
}

impl ApprovalDecision {
    /// The digest the phase-2 envelope must sign.
    pub fn digest(&self) -> [u8; 32] {
        let mut w = CanonicalWriter::new();
        w.raw(&self.claim_id);
        w.u32(self.lines.len() as u32);
        for line in &self.lines {
            w.str(line.encounter_code.as_str());
            w.u64(line.submitted.cents());
            w.u64(line.approved.cents());
        }
        w.u64(self.total_approved.cents());
        w.finish_sha256()
    }

    pub fn is_rejection(&self) -> bool {
        self.total_approved == Money::ZERO
    }
}

/// The provider's confirmation that payment arrived, and the residual
/// balance charged to the patient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Acknowledgment {
    pub claim_id: ClaimId,
    pub received: Money,
    pub remaining: Money,
    pub overpayment_flag: bool,
}

/// The digest the phase-3 envelope must sign: the claim plus the received
/// amount.
pub fn ack_digest(claim_id: &ClaimId, received: Money) -> [u8; 32] {
    let mut w = CanonicalWriter::new();
    w.raw(claim_id);
    w.u64(received.cents());
    w.finish_sha256()
}

/// Screens draft lines against the policy: every line must pass the validity
/// predicate and the set must not unbundle any packaged procedure.
pub fn review_lines(lines: &[ClaimLineItem], policy: &InsurancePolicy) -> Result<(), ReviewError> {
    if lines.is_empty() {
        return Err(ReviewError::EmptyClaim);
    }
    for line in lines {
        if !zeta_check(line, policy) {
            return Err(ReviewError::LineRejected {
                code: line.encounter_code.clone(),
                amount: line.amount,
            });
        }
    }
    if let Some(rule) = detect_unbundling(lines, policy).first() {
        return Err(ReviewError::Unbundling {
            bundle_code: rule.bundle_code.clone(),
        });
    }
    Ok(())
}

/// The insurer's adjudication rule, applied line by line: amounts that pass
/// the validity predicate are approved as submitted; covered codes over cap
/// are adjusted down to the cap; uncovered codes get zero.
pub fn compute_approval(
    claim_id: ClaimId,
    lines: &[ClaimLineItem],
    policy: &InsurancePolicy,
) -> Result<ApprovalDecision, PolicyError> {
    let mut decisions = Vec::with_capacity(lines.len());
    let mut total = Money::ZERO;
    for line in lines {
        let approved = if zeta_check(line, policy) {
            line.amount
        } else {
            match policy.cap(&line.encounter_code) {
                Some(cap) => cap.min(line.amount),
                None => Money::ZERO,
            }
        };
        total = total.checked_add(approved)?;
        decisions.push(LineDecision {
            encounter_code: line.encounter_code.clone(),
            submitted: line.amount,
            approved,
            delta: line.amount.saturating_sub(approved),
        });
    }
    Ok(ApprovalDecision {
        claim_id,
        lines: decisions,
        total_approved: total,
    })
}

// ---------------------------------------------------------------------------
// Ledger event bodies (canonical JSON payloads; claim-scoped bodies carry
// `claim_id` as their first field so the ledger can build audit trails)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LineBody {
    code: String,
    amount_cents: u64,
}

#[derive(Serialize, Deserialize)]
struct SubmittedBody {
    claim_id: String,
    policy_id: String,
    provider_id: String,
    patient_id: String,
    lines: Vec<LineBody>,
    total_cents: u64,
    patient_copay_cents: u64,
    claimable_cents: u64,
    consent: bool,
}

#[derive(Serialize, Deserialize)]
struct ApprovedLineBody {
    code: String,
    submitted_cents: u64,
    approved_cents: u64,
    delta_cents: u64,
}

#[derive(Serialize, Deserialize)]
struct ApprovedBody {
    claim_id: String,
    lines: Vec<ApprovedLineBody>,
    total_approved_cents: u64,
    rejected: bool,
}

#[derive(Serialize, Deserialize)]
struct PaymentBody {
    claim_id: String,
    received_cents: u64,
}

#[derive(Serialize, Deserialize)]
struct AckBody {
    claim_id: String,
    received_cents: u64,
    remaining_cents: u64,
    overpayment: bool,
}

#[derive(Serialize, Deserialize)]
struct IdentityBody {
    id: String,
    role: Role,
    public_key: String,
}

#[derive(Serialize, Deserialize)]
struct PolicyBody {
    policy_id: String,
    patient_id: String,
    insurer_id: String,
}

/// Logical clock injected into the engine; the ledger never sees wall time.
#[derive(Clone, Copy, Debug)]
pub struct SimClock {
    next_ms: i64,
    step_ms: i64,
}

impl SimClock {
    pub fn new(start_ms: i64, step_ms: i64) -> Self {
        Self {
            next_ms: start_ms,
            step_ms,
        }
    }

    pub fn tick(&mut self) -> i64 {
        let now = self.next_ms;
        self.next_ms += self.step_ms;
        now
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new(1_700_000_000_000, 1_000)
    }
}

struct ClaimEntry {
    claim: Claim,
    approval: Option<ApprovalDecision>,
}

/// One protocol world: a registry, a policy book, live claims, and the
/// ledger they all write to. Transitions for a single claim are serialized
/// by the `&mut` receiver; distinct engines (one per scenario) are
/// independent and may run on different threads.
pub struct Engine {
    registry: IdentityRegistry,
    policies: BTreeMap<String, InsurancePolicy>,
    claims: BTreeMap<ClaimId, ClaimEntry>,
    ledger: Ledger,
    clock: SimClock,
    next_claim_nonce: u64,
}

impl Engine {
    pub fn new(clock: SimClock) -> Self {
        Self {
            registry: IdentityRegistry::new(),
            policies: BTreeMap::new(),
            claims: BTreeMap::new(),
            ledger: Ledger::new(),
            clock,
            next_claim_nonce: 0,
        }
    }

    pub fn registry(&self) -> &IdentityRegistry {
        &self.registry
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn policy(&self, policy_id: &str) -> Option<&InsurancePolicy> {
        self.policies.get(policy_id)
    }

    pub fn claim(&self, claim_id: &ClaimId) -> Option<&Claim> {
        self.claims.get(claim_id).map(|e| &e.claim)
    }

    pub fn approval(&self, claim_id: &ClaimId) -> Option<&ApprovalDecision> {
        self.claims.get(claim_id).and_then(|e| e.approval.as_ref())
    }

    /// Registers an identity and records the registration.
    pub fn register_identity(&mut self, identity: Identity) -> Result<(), ProtocolError> {
        let body = IdentityBody {
            id: identity.id.clone(),
            role: identity.role,
            public_key: to_hex(&identity.public_key),
        };
        self.registry.register(identity)?;
        self.append(EventKind::IdentityRegistered, &body, None);
        Ok(())
    }

    /// Registers a policy; both bound identities must already be registered.
    pub fn register_policy(&mut self, policy: InsurancePolicy) -> Result<(), ProtocolError> {
        if self.policies.contains_key(&policy.policy_id) {
            return Err(ProtocolError::DuplicatePolicy(policy.policy_id));
        }
        for party in [&policy.patient_id, &policy.insurer_id] {
            if self.registry.get(party).is_none() {
                return Err(ProtocolError::Identity(IdentityError::Import(format!(
                    "policy {} references unregistered identity {party:?}",
                    policy.policy_id
                ))));
            }
        }
        let body = PolicyBody {
            policy_id: policy.policy_id.clone(),
            patient_id: policy.patient_id.clone(),
            insurer_id: policy.insurer_id.clone(),
        };
        self.policies.insert(policy.policy_id.clone(), policy);
        self.append(EventKind::PolicyRegistered, &body, None);
        Ok(())
    }

    /// Creates a draft claim, assigning it a fresh creation nonce and its
    /// content-hash id.
    pub fn create_claim(&mut self, draft: ClaimDraft) -> Result<ClaimId, ProtocolError> {
        let creation_nonce = self.next_claim_nonce;
        self.next_claim_nonce += 1;
        let claim_id = Claim::compute_id(
            &draft.policy_id,
            &draft.provider_id,
            &draft.patient_id,
            &draft.lines,
            creation_nonce,
        );
        let claim = Claim {
            claim_id,
            policy_id: draft.policy_id,
            provider_id: draft.provider_id,
            patient_id: draft.patient_id,
            lines: draft.lines,
            consent: draft.consent,
            creation_nonce,
            state: ClaimState::Draft,
        };
        self.claims.insert(
            claim_id,
            ClaimEntry {
                claim,
                approval: None,
            },
        );
        Ok(claim_id)
    }

    fn entry_mut(&mut self, claim_id: &ClaimId) -> Result<&mut ClaimEntry, ProtocolError> {
        self.claims
            .get_mut(claim_id)
            .ok_or_else(|| ProtocolError::UnknownClaim(to_hex(claim_id)))
    }

    fn policy_for(&self, policy_id: &str) -> Result<&InsurancePolicy, ProtocolError> {
        self.policies
            .get(policy_id)
            .ok_or_else(|| ProtocolError::UnknownPolicy(policy_id.to_string()))
    }

    fn append<B: Serialize>(
        &mut self,
        kind: EventKind,
        body: &B,
        envelope: Option<MultiSigEnvelope>,
    ) -> u64 {
        let payload = serde_json::to_vec(body).expect("event body serialization cannot fail");
        let ts = self.clock.tick();
        self.ledger.append_event(kind, ts, payload, envelope).index
    }

    /// Appends a free-form simulation note; `claim_id` scopes the note to a
    /// claim's audit trail when given.
    pub fn append_note(&mut self, claim_id: Option<&ClaimId>, note: &serde_json::Value) -> u64 {
        let mut body = serde_json::Map::new();
        if let Some(id) = claim_id {
            body.insert("claim_id".into(), serde_json::Value::String(to_hex(id)));
        }
        body.insert("note".into(), note.clone());
        self.append(EventKind::ScenarioNote, &serde_json::Value::Object(body), None)
    }

    /// Phase 1, review step: screens every line against the policy. The
    /// claim moves Draft → Reviewed; on any failure it stays Draft.
    pub fn review_claim(&mut self, claim_id: &ClaimId) -> Result<(), ProtocolError> {
        let entry = self
            .claims
            .get(claim_id)
            .ok_or_else(|| ProtocolError::UnknownClaim(to_hex(claim_id)))?;
        let next = transition(entry.claim.state, ClaimEvent::Review)?;
        let policy = self.policy_for(&entry.claim.policy_id)?;
        review_lines(&entry.claim.lines, policy).map_err(ProtocolError::Review)?;
        self.entry_mut(claim_id)?.claim.state = next;
        Ok(())
    }

    /// Validates a two-party envelope: digest binding, signature set, and
    /// that each role is signed by the claim's own party.
    fn validate_envelope(
        &self,
        envelope: &MultiSigEnvelope,
        expected_digest: [u8; 32],
        required: [(Role, &str); 2],
    ) -> Result<(), EnvelopeFault> {
        if envelope.payload_digest != expected_digest {
            return Err(EnvelopeFault::DigestMismatch);
        }
        let mut roles = [required[0].0, required[1].0];
        roles.sort_by_key(|r| r.tag());
        if envelope.required_roles != roles {
            let missing = roles
                .into_iter()
                .find(|r| !envelope.required_roles.contains(r))
                .unwrap_or(roles[0]);
            return Err(EnvelopeFault::Rejected(EnvelopeRejection::MissingRole(
                missing,
            )));
        }
        self.registry
            .check_multisig(envelope)
            .map_err(EnvelopeFault::Rejected)?;
        for (role, expected_signer) in required {
            let sig = envelope
                .signatures
                .iter()
                .find(|s| s.signer_role == role)
                .expect("check_multisig guarantees coverage");
            if sig.signer_id != expected_signer {
                return Err(EnvelopeFault::SignerMismatch {
                    role,
                    expected: expected_signer.to_string(),
                    actual: sig.signer_id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Phase 1, submission step: requires patient consent, the policy to
    /// bind the claim's patient, and a provider+patient envelope over the
    /// claim id. Appends a `ClaimSubmitted` event.
    pub fn submit_claim(
        &mut self,
        claim_id: &ClaimId,
        envelope: &MultiSigEnvelope,
    ) -> Result<(), ProtocolError> {
        let entry = self
            .claims
            .get(claim_id)
            .ok_or_else(|| ProtocolError::UnknownClaim(to_hex(claim_id)))?;
        let next = transition(entry.claim.state, ClaimEvent::Submit)?;
        if !entry.claim.consent {
            return Err(ProtocolError::ConsentMissing);
        }
        let policy = self.policy_for(&entry.claim.policy_id)?;
        if policy.patient_id != entry.claim.patient_id {
            return Err(ProtocolError::PolicyBindingMismatch {
                policy_id: policy.policy_id.clone(),
                policy_patient: policy.patient_id.clone(),
                claim_patient: entry.claim.patient_id.clone(),
            });
        }

        let claim = &entry.claim;
        self.validate_envelope(
            envelope,
            claim.claim_id,
            [
                (Role::Provider, claim.provider_id.as_str()),
                (Role::Patient, claim.patient_id.as_str()),
            ],
        )
        .map_err(ProtocolError::NotSubmitted)?;

        let total = claim.total_submitted()?;
        let (patient_copay, claimable) = compute_copay_split(total, policy);
        let body = SubmittedBody {
            claim_id: claim.claim_id_hex(),
            policy_id: claim.policy_id.clone(),
            provider_id: claim.provider_id.clone(),
            patient_id: claim.patient_id.clone(),
            lines: claim
                .lines
                .iter()
                .map(|l| LineBody {
                    code: l.encounter_code.as_str().to_string(),
                    amount_cents: l.amount.cents(),
                })
                .collect(),
            total_cents: total.cents(),
            patient_copay_cents: patient_copay.cents(),
            claimable_cents: claimable.cents(),
            consent: claim.consent,
        };

        self.registry.advance_nonces(envelope);
        self.append(EventKind::ClaimSubmitted, &body, Some(envelope.clone()));
        self.entry_mut(claim_id)?.claim.state = next;
        Ok(())
    }

    /// Phase 2: adjudicates the claim under the policy and, gated by an
    /// insurer+patient envelope over the decision digest, moves it to
    /// Approved — or Rejected when nothing was approved. Appends a
    /// `ClaimApproved` event either way.
    pub fn approve_claim(
        &mut self,
        claim_id: &ClaimId,
        envelope: &MultiSigEnvelope,
    ) -> Result<ApprovalDecision, ProtocolError> {
        let entry = self
            .claims
            .get(claim_id)
            .ok_or_else(|| ProtocolError::UnknownClaim(to_hex(claim_id)))?;
        transition(entry.claim.state, ClaimEvent::Approve)?;
        let policy = self.policy_for(&entry.claim.policy_id)?;
        let decision = compute_approval(*claim_id, &entry.claim.lines, policy)?;

        self.validate_envelope(
            envelope,
            decision.digest(),
            [
                (Role::Insurer, policy.insurer_id.as_str()),
                (Role::Patient, entry.claim.patient_id.as_str()),
            ],
        )
        .map_err(ProtocolError::NotApproved)?;

        let body = ApprovedBody {
            claim_id: to_hex(claim_id),
            lines: decision
                .lines
                .iter()
                .map(|l| ApprovedLineBody {
                    code: l.encounter_code.as_str().to_string(),
                    submitted_cents: l.submitted.cents(),
                    approved_cents: l.approved.cents(),
                    delta_cents: l.delta.cents(),
                })
                .collect(),
            total_approved_cents: decision.total_approved.cents(),
            rejected: decision.is_rejection(),
        };

        self.registry.advance_nonces(envelope);
        self.append(EventKind::ClaimApproved, &body, Some(envelope.clone()));

        let entry = self.entry_mut(claim_id)?;
        entry.claim.state = if decision.is_rejection() {
            transition(entry.claim.state, ClaimEvent::Reject)?
        } else {
            transition(entry.claim.state, ClaimEvent::Approve)?
        };
        entry.approval = Some(decision.clone());
        Ok(decision)
    }

    /// Releases payment for an approved claim: records a `PaymentReceived`
    /// event carrying the approved total and moves the claim to Paid.
    pub fn disburse_payment(&mut self, claim_id: &ClaimId) -> Result<Money, ProtocolError> {
        let entry = self
            .claims
            .get(claim_id)
            .ok_or_else(|| ProtocolError::UnknownClaim(to_hex(claim_id)))?;
        let next = transition(entry.claim.state, ClaimEvent::Pay)?;
        let received = entry
            .approval
            .as_ref()
            .map(|d| d.total_approved)
            .unwrap_or(Money::ZERO);
        if received == Money::ZERO {
            return Err(ProtocolError::NothingToDisburse);
        }
        let body = PaymentBody {
            claim_id: to_hex(claim_id),
            received_cents: received.cents(),
        };
        self.append(EventKind::PaymentReceived, &body, None);
        self.entry_mut(claim_id)?.claim.state = next;
        Ok(received)
    }

    /// Phase 3: the provider and patient co-sign the received amount; the
    /// residual balance is charged to the patient. Appends an `AckRecorded`
    /// event and closes the claim.
    pub fn acknowledge_claim(
        &mut self,
        claim_id: &ClaimId,
        received: Money,
        envelope: &MultiSigEnvelope,
    ) -> Result<Acknowledgment, ProtocolError> {
        let entry = self
            .claims
            .get(claim_id)
            .ok_or_else(|| ProtocolError::UnknownClaim(to_hex(claim_id)))?;
        transition(entry.claim.state, ClaimEvent::Acknowledge)?;

        self.validate_envelope(
            envelope,
            ack_digest(claim_id, received),
            [
                (Role::Provider, entry.claim.provider_id.as_str()),
                (Role::Patient, entry.claim.patient_id.as_str()),
            ],
        )
        .map_err(ProtocolError::NotAcknowledged)?;

        let total_submitted = entry.claim.total_submitted()?;
        let remaining = total_submitted.saturating_sub(received);
        let ack = Acknowledgment {
            claim_id: *claim_id,
            received,
            remaining,
            overpayment_flag: received > total_submitted,
        };
        let body = AckBody {
            claim_id: to_hex(claim_id),
            received_cents: received.cents(),
            remaining_cents: remaining.cents(),
            overpayment: ack.overpayment_flag,
        };

        self.registry.advance_nonces(envelope);
        self.append(EventKind::AckRecorded, &body, Some(envelope.clone()));

        let entry = self.entry_mut(claim_id)?;
        entry.claim.state = transition(entry.claim.state, ClaimEvent::Acknowledge)?;
        entry.claim.state = transition(entry.claim.state, ClaimEvent::Close)?;
        Ok(ack)
    }

    /// Replays the whole ledger and re-verifies every stored envelope against
    /// a fresh nonce table. Returns the indices of gated events whose
    /// envelope no longer verifies (empty means the gating invariant holds).
    pub fn reverify_gated_events(&self) -> Vec<u64> {
        let mut snapshot = IdentityRegistry::new();
        let mut bad = Vec::new();
        for record in self.ledger.records() {
            match record.kind {
                EventKind::IdentityRegistered => {
                    if let Ok(body) = serde_json::from_slice::<IdentityBody>(&record.payload) {
                        if let Some(key) = crate::canonical::digest_from_hex(&body.public_key) {
                            let _ = snapshot.register(Identity {
                                id: body.id,
                                role: body.role,
                                public_key: key,
                                nonce: 0,
                            });
                        }
                    }
                }
                EventKind::ClaimSubmitted | EventKind::ClaimApproved | EventKind::AckRecorded => {
                    let verified = record
                        .envelope
                        .as_ref()
                        .is_some_and(|env| snapshot.verify_multisig(env) == Ok(true));
                    if !verified {
                        bad.push(record.index);
                    }
                }
                _ => {}
            }
        }
        bad
    }

    /// This claim's slice of the ledger, in order.
    pub fn audit_trail(&self, claim_id: &ClaimId) -> Vec<&LedgerRecord> {
        self.ledger.audit_trail(claim_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{generate_identity, SigningIdentity};
    use crate::ledger::ChainStatus;
    use std::collections::BTreeMap as Map;

    fn code(s: &str) -> EncounterCode {
        EncounterCode::new(s).unwrap()
    }

    fn line(c: &str, amount: u64) -> ClaimLineItem {
        ClaimLineItem::new(code(c), Money(amount)).unwrap()
    }

    struct World {
        engine: Engine,
        patient: SigningIdentity,
        provider: SigningIdentity,
        insurer: SigningIdentity,
    }

    fn sample_policy(patient_id: &str, insurer_id: &str) -> InsurancePolicy {
        let coverage: Map<_, _> = [
            (code("E100"), Money(15_000)),
            (code("E200"), Money(8_000)),
            (code("E300"), Money(30_000)),
            (code("E450"), Money(22_000)),
        ]
        .into_iter()
        .collect();
        let bundle = crate::policy::BundleRule {
            bundle_code: code("B900"),
            components: [code("E200"), code("E300"), code("E450")].into_iter().collect(),
            bundled_cap: Money(45_000),
        };
        InsurancePolicy::new(
            "pol-1",
            patient_id,
            insurer_id,
            Money(2_000),
            coverage,
            vec![bundle],
        )
        .unwrap()
    }

    fn world() -> World {
        let patient = generate_identity(Role::Patient, &[1; 32]).unwrap().with_id("pat-1");
        let provider = generate_identity(Role::Provider, &[2; 32]).unwrap().with_id("prov-1");
        let insurer = generate_identity(Role::Insurer, &[3; 32]).unwrap().with_id("ins-1");
        let mut engine = Engine::new(SimClock::default());
        for actor in [&patient, &provider, &insurer] {
            engine.register_identity(actor.identity().clone()).unwrap();
        }
        engine
            .register_policy(sample_policy(patient.id(), insurer.id()))
            .unwrap();
        World {
            engine,
            patient,
            provider,
            insurer,
        }
    }

    fn draft(lines: Vec<ClaimLineItem>) -> ClaimDraft {
        ClaimDraft {
            policy_id: "pol-1".into(),
            provider_id: "prov-1".into(),
            patient_id: "pat-1".into(),
            consent: true,
            lines,
        }
    }

    fn envelope_over(
        digest: [u8; 32],
        a: &mut SigningIdentity,
        b: &mut SigningIdentity,
    ) -> MultiSigEnvelope {
        MultiSigEnvelope::new(
            digest,
            [a.role(), b.role()],
            vec![a.sign_digest(digest), b.sign_digest(digest)],
        )
    }

    /// Drives one claim through all three phases and returns its id.
    fn run_happy_path(w: &mut World, lines: Vec<ClaimLineItem>) -> ClaimId {
        let id = w.engine.create_claim(draft(lines)).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();

        let policy = w.engine.policy("pol-1").unwrap();
        let claim = w.engine.claim(&id).unwrap();
        let decision = compute_approval(id, &claim.lines, policy).unwrap();
        let env2 = envelope_over(decision.digest(), &mut w.insurer, &mut w.patient);
        w.engine.approve_claim(&id, &env2).unwrap();

        let received = w.engine.disburse_payment(&id).unwrap();
        let env3 = envelope_over(ack_digest(&id, received), &mut w.provider, &mut w.patient);
        w.engine.acknowledge_claim(&id, received, &env3).unwrap();
        id
    }

    #[test]
    fn happy_path_closes_with_complete_audit_trail() {
        let mut w = world();
        let id = run_happy_path(&mut w, vec![line("E100", 10_000), line("E200", 5_000)]);

        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Closed);
        let trail = w.engine.audit_trail(&id);
        let kinds: Vec<EventKind> = trail.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, EventKind::PROTOCOL_ORDER);
        assert_eq!(w.engine.ledger().verify_chain(), ChainStatus::Ok);
        assert!(w.engine.reverify_gated_events().is_empty());
        assert!(w.engine.claim(&id).unwrap().verify_id());
        // an id nobody has seen has no trail
        assert!(w.engine.audit_trail(&[0xFF; 32]).is_empty());
    }

    #[test]
    fn review_accepts_lines_within_caps() {
        let mut w = world();
        let id = w
            .engine
            .create_claim(draft(vec![
                line("E100", 10_000),
                line("E200", 5_000),
                line("E300", 29_000),
            ]))
            .unwrap();
        w.engine.review_claim(&id).unwrap();
        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Reviewed);
    }

    #[test]
    fn review_rejects_cap_violation_naming_the_line() {
        let mut w = world();
        let id = w
            .engine
            .create_claim(draft(vec![
                line("E100", 10_000),
                line("E200", 8_001), // one over the cap
                line("E300", 1_000),
            ]))
            .unwrap();
        let err = w.engine.review_claim(&id).unwrap_err();
        assert_eq!(
            err,
            ProtocolError::Review(ReviewError::LineRejected {
                code: code("E200"),
                amount: Money(8_001),
            })
        );
        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Draft);
    }

    #[test]
    fn review_rejects_unbundled_components() {
        let mut w = world();
        let id = w
            .engine
            .create_claim(draft(vec![
                line("E200", 5_000),
                line("E300", 20_000),
                line("E450", 9_000),
            ]))
            .unwrap();
        let err = w.engine.review_claim(&id).unwrap_err();
        assert_eq!(
            err,
            ProtocolError::Review(ReviewError::Unbundling {
                bundle_code: code("B900"),
            })
        );
    }

    #[test]
    fn review_rejects_empty_claims() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![])).unwrap();
        assert_eq!(
            w.engine.review_claim(&id).unwrap_err(),
            ProtocolError::Review(ReviewError::EmptyClaim)
        );
    }

    #[test]
    fn submit_requires_both_signatures() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();

        // provider-only envelope
        let env = MultiSigEnvelope::new(
            id,
            [Role::Provider, Role::Patient],
            vec![w.provider.sign_digest(id)],
        );
        let err = w.engine.submit_claim(&id, &env).unwrap_err();
        assert!(matches!(err, ProtocolError::NotSubmitted(_)));
        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Reviewed);
        // the failed attempt left no submission on the ledger
        assert!(w.engine.audit_trail(&id).is_empty());
    }

    #[test]
    fn submit_rejects_foreign_digest() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let other = [9u8; 32];
        let env = envelope_over(other, &mut w.provider, &mut w.patient);
        assert_eq!(
            w.engine.submit_claim(&id, &env).unwrap_err(),
            ProtocolError::NotSubmitted(EnvelopeFault::DigestMismatch)
        );
    }

    #[test]
    fn submit_requires_consent() {
        let mut w = world();
        let mut d = draft(vec![line("E100", 10_000)]);
        d.consent = false;
        let id = w.engine.create_claim(d).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env = envelope_over(id, &mut w.provider, &mut w.patient);
        assert_eq!(
            w.engine.submit_claim(&id, &env).unwrap_err(),
            ProtocolError::ConsentMissing
        );
    }

    #[test]
    fn submit_rejects_policy_not_binding_the_patient() {
        let mut w = world();
        // register a second patient who will try to ride pol-1
        let mut mallory = generate_identity(Role::Patient, &[7; 32])
            .unwrap()
            .with_id("pat-2");
        w.engine.register_identity(mallory.identity().clone()).unwrap();

        let id = w
            .engine
            .create_claim(ClaimDraft {
                policy_id: "pol-1".into(),
                provider_id: "prov-1".into(),
                patient_id: "pat-2".into(),
                consent: true,
                lines: vec![line("E100", 10_000)],
            })
            .unwrap();
        w.engine.review_claim(&id).unwrap();
        let env = envelope_over(id, &mut w.provider, &mut mallory);
        assert!(matches!(
            w.engine.submit_claim(&id, &env).unwrap_err(),
            ProtocolError::PolicyBindingMismatch { .. }
        ));
    }

    #[test]
    fn submit_rejects_signature_from_the_wrong_patient() {
        let mut w = world();
        let mut other_patient = generate_identity(Role::Patient, &[8; 32])
            .unwrap()
            .with_id("pat-3");
        w.engine
            .register_identity(other_patient.identity().clone())
            .unwrap();

        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        // valid multisig, but the patient role is covered by pat-3, not pat-1
        let env = envelope_over(id, &mut w.provider, &mut other_patient);
        assert!(matches!(
            w.engine.submit_claim(&id, &env).unwrap_err(),
            ProtocolError::NotSubmitted(EnvelopeFault::SignerMismatch { .. })
        ));
    }

    #[test]
    fn approval_decision_branches() {
        let policy = sample_policy("pat-1", "ins-1");
        let id = [1u8; 32];
        // in range: approved as submitted
        let d = compute_approval(id, &[line("E100", 10_000)], &policy).unwrap();
        assert_eq!(d.lines[0].approved, Money(10_000));
        assert_eq!(d.lines[0].delta, Money::ZERO);
        // covered but over cap: adjusted down to the cap
        let d = compute_approval(id, &[line("E200", 12_000)], &policy).unwrap();
        assert_eq!(d.lines[0].approved, Money(8_000));
        assert_eq!(d.lines[0].delta, Money(4_000));
        // uncovered code: zero
        let d = compute_approval(id, &[line("Z999", 5_000)], &policy).unwrap();
        assert_eq!(d.lines[0].approved, Money::ZERO);
        assert_eq!(d.lines[0].delta, Money(5_000));
        assert!(d.is_rejection());
    }

    #[test]
    fn approve_requires_envelope_over_the_decision() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();

        // envelope over the claim id, not the decision digest
        let env2 = envelope_over(id, &mut w.insurer, &mut w.patient);
        assert_eq!(
            w.engine.approve_claim(&id, &env2).unwrap_err(),
            ProtocolError::NotApproved(EnvelopeFault::DigestMismatch)
        );
        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Submitted);
    }

    #[test]
    fn disburse_requires_approved_state() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();
        assert_eq!(
            w.engine.disburse_payment(&id).unwrap_err(),
            ProtocolError::InvalidTransition {
                from: ClaimState::Submitted,
                event: ClaimEvent::Pay,
            }
        );
    }

    #[test]
    fn acknowledgment_remaining_balance_cases() {
        // received < submitted: remainder charged to the patient
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();
        let decision = {
            let policy = w.engine.policy("pol-1").unwrap();
            compute_approval(id, &w.engine.claim(&id).unwrap().lines, policy).unwrap()
        };
        let env2 = envelope_over(decision.digest(), &mut w.insurer, &mut w.patient);
        w.engine.approve_claim(&id, &env2).unwrap();
        w.engine.disburse_payment(&id).unwrap();

        let received = Money(8_000);
        let env3 = envelope_over(ack_digest(&id, received), &mut w.provider, &mut w.patient);
        let ack = w.engine.acknowledge_claim(&id, received, &env3).unwrap();
        assert_eq!(ack.remaining, Money(2_000));
        assert!(!ack.overpayment_flag);
        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Closed);
    }

    #[test]
    fn acknowledgment_exact_payment_leaves_zero_remaining() {
        let mut w = world();
        let id = run_happy_path(&mut w, vec![line("E100", 10_000)]);
        let trail = w.engine.audit_trail(&id);
        let ack: AckBody = serde_json::from_slice(&trail[3].payload).unwrap();
        assert_eq!(ack.received_cents, 10_000);
        assert_eq!(ack.remaining_cents, 0);
        assert!(!ack.overpayment);
    }

    #[test]
    fn acknowledgment_flags_overpayment() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();
        let decision = {
            let policy = w.engine.policy("pol-1").unwrap();
            compute_approval(id, &w.engine.claim(&id).unwrap().lines, policy).unwrap()
        };
        let env2 = envelope_over(decision.digest(), &mut w.insurer, &mut w.patient);
        w.engine.approve_claim(&id, &env2).unwrap();
        w.engine.disburse_payment(&id).unwrap();

        let received = Money(11_000);
        let env3 = envelope_over(ack_digest(&id, received), &mut w.provider, &mut w.patient);
        let ack = w.engine.acknowledge_claim(&id, received, &env3).unwrap();
        assert_eq!(ack.remaining, Money::ZERO);
        assert!(ack.overpayment_flag);
    }

    #[test]
    fn acknowledgment_requires_valid_envelope() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();
        let decision = {
            let policy = w.engine.policy("pol-1").unwrap();
            compute_approval(id, &w.engine.claim(&id).unwrap().lines, policy).unwrap()
        };
        let env2 = envelope_over(decision.digest(), &mut w.insurer, &mut w.patient);
        w.engine.approve_claim(&id, &env2).unwrap();
        w.engine.disburse_payment(&id).unwrap();

        // envelope signs a different received amount than is acknowledged
        let env3 = envelope_over(
            ack_digest(&id, Money(1)),
            &mut w.provider,
            &mut w.patient,
        );
        assert_eq!(
            w.engine
                .acknowledge_claim(&id, Money(10_000), &env3)
                .unwrap_err(),
            ProtocolError::NotAcknowledged(EnvelopeFault::DigestMismatch)
        );
    }

    #[test]
    fn zero_approval_rejects_the_claim() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();

        // the policy is amended between submission and adjudication so that
        // E100 is no longer covered at approval time
        let coverage: Map<_, _> = [(code("E999"), Money(1_000))].into_iter().collect();
        let amended =
            InsurancePolicy::new("pol-1", "pat-1", "ins-1", Money(0), coverage, vec![]).unwrap();
        w.engine.policies.insert("pol-1".into(), amended);

        let decision = {
            let policy = w.engine.policy("pol-1").unwrap();
            compute_approval(id, &w.engine.claim(&id).unwrap().lines, policy).unwrap()
        };
        assert!(decision.is_rejection());
        let env2 = envelope_over(decision.digest(), &mut w.insurer, &mut w.patient);
        let returned = w.engine.approve_claim(&id, &env2).unwrap();
        assert_eq!(returned.total_approved, Money::ZERO);
        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Rejected);

        // the rejection is on the record: trail is submission + adjudication
        let kinds: Vec<EventKind> = w.engine.audit_trail(&id).iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![EventKind::ClaimSubmitted, EventKind::ClaimApproved]);
        let body: ApprovedBody =
            serde_json::from_slice(&w.engine.audit_trail(&id)[1].payload).unwrap();
        assert!(body.rejected);

        // a rejected claim cannot be paid
        assert_eq!(
            w.engine.disburse_payment(&id).unwrap_err(),
            ProtocolError::InvalidTransition {
                from: ClaimState::Rejected,
                event: ClaimEvent::Pay,
            }
        );
    }

    #[test]
    fn amended_caps_produce_downward_delta_at_approval() {
        let mut w = world();
        let id = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        w.engine.review_claim(&id).unwrap();
        let env1 = envelope_over(id, &mut w.provider, &mut w.patient);
        w.engine.submit_claim(&id, &env1).unwrap();

        // cap drops to 6_000 before adjudication
        let coverage: Map<_, _> = [(code("E100"), Money(6_000))].into_iter().collect();
        let amended =
            InsurancePolicy::new("pol-1", "pat-1", "ins-1", Money(0), coverage, vec![]).unwrap();
        w.engine.policies.insert("pol-1".into(), amended);

        let decision = {
            let policy = w.engine.policy("pol-1").unwrap();
            compute_approval(id, &w.engine.claim(&id).unwrap().lines, policy).unwrap()
        };
        let env2 = envelope_over(decision.digest(), &mut w.insurer, &mut w.patient);
        let returned = w.engine.approve_claim(&id, &env2).unwrap();
        assert_eq!(returned.lines[0].approved, Money(6_000));
        assert_eq!(returned.lines[0].delta, Money(4_000));
        assert_eq!(w.engine.claim(&id).unwrap().state, ClaimState::Approved);
        assert_eq!(w.engine.disburse_payment(&id).unwrap(), Money(6_000));
    }

    #[test]
    fn transition_edges_match_examples() {
        assert_eq!(
            transition(ClaimState::Reviewed, ClaimEvent::Submit).unwrap(),
            ClaimState::Submitted
        );
        assert_eq!(
            transition(ClaimState::Paid, ClaimEvent::Acknowledge).unwrap(),
            ClaimState::Acknowledged
        );
        assert_eq!(
            transition(ClaimState::Draft, ClaimEvent::Approve).unwrap_err(),
            ProtocolError::InvalidTransition {
                from: ClaimState::Draft,
                event: ClaimEvent::Approve,
            }
        );
    }

    #[test]
    fn claim_ids_differ_across_visits_with_identical_content() {
        let mut w = world();
        let a = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        let b = w.engine.create_claim(draft(vec![line("E100", 10_000)])).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn golden_claim_id() {
        // recomputed with an independent SHA-256 implementation over the
        // documented claim preimage layout
        let id = Claim::compute_id(
            "pol-1",
            "prov-1",
            "pat-1",
            &[line("E100", 12_000), line("E200", 5_000)],
            7,
        );
        assert_eq!(
            to_hex(&id),
            "801d74457221b379403dc7fb8e743c35752026c51cdb476bd7d3a2918d706ace"
        );
    }

    #[test]
    fn claim_fixture_round_trip() {
        let d = draft(vec![line("E100", 10_000), line("E200", 500)]);
        let json = d.to_fixture_json();
        let reborn = ClaimDraft::from_fixture_json(&json).unwrap();
        assert_eq!(reborn.policy_id, d.policy_id);
        assert_eq!(reborn.lines, d.lines);
        assert!(reborn.consent);
        assert!(ClaimDraft::from_fixture_json("{}").is_err());
    }
}

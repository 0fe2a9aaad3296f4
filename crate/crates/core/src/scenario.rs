//! Honest and malicious actor agents, the fraud-scenario catalog, and the
//! suite runner.
//!
//! Each scenario run owns a private world (registry, policy book, ledger)
//! and is fully deterministic in its seed: identity keys, ground-truth
//! encounters, and claim content all derive from one seeded ChaCha20 stream,
//! and the ledger clock is logical. An honest patient endorses a claim iff
//! every line appears in their ground-truth encounter list with a matching
//! amount; that oracle is independent of the protocol code it checks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::claim::{
    ack_digest, compute_approval, ClaimDraft, ClaimId, Engine, EnvelopeFault, ProtocolError,
    ReviewError, SimClock,
};
use crate::identity::{generate_identity, MultiSigEnvelope, Role, SigningIdentity};
use crate::ledger::ChainStatus;
use crate::policy::{
    BundleRule, ClaimLineItem, EncounterCode, InsurancePolicy, Money, PolicyError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown fraud type {0:?}")]
    UnknownFraudType(String),
    #[error("scenario misconfigured: {0}")]
    Config(String),
    #[error("unexpected protocol failure: {0}")]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("suite config: {0}")]
    SuiteConfig(String),
    #[error("ledger failed verification after the run: {0}")]
    ChainBroken(String),
}

/// The executable scenario catalog: the happy path plus the five fraud
/// classes the protocol can block on-ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    HappyPath,
    PhantomBilling,
    Upcoding,
    Unbundling,
    IdentityTheft,
    PolicyholderMismatch,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::HappyPath,
        ScenarioKind::PhantomBilling,
        ScenarioKind::Upcoding,
        ScenarioKind::Unbundling,
        ScenarioKind::IdentityTheft,
        ScenarioKind::PolicyholderMismatch,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            ScenarioKind::HappyPath => "happy-path",
            ScenarioKind::PhantomBilling => "phantom-billing",
            ScenarioKind::Upcoding => "upcoding",
            ScenarioKind::Unbundling => "unbundling",
            ScenarioKind::IdentityTheft => "identity-theft",
            ScenarioKind::PolicyholderMismatch => "policyholder-mismatch",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.slug() == s || format!("{k:?}") == s)
            .ok_or_else(|| ScenarioError::UnknownScenario(s.to_string()))
    }
}

/// The seven-row fraud taxonomy; two rows (kickbacks, pharmacy fraud) occur
/// off-protocol and exist for classification only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FraudType {
    PhantomBilling,
    Upcoding,
    Unbundling,
    Kickbacks,
    IdentityTheft,
    PolicyholderFraud,
    PharmacyFraud,
}

impl FraudType {
    pub const ALL: [FraudType; 7] = [
        FraudType::PhantomBilling,
        FraudType::Upcoding,
        FraudType::Unbundling,
        FraudType::Kickbacks,
        FraudType::IdentityTheft,
        FraudType::PolicyholderFraud,
        FraudType::PharmacyFraud,
    ];
}

impl FromStr for FraudType {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let slug = |k: FraudType| match k {
            FraudType::PhantomBilling => "phantom-billing",
            FraudType::Upcoding => "upcoding",
            FraudType::Unbundling => "unbundling",
            FraudType::Kickbacks => "kickbacks",
            FraudType::IdentityTheft => "identity-theft",
            FraudType::PolicyholderFraud => "policyholder-fraud",
            FraudType::PharmacyFraud => "pharmacy-fraud",
        };
        Self::ALL
            .into_iter()
            .find(|k| slug(*k) == s || format!("{k:?}") == s)
            .ok_or_else(|| ScenarioError::UnknownFraudType(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Maliciousness {
    Malicious,
    NonMalicious,
}

/// Which stakeholder acts maliciously in each fraud class.
pub fn classify_impact(fraud: FraudType) -> BTreeMap<Role, Maliciousness> {
    use FraudType as F;
    use Maliciousness::{Malicious, NonMalicious};
    let (provider, insurer, patient) = match fraud {
        F::PhantomBilling | F::Upcoding | F::Unbundling | F::Kickbacks | F::PharmacyFraud => {
            (Malicious, NonMalicious, NonMalicious)
        }
        F::IdentityTheft | F::PolicyholderFraud => (NonMalicious, NonMalicious, Malicious),
    };
    [
        (Role::Provider, provider),
        (Role::Insurer, insurer),
        (Role::Patient, patient),
    ]
    .into_iter()
    .collect()
}

/// Protocol phase where a scenario was stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Phase1,
    Phase2,
    Phase3,
}

/// Machine-readable block reasons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReasonCode {
    PatientRefusedSign,
    SignatureInvalid,
    PolicyBindingMismatch,
    CapExceeded,
    UncoveredCode,
    UnbundlingViolation,
    ConsentMissing,
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// What a scenario run produced: whether the claim was blocked, where, why,
/// and the ledger records backing that up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioOutcome {
    pub blocked: bool,
    pub blocked_at: Option<Phase>,
    pub reason: Option<ReasonCode>,
    pub evidence: Vec<u64>,
}

/// The expected half of the catalog row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioExpectation {
    pub blocked: bool,
    pub blocked_at: Option<Phase>,
    pub reason: Option<ReasonCode>,
}

impl ScenarioExpectation {
    pub fn matches(&self, outcome: &ScenarioOutcome) -> bool {
        self.blocked == outcome.blocked
            && self.blocked_at == outcome.blocked_at
            && self.reason == outcome.reason
    }
}

/// Catalog expectation for each scenario kind.
pub fn expected_outcome(kind: ScenarioKind) -> ScenarioExpectation {
    let blocked = |reason| ScenarioExpectation {
        blocked: true,
        blocked_at: Some(Phase::Phase1),
        reason: Some(reason),
    };
    match kind {
        ScenarioKind::HappyPath => ScenarioExpectation {
            blocked: false,
            blocked_at: None,
            reason: None,
        },
        ScenarioKind::PhantomBilling => blocked(ReasonCode::PatientRefusedSign),
        ScenarioKind::Upcoding => blocked(ReasonCode::CapExceeded),
        ScenarioKind::Unbundling => blocked(ReasonCode::UnbundlingViolation),
        ScenarioKind::IdentityTheft => blocked(ReasonCode::SignatureInvalid),
        ScenarioKind::PolicyholderMismatch => blocked(ReasonCode::PolicyBindingMismatch),
    }
}

/// A runnable scenario: the catalog row plus an optional policy fixture.
#[derive(Clone, Debug)]
pub struct FraudScenario {
    pub name: ScenarioKind,
    pub policy: Option<InsurancePolicy>,
    pub expected: ScenarioExpectation,
}

impl FraudScenario {
    pub fn catalog(name: ScenarioKind) -> Self {
        Self {
            name,
            policy: None,
            expected: expected_outcome(name),
        }
    }
}

/// A simulated participant: a keypair, a behavior, and (for patients) the
/// ground-truth list of services actually received.
pub struct ActorAgent {
    pub signer: SigningIdentity,
    pub behavior: Behavior,
    pub ground_truth: Vec<ClaimLineItem>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Behavior {
    Honest,
    Malicious,
}

impl ActorAgent {
    pub fn honest(signer: SigningIdentity, ground_truth: Vec<ClaimLineItem>) -> Self {
        Self {
            signer,
            behavior: Behavior::Honest,
            ground_truth,
        }
    }

    pub fn malicious(signer: SigningIdentity) -> Self {
        Self {
            signer,
            behavior: Behavior::Malicious,
            ground_truth: Vec::new(),
        }
    }

    /// The patient-side screening oracle: an honest patient endorses a claim
    /// iff every line appears in their ground truth with a matching amount.
    /// A malicious patient endorses anything.
    pub fn endorses(&self, lines: &[ClaimLineItem]) -> bool {
        match self.behavior {
            Behavior::Honest => lines.iter().all(|l| self.ground_truth.contains(l)),
            Behavior::Malicious => true,
        }
    }
}

/// A finished run: the outcome plus the world it happened in, so callers can
/// persist the ledger or inspect the audit trail.
pub struct ScenarioRun {
    pub outcome: ScenarioOutcome,
    pub engine: Engine,
    pub claim_id: ClaimId,
}

// ---------------------------------------------------------------------------
// Deterministic world building
// ---------------------------------------------------------------------------

fn seeded_identity(rng: &mut ChaCha20Rng, role: Role, id: &str) -> SigningIdentity {
    let seed: [u8; 32] = rng.gen();
    generate_identity(role, &seed)
        .expect("seed is 32 bytes")
        .with_id(id)
}

/// The built-in policy used when no fixture is supplied: four itemizable
/// services plus a covered bundled procedure.
pub fn default_policy(patient_id: &str, insurer_id: &str) -> InsurancePolicy {
    let code = |s: &str| EncounterCode::new(s).expect("static code");
    let coverage: BTreeMap<EncounterCode, Money> = [
        (code("E100"), Money(15_000)),
        (code("E200"), Money(8_000)),
        (code("E300"), Money(30_000)),
        (code("E450"), Money(22_000)),
        (code("B900"), Money(45_000)),
    ]
    .into_iter()
    .collect();
    let bundle = BundleRule {
        bundle_code: code("B900"),
        components: [code("E200"), code("E300"), code("E450")].into_iter().collect(),
        bundled_cap: Money(45_000),
    };
    InsurancePolicy::new(
        "pol-default",
        patient_id,
        insurer_id,
        Money(2_000),
        coverage,
        vec![bundle],
    )
    .expect("static policy is valid")
}

/// Random ground truth under a policy: distinct covered codes with in-cap
/// amounts, never containing a bundle's complete component set.
fn random_ground_truth(
    rng: &mut ChaCha20Rng,
    policy: &InsurancePolicy,
    max_lines: usize,
) -> Vec<ClaimLineItem> {
    let codes: Vec<&EncounterCode> = policy.covered_codes().collect();
    let upper = max_lines.min(codes.len().saturating_sub(1)).max(1);
    let k = rng.gen_range(1..=upper);
    let mut picked: Vec<usize> = (0..codes.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..picked.len());
        picked.swap(i, j);
    }
    picked.truncate(k);

    let mut lines: Vec<ClaimLineItem> = picked
        .into_iter()
        .map(|i| {
            let code = codes[i].clone();
            let cap = policy.cap(&code).expect("covered").cents();
            ClaimLineItem::new(code, Money(rng.gen_range(1..=cap))).expect("positive amount")
        })
        .collect();

    // an honest visit never happens to be exactly the unbundled form of a
    // packaged procedure; drop one component if a full set slipped in
    for rule in policy.bundles() {
        let covered: Vec<usize> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| rule.components.contains(&l.encounter_code))
            .map(|(i, _)| i)
            .collect();
        if covered.len() == rule.components.len() && !lines.is_empty() {
            lines.remove(covered[0]);
        }
    }
    if lines.is_empty() {
        let code = codes[0].clone();
        let cap = policy.cap(&code).expect("covered").cents();
        lines.push(ClaimLineItem::new(code, Money(rng.gen_range(1..=cap))).expect("positive"));
    }
    lines
}

struct World {
    engine: Engine,
    patient: ActorAgent,
    provider: SigningIdentity,
    insurer: SigningIdentity,
}

fn build_world(
    rng: &mut ChaCha20Rng,
    policy: InsurancePolicy,
    ground_truth: Vec<ClaimLineItem>,
) -> Result<World, ScenarioError> {
    let patient = seeded_identity(rng, Role::Patient, &policy.patient_id.clone());
    let provider = seeded_identity(rng, Role::Provider, "provider-1");
    let insurer = seeded_identity(rng, Role::Insurer, &policy.insurer_id.clone());

    let mut engine = Engine::new(SimClock::default());
    engine.register_identity(patient.identity().clone())?;
    engine.register_identity(provider.identity().clone())?;
    engine.register_identity(insurer.identity().clone())?;
    engine.register_policy(policy)?;

    Ok(World {
        engine,
        patient: ActorAgent::honest(patient, ground_truth),
        provider,
        insurer,
    })
}

fn two_party_envelope(
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

/// Who produces the patient-slot signature in phase 1.
enum PatientSlot {
    /// The claim's patient agent signs (honest agents screen first).
    Agent,
    /// An impostor forges the named patient's signature with their own key.
    Impostor(Box<SigningIdentity>),
}

struct Script {
    draft: ClaimDraft,
    patient_slot: PatientSlot,
    /// Skips the patient screening step (forged flows never reach the
    /// real patient).
    screened_by_patient: bool,
}

fn reason_for(error: &ProtocolError, policy: &InsurancePolicy) -> Option<ReasonCode> {
    match error {
        ProtocolError::Review(ReviewError::LineRejected { code, .. }) => {
            Some(if policy.cap(code).is_some() {
                ReasonCode::CapExceeded
            } else {
                ReasonCode::UncoveredCode
            })
        }
        ProtocolError::Review(ReviewError::Unbundling { .. }) => {
            Some(ReasonCode::UnbundlingViolation)
        }
        ProtocolError::NotSubmitted(EnvelopeFault::Rejected(_))
        | ProtocolError::NotSubmitted(EnvelopeFault::DigestMismatch)
        | ProtocolError::NotSubmitted(EnvelopeFault::SignerMismatch { .. }) => {
            Some(ReasonCode::SignatureInvalid)
        }
        ProtocolError::PolicyBindingMismatch { .. } => Some(ReasonCode::PolicyBindingMismatch),
        ProtocolError::ConsentMissing => Some(ReasonCode::ConsentMissing),
        _ => None,
    }
}

/// Runs one scripted claim through the protocol, recording evidence notes
/// for anything that blocks it.
fn execute(mut world: World, script: Script, scenario: ScenarioKind) -> Result<ScenarioRun, ScenarioError> {
    let policy = world
        .engine
        .policy(&script.draft.policy_id)
        .ok_or_else(|| ScenarioError::Config(format!("policy {:?} missing", script.draft.policy_id)))?
        .clone();

    let claim_id = world.engine.create_claim(script.draft)?;

    macro_rules! blocked {
        ($phase:expr, $reason:expr, $detail:expr) => {{
            let note = json!({
                "scenario": scenario,
                "phase": $phase,
                "reason": $reason,
                "detail": $detail,
            });
            let index = world.engine.append_note(Some(&claim_id), &note);
            finish(&world.engine)?;
            return Ok(ScenarioRun {
                outcome: ScenarioOutcome {
                    blocked: true,
                    blocked_at: Some($phase),
                    reason: Some($reason),
                    evidence: vec![index],
                },
                engine: world.engine,
                claim_id,
            });
        }};
    }

    // phase 1: review
    if let Err(err) = world.engine.review_claim(&claim_id) {
        let reason = reason_for(&err, &policy)
            .ok_or_else(|| ScenarioError::Config(format!("unmapped review failure: {err}")))?;
        blocked!(Phase::Phase1, reason, err.to_string());
    }

    // phase 1: patient screening
    let lines = world.engine.claim(&claim_id).expect("created").lines.clone();
    if script.screened_by_patient && !world.patient.endorses(&lines) {
        blocked!(
            Phase::Phase1,
            ReasonCode::PatientRefusedSign,
            "claim content does not match the patient's ground-truth encounters".to_string()
        );
    }

    // phase 1: co-signing and submission
    let provider_sig = world.provider.sign_digest(claim_id);
    let patient_sig = match script.patient_slot {
        PatientSlot::Agent => world.patient.signer.sign_digest(claim_id),
        PatientSlot::Impostor(mut impostor) => {
            let mut forged = impostor.sign_digest(claim_id);
            forged.signer_id = world.patient.signer.id().to_string();
            forged
        }
    };
    let envelope = MultiSigEnvelope::new(
        claim_id,
        [Role::Provider, Role::Patient],
        vec![provider_sig, patient_sig],
    );
    if let Err(err) = world.engine.submit_claim(&claim_id, &envelope) {
        let reason = reason_for(&err, &policy)
            .ok_or_else(|| ScenarioError::Config(format!("unmapped submit failure: {err}")))?;
        blocked!(Phase::Phase1, reason, err.to_string());
    }

    // phase 2: adjudication, insurer+patient co-sign the decision
    let decision = compute_approval(claim_id, &lines, &policy)?;
    let env2 = two_party_envelope(
        decision.digest(),
        &mut world.insurer,
        &mut world.patient.signer,
    );
    world.engine.approve_claim(&claim_id, &env2)?;

    // payment
    let received = world.engine.disburse_payment(&claim_id)?;

    // phase 3: provider+patient co-sign the acknowledgment
    let env3 = two_party_envelope(
        ack_digest(&claim_id, received),
        &mut world.provider,
        &mut world.patient.signer,
    );
    world.engine.acknowledge_claim(&claim_id, received, &env3)?;

    finish(&world.engine)?;
    let evidence = world
        .engine
        .audit_trail(&claim_id)
        .iter()
        .map(|r| r.index)
        .collect();
    Ok(ScenarioRun {
        outcome: ScenarioOutcome {
            blocked: false,
            blocked_at: None,
            reason: None,
            evidence,
        },
        engine: world.engine,
        claim_id,
    })
}

fn finish(engine: &Engine) -> Result<(), ScenarioError> {
    match engine.ledger().verify_chain() {
        ChainStatus::Ok => Ok(()),
        status => Err(ScenarioError::ChainBroken(status.to_string())),
    }
}

/// Executes a catalog scenario deterministically under the given seed.
pub fn run_scenario(scenario: &FraudScenario, seed: u64) -> Result<ScenarioRun, ScenarioError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let policy = scenario
        .policy
        .clone()
        .unwrap_or_else(|| default_policy("patient-1", "insurer-1"));

    match scenario.name {
        ScenarioKind::HappyPath => {
            let ground_truth = random_ground_truth(&mut rng, &policy, 3);
            let patient_id = policy.patient_id.clone();
            let provider_id = "provider-1".to_string();
            let policy_id = policy.policy_id.clone();
            let world = build_world(&mut rng, policy, ground_truth.clone())?;
            execute(
                world,
                Script {
                    draft: ClaimDraft {
                        policy_id,
                        provider_id,
                        patient_id,
                        consent: true,
                        lines: ground_truth,
                    },
                    patient_slot: PatientSlot::Agent,
                    screened_by_patient: true,
                },
                scenario.name,
            )
        }
        ScenarioKind::PhantomBilling => {
            let ground_truth = random_ground_truth(&mut rng, &policy, 2);
            // the provider appends a covered service the patient never received
            let phantom_code = policy
                .covered_codes()
                .find(|c| !ground_truth.iter().any(|l| &l.encounter_code == *c))
                .ok_or_else(|| ScenarioError::Config("no unused covered code".into()))?
                .clone();
            let cap = policy.cap(&phantom_code).expect("covered").cents();
            let mut lines = ground_truth.clone();
            lines.push(
                ClaimLineItem::new(phantom_code, Money(rng.gen_range(1..=cap)))
                    .expect("positive amount"),
            );
            // keep the line set bundle-clean so review passes and the
            // patient oracle is what blocks it
            if !crate::policy::detect_unbundling(&lines, &policy).is_empty() {
                lines.pop();
                let fallback = policy
                    .covered_codes()
                    .find(|c| {
                        !ground_truth.iter().any(|l| &l.encounter_code == *c) && {
                            let mut probe = ground_truth.clone();
                            probe.push(
                                ClaimLineItem::new((*c).clone(), Money(1)).expect("positive"),
                            );
                            crate::policy::detect_unbundling(&probe, &policy).is_empty()
                        }
                    })
                    .ok_or_else(|| ScenarioError::Config("no bundle-clean phantom code".into()))?
                    .clone();
                let cap = policy.cap(&fallback).expect("covered").cents();
                lines.push(
                    ClaimLineItem::new(fallback, Money(rng.gen_range(1..=cap)))
                        .expect("positive amount"),
                );
            }
            let patient_id = policy.patient_id.clone();
            let policy_id = policy.policy_id.clone();
            let world = build_world(&mut rng, policy, ground_truth)?;
            execute(
                world,
                Script {
                    draft: ClaimDraft {
                        policy_id,
                        provider_id: "provider-1".into(),
                        patient_id,
                        consent: true,
                        lines,
                    },
                    patient_slot: PatientSlot::Agent,
                    screened_by_patient: true,
                },
                scenario.name,
            )
        }
        ScenarioKind::Upcoding => {
            let ground_truth = random_ground_truth(&mut rng, &policy, 3);
            // the provider inflates one amount past the coverage cap
            let mut lines = ground_truth.clone();
            let target = rng.gen_range(0..lines.len());
            let cap = policy.cap(&lines[target].encounter_code).expect("covered");
            lines[target].amount = Money(cap.cents() + rng.gen_range(1..=cap.cents()));
            let patient_id = policy.patient_id.clone();
            let policy_id = policy.policy_id.clone();
            let world = build_world(&mut rng, policy, ground_truth)?;
            execute(
                world,
                Script {
                    draft: ClaimDraft {
                        policy_id,
                        provider_id: "provider-1".into(),
                        patient_id,
                        consent: true,
                        lines,
                    },
                    patient_slot: PatientSlot::Agent,
                    screened_by_patient: true,
                },
                scenario.name,
            )
        }
        ScenarioKind::Unbundling => {
            let rule = policy
                .bundles()
                .first()
                .ok_or_else(|| ScenarioError::Config("policy has no bundle rule".into()))?
                .clone();
            // the patient received the packaged procedure; the provider
            // bills its components separately
            let bundle_cap = policy.cap(&rule.bundle_code).ok_or_else(|| {
                ScenarioError::Config("bundle code itself must be covered".into())
            })?;
            let ground_truth = vec![ClaimLineItem::new(
                rule.bundle_code.clone(),
                Money(rng.gen_range(1..=bundle_cap.cents())),
            )
            .expect("positive amount")];
            let lines: Vec<ClaimLineItem> = rule
                .components
                .iter()
                .map(|c| {
                    let cap = policy.cap(c).expect("validated components are covered");
                    ClaimLineItem::new(c.clone(), Money(rng.gen_range(1..=cap.cents())))
                        .expect("positive amount")
                })
                .collect();
            let patient_id = policy.patient_id.clone();
            let policy_id = policy.policy_id.clone();
            let world = build_world(&mut rng, policy, ground_truth)?;
            execute(
                world,
                Script {
                    draft: ClaimDraft {
                        policy_id,
                        provider_id: "provider-1".into(),
                        patient_id,
                        consent: true,
                        lines,
                    },
                    patient_slot: PatientSlot::Agent,
                    screened_by_patient: true,
                },
                scenario.name,
            )
        }
        ScenarioKind::IdentityTheft => {
            // an impostor with an unregistered key claims services under the
            // patient's identity; the claim content looks legitimate
            let ground_truth = random_ground_truth(&mut rng, &policy, 2);
            let impostor_seed: [u8; 32] = rng.gen();
            let impostor = generate_identity(Role::Patient, &impostor_seed)
                .expect("seed is 32 bytes")
                .with_id("impostor");
            let patient_id = policy.patient_id.clone();
            let policy_id = policy.policy_id.clone();
            let lines = ground_truth.clone();
            let world = build_world(&mut rng, policy, ground_truth)?;
            execute(
                world,
                Script {
                    draft: ClaimDraft {
                        policy_id,
                        provider_id: "provider-1".into(),
                        patient_id,
                        consent: true,
                        lines,
                    },
                    patient_slot: PatientSlot::Impostor(Box::new(impostor)),
                    screened_by_patient: false,
                },
                scenario.name,
            )
        }
        ScenarioKind::PolicyholderMismatch => {
            // a second, malicious patient files against a policy that binds
            // someone else
            let ground_truth = random_ground_truth(&mut rng, &policy, 2);
            let policy_id = policy.policy_id.clone();
            let lines = ground_truth.clone();
            let mut world = build_world(&mut rng, policy, ground_truth)?;
            let mallory = seeded_identity(&mut rng, Role::Patient, "mallory");
            world.engine.register_identity(mallory.identity().clone())?;
            // mallory is the acting patient for this claim
            world.patient = ActorAgent::malicious(mallory);
            execute(
                world,
                Script {
                    draft: ClaimDraft {
                        policy_id,
                        provider_id: "provider-1".into(),
                        patient_id: "mallory".into(),
                        consent: true,
                        lines,
                    },
                    patient_slot: PatientSlot::Agent,
                    screened_by_patient: true,
                },
                scenario.name,
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Randomized episodes (honest / malicious) for soundness checks
// ---------------------------------------------------------------------------

/// Tactics the randomized malicious generator can apply to an honest claim.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaliciousTactic {
    PhantomLine,
    InflateBeyondCap,
    InflateWithinCap,
    SwapCode,
    UnbundleComponents,
    ImpostorKey,
    ForeignPolicy,
}

impl MaliciousTactic {
    pub const ALL: [MaliciousTactic; 7] = [
        MaliciousTactic::PhantomLine,
        MaliciousTactic::InflateBeyondCap,
        MaliciousTactic::InflateWithinCap,
        MaliciousTactic::SwapCode,
        MaliciousTactic::UnbundleComponents,
        MaliciousTactic::ImpostorKey,
        MaliciousTactic::ForeignPolicy,
    ];
}

/// Random policy: 5–12 covered codes with random caps, a random flat copay,
/// and usually one bundle rule (plus its covered bundle code).
pub fn random_policy(rng: &mut ChaCha20Rng, patient_id: &str, insurer_id: &str) -> InsurancePolicy {
    let n_codes = rng.gen_range(5..=12usize);
    let mut coverage: BTreeMap<EncounterCode, Money> = (0..n_codes)
        .map(|i| {
            let code = EncounterCode::new(format!("E{}", 100 + i * 10)).expect("static shape");
            (code, Money(rng.gen_range(1_000..=50_000)))
        })
        .collect();
    let copay = Money(rng.gen_range(0..=3_000));

    let mut bundles = Vec::new();
    if rng.gen_bool(0.7) {
        let size = rng.gen_range(2..=3usize);
        let components: std::collections::BTreeSet<EncounterCode> =
            coverage.keys().take(size).cloned().collect();
        let component_total: u64 = components
            .iter()
            .map(|c| coverage[c].cents())
            .sum();
        let bundled_cap = Money(rng.gen_range(1..component_total));
        let bundle_code = EncounterCode::new("B900").expect("static shape");
        coverage.insert(bundle_code.clone(), bundled_cap);
        bundles.push(BundleRule {
            bundle_code,
            components,
            bundled_cap,
        });
    }

    InsurancePolicy::new(
        format!("pol-{}", rng.gen_range(1..=u32::MAX)),
        patient_id,
        insurer_id,
        copay,
        coverage,
        bundles,
    )
    .expect("generated policy satisfies its invariants")
}

/// Runs one randomized honest claim end to end in its own world. Within
/// policy and truthful by construction, so it must reach Closed.
pub fn run_honest_episode(seed: u64) -> Result<ScenarioRun, ScenarioError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let policy = random_policy(&mut rng, "patient-1", "insurer-1");
    let ground_truth = random_ground_truth(&mut rng, &policy, 10);
    let patient_id = policy.patient_id.clone();
    let policy_id = policy.policy_id.clone();
    let world = build_world(&mut rng, policy, ground_truth.clone())?;
    execute(
        world,
        Script {
            draft: ClaimDraft {
                policy_id,
                provider_id: "provider-1".into(),
                patient_id,
                consent: true,
                lines: ground_truth,
            },
            patient_slot: PatientSlot::Agent,
            screened_by_patient: true,
        },
        ScenarioKind::HappyPath,
    )
}

/// Runs one randomized malicious episode: an honest base claim mutated by a
/// random tactic. Every mutation deviates from ground truth or violates the
/// policy, so the claim must be blocked before submission.
pub fn run_malicious_episode(seed: u64) -> Result<(MaliciousTactic, ScenarioRun), ScenarioError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let policy = random_policy(&mut rng, "patient-1", "insurer-1");
    let ground_truth = random_ground_truth(&mut rng, &policy, 8);

    let mut tactic = MaliciousTactic::ALL[rng.gen_range(0..MaliciousTactic::ALL.len())];
    if tactic == MaliciousTactic::UnbundleComponents && policy.bundles().is_empty() {
        tactic = MaliciousTactic::PhantomLine;
    }

    let mut lines = ground_truth.clone();
    let mut patient_slot = PatientSlot::Agent;
    let mut patient_id = policy.patient_id.clone();
    let mut register_mallory = false;

    match tactic {
        MaliciousTactic::PhantomLine => {
            let phantom = policy
                .covered_codes()
                .find(|c| !ground_truth.iter().any(|l| &l.encounter_code == *c))
                .expect("generator leaves at least one unused code")
                .clone();
            let cap = policy.cap(&phantom).expect("covered").cents();
            lines.push(ClaimLineItem::new(phantom, Money(rng.gen_range(1..=cap))).expect("positive"));
        }
        MaliciousTactic::InflateBeyondCap => {
            let target = rng.gen_range(0..lines.len());
            let cap = policy.cap(&lines[target].encounter_code).expect("covered").cents();
            lines[target].amount = Money(cap + rng.gen_range(1..=cap));
        }
        MaliciousTactic::InflateWithinCap => {
            let within = lines
                .iter()
                .position(|l| l.amount < policy.cap(&l.encounter_code).expect("covered"));
            match within {
                Some(target) => {
                    let cap = policy.cap(&lines[target].encounter_code).expect("covered").cents();
                    lines[target].amount = Money(rng.gen_range(lines[target].amount.cents() + 1..=cap));
                }
                None => {
                    // every amount already sits at its cap; inflate past it
                    let target = rng.gen_range(0..lines.len());
                    let cap = policy.cap(&lines[target].encounter_code).expect("covered").cents();
                    lines[target].amount = Money(cap + rng.gen_range(1..=cap));
                }
            }
        }
        MaliciousTactic::SwapCode => {
            let target = rng.gen_range(0..lines.len());
            let replacement = policy
                .covered_codes()
                .find(|c| !ground_truth.iter().any(|l| &l.encounter_code == *c))
                .expect("generator leaves at least one unused code")
                .clone();
            let cap = policy.cap(&replacement).expect("covered");
            lines[target].encounter_code = replacement;
            lines[target].amount = lines[target].amount.min(cap);
        }
        MaliciousTactic::UnbundleComponents => {
            let rule = policy.bundles().first().expect("checked above").clone();
            lines = rule
                .components
                .iter()
                .map(|c| {
                    let cap = policy.cap(c).expect("covered").cents();
                    ClaimLineItem::new(c.clone(), Money(rng.gen_range(1..=cap))).expect("positive")
                })
                .collect();
        }
        MaliciousTactic::ImpostorKey => {
            let impostor_seed: [u8; 32] = rng.gen();
            let impostor = generate_identity(Role::Patient, &impostor_seed)
                .expect("seed is 32 bytes")
                .with_id("impostor");
            patient_slot = PatientSlot::Impostor(Box::new(impostor));
        }
        MaliciousTactic::ForeignPolicy => {
            patient_id = "mallory".to_string();
            register_mallory = true;
        }
    }

    let policy_id = policy.policy_id.clone();
    let mut world = build_world(&mut rng, policy, ground_truth)?;
    if register_mallory {
        let mallory = seeded_identity(&mut rng, Role::Patient, "mallory");
        world.engine.register_identity(mallory.identity().clone())?;
        world.patient = ActorAgent::malicious(mallory);
    }
    let screened = !matches!(patient_slot, PatientSlot::Impostor(_));
    let run = execute(
        world,
        Script {
            draft: ClaimDraft {
                policy_id,
                provider_id: "provider-1".into(),
                patient_id,
                consent: true,
                lines,
            },
            patient_slot,
            screened_by_patient: screened,
        },
        ScenarioKind::HappyPath,
    )?;
    Ok((tactic, run))
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

/// On-disk suite configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub scenarios: Vec<SuiteEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub policy_fixture: Option<PathBuf>,
    /// Overrides the catalog expectation when present.
    #[serde(default)]
    pub expect: Option<ScenarioExpectation>,
}

impl SuiteConfig {
    /// The six-scenario default suite.
    pub fn default_suite(seed: u64) -> Self {
        Self {
            scenarios: ScenarioKind::ALL
                .iter()
                .enumerate()
                .map(|(i, kind)| SuiteEntry {
                    name: kind.slug().to_string(),
                    seed: seed + i as u64,
                    policy_fixture: None,
                    expect: None,
                })
                .collect(),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(json).map_err(|e| ScenarioError::SuiteConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite config serialization cannot fail")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntryReport {
    pub name: String,
    pub seed: u64,
    pub expected: ScenarioExpectation,
    pub outcome: ScenarioOutcome,
    pub matched: bool,
    pub ledger_file: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntryReport>,
    pub matched: usize,
    pub total: usize,
    pub all_matched: bool,
    pub warning: Option<String>,
}

impl SuiteReport {
    /// Human-readable summary table; stable across identical runs.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        if let Some(warning) = &self.warning {
            out.push_str(&format!("warning: {warning}\n"));
        }
        out.push_str(&format!(
            "{:<24} {:>10} {:<10} {:<22} {:<8}\n",
            "scenario", "seed", "blocked", "reason", "match"
        ));
        for e in &self.entries {
            let reason = e
                .outcome
                .reason
                .map(|r| r.to_string())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<24} {:>10} {:<10} {:<22} {:<8}\n",
                e.name,
                e.seed,
                e.outcome.blocked,
                reason,
                if e.matched { "ok" } else { "MISMATCH" },
            ));
        }
        out.push_str(&format!(
            "{}/{} scenarios matched expectations\n",
            self.matched, self.total
        ));
        out
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), ScenarioError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ScenarioError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, content).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Executes every configured scenario, writing per-scenario ledgers plus a
/// summary table and a machine-readable report under `out_dir`. Fixture
/// paths are resolved relative to `config_dir`.
pub fn run_suite(
    config: &SuiteConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<SuiteReport, ScenarioError> {
    let mut entries = Vec::new();
    for (i, entry) in config.scenarios.iter().enumerate() {
        let kind = ScenarioKind::from_str(&entry.name)?;
        let policy = match &entry.policy_fixture {
            None => None,
            Some(rel) => {
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    config_dir.join(rel)
                };
                let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                Some(InsurancePolicy::from_fixture_json(&text)?)
            }
        };
        let mut scenario = FraudScenario::catalog(kind);
        scenario.policy = policy;
        if let Some(expect) = entry.expect {
            scenario.expected = expect;
        }

        let run = run_scenario(&scenario, entry.seed)?;
        let ledger_file = format!("ledgers/{:02}-{}.jsonl", i, kind.slug());
        write_file(&out_dir.join(&ledger_file), &run.engine.ledger().to_jsonl())?;

        entries.push(SuiteEntryReport {
            name: entry.name.clone(),
            seed: entry.seed,
            expected: scenario.expected,
            matched: scenario.expected.matches(&run.outcome),
            outcome: run.outcome,
            ledger_file,
        });
    }

    let matched = entries.iter().filter(|e| e.matched).count();
    let report = SuiteReport {
        total: entries.len(),
        matched,
        all_matched: matched == entries.len(),
        warning: entries
            .is_empty()
            .then(|| "no scenarios configured; nothing was checked".to_string()),
        entries,
    };

    write_file(&out_dir.join("summary.txt"), &report.render_table())?;
    write_file(
        &out_dir.join("summary.json"),
        &serde_json::to_string_pretty(&report).expect("report serialization cannot fail"),
    )?;
    Ok(report)
}

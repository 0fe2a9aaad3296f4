//! Identities, signing, and two-party multi-signature envelopes.
//!
//! Each protocol participant holds an Ed25519 keypair (32-byte seed, 32-byte
//! verification key, 64-byte signature). A protocol [`Signature`] does not
//! sign the payload digest alone: the signed message is
//! `payload_digest (32 bytes) || nonce (u64 big-endian)`, so the replay nonce
//! embedded in the signature record is itself tamper-evident. Nonces are
//! per-identity and strictly monotonic; the registry tracks the last-seen
//! nonce per signer and advances it only when a whole envelope verifies.

use std::collections::BTreeMap;
use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{sha256, CanonicalWriter};

/// Stakeholder roles. The discriminant is the canonical sort order used in
/// envelopes and in the hash preimage layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Patient,
    Provider,
    Insurer,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Patient, Role::Provider, Role::Insurer];

    /// One-byte tag used in canonical encodings.
    pub fn tag(self) -> u8 {
        match self {
            Role::Patient => 0,
            Role::Provider => 1,
            Role::Insurer => 2,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Role::Patient => "patient",
            Role::Provider => "provider",
            Role::Insurer => "insurer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Patient => "Patient",
            Role::Provider => "Provider",
            Role::Insurer => "Insurer",
        })
    }
}

/// Serde helper: fixed-width byte arrays as lowercase hex strings.
pub mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(v: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(&s).map_err(serde::de::Error::custom)?;
        raw.try_into()
            .map_err(|_| serde::de::Error::custom("wrong byte length"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("seed must be exactly 32 bytes, got {0}")]
    InvalidSeed(usize),
    #[error("signing key material is corrupt")]
    SigningFailure,
    #[error("identity id {0:?} already registered")]
    DuplicateId(String),
    #[error("public key already registered under id {0:?}")]
    DuplicatePublicKey(String),
    #[error("registry import: {0}")]
    Import(String),
}

/// Structural multi-signature faults that are errors rather than a plain
/// `false` verdict.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MultiSigError {
    #[error("signer {0:?} is not in the registry")]
    UnknownSigner(String),
    #[error("role {0} covered by more than one signature")]
    DuplicateRole(Role),
}

/// Why an envelope failed verification.
#[derive(Debug, PartialEq, Eq)]
pub enum EnvelopeRejection {
    UnknownSigner(String),
    DuplicateRole(Role),
    MissingRole(Role),
    UnexpectedRole(Role),
    RoleMismatch {
        signer_id: String,
        claimed: Role,
        registered: Role,
    },
    BadSignature(String),
    StaleNonce {
        signer_id: String,
        nonce: u64,
        last_seen: u64,
    },
}

impl fmt::Display for EnvelopeRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownSigner(id) => write!(f, "unknown signer {id:?}"),
            Self::DuplicateRole(r) => write!(f, "duplicate coverage of role {r}"),
            Self::MissingRole(r) => write!(f, "missing signature for role {r}"),
            Self::UnexpectedRole(r) => write!(f, "signature for role {r} not required here"),
            Self::RoleMismatch {
                signer_id,
                claimed,
                registered,
            } => write!(
                f,
                "signer {signer_id:?} claims role {claimed} but is registered as {registered}"
            ),
            Self::BadSignature(id) => write!(f, "signature from {id:?} does not verify"),
            Self::StaleNonce {
                signer_id,
                nonce,
                last_seen,
            } => write!(
                f,
                "replayed nonce {nonce} from {signer_id:?} (last seen {last_seen})"
            ),
        }
    }
}

/// A registered protocol participant. `nonce` is the registry's last-seen
/// replay counter for this identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub id: String,
    pub role: Role,
    #[serde(with = "hex_array")]
    pub public_key: [u8; 32],
    pub nonce: u64,
}

/// An identity together with its secret key. Never serialized.
pub struct SigningIdentity {
    identity: Identity,
    signing_key: SigningKey,
}

impl fmt::Debug for SigningIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // key material stays out of debug output
        f.debug_struct("SigningIdentity")
            .field("identity", &self.identity)
            .finish_non_exhaustive()
    }
}

/// Deterministically derives an identity from a 32-byte seed. The default id
/// is `<role>-<first 8 hex chars of the public key>`; rename with
/// [`SigningIdentity::with_id`] before registering.
pub fn generate_identity(role: Role, seed: &[u8]) -> Result<SigningIdentity, IdentityError> {
    let seed: [u8; 32] = seed
        .try_into()
        .map_err(|_| IdentityError::InvalidSeed(seed.len()))?;
    let signing_key = SigningKey::from_bytes(&seed);
    let public_key = signing_key.verifying_key().to_bytes();
    let id = format!("{}-{}", role.slug(), hex::encode(&public_key[..4]));
    Ok(SigningIdentity {
        identity: Identity {
            id,
            role,
            public_key,
            nonce: 0,
        },
        signing_key,
    })
}

impl SigningIdentity {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.identity.id = id.into();
        self
    }

    pub fn identity(&self) -> &Identity {
        &self.identity
    }

    pub fn id(&self) -> &str {
        &self.identity.id
    }

    pub fn role(&self) -> Role {
        self.identity.role
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.identity.public_key
    }

    /// Raw Ed25519 signature over an arbitrary message. No nonce is involved;
    /// this is the primitive the published test vectors exercise.
    pub fn sign_message(&self, message: &[u8]) -> [u8; 64] {
        self.signing_key.sign(message).to_bytes()
    }

    /// Protocol signature over a payload: hashes the payload, bumps the
    /// identity's nonce, and signs `digest || nonce`.
    pub fn sign(&mut self, payload: &[u8]) -> Signature {
        self.sign_digest(sha256(payload))
    }

    /// Protocol signature over an already-computed payload digest.
    pub fn sign_digest(&mut self, payload_digest: [u8; 32]) -> Signature {
        self.identity.nonce += 1;
        let nonce = self.identity.nonce;
        let bytes = self
            .signing_key
            .sign(&signed_message(&payload_digest, nonce))
            .to_bytes();
        Signature {
            signer_id: self.identity.id.clone(),
            signer_role: self.identity.role,
            nonce,
            bytes,
        }
    }
}

/// The message actually signed by a protocol signature.
fn signed_message(payload_digest: &[u8; 32], nonce: u64) -> [u8; 40] {
    let mut msg = [0u8; 40];
    msg[..32].copy_from_slice(payload_digest);
    msg[32..].copy_from_slice(&nonce.to_be_bytes());
    msg
}

/// Raw Ed25519 verification, the counterpart of
/// [`SigningIdentity::sign_message`].
pub fn verify_message(message: &[u8], signature: &[u8; 64], public_key: &[u8; 32]) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(public_key) else {
        return false;
    };
    vk.verify(message, &ed25519_dalek::Signature::from_bytes(signature))
        .is_ok()
}

/// One role-attributed protocol signature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub signer_id: String,
    pub signer_role: Role,
    pub nonce: u64,
    #[serde(with = "hex_array")]
    pub bytes: [u8; 64],
}

impl Signature {
    /// True iff the signature verifies over `payload_digest` with the embedded
    /// nonce under `public_key`.
    pub fn verify(&self, payload_digest: &[u8; 32], public_key: &[u8; 32]) -> bool {
        verify_message(
            &signed_message(payload_digest, self.nonce),
            &self.bytes,
            public_key,
        )
    }

    /// Convenience form of [`Signature::verify`] that hashes the payload first.
    pub fn verify_payload(&self, payload: &[u8], public_key: &[u8; 32]) -> bool {
        self.verify(&sha256(payload), public_key)
    }

    fn write_canonical(&self, w: &mut CanonicalWriter) {
        w.str(&self.signer_id);
        w.u8(self.signer_role.tag());
        w.u64(self.nonce);
        w.raw(&self.bytes);
    }
}

/// A payload digest plus the ordered pair of role-attributed signatures that
/// authorize one protocol transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiSigEnvelope {
    #[serde(with = "hex_array")]
    pub payload_digest: [u8; 32],
    pub required_roles: [Role; 2],
    pub signatures: Vec<Signature>,
}

impl MultiSigEnvelope {
    /// Builds an envelope in canonical form: roles sorted by tag, signatures
    /// sorted by (role tag, signer id).
    pub fn new(
        payload_digest: [u8; 32],
        required_roles: [Role; 2],
        signatures: Vec<Signature>,
    ) -> Self {
        let mut env = Self {
            payload_digest,
            required_roles,
            signatures,
        };
        env.normalize();
        env
    }

    /// Restores canonical ordering (idempotent).
    pub fn normalize(&mut self) {
        self.required_roles.sort_by_key(|r| r.tag());
        self.signatures
            .sort_by(|a, b| (a.signer_role.tag(), &a.signer_id).cmp(&(b.signer_role.tag(), &b.signer_id)));
    }

    /// Canonical byte encoding: digest, both role tags, then the
    /// length-prefixed signature list in canonical order. Injective on
    /// content by construction.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = CanonicalWriter::new();
        self.write_canonical(&mut w);
        w.into_bytes()
    }

    pub(crate) fn write_canonical(&self, w: &mut CanonicalWriter) {
        w.raw(&self.payload_digest);
        w.u8(self.required_roles[0].tag());
        w.u8(self.required_roles[1].tag());
        w.u32(self.signatures.len() as u32);
        for sig in &self.signatures {
            sig.write_canonical(w);
        }
    }
}

/// The set of registered identities and their last-seen replay nonces.
#[derive(Debug, Default, Clone)]
pub struct IdentityRegistry {
    identities: BTreeMap<String, Identity>,
}

impl IdentityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an identity; ids and public keys must both be unique.
    pub fn register(&mut self, identity: Identity) -> Result<(), IdentityError> {
        if self.identities.contains_key(&identity.id) {
            return Err(IdentityError::DuplicateId(identity.id));
        }
        if let Some(existing) = self
            .identities
            .values()
            .find(|i| i.public_key == identity.public_key)
        {
            return Err(IdentityError::DuplicatePublicKey(existing.id.clone()));
        }
        self.identities.insert(identity.id.clone(), identity);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Identity> {
        self.identities.get(id)
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Identity> {
        self.identities.values()
    }

    /// Verifies an envelope without touching nonce state. `Ok(())` means the
    /// envelope would be accepted.
    pub fn check_multisig(&self, envelope: &MultiSigEnvelope) -> Result<(), EnvelopeRejection> {
        let [role_a, role_b] = envelope.required_roles;
        if role_a == role_b {
            return Err(EnvelopeRejection::DuplicateRole(role_a));
        }

        for sig in &envelope.signatures {
            if !self.identities.contains_key(&sig.signer_id) {
                return Err(EnvelopeRejection::UnknownSigner(sig.signer_id.clone()));
            }
            if sig.signer_role != role_a && sig.signer_role != role_b {
                return Err(EnvelopeRejection::UnexpectedRole(sig.signer_role));
            }
        }

        for role in [role_a, role_b] {
            let covering: Vec<&Signature> = envelope
                .signatures
                .iter()
                .filter(|s| s.signer_role == role)
                .collect();
            match covering.len() {
                0 => return Err(EnvelopeRejection::MissingRole(role)),
                1 => {}
                _ => return Err(EnvelopeRejection::DuplicateRole(role)),
            }
            let sig = covering[0];
            let registered = &self.identities[&sig.signer_id];
            if registered.role != sig.signer_role {
                return Err(EnvelopeRejection::RoleMismatch {
                    signer_id: sig.signer_id.clone(),
                    claimed: sig.signer_role,
                    registered: registered.role,
                });
            }
            if !sig.verify(&envelope.payload_digest, &registered.public_key) {
                return Err(EnvelopeRejection::BadSignature(sig.signer_id.clone()));
            }
            if sig.nonce <= registered.nonce {
                return Err(EnvelopeRejection::StaleNonce {
                    signer_id: sig.signer_id.clone(),
                    nonce: sig.nonce,
                    last_seen: registered.nonce,
                });
            }
        }
        Ok(())
    }

    /// Verifies an envelope and, on acceptance, advances the last-seen nonce
    /// of every signer. Structural faults (unknown signer, duplicate role
    /// coverage) are errors; everything else is a `false` verdict.
    pub fn verify_multisig(&mut self, envelope: &MultiSigEnvelope) -> Result<bool, MultiSigError> {
        match self.check_multisig(envelope) {
            Ok(()) => {
                self.advance_nonces(envelope);
                Ok(true)
            }
            Err(EnvelopeRejection::UnknownSigner(id)) => Err(MultiSigError::UnknownSigner(id)),
            Err(EnvelopeRejection::DuplicateRole(role)) => Err(MultiSigError::DuplicateRole(role)),
            Err(_) => Ok(false),
        }
    }

    pub(crate) fn advance_nonces(&mut self, envelope: &MultiSigEnvelope) {
        for sig in &envelope.signatures {
            if let Some(identity) = self.identities.get_mut(&sig.signer_id) {
                identity.nonce = identity.nonce.max(sig.nonce);
            }
        }
    }

    /// Registry export: JSON array of `{id, role, public_key, nonce}` with the
    /// key in lowercase hex.
    pub fn export_json(&self) -> String {
        let all: Vec<&Identity> = self.identities.values().collect();
        serde_json::to_string_pretty(&all).expect("registry serialization cannot fail")
    }

    pub fn import_json(json: &str) -> Result<Self, IdentityError> {
        let all: Vec<Identity> =
            serde_json::from_str(json).map_err(|e| IdentityError::Import(e.to_string()))?;
        let mut registry = Self::new();
        for identity in all {
            let nonce = identity.nonce;
            registry.register(identity.clone())?;
            // register() keeps the imported nonce only via the stored value
            registry
                .identities
                .get_mut(&identity.id)
                .expect("just inserted")
                .nonce = nonce;
        }
        Ok(registry)
    }
}

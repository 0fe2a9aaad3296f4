//! Insurance policies and the line-item validity predicate.
//!
//! The validity predicate (`zeta_check`) admits a line item iff its encounter
//! code is covered and the billed amount does not exceed the per-code cap.
//! Bundle rules flag unbundling: billing every component of a packaged
//! procedure as separate line items. All money is integer minor units
//! (cents); financial paths never touch floating point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("encounter code {0:?} is malformed (want [A-Z][A-Z0-9]{{1,15}})")]
    BadEncounterCode(String),
    #[error("coverage cap for {0} must be positive")]
    ZeroCap(EncounterCode),
    #[error("line amount must be positive")]
    ZeroAmount,
    #[error("money overflow")]
    Overflow,
    #[error("bundle {0} needs at least two components")]
    BundleTooSmall(EncounterCode),
    #[error("bundle {0} lists itself as a component")]
    BundleSelfReference(EncounterCode),
    #[error("bundle {bundle} cap {cap} is not below the component cap total {component_total}")]
    VacuousBundle {
        bundle: EncounterCode,
        cap: Money,
        component_total: Money,
    },
    #[error("bundle {bundle} component {component} is not a covered code")]
    BundleComponentUncovered {
        bundle: EncounterCode,
        component: EncounterCode,
    },
    #[error("policy fixture: {0}")]
    Fixture(String),
}

/// Short uppercase alphanumeric code categorizing a rendered medical service.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EncounterCode(String);

impl EncounterCode {
    pub fn new(code: impl Into<String>) -> Result<Self, PolicyError> {
        let code = code.into();
        let mut chars = code.chars();
        let head_ok = chars.next().is_some_and(|c| c.is_ascii_uppercase());
        let tail: Vec<char> = chars.collect();
        let tail_ok = (1..=15).contains(&tail.len())
            && tail.iter().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit());
        if head_ok && tail_ok {
            Ok(Self(code))
        } else {
            Err(PolicyError::BadEncounterCode(code))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EncounterCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EncounterCode {
    type Err = PolicyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for EncounterCode {
    type Error = PolicyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<EncounterCode> for String {
    fn from(c: EncounterCode) -> String {
        c.0
    }
}

/// Money in integer minor currency units (cents).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub u64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn cents(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, other: Money) -> Result<Money, PolicyError> {
        self.0
            .checked_add(other.0)
            .map(Money)
            .ok_or(PolicyError::Overflow)
    }

    pub fn saturating_sub(self, other: Money) -> Money {
        Money(self.0.saturating_sub(other.0))
    }

    /// Exact total of an amount sequence, failing on overflow.
    pub fn sum<'a>(amounts: impl IntoIterator<Item = &'a Money>) -> Result<Money, PolicyError> {
        amounts
            .into_iter()
            .try_fold(Money::ZERO, |acc, m| acc.checked_add(*m))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}.{:02}", self.0 / 100, self.0 % 100)
    }
}

/// One billed service: an encounter code and a positive amount.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimLineItem {
    pub encounter_code: EncounterCode,
    pub amount: Money,
}

impl ClaimLineItem {
    pub fn new(encounter_code: EncounterCode, amount: Money) -> Result<Self, PolicyError> {
        if amount == Money::ZERO {
            return Err(PolicyError::ZeroAmount);
        }
        Ok(Self {
            encounter_code,
            amount,
        })
    }
}

/// Flags billing every component of a packaged procedure separately.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleRule {
    pub bundle_code: EncounterCode,
    pub components: BTreeSet<EncounterCode>,
    pub bundled_cap: Money,
}

/// The patient–insurer agreement: per-code caps, a flat per-claim copay, and
/// bundle rules. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsurancePolicy {
    pub policy_id: String,
    pub patient_id: String,
    pub insurer_id: String,
    pub copay: Money,
    coverage: BTreeMap<EncounterCode, Money>,
    bundles: Vec<BundleRule>,
}

impl InsurancePolicy {
    pub fn new(
        policy_id: impl Into<String>,
        patient_id: impl Into<String>,
        insurer_id: impl Into<String>,
        copay: Money,
        coverage: BTreeMap<EncounterCode, Money>,
        bundles: Vec<BundleRule>,
    ) -> Result<Self, PolicyError> {
        for (code, cap) in &coverage {
            if *cap == Money::ZERO {
                return Err(PolicyError::ZeroCap(code.clone()));
            }
        }
        for rule in &bundles {
            if rule.components.len() < 2 {
                return Err(PolicyError::BundleTooSmall(rule.bundle_code.clone()));
            }
            if rule.components.contains(&rule.bundle_code) {
                return Err(PolicyError::BundleSelfReference(rule.bundle_code.clone()));
            }
            let mut component_total = Money::ZERO;
            for component in &rule.components {
                let cap = coverage.get(component).ok_or_else(|| {
                    PolicyError::BundleComponentUncovered {
                        bundle: rule.bundle_code.clone(),
                        component: component.clone(),
                    }
                })?;
                component_total = component_total.checked_add(*cap)?;
            }
            if rule.bundled_cap >= component_total {
                return Err(PolicyError::VacuousBundle {
                    bundle: rule.bundle_code.clone(),
                    cap: rule.bundled_cap,
                    component_total,
                });
            }
        }
        Ok(Self {
            policy_id: policy_id.into(),
            patient_id: patient_id.into(),
            insurer_id: insurer_id.into(),
            copay,
            coverage,
            bundles,
        })
    }

    pub fn cap(&self, code: &EncounterCode) -> Option<Money> {
        self.coverage.get(code).copied()
    }

    pub fn covered_codes(&self) -> impl Iterator<Item = &EncounterCode> {
        self.coverage.keys()
    }

    pub fn coverage(&self) -> &BTreeMap<EncounterCode, Money> {
        &self.coverage
    }

    pub fn bundles(&self) -> &[BundleRule] {
        &self.bundles
    }

    /// Loads a policy fixture from its JSON form.
    pub fn from_fixture_json(json: &str) -> Result<Self, PolicyError> {
        let fixture: PolicyFixture =
            serde_json::from_str(json).map_err(|e| PolicyError::Fixture(e.to_string()))?;
        fixture.try_into()
    }

    pub fn to_fixture_json(&self) -> String {
        serde_json::to_string_pretty(&PolicyFixture::from(self))
            .expect("policy serialization cannot fail")
    }
}

/// On-disk policy fixture schema.
#[derive(Debug, Serialize, Deserialize)]
struct PolicyFixture {
    policy_id: String,
    patient_id: String,
    insurer_id: String,
    copay_cents: u64,
    coverage: BTreeMap<String, u64>,
    #[serde(default)]
    bundles: Vec<BundleFixture>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleFixture {
    bundle_code: String,
    components: Vec<String>,
    bundled_cap_cents: u64,
}

impl TryFrom<PolicyFixture> for InsurancePolicy {
    type Error = PolicyError;
    fn try_from(f: PolicyFixture) -> Result<Self, PolicyError> {
        let mut coverage = BTreeMap::new();
        for (code, cap) in f.coverage {
            coverage.insert(EncounterCode::new(code)?, Money(cap));
        }
        let mut bundles = Vec::new();
        for b in f.bundles {
            let mut components = BTreeSet::new();
            for c in b.components {
                components.insert(EncounterCode::new(c)?);
            }
            bundles.push(BundleRule {
                bundle_code: EncounterCode::new(b.bundle_code)?,
                components,
                bundled_cap: Money(b.bundled_cap_cents),
            });
        }
        InsurancePolicy::new(
            f.policy_id,
            f.patient_id,
            f.insurer_id,
            Money(f.copay_cents),
            coverage,
            bundles,
        )
    }
}

impl From<&InsurancePolicy> for PolicyFixture {
    fn from(p: &InsurancePolicy) -> Self {
        Self {
            policy_id: p.policy_id.clone(),
            patient_id: p.patient_id.clone(),
            insurer_id: p.insurer_id.clone(),
            copay_cents: p.copay.cents(),
            coverage: p
                .coverage
                .iter()
                .map(|(c, m)| (c.as_str().to_string(), m.cents()))
                .collect(),
            bundles: p
                .bundles
                .iter()
                .map(|b| BundleFixture {
                    bundle_code: b.bundle_code.as_str().to_string(),
                    components: b.components.iter().map(|c| c.as_str().to_string()).collect(),
                    bundled_cap_cents: b.bundled_cap.cents(),
                })
                .collect(),
        }
    }
}

/// The validity predicate: the code is covered and the amount is within its
/// cap.
pub fn zeta_check(line: &ClaimLineItem, policy: &InsurancePolicy) -> bool {
    match policy.cap(&line.encounter_code) {
        Some(cap) => line.amount <= cap,
        None => false,
    }
}

/// Returns every bundle rule whose complete component set appears among the
/// lines' encounter codes. Partial overlap is legal.
pub fn detect_unbundling<'a>(
    lines: &[ClaimLineItem],
    policy: &'a InsurancePolicy,
) -> Vec<&'a BundleRule> {
    let billed: BTreeSet<&EncounterCode> = lines.iter().map(|l| &l.encounter_code).collect();
    policy
        .bundles()
        .iter()
        .filter(|rule| rule.components.iter().all(|c| billed.contains(c)))
        .collect()
}

/// Splits a claim total into the patient's flat copay share and the amount
/// claimable from the insurer. Shares always sum to the total; the copay is
/// clamped at the total.
pub fn compute_copay_split(total: Money, policy: &InsurancePolicy) -> (Money, Money) {
    let patient_share = policy.copay.min(total);
    let claimable = total.saturating_sub(patient_share);
    (patient_share, claimable)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> EncounterCode {
        EncounterCode::new(s).unwrap()
    }

    fn line(c: &str, amount: u64) -> ClaimLineItem {
        ClaimLineItem::new(code(c), Money(amount)).unwrap()
    }

    pub(crate) fn sample_policy() -> InsurancePolicy {
        let coverage = [
            ("E100", 15_000),
            ("E200", 8_000),
            ("E300", 30_000),
            ("E450", 22_000),
        ]
        .into_iter()
        .map(|(c, cap)| (code(c), Money(cap)))
        .collect();
        let bundle = BundleRule {
            bundle_code: code("B900"),
            components: [code("E200"), code("E300"), code("E450")].into_iter().collect(),
            bundled_cap: Money(45_000),
        };
        InsurancePolicy::new("pol-1", "pat-1", "ins-1", Money(2_000), coverage, vec![bundle])
            .unwrap()
    }

    #[test]
    fn zeta_check_cap_boundaries() {
        let policy = sample_policy();
        assert!(zeta_check(&line("E100", 12_000), &policy));
        assert!(zeta_check(&line("E100", 15_000), &policy));
        assert!(!zeta_check(&line("E100", 15_001), &policy));
        assert!(!zeta_check(&line("Z999", 1), &policy));
    }

    #[test]
    fn unbundling_triggers_only_on_the_full_component_set() {
        let policy = sample_policy();
        let full = vec![line("E200", 5_000), line("E300", 20_000), line("E450", 9_000)];
        let hits = detect_unbundling(&full, &policy);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].bundle_code, code("B900"));

        let partial = vec![line("E200", 5_000), line("E300", 20_000)];
        assert!(detect_unbundling(&partial, &policy).is_empty());
        assert!(detect_unbundling(&[], &policy).is_empty());
    }

    #[test]
    fn copay_split_matches_quoted_rule() {
        let policy = sample_policy();
        assert_eq!(
            compute_copay_split(Money(10_000), &policy),
            (Money(2_000), Money(8_000))
        );
        let no_copay = InsurancePolicy::new(
            "pol-2",
            "pat-1",
            "ins-1",
            Money::ZERO,
            policy.coverage().clone(),
            vec![],
        )
        .unwrap();
        assert_eq!(
            compute_copay_split(Money(10_000), &no_copay),
            (Money::ZERO, Money(10_000))
        );
        // clamped when the bill is below the copay
        assert_eq!(
            compute_copay_split(Money(1_500), &policy),
            (Money(1_500), Money::ZERO)
        );
    }

    #[test]
    fn encounter_code_shape_is_enforced() {
        assert!(EncounterCode::new("E100").is_ok());
        assert!(EncounterCode::new("B9").is_ok());
        assert!(EncounterCode::new("ABCDEFGHIJKLMNOP").is_ok()); // 16 chars
        assert!(EncounterCode::new("").is_err());
        assert!(EncounterCode::new("E").is_err());
        assert!(EncounterCode::new("1E0").is_err());
        assert!(EncounterCode::new("e100").is_err());
        assert!(EncounterCode::new("E-100").is_err());
        assert!(EncounterCode::new("ABCDEFGHIJKLMNOPQ").is_err()); // 17 chars
    }

    #[test]
    fn policy_invariants_are_validated() {
        let coverage: BTreeMap<_, _> = [(code("A1"), Money(100)), (code("A2"), Money(100))]
            .into_iter()
            .collect();

        let zero_cap: BTreeMap<_, _> = [(code("A1"), Money(0))].into_iter().collect();
        assert!(matches!(
            InsurancePolicy::new("p", "a", "b", Money(0), zero_cap, vec![]),
            Err(PolicyError::ZeroCap(_))
        ));

        let vacuous = BundleRule {
            bundle_code: code("B1"),
            components: [code("A1"), code("A2")].into_iter().collect(),
            bundled_cap: Money(200), // not below 100 + 100
        };
        assert!(matches!(
            InsurancePolicy::new("p", "a", "b", Money(0), coverage.clone(), vec![vacuous]),
            Err(PolicyError::VacuousBundle { .. })
        ));

        let too_small = BundleRule {
            bundle_code: code("B1"),
            components: [code("A1")].into_iter().collect(),
            bundled_cap: Money(50),
        };
        assert!(matches!(
            InsurancePolicy::new("p", "a", "b", Money(0), coverage.clone(), vec![too_small]),
            Err(PolicyError::BundleTooSmall(_))
        ));

        let self_ref = BundleRule {
            bundle_code: code("A1"),
            components: [code("A1"), code("A2")].into_iter().collect(),
            bundled_cap: Money(50),
        };
        assert!(matches!(
            InsurancePolicy::new("p", "a", "b", Money(0), coverage, vec![self_ref]),
            Err(PolicyError::BundleSelfReference(_))
        ));
    }

    #[test]
    fn fixture_round_trip() {
        let policy = sample_policy();
        let json = policy.to_fixture_json();
        let reborn = InsurancePolicy::from_fixture_json(&json).unwrap();
        assert_eq!(policy, reborn);

        assert!(matches!(
            InsurancePolicy::from_fixture_json("{not json"),
            Err(PolicyError::Fixture(_))
        ));
    }

    #[test]
    fn money_arithmetic_is_checked() {
        assert_eq!(Money(2).checked_add(Money(3)), Ok(Money(5)));
        assert_eq!(
            Money(u64::MAX).checked_add(Money(1)),
            Err(PolicyError::Overflow)
        );
        assert_eq!(Money(5).saturating_sub(Money(7)), Money::ZERO);
        assert_eq!(format!("{}", Money(123_456)), "$1234.56");
        assert_eq!(format!("{}", Money(5)), "$0.05");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_code() -> impl Strategy<Value = EncounterCode> {
            "[A-Z][A-Z0-9]{1,6}".prop_map(|s| EncounterCode::new(s).unwrap())
        }

        proptest! {
            // zeta is monotone: passing at an amount implies passing at every
            // smaller positive amount
            #[test]
            fn zeta_monotone_in_amount(amount in 1u64..=15_000, lower in 1u64..=15_000) {
                let policy = sample_policy();
                let high = line("E100", amount);
                prop_assume!(zeta_check(&high, &policy));
                let low = line("E100", lower.min(amount));
                prop_assert!(zeta_check(&low, &policy));
            }

            // copay split conserves money exactly
            #[test]
            fn copay_split_conserves(total in 0u64..=10_000_000, copay in 0u64..=100_000) {
                let policy = InsurancePolicy::new(
                    "p", "a", "b", Money(copay),
                    [(code("A1"), Money(1))].into_iter().collect(),
                    vec![],
                ).unwrap();
                let (patient, claimable) = compute_copay_split(Money(total), &policy);
                prop_assert_eq!(patient.checked_add(claimable).unwrap(), Money(total));
                prop_assert!(patient <= policy.copay);
                prop_assert!(patient <= Money(total));
            }

            // detect_unbundling agrees with a brute-force scan over all rules
            #[test]
            fn unbundling_matches_brute_force(
                codes in proptest::collection::btree_set(arb_code(), 2..8),
                picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..10),
                rule_sizes in proptest::collection::vec(2usize..4, 0..5),
            ) {
                let all: Vec<EncounterCode> = codes.iter().cloned().collect();
                let coverage: BTreeMap<_, _> =
                    all.iter().map(|c| (c.clone(), Money(10_000))).collect();

                let mut bundles = Vec::new();
                for (i, size) in rule_sizes.iter().enumerate() {
                    if *size > all.len() { continue; }
                    let components: BTreeSet<EncounterCode> =
                        all.iter().cycle().skip(i).take(*size).cloned().collect();
                    if components.len() < 2 { continue; }
                    let bundle_code = EncounterCode::new(format!("ZB{i}")).unwrap();
                    if components.contains(&bundle_code) { continue; }
                    bundles.push(BundleRule {
                        bundle_code,
                        components,
                        bundled_cap: Money(1),
                    });
                }
                let policy = InsurancePolicy::new("p", "a", "b", Money(0), coverage, bundles)
                    .unwrap();

                let lines: Vec<ClaimLineItem> = picks
                    .iter()
                    .map(|ix| line(ix.get(&all).as_str(), 100))
                    .collect();

                let fast: BTreeSet<&EncounterCode> = detect_unbundling(&lines, &policy)
                    .into_iter()
                    .map(|r| &r.bundle_code)
                    .collect();

                // independent oracle: enumerate every subset of the billed
                // code set and ask whether any equals the rule's components
                let billed: Vec<&EncounterCode> = lines
                    .iter()
                    .map(|l| &l.encounter_code)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let mut slow: BTreeSet<&EncounterCode> = BTreeSet::new();
                for rule in policy.bundles() {
                    for mask in 0u32..(1 << billed.len()) {
                        let subset: BTreeSet<EncounterCode> = billed
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| mask & (1 << i) != 0)
                            .map(|(_, c)| (*c).clone())
                            .collect();
                        if subset == rule.components {
                            slow.insert(&rule.bundle_code);
                            break;
                        }
                    }
                }

                prop_assert_eq!(fast, slow);
            }
        }
    }
}

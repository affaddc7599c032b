//! Privacy accounting for the replacement mechanism.
//!
//! With a policy π that ignores the token it replaces and replacement
//! probability `p`, the mechanism is (ε, 0)-differentially private with
//!
//! ```text
//! ε = max_{t ∈ T} log( (1 - p + p·π(t)) / (p·π(t)) )
//! ```
//!
//! where `T` is the private vocabulary. The maximum sits at the smallest
//! π(t) over `T`, so [`epsilon`] takes that minimum directly. The bound is
//! tight: [`empirical_epsilon_oracle`] recovers it by exact enumeration of
//! single-token neighbouring datasets.

mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::ReplacementStrategy;
use crate::policy::{min_mass, PolicyKind, PrivateVocabulary};

pub use oracle::{empirical_epsilon_oracle, verify_bound, BoundCheck, ORACLE_MAX_OUTCOMES};

fn check_probability(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {value} is outside [0, 1]")))
    }
}

/// Privacy loss for replacement probability `p` when the least likely private
/// token has policy mass `pi_min`. Returns `f64::INFINITY` when no finite
/// bound exists.
pub fn epsilon(p: f64, pi_min: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("pi_min", pi_min)?;
    if p == 1.0 {
        // every unit is replaced; the kept-original branch never fires
        return Ok(0.0);
    }
    if p == 0.0 || pi_min == 0.0 {
        return Ok(f64::INFINITY);
    }
    let replaced = p * pi_min;
    Ok(((1.0 - p + replaced) / replaced).ln())
}

/// Smallest policy mass that keeps the loss at `target_eps` for a given `p`.
pub fn min_policy_mass_for_epsilon(p: f64, target_eps: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("inverse undefined for p = {p}; need 0 < p < 1")));
    }
    if !(target_eps > 0.0 && target_eps.is_finite()) {
        return Err(Error::invalid(format!("target epsilon {target_eps} must be positive and finite")));
    }
    Ok((1.0 - p) / (p * target_eps.exp_m1()))
}

/// Upper bound on the realised replacement probability when sensitive units
/// are found by an identifier with the given recall.
pub fn effective_p(configured_p: f64, identifier_recall: f64) -> Result<f64> {
    check_probability("p", configured_p)?;
    check_probability("recall", identifier_recall)?;
    Ok(configured_p * identifier_recall)
}

/// Serializes non-finite values as the string `"inf"`.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad epsilon `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEpsilon {
    pub name: String,
    pub min_mass: f64,
    #[serde(with = "extended_real")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub strategy: String,
    /// Replacement probability the bound was computed for.
    pub p: f64,
    /// Probability configured on the strategy, before any recall adjustment.
    pub configured_p: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
    pub recall_adjusted: bool,
    pub per_category: Vec<CategoryEpsilon>,
    #[serde(with = "extended_real")]
    pub overall_epsilon: f64,
    pub delta: f64,
    pub guarantee_void: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl PrivacyReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Per-category and worst-case ε of `strategy` over `vocab`.
pub fn privacy_report(strategy: &ReplacementStrategy, vocab: &PrivateVocabulary) -> Result<PrivacyReport> {
    build_report(strategy, vocab, None)
}

/// Same as [`privacy_report`] with `p` replaced by `effective_p(p, recall)`.
pub fn recall_adjusted_report(
    strategy: &ReplacementStrategy,
    vocab: &PrivateVocabulary,
    recall: f64,
) -> Result<PrivacyReport> {
    build_report(strategy, vocab, Some(recall))
}

fn build_report(
    strategy: &ReplacementStrategy,
    vocab: &PrivateVocabulary,
    recall: Option<f64>,
) -> Result<PrivacyReport> {
    let configured_p = strategy.p();
    let p = match recall {
        Some(r) => effective_p(configured_p, r)?,
        None => configured_p,
    };
    let mut per_category = Vec::new();
    for category in vocab.categories() {
        let mass = min_mass(strategy.policy(), vocab, category)?;
        per_category.push(CategoryEpsilon {
            name: category.to_string(),
            min_mass: mass,
            epsilon: epsilon(p, mass)?,
        });
    }
    // no private forms at all means nothing can leak
    let overall_epsilon = per_category.iter().map(|c| c.epsilon).fold(0.0, f64::max);

    let mut notes = Vec::new();
    if strategy.consistent_mapping() {
        notes.push(
            "consistent mapping makes surrogates depend on the original; the epsilon values are not a valid bound"
                .to_owned(),
        );
    }
    if let Some(r) = recall {
        notes.push(format!(
            "recall-adjusted: p = {configured_p} x recall {r} = {p}; epsilon uses the adjusted p"
        ));
    }
    if strategy.policy().kind() == PolicyKind::Degenerate && p == 1.0 && !per_category.is_empty() {
        notes.push(
            "single-surrogate policy: epsilon is the bound for the emitted values; the placeholder still shows where replacements happened"
                .to_owned(),
        );
    }

    Ok(PrivacyReport {
        strategy: strategy.name().to_string(),
        p,
        configured_p,
        recall,
        recall_adjusted: recall.is_some(),
        per_category,
        overall_epsilon,
        delta: 0.0,
        guarantee_void: strategy.consistent_mapping(),
        notes,
    })
}

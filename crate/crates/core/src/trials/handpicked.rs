//! The hand-designed shaping trials, shipped as versioned data.
//!
//! 30 initial pool trials and 5 replacements spanning the label groups, plus
//! one unseen-passing trial that the augmented variant swaps into the
//! initial pool.

use serde::Deserialize;

use super::{ObjectSpec, Trial};

const DATA: &str = include_str!("../../data/handpicked_v1.json");
pub const HANDPICKED_SCHEMA: &str = "attn-handpicked/1";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandpickedTrial {
    pub id: u64,
    pub first: ObjectSpec,
    pub second: ObjectSpec,
    /// Labels the trial was designed to carry, checked by tests.
    pub labels: Vec<String>,
}

impl HandpickedTrial {
    pub fn trial(&self) -> Trial {
        Trial { id: self.id, first: self.first, second: self.second }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnseenPassingSwap {
    pub replaces_id: u64,
    pub trial: HandpickedTrial,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandpickedSet {
    pub schema: String,
    pub version: u32,
    pub initial: Vec<HandpickedTrial>,
    pub replacements: Vec<HandpickedTrial>,
    pub unseen_passing: UnseenPassingSwap,
}

/// The bundled set.
pub fn handpicked() -> HandpickedSet {
    let set: HandpickedSet = serde_json::from_str(DATA).expect("bundled handpicked data parses");
    assert_eq!(set.schema, HANDPICKED_SCHEMA);
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trials::{classify, violations, CategoryLabels, TrialConfig};
    use crate::world::WorldConfig;
    use std::collections::BTreeSet;

    fn all(set: &HandpickedSet) -> Vec<&HandpickedTrial> {
        set.initial.iter().chain(&set.replacements).chain([&set.unseen_passing.trial]).collect()
    }

    #[test]
    fn shape() {
        let set = handpicked();
        assert_eq!(set.initial.len(), 30);
        assert_eq!(set.replacements.len(), 5);
        let ids: BTreeSet<u64> = all(&set).iter().map(|t| t.id).collect();
        assert_eq!(ids.len(), 36);
        assert!(set.initial.iter().any(|t| t.id == set.unseen_passing.replaces_id));
    }

    #[test]
    fn every_trial_is_valid_and_labelled_as_designed() {
        let world = WorldConfig::default();
        let gen = TrialConfig::default();
        for h in all(&handpicked()) {
            let t = h.trial();
            assert!(violations(&t, &world, &gen).is_empty(), "trial {}", h.id);
            let labels = classify(&t, &world);
            let got: BTreeSet<&str> = CategoryLabels::NAMES
                .iter()
                .zip(labels.flags())
                .filter_map(|(n, f)| f.then_some(*n))
                .collect();
            let want: BTreeSet<&str> = h.labels.iter().map(String::as_str).collect();
            assert_eq!(got, want, "trial {}", h.id);
        }
    }

    #[test]
    fn groups_are_covered() {
        let world = WorldConfig::default();
        let set = handpicked();
        let pool: Vec<CategoryLabels> = set.initial.iter().map(|h| classify(&h.trial(), &world)).collect();
        for name in [
            "trivial_stationary",
            "trivial_reactive",
            "delayed_decision",
            "object_permanence",
            "same_direction_solvable",
            "reverse_required",
            "overlap_or_cross",
        ] {
            assert!(pool.iter().any(|l| l.get(name) == Some(true)), "{name}");
        }
        assert!(classify(&set.unseen_passing.trial.trial(), &world).unseen_passing);
    }
}

//! The fixed vocabulary of 24 interest topics.
//!
//! Topic positions are the vectorization contract: every score vector in the
//! crate is indexed by [`Topic::index`], and the order below never changes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const TOPIC_COUNT: usize = 24;

/// Canonical topic order.
pub const TOPIC_NAMES: [&str; TOPIC_COUNT] = [
    "Activities",
    "Business",
    "Drink",
    "Education",
    "Entertainment",
    "Events",
    "Family",
    "Fashion",
    "Fitness",
    "Food",
    "Industry",
    "News",
    "Outdoors",
    "People",
    "Places",
    "Shopping",
    "Sport",
    "Technology",
    "Travel",
    "Culture",
    "Hobbies",
    "Lifestyle",
    "Relationship",
    "Wellness",
];

/// Compound topic names used by questionnaire signatures, mapped to their
/// atomic members. Keys are compared after [`alias_key`] folding.
const COMPOUND_ALIASES: &[(&str, &[&str])] = &[
    ("Sport and Outdoors", &["Sport", "Outdoors"]),
    ("SandO", &["Sport", "Outdoors"]),
    ("Food and Drink", &["Food", "Drink"]),
    ("FandD", &["Food", "Drink"]),
    ("Shopping and Fashion", &["Shopping", "Fashion"]),
    ("SandF", &["Shopping", "Fashion"]),
    ("Fitness and Wellness", &["Fitness", "Wellness"]),
    ("FandW", &["Fitness", "Wellness"]),
    ("News and Entertainment", &["News", "Entertainment"]),
    ("NandE", &["News", "Entertainment"]),
    ("Business and Industry", &["Business", "Industry"]),
    ("BandI", &["Business", "Industry"]),
    ("Places and Events", &["Places", "Events"]),
    ("PandE", &["Places", "Events"]),
    ("Hobbies and Activities", &["Hobbies", "Activities"]),
    ("HandA", &["Hobbies", "Activities"]),
    ("Family and Relationship", &["Family", "Relationship"]),
    ("FandR", &["Family", "Relationship"]),
    ("Lifestyle and Culture", &["Lifestyle", "Culture"]),
    ("LandC", &["Lifestyle", "Culture"]),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown topic '{0}'")]
pub struct UnknownTopic(pub String);

/// One of the 24 canonical topics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Topic(u8);

impl Topic {
    pub fn all() -> impl Iterator<Item = Topic> + Clone {
        (0..TOPIC_COUNT as u8).map(Topic)
    }

    pub fn from_index(index: usize) -> Option<Topic> {
        (index < TOPIC_COUNT).then_some(Topic(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        TOPIC_NAMES[self.index()]
    }

    /// Exact, case-sensitive lookup of a canonical name.
    pub fn from_name(name: &str) -> Result<Topic, UnknownTopic> {
        TOPIC_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Topic(i as u8))
            .ok_or_else(|| UnknownTopic(name.to_string()))
    }

    /// Case-insensitive lookup, tolerant of surrounding whitespace.
    pub fn parse_loose(name: &str) -> Result<Topic, UnknownTopic> {
        let trimmed = name.trim();
        TOPIC_NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(trimmed))
            .map(|i| Topic(i as u8))
            .ok_or_else(|| UnknownTopic(name.to_string()))
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topic {
    type Err = UnknownTopic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topic::from_name(s)
    }
}

impl Serialize for Topic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Topic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        Topic::from_name(&name).map_err(serde::de::Error::custom)
    }
}

/// Position of `name` in the canonical order.
pub fn topic_index(name: &str) -> Result<usize, UnknownTopic> {
    Topic::from_name(name).map(Topic::index)
}

/// Inverse of [`topic_index`].
pub fn topic_at(index: usize) -> Option<&'static str> {
    TOPIC_NAMES.get(index).copied()
}

fn alias_key(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Atomic members of a compound topic name such as "Food and Drink" or "FandD".
pub fn compound_alias(name: &str) -> Option<Vec<Topic>> {
    let key = alias_key(name);
    COMPOUND_ALIASES
        .iter()
        .find(|(alias, _)| alias_key(alias) == key)
        .map(|(_, members)| {
            members
                .iter()
                .map(|m| Topic::from_name(m).expect("alias table names canonical topics"))
                .collect()
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_and_last_positions() {
        assert_eq!(topic_index("Activities").unwrap(), 0);
        assert_eq!(topic_index("Wellness").unwrap(), 23);
        assert_eq!(topic_index("Drink").unwrap(), 2);
        assert_eq!(topic_index("Food").unwrap(), 9);
    }

    #[test]
    fn index_round_trips() {
        for name in TOPIC_NAMES {
            assert_eq!(topic_at(topic_index(name).unwrap()), Some(name));
        }
        assert_eq!(topic_at(24), None);
    }

    #[test]
    fn names_are_unique() {
        let mut names = TOPIC_NAMES.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), TOPIC_COUNT);
    }

    #[test]
    fn unknown_topic_is_an_error() {
        assert_eq!(topic_index("Cooking"), Err(UnknownTopic("Cooking".into())));
        assert!(Topic::from_name("drink").is_err());
        assert_eq!(Topic::parse_loose(" drink ").unwrap().name(), "Drink");
    }

    #[test]
    fn compound_aliases_resolve_to_atomic_pairs() {
        let food_drink = compound_alias("Food and Drink").unwrap();
        assert_eq!(food_drink, vec![Topic::from_name("Food").unwrap(), Topic::from_name("Drink").unwrap()]);
        assert_eq!(compound_alias("sando").unwrap().len(), 2);
        assert!(compound_alias("Travel").is_none());
        for (alias, _) in COMPOUND_ALIASES {
            assert!(compound_alias(alias).is_some());
        }
    }
}

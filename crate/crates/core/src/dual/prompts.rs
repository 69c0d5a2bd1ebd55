//! Versioned prompt assets.

use alloc::string::String;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const SYSTEM: &str = include_str!("../../prompts/system.txt");
const TRAFFIC_RULES: &str = include_str!("../../prompts/traffic_rules.txt");
const REFLECTION: &str = include_str!("../../prompts/reflection.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub system: String,
    pub traffic_rules: String,
    pub reflection: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptHashes {
    pub system: String,
    pub traffic_rules: String,
    pub reflection: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self { system: SYSTEM.into(), traffic_rules: TRAFFIC_RULES.into(), reflection: REFLECTION.into() }
    }
}

impl PromptSet {
    /// Rejects empty prompts.
    pub fn new(system: String, traffic_rules: String, reflection: String) -> Option<Self> {
        let p = Self { system, traffic_rules, reflection };
        (!p.system.trim().is_empty() && !p.traffic_rules.trim().is_empty() && !p.reflection.trim().is_empty())
            .then_some(p)
    }

    pub fn hashes(&self) -> PromptHashes {
        PromptHashes {
            system: sha256_hex(&self.system),
            traffic_rules: sha256_hex(&self.traffic_rules),
            reflection: sha256_hex(&self.reflection),
        }
    }
}

pub fn sha256_hex(text: &str) -> String {
    use core::fmt::Write;
    let digest = Sha256::digest(text.as_bytes());
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn defaults_are_non_empty() {
        let p = PromptSet::default();
        assert!(PromptSet::new(p.system.clone(), p.traffic_rules.clone(), p.reflection.clone()).is_some());
        assert!(PromptSet::new(String::new(), p.traffic_rules, p.reflection).is_none());
    }
}

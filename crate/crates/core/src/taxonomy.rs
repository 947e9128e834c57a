//! Closed vocabularies shared across the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// VR-specific privacy-sensitive data categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DataType {
    Body,
    Face,
    Eye,
    Hand,
}

impl DataType {
    pub const ALL: [DataType; 4] = [DataType::Body, DataType::Face, DataType::Eye, DataType::Hand];

    pub fn as_str(&self) -> &'static str {
        match self {
            DataType::Body => "Body",
            DataType::Face => "Face",
            DataType::Eye => "Eye",
            DataType::Hand => "Hand",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataType::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Store {
    Oculus,
    Viveport,
    Pico,
    Microsoft,
    PlayStation,
}

impl Store {
    pub const ALL: [Store; 5] = [
        Store::Oculus,
        Store::Viveport,
        Store::Pico,
        Store::Microsoft,
        Store::PlayStation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Store::Oculus => "Oculus",
            Store::Viveport => "Viveport",
            Store::Pico => "Pico",
            Store::Microsoft => "Microsoft",
            Store::PlayStation => "PlayStation",
        }
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Store {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Store::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Engine family as far as the catalog is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Engine {
    Unity,
    Unreal,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Unity => "Unity",
            Engine::Unreal => "Unreal",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

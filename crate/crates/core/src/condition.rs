//! Test-condition matrix and subject grouping.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eyes {
    #[default]
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    #[default]
    Floor,
    Foam,
}

/// One of the four standing conditions (eyes × surface).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Condition {
    pub eyes: Eyes,
    pub surface: Surface,
}

impl Condition {
    /// Report row order: floor/open, floor/closed, foam/open, foam/closed.
    pub const ALL: [Condition; 4] = [
        Condition::new(Eyes::Open, Surface::Floor),
        Condition::new(Eyes::Closed, Surface::Floor),
        Condition::new(Eyes::Open, Surface::Foam),
        Condition::new(Eyes::Closed, Surface::Foam),
    ];

    pub const fn new(eyes: Eyes, surface: Surface) -> Self {
        Self { eyes, surface }
    }

    /// Position in [`Condition::ALL`].
    pub fn index(self) -> usize {
        match (self.surface, self.eyes) {
            (Surface::Floor, Eyes::Open) => 0,
            (Surface::Floor, Eyes::Closed) => 1,
            (Surface::Foam, Eyes::Open) => 2,
            (Surface::Foam, Eyes::Closed) => 3,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eyes = match self.eyes {
            Eyes::Open => "open",
            Eyes::Closed => "closed",
        };
        let surface = match self.surface {
            Surface::Floor => "floor",
            Surface::Foam => "foam",
        };
        write!(f, "{surface}/{eyes}")
    }
}

impl FromStr for Eyes {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "open" | "opened" => Ok(Eyes::Open),
            "closed" => Ok(Eyes::Closed),
            other => Err(format!("unknown eyes state `{other}` (open|closed)")),
        }
    }
}

impl FromStr for Surface {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "floor" => Ok(Surface::Floor),
            "foam" => Ok(Surface::Foam),
            other => Err(format!("unknown surface `{other}` (floor|foam)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Younger,
    Older,
    #[default]
    Unspecified,
}

impl FromStr for Group {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "younger" | "young" => Ok(Group::Younger),
            "older" | "old" => Ok(Group::Older),
            "unspecified" | "none" => Ok(Group::Unspecified),
            other => Err(format!("unknown group `{other}` (younger|older|unspecified)")),
        }
    }
}

/// A participant identifier together with the group they report under.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    #[serde(default)]
    pub group: Group,
}

impl Subject {
    pub fn new(id: impl Into<String>, group: Group) -> Self {
        Self { id: id.into(), group }
    }
}

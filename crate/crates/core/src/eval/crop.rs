use std::str::FromStr;

use crate::cloud::{Aabb, PointCloud};
use crate::error::{Error, Result};

/// How much of the global map a registration is run against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Cropped to the current local map's bounds.
    Basic,
    /// Cropped to the bounds of the final, fully grown local map.
    Intermediate,
    /// The whole map.
    Complex,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Basic, Regime::Intermediate, Regime::Complex];

    pub const fn name(self) -> &'static str {
        match self {
            Regime::Basic => "basic",
            Regime::Intermediate => "intermediate",
            Regime::Complex => "complex",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown regime {s:?}")))
    }
}

/// Local-map bounds expressed in the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExtent {
    pub current: Aabb,
    /// Bounds of the final local map; contains `current` for a growing map.
    pub last: Aabb,
    pub margin: f64,
}

pub fn crop_global_map(global: &PointCloud, extent: &LocalExtent, regime: Regime) -> Result<PointCloud> {
    if !extent.current.is_valid() || !extent.last.is_valid() || !(extent.margin >= 0.0) {
        return Err(Error::InvalidParameter("invalid crop box".into()));
    }
    let bounds = match regime {
        Regime::Complex => {
            if global.is_empty() {
                return Err(Error::EmptyCrop);
            }
            return Ok(global.clone());
        }
        Regime::Basic => extent.current.expanded(extent.margin),
        Regime::Intermediate => extent.last.expanded(extent.margin),
    };
    let keep: Vec<usize> = (0..global.len()).filter(|&i| bounds.contains(&global.points[i].position)).collect();
    if keep.is_empty() {
        return Err(Error::EmptyCrop);
    }
    Ok(global.select(&keep))
}

//! Obstacle label space shared by the simulator, classifier and datastore.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Obstacle material class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Material {
    Glass,
    Concrete,
    Wood,
    Human,
}

/// Obstacle surface condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Surface {
    Dry,
    Wet,
}

/// Obstacle movement state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Movement {
    Static,
    Mobile,
}

impl Material {
    pub const ALL: [Material; 4] = [
        Material::Glass,
        Material::Concrete,
        Material::Wood,
        Material::Human,
    ];

    pub fn index(self) -> usize {
        Material::ALL.iter().position(|&m| m == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Material> {
        Material::ALL.get(i).copied()
    }
}

impl Surface {
    pub const ALL: [Surface; 2] = [Surface::Dry, Surface::Wet];

    pub fn index(self) -> usize {
        Surface::ALL.iter().position(|&s| s == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Surface> {
        Surface::ALL.get(i).copied()
    }
}

impl Movement {
    pub const ALL: [Movement; 2] = [Movement::Static, Movement::Mobile];

    pub fn index(self) -> usize {
        Movement::ALL.iter().position(|&m| m == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Movement> {
        Movement::ALL.get(i).copied()
    }
}

/// Full label of one obstacle: one class per classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObstacleLabel {
    pub material: Material,
    pub surface: Surface,
    pub movement: Movement,
}

impl ObstacleLabel {
    pub fn new(material: Material, surface: Surface, movement: Movement) -> Self {
        ObstacleLabel {
            material,
            surface,
            movement,
        }
    }

    /// All 16 material x surface x movement combinations, in index order.
    pub fn all_combinations() -> Vec<ObstacleLabel> {
        let mut out = Vec::with_capacity(16);
        for m in Material::ALL {
            for s in Surface::ALL {
                for v in Movement::ALL {
                    out.push(ObstacleLabel::new(m, s, v));
                }
            }
        }
        out
    }

    /// Dense index of this combination in `all_combinations` order (0..16).
    pub fn combo_index(&self) -> usize {
        (self.material.index() * Surface::ALL.len() + self.surface.index()) * Movement::ALL.len()
            + self.movement.index()
    }
}

/// Failure to parse a label token.
#[derive(Debug, Error, PartialEq)]
#[error("unknown {kind} label {token:?}")]
pub struct LabelParseError {
    pub kind: &'static str,
    pub token: String,
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Material::Glass => "glass",
            Material::Concrete => "concrete",
            Material::Wood => "wood",
            Material::Human => "human",
        })
    }
}

impl FromStr for Material {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "glass" => Ok(Material::Glass),
            "concrete" => Ok(Material::Concrete),
            "wood" => Ok(Material::Wood),
            "human" => Ok(Material::Human),
            _ => Err(LabelParseError {
                kind: "material",
                token: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Surface::Dry => "dry",
            Surface::Wet => "wet",
        })
    }
}

impl FromStr for Surface {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dry" => Ok(Surface::Dry),
            "wet" => Ok(Surface::Wet),
            _ => Err(LabelParseError {
                kind: "surface",
                token: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Movement::Static => "static",
            Movement::Mobile => "mobile",
        })
    }
}

impl FromStr for Movement {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Movement::Static),
            "mobile" => Ok(Movement::Mobile),
            _ => Err(LabelParseError {
                kind: "movement",
                token: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for ObstacleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.material, self.surface, self.movement)
    }
}

impl FromStr for ObstacleLabel {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(',');
        let material = parts.next().unwrap_or("").trim().parse()?;
        let surface = parts.next().unwrap_or("").trim().parse()?;
        let movement = parts.next().unwrap_or("").trim().parse()?;
        if parts.next().is_some() {
            return Err(LabelParseError {
                kind: "label",
                token: s.to_string(),
            });
        }
        Ok(ObstacleLabel::new(material, surface, movement))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_all_labels() {
        for label in ObstacleLabel::all_combinations() {
            let text = label.to_string();
            assert_eq!(text.parse::<ObstacleLabel>().unwrap(), label);
        }
    }

    #[test]
    fn combo_indices_are_dense_and_unique() {
        let combos = ObstacleLabel::all_combinations();
        assert_eq!(combos.len(), 16);
        for (i, c) in combos.iter().enumerate() {
            assert_eq!(c.combo_index(), i);
        }
    }

    #[test]
    fn unknown_tokens_rejected() {
        assert!("steel".parse::<Material>().is_err());
        assert!("glass,dry".parse::<ObstacleLabel>().is_err());
        assert!("glass,dry,static,extra".parse::<ObstacleLabel>().is_err());
    }
}

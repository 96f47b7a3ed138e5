//! Spin-1/2 encodings in Rydberg levels: two circular levels (CC) or a
//! circular plus an elliptical level (CE).

use crate::atomic::StateLabel;
use crate::error::{Result, RydError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpeciesKind {
    CC,
    CE,
}

/// An effective spin-1/2 encoded in two dressed one-body levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinSpecies {
    pub kind: SpeciesKind,
    pub up: StateLabel,
    pub down: StateLabel,
}

impl SpinSpecies {
    /// CC species: up = nC, down = (n+1)C, same m sign.
    pub fn cc(n: u32, positive_m: bool) -> Self {
        Self {
            kind: SpeciesKind::CC,
            up: StateLabel::Circular { n, positive_m },
            down: StateLabel::Circular {
                n: n + 1,
                positive_m,
            },
        }
    }

    /// CE species: up = n'C, down = (n' + step)E with step 1 or 2.
    pub fn ce(n: u32, step: u32, positive_m: bool) -> Result<Self> {
        if step != 1 && step != 2 {
            return Err(RydError::Config(format!(
                "CE scheme requires the elliptical level at n+1 or n+2, got n+{step}"
            )));
        }
        Ok(Self {
            kind: SpeciesKind::CE,
            up: StateLabel::Circular { n, positive_m },
            down: StateLabel::Elliptical {
                n: n + step,
                positive_m,
            },
        })
    }

    /// Validate an explicit label pair and infer the kind.
    pub fn from_labels(up: StateLabel, down: StateLabel) -> Result<Self> {
        match (up, down) {
            (
                StateLabel::Circular { n: n1, positive_m: s1 },
                StateLabel::Circular { n: n2, positive_m: s2 },
            ) if s1 == s2 && n2 == n1 + 1 => Ok(Self {
                kind: SpeciesKind::CC,
                up,
                down,
            }),
            (
                StateLabel::Circular { n: n1, positive_m: s1 },
                StateLabel::Elliptical { n: n2, positive_m: s2 },
            ) if s1 == s2 && (n2 == n1 + 1 || n2 == n1 + 2) => Ok(Self {
                kind: SpeciesKind::CE,
                up,
                down,
            }),
            _ => Err(RydError::Config(format!(
                "unsupported species levels up={up}, down={down}"
            ))),
        }
    }

    fn level_ms(&self) -> [i32; 2] {
        [
            self.up.bare_state().unwrap().m,
            self.down.bare_state().unwrap().m,
        ]
    }

    /// m blocks reachable from the two levels by one dipole transition.
    pub fn m_values(&self) -> Vec<i32> {
        let mut ms = Vec::new();
        for m in self.level_ms() {
            for d in -1..=1 {
                if !ms.contains(&(m + d)) {
                    ms.push(m + d);
                }
            }
        }
        ms.sort_unstable();
        ms
    }

    /// Principal-quantum-number window [n_min - pad, n_max + pad] around
    /// the two levels.
    pub fn n_window(&self, pad: u32) -> (u32, u32) {
        let n1 = match self.up {
            StateLabel::Circular { n, .. } | StateLabel::Elliptical { n, .. } => n,
            StateLabel::Generic => unreachable!("validated at construction"),
        };
        let n2 = match self.down {
            StateLabel::Circular { n, .. } | StateLabel::Elliptical { n, .. } => n,
            StateLabel::Generic => unreachable!("validated at construction"),
        };
        (n1.min(n2).saturating_sub(pad).max(1), n1.max(n2) + pad)
    }
}

impl std::fmt::Display for SpinSpecies {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.up, self.down)
    }
}

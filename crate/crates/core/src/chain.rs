//! Interaction strengths and the flattened "segments + interfaces" view of a
//! δ′ operator on an interval with Neumann ends.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Strength `β ∈ [0, ∞]` of a δ′-interaction, imposing `u(x+) − u(x−) = β·u′(x)`.
///
/// `Finite(0.0)` is no interaction at all (continuity); `Infinite` decouples
/// the two sides into independent Neumann problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    Finite(f64),
    Infinite,
}

impl Strength {
    pub const ZERO: Strength = Strength::Finite(0.0);

    /// Validating constructor: `β` must be finite and nonnegative, or `+∞`.
    pub fn new(beta: f64) -> Option<Strength> {
        if beta == f64::INFINITY {
            Some(Strength::Infinite)
        } else if beta.is_finite() && beta >= 0.0 {
            Some(Strength::Finite(beta))
        } else {
            None
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Strength::Infinite)
    }

    pub fn is_zero(self) -> bool {
        self == Strength::ZERO
    }

    /// `1/β` with the convention `1/∞ = 0`; `None` for `β = 0`.
    pub fn inverse(self) -> Option<f64> {
        match self {
            Strength::Infinite => Some(0.0),
            Strength::Finite(b) if b > 0.0 => Some(1.0 / b),
            Strength::Finite(_) => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Strength::Finite(b) => b,
            Strength::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strength::Finite(b) => write!(f, "{b}"),
            Strength::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Strength {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Strength::Finite(b) => serializer.serialize_f64(*b),
            Strength::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Strength {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct StrengthVisitor;

        impl Visitor<'_> for StrengthVisitor {
            type Value = Strength;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Strength, E> {
                Strength::new(v).ok_or_else(|| E::custom(format!("invalid strength {v}")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Strength, E> {
                Ok(Strength::Finite(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Strength, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Strength, E> {
                match v {
                    "inf" | "Infinity" | "infinity" => Ok(Strength::Infinite),
                    _ => Err(E::custom(format!("invalid strength {v:?}"))),
                }
            }
        }

        deserializer.deserialize_any(StrengthVisitor)
    }
}

/// Free segments `t_0, …, t_n` separated by δ′ interfaces `β_0, …, β_{n−1}`,
/// Neumann at both outer ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub segments: Vec<f64>,
    pub interfaces: Vec<Strength>,
}

impl Chain {
    pub fn new(segments: Vec<f64>, interfaces: Vec<Strength>) -> Chain {
        assert!(!segments.is_empty(), "a chain needs at least one segment");
        assert_eq!(
            interfaces.len() + 1,
            segments.len(),
            "one interface between each pair of segments"
        );
        assert!(
            segments.iter().all(|&t| t > 0.0 && t.is_finite()),
            "segment lengths must be positive"
        );
        Chain {
            segments,
            interfaces,
        }
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().sum()
    }

    /// Folds `β = 0` interfaces into their neighbouring segments.
    pub fn merged(&self) -> Chain {
        let mut segments = vec![self.segments[0]];
        let mut interfaces = Vec::new();
        for (beta, &t) in self.interfaces.iter().zip(&self.segments[1..]) {
            if beta.is_zero() {
                *segments.last_mut().unwrap() += t;
            } else {
                interfaces.push(*beta);
                segments.push(t);
            }
        }
        Chain {
            segments,
            interfaces,
        }
    }

    /// Splits at every infinite interface into independent Neumann blocks,
    /// each containing only finite interfaces.
    pub fn blocks(&self) -> Vec<Chain> {
        let mut out = Vec::new();
        let mut segments = vec![self.segments[0]];
        let mut interfaces = Vec::new();
        for (beta, &t) in self.interfaces.iter().zip(&self.segments[1..]) {
            if beta.is_infinite() {
                out.push(Chain {
                    segments: std::mem::take(&mut segments),
                    interfaces: std::mem::take(&mut interfaces),
                });
            } else {
                interfaces.push(*beta);
            }
            segments.push(t);
        }
        out.push(Chain {
            segments,
            interfaces,
        });
        out
    }
}

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A positive integer or infinity.
///
/// Serialized as a JSON number, or as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedNat {
    Finite(u64),
    Infinite,
}

impl ExtendedNat {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedNat::Finite(_))
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            ExtendedNat::Finite(v) => Some(v),
            ExtendedNat::Infinite => None,
        }
    }
}

/// Saturating product; infinity absorbs everything.
impl std::ops::Mul for ExtendedNat {
    type Output = ExtendedNat;

    fn mul(self, other: ExtendedNat) -> ExtendedNat {
        match (self, other) {
            (ExtendedNat::Finite(a), ExtendedNat::Finite(b)) => a
                .checked_mul(b)
                .map_or(ExtendedNat::Infinite, ExtendedNat::Finite),
            _ => ExtendedNat::Infinite,
        }
    }
}

impl From<u64> for ExtendedNat {
    fn from(v: u64) -> Self {
        ExtendedNat::Finite(v)
    }
}

impl fmt::Display for ExtendedNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedNat::Finite(v) => write!(f, "{v}"),
            ExtendedNat::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedNat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedNat::Finite(v) => serializer.serialize_u64(*v),
            ExtendedNat::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedNat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtVisitor;

        impl Visitor<'_> for ExtVisitor {
            type Value = ExtendedNat;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtendedNat, E> {
                Ok(ExtendedNat::Finite(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtendedNat, E> {
                u64::try_from(v)
                    .map(ExtendedNat::Finite)
                    .map_err(|_| E::custom("negative value"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtendedNat, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(ExtendedNat::Infinite),
                    _ => Err(E::custom(format!("unexpected string {v:?}"))),
                }
            }
        }

        deserializer.deserialize_any(ExtVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_puts_infinity_last() {
        assert!(ExtendedNat::Finite(u64::MAX) < ExtendedNat::Infinite);
        assert!(ExtendedNat::Finite(2) < ExtendedNat::Finite(3));
    }

    #[test]
    fn json_forms() {
        let v = serde_json::to_string(&[ExtendedNat::Finite(4), ExtendedNat::Infinite]).unwrap();
        assert_eq!(v, r#"[4,"inf"]"#);
        let back: Vec<ExtendedNat> = serde_json::from_str(&v).unwrap();
        assert_eq!(back, vec![ExtendedNat::Finite(4), ExtendedNat::Infinite]);
    }
}

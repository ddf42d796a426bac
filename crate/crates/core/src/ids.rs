//! Identifier newtypes.
//!
//! Every identifier orders "naturally": runs of ASCII digits compare by
//! numeric value, so `nf2 < nf10`. Lowest-id-first selection in the
//! inventory and every `BTreeMap` keyed by an id rely on this ordering.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Compares two strings, treating maximal digit runs as numbers.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let na = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let nb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (da, db) = (strip_zeros(&a[..na]), strip_zeros(&b[..nb]));
                let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db)).then(na.cmp(&nb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[na..];
                b = &b[nb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn strip_zeros(digits: &[u8]) -> &[u8] {
    let lead = digits.iter().take_while(|&&c| c == b'0').count();
    &digits[lead..]
}

/// True when `s` can be written into a trace line unquoted.
pub fn is_valid_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '/' | ':'))
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl Ord for $name {
            fn cmp(&self, other: &Self) -> Ordering {
                natural_cmp(&self.0, &other.0).then_with(|| self.0.cmp(&other.0))
            }
        }

        impl PartialOrd for $name {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:?})", stringify!($name), self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Network function id, unique within its pool.
    NfId
);
id_type!(NssiId);
id_type!(NsiId);
id_type!(TenantId);
id_type!(
    /// The tenant slice id carried by a request; doubles as the request id.
    RequestId
);
id_type!(LocationId);
id_type!(ServiceId);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order_handles_numbers() {
        assert_eq!(natural_cmp("nf2", "nf10"), Ordering::Less);
        assert_eq!(natural_cmp("nf10", "nf9"), Ordering::Greater);
        assert_eq!(natural_cmp("a", "b"), Ordering::Less);
        assert_eq!(natural_cmp("nf", "nf1"), Ordering::Less);
        assert_eq!(natural_cmp("uo/nssi-3", "uo/nssi-12"), Ordering::Less);
        assert_ne!(NfId::new("nf01").cmp(&NfId::new("nf1")), Ordering::Equal);
    }

    #[test]
    fn identifiers_reject_whitespace_and_separators() {
        assert!(is_valid_identifier("mno-1/nssi-4"));
        assert!(!is_valid_identifier("a b"));
        assert!(!is_valid_identifier("a=b"));
        assert!(!is_valid_identifier("a,b"));
        assert!(!is_valid_identifier(""));
    }
}

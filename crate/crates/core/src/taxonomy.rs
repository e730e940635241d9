//! MISC behavior-code taxonomy: the 20 raw utterance codes, the 9 grouped
//! prediction targets, the 6 session-level global codes, and the mappings
//! between them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("utterance carries NC and is excluded from coding")]
    UncodableUtterance,
    #[error("unknown code label `{0}`")]
    UnknownLabel(String),
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            /// Position in [`Self::ALL`].
            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = TaxonomyError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($label => Ok($name::$variant),)+
                    other => Err(TaxonomyError::UnknownLabel(other.to_string())),
                }
            }
        }
    };
}

label_enum! {
    /// Therapist utterance-level code as annotated by human coders.
    RawMiscCode {
        Adp => "ADP",
        Adw => "ADW",
        Af => "AF",
        Co => "CO",
        Di => "DI",
        Ec => "EC",
        Fa => "FA",
        Fi => "FI",
        Gi => "GI",
        Quo => "QUO",
        Quc => "QUC",
        Rcp => "RCP",
        Rcw => "RCW",
        Res => "RES",
        Rec => "REC",
        Rf => "RF",
        Su => "SU",
        St => "ST",
        Wa => "WA",
        Nc => "NC",
    }
}

label_enum! {
    /// Grouped prediction target.
    GroupCode {
        Fa => "FA",
        Gi => "GI",
        Quc => "QUC",
        Quo => "QUO",
        Rec => "REC",
        Res => "RES",
        Min => "MIN",
        Mia => "MIA",
        St => "ST",
    }
}

label_enum! {
    /// Session-level global rating.
    GlobalCodeName {
        Acceptance => "acceptance",
        Empathy => "empathy",
        Direction => "direction",
        AutonomySupport => "autonomy_support",
        Collaboration => "collaboration",
        Evocation => "evocation",
    }
}

/// Utterance counts per group in the UCC training split, used as the default
/// synthetic code distribution and for class-weight sanity checks.
pub const TRAIN_GROUP_COUNTS: [(GroupCode, u32); 9] = [
    (GroupCode::Fa, 5581),
    (GroupCode::Gi, 3797),
    (GroupCode::Quc, 1911),
    (GroupCode::Quo, 1116),
    (GroupCode::Rec, 2212),
    (GroupCode::Res, 609),
    (GroupCode::Min, 479),
    (GroupCode::Mia, 428),
    (GroupCode::St, 542),
];

/// Collapse a raw code into its prediction group. NC has no group.
pub fn map_raw_to_group(raw: RawMiscCode) -> Result<GroupCode, TaxonomyError> {
    use RawMiscCode as R;
    Ok(match raw {
        R::Fa => GroupCode::Fa,
        R::Gi | R::Fi => GroupCode::Gi,
        R::Quc => GroupCode::Quc,
        R::Quo => GroupCode::Quo,
        R::Rec | R::Rf => GroupCode::Rec,
        R::Res => GroupCode::Res,
        R::Adp | R::Adw | R::Co | R::Di | R::Rcw | R::Rcp | R::Wa => GroupCode::Min,
        R::Af | R::Ec | R::Su => GroupCode::Mia,
        R::St => GroupCode::St,
        R::Nc => return Err(TaxonomyError::UncodableUtterance),
    })
}

/// Raw codes belonging to a group, in [`RawMiscCode::ALL`] order.
pub fn group_members(group: GroupCode) -> Vec<RawMiscCode> {
    RawMiscCode::ALL
        .iter()
        .copied()
        .filter(|&r| map_raw_to_group(r).ok() == Some(group))
        .collect()
}

/// Label shown in the feedback report, where both reflection kinds merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DisplayCode {
    Reflection,
    Other(GroupCode),
}

impl FromStr for DisplayCode {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "RE" => Ok(DisplayCode::Reflection),
            other => other.parse().map(DisplayCode::Other),
        }
    }
}

impl Serialize for DisplayCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DisplayCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for DisplayCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisplayCode::Reflection => f.write_str("RE"),
            DisplayCode::Other(g) => g.fmt(f),
        }
    }
}

pub fn composite_reflection(code: GroupCode) -> DisplayCode {
    match code {
        GroupCode::Res | GroupCode::Rec => DisplayCode::Reflection,
        other => DisplayCode::Other(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn table_examples() {
        assert_eq!(map_raw_to_group(RawMiscCode::Rf), Ok(GroupCode::Rec));
        assert_eq!(map_raw_to_group(RawMiscCode::Fa), Ok(GroupCode::Fa));
        assert_eq!(map_raw_to_group(RawMiscCode::Wa), Ok(GroupCode::Min));
        assert_eq!(
            map_raw_to_group(RawMiscCode::Nc),
            Err(TaxonomyError::UncodableUtterance)
        );
    }

    #[test]
    fn mapping_is_a_partition() {
        assert_eq!(RawMiscCode::ALL.len(), 20);
        assert_eq!(GroupCode::ALL.len(), 9);
        let coded: Vec<_> = RawMiscCode::ALL
            .iter()
            .filter(|&&r| r != RawMiscCode::Nc)
            .collect();
        assert_eq!(coded.len(), 19);
        let image: BTreeSet<_> = coded.iter().map(|&&r| map_raw_to_group(r).unwrap()).collect();
        assert_eq!(image.len(), 9, "surjective onto the groups");
        let total: usize = GroupCode::ALL.iter().map(|&g| group_members(g).len()).sum();
        assert_eq!(total, 19, "each raw code lands in exactly one group");
        assert_eq!(
            group_members(GroupCode::Min),
            vec![
                RawMiscCode::Adp,
                RawMiscCode::Adw,
                RawMiscCode::Co,
                RawMiscCode::Di,
                RawMiscCode::Rcp,
                RawMiscCode::Rcw,
                RawMiscCode::Wa
            ]
        );
        assert_eq!(
            group_members(GroupCode::Mia),
            vec![RawMiscCode::Af, RawMiscCode::Ec, RawMiscCode::Su]
        );
    }

    #[test]
    fn reflections_collapse() {
        assert_eq!(composite_reflection(GroupCode::Res), DisplayCode::Reflection);
        assert_eq!(composite_reflection(GroupCode::Rec), DisplayCode::Reflection);
        assert_eq!(
            composite_reflection(GroupCode::Quo),
            DisplayCode::Other(GroupCode::Quo)
        );
        assert_eq!(composite_reflection(GroupCode::Rec).to_string(), "RE");
    }

    #[test]
    fn labels_parse_and_serialize() {
        for &r in RawMiscCode::ALL {
            assert_eq!(r.as_str().parse::<RawMiscCode>().unwrap(), r);
        }
        assert_eq!(serde_json::to_string(&GroupCode::Mia).unwrap(), "\"MIA\"");
        assert_eq!(
            serde_json::to_string(&GlobalCodeName::AutonomySupport).unwrap(),
            "\"autonomy_support\""
        );
        assert!("XYZ".parse::<GroupCode>().is_err());
        let d: DisplayCode = serde_json::from_str("\"RE\"").unwrap();
        assert_eq!(d, DisplayCode::Reflection);
        let d: DisplayCode = serde_json::from_str("\"QUO\"").unwrap();
        assert_eq!(d, DisplayCode::Other(GroupCode::Quo));
        assert_eq!(serde_json::to_string(&DisplayCode::Reflection).unwrap(), "\"RE\"");
    }

    #[test]
    fn index_matches_all_order() {
        for (i, g) in GroupCode::ALL.iter().enumerate() {
            assert_eq!(g.index(), i);
        }
    }
}

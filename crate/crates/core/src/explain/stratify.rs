use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyClass {
    High,
    Medium,
    Low,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerClass {
    pub class: EfficiencyClass,
    /// `(occupant, rank)` sorted by rank.
    pub members: Vec<(String, u32)>,
    /// The median-rank member.
    pub representative: String,
}

/// Splits occupants by final rank (1 = best) into three contiguous classes
/// of near-equal size, giving remainders to the better-ranked classes first.
/// Each class is represented by its median-rank member, the better-ranked of
/// the two middle members when the class size is even.
pub fn stratify_players(ranks: &BTreeMap<String, u32>) -> Result<[PlayerClass; 3]> {
    if ranks.len() < 3 {
        return Err(Error::TooFewPlayers(ranks.len()));
    }
    let distinct: BTreeSet<u32> = ranks.values().copied().collect();
    if distinct.len() != ranks.len() {
        return Err(Error::InvalidConfig("ranks must be distinct".into()));
    }
    let mut sorted: Vec<(String, u32)> = ranks.iter().map(|(k, &v)| (k.clone(), v)).collect();
    sorted.sort_by_key(|(_, r)| *r);
    let n = sorted.len();
    let sizes = [
        n / 3 + usize::from(!n.is_multiple_of(3)),
        n / 3 + usize::from(n % 3 > 1),
        n / 3,
    ];
    let mut rest = sorted.into_iter();
    let classes = [
        EfficiencyClass::High,
        EfficiencyClass::Medium,
        EfficiencyClass::Low,
    ];
    Ok(std::array::from_fn(|i| {
        let members: Vec<(String, u32)> = rest.by_ref().take(sizes[i]).collect();
        let representative = members[(members.len() - 1) / 2].0.clone();
        PlayerClass {
            class: classes[i],
            members,
            representative,
        }
    }))
}

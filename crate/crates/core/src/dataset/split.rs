use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PatchDescriptor;
use crate::error::{Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        })
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "validation" | "val" => Ok(SplitName::Validation),
            "test" => Ok(SplitName::Test),
            other => Err(Error::InvalidParam(format!("unknown split {other:?}"))),
        }
    }
}

/// Patient-disjoint partition of patch ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn get(&self, which: SplitName) -> &[String] {
        match which {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    fn get_mut(&mut self, k: usize) -> &mut Vec<String> {
        match k {
            0 => &mut self.train,
            1 => &mut self.validation,
            _ => &mut self.test,
        }
    }
}

/// Splits patches into train/validation/test without separating a patient's
/// patches.
///
/// Patients are shuffled with `seed`, then visited largest-first (stable, so
/// equal sizes keep the shuffled order) and assigned to the split with the
/// largest remaining deficit against its target patch count. Every split
/// receives at least one patient.
pub fn split_by_patient(
    patches: &[PatchDescriptor],
    fractions: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidParam(format!(
            "split fractions must be in [0, 1] and sum to 1, got {fractions:?}"
        )));
    }
    let mut by_patient: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for p in patches {
        by_patient
            .entry(p.patient_id.as_str())
            .or_default()
            .push(p.patch_id.as_str());
    }
    if by_patient.len() < 3 {
        return Err(Error::Dataset(format!(
            "{} patient(s) cannot fill 3 patient-disjoint splits",
            by_patient.len()
        )));
    }

    let mut patients: Vec<(&str, Vec<&str>)> = by_patient.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);
    patients.sort_by_key(|(_, p)| std::cmp::Reverse(p.len()));

    let total = patches.len() as f64;
    let targets = fractions.map(|f| f * total);
    let mut filled = [0usize; 3];
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    let remaining_total = patients.len();
    for (visited, (_, patch_ids)) in patients.iter().enumerate() {
        let left = remaining_total - visited;
        let empty: Vec<usize> = (0..3).filter(|&k| filled[k] == 0).collect();
        let k = if left <= empty.len() {
            empty[0]
        } else {
            (0..3)
                .max_by(|&a, &b| {
                    let da = targets[a] - filled[a] as f64;
                    let db = targets[b] - filled[b] as f64;
                    // ties go to the earlier split
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap()
        };
        filled[k] += patch_ids.len();
        split
            .get_mut(k)
            .extend(patch_ids.iter().map(|s| s.to_string()));
    }
    for k in 0..3 {
        split.get_mut(k).sort();
    }
    Ok(split)
}

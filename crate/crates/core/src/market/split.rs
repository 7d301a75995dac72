use std::collections::BTreeSet;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// Days 1-20 of every month train, 21-25 validate, the rest test.
pub fn split_of(day: NaiveDate) -> Split {
    match day.day() {
        1..=20 => Split::Train,
        21..=25 => Split::Validation,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: BTreeSet<NaiveDate>,
    pub validation: BTreeSet<NaiveDate>,
    pub test: BTreeSet<NaiveDate>,
}

impl DatasetSplit {
    pub fn days(&self, split: Split) -> &BTreeSet<NaiveDate> {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn from_days(days: impl IntoIterator<Item = NaiveDate>) -> Self {
        let mut out = Self::default();
        for day in days {
            match split_of(day) {
                Split::Train => out.train.insert(day),
                Split::Validation => out.validation.insert(day),
                Split::Test => out.test.insert(day),
            };
        }
        out
    }
}

/// Partitions the inclusive day span `first..=last`.
pub fn chronological_split(first: NaiveDate, last: NaiveDate) -> DatasetSplit {
    DatasetSplit::from_days(first.iter_days().take_while(|d| *d <= last))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn days(y: i32, m: u32, range: std::ops::RangeInclusive<u32>) -> BTreeSet<NaiveDate> {
        range.map(|x| d(y, m, x)).collect()
    }

    #[test]
    fn january() {
        let s = chronological_split(d(2022, 1, 1), d(2022, 1, 31));
        assert_eq!(s.train, days(2022, 1, 1..=20));
        assert_eq!(s.validation, days(2022, 1, 21..=25));
        assert_eq!(s.test, days(2022, 1, 26..=31));
    }

    #[test]
    fn february() {
        let s = chronological_split(d(2022, 2, 1), d(2022, 2, 28));
        assert_eq!(s.test, days(2022, 2, 26..=28));
    }

    #[test]
    fn single_validation_day() {
        let s = chronological_split(d(2022, 3, 22), d(2022, 3, 22));
        assert!(s.train.is_empty() && s.test.is_empty());
        assert_eq!(s.validation, days(2022, 3, 22..=22));
    }

    #[test]
    fn partition_is_disjoint_and_complete() {
        let s = chronological_split(d(2022, 1, 1), d(2022, 12, 31));
        assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 365);
        assert!(s.train.is_disjoint(&s.validation));
        assert!(s.train.is_disjoint(&s.test));
        assert!(s.validation.is_disjoint(&s.test));
    }
}

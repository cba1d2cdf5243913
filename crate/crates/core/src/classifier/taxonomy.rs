//! Object taxonomies: 16 fine classes, the 6-way training taxonomy and the
//! 7-way labeling taxonomy, plus the merge maps between them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ClassifierError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineClass {
    Chair,
    Stool,
    Bed,
    Sofa,
    Bench,
    Table,
    Desk,
    NightStand,
    Dresser,
    Wardrobe,
    Bookshelf,
    Bathtub,
    Toilet,
    Stairs,
    Door,
    Window,
}

impl FineClass {
    pub const ALL: [FineClass; 16] = [
        FineClass::Chair,
        FineClass::Stool,
        FineClass::Bed,
        FineClass::Sofa,
        FineClass::Bench,
        FineClass::Table,
        FineClass::Desk,
        FineClass::NightStand,
        FineClass::Dresser,
        FineClass::Wardrobe,
        FineClass::Bookshelf,
        FineClass::Bathtub,
        FineClass::Toilet,
        FineClass::Stairs,
        FineClass::Door,
        FineClass::Window,
    ];

    /// The 14 classes the network is trained on (doors and windows excluded).
    pub const TRAINED: [FineClass; 14] = [
        FineClass::Chair,
        FineClass::Stool,
        FineClass::Bed,
        FineClass::Sofa,
        FineClass::Bench,
        FineClass::Table,
        FineClass::Desk,
        FineClass::NightStand,
        FineClass::Dresser,
        FineClass::Wardrobe,
        FineClass::Bookshelf,
        FineClass::Bathtub,
        FineClass::Toilet,
        FineClass::Stairs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FineClass::Chair => "chair",
            FineClass::Stool => "stool",
            FineClass::Bed => "bed",
            FineClass::Sofa => "sofa",
            FineClass::Bench => "bench",
            FineClass::Table => "table",
            FineClass::Desk => "desk",
            FineClass::NightStand => "night_stand",
            FineClass::Dresser => "dresser",
            FineClass::Wardrobe => "wardrobe",
            FineClass::Bookshelf => "bookshelf",
            FineClass::Bathtub => "bathtub",
            FineClass::Toilet => "toilet",
            FineClass::Stairs => "stairs",
            FineClass::Door => "door",
            FineClass::Window => "window",
        }
    }

    pub fn is_trained(self) -> bool {
        !matches!(self, FineClass::Door | FineClass::Window)
    }

    /// Training-taxonomy class; `None` for the untrained door/window classes.
    pub fn coarse(self) -> Option<CoarseClass> {
        use FineClass::*;
        Some(match self {
            Chair | Stool | Bed | Sofa | Bench => CoarseClass::SitOn,
            Table | Desk | NightStand => CoarseClass::PutOn,
            Dresser | Wardrobe | Bookshelf => CoarseClass::StoreIn,
            Bathtub => CoarseClass::Bathtub,
            Toilet => CoarseClass::Toilet,
            Stairs => CoarseClass::Stairs,
            Door | Window => return None,
        })
    }

    /// Labeling-taxonomy class; total over all 16 fine classes.
    pub fn label(self) -> LabelClass {
        match self {
            FineClass::Door => LabelClass::Door,
            FineClass::Window => LabelClass::Window,
            other => other.coarse().expect("trained class has a coarse class").label(),
        }
    }
}

impl fmt::Display for FineClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FineClass {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match s.as_str() {
            "nightstand" => "night_stand",
            "shelf" | "shelves" => "bookshelf",
            other => other,
        };
        FineClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == alias)
            .ok_or_else(|| ClassifierError::UnknownClass(s.to_string()))
    }
}

/// The six classes the network predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseClass {
    SitOn,
    PutOn,
    StoreIn,
    Bathtub,
    Toilet,
    Stairs,
}

impl CoarseClass {
    pub const ALL: [CoarseClass; 6] = [
        CoarseClass::SitOn,
        CoarseClass::PutOn,
        CoarseClass::StoreIn,
        CoarseClass::Bathtub,
        CoarseClass::Toilet,
        CoarseClass::Stairs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CoarseClass::SitOn => "sit_on",
            CoarseClass::PutOn => "put_on",
            CoarseClass::StoreIn => "store_in",
            CoarseClass::Bathtub => "bathtub",
            CoarseClass::Toilet => "toilet",
            CoarseClass::Stairs => "stairs",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> LabelClass {
        match self {
            CoarseClass::SitOn => LabelClass::SitOn,
            CoarseClass::PutOn => LabelClass::PutOn,
            CoarseClass::StoreIn => LabelClass::StoreIn,
            CoarseClass::Bathtub | CoarseClass::Toilet => LabelClass::Sanitary,
            CoarseClass::Stairs => LabelClass::Stairs,
        }
    }
}

impl fmt::Display for CoarseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoarseClass {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        CoarseClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| ClassifierError::UnknownClass(s.to_string()))
    }
}

/// The seven classes that receive a tactile glyph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelClass {
    SitOn,
    PutOn,
    StoreIn,
    Sanitary,
    Window,
    Door,
    Stairs,
}

impl LabelClass {
    pub const ALL: [LabelClass; 7] = [
        LabelClass::SitOn,
        LabelClass::PutOn,
        LabelClass::StoreIn,
        LabelClass::Sanitary,
        LabelClass::Window,
        LabelClass::Door,
        LabelClass::Stairs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelClass::SitOn => "sit_on",
            LabelClass::PutOn => "put_on",
            LabelClass::StoreIn => "store_in",
            LabelClass::Sanitary => "sanitary",
            LabelClass::Window => "window",
            LabelClass::Door => "door",
            LabelClass::Stairs => "stairs",
        }
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelClass {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        LabelClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| ClassifierError::UnknownClass(s.to_string()))
    }
}

/// Fine → training-taxonomy merge. Door and window have no training class.
pub fn merge_labels(fine: FineClass) -> Option<CoarseClass> {
    fine.coarse()
}

/// Fine → labeling-taxonomy merge (total).
pub fn merge_for_labeling(fine: FineClass) -> LabelClass {
    fine.label()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_groupings() {
        assert_eq!(merge_labels(FineClass::Stool), Some(CoarseClass::SitOn));
        assert_eq!(merge_labels(FineClass::NightStand), Some(CoarseClass::PutOn));
        assert_eq!(merge_labels(FineClass::Bookshelf), Some(CoarseClass::StoreIn));
        assert_eq!(merge_labels(FineClass::Stairs), Some(CoarseClass::Stairs));
        assert_eq!(merge_labels(FineClass::Door), None);
        assert_eq!(merge_for_labeling(FineClass::Toilet), LabelClass::Sanitary);
        assert_eq!(merge_for_labeling(FineClass::Bathtub), LabelClass::Sanitary);
        assert_eq!(merge_for_labeling(FineClass::Window), LabelClass::Window);
    }

    #[test]
    fn labeling_merge_is_total_and_surjective() {
        let mut hit: Vec<LabelClass> = FineClass::ALL.iter().map(|f| f.label()).collect();
        hit.sort();
        hit.dedup();
        assert_eq!(hit, LabelClass::ALL.to_vec());
    }

    #[test]
    fn trained_classes_cover_the_training_taxonomy() {
        let mut hit: Vec<CoarseClass> = FineClass::TRAINED.iter().filter_map(|f| f.coarse()).collect();
        hit.sort();
        hit.dedup();
        assert_eq!(hit, CoarseClass::ALL.to_vec());
        assert_eq!(FineClass::TRAINED.len(), 14);
    }

    #[test]
    fn names_parse_back() {
        for c in FineClass::ALL {
            assert_eq!(c.name().parse::<FineClass>().unwrap(), c);
        }
        for c in CoarseClass::ALL {
            assert_eq!(c.name().parse::<CoarseClass>().unwrap(), c);
        }
        assert_eq!("nightstand".parse::<FineClass>().unwrap(), FineClass::NightStand);
        assert!("lamp".parse::<FineClass>().is_err());
    }
}

//! Tactile glyphs: a 5×5 raised-dot bitmap per labeling class, with separate
//! glyphs for ascending and descending stairs.

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{CoarseClass, LabelClass};
use crate::depthio::PointCloud;
use crate::geomfeat::{percentile_nearest_rank, Footprint, GeometricClass};

pub const GLYPH_SIZE: usize = 5;
pub const MIN_DOTS: usize = 4;
pub const MIN_GLYPH_DISTANCE: usize = 4;
/// Median below-ground depth (mm) above which stairs are read as descending.
pub const STAIRS_DOWN_DEPTH: f64 = 100.0;

#[derive(Debug, Error)]
pub enum LabelingError {
    #[error("stairs need a direction")]
    StairsWithoutDirection,
    #[error("direction given for non-stairs class {0}")]
    UnexpectedDirection(LabelClass),
    #[error("glyph sheet line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("glyph sheet: {0}")]
    InvalidSheet(String),
    #[error("height class {0} outside 1..=3")]
    HeightClass(u8),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StairsDirection {
    Up,
    Down,
}

impl StairsDirection {
    pub fn name(self) -> &'static str {
        match self {
            StairsDirection::Up => "up",
            StairsDirection::Down => "down",
        }
    }
}

impl fmt::Display for StairsDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    pub tag: String,
    /// `bits[row][col]`, row 0 at the top (far side of the grid).
    pub bits: [[bool; GLYPH_SIZE]; GLYPH_SIZE],
}

impl Glyph {
    pub fn dots(&self) -> usize {
        self.bits.iter().flatten().filter(|&&b| b).count()
    }

    pub fn distance(&self, other: &Glyph) -> usize {
        self.bits.iter().flatten().zip(other.bits.iter().flatten()).filter(|(a, b)| a != b).count()
    }

    pub fn raised(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..GLYPH_SIZE).flat_map(move |r| (0..GLYPH_SIZE).filter(move |&c| self.bits[r][c]).map(move |c| (r, c)))
    }
}

/// Sheet tags in canonical order.
pub const SHEET_TAGS: [&str; 8] =
    ["sit_on", "put_on", "store_in", "sanitary", "window", "door", "stairs_up", "stairs_down"];

pub const BUILTIN_SHEET: &str = "\
sit_on
#....
#....
#####
#...#
#...#
put_on
.....
#####
.#.#.
.#.#.
.#.#.
store_in
#####
#...#
#.#.#
#...#
#####
sanitary
.....
#...#
#...#
#####
.#.#.
window
#####
#.#.#
#####
#.#.#
#####
door
.###.
.#.#.
.#.##
.#.#.
.#.#.
stairs_up
....#
...##
..###
.####
#####
stairs_down
#....
##...
###..
####.
#####
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphSheet {
    glyphs: Vec<Glyph>,
}

impl Default for GlyphSheet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl GlyphSheet {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SHEET).expect("built-in glyph sheet is valid")
    }

    /// Parses blocks of a tag line followed by five rows of `.`/`#`. Blank
    /// lines and lines starting with `;` are ignored.
    pub fn parse(text: &str) -> Result<Self, LabelingError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with(';'));
        let mut glyphs: Vec<Glyph> = Vec::new();
        while let Some((line, tag)) = lines.next() {
            if !SHEET_TAGS.contains(&tag) {
                return Err(LabelingError::Parse { line, msg: format!("unknown glyph tag {tag:?}") });
            }
            if glyphs.iter().any(|g| g.tag == tag) {
                return Err(LabelingError::Parse { line, msg: format!("duplicate glyph {tag:?}") });
            }
            let mut bits = [[false; GLYPH_SIZE]; GLYPH_SIZE];
            for row in &mut bits {
                let (line, text) = lines
                    .next()
                    .ok_or_else(|| LabelingError::Parse { line, msg: format!("glyph {tag:?} needs 5 rows") })?;
                let cells: Vec<char> = text.chars().collect();
                if cells.len() != GLYPH_SIZE || cells.iter().any(|c| !matches!(c, '.' | '#')) {
                    return Err(LabelingError::Parse { line, msg: format!("bad glyph row {text:?}") });
                }
                for (b, c) in row.iter_mut().zip(cells) {
                    *b = c == '#';
                }
            }
            glyphs.push(Glyph { tag: tag.to_string(), bits });
        }
        let sheet = Self {
            glyphs: SHEET_TAGS
                .iter()
                .map(|t| {
                    glyphs
                        .iter()
                        .find(|g| g.tag == *t)
                        .cloned()
                        .ok_or_else(|| LabelingError::InvalidSheet(format!("missing glyph {t:?}")))
                })
                .collect::<Result<_, _>>()?,
        };
        sheet.validate()?;
        Ok(sheet)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabelingError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), LabelingError> {
        for g in &self.glyphs {
            if g.dots() < MIN_DOTS {
                return Err(LabelingError::InvalidSheet(format!("glyph {:?} has fewer than {MIN_DOTS} dots", g.tag)));
            }
        }
        for (i, a) in self.glyphs.iter().enumerate() {
            for b in &self.glyphs[i + 1..] {
                if a.distance(b) < MIN_GLYPH_DISTANCE {
                    return Err(LabelingError::InvalidSheet(format!(
                        "glyphs {:?} and {:?} differ in fewer than {MIN_GLYPH_DISTANCE} cells",
                        a.tag, b.tag
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn glyphs(&self) -> &[Glyph] {
        &self.glyphs
    }

    pub fn get(&self, tag: &str) -> Option<&Glyph> {
        self.glyphs.iter().find(|g| g.tag == tag)
    }

    /// Canonical text form; parsing it yields the same sheet.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.glyphs {
            out.push_str(&g.tag);
            out.push('\n');
            for row in &g.bits {
                out.extend(row.iter().map(|&b| if b { '#' } else { '.' }));
                out.push('\n');
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn glyph_for(&self, class: LabelClass, stairs: Option<StairsDirection>) -> Result<&Glyph, LabelingError> {
        let tag = match (class, stairs) {
            (LabelClass::Stairs, Some(StairsDirection::Up)) => "stairs_up",
            (LabelClass::Stairs, Some(StairsDirection::Down)) => "stairs_down",
            (LabelClass::Stairs, None) => return Err(LabelingError::StairsWithoutDirection),
            (other, Some(_)) => return Err(LabelingError::UnexpectedDirection(other)),
            (other, None) => other.name(),
        };
        Ok(self.get(tag).expect("sheet holds every tag"))
    }
}

/// Pin level of a glyph's raised dots.
pub fn label_level(height_class: u8) -> Result<u8, LabelingError> {
    match height_class {
        1..=3 => Ok(1 + height_class),
        other => Err(LabelingError::HeightClass(other)),
    }
}

/// Stairs whose points reach well below the ground are descending; anything
/// else, including ambiguous or flat segments, reads as ascending.
pub fn stairs_direction(points: &PointCloud, ground_y: f64) -> StairsDirection {
    let below: Vec<f64> = points.iter().map(|p| ground_y - p.y).filter(|&d| d > 0.0).collect();
    match percentile_nearest_rank(below, 0.5) {
        Some(depth) if depth > STAIRS_DOWN_DEPTH => StairsDirection::Down,
        _ => StairsDirection::Up,
    }
}

/// Everything the synthesis stage needs to draw one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDescriptor {
    pub segment_id: usize,
    /// Accepted semantic class; `None` when the prediction was gated out or
    /// no model was loaded.
    pub class: Option<CoarseClass>,
    /// Confidence of the network's best guess, when a model ran.
    pub confidence: Option<f64>,
    pub stairs: Option<StairsDirection>,
    pub geometry: GeometricClass,
    pub footprint: Footprint,
}

impl ObjectDescriptor {
    /// Builds a descriptor, deriving the stairs direction from `points` when
    /// the class is stairs.
    pub fn new(
        segment_id: usize,
        class: Option<CoarseClass>,
        confidence: Option<f64>,
        geometry: GeometricClass,
        footprint: Footprint,
        points: &PointCloud,
        ground_y: f64,
    ) -> Self {
        let stairs = (class == Some(CoarseClass::Stairs)).then(|| stairs_direction(points, ground_y));
        Self { segment_id, class, confidence, stairs, geometry, footprint }
    }

    pub fn label_class(&self) -> Option<LabelClass> {
        self.class.map(CoarseClass::label)
    }

    pub fn glyph<'a>(&self, sheet: &'a GlyphSheet) -> Result<Option<&'a Glyph>, LabelingError> {
        self.label_class().map(|c| sheet.glyph_for(c, self.stairs)).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::Point3;
    use crate::scenegen::{stairs_cloud, StairsKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const BUILTIN_DIGEST: &str = "3687f638d0d6b161f4615b20ee0ee22965f414541c5ea3184e2d42907613663d";

    #[test]
    fn builtin_sheet_is_pinned() {
        let sheet = GlyphSheet::builtin();
        assert_eq!(sheet.to_text(), BUILTIN_SHEET);
        assert_eq!(sheet.digest(), BUILTIN_DIGEST);
    }

    #[test]
    fn sheet_properties() {
        let sheet = GlyphSheet::builtin();
        assert_eq!(sheet.glyphs().len(), 8);
        for (i, a) in sheet.glyphs().iter().enumerate() {
            assert!(a.dots() >= MIN_DOTS && a.dots() <= 25);
            for b in &sheet.glyphs()[i + 1..] {
                assert!(a.distance(b) >= MIN_GLYPH_DISTANCE, "{} vs {}", a.tag, b.tag);
            }
        }
    }

    #[test]
    fn glyph_for_is_total() {
        let sheet = GlyphSheet::builtin();
        for class in LabelClass::ALL {
            let dir = (class == LabelClass::Stairs).then_some(StairsDirection::Up);
            assert!(sheet.glyph_for(class, dir).is_ok());
        }
        let up = sheet.glyph_for(LabelClass::Stairs, Some(StairsDirection::Up)).unwrap();
        let down = sheet.glyph_for(LabelClass::Stairs, Some(StairsDirection::Down)).unwrap();
        assert!(up.distance(down) >= 4);
        assert!(matches!(sheet.glyph_for(LabelClass::Stairs, None), Err(LabelingError::StairsWithoutDirection)));
        assert!(sheet.glyph_for(LabelClass::Door, Some(StairsDirection::Up)).is_err());
        assert_eq!(sheet.glyph_for(LabelClass::Sanitary, None).unwrap().tag, "sanitary");
    }

    #[test]
    fn parse_rejects_bad_sheets() {
        let sparse = BUILTIN_SHEET.replacen("sit_on\n#....\n#....\n#####\n#...#\n#...#", "sit_on\n#....\n.....\n.....\n.....\n#...#", 1);
        assert!(matches!(GlyphSheet::parse(&sparse), Err(LabelingError::InvalidSheet(_))));
        let twin = BUILTIN_SHEET.replacen("stairs_down\n#....\n##...\n###..\n####.\n#####", "stairs_down\n....#\n...##\n..###\n.####\n####.", 1);
        assert!(GlyphSheet::parse(&twin).is_err());
        assert!(GlyphSheet::parse("sit_on\n#....\n").is_err());
        assert!(GlyphSheet::parse("chair\n").is_err());
        let missing: String = BUILTIN_SHEET.lines().take(42).map(|l| format!("{l}\n")).collect();
        assert!(matches!(GlyphSheet::parse(&missing), Err(LabelingError::InvalidSheet(_))));
    }

    #[test]
    fn label_levels() {
        assert_eq!(label_level(1).unwrap(), 2);
        assert_eq!(label_level(2).unwrap(), 3);
        assert_eq!(label_level(3).unwrap(), 4);
        assert!(label_level(0).is_err() && label_level(4).is_err());
    }

    #[test]
    fn stairs_directions_from_generated_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ground = -900.0;
        let up = stairs_cloud(StairsKind::Up, ground, 1500.0, 1500, &mut rng);
        let down = stairs_cloud(StairsKind::Down, ground, 1500.0, 1500, &mut rng);
        assert_eq!(stairs_direction(&up, ground), StairsDirection::Up);
        assert_eq!(stairs_direction(&down, ground), StairsDirection::Down);
        let flat: PointCloud = (0..50).map(|i| Point3::new(i as f64, ground + 1.0, 2000.0)).collect();
        assert_eq!(stairs_direction(&flat, ground), StairsDirection::Up);
    }
}

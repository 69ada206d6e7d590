//! Cell addresses, contraction maps and planar coordinates.
//!
//! A word `(w_1, ..., w_n)` addresses the cell `F_w K` with
//! `F_w = F_{w_1} ∘ F_{w_2} ∘ ... ∘ F_{w_n}`: the first digit picks the
//! top-level cell, each further digit descends one level. Children of `w`
//! are therefore `w` with one digit appended, and lexicographic order keeps
//! siblings contiguous.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

/// Corners of the unit triangle: `q0` left, `q1` upper, `q2` right.
pub const CORNERS: [Point2; 3] = [
    Point2::new(0.0, 0.0),
    Point2::new(0.5, HALF_SQRT3),
    Point2::new(1.0, 0.0),
];

/// Barycentric coordinates (w.r.t. `CORNERS`) of the six SG₃ fixed points:
/// the three corners, then the midpoints of q0q1, q1q2 and q0q2.
const SG3_FIXED_BARY: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fractal {
    /// Sierpinski gasket: three maps of ratio 1/2.
    Sg,
    /// SG₃: six maps of ratio 1/3.
    Sg3,
}

impl Fractal {
    pub fn alphabet(self) -> u8 {
        match self {
            Fractal::Sg => 3,
            Fractal::Sg3 => 6,
        }
    }

    pub fn ratio(self) -> f64 {
        match self {
            Fractal::Sg => 0.5,
            Fractal::Sg3 => 1.0 / 3.0,
        }
    }

    /// Barycentric coordinates of the fixed point of map `digit`.
    pub fn fixed_point_bary(self, digit: u8) -> [f64; 3] {
        match self {
            Fractal::Sg => {
                let mut b = [0.0; 3];
                b[digit as usize] = 1.0;
                b
            }
            Fractal::Sg3 => SG3_FIXED_BARY[digit as usize],
        }
    }

    pub fn fixed_point(self, digit: u8) -> Point2 {
        from_bary(self.fixed_point_bary(digit), &CORNERS)
    }

    pub fn name(self) -> &'static str {
        match self {
            Fractal::Sg => "sg",
            Fractal::Sg3 => "sg3",
        }
    }
}

fn from_bary(b: [f64; 3], corners: &[Point2; 3]) -> Point2 {
    Point2::new(
        b[0] * corners[0].x + b[1] * corners[1].x + b[2] * corners[2].x,
        b[0] * corners[0].y + b[1] * corners[1].y + b[2] * corners[2].y,
    )
}

/// Address of a cell: a finite digit sequence over the fractal's alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    fractal: Fractal,
    digits: Vec<u8>,
}

impl Word {
    pub fn new(fractal: Fractal, digits: Vec<u8>) -> Result<Self> {
        let alphabet = fractal.alphabet();
        if let Some(&digit) = digits.iter().find(|&&d| d >= alphabet) {
            return Err(Error::DigitOutOfRange { digit, alphabet });
        }
        Ok(Self { fractal, digits })
    }

    pub fn sg(digits: &[u8]) -> Result<Self> {
        Self::new(Fractal::Sg, digits.to_vec())
    }

    pub fn empty(fractal: Fractal) -> Self {
        Self {
            fractal,
            digits: Vec::new(),
        }
    }

    /// Parses `"0,1,2"`, `"[0,1,2]"` or `"012"`.
    pub fn parse(fractal: Fractal, text: &str) -> Result<Self> {
        let trimmed = text.trim().trim_start_matches('[').trim_end_matches(']');
        let digits: Vec<u8> = if trimmed.contains(',') || trimmed.contains(' ') {
            trimmed
                .split([',', ' '])
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<u8>()
                        .map_err(|_| Error::InvalidArgument(format!("bad digit {s:?}")))
                })
                .collect::<Result<_>>()?
        } else {
            trimmed
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| Error::InvalidArgument(format!("bad digit {c:?}")))
                })
                .collect::<Result<_>>()?
        };
        Self::new(fractal, digits)
    }

    /// Word of the given level whose lexicographic rank is `index`.
    pub fn from_index(fractal: Fractal, level: usize, mut index: usize) -> Self {
        let a = fractal.alphabet() as usize;
        let mut digits = vec![0u8; level];
        for slot in digits.iter_mut().rev() {
            *slot = (index % a) as u8;
            index /= a;
        }
        Self { fractal, digits }
    }

    pub fn fractal(&self) -> Fractal {
        self.fractal
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn level(&self) -> usize {
        self.digits.len()
    }

    /// Lexicographic rank among words of the same level.
    pub fn index(&self) -> usize {
        let a = self.fractal.alphabet() as usize;
        self.digits.iter().fold(0, |acc, &d| acc * a + d as usize)
    }

    pub fn child(&self, digit: u8) -> Result<Word> {
        let mut digits = self.digits.clone();
        digits.push(digit);
        Word::new(self.fractal, digits)
    }

    pub fn parent(&self) -> Option<Word> {
        if self.digits.is_empty() {
            return None;
        }
        Some(Word {
            fractal: self.fractal,
            digits: self.digits[..self.digits.len() - 1].to_vec(),
        })
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word {
            fractal: self.fractal,
            digits: self.digits[..len.min(self.digits.len())].to_vec(),
        }
    }

    pub fn starts_with(&self, other: &Word) -> bool {
        self.fractal == other.fractal && self.digits.starts_with(&other.digits)
    }

    /// Word of the composed map `F_prefix ∘ F_self`.
    pub fn prepend(&self, prefix: &[u8]) -> Result<Word> {
        let mut digits = prefix.to_vec();
        digits.extend_from_slice(&self.digits);
        Word::new(self.fractal, digits)
    }

    pub fn concat(&self, suffix: &[u8]) -> Result<Word> {
        let mut digits = self.digits.clone();
        digits.extend_from_slice(suffix);
        Word::new(self.fractal, digits)
    }

    /// Applies a permutation of the three SG corners digit by digit.
    /// This is the action of the triangle symmetry `q_i -> q_{perm[i]}`.
    pub fn permuted(&self, perm: &[u8; 3]) -> Word {
        debug_assert_eq!(self.fractal, Fractal::Sg);
        Word {
            fractal: self.fractal,
            digits: self.digits.iter().map(|&d| perm[d as usize]).collect(),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.digits.serialize(s)
    }
}

/// Applies the single contraction `F_digit`.
pub fn ifs_map(fractal: Fractal, digit: u8, p: Point2) -> Point2 {
    let fixed = fractal.fixed_point(digit);
    fractal.ratio() * (p - fixed) + fixed
}

/// Image of `p` under `F_w = F_{w_1} ∘ ... ∘ F_{w_n}`.
pub fn ifs_apply(word: &Word, p: Point2) -> Point2 {
    word.digits
        .iter()
        .rev()
        .fold(p, |acc, &d| ifs_map(word.fractal, d, acc))
}

/// The three corners of the cell `F_w K`, images of `q0, q1, q2`.
pub fn cell_corners(word: &Word) -> [Point2; 3] {
    CORNERS.map(|q| ifs_apply(word, q))
}

/// Corners of child `digit` given the parent's corners. Exact affine
/// refinement, equivalent to `cell_corners(parent.child(digit))`.
pub fn child_corners(fractal: Fractal, parent: &[Point2; 3], digit: u8) -> [Point2; 3] {
    let r = fractal.ratio();
    let fixed = from_bary(fractal.fixed_point_bary(digit), parent);
    [0, 1, 2].map(|i| r * parent[i] + (1.0 - r) * fixed)
}

/// All words of length `m` in lexicographic order.
pub fn enumerate_cells(fractal: Fractal, m: usize) -> Vec<Word> {
    let count = (fractal.alphabet() as usize).pow(m as u32);
    (0..count)
        .map(|i| Word::from_index(fractal, m, i))
        .collect()
}

/// The six symmetries of the triangle, as corner permutations.
pub const D3: [[u8; 3]; 6] = [
    [0, 1, 2],
    [1, 2, 0],
    [2, 0, 1],
    [0, 2, 1],
    [2, 1, 0],
    [1, 0, 2],
];

/// Image of a point under the triangle symmetry sending `q_i` to `q_{perm[i]}`.
pub fn apply_symmetry(perm: &[u8; 3], p: Point2) -> Point2 {
    // barycentric coordinates in the unit triangle
    let b1 = p.y / HALF_SQRT3;
    let b2 = p.x - 0.5 * b1;
    let b0 = 1.0 - b1 - b2;
    let mut image = [0.0; 3];
    for (i, b) in [b0, b1, b2].into_iter().enumerate() {
        image[perm[i] as usize] = b;
    }
    from_bary(image, &CORNERS)
}

/// Smallest word in the D₃ orbit of an SG word.
pub fn orbit_representative(word: &Word) -> Word {
    D3.iter()
        .map(|perm| word.permuted(perm))
        .min()
        .expect("D3 is nonempty")
}

/// One representative per D₃ orbit of level-`m` SG words, sorted.
pub fn orbit_representatives(m: usize) -> Vec<Word> {
    let mut reps: Vec<Word> = enumerate_cells(Fractal::Sg, m)
        .into_iter()
        .filter(|w| orbit_representative(w) == *w)
        .collect();
    reps.sort();
    reps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Point2, b: Point2) -> bool {
        a.dist(b) < 1e-12
    }

    #[test]
    fn empty_word_is_identity() {
        let p = Point2::new(0.3, 0.1);
        assert!(close(ifs_apply(&Word::empty(Fractal::Sg), p), p));
    }

    #[test]
    fn corner_maps_fix_their_corner() {
        let w = Word::sg(&[0]).unwrap();
        assert!(close(ifs_apply(&w, CORNERS[0]), CORNERS[0]));
        assert!(close(ifs_apply(&w, CORNERS[2]), Point2::new(0.5, 0.0)));
        for d in 0..6u8 {
            let w = Word::new(Fractal::Sg3, vec![d]).unwrap();
            let fixed = Fractal::Sg3.fixed_point(d);
            assert!(close(ifs_apply(&w, fixed), fixed));
        }
    }

    #[test]
    fn corners_of_root_and_first_cell() {
        let root = cell_corners(&Word::empty(Fractal::Sg));
        assert!(close(root[0], Point2::new(0.0, 0.0)));
        assert!(close(root[1], Point2::new(0.5, 3f64.sqrt() / 2.0)));
        assert!(close(root[2], Point2::new(1.0, 0.0)));
        let c = cell_corners(&Word::sg(&[0]).unwrap());
        assert!(close(c[1], Point2::new(0.25, 3f64.sqrt() / 4.0)));
        assert!(close(c[2], Point2::new(0.5, 0.0)));
    }

    #[test]
    fn first_digit_is_outermost() {
        // [0,1] lies inside the top-level cell [0].
        let c = cell_corners(&Word::sg(&[0, 1]).unwrap());
        let outer = cell_corners(&Word::sg(&[0]).unwrap());
        assert!(close(c[1], outer[1]));
    }

    #[test]
    fn child_corners_match_direct_composition() {
        for f in [Fractal::Sg, Fractal::Sg3] {
            for w in enumerate_cells(f, 2) {
                let parent = cell_corners(&w);
                for d in 0..f.alphabet() {
                    let direct = cell_corners(&w.child(d).unwrap());
                    let refined = child_corners(f, &parent, d);
                    for i in 0..3 {
                        assert!(close(direct[i], refined[i]));
                    }
                }
            }
        }
    }

    #[test]
    fn enumeration_counts_and_order() {
        let l1 = enumerate_cells(Fractal::Sg, 1);
        assert_eq!(
            l1.iter().map(|w| w.digits().to_vec()).collect::<Vec<_>>(),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(enumerate_cells(Fractal::Sg, 4).len(), 81);
        assert_eq!(enumerate_cells(Fractal::Sg3, 2).len(), 36);
        for (i, w) in enumerate_cells(Fractal::Sg3, 2).iter().enumerate() {
            assert_eq!(w.index(), i);
        }
    }

    #[test]
    fn rejects_out_of_range_digits() {
        assert_eq!(
            Word::sg(&[0, 3]),
            Err(Error::DigitOutOfRange {
                digit: 3,
                alphabet: 3
            })
        );
        assert!(Word::new(Fractal::Sg3, vec![5]).is_ok());
    }

    #[test]
    fn parse_formats() {
        let w = Word::parse(Fractal::Sg, "[0,1,2]").unwrap();
        assert_eq!(w.digits(), &[0, 1, 2]);
        assert_eq!(Word::parse(Fractal::Sg, "012").unwrap(), w);
        assert_eq!(Word::parse(Fractal::Sg, "0 1 2").unwrap(), w);
        assert_eq!(w.to_string(), "[0,1,2]");
        assert!(Word::parse(Fractal::Sg, "0,x").is_err());
    }

    #[test]
    fn orbit_counts() {
        let counts: Vec<usize> = (1..=4).map(|m| orbit_representatives(m).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 14]);
    }

    #[test]
    fn symmetry_maps_cells_to_permuted_cells() {
        for perm in &D3 {
            for w in enumerate_cells(Fractal::Sg, 2) {
                let image: Vec<Point2> = cell_corners(&w)
                    .iter()
                    .map(|&p| apply_symmetry(perm, p))
                    .collect();
                let target = cell_corners(&w.permuted(perm));
                for i in 0..3 {
                    assert!(close(image[i], target[perm[i] as usize]));
                }
            }
        }
    }
}

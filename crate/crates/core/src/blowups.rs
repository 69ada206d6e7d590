//! Sampling functions on blowups.
//!
//! For a digit sequence `i_1, i_2, ...` the blowup `K_(j)` is the union of
//! preimages `F_{i_1}^{-1} ... F_{i_j}^{-1} K`. Its m-scale cells are the
//! (m+j)-cells of `K` seen through that coordinate change, so the stage-j
//! sampler for `F_w K` is the ordinary level-(m+j) sampling function of the
//! cell `F_{i_j} ... F_{i_1} F_w K`, i.e. of the word `i_j ... i_1 w`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Fractal, Word};
use crate::sampling::{BandlimitedFunction, Normalization, SamplingSpace, SamplingStats};

/// Largest level `m + j` a stage may reach.
pub const STAGE_CAP: usize = 5;

pub const INFINITE_OCCURRENCE_NOTE: &str =
    "only a finite prefix is known; the requirement that two digits recur infinitely often is not checked";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlowupSequence {
    digits: Vec<u8>,
}

impl BlowupSequence {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(&digit) = digits.iter().find(|&&d| d > 2) {
            return Err(Error::DigitOutOfRange { digit, alphabet: 3 });
        }
        Ok(Self { digits })
    }

    /// `(a, b, a, b, ...)` of the given length.
    pub fn alternating(a: u8, b: u8, len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| if i % 2 == 0 { a } else { b }).collect())
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// `[i_j, ..., i_1]`.
    pub fn reversed_prefix(&self, j: usize) -> Result<Vec<u8>> {
        if j > self.digits.len() {
            return Err(Error::InvalidArgument(format!(
                "stage {j} needs {j} digits, sequence has {}",
                self.digits.len()
            )));
        }
        Ok(self.digits[..j].iter().rev().copied().collect())
    }

    /// Address in `K_(n+1)` of an m-scale cell of `K_(n)`, both written as
    /// cells of `K`.
    pub fn embed(&self, word: &Word, n: usize) -> Result<Word> {
        let digit = *self.digits.get(n).ok_or_else(|| {
            Error::InvalidArgument(format!("sequence too short for stage {}", n + 1))
        })?;
        word.prepend(&[digit])
    }
}

#[derive(Debug, Clone)]
pub struct BlowupSampler {
    pub base: Word,
    pub stage: usize,
    /// `i_j ... i_1 w`, the cell of `K` the sampler is built for.
    pub word: Word,
    pub function: BandlimitedFunction,
    pub stats: SamplingStats,
    /// `3^{-(m+j)}`.
    pub constant_term: f64,
    /// `∫_K φ_j`, computed from the quadrature.
    pub measured_constant: f64,
    /// Max deviation of the (m+j)-cell averages from the delta vector.
    pub delta_error: f64,
}

pub fn blowup_sampler(
    w: &Word,
    sequence: &BlowupSequence,
    stage: usize,
    norm: Normalization,
    depth: usize,
) -> Result<BlowupSampler> {
    if w.fractal() != Fractal::Sg {
        return Err(Error::UnsupportedGraph("blowups are built on SG"));
    }
    let level = w.level() + stage;
    if level > STAGE_CAP {
        return Err(Error::CapacityCap {
            requested: level,
            cap: STAGE_CAP,
        });
    }
    let word = w.prepend(&sequence.reversed_prefix(stage)?)?;
    let space = SamplingSpace::get(level)?;
    let quad = level + depth;
    let (function, stats) = space
        .sampling_functions(std::slice::from_ref(&word), norm, quad)?
        .remove(0);

    let averages = function.averages(norm, quad)?;
    let target = word.index();
    let delta_error = averages
        .iter()
        .enumerate()
        .map(|(i, a)| (a - if i == target { 1.0 } else { 0.0 }).abs())
        .fold(0.0f64, f64::max);
    let continuous = function.averages(Normalization::B, quad)?;
    let measured_constant = continuous.iter().sum::<f64>() / continuous.len() as f64;

    Ok(BlowupSampler {
        base: w.clone(),
        stage,
        word,
        function,
        stats,
        constant_term: 3f64.powi(-(level as i32)),
        measured_constant,
        delta_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StageMetrics {
    pub stage: usize,
    pub word: Word,
    /// Sup of the blowup sampler over `K_(j)`, equal to the sup of `φ_j` on `K`.
    pub sup: f64,
    /// `3^{m+j} ∫_K φ_j²`, the normalization in which the bound reads `≤ c`.
    pub scaled_l2: f64,
    /// `∫_{K_(j)} ψ̃_j²` with each copy of `K` of measure 1: `3^{-m} scaled_l2`.
    pub raw_l2: f64,
    pub constant_term: f64,
    pub measured_constant: f64,
    pub delta_error: f64,
    pub quad_level: usize,
    pub gap: f64,
}

pub fn conjecture_metrics(
    w: &Word,
    sequence: &BlowupSequence,
    stages: usize,
    norm: Normalization,
    depth: usize,
) -> Result<Vec<StageMetrics>> {
    let m = w.level() as i32;
    (0..=stages)
        .map(|j| {
            let s = blowup_sampler(w, sequence, j, norm, depth)?;
            Ok(StageMetrics {
                stage: j,
                word: s.word.clone(),
                sup: s.stats.sup_norm,
                scaled_l2: s.stats.scaled_l2,
                raw_l2: s.stats.scaled_l2 * 3f64.powi(-m),
                constant_term: s.constant_term,
                measured_constant: s.measured_constant,
                delta_error: s.delta_error,
                quad_level: s.stats.quad_level,
                gap: s.stats.gap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stage_words_prepend_reversed_digits() {
        let seq = BlowupSequence::new(vec![0, 1, 2]).unwrap();
        let w = Word::sg(&[1]).unwrap();
        assert_eq!(seq.reversed_prefix(3).unwrap(), vec![2, 1, 0]);
        let s = blowup_sampler(&w, &seq, 2, Normalization::B, 5).unwrap();
        assert_eq!(s.word.digits(), &[1, 0, 1]);
        assert!(BlowupSequence::new(vec![3]).is_err());
        assert!(seq.reversed_prefix(4).is_err());
    }

    #[test]
    fn stage_zero_is_the_sampling_function() {
        let seq = BlowupSequence::alternating(0, 1, 4).unwrap();
        let w = Word::sg(&[0]).unwrap();
        let s = blowup_sampler(&w, &seq, 0, Normalization::B, 6).unwrap();
        let (_, direct) =
            crate::sampling::sampling_function(&w, Normalization::B, Some(7)).unwrap();
        assert_eq!(s.word, w);
        assert_abs_diff_eq!(s.stats.sup_norm, direct.sup_norm, epsilon = 1e-14);
    }

    #[test]
    fn constant_term() {
        let seq = BlowupSequence::alternating(0, 1, 4).unwrap();
        let w = Word::sg(&[0]).unwrap();
        let s = blowup_sampler(&w, &seq, 1, Normalization::B, 6).unwrap();
        assert_abs_diff_eq!(s.constant_term, 1.0 / 9.0);
        assert_abs_diff_eq!(s.measured_constant, 1.0 / 9.0, epsilon = 1e-10);
        assert!(s.delta_error < 1e-9);
    }

    #[test]
    fn cap_is_enforced() {
        let seq = BlowupSequence::new(vec![0; 8]).unwrap();
        let w = Word::sg(&[0, 0]).unwrap();
        assert_eq!(
            blowup_sampler(&w, &seq, 4, Normalization::B, 2).unwrap_err(),
            Error::CapacityCap {
                requested: 6,
                cap: 5
            }
        );
    }

    #[test]
    fn embedding_nests() {
        let seq = BlowupSequence::new(vec![2, 0, 1]).unwrap();
        let w = Word::sg(&[1, 1]).unwrap();
        let mut stage_word = w.clone();
        for n in 0..3 {
            let next = seq.embed(&stage_word, n).unwrap();
            assert_eq!(next.level(), stage_word.level() + 1);
            assert!(next.digits().ends_with(w.digits()));
            stage_word = next;
        }
        assert_eq!(stage_word.digits(), &[1, 0, 2, 1, 1]);
    }
}

//! Electrode-array geometry, bipolar pairs and stimulation waveforms.
//!
//! The array is a fixed 64x64 grid. Channels are numbered row-major, so
//! `(row, col)` maps to `row * 64 + col`.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

/// Side length of the electrode grid.
pub const GRID_SIZE: usize = 64;
/// Total number of recording channels.
pub const N_CHANNELS: usize = GRID_SIZE * GRID_SIZE;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("electrode ({row},{col}) outside the {GRID_SIZE}x{GRID_SIZE} grid")]
    OutOfBounds { row: i64, col: i64 },
    #[error("channel {0} outside [0,{N_CHANNELS})")]
    BadChannel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElectrodeCoord {
    pub row: u16,
    pub col: u16,
}

impl ElectrodeCoord {
    pub fn new(row: i64, col: i64) -> Result<Self, GridError> {
        if (0..GRID_SIZE as i64).contains(&row) && (0..GRID_SIZE as i64).contains(&col) {
            Ok(Self { row: row as u16, col: col as u16 })
        } else {
            Err(GridError::OutOfBounds { row, col })
        }
    }

    pub fn in_bounds(&self) -> bool {
        (self.row as usize) < GRID_SIZE && (self.col as usize) < GRID_SIZE
    }

    /// Coordinate shifted by `(dr, dc)`, checked against the grid.
    pub fn offset(&self, dr: i64, dc: i64) -> Result<Self, GridError> {
        Self::new(self.row as i64 + dr, self.col as i64 + dc)
    }

    pub fn chebyshev(&self, other: &Self) -> u16 {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }

    pub fn euclidean(&self, other: &Self) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }
}

impl fmt::Display for ElectrodeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

pub fn channel_index(c: ElectrodeCoord) -> Result<usize, GridError> {
    if !c.in_bounds() {
        return Err(GridError::OutOfBounds { row: c.row as i64, col: c.col as i64 });
    }
    Ok(c.row as usize * GRID_SIZE + c.col as usize)
}

pub fn coord_of(channel: usize) -> Result<ElectrodeCoord, GridError> {
    if channel >= N_CHANNELS {
        return Err(GridError::BadChannel(channel));
    }
    Ok(ElectrodeCoord { row: (channel / GRID_SIZE) as u16, col: (channel % GRID_SIZE) as u16 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipolarPair {
    pub positive: ElectrodeCoord,
    pub negative: ElectrodeCoord,
}

impl BipolarPair {
    /// Pair with the negative pole on the immediate right of `positive`.
    pub fn rightward(positive: ElectrodeCoord) -> Result<Self, GridError> {
        Ok(Self { positive, negative: positive.offset(0, 1)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveShape {
    Monophasic,
    Biphasic,
}

/// Rectangular current pulse. Amplitudes are per bipolar pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub shape: WaveShape,
    pub amplitude_ua: f64,
    pub delta_plus_us: f64,
    pub delta_minus_us: f64,
}

impl Waveform {
    pub fn monophasic(amplitude_ua: f64, width_us: f64) -> Self {
        Self { shape: WaveShape::Monophasic, amplitude_ua, delta_plus_us: width_us, delta_minus_us: 0.0 }
    }

    pub fn biphasic(amplitude_ua: f64, delta_plus_us: f64, delta_minus_us: f64) -> Self {
        Self { shape: WaveShape::Biphasic, amplitude_ua, delta_plus_us, delta_minus_us }
    }

    /// Charge delivered by the depolarizing phase, in nC.
    pub fn leading_charge_nc(&self) -> f64 {
        self.amplitude_ua * self.delta_plus_us * 1e-3
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = self.amplitude_ua.is_finite()
            && self.delta_plus_us.is_finite()
            && self.delta_minus_us.is_finite();
        if !finite || self.amplitude_ua <= 0.0 {
            out.push(Violation::Waveform("amplitude must be positive".into()));
        }
        if !finite || self.delta_plus_us <= 0.0 {
            out.push(Violation::Waveform("positive phase duration must be positive".into()));
        }
        match self.shape {
            WaveShape::Monophasic if self.delta_minus_us != 0.0 => {
                out.push(Violation::Waveform("monophasic pulse with a negative phase".into()))
            }
            WaveShape::Biphasic if !(self.delta_minus_us > 0.0) => {
                out.push(Violation::Waveform("biphasic pulse without a negative phase".into()))
            }
            _ => {}
        }
        out
    }
}

/// The digital form of one input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimPattern {
    pub label: u32,
    pub pairs: Vec<BipolarPair>,
    pub waveform: Waveform,
    /// Skip the grid-adjacency requirement for pairs.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_distant_pairs: bool,
}

impl StimPattern {
    pub fn new(label: u32, pairs: Vec<BipolarPair>, waveform: Waveform) -> Self {
        Self { label, pairs, waveform, allow_distant_pairs: false }
    }

    /// All electrodes touched by the pattern, both polarities.
    pub fn electrodes(&self) -> impl Iterator<Item = ElectrodeCoord> + '_ {
        self.pairs.iter().flat_map(|p| [p.positive, p.negative])
    }

    pub fn is_valid(&self) -> bool {
        validate_pattern(self).is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("empty pattern")]
    EmptyPattern,
    #[error("electrode reuse at {0}")]
    ElectrodeReuse(ElectrodeCoord),
    #[error("electrode {0} out of bounds")]
    OutOfBounds(ElectrodeCoord),
    #[error("pair {0} uses the same electrode for both poles")]
    DegeneratePair(usize),
    #[error("pair {0} poles are not grid-adjacent")]
    NotAdjacent(usize),
    #[error("invalid waveform: {0}")]
    Waveform(String),
}

/// Every invariant violation of `p`; an empty list means the pattern is valid.
pub fn validate_pattern(p: &StimPattern) -> Vec<Violation> {
    let mut out = Vec::new();
    if p.pairs.is_empty() {
        out.push(Violation::EmptyPattern);
    }
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for (i, pair) in p.pairs.iter().enumerate() {
        for e in [pair.positive, pair.negative] {
            if !e.in_bounds() {
                out.push(Violation::OutOfBounds(e));
            }
        }
        if pair.positive == pair.negative {
            out.push(Violation::DegeneratePair(i));
        } else {
            if !p.allow_distant_pairs && pair.positive.chebyshev(&pair.negative) != 1 {
                out.push(Violation::NotAdjacent(i));
            }
            for e in [pair.positive, pair.negative] {
                if !seen.insert(e) && reported.insert(e) {
                    out.push(Violation::ElectrodeReuse(e));
                }
            }
        }
    }
    out.extend(p.waveform.violations());
    out
}

/// One line of a pattern file: pairs are `[pos_row, pos_col, neg_row, neg_col]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PatternRecord {
    label: u32,
    waveform: Waveform,
    pairs: Vec<[u16; 4]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_distant_pairs: bool,
}

/// Write patterns as line-delimited JSON, one pattern per line.
pub fn write_patterns<W: std::io::Write>(mut w: W, patterns: &[StimPattern]) -> std::io::Result<()> {
    for p in patterns {
        let rec = PatternRecord {
            label: p.label,
            waveform: p.waveform,
            pairs: p
                .pairs
                .iter()
                .map(|q| [q.positive.row, q.positive.col, q.negative.row, q.negative.col])
                .collect(),
            allow_distant_pairs: p.allow_distant_pairs,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a line-delimited pattern file. Blank lines are skipped; patterns are
/// returned as written, without validation.
pub fn read_patterns<R: std::io::BufRead>(r: R) -> std::io::Result<Vec<StimPattern>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PatternRecord = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", lineno + 1))
        })?;
        out.push(StimPattern {
            label: rec.label,
            waveform: rec.waveform,
            pairs: rec
                .pairs
                .iter()
                .map(|q| BipolarPair {
                    positive: ElectrodeCoord { row: q[0], col: q[1] },
                    negative: ElectrodeCoord { row: q[2], col: q[3] },
                })
                .collect(),
            allow_distant_pairs: rec.allow_distant_pairs,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(r: i64, c: i64) -> ElectrodeCoord {
        ElectrodeCoord::new(r, c).unwrap()
    }

    #[test]
    fn channel_index_corners() {
        assert_eq!(channel_index(at(0, 0)).unwrap(), 0);
        assert_eq!(channel_index(at(63, 63)).unwrap(), 4095);
    }

    #[test]
    fn channel_index_matches_row_major_enumeration() {
        let mut n = 0;
        'outer: for r in 0..GRID_SIZE {
            for c in 0..GRID_SIZE {
                if (r, c) == (1, 2) {
                    break 'outer;
                }
                n += 1;
            }
        }
        assert_eq!(channel_index(at(1, 2)).unwrap(), n);
        assert_eq!(n, 66);
    }

    #[test]
    fn channel_bijection_is_exhaustive() {
        for ch in 0..N_CHANNELS {
            assert_eq!(channel_index(coord_of(ch).unwrap()).unwrap(), ch);
        }
        assert!(coord_of(N_CHANNELS).is_err());
    }

    #[test]
    fn out_of_bounds_coordinates() {
        assert!(ElectrodeCoord::new(64, 0).is_err());
        assert!(ElectrodeCoord::new(0, -1).is_err());
        let bad = ElectrodeCoord { row: 70, col: 1 };
        assert!(matches!(channel_index(bad), Err(GridError::OutOfBounds { .. })));
    }

    #[test]
    fn single_pair_monophasic_is_valid() {
        let p = StimPattern::new(
            0,
            vec![BipolarPair { positive: at(10, 10), negative: at(10, 11) }],
            Waveform::monophasic(10.0, 20.0),
        );
        assert!(validate_pattern(&p).is_empty());
    }

    #[test]
    fn empty_pattern_violation() {
        let p = StimPattern::new(0, vec![], Waveform::monophasic(10.0, 20.0));
        assert_eq!(validate_pattern(&p), vec![Violation::EmptyPattern]);
    }

    #[test]
    fn electrode_reuse_violation() {
        let p = StimPattern::new(
            0,
            vec![
                BipolarPair { positive: at(10, 10), negative: at(10, 11) },
                BipolarPair { positive: at(11, 10), negative: at(10, 10) },
            ],
            Waveform::monophasic(10.0, 20.0),
        );
        assert_eq!(validate_pattern(&p), vec![Violation::ElectrodeReuse(at(10, 10))]);
    }

    #[test]
    fn waveform_violations() {
        let pair = vec![BipolarPair { positive: at(1, 1), negative: at(2, 2) }];
        let mut w = Waveform::monophasic(10.0, 20.0);
        w.delta_minus_us = 5.0;
        assert_eq!(validate_pattern(&StimPattern::new(0, pair.clone(), w)).len(), 1);
        let w = Waveform::biphasic(4.0, 100.0, 0.0);
        assert_eq!(validate_pattern(&StimPattern::new(0, pair.clone(), w)).len(), 1);
        let w = Waveform::monophasic(0.0, 20.0);
        assert_eq!(validate_pattern(&StimPattern::new(0, pair, w)).len(), 1);
    }

    #[test]
    fn distant_pair_needs_override() {
        let mut p = StimPattern::new(
            0,
            vec![BipolarPair { positive: at(1, 1), negative: at(1, 5) }],
            Waveform::monophasic(10.0, 20.0),
        );
        assert_eq!(validate_pattern(&p), vec![Violation::NotAdjacent(0)]);
        p.allow_distant_pairs = true;
        assert!(p.is_valid());
    }

    #[test]
    fn pattern_file_round_trip() {
        let p = StimPattern::new(
            7,
            vec![
                BipolarPair { positive: at(3, 4), negative: at(3, 5) },
                BipolarPair { positive: at(5, 4), negative: at(6, 5) },
            ],
            Waveform::biphasic(4.0, 100.0, 100.0),
        );
        let mut buf = Vec::new();
        write_patterns(&mut buf, &[p.clone(), p.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"pairs\":[[3,4,3,5],[5,4,6,5]]"));
        assert_eq!(read_patterns(&buf[..]).unwrap(), vec![p.clone(), p]);
    }
}

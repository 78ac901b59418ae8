//! Spatially embedded synaptic network and its day-to-day drift.

use super::{CultureConfig, CultureError, Layout};
use crate::grid::GRID_SIZE;
use crate::rng;
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

/// Neuron positions are continuous, in electrode-pitch units, covering the
/// square `[-0.5, 63.5)^2` so that every electrode sits at a cell center.
pub(crate) const EXTENT_LO: f64 = -0.5;
pub(crate) const EXTENT: f64 = GRID_SIZE as f64;

/// Unit-cell bucket index over neuron positions.
#[derive(Debug, Clone)]
pub(crate) struct SpatialIndex {
    cells: Vec<Vec<u32>>,
}

impl SpatialIndex {
    fn cell_of(x: f64) -> usize {
        ((x - EXTENT_LO).floor().max(0.0) as usize).min(GRID_SIZE - 1)
    }

    pub fn new(positions: &[(f64, f64)]) -> Self {
        let mut cells = vec![Vec::new(); GRID_SIZE * GRID_SIZE];
        for (i, &(r, c)) in positions.iter().enumerate() {
            cells[Self::cell_of(r) * GRID_SIZE + Self::cell_of(c)].push(i as u32);
        }
        Self { cells }
    }

    /// Calls `f(index)` for every neuron whose cell lies within `radius` of
    /// `(r, c)`; callers filter by exact distance.
    pub fn for_each_near(&self, r: f64, c: f64, radius: f64, mut f: impl FnMut(u32)) {
        let lo_r = Self::cell_of(r - radius);
        let hi_r = Self::cell_of(r + radius);
        let lo_c = Self::cell_of(c - radius);
        let hi_c = Self::cell_of(c + radius);
        for cr in lo_r..=hi_r {
            for cc in lo_c..=hi_c {
                for &i in &self.cells[cr * GRID_SIZE + cc] {
                    f(i);
                }
            }
        }
    }
}

/// Compressed sparse rows of outgoing synapses: row = presynaptic neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synapses {
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
    /// Signed PSP amplitude in mV.
    pub weights: Vec<f32>,
}

impl Synapses {
    pub fn row(&self, i: usize) -> (&[u32], &[f32]) {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        (&self.targets[a..b], &self.weights[a..b])
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Sorted `(pre, post)` support of the weight matrix.
    pub fn support(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for i in 0..self.n_rows() {
            let (t, _) = self.row(i);
            out.extend(t.iter().map(|&j| (i as u32, j)));
        }
        out.sort_unstable();
        out
    }
}

/// Fraction of `a`'s edges also present in `b`.
pub fn support_overlap(a: &Synapses, b: &Synapses) -> f64 {
    let sa = a.support();
    let sb = b.support();
    if sa.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < sa.len() && j < sb.len() {
        match sa[i].cmp(&sb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / sa.len() as f64
}

/// Drift applied between recording days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DayDrift {
    /// Fraction of synapses moved to new targets.
    pub rewire_frac: f64,
    /// Coefficient of variation of the multiplicative lognormal weight jitter.
    pub weight_jitter_cv: f64,
    /// Standard deviation of the daily random displacement of each soma
    /// (pitch, per axis).
    pub soma_shift: f64,
}

impl Default for DayDrift {
    fn default() -> Self {
        Self { rewire_frac: 0.15, weight_jitter_cv: 0.1, soma_shift: 0.3 }
    }
}

impl DayDrift {
    pub const NONE: DayDrift = DayDrift { rewire_frac: 0.0, weight_jitter_cv: 0.0, soma_shift: 0.0 };
}

/// The synthetic reservoir: a current-based LIF network laid over the grid.
#[derive(Debug, Clone)]
pub struct Culture {
    pub(crate) cfg: CultureConfig,
    pub positions: Vec<(f64, f64)>,
    pub excitatory: Vec<bool>,
    pub synapses: Synapses,
    pub day_index: u32,
    pub(crate) index: SpatialIndex,
    /// Kernel scale used for connection probabilities.
    pub(crate) kernel_scale: f64,
    pub(crate) contacts: super::recording::Contacts,
}

fn kernel(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Neighbour candidates beyond this many sigmas are ignored.
const KERNEL_CUTOFF_SIGMAS: f64 = 5.0;

impl Culture {
    pub fn config(&self) -> &CultureConfig {
        &self.cfg
    }

    pub fn n_neurons(&self) -> usize {
        self.positions.len()
    }

    pub fn mean_out_degree(&self) -> f64 {
        self.synapses.n_edges() as f64 / self.n_neurons() as f64
    }

    fn dist2(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
    }

    /// Connection probability between distinct neurons `i` and `j`.
    pub fn connection_probability(&self, i: usize, j: usize) -> f64 {
        (self.kernel_scale * kernel(self.dist2(i, j), self.cfg.connect_sigma)).min(1.0)
    }

    fn draw_weight(&self, pre: usize, rng: &mut rng::Rng) -> f32 {
        let normal = Normal::new(self.cfg.syn_weight_mean, self.cfg.syn_weight_std.max(0.0)).expect("finite weight params");
        let w = normal.sample(rng).abs();
        if self.excitatory[pre] {
            w as f32
        } else {
            -(w * self.cfg.inhibitory_scale) as f32
        }
    }

    /// Draw a new postsynaptic partner for `pre` from the Gaussian kernel,
    /// avoiding `pre` itself and anything in `exclude`.
    fn draw_partner(&self, pre: usize, exclude: &[u32], rng: &mut rng::Rng) -> Option<u32> {
        let sigma = self.cfg.connect_sigma;
        let (r0, c0) = self.positions[pre];
        let step = Normal::new(0.0, sigma).expect("positive sigma");
        for _ in 0..64 {
            let r = r0 + step.sample(rng);
            let c = c0 + step.sample(rng);
            if !(EXTENT_LO..EXTENT_LO + EXTENT).contains(&r) || !(EXTENT_LO..EXTENT_LO + EXTENT).contains(&c) {
                continue;
            }
            let mut best: Option<(f64, u32)> = None;
            let mut radius = 1.0;
            while best.is_none() && radius <= EXTENT {
                self.index.for_each_near(r, c, radius, |j| {
                    let (pr, pc) = self.positions[j as usize];
                    let d2 = (pr - r).powi(2) + (pc - c).powi(2);
                    if best.is_none_or(|(bd, bj)| d2 < bd || (d2 == bd && j < bj)) {
                        best = Some((d2, j));
                    }
                });
                radius *= 2.0;
            }
            match best {
                Some((_, j)) if j as usize != pre && !exclude.contains(&j) => return Some(j),
                _ => continue,
            }
        }
        None
    }
}

pub fn grow_culture(cfg: &CultureConfig) -> Result<Culture, CultureError> {
    cfg.validate().map_err(CultureError::Config)?;
    let n = cfg.n_neurons;
    let mut rng = rng::stream(cfg.seed, "culture-layout", 0);
    let positions: Vec<(f64, f64)> = match cfg.layout {
        Layout::Uniform => (0..n)
            .map(|_| (EXTENT_LO + rng.random::<f64>() * EXTENT, EXTENT_LO + rng.random::<f64>() * EXTENT))
            .collect(),
        Layout::Lattice => {
            // One neuron per lattice cell, placed uniformly inside it.
            let side = (n as f64).sqrt().ceil() as usize;
            let cell = EXTENT / side as f64;
            (0..n)
                .map(|k| {
                    let (a, b) = ((k / side) as f64, (k % side) as f64);
                    (
                        EXTENT_LO + (a + rng.random::<f64>()) * cell,
                        EXTENT_LO + (b + rng.random::<f64>()) * cell,
                    )
                })
                .collect()
        }
    };
    let n_inh = (cfg.frac_inhibitory * n as f64).round() as usize;
    // The last n_inh neurons in a shuffled order are inhibitory.
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut excitatory = vec![true; n];
    for &i in order.iter().rev().take(n_inh) {
        excitatory[i] = false;
    }
    let index = SpatialIndex::new(&positions);
    let sigma = cfg.connect_sigma;
    let cutoff = KERNEL_CUTOFF_SIGMAS * sigma;

    let mut culture = Culture {
        cfg: cfg.clone(),
        positions,
        excitatory,
        synapses: Synapses { offsets: vec![0], targets: Vec::new(), weights: Vec::new() },
        day_index: 0,
        index,
        kernel_scale: 0.0,
        contacts: Default::default(),
    };
    culture.contacts = super::recording::Contacts::build(&culture);

    // Scale the kernel so the expected out-degree matches the target.
    let mut total = 0.0;
    for i in 0..n {
        let (r, c) = culture.positions[i];
        culture.index.for_each_near(r, c, cutoff, |j| {
            if j as usize != i {
                total += kernel(culture.dist2(i, j as usize), sigma);
            }
        });
    }
    culture.kernel_scale = if total > 0.0 { cfg.mean_out_degree * n as f64 / total } else { 0.0 };

    let mut syn_rng = rng::stream(cfg.seed, "culture-synapses", 0);
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0u32);
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    let mut candidates = Vec::new();
    for i in 0..n {
        let (r, c) = culture.positions[i];
        candidates.clear();
        culture.index.for_each_near(r, c, cutoff, |j| {
            if j as usize != i {
                candidates.push(j);
            }
        });
        candidates.sort_unstable();
        for &j in &candidates {
            let p = culture.connection_probability(i, j as usize);
            if p > 0.0 && syn_rng.random::<f64>() < p {
                targets.push(j);
                weights.push(culture.draw_weight(i, &mut syn_rng));
            }
        }
        offsets.push(targets.len() as u32);
    }
    culture.synapses = Synapses { offsets, targets, weights };
    Ok(culture)
}

/// Apply one day of drift: rewire a fraction of synapses to fresh kernel
/// targets and jitter the surviving weights. Deterministic in the culture
/// seed and the current day index.
pub fn advance_day(c: &Culture, drift: DayDrift) -> Result<Culture, CultureError> {
    if !(0.0..=1.0).contains(&drift.rewire_frac) {
        return Err(CultureError::Config(format!("rewire_frac {} outside [0,1]", drift.rewire_frac)));
    }
    if !(drift.weight_jitter_cv >= 0.0 && drift.weight_jitter_cv.is_finite()) {
        return Err(CultureError::Config(format!("weight_jitter_cv {} must be >= 0", drift.weight_jitter_cv)));
    }
    if !(drift.soma_shift >= 0.0 && drift.soma_shift.is_finite()) {
        return Err(CultureError::Config(format!("soma_shift {} must be >= 0", drift.soma_shift)));
    }
    let mut rng = rng::stream(c.cfg.seed, "culture-drift", c.day_index as u64);
    let jitter = if drift.weight_jitter_cv > 0.0 {
        let s2 = (1.0 + drift.weight_jitter_cv.powi(2)).ln();
        Some(LogNormal::new(-s2 / 2.0, s2.sqrt()).expect("valid lognormal"))
    } else {
        None
    };
    let mut next = c.clone();
    next.day_index += 1;
    let syn = &mut next.synapses;
    let mut row_targets: Vec<u32> = Vec::new();
    for i in 0..syn.n_rows() {
        let (a, b) = (syn.offsets[i] as usize, syn.offsets[i + 1] as usize);
        row_targets.clear();
        row_targets.extend_from_slice(&syn.targets[a..b]);
        for k in a..b {
            if drift.rewire_frac > 0.0 && rng.random::<f64>() < drift.rewire_frac {
                if let Some(j) = c.draw_partner(i, &row_targets, &mut rng) {
                    let slot = k - a;
                    row_targets[slot] = j;
                    syn.targets[k] = j;
                }
            } else if let Some(ln) = &jitter {
                syn.weights[k] = (syn.weights[k] as f64 * ln.sample(&mut rng)) as f32;
            }
        }
    }
    if drift.soma_shift > 0.0 {
        let step = Normal::new(0.0, drift.soma_shift).expect("positive shift");
        let hi = EXTENT_LO + EXTENT - 1e-9;
        for p in next.positions.iter_mut() {
            p.0 = (p.0 + step.sample(&mut rng)).clamp(EXTENT_LO, hi);
            p.1 = (p.1 + step.sample(&mut rng)).clamp(EXTENT_LO, hi);
        }
        next.index = SpatialIndex::new(&next.positions);
        next.contacts = super::recording::Contacts::build(&next);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> CultureConfig {
        CultureConfig { n_neurons: 1024, seed, ..CultureConfig::default() }
    }

    #[test]
    fn growth_is_deterministic() {
        let a = grow_culture(&small(3)).unwrap();
        let b = grow_culture(&small(3)).unwrap();
        assert_eq!(a.synapses, b.synapses);
        assert_eq!(a.positions, b.positions);
        let c = grow_culture(&small(4)).unwrap();
        assert_ne!(a.synapses, c.synapses);
    }

    #[test]
    fn default_out_degree() {
        let c = grow_culture(&CultureConfig::default()).unwrap();
        let deg = c.mean_out_degree();
        assert!((36.0..=44.0).contains(&deg), "mean out-degree {deg}");
        let n_inh = c.excitatory.iter().filter(|e| !**e).count();
        assert_eq!(n_inh, (0.2f64 * 4096.0).round() as usize);
    }

    #[test]
    fn narrow_kernel_has_no_partners() {
        let c = grow_culture(&CultureConfig { connect_sigma: 0.01, ..small(1) }).unwrap();
        assert!(c.mean_out_degree() < 0.05, "{}", c.mean_out_degree());
    }

    #[test]
    fn infeasible_degree() {
        let cfg = CultureConfig { n_neurons: 30, mean_out_degree: 40.0, ..CultureConfig::default() };
        assert!(matches!(grow_culture(&cfg), Err(CultureError::Config(_))));
    }

    #[test]
    fn dale_sign_per_row() {
        let c = grow_culture(&small(2)).unwrap();
        for i in 0..c.n_neurons() {
            let (_, w) = c.synapses.row(i);
            if c.excitatory[i] {
                assert!(w.iter().all(|&x| x >= 0.0));
            } else {
                assert!(w.iter().all(|&x| x <= 0.0));
            }
        }
    }

    #[test]
    fn identity_drift() {
        let c = grow_culture(&small(5)).unwrap();
        let d = advance_day(&c, DayDrift::NONE).unwrap();
        assert_eq!(d.synapses, c.synapses);
        assert_eq!(d.positions, c.positions);
        assert_eq!(d.day_index, 1);
    }

    #[test]
    fn somata_wander_within_the_array() {
        let c = grow_culture(&small(6)).unwrap();
        let drift = DayDrift { rewire_frac: 0.0, weight_jitter_cv: 0.0, soma_shift: 0.2 };
        let d = advance_day(&c, drift).unwrap();
        assert_eq!(d.synapses, c.synapses);
        let moved: Vec<f64> = c.positions.iter().zip(&d.positions).map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1)).collect();
        let rms = (moved.iter().map(|m| m * m).sum::<f64>() / moved.len() as f64).sqrt();
        // Two axes of 0.2 each, slightly reduced by clamping at the edges.
        assert!((rms - 0.2 * 2f64.sqrt()).abs() < 0.02, "{rms}");
        assert!(d.positions.iter().all(|p| (EXTENT_LO..EXTENT_LO + EXTENT).contains(&p.0) && (EXTENT_LO..EXTENT_LO + EXTENT).contains(&p.1)));
        assert_eq!(advance_day(&c, drift).unwrap().positions, d.positions);
    }

    #[test]
    fn drift_preserves_signs_and_counts() {
        let c = grow_culture(&small(5)).unwrap();
        let d = advance_day(&c, DayDrift::default()).unwrap();
        assert_eq!(d.synapses.n_edges(), c.synapses.n_edges());
        for i in 0..c.n_neurons() {
            let (t, w) = d.synapses.row(i);
            assert!(t.iter().all(|&j| j as usize != i));
            assert!(w.iter().all(|&x| if c.excitatory[i] { x >= 0.0 } else { x <= 0.0 }));
        }
        assert!(advance_day(&c, DayDrift { rewire_frac: 1.5, weight_jitter_cv: 0.0, soma_shift: 0.0 }).is_err());
    }
}

//! Synthetic pairwise-preference task with an easy/hard difficulty structure.
//!
//! Each sample is a pair of completion feature vectors ordered by a hidden
//! utility. The utility decomposes into a linear component over the first
//! `easy_dim` coordinates and a fixed random nonlinear network over the rest,
//! so a low-capacity scorer can only ever fit the easy component while a
//! higher-capacity scorer can learn both. That asymmetry is what creates
//! genuinely different known/unknown regions for weak and strong models.
//!
//! A second, independently drawn utility orders the helpful split; a
//! configurable fraction of helpful samples is forced to oppose the harmless
//! ordering, which is the raw material for the implicit-conflict objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::rng;

/// Which utility component decides a sample's oracle order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// The linear component alone predicts the order with margin.
    Easy,
    /// The linear gap is below the assignment margin; the nonlinear
    /// component decides.
    Hard,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Easy => "easy",
            Tier::Hard => "hard",
        }
    }
}

/// The four dataset splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    DGt,
    DWeakPool,
    DTest,
    DHelpful,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::DGt, Split::DWeakPool, Split::DTest, Split::DHelpful];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::DGt => "d_gt",
            Split::DWeakPool => "d_weak_pool",
            Split::DTest => "d_test",
            Split::DHelpful => "d_helpful",
        }
    }
}

/// Full description of the synthetic task. Identical specs (including the
/// seed) regenerate bit-identical bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Joint completion feature dimension.
    pub feature_dim: usize,
    /// Leading coordinates driving the linearly learnable utility component.
    pub easy_dim: usize,
    /// Width of the fixed random nonlinear generator for the hard component.
    pub hard_complexity: usize,
    /// Fraction of ground-truth orders flipped after generation.
    pub label_noise: f64,
    /// Fraction of helpful samples whose helpful order opposes the harmless
    /// order.
    pub helpful_conflict_rate: f64,
    /// Sizes of the four splits: ground truth, weak pool, test, helpful.
    pub split_sizes: [usize; 4],
    /// Fraction of each split assigned to the easy tier.
    pub tier_mix: f64,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            feature_dim: 16,
            easy_dim: 8,
            hard_complexity: 32,
            label_noise: 0.0,
            helpful_conflict_rate: 0.3,
            split_sizes: [4000, 4000, 4000, 4000],
            tier_mix: 0.5,
            seed: 0,
        }
    }
}

impl TaskSpec {
    /// Field-level validation with dotted paths rooted at `prefix`.
    pub fn validate(&self, prefix: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut push = |field: &str, message: String| {
            errors.push(FieldError {
                field: format!("{prefix}.{field}"),
                message,
            });
        };
        if self.feature_dim == 0 {
            push("feature_dim", "must be a positive integer".into());
        }
        if self.easy_dim == 0 || self.easy_dim > self.feature_dim {
            push(
                "easy_dim",
                format!(
                    "must be in [1, feature_dim = {}], got {}",
                    self.feature_dim, self.easy_dim
                ),
            );
        }
        if self.hard_complexity == 0 {
            push("hard_complexity", "must be a positive integer".into());
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            push(
                "label_noise",
                format!("must be in [0, 1), got {}", self.label_noise),
            );
        }
        if !(0.0..=1.0).contains(&self.helpful_conflict_rate) {
            push(
                "helpful_conflict_rate",
                format!("must be in [0, 1], got {}", self.helpful_conflict_rate),
            );
        }
        if !(self.tier_mix > 0.0 && self.tier_mix < 1.0) {
            push(
                "tier_mix",
                format!("must be in (0, 1), got {}", self.tier_mix),
            );
        }
        errors
    }

    fn hard_dim(&self) -> usize {
        self.feature_dim - self.easy_dim
    }
}

/// One prompt with a chosen/rejected completion pair.
///
/// `z_chosen`/`z_rejected` are stored in the order claimed by the dataset.
/// Before label noise that order is always the oracle's; a noise flip swaps
/// the two vectors and clears `gt_order_correct`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSample {
    pub id: u64,
    pub z_chosen: Vec<f64>,
    pub z_rejected: Vec<f64>,
    /// Whether the stored pair order is the ground-truth order for the
    /// split's utility (harmless for the three main splits, helpful for
    /// the helpful split).
    pub gt_order_correct: bool,
    /// Oracle utility of the stored chosen minus rejected. Diagnostic only.
    pub utility_gap: f64,
    pub tier: Tier,
}

/// The generated dataset: four id-disjoint splits plus the spec that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub spec: TaskSpec,
    pub d_gt: Vec<PreferenceSample>,
    pub d_weak_pool: Vec<PreferenceSample>,
    pub d_test: Vec<PreferenceSample>,
    pub d_helpful: Vec<PreferenceSample>,
}

impl DatasetBundle {
    pub fn split(&self, split: Split) -> &[PreferenceSample] {
        match split {
            Split::DGt => &self.d_gt,
            Split::DWeakPool => &self.d_weak_pool,
            Split::DTest => &self.d_test,
            Split::DHelpful => &self.d_helpful,
        }
    }

    pub fn iter_all(&self) -> impl Iterator<Item = (Split, &PreferenceSample)> {
        Split::ALL
            .into_iter()
            .flat_map(move |s| self.split(s).iter().map(move |sample| (s, sample)))
    }
}

/// A fixed utility function: linear over the easy block plus a random tanh
/// network over the hard block.
#[derive(Debug, Clone)]
pub struct UtilityOracle {
    feature_dim: usize,
    easy_dim: usize,
    easy_weights: Vec<f64>,
    hidden_weights: Vec<f64>, // width x hard_dim, row-major, unit-norm rows
    out_weights: Vec<f64>,
}

impl UtilityOracle {
    fn new(spec: &TaskSpec, stream: &str) -> Self {
        let mut rng = rng::stream_rng(spec.seed, stream);
        let hard_dim = spec.hard_dim();
        let width = spec.hard_complexity;

        let mut easy_weights = rng::normal_vec(&mut rng, spec.easy_dim);
        let norm = easy_weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            easy_weights.iter_mut().for_each(|w| *w /= norm);
        }

        // Square-feature network with unit-norm projection rows. The square
        // activation has zero linear correlation under spherical features
        // (odd Gaussian moments vanish), so no linear probe can recover the
        // hard component. No bias term: (w.x + b)^2 would leak 2b*(w.x).
        let mut hidden_weights = vec![0.0; width * hard_dim];
        if hard_dim > 0 {
            for row in hidden_weights.chunks_mut(hard_dim) {
                let mut v = rng::normal_vec(&mut rng, hard_dim);
                let norm = v.iter().map(|w| w * w).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|w| *w /= norm);
                }
                row.copy_from_slice(&v);
            }
        }
        // Output scale targets a hard-gap spread of about twice the easy
        // gap's, so sub-margin orders are genuinely decided by the hard
        // component.
        let out_scale = HARD_OUT_SCALE / (width as f64).sqrt();
        let out_weights = rng::normal_vec(&mut rng, width)
            .into_iter()
            .map(|w| w * out_scale)
            .collect();

        UtilityOracle {
            feature_dim: spec.feature_dim,
            easy_dim: spec.easy_dim,
            easy_weights,
            hidden_weights,
            out_weights,
        }
    }

    /// Scores one completion feature vector.
    pub fn utility(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: z.len(),
            });
        }
        Ok(self.easy_component(z) + self.hard_component(z))
    }

    fn easy_component(&self, z: &[f64]) -> f64 {
        self.easy_weights
            .iter()
            .zip(&z[..self.easy_dim])
            .map(|(w, x)| w * x)
            .sum()
    }

    fn hard_component(&self, z: &[f64]) -> f64 {
        let x = &z[self.easy_dim..];
        let hard_dim = x.len();
        let mut total = 0.0;
        for j in 0..self.out_weights.len() {
            let row = &self.hidden_weights[j * hard_dim..(j + 1) * hard_dim];
            let pre: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            total += self.out_weights[j] * pre * pre;
        }
        total
    }

    /// Signed linear gap of an ordered pair, `<a, chosen_easy - rejected_easy>`.
    pub fn easy_gap(&self, z_chosen: &[f64], z_rejected: &[f64]) -> f64 {
        self.easy_weights
            .iter()
            .zip(z_chosen.iter().zip(z_rejected.iter()))
            .map(|(w, (c, r))| w * (c - r))
            .sum()
    }
}

/// The oracles and tier margins for one task, fully determined by the spec.
#[derive(Debug, Clone)]
pub struct TaskWorld {
    pub spec: TaskSpec,
    harmless: UtilityOracle,
    helpful: UtilityOracle,
    harmless_margin: f64,
    helpful_margin: f64,
}

const MARGIN_CALIBRATION_PAIRS: usize = 2048;

/// Output scale of the square-feature network, chosen so the hard-gap
/// spread is roughly twice the easy gap's.
const HARD_OUT_SCALE: f64 = 1.15;

impl TaskWorld {
    pub fn new(spec: &TaskSpec) -> Result<Self> {
        let errors = spec.validate("task");
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let harmless = UtilityOracle::new(spec, "oracle/harmless");
        let helpful = UtilityOracle::new(spec, "oracle/helpful");

        // Tier margin: median magnitude of the linear gap over a fixed
        // calibration draw, per oracle. Scale-free and seed-stable.
        let mut rng = rng::stream_rng(spec.seed, "oracle/margin");
        let mut harmless_gaps = Vec::with_capacity(MARGIN_CALIBRATION_PAIRS);
        let mut helpful_gaps = Vec::with_capacity(MARGIN_CALIBRATION_PAIRS);
        for _ in 0..MARGIN_CALIBRATION_PAIRS {
            let z1 = rng::normal_vec(&mut rng, spec.feature_dim);
            let z2 = rng::normal_vec(&mut rng, spec.feature_dim);
            harmless_gaps.push(harmless.easy_gap(&z1, &z2).abs());
            helpful_gaps.push(helpful.easy_gap(&z1, &z2).abs());
        }
        Ok(TaskWorld {
            spec: spec.clone(),
            harmless,
            helpful,
            harmless_margin: median(&mut harmless_gaps),
            helpful_margin: median(&mut helpful_gaps),
        })
    }

    pub fn harmless_oracle(&self) -> &UtilityOracle {
        &self.harmless
    }

    pub fn helpful_oracle(&self) -> &UtilityOracle {
        &self.helpful
    }

    pub fn harmless_margin(&self) -> f64 {
        self.harmless_margin
    }

    pub fn helpful_margin(&self) -> f64 {
        self.helpful_margin
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Ground-truth harmless utility of a single completion vector.
///
/// Convenience wrapper that rebuilds the oracle from the spec; use
/// [`TaskWorld`] when scoring in bulk.
pub fn oracle_utility(spec: &TaskSpec, z: &[f64]) -> Result<f64> {
    TaskWorld::new(spec)?.harmless.utility(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HelpfulBucket {
    Agree,
    Conflict,
}

struct DrawnPair {
    z_chosen: Vec<f64>,
    z_rejected: Vec<f64>,
    utility_gap: f64,
    tier: Tier,
}

/// Generates the full dataset bundle for a spec.
///
/// Pure function of the spec: identical specs produce bit-identical bundles.
pub fn generate_bundle(spec: &TaskSpec) -> Result<DatasetBundle> {
    let world = TaskWorld::new(spec)?;
    let mut next_id: u64 = 0;

    let mut splits: Vec<Vec<PreferenceSample>> = Vec::with_capacity(4);
    for split in Split::ALL {
        let n = spec.split_sizes[split_index(split)];
        let mut samples = if split == Split::DHelpful {
            generate_helpful_split(&world, n)?
        } else {
            generate_harmless_split(&world, split, n)?
        };
        for sample in &mut samples {
            sample.id = next_id;
            next_id += 1;
        }
        apply_label_noise(&world.spec, split, &mut samples);
        splits.push(samples);
    }

    let d_helpful = splits.pop().unwrap();
    let d_test = splits.pop().unwrap();
    let d_weak_pool = splits.pop().unwrap();
    let d_gt = splits.pop().unwrap();
    Ok(DatasetBundle {
        spec: spec.clone(),
        d_gt,
        d_weak_pool,
        d_test,
        d_helpful,
    })
}

fn split_index(split: Split) -> usize {
    match split {
        Split::DGt => 0,
        Split::DWeakPool => 1,
        Split::DTest => 2,
        Split::DHelpful => 3,
    }
}

fn tier_quotas(spec: &TaskSpec, split: Split, n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Ok((0, 0));
    }
    let n_easy = (spec.tier_mix * n as f64).round() as usize;
    let n_hard = n - n_easy.min(n);
    if n_easy == 0 || n_hard == 0 {
        return Err(Error::InfeasibleTierMix(format!(
            "split {} of size {n} cannot hold both tiers at tier_mix {} \
             (easy quota {n_easy}, hard quota {n_hard})",
            split.as_str(),
            spec.tier_mix
        )));
    }
    Ok((n_easy, n_hard))
}

/// Orders a freshly drawn pair by `oracle` and classifies its tier, or
/// returns `None` for pairs that fit neither tier (linear gap confidently
/// contradicting the full utility).
fn classify_pair(
    oracle: &UtilityOracle,
    margin: f64,
    z1: Vec<f64>,
    z2: Vec<f64>,
) -> Option<(Vec<f64>, Vec<f64>, f64, Tier)> {
    let u1 = oracle.utility(&z1).expect("generator draws match dim");
    let u2 = oracle.utility(&z2).expect("generator draws match dim");
    if u1 == u2 {
        return None;
    }
    let (zc, zr, gap) = if u1 > u2 {
        (z1, z2, u1 - u2)
    } else {
        (z2, z1, u2 - u1)
    };
    let easy_gap = oracle.easy_gap(&zc, &zr);
    let tier = if easy_gap >= margin {
        Tier::Easy
    } else if easy_gap.abs() < margin {
        Tier::Hard
    } else {
        return None;
    };
    Some((zc, zr, gap, tier))
}

fn generate_harmless_split(
    world: &TaskWorld,
    split: Split,
    n: usize,
) -> Result<Vec<PreferenceSample>> {
    let spec = &world.spec;
    let (mut need_easy, mut need_hard) = tier_quotas(spec, split, n)?;
    let mut rng = rng::stream_rng(spec.seed, &format!("samples/{}", split.as_str()));
    let mut samples = Vec::with_capacity(n);
    let mut attempts: usize = 0;
    let max_attempts = 200 * n.max(64);

    while need_easy + need_hard > 0 {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Generation(format!(
                "split {}: exhausted {max_attempts} draws with quotas left \
                 (easy {need_easy}, hard {need_hard})",
                split.as_str()
            )));
        }
        let z1 = rng::normal_vec(&mut rng, spec.feature_dim);
        let z2 = rng::normal_vec(&mut rng, spec.feature_dim);
        let Some((zc, zr, gap, tier)) =
            classify_pair(&world.harmless, world.harmless_margin, z1, z2)
        else {
            continue;
        };
        let quota = match tier {
            Tier::Easy => &mut need_easy,
            Tier::Hard => &mut need_hard,
        };
        if *quota == 0 {
            continue;
        }
        *quota -= 1;
        samples.push(PreferenceSample {
            id: 0,
            z_chosen: zc,
            z_rejected: zr,
            gt_order_correct: true,
            utility_gap: gap,
            tier,
        });
    }
    Ok(samples)
}

/// Helpful samples are ordered by the helpful oracle. A fixed fraction is
/// forced to conflict with the harmless order, assigned to the hard tier
/// first; conflicting pairs are additionally required to sit below the
/// harmless linear margin so the contradictory supervision cannot be
/// expressed in the linearly learnable subspace.
fn generate_helpful_split(world: &TaskWorld, n: usize) -> Result<Vec<PreferenceSample>> {
    let spec = &world.spec;
    let (n_easy, n_hard) = tier_quotas(spec, Split::DHelpful, n)?;
    let n_conflict = (spec.helpful_conflict_rate * n as f64).round() as usize;
    let conflict_hard = n_conflict.min(n_hard);
    let conflict_easy = n_conflict - conflict_hard;
    if conflict_easy > n_easy {
        return Err(Error::InfeasibleTierMix(format!(
            "helpful split: conflict quota {n_conflict} exceeds capacity \
             (easy {n_easy}, hard {n_hard})"
        )));
    }

    // Quotas indexed by (tier, bucket).
    let mut need = [
        [n_easy - conflict_easy, conflict_easy],
        [n_hard - conflict_hard, conflict_hard],
    ];
    let mut rng = rng::stream_rng(spec.seed, "samples/d_helpful");
    let mut samples: Vec<DrawnPair> = Vec::with_capacity(n);
    let mut attempts: usize = 0;
    let max_attempts = 2000 * n.max(64);

    while need.iter().flatten().sum::<usize>() > 0 {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Generation(format!(
                "helpful split: exhausted {max_attempts} draws with quotas left \
                 (easy agree/conflict {}/{}, hard agree/conflict {}/{})",
                need[0][0], need[0][1], need[1][0], need[1][1]
            )));
        }
        let z1 = rng::normal_vec(&mut rng, spec.feature_dim);
        let z2 = rng::normal_vec(&mut rng, spec.feature_dim);
        let Some((zc, zr, gap, tier)) = classify_pair(&world.helpful, world.helpful_margin, z1, z2)
        else {
            continue;
        };
        let harmless_gap = world.harmless.utility(&zc).unwrap() - world.harmless.utility(&zr).unwrap();
        let bucket = if harmless_gap < 0.0 {
            HelpfulBucket::Conflict
        } else {
            HelpfulBucket::Agree
        };
        if bucket == HelpfulBucket::Conflict
            && world.harmless.easy_gap(&zc, &zr).abs() >= world.harmless_margin
        {
            continue;
        }
        let tier_idx = match tier {
            Tier::Easy => 0,
            Tier::Hard => 1,
        };
        let bucket_idx = match bucket {
            HelpfulBucket::Agree => 0,
            HelpfulBucket::Conflict => 1,
        };
        if need[tier_idx][bucket_idx] == 0 {
            continue;
        }
        need[tier_idx][bucket_idx] -= 1;
        samples.push(DrawnPair {
            z_chosen: zc,
            z_rejected: zr,
            utility_gap: gap,
            tier,
        });
    }

    Ok(samples
        .into_iter()
        .map(|p| PreferenceSample {
            id: 0,
            z_chosen: p.z_chosen,
            z_rejected: p.z_rejected,
            gt_order_correct: true,
            utility_gap: p.utility_gap,
            tier: p.tier,
        })
        .collect())
}

/// Flips exactly `round(label_noise * n)` samples: the stored pair is
/// swapped and the ground-truth flag cleared.
fn apply_label_noise(spec: &TaskSpec, split: Split, samples: &mut [PreferenceSample]) {
    let n = samples.len();
    let n_flip = (spec.label_noise * n as f64).round() as usize;
    if n_flip == 0 {
        return;
    }
    let mut rng = rng::stream_rng(spec.seed, &format!("noise/{}", split.as_str()));
    let order = rng::shuffled_indices(&mut rng, n);
    for &idx in order.iter().take(n_flip) {
        let sample = &mut samples[idx];
        std::mem::swap(&mut sample.z_chosen, &mut sample.z_rejected);
        sample.utility_gap = -sample.utility_gap;
        sample.gt_order_correct = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> TaskSpec {
        TaskSpec {
            split_sizes: [200, 200, 200, 200],
            seed: 11,
            ..TaskSpec::default()
        }
    }

    #[test]
    fn identical_inputs_score_identically() {
        let spec = small_spec();
        let world = TaskWorld::new(&spec).unwrap();
        let z = vec![0.0; spec.feature_dim];
        let u = world.harmless_oracle().utility(&z).unwrap();
        assert_eq!(u - world.harmless_oracle().utility(&z).unwrap(), 0.0);
    }

    #[test]
    fn easy_component_is_exactly_linear() {
        let spec = small_spec();
        let world = TaskWorld::new(&spec).unwrap();
        let mut rng = rng::stream_rng(99, "test/linear");
        for _ in 0..20 {
            let z1 = rng::normal_vec(&mut rng, spec.feature_dim);
            let mut z2 = z1.clone();
            let delta = rng::normal_vec(&mut rng, spec.easy_dim);
            for (i, d) in delta.iter().enumerate() {
                z2[i] += d;
            }
            let diff = world.harmless_oracle().utility(&z2).unwrap()
                - world.harmless_oracle().utility(&z1).unwrap();
            let expected = world.harmless_oracle().easy_gap(&z2, &z1);
            assert!(
                (diff - expected).abs() < 1e-9,
                "diff {diff} expected {expected}"
            );
        }
    }

    #[test]
    fn oracle_rejects_dimension_mismatch() {
        let spec = small_spec();
        let err = oracle_utility(&spec, &[0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 16, actual: 3 }));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        let a = generate_bundle(&spec).unwrap();
        let b = generate_bundle(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_split_sizes_are_4000() {
        let spec = TaskSpec::default();
        assert_eq!(spec.split_sizes, [4000, 4000, 4000, 4000]);
    }

    #[test]
    fn noiseless_bundle_has_all_correct_orders() {
        let bundle = generate_bundle(&small_spec()).unwrap();
        assert!(bundle.iter_all().all(|(_, s)| s.gt_order_correct));
        assert!(bundle
            .iter_all()
            .all(|(_, s)| s.utility_gap > 0.0));
    }

    #[test]
    fn label_noise_flips_exactly_the_requested_fraction() {
        let spec = TaskSpec {
            label_noise: 0.25,
            ..small_spec()
        };
        let bundle = generate_bundle(&spec).unwrap();
        for split in Split::ALL {
            let samples = bundle.split(split);
            let flipped = samples.iter().filter(|s| !s.gt_order_correct).count();
            assert_eq!(flipped, 50, "split {}", split.as_str());
            for s in samples {
                assert_eq!(s.gt_order_correct, s.utility_gap > 0.0);
            }
        }
    }

    #[test]
    fn splits_are_disjoint_by_id_and_sized() {
        let bundle = generate_bundle(&small_spec()).unwrap();
        let mut seen = std::collections::HashSet::new();
        let mut total = 0usize;
        for (_, s) in bundle.iter_all() {
            assert!(seen.insert(s.id), "duplicate id {}", s.id);
            total += 1;
        }
        assert_eq!(total, 800);
        for split in Split::ALL {
            assert_eq!(bundle.split(split).len(), 200);
        }
    }

    #[test]
    fn tier_assignment_is_sound() {
        let spec = small_spec();
        let world = TaskWorld::new(&spec).unwrap();
        let bundle = generate_bundle(&spec).unwrap();
        let margin = world.harmless_margin();
        for split in [Split::DGt, Split::DWeakPool, Split::DTest] {
            let mut easy = 0usize;
            for s in bundle.split(split) {
                // Work in oracle order regardless of noise flips.
                let (zc, zr) = if s.gt_order_correct {
                    (&s.z_chosen, &s.z_rejected)
                } else {
                    (&s.z_rejected, &s.z_chosen)
                };
                let easy_gap = world.harmless_oracle().easy_gap(zc, zr);
                match s.tier {
                    Tier::Easy => {
                        easy += 1;
                        assert!(easy_gap >= margin);
                        // Zeroing the hard coordinates must preserve the order.
                        let strip = |z: &[f64]| {
                            let mut v = z.to_vec();
                            v[spec.easy_dim..].iter_mut().for_each(|x| *x = 0.0);
                            v
                        };
                        let uc = world.harmless_oracle().utility(&strip(zc)).unwrap();
                        let ur = world.harmless_oracle().utility(&strip(zr)).unwrap();
                        assert!(uc > ur, "easy component must predict the order");
                    }
                    Tier::Hard => {
                        assert!(easy_gap.abs() < margin);
                        let uc = world.harmless_oracle().utility(zc).unwrap();
                        let ur = world.harmless_oracle().utility(zr).unwrap();
                        assert!(uc > ur);
                    }
                }
            }
            assert_eq!(easy, 100, "tier mix in {}", split.as_str());
        }
    }

    #[test]
    fn helpful_conflict_rate_is_exact_by_oracle_cross_check() {
        let spec = small_spec();
        let world = TaskWorld::new(&spec).unwrap();
        let bundle = generate_bundle(&spec).unwrap();
        let conflicts = bundle
            .d_helpful
            .iter()
            .filter(|s| {
                let uc = world.harmless_oracle().utility(&s.z_chosen).unwrap();
                let ur = world.harmless_oracle().utility(&s.z_rejected).unwrap();
                let hc = world.helpful_oracle().utility(&s.z_chosen).unwrap();
                let hr = world.helpful_oracle().utility(&s.z_rejected).unwrap();
                // Helpful order should be the stored order pre-noise.
                assert_eq!(hc > hr, s.gt_order_correct);
                (hc > hr) != (uc > ur)
            })
            .count();
        assert_eq!(conflicts, 60); // 0.3 * 200
    }

    #[test]
    fn swapping_the_pair_negates_the_gap() {
        let spec = small_spec();
        let world = TaskWorld::new(&spec).unwrap();
        let bundle = generate_bundle(&spec).unwrap();
        for s in bundle.d_test.iter().take(32) {
            let forward = world.harmless_oracle().utility(&s.z_chosen).unwrap()
                - world.harmless_oracle().utility(&s.z_rejected).unwrap();
            let backward = world.harmless_oracle().utility(&s.z_rejected).unwrap()
                - world.harmless_oracle().utility(&s.z_chosen).unwrap();
            assert_eq!(forward, -backward);
            assert!((forward - s.utility_gap).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_split_is_an_infeasible_tier_mix() {
        let spec = TaskSpec {
            split_sizes: [1, 4, 4, 4],
            ..small_spec()
        };
        let err = generate_bundle(&spec).unwrap_err();
        assert!(matches!(err, Error::InfeasibleTierMix(_)));
    }

    #[test]
    fn zero_sized_splits_are_allowed() {
        let spec = TaskSpec {
            split_sizes: [16, 16, 16, 0],
            ..small_spec()
        };
        let bundle = generate_bundle(&spec).unwrap();
        assert!(bundle.d_helpful.is_empty());
        assert_eq!(bundle.d_gt.len(), 16);
    }
}

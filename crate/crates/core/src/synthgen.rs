//! Planted synthetic data: community-structured follower graphs with
//! class-conditional engagement, so the resulting tensors carry a known
//! low-rank block structure and a recoverable class signal.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::FactorSet;
use crate::ingestion::{DatasetBundle, EngagementTable, SocialGraph};
use crate::matrix::DenseMatrix;
use crate::seeding::{stream, unit_f64};
use crate::tensor::SparseTensor3;

/// Generation probabilities: follower edges inside and across communities,
/// and engagement of an eligible post-user pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunityProbs {
    pub within: f64,
    pub across: f64,
    pub engage: f64,
}

impl Default for CommunityProbs {
    fn default() -> Self {
        Self {
            within: 0.8,
            across: 0.05,
            engage: 0.6,
        }
    }
}

/// Synthetic dataset shape. `rank` is the fit rank carried along for
/// downstream runs; the planted structure itself has rank `community_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub post_count: usize,
    pub user_count: usize,
    pub rank: usize,
    pub class_count: usize,
    pub community_count: usize,
    pub noise_flip_prob: f64,
    pub seed: u64,
    pub probs: CommunityProbs,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            post_count: 60,
            user_count: 40,
            rank: 5,
            class_count: 2,
            community_count: 2,
            noise_flip_prob: 0.0,
            seed: 0,
            probs: CommunityProbs::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.post_count == 0 || self.user_count == 0 {
            return Err(Error::invalid("post and user counts must be positive"));
        }
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if self.class_count == 0 {
            return Err(Error::invalid("class count must be at least 1"));
        }
        if self.community_count < self.class_count {
            return Err(Error::invalid(format!(
                "community count {} below class count {}",
                self.community_count, self.class_count
            )));
        }
        if self.user_count < self.community_count {
            return Err(Error::invalid(format!(
                "user count {} below community count {}",
                self.user_count, self.community_count
            )));
        }
        for (name, p) in [
            ("within", self.probs.within),
            ("across", self.probs.across),
            ("engage", self.probs.engage),
            ("noise_flip_prob", self.noise_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "{name} probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Users split into `community_count` contiguous blocks, earlier blocks
    /// one larger when the division is uneven.
    pub fn community_of(&self, user: usize) -> usize {
        let base = self.user_count / self.community_count;
        let rem = self.user_count % self.community_count;
        let split = rem * (base + 1);
        if user < split {
            user / (base + 1)
        } else {
            rem + (user - split) / base
        }
    }

    /// Posts cycle through classes, keeping labels balanced to within one.
    pub fn class_of(&self, post: usize) -> usize {
        post % self.class_count
    }

    /// Communities cycle through classes: community `g` serves class
    /// `g % class_count`.
    pub fn community_serves(&self, community: usize, class: usize) -> bool {
        community % self.class_count == class
    }
}

/// Ground-truth indicator factors of the planted block structure, one column
/// per community.
fn indicator_factors(spec: &SynthSpec) -> FactorSet {
    let cc = spec.community_count;
    let a = DenseMatrix::from_fn(spec.post_count, cc, |i, g| {
        if spec.community_serves(g, spec.class_of(i)) {
            1.0
        } else {
            0.0
        }
    });
    let member = DenseMatrix::from_fn(spec.user_count, cc, |v, g| {
        if spec.community_of(v) == g {
            1.0
        } else {
            0.0
        }
    });
    FactorSet::new(a, member.clone(), member).expect("indicator factors are consistent")
}

/// Drawn structure shared by tensor generation and bundle emission.
struct PlantedStructure {
    edges: Vec<(usize, usize)>,
    engagements: Vec<(usize, usize)>,
    labels: Vec<usize>,
}

fn draw_structure(spec: &SynthSpec) -> PlantedStructure {
    let u = spec.user_count;
    let mut edge_rng = stream(spec.seed, "synth/edges");
    let mut edges = Vec::new();
    for j in 0..u {
        for k in 0..u {
            if j == k {
                continue;
            }
            let p = if spec.community_of(j) == spec.community_of(k) {
                spec.probs.within
            } else {
                spec.probs.across
            };
            if unit_f64(&mut edge_rng) < p {
                edges.push((j, k));
            }
        }
    }

    let mut engage_rng = stream(spec.seed, "synth/engagements");
    let mut engagements = Vec::new();
    for i in 0..spec.post_count {
        let class = spec.class_of(i);
        for k in 0..u {
            let draw = unit_f64(&mut engage_rng);
            if spec.community_serves(spec.community_of(k), class) && draw < spec.probs.engage {
                engagements.push((i, k));
            }
        }
    }

    let labels = (0..spec.post_count).map(|i| spec.class_of(i)).collect();
    PlantedStructure {
        edges,
        engagements,
        labels,
    }
}

fn tensor_from_structure(spec: &SynthSpec, structure: &PlantedStructure) -> SparseTensor3 {
    let u = spec.user_count;
    let mut followers_of = vec![Vec::new(); u];
    for &(j, k) in &structure.edges {
        followers_of[k].push(j);
    }
    let mut entries = Vec::new();
    for &(i, k) in &structure.engagements {
        for &j in &followers_of[k] {
            entries.push((i, j, k));
        }
    }
    SparseTensor3::new(spec.post_count, u, entries).expect("generated entries are in range")
}

fn apply_noise(spec: &SynthSpec, t: SparseTensor3) -> SparseTensor3 {
    if spec.noise_flip_prob == 0.0 {
        return t;
    }
    let (p, u, _) = t.dims();
    let mut present: BTreeSet<(usize, usize, usize)> = t.entries().iter().copied().collect();
    let mut active_j = vec![BTreeSet::new(); p];
    let mut active_k = vec![BTreeSet::new(); p];
    for &(i, j, k) in t.entries() {
        active_j[i].insert(j);
        active_k[i].insert(k);
    }
    // Flip candidates are confined to each slice's active rows and columns,
    // keeping noise near the planted support.
    let mut rng = stream(spec.seed, "synth/noise");
    for i in 0..p {
        for &j in &active_j[i] {
            for &k in &active_k[i] {
                if unit_f64(&mut rng) < spec.noise_flip_prob && !present.remove(&(i, j, k)) {
                    present.insert((i, j, k));
                }
            }
        }
    }
    SparseTensor3::new(p, u, present.into_iter().collect()).expect("flips stay in range")
}

/// Generates the planted tensor, the full label list, and the ground-truth
/// indicator factors (rank = community count). Deterministic per seed.
pub fn generate_planted(spec: &SynthSpec) -> Result<(SparseTensor3, Vec<usize>, FactorSet)> {
    spec.validate()?;
    let structure = draw_structure(spec);
    let t = apply_noise(spec, tensor_from_structure(spec, &structure));
    Ok((t, structure.labels, indicator_factors(spec)))
}

/// Deterministic noiseless variant whose tensor is exactly the rank-
/// `community_count` indicator model (including same-user follower pairs):
/// entry `(i, j, k)` present iff `j` and `k` share a community serving the
/// class of `i`. Probabilities, noise, and seed are ignored. Intended for
/// exact-recovery checks.
pub fn generate_exact(spec: &SynthSpec) -> Result<(SparseTensor3, Vec<usize>, FactorSet)> {
    spec.validate()?;
    let members: Vec<Vec<usize>> = (0..spec.community_count)
        .map(|g| {
            (0..spec.user_count)
                .filter(|&v| spec.community_of(v) == g)
                .collect()
        })
        .collect();
    let mut entries = Vec::new();
    for i in 0..spec.post_count {
        let class = spec.class_of(i);
        for (g, community) in members.iter().enumerate() {
            if !spec.community_serves(g, class) {
                continue;
            }
            for &j in community {
                for &k in community {
                    entries.push((i, j, k));
                }
            }
        }
    }
    let t = SparseTensor3::new(spec.post_count, spec.user_count, entries)?;
    let labels = (0..spec.post_count).map(|i| spec.class_of(i)).collect();
    Ok((t, labels, indicator_factors(spec)))
}

/// Emits the planted structure as a parseable dataset bundle (ids `p<i>`,
/// `u<v>`). Requires two classes (the label file vocabulary) and zero noise,
/// since flips happen at the tensor level and cannot round-trip through the
/// engagement and link files.
pub fn planted_bundle(spec: &SynthSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    if spec.class_count != 2 {
        return Err(Error::precondition(format!(
            "bundle emission requires exactly 2 classes, got {}",
            spec.class_count
        )));
    }
    if spec.noise_flip_prob != 0.0 {
        return Err(Error::precondition(
            "bundle emission requires noise_flip_prob = 0; tensor-level flips do not round-trip through files",
        ));
    }
    let structure = draw_structure(spec);
    let graph = SocialGraph::new(spec.user_count, structure.edges)?;
    let engagements = EngagementTable::new(spec.post_count, structure.engagements)?;
    DatasetBundle::new(
        graph,
        engagements,
        structure.labels.into_iter().map(Some).collect(),
        (0..spec.post_count).map(|i| format!("p{i}")).collect(),
        (0..spec.user_count).map(|v| format!("u{v}")).collect(),
    )
}

//! Dataset ingestion: parsing the three tab-separated input files, degree
//! filtering of the social graph, binary tensor construction, and seeded
//! stratified train/test splits.
//!
//! File formats (UTF-8, one record per line, `\t` separated, `#` starts a
//! comment line, blank lines and trailing `\r` ignored):
//!
//! * engagements: `post_id<TAB>user_id` (user engaged with post)
//! * social links: `follower_id<TAB>followee_id`
//! * labels: `post_id<TAB>real|fake` (`real` is class 0, `fake` class 1)
//!
//! Ids are opaque non-empty strings without tabs. Internal indices are dense,
//! 0-based, and assigned by first appearance in reading order: engagements
//! file, then links, then labels.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::seeding::{shuffle, stream};
use crate::tensor::SparseTensor3;

pub const CLASS_REAL: usize = 0;
pub const CLASS_FAKE: usize = 1;
pub const LABEL_CLASS_COUNT: usize = 2;

/// Directed follower graph. Edges are `(follower, followee)`, sorted and
/// deduplicated; self-loops are dropped at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    user_count: usize,
    edges: Vec<(usize, usize)>,
}

impl SocialGraph {
    pub fn new(user_count: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(j, k) in &edges {
            if j >= user_count || k >= user_count {
                return Err(Error::invalid(format!(
                    "edge ({j}, {k}) out of range for {user_count} users"
                )));
            }
        }
        edges.retain(|&(j, k)| j != k);
        edges.sort_unstable();
        edges.dedup();
        Ok(Self { user_count, edges })
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Total (in + out) degree per user.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.user_count];
        for &(j, k) in &self.edges {
            deg[j] += 1;
            deg[k] += 1;
        }
        deg
    }
}

/// Engagement pairs `(post, user)`, sorted and deduplicated. The user range
/// is validated when the table joins a bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngagementTable {
    post_count: usize,
    pairs: Vec<(usize, usize)>,
}

impl EngagementTable {
    pub fn new(post_count: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        for &(i, _) in &pairs {
            if i >= post_count {
                return Err(Error::invalid(format!(
                    "engagement post {i} out of range for {post_count} posts"
                )));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self { post_count, pairs })
    }

    pub fn post_count(&self) -> usize {
        self.post_count
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// A parsed dataset: graph, engagements, labels, and the id maps that tie
/// internal indices back to the input files.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub graph: SocialGraph,
    pub engagements: EngagementTable,
    /// `labels[i]` is the class of post `i`, when labeled.
    pub labels: Vec<Option<usize>>,
    pub post_ids: Vec<String>,
    pub user_ids: Vec<String>,
}

impl DatasetBundle {
    pub fn new(
        graph: SocialGraph,
        engagements: EngagementTable,
        labels: Vec<Option<usize>>,
        post_ids: Vec<String>,
        user_ids: Vec<String>,
    ) -> Result<Self> {
        if post_ids.len() != engagements.post_count() || labels.len() != engagements.post_count() {
            return Err(Error::invalid(format!(
                "post id map ({}) and labels ({}) must match post count {}",
                post_ids.len(),
                labels.len(),
                engagements.post_count()
            )));
        }
        if user_ids.len() != graph.user_count() {
            return Err(Error::invalid(format!(
                "user id map ({}) must match user count {}",
                user_ids.len(),
                graph.user_count()
            )));
        }
        for &(_, k) in engagements.pairs() {
            if k >= graph.user_count() {
                return Err(Error::invalid(format!(
                    "engagement user {k} out of range for {} users",
                    graph.user_count()
                )));
            }
        }
        if let Some(class) = labels.iter().flatten().find(|&&c| c >= LABEL_CLASS_COUNT) {
            return Err(Error::invalid(format!("label class {class} out of range")));
        }
        for (name, ids) in [("post", &post_ids), ("user", &user_ids)] {
            let mut seen = HashMap::new();
            for (idx, id) in ids.iter().enumerate() {
                if let Some(prev) = seen.insert(id.as_str(), idx) {
                    return Err(Error::invalid(format!(
                        "{name} id {id:?} mapped to both {prev} and {idx}"
                    )));
                }
            }
        }
        Ok(Self {
            graph,
            engagements,
            labels,
            post_ids,
            user_ids,
        })
    }

    pub fn post_count(&self) -> usize {
        self.engagements.post_count()
    }

    pub fn user_count(&self) -> usize {
        self.graph.user_count()
    }

    /// Labeled posts as sorted `(post, class)` pairs.
    pub fn label_pairs(&self) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (i, c)))
            .collect()
    }
}

/// Seeded stratified split of labeled posts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub train_fraction: f64,
}

fn interner<'a>(
    list: &'a mut Vec<String>,
    map: &'a mut HashMap<String, usize>,
) -> impl FnMut(&str) -> usize + 'a {
    move |id: &str| {
        if let Some(&idx) = map.get(id) {
            return idx;
        }
        let idx = list.len();
        list.push(id.to_string());
        map.insert(id.to_string(), idx);
        idx
    }
}

/// Parses one two-field file, yielding `(line_number, field_a, field_b)`.
fn parse_two_fields(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => (a, b),
            _ => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: "expected exactly two non-empty tab-separated fields".into(),
                })
            }
        };
        records.push((lineno + 1, a.to_string(), b.to_string()));
    }
    Ok(records)
}

/// Parses the three input files into a bundle with dense 0-based indices.
/// Duplicate records collapse; conflicting labels for one post are an error.
pub fn parse_bundle(
    engagements_path: &Path,
    links_path: &Path,
    labels_path: &Path,
) -> Result<DatasetBundle> {
    let mut post_ids = Vec::new();
    let mut post_map = HashMap::new();
    let mut user_ids = Vec::new();
    let mut user_map = HashMap::new();

    let mut engage_pairs = Vec::new();
    {
        let mut post_of = interner(&mut post_ids, &mut post_map);
        for (_, post, user) in parse_two_fields(engagements_path)? {
            let i = post_of(&post);
            engage_pairs.push((i, user));
        }
    }
    let mut engage_indexed = Vec::new();
    let mut edges = Vec::new();
    {
        let mut user_of = interner(&mut user_ids, &mut user_map);
        for (i, user) in engage_pairs {
            engage_indexed.push((i, user_of(&user)));
        }
        for (_, follower, followee) in parse_two_fields(links_path)? {
            let j = user_of(&follower);
            let k = user_of(&followee);
            edges.push((j, k));
        }
    }

    let mut label_of_post: Vec<Option<usize>> = Vec::new();
    {
        let mut post_of = interner(&mut post_ids, &mut post_map);
        for (lineno, post, token) in parse_two_fields(labels_path)? {
            let class = match token.as_str() {
                "real" => CLASS_REAL,
                "fake" => CLASS_FAKE,
                other => {
                    return Err(Error::Parse {
                        path: labels_path.display().to_string(),
                        line: lineno,
                        message: format!("unknown label {other:?}, expected \"real\" or \"fake\""),
                    })
                }
            };
            let i = post_of(&post);
            if label_of_post.len() < i + 1 {
                label_of_post.resize(i + 1, None);
            }
            match label_of_post[i] {
                None => label_of_post[i] = Some(class),
                Some(prev) if prev == class => {}
                Some(_) => {
                    return Err(Error::Parse {
                        path: labels_path.display().to_string(),
                        line: lineno,
                        message: format!("conflicting label for post {post:?}"),
                    })
                }
            }
        }
    }
    label_of_post.resize(post_ids.len(), None);

    let graph = SocialGraph::new(user_ids.len(), edges)?;
    let engagements = EngagementTable::new(post_ids.len(), engage_indexed)?;
    DatasetBundle::new(graph, engagements, label_of_post, post_ids, user_ids)
}

fn filter_degree_impl(bundle: &DatasetBundle, min_degree: usize, fixpoint: bool) -> DatasetBundle {
    let u = bundle.user_count();
    let mut alive = vec![true; u];
    loop {
        let mut deg = vec![0usize; u];
        for &(j, k) in bundle.graph.edges() {
            if alive[j] && alive[k] {
                deg[j] += 1;
                deg[k] += 1;
            }
        }
        let mut removed_any = false;
        for v in 0..u {
            if alive[v] && deg[v] < min_degree {
                alive[v] = false;
                removed_any = true;
            }
        }
        if !removed_any || !fixpoint {
            break;
        }
    }

    let mut new_index = vec![usize::MAX; u];
    let mut user_ids = Vec::new();
    for v in 0..u {
        if alive[v] {
            new_index[v] = user_ids.len();
            user_ids.push(bundle.user_ids[v].clone());
        }
    }
    let edges = bundle
        .graph
        .edges()
        .iter()
        .filter(|&&(j, k)| alive[j] && alive[k])
        .map(|&(j, k)| (new_index[j], new_index[k]))
        .collect();
    let pairs = bundle
        .engagements
        .pairs()
        .iter()
        .filter(|&&(_, k)| alive[k])
        .map(|&(i, k)| (i, new_index[k]))
        .collect();

    let graph = SocialGraph::new(user_ids.len(), edges).expect("filtered edges stay in range");
    let engagements = EngagementTable::new(bundle.post_count(), pairs)
        .expect("filtered engagements stay in range");
    DatasetBundle::new(
        graph,
        engagements,
        bundle.labels.clone(),
        bundle.post_ids.clone(),
        user_ids,
    )
    .expect("filtering preserves bundle consistency")
}

/// Iteratively removes users with total degree below `min_degree` until no
/// user is below the threshold, then reindexes users densely. Engagements of
/// removed users drop; posts are kept even with no remaining engagements.
pub fn filter_min_degree(bundle: &DatasetBundle, min_degree: usize) -> DatasetBundle {
    filter_degree_impl(bundle, min_degree, true)
}

/// Single-pass variant: removes users below the threshold once, without
/// re-evaluating degrees after the removals.
pub fn filter_min_degree_once(bundle: &DatasetBundle, min_degree: usize) -> DatasetBundle {
    filter_degree_impl(bundle, min_degree, false)
}

/// Builds the binary tensor: entry `(i, j, k)` present iff user `k` engaged
/// with post `i` and user `j` follows user `k`. Shape `(p, u, u)`.
pub fn build_tensor(bundle: &DatasetBundle) -> Result<SparseTensor3> {
    let u = bundle.user_count();
    let mut followers_of = vec![Vec::new(); u];
    for &(j, k) in bundle.graph.edges() {
        followers_of[k].push(j);
    }
    let mut entries = Vec::new();
    for &(i, k) in bundle.engagements.pairs() {
        for &j in &followers_of[k] {
            entries.push((i, j, k));
        }
    }
    SparseTensor3::new(bundle.post_count(), u, entries)
}

/// Stratified split over an explicit label list (`labels[i]` = class of post
/// `i`). Per class, a seeded shuffle puts `round(train_fraction * count)`
/// posts in train and the rest in test; outputs are sorted ascending.
pub fn make_label_split(labels: &[usize], train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::precondition(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if labels.is_empty() {
        return Err(Error::precondition("no labeled posts to split"));
    }
    let class_count = labels.iter().max().unwrap() + 1;
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for class in 0..class_count {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            return Err(Error::precondition(format!("class {class} has no posts")));
        }
        let mut rng = stream(seed, &format!("split/class/{class}"));
        shuffle(&mut members, &mut rng);
        let n_train = (train_fraction * members.len() as f64).round() as usize;
        train_indices.extend_from_slice(&members[..n_train]);
        test_indices.extend_from_slice(&members[n_train..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(SplitPlan {
        train_indices,
        test_indices,
        seed,
        train_fraction,
    })
}

/// [`make_label_split`] over a fully labeled bundle.
pub fn make_split(bundle: &DatasetBundle, train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    let labels: Vec<usize> = bundle
        .labels
        .iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::precondition(format!("post {i} is unlabeled"))))
        .collect::<Result<_>>()?;
    make_label_split(&labels, train_fraction, seed)
}

//! Splitting a relation set into tasks.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numerics::param::Param;
use crate::numerics::rng::fnv1a;
use crate::numerics::Rng;

/// Random balanced partition: `K` groups whose sizes differ by at most one.
/// Groups keep the input order of their relations.
pub fn partition_random(relations: &[String], k: usize, rng: &mut Rng) -> Result<Vec<Vec<String>>> {
    if k == 0 || k > relations.len() {
        return Err(Error::Argument(format!(
            "cannot split {} relations into {k} tasks",
            relations.len()
        )));
    }
    let mut idx: Vec<usize> = (0..relations.len()).collect();
    idx.shuffle(rng);
    let base = relations.len() / k;
    let extra = relations.len() % k;
    let mut groups = Vec::with_capacity(k);
    let mut start = 0;
    for g in 0..k {
        let size = base + usize::from(g < extra);
        let mut members = idx[start..start + size].to_vec();
        members.sort_unstable();
        groups.push(members.into_iter().map(|i| relations[i].clone()).collect());
        start += size;
    }
    Ok(groups)
}

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, lowest centroid index on ties.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp_init(points: &[&[f64]], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].to_vec()];
    while centroids.len() < k {
        let weights: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].to_vec());
    }
    centroids
}

/// One Lloyd run; returns assignments and inertia.
fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centroids);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster at the point farthest from its centroid.
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(points[a], &centroids[assign[a]]);
                        let db = sq_dist(points[b], &centroids[assign[b]]);
                        da.partial_cmp(&db).expect("finite").then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centroids[c] = points[far].to_vec();
                assign[far] = c;
                changed = true;
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assign)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum();
    (assign, inertia)
}

/// k-means partition of relations by their name vectors.
///
/// k-means++ seeding, Euclidean distance, 10 restarts keeping the lowest
/// inertia (earliest restart on ties). Groups are ordered by their lowest
/// relation index and may be unbalanced, singletons included.
pub fn partition_kmeans(
    relation_vectors: &[(String, Vec<f64>)],
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<String>>> {
    let n = relation_vectors.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("cannot cluster {n} relations into {k} tasks")));
    }
    let dim = relation_vectors[0].1.len();
    if let Some((r, v)) = relation_vectors.iter().find(|(_, v)| v.len() != dim) {
        return Err(Error::Dimension(format!(
            "relation `{r}` vector has dimension {}, expected {dim}",
            v.len()
        )));
    }
    let points: Vec<&[f64]> = relation_vectors.iter().map(|(_, v)| v.as_slice()).collect();
    let mut distinct: Vec<&[f64]> = Vec::new();
    for p in &points {
        if !distinct.iter().any(|q| q == p) {
            distinct.push(p);
        }
    }
    if distinct.len() < k {
        return Err(Error::Argument(format!(
            "only {} distinct relation vectors for {k} clusters",
            distinct.len()
        )));
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let init = kmeans_pp_init(&points, k, rng);
        let (assign, inertia) = lloyd(&points, init);
        if best.as_ref().map_or(true, |(_, b)| inertia < *b) {
            best = Some((assign, inertia));
        }
    }
    let (assign, _) = best.expect("at least one restart");
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        groups[c].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups.sort_by_key(|g| g[0]);
    Ok(groups
        .into_iter()
        .map(|g| g.into_iter().map(|i| relation_vectors[i].0.clone()).collect())
        .collect())
}

/// Mean of seeded random token embeddings over each relation's name tokens.
///
/// Each token's vector depends only on `(seed, token)`, so the table is
/// independent of relation order.
pub fn relation_name_vectors(
    relations: &[(String, Vec<String>)],
    dim: usize,
    seed: u64,
) -> Vec<(String, Vec<f64>)> {
    relations
        .iter()
        .map(|(rel, tokens)| {
            let mut mean = vec![0.0; dim];
            for t in tokens {
                let mut rng = Rng::new(seed, fnv1a(t.as_bytes()));
                let row = Param::uniform("token", 1, dim, 1.0, &mut rng);
                for (m, v) in mean.iter_mut().zip(row.value.as_slice()) {
                    *m += v / tokens.len() as f64;
                }
            }
            (rel.clone(), mean)
        })
        .collect()
}

//! K-modes clustering of categorical vectors under the simple-matching
//! dissimilarity (number of mismatching positions).
//!
//! The procedure follows Huang's incremental formulation: seed `k` modes,
//! allocate every point to its nearest mode while updating that mode after
//! each allocation, then sweep the data reallocating points whose nearest
//! mode belongs to another cluster until a full sweep moves nothing.
//!
//! Modes are kept equal to the per-position most frequent category of their
//! cluster at all times (ties go to the lowest category code), so every
//! reallocation strictly lowers the total cost and the cost recorded after
//! each sweep never increases.

use std::collections::HashSet;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// How many times one cluster may be reseeded before it is left empty.
const MAX_REPAIRS_PER_CLUSTER: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalPoint {
    pub values: Vec<u32>,
    pub payload_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub k: usize,
    /// Cluster id of each input point, by input position.
    pub assignments: Vec<usize>,
    pub modes: Vec<Vec<u32>>,
    pub cost: u64,
    /// Reallocation sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Cost after the initial allocation, then after every sweep.
    pub cost_history: Vec<u64>,
    /// Clusters left empty after repair gave up.
    pub empty_clusters: Vec<usize>,
    pub repairs: usize,
}

impl Clustering {
    /// Input positions of the members of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == c)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn non_empty(&self) -> usize {
        self.sizes().iter().filter(|&&s| s > 0).count()
    }
}

/// Number of positions at which `x` and `y` differ.
pub fn matching_dissimilarity(x: &[u32], y: &[u32]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(mismatches(x, y))
}

#[inline]
fn mismatches(x: &[u32], y: &[u32]) -> usize {
    x.iter().zip(y).filter(|(a, b)| a != b).count()
}

/// `round(sqrt(n / 2))`, at least 1.
pub fn rule_of_thumb_k(n: usize) -> usize {
    ((n as f64 / 2.0).sqrt().round() as usize).max(1)
}

pub fn kmodes_cluster(
    points: &[CategoricalPoint],
    k: usize,
    seed: u64,
    max_iterations: usize,
) -> Result<Clustering> {
    if points.is_empty() {
        return Err(Error::Config("no points to cluster".into()));
    }
    if k == 0 || k > points.len() {
        return Err(Error::Config(format!(
            "k = {k} must lie in 1..={}",
            points.len()
        )));
    }
    let m = points[0].values.len();
    if let Some(p) = points.iter().find(|p| p.values.len() != m) {
        return Err(Error::Usage(format!(
            "point {} has length {}, expected {m}",
            p.payload_id,
            p.values.len()
        )));
    }
    let mut rng = rng::stream(seed, &[rng::TAG_KMODES]);
    let mut state = State::new(points, k, m, &mut rng);
    state.initial_allocation();
    state.repair();
    let mut history = vec![state.cost()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        let moved = state.sweep();
        let repaired = state.repair();
        let cost = state.cost();
        assert!(
            cost <= *history.last().expect("history seeded"),
            "k-modes cost increased during a sweep"
        );
        history.push(cost);
        if !moved && !repaired {
            converged = true;
            break;
        }
    }
    let assignments: Vec<usize> = state
        .assign
        .iter()
        .map(|a| a.expect("all allocated"))
        .collect();
    let mut sizes = vec![0usize; k];
    for &a in &assignments {
        sizes[a] += 1;
    }
    Ok(Clustering {
        k,
        cost: *history.last().expect("non-empty"),
        assignments,
        modes: state.modes,
        iterations,
        converged,
        cost_history: history,
        empty_clusters: (0..k).filter(|&c| sizes[c] == 0).collect(),
        repairs: state.repairs.iter().sum(),
    })
}

struct State<'a> {
    points: &'a [CategoricalPoint],
    k: usize,
    m: usize,
    n_cat: usize,
    /// `freq[(c * m + j) * n_cat + v]`: members of `c` with category `v` at `j`.
    freq: Vec<u32>,
    modes: Vec<Vec<u32>>,
    size: Vec<usize>,
    assign: Vec<Option<usize>>,
    repairs: Vec<usize>,
    gave_up: Vec<bool>,
}

impl<'a> State<'a> {
    fn new(points: &'a [CategoricalPoint], k: usize, m: usize, rng: &mut Rng) -> Self {
        let n_cat = points
            .iter()
            .flat_map(|p| p.values.iter())
            .max()
            .map_or(1, |&v| v as usize + 1);
        State {
            points,
            k,
            m,
            n_cat,
            freq: vec![0; k * m * n_cat],
            modes: initial_modes(points, k, rng),
            size: vec![0; k],
            assign: vec![None; points.len()],
            repairs: vec![0; k],
            gave_up: vec![false; k],
        }
    }

    fn nearest(&self, p: usize) -> (usize, usize) {
        let v = &self.points[p].values;
        let mut best = (0, usize::MAX);
        for (c, mode) in self.modes.iter().enumerate() {
            let d = mismatches(v, mode);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    fn add(&mut self, p: usize, c: usize) {
        let base = c * self.m * self.n_cat;
        for (j, &v) in self.points[p].values.iter().enumerate() {
            let row = base + j * self.n_cat;
            self.freq[row + v as usize] += 1;
            let cur = self.modes[c][j];
            let (fv, fc) = (self.freq[row + v as usize], self.freq[row + cur as usize]);
            if fv > fc || (fv == fc && v < cur) {
                self.modes[c][j] = v;
            }
        }
        self.size[c] += 1;
        self.assign[p] = Some(c);
    }

    fn remove(&mut self, p: usize, c: usize) {
        let base = c * self.m * self.n_cat;
        self.size[c] -= 1;
        self.assign[p] = None;
        for (j, &v) in self.points[p].values.iter().enumerate() {
            let row = base + j * self.n_cat;
            self.freq[row + v as usize] -= 1;
            // An emptied cluster keeps its last mode.
            if self.size[c] > 0 && self.modes[c][j] == v {
                let counts = &self.freq[row..row + self.n_cat];
                self.modes[c][j] = crate::tree::argmax_first(counts) as u32;
            }
        }
    }

    fn initial_allocation(&mut self) {
        for p in 0..self.points.len() {
            let (c, _) = self.nearest(p);
            self.add(p, c);
        }
    }

    /// One reallocation pass; true if any point moved.
    fn sweep(&mut self) -> bool {
        let mut moved = false;
        for p in 0..self.points.len() {
            let cur = self.assign[p].expect("allocated");
            let d_cur = mismatches(&self.points[p].values, &self.modes[cur]);
            let (best, d_best) = self.nearest(p);
            if best != cur && d_best < d_cur {
                self.remove(p, cur);
                self.add(p, best);
                moved = true;
            }
        }
        moved
    }

    /// Reseeds each empty cluster with the point of the largest cluster that
    /// lies farthest from its mode. True if any cluster was reseeded.
    fn repair(&mut self) -> bool {
        let mut any = false;
        for c in 0..self.k {
            if self.size[c] > 0 || self.gave_up[c] {
                continue;
            }
            if self.repairs[c] >= MAX_REPAIRS_PER_CLUSTER {
                self.gave_up[c] = true;
                continue;
            }
            let largest = crate::tree::argmax_first(&self.size);
            let far = (0..self.points.len())
                .filter(|&p| self.assign[p] == Some(largest))
                .map(|p| (p, mismatches(&self.points[p].values, &self.modes[largest])))
                .fold(None, |best: Option<(usize, usize)>, (p, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((p, d)),
                });
            match far {
                Some((p, d)) if d > 0 && self.size[largest] > 1 => {
                    self.remove(p, largest);
                    self.modes[c] = self.points[p].values.clone();
                    self.add(p, c);
                    self.repairs[c] += 1;
                    any = true;
                }
                _ => self.gave_up[c] = true,
            }
        }
        any
    }

    fn cost(&self) -> u64 {
        (0..self.points.len())
            .map(|p| {
                mismatches(
                    &self.points[p].values,
                    &self.modes[self.assign[p].expect("allocated")],
                ) as u64
            })
            .sum()
    }
}

/// `k` seed modes: points taken in seeded random order, preferring distinct
/// vectors; duplicates only fill in when fewer than `k` distinct vectors exist.
fn initial_modes(points: &[CategoricalPoint], k: usize, rng: &mut Rng) -> Vec<Vec<u32>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(rng);
    let mut seen: HashSet<&[u32]> = HashSet::new();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut rest = Vec::new();
    for &i in &order {
        if chosen.len() == k {
            break;
        }
        if seen.insert(&points[i].values) {
            chosen.push(i);
        } else {
            rest.push(i);
        }
    }
    let extra = k - chosen.len();
    chosen.extend(rest.into_iter().take(extra));
    chosen
        .into_iter()
        .map(|i| points[i].values.clone())
        .collect()
}

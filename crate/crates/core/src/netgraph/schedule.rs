//! Seeded, replayable schedules of communication graphs.
//!
//! A schedule is a pure function of `(topology, m, epoch_len, seed, n)`: the
//! graph used at iteration `n` belongs to epoch `n / epoch_len` and is rebuilt
//! from a ChaCha stream keyed by `(seed, epoch)`. Nothing is cached here.
//!
//! Fixed-shape families (cycle, star) keep their canonical labeling on epoch 0
//! and draw a uniform relabeling of the nodes on every later epoch, so a
//! "changing" cycle is a different cycle on the same node set.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{count_components, DisjointSets, Laplacian, NetgraphError, Result};

/// Rejection-sampling budget for connected Erdős–Rényi draws, per epoch.
const ER_MAX_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Cycle,
    Star,
    Complete,
    ErdosRenyi { p: f64 },
    /// Minimum spanning tree of an Erdős–Rényi draw under uniform random weights.
    MstOfEr { p: f64 },
}

impl Topology {
    /// Builds a topology from its config name; `edge_prob` is only read by
    /// the random families.
    pub fn from_name(name: &str, edge_prob: f64) -> Result<Self> {
        let t = match name {
            "cycle" => Topology::Cycle,
            "star" => Topology::Star,
            "complete" => Topology::Complete,
            "erdos_renyi" | "er" => Topology::ErdosRenyi { p: edge_prob },
            "mst_of_er" | "mst" => Topology::MstOfEr { p: edge_prob },
            other => return Err(NetgraphError::UnknownTopology(other.to_string())),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Topology::Cycle => "cycle",
            Topology::Star => "star",
            Topology::Complete => "complete",
            Topology::ErdosRenyi { .. } => "erdos_renyi",
            Topology::MstOfEr { .. } => "mst_of_er",
        }
    }

    pub fn edge_prob(&self) -> Option<f64> {
        match *self {
            Topology::ErdosRenyi { p } | Topology::MstOfEr { p } => Some(p),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.edge_prob() {
            Some(p) if !(p > 0.0 && p <= 1.0) => Err(NetgraphError::InvalidProbability(p)),
            _ => Ok(()),
        }
    }

    /// Families whose spectrum does not depend on the epoch draw.
    fn spectrum_is_epoch_invariant(&self) -> bool {
        matches!(self, Topology::Cycle | Topology::Star | Topology::Complete)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.edge_prob() {
            Some(p) => write!(f, "{}({p})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for Topology {
    type Err = NetgraphError;

    /// Accepts `cycle`, `star`, `complete`, `erdos_renyi(0.9)`, `mst_of_er(0.9)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once('(') {
            Some((name, rest)) => {
                let p = rest
                    .strip_suffix(')')
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| NetgraphError::UnknownTopology(s.to_string()))?;
                Topology::from_name(name.trim(), p)
            }
            None => Topology::from_name(s, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSchedule {
    topology: Topology,
    m: usize,
    /// `None` means the graph never changes.
    epoch_len: Option<NonZeroUsize>,
    seed: u64,
}

impl NetworkSchedule {
    pub fn new(topology: Topology, m: usize, epoch_len: Option<usize>, seed: u64) -> Result<Self> {
        topology.validate()?;
        if m < 2 {
            return Err(NetgraphError::TooFewNodes { min: 2, got: m });
        }
        let epoch_len = match epoch_len {
            None => None,
            Some(len) => Some(NonZeroUsize::new(len).ok_or(NetgraphError::ZeroEpochLength)?),
        };
        Ok(Self { topology, m, epoch_len, seed })
    }

    /// A schedule that emits the same graph forever.
    pub fn fixed(topology: Topology, m: usize, seed: u64) -> Result<Self> {
        Self::new(topology, m, None, seed)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    pub fn epoch_len(&self) -> Option<usize> {
        self.epoch_len.map(NonZeroUsize::get)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epoch(&self, n: usize) -> usize {
        if self.topology == Topology::Complete {
            return 0;
        }
        self.epoch_len.map_or(0, |len| n / len.get())
    }

    /// Laplacian in force at iteration `n`.
    pub fn laplacian(&self, n: usize) -> Laplacian {
        self.epoch_laplacian(self.epoch(n))
    }

    pub fn epoch_laplacian(&self, epoch: usize) -> Laplacian {
        let edges = self.epoch_edges(epoch);
        Laplacian::from_edges(self.m, &edges).expect("schedules only emit connected simple graphs")
    }

    fn epoch_rng(&self, epoch: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch as u64);
        rng
    }

    fn epoch_edges(&self, epoch: usize) -> Vec<(usize, usize)> {
        let m = self.m;
        let mut rng = self.epoch_rng(epoch);
        match self.topology {
            Topology::Complete => (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect(),
            Topology::Cycle | Topology::Star => {
                let base: Vec<(usize, usize)> = if self.topology == Topology::Cycle {
                    if m == 2 {
                        vec![(0, 1)]
                    } else {
                        (0..m).map(|i| (i, (i + 1) % m)).collect()
                    }
                } else {
                    (1..m).map(|i| (0, i)).collect()
                };
                if epoch == 0 {
                    return base;
                }
                let mut perm: Vec<usize> = (0..m).collect();
                perm.shuffle(&mut rng);
                base.into_iter().map(|(a, b)| (perm[a], perm[b])).collect()
            }
            Topology::ErdosRenyi { p } => connected_erdos_renyi(m, p, &mut rng),
            Topology::MstOfEr { p } => {
                let er = connected_erdos_renyi(m, p, &mut rng);
                let mut weighted: Vec<(f64, (usize, usize))> = er.into_iter().map(|e| (rng.random::<f64>(), e)).collect();
                weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut dsu = DisjointSets::new(m);
                weighted
                    .into_iter()
                    .filter_map(|(_, (a, b))| dsu.union(a, b).then_some((a, b)))
                    .collect()
            }
        }
    }
}

fn erdos_renyi_draw(m: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Rejection-samples a connected `G(m, p)`; after [`ER_MAX_DRAWS`] failures
/// the last draw is unioned with a random spanning tree.
fn connected_erdos_renyi(m: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut draw = Vec::new();
    for _ in 0..ER_MAX_DRAWS {
        draw = erdos_renyi_draw(m, p, rng);
        if count_components(m, &draw) == 1 {
            return draw;
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    for k in 1..m {
        let parent = order[rng.random_range(0..k)];
        let child = order[k];
        let edge = (parent.min(child), parent.max(child));
        if !draw.contains(&edge) {
            draw.push(edge);
        }
    }
    draw.sort_unstable();
    draw
}

/// Uniform bounds `λ_min^+ ≤ λ_min^+(L_n) ≤ λ_max(L_n) ≤ λ_max` over a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lambda_min_plus: f64,
    pub lambda_max: f64,
}

impl SpectralBounds {
    pub fn new(lambda_min_plus: f64, lambda_max: f64) -> Option<Self> {
        (lambda_min_plus > 0.0 && lambda_min_plus <= lambda_max && lambda_max.is_finite())
            .then_some(Self { lambda_min_plus, lambda_max })
    }

    /// `λ_max / λ_min^+`.
    pub fn condition_number(&self) -> f64 {
        self.lambda_max / self.lambda_min_plus
    }
}

/// Spectral bounds over every epoch touched by iterations `0..horizon`.
///
/// Relabelled cycles and stars share one spectrum, so only epoch 0 is
/// decomposed for those; random families decompose every realized epoch.
pub fn spectral_bounds(schedule: &NetworkSchedule, horizon: usize) -> Result<SpectralBounds> {
    if horizon == 0 {
        return Err(NetgraphError::ZeroHorizon);
    }
    let last_epoch = if schedule.topology.spectrum_is_epoch_invariant() { 0 } else { schedule.epoch(horizon - 1) };
    let (lo, hi) = (0..=last_epoch)
        .into_par_iter()
        .map(|e| {
            let ev = schedule.epoch_laplacian(e).eigenvalues();
            (ev[1], ev[ev.len() - 1])
        })
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    Ok(SpectralBounds::new(lo, hi).expect("connected graphs have a positive spectral gap"))
}

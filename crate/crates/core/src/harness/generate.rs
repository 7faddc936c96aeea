//! Seeded instance generators.
//!
//! Utilities and most costs are snapped to a 1/256 grid, so instances
//! serialize compactly and re-parse to the same bits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{edge_bpb, validate_instance, BipartiteInstance, Edge, LeftVertex, RightVertex};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// I.i.d. edges, utilities uniform in `[1, beta]`, costs uniform in `(0, 1]`.
    Uniform,
    /// Few tasks, many workers; heavy-tailed worker costs.
    Crowdsourcing,
    /// Relays connect to nearby users; utility tracks a per-user channel quality.
    D2d,
    /// Cheap-looking decoys with buck per bang just above the median crowd the first half.
    Adversarial,
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "crowdsourcing" => Ok(Self::Crowdsourcing),
            "d2d" => Ok(Self::D2d),
            "adversarial" => Ok(Self::Adversarial),
            other => Err(Error::InvalidArgument(format!("unknown generator kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub kind: GeneratorKind,
    pub n_left: usize,
    pub n_right: usize,
    pub beta: f64,
    pub budget: f64,
    pub edge_density: f64,
    pub seed: u64,
    /// Skip the bias toward instances where the observation half covers every right vertex.
    #[serde(default)]
    pub assumption_free: bool,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Uniform,
            n_left: 8,
            n_right: 3,
            beta: 4.0,
            budget: 4.0,
            edge_density: 0.5,
            seed: 0,
            assumption_free: false,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_left < 2 {
            problems.push("n_left must be at least 2");
        }
        if self.n_right < 1 {
            problems.push("n_right must be at least 1");
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            problems.push("beta must be finite and at least 1");
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            problems.push("budget must be positive");
        }
        if !(self.edge_density > 0.0 && self.edge_density <= 1.0) {
            problems.push("edge_density must lie in (0, 1]");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

const GRID: f64 = 256.0;
const MAX_ATTEMPTS: usize = 16;
/// Upper clip for heavy-tailed crowdsourcing costs.
const CROWD_COST_CAP: f64 = 2.0;

fn snap(x: f64) -> f64 {
    (x * GRID).round() / GRID
}

fn utility_in(beta: f64, frac: f64) -> f64 {
    snap(1.0 + (beta - 1.0) * frac.clamp(0.0, 1.0)).clamp(1.0, beta)
}

fn uniform_utility(rng: &mut ChaCha8Rng, beta: f64) -> f64 {
    let f = rng.random::<f64>();
    utility_in(beta, f)
}

fn unit_cost(rng: &mut ChaCha8Rng) -> f64 {
    snap(rng.random::<f64>()).max(1.0 / GRID)
}

pub fn generate_instance(params: &GeneratorParams) -> Result<BipartiteInstance> {
    params.validate()?;
    let mut last_err = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        // Attempt 0 uses the seed as given; retries move to fresh sub-streams.
        let mut rng = rng::stream(params.seed, rng::STREAM_GENERATION + 16 * attempt as u64);
        let g = match params.kind {
            GeneratorKind::Uniform => uniform(params, &mut rng),
            GeneratorKind::Crowdsourcing => crowdsourcing(params, &mut rng),
            GeneratorKind::D2d => d2d(params, &mut rng),
            GeneratorKind::Adversarial => adversarial(params, &mut rng),
        };
        match validate_instance(&g) {
            Ok(_) => return Ok(g),
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: last_err,
    })
}

fn assemble(params: &GeneratorParams, costs: Vec<f64>, mut edges: Vec<Edge>) -> BipartiteInstance {
    edges.sort_by_key(|e| (e.left, e.right));
    BipartiteInstance {
        lefts: costs
            .into_iter()
            .enumerate()
            .map(|(id, cost)| LeftVertex { id, cost })
            .collect(),
        rights: (0..params.n_right).map(|id| RightVertex { id }).collect(),
        edges,
        budget: params.budget,
        beta: params.beta,
    }
}

/// Give every right vertex at least one edge from the first half of left ids.
fn cover_rights(params: &GeneratorParams, rng: &mut ChaCha8Rng, edges: &mut Vec<Edge>) {
    if params.assumption_free {
        return;
    }
    let half = params.n_left / 2;
    for r in 0..params.n_right {
        if edges.iter().any(|e| e.right == r && e.left < half) {
            continue;
        }
        let left = rng.random_range(0..half);
        let utility = uniform_utility(rng, params.beta);
        edges.push(Edge { left, right: r, utility });
    }
}

fn uniform(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> BipartiteInstance {
    let costs: Vec<f64> = (0..params.n_left).map(|_| unit_cost(rng)).collect();
    let mut edges = Vec::new();
    for left in 0..params.n_left {
        for right in 0..params.n_right {
            if rng.random::<f64>() < params.edge_density {
                let utility = uniform_utility(rng, params.beta);
                edges.push(Edge { left, right, utility });
            }
        }
    }
    cover_rights(params, rng, &mut edges);
    assemble(params, costs, edges)
}

fn crowdsourcing(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> BipartiteInstance {
    let pareto = Pareto::<f64>::new(0.1, 1.5).expect("valid Pareto parameters");
    let costs: Vec<f64> = (0..params.n_left)
        .map(|_| snap(pareto.sample(rng).min(CROWD_COST_CAP)).max(1.0 / GRID))
        .collect();
    let skill: Vec<f64> = (0..params.n_left).map(|_| rng.random()).collect();
    let weight: Vec<f64> = (0..params.n_right).map(|_| rng.random()).collect();
    let mut edges = Vec::new();
    for left in 0..params.n_left {
        for right in 0..params.n_right {
            if rng.random::<f64>() < params.edge_density {
                let noise: f64 = rng.random_range(-0.1..0.1);
                let frac = 0.5 * skill[left] + 0.4 * weight[right] + noise;
                let utility = utility_in(params.beta, frac);
                edges.push(Edge { left, right, utility });
            }
        }
    }
    cover_rights(params, rng, &mut edges);
    assemble(params, costs, edges)
}

fn d2d(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> BipartiteInstance {
    let mut point = || (rng.random::<f64>(), rng.random::<f64>());
    let relays: Vec<(f64, f64)> = (0..params.n_left).map(|_| point()).collect();
    let users: Vec<(f64, f64)> = (0..params.n_right).map(|_| point()).collect();
    let quality: Vec<f64> = (0..params.n_right).map(|_| rng.random()).collect();
    let costs: Vec<f64> = (0..params.n_left).map(|_| unit_cost(rng)).collect();
    // A disc of this radius covers roughly `edge_density` of the unit square.
    let radius = (params.edge_density / std::f64::consts::PI).sqrt().min(std::f64::consts::SQRT_2);
    let mut edges = Vec::new();
    for (left, &(lx, ly)) in relays.iter().enumerate() {
        for (right, &(ux, uy)) in users.iter().enumerate() {
            let d = ((lx - ux).powi(2) + (ly - uy).powi(2)).sqrt();
            if d <= radius {
                let frac = quality[right] * (1.0 - d / radius);
                let utility = utility_in(params.beta, frac);
                edges.push(Edge { left, right, utility });
            }
        }
    }
    cover_rights(params, rng, &mut edges);
    assemble(params, costs, edges)
}

/// Median buck per bang over all edges (upper median for even counts).
pub fn median_buck_per_bang(instance: &BipartiteInstance) -> f64 {
    let mut bs: Vec<f64> = instance.edges.iter().map(|e| edge_bpb(instance, e)).collect();
    bs.sort_by(f64::total_cmp);
    bs.get(bs.len() / 2).copied().unwrap_or(0.0)
}

/// Number of decoys planted by the adversarial generator.
pub fn decoy_count(n_left: usize) -> usize {
    n_left.div_ceil(2)
}

fn adversarial(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> BipartiteInstance {
    let base = uniform(params, rng);
    let tau = median_buck_per_bang(&base);
    let decoys = decoy_count(params.n_left);

    let mut costs: Vec<f64> = base.lefts.iter().map(|l| l.cost).collect();
    let mut edges: Vec<Edge> = base.edges.iter().filter(|e| e.left >= decoys).copied().collect();
    for (d, cost) in costs.iter_mut().enumerate().take(decoys) {
        // All decoy edges share one utility, so every edge has the same buck per bang.
        let utility = uniform_utility(rng, params.beta);
        let lift: f64 = rng.random_range(0.02..0.09);
        *cost = tau * (1.0 + lift) * utility;
        let mut right = d % params.n_right;
        loop {
            edges.push(Edge { left: d, right, utility });
            right += decoys;
            if right >= params.n_right {
                break;
            }
        }
    }
    assemble(params, costs, edges)
}

//! Fruchterman-Reingold force-directed layout.
//!
//! Nodes start uniformly at random in the unit square. Every pair repels with
//! force `k²/d` and every edge attracts with `w·d²/k`, where `k = sqrt(1/n)`.
//! Each step moves a node along its net force by at most the current
//! temperature, which cools linearly from 0.1 to 0. Final coordinates are
//! rescaled into `[0,1]²` with one common factor, so relative distances are kept.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::labeling::Stance;
use crate::similarity::SimilarityGraph;

const INITIAL_TEMPERATURE: f64 = 0.1;
const MIN_DISTANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub iterations: u32,
    /// Scale attraction by edge weight.
    pub weighted: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            weighted: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutPoint {
    pub user_id: String,
    pub x: f64,
    pub y: f64,
    pub stance: Stance,
}

pub fn fruchterman_reingold(graph: &SimilarityGraph, cfg: &LayoutConfig, seed: u64) -> Vec<LayoutPoint> {
    let n = graph.nodes.len();
    if n == 0 {
        return Vec::new();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    relax(graph, cfg, &mut pos, &mut rng);
    rescale(&mut pos);
    graph
        .nodes
        .iter()
        .zip(pos)
        .map(|(node, [x, y])| LayoutPoint {
            user_id: node.user_id.clone(),
            x,
            y,
            stance: node.stance,
        })
        .collect()
}

fn relax(graph: &SimilarityGraph, cfg: &LayoutConfig, pos: &mut [[f64; 2]], rng: &mut ChaCha8Rng) {
    let n = pos.len();
    let k = libm::sqrt(1.0 / n as f64);
    let k2 = k * k;
    let mut disp = vec![[0.0f64; 2]; n];

    for it in 0..cfg.iterations {
        let temperature = INITIAL_TEMPERATURE * (1.0 - f64::from(it) / f64::from(cfg.iterations));
        disp.iter_mut().for_each(|d| *d = [0.0, 0.0]);

        for i in 0..n {
            let [xi, yi] = pos[i];
            let mut acc = [0.0, 0.0];
            for j in (i + 1)..n {
                let mut dx = xi - pos[j][0];
                let mut dy = yi - pos[j][1];
                let mut d2 = dx * dx + dy * dy;
                if d2 < MIN_DISTANCE * MIN_DISTANCE {
                    // coincident points: push apart along a random direction
                    let angle = rng.gen::<f64>() * core::f64::consts::TAU;
                    dx = libm::cos(angle) * MIN_DISTANCE;
                    dy = libm::sin(angle) * MIN_DISTANCE;
                    d2 = MIN_DISTANCE * MIN_DISTANCE;
                }
                // (dx/d) * k²/d
                let s = k2 / d2;
                acc[0] += dx * s;
                acc[1] += dy * s;
                disp[j][0] -= dx * s;
                disp[j][1] -= dy * s;
            }
            disp[i][0] += acc[0];
            disp[i][1] += acc[1];
        }

        for e in &graph.edges {
            let dx = pos[e.u][0] - pos[e.v][0];
            let dy = pos[e.u][1] - pos[e.v][1];
            let d = libm::sqrt(dx * dx + dy * dy);
            if d < MIN_DISTANCE {
                continue;
            }
            let w = if cfg.weighted { e.weight } else { 1.0 };
            // (dx/d) * w d²/k
            let s = w * d / k;
            disp[e.u][0] -= dx * s;
            disp[e.u][1] -= dy * s;
            disp[e.v][0] += dx * s;
            disp[e.v][1] += dy * s;
        }

        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = libm::sqrt(d[0] * d[0] + d[1] * d[1]);
            if len > 0.0 && len.is_finite() {
                let step = len.min(temperature) / len;
                p[0] += d[0] * step;
                p[1] += d[1] * step;
            }
        }
    }
}

/// Uniform scale into the unit square; a degenerate extent collapses to the centre.
fn rescale(pos: &mut [[f64; 2]]) {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pos.iter() {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    for p in pos.iter_mut() {
        for a in 0..2 {
            p[a] = if extent > 0.0 {
                ((p[a] - lo[a]) / extent).clamp(0.0, 1.0)
            } else {
                0.5
            };
        }
    }
}

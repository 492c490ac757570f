//! Naive reference implementations used as test oracles. They work on plain
//! edge lists and hash maps and share no code with the library.
#![allow(dead_code)]

use std::collections::HashMap;

/// `(item, user, polarity)` with polarity ±1.
pub type OracleEdge = (usize, usize, f64);

pub fn q_of(alpha: f64, beta: f64) -> f64 {
    (alpha - beta) / (alpha + beta)
}

/// Direct transcription of the two update equations. `seeds` maps an item to
/// ±1. Returns `(item q, user q)`.
pub fn naive_fixpoint(
    n_items: usize,
    n_users: usize,
    edges: &[OracleEdge],
    seeds: &HashMap<usize, f64>,
    c: f64,
    iterations: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut qi: Vec<f64> = (0..n_items)
        .map(|i| seeds.get(&i).copied().unwrap_or(0.0))
        .collect();
    let mut qu = vec![0.0; n_users];
    for _ in 0..iterations {
        for (u, slot) in qu.iter_mut().enumerate() {
            let mut alpha = c;
            let mut beta = c;
            for &(i, v, p) in edges {
                if v != u {
                    continue;
                }
                let x = p * qi[i];
                if x > 0.0 {
                    alpha += x;
                }
                if x < 0.0 {
                    beta -= x;
                }
            }
            *slot = q_of(alpha, beta);
        }
        for (i, slot) in qi.iter_mut().enumerate() {
            if seeds.contains_key(&i) {
                continue;
            }
            let mut alpha = c;
            let mut beta = c;
            for &(j, u, p) in edges {
                if j != i {
                    continue;
                }
                let x = p * qu[u];
                if x > 0.0 {
                    alpha += x;
                }
                if x < 0.0 {
                    beta -= x;
                }
            }
            *slot = q_of(alpha, beta);
        }
    }
    (qi, qu)
}

/// Node state for the recursive online oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ab {
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

pub struct OnlineOracle {
    pub items: Vec<Ab>,
    pub users: Vec<Ab>,
    pub seed: Vec<bool>,
    /// Per node, neighbours with the edge polarity, in insertion order.
    pub item_adj: Vec<Vec<(usize, f64)>>,
    pub user_adj: Vec<Vec<(usize, f64)>>,
    pub kappa: f64,
}

fn bump(s: &mut Ab, delta: f64) -> f64 {
    if delta > 0.0 {
        s.alpha += delta;
    }
    if delta < 0.0 {
        s.beta -= delta;
    }
    let q = q_of(s.alpha, s.beta);
    let change = q - s.q;
    s.q = q;
    change
}

impl OnlineOracle {
    /// Recursive UpdateItem; seed items are left alone. The change forwarded
    /// along an edge is multiplied by its polarity.
    pub fn update_item(&mut self, i: usize, delta: f64, depth: u32) {
        if self.seed[i] {
            return;
        }
        let change = bump(&mut self.items[i], delta);
        if depth > 0 && change.abs() >= self.kappa {
            for k in 0..self.item_adj[i].len() {
                let (u, p) = self.item_adj[i][k];
                self.update_user(u, change * p, depth - 1);
            }
        }
    }

    pub fn update_user(&mut self, u: usize, delta: f64, depth: u32) {
        let change = bump(&mut self.users[u], delta);
        if depth > 0 && change.abs() >= self.kappa {
            for k in 0..self.user_adj[u].len() {
                let (i, p) = self.user_adj[u][k];
                self.update_item(i, change * p, depth - 1);
            }
        }
    }
}

/// `T_ij / sqrt(T_i T_j)` by brute force over every pair of tweets: each
/// pair of one tweet to `a` and one tweet to `b` by the same user adds one.
pub fn brute_force_correlation(tweets: &[(&str, &str)], a: &str, b: &str) -> f64 {
    let pairs = |x: &str, y: &str| -> f64 {
        let mut n = 0u64;
        for &(u1, s1) in tweets {
            for &(u2, s2) in tweets {
                if u1 == u2 && s1 == x && s2 == y {
                    n += 1;
                }
            }
        }
        n as f64
    };
    let (ab, aa, bb) = (pairs(a, b), pairs(a, a), pairs(b, b));
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

/// Gradient-descent-free check for a trained logistic model: the weighted
/// log-loss of `scores` against `targets` (1 = fake).
pub fn weighted_log_loss(scores: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    scores
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((&s, &y), &w)| {
            let p = 1.0 / (1.0 + (-s).exp());
            -w * (y * p.max(1e-300).ln() + (1.0 - y) * (1.0 - p).max(1e-300).ln())
        })
        .sum()
}

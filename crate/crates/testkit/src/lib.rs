//! Slow, direct implementations of the quantities survtree computes, written
//! against plain vectors so they share no code with the library.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-major binary features with survival outcomes.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub rows: Vec<Vec<bool>>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
}

impl Fixture {
    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn m(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn y_max(&self) -> f64 {
        self.times.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// Latest observation time of every random fixture.
pub const FIXTURE_Y_MAX: f64 = 20.0;

/// Times lie on the lattice `0.5, 1.0, ..., 20.0` (ties likely) and the last
/// sample always sits at `FIXTURE_Y_MAX`; features are biased coins whose
/// bias depends on the column so splits have something to find.
pub fn random_fixture(seed: u64, n: usize, m: usize, censoring: f64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bias: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..0.8)).collect();
    let rows: Vec<Vec<bool>> = (0..n).map(|_| bias.iter().map(|&p| rng.gen_bool(p)).collect()).collect();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for row in &rows {
        // the first two features shift the time distribution
        let shift = 10 * row.first().copied().unwrap_or(false) as i32 + 6 * row.get(1).copied().unwrap_or(false) as i32;
        let j = (rng.gen_range(1..=24) + shift).clamp(1, 40);
        times.push(j as f64 * 0.5);
        events.push(!rng.gen_bool(censoring));
    }
    times[n - 1] = FIXTURE_Y_MAX;
    if !events.iter().any(|&e| e) {
        events[0] = true;
    }
    Fixture { rows, times, events }
}

/// Right-continuous step function given by `(time, value after time)` jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub initial: f64,
    pub jumps: Vec<(f64, f64)>,
}

impl Step {
    pub fn at(&self, t: f64) -> f64 {
        let mut v = self.initial;
        for &(s, value) in &self.jumps {
            if s <= t {
                v = value;
            }
        }
        v
    }

    pub fn before(&self, t: f64) -> f64 {
        let mut v = self.initial;
        for &(s, value) in &self.jumps {
            if s < t {
                v = value;
            }
        }
        v
    }
}

/// Product-limit estimator; `n_i` counts everyone with time `>= t_i`.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Step {
    let mut distinct: Vec<f64> = times.iter().zip(events).filter(|(_, &e)| e).map(|(&t, _)| t).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut s = 1.0;
    let mut jumps = Vec::new();
    for t in distinct {
        let at_risk = times.iter().filter(|&&u| u >= t).count() as f64;
        let deaths = times.iter().zip(events).filter(|(&u, &e)| e && u == t).count() as f64;
        s *= 1.0 - deaths / at_risk;
        jumps.push((t, s));
    }
    Step { initial: 1.0, jumps }
}

pub fn censoring_curve(times: &[f64], events: &[bool]) -> Step {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    kaplan_meier(times, &flipped)
}

fn inverse(g: f64) -> f64 {
    if g > 0.0 {
        1.0 / g
    } else {
        0.0
    }
}

/// Brier integrand summed over samples at time `y`, before the `1/N` factor.
fn brier_at(y: f64, curves: &[&Step], f: &Fixture, g: &Step) -> f64 {
    let mut total = 0.0;
    for i in 0..f.n() {
        let s = curves[i].at(y);
        if f.times[i] <= y && f.events[i] {
            total += s * s * inverse(g.before(f.times[i]));
        } else if f.times[i] > y {
            total += (s - 1.0) * (s - 1.0) * inverse(g.at(y));
        }
    }
    total
}

/// Breakpoints of every step function involved, plus zero.
fn cut_points(f: &Fixture, curves: &[&Step], g: &Step) -> Vec<f64> {
    let mut cuts = vec![0.0];
    cuts.extend(f.times.iter().copied());
    cuts.extend(g.jumps.iter().map(|j| j.0));
    for c in curves {
        cuts.extend(c.jumps.iter().map(|j| j.0));
    }
    cuts.retain(|&t| t <= f.y_max());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// IPCW integrated Brier loss: outer integral over constant pieces, inner sum over
/// all samples. `curves[i]` is the prediction for sample `i`.
pub fn loss_double_loop(f: &Fixture, curves: &[&Step]) -> f64 {
    let g = censoring_curve(&f.times, &f.events);
    let cuts = cut_points(f, curves, &g);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        total += (w[1] - w[0]) * brier_at(mid, curves, f, &g);
    }
    total / (f.y_max() * f.n() as f64)
}

/// Same integral by a midpoint rule with `points` equal steps.
pub fn loss_riemann(f: &Fixture, curves: &[&Step], points: usize) -> f64 {
    let g = censoring_curve(&f.times, &f.events);
    let h = f.y_max() / points as f64;
    let total: f64 = (0..points).map(|p| brier_at((p as f64 + 0.5) * h, curves, f, &g)).sum();
    total * h / (f.y_max() * f.n() as f64)
}

/// Loss of one sample against `curve`, integrating piece by piece.
pub fn sample_loss(f: &Fixture, curve: &Step, i: usize) -> f64 {
    let g = censoring_curve(&f.times, &f.events);
    let cuts = cut_points(f, &[curve], &g);
    let death_weight = if f.events[i] { inverse(g.before(f.times[i])) } else { 0.0 };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let s = curve.at(mid);
        let term = if mid < f.times[i] {
            (s - 1.0) * (s - 1.0) * inverse(g.at(mid))
        } else {
            s * s * death_weight
        };
        total += (w[1] - w[0]) * term;
    }
    total / (f.y_max() * f.n() as f64)
}

/// Kaplan-Meier curve of the members of a leaf.
pub fn leaf_curve(f: &Fixture, members: &[usize]) -> Step {
    let times: Vec<f64> = members.iter().map(|&i| f.times[i]).collect();
    let events: Vec<bool> = members.iter().map(|&i| f.events[i]).collect();
    kaplan_meier(&times, &events)
}

pub fn leaf_loss(f: &Fixture, members: &[usize]) -> f64 {
    let curve = leaf_curve(f, members);
    members.iter().map(|&i| sample_loss(f, &curve, i)).sum()
}

/// Tree as produced by the brute-force search.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleTree {
    Leaf(Vec<usize>),
    Split(usize, Box<OracleTree>, Box<OracleTree>),
}

impl OracleTree {
    pub fn leaves(&self) -> Vec<&[usize]> {
        match self {
            OracleTree::Leaf(m) => vec![m.as_slice()],
            OracleTree::Split(_, l, r) => {
                let mut out = l.leaves();
                out.extend(r.leaves());
                out
            }
        }
    }

    /// Per-sample loss, indexed by sample.
    pub fn sample_losses(&self, f: &Fixture) -> Vec<f64> {
        let mut out = vec![0.0; f.n()];
        for members in self.leaves() {
            let curve = leaf_curve(f, members);
            for &i in members {
                out[i] = sample_loss(f, &curve, i);
            }
        }
        out
    }
}

/// Exhaustive minimum of loss + lambda * leaves over trees of depth at most
/// `depth` whose leaves hold at least `min_leaf` samples.
pub fn brute_force(f: &Fixture, lambda: f64, depth: usize, min_leaf: usize) -> (f64, OracleTree) {
    let mut memo = HashMap::new();
    let all: Vec<usize> = (0..f.n()).collect();
    let leaf_losses = LeafCache::default();
    best(f, &all, depth, lambda, min_leaf, &mut memo, &leaf_losses)
}

#[derive(Default)]
struct LeafCache(std::cell::RefCell<HashMap<Vec<usize>, f64>>);

impl LeafCache {
    fn get(&self, f: &Fixture, members: &[usize]) -> f64 {
        if let Some(&v) = self.0.borrow().get(members) {
            return v;
        }
        let v = leaf_loss(f, members);
        self.0.borrow_mut().insert(members.to_vec(), v);
        v
    }
}

type Memo = HashMap<(Vec<usize>, usize), (f64, OracleTree)>;

fn best(f: &Fixture, members: &[usize], depth: usize, lambda: f64, min_leaf: usize, memo: &mut Memo, leaves: &LeafCache) -> (f64, OracleTree) {
    if let Some(hit) = memo.get(&(members.to_vec(), depth)) {
        return hit.clone();
    }
    let mut result = (leaves.get(f, members) + lambda, OracleTree::Leaf(members.to_vec()));
    if depth > 0 {
        for j in 0..f.m() {
            let (right, left): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| f.rows[i][j]);
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let (lo, lt) = best(f, &left, depth - 1, lambda, min_leaf, memo, leaves);
            let (ro, rt) = best(f, &right, depth - 1, lambda, min_leaf, memo, leaves);
            if lo + ro < result.0 {
                result = (lo + ro, OracleTree::Split(j, Box::new(lt), Box::new(rt)));
            }
        }
    }
    memo.insert((members.to_vec(), depth), result.clone());
    result
}

fn tie_score(a: f64, b: f64) -> f64 {
    if a < b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

/// Harrell's (unit weights) or Uno's (`G(y_i-)^-2`) index by enumerating pairs.
pub fn concordance_pairs(f: &Fixture, curves: &[&Step], uno: bool) -> Option<f64> {
    let g = censoring_curve(&f.times, &f.events);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..f.n() {
        if !f.events[i] {
            continue;
        }
        let w = if uno {
            let gi = g.before(f.times[i]);
            if gi <= 0.0 {
                continue;
            }
            1.0 / (gi * gi)
        } else {
            1.0
        };
        for j in 0..f.n() {
            if f.times[i] < f.times[j] {
                let t = f.times[i];
                num += w * tie_score(curves[i].at(t), curves[j].at(t));
                den += w;
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Cumulative-dynamic AUC at `t` as a literal double sum, with ties scored one half.
pub fn auc_double_sum(f: &Fixture, curves: &[&Step], t: f64) -> Option<f64> {
    let g = censoring_curve(&f.times, &f.events);
    let (mut num, mut cases, mut controls) = (0.0, 0.0, 0.0);
    for i in 0..f.n() {
        let w = if f.events[i] && f.times[i] <= t { inverse(g.before(f.times[i])) } else { 0.0 };
        cases += w;
        for j in 0..f.n() {
            if f.times[j] > t {
                num += w * tie_score(curves[i].at(t), curves[j].at(t));
            }
        }
    }
    for j in 0..f.n() {
        if f.times[j] > t {
            controls += 1.0;
        }
    }
    (cases > 0.0 && controls > 0.0).then(|| num / (cases * controls))
}

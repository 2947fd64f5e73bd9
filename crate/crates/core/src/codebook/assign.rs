use rand::seq::SliceRandom;

use super::{Codebook, DistortionModel, IndexAssignment, Priors};
use crate::error::Result;
use crate::types::Seed;

/// Random restarts tried after the identity descent.
pub const DEFAULT_EFFORT: usize = 64;

/// Restarts are only attempted up to this codebook size.
const RESTART_LIMIT: usize = 256;

/// Finds a codeword assignment with low expected channel distortion.
///
/// Starts from the identity, runs steepest-descent pairwise swaps to a local
/// optimum, then (for `k <= 256`) repeats from `effort` random permutations
/// and keeps the best. A candidate replaces the incumbent only when it is
/// strictly better, so ties resolve to the identity.
pub fn assign_indices(
    cb: &Codebook,
    p_e: f64,
    priors: &Priors,
    seed: Seed,
    effort: usize,
) -> Result<IndexAssignment> {
    let model = DistortionModel::new(cb, p_e, priors)?;
    let bits = cb.bits();
    if p_e == 0.0 {
        return Ok(IndexAssignment::identity(bits));
    }

    let k = model.k();
    let mut best: Vec<u32> = (0..k as u32).collect();
    let mut best_cost = descend(&model, &mut best);

    if k <= RESTART_LIMIT {
        for r in 0..effort {
            let mut codes: Vec<u32> = (0..k as u32).collect();
            codes.shuffle(&mut seed.child(r as u64).rng());
            let cost = descend(&model, &mut codes);
            if improves(cost, best_cost) {
                best = codes;
                best_cost = cost;
            }
        }
    }
    IndexAssignment::new(bits, best)
}

fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-13 * incumbent.abs()
}

/// Steepest-descent pairwise swaps. Pair deltas are kept in a table and
/// shifted in O(1) after each swap, except for pairs touching the swapped
/// centroids which are recomputed; a pass costs O(k^2).
fn descend(model: &DistortionModel, codes: &mut [u32]) -> f64 {
    let k = codes.len();
    let mut cost = model.total(codes);
    let mut delta = vec![0.0; k * k];
    for x in 0..k {
        for y in x + 1..k {
            delta[x * k + y] = model.pair_delta(codes, x, y);
        }
    }
    loop {
        let mut best = (0.0, 0, 0);
        for x in 0..k {
            for y in x + 1..k {
                if delta[x * k + y] < best.0 {
                    best = (delta[x * k + y], x, y);
                }
            }
        }
        let (_, r, s) = best;
        if r == s {
            return cost;
        }
        codes.swap(r, s);
        let next = model.total(codes);
        if !improves(next, cost) {
            codes.swap(r, s);
            return cost;
        }
        cost = next;
        codes.swap(r, s);
        for u in (0..k).filter(|&u| u != r && u != s) {
            for v in (u + 1..k).filter(|&v| v != r && v != s) {
                delta[u * k + v] += model.delta_shift(codes, r, s, u, v);
            }
        }
        codes.swap(r, s);
        for z in [r, s] {
            for m in (0..k).filter(|&m| m != z) {
                let (x, y) = (m.min(z), m.max(z));
                delta[x * k + y] = model.pair_delta(codes, x, y);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::expected_distortion;

    fn line(points: &[f64]) -> Codebook {
        Codebook::new(1, points.iter().map(|&p| vec![p]).collect()).unwrap()
    }

    fn permutations(k: usize) -> Vec<Vec<u32>> {
        fn rec(prefix: &mut Vec<u32>, left: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if left.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for i in 0..left.len() {
                let v = left.remove(i);
                prefix.push(v);
                rec(prefix, left, out);
                prefix.pop();
                left.insert(i, v);
            }
        }
        let mut out = vec![];
        rec(&mut vec![], &mut (0..k as u32).collect(), &mut out);
        out
    }

    /// Direct evaluation of the distortion sum with bit-level flip counts.
    fn oracle(cb: &Codebook, codes: &[u32], p: f64, priors: &[f64]) -> f64 {
        let b = cb.bits();
        let mut total = 0.0;
        for i in 0..cb.len() {
            for j in 0..cb.len() {
                let h = (0..b).filter(|s| (codes[i] >> s) & 1 != (codes[j] >> s) & 1).count();
                let prob = p.powi(h as i32) * (1.0 - p).powi((b as usize - h) as i32);
                let dist: f64 = cb
                    .centroid(i)
                    .iter()
                    .zip(cb.centroid(j))
                    .map(|(a, c)| (a - c).powi(2))
                    .sum();
                total += priors[i] * prob * dist;
            }
        }
        total
    }

    #[test]
    fn four_uniform_levels_prefer_natural_binary() {
        // Under squared error, natural binary order beats Gray order for
        // equally spaced levels: 0.25 vs 0.295 at p = 0.05.
        let cb = line(&[0.0, 1.0, 2.0, 3.0]);
        let priors = Priors::uniform(4);
        let p = 0.05;
        let min = permutations(4)
            .iter()
            .map(|c| oracle(&cb, c, p, priors.values()))
            .fold(f64::INFINITY, f64::min);
        let natural = oracle(&cb, &[0b00, 0b01, 0b10, 0b11], p, priors.values());
        let gray = oracle(&cb, &[0b00, 0b01, 0b11, 0b10], p, priors.values());
        assert!((natural - min).abs() < 1e-15);
        assert!((natural - 0.25).abs() < 1e-12);
        assert!((gray - 0.295).abs() < 1e-12);

        let asg = assign_indices(&cb, p, &priors, Seed(1), DEFAULT_EFFORT).unwrap();
        let got = expected_distortion(&cb, &asg, p, &priors).unwrap();
        assert!((got - min).abs() < 1e-12);
    }

    #[test]
    fn two_levels_keep_identity() {
        let cb = line(&[0.0, 1.0]);
        let asg = assign_indices(&cb, 0.2, &Priors::uniform(2), Seed(4), 16).unwrap();
        assert_eq!(asg, IndexAssignment::identity(1));
    }

    #[test]
    fn noiseless_channel_keeps_identity() {
        let cb = line(&[3.0, 1.0, 2.0, 0.0]);
        let asg = assign_indices(&cb, 0.0, &Priors::uniform(4), Seed(4), 16).unwrap();
        assert_eq!(asg, IndexAssignment::identity(2));
    }

    #[test]
    fn matches_exhaustive_search_for_eight() {
        let mut rng = Seed(21).rng();
        use rand::Rng;
        let perms = permutations(8);
        for trial in 0..5 {
            let pts: Vec<Vec<f64>> = (0..8)
                .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            let cb = Codebook::new(2, pts).unwrap();
            let priors = Priors::uniform(8);
            let p = 0.08;
            let min = perms
                .iter()
                .map(|c| oracle(&cb, c, p, priors.values()))
                .fold(f64::INFINITY, f64::min);
            let asg = assign_indices(&cb, p, &priors, Seed(trial), DEFAULT_EFFORT).unwrap();
            let got = expected_distortion(&cb, &asg, p, &priors).unwrap();
            assert!((got - min).abs() < 1e-12, "trial {trial}: {got} vs {min}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cb = line(&[0.0, 0.3, 1.0, 1.7, 2.0, 4.0, 4.5, 9.0]);
        let priors = Priors::uniform(8);
        let a = assign_indices(&cb, 0.1, &priors, Seed(8), 8).unwrap();
        let b = assign_indices(&cb, 0.1, &priors, Seed(8), 8).unwrap();
        assert_eq!(a, b);
    }
}

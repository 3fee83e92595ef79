//! Cross-checks the search loop against a from-scratch reimplementation on a
//! three-point line. The reference below re-derives every algorithmic
//! decision (posterior, slope bounds, safe-set expansion, candidate sets,
//! selection) directly from the formulas with explicit matrix inverses and no
//! shared search code, so a disagreement in the chosen-point sequence flags a
//! logic bug rather than a numerical one.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use safeslope::kernel::{KernelFamily, KernelSpec};
use safeslope::search::{
    run_search, Algorithm, RunOptions, SearchMode, SearchModel, SearchSetup,
};
use safeslope::GridDomain;

const NOISE: f64 = 1e-4;
const SEED: u64 = 424242;
const LIMIT: f64 = 0.0;
const DELTA: f64 = 0.1;
const BUDGET: u64 = 6;

/// Matern-5/2 with unit variance and lengthscale, evaluated at distance `d`.
fn matern52(d: f64) -> f64 {
    let s = 5.0_f64.sqrt() * d.abs();
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

struct Reference {
    points: [f64; 3],
    f: [f64; 3],
    rng: ChaCha8Rng,
    obs: Vec<(usize, f64)>,
    safe: [bool; 3],
}

impl Reference {
    fn new(points: [f64; 3], f: [f64; 3], seed_safe: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let z: f64 = StandardNormal.sample(&mut rng);
        let obs = vec![(seed_safe, f[seed_safe] + NOISE.sqrt() * z)];
        let mut safe = [false; 3];
        safe[seed_safe] = true;
        Self { points, f, rng, obs, safe }
    }

    /// Posterior mean and covariance over the three grid points via an
    /// explicit inverse of the observation Gram matrix.
    fn posterior(&self) -> (DVector<f64>, DMatrix<f64>) {
        let t = self.obs.len();
        let mut gram = DMatrix::zeros(t, t);
        for a in 0..t {
            for b in 0..t {
                gram[(a, b)] =
                    matern52(self.points[self.obs[a].0] - self.points[self.obs[b].0]);
            }
            gram[(a, a)] += NOISE;
        }
        let inv = gram.try_inverse().expect("observation Gram matrix is invertible");
        let mut cross = DMatrix::zeros(3, t);
        for i in 0..3 {
            for a in 0..t {
                cross[(i, a)] = matern52(self.points[i] - self.points[self.obs[a].0]);
            }
        }
        let y = DVector::from_iterator(t, self.obs.iter().map(|&(_, v)| v));
        let mean = &cross * &inv * y;
        let prior = DMatrix::from_fn(3, 3, |i, j| matern52(self.points[i] - self.points[j]));
        let cov = prior - &cross * inv * cross.transpose();
        (mean, cov)
    }

    /// One unnested iteration; returns the chosen point.
    fn step(&mut self, t: u64) -> Option<usize> {
        let (mean, cov) = self.posterior();
        let pi_t = (t * t) as f64 * std::f64::consts::PI.powi(2) / 6.0;
        let beta_f = 2.0 * (3.0 * pi_t / DELTA).ln();
        let beta_m = 2.0 * (3.0 * 1.0 * pi_t / DELTA).ln();

        let d = self.points[1] - self.points[0];
        // Slope statistics for edges (0,1) and (1,2).
        let edges = [(0usize, 1usize), (1, 2)];
        let mut q = [0.0_f64; 2];
        for (e, &(lo, hi)) in edges.iter().enumerate() {
            let m = (mean[hi] - mean[lo]) / d;
            let var =
                (cov[(hi, hi)] - 2.0 * cov[(hi, lo)] + cov[(lo, lo)]).max(0.0) / (d * d);
            let half = beta_m.sqrt() * var.sqrt();
            q[e] = (m - half).abs().max((m + half).abs());
        }

        let upper: Vec<f64> =
            (0..3).map(|i| mean[i] + beta_f.sqrt() * cov[(i, i)].max(0.0).sqrt()).collect();
        let lower: Vec<f64> =
            (0..3).map(|i| mean[i] - beta_f.sqrt() * cov[(i, i)].max(0.0).sqrt()).collect();

        // Safe-set expansion from the previous safe set, one ring.
        let previous = self.safe;
        for x in 0..3 {
            if !previous[x] {
                continue;
            }
            for (e, &(lo, hi)) in edges.iter().enumerate() {
                let neighbor = if x == lo {
                    Some(hi)
                } else if x == hi {
                    Some(lo)
                } else {
                    None
                };
                if let Some(nb) = neighbor {
                    if upper[x] + q[e] * d <= LIMIT {
                        self.safe[nb] = true;
                    }
                }
            }
        }

        // Minimizers: lower bound under the least safe upper bound.
        let min_upper = (0..3)
            .filter(|&i| self.safe[i])
            .map(|i| upper[i])
            .fold(f64::INFINITY, f64::min);
        let minimizers: Vec<usize> =
            (0..3).filter(|&i| self.safe[i] && lower[i] <= min_upper).collect();

        // Expanders: could certify an unsafe neighbor using the lower bound.
        let mut expanders = Vec::new();
        for x in 0..3 {
            if !self.safe[x] {
                continue;
            }
            let mut count = 0;
            for (e, &(lo, hi)) in edges.iter().enumerate() {
                let neighbor = if x == lo {
                    Some(hi)
                } else if x == hi {
                    Some(lo)
                } else {
                    None
                };
                if let Some(nb) = neighbor {
                    if !self.safe[nb] && lower[x] + q[e] * d <= LIMIT {
                        count += 1;
                    }
                }
            }
            if count > 0 {
                expanders.push(x);
            }
        }

        let mut best: Option<(usize, f64)> = None;
        for &i in minimizers.iter().chain(&expanders) {
            let w = upper[i] - lower[i];
            match best {
                None => best = Some((i, w)),
                Some((bi, bw)) if w > bw || (w == bw && i < bi) => best = Some((i, w)),
                _ => {}
            }
        }
        let choice = best?.0;
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.obs.push((choice, self.f[choice] + NOISE.sqrt() * z));
        Some(choice)
    }
}

#[test]
fn chosen_point_sequence_matches_reference() {
    let grid = GridDomain::new(3, vec![0.0], vec![1.0]).unwrap();
    let kernel = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap();
    let f = vec![-1.5, -2.0, 0.5];
    let setup = SearchSetup {
        algorithm: Algorithm::SafeSlope,
        mode: SearchMode::Unnested,
        grid: &grid,
        model: SearchModel::SingleFidelity { kernel: &kernel, noise: NOISE },
        true_f: &f,
        true_f_low: None,
        safe_limit: LIMIT,
        delta_f: DELTA,
        delta_m: DELTA,
        initial_safe_set: &[1],
        budget: BUDGET,
        seed: SEED,
        options: RunOptions { log_safe_sets: true, ..RunOptions::default() },
    };
    let record = run_search(&setup).unwrap();
    let produced: Vec<usize> = record.rows.iter().map(|r| r.point).collect();

    let mut reference = Reference::new([0.0, 0.5, 1.0], [-1.5, -2.0, 0.5], 1);
    let mut expected = Vec::new();
    for t in 1..=BUDGET {
        match reference.step(t) {
            Some(x) => expected.push(x),
            None => break,
        }
    }

    assert_eq!(produced, expected, "search and reference disagree on the sample sequence");
    // Final safe sets agree as well.
    let final_safe: Vec<usize> = (0..3).filter(|&i| reference.safe[i]).collect();
    let history = record.safe_set_history.as_ref().unwrap();
    assert_eq!(history.last().unwrap(), &final_safe);
}

//! Weighted Gaussian mixtures over 3-channel color samples.
//!
//! One code path serves two very different users: the graph-cut refinement
//! fits 5-component mixtures per label class from hard pixel assignments,
//! while the box-prior baseline fits a single full-covariance Gaussian by
//! EM and thresholds its density. Covariances are always regularized with
//! `COV_REG_EPS * I` so repeated colors cannot produce singular models.

use nalgebra::{Cholesky, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Covariance ridge, in squared 0-255 color units.
pub const COV_REG_EPS: f64 = 1e-3;

const LOG_2PI: f64 = 1.8378770664093453;

/// One mixture component with cached precision and normalizer.
#[derive(Debug, Clone)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    precision: Matrix3<f64>,
    log_det: f64,
}

impl GmmComponent {
    /// Covariance must already include any regularization; it is rejected
    /// if not symmetric positive-definite.
    pub fn new(weight: f64, mean: Vector3<f64>, covariance: Matrix3<f64>) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidParam(format!("component weight {weight} invalid")));
        }
        let chol = Cholesky::new(covariance)
            .ok_or_else(|| Error::InvalidParam("covariance not positive-definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            weight,
            mean,
            covariance,
            precision: chol.inverse(),
            log_det,
        })
    }

    /// Log of the component's normal density at `x` (weight excluded).
    pub fn log_density(&self, x: [f64; 3]) -> f64 {
        let d = Vector3::new(x[0], x[1], x[2]) - self.mean;
        let maha = (self.precision * d).dot(&d);
        -0.5 * (maha + self.log_det + 3.0 * LOG_2PI)
    }
}

/// A mixture whose weights sum to one.
#[derive(Debug, Clone)]
pub struct GmmModel {
    components: Vec<GmmComponent>,
}

impl GmmModel {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParam("mixture needs at least one component".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Mixture density at `x`.
    pub fn pdf(&self, x: [f64; 3]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Log mixture density, evaluated with log-sum-exp for stability far
    /// from all means.
    pub fn log_pdf(&self, x: [f64; 3]) -> f64 {
        let mut terms = [f64::NEG_INFINITY; 16];
        let mut max = f64::NEG_INFINITY;
        let k = self.components.len();
        let mut heap;
        let terms: &mut [f64] = if k <= 16 {
            &mut terms[..k]
        } else {
            heap = vec![f64::NEG_INFINITY; k];
            &mut heap
        };
        for (i, c) in self.components.iter().enumerate() {
            let t = if c.weight > 0.0 {
                c.weight.ln() + c.log_density(x)
            } else {
                f64::NEG_INFINITY
            };
            terms[i] = t;
            if t > max {
                max = t;
            }
        }
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
        max + sum.ln()
    }

    /// Index of the component with the highest weighted density at `x`;
    /// ties resolve to the lowest index.
    pub fn component_loglik_assign(&self, x: [f64; 3]) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, c) in self.components.iter().enumerate() {
            let v = if c.weight > 0.0 {
                c.weight.ln() + c.log_density(x)
            } else {
                f64::NEG_INFINITY
            };
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        best
    }
}

fn mean_of(samples: &[[f64; 3]], idx: &[usize]) -> Vector3<f64> {
    let mut m = Vector3::zeros();
    for &i in idx {
        m += Vector3::from(samples[i]);
    }
    m / idx.len() as f64
}

fn scatter_of(samples: &[[f64; 3]], idx: &[usize], mean: &Vector3<f64>) -> Matrix3<f64> {
    let mut s = Matrix3::zeros();
    for &i in idx {
        let d = Vector3::from(samples[i]) - mean;
        s += d * d.transpose();
    }
    s / idx.len() as f64
}

/// Single maximization step from hard component assignments: weight =
/// cluster fraction, mean/covariance = cluster moments plus the ridge.
/// Empty components are dropped and the remaining weights renormalized,
/// so the result is always a valid mixture.
pub fn fit_from_assignments(
    samples: &[[f64; 3]],
    assignments: &[usize],
    n_components: usize,
) -> Result<GmmModel> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { samples: 0, components: n_components });
    }
    assert_eq!(samples.len(), assignments.len());
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); n_components];
    for (i, &a) in assignments.iter().enumerate() {
        clusters[a].push(i);
    }
    let mut comps = Vec::new();
    for idx in clusters.iter().filter(|idx| !idx.is_empty()) {
        let mean = mean_of(samples, idx);
        let cov = scatter_of(samples, idx, &mean) + Matrix3::identity() * COV_REG_EPS;
        comps.push(GmmComponent::new(idx.len() as f64 / samples.len() as f64, mean, cov)?);
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= total;
    }
    GmmModel::new(comps)
}

fn sq_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// k-means++ seeding followed by a few Lloyd rounds; returns per-sample
/// cluster indices, every cluster non-empty.
fn kmeans_init(samples: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = samples.len();
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(k);
    centers.push(samples[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = samples.iter().map(|&s| sq_dist(s, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass at the centers (duplicate samples): pick
            // deterministically by index.
            rng.random_range(0..n)
        } else {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                t -= d;
                if t <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.push(samples[next]);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(samples[i], samples[next]));
        }
    }

    let mut assign = vec![0usize; n];
    for _round in 0..10 {
        let mut changed = false;
        for (i, &s) in samples.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, &center) in centers.iter().enumerate() {
                let d = sq_dist(s, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        // Re-pull empty clusters to the point farthest from its center.
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(samples[a], centers[assign[a]])
                            .total_cmp(&sq_dist(samples[b], centers[assign[b]]))
                    })
                    .unwrap();
                counts[assign[far]] -= 1;
                assign[far] = c;
                counts[c] = 1;
                centers[c] = samples[far];
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![Vector3::<f64>::zeros(); k];
        for (i, &a) in assign.iter().enumerate() {
            sums[a] += Vector3::from(samples[i]);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let m = sums[c] / counts[c] as f64;
                centers[c] = [m.x, m.y, m.z];
            }
        }
    }
    assign
}

/// EM fit with seeded k-means++ initialization.
///
/// Stops when the data log-likelihood improves by less than `tol` or after
/// `max_iters` expectation-maximization rounds. A round that evaluates
/// worse than its predecessor (possible at rounding scale once converged,
/// because of the covariance ridge) is discarded in favor of the previous
/// model. Components that lose all responsibility mass are re-seeded at
/// the sample the model currently explains worst.
pub fn fit_em(
    samples: &[[f64; 3]],
    n_components: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<GmmModel> {
    fit_em_traced(samples, n_components, max_iters, tol, seed).map(|(m, _)| m)
}

/// Same as [`fit_em`], additionally returning the total log-likelihood
/// after each EM round (in order), which lets callers assert monotone
/// convergence.
pub fn fit_em_traced(
    samples: &[[f64; 3]],
    n_components: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<(GmmModel, Vec<f64>)> {
    if n_components == 0 {
        return Err(Error::InvalidParam("n_components must be >= 1".into()));
    }
    if samples.len() < n_components {
        return Err(Error::TooFewSamples { samples: samples.len(), components: n_components });
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assign = kmeans_init(samples, n_components, &mut rng);
    let mut model = fit_from_assignments(samples, &assign, n_components)?;

    let global_mean = mean_of(samples, &(0..n).collect::<Vec<_>>());
    let global_cov = scatter_of(samples, &(0..n).collect::<Vec<_>>(), &global_mean)
        + Matrix3::identity() * COV_REG_EPS;

    let mut trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut prev_model = model.clone();
    let mut resp = vec![0.0f64; n * n_components];
    // Whether the most recent M step re-seeded a dead component; convergence
    // is not declared on such a round so the fresh component gets a chance.
    let mut reseeded = false;
    for _iter in 0..max_iters {
        let k = model.components.len();
        // E step in the log domain.
        let mut ll = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let mut max = f64::NEG_INFINITY;
            for (c, comp) in model.components.iter().enumerate() {
                let t = comp.weight.ln() + comp.log_density(x);
                resp[i * n_components + c] = t;
                if t > max {
                    max = t;
                }
            }
            let mut sum = 0.0;
            for c in 0..k {
                sum += (resp[i * n_components + c] - max).exp();
            }
            let log_norm = max + sum.ln();
            ll += log_norm;
            for c in 0..k {
                resp[i * n_components + c] = (resp[i * n_components + c] - log_norm).exp();
            }
        }
        if ll < prev_ll {
            // The covariance ridge keeps the M step from being the exact
            // likelihood maximizer, so once converged the likelihood can
            // jitter downward at rounding scale. Reject the degraded
            // update and return the better previous model.
            model = prev_model;
            break;
        }
        let converged = !reseeded && prev_ll != f64::NEG_INFINITY && ll - prev_ll < tol;
        trace.push(ll);
        prev_ll = ll;
        prev_model = model.clone();
        if converged {
            break;
        }

        // M step.
        let mut comps = Vec::with_capacity(k);
        reseeded = false;
        for c in 0..k {
            let mass: f64 = (0..n).map(|i| resp[i * n_components + c]).sum();
            if mass < 1e-10 {
                // Re-seed at the worst-explained sample.
                let worst = (0..n)
                    .min_by(|&a, &b| model.log_pdf(samples[a]).total_cmp(&model.log_pdf(samples[b])))
                    .unwrap();
                comps.push(GmmComponent::new(
                    1.0 / n as f64,
                    Vector3::from(samples[worst]),
                    global_cov,
                )?);
                reseeded = true;
                continue;
            }
            let mut mean = Vector3::zeros();
            for i in 0..n {
                mean += Vector3::from(samples[i]) * resp[i * n_components + c];
            }
            mean /= mass;
            let mut cov = Matrix3::zeros();
            for i in 0..n {
                let d = Vector3::from(samples[i]) - mean;
                cov += d * d.transpose() * resp[i * n_components + c];
            }
            cov = cov / mass + Matrix3::identity() * COV_REG_EPS;
            comps.push(GmmComponent::new(mass / n as f64, mean, cov)?);
        }
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in comps.iter_mut() {
            c.weight /= total;
        }
        model = GmmModel::new(comps)?;
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn single(mean: [f64; 3], cov: Matrix3<f64>) -> GmmModel {
        GmmModel::new(vec![GmmComponent::new(1.0, Vector3::from(mean), cov).unwrap()]).unwrap()
    }

    #[test]
    fn single_gaussian_closed_form() {
        let samples = [[10.0, 20.0, 30.0], [14.0, 16.0, 30.0], [12.0, 18.0, 36.0], [8.0, 22.0, 24.0]];
        let model = fit_em(&samples, 1, 50, 1e-9, 0).unwrap();
        let c = &model.components()[0];
        // Closed-form MLE: sample mean and biased covariance plus the ridge.
        assert_relative_eq!(c.mean.x, 11.0, epsilon = 1e-9);
        assert_relative_eq!(c.mean.y, 19.0, epsilon = 1e-9);
        assert_relative_eq!(c.mean.z, 30.0, epsilon = 1e-9);
        let mean = Vector3::new(11.0, 19.0, 30.0);
        let mut want = Matrix3::zeros();
        for s in &samples {
            let d = Vector3::from(*s) - mean;
            want += d * d.transpose();
        }
        want = want / 4.0 + Matrix3::identity() * COV_REG_EPS;
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(c.covariance[(i, j)], want[(i, j)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn identical_samples_covariance_is_ridge() {
        let samples = [[5.0, 5.0, 5.0]; 8];
        let model = fit_em(&samples, 1, 50, 1e-9, 3).unwrap();
        let c = &model.components()[0];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { COV_REG_EPS } else { 0.0 };
                assert_abs_diff_eq!(c.covariance[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn two_clusters_recovered() {
        let mut samples = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            samples.push([
                20.0 + rng.random::<f64>(),
                30.0 + rng.random::<f64>(),
                40.0 + rng.random::<f64>(),
            ]);
        }
        for _ in 0..60 {
            samples.push([
                200.0 + rng.random::<f64>(),
                210.0 + rng.random::<f64>(),
                220.0 + rng.random::<f64>(),
            ]);
        }
        let model = fit_em(&samples, 2, 100, 1e-9, 1).unwrap();
        let mut means: Vec<_> = model.components().iter().map(|c| c.mean).collect();
        means.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert!((means[0] - Vector3::new(20.5, 30.5, 40.5)).norm() < 1.0);
        assert!((means[1] - Vector3::new(200.5, 210.5, 220.5)).norm() < 1.0);
    }

    #[test]
    fn errors_on_too_few_samples() {
        assert!(matches!(
            fit_em(&[[1.0, 2.0, 3.0]], 2, 10, 1e-6, 0),
            Err(Error::TooFewSamples { samples: 1, components: 2 })
        ));
        assert!(fit_em(&[], 1, 10, 1e-6, 0).is_err());
    }

    #[test]
    fn pdf_at_mean_unit_covariance() {
        let model = single([7.0, 7.0, 7.0], Matrix3::identity());
        let want = (2.0 * std::f64::consts::PI).powf(-1.5);
        assert_relative_eq!(model.pdf([7.0, 7.0, 7.0]), want, epsilon = 1e-12);
        assert_relative_eq!(want, 0.06349, epsilon = 1e-5);
    }

    #[test]
    fn pdf_far_tail_below_threshold() {
        let model = single([0.0, 0.0, 0.0], Matrix3::identity());
        // Mahalanobis 45 > 40.
        assert!(model.pdf([45.0, 0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn coincident_components_match_single() {
        let c = |w| GmmComponent::new(w, Vector3::new(9.0, 9.0, 9.0), Matrix3::identity()).unwrap();
        let two = GmmModel::new(vec![c(0.5), c(0.5)]).unwrap();
        let one = single([9.0, 9.0, 9.0], Matrix3::identity());
        assert_relative_eq!(two.pdf([9.0, 9.0, 9.0]), one.pdf([9.0, 9.0, 9.0]), epsilon = 1e-15);
    }

    #[test]
    fn assign_single_component_is_zero() {
        let model = single([0.0, 0.0, 0.0], Matrix3::identity());
        assert_eq!(model.component_loglik_assign([100.0, -5.0, 3.0]), 0);
    }

    #[test]
    fn assign_prefers_nearest_mean() {
        let model = GmmModel::new(vec![
            GmmComponent::new(0.5, Vector3::new(0.0, 0.0, 0.0), Matrix3::identity()).unwrap(),
            GmmComponent::new(0.5, Vector3::new(100.0, 0.0, 0.0), Matrix3::identity()).unwrap(),
        ])
        .unwrap();
        assert_eq!(model.component_loglik_assign([0.0, 0.0, 0.0]), 0);
        assert_eq!(model.component_loglik_assign([100.0, 0.0, 0.0]), 1);
    }

    #[test]
    fn assign_tie_breaks_low_index() {
        let c = || GmmComponent::new(0.5, Vector3::zeros(), Matrix3::identity()).unwrap();
        let model = GmmModel::new(vec![c(), c()]).unwrap();
        assert_eq!(model.component_loglik_assign([1.0, 2.0, 3.0]), 0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let c = GmmComponent::new(0.7, Vector3::zeros(), Matrix3::identity()).unwrap();
        assert!(GmmModel::new(vec![c]).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let model = single([0.0, 0.0, 0.0], Matrix3::identity());
        let step = 0.25;
        let lim = 5.0;
        let mut total = 0.0;
        let cells = (2.0 * lim / step) as i64;
        for i in 0..cells {
            for j in 0..cells {
                for l in 0..cells {
                    let x = -lim + (i as f64 + 0.5) * step;
                    let y = -lim + (j as f64 + 0.5) * step;
                    let z = -lim + (l as f64 + 0.5) * step;
                    total += model.pdf([x, y, z]) * step * step * step;
                }
            }
        }
        assert!((total - 1.0).abs() < 0.02, "integral {total}");
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<[f64; 3]> = (0..120)
            .map(|_| [rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0])
            .collect();
        let (a, ta) = fit_em_traced(&samples, 3, 40, 1e-9, 42).unwrap();
        let (b, tb) = fit_em_traced(&samples, 3, 40, 1e-9, 42).unwrap();
        assert_eq!(ta, tb);
        for (ca, cb) in a.components().iter().zip(b.components()) {
            assert_eq!(ca.weight, cb.weight);
            assert_eq!(ca.mean, cb.mean);
            assert_eq!(ca.covariance, cb.covariance);
        }
    }

    #[test]
    fn fit_from_assignments_drops_empty() {
        let samples = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [100.0, 0.0, 0.0]];
        let model = fit_from_assignments(&samples, &[0, 0, 2], 3).unwrap();
        assert_eq!(model.components().len(), 2);
        let total: f64 = model.components().iter().map(|c| c.weight).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn em_loglik_nondecreasing(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(30..150usize);
            let kc = rng.random_range(1..5usize);
            let samples: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.random::<f64>() * 255.0,
                        rng.random::<f64>() * 255.0,
                        rng.random::<f64>() * 255.0,
                    ]
                })
                .collect();
            let (_, trace) = fit_em_traced(&samples, kc, 30, 0.0, seed).unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "loglik fell: {} -> {}", w[0], w[1]);
            }
        }

        #[test]
        fn assign_matches_enumeration(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kc = rng.random_range(1..6usize);
            let mut comps = Vec::new();
            let raw: Vec<f64> = (0..kc).map(|_| rng.random::<f64>() + 0.1).collect();
            let total: f64 = raw.iter().sum();
            for w in &raw {
                let mean = Vector3::new(
                    rng.random::<f64>() * 255.0,
                    rng.random::<f64>() * 255.0,
                    rng.random::<f64>() * 255.0,
                );
                let s = rng.random::<f64>() * 30.0 + 1.0;
                comps.push(GmmComponent::new(w / total, mean, Matrix3::identity() * s).unwrap());
            }
            let model = GmmModel::new(comps).unwrap();
            let x = [
                rng.random::<f64>() * 255.0,
                rng.random::<f64>() * 255.0,
                rng.random::<f64>() * 255.0,
            ];
            let got = model.component_loglik_assign(x);
            let want = (0..kc)
                .map(|c| {
                    let comp = &model.components()[c];
                    (c, comp.weight.ln() + comp.log_density(x))
                })
                .fold((0usize, f64::NEG_INFINITY), |acc, (c, v)| if v > acc.1 { (c, v) } else { acc })
                .0;
            prop_assert_eq!(got, want);
        }

        #[test]
        fn pdf_nonnegative(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = single(
                [rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0],
                Matrix3::identity() * (rng.random::<f64>() * 50.0 + 0.5),
            );
            for _ in 0..20 {
                let x = [
                    rng.random::<f64>() * 400.0 - 70.0,
                    rng.random::<f64>() * 400.0 - 70.0,
                    rng.random::<f64>() * 400.0 - 70.0,
                ];
                prop_assert!(model.pdf(x) >= 0.0);
            }
        }
    }
}

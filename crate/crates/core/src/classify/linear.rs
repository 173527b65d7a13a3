//! Linear max-margin classifier: standardized inputs, hinge loss with L2
//! regularization solved by dual coordinate descent, and a sigmoid fitted on
//! the training decision values to turn margins into probabilities.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    /// Penalty on hinge violations; the L2 term has weight 1/2, so larger
    /// values mean weaker regularization.
    pub c: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    /// Multiplies `c` for positive examples.
    pub positive_weight: f64,
    pub seed: u64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            c: 1.0,
            max_epochs: 1000,
            tolerance: 1e-4,
            positive_weight: 1.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// `P(match | f) = 1 / (1 + exp(a * f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    pub fn probability(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// Platt's method with the regularized targets and the Newton iteration
    /// with backtracking of Lin, Lin and Weng.
    pub fn fit(decisions: &[f64], labels: &[bool]) -> Sigmoid {
        let pos = labels.iter().filter(|&&l| l).count() as f64;
        let neg = labels.len() as f64 - pos;
        let hi = (pos + 1.0) / (pos + 2.0);
        let lo = 1.0 / (neg + 2.0);
        let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

        let (min_step, sigma) = (1e-10, 1e-12);
        let mut a = 0.0;
        let mut b = ((neg + 1.0) / (pos + 1.0)).ln();
        let objective = |a: f64, b: f64| -> f64 {
            decisions
                .iter()
                .zip(&t)
                .map(|(f, ti)| {
                    let z = f * a + b;
                    if z >= 0.0 {
                        ti * z + (1.0 + (-z).exp()).ln()
                    } else {
                        (ti - 1.0) * z + (1.0 + z.exp()).ln()
                    }
                })
                .sum()
        };
        let mut fval = objective(a, b);
        for _ in 0..100 {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (f, ti) in decisions.iter().zip(&t) {
                let z = f * a + b;
                let (p, q) = if z >= 0.0 {
                    let e = (-z).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = z.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += f * f * d2;
                h22 += d2;
                h21 += f * d2;
                let d1 = ti - p;
                g1 += f * d1;
                g2 += d1;
            }
            if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            while step >= min_step {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if step < min_step {
                break;
            }
        }
        Sigmoid { a, b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub sigmoid: Sigmoid,
    pub epochs: usize,
}

impl LinearModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        let x = self.standardizer.apply(row);
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        self.sigmoid.probability(self.decision(row))
    }

    pub fn train(rows: &[Vec<f64>], labels: &[bool], params: &LinearParams) -> LinearModel {
        let standardizer = Standardizer::fit(rows);
        // bias handled as a constant extra input
        let xs: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut x = standardizer.apply(r);
                x.push(1.0);
                x
            })
            .collect();
        let d = xs.first().map_or(1, Vec::len);
        let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let upper: Vec<f64> = labels
            .iter()
            .map(|&l| if l { params.c * params.positive_weight } else { params.c })
            .collect();
        let qii: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();

        let mut alpha = vec![0.0; xs.len()];
        let mut w = vec![0.0; d];
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut epochs = 0;
        while epochs < params.max_epochs {
            epochs += 1;
            order.shuffle(&mut rng);
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &i in &order {
                if qii[i] <= 0.0 {
                    continue;
                }
                let x = &xs[i];
                let g = ys[i] * x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - 1.0;
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == upper[i] {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 {
                    let old = alpha[i];
                    alpha[i] = (old - g / qii[i]).clamp(0.0, upper[i]);
                    let delta = (alpha[i] - old) * ys[i];
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj += delta * xj;
                    }
                }
            }
            if pg_max - pg_min < params.tolerance {
                break;
            }
        }

        let bias = w.pop().unwrap_or(0.0);
        let mut model = LinearModel {
            standardizer,
            weights: w,
            bias,
            sigmoid: Sigmoid { a: -1.0, b: 0.0 },
            epochs,
        };
        let decisions: Vec<f64> = rows.iter().map(|r| model.decision(r)).collect();
        model.sigmoid = Sigmoid::fit(&decisions, labels);
        model
    }
}

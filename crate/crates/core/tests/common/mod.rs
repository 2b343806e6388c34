//! Independent reference implementations used as test oracles. Apart from the
//! gradient-check fixture at the end, which drives the library's layer against
//! finite differences, none of these call into the library's kernels,
//! goodness, mining or training code; they only share the seeded generator so
//! random draws line up.
#![allow(dead_code)]
// written as plain loops on purpose
#![allow(
    clippy::needless_range_loop,
    clippy::manual_range_contains,
    clippy::manual_div_ceil,
    clippy::unnecessary_map_or
)]

use amga::engine::FFLayer;
use amga::goodness::{GoodnessKind, LayerGoodness};
use amga::numerics::{
    finite_diff_grad, relative_error, seeded_rng, stream_rng, Matrix, Real, RngStream, SeededRng,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Row-major triple-loop product.
pub fn triple_loop_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for t in 0..k {
                acc += a[i * k + t] * b[t * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// Multi-scale goodness written out scalar by scalar for a `(b, d)` batch at
/// layer `l` of `num_layers`.
pub fn scalar_goodness(h: &[f64], b: usize, d: usize, l: usize, num_layers: usize) -> Vec<f64> {
    let depth = if num_layers > 1 {
        l as f64 / (num_layers - 1) as f64
    } else {
        0.0
    };
    let w_local = 0.4 - 0.15 * depth;
    let w_inter = 0.35;
    let w_global = 0.25 + 0.15 * depth;

    let mut global = 0.0;
    for i in 0..b {
        for j in 0..d {
            global += h[i * d + j] * h[i * d + j];
        }
    }
    global /= (b * d) as f64;

    let k = std::cmp::min(8, d / 10);
    (0..b)
        .map(|i| {
            let row = &h[i * d..(i + 1) * d];
            let mut local = 0.0;
            for &x in row {
                local += x * x;
            }
            local /= d as f64;
            let inter = if k < 1 {
                local
            } else {
                // k groups, the first d % k of them one longer
                let mut acc = 0.0;
                let mut start = 0;
                for g in 0..k {
                    let size = d / k + if g < d % k { 1 } else { 0 };
                    let mut s = 0.0;
                    for &x in &row[start..start + size] {
                        s += x * x;
                    }
                    acc += s / size as f64;
                    start += size;
                }
                acc / k as f64
            };
            w_local * local + w_inter * inter + w_global * global
        })
        .collect()
}

/// Mining written per index from the stage definitions. Returns the selected
/// indices (ascending) and whether the fill guarantee fired.
pub fn brute_force_mining(g: &[f64], p: f64, theta: f64, seed: u64) -> (Vec<usize>, bool) {
    let n = g.len();
    let radius = if p < 0.3 {
        0.3 + 0.2 * p / 0.3
    } else if p < 0.7 {
        0.5 + 0.5 * (p - 0.3) / 0.4
    } else {
        1.0 + 0.5 * (p - 0.7) / 0.3
    };
    let mut rng: SeededRng = amga::numerics::seeded_rng(seed);
    let mut chosen = vec![false; n];
    for i in 0..n {
        let in_band = (g[i] - theta).abs() <= radius;
        let mut hard = false;
        if p >= 0.3 && p < 0.7 && g[i] > theta + 0.5 {
            let u: f64 = rng.random();
            hard = u < 0.4;
        } else if p >= 0.7 && g[i] > theta {
            let u: f64 = rng.random();
            hard = u < 0.5;
        }
        chosen[i] = in_band || hard;
    }
    let need = (6 * n + 9) / 10;
    let mut have = chosen.iter().filter(|&&c| c).count();
    let mut applied = false;
    while have < need {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !chosen[i] && best.map_or(true, |b| g[i] > g[b]) {
                best = Some(i);
            }
        }
        chosen[best.unwrap()] = true;
        have += 1;
        applied = true;
    }
    ((0..n).filter(|&i| chosen[i]).collect(), applied)
}

type R = f64;

/// Plain Forward-Forward written directly with loops: sum-of-squares goodness,
/// every wrong-label candidate is a negative, fixed threshold and learning
/// rate, Adam (0.9, 0.999, 1e-8) after clipping to norm 0.3, rows normalized
/// to unit length between layers. Runs in f64 so that comparisons
/// against it measure the algorithm rather than rounding. Returns per-epoch, per-layer losses.
pub struct PlainFF {
    pub weights: Vec<Vec<R>>,
    pub biases: Vec<Vec<R>>,
    pub widths: Vec<usize>,
    m: Vec<(Vec<R>, Vec<R>)>,
    v: Vec<(Vec<R>, Vec<R>)>,
    t: Vec<i32>,
}

impl PlainFF {
    pub fn new(widths: &[usize], seed: u64) -> Self {
        let mut rng = stream_rng(seed, RngStream::Init);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in widths.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            weights.push(
                (0..w[0] * w[1])
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z * std
                    })
                    .collect::<Vec<R>>(),
            );
            biases.push(vec![0.0; w[1]]);
        }
        let zeros = |v: &Vec<Vec<R>>| v.iter().map(|x| vec![0.0; x.len()]).collect::<Vec<_>>();
        let (zw, zb) = (zeros(&weights), zeros(&biases));
        let m: Vec<_> = zw.iter().cloned().zip(zb.iter().cloned()).collect();
        let v = m.clone();
        Self {
            t: vec![0; weights.len()],
            weights,
            biases,
            widths: widths.to_vec(),
            m,
            v,
        }
    }

    fn forward(&self, l: usize, x: &[R], b: usize) -> Vec<R> {
        let (din, dout) = (self.widths[l], self.widths[l + 1]);
        let w = &self.weights[l];
        let mut h = vec![0.0; b * dout];
        for a in 0..b {
            for o in 0..dout {
                let mut z = self.biases[l][o];
                for i in 0..din {
                    z += x[a * din + i] * w[o * din + i];
                }
                h[a * dout + o] = z.max(0.0);
            }
        }
        h
    }

    fn adam(p: &mut [R], g: &[R], m: &mut [R], v: &mut [R], t: i32, lr: R) {
        let c1 = 1.0 - 0.9f64.powi(t);
        let c2 = 1.0 - 0.999f64.powi(t);
        for i in 0..p.len() {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-8);
        }
    }

    /// One layer update; returns the loss and the pre-update activations.
    fn step(&mut self, l: usize, xp: &[R], xn: &[R], b: usize, theta: R, lr: R) -> (R, Vec<R>, Vec<R>) {
        let (din, dout) = (self.widths[l], self.widths[l + 1]);
        let hp = self.forward(l, xp, b);
        let hn = self.forward(l, xn, b);
        let good = |h: &[R]| -> Vec<R> {
            (0..b)
                .map(|a| h[a * dout..(a + 1) * dout].iter().map(|x| x * x).sum())
                .collect()
        };
        let (gp, gn) = (good(&hp), good(&hn));
        let sp = |x: R| x.max(0.0) + (-x.abs()).exp().ln_1p();
        let sig = |x: R| 1.0 / (1.0 + (-x).exp());
        let loss = gp.iter().map(|&g| sp(theta - g)).sum::<R>() / b as R
            + gn.iter().map(|&g| sp(g - theta)).sum::<R>() / b as R;

        let mut gw = vec![0.0; din * dout];
        let mut gb = vec![0.0; dout];
        for (x, h, g, sign) in [(xp, &hp, &gp, -1.0), (xn, &hn, &gn, 1.0)] {
            for a in 0..b {
                let s = if sign < 0.0 {
                    -sig(theta - g[a])
                } else {
                    sig(g[a] - theta)
                } / b as R;
                for o in 0..dout {
                    let dz = 2.0 * h[a * dout + o] * s;
                    if dz == 0.0 {
                        continue;
                    }
                    gb[o] += dz;
                    for i in 0..din {
                        gw[o * din + i] += dz * x[a * din + i];
                    }
                }
            }
        }
        let norm = (gw.iter().chain(&gb).map(|&x| x * x).sum::<f64>()).sqrt();
        if norm > 0.3 {
            let s = 0.3 / norm;
            gw.iter_mut().chain(gb.iter_mut()).for_each(|x| *x *= s);
        }
        self.t[l] += 1;
        let t = self.t[l];
        let (mw, mb) = &mut self.m[l];
        let (vw, vb) = &mut self.v[l];
        Self::adam(&mut self.weights[l], &gw, mw, vw, t, lr);
        Self::adam(&mut self.biases[l], &gb, mb, vb, t, lr);
        (loss, hp, hn)
    }

    /// Trains `epochs` epochs over `(images, labels)` and returns mean batch
    /// loss per epoch and layer.
    #[allow(clippy::too_many_arguments)]
    pub fn train(
        &mut self,
        images: &[f32],
        labels: &[usize],
        num_classes: usize,
        theta: R,
        lr: R,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> Vec<Vec<f64>> {
        let din = self.widths[0];
        let n = labels.len();
        let layers = self.weights.len();
        let mut shuffle = stream_rng(seed, RngStream::Shuffle);
        let mut label_rng = stream_rng(seed, RngStream::NegativeLabels);
        let mut history = Vec::new();
        for _ in 0..epochs {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut shuffle);
            let mut sums = vec![0.0f64; layers];
            let mut batches = 0;
            for chunk in order.chunks(batch_size) {
                let b = chunk.len();
                let mut xp = Vec::with_capacity(b * din);
                let mut xn = Vec::with_capacity(b * din);
                for &idx in chunk {
                    let img = &images[idx * din..(idx + 1) * din];
                    let y = labels[idx];
                    let k = label_rng.random_range(0..num_classes - 1);
                    let wrong = if k >= y { k + 1 } else { k };
                    for (j, &px) in img.iter().enumerate() {
                        let (pv, nv) = if j < num_classes {
                            (if j == y { 1.0 } else { 0.0 }, if j == wrong { 1.0 } else { 0.0 })
                        } else {
                            (px as R, px as R)
                        };
                        xp.push(pv);
                        xn.push(nv);
                    }
                }
                for l in 0..layers {
                    let (loss, mut hp, mut hn) = self.step(l, &xp, &xn, b, theta, lr);
                    sums[l] += loss;
                    let d = self.widths[l + 1];
                    for h in [&mut hp, &mut hn] {
                        for row in h.chunks_mut(d) {
                            let norm = row.iter().map(|x| x * x).sum::<R>().sqrt();
                            let inv = 1.0 / (norm + 1e-8);
                            row.iter_mut().for_each(|x| *x *= inv);
                        }
                    }
                    xp = hp;
                    xn = hn;
                }
                batches += 1;
            }
            history.push(sums.iter().map(|s| s / batches as f64).collect());
        }
        history
    }
}

/// A seeded synthetic classification task: `n` samples of width `width`
/// (first `classes` positions reserved for the overlay), each class a noisy
/// copy of its own random prototype, pixels in [0, 1].
pub fn synthetic_task(n: usize, width: usize, classes: usize, seed: u64) -> (Vec<f32>, Vec<usize>) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let protos: Vec<Vec<f32>> = (0..classes)
        .map(|_| {
            (0..width)
                .map(|_| if rng.random::<f32>() < 0.3 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut images = Vec::with_capacity(n * width);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % classes;
        for j in 0..width {
            let px = if j < classes {
                0.0
            } else {
                let noise: f32 = rng.random::<f32>() * 0.4;
                (protos[y][j] * 0.8 + noise).min(1.0)
            };
            images.push(px);
        }
        labels.push(y);
    }
    (images, labels)
}

/// Layer shapes `(in, out)` and batch sizes of the gradient-check grid.
pub const SHAPES: [(usize, usize); 3] = [(6, 8), (10, 4), (784, 16)];
pub const BATCHES: [usize; 2] = [1, 4];
pub const F32_EPS: f64 = 1e-2;

pub struct GradCase<T: Real> {
    pub layer: FFLayer<T>,
    pub x_pos: Matrix<T>,
    pub x_neg: Matrix<T>,
    pub theta: T,
    pub goodness: LayerGoodness<T>,
}

pub fn grad_case<T: Real>(
    in_dim: usize,
    out_dim: usize,
    batch: usize,
    kind: GoodnessKind,
    layer_index: usize,
    seed: u64,
) -> GradCase<T> {
    let mut rng = seeded_rng(seed);
    let mut layer = FFLayer::<T>::new(in_dim, out_dim, layer_index, &mut rng).unwrap();
    let bias: Vec<T> = (0..out_dim)
        .map(|_| T::from_f64_lossy(rng.random_range(-0.1..0.3)))
        .collect();
    layer.bias = Matrix::from_vec(1, out_dim, bias).unwrap();
    let mut input = |rows: usize| {
        let data = (0..rows * in_dim)
            .map(|_| T::from_f64_lossy(rng.random_range(0.0..1.0)))
            .collect();
        Matrix::from_vec(rows, in_dim, data).unwrap()
    };
    let x_pos = input(batch);
    let x_neg = input(batch + 1);
    let goodness = LayerGoodness::new(kind, layer_index, 3, out_dim).unwrap();
    // put the threshold near the typical goodness so both softplus branches matter
    let g: Vec<T> = goodness.batch_scores(&layer.forward(&x_pos).unwrap());
    let theta = g.iter().copied().sum::<T>() / T::from_usize(g.len()).unwrap() + T::from_f64_lossy(0.1);
    GradCase {
        layer,
        x_pos,
        x_neg,
        theta,
        goodness,
    }
}

/// Worst of the weight and bias relative errors.
pub fn grad_error<T: Real>(c: &GradCase<T>, eps: f64) -> f64 {
    let (lg, _, _) = c
        .layer
        .loss_and_grad(&c.x_pos, &c.x_neg, None, c.theta, &c.goodness)
        .unwrap();
    let eps = T::from_f64_lossy(eps);
    let mut scratch = c.layer.clone();
    let fd_w = finite_diff_grad(
        |w| {
            scratch.weights.as_mut_slice().copy_from_slice(w.as_slice());
            scratch.loss(&c.x_pos, &c.x_neg, c.theta, &c.goodness).unwrap()
        },
        &c.layer.weights,
        eps,
    );
    let mut scratch = c.layer.clone();
    let fd_b = finite_diff_grad(
        |b| {
            scratch.bias.as_mut_slice().copy_from_slice(b.as_slice());
            scratch.loss(&c.x_pos, &c.x_neg, c.theta, &c.goodness).unwrap()
        },
        &c.layer.bias,
        eps,
    );
    let ew = relative_error(&lg.grads.weights, &fd_w, 1e-12);
    let eb = relative_error(&lg.grads.bias, &fd_b, 1e-12);
    ew.max(eb)
}

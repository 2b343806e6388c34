use crate::error::{Error, Result};
use crate::goodness::LayerGoodness;
use crate::numerics::{adam_step, clip_grad_norm, kaiming_init, AdamState, Matrix, Real, SeededRng};

/// Global-norm bound applied to each layer's gradient before the Adam step.
pub const GRAD_CLIP_NORM: f64 = 0.3;

/// One fully connected ReLU layer trained by its own local objective.
#[derive(Debug, Clone, PartialEq)]
pub struct FFLayer<T: Real = f32> {
    /// Shape `(out_dim, in_dim)`.
    pub weights: Matrix<T>,
    /// Shape `(1, out_dim)`.
    pub bias: Matrix<T>,
    pub adam_w: AdamState<T>,
    pub adam_b: AdamState<T>,
    pub layer_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T: Real = f32> {
    pub weights: Matrix<T>,
    pub bias: Matrix<T>,
}

/// Loss, goodness and gradient of one layer on one positive/negative pair of
/// batches.
#[derive(Debug, Clone)]
pub struct LossAndGrad<T: Real = f32> {
    pub loss: T,
    pub g_pos: Vec<T>,
    pub g_neg: Vec<T>,
    pub grads: LayerGrads<T>,
}

#[derive(Debug, Clone)]
pub struct StepOutput<T: Real = f32> {
    pub loss: T,
    pub mean_g_pos: T,
    pub mean_g_neg: T,
    /// Activations computed before the update, for the next layer.
    pub h_pos: Matrix<T>,
    pub h_neg: Matrix<T>,
}

impl<T: Real> FFLayer<T> {
    pub fn new(in_dim: usize, out_dim: usize, layer_index: usize, rng: &mut SeededRng) -> Result<Self> {
        let weights = kaiming_init(in_dim, out_dim, rng)?;
        Ok(Self::from_params(weights, Matrix::zeros(1, out_dim), layer_index))
    }

    pub fn from_params(weights: Matrix<T>, bias: Matrix<T>, layer_index: usize) -> Self {
        assert_eq!(bias.shape(), (1, weights.rows()), "bias must be 1 x out_dim");
        Self {
            adam_w: AdamState::for_param(&weights),
            adam_b: AdamState::for_param(&bias),
            weights,
            bias,
            layer_index,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// `ReLU(x · Wᵀ + b)`.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut z = x.matmul_transpose_b(&self.weights)?;
        z.add_row_vector(self.bias.as_slice())?;
        z.relu_in_place();
        Ok(z)
    }

    /// Loss only, without the gradient.
    pub fn loss(
        &self,
        x_pos: &Matrix<T>,
        x_neg: &Matrix<T>,
        theta: T,
        goodness: &LayerGoodness<T>,
    ) -> Result<T> {
        let g_pos = goodness.batch_scores(&self.forward(x_pos)?);
        let g_neg = goodness.batch_scores(&self.forward(x_neg)?);
        Ok(ff_loss(&g_pos, &g_neg, theta))
    }

    /// Loss and parameter gradient. `h_neg` may carry activations of `x_neg`
    /// that were already computed with the current parameters.
    pub fn loss_and_grad(
        &self,
        x_pos: &Matrix<T>,
        x_neg: &Matrix<T>,
        h_neg: Option<&Matrix<T>>,
        theta: T,
        goodness: &LayerGoodness<T>,
    ) -> Result<(LossAndGrad<T>, Matrix<T>, Matrix<T>)> {
        let h_pos = self.forward(x_pos)?;
        let h_neg = match h_neg {
            Some(h) => {
                if h.shape() != (x_neg.rows(), self.out_dim()) {
                    return Err(Error::Dimension {
                        op: "precomputed activations",
                        left: h.shape(),
                        right: (x_neg.rows(), self.out_dim()),
                    });
                }
                h.clone()
            }
            None => self.forward(x_neg)?,
        };
        let g_pos = goodness.batch_scores(&h_pos);
        let g_neg = goodness.batch_scores(&h_neg);
        let loss = ff_loss(&g_pos, &g_neg, theta);

        // dL/dg per sample
        let n_pos = T::from_usize(g_pos.len()).unwrap();
        let n_neg = T::from_usize(g_neg.len()).unwrap();
        let s_pos: Vec<T> = g_pos.iter().map(|&g| -sigmoid(theta - g) / n_pos).collect();
        let s_neg: Vec<T> = g_neg.iter().map(|&g| sigmoid(g - theta) / n_neg).collect();

        let dz_pos = goodness_backward(&h_pos, &s_pos, goodness);
        let dz_neg = goodness_backward(&h_neg, &s_neg, goodness);

        let mut dw = dz_pos.transpose_a_matmul(x_pos)?;
        let dw_neg = dz_neg.transpose_a_matmul(x_neg)?;
        for (a, &b) in dw.as_mut_slice().iter_mut().zip(dw_neg.as_slice()) {
            *a = *a + b;
        }
        let mut db = dz_pos.column_sums();
        for (a, b) in db.iter_mut().zip(dz_neg.column_sums()) {
            *a = *a + b;
        }
        let out = self.out_dim();
        let grads = LayerGrads {
            weights: dw,
            bias: Matrix::from_vec(1, out, db)?,
        };
        Ok((
            LossAndGrad {
                loss,
                g_pos,
                g_neg,
                grads,
            },
            h_pos,
            h_neg,
        ))
    }

    /// One local update: forward both batches, take the loss gradient with
    /// respect to this layer only, clip it, and apply Adam.
    pub fn train_step(
        &mut self,
        x_pos: &Matrix<T>,
        x_neg: &Matrix<T>,
        h_neg: Option<&Matrix<T>>,
        theta: T,
        lr: f64,
        goodness: &LayerGoodness<T>,
    ) -> Result<StepOutput<T>> {
        let (lg, h_pos, h_neg) = self.loss_and_grad(x_pos, x_neg, h_neg, theta, goodness)?;
        if !lg.loss.is_finite() {
            return Err(Error::NonFinite {
                epoch: 0,
                layer: self.layer_index,
                detail: format!(
                    "loss {} (theta {theta}, mean g+ {}, mean g- {})",
                    lg.loss,
                    mean(&lg.g_pos),
                    mean(&lg.g_neg)
                ),
            });
        }
        let LayerGrads {
            weights: mut gw,
            bias: mut gb,
        } = lg.grads;
        clip_grad_norm(&mut [&mut gw, &mut gb], GRAD_CLIP_NORM);
        adam_step(&mut self.weights, &gw, &mut self.adam_w, lr)?;
        adam_step(&mut self.bias, &gb, &mut self.adam_b, lr)?;
        if !self.weights.is_finite() || !self.bias.is_finite() {
            return Err(Error::NonFinite {
                epoch: 0,
                layer: self.layer_index,
                detail: "parameters became non-finite after the update".into(),
            });
        }
        Ok(StepOutput {
            loss: lg.loss,
            mean_g_pos: mean(&lg.g_pos),
            mean_g_neg: mean(&lg.g_neg),
            h_pos,
            h_neg,
        })
    }
}

/// `dL/dz` given `dL/dg` per sample. Because `dg/dh ∝ h` and `h = 0` wherever
/// the ReLU is closed, `dL/dh` already equals `dL/dz`.
fn goodness_backward<T: Real>(h: &Matrix<T>, s: &[T], goodness: &LayerGoodness<T>) -> Matrix<T> {
    let (b, d) = h.shape();
    let two = T::from_f64_lossy(2.0);
    let coupling = if b == 0 || d == 0 {
        T::zero()
    } else {
        goodness.global_weight() * s.iter().copied().sum::<T>() / T::from_usize(b * d).unwrap()
    };
    let coeffs = goodness.coeffs();
    let mut dz = Matrix::zeros(b, d);
    for (a, &sa) in s.iter().enumerate() {
        let hr = h.row(a);
        for ((o, &x), &c) in dz.row_mut(a).iter_mut().zip(hr).zip(coeffs) {
            *o = two * x * (c * sa + coupling);
        }
    }
    dz
}

fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        T::zero()
    } else {
        xs.iter().copied().sum::<T>() / T::from_usize(xs.len()).unwrap()
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + eˣ)` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Mean of `softplus(θ − g⁺)` over positives plus mean of `softplus(g⁻ − θ)`
/// over negatives.
pub fn ff_loss<T: Real>(g_pos: &[T], g_neg: &[T], theta: T) -> T {
    assert!(!g_pos.is_empty() && !g_neg.is_empty(), "loss needs both batches");
    let pos: Vec<T> = g_pos.iter().map(|&g| softplus(theta - g)).collect();
    let neg: Vec<T> = g_neg.iter().map(|&g| softplus(g - theta)).collect();
    mean(&pos) + mean(&neg)
}

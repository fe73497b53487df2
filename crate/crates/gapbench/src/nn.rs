//! Numeric kernel for the trainable imputer: a decomposition-linear backbone
//! (trend + seasonal temporal maps with a learned mask projection), the joint
//! reconstruction loss, hand-derived gradients, a bias-corrected Adam update,
//! and a finite-difference gradient checker.
//!
//! The backbone maps each (sample, feature) channel through the time axis:
//! the input is split into a moving-average trend component and a seasonal
//! residual, each passed through its own T x T linear map, the visibility
//! mask enters through a third additive T x T projection, and a per-step bias
//! is added. Weights are either shared across features or per-feature.
//!
//! Everything is pure and deterministic; reductions run in a fixed order.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Parameters of the backbone. `groups` is 1 when weights are shared across
/// features, or D for per-feature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    /// [groups x T x T] map applied to the trend component.
    pub trend: Array3<f64>,
    /// [groups x T x T] map applied to the seasonal residual.
    pub seasonal: Array3<f64>,
    /// [groups x T x T] additive projection of the visibility mask.
    pub mask_proj: Array3<f64>,
    /// [T] per-step bias.
    pub bias: Array1<f64>,
    /// Moving-average window for the trend/seasonal decomposition.
    pub ma_window: usize,
    /// Whether weights are shared across features.
    pub shared: bool,
    /// Feature count the model was built for.
    pub n_features: usize,
}

/// Gradient (or moment) storage shaped like the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensors {
    pub trend: Array3<f64>,
    pub seasonal: Array3<f64>,
    pub mask_proj: Array3<f64>,
    pub bias: Array1<f64>,
}

impl ParamTensors {
    pub fn zeros_like(params: &BackboneParams) -> Self {
        ParamTensors {
            trend: Array3::zeros(params.trend.dim()),
            seasonal: Array3::zeros(params.seasonal.dim()),
            mask_proj: Array3::zeros(params.mask_proj.dim()),
            bias: Array1::zeros(params.bias.len()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.trend
            .iter()
            .chain(self.seasonal.iter())
            .chain(self.mask_proj.iter())
            .chain(self.bias.iter())
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.trend.iter_mut().for_each(&mut f);
        self.seasonal.iter_mut().for_each(&mut f);
        self.mask_proj.iter_mut().for_each(&mut f);
        self.bias.iter_mut().for_each(&mut f);
    }

    pub fn scale(&mut self, c: f64) {
        self.for_each_mut(|v| *v *= c);
    }
}

impl BackboneParams {
    /// Fresh parameters with small uniform weights in [-scale, scale] and a
    /// zero bias. The moving-average window is clipped to the sequence length.
    pub fn init(
        seq_len: usize,
        n_features: usize,
        shared: bool,
        ma_window: usize,
        scale: f64,
        rng: &mut CounterRng,
    ) -> Self {
        let groups = if shared { 1 } else { n_features };
        let mut sample = |_: (usize, usize, usize)| rng.uniform(-scale, scale);
        let trend = Array3::from_shape_simple_fn((groups, seq_len, seq_len), || {
            sample((0, 0, 0))
        });
        let seasonal =
            Array3::from_shape_simple_fn((groups, seq_len, seq_len), || sample((0, 0, 0)));
        let mask_proj =
            Array3::from_shape_simple_fn((groups, seq_len, seq_len), || sample((0, 0, 0)));
        BackboneParams {
            trend,
            seasonal,
            mask_proj,
            bias: Array1::zeros(seq_len),
            ma_window: ma_window.clamp(1, seq_len),
            shared,
            n_features,
        }
    }

    pub fn seq_len(&self) -> usize {
        self.bias.len()
    }

    pub fn groups(&self) -> usize {
        self.trend.dim().0
    }

    /// Total scalar parameter count.
    pub fn n_params(&self) -> usize {
        self.trend.len() + self.seasonal.len() + self.mask_proj.len() + self.bias.len()
    }

    fn group_of(&self, feature: usize) -> usize {
        if self.shared {
            0
        } else {
            feature
        }
    }

    fn check_input(&self, x_in: &Array3<f64>, m_in: &Array3<u8>) -> Result<()> {
        if x_in.dim() != m_in.dim() {
            return Err(Error::ShapeMismatch(format!(
                "input {:?} vs mask {:?}",
                x_in.dim(),
                m_in.dim()
            )));
        }
        let (_, t, d) = x_in.dim();
        if t != self.seq_len() || d != self.n_features {
            return Err(Error::ShapeMismatch(format!(
                "model built for T={} D={}, got T={t} D={d}",
                self.seq_len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Reconstruct every cell of the batch. `x_in` must hold zeros at cells
    /// the model is not allowed to see (missing or held out); `m_in` is the
    /// matching visibility mask.
    pub fn forward(&self, x_in: &Array3<f64>, m_in: &Array3<u8>) -> Result<Array3<f64>> {
        self.check_input(x_in, m_in)?;
        let (b, t, d) = x_in.dim();
        let mut out = Array3::zeros((b, t, d));
        for bi in 0..b {
            let x = x_in.index_axis(Axis(0), bi);
            let trend_part = moving_average(&x, self.ma_window);
            let seasonal_part = &x - &trend_part;
            let mask_part = m_in.index_axis(Axis(0), bi).mapv(f64::from);
            let mut out_b = out.index_axis_mut(Axis(0), bi);
            if self.shared {
                let w_t = self.trend.index_axis(Axis(0), 0);
                let w_s = self.seasonal.index_axis(Axis(0), 0);
                let w_m = self.mask_proj.index_axis(Axis(0), 0);
                let mut acc = w_t.dot(&trend_part);
                acc += &w_s.dot(&seasonal_part);
                acc += &w_m.dot(&mask_part);
                out_b.assign(&acc);
            } else {
                for feat in 0..d {
                    let g = self.group_of(feat);
                    let col_t = trend_part.column(feat);
                    let col_s = seasonal_part.column(feat);
                    let col_m = mask_part.column(feat);
                    let acc = self.trend.index_axis(Axis(0), g).dot(&col_t)
                        + self.seasonal.index_axis(Axis(0), g).dot(&col_s)
                        + self.mask_proj.index_axis(Axis(0), g).dot(&col_m);
                    out_b.column_mut(feat).assign(&acc);
                }
            }
            for step in 0..t {
                for feat in 0..d {
                    out_b[[step, feat]] += self.bias[step];
                }
            }
        }
        Ok(out)
    }
}

/// Moving average along the time axis of a [T x D] slice, replicate-padded at
/// the edges so the output keeps shape T. The window is centered; for even
/// windows the extra tap sits on the right.
pub fn moving_average(x: &ArrayView2<f64>, window: usize) -> Array2<f64> {
    let (t, d) = x.dim();
    if window <= 1 {
        return x.to_owned();
    }
    let left = (window - 1) / 2;
    let mut out = Array2::zeros((t, d));
    for feat in 0..d {
        // prefix sums over the replicate-padded channel
        let mut acc = 0.0;
        let mut padded = Vec::with_capacity(t + window);
        for i in 0..t + window - 1 {
            let idx = i as isize - left as isize;
            let v = x[[idx.clamp(0, t as isize - 1) as usize, feat]];
            acc += v;
            padded.push(acc);
        }
        for step in 0..t {
            let hi = padded[step + window - 1];
            let lo = if step == 0 { 0.0 } else { padded[step - 1] };
            out[[step, feat]] = (hi - lo) / window as f64;
        }
    }
    out
}

/// The two masked reconstruction terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub ort: f64,
    pub mit: f64,
}

/// Joint loss: `ort` is the masked MAE of the reconstruction over cells the
/// model saw (observed-reconstruction task), `mit` over cells held out from
/// the input (masked-imputation task). Masks must be disjoint; an empty mask
/// contributes zero.
pub fn joint_loss(
    x_hat: &Array3<f64>,
    x_truth: &Array3<f64>,
    m_ort: &Array3<u8>,
    m_mit: &Array3<u8>,
    w_ort: f64,
    w_mit: f64,
) -> Result<LossTerms> {
    if x_hat.dim() != x_truth.dim() || x_hat.dim() != m_ort.dim() || x_hat.dim() != m_mit.dim() {
        return Err(Error::ShapeMismatch(format!(
            "loss inputs disagree: {:?} / {:?} / {:?} / {:?}",
            x_hat.dim(),
            x_truth.dim(),
            m_ort.dim(),
            m_mit.dim()
        )));
    }
    let mut overlap = false;
    let mut ort_sum = 0.0;
    let mut ort_n = 0usize;
    let mut mit_sum = 0.0;
    let mut mit_n = 0usize;
    for (((&h, &y), &mo), &mm) in x_hat
        .iter()
        .zip(x_truth.iter())
        .zip(m_ort.iter())
        .zip(m_mit.iter())
    {
        overlap |= mo == 1 && mm == 1;
        if mo == 1 {
            ort_sum += (h - y).abs();
            ort_n += 1;
        } else if mm == 1 {
            mit_sum += (h - y).abs();
            mit_n += 1;
        }
    }
    if overlap {
        return Err(Error::InvalidInput(
            "reconstruction and imputation masks overlap".into(),
        ));
    }
    let ort = if ort_n > 0 { ort_sum / ort_n as f64 } else { 0.0 };
    let mit = if mit_n > 0 { mit_sum / mit_n as f64 } else { 0.0 };
    Ok(LossTerms {
        total: w_ort * ort + w_mit * mit,
        ort,
        mit,
    })
}

/// One training batch: the masked input the model sees, the reconstruction
/// target, and the two disjoint loss masks with their weights.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    /// Input values with invisible cells zeroed, [B x T x D].
    pub x_in: Array3<f64>,
    /// Visibility mask matching `x_in`.
    pub m_in: Array3<u8>,
    /// Target values; must be finite wherever a loss mask is set.
    pub truth: Array3<f64>,
    pub m_ort: Array3<u8>,
    pub m_mit: Array3<u8>,
    pub w_ort: f64,
    pub w_mit: f64,
}

/// Exact subgradient of the joint loss with respect to every parameter,
/// using sign(0) = 0 for the absolute value.
pub fn gradient(params: &BackboneParams, batch: &TrainingBatch) -> Result<ParamTensors> {
    loss_and_gradient(params, batch).map(|(_, g)| g)
}

/// Loss terms and gradient in a single pass.
pub fn loss_and_gradient(
    params: &BackboneParams,
    batch: &TrainingBatch,
) -> Result<(LossTerms, ParamTensors)> {
    let x_hat = params.forward(&batch.x_in, &batch.m_in)?;
    let loss = joint_loss(
        &x_hat,
        &batch.truth,
        &batch.m_ort,
        &batch.m_mit,
        batch.w_ort,
        batch.w_mit,
    )?;

    let ort_n: usize = batch.m_ort.iter().map(|&m| m as usize).sum();
    let mit_n: usize = batch.m_mit.iter().map(|&m| m as usize).sum();
    let ort_scale = if ort_n > 0 {
        batch.w_ort / ort_n as f64
    } else {
        0.0
    };
    let mit_scale = if mit_n > 0 {
        batch.w_mit / mit_n as f64
    } else {
        0.0
    };

    // dL/d(x_hat)
    let (b, t, d) = x_hat.dim();
    let mut upstream = Array3::zeros((b, t, d));
    for (((u, (&h, &y)), &mo), &mm) in upstream
        .iter_mut()
        .zip(x_hat.iter().zip(batch.truth.iter()))
        .zip(batch.m_ort.iter())
        .zip(batch.m_mit.iter())
    {
        let e = h - y;
        let s = if e > 0.0 {
            1.0
        } else if e < 0.0 {
            -1.0
        } else {
            0.0
        };
        if mo == 1 {
            *u = ort_scale * s;
        } else if mm == 1 {
            *u = mit_scale * s;
        }
    }

    let mut grads = ParamTensors::zeros_like(params);
    for bi in 0..b {
        let x = batch.x_in.index_axis(Axis(0), bi);
        let trend_part = moving_average(&x, params.ma_window);
        let seasonal_part = &x - &trend_part;
        let mask_part = batch.m_in.index_axis(Axis(0), bi).mapv(f64::from);
        let up = upstream.index_axis(Axis(0), bi);
        if params.shared {
            // [T x D] . [D x T] accumulated over the batch
            let g_t = up.dot(&trend_part.t());
            let g_s = up.dot(&seasonal_part.t());
            let g_m = up.dot(&mask_part.t());
            grads.trend.index_axis_mut(Axis(0), 0).scaled_add(1.0, &g_t);
            grads
                .seasonal
                .index_axis_mut(Axis(0), 0)
                .scaled_add(1.0, &g_s);
            grads
                .mask_proj
                .index_axis_mut(Axis(0), 0)
                .scaled_add(1.0, &g_m);
        } else {
            for feat in 0..d {
                let g = params.group_of(feat);
                let u_col = up.column(feat);
                for row in 0..t {
                    let u_val = u_col[row];
                    if u_val == 0.0 {
                        continue;
                    }
                    for s in 0..t {
                        grads.trend[[g, row, s]] += u_val * trend_part[[s, feat]];
                        grads.seasonal[[g, row, s]] += u_val * seasonal_part[[s, feat]];
                        grads.mask_proj[[g, row, s]] += u_val * mask_part[[s, feat]];
                    }
                }
            }
        }
        for row in 0..t {
            for feat in 0..d {
                grads.bias[row] += up[[row, feat]];
            }
        }
    }
    Ok((loss, grads))
}

/// Central finite differences of the joint loss, the independent check for
/// the analytic gradient.
pub fn finite_difference_gradient(
    params: &BackboneParams,
    batch: &TrainingBatch,
    h: f64,
) -> Result<ParamTensors> {
    let mut work = params.clone();
    let mut out = ParamTensors::zeros_like(params);

    let eval = |p: &BackboneParams| -> Result<f64> {
        let x_hat = p.forward(&batch.x_in, &batch.m_in)?;
        Ok(joint_loss(
            &x_hat,
            &batch.truth,
            &batch.m_ort,
            &batch.m_mit,
            batch.w_ort,
            batch.w_mit,
        )?
        .total)
    };

    // the four tensors are perturbed coordinate by coordinate
    for field in 0..4usize {
        let len = match field {
            0 => work.trend.len(),
            1 => work.seasonal.len(),
            2 => work.mask_proj.len(),
            _ => work.bias.len(),
        };
        for i in 0..len {
            let read = |w: &BackboneParams| match field {
                0 => w.trend.as_slice().unwrap()[i],
                1 => w.seasonal.as_slice().unwrap()[i],
                2 => w.mask_proj.as_slice().unwrap()[i],
                _ => w.bias.as_slice().unwrap()[i],
            };
            let write = |w: &mut BackboneParams, v: f64| match field {
                0 => w.trend.as_slice_mut().unwrap()[i] = v,
                1 => w.seasonal.as_slice_mut().unwrap()[i] = v,
                2 => w.mask_proj.as_slice_mut().unwrap()[i] = v,
                _ => w.bias.as_slice_mut().unwrap()[i] = v,
            };
            let orig = read(&work);
            write(&mut work, orig + h);
            let up = eval(&work)?;
            write(&mut work, orig - h);
            let down = eval(&work)?;
            write(&mut work, orig);
            let der = (up - down) / (2.0 * h);
            match field {
                0 => out.trend.as_slice_mut().unwrap()[i] = der,
                1 => out.seasonal.as_slice_mut().unwrap()[i] = der,
                2 => out.mask_proj.as_slice_mut().unwrap()[i] = der,
                _ => out.bias.as_slice_mut().unwrap()[i] = der,
            }
        }
    }
    Ok(out)
}

/// Optimizer state: first/second moment accumulators and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment: ParamTensors,
    pub second_moment: ParamTensors,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &BackboneParams, learning_rate: f64) -> Self {
        AdamState {
            first_moment: ParamTensors::zeros_like(params),
            second_moment: ParamTensors::zeros_like(params),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Standard bias-corrected Adam update. Returns the advanced state and the
/// updated parameters; inputs are untouched.
pub fn adam_step(
    state: &AdamState,
    params: &BackboneParams,
    grads: &ParamTensors,
) -> Result<(AdamState, BackboneParams)> {
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training(
            "non-finite gradient encountered; aborting the update".into(),
        ));
    }
    let mut next_state = state.clone();
    let mut next_params = params.clone();
    next_state.step += 1;
    let step = next_state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(step);
    let bc2 = 1.0 - state.beta2.powi(step);

    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64, st: &AdamState| {
        *m = st.beta1 * *m + (1.0 - st.beta1) * g;
        *v = st.beta2 * *v + (1.0 - st.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= st.learning_rate * m_hat / (v_hat.sqrt() + st.epsilon);
    };

    macro_rules! apply {
        ($field:ident) => {
            for ((p, (m, v)), g) in next_params
                .$field
                .iter_mut()
                .zip(
                    next_state
                        .first_moment
                        .$field
                        .iter_mut()
                        .zip(next_state.second_moment.$field.iter_mut()),
                )
                .zip(grads.$field.iter())
            {
                update(p, m, v, *g, state);
            }
        };
    }
    apply!(trend);
    apply!(seasonal);
    apply!(mask_proj);
    apply!(bias);
    Ok((next_state, next_params))
}

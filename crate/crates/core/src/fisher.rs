//! Fisher vectors: averaged score gradients of a diagonal GMM with respect
//! to the weight parameters α, the means and the inverse variances.
//!
//! For a feature `x`, responsibility `q_i` and `x_i = x - μ_i`:
//!
//! ```text
//! ∂/∂α_i    = q_i - θ_i
//! ∂/∂μ_i    = q_i Σ_i⁻¹ x_i
//! ∂/∂Σ_i⁻¹  = q_i (Σ_i - x_i²) / 2        (element-wise)
//! ```
//!
//! Gradients are averaged over all features of a clip, then power and L2
//! normalized.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::SensorStream;
use crate::error::{Error, Result};
use crate::gmm::GmmCodebook;
use crate::pca::PcaModel;
use crate::sensor::{enhance, extract_windows, WindowMode};

/// Block structure of a Fisher vector.
///
/// `Gmm` vectors hold the α block (`K` values) first, then for each modality
/// in `dims` its mean block and its inverse-variance block, each `K x dim`
/// in cluster-major order. A single-modality vector is therefore
/// `[α | μ | Σ⁻¹]` and a multimodal one `[α | μx | Σx⁻¹ | μs | Σs⁻¹]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FvLayout {
    Gmm { components: usize, dims: Vec<usize> },
    Concat(Vec<FvLayout>),
}

impl FvLayout {
    pub fn single(components: usize, dim: usize) -> Self {
        FvLayout::Gmm {
            components,
            dims: vec![dim],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FvLayout::Gmm { components, dims } => components * (1 + 2 * dims.iter().sum::<usize>()),
            FvLayout::Concat(parts) => parts.iter().map(FvLayout::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherVector {
    pub values: Array1<f64>,
    pub layout: FvLayout,
    pub normalized: bool,
}

impl FisherVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.dot(&self.values).sqrt()
    }

    /// `(α, μ, Σ⁻¹)` views of a single-modality vector.
    pub fn blocks(&self) -> Option<(ArrayView1<'_, f64>, ArrayView2<'_, f64>, ArrayView2<'_, f64>)> {
        let FvLayout::Gmm { components: k, dims } = &self.layout else {
            return None;
        };
        let [dim] = dims.as_slice() else {
            return None;
        };
        let (k, dim) = (*k, *dim);
        let alpha = self.values.slice(ndarray::s![..k]);
        let mu = self
            .values
            .slice(ndarray::s![k..k + k * dim])
            .into_shape_with_order((k, dim))
            .ok()?;
        let prec = self
            .values
            .slice(ndarray::s![k + k * dim..])
            .into_shape_with_order((k, dim))
            .ok()?;
        Some((alpha, mu, prec))
    }
}

/// Adds one feature's μ and Σ⁻¹ gradients, weighted by its posteriors, into
/// the cluster-major blocks.
pub(crate) fn accumulate_gaussian_grads(
    q: ArrayView1<f64>,
    x: ArrayView1<f64>,
    means: ArrayView2<f64>,
    variances: ArrayView2<f64>,
    mut mu_block: ArrayViewMut1<f64>,
    mut prec_block: ArrayViewMut1<f64>,
) {
    let dim = x.len();
    for (i, &qi) in q.iter().enumerate() {
        if qi == 0.0 {
            continue;
        }
        let base = i * dim;
        for d in 0..dim {
            let diff = x[d] - means[[i, d]];
            let var = variances[[i, d]];
            mu_block[base + d] += qi * diff / var;
            prec_block[base + d] += qi * 0.5 * (var - diff * diff);
        }
    }
}

/// Unnormalized Fisher vector of the rows of `features`.
pub fn encode_fv(codebook: &GmmCodebook, features: ArrayView2<f64>) -> Result<FisherVector> {
    let (n, dim) = features.dim();
    if n == 0 {
        return Err(Error::validation("cannot encode an empty feature set"));
    }
    if dim != codebook.dim() {
        return Err(Error::validation(format!(
            "features have {dim} dims, codebook expects {}",
            codebook.dim()
        )));
    }
    let k = codebook.components();
    let layout = FvLayout::single(k, dim);
    let mut values = Array1::zeros(layout.len());
    {
        let (alpha, rest) = values.view_mut().split_at(Axis(0), k);
        let (mut mu, mut prec) = rest.split_at(Axis(0), k * dim);
        let mut alpha = alpha;
        for x in features.rows() {
            let q = codebook.responsibilities(x)?;
            alpha += &q;
            accumulate_gaussian_grads(
                q.view(),
                x,
                codebook.means.view(),
                codebook.variances.view(),
                mu.view_mut(),
                prec.view_mut(),
            );
        }
    }
    finish_average(&mut values, n, k, codebook.weights.view());
    Ok(FisherVector {
        values,
        layout,
        normalized: false,
    })
}

/// Divides accumulated sums by `n` and turns the posterior sums in the α
/// block into `mean(q) - θ`.
pub(crate) fn finish_average(values: &mut Array1<f64>, n: usize, k: usize, weights: ArrayView1<f64>) {
    *values /= n as f64;
    for i in 0..k {
        values[i] -= weights[i];
    }
}

/// Signed square root followed by L2 normalization. The zero vector stays
/// zero.
pub fn normalize_fv(fv: &FisherVector) -> Result<FisherVector> {
    if fv.normalized {
        return Err(Error::validation("Fisher vector is already normalized"));
    }
    if fv.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("Fisher vector has non-finite entries"));
    }
    let mut values = fv.values.mapv(|z| z.signum() * z.abs().sqrt());
    let norm = values.dot(&values).sqrt();
    if norm > 0.0 {
        values /= norm;
    } else {
        values.fill(0.0);
    }
    Ok(FisherVector {
        values,
        layout: fv.layout.clone(),
        normalized: true,
    })
}

/// How sensor streams become per-window feature rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorFeatureParams {
    pub window: usize,
    pub stages: usize,
    pub mode: WindowMode,
    /// Append the normalized stage order after reduction (TFVS) or not (FVS).
    pub temporal: bool,
}

impl Default for SensorFeatureParams {
    fn default() -> Self {
        SensorFeatureParams {
            window: 3,
            stages: 4,
            mode: WindowMode::Displacement,
            temporal: true,
        }
    }
}

/// Window features of one stream, one row per window, plus each window's
/// normalized stage order.
pub fn sensor_windows(stream: &SensorStream, params: &SensorFeatureParams) -> Result<(Array2<f64>, Vec<f64>)> {
    let windows = extract_windows(stream, params.window, params.mode)?;
    let dim = params.mode.feature_dim(params.window, stream.channels());
    let enhanced = enhance(windows, stream.len(), params.window, params.stages.max(1))?;
    let mut matrix = Array2::zeros((enhanced.len(), dim));
    let mut orders = Vec::with_capacity(enhanced.len());
    for (mut row, e) in matrix.rows_mut().into_iter().zip(&enhanced) {
        row.assign(&ArrayView1::from(&e.base.vector));
        orders.push(e.order);
    }
    Ok((matrix, orders))
}

/// Applies the optional PCA, then appends the order column when `temporal`.
pub fn reduce_sensor_features(
    windows: ArrayView2<f64>,
    orders: &[f64],
    pca: Option<&PcaModel>,
    temporal: bool,
) -> Result<Array2<f64>> {
    let reduced = match pca {
        Some(p) => p.transform(windows)?,
        None => windows.to_owned(),
    };
    if !temporal {
        return Ok(reduced);
    }
    if orders.len() != reduced.nrows() {
        return Err(Error::validation("one order value per window required"));
    }
    let order_col = Array2::from_shape_vec((orders.len(), 1), orders.to_vec())
        .map_err(|e| Error::validation(e.to_string()))?;
    ndarray::concatenate(Axis(1), &[reduced.view(), order_col.view()])
        .map_err(|e| Error::validation(e.to_string()))
}

/// Per-window sensor features of a stream, ready for the sensor GMM.
pub fn sensor_features(
    stream: &SensorStream,
    pca: Option<&PcaModel>,
    params: &SensorFeatureParams,
) -> Result<Array2<f64>> {
    let (windows, orders) = sensor_windows(stream, params)?;
    reduce_sensor_features(windows.view(), &orders, pca, params.temporal)
}

/// Normalized sensor Fisher vector: TFVS when `params.temporal`, FVS
/// otherwise.
pub fn encode_sensor_fv(
    stream: &SensorStream,
    pca: Option<&PcaModel>,
    sensor_gmm: &GmmCodebook,
    params: &SensorFeatureParams,
) -> Result<FisherVector> {
    let features = sensor_features(stream, pca, params)?;
    normalize_fv(&encode_fv(sensor_gmm, features.view())?)
}

/// Temporal-enhanced sensor Fisher vector: windows, PCA to `d`, order
/// appended, encoded against a GMM over the `d + 1` dimensional features,
/// power/L2 normalized.
pub fn encode_tfvs(
    stream: &SensorStream,
    pca: &PcaModel,
    sensor_gmm: &GmmCodebook,
    window: usize,
    stages: usize,
    mode: WindowMode,
) -> Result<FisherVector> {
    let params = SensorFeatureParams {
        window,
        stages,
        mode,
        temporal: true,
    };
    encode_sensor_fv(stream, Some(pca), sensor_gmm, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_component_alpha_block_is_zero() {
        let gmm = GmmCodebook::from_parts(array![1.0], array![[0.5, -1.0]], array![[2.0, 0.5]]).unwrap();
        let feats = array![[1.0, 2.0], [-3.0, 0.0], [0.2, 0.1]];
        let fv = encode_fv(&gmm, feats.view()).unwrap();
        assert_eq!(fv.values[0], 0.0);
        assert_eq!(fv.len(), 5);
    }

    #[test]
    fn feature_at_mean() {
        let gmm = GmmCodebook::from_parts(array![1.0], array![[0.5, -1.0]], array![[2.0, 0.5]]).unwrap();
        let fv = encode_fv(&gmm, array![[0.5, -1.0]].view()).unwrap();
        let (alpha, mu, prec) = fv.blocks().unwrap();
        assert_eq!(alpha[0], 0.0);
        assert!(mu.iter().all(|&v| v == 0.0));
        assert_eq!(prec.row(0).to_vec(), vec![1.0, 0.25]);
    }

    #[test]
    fn empty_or_mismatched_input() {
        let gmm = GmmCodebook::from_parts(array![1.0], array![[0.0]], array![[1.0]]).unwrap();
        assert!(encode_fv(&gmm, Array2::zeros((0, 1)).view()).is_err());
        assert!(encode_fv(&gmm, Array2::zeros((2, 3)).view()).is_err());
    }

    #[test]
    fn normalization_examples() {
        let fv = FisherVector {
            values: array![4.0, -9.0],
            layout: FvLayout::Concat(vec![]),
            normalized: false,
        };
        let n = normalize_fv(&fv).unwrap();
        let s = 13.0_f64.sqrt();
        assert!((n.values[0] - 2.0 / s).abs() < 1e-15);
        assert!((n.values[1] + 3.0 / s).abs() < 1e-15);
        assert!((n.norm() - 1.0).abs() < 1e-12);
        assert!(normalize_fv(&n).is_err());

        let zero = FisherVector {
            values: Array1::zeros(6),
            layout: FvLayout::single(2, 1),
            normalized: false,
        };
        let z = normalize_fv(&zero).unwrap();
        assert!(z.normalized && z.values.iter().all(|&v| v == 0.0));

        let bad = FisherVector {
            values: array![1.0, f64::INFINITY],
            ..fv
        };
        assert!(normalize_fv(&bad).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let gmm = GmmCodebook::from_parts(
            array![0.3, 0.7],
            array![[0.0, 1.0], [2.0, -1.0]],
            array![[1.0, 0.5], [0.7, 2.0]],
        )
        .unwrap();
        let feats = array![[0.1, 0.2], [1.5, -0.3], [3.0, 3.0], [-1.0, 0.0]];
        let mut rev = feats.clone();
        rev.invert_axis(Axis(0));
        let a = encode_fv(&gmm, feats.view()).unwrap();
        let b = encode_fv(&gmm, rev.view()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn layout_lengths() {
        assert_eq!(FvLayout::single(4, 19).len(), 156);
        assert_eq!(FvLayout::single(25, 223).len(), 11175);
        let mfv = FvLayout::Gmm {
            components: 25,
            dims: vec![213, 19],
        };
        assert_eq!(mfv.len(), 11625);
    }
}

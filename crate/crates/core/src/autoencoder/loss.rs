//! Reconstruction and manifold-alignment losses with their exact gradients.
//!
//! For an example with class `c`, the combined semantic vector is
//! `s = [S^p_c | z]` and the alignment term is `1 − cos(s, o_c)`. Only the `z`
//! block of `s` depends on the network parameters.

use log::warn;

use super::model::AutoencoderModel;
use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::manifold::EmbeddedManifold;
use crate::numerics::{dot, l2_norm, DenseMatrix};

/// Per-class pre-defined prototypes and manifold targets `o_j`.
#[derive(Clone, Debug)]
pub struct AlignmentTargets {
    class_ids: Vec<ClassId>,
    predefined: DenseMatrix,
    targets: DenseMatrix,
    target_norms: Vec<f64>,
    active: Vec<bool>,
}

impl AlignmentTargets {
    /// `predefined` is `m × n`, `manifold` is `(n+k) × m`, both in the manifold's class order.
    /// Every `o_j` must have non-zero norm.
    pub fn new(predefined: &DenseMatrix, manifold: &EmbeddedManifold) -> Result<Self> {
        let targets = Self::build(predefined, manifold)?;
        if targets.active.iter().any(|a| !a) {
            return Err(Error::DegenerateVector("manifold target o_j"));
        }
        Ok(targets)
    }

    /// Like [`new`](Self::new), but classes whose `o_j` is zero are marked
    /// inactive (they contribute nothing to the alignment loss) and returned.
    pub fn excluding_degenerate(predefined: &DenseMatrix, manifold: &EmbeddedManifold) -> Result<(Self, Vec<ClassId>)> {
        let targets = Self::build(predefined, manifold)?;
        let excluded: Vec<ClassId> = targets
            .class_ids
            .iter()
            .zip(&targets.active)
            .filter(|(_, &a)| !a)
            .map(|(c, _)| *c)
            .collect();
        for c in &excluded {
            warn!("class {c} has a zero-norm manifold target and is excluded from alignment");
        }
        Ok((targets, excluded))
    }

    fn build(predefined: &DenseMatrix, manifold: &EmbeddedManifold) -> Result<Self> {
        let m = manifold.class_ids.len();
        if predefined.rows() != m {
            return Err(Error::dimension("alignment prototypes", m, predefined.rows()));
        }
        if manifold.dim() <= predefined.cols() {
            return Err(Error::dimension(
                "alignment target dimension",
                format!("more than n = {}", predefined.cols()),
                manifold.dim(),
            ));
        }
        let targets = manifold.columns();
        let target_norms: Vec<f64> = targets.row_iter().map(l2_norm).collect();
        let active = target_norms.iter().map(|&n| n > 0.0).collect();
        Ok(AlignmentTargets {
            class_ids: manifold.class_ids.clone(),
            predefined: predefined.clone(),
            targets,
            target_norms,
            active,
        })
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    /// Expanded dimension `k`.
    pub fn latent_dim(&self) -> usize {
        self.targets.cols() - self.predefined.cols()
    }

    pub fn is_active(&self, class: usize) -> bool {
        self.active[class]
    }

    fn position(&self, label: ClassId) -> Result<usize> {
        self.class_ids
            .binary_search(&label)
            .map_err(|_| Error::UnknownLabel(label))
    }

    /// `1 − cos([S^p_c | z], o_c)` and, when `grad` is given, its gradient w.r.t. `z` added into it.
    fn term(&self, class: usize, z: &[f64], grad: Option<(&mut [f64], f64)>) -> Result<f64> {
        let p = self.predefined.row(class);
        let o = self.targets.row(class);
        let (o_p, o_z) = o.split_at(p.len());
        let s_dot_o = dot(p, o_p) + dot(z, o_z);
        let s_norm = (dot(p, p) + dot(z, z)).sqrt();
        let o_norm = self.target_norms[class];
        if s_norm == 0.0 {
            return Err(Error::DegenerateVector("combined semantic vector S^{p+e}"));
        }
        if o_norm == 0.0 {
            return Err(Error::DegenerateVector("manifold target o_j"));
        }
        let cos = s_dot_o / (s_norm * o_norm);
        if let Some((g, scale)) = grad {
            // ∂(1 − cos)/∂z = −(o_z − (s·o/‖s‖²) z) / (‖s‖‖o‖)
            let a = -scale / (s_norm * o_norm);
            let b = s_dot_o / (s_norm * s_norm);
            for ((gi, &oz), &zi) in g.iter_mut().zip(o_z).zip(z) {
                *gi += a * (oz - b * zi);
            }
        }
        Ok(1.0 - cos)
    }
}

/// Weights of the unified objective `α·L_r + β·L_a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub alpha: f64,
    pub beta: f64,
}

impl Objective {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::parameter(format!(
                "objective weights need alpha, beta >= 0 and alpha + beta > 0 (got {alpha}, {beta})"
            )));
        }
        Ok(Objective { alpha, beta })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub alignment: f64,
}

/// Gradient of one layer's weights and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(model: &AutoencoderModel) -> Self {
        Gradients {
            layers: model
                .layers()
                .iter()
                .map(|l| LayerGradient {
                    weights: DenseMatrix::zeros(l.output_dim(), l.input_dim()),
                    bias: vec![0.0; l.output_dim()],
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.is_finite() && g.bias.iter().all(|v| v.is_finite()))
    }
}

/// `Σ ‖x_i − x̂_i‖²`
pub fn reconstruction_loss(x: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dimension(
            "reconstruction loss",
            format!("{:?}", x.shape()),
            format!("{:?}", x_hat.shape()),
        ));
    }
    Ok(x.as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `Σ_i (1 − cos([S^p_{y_i} | z_i], o_{y_i}))` over active classes.
pub fn alignment_loss(z: &DenseMatrix, labels: &[ClassId], targets: &AlignmentTargets) -> Result<f64> {
    if z.rows() != labels.len() {
        return Err(Error::dimension("alignment batch labels", z.rows(), labels.len()));
    }
    if z.cols() != targets.latent_dim() {
        return Err(Error::dimension("alignment code dimension", targets.latent_dim(), z.cols()));
    }
    let mut total = 0.0;
    for (row, &label) in z.row_iter().zip(labels) {
        let c = targets.position(label)?;
        if targets.is_active(c) {
            total += targets.term(c, row, None)?;
        }
    }
    Ok(total)
}

fn check_batch(model: &AutoencoderModel, x: &DenseMatrix, labels: &[ClassId], targets: Option<&AlignmentTargets>) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::parameter("empty batch"));
    }
    if x.cols() != model.input_dim() {
        return Err(Error::dimension("batch feature width", model.input_dim(), x.cols()));
    }
    if let Some(t) = targets {
        if labels.len() != x.rows() {
            return Err(Error::dimension("batch labels", x.rows(), labels.len()));
        }
        if t.latent_dim() != model.latent_dim() {
            return Err(Error::dimension("alignment code dimension", model.latent_dim(), t.latent_dim()));
        }
    }
    Ok(())
}

/// `α·L_r + β·L_a` on a batch. Without targets the alignment part is zero.
pub fn total_loss(
    model: &AutoencoderModel,
    x: &DenseMatrix,
    labels: &[ClassId],
    targets: Option<&AlignmentTargets>,
    objective: Objective,
) -> Result<LossBreakdown> {
    check_batch(model, x, labels, targets)?;
    let mut rec = 0.0;
    let mut align = 0.0;
    for (i, row) in x.row_iter().enumerate() {
        let (z, x_hat) = model.forward(row)?;
        rec += row.iter().zip(&x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        if let Some(t) = targets {
            let c = t.position(labels[i])?;
            if t.is_active(c) {
                align += t.term(c, &z, None)?;
            }
        }
    }
    Ok(LossBreakdown {
        total: objective.alpha * rec + objective.beta * align,
        reconstruction: rec,
        alignment: align,
    })
}

/// Loss and exact gradients of `α·L_r + β·L_a` w.r.t. every weight and bias.
///
/// Examples are accumulated in index order, so results are bit-reproducible.
pub fn backward(
    model: &AutoencoderModel,
    x: &DenseMatrix,
    labels: &[ClassId],
    targets: Option<&AlignmentTargets>,
    objective: Objective,
) -> Result<(LossBreakdown, Gradients)> {
    check_batch(model, x, labels, targets)?;
    let layers = model.layers();
    let latent = model.latent_layer();
    let mut grads = Gradients::zeros_like(model);
    let mut rec = 0.0;
    let mut align = 0.0;

    for (i, row) in x.row_iter().enumerate() {
        let acts = model.trace(row);
        let x_hat = acts.last().unwrap();

        let mut upstream: Vec<f64> = x_hat
            .iter()
            .zip(row)
            .map(|(h, x)| {
                rec += (x - h) * (x - h);
                2.0 * objective.alpha * (h - x)
            })
            .collect();
        let mut align_grad = None;
        if let Some(t) = targets {
            let c = t.position(labels[i])?;
            if t.is_active(c) {
                let z = &acts[latent + 1];
                let mut g = vec![0.0; z.len()];
                let scale = if objective.beta != 0.0 { Some((g.as_mut_slice(), objective.beta)) } else { None };
                align += t.term(c, z, scale)?;
                if objective.beta != 0.0 {
                    align_grad = Some(g);
                }
            }
        }

        for l in (0..layers.len()).rev() {
            if l == latent {
                if let Some(g) = &align_grad {
                    for (u, v) in upstream.iter_mut().zip(g) {
                        *u += v;
                    }
                }
            }
            let layer = &layers[l];
            let out = &acts[l + 1];
            let input = &acts[l];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(out)
                .map(|(u, y)| u * layer.activation.derivative_from_output(*y))
                .collect();
            let lg = &mut grads.layers[l];
            for (r, &dr) in delta.iter().enumerate() {
                if dr == 0.0 {
                    continue;
                }
                lg.bias[r] += dr;
                for (w, a) in lg.weights.row_mut(r).iter_mut().zip(input) {
                    *w += dr * a;
                }
            }
            if l > 0 {
                upstream = layer.weights.tr_matvec(&delta)?;
            }
        }
    }
    let loss = LossBreakdown {
        total: objective.alpha * rec + objective.beta * align,
        reconstruction: rec,
        alignment: align,
    };
    Ok((loss, grads))
}
